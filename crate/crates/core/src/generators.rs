//! Fixture instances and seeded random instances.
//!
//! The fixtures are the standard counterexamples for multi-agent contracts:
//! a randomized/deterministic gap, an instance whose randomized supremum is
//! not attained, the virtual-cost tightness family, and the two Bayesian
//! analogues. Action index 0 is always the "up" (working) action and index 1
//! the free "down" action in these fixtures.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::bayes::{
    AgentType, BayesAgent, BayesDetEntry, BayesDeterministicContract, BayesianInstance,
    OutcomeModel,
};
use crate::error::{Error, Result};
use crate::model::{Action, ActionProfile, Agent, Instance, Outcome, ProfileSpace, RandomizedContract};

/// Largest number of agents a two-action fixture family may produce.
pub const MAX_FIXTURE_AGENTS: usize = 16;
/// Largest action-profile (or type-profile) table a random generator may produce.
pub const MAX_RANDOM_PROFILES: usize = 1 << 12;

#[derive(Debug, Clone, PartialEq)]
pub struct RandomSpec {
    pub seed: u64,
    pub agents: usize,
    pub actions: usize,
    pub outcomes: usize,
    pub cost_scale: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RandomBayesSpec {
    pub seed: u64,
    pub agents: usize,
    pub actions: usize,
    pub outcomes: usize,
    pub types: usize,
    pub cost_scale: f64,
    /// Draw one outcome table shared by all type profiles.
    pub type_independent: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub enum GeneratorSpec {
    Gap,
    NoSupremum,
    Tightness { alpha: f64, eps: f64 },
    BayesGap { alpha: f64 },
    BayesTightness { alpha: f64, eps: f64 },
    Random(RandomSpec),
    RandomBayes(RandomBayesSpec),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Generated {
    Instance(Instance),
    Bayesian(BayesianInstance),
}

pub fn generate(spec: &GeneratorSpec) -> Result<Generated> {
    Ok(match spec {
        GeneratorSpec::Gap => Generated::Instance(gap()),
        GeneratorSpec::NoSupremum => Generated::Instance(no_supremum()),
        GeneratorSpec::Tightness { alpha, eps } => Generated::Instance(tightness(*alpha, *eps)?),
        GeneratorSpec::BayesGap { alpha } => Generated::Bayesian(bayes_gap(*alpha)?),
        GeneratorSpec::BayesTightness { alpha, eps } => {
            Generated::Bayesian(bayes_tightness(*alpha, *eps)?)
        }
        GeneratorSpec::Random(s) => Generated::Instance(random_instance(s)?),
        GeneratorSpec::RandomBayes(s) => Generated::Bayesian(random_bayesian(s)?),
    })
}

fn up_down(i: usize, up_cost: f64) -> Agent {
    Agent {
        name: format!("agent{}", i + 1),
        actions: vec![
            Action {
                name: "a_up".into(),
                cost: up_cost,
            },
            Action {
                name: "a_down".into(),
                cost: 0.0,
            },
        ],
    }
}

fn outcomes(rewards: &[f64]) -> Vec<Outcome> {
    rewards
        .iter()
        .enumerate()
        .map(|(w, &r)| Outcome {
            name: format!("w{}", w + 1),
            reward: r,
        })
        .collect()
}

/// Two agents where a randomized contract earns 1/15 and no deterministic
/// contract earns anything.
pub fn gap() -> Instance {
    Instance {
        agents: vec![up_down(0, 2.0 / 5.0), up_down(1, 2.0 / 5.0)],
        outcomes: outcomes(&[1.0, 0.0]),
        distributions: vec![
            vec![1.0, 0.0],
            vec![2.0 / 5.0, 3.0 / 5.0],
            vec![2.0 / 5.0, 3.0 / 5.0],
            vec![0.0, 1.0],
        ],
    }
}

/// The randomized contract on [`gap`]: uniform over every profile except
/// (down, down), paying 2 on success to an agent that works alone.
pub fn gap_contract() -> RandomizedContract {
    let third = 1.0 / 3.0;
    let mut pi = vec![vec![vec![0.0; 2]; 4]; 2];
    pi[0][1][0] = 2.0;
    pi[1][2][0] = 2.0;
    RandomizedContract {
        mu: vec![third, third, third, 0.0],
        pi,
    }
}

/// Two agents, four outcomes; randomized values approach 3/4 without reaching it.
pub fn no_supremum() -> Instance {
    Instance {
        agents: vec![up_down(0, 0.0), up_down(1, 1.0 / 4.0)],
        outcomes: outcomes(&[0.0, 0.0, 0.0, 1.0]),
        distributions: vec![
            vec![1.0, 0.0, 0.0, 0.0],
            vec![0.0, 1.0, 0.0, 0.0],
            vec![0.0, 0.0, 0.0, 1.0],
            vec![0.0, 0.0, 0.5, 0.5],
        ],
    }
}

/// The contract on [`no_supremum`] worth `3/4 − eps`: recommend (up, up) with
/// probability `eps` and (down, up) otherwise, paying agent 2 `1/(4 eps)` on ω₁.
pub fn no_supremum_contract(eps: f64) -> Result<RandomizedContract> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::Parameter(format!("eps must lie in (0,1), got {eps}")));
    }
    let mut pi = vec![vec![vec![0.0; 4]; 4]; 2];
    pi[1][0][0] = 1.0 / (4.0 * eps);
    Ok(RandomizedContract {
        mu: vec![eps, 0.0, 1.0 - eps, 0.0],
        pi,
    })
}

/// `⌈x⌉`, except that values within rounding noise of an integer round to it.
fn ceil_guarded(x: f64) -> f64 {
    let r = x.round();
    if (x - r).abs() <= 1e-9 * r.max(1.0) {
        r
    } else {
        x.ceil()
    }
}

/// Number of agents in the tightness family: `⌈eps^{-1/alpha}⌉`.
pub fn tightness_agents(alpha: f64, eps: f64) -> Result<usize> {
    if !(alpha.is_finite() && alpha > 0.0 && eps.is_finite() && eps > 0.0) {
        return Err(Error::Parameter(format!(
            "tightness needs alpha > 0 and eps > 0, got alpha={alpha}, eps={eps}"
        )));
    }
    let n = ceil_guarded(eps.powf(-1.0 / alpha)).max(1.0);
    if n > MAX_FIXTURE_AGENTS as f64 {
        return Err(Error::Parameter(format!(
            "alpha={alpha}, eps={eps} needs {n} agents; at most {MAX_FIXTURE_AGENTS} are supported"
        )));
    }
    Ok(n as usize)
}

/// `n` agents with success probability `1 − #down/n` and cost `1/(2n^{2−α})` to work.
pub fn tightness(alpha: f64, eps: f64) -> Result<Instance> {
    let n = tightness_agents(alpha, eps)?;
    let nf = n as f64;
    let cost = 1.0 / (2.0 * nf.powf(2.0 - alpha));
    if cost > 1.0 {
        return Err(Error::Parameter(format!(
            "alpha={alpha} gives working cost {cost} > 1"
        )));
    }
    let space = ProfileSpace::new(vec![2; n]);
    let distributions = space
        .iter()
        .map(|p| {
            let down = p.0.iter().filter(|&&a| a == 1).count() as f64;
            vec![1.0 - down / nf, down / nf]
        })
        .collect();
    Ok(Instance {
        agents: (0..n).map(|i| up_down(i, cost)).collect(),
        outcomes: outcomes(&[1.0, 0.0]),
        distributions,
    })
}

fn bayes_up_down(i: usize, types: [(&str, f64); 2]) -> BayesAgent {
    BayesAgent {
        name: format!("agent{}", i + 1),
        actions: vec!["a_up".into(), "a_down".into()],
        types: types
            .iter()
            .map(|&(name, value)| AgentType {
                name: name.into(),
                value,
            })
            .collect(),
    }
}

/// Single-dimensional costs `value × base` for two-action agents whose down action is free.
fn single_dimensional_costs(agents: &[BayesAgent], up_base: f64) -> (Vec<Vec<Vec<f64>>>, Vec<Vec<f64>>) {
    let base: Vec<Vec<f64>> = agents.iter().map(|_| vec![up_base, 0.0]).collect();
    let costs = agents
        .iter()
        .zip(&base)
        .map(|(a, b)| {
            a.types
                .iter()
                .map(|t| b.iter().map(|&c| t.value * c).collect())
                .collect()
        })
        .collect();
    (costs, base)
}

/// Two agents with independent types `{1, 3/α}` where virtual welfare at
/// scale `1/α` is positive yet deterministic contracts earn nothing.
pub fn bayes_gap(alpha: f64) -> Result<BayesianInstance> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Parameter(format!("bayes_gap needs alpha in (0,1), got {alpha}")));
    }
    let agents: Vec<BayesAgent> = (0..2)
        .map(|i| bayes_up_down(i, [("t_up", 1.0), ("t_down", 3.0 / alpha)]))
        .collect();
    let (costs, base) = single_dimensional_costs(&agents, alpha / 3.0);
    if costs.iter().flatten().flatten().any(|&c| c > 1.0) {
        return Err(Error::Parameter(format!("alpha={alpha} gives a cost above 1")));
    }
    let denom = 1.0 - alpha / 3.0 + alpha * alpha / 9.0;
    let g = [(alpha * alpha / 9.0) / denom, (1.0 - alpha / 3.0) / denom];
    let prior = vec![g[0] * g[0], g[0] * g[1], g[1] * g[0], g[1] * g[1]];
    let mixed = vec![alpha / 3.0, 1.0 - alpha / 3.0];
    Ok(BayesianInstance {
        agents,
        outcomes: outcomes(&[1.0, 0.0]),
        prior,
        costs,
        base_costs: Some(base),
        outcome_model: OutcomeModel::TypeIndependent(vec![
            vec![1.0, 0.0],
            mixed.clone(),
            mixed,
            vec![0.0, 1.0],
        ]),
    })
}

/// Number of agents in the Bayesian tightness family: `⌈(2/eps)^{2/alpha}⌉`.
pub fn bayes_tightness_agents(alpha: f64, eps: f64) -> Result<usize> {
    if !(alpha.is_finite() && alpha > 0.0 && eps > 0.0 && eps < 1.0) {
        return Err(Error::Parameter(format!(
            "bayes_tightness needs alpha > 0 and eps in (0,1), got alpha={alpha}, eps={eps}"
        )));
    }
    let n = ceil_guarded((2.0 / eps).powf(2.0 / alpha));
    if n > MAX_FIXTURE_AGENTS as f64 {
        return Err(Error::Parameter(format!(
            "alpha={alpha}, eps={eps} needs {n} agents; at most {MAX_FIXTURE_AGENTS} are supported"
        )));
    }
    Ok(n as usize)
}

/// `γ = n^{−α/2} + 1` for the Bayesian tightness family.
pub fn bayes_tightness_gamma(n: usize, alpha: f64) -> f64 {
    (n as f64).powf(-alpha / 2.0) + 1.0
}

/// `n` agents with types `{0, 1}`; success needs everyone to work, and the
/// prior puts mass only on profiles with at most one costly type.
pub fn bayes_tightness(alpha: f64, eps: f64) -> Result<BayesianInstance> {
    let n = bayes_tightness_agents(alpha, eps)?;
    let nf = n as f64;
    let agents: Vec<BayesAgent> = (0..n)
        .map(|i| bayes_up_down(i, [("t_up", 0.0), ("t_down", 1.0)]))
        .collect();
    let (costs, base) = single_dimensional_costs(&agents, 1.0 / (2.0 * nf.powf(1.0 - alpha)));
    if costs.iter().flatten().flatten().any(|&c| c > 1.0) {
        return Err(Error::Parameter(format!("alpha={alpha} gives a cost above 1")));
    }
    let gamma = bayes_tightness_gamma(n, alpha);
    let tspace = ProfileSpace::new(vec![2; n]);
    let prior = (0..tspace.len())
        .map(|l| match (0..n).filter(|&i| tspace.component(l, i) == 1).count() {
            0 => nf.powf(-alpha / 2.0) / gamma,
            1 => 1.0 / (nf * gamma),
            _ => 0.0,
        })
        .collect();
    let distributions = (0..tspace.len())
        .map(|k| if k == 0 { vec![1.0, 0.0] } else { vec![0.0, 1.0] })
        .collect();
    Ok(BayesianInstance {
        agents,
        outcomes: outcomes(&[1.0, 0.0]),
        prior,
        costs,
        base_costs: Some(base),
        outcome_model: OutcomeModel::TypeIndependent(distributions),
    })
}

/// Zero payments; everyone works exactly when every type is the free one.
pub fn bayes_tightness_witness(inst: &BayesianInstance) -> BayesDeterministicContract {
    let n = inst.n_agents();
    let m = inst.n_outcomes();
    let tspace = inst.type_space();
    let entries = (0..tspace.len())
        .map(|l| BayesDetEntry {
            profile: ActionProfile(vec![if l == 0 { 0 } else { 1 }; n]),
            payments: vec![vec![0.0; m]; n],
        })
        .collect();
    BayesDeterministicContract {
        limited_liability: true,
        entries,
    }
}

/// A uniformly random point of the probability simplex.
fn simplex_point(rng: &mut ChaCha8Rng, m: usize) -> Vec<f64> {
    let mut v: Vec<f64> = (0..m).map(|_| -(1.0 - rng.gen::<f64>()).ln()).collect();
    let s: f64 = v.iter().sum();
    if s > 0.0 {
        v.iter_mut().for_each(|x| *x /= s);
    } else {
        v = vec![1.0 / m as f64; m];
    }
    v
}

fn check_random_dims(agents: usize, actions: usize, outcomes: usize, cost_scale: f64) -> Result<usize> {
    if agents == 0 || actions == 0 || outcomes == 0 {
        return Err(Error::Parameter("agents, actions and outcomes must be positive".into()));
    }
    if !(0.0..=1.0).contains(&cost_scale) {
        return Err(Error::Parameter(format!("cost_scale must lie in [0,1], got {cost_scale}")));
    }
    match ProfileSpace::checked_len(&vec![actions; agents]) {
        Some(p) if p <= MAX_RANDOM_PROFILES => Ok(p),
        _ => Err(Error::Parameter(format!(
            "{actions}^{agents} profiles exceed the limit of {MAX_RANDOM_PROFILES}"
        ))),
    }
}

/// Costs with action 0 free and the rest uniform in `[0, cost_scale]`.
fn random_costs(rng: &mut ChaCha8Rng, actions: usize, cost_scale: f64) -> Vec<f64> {
    (0..actions)
        .map(|j| if j == 0 { 0.0 } else { cost_scale * rng.gen::<f64>() })
        .collect()
}

/// Reproducible random instance: rewards uniform in `[0,1]`, outcome rows uniform on the simplex.
pub fn random_instance(spec: &RandomSpec) -> Result<Instance> {
    let profiles = check_random_dims(spec.agents, spec.actions, spec.outcomes, spec.cost_scale)?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let rewards: Vec<f64> = (0..spec.outcomes).map(|_| rng.gen::<f64>()).collect();
    let agents = (0..spec.agents)
        .map(|i| {
            let costs = random_costs(&mut rng, spec.actions, spec.cost_scale);
            Agent {
                name: format!("agent{}", i + 1),
                actions: costs
                    .into_iter()
                    .enumerate()
                    .map(|(j, cost)| Action {
                        name: format!("a{j}"),
                        cost,
                    })
                    .collect(),
            }
        })
        .collect();
    let distributions = (0..profiles)
        .map(|_| simplex_point(&mut rng, spec.outcomes))
        .collect();
    Ok(Instance {
        agents,
        outcomes: outcomes(&rewards),
        distributions,
    })
}

/// Reproducible random Bayesian instance with a correlated random prior and
/// per-type costs.
pub fn random_bayesian(spec: &RandomBayesSpec) -> Result<BayesianInstance> {
    let profiles = check_random_dims(spec.agents, spec.actions, spec.outcomes, spec.cost_scale)?;
    if spec.types == 0 {
        return Err(Error::Parameter("types must be positive".into()));
    }
    let type_profiles = match ProfileSpace::checked_len(&vec![spec.types; spec.agents]) {
        Some(t) if t.saturating_mul(profiles) <= MAX_RANDOM_PROFILES => t,
        _ => {
            return Err(Error::Parameter(format!(
                "{} type profiles x {profiles} action profiles exceed the limit of {MAX_RANDOM_PROFILES}",
                spec.types.pow(spec.agents as u32)
            )))
        }
    };
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let rewards: Vec<f64> = (0..spec.outcomes).map(|_| rng.gen::<f64>()).collect();
    let agents: Vec<BayesAgent> = (0..spec.agents)
        .map(|i| BayesAgent {
            name: format!("agent{}", i + 1),
            actions: (0..spec.actions).map(|j| format!("a{j}")).collect(),
            types: (0..spec.types)
                .map(|t| AgentType {
                    name: format!("t{t}"),
                    value: t as f64,
                })
                .collect(),
        })
        .collect();
    let costs = (0..spec.agents)
        .map(|_| {
            (0..spec.types)
                .map(|_| random_costs(&mut rng, spec.actions, spec.cost_scale))
                .collect()
        })
        .collect();
    let prior = simplex_point(&mut rng, type_profiles);
    let outcome_model = if spec.type_independent {
        OutcomeModel::TypeIndependent(
            (0..profiles).map(|_| simplex_point(&mut rng, spec.outcomes)).collect(),
        )
    } else {
        OutcomeModel::TypeDependent(
            (0..type_profiles)
                .map(|_| (0..profiles).map(|_| simplex_point(&mut rng, spec.outcomes)).collect())
                .collect(),
        )
    };
    Ok(BayesianInstance {
        agents,
        outcomes: outcomes(&rewards),
        prior,
        costs,
        base_costs: None,
        outcome_model,
    })
}
