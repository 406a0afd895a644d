//! Randomized contracts through the capped linear relaxation.
//!
//! Substituting `x^i_a(ω) = μ(a)·π^i_a(ω)` turns the obedience constraints of a
//! randomized contract into linear rows. The cap `x ≤ M·μ` keeps payments
//! bounded by `M`, so dividing back by `μ` recovers a contract with exactly
//! the LP's value. Larger `M` gives a larger feasible set.

use rayon::prelude::*;

use crate::detsolve::solve_deterministic;
use crate::error::{Error, Result};
use crate::lp::{solve_lp, LpModel, Relation, Sense};
use crate::model::{dot, Instance, RandomizedContract, Value};
use crate::{FEAS_TOL, IC_TOL};

/// `μ(a)` at or below this is treated as zero during recovery.
pub const MU_ZERO_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RandLpConfig {
    /// Cap on recommendation-conditioned payments.
    pub m: f64,
    pub feas_tol: f64,
    pub ic_tol: f64,
}

impl RandLpConfig {
    pub fn new(m: f64) -> Self {
        Self {
            m,
            feas_tol: FEAS_TOL,
            ic_tol: IC_TOL,
        }
    }

    /// `M = 10^6 · max reward`, or `10^6` when every reward is zero.
    pub fn default_for(max_reward: f64) -> Self {
        let scale = if max_reward > 0.0 { max_reward } else { 1.0 };
        Self::new(1e6 * scale)
    }

    pub fn check(&self) -> Result<()> {
        if !(self.m.is_finite() && self.m > 0.0) {
            return Err(Error::Parameter(format!(
                "payment cap M must be finite and positive, got {}",
                self.m
            )));
        }
        if !(self.feas_tol > 0.0 && self.ic_tol >= 0.0) {
            return Err(Error::Parameter("tolerances must be positive".into()));
        }
        Ok(())
    }
}

/// Variable layout of the randomized LP: all `μ(a)` first, then `x^i_a(ω)`
/// ordered by agent, profile, outcome.
#[derive(Debug, Clone, Copy)]
pub struct RandLpLayout {
    pub profiles: usize,
    pub agents: usize,
    pub outcomes: usize,
}

impl RandLpLayout {
    pub fn of(inst: &Instance) -> Self {
        Self {
            profiles: inst.profile_space().len(),
            agents: inst.n_agents(),
            outcomes: inst.n_outcomes(),
        }
    }

    pub fn mu(&self, k: usize) -> usize {
        k
    }

    pub fn x(&self, i: usize, k: usize, w: usize) -> usize {
        self.profiles + (i * self.profiles + k) * self.outcomes + w
    }

    pub fn n_vars(&self) -> usize {
        self.profiles * (1 + self.agents * self.outcomes)
    }
}

/// Per-deviation obedience slack of a randomized contract.
#[derive(Debug, Clone, PartialEq)]
pub struct RandSlack {
    pub agent: usize,
    pub action: usize,
    pub deviation: usize,
    pub slack: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RandAudit {
    pub value: Value,
    /// `+∞` when there is no deviation to check.
    pub min_slack: f64,
    pub slacks: Vec<RandSlack>,
    pub ic_ok: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RandSolveReport {
    pub m: f64,
    pub lp_value: Value,
    pub contract: RandomizedContract,
    pub audit: RandAudit,
    /// Program value of the recovered contract, recomputed from scratch.
    pub value_recomputed: Value,
    /// Optimal deterministic value, for the bound chain.
    pub det_baseline: Value,
    /// Largest payment of the optimal deterministic contract. The chain
    /// `lp_value ≥ det_baseline` is guaranteed once `m` reaches it.
    pub det_max_payment: f64,
}

/// Builds the capped relaxation over all profiles.
pub fn build_lp_randomized(inst: &Instance, cfg: &RandLpConfig) -> Result<LpModel> {
    inst.ensure_valid()?;
    cfg.check()?;
    let space = inst.profile_space();
    let lay = RandLpLayout::of(inst);
    let (n, m) = (lay.agents, lay.outcomes);
    let rewards = inst.rewards();
    let mut lp = LpModel::new(Sense::Maximize, lay.n_vars());

    for k in 0..lay.profiles {
        let f = &inst.distributions[k];
        lp.objective[lay.mu(k)] = dot(f, &rewards);
        for i in 0..n {
            for w in 0..m {
                lp.objective[lay.x(i, k, w)] = -f[w];
            }
        }
    }

    for i in 0..n {
        let n_actions = inst.agents[i].actions.len();
        for ai in 0..n_actions {
            for dev in 0..n_actions {
                let dc = inst.cost(i, ai) - inst.cost(i, dev);
                let mut terms = Vec::new();
                for k in space.slice(i, ai) {
                    let fa = &inst.distributions[k];
                    let fd = &inst.distributions[space.with_component(k, i, dev)];
                    for w in 0..m {
                        terms.push((lay.x(i, k, w), fa[w] - fd[w]));
                    }
                    terms.push((lay.mu(k), -dc));
                }
                lp.add_sparse(&terms, Relation::Ge, 0.0);
            }
        }
    }

    for i in 0..n {
        for k in 0..lay.profiles {
            for w in 0..m {
                lp.add_sparse(&[(lay.x(i, k, w), 1.0), (lay.mu(k), -cfg.m)], Relation::Le, 0.0);
            }
        }
    }

    let all: Vec<(usize, f64)> = (0..lay.profiles).map(|k| (lay.mu(k), 1.0)).collect();
    lp.add_sparse(&all, Relation::Eq, 1.0);
    Ok(lp)
}

/// Turns an LP point into a contract: `π = x/μ` where `μ > MU_ZERO_TOL`, else 0.
pub fn recover_contract(inst: &Instance, x: &[f64]) -> RandomizedContract {
    let lay = RandLpLayout::of(inst);
    let mut mu: Vec<f64> = (0..lay.profiles).map(|k| x[lay.mu(k)].max(0.0)).collect();
    let total: f64 = mu.iter().sum();
    if total > 0.0 {
        for v in &mut mu {
            *v /= total;
        }
    }
    let pi = (0..lay.agents)
        .map(|i| {
            (0..lay.profiles)
                .map(|k| {
                    (0..lay.outcomes)
                        .map(|w| {
                            if mu[k] > MU_ZERO_TOL {
                                (x[lay.x(i, k, w)] / mu[k]).max(0.0)
                            } else {
                                0.0
                            }
                        })
                        .collect()
                })
                .collect()
        })
        .collect();
    RandomizedContract { mu, pi }
}

/// Solves the relaxation with cap `cfg.m`, recovers the contract and audits it.
pub fn solve_randomized(inst: &Instance, cfg: &RandLpConfig) -> Result<RandSolveReport> {
    let lp = build_lp_randomized(inst, cfg)?;
    let sol = solve_lp(&lp, cfg.feas_tol)?;
    if !sol.is_optimal() {
        return Err(Error::Internal(format!(
            "randomized relaxation reported {:?}",
            sol.status
        )));
    }
    let contract = recover_contract(inst, &sol.x);
    let audit = verify_randomized(inst, &contract, cfg.ic_tol)?;
    let det = solve_deterministic(inst)?;
    Ok(RandSolveReport {
        m: cfg.m,
        lp_value: sol.objective,
        value_recomputed: audit.value,
        det_baseline: det.value,
        det_max_payment: det.contract.max_payment(),
        contract,
        audit,
    })
}

/// Solves once per cap; results follow the order of `caps`.
pub fn sweep_randomized(
    inst: &Instance,
    caps: &[f64],
    base: &RandLpConfig,
) -> Result<Vec<RandSolveReport>> {
    caps.par_iter()
        .map(|&m| solve_randomized(inst, &RandLpConfig { m, ..*base }))
        .collect()
}

/// Principal value and every obedience slack of `contract`.
pub fn verify_randomized(
    inst: &Instance,
    contract: &RandomizedContract,
    ic_tol: f64,
) -> Result<RandAudit> {
    inst.ensure_valid()?;
    contract.check_shape(inst)?;
    let space = inst.profile_space();
    let rewards = inst.rewards();
    let mu = &contract.mu;

    let mut value = 0.0;
    for k in 0..space.len() {
        if mu[k] == 0.0 {
            continue;
        }
        let f = &inst.distributions[k];
        let net: f64 = (0..inst.n_outcomes())
            .map(|w| f[w] * (rewards[w] - contract.pi.iter().map(|p| p[k][w]).sum::<f64>()))
            .sum();
        value += mu[k] * net;
    }

    let mut slacks = Vec::new();
    for i in 0..inst.n_agents() {
        let n_actions = inst.agents[i].actions.len();
        for ai in 0..n_actions {
            for dev in 0..n_actions {
                if dev == ai {
                    continue;
                }
                let mut slack = 0.0;
                for k in space.slice(i, ai) {
                    if mu[k] == 0.0 {
                        continue;
                    }
                    let pay = &contract.pi[i][k];
                    let kd = space.with_component(k, i, dev);
                    let obey = dot(&inst.distributions[k], pay) - inst.cost(i, ai);
                    let deviate = dot(&inst.distributions[kd], pay) - inst.cost(i, dev);
                    slack += mu[k] * (obey - deviate);
                }
                slacks.push(RandSlack {
                    agent: i,
                    action: ai,
                    deviation: dev,
                    slack,
                });
            }
        }
    }
    let min_slack = slacks.iter().map(|s| s.slack).fold(f64::INFINITY, f64::min);
    Ok(RandAudit {
        value,
        min_slack,
        ic_ok: min_slack >= -ic_tol,
        slacks,
    })
}
