//! Deterministic contracts.
//!
//! [`solve_deterministic`] enumerates every action profile, finds the cheapest
//! payments that make it a Nash equilibrium, and keeps the profile with the
//! best principal utility. [`solve_single_agent`] does the same for the
//! combinatorial single-agent problem in which one agent picks the whole
//! profile and pays `α·c(a)`. The set-valued helpers are plain enumerations
//! and serve as the audits for both.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::lp::{solve_lp, LpModel, Relation, Sense};
use crate::model::{check_profile, dot, ActionProfile, DeterministicContract, Instance, Value};
use crate::{FEAS_TOL, IC_TOL};

/// Values within this distance of the best are ties, broken by profile order.
pub const TIE_TOL: f64 = 1e-9;

/// Profiles that are Nash equilibria under some fixed payments.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EquilibriumSet {
    pub profiles: Vec<ActionProfile>,
}

impl EquilibriumSet {
    pub fn contains(&self, profile: &ActionProfile) -> bool {
        self.profiles.contains(profile)
    }
}

/// Maximizers of `Σ_ω F_a(ω)p(ω) − α·c(a)` over all profiles.
#[derive(Debug, Clone, PartialEq)]
pub struct BestResponseSet {
    pub alpha: f64,
    pub profiles: Vec<ActionProfile>,
    /// The maximal utility.
    pub utility: f64,
}

impl BestResponseSet {
    pub fn contains(&self, profile: &ActionProfile) -> bool {
        self.profiles.contains(profile)
    }
}

/// Cheapest payments that make a fixed profile an equilibrium.
#[derive(Debug, Clone, PartialEq)]
pub struct MinPayment {
    /// `payments[i][ω]`.
    pub payments: Vec<Vec<f64>>,
    pub expected_payment: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetSolution {
    pub contract: DeterministicContract,
    pub value: Value,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SingleAgentSolution {
    pub profile: ActionProfile,
    pub payment: Vec<f64>,
    pub value: Value,
}

/// Slack of one unilateral deviation `a_i → a'_i` under a deterministic contract.
#[derive(Debug, Clone, PartialEq)]
pub struct DeviationSlack {
    pub agent: usize,
    pub deviation: usize,
    /// Utility of obeying minus utility of deviating.
    pub slack: f64,
}

/// Index of the first entry within [`TIE_TOL`] of the maximum.
pub(crate) fn first_best<I>(values: I) -> Option<(usize, f64)>
where
    I: IntoIterator<Item = Option<f64>>,
{
    let vals: Vec<Option<f64>> = values.into_iter().collect();
    let best = vals.iter().flatten().copied().fold(f64::NEG_INFINITY, f64::max);
    if best == f64::NEG_INFINITY {
        return None;
    }
    vals.iter()
        .position(|v| matches!(v, Some(x) if *x >= best - TIE_TOL))
        .map(|k| (k, vals[k].unwrap()))
}

/// Minimizes expected total payment subject to every agent's IC rows at `a`.
/// Returns `None` when no nonnegative payments make `a` an equilibrium.
pub fn min_payment_lp(inst: &Instance, a: &ActionProfile) -> Result<Option<MinPayment>> {
    check_profile(inst, a)?;
    let space = inst.profile_space();
    let (n, m) = (inst.n_agents(), inst.n_outcomes());
    let k = space.index(&a.0);
    let fa = &inst.distributions[k];

    let mut lp = LpModel::new(Sense::Minimize, n * m);
    for i in 0..n {
        for w in 0..m {
            lp.objective[i * m + w] = fa[w];
        }
    }
    for i in 0..n {
        let ai = a.0[i];
        for dev in 0..inst.agents[i].actions.len() {
            if dev == ai {
                continue;
            }
            let fd = &inst.distributions[space.with_component(k, i, dev)];
            let terms: Vec<(usize, f64)> = (0..m).map(|w| (i * m + w, fa[w] - fd[w])).collect();
            lp.add_sparse(&terms, Relation::Ge, inst.cost(i, ai) - inst.cost(i, dev));
        }
    }
    let sol = solve_lp(&lp, FEAS_TOL)?;
    if !sol.is_optimal() {
        return Ok(None);
    }
    let payments = sol.x.chunks(m).map(|c| c.to_vec()).collect();
    Ok(Some(MinPayment {
        payments,
        expected_payment: sol.objective,
    }))
}

/// The optimal deterministic contract; ties go to the lexicographically first profile.
pub fn solve_deterministic(inst: &Instance) -> Result<DetSolution> {
    inst.ensure_valid()?;
    let space = inst.profile_space();
    let per_profile: Vec<Option<MinPayment>> = (0..space.len())
        .into_par_iter()
        .map(|k| min_payment_lp(inst, &space.profile(k)))
        .collect::<Result<_>>()?;
    let values = per_profile.iter().enumerate().map(|(k, mp)| {
        mp.as_ref()
            .map(|mp| inst.expected_reward(k) - mp.expected_payment)
    });
    let (k, _) = first_best(values)
        .ok_or_else(|| Error::Internal("no inducible profile in a valid instance".into()))?;
    let payments = per_profile[k].as_ref().unwrap().payments.clone();
    let contract = DeterministicContract {
        profile: space.profile(k),
        payments,
    };
    let value = contract.principal_value(inst);
    Ok(DetSolution { contract, value })
}

/// Cheapest single payment vector making `a` a best response at virtual scale `alpha`.
pub fn single_agent_min_payment(
    inst: &Instance,
    a: &ActionProfile,
    alpha: f64,
) -> Result<Option<(Vec<f64>, f64)>> {
    check_profile(inst, a)?;
    check_alpha(alpha)?;
    let space = inst.profile_space();
    let m = inst.n_outcomes();
    let k = space.index(&a.0);
    let fa = &inst.distributions[k];
    let ca = inst.profile_cost(&space, k);

    let mut lp = LpModel::new(Sense::Minimize, m);
    lp.objective.copy_from_slice(fa);
    for other in 0..space.len() {
        if other == k {
            continue;
        }
        let fo = &inst.distributions[other];
        let coeffs = (0..m).map(|w| fa[w] - fo[w]).collect();
        lp.add_constraint(
            coeffs,
            Relation::Ge,
            alpha * (ca - inst.profile_cost(&space, other)),
        );
    }
    let sol = solve_lp(&lp, FEAS_TOL)?;
    Ok(sol.is_optimal().then_some((sol.x, sol.objective)))
}

/// The optimal single-agent contract under virtual costs `alpha·c(a)`.
pub fn solve_single_agent(inst: &Instance, alpha: f64) -> Result<SingleAgentSolution> {
    inst.ensure_valid()?;
    check_alpha(alpha)?;
    let space = inst.profile_space();
    let per_profile: Vec<Option<(Vec<f64>, f64)>> = (0..space.len())
        .into_par_iter()
        .map(|k| single_agent_min_payment(inst, &space.profile(k), alpha))
        .collect::<Result<_>>()?;
    let values = per_profile
        .iter()
        .enumerate()
        .map(|(k, r)| r.as_ref().map(|(_, pay)| inst.expected_reward(k) - pay));
    let (k, _) = first_best(values)
        .ok_or_else(|| Error::Internal("no inducible profile in a valid instance".into()))?;
    let payment = per_profile[k].as_ref().unwrap().0.clone();
    let value = dot(&inst.distributions[k], &inst.rewards()) - dot(&inst.distributions[k], &payment);
    Ok(SingleAgentSolution {
        profile: space.profile(k),
        payment,
        value,
    })
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha.is_finite() && alpha >= 0.0) {
        return Err(Error::Parameter(format!(
            "alpha (the virtual cost scale) must be finite and nonnegative, got {alpha}"
        )));
    }
    Ok(())
}

fn check_payments(inst: &Instance, payments: &[Vec<f64>]) -> Result<()> {
    if payments.len() != inst.n_agents() || payments.iter().any(|p| p.len() != inst.n_outcomes()) {
        return Err(Error::Precondition(format!(
            "payments must be a {} x {} table",
            inst.n_agents(),
            inst.n_outcomes()
        )));
    }
    check_payment_vector(payments.iter().flatten())
}

fn check_payment_vector<'a>(p: impl IntoIterator<Item = &'a f64>) -> Result<()> {
    if p.into_iter().any(|x| !x.is_finite() || *x < 0.0) {
        return Err(Error::Precondition("payments must be finite and nonnegative".into()));
    }
    Ok(())
}

/// Every unilateral-deviation slack of `profile` under `payments`.
pub fn deviation_slacks(
    inst: &Instance,
    profile: &ActionProfile,
    payments: &[Vec<f64>],
) -> Result<Vec<DeviationSlack>> {
    check_profile(inst, profile)?;
    if payments.len() != inst.n_agents() || payments.iter().any(|p| p.len() != inst.n_outcomes()) {
        return Err(Error::Precondition("payments have the wrong shape".into()));
    }
    let space = inst.profile_space();
    let k = space.index(&profile.0);
    let mut out = Vec::new();
    for (i, p) in payments.iter().enumerate() {
        let obey = dot(&inst.distributions[k], p) - inst.cost(i, profile.0[i]);
        for dev in 0..inst.agents[i].actions.len() {
            if dev == profile.0[i] {
                continue;
            }
            let kd = space.with_component(k, i, dev);
            let u = dot(&inst.distributions[kd], p) - inst.cost(i, dev);
            out.push(DeviationSlack {
                agent: i,
                deviation: dev,
                slack: obey - u,
            });
        }
    }
    Ok(out)
}

/// All profiles that are Nash equilibria of the game induced by `payments`.
pub fn equilibrium_set(inst: &Instance, payments: &[Vec<f64>]) -> Result<EquilibriumSet> {
    check_payments(inst, payments)?;
    let space = inst.profile_space();
    // Utility of each agent at each profile.
    let util: Vec<Vec<f64>> = payments
        .iter()
        .enumerate()
        .map(|(i, p)| {
            (0..space.len())
                .map(|k| dot(&inst.distributions[k], p) - inst.cost(i, space.component(k, i)))
                .collect()
        })
        .collect();
    let profiles = (0..space.len())
        .filter(|&k| {
            (0..inst.n_agents()).all(|i| {
                (0..inst.agents[i].actions.len())
                    .all(|dev| util[i][k] >= util[i][space.with_component(k, i, dev)] - IC_TOL)
            })
        })
        .map(|k| space.profile(k))
        .collect();
    Ok(EquilibriumSet { profiles })
}

/// Profiles maximizing `Σ_ω F_a(ω)p(ω) − alpha·c(a)`.
pub fn best_response_set(inst: &Instance, payment: &[f64], alpha: f64) -> Result<BestResponseSet> {
    check_alpha(alpha)?;
    if payment.len() != inst.n_outcomes() {
        return Err(Error::Precondition(format!(
            "payment has {} entries, instance has {} outcomes",
            payment.len(),
            inst.n_outcomes()
        )));
    }
    check_payment_vector(payment)?;
    let space = inst.profile_space();
    let util: Vec<f64> = (0..space.len())
        .map(|k| dot(&inst.distributions[k], payment) - alpha * inst.profile_cost(&space, k))
        .collect();
    let best = util.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let profiles = (0..space.len())
        .filter(|&k| util[k] >= best - IC_TOL)
        .map(|k| space.profile(k))
        .collect();
    Ok(BestResponseSet {
        alpha,
        profiles,
        utility: best,
    })
}

/// Profiles some nonnegative payment scheme makes an equilibrium.
pub fn inducible_deterministic(inst: &Instance) -> Result<Vec<ActionProfile>> {
    inst.ensure_valid()?;
    let space = inst.profile_space();
    let feasible: Vec<bool> = (0..space.len())
        .into_par_iter()
        .map(|k| min_payment_lp(inst, &space.profile(k)).map(|r| r.is_some()))
        .collect::<Result<_>>()?;
    Ok((0..space.len())
        .filter(|&k| feasible[k])
        .map(|k| space.profile(k))
        .collect())
}
