//! From single-agent to multi-agent contracts.
//!
//! A payment `p` under which a profile is a best response for one agent that
//! pays `n·c(a)` can be split equally among the `n` real agents, and the
//! profile is then an equilibrium. Linear contracts `p = r/(1+δ)` built this
//! way earn at least `δ/(1+δ)` times the virtual welfare at scale `n(1+δ)`.

use crate::detsolve::{best_response_set, equilibrium_set, first_best};
use crate::error::{Error, Result};
use crate::model::{check_profile, dot, ActionProfile, DeterministicContract, Instance, Value};
use crate::FEAS_TOL;

/// Each of `n` agents receives `p(ω)/n`.
pub fn split_payment(p: &[f64], n: usize) -> Result<Vec<Vec<f64>>> {
    if n == 0 {
        return Err(Error::Parameter("cannot split a payment among zero agents".into()));
    }
    if p.iter().any(|x| !x.is_finite() || *x < 0.0) {
        return Err(Error::Precondition("payment must be finite and nonnegative".into()));
    }
    let share: Vec<f64> = p.iter().map(|x| x / n as f64).collect();
    Ok(vec![share; n])
}

/// Lifts a single-agent contract at scale `n` to the multi-agent instance.
pub fn lift_single_to_multi(
    inst: &Instance,
    profile: &ActionProfile,
    payment: &[f64],
) -> Result<DeterministicContract> {
    inst.ensure_valid()?;
    check_profile(inst, profile)?;
    let n = inst.n_agents();
    let br = best_response_set(inst, payment, n as f64)?;
    if !br.contains(profile) {
        return Err(Error::Precondition(format!(
            "profile {} is not a best response to the payment at virtual scale {n}",
            inst.profile_label(profile)
        )));
    }
    let payments = split_payment(payment, n)?;
    if !equilibrium_set(inst, &payments)?.contains(profile) {
        return Err(Error::Internal(format!(
            "split payments do not sustain {}",
            inst.profile_label(profile)
        )));
    }
    Ok(DeterministicContract {
        profile: profile.clone(),
        payments,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearContract {
    pub contract: DeterministicContract,
    /// The undivided payment `r/(1+δ)`.
    pub payment: Vec<f64>,
    pub value: Value,
    /// `δ/(1+δ) · V_sw^{n(1+δ)}`.
    pub guarantee: Value,
    pub delta: f64,
}

/// Pays `r_ω/(1+δ)` split equally and recommends the principal-best profile
/// among the best responses at scale `n`.
pub fn linear_contract(inst: &Instance, delta: f64) -> Result<LinearContract> {
    inst.ensure_valid()?;
    if !(delta.is_finite() && delta > 0.0) {
        return Err(Error::Parameter(format!("delta must be positive, got {delta}")));
    }
    let n = inst.n_agents() as f64;
    let payment: Vec<f64> = inst.rewards().iter().map(|r| r / (1.0 + delta)).collect();
    let br = best_response_set(inst, &payment, n)?;
    let space = inst.profile_space();
    let net: Vec<f64> = inst
        .rewards()
        .iter()
        .zip(&payment)
        .map(|(r, p)| r - p)
        .collect();
    let principal = |p: &ActionProfile| dot(&inst.distributions[space.index(&p.0)], &net);
    let (pick, _) = first_best(br.profiles.iter().map(|p| Some(principal(p))))
        .ok_or_else(|| Error::Internal("empty best-response set".into()))?;
    let profile = br.profiles[pick].clone();
    let contract = lift_single_to_multi(inst, &profile, &payment)?;
    let value = contract.principal_value(inst);
    let guarantee = delta / (1.0 + delta) * virtual_welfare(inst, n * (1.0 + delta)).0;
    if value < guarantee - FEAS_TOL {
        return Err(Error::Internal(format!(
            "linear contract value {value} below its guarantee {guarantee}"
        )));
    }
    Ok(LinearContract {
        contract,
        payment,
        value,
        guarantee,
        delta,
    })
}

/// `max_a [Σ_ω F_a(ω) r_ω − α c(a)]` and the first maximizing profile index.
pub fn virtual_welfare(inst: &Instance, alpha: f64) -> (Value, usize) {
    let space = inst.profile_space();
    let vals = (0..space.len())
        .map(|k| Some(inst.expected_reward(k) - alpha * inst.profile_cost(&space, k)));
    let (k, v) = first_best(vals).expect("profile space is nonempty");
    (v, k)
}

/// `max_a c(a)/(Σ_ω F_a(ω) r_ω − c(a))` over profiles whose welfare exceeds
/// the feasibility tolerance. When no profile qualifies the result is 0 if
/// every cost is zero and `+∞` otherwise.
pub fn beta(inst: &Instance) -> f64 {
    let space = inst.profile_space();
    let mut best: Option<f64> = None;
    let mut any_cost = false;
    for k in 0..space.len() {
        let c = inst.profile_cost(&space, k);
        any_cost |= c > 0.0;
        let den = inst.expected_reward(k) - c;
        if den > FEAS_TOL {
            let r = c / den;
            best = Some(best.map_or(r, |b: f64| b.max(r)));
        }
    }
    match best {
        Some(b) => b,
        None if any_cost => f64::INFINITY,
        None => 0.0,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WelfareReport {
    pub scales: Vec<f64>,
    /// `V_sw^α` per scale.
    pub vsw: Vec<Value>,
    pub argmax: Vec<ActionProfile>,
    /// `Sw = V_sw^1`.
    pub sw: Value,
    pub sw_argmax: ActionProfile,
    pub beta: f64,
    /// Largest action set size.
    pub max_actions: usize,
}

impl WelfareReport {
    /// `(1 − β(α−1))·Sw` for each scale, the lower bound on `V_sw^α` when `α ≥ 1`.
    pub fn welfare_lower_bounds(&self) -> Vec<f64> {
        self.scales
            .iter()
            .map(|a| (1.0 - self.beta * (a - 1.0)) * self.sw)
            .collect()
    }
}

pub fn welfare_report(inst: &Instance, scales: &[f64]) -> Result<WelfareReport> {
    inst.ensure_valid()?;
    if let Some(a) = scales.iter().find(|a| !(a.is_finite() && **a >= 0.0)) {
        return Err(Error::Parameter(format!("scale {a} must be finite and nonnegative")));
    }
    let space = inst.profile_space();
    let (vsw, argmax): (Vec<f64>, Vec<ActionProfile>) = scales
        .iter()
        .map(|&a| {
            let (v, k) = virtual_welfare(inst, a);
            (v, space.profile(k))
        })
        .unzip();
    let (sw, k) = virtual_welfare(inst, 1.0);
    Ok(WelfareReport {
        scales: scales.to_vec(),
        vsw,
        argmax,
        sw,
        sw_argmax: space.profile(k),
        beta: beta(inst),
        max_actions: inst.max_actions(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detsolve::solve_single_agent;
    use crate::generators;

    #[test]
    fn split_examples() {
        assert_eq!(split_payment(&[1.0, 0.0], 2).unwrap(), vec![vec![0.5, 0.0]; 2]);
        assert_eq!(split_payment(&[0.3], 1).unwrap(), vec![vec![0.3]]);
        let s = split_payment(&[0.5, 0.0], 2).unwrap();
        assert_eq!(s[0][0], 0.25);
        assert_eq!(s[0][0] + s[1][0], 0.5);
        assert!(split_payment(&[1.0], 0).is_err());
    }

    #[test]
    fn lifted_single_agent_contract_keeps_its_value() {
        let inst = generators::gap();
        let s = solve_single_agent(&inst, 2.0).unwrap();
        let c = lift_single_to_multi(&inst, &s.profile, &s.payment).unwrap();
        assert!((c.principal_value(&inst) - s.value).abs() < 1e-12);
    }

    #[test]
    fn tightness_lift_of_all_up() {
        let inst = generators::tightness(1.0, 0.5).unwrap();
        let all_up = ActionProfile(vec![0, 0]);
        // At scale 2 the single agent needs p(w1) >= 1 to prefer working.
        assert!(lift_single_to_multi(&inst, &all_up, &[0.9, 0.0]).is_err());
        let c = lift_single_to_multi(&inst, &all_up, &[1.0, 0.0]).unwrap();
        assert_eq!(c.payments, vec![vec![0.5, 0.0]; 2]);
        assert!(c.principal_value(&inst).abs() < 1e-12);
    }

    #[test]
    fn lift_rejects_non_best_response() {
        let inst = generators::gap();
        let err = lift_single_to_multi(&inst, &ActionProfile(vec![0, 0]), &[0.0, 0.0]).unwrap_err();
        assert!(matches!(err, Error::Precondition(ref m) if m.contains("best response")), "{err}");
    }

    #[test]
    fn gap_welfare() {
        let inst = generators::gap();
        let w = welfare_report(&inst, &[0.0, 1.0, 4.0]).unwrap();
        assert!((w.sw - 0.2).abs() < 1e-12);
        assert_eq!(w.sw_argmax, ActionProfile(vec![0, 0]));
        assert!((w.vsw[0] - 1.0).abs() < 1e-12);
        assert_eq!(w.vsw[2], 0.0);
    }

    #[test]
    fn gap_linear_contract() {
        let inst = generators::gap();
        let lc = linear_contract(&inst, 1.0).unwrap();
        assert_eq!(lc.guarantee, 0.0);
        assert!(lc.value >= -1e-12);
        assert!(matches!(linear_contract(&inst, 0.0), Err(Error::Parameter(_))));
    }

    #[test]
    fn costless_linear_contract_approaches_welfare() {
        let mut inst = generators::gap();
        inst.agents[0].actions[0].cost = 0.0;
        inst.agents[1].actions[0].cost = 0.0;
        let lc = linear_contract(&inst, 9.0).unwrap();
        assert!(lc.value >= 0.9 * welfare_report(&inst, &[]).unwrap().sw - 1e-12);
    }

    #[test]
    fn beta_degenerate_cases() {
        let inst = generators::gap();
        // Only (up, up) has positive welfare: 0.8 / 0.2.
        assert!((beta(&inst) - 4.0).abs() < 1e-12);
        let mut costless = inst.clone();
        costless.outcomes[0].reward = 0.0;
        assert_eq!(beta(&costless), f64::INFINITY);
        costless.agents[0].actions[0].cost = 0.0;
        costless.agents[1].actions[0].cost = 0.0;
        assert_eq!(beta(&costless), 0.0);
    }
}
