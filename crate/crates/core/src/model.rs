//! Domain types: instances, action profiles and contracts.
//!
//! Action profiles are addressed by a mixed-radix index in which agent 0 is the
//! most significant digit, so index order is the lexicographic order on
//! `(a_0, a_1, ..., a_{n-1})`. That order is the canonical tie-break used by
//! every solver.

use std::fmt;

use crate::error::{Error, Result};
use crate::PROB_TOL;

/// Scalar principal utility (optimal values, welfare, bounds).
pub type Value = f64;

#[derive(Debug, Clone, PartialEq)]
pub struct Action {
    pub name: String,
    pub cost: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Agent {
    pub name: String,
    pub actions: Vec<Action>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub name: String,
    pub reward: f64,
}

/// A non-Bayesian principal / multi-agent instance with a dense outcome table.
#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    pub agents: Vec<Agent>,
    pub outcomes: Vec<Outcome>,
    /// `distributions[k]` is the outcome distribution of profile index `k`.
    pub distributions: Vec<Vec<f64>>,
}

/// One problem with an [`Instance`], located by field path.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub location: String,
    pub message: String,
}

impl Violation {
    pub fn new(location: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            location: location.into(),
            message: message.into(),
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.location, self.message)
    }
}

/// Per-agent action indices.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ActionProfile(pub Vec<usize>);

impl ActionProfile {
    pub fn actions(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl fmt::Display for ActionProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (k, a) in self.0.iter().enumerate() {
            if k > 0 {
                write!(f, ",")?;
            }
            write!(f, "{a}")?;
        }
        write!(f, ")")
    }
}

/// Mixed-radix indexing over a product of finite sets.
///
/// Used for action profiles and, in the Bayesian module, for type profiles.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProfileSpace {
    sizes: Vec<usize>,
    strides: Vec<usize>,
    len: usize,
}

impl ProfileSpace {
    /// Panics if the product overflows `usize`.
    pub fn new(sizes: Vec<usize>) -> Self {
        let mut strides = vec![1; sizes.len()];
        let mut len: usize = 1;
        for i in (0..sizes.len()).rev() {
            strides[i] = len;
            len = len
                .checked_mul(sizes[i])
                .expect("profile space size overflows usize");
        }
        Self {
            sizes,
            strides,
            len,
        }
    }

    /// Product size, or `None` on overflow.
    pub fn checked_len(sizes: &[usize]) -> Option<usize> {
        sizes.iter().try_fold(1usize, |acc, &s| acc.checked_mul(s))
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn dims(&self) -> usize {
        self.sizes.len()
    }

    pub fn index(&self, profile: &[usize]) -> usize {
        debug_assert_eq!(profile.len(), self.sizes.len());
        profile
            .iter()
            .zip(&self.strides)
            .map(|(a, s)| a * s)
            .sum()
    }

    pub fn profile(&self, index: usize) -> ActionProfile {
        ActionProfile(
            (0..self.sizes.len())
                .map(|i| self.component(index, i))
                .collect(),
        )
    }

    /// Component `i` of the profile at `index`.
    #[inline]
    pub fn component(&self, index: usize, i: usize) -> usize {
        (index / self.strides[i]) % self.sizes[i]
    }

    /// Index of the profile obtained by replacing component `i` with `value`.
    #[inline]
    pub fn with_component(&self, index: usize, i: usize, value: usize) -> usize {
        let cur = self.component(index, i);
        index - cur * self.strides[i] + value * self.strides[i]
    }

    /// Indices of all profiles whose component `i` equals `value`, ascending.
    pub fn slice(&self, i: usize, value: usize) -> impl Iterator<Item = usize> + '_ {
        (0..self.len).filter(move |&k| self.component(k, i) == value)
    }

    pub fn iter(&self) -> impl Iterator<Item = ActionProfile> + '_ {
        (0..self.len).map(|k| self.profile(k))
    }
}

impl Instance {
    pub fn n_agents(&self) -> usize {
        self.agents.len()
    }

    pub fn n_outcomes(&self) -> usize {
        self.outcomes.len()
    }

    /// The largest action set size (the statistic usually written as ℓ).
    pub fn max_actions(&self) -> usize {
        self.agents.iter().map(|a| a.actions.len()).max().unwrap_or(0)
    }

    pub fn action_counts(&self) -> Vec<usize> {
        self.agents.iter().map(|a| a.actions.len()).collect()
    }

    pub fn profile_space(&self) -> ProfileSpace {
        ProfileSpace::new(self.action_counts())
    }

    pub fn rewards(&self) -> Vec<f64> {
        self.outcomes.iter().map(|o| o.reward).collect()
    }

    pub fn max_reward(&self) -> f64 {
        self.outcomes.iter().map(|o| o.reward).fold(0.0, f64::max)
    }

    #[inline]
    pub fn cost(&self, agent: usize, action: usize) -> f64 {
        self.agents[agent].actions[action].cost
    }

    /// Total cost `c(a) = Σ_i c_i(a_i)` of the profile at `index`.
    pub fn profile_cost(&self, space: &ProfileSpace, index: usize) -> f64 {
        (0..self.n_agents())
            .map(|i| self.cost(i, space.component(index, i)))
            .sum()
    }

    /// Expected reward `Σ_ω F_a(ω) r_ω` of the profile at `index`.
    pub fn expected_reward(&self, index: usize) -> f64 {
        dot(&self.distributions[index], &self.rewards())
    }

    /// Every violated model constraint; empty when the instance is valid.
    pub fn validate(&self) -> Vec<Violation> {
        validate_instance(self)
    }

    /// `Ok(())` for valid instances, otherwise [`Error::InvalidInstance`].
    pub fn ensure_valid(&self) -> Result<()> {
        let v = self.validate();
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidInstance(v))
        }
    }

    pub fn profile_label(&self, profile: &ActionProfile) -> String {
        let names: Vec<&str> = profile
            .0
            .iter()
            .enumerate()
            .map(|(i, &a)| self.agents[i].actions[a].name.as_str())
            .collect();
        format!("({})", names.join(","))
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn in_unit(x: f64) -> bool {
    x.is_finite() && (0.0..=1.0).contains(&x)
}

/// Checks a probability vector; returns a message for the first problem found.
pub(crate) fn check_distribution(probs: &[f64], expected_len: usize) -> Option<String> {
    if probs.len() != expected_len {
        return Some(format!(
            "expected {expected_len} probabilities, found {}",
            probs.len()
        ));
    }
    if let Some((k, p)) = probs
        .iter()
        .enumerate()
        .find(|(_, p)| !p.is_finite() || **p < 0.0)
    {
        return Some(format!("entry {k} is {p}, must be a nonnegative number"));
    }
    let sum: f64 = probs.iter().sum();
    if (sum - 1.0).abs() > PROB_TOL {
        return Some(format!("probabilities sum to {sum}, not 1"));
    }
    None
}

/// Lists every violated invariant of `inst`.
pub fn validate_instance(inst: &Instance) -> Vec<Violation> {
    let mut out = Vec::new();
    if inst.agents.is_empty() {
        out.push(Violation::new("agents", "at least one agent is required"));
    }
    if inst.outcomes.is_empty() {
        out.push(Violation::new("outcomes", "at least one outcome is required"));
    }
    for (k, o) in inst.outcomes.iter().enumerate() {
        if !in_unit(o.reward) {
            out.push(Violation::new(
                format!("outcomes[{k}].reward"),
                format!("reward {} outside [0,1]", o.reward),
            ));
        }
    }
    for (i, agent) in inst.agents.iter().enumerate() {
        if agent.actions.is_empty() {
            out.push(Violation::new(
                format!("agents[{i}].actions"),
                format!("agent {} has no actions", agent.name),
            ));
            continue;
        }
        for (j, a) in agent.actions.iter().enumerate() {
            if !in_unit(a.cost) {
                out.push(Violation::new(
                    format!("agents[{i}].actions[{j}].cost"),
                    format!("cost {} outside [0,1]", a.cost),
                ));
            }
            if agent.actions[..j].iter().any(|b| b.name == a.name) {
                out.push(Violation::new(
                    format!("agents[{i}].actions[{j}].name"),
                    format!("duplicate action name {:?}", a.name),
                ));
            }
        }
        if !agent.actions.iter().any(|a| a.cost == 0.0) {
            out.push(Violation::new(
                format!("agents[{i}]"),
                format!("agent {} (index {i}) has no zero-cost action", agent.name),
            ));
        }
    }
    if inst.agents.iter().any(|a| a.actions.is_empty()) {
        return out;
    }
    let Some(expected) = ProfileSpace::checked_len(&inst.action_counts()) else {
        out.push(Violation::new("agents", "profile count overflows"));
        return out;
    };
    if inst.distributions.len() != expected {
        out.push(Violation::new(
            "distributions",
            format!(
                "expected {expected} profile distributions, found {}",
                inst.distributions.len()
            ),
        ));
        return out;
    }
    let space = inst.profile_space();
    for (k, row) in inst.distributions.iter().enumerate() {
        if let Some(msg) = check_distribution(row, inst.n_outcomes()) {
            let label = inst.profile_label(&space.profile(k));
            out.push(Violation::new(
                format!("distributions[{k}] profile {label}"),
                msg,
            ));
        }
    }
    out
}

/// All action profiles in lexicographic order.
pub fn enumerate_profiles(inst: &Instance) -> Vec<ActionProfile> {
    inst.profile_space().iter().collect()
}

/// A recommended profile with per-agent, per-outcome payments `p^i(ω)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DeterministicContract {
    pub profile: ActionProfile,
    /// `payments[i][ω]`.
    pub payments: Vec<Vec<f64>>,
}

impl DeterministicContract {
    /// Principal utility `Σ_ω F_a(ω)(r_ω − Σ_i p^i(ω))`.
    pub fn principal_value(&self, inst: &Instance) -> Value {
        let space = inst.profile_space();
        let f = &inst.distributions[space.index(&self.profile.0)];
        (0..inst.n_outcomes())
            .map(|w| {
                let paid: f64 = self.payments.iter().map(|p| p[w]).sum();
                f[w] * (inst.outcomes[w].reward - paid)
            })
            .sum()
    }

    pub fn max_payment(&self) -> f64 {
        self.payments
            .iter()
            .flatten()
            .copied()
            .fold(0.0, f64::max)
    }

    pub fn check_shape(&self, inst: &Instance) -> Result<()> {
        check_profile(inst, &self.profile)?;
        if self.payments.len() != inst.n_agents()
            || self.payments.iter().any(|p| p.len() != inst.n_outcomes())
        {
            return Err(Error::Precondition(
                "payments must be an agents x outcomes table".into(),
            ));
        }
        if self.payments.iter().flatten().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(Error::Precondition(
                "payments must be finite and nonnegative".into(),
            ));
        }
        Ok(())
    }
}

/// A distribution `mu` over profiles with recommendation-dependent payments.
#[derive(Debug, Clone, PartialEq)]
pub struct RandomizedContract {
    /// `mu[k]` for profile index `k`.
    pub mu: Vec<f64>,
    /// `pi[i][k][ω]`: payment to agent `i` when profile `k` is recommended.
    pub pi: Vec<Vec<Vec<f64>>>,
}

impl RandomizedContract {
    /// Zero payments everywhere, all mass on `profile`.
    pub fn point_mass(inst: &Instance, profile: usize) -> Self {
        let len = inst.profile_space().len();
        let mut mu = vec![0.0; len];
        mu[profile] = 1.0;
        Self {
            mu,
            pi: vec![vec![vec![0.0; inst.n_outcomes()]; len]; inst.n_agents()],
        }
    }

    pub fn check_shape(&self, inst: &Instance) -> Result<()> {
        let len = inst.profile_space().len();
        if self.mu.len() != len {
            return Err(Error::Precondition(format!(
                "mu has {} entries, instance has {len} profiles",
                self.mu.len()
            )));
        }
        if let Some(msg) = check_distribution(&self.mu, len) {
            return Err(Error::Precondition(format!("mu: {msg}")));
        }
        if self.pi.len() != inst.n_agents()
            || self
                .pi
                .iter()
                .any(|t| t.len() != len || t.iter().any(|r| r.len() != inst.n_outcomes()))
        {
            return Err(Error::Precondition(
                "pi must be an agents x profiles x outcomes table".into(),
            ));
        }
        if self.pi.iter().flatten().flatten().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(Error::Precondition("pi must be finite and nonnegative".into()));
        }
        Ok(())
    }
}

pub(crate) fn check_profile(inst: &Instance, profile: &ActionProfile) -> Result<()> {
    if profile.len() != inst.n_agents() {
        return Err(Error::Precondition(format!(
            "profile {profile} has {} entries, instance has {} agents",
            profile.len(),
            inst.n_agents()
        )));
    }
    for (i, &a) in profile.0.iter().enumerate() {
        if a >= inst.agents[i].actions.len() {
            return Err(Error::Precondition(format!(
                "profile {profile}: agent {i} has no action {a}"
            )));
        }
    }
    Ok(())
}

/// A ratio of two values that keeps zero denominators explicit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Ratio {
    Finite(f64),
    /// Numerator positive, denominator zero.
    Infinite,
    /// Zero over zero, or a nonpositive numerator over zero.
    Indeterminate,
}

impl Ratio {
    pub fn of(numerator: f64, denominator: f64, tol: f64) -> Self {
        if denominator.abs() <= tol {
            if numerator > tol {
                Ratio::Infinite
            } else {
                Ratio::Indeterminate
            }
        } else {
            Ratio::Finite(numerator / denominator)
        }
    }
}

impl fmt::Display for Ratio {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Ratio::Finite(x) => write!(f, "{x}"),
            Ratio::Infinite => write!(f, "inf"),
            Ratio::Indeterminate => write!(f, "0/0"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators;

    fn two_by_two() -> Instance {
        generators::gap()
    }

    #[test]
    fn gap_instance_is_valid() {
        assert!(validate_instance(&two_by_two()).is_empty());
    }

    #[test]
    fn unnormalized_distribution_is_reported() {
        let mut inst = two_by_two();
        inst.distributions[1] = vec![0.3, 0.6];
        let v = validate_instance(&inst);
        assert_eq!(v.len(), 1, "{v:?}");
        assert!(v[0].location.contains("distributions[1]"));
        assert!(v[0].location.contains("(a_up,a_down)"));
    }

    #[test]
    fn missing_zero_cost_action_names_the_agent() {
        let mut inst = two_by_two();
        inst.agents[1].actions[1].cost = 0.1;
        let v = validate_instance(&inst);
        assert_eq!(v.len(), 1, "{v:?}");
        assert_eq!(v[0].location, "agents[1]");
        assert!(v[0].message.contains(&inst.agents[1].name));
        assert!(v[0].message.contains("index 1"));
    }

    #[test]
    fn out_of_range_costs_and_rewards() {
        let mut inst = two_by_two();
        inst.outcomes[0].reward = 1.5;
        inst.agents[0].actions[0].cost = -0.1;
        let v = validate_instance(&inst);
        assert_eq!(v.len(), 2, "{v:?}");
    }

    #[test]
    fn profile_order_is_lexicographic() {
        let space = ProfileSpace::new(vec![2, 2]);
        let got: Vec<Vec<usize>> = space.iter().map(|p| p.0).collect();
        assert_eq!(got, vec![vec![0, 0], vec![0, 1], vec![1, 0], vec![1, 1]]);
        assert_eq!(ProfileSpace::new(vec![3]).len(), 3);
    }

    #[test]
    fn profile_count_matches_product() {
        let space = ProfileSpace::new(vec![2, 3, 2]);
        assert_eq!(space.len(), 2 * 3 * 2);
        let all: Vec<_> = space.iter().collect();
        let mut dedup = all.clone();
        dedup.dedup();
        assert_eq!(all.len(), dedup.len());
        assert!(all.windows(2).all(|w| w[0] < w[1]));
        for (k, p) in all.iter().enumerate() {
            assert_eq!(space.index(&p.0), k);
        }
    }

    #[test]
    fn with_component_replaces_one_digit() {
        let space = ProfileSpace::new(vec![2, 3, 2]);
        let k = space.index(&[1, 2, 0]);
        assert_eq!(space.profile(space.with_component(k, 1, 0)).0, vec![1, 0, 0]);
        assert_eq!(space.slice(1, 2).count(), 4);
    }

    #[test]
    fn ratio_tags() {
        assert_eq!(Ratio::of(1.0, 0.0, 1e-9), Ratio::Infinite);
        assert_eq!(Ratio::of(0.0, 0.0, 1e-9), Ratio::Indeterminate);
        assert_eq!(Ratio::of(1.0, 2.0, 1e-9), Ratio::Finite(0.5));
    }
}
