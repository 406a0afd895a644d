//! Agents with private, finitely many types.
//!
//! A contract is indexed by the reported type profile `λ`. Deterministic
//! contracts pick a profile `a^λ` and payments `p^{λ,i}`; randomized contracts
//! pick a distribution `μ^λ` and payments `π^{λ,i}_a`. Both must be dominant
//! strategy incentive compatible (DSIC): truthful reporting followed by
//! obedience must beat every joint misreport and deviation.
//!
//! Type profiles are indexed like action profiles: mixed radix with agent 0
//! most significant. The prior is a dense table over type profiles; welfare
//! expectations only visit profiles with positive prior mass, which keeps
//! instances with many zero-probability type profiles cheap.

use rayon::prelude::*;

use crate::detsolve::first_best;
use crate::error::{Error, Result};
use crate::lp::{solve_lp, LpModel, Relation, Sense};
use crate::model::{
    check_distribution, dot, Action, ActionProfile, Agent, Instance, Outcome, ProfileSpace,
    Violation,
};
use crate::randsolve::{RandLpConfig, MU_ZERO_TOL};
use crate::{FEAS_TOL, IC_TOL};

/// Default limit on `|A|^{|Λ|}` for the brute-force deterministic solver.
pub const DEFAULT_ENUMERATION_CAP: u128 = 1 << 20;
/// Largest relaxation (in variables) the dense simplex is asked to solve.
pub const BLP_VAR_CAP: usize = 6_000;
/// Largest `|Λ|·|A|` scanned by the affine construction.
pub const AFFINE_SCAN_CAP: u128 = 1 << 28;

#[derive(Debug, Clone, PartialEq)]
pub struct AgentType {
    pub name: String,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BayesAgent {
    pub name: String,
    pub actions: Vec<String>,
    pub types: Vec<AgentType>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum OutcomeModel {
    /// `F_a`, indexed by action profile.
    TypeIndependent(Vec<Vec<f64>>),
    /// `F^λ_a`, indexed by type profile then action profile.
    TypeDependent(Vec<Vec<Vec<f64>>>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct BayesianInstance {
    pub agents: Vec<BayesAgent>,
    pub outcomes: Vec<Outcome>,
    /// `G(λ)` by type-profile index.
    pub prior: Vec<f64>,
    /// `costs[i][t][a] = c_i^{t}(a)`.
    pub costs: Vec<Vec<Vec<f64>>>,
    /// Per-agent base costs when costs are `λ_i · c_i(a_i)`.
    pub base_costs: Option<Vec<Vec<f64>>>,
    pub outcome_model: OutcomeModel,
}

impl BayesianInstance {
    pub fn n_agents(&self) -> usize {
        self.agents.len()
    }

    pub fn n_outcomes(&self) -> usize {
        self.outcomes.len()
    }

    pub fn single_dimensional(&self) -> bool {
        self.base_costs.is_some()
    }

    pub fn profile_space(&self) -> ProfileSpace {
        ProfileSpace::new(self.agents.iter().map(|a| a.actions.len()).collect())
    }

    pub fn type_space(&self) -> ProfileSpace {
        ProfileSpace::new(self.agents.iter().map(|a| a.types.len()).collect())
    }

    pub fn rewards(&self) -> Vec<f64> {
        self.outcomes.iter().map(|o| o.reward).collect()
    }

    pub fn max_reward(&self) -> f64 {
        self.outcomes.iter().map(|o| o.reward).fold(0.0, f64::max)
    }

    pub fn is_type_independent(&self) -> bool {
        matches!(self.outcome_model, OutcomeModel::TypeIndependent(_))
    }

    #[inline]
    pub fn cost(&self, agent: usize, ty: usize, action: usize) -> f64 {
        self.costs[agent][ty][action]
    }

    /// `F^λ_a` for type-profile index `l` and action-profile index `k`.
    #[inline]
    pub fn dist(&self, l: usize, k: usize) -> &[f64] {
        match &self.outcome_model {
            OutcomeModel::TypeIndependent(f) => &f[k],
            OutcomeModel::TypeDependent(f) => &f[l][k],
        }
    }

    /// Indices of type profiles with positive prior mass, ascending.
    pub fn support(&self) -> Vec<usize> {
        (0..self.prior.len()).filter(|&l| self.prior[l] > 0.0).collect()
    }

    /// Total cost `Σ_i c_i^{λ_i}(a_i)` at type profile `l`, profile `k`, scaled by nothing.
    pub fn profile_cost(&self, tspace: &ProfileSpace, space: &ProfileSpace, l: usize, k: usize) -> f64 {
        (0..self.n_agents())
            .map(|i| self.cost(i, tspace.component(l, i), space.component(k, i)))
            .sum()
    }

    /// Wraps a non-Bayesian instance as one with a single type per agent.
    pub fn from_instance(inst: &Instance) -> Self {
        Self {
            agents: inst
                .agents
                .iter()
                .map(|a| BayesAgent {
                    name: a.name.clone(),
                    actions: a.actions.iter().map(|x| x.name.clone()).collect(),
                    types: vec![AgentType {
                        name: "default".into(),
                        value: 1.0,
                    }],
                })
                .collect(),
            outcomes: inst.outcomes.clone(),
            prior: vec![1.0],
            costs: inst
                .agents
                .iter()
                .map(|a| vec![a.actions.iter().map(|x| x.cost).collect()])
                .collect(),
            base_costs: None,
            outcome_model: OutcomeModel::TypeIndependent(inst.distributions.clone()),
        }
    }

    /// The complete-information instance faced at type profile `l`.
    pub fn instance_at(&self, l: usize) -> Instance {
        let tspace = self.type_space();
        let space = self.profile_space();
        Instance {
            agents: self
                .agents
                .iter()
                .enumerate()
                .map(|(i, a)| Agent {
                    name: a.name.clone(),
                    actions: a
                        .actions
                        .iter()
                        .enumerate()
                        .map(|(j, name)| Action {
                            name: name.clone(),
                            cost: self.cost(i, tspace.component(l, i), j),
                        })
                        .collect(),
                })
                .collect(),
            outcomes: self.outcomes.clone(),
            distributions: (0..space.len()).map(|k| self.dist(l, k).to_vec()).collect(),
        }
    }

    pub fn validate(&self) -> Vec<Violation> {
        validate_bayesian(self)
    }

    pub fn ensure_valid(&self) -> Result<()> {
        let v = self.validate();
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidInstance(v))
        }
    }
}

/// Lists every violated invariant of a Bayesian instance.
pub fn validate_bayesian(inst: &BayesianInstance) -> Vec<Violation> {
    let mut out = Vec::new();
    if inst.agents.is_empty() {
        out.push(Violation::new("agents", "at least one agent is required"));
    }
    if inst.outcomes.is_empty() {
        out.push(Violation::new("outcomes", "at least one outcome is required"));
    }
    for (k, o) in inst.outcomes.iter().enumerate() {
        if !(o.reward.is_finite() && (0.0..=1.0).contains(&o.reward)) {
            out.push(Violation::new(
                format!("outcomes[{k}].reward"),
                format!("reward {} outside [0,1]", o.reward),
            ));
        }
    }
    let mut shapes_ok = inst.costs.len() == inst.agents.len();
    if !shapes_ok {
        out.push(Violation::new("costs", "one cost table per agent is required"));
    }
    for (i, agent) in inst.agents.iter().enumerate() {
        if agent.actions.is_empty() || agent.types.is_empty() {
            out.push(Violation::new(
                format!("agents[{i}]"),
                format!("agent {} needs at least one action and one type", agent.name),
            ));
            shapes_ok = false;
            continue;
        }
        for (t, ty) in agent.types.iter().enumerate() {
            if !ty.value.is_finite() {
                out.push(Violation::new(
                    format!("agents[{i}].types[{t}].value"),
                    "type value must be finite",
                ));
            }
            if agent.types[..t].iter().any(|u| u.name == ty.name) {
                out.push(Violation::new(
                    format!("agents[{i}].types[{t}].name"),
                    format!("duplicate type name {:?}", ty.name),
                ));
            }
        }
        if !shapes_ok {
            continue;
        }
        let table = &inst.costs[i];
        if table.len() != agent.types.len()
            || table.iter().any(|row| row.len() != agent.actions.len())
        {
            out.push(Violation::new(
                format!("costs[{i}]"),
                "cost table must be types x actions",
            ));
            shapes_ok = false;
            continue;
        }
        for (t, row) in table.iter().enumerate() {
            for (a, &c) in row.iter().enumerate() {
                if !(c.is_finite() && (0.0..=1.0).contains(&c)) {
                    out.push(Violation::new(
                        format!("costs[{i}][{t}][{a}]"),
                        format!("cost {c} outside [0,1]"),
                    ));
                }
            }
            if !row.contains(&0.0) {
                out.push(Violation::new(
                    format!("costs[{i}][{t}]"),
                    format!(
                        "agent {} (index {i}) has no zero-cost action under type {}",
                        agent.name, agent.types[t].name
                    ),
                ));
            }
        }
    }
    if !shapes_ok {
        return out;
    }

    if let Some(base) = &inst.base_costs {
        if !inst.is_type_independent() {
            out.push(Violation::new(
                "distributions",
                "single-dimensional instances need type-independent distributions",
            ));
        }
        if base.len() != inst.agents.len() {
            out.push(Violation::new("base_costs", "one base-cost row per agent is required"));
        } else {
            for (i, agent) in inst.agents.iter().enumerate() {
                if base[i].len() != agent.actions.len() {
                    out.push(Violation::new(format!("base_costs[{i}]"), "wrong length"));
                    continue;
                }
                for (t, ty) in agent.types.iter().enumerate() {
                    for (a, &b) in base[i].iter().enumerate() {
                        if inst.costs[i][t][a] != ty.value * b {
                            out.push(Violation::new(
                                format!("costs[{i}][{t}][{a}]"),
                                format!("cost is not type value {} times base cost {b}", ty.value),
                            ));
                        }
                    }
                }
            }
        }
    }

    let counts: Vec<usize> = inst.agents.iter().map(|a| a.actions.len()).collect();
    let tcounts: Vec<usize> = inst.agents.iter().map(|a| a.types.len()).collect();
    let (Some(n_prof), Some(n_types)) = (
        ProfileSpace::checked_len(&counts),
        ProfileSpace::checked_len(&tcounts),
    ) else {
        out.push(Violation::new("agents", "profile count overflows"));
        return out;
    };
    if let Some(msg) = check_distribution(&inst.prior, n_types) {
        out.push(Violation::new("prior", msg));
    }
    let m = inst.n_outcomes();
    match &inst.outcome_model {
        OutcomeModel::TypeIndependent(f) => {
            if f.len() != n_prof {
                out.push(Violation::new(
                    "distributions",
                    format!("expected {n_prof} profile distributions, found {}", f.len()),
                ));
            } else {
                for (k, row) in f.iter().enumerate() {
                    if let Some(msg) = check_distribution(row, m) {
                        out.push(Violation::new(format!("distributions[{k}]"), msg));
                    }
                }
            }
        }
        OutcomeModel::TypeDependent(f) => {
            if f.len() != n_types || f.iter().any(|t| t.len() != n_prof) {
                out.push(Violation::new(
                    "typed_distributions",
                    format!("expected {n_types} x {n_prof} distributions"),
                ));
            } else {
                for (l, table) in f.iter().enumerate() {
                    for (k, row) in table.iter().enumerate() {
                        if let Some(msg) = check_distribution(row, m) {
                            out.push(Violation::new(
                                format!("typed_distributions[{l}][{k}]"),
                                msg,
                            ));
                        }
                    }
                }
            }
        }
    }
    out
}

/// Deterministic contract entry for one reported type profile.
#[derive(Debug, Clone, PartialEq)]
pub struct BayesDetEntry {
    pub profile: ActionProfile,
    /// `payments[i][ω]`; negative entries are allowed when limited liability is waived.
    pub payments: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BayesDeterministicContract {
    /// Whether the contract was built under nonnegative payments.
    pub limited_liability: bool,
    /// One entry per type profile, by index.
    pub entries: Vec<BayesDetEntry>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BayesRandomizedContract {
    /// `mu[λ][a]`.
    pub mu: Vec<Vec<f64>>,
    /// `pi[λ][i][a][ω]`.
    pub pi: Vec<Vec<Vec<Vec<f64>>>>,
}

impl BayesDeterministicContract {
    pub fn check_shape(&self, inst: &BayesianInstance) -> Result<()> {
        let t = inst.type_space().len();
        if self.entries.len() != t {
            return Err(Error::Precondition(format!(
                "contract has {} entries, instance has {t} type profiles",
                self.entries.len()
            )));
        }
        for (l, e) in self.entries.iter().enumerate() {
            let ok_profile = e.profile.len() == inst.n_agents()
                && e.profile
                    .0
                    .iter()
                    .zip(&inst.agents)
                    .all(|(&a, ag)| a < ag.actions.len());
            if !ok_profile {
                return Err(Error::Precondition(format!("entry {l}: invalid profile {}", e.profile)));
            }
            if e.payments.len() != inst.n_agents()
                || e.payments.iter().any(|p| p.len() != inst.n_outcomes())
                || e.payments.iter().flatten().any(|x| !x.is_finite())
            {
                return Err(Error::Precondition(format!(
                    "entry {l}: payments must be a finite agents x outcomes table"
                )));
            }
        }
        Ok(())
    }
}

impl BayesRandomizedContract {
    pub fn check_shape(&self, inst: &BayesianInstance) -> Result<()> {
        let t = inst.type_space().len();
        let p = inst.profile_space().len();
        if self.mu.len() != t || self.pi.len() != t {
            return Err(Error::Precondition(format!(
                "contract must have {t} type-profile blocks"
            )));
        }
        for l in 0..t {
            if let Some(msg) = check_distribution(&self.mu[l], p) {
                return Err(Error::Precondition(format!("mu[{l}]: {msg}")));
            }
            let shape_ok = self.pi[l].len() == inst.n_agents()
                && self.pi[l]
                    .iter()
                    .all(|t| t.len() == p && t.iter().all(|r| r.len() == inst.n_outcomes()));
            if !shape_ok {
                return Err(Error::Precondition(format!(
                    "pi[{l}] must be an agents x profiles x outcomes table"
                )));
            }
            if self.pi[l].iter().flatten().flatten().any(|x| !x.is_finite() || *x < 0.0) {
                return Err(Error::Precondition(format!(
                    "pi[{l}] must be finite and nonnegative"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SlackKind {
    Dsic,
    Ir,
}

/// One audited inequality. For deterministic DSIC rows `action` is `None`
/// and `deviation` is the misreporting agent's action; for randomized rows
/// `action`/`deviation` are unused because the row sums over them.
#[derive(Debug, Clone, PartialEq)]
pub struct BayesSlack {
    pub kind: SlackKind,
    pub agent: usize,
    pub type_profile: usize,
    pub report: Option<usize>,
    pub deviation: Option<usize>,
    pub slack: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SlackSummary {
    pub rows: usize,
    /// `+∞` when there are no rows.
    pub min_slack: f64,
    pub argmin: Option<BayesSlack>,
    pub violations: usize,
}

impl SlackSummary {
    fn new() -> Self {
        Self {
            rows: 0,
            min_slack: f64::INFINITY,
            argmin: None,
            violations: 0,
        }
    }

    fn push(&mut self, s: BayesSlack, tol: f64, keep: Option<&mut Vec<BayesSlack>>) {
        self.rows += 1;
        if s.slack < -tol {
            self.violations += 1;
        }
        if s.slack < self.min_slack {
            self.min_slack = s.slack;
            self.argmin = Some(s.clone());
        }
        if let Some(v) = keep {
            v.push(s);
        }
    }

    fn merge(mut self, other: SlackSummary) -> Self {
        self.rows += other.rows;
        self.violations += other.violations;
        if other.min_slack < self.min_slack {
            self.min_slack = other.min_slack;
            self.argmin = other.argmin;
        }
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BayesAudit {
    /// Expected principal utility under the prior.
    pub value: f64,
    pub dsic: SlackSummary,
    /// Present for deterministic contracts.
    pub ir: Option<SlackSummary>,
    pub ll_violations: usize,
    pub min_payment: f64,
    pub dsic_ok: bool,
    pub ir_ok: bool,
    pub ll_ok: bool,
    /// Whether the contract meets every requirement asked for.
    pub passes: bool,
    /// Every row, populated only when requested.
    pub slacks: Vec<BayesSlack>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AuditOptions {
    pub require_ll: bool,
    pub tol: f64,
    pub collect_slacks: bool,
}

impl AuditOptions {
    pub fn new(require_ll: bool) -> Self {
        Self {
            require_ll,
            tol: IC_TOL,
            collect_slacks: false,
        }
    }
}

/// Audits a deterministic Bayesian contract: DSIC over every
/// `(i, λ, λ'_i, a'_i)`, IR per `(i, λ)`, and limited liability.
pub fn verify_bayes_deterministic(
    inst: &BayesianInstance,
    contract: &BayesDeterministicContract,
    opts: &AuditOptions,
) -> Result<BayesAudit> {
    inst.ensure_valid()?;
    contract.check_shape(inst)?;
    let tspace = inst.type_space();
    let space = inst.profile_space();
    let rewards = inst.rewards();
    let n = inst.n_agents();
    let tol = opts.tol;

    let per_type: Vec<(SlackSummary, SlackSummary, Vec<BayesSlack>)> = (0..tspace.len())
        .into_par_iter()
        .map(|l| {
            let mut dsic = SlackSummary::new();
            let mut ir = SlackSummary::new();
            let mut kept = Vec::new();
            let e = &contract.entries[l];
            let k = space.index(&e.profile.0);
            for i in 0..n {
                let ti = tspace.component(l, i);
                let truthful =
                    dot(inst.dist(l, k), &e.payments[i]) - inst.cost(i, ti, e.profile.0[i]);
                let keep = if opts.collect_slacks { Some(&mut kept) } else { None };
                ir.push(
                    BayesSlack {
                        kind: SlackKind::Ir,
                        agent: i,
                        type_profile: l,
                        report: None,
                        deviation: None,
                        slack: truthful,
                    },
                    tol,
                    keep,
                );
                for report in 0..inst.agents[i].types.len() {
                    let lr = tspace.with_component(l, i, report);
                    let er = &contract.entries[lr];
                    let kr = space.index(&er.profile.0);
                    for dev in 0..inst.agents[i].actions.len() {
                        if lr == l && dev == e.profile.0[i] {
                            continue;
                        }
                        let kd = space.with_component(kr, i, dev);
                        let u = dot(inst.dist(l, kd), &er.payments[i]) - inst.cost(i, ti, dev);
                        let keep = if opts.collect_slacks { Some(&mut kept) } else { None };
                        dsic.push(
                            BayesSlack {
                                kind: SlackKind::Dsic,
                                agent: i,
                                type_profile: l,
                                report: Some(report),
                                deviation: Some(dev),
                                slack: truthful - u,
                            },
                            tol,
                            keep,
                        );
                    }
                }
            }
            (dsic, ir, kept)
        })
        .collect();

    let mut dsic = SlackSummary::new();
    let mut ir = SlackSummary::new();
    let mut slacks = Vec::new();
    for (d, r, kept) in per_type {
        dsic = dsic.merge(d);
        ir = ir.merge(r);
        slacks.extend(kept);
    }

    let mut value = 0.0;
    for l in inst.support() {
        let e = &contract.entries[l];
        let f = inst.dist(l, space.index(&e.profile.0));
        let net: f64 = (0..inst.n_outcomes())
            .map(|w| f[w] * (rewards[w] - e.payments.iter().map(|p| p[w]).sum::<f64>()))
            .sum();
        value += inst.prior[l] * net;
    }

    let all = contract.entries.iter().flat_map(|e| e.payments.iter().flatten());
    let ll_violations = all.clone().filter(|&&x| x < -tol).count();
    let min_payment = all.copied().fold(f64::INFINITY, f64::min);
    let dsic_ok = dsic.min_slack >= -tol;
    let ir_ok = ir.min_slack >= -tol;
    let ll_ok = ll_violations == 0;
    let passes = dsic_ok && if opts.require_ll { ll_ok } else { ir_ok };
    Ok(BayesAudit {
        value,
        dsic,
        ir: Some(ir),
        ll_violations,
        min_payment,
        dsic_ok,
        ir_ok,
        ll_ok,
        passes,
        slacks,
    })
}

/// Audits a randomized Bayesian contract against the summed-maximum DSIC rows
/// for every `(i, λ, λ'_i)`.
pub fn verify_bayes_randomized(
    inst: &BayesianInstance,
    contract: &BayesRandomizedContract,
    opts: &AuditOptions,
) -> Result<BayesAudit> {
    inst.ensure_valid()?;
    contract.check_shape(inst)?;
    let tspace = inst.type_space();
    let space = inst.profile_space();
    let rewards = inst.rewards();
    let tol = opts.tol;

    let per_type: Vec<(SlackSummary, Vec<BayesSlack>)> = (0..tspace.len())
        .into_par_iter()
        .map(|l| {
            let mut dsic = SlackSummary::new();
            let mut kept = Vec::new();
            for i in 0..inst.n_agents() {
                let ti = tspace.component(l, i);
                let n_actions = inst.agents[i].actions.len();
                let truthful: f64 = (0..space.len())
                    .filter(|&k| contract.mu[l][k] > 0.0)
                    .map(|k| {
                        contract.mu[l][k]
                            * (dot(inst.dist(l, k), &contract.pi[l][i][k])
                                - inst.cost(i, ti, space.component(k, i)))
                    })
                    .sum();
                for report in 0..inst.agents[i].types.len() {
                    let lr = tspace.with_component(l, i, report);
                    let mu = &contract.mu[lr];
                    let pi = &contract.pi[lr][i];
                    let mut bound = 0.0;
                    for ai in 0..n_actions {
                        let best = (0..n_actions)
                            .map(|dev| {
                                space
                                    .slice(i, ai)
                                    .filter(|&k| mu[k] > 0.0)
                                    .map(|k| {
                                        let kd = space.with_component(k, i, dev);
                                        mu[k] * (dot(inst.dist(l, kd), &pi[k]) - inst.cost(i, ti, dev))
                                    })
                                    .sum::<f64>()
                            })
                            .fold(f64::NEG_INFINITY, f64::max);
                        bound += best;
                    }
                    let keep = if opts.collect_slacks { Some(&mut kept) } else { None };
                    dsic.push(
                        BayesSlack {
                            kind: SlackKind::Dsic,
                            agent: i,
                            type_profile: l,
                            report: Some(report),
                            deviation: None,
                            slack: truthful - bound,
                        },
                        tol,
                        keep,
                    );
                }
            }
            (dsic, kept)
        })
        .collect();

    let mut dsic = SlackSummary::new();
    let mut slacks = Vec::new();
    for (d, kept) in per_type {
        dsic = dsic.merge(d);
        slacks.extend(kept);
    }

    let mut value = 0.0;
    for l in inst.support() {
        let mut v = 0.0;
        for k in 0..space.len() {
            let mu = contract.mu[l][k];
            if mu == 0.0 {
                continue;
            }
            let f = inst.dist(l, k);
            let net: f64 = (0..inst.n_outcomes())
                .map(|w| f[w] * (rewards[w] - contract.pi[l].iter().map(|p| p[k][w]).sum::<f64>()))
                .sum();
            v += mu * net;
        }
        value += inst.prior[l] * v;
    }
    let min_payment = contract
        .pi
        .iter()
        .flatten()
        .flatten()
        .flatten()
        .copied()
        .fold(f64::INFINITY, f64::min);
    let dsic_ok = dsic.min_slack >= -tol;
    Ok(BayesAudit {
        value,
        dsic,
        ir: None,
        ll_violations: 0,
        min_payment,
        dsic_ok,
        ir_ok: true,
        ll_ok: true,
        passes: dsic_ok,
        slacks,
    })
}

/// Virtual welfare `max_a [Σ_ω F^λ_a(ω) r_ω − α Σ_i c_i^{λ_i}(a_i)]` at one
/// type profile, with the lexicographically first maximizer.
pub fn vsw_at(inst: &BayesianInstance, l: usize, alpha: f64) -> (f64, usize) {
    let space = inst.profile_space();
    let tspace = inst.type_space();
    let rewards = inst.rewards();
    let vals = (0..space.len()).map(|k| {
        Some(dot(inst.dist(l, k), &rewards) - alpha * inst.profile_cost(&tspace, &space, l, k))
    });
    let (k, v) = first_best(vals).expect("profile space is nonempty");
    (v, k)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TypeWelfare {
    pub type_profile: usize,
    pub prob: f64,
    /// One value per requested scale.
    pub vsw: Vec<f64>,
    pub argmax: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BayesWelfare {
    pub scales: Vec<f64>,
    /// `E_λ V_sw^α(λ)` per scale.
    pub expected: Vec<f64>,
    /// `E_λ V_sw^1(λ)`.
    pub sw: f64,
    /// Type profiles with positive prior mass only.
    pub per_type: Vec<TypeWelfare>,
}

/// Per-type and expected virtual welfare for each scale.
pub fn bayes_welfare(inst: &BayesianInstance, scales: &[f64]) -> Result<BayesWelfare> {
    inst.ensure_valid()?;
    if let Some(a) = scales.iter().find(|a| !(a.is_finite() && **a >= 0.0)) {
        return Err(Error::Parameter(format!("scale {a} must be finite and nonnegative")));
    }
    let mut all_scales = scales.to_vec();
    all_scales.push(1.0);
    let per_type: Vec<TypeWelfare> = inst
        .support()
        .into_par_iter()
        .map(|l| {
            let (vsw, argmax) = all_scales.iter().map(|&a| vsw_at(inst, l, a)).unzip();
            TypeWelfare {
                type_profile: l,
                prob: inst.prior[l],
                vsw,
                argmax,
            }
        })
        .collect();
    let expect = |s: usize| per_type.iter().map(|t| t.prob * t.vsw[s]).sum::<f64>();
    let expected: Vec<f64> = (0..scales.len()).map(expect).collect();
    let sw = expect(scales.len());
    let per_type = per_type
        .into_iter()
        .map(|mut t| {
            t.vsw.pop();
            t.argmax.pop();
            t
        })
        .collect();
    Ok(BayesWelfare {
        scales: scales.to_vec(),
        expected,
        sw,
        per_type,
    })
}

/// The affine contract: recommend the maximizer of
/// `F_a·r/(n(1+δ)) − Σ_i c_i^{λ_i}(a_i)` and pay agent `i` the share
/// `r_ω/(n(1+δ))` minus the other agents' reported costs.
pub fn affine_contract(inst: &BayesianInstance, delta: f64) -> Result<BayesDeterministicContract> {
    inst.ensure_valid()?;
    if !(delta.is_finite() && delta > 0.0) {
        return Err(Error::Parameter(format!("delta must be positive, got {delta}")));
    }
    if !inst.is_type_independent() {
        return Err(Error::Unsupported(
            "the affine contract needs outcome distributions that do not depend on types".into(),
        ));
    }
    let tspace = inst.type_space();
    let space = inst.profile_space();
    let scan = tspace.len() as u128 * space.len() as u128;
    if scan > AFFINE_SCAN_CAP {
        return Err(Error::EnumerationCap {
            required: scan,
            cap: AFFINE_SCAN_CAP,
        });
    }
    let n = inst.n_agents();
    let share = 1.0 / (n as f64 * (1.0 + delta));
    let rewards = inst.rewards();
    let er: Vec<f64> = (0..space.len()).map(|k| dot(inst.dist(0, k), &rewards)).collect();
    let entries = (0..tspace.len())
        .into_par_iter()
        .map(|l| {
            let vals = (0..space.len())
                .map(|k| Some(share * er[k] - inst.profile_cost(&tspace, &space, l, k)));
            let (k, _) = first_best(vals).expect("profile space is nonempty");
            let profile = space.profile(k);
            let own: Vec<f64> = (0..n)
                .map(|j| inst.cost(j, tspace.component(l, j), profile.0[j]))
                .collect();
            let total: f64 = own.iter().sum();
            let payments = (0..n)
                .map(|i| {
                    let others = total - own[i];
                    rewards.iter().map(|r| share * r - others).collect()
                })
                .collect();
            BayesDetEntry { profile, payments }
        })
        .collect();
    Ok(BayesDeterministicContract {
        limited_liability: false,
        entries,
    })
}

/// Variable layout of the Bayesian relaxation: per type profile a block of
/// `μ^λ(a)` then `x^{λ,i}_a(ω)`; then every `z^i(λ, λ'_i, a_i)`.
#[derive(Debug, Clone)]
pub struct BlpLayout {
    pub type_profiles: usize,
    pub profiles: usize,
    pub agents: usize,
    pub outcomes: usize,
    z_offsets: Vec<usize>,
    types: Vec<usize>,
    actions: Vec<usize>,
    n_vars: usize,
}

impl BlpLayout {
    pub fn of(inst: &BayesianInstance) -> Self {
        let t = inst.type_space().len();
        let p = inst.profile_space().len();
        let (n, m) = (inst.n_agents(), inst.n_outcomes());
        let block = p * (1 + n * m);
        let mut z_offsets = Vec::with_capacity(n);
        let mut next = t * block;
        for a in &inst.agents {
            z_offsets.push(next);
            next += t * a.types.len() * a.actions.len();
        }
        Self {
            type_profiles: t,
            profiles: p,
            agents: n,
            outcomes: m,
            z_offsets,
            types: inst.agents.iter().map(|a| a.types.len()).collect(),
            actions: inst.agents.iter().map(|a| a.actions.len()).collect(),
            n_vars: next,
        }
    }

    fn block(&self) -> usize {
        self.profiles * (1 + self.agents * self.outcomes)
    }

    pub fn mu(&self, l: usize, k: usize) -> usize {
        l * self.block() + k
    }

    pub fn x(&self, l: usize, i: usize, k: usize, w: usize) -> usize {
        l * self.block() + self.profiles + (i * self.profiles + k) * self.outcomes + w
    }

    pub fn z(&self, i: usize, l: usize, report: usize, ai: usize) -> usize {
        self.z_offsets[i] + (l * self.types[i] + report) * self.actions[i] + ai
    }

    pub fn n_vars(&self) -> usize {
        self.n_vars
    }
}

/// Builds the Bayesian capped relaxation with no profile excluded.
pub fn build_blp(inst: &BayesianInstance, cfg: &RandLpConfig) -> Result<LpModel> {
    inst.ensure_valid()?;
    cfg.check()?;
    let lay = BlpLayout::of(inst);
    if lay.n_vars() > BLP_VAR_CAP {
        return Err(Error::EnumerationCap {
            required: lay.n_vars() as u128,
            cap: BLP_VAR_CAP as u128,
        });
    }
    let tspace = inst.type_space();
    let space = inst.profile_space();
    let (n, m) = (lay.agents, lay.outcomes);
    let rewards = inst.rewards();
    let mut lp = LpModel::new(Sense::Maximize, lay.n_vars());
    for i in 0..n {
        for l in 0..lay.type_profiles {
            for r in 0..lay.types[i] {
                for ai in 0..lay.actions[i] {
                    let z = lay.z(i, l, r, ai);
                    lp.lower[z] = f64::NEG_INFINITY;
                }
            }
        }
    }

    for l in 0..lay.type_profiles {
        let g = inst.prior[l];
        if g == 0.0 {
            continue;
        }
        for k in 0..lay.profiles {
            let f = inst.dist(l, k);
            lp.objective[lay.mu(l, k)] = g * dot(f, &rewards);
            for i in 0..n {
                for w in 0..m {
                    lp.objective[lay.x(l, i, k, w)] = -g * f[w];
                }
            }
        }
    }

    for i in 0..n {
        for l in 0..lay.type_profiles {
            let ti = tspace.component(l, i);
            for r in 0..lay.types[i] {
                // Truthful utility dominates the summed best misreport payoffs.
                let mut terms = Vec::new();
                for k in 0..lay.profiles {
                    let f = inst.dist(l, k);
                    for w in 0..m {
                        terms.push((lay.x(l, i, k, w), f[w]));
                    }
                    terms.push((lay.mu(l, k), -inst.cost(i, ti, space.component(k, i))));
                }
                for ai in 0..lay.actions[i] {
                    terms.push((lay.z(i, l, r, ai), -1.0));
                }
                lp.add_sparse(&terms, Relation::Ge, 0.0);

                let lr = tspace.with_component(l, i, r);
                for ai in 0..lay.actions[i] {
                    for dev in 0..lay.actions[i] {
                        let mut terms = vec![(lay.z(i, l, r, ai), 1.0)];
                        for k in space.slice(i, ai) {
                            let fd = inst.dist(l, space.with_component(k, i, dev));
                            for w in 0..m {
                                terms.push((lay.x(lr, i, k, w), -fd[w]));
                            }
                            terms.push((lay.mu(lr, k), inst.cost(i, ti, dev)));
                        }
                        lp.add_sparse(&terms, Relation::Ge, 0.0);
                    }
                }
            }
        }
    }

    for l in 0..lay.type_profiles {
        for i in 0..n {
            for k in 0..lay.profiles {
                for w in 0..m {
                    lp.add_sparse(
                        &[(lay.x(l, i, k, w), 1.0), (lay.mu(l, k), -cfg.m)],
                        Relation::Le,
                        0.0,
                    );
                }
            }
        }
        let all: Vec<(usize, f64)> = (0..lay.profiles).map(|k| (lay.mu(l, k), 1.0)).collect();
        lp.add_sparse(&all, Relation::Eq, 1.0);
    }
    Ok(lp)
}

#[derive(Debug, Clone, PartialEq)]
pub struct BayesRandReport {
    pub m: f64,
    pub lp_value: f64,
    pub contract: BayesRandomizedContract,
    pub audit: BayesAudit,
    pub value_recomputed: f64,
}

/// Solves the Bayesian relaxation and recovers `π = x/μ^λ`.
pub fn solve_bayesian_randomized(
    inst: &BayesianInstance,
    cfg: &RandLpConfig,
) -> Result<BayesRandReport> {
    let lp = build_blp(inst, cfg)?;
    let sol = solve_lp(&lp, cfg.feas_tol)?;
    if !sol.is_optimal() {
        return Err(Error::Internal(format!(
            "Bayesian relaxation reported {:?}",
            sol.status
        )));
    }
    let lay = BlpLayout::of(inst);
    let mut mu = Vec::with_capacity(lay.type_profiles);
    let mut pi = Vec::with_capacity(lay.type_profiles);
    for l in 0..lay.type_profiles {
        let mut row: Vec<f64> = (0..lay.profiles).map(|k| sol.x[lay.mu(l, k)].max(0.0)).collect();
        let total: f64 = row.iter().sum();
        if total > 0.0 {
            row.iter_mut().for_each(|v| *v /= total);
        }
        let block = (0..lay.agents)
            .map(|i| {
                (0..lay.profiles)
                    .map(|k| {
                        (0..lay.outcomes)
                            .map(|w| {
                                if row[k] > MU_ZERO_TOL {
                                    (sol.x[lay.x(l, i, k, w)] / row[k]).max(0.0)
                                } else {
                                    0.0
                                }
                            })
                            .collect()
                    })
                    .collect()
            })
            .collect();
        mu.push(row);
        pi.push(block);
    }
    let contract = BayesRandomizedContract { mu, pi };
    let opts = AuditOptions {
        require_ll: true,
        tol: cfg.ic_tol,
        collect_slacks: false,
    };
    let audit = verify_bayes_randomized(inst, &contract, &opts)?;
    Ok(BayesRandReport {
        m: cfg.m,
        lp_value: sol.objective,
        value_recomputed: audit.value,
        contract,
        audit,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct BruteForceResult {
    pub contract: BayesDeterministicContract,
    pub value: f64,
    /// Number of assignments `Λ → A` enumerated.
    pub assignments: u128,
    /// Number of those that admit DSIC payments.
    pub feasible: usize,
}

/// Cheapest DSIC payments for a fixed assignment `λ ↦ profile index`.
/// With `require_ll` payments are nonnegative; otherwise they are free and
/// IR rows are added. Returns `(payments per λ, expected payment)`.
pub fn bayes_min_payment(
    inst: &BayesianInstance,
    assignment: &[usize],
    require_ll: bool,
) -> Result<Option<(Vec<Vec<Vec<f64>>>, f64)>> {
    let tspace = inst.type_space();
    let space = inst.profile_space();
    let (n, m) = (inst.n_agents(), inst.n_outcomes());
    let t = tspace.len();
    if assignment.len() != t || assignment.iter().any(|&k| k >= space.len()) {
        return Err(Error::Precondition("assignment must map every type profile to a profile".into()));
    }
    let var = |l: usize, i: usize, w: usize| (l * n + i) * m + w;
    let mut lp = LpModel::new(Sense::Minimize, t * n * m);
    if !require_ll {
        lp.lower.iter_mut().for_each(|v| *v = f64::NEG_INFINITY);
    }
    for l in 0..t {
        let g = inst.prior[l];
        if g == 0.0 {
            continue;
        }
        let f = inst.dist(l, assignment[l]);
        for i in 0..n {
            for w in 0..m {
                lp.objective[var(l, i, w)] = g * f[w];
            }
        }
    }
    for l in 0..t {
        let k = assignment[l];
        let f = inst.dist(l, k);
        for i in 0..n {
            let ti = tspace.component(l, i);
            let ci = inst.cost(i, ti, space.component(k, i));
            if !require_ll {
                let terms: Vec<(usize, f64)> = (0..m).map(|w| (var(l, i, w), f[w])).collect();
                lp.add_sparse(&terms, Relation::Ge, ci);
            }
            for r in 0..inst.agents[i].types.len() {
                let lr = tspace.with_component(l, i, r);
                let kr = assignment[lr];
                for dev in 0..inst.agents[i].actions.len() {
                    if lr == l && dev == space.component(k, i) {
                        continue;
                    }
                    let fd = inst.dist(l, space.with_component(kr, i, dev));
                    let mut terms: Vec<(usize, f64)> =
                        (0..m).map(|w| (var(l, i, w), f[w])).collect();
                    terms.extend((0..m).map(|w| (var(lr, i, w), -fd[w])));
                    lp.add_sparse(&terms, Relation::Ge, ci - inst.cost(i, ti, dev));
                }
            }
        }
    }
    let sol = solve_lp(&lp, FEAS_TOL)?;
    if !sol.is_optimal() {
        return Ok(None);
    }
    let payments = (0..t)
        .map(|l| (0..n).map(|i| (0..m).map(|w| sol.x[var(l, i, w)]).collect()).collect())
        .collect();
    Ok(Some((payments, sol.objective)))
}

/// Exhaustive search over assignments `Λ → A` (type-profile index most
/// significant), keeping the first best by expected principal utility.
pub fn brute_force_bayes_deterministic(
    inst: &BayesianInstance,
    require_ll: bool,
    cap: u128,
) -> Result<BruteForceResult> {
    inst.ensure_valid()?;
    let tspace = inst.type_space();
    let space = inst.profile_space();
    let (t, p) = (tspace.len(), space.len());
    let required = (p as u128).checked_pow(t as u32).unwrap_or(u128::MAX);
    if required > cap {
        return Err(Error::EnumerationCap { required, cap });
    }
    let rewards = inst.rewards();
    let support = inst.support();
    let decode = |mut idx: u128| {
        let mut a = vec![0usize; t];
        for l in (0..t).rev() {
            a[l] = (idx % p as u128) as usize;
            idx /= p as u128;
        }
        a
    };
    let values: Vec<Option<f64>> = (0..required as u64)
        .into_par_iter()
        .map(|idx| {
            let a = decode(idx as u128);
            let reward: f64 = support
                .iter()
                .map(|&l| inst.prior[l] * dot(inst.dist(l, a[l]), &rewards))
                .sum();
            bayes_min_payment(inst, &a, require_ll).map(|r| r.map(|(_, pay)| reward - pay))
        })
        .collect::<Result<_>>()?;
    let feasible = values.iter().flatten().count();
    let (best, _) = first_best(values)
        .ok_or_else(|| Error::Internal("no DSIC assignment in a valid instance".into()))?;
    let a = decode(best as u128);
    let (payments, _) = bayes_min_payment(inst, &a, require_ll)?
        .ok_or_else(|| Error::Internal("best assignment became infeasible".into()))?;
    let contract = BayesDeterministicContract {
        limited_liability: require_ll,
        entries: a
            .iter()
            .zip(payments)
            .map(|(&k, payments)| BayesDetEntry {
                profile: space.profile(k),
                payments,
            })
            .collect(),
    };
    let audit = verify_bayes_deterministic(inst, &contract, &AuditOptions::new(require_ll))?;
    Ok(BruteForceResult {
        value: audit.value,
        contract,
        assignments: required,
        feasible,
    })
}
