//! JSON documents for instances and contracts.
//!
//! Files name actions, types and outcomes; the library works with indices.
//! Parsing resolves names, rejects duplicates and unknown names with a field
//! path, and runs full validation. Floats are written in shortest round-trip
//! form, so `parse(serialize(x)) == x` holds exactly.

use serde::{Deserialize, Serialize};

use crate::bayes::{
    AgentType, BayesAgent, BayesDetEntry, BayesDeterministicContract, BayesRandomizedContract,
    BayesianInstance, OutcomeModel,
};
use crate::error::{Error, Result};
use crate::model::{
    Action, ActionProfile, Agent, DeterministicContract, Instance, Outcome, ProfileSpace,
    RandomizedContract, Violation,
};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDoc {
    agents: Vec<RawAgent>,
    outcomes: Vec<RawOutcome>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    single_dimensional: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    prior: Option<Vec<RawPrior>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    distributions: Option<Vec<RawDist>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    typed_distributions: Option<Vec<RawTypedDist>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    typed_costs: Option<Vec<RawTypedCost>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawAgent {
    name: String,
    actions: Vec<RawAction>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    types: Option<Vec<RawType>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawAction {
    name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    cost: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawType {
    name: String,
    value: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOutcome {
    name: String,
    reward: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDist {
    profile: Vec<String>,
    probs: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPrior {
    type_profile: Vec<String>,
    prob: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTypedDist {
    type_profile: Vec<String>,
    profile: Vec<String>,
    probs: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTypedCost {
    agent: String,
    #[serde(rename = "type")]
    ty: String,
    action: String,
    cost: f64,
}

/// Either kind of instance document.
#[derive(Debug, Clone, PartialEq)]
pub enum Document {
    Instance(Instance),
    Bayesian(BayesianInstance),
}

impl Document {
    pub fn kind(&self) -> &'static str {
        match self {
            Document::Instance(_) => "instance",
            Document::Bayesian(_) => "bayesian",
        }
    }
}

fn json_error(e: serde_json::Error) -> Error {
    Error::parse(format!("line {}, column {}", e.line(), e.column()), e.to_string())
}

fn read_raw(text: &str) -> Result<RawDoc> {
    serde_json::from_str(text).map_err(json_error)
}

fn is_bayesian(raw: &RawDoc) -> bool {
    raw.prior.is_some()
        || raw.typed_costs.is_some()
        || raw.typed_distributions.is_some()
        || raw.single_dimensional.is_some()
        || raw.agents.iter().any(|a| a.types.is_some())
}

/// Parses either an instance or a Bayesian instance, choosing by the fields present.
pub fn parse_document(text: &str) -> Result<Document> {
    let raw = read_raw(text)?;
    if is_bayesian(&raw) {
        bayesian_from_raw(raw).map(Document::Bayesian)
    } else {
        instance_from_raw(raw).map(Document::Instance)
    }
}

pub fn serialize_document(doc: &Document) -> String {
    match doc {
        Document::Instance(i) => serialize_instance(i),
        Document::Bayesian(b) => serialize_bayesian(b),
    }
}

pub fn parse_instance(text: &str) -> Result<Instance> {
    let raw = read_raw(text)?;
    if is_bayesian(&raw) {
        return Err(Error::parse(
            "document",
            "this is a Bayesian instance (it declares types or a prior)",
        ));
    }
    instance_from_raw(raw)
}

pub fn parse_bayesian(text: &str) -> Result<BayesianInstance> {
    bayesian_from_raw(read_raw(text)?)
}

fn unique_names<'a>(names: impl Iterator<Item = &'a str>, what: &str, at: &str) -> Result<()> {
    let mut seen: Vec<&str> = Vec::new();
    for (k, n) in names.enumerate() {
        if seen.contains(&n) {
            return Err(Error::parse(format!("{at}[{k}]"), format!("duplicate {what} name {n:?}")));
        }
        seen.push(n);
    }
    Ok(())
}

/// Resolves per-agent names to a profile index.
fn resolve<F>(names: &[String], n: usize, lookup: F, at: &str) -> Result<Vec<usize>>
where
    F: Fn(usize, &str) -> Option<usize>,
{
    if names.len() != n {
        return Err(Error::parse(
            at,
            format!("expected {n} entries, one per agent, found {}", names.len()),
        ));
    }
    names
        .iter()
        .enumerate()
        .map(|(i, s)| {
            lookup(i, s).ok_or_else(|| Error::parse(format!("{at}[{i}]"), format!("unknown name {s:?}")))
        })
        .collect()
}

fn action_lookup(actions: &[Vec<String>]) -> impl Fn(usize, &str) -> Option<usize> + '_ {
    move |i, s| actions[i].iter().position(|a| a == s)
}

/// Fills a dense table from named rows, reporting duplicates and gaps.
fn fill_rows(
    space: &ProfileSpace,
    rows: impl Iterator<Item = (Vec<usize>, Vec<f64>, String)>,
    label: impl Fn(usize) -> String,
    at: &str,
    violations: &mut Vec<Violation>,
) -> Result<Vec<Vec<f64>>> {
    let mut table: Vec<Option<Vec<f64>>> = vec![None; space.len()];
    for (idx, probs, loc) in rows {
        let k = space.index(&idx);
        if table[k].is_some() {
            return Err(Error::parse(loc, format!("duplicate entry for {}", label(k))));
        }
        table[k] = Some(probs);
    }
    Ok(table
        .into_iter()
        .enumerate()
        .map(|(k, r)| {
            r.unwrap_or_else(|| {
                violations.push(Violation::new(at, format!("no entry for {}", label(k))));
                Vec::new()
            })
        })
        .collect())
}

fn checked_space(sizes: Vec<usize>, what: &str) -> Result<ProfileSpace> {
    if sizes.contains(&0) {
        return Err(Error::parse("agents", format!("every agent needs at least one {what}")));
    }
    if ProfileSpace::checked_len(&sizes).is_none() {
        return Err(Error::parse("agents", format!("{what} profile count overflows")));
    }
    Ok(ProfileSpace::new(sizes))
}

fn instance_from_raw(raw: RawDoc) -> Result<Instance> {
    unique_names(raw.agents.iter().map(|a| a.name.as_str()), "agent", "agents")?;
    unique_names(raw.outcomes.iter().map(|o| o.name.as_str()), "outcome", "outcomes")?;
    let mut agents = Vec::with_capacity(raw.agents.len());
    for (i, a) in raw.agents.iter().enumerate() {
        unique_names(
            a.actions.iter().map(|x| x.name.as_str()),
            "action",
            &format!("agents[{i}].actions"),
        )?;
        let actions = a
            .actions
            .iter()
            .enumerate()
            .map(|(j, x)| {
                x.cost.map(|cost| Action { name: x.name.clone(), cost }).ok_or_else(|| {
                    Error::parse(format!("agents[{i}].actions[{j}].cost"), "missing cost")
                })
            })
            .collect::<Result<_>>()?;
        agents.push(Agent {
            name: a.name.clone(),
            actions,
        });
    }
    let outcomes = raw
        .outcomes
        .iter()
        .map(|o| Outcome {
            name: o.name.clone(),
            reward: o.reward,
        })
        .collect();
    let mut inst = Instance {
        agents,
        outcomes,
        distributions: Vec::new(),
    };
    let dists = raw
        .distributions
        .ok_or_else(|| Error::parse("distributions", "missing field"))?;
    if inst.agents.is_empty() {
        return Err(Error::InvalidInstance(inst.validate()));
    }
    let space = checked_space(inst.action_counts(), "action")?;
    let names: Vec<Vec<String>> = inst
        .agents
        .iter()
        .map(|a| a.actions.iter().map(|x| x.name.clone()).collect())
        .collect();
    let n = inst.n_agents();
    let rows = dists
        .into_iter()
        .enumerate()
        .map(|(r, d)| {
            let loc = format!("distributions[{r}].profile");
            resolve(&d.profile, n, action_lookup(&names), &loc).map(|idx| (idx, d.probs, loc))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut violations = Vec::new();
    inst.distributions = fill_rows(
        &space,
        rows.into_iter(),
        |k| format!("profile {}", inst.profile_label(&space.profile(k))),
        "distributions",
        &mut violations,
    )?;
    if violations.is_empty() {
        violations = inst.validate();
    }
    if !violations.is_empty() {
        return Err(Error::InvalidInstance(violations));
    }
    Ok(inst)
}

fn names_of(space: &ProfileSpace, k: usize, names: &[Vec<String>]) -> Vec<String> {
    (0..space.dims())
        .map(|i| names[i][space.component(k, i)].clone())
        .collect()
}

pub fn serialize_instance(inst: &Instance) -> String {
    let space = inst.profile_space();
    let names: Vec<Vec<String>> = inst
        .agents
        .iter()
        .map(|a| a.actions.iter().map(|x| x.name.clone()).collect())
        .collect();
    let raw = RawDoc {
        agents: inst
            .agents
            .iter()
            .map(|a| RawAgent {
                name: a.name.clone(),
                actions: a
                    .actions
                    .iter()
                    .map(|x| RawAction {
                        name: x.name.clone(),
                        cost: Some(x.cost),
                    })
                    .collect(),
                types: None,
            })
            .collect(),
        outcomes: raw_outcomes(&inst.outcomes),
        single_dimensional: None,
        prior: None,
        distributions: Some(
            inst.distributions
                .iter()
                .enumerate()
                .map(|(k, p)| RawDist {
                    profile: names_of(&space, k, &names),
                    probs: p.clone(),
                })
                .collect(),
        ),
        typed_distributions: None,
        typed_costs: None,
    };
    to_json(&raw)
}

fn raw_outcomes(outcomes: &[Outcome]) -> Vec<RawOutcome> {
    outcomes
        .iter()
        .map(|o| RawOutcome {
            name: o.name.clone(),
            reward: o.reward,
        })
        .collect()
}

fn to_json<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("documents always serialize");
    s.push('\n');
    s
}

fn bayesian_from_raw(raw: RawDoc) -> Result<BayesianInstance> {
    unique_names(raw.agents.iter().map(|a| a.name.as_str()), "agent", "agents")?;
    unique_names(raw.outcomes.iter().map(|o| o.name.as_str()), "outcome", "outcomes")?;
    let single = raw.single_dimensional.unwrap_or(false);
    let mut agents = Vec::with_capacity(raw.agents.len());
    let mut base_costs = Vec::new();
    for (i, a) in raw.agents.iter().enumerate() {
        unique_names(
            a.actions.iter().map(|x| x.name.as_str()),
            "action",
            &format!("agents[{i}].actions"),
        )?;
        let types = a
            .types
            .as_ref()
            .ok_or_else(|| Error::parse(format!("agents[{i}].types"), "missing field"))?;
        unique_names(types.iter().map(|t| t.name.as_str()), "type", &format!("agents[{i}].types"))?;
        if single {
            let base = a
                .actions
                .iter()
                .enumerate()
                .map(|(j, x)| {
                    x.cost.ok_or_else(|| {
                        Error::parse(
                            format!("agents[{i}].actions[{j}].cost"),
                            "single-dimensional instances need a base cost per action",
                        )
                    })
                })
                .collect::<Result<Vec<f64>>>()?;
            base_costs.push(base);
        } else if let Some(j) = a.actions.iter().position(|x| x.cost.is_some()) {
            return Err(Error::parse(
                format!("agents[{i}].actions[{j}].cost"),
                "per-action costs are only allowed with single_dimensional; use typed_costs",
            ));
        }
        agents.push(BayesAgent {
            name: a.name.clone(),
            actions: a.actions.iter().map(|x| x.name.clone()).collect(),
            types: types
                .iter()
                .map(|t| AgentType {
                    name: t.name.clone(),
                    value: t.value,
                })
                .collect(),
        });
    }
    if agents.is_empty() {
        return Err(Error::InvalidInstance(vec![Violation::new(
            "agents",
            "at least one agent is required",
        )]));
    }
    let n = agents.len();
    let space = checked_space(agents.iter().map(|a| a.actions.len()).collect(), "action")?;
    let tspace = checked_space(agents.iter().map(|a| a.types.len()).collect(), "type")?;
    let action_names: Vec<Vec<String>> = agents.iter().map(|a| a.actions.clone()).collect();
    let type_names: Vec<Vec<String>> = agents
        .iter()
        .map(|a| a.types.iter().map(|t| t.name.clone()).collect())
        .collect();
    let type_lookup = |i: usize, s: &str| type_names[i].iter().position(|t| t == s);
    let plabel = |k: usize| format!("profile ({})", names_of(&space, k, &action_names).join(","));
    let tlabel = |l: usize| format!("type profile ({})", names_of(&tspace, l, &type_names).join(","));
    let mut violations = Vec::new();

    let costs: Vec<Vec<Vec<f64>>> = if single {
        if raw.typed_costs.is_some() {
            return Err(Error::parse(
                "typed_costs",
                "single-dimensional instances derive costs from type values",
            ));
        }
        agents
            .iter()
            .zip(&base_costs)
            .map(|(a, b)| {
                a.types
                    .iter()
                    .map(|t| b.iter().map(|&c| t.value * c).collect())
                    .collect()
            })
            .collect()
    } else {
        let typed = raw
            .typed_costs
            .ok_or_else(|| Error::parse("typed_costs", "missing field"))?;
        let mut table: Vec<Vec<Vec<Option<f64>>>> = agents
            .iter()
            .map(|a| vec![vec![None; a.actions.len()]; a.types.len()])
            .collect();
        for (r, c) in typed.iter().enumerate() {
            let at = format!("typed_costs[{r}]");
            let i = agents
                .iter()
                .position(|a| a.name == c.agent)
                .ok_or_else(|| Error::parse(format!("{at}.agent"), format!("unknown agent {:?}", c.agent)))?;
            let t = type_lookup(i, &c.ty)
                .ok_or_else(|| Error::parse(format!("{at}.type"), format!("unknown type {:?}", c.ty)))?;
            let j = action_names[i]
                .iter()
                .position(|x| *x == c.action)
                .ok_or_else(|| Error::parse(format!("{at}.action"), format!("unknown action {:?}", c.action)))?;
            if table[i][t][j].replace(c.cost).is_some() {
                return Err(Error::parse(at, "duplicate cost entry"));
            }
        }
        table
            .into_iter()
            .enumerate()
            .map(|(i, per_type)| {
                per_type
                    .into_iter()
                    .enumerate()
                    .map(|(t, row)| {
                        row.into_iter()
                            .enumerate()
                            .map(|(j, c)| {
                                c.unwrap_or_else(|| {
                                    violations.push(Violation::new(
                                        "typed_costs",
                                        format!(
                                            "no cost for agent {}, type {}, action {}",
                                            agents[i].name, type_names[i][t], action_names[i][j]
                                        ),
                                    ));
                                    0.0
                                })
                            })
                            .collect()
                    })
                    .collect()
            })
            .collect()
    };

    let raw_prior = raw.prior.ok_or_else(|| Error::parse("prior", "missing field"))?;
    let mut prior = vec![0.0; tspace.len()];
    let mut seen = vec![false; tspace.len()];
    for (r, p) in raw_prior.iter().enumerate() {
        let at = format!("prior[{r}].type_profile");
        let l = tspace.index(&resolve(&p.type_profile, n, type_lookup, &at)?);
        if std::mem::replace(&mut seen[l], true) {
            return Err(Error::parse(at, format!("duplicate entry for {}", tlabel(l))));
        }
        prior[l] = p.prob;
    }

    let outcome_model = match (raw.distributions, raw.typed_distributions) {
        (Some(d), None) => {
            let rows = d
                .into_iter()
                .enumerate()
                .map(|(r, d)| {
                    let loc = format!("distributions[{r}].profile");
                    resolve(&d.profile, n, action_lookup(&action_names), &loc)
                        .map(|idx| (idx, d.probs, loc))
                })
                .collect::<Result<Vec<_>>>()?;
            OutcomeModel::TypeIndependent(fill_rows(
                &space,
                rows.into_iter(),
                plabel,
                "distributions",
                &mut violations,
            )?)
        }
        (None, Some(d)) => {
            let mut by_type: Vec<Vec<(Vec<usize>, Vec<f64>, String)>> = vec![Vec::new(); tspace.len()];
            for (r, e) in d.into_iter().enumerate() {
                let tl = format!("typed_distributions[{r}].type_profile");
                let l = tspace.index(&resolve(&e.type_profile, n, type_lookup, &tl)?);
                let loc = format!("typed_distributions[{r}].profile");
                let idx = resolve(&e.profile, n, action_lookup(&action_names), &loc)?;
                by_type[l].push((idx, e.probs, loc));
            }
            let tables = by_type
                .into_iter()
                .enumerate()
                .map(|(l, rows)| {
                    fill_rows(
                        &space,
                        rows.into_iter(),
                        |k| format!("{} under {}", plabel(k), tlabel(l)),
                        "typed_distributions",
                        &mut violations,
                    )
                })
                .collect::<Result<Vec<_>>>()?;
            OutcomeModel::TypeDependent(tables)
        }
        (Some(_), Some(_)) => {
            return Err(Error::parse(
                "typed_distributions",
                "give either distributions or typed_distributions, not both",
            ))
        }
        (None, None) => return Err(Error::parse("distributions", "missing field")),
    };

    let inst = BayesianInstance {
        agents,
        outcomes: raw
            .outcomes
            .iter()
            .map(|o| Outcome {
                name: o.name.clone(),
                reward: o.reward,
            })
            .collect(),
        prior,
        costs,
        base_costs: single.then_some(base_costs),
        outcome_model,
    };
    if violations.is_empty() {
        violations = inst.validate();
    }
    if !violations.is_empty() {
        return Err(Error::InvalidInstance(violations));
    }
    Ok(inst)
}

pub fn serialize_bayesian(inst: &BayesianInstance) -> String {
    let space = inst.profile_space();
    let tspace = inst.type_space();
    let action_names: Vec<Vec<String>> = inst.agents.iter().map(|a| a.actions.clone()).collect();
    let type_names: Vec<Vec<String>> = inst
        .agents
        .iter()
        .map(|a| a.types.iter().map(|t| t.name.clone()).collect())
        .collect();
    let single = inst.single_dimensional();
    let agents = inst
        .agents
        .iter()
        .enumerate()
        .map(|(i, a)| RawAgent {
            name: a.name.clone(),
            actions: a
                .actions
                .iter()
                .enumerate()
                .map(|(j, x)| RawAction {
                    name: x.clone(),
                    cost: inst.base_costs.as_ref().map(|b| b[i][j]),
                })
                .collect(),
            types: Some(
                a.types
                    .iter()
                    .map(|t| RawType {
                        name: t.name.clone(),
                        value: t.value,
                    })
                    .collect(),
            ),
        })
        .collect();
    let typed_costs = (!single).then(|| {
        let mut out = Vec::new();
        for (i, a) in inst.agents.iter().enumerate() {
            for (t, ty) in a.types.iter().enumerate() {
                for (j, x) in a.actions.iter().enumerate() {
                    out.push(RawTypedCost {
                        agent: a.name.clone(),
                        ty: ty.name.clone(),
                        action: x.clone(),
                        cost: inst.costs[i][t][j],
                    });
                }
            }
        }
        out
    });
    let prior = (0..tspace.len())
        .filter(|&l| inst.prior[l] != 0.0)
        .map(|l| RawPrior {
            type_profile: names_of(&tspace, l, &type_names),
            prob: inst.prior[l],
        })
        .collect();
    let (distributions, typed_distributions) = match &inst.outcome_model {
        OutcomeModel::TypeIndependent(f) => (
            Some(
                f.iter()
                    .enumerate()
                    .map(|(k, p)| RawDist {
                        profile: names_of(&space, k, &action_names),
                        probs: p.clone(),
                    })
                    .collect(),
            ),
            None,
        ),
        OutcomeModel::TypeDependent(f) => (
            None,
            Some(
                f.iter()
                    .enumerate()
                    .flat_map(|(l, table)| {
                        let tn = names_of(&tspace, l, &type_names);
                        let action_names = &action_names;
                        let space = &space;
                        table.iter().enumerate().map(move |(k, p)| RawTypedDist {
                            type_profile: tn.clone(),
                            profile: names_of(space, k, action_names),
                            probs: p.clone(),
                        })
                    })
                    .collect(),
            ),
        ),
    };
    let raw = RawDoc {
        agents,
        outcomes: raw_outcomes(&inst.outcomes),
        single_dimensional: Some(single),
        prior: Some(prior),
        distributions,
        typed_distributions,
        typed_costs,
    };
    to_json(&raw)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
enum RawContract {
    Deterministic {
        profile: Vec<String>,
        payments: Vec<Vec<f64>>,
    },
    Randomized {
        mu: Vec<RawMu>,
        pi: Vec<RawPi>,
    },
    BayesDeterministic {
        limited_liability: bool,
        entries: Vec<RawBayesEntry>,
    },
    BayesRandomized {
        blocks: Vec<RawBayesBlock>,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMu {
    profile: Vec<String>,
    prob: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPi {
    agent: String,
    profile: Vec<String>,
    payments: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawBayesEntry {
    type_profile: Vec<String>,
    profile: Vec<String>,
    payments: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawBayesBlock {
    type_profile: Vec<String>,
    mu: Vec<RawMu>,
    pi: Vec<RawPi>,
}

/// Any contract a document can hold.
#[derive(Debug, Clone, PartialEq)]
pub enum Contract {
    Deterministic(DeterministicContract),
    Randomized(RandomizedContract),
    BayesDeterministic(BayesDeterministicContract),
    BayesRandomized(BayesRandomizedContract),
}

impl Contract {
    pub fn kind(&self) -> &'static str {
        match self {
            Contract::Deterministic(_) => "deterministic",
            Contract::Randomized(_) => "randomized",
            Contract::BayesDeterministic(_) => "bayes_deterministic",
            Contract::BayesRandomized(_) => "bayes_randomized",
        }
    }
}

/// Name tables of the instance a contract refers to.
struct Names {
    agents: Vec<String>,
    actions: Vec<Vec<String>>,
    types: Vec<Vec<String>>,
    n_outcomes: usize,
}

impl Names {
    fn of(doc: &Document) -> Self {
        match doc {
            Document::Instance(i) => Self {
                agents: i.agents.iter().map(|a| a.name.clone()).collect(),
                actions: i
                    .agents
                    .iter()
                    .map(|a| a.actions.iter().map(|x| x.name.clone()).collect())
                    .collect(),
                types: Vec::new(),
                n_outcomes: i.n_outcomes(),
            },
            Document::Bayesian(b) => Self {
                agents: b.agents.iter().map(|a| a.name.clone()).collect(),
                actions: b.agents.iter().map(|a| a.actions.clone()).collect(),
                types: b
                    .agents
                    .iter()
                    .map(|a| a.types.iter().map(|t| t.name.clone()).collect())
                    .collect(),
                n_outcomes: b.n_outcomes(),
            },
        }
    }

    fn space(&self) -> ProfileSpace {
        ProfileSpace::new(self.actions.iter().map(Vec::len).collect())
    }

    fn tspace(&self) -> ProfileSpace {
        ProfileSpace::new(self.types.iter().map(Vec::len).collect())
    }

    fn profile(&self, names: &[String], at: &str) -> Result<Vec<usize>> {
        resolve(names, self.agents.len(), action_lookup(&self.actions), at)
    }

    fn type_profile(&self, names: &[String], at: &str) -> Result<usize> {
        let idx = resolve(
            names,
            self.agents.len(),
            |i, s| self.types[i].iter().position(|t| t == s),
            at,
        )?;
        Ok(self.tspace().index(&idx))
    }

    fn agent(&self, name: &str, at: &str) -> Result<usize> {
        self.agents
            .iter()
            .position(|a| a == name)
            .ok_or_else(|| Error::parse(at, format!("unknown agent {name:?}")))
    }

    fn payments(&self, p: Vec<Vec<f64>>, at: &str) -> Result<Vec<Vec<f64>>> {
        if p.len() != self.agents.len() || p.iter().any(|r| r.len() != self.n_outcomes) {
            return Err(Error::parse(
                at,
                format!("expected {} rows of {} payments", self.agents.len(), self.n_outcomes),
            ));
        }
        Ok(p)
    }

    fn outcome_row(&self, p: Vec<f64>, at: &str) -> Result<Vec<f64>> {
        if p.len() != self.n_outcomes {
            return Err(Error::parse(at, format!("expected {} payments", self.n_outcomes)));
        }
        Ok(p)
    }

    fn randomized(&self, mu: Vec<RawMu>, pi: Vec<RawPi>, at: &str) -> Result<(Vec<f64>, Vec<Vec<Vec<f64>>>)> {
        let space = self.space();
        let mut dense_mu = vec![0.0; space.len()];
        let mut seen = vec![false; space.len()];
        for (r, e) in mu.into_iter().enumerate() {
            let loc = format!("{at}mu[{r}].profile");
            let k = space.index(&self.profile(&e.profile, &loc)?);
            if std::mem::replace(&mut seen[k], true) {
                return Err(Error::parse(loc, "duplicate profile"));
            }
            dense_mu[k] = e.prob;
        }
        let mut dense_pi = vec![vec![vec![0.0; self.n_outcomes]; space.len()]; self.agents.len()];
        let mut seen = vec![vec![false; space.len()]; self.agents.len()];
        for (r, e) in pi.into_iter().enumerate() {
            let i = self.agent(&e.agent, &format!("{at}pi[{r}].agent"))?;
            let loc = format!("{at}pi[{r}].profile");
            let k = space.index(&self.profile(&e.profile, &loc)?);
            if std::mem::replace(&mut seen[i][k], true) {
                return Err(Error::parse(loc, "duplicate agent/profile entry"));
            }
            dense_pi[i][k] = self.outcome_row(e.payments, &format!("{at}pi[{r}].payments"))?;
        }
        Ok((dense_mu, dense_pi))
    }

    fn raw_randomized(&self, mu: &[f64], pi: &[Vec<Vec<f64>>]) -> (Vec<RawMu>, Vec<RawPi>) {
        let space = self.space();
        let raw_mu = (0..space.len())
            .filter(|&k| mu[k] != 0.0)
            .map(|k| RawMu {
                profile: names_of(&space, k, &self.actions),
                prob: mu[k],
            })
            .collect();
        let mut raw_pi = Vec::new();
        for (i, per_profile) in pi.iter().enumerate() {
            for (k, row) in per_profile.iter().enumerate() {
                if row.iter().any(|&x| x != 0.0) {
                    raw_pi.push(RawPi {
                        agent: self.agents[i].clone(),
                        profile: names_of(&space, k, &self.actions),
                        payments: row.clone(),
                    });
                }
            }
        }
        (raw_mu, raw_pi)
    }
}

/// Parses a contract against the instance it refers to. Shape is checked
/// here; incentive properties are left to the verifiers.
pub fn parse_contract(text: &str, doc: &Document) -> Result<Contract> {
    let raw: RawContract = serde_json::from_str(text).map_err(json_error)?;
    let names = Names::of(doc);
    let is_bayes = matches!(doc, Document::Bayesian(_));
    let contract = match raw {
        RawContract::Deterministic { profile, payments } if !is_bayes => {
            Contract::Deterministic(DeterministicContract {
                profile: ActionProfile(names.profile(&profile, "profile")?),
                payments: names.payments(payments, "payments")?,
            })
        }
        RawContract::Randomized { mu, pi } if !is_bayes => {
            let (mu, pi) = names.randomized(mu, pi, "")?;
            Contract::Randomized(RandomizedContract { mu, pi })
        }
        RawContract::BayesDeterministic {
            limited_liability,
            entries,
        } if is_bayes => {
            let tspace = names.tspace();
            let mut dense: Vec<Option<BayesDetEntry>> = vec![None; tspace.len()];
            for (r, e) in entries.into_iter().enumerate() {
                let at = format!("entries[{r}]");
                let l = names.type_profile(&e.type_profile, &format!("{at}.type_profile"))?;
                let entry = BayesDetEntry {
                    profile: ActionProfile(names.profile(&e.profile, &format!("{at}.profile"))?),
                    payments: names.payments(e.payments, &format!("{at}.payments"))?,
                };
                if dense[l].replace(entry).is_some() {
                    return Err(Error::parse(at, "duplicate type profile"));
                }
            }
            let entries = dense
                .into_iter()
                .enumerate()
                .map(|(l, e)| {
                    e.ok_or_else(|| {
                        Error::parse(
                            "entries",
                            format!("no entry for type profile ({})", names_of(&tspace, l, &names.types).join(",")),
                        )
                    })
                })
                .collect::<Result<_>>()?;
            Contract::BayesDeterministic(BayesDeterministicContract {
                limited_liability,
                entries,
            })
        }
        RawContract::BayesRandomized { blocks } if is_bayes => {
            let tspace = names.tspace();
            let mut mu = vec![None; tspace.len()];
            let mut pi = vec![None; tspace.len()];
            for (r, b) in blocks.into_iter().enumerate() {
                let at = format!("blocks[{r}].");
                let l = names.type_profile(&b.type_profile, &format!("{at}type_profile"))?;
                let (m, p) = names.randomized(b.mu, b.pi, &at)?;
                if mu[l].replace(m).is_some() {
                    return Err(Error::parse(at, "duplicate type profile"));
                }
                pi[l] = Some(p);
            }
            if let Some(l) = mu.iter().position(Option::is_none) {
                return Err(Error::parse(
                    "blocks",
                    format!("no block for type profile ({})", names_of(&tspace, l, &names.types).join(",")),
                ));
            }
            Contract::BayesRandomized(BayesRandomizedContract {
                mu: mu.into_iter().map(Option::unwrap).collect(),
                pi: pi.into_iter().map(Option::unwrap).collect(),
            })
        }
        other => {
            let kind = match other {
                RawContract::Deterministic { .. } => "deterministic",
                RawContract::Randomized { .. } => "randomized",
                RawContract::BayesDeterministic { .. } => "bayes_deterministic",
                RawContract::BayesRandomized { .. } => "bayes_randomized",
            };
            return Err(Error::parse(
                "kind",
                format!("a {kind} contract does not fit a {} document", doc.kind()),
            ));
        }
    };
    Ok(contract)
}

pub fn serialize_contract(contract: &Contract, doc: &Document) -> String {
    let names = Names::of(doc);
    let space = names.space();
    let raw = match contract {
        Contract::Deterministic(c) => RawContract::Deterministic {
            profile: names_of(&space, space.index(&c.profile.0), &names.actions),
            payments: c.payments.clone(),
        },
        Contract::Randomized(c) => {
            let (mu, pi) = names.raw_randomized(&c.mu, &c.pi);
            RawContract::Randomized { mu, pi }
        }
        Contract::BayesDeterministic(c) => {
            let tspace = names.tspace();
            RawContract::BayesDeterministic {
                limited_liability: c.limited_liability,
                entries: c
                    .entries
                    .iter()
                    .enumerate()
                    .map(|(l, e)| RawBayesEntry {
                        type_profile: names_of(&tspace, l, &names.types),
                        profile: names_of(&space, space.index(&e.profile.0), &names.actions),
                        payments: e.payments.clone(),
                    })
                    .collect(),
            }
        }
        Contract::BayesRandomized(c) => {
            let tspace = names.tspace();
            RawContract::BayesRandomized {
                blocks: (0..tspace.len())
                    .map(|l| {
                        let (mu, pi) = names.raw_randomized(&c.mu[l], &c.pi[l]);
                        RawBayesBlock {
                            type_profile: names_of(&tspace, l, &names.types),
                            mu,
                            pi,
                        }
                    })
                    .collect(),
            }
        }
    };
    to_json(&raw)
}
