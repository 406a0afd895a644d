//! Command-line front end.
//!
//! Every subcommand loads a document, calls one library routine and reports
//! its numbers unchanged. The report is a JSON tree; the human rendering
//! prints the same tree with the same number formatting.

use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Map, Value};
use sha2::{Digest, Sha256};

use crate::bayes::{
    self, AuditOptions, BayesAudit, BayesDeterministicContract, BayesRandomizedContract,
    BayesSlack, BayesianInstance, SlackKind, SlackSummary, DEFAULT_ENUMERATION_CAP,
};
use crate::detsolve::{self, deviation_slacks, equilibrium_set};
use crate::error::{Error, Result};
use crate::format::{self, Contract, Document};
use crate::generators::{self, RandomBayesSpec, RandomSpec};
use crate::model::{ActionProfile, DeterministicContract, Instance, ProfileSpace};
use crate::randsolve::{self, RandAudit, RandLpConfig};
use crate::reduction;
use crate::IC_TOL;

#[derive(Debug, Parser)]
#[command(name = "contract-design", version, about = "Optimal and approximate contracts for hidden-action multi-agent problems")]
pub struct Cli {
    /// Report rendering.
    #[arg(long, value_enum, default_value_t = OutputFormat::Human, global = true)]
    pub format: OutputFormat,
    /// Include every incentive slack in the report.
    #[arg(long, global = true)]
    pub audit: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OutputFormat {
    Human,
    Structured,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Optimal deterministic contract.
    SolveDet {
        file: PathBuf,
        /// Write the contract document here.
        #[arg(long)]
        save_contract: Option<PathBuf>,
    },
    /// Single-agent contract with costs scaled by alpha.
    #[command(allow_negative_numbers = true)]
    SolveSingle {
        file: PathBuf,
        #[arg(long)]
        alpha: f64,
    },
    /// Randomized contract through the capped relaxation.
    #[command(allow_negative_numbers = true)]
    SolveRand {
        file: PathBuf,
        /// Payment cap; defaults to 1e6 times the largest reward.
        #[arg(long = "M", conflicts_with = "sweep")]
        m: Option<f64>,
        /// Comma-separated caps to solve in turn.
        #[arg(long, value_delimiter = ',')]
        sweep: Option<Vec<f64>>,
        #[arg(long)]
        save_contract: Option<PathBuf>,
    },
    /// Linear contract paying r/(1+delta), split equally.
    #[command(allow_negative_numbers = true)]
    Linear {
        file: PathBuf,
        #[arg(long)]
        delta: f64,
        #[arg(long)]
        save_contract: Option<PathBuf>,
    },
    /// Randomized Bayesian contract through the capped relaxation.
    #[command(allow_negative_numbers = true)]
    SolveBayes {
        file: PathBuf,
        #[arg(long = "M")]
        m: Option<f64>,
        #[arg(long)]
        save_contract: Option<PathBuf>,
    },
    /// Affine DSIC contract for a Bayesian instance.
    #[command(allow_negative_numbers = true)]
    Affine {
        file: PathBuf,
        #[arg(long)]
        delta: f64,
        #[arg(long)]
        save_contract: Option<PathBuf>,
    },
    /// Best deterministic DSIC contract by exhaustive search.
    BruteBayes {
        file: PathBuf,
        /// Allow negative payments and require interim IR instead.
        #[arg(long)]
        no_ll: bool,
        /// Largest number of type-to-profile assignments to enumerate.
        #[arg(long, default_value_t = DEFAULT_ENUMERATION_CAP)]
        cap: u128,
        #[arg(long)]
        save_contract: Option<PathBuf>,
    },
    /// Virtual welfare at the given scales.
    #[command(allow_negative_numbers = true)]
    Analyze {
        file: PathBuf,
        #[arg(long, value_delimiter = ',', required = true)]
        scales: Vec<f64>,
    },
    /// Write a fixture or random instance, or a fixture contract.
    #[command(allow_negative_numbers = true)]
    Gen(GenArgs),
    /// Audit a contract document against an instance.
    Verify {
        file: PathBuf,
        #[arg(long)]
        contract: PathBuf,
        /// Do not require nonnegative payments.
        #[arg(long)]
        no_ll: bool,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum GenKind {
    Gap,
    NoSupremum,
    Tightness,
    BayesGap,
    BayesTightness,
    Random,
    RandomBayes,
    GapContract,
    NoSupremumContract,
    BayesTightnessContract,
}

#[derive(Debug, Args)]
pub struct GenArgs {
    #[arg(value_enum)]
    pub kind: GenKind,
    /// Output file; standard output when absent.
    #[arg(short, long)]
    pub output: Option<PathBuf>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub eps: Option<f64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 2)]
    pub agents: usize,
    #[arg(long, default_value_t = 2)]
    pub actions: usize,
    #[arg(long, default_value_t = 2)]
    pub outcomes: usize,
    #[arg(long, default_value_t = 2)]
    pub types: usize,
    #[arg(long, default_value_t = 0.5)]
    pub cost_scale: f64,
    /// Draw a separate outcome table per type profile.
    #[arg(long)]
    pub type_dependent: bool,
}

/// Result of one invocation.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Parse { .. }
        | Error::InvalidInstance(_)
        | Error::Unsupported(_)
        | Error::Precondition(_) => 1,
        Error::Parameter(_) | Error::EnumerationCap { .. } => 2,
        Error::Internal(_) | Error::Lp(_) => 3,
    }
}

/// Runs the command line `argv` (program name first).
pub fn run<I, T>(argv: I) -> RunOutput
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let argv: Vec<std::ffi::OsString> = argv.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(c) => c,
        Err(e) => {
            let text = e.render().to_string();
            return if e.use_stderr() {
                RunOutput {
                    code: 2,
                    stdout: String::new(),
                    stderr: text,
                }
            } else {
                RunOutput {
                    code: 0,
                    stdout: text,
                    stderr: String::new(),
                }
            };
        }
    };
    let echo: Vec<String> = argv
        .iter()
        .skip(1)
        .map(|s| s.to_string_lossy().into_owned())
        .collect();
    let start = Instant::now();
    match execute(&cli) {
        Ok((digest, results, ok)) => {
            let report = json!({
                "command": echo.join(" "),
                "instance_digest": digest,
                "results": results,
                "elapsed_ms": start.elapsed().as_secs_f64() * 1e3,
            });
            let stdout = match cli.format {
                OutputFormat::Structured => {
                    let mut s = serde_json::to_string_pretty(&report).expect("report serializes");
                    s.push('\n');
                    s
                }
                OutputFormat::Human => render_human(&report),
            };
            RunOutput {
                code: if ok { 0 } else { 1 },
                stdout,
                stderr: String::new(),
            }
        }
        Err(e) => RunOutput {
            code: exit_code(&e),
            stdout: String::new(),
            stderr: format!("error: {e}\n"),
        },
    }
}

/// A finite float as a JSON number, anything else as a string.
fn num(x: f64) -> Value {
    serde_json::Number::from_f64(x).map_or_else(|| Value::String(x.to_string()), Value::Number)
}

fn nums(xs: &[f64]) -> Value {
    Value::Array(xs.iter().map(|&x| num(x)).collect())
}

fn read_file(path: &Path) -> Result<String> {
    std::fs::read_to_string(path)
        .map_err(|e| Error::Parameter(format!("cannot read {}: {e}", path.display())))
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text)
        .map_err(|e| Error::Parameter(format!("cannot write {}: {e}", path.display())))
}

fn digest(text: &str) -> String {
    format!("sha256:{}", hex::encode(Sha256::digest(text.as_bytes())))
}

fn load(path: &Path) -> Result<(Document, String)> {
    let text = read_file(path)?;
    Ok((format::parse_document(&text)?, digest(&text)))
}

fn plain(doc: &Document) -> Result<&Instance> {
    match doc {
        Document::Instance(i) => Ok(i),
        Document::Bayesian(_) => Err(Error::Unsupported(
            "this command needs an instance without types".into(),
        )),
    }
}

fn typed(doc: &Document) -> Result<&BayesianInstance> {
    match doc {
        Document::Bayesian(b) => Ok(b),
        Document::Instance(_) => Err(Error::Unsupported(
            "this command needs a Bayesian instance with types and a prior".into(),
        )),
    }
}

fn save(path: &Option<PathBuf>, contract: Contract, doc: &Document, out: &mut Map<String, Value>) -> Result<()> {
    if let Some(p) = path {
        write_file(p, &format::serialize_contract(&contract, doc))?;
        out.insert("contract_file".into(), json!(p.display().to_string()));
    }
    Ok(())
}

/// Name tables for labelling profiles in reports.
struct Labels {
    agents: Vec<String>,
    actions: Vec<Vec<String>>,
    types: Vec<Vec<String>>,
}

impl Labels {
    fn of_instance(inst: &Instance) -> Self {
        Self {
            agents: inst.agents.iter().map(|a| a.name.clone()).collect(),
            actions: inst
                .agents
                .iter()
                .map(|a| a.actions.iter().map(|x| x.name.clone()).collect())
                .collect(),
            types: Vec::new(),
        }
    }

    fn of_bayes(inst: &BayesianInstance) -> Self {
        Self {
            agents: inst.agents.iter().map(|a| a.name.clone()).collect(),
            actions: inst.agents.iter().map(|a| a.actions.clone()).collect(),
            types: inst
                .agents
                .iter()
                .map(|a| a.types.iter().map(|t| t.name.clone()).collect())
                .collect(),
        }
    }

    fn profile(&self, p: &ActionProfile) -> String {
        let names: Vec<&str> = p.0.iter().enumerate().map(|(i, &a)| self.actions[i][a].as_str()).collect();
        format!("({})", names.join(","))
    }

    fn type_profile(&self, tspace: &ProfileSpace, l: usize) -> String {
        let names: Vec<&str> = (0..tspace.dims())
            .map(|i| self.types[i][tspace.component(l, i)].as_str())
            .collect();
        format!("({})", names.join(","))
    }

    fn payments(&self, payments: &[Vec<f64>]) -> Value {
        Value::Object(
            payments
                .iter()
                .enumerate()
                .map(|(i, p)| (self.agents[i].clone(), nums(p)))
                .collect(),
        )
    }

    fn deterministic(&self, c: &DeterministicContract) -> Value {
        json!({ "profile": self.profile(&c.profile), "payments": self.payments(&c.payments) })
    }

    fn randomized(&self, space: &ProfileSpace, mu: &[f64], pi: &[Vec<Vec<f64>>]) -> Value {
        let support: Vec<Value> = (0..space.len())
            .filter(|&k| mu[k] != 0.0)
            .map(|k| {
                json!({
                    "profile": self.profile(&space.profile(k)),
                    "prob": num(mu[k]),
                    "payments": self.payments(&pi.iter().map(|p| p[k].clone()).collect::<Vec<_>>()),
                })
            })
            .collect();
        json!({ "support": support })
    }

    fn bayes_deterministic(&self, tspace: &ProfileSpace, c: &BayesDeterministicContract) -> Value {
        let entries: Vec<Value> = c
            .entries
            .iter()
            .enumerate()
            .map(|(l, e)| {
                json!({
                    "type_profile": self.type_profile(tspace, l),
                    "profile": self.profile(&e.profile),
                    "payments": self.payments(&e.payments),
                })
            })
            .collect();
        json!({ "limited_liability": c.limited_liability, "entries": entries })
    }

    fn bayes_randomized(&self, tspace: &ProfileSpace, space: &ProfileSpace, c: &BayesRandomizedContract) -> Value {
        let blocks: Vec<Value> = (0..tspace.len())
            .map(|l| {
                let mut b = self.randomized(space, &c.mu[l], &c.pi[l]);
                b["type_profile"] = json!(self.type_profile(tspace, l));
                b
            })
            .collect();
        Value::Array(blocks)
    }

    fn rand_audit(&self, a: &RandAudit, full: bool) -> Value {
        let mut v = json!({ "value": num(a.value), "min_slack": num(a.min_slack), "ic_ok": a.ic_ok });
        if full {
            v["slacks"] = Value::Array(
                a.slacks
                    .iter()
                    .map(|s| {
                        json!({
                            "agent": self.agents[s.agent],
                            "action": self.actions[s.agent][s.action],
                            "deviation": self.actions[s.agent][s.deviation],
                            "slack": num(s.slack),
                        })
                    })
                    .collect(),
            );
        }
        v
    }

    fn bayes_slack(&self, tspace: &ProfileSpace, s: &BayesSlack) -> Value {
        let mut v = json!({
            "kind": match s.kind { SlackKind::Dsic => "dsic", SlackKind::Ir => "ir" },
            "agent": self.agents[s.agent],
            "type_profile": self.type_profile(tspace, s.type_profile),
            "slack": num(s.slack),
        });
        if let Some(r) = s.report {
            v["report"] = json!(self.types[s.agent][r]);
        }
        if let Some(d) = s.deviation {
            v["deviation"] = json!(self.actions[s.agent][d]);
        }
        v
    }

    fn summary(&self, tspace: &ProfileSpace, s: &SlackSummary) -> Value {
        json!({
            "rows": s.rows,
            "min_slack": num(s.min_slack),
            "violations": s.violations,
            "argmin": s.argmin.as_ref().map_or(Value::Null, |a| self.bayes_slack(tspace, a)),
        })
    }

    fn bayes_audit(&self, tspace: &ProfileSpace, a: &BayesAudit) -> Value {
        let mut v = json!({
            "value": num(a.value),
            "dsic": self.summary(tspace, &a.dsic),
            "dsic_ok": a.dsic_ok,
            "ll_violations": a.ll_violations,
            "min_payment": num(a.min_payment),
            "ll_ok": a.ll_ok,
            "passes": a.passes,
        });
        if let Some(ir) = &a.ir {
            v["ir"] = self.summary(tspace, ir);
            v["ir_ok"] = json!(a.ir_ok);
        }
        if !a.slacks.is_empty() {
            v["slacks"] = Value::Array(a.slacks.iter().map(|s| self.bayes_slack(tspace, s)).collect());
        }
        v
    }

    fn det_slacks(&self, inst: &Instance, c: &DeterministicContract) -> Result<Value> {
        let rows = deviation_slacks(inst, &c.profile, &c.payments)?;
        Ok(Value::Array(
            rows.iter()
                .map(|s| {
                    json!({
                        "agent": self.agents[s.agent],
                        "deviation": self.actions[s.agent][s.deviation],
                        "slack": num(s.slack),
                    })
                })
                .collect(),
        ))
    }
}

fn audit_opts(require_ll: bool, full: bool) -> AuditOptions {
    AuditOptions {
        collect_slacks: full,
        ..AuditOptions::new(require_ll)
    }
}

fn rand_config(inst_max_reward: f64, m: Option<f64>) -> Result<RandLpConfig> {
    let cfg = m.map_or_else(|| RandLpConfig::default_for(inst_max_reward), RandLpConfig::new);
    cfg.check()?;
    Ok(cfg)
}

/// Returns `(digest, results, success)`.
fn execute(cli: &Cli) -> Result<(String, Value, bool)> {
    let full = cli.audit;
    let mut out = Map::new();
    let mut ok = true;
    let digest = match &cli.command {
        Command::SolveDet { file, save_contract } => {
            let (doc, d) = load(file)?;
            let inst = plain(&doc)?;
            let labels = Labels::of_instance(inst);
            let s = detsolve::solve_deterministic(inst)?;
            out.insert("opt_d".into(), num(s.value));
            out.insert("contract".into(), labels.deterministic(&s.contract));
            out.insert(
                "is_equilibrium".into(),
                json!(equilibrium_set(inst, &s.contract.payments)?.contains(&s.contract.profile)),
            );
            if full {
                out.insert("slacks".into(), labels.det_slacks(inst, &s.contract)?);
            }
            save(save_contract, Contract::Deterministic(s.contract), &doc, &mut out)?;
            d
        }
        Command::SolveSingle { file, alpha } => {
            let (doc, d) = load(file)?;
            let inst = plain(&doc)?;
            let labels = Labels::of_instance(inst);
            let s = detsolve::solve_single_agent(inst, *alpha)?;
            out.insert("alpha".into(), num(*alpha));
            out.insert("opt_s".into(), num(s.value));
            out.insert("profile".into(), json!(labels.profile(&s.profile)));
            out.insert("payment".into(), nums(&s.payment));
            d
        }
        Command::SolveRand {
            file,
            m,
            sweep,
            save_contract,
        } => {
            let (doc, d) = load(file)?;
            let inst = plain(&doc)?;
            let labels = Labels::of_instance(inst);
            let space = inst.profile_space();
            let base = rand_config(inst.max_reward(), *m)?;
            match sweep {
                Some(caps) => {
                    if caps.is_empty() {
                        return Err(Error::Parameter("--sweep needs at least one cap".into()));
                    }
                    for &c in caps {
                        RandLpConfig { m: c, ..base }.check()?;
                    }
                    let reports = randsolve::sweep_randomized(inst, caps, &base)?;
                    let nondecreasing = reports.windows(2).all(|w| w[1].lp_value >= w[0].lp_value - IC_TOL);
                    out.insert(
                        "sweep".into(),
                        Value::Array(
                            reports
                                .iter()
                                .map(|r| {
                                    json!({
                                        "m": num(r.m),
                                        "lp_value": num(r.lp_value),
                                        "value_recomputed": num(r.value_recomputed),
                                        "min_slack": num(r.audit.min_slack),
                                        "ic_ok": r.audit.ic_ok,
                                    })
                                })
                                .collect(),
                        ),
                    );
                    out.insert("nondecreasing".into(), json!(nondecreasing));
                    out.insert("det_baseline".into(), num(reports[0].det_baseline));
                    if let Some(last) = reports.last() {
                        save(save_contract, Contract::Randomized(last.contract.clone()), &doc, &mut out)?;
                    }
                }
                None => {
                    let r = randsolve::solve_randomized(inst, &base)?;
                    out.insert("m".into(), num(r.m));
                    out.insert("lp_value".into(), num(r.lp_value));
                    out.insert("value_recomputed".into(), num(r.value_recomputed));
                    out.insert("det_baseline".into(), num(r.det_baseline));
                    out.insert("det_max_payment".into(), num(r.det_max_payment));
                    out.insert("contract".into(), labels.randomized(&space, &r.contract.mu, &r.contract.pi));
                    out.insert("audit".into(), labels.rand_audit(&r.audit, full));
                    save(save_contract, Contract::Randomized(r.contract), &doc, &mut out)?;
                }
            }
            d
        }
        Command::Linear {
            file,
            delta,
            save_contract,
        } => {
            let (doc, d) = load(file)?;
            let inst = plain(&doc)?;
            let labels = Labels::of_instance(inst);
            let lc = reduction::linear_contract(inst, *delta)?;
            out.insert("delta".into(), num(lc.delta));
            out.insert("value".into(), num(lc.value));
            out.insert("guarantee".into(), num(lc.guarantee));
            out.insert("payment".into(), nums(&lc.payment));
            out.insert("contract".into(), labels.deterministic(&lc.contract));
            if full {
                out.insert("slacks".into(), labels.det_slacks(inst, &lc.contract)?);
            }
            save(save_contract, Contract::Deterministic(lc.contract), &doc, &mut out)?;
            d
        }
        Command::SolveBayes {
            file,
            m,
            save_contract,
        } => {
            let (doc, d) = load(file)?;
            let inst = typed(&doc)?;
            let labels = Labels::of_bayes(inst);
            let cfg = rand_config(inst.max_reward(), *m)?;
            let r = bayes::solve_bayesian_randomized(inst, &cfg)?;
            let (tspace, space) = (inst.type_space(), inst.profile_space());
            out.insert("m".into(), num(r.m));
            out.insert("lp_value".into(), num(r.lp_value));
            out.insert("value_recomputed".into(), num(r.value_recomputed));
            let audit = if full {
                bayes::verify_bayes_randomized(inst, &r.contract, &audit_opts(true, true))?
            } else {
                r.audit.clone()
            };
            out.insert("audit".into(), labels.bayes_audit(&tspace, &audit));
            out.insert("contract".into(), labels.bayes_randomized(&tspace, &space, &r.contract));
            save(save_contract, Contract::BayesRandomized(r.contract), &doc, &mut out)?;
            d
        }
        Command::Affine {
            file,
            delta,
            save_contract,
        } => {
            let (doc, d) = load(file)?;
            let inst = typed(&doc)?;
            let labels = Labels::of_bayes(inst);
            let tspace = inst.type_space();
            let c = bayes::affine_contract(inst, *delta)?;
            let audit = bayes::verify_bayes_deterministic(inst, &c, &audit_opts(false, full))?;
            let scale = inst.n_agents() as f64 * (1.0 + delta);
            let w = bayes::bayes_welfare(inst, &[scale])?;
            out.insert("delta".into(), num(*delta));
            out.insert("value".into(), num(audit.value));
            out.insert("guarantee".into(), num(delta / (1.0 + delta) * w.expected[0]));
            out.insert("audit".into(), labels.bayes_audit(&tspace, &audit));
            out.insert("contract".into(), labels.bayes_deterministic(&tspace, &c));
            save(save_contract, Contract::BayesDeterministic(c), &doc, &mut out)?;
            d
        }
        Command::BruteBayes {
            file,
            no_ll,
            cap,
            save_contract,
        } => {
            let (doc, d) = load(file)?;
            let inst = typed(&doc)?;
            let labels = Labels::of_bayes(inst);
            let tspace = inst.type_space();
            let r = bayes::brute_force_bayes_deterministic(inst, !no_ll, *cap)?;
            out.insert("limited_liability".into(), json!(!no_ll));
            out.insert("value".into(), num(r.value));
            out.insert("assignments".into(), json!(r.assignments.to_string()));
            out.insert("feasible".into(), json!(r.feasible));
            if full {
                let audit = bayes::verify_bayes_deterministic(inst, &r.contract, &audit_opts(!no_ll, true))?;
                out.insert("audit".into(), labels.bayes_audit(&tspace, &audit));
            }
            out.insert("contract".into(), labels.bayes_deterministic(&tspace, &r.contract));
            save(save_contract, Contract::BayesDeterministic(r.contract), &doc, &mut out)?;
            d
        }
        Command::Analyze { file, scales } => {
            let (doc, d) = load(file)?;
            match &doc {
                Document::Instance(inst) => {
                    let labels = Labels::of_instance(inst);
                    let w = reduction::welfare_report(inst, scales)?;
                    out.insert("scales".into(), nums(&w.scales));
                    out.insert("vsw".into(), nums(&w.vsw));
                    out.insert(
                        "argmax".into(),
                        Value::Array(w.argmax.iter().map(|p| json!(labels.profile(p))).collect()),
                    );
                    out.insert("sw".into(), num(w.sw));
                    out.insert("sw_argmax".into(), json!(labels.profile(&w.sw_argmax)));
                    out.insert("beta".into(), num(w.beta));
                    out.insert("welfare_lower_bounds".into(), nums(&w.welfare_lower_bounds()));
                    out.insert("max_actions".into(), json!(w.max_actions));
                }
                Document::Bayesian(inst) => {
                    let labels = Labels::of_bayes(inst);
                    let tspace = inst.type_space();
                    let space = inst.profile_space();
                    let w = bayes::bayes_welfare(inst, scales)?;
                    out.insert("scales".into(), nums(&w.scales));
                    out.insert("expected_vsw".into(), nums(&w.expected));
                    out.insert("expected_sw".into(), num(w.sw));
                    out.insert(
                        "per_type".into(),
                        Value::Array(
                            w.per_type
                                .iter()
                                .map(|t| {
                                    json!({
                                        "type_profile": labels.type_profile(&tspace, t.type_profile),
                                        "prob": num(t.prob),
                                        "vsw": nums(&t.vsw),
                                        "argmax": t.argmax.iter().map(|&k| labels.profile(&space.profile(k))).collect::<Vec<_>>(),
                                    })
                                })
                                .collect(),
                        ),
                    );
                }
            }
            d
        }
        Command::Gen(args) => {
            let text = generate(args)?;
            if let Some(p) = &args.output {
                write_file(p, &text)?;
                out.insert("written".into(), json!(p.display().to_string()));
            }
            out.insert(
                "kind".into(),
                json!(args.kind.to_possible_value().expect("no skipped variants").get_name()),
            );
            let d = digest(&text);
            if args.output.is_none() {
                // The document itself is the output.
                return Ok((d, Value::String(text), true));
            }
            d
        }
        Command::Verify { file, contract, no_ll } => {
            let (doc, d) = load(file)?;
            let c = format::parse_contract(&read_file(contract)?, &doc)?;
            out.insert("kind".into(), json!(c.kind()));
            match (&doc, &c) {
                (Document::Instance(inst), Contract::Deterministic(c)) => {
                    let labels = Labels::of_instance(inst);
                    c.check_shape(inst)?;
                    let is_eq = equilibrium_set(inst, &c.payments)?.contains(&c.profile);
                    let ll = c.payments.iter().flatten().all(|&p| p >= -IC_TOL);
                    let min_slack = deviation_slacks(inst, &c.profile, &c.payments)?
                        .iter()
                        .map(|s| s.slack)
                        .fold(f64::INFINITY, f64::min);
                    out.insert("value".into(), num(c.principal_value(inst)));
                    out.insert("min_slack".into(), num(min_slack));
                    out.insert("ic_ok".into(), json!(is_eq));
                    out.insert("ll_ok".into(), json!(ll));
                    if full {
                        out.insert("slacks".into(), labels.det_slacks(inst, c)?);
                    }
                    ok = is_eq && (ll || *no_ll);
                }
                (Document::Instance(inst), Contract::Randomized(c)) => {
                    let labels = Labels::of_instance(inst);
                    let a = randsolve::verify_randomized(inst, c, IC_TOL)?;
                    let ll = c.pi.iter().flatten().flatten().all(|&p| p >= -IC_TOL);
                    out.insert("audit".into(), labels.rand_audit(&a, full));
                    out.insert("ll_ok".into(), json!(ll));
                    ok = a.ic_ok && (ll || *no_ll);
                }
                (Document::Bayesian(inst), Contract::BayesDeterministic(c)) => {
                    let labels = Labels::of_bayes(inst);
                    let a = bayes::verify_bayes_deterministic(inst, c, &audit_opts(!no_ll, full))?;
                    out.insert("audit".into(), labels.bayes_audit(&inst.type_space(), &a));
                    ok = a.passes;
                }
                (Document::Bayesian(inst), Contract::BayesRandomized(c)) => {
                    let labels = Labels::of_bayes(inst);
                    let a = bayes::verify_bayes_randomized(inst, c, &audit_opts(!no_ll, full))?;
                    out.insert("audit".into(), labels.bayes_audit(&inst.type_space(), &a));
                    ok = a.passes;
                }
                _ => unreachable!("parse_contract matches contract and document kinds"),
            }
            out.insert("passes".into(), json!(ok));
            d
        }
    };
    Ok((digest, Value::Object(out), ok))
}

fn generate(args: &GenArgs) -> Result<String> {
    use format::{serialize_bayesian, serialize_contract, serialize_instance};
    let alpha = |default: f64| args.alpha.unwrap_or(default);
    let eps = |default: f64| args.eps.unwrap_or(default);
    let random = || RandomSpec {
        seed: args.seed,
        agents: args.agents,
        actions: args.actions,
        outcomes: args.outcomes,
        cost_scale: args.cost_scale,
    };
    Ok(match args.kind {
        GenKind::Gap => serialize_instance(&generators::gap()),
        GenKind::NoSupremum => serialize_instance(&generators::no_supremum()),
        GenKind::Tightness => serialize_instance(&generators::tightness(alpha(1.0), eps(0.5))?),
        GenKind::BayesGap => serialize_bayesian(&generators::bayes_gap(alpha(0.5))?),
        GenKind::BayesTightness => {
            serialize_bayesian(&generators::bayes_tightness(alpha(1.0), eps(0.5))?)
        }
        GenKind::Random => serialize_instance(&generators::random_instance(&random())?),
        GenKind::RandomBayes => serialize_bayesian(&generators::random_bayesian(&RandomBayesSpec {
            seed: args.seed,
            agents: args.agents,
            actions: args.actions,
            outcomes: args.outcomes,
            types: args.types,
            cost_scale: args.cost_scale,
            type_independent: !args.type_dependent,
        })?),
        GenKind::GapContract => serialize_contract(
            &Contract::Randomized(generators::gap_contract()),
            &Document::Instance(generators::gap()),
        ),
        GenKind::NoSupremumContract => serialize_contract(
            &Contract::Randomized(generators::no_supremum_contract(eps(0.05))?),
            &Document::Instance(generators::no_supremum()),
        ),
        GenKind::BayesTightnessContract => {
            let inst = generators::bayes_tightness(alpha(1.0), eps(0.5))?;
            let witness = generators::bayes_tightness_witness(&inst);
            serialize_contract(&Contract::BayesDeterministic(witness), &Document::Bayesian(inst))
        }
    })
}

fn scalar(v: &Value) -> Option<String> {
    match v {
        Value::Null => Some("-".into()),
        Value::Bool(b) => Some(b.to_string()),
        Value::Number(n) => Some(n.to_string()),
        Value::String(s) => Some(s.clone()),
        Value::Array(a) if a.iter().all(|x| !x.is_array() && !x.is_object()) => Some(format!(
            "[{}]",
            a.iter().map(|x| scalar(x).unwrap_or_default()).collect::<Vec<_>>().join(", ")
        )),
        _ => None,
    }
}

fn render_into(v: &Value, indent: usize, out: &mut String) {
    let pad = " ".repeat(indent);
    match v {
        Value::Object(map) => {
            for (k, x) in map {
                match scalar(x) {
                    Some(s) if !s.contains('\n') => out.push_str(&format!("{pad}{k}: {s}\n")),
                    Some(s) => {
                        out.push_str(&format!("{pad}{k}:\n"));
                        for line in s.lines() {
                            out.push_str(&format!("{pad}  {line}\n"));
                        }
                    }
                    None => {
                        out.push_str(&format!("{pad}{k}:\n"));
                        render_into(x, indent + 2, out);
                    }
                }
            }
        }
        Value::Array(items) => {
            for x in items {
                match scalar(x) {
                    Some(s) => out.push_str(&format!("{pad}- {s}\n")),
                    None => {
                        let mut inner = String::new();
                        render_into(x, indent + 2, &mut inner);
                        let trimmed = inner.trim_start_matches(' ');
                        out.push_str(&format!("{pad}- {trimmed}"));
                    }
                }
            }
        }
        other => out.push_str(&format!("{pad}{}\n", scalar(other).unwrap_or_default())),
    }
}

/// Indented `key: value` text with numbers printed exactly as in the JSON form.
pub fn render_human(report: &Value) -> String {
    if let Some(Value::String(doc)) = report.get("results") {
        return doc.clone();
    }
    let mut out = String::new();
    render_into(report, 0, &mut out);
    out
}
