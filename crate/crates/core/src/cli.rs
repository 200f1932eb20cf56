//! The `btg` command line.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::env::{CheckMode, TraceOutcome};
use crate::error::{Error, Result};
use crate::grounding::{
    cabto_ground, compute_metrics, naive_report, CabtoConfig, CanonicalIter, Metrics, ModelSpace, NaiveConfig,
    RunSummary, DEFAULT_NAIVE_CAP,
};
use crate::io::{parse_bt, render_bt, render_dot, DomainFile, ResultsFile, RunConfig, Workspace};
use crate::planner::{bt_expansion, default_tick_budget, PlanResult, PlannerConfig};
use crate::proposers::{ExternalTarget, ProposerSet, DEFAULT_TIMEOUT};
use crate::symbolic::{is_valid_model, ActionModel, DomainUniverse, ValidityRules};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INCOMPLETE: i32 = 1;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_RESOURCE: i32 = 3;

#[derive(Parser, Debug)]
#[command(name = "btg", version, about = "Ground, plan and run behavior-tree systems")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Build a BT system for a task set and write a results file.
    Ground(GroundArgs),
    /// Plan one task and print its tree.
    Plan(PlanArgs),
    /// Execute a tree in the simulated environment and print the trace.
    Run(RunArgs),
    /// Aggregate results files into ASR/CSR/FC.
    Metrics(MetricsArgs),
    /// Count or list the valid model space.
    Enumerate(EnumerateArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Algo {
    Naive,
    Cabto,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Check {
    Literal,
    Strict,
}

impl From<Check> for CheckMode {
    fn from(c: Check) -> Self {
        match c {
            Check::Literal => CheckMode::Literal,
            Check::Strict => CheckMode::Strict,
        }
    }
}

#[derive(Args, Debug)]
pub struct GroundArgs {
    /// Task-set file; its domain is loaded from the path it names.
    pub tasks: PathBuf,
    #[arg(long, value_enum, default_value = "cabto")]
    pub algo: Algo,
    /// exhaustive, heuristic, random, oracle, or external:cmd=<path> / external:url=<endpoint>
    #[arg(long, default_value = "heuristic")]
    pub proposer: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 3)]
    pub nmax: usize,
    #[arg(long, default_value_t = 4)]
    pub k_trials: usize,
    #[arg(long, default_value_t = 3)]
    pub max_cycles: usize,
    #[arg(long, default_value_t = 8)]
    pub batch: usize,
    #[arg(long, default_value_t = 3)]
    pub refine_depth: usize,
    #[arg(long, default_value_t = 16)]
    pub repair_rounds: usize,
    #[arg(long)]
    pub ablate_planning_contexts: bool,
    #[arg(long)]
    pub ablate_execution_contexts: bool,
    #[arg(long, default_value_t = DEFAULT_NAIVE_CAP as u64)]
    pub naive_cap: u64,
    #[arg(long)]
    pub max_expansions: Option<usize>,
    /// Overrides the domain's consistency check mode.
    #[arg(long, value_enum)]
    pub check: Option<Check>,
    /// Overrides the domain's scenario fill probability.
    #[arg(long)]
    pub fill_prob: Option<f64>,
    /// Seconds to wait for an external proposer reply.
    #[arg(long)]
    pub proposer_timeout: Option<u64>,
    /// Fail if grounding read any hidden policy transition.
    #[arg(long)]
    pub redact: bool,
    /// Results file; standard output when absent.
    #[arg(long, short)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct PlanArgs {
    pub tasks: PathBuf,
    #[arg(long)]
    pub task: String,
    /// Plan with the grounded actions of this results file instead of the
    /// domain's declared models.
    #[arg(long)]
    pub results: Option<PathBuf>,
    #[arg(long)]
    pub dot: bool,
    #[arg(long)]
    pub max_expansions: Option<usize>,
    #[arg(long, short)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct RunArgs {
    pub tasks: PathBuf,
    #[arg(long)]
    pub task: String,
    /// Results file providing the action-to-policy bindings.
    #[arg(long)]
    pub results: PathBuf,
    /// Tree file; planned from the results when absent.
    #[arg(long)]
    pub bt: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub tick_budget: Option<usize>,
}

#[derive(Args, Debug)]
pub struct MetricsArgs {
    #[arg(required = true)]
    pub results: Vec<PathBuf>,
    /// Print the metrics as JSON instead of a table.
    #[arg(long)]
    pub json: bool,
}

#[derive(Args, Debug)]
pub struct EnumerateArgs {
    /// Domain file. Use --synthetic for an anonymous universe instead.
    pub domain: Option<PathBuf>,
    #[arg(long, conflicts_with = "domain")]
    pub synthetic: Option<usize>,
    /// Apply only the mandatory add/del rule.
    #[arg(long)]
    pub mandatory_only: bool,
    /// Print the models, not just the count.
    #[arg(long)]
    pub list: bool,
    #[arg(long, default_value_t = 10_000_000)]
    pub cap: u64,
}

/// Runs the CLI on `argv` (including the program name) and returns the
/// exit code.
pub fn run<I, T>(argv: I, stdout: &mut dyn std::io::Write, stderr: &mut dyn std::io::Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
            let text = e.render().to_string();
            if code == EXIT_OK {
                let _ = stdout.write_all(text.as_bytes());
            } else {
                let _ = stderr.write_all(text.as_bytes());
            }
            return code;
        }
    };
    let outcome = match &cli.command {
        Command::Ground(a) => ground(a, stdout, stderr),
        Command::Plan(a) => plan(a, stdout),
        Command::Run(a) => run_bt(a, stdout),
        Command::Metrics(a) => metrics(a, stdout),
        Command::Enumerate(a) => enumerate(a, stdout),
    };
    match outcome {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(stderr, "btg: {e}");
            exit_code(&e)
        }
    }
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Resource(_) | Error::ExpansionLimit { .. } | Error::UnsatisfiableScenario(_) => EXIT_RESOURCE,
        _ => EXIT_INPUT,
    }
}

/// Builds the proposer set named by `spec`.
pub fn proposer_from_spec(
    spec: &str,
    domain: &DomainFile,
    library: &crate::env::PolicyLibrary,
    timeout: Duration,
) -> Result<ProposerSet> {
    match spec {
        "exhaustive" => Ok(ProposerSet::exhaustive()),
        "heuristic" => Ok(ProposerSet::heuristic()),
        "random" => Ok(ProposerSet::random()),
        "oracle" => Ok(ProposerSet::oracle(library, &domain.universe)),
        s => match s.strip_prefix("external:") {
            Some(rest) => ProposerSet::external(ExternalTarget::parse(rest)?, timeout),
            None => Err(Error::domain(format!("unknown proposer `{s}`"))),
        },
    }
}

fn emit(out_path: Option<&Path>, text: &str, stdout: &mut dyn std::io::Write) -> Result<()> {
    match out_path {
        Some(p) => std::fs::write(p, text).map_err(|e| Error::Resource(format!("cannot write {}: {e}", p.display()))),
        None => stdout
            .write_all(text.as_bytes())
            .map_err(|e| Error::Resource(format!("cannot write output: {e}"))),
    }
}

fn ground(a: &GroundArgs, stdout: &mut dyn std::io::Write, stderr: &mut dyn std::io::Write) -> Result<i32> {
    let mut ws = Workspace::load(&a.tasks)?;
    if let Some(c) = a.check {
        ws.domain.env.mode = c.into();
    }
    if let Some(p) = a.fill_prob {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::domain("--fill-prob must lie in [0, 1]"));
        }
        ws.domain.env.fill_prob = p;
    }
    let problem = ws.domain.problem(ws.taskset.tasks.clone())?;
    let planner = PlannerConfig {
        max_expansions: a.max_expansions,
    };
    let config = RunConfig {
        algorithm: match a.algo {
            Algo::Naive => "naive".into(),
            Algo::Cabto => "cabto".into(),
        },
        proposer: (a.algo == Algo::Cabto).then(|| a.proposer.clone()),
        seed: a.seed,
        n_max: a.nmax,
        k_trials: a.k_trials,
        max_cycles: a.max_cycles,
        batch: a.batch,
        refine_depth: a.refine_depth,
        repair_rounds: a.repair_rounds,
        ablate_planning_contexts: a.ablate_planning_contexts,
        ablate_execution_contexts: a.ablate_execution_contexts,
        naive_cap: a.naive_cap,
        max_expansions: a.max_expansions,
        fill_prob: ws.domain.env.fill_prob,
        check: ws.domain.env.mode,
    };
    let report = match a.algo {
        Algo::Naive => naive_report(
            &problem,
            &NaiveConfig {
                k_trials: a.k_trials,
                seed: a.seed,
                naive_cap: a.naive_cap as u128,
                planner,
            },
        )?,
        Algo::Cabto => {
            let timeout = a.proposer_timeout.map_or(DEFAULT_TIMEOUT, Duration::from_secs);
            let proposers = proposer_from_spec(&a.proposer, &ws.domain, problem.env.library(), timeout)?;
            let cfg = CabtoConfig {
                n_max: a.nmax,
                k_trials: a.k_trials,
                max_cycles: a.max_cycles,
                batch: a.batch,
                seed: a.seed,
                planner,
                ablate_planning_contexts: a.ablate_planning_contexts,
                ablate_execution_contexts: a.ablate_execution_contexts,
                refine_depth: a.refine_depth,
                repair_rounds: a.repair_rounds,
            };
            cabto_ground(&problem, &proposers, &cfg)?
        }
    };
    if a.redact && problem.env.library().reveals() > 0 {
        return Err(Error::domain(format!(
            "--redact: grounding read hidden policy transitions {} times",
            problem.env.library().reveals()
        )));
    }
    let results = ResultsFile::new(
        &ws.domain.name,
        &ws.taskset.name,
        config,
        &report,
        &ws.domain.universe,
    );
    emit(a.out.as_deref(), &results.to_json(), stdout)?;
    let _ = writeln!(
        stderr,
        "{}: {}/{} tasks solved, {} actions, {} feedback cycles",
        if report.complete { "complete" } else { "incomplete" },
        report.solved_count(),
        report.tasks.len(),
        report.system.actions.len(),
        report.feedback_cycles
    );
    Ok(if report.complete { EXIT_OK } else { EXIT_INCOMPLETE })
}

fn plan(a: &PlanArgs, stdout: &mut dyn std::io::Write) -> Result<i32> {
    let ws = Workspace::load(&a.tasks)?;
    let task = ws
        .taskset
        .task(&a.task)
        .ok_or_else(|| Error::domain(format!("no task `{}`", a.task)))?;
    let models: Vec<ActionModel> = match &a.results {
        Some(p) => ResultsFile::load(p)?.system(&ws.domain.universe)?.models(),
        None => ws.domain.models.clone(),
    };
    let cfg = PlannerConfig {
        max_expansions: a.max_expansions,
    };
    match bt_expansion(task, &models, &cfg)? {
        PlanResult::Solved(tree) => {
            let text = if a.dot {
                render_dot(&tree, &ws.domain.universe)
            } else {
                render_bt(&tree, &ws.domain.universe)
            };
            emit(a.out.as_deref(), &text, stdout)?;
            Ok(EXIT_OK)
        }
        PlanResult::Unsolved(ctx) => {
            let u = &ws.domain.universe;
            let mut text = format!(
                "# unsolved after {} expanded conditions\n",
                ctx.expanded_condition_count
            );
            for c in &ctx.frontier {
                text.push_str(&format!("# frontier {}\n", u.render_set(c)));
            }
            text.push_str(&render_bt(&ctx.sketch, u));
            emit(a.out.as_deref(), &text, stdout)?;
            Ok(EXIT_INCOMPLETE)
        }
    }
}

fn run_bt(a: &RunArgs, stdout: &mut dyn std::io::Write) -> Result<i32> {
    let ws = Workspace::load(&a.tasks)?;
    let u = &ws.domain.universe;
    let task = ws
        .taskset
        .task(&a.task)
        .ok_or_else(|| Error::domain(format!("no task `{}`", a.task)))?;
    let system = ResultsFile::load(&a.results)?.system(u)?;
    let tree = match &a.bt {
        Some(p) => {
            let text = crate::io::read_file(p)?;
            parse_bt(&text, u).map_err(|e| crate::io::with_path(e, p))?
        }
        None => match bt_expansion(task, &system.models(), &PlannerConfig::default())? {
            PlanResult::Solved(t) => t,
            PlanResult::Unsolved(_) => return Err(Error::domain(format!("task `{}` does not plan", task.id))),
        },
    };
    let env = ws.domain.sim_env()?;
    let budget = a.tick_budget.unwrap_or_else(|| 4 * default_tick_budget(&tree));
    let trace = env.execute_bt(&tree, &task.init, &system.bindings(), budget, a.seed)?;
    let mut text = String::new();
    for step in &trace.steps {
        text.push_str(&format!(
            "{:>4}  {:<8} {:<24} {}\n",
            step.tick,
            step.status.to_string(),
            step.active.as_deref().unwrap_or("-"),
            u.render_set(&step.state)
        ));
    }
    let reached = task.goal.is_subset(&trace.final_state);
    let outcome = match trace.outcome {
        TraceOutcome::Success => "success",
        TraceOutcome::Failure => "failure",
        TraceOutcome::BudgetExhausted => "budget exhausted",
    };
    text.push_str(&format!(
        "outcome: {outcome}; goal {}; final {}\n",
        if reached { "reached" } else { "not reached" },
        u.render_set(&trace.final_state)
    ));
    emit(None, &text, stdout)?;
    Ok(if trace.outcome == TraceOutcome::Success && reached {
        EXIT_OK
    } else {
        EXIT_INCOMPLETE
    })
}

fn percent(x: f64) -> String {
    format!("{:.1}%", 100.0 * x)
}

fn arrow(without: Option<f64>, with: Option<f64>, fmt: fn(f64) -> String) -> String {
    match (without, with) {
        (Some(a), Some(b)) => format!("{} → {}", fmt(a), fmt(b)),
        (Some(x), None) | (None, Some(x)) => fmt(x),
        (None, None) => "-".into(),
    }
}

/// Rows are keyed by domain, task set, algorithm and proposer. Runs with
/// planning contexts ablated form the "w/o" arm of their row.
pub fn metrics_table(files: &[ResultsFile]) -> Result<String> {
    type Key = (String, String, String, String);
    let mut groups: BTreeMap<Key, [Vec<RunSummary>; 2]> = BTreeMap::new();
    for f in files {
        let key = (
            f.domain.clone(),
            f.taskset.clone(),
            f.config.algorithm.clone(),
            f.config.proposer.clone().unwrap_or_else(|| "-".into()),
        );
        let arm = usize::from(!f.config.ablate_planning_contexts);
        groups.entry(key).or_default()[arm].push(f.summary());
    }
    let mut rows = vec![[
        "domain".to_string(),
        "algo".into(),
        "proposer".into(),
        "runs".into(),
        "ASR(w/o → w)".into(),
        "CSR(w/o → w)".into(),
        "FC".into(),
    ]];
    let mut totals: [Vec<RunSummary>; 2] = Default::default();
    let row = |label: [String; 3], arms: &[Vec<RunSummary>; 2]| -> Result<[String; 7]> {
        let m: Vec<Option<Metrics>> = arms
            .iter()
            .map(|runs| (!runs.is_empty()).then(|| compute_metrics(runs)).transpose())
            .collect::<Result<_>>()?;
        let runs = arms[0].len() + arms[1].len();
        let [d, al, p] = label;
        Ok([
            d,
            al,
            p,
            runs.to_string(),
            arrow(m[0].map(|x| x.asr), m[1].map(|x| x.asr), percent),
            arrow(m[0].map(|x| x.csr), m[1].map(|x| x.csr), percent),
            arrow(m[0].map(|x| x.fc), m[1].map(|x| x.fc), |v| format!("{v:.1}")),
        ])
    };
    for ((domain, taskset, algo, proposer), arms) in &groups {
        let label = if domain == taskset { domain.clone() } else { format!("{domain}/{taskset}") };
        rows.push(row([label, algo.clone(), proposer.clone()], arms)?);
        for i in 0..2 {
            totals[i].extend(arms[i].iter().copied());
        }
    }
    if groups.len() > 1 {
        rows.push(row(["Total".into(), "".into(), "".into()], &totals)?);
    }
    let widths: Vec<usize> = (0..7)
        .map(|c| rows.iter().map(|r| r[c].chars().count()).max().unwrap_or(0))
        .collect();
    let mut out = String::new();
    for r in &rows {
        let cells: Vec<String> = r
            .iter()
            .zip(&widths)
            .map(|(cell, w)| format!("{cell}{}", " ".repeat(w - cell.chars().count())))
            .collect();
        out.push_str(cells.join("  ").trim_end());
        out.push('\n');
    }
    Ok(out)
}

fn metrics(a: &MetricsArgs, stdout: &mut dyn std::io::Write) -> Result<i32> {
    let files = a
        .results
        .iter()
        .map(|p| ResultsFile::load(p))
        .collect::<Result<Vec<_>>>()?;
    let text = if a.json {
        let summaries: Vec<RunSummary> = files.iter().map(ResultsFile::summary).collect();
        let mut s = serde_json::to_string_pretty(&compute_metrics(&summaries)?).expect("metrics serialize");
        s.push('\n');
        s
    } else {
        metrics_table(&files)?
    };
    emit(None, &text, stdout)?;
    Ok(EXIT_OK)
}

fn enumerate(a: &EnumerateArgs, stdout: &mut dyn std::io::Write) -> Result<i32> {
    let (universe, space) = match (&a.domain, a.synthetic) {
        (Some(p), None) => {
            let d = DomainFile::load(p)?;
            let mut space = d.space()?;
            if a.mandatory_only {
                let rules = ValidityRules {
                    mutex_groups: Vec::new(),
                    ..ValidityRules::mandatory_only()
                };
                space = match d.explicit_models {
                    true => ModelSpace::explicit(d.universe.len(), rules, d.models.clone())?,
                    false => ModelSpace::intensional(d.universe.len(), rules),
                };
            }
            (d.universe, space)
        }
        (None, Some(n)) if n >= 1 => {
            let rules = if a.mandatory_only {
                ValidityRules::mandatory_only()
            } else {
                ValidityRules::default()
            };
            (DomainUniverse::synthetic(n), ModelSpace::intensional(n, rules))
        }
        _ => return Err(Error::domain("give a domain file or --synthetic N with N ≥ 1")),
    };
    let cap = a.cap as u128;
    let count = space.count(cap)?;
    let mut text = format!("{count}\n");
    if a.list {
        let rules = space.rules();
        let models: Box<dyn Iterator<Item = ActionModel>> = match space.explicit_models() {
            Some(list) => Box::new(list.to_vec().into_iter()),
            None => Box::new(CanonicalIter::new(universe.len(), Some(rules)).filter(|h| is_valid_model(h, rules))),
        };
        for h in models {
            text.push_str(&format!(
                "{}  pre {}  add {}  del {}\n",
                h.name,
                universe.render_set(&h.pre),
                universe.render_set(&h.add),
                universe.render_set(&h.del)
            ));
        }
    }
    emit(None, &text, stdout)?;
    Ok(EXIT_OK)
}
