//! Results files: one grounding run as JSON.
//!
//! Everything except the `timing` object is a pure function of the inputs
//! and the echoed configuration.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::env::CheckMode;
use crate::error::{Error, Result};
use crate::grounding::{BtSystem, GroundedAction, GroundingReport, RunSummary};
use crate::io::render_bt;
use crate::proposers::ModelRecord;
use crate::symbolic::DomainUniverse;

pub const RESULTS_FORMAT: &str = "btg-results/1";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub algorithm: String,
    pub proposer: Option<String>,
    pub seed: u64,
    pub n_max: usize,
    pub k_trials: usize,
    pub max_cycles: usize,
    pub batch: usize,
    pub refine_depth: usize,
    pub repair_rounds: usize,
    pub ablate_planning_contexts: bool,
    pub ablate_execution_contexts: bool,
    pub naive_cap: u64,
    pub max_expansions: Option<usize>,
    pub fill_prob: f64,
    pub check: CheckMode,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActionRecord {
    #[serde(flatten)]
    pub model: ModelRecord,
    pub policy: String,
    pub seed: u64,
    pub trials: usize,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub hyperparameters: BTreeMap<String, String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskResult {
    pub id: String,
    pub solved: bool,
    /// Planned tree in the indented text form.
    pub tree: Option<String>,
    pub actions: Option<usize>,
    pub conditions: Option<usize>,
    pub steps: Option<usize>,
    pub expanded_conditions: Option<usize>,
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReportRecord {
    pub complete: bool,
    pub feedback_cycles: usize,
    pub proposals_made: usize,
    pub proposals_rejected: usize,
    pub policies_sampled: usize,
    pub refinements: usize,
    pub validations: usize,
    pub conditions: Vec<String>,
    pub actions: Vec<ActionRecord>,
    pub tasks: Vec<TaskResult>,
    pub flags: Vec<String>,
    pub events: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub duration_ms: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultsFile {
    pub format: String,
    pub domain: String,
    pub taskset: String,
    pub config: RunConfig,
    pub report: ReportRecord,
    pub timing: Timing,
}

impl ResultsFile {
    pub fn new(
        domain: &str,
        taskset: &str,
        config: RunConfig,
        report: &GroundingReport,
        universe: &DomainUniverse,
    ) -> Self {
        let tasks = report
            .tasks
            .iter()
            .map(|t| TaskResult {
                id: t.id.clone(),
                solved: t.solved,
                tree: t.tree.as_ref().map(|tree| render_bt(tree, universe)),
                actions: t.attributes.map(|a| a.actions),
                conditions: t.attributes.map(|a| a.conditions),
                steps: t.attributes.map(|a| a.steps),
                expanded_conditions: t.expanded_conditions,
                error: t.error.clone(),
            })
            .collect();
        let actions = report
            .system
            .actions
            .iter()
            .map(|a| ActionRecord {
                model: ModelRecord::from_model(&a.model, universe),
                policy: a.policy.clone(),
                seed: a.seed,
                trials: a.trials,
                hyperparameters: a.hyperparameters.clone(),
            })
            .collect();
        ResultsFile {
            format: RESULTS_FORMAT.to_string(),
            domain: domain.to_string(),
            taskset: taskset.to_string(),
            config,
            report: ReportRecord {
                complete: report.complete,
                feedback_cycles: report.feedback_cycles,
                proposals_made: report.proposals_made,
                proposals_rejected: report.proposals_rejected,
                policies_sampled: report.policies_sampled,
                refinements: report.refinements,
                validations: report.validations,
                conditions: universe.atoms(&report.system.conditions),
                actions,
                tasks,
                flags: report.flags.clone(),
                events: report.events.clone(),
            },
            timing: Timing {
                duration_ms: report.duration.as_secs_f64() * 1000.0,
            },
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("results serialize");
        s.push('\n');
        s
    }

    pub fn parse(text: &str) -> Result<Self> {
        let r: ResultsFile =
            serde_json::from_str(text).map_err(|e| Error::parse(e.line(), e.column(), e.to_string()))?;
        if r.format != RESULTS_FORMAT {
            return Err(Error::parse(1, 1, format!("unsupported results format `{}`", r.format)));
        }
        Ok(r)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = crate::io::read_file(path)?;
        Self::parse(&text).map_err(|e| crate::io::domain::with_path(e, path))
    }

    /// The grounded system, resolved against `universe`.
    pub fn system(&self, universe: &DomainUniverse) -> Result<BtSystem> {
        let actions = self
            .report
            .actions
            .iter()
            .map(|a| {
                Ok(GroundedAction {
                    model: a.model.to_model(universe)?,
                    policy: a.policy.clone(),
                    seed: a.seed,
                    trials: a.trials,
                    hyperparameters: a.hyperparameters.clone(),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(BtSystem::new(universe.len(), actions))
    }

    pub fn summary(&self) -> RunSummary {
        RunSummary {
            tasks: self.report.tasks.len(),
            solved: self.report.tasks.iter().filter(|t| t.solved).count(),
            feedback_cycles: self.report.feedback_cycles,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grounding::{naive_report, NaiveConfig};
    use crate::io::DomainFile;
    use crate::planner::Task;

    #[test]
    fn round_trips_and_rebuilds_the_system() {
        let d = DomainFile::parse(
            "domain lamp\n\npropositions:\n  On\n\npolicy switch_on:\n  description: switch on\n  pre:\n  add: On\n  del:\n",
        )
        .unwrap();
        let u = &d.universe;
        let p = d
            .problem(vec![Task::new("light", u.empty_set(), u.set_of(["On"]).unwrap())])
            .unwrap();
        let report = naive_report(&p, &NaiveConfig::default()).unwrap();
        let config = RunConfig {
            algorithm: "naive".into(),
            proposer: None,
            seed: 0,
            n_max: 1,
            k_trials: 4,
            max_cycles: 0,
            batch: 1,
            refine_depth: 0,
            repair_rounds: 0,
            ablate_planning_contexts: false,
            ablate_execution_contexts: false,
            naive_cap: 100,
            max_expansions: None,
            fill_prob: 0.5,
            check: CheckMode::Literal,
        };
        let r = ResultsFile::new("lamp.domain", "lamp.tasks", config, &report, u);
        let text = r.to_json();
        assert!(text.ends_with('\n'));
        let back = ResultsFile::parse(&text).unwrap();
        assert_eq!(back, r);
        assert_eq!(back.system(u).unwrap().models(), report.system.models());
        assert_eq!(back.summary(), report.summary());
        let tree = back.report.tasks[0].tree.clone().unwrap();
        assert!(tree.starts_with("?\n  {On}\n"), "{tree}");
        let leaf = tree.lines().last().unwrap().trim();
        assert!(report.system.actions.iter().any(|a| a.model.name == leaf && a.model.add.len() == 1));
    }

    #[test]
    fn rejects_other_formats() {
        assert!(ResultsFile::parse("{\"format\": \"other\"}").is_err());
        assert!(matches!(ResultsFile::parse("not json"), Err(Error::Parse { .. })));
    }
}
