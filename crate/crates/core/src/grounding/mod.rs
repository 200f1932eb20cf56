//! Grounding a behavior-tree system: pairing action models with policies
//! until every task plans and every pair is consistent.

mod cabto;
mod metrics;
mod naive;
mod space;

use std::collections::BTreeMap;
use std::time::Duration;

pub use cabto::{cabto_ground, CabtoConfig};
pub use metrics::{compute_metrics, Metrics, RunSummary};
pub use naive::{naive_ground, naive_report, NaiveConfig, NaiveOutcome, DEFAULT_NAIVE_CAP};
pub use space::{candidate_count, canonical_name, CanonicalIter, ModelSpace};

use crate::env::{derive_seed, SimEnv};
use crate::error::{Error, Result};
use crate::planner::{
    bt_expansion, default_tick_budget, plan_all, solution_attributes, verify_solution, PlanResult, PlannerConfig,
    SolutionAttributes, Task,
};
use crate::symbolic::{ActionModel, BtNode, DomainUniverse, StateSet};

/// ⟨P, C_P, H_P, Π_P⟩. The policy library inside `env` keeps its hidden
/// transitions to itself.
#[derive(Clone, Debug)]
pub struct GroundingProblem {
    pub universe: DomainUniverse,
    pub tasks: Vec<Task>,
    pub space: ModelSpace,
    pub env: SimEnv,
}

impl GroundingProblem {
    pub fn new(universe: DomainUniverse, tasks: Vec<Task>, space: ModelSpace, env: SimEnv) -> Result<Self> {
        let n = universe.len();
        if space.width() != n || env.width() != n {
            return Err(Error::domain("model space or environment over a different universe"));
        }
        for t in &tasks {
            if t.init.width() != n || t.goal.width() != n {
                return Err(Error::domain(format!("task `{}` over a different universe", t.id)));
            }
        }
        Ok(GroundingProblem {
            universe,
            tasks,
            space,
            env,
        })
    }
}

/// Seed of the consistency check of model `h` against the policy at
/// `policy_index`, for the `retry`-th time that pair is checked in a run.
pub fn validation_seed(master: u64, h: &ActionModel, policy_index: usize, retry: usize) -> u64 {
    derive_seed(master, &[h.fingerprint(), policy_index as u64, retry as u64])
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GroundedAction {
    pub model: ActionModel,
    pub policy: String,
    /// Seed and trial count of the consistency check that admitted the pair.
    pub seed: u64,
    pub trials: usize,
    pub hyperparameters: BTreeMap<String, String>,
}

/// Φ = ⟨C, A⟩.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BtSystem {
    pub conditions: StateSet,
    pub actions: Vec<GroundedAction>,
}

impl BtSystem {
    pub fn new(width: usize, actions: Vec<GroundedAction>) -> Self {
        let mut conditions = StateSet::empty(width);
        for a in &actions {
            conditions.union_with(&a.model.atoms());
        }
        BtSystem { conditions, actions }
    }

    pub fn models(&self) -> Vec<ActionModel> {
        self.actions.iter().map(|a| a.model.clone()).collect()
    }

    /// Action id to policy id.
    pub fn bindings(&self) -> BTreeMap<String, String> {
        self.actions
            .iter()
            .map(|a| (a.model.name.clone(), a.policy.clone()))
            .collect()
    }

    /// Re-runs every recorded consistency check.
    pub fn revalidate(&self, env: &SimEnv) -> Result<bool> {
        for a in &self.actions {
            let (ok, _) = env.validate_consistency(&a.model, &a.policy, a.trials, a.seed, &a.hyperparameters)?;
            if !ok {
                return Ok(false);
            }
        }
        Ok(true)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TaskReport {
    pub id: String,
    pub solved: bool,
    pub tree: Option<BtNode>,
    pub attributes: Option<SolutionAttributes>,
    pub expanded_conditions: Option<usize>,
    pub error: Option<String>,
}

/// Plans every task with `models` and checks each solution in closed loop.
pub fn evaluate_tasks(tasks: &[Task], models: &[ActionModel], cfg: &PlannerConfig) -> Vec<TaskReport> {
    let results = plan_all(tasks, models, cfg);
    tasks
        .iter()
        .map(|t| match &results[&t.id] {
            Ok(PlanResult::Solved(tree)) => {
                let ok = verify_solution(tree, t, models, default_tick_budget(tree));
                TaskReport {
                    id: t.id.clone(),
                    solved: ok,
                    tree: Some(tree.clone()),
                    attributes: ok.then(|| solution_attributes(tree, t, models)),
                    expanded_conditions: None,
                    error: (!ok).then(|| "solution failed closed-loop verification".to_string()),
                }
            }
            Ok(PlanResult::Unsolved(ctx)) => TaskReport {
                id: t.id.clone(),
                solved: false,
                tree: None,
                attributes: None,
                expanded_conditions: Some(ctx.expanded_condition_count),
                error: None,
            },
            Err(e) => TaskReport {
                id: t.id.clone(),
                solved: false,
                tree: None,
                attributes: None,
                expanded_conditions: match e {
                    Error::ExpansionLimit { context, .. } => Some(context.expanded_condition_count),
                    _ => None,
                },
                error: Some(e.to_string()),
            },
        })
        .collect()
}

/// True iff every task plans with the models of `actions` and every
/// solution verifies.
pub fn all_solvable(tasks: &[Task], actions: &[GroundedAction], cfg: &PlannerConfig) -> bool {
    let models: Vec<ActionModel> = actions.iter().map(|a| a.model.clone()).collect();
    tasks.iter().all(|t| match bt_expansion(t, &models, cfg) {
        Ok(PlanResult::Solved(tree)) => verify_solution(&tree, t, &models, default_tick_budget(&tree)),
        _ => false,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct GroundingReport {
    pub algorithm: String,
    pub proposer: Option<String>,
    pub seed: u64,
    pub system: BtSystem,
    pub complete: bool,
    pub tasks: Vec<TaskReport>,
    pub feedback_cycles: usize,
    pub proposals_made: usize,
    pub proposals_rejected: usize,
    pub policies_sampled: usize,
    pub refinements: usize,
    pub validations: usize,
    /// Pairs admitted despite executions removing atoms the model keeps.
    pub flags: Vec<String>,
    pub events: Vec<String>,
    pub duration: Duration,
}

impl GroundingReport {
    pub fn solved_count(&self) -> usize {
        self.tasks.iter().filter(|t| t.solved).count()
    }

    pub fn summary(&self) -> RunSummary {
        RunSummary {
            tasks: self.tasks.len(),
            solved: self.solved_count(),
            feedback_cycles: self.feedback_cycles,
        }
    }
}
