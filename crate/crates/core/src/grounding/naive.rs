//! Exhaustive grounding: every valid model against every policy.

use std::time::Instant;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grounding::{
    evaluate_tasks, validation_seed, BtSystem, CanonicalIter, GroundedAction, GroundingProblem, GroundingReport,
};
use crate::planner::PlannerConfig;
use crate::symbolic::{is_valid_model, ActionModel};

pub const DEFAULT_NAIVE_CAP: u128 = 10_000_000;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NaiveConfig {
    pub k_trials: usize,
    pub seed: u64,
    /// Largest candidate count the enumeration may face.
    pub naive_cap: u128,
    pub planner: PlannerConfig,
}

impl Default for NaiveConfig {
    fn default() -> Self {
        NaiveConfig {
            k_trials: 4,
            seed: 0,
            naive_cap: DEFAULT_NAIVE_CAP,
            planner: PlannerConfig::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NaiveOutcome {
    pub system: BtSystem,
    pub candidates: u128,
    pub valid_models: usize,
    /// Consistency checks performed.
    pub checks: usize,
}

/// Enumerates every `(pre, add, del)` triple with disjoint add and del in
/// canonical order, keeps the valid ones, and binds each to the first
/// policy in library order that passes the consistency check.
pub fn naive_ground(problem: &GroundingProblem, cfg: &NaiveConfig) -> Result<NaiveOutcome> {
    let candidates = problem
        .space
        .candidate_count()
        .ok_or_else(|| Error::Resource("model space size overflows".into()))?;
    if candidates > cfg.naive_cap {
        return Err(Error::Resource(format!(
            "naive grounding would enumerate {candidates} candidate models (cap {})",
            cfg.naive_cap
        )));
    }
    let rules = problem.space.rules();
    let valid: Vec<ActionModel> = match problem.space.explicit_models() {
        Some(list) => list.to_vec(),
        None => CanonicalIter::new(problem.universe.len(), None)
            .filter(|h| is_valid_model(h, rules))
            .collect(),
    };
    let env = &problem.env;
    let ids: Vec<String> = env.library().ids().map(str::to_string).collect();
    let none = Default::default();
    let bound: Vec<(Option<GroundedAction>, usize)> = valid
        .par_iter()
        .map(|h| -> Result<(Option<GroundedAction>, usize)> {
            for (pi, id) in ids.iter().enumerate() {
                let seed = validation_seed(cfg.seed, h, pi, 0);
                let (ok, _) = env.validate_consistency(h, id, cfg.k_trials, seed, &none)?;
                if ok {
                    let action = GroundedAction {
                        model: h.clone(),
                        policy: id.clone(),
                        seed,
                        trials: cfg.k_trials,
                        hyperparameters: Default::default(),
                    };
                    return Ok((Some(action), pi + 1));
                }
            }
            Ok((None, ids.len()))
        })
        .collect::<Result<_>>()?;
    let checks = bound.iter().map(|b| b.1).sum();
    let actions: Vec<GroundedAction> = bound.into_iter().filter_map(|b| b.0).collect();
    Ok(NaiveOutcome {
        checks,
        system: BtSystem::new(problem.universe.len(), actions),
        candidates,
        valid_models: valid.len(),
    })
}

pub fn naive_report(problem: &GroundingProblem, cfg: &NaiveConfig) -> Result<GroundingReport> {
    let start = Instant::now();
    let outcome = naive_ground(problem, cfg)?;
    let tasks = evaluate_tasks(&problem.tasks, &outcome.system.models(), &cfg.planner);
    let complete = tasks.iter().all(|t| t.solved);
    Ok(GroundingReport {
        algorithm: "naive".into(),
        proposer: None,
        seed: cfg.seed,
        complete,
        tasks,
        feedback_cycles: 0,
        proposals_made: outcome.valid_models,
        proposals_rejected: 0,
        policies_sampled: 0,
        refinements: 0,
        validations: outcome.checks,
        flags: Vec::new(),
        events: vec![format!(
            "enumerated {} candidates, {} valid, {} grounded",
            outcome.candidates,
            outcome.valid_models,
            outcome.system.actions.len()
        )],
        system: outcome.system,
        duration: start.elapsed(),
    })
}
