//! Proposer-driven grounding loop.
//!
//! Each cycle plans every task with the explored models, asks for repair
//! proposals while some task fails, checks every unvalidated model against
//! sampled policies, refines the models no policy realizes, and finally
//! keeps only the validated models for the next cycle.

use std::collections::{BTreeMap, HashMap, HashSet, VecDeque};
use std::time::Instant;

use crate::env::{derive_seed, ExecutionContext, PolicyInfo};
use crate::error::{Error, Result};
use crate::grounding::{
    all_solvable, evaluate_tasks, validation_seed, BtSystem, GroundedAction, GroundingProblem, GroundingReport,
};
use crate::planner::{plan_all, PlanResult, PlannerConfig, PlanningContext};
use crate::proposers::{
    ContextFlags, ExecutionRecord, HeuristicSampler, ModelRecord, ObjectRecord, Payload, Phase, PlanningRecord,
    PolicySampler, ProposalEnv, ProposalPayload, ProposerRequest, ProposerSet, RefinePayload, SamplePayload,
    SpaceDigest, TaskRecord,
};
use crate::symbolic::{ActionModel, ModelKey};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CabtoConfig {
    /// Policy sampling attempts per model.
    pub n_max: usize,
    /// Consistency trials per sampled policy.
    pub k_trials: usize,
    pub max_cycles: usize,
    pub batch: usize,
    pub seed: u64,
    pub planner: PlannerConfig,
    pub ablate_planning_contexts: bool,
    pub ablate_execution_contexts: bool,
    /// How many successive refinements one proposal may go through.
    pub refine_depth: usize,
    /// Repair proposal rounds per cycle before moving on to validation.
    pub repair_rounds: usize,
}

impl Default for CabtoConfig {
    fn default() -> Self {
        CabtoConfig {
            n_max: 3,
            k_trials: 4,
            max_cycles: 3,
            batch: 8,
            seed: 0,
            planner: PlannerConfig::default(),
            ablate_planning_contexts: false,
            ablate_execution_contexts: false,
            refine_depth: 3,
            repair_rounds: 16,
        }
    }
}

/// Space sizes above this are treated as inexhaustible.
const SPACE_COUNT_CAP: u128 = 10_000_000;

struct Run<'a> {
    problem: &'a GroundingProblem,
    proposers: &'a ProposerSet,
    cfg: &'a CabtoConfig,
    flags: ContextFlags,
    catalog: Vec<PolicyInfo>,
    space_size: Option<u128>,
    explored: HashSet<ModelKey>,
    explored_h: Vec<ActionModel>,
    validated: Vec<ActionModel>,
    actions: Vec<GroundedAction>,
    pair_tries: HashMap<(ModelKey, usize), usize>,
    last_plans: BTreeMap<String, Result<PlanResult>>,
    calls: u64,
    proposals_made: usize,
    proposals_rejected: usize,
    policies_sampled: usize,
    refinements: usize,
    validations: usize,
    flags_raised: Vec<String>,
    events: Vec<String>,
}

/// Runs the loop. Proposer misbehavior is logged and skipped; only
/// environment errors abort the run.
pub fn cabto_ground(problem: &GroundingProblem, proposers: &ProposerSet, cfg: &CabtoConfig) -> Result<GroundingReport> {
    let start = Instant::now();
    if cfg.n_max == 0 || cfg.k_trials == 0 || cfg.batch == 0 {
        return Err(Error::domain("n_max, k_trials and batch must be at least 1"));
    }
    let space_size = match problem.space.candidate_count() {
        Some(c) if c <= SPACE_COUNT_CAP => Some(problem.space.count(SPACE_COUNT_CAP)?),
        _ => None,
    };
    let mut run = Run {
        problem,
        proposers,
        cfg,
        flags: ContextFlags {
            planning_contexts: !cfg.ablate_planning_contexts,
            execution_contexts: !cfg.ablate_execution_contexts,
        },
        catalog: problem.env.library().catalog(),
        space_size,
        explored: HashSet::new(),
        explored_h: Vec::new(),
        validated: Vec::new(),
        actions: Vec::new(),
        pair_tries: HashMap::new(),
        last_plans: BTreeMap::new(),
        calls: 0,
        proposals_made: 0,
        proposals_rejected: 0,
        policies_sampled: 0,
        refinements: 0,
        validations: 0,
        flags_raised: Vec::new(),
        events: Vec::new(),
    };
    let iterations = run.main_loop()?;
    let models: Vec<ActionModel> = run.actions.iter().map(|a| a.model.clone()).collect();
    let tasks = evaluate_tasks(&problem.tasks, &models, &cfg.planner);
    let complete = tasks.iter().all(|t| t.solved);
    Ok(GroundingReport {
        algorithm: "cabto".into(),
        proposer: Some(proposers.name.clone()),
        seed: cfg.seed,
        system: BtSystem::new(problem.universe.len(), run.actions),
        complete,
        tasks,
        feedback_cycles: iterations.saturating_sub(1),
        proposals_made: run.proposals_made,
        proposals_rejected: run.proposals_rejected,
        policies_sampled: run.policies_sampled,
        refinements: run.refinements,
        validations: run.validations,
        flags: run.flags_raised,
        events: run.events,
        duration: start.elapsed(),
    })
}

impl Run<'_> {
    fn unexplored_left(&self) -> bool {
        self.space_size.is_none_or(|s| (self.explored.len() as u128) < s)
    }

    fn pending(&self) -> bool {
        self.explored_h.iter().any(|h| !self.validated.iter().any(|v| v.same_triple(h)))
    }

    fn log(&mut self, cycle: usize, msg: impl Into<String>) {
        self.events.push(format!("cycle {cycle}: {}", msg.into()));
    }

    fn next_seed(&mut self, phase: Phase) -> u64 {
        self.calls += 1;
        derive_seed(self.cfg.seed, &[0x9709_05e5, phase as u64, self.calls])
    }

    fn main_loop(&mut self) -> Result<usize> {
        let accepted = self.propose(0, Phase::InitialProposal, None);
        self.log(0, format!("initial proposal: {accepted} models accepted"));
        let mut iterations = 0;
        loop {
            if !self.unexplored_left() && !self.pending() {
                self.log(iterations, "model space exhausted");
                break;
            }
            if all_solvable(&self.problem.tasks, &self.actions, &self.cfg.planner) {
                break;
            }
            if iterations > self.cfg.max_cycles {
                self.log(iterations, "feedback cycle budget spent");
                break;
            }
            let cycle = iterations;
            iterations += 1;
            self.plan_phase(cycle);
            self.validation_phase(cycle)?;
            // knowledge sync: only validated models stay explored
            self.explored_h = self.validated.clone();
        }
        Ok(iterations)
    }

    fn plan_phase(&mut self, cycle: usize) {
        for round in 0.. {
            self.last_plans = plan_all(&self.problem.tasks, &self.explored_h, &self.cfg.planner);
            let failures = self.failure_records();
            if failures.is_empty() || !self.unexplored_left() {
                return;
            }
            if round == self.cfg.repair_rounds {
                self.log(cycle, "repair round budget spent");
                return;
            }
            let mut accepted = self.propose(cycle, Phase::RepairProposal, Some(failures.clone()));
            if accepted == 0 {
                self.log(cycle, "repair proposal gave nothing usable; asking again");
                accepted = self.propose(cycle, Phase::RepairProposal, Some(failures));
            }
            if accepted == 0 {
                self.log(cycle, "no repair proposal accepted");
                return;
            }
        }
    }

    fn failure_records(&self) -> Vec<PlanningRecord> {
        let u = &self.problem.universe;
        self.problem
            .tasks
            .iter()
            .filter_map(|t| {
                let ctx = match &self.last_plans[&t.id] {
                    Ok(PlanResult::Unsolved(c)) => c.clone(),
                    Err(Error::ExpansionLimit { context, .. }) => (**context).clone(),
                    _ => return None,
                };
                Some(PlanningRecord::from_context(&ctx, t, u))
            })
            .collect()
    }

    fn digest(&self) -> SpaceDigest {
        let space = &self.problem.space;
        SpaceDigest {
            add_pre_disjoint: space.rules().add_pre_disjoint,
            del_subset_pre: space.rules().del_subset_pre,
            explicit_models: space.explicit_models().map(<[_]>::len),
            proposed: self.explored.len(),
            candidates: self.space_size.map(|c| c.to_string()),
        }
    }

    fn mutex_records(&self) -> Vec<Vec<String>> {
        let u = &self.problem.universe;
        self.problem.space.rules().mutex_groups.iter().map(|g| u.atoms(g)).collect()
    }

    fn propose(&mut self, cycle: usize, phase: Phase, failures: Option<Vec<PlanningRecord>>) -> usize {
        let u = &self.problem.universe;
        let payload = ProposalPayload {
            tasks: self.problem.tasks.iter().map(|t| TaskRecord::from_task(t, u)).collect(),
            propositions: u.propositions().iter().map(|p| p.to_string()).collect(),
            objects: u
                .objects()
                .iter()
                .map(|o| ObjectRecord {
                    name: o.name.clone(),
                    description: o.description.clone(),
                })
                .collect(),
            mutex_groups: self.mutex_records(),
            space: self.digest(),
            batch: self.cfg.batch,
            failures: if self.flags.planning_contexts { failures } else { None },
        };
        let req = ProposerRequest {
            phase,
            payload: Payload::Proposal(payload),
            context_flags: self.flags,
        };
        let seed = self.next_seed(phase);
        let env = ProposalEnv {
            universe: u,
            space: &self.problem.space,
            explored: &self.explored,
            seed,
        };
        let response = self.proposers.proposer.propose(&req, &env);
        match response {
            Ok(resp) => {
                let mut accepted = 0;
                for rec in resp.models.iter().take(self.cfg.batch) {
                    match self.admit(rec) {
                        Ok(h) => {
                            self.explored_h.push(h);
                            self.proposals_made += 1;
                            accepted += 1;
                        }
                        Err(why) => {
                            self.proposals_rejected += 1;
                            self.log(cycle, format!("rejected proposal `{}`: {why}", rec.name));
                        }
                    }
                }
                if resp.models.len() > self.cfg.batch {
                    self.log(cycle, format!("ignored {} models beyond the batch size", resp.models.len() - self.cfg.batch));
                }
                accepted
            }
            Err(e) => {
                self.log(cycle, format!("proposer failed: {e}"));
                0
            }
        }
    }

    /// Schema gate: parses, validates and moves a model out of H_U.
    fn admit(&mut self, rec: &ModelRecord) -> std::result::Result<ActionModel, String> {
        let mut h = rec.to_model(&self.problem.universe).map_err(|e| e.to_string())?;
        if !self.problem.space.contains(&h) {
            return Err("not a valid model of the space".into());
        }
        if self.explored.contains(&h.key()) {
            return Err("already explored".into());
        }
        h.name = self.unique_name(&h.name);
        self.explored.insert(h.key());
        Ok(h)
    }

    fn unique_name(&self, base: &str) -> String {
        let taken = |n: &str| self.explored_h.iter().chain(&self.validated).any(|m| m.name == n);
        if !taken(base) {
            return base.to_string();
        }
        (2..)
            .map(|k| format!("{base}#{k}"))
            .find(|n| !taken(n))
            .expect("unbounded suffixes")
    }

    fn validation_phase(&mut self, cycle: usize) -> Result<()> {
        let mut worklist: VecDeque<(ActionModel, usize)> = self
            .explored_h
            .iter()
            .filter(|h| !self.validated.iter().any(|v| v.same_triple(h)))
            .map(|h| (h.clone(), 0))
            .collect();
        while let Some((h, depth)) = worklist.pop_front() {
            let (admitted, history) = self.sample_and_validate(cycle, &h)?;
            if let Some(action) = admitted {
                self.validated.push(h);
                self.actions.push(action);
                continue;
            }
            self.explored_h.retain(|m| !m.same_triple(&h));
            if depth >= self.cfg.refine_depth {
                self.log(cycle, format!("`{}` dropped after {depth} refinements", h.name));
                continue;
            }
            if let Some(h2) = self.refine(cycle, &h, &history) {
                self.explored_h.push(h2.clone());
                worklist.push_back((h2, depth + 1));
            }
        }
        Ok(())
    }

    fn sample_and_validate(
        &mut self,
        cycle: usize,
        h: &ActionModel,
    ) -> Result<(Option<GroundedAction>, Vec<ExecutionContext>)> {
        let u = &self.problem.universe;
        let env = &self.problem.env;
        let mut history: Vec<ExecutionContext> = Vec::new();
        if self.catalog.is_empty() {
            return Ok((None, history));
        }
        for attempt in 0..self.cfg.n_max {
            let payload = SamplePayload {
                model: ModelRecord::from_model(h, u),
                catalog: self.catalog.clone(),
                attempt,
                history: self
                    .flags
                    .execution_contexts
                    .then(|| history.iter().map(|c| ExecutionRecord::from_context(c, u)).collect()),
            };
            let req = ProposerRequest {
                phase: Phase::PolicySample,
                payload: Payload::Sample(payload),
                context_flags: self.flags,
            };
            let seed = self.next_seed(Phase::PolicySample);
            let penv = ProposalEnv {
                universe: u,
                space: &self.problem.space,
                explored: &self.explored,
                seed,
            };
            let (choice, fallback) = match self.proposers.sampler.sample(&req, &penv) {
                Ok(c) if env.library().contains(&c.policy_id) => (c, None),
                outcome => {
                    let why = match outcome {
                        Ok(c) => format!("unknown policy id `{}`", c.policy_id),
                        Err(e) => e.to_string(),
                    };
                    (HeuristicSampler.sample(&req, &penv)?, Some(why))
                }
            };
            self.policies_sampled += 1;
            if let Some(why) = fallback {
                self.log(cycle, format!("sampler for `{}` rejected ({why}); using the built-in heuristic", h.name));
            }
            let pi = env.library().ids().position(|id| id == choice.policy_id).expect("checked above");
            let tries = self.pair_tries.entry((h.key(), pi)).or_insert(0);
            let seed = validation_seed(self.cfg.seed, h, pi, *tries);
            *tries += 1;
            let checked =
                env.validate_consistency(h, &choice.policy_id, self.cfg.k_trials, seed, &choice.hyperparameters);
            let (ok, contexts) = match checked {
                Err(Error::UnsatisfiableScenario(why)) => {
                    self.log(cycle, format!("`{}` cannot be exercised: {why}", h.name));
                    return Ok((None, history));
                }
                other => other?,
            };
            self.validations += 1;
            if ok {
                self.flag_stale_atoms(cycle, h, &choice.policy_id, &contexts);
                let action = GroundedAction {
                    model: h.clone(),
                    policy: choice.policy_id,
                    seed,
                    trials: self.cfg.k_trials,
                    hyperparameters: choice.hyperparameters,
                };
                return Ok((Some(action), history));
            }
            history.extend(contexts);
        }
        self.log(cycle, format!("no policy realizes `{}` after {} attempts", h.name, self.cfg.n_max));
        Ok((None, history))
    }

    /// A pair can pass the check while the policy removes atoms the model
    /// claims to keep. Such pairs are kept but reported.
    fn flag_stale_atoms(&mut self, cycle: usize, h: &ActionModel, policy: &str, contexts: &[ExecutionContext]) {
        let u = &self.problem.universe;
        let mut stale = u.empty_set();
        for c in contexts.iter().filter(|c| c.note.is_none()) {
            stale.union_with(&c.s0.difference(&c.s_t).difference(&h.del));
        }
        if !stale.is_empty() {
            let msg = format!(
                "`{}` bound to `{policy}` leaves stale atoms {}",
                h.name,
                u.render_set(&stale)
            );
            self.log(cycle, msg.clone());
            self.flags_raised.push(msg);
        }
    }

    fn planning_records_for(&self, h: &ActionModel) -> Vec<PlanningRecord> {
        let u = &self.problem.universe;
        self.problem
            .tasks
            .iter()
            .filter_map(|t| {
                let ctx = match self.last_plans.get(&t.id)? {
                    Ok(PlanResult::Solved(tree)) => PlanningContext {
                        task_id: t.id.clone(),
                        solved: true,
                        expanded_condition_count: 0,
                        frontier: Vec::new(),
                        sketch: tree.clone(),
                        actions_used: tree.action_ids().iter().map(|s| s.to_string()).collect(),
                    },
                    Ok(PlanResult::Unsolved(c)) => c.clone(),
                    Err(Error::ExpansionLimit { context, .. }) => (**context).clone(),
                    Err(_) => return None,
                };
                ctx.actions_used
                    .contains(&h.name)
                    .then(|| PlanningRecord::from_context(&ctx, t, u))
            })
            .collect()
    }

    fn refine(&mut self, cycle: usize, h: &ActionModel, history: &[ExecutionContext]) -> Option<ActionModel> {
        let u = &self.problem.universe;
        let payload = RefinePayload {
            model: ModelRecord::from_model(h, u),
            propositions: u.propositions().iter().map(|p| p.to_string()).collect(),
            mutex_groups: self.mutex_records(),
            space: self.digest(),
            catalog: self.catalog.clone(),
            planning: self.flags.planning_contexts.then(|| self.planning_records_for(h)),
            history: self
                .flags
                .execution_contexts
                .then(|| history.iter().map(|c| ExecutionRecord::from_context(c, u)).collect()),
        };
        let req = ProposerRequest {
            phase: Phase::Refine,
            payload: Payload::Refine(payload),
            context_flags: self.flags,
        };
        let seed = self.next_seed(Phase::Refine);
        let penv = ProposalEnv {
            universe: u,
            space: &self.problem.space,
            explored: &self.explored,
            seed,
        };
        let resp = match self.proposers.refiner.refine(&req, &penv) {
            Ok(r) => r,
            Err(e) => {
                self.log(cycle, format!("refiner failed on `{}`: {e}", h.name));
                return None;
            }
        };
        for d in &resp.diagnosis {
            self.log(cycle, format!("refine `{}`: {d}", h.name));
        }
        let rec = match resp.model {
            Some(rec) => rec,
            None => {
                self.log(cycle, format!("no refinement for `{}`", h.name));
                return None;
            }
        };
        match rec.to_model(u) {
            Ok(h2) if h2.same_triple(h) => {
                self.log(cycle, format!("refinement of `{}` is unchanged", h.name));
                None
            }
            Ok(_) => match self.admit(&rec) {
                Ok(h2) => {
                    self.refinements += 1;
                    self.log(cycle, format!("refined `{}` into `{}`", h.name, h2.name));
                    Some(h2)
                }
                Err(why) => {
                    self.log(cycle, format!("refinement of `{}` dropped: {why}", h.name));
                    None
                }
            },
            Err(e) => {
                self.log(cycle, format!("refinement of `{}` dropped: {e}", h.name));
                None
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::io::DomainFile;
    use crate::planner::Task;

    const DOMAIN: &str = "domain box\n\npropositions:\n  Open\n  Holding\n  Inside\n\nenv:\n  check: strict\n\n\
        policy open_box:\n  description: open the box\n  pre:\n  add: Open\n  del:\n\n\
        policy put_inside:\n  description: put the held item inside the open box\n  pre: Open Holding\n  add: Inside\n  del: Holding\n";

    fn problem() -> GroundingProblem {
        let d = DomainFile::parse(DOMAIN).unwrap();
        let u = &d.universe;
        let t = Task::new("stow", u.set_of(["Holding"]).unwrap(), u.set_of(["Inside"]).unwrap());
        d.problem(vec![t]).unwrap()
    }

    #[test]
    fn oracle_opening_needs_no_feedback() {
        let p = problem();
        let set = ProposerSet::oracle(p.env.library(), &p.universe);
        let r = cabto_ground(&p, &set, &CabtoConfig::default()).unwrap();
        assert!(r.complete);
        assert_eq!(r.feedback_cycles, 0);
        assert_eq!(r.system.actions.len(), 2);
        assert!(r.system.revalidate(&p.env).unwrap());
    }

    #[test]
    fn heuristic_grounds_and_revalidates() {
        let p = problem();
        for seed in 0..5 {
            let cfg = CabtoConfig {
                seed,
                ..Default::default()
            };
            let r = cabto_ground(&p, &ProposerSet::heuristic(), &cfg).unwrap();
            assert!(r.complete, "seed {seed}: {:?}", r.events);
            assert!(r.system.revalidate(&p.env).unwrap());
            assert!(r.feedback_cycles <= cfg.max_cycles);
        }
    }

    #[test]
    fn cycle_budget_bounds_feedback() {
        let p = problem();
        let cfg = CabtoConfig {
            max_cycles: 0,
            ..Default::default()
        };
        let r = cabto_ground(&p, &ProposerSet::random(), &cfg).unwrap();
        assert_eq!(r.feedback_cycles, 0);
    }

    #[test]
    fn exhaustive_never_proposes_twice() {
        let p = problem();
        let cfg = CabtoConfig {
            max_cycles: usize::MAX,
            repair_rounds: usize::MAX,
            n_max: 2,
            ..Default::default()
        };
        let r = cabto_ground(&p, &ProposerSet::exhaustive(), &cfg).unwrap();
        assert!(r.complete);
        let space = p.space.count(u128::MAX).unwrap() as usize;
        assert!(r.proposals_made <= space);
        assert_eq!(r.proposals_rejected, 0);
    }

    #[test]
    fn zero_budgets_are_rejected() {
        let p = problem();
        for cfg in [
            CabtoConfig {
                n_max: 0,
                ..Default::default()
            },
            CabtoConfig {
                batch: 0,
                ..Default::default()
            },
        ] {
            assert!(cabto_ground(&p, &ProposerSet::heuristic(), &cfg).is_err());
        }
    }
}
