//! Backward condition expansion producing reactive solution trees, plus the
//! forward breadth-first oracle used to cross-check it.
//!
//! The expansion keeps one root fallback. Its first child is the goal
//! condition; every other child is `Sequence(Cond(c'), Action(h))` where
//! `c'` is the regression of an earlier condition through `h`. Conditions
//! are expanded in FIFO order, so a child's parent condition always sits to
//! its left, and executing the first applicable branch strictly moves the
//! first satisfied branch leftwards until the goal holds.

use std::collections::{BTreeMap, HashSet, VecDeque};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::symbolic::{apply_model, tick_unchecked, ActionLookup, ActionModel, BtNode, BtStatus, StateSet};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Task {
    pub id: String,
    pub init: StateSet,
    pub goal: StateSet,
}

impl Task {
    pub fn new(id: impl Into<String>, init: StateSet, goal: StateSet) -> Self {
        Task {
            id: id.into(),
            init,
            goal,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct PlannerConfig {
    /// Cap on popped conditions. `None` means `10 * 3^n`, at most 100000.
    pub max_expansions: Option<usize>,
}

impl PlannerConfig {
    pub fn expansion_limit(&self, n: usize) -> usize {
        self.max_expansions.unwrap_or_else(|| {
            let mut limit: usize = 10;
            for _ in 0..n {
                limit = limit.saturating_mul(3);
                if limit >= 100_000 {
                    return 100_000;
                }
            }
            limit.min(100_000)
        })
    }
}

/// Diagnostics of a planning attempt that did not produce a solution.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PlanningContext {
    pub task_id: String,
    pub solved: bool,
    pub expanded_condition_count: usize,
    /// Expanded conditions none of which hold in the initial state, in
    /// expansion order (the goal first).
    pub frontier: Vec<StateSet>,
    /// The partial tree at termination.
    pub sketch: BtNode,
    pub actions_used: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum PlanResult {
    Solved(BtNode),
    Unsolved(PlanningContext),
}

impl PlanResult {
    pub fn solution(&self) -> Option<&BtNode> {
        match self {
            PlanResult::Solved(t) => Some(t),
            PlanResult::Unsolved(_) => None,
        }
    }

    pub fn context(&self) -> Option<&PlanningContext> {
        match self {
            PlanResult::Solved(_) => None,
            PlanResult::Unsolved(c) => Some(c),
        }
    }

    pub fn is_solved(&self) -> bool {
        matches!(self, PlanResult::Solved(_))
    }
}

fn sorted_models(models: &[ActionModel]) -> Vec<&ActionModel> {
    let mut sorted: Vec<&ActionModel> = models.iter().collect();
    sorted.sort_by(|a, b| a.name.cmp(&b.name).then_with(|| a.key().cmp(&b.key())));
    sorted
}

/// Sound and complete construction of a solution tree for `task` from the
/// declared models. Deterministic: models are tried in ascending name order
/// and conditions are expanded first-in first-out.
pub fn bt_expansion(task: &Task, models: &[ActionModel], cfg: &PlannerConfig) -> Result<PlanResult> {
    let n = task.init.width();
    if task.goal.width() != n || models.iter().any(|h| h.width() != n) {
        return Err(Error::domain(format!(
            "task `{}` and its models use different universes",
            task.id
        )));
    }
    if task.goal.is_subset(&task.init) {
        return Ok(PlanResult::Solved(BtNode::Condition(task.goal.clone())));
    }

    let models = sorted_models(models);
    let limit = cfg.expansion_limit(n);
    let mut branches = vec![BtNode::Condition(task.goal.clone())];
    let mut expanded: Vec<StateSet> = vec![task.goal.clone()];
    let mut queue: VecDeque<StateSet> = VecDeque::from([task.goal.clone()]);
    let mut actions_used: Vec<String> = Vec::new();
    let mut popped = 0usize;

    let context = |branches: &[BtNode], expanded: &[StateSet], actions: &[String], popped| PlanningContext {
        task_id: task.id.clone(),
        solved: false,
        expanded_condition_count: popped,
        frontier: expanded.to_vec(),
        sketch: BtNode::Fallback(branches.to_vec()),
        actions_used: actions.to_vec(),
    };

    while let Some(c) = queue.pop_front() {
        if popped >= limit {
            return Err(Error::ExpansionLimit {
                limit,
                context: Box::new(context(&branches, &expanded, &actions_used, popped)),
            });
        }
        popped += 1;
        for h in &models {
            if h.del.intersects(&c) || !h.add.intersects(&c) {
                continue;
            }
            let regressed = c.difference(&h.add).union(&h.pre);
            if expanded.iter().any(|e| e.is_subset(&regressed)) {
                continue;
            }
            branches.push(BtNode::Sequence(vec![
                BtNode::Condition(regressed.clone()),
                BtNode::Action(h.name.clone()),
            ]));
            if !actions_used.contains(&h.name) {
                actions_used.push(h.name.clone());
            }
            if regressed.is_subset(&task.init) {
                return Ok(PlanResult::Solved(BtNode::Fallback(branches)));
            }
            expanded.push(regressed.clone());
            queue.push_back(regressed);
        }
    }
    Ok(PlanResult::Unsolved(context(&branches, &expanded, &actions_used, popped)))
}

/// Plans every task against the same model set. Tasks are independent and
/// are planned in parallel; the result map is ordered by task id.
pub fn plan_all(
    tasks: &[Task],
    models: &[ActionModel],
    cfg: &PlannerConfig,
) -> BTreeMap<String, Result<PlanResult>> {
    tasks
        .par_iter()
        .map(|t| (t.id.clone(), bt_expansion(t, models, cfg)))
        .collect::<Vec<_>>()
        .into_iter()
        .collect()
}

/// Contexts of the tasks that did not get a solution, expansion-limit hits
/// included.
pub fn failed_contexts(results: &BTreeMap<String, Result<PlanResult>>) -> Vec<PlanningContext> {
    results
        .values()
        .filter_map(|r| match r {
            Ok(PlanResult::Unsolved(c)) => Some(c.clone()),
            Err(Error::ExpansionLimit { context, .. }) => Some((**context).clone()),
            _ => None,
        })
        .collect()
}

pub const ORACLE_MAX_PROPOSITIONS: usize = 20;

/// Shortest number of model applications taking the initial state to a
/// goal state, by breadth-first search over reachable states.
pub fn forward_search_oracle(task: &Task, models: &[ActionModel]) -> Result<Option<usize>> {
    let n = task.init.width();
    if n > ORACLE_MAX_PROPOSITIONS {
        return Err(Error::Resource(format!(
            "forward oracle limited to {ORACLE_MAX_PROPOSITIONS} propositions, got {n}"
        )));
    }
    if task.goal.is_subset(&task.init) {
        return Ok(Some(0));
    }
    let mut seen: HashSet<StateSet> = HashSet::from([task.init.clone()]);
    let mut frontier = vec![task.init.clone()];
    let mut depth = 0;
    while !frontier.is_empty() {
        depth += 1;
        let mut next = Vec::new();
        for s in &frontier {
            for h in models {
                if !h.pre.is_subset(s) {
                    continue;
                }
                let t = s.union(&h.add).difference(&h.del);
                if task.goal.is_subset(&t) {
                    return Ok(Some(depth));
                }
                if seen.insert(t.clone()) {
                    next.push(t);
                }
            }
        }
        frontier = next;
    }
    Ok(None)
}

/// Outcome of driving a tree in closed loop against the declared models.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ModelRollout {
    pub status: BtStatus,
    pub ticks: usize,
    pub actions: Vec<String>,
    pub states: Vec<StateSet>,
    pub final_state: StateSet,
}

/// Ticks `tree` from `init`, applying the declared model of every running
/// action, until success, failure, or `tick_budget` ticks. A budget stop is
/// reported as `Running`.
pub fn rollout(
    tree: &BtNode,
    init: &StateSet,
    models: &(impl ActionLookup + ?Sized),
    tick_budget: usize,
) -> Result<ModelRollout> {
    tree.check(init, models)?;
    let mut s = init.clone();
    let mut states = vec![s.clone()];
    let mut actions = Vec::new();
    for t in 1..=tick_budget {
        let (status, active) = tick_unchecked(tree, &s);
        match (status, active) {
            (BtStatus::Running, Some(id)) => {
                let h = models.model(id).expect("checked above");
                s = apply_model(h, &s)?;
                actions.push(id.to_string());
                states.push(s.clone());
            }
            (status, _) => {
                return Ok(ModelRollout {
                    status,
                    ticks: t,
                    actions,
                    states,
                    final_state: s,
                })
            }
        }
    }
    Ok(ModelRollout {
        status: BtStatus::Running,
        ticks: tick_budget,
        actions,
        states,
        final_state: s,
    })
}

/// Closed-loop check that `tree` takes the task's initial state to the goal
/// within `tick_budget` ticks under the declared models.
pub fn verify_solution(
    tree: &BtNode,
    task: &Task,
    models: &(impl ActionLookup + ?Sized),
    tick_budget: usize,
) -> bool {
    match rollout(tree, &task.init, models, tick_budget) {
        Ok(r) => r.status == BtStatus::Success && task.goal.is_subset(&r.final_state),
        Err(_) => false,
    }
}

/// Budget used when verifying planner output: a solution tree never needs
/// more ticks than it has branches.
pub fn default_tick_budget(tree: &BtNode) -> usize {
    2 * tree.children().len().max(1) + 1
}

/// Size attributes of a solution: distinct actions, distinct condition
/// atoms, and closed-loop ticks to reach the goal.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct SolutionAttributes {
    pub actions: usize,
    pub conditions: usize,
    pub steps: usize,
}

pub fn solution_attributes(
    tree: &BtNode,
    task: &Task,
    models: &(impl ActionLookup + ?Sized),
) -> SolutionAttributes {
    let mut atoms = StateSet::empty(task.init.width());
    for c in tree.conditions() {
        atoms.union_with(c);
    }
    let steps = rollout(tree, &task.init, models, default_tick_budget(tree))
        .map(|r| r.ticks)
        .unwrap_or(0);
    SolutionAttributes {
        actions: tree.action_ids().len(),
        conditions: atoms.len(),
        steps,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symbolic::DomainUniverse;

    #[test]
    fn single_action_example() {
        let u = DomainUniverse::new(["p", "q"], vec![]).unwrap();
        let a1 = ActionModel::from_atoms(&u, "a1", &["p"], &["q"], &[]).unwrap();
        let task = Task::new("t", u.set_of(["p"]).unwrap(), u.set_of(["q"]).unwrap());
        let result = bt_expansion(&task, &[a1.clone()], &PlannerConfig::default()).unwrap();
        let expected = BtNode::Fallback(vec![
            BtNode::Condition(u.set_of(["q"]).unwrap()),
            BtNode::Sequence(vec![
                BtNode::Condition(u.set_of(["p"]).unwrap()),
                BtNode::action("a1"),
            ]),
        ]);
        assert_eq!(result, PlanResult::Solved(expected.clone()));
        assert_eq!(forward_search_oracle(&task, &[a1.clone()]).unwrap(), Some(1));
        let models = vec![a1];
        let r = rollout(&expected, &task.init, &models, 10).unwrap();
        assert_eq!(r.status, BtStatus::Success);
        assert_eq!(r.actions, vec!["a1"]);
        assert_eq!(r.final_state, u.set_of(["p", "q"]).unwrap());
        assert!(verify_solution(&expected, &task, &models, 3));
    }

    #[test]
    fn goal_already_true() {
        let u = DomainUniverse::synthetic(2);
        let task = Task::new("t", u.set_of(["p0", "p1"]).unwrap(), u.set_of(["p1"]).unwrap());
        let r = bt_expansion(&task, &[], &PlannerConfig::default()).unwrap();
        assert_eq!(r, PlanResult::Solved(BtNode::Condition(task.goal.clone())));
        assert_eq!(forward_search_oracle(&task, &[]).unwrap(), Some(0));
    }

    #[test]
    fn no_models_gives_context() {
        let u = DomainUniverse::synthetic(2);
        let task = Task::new("t", u.empty_set(), u.set_of(["p1"]).unwrap());
        let r = bt_expansion(&task, &[], &PlannerConfig::default()).unwrap();
        let ctx = r.context().unwrap();
        assert!(!ctx.solved);
        assert_eq!(ctx.expanded_condition_count, 1);
        assert_eq!(ctx.frontier, vec![task.goal.clone()]);
        assert_eq!(forward_search_oracle(&task, &[]).unwrap(), None);
    }

    #[test]
    fn bare_goal_condition_does_not_verify_unmet_goal() {
        let u = DomainUniverse::synthetic(2);
        let task = Task::new("t", u.empty_set(), u.set_of(["p1"]).unwrap());
        let tree = BtNode::Condition(task.goal.clone());
        let models: Vec<ActionModel> = vec![];
        assert!(!verify_solution(&tree, &task, &models, 10));
    }

    #[test]
    fn two_step_chain() {
        let u = DomainUniverse::new(["OnTable", "Holding", "Open", "In"], vec![]).unwrap();
        let pick = ActionModel::from_atoms(&u, "pick", &["OnTable"], &["Holding"], &["OnTable"]).unwrap();
        let open = ActionModel::from_atoms(&u, "open", &[], &["Open"], &[]).unwrap();
        let put = ActionModel::from_atoms(&u, "put", &["Holding", "Open"], &["In"], &["Holding"]).unwrap();
        let models = vec![pick, open, put];
        let task = Task::new("t", u.set_of(["OnTable"]).unwrap(), u.set_of(["In"]).unwrap());
        let r = bt_expansion(&task, &models, &PlannerConfig::default()).unwrap();
        let tree = r.solution().unwrap();
        assert!(verify_solution(tree, &task, &models, default_tick_budget(tree)));
        assert_eq!(forward_search_oracle(&task, &models).unwrap(), Some(3));
        let attrs = solution_attributes(tree, &task, &models);
        assert_eq!(attrs.actions, 3);
        assert_eq!(attrs.steps, 4);
    }

    #[test]
    fn expansion_limit_is_a_resource_error() {
        let u = DomainUniverse::synthetic(3);
        let a = ActionModel::from_atoms(&u, "a", &["p1"], &["p2"], &[]).unwrap();
        let b = ActionModel::from_atoms(&u, "b", &["p0"], &["p1"], &[]).unwrap();
        let task = Task::new("t", u.empty_set(), u.set_of(["p2"]).unwrap());
        let cfg = PlannerConfig {
            max_expansions: Some(1),
        };
        let err = bt_expansion(&task, &[a, b], &cfg).unwrap_err();
        assert!(err.is_resource());
        match err {
            Error::ExpansionLimit { context, .. } => assert_eq!(context.expanded_condition_count, 1),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn default_limit_scales_with_universe() {
        let cfg = PlannerConfig::default();
        assert_eq!(cfg.expansion_limit(0), 10);
        assert_eq!(cfg.expansion_limit(2), 90);
        assert_eq!(cfg.expansion_limit(20), 100_000);
    }

    #[test]
    fn oracle_guard() {
        let u = DomainUniverse::synthetic(21);
        let task = Task::new("t", u.empty_set(), u.set_of(["p1"]).unwrap());
        assert!(forward_search_oracle(&task, &[]).unwrap_err().is_resource());
    }
}
