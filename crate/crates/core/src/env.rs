//! Simulated symbolic environment.
//!
//! Policies carry a hidden STRIPS triple plus a duration and a stochastic
//! failure mode. Nothing outside this module reads the hidden triple except
//! through [`PolicyLibrary::reveal`], which is counted so a run can prove it
//! never looked.

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicUsize, Ordering};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::symbolic::{tick_unchecked, ActionModel, BtNode, BtStatus, StateSet};

/// Mixes `parts` into `master` (splitmix64 finalizer per part). Every
/// random stream in a run is derived this way so runs replay exactly.
pub fn derive_seed(master: u64, parts: &[u64]) -> u64 {
    fn mix(mut z: u64) -> u64 {
        z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^ (z >> 31)
    }
    parts.iter().fold(mix(master), |acc, &p| mix(acc ^ mix(p)))
}

/// The true transition of a policy.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HiddenTransition {
    pub pre: StateSet,
    pub add: StateSet,
    pub del: StateSet,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ControlPolicy {
    pub id: String,
    pub description: String,
    hidden: HiddenTransition,
    pub duration_ticks: u32,
    pub failure_prob: f64,
    failure_add: StateSet,
    failure_del: StateSet,
}

impl ControlPolicy {
    pub fn new(
        id: impl Into<String>,
        description: impl Into<String>,
        pre: StateSet,
        add: StateSet,
        del: StateSet,
    ) -> Result<Self> {
        let id = id.into();
        if !pre.same_universe(&add) || !pre.same_universe(&del) {
            return Err(Error::domain(format!("policy `{id}` mixes universes")));
        }
        if add.intersects(&del) {
            return Err(Error::domain(format!("policy `{id}` adds and deletes the same atom")));
        }
        let width = pre.width();
        Ok(ControlPolicy {
            id,
            description: description.into(),
            hidden: HiddenTransition { pre, add, del },
            duration_ticks: 1,
            failure_prob: 0.0,
            failure_add: StateSet::empty(width),
            failure_del: StateSet::empty(width),
        })
    }

    /// A policy that realizes `h` exactly.
    pub fn matching(h: &ActionModel, id: impl Into<String>, description: impl Into<String>) -> Self {
        ControlPolicy::new(id, description, h.pre.clone(), h.add.clone(), h.del.clone())
            .expect("action models keep add and del disjoint")
    }

    pub fn with_duration(mut self, ticks: u32) -> Result<Self> {
        if ticks == 0 {
            return Err(Error::domain(format!("policy `{}` needs a positive duration", self.id)));
        }
        self.duration_ticks = ticks;
        Ok(self)
    }

    /// Stochastic failure with probability `prob`; a failed run applies
    /// `add`/`del` to the starting state (both empty: world unchanged).
    pub fn with_failure(mut self, prob: f64, add: StateSet, del: StateSet) -> Result<Self> {
        if !(0.0..=1.0).contains(&prob) {
            return Err(Error::domain(format!(
                "policy `{}` failure probability {prob} outside [0, 1]",
                self.id
            )));
        }
        if add.width() != self.width() || del.width() != self.width() {
            return Err(Error::domain(format!("policy `{}` failure effect width", self.id)));
        }
        if add.intersects(&del) {
            return Err(Error::domain(format!(
                "policy `{}` failure effect adds and deletes the same atom",
                self.id
            )));
        }
        self.failure_prob = prob;
        self.failure_add = add;
        self.failure_del = del;
        Ok(self)
    }

    pub fn width(&self) -> usize {
        self.hidden.pre.width()
    }

    pub(crate) fn hidden(&self) -> &HiddenTransition {
        &self.hidden
    }

    pub(crate) fn failure_effect(&self) -> (&StateSet, &StateSet) {
        (&self.failure_add, &self.failure_del)
    }
}

/// What proposers may know about a policy.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PolicyInfo {
    pub id: String,
    pub description: String,
}

#[derive(Debug, Default)]
pub struct PolicyLibrary {
    policies: Vec<ControlPolicy>,
    reveals: AtomicUsize,
}

impl Clone for PolicyLibrary {
    fn clone(&self) -> Self {
        PolicyLibrary {
            policies: self.policies.clone(),
            reveals: AtomicUsize::new(self.reveals()),
        }
    }
}

impl PartialEq for PolicyLibrary {
    fn eq(&self, other: &Self) -> bool {
        self.policies == other.policies
    }
}

impl PolicyLibrary {
    pub fn new(policies: Vec<ControlPolicy>) -> Result<Self> {
        for (i, p) in policies.iter().enumerate() {
            if policies[..i].iter().any(|q| q.id == p.id) {
                return Err(Error::domain(format!("duplicate policy id `{}`", p.id)));
            }
        }
        Ok(PolicyLibrary {
            policies,
            reveals: AtomicUsize::new(0),
        })
    }

    pub fn len(&self) -> usize {
        self.policies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.policies.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.policies.iter().map(|p| p.id.as_str())
    }

    pub fn contains(&self, id: &str) -> bool {
        self.policies.iter().any(|p| p.id == id)
    }

    pub fn catalog(&self) -> Vec<PolicyInfo> {
        self.policies
            .iter()
            .map(|p| PolicyInfo {
                id: p.id.clone(),
                description: p.description.clone(),
            })
            .collect()
    }

    pub(crate) fn get(&self, id: &str) -> Result<&ControlPolicy> {
        self.policies
            .iter()
            .find(|p| p.id == id)
            .ok_or_else(|| Error::domain(format!("unknown policy id `{id}`")))
    }

    pub(crate) fn policies(&self) -> &[ControlPolicy] {
        &self.policies
    }

    /// Hidden triple of a policy. Only test oracles should call this; every
    /// call is counted.
    pub fn reveal(&self, id: &str) -> Option<HiddenTransition> {
        self.reveals.fetch_add(1, Ordering::Relaxed);
        self.policies.iter().find(|p| p.id == id).map(|p| p.hidden.clone())
    }

    pub fn reveals(&self) -> usize {
        self.reveals.load(Ordering::Relaxed)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CheckMode {
    /// `s_t ⊇ pre ∪ add ∖ del` only.
    #[default]
    Literal,
    /// Also requires `s_t ∩ del = ∅`, and the first trial starts from
    /// exactly `pre(h)`.
    Strict,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnvConfig {
    pub fill_prob: f64,
    pub mode: CheckMode,
}

impl Default for EnvConfig {
    fn default() -> Self {
        EnvConfig {
            fill_prob: 0.5,
            mode: CheckMode::Literal,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Scenario {
    pub s0: StateSet,
    pub seed: u64,
}

/// Atoms a consistent run must end with, and atoms it must not.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Expectation {
    pub expected: StateSet,
    pub forbidden: StateSet,
}

impl Expectation {
    pub fn for_model(h: &ActionModel, mode: CheckMode) -> Self {
        Expectation {
            expected: h.expected_outcome(),
            forbidden: match mode {
                CheckMode::Literal => StateSet::empty(h.width()),
                CheckMode::Strict => h.del.clone(),
            },
        }
    }

    /// Accepts every outcome.
    pub fn none(width: usize) -> Self {
        Expectation {
            expected: StateSet::empty(width),
            forbidden: StateSet::empty(width),
        }
    }

    pub fn met_by(&self, s_t: &StateSet) -> bool {
        self.expected.is_subset(s_t) && self.forbidden.is_disjoint(s_t)
    }
}

pub const NOTE_PRE_UNMET: &str = "precondition unmet at tick 0";
pub const NOTE_STOCHASTIC: &str = "stochastic failure";

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ExecutionContext {
    pub attempt: usize,
    pub policy_id: String,
    pub s0: StateSet,
    pub s_t: StateSet,
    pub expected: StateSet,
    pub forbidden: StateSet,
    pub succeeded: bool,
    pub ticks_elapsed: u32,
    pub note: Option<String>,
    pub hyperparameters: BTreeMap<String, String>,
}

impl ExecutionContext {
    pub fn precondition_unmet(&self) -> bool {
        self.note.as_deref() == Some(NOTE_PRE_UNMET)
    }
}

/// `s_t ⊇ pre(h) ∪ add(h) ∖ del(h)`.
pub fn check_consistency_outcome(h: &ActionModel, s_t: &StateSet) -> bool {
    h.expected_outcome().is_subset(s_t)
}

/// Draws `s0 ⊇ pre(h)`: every other atom is included with probability
/// `fill_prob`, then each mutex group keeps its `pre(h)` member if it has
/// one, otherwise its lowest-index member.
pub fn sample_scenario(
    h: &ActionModel,
    mutex_groups: &[StateSet],
    fill_prob: f64,
    seed: u64,
) -> Result<Scenario> {
    if !(0.0..=1.0).contains(&fill_prob) {
        return Err(Error::domain(format!("fill probability {fill_prob} outside [0, 1]")));
    }
    for g in mutex_groups {
        if g.intersection(&h.pre).len() > 1 {
            return Err(Error::UnsatisfiableScenario(format!(
                "precondition of `{}` holds two atoms of one mutex group",
                h.name
            )));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut s0 = h.pre.clone();
    for i in 0..h.width() {
        if !h.pre.contains(i) && rng.gen_bool(fill_prob) {
            s0.insert(i);
        }
    }
    for g in mutex_groups {
        let present = g.intersection(&s0);
        if present.len() <= 1 {
            continue;
        }
        let keep = present
            .iter()
            .find(|&i| h.pre.contains(i))
            .or_else(|| present.iter().next())
            .expect("nonempty");
        for i in present.iter() {
            if i != keep {
                s0.remove(i);
            }
        }
    }
    Ok(Scenario { s0, seed })
}

/// One step of a closed-loop execution.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TraceStep {
    pub tick: usize,
    pub state: StateSet,
    pub status: BtStatus,
    pub active: Option<String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TraceOutcome {
    Success,
    Failure,
    BudgetExhausted,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Trace {
    pub steps: Vec<TraceStep>,
    pub outcome: TraceOutcome,
    pub final_state: StateSet,
    pub policy_runs: usize,
}

impl Trace {
    pub fn complete(&self) -> bool {
        self.outcome != TraceOutcome::BudgetExhausted
    }
}

/// The environment of one episode: the policy library plus the domain's
/// mutex groups.
#[derive(Clone, Debug)]
pub struct SimEnv {
    width: usize,
    mutex_groups: Vec<StateSet>,
    library: PolicyLibrary,
    pub cfg: EnvConfig,
}

impl SimEnv {
    pub fn new(width: usize, mutex_groups: Vec<StateSet>, library: PolicyLibrary, cfg: EnvConfig) -> Result<Self> {
        if mutex_groups.iter().any(|g| g.width() != width)
            || library.policies().iter().any(|p| p.width() != width)
        {
            return Err(Error::domain("environment mixes universes"));
        }
        if !(0.0..=1.0).contains(&cfg.fill_prob) {
            return Err(Error::domain(format!("fill probability {} outside [0, 1]", cfg.fill_prob)));
        }
        Ok(SimEnv {
            width,
            mutex_groups,
            library,
            cfg,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn library(&self) -> &PolicyLibrary {
        &self.library
    }

    pub fn mutex_groups(&self) -> &[StateSet] {
        &self.mutex_groups
    }

    pub fn sample_scenario(&self, h: &ActionModel, seed: u64) -> Result<Scenario> {
        sample_scenario(h, &self.mutex_groups, self.cfg.fill_prob, seed)
    }

    /// Runs a policy from `s0` and judges the outcome against `expect`.
    pub fn execute(
        &self,
        policy_id: &str,
        s0: &StateSet,
        expect: &Expectation,
        seed: u64,
        attempt: usize,
        hyperparameters: &BTreeMap<String, String>,
    ) -> Result<(StateSet, ExecutionContext)> {
        let policy = self.library.get(policy_id)?;
        if s0.width() != self.width {
            return Err(Error::domain("scenario from a different universe"));
        }
        let hidden = policy.hidden();
        let (s_t, ticks, note) = if !hidden.pre.is_subset(s0) {
            (s0.clone(), 0, Some(NOTE_PRE_UNMET.to_string()))
        } else {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            if policy.failure_prob > 0.0 && rng.gen_bool(policy.failure_prob) {
                let (fa, fd) = policy.failure_effect();
                let s = s0.union(fa).difference(fd);
                (s, policy.duration_ticks, Some(NOTE_STOCHASTIC.to_string()))
            } else {
                let s = s0.union(&hidden.add).difference(&hidden.del);
                (s, policy.duration_ticks, None)
            }
        };
        let ctx = ExecutionContext {
            attempt,
            policy_id: policy_id.to_string(),
            s0: s0.clone(),
            s_t: s_t.clone(),
            expected: expect.expected.clone(),
            forbidden: expect.forbidden.clone(),
            succeeded: expect.met_by(&s_t),
            ticks_elapsed: ticks,
            note,
            hyperparameters: hyperparameters.clone(),
        };
        Ok((s_t, ctx))
    }

    /// Runs `k` scenario/execute/check cycles of `policy_id` against `h`
    /// and keeps every context. In strict mode the first trial starts from
    /// exactly `pre(h)`.
    pub fn validate_consistency(
        &self,
        h: &ActionModel,
        policy_id: &str,
        k: usize,
        seed: u64,
        hyperparameters: &BTreeMap<String, String>,
    ) -> Result<(bool, Vec<ExecutionContext>)> {
        if k == 0 {
            return Err(Error::domain("consistency validation needs at least one trial"));
        }
        if h.width() != self.width {
            return Err(Error::domain(format!("model `{}` from a different universe", h.name)));
        }
        let expect = Expectation::for_model(h, self.cfg.mode);
        let mut all = true;
        let mut contexts = Vec::with_capacity(k);
        for trial in 0..k {
            let scenario_seed = derive_seed(seed, &[trial as u64, 0]);
            let s0 = if trial == 0 && self.cfg.mode == CheckMode::Strict {
                self.sample_scenario(h, scenario_seed)?;
                h.pre.clone()
            } else {
                self.sample_scenario(h, scenario_seed)?.s0
            };
            let run_seed = derive_seed(seed, &[trial as u64, 1]);
            let (_, ctx) = self.execute(policy_id, &s0, &expect, run_seed, trial, hyperparameters)?;
            all &= ctx.succeeded;
            contexts.push(ctx);
        }
        Ok((all, contexts))
    }

    /// Closed-loop execution of `tree` with every action bound to a policy.
    /// Each running action runs its policy to completion before the next
    /// tick.
    pub fn execute_bt(
        &self,
        tree: &BtNode,
        s0: &StateSet,
        bindings: &BTreeMap<String, String>,
        tick_budget: usize,
        seed: u64,
    ) -> Result<Trace> {
        if !tree.is_well_formed() {
            return Err(Error::domain("control node without children"));
        }
        for id in tree.action_ids() {
            let policy = bindings
                .get(id)
                .ok_or_else(|| Error::domain(format!("action `{id}` has no bound policy")))?;
            self.library.get(policy)?;
        }
        for c in tree.conditions() {
            if c.width() != self.width {
                return Err(Error::domain("condition from a different universe"));
            }
        }
        let no_hyper = BTreeMap::new();
        let anything = Expectation::none(self.width);
        let mut s = s0.clone();
        let mut steps = Vec::new();
        let mut policy_runs = 0;
        for t in 0..tick_budget {
            let (status, active) = tick_unchecked(tree, &s);
            steps.push(TraceStep {
                tick: t,
                state: s.clone(),
                status,
                active: active.map(str::to_string),
            });
            match (status, active) {
                (BtStatus::Success, _) => {
                    return Ok(Trace {
                        steps,
                        outcome: TraceOutcome::Success,
                        final_state: s,
                        policy_runs,
                    })
                }
                (BtStatus::Running, Some(id)) => {
                    let run_seed = derive_seed(seed, &[t as u64]);
                    let (next, _) = self.execute(&bindings[id], &s, &anything, run_seed, t, &no_hyper)?;
                    policy_runs += 1;
                    s = next;
                }
                _ => {
                    return Ok(Trace {
                        steps,
                        outcome: TraceOutcome::Failure,
                        final_state: s,
                        policy_runs,
                    })
                }
            }
        }
        Ok(Trace {
            steps,
            outcome: TraceOutcome::BudgetExhausted,
            final_state: s,
            policy_runs,
        })
    }
}
