//! Proposer interfaces and the records they exchange with the grounding
//! loop.
//!
//! Every request is a plain serializable record with atoms spelled out as
//! text, so built-in proposers see exactly what an external adapter would.
//! Context fields that a run ablates are absent from the record, not empty.

use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::env::{ExecutionContext, PolicyInfo};
use crate::error::{Error, Result};
use crate::grounding::ModelSpace;
use crate::io::render_bt;
use crate::planner::{PlanningContext, Task};
use crate::symbolic::{ActionModel, DomainUniverse, ModelKey, StateSet};

mod exhaustive;
mod external;
mod heuristic;
mod oracle;
mod prompt;
mod random;

pub use exhaustive::{ExhaustiveProposer, ExhaustiveSampler};
pub use external::{ExternalAdapter, ExternalTarget, DEFAULT_TIMEOUT};
pub use heuristic::{tokens, HeuristicProposer, HeuristicRefiner, HeuristicSampler};
pub use oracle::{OracleProposer, OracleSampler};
pub use prompt::{placeholders, render_prompt};
pub use random::{RandomProposer, RandomRefiner, RandomSampler};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    InitialProposal,
    RepairProposal,
    PolicySample,
    Refine,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContextFlags {
    pub planning_contexts: bool,
    pub execution_contexts: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelRecord {
    pub name: String,
    pub pre: Vec<String>,
    pub add: Vec<String>,
    pub del: Vec<String>,
}

impl ModelRecord {
    pub fn from_model(h: &ActionModel, u: &DomainUniverse) -> Self {
        ModelRecord {
            name: h.name.clone(),
            pre: u.atoms(&h.pre),
            add: u.atoms(&h.add),
            del: u.atoms(&h.del),
        }
    }

    pub fn to_model(&self, u: &DomainUniverse) -> Result<ActionModel> {
        if self.name.is_empty() || self.name.chars().any(char::is_whitespace) || self.name.starts_with('{') {
            return Err(Error::Protocol(format!("bad model name `{}`", self.name)));
        }
        if matches!(self.name.as_str(), "?" | "->") {
            return Err(Error::Protocol(format!("bad model name `{}`", self.name)));
        }
        let set = |atoms: &[String]| u.set_of(atoms).map_err(|e| Error::Protocol(e.to_string()));
        Ok(ActionModel::new(self.name.clone(), set(&self.pre)?, set(&self.add)?, set(&self.del)?))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskRecord {
    pub id: String,
    pub init: Vec<String>,
    pub goal: Vec<String>,
}

impl TaskRecord {
    pub fn from_task(t: &Task, u: &DomainUniverse) -> Self {
        TaskRecord {
            id: t.id.clone(),
            init: u.atoms(&t.init),
            goal: u.atoms(&t.goal),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObjectRecord {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
}

/// Planning context of one task.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlanningRecord {
    pub task_id: String,
    pub solved: bool,
    pub expanded_condition_count: usize,
    pub init: Vec<String>,
    pub goal: Vec<String>,
    pub frontier: Vec<Vec<String>>,
    pub sketch: String,
    pub actions_used: Vec<String>,
}

impl PlanningRecord {
    pub fn from_context(ctx: &PlanningContext, task: &Task, u: &DomainUniverse) -> Self {
        PlanningRecord {
            task_id: ctx.task_id.clone(),
            solved: ctx.solved,
            expanded_condition_count: ctx.expanded_condition_count,
            init: u.atoms(&task.init),
            goal: u.atoms(&task.goal),
            frontier: ctx.frontier.iter().map(|c| u.atoms(c)).collect(),
            sketch: render_bt(&ctx.sketch, u),
            actions_used: ctx.actions_used.clone(),
        }
    }
}

/// Execution context of one policy run, with the before/after diff.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExecutionRecord {
    pub attempt: usize,
    pub policy_id: String,
    pub s0: Vec<String>,
    pub s_t: Vec<String>,
    pub expected: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub forbidden: Vec<String>,
    pub added: Vec<String>,
    pub removed: Vec<String>,
    pub succeeded: bool,
    pub ticks_elapsed: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub hyperparameters: BTreeMap<String, String>,
}

impl ExecutionRecord {
    pub fn from_context(ctx: &ExecutionContext, u: &DomainUniverse) -> Self {
        ExecutionRecord {
            attempt: ctx.attempt,
            policy_id: ctx.policy_id.clone(),
            s0: u.atoms(&ctx.s0),
            s_t: u.atoms(&ctx.s_t),
            expected: u.atoms(&ctx.expected),
            forbidden: u.atoms(&ctx.forbidden),
            added: u.atoms(&ctx.s_t.difference(&ctx.s0)),
            removed: u.atoms(&ctx.s0.difference(&ctx.s_t)),
            succeeded: ctx.succeeded,
            ticks_elapsed: ctx.ticks_elapsed,
            note: ctx.note.clone(),
            hyperparameters: ctx.hyperparameters.clone(),
        }
    }
}

/// What is known about the unexplored part of the model space.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpaceDigest {
    pub add_pre_disjoint: bool,
    pub del_subset_pre: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub explicit_models: Option<usize>,
    pub proposed: usize,
    /// Decimal, since the count can exceed 64 bits.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub candidates: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProposalPayload {
    pub tasks: Vec<TaskRecord>,
    pub propositions: Vec<String>,
    pub objects: Vec<ObjectRecord>,
    pub mutex_groups: Vec<Vec<String>>,
    pub space: SpaceDigest,
    pub batch: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failures: Option<Vec<PlanningRecord>>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SamplePayload {
    pub model: ModelRecord,
    pub catalog: Vec<PolicyInfo>,
    pub attempt: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub history: Option<Vec<ExecutionRecord>>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RefinePayload {
    pub model: ModelRecord,
    pub propositions: Vec<String>,
    pub mutex_groups: Vec<Vec<String>>,
    pub space: SpaceDigest,
    pub catalog: Vec<PolicyInfo>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub planning: Option<Vec<PlanningRecord>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub history: Option<Vec<ExecutionRecord>>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Payload {
    Proposal(ProposalPayload),
    Sample(SamplePayload),
    Refine(RefinePayload),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProposerRequest {
    pub phase: Phase,
    pub payload: Payload,
    pub context_flags: ContextFlags,
}

impl ProposerRequest {
    pub fn proposal(&self) -> Result<&ProposalPayload> {
        match &self.payload {
            Payload::Proposal(p) => Ok(p),
            _ => Err(Error::Protocol(format!("{:?} request without a proposal payload", self.phase))),
        }
    }

    pub fn sample(&self) -> Result<&SamplePayload> {
        match &self.payload {
            Payload::Sample(p) => Ok(p),
            _ => Err(Error::Protocol(format!("{:?} request without a sample payload", self.phase))),
        }
    }

    pub fn refine(&self) -> Result<&RefinePayload> {
        match &self.payload {
            Payload::Refine(p) => Ok(p),
            _ => Err(Error::Protocol(format!("{:?} request without a refine payload", self.phase))),
        }
    }

    /// The single-line wire form.
    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("request records always serialize")
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelsResponse {
    pub models: Vec<ModelRecord>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PolicyChoice {
    pub policy_id: String,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub hyperparameters: BTreeMap<String, String>,
}

impl PolicyChoice {
    pub fn id(id: impl Into<String>) -> Self {
        PolicyChoice {
            policy_id: id.into(),
            hyperparameters: BTreeMap::new(),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RefineResponse {
    #[serde(default)]
    pub model: Option<ModelRecord>,
    #[serde(default)]
    pub diagnosis: Vec<String>,
}

/// Engine state a built-in proposer may consult besides the request.
pub struct ProposalEnv<'a> {
    pub universe: &'a DomainUniverse,
    pub space: &'a ModelSpace,
    /// Triples already taken out of the unexplored space.
    pub explored: &'a HashSet<ModelKey>,
    /// Per-call seed derived from the run seed.
    pub seed: u64,
}

impl ProposalEnv<'_> {
    pub fn unexplored(&self, h: &ActionModel) -> bool {
        self.space.contains(h) && !self.explored.contains(&h.key())
    }
}

pub trait ModelProposer: Send + Sync {
    fn propose(&self, req: &ProposerRequest, env: &ProposalEnv<'_>) -> Result<ModelsResponse>;
}

pub trait PolicySampler: Send + Sync {
    fn sample(&self, req: &ProposerRequest, env: &ProposalEnv<'_>) -> Result<PolicyChoice>;
}

pub trait ModelRefiner: Send + Sync {
    fn refine(&self, req: &ProposerRequest, env: &ProposalEnv<'_>) -> Result<RefineResponse>;
}

/// Refiner that never suggests anything.
pub struct NoRefiner;

impl ModelRefiner for NoRefiner {
    fn refine(&self, _req: &ProposerRequest, _env: &ProposalEnv<'_>) -> Result<RefineResponse> {
        Ok(RefineResponse::default())
    }
}

pub struct ProposerSet {
    pub name: String,
    pub proposer: Box<dyn ModelProposer>,
    pub sampler: Box<dyn PolicySampler>,
    pub refiner: Box<dyn ModelRefiner>,
}

impl ProposerSet {
    pub fn new(
        name: impl Into<String>,
        proposer: impl ModelProposer + 'static,
        sampler: impl PolicySampler + 'static,
        refiner: impl ModelRefiner + 'static,
    ) -> Self {
        ProposerSet {
            name: name.into(),
            proposer: Box::new(proposer),
            sampler: Box::new(sampler),
            refiner: Box::new(refiner),
        }
    }

    pub fn exhaustive() -> Self {
        ProposerSet::new("exhaustive", ExhaustiveProposer, ExhaustiveSampler, NoRefiner)
    }

    pub fn heuristic() -> Self {
        ProposerSet::new("heuristic", HeuristicProposer, HeuristicSampler, HeuristicRefiner)
    }

    pub fn random() -> Self {
        ProposerSet::new("random", RandomProposer, RandomSampler, RandomRefiner)
    }

    /// Reads the hidden side of `library`; for tests and reference runs.
    pub fn oracle(library: &crate::env::PolicyLibrary, universe: &DomainUniverse) -> Self {
        ProposerSet::new(
            "oracle",
            OracleProposer::new(library, universe),
            OracleSampler::new(library, universe),
            NoRefiner,
        )
    }

    pub fn external(target: ExternalTarget, timeout: std::time::Duration) -> Result<Self> {
        let adapter = std::sync::Arc::new(ExternalAdapter::connect(target, timeout)?);
        Ok(ProposerSet {
            name: "external".into(),
            proposer: Box::new(adapter.clone()),
            sampler: Box::new(adapter.clone()),
            refiner: Box::new(adapter),
        })
    }
}

/// Parses atom lists from a record, skipping atoms the universe lacks.
pub(crate) fn set_of_known(u: &DomainUniverse, atoms: &[String]) -> StateSet {
    let mut s = u.empty_set();
    for a in atoms {
        if let Some(i) = u.index_of(a) {
            s.insert(i);
        }
    }
    s
}

/// Mutex groups of a record as sets.
pub(crate) fn groups_of(u: &DomainUniverse, groups: &[Vec<String>]) -> Vec<StateSet> {
    groups.iter().map(|g| set_of_known(u, g)).collect()
}
