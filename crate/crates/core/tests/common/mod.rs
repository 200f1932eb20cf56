//! Shared helpers for the integration tests.
#![allow(dead_code)]

use std::path::{Path, PathBuf};

use bt_grounding::grounding::GroundingProblem;
use bt_grounding::io::Workspace;
use bt_grounding::proposers::{
    HeuristicProposer, HeuristicRefiner, HeuristicSampler, ModelProposer, ModelRecord, ModelsResponse, Phase,
    ProposalEnv, ProposerRequest, ProposerSet,
};
use bt_grounding::symbolic::ActionModel;
use bt_grounding::Result;

/// Bundled multi-task domains.
pub const DOMAINS: [&str; 8] = ["drawer", "cover", "blocks", "pour", "handover", "storage", "tidy", "cook"];

/// Fixtures whose declared model lacks a precondition atom.
pub const MISSING_PRE: [&str; 3] = ["putin_missing_open", "stack_missing_clear", "lift_missing_partner"];

pub fn domains_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("domains")
}

pub fn tasks_path(name: &str) -> PathBuf {
    let bundled = domains_dir().join(format!("{name}.tasks"));
    if bundled.exists() {
        bundled
    } else {
        domains_dir().join("fixtures").join(format!("{name}.tasks"))
    }
}

pub fn workspace(name: &str) -> Workspace {
    Workspace::load(&tasks_path(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

pub fn problem(ws: &Workspace) -> GroundingProblem {
    ws.domain.problem(ws.taskset.tasks.clone()).unwrap()
}

/// Opens with a fixed set of models, then hands repairs to the heuristic.
pub struct Seeded {
    pub first: Vec<ActionModel>,
}

impl ModelProposer for Seeded {
    fn propose(&self, req: &ProposerRequest, env: &ProposalEnv<'_>) -> Result<ModelsResponse> {
        if req.phase == Phase::InitialProposal {
            let models = self
                .first
                .iter()
                .filter(|h| env.unexplored(h))
                .map(|h| ModelRecord::from_model(h, env.universe))
                .collect();
            return Ok(ModelsResponse { models });
        }
        HeuristicProposer.propose(req, env)
    }
}

/// Heuristic proposers whose first proposal is the domain's declared models.
pub fn seeded_heuristic(ws: &Workspace) -> ProposerSet {
    ProposerSet::new(
        "seeded-heuristic",
        Seeded {
            first: ws.domain.models.clone(),
        },
        HeuristicSampler,
        HeuristicRefiner,
    )
}

pub fn btg() -> PathBuf {
    PathBuf::from(env!("CARGO_BIN_EXE_btg"))
}

/// Runs the CLI in-process; returns (exit code, stdout, stderr).
pub fn cli(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let argv: Vec<String> = std::iter::once("btg").chain(args.iter().copied()).map(String::from).collect();
    let code = bt_grounding::cli::run(argv, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

/// Models matching the hidden policy transitions, named after the policies.
pub fn true_models(ws: &Workspace) -> Vec<ActionModel> {
    let library = ws.domain.library().unwrap();
    ws.domain
        .policies
        .iter()
        .map(|p| {
            let t = library.reveal(&p.id).unwrap();
            ActionModel::new(p.id.clone(), t.pre, t.add, t.del)
        })
        .collect()
}
