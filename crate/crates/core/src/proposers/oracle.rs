//! Proposers that read the hidden policy transitions. They exist to give
//! tests and reference runs a known-good answer; real runs never use them.

use crate::env::PolicyLibrary;
use crate::error::{Error, Result};
use crate::proposers::{
    HeuristicSampler, ModelProposer, ModelRecord, ModelsResponse, PolicyChoice, PolicySampler, ProposalEnv,
    ProposerRequest,
};
use crate::symbolic::{ActionModel, DomainUniverse};

fn hidden_models(library: &PolicyLibrary) -> Vec<ActionModel> {
    library
        .ids()
        .map(str::to_string)
        .collect::<Vec<_>>()
        .into_iter()
        .filter_map(|id| {
            let t = library.reveal(&id)?;
            Some(ActionModel::new(id, t.pre, t.add, t.del))
        })
        .collect()
}

/// Proposes exactly the models matching the hidden transitions, in library
/// order, `batch` at a time.
pub struct OracleProposer {
    models: Vec<ActionModel>,
}

impl OracleProposer {
    pub fn new(library: &PolicyLibrary, _universe: &DomainUniverse) -> Self {
        OracleProposer {
            models: hidden_models(library),
        }
    }

    pub fn models(&self) -> &[ActionModel] {
        &self.models
    }
}

impl ModelProposer for OracleProposer {
    fn propose(&self, req: &ProposerRequest, env: &ProposalEnv<'_>) -> Result<ModelsResponse> {
        let batch = req.proposal()?.batch;
        let models = self
            .models
            .iter()
            .filter(|h| env.unexplored(h))
            .take(batch)
            .map(|h| ModelRecord::from_model(h, env.universe))
            .collect();
        Ok(ModelsResponse { models })
    }
}

/// Picks the policy whose hidden transition is the requested model.
pub struct OracleSampler {
    models: Vec<ActionModel>,
}

impl OracleSampler {
    pub fn new(library: &PolicyLibrary, _universe: &DomainUniverse) -> Self {
        OracleSampler {
            models: hidden_models(library),
        }
    }
}

impl PolicySampler for OracleSampler {
    fn sample(&self, req: &ProposerRequest, env: &ProposalEnv<'_>) -> Result<PolicyChoice> {
        let p = req.sample()?;
        let h = p.model.to_model(env.universe)?;
        match self.models.iter().find(|m| m.same_triple(&h)) {
            Some(m) => Ok(PolicyChoice::id(m.name.clone())),
            None if p.catalog.is_empty() => Err(Error::Protocol("empty policy catalog".into())),
            None => HeuristicSampler.sample(req, env),
        }
    }
}
