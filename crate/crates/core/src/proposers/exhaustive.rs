//! Canonical-order enumeration of the unexplored model space.

use crate::error::{Error, Result};
use crate::proposers::{
    ModelProposer, ModelRecord, ModelsResponse, PolicyChoice, PolicySampler, ProposalEnv, ProposerRequest,
};

/// Proposes the next `batch` unexplored models in canonical order. Ignores
/// all context, so repeated calls cover the whole space.
pub struct ExhaustiveProposer;

impl ModelProposer for ExhaustiveProposer {
    fn propose(&self, req: &ProposerRequest, env: &ProposalEnv<'_>) -> Result<ModelsResponse> {
        let batch = req.proposal()?.batch;
        let models = env
            .space
            .iter()
            .filter(|h| !env.explored.contains(&h.key()))
            .take(batch)
            .map(|h| ModelRecord::from_model(&h, env.universe))
            .collect();
        Ok(ModelsResponse { models })
    }
}

/// Tries the catalog in order, one policy per attempt.
pub struct ExhaustiveSampler;

impl PolicySampler for ExhaustiveSampler {
    fn sample(&self, req: &ProposerRequest, _env: &ProposalEnv<'_>) -> Result<PolicyChoice> {
        let p = req.sample()?;
        if p.catalog.is_empty() {
            return Err(Error::Protocol("empty policy catalog".into()));
        }
        Ok(PolicyChoice::id(p.catalog[p.attempt % p.catalog.len()].id.clone()))
    }
}
