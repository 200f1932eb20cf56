//! Uniformly random proposers, the floor every other proposer should beat.

use std::collections::HashSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::grounding::canonical_name;
use crate::proposers::{
    ModelProposer, ModelRecord, ModelRefiner, ModelsResponse, PolicyChoice, PolicySampler, ProposalEnv,
    ProposerRequest, RefineResponse,
};
use crate::symbolic::{ActionModel, StateSet};

const TRIES_PER_MODEL: usize = 200;

fn random_model(width: usize, rng: &mut ChaCha8Rng) -> ActionModel {
    let mut pre = StateSet::empty(width);
    let mut add = StateSet::empty(width);
    let mut del = StateSet::empty(width);
    for i in 0..width {
        if rng.gen_bool(0.25) {
            pre.insert(i);
            if rng.gen_bool(0.3) {
                del.insert(i);
            }
        } else if rng.gen_bool(0.2) {
            add.insert(i);
        }
    }
    let mut h = ActionModel::new("", pre, add, del);
    h.name = canonical_name(&h);
    h
}

pub struct RandomProposer;

impl ModelProposer for RandomProposer {
    fn propose(&self, req: &ProposerRequest, env: &ProposalEnv<'_>) -> Result<ModelsResponse> {
        let batch = req.proposal()?.batch;
        let mut rng = ChaCha8Rng::seed_from_u64(env.seed);
        let mut seen = HashSet::new();
        let mut models = Vec::new();
        for _ in 0..batch * TRIES_PER_MODEL {
            if models.len() == batch {
                break;
            }
            let h = match env.space.explicit_models() {
                Some(list) if list.is_empty() => break,
                Some(list) => list[rng.gen_range(0..list.len())].clone(),
                None => random_model(env.universe.len(), &mut rng),
            };
            if !h.add.is_empty() && env.unexplored(&h) && seen.insert(h.key()) {
                models.push(ModelRecord::from_model(&h, env.universe));
            }
        }
        Ok(ModelsResponse { models })
    }
}

pub struct RandomSampler;

impl PolicySampler for RandomSampler {
    fn sample(&self, req: &ProposerRequest, env: &ProposalEnv<'_>) -> Result<PolicyChoice> {
        let p = req.sample()?;
        if p.catalog.is_empty() {
            return Err(Error::Protocol("empty policy catalog".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(env.seed);
        Ok(PolicyChoice::id(p.catalog[rng.gen_range(0..p.catalog.len())].id.clone()))
    }
}

/// Flips one random atom of the precondition.
pub struct RandomRefiner;

impl ModelRefiner for RandomRefiner {
    fn refine(&self, req: &ProposerRequest, env: &ProposalEnv<'_>) -> Result<RefineResponse> {
        let p = req.refine()?;
        let h = p.model.to_model(env.universe)?;
        let mut rng = ChaCha8Rng::seed_from_u64(env.seed);
        for _ in 0..TRIES_PER_MODEL {
            let i = rng.gen_range(0..h.width());
            let mut h2 = h.clone();
            if h2.pre.contains(i) {
                h2.pre.remove(i);
                h2.del.remove(i);
            } else {
                h2.pre.insert(i);
                h2.add.remove(i);
            }
            if !h2.add.is_empty() && env.unexplored(&h2) {
                return Ok(RefineResponse {
                    model: Some(ModelRecord::from_model(&h2, env.universe)),
                    diagnosis: vec![format!("flipped {} in the precondition", env.universe.proposition(i))],
                });
            }
        }
        Ok(RefineResponse::default())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grounding::ModelSpace;
    use crate::proposers::{ContextFlags, Payload, Phase, ProposalPayload, SpaceDigest};
    use crate::symbolic::{is_valid_model, DomainUniverse, ModelKey, ValidityRules};

    fn request(batch: usize) -> ProposerRequest {
        ProposerRequest {
            phase: Phase::InitialProposal,
            payload: Payload::Proposal(ProposalPayload {
                tasks: Vec::new(),
                propositions: Vec::new(),
                objects: Vec::new(),
                mutex_groups: Vec::new(),
                space: SpaceDigest {
                    add_pre_disjoint: true,
                    del_subset_pre: true,
                    explicit_models: None,
                    proposed: 0,
                    candidates: None,
                },
                batch,
                failures: None,
            }),
            context_flags: ContextFlags::default(),
        }
    }

    #[test]
    fn proposals_are_valid_fresh_and_seeded() {
        let u = DomainUniverse::synthetic(6);
        let space = ModelSpace::intensional(6, ValidityRules::default());
        let mut explored: HashSet<ModelKey> = HashSet::new();
        let first = {
            let env = ProposalEnv {
                universe: &u,
                space: &space,
                explored: &explored,
                seed: 7,
            };
            RandomProposer.propose(&request(5), &env).unwrap().models
        };
        assert_eq!(first.len(), 5);
        for rec in &first {
            let h = rec.to_model(&u).unwrap();
            assert!(is_valid_model(&h, space.rules()));
            assert!(!h.add.is_empty());
            explored.insert(h.key());
        }
        let env = ProposalEnv {
            universe: &u,
            space: &space,
            explored: &explored,
            seed: 7,
        };
        let second = RandomProposer.propose(&request(5), &env).unwrap().models;
        for rec in &second {
            assert!(!explored.contains(&rec.to_model(&u).unwrap().key()));
        }
        let empty = HashSet::new();
        let env = ProposalEnv {
            universe: &u,
            space: &space,
            explored: &empty,
            seed: 7,
        };
        assert_eq!(RandomProposer.propose(&request(5), &env).unwrap().models, first);
    }
}
