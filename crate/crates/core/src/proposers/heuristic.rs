//! Context-driven heuristics standing in for a language model.
//!
//! The proposer targets atoms that planning could not reach; the sampler
//! matches policy descriptions against model vocabulary; the refiner reads
//! execution records to find missing preconditions and wrong effects.

use std::collections::HashSet;

use crate::env::NOTE_PRE_UNMET;
use crate::error::{Error, Result};
use crate::proposers::{
    groups_of, set_of_known, ModelProposer, ModelRecord, ModelRefiner, ModelsResponse, Phase, PolicyChoice,
    PolicySampler, ProposalEnv, ProposerRequest, RefineResponse,
};
use crate::symbolic::{is_valid_model, ActionModel, DomainUniverse, StateSet, ValidityRules};

const STOPWORDS: &[&str] = &[
    "a", "an", "and", "as", "by", "for", "from", "is", "it", "its", "of", "or", "so", "that", "the", "this", "to",
    "with",
];

/// Lowercase word pieces of `text`, split at non-alphanumerics and at
/// camel-case boundaries, stopwords dropped, first occurrence kept.
pub fn tokens(text: &str) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    let mut push = |w: &mut String| {
        if !w.is_empty() {
            let lw = w.to_lowercase();
            if !STOPWORDS.contains(&lw.as_str()) && !out.contains(&lw) {
                out.push(lw);
            }
            w.clear();
        }
    };
    let mut word = String::new();
    let mut prev: Option<char> = None;
    for c in text.chars() {
        if !c.is_ascii_alphanumeric() {
            push(&mut word);
        } else {
            if c.is_ascii_uppercase() && prev.is_some_and(|p| p.is_ascii_lowercase() || p.is_ascii_digit()) {
                push(&mut word);
            }
            word.push(c);
        }
        prev = Some(c);
    }
    push(&mut word);
    out
}

fn rules_of(space: &crate::proposers::SpaceDigest, groups: Vec<StateSet>) -> ValidityRules {
    ValidityRules {
        add_pre_disjoint: space.add_pre_disjoint,
        del_subset_pre: space.del_subset_pre,
        mutex_groups: groups,
    }
}

/// Atoms of `s0` sharing an object with some atom of `add`. Propositional
/// atoms (no arguments) relate to everything.
fn related(u: &DomainUniverse, s0: &StateSet, add: &StateSet) -> StateSet {
    let objects = u.objects_of(add);
    if objects.is_empty() {
        return s0.clone();
    }
    let mut out = u.empty_set();
    for i in s0.iter() {
        let args = &u.proposition(i).args;
        if args.is_empty() || args.iter().any(|a| objects.contains(&a.as_str())) {
            out.insert(i);
        }
    }
    out
}

/// Deletes precondition atoms that share a mutex group with an added atom.
/// `None` when the model cannot be made mutex-consistent that way.
fn mutex_fix(mut h: ActionModel, rules: &ValidityRules) -> Option<ActionModel> {
    for g in &rules.mutex_groups {
        if g.intersects(&h.add) {
            let clash = g.intersection(&h.pre).difference(&h.add);
            h.del.union_with(&clash);
        }
    }
    is_valid_model(&h, rules).then_some(h)
}

fn join_atoms(u: &DomainUniverse, s: &StateSet) -> String {
    u.atoms(s).join("+")
}

/// Proposes models that achieve unmet atoms: the goal atoms missing from
/// the initial state, or, when planning contexts are present, the atoms of
/// every frontier condition missing from that task's initial state.
pub struct HeuristicProposer;

impl ModelProposer for HeuristicProposer {
    fn propose(&self, req: &ProposerRequest, env: &ProposalEnv<'_>) -> Result<ModelsResponse> {
        let p = req.proposal()?;
        let u = env.universe;
        let rules = rules_of(&p.space, groups_of(u, &p.mutex_groups));

        // (target condition, initial state)
        let mut targets: Vec<(StateSet, StateSet)> = Vec::new();
        match (&p.failures, req.phase) {
            (Some(failures), Phase::RepairProposal) if !failures.is_empty() => {
                for f in failures {
                    let s0 = set_of_known(u, &f.init);
                    for c in &f.frontier {
                        targets.push((set_of_known(u, c), s0.clone()));
                    }
                }
            }
            _ => {
                for t in &p.tasks {
                    targets.push((set_of_known(u, &t.goal), set_of_known(u, &t.init)));
                }
            }
        }

        let mut candidates: Vec<(usize, ActionModel)> = Vec::new();
        for (c, s0) in &targets {
            let missing = c.difference(s0);
            if missing.is_empty() {
                continue;
            }
            let mut adds = vec![missing.clone()];
            if missing.len() > 1 {
                adds.extend(missing.iter().map(|i| StateSet::from_indices(u.len(), [i])));
            }
            for add in adds {
                let label = join_atoms(u, &add);
                let pre = related(u, s0, &add);
                let variants = [
                    (format!("make_{label}"), pre),
                    (format!("make_{label}_anywhere"), u.empty_set()),
                ];
                for (name, pre) in variants {
                    let h = ActionModel::new(name, pre, add.clone(), u.empty_set());
                    if let Some(h) = mutex_fix(h, &rules) {
                        candidates.push((add.intersection(c).len(), h));
                    }
                }
            }
        }
        candidates.sort_by(|a, b| b.0.cmp(&a.0));
        // Once the direct guesses are used up: one extra precondition atom
        // from outside the initial state.
        if req.phase == Phase::RepairProposal {
            for (c, s0) in &targets {
                let missing = c.difference(s0);
                for x in missing.iter() {
                    let add = StateSet::from_indices(u.len(), [x]);
                    let base = related(u, s0, &add);
                    for y in s0.union(&add).complement().iter() {
                        let label = join_atoms(u, &add);
                        let mut pre = base.clone();
                        pre.insert(y);
                        let name = format!("make_{label}_after_{}", u.proposition(y));
                        if let Some(h) = mutex_fix(ActionModel::new(name, pre, add.clone(), u.empty_set()), &rules) {
                            candidates.push((0, h));
                        }
                    }
                }
            }
        }
        let mut seen = HashSet::new();
        let models = candidates
            .into_iter()
            .map(|(_, h)| h)
            .filter(|h| env.unexplored(h) && seen.insert(h.key()))
            .take(p.batch)
            .map(|h| ModelRecord::from_model(&h, u))
            .collect();
        Ok(ModelsResponse { models })
    }
}

/// Picks the policy whose id and description share the most vocabulary
/// with the model. With execution history it moves on from policies that
/// already failed this model.
pub struct HeuristicSampler;

impl HeuristicSampler {
    fn score(model: &ModelRecord, id: &str, description: &str) -> usize {
        let mut vocab = tokens(id);
        for t in tokens(description) {
            if !vocab.contains(&t) {
                vocab.push(t);
            }
        }
        let mut score = 0;
        for atom in model.add.iter().chain(&model.del) {
            let (pred, args) = atom.split_once('(').unwrap_or((atom, ""));
            score += 4 * tokens(pred).iter().filter(|t| vocab.contains(t)).count();
            score += 2 * tokens(args).iter().filter(|t| vocab.contains(t)).count();
        }
        score + tokens(&model.name).iter().filter(|t| vocab.contains(t)).count()
    }
}

impl PolicySampler for HeuristicSampler {
    fn sample(&self, req: &ProposerRequest, _env: &ProposalEnv<'_>) -> Result<PolicyChoice> {
        let p = req.sample()?;
        if p.catalog.is_empty() {
            return Err(Error::Protocol("empty policy catalog".into()));
        }
        let history = p.history.as_deref().unwrap_or(&[]);
        let ranked = |exclude_tried: bool| {
            p.catalog
                .iter()
                .filter(|c| !exclude_tried || !history.iter().any(|r| r.policy_id == c.id))
                .map(|c| {
                    let runs = history.iter().filter(|r| r.policy_id == c.id).count();
                    let unmet = history
                        .iter()
                        .filter(|r| r.policy_id == c.id && r.note.as_deref() == Some(NOTE_PRE_UNMET))
                        .count();
                    let base = Self::score(&p.model, &c.id, &c.description) as i64;
                    let penalty = if runs > 0 { (8 * unmet / runs) as i64 } else { 0 };
                    (base - penalty, c)
                })
                .fold(None::<(i64, &crate::env::PolicyInfo)>, |best, cand| match best {
                    Some(b) if b.0 >= cand.0 => Some(b),
                    _ => Some(cand),
                })
        };
        let pick = ranked(true).or_else(|| ranked(false)).expect("catalog is nonempty");
        Ok(PolicyChoice::id(pick.1.id.clone()))
    }
}

/// Reads execution records of a failed model and patches it.
pub struct HeuristicRefiner;

struct Run {
    policy: String,
    s0: StateSet,
    s_t: StateSet,
    executed: bool,
    unmet: bool,
}

impl ModelRefiner for HeuristicRefiner {
    fn refine(&self, req: &ProposerRequest, env: &ProposalEnv<'_>) -> Result<RefineResponse> {
        let p = req.refine()?;
        let u = env.universe;
        let Some(history) = &p.history else {
            return Ok(RefineResponse {
                model: None,
                diagnosis: vec!["no execution context; nothing to refine from".into()],
            });
        };
        let h = p.model.to_model(u)?;
        let rules = rules_of(&p.space, groups_of(u, &p.mutex_groups));
        let runs: Vec<Run> = history
            .iter()
            .map(|r| Run {
                policy: r.policy_id.clone(),
                s0: set_of_known(u, &r.s0),
                s_t: set_of_known(u, &r.s_t),
                executed: r.note.is_none(),
                unmet: r.note.as_deref() == Some(NOTE_PRE_UNMET),
            })
            .collect();
        let (h2, diagnosis) = diagnose(&h, &runs, u, &rules);
        let model = h2.map(|m| ModelRecord::from_model(&m, u));
        Ok(RefineResponse { model, diagnosis })
    }
}

/// The policy whose runs best explain the model: most runs producing a
/// declared add atom, then most runs that executed at all.
fn focus_policy(h: &ActionModel, runs: &[Run]) -> Option<String> {
    let mut order: Vec<&str> = Vec::new();
    for r in runs {
        if !order.contains(&r.policy.as_str()) {
            order.push(&r.policy);
        }
    }
    let mut best: Option<(usize, usize, &str)> = None;
    for id in order {
        let executed: Vec<&Run> = runs.iter().filter(|r| r.policy == id && r.executed).collect();
        if executed.is_empty() {
            continue;
        }
        let producing = executed
            .iter()
            .filter(|r| r.s_t.difference(&r.s0).intersects(&h.add))
            .count();
        let key = (producing, executed.len(), id);
        if best.is_none_or(|b| (key.0, key.1) > (b.0, b.1)) {
            best = Some(key);
        }
    }
    best.map(|b| b.2.to_string())
}

fn note(notes: &mut Vec<String>, text: String) {
    if !notes.contains(&text) {
        notes.push(text);
    }
}

fn diagnose(h: &ActionModel, runs: &[Run], u: &DomainUniverse, rules: &ValidityRules) -> (Option<ActionModel>, Vec<String>) {
    let mut notes = Vec::new();
    let Some(policy) = focus_policy(h, runs) else {
        notes.push("no policy ever executed; the missing precondition cannot be located".into());
        return (None, notes);
    };
    notes.push(format!("diagnosed against policy `{policy}`"));
    let executed: Vec<&Run> = runs.iter().filter(|r| r.policy == policy && r.executed).collect();
    let unmet: Vec<&Run> = runs.iter().filter(|r| r.policy == policy && r.unmet).collect();

    // Missing preconditions: atoms present in every executed start state,
    // chosen greedily so every refused start state lacks one of them.
    let mut common = executed[0].s0.clone();
    for r in &executed[1..] {
        common = common.intersection(&r.s0);
    }
    let candidates = common.difference(&h.pre).difference(&h.add);
    let mut missing = u.empty_set();
    let mut uncovered: Vec<&&Run> = unmet.iter().collect();
    while !uncovered.is_empty() {
        let best = candidates
            .difference(&missing)
            .iter()
            .map(|i| (uncovered.iter().filter(|r| !r.s0.contains(i)).count(), i))
            .filter(|&(n, _)| n > 0)
            .fold(None::<(usize, usize)>, |b, c| match b {
                Some(b) if b.0 >= c.0 => Some(b),
                _ => Some(c),
            });
        let Some((_, i)) = best else { break };
        missing.insert(i);
        uncovered.retain(|r| r.s0.contains(i));
    }
    if !uncovered.is_empty() {
        notes.push(format!(
            "{} refused runs not explained by any atom common to executed runs",
            uncovered.len()
        ));
    }
    for i in missing.iter() {
        notes.push(format!("missing precondition {}", u.proposition(i)));
    }

    let pre = h.pre.union(&missing);
    let mut add = h.add.clone();
    let mut del = h.del.clone();
    for r in &executed {
        for i in add.difference(&r.s_t).iter() {
            note(&mut notes, format!("unverified add {}", u.proposition(i)));
            add.remove(i);
        }
        for i in pre.difference(&del).difference(&r.s_t).iter() {
            note(&mut notes, format!("undeclared delete {}", u.proposition(i)));
            del.insert(i);
        }
        for i in h.del.intersection(&r.s_t).iter() {
            if del.contains(i) {
                note(&mut notes, format!("declared delete {} not performed", u.proposition(i)));
                del.remove(i);
            }
        }
        for i in r.s0.difference(&r.s_t).difference(&pre).iter() {
            note(&mut notes, format!("stale delete {} outside the precondition", u.proposition(i)));
        }
    }
    // atoms every executed run ends with and at least one run produced
    let others = h.add.union(&pre).complement();
    for i in others.iter() {
        if executed.iter().all(|r| r.s_t.contains(i)) && executed.iter().any(|r| !r.s0.contains(i)) {
            note(&mut notes, format!("unexpected add {}", u.proposition(i)));
            add.insert(i);
        }
    }
    if add.is_empty() {
        notes.push("no declared effect survives; dropping the model".into());
        return (None, notes);
    }
    let name = if add == h.add {
        h.name.clone()
    } else {
        format!("make_{}", join_atoms(u, &add))
    };
    let refined = ActionModel::new(name, pre, add, del);
    let Some(refined) = mutex_fix(refined, rules) else {
        notes.push("refined model violates the validity rules".into());
        return (None, notes);
    };
    if refined.same_triple(h) {
        notes.push("executions agree with the model; no change".into());
        return (None, notes);
    }
    (Some(refined), notes)
}
