//! The model space H_P and its canonical enumeration.

use crate::error::{Error, Result};
use crate::symbolic::{is_valid_model, ActionModel, StateSet, ValidityRules};

/// Walks `(pre, add, del)` triples in canonical-index order: `pre` as a
/// binary counter, then one ternary digit per atom (none/add/del) with
/// atom 0 changing fastest. Positions skip digits that `restrict` would
/// reject outright; mutex groups are not applied here.
#[derive(Clone, Debug)]
pub struct CanonicalIter {
    width: usize,
    add_pre_disjoint: bool,
    del_subset_pre: bool,
    pre: StateSet,
    allowed: Vec<Vec<u8>>,
    cursor: Vec<usize>,
    done: bool,
}

impl CanonicalIter {
    pub fn new(width: usize, restrict: Option<&ValidityRules>) -> Self {
        let (apd, dsp) = restrict.map_or((false, false), |r| (r.add_pre_disjoint, r.del_subset_pre));
        let mut it = CanonicalIter {
            width,
            add_pre_disjoint: apd,
            del_subset_pre: dsp,
            pre: StateSet::empty(width),
            allowed: Vec::new(),
            cursor: vec![0; width],
            done: false,
        };
        it.reset_digits();
        it
    }

    fn reset_digits(&mut self) {
        self.allowed = (0..self.width)
            .map(|i| {
                let in_pre = self.pre.contains(i);
                let mut d = vec![0u8];
                if !(self.add_pre_disjoint && in_pre) {
                    d.push(1);
                }
                if !(self.del_subset_pre && !in_pre) {
                    d.push(2);
                }
                d
            })
            .collect();
        self.cursor.iter_mut().for_each(|c| *c = 0);
    }

    fn current(&self) -> ActionModel {
        let mut add = StateSet::empty(self.width);
        let mut del = StateSet::empty(self.width);
        for i in 0..self.width {
            match self.allowed[i][self.cursor[i]] {
                1 => add.insert(i),
                2 => del.insert(i),
                _ => {}
            }
        }
        let mut h = ActionModel::new("", self.pre.clone(), add, del);
        h.name = canonical_name(&h);
        h
    }

    fn advance(&mut self) {
        for i in 0..self.width {
            if self.cursor[i] + 1 < self.allowed[i].len() {
                self.cursor[i] += 1;
                return;
            }
            self.cursor[i] = 0;
        }
        if self.pre.increment() {
            self.reset_digits();
        } else {
            self.done = true;
        }
    }
}

impl Iterator for CanonicalIter {
    type Item = ActionModel;

    fn next(&mut self) -> Option<ActionModel> {
        if self.done {
            return None;
        }
        let h = self.current();
        self.advance();
        Some(h)
    }
}

/// `h<index>` from the canonical enumeration; `h?<fingerprint>` when the
/// index is undefined.
pub fn canonical_name(h: &ActionModel) -> String {
    match h.canonical_index() {
        Some(i) => format!("h{i}"),
        None => format!("h?{:016x}", h.fingerprint()),
    }
}

/// `2^n · 3^n`, the number of triples with disjoint add and del lists.
pub fn candidate_count(width: usize) -> Option<u128> {
    2u128.checked_pow(width as u32)?.checked_mul(3u128.checked_pow(width as u32)?)
}

/// H_P: every model valid under the rules, or an explicit list of them.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ModelSpace {
    width: usize,
    rules: ValidityRules,
    explicit: Option<Vec<ActionModel>>,
}

impl ModelSpace {
    pub fn intensional(width: usize, rules: ValidityRules) -> Self {
        ModelSpace {
            width,
            rules,
            explicit: None,
        }
    }

    pub fn explicit(width: usize, rules: ValidityRules, models: Vec<ActionModel>) -> Result<Self> {
        for h in &models {
            if h.width() != width {
                return Err(Error::domain(format!("model `{}` from a different universe", h.name)));
            }
            if !is_valid_model(h, &rules) {
                return Err(Error::domain(format!("model `{}` violates the validity rules", h.name)));
            }
        }
        Ok(ModelSpace {
            width,
            rules,
            explicit: Some(models),
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn rules(&self) -> &ValidityRules {
        &self.rules
    }

    pub fn explicit_models(&self) -> Option<&[ActionModel]> {
        self.explicit.as_deref()
    }

    pub fn contains(&self, h: &ActionModel) -> bool {
        h.width() == self.width
            && is_valid_model(h, &self.rules)
            && self
                .explicit
                .as_ref()
                .is_none_or(|list| list.iter().any(|m| m.same_triple(h)))
    }

    /// Candidates a naive enumeration has to look at.
    pub fn candidate_count(&self) -> Option<u128> {
        match &self.explicit {
            Some(list) => Some(list.len() as u128),
            None => candidate_count(self.width),
        }
    }

    /// Valid models in canonical order (list order for explicit spaces).
    pub fn iter(&self) -> Box<dyn Iterator<Item = ActionModel> + '_> {
        match &self.explicit {
            Some(list) => Box::new(list.iter().cloned()),
            None => Box::new(
                CanonicalIter::new(self.width, Some(&self.rules))
                    .filter(move |h| is_valid_model(h, &self.rules)),
            ),
        }
    }

    /// Number of valid models, by enumeration.
    pub fn count(&self, cap: u128) -> Result<u128> {
        match self.candidate_count() {
            Some(c) if c <= cap => Ok(self.iter().count() as u128),
            Some(c) => Err(Error::Resource(format!(
                "model space has {c} candidates, above the cap of {cap}"
            ))),
            None => Err(Error::Resource("model space size overflows".into())),
        }
    }
}
