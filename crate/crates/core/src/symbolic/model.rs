//! STRIPS action models and the transition rule they declare.

use crate::error::{Error, Result};
use crate::symbolic::{DomainUniverse, StateSet};

/// Declared (intended) transition of an action: `s ∪ add ∖ del` whenever
/// `pre ⊆ s`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct ActionModel {
    pub name: String,
    pub pre: StateSet,
    pub add: StateSet,
    pub del: StateSet,
}

/// Identity of a model for deduplication: the triple without the name.
pub type ModelKey = (StateSet, StateSet, StateSet);

impl ActionModel {
    pub fn new(name: impl Into<String>, pre: StateSet, add: StateSet, del: StateSet) -> Self {
        ActionModel {
            name: name.into(),
            pre,
            add,
            del,
        }
    }

    pub fn from_atoms(
        universe: &DomainUniverse,
        name: impl Into<String>,
        pre: &[&str],
        add: &[&str],
        del: &[&str],
    ) -> Result<Self> {
        Ok(ActionModel::new(
            name,
            universe.set_of(pre)?,
            universe.set_of(add)?,
            universe.set_of(del)?,
        ))
    }

    pub fn width(&self) -> usize {
        self.pre.width()
    }

    pub fn key(&self) -> ModelKey {
        (self.pre.clone(), self.add.clone(), self.del.clone())
    }

    pub fn same_triple(&self, other: &ActionModel) -> bool {
        self.pre == other.pre && self.add == other.add && self.del == other.del
    }

    /// `pre ∪ add ∖ del`: what must hold after a consistent execution.
    pub fn expected_outcome(&self) -> StateSet {
        self.pre.union(&self.add).difference(&self.del)
    }

    /// Every atom the model mentions.
    pub fn atoms(&self) -> StateSet {
        self.pre.union(&self.add).union(&self.del)
    }

    /// Stable 64-bit fingerprint of the triple (FNV-1a over the bitset
    /// words). Used to derive per-model seeds, so it must not depend on the
    /// process or the std hasher.
    pub fn fingerprint(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        let mut feed = |x: u64| {
            for b in x.to_le_bytes() {
                h ^= b as u64;
                h = h.wrapping_mul(0x0000_0100_0000_01b3);
            }
        };
        feed(self.width() as u64);
        for part in [&self.pre, &self.add, &self.del] {
            for &w in part.words() {
                feed(w);
            }
            feed(0x5eed);
        }
        h
    }

    /// Position of the triple in the canonical enumeration: `pre` is the
    /// outer binary digit string and each atom's add/del status is a ternary
    /// digit (0 none, 1 add, 2 del) with atom 0 least significant.
    /// `None` when the model has add∩del atoms or the index does not fit.
    pub fn canonical_index(&self) -> Option<u128> {
        let n = self.width();
        if self.add.intersects(&self.del) || n > 48 {
            return None;
        }
        let mut ternary: u128 = 0;
        for i in (0..n).rev() {
            let digit = if self.add.contains(i) {
                1
            } else if self.del.contains(i) {
                2
            } else {
                0
            };
            ternary = ternary * 3 + digit;
        }
        let span = 3u128.checked_pow(n as u32)?;
        let pre = self.pre.iter().map(|i| 1u128 << i).sum::<u128>();
        pre.checked_mul(span)?.checked_add(ternary)
    }
}

/// Validity rules defining the intensional model space H_P.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ValidityRules {
    /// Reject models whose add effects are already required by `pre`.
    pub add_pre_disjoint: bool,
    /// Reject models deleting atoms they do not require.
    pub del_subset_pre: bool,
    /// Groups of mutually exclusive atoms: at most one may hold in any state.
    pub mutex_groups: Vec<StateSet>,
}

impl Default for ValidityRules {
    fn default() -> Self {
        ValidityRules {
            add_pre_disjoint: true,
            del_subset_pre: true,
            mutex_groups: Vec::new(),
        }
    }
}

impl ValidityRules {
    /// Only the mandatory `add ∩ del = ∅` rule.
    pub fn mandatory_only() -> Self {
        ValidityRules {
            add_pre_disjoint: false,
            del_subset_pre: false,
            mutex_groups: Vec::new(),
        }
    }

    /// True when `set` holds two or more atoms of some mutex group.
    pub fn violates_mutex(&self, set: &StateSet) -> bool {
        self.mutex_groups
            .iter()
            .any(|g| g.intersection(set).len() > 1)
    }
}

/// Domain-independent validity plus the configured optional rules and
/// mutex groups. A model is rejected when its precondition, its add list,
/// or its declared outcome would put two atoms of one mutex group together.
pub fn is_valid_model(h: &ActionModel, rules: &ValidityRules) -> bool {
    if h.add.intersects(&h.del) {
        return false;
    }
    if rules.add_pre_disjoint && h.add.intersects(&h.pre) {
        return false;
    }
    if rules.del_subset_pre && !h.del.is_subset(&h.pre) {
        return false;
    }
    if !rules.mutex_groups.is_empty() {
        let outcome = h.pre.difference(&h.del).union(&h.add);
        if rules.violates_mutex(&h.pre)
            || rules.violates_mutex(&h.add)
            || rules.violates_mutex(&outcome)
        {
            return false;
        }
    }
    true
}

/// `c ⊆ s`.
pub fn holds(c: &StateSet, s: &StateSet) -> Result<bool> {
    if !c.same_universe(s) {
        return Err(Error::domain(format!(
            "condition over {} propositions tested against state over {}",
            c.width(),
            s.width()
        )));
    }
    Ok(c.is_subset(s))
}

/// `s ∪ add ∖ del`, defined only when `pre ⊆ s`.
pub fn apply_model(h: &ActionModel, s: &StateSet) -> Result<StateSet> {
    if !holds(&h.pre, s)? {
        return Err(Error::Precondition(format!(
            "model `{}` applied in a state missing {:?}",
            h.name,
            h.pre.difference(s)
        )));
    }
    let mut out = s.union(&h.add);
    out.difference_with(&h.del);
    Ok(out)
}
