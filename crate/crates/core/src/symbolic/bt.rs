//! Behavior-tree nodes and pure tick semantics.
//!
//! Ticking never changes the world. An action leaf reports `running` and
//! names itself as the active action; carrying the action out is the job of
//! whoever owns the environment.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::symbolic::{ActionModel, StateSet};

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum BtNode {
    Condition(StateSet),
    Action(String),
    Sequence(Vec<BtNode>),
    Fallback(Vec<BtNode>),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BtStatus {
    Success,
    Running,
    Failure,
}

impl fmt::Display for BtStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BtStatus::Success => "success",
            BtStatus::Running => "running",
            BtStatus::Failure => "failure",
        })
    }
}

/// Resolves action ids appearing in a tree to their models.
pub trait ActionLookup {
    fn model(&self, id: &str) -> Option<&ActionModel>;
}

impl ActionLookup for HashMap<String, ActionModel> {
    fn model(&self, id: &str) -> Option<&ActionModel> {
        self.get(id)
    }
}

impl ActionLookup for BTreeMap<String, ActionModel> {
    fn model(&self, id: &str) -> Option<&ActionModel> {
        self.get(id)
    }
}

impl ActionLookup for [ActionModel] {
    fn model(&self, id: &str) -> Option<&ActionModel> {
        self.iter().find(|h| h.name == id)
    }
}

impl ActionLookup for Vec<ActionModel> {
    fn model(&self, id: &str) -> Option<&ActionModel> {
        self.as_slice().model(id)
    }
}

impl BtNode {
    pub fn condition(c: StateSet) -> Self {
        BtNode::Condition(c)
    }

    pub fn action(id: impl Into<String>) -> Self {
        BtNode::Action(id.into())
    }

    pub fn children(&self) -> &[BtNode] {
        match self {
            BtNode::Sequence(c) | BtNode::Fallback(c) => c,
            _ => &[],
        }
    }

    /// Internal nodes must have at least one child.
    pub fn is_well_formed(&self) -> bool {
        match self {
            BtNode::Condition(_) | BtNode::Action(_) => true,
            BtNode::Sequence(c) | BtNode::Fallback(c) => {
                !c.is_empty() && c.iter().all(BtNode::is_well_formed)
            }
        }
    }

    /// Action ids in depth-first order, deduplicated, first occurrence kept.
    pub fn action_ids(&self) -> Vec<&str> {
        let mut out: Vec<&str> = Vec::new();
        self.walk(&mut |n| {
            if let BtNode::Action(id) = n {
                if !out.contains(&id.as_str()) {
                    out.push(id);
                }
            }
        });
        out
    }

    pub fn conditions(&self) -> Vec<&StateSet> {
        let mut out = Vec::new();
        self.walk(&mut |n| {
            if let BtNode::Condition(c) = n {
                out.push(c);
            }
        });
        out
    }

    pub fn node_count(&self) -> usize {
        let mut n = 0;
        self.walk(&mut |_| n += 1);
        n
    }

    pub fn depth(&self) -> usize {
        1 + self.children().iter().map(BtNode::depth).max().unwrap_or(0)
    }

    fn walk<'a>(&'a self, f: &mut impl FnMut(&'a BtNode)) {
        f(self);
        for c in self.children() {
            c.walk(f);
        }
    }

    /// Checks that every action id resolves and every condition has the
    /// width of `state`.
    pub fn check(&self, state: &StateSet, table: &(impl ActionLookup + ?Sized)) -> Result<()> {
        if !self.is_well_formed() {
            return Err(Error::domain("control node without children"));
        }
        let mut problem = None;
        self.walk(&mut |n| {
            if problem.is_some() {
                return;
            }
            match n {
                BtNode::Action(id) if table.model(id).is_none() => {
                    problem = Some(Error::domain(format!("unresolved action id `{id}`")));
                }
                BtNode::Condition(c) if !c.same_universe(state) => {
                    problem = Some(Error::domain("condition from a different universe"));
                }
                _ => {}
            }
        });
        problem.map_or(Ok(()), Err)
    }
}

/// One tick from the root. Returns the status and, when running, the id of
/// the action leaf that was reached.
pub fn tick<'t>(
    root: &'t BtNode,
    s: &StateSet,
    table: &(impl ActionLookup + ?Sized),
) -> Result<(BtStatus, Option<&'t str>)> {
    root.check(s, table)?;
    Ok(tick_unchecked(root, s))
}

pub(crate) fn tick_unchecked<'t>(node: &'t BtNode, s: &StateSet) -> (BtStatus, Option<&'t str>) {
    match node {
        BtNode::Condition(c) => {
            if c.is_subset(s) {
                (BtStatus::Success, None)
            } else {
                (BtStatus::Failure, None)
            }
        }
        BtNode::Action(id) => (BtStatus::Running, Some(id.as_str())),
        BtNode::Sequence(children) => {
            for child in children {
                let r = tick_unchecked(child, s);
                if r.0 != BtStatus::Success {
                    return r;
                }
            }
            (BtStatus::Success, None)
        }
        BtNode::Fallback(children) => {
            for child in children {
                let r = tick_unchecked(child, s);
                if r.0 != BtStatus::Failure {
                    return r;
                }
            }
            (BtStatus::Failure, None)
        }
    }
}

/// The region of the state space `s` falls in: the status part of a tick.
pub fn bt_region(root: &BtNode, s: &StateSet, table: &(impl ActionLookup + ?Sized)) -> Result<BtStatus> {
    tick(root, s, table).map(|(status, _)| status)
}
