//! Propositions, state sets, action models and behavior trees.

mod bt;
mod model;
mod state;
mod universe;

pub use bt::{bt_region, tick, ActionLookup, BtNode, BtStatus};
pub(crate) use bt::tick_unchecked;
pub use model::{apply_model, holds, is_valid_model, ActionModel, ModelKey, ValidityRules};
pub use state::StateSet;
pub use universe::{parse_atom, AtomError, DomainUniverse, ObjectInfo, Proposition};
