//! Executable meaning of nodes: elaboration and simulation.

pub mod elaborate;
pub mod node;
pub mod sim;
pub mod trace;

pub use elaborate::{elaborate, elaborate_node, ElabError, Elaborator};
pub use node::{Def, Node};
pub use sim::{record_state_at, simulate, simulate_from, step, SimError};
pub use trace::Trace;
