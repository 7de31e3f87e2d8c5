//! Building dynamics, archetype generation, linearization and horizon stacking.

mod archetype;
mod model;
mod slp;
mod stack;

pub use archetype::*;
pub use model::*;
pub use slp::*;
pub use stack::*;
