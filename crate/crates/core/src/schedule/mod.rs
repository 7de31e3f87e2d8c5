mod check;
mod prices;
mod result;
mod robust;
mod structure;

pub use check::*;
pub use prices::*;
pub use result::*;
pub use robust::*;
pub use structure::*;
