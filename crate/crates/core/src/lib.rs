pub mod dispatch;
pub mod error;
pub mod mpc;
pub mod schedule;
pub mod thermal;
pub mod uncertainty;

pub use error::{CoreError, Result};
