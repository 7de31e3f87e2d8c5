//! Linear programming with a bounded revised simplex method.
//!
//! ```
//! use bldgres_lp::{LinearProgram, solve};
//!
//! let mut lp = LinearProgram::new();
//! let x = lp.add_var("x", 1.0, f64::NEG_INFINITY, f64::INFINITY);
//! lp.add_ge(vec![(x.0, 1.0)], 3.0);
//! let sol = solve(&lp).unwrap();
//! assert!((sol.x[0] - 3.0).abs() < 1e-9);
//! ```

mod dual;
mod error;
mod lp_format;
mod problem;
mod simplex;
mod solution;

pub use dual::{dualize, DualProblem, DualSource};
pub use error::LpError;
pub use lp_format::to_lp_format;
pub use problem::{Constraint, LinearProgram, VarId};
pub use simplex::{Simplex, SolveOptions, SolveStats};
pub use solution::{CertificateReport, FarkasCertificate, LpSolution, LpStatus};

/// Solves `lp` with default options.
pub fn solve(lp: &LinearProgram) -> Result<LpSolution, LpError> {
    BundledSimplex::default().solve(lp)
}

/// Something that can solve a [`LinearProgram`].
pub trait LpSolver {
    fn name(&self) -> &str;
    fn solve(&self, lp: &LinearProgram) -> Result<LpSolution, LpError>;
}

/// The simplex implementation in this crate.
#[derive(Debug, Clone, Default)]
pub struct BundledSimplex {
    pub options: SolveOptions,
}

impl LpSolver for BundledSimplex {
    fn name(&self) -> &str {
        "bundled-simplex"
    }

    fn solve(&self, lp: &LinearProgram) -> Result<LpSolution, LpError> {
        let mut s = Simplex::with_options(lp.clone(), self.options)?;
        s.solve();
        Ok(s.solution())
    }
}
