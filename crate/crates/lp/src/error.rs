use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LpError {
    #[error("problem has no variables")]
    NoVariables,
    #[error("variable {0} has lower bound above upper bound")]
    InvertedBounds(usize),
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("constraint references variable {var} but the problem has {num_vars} variables")]
    UnknownVariable { var: usize, num_vars: usize },
    #[error("row index {0} out of range")]
    UnknownRow(usize),
}
