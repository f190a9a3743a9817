use thiserror::Error;

use crate::interval::IntervalError;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error(transparent)]
    Interval(#[from] IntervalError),
    #[error("{0} parameter-dependent entries in (A, B); at most 20 are supported")]
    VertexExplosion(usize),
    #[error("infeasible: {0}")]
    Infeasible(String),
    #[error("solver failure: {0}")]
    Solver(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_len(what: &str, got: usize, want: usize) -> Result<()> {
    if got == want {
        Ok(())
    } else {
        Err(Error::Dimension(format!("{what}: expected length {want}, got {got}")))
    }
}

pub(crate) fn check_shape(what: &str, got: (usize, usize), want: (usize, usize)) -> Result<()> {
    if got == want {
        Ok(())
    } else {
        Err(Error::Dimension(format!(
            "{what}: expected {}x{}, got {}x{}",
            want.0, want.1, got.0, got.1
        )))
    }
}
