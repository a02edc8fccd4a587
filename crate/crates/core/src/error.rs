use std::io;

use thiserror::Error;

/// Errors raised by the phase retrieval toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("mask resolution {resolution} does not divide image side {side}")]
    InvalidResolution { side: usize, resolution: usize },

    #[error("mask count must be at least 1")]
    InvalidCount,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("shape mismatch for {what}: expected {expected}, found {found}")]
    Shape {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("index {index} out of range for length {len}")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("reference signal has zero norm")]
    DegenerateReference,

    #[error("pixel {pixel} is never illuminated by any mask")]
    Coverage { pixel: usize },

    #[error("entry {index} has modulus {modulus}, expected 1")]
    UnitModulus { index: usize, modulus: f64 },

    #[error("dense materialization of size {n} exceeds cap {cap}")]
    SizeGuard { n: usize, cap: usize },

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("no ATOM or HETATM records found")]
    EmptyMolecule,

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_len(what: &'static str, expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::Shape {
            what,
            expected,
            found,
        })
    }
}
