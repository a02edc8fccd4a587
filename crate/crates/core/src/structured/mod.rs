//! Small dense relaxations that exploit real or nonnegative images.
//!
//! All solvers here work on explicit matrices and are meant for a few
//! hundred kept observations at most.

mod admm;
mod embedding;
mod solvers;
mod toeplitz;

pub use admm::{AdmmOptions, DEFAULT_ADMM_ITERS};
pub use embedding::{build_real_embedding, build_real_embedding_truncated, t_embed, RealEmbedding};
pub use solvers::{
    solve_phasecut_complex, solve_phasecut_plus, solve_phasecut_real, solve_phasecut_real_nonneg,
    ComplexSdpSolution, PlusSolution, RealSdpSolution, SdpReport,
};
pub use toeplitz::{build_toeplitz, toeplitz_lines, ToeplitzConstraint, ToeplitzLine};

/// Largest phase-vector length accepted by the dense structured solvers.
pub const STRUCTURED_CAP: usize = 512;
