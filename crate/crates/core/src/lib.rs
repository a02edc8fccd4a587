//! Phase retrieval for coded-diffraction imaging.
//!
//! Recovers a complex image `x` from Fourier magnitudes `b = |A x|`, where
//! `A` stacks zero-padded unitary DFTs of the image seen through several
//! binary illumination masks. Greedy projection methods (Gerchberg-Saxton,
//! Fienup, greedy phase descent) sit next to the PhaseCut semidefinite
//! relaxation solved by block coordinate descent, plus small structured
//! relaxations that exploit real or nonnegative signals.

pub mod bcd;
pub mod error;
pub mod greedy;
pub mod harness;
pub mod hermitian;
mod linalg;
pub mod operator;
pub mod signal;
pub mod structured;

pub use bcd::{
    bcd_full, bcd_lowrank, extract_phase, extract_phase_lowrank, reconstruct_signal,
    solve_truncated, BcdOptions, LiftedMatrix, LowRankLift,
};
pub use error::{Error, Result};
pub use greedy::{fienup, gerchberg_saxton, greedy_phase};
pub use hermitian::{DenseHermitian, HermitianOperator, DENSE_CAP};
pub use operator::{MaskedFourierOperator, PhaseMatrix, TruncatedOperator};
pub use signal::{
    align_global_phase, make_masks, make_masks_with_bias, select_support, ComplexImage, MaskSet,
    ObservationVector, PhaseVector, SupportSelection, C64,
};
