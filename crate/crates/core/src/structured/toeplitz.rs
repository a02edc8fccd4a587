//! Hermitian Toeplitz matrices of Fourier coefficients.
//!
//! The Toeplitz matrix built from the DFT of a nonnegative sequence is PSD,
//! which turns nonnegativity of the image into a linear matrix inequality on
//! the observations `diag(b) u`.

use nalgebra::DMatrix;

use crate::error::{check_len, Error, Result};
use crate::operator::MaskedFourierOperator;
use crate::signal::{ObservationVector, SupportSelection, C64};

#[derive(Clone, Debug, PartialEq)]
pub struct ToeplitzConstraint {
    y: Vec<C64>,
    matrix: DMatrix<C64>,
}

impl ToeplitzConstraint {
    pub fn y(&self) -> &[C64] {
        &self.y
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.matrix
    }

    /// Smallest eigenvalue of `B(y)`.
    pub fn min_eigenvalue(&self) -> f64 {
        self.matrix
            .clone()
            .symmetric_eigenvalues()
            .iter()
            .cloned()
            .fold(f64::INFINITY, f64::min)
    }
}

/// `B_ij = y_{i−j}` below the diagonal and `conj(y_{j−i})` above it. The
/// diagonal holds `Re(y_0)`, so `B(y)` is Hermitian for every `y`.
pub fn build_toeplitz(y: &[C64]) -> Result<ToeplitzConstraint> {
    if y.is_empty() {
        return Err(Error::InvalidArgument("Toeplitz generator must be nonempty".into()));
    }
    let q = y.len();
    let matrix = DMatrix::from_fn(q, q, |i, j| {
        if i == j {
            C64::new(y[0].re, 0.0)
        } else if i > j {
            y[i - j]
        } else {
            y[j - i].conj()
        }
    });
    Ok(ToeplitzConstraint { y: y.to_vec(), matrix })
}

/// A run of observations `y_0, …, y_{q−1}` forming the DFT of a nonnegative
/// 1D sequence, given as positions into the phase vector and magnitudes.
#[derive(Clone, Debug, PartialEq)]
pub struct ToeplitzLine {
    pub positions: Vec<usize>,
    pub magnitudes: Vec<f64>,
}

impl ToeplitzLine {
    pub fn new(positions: Vec<usize>, magnitudes: Vec<f64>) -> Result<Self> {
        check_len("line magnitudes", positions.len(), magnitudes.len())?;
        if positions.is_empty() {
            return Err(Error::InvalidArgument("empty Toeplitz line".into()));
        }
        Ok(Self { positions, magnitudes })
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    /// `B(diag(b) u)` along this line.
    pub fn constraint(&self, u: &[C64]) -> ToeplitzConstraint {
        let y: Vec<C64> = self
            .positions
            .iter()
            .zip(&self.magnitudes)
            .map(|(&p, &b)| u[p] * b)
            .collect();
        build_toeplitz(&y).expect("lines are nonempty")
    }
}

/// Zero-frequency row and column of every mask block of a 2D spectrum.
///
/// Along `f1 = 0` the 2D DFT is the 1D DFT of the column sums of the masked
/// image, which are nonnegative when image and masks are, and likewise for
/// `f2 = 0`. Each line is cut at the first frequency missing from `support`.
pub fn toeplitz_lines(
    op: &MaskedFourierOperator,
    b: &ObservationVector,
    support: &SupportSelection,
) -> Result<Vec<ToeplitzLine>> {
    check_len("observations", op.n_obs(), b.len())?;
    check_len("support total", op.n_obs(), support.total())?;
    let mut position = vec![usize::MAX; op.n_obs()];
    for (k, &i) in support.indices().iter().enumerate() {
        position[i] = k;
    }
    let l = op.grid_side();
    let mut lines = Vec::new();
    for s in 0..op.mask_count() {
        let base = s * l * l;
        for stride in [1, l] {
            let (mut pos, mut mag) = (Vec::new(), Vec::new());
            for t in 0..l {
                let i = base + t * stride;
                if position[i] == usize::MAX {
                    break;
                }
                pos.push(position[i]);
                mag.push(b.values()[i]);
            }
            if !pos.is_empty() {
                lines.push(ToeplitzLine { positions: pos, magnitudes: mag });
            }
        }
    }
    Ok(lines)
}
