//! Real embedding of the phase problem for real-valued images.

use nalgebra::DMatrix;

use crate::error::{check_len, Error, Result};
use crate::operator::MaskedFourierOperator;
use crate::signal::{ObservationVector, SupportSelection, C64};

use super::STRUCTURED_CAP;

/// `T(Z) = [[Re Z, −Im Z], [Im Z, Re Z]]`, so that `T(Z₁Z₂) = T(Z₁)T(Z₂)` and
/// `T(Z*) = T(Z)ᵀ`.
pub fn t_embed(z: &DMatrix<C64>) -> DMatrix<f64> {
    let (r, c) = z.shape();
    DMatrix::from_fn(2 * r, 2 * c, |i, j| {
        let v = z[(i % r, j % c)];
        match (i < r, j < c) {
            (true, true) | (false, false) => v.re,
            (true, false) => -v.im,
            (false, true) => v.im,
        }
    })
}

/// `A2 = [Re A; Im A]`, `B2 = diag(b, b)` and `M2 = B2 (I − A2 A2†) B2`
/// restricted to the kept observations.
#[derive(Clone, Debug)]
pub struct RealEmbedding {
    a2: DMatrix<f64>,
    b2: Vec<f64>,
    m2: DMatrix<f64>,
    lift: DMatrix<f64>,
    support: SupportSelection,
    side: usize,
}

impl RealEmbedding {
    /// Builds the embedding from an explicit complex matrix `A` and magnitudes.
    pub fn from_dense(a: &DMatrix<C64>, b: &[f64]) -> Result<Self> {
        let all: Vec<usize> = (0..a.nrows()).collect();
        Self::from_dense_kept(a, b, &all)
    }

    /// Embedding over the rows `kept` of `A`. `M2` is the principal submatrix
    /// of the full `B2 (I − A2 A2†) B2` and the lift uses the matching columns
    /// of the full `A2†`.
    pub fn from_dense_kept(a: &DMatrix<C64>, b: &[f64], kept: &[usize]) -> Result<Self> {
        let (n, p) = a.shape();
        check_len("magnitudes", n, b.len())?;
        let m = kept.len();
        if m > STRUCTURED_CAP {
            return Err(Error::SizeGuard { n: m, cap: STRUCTURED_CAP });
        }
        if let Some(&i) = kept.iter().find(|&&i| i >= n) {
            return Err(Error::InvalidArgument(format!("kept row {i} out of range {n}")));
        }
        let full = DMatrix::from_fn(2 * n, p, |i, j| {
            let z = a[(i % n, j)];
            if i < n {
                z.re
            } else {
                z.im
            }
        });
        let pinv = full
            .clone()
            .pseudo_inverse(1e-12)
            .map_err(|e| Error::InvalidArgument(e.to_string()))?;
        let rows: Vec<usize> = kept.iter().copied().chain(kept.iter().map(|&i| i + n)).collect();
        let a2 = full.select_rows(&rows);
        let pinv = pinv.select_columns(&rows);
        let b2: Vec<f64> = rows.iter().map(|&i| b[i % n]).collect();
        let proj = &a2 * &pinv;
        let m2 = DMatrix::from_fn(2 * m, 2 * m, |i, j| {
            let id = if i == j { 1.0 } else { 0.0 };
            b2[i] * (id - proj[(i, j)]) * b2[j]
        });
        let m2 = (&m2 + m2.transpose()) * 0.5;
        let lift = DMatrix::from_fn(p, 2 * m, |i, j| pinv[(i, j)] * b2[j]);
        let side = (p as f64).sqrt().round() as usize;
        Ok(Self { a2, b2, m2, lift, support: SupportSelection::full(m), side })
    }

    pub fn a2(&self) -> &DMatrix<f64> {
        &self.a2
    }

    /// Diagonal of `B2`.
    pub fn b2(&self) -> &[f64] {
        &self.b2
    }

    pub fn m2(&self) -> &DMatrix<f64> {
        &self.m2
    }

    /// `A2† B2`, mapping a phase pair vector to a real image.
    pub fn lift(&self) -> &DMatrix<f64> {
        &self.lift
    }

    pub fn support(&self) -> &SupportSelection {
        &self.support
    }

    /// Number of phase pairs (kept observations).
    pub fn pairs(&self) -> usize {
        self.b2.len() / 2
    }

    pub fn side(&self) -> usize {
        self.side
    }
}

/// Real embedding over all observations.
pub fn build_real_embedding(op: &MaskedFourierOperator, b: &ObservationVector) -> Result<RealEmbedding> {
    build_real_embedding_truncated(op, b, &SupportSelection::full(op.n_obs()))
}

/// Real embedding restricted to the rows of `A` in `support`.
pub fn build_real_embedding_truncated(
    op: &MaskedFourierOperator,
    b: &ObservationVector,
    support: &SupportSelection,
) -> Result<RealEmbedding> {
    check_len("observations", op.n_obs(), b.len())?;
    check_len("support total", op.n_obs(), support.total())?;
    if support.len() > STRUCTURED_CAP {
        return Err(Error::SizeGuard { n: support.len(), cap: STRUCTURED_CAP });
    }
    let all: Vec<usize> = (0..op.n_obs()).collect();
    let a = op.dense_rows(&all)?;
    let mut emb = RealEmbedding::from_dense_kept(&a, b.values(), support.indices())?;
    emb.support = support.clone();
    emb.side = op.side();
    Ok(emb)
}
