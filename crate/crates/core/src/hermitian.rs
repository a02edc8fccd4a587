//! Access to Hermitian PSD matrices by columns and products.
//!
//! The solvers only ever need `M v` and single columns of `M`, so both the
//! matrix-free masked Fourier objective and dense test matrices sit behind
//! [`HermitianOperator`].

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::signal::C64;

/// Default cap on the side of any dense `n×n` materialization.
pub const DENSE_CAP: usize = 4096;

pub trait HermitianOperator: Sync {
    fn dim(&self) -> usize;

    /// Writes column `i` into `out` (`out.len() == dim()`).
    fn column_into(&self, i: usize, out: &mut [C64]);

    /// Writes `M v` into `out`.
    fn apply_into(&self, v: &[C64], out: &mut [C64]);

    /// Real diagonal entry `M_ii`.
    fn diagonal(&self, i: usize) -> f64 {
        let mut col = vec![C64::new(0.0, 0.0); self.dim()];
        self.column_into(i, &mut col);
        col[i].re
    }

    fn column(&self, i: usize) -> Vec<C64> {
        let mut out = vec![C64::new(0.0, 0.0); self.dim()];
        self.column_into(i, &mut out);
        out
    }

    fn apply(&self, v: &[C64]) -> Vec<C64> {
        let mut out = vec![C64::new(0.0, 0.0); self.dim()];
        self.apply_into(v, &mut out);
        out
    }

    /// `Tr(M)`, which is also the trace norm `‖M‖₁` for PSD `M`.
    fn trace(&self) -> f64 {
        (0..self.dim()).map(|i| self.diagonal(i)).sum()
    }

    /// Real quadratic form `v* M v`.
    fn quadratic_form(&self, v: &[C64]) -> f64 {
        let mv = self.apply(v);
        v.iter().zip(&mv).map(|(a, b)| (a.conj() * b).re).sum()
    }
}

/// Dense Hermitian matrix stored column-major.
#[derive(Clone, Debug)]
pub struct DenseHermitian {
    matrix: DMatrix<C64>,
}

impl DenseHermitian {
    pub fn new(matrix: DMatrix<C64>) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() {
            return Err(Error::Shape {
                what: "square matrix",
                expected: matrix.nrows(),
                found: matrix.ncols(),
            });
        }
        Ok(Self { matrix })
    }

    /// Assembles the matrix column by column, refusing sides above `cap`.
    pub fn materialize<H: HermitianOperator + ?Sized>(op: &H, cap: usize) -> Result<Self> {
        let n = op.dim();
        if n > cap {
            return Err(Error::SizeGuard { n, cap });
        }
        let mut matrix = DMatrix::zeros(n, n);
        let mut col = vec![C64::new(0.0, 0.0); n];
        for i in 0..n {
            op.column_into(i, &mut col);
            matrix.column_mut(i).copy_from_slice(&col);
        }
        Ok(Self { matrix })
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.matrix
    }

    pub fn into_matrix(self) -> DMatrix<C64> {
        self.matrix
    }

    /// Largest `|M_ij − conj(M_ji)|`.
    pub fn hermitian_defect(&self) -> f64 {
        hermitian_defect(&self.matrix)
    }
}

pub(crate) fn hermitian_defect(m: &DMatrix<C64>) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0f64;
    for j in 0..n {
        for i in 0..=j {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

impl HermitianOperator for DenseHermitian {
    fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    fn column_into(&self, i: usize, out: &mut [C64]) {
        out.copy_from_slice(self.matrix.column(i).as_slice());
    }

    fn apply_into(&self, v: &[C64], out: &mut [C64]) {
        let n = self.dim();
        assert_eq!(v.len(), n);
        out.iter_mut().for_each(|o| *o = C64::new(0.0, 0.0));
        for j in 0..n {
            let vj = v[j];
            if vj == C64::new(0.0, 0.0) {
                continue;
            }
            for (o, m) in out.iter_mut().zip(self.matrix.column(j).iter()) {
                *o += m * vj;
            }
        }
    }

    fn diagonal(&self, i: usize) -> f64 {
        self.matrix[(i, i)].re
    }
}
