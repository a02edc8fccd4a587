#![allow(dead_code)]

use std::f64::consts::PI;

use nalgebra::DMatrix;
use phasecut::{MaskSet, C64};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_complex(rng: &mut ChaCha8Rng, n: usize) -> Vec<C64> {
    (0..n)
        .map(|_| C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
        .collect()
}

/// Explicit masked-DFT matrix, written from the definition with no FFT.
pub fn dft_matrix(masks: &MaskSet, osf: usize) -> DMatrix<C64> {
    let n = masks.side();
    let l = osf * n;
    let k = masks.count();
    let mut a = DMatrix::zeros(k * l * l, n * n);
    for s in 0..k {
        for f1 in 0..l {
            for f2 in 0..l {
                let row = s * l * l + f1 * l + f2;
                for r in 0..n {
                    for c in 0..n {
                        let ang = -2.0 * PI * ((f1 * r + f2 * c) as f64) / l as f64;
                        a[(row, r * n + c)] =
                            C64::from_polar(masks.mask(s)[r * n + c] / l as f64, ang);
                    }
                }
            }
        }
    }
    a
}

/// Moore-Penrose pseudoinverse through the SVD.
pub fn pinv(a: &DMatrix<C64>) -> DMatrix<C64> {
    a.clone().pseudo_inverse(1e-12).expect("svd pseudoinverse")
}

pub fn dense_m(a: &DMatrix<C64>, b: &[f64]) -> DMatrix<C64> {
    let n = a.nrows();
    let proj = a * pinv(a);
    let mut m = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let delta = if i == j { 1.0 } else { 0.0 };
            m[(i, j)] = (C64::new(delta, 0.0) - proj[(i, j)]) * b[i] * b[j];
        }
    }
    m
}

pub fn max_abs_diff(a: &[C64], b: &[C64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

pub fn hermitian_eigenvalues(m: &DMatrix<C64>) -> Vec<f64> {
    let mut ev: Vec<f64> = m.clone().symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}

pub fn spectral_norm(m: &DMatrix<C64>) -> f64 {
    hermitian_eigenvalues(m).iter().map(|v| v.abs()).fold(0.0, f64::max)
}

/// Random Hermitian PSD matrix `G G*` with `G` of size `n×rank`.
pub fn random_psd(rng: &mut ChaCha8Rng, n: usize, rank: usize) -> DMatrix<C64> {
    let g = DMatrix::from_fn(n, rank, |_, _| {
        C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
    });
    &g * g.adjoint()
}

/// Upper and certified lower bound on `min Tr(UM)` over `diag(U) = 1`,
/// `U ⪰ 0`, by projected gradient on a full-rank factor `U = VV*`.
///
/// The lower bound comes from the dual: `λ_i = (MU)_ii` and
/// `Σλ + n·min(0, λ_min(M − diag λ))`.
pub fn reference_phasecut_bounds(m: &DMatrix<C64>) -> (f64, f64) {
    let n = m.nrows();
    let mut r = rng(4242);
    let mut v = DMatrix::from_fn(n, n, |_, _| C64::new(r.random::<f64>() - 0.5, r.random::<f64>() - 0.5));
    let normalize = |v: &mut DMatrix<C64>| {
        for i in 0..n {
            let s = v.row(i).norm();
            let mut row = v.row_mut(i);
            row /= C64::new(s, 0.0);
        }
    };
    normalize(&mut v);
    let step = 0.5 / spectral_norm(m).max(1e-300);
    for _ in 0..50_000 {
        let g = m * &v;
        v -= g * C64::new(step, 0.0);
        normalize(&mut v);
    }
    let u = &v * v.adjoint();
    let mu = m * &u;
    let upper = mu.trace().re;
    let lambda: Vec<f64> = (0..n).map(|i| mu[(i, i)].re).collect();
    let mut s = m.clone();
    for i in 0..n {
        s[(i, i)] -= C64::new(lambda[i], 0.0);
    }
    let lmin = hermitian_eigenvalues(&s)[0];
    let lower = lambda.iter().sum::<f64>() + n as f64 * lmin.min(0.0);
    (upper, lower)
}
