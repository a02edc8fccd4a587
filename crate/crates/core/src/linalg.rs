//! Small Hermitian eigen helpers shared by the solvers.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::signal::C64;

/// `a* b`, summed in four interleaved lanes.
pub(crate) fn dot(a: &[C64], b: &[C64]) -> C64 {
    let len = a.len().min(b.len());
    let (ca, ta) = a[..len].as_chunks::<4>();
    let (cb, tb) = b[..len].as_chunks::<4>();
    let (mut re, mut im) = ([0.0f64; 4], [0.0f64; 4]);
    for (x, y) in ca.iter().zip(cb) {
        for k in 0..4 {
            re[k] += x[k].re * y[k].re + x[k].im * y[k].im;
            im[k] += x[k].re * y[k].im - x[k].im * y[k].re;
        }
    }
    let tail: C64 = ta.iter().zip(tb).map(|(x, y)| x.conj() * y).sum();
    C64::new((re[0] + re[1]) + (re[2] + re[3]), (im[0] + im[1]) + (im[2] + im[3])) + tail
}

pub(crate) fn norm(a: &[C64]) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Leading Ritz pair from Lanczos, plus the second Ritz value as a gap estimate.
#[derive(Clone, Debug)]
pub(crate) struct LeadingPair {
    pub value: f64,
    pub second: f64,
    pub vector: Vec<C64>,
}

/// Leading eigenpair of a Hermitian operator of side `n` by restarted Lanczos
/// with full reorthogonalization, started from `start`.
pub(crate) fn lanczos_leading<F>(n: usize, apply: F, start: &[C64]) -> LeadingPair
where
    F: Fn(&[C64], &mut [C64]),
{
    let zero = C64::new(0.0, 0.0);
    let steps = n.min(60);
    let mut v0 = start.to_vec();
    let mut nv = norm(&v0);
    if !(nv > 0.0) {
        v0 = vec![zero; n];
        v0[0] = C64::new(1.0, 0.0);
        nv = 1.0;
    }
    v0.iter_mut().for_each(|z| *z /= nv);

    let mut best = LeadingPair { value: 0.0, second: 0.0, vector: v0.clone() };
    let mut w = vec![zero; n];
    for _restart in 0..30 {
        let mut basis: Vec<Vec<C64>> = vec![v0.clone()];
        let mut alpha = Vec::with_capacity(steps);
        let mut beta: Vec<f64> = Vec::with_capacity(steps);
        let mut scale = 0.0f64;
        loop {
            let j = basis.len() - 1;
            apply(&basis[j], &mut w);
            let a = dot(&basis[j], &w).re;
            alpha.push(a);
            for q in &basis {
                let c = dot(q, &w);
                w.iter_mut().zip(q).for_each(|(x, y)| *x -= y * c);
            }
            // second pass keeps the basis orthonormal to working precision
            for q in &basis {
                let c = dot(q, &w);
                w.iter_mut().zip(q).for_each(|(x, y)| *x -= y * c);
            }
            let b = norm(&w);
            scale = scale.max(a.abs()).max(b);
            if basis.len() >= steps || b <= 1e-13 * scale.max(f64::MIN_POSITIVE) {
                beta.push(b);
                break;
            }
            beta.push(b);
            basis.push(w.iter().map(|z| z / b).collect());
        }
        let m = alpha.len();
        let t = DMatrix::from_fn(m, m, |i, j| {
            if i == j {
                alpha[i]
            } else if i + 1 == j || j + 1 == i {
                beta[i.min(j)]
            } else {
                0.0
            }
        });
        let eig = SymmetricEigen::new(t);
        let mut order: Vec<usize> = (0..m).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
        let top = order[0];
        let s = eig.eigenvectors.column(top);
        let mut vec = vec![zero; n];
        for (k, q) in basis.iter().enumerate() {
            let c = s[k];
            vec.iter_mut().zip(q).for_each(|(x, y)| *x += y * c);
        }
        let nv = norm(&vec);
        vec.iter_mut().for_each(|z| *z /= nv);
        let value = eig.eigenvalues[top];
        let second = if m > 1 { eig.eigenvalues[order[1]] } else { f64::NEG_INFINITY };
        let residual = beta[m - 1] * s[m - 1].abs();
        best = LeadingPair { value, second, vector: vec };
        if m < steps || residual <= 1e-11 * value.abs().max(scale).max(f64::MIN_POSITIVE) {
            break;
        }
        v0 = best.vector.clone();
    }
    best
}

/// Eigenvalues and eigenvectors of a Hermitian matrix, sorted by decreasing
/// eigenvalue.
pub(crate) fn hermitian_eig_desc(m: DMatrix<C64>) -> (Vec<f64>, DMatrix<C64>) {
    let n = m.nrows();
    let eig = SymmetricEigen::new(m);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    (values, vectors)
}

/// Real symmetric counterpart of [`hermitian_eig_desc`].
pub(crate) fn symmetric_eig_desc(m: DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let n = m.nrows();
    let eig = SymmetricEigen::new(m);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    (values, vectors)
}
