//! Consensus ADMM for small conic programs over Hermitian matrices.
//!
//! Solves `min Tr(C X)` subject to `X ⪰ 0`, `X` in an affine set, and
//! `G_j(X) ∈ K_j` for a few extra linear maps. Every constraint gets its own
//! copy of `X`; the `X` step solves `(2I + Σ G_j* G_j) X = rhs`, which the
//! model supplies.

use nalgebra::{ComplexField, DMatrix, SymmetricEigen};

pub(crate) trait ConicModel<T: ComplexField<RealField = f64> + Copy> {
    fn dim(&self) -> usize;

    fn cost(&self) -> &DMatrix<T>;

    fn project_affine(&self, x: &mut DMatrix<T>);

    fn block_count(&self) -> usize {
        0
    }

    fn block_apply(&self, _j: usize, _x: &DMatrix<T>) -> DMatrix<T> {
        unreachable!("model has no extra blocks")
    }

    fn block_adjoint(&self, _j: usize, _y: &DMatrix<T>) -> DMatrix<T> {
        unreachable!("model has no extra blocks")
    }

    fn block_project(&self, _j: usize, _y: &mut DMatrix<T>) {}

    /// Solves `(2I + Σ G_j* G_j) X = rhs`.
    fn solve_normal(&self, rhs: DMatrix<T>) -> DMatrix<T> {
        rhs * T::from_real(0.5)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AdmmOptions {
    pub max_iters: usize,
    /// Relative primal and dual residual target.
    pub tol: f64,
    pub rho: f64,
    /// Over-relaxation factor in `(0, 2)`; 1 is plain ADMM.
    pub relaxation: f64,
}

pub const DEFAULT_ADMM_ITERS: usize = 5000;

impl Default for AdmmOptions {
    fn default() -> Self {
        Self { max_iters: DEFAULT_ADMM_ITERS, tol: 1e-6, rho: 1.0, relaxation: 1.6 }
    }
}

#[derive(Clone, Debug)]
pub(crate) struct AdmmOutcome<T: ComplexField<RealField = f64>> {
    /// The PSD copy at termination.
    pub psd: DMatrix<T>,
    pub iterations: usize,
    pub converged: bool,
    pub primal_residual: f64,
    pub dual_residual: f64,
    /// `Tr(C Z)` of the PSD copy, per iteration.
    pub objective: Vec<f64>,
}

pub(crate) fn hermitian_part<T: ComplexField<RealField = f64> + Copy>(m: &DMatrix<T>) -> DMatrix<T> {
    (m + m.adjoint()) * T::from_real(0.5)
}

/// Nearest PSD matrix in Frobenius norm.
pub(crate) fn project_psd<T: ComplexField<RealField = f64> + Copy>(m: &DMatrix<T>) -> DMatrix<T> {
    let n = m.nrows();
    let eig = SymmetricEigen::new(hermitian_part(m));
    let keep: Vec<usize> = (0..n).filter(|&k| eig.eigenvalues[k] > 0.0).collect();
    if keep.is_empty() {
        return DMatrix::zeros(n, n);
    }
    let scaled = DMatrix::from_fn(n, keep.len(), |r, c| {
        eig.eigenvectors[(r, keep[c])] * T::from_real(eig.eigenvalues[keep[c]].sqrt())
    });
    let out = &scaled * scaled.adjoint();
    hermitian_part(&out)
}

pub(crate) fn trace_product<T: ComplexField<RealField = f64> + Copy>(a: &DMatrix<T>, b: &DMatrix<T>) -> f64 {
    // Tr(A B) for Hermitian A, B equals the real Frobenius inner product
    a.iter().zip(b.iter()).map(|(x, y)| (x.conjugate() * *y).real()).sum()
}

fn frob2<T: ComplexField<RealField = f64> + Copy>(m: &DMatrix<T>) -> f64 {
    m.iter().map(|z| z.modulus_squared()).sum()
}

pub(crate) fn solve<T, P>(model: &P, opts: &AdmmOptions) -> AdmmOutcome<T>
where
    T: ComplexField<RealField = f64> + Copy,
    P: ConicModel<T> + ?Sized,
{
    let n = model.dim();
    let cost = model.cost();
    let cost_scale = cost.iter().map(|z| z.modulus()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    let c = cost * T::from_real(1.0 / cost_scale);
    let blocks = model.block_count();

    let mut x = DMatrix::<T>::identity(n, n);
    model.project_affine(&mut x);
    let mut z0 = x.clone();
    let mut za = x.clone();
    let mut l0 = DMatrix::<T>::zeros(n, n);
    let mut la = DMatrix::<T>::zeros(n, n);
    let mut ys: Vec<DMatrix<T>> = (0..blocks).map(|j| model.block_apply(j, &x)).collect();
    let mut ls: Vec<DMatrix<T>> = ys.iter().map(|y| DMatrix::zeros(y.nrows(), y.ncols())).collect();
    let mut rho = opts.rho;
    let a = T::from_real(opts.relaxation);
    let mut out = AdmmOutcome {
        psd: z0.clone(),
        iterations: 0,
        converged: false,
        primal_residual: f64::INFINITY,
        dual_residual: f64::INFINITY,
        objective: Vec::new(),
    };

    for it in 0..opts.max_iters {
        let mut rhs = (&z0 - &l0) + (&za - &la) - &c * T::from_real(1.0 / rho);
        for j in 0..blocks {
            rhs += model.block_adjoint(j, &(&ys[j] - &ls[j]));
        }
        x = hermitian_part(&model.solve_normal(rhs));

        // over-relaxed copies
        let x0 = &x * a + &z0 * (T::from_real(1.0) - a);
        let xa = &x * a + &za * (T::from_real(1.0) - a);
        let z0_new = project_psd(&(&x0 + &l0));
        let mut za_new = &xa + &la;
        model.project_affine(&mut za_new);
        let mut primal = frob2(&(&x - &z0_new)) + frob2(&(&x - &za_new));
        let mut dual = frob2(&(&z0_new - &z0)) + frob2(&(&za_new - &za));
        l0 += &x0 - &z0_new;
        la += &xa - &za_new;
        for j in 0..blocks {
            let gx = model.block_apply(j, &x);
            let gr = &gx * a + &ys[j] * (T::from_real(1.0) - a);
            let mut y_new = &gr + &ls[j];
            model.block_project(j, &mut y_new);
            primal += frob2(&(&gx - &y_new));
            dual += frob2(&model.block_adjoint(j, &(&y_new - &ys[j])));
            ls[j] += &gr - &y_new;
            ys[j] = y_new;
        }
        z0 = z0_new;
        za = za_new;

        let primal = primal.sqrt();
        let dual = rho * dual.sqrt();
        out.objective.push(trace_product(cost, &z0));
        out.iterations = it + 1;
        out.primal_residual = primal;
        out.dual_residual = dual;
        let xnorm = frob2(&x).sqrt().max(1.0);
        let lnorm = rho * (frob2(&l0) + frob2(&la)).sqrt().max(1.0);
        if primal <= opts.tol * xnorm && dual <= opts.tol * lnorm {
            out.converged = true;
            break;
        }
        // residual balancing; scaled duals follow the penalty
        if it % 10 == 9 {
            let factor = if primal > 10.0 * dual {
                2.0
            } else if dual > 10.0 * primal {
                0.5
            } else {
                1.0
            };
            if factor != 1.0 {
                rho *= factor;
                let inv = T::from_real(1.0 / factor);
                l0 *= inv;
                la *= inv;
                for l in ls.iter_mut() {
                    *l *= inv;
                }
            }
        }
    }
    out.psd = z0;
    out
}
