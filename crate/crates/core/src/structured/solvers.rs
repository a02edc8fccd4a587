use std::time::Instant;

use nalgebra::{DMatrix, DVector};

use crate::bcd::{extract_phase, LiftedMatrix};
use crate::error::{check_len, Error, Result};
use crate::linalg::symmetric_eig_desc;
use crate::signal::{ComplexImage, PhaseVector, C64, ZERO_MODULUS};

use super::admm::{self, AdmmOptions, AdmmOutcome, ConicModel};
use super::embedding::RealEmbedding;
use super::toeplitz::ToeplitzLine;
use super::STRUCTURED_CAP;

/// Convergence record of a splitting solve.
#[derive(Clone, Debug, PartialEq)]
pub struct SdpReport {
    pub iterations: usize,
    pub converged: bool,
    pub primal_residual: f64,
    pub dual_residual: f64,
    /// Objective of the PSD iterate, per iteration.
    pub objective: Vec<f64>,
    pub best_objective: f64,
    pub wall_time: f64,
}

impl SdpReport {
    fn from_outcome<T: nalgebra::ComplexField<RealField = f64>>(out: &AdmmOutcome<T>, start: Instant) -> Self {
        Self {
            iterations: out.iterations,
            converged: out.converged,
            primal_residual: out.primal_residual,
            dual_residual: out.dual_residual,
            best_objective: out.objective.iter().cloned().fold(f64::INFINITY, f64::min),
            objective: out.objective.clone(),
            wall_time: start.elapsed().as_secs_f64(),
        }
    }
}

fn check_cap(n: usize) -> Result<()> {
    if n > STRUCTURED_CAP {
        return Err(Error::SizeGuard { n, cap: STRUCTURED_CAP });
    }
    Ok(())
}

/// Congruence `D X D` with `D` chosen per group so the grouped diagonal sums
/// become exactly one; keeps `X ⪰ 0`.
fn rescale_groups<T: nalgebra::ComplexField<RealField = f64> + Copy>(x: &mut DMatrix<T>, group: impl Fn(usize) -> Vec<usize>) {
    let n = x.nrows();
    let mut d = vec![1.0; n];
    for i in 0..n {
        let members = group(i);
        let total: f64 = members.iter().map(|&k| x[(k, k)].real()).sum();
        if total > 0.0 {
            d[i] = 1.0 / total.sqrt();
        }
    }
    for j in 0..n {
        for i in 0..n {
            x[(i, j)] *= T::from_real(d[i] * d[j]);
        }
    }
}

struct ComplexPhaseCut<'a> {
    cost: &'a DMatrix<C64>,
}

impl ConicModel<C64> for ComplexPhaseCut<'_> {
    fn dim(&self) -> usize {
        self.cost.nrows()
    }

    fn cost(&self) -> &DMatrix<C64> {
        self.cost
    }

    fn project_affine(&self, x: &mut DMatrix<C64>) {
        for i in 0..x.nrows() {
            x[(i, i)] = C64::new(1.0, 0.0);
        }
    }
}

#[derive(Clone, Debug)]
pub struct ComplexSdpSolution {
    pub lifted: LiftedMatrix,
    pub phase: PhaseVector,
    pub degenerate: bool,
    /// `Tr(UM)` of the returned matrix.
    pub objective: f64,
    pub report: SdpReport,
}

/// The complex PhaseCut relaxation `min Tr(UM)`, `diag(U) = 1`, `U ⪰ 0`,
/// solved by splitting on a dense `M`.
pub fn solve_phasecut_complex(m: &DMatrix<C64>, opts: &AdmmOptions) -> Result<ComplexSdpSolution> {
    let n = m.nrows();
    check_len("objective columns", n, m.ncols())?;
    check_cap(n)?;
    let start = Instant::now();
    let out = admm::solve(&ComplexPhaseCut { cost: m }, opts);
    let mut u = out.psd.clone();
    rescale_groups(&mut u, |i| vec![i]);
    for i in 0..n {
        u[(i, i)] = C64::new(1.0, 0.0);
    }
    let u = admm::hermitian_part(&u);
    let objective = admm::trace_product(m, &u);
    let lifted = LiftedMatrix::new(u)?;
    let ext = extract_phase(&lifted);
    Ok(ComplexSdpSolution {
        lifted,
        phase: ext.phase,
        degenerate: ext.degenerate,
        objective,
        report: SdpReport::from_outcome(&out, start),
    })
}

struct RealPhaseCut<'a> {
    emb: &'a RealEmbedding,
    /// `A2† B2` scaled to unit spectral norm.
    lift: DMatrix<f64>,
    /// `Q` and `d` with `PᵀP = Q diag(d) Qᵀ` for the scaled lift, present for the nonnegative variant.
    nonneg: Option<(DMatrix<f64>, Vec<f64>)>,
}

impl ConicModel<f64> for RealPhaseCut<'_> {
    fn dim(&self) -> usize {
        self.emb.m2().nrows()
    }

    fn cost(&self) -> &DMatrix<f64> {
        self.emb.m2()
    }

    fn project_affine(&self, x: &mut DMatrix<f64>) {
        let m = self.emb.pairs();
        for i in 0..m {
            let shift = 0.5 * (1.0 - x[(i, i)] - x[(m + i, m + i)]);
            x[(i, i)] += shift;
            x[(m + i, m + i)] += shift;
        }
    }

    fn block_count(&self) -> usize {
        usize::from(self.nonneg.is_some())
    }

    fn block_apply(&self, _: usize, x: &DMatrix<f64>) -> DMatrix<f64> {
        &self.lift * x * self.lift.transpose()
    }

    fn block_adjoint(&self, _: usize, y: &DMatrix<f64>) -> DMatrix<f64> {
        self.lift.transpose() * y * &self.lift
    }

    fn block_project(&self, _: usize, y: &mut DMatrix<f64>) {
        y.iter_mut().for_each(|v| *v = v.max(0.0));
    }

    fn solve_normal(&self, rhs: DMatrix<f64>) -> DMatrix<f64> {
        match &self.nonneg {
            None => rhs * 0.5,
            Some((q, d)) => {
                let mut t = q.transpose() * rhs * q;
                for j in 0..t.ncols() {
                    for i in 0..t.nrows() {
                        t[(i, j)] /= 2.0 + d[i] * d[j];
                    }
                }
                q * t * q.transpose()
            }
        }
    }
}

#[derive(Clone, Debug)]
pub struct RealSdpSolution {
    /// The `2m×2m` lifted matrix `V`.
    pub lifted: DMatrix<f64>,
    /// Phase pairs `(Re u, Im u)` stacked, each pair of unit norm.
    pub pairs: Vec<f64>,
    pub phase: PhaseVector,
    /// `A2† B2 v`.
    pub signal: Vec<f64>,
    /// `signal` read as a square image, when its length allows.
    pub image: Option<ComplexImage>,
    pub objective: f64,
    /// Largest `|V_ii + V_{m+i,m+i} − 1|`.
    pub pair_residual: f64,
    /// Smallest entry of `(A2†B2) V (A2†B2)ᵀ`.
    pub nonneg_floor: f64,
    pub report: SdpReport,
}

fn solve_real(emb: &RealEmbedding, opts: &AdmmOptions, nonneg: bool) -> Result<RealSdpSolution> {
    let start = Instant::now();
    let m = emb.pairs();
    // the cone is scale invariant; a unit-norm lift keeps the blocks balanced
    let (lift, factor) = if nonneg {
        let (d, q) = symmetric_eig_desc(emb.lift().transpose() * emb.lift());
        let top = d[0].max(f64::MIN_POSITIVE);
        let d = d.into_iter().map(|v| (v / top).max(0.0)).collect();
        (emb.lift() / top.sqrt(), Some((q, d)))
    } else {
        (DMatrix::zeros(0, 0), None)
    };
    let model = RealPhaseCut { emb, lift, nonneg: factor };
    let out = admm::solve(&model, opts);
    let mut v = out.psd.clone();
    rescale_groups(&mut v, |i| {
        let k = i % m;
        vec![k, k + m]
    });
    let v = (&v + v.transpose()) * 0.5;
    let pair_residual = (0..m)
        .map(|i| (v[(i, i)] + v[(m + i, m + i)] - 1.0).abs())
        .fold(0.0, f64::max);
    let objective = admm::trace_product(emb.m2(), &v);
    let lifted_image = emb.lift() * &v * emb.lift().transpose();
    let nonneg_floor = lifted_image.iter().cloned().fold(f64::INFINITY, f64::min);

    let (_, vecs) = symmetric_eig_desc(v.clone());
    let lead = vecs.column(0);
    let mut pairs = vec![0.0; 2 * m];
    let mut phase = Vec::with_capacity(m);
    for i in 0..m {
        let (a, b) = (lead[i], lead[m + i]);
        let r = (a * a + b * b).sqrt();
        let (a, b) = if r < ZERO_MODULUS { (1.0, 0.0) } else { (a / r, b / r) };
        pairs[i] = a;
        pairs[m + i] = b;
        phase.push(C64::new(a, b));
    }
    let signal: Vec<f64> = (emb.lift() * DVector::from_column_slice(&pairs)).iter().copied().collect();
    let side = emb.side();
    let image = (side * side == signal.len())
        .then(|| ComplexImage::new(side, signal.iter().map(|&r| C64::new(r, 0.0)).collect()))
        .transpose()?;
    Ok(RealSdpSolution {
        lifted: v,
        pairs,
        phase: PhaseVector::from_directions(&phase),
        signal,
        image,
        objective,
        pair_residual,
        nonneg_floor,
        report: SdpReport::from_outcome(&out, start),
    })
}

/// PhaseCutR: `min Tr(V M2)` with `V_ii + V_{m+i,m+i} = 1` and `V ⪰ 0`.
pub fn solve_phasecut_real(emb: &RealEmbedding, opts: &AdmmOptions) -> Result<RealSdpSolution> {
    solve_real(emb, opts, false)
}

/// PhaseCutR with the extra elementwise constraint `(A2†B2) V (A2†B2)ᵀ ≥ 0`.
pub fn solve_phasecut_real_nonneg(emb: &RealEmbedding, opts: &AdmmOptions) -> Result<RealSdpSolution> {
    solve_real(emb, opts, true)
}

/// PhaseCut+ over `Y = [[U, u], [u*, 1]]`.
struct PlusModel<'a> {
    cost: DMatrix<C64>,
    lines: &'a [ToeplitzLine],
    anchor: usize,
    /// `(2I + Σ G*G)` weights on the real and imaginary parts of `u`.
    weight_re: Vec<f64>,
    weight_im: Vec<f64>,
    dc: Vec<usize>,
}

impl<'a> PlusModel<'a> {
    fn new(m: &DMatrix<C64>, lines: &'a [ToeplitzLine], anchor: usize) -> Self {
        let n = m.nrows();
        let mut cost = DMatrix::zeros(n + 1, n + 1);
        cost.view_mut((0, 0), (n, n)).copy_from(m);
        let mut weight_re = vec![2.0; n];
        let mut weight_im = vec![2.0; n];
        let mut dc = Vec::new();
        for line in lines {
            let q = line.len() as f64;
            for (t, (&p, &b)) in line.positions.iter().zip(&line.magnitudes).enumerate() {
                if t == 0 {
                    weight_re[p] += 0.5 * q * b * b;
                    dc.push(p);
                } else {
                    let w = (q - t as f64) * b * b;
                    weight_re[p] += w;
                    weight_im[p] += w;
                }
            }
        }
        Self { cost, lines, anchor, weight_re, weight_im, dc }
    }
}

impl ConicModel<C64> for PlusModel<'_> {
    fn dim(&self) -> usize {
        self.cost.nrows()
    }

    fn cost(&self) -> &DMatrix<C64> {
        &self.cost
    }

    fn project_affine(&self, x: &mut DMatrix<C64>) {
        let n = x.nrows() - 1;
        for i in 0..=n {
            x[(i, i)] = C64::new(1.0, 0.0);
        }
        for &p in &self.dc {
            x[(p, n)].im = 0.0;
            x[(n, p)].im = 0.0;
        }
        x[(self.anchor, n)] = C64::new(1.0, 0.0);
        x[(n, self.anchor)] = C64::new(1.0, 0.0);
    }

    fn block_count(&self) -> usize {
        self.lines.len()
    }

    fn block_apply(&self, j: usize, x: &DMatrix<C64>) -> DMatrix<C64> {
        let n = x.nrows() - 1;
        let u: Vec<C64> = (0..n).map(|i| x[(i, n)]).collect();
        self.lines[j].constraint(&u).matrix().clone()
    }

    fn block_adjoint(&self, j: usize, w: &DMatrix<C64>) -> DMatrix<C64> {
        let line = &self.lines[j];
        let q = line.len();
        let n = self.cost.nrows() - 1;
        let mut e = DMatrix::zeros(n + 1, n + 1);
        for (t, (&p, &b)) in line.positions.iter().zip(&line.magnitudes).enumerate() {
            let v = if t == 0 {
                let trace: f64 = (0..q).map(|i| w[(i, i)].re).sum();
                C64::new(0.5 * b * trace, 0.0)
            } else {
                let s: C64 = (t..q).map(|i| w[(i, i - t)]).sum();
                s * b
            };
            e[(p, n)] += v;
            e[(n, p)] += v.conj();
        }
        e
    }

    fn block_project(&self, _: usize, y: &mut DMatrix<C64>) {
        *y = admm::project_psd(y);
    }

    fn solve_normal(&self, rhs: DMatrix<C64>) -> DMatrix<C64> {
        let n = rhs.nrows() - 1;
        let mut x = rhs * C64::new(0.5, 0.0);
        for p in 0..n {
            let r = x[(p, n)] * 2.0;
            let v = C64::new(r.re / self.weight_re[p], r.im / self.weight_im[p]);
            x[(p, n)] = v;
            x[(n, p)] = v.conj();
        }
        x
    }
}

#[derive(Clone, Debug)]
pub struct PlusSolution {
    /// The `U` block.
    pub lifted: DMatrix<C64>,
    /// The relaxed phase column `u`.
    pub u: Vec<C64>,
    pub phase: PhaseVector,
    pub objective: f64,
    /// `|u_anchor − 1|`.
    pub anchor_residual: f64,
    /// Smallest eigenvalue over all `B(diag(b) u)`.
    pub toeplitz_floor: f64,
    pub report: SdpReport,
}

/// PhaseCut+: `min Tr(UM)` with `diag(U) = 1`, `u_anchor = 1`, every line's
/// Toeplitz matrix `B(diag(b) u) ⪰ 0`, real zero-frequency terms, and
/// `[[U, u], [u*, 1]] ⪰ 0`.
pub fn solve_phasecut_plus(
    m: &DMatrix<C64>,
    lines: &[ToeplitzLine],
    anchor: usize,
    opts: &AdmmOptions,
) -> Result<PlusSolution> {
    let n = m.nrows();
    check_len("objective columns", n, m.ncols())?;
    check_cap(n)?;
    if anchor >= n {
        return Err(Error::IndexOutOfRange { index: anchor, len: n });
    }
    for line in lines {
        if let Some(&p) = line.positions.iter().find(|&&p| p >= n) {
            return Err(Error::IndexOutOfRange { index: p, len: n });
        }
    }
    let start = Instant::now();
    let model = PlusModel::new(m, lines, anchor);
    let out = admm::solve(&model, opts);
    let mut y = out.psd.clone();
    rescale_groups(&mut y, |i| vec![i]);
    let y = admm::hermitian_part(&y);
    let u: Vec<C64> = (0..n).map(|i| y[(i, n)]).collect();
    let lifted = y.view((0, 0), (n, n)).into_owned();
    let objective = admm::trace_product(m, &lifted);
    let toeplitz_floor = lines
        .iter()
        .map(|l| l.constraint(&u).min_eigenvalue())
        .fold(f64::INFINITY, f64::min);
    let dirs: Vec<C64> = u
        .iter()
        .map(|z| if z.norm() < ZERO_MODULUS { C64::new(1.0, 0.0) } else { *z })
        .collect();
    Ok(PlusSolution {
        anchor_residual: (u[anchor] - C64::new(1.0, 0.0)).norm(),
        phase: PhaseVector::from_directions(&dirs),
        lifted,
        u,
        objective,
        toeplitz_floor,
        report: SdpReport::from_outcome(&out, start),
    })
}
