//! PhaseCut by block coordinate descent over rows of the lifted matrix.
//!
//! The relaxation is `min Tr(UM)` over Hermitian PSD `U` with unit
//! diagonal. Each update rewrites one off-diagonal row/column of `U` with
//! the closed-form barrier step `x = −√((1−ν)/γ)·U_{iᶜ,iᶜ}c`, which keeps
//! the Schur complement of the diagonal entry at `ν` and hence `U ⪰ 0`.
//! Steps that would raise the objective are rejected.

use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{check_len, Error, Result};
use crate::hermitian::{HermitianOperator, DENSE_CAP};
use crate::linalg::{dot, hermitian_eig_desc, lanczos_leading};
use crate::operator::{MaskedFourierOperator, TruncatedOperator};
use crate::signal::{
    unit_uniform, ComplexImage, ObservationVector, PhaseVector, SupportSelection, C64,
    ZERO_MODULUS,
};

pub const DEFAULT_NU: f64 = 1e-2;
pub const DEFAULT_CYCLES: usize = 20;
pub const DEFAULT_RANK: usize = 2;

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

/// Order in which one cycle visits the rows.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Order {
    Cyclic,
    /// A fresh permutation per cycle drawn from the options seed.
    Shuffled,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BcdOptions {
    pub nu: f64,
    pub cycles: usize,
    pub order: Order,
    /// Stop once a cycle lowers the objective by less than `1e-8·Tr(M)`.
    pub early_stop: bool,
    /// Refuse updates that would raise `Tr(UM)`. Keeps the full solver
    /// monotone; a rank-limited factor usually has `U` singular, so the
    /// barrier step is often worse than the current point and the guard
    /// stalls it.
    pub safeguard: bool,
    /// Seeds the shuffled order and the low-rank starting factor.
    pub seed: u64,
}

impl Default for BcdOptions {
    fn default() -> Self {
        Self {
            nu: DEFAULT_NU,
            cycles: DEFAULT_CYCLES,
            order: Order::Cyclic,
            early_stop: false,
            safeguard: true,
            seed: 0,
        }
    }
}

impl BcdOptions {
    fn validate(&self) -> Result<()> {
        if !(self.nu > 0.0 && self.nu < 1.0) {
            return Err(Error::InvalidArgument(format!("nu = {} outside (0, 1)", self.nu)));
        }
        if self.cycles == 0 {
            return Err(Error::InvalidArgument("cycle count must be at least 1".into()));
        }
        Ok(())
    }

    fn orders(&self, n: usize) -> impl FnMut() -> Vec<usize> {
        let shuffled = self.order == Order::Shuffled;
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        move || {
            let mut idx: Vec<usize> = (0..n).collect();
            if shuffled {
                idx.shuffle(&mut rng);
            }
            idx
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct BcdTrace {
    /// `Tr(UM)` after each cycle.
    pub objective: Vec<f64>,
    pub cycles: usize,
    /// Updates refused because they would have raised the objective.
    pub rejected: usize,
    /// Low-rank only: largest `λ_r/λ_1` seen during each cycle.
    pub eig_ratio: Vec<f64>,
    pub wall_time: f64,
}

/// Hermitian PSD matrix with unit diagonal.
#[derive(Clone, Debug, PartialEq)]
pub struct LiftedMatrix {
    matrix: DMatrix<C64>,
}

impl LiftedMatrix {
    pub fn identity(n: usize) -> Self {
        Self { matrix: DMatrix::identity(n, n) }
    }

    /// Checks the unit diagonal and Hermitian symmetry to `1e-12`.
    pub fn new(matrix: DMatrix<C64>) -> Result<Self> {
        let n = matrix.nrows();
        check_len("lifted matrix columns", n, matrix.ncols())?;
        for i in 0..n {
            let d = matrix[(i, i)];
            if (d - C64::new(1.0, 0.0)).norm() > 1e-12 {
                return Err(Error::InvalidArgument(format!("diagonal entry {i} is {d}")));
            }
        }
        if crate::hermitian::hermitian_defect(&matrix) > 1e-12 {
            return Err(Error::InvalidArgument("lifted matrix is not Hermitian".into()));
        }
        Ok(Self { matrix })
    }

    /// `u u*` for a phase vector.
    pub fn from_phase(u: &PhaseVector) -> Self {
        let v = DVector::from_column_slice(u.values());
        Self { matrix: &v * v.adjoint() }
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.matrix
    }

    pub fn into_matrix(self) -> DMatrix<C64> {
        self.matrix
    }

    /// `Tr(UM)`.
    pub fn objective<H: HermitianOperator + ?Sized>(&self, m: &H) -> f64 {
        lifted_objective(m, &self.matrix)
    }
}

fn lifted_objective<H: HermitianOperator + ?Sized>(m: &H, u: &DMatrix<C64>) -> f64 {
    let n = u.nrows();
    let mut col = vec![ZERO; n];
    let mut total = 0.0;
    for i in 0..n {
        m.column_into(i, &mut col);
        // (UM)_ii = Σ_j U_ij M_ji
        let row: C64 = (0..n).map(|j| u[(i, j)] * col[j]).sum();
        total += row.re;
    }
    total
}

/// Low-rank factor `V` with unit rows, representing `U = VV*`.
#[derive(Clone, Debug, PartialEq)]
pub struct LowRankLift {
    factor: DMatrix<C64>,
    eig_ratio: f64,
}

impl LowRankLift {
    pub fn factor(&self) -> &DMatrix<C64> {
        &self.factor
    }

    pub fn rank(&self) -> usize {
        self.factor.ncols()
    }

    pub fn dim(&self) -> usize {
        self.factor.nrows()
    }

    /// Largest `λ_r/λ_1` of the maintained factor over the final cycle.
    pub fn eig_ratio(&self) -> f64 {
        self.eig_ratio
    }

    pub fn to_lifted(&self) -> LiftedMatrix {
        LiftedMatrix { matrix: &self.factor * self.factor.adjoint() }
    }

    /// `Tr(V* M V)`.
    pub fn objective<H: HermitianOperator + ?Sized>(&self, m: &H) -> f64 {
        factor_objective(m, &self.factor)
    }
}

/// `λ_r / λ_1` of `VV*`, read from the Gram matrix `V*V`.
/// `V* V` from one dot per upper-triangle entry.
fn factor_gram(v: &DMatrix<C64>) -> DMatrix<C64> {
    let r = v.ncols();
    let mut g = DMatrix::zeros(r, r);
    for a in 0..r {
        for b in a..r {
            let z = dot(v.column(a).as_slice(), v.column(b).as_slice());
            g[(a, b)] = z;
            g[(b, a)] = z.conj();
        }
    }
    g
}

/// Smallest over largest eigenvalue of a factor Gram matrix.
fn gram_ratio(gram: &DMatrix<C64>) -> f64 {
    let (vals, _) = hermitian_eig_desc(gram.clone());
    match (vals.first(), vals.last()) {
        (Some(&top), Some(&last)) if top > 0.0 => (last / top).clamp(0.0, 1.0),
        _ => 0.0,
    }
}

fn factor_objective<H: HermitianOperator + ?Sized>(m: &H, v: &DMatrix<C64>) -> f64 {
    (0..v.ncols())
        .map(|k| m.quadratic_form(v.column(k).as_slice()))
        .sum()
}

/// Single-row updates of the dense lifted matrix.
pub struct BcdFull<'a, H: HermitianOperator + ?Sized> {
    m: &'a H,
    nu: f64,
    u: DMatrix<C64>,
    objective: f64,
    rejected: usize,
    column: Vec<C64>,
    guard: bool,
}

impl<'a, H: HermitianOperator + ?Sized> BcdFull<'a, H> {
    /// Starts from `U = I`.
    pub fn new(m: &'a H, nu: f64) -> Result<Self> {
        BcdOptions { nu, ..Default::default() }.validate()?;
        let n = m.dim();
        if n > DENSE_CAP {
            return Err(Error::SizeGuard { n, cap: DENSE_CAP });
        }
        Ok(Self {
            m,
            nu,
            u: DMatrix::identity(n, n),
            objective: m.trace(),
            rejected: 0,
            column: vec![ZERO; n],
            guard: true,
        })
    }

    pub fn objective(&self) -> f64 {
        self.objective
    }

    /// Turns the increase guard on or off (on by default).
    pub fn with_safeguard(mut self, on: bool) -> Self {
        self.guard = on;
        self
    }

    pub fn rejected(&self) -> usize {
        self.rejected
    }

    pub fn lifted(&self) -> LiftedMatrix {
        LiftedMatrix { matrix: self.u.clone() }
    }

    pub fn into_lifted(self) -> LiftedMatrix {
        LiftedMatrix { matrix: self.u }
    }

    /// Rewrites row and column `i`; returns the objective afterwards.
    pub fn update(&mut self, i: usize) -> f64 {
        let n = self.u.nrows();
        self.m.column_into(i, &mut self.column);
        self.column[i] = ZERO;
        let c = DVector::from_column_slice(&self.column);
        let mut u = &self.u * &c;
        u[i] = ZERO;
        let gamma = c.dotc(&u).re;
        let x_new = if gamma > 0.0 {
            u * C64::new(-((1.0 - self.nu) / gamma).sqrt(), 0.0)
        } else {
            DVector::zeros(n)
        };
        let mut change = ZERO;
        for j in 0..n {
            if j != i {
                change += c[j].conj() * (x_new[j] - self.u[(j, i)]);
            }
        }
        let delta = 2.0 * change.re;
        if (self.guard && delta > 0.0) || !delta.is_finite() {
            self.rejected += 1;
            return self.objective;
        }
        for j in 0..n {
            if j != i {
                self.u[(j, i)] = x_new[j];
                self.u[(i, j)] = x_new[j].conj();
            }
        }
        self.objective += delta;
        self.objective
    }
}

trait Sweep {
    fn step(&mut self, i: usize);
    fn end_cycle(&mut self, trace: &mut BcdTrace) -> f64;
}

impl<H: HermitianOperator + ?Sized> Sweep for BcdFull<'_, H> {
    fn step(&mut self, i: usize) {
        self.update(i);
    }

    fn end_cycle(&mut self, _: &mut BcdTrace) -> f64 {
        self.objective
    }
}

fn run_cycles(opts: &BcdOptions, n: usize, scale: f64, state: &mut impl Sweep) -> BcdTrace {
    let start = Instant::now();
    let mut next_order = opts.orders(n);
    let mut trace = BcdTrace::default();
    let mut last = f64::INFINITY;
    for _ in 0..opts.cycles {
        for i in next_order() {
            state.step(i);
        }
        let obj = state.end_cycle(&mut trace);
        trace.objective.push(obj);
        trace.cycles += 1;
        if opts.early_stop && last - obj < 1e-8 * scale {
            break;
        }
        last = obj;
    }
    trace.wall_time = start.elapsed().as_secs_f64();
    trace
}

/// PhaseCut by block coordinate descent on the full lifted matrix.
pub fn bcd_full<H: HermitianOperator + ?Sized>(
    m: &H,
    opts: &BcdOptions,
) -> Result<(LiftedMatrix, BcdTrace)> {
    opts.validate()?;
    let mut state = BcdFull::new(m, opts.nu)?.with_safeguard(opts.safeguard);
    let scale = state.objective().abs();
    let mut trace = run_cycles(opts, m.dim(), scale, &mut state);
    trace.rejected = state.rejected();
    Ok((state.into_lifted(), trace))
}

/// Block coordinate descent on a rank-`r` factor `U ≈ VV*`.
pub struct BcdLowRank<'a, H: HermitianOperator + ?Sized> {
    m: &'a H,
    nu: f64,
    v: DMatrix<C64>,
    rejected: usize,
    ratio: f64,
    column: Vec<C64>,
    guard: bool,
    gram: DMatrix<C64>,
    norms: Vec<f64>,
    next: DMatrix<C64>,
}

impl<'a, H: HermitianOperator + ?Sized> BcdLowRank<'a, H> {
    /// Rows `0..r` start as the unit vectors `e_i`, the rest as seeded random
    /// unit vectors, so `r = n` starts from `U = I`.
    pub fn new(m: &'a H, nu: f64, rank: usize, seed: u64) -> Result<Self> {
        BcdOptions { nu, ..Default::default() }.validate()?;
        let n = m.dim();
        if rank < 2 || rank > n {
            return Err(Error::InvalidArgument(format!(
                "rank {rank} outside [2, {n}]"
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut v = DMatrix::zeros(n, rank);
        for i in 0..n {
            if i < rank {
                v[(i, i)] = C64::new(1.0, 0.0);
            } else {
                let mut norm = 0.0;
                for k in 0..rank {
                    let z = C64::new(unit_uniform(&mut rng) - 0.5, unit_uniform(&mut rng) - 0.5);
                    norm += z.norm_sqr();
                    v[(i, k)] = z;
                }
                let norm = norm.sqrt().max(f64::MIN_POSITIVE);
                for k in 0..rank {
                    v[(i, k)] /= norm;
                }
            }
        }
        Ok(Self {
            m,
            nu,
            gram: factor_gram(&v),
            v,
            rejected: 0,
            ratio: 0.0,
            column: vec![ZERO; n],
            guard: true,
            norms: vec![0.0; n],
            next: DMatrix::zeros(n, rank),
        })
    }

    pub fn factor(&self) -> &DMatrix<C64> {
        &self.v
    }

    /// Turns the increase guard on or off (on by default).
    pub fn with_safeguard(mut self, on: bool) -> Self {
        self.guard = on;
        self
    }

    pub fn rejected(&self) -> usize {
        self.rejected
    }

    /// `Tr(V* M V)`.
    pub fn objective(&self) -> f64 {
        factor_objective(self.m, &self.v)
    }

    /// Largest eigenvalue ratio since the last call, the current factor
    /// included.
    pub fn take_ratio(&mut self) -> f64 {
        let current = gram_ratio(&self.gram);
        std::mem::take(&mut self.ratio).max(current)
    }

    pub fn update(&mut self, i: usize) {
        let (n, r) = (self.v.nrows(), self.v.ncols());
        self.m.column_into(i, &mut self.column);
        self.column[i] = ZERO;
        let g: Vec<C64> = (0..r).map(|k| dot(self.v.column(k).as_slice(), &self.column)).collect();
        let gamma: f64 = g.iter().map(|z| z.norm_sqr()).sum();
        let step = if gamma > 0.0 { ((1.0 - self.nu) / gamma).sqrt() } else { 0.0 };
        // d = x_new − x_old = V a with x_new = −step·V g and x_old = V v_i*
        let a: Vec<C64> = (0..r).map(|k| -g[k] * step - self.v[(i, k)].conj()).collect();
        // column_i = 0, so column* d = g* a
        let delta = 2.0 * g.iter().zip(&a).map(|(gk, ak)| gk.conj() * ak).sum::<C64>().re;
        if (self.guard && delta > 0.0) || !delta.is_finite() {
            self.rejected += 1;
            return;
        }
        // VV* + e_i d* + d e_i* = W S W* with W = [V e_i d]; the Gram of W
        // follows from V*V, row i of V and a, so d is never formed
        let p = r + 2;
        let vi: Vec<C64> = (0..r).map(|k| self.v[(i, k)]).collect();
        let t: C64 = vi.iter().zip(&a).map(|(x, y)| x * y).sum();
        let ga = &self.gram * DVector::from_column_slice(&a);
        let mut gram = DMatrix::<C64>::zeros(p, p);
        gram.view_mut((0, 0), (r, r)).copy_from(&self.gram);
        for k in 0..r {
            gram[(k, r)] = vi[k].conj();
            gram[(k, r + 1)] = ga[k] - vi[k].conj() * t;
        }
        gram[(r, r)] = C64::new(1.0, 0.0);
        let aga: f64 = a.iter().zip(ga.iter()).map(|(x, y)| (x.conj() * y).re).sum();
        gram[(r + 1, r + 1)] = C64::new((aga - t.norm_sqr()).max(0.0), 0.0);
        for x in 0..p {
            for y in 0..x {
                gram[(x, y)] = gram[(y, x)].conj();
            }
        }
        let (sig, pv) = hermitian_eig_desc(gram);
        let floor = sig[0].max(0.0) * 1e-13;
        let q = sig.iter().take_while(|&&s| s > floor).count();
        // B = Σ^{1/2} P*, so W = Q B with orthonormal Q = W P Σ^{-1/2}
        let mut bmat = DMatrix::<C64>::zeros(q, p);
        for k in 0..q {
            let s = sig[k].sqrt();
            for x in 0..p {
                bmat[(k, x)] = pv[(x, k)].conj() * s;
            }
        }
        let mut bs = bmat.clone();
        bs.swap_columns(r, r + 1);
        let core = &bs * bmat.adjoint();
        let core = (&core + core.adjoint()) * C64::new(0.5, 0.0);
        let (vals, vecs) = hermitian_eig_desc(core);
        let keep = r.min(vals.len());
        if keep > 0 && vals[0] > 0.0 && keep == r {
            self.ratio = self.ratio.max((vals[r - 1] / vals[0]).clamp(0.0, 1.0));
        }
        // new factor W C with C = P Σ^{-1/2} Y Λ^{1/2}
        let mut coef = DMatrix::<C64>::zeros(p, r);
        for c in 0..keep {
            let l = vals[c].max(0.0).sqrt();
            for k in 0..q {
                let y = vecs[(k, c)] * (l / sig[k].sqrt());
                for x in 0..p {
                    coef[(x, c)] += pv[(x, k)] * y;
                }
            }
        }
        // W C = V (C_V + a C_d) + e_i (C_e − t C_d)
        let mix = DMatrix::from_fn(r, r, |x, c| coef[(x, c)] + a[x] * coef[(r + 1, c)]);
        let vs = self.v.as_slice();
        let ns = self.next.as_mut_slice();
        let norms = &mut self.norms;
        for c in 0..r {
            let out = &mut ns[c * n..(c + 1) * n];
            let w = mix[(0, c)];
            for (o, vj) in out.iter_mut().zip(&vs[..n]) {
                *o = vj * w;
            }
            out[i] += coef[(r, c)] - t * coef[(r + 1, c)];
            for x in 1..r {
                let w = mix[(x, c)];
                for (o, vj) in out.iter_mut().zip(&vs[x * n..(x + 1) * n]) {
                    *o += vj * w;
                }
            }
            if c == 0 {
                for (s, z) in norms.iter_mut().zip(out.iter()) {
                    *s = z.norm_sqr();
                }
            } else {
                for (s, z) in norms.iter_mut().zip(out.iter()) {
                    *s += z.norm_sqr();
                }
            }
        }
        for s in norms.iter_mut() {
            *s = if *s > 0.0 { 1.0 / s.sqrt() } else { 0.0 };
        }
        for c in 0..r {
            for (z, s) in ns[c * n..(c + 1) * n].iter_mut().zip(norms.iter()) {
                *z *= *s;
            }
        }
        for (j, s) in norms.iter().enumerate() {
            if *s == 0.0 {
                ns[j] = C64::new(1.0, 0.0);
            }
        }
        std::mem::swap(&mut self.v, &mut self.next);
        self.gram = factor_gram(&self.v);
    }

    pub fn into_lift(self, eig_ratio: f64) -> LowRankLift {
        LowRankLift { factor: self.v, eig_ratio }
    }
}

impl<H: HermitianOperator + ?Sized> Sweep for BcdLowRank<'_, H> {
    fn step(&mut self, i: usize) {
        self.update(i);
    }

    fn end_cycle(&mut self, trace: &mut BcdTrace) -> f64 {
        trace.eig_ratio.push(self.take_ratio());
        self.objective()
    }
}

/// PhaseCut by block coordinate descent on a rank-`rank` factor.
///
/// The per-cycle eigenvalue ratios are kept in the trace; the lift reports
/// the largest ratio seen during the final cycle.
pub fn bcd_lowrank<H: HermitianOperator + ?Sized>(
    m: &H,
    rank: usize,
    opts: &BcdOptions,
) -> Result<(LowRankLift, BcdTrace)> {
    opts.validate()?;
    let mut state = BcdLowRank::new(m, opts.nu, rank, opts.seed)?.with_safeguard(opts.safeguard);
    let scale = m.trace().abs();
    let mut trace = run_cycles(opts, m.dim(), scale, &mut state);
    trace.rejected = state.rejected();
    let ratio = trace.eig_ratio.last().copied().unwrap_or(0.0);
    Ok((state.into_lift(ratio), trace))
}

/// Phase read off the leading eigenvector of a lifted matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct PhaseExtraction {
    pub phase: PhaseVector,
    pub eigenvalue: f64,
    /// No usable leading direction: the matrix is diagonal or the top
    /// eigenvalue is not separated from the next one.
    pub degenerate: bool,
}

fn phase_from_vector(v: &[C64]) -> PhaseVector {
    let dirs: Vec<C64> = v
        .iter()
        .map(|z| if z.norm() < ZERO_MODULUS { C64::new(1.0, 0.0) } else { *z })
        .collect();
    PhaseVector::from_directions(&dirs).canonical()
}

fn gap_is_tiny(first: f64, second: f64) -> bool {
    first <= 0.0 || (first - second) <= 1e-9 * first
}

/// Leading eigenvector of `U` (Lanczos from `e_1`), normalized entrywise.
pub fn extract_phase(u: &LiftedMatrix) -> PhaseExtraction {
    let n = u.dim();
    let mut start = vec![ZERO; n];
    if n > 0 {
        start[0] = C64::new(1.0, 0.0);
    }
    let m = u.matrix();
    let pair = lanczos_leading(
        n,
        |v, out| {
            let y = m * DVector::from_column_slice(v);
            out.copy_from_slice(y.as_slice());
        },
        &start,
    );
    let mut off = 0.0f64;
    for j in 0..n {
        for i in 0..n {
            if i != j {
                off = off.max(m[(i, j)].norm());
            }
        }
    }
    PhaseExtraction {
        phase: phase_from_vector(&pair.vector),
        eigenvalue: pair.value,
        degenerate: off < ZERO_MODULUS || (n > 1 && gap_is_tiny(pair.value, pair.second)),
    }
}

/// Leading eigenvector of `VV*` through the `r×r` Gram matrix `V*V`.
pub fn extract_phase_lowrank(lift: &LowRankLift) -> PhaseExtraction {
    let v = lift.factor();
    let (vals, vecs) = hermitian_eig_desc(v.ad_mul(v));
    let lead = v * vecs.column(0);
    let second = vals.get(1).copied().unwrap_or(f64::NEG_INFINITY);
    PhaseExtraction {
        phase: phase_from_vector(lead.as_slice()),
        eigenvalue: vals[0],
        degenerate: v.nrows() > 1 && gap_is_tiny(vals[0], second),
    }
}

/// Least-squares signal `x = A† diag(b) u`.
pub fn reconstruct_signal(
    op: &MaskedFourierOperator,
    b: &ObservationVector,
    u: &PhaseVector,
) -> Result<ComplexImage> {
    check_len("observations", op.n_obs(), b.len())?;
    check_len("phase vector", op.n_obs(), u.len())?;
    let y: Vec<C64> = u.values().iter().zip(b.values()).map(|(z, bi)| z * bi).collect();
    op.apply_a_dagger(&y)
}

#[derive(Clone, Debug)]
pub struct TruncatedSolve {
    pub image: ComplexImage,
    /// Full-length phase; discarded coordinates are set to 1.
    pub phase: PhaseVector,
    pub lift: LowRankLift,
    pub trace: BcdTrace,
    pub degenerate: bool,
}

/// Low-rank BCD on the support-restricted objective `M1`, followed by
/// reconstruction from the kept observations only.
pub fn solve_truncated(
    op: &MaskedFourierOperator,
    b: &ObservationVector,
    support: &SupportSelection,
    rank: usize,
    opts: &BcdOptions,
) -> Result<TruncatedSolve> {
    let trunc = TruncatedOperator::new(op, b, support.clone())?;
    let (lift, trace) = bcd_lowrank(&trunc, rank, opts)?;
    let ext = extract_phase_lowrank(&lift);
    let (phase, image) = embed_and_reconstruct(op, b, support, &ext.phase)?;
    Ok(TruncatedSolve { image, phase, lift, trace, degenerate: ext.degenerate })
}

/// Lifts a support-indexed phase to full length (ones elsewhere) and
/// reconstructs from `b` restricted to the support.
pub fn embed_and_reconstruct(
    op: &MaskedFourierOperator,
    b: &ObservationVector,
    support: &SupportSelection,
    kept: &PhaseVector,
) -> Result<(PhaseVector, ComplexImage)> {
    check_len("kept phase", support.len(), kept.len())?;
    let mut full = vec![C64::new(1.0, 0.0); op.n_obs()];
    let mut y = vec![ZERO; op.n_obs()];
    for (&i, z) in support.indices().iter().zip(kept.values()) {
        full[i] = *z;
        y[i] = z * b.values()[i];
    }
    let image = op.apply_a_dagger(&y)?;
    Ok((PhaseVector::new(full)?, image))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hermitian::DenseHermitian;
    use proptest::prelude::*;
    use rand::Rng;

    fn random_psd(seed: u64, n: usize, rank: usize) -> DenseHermitian {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = DMatrix::from_fn(n, rank, |_, _| {
            C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
        });
        DenseHermitian::new(&g * g.adjoint()).unwrap()
    }

    fn opts(nu: f64, cycles: usize) -> BcdOptions {
        BcdOptions { nu, cycles, ..Default::default() }
    }

    #[test]
    fn zero_objective_keeps_identity() {
        let m = DenseHermitian::new(DMatrix::zeros(4, 4)).unwrap();
        let (u, trace) = bcd_full(&m, &opts(0.1, 3)).unwrap();
        assert_eq!(u, LiftedMatrix::identity(4));
        assert_eq!(trace.objective, vec![0.0; 3]);
    }

    #[test]
    fn two_by_two_reaches_alignment() {
        let m = DenseHermitian::new(DMatrix::from_row_slice(
            2,
            2,
            &[1.0, -1.0, -1.0, 1.0].map(|x| C64::new(x, 0.0)),
        ))
        .unwrap();
        let nu = 1e-4;
        let (u, trace) = bcd_full(&m, &opts(nu, 10)).unwrap();
        assert!((u.matrix()[(0, 1)] - C64::new((1.0 - nu).sqrt(), 0.0)).norm() < 1e-12);
        assert!(*trace.objective.last().unwrap() <= 1e-3);
        assert!((u.objective(&m) - trace.objective[9]).abs() < 1e-12);
    }

    #[test]
    fn bad_parameters_rejected() {
        let m = random_psd(0, 4, 4);
        assert!(bcd_full(&m, &opts(0.0, 1)).is_err());
        assert!(bcd_full(&m, &opts(1.0, 1)).is_err());
        assert!(bcd_full(&m, &opts(0.5, 0)).is_err());
        assert!(bcd_lowrank(&m, 1, &opts(0.5, 1)).is_err());
        assert!(bcd_lowrank(&m, 5, &opts(0.5, 1)).is_err());
    }

    #[test]
    fn updates_never_raise_objective() {
        for seed in 0..30 {
            let n = 3 + (seed as usize % 10);
            let m = random_psd(seed, n, 1 + seed as usize % n);
            let mut state = BcdFull::new(&m, 1e-3).unwrap();
            let mut last = state.lifted().objective(&m);
            for _ in 0..5 {
                for i in 0..n {
                    state.update(i);
                    let exact = state.lifted().objective(&m);
                    assert!(exact <= last + 1e-12);
                    assert!((exact - state.objective()).abs() < 1e-9 * m.trace());
                    last = exact;
                }
            }
            let u = state.lifted();
            for i in 0..n {
                assert_eq!(u.matrix()[(i, i)], C64::new(1.0, 0.0));
                for j in 0..n {
                    assert_eq!(u.matrix()[(i, j)], u.matrix()[(j, i)].conj());
                }
            }
        }
    }

    #[test]
    fn full_rank_factor_matches_dense() {
        for seed in 0..5 {
            let n = 6 + seed as usize;
            let m = random_psd(seed + 40, n, 3);
            let o = opts(1e-3, 8);
            let (u, tf) = bcd_full(&m, &o).unwrap();
            let (lift, tl) = bcd_lowrank(&m, n, &o).unwrap();
            let tol = 1e-6 * m.trace();
            assert!((tf.objective.last().unwrap() - tl.objective.last().unwrap()).abs() < tol);
            assert!((lift.to_lifted().matrix() - u.matrix()).norm() < 1e-6);
        }
    }

    #[test]
    fn lowrank_rows_stay_unit() {
        let m = random_psd(9, 20, 4);
        let (lift, trace) = bcd_lowrank(&m, 3, &opts(1e-2, 5)).unwrap();
        for i in 0..20 {
            assert!((lift.factor().row(i).norm() - 1.0).abs() < 1e-8);
        }
        assert!(trace.eig_ratio.iter().all(|r| (0.0..=1.0).contains(r)));
        assert!((0.0..=1.0).contains(&lift.eig_ratio()));
    }

    #[test]
    fn shuffled_order_is_seeded() {
        let m = random_psd(2, 10, 2);
        let o = BcdOptions { order: Order::Shuffled, seed: 5, ..opts(1e-2, 4) };
        let (a, ta) = bcd_full(&m, &o).unwrap();
        let (b, tb) = bcd_full(&m, &o).unwrap();
        assert_eq!(a, b);
        assert_eq!(ta.objective, tb.objective);
    }

    #[test]
    fn early_stop_cuts_cycles() {
        let m = random_psd(3, 5, 1);
        let o = BcdOptions { early_stop: true, ..opts(1e-2, 500) };
        let (_, trace) = bcd_full(&m, &o).unwrap();
        assert!(trace.cycles < 500);
        assert_eq!(trace.objective.len(), trace.cycles);
    }

    fn unit_vector(angles: &[f64]) -> PhaseVector {
        PhaseVector::new(angles.iter().map(|&t| C64::from_polar(1.0, t)).collect()).unwrap()
    }

    #[test]
    fn identity_extracts_ones_and_flags() {
        let ext = extract_phase(&LiftedMatrix::identity(3));
        assert_eq!(ext.phase, PhaseVector::ones(3));
        assert!(ext.degenerate);
    }

    #[test]
    fn rank_one_extraction_is_canonical() {
        let u = unit_vector(&[0.4, -1.0, 2.5, 3.0]);
        let ext = extract_phase(&LiftedMatrix::from_phase(&u));
        let want: Vec<C64> = u.values().iter().map(|z| z * u.values()[0].conj()).collect();
        for (a, b) in ext.phase.values().iter().zip(&want) {
            assert!((a - b).norm() < 1e-12);
        }
        assert!(!ext.degenerate);
    }

    proptest! {
        #[test]
        fn lift_then_extract_recovers_phase(angles in prop::collection::vec(-3.2f64..3.2, 2..12), theta in -3.2f64..3.2) {
            let u = unit_vector(&angles);
            let shifted = PhaseVector::new(u.values().iter().map(|z| z * C64::from_polar(1.0, theta)).collect()).unwrap();
            let a = extract_phase(&LiftedMatrix::from_phase(&u)).phase;
            let b = extract_phase(&LiftedMatrix::from_phase(&shifted)).phase;
            let c = u.canonical();
            for ((x, y), z) in a.values().iter().zip(b.values()).zip(c.values()) {
                prop_assert!((x - y).norm() < 1e-10);
                prop_assert!((x - z).norm() < 1e-10);
            }
        }
    }
}
