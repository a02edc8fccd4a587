//! Alternating-projection and coordinate-wise phase methods.

use std::time::Instant;

use crate::error::{check_len, Error, Result};
use crate::hermitian::HermitianOperator;
use crate::operator::MaskedFourierOperator;
use crate::signal::{unit_or, ObservationVector, PhaseVector, C64};

/// Default Fienup step.
pub const DEFAULT_BETA: f64 = 0.95;

/// Objective values recorded by a local solver, one per iteration or cycle.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct GreedyTrace {
    pub objective: Vec<f64>,
    pub iterations: usize,
    pub wall_time: f64,
}

fn check_start(op: &MaskedFourierOperator, b: &ObservationVector, y0: &[C64]) -> Result<()> {
    check_len("observations", op.n_obs(), b.len())?;
    check_len("initial estimate", op.n_obs(), y0.len())
}

fn check_iters(iters: usize) -> Result<()> {
    if iters == 0 {
        return Err(Error::InvalidArgument("iteration count must be at least 1".into()));
    }
    Ok(())
}

fn residual(a: &[C64], b: &[C64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum()
}

/// Phase of `p_i`, keeping the phase of `prev_i` where `p_i` vanishes.
fn phase_of(p: C64, prev: C64) -> C64 {
    unit_or(p, unit_or(prev, C64::new(1.0, 0.0)))
}

/// Gerchberg-Saxton: `y ← b ∘ phase(AA† y)`.
///
/// `y0` must already satisfy `|y0| = b`. The trace holds
/// `‖(I − AA†) y‖² / ‖b‖²` after each iteration.
pub fn gerchberg_saxton(
    op: &MaskedFourierOperator,
    b: &ObservationVector,
    y0: &[C64],
    iters: usize,
) -> Result<(Vec<C64>, GreedyTrace)> {
    check_start(op, b, y0)?;
    check_iters(iters)?;
    for (i, (y, &bi)) in y0.iter().zip(b.values()).enumerate() {
        if (y.norm() - bi).abs() > 1e-9 * (1.0 + bi) {
            return Err(Error::InvalidArgument(format!(
                "initial estimate entry {i} has modulus {} but observation {bi}",
                y.norm()
            )));
        }
    }
    let start = Instant::now();
    let bnorm = b.norm_sqr().max(f64::MIN_POSITIVE);
    let mut y = y0.to_vec();
    let mut p = op.project(&y);
    let mut trace = GreedyTrace::default();
    for _ in 0..iters {
        for ((yi, pi), bi) in y.iter_mut().zip(&p).zip(b.values()) {
            *yi = phase_of(*pi, *yi) * *bi;
        }
        p = op.project(&y);
        trace.objective.push(residual(&p, &y) / bnorm);
        trace.iterations += 1;
    }
    trace.wall_time = start.elapsed().as_secs_f64();
    Ok((y, trace))
}

/// Fienup input-output: `y ← y − β (y − b ∘ w)` with `w = phase(AA† y)`.
///
/// The trace holds `‖AA† y − b ∘ w‖² / ‖b‖²` for each new iterate. With
/// `β = 1` the iterates coincide with Gerchberg-Saxton.
pub fn fienup(
    op: &MaskedFourierOperator,
    b: &ObservationVector,
    y0: &[C64],
    beta: f64,
    iters: usize,
) -> Result<(Vec<C64>, GreedyTrace)> {
    check_start(op, b, y0)?;
    check_iters(iters)?;
    if !(beta > 0.0 && beta <= 1.0) {
        return Err(Error::InvalidArgument(format!("Fienup step {beta} outside (0, 1]")));
    }
    let start = Instant::now();
    let bnorm = b.norm_sqr().max(f64::MIN_POSITIVE);
    let mut y = y0.to_vec();
    let mut p = op.project(&y);
    let mut trace = GreedyTrace::default();
    for _ in 0..iters {
        for ((yi, pi), bi) in y.iter_mut().zip(&p).zip(b.values()) {
            let target = phase_of(*pi, *yi) * *bi;
            *yi -= (*yi - target) * beta;
        }
        p = op.project(&y);
        let dist: f64 = p
            .iter()
            .zip(&y)
            .zip(b.values())
            .map(|((pi, yi), bi)| (pi - phase_of(*pi, *yi) * *bi).norm_sqr())
            .sum();
        trace.objective.push(dist / bnorm);
        trace.iterations += 1;
    }
    trace.wall_time = start.elapsed().as_secs_f64();
    Ok((y, trace))
}

/// Phase estimate `phase(AA† y)` from a Fienup or Gerchberg-Saxton iterate.
pub fn phase_from_estimate(op: &MaskedFourierOperator, y: &[C64]) -> Result<PhaseVector> {
    check_len("estimate", op.n_obs(), y.len())?;
    let p = op.project(y);
    let u: Vec<C64> = p.iter().zip(y).map(|(pi, yi)| phase_of(*pi, *yi)).collect();
    Ok(PhaseVector::from_directions(&u))
}

/// Coordinate descent on `u* M u` over unit-modulus vectors.
///
/// Keeps `M u` up to date so each update costs one column of `M`.
pub struct GreedyPhase<'a, H: HermitianOperator + ?Sized> {
    m: &'a H,
    u: Vec<C64>,
    mu: Vec<C64>,
    objective: f64,
    column: Vec<C64>,
}

impl<'a, H: HermitianOperator + ?Sized> GreedyPhase<'a, H> {
    pub fn new(m: &'a H, u0: &PhaseVector) -> Result<Self> {
        check_len("phase vector", m.dim(), u0.len())?;
        let mut state = Self {
            m,
            u: u0.values().to_vec(),
            mu: Vec::new(),
            objective: 0.0,
            column: vec![C64::new(0.0, 0.0); m.dim()],
        };
        state.refresh();
        Ok(state)
    }

    /// Recomputes `M u` and the objective from scratch.
    pub fn refresh(&mut self) {
        self.mu = self.m.apply(&self.u);
        self.objective = self.u.iter().zip(&self.mu).map(|(a, b)| (a.conj() * b).re).sum();
    }

    pub fn objective(&self) -> f64 {
        self.objective
    }

    /// Sets `u_i` to the minimizer of `u* M u` with the other entries fixed
    /// and returns the new objective.
    pub fn update(&mut self, i: usize) -> f64 {
        let mii = self.m.diagonal(i);
        let s = self.mu[i] - self.u[i] * mii;
        let scale = s.norm();
        if !(scale > 0.0) || !scale.is_finite() {
            return self.objective;
        }
        let next = -s / scale;
        let delta = next - self.u[i];
        if delta.norm() == 0.0 {
            return self.objective;
        }
        let decrease = 2.0 * (delta.conj() * s).re;
        self.m.column_into(i, &mut self.column);
        for (mu, c) in self.mu.iter_mut().zip(&self.column) {
            *mu += c * delta;
        }
        self.u[i] = next;
        self.objective += decrease;
        self.objective
    }

    pub fn cycle(&mut self) -> f64 {
        for i in 0..self.u.len() {
            self.update(i);
        }
        self.refresh();
        self.objective
    }

    pub fn phase(&self) -> PhaseVector {
        PhaseVector::from_directions(&self.u)
    }
}

/// Runs `cycles` sweeps of [`GreedyPhase`]; the trace holds `u* M u` after
/// each sweep.
pub fn greedy_phase<H: HermitianOperator + ?Sized>(
    m: &H,
    u0: &PhaseVector,
    cycles: usize,
) -> Result<(PhaseVector, GreedyTrace)> {
    check_iters(cycles)?;
    let start = Instant::now();
    let mut state = GreedyPhase::new(m, u0)?;
    let mut trace = GreedyTrace::default();
    for _ in 0..cycles {
        trace.objective.push(state.cycle());
        trace.iterations += 1;
    }
    trace.wall_time = start.elapsed().as_secs_f64();
    Ok((state.phase(), trace))
}
