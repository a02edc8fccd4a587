//! One end-to-end experiment: density, masks, observations, solver,
//! optional refinement, reconstruction and metrics.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;
use std::time::Instant;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::bcd::{
    bcd_full, bcd_lowrank, embed_and_reconstruct, extract_phase, extract_phase_lowrank,
    reconstruct_signal, BcdOptions, Order, DEFAULT_CYCLES, DEFAULT_NU, DEFAULT_RANK,
};
use crate::error::{Error, Result};
use crate::greedy::{fienup, gerchberg_saxton, greedy_phase, phase_from_estimate, DEFAULT_BETA};
use crate::hermitian::{DenseHermitian, HermitianOperator, DENSE_CAP};
use crate::operator::{MaskedFourierOperator, PhaseMatrix, TruncatedOperator};
use crate::signal::{
    align_global_phase, make_masks, select_support, ComplexImage, ObservationVector, PhaseVector,
    SupportSelection, C64, ZERO_MODULUS,
};
use crate::structured::{
    build_real_embedding_truncated, solve_phasecut_plus, solve_phasecut_real,
    solve_phasecut_real_nonneg, toeplitz_lines, AdmmOptions, DEFAULT_ADMM_ITERS, STRUCTURED_CAP,
};

use super::density::{blob_density, default_sigma, project_density};
use super::noise::simulate_observations;
use super::pdb::{caffeine, parse_pdb};

/// Recovery threshold on the relative observation MSE.
pub const RECOVERY_THRESHOLD: f64 = 1e-4;

#[derive(Clone, Debug, PartialEq)]
pub enum Molecule {
    Pdb(PathBuf),
    Caffeine,
    /// The fixed synthetic blob density.
    Blobs,
}

impl Molecule {
    pub fn density(&self, n: usize, sigma: f64) -> Result<ComplexImage> {
        match self {
            Molecule::Pdb(path) => {
                let file = std::fs::File::open(path)?;
                let atoms = parse_pdb(std::io::BufReader::new(file))?;
                project_density(&atoms, n, sigma)
            }
            Molecule::Caffeine => project_density(&caffeine(), n, sigma),
            Molecule::Blobs => blob_density(n),
        }
    }
}

/// Scale of the simulated image. Metrics are scale free; the scale only
/// sets how many photons the Poisson noise model sees.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Normalization {
    /// Largest pixel equal to one.
    UnitPeak,
    /// Pixels summing to one, as rasterized.
    UnitMass,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Solver {
    /// Uses the phase of the clean `A x`; a consistency baseline.
    Truth,
    GerchbergSaxton,
    Fienup,
    Greedy,
    Bcd,
    BcdLowRank,
    Real,
    RealNonneg,
    Plus,
}

impl Solver {
    const NAMES: [(Solver, &'static str); 9] = [
        (Solver::Truth, "truth"),
        (Solver::GerchbergSaxton, "gs"),
        (Solver::Fienup, "fienup"),
        (Solver::Greedy, "greedy"),
        (Solver::Bcd, "phasecut-bcd"),
        (Solver::BcdLowRank, "phasecut-bcdlr"),
        (Solver::Real, "phasecut-real"),
        (Solver::RealNonneg, "phasecut-real-nonneg"),
        (Solver::Plus, "phasecut-plus"),
    ];

    pub fn name(self) -> &'static str {
        Self::NAMES.iter().find(|(s, _)| *s == self).map(|(_, n)| *n).unwrap()
    }

    /// Relaxation methods, the ones that accept `+refine`.
    pub fn is_sdp(self) -> bool {
        matches!(self, Solver::Bcd | Solver::BcdLowRank | Solver::Real | Solver::RealNonneg | Solver::Plus)
    }

    fn is_structured(self) -> bool {
        matches!(self, Solver::Real | Solver::RealNonneg | Solver::Plus)
    }
}

/// A solver with an optional refinement stage (`"<solver>+refine"`).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Method {
    pub solver: Solver,
    pub refine: bool,
}

impl Method {
    pub const fn new(solver: Solver, refine: bool) -> Self {
        Self { solver, refine }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}", self.solver.name(), if self.refine { "+refine" } else { "" })
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (base, refine) = match s.trim().strip_suffix("+refine") {
            Some(b) => (b, true),
            None => (s.trim(), false),
        };
        let solver = Solver::NAMES
            .iter()
            .find(|(_, n)| *n == base)
            .map(|(s, _)| *s)
            .ok_or_else(|| Error::Config(format!("unknown method {s:?}")))?;
        if refine && !solver.is_sdp() {
            return Err(Error::Config(format!("{base} does not take +refine")));
        }
        Ok(Method { solver, refine })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub molecule: Molecule,
    pub normalization: Normalization,
    /// Image side `N`.
    pub n: usize,
    pub masks: usize,
    /// Mask block side `r`.
    pub filter_res: usize,
    pub osf: usize,
    pub alpha: f64,
    /// Number of largest observations kept for the relaxation; `None` keeps
    /// all.
    pub kept: Option<usize>,
    pub method: Method,
    pub nu: f64,
    pub cycles: usize,
    pub rank: usize,
    pub fienup_iters: usize,
    pub beta: f64,
    /// Greedy sweeps at the start of refinement.
    pub greedy_cycles: usize,
    /// Blob width in pixels; `None` uses [`default_sigma`].
    pub sigma: Option<f64>,
    pub admm_iters: usize,
    pub seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            molecule: Molecule::Blobs,
            normalization: Normalization::UnitPeak,
            n: 16,
            masks: 2,
            filter_res: 1,
            osf: 2,
            alpha: 0.0,
            kept: None,
            method: Method::new(Solver::BcdLowRank, true),
            nu: DEFAULT_NU,
            cycles: DEFAULT_CYCLES,
            rank: DEFAULT_RANK,
            fienup_iters: 5000,
            beta: DEFAULT_BETA,
            greedy_cycles: 5,
            sigma: None,
            admm_iters: DEFAULT_ADMM_ITERS,
            seed: 0,
        }
    }
}

impl ExperimentConfig {
    pub fn n_obs(&self) -> usize {
        let l = self.osf * self.n;
        self.masks * l * l
    }

    /// Dimension of the relaxation after support selection.
    pub fn effective_dim(&self) -> usize {
        self.kept.map_or(self.n_obs(), |k| k.min(self.n_obs()))
    }

    fn uses_fienup(&self) -> bool {
        matches!(self.method.solver, Solver::GerchbergSaxton | Solver::Fienup) || self.method.refine
    }

    /// Checks parameters and method/size compatibility without computing.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.n == 0 || self.masks == 0 || self.osf == 0 || self.filter_res == 0 {
            return bad("n, masks, osf and filter_res must be positive".into());
        }
        if self.n % self.filter_res != 0 {
            return bad(format!("filter_res {} does not divide n = {}", self.filter_res, self.n));
        }
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return bad(format!("alpha = {} must be finite and ≥ 0", self.alpha));
        }
        if self.kept == Some(0) {
            return bad("kept must be positive".into());
        }
        if let Some(s) = self.sigma {
            if !(s > 0.0) {
                return bad(format!("sigma = {s} must be positive"));
            }
        }
        let solver = self.method.solver;
        if matches!(solver, Solver::Bcd | Solver::BcdLowRank) && !(self.nu > 0.0 && self.nu < 1.0) {
            return bad(format!("nu = {} outside (0, 1)", self.nu));
        }
        if matches!(solver, Solver::Greedy | Solver::Bcd | Solver::BcdLowRank) && self.cycles == 0 {
            return bad("cycles must be positive".into());
        }
        if self.uses_fienup() {
            if self.fienup_iters == 0 {
                return bad("fienup_iters must be positive".into());
            }
            if solver != Solver::GerchbergSaxton && !(self.beta > 0.0 && self.beta <= 1.0) {
                return bad(format!("beta = {} outside (0, 1]", self.beta));
            }
        }
        if self.method.refine && self.greedy_cycles == 0 {
            return bad("greedy_cycles must be positive with +refine".into());
        }
        let dim = self.effective_dim();
        if solver == Solver::BcdLowRank && !(self.rank >= 2 && self.rank <= dim) {
            return bad(format!("rank {} outside [2, {dim}]", self.rank));
        }
        if solver == Solver::Bcd && dim > DENSE_CAP {
            return bad(format!("phasecut-bcd needs a dense {dim}×{dim} matrix; cap {DENSE_CAP}, set kept"));
        }
        if solver.is_structured() {
            if dim > STRUCTURED_CAP {
                return bad(format!("{} is limited to {STRUCTURED_CAP} observations, got {dim}; set kept", solver.name()));
            }
            if self.admm_iters == 0 {
                return bad("admm_iters must be positive".into());
            }
        }
        Ok(())
    }

    pub fn sigma_or_default(&self) -> f64 {
        self.sigma.unwrap_or_else(|| default_sigma(self.n))
    }
}

const STREAM_MASKS: u64 = 1;
const STREAM_NOISE: u64 = 2;
const STREAM_INIT: u64 = 3;
const STREAM_SOLVER: u64 = 4;

/// Independent 64-bit seed for one purpose, from the experiment seed.
pub fn stream_seed(seed: u64, stream: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng.next_u64()
}

/// Ground truth, operator and observations of one experiment.
#[derive(Debug)]
pub struct Instance {
    pub truth: ComplexImage,
    pub op: MaskedFourierOperator,
    pub b: ObservationVector,
    pub b_clean: ObservationVector,
}

pub fn build_instance(cfg: &ExperimentConfig) -> Result<Instance> {
    let mut truth = cfg.molecule.density(cfg.n, cfg.sigma_or_default())?;
    if cfg.normalization == Normalization::UnitPeak {
        let peak = truth.magnitudes().into_iter().fold(0.0, f64::max);
        if peak > 0.0 {
            truth = truth.scaled(C64::new(1.0 / peak, 0.0));
        }
    }
    let masks = make_masks(cfg.masks, cfg.n, cfg.filter_res, stream_seed(cfg.seed, STREAM_MASKS))?;
    let op = MaskedFourierOperator::new(masks, cfg.osf)?;
    let (b, b_clean) = simulate_observations(&op, &truth, cfg.alpha, stream_seed(cfg.seed, STREAM_NOISE))?;
    Ok(Instance { truth, op, b, b_clean })
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentResult {
    /// `‖|A x̂| − b_clean‖² / ‖b_clean‖²`.
    pub obs_mse: f64,
    /// `‖e^{iθ} x̂ − x‖² / ‖x‖²` after the best global phase.
    pub img_residual: f64,
    pub recovered: bool,
    /// `‖(I − AA†)(b ∘ u)‖² / ‖b‖²` at the final phase.
    pub obj_final: f64,
    /// Per-iteration (or per-cycle) objective of the main solver.
    pub solver_trace: Vec<f64>,
    /// Greedy then Fienup objectives of the refinement stage.
    pub refine_trace: Vec<f64>,
    pub time_solver: f64,
    pub time_refine: f64,
    pub eig_ratio: Option<f64>,
    /// Whether a splitting solve met its tolerance.
    pub sdp_converged: Option<bool>,
    pub estimate: ComplexImage,
    pub phase: PhaseVector,
}

impl ExperimentResult {
    /// Equality ignoring wall-clock times.
    pub fn same_outcome(&self, other: &Self) -> bool {
        let strip = |r: &Self| Self { time_solver: 0.0, time_refine: 0.0, ..r.clone() };
        strip(self) == strip(other)
    }
}

/// `‖(I − AA†)(b ∘ u)‖² / ‖b‖²`.
pub fn relative_objective(op: &MaskedFourierOperator, b: &ObservationVector, u: &PhaseVector) -> f64 {
    let y: Vec<C64> = u.values().iter().zip(b.values()).map(|(z, bi)| z * bi).collect();
    let p = op.project(&y);
    let num: f64 = y.iter().zip(&p).map(|(a, c)| (a - c).norm_sqr()).sum();
    num / b.norm_sqr().max(f64::MIN_POSITIVE)
}

/// `‖|A x̂| − b_clean‖² / ‖b_clean‖²`.
pub fn observation_mse(op: &MaskedFourierOperator, x: &ComplexImage, b_clean: &ObservationVector) -> Result<f64> {
    let y = op.apply_a(x)?;
    let num: f64 = y.iter().zip(b_clean.values()).map(|(z, b)| (z.norm() - b).powi(2)).sum();
    Ok(num / b_clean.norm_sqr().max(f64::MIN_POSITIVE))
}

fn unit_phase(z: C64) -> C64 {
    if z.norm() < ZERO_MODULUS {
        C64::new(1.0, 0.0)
    } else {
        z / z.norm()
    }
}

fn random_phase(n: usize, seed: u64) -> PhaseVector {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let u: Vec<C64> = (0..n)
        .map(|_| {
            let t = crate::signal::unit_uniform(&mut rng);
            C64::from_polar(1.0, 2.0 * std::f64::consts::PI * t)
        })
        .collect();
    PhaseVector::new(u).expect("unit entries")
}

/// Full-length phase: `kept` on the support, `phase(A x̂)` elsewhere.
fn complete_phase(op: &MaskedFourierOperator, support: &SupportSelection, kept: &PhaseVector, x: &ComplexImage) -> Result<PhaseVector> {
    if support.is_full() {
        let mut out = vec![C64::new(1.0, 0.0); op.n_obs()];
        for (&i, z) in support.indices().iter().zip(kept.values()) {
            out[i] = *z;
        }
        return PhaseVector::new(out);
    }
    let mut out: Vec<C64> = op.apply_a(x)?.into_iter().map(unit_phase).collect();
    for (&i, z) in support.indices().iter().zip(kept.values()) {
        out[i] = *z;
    }
    PhaseVector::new(out)
}

/// Objective the relaxations and greedy stages run on: `M`, or `M1` when a
/// support is selected.
enum Objective<'a> {
    Full(PhaseMatrix<'a>),
    Truncated(TruncatedOperator<'a>),
}

impl Objective<'_> {
    fn as_dyn(&self) -> &dyn HermitianOperator {
        match self {
            Objective::Full(m) => m,
            Objective::Truncated(t) => t,
        }
    }
}

struct Stage {
    kept_phase: PhaseVector,
    estimate: ComplexImage,
    trace: Vec<f64>,
    eig_ratio: Option<f64>,
    converged: Option<bool>,
    /// Full phase already determined (projection methods).
    full_phase: Option<PhaseVector>,
}

fn reconstruct_kept(inst: &Instance, support: &SupportSelection, kept: &PhaseVector) -> Result<ComplexImage> {
    if support.is_full() {
        let mut full = vec![C64::new(1.0, 0.0); inst.op.n_obs()];
        for (&i, z) in support.indices().iter().zip(kept.values()) {
            full[i] = *z;
        }
        reconstruct_signal(&inst.op, &inst.b, &PhaseVector::new(full)?)
    } else {
        Ok(embed_and_reconstruct(&inst.op, &inst.b, support, kept)?.1)
    }
}

fn run_solver(cfg: &ExperimentConfig, inst: &Instance, support: &SupportSelection, obj: &Objective) -> Result<Stage> {
    let (op, b) = (&inst.op, &inst.b);
    let init_seed = stream_seed(cfg.seed, STREAM_INIT);
    let bcd_opts = BcdOptions {
        nu: cfg.nu,
        cycles: cfg.cycles,
        order: Order::Cyclic,
        early_stop: false,
        // the rank-limited factor stalls under the guard
        safeguard: cfg.method.solver != Solver::BcdLowRank,
        seed: stream_seed(cfg.seed, STREAM_SOLVER),
    };
    let admm = AdmmOptions { max_iters: cfg.admm_iters, ..AdmmOptions::default() };
    let stage = |kept_phase: PhaseVector, trace: Vec<f64>| -> Result<Stage> {
        let estimate = reconstruct_kept(inst, support, &kept_phase)?;
        Ok(Stage { kept_phase, estimate, trace, eig_ratio: None, converged: None, full_phase: None })
    };
    match cfg.method.solver {
        Solver::Truth => {
            let u: Vec<C64> = op.apply_a(&inst.truth)?.into_iter().map(unit_phase).collect();
            let u = PhaseVector::new(u)?;
            let estimate = reconstruct_signal(op, b, &u)?;
            let kept = PhaseVector::new(support.indices().iter().map(|&i| u.values()[i]).collect())?;
            Ok(Stage { kept_phase: kept, estimate, trace: Vec::new(), eig_ratio: None, converged: None, full_phase: Some(u) })
        }
        Solver::GerchbergSaxton | Solver::Fienup => {
            let u0 = random_phase(op.n_obs(), init_seed);
            let y0: Vec<C64> = u0.values().iter().zip(b.values()).map(|(z, bi)| z * bi).collect();
            let (y, trace) = if cfg.method.solver == Solver::Fienup {
                fienup(op, b, &y0, cfg.beta, cfg.fienup_iters)?
            } else {
                gerchberg_saxton(op, b, &y0, cfg.fienup_iters)?
            };
            let u = phase_from_estimate(op, &y)?;
            let estimate = reconstruct_signal(op, b, &u)?;
            let kept = PhaseVector::new(support.indices().iter().map(|&i| u.values()[i]).collect())?;
            Ok(Stage { kept_phase: kept, estimate, trace: trace.objective, eig_ratio: None, converged: None, full_phase: Some(u) })
        }
        Solver::Greedy => {
            let u0 = random_phase(support.len(), init_seed);
            let (u, trace) = greedy_phase(obj.as_dyn(), &u0, cfg.cycles)?;
            stage(u, trace.objective)
        }
        Solver::Bcd => {
            let dense = DenseHermitian::materialize(obj.as_dyn(), DENSE_CAP)?;
            let (lifted, trace) = bcd_full(&dense, &bcd_opts)?;
            stage(extract_phase(&lifted).phase, trace.objective)
        }
        Solver::BcdLowRank => {
            let (lift, trace) = bcd_lowrank(obj.as_dyn(), cfg.rank, &bcd_opts)?;
            let mut s = stage(extract_phase_lowrank(&lift).phase, trace.objective)?;
            s.eig_ratio = Some(lift.eig_ratio());
            Ok(s)
        }
        Solver::Real | Solver::RealNonneg => {
            let emb = build_real_embedding_truncated(op, b, support)?;
            let sol = if cfg.method.solver == Solver::Real {
                solve_phasecut_real(&emb, &admm)?
            } else {
                solve_phasecut_real_nonneg(&emb, &admm)?
            };
            // same rebuild as the complex truncated path
            let estimate = if support.is_full() {
                ComplexImage::new(cfg.n, sol.signal.iter().map(|&v| C64::new(v, 0.0)).collect())?
            } else {
                reconstruct_kept(inst, support, &sol.phase)?
            };
            Ok(Stage {
                kept_phase: sol.phase,
                estimate,
                trace: sol.report.objective,
                eig_ratio: None,
                converged: Some(sol.report.converged),
                full_phase: None,
            })
        }
        Solver::Plus => {
            let dense = DenseHermitian::materialize(obj.as_dyn(), STRUCTURED_CAP)?;
            let lines = toeplitz_lines(op, b, support)?;
            let anchor = support.indices().iter().position(|&i| i == 0).unwrap_or(0);
            let sol = solve_phasecut_plus(dense.matrix(), &lines, anchor, &admm)?;
            let mut s = stage(sol.phase, sol.report.objective)?;
            s.converged = Some(sol.report.converged);
            Ok(s)
        }
    }
}

pub fn run_pipeline(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    cfg.validate()?;
    let inst = build_instance(cfg)?;
    solve_instance(cfg, &inst)
}

/// Runs the configured method on a prepared instance.
pub fn solve_instance(cfg: &ExperimentConfig, inst: &Instance) -> Result<ExperimentResult> {
    cfg.validate()?;
    let (op, b) = (&inst.op, &inst.b);
    let support = match cfg.kept {
        Some(k) if k < op.n_obs() => select_support(b, k)?,
        _ => SupportSelection::full(op.n_obs()),
    };
    let obj = if support.is_full() {
        Objective::Full(PhaseMatrix::new(op, b)?)
    } else {
        Objective::Truncated(TruncatedOperator::new(op, b, support.clone())?)
    };

    let start = Instant::now();
    let stage = run_solver(cfg, inst, &support, &obj)?;
    let time_solver = start.elapsed().as_secs_f64();

    let start = Instant::now();
    let mut refine_trace = Vec::new();
    let (phase, estimate) = if cfg.method.refine {
        let (kept, trace) = greedy_phase(obj.as_dyn(), &stage.kept_phase, cfg.greedy_cycles)?;
        refine_trace.extend(trace.objective);
        let x = reconstruct_kept(inst, &support, &kept)?;
        let u = complete_phase(op, &support, &kept, &x)?;
        let y0: Vec<C64> = u.values().iter().zip(b.values()).map(|(z, bi)| z * bi).collect();
        let (y, trace) = fienup(op, b, &y0, cfg.beta, cfg.fienup_iters)?;
        refine_trace.extend(trace.objective);
        let u = phase_from_estimate(op, &y)?;
        let x = reconstruct_signal(op, b, &u)?;
        (u, x)
    } else {
        let u = match stage.full_phase {
            Some(u) => u,
            None => complete_phase(op, &support, &stage.kept_phase, &stage.estimate)?,
        };
        (u, stage.estimate)
    };
    let time_refine = if cfg.method.refine { start.elapsed().as_secs_f64() } else { 0.0 };

    let obs_mse = observation_mse(op, &estimate, &inst.b_clean)?;
    let (_, img_residual) = align_global_phase(&estimate, &inst.truth)?;
    Ok(ExperimentResult {
        obs_mse,
        img_residual,
        recovered: obs_mse < RECOVERY_THRESHOLD,
        obj_final: relative_objective(op, b, &phase),
        solver_trace: stage.trace,
        refine_trace,
        time_solver,
        time_refine,
        eig_ratio: stage.eig_ratio,
        sdp_converged: stage.converged,
        estimate,
        phase,
    })
}
