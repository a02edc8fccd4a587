//! Matrix-free masked Fourier measurements.
//!
//! `A x` stacks the unitary 2D DFTs of `I_l ∘ x`, each zero-padded to an
//! `L×L` grid (`L = OSF·N`, signal in the top-left corner). Because the padded
//! DFT is an isometry, `A*A = diag(Σ_s I_s²)` and the pseudoinverse is the sum
//! of cropped inverse transforms weighted by the dual filters
//! `I'_l = conj(I_l) / Σ_s I_s²`.
//!
//! Column `i = (l, j)` of `AA†` is block-wise a circular shift by `j` of the
//! kernels `K_{s,l} = F(pad(I_s ∘ I'_l)) / L`, so columns of
//! `M = diag(b)(I − AA†)diag(b)` cost `O(n)` once the kernels are cached.

use std::sync::{Arc, OnceLock};

use nalgebra::DMatrix;
use rustfft::{Fft, FftPlanner};

use crate::error::{check_len, Error, Result};
use crate::hermitian::{DenseHermitian, HermitianOperator};
use crate::signal::{ComplexImage, MaskSet, ObservationVector, SupportSelection, C64};

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

pub struct MaskedFourierOperator {
    masks: MaskSet,
    side: usize,
    osf: usize,
    grid: usize,
    dual: Vec<Vec<f64>>,
    kernels: Vec<OnceLock<Vec<C64>>>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for MaskedFourierOperator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("MaskedFourierOperator")
            .field("side", &self.side)
            .field("osf", &self.osf)
            .field("masks", &self.masks.count())
            .finish()
    }
}

impl MaskedFourierOperator {
    pub fn new(masks: MaskSet, osf: usize) -> Result<Self> {
        if osf == 0 {
            return Err(Error::InvalidArgument("oversampling factor must be positive".into()));
        }
        let side = masks.side();
        let coverage = masks.coverage();
        if let Some(pixel) = coverage.iter().position(|&c| !(c > 0.0)) {
            return Err(Error::Coverage { pixel });
        }
        let dual = masks
            .masks()
            .iter()
            .map(|m| m.iter().zip(&coverage).map(|(v, c)| v / c).collect())
            .collect();
        let grid = osf * side;
        let mut planner = FftPlanner::new();
        let k = masks.count();
        Ok(Self {
            forward: planner.plan_fft_forward(grid),
            inverse: planner.plan_fft_inverse(grid),
            kernels: (0..k * k).map(|_| OnceLock::new()).collect(),
            masks,
            side,
            osf,
            grid,
            dual,
        })
    }

    pub fn masks(&self) -> &MaskSet {
        &self.masks
    }

    /// Image side `N`.
    pub fn side(&self) -> usize {
        self.side
    }

    pub fn osf(&self) -> usize {
        self.osf
    }

    /// Fourier grid side `L = OSF·N`.
    pub fn grid_side(&self) -> usize {
        self.grid
    }

    pub fn mask_count(&self) -> usize {
        self.masks.count()
    }

    /// Number of observations `n = k·L²`.
    pub fn n_obs(&self) -> usize {
        self.masks.count() * self.grid * self.grid
    }

    /// Number of pixels `p = N²`.
    pub fn n_pixels(&self) -> usize {
        self.side * self.side
    }

    /// Dual filter `I'_l`.
    pub fn dual_filter(&self, l: usize) -> &[f64] {
        &self.dual[l]
    }

    fn fft2(&self, buf: &mut [C64], fft: &Arc<dyn Fft<f64>>) {
        let l = self.grid;
        let mut scratch = vec![ZERO; fft.get_inplace_scratch_len()];
        fft.process_with_scratch(buf, &mut scratch);
        let mut t = vec![ZERO; l * l];
        for r in 0..l {
            for c in 0..l {
                t[c * l + r] = buf[r * l + c];
            }
        }
        fft.process_with_scratch(&mut t, &mut scratch);
        let scale = 1.0 / l as f64;
        for r in 0..l {
            for c in 0..l {
                buf[r * l + c] = t[c * l + r] * scale;
            }
        }
    }

    fn forward_padded(&self, pixels: impl Fn(usize) -> C64, out: &mut [C64]) {
        let (n, l) = (self.side, self.grid);
        out.iter_mut().for_each(|o| *o = ZERO);
        for r in 0..n {
            for c in 0..n {
                out[r * l + c] = pixels(r * n + c);
            }
        }
        self.fft2(out, &self.forward);
    }

    /// `A x` on raw pixel values.
    pub(crate) fn forward(&self, x: &[C64]) -> Vec<C64> {
        let block = self.grid * self.grid;
        let mut out = vec![ZERO; self.n_obs()];
        for (l, chunk) in out.chunks_mut(block).enumerate() {
            let mask = self.masks.mask(l);
            self.forward_padded(|q| x[q] * mask[q], chunk);
        }
        out
    }

    /// `A† y` on raw observation-domain values.
    pub(crate) fn pseudo_inverse(&self, y: &[C64]) -> Vec<C64> {
        let (n, l) = (self.side, self.grid);
        let block = l * l;
        let mut out = vec![ZERO; n * n];
        let mut buf = vec![ZERO; block];
        for (li, chunk) in y.chunks(block).enumerate() {
            buf.copy_from_slice(chunk);
            self.fft2(&mut buf, &self.inverse);
            let dual = &self.dual[li];
            for r in 0..n {
                for c in 0..n {
                    out[r * n + c] += buf[r * l + c] * dual[r * n + c];
                }
            }
        }
        out
    }

    /// Orthogonal projection `AA† y` onto the range of `A`.
    pub(crate) fn project(&self, y: &[C64]) -> Vec<C64> {
        self.forward(&self.pseudo_inverse(y))
    }

    pub fn apply_a(&self, x: &ComplexImage) -> Result<Vec<C64>> {
        check_len("image side", self.side, x.side())?;
        Ok(self.forward(x.values()))
    }

    pub fn apply_a_dagger(&self, y: &[C64]) -> Result<ComplexImage> {
        check_len("observation vector", self.n_obs(), y.len())?;
        ComplexImage::new(self.side, self.pseudo_inverse(y))
    }

    /// `M v = diag(b)(v' − AA†v')` with `v' = diag(b) v`.
    pub fn apply_m(&self, b: &ObservationVector, v: &[C64]) -> Result<Vec<C64>> {
        check_len("observations", self.n_obs(), b.len())?;
        check_len("vector", self.n_obs(), v.len())?;
        Ok(self.apply_m_raw(b.values(), v))
    }

    pub(crate) fn apply_m_raw(&self, b: &[f64], v: &[C64]) -> Vec<C64> {
        let scaled: Vec<C64> = v.iter().zip(b).map(|(z, bi)| z * bi).collect();
        let proj = self.project(&scaled);
        scaled
            .iter()
            .zip(&proj)
            .zip(b)
            .map(|((s, p), bi)| (s - p) * bi)
            .collect()
    }

    /// Cached `F(pad(I_s ∘ I'_l)) / L`.
    fn kernel(&self, s: usize, l: usize) -> &[C64] {
        let k = self.masks.count();
        self.kernels[s * k + l].get_or_init(|| {
            let (ms, dl) = (self.masks.mask(s), &self.dual[l]);
            let mut out = vec![ZERO; self.grid * self.grid];
            self.forward_padded(|q| C64::new(ms[q] * dl[q], 0.0), &mut out);
            let scale = 1.0 / self.grid as f64;
            out.iter_mut().for_each(|z| *z *= scale);
            out
        })
    }

    /// Entry `(AA†)_{ii}`, real.
    fn projector_diagonal(&self, i: usize) -> f64 {
        let block = self.grid * self.grid;
        self.kernel(i / block, i / block)[0].re
    }

    /// Column `i` of `AA†` via shifted kernels.
    pub(crate) fn projector_column_into(&self, i: usize, out: &mut [C64]) {
        let l = self.grid;
        let block = l * l;
        let (li, j) = (i / block, i % block);
        let (j1, j2) = (j / l, j % l);
        for (s, chunk) in out.chunks_mut(block).enumerate() {
            let kern = self.kernel(s, li);
            for f1 in 0..l {
                let r = (f1 + l - j1) % l;
                let row = &kern[r * l..(r + 1) * l];
                let dst = &mut chunk[f1 * l..(f1 + 1) * l];
                // (f2 - j2) mod l, split into two contiguous runs
                dst[j2..].copy_from_slice(&row[..l - j2]);
                dst[..j2].copy_from_slice(&row[l - j2..]);
            }
        }
    }

    /// Entry `(row, col)` of `AA†` read from the shifted kernel.
    pub(crate) fn projector_entry(&self, row: usize, col: usize) -> C64 {
        let l = self.grid;
        let block = l * l;
        let (s, f) = (row / block, row % block);
        let (li, j) = (col / block, col % block);
        let r1 = (f / l + l - j / l) % l;
        let r2 = (f % l + l - j % l) % l;
        self.kernel(s, li)[r1 * l + r2]
    }

    pub(crate) fn m_column_raw(&self, b: &[f64], i: usize, out: &mut [C64]) {
        self.projector_column_into(i, out);
        let bi = b[i];
        for (o, bj) in out.iter_mut().zip(b) {
            *o = -*o * (bj * bi);
        }
        out[i] += C64::new(bi * bi, 0.0);
    }

    /// Column `i` of `M`.
    pub fn extract_m_column(&self, b: &ObservationVector, i: usize) -> Result<Vec<C64>> {
        check_len("observations", self.n_obs(), b.len())?;
        if i >= self.n_obs() {
            return Err(Error::IndexOutOfRange {
                index: i,
                len: self.n_obs(),
            });
        }
        let mut out = vec![ZERO; self.n_obs()];
        self.m_column_raw(b.values(), i, &mut out);
        Ok(out)
    }

    /// Dense `M`, assembled from extracted columns.
    pub fn materialize_dense(&self, b: &ObservationVector, cap: usize) -> Result<DMatrix<C64>> {
        let pm = PhaseMatrix::new(self, b)?;
        Ok(DenseHermitian::materialize(&pm, cap)?.into_matrix())
    }

    /// Dense `A` (`n×p`) from a sweep over canonical basis images.
    pub fn dense_a(&self, cap: usize) -> Result<DMatrix<C64>> {
        let (n, p) = (self.n_obs(), self.n_pixels());
        if n > cap {
            return Err(Error::SizeGuard { n, cap });
        }
        let mut a = DMatrix::zeros(n, p);
        let mut e = vec![ZERO; p];
        for q in 0..p {
            e[q] = C64::new(1.0, 0.0);
            a.column_mut(q).copy_from_slice(&self.forward(&e));
            e[q] = ZERO;
        }
        Ok(a)
    }

    /// Dense `A†` (`p×n`) from a sweep over canonical observation vectors.
    /// Rows of `A` at the given observation indices, from the explicit DFT
    /// formula.
    pub fn dense_rows(&self, rows: &[usize]) -> Result<DMatrix<C64>> {
        let (n, p, side, l) = (self.n_obs(), self.n_pixels(), self.side, self.grid);
        let block = l * l;
        let scale = 1.0 / l as f64;
        let mut a = DMatrix::zeros(rows.len(), p);
        for (r, &i) in rows.iter().enumerate() {
            if i >= n {
                return Err(Error::IndexOutOfRange { index: i, len: n });
            }
            let (s, f) = (i / block, i % block);
            let (f1, f2) = (f / l, f % l);
            let mask = self.masks.mask(s);
            for q in 0..p {
                if mask[q] == 0.0 {
                    continue;
                }
                let (row, col) = (q / side, q % side);
                let turns = ((f1 * row + f2 * col) % l) as f64 / l as f64;
                a[(r, q)] = C64::from_polar(mask[q] * scale, -std::f64::consts::TAU * turns);
            }
        }
        Ok(a)
    }

    pub fn dense_a_dagger(&self, cap: usize) -> Result<DMatrix<C64>> {
        let (n, p) = (self.n_obs(), self.n_pixels());
        if n > cap {
            return Err(Error::SizeGuard { n, cap });
        }
        let mut a = DMatrix::zeros(p, n);
        let mut e = vec![ZERO; n];
        for i in 0..n {
            e[i] = C64::new(1.0, 0.0);
            a.column_mut(i).copy_from_slice(&self.pseudo_inverse(&e));
            e[i] = ZERO;
        }
        Ok(a)
    }
}

/// `M = diag(b)(I − AA†)diag(b)` for a fixed observation vector.
#[derive(Clone, Copy, Debug)]
pub struct PhaseMatrix<'a> {
    op: &'a MaskedFourierOperator,
    b: &'a ObservationVector,
}

impl<'a> PhaseMatrix<'a> {
    pub fn new(op: &'a MaskedFourierOperator, b: &'a ObservationVector) -> Result<Self> {
        check_len("observations", op.n_obs(), b.len())?;
        Ok(Self { op, b })
    }

    pub fn operator(&self) -> &'a MaskedFourierOperator {
        self.op
    }

    pub fn observations(&self) -> &'a ObservationVector {
        self.b
    }
}

impl HermitianOperator for PhaseMatrix<'_> {
    fn dim(&self) -> usize {
        self.op.n_obs()
    }

    fn column_into(&self, i: usize, out: &mut [C64]) {
        self.op.m_column_raw(self.b.values(), i, out);
    }

    fn apply_into(&self, v: &[C64], out: &mut [C64]) {
        out.copy_from_slice(&self.op.apply_m_raw(self.b.values(), v));
    }

    fn diagonal(&self, i: usize) -> f64 {
        let bi = self.b.values()[i];
        bi * bi * (1.0 - self.op.projector_diagonal(i))
    }
}

/// `M1 = diag(b1)(I − A1 (A†)₁)diag(b1)`, the restriction of `M` to a
/// support selection.
#[derive(Clone, Debug)]
pub struct TruncatedOperator<'a> {
    base: &'a MaskedFourierOperator,
    support: SupportSelection,
    b1: Vec<f64>,
}

impl<'a> TruncatedOperator<'a> {
    pub fn new(
        base: &'a MaskedFourierOperator,
        b: &ObservationVector,
        support: SupportSelection,
    ) -> Result<Self> {
        check_len("observations", base.n_obs(), b.len())?;
        check_len("support total", base.n_obs(), support.total())?;
        if support.is_empty() {
            return Err(Error::InvalidArgument("empty support selection".into()));
        }
        let b1 = support.indices().iter().map(|&i| b.values()[i]).collect();
        Ok(Self {
            base,
            support,
            b1,
        })
    }

    pub fn base(&self) -> &'a MaskedFourierOperator {
        self.base
    }

    pub fn support(&self) -> &SupportSelection {
        &self.support
    }

    /// Kept magnitudes `b1`, in support order.
    pub fn kept(&self) -> &[f64] {
        &self.b1
    }

    /// Places a support-indexed vector into the full observation space.
    pub fn embed(&self, v: &[C64]) -> Vec<C64> {
        let mut full = vec![ZERO; self.base.n_obs()];
        for (&i, z) in self.support.indices().iter().zip(v) {
            full[i] = *z;
        }
        full
    }

    pub fn restrict<T: Copy>(&self, full: &[T]) -> Vec<T> {
        self.support.indices().iter().map(|&i| full[i]).collect()
    }

    /// `diag(b1)(w − restrict(AA† embed(w)))` with `w = diag(b1) v`.
    pub fn apply_m1(&self, v: &[C64]) -> Result<Vec<C64>> {
        check_len("truncated vector", self.b1.len(), v.len())?;
        let mut out = vec![ZERO; v.len()];
        self.apply_into(v, &mut out);
        Ok(out)
    }
}

impl HermitianOperator for TruncatedOperator<'_> {
    fn dim(&self) -> usize {
        self.b1.len()
    }

    fn column_into(&self, i: usize, out: &mut [C64]) {
        let idx = self.support.indices();
        let col = idx[i];
        let bi = self.b1[i];
        for (k, (o, &s)) in out.iter_mut().zip(idx).enumerate() {
            let delta = if k == i { 1.0 } else { 0.0 };
            *o = (C64::new(delta, 0.0) - self.base.projector_entry(s, col)) * (self.b1[k] * bi);
        }
    }

    fn apply_into(&self, v: &[C64], out: &mut [C64]) {
        let w: Vec<C64> = v.iter().zip(&self.b1).map(|(z, b)| z * b).collect();
        let proj = self.base.project(&self.embed(&w));
        for (((o, wi), &s), b) in out.iter_mut().zip(&w).zip(self.support.indices()).zip(&self.b1) {
            *o = (wi - proj[s]) * b;
        }
    }

    fn diagonal(&self, i: usize) -> f64 {
        let s = self.support.indices()[i];
        let b = self.b1[i];
        b * b * (1.0 - self.base.projector_diagonal(s))
    }
}
