//! Signals, illumination masks, observations and phase vectors.
//!
//! Images are stored row-major: pixel `(row, col)` of an `N×N` image lives at
//! `row * N + col`. Observation vectors stack `k` blocks of `L×L` Fourier
//! magnitudes (`L = OSF·N`), block `l` starting at `l * L²`.

use num_complex::Complex64;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{check_len, Error, Result};

pub type C64 = Complex64;

/// Tolerance on `| |u_i| - 1 |` for phase vectors.
pub const UNIT_MODULUS_TOL: f64 = 1e-12;

/// Below this modulus a complex number has no usable phase.
pub const ZERO_MODULUS: f64 = 1e-12;

/// An `N×N` complex image.
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexImage {
    side: usize,
    values: Vec<C64>,
    real_nonnegative: bool,
}

impl ComplexImage {
    pub fn new(side: usize, values: Vec<C64>) -> Result<Self> {
        if side == 0 {
            return Err(Error::InvalidArgument("image side must be positive".into()));
        }
        check_len("image", side * side, values.len())?;
        Ok(Self {
            side,
            values,
            real_nonnegative: false,
        })
    }

    pub fn zeros(side: usize) -> Result<Self> {
        Self::new(side, vec![C64::new(0.0, 0.0); side * side])
    }

    /// Builds an image flagged as real and nonnegative, rejecting any
    /// negative or non-finite value.
    pub fn real_nonnegative(side: usize, values: Vec<f64>) -> Result<Self> {
        if let Some((i, v)) = values
            .iter()
            .enumerate()
            .find(|(_, v)| !(v.is_finite() && **v >= 0.0))
        {
            return Err(Error::InvalidArgument(format!(
                "pixel {i} has value {v}, expected a finite nonnegative real"
            )));
        }
        let mut img = Self::new(side, values.into_iter().map(|v| C64::new(v, 0.0)).collect())?;
        img.real_nonnegative = true;
        Ok(img)
    }

    pub fn side(&self) -> usize {
        self.side
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[C64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<C64> {
        self.values
    }

    pub fn is_real_nonnegative(&self) -> bool {
        self.real_nonnegative
    }

    pub fn get(&self, row: usize, col: usize) -> C64 {
        self.values[row * self.side + col]
    }

    pub fn norm_sqr(&self) -> f64 {
        self.values.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn magnitudes(&self) -> Vec<f64> {
        self.values.iter().map(|z| z.norm()).collect()
    }

    /// Multiplies every pixel by a complex scalar; drops the nonnegativity flag
    /// unless the scalar is a nonnegative real.
    pub fn scaled(&self, factor: C64) -> Self {
        Self {
            side: self.side,
            values: self.values.iter().map(|z| z * factor).collect(),
            real_nonnegative: self.real_nonnegative && factor.im == 0.0 && factor.re >= 0.0,
        }
    }
}

/// `k` nonnegative `N×N` illumination masks built from `r×r` blocks.
/// The first mask is all ones, so every pixel is illuminated.
#[derive(Clone, Debug, PartialEq)]
pub struct MaskSet {
    side: usize,
    resolution: usize,
    masks: Vec<Vec<f64>>,
}

impl MaskSet {
    /// Validates a user-supplied mask stack.
    pub fn new(side: usize, resolution: usize, masks: Vec<Vec<f64>>) -> Result<Self> {
        check_resolution(side, resolution)?;
        if masks.is_empty() {
            return Err(Error::InvalidCount);
        }
        for (s, mask) in masks.iter().enumerate() {
            check_len("mask", side * side, mask.len())?;
            if mask.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
                return Err(Error::InvalidArgument(format!(
                    "mask {s} has a negative or non-finite entry"
                )));
            }
            for br in (0..side).step_by(resolution) {
                for bc in (0..side).step_by(resolution) {
                    let v = mask[br * side + bc];
                    for row in br..br + resolution {
                        for col in bc..bc + resolution {
                            if mask[row * side + col] != v {
                                return Err(Error::InvalidArgument(format!(
                                    "mask {s} is not constant on the block at ({br}, {bc})"
                                )));
                            }
                        }
                    }
                }
            }
        }
        if masks[0].iter().any(|&v| v != 1.0) {
            return Err(Error::InvalidArgument(
                "the first mask must let all the signal through".into(),
            ));
        }
        Ok(Self {
            side,
            resolution,
            masks,
        })
    }

    pub fn count(&self) -> usize {
        self.masks.len()
    }

    pub fn side(&self) -> usize {
        self.side
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    pub fn mask(&self, s: usize) -> &[f64] {
        &self.masks[s]
    }

    pub fn masks(&self) -> &[Vec<f64>] {
        &self.masks
    }

    /// `Σ_s I_s²` at every pixel.
    pub fn coverage(&self) -> Vec<f64> {
        let mut cov = vec![0.0; self.side * self.side];
        for mask in &self.masks {
            for (c, m) in cov.iter_mut().zip(mask) {
                *c += m * m;
            }
        }
        cov
    }
}

fn check_resolution(side: usize, resolution: usize) -> Result<()> {
    if side == 0 || resolution == 0 || side % resolution != 0 {
        return Err(Error::InvalidResolution { side, resolution });
    }
    Ok(())
}

/// Uniform draw in `[0, 1)` from the top 53 bits of one 64-bit output.
pub(crate) fn unit_uniform(rng: &mut impl RngCore) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Random binary block masks with fair coins. See [`make_masks_with_bias`].
pub fn make_masks(count: usize, side: usize, resolution: usize, seed: u64) -> Result<MaskSet> {
    make_masks_with_bias(count, side, resolution, seed, 0.5)
}

/// Generates `count` masks: mask 1 is all ones, masks 2..k are binary and
/// constant on `resolution×resolution` blocks, each block open with
/// probability `bias`.
///
/// Randomness comes from `ChaCha8Rng::seed_from_u64(seed)`. Blocks are drawn
/// mask by mask, row-major over blocks; a block is open when
/// `(next_u64() >> 11) · 2⁻⁵³ < bias`.
pub fn make_masks_with_bias(
    count: usize,
    side: usize,
    resolution: usize,
    seed: u64,
    bias: f64,
) -> Result<MaskSet> {
    if count == 0 {
        return Err(Error::InvalidCount);
    }
    check_resolution(side, resolution)?;
    if !(0.0..=1.0).contains(&bias) {
        return Err(Error::InvalidArgument(format!("mask bias {bias} outside [0, 1]")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let blocks = side / resolution;
    let mut masks = vec![vec![1.0; side * side]];
    for _ in 1..count {
        let mut mask = vec![0.0; side * side];
        for br in 0..blocks {
            for bc in 0..blocks {
                if unit_uniform(&mut rng) < bias {
                    for row in br * resolution..(br + 1) * resolution {
                        for col in bc * resolution..(bc + 1) * resolution {
                            mask[row * side + col] = 1.0;
                        }
                    }
                }
            }
        }
        masks.push(mask);
    }
    Ok(MaskSet {
        side,
        resolution,
        masks,
    })
}

/// Fourier magnitudes `b`, stacked in `blocks` blocks of `grid_side²` entries.
#[derive(Clone, Debug, PartialEq)]
pub struct ObservationVector {
    values: Vec<f64>,
    blocks: usize,
    grid_side: usize,
}

impl ObservationVector {
    pub fn new(values: Vec<f64>, blocks: usize, grid_side: usize) -> Result<Self> {
        check_len("observations", blocks * grid_side * grid_side, values.len())?;
        if let Some(i) = values.iter().position(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::InvalidArgument(format!(
                "observation {i} is negative or non-finite"
            )));
        }
        Ok(Self {
            values,
            blocks,
            grid_side,
        })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn blocks(&self) -> usize {
        self.blocks
    }

    pub fn grid_side(&self) -> usize {
        self.grid_side
    }

    pub fn norm_sqr(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum()
    }

    /// Copy with every entry outside `support` set to zero.
    pub fn restricted_to(&self, support: &SupportSelection) -> Self {
        let mut values = vec![0.0; self.values.len()];
        for &i in support.indices() {
            values[i] = self.values[i];
        }
        Self {
            values,
            blocks: self.blocks,
            grid_side: self.grid_side,
        }
    }
}

/// A vector of unit-modulus complex numbers.
#[derive(Clone, Debug, PartialEq)]
pub struct PhaseVector {
    values: Vec<C64>,
}

impl PhaseVector {
    pub fn new(values: Vec<C64>) -> Result<Self> {
        for (index, z) in values.iter().enumerate() {
            let modulus = z.norm();
            if (modulus - 1.0).abs() > UNIT_MODULUS_TOL {
                return Err(Error::UnitModulus { index, modulus });
            }
        }
        Ok(Self { values })
    }

    pub fn ones(n: usize) -> Self {
        Self {
            values: vec![C64::new(1.0, 0.0); n],
        }
    }

    /// Normalizes every entry to unit modulus; entries below
    /// [`ZERO_MODULUS`] become 1.
    pub fn from_directions(values: &[C64]) -> Self {
        Self {
            values: values.iter().map(|&z| unit_or(z, C64::new(1.0, 0.0))).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[C64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<C64> {
        self.values
    }

    /// Rotates the whole vector so that the first entry is real positive.
    pub fn canonical(&self) -> Self {
        match self.values.first() {
            None => self.clone(),
            Some(first) => {
                let rot = first.conj();
                Self {
                    values: self.values.iter().map(|z| unit_or(z * rot, C64::new(1.0, 0.0))).collect(),
                }
            }
        }
    }
}

/// `z/|z|`, or `fallback` when `|z|` is below [`ZERO_MODULUS`].
pub(crate) fn unit_or(z: C64, fallback: C64) -> C64 {
    let m = z.norm();
    if m < ZERO_MODULUS || !m.is_finite() {
        fallback
    } else {
        z / m
    }
}

/// Ordered, distinct indices into an observation vector.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SupportSelection {
    indices: Vec<usize>,
    total: usize,
}

impl SupportSelection {
    pub fn from_indices(indices: Vec<usize>, total: usize) -> Result<Self> {
        let mut seen = vec![false; total];
        for &i in &indices {
            if i >= total {
                return Err(Error::IndexOutOfRange { index: i, len: total });
            }
            if seen[i] {
                return Err(Error::InvalidArgument(format!("duplicate support index {i}")));
            }
            seen[i] = true;
        }
        Ok(Self { indices, total })
    }

    pub fn full(total: usize) -> Self {
        Self {
            indices: (0..total).collect(),
            total,
        }
    }

    /// Indices (0-based) of kept observations.
    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    /// Length of the observation vector this selection indexes into.
    pub fn total(&self) -> usize {
        self.total
    }

    pub fn is_full(&self) -> bool {
        self.indices.len() == self.total
    }
}

/// Keeps the `keep` largest observations, ties going to the lowest index.
/// Returned indices are sorted by decreasing magnitude.
pub fn select_support(b: &ObservationVector, keep: usize) -> Result<SupportSelection> {
    let n = b.len();
    if keep == 0 || keep > n {
        return Err(Error::InvalidArgument(format!(
            "keep count {keep} outside [1, {n}]"
        )));
    }
    let values = b.values();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| values[j].total_cmp(&values[i]).then(i.cmp(&j)));
    order.truncate(keep);
    Ok(SupportSelection {
        indices: order,
        total: n,
    })
}

/// Rotates `estimate` by the global phase that best matches `reference`.
///
/// Returns the aligned image and `‖e^{iθ}x̂ − x‖² / ‖x‖²`.
pub fn align_global_phase(
    estimate: &ComplexImage,
    reference: &ComplexImage,
) -> Result<(ComplexImage, f64)> {
    check_len("image", reference.len(), estimate.len())?;
    let ref_norm = reference.norm_sqr();
    if ref_norm == 0.0 {
        return Err(Error::DegenerateReference);
    }
    let inner: C64 = estimate
        .values()
        .iter()
        .zip(reference.values())
        .map(|(e, r)| e.conj() * r)
        .sum();
    let rot = unit_or(inner, C64::new(1.0, 0.0));
    let aligned = estimate.scaled(rot);
    let residual = aligned
        .values()
        .iter()
        .zip(reference.values())
        .map(|(a, r)| (a - r).norm_sqr())
        .sum::<f64>()
        / ref_norm;
    Ok((aligned, residual))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn obs(values: &[f64]) -> ObservationVector {
        // flat layout; select_support only looks at the values
        ObservationVector {
            values: values.to_vec(),
            blocks: 1,
            grid_side: 0,
        }
    }

    #[test]
    fn first_mask_is_open_and_rest_binary() {
        let set = make_masks(2, 16, 1, 1).unwrap();
        assert!(set.mask(0).iter().all(|&v| v == 1.0));
        assert!(set.mask(1).iter().all(|&v| v == 0.0 || v == 1.0));
        assert_eq!(set.mask(1).len(), 256);
        let open = set.mask(1).iter().filter(|&&v| v == 1.0).count();
        assert!(open > 64 && open < 192, "open pixels {open}");
    }

    #[test]
    fn single_mask_covers_everything() {
        let set = make_masks(1, 4, 4, 0).unwrap();
        assert_eq!(set.count(), 1);
        assert!(set.coverage().iter().all(|&c| c == 1.0));
    }

    #[test]
    fn block_masks_are_constant_on_blocks() {
        let set = make_masks(3, 16, 4, 7).unwrap();
        for s in 1..3 {
            let m = set.mask(s);
            for br in 0..4 {
                for bc in 0..4 {
                    let v = m[br * 4 * 16 + bc * 4];
                    for row in br * 4..br * 4 + 4 {
                        for col in bc * 4..bc * 4 + 4 {
                            assert_eq!(m[row * 16 + col], v);
                        }
                    }
                }
            }
        }
        // validating constructor accepts what the generator produced
        MaskSet::new(16, 4, set.masks().to_vec()).unwrap();
    }

    #[test]
    fn mask_errors() {
        assert!(matches!(make_masks(2, 16, 3, 0), Err(Error::InvalidResolution { .. })));
        assert!(matches!(make_masks(0, 16, 1, 0), Err(Error::InvalidCount)));
        assert!(MaskSet::new(2, 1, vec![vec![1.0, 1.0, 0.0, 1.0]]).is_err());
    }

    #[test]
    fn masks_are_deterministic() {
        assert_eq!(make_masks(4, 16, 2, 99).unwrap(), make_masks(4, 16, 2, 99).unwrap());
        assert_ne!(make_masks(4, 16, 2, 99).unwrap(), make_masks(4, 16, 2, 100).unwrap());
    }

    #[test]
    fn support_picks_largest_with_low_index_ties() {
        let b = obs(&[3.0, 1.0, 2.0, 0.0]);
        let s = select_support(&b, 2).unwrap();
        assert_eq!(s.indices(), &[0, 2]);
        let b = obs(&[1.0, 2.0, 2.0, 1.0]);
        assert_eq!(select_support(&b, 3).unwrap().indices(), &[1, 2, 0]);
        let full = select_support(&b, 4).unwrap();
        let mut idx = full.indices().to_vec();
        idx.sort();
        assert_eq!(idx, vec![0, 1, 2, 3]);
        assert!(select_support(&b, 0).is_err());
        assert!(select_support(&b, 5).is_err());
    }

    #[test]
    fn phase_vector_rejects_non_unit_entries() {
        assert!(PhaseVector::new(vec![C64::new(1.0, 0.0), C64::new(0.0, 1.0)]).is_ok());
        assert!(matches!(
            PhaseVector::new(vec![C64::new(1.1, 0.0)]),
            Err(Error::UnitModulus { index: 0, .. })
        ));
        let p = PhaseVector::from_directions(&[C64::new(0.0, 0.0), C64::new(0.0, -3.0)]);
        assert_eq!(p.values()[0], C64::new(1.0, 0.0));
        assert!((p.values()[1] - C64::new(0.0, -1.0)).norm() < 1e-15);
    }

    #[test]
    fn nonnegative_flag_is_checked() {
        assert!(ComplexImage::real_nonnegative(2, vec![0.0, 1.0, 2.0, 3.0]).is_ok());
        assert!(ComplexImage::real_nonnegative(2, vec![0.0, -1.0, 2.0, 3.0]).is_err());
        assert!(ComplexImage::new(2, vec![C64::new(0.0, 0.0); 3]).is_err());
    }

    fn image(values: &[(f64, f64)]) -> ComplexImage {
        let side = (values.len() as f64).sqrt() as usize;
        ComplexImage::new(side, values.iter().map(|&(a, b)| C64::new(a, b)).collect()).unwrap()
    }

    #[test]
    fn global_phase_is_removed() {
        let x = image(&[(1.0, 2.0), (-0.5, 0.3), (0.0, 1.0), (2.0, -1.0)]);
        let (aligned, res) = align_global_phase(&x.scaled(C64::new(0.0, 1.0)), &x).unwrap();
        assert!(res < 1e-28);
        for (a, b) in aligned.values().iter().zip(x.values()) {
            assert!((a - b).norm() < 1e-14);
        }
        let (_, res) = align_global_phase(&x, &x).unwrap();
        assert_eq!(res, 0.0);
        let zero = ComplexImage::zeros(2).unwrap();
        assert!(matches!(align_global_phase(&x, &zero), Err(Error::DegenerateReference)));
    }

    #[test]
    fn global_phase_matches_grid_search() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut draw = || unit_uniform(&mut rng) * 2.0 - 1.0;
        for _ in 0..5 {
            let a: Vec<(f64, f64)> = (0..9).map(|_| (draw(), draw())).collect();
            let b: Vec<(f64, f64)> = (0..9).map(|_| (draw(), draw())).collect();
            let (xh, x) = (image(&a), image(&b));
            let (_, res) = align_global_phase(&xh, &x).unwrap();
            let nx = x.norm_sqr();
            let best = (0..10_000)
                .map(|j| {
                    let rot = C64::from_polar(1.0, 2.0 * std::f64::consts::PI * j as f64 / 1e4);
                    xh.values()
                        .iter()
                        .zip(x.values())
                        .map(|(e, r)| (e * rot - r).norm_sqr())
                        .sum::<f64>()
                        / nx
                })
                .fold(f64::INFINITY, f64::min);
            assert!(res <= best + 1e-12);
            assert!(best - res < 1e-6, "grid {best} closed form {res}");
        }
    }

    proptest! {
        #[test]
        fn support_ignores_appended_zeros(vals in proptest::collection::vec(0.0f64..10.0, 1..40), extra in 0usize..10, frac in 0.0f64..1.0) {
            let m = 1 + ((vals.len() - 1) as f64 * frac) as usize;
            let base = select_support(&obs(&vals), m).unwrap();
            let mut padded = vals.clone();
            padded.extend(std::iter::repeat(0.0).take(extra));
            let ext = select_support(&obs(&padded), m).unwrap();
            prop_assert_eq!(base.indices(), ext.indices());
            let kept_min = base.indices().iter().map(|&i| vals[i]).fold(f64::INFINITY, f64::min);
            let rest_max = (0..vals.len()).filter(|i| !base.indices().contains(i)).map(|i| vals[i]).fold(f64::NEG_INFINITY, f64::max);
            prop_assert!(kept_min >= rest_max);
        }

        #[test]
        fn residual_ignores_estimate_phase(theta in 0.0f64..6.3, seed in 0u64..1000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut draw = || unit_uniform(&mut rng) - 0.5;
            let a: Vec<(f64, f64)> = (0..4).map(|_| (draw(), draw())).collect();
            let b: Vec<(f64, f64)> = (0..4).map(|_| (draw(), draw() + 1.0)).collect();
            let (xh, x) = (image(&a), image(&b));
            let (_, r0) = align_global_phase(&xh, &x).unwrap();
            let (_, r1) = align_global_phase(&xh.scaled(C64::from_polar(1.0, theta)), &x).unwrap();
            prop_assert!((r0 - r1).abs() < 1e-12);
        }
    }
}
