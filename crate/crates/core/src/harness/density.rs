//! Rasterized 2D projections of atomic densities.

use crate::error::{Error, Result};
use crate::signal::ComplexImage;

use super::pdb::Atom;

/// Default Gaussian width: 1.2 pixels at 128×128, proportionally narrower on
/// coarser grids so the molecule keeps its physical blob size.
pub fn default_sigma(n: usize) -> f64 {
    1.2 * n as f64 / 128.0
}

/// Mass of a unit Gaussian centred at `mu` falling in each pixel `[c, c+1)`.
fn pixel_weights(n: usize, mu: f64, sigma: f64) -> Vec<f64> {
    let s = sigma * std::f64::consts::SQRT_2;
    (0..n)
        .map(|c| 0.5 * (libm::erf((c as f64 + 1.0 - mu) / s) - libm::erf((c as f64 - mu) / s)))
        .collect()
}

/// Deposits `(row, col, weight, sigma)` blobs in pixel coordinates and
/// normalizes to unit total mass.
fn rasterize(n: usize, blobs: &[(f64, f64, f64, f64)]) -> Result<ComplexImage> {
    let mut img = vec![0.0; n * n];
    for &(r, c, w, sigma) in blobs {
        let wr = pixel_weights(n, r, sigma);
        let wc = pixel_weights(n, c, sigma);
        for (i, a) in wr.iter().enumerate() {
            for (j, b) in wc.iter().enumerate() {
                img[i * n + j] += w * a * b;
            }
        }
    }
    let mass: f64 = img.iter().sum();
    if !(mass > 0.0) {
        return Err(Error::InvalidArgument("density has no mass on the grid".into()));
    }
    img.iter_mut().for_each(|v| *v /= mass);
    ComplexImage::real_nonnegative(n, img)
}

/// Affine map of planar points into the central 80% of an `n×n` grid, keeping
/// the aspect ratio. The bounding-box centre lands on the centre of pixel
/// `⌊n/2⌋`; coincident points all land there.
fn fit_to_grid(points: &[[f64; 2]], n: usize) -> Vec<[f64; 2]> {
    let lo = |k: usize| points.iter().map(|p| p[k]).fold(f64::INFINITY, f64::min);
    let hi = |k: usize| points.iter().map(|p| p[k]).fold(f64::NEG_INFINITY, f64::max);
    let (x0, x1, y0, y1) = (lo(0), hi(0), lo(1), hi(1));
    let extent = (x1 - x0).max(y1 - y0);
    let centre = (n / 2) as f64 + 0.5;
    let scale = if extent > 0.0 { 0.8 * n as f64 / extent } else { 0.0 };
    let (cx, cy) = (0.5 * (x0 + x1), 0.5 * (y0 + y1));
    points
        .iter()
        .map(|p| [centre + (p[0] - cx) * scale, centre + (p[1] - cy) * scale])
        .collect()
}

/// Projects atoms along `z` onto an `n×n` grid.
///
/// Each atom deposits an isotropic Gaussian of width `sigma` pixels weighted
/// by atomic number times occupancy; rows follow `x` and columns follow `y`.
pub fn project_density(atoms: &[Atom], n: usize, sigma: f64) -> Result<ComplexImage> {
    if atoms.is_empty() {
        return Err(Error::EmptyMolecule);
    }
    if n == 0 || !(sigma > 0.0) {
        return Err(Error::InvalidArgument(format!("need n > 0 and sigma > 0, got {n}, {sigma}")));
    }
    let mut weights = Vec::with_capacity(atoms.len());
    for a in atoms {
        let z = a
            .atomic_number()
            .ok_or_else(|| Error::InvalidArgument(format!("unknown element {:?}", a.element)))?;
        weights.push(z as f64 * a.occupancy);
    }
    let planar: Vec<[f64; 2]> = atoms.iter().map(|a| [a.position[0], a.position[1]]).collect();
    let blobs: Vec<_> = fit_to_grid(&planar, n)
        .into_iter()
        .zip(weights)
        .map(|(p, w)| (p[0], p[1], w, sigma))
        .collect();
    rasterize(n, &blobs)
}

/// Fixed synthetic density of seven Gaussian blobs of varied size and weight.
pub fn blob_density(n: usize) -> Result<ComplexImage> {
    if n == 0 {
        return Err(Error::InvalidArgument("grid side must be positive".into()));
    }
    // position in [-1, 1]², weight, width as a fraction of n
    const BLOBS: [(f64, f64, f64, f64); 7] = [
        (-0.7, -0.5, 1.0, 0.07),
        (0.1, -0.8, 0.6, 0.05),
        (0.6, 0.2, 0.8, 0.09),
        (-0.2, 0.5, 0.5, 0.06),
        (0.8, -0.4, 0.4, 0.05),
        (-0.6, 0.9, 0.7, 0.08),
        (0.2, 0.0, 0.9, 0.06),
    ];
    let planar: Vec<[f64; 2]> = BLOBS.iter().map(|b| [b.0, b.1]).collect();
    let blobs: Vec<_> = fit_to_grid(&planar, n)
        .into_iter()
        .zip(BLOBS)
        .map(|(p, b)| (p[0], p[1], b.2, b.3 * n as f64))
        .collect();
    rasterize(n, &blobs)
}
