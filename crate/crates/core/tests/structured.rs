mod common;

use std::f64::consts::PI;

use common::{dense_m, dft_matrix, pinv, random_complex, rng};
use nalgebra::{DMatrix, DVector};
use phasecut::structured::{
    build_real_embedding, build_toeplitz, solve_phasecut_complex, solve_phasecut_plus,
    solve_phasecut_real, solve_phasecut_real_nonneg, t_embed, AdmmOptions, RealEmbedding,
    ToeplitzLine,
};
use phasecut::{make_masks, C64, ComplexImage, MaskedFourierOperator, ObservationVector};
use proptest::prelude::*;
use rand::Rng;

fn entry_l1(m: &DMatrix<f64>) -> f64 {
    m.iter().map(|v| v.abs()).sum()
}

fn complex_matrix(seed: u64, r: usize, c: usize) -> DMatrix<C64> {
    let mut g = rng(seed);
    DMatrix::from_vec(r, c, random_complex(&mut g, r * c))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]
    #[test]
    fn t_embedding_is_a_homomorphism(seed in any::<u64>(), r in 1usize..5, k in 1usize..5, c in 1usize..5) {
        let z1 = complex_matrix(seed, r, k);
        let z2 = complex_matrix(seed ^ 0x5eed, k, c);
        let lhs = t_embed(&z1) * t_embed(&z2);
        let rhs = t_embed(&(&z1 * &z2));
        prop_assert!((lhs - rhs).amax() < 1e-12);
        prop_assert_eq!(t_embed(&z1.adjoint()), t_embed(&z1).transpose());
    }
}

#[test]
fn m2_matches_pseudoinverse_oracle() {
    let masks = make_masks(2, 2, 1, 4).unwrap();
    let op = MaskedFourierOperator::new(masks.clone(), 1).unwrap();
    let x = ComplexImage::real_nonnegative(2, vec![0.3, 1.0, 0.2, 0.7]).unwrap();
    let y = op.apply_a(&x).unwrap();
    let b = ObservationVector::new(y.iter().map(|z| z.norm()).collect(), 2, 2).unwrap();
    let emb = build_real_embedding(&op, &b).unwrap();

    let a = dft_matrix(&masks, 1);
    let n = a.nrows();
    let a2 = DMatrix::from_fn(2 * n, a.ncols(), |i, j| {
        if i < n {
            a[(i, j)].re
        } else {
            a[(i - n, j)].im
        }
    });
    let b2 = DMatrix::from_diagonal(&DVector::from_iterator(
        2 * n,
        b.values().iter().chain(b.values()).copied(),
    ));
    let proj = &a2 * a2.clone().pseudo_inverse(1e-12).unwrap();
    let want = b2.transpose() * (DMatrix::identity(2 * n, 2 * n) - proj) * &b2;
    assert!((emb.m2() - &want).amax() < 1e-10);
    let m2 = emb.m2();
    assert!((m2 - m2.transpose()).amax() < 1e-12);
    let min_eig = m2.clone().symmetric_eigenvalues().min();
    let inf_norm = m2.row_iter().map(|r| r.iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max);
    assert!(min_eig >= -1e-8 * inf_norm);
}

/// Consistent real instance: measurement matrix `A` (m×p), real `x`.
fn real_instance(seed: u64, m: usize, p: usize) -> (DMatrix<C64>, Vec<f64>, Vec<f64>) {
    let mut g = rng(seed);
    let a = DMatrix::from_vec(m, p, random_complex(&mut g, m * p));
    let x: Vec<f64> = (0..p).map(|_| g.random::<f64>()).collect();
    let y = &a * DVector::from_iterator(p, x.iter().map(|&v| C64::new(v, 0.0)));
    (a, x, y.iter().map(|z| z.norm()).collect())
}

#[test]
fn phasecut_real_consistent_instance_reaches_zero() {
    for seed in 0..5 {
        let (a, _, b) = real_instance(seed, 8, 3);
        let emb = RealEmbedding::from_dense(&a, &b).unwrap();
        let opts = AdmmOptions { max_iters: 20_000, tol: 1e-9, rho: 1.0, ..AdmmOptions::default() };
        let sol = solve_phasecut_real(&emb, &opts).unwrap();
        assert!(sol.objective <= 1e-6 * entry_l1(emb.m2()), "seed {seed}: {}", sol.objective);
        assert!(sol.pair_residual <= 1e-6);
        for i in 0..emb.pairs() {
            let r = sol.pairs[i].hypot(sol.pairs[emb.pairs() + i]);
            assert!((r - 1.0).abs() < 1e-12);
        }
    }
}

#[test]
fn kept_rows_take_a_principal_submatrix() {
    let (a, _, b) = real_instance(11, 12, 4);
    let full = RealEmbedding::from_dense(&a, &b).unwrap();
    let kept = [1usize, 4, 5, 9];
    let sub = RealEmbedding::from_dense_kept(&a, &b, &kept).unwrap();
    let rows: Vec<usize> = kept.iter().copied().chain(kept.iter().map(|&i| i + 12)).collect();
    let want = full.m2().select_rows(&rows).select_columns(&rows);
    assert!((sub.m2() - want).amax() < 1e-12);
    assert!((sub.lift() - full.lift().select_columns(&rows)).amax() < 1e-12);
    // a square kept system would make every phase optimal
    assert!(sub.m2().amax() > 1e-3);
}

/// Minimum of `vᵀ M2 v` over `v = (cos θ, sin θ)` on a grid, then refined one
/// angle at a time.
fn phase_grid_minimum(m2: &DMatrix<f64>, n: usize) -> f64 {
    let eval = |th: &[f64]| {
        let v = DVector::from_iterator(2 * n, th.iter().map(|t| t.cos()).chain(th.iter().map(|t| t.sin())));
        (v.transpose() * m2 * &v)[(0, 0)]
    };
    let steps: usize = 96;
    let mut best = (f64::INFINITY, vec![0.0; n]);
    let mut th = vec![0.0; n];
    for code in 0..steps.pow(n as u32) {
        let mut c = code;
        for t in th.iter_mut() {
            *t = 2.0 * PI * (c % steps) as f64 / steps as f64;
            c /= steps;
        }
        let f = eval(&th);
        if f < best.0 {
            best = (f, th.clone());
        }
    }
    let (mut f, mut th) = best;
    for _ in 0..50 {
        for i in 0..n {
            let centre = th[i];
            for k in -2000..=2000 {
                let mut trial = th.clone();
                trial[i] = centre + k as f64 * 1e-5;
                let v = eval(&trial);
                if v < f {
                    f = v;
                    th = trial;
                }
            }
        }
    }
    f
}

#[test]
fn phasecut_real_matches_phase_grid_on_three_pairs() {
    for seed in 0..6 {
        let mut g = rng(100 + seed);
        let a = DMatrix::from_vec(3, 1, random_complex(&mut g, 3));
        let b: Vec<f64> = (0..3).map(|_| 0.2 + g.random::<f64>()).collect();
        let emb = RealEmbedding::from_dense(&a, &b).unwrap();
        let opts = AdmmOptions { max_iters: 50_000, tol: 1e-10, rho: 1.0, ..AdmmOptions::default() };
        let sol = solve_phasecut_real(&emb, &opts).unwrap();
        let grid = phase_grid_minimum(emb.m2(), 3);
        let tol = 1e-3 * entry_l1(emb.m2());
        assert!((sol.objective - grid).abs() <= tol, "seed {seed}: sdp {} grid {grid}", sol.objective);
    }
}

#[test]
fn nonneg_variant_keeps_lifted_image_nonnegative() {
    for seed in 0..4 {
        let mut g = rng(200 + seed);
        let a = DMatrix::from_vec(3, 2, random_complex(&mut g, 6));
        let b: Vec<f64> = (0..3).map(|_| 0.2 + g.random::<f64>()).collect();
        let emb = RealEmbedding::from_dense(&a, &b).unwrap();
        let opts = AdmmOptions { max_iters: 50_000, tol: 1e-10, rho: 1.0, ..AdmmOptions::default() };
        let sol = solve_phasecut_real_nonneg(&emb, &opts).unwrap();
        assert!(sol.report.converged, "seed {seed}");
        assert!(sol.nonneg_floor >= -1e-6, "seed {seed}: {}", sol.nonneg_floor);
        assert!(sol.pair_residual <= 1e-6);
        // the extra constraint can only raise the optimum
        let plain = solve_phasecut_real(&emb, &opts).unwrap();
        assert!(sol.objective >= plain.objective - 1e-6 * entry_l1(emb.m2()));
    }
}

#[test]
fn nonneg_truth_is_feasible() {
    let (a, x, b) = real_instance(7, 8, 3);
    let xx = DVector::from_column_slice(&x) * DVector::from_column_slice(&x).transpose();
    assert!(xx.min() >= 0.0);
    let emb = RealEmbedding::from_dense(&a, &b).unwrap();
    // phase pairs of the truth lift back to x itself
    let y = &a * DVector::from_iterator(3, x.iter().map(|&v| C64::new(v, 0.0)));
    let m = y.len();
    let mut v = DVector::zeros(2 * m);
    for i in 0..m {
        let u = y[i] / y[i].norm();
        v[i] = u.re;
        v[m + i] = u.im;
    }
    let lifted = emb.lift() * &v;
    for (got, want) in lifted.iter().zip(&x) {
        assert!((got - want).abs() < 1e-10);
    }
    assert!((v.transpose() * emb.m2() * &v)[(0, 0)].abs() < 1e-10);
}

fn unitary_dft(x: &[f64]) -> Vec<C64> {
    let p = x.len();
    (0..p)
        .map(|f| {
            x.iter()
                .enumerate()
                .map(|(t, &v)| C64::from_polar(v, -2.0 * PI * (f * t) as f64 / p as f64))
                .sum::<C64>()
                / (p as f64).sqrt()
        })
        .collect()
}

#[test]
fn bochner_nonnegative_signals_give_psd_toeplitz() {
    let mut g = rng(300);
    for _ in 0..200 {
        let p = g.random_range(1..=32);
        let x: Vec<f64> = (0..p).map(|_| g.random::<f64>()).collect();
        let y = unitary_dft(&x);
        let t = build_toeplitz(&y).unwrap();
        assert!(t.min_eigenvalue() >= -1e-8 * y[0].re);
    }
}

#[test]
fn bochner_fails_with_a_negative_entry() {
    let mut x = vec![0.0; 8];
    x[0] = 1.0;
    x[1] = -1.0;
    let t = build_toeplitz(&unitary_dft(&x)).unwrap();
    assert!(t.min_eigenvalue() < -1e-4);
}

/// 1D masked DFT: row `s·p + f` is `mask_s(t) e^{−2πi f t / p} / √p`.
fn masked_dft_1d(masks: &[Vec<f64>]) -> DMatrix<C64> {
    let p = masks[0].len();
    DMatrix::from_fn(masks.len() * p, p, |row, t| {
        let (s, f) = (row / p, row % p);
        C64::from_polar(masks[s][t] / (p as f64).sqrt(), -2.0 * PI * (f * t) as f64 / p as f64)
    })
}

fn aligned_error(truth: &[C64], est: &[C64]) -> f64 {
    let inner: C64 = est.iter().zip(truth).map(|(e, t)| e.conj() * t).sum();
    let rot = if inner.norm() > 0.0 { inner / inner.norm() } else { C64::new(1.0, 0.0) };
    let num: f64 = est.iter().zip(truth).map(|(e, t)| (e * rot - t).norm_sqr()).sum();
    let den: f64 = truth.iter().map(|t| t.norm_sqr()).sum();
    (num / den).sqrt()
}

#[test]
fn phasecut_plus_one_dimensional_paired_run() {
    let p = 8;
    let opts = AdmmOptions { max_iters: 100_000, tol: 1e-9, rho: 1.0, ..AdmmOptions::default() };
    let mut wins = 0;
    let seeds = 10;
    for seed in 0..seeds {
        let mut g = rng(400 + seed);
        let masks: Vec<Vec<f64>> = (0..2)
            .map(|s| (0..p).map(|t| if s == 0 && t == 0 || g.random::<bool>() { 1.0 } else { 0.0 }).collect())
            .collect();
        let masks: Vec<Vec<f64>> = if (0..p).any(|t| masks[0][t] + masks[1][t] == 0.0) {
            vec![masks[0].clone(), masks[0].iter().map(|v| 1.0 - v).collect()]
        } else {
            masks
        };
        let x: Vec<C64> = (0..p).map(|_| C64::new(g.random::<f64>(), 0.0)).collect();
        let a = masked_dft_1d(&masks);
        let y = &a * DVector::from_column_slice(&x);
        let b: Vec<f64> = y.iter().map(|z| z.norm()).collect();
        let m = dense_m(&a, &b);
        let lines: Vec<ToeplitzLine> = (0..2)
            .map(|s| ToeplitzLine::new((s * p..(s + 1) * p).collect(), b[s * p..(s + 1) * p].to_vec()).unwrap())
            .collect();

        // ground truth is feasible
        let truth: Vec<C64> = y.iter().map(|z| z / z.norm()).collect();
        for line in &lines {
            assert!(line.constraint(&truth).min_eigenvalue() >= -1e-10);
        }

        let plus = solve_phasecut_plus(&m, &lines, 0, &opts).unwrap();
        assert!(plus.anchor_residual <= 1e-8, "seed {seed}: {}", plus.anchor_residual);
        assert!(plus.toeplitz_floor >= -1e-6, "seed {seed}: {}", plus.toeplitz_floor);
        for i in 0..m.nrows() {
            assert!((plus.lifted[(i, i)].re - 1.0).abs() <= 1e-6);
        }
        let plain = solve_phasecut_complex(&m, &opts).unwrap();
        let a_pinv = pinv(&a);
        let recon = |u: &[C64]| {
            let v = DVector::from_iterator(b.len(), u.iter().zip(&b).map(|(u, b)| u * *b));
            (&a_pinv * v).iter().copied().collect::<Vec<C64>>()
        };
        let e_plus = aligned_error(&x, &recon(plus.phase.values()));
        let e_plain = aligned_error(&x, &recon(plain.phase.values()));
        if e_plus <= e_plain + 1e-9 {
            wins += 1;
        }
    }
    assert!(2 * wins >= seeds, "PhaseCut+ no worse on {wins}/{seeds} seeds");
}
