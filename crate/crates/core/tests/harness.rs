use std::process::Command;

use phasecut::harness::{
    build_instance, caffeine, default_sigma, project_density, read_csv_image, read_image, run_pipeline, sweep,
    write_image, ExperimentConfig, Normalization, SweepSpec, CSV_HEADER, RECOVERY_THRESHOLD,
};
use phasecut::{ComplexImage, MaskSet, MaskedFourierOperator, C64};
use proptest::prelude::*;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_phasecut"))
}

#[test]
fn caffeine_density_scales_to_full_pgm_range() {
    let img = project_density(&caffeine(), 128, default_sigma(128)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("caffeine.pgm");
    write_image(&img, 1, &path).unwrap();
    let bytes = std::fs::read(&path).unwrap();
    // P5 header lines then big-endian 16-bit samples
    let mut offset = 0;
    let mut fields = Vec::new();
    while fields.len() < 4 {
        let end = offset + bytes[offset..].iter().position(|&c| c == b'\n').unwrap();
        let line = std::str::from_utf8(&bytes[offset..end]).unwrap();
        if !line.starts_with('#') {
            fields.extend(line.split_whitespace().map(str::to_owned));
        }
        offset = end + 1;
    }
    assert_eq!(fields, ["P5", "128", "128", "65535"]);
    let px: Vec<u16> = bytes[offset..].chunks_exact(2).map(|c| u16::from_be_bytes([c[0], c[1]])).collect();
    assert_eq!(px.len(), 128 * 128);
    assert_eq!(*px.iter().max().unwrap(), 65535);
    assert!(px.iter().filter(|&&p| p == 0).count() > 128 * 128 / 4);
    let back = read_image(&path).unwrap();
    let peak = img.magnitudes().into_iter().fold(0.0, f64::max);
    for (a, b) in back.magnitudes().iter().zip(img.magnitudes()) {
        assert!((a - b).abs() <= peak / 65535.0);
    }
}

/// Relative error of the image rebuilt from the largest `pct` percent of its
/// unpadded Fourier coefficients, phases included.
fn truncated_spectrum_error(sigma: f64, pct: usize) -> f64 {
    let x = project_density(&caffeine(), 128, sigma).unwrap();
    let masks = MaskSet::new(128, 1, vec![vec![1.0; 128 * 128]]).unwrap();
    let op = MaskedFourierOperator::new(masks, 1).unwrap();
    let y = op.apply_a(&x).unwrap();
    let mut order: Vec<usize> = (0..y.len()).collect();
    order.sort_by(|&i, &j| y[j].norm().total_cmp(&y[i].norm()));
    let mut kept = vec![C64::new(0.0, 0.0); y.len()];
    for &i in &order[..y.len() * pct / 100] {
        kept[i] = y[i];
    }
    let xr = op.apply_a_dagger(&kept).unwrap();
    let err: f64 = xr.values().iter().zip(x.values()).map(|(a, b)| (a - b).norm_sqr()).sum();
    (err / x.norm_sqr()).sqrt()
}

#[test]
fn caffeine_spectrum_is_compressible() {
    // blobs of roughly atomic width; the sharper 1.2 px default needs more
    let rel = truncated_spectrum_error(4.0, 4);
    assert!(rel < 10f64.powf(-1.5), "relative error {rel}");
    let sharp = truncated_spectrum_error(default_sigma(128), 4);
    assert!(sharp > rel);
}

#[test]
fn normalization_only_rescales_the_truth() {
    let base = ExperimentConfig { n: 8, ..Default::default() };
    let peak = build_instance(&base).unwrap();
    let mass = build_instance(&ExperimentConfig { normalization: Normalization::UnitMass, ..base.clone() }).unwrap();
    let max = peak.truth.magnitudes().into_iter().fold(0.0, f64::max);
    assert!((max - 1.0).abs() < 1e-12);
    let total: f64 = mass.truth.values().iter().map(|z| z.re).sum();
    assert!((total - 1.0).abs() < 1e-12);
    let ratio = peak.b_clean.values()[0] / mass.b_clean.values()[0];
    for (p, m) in peak.b_clean.values().iter().zip(mass.b_clean.values()) {
        assert!((p - m * ratio).abs() <= 1e-10 * p.max(1.0));
    }
}

#[test]
fn recovery_flag_matches_threshold_across_methods() {
    let base = ExperimentConfig { n: 4, fienup_iters: 200, cycles: 5, ..Default::default() };
    let spec = SweepSpec {
        masks: vec![1, 2, 3],
        methods: ["gs", "fienup", "greedy", "phasecut-bcd", "phasecut-bcdlr+refine"]
            .iter()
            .map(|m| m.parse().unwrap())
            .collect(),
        seeds: vec![0, 1],
        ..SweepSpec::single(base)
    };
    for cell in spec.cells() {
        for cfg in cell {
            let r = run_pipeline(&cfg).unwrap();
            assert!(r.obs_mse >= 0.0 && r.img_residual >= 0.0);
            assert_eq!(r.recovered, r.obs_mse < RECOVERY_THRESHOLD, "{cfg:?}");
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn injected_true_phase_is_exact(
        n in prop::sample::select(vec![4usize, 8]),
        masks in 1usize..4,
        res in prop::sample::select(vec![1usize, 2, 4]),
        osf in 1usize..3,
        seed in 0u64..500,
    ) {
        let cfg = ExperimentConfig {
            n, masks, filter_res: res, osf, seed,
            method: "truth".parse().unwrap(),
            ..Default::default()
        };
        let r = run_pipeline(&cfg).unwrap();
        // a single closed mask can hide pixels from every pattern
        if build_instance(&cfg).unwrap().op.masks().coverage().iter().all(|&c| c > 0.0) {
            prop_assert!(r.obs_mse < 1e-20, "{}", r.obs_mse);
            prop_assert!(r.img_residual <= 1e-10, "{}", r.img_residual);
        }
    }
}

#[test]
fn sweep_output_is_stable_across_runs_and_threads() {
    let base = ExperimentConfig { n: 4, fienup_iters: 30, cycles: 3, ..Default::default() };
    let spec = SweepSpec {
        alpha: vec![0.0, 1e-2],
        methods: vec!["fienup".parse().unwrap(), "phasecut-bcdlr+refine".parse().unwrap()],
        seeds: (0..6).collect(),
        ..SweepSpec::single(base)
    };
    let a = sweep(&spec);
    let pool = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap();
    let b = pool.install(|| sweep(&spec));
    assert_eq!(a, b);
}

#[test]
fn cli_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let common = ["--n", "4", "--masks", "2", "--fienup-iters", "50", "--cycles", "3"];

    let out = bin().arg("simulate").args(common).arg("--out").arg(d.join("sim")).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let truth = read_image(&d.join("sim/truth.csv")).unwrap();
    assert_eq!(truth.side(), 4);
    let (_, osf) = read_csv_image(std::fs::File::open(d.join("sim/truth.csv")).unwrap()).unwrap();
    assert_eq!(osf, 2);
    let obs = std::fs::read_to_string(d.join("sim/observations.csv")).unwrap();
    assert_eq!(obs.lines().count(), 1 + 2 * 8 * 8);

    let out = bin()
        .arg("solve")
        .args(common)
        .args(["--method", "phasecut-bcdlr+refine", "--seed", "3"])
        .arg("--image")
        .arg(d.join("est.pgm"))
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], CSV_HEADER);
    assert!(lines[1].starts_with("3,2,1,2,0,128,phasecut-bcdlr+refine,"));
    assert_eq!(lines.len(), 2);
    assert_eq!(read_image(&d.join("est.pgm")).unwrap().side(), 4);

    let run_sweep = |name: &str| {
        let out = bin()
            .arg("sweep")
            .args(["--n", "4", "--fienup-iters", "50", "--cycles", "3"])
            .args(["--masks", "1,2", "--alpha", "0,0.001", "--method", "fienup,gs", "--seed", "0..3"])
            .arg("--out")
            .arg(d.join(name))
            .output()
            .unwrap();
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        std::fs::read(d.join(name)).unwrap()
    };
    let first = run_sweep("a.csv");
    assert_eq!(first, run_sweep("b.csv"));
    let text = String::from_utf8(first).unwrap();
    // 8 cells of 3 seeds and a mean row
    assert_eq!(text.lines().count(), 1 + 8 * 4);

    let out = bin().args(["density", "--n", "32"]).arg("--out").arg(d.join("c.csv")).output().unwrap();
    assert!(out.status.success());
    let img = read_image(&d.join("c.csv")).unwrap();
    let mass: f64 = img.values().iter().map(|z| z.re).sum();
    assert!((mass - 1.0).abs() < 1e-9);
    let pdb = d.join("one.pdb");
    std::fs::write(&pdb, "HETATM    1  O   HOH A   1       1.000   2.000   3.000  1.00  0.00           O\n").unwrap();
    let out = bin().arg("density").arg("--pdb").arg(&pdb).args(["--n", "9"]).arg("--out").arg(d.join("o.pgm")).output().unwrap();
    assert!(out.status.success());
    let img: ComplexImage = read_image(&d.join("o.pgm")).unwrap();
    let peak = img.magnitudes().into_iter().enumerate().fold((0, 0.0), |m, (i, v)| if v > m.1 { (i, v) } else { m });
    assert_eq!(peak.0, 4 * 9 + 4);

    let out = bin().args(["solve", "--n", "4", "--masks", "1,2"]).output().unwrap();
    assert!(!out.status.success());
    let out = bin().args(["solve", "--n", "4", "--method", "magic"]).output().unwrap();
    assert!(!out.status.success());
}
