//! Cartesian benchmark grids and their CSV tables.

use std::fmt::Write as _;

use rayon::prelude::*;

use super::pipeline::{run_pipeline, ExperimentConfig, ExperimentResult, Method};

pub const CSV_HEADER: &str = "seed,masks,filter_res,osf,alpha,kept,method,obs_mse,img_residual,recovered,obj_final,time_sdp_s,time_refine_s,eig_ratio";

/// Value grids; every other field comes from `base`.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepSpec {
    pub base: ExperimentConfig,
    pub masks: Vec<usize>,
    pub filter_res: Vec<usize>,
    pub osf: Vec<usize>,
    pub alpha: Vec<f64>,
    pub kept: Vec<Option<usize>>,
    pub methods: Vec<Method>,
    pub seeds: Vec<u64>,
    /// Write wall times; off by default so tables are reproducible bytewise.
    pub timings: bool,
}

impl SweepSpec {
    /// A spec that runs `base` alone.
    pub fn single(base: ExperimentConfig) -> Self {
        Self {
            masks: vec![base.masks],
            filter_res: vec![base.filter_res],
            osf: vec![base.osf],
            alpha: vec![base.alpha],
            kept: vec![base.kept],
            methods: vec![base.method],
            seeds: vec![base.seed],
            timings: false,
            base,
        }
    }

    /// Cells in output order (masks, filter_res, osf, alpha, kept, method),
    /// each holding one config per seed.
    pub fn cells(&self) -> Vec<Vec<ExperimentConfig>> {
        let mut cells = Vec::new();
        for &masks in &self.masks {
            for &filter_res in &self.filter_res {
                for &osf in &self.osf {
                    for &alpha in &self.alpha {
                        for &kept in &self.kept {
                            for &method in &self.methods {
                                let cfg = ExperimentConfig {
                                    masks,
                                    filter_res,
                                    osf,
                                    alpha,
                                    kept,
                                    method,
                                    ..self.base.clone()
                                };
                                cells.push(self.seeds.iter().map(|&seed| ExperimentConfig { seed, ..cfg.clone() }).collect());
                            }
                        }
                    }
                }
            }
        }
        cells
    }
}

#[derive(Clone, Debug)]
pub struct SweepRow {
    pub config: ExperimentConfig,
    /// Failed runs keep their error message.
    pub outcome: Result<ExperimentResult, String>,
}

/// Runs every cell; runs are independent and the output keeps grid order.
pub fn run_sweep(spec: &SweepSpec) -> Vec<Vec<SweepRow>> {
    spec.cells()
        .into_iter()
        .map(|cell| {
            cell.into_par_iter()
                .map(|config| {
                    let outcome = run_pipeline(&config).map_err(|e| e.to_string());
                    SweepRow { config, outcome }
                })
                .collect()
        })
        .collect()
}

fn num(v: f64) -> String {
    format!("{v:e}")
}

fn prefix(out: &mut String, seed: &str, cfg: &ExperimentConfig) {
    let _ = write!(
        out,
        "{seed},{},{},{},{},{},{}",
        cfg.masks,
        cfg.filter_res,
        cfg.osf,
        cfg.alpha,
        cfg.effective_dim(),
        cfg.method
    );
}

/// One row per run followed by a `seed = mean` row per cell holding the mean
/// MSE, residual and objective and the recovery probability.
pub fn sweep_csv(cells: &[Vec<SweepRow>], timings: bool) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for cell in cells {
        let mut ok = Vec::new();
        for row in cell {
            prefix(&mut out, &row.config.seed.to_string(), &row.config);
            match &row.outcome {
                Ok(r) => {
                    let (ts, tr) = if timings {
                        (num(r.time_solver), num(r.time_refine))
                    } else {
                        (String::new(), String::new())
                    };
                    let _ = writeln!(
                        out,
                        ",{},{},{},{},{ts},{tr},{}",
                        num(r.obs_mse),
                        num(r.img_residual),
                        u8::from(r.recovered),
                        num(r.obj_final),
                        r.eig_ratio.map(num).unwrap_or_default()
                    );
                    ok.push(r);
                }
                Err(_) => out.push_str(",,,error,,,,\n"),
            }
        }
        if let Some(first) = cell.first() {
            prefix(&mut out, "mean", &first.config);
            if ok.is_empty() {
                out.push_str(",,,,,,,\n");
                continue;
            }
            let mean = |f: &dyn Fn(&ExperimentResult) -> f64| ok.iter().map(|r| f(r)).sum::<f64>() / ok.len() as f64;
            let ratios: Vec<f64> = ok.iter().filter_map(|r| r.eig_ratio).collect();
            let ratio = if ratios.len() == ok.len() {
                num(ratios.iter().sum::<f64>() / ratios.len() as f64)
            } else {
                String::new()
            };
            let _ = writeln!(
                out,
                ",{},{},{},{},,,{ratio}",
                num(mean(&|r| r.obs_mse)),
                num(mean(&|r| r.img_residual)),
                mean(&|r| f64::from(u8::from(r.recovered))),
                num(mean(&|r| r.obj_final)),
            );
        }
    }
    out
}

pub fn sweep(spec: &SweepSpec) -> String {
    sweep_csv(&run_sweep(spec), spec.timings)
}
