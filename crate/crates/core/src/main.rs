use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use phasecut::harness::{
    build_instance, run_pipeline, sweep, write_image, ExperimentConfig, Method, Molecule, Normalization, SweepSpec,
    CSV_HEADER,
};
use phasecut::{Error, Result};

#[derive(Parser)]
#[command(name = "phasecut", version, about = "Phase retrieval from coded diffraction patterns")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write the ground-truth image and simulated observations.
    Simulate {
        #[command(flatten)]
        config: ConfigArgs,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Run one experiment and print its CSV row.
    Solve {
        #[command(flatten)]
        config: ConfigArgs,
        /// CSV destination; standard output when absent.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write the reconstruction (.pgm or .csv).
        #[arg(long)]
        image: Option<PathBuf>,
    },
    /// Run the Cartesian grid of every comma-separated list.
    Sweep {
        #[command(flatten)]
        config: ConfigArgs,
        /// Include wall-clock columns (makes output run-dependent).
        #[arg(long)]
        timings: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Rasterize a molecule to an image (.pgm or .csv).
    Density {
        #[arg(long)]
        pdb: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "caffeine")]
        molecule: Builtin,
        #[arg(long, default_value_t = 128)]
        n: usize,
        /// Blob width in pixels (default 1.2·N/128).
        #[arg(long)]
        sigma: Option<f64>,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Builtin {
    Caffeine,
    Blobs,
}

#[derive(Clone, Copy, ValueEnum)]
enum Scale {
    Peak,
    Mass,
}

#[derive(Args)]
struct ConfigArgs {
    /// PDB file; overrides --molecule.
    #[arg(long)]
    pdb: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "blobs")]
    molecule: Builtin,
    /// Scale of the simulated image before noise: unit peak or unit mass.
    #[arg(long, value_enum, default_value = "peak")]
    normalize: Scale,
    #[arg(long, default_value_t = 16)]
    n: usize,
    #[arg(long, value_delimiter = ',', default_value = "2")]
    masks: Vec<usize>,
    #[arg(long = "filter-res", value_delimiter = ',', default_value = "1")]
    filter_res: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_value = "2")]
    osf: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_value = "0")]
    alpha: Vec<f64>,
    /// Observations kept for the relaxation; "all" keeps every one.
    #[arg(long, value_delimiter = ',', default_value = "all")]
    kept: Vec<String>,
    #[arg(long, value_delimiter = ',', default_value = "phasecut-bcdlr+refine")]
    method: Vec<String>,
    #[arg(long, default_value_t = phasecut::bcd::DEFAULT_NU)]
    nu: f64,
    #[arg(long, default_value_t = phasecut::bcd::DEFAULT_CYCLES)]
    cycles: usize,
    #[arg(long, default_value_t = phasecut::bcd::DEFAULT_RANK)]
    rank: usize,
    #[arg(long = "fienup-iters", default_value_t = 5000)]
    fienup_iters: usize,
    #[arg(long, default_value_t = phasecut::greedy::DEFAULT_BETA)]
    beta: f64,
    #[arg(long = "greedy-cycles", default_value_t = 5)]
    greedy_cycles: usize,
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long = "admm-iters", default_value_t = phasecut::structured::DEFAULT_ADMM_ITERS)]
    admm_iters: usize,
    /// Seeds as a list and/or half-open ranges, e.g. "0..20" or "1,5,9".
    #[arg(long, value_delimiter = ',', default_value = "0")]
    seed: Vec<String>,
}

fn parse_kept(s: &str) -> Result<Option<usize>> {
    if s.eq_ignore_ascii_case("all") {
        return Ok(None);
    }
    s.parse().map(Some).map_err(|_| Error::Config(format!("bad kept value {s:?}")))
}

fn parse_seeds(items: &[String]) -> Result<Vec<u64>> {
    let bad = |s: &str| Error::Config(format!("bad seed {s:?}"));
    let mut out = Vec::new();
    for item in items {
        if let Some((a, b)) = item.split_once("..") {
            let a: u64 = a.parse().map_err(|_| bad(item))?;
            let b: u64 = b.parse().map_err(|_| bad(item))?;
            out.extend(a..b);
        } else {
            out.push(item.parse().map_err(|_| bad(item))?);
        }
    }
    if out.is_empty() {
        return Err(Error::Config("no seeds given".into()));
    }
    Ok(out)
}

fn only<T: Copy>(name: &str, values: &[T]) -> Result<T> {
    match values {
        [v] => Ok(*v),
        _ => Err(Error::Config(format!("--{name} takes a single value here"))),
    }
}

impl ConfigArgs {
    fn molecule(&self) -> Molecule {
        match (&self.pdb, self.molecule) {
            (Some(p), _) => Molecule::Pdb(p.clone()),
            (None, Builtin::Caffeine) => Molecule::Caffeine,
            (None, Builtin::Blobs) => Molecule::Blobs,
        }
    }

    fn spec(&self) -> Result<SweepSpec> {
        let kept = self.kept.iter().map(|s| parse_kept(s)).collect::<Result<Vec<_>>>()?;
        let methods = self.method.iter().map(|s| s.parse()).collect::<Result<Vec<Method>>>()?;
        let seeds = parse_seeds(&self.seed)?;
        let base = ExperimentConfig {
            molecule: self.molecule(),
            normalization: match self.normalize {
                Scale::Peak => Normalization::UnitPeak,
                Scale::Mass => Normalization::UnitMass,
            },
            n: self.n,
            masks: self.masks[0],
            filter_res: self.filter_res[0],
            osf: self.osf[0],
            alpha: self.alpha[0],
            kept: kept[0],
            method: methods[0],
            nu: self.nu,
            cycles: self.cycles,
            rank: self.rank,
            fienup_iters: self.fienup_iters,
            beta: self.beta,
            greedy_cycles: self.greedy_cycles,
            sigma: self.sigma,
            admm_iters: self.admm_iters,
            seed: seeds[0],
        };
        Ok(SweepSpec {
            base,
            masks: self.masks.clone(),
            filter_res: self.filter_res.clone(),
            osf: self.osf.clone(),
            alpha: self.alpha.clone(),
            kept,
            methods,
            seeds,
            timings: false,
        })
    }

    fn single(&self) -> Result<ExperimentConfig> {
        let spec = self.spec()?;
        only("masks", &spec.masks)?;
        only("filter-res", &spec.filter_res)?;
        only("osf", &spec.osf)?;
        only("alpha", &spec.alpha)?;
        only("kept", &spec.kept)?;
        only("method", &spec.methods)?;
        only("seed", &spec.seeds)?;
        spec.base.validate()?;
        Ok(spec.base)
    }
}

fn emit(text: &str, out: Option<&Path>) -> Result<()> {
    match out {
        Some(path) => fs::write(path, text)?,
        None => std::io::stdout().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate { config, out } => {
            let cfg = config.single()?;
            let inst = build_instance(&cfg)?;
            fs::create_dir_all(&out)?;
            write_image(&inst.truth, cfg.osf, &out.join("truth.csv"))?;
            write_image(&inst.truth, cfg.osf, &out.join("truth.pgm"))?;
            let mut text = String::from("index,b,b_clean\n");
            for (i, (b, c)) in inst.b.values().iter().zip(inst.b_clean.values()).enumerate() {
                text.push_str(&format!("{i},{b:?},{c:?}\n"));
            }
            fs::write(out.join("observations.csv"), text)?;
        }
        Command::Solve { config, out, image } => {
            let cfg = config.single()?;
            let result = run_pipeline(&cfg)?;
            if let Some(path) = image {
                write_image(&result.estimate, cfg.osf, &path)?;
            }
            let csv = phasecut::harness::sweep_csv(
                &[vec![phasecut::harness::SweepRow { config: cfg, outcome: Ok(result) }]],
                true,
            );
            // the single run row, without the cell mean
            let row = csv.lines().nth(1).unwrap_or_default();
            emit(&format!("{CSV_HEADER}\n{row}\n"), out.as_deref())?;
        }
        Command::Sweep { config, timings, out } => {
            let spec = SweepSpec { timings, ..config.spec()? };
            emit(&sweep(&spec), out.as_deref())?;
        }
        Command::Density { pdb, molecule, n, sigma, out } => {
            let mol = match (pdb, molecule) {
                (Some(p), _) => Molecule::Pdb(p),
                (None, Builtin::Caffeine) => Molecule::Caffeine,
                (None, Builtin::Blobs) => Molecule::Blobs,
            };
            let sigma = sigma.unwrap_or_else(|| phasecut::harness::default_sigma(n));
            let img = mol.density(n, sigma)?;
            write_image(&img, 1, &out)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
