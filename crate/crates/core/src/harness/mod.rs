//! Experiment plumbing: molecules, densities, noisy observations, solver
//! pipelines, benchmark sweeps and image files.

pub mod density;
pub mod io;
pub mod noise;
pub mod pdb;
pub mod pipeline;
pub mod sweep;

pub use density::{blob_density, default_sigma, project_density};
pub use io::{read_csv_image, read_image, read_pgm, write_csv_image, write_image, write_pgm};
pub use noise::{sample_poisson, simulate_observations};
pub use pdb::{atomic_number, caffeine, parse_pdb, Atom};
pub use pipeline::{
    build_instance, observation_mse, relative_objective, run_pipeline, solve_instance, stream_seed,
    ExperimentConfig, ExperimentResult, Instance, Method, Molecule, Normalization, Solver, RECOVERY_THRESHOLD,
};
pub use sweep::{run_sweep, sweep, sweep_csv, SweepRow, SweepSpec, CSV_HEADER};
