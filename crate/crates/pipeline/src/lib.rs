//! End-to-end causal identification runs over a corpus, hyperparameter
//! sweeps on gathered evidence and validation-data generation.

pub mod manifest;
pub mod run;
pub mod sweep;
pub mod validation;

pub use manifest::{execute_run, RunManifest, RunRequest, RunStatus};
pub use run::{
    build_graphs, decide_all, decide_pair, gather_all, plan_jobs, run_pipeline, Aggregator, PairJob,
    RunError, RunOutput,
};
pub use sweep::{collect_evidence, sweep, SweepError, SweepGrid, SweepRow};
pub use validation::{generate_validation, GenModes, Seed};
