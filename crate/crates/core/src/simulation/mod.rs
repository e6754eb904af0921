//! Simulated execution of planned cuts: error models, kerf cuts and trials.

mod batch;
mod execute;
mod model;

pub use batch::{derive_seed, run_batch, trial_key_string, TrialInput, TrialKey};
pub use execute::{
    execute_cut, perturb_plane, run_trial, CutResult, ExecutedCut, Pivot, SimOptions, TrialResult, VoidCut,
    DEFAULT_KERF,
};
pub use model::{sample_execution_error, Distribution, ErrorModel, ExecutionError, Family, Truncation};
