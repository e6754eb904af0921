//! Keyed, order-independent batches of trials.

use std::collections::BTreeMap;

use rayon::prelude::*;
use sha2::{Digest, Sha256};

use super::execute::{run_trial, SimOptions, TrialResult};
use super::model::ErrorModel;
use crate::error::{Error, Result};
use crate::geometry::{PelvicFrame, TriangleMesh};
use crate::planning::{ResectionPlan, Side};
use crate::scalar::Scalar;

/// Specimen id and side.
pub type TrialKey = (String, Side);

pub struct TrialInput<'a, T: Scalar> {
    pub plan: &'a ResectionPlan<T>,
    pub frame: &'a PelvicFrame<T>,
    pub bone: &'a TriangleMesh<T>,
    pub seed: u64,
}

/// Per-trial seed: the first 8 bytes of SHA-256 over the run seed and key.
pub fn derive_seed(run_seed: u64, key: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(run_seed.to_le_bytes());
    h.update(key.as_bytes());
    let digest = h.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("8 bytes"))
}

pub fn trial_key_string(id: &str, side: Side) -> String {
    format!("{id}/{side}")
}

pub fn run_batch<T: Scalar>(
    inputs: &[TrialInput<'_, T>],
    model: &ErrorModel,
    options: &SimOptions,
) -> Result<BTreeMap<TrialKey, TrialResult<T>>> {
    let mut seen = std::collections::BTreeSet::new();
    for i in inputs {
        if !seen.insert((i.plan.specimen_id.clone(), i.plan.side)) {
            return Err(Error::DuplicateLabel(trial_key_string(
                &i.plan.specimen_id,
                i.plan.side,
            )));
        }
    }
    let results: Vec<Result<TrialResult<T>>> = inputs
        .par_iter()
        .map(|i| run_trial(i.plan, &model.clone().with_seed(i.seed), i.frame, i.bone, options))
        .collect();
    let mut out = BTreeMap::new();
    for r in results {
        let r = r?;
        out.insert((r.specimen_id.clone(), r.side), r);
    }
    Ok(out)
}
