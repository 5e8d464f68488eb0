use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::constraints::ConstraintSet;
use crate::scalar::{self, Scalar};

fn tagged(c: &ConstraintSet) -> BTreeSet<String> {
    let r = c
        .resource
        .iter()
        .map(|p| format!("R|{}|{}|{}", p.step.job_id, p.step.step_index, p.machine));
    let p = c.precedence.iter().map(|p| {
        format!(
            "P|{}|{}|{}|{}",
            p.before.job_id, p.before.step_index, p.after.job_id, p.after.step_index
        )
    });
    r.chain(p).collect()
}

/// Intersection over union of the tagged resource and precedence pairs;
/// 1 when both sets are empty.
pub fn constraint_acc<T: Scalar>(pred: &ConstraintSet, gold: &ConstraintSet) -> T {
    let (a, b) = (tagged(pred), tagged(gold));
    let union = a.union(&b).count();
    if union == 0 {
        return T::one();
    }
    T::from_usize_lossy(a.intersection(&b).count()) / T::from_usize_lossy(union)
}

/// Outcome of one procedure in a pipeline run.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunRecord {
    pub procedure: String,
    /// The procedure compiled into a valid solver input.
    pub input_valid: bool,
    /// The solver scheduled the procedure (status optimal or feasible).
    pub solve_ok: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorRates<T> {
    pub compiler_er: T,
    pub runtime_er: T,
}

/// Compile-failure and solve-failure fractions; an empty log scores zero.
/// A procedure that failed to compile is not counted as a runtime error.
pub fn error_rates<T: Scalar>(log: &[RunRecord]) -> ErrorRates<T> {
    if log.is_empty() {
        return ErrorRates {
            compiler_er: T::zero(),
            runtime_er: T::zero(),
        };
    }
    let n = T::from_usize_lossy(log.len());
    let bad_input = log.iter().filter(|r| !r.input_valid).count();
    let bad_solve = log.iter().filter(|r| r.input_valid && !r.solve_ok).count();
    ErrorRates {
        compiler_er: T::from_usize_lossy(bad_input) / n,
        runtime_er: T::from_usize_lossy(bad_solve) / n,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum MetricError {
    #[error("degenerate input: {0}")]
    DegenerateInput(String),
}

/// Population variance over mean.
pub fn vmr<T: Scalar>(values: &[T]) -> Result<T, MetricError> {
    let m = scalar::mean(values).ok_or_else(|| MetricError::DegenerateInput("no values".into()))?;
    if m == T::zero() {
        return Err(MetricError::DegenerateInput("mean is zero".into()));
    }
    Ok(scalar::variance(values).expect("non-empty") / m)
}
