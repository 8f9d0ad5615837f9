use serde::{Deserialize, Serialize};

use super::generator::TruthTable;
use crate::data::CompletedDataset;
use crate::density::{empirical_table, hellinger};
use crate::error::{Error, Result};
use crate::mi::{mi_interval, MIEstimate};

/// Cells with smaller true probability are left out of Hellinger distances.
pub const HELLINGER_THRESHOLD: f64 = 8e-6;

/// Hellinger distances for P(A), P(B) and P(A, B).
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct HellingerTriple {
    pub a: f64,
    pub b: f64,
    pub ab: f64,
}

/// Per-estimand accuracy of one run, aligned with the truth table's estimand list.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub q_bar: Vec<f64>,
    pub abs_error: Vec<f64>,
    pub covered: Vec<bool>,
    pub width: Vec<f64>,
    /// Averaged over the completed datasets.
    pub hellinger: HellingerTriple,
}

/// Per-dataset Hellinger distances averaged over `completed`.
pub fn average_hellinger(
    truth: &TruthTable,
    completed: &[CompletedDataset],
    threshold: f64,
) -> Result<HellingerTriple> {
    if threshold < truth.ab_floor {
        return Err(Error::InvalidArgument("threshold below the truth table's stored floor".into()));
    }
    let all: Vec<usize> = (0..truth.schemas.len()).collect();
    let mut acc = HellingerTriple::default();
    for d in completed {
        acc.a += hellinger(&truth.p_a, &empirical_table(d, &truth.a_cols), threshold)?;
        acc.b += hellinger(&truth.p_b, &empirical_table(d, &truth.b_cols), threshold)?;
        acc.ab += hellinger(&truth.p_ab, &empirical_table(d, &all), threshold)?;
    }
    let m = completed.len() as f64;
    Ok(HellingerTriple { a: acc.a / m, b: acc.b / m, ab: acc.ab / m })
}

/// Absolute errors, interval coverage at `level`, and averaged Hellinger distances.
pub fn evaluate_run(
    truth: &TruthTable,
    pooled: &[MIEstimate],
    completed: &[CompletedDataset],
    level: f64,
) -> Result<RunMetrics> {
    if pooled.len() != truth.estimands.len() {
        return Err(Error::InvalidArgument(format!(
            "{} pooled estimates for {} estimands",
            pooled.len(),
            truth.estimands.len()
        )));
    }
    if completed.iter().any(|d| d.schemas() != truth.schemas.as_slice()) {
        return Err(Error::InvalidArgument("completed datasets do not match the truth schema".into()));
    }
    let mut m = RunMetrics {
        q_bar: Vec::with_capacity(pooled.len()),
        abs_error: Vec::with_capacity(pooled.len()),
        covered: Vec::with_capacity(pooled.len()),
        width: Vec::with_capacity(pooled.len()),
        hellinger: HellingerTriple::default(),
    };
    for (e, est) in truth.estimands.iter().zip(pooled) {
        let (lo, hi) = mi_interval(est, level)?;
        m.q_bar.push(est.q_bar);
        m.abs_error.push((est.q_bar - e.truth).abs());
        m.covered.push(lo <= e.truth && e.truth <= hi);
        m.width.push(hi - lo);
    }
    m.hellinger = average_hellinger(truth, completed, HELLINGER_THRESHOLD)?;
    Ok(m)
}
