use serde::{Deserialize, Serialize};

use super::{Sampler, SweepDiagnostics};
use crate::data::{CompletedDataset, Dataset};
use crate::error::{Error, Result};
use crate::model::{Model, Params, SamplerState};
use crate::rng;

/// Schedule and switches for one chain. Sweeps are counted from 1.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChainOptions {
    pub burn_in: usize,
    pub thin: usize,
    pub m: usize,
    pub seed: u64,
    /// Conjugate updates of B_0 and τ².
    pub hierarchical: bool,
    /// Number of parameter snapshots to retain (0 for none).
    pub snapshots: usize,
    pub track_log_likelihood: bool,
}

impl Default for ChainOptions {
    fn default() -> Self {
        Self { burn_in: 2000, thin: 200, m: 5, seed: 0, hierarchical: false, snapshots: 0, track_log_likelihood: false }
    }
}

impl ChainOptions {
    pub fn validate(&self) -> Result<()> {
        if self.thin == 0 || self.m == 0 {
            return Err(Error::InvalidArgument("thin and m must be at least 1".into()));
        }
        Ok(())
    }

    pub fn total_sweeps(&self) -> usize {
        self.burn_in + self.m * self.thin
    }
}

/// Sweeps at which completed datasets are emitted: burn_in + k·thin, k = 1..m.
pub fn emission_sweeps(options: &ChainOptions) -> Vec<usize> {
    (1..=options.m).map(|k| options.burn_in + k * options.thin).collect()
}

/// Emission sweeps plus evenly spaced post-burn-in sweeps, `count` in total, ascending.
pub fn snapshot_schedule(options: &ChainOptions, count: usize) -> Result<Vec<usize>> {
    let emit = emission_sweeps(options);
    let post = options.m * options.thin;
    if count > post {
        return Err(Error::InvalidArgument(format!(
            "{count} parameter snapshots requested but only {post} post-burn-in sweeps run"
        )));
    }
    if count <= emit.len() {
        let k = emit.len();
        return Ok((0..count).map(|c| emit[((2 * c + 1) * k) / (2 * count)]).collect());
    }
    let others: Vec<usize> = (options.burn_in + 1..=options.total_sweeps())
        .filter(|s| !(s - options.burn_in).is_multiple_of(options.thin))
        .collect();
    let extra = count - emit.len();
    let mut out = emit;
    out.extend((0..extra).map(|k| others[((2 * k + 1) * others.len()) / (2 * extra)]));
    out.sort_unstable();
    Ok(out)
}

/// Serializable chain summary.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainDiagnostics {
    pub seed: u64,
    pub options: ChainOptions,
    pub emitted_at: Vec<usize>,
    pub snapshot_sweeps: Vec<usize>,
    /// Post-burn-in sweeps at which some allocation sat at its truncation level.
    pub top_index_sweeps: usize,
    pub sweeps: Vec<SweepDiagnostics>,
}

/// Saved output of one chain.
#[derive(Clone, Debug)]
pub struct ChainRecord {
    pub imputations: Vec<CompletedDataset>,
    pub snapshots: Vec<Params>,
    pub diagnostics: ChainDiagnostics,
}

pub fn run_chain(model: &Model, data: &Dataset, options: &ChainOptions) -> Result<ChainRecord> {
    run_chain_with(model, data, options, |_, _| {})
}

/// As [`run_chain`], calling `observer` after every sweep.
pub fn run_chain_with(
    model: &Model,
    data: &Dataset,
    options: &ChainOptions,
    mut observer: impl FnMut(&SweepDiagnostics, &SamplerState),
) -> Result<ChainRecord> {
    options.validate()?;
    let emit = emission_sweeps(options);
    let snaps = snapshot_schedule(options, options.snapshots)?;
    let mut sampler = Sampler::new(model, data, rng::named(options.seed, "chain"))?
        .hierarchical(options.hierarchical)
        .track_log_likelihood(options.track_log_likelihood);
    let mut record = ChainRecord {
        imputations: Vec::with_capacity(options.m),
        snapshots: Vec::with_capacity(snaps.len()),
        diagnostics: ChainDiagnostics {
            seed: options.seed,
            options: options.clone(),
            emitted_at: emit.clone(),
            snapshot_sweeps: snaps.clone(),
            top_index_sweeps: 0,
            sweeps: Vec::with_capacity(options.total_sweeps()),
        },
    };
    let (mut next_emit, mut next_snap) = (0, 0);
    for sweep in 1..=options.total_sweeps() {
        let diag = sampler.sweep(data)?;
        if diag.top_index && sweep > options.burn_in {
            if record.diagnostics.top_index_sweeps == 0 {
                log::warn!(
                    "sweep {sweep}: an allocation occupies the top truncation index; consider larger truncation levels"
                );
            }
            record.diagnostics.top_index_sweeps += 1;
        }
        if emit.get(next_emit) == Some(&sweep) {
            record.imputations.push(sampler.state().completed(data)?);
            next_emit += 1;
        }
        if snaps.get(next_snap) == Some(&sweep) {
            record.snapshots.push(sampler.state().params.clone());
            next_snap += 1;
        }
        observer(&diag, sampler.state());
        record.diagnostics.sweeps.push(diag);
    }
    Ok(record)
}
