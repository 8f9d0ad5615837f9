//! Blocked Gibbs sampler and chain driver.

mod chain;
mod generative;
mod updates;

pub use chain::{
    emission_sweeps, run_chain, run_chain_with, snapshot_schedule, ChainDiagnostics, ChainOptions, ChainRecord,
};
pub use generative::{draw_from_model, simulate_values};
pub use updates::{
    impute_missing, update_allocations, update_component_params, update_hyperparameters, update_latent_z,
    update_weights,
};

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::dist::GaussianKernel;
use crate::error::{Error, Result};
use crate::model::{init_state, Model, SamplerState};
use crate::rng::SimRng;

/// Per-sweep summary.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepDiagnostics {
    pub sweep: usize,
    /// Distinct occupied indices of H, H_ZA, H_XA, H_B.
    pub occupied: [usize; 4],
    /// α, α_ZA, α_XA, α_B.
    pub alpha: [f64; 4],
    /// Augmented-data log likelihood log p(Z, X | allocations, parameters).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub log_lik: Option<f64>,
    /// True when some allocation sits at its truncation level.
    pub top_index: bool,
}

/// One chain: model, state and its random stream.
pub struct Sampler<'m> {
    model: &'m Model,
    state: SamplerState,
    rng: SimRng,
    hierarchical: bool,
    track_log_lik: bool,
    sweeps: usize,
}

impl<'m> Sampler<'m> {
    pub fn new(model: &'m Model, data: &Dataset, mut rng: SimRng) -> Result<Self> {
        let state = init_state(model, data, &mut rng)?;
        Ok(Self::from_state(model, state, rng))
    }

    pub fn from_state(model: &'m Model, state: SamplerState, rng: SimRng) -> Self {
        Self { model, state, rng, hierarchical: false, track_log_lik: false, sweeps: 0 }
    }

    pub fn hierarchical(mut self, on: bool) -> Self {
        self.hierarchical = on;
        self
    }

    pub fn track_log_likelihood(mut self, on: bool) -> Self {
        self.track_log_lik = on;
        self
    }

    pub fn state(&self) -> &SamplerState {
        &self.state
    }

    pub fn state_mut(&mut self) -> &mut SamplerState {
        &mut self.state
    }

    pub fn rng_mut(&mut self) -> &mut SimRng {
        &mut self.rng
    }

    pub fn into_state(self) -> SamplerState {
        self.state
    }

    /// Z → allocations → component parameters → weights and α → imputation.
    pub fn sweep(&mut self, data: &Dataset) -> Result<SweepDiagnostics> {
        self.sweeps += 1;
        let sweep = self.sweeps;
        self.sweep_inner(data).map_err(|e| Error::Sweep { sweep, source: Box::new(e) })
    }

    fn sweep_inner(&mut self, data: &Dataset) -> Result<SweepDiagnostics> {
        let (model, state, rng) = (self.model, &mut self.state, &mut self.rng);
        let kernels = state.params.kernels()?;
        update_latent_z(model, data, state, &kernels, rng);
        update_allocations(model, state, &kernels, rng);
        update_component_params(model, state, &kernels, rng)?;
        if self.hierarchical {
            update_hyperparameters(model, state, rng);
        }
        update_weights(model, state, rng);
        let kernels = state.params.kernels()?;
        impute_missing(model, data, state, &kernels, rng);
        let log_lik = self.track_log_lik.then(|| augmented_log_lik(model, state, &kernels));
        Ok(self.diagnostics(log_lik))
    }

    fn diagnostics(&self, log_lik: Option<f64>) -> SweepDiagnostics {
        let s = &self.state;
        let t = self.model.truncation;
        let distinct = |a: &[usize], k: usize| {
            let mut seen = vec![false; k];
            a.iter().for_each(|&x| seen[x] = true);
            seen.iter().filter(|&&b| b).count()
        };
        let top = |a: &[usize], k: usize| k > 1 && a.iter().any(|&x| x == k - 1);
        let w = &s.params.weights;
        SweepDiagnostics {
            sweep: self.sweeps,
            occupied: [
                distinct(&s.h, t.n),
                distinct(&s.h_za, t.n_za),
                distinct(&s.h_xa, t.n_xa),
                distinct(&s.h_b, t.n_b),
            ],
            alpha: [w.alpha, w.alpha_za, w.alpha_xa, w.alpha_b],
            log_lik,
            top_index: top(&s.h, t.n) || top(&s.h_za, t.n_za) || top(&s.h_xa, t.n_xa) || top(&s.h_b, t.n_b),
        }
    }
}

fn augmented_log_lik(model: &Model, state: &SamplerState, kernels: &[GaussianKernel]) -> f64 {
    let mut mu = vec![0.0; model.p_ac()];
    let mut total = 0.0;
    for i in 0..state.n() {
        let r = state.h_za[i];
        state.params.mean_into(r, state.design_row(i), &mut mu);
        total += kernels[r].log_density(state.z_row(i), &mu);
        let row = state.values_row(i);
        for (v, j) in model.view.nominal_focus.clone().enumerate() {
            total += state.params.psi[v][state.h_xa[i]][row[j] as usize - 1].ln();
        }
        for (v, j) in model.view.remainder.clone().enumerate() {
            total += state.params.phi[v][state.h_b[i]][row[j] as usize - 1].ln();
        }
    }
    total
}
