use nalgebra::{DMatrix, DVector};
use rand::Rng;

use super::{MixtureWeights, Model, Sticks};
use crate::data::{CompletedDataset, Dataset};
use crate::dist::{self, GaussianKernel};
use crate::error::{Error, Result};

/// All mixture parameters of one posterior (or prior) draw.
#[derive(Clone, Debug, PartialEq)]
pub struct Params {
    pub weights: MixtureWeights,
    /// β_r, d × p_Ac, one per ordinal-block component.
    pub beta: Vec<DMatrix<f64>>,
    /// Σ_r, p_Ac × p_Ac.
    pub sigma: Vec<DMatrix<f64>>,
    /// ψ^(j)_l indexed `[nominal focus var][l][level - 1]`.
    pub psi: Vec<Vec<Vec<f64>>>,
    /// φ^(j)_s indexed `[remainder var][s][level - 1]`.
    pub phi: Vec<Vec<Vec<f64>>>,
    /// Current B_0 and τ² (fixed unless hierarchical updates are enabled).
    pub b0: DMatrix<f64>,
    pub tau2: Vec<f64>,
}

impl Params {
    /// Independent draw from the prior.
    pub fn draw_prior<R: Rng + ?Sized>(model: &Model, rng: &mut R) -> Result<Self> {
        let pr = &model.prior;
        let t = model.truncation;
        let alpha_draw = |rng: &mut R| dist::gamma(rng, pr.alpha_shape, pr.alpha_rate);
        let alpha = alpha_draw(rng);
        let alpha_za = alpha_draw(rng);
        let alpha_xa = alpha_draw(rng);
        let alpha_b = if model.has_remainder() { alpha_draw(rng) } else { 0.0 };
        let prior_sticks = |rng: &mut R, k: usize, a: f64| {
            Sticks::from_open((0..k - 1).map(|_| clamp_stick(dist::beta(rng, 1.0, a))).collect())
        };
        let top = prior_sticks(rng, t.n, alpha);
        let za = (0..t.n).map(|_| prior_sticks(rng, t.n_za, alpha_za)).collect();
        let xa = (0..t.n).map(|_| prior_sticks(rng, t.n_xa, alpha_xa)).collect();
        let b = if model.has_remainder() {
            (0..t.n).map(|_| prior_sticks(rng, t.n_b, alpha_b)).collect()
        } else {
            Vec::new()
        };
        let weights = MixtureWeights { top, za, xa, b, alpha, alpha_za, alpha_xa, alpha_b };
        let mut params = Self {
            weights,
            beta: Vec::with_capacity(t.n_za),
            sigma: Vec::with_capacity(t.n_za),
            psi: Vec::new(),
            phi: Vec::new(),
            b0: pr.b0.clone(),
            tau2: pr.tau2.clone(),
        };
        for _ in 0..t.n_za {
            let beta = params.draw_beta_prior(rng);
            params.beta.push(beta);
            params.sigma.push(dist::inverse_wishart(rng, pr.nu, &pr.s)?);
        }
        params.psi = pr.psi_conc.iter().map(|a| (0..t.n_xa).map(|_| dist::dirichlet(rng, a)).collect()).collect();
        params.phi = pr.phi_conc.iter().map(|a| (0..t.n_b).map(|_| dist::dirichlet(rng, a)).collect()).collect();
        Ok(params)
    }

    /// β ~ MN(B_0, I_d, diag(τ²)) under the current B_0 and τ².
    pub(crate) fn draw_beta_prior<R: Rng + ?Sized>(&self, rng: &mut R) -> DMatrix<f64> {
        let (d, p) = self.b0.shape();
        DMatrix::from_fn(d, p, |a, j| {
            self.b0[(a, j)] + self.tau2[j].sqrt() * rng.sample::<f64, _>(rand_distr::StandardNormal)
        })
    }

    /// Factorizations of every Σ_r.
    pub fn kernels(&self) -> Result<Vec<GaussianKernel>> {
        self.sigma.iter().map(GaussianKernel::new).collect()
    }

    /// Mean D(x) β_r written into `out` (length p_Ac).
    pub fn mean_into(&self, r: usize, design: &[f64], out: &mut [f64]) {
        let beta = &self.beta[r];
        for (j, o) in out.iter_mut().enumerate() {
            let col = beta.column(j);
            *o = design.iter().zip(col.iter()).map(|(x, b)| x * b).sum();
        }
    }

    pub fn mean(&self, r: usize, design: &[f64]) -> DVector<f64> {
        let mut out = DVector::zeros(self.beta[r].ncols());
        self.mean_into(r, design, out.as_mut_slice());
        out
    }
}

pub(crate) fn clamp_stick(v: f64) -> f64 {
    v.min(1.0 - 1e-12)
}

/// Latent variables and parameters of one chain.
#[derive(Clone, Debug)]
pub struct SamplerState {
    pub params: Params,
    /// Latent Z, n × p_Ac row-major.
    pub z: Vec<f64>,
    /// Allocations, 0-based.
    pub h: Vec<usize>,
    pub h_za: Vec<usize>,
    pub h_xa: Vec<usize>,
    /// All zero when the model has no remainder block.
    pub h_b: Vec<usize>,
    /// Completed codes (observed plus current imputations), n × p row-major.
    pub values: Vec<u16>,
    /// Cached design rows, n × d.
    pub design: Vec<f64>,
    p_ac: usize,
    p: usize,
    d: usize,
}

impl SamplerState {
    pub fn n(&self) -> usize {
        self.h.len()
    }

    pub fn z_row(&self, i: usize) -> &[f64] {
        &self.z[i * self.p_ac..(i + 1) * self.p_ac]
    }

    pub fn values_row(&self, i: usize) -> &[u16] {
        &self.values[i * self.p..(i + 1) * self.p]
    }

    pub fn design_row(&self, i: usize) -> &[f64] {
        &self.design[i * self.d..(i + 1) * self.d]
    }

    pub(crate) fn refresh_design_row(&mut self, model: &Model, i: usize) {
        let (p, d) = (self.p, self.d);
        model.design.fill(&self.values[i * p..(i + 1) * p], &mut self.design[i * d..(i + 1) * d]);
    }

    pub(crate) fn refresh_design(&mut self, model: &Model) {
        for i in 0..self.n() {
            self.refresh_design_row(model, i);
        }
    }

    /// The current completed dataset.
    pub fn completed(&self, data: &Dataset) -> Result<CompletedDataset> {
        data.complete_with(&self.values)
    }

    /// Assemble a state from parts; used by the generative simulator.
    pub(crate) fn from_parts(
        model: &Model,
        params: Params,
        z: Vec<f64>,
        alloc: [Vec<usize>; 4],
        values: Vec<u16>,
    ) -> Self {
        let [h, h_za, h_xa, h_b] = alloc;
        let n = h.len();
        let mut state = Self {
            params,
            z,
            h,
            h_za,
            h_xa,
            h_b,
            values,
            design: vec![0.0; n * model.d()],
            p_ac: model.p_ac(),
            p: model.p(),
            d: model.d(),
        };
        state.refresh_design(model);
        state
    }

    /// Check every structural invariant against `data`.
    pub fn check_invariants(&self, data: &Dataset, model: &Model) -> Result<()> {
        let fail = |m: String| Err(Error::Numerical(m));
        let w = &self.params.weights;
        let n = data.n();
        if self.h.len() != n || self.z.len() != n * model.p_ac() || self.values.len() != n * model.p() {
            return fail("state dimensions do not match the data".into());
        }
        let simplex = |pi: &[f64]| (pi.iter().sum::<f64>() - 1.0).abs() <= 1e-12 && pi.iter().all(|&x| x >= 0.0);
        if !simplex(w.top.pi()) || *w.top.v().last().unwrap() != 1.0 {
            return fail("top-level weights are not a simplex".into());
        }
        for s in w.za.iter().chain(&w.xa).chain(&w.b) {
            if !simplex(s.pi()) || *s.v().last().unwrap() != 1.0 {
                return fail("conditional weights are not a simplex".into());
            }
        }
        let t = model.truncation;
        for i in 0..n {
            if self.h[i] >= t.n || self.h_za[i] >= t.n_za || self.h_xa[i] >= t.n_xa || self.h_b[i] >= t.n_b {
                return fail(format!("allocation out of range for row {i}"));
            }
            for j in 0..model.p_ac() {
                let z = self.z[i * model.p_ac() + j];
                if let Some(y) = data.get(i, j) {
                    let (lo, hi) = model.interval(j, y);
                    if !(z > lo && z <= hi) {
                        return fail(format!("Z[{i},{j}] = {z} outside ({lo}, {hi}] for observed level {y}"));
                    }
                }
            }
            for j in 0..model.p() {
                let v = self.values[i * model.p() + j];
                if v < 1 || v as usize > model.levels(j) {
                    return fail(format!("code {v} out of range at ({i}, {j})"));
                }
                if let Some(obs) = data.get(i, j) {
                    if obs != v {
                        return fail(format!("observed cell ({i}, {j}) overwritten"));
                    }
                }
            }
        }
        for (r, s) in self.params.sigma.iter().enumerate() {
            if (s - s.transpose()).abs().max() > 1e-9 * s.abs().max().max(1.0) || s.clone().cholesky().is_none() {
                return fail(format!("Σ_{r} is not symmetric positive definite"));
            }
        }
        Ok(())
    }
}

/// Fresh chain state: prior parameter draws, uniform allocations, uniform
/// fills for masked nominal cells, and Z drawn inside each observed interval.
/// Masked ordinal cells take the level implied by their initial Z.
pub fn init_state<R: Rng + ?Sized>(model: &Model, data: &Dataset, rng: &mut R) -> Result<SamplerState> {
    if data.schemas() != model.schemas.as_slice() {
        return Err(Error::InvalidArgument("dataset schema does not match the model".into()));
    }
    let params = Params::draw_prior(model, rng)?;
    let n = data.n();
    let t = model.truncation;
    let h = (0..n).map(|_| rng.random_range(0..t.n)).collect();
    let h_za: Vec<usize> = (0..n).map(|_| rng.random_range(0..t.n_za)).collect();
    let h_xa = (0..n).map(|_| rng.random_range(0..t.n_xa)).collect();
    let h_b = (0..n).map(|_| rng.random_range(0..t.n_b)).collect();
    let mut values = data.values().to_vec();
    for i in 0..n {
        for j in model.p_ac()..model.p() {
            if data.is_missing(i, j) {
                values[i * model.p() + j] = rng.random_range(1..=model.levels(j) as u16);
            }
        }
    }
    let p_ac = model.p_ac();
    let mut state = SamplerState::from_parts(model, params, vec![0.0; n * p_ac], [h, h_za, h_xa, h_b], values);
    let mut mu = vec![0.0; p_ac];
    for i in 0..n {
        let r = state.h_za[i];
        state.params.mean_into(r, state.design_row(i), &mut mu);
        for j in 0..p_ac {
            let sd = state.params.sigma[r][(j, j)].sqrt();
            let (lo, hi) = match data.get(i, j) {
                Some(y) => model.interval(j, y),
                None => (f64::NEG_INFINITY, f64::INFINITY),
            };
            let z = dist::truncated_normal(rng, mu[j], sd, lo, hi);
            state.z[i * p_ac + j] = z;
            if data.is_missing(i, j) {
                state.values[i * model.p() + j] = model.level_of(j, z);
            }
        }
    }
    Ok(state)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{canonical_schema, VarGroup, VarKind, VariableSchema};
    use crate::model::ModelConfig;
    use crate::rng::substream;

    fn setup() -> (Model, Dataset) {
        let schemas = canonical_schema(&[
            VariableSchema::new("y1", VarKind::Ordinal, 4, VarGroup::Focus),
            VariableSchema::new("y2", VarKind::Ordinal, 3, VarGroup::Focus),
            VariableSchema::new("x", VarKind::Nominal, 3, VarGroup::Focus),
            VariableSchema::new("b", VarKind::Nominal, 2, VarGroup::Remainder),
        ])
        .unwrap();
        let rows = vec![
            vec![Some(1), Some(2), Some(3), Some(1)],
            vec![None, Some(3), None, Some(2)],
            vec![Some(4), None, Some(1), None],
        ];
        let data = Dataset::from_rows(schemas.clone(), &rows).unwrap();
        (Model::new(&ModelConfig::default(), &schemas).unwrap(), data)
    }

    #[test]
    fn init_is_deterministic_and_valid() {
        let (model, data) = setup();
        let a = init_state(&model, &data, &mut substream(11, &[])).unwrap();
        let b = init_state(&model, &data, &mut substream(11, &[])).unwrap();
        assert_eq!(a.z, b.z);
        assert_eq!(a.values, b.values);
        assert_eq!(a.params, b.params);
        a.check_invariants(&data, &model).unwrap();
        // observed y1 = 1 with L = 4 forces Z <= -1
        assert!(a.z_row(0)[0] <= -1.0);
        assert!(a.z_row(2)[0] > 1.0);
    }

    #[test]
    fn schema_mismatch_is_rejected() {
        let (model, data) = setup();
        let other = Dataset::from_rows(
            canonical_schema(&[VariableSchema::new("y1", VarKind::Ordinal, 4, VarGroup::Focus)]).unwrap(),
            &[vec![Some(1)]],
        )
        .unwrap();
        assert!(init_state(&model, &other, &mut substream(1, &[])).is_err());
        let _ = data;
    }
}
