use rand::Rng;

use crate::data::Dataset;
use crate::dist;
use crate::error::Result;
use crate::model::{Model, Params, SamplerState};

/// Latent draws and codes for `n` units from the generative model at `params`.
pub struct Simulated {
    pub values: Vec<u16>,
    pub z: Vec<f64>,
    pub allocations: [Vec<usize>; 4],
}

/// H → (H_ZA, H_XA, H_B) → X from ψ and φ → Z ~ N(D(X)β, Σ) → Y from cutoffs.
pub fn simulate_values<R: Rng + ?Sized>(model: &Model, params: &Params, n: usize, rng: &mut R) -> Result<Simulated> {
    let (p, p_ac) = (model.p(), model.p_ac());
    let kernels = params.kernels()?;
    let w = &params.weights;
    let mut values = vec![0u16; n * p];
    let mut z = vec![0.0; n * p_ac];
    let mut alloc: [Vec<usize>; 4] = std::array::from_fn(|_| Vec::with_capacity(n));
    let mut design = vec![0.0; model.d()];
    for i in 0..n {
        let h = dist::categorical(rng, w.top.pi());
        let r = dist::categorical(rng, w.za[h].pi());
        let l = dist::categorical(rng, w.xa[h].pi());
        let s = if model.has_remainder() { dist::categorical(rng, w.b[h].pi()) } else { 0 };
        let row = &mut values[i * p..(i + 1) * p];
        for (v, j) in model.view.nominal_focus.clone().enumerate() {
            row[j] = dist::categorical(rng, &params.psi[v][l]) as u16 + 1;
        }
        for (v, j) in model.view.remainder.clone().enumerate() {
            row[j] = dist::categorical(rng, &params.phi[v][s]) as u16 + 1;
        }
        model.design.fill(row, &mut design);
        let mean = params.mean(r, &design);
        let zi = dist::mvn(rng, &mean, kernels[r].chol());
        for j in 0..p_ac {
            z[i * p_ac + j] = zi[j];
            row[j] = model.level_of(j, zi[j]);
        }
        for (a, x) in alloc.iter_mut().zip([h, r, l, s]) {
            a.push(x);
        }
    }
    Ok(Simulated { values, z, allocations: alloc })
}

/// A complete dataset and the matching sampler state.
pub fn draw_from_model<R: Rng + ?Sized>(
    model: &Model,
    params: &Params,
    n: usize,
    rng: &mut R,
) -> Result<(Dataset, SamplerState)> {
    let sim = simulate_values(model, params, n, rng)?;
    let data = Dataset::from_parts(model.schemas.clone(), sim.values.clone(), vec![false; sim.values.len()])?;
    let state = SamplerState::from_parts(model, params.clone(), sim.z, sim.allocations, sim.values);
    Ok((data, state))
}
