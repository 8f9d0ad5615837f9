//! Full-conditional updates. Each leaves the joint posterior invariant.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::data::Dataset;
use crate::dist::{self, GaussianKernel};
use crate::error::{Error, Result};
use crate::model::state::clamp_stick;
use crate::model::{Model, SamplerState, Sticks};

/// Z_ij | Z_i,−j, one coordinate at a time, truncated to the observed level's interval.
pub fn update_latent_z<R: Rng + ?Sized>(
    model: &Model,
    data: &Dataset,
    state: &mut SamplerState,
    kernels: &[GaussianKernel],
    rng: &mut R,
) {
    let p_ac = model.p_ac();
    let mut mu = vec![0.0; p_ac];
    for i in 0..state.n() {
        let r = state.h_za[i];
        state.params.mean_into(r, state.design_row(i), &mut mu);
        let omega = kernels[r].precision();
        for j in 0..p_ac {
            let z = &state.z[i * p_ac..(i + 1) * p_ac];
            let wjj = omega[(j, j)];
            let shift: f64 = (0..p_ac).filter(|&k| k != j).map(|k| omega[(j, k)] * (z[k] - mu[k])).sum();
            let mean = mu[j] - shift / wjj;
            let sd = wjj.recip().sqrt();
            let (lo, hi) = match data.get(i, j) {
                Some(y) => model.interval(j, y),
                None => (f64::NEG_INFINITY, f64::INFINITY),
            };
            state.z[i * p_ac + j] = dist::truncated_normal(rng, mean, sd, lo, hi);
        }
    }
}

/// log of π^(ZA)_{r h} N(z; D(x) β_r, Σ_r) for every r.
pub(crate) fn za_log_weights(state: &SamplerState, kernels: &[GaussianKernel], i: usize, out: &mut [f64]) {
    let h = state.h[i];
    let ln_pi = state.params.weights.za[h].ln_pi();
    let mut mu = [0.0f64; 16];
    let mut heap;
    let p_ac = state.z_row(i).len();
    let mu: &mut [f64] = if p_ac <= 16 {
        &mut mu[..p_ac]
    } else {
        heap = vec![0.0; p_ac];
        &mut heap
    };
    for (r, o) in out.iter_mut().enumerate() {
        state.params.mean_into(r, state.design_row(i), mu);
        *o = ln_pi[r] + kernels[r].log_density(state.z_row(i), mu);
    }
}

/// Σ_j ln ψ^(j)_{l, x_ij} for each l.
fn xa_log_lik(model: &Model, state: &SamplerState, i: usize, l: usize) -> f64 {
    let row = state.values_row(i);
    model.view.nominal_focus.clone().zip(&state.params.psi).map(|(j, psi)| psi[l][row[j] as usize - 1].ln()).sum()
}

fn b_log_lik(model: &Model, state: &SamplerState, i: usize, s: usize) -> f64 {
    let row = state.values_row(i);
    model.view.remainder.clone().zip(&state.params.phi).map(|(j, phi)| phi[s][row[j] as usize - 1].ln()).sum()
}

/// H, then H_ZA, H_XA and H_B, each from its categorical full conditional.
pub fn update_allocations<R: Rng + ?Sized>(
    model: &Model,
    state: &mut SamplerState,
    kernels: &[GaussianKernel],
    rng: &mut R,
) {
    let t = model.truncation;
    let mut buf = vec![0.0; t.n.max(t.n_za).max(t.n_xa).max(t.n_b)];
    for i in 0..state.n() {
        let w = &state.params.weights;
        let (r, l, s) = (state.h_za[i], state.h_xa[i], state.h_b[i]);
        let lw = &mut buf[..t.n];
        for (h, o) in lw.iter_mut().enumerate() {
            *o = w.top.ln_pi()[h] + w.za[h].ln_pi()[r] + w.xa[h].ln_pi()[l] + w.ln_pi_b(s, h);
        }
        state.h[i] = dist::categorical_log(rng, lw);

        let lw = &mut buf[..t.n_za];
        za_log_weights(state, kernels, i, lw);
        state.h_za[i] = dist::categorical_log(rng, lw);

        let h = state.h[i];
        let lw = &mut buf[..t.n_xa];
        for (l, o) in lw.iter_mut().enumerate() {
            *o = state.params.weights.xa[h].ln_pi()[l] + xa_log_lik(model, state, i, l);
        }
        state.h_xa[i] = dist::categorical_log(rng, lw);

        if model.has_remainder() {
            let lw = &mut buf[..t.n_b];
            for (s, o) in lw.iter_mut().enumerate() {
                *o = state.params.weights.b[h].ln_pi()[s] + b_log_lik(model, state, i, s);
            }
            state.h_b[i] = dist::categorical_log(rng, lw);
        }
    }
}

/// β_r, Σ_r, ψ and φ from their conjugate full conditionals; empty components draw from the base.
pub fn update_component_params<R: Rng + ?Sized>(
    model: &Model,
    state: &mut SamplerState,
    kernels: &[GaussianKernel],
    rng: &mut R,
) -> Result<()> {
    let (d, p_ac, n) = (model.d(), model.p_ac(), state.n());
    let n_za = model.truncation.n_za;
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); n_za];
    for i in 0..n {
        members[state.h_za[i]].push(i);
    }
    for r in 0..n_za {
        if members[r].is_empty() {
            state.params.beta[r] = state.params.draw_beta_prior(rng);
            state.params.sigma[r] = dist::inverse_wishart(rng, model.prior.nu, &model.prior.s)?;
            continue;
        }
        let mut dtd = DMatrix::<f64>::zeros(d, d);
        let mut dtz = DMatrix::<f64>::zeros(d, p_ac);
        for &i in &members[r] {
            let x = state.design_row(i);
            let z = state.z_row(i);
            for a in 0..d {
                if x[a] == 0.0 {
                    continue;
                }
                for b in a..d {
                    dtd[(a, b)] += x[a] * x[b];
                }
                for k in 0..p_ac {
                    dtz[(a, k)] += x[a] * z[k];
                }
            }
        }
        for a in 0..d {
            for b in 0..a {
                dtd[(a, b)] = dtd[(b, a)];
            }
        }
        let omega = kernels[r].precision();
        let tau2 = &state.params.tau2;
        let b0 = &state.params.b0;
        let dim = d * p_ac;
        let mut prec = DMatrix::<f64>::zeros(dim, dim);
        let mut rhs = DVector::<f64>::zeros(dim);
        let dtz_omega = &dtz * omega;
        for j in 0..p_ac {
            for a in 0..d {
                let row = j * d + a;
                rhs[row] = dtz_omega[(a, j)] + b0[(a, j)] / tau2[j];
                for k in 0..p_ac {
                    let w = omega[(j, k)];
                    for b in 0..d {
                        prec[(row, k * d + b)] = w * dtd[(a, b)];
                    }
                }
                prec[(row, row)] += 1.0 / tau2[j];
            }
        }
        let chol = prec
            .cholesky()
            .ok_or_else(|| Error::Numerical(format!("posterior precision of β_{r} is not positive definite")))?;
        let mean = chol.solve(&rhs);
        let eps = DVector::from_fn(dim, |_, _| rng.sample::<f64, _>(StandardNormal));
        let noise = chol
            .l()
            .transpose()
            .solve_upper_triangular(&eps)
            .ok_or_else(|| Error::Numerical("singular Cholesky factor".into()))?;
        let draw = mean + noise;
        state.params.beta[r] = DMatrix::from_column_slice(d, p_ac, draw.as_slice());

        let mut scatter = model.prior.s.clone();
        let mut mu = vec![0.0; p_ac];
        let mut e = vec![0.0; p_ac];
        for &i in &members[r] {
            state.params.mean_into(r, state.design_row(i), &mut mu);
            for k in 0..p_ac {
                e[k] = state.z_row(i)[k] - mu[k];
            }
            for a in 0..p_ac {
                for b in 0..p_ac {
                    scatter[(a, b)] += e[a] * e[b];
                }
            }
        }
        state.params.sigma[r] = dist::inverse_wishart(rng, model.prior.nu + members[r].len() as f64, &scatter)?;
    }

    let n_xa = model.truncation.n_xa;
    for (v, j) in model.view.nominal_focus.clone().enumerate() {
        let lj = model.levels(j);
        let mut counts = vec![0usize; n_xa * lj];
        for i in 0..n {
            counts[state.h_xa[i] * lj + state.values[i * model.p() + j] as usize - 1] += 1;
        }
        for l in 0..n_xa {
            let conc: Vec<f64> = (0..lj).map(|k| model.prior.psi_conc[v][k] + counts[l * lj + k] as f64).collect();
            state.params.psi[v][l] = dist::dirichlet(rng, &conc);
        }
    }
    let n_b = model.truncation.n_b;
    for (v, j) in model.view.remainder.clone().enumerate() {
        let lj = model.levels(j);
        let mut counts = vec![0usize; n_b * lj];
        for i in 0..n {
            counts[state.h_b[i] * lj + state.values[i * model.p() + j] as usize - 1] += 1;
        }
        for s in 0..n_b {
            let conc: Vec<f64> = (0..lj).map(|k| model.prior.phi_conc[v][k] + counts[s * lj + k] as f64).collect();
            state.params.phi[v][s] = dist::dirichlet(rng, &conc);
        }
    }
    Ok(())
}

/// Sticks given counts, V_k ~ beta(1 + n_k, α + Σ_{k'>k} n_k'); returns Σ log(1 − V_k) over open sticks.
pub(crate) fn draw_sticks<R: Rng + ?Sized>(rng: &mut R, counts: &[usize], alpha: f64) -> (Sticks, f64) {
    let k = counts.len();
    let mut tail: usize = counts.iter().sum();
    let mut open = Vec::with_capacity(k - 1);
    let mut log_rest = 0.0;
    for &c in &counts[..k - 1] {
        tail -= c;
        let v = clamp_stick(dist::beta(rng, 1.0 + c as f64, alpha + tail as f64));
        log_rest += (-v).ln_1p();
        open.push(v);
    }
    (Sticks::from_open(open), log_rest)
}

/// Sticks for every family followed by the four concentration parameters.
pub fn update_weights<R: Rng + ?Sized>(model: &Model, state: &mut SamplerState, rng: &mut R) {
    let t = model.truncation;
    let (a, b) = (model.prior.alpha_shape, model.prior.alpha_rate);
    let n = state.n();
    let mut top = vec![0usize; t.n];
    let mut za = vec![vec![0usize; t.n_za]; t.n];
    let mut xa = vec![vec![0usize; t.n_xa]; t.n];
    let mut bb = vec![vec![0usize; t.n_b]; t.n];
    for i in 0..n {
        let h = state.h[i];
        top[h] += 1;
        za[h][state.h_za[i]] += 1;
        xa[h][state.h_xa[i]] += 1;
        bb[h][state.h_b[i]] += 1;
    }
    let w = &mut state.params.weights;
    let (sticks, rest) = draw_sticks(rng, &top, w.alpha);
    w.top = sticks;
    w.alpha = dist::gamma(rng, a + (t.n - 1) as f64, b - rest);

    let family = |counts: &[Vec<usize>], alpha: f64, k: usize, rng: &mut R| -> (Vec<Sticks>, f64) {
        let mut rest = 0.0;
        let sticks = counts
            .iter()
            .map(|c| {
                let (s, lr) = draw_sticks(rng, c, alpha);
                rest += lr;
                s
            })
            .collect();
        let shape = a + (t.n * (k - 1)) as f64;
        (sticks, dist::gamma(rng, shape, b - rest))
    };
    let (s, al) = family(&za, w.alpha_za, t.n_za, rng);
    w.za = s;
    w.alpha_za = al;
    let (s, al) = family(&xa, w.alpha_xa, t.n_xa, rng);
    w.xa = s;
    w.alpha_xa = al;
    if model.has_remainder() {
        let (s, al) = family(&bb, w.alpha_b, t.n_b, rng);
        w.b = s;
        w.alpha_b = al;
    }
}

/// Missing ordinals from Z; missing nominals column by column from their full conditionals.
pub fn impute_missing<R: Rng + ?Sized>(
    model: &Model,
    data: &Dataset,
    state: &mut SamplerState,
    kernels: &[GaussianKernel],
    rng: &mut R,
) {
    let (p, p_ac) = (model.p(), model.p_ac());
    for j in 0..p_ac {
        for i in 0..state.n() {
            if data.is_missing(i, j) {
                state.values[i * p + j] = model.level_of(j, state.z[i * p_ac + j]);
            }
        }
    }
    let nf = model.view.nominal_focus.clone();
    let mut lw = Vec::new();
    let mut mu = vec![0.0; p_ac];
    for j in p_ac..p {
        let lj = model.levels(j);
        let in_design = model.design.uses(j);
        for i in 0..state.n() {
            if !data.is_missing(i, j) {
                continue;
            }
            let kernel_probs: &[f64] = if nf.contains(&j) {
                &state.params.psi[j - nf.start][state.h_xa[i]]
            } else {
                &state.params.phi[j - model.view.remainder.start][state.h_b[i]]
            };
            lw.clear();
            lw.extend(kernel_probs.iter().map(|q| q.ln()));
            if in_design {
                let r = state.h_za[i];
                for v in 0..lj {
                    state.values[i * p + j] = v as u16 + 1;
                    state.refresh_design_row(model, i);
                    state.params.mean_into(r, state.design_row(i), &mut mu);
                    lw[v] += kernels[r].log_density(state.z_row(i), &mu);
                }
            }
            state.values[i * p + j] = dist::categorical_log(rng, &mut lw) as u16 + 1;
            if in_design {
                state.refresh_design_row(model, i);
            }
        }
    }
}

/// Conjugate updates of B_0 and τ² given all β_r.
pub fn update_hyperparameters<R: Rng + ?Sized>(model: &Model, state: &mut SamplerState, rng: &mut R) {
    let hp = model.prior.hyper;
    let (d, p_ac) = (model.d(), model.p_ac());
    let k = state.params.beta.len() as f64;
    for j in 0..p_ac {
        let tau2 = state.params.tau2[j];
        for a in 0..d {
            let sum: f64 = state.params.beta.iter().map(|b| b[(a, j)]).sum();
            let prec = 1.0 / hp.b0_var + k / tau2;
            let mean = (sum / tau2) / prec;
            state.params.b0[(a, j)] = mean + prec.recip().sqrt() * rng.sample::<f64, _>(StandardNormal);
        }
        let ss: f64 = state
            .params
            .beta
            .iter()
            .map(|b| (0..d).map(|a| (b[(a, j)] - state.params.b0[(a, j)]).powi(2)).sum::<f64>())
            .sum();
        let shape = hp.tau2_shape + 0.5 * k * d as f64;
        let rate = hp.tau2_rate + 0.5 * ss;
        state.params.tau2[j] = 1.0 / dist::gamma(rng, shape, rate);
    }
}
