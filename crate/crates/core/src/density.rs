//! Closed-form and Monte Carlo evaluation of the model's joint and
//! conditional distributions at fixed parameters.

use std::collections::BTreeMap;
use std::io::Write;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::cells::{CellSpec, Term};
use crate::data::CompletedDataset;
use crate::dist;
use crate::error::{Error, Result};
use crate::model::{Model, Params};

/// Upper bound on enumerated covariate configurations.
const MAX_CONFIGS: usize = 20_000_000;

/// Probabilities of full category tuples over a fixed column list.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct CellTable {
    columns: Vec<String>,
    cells: BTreeMap<Vec<u16>, f64>,
}

impl CellTable {
    pub fn new(columns: Vec<String>) -> Self {
        Self { columns, cells: BTreeMap::new() }
    }

    pub fn columns(&self) -> &[String] {
        &self.columns
    }

    /// Add `p` to the cell `key`.
    pub fn add(&mut self, key: Vec<u16>, p: f64) {
        debug_assert_eq!(key.len(), self.columns.len());
        *self.cells.entry(key).or_insert(0.0) += p;
    }

    pub fn get(&self, key: &[u16]) -> f64 {
        self.cells.get(key).copied().unwrap_or(0.0)
    }

    pub fn total(&self) -> f64 {
        self.cells.values().sum()
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Vec<u16>, f64)> {
        self.cells.iter().map(|(k, &v)| (k, v))
    }

    /// Sum out every column not in `keep` (positions into this table's columns).
    pub fn marginalize(&self, keep: &[usize]) -> CellTable {
        let mut out = CellTable::new(keep.iter().map(|&k| self.columns[k].clone()).collect());
        for (key, p) in self.iter() {
            out.add(keep.iter().map(|&k| key[k]).collect(), p);
        }
        out
    }

    /// Cells with probability at least `threshold`.
    pub fn restrict(&self, threshold: f64) -> CellTable {
        CellTable {
            columns: self.columns.clone(),
            cells: self.cells.iter().filter(|(_, &p)| p >= threshold).map(|(k, &p)| (k.clone(), p)).collect(),
        }
    }

    /// CSV with one column per variable followed by `probability`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header: Vec<&str> = self.columns.iter().map(String::as_str).collect();
        header.push("probability");
        w.write_record(&header)?;
        for (key, p) in self.iter() {
            let mut rec: Vec<String> = key.iter().map(u16::to_string).collect();
            rec.push(format!("{p:.17e}"));
            w.write_record(&rec)?;
        }
        w.flush().map_err(|e| Error::io("<cell table>", e))?;
        Ok(())
    }
}

/// Relative frequencies of the tuples observed on `cols`.
pub fn empirical_table(data: &CompletedDataset, cols: &[usize]) -> CellTable {
    let mut t = CellTable::new(cols.iter().map(|&c| data.schemas()[c].name.clone()).collect());
    let w = 1.0 / data.n() as f64;
    for i in 0..data.n() {
        let row = data.row(i);
        t.add(cols.iter().map(|&c| row[c]).collect(), w);
    }
    t
}

/// sqrt(1 − BC) over truth cells with p ≥ threshold, both sides renormalized
/// on that set. With threshold 0 the set also includes cells present only in `q`.
pub fn hellinger(p: &CellTable, q: &CellTable, threshold: f64) -> Result<f64> {
    if !(threshold >= 0.0) {
        return Err(Error::InvalidArgument("threshold must be non-negative".into()));
    }
    let mut keys: Vec<&Vec<u16>> = p.cells.iter().filter(|(_, &v)| v >= threshold).map(|(k, _)| k).collect();
    if threshold == 0.0 {
        keys.extend(q.cells.keys().filter(|k| !p.cells.contains_key(*k)));
    }
    let pm: f64 = keys.iter().map(|k| p.get(k)).sum();
    let qm: f64 = keys.iter().map(|k| q.get(k)).sum();
    if keys.is_empty() || !(pm > 0.0) {
        return Err(Error::InvalidArgument("no truth cells at or above the threshold".into()));
    }
    if !(qm > 0.0) {
        return Ok(1.0);
    }
    let bc: f64 = keys.iter().map(|k| (p.get(k) / pm * q.get(k) / qm).sqrt()).sum();
    Ok((1.0 - bc).max(0.0).sqrt())
}

/// Full row (length p) with the given nominal codes and 1 in the ordinal slots.
fn full_row(model: &Model, x_a: &[u16], x_b: &[u16]) -> Result<Vec<u16>> {
    let v = &model.view;
    if x_a.len() != v.nominal_focus.len() || x_b.len() != v.remainder.len() {
        return Err(Error::InvalidArgument("covariate code vectors do not match the model".into()));
    }
    let mut row = vec![1u16; model.p()];
    row[v.nominal_focus.clone()].copy_from_slice(x_a);
    row[v.remainder.clone()].copy_from_slice(x_b);
    for j in model.p_ac()..model.p() {
        if row[j] < 1 || row[j] as usize > model.levels(j) {
            return Err(Error::InvalidArgument(format!(
                "code {} out of range for `{}`",
                row[j], model.schemas[j].name
            )));
        }
    }
    Ok(row)
}

/// Per-h nominal factors Σ_l π^XA_lh Π ψ and Σ_s π^B_sh Π φ over the columns `known`.
fn nominal_factors(model: &Model, params: &Params, row: &[u16], known: &[bool]) -> (Vec<f64>, Vec<f64>) {
    let w = &params.weights;
    let nf = model.view.nominal_focus.clone();
    let rem = model.view.remainder.clone();
    let psi_l: Vec<f64> = (0..w.n_xa())
        .map(|l| {
            nf.clone()
                .enumerate()
                .filter(|&(_, j)| known[j])
                .map(|(v, j)| params.psi[v][l][row[j] as usize - 1])
                .product()
        })
        .collect();
    let phi_s: Vec<f64> = (0..w.n_b())
        .map(|s| {
            rem.clone()
                .enumerate()
                .filter(|&(_, j)| known[j])
                .map(|(v, j)| params.phi[v][s][row[j] as usize - 1])
                .product()
        })
        .collect();
    let a = (0..w.n()).map(|h| w.xa[h].pi().iter().zip(&psi_l).map(|(p, q)| p * q).sum()).collect();
    let b = (0..w.n()).map(|h| (0..w.n_b()).map(|s| w.pi_b(s, h) * phi_s[s]).sum()).collect();
    (a, b)
}

/// Eq-19 style raw weights Σ_h π_h π^ZA_rh A_h B_h.
fn raw_weights(params: &Params, a: &[f64], b: &[f64]) -> Vec<f64> {
    let w = &params.weights;
    let mut raw = vec![0.0; w.n_za()];
    for h in 0..w.n() {
        let c = w.top.pi()[h] * a[h] * b[h];
        for (r, x) in raw.iter_mut().enumerate() {
            *x += c * w.za[h].pi()[r];
        }
    }
    raw
}

/// Σ_h Σ_l Σ_s π_h π^XA_lh π^B_sh Π ψ Π φ.
pub fn nominal_joint_pmf(model: &Model, params: &Params, x_a: &[u16], x_b: &[u16]) -> Result<f64> {
    let row = full_row(model, x_a, x_b)?;
    let known = vec![true; model.p()];
    let (a, b) = nominal_factors(model, params, &row, &known);
    Ok(params.weights.top.pi().iter().zip(a.iter().zip(&b)).map(|(p, (x, y))| p * x * y).sum())
}

/// Z | X = x as a mixture of normal regressions.
#[derive(Clone, Debug)]
pub struct ZMixture {
    /// Unnormalized weights; their sum is P(X = x).
    pub raw: Vec<f64>,
    /// Normalized weights w_r(x).
    pub weights: Vec<f64>,
    /// D(x) β_r.
    pub means: Vec<DVector<f64>>,
}

pub fn conditional_z_mixture(model: &Model, params: &Params, x_a: &[u16], x_b: &[u16]) -> Result<ZMixture> {
    let row = full_row(model, x_a, x_b)?;
    let (a, b) = nominal_factors(model, params, &row, &vec![true; model.p()]);
    let raw = raw_weights(params, &a, &b);
    let total: f64 = raw.iter().sum();
    let weights = raw.iter().map(|x| x / total).collect();
    let design = model.design.vector(&row);
    let means = (0..raw.len()).map(|r| params.mean(r, &design)).collect();
    Ok(ZMixture { raw, weights, means })
}

/// Probability with Monte Carlo standard error (0 when exact).
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Estimate {
    pub estimate: f64,
    pub std_error: f64,
}

fn is_diagonal(m: &DMatrix<f64>) -> bool {
    (0..m.nrows()).all(|i| (0..m.ncols()).all(|j| i == j || m[(i, j)] == 0.0))
}

/// P(lo < Z ≤ hi) for Z ~ N(mean, sigma), exact for one dimension or diagonal
/// sigma, otherwise antithetic Monte Carlo with `mc_draws` draws.
pub fn rectangle_probability<R: Rng + ?Sized>(
    mean: &[f64],
    sigma: &DMatrix<f64>,
    lo: &[f64],
    hi: &[f64],
    mc_draws: usize,
    rng: &mut R,
) -> Result<Estimate> {
    let k = mean.len();
    if k == 0 {
        return Ok(Estimate { estimate: 1.0, std_error: 0.0 });
    }
    if k == 1 || is_diagonal(sigma) {
        let p = (0..k).map(|j| dist::normal_interval_prob(mean[j], sigma[(j, j)].sqrt(), lo[j], hi[j])).product();
        return Ok(Estimate { estimate: p, std_error: 0.0 });
    }
    if mc_draws == 0 {
        return Err(Error::InvalidArgument("mc_draws must be at least 1".into()));
    }
    let l = dist::cholesky(sigma, "rectangle covariance")?;
    let pairs = mc_draws.div_ceil(2);
    let inside = |z: &DVector<f64>, sign: f64| {
        (0..k).all(|j| {
            let v = mean[j] + sign * z[j];
            v > lo[j] && v <= hi[j]
        })
    };
    let (mut s1, mut s2) = (0.0, 0.0);
    for _ in 0..pairs {
        let e = DVector::from_fn(k, |_, _| rng.sample::<f64, _>(StandardNormal));
        let z = &l * e;
        let v = 0.5 * (f64::from(u8::from(inside(&z, 1.0))) + f64::from(u8::from(inside(&z, -1.0))));
        s1 += v;
        s2 += v * v;
    }
    let n = pairs as f64;
    let mean_v = s1 / n;
    let var = if pairs > 1 { (s2 / n - mean_v * mean_v).max(0.0) * n / (n - 1.0) } else { 0.0 };
    Ok(Estimate { estimate: mean_v, std_error: (var / n).sqrt() })
}

/// P(Y^A = y, X^A = x_a, X^B = x_b).
pub fn joint_cell_probability<R: Rng + ?Sized>(
    model: &Model,
    params: &Params,
    y: &[u16],
    x_a: &[u16],
    x_b: &[u16],
    mc_draws: usize,
    rng: &mut R,
) -> Result<Estimate> {
    if y.len() != model.p_ac() {
        return Err(Error::InvalidArgument("ordinal code vector does not match the model".into()));
    }
    let mut terms: Vec<Term> = y.iter().enumerate().map(|(j, &v)| (j, v)).collect();
    let row = full_row(model, x_a, x_b)?;
    terms.extend((model.p_ac()..model.p()).map(|j| (j, row[j])));
    cell_probability(model, params, &terms, mc_draws, rng)
}

/// P(all `terms` hold), summing over every covariate configuration the design depends on.
pub fn cell_probability<R: Rng + ?Sized>(
    model: &Model,
    params: &Params,
    terms: &[Term],
    mc_draws: usize,
    rng: &mut R,
) -> Result<Estimate> {
    CellSpec::Joint(terms.to_vec()).validate(&model.schemas)?;
    let p_ac = model.p_ac();
    let mut row = vec![1u16; model.p()];
    let mut known = vec![false; model.p()];
    for &(c, v) in terms {
        row[c] = v;
        known[c] = true;
    }
    let free: Vec<usize> = (p_ac..model.p()).filter(|&j| !known[j] && model.design.uses(j)).collect();
    let configs = free.iter().try_fold(1usize, |acc, &j| acc.checked_mul(model.levels(j)));
    if configs.is_none_or(|c| c > MAX_CONFIGS) {
        return Err(Error::InvalidArgument("too many covariate configurations to enumerate".into()));
    }
    for &j in &free {
        known[j] = true;
    }
    let ord: Vec<Term> = terms.iter().copied().filter(|&(c, _)| c < p_ac).collect();
    let lo: Vec<f64> = ord.iter().map(|&(j, v)| model.interval(j, v).0).collect();
    let hi: Vec<f64> = ord.iter().map(|&(j, v)| model.interval(j, v).1).collect();
    let subs: Vec<DMatrix<f64>> =
        params.sigma.iter().map(|s| DMatrix::from_fn(ord.len(), ord.len(), |a, b| s[(ord[a].0, ord[b].0)])).collect();

    let (mut total, mut var) = (0.0, 0.0);
    let mut design = vec![0.0; model.d()];
    let mut mean = vec![0.0; p_ac];
    let mut sub_mean = vec![0.0; ord.len()];
    loop {
        let (a, b) = nominal_factors(model, params, &row, &known);
        let raw = raw_weights(params, &a, &b);
        model.design.fill(&row, &mut design);
        for (r, &wr) in raw.iter().enumerate() {
            if wr == 0.0 {
                continue;
            }
            params.mean_into(r, &design, &mut mean);
            for (k, &(j, _)) in ord.iter().enumerate() {
                sub_mean[k] = mean[j];
            }
            let e = rectangle_probability(&sub_mean, &subs[r], &lo, &hi, mc_draws, rng)?;
            total += wr * e.estimate;
            var += (wr * e.std_error).powi(2);
        }
        // odometer over the free covariates
        let mut k = 0;
        while k < free.len() {
            let j = free[k];
            if (row[j] as usize) < model.levels(j) {
                row[j] += 1;
                break;
            }
            row[j] = 1;
            k += 1;
        }
        if k == free.len() {
            break;
        }
    }
    Ok(Estimate { estimate: total, std_error: var.sqrt() })
}

/// P(spec) at fixed parameters; conditional cells as a ratio of joint probabilities.
pub fn spec_probability<R: Rng + ?Sized>(
    model: &Model,
    params: &Params,
    spec: &CellSpec,
    mc_draws: usize,
    rng: &mut R,
) -> Result<f64> {
    match spec {
        CellSpec::Joint(t) => Ok(cell_probability(model, params, t, mc_draws, rng)?.estimate),
        CellSpec::Conditional { target, given } => {
            let all: Vec<Term> = target.iter().chain(given).copied().collect();
            let num = cell_probability(model, params, &all, mc_draws, rng)?.estimate;
            let den = cell_probability(model, params, given, mc_draws, rng)?.estimate;
            Ok(if den > 0.0 { num / den } else { 0.0 })
        }
    }
}

/// Exact P(column `col` = v) for every level v.
pub fn marginal_probabilities(model: &Model, params: &Params, col: usize) -> Result<Vec<f64>> {
    let mut rng = crate::rng::substream(0, &[]);
    (1..=model.levels(col) as u16)
        .map(|v| Ok(cell_probability(model, params, &[(col, v)], 1, &mut rng)?.estimate))
        .collect()
}

/// Every full cell of the model's joint distribution (small configurations only).
pub fn joint_table<R: Rng + ?Sized>(model: &Model, params: &Params, mc_draws: usize, rng: &mut R) -> Result<CellTable> {
    let levels: Vec<usize> = model.schemas.iter().map(|s| s.levels).collect();
    let cells = levels.iter().try_fold(1usize, |acc, &l| acc.checked_mul(l));
    if cells.is_none_or(|c| c > 1_000_000) {
        return Err(Error::InvalidArgument("joint table too large to enumerate".into()));
    }
    let mut table = CellTable::new(model.schemas.iter().map(|s| s.name.clone()).collect());
    let mut key = vec![1u16; levels.len()];
    loop {
        let terms: Vec<Term> = key.iter().enumerate().map(|(j, &v)| (j, v)).collect();
        table.add(key.clone(), cell_probability(model, params, &terms, mc_draws, rng)?.estimate);
        let mut k = 0;
        while k < key.len() {
            if (key[k] as usize) < levels[k] {
                key[k] += 1;
                break;
            }
            key[k] = 1;
            k += 1;
        }
        if k == key.len() {
            break;
        }
    }
    Ok(table)
}
