//! Multiple imputation and Rubin's combining rules.

use std::io::Write;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::cells::CellSpec;
use crate::data::{CompletedDataset, Dataset};
use crate::dist;
use crate::error::{Error, Result};
use crate::gibbs::{run_chain, ChainOptions};
use crate::model::Model;

/// Pooled estimate over m completed datasets.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MIEstimate {
    pub q_bar: f64,
    /// Between-imputation variance.
    pub b: f64,
    /// Mean within-imputation variance.
    pub u_bar: f64,
    /// Total variance (1 + 1/m) b + ū.
    pub t: f64,
    /// Degrees of freedom; infinite when b = 0.
    pub nu: f64,
    pub m: usize,
    /// Set when b = 0: intervals use the normal reference.
    pub normal_reference: bool,
}

pub fn pool_estimates(q: &[f64], u: &[f64]) -> Result<MIEstimate> {
    let m = q.len();
    if m < 2 {
        return Err(Error::InvalidArgument("pooling needs at least two imputations".into()));
    }
    if u.len() != m {
        return Err(Error::InvalidArgument("estimate and variance lists differ in length".into()));
    }
    if u.iter().any(|&x| !(x >= 0.0)) || q.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidArgument("variances must be non-negative and estimates finite".into()));
    }
    let mf = m as f64;
    let q_bar = q.iter().sum::<f64>() / mf;
    // Identical estimates must give b = 0 exactly, not rounding noise around q̄.
    let b = if q.iter().all(|&x| x == q[0]) {
        0.0
    } else {
        q.iter().map(|x| (x - q_bar).powi(2)).sum::<f64>() / (mf - 1.0)
    };
    let u_bar = u.iter().sum::<f64>() / mf;
    let inflated = (1.0 + 1.0 / mf) * b;
    let t = inflated + u_bar;
    let (nu, normal_reference) =
        if b > 0.0 { ((mf - 1.0) * (1.0 + u_bar / inflated).powi(2), false) } else { (f64::INFINITY, true) };
    Ok(MIEstimate { q_bar, b, u_bar, t, nu, m, normal_reference })
}

/// q̄ ± t_{ν,(1+level)/2} √T, not clipped to [0, 1].
pub fn mi_interval(est: &MIEstimate, level: f64) -> Result<(f64, f64)> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::InvalidArgument(format!("interval level {level} outside (0, 1)")));
    }
    if est.t == 0.0 {
        return Ok((est.q_bar, est.q_bar));
    }
    let p = 0.5 * (1.0 + level);
    let quantile =
        if est.normal_reference || !est.nu.is_finite() { dist::normal_quantile(p) } else { t_quantile(est.nu, p)? };
    let half = quantile * est.t.sqrt();
    Ok((est.q_bar - half, est.q_bar + half))
}

/// Above this many degrees of freedom the t quantile comes from its expansion
/// around the normal quantile; the inverse beta iteration stalls for huge ν.
const T_EXPANSION_NU: f64 = 1e4;

/// Quantile of Student's t with `nu` degrees of freedom.
pub fn t_quantile(nu: f64, p: f64) -> Result<f64> {
    if !(nu > 0.0) || !(p > 0.0 && p < 1.0) {
        return Err(Error::InvalidArgument(format!("t quantile needs nu > 0 and p in (0, 1), got {nu}, {p}")));
    }
    if nu >= T_EXPANSION_NU {
        // Cornish–Fisher terms through ν⁻⁴; the next term is below 1e-16 here.
        let z = dist::normal_quantile(p);
        let z2 = z * z;
        let g1 = z * (z2 + 1.0) / 4.0;
        let g2 = z * ((5.0 * z2 + 16.0) * z2 + 3.0) / 96.0;
        let g3 = z * (((3.0 * z2 + 19.0) * z2 + 17.0) * z2 - 15.0) / 384.0;
        let g4 = z * ((((79.0 * z2 + 776.0) * z2 + 1482.0) * z2 - 1920.0) * z2 - 945.0) / 92160.0;
        return Ok(z + (g1 + (g2 + (g3 + g4 / nu) / nu) / nu) / nu);
    }
    Ok(StudentsT::new(0.0, 1.0, nu).map_err(|e| Error::Numerical(format!("t distribution: {e}")))?.inverse_cdf(p))
}

/// Per-cell pooled estimates with u = q(1 − q)/denominator.
pub fn cell_estimates(completed: &[CompletedDataset], cells: &[CellSpec]) -> Result<Vec<MIEstimate>> {
    let first = completed.first().ok_or_else(|| Error::InvalidArgument("no completed datasets".into()))?;
    if completed.iter().any(|d| d.n() != first.n() || d.schemas() != first.schemas()) {
        return Err(Error::InvalidArgument("completed datasets differ in size or schema".into()));
    }
    for c in cells {
        c.validate(first.schemas())?;
    }
    cells
        .iter()
        .map(|c| {
            let (q, u): (Vec<f64>, Vec<f64>) = completed
                .iter()
                .map(|d| {
                    let (q, den) = c.evaluate(d);
                    (q, if den == 0 { 0.0 } else { q * (1.0 - q) / den as f64 })
                })
                .unzip();
            pool_estimates(&q, &u)
        })
        .collect()
}

/// The chain's m completed datasets, in emission order.
pub fn generate_imputations(model: &Model, data: &Dataset, options: &ChainOptions) -> Result<Vec<CompletedDataset>> {
    Ok(run_chain(model, data, options)?.imputations)
}

/// CSV with columns cell, q_bar, t, nu, lower, upper.
pub fn write_pooled_csv<W: Write>(writer: W, ids: &[String], ests: &[MIEstimate], level: f64) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["cell", "q_bar", "t", "nu", "lower", "upper"])?;
    for (id, e) in ids.iter().zip(ests) {
        let (lo, hi) = mi_interval(e, level)?;
        let nu = if e.nu.is_finite() { format!("{:.12e}", e.nu) } else { "inf".into() };
        w.write_record([
            id.clone(),
            format!("{:.12e}", e.q_bar),
            format!("{:.12e}", e.t),
            nu,
            format!("{lo:.12e}"),
            format!("{hi:.12e}"),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<pooled estimates>", e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{canonical_schema, VarGroup, VarKind, VariableSchema};
    use proptest::prelude::*;

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    #[test]
    fn hand_example() {
        let e = pool_estimates(&[0.4, 0.5], &[0.01, 0.01]).unwrap();
        assert!(rel(e.q_bar, 0.45) < 1e-12);
        assert!(rel(e.b, 0.005) < 1e-12);
        assert!(rel(e.t, 0.0175) < 1e-12);
        assert!(rel(e.nu, 49.0 / 9.0) < 1e-12);
        let (lo, hi) = mi_interval(&e, 0.95).unwrap();
        assert!(rel((hi - lo) / 2.0, 0.331_873_759_698_759_15) < 1e-9, "{}", (hi - lo) / 2.0);
    }

    #[test]
    fn zero_between_variance_is_flagged() {
        let e = pool_estimates(&[0.3, 0.3, 0.3], &[0.01, 0.02, 0.03]).unwrap();
        assert!(e.normal_reference && e.nu.is_infinite());
        assert_eq!(e.b, 0.0);
        assert!((e.t - 0.02).abs() < 1e-15);
        let (lo, hi) = mi_interval(&e, 0.95).unwrap();
        assert!(((hi - lo) / 2.0 - 1.959_963_984_540_054 * 0.02f64.sqrt()).abs() < 1e-12);
        let z = pool_estimates(&[0.0, 0.0], &[0.0, 0.0]).unwrap();
        assert_eq!(mi_interval(&z, 0.95).unwrap(), (0.0, 0.0));
    }

    #[test]
    fn identical_inexact_estimates_have_no_between_variance() {
        // q̄ of five copies of 0.112 is not exactly 0.112 in floating point.
        let e = pool_estimates(&[0.112; 5], &[1.98912e-4; 5]).unwrap();
        assert_eq!(e.b, 0.0);
        assert!(e.normal_reference);
        assert!(mi_interval(&e, 0.95).is_ok());
    }

    #[test]
    fn t_quantile_is_continuous_across_the_expansion_switch() {
        for p in [0.6, 0.975, 0.995, 0.9999] {
            let below = StudentsT::new(0.0, 1.0, T_EXPANSION_NU * (1.0 - 1e-9)).unwrap().inverse_cdf(p);
            let above = t_quantile(T_EXPANSION_NU, p).unwrap();
            assert!(rel(above, below) < 1e-10, "p = {p}: {above} vs {below}");
            let t = StudentsT::new(0.0, 1.0, 2.5e3).unwrap();
            assert!((t.cdf(t_quantile(2.5e3, p).unwrap()) - p).abs() < 1e-12);
        }
        assert!((t_quantile(1.0, 0.975).unwrap() - 12.706_204_736_174_7).abs() < 1e-9);
        let z = dist::normal_quantile(0.975);
        for nu in [1e6, 1e12, 1e60, 1e300] {
            assert!(rel(t_quantile(nu, 0.975).unwrap(), z) < 1e-5);
        }
        assert!(t_quantile(0.0, 0.5).is_err() && t_quantile(3.0, 1.0).is_err());
    }

    #[test]
    fn zero_within_variance_limit() {
        let e = pool_estimates(&[0.1, 0.2, 0.4], &[0.0; 3]).unwrap();
        assert!((e.t - (4.0 / 3.0) * e.b).abs() < 1e-15);
        assert!((e.nu - 2.0).abs() < 1e-12);
    }

    #[test]
    fn argument_errors() {
        assert!(pool_estimates(&[0.1], &[0.1]).is_err());
        assert!(pool_estimates(&[0.1, 0.2], &[0.1]).is_err());
        let e = pool_estimates(&[0.4, 0.5], &[0.01, 0.01]).unwrap();
        assert!(mi_interval(&e, 1.0).is_err());
        assert!(mi_interval(&e, 0.0).is_err());
    }

    fn binary_data(ones: usize, n: usize) -> CompletedDataset {
        let s = canonical_schema(&[VariableSchema::new("a", VarKind::Ordinal, 2, VarGroup::Focus)]).unwrap();
        let rows: Vec<Vec<Option<u16>>> = (0..n).map(|i| vec![Some(if i < ones { 2 } else { 1 })]).collect();
        CompletedDataset::new(Dataset::from_rows(s, &rows).unwrap()).unwrap()
    }

    #[test]
    fn cell_estimates_by_hand() {
        let d = [binary_data(30, 100), binary_data(31, 100)];
        let cells = vec![CellSpec::Joint(vec![(0, 2)])];
        let e = cell_estimates(&d, &cells).unwrap()[0];
        assert!((e.q_bar - 0.305).abs() < 1e-15);
        assert!((e.b - 0.00005).abs() < 1e-15);
        let u = (0.3 * 0.7 / 100.0 + 0.31 * 0.69 / 100.0) / 2.0;
        assert!((e.u_bar - u).abs() < 1e-15);
        assert!((e.t - (1.5 * 0.00005 + u)).abs() < 1e-15);
        let same = cell_estimates(&[binary_data(30, 100), binary_data(30, 100)], &cells).unwrap()[0];
        assert_eq!(same.b, 0.0);
        let empty = cell_estimates(&[binary_data(0, 10), binary_data(0, 10)], &cells).unwrap()[0];
        assert_eq!((empty.q_bar, empty.t), (0.0, 0.0));
        assert!(cell_estimates(&[binary_data(1, 10), binary_data(1, 11)], &cells).is_err());
    }

    #[test]
    fn pooled_csv_has_fixed_columns() {
        let e = pool_estimates(&[0.4, 0.5], &[0.01, 0.01]).unwrap();
        let mut out = Vec::new();
        write_pooled_csv(&mut out, &["a=1".into()], &[e], 0.95).unwrap();
        let s = String::from_utf8(out).unwrap();
        assert!(s.starts_with("cell,q_bar,t,nu,lower,upper\na=1,4.5"));
    }

    proptest! {
        #[test]
        fn pooling_is_permutation_invariant(q in prop::collection::vec(0.0f64..1.0, 2..8), seed in 0u64..1000) {
            let u: Vec<f64> = q.iter().map(|x| x * (1.0 - x) / 50.0).collect();
            let a = pool_estimates(&q, &u).unwrap();
            let mut idx: Vec<usize> = (0..q.len()).collect();
            idx.rotate_left((seed as usize) % q.len());
            let qp: Vec<f64> = idx.iter().map(|&i| q[i]).collect();
            let up: Vec<f64> = idx.iter().map(|&i| u[i]).collect();
            let b = pool_estimates(&qp, &up).unwrap();
            prop_assert!((a.q_bar - b.q_bar).abs() < 1e-12 && (a.t - b.t).abs() < 1e-12);
            prop_assert!(a.t >= a.u_bar && a.u_bar >= 0.0);
            if a.b > 0.0 { prop_assert!(a.nu > 0.0); }
            let (l1, h1) = mi_interval(&a, 0.8).unwrap();
            let (l2, h2) = mi_interval(&a, 0.95).unwrap();
            prop_assert!(l2 <= l1 && h1 <= h2);
        }
    }
}
