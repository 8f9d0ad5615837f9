//! Sampling and density routines shared by the sampler and the oracles.

use libm::erfc;
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{ChiSquared, Distribution, Exp, Gamma, StandardNormal};
use statrs::function::erf::erfc_inv;

use crate::error::{Error, Result};

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Standard normal CDF, accurate in both tails.
pub fn normal_cdf(x: f64) -> f64 {
    if x == f64::INFINITY {
        1.0
    } else if x == f64::NEG_INFINITY {
        0.0
    } else {
        0.5 * erfc(-x / std::f64::consts::SQRT_2)
    }
}

/// Standard normal quantile.
pub fn normal_quantile(p: f64) -> f64 {
    if p <= 0.0 {
        f64::NEG_INFINITY
    } else if p >= 1.0 {
        f64::INFINITY
    } else {
        let mut x = -std::f64::consts::SQRT_2 * erfc_inv(2.0 * p);
        // Halley steps against the full-precision CDF.
        for _ in 0..2 {
            let e = normal_cdf(x) - p;
            let u = e * (LN_2PI * 0.5 + 0.5 * x * x).exp();
            x -= u / (1.0 + 0.5 * x * u);
        }
        x
    }
}

/// Probability that a N(mean, sd²) variable falls in (lo, hi].
pub fn normal_interval_prob(mean: f64, sd: f64, lo: f64, hi: f64) -> f64 {
    let a = (lo - mean) / sd;
    let b = (hi - mean) / sd;
    // Difference taken on the side of zero where the CDF keeps precision.
    if a >= 0.0 {
        (normal_cdf(-a) - normal_cdf(-b)).max(0.0)
    } else {
        (normal_cdf(b) - normal_cdf(a)).max(0.0)
    }
}

/// Draw from N(mean, sd²) truncated to (lo, hi]. Infinite bounds are allowed.
pub fn truncated_normal<R: Rng + ?Sized>(rng: &mut R, mean: f64, sd: f64, lo: f64, hi: f64) -> f64 {
    debug_assert!(lo < hi, "empty truncation interval ({lo}, {hi}]");
    let a = (lo - mean) / sd;
    let b = (hi - mean) / sd;
    mean + sd * std_truncated(rng, a, b)
}

fn std_truncated<R: Rng + ?Sized>(rng: &mut R, a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY && b == f64::INFINITY {
        return rng.sample(StandardNormal);
    }
    if a >= 0.0 {
        upper_region(rng, a, b)
    } else if b <= 0.0 {
        -upper_region(rng, -b, -a)
    } else {
        let pa = normal_cdf(a);
        let pb = normal_cdf(b);
        let u = pa + (pb - pa) * rng.random::<f64>();
        normal_quantile(u).clamp(a, b)
    }
}

/// Sample on [a, b] with 0 <= a < b.
fn upper_region<R: Rng + ?Sized>(rng: &mut R, a: f64, b: f64) -> f64 {
    if a < 8.0 {
        let qa = normal_cdf(-a);
        let qb = normal_cdf(-b);
        if qa > qb && (qa - qb) > 1e-12 * qa {
            let u = qb + (qa - qb) * rng.random::<f64>();
            return (-normal_quantile(u)).clamp(a, b);
        }
    }
    tail_rejection(rng, a, b)
}

fn tail_rejection<R: Rng + ?Sized>(rng: &mut R, a: f64, b: f64) -> f64 {
    if b.is_finite() && (b - a) * a.max(1.0) < 2.0 {
        // Narrow interval: uniform proposal against exp(-(z^2 - a^2)/2).
        loop {
            let z = a + (b - a) * rng.random::<f64>();
            if rng.random::<f64>().ln() <= -0.5 * (z - a) * (z + a) {
                return z;
            }
        }
    }
    // Robert (1995) translated-exponential proposal.
    let rate = 0.5 * (a + (a * a + 4.0).sqrt());
    let exp = Exp::new(rate).expect("positive rate");
    loop {
        let z = a + exp.sample(rng);
        if z > b {
            continue;
        }
        let d = z - rate;
        if rng.random::<f64>().ln() <= -0.5 * d * d {
            return z;
        }
    }
}

pub fn gamma<R: Rng + ?Sized>(rng: &mut R, shape: f64, rate: f64) -> f64 {
    Gamma::new(shape, 1.0 / rate).expect("gamma parameters must be positive").sample(rng)
}

pub fn beta<R: Rng + ?Sized>(rng: &mut R, a: f64, b: f64) -> f64 {
    // Ratio of gammas; avoids constructing a Beta per draw with changing parameters.
    let x = gamma(rng, a, 1.0);
    let y = gamma(rng, b, 1.0);
    if x + y > 0.0 {
        x / (x + y)
    } else if a >= b {
        1.0
    } else {
        0.0
    }
}

/// Dirichlet draw via normalized gammas.
pub fn dirichlet<R: Rng + ?Sized>(rng: &mut R, conc: &[f64]) -> Vec<f64> {
    let mut out: Vec<f64> = conc.iter().map(|&a| gamma(rng, a, 1.0)).collect();
    let total: f64 = out.iter().sum();
    if total > 0.0 {
        out.iter_mut().for_each(|x| *x /= total);
    } else {
        let k = rng.random_range(0..out.len());
        out.iter_mut().enumerate().for_each(|(i, x)| *x = f64::from(i == k));
    }
    out
}

/// Index drawn with probability proportional to `exp(logw)`.
pub fn categorical_log<R: Rng + ?Sized>(rng: &mut R, logw: &mut [f64]) -> usize {
    let max = logw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    assert!(max.is_finite(), "all categorical weights vanish");
    let mut total = 0.0;
    for w in logw.iter_mut() {
        *w = (*w - max).exp();
        total += *w;
    }
    categorical_scaled(rng, logw, total)
}

/// Index drawn with probability proportional to the non-negative weights `w`.
pub fn categorical<R: Rng + ?Sized>(rng: &mut R, w: &[f64]) -> usize {
    let total: f64 = w.iter().sum();
    assert!(total > 0.0, "all categorical weights vanish");
    categorical_scaled(rng, w, total)
}

fn categorical_scaled<R: Rng + ?Sized>(rng: &mut R, w: &[f64], total: f64) -> usize {
    let mut u = rng.random::<f64>() * total;
    let mut last = 0;
    for (k, &wk) in w.iter().enumerate() {
        if wk > 0.0 {
            if u < wk {
                return k;
            }
            u -= wk;
            last = k;
        }
    }
    last
}

/// Lower Cholesky factor, or a numerical error naming `what`.
pub fn cholesky(m: &DMatrix<f64>, what: &str) -> Result<DMatrix<f64>> {
    m.clone().cholesky().map(|c| c.l()).ok_or_else(|| Error::Numerical(format!("{what} is not positive definite")))
}

/// Draw from IW(df, scale), parameterized so that E[Σ] = scale / (df - p - 1).
pub fn inverse_wishart<R: Rng + ?Sized>(rng: &mut R, df: f64, scale: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let p = scale.nrows();
    // Σ^{-1} ~ Wishart(df, scale^{-1}); Bartlett factor of the precision.
    let scale_inv = scale
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Numerical("inverse-Wishart scale is not positive definite".into()))?
        .inverse();
    let l = cholesky(&scale_inv, "inverse-Wishart scale inverse")?;
    let mut a = DMatrix::<f64>::zeros(p, p);
    for i in 0..p {
        let chi = ChiSquared::new(df - i as f64)
            .map_err(|_| Error::Numerical(format!("inverse-Wishart degrees of freedom {df} too small")))?;
        a[(i, i)] = chi.sample(rng).sqrt();
        for j in 0..i {
            a[(i, j)] = rng.sample(StandardNormal);
        }
    }
    let la = l * a;
    let inv = la
        .solve_lower_triangular(&DMatrix::identity(p, p))
        .ok_or_else(|| Error::Numerical("singular Bartlett factor".into()))?;
    let sigma = inv.transpose() * inv;
    Ok(symmetrize(sigma))
}

pub fn symmetrize(m: DMatrix<f64>) -> DMatrix<f64> {
    (&m + m.transpose()) * 0.5
}

/// Draw from N(mean, L Lᵀ) given the lower Cholesky factor `l`.
pub fn mvn<R: Rng + ?Sized>(rng: &mut R, mean: &DVector<f64>, l: &DMatrix<f64>) -> DVector<f64> {
    let e = DVector::from_fn(mean.len(), |_, _| rng.sample::<f64, _>(StandardNormal));
    mean + l * e
}

/// Cached factorization of a covariance matrix for repeated density evaluation.
#[derive(Clone, Debug)]
pub struct GaussianKernel {
    chol: DMatrix<f64>,
    precision: DMatrix<f64>,
    log_norm: f64,
}

impl GaussianKernel {
    pub fn new(cov: &DMatrix<f64>) -> Result<Self> {
        let chol = cholesky(cov, "component covariance")?;
        let p = cov.nrows();
        let log_det: f64 = 2.0 * (0..p).map(|i| chol[(i, i)].ln()).sum::<f64>();
        let precision = cov.clone().cholesky().expect("factorized above").inverse();
        Ok(Self { chol, precision: symmetrize(precision), log_norm: -0.5 * (p as f64 * LN_2PI + log_det) })
    }

    pub fn precision(&self) -> &DMatrix<f64> {
        &self.precision
    }

    pub fn chol(&self) -> &DMatrix<f64> {
        &self.chol
    }

    /// log N(x; mean, Σ) for slices of equal length.
    pub fn log_density(&self, x: &[f64], mean: &[f64]) -> f64 {
        let p = x.len();
        // Forward substitution L w = x - mean, no allocation for p <= 16.
        let mut buf = [0.0f64; 16];
        let mut heap;
        let w: &mut [f64] = if p <= 16 {
            &mut buf[..p]
        } else {
            heap = vec![0.0; p];
            &mut heap
        };
        let mut quad = 0.0;
        for i in 0..p {
            let mut s = x[i] - mean[i];
            for k in 0..i {
                s -= self.chol[(i, k)] * w[k];
            }
            w[i] = s / self.chol[(i, i)];
            quad += w[i] * w[i];
        }
        self.log_norm - 0.5 * quad
    }
}
