//! Truncated stick-breaking weights for the top-level and the three
//! block-level allocation families.

use crate::error::{Error, Result};

/// π_k = v_k · Π_{j<k} (1 − v_j). The last stick must equal 1.
pub fn stick_break(v: &[f64]) -> Result<Vec<f64>> {
    if v.is_empty() {
        return Err(Error::InvalidArgument("no sticks".into()));
    }
    if let Some(x) = v.iter().find(|x| !(0.0..=1.0).contains(*x)) {
        return Err(Error::InvalidArgument(format!("stick {x} outside [0, 1]")));
    }
    if *v.last().unwrap() != 1.0 {
        return Err(Error::InvalidArgument("terminal stick must equal 1".into()));
    }
    Ok(break_unchecked(v))
}

fn break_unchecked(v: &[f64]) -> Vec<f64> {
    let mut rest = 1.0;
    v.iter()
        .map(|&vk| {
            let p = vk * rest;
            rest *= 1.0 - vk;
            p
        })
        .collect()
}

/// Stick variables together with the weights they induce.
#[derive(Clone, Debug, PartialEq)]
pub struct Sticks {
    v: Vec<f64>,
    pi: Vec<f64>,
    ln_pi: Vec<f64>,
}

impl Sticks {
    /// Build from non-terminal sticks; the terminal stick 1 is appended.
    pub fn from_open(open: Vec<f64>) -> Self {
        let mut v = open;
        v.push(1.0);
        let pi = break_unchecked(&v);
        let ln_pi = pi.iter().map(|p| p.ln()).collect();
        Self { v, pi, ln_pi }
    }

    /// A single component with all the mass.
    pub fn degenerate() -> Self {
        Self::from_open(Vec::new())
    }

    pub fn v(&self) -> &[f64] {
        &self.v
    }

    pub fn pi(&self) -> &[f64] {
        &self.pi
    }

    pub fn ln_pi(&self) -> &[f64] {
        &self.ln_pi
    }

    pub fn len(&self) -> usize {
        self.v.len()
    }

    pub fn is_empty(&self) -> bool {
        self.v.is_empty()
    }
}

/// The full weight system: π_h and the per-h conditional weights of each block.
#[derive(Clone, Debug, PartialEq)]
pub struct MixtureWeights {
    pub top: Sticks,
    /// Indexed by h; each entry holds π^(ZA)_{·h}.
    pub za: Vec<Sticks>,
    pub xa: Vec<Sticks>,
    /// Empty when the model has no remainder block.
    pub b: Vec<Sticks>,
    pub alpha: f64,
    pub alpha_za: f64,
    pub alpha_xa: f64,
    pub alpha_b: f64,
}

impl MixtureWeights {
    pub fn n(&self) -> usize {
        self.top.len()
    }

    pub fn n_za(&self) -> usize {
        self.za[0].len()
    }

    pub fn n_xa(&self) -> usize {
        self.xa[0].len()
    }

    /// Remainder truncation; 1 when the model has no remainder block.
    pub fn n_b(&self) -> usize {
        self.b.first().map_or(1, Sticks::len)
    }

    pub fn has_remainder(&self) -> bool {
        !self.b.is_empty()
    }

    /// π^(B)_{sh}, equal to 1 for the single virtual component without a remainder block.
    pub fn pi_b(&self, s: usize, h: usize) -> f64 {
        if self.b.is_empty() {
            1.0
        } else {
            self.b[h].pi()[s]
        }
    }

    pub fn ln_pi_b(&self, s: usize, h: usize) -> f64 {
        if self.b.is_empty() {
            0.0
        } else {
            self.b[h].ln_pi()[s]
        }
    }
}

/// Joint allocation probabilities Pr(H_ZA = r, H_XA = l, H_B = s).
#[derive(Clone, Debug, PartialEq)]
pub struct AllocationTensor {
    pub dims: (usize, usize, usize),
    data: Vec<f64>,
}

impl AllocationTensor {
    pub fn get(&self, r: usize, l: usize, s: usize) -> f64 {
        let (_, nl, ns) = self.dims;
        self.data[(r * nl + l) * ns + s]
    }

    pub fn total(&self) -> f64 {
        self.data.iter().sum()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// Pr(H_ZA = r) after summing over l and s.
    pub fn marginal_za(&self) -> Vec<f64> {
        let (nr, nl, ns) = self.dims;
        (0..nr)
            .map(|r| (0..nl).flat_map(|l| (0..ns).map(move |s| (l, s))).map(|(l, s)| self.get(r, l, s)).sum())
            .collect()
    }
}

/// Entry (r, l, s) = Σ_h π_h π^(ZA)_{rh} π^(XA)_{lh} π^(B)_{sh}.
pub fn marginal_allocation_probs(w: &MixtureWeights) -> AllocationTensor {
    let (nr, nl, ns) = (w.n_za(), w.n_xa(), w.n_b());
    let mut data = vec![0.0; nr * nl * ns];
    for (h, &ph) in w.top.pi().iter().enumerate() {
        for r in 0..nr {
            let prh = ph * w.za[h].pi()[r];
            for l in 0..nl {
                let prl = prh * w.xa[h].pi()[l];
                for s in 0..ns {
                    data[(r * nl + l) * ns + s] += prl * w.pi_b(s, h);
                }
            }
        }
    }
    AllocationTensor { dims: (nr, nl, ns), data }
}
