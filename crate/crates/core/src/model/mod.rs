//! Model configuration, the resolved model layout, and parameter containers.

mod design;
pub(crate) mod state;
mod weights;

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

pub use design::{build_design_vector, Design, DesignTerm};
pub use state::{init_state, Params, SamplerState};
pub use weights::{marginal_allocation_probs, stick_break, AllocationTensor, MixtureWeights, Sticks};

use crate::data::{partition, PartitionedView, VariableSchema};
use crate::error::{Error, Result};

/// Which block structure to fit.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    /// Separate allocations for ordinal focus, nominal focus and remainder blocks.
    #[default]
    MmFc,
    /// No remainder block: every non-ordinal-focus variable is modeled as a
    /// nominal focus variable.
    MmMix,
}

impl Variant {
    pub fn name(self) -> &'static str {
        match self {
            Variant::MmFc => "mmfc",
            Variant::MmMix => "mmmix",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Truncation {
    pub n: usize,
    pub n_za: usize,
    pub n_xa: usize,
    pub n_b: usize,
}

impl Default for Truncation {
    fn default() -> Self {
        Self { n: 10, n_za: 20, n_xa: 20, n_b: 20 }
    }
}

impl Truncation {
    pub fn uniform(k: usize) -> Self {
        Self { n: k, n_za: k, n_xa: k, n_b: k }
    }
}

/// Hyperpriors used only when hierarchical updates of B_0 and τ² are enabled:
/// B_0 entries ~ N(0, b0_var), τ²_j ~ inverse-gamma(tau2_shape, tau2_rate).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Hyperprior {
    pub b0_var: f64,
    pub tau2_shape: f64,
    pub tau2_rate: f64,
}

impl Default for Hyperprior {
    fn default() -> Self {
        Self { b0_var: 4.0, tau2_shape: 3.0, tau2_rate: 8.0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PriorConfig {
    /// d × p_Ac prior mean of β_r, row-major rows; zeros when absent.
    pub b0: Option<Vec<Vec<f64>>>,
    /// Column variances of β_r; 4 each when absent.
    pub tau2: Option<Vec<f64>>,
    /// Inverse-Wishart degrees of freedom; p_Ac + 2 when absent.
    pub nu: Option<f64>,
    /// Inverse-Wishart scale; identity when absent.
    pub s: Option<Vec<Vec<f64>>>,
    /// Symmetric Dirichlet concentration for every ψ and φ.
    pub dirichlet: f64,
    /// Per-variable Dirichlet concentration vectors.
    pub dirichlet_overrides: BTreeMap<String, Vec<f64>>,
    /// Gamma(shape, rate) prior shared by the four stick-breaking concentrations.
    pub alpha_shape: f64,
    pub alpha_rate: f64,
    pub hyper: Hyperprior,
}

impl Default for PriorConfig {
    fn default() -> Self {
        Self {
            b0: None,
            tau2: None,
            nu: None,
            s: None,
            dirichlet: 1.0,
            dirichlet_overrides: BTreeMap::new(),
            alpha_shape: 1.0,
            alpha_rate: 1.0,
            hyper: Hyperprior::default(),
        }
    }
}

/// User-facing model configuration (JSON).
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub variant: Variant,
    pub truncation: Truncation,
    /// Cutoff overrides by ordinal variable name.
    pub cutoffs: BTreeMap<String, Vec<f64>>,
    /// Design terms; intercept plus all main effects when absent.
    pub design: Option<Vec<DesignTerm>>,
    pub prior: PriorConfig,
}

impl ModelConfig {
    pub fn with_variant(mut self, variant: Variant) -> Self {
        self.variant = variant;
        self
    }

    pub fn with_truncation(mut self, t: Truncation) -> Self {
        self.truncation = t;
        self
    }
}

/// Equally spaced cutoffs centered at zero: γ_k = k − L/2 for k = 1..L−1.
pub fn default_cutoffs(levels: usize) -> Result<Vec<f64>> {
    if levels < 2 {
        return Err(Error::InvalidArgument(format!("need at least 2 levels, got {levels}")));
    }
    let half = levels as f64 / 2.0;
    Ok((1..levels).map(|k| k as f64 - half).collect())
}

/// Resolved prior with concrete dimensions.
#[derive(Clone, Debug, PartialEq)]
pub struct Prior {
    pub b0: DMatrix<f64>,
    pub tau2: Vec<f64>,
    pub nu: f64,
    pub s: DMatrix<f64>,
    pub psi_conc: Vec<Vec<f64>>,
    pub phi_conc: Vec<Vec<f64>>,
    pub alpha_shape: f64,
    pub alpha_rate: f64,
    pub hyper: Hyperprior,
}

/// A configuration resolved against a concrete schema.
#[derive(Clone, Debug, PartialEq)]
pub struct Model {
    pub variant: Variant,
    pub schemas: Vec<VariableSchema>,
    pub view: PartitionedView,
    pub truncation: Truncation,
    /// Interior cutoffs per ordinal focus column.
    pub cutoffs: Vec<Vec<f64>>,
    pub design: Design,
    pub prior: Prior,
}

fn matrix(rows: &[Vec<f64>], nr: usize, nc: usize, what: &str) -> Result<DMatrix<f64>> {
    if rows.len() != nr || rows.iter().any(|r| r.len() != nc) {
        return Err(Error::Config(format!("{what} must be {nr} x {nc}")));
    }
    Ok(DMatrix::from_fn(nr, nc, |i, j| rows[i][j]))
}

impl Model {
    /// Resolve `config` against canonical `schemas`.
    pub fn new(config: &ModelConfig, schemas: &[VariableSchema]) -> Result<Self> {
        let base = partition(schemas)?;
        let view = match config.variant {
            Variant::MmFc => base,
            Variant::MmMix => base.merged(),
        };
        let p_ac = view.p_ac();
        if p_ac == 0 {
            return Err(Error::Config("the model needs at least one ordinal focus variable".into()));
        }
        let t = config.truncation;
        if t.n < 2 || t.n_za < 2 || t.n_xa < 2 || (t.n_b < 2 && !view.remainder.is_empty()) {
            return Err(Error::Config("all truncation levels must be at least 2".into()));
        }
        let truncation = Truncation { n_b: if view.remainder.is_empty() { 1 } else { t.n_b }, ..t };

        for name in config.cutoffs.keys() {
            let j = schemas
                .iter()
                .position(|s| &s.name == name)
                .ok_or_else(|| Error::Config(format!("cutoffs for unknown variable `{name}`")))?;
            if !view.ordinal_focus.contains(&j) {
                return Err(Error::Config(format!(
                    "cutoffs given for `{name}`, which is not an ordinal focus variable"
                )));
            }
        }
        let mut cutoffs = Vec::with_capacity(p_ac);
        for s in &schemas[view.ordinal_focus.clone()] {
            let c = match config.cutoffs.get(&s.name) {
                Some(c) => c.clone(),
                None => default_cutoffs(s.levels)?,
            };
            if c.len() != s.levels - 1 {
                return Err(Error::Config(format!("`{}` needs {} cutoffs", s.name, s.levels - 1)));
            }
            if c.windows(2).any(|w| !(w[0] < w[1])) || c.iter().any(|x| !x.is_finite()) {
                return Err(Error::Config(format!("cutoffs for `{}` must be finite and strictly increasing", s.name)));
            }
            cutoffs.push(c);
        }

        let covariates = view.ordinal_focus.end..view.remainder.end;
        let design = match &config.design {
            Some(terms) => Design::resolve(terms, schemas, covariates)?,
            None => Design::main_effects(schemas, covariates),
        };
        let d = design.len();

        let pc = &config.prior;
        let b0 = match &pc.b0 {
            Some(rows) => matrix(rows, d, p_ac, "prior b0")?,
            None => DMatrix::zeros(d, p_ac),
        };
        let tau2 = pc.tau2.clone().unwrap_or_else(|| vec![4.0; p_ac]);
        if tau2.len() != p_ac || tau2.iter().any(|&x| !(x > 0.0)) {
            return Err(Error::Config(format!("prior tau2 needs {p_ac} positive entries")));
        }
        let nu = pc.nu.unwrap_or(p_ac as f64 + 2.0);
        if !(nu > p_ac as f64 - 1.0) {
            return Err(Error::Config(format!("prior nu must exceed {}", p_ac as f64 - 1.0)));
        }
        let s = match &pc.s {
            Some(rows) => matrix(rows, p_ac, p_ac, "prior s")?,
            None => DMatrix::identity(p_ac, p_ac),
        };
        if s.clone().cholesky().is_none() || (&s - s.transpose()).abs().max() > 1e-12 {
            return Err(Error::Config("prior s must be symmetric positive definite".into()));
        }
        if !(pc.dirichlet > 0.0 && pc.alpha_shape > 0.0 && pc.alpha_rate > 0.0) {
            return Err(Error::Config("Dirichlet and gamma hyperparameters must be positive".into()));
        }
        for name in pc.dirichlet_overrides.keys() {
            if !schemas.iter().any(|s| &s.name == name) {
                return Err(Error::Config(format!("Dirichlet override for unknown variable `{name}`")));
            }
        }
        let conc = |cols: std::ops::Range<usize>| -> Result<Vec<Vec<f64>>> {
            schemas[cols]
                .iter()
                .map(|s| match pc.dirichlet_overrides.get(&s.name) {
                    Some(a) if a.len() == s.levels && a.iter().all(|&x| x > 0.0) => Ok(a.clone()),
                    Some(_) => Err(Error::Config(format!(
                        "Dirichlet override for `{}` needs {} positive entries",
                        s.name, s.levels
                    ))),
                    None => Ok(vec![pc.dirichlet; s.levels]),
                })
                .collect()
        };
        let prior = Prior {
            b0,
            tau2,
            nu,
            s,
            psi_conc: conc(view.nominal_focus.clone())?,
            phi_conc: conc(view.remainder.clone())?,
            alpha_shape: pc.alpha_shape,
            alpha_rate: pc.alpha_rate,
            hyper: pc.hyper,
        };
        Ok(Self { variant: config.variant, schemas: schemas.to_vec(), view, truncation, cutoffs, design, prior })
    }

    pub fn p(&self) -> usize {
        self.schemas.len()
    }

    pub fn p_ac(&self) -> usize {
        self.view.p_ac()
    }

    pub fn d(&self) -> usize {
        self.design.len()
    }

    pub fn has_remainder(&self) -> bool {
        !self.view.remainder.is_empty()
    }

    pub fn levels(&self, col: usize) -> usize {
        self.schemas[col].levels
    }

    /// Interval (γ_{y−1}, γ_y] for level `y` (1-based) of ordinal column `j`.
    pub fn interval(&self, j: usize, y: u16) -> (f64, f64) {
        let c = &self.cutoffs[j];
        let y = y as usize;
        let lo = if y <= 1 { f64::NEG_INFINITY } else { c[y - 2] };
        let hi = if y > c.len() { f64::INFINITY } else { c[y - 1] };
        (lo, hi)
    }

    /// Level whose interval contains `z`.
    pub fn level_of(&self, j: usize, z: f64) -> u16 {
        (self.cutoffs[j].iter().take_while(|&&g| z > g).count() + 1) as u16
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{canonical_schema, VarGroup, VarKind};
    use proptest::prelude::*;

    #[test]
    fn default_cutoff_examples() {
        assert_eq!(default_cutoffs(4).unwrap(), vec![-1.0, 0.0, 1.0]);
        assert_eq!(default_cutoffs(3).unwrap(), vec![-0.5, 0.5]);
        assert_eq!(default_cutoffs(2).unwrap(), vec![0.0]);
        assert!(default_cutoffs(1).is_err());
    }

    proptest! {
        #[test]
        fn cutoffs_increasing_and_symmetric(l in 2usize..40) {
            let c = default_cutoffs(l).unwrap();
            prop_assert!(c.windows(2).all(|w| w[0] < w[1]));
            for k in 0..c.len() {
                prop_assert_eq!(c[k], -c[c.len() - 1 - k]);
            }
        }
    }

    fn schemas() -> Vec<VariableSchema> {
        canonical_schema(&[
            VariableSchema::new("y", VarKind::Ordinal, 4, VarGroup::Focus),
            VariableSchema::new("x", VarKind::Nominal, 3, VarGroup::Focus),
            VariableSchema::new("b", VarKind::Ordinal, 2, VarGroup::Remainder),
        ])
        .unwrap()
    }

    #[test]
    fn interval_and_level_agree() {
        let m = Model::new(&ModelConfig::default(), &schemas()).unwrap();
        assert_eq!(m.interval(0, 1), (f64::NEG_INFINITY, -1.0));
        assert_eq!(m.interval(0, 4), (1.0, f64::INFINITY));
        assert_eq!(m.level_of(0, 0.5), 3);
        assert_eq!(m.level_of(0, 0.0), 2);
        assert_eq!(m.level_of(0, -7.0), 1);
        assert_eq!(m.d(), 1 + 2 + 1);
    }

    #[test]
    fn mm_mix_absorbs_remainder() {
        let m = Model::new(&ModelConfig::default().with_variant(Variant::MmMix), &schemas()).unwrap();
        assert!(!m.has_remainder());
        assert_eq!(m.view.nominal_focus, 1..3);
        assert_eq!(m.truncation.n_b, 1);
        assert_eq!(m.prior.psi_conc.len(), 2);
    }

    #[test]
    fn config_validation() {
        let mut c = ModelConfig::default();
        c.cutoffs.insert("y".into(), vec![0.0, -1.0, 1.0]);
        assert!(Model::new(&c, &schemas()).is_err());
        let mut c = ModelConfig::default();
        c.cutoffs.insert("x".into(), vec![0.0, 1.0]);
        assert!(Model::new(&c, &schemas()).is_err());
        let c = ModelConfig::default().with_truncation(Truncation::uniform(1));
        assert!(Model::new(&c, &schemas()).is_err());
        let c = ModelConfig { design: Some(vec![DesignTerm::Main("y".into())]), ..Default::default() };
        assert!(Model::new(&c, &schemas()).is_err());
    }

    #[test]
    fn config_json_round_trip() {
        let json = r#"{"variant":"mmmix","truncation":{"n":5},"design":[{"main":"x"}],"prior":{"tau2":[2.0]}}"#;
        let c: ModelConfig = serde_json::from_str(json).unwrap();
        assert_eq!(c.variant, Variant::MmMix);
        assert_eq!(c.truncation.n, 5);
        assert_eq!(c.truncation.n_za, 20);
        let back: ModelConfig = serde_json::from_str(&serde_json::to_string(&c).unwrap()).unwrap();
        assert_eq!(back, c);
    }
}
