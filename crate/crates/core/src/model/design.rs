use serde::{Deserialize, Serialize};

use crate::data::VariableSchema;
use crate::error::{Error, Result};

/// One term of the regression design for the latent ordinal block.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DesignTerm {
    Intercept,
    /// Dummy-coded main effect, first level as reference.
    Main(String),
    /// Products of the two variables' dummies.
    Interaction([String; 2]),
}

#[derive(Clone, Debug, PartialEq, Eq)]
enum Block {
    Intercept,
    Main { col: usize, levels: usize },
    Interaction { a: usize, la: usize, b: usize, lb: usize },
}

impl Block {
    fn width(&self) -> usize {
        match *self {
            Block::Intercept => 1,
            Block::Main { levels, .. } => levels - 1,
            Block::Interaction { la, lb, .. } => (la - 1) * (lb - 1),
        }
    }

    fn uses(&self, col: usize) -> bool {
        match *self {
            Block::Intercept => false,
            Block::Main { col: c, .. } => c == col,
            Block::Interaction { a, b, .. } => a == col || b == col,
        }
    }
}

/// A design spec resolved against column positions.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Design {
    terms: Vec<DesignTerm>,
    blocks: Vec<(usize, Block)>,
    d: usize,
}

impl Design {
    /// Resolve `terms` against `schemas`. Only columns in `covariates` (the X
    /// block) may be referenced. An intercept is prepended when absent.
    pub fn resolve(
        terms: &[DesignTerm],
        schemas: &[VariableSchema],
        covariates: std::ops::Range<usize>,
    ) -> Result<Self> {
        let lookup = |name: &str| -> Result<(usize, usize)> {
            let col = schemas
                .iter()
                .position(|s| s.name == name)
                .ok_or_else(|| Error::Config(format!("design references unknown variable `{name}`")))?;
            if !covariates.contains(&col) {
                return Err(Error::Config(format!(
                    "design term `{name}` is an ordinal focus variable; only X variables may enter the design"
                )));
            }
            Ok((col, schemas[col].levels))
        };
        let mut all = Vec::with_capacity(terms.len() + 1);
        if !terms.contains(&DesignTerm::Intercept) {
            all.push(DesignTerm::Intercept);
        }
        all.extend(terms.iter().cloned());
        let mut blocks = Vec::with_capacity(all.len());
        let mut d = 0;
        let mut seen_intercept = false;
        for t in &all {
            let block = match t {
                DesignTerm::Intercept => {
                    if seen_intercept {
                        return Err(Error::Config("design lists the intercept twice".into()));
                    }
                    seen_intercept = true;
                    Block::Intercept
                }
                DesignTerm::Main(name) => {
                    let (col, levels) = lookup(name)?;
                    Block::Main { col, levels }
                }
                DesignTerm::Interaction([x, y]) => {
                    let (a, la) = lookup(x)?;
                    let (b, lb) = lookup(y)?;
                    if a == b {
                        return Err(Error::Config(format!("interaction of `{x}` with itself")));
                    }
                    Block::Interaction { a, la, b, lb }
                }
            };
            let w = block.width();
            blocks.push((d, block));
            d += w;
        }
        Ok(Self { terms: all, blocks, d })
    }

    /// Intercept plus the main effect of every covariate column.
    pub fn main_effects(schemas: &[VariableSchema], covariates: std::ops::Range<usize>) -> Self {
        let terms: Vec<_> = covariates.clone().map(|c| DesignTerm::Main(schemas[c].name.clone())).collect();
        Self::resolve(&terms, schemas, covariates).expect("covariate columns resolve")
    }

    /// Design length d.
    pub fn len(&self) -> usize {
        self.d
    }

    pub fn is_empty(&self) -> bool {
        self.d == 0
    }

    pub fn terms(&self) -> &[DesignTerm] {
        &self.terms
    }

    /// Whether the design vector depends on column `col`.
    pub fn uses(&self, col: usize) -> bool {
        self.blocks.iter().any(|(_, b)| b.uses(col))
    }

    /// Write D(x) for a full data row (codes indexed by column) into `out`.
    pub fn fill(&self, row: &[u16], out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.d);
        out.fill(0.0);
        for (off, block) in &self.blocks {
            match *block {
                Block::Intercept => out[*off] = 1.0,
                Block::Main { col, .. } => {
                    let v = row[col] as usize;
                    if v >= 2 {
                        out[off + v - 2] = 1.0;
                    }
                }
                Block::Interaction { a, b, lb, .. } => {
                    let (va, vb) = (row[a] as usize, row[b] as usize);
                    if va >= 2 && vb >= 2 {
                        out[off + (va - 2) * (lb - 1) + (vb - 2)] = 1.0;
                    }
                }
            }
        }
    }

    pub fn vector(&self, row: &[u16]) -> Vec<f64> {
        let mut out = vec![0.0; self.d];
        self.fill(row, &mut out);
        out
    }
}

/// D(x) for a row of codes under `terms`; convenience wrapper around [`Design`].
pub fn build_design_vector(row: &[u16], terms: &[DesignTerm], schemas: &[VariableSchema]) -> Result<Vec<f64>> {
    let design = Design::resolve(terms, schemas, 0..schemas.len())?;
    Ok(design.vector(row))
}
