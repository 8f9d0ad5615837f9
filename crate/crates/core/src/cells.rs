//! Estimand cells: marginal, bivariate and conditional probabilities of category codes.

use std::fmt::Write as _;

use crate::data::{CompletedDataset, VariableSchema};
use crate::error::{Error, Result};

/// Assignment of a level to a column.
pub type Term = (usize, u16);

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CellSpec {
    /// P(all terms hold).
    Joint(Vec<Term>),
    /// P(target | given).
    Conditional { target: Vec<Term>, given: Vec<Term> },
}

fn check_terms(terms: &[Term], schemas: &[VariableSchema]) -> Result<()> {
    for &(c, v) in terms {
        let s = schemas.get(c).ok_or_else(|| Error::UnknownColumn(format!("column {c}")))?;
        if v < 1 || v as usize > s.levels {
            return Err(Error::InvalidArgument(format!("level {v} out of range for `{}`", s.name)));
        }
    }
    let mut cols: Vec<usize> = terms.iter().map(|t| t.0).collect();
    cols.sort_unstable();
    if cols.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::InvalidArgument("a column appears twice in one cell".into()));
    }
    Ok(())
}

fn parse_terms(s: &str, schemas: &[VariableSchema]) -> Result<Vec<Term>> {
    s.split(',')
        .map(|t| {
            let (name, level) = t
                .split_once('=')
                .ok_or_else(|| Error::InvalidArgument(format!("cell term `{t}` is not name=level")))?;
            let col = schemas
                .iter()
                .position(|x| x.name == name.trim())
                .ok_or_else(|| Error::UnknownColumn(name.trim().to_string()))?;
            let level = level.trim().parse().map_err(|_| Error::InvalidArgument(format!("bad level in `{t}`")))?;
            Ok((col, level))
        })
        .collect()
}

impl CellSpec {
    pub fn validate(&self, schemas: &[VariableSchema]) -> Result<()> {
        match self {
            CellSpec::Joint(t) if t.is_empty() => Err(Error::InvalidArgument("empty cell".into())),
            CellSpec::Joint(t) => check_terms(t, schemas),
            CellSpec::Conditional { target, given } => {
                if target.is_empty() || given.is_empty() {
                    return Err(Error::InvalidArgument("conditional cell needs target and condition".into()));
                }
                let all: Vec<Term> = target.iter().chain(given).copied().collect();
                check_terms(&all, schemas)
            }
        }
    }

    /// Parse `a=1,b=2` or `a=1|b=2,c=1`.
    pub fn parse(s: &str, schemas: &[VariableSchema]) -> Result<Self> {
        let spec = match s.split_once('|') {
            Some((t, g)) => CellSpec::Conditional { target: parse_terms(t, schemas)?, given: parse_terms(g, schemas)? },
            None => CellSpec::Joint(parse_terms(s, schemas)?),
        };
        spec.validate(schemas)?;
        Ok(spec)
    }

    /// Stable identifier, the inverse of [`CellSpec::parse`].
    pub fn id(&self, schemas: &[VariableSchema]) -> String {
        let fmt = |terms: &[Term]| {
            let mut out = String::new();
            for (k, &(c, v)) in terms.iter().enumerate() {
                if k > 0 {
                    out.push(',');
                }
                let _ = write!(out, "{}={v}", schemas[c].name);
            }
            out
        };
        match self {
            CellSpec::Joint(t) => fmt(t),
            CellSpec::Conditional { target, given } => format!("{}|{}", fmt(target), fmt(given)),
        }
    }

    /// Columns referenced, target first.
    pub fn columns(&self) -> Vec<usize> {
        match self {
            CellSpec::Joint(t) => t.iter().map(|x| x.0).collect(),
            CellSpec::Conditional { target, given } => target.iter().chain(given).map(|x| x.0).collect(),
        }
    }

    /// Proportion and its denominator (n, or the count of the condition).
    pub fn evaluate(&self, data: &CompletedDataset) -> (f64, usize) {
        let hits = |terms: &[Term], row: &[u16]| terms.iter().all(|&(c, v)| row[c] == v);
        match self {
            CellSpec::Joint(t) => {
                let k = (0..data.n()).filter(|&i| hits(t, data.row(i))).count();
                (k as f64 / data.n() as f64, data.n())
            }
            CellSpec::Conditional { target, given } => {
                let (mut num, mut den) = (0usize, 0usize);
                for i in 0..data.n() {
                    let row = data.row(i);
                    if hits(given, row) {
                        den += 1;
                        num += usize::from(hits(target, row));
                    }
                }
                (if den == 0 { 0.0 } else { num as f64 / den as f64 }, den)
            }
        }
    }
}

/// Every level of every column in `cols`.
pub fn marginal_cells(schemas: &[VariableSchema], cols: &[usize]) -> Vec<CellSpec> {
    cols.iter().flat_map(|&c| (1..=schemas[c].levels as u16).map(move |v| CellSpec::Joint(vec![(c, v)]))).collect()
}

/// Every level combination of every unordered pair in `cols`.
pub fn bivariate_cells(schemas: &[VariableSchema], cols: &[usize]) -> Vec<CellSpec> {
    let mut out = Vec::new();
    for (k, &a) in cols.iter().enumerate() {
        for &b in &cols[k + 1..] {
            for va in 1..=schemas[a].levels as u16 {
                for vb in 1..=schemas[b].levels as u16 {
                    out.push(CellSpec::Joint(vec![(a, va), (b, vb)]));
                }
            }
        }
    }
    out
}

/// Every level combination across two disjoint column sets (one column from each).
pub fn cross_cells(schemas: &[VariableSchema], left: &[usize], right: &[usize]) -> Vec<CellSpec> {
    let mut out = Vec::new();
    for &a in left {
        for &b in right {
            for va in 1..=schemas[a].levels as u16 {
                for vb in 1..=schemas[b].levels as u16 {
                    out.push(CellSpec::Joint(vec![(a, va), (b, vb)]));
                }
            }
        }
    }
    out
}

/// Relative frequency of each cell.
pub fn empirical_cell_probs(data: &CompletedDataset, cells: &[CellSpec]) -> Vec<f64> {
    cells.iter().map(|c| c.evaluate(data).0).collect()
}
