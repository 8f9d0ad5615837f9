//! Data-generating process for the simulation study: two standard-normal
//! factors, multinomial-logit nominals and ordered-logit ordinals with
//! 2- and 3-way interaction terms. Coefficients live in a versioned JSON file.

use std::collections::HashMap;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::scenario::FocusSize;
use crate::cells::{bivariate_cells, cross_cells, marginal_cells, CellSpec};
use crate::data::{canonical_schema, Dataset, VarGroup, VarKind, VariableSchema};
use crate::density::CellTable;
use crate::dist;
use crate::error::{Error, Result};

const V1: &str = include_str!("generator_v1.json");

/// Largest dense joint table the quadrature truth will build.
const MAX_DENSE: usize = 20_000_000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TermSpec {
    /// Zero, one or two earlier variables whose dummy products select the coefficient.
    #[serde(default)]
    pub parents: Vec<String>,
    /// Multiplies the term by factor 0 or 1.
    #[serde(default)]
    pub factor: Option<usize>,
    /// Predictor-major: predictor p, parent combination c at index p·combos + c.
    pub coef: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VarSpec {
    pub name: String,
    pub kind: VarKind,
    pub levels: usize,
    pub group: VarGroup,
    pub focus_sizes: Vec<FocusSize>,
    #[serde(default)]
    pub thresholds: Option<Vec<f64>>,
    pub terms: Vec<TermSpec>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorSpec {
    pub version: u32,
    pub quadrature_nodes: usize,
    /// Generation order; parents precede children.
    pub variables: Vec<VarSpec>,
}

impl GeneratorSpec {
    pub fn v1() -> Self {
        serde_json::from_str(V1).expect("embedded generator spec is valid")
    }

    /// Copy with every non-constant term set to zero.
    pub fn independent(&self) -> Self {
        let mut s = self.clone();
        for v in &mut s.variables {
            for t in &mut v.terms {
                if !t.parents.is_empty() || t.factor.is_some() {
                    t.coef.iter_mut().for_each(|c| *c = 0.0);
                }
            }
        }
        s
    }
}

#[derive(Clone, Debug)]
struct Term {
    parents: Vec<usize>,
    factor: Option<usize>,
    combos: usize,
    coef: Vec<f64>,
}

#[derive(Clone, Debug)]
struct Var {
    kind: VarKind,
    levels: usize,
    thresholds: Vec<f64>,
    terms: Vec<Term>,
    /// Union of term parents, ascending.
    parents: Vec<usize>,
}

/// A generator resolved for one focus size.
#[derive(Clone, Debug)]
pub struct Generator {
    vars: Vec<Var>,
    schemas: Vec<VariableSchema>,
    /// Canonical column of each generated variable.
    column: Vec<usize>,
    nodes: usize,
}

fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

impl Generator {
    pub fn new(spec: &GeneratorSpec, focus: FocusSize) -> Result<Self> {
        let chosen: Vec<&VarSpec> = spec.variables.iter().filter(|v| v.focus_sizes.contains(&focus)).collect();
        let index: HashMap<&str, usize> = chosen.iter().enumerate().map(|(k, v)| (v.name.as_str(), k)).collect();
        let mut vars = Vec::with_capacity(chosen.len());
        for (k, v) in chosen.iter().enumerate() {
            let bad = |m: String| Error::Config(format!("generator variable `{}`: {m}", v.name));
            if v.levels < 2 {
                return Err(bad("needs at least two levels".into()));
            }
            let predictors = match v.kind {
                VarKind::Ordinal => 1,
                VarKind::Nominal => v.levels - 1,
            };
            let thresholds = match (v.kind, &v.thresholds) {
                (VarKind::Ordinal, Some(t)) if t.len() == v.levels - 1 && t.windows(2).all(|w| w[0] < w[1]) => {
                    t.clone()
                }
                (VarKind::Ordinal, _) => return Err(bad("needs increasing thresholds, one fewer than levels".into())),
                (VarKind::Nominal, None) => Vec::new(),
                (VarKind::Nominal, Some(_)) => return Err(bad("nominal variables take no thresholds".into())),
            };
            let mut terms = Vec::with_capacity(v.terms.len());
            for t in &v.terms {
                if t.parents.len() > 2 || t.factor.is_some_and(|f| f > 1) {
                    return Err(bad("terms take at most two parents and factor 0 or 1".into()));
                }
                let parents: Vec<usize> = t
                    .parents
                    .iter()
                    .map(|p| match index.get(p.as_str()) {
                        Some(&i) if i < k => Ok(i),
                        _ => Err(bad(format!("parent `{p}` is not an earlier variable"))),
                    })
                    .collect::<Result<_>>()?;
                let combos: usize = parents.iter().map(|&p| chosen[p].levels - 1).product();
                if t.coef.len() != predictors * combos {
                    return Err(bad(format!("term needs {} coefficients", predictors * combos)));
                }
                terms.push(Term { parents, factor: t.factor, combos, coef: t.coef.clone() });
            }
            let mut parents: Vec<usize> = terms.iter().flat_map(|t| t.parents.iter().copied()).collect();
            parents.sort_unstable();
            parents.dedup();
            vars.push(Var { kind: v.kind, levels: v.levels, thresholds, terms, parents });
        }
        let raw: Vec<VariableSchema> =
            chosen.iter().map(|v| VariableSchema::new(v.name.clone(), v.kind, v.levels, v.group)).collect();
        let schemas = canonical_schema(&raw)?;
        let column = chosen.iter().map(|v| schemas.iter().position(|s| s.name == v.name).unwrap()).collect();
        Ok(Self { vars, schemas, column, nodes: spec.quadrature_nodes.max(2) })
    }

    pub fn v1(focus: FocusSize) -> Self {
        Self::new(&GeneratorSpec::v1(), focus).expect("embedded generator spec resolves")
    }

    /// Canonical schemas of the generated dataset.
    pub fn schemas(&self) -> &[VariableSchema] {
        &self.schemas
    }

    /// P(var k = · | factors, earlier values in generation order).
    fn conditional(&self, k: usize, f: [f64; 2], vals: &[u16], out: &mut [f64]) {
        let v = &self.vars[k];
        let predictors = if v.kind == VarKind::Ordinal { 1 } else { v.levels - 1 };
        let mut eta = [0.0f64; 16];
        let eta = &mut eta[..predictors];
        for t in &v.terms {
            let mut combo = 0;
            let mut active = true;
            for &p in &t.parents {
                let x = vals[p] as usize;
                if x == 1 {
                    active = false;
                    break;
                }
                combo = combo * (self.vars[p].levels - 1) + (x - 2);
            }
            if !active {
                continue;
            }
            let scale = t.factor.map_or(1.0, |j| f[j]);
            for (q, e) in eta.iter_mut().enumerate() {
                *e += t.coef[q * t.combos + combo] * scale;
            }
        }
        match v.kind {
            VarKind::Ordinal => {
                let mut prev = 0.0;
                for (l, o) in out.iter_mut().enumerate().take(v.levels) {
                    let cum = if l + 1 == v.levels { 1.0 } else { logistic(v.thresholds[l] - eta[0]) };
                    *o = cum - prev;
                    prev = cum;
                }
            }
            VarKind::Nominal => {
                let max = eta.iter().copied().fold(0.0f64, f64::max);
                out[0] = (-max).exp();
                for l in 1..v.levels {
                    out[l] = (eta[l - 1] - max).exp();
                }
                let s: f64 = out[..v.levels].iter().sum();
                out[..v.levels].iter_mut().for_each(|x| *x /= s);
            }
        }
    }

    /// One unit in generation order.
    fn draw_unit<R: Rng + ?Sized>(&self, rng: &mut R, vals: &mut [u16]) {
        let f = [rng.sample::<f64, _>(StandardNormal), rng.sample::<f64, _>(StandardNormal)];
        let mut probs = [0.0f64; 64];
        for k in 0..self.vars.len() {
            let l = self.vars[k].levels;
            self.conditional(k, f, vals, &mut probs[..l]);
            vals[k] = dist::categorical(rng, &probs[..l]) as u16 + 1;
        }
    }

    /// A complete dataset of `n` units in canonical column order.
    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<Dataset> {
        let p = self.vars.len();
        let mut values = vec![0u16; n * p];
        let mut gen = vec![0u16; p];
        for i in 0..n {
            self.draw_unit(rng, &mut gen);
            for (k, &c) in self.column.iter().enumerate() {
                values[i * p + c] = gen[k];
            }
        }
        let rows: Vec<Vec<Option<u16>>> = values.chunks(p).map(|r| r.iter().map(|&v| Some(v)).collect()).collect();
        Dataset::from_rows(self.schemas.clone(), &rows)
    }

    fn a_cols(&self) -> Vec<usize> {
        (0..self.schemas.len()).filter(|&c| self.schemas[c].group == VarGroup::Focus).collect()
    }

    fn b_cols(&self) -> Vec<usize> {
        (0..self.schemas.len()).filter(|&c| self.schemas[c].group == VarGroup::Remainder).collect()
    }

    /// Dense joint pmf over generation-order configurations (first variable fastest),
    /// integrating the factors by tensor Gauss–Hermite quadrature.
    fn dense_joint(&self) -> Result<Vec<f64>> {
        let size = self.vars.iter().try_fold(1usize, |a, v| a.checked_mul(v.levels));
        let size = match size {
            Some(s) if s <= MAX_DENSE => s,
            _ => return Err(Error::InvalidArgument("generator joint table too large for quadrature".into())),
        };
        let (x, w) = gauss_hermite(self.nodes);
        let strides: Vec<usize> = self
            .vars
            .iter()
            .scan(1usize, |s, v| {
                let out = *s;
                *s *= v.levels;
                Some(out)
            })
            .collect();
        // parent configuration of every prefix cell, shared by all nodes
        let mut len = 1;
        let mut pcs: Vec<Vec<u32>> = Vec::with_capacity(self.vars.len());
        for v in &self.vars {
            let pc = if v.parents.is_empty() {
                Vec::new()
            } else {
                (0..len)
                    .map(|idx| {
                        let mut pc = 0;
                        let mut mult = 1;
                        for &p in &v.parents {
                            pc += ((idx / strides[p]) % self.vars[p].levels) * mult;
                            mult *= self.vars[p].levels;
                        }
                        pc as u32
                    })
                    .collect()
            };
            pcs.push(pc);
            len *= v.levels;
        }
        let mut joint = vec![0.0; size];
        let mut cur = vec![0.0; size];
        let mut next = vec![0.0; size];
        let mut vals = vec![1u16; self.vars.len()];
        let mut probs = [0.0f64; 64];
        let mut table = Vec::new();
        for (a, &wa) in x.iter().zip(&w) {
            for (b, &wb) in x.iter().zip(&w) {
                let f = [*a, *b];
                cur[0] = 1.0;
                let mut len = 1;
                for (k, v) in self.vars.iter().enumerate() {
                    let levels = v.levels;
                    let pcount: usize = v.parents.iter().map(|&p| self.vars[p].levels).product();
                    table.clear();
                    table.resize(pcount * levels, 0.0);
                    for pc in 0..pcount {
                        let mut rest = pc;
                        for &p in &v.parents {
                            vals[p] = (rest % self.vars[p].levels) as u16 + 1;
                            rest /= self.vars[p].levels;
                        }
                        self.conditional(k, f, &vals, &mut probs[..levels]);
                        table[pc * levels..(pc + 1) * levels].copy_from_slice(&probs[..levels]);
                    }
                    let (src, dst) = (&cur[..len], &mut next[..len * levels]);
                    for l in 0..levels {
                        let out = &mut dst[l * len..(l + 1) * len];
                        if pcs[k].is_empty() {
                            let q = table[l];
                            out.iter_mut().zip(src).for_each(|(o, s)| *o = s * q);
                        } else {
                            for ((o, s), &pc) in out.iter_mut().zip(src).zip(&pcs[k]) {
                                *o = s * table[pc as usize * levels + l];
                            }
                        }
                    }
                    len *= levels;
                    std::mem::swap(&mut cur, &mut next);
                }
                let wt = wa * wb;
                for (j, c) in joint.iter_mut().zip(&cur) {
                    *j += wt * c;
                }
            }
        }
        Ok(joint)
    }

    /// Truth by quadrature over the factors and exact enumeration of the categories.
    pub fn truth(&self, ab_floor: f64) -> Result<TruthTable> {
        let joint = self.dense_joint()?;
        let p = self.vars.len();
        let mut builder = TruthBuilder::new(self, ab_floor, Accumulate::Exact);
        let mut key = vec![1u16; p];
        for (idx, &pr) in joint.iter().enumerate() {
            let mut rest = idx;
            for (k, v) in self.vars.iter().enumerate() {
                key[self.column[k]] = (rest % v.levels) as u16 + 1;
                rest /= v.levels;
            }
            builder.add(&key, pr);
        }
        Ok(builder.finish(Provenance::Quadrature { nodes_per_factor: self.nodes }, 1.0))
    }

    /// Independent Monte Carlo truth from `draws` simulated units.
    pub fn truth_monte_carlo<R: Rng + ?Sized>(&self, draws: usize, ab_floor: f64, rng: &mut R) -> TruthTable {
        let p = self.vars.len();
        let mut builder = TruthBuilder::new(self, ab_floor, Accumulate::Counts);
        let mut gen = vec![0u16; p];
        let mut key = vec![0u16; p];
        for _ in 0..draws {
            self.draw_unit(rng, &mut gen);
            for (k, &c) in self.column.iter().enumerate() {
                key[c] = gen[k];
            }
            builder.add(&key, 1.0);
        }
        builder.finish(Provenance::MonteCarlo { draws }, draws as f64)
    }
}

/// Probabilists' Gauss–Hermite rule for E[g(Z)], Z ~ N(0, 1) (Golub–Welsch).
pub fn gauss_hermite(n: usize) -> (Vec<f64>, Vec<f64>) {
    let j = DMatrix::from_fn(n, n, |a, b| if a.abs_diff(b) == 1 { (a.max(b) as f64).sqrt() } else { 0.0 });
    let eig = SymmetricEigen::new(j);
    let mut pairs: Vec<(f64, f64)> = (0..n).map(|k| (eig.eigenvalues[k], eig.eigenvectors[(0, k)].powi(2))).collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let total: f64 = pairs.iter().map(|p| p.1).sum();
    (pairs.iter().map(|p| p.0).collect(), pairs.iter().map(|p| p.1 / total).collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Quadrature { nodes_per_factor: usize },
    MonteCarlo { draws: usize },
}

/// Which variables an estimand involves.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimandClass {
    AMarginal,
    BMarginal,
    AOrdinalOrdinal,
    AOrdinalNominal,
    ANominalNominal,
    /// A-B pair whose A variable is ordinal.
    AbOrdinal,
    /// A-B pair whose A variable is nominal.
    AbNominal,
    BB,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimand {
    pub id: String,
    #[serde(skip)]
    pub spec: Option<CellSpec>,
    pub class: EstimandClass,
    pub truth: f64,
    /// Monte Carlo standard error; 0 for quadrature.
    pub std_error: f64,
}

/// True distribution tables and estimand values for one generator.
#[derive(Clone, Debug)]
pub struct TruthTable {
    pub provenance: Provenance,
    pub schemas: Vec<VariableSchema>,
    pub a_cols: Vec<usize>,
    pub b_cols: Vec<usize>,
    pub p_a: CellTable,
    pub p_b: CellTable,
    /// Full joint restricted to cells at or above `ab_floor`.
    pub p_ab: CellTable,
    pub ab_floor: f64,
    pub estimands: Vec<Estimand>,
}

impl TruthTable {
    pub fn specs(&self) -> Vec<CellSpec> {
        self.estimands.iter().map(|e| e.spec.clone().expect("spec retained")).collect()
    }
}

/// Estimands in a fixed order: A marginals, B marginals, A-A pairs, A-B pairs, B-B pairs.
pub fn estimand_specs(schemas: &[VariableSchema]) -> Vec<(CellSpec, EstimandClass)> {
    let a: Vec<usize> = (0..schemas.len()).filter(|&c| schemas[c].group == VarGroup::Focus).collect();
    let b: Vec<usize> = (0..schemas.len()).filter(|&c| schemas[c].group == VarGroup::Remainder).collect();
    let ordinal = |c: usize| schemas[c].kind == VarKind::Ordinal;
    let mut out = Vec::new();
    out.extend(marginal_cells(schemas, &a).into_iter().map(|c| (c, EstimandClass::AMarginal)));
    out.extend(marginal_cells(schemas, &b).into_iter().map(|c| (c, EstimandClass::BMarginal)));
    for c in bivariate_cells(schemas, &a) {
        let cols = c.columns();
        let class = match (ordinal(cols[0]), ordinal(cols[1])) {
            (true, true) => EstimandClass::AOrdinalOrdinal,
            (false, false) => EstimandClass::ANominalNominal,
            _ => EstimandClass::AOrdinalNominal,
        };
        out.push((c, class));
    }
    for c in cross_cells(schemas, &a, &b) {
        let class = if ordinal(c.columns()[0]) { EstimandClass::AbOrdinal } else { EstimandClass::AbNominal };
        out.push((c, class));
    }
    out.extend(bivariate_cells(schemas, &b).into_iter().map(|c| (c, EstimandClass::BB)));
    out
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Accumulate {
    /// Each tuple arrives once with its probability.
    Exact,
    /// Tuples arrive repeatedly with unit weight.
    Counts,
}

fn dense_index(schemas: &[VariableSchema], cols: &[usize], key: &[u16]) -> usize {
    cols.iter().rev().fold(0, |acc, &c| acc * schemas[c].levels + key[c] as usize - 1)
}

struct TruthBuilder {
    schemas: Vec<VariableSchema>,
    a_cols: Vec<usize>,
    b_cols: Vec<usize>,
    ab_floor: f64,
    mode: Accumulate,
    /// Dense P(A) and P(B), first listed column fastest.
    dense_a: Vec<f64>,
    dense_b: Vec<f64>,
    p_ab: CellTable,
    counts: HashMap<Vec<u16>, f64>,
    uni: Vec<Vec<f64>>,
    /// Pair tables for c1 < c2, indexed by `pair_index`.
    pairs: Vec<Vec<f64>>,
    pair_index: Vec<Vec<usize>>,
}

impl TruthBuilder {
    fn new(g: &Generator, ab_floor: f64, mode: Accumulate) -> Self {
        let schemas = g.schemas.clone();
        let p = schemas.len();
        let names = |cols: &[usize]| cols.iter().map(|&c| schemas[c].name.clone()).collect::<Vec<_>>();
        let (a_cols, b_cols) = (g.a_cols(), g.b_cols());
        let mut pair_index = vec![vec![usize::MAX; p]; p];
        let mut pairs = Vec::new();
        for c1 in 0..p {
            for c2 in c1 + 1..p {
                pair_index[c1][c2] = pairs.len();
                pairs.push(vec![0.0; schemas[c1].levels * schemas[c2].levels]);
            }
        }
        let size = |cols: &[usize]| cols.iter().map(|&c| schemas[c].levels).product::<usize>();
        Self {
            dense_a: vec![0.0; size(&a_cols)],
            dense_b: vec![0.0; size(&b_cols)],
            p_ab: CellTable::new(names(&(0..p).collect::<Vec<_>>())),
            uni: schemas.iter().map(|s| vec![0.0; s.levels]).collect(),
            counts: HashMap::new(),
            mode,
            a_cols,
            b_cols,
            ab_floor,
            pairs,
            pair_index,
            schemas,
        }
    }

    fn add(&mut self, key: &[u16], w: f64) {
        if w == 0.0 {
            return;
        }
        let p = key.len();
        let a = dense_index(&self.schemas, &self.a_cols, key);
        self.dense_a[a] += w;
        let b = dense_index(&self.schemas, &self.b_cols, key);
        self.dense_b[b] += w;
        match self.mode {
            Accumulate::Exact if w >= self.ab_floor => self.p_ab.add(key.to_vec(), w),
            Accumulate::Exact => {}
            Accumulate::Counts => *self.counts.entry(key.to_vec()).or_insert(0.0) += w,
        }
        for c1 in 0..p {
            self.uni[c1][key[c1] as usize - 1] += w;
            for c2 in c1 + 1..p {
                let idx = (key[c1] as usize - 1) * self.schemas[c2].levels + key[c2] as usize - 1;
                self.pairs[self.pair_index[c1][c2]][idx] += w;
            }
        }
    }

    fn finish(mut self, provenance: Provenance, total: f64) -> TruthTable {
        let scale = 1.0 / total;
        let sparse = |cols: &[usize], dense: &[f64]| {
            let mut out = CellTable::new(cols.iter().map(|&c| self.schemas[c].name.clone()).collect());
            let mut key = vec![1u16; cols.len()];
            for &v in dense {
                if v > 0.0 {
                    out.add(key.clone(), v * scale);
                }
                for (k, &c) in key.iter_mut().zip(cols) {
                    if (*k as usize) < self.schemas[c].levels {
                        *k += 1;
                        break;
                    }
                    *k = 1;
                }
            }
            out
        };
        let p_a = sparse(&self.a_cols, &self.dense_a);
        let p_b = sparse(&self.b_cols, &self.dense_b);
        if self.mode == Accumulate::Counts {
            let mut entries: Vec<(Vec<u16>, f64)> = self.counts.drain().collect();
            entries.sort_unstable_by(|a, b| a.0.cmp(&b.0));
            for (k, v) in entries {
                if v * scale >= self.ab_floor {
                    self.p_ab.add(k, v * scale);
                }
            }
        }
        let mc = self.mode == Accumulate::Counts;
        let se = |q: f64| if mc { (q * (1.0 - q) / total).sqrt() } else { 0.0 };
        let estimands = estimand_specs(&self.schemas)
            .into_iter()
            .map(|(spec, class)| {
                let CellSpec::Joint(terms) = &spec else { unreachable!("estimands are joint cells") };
                let q = match terms.as_slice() {
                    [(c, v)] => self.uni[*c][*v as usize - 1] * scale,
                    [a, b] => {
                        let ((c1, v1), (c2, v2)) = if a.0 < b.0 { (*a, *b) } else { (*b, *a) };
                        let idx = (v1 as usize - 1) * self.schemas[c2].levels + v2 as usize - 1;
                        self.pairs[self.pair_index[c1][c2]][idx] * scale
                    }
                    _ => unreachable!("estimands are marginal or bivariate"),
                };
                Estimand { id: spec.id(&self.schemas), spec: Some(spec), class, truth: q, std_error: se(q) }
            })
            .collect();
        TruthTable {
            provenance,
            schemas: self.schemas,
            a_cols: self.a_cols,
            b_cols: self.b_cols,
            p_a,
            p_b,
            p_ab: self.p_ab,
            ab_floor: self.ab_floor,
            estimands,
        }
    }
}
