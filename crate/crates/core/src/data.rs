//! Categorical datasets, variable schemas and CSV/JSON ingestion.
//!
//! Columns are stored in canonical order: ordinal focus variables first,
//! nominal focus variables second, remainder variables last. Category codes
//! are 1-based; masked cells hold [`MISSING`] and are never read as data.

use std::fmt;
use std::fs::File;
use std::io::{Read, Write};
use std::ops::{Deref, Range};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Sentinel stored in masked cells.
pub const MISSING: u16 = 0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VarKind {
    Ordinal,
    Nominal,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VarGroup {
    Focus,
    Remainder,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct VariableSchema {
    pub name: String,
    pub kind: VarKind,
    pub levels: usize,
    pub group: VarGroup,
}

impl VariableSchema {
    pub fn new(name: impl Into<String>, kind: VarKind, levels: usize, group: VarGroup) -> Self {
        Self { name: name.into(), kind, levels, group }
    }

    fn rank(&self) -> u8 {
        match (self.group, self.kind) {
            (VarGroup::Focus, VarKind::Ordinal) => 0,
            (VarGroup::Focus, VarKind::Nominal) => 1,
            (VarGroup::Remainder, _) => 2,
        }
    }
}

/// Validate a schema list and return it in canonical column order.
pub fn canonical_schema(schemas: &[VariableSchema]) -> Result<Vec<VariableSchema>> {
    if schemas.is_empty() {
        return Err(Error::Schema("schema lists no variables".into()));
    }
    let mut seen = std::collections::HashSet::new();
    for s in schemas {
        if s.levels < 2 {
            return Err(Error::Schema(format!("variable `{}` has {} levels; need at least 2", s.name, s.levels)));
        }
        if s.levels > u16::MAX as usize {
            return Err(Error::Schema(format!("variable `{}` has too many levels", s.name)));
        }
        if !seen.insert(s.name.as_str()) {
            return Err(Error::Schema(format!("duplicate variable `{}`", s.name)));
        }
    }
    let mut out = schemas.to_vec();
    out.sort_by_key(VariableSchema::rank);
    Ok(out)
}

/// Read a schema file: a JSON array of `{name, kind, levels, group}`.
pub fn load_schema(path: impl AsRef<Path>) -> Result<Vec<VariableSchema>> {
    let path = path.as_ref();
    let mut text = String::new();
    File::open(path).and_then(|mut f| f.read_to_string(&mut text)).map_err(|e| Error::io(path, e))?;
    let schemas: Vec<VariableSchema> = serde_json::from_str(&text)?;
    canonical_schema(&schemas)
}

/// Column index sets for the three variable blocks.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct PartitionedView {
    pub ordinal_focus: Range<usize>,
    pub nominal_focus: Range<usize>,
    pub remainder: Range<usize>,
}

impl PartitionedView {
    /// Number of ordinal focus variables (p_Ac).
    pub fn p_ac(&self) -> usize {
        self.ordinal_focus.len()
    }

    /// Number of focus variables (p_A).
    pub fn p_a(&self) -> usize {
        self.nominal_focus.end
    }

    pub fn p(&self) -> usize {
        self.remainder.end
    }

    /// The single-focus-block layout in which every non-ordinal-focus column
    /// joins the nominal focus block.
    pub fn merged(&self) -> PartitionedView {
        PartitionedView {
            ordinal_focus: self.ordinal_focus.clone(),
            nominal_focus: self.nominal_focus.start..self.remainder.end,
            remainder: self.remainder.end..self.remainder.end,
        }
    }
}

/// Rectangular categorical table with a missingness mask.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Dataset {
    schemas: Vec<VariableSchema>,
    n: usize,
    values: Vec<u16>,
    mask: Vec<bool>,
}

impl Dataset {
    /// Build from row-major codes; `None` marks a missing cell. Columns must
    /// already follow `schemas`, which must be canonical.
    pub fn from_rows(schemas: Vec<VariableSchema>, rows: &[Vec<Option<u16>>]) -> Result<Self> {
        let canon = canonical_schema(&schemas)?;
        if canon != schemas {
            return Err(Error::Schema("columns are not in canonical order".into()));
        }
        let p = schemas.len();
        let mut values = Vec::with_capacity(rows.len() * p);
        let mut mask = Vec::with_capacity(rows.len() * p);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != p {
                return Err(Error::Schema(format!("row {} has {} cells, expected {p}", i + 1, row.len())));
            }
            for (j, cell) in row.iter().enumerate() {
                match *cell {
                    Some(v) => {
                        check_code(i, &schemas[j], i64::from(v))?;
                        values.push(v);
                        mask.push(false);
                    }
                    None => {
                        values.push(MISSING);
                        mask.push(true);
                    }
                }
            }
        }
        Self::from_parts(schemas, values, mask)
    }

    pub(crate) fn from_parts(schemas: Vec<VariableSchema>, values: Vec<u16>, mask: Vec<bool>) -> Result<Self> {
        let p = schemas.len();
        if p == 0 || !values.len().is_multiple_of(p) || values.len() != mask.len() {
            return Err(Error::Schema("inconsistent dataset dimensions".into()));
        }
        let n = values.len() / p;
        if n == 0 {
            return Err(Error::Schema("dataset has no rows".into()));
        }
        Ok(Self { schemas, n, values, mask })
    }

    pub fn schemas(&self) -> &[VariableSchema] {
        &self.schemas
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> usize {
        self.schemas.len()
    }

    /// Code at (row, col), or `None` when masked.
    pub fn get(&self, row: usize, col: usize) -> Option<u16> {
        let k = row * self.p() + col;
        (!self.mask[k]).then_some(self.values[k])
    }

    pub fn is_missing(&self, row: usize, col: usize) -> bool {
        self.mask[row * self.p() + col]
    }

    /// Raw row including sentinels for masked cells.
    pub fn row(&self, row: usize) -> &[u16] {
        let p = self.p();
        &self.values[row * p..(row + 1) * p]
    }

    pub fn values(&self) -> &[u16] {
        &self.values
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    pub fn missing_count(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }

    pub fn column_index(&self, name: &str) -> Result<usize> {
        self.schemas.iter().position(|s| s.name == name).ok_or_else(|| Error::UnknownColumn(name.to_string()))
    }

    /// Copy with the given cells masked. `masked(i, j)` is queried for every cell.
    pub fn with_mask(&self, mut masked: impl FnMut(usize, usize) -> bool) -> Dataset {
        let p = self.p();
        let mut out = self.clone();
        for i in 0..self.n {
            for j in 0..p {
                if masked(i, j) {
                    out.mask[i * p + j] = true;
                    out.values[i * p + j] = MISSING;
                }
            }
        }
        out
    }

    /// Fill every masked cell from `values` (row-major, full table).
    pub fn complete_with(&self, values: &[u16]) -> Result<CompletedDataset> {
        if values.len() != self.values.len() {
            return Err(Error::InvalidArgument("completion has the wrong size".into()));
        }
        let mut out = self.clone();
        for (k, &m) in self.mask.iter().enumerate() {
            if m {
                out.values[k] = values[k];
                out.mask[k] = false;
            } else if values[k] != self.values[k] {
                return Err(Error::InvalidArgument("completion alters an observed cell".into()));
            }
        }
        for i in 0..self.n {
            for (j, s) in self.schemas.iter().enumerate() {
                check_code(i, s, i64::from(out.values[i * self.p() + j]))?;
            }
        }
        Ok(CompletedDataset(out))
    }

    /// Partition columns into ordinal-focus, nominal-focus and remainder blocks.
    pub fn partition(&self) -> Result<PartitionedView> {
        partition(&self.schemas)
    }

    pub fn partitioned(&self) -> PartitionedView {
        self.partition().expect("dataset schemas were validated")
    }
}

/// Index sets of the canonical blocks. Fails when there is no focus variable.
pub fn partition(schemas: &[VariableSchema]) -> Result<PartitionedView> {
    let count = |rank| schemas.iter().filter(|s| s.rank() == rank).count();
    let (a_c, a_n) = (count(0), count(1));
    if a_c + a_n == 0 {
        return Err(Error::Schema("at least one focus variable is required".into()));
    }
    Ok(PartitionedView { ordinal_focus: 0..a_c, nominal_focus: a_c..a_c + a_n, remainder: a_c + a_n..schemas.len() })
}

fn check_code(row: usize, schema: &VariableSchema, code: i64) -> Result<()> {
    if code < 1 || code as usize > schema.levels {
        return Err(Error::OutOfRange { row: row + 1, column: schema.name.clone(), code, levels: schema.levels });
    }
    Ok(())
}

/// A dataset with no masked cells.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CompletedDataset(Dataset);

impl CompletedDataset {
    pub fn new(data: Dataset) -> Result<Self> {
        if data.missing_count() > 0 {
            return Err(Error::InvalidArgument("dataset still has masked cells".into()));
        }
        Ok(Self(data))
    }

    pub fn into_inner(self) -> Dataset {
        self.0
    }

    pub fn value(&self, row: usize, col: usize) -> u16 {
        self.0.values[row * self.0.p() + col]
    }
}

impl Deref for CompletedDataset {
    type Target = Dataset;
    fn deref(&self) -> &Dataset {
        &self.0
    }
}

/// Load a CSV whose header names match `schemas` (any column order). Empty
/// cells and `NA` are missing. Columns are reordered canonically.
pub fn load_dataset(path: impl AsRef<Path>, schemas: &[VariableSchema]) -> Result<Dataset> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_dataset(file, schemas)
}

pub fn read_dataset<R: Read>(reader: R, schemas: &[VariableSchema]) -> Result<Dataset> {
    let canon = canonical_schema(schemas)?;
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let header = rdr.headers()?.clone();
    for h in header.iter() {
        if !canon.iter().any(|s| s.name == h) {
            return Err(Error::UnknownColumn(h.to_string()));
        }
    }
    // source column for each canonical column
    let source: Vec<usize> = canon
        .iter()
        .map(|s| {
            header
                .iter()
                .position(|h| h == s.name)
                .ok_or_else(|| Error::Schema(format!("column `{}` missing from file", s.name)))
        })
        .collect::<Result<_>>()?;
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let row = canon
            .iter()
            .zip(&source)
            .map(|(s, &c)| {
                let cell = rec.get(c).unwrap_or("");
                if cell.is_empty() || cell == "NA" {
                    return Ok(None);
                }
                let code: i64 = cell.parse().map_err(|_| Error::NotInteger {
                    row: i + 1,
                    column: s.name.clone(),
                    value: cell.to_string(),
                })?;
                check_code(i, s, code)?;
                Ok(Some(code as u16))
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    Dataset::from_rows(canon, &rows)
}

/// Write in canonical column order; masked cells become `NA`.
pub fn write_dataset<W: Write>(data: &Dataset, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(data.schemas.iter().map(|s| s.name.as_str()))?;
    let mut buf = Vec::with_capacity(data.p());
    for i in 0..data.n {
        buf.clear();
        for j in 0..data.p() {
            buf.push(match data.get(i, j) {
                Some(v) => v.to_string(),
                None => "NA".to_string(),
            });
        }
        w.write_record(&buf)?;
    }
    w.flush().map_err(|e| Error::io("<csv writer>", e))?;
    Ok(())
}

pub fn save_dataset(data: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_dataset(data, std::io::BufWriter::new(file))
}

impl fmt::Display for VarKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            VarKind::Ordinal => "ordinal",
            VarKind::Nominal => "nominal",
        })
    }
}
