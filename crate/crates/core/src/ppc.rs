//! Posterior predictive checks: replicated datasets drawn at retained parameter
//! snapshots, their statistics against the completed data, and imputed-versus-observed
//! frequency tables.

use std::io::Write;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cells::CellSpec;
use crate::data::{CompletedDataset, Dataset};
use crate::error::{Error, Result};
use crate::gibbs::simulate_values;
use crate::model::{Model, Params};
use crate::rng::substream;

/// Replicates requested when no count is given.
pub const DEFAULT_REPLICATES: usize = 25;

/// One statistic: its value on every replicate and on the completed data.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PPCStatistic {
    pub id: String,
    pub replicated: Vec<f64>,
    /// Mean over the completed datasets.
    pub completed: f64,
    /// Fraction of replicates below the completed value, ties counted half.
    pub tail_position: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PPCReport {
    pub replicates: usize,
    pub statistics: Vec<PPCStatistic>,
}

impl PPCReport {
    /// Share of statistics whose tail position is exactly 0 or 1.
    pub fn extreme_fraction(&self) -> f64 {
        if self.statistics.is_empty() {
            return 0.0;
        }
        let k = self.statistics.iter().filter(|s| s.tail_position == 0.0 || s.tail_position == 1.0).count();
        k as f64 / self.statistics.len() as f64
    }

    /// Replicate-by-statistic matrix, one row per replicate.
    pub fn write_matrix_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["replicate".to_string()];
        header.extend(self.statistics.iter().map(|s| s.id.clone()));
        w.write_record(&header)?;
        for r in 0..self.replicates {
            let mut row = vec![(r + 1).to_string()];
            row.extend(self.statistics.iter().map(|s| format!("{:.12e}", s.replicated[r])));
            w.write_record(&row)?;
        }
        w.flush().map_err(|e| Error::io("<ppc matrix>", e))
    }
}

/// Midrank position of `value` among `draws`; 0.5 when every draw ties.
pub fn tail_position(draws: &[f64], value: f64) -> f64 {
    if draws.is_empty() {
        return 0.5;
    }
    let below = draws.iter().filter(|&&d| d < value).count() as f64;
    let ties = draws.iter().filter(|&&d| d == value).count() as f64;
    (below + 0.5 * ties) / draws.len() as f64
}

/// `count` complete datasets of `n` rows, one per evenly spaced snapshot.
pub fn replicate_datasets<R: Rng + ?Sized>(
    model: &Model,
    snapshots: &[Params],
    n: usize,
    count: usize,
    rng: &mut R,
) -> Result<Vec<Dataset>> {
    if count == 0 || n == 0 {
        return Err(Error::InvalidArgument("replicate count and size must be positive".into()));
    }
    if snapshots.len() < count {
        return Err(Error::InvalidArgument(format!(
            "{} parameter snapshots retained, {count} replicates requested",
            snapshots.len()
        )));
    }
    let base: u64 = rng.random();
    (0..count)
        .into_par_iter()
        .map(|k| {
            let params = &snapshots[k * snapshots.len() / count];
            let sim = simulate_values(model, params, n, &mut substream(base, &[k as u64]))?;
            Dataset::from_parts(model.schemas.clone(), sim.values, vec![false; n * model.p()])
        })
        .collect()
}

/// Every statistic on every replicate, compared with its mean over `completed`.
pub fn ppc_statistics(replicated: &[Dataset], completed: &[CompletedDataset], specs: &[CellSpec]) -> Result<PPCReport> {
    let first = completed.first().ok_or_else(|| Error::InvalidArgument("no completed datasets".into()))?;
    let schemas = first.schemas();
    if completed.iter().any(|d| d.schemas() != schemas) || replicated.iter().any(|d| d.schemas() != schemas) {
        return Err(Error::InvalidArgument("replicated and completed datasets differ in schema".into()));
    }
    for s in specs {
        s.validate(schemas)?;
    }
    let replicated: Vec<CompletedDataset> =
        replicated.iter().map(|d| CompletedDataset::new(d.clone())).collect::<Result<_>>()?;
    let statistics = specs
        .par_iter()
        .map(|s| {
            let reps: Vec<f64> = replicated.iter().map(|d| s.evaluate(d).0).collect();
            let est = completed.iter().map(|d| s.evaluate(d).0).sum::<f64>() / completed.len() as f64;
            PPCStatistic {
                id: s.id(schemas),
                tail_position: tail_position(&reps, est),
                replicated: reps,
                completed: est,
            }
        })
        .collect();
    Ok(PPCReport { replicates: replicated.len(), statistics })
}

/// Level frequencies of one variable among observed and among imputed cells.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ImputedVsObserved {
    pub variable: String,
    pub observed_count: usize,
    /// Imputed cells pooled over the completed datasets.
    pub imputed_count: usize,
    pub observed: Vec<f64>,
    /// Empty when the variable has no missing cells.
    pub imputed: Vec<f64>,
}

pub fn imputed_vs_observed(data: &Dataset, completed: &[CompletedDataset]) -> Result<Vec<ImputedVsObserved>> {
    if completed.iter().any(|d| d.schemas() != data.schemas() || d.n() != data.n()) {
        return Err(Error::InvalidArgument("completed datasets do not match the incomplete data".into()));
    }
    let freq = |counts: &[usize]| {
        let total: usize = counts.iter().sum();
        if total == 0 {
            Vec::new()
        } else {
            counts.iter().map(|&c| c as f64 / total as f64).collect()
        }
    };
    Ok(data
        .schemas()
        .iter()
        .enumerate()
        .map(|(j, s)| {
            let mut obs = vec![0usize; s.levels];
            let mut imp = vec![0usize; s.levels];
            for i in 0..data.n() {
                match data.get(i, j) {
                    Some(v) => obs[v as usize - 1] += 1,
                    None => {
                        for d in completed {
                            imp[d.row(i)[j] as usize - 1] += 1;
                        }
                    }
                }
            }
            ImputedVsObserved {
                variable: s.name.clone(),
                observed_count: obs.iter().sum(),
                imputed_count: imp.iter().sum(),
                observed: freq(&obs),
                imputed: freq(&imp),
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{VarGroup, VarKind, VariableSchema};
    use crate::model::{init_state, ModelConfig, Truncation};
    use crate::rng::named;

    fn schemas() -> Vec<VariableSchema> {
        vec![
            VariableSchema::new("y", VarKind::Ordinal, 3, VarGroup::Focus),
            VariableSchema::new("x", VarKind::Nominal, 3, VarGroup::Focus),
            VariableSchema::new("b", VarKind::Nominal, 2, VarGroup::Remainder),
        ]
    }

    fn model() -> Model {
        let cfg = ModelConfig::default().with_truncation(Truncation::uniform(3));
        Model::new(&cfg, &schemas()).unwrap()
    }

    fn data(rows: usize) -> Dataset {
        let r: Vec<Vec<Option<u16>>> = (0..rows)
            .map(|i| vec![Some((i % 3) as u16 + 1), if i % 4 == 0 { None } else { Some((i % 2) as u16 + 1) }, Some(1)])
            .collect();
        Dataset::from_rows(schemas(), &r).unwrap()
    }

    #[test]
    fn tail_positions_use_midranks() {
        assert_eq!(tail_position(&[0.2; 5], 0.2), 0.5);
        assert_eq!(tail_position(&[0.1, 0.2, 0.3, 0.4], 0.25), 0.5);
        assert_eq!(tail_position(&[0.1, 0.2, 0.3, 0.4], 0.3), 0.625);
        assert_eq!(tail_position(&[0.1, 0.2], 0.0), 0.0);
        assert_eq!(tail_position(&[0.1, 0.2], 1.0), 1.0);
    }

    #[test]
    fn replicates_are_complete_and_valid() {
        let m = model();
        let params = Params::draw_prior(&m, &mut named(1, "p")).unwrap();
        let snaps = vec![params; 30];
        let reps = replicate_datasets(&m, &snaps, 40, 25, &mut named(2, "r")).unwrap();
        assert_eq!(reps.len(), 25);
        for d in &reps {
            assert_eq!((d.n(), d.p(), d.missing_count()), (40, 3, 0));
            for i in 0..d.n() {
                for (j, s) in d.schemas().iter().enumerate() {
                    assert!((1..=s.levels as u16).contains(&d.row(i)[j]));
                }
            }
        }
        assert_ne!(reps[0].values(), reps[1].values());
        let again = replicate_datasets(&m, &snaps, 40, 25, &mut named(2, "r")).unwrap();
        assert!(reps.iter().zip(&again).all(|(a, b)| a.values() == b.values()));
        assert!(replicate_datasets(&m, &snaps[..24], 40, 25, &mut named(2, "r")).is_err());
    }

    #[test]
    fn degenerate_psi_gives_constant_columns() {
        let m = model();
        let mut params = Params::draw_prior(&m, &mut named(1, "p")).unwrap();
        for l in params.psi[0].iter_mut() {
            *l = vec![0.0, 1.0, 0.0];
        }
        let reps = replicate_datasets(&m, &[params], 50, 1, &mut named(3, "r")).unwrap();
        assert!((0..50).all(|i| reps[0].row(i)[1] == 2));
    }

    #[test]
    fn statistics_on_a_replicate_sit_inside_the_distribution() {
        let m = model();
        let params = Params::draw_prior(&m, &mut named(4, "p")).unwrap();
        let reps = replicate_datasets(&m, &vec![params; 25], 300, 25, &mut named(5, "r")).unwrap();
        let completed = vec![CompletedDataset::new(reps[7].clone()).unwrap()];
        let specs = vec![CellSpec::parse("y=1", &schemas()).unwrap(), CellSpec::parse("y=3|x=2", &schemas()).unwrap()];
        let report = ppc_statistics(&reps, &completed, &specs).unwrap();
        assert_eq!(report.replicates, 25);
        for s in &report.statistics {
            assert_eq!(s.replicated.len(), 25);
            assert!(s.tail_position > 0.0 && s.tail_position < 1.0, "{}", s.tail_position);
        }
        let mut csv = Vec::new();
        report.write_matrix_csv(&mut csv).unwrap();
        assert_eq!(String::from_utf8(csv).unwrap().lines().count(), 26);
        let bad = vec![CellSpec::Joint(vec![(0, 9)])];
        assert!(ppc_statistics(&reps, &completed, &bad).is_err());
    }

    #[test]
    fn imputed_vs_observed_tables() {
        let d = data(40);
        let st = init_state(&model(), &d, &mut named(6, "s")).unwrap();
        let completed = vec![st.completed(&d).unwrap(); 2];
        let t = imputed_vs_observed(&d, &completed).unwrap();
        assert_eq!(t.len(), 3);
        assert!(t[0].imputed.is_empty() && t[0].imputed_count == 0);
        assert_eq!(t[1].imputed_count, 20);
        assert_eq!(t[1].observed_count, 30);
        for c in &t {
            assert!((c.observed.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            if !c.imputed.is_empty() {
                assert!((c.imputed.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            }
        }
    }
}
