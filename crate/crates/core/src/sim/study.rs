use std::collections::BTreeMap;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::generator::{EstimandClass, Generator, GeneratorSpec, Provenance, TruthTable};
use super::metrics::{evaluate_run, HellingerTriple, RunMetrics, HELLINGER_THRESHOLD};
use super::scenario::{inject_mcar, FocusSize, Scenario};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::gibbs::{run_chain, ChainOptions};
use crate::mi::cell_estimates;
use crate::model::{Model, ModelConfig, Truncation, Variant};
use crate::rng::{label, substream};

/// Settings of a factorial study. Every run is a pure function of this value.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StudyConfig {
    pub seed: u64,
    pub scenarios: Vec<Scenario>,
    pub models: Vec<Variant>,
    pub reps: usize,
    pub m: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub truncation: Truncation,
    pub level: f64,
    pub hierarchical: bool,
    pub generator: GeneratorSpec,
}

impl Default for StudyConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            scenarios: Scenario::factorial(),
            models: vec![Variant::MmFc, Variant::MmMix],
            reps: 10,
            m: 5,
            burn_in: 2000,
            thin: 200,
            truncation: Truncation::default(),
            level: 0.95,
            hierarchical: false,
            generator: GeneratorSpec::v1(),
        }
    }
}

impl StudyConfig {
    pub fn validate(&self) -> Result<()> {
        if self.reps == 0 || self.scenarios.is_empty() || self.models.is_empty() {
            return Err(Error::Config("study needs at least one scenario, model and replicate".into()));
        }
        if !(self.level > 0.0 && self.level < 1.0) {
            return Err(Error::Config(format!("interval level {} outside (0, 1)", self.level)));
        }
        self.chain_options(0).validate()
    }

    fn chain_options(&self, seed: u64) -> ChainOptions {
        ChainOptions {
            burn_in: self.burn_in,
            thin: self.thin,
            m: self.m,
            seed,
            hierarchical: self.hierarchical,
            ..ChainOptions::default()
        }
    }

    /// Chain seed for one (scenario, replicate, model) run.
    pub fn chain_seed(&self, scenario: &Scenario, rep: usize, model: Variant) -> u64 {
        substream(self.seed, &[label("chain"), label(&scenario.to_string()), rep as u64, label(model.name())]).random()
    }

    /// The masked dataset shared by every model fitted to (scenario, replicate).
    pub fn masked_dataset(&self, generator: &Generator, scenario: &Scenario, rep: usize) -> Result<(Dataset, Dataset)> {
        let code = label(&scenario.to_string());
        let mut pop_rng = substream(self.seed, &[label("population"), code, rep as u64]);
        let full = generator.sample(scenario.n(), &mut pop_rng)?;
        let mut mask_rng = substream(self.seed, &[label("mcar"), code, rep as u64]);
        let masked = inject_mcar(&full, scenario, &mut mask_rng);
        Ok((full, masked))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum RunOutcome {
    Completed(RunMetrics),
    Failed { error: String },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub scenario: Scenario,
    pub rep: usize,
    pub model: Variant,
    pub chain_seed: u64,
    /// Sweeps at which some allocation reached the last truncation index.
    pub top_index_sweeps: usize,
    pub outcome: RunOutcome,
}

impl RunRecord {
    pub fn metrics(&self) -> Option<&RunMetrics> {
        match &self.outcome {
            RunOutcome::Completed(m) => Some(m),
            RunOutcome::Failed { .. } => None,
        }
    }

    fn file_name(&self) -> String {
        run_file_name(&self.scenario, self.rep, self.model)
    }
}

fn run_file_name(scenario: &Scenario, rep: usize, model: Variant) -> String {
    format!("{scenario}__{rep:03}__{}.json", model.name())
}

/// Averages over the estimands of one class and over completed runs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassSummary {
    pub class: EstimandClass,
    pub estimands: usize,
    pub mean_abs_error: f64,
    pub coverage: f64,
    pub mean_width: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryCell {
    pub scenario: Scenario,
    pub model: Variant,
    pub completed: usize,
    pub failed: usize,
    pub classes: Vec<ClassSummary>,
    pub overall_abs_error: f64,
    pub overall_coverage: f64,
    pub hellinger_mean: HellingerTriple,
    pub hellinger_sd: HellingerTriple,
}

/// Per-replicate comparison of MM-FC against MM-Mix on the same masked data.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairedHellinger {
    pub scenario: Scenario,
    /// Replicates where both models completed.
    pub pairs: usize,
    /// Number of pairs where MM-FC has the strictly smaller distance.
    pub fc_better_a: usize,
    pub fc_better_b: usize,
    pub fc_better_ab: usize,
    pub fc: Vec<HellingerTriple>,
    pub mix: Vec<HellingerTriple>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StudyReport {
    pub config: StudyConfig,
    pub truth: BTreeMap<FocusSize, Provenance>,
    pub summaries: Vec<SummaryCell>,
    pub paired: Vec<PairedHellinger>,
    pub runs: Vec<RunRecord>,
}

impl StudyReport {
    pub fn failures(&self) -> impl Iterator<Item = &RunRecord> {
        self.runs.iter().filter(|r| r.metrics().is_none())
    }
}

/// One complete population draw and its truth table.
pub fn generate_population<R: Rng + ?Sized>(scenario: &Scenario, rng: &mut R) -> Result<(Dataset, TruthTable)> {
    let generator = Generator::v1(scenario.focus);
    let data = generator.sample(scenario.n(), rng)?;
    Ok((data, generator.truth(HELLINGER_THRESHOLD)?))
}

/// Fits one model to one replicate. Chain failures are recorded, not returned.
pub fn run_single(
    config: &StudyConfig,
    generator: &Generator,
    truth: &TruthTable,
    scenario: &Scenario,
    rep: usize,
    variant: Variant,
) -> Result<RunRecord> {
    let chain_seed = config.chain_seed(scenario, rep, variant);
    let (_, masked) = config.masked_dataset(generator, scenario, rep)?;
    let model_config = ModelConfig::default().with_variant(variant).with_truncation(config.truncation);
    let model = Model::new(&model_config, masked.schemas())?;
    let mut record = RunRecord {
        scenario: *scenario,
        rep,
        model: variant,
        chain_seed,
        top_index_sweeps: 0,
        outcome: RunOutcome::Failed { error: String::new() },
    };
    let chain = match run_chain(&model, &masked, &config.chain_options(chain_seed)) {
        Ok(c) => c,
        Err(e) => {
            log::warn!("{scenario} rep {rep} {}: {e}", variant.name());
            record.outcome = RunOutcome::Failed { error: e.to_string() };
            return Ok(record);
        }
    };
    record.top_index_sweeps = chain.diagnostics.top_index_sweeps;
    let pooled = cell_estimates(&chain.imputations, &truth.specs())?;
    record.outcome = RunOutcome::Completed(evaluate_run(truth, &pooled, &chain.imputations, config.level)?);
    Ok(record)
}

#[derive(Serialize, Deserialize)]
struct Manifest {
    config: StudyConfig,
}

/// Runs every (scenario, replicate, model) job, reusing run files already in
/// `out_dir/runs`, and writes `report.json`, `estimands.csv` and `hellinger.csv`.
pub fn run_factorial(config: &StudyConfig, out_dir: Option<&Path>) -> Result<StudyReport> {
    config.validate()?;
    if let Some(dir) = out_dir {
        prepare_out_dir(config, dir)?;
    }

    let mut focus: Vec<FocusSize> = config.scenarios.iter().map(|s| s.focus).collect();
    focus.sort();
    focus.dedup();
    let built: Vec<(FocusSize, Generator, TruthTable)> = focus
        .par_iter()
        .map(|&f| {
            let g = Generator::new(&config.generator, f)?;
            let t = g.truth(HELLINGER_THRESHOLD)?;
            Ok((f, g, t))
        })
        .collect::<Result<_>>()?;
    let lookup = |f: FocusSize| built.iter().find(|b| b.0 == f).expect("truth built for every focus size");

    let mut jobs = Vec::new();
    for s in &config.scenarios {
        for rep in 0..config.reps {
            for &v in &config.models {
                jobs.push((*s, rep, v));
            }
        }
    }
    let runs: Vec<RunRecord> = jobs
        .par_iter()
        .map(|&(s, rep, v)| {
            let path = out_dir.map(|d| d.join("runs").join(run_file_name(&s, rep, v)));
            if let Some(p) = path.as_deref().filter(|p| p.exists()) {
                let text = fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
                return Ok(serde_json::from_str(&text)?);
            }
            let (_, g, t) = lookup(s.focus);
            let rec = run_single(config, g, t, &s, rep, v)?;
            log::info!("finished {s} rep {rep} {}", v.name());
            if let Some(dir) = out_dir {
                write_atomic(&dir.join("runs").join(rec.file_name()), &serde_json::to_vec_pretty(&rec)?)?;
            }
            Ok(rec)
        })
        .collect::<Result<_>>()?;

    let mut summaries = Vec::new();
    let mut paired = Vec::new();
    for s in &config.scenarios {
        let truth = &lookup(s.focus).2;
        for &v in &config.models {
            let of: Vec<&RunRecord> = runs.iter().filter(|r| r.scenario == *s && r.model == v).collect();
            summaries.push(summarize(truth, *s, v, &of));
        }
        if config.models.contains(&Variant::MmFc) && config.models.contains(&Variant::MmMix) {
            paired.push(pair(&runs, *s, config.reps));
        }
    }

    let report = StudyReport {
        config: config.clone(),
        truth: built.iter().map(|b| (b.0, b.2.provenance)).collect(),
        summaries,
        paired,
        runs,
    };
    if let Some(dir) = out_dir {
        write_atomic(&dir.join("report.json"), &serde_json::to_vec_pretty(&report)?)?;
        write_atomic(&dir.join("estimands.csv"), &estimands_csv(&report, |f| &lookup(f).2)?)?;
        write_atomic(&dir.join("hellinger.csv"), &hellinger_csv(&report)?)?;
    }
    Ok(report)
}

fn prepare_out_dir(config: &StudyConfig, dir: &Path) -> Result<()> {
    let runs = dir.join("runs");
    fs::create_dir_all(&runs).map_err(|e| Error::io(&runs, e))?;
    let manifest = dir.join("manifest.json");
    if manifest.exists() {
        let text = fs::read_to_string(&manifest).map_err(|e| Error::io(&manifest, e))?;
        let old: Manifest = serde_json::from_str(&text)?;
        if old.config != *config {
            return Err(Error::Config(format!("{} holds a study with a different configuration", dir.display())));
        }
        return Ok(());
    }
    write_atomic(&manifest, &serde_json::to_vec_pretty(&Manifest { config: config.clone() })?)
}

pub(crate) fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut tmp = PathBuf::from(path);
    tmp.set_extension("tmp");
    let mut f = fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
    f.write_all(bytes).map_err(|e| Error::io(&tmp, e))?;
    f.sync_all().map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

fn mean_sd(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let sd = if xs.len() > 1 { (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt() } else { 0.0 };
    (mean, sd)
}

fn summarize(truth: &TruthTable, scenario: Scenario, model: Variant, runs: &[&RunRecord]) -> SummaryCell {
    let done: Vec<&RunMetrics> = runs.iter().filter_map(|r| r.metrics()).collect();
    let mut by_class: BTreeMap<EstimandClass, (usize, f64, f64, f64)> = BTreeMap::new();
    let (mut err, mut cov, mut cnt) = (0.0, 0.0, 0usize);
    for m in &done {
        for (k, e) in truth.estimands.iter().enumerate() {
            let slot = by_class.entry(e.class).or_default();
            slot.0 += 1;
            slot.1 += m.abs_error[k];
            slot.2 += f64::from(u8::from(m.covered[k]));
            slot.3 += m.width[k];
            err += m.abs_error[k];
            cov += f64::from(u8::from(m.covered[k]));
            cnt += 1;
        }
    }
    let runs_done = done.len().max(1);
    let classes = by_class
        .into_iter()
        .map(|(class, (n, e, c, w))| {
            let n = n as f64;
            ClassSummary {
                class,
                estimands: (n as usize) / runs_done,
                mean_abs_error: e / n,
                coverage: c / n,
                mean_width: w / n,
            }
        })
        .collect();
    let pick = |f: fn(&HellingerTriple) -> f64| mean_sd(&done.iter().map(|m| f(&m.hellinger)).collect::<Vec<_>>());
    let (a, b, ab) = (pick(|h| h.a), pick(|h| h.b), pick(|h| h.ab));
    let cntf = if cnt == 0 { f64::NAN } else { cnt as f64 };
    SummaryCell {
        scenario,
        model,
        completed: done.len(),
        failed: runs.len() - done.len(),
        classes,
        overall_abs_error: err / cntf,
        overall_coverage: cov / cntf,
        hellinger_mean: HellingerTriple { a: a.0, b: b.0, ab: ab.0 },
        hellinger_sd: HellingerTriple { a: a.1, b: b.1, ab: ab.1 },
    }
}

fn pair(runs: &[RunRecord], scenario: Scenario, reps: usize) -> PairedHellinger {
    let find = |rep, v| {
        runs.iter()
            .find(|r| r.scenario == scenario && r.rep == rep && r.model == v)
            .and_then(|r| r.metrics())
            .map(|m| m.hellinger)
    };
    let mut out = PairedHellinger {
        scenario,
        pairs: 0,
        fc_better_a: 0,
        fc_better_b: 0,
        fc_better_ab: 0,
        fc: Vec::new(),
        mix: Vec::new(),
    };
    for rep in 0..reps {
        if let (Some(fc), Some(mix)) = (find(rep, Variant::MmFc), find(rep, Variant::MmMix)) {
            out.pairs += 1;
            out.fc_better_a += usize::from(fc.a < mix.a);
            out.fc_better_b += usize::from(fc.b < mix.b);
            out.fc_better_ab += usize::from(fc.ab < mix.ab);
            out.fc.push(fc);
            out.mix.push(mix);
        }
    }
    out
}

fn estimands_csv<'a>(report: &StudyReport, truth_of: impl Fn(FocusSize) -> &'a TruthTable) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "scenario",
        "model",
        "estimand",
        "class",
        "truth",
        "runs",
        "mean_q_bar",
        "mean_abs_error",
        "coverage",
        "mean_width",
    ])?;
    for s in &report.config.scenarios {
        let truth = truth_of(s.focus);
        for &v in &report.config.models {
            let done: Vec<&RunMetrics> =
                report.runs.iter().filter(|r| r.scenario == *s && r.model == v).filter_map(|r| r.metrics()).collect();
            let n = done.len() as f64;
            for (k, e) in truth.estimands.iter().enumerate() {
                let avg = |f: &dyn Fn(&RunMetrics) -> f64| done.iter().map(|m| f(m)).sum::<f64>() / n;
                w.write_record([
                    s.to_string(),
                    v.name().to_string(),
                    e.id.clone(),
                    serde_json::to_value(e.class)?.as_str().unwrap_or_default().to_string(),
                    format!("{:.12e}", e.truth),
                    done.len().to_string(),
                    format!("{:.12e}", avg(&|m| m.q_bar[k])),
                    format!("{:.12e}", avg(&|m| m.abs_error[k])),
                    format!("{:.6}", avg(&|m| f64::from(u8::from(m.covered[k])))),
                    format!("{:.12e}", avg(&|m| m.width[k])),
                ])?;
            }
        }
    }
    w.into_inner().map_err(|e| Error::Numerical(format!("csv buffer: {e}")))
}

fn hellinger_csv(report: &StudyReport) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["scenario", "rep", "model", "status", "a", "b", "ab"])?;
    for r in &report.runs {
        let (status, h) = match r.metrics() {
            Some(m) => ("completed", Some(m.hellinger)),
            None => ("failed", None),
        };
        let f = |x: Option<f64>| x.map(|v| format!("{v:.12e}")).unwrap_or_default();
        w.write_record([
            r.scenario.to_string(),
            r.rep.to_string(),
            r.model.name().to_string(),
            status.to_string(),
            f(h.map(|h| h.a)),
            f(h.map(|h| h.b)),
            f(h.map(|h| h.ab)),
        ])?;
    }
    w.into_inner().map_err(|e| Error::Numerical(format!("csv buffer: {e}")))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> StudyConfig {
        StudyConfig {
            seed: 9,
            scenarios: vec!["high-few-small".parse().unwrap()],
            reps: 2,
            m: 2,
            burn_in: 10,
            thin: 2,
            truncation: Truncation::uniform(4),
            ..StudyConfig::default()
        }
    }

    #[test]
    fn models_share_the_masked_dataset() {
        let c = tiny();
        let g = Generator::v1(FocusSize::Few);
        let s = c.scenarios[0];
        let (full, a) = c.masked_dataset(&g, &s, 1).unwrap();
        let (_, b) = c.masked_dataset(&g, &s, 1).unwrap();
        assert_eq!(a.mask(), b.mask());
        assert_eq!(a.values(), b.values());
        assert_eq!(full.n(), 500);
        assert_ne!(c.masked_dataset(&g, &s, 0).unwrap().1.mask(), a.mask());
        assert_ne!(c.chain_seed(&s, 1, Variant::MmFc), c.chain_seed(&s, 1, Variant::MmMix));
    }

    #[test]
    fn factorial_runs_resumes_and_guards_its_directory() {
        let dir = tempfile::tempdir().unwrap();
        let c = tiny();
        let first = run_factorial(&c, Some(dir.path())).unwrap();
        assert_eq!(first.runs.len(), 4);
        assert_eq!(first.failures().count(), 0);
        assert_eq!(first.paired.len(), 1);
        assert_eq!(first.paired[0].pairs, 2);
        assert_eq!(first.summaries.len(), 2);
        let classes: usize = first.summaries[0].classes.iter().map(|k| k.estimands).sum();
        assert_eq!(classes, 11 + 45 + 233 + 242);
        for f in ["manifest.json", "report.json", "estimands.csv", "hellinger.csv"] {
            assert!(dir.path().join(f).exists(), "{f}");
        }
        let report = fs::read(dir.path().join("report.json")).unwrap();

        // a resumed run reads the stored records and reproduces the report byte for byte
        let second = run_factorial(&c, Some(dir.path())).unwrap();
        assert_eq!(first, second);
        assert_eq!(report, fs::read(dir.path().join("report.json")).unwrap());

        // a fresh directory reproduces it as well
        let other = tempfile::tempdir().unwrap();
        run_factorial(&c, Some(other.path())).unwrap();
        assert_eq!(report, fs::read(other.path().join("report.json")).unwrap());

        let changed = StudyConfig { seed: 10, ..c };
        let err = run_factorial(&changed, Some(dir.path())).unwrap_err();
        assert!(err.is_validation());
    }

    #[test]
    fn invalid_configs_are_rejected() {
        assert!(StudyConfig { reps: 0, ..tiny() }.validate().is_err());
        assert!(StudyConfig { level: 1.0, ..tiny() }.validate().is_err());
        assert!(StudyConfig { thin: 0, ..tiny() }.validate().is_err());
        let json = serde_json::to_string(&tiny()).unwrap();
        let back: StudyConfig = serde_json::from_str(&json).unwrap();
        assert_eq!(back, tiny());
        assert!(serde_json::from_str::<StudyConfig>(r#"{"sed": 1}"#).is_err());
    }
}
