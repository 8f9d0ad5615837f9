use std::fs;
use std::path::{Path, PathBuf};

use focusmix::cells::{bivariate_cells, marginal_cells};
use focusmix::mi::write_pooled_csv;
use focusmix::ppc::imputed_vs_observed;
use focusmix::rng::named;
use focusmix::{
    cell_estimates, load_dataset, load_schema, ppc_statistics, replicate_datasets, run_chain, save_dataset, CellSpec,
    ChainRecord, CompletedDataset, Dataset, Error, Model, Result, VariableSchema,
};
use serde_json::json;

use crate::config::{self, create_dir, write_bytes, Manifest, RunConfig, DEFAULT_LEVEL};
use crate::{ChainArgs, Command, PoolArgs, RunArgs, SimulateArgs, ValidateArgs};

pub fn run(command: Command) -> Result<()> {
    match command {
        Command::Impute(a) => impute(a),
        Command::Pool(a) => pool(a),
        Command::Simulate(a) => simulate(a),
        Command::Ppc(a) => ppc(a),
        Command::Validate(a) => validate(a),
    }
}

fn set_threads(n: Option<usize>) -> Result<()> {
    match n {
        None => Ok(()),
        Some(0) => Err(Error::InvalidArgument("--threads must be at least 1".into())),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Numerical(format!("thread pool: {e}"))),
    }
}

fn apply_chain_args(cfg: &mut RunConfig, a: &ChainArgs) {
    cfg.chain.seed = a.seed;
    if let Some(m) = a.m {
        cfg.chain.m = m;
    }
    if let Some(b) = a.burn_in {
        cfg.chain.burn_in = b;
    }
    if let Some(t) = a.thin {
        cfg.chain.thin = t;
    }
}

struct Prepared {
    schemas: Vec<VariableSchema>,
    data: Dataset,
    model: Model,
    cfg: RunConfig,
}

/// Missing input files are user errors, not runtime failures.
fn require(paths: &[&Path]) -> Result<()> {
    match paths.iter().find(|p| !p.exists()) {
        Some(p) => Err(Error::InvalidArgument(format!("input {} does not exist", p.display()))),
        None => Ok(()),
    }
}

fn prepare(a: &RunArgs) -> Result<Prepared> {
    require(&[&a.schema, &a.data])?;
    set_threads(a.chain.threads)?;
    let schemas = load_schema(&a.schema)?;
    let data = load_dataset(&a.data, &schemas)?;
    let mut cfg = config::load_run_config(a.config.as_deref())?;
    apply_chain_args(&mut cfg, &a.chain);
    if let Some(m) = a.model {
        cfg.model.variant = m.into();
    }
    cfg.chain.validate()?;
    let model = Model::new(&cfg.model, &schemas)?;
    create_dir(&a.out)?;
    Ok(Prepared { schemas, data, model, cfg })
}

fn inputs(a: &RunArgs) -> Vec<PathBuf> {
    let mut v = vec![a.schema.clone(), a.data.clone()];
    v.extend(a.config.clone());
    v
}

fn write_imputations(dir: &Path, record: &ChainRecord, outputs: &mut Vec<String>) -> Result<()> {
    for (k, d) in record.imputations.iter().enumerate() {
        let name = format!("imp_{}.csv", k + 1);
        save_dataset(d, dir.join(&name))?;
        outputs.push(name);
    }
    write_bytes(&dir.join("diagnostics.json"), &serde_json::to_vec_pretty(&record.diagnostics)?)?;
    outputs.push("diagnostics.json".into());
    Ok(())
}

fn impute(a: RunArgs) -> Result<()> {
    let p = prepare(&a)?;
    let record = run_chain(&p.model, &p.data, &p.cfg.chain)?;
    let mut manifest = Manifest::new("impute", Some(p.cfg.chain.seed), inputs(&a), &p.cfg);
    write_imputations(&a.out, &record, &mut manifest.outputs)?;
    manifest.write(&a.out)?;
    log::info!("wrote {} completed datasets to {}", record.imputations.len(), a.out.display());
    Ok(())
}

fn ppc(a: RunArgs) -> Result<()> {
    let mut p = prepare(&a)?;
    p.cfg.chain.snapshots = p.cfg.ppc.replicates;
    let record = run_chain(&p.model, &p.data, &p.cfg.chain)?;
    let mut rng = named(p.cfg.chain.seed, "ppc");
    let replicates = replicate_datasets(&p.model, &record.snapshots, p.data.n(), p.cfg.ppc.replicates, &mut rng)?;
    let specs = if p.cfg.ppc.statistics.is_empty() {
        let focus: Vec<usize> = (0..p.model.view.p_a()).collect();
        let mut s = marginal_cells(&p.schemas, &focus);
        s.extend(bivariate_cells(&p.schemas, &focus));
        s
    } else {
        parse_cells(&p.cfg.ppc.statistics, &p.schemas)?
    };
    let report = ppc_statistics(&replicates, &record.imputations, &specs)?;
    let comparison = imputed_vs_observed(&p.data, &record.imputations)?;

    let mut manifest = Manifest::new("ppc", Some(p.cfg.chain.seed), inputs(&a), &p.cfg);
    write_imputations(&a.out, &record, &mut manifest.outputs)?;
    write_bytes(&a.out.join("ppc.json"), &serde_json::to_vec_pretty(&report)?)?;
    let mut matrix = Vec::new();
    report.write_matrix_csv(&mut matrix)?;
    write_bytes(&a.out.join("ppc_replicates.csv"), &matrix)?;
    write_bytes(&a.out.join("imputed_vs_observed.json"), &serde_json::to_vec_pretty(&comparison)?)?;
    manifest.outputs.extend(["ppc.json", "ppc_replicates.csv", "imputed_vs_observed.json"].map(String::from));
    manifest.write(&a.out)?;
    println!(
        "{} statistics over {} replicates; {:.1}% with tail position 0 or 1",
        report.statistics.len(),
        report.replicates,
        100.0 * report.extreme_fraction()
    );
    Ok(())
}

fn parse_cells(cells: &[String], schemas: &[VariableSchema]) -> Result<Vec<CellSpec>> {
    cells.iter().map(|c| CellSpec::parse(c, schemas)).collect()
}

/// Files given directly, or `imp_<k>.csv` inside a single directory ordered by k.
fn completed_paths(data: &[PathBuf]) -> Result<Vec<PathBuf>> {
    if let [dir] = data {
        if dir.is_dir() {
            let mut found: Vec<(usize, PathBuf)> = fs::read_dir(dir)
                .map_err(|e| Error::Io { path: dir.clone(), source: e })?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter_map(|p| {
                    let name = p.file_name()?.to_str()?;
                    let k = name.strip_prefix("imp_")?.strip_suffix(".csv")?.parse().ok()?;
                    Some((k, p))
                })
                .collect();
            found.sort();
            if found.is_empty() {
                return Err(Error::InvalidArgument(format!("no imp_<k>.csv files in {}", dir.display())));
            }
            return Ok(found.into_iter().map(|f| f.1).collect());
        }
    }
    Ok(data.to_vec())
}

fn pool(a: PoolArgs) -> Result<()> {
    require(&[&a.schema])?;
    require(&a.data.iter().map(PathBuf::as_path).collect::<Vec<_>>())?;
    let schemas = load_schema(&a.schema)?;
    let cfg = config::load_run_config(a.config.as_deref())?;
    let paths = completed_paths(&a.data)?;
    let completed: Vec<CompletedDataset> =
        paths.iter().map(|p| CompletedDataset::new(load_dataset(p, &schemas)?)).collect::<Result<_>>()?;
    let specs = if !a.cells.is_empty() {
        parse_cells(&a.cells, &schemas)?
    } else if !cfg.cells.is_empty() {
        parse_cells(&cfg.cells, &schemas)?
    } else {
        marginal_cells(&schemas, &(0..schemas.len()).collect::<Vec<_>>())
    };
    let level = cfg.level.unwrap_or(DEFAULT_LEVEL);
    let ests = cell_estimates(&completed, &specs)?;
    let ids: Vec<String> = specs.iter().map(|s| s.id(&schemas)).collect();
    create_dir(&a.out)?;
    let mut csv = Vec::new();
    write_pooled_csv(&mut csv, &ids, &ests, level)?;
    write_bytes(&a.out.join("pooled.csv"), &csv)?;
    let mut inputs = vec![a.schema.clone()];
    inputs.extend(paths);
    inputs.extend(a.config.clone());
    let resolved = json!({"cells": ids, "level": level});
    let mut manifest = Manifest::new("pool", None, inputs, &resolved);
    manifest.outputs.push("pooled.csv".into());
    manifest.write(&a.out)
}

fn simulate(a: SimulateArgs) -> Result<()> {
    set_threads(a.chain.threads)?;
    let mut cfg = config::load_study_config(a.config.as_deref())?;
    cfg.seed = a.chain.seed;
    if let Some(m) = a.chain.m {
        cfg.m = m;
    }
    if let Some(b) = a.chain.burn_in {
        cfg.burn_in = b;
    }
    if let Some(t) = a.chain.thin {
        cfg.thin = t;
    }
    if let Some(m) = a.model {
        cfg.models = vec![m.into()];
    }
    cfg.validate()?;
    create_dir(&a.out)?;
    let report = focusmix::sim::run_factorial(&cfg, Some(&a.out))?;
    let mut manifest = Manifest::new("simulate", Some(cfg.seed), a.config.iter().cloned().collect(), &cfg);
    manifest.outputs.extend(["report.json", "estimands.csv", "hellinger.csv", "runs/"].map(String::from));
    manifest.write(&a.out)?;
    for s in &report.summaries {
        println!(
            "{} {}: {} runs, mean |error| {:.4}, coverage {:.3}, Hellinger P(A) {:.4}",
            s.scenario,
            s.model.name(),
            s.completed,
            s.overall_abs_error,
            s.overall_coverage,
            s.hellinger_mean.a
        );
    }
    let failed = report.failures().count();
    if failed > 0 {
        log::warn!("{failed} runs failed; see report.json");
    }
    Ok(())
}

fn validate(a: ValidateArgs) -> Result<()> {
    require(&[&a.schema])?;
    require(&a.data.iter().map(PathBuf::as_path).collect::<Vec<_>>())?;
    let schemas = load_schema(&a.schema)?;
    let mut cfg = config::load_run_config(a.config.as_deref())?;
    if let Some(m) = a.model {
        cfg.model.variant = m.into();
    }
    cfg.chain.validate()?;
    let model = Model::new(&cfg.model, &schemas)?;
    let mut report = json!({
        "valid": true,
        "schema": {
            "columns": schemas.iter().map(|s| &s.name).collect::<Vec<_>>(),
            "p": model.p(),
            "p_ac": model.p_ac(),
            "p_a": model.view.p_a(),
            "p_b": model.p() - model.view.p_a(),
        },
        "model": {
            "variant": model.variant.name(),
            "design_length": model.d(),
            "truncation": model.truncation,
        },
    });
    if let Some(path) = &a.data {
        let data = load_dataset(path, &schemas)?;
        let by_column: Vec<usize> =
            (0..data.p()).map(|j| (0..data.n()).filter(|&i| data.is_missing(i, j)).count()).collect();
        report["data"] = json!({"n": data.n(), "missing_cells": data.missing_count(), "missing_by_column": by_column});
    }
    let text = serde_json::to_string_pretty(&report)?;
    match &a.out {
        Some(path) => write_bytes(path, text.as_bytes()),
        None => {
            println!("{text}");
            Ok(())
        }
    }
}
