//! Simulation study: data generation, MCAR masking, the factorial runner and its metrics.

mod generator;
mod metrics;
mod scenario;
mod study;

pub use generator::{
    estimand_specs, gauss_hermite, Estimand, EstimandClass, Generator, GeneratorSpec, Provenance, TermSpec, TruthTable,
    VarSpec,
};
pub use metrics::{average_hellinger, evaluate_run, HellingerTriple, RunMetrics, HELLINGER_THRESHOLD};
pub use scenario::{inject_mcar, inject_mcar_rates, FocusSize, MissingRate, SampleSize, Scenario};
pub use study::{
    generate_population, run_factorial, run_single, ClassSummary, PairedHellinger, RunOutcome, RunRecord, StudyConfig,
    StudyReport, SummaryCell,
};
