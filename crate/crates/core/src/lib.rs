//! Mixture models with focused clustering for mixed ordinal and nominal
//! data: Gibbs sampling, multiple imputation, density evaluation,
//! simulation studies and posterior predictive checks.

// `!(x > 0.0)` rejects NaN on purpose; index loops mirror the math.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod cells;
pub mod data;
pub mod density;
pub mod dist;
pub mod error;
pub mod gibbs;
pub mod mi;
pub mod model;
pub mod ppc;
pub mod rng;
pub mod sim;

pub use cells::CellSpec;
pub use data::{
    canonical_schema, load_dataset, load_schema, partition, read_dataset, save_dataset, write_dataset,
    CompletedDataset, Dataset, PartitionedView, VarGroup, VarKind, VariableSchema, MISSING,
};
pub use density::{hellinger, joint_cell_probability, nominal_joint_pmf, CellTable, Estimate};
pub use error::{Error, Result};
pub use gibbs::{run_chain, ChainDiagnostics, ChainOptions, ChainRecord, Sampler, SweepDiagnostics};
pub use mi::{cell_estimates, mi_interval, pool_estimates, MIEstimate};
pub use model::{
    build_design_vector, default_cutoffs, init_state, marginal_allocation_probs, stick_break, Design, DesignTerm,
    MixtureWeights, Model, ModelConfig, Params, PriorConfig, SamplerState, Truncation, Variant,
};
pub use ppc::{imputed_vs_observed, ppc_statistics, replicate_datasets, PPCReport};
pub use sim::{Scenario, StudyConfig, StudyReport, TruthTable};
