//! Inference of multilayer diffusion networks from information cascades.
//!
//! A diffusion network is a set of directed layers over a common node set,
//! each layer carrying its own transmission rates. Cascades (node, time)
//! record when nodes adopted a piece of information, but not over which
//! layer it travelled. This crate implements the full loop:
//!
//! * synthetic ground truth: lognormal-degree directed configuration-model
//!   layers with controllable edge overlap, and exact continuous-time SIR
//!   cascade simulation with per-cascade layer-mixture weights,
//! * a survival-analysis likelihood for exponential transmission kernels,
//!   with sigmoid / stick-breaking reparameterizations and analytic
//!   gradients,
//! * two-phase inference: a single-layer pass over candidate edges prunes
//!   the search space, then a multilayer pass fits per-layer rates and
//!   per-cascade mixture weights with Adam restarts,
//! * evaluation: ROC / PR AUC, layer matching, mixture-recovery accuracy,
//!   rank correlation of rates, edge recovery,
//! * an experiment harness that sweeps parameter grids into tidy CSVs.
//!
//! The `examples/` directory is the best starting point; each example is
//! a small, runnable tour of one capability:
//!
//! ```text
//! cargo run --release --example generate_dataset
//! cargo run --release --example simulate_cascades
//! cargo run --release --example likelihood_and_gradients
//! cargo run --release --example run_inference
//! cargo run --release --example evaluate_result
//! cargo run --release --example experiment_grid
//! ```
//!
//! The same capabilities are exposed by the thin `diffnet` binary
//! (`generate`, `infer`, `evaluate`, `experiment`, `figure-data`).

pub mod cascade;
pub mod error;
pub mod harness;
pub mod inference;
pub mod io;
pub mod metrics;
pub mod network;
pub mod objective;
pub mod rng;
pub mod synthgen;

pub use cascade::{Cascade, CascadeSet, CascadeTruth, filter_cascades};
pub use error::{Error, Result};
pub use inference::{
    InferenceResult, OptimizerConfig, Provenance, RestartSelection, candidate_edges,
    default_budget, run_pipeline,
};
pub use metrics::{MetricsReport, compute_metrics};
pub use network::{AggregatedNetwork, Edge, MultilayerNetwork};
pub use synthgen::{
    CascadeGenConfig, DegreeParams, NetworkGenConfig, generate_dataset, generate_network,
    simulate_cascades,
};
