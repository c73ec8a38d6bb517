//! Config-driven experiment grids.
//!
//! A grid is the Cartesian product of the configured axes (network
//! size, degree setting, layer count, overlap, recovery rate, layer
//! mixing, cascade-edge ratio, size filter, replicate seed). Each cell
//! generates a network, simulates `round(ratio * |E_A|)` cascades, runs
//! the two-phase pipeline, evaluates against ground truth, and yields
//! one CSV row.
//!
//! Everything a cell consumes is derived from its content hash, so rows
//! are reproducible in isolation and a grid can resume from the per-cell
//! JSON files it leaves behind. Wall-clock timings go to a sidecar file
//! to keep the main CSV byte-stable across runs.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::cascade::{CascadeSet, filter_cascades};
use crate::error::{Error, Result};
use crate::inference::{OptimizerConfig, RestartSelection, run_pipeline};
use crate::metrics;
use crate::network::Edge;
use crate::rng;
use crate::synthgen::{CascadeGenConfig, DegreeParams, NetworkGenConfig, generate_network,
    simulate_cascades};

fn default_s_c_values() -> Vec<usize> {
    vec![1]
}

fn default_budget_factor() -> f64 {
    1.1
}

fn default_replicates() -> Vec<u64> {
    vec![0, 1, 2]
}

/// Grid specification. The `network` and `cascades` blocks carry the
/// base setting; every optional `*_values` axis overrides its matching
/// field cell by cell. `cascades.n_cascades` is ignored: the
/// cascade-edge ratio axis fixes the cascade count per cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub network: NetworkGenConfig,
    pub cascades: CascadeGenConfig,
    /// Cascade count divided by the realized aggregated edge count.
    pub ce_ratios: Vec<f64>,
    #[serde(default = "default_s_c_values")]
    pub s_c_values: Vec<usize>,
    /// Layer-count axis; applies to generation and inference alike.
    #[serde(default)]
    pub k_values: Option<Vec<u32>>,
    #[serde(default)]
    pub gamma_values: Option<Vec<f64>>,
    #[serde(default)]
    pub phi_values: Option<Vec<f64>>,
    #[serde(default)]
    pub eps_max_values: Option<Vec<f64>>,
    #[serde(default)]
    pub n_nodes_values: Option<Vec<u32>>,
    #[serde(default)]
    pub degree_values: Option<Vec<DegreeParams>>,
    #[serde(default = "OptimizerConfig::phase1_default")]
    pub phase1: OptimizerConfig,
    #[serde(default = "OptimizerConfig::phase2_default")]
    pub phase2: OptimizerConfig,
    /// Selection budget as a multiple of the realized |E_A|.
    #[serde(default = "default_budget_factor")]
    pub budget_factor: f64,
    #[serde(default = "default_replicates")]
    pub replicate_seeds: Vec<u64>,
    /// Pick the restart with the best membership accuracy instead of the
    /// lowest objective.
    #[serde(default)]
    pub truth_aware_selection: bool,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.ce_ratios.is_empty() {
            return Err(Error::Config("ce_ratios must be non-empty".into()));
        }
        for &r in &self.ce_ratios {
            if !(r > 0.0 && r.is_finite()) {
                return Err(Error::Config(format!("cascade-edge ratio {r} outside (0, inf)")));
            }
        }
        if self.s_c_values.is_empty() {
            return Err(Error::Config("s_c_values must be non-empty".into()));
        }
        if self.s_c_values.iter().any(|&s| s == 0) {
            return Err(Error::Config("size filter values must be >= 1".into()));
        }
        for (name, empty) in [
            ("k_values", self.k_values.as_ref().is_some_and(Vec::is_empty)),
            ("gamma_values", self.gamma_values.as_ref().is_some_and(Vec::is_empty)),
            ("phi_values", self.phi_values.as_ref().is_some_and(Vec::is_empty)),
            ("eps_max_values", self.eps_max_values.as_ref().is_some_and(Vec::is_empty)),
            ("n_nodes_values", self.n_nodes_values.as_ref().is_some_and(Vec::is_empty)),
            ("degree_values", self.degree_values.as_ref().is_some_and(Vec::is_empty)),
        ] {
            if empty {
                return Err(Error::Config(format!("{name} present but empty")));
            }
        }
        if !(self.budget_factor > 0.0 && self.budget_factor.is_finite()) {
            return Err(Error::Config(format!(
                "budget_factor {} outside (0, inf)",
                self.budget_factor
            )));
        }
        if self.replicate_seeds.is_empty() {
            return Err(Error::Config("replicate_seeds must be non-empty".into()));
        }
        self.phase1.validate()?;
        self.phase2.validate()?;
        // Every cell's generator configs must be valid up front, not at
        // hour three of a grid run.
        for cell in self.expand_cells() {
            cell.network_config().validate()?;
            cell.cascade_config(1).validate()?;
        }
        Ok(())
    }

    /// All cells in deterministic nested order (network axes outermost,
    /// replicate innermost).
    pub fn expand_cells(&self) -> Vec<CellConfig> {
        let ns = self
            .n_nodes_values
            .clone()
            .unwrap_or_else(|| vec![self.network.n_nodes]);
        let degrees = self
            .degree_values
            .clone()
            .unwrap_or_else(|| vec![self.network.degrees.clone()]);
        let ks = self
            .k_values
            .clone()
            .unwrap_or_else(|| vec![self.network.n_layers]);
        let phis = self
            .phi_values
            .clone()
            .unwrap_or_else(|| vec![self.network.overlap]);
        let gammas = self
            .gamma_values
            .clone()
            .unwrap_or_else(|| vec![self.cascades.recovery_rate]);
        let eps_maxes = self
            .eps_max_values
            .clone()
            .unwrap_or_else(|| vec![self.cascades.eps_max]);
        let mut cells = Vec::new();
        for &n_nodes in &ns {
            for deg in &degrees {
                for &k in &ks {
                    for &phi in &phis {
                        for &gamma in &gammas {
                            for &eps_max in &eps_maxes {
                                for &ce_ratio in &self.ce_ratios {
                                    for &s_c in &self.s_c_values {
                                        for &replicate in &self.replicate_seeds {
                                            cells.push(CellConfig {
                                                n_nodes,
                                                degrees: deg.clone(),
                                                k,
                                                phi,
                                                gamma,
                                                eps_max,
                                                ce_ratio,
                                                s_c,
                                                replicate,
                                                horizon: self.cascades.horizon,
                                                seed_prob: self.cascades.seed_prob,
                                                rate_low: self.network.rate_low,
                                                rate_high: self.network.rate_high,
                                                budget_factor: self.budget_factor,
                                                truth_aware: self.truth_aware_selection,
                                                network_seed_base: self.network.seed,
                                                cascade_seed_base: self.cascades.seed,
                                            });
                                        }
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
        cells
    }
}

/// One fully resolved grid cell. The JSON serialization of this struct
/// is the cell's identity: its hash names the resume file and seeds the
/// cell's generators.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellConfig {
    pub n_nodes: u32,
    pub degrees: DegreeParams,
    pub k: u32,
    pub phi: f64,
    pub gamma: f64,
    pub eps_max: f64,
    pub ce_ratio: f64,
    pub s_c: usize,
    pub replicate: u64,
    pub horizon: f64,
    pub seed_prob: Option<f64>,
    pub rate_low: f64,
    pub rate_high: f64,
    pub budget_factor: f64,
    pub truth_aware: bool,
    pub network_seed_base: u64,
    pub cascade_seed_base: u64,
}

impl CellConfig {
    fn identity_json(&self) -> String {
        serde_json::to_string(self).expect("cell config serializes")
    }

    /// First 64 bits of the cell's content hash.
    pub fn tag(&self) -> u64 {
        let digest = Sha256::digest(self.identity_json().as_bytes());
        u64::from_be_bytes(digest[..8].try_into().expect("8 bytes"))
    }

    /// Hex cell name used for resume files.
    pub fn hash_hex(&self) -> String {
        format!("{:016x}", self.tag())
    }

    pub fn network_seed(&self) -> u64 {
        rng::derive_seed(self.network_seed_base, self.tag().wrapping_add(1))
    }

    pub fn cascade_seed(&self) -> u64 {
        rng::derive_seed(self.cascade_seed_base, self.tag().wrapping_add(2))
    }

    fn network_config(&self) -> NetworkGenConfig {
        NetworkGenConfig {
            n_nodes: self.n_nodes,
            n_layers: self.k,
            overlap: self.phi,
            degrees: self.degrees.clone(),
            rate_low: self.rate_low,
            rate_high: self.rate_high,
            seed: self.network_seed(),
        }
    }

    fn cascade_config(&self, n_cascades: u64) -> CascadeGenConfig {
        CascadeGenConfig {
            n_cascades,
            horizon: self.horizon,
            recovery_rate: self.gamma,
            eps_max: self.eps_max,
            seed_prob: self.seed_prob,
            seed: self.cascade_seed(),
        }
    }
}

/// One CSV row per cell. Fields that depend on a stage the cell did not
/// reach stay empty. Wall-clock numbers live in [`CellTiming`], not
/// here, so the results file is byte-stable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub cell: String,
    pub status: String,
    pub error: String,
    pub n_nodes: u32,
    pub mu_in: f64,
    pub sigma_in: f64,
    pub mu_out: f64,
    pub sigma_out: f64,
    pub k: u32,
    pub phi: f64,
    pub gamma: f64,
    pub eps_max: f64,
    pub ce_ratio: f64,
    pub s_c: usize,
    pub replicate: u64,
    pub horizon: f64,
    pub budget_factor: f64,
    pub truth_aware: bool,
    pub network_seed: u64,
    pub cascade_seed: u64,
    pub n_edges_union: Option<usize>,
    pub n_edges_per_layer: String,
    pub realized_overlap: Option<f64>,
    pub c_requested: Option<u64>,
    pub c_nontrivial: Option<usize>,
    pub c_kept: Option<usize>,
    pub budget: Option<usize>,
    pub n_candidates: Option<usize>,
    pub n_selected: Option<usize>,
    pub dropped_log_terms: Option<usize>,
    pub chosen_seed: Option<u64>,
    pub final_nll: Option<f64>,
    pub auc: Option<f64>,
    pub pi_accuracy: Option<f64>,
    pub alpha_spearman: Option<f64>,
    pub pr_auc_mean: Option<f64>,
    pub pr_auc_per_layer: String,
    pub recovery_hits: Option<usize>,
    pub recovery_total: Option<usize>,
    pub recovery_rate: Option<f64>,
    pub matched_perm: String,
    pub mem_estimate_bytes: Option<u64>,
}

impl ResultRow {
    fn pending(cell: &CellConfig) -> Self {
        ResultRow {
            cell: cell.hash_hex(),
            status: "failed".into(),
            error: String::new(),
            n_nodes: cell.n_nodes,
            mu_in: cell.degrees.mu_in,
            sigma_in: cell.degrees.sigma_in,
            mu_out: cell.degrees.mu_out,
            sigma_out: cell.degrees.sigma_out,
            k: cell.k,
            phi: cell.phi,
            gamma: cell.gamma,
            eps_max: cell.eps_max,
            ce_ratio: cell.ce_ratio,
            s_c: cell.s_c,
            replicate: cell.replicate,
            horizon: cell.horizon,
            budget_factor: cell.budget_factor,
            truth_aware: cell.truth_aware,
            network_seed: cell.network_seed(),
            cascade_seed: cell.cascade_seed(),
            n_edges_union: None,
            n_edges_per_layer: String::new(),
            realized_overlap: None,
            c_requested: None,
            c_nontrivial: None,
            c_kept: None,
            budget: None,
            n_candidates: None,
            n_selected: None,
            dropped_log_terms: None,
            chosen_seed: None,
            final_nll: None,
            auc: None,
            pi_accuracy: None,
            alpha_spearman: None,
            pr_auc_mean: None,
            pr_auc_per_layer: String::new(),
            recovery_hits: None,
            recovery_total: None,
            recovery_rate: None,
            matched_perm: String::new(),
            mem_estimate_bytes: None,
        }
    }
}

/// Wall-clock sidecar, keyed by cell hash.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellTiming {
    pub cell: String,
    pub seconds_generate: f64,
    pub seconds_phase1: f64,
    pub seconds_phase2: f64,
    pub seconds_metrics: f64,
    pub seconds_total: f64,
}

fn join_semicolon<T: ToString>(items: impl IntoIterator<Item = T>) -> String {
    items
        .into_iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join(";")
}

/// Coarse analytic peak-memory bound in bytes: the per-pair interaction
/// tensors dominate and scale with |E_S| * C, plus four working vectors
/// per optimizer parameter. Deliberately not sampled from the OS.
fn memory_estimate(n_candidates: usize, n_selected: usize, c_kept: usize, k: usize) -> u64 {
    let phase1_params = 4 * n_candidates;
    let phase2_params = 4 * (k * n_selected + c_kept * k.saturating_sub(1));
    let pair_tensors = 2 * n_selected * c_kept;
    8 * (phase1_params + phase2_params + pair_tensors) as u64
}

/// Run one cell end to end. Failures at any stage come back as a row
/// with `status = "failed"` and the diagnostic in `error`; fields from
/// completed stages are kept.
pub fn run_cell(
    cell: &CellConfig,
    phase1: &OptimizerConfig,
    phase2: &OptimizerConfig,
) -> (ResultRow, CellTiming) {
    let started = Instant::now();
    let mut row = ResultRow::pending(cell);
    let mut timing = CellTiming {
        cell: row.cell.clone(),
        seconds_generate: 0.0,
        seconds_phase1: 0.0,
        seconds_phase2: 0.0,
        seconds_metrics: 0.0,
        seconds_total: 0.0,
    };
    let outcome = run_cell_stages(cell, phase1, phase2, &mut row, &mut timing);
    match outcome {
        Ok(()) => row.status = "ok".into(),
        Err(e) => {
            row.status = "failed".into();
            row.error = e.to_string();
            log::warn!("cell {} failed: {e}", row.cell);
        }
    }
    timing.seconds_total = started.elapsed().as_secs_f64();
    (row, timing)
}

fn run_cell_stages(
    cell: &CellConfig,
    phase1: &OptimizerConfig,
    phase2: &OptimizerConfig,
    row: &mut ResultRow,
    timing: &mut CellTiming,
) -> Result<()> {
    let gen_started = Instant::now();
    let net_cfg = cell.network_config();
    let net = generate_network(&net_cfg)?;
    let n_union = net.union_edges().len();
    row.n_edges_union = Some(n_union);
    row.n_edges_per_layer = join_semicolon(
        (0..net.n_layers() as usize).map(|k| net.layer_edges(k).len()),
    );
    row.realized_overlap = net.pairwise_overlap();
    if n_union == 0 {
        return Err(Error::Degenerate("generated network has no edges".into()));
    }

    let c_requested = (cell.ce_ratio * n_union as f64).round().max(1.0) as u64;
    row.c_requested = Some(c_requested);
    let casc_cfg = cell.cascade_config(c_requested);
    let simulated = simulate_cascades(&net, &casc_cfg)?;
    row.c_nontrivial = Some(simulated.len());
    // The size filter applies between the phases: the single-layer fit
    // uses every nontrivial cascade, the multilayer fit only those above
    // s_c. `kept` mirrors that subset for the membership metrics.
    let kept: CascadeSet = filter_cascades(&simulated, cell.s_c);
    row.c_kept = Some(kept.len());
    timing.seconds_generate = gen_started.elapsed().as_secs_f64();

    let budget = ((cell.budget_factor * n_union as f64).round() as usize).max(1);
    row.budget = Some(budget);
    let selection = if cell.truth_aware {
        RestartSelection::TruthPiAccuracy
    } else {
        RestartSelection::LowestObjective
    };
    let (result, provenance) = run_pipeline(
        &simulated,
        cell.k as usize,
        phase1,
        phase2,
        budget,
        cell.s_c,
        selection,
    )?;
    // K=1 runs have no multilayer phase and skip the filter, so their
    // mixture rows align with the full set.
    let metrics_set = if result.n_layers == 1 { &simulated } else { &kept };
    debug_assert_eq!(result.cascade_ids.len(), metrics_set.len());
    timing.seconds_phase1 = provenance.seconds_phase1;
    timing.seconds_phase2 = provenance.seconds_phase2;
    row.n_candidates = Some(provenance.n_candidates);
    row.n_selected = Some(provenance.n_selected);
    row.dropped_log_terms = Some(result.dropped_log_terms);
    row.chosen_seed = Some(result.chosen_seed);
    row.final_nll = Some(result.final_nll);
    row.mem_estimate_bytes = Some(memory_estimate(
        provenance.n_candidates,
        provenance.n_selected,
        kept.len(),
        cell.k as usize,
    ));

    let metrics_started = Instant::now();
    let scored: Vec<(Edge, f64)> = result
        .phase1
        .candidate_edges
        .iter()
        .copied()
        .zip(result.phase1.edge_scores.iter().copied())
        .collect();
    let report = metrics::compute_metrics(
        &net,
        metrics_set,
        &scored,
        &result.alpha_edges,
        &result.alpha_hat,
        &result.pi_hat,
    )?;
    timing.seconds_metrics = metrics_started.elapsed().as_secs_f64();
    row.auc = Some(report.auc);
    row.pi_accuracy = Some(report.pi_accuracy);
    row.alpha_spearman = Some(report.alpha_spearman);
    row.pr_auc_mean = Some(report.pr_auc_mean);
    row.pr_auc_per_layer = join_semicolon(
        report
            .pr_auc_per_layer
            .iter()
            .map(|v| v.map(|x| x.to_string()).unwrap_or_default()),
    );
    row.recovery_hits = Some(report.edge_recovery.hits);
    row.recovery_total = Some(report.edge_recovery.total);
    row.recovery_rate = Some(report.edge_recovery.rate);
    row.matched_perm = join_semicolon(report.matched_permutation.iter());
    Ok(())
}

/// Everything a finished cell leaves on disk for resumption.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct CellRecord {
    cell: CellConfig,
    row: ResultRow,
    timing: CellTiming,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridOutcome {
    pub results_path: PathBuf,
    pub timings_path: PathBuf,
    pub n_cells: usize,
    pub n_failed: usize,
    pub n_reused: usize,
}

fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| {
        Error::Config(format!("cannot write {}: {e}", path.display()))
    })?;
    for row in rows {
        w.serialize(row)
            .map_err(|e| Error::Invariant(format!("csv serialization: {e}")))?;
    }
    w.flush().map_err(|e| Error::io(path.display().to_string(), e))?;
    Ok(())
}

/// Run (or resume) a grid, writing `results.csv`, `timings.csv`, and
/// `cells/<hash>.json` under `out_dir`. Cell failures do not abort the
/// grid; they surface in `n_failed` and as failed rows.
pub fn run_grid(cfg: &ExperimentConfig, out_dir: &Path, resume: bool) -> Result<GridOutcome> {
    cfg.validate()?;
    let cells = cfg.expand_cells();
    {
        let mut seen = std::collections::HashMap::new();
        for (i, cell) in cells.iter().enumerate() {
            if let Some(j) = seen.insert(cell.hash_hex(), i) {
                return Err(Error::Config(format!(
                    "cells {j} and {i} are identical (duplicate axis value?)"
                )));
            }
        }
    }
    let cell_dir = out_dir.join("cells");
    fs::create_dir_all(&cell_dir).map_err(|e| Error::io(cell_dir.display().to_string(), e))?;

    let records: Vec<(CellRecord, bool)> = cells
        .par_iter()
        .map(|cell| {
            let path = cell_dir.join(format!("{}.json", cell.hash_hex()));
            if resume && path.exists() {
                let text = fs::read_to_string(&path)
                    .map_err(|e| Error::io(path.display().to_string(), e))?;
                let record: CellRecord = serde_json::from_str(&text).map_err(|e| {
                    Error::Parse {
                        path: path.display().to_string(),
                        line: 1,
                        msg: e.to_string(),
                    }
                })?;
                if record.cell != *cell {
                    return Err(Error::Config(format!(
                        "{} does not match its cell configuration; stale output directory?",
                        path.display()
                    )));
                }
                return Ok((record, true));
            }
            let (row, timing) = run_cell(cell, &cfg.phase1, &cfg.phase2);
            let record = CellRecord {
                cell: cell.clone(),
                row,
                timing,
            };
            let text = serde_json::to_string_pretty(&record)
                .expect("record serializes");
            fs::write(&path, text).map_err(|e| Error::io(path.display().to_string(), e))?;
            Ok((record, false))
        })
        .collect::<Result<_>>()?;

    let rows: Vec<&ResultRow> = records.iter().map(|(r, _)| &r.row).collect();
    let timings: Vec<&CellTiming> = records.iter().map(|(r, _)| &r.timing).collect();
    let results_path = out_dir.join("results.csv");
    let timings_path = out_dir.join("timings.csv");
    write_csv(&results_path, &rows)?;
    write_csv(&timings_path, &timings)?;
    Ok(GridOutcome {
        results_path,
        timings_path,
        n_cells: records.len(),
        n_failed: records.iter().filter(|(r, _)| r.row.status != "ok").count(),
        n_reused: records.iter().filter(|(_, reused)| *reused).count(),
    })
}

/// Long-format figure row: one (x, series, metric) observation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FigureRow {
    pub family: String,
    pub x_name: String,
    pub x: String,
    pub series_name: String,
    pub series: String,
    pub replicate: String,
    pub metric: String,
    pub value: String,
}

/// The x axis and series column for each figure family.
fn family_columns(family: &str) -> Result<(&'static str, &'static str)> {
    Ok(match family {
        "cascade-size" => ("ce_ratio", "gamma"),
        "filtering" => ("s_c", "gamma"),
        "density" => ("ce_ratio", "mu_in"),
        "size" => ("ce_ratio", "n_nodes"),
        "layers" => ("ce_ratio", "k"),
        "overlap" => ("ce_ratio", "phi"),
        "mixing" => ("ce_ratio", "eps_max"),
        other => {
            return Err(Error::Config(format!(
                "unknown figure family {other:?}; expected one of cascade-size, filtering, \
                 density, size, layers, overlap, mixing"
            )));
        }
    })
}

const FIGURE_METRICS: [&str; 3] = ["auc", "pi_accuracy", "alpha_spearman"];

const FIGURE_HEADER: [&str; 8] = [
    "family", "x_name", "x", "series_name", "series", "replicate", "metric", "value",
];

/// Reshape a grid results CSV into a tidy per-panel table for the named
/// figure family. Failed rows are skipped. Values pass through as
/// strings, so the output is as byte-stable as its input.
pub fn emit_figure_data(results_csv: &Path, family: &str, out: &Path) -> Result<()> {
    let (x_col, series_col) = family_columns(family)?;
    let mut reader = csv::Reader::from_path(results_csv).map_err(|e| {
        Error::Config(format!("cannot read {}: {e}", results_csv.display()))
    })?;
    let headers = reader
        .headers()
        .map_err(|e| Error::Parse {
            path: results_csv.display().to_string(),
            line: 1,
            msg: e.to_string(),
        })?
        .clone();
    let col = |name: &str| -> Result<usize> {
        headers.iter().position(|h| h == name).ok_or_else(|| {
            Error::Parse {
                path: results_csv.display().to_string(),
                line: 1,
                msg: format!("missing column {name:?}"),
            }
        })
    };
    let x_idx = col(x_col)?;
    let series_idx = col(series_col)?;
    let status_idx = col("status")?;
    let replicate_idx = col("replicate")?;
    let metric_idx: Vec<(usize, &str)> = FIGURE_METRICS
        .iter()
        .map(|&m| Ok((col(m)?, m)))
        .collect::<Result<_>>()?;

    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::Parse {
            path: results_csv.display().to_string(),
            line: i + 2,
            msg: e.to_string(),
        })?;
        if &record[status_idx] != "ok" {
            continue;
        }
        for &(idx, metric) in &metric_idx {
            let value = &record[idx];
            if value.is_empty() {
                continue;
            }
            rows.push(FigureRow {
                family: family.into(),
                x_name: x_col.into(),
                x: record[x_idx].into(),
                series_name: series_col.into(),
                series: record[series_idx].into(),
                replicate: record[replicate_idx].into(),
                metric: metric.into(),
                value: value.into(),
            });
        }
    }
    // Write the header explicitly: serialize-only writers emit nothing
    // for an empty table, but downstream tools expect the columns.
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_path(out)
        .map_err(|e| Error::Config(format!("cannot write {}: {e}", out.display())))?;
    w.write_record(FIGURE_HEADER)
        .map_err(|e| Error::Invariant(format!("csv serialization: {e}")))?;
    for row in &rows {
        w.serialize(row)
            .map_err(|e| Error::Invariant(format!("csv serialization: {e}")))?;
    }
    w.flush().map_err(|e| Error::io(out.display().to_string(), e))?;
    Ok(())
}
