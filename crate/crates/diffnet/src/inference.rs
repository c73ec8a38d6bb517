//! Two-phase inference.
//!
//! Phase 1 scores every candidate pair (node pairs that co-occur
//! time-ordered in at least one cascade) with a single-layer model;
//! the top-scoring edges within a budget survive. Phase 2 jointly fits
//! per-layer rates and per-cascade layer mixtures on the surviving
//! edges, restarted from several seeds.
//!
//! Both phases run Adam on the exact analytic gradients of the
//! unconstrained parameterization; a run stops once the relative
//! per-iteration decrease has stayed below tolerance for
//! [`STOP_PATIENCE`] consecutive iterations (an increase resets the
//! window), or at the iteration cap.

use std::collections::HashSet;
use std::time::Instant;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cascade::CascadeSet;
use crate::error::{Error, Result};
use crate::network::Edge;
use crate::objective::{
    CascadeTensors, SingleLayerTensors, UnconstrainedParams, build_tensors,
    nll_single_value_and_gradient, nll_value_and_gradient, sigmoid, transform_params,
};
use crate::rng::{self, STREAM_RESTART_BASE};

/// Consecutive below-tolerance iterations required to stop.
pub const STOP_PATIENCE: usize = 20;

fn default_beta1() -> f64 {
    0.9
}

fn default_beta2() -> f64 {
    0.999
}

fn default_eps_adam() -> f64 {
    1e-8
}

fn default_restarts() -> Vec<u64> {
    vec![0]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizerConfig {
    pub learning_rate: f64,
    pub max_iters: usize,
    /// Relative per-iteration decrease under which progress counts as
    /// stalled.
    pub rel_tol: f64,
    #[serde(default = "default_beta1")]
    pub beta1: f64,
    #[serde(default = "default_beta2")]
    pub beta2: f64,
    #[serde(default = "default_eps_adam")]
    pub eps_adam: f64,
    /// Restart seeds (phase 2); phase 1 initializes from the first entry.
    #[serde(default = "default_restarts")]
    pub restarts: Vec<u64>,
}

impl OptimizerConfig {
    /// Single-layer phase: lr 0.5, 500 iterations, 0.01% tolerance.
    pub fn phase1_default() -> Self {
        Self {
            learning_rate: 0.5,
            max_iters: 500,
            rel_tol: 1e-4,
            beta1: default_beta1(),
            beta2: default_beta2(),
            eps_adam: default_eps_adam(),
            restarts: vec![0],
        }
    }

    /// Multilayer phase: lr 0.1, 3000 iterations, 0.0001% tolerance,
    /// three restarts.
    pub fn phase2_default() -> Self {
        Self {
            learning_rate: 0.1,
            max_iters: 3000,
            rel_tol: 1e-6,
            beta1: default_beta1(),
            beta2: default_beta2(),
            eps_adam: default_eps_adam(),
            restarts: vec![0, 1, 2],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0) {
            return Err(Error::Config("learning_rate must be > 0".into()));
        }
        if self.max_iters == 0 {
            return Err(Error::Config("max_iters must be >= 1".into()));
        }
        if !(self.rel_tol >= 0.0) {
            return Err(Error::Config("rel_tol must be >= 0".into()));
        }
        for (name, b) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(0.0..1.0).contains(&b) {
                return Err(Error::Config(format!("{name} {b} outside [0, 1)")));
            }
        }
        if !(self.eps_adam > 0.0) {
            return Err(Error::Config("eps_adam must be > 0".into()));
        }
        if self.restarts.is_empty() {
            return Err(Error::Config("restarts must be non-empty".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StopReason {
    /// Relative decrease stayed below tolerance for the patience window.
    Tolerance,
    IterationCap,
    /// Objective became non-finite; parameters at that point are suspect.
    NonFinite,
}

/// How the best restart is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum RestartSelection {
    /// Lowest final objective; works without ground truth.
    #[default]
    LowestObjective,
    /// Highest membership accuracy against cascade ground truth
    /// (maximized over layer permutations); ties fall back to the
    /// objective.
    TruthPiAccuracy,
}

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    fn new(dim: usize) -> Self {
        Self {
            m: vec![0.0; dim],
            v: vec![0.0; dim],
            t: 0,
        }
    }

    fn step(&mut self, cfg: &OptimizerConfig, x: &mut [f64], grad: &[f64]) {
        self.t += 1;
        let bc1 = 1.0 - cfg.beta1.powi(self.t);
        let bc2 = 1.0 - cfg.beta2.powi(self.t);
        for i in 0..x.len() {
            let g = grad[i];
            self.m[i] = cfg.beta1 * self.m[i] + (1.0 - cfg.beta1) * g;
            self.v[i] = cfg.beta2 * self.v[i] + (1.0 - cfg.beta2) * g * g;
            let m_hat = self.m[i] / bc1;
            let v_hat = self.v[i] / bc2;
            x[i] -= cfg.learning_rate * m_hat / (v_hat.sqrt() + cfg.eps_adam);
        }
    }
}

struct RunOutcome {
    trace: Vec<f64>,
    stop: StopReason,
}

/// Adam descent until tolerance-with-patience, the iteration cap, or a
/// non-finite objective. `eval` returns the value and gradient at `x`.
fn minimize(
    x: &mut [f64],
    cfg: &OptimizerConfig,
    mut eval: impl FnMut(&[f64]) -> Result<(f64, Vec<f64>)>,
) -> Result<RunOutcome> {
    let (mut value, mut grad) = eval(x)?;
    let mut trace = vec![value];
    if !value.is_finite() {
        return Ok(RunOutcome {
            trace,
            stop: StopReason::NonFinite,
        });
    }
    let mut adam = Adam::new(x.len());
    let mut patience = 0usize;
    let mut stop = StopReason::IterationCap;
    for _ in 0..cfg.max_iters {
        adam.step(cfg, x, &grad);
        let (new_value, new_grad) = eval(x)?;
        trace.push(new_value);
        if !new_value.is_finite() {
            stop = StopReason::NonFinite;
            break;
        }
        let rel = (value - new_value) / value.abs().max(f64::MIN_POSITIVE);
        if rel >= 0.0 && rel < cfg.rel_tol {
            patience += 1;
        } else {
            patience = 0;
        }
        value = new_value;
        grad = new_grad;
        if patience >= STOP_PATIENCE {
            stop = StopReason::Tolerance;
            break;
        }
    }
    Ok(RunOutcome { trace, stop })
}

/// Ordered node pairs that co-occur with strictly increasing activation
/// times in at least one cascade. Sorted lexicographically.
pub fn candidate_edges(cascades: &CascadeSet) -> Vec<Edge> {
    let mut set: HashSet<Edge> = HashSet::new();
    for c in cascades.iter() {
        let events = c.events();
        for (a, &(i, ti)) in events.iter().enumerate() {
            for &(j, tj) in &events[a + 1..] {
                // Events are time-sorted, so only the tie case can fail.
                if ti < tj {
                    set.insert((i, j));
                }
            }
        }
    }
    let mut pairs: Vec<Edge> = set.into_iter().collect();
    pairs.sort_unstable();
    pairs
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseOneResult {
    /// Candidate pairs, sorted.
    pub candidate_edges: Vec<Edge>,
    /// Constrained scores in (0,1), aligned with `candidate_edges`.
    pub edge_scores: Vec<f64>,
    /// Budgeted selection; populated by the pipeline, empty when phase 1
    /// is run on its own.
    pub selected_edges: Vec<Edge>,
    pub trace: Vec<f64>,
    pub stop: StopReason,
}

fn init_scores(n: usize, seed: u64, rng_stream: u64) -> Vec<f64> {
    let mut r = rng::stream(seed, rng_stream);
    (0..n).map(|_| r.random_range(-2.2..-2.0)).collect()
}

/// Fit the single-layer model over the candidate pairs.
pub fn phase1_single_layer(
    cascades: &CascadeSet,
    e_p: &[Edge],
    opt: &OptimizerConfig,
) -> Result<PhaseOneResult> {
    opt.validate()?;
    if e_p.is_empty() {
        return Err(Error::Degenerate("empty candidate edge set".into()));
    }
    let tensors: SingleLayerTensors = build_tensors(cascades, e_p)?.aggregate_single_layer();
    let init_seed = opt.restarts.first().copied().unwrap_or(0);
    let mut x = init_scores(e_p.len(), init_seed, STREAM_RESTART_BASE);
    let outcome = minimize(&mut x, opt, |x| nll_single_value_and_gradient(&tensors, x))?;
    if outcome.trace.len() == 1 && outcome.stop == StopReason::NonFinite {
        return Err(Error::Degenerate(format!(
            "single-layer objective non-finite at initialization: {}",
            outcome.trace[0]
        )));
    }
    Ok(PhaseOneResult {
        candidate_edges: e_p.to_vec(),
        edge_scores: x.iter().map(|&v| sigmoid(v)).collect(),
        selected_edges: Vec::new(),
        trace: outcome.trace,
        stop: outcome.stop,
    })
}

/// The paper's selection budget: 1.1x the ground-truth aggregated edge
/// count, rounded.
pub fn default_budget(n_truth_edges: usize) -> usize {
    (1.1 * n_truth_edges as f64).round() as usize
}

/// Top-`budget` candidates by descending score, ties by (src, dst).
/// Returns a sorted edge list; over-budget requests return everything
/// with a warning.
pub fn select_edges(candidates: &[Edge], scores: &[f64], budget: usize) -> Result<Vec<Edge>> {
    if budget == 0 {
        return Err(Error::Config("selection budget must be >= 1".into()));
    }
    if candidates.len() != scores.len() {
        return Err(Error::Invariant("scores/candidates length mismatch".into()));
    }
    if budget >= candidates.len() {
        if budget > candidates.len() {
            log::warn!(
                "selection budget {budget} exceeds the {} candidates; keeping all",
                candidates.len()
            );
        }
        return Ok(candidates.to_vec());
    }
    let mut idx: Vec<usize> = (0..candidates.len()).collect();
    idx.sort_unstable_by(|&a, &b| {
        scores[b]
            .total_cmp(&scores[a])
            .then_with(|| candidates[a].cmp(&candidates[b]))
    });
    let mut selected: Vec<Edge> = idx[..budget].iter().map(|&i| candidates[i]).collect();
    selected.sort_unstable();
    Ok(selected)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RestartRun {
    pub seed: u64,
    pub final_nll: f64,
    pub iterations: usize,
    pub stop: StopReason,
    /// Membership accuracy (best over layer permutations); only under
    /// truth-aware selection.
    pub pi_accuracy: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Phase2Result {
    /// Constrained per-layer rates, layer-major over the selected edges.
    pub alpha_hat: Vec<f64>,
    /// Per-cascade mixture rows, aligned with the cascade set order.
    pub pi_hat: Vec<Vec<f64>>,
    pub final_nll: f64,
    pub trace: Vec<f64>,
    pub chosen_seed: u64,
    pub restarts: Vec<RestartRun>,
}

/// Uniform-mixture initialization: sticks at 1/(K-l+1) give equal layer
/// weights; a small jitter breaks symmetry between restarts.
fn init_phase2(seed: u64, k: usize, n_edges: usize, n_cascades: usize) -> Vec<f64> {
    let mut r = rng::stream(seed, STREAM_RESTART_BASE);
    let mut x = Vec::with_capacity(k * n_edges + n_cascades * (k - 1));
    for _ in 0..k * n_edges {
        x.push(r.random_range(-2.2..-2.0));
    }
    for _ in 0..n_cascades {
        for l in 0..k - 1 {
            let stick = 1.0 / (k - l) as f64;
            let logit = (stick / (1.0 - stick)).ln();
            x.push(logit + r.random_range(-0.01..0.01));
        }
    }
    x
}

struct RestartOutput {
    run: RestartRun,
    alpha_hat: Vec<f64>,
    pi_hat: Vec<Vec<f64>>,
    trace: Vec<f64>,
}

fn run_restart(
    tensors: &CascadeTensors,
    k: usize,
    n_cascades: usize,
    opt: &OptimizerConfig,
    seed: u64,
    truth_labels: Option<&[u32]>,
) -> Result<RestartOutput> {
    let n_edges = tensors.n_edges;
    let mut x = init_phase2(seed, k, n_edges, n_cascades);
    let split = k * n_edges;
    let mut params = UnconstrainedParams {
        n_layers: k,
        n_edges,
        n_cascades,
        alpha_raw: vec![0.0; split],
        pi_raw: vec![0.0; n_cascades * (k - 1)],
    };
    let outcome = minimize(&mut x, opt, |x| {
        params.alpha_raw.copy_from_slice(&x[..split]);
        params.pi_raw.copy_from_slice(&x[split..]);
        let (value, grad) = nll_value_and_gradient(tensors, &params)?;
        let mut flat = grad.alpha_raw;
        flat.extend_from_slice(&grad.pi_raw);
        Ok((value, flat))
    })?;
    let final_nll = *outcome.trace.last().expect("trace non-empty");
    let iterations = outcome.trace.len() - 1;
    if outcome.stop == StopReason::NonFinite {
        return Ok(RestartOutput {
            run: RestartRun {
                seed,
                final_nll: f64::INFINITY,
                iterations,
                stop: outcome.stop,
                pi_accuracy: None,
            },
            alpha_hat: Vec::new(),
            pi_hat: Vec::new(),
            trace: outcome.trace,
        });
    }
    params.alpha_raw.copy_from_slice(&x[..split]);
    params.pi_raw.copy_from_slice(&x[split..]);
    let constrained = transform_params(&params)?;
    let pi_hat: Vec<Vec<f64>> = (0..n_cascades)
        .map(|c| constrained.pi_row(c).to_vec())
        .collect();
    let pi_accuracy = match truth_labels {
        Some(labels) => Some(crate::metrics::best_pi_accuracy(&pi_hat, labels, k)?),
        None => None,
    };
    Ok(RestartOutput {
        run: RestartRun {
            seed,
            final_nll,
            iterations,
            stop: outcome.stop,
            pi_accuracy,
        },
        alpha_hat: constrained.alpha,
        pi_hat,
        trace: outcome.trace,
    })
}

/// Joint multilayer fit over the selected edges, best of the configured
/// restarts. Requires cascade ground truth when `selection` is
/// truth-aware.
pub fn phase2_multilayer(
    cascades: &CascadeSet,
    e_s: &[Edge],
    k: usize,
    opt: &OptimizerConfig,
    selection: RestartSelection,
) -> Result<Phase2Result> {
    opt.validate()?;
    if k < 2 {
        return Err(Error::Config("multilayer phase requires K >= 2".into()));
    }
    if e_s.is_empty() {
        return Err(Error::Degenerate("empty selected edge set".into()));
    }
    let truth_labels: Option<Vec<u32>> = match selection {
        RestartSelection::LowestObjective => None,
        RestartSelection::TruthPiAccuracy => Some(
            cascades
                .iter()
                .map(|c| {
                    c.truth
                        .as_ref()
                        .map(|t| t.main_layer)
                        .ok_or_else(|| {
                            Error::Degenerate(
                                "truth-aware restart selection needs cascade ground truth".into(),
                            )
                        })
                })
                .collect::<Result<_>>()?,
        ),
    };
    let tensors = build_tensors(cascades, e_s)?;
    let outputs: Vec<RestartOutput> = opt
        .restarts
        .par_iter()
        .map(|&seed| run_restart(&tensors, k, cascades.len(), opt, seed, truth_labels.as_deref()))
        .collect::<Result<_>>()?;

    let chosen = outputs
        .iter()
        .enumerate()
        .filter(|(_, o)| o.run.final_nll.is_finite())
        .min_by(|(_, a), (_, b)| match selection {
            RestartSelection::LowestObjective => a
                .run
                .final_nll
                .total_cmp(&b.run.final_nll)
                .then(a.run.seed.cmp(&b.run.seed)),
            RestartSelection::TruthPiAccuracy => b
                .run
                .pi_accuracy
                .unwrap_or(f64::NEG_INFINITY)
                .total_cmp(&a.run.pi_accuracy.unwrap_or(f64::NEG_INFINITY))
                .then(a.run.final_nll.total_cmp(&b.run.final_nll))
                .then(a.run.seed.cmp(&b.run.seed)),
        })
        .map(|(i, _)| i);
    let Some(best) = chosen else {
        let summary: Vec<String> = outputs
            .iter()
            .map(|o| {
                format!(
                    "seed {}: {:?} after {} iterations, last value {}",
                    o.run.seed,
                    o.run.stop,
                    o.run.iterations,
                    o.trace.last().copied().unwrap_or(f64::NAN)
                )
            })
            .collect();
        return Err(Error::Degenerate(format!(
            "all restarts diverged: {}",
            summary.join("; ")
        )));
    };

    let restarts: Vec<RestartRun> = outputs.iter().map(|o| o.run.clone()).collect();
    let best_output = &outputs[best];
    Ok(Phase2Result {
        alpha_hat: best_output.alpha_hat.clone(),
        pi_hat: best_output.pi_hat.clone(),
        final_nll: best_output.run.final_nll,
        trace: best_output.trace.clone(),
        chosen_seed: best_output.run.seed,
        restarts,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InferenceResult {
    pub n_layers: usize,
    pub phase1: PhaseOneResult,
    /// Selected edges, sorted; rows of `alpha_hat` align with this list.
    pub alpha_edges: Vec<Edge>,
    /// Constrained rate estimates, layer-major (`[k * |E_S| + e]`).
    pub alpha_hat: Vec<f64>,
    /// Per-cascade mixture estimates, aligned with `cascade_ids`.
    pub pi_hat: Vec<Vec<f64>>,
    pub cascade_ids: Vec<u64>,
    pub final_nll: f64,
    pub phase2_trace: Vec<f64>,
    pub chosen_seed: u64,
    pub restarts: Vec<RestartRun>,
    /// Activated nodes without candidate in-edges whose likelihood terms
    /// were dropped (over the selected edge set).
    pub dropped_log_terms: usize,
}

/// Reproducibility sidecar: configuration echo plus wall-clock timings.
/// Kept separate from [`InferenceResult`] so result artifacts are
/// byte-identical across runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub phase1_config: OptimizerConfig,
    pub phase2_config: OptimizerConfig,
    pub budget: usize,
    /// Size threshold applied between the phases; cascades of size
    /// `<= s_c` were excluded from the multilayer fit.
    pub s_c: usize,
    pub selection: RestartSelection,
    pub n_candidates: usize,
    pub n_selected: usize,
    pub seconds_phase1: f64,
    pub seconds_phase2: f64,
}

/// The full pipeline: candidate pairs, single-layer fit, budgeted
/// selection, multilayer decomposition (skipped for K=1).
///
/// Phase 1 always sees the whole cascade set. `s_c` excludes cascades of
/// size `<= s_c` from the multilayer phase only: each small cascade adds
/// a membership variable to phase 2 while carrying little signal, but it
/// still helps the single-layer edge fit. `s_c <= 1` is a no-op on
/// generator output (size-1 cascades are already removed); K=1 runs have
/// no multilayer phase and ignore `s_c`. `pi_hat` rows align with
/// `cascade_ids`, the ids that survived the filter.
pub fn run_pipeline(
    cascades: &CascadeSet,
    k: usize,
    phase1_cfg: &OptimizerConfig,
    phase2_cfg: &OptimizerConfig,
    budget: usize,
    s_c: usize,
    selection: RestartSelection,
) -> Result<(InferenceResult, Provenance)> {
    if k == 0 {
        return Err(Error::Config("layer count must be >= 1".into()));
    }
    if cascades.is_empty() {
        return Err(Error::Degenerate(
            "no cascades to infer from (all filtered out?)".into(),
        ));
    }
    let started = Instant::now();
    let e_p = candidate_edges(cascades);
    if e_p.is_empty() {
        return Err(Error::Degenerate(
            "no time-ordered co-occurrence pairs in the cascade set".into(),
        ));
    }
    let mut phase1 = phase1_single_layer(cascades, &e_p, phase1_cfg)?;
    let e_s = select_edges(&phase1.candidate_edges, &phase1.edge_scores, budget)?;
    phase1.selected_edges = e_s.clone();
    let seconds_phase1 = started.elapsed().as_secs_f64();

    let phase2_started = Instant::now();
    let result = if k == 1 {
        let cascade_ids: Vec<u64> = cascades.iter().map(|c| c.id).collect();
        // Nothing to decompose: report the phase-1 scores on the selected
        // edges and the trivial mixture.
        let score_of = |edge: &Edge| {
            let i = phase1
                .candidate_edges
                .binary_search(edge)
                .expect("selected edges come from candidates");
            phase1.edge_scores[i]
        };
        let alpha_hat: Vec<f64> = e_s.iter().map(score_of).collect();
        let tensors = build_tensors(cascades, &e_s)?.aggregate_single_layer();
        let report = crate::objective::nll_single(&tensors, &alpha_hat)?;
        InferenceResult {
            n_layers: 1,
            phase1,
            alpha_edges: e_s,
            alpha_hat,
            pi_hat: vec![vec![1.0]; cascades.len()],
            cascade_ids,
            final_nll: report.nll,
            phase2_trace: Vec::new(),
            chosen_seed: phase1_cfg.restarts.first().copied().unwrap_or(0),
            restarts: Vec::new(),
            dropped_log_terms: report.dropped_log_terms,
        }
    } else {
        let kept = crate::cascade::filter_cascades(cascades, s_c);
        if kept.is_empty() {
            return Err(Error::Degenerate(format!(
                "no cascades larger than s_c={s_c} left for the multilayer phase"
            )));
        }
        let cascade_ids: Vec<u64> = kept.iter().map(|c| c.id).collect();
        let p2 = phase2_multilayer(&kept, &e_s, k, phase2_cfg, selection)?;
        let dropped = build_tensors(&kept, &e_s)?.dropped_log_terms();
        InferenceResult {
            n_layers: k,
            phase1,
            alpha_edges: e_s,
            alpha_hat: p2.alpha_hat,
            pi_hat: p2.pi_hat,
            cascade_ids,
            final_nll: p2.final_nll,
            phase2_trace: p2.trace,
            chosen_seed: p2.chosen_seed,
            restarts: p2.restarts,
            dropped_log_terms: dropped,
        }
    };
    let provenance = Provenance {
        phase1_config: phase1_cfg.clone(),
        phase2_config: phase2_cfg.clone(),
        budget,
        s_c,
        selection,
        n_candidates: result.phase1.candidate_edges.len(),
        n_selected: result.alpha_edges.len(),
        seconds_phase1,
        seconds_phase2: phase2_started.elapsed().as_secs_f64(),
    };
    Ok((result, provenance))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cascade::Cascade;
    use crate::network::MultilayerNetwork;
    use crate::rng::STREAM_CASCADE_BASE;
    use crate::synthgen::{self, CascadeGenConfig, NetworkGenConfig};

    fn cascade(id: u64, horizon: f64, events: Vec<(u32, f64)>) -> Cascade {
        Cascade::new(id, horizon, events, None).unwrap()
    }

    #[test]
    fn candidate_pairs_respect_time_order() {
        let set = CascadeSet::new(vec![cascade(0, 5.0, vec![(3, 0.0), (7, 1.0)])]);
        assert_eq!(candidate_edges(&set), vec![(3, 7)]);

        let both = CascadeSet::new(vec![
            cascade(0, 5.0, vec![(3, 0.0), (7, 1.0)]),
            cascade(1, 5.0, vec![(7, 0.0), (3, 1.0)]),
        ]);
        assert_eq!(candidate_edges(&both), vec![(3, 7), (7, 3)]);

        // Simultaneous activations expose nothing.
        let tied = CascadeSet::new(vec![cascade(0, 5.0, vec![(1, 0.5), (2, 0.5)])]);
        assert!(candidate_edges(&tied).is_empty());
    }

    /// Star cascades: hub 0 seeds every cascade, leaves activate later.
    fn star_cascades(n_leaves: u32, n_cascades: u64) -> (CascadeSet, Vec<Edge>) {
        let edges: Vec<(u32, u32, f64)> = (1..=n_leaves).map(|l| (0, l, 0.8)).collect();
        let net = MultilayerNetwork::new(n_leaves + 1, vec![edges]).unwrap();
        let cfg = CascadeGenConfig {
            n_cascades,
            horizon: 4.0,
            recovery_rate: 0.0,
            ..CascadeGenConfig::default()
        };
        let cascades: Vec<Cascade> = (0..n_cascades)
            .filter_map(|i| {
                let mut r = crate::rng::stream(5, STREAM_CASCADE_BASE + i);
                let events = synthgen::simulate_from_seeds(&net, &[1.0], &[0], 0.0, cfg.horizon, &mut r);
                (events.len() > 1).then(|| Cascade::new(i, cfg.horizon, events, None).unwrap())
            })
            .collect();
        let hub_edges: Vec<Edge> = (1..=n_leaves).map(|l| (0, l)).collect();
        (CascadeSet::new(cascades), hub_edges)
    }

    #[test]
    fn star_hub_edges_win_phase_one() {
        let (cascades, hub_edges) = star_cascades(6, 400);
        let e_p = candidate_edges(&cascades);
        assert!(e_p.len() > hub_edges.len(), "leaf-leaf pairs should exist");
        let result = phase1_single_layer(&cascades, &e_p, &OptimizerConfig::phase1_default()).unwrap();
        let top = select_edges(&result.candidate_edges, &result.edge_scores, hub_edges.len()).unwrap();
        assert_eq!(top, hub_edges);
    }

    #[test]
    fn descent_on_a_single_parameter() {
        let set = CascadeSet::new(vec![cascade(0, 5.0, vec![(0, 0.0), (1, 1.0)])]);
        let e_p = candidate_edges(&set);
        let result = phase1_single_layer(&set, &e_p, &OptimizerConfig::phase1_default()).unwrap();
        // The 1-parameter objective s - ln(s) decreases toward s = 1, so the
        // score must strictly exceed any point in the init band.
        assert!(result.edge_scores[0] > sigmoid(-2.0));
        assert!(result.trace.last().unwrap() < &result.trace[0]);
    }

    #[test]
    fn optimizer_settles_at_its_floor() {
        let (cascades, _) = star_cascades(6, 400);
        let e_p = candidate_edges(&cascades);
        let result = phase1_single_layer(&cascades, &e_p, &OptimizerConfig::phase1_default()).unwrap();
        assert_eq!(result.stop, StopReason::Tolerance);
        let first = result.trace[0];
        let last = *result.trace.last().unwrap();
        let floor = result.trace.iter().copied().fold(f64::INFINITY, f64::min);
        assert!(last < first);
        // Adam oscillates, so the trace is not monotone, but the stopping
        // rule must leave us near the best value seen.
        assert!((last - floor) / floor.abs() < 0.01, "stopped {last} vs floor {floor}");
    }

    #[test]
    fn budget_rounding_matches_published_protocol() {
        assert_eq!(default_budget(4422), 4864);
        assert_eq!(default_budget(10), 11);
    }

    #[test]
    fn selection_tie_breaks_and_over_budget() {
        let candidates: Vec<Edge> = vec![(0, 1), (0, 2), (1, 0), (2, 1)];
        let equal = vec![0.5; 4];
        assert_eq!(
            select_edges(&candidates, &equal, 2).unwrap(),
            vec![(0, 1), (0, 2)]
        );
        let scores = vec![0.1, 0.9, 0.9, 0.3];
        assert_eq!(
            select_edges(&candidates, &scores, 3).unwrap(),
            vec![(0, 2), (1, 0), (2, 1)]
        );
        assert_eq!(select_edges(&candidates, &scores, 4).unwrap(), candidates);
        assert_eq!(select_edges(&candidates, &scores, 99).unwrap(), candidates);
        assert!(select_edges(&candidates, &scores, 0).is_err());
    }

    /// Two-layer disjoint dataset small enough for test runtime.
    fn two_layer_dataset(n_cascades: u64) -> (MultilayerNetwork, CascadeSet) {
        let net_cfg = NetworkGenConfig {
            n_nodes: 60,
            n_layers: 2,
            seed: 8,
            ..NetworkGenConfig::default()
        };
        let casc_cfg = CascadeGenConfig {
            n_cascades,
            recovery_rate: 1.0,
            eps_max: 0.0,
            seed: 9,
            ..CascadeGenConfig::default()
        };
        synthgen::generate_dataset(&net_cfg, &casc_cfg, 1).unwrap()
    }

    #[test]
    fn duplicated_cascades_double_the_objective() {
        let (_, cascades) = two_layer_dataset(60);
        let e_p = candidate_edges(&cascades);
        let p1 = phase1_single_layer(&cascades, &e_p, &OptimizerConfig::phase1_default()).unwrap();
        let e_s = select_edges(&p1.candidate_edges, &p1.edge_scores, e_p.len().min(150)).unwrap();
        let doubled_set = CascadeSet::new(
            cascades
                .iter()
                .cloned()
                .chain(cascades.iter().map(|c| {
                    let mut c2 = c.clone();
                    c2.id += 10_000;
                    c2
                }))
                .collect(),
        );

        // Additivity is exact at matched parameters: duplicate the mixture
        // rows along with the cascades.
        let n = cascades.len();
        let k = 2;
        let tensors = build_tensors(&cascades, &e_s).unwrap();
        let tensors2 = build_tensors(&doubled_set, &e_s).unwrap();
        let x = init_phase2(7, k, e_s.len(), n);
        let split = k * e_s.len();
        let params = UnconstrainedParams {
            n_layers: k,
            n_edges: e_s.len(),
            n_cascades: n,
            alpha_raw: x[..split].to_vec(),
            pi_raw: x[split..].to_vec(),
        };
        let params2 = UnconstrainedParams {
            n_cascades: 2 * n,
            pi_raw: [&x[split..], &x[split..]].concat(),
            ..params.clone()
        };
        let (value, _) = nll_value_and_gradient(&tensors, &params).unwrap();
        let (value2, _) = nll_value_and_gradient(&tensors2, &params2).unwrap();
        assert!((value2 / value - 2.0).abs() < 1e-12, "{value2} vs {value}");

        // Both fits converge to the shared optimum region, so the final
        // objectives agree to within the stopping tolerance.
        let opt = OptimizerConfig {
            restarts: vec![0],
            ..OptimizerConfig::phase2_default()
        };
        let single = phase2_multilayer(&cascades, &e_s, 2, &opt, RestartSelection::LowestObjective)
            .unwrap();
        let doubled =
            phase2_multilayer(&doubled_set, &e_s, 2, &opt, RestartSelection::LowestObjective)
                .unwrap();
        let ratio = doubled.final_nll / single.final_nll;
        assert!(
            (ratio - 2.0).abs() < 1e-4,
            "final objective ratio {ratio} (values {} vs {})",
            doubled.final_nll,
            single.final_nll
        );
    }

    #[test]
    fn two_layers_fit_single_layer_data_no_worse() {
        let net_cfg = NetworkGenConfig {
            n_nodes: 40,
            n_layers: 1,
            seed: 3,
            ..NetworkGenConfig::default()
        };
        let casc_cfg = CascadeGenConfig {
            n_cascades: 150,
            recovery_rate: 1.0,
            seed: 4,
            ..CascadeGenConfig::default()
        };
        let (_, cascades) = synthgen::generate_dataset(&net_cfg, &casc_cfg, 1).unwrap();
        let e_p = candidate_edges(&cascades);
        let p1 = phase1_single_layer(&cascades, &e_p, &OptimizerConfig::phase1_default()).unwrap();
        let e_s = select_edges(&p1.candidate_edges, &p1.edge_scores, e_p.len().min(120)).unwrap();

        // Single-layer reference fit restricted to the same edges.
        let tensors = build_tensors(&cascades, &e_s).unwrap().aggregate_single_layer();
        let mut x = init_scores(e_s.len(), 0, STREAM_RESTART_BASE);
        let cfg = OptimizerConfig {
            max_iters: 2000,
            ..OptimizerConfig::phase2_default()
        };
        minimize(&mut x, &cfg, |x| nll_single_value_and_gradient(&tensors, x)).unwrap();
        let single_nll = crate::objective::nll_single(
            &tensors,
            &x.iter().map(|&v| sigmoid(v)).collect::<Vec<_>>(),
        )
        .unwrap()
        .nll;

        let p2 = phase2_multilayer(
            &cascades,
            &e_s,
            2,
            &OptimizerConfig::phase2_default(),
            RestartSelection::LowestObjective,
        )
        .unwrap();
        assert!(
            p2.final_nll <= single_nll + 1e-6,
            "K=2 fit {} vs single-layer fit {single_nll}",
            p2.final_nll
        );
    }

    #[test]
    fn pipeline_recovers_memberships_on_a_small_instance() {
        // Size filtering matters: short cascades carry almost no membership
        // signal, so the multilayer phase keeps only those with more than
        // 8 activations while phase 1 still uses everything.
        let net_cfg = NetworkGenConfig {
            n_nodes: 60,
            n_layers: 2,
            seed: 8,
            ..NetworkGenConfig::default()
        };
        let casc_cfg = CascadeGenConfig {
            n_cascades: 5000,
            recovery_rate: 1.0,
            eps_max: 0.0,
            seed: 9,
            ..CascadeGenConfig::default()
        };
        let (net, cascades) = synthgen::generate_dataset(&net_cfg, &casc_cfg, 1).unwrap();
        let budget = default_budget(net.union_edges().len());
        let phase2 = OptimizerConfig {
            max_iters: 2000,
            restarts: vec![0],
            ..OptimizerConfig::phase2_default()
        };
        let (result, _) = run_pipeline(
            &cascades,
            2,
            &OptimizerConfig::phase1_default(),
            &phase2,
            budget,
            8,
            RestartSelection::LowestObjective,
        )
        .unwrap();
        assert!(result.cascade_ids.len() < cascades.len());
        let truth_of: std::collections::HashMap<u64, u32> = cascades
            .iter()
            .map(|c| (c.id, c.truth.as_ref().unwrap().main_layer))
            .collect();
        let labels: Vec<u32> = result.cascade_ids.iter().map(|id| truth_of[id]).collect();
        let acc = crate::metrics::best_pi_accuracy(&result.pi_hat, &labels, 2).unwrap();
        assert!(acc > 0.9, "membership accuracy {acc}");
    }

    #[test]
    fn pipeline_is_deterministic() {
        let (_, cascades) = two_layer_dataset(80);
        let phase2 = OptimizerConfig {
            max_iters: 60,
            ..OptimizerConfig::phase2_default()
        };
        let run = || {
            let (result, _) = run_pipeline(
                &cascades,
                2,
                &OptimizerConfig::phase1_default(),
                &phase2,
                100,
                1,
                RestartSelection::LowestObjective,
            )
            .unwrap();
            serde_json::to_string(&result).unwrap()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn single_layer_request_skips_phase_two() {
        let (_, cascades) = two_layer_dataset(80);
        let (result, provenance) = run_pipeline(
            &cascades,
            1,
            &OptimizerConfig::phase1_default(),
            &OptimizerConfig::phase2_default(),
            100,
            1,
            RestartSelection::LowestObjective,
        )
        .unwrap();
        assert_eq!(result.n_layers, 1);
        assert!(result.phase2_trace.is_empty());
        assert!(result.restarts.is_empty());
        assert!(result.pi_hat.iter().all(|row| row == &vec![1.0]));
        assert_eq!(result.alpha_edges.len(), provenance.n_selected);
        assert!(result.final_nll.is_finite());
    }

    #[test]
    fn degenerate_inputs_abort_with_diagnostics() {
        let empty = CascadeSet::new(Vec::new());
        assert!(
            run_pipeline(
                &empty,
                2,
                &OptimizerConfig::phase1_default(),
                &OptimizerConfig::phase2_default(),
                10,
                1,
                RestartSelection::LowestObjective,
            )
            .is_err()
        );

        // Only simultaneous activations: no candidate pairs.
        let tied = CascadeSet::new(vec![cascade(0, 5.0, vec![(1, 0.5), (2, 0.5)])]);
        let err = run_pipeline(
            &tied,
            2,
            &OptimizerConfig::phase1_default(),
            &OptimizerConfig::phase2_default(),
            10,
            1,
            RestartSelection::LowestObjective,
        )
        .unwrap_err();
        assert!(err.to_string().contains("co-occurrence"));
    }

    #[test]
    fn truth_aware_selection_reports_accuracy_for_every_restart() {
        let (_, cascades) = two_layer_dataset(100);
        let e_p = candidate_edges(&cascades);
        let p1 = phase1_single_layer(&cascades, &e_p, &OptimizerConfig::phase1_default()).unwrap();
        let e_s = select_edges(&p1.candidate_edges, &p1.edge_scores, e_p.len().min(120)).unwrap();
        let opt = OptimizerConfig {
            max_iters: 80,
            restarts: vec![0, 1],
            ..OptimizerConfig::phase2_default()
        };
        let p2 = phase2_multilayer(&cascades, &e_s, 2, &opt, RestartSelection::TruthPiAccuracy)
            .unwrap();
        assert_eq!(p2.restarts.len(), 2);
        assert!(p2.restarts.iter().all(|r| r.pi_accuracy.is_some()));
        let best = p2
            .restarts
            .iter()
            .map(|r| r.pi_accuracy.unwrap())
            .fold(f64::NEG_INFINITY, f64::max);
        let chosen = p2
            .restarts
            .iter()
            .find(|r| r.seed == p2.chosen_seed)
            .unwrap();
        assert_eq!(chosen.pi_accuracy.unwrap(), best);
    }
}
