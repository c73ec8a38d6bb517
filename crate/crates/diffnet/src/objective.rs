//! Survival-analysis likelihood for cascades under exponential kernels.
//!
//! With constant hazard `λ`, a transmission attempt over edge `(i, j)` has
//! density `λ e^(-λ Δt)` and survival `e^(-λ Δt)`. For a cascade observed
//! on `[0, T)`, the negative log-likelihood decomposes into
//!
//! * a term `λ_uj Δt_uj` for every ordered pair of activations
//!   (`j` survived `u`'s pressure for `Δt_uj` before activating),
//! * `-log Σ_i λ_ij` over the earlier-activated in-neighbours of each
//!   non-seed activation (someone transmitted to `j`),
//! * a censoring term `λ_jn (T - t_j)` for every activated `j` and every
//!   node `n` still inactive at the horizon.
//!
//! The effective rate mixes per-layer rates with per-cascade weights:
//! `λ_ij = Σ_k π_k α_ij^k`. Nodes sharing a cascade's earliest activation
//! time are exogenous seeds: they contribute exposure and censoring
//! pressure on others but no activation term of their own.
//!
//! [`nll_oracle`] is a deliberately naive nested-loop transcription of the
//! above over the full pair space. [`nll_fast`] evaluates the same value
//! from sparse precomputed tensors restricted to an edge set, and
//! [`nll_value_and_gradient`] adds exact analytic gradients through the
//! sigmoid / stick-breaking reparameterizations. The two paths share no
//! code, so they can check each other.

use crate::cascade::{CascadeSet, PI_SUM_TOL};
use crate::error::{Error, Result};
use crate::network::{Edge, MultilayerNetwork};

/// Exponential transmission density `λ e^(-λ t)`.
pub fn exp_pdf(t: f64, lambda: f64) -> f64 {
    lambda * (-lambda * t).exp()
}

/// Exponential survival `e^(-λ t)`.
pub fn exp_survival(t: f64, lambda: f64) -> f64 {
    (-lambda * t).exp()
}

/// Hazard of the exponential kernel: constant in `t`.
pub fn exp_hazard(_t: f64, lambda: f64) -> f64 {
    lambda
}

/// Effective transmission rate `Σ_k π_k α_k` of one edge in one cascade.
pub fn mix_rates(pi: &[f64], layer_rates: &[f64]) -> f64 {
    debug_assert_eq!(pi.len(), layer_rates.len());
    pi.iter().zip(layer_rates).map(|(p, a)| p * a).sum()
}

/// Numerically stable logistic function.
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Objective value plus diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    /// Negative log-likelihood; `+inf` when a zero-hazard activation was hit.
    pub nll: f64,
    /// Activated non-seed nodes without candidate in-edges, whose
    /// activation terms were dropped from the objective.
    pub dropped_log_terms: usize,
    /// `(cascade id, node)` of activations with zero total incoming hazard.
    pub zero_hazard: Vec<(u64, u32)>,
}

// ---------------------------------------------------------------------------
// Oracle path: literal nested loops over the full pair space.
// ---------------------------------------------------------------------------

/// Reference NLL evaluation: nested loops over every ordered node pair,
/// with effective rates looked up from a ground-truth-style network and
/// per-cascade mixture rows. Quadratic per cascade; intended for small
/// instances and as the independent check on [`nll_fast`].
pub fn nll_oracle(
    cascades: &CascadeSet,
    net: &MultilayerNetwork,
    pi: &[Vec<f64>],
) -> Result<EvalReport> {
    let k_layers = net.n_layers() as usize;
    let n = net.n_nodes();
    if pi.len() != cascades.len() {
        return Err(Error::Config(format!(
            "pi has {} rows for {} cascades",
            pi.len(),
            cascades.len()
        )));
    }
    for row in pi {
        if row.len() != k_layers {
            return Err(Error::Config(format!(
                "pi row has {} entries for {} layers",
                row.len(),
                k_layers
            )));
        }
        let sum: f64 = row.iter().sum();
        if (sum - 1.0).abs() > PI_SUM_TOL || row.iter().any(|&p| !(0.0..=1.0).contains(&p)) {
            return Err(Error::Config(format!("pi row {row:?} not on the simplex")));
        }
    }

    let lambda = |pi_c: &[f64], i: u32, j: u32| -> f64 {
        (0..k_layers).map(|k| pi_c[k] * net.rate(k, i, j)).sum()
    };

    let mut nll = 0.0;
    let mut zero_hazard = Vec::new();
    for (c, pi_c) in cascades.iter().zip(pi) {
        let events = c.events();
        let horizon = c.horizon;
        let seed_time = c.seed_time();
        let mut activated = vec![false; n as usize];
        for &(node, _) in events {
            if node >= n {
                return Err(Error::Config(format!(
                    "cascade {}: node {} outside network with {} nodes",
                    c.id, node, n
                )));
            }
            activated[node as usize] = true;
        }

        for &(j, tj) in events {
            if tj > seed_time {
                // Activation of a non-seed: survived all earlier hazards,
                // then someone transmitted.
                let mut hazard_sum = 0.0;
                for &(i, ti) in events {
                    if ti < tj {
                        let l = lambda(pi_c, i, j);
                        nll += l * (tj - ti);
                        hazard_sum += l;
                    }
                }
                if hazard_sum == 0.0 {
                    zero_hazard.push((c.id, j));
                } else {
                    nll -= hazard_sum.ln();
                }
            }
            // Censoring: every inactive node survived j's pressure to T.
            for node in 0..n {
                if !activated[node as usize] {
                    nll += lambda(pi_c, j, node) * (horizon - tj);
                }
            }
        }
    }
    if !zero_hazard.is_empty() {
        nll = f64::INFINITY;
    }
    Ok(EvalReport {
        nll,
        dropped_log_terms: 0,
        zero_hazard,
    })
}

// ---------------------------------------------------------------------------
// Sparse tensors over a restricted edge set.
// ---------------------------------------------------------------------------

/// Per-cascade sparse view of the likelihood terms over one edge set.
#[derive(Debug, Clone, Default)]
pub struct CascadeTensor {
    pub cascade_id: u64,
    /// One group per activated non-seed node with candidate in-edges;
    /// nodes in activation order.
    pub group_node: Vec<u32>,
    /// CSR offsets into `group_edge` / `group_dt`; length `groups + 1`.
    pub group_start: Vec<u32>,
    /// Edge indices of successful-exposure pairs `t_i < t_j < T`.
    pub group_edge: Vec<u32>,
    /// Matching `t_j - t_i`, strictly positive.
    pub group_dt: Vec<f64>,
    /// Edge indices of failed-exposure pairs `t_i < T`, target inactive.
    pub surv_edge: Vec<u32>,
    /// Matching `T - t_i`, strictly positive.
    pub surv_dt: Vec<f64>,
    /// Activated non-seed nodes with no candidate in-edge at all; their
    /// activation terms are dropped (and counted) rather than -inf'd.
    pub dropped_nodes: Vec<u32>,
}

/// Precomputed likelihood terms for a cascade set over a fixed edge set.
#[derive(Debug, Clone)]
pub struct CascadeTensors {
    pub n_edges: usize,
    pub cascades: Vec<CascadeTensor>,
}

impl CascadeTensors {
    pub fn dropped_log_terms(&self) -> usize {
        self.cascades.iter().map(|t| t.dropped_nodes.len()).sum()
    }

    /// Total stored pairs; the memory footprint driver.
    pub fn n_pairs(&self) -> usize {
        self.cascades
            .iter()
            .map(|t| t.group_edge.len() + t.surv_edge.len())
            .sum()
    }

    /// Collapse to the single-layer view: per-edge exposure weights summed
    /// over cascades, activation groups flattened. Value-equivalent to the
    /// per-cascade form when all mixture rows are `[1]`.
    pub fn aggregate_single_layer(&self) -> SingleLayerTensors {
        let mut edge_weight = vec![0.0; self.n_edges];
        let mut group_start = vec![0u32];
        let mut group_edge = Vec::new();
        let mut group_cascade = Vec::new();
        let mut group_node = Vec::new();
        for t in &self.cascades {
            for (&e, &dt) in t.group_edge.iter().zip(&t.group_dt) {
                edge_weight[e as usize] += dt;
            }
            for (&e, &dt) in t.surv_edge.iter().zip(&t.surv_dt) {
                edge_weight[e as usize] += dt;
            }
            for g in 0..t.group_node.len() {
                let (lo, hi) = (t.group_start[g] as usize, t.group_start[g + 1] as usize);
                group_edge.extend_from_slice(&t.group_edge[lo..hi]);
                group_start.push(group_edge.len() as u32);
                group_cascade.push(t.cascade_id);
                group_node.push(t.group_node[g]);
            }
        }
        SingleLayerTensors {
            n_edges: self.n_edges,
            edge_weight,
            group_start,
            group_edge,
            group_cascade,
            group_node,
            dropped_log_terms: self.dropped_log_terms(),
        }
    }
}

/// Cascade-collapsed tensors for the single-layer objective.
#[derive(Debug, Clone)]
pub struct SingleLayerTensors {
    pub n_edges: usize,
    /// Per-edge total exposure time (successful + failed pairs, all cascades).
    pub edge_weight: Vec<f64>,
    pub group_start: Vec<u32>,
    pub group_edge: Vec<u32>,
    /// Diagnostics: owning cascade and node of each group.
    pub group_cascade: Vec<u64>,
    pub group_node: Vec<u32>,
    pub dropped_log_terms: usize,
}

/// Build sparse likelihood tensors for `cascades` restricted to `edges`
/// (sorted, deduplicated, self-loop-free).
pub fn build_tensors(cascades: &CascadeSet, edges: &[Edge]) -> Result<CascadeTensors> {
    if edges.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Config("edge set must be sorted and unique".into()));
    }
    if edges.iter().any(|&(s, d)| s == d) {
        return Err(Error::Config("edge set contains a self-loop".into()));
    }
    let n_nodes = {
        let edge_max = edges.iter().map(|&(s, d)| s.max(d)).max().unwrap_or(0);
        let event_max = cascades
            .iter()
            .flat_map(|c| c.events().iter().map(|&(v, _)| v))
            .max()
            .unwrap_or(0);
        edge_max.max(event_max) as usize + 1
    };

    // CSR by source: lexicographic edge order already groups by src.
    let mut out_start = vec![0u32; n_nodes + 1];
    for &(s, _) in edges {
        out_start[s as usize + 1] += 1;
    }
    for i in 0..n_nodes {
        out_start[i + 1] += out_start[i];
    }
    // CSR by destination.
    let mut in_edges: Vec<u32> = (0..edges.len() as u32).collect();
    in_edges.sort_unstable_by_key(|&e| {
        let (s, d) = edges[e as usize];
        (d, s)
    });
    let mut in_start = vec![0u32; n_nodes + 1];
    for &(_, d) in edges {
        in_start[d as usize + 1] += 1;
    }
    for i in 0..n_nodes {
        in_start[i + 1] += in_start[i];
    }

    let mut activation: Vec<f64> = vec![f64::NAN; n_nodes];
    let mut tensors = Vec::with_capacity(cascades.len());
    for c in cascades.iter() {
        let events = c.events();
        let seed_time = c.seed_time();
        for &(v, t) in events {
            activation[v as usize] = t;
        }

        let mut t = CascadeTensor {
            cascade_id: c.id,
            group_start: vec![0],
            ..Default::default()
        };
        for &(j, tj) in events {
            if tj > seed_time {
                let mut any = false;
                for idx in in_start[j as usize]..in_start[j as usize + 1] {
                    let e = in_edges[idx as usize];
                    let (i, _) = edges[e as usize];
                    let ti = activation[i as usize];
                    if ti < tj {
                        // NaN (inactive source) fails the comparison.
                        t.group_edge.push(e);
                        t.group_dt.push(tj - ti);
                        any = true;
                    }
                }
                if any {
                    t.group_node.push(j);
                    t.group_start.push(t.group_edge.len() as u32);
                } else {
                    t.dropped_nodes.push(j);
                }
            }
        }
        for &(i, ti) in events {
            for e in out_start[i as usize]..out_start[i as usize + 1] {
                let (_, dst) = edges[e as usize];
                if activation[dst as usize].is_nan() {
                    t.surv_edge.push(e);
                    t.surv_dt.push(c.horizon - ti);
                }
            }
        }
        for &(v, _) in events {
            activation[v as usize] = f64::NAN;
        }
        tensors.push(t);
    }
    Ok(CascadeTensors {
        n_edges: edges.len(),
        cascades: tensors,
    })
}

// ---------------------------------------------------------------------------
// Constrained parameters and the reparameterization.
// ---------------------------------------------------------------------------

/// Feasible parameter point: rates in `[0, 1]`, mixture rows on the simplex.
#[derive(Debug, Clone)]
pub struct ConstrainedParams {
    pub n_layers: usize,
    pub n_edges: usize,
    /// `alpha[k * n_edges + e]`.
    pub alpha: Vec<f64>,
    /// `pi[c * n_layers + k]`; one row per cascade.
    pub pi: Vec<f64>,
}

impl ConstrainedParams {
    pub fn new(n_layers: usize, n_edges: usize, alpha: Vec<f64>, pi: Vec<f64>) -> Result<Self> {
        if alpha.len() != n_layers * n_edges {
            return Err(Error::Config(format!(
                "alpha has {} entries, expected {} layers x {} edges",
                alpha.len(),
                n_layers,
                n_edges
            )));
        }
        if n_layers == 0 || pi.len() % n_layers != 0 {
            return Err(Error::Config("pi length not a multiple of n_layers".into()));
        }
        if alpha.iter().any(|&a| !(0.0..=1.0).contains(&a)) {
            return Err(Error::Config("alpha entries outside [0, 1]".into()));
        }
        for row in pi.chunks(n_layers) {
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > PI_SUM_TOL || row.iter().any(|&p| !(0.0..=1.0).contains(&p)) {
                return Err(Error::Config(format!("pi row {row:?} not on the simplex")));
            }
        }
        Ok(Self {
            n_layers,
            n_edges,
            alpha,
            pi,
        })
    }

    pub fn n_cascades(&self) -> usize {
        self.pi.len() / self.n_layers
    }

    pub fn alpha_at(&self, k: usize, e: usize) -> f64 {
        self.alpha[k * self.n_edges + e]
    }

    pub fn pi_row(&self, c: usize) -> &[f64] {
        &self.pi[c * self.n_layers..(c + 1) * self.n_layers]
    }
}

/// Free optimization variables: `alpha = σ(alpha_raw)` elementwise and
/// mixture rows built from `pi_raw` by recursive stick-breaking, so every
/// raw point maps to a feasible [`ConstrainedParams`].
#[derive(Debug, Clone)]
pub struct UnconstrainedParams {
    pub n_layers: usize,
    pub n_edges: usize,
    pub n_cascades: usize,
    /// `alpha_raw[k * n_edges + e]`.
    pub alpha_raw: Vec<f64>,
    /// `pi_raw[c * (n_layers - 1) + l]`; empty when `n_layers == 1`.
    pub pi_raw: Vec<f64>,
}

impl UnconstrainedParams {
    pub fn validate_shape(&self) -> Result<()> {
        if self.alpha_raw.len() != self.n_layers * self.n_edges {
            return Err(Error::Config("alpha_raw shape mismatch".into()));
        }
        if self.pi_raw.len() != self.n_cascades * (self.n_layers - 1) {
            return Err(Error::Config("pi_raw shape mismatch".into()));
        }
        Ok(())
    }
}

/// Stick-breaking for one mixture row: `out` has `K` entries, `raw` has
/// `K - 1`. The last entry is the remaining stick, so the row sums to 1 by
/// construction.
fn stick_break_row(raw: &[f64], out: &mut [f64]) {
    let k = out.len();
    debug_assert_eq!(raw.len(), k - 1);
    let mut remaining = 1.0;
    for l in 0..k - 1 {
        let p = sigmoid(raw[l]) * remaining;
        out[l] = p;
        remaining -= p;
    }
    out[k - 1] = remaining;
}

/// Map raw parameters to the feasible region.
pub fn transform_params(p: &UnconstrainedParams) -> Result<ConstrainedParams> {
    p.validate_shape()?;
    let alpha: Vec<f64> = p.alpha_raw.iter().map(|&x| sigmoid(x)).collect();
    let mut pi = vec![0.0; p.n_cascades * p.n_layers];
    if p.n_layers == 1 {
        pi.fill(1.0);
    } else {
        for c in 0..p.n_cascades {
            let raw = &p.pi_raw[c * (p.n_layers - 1)..(c + 1) * (p.n_layers - 1)];
            stick_break_row(raw, &mut pi[c * p.n_layers..(c + 1) * p.n_layers]);
        }
    }
    ConstrainedParams::new(p.n_layers, p.n_edges, alpha, pi)
}

// ---------------------------------------------------------------------------
// Fast path: value and analytic gradients over the tensors.
// ---------------------------------------------------------------------------

/// Evaluate the NLL from precomputed tensors at a feasible point.
/// Matches [`nll_oracle`] restricted to the same edge set.
pub fn nll_fast(tensors: &CascadeTensors, params: &ConstrainedParams) -> Result<EvalReport> {
    if params.n_edges != tensors.n_edges {
        return Err(Error::Config(format!(
            "params cover {} edges, tensors {}",
            params.n_edges, tensors.n_edges
        )));
    }
    if params.n_cascades() != tensors.cascades.len() {
        return Err(Error::Config(format!(
            "params cover {} cascades, tensors {}",
            params.n_cascades(),
            tensors.cascades.len()
        )));
    }
    let k = params.n_layers;
    let e_count = tensors.n_edges;
    let alpha = &params.alpha;

    let mut linear = 0.0;
    let mut log_sum = 0.0;
    let mut zero_hazard = Vec::new();
    for (c, t) in tensors.cascades.iter().enumerate() {
        let pi_c = params.pi_row(c);
        let lambda = |e: u32| -> f64 {
            let e = e as usize;
            (0..k).map(|l| pi_c[l] * alpha[l * e_count + e]).sum()
        };
        for g in 0..t.group_node.len() {
            let (lo, hi) = (t.group_start[g] as usize, t.group_start[g + 1] as usize);
            let mut hazard = 0.0;
            for (idx, &e) in t.group_edge[lo..hi].iter().enumerate() {
                let l = lambda(e);
                hazard += l;
                linear += t.group_dt[lo + idx] * l;
            }
            if hazard == 0.0 {
                zero_hazard.push((t.cascade_id, t.group_node[g]));
            } else {
                log_sum += hazard.ln();
            }
        }
        for (&e, &dt) in t.surv_edge.iter().zip(&t.surv_dt) {
            linear += dt * lambda(e);
        }
    }
    let nll = if zero_hazard.is_empty() {
        linear - log_sum
    } else {
        f64::INFINITY
    };
    Ok(EvalReport {
        nll,
        dropped_log_terms: tensors.dropped_log_terms(),
        zero_hazard,
    })
}

/// Single-layer objective over aggregated tensors: edge scores play the
/// role of rates, mixtures are implicitly `[1]`.
pub fn nll_single(tensors: &SingleLayerTensors, scores: &[f64]) -> Result<EvalReport> {
    if scores.len() != tensors.n_edges {
        return Err(Error::Config(format!(
            "{} scores for {} edges",
            scores.len(),
            tensors.n_edges
        )));
    }
    let mut linear = 0.0;
    for (w, s) in tensors.edge_weight.iter().zip(scores) {
        linear += w * s;
    }
    let mut log_sum = 0.0;
    let mut zero_hazard = Vec::new();
    for g in 0..tensors.group_start.len() - 1 {
        let (lo, hi) = (tensors.group_start[g] as usize, tensors.group_start[g + 1] as usize);
        let hazard: f64 = tensors.group_edge[lo..hi]
            .iter()
            .map(|&e| scores[e as usize])
            .sum();
        if hazard == 0.0 {
            zero_hazard.push((tensors.group_cascade[g], tensors.group_node[g]));
        } else {
            log_sum += hazard.ln();
        }
    }
    let nll = if zero_hazard.is_empty() {
        linear - log_sum
    } else {
        f64::INFINITY
    };
    Ok(EvalReport {
        nll,
        dropped_log_terms: tensors.dropped_log_terms,
        zero_hazard,
    })
}

/// Gradients of the NLL with respect to the raw parameters.
#[derive(Debug, Clone)]
pub struct Gradient {
    pub alpha_raw: Vec<f64>,
    pub pi_raw: Vec<f64>,
}

/// NLL value and exact gradient at a raw point, in one fused pass.
///
/// The chain rule through the reparameterization:
/// `∂α/∂α̂ = α(1-α)` per entry, and for stick-breaking with sticks
/// `s_l = σ(π̂_l)`: `∂π_k/∂π̂_l` is `π_k (1-s_k)` at `l = k`, `-π_k s_l`
/// for `l < k`, and zero for `l > k`, which reduces to suffix sums.
pub fn nll_value_and_gradient(
    tensors: &CascadeTensors,
    params: &UnconstrainedParams,
) -> Result<(f64, Gradient)> {
    params.validate_shape()?;
    if params.n_edges != tensors.n_edges || params.n_cascades != tensors.cascades.len() {
        return Err(Error::Config("params/tensors shape mismatch".into()));
    }
    let k = params.n_layers;
    let e_count = params.n_edges;
    let stride = k - 1;

    let alpha: Vec<f64> = params.alpha_raw.iter().map(|&x| sigmoid(x)).collect();
    // Adjoint w.r.t. constrained alpha; sigmoid chain applied at the end.
    let mut g_alpha = vec![0.0; alpha.len()];
    let mut g_pi_raw = vec![0.0; params.pi_raw.len()];

    let mut pi_c = vec![0.0; k];
    let mut g_pi = vec![0.0; k];

    let mut linear = 0.0;
    let mut log_sum = 0.0;
    for (c, t) in tensors.cascades.iter().enumerate() {
        if k == 1 {
            pi_c[0] = 1.0;
        } else {
            stick_break_row(&params.pi_raw[c * stride..(c + 1) * stride], &mut pi_c);
            g_pi.fill(0.0);
        }

        // Activation groups: value pass computes the hazard sum, adjoint
        // pass folds `dt - 1/S` into both parameter blocks.
        for g in 0..t.group_node.len() {
            let (lo, hi) = (t.group_start[g] as usize, t.group_start[g + 1] as usize);
            let mut hazard = 0.0;
            for (idx, &e) in t.group_edge[lo..hi].iter().enumerate() {
                let e = e as usize;
                let mut lam = 0.0;
                for l in 0..k {
                    lam += pi_c[l] * alpha[l * e_count + e];
                }
                hazard += lam;
                linear += t.group_dt[lo + idx] * lam;
            }
            // Positive by construction: sigmoid outputs and simplex rows
            // are strictly positive for finite raw values.
            log_sum += hazard.ln();
            let inv = 1.0 / hazard;
            for (idx, &e) in t.group_edge[lo..hi].iter().enumerate() {
                let e = e as usize;
                let coeff = t.group_dt[lo + idx] - inv;
                for l in 0..k {
                    g_alpha[l * e_count + e] += coeff * pi_c[l];
                    g_pi[l] += coeff * alpha[l * e_count + e];
                }
            }
        }
        for (&e, &dt) in t.surv_edge.iter().zip(&t.surv_dt) {
            let e = e as usize;
            for l in 0..k {
                let a = alpha[l * e_count + e];
                linear += dt * pi_c[l] * a;
                g_alpha[l * e_count + e] += dt * pi_c[l];
                g_pi[l] += dt * a;
            }
        }

        if k > 1 {
            // suffix[l] = Σ_{m >= l} g_pi[m] * π_m
            let mut suffix = 0.0;
            let mut suffixes = vec![0.0; k + 1];
            for l in (0..k).rev() {
                suffix += g_pi[l] * pi_c[l];
                suffixes[l] = suffix;
            }
            for l in 0..stride {
                let s_l = sigmoid(params.pi_raw[c * stride + l]);
                g_pi_raw[c * stride + l] =
                    g_pi[l] * pi_c[l] * (1.0 - s_l) - s_l * suffixes[l + 1];
            }
        }
    }

    for (g, &a) in g_alpha.iter_mut().zip(&alpha) {
        *g *= a * (1.0 - a);
    }
    Ok((
        linear - log_sum,
        Gradient {
            alpha_raw: g_alpha,
            pi_raw: g_pi_raw,
        },
    ))
}

/// Exact gradient at a raw point (value discarded).
pub fn nll_gradient(tensors: &CascadeTensors, params: &UnconstrainedParams) -> Result<Gradient> {
    nll_value_and_gradient(tensors, params).map(|(_, g)| g)
}

/// Single-layer value and gradient w.r.t. raw edge scores.
pub fn nll_single_value_and_gradient(
    tensors: &SingleLayerTensors,
    raw_scores: &[f64],
) -> Result<(f64, Vec<f64>)> {
    if raw_scores.len() != tensors.n_edges {
        return Err(Error::Config(format!(
            "{} raw scores for {} edges",
            raw_scores.len(),
            tensors.n_edges
        )));
    }
    let scores: Vec<f64> = raw_scores.iter().map(|&x| sigmoid(x)).collect();
    // ∂NLL/∂score starts from the exposure weights, log terms subtract.
    let mut grad = tensors.edge_weight.clone();
    let mut linear = 0.0;
    for (w, s) in tensors.edge_weight.iter().zip(&scores) {
        linear += w * s;
    }
    let mut log_sum = 0.0;
    for g in 0..tensors.group_start.len() - 1 {
        let (lo, hi) = (tensors.group_start[g] as usize, tensors.group_start[g + 1] as usize);
        let hazard: f64 = tensors.group_edge[lo..hi]
            .iter()
            .map(|&e| scores[e as usize])
            .sum();
        log_sum += hazard.ln();
        let inv = 1.0 / hazard;
        for &e in &tensors.group_edge[lo..hi] {
            grad[e as usize] -= inv;
        }
    }
    for (g, &s) in grad.iter_mut().zip(&scores) {
        *g *= s * (1.0 - s);
    }
    Ok((linear - log_sum, grad))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cascade::Cascade;
    use approx::assert_relative_eq;
    use rand::Rng;

    fn one_layer_pair_net(rate_fwd: f64, rate_back: f64) -> MultilayerNetwork {
        MultilayerNetwork::new(2, vec![vec![(0, 1, rate_fwd), (1, 0, rate_back)]]).unwrap()
    }

    fn cascade(id: u64, horizon: f64, events: &[(u32, f64)]) -> Cascade {
        Cascade::new(id, horizon, events.to_vec(), None).unwrap()
    }

    #[test]
    fn kernel_functions_match_frozen_values() {
        assert_eq!(exp_pdf(0.0, 0.7), 0.7);
        assert_relative_eq!(
            exp_pdf(1.0, std::f64::consts::LN_2),
            0.34657359027997264,
            max_relative = 1e-15
        );
        assert_relative_eq!(exp_pdf(2.0, 0.5), 0.18393972058572117, max_relative = 1e-15);
        assert_eq!(exp_survival(0.0, 0.9), 1.0);
        assert_relative_eq!(exp_survival(2.0, 0.5), (-1.0f64).exp(), max_relative = 1e-15);
        assert_eq!(exp_hazard(123.0, 0.4), 0.4);
    }

    #[test]
    fn pdf_equals_survival_times_hazard() {
        let mut rng = crate::rng::stream(11, 0);
        for _ in 0..200 {
            let t: f64 = rng.random_range(0.0..5.0);
            let lam: f64 = rng.random_range(0.01..1.0);
            let lhs = exp_pdf(t, lam);
            let rhs = exp_survival(t, lam) * exp_hazard(t, lam);
            assert_relative_eq!(lhs, rhs, max_relative = 1e-12);
        }
    }

    #[test]
    fn mix_rates_examples() {
        assert_eq!(mix_rates(&[1.0, 0.0], &[0.3, 0.9]), 0.3);
        assert_relative_eq!(mix_rates(&[0.5, 0.5], &[0.3, 0.9]), 0.6, max_relative = 1e-15);
        assert_eq!(mix_rates(&[1.0], &[0.42]), 0.42);
    }

    #[test]
    fn oracle_matches_hand_computed_activation_case() {
        // Seed at t=0, second node activates at t=1, horizon 2:
        // NLL = 0.5 * 1 - ln(0.5), frozen independently.
        let net = one_layer_pair_net(0.5, 0.5);
        let set = CascadeSet::new(vec![cascade(0, 2.0, &[(0, 0.0), (1, 1.0)])]);
        let report = nll_oracle(&set, &net, &[vec![1.0]]).unwrap();
        assert_relative_eq!(report.nll, 1.1931471805599454, max_relative = 1e-12);
        assert!(report.zero_hazard.is_empty());
    }

    #[test]
    fn oracle_matches_hand_computed_censoring_case() {
        // Only the seed activates; the other node survives rate 0.5 for T=2.
        let net = one_layer_pair_net(0.5, 0.5);
        let set = CascadeSet::new(vec![cascade(0, 2.0, &[(0, 0.0)])]);
        let report = nll_oracle(&set, &net, &[vec![1.0]]).unwrap();
        assert_relative_eq!(report.nll, 1.0, max_relative = 1e-12);
    }

    #[test]
    fn oracle_is_invariant_under_layer_relabeling() {
        let net = MultilayerNetwork::new(
            3,
            vec![
                vec![(0, 1, 0.8), (1, 2, 0.3)],
                vec![(0, 1, 0.1), (0, 2, 0.6)],
            ],
        )
        .unwrap();
        let swapped = MultilayerNetwork::new(
            3,
            vec![
                vec![(0, 1, 0.1), (0, 2, 0.6)],
                vec![(0, 1, 0.8), (1, 2, 0.3)],
            ],
        )
        .unwrap();
        let set = CascadeSet::new(vec![
            cascade(0, 5.0, &[(0, 0.0), (1, 1.5), (2, 2.0)]),
            cascade(1, 5.0, &[(1, 0.0), (2, 3.0)]),
        ]);
        let a = nll_oracle(&set, &net, &[vec![1.0, 0.0], vec![0.3, 0.7]]).unwrap();
        let b = nll_oracle(&set, &swapped, &[vec![0.0, 1.0], vec![0.7, 0.3]]).unwrap();
        assert_relative_eq!(a.nll, b.nll, max_relative = 1e-12);
    }

    #[test]
    fn oracle_reports_zero_hazard_nodes() {
        // Edge only from 1 to 0, but the cascade flows 0 -> 1: node 1 has
        // no incoming hazard at activation time.
        let net = MultilayerNetwork::new(2, vec![vec![(1, 0, 0.5)]]).unwrap();
        let set = CascadeSet::new(vec![cascade(7, 2.0, &[(0, 0.0), (1, 1.0)])]);
        let report = nll_oracle(&set, &net, &[vec![1.0]]).unwrap();
        assert!(report.nll.is_infinite());
        assert_eq!(report.zero_hazard, vec![(7, 1)]);
    }

    #[test]
    fn tensors_capture_exposure_failure_and_grouping() {
        // i=0 seeds, j=1 activates at 1, u=2 never activates; horizon 10.
        let set = CascadeSet::new(vec![cascade(3, 10.0, &[(0, 0.0), (1, 1.0)])]);
        let edges = vec![(0u32, 1u32), (0, 2), (1, 2)];
        let t = build_tensors(&set, &edges).unwrap();
        let ct = &t.cascades[0];
        assert_eq!(ct.group_node, vec![1]);
        assert_eq!(ct.group_edge, vec![0]);
        assert_eq!(ct.group_dt, vec![1.0]);
        assert_eq!(ct.surv_edge, vec![1, 2]);
        assert_eq!(ct.surv_dt, vec![10.0, 9.0]);
        assert!(ct.dropped_nodes.is_empty());
    }

    #[test]
    fn simultaneous_seeds_expose_nothing_to_each_other() {
        let set = CascadeSet::new(vec![cascade(0, 5.0, &[(0, 0.0), (1, 0.0)])]);
        let edges = vec![(0u32, 1u32), (1, 0)];
        let t = build_tensors(&set, &edges).unwrap();
        let ct = &t.cascades[0];
        assert!(ct.group_node.is_empty());
        assert!(ct.group_edge.is_empty());
        assert!(ct.surv_edge.is_empty());
        assert!(ct.dropped_nodes.is_empty());
    }

    #[test]
    fn activation_without_candidate_in_edges_is_dropped_and_counted() {
        // Node 2 activates but no candidate edge points at it.
        let set = CascadeSet::new(vec![cascade(0, 5.0, &[(0, 0.0), (2, 1.0)])]);
        let edges = vec![(0u32, 1u32)];
        let t = build_tensors(&set, &edges).unwrap();
        assert_eq!(t.cascades[0].dropped_nodes, vec![2]);
        assert_eq!(t.dropped_log_terms(), 1);
        // The surviving term: node 1 never activated, exposed by node 0.
        assert_eq!(t.cascades[0].surv_edge, vec![0]);
    }

    /// Random small instance where every non-seed activation has an
    /// earlier in-neighbour with positive rate (node 0 points everywhere).
    fn random_instance(
        seed: u64,
    ) -> (CascadeSet, MultilayerNetwork, Vec<Vec<f64>>) {
        let mut rng = crate::rng::stream(seed, 17);
        let n: u32 = rng.random_range(3..9);
        let k: usize = rng.random_range(1..4);
        let mut layers = vec![Vec::new(); k];
        for layer in layers.iter_mut() {
            for s in 0..n {
                for d in 0..n {
                    if s != d && (s == 0 || rng.random_range(0.0..1.0) < 0.4) {
                        layer.push((s, d, rng.random_range(0.01..1.0)));
                    }
                }
            }
        }
        let net = MultilayerNetwork::new(n, layers).unwrap();
        let horizon = 10.0;
        let n_cascades = rng.random_range(1..6);
        let mut cascades = Vec::new();
        let mut pis = Vec::new();
        for id in 0..n_cascades {
            let mut events = vec![(0u32, 0.0)];
            for v in 1..n {
                if rng.random_range(0.0..1.0) < 0.6 {
                    events.push((v, rng.random_range(0.0..horizon)));
                }
            }
            cascades.push(Cascade::new(id, horizon, events, None).unwrap());
            let mut row: Vec<f64> = (0..k).map(|_| rng.random_range(0.05..1.0)).collect();
            let sum: f64 = row.iter().sum();
            row.iter_mut().for_each(|p| *p /= sum);
            let drift: f64 = 1.0 - row.iter().sum::<f64>();
            row[0] += drift;
            pis.push(row);
        }
        (CascadeSet::new(cascades), net, pis)
    }

    fn full_pair_space(n: u32) -> Vec<Edge> {
        let mut edges = Vec::new();
        for s in 0..n {
            for d in 0..n {
                if s != d {
                    edges.push((s, d));
                }
            }
        }
        edges.sort_unstable();
        edges
    }

    fn dense_params(net: &MultilayerNetwork, edges: &[Edge], pis: &[Vec<f64>]) -> ConstrainedParams {
        let k = net.n_layers() as usize;
        let mut alpha = vec![0.0; k * edges.len()];
        for (e, &(s, d)) in edges.iter().enumerate() {
            for l in 0..k {
                alpha[l * edges.len() + e] = net.rate(l, s, d);
            }
        }
        let pi: Vec<f64> = pis.iter().flatten().copied().collect();
        ConstrainedParams::new(k, edges.len(), alpha, pi).unwrap()
    }

    #[test]
    fn fast_path_matches_oracle_on_random_instances() {
        for seed in 0..20 {
            let (set, net, pis) = random_instance(seed);
            let edges = full_pair_space(net.n_nodes());
            let tensors = build_tensors(&set, &edges).unwrap();
            let params = dense_params(&net, &edges, &pis);
            let fast = nll_fast(&tensors, &params).unwrap();
            let slow = nll_oracle(&set, &net, &pis).unwrap();
            assert_relative_eq!(fast.nll, slow.nll, max_relative = 1e-8);
            assert_eq!(fast.zero_hazard, slow.zero_hazard);
        }
    }

    #[test]
    fn fast_path_reproduces_oracle_zero_hazard_diagnostics() {
        let net = MultilayerNetwork::new(2, vec![vec![(1, 0, 0.5)]]).unwrap();
        let set = CascadeSet::new(vec![cascade(7, 2.0, &[(0, 0.0), (1, 1.0)])]);
        let edges = full_pair_space(2);
        let tensors = build_tensors(&set, &edges).unwrap();
        let params = dense_params(&net, &edges, &[vec![1.0]]);
        let fast = nll_fast(&tensors, &params).unwrap();
        let slow = nll_oracle(&set, &net, &[vec![1.0]]).unwrap();
        assert!(fast.nll.is_infinite() && slow.nll.is_infinite());
        assert_eq!(fast.zero_hazard, slow.zero_hazard);
        assert_eq!(fast.zero_hazard, vec![(7, 1)]);
    }

    #[test]
    fn empty_cascade_set_has_zero_nll() {
        let tensors = build_tensors(&CascadeSet::default(), &[(0, 1)]).unwrap();
        let params = ConstrainedParams::new(1, 1, vec![0.5], vec![]).unwrap();
        assert_eq!(nll_fast(&tensors, &params).unwrap().nll, 0.0);
    }

    #[test]
    fn single_layer_mode_equals_multilayer_with_unit_mixture() {
        for seed in 100..106 {
            let (set, net, _) = random_instance(seed);
            let edges = full_pair_space(net.n_nodes());
            let tensors = build_tensors(&set, &edges).unwrap();
            let single = tensors.aggregate_single_layer();
            let mut rng = crate::rng::stream(seed, 23);
            let scores: Vec<f64> = (0..edges.len()).map(|_| rng.random_range(0.01..1.0)).collect();
            let pi = vec![1.0; set.len()];
            let params = ConstrainedParams::new(1, edges.len(), scores.clone(), pi).unwrap();
            let a = nll_single(&single, &scores).unwrap();
            let b = nll_fast(&tensors, &params).unwrap();
            assert_relative_eq!(a.nll, b.nll, max_relative = 1e-10);
            assert_eq!(a.dropped_log_terms, b.dropped_log_terms);
        }
    }

    #[test]
    fn duplicating_cascades_doubles_the_objective() {
        let (set, net, pis) = random_instance(3);
        let edges = full_pair_space(net.n_nodes());
        let params = dense_params(&net, &edges, &pis);
        let single = nll_fast(&build_tensors(&set, &edges).unwrap(), &params).unwrap();

        let mut doubled = set.clone();
        let offset = doubled.len() as u64;
        for c in set.iter() {
            let mut c2 = c.clone();
            c2.id += offset;
            doubled.cascades.push(c2);
        }
        let pis2: Vec<Vec<f64>> = pis.iter().chain(pis.iter()).cloned().collect();
        let params2 = dense_params(&net, &edges, &pis2);
        let both = nll_fast(&build_tensors(&doubled, &edges).unwrap(), &params2).unwrap();
        assert_relative_eq!(both.nll, 2.0 * single.nll, max_relative = 1e-12);
    }

    #[test]
    fn transform_basics() {
        assert_eq!(sigmoid(0.0), 0.5);
        let p = UnconstrainedParams {
            n_layers: 3,
            n_edges: 1,
            n_cascades: 1,
            alpha_raw: vec![0.0, 0.0, 0.0],
            pi_raw: vec![0.0, 0.0],
        };
        let c = transform_params(&p).unwrap();
        assert_eq!(c.pi_row(0), &[0.5, 0.25, 0.25]);
        assert_eq!(c.alpha, vec![0.5, 0.5, 0.5]);

        let p = UnconstrainedParams {
            n_layers: 2,
            n_edges: 0,
            n_cascades: 1,
            alpha_raw: vec![],
            pi_raw: vec![40.0],
        };
        let c = transform_params(&p).unwrap();
        assert!((c.pi_row(0)[0] - 1.0).abs() < 1e-12);
        assert!(c.pi_row(0)[1].abs() < 1e-12);
    }

    #[test]
    fn transform_output_is_feasible_for_random_raw_points() {
        let mut rng = crate::rng::stream(5, 0);
        for _ in 0..200 {
            let k = rng.random_range(1..6);
            let e = rng.random_range(0..5);
            let c = rng.random_range(1..5);
            let p = UnconstrainedParams {
                n_layers: k,
                n_edges: e,
                n_cascades: c,
                alpha_raw: (0..k * e).map(|_| rng.random_range(-20.0..20.0)).collect(),
                pi_raw: (0..c * (k - 1)).map(|_| rng.random_range(-20.0..20.0)).collect(),
            };
            let t = transform_params(&p).unwrap();
            assert!(t.alpha.iter().all(|&a| a > 0.0 && a < 1.0));
            for row in t.pi.chunks(k) {
                let sum: f64 = row.iter().sum();
                assert!((sum - 1.0).abs() <= 1e-12, "row sum {sum}");
                assert!(row.iter().all(|&p| (0.0..=1.0).contains(&p)));
            }
        }
    }

    /// Central finite differences on the raw parameters; the independent
    /// oracle for the analytic gradient.
    fn fd_gradient(
        tensors: &CascadeTensors,
        params: &UnconstrainedParams,
        h: f64,
    ) -> (Vec<f64>, Vec<f64>) {
        let eval = |p: &UnconstrainedParams| -> f64 {
            nll_fast(tensors, &transform_params(p).unwrap()).unwrap().nll
        };
        let mut ga = vec![0.0; params.alpha_raw.len()];
        for i in 0..ga.len() {
            let mut plus = params.clone();
            plus.alpha_raw[i] += h;
            let mut minus = params.clone();
            minus.alpha_raw[i] -= h;
            ga[i] = (eval(&plus) - eval(&minus)) / (2.0 * h);
        }
        let mut gp = vec![0.0; params.pi_raw.len()];
        for i in 0..gp.len() {
            let mut plus = params.clone();
            plus.pi_raw[i] += h;
            let mut minus = params.clone();
            minus.pi_raw[i] -= h;
            gp[i] = (eval(&plus) - eval(&minus)) / (2.0 * h);
        }
        (ga, gp)
    }

    fn max_grad_error(analytic: &[f64], numeric: &[f64]) -> f64 {
        analytic
            .iter()
            .zip(numeric)
            .map(|(&a, &n)| {
                let scale = a.abs().max(n.abs());
                if scale < 1e-8 {
                    (a - n).abs()
                } else {
                    (a - n).abs() / scale
                }
            })
            .fold(0.0, f64::max)
    }

    fn random_raw_params(seed: u64, k: usize, e: usize, c: usize) -> UnconstrainedParams {
        let mut rng = crate::rng::stream(seed, 29);
        UnconstrainedParams {
            n_layers: k,
            n_edges: e,
            n_cascades: c,
            alpha_raw: (0..k * e).map(|_| rng.random_range(-3.0..3.0)).collect(),
            pi_raw: (0..c * (k - 1)).map(|_| rng.random_range(-3.0..3.0)).collect(),
        }
    }

    #[test]
    fn analytic_gradient_matches_finite_differences() {
        for seed in 40..46 {
            let (set, net, _) = random_instance(seed);
            let edges = full_pair_space(net.n_nodes());
            let tensors = build_tensors(&set, &edges).unwrap();
            let k = net.n_layers() as usize;
            let params = random_raw_params(seed, k, edges.len(), set.len());
            let (_, grad) = nll_value_and_gradient(&tensors, &params).unwrap();
            let (fd_a, fd_p) = fd_gradient(&tensors, &params, 1e-5);
            assert!(max_grad_error(&grad.alpha_raw, &fd_a) < 1e-4);
            assert!(max_grad_error(&grad.pi_raw, &fd_p) < 1e-4);
        }
    }

    #[test]
    fn saturated_rate_parameter_has_vanishing_gradient() {
        let (set, net, _) = random_instance(1);
        let edges = full_pair_space(net.n_nodes());
        let tensors = build_tensors(&set, &edges).unwrap();
        let k = net.n_layers() as usize;
        let mut params = random_raw_params(1, k, edges.len(), set.len());
        params.alpha_raw[0] = 40.0;
        let (_, grad) = nll_value_and_gradient(&tensors, &params).unwrap();
        assert!(grad.alpha_raw[0].abs() < 1e-10);
    }

    #[test]
    fn single_layer_problem_has_no_mixture_gradient() {
        let set = CascadeSet::new(vec![cascade(0, 2.0, &[(0, 0.0), (1, 1.0)])]);
        let tensors = build_tensors(&set, &[(0, 1)]).unwrap();
        let params = UnconstrainedParams {
            n_layers: 1,
            n_edges: 1,
            n_cascades: 1,
            alpha_raw: vec![0.3],
            pi_raw: vec![],
        };
        let (_, grad) = nll_value_and_gradient(&tensors, &params).unwrap();
        assert!(grad.pi_raw.is_empty());
    }

    #[test]
    fn single_layer_gradient_matches_finite_differences() {
        let (set, net, _) = random_instance(8);
        let edges = full_pair_space(net.n_nodes());
        let tensors = build_tensors(&set, &edges).unwrap().aggregate_single_layer();
        let mut rng = crate::rng::stream(8, 31);
        let raw: Vec<f64> = (0..edges.len()).map(|_| rng.random_range(-3.0..3.0)).collect();
        let (_, grad) = nll_single_value_and_gradient(&tensors, &raw).unwrap();
        let h = 1e-5;
        for i in 0..raw.len() {
            let mut plus = raw.clone();
            plus[i] += h;
            let mut minus = raw.clone();
            minus[i] -= h;
            let eval = |r: &[f64]| -> f64 {
                let scores: Vec<f64> = r.iter().map(|&x| sigmoid(x)).collect();
                nll_single(&tensors, &scores).unwrap().nll
            };
            let fd = (eval(&plus) - eval(&minus)) / (2.0 * h);
            let scale = grad[i].abs().max(fd.abs());
            let err = if scale < 1e-8 {
                (grad[i] - fd).abs()
            } else {
                (grad[i] - fd).abs() / scale
            };
            assert!(err < 1e-4, "component {i}: analytic {} vs fd {fd}", grad[i]);
        }
    }
}
