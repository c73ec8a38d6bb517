//! Synthetic ground truth: networks and cascades.
//!
//! Networks: per-layer directed configuration model over lognormal
//! in/out-degree sequences, with an overlap control `φ` between layers
//! (0: independent wirings, 1: identical wirings, 0.5: copy then rewire
//! half the edges). Rates are uniform on `(rate_low, rate_high)`;
//! every layer draws its own rates even when structure is shared.
//!
//! Cascades: exact continuous-time SIR. Each cascade draws a dominant
//! layer and a noise level, seeds every node independently with
//! probability `ρ` (resampling until non-empty), and propagates with
//! per-edge exponential transmission clocks racing node recovery clocks.
//! Because all clocks are independent exponentials with constant rates,
//! pre-drawing each attempt and discarding those that lose the race
//! samples exactly the same law as a global next-event simulation.
//!
//! Determinism: cascade `i` draws only from RNG stream
//! `STREAM_CASCADE_BASE + i` of the cascade seed, so any prefix of the
//! cascade sequence is stable under changes to the total count or to the
//! thread schedule.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use rand::Rng;
use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, LogNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cascade::{Cascade, CascadeSet, CascadeTruth};
use crate::error::{Error, Result};
use crate::network::{Edge, MultilayerNetwork};
use crate::rng::{self, STREAM_CASCADE_BASE, STREAM_DEGREES, STREAM_RATES, STREAM_WIRING};

/// Lognormal degree-distribution parameters (natural-log scale).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DegreeParams {
    pub mu_in: f64,
    pub sigma_in: f64,
    pub mu_out: f64,
    pub sigma_out: f64,
}

impl Default for DegreeParams {
    /// The dense "core" setting: mean in-degree ~ e.
    fn default() -> Self {
        Self {
            mu_in: 0.5,
            sigma_in: 1.0,
            mu_out: 0.0,
            sigma_out: std::f64::consts::SQRT_2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkGenConfig {
    pub n_nodes: u32,
    pub n_layers: u32,
    /// Edge overlap between layers: one of 0.0, 0.5, 1.0.
    #[serde(default)]
    pub overlap: f64,
    #[serde(default)]
    pub degrees: DegreeParams,
    #[serde(default = "default_rate_low")]
    pub rate_low: f64,
    #[serde(default = "default_rate_high")]
    pub rate_high: f64,
    #[serde(default)]
    pub seed: u64,
}

fn default_rate_low() -> f64 {
    0.01
}

fn default_rate_high() -> f64 {
    1.0
}

impl Default for NetworkGenConfig {
    /// Desk-scale defaults: large enough for stable trends, small enough
    /// for laptop runs.
    fn default() -> Self {
        Self {
            n_nodes: 250,
            n_layers: 2,
            overlap: 0.0,
            degrees: DegreeParams::default(),
            rate_low: default_rate_low(),
            rate_high: default_rate_high(),
            seed: 0,
        }
    }
}

impl NetworkGenConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_nodes < 2 {
            return Err(Error::Config("n_nodes must be >= 2".into()));
        }
        if self.n_layers == 0 {
            return Err(Error::Config("n_layers must be >= 1".into()));
        }
        if ![0.0, 0.5, 1.0].contains(&self.overlap) {
            return Err(Error::Config(format!(
                "overlap {} not in {{0, 0.5, 1}}",
                self.overlap
            )));
        }
        if !(self.degrees.sigma_in > 0.0 && self.degrees.sigma_out > 0.0) {
            return Err(Error::Config("degree sigmas must be > 0".into()));
        }
        if !(0.0 < self.rate_low && self.rate_low < self.rate_high && self.rate_high <= 1.0) {
            return Err(Error::Config(format!(
                "rate range ({}, {}) not within (0, 1]",
                self.rate_low, self.rate_high
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CascadeGenConfig {
    pub n_cascades: u64,
    #[serde(default = "default_horizon")]
    pub horizon: f64,
    pub recovery_rate: f64,
    #[serde(default)]
    pub eps_max: f64,
    /// Per-node seeding probability; defaults to `1 / n_nodes`.
    #[serde(default)]
    pub seed_prob: Option<f64>,
    #[serde(default)]
    pub seed: u64,
}

fn default_horizon() -> f64 {
    10.0
}

impl Default for CascadeGenConfig {
    fn default() -> Self {
        Self {
            n_cascades: 0,
            horizon: default_horizon(),
            recovery_rate: 2.0,
            eps_max: 0.0,
            seed_prob: None,
            seed: 0,
        }
    }
}

impl CascadeGenConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.horizon > 0.0) {
            return Err(Error::Config("horizon must be > 0".into()));
        }
        // γ = 0 means nodes never recover; useful for kernel checks.
        if !(self.recovery_rate >= 0.0) {
            return Err(Error::Config("recovery_rate must be >= 0".into()));
        }
        if !(0.0..1.0).contains(&self.eps_max) {
            return Err(Error::Config(format!("eps_max {} outside [0, 1)", self.eps_max)));
        }
        if let Some(p) = self.seed_prob {
            if !(p > 0.0 && p <= 1.0) {
                return Err(Error::Config(format!("seed_prob {p} outside (0, 1]")));
            }
        }
        Ok(())
    }

    pub fn resolved_seed_prob(&self, n_nodes: u32) -> f64 {
        self.seed_prob.unwrap_or(1.0 / n_nodes as f64)
    }
}

/// Draw balanced lognormal in/out-degree sequences: round, clip to
/// `[0, n-1]`, then repeatedly bump a uniformly chosen entry of the
/// smaller-sum sequence (respecting the cap) until the sums agree.
pub fn sample_degree_sequences(
    n: u32,
    params: &DegreeParams,
    rng: &mut ChaCha8Rng,
) -> Result<(Vec<u32>, Vec<u32>)> {
    if n < 2 {
        return Err(Error::Config("need at least 2 nodes".into()));
    }
    let cap = n - 1;
    let draw = |mu: f64, sigma: f64, rng: &mut ChaCha8Rng| -> Result<Vec<u32>> {
        let dist = LogNormal::new(mu, sigma)
            .map_err(|e| Error::Config(format!("lognormal({mu}, {sigma}): {e}")))?;
        Ok((0..n)
            .map(|_| (dist.sample(rng).round() as u32).min(cap))
            .collect())
    };
    let mut in_deg = draw(params.mu_in, params.sigma_in, rng)?;
    let mut out_deg = draw(params.mu_out, params.sigma_out, rng)?;

    let mut sum_in: u64 = in_deg.iter().map(|&d| d as u64).sum();
    let mut sum_out: u64 = out_deg.iter().map(|&d| d as u64).sum();
    while sum_in != sum_out {
        let (seq, sum) = if sum_in < sum_out {
            (&mut in_deg, &mut sum_in)
        } else {
            (&mut out_deg, &mut sum_out)
        };
        let i = rng.random_range(0..n as usize);
        if seq[i] < cap {
            seq[i] += 1;
            *sum += 1;
        }
    }
    Ok((in_deg, out_deg))
}

/// Match out-stubs to shuffled in-stubs, then drop self-loops and
/// parallel edges. Returns a sorted simple edge set.
pub fn directed_configuration_model(
    in_deg: &[u32],
    out_deg: &[u32],
    rng: &mut ChaCha8Rng,
) -> Result<Vec<Edge>> {
    if in_deg.len() != out_deg.len() {
        return Err(Error::Config("degree sequences differ in length".into()));
    }
    let sum_in: u64 = in_deg.iter().map(|&d| d as u64).sum();
    let sum_out: u64 = out_deg.iter().map(|&d| d as u64).sum();
    if sum_in != sum_out {
        return Err(Error::Config(format!(
            "stub counts differ: in {sum_in}, out {sum_out}"
        )));
    }
    let mut in_stubs: Vec<u32> = Vec::with_capacity(sum_in as usize);
    let mut out_stubs: Vec<u32> = Vec::with_capacity(sum_in as usize);
    for (node, (&di, &do_)) in in_deg.iter().zip(out_deg).enumerate() {
        in_stubs.extend(std::iter::repeat_n(node as u32, di as usize));
        out_stubs.extend(std::iter::repeat_n(node as u32, do_ as usize));
    }
    in_stubs.shuffle(rng);
    let mut edges: Vec<Edge> = out_stubs.into_iter().zip(in_stubs).collect();
    simplify(&mut edges);
    Ok(edges)
}

/// Drop self-loops and duplicates; sort.
fn simplify(edges: &mut Vec<Edge>) {
    edges.retain(|&(s, d)| s != d);
    edges.sort_unstable();
    edges.dedup();
}

/// Rewire edges by re-matching their stubs (self-loops and parallels
/// allowed during, removed at the end along with any clash against the
/// kept edges). Selection draws `count` edge indices uniformly with
/// replacement, so the distinct rewired set is somewhat smaller than
/// `count` and the realized overlap with the original lands near 0.6
/// rather than at 0.5.
fn rewire_edges(edges: &[Edge], count: usize, rng: &mut ChaCha8Rng) -> Vec<Edge> {
    let mut chosen = vec![false; edges.len()];
    for _ in 0..count {
        chosen[rng.random_range(0..edges.len())] = true;
    }
    let mut out_stubs: Vec<u32> = Vec::new();
    let mut in_stubs: Vec<u32> = Vec::new();
    let mut result: Vec<Edge> = Vec::new();
    for (i, &(s, d)) in edges.iter().enumerate() {
        if chosen[i] {
            out_stubs.push(s);
            in_stubs.push(d);
        } else {
            result.push((s, d));
        }
    }
    in_stubs.shuffle(rng);
    result.extend(out_stubs.into_iter().zip(in_stubs));
    simplify(&mut result);
    result
}

/// Generate a multilayer network per the overlap policy and draw
/// per-layer rates uniformly from `(rate_low, rate_high)`.
pub fn generate_network(cfg: &NetworkGenConfig) -> Result<MultilayerNetwork> {
    cfg.validate()?;
    let mut degree_rng = rng::stream(cfg.seed, STREAM_DEGREES);
    let mut wiring_rng = rng::stream(cfg.seed, STREAM_WIRING);
    let mut rate_rng = rng::stream(cfg.seed, STREAM_RATES);

    let k = cfg.n_layers as usize;
    let mut structures: Vec<Vec<Edge>> = Vec::with_capacity(k);
    if cfg.overlap == 0.0 {
        for _ in 0..k {
            let (in_deg, out_deg) =
                sample_degree_sequences(cfg.n_nodes, &cfg.degrees, &mut degree_rng)?;
            structures.push(directed_configuration_model(
                &in_deg,
                &out_deg,
                &mut wiring_rng,
            )?);
        }
    } else {
        let (in_deg, out_deg) =
            sample_degree_sequences(cfg.n_nodes, &cfg.degrees, &mut degree_rng)?;
        let base = directed_configuration_model(&in_deg, &out_deg, &mut wiring_rng)?;
        for layer in 1..k {
            let _ = layer;
            if cfg.overlap == 1.0 {
                structures.push(base.clone());
            } else {
                let count = (base.len() as f64 * (1.0 - cfg.overlap)).ceil() as usize;
                structures.push(rewire_edges(&base, count, &mut wiring_rng));
            }
        }
        structures.insert(0, base);
    }

    let mut layers = Vec::with_capacity(k);
    for structure in structures {
        let mut layer = Vec::with_capacity(structure.len());
        for (s, d) in structure {
            let rate = rate_rng.random_range(cfg.rate_low..cfg.rate_high);
            layer.push((s, d, rate));
        }
        layers.push(layer);
    }
    MultilayerNetwork::new(cfg.n_nodes, layers)
}

/// Draw a cascade's dominant layer and mixture row: weight `1 - ε` on the
/// dominant layer, `ε / (K - 1)` elsewhere, `ε ~ U(0, eps_max)`.
pub fn sample_membership(n_layers: u32, eps_max: f64, rng: &mut ChaCha8Rng) -> CascadeTruth {
    let k = n_layers as usize;
    let main_layer = rng.random_range(0..n_layers);
    let eps = if eps_max > 0.0 && k > 1 {
        rng.random_range(0.0..eps_max)
    } else {
        0.0
    };
    membership_row(main_layer, eps, k)
}

/// Deterministic mixture row for a known dominant layer and noise level.
pub fn membership_row(main_layer: u32, eps: f64, n_layers: usize) -> CascadeTruth {
    let mut pi = vec![0.0; n_layers];
    if n_layers == 1 {
        pi[0] = 1.0;
    } else {
        let off = eps / (n_layers - 1) as f64;
        pi.fill(off);
        pi[main_layer as usize] = 1.0 - eps;
    }
    CascadeTruth {
        main_layer,
        eps,
        pi,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Arrival {
    /// Transmission arrival instant; f64 total order is safe because
    /// simulation never produces NaN times.
    time_bits: u64,
    node: u32,
}

impl Arrival {
    fn new(time: f64, node: u32) -> Self {
        Self {
            time_bits: time.to_bits(),
            node,
        }
    }

    fn time(&self) -> f64 {
        f64::from_bits(self.time_bits)
    }
}

impl Ord for Arrival {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.time()
            .total_cmp(&other.time())
            .then(self.node.cmp(&other.node))
    }
}

impl PartialOrd for Arrival {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

/// Exact SIR run from explicit seed nodes. Returns `(node, time)` events.
///
/// Each infection draws its recovery duration, then one exponential
/// transmission clock per out-edge; an attempt is kept only if it beats
/// the recovery clock and the horizon. Memorylessness of the exponential
/// makes this equivalent to event-by-event Gillespie simulation.
pub fn simulate_from_seeds(
    net: &MultilayerNetwork,
    pi: &[f64],
    seeds: &[u32],
    recovery_rate: f64,
    horizon: f64,
    rng: &mut ChaCha8Rng,
) -> Vec<(u32, f64)> {
    let n = net.n_nodes() as usize;
    let mut activation = vec![f64::NAN; n];
    let mut events: Vec<(u32, f64)> = Vec::new();
    let mut pending: BinaryHeap<Reverse<Arrival>> = BinaryHeap::new();
    let union = net.union_edges();

    let mut infect = |v: u32,
                      t: f64,
                      activation: &mut Vec<f64>,
                      pending: &mut BinaryHeap<Reverse<Arrival>>,
                      rng: &mut ChaCha8Rng| {
        activation[v as usize] = t;
        events.push((v, t));
        let duration = if recovery_rate > 0.0 {
            Exp::new(recovery_rate).expect("positive rate").sample(rng)
        } else {
            f64::INFINITY
        };
        for e in net.out_edge_range(v) {
            let lambda = crate::objective::mix_rates(pi, net.rates_of(e));
            if lambda <= 0.0 {
                continue;
            }
            let tau = Exp::new(lambda).expect("positive rate").sample(rng);
            let arrival = t + tau;
            if tau < duration && arrival < horizon {
                pending.push(Reverse(Arrival::new(arrival, union[e].1)));
            }
        }
    };

    for &s in seeds {
        if activation[s as usize].is_nan() {
            infect(s, 0.0, &mut activation, &mut pending, rng);
        }
    }
    while let Some(Reverse(arrival)) = pending.pop() {
        if activation[arrival.node as usize].is_nan() {
            infect(
                arrival.node,
                arrival.time(),
                &mut activation,
                &mut pending,
                rng,
            );
        }
    }
    events
}

/// One cascade: Bernoulli seeding (resampled until non-empty), then SIR.
pub fn simulate_cascade(
    net: &MultilayerNetwork,
    pi: &[f64],
    cfg: &CascadeGenConfig,
    rng: &mut ChaCha8Rng,
) -> Vec<(u32, f64)> {
    let p = cfg.resolved_seed_prob(net.n_nodes());
    let mut seeds = Vec::new();
    while seeds.is_empty() {
        for v in 0..net.n_nodes() {
            if rng.random_range(0.0..1.0) < p {
                seeds.push(v);
            }
        }
    }
    simulate_from_seeds(net, pi, &seeds, cfg.recovery_rate, cfg.horizon, rng)
}

/// Generate a network and a cascade set, keeping cascades larger than
/// `s_c`. Single-node cascades are uninformative and always removed
/// regardless of `s_c`; cascade ids keep their simulation index so
/// prefixes are stable across different `n_cascades`.
pub fn generate_dataset(
    net_cfg: &NetworkGenConfig,
    casc_cfg: &CascadeGenConfig,
    s_c: usize,
) -> Result<(MultilayerNetwork, CascadeSet)> {
    casc_cfg.validate()?;
    let net = generate_network(net_cfg)?;
    let cascades = simulate_cascades(&net, casc_cfg)?;
    Ok((net, crate::cascade::filter_cascades(&cascades, s_c)))
}

/// Simulate `cfg.n_cascades` cascades on an existing network (size-1
/// cascades removed).
pub fn simulate_cascades(net: &MultilayerNetwork, cfg: &CascadeGenConfig) -> Result<CascadeSet> {
    cfg.validate()?;
    let k = net.n_layers();
    let cascades: Vec<Cascade> = (0..cfg.n_cascades)
        .into_par_iter()
        .map(|i| {
            let mut rng = rng::stream(cfg.seed, STREAM_CASCADE_BASE + i);
            let truth = sample_membership(k, cfg.eps_max, &mut rng);
            let events = simulate_cascade(net, &truth.pi, cfg, &mut rng);
            Cascade::new(i, cfg.horizon, events, Some(truth)).expect("simulated cascade is valid")
        })
        .filter(|c| c.size() > 1)
        .collect();
    Ok(CascadeSet::new(cascades))
}
