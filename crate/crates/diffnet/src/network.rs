//! Multilayer network types.
//!
//! Node ids are dense integers in `[0, N)`. Layers share the node set and
//! carry directed edges with transmission rates in `(0, 1]`. The union of
//! the per-layer edge sets is the aggregated network; most of the crate
//! (candidate pruning, edge selection, ROC analysis) works on that union.

use std::collections::HashSet;

use crate::error::{Error, Result};

/// Directed edge `(src, dst)`; tuple order gives the canonical
/// lexicographic ordering used everywhere for determinism.
pub type Edge = (u32, u32);

/// A weighted directed multilayer network over a common node set.
///
/// Construction validates all invariants; instances are immutable
/// afterwards and safe to share across threads.
#[derive(Debug, Clone)]
pub struct MultilayerNetwork {
    n_nodes: u32,
    /// Per-layer `(src, dst, rate)`, sorted by `(src, dst)`.
    layers: Vec<Vec<(u32, u32, f64)>>,
    /// Union edge set, sorted lexicographically; doubles as a CSR over
    /// sources because lexicographic order groups edges by `src`.
    union: Vec<Edge>,
    /// `union_rates[e * K + k]` is the layer-`k` rate of union edge `e`,
    /// zero when the layer does not contain the edge.
    union_rates: Vec<f64>,
    /// CSR offsets: union edges of node `i` are `union[out[i]..out[i+1]]`.
    out: Vec<u32>,
}

impl MultilayerNetwork {
    pub fn new(n_nodes: u32, mut layers: Vec<Vec<(u32, u32, f64)>>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::Invariant("network needs at least one layer".into()));
        }
        for (k, edges) in layers.iter_mut().enumerate() {
            edges.sort_unstable_by_key(|&(s, d, _)| (s, d));
            let mut prev: Option<Edge> = None;
            for &(s, d, r) in edges.iter() {
                if s >= n_nodes || d >= n_nodes {
                    return Err(Error::Invariant(format!(
                        "layer {k}: edge ({s},{d}) references node >= n_nodes={n_nodes}"
                    )));
                }
                if s == d {
                    return Err(Error::Invariant(format!("layer {k}: self-loop at node {s}")));
                }
                if !(r > 0.0 && r <= 1.0) {
                    return Err(Error::Invariant(format!(
                        "layer {k}: edge ({s},{d}) rate {r} outside (0, 1]"
                    )));
                }
                if prev == Some((s, d)) {
                    return Err(Error::Invariant(format!(
                        "layer {k}: duplicate edge ({s},{d})"
                    )));
                }
                prev = Some((s, d));
            }
        }

        let k_layers = layers.len();
        let mut union: Vec<Edge> = layers
            .iter()
            .flat_map(|es| es.iter().map(|&(s, d, _)| (s, d)))
            .collect();
        union.sort_unstable();
        union.dedup();

        let mut union_rates = vec![0.0; union.len() * k_layers];
        for (k, edges) in layers.iter().enumerate() {
            for &(s, d, r) in edges {
                let e = union.binary_search(&(s, d)).expect("edge in union");
                union_rates[e * k_layers + k] = r;
            }
        }

        let mut out = vec![0u32; n_nodes as usize + 2];
        for &(s, _) in &union {
            out[s as usize + 1] += 1;
        }
        for i in 1..out.len() {
            out[i] += out[i - 1];
        }
        out.truncate(n_nodes as usize + 1);

        Ok(Self {
            n_nodes,
            layers,
            union,
            union_rates,
            out,
        })
    }

    pub fn n_nodes(&self) -> u32 {
        self.n_nodes
    }

    pub fn n_layers(&self) -> u32 {
        self.layers.len() as u32
    }

    /// Layer edge list, sorted by `(src, dst)`.
    pub fn layer_edges(&self, k: usize) -> &[(u32, u32, f64)] {
        &self.layers[k]
    }

    /// Union edge set across layers, sorted lexicographically.
    pub fn union_edges(&self) -> &[Edge] {
        &self.union
    }

    /// Per-layer rates of union edge `e` (zero where the layer lacks it).
    pub fn rates_of(&self, e: usize) -> &[f64] {
        let k = self.layers.len();
        &self.union_rates[e * k..(e + 1) * k]
    }

    /// Layer-`k` rate of `(src, dst)`, or 0 when absent.
    pub fn rate(&self, k: usize, src: u32, dst: u32) -> f64 {
        match self.union.binary_search(&(src, dst)) {
            Ok(e) => self.union_rates[e * self.layers.len() + k],
            Err(_) => 0.0,
        }
    }

    /// Union edge indices leaving `node`, ascending by destination.
    pub fn out_edge_range(&self, node: u32) -> std::ops::Range<usize> {
        self.out[node as usize] as usize..self.out[node as usize + 1] as usize
    }

    /// Union of the per-layer edge sets.
    pub fn aggregate(&self) -> AggregatedNetwork {
        AggregatedNetwork {
            n_nodes: self.n_nodes,
            edges: self.union.clone(),
            scores: None,
        }
    }

    /// Mean over layer pairs of `|E^a ∩ E^b| / min(|E^a|, |E^b|)`;
    /// `None` for single-layer networks or when a layer is empty.
    pub fn pairwise_overlap(&self) -> Option<f64> {
        let k = self.layers.len();
        if k < 2 || self.layers.iter().any(|l| l.is_empty()) {
            return None;
        }
        let sets: Vec<HashSet<Edge>> = self
            .layers
            .iter()
            .map(|es| es.iter().map(|&(s, d, _)| (s, d)).collect())
            .collect();
        let mut total = 0.0;
        let mut pairs = 0usize;
        for a in 0..k {
            for b in a + 1..k {
                let inter = sets[a].intersection(&sets[b]).count();
                total += inter as f64 / sets[a].len().min(sets[b].len()) as f64;
                pairs += 1;
            }
        }
        Some(total / pairs as f64)
    }
}

/// Union edge set of a multilayer network, optionally carrying per-edge
/// scores (phase-1 output attaches single-layer edge scores here).
#[derive(Debug, Clone)]
pub struct AggregatedNetwork {
    pub n_nodes: u32,
    /// Sorted lexicographically.
    pub edges: Vec<Edge>,
    /// Aligned with `edges` when present.
    pub scores: Option<Vec<f64>>,
}

impl AggregatedNetwork {
    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }
}
