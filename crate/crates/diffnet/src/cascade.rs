//! Cascade types.
//!
//! A cascade records which nodes activated and when, within an observation
//! window `[0, T)`. Nodes that never activated simply do not appear; the
//! likelihood treats them as censored at `T`. All nodes sharing the
//! earliest activation time of a cascade are its exogenous seeds.

use crate::error::{Error, Result};

pub const PI_SUM_TOL: f64 = 1e-12;

/// Ground-truth generation labels carried by synthetic cascades.
#[derive(Debug, Clone, PartialEq)]
pub struct CascadeTruth {
    /// Dominant layer index (0-based).
    pub main_layer: u32,
    /// Noise level: weight `1 - eps` went to `main_layer`.
    pub eps: f64,
    /// Full mixture weights over layers; sums to 1.
    pub pi: Vec<f64>,
}

impl CascadeTruth {
    pub fn validate(&self) -> Result<()> {
        if self.pi.is_empty() {
            return Err(Error::Invariant("truth.pi must be non-empty".into()));
        }
        if (self.main_layer as usize) >= self.pi.len() {
            return Err(Error::Invariant(format!(
                "truth.main_layer {} out of range for {} layers",
                self.main_layer,
                self.pi.len()
            )));
        }
        if !(0.0..1.0).contains(&self.eps) {
            return Err(Error::Invariant(format!("truth.eps {} outside [0, 1)", self.eps)));
        }
        if self.pi.iter().any(|&p| !(0.0..=1.0).contains(&p)) {
            return Err(Error::Invariant("truth.pi entries outside [0, 1]".into()));
        }
        let sum: f64 = self.pi.iter().sum();
        if (sum - 1.0).abs() > PI_SUM_TOL {
            return Err(Error::Invariant(format!("truth.pi sums to {sum}, not 1")));
        }
        Ok(())
    }
}

/// One observed cascade: activation events within `[0, horizon)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Cascade {
    pub id: u64,
    pub horizon: f64,
    /// `(node, time)`, sorted by `(time, node)`; each node at most once.
    events: Vec<(u32, f64)>,
    pub truth: Option<CascadeTruth>,
}

impl Cascade {
    pub fn new(
        id: u64,
        horizon: f64,
        mut events: Vec<(u32, f64)>,
        truth: Option<CascadeTruth>,
    ) -> Result<Self> {
        if !(horizon > 0.0) {
            return Err(Error::Invariant(format!("cascade {id}: horizon {horizon} not > 0")));
        }
        if events.is_empty() {
            return Err(Error::Invariant(format!("cascade {id}: no activated nodes")));
        }
        events.sort_unstable_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
        for &(node, t) in &events {
            if !(t >= 0.0 && t < horizon) {
                return Err(Error::Invariant(format!(
                    "cascade {id}: node {node} activation time {t} outside [0, {horizon})"
                )));
            }
        }
        let mut nodes: Vec<u32> = events.iter().map(|&(n, _)| n).collect();
        nodes.sort_unstable();
        if nodes.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Invariant(format!("cascade {id}: duplicate node activation")));
        }
        if let Some(t) = &truth {
            t.validate()?;
        }
        Ok(Self {
            id,
            horizon,
            events,
            truth,
        })
    }

    /// Events sorted by `(time, node)`.
    pub fn events(&self) -> &[(u32, f64)] {
        &self.events
    }

    /// Number of activated nodes.
    pub fn size(&self) -> usize {
        self.events.len()
    }

    /// Earliest activation time; every node at this time is a seed.
    pub fn seed_time(&self) -> f64 {
        self.events[0].1
    }

    /// Number of leading events that are exogenous seeds.
    pub fn n_seeds(&self) -> usize {
        let t0 = self.seed_time();
        self.events.iter().take_while(|&&(_, t)| t == t0).count()
    }
}

/// An ordered collection of cascades over a shared node universe.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CascadeSet {
    pub cascades: Vec<Cascade>,
}

impl CascadeSet {
    pub fn new(cascades: Vec<Cascade>) -> Self {
        Self { cascades }
    }

    pub fn len(&self) -> usize {
        self.cascades.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cascades.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Cascade> {
        self.cascades.iter()
    }

    /// True when every cascade carries generation truth.
    pub fn has_truth(&self) -> bool {
        !self.is_empty() && self.cascades.iter().all(|c| c.truth.is_some())
    }
}

/// Keep cascades with more than `s_c` activated nodes, preserving order
/// and ids. `s_c = 0` keeps everything (generation already removed
/// single-node cascades); `s_c = 1` is equivalent to that removal.
pub fn filter_cascades(set: &CascadeSet, s_c: usize) -> CascadeSet {
    CascadeSet::new(
        set.cascades
            .iter()
            .filter(|c| c.size() > s_c)
            .cloned()
            .collect(),
    )
}
