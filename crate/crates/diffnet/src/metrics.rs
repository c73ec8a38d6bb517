//! Evaluation of inference output against synthetic ground truth.
//!
//! Includes the layer-matching step: inferred layers carry arbitrary
//! indices, so all K! alignments are searched and the one maximizing
//! membership classification accuracy is used (ties broken by rate
//! correlation, then lexicographically).

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::cascade::CascadeSet;
use crate::error::{Error, Result};
use crate::network::{Edge, MultilayerNetwork};

/// Scoring universe for edge-classification metrics.
#[derive(Debug, Clone)]
pub enum PairUniverse {
    /// All ordered non-self pairs of an n-node graph; pairs without an
    /// explicit score count as scored 0.
    All { n_nodes: u32 },
    /// An explicit pair list (mainly for small hand-checked cases).
    Explicit(Vec<Edge>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeRecovery {
    pub hits: usize,
    pub total: usize,
    pub rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    /// ROC AUC of phase-1 edge scores against the aggregated truth edges.
    pub auc: f64,
    /// Fraction of cascades whose dominant inferred layer matches truth.
    pub pi_accuracy: f64,
    /// Spearman correlation of inferred vs true rates over non-zero
    /// truth entries.
    pub alpha_spearman: f64,
    /// Per-truth-layer precision-recall AUC; `None` when the layer has
    /// no edges.
    pub pr_auc_per_layer: Vec<Option<f64>>,
    pub pr_auc_mean: f64,
    pub edge_recovery: EdgeRecovery,
    /// `matched_permutation[inferred_layer] = truth_layer`.
    pub matched_permutation: Vec<usize>,
}

fn check_pairs(label: &str, pairs: impl Iterator<Item = Edge>) -> Result<HashSet<Edge>> {
    let mut set = HashSet::new();
    for (s, d) in pairs {
        if s == d {
            return Err(Error::Invariant(format!("{label} contains self-pair ({s},{d})")));
        }
        if !set.insert((s, d)) {
            return Err(Error::Invariant(format!("{label} contains duplicate ({s},{d})")));
        }
    }
    Ok(set)
}

/// Merge (score, positives, negatives) entries into ascending tie groups.
fn tie_groups(mut entries: Vec<(f64, u64, u64)>) -> Vec<(f64, u64, u64)> {
    entries.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut groups: Vec<(f64, u64, u64)> = Vec::with_capacity(entries.len());
    for (score, p, n) in entries {
        match groups.last_mut() {
            Some(g) if g.0 == score => {
                g.1 += p;
                g.2 += n;
            }
            _ => groups.push((score, p, n)),
        }
    }
    groups
}

/// Mann-Whitney AUC over ascending tie groups: the probability that a
/// random positive outscores a random negative, ties counting half.
fn auc_from_groups(entries: Vec<(f64, u64, u64)>) -> Result<f64> {
    let groups = tie_groups(entries);
    let total_pos: u64 = groups.iter().map(|g| g.1).sum();
    let total_neg: u64 = groups.iter().map(|g| g.2).sum();
    if total_pos == 0 || total_neg == 0 {
        return Err(Error::Degenerate(
            "AUC undefined: need at least one positive and one negative".into(),
        ));
    }
    let mut wins = 0.0;
    let mut neg_below = 0u64;
    for (_, p, n) in groups {
        wins += p as f64 * (neg_below as f64 + n as f64 / 2.0);
        neg_below += n;
    }
    Ok(wins / (total_pos as f64 * total_neg as f64))
}

/// ROC AUC of edge scores against the truth edge set over `universe`.
/// Universe pairs missing from `scored` take score 0.
pub fn roc_auc(scored: &[(Edge, f64)], truth: &[Edge], universe: &PairUniverse) -> Result<f64> {
    let scored_set = check_pairs("scored pairs", scored.iter().map(|&(e, _)| e))?;
    let truth_set = check_pairs("truth edges", truth.iter().copied())?;
    let universe_total: u64 = match universe {
        PairUniverse::All { n_nodes } => {
            let n = *n_nodes as u64;
            let inside = |&(s, d): &Edge| s < *n_nodes && d < *n_nodes;
            if !scored_set.iter().all(inside) || !truth_set.iter().all(inside) {
                return Err(Error::Invariant("pair outside node range".into()));
            }
            n * (n - 1)
        }
        PairUniverse::Explicit(pairs) => {
            let uni = check_pairs("universe", pairs.iter().copied())?;
            if !scored_set.is_subset(&uni) || !truth_set.is_subset(&uni) {
                return Err(Error::Invariant("pair outside explicit universe".into()));
            }
            uni.len() as u64
        }
    };

    let mut entries: Vec<(f64, u64, u64)> = Vec::with_capacity(scored.len() + 1);
    let mut scored_pos = 0u64;
    for &(e, score) in scored {
        let pos = truth_set.contains(&e);
        scored_pos += pos as u64;
        entries.push((score, pos as u64, !pos as u64));
    }
    let pos_zero = truth_set.len() as u64 - scored_pos;
    let neg_zero = universe_total - scored.len() as u64 - pos_zero;
    if pos_zero + neg_zero > 0 {
        entries.push((0.0, pos_zero, neg_zero));
    }
    auc_from_groups(entries)
}

/// 1-based ranks with ties averaged.
fn average_ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut ranks = vec![0.0; v.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &t in &idx[i..=j] {
            ranks[t] = avg;
        }
        i = j + 1;
    }
    ranks
}

/// Spearman rank correlation with average ranks for ties.
pub fn spearman(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::Invariant("spearman inputs differ in length".into()));
    }
    if a.len() < 2 {
        return Err(Error::Degenerate("spearman needs at least 2 entries".into()));
    }
    let ra = average_ranks(a);
    let rb = average_ranks(b);
    let n = a.len() as f64;
    let mean = (n + 1.0) / 2.0;
    let mut cov = 0.0;
    let mut var_a = 0.0;
    let mut var_b = 0.0;
    for i in 0..a.len() {
        let da = ra[i] - mean;
        let db = rb[i] - mean;
        cov += da * db;
        var_a += da * da;
        var_b += db * db;
    }
    if var_a == 0.0 || var_b == 0.0 {
        return Err(Error::Degenerate("spearman undefined for constant input".into()));
    }
    Ok(cov / (var_a * var_b).sqrt())
}

fn argmax_lowest(row: &[f64]) -> usize {
    let mut best = 0;
    for (k, &v) in row.iter().enumerate().skip(1) {
        if v > row[best] {
            best = k;
        }
    }
    best
}

fn count_hits(pi_hat: &[Vec<f64>], truth_labels: &[u32], perm: &[usize]) -> usize {
    pi_hat
        .iter()
        .zip(truth_labels)
        .filter(|(row, &label)| perm[argmax_lowest(row)] == label as usize)
        .count()
}

/// Fraction of cascades whose permuted dominant inferred layer equals the
/// true dominant layer; argmax ties resolve to the lowest layer index.
pub fn pi_accuracy(pi_hat: &[Vec<f64>], truth_labels: &[u32], perm: &[usize]) -> Result<f64> {
    if pi_hat.len() != truth_labels.len() {
        return Err(Error::Invariant("pi rows and labels differ in length".into()));
    }
    if pi_hat.is_empty() {
        return Err(Error::Degenerate("pi accuracy over zero cascades".into()));
    }
    Ok(count_hits(pi_hat, truth_labels, perm) as f64 / pi_hat.len() as f64)
}

/// Best achievable pi accuracy over all layer permutations. Used for
/// truth-aware restart selection where only the score matters.
pub fn best_pi_accuracy(pi_hat: &[Vec<f64>], truth_labels: &[u32], k: usize) -> Result<f64> {
    if pi_hat.is_empty() {
        return Err(Error::Degenerate("pi accuracy over zero cascades".into()));
    }
    let mut best = 0usize;
    for perm in permutations(k) {
        best = best.max(count_hits(pi_hat, truth_labels, &perm));
    }
    Ok(best as f64 / pi_hat.len() as f64)
}

fn permutations(k: usize) -> Vec<Vec<usize>> {
    let mut result = Vec::new();
    let mut current: Vec<usize> = Vec::with_capacity(k);
    let mut used = vec![false; k];
    fn rec(k: usize, current: &mut Vec<usize>, used: &mut Vec<bool>, out: &mut Vec<Vec<usize>>) {
        if current.len() == k {
            out.push(current.clone());
            return;
        }
        for i in 0..k {
            if !used[i] {
                used[i] = true;
                current.push(i);
                rec(k, current, used, out);
                current.pop();
                used[i] = false;
            }
        }
    }
    rec(k, &mut current, &mut used, &mut result);
    // Recursion emits lexicographically ascending order.
    result
}

/// Paired (truth rate, inferred rate) values over all non-zero truth
/// entries, with inferred layer `k_i` aligned to truth layer `perm[k_i]`.
fn aligned_rate_pairs(
    alpha_edges: &[Edge],
    alpha_hat: &[f64],
    truth_net: &MultilayerNetwork,
    perm: &[usize],
) -> Result<(Vec<f64>, Vec<f64>)> {
    let k = truth_net.n_layers() as usize;
    if perm.len() != k {
        return Err(Error::Invariant("permutation length != layer count".into()));
    }
    if alpha_hat.len() != k * alpha_edges.len() {
        return Err(Error::Invariant("alpha_hat shape mismatch".into()));
    }
    if !alpha_edges.is_sorted() {
        return Err(Error::Invariant("alpha_edges must be sorted".into()));
    }
    let mut inverse = vec![usize::MAX; k];
    for (ki, &kt) in perm.iter().enumerate() {
        inverse[kt] = ki;
    }
    let mut truth_vals = Vec::new();
    let mut inferred_vals = Vec::new();
    for kt in 0..k {
        let ki = inverse[kt];
        for &(s, d, rate) in truth_net.layer_edges(kt) {
            truth_vals.push(rate);
            let inferred = match alpha_edges.binary_search(&(s, d)) {
                Ok(e) => alpha_hat[ki * alpha_edges.len() + e],
                Err(_) => 0.0,
            };
            inferred_vals.push(inferred);
        }
    }
    Ok((truth_vals, inferred_vals))
}

/// Align inferred layers to truth layers: exhaustive K! search maximizing
/// pi accuracy, ties broken by higher alpha Spearman, then by the
/// lexicographically lowest permutation. `alpha_edges` must be sorted.
pub fn match_layers(
    pi_hat: &[Vec<f64>],
    truth_labels: &[u32],
    alpha_edges: &[Edge],
    alpha_hat: &[f64],
    truth_net: &MultilayerNetwork,
) -> Result<Vec<usize>> {
    let k = truth_net.n_layers() as usize;
    if k > 8 {
        return Err(Error::Config(format!("layer matching supports K <= 8, got {k}")));
    }
    if pi_hat.iter().any(|row| row.len() != k) {
        return Err(Error::Invariant("pi row length != layer count".into()));
    }
    if pi_hat.len() != truth_labels.len() {
        return Err(Error::Invariant("pi rows and labels differ in length".into()));
    }
    let mut best: Option<(usize, f64, Vec<usize>)> = None;
    for perm in permutations(k) {
        let hits = count_hits(pi_hat, truth_labels, &perm);
        let need_rho = match &best {
            None => true,
            Some((bh, _, _)) => hits >= *bh,
        };
        if !need_rho {
            continue;
        }
        let rho = aligned_rate_pairs(alpha_edges, alpha_hat, truth_net, &perm)
            .and_then(|(t, i)| spearman(&t, &i))
            .unwrap_or(f64::NEG_INFINITY);
        let better = match &best {
            None => true,
            // Strict comparison keeps the lexicographically first permutation
            // on full ties.
            Some((bh, brho, _)) => hits > *bh || (hits == *bh && rho > *brho),
        };
        if better {
            best = Some((hits, rho, perm));
        }
    }
    Ok(best.expect("at least one permutation").2)
}

/// Spearman correlation between inferred and true transmission rates over
/// all non-zero truth entries; unselected edges score 0.
pub fn alpha_spearman(
    alpha_edges: &[Edge],
    alpha_hat: &[f64],
    truth_net: &MultilayerNetwork,
    perm: &[usize],
) -> Result<f64> {
    let (truth_vals, inferred_vals) = aligned_rate_pairs(alpha_edges, alpha_hat, truth_net, perm)?;
    spearman(&truth_vals, &inferred_vals)
}

/// Average precision over descending tie groups: sum of
/// (recall step) x (precision at the group boundary).
fn average_precision_from_groups(entries: Vec<(f64, u64, u64)>) -> Result<f64> {
    let mut groups = tie_groups(entries);
    groups.reverse();
    let total_pos: u64 = groups.iter().map(|g| g.1).sum();
    if total_pos == 0 {
        return Err(Error::Degenerate("average precision needs a positive".into()));
    }
    let mut ap = 0.0;
    let mut cum_pos = 0u64;
    let mut cum_all = 0u64;
    for (_, p, n) in groups {
        cum_pos += p;
        cum_all += p + n;
        let precision = cum_pos as f64 / cum_all as f64;
        let recall_step = p as f64 / total_pos as f64;
        ap += recall_step * precision;
    }
    Ok(ap)
}

/// Per-truth-layer PR AUC of inferred rates over all ordered pairs, and
/// their mean. Layers without truth edges yield `None` and are excluded
/// from the mean.
pub fn pr_auc_layers(
    alpha_edges: &[Edge],
    alpha_hat: &[f64],
    truth_net: &MultilayerNetwork,
    perm: &[usize],
) -> Result<(Vec<Option<f64>>, f64)> {
    let k = truth_net.n_layers() as usize;
    let n = truth_net.n_nodes() as u64;
    if alpha_hat.len() != k * alpha_edges.len() {
        return Err(Error::Invariant("alpha_hat shape mismatch".into()));
    }
    let mut inverse = vec![usize::MAX; k];
    for (ki, &kt) in perm.iter().enumerate() {
        inverse[kt] = ki;
    }
    let mut per_layer: Vec<Option<f64>> = Vec::with_capacity(k);
    for kt in 0..k {
        let layer = truth_net.layer_edges(kt);
        if layer.is_empty() {
            log::warn!("truth layer {kt} has no edges; PR AUC undefined");
            per_layer.push(None);
            continue;
        }
        let positives: HashSet<Edge> = layer.iter().map(|&(s, d, _)| (s, d)).collect();
        let ki = inverse[kt];
        let mut entries: Vec<(f64, u64, u64)> = Vec::with_capacity(alpha_edges.len() + 1);
        let mut scored_pos = 0u64;
        for (e, &pair) in alpha_edges.iter().enumerate() {
            let pos = positives.contains(&pair);
            scored_pos += pos as u64;
            entries.push((alpha_hat[ki * alpha_edges.len() + e], pos as u64, !pos as u64));
        }
        let pos_zero = positives.len() as u64 - scored_pos;
        let neg_zero = n * (n - 1) - alpha_edges.len() as u64 - pos_zero;
        if pos_zero + neg_zero > 0 {
            entries.push((0.0, pos_zero, neg_zero));
        }
        per_layer.push(Some(average_precision_from_groups(entries)?));
    }
    let defined: Vec<f64> = per_layer.iter().filter_map(|&v| v).collect();
    if defined.is_empty() {
        return Err(Error::Degenerate("no truth layer has edges".into()));
    }
    let mean = defined.iter().sum::<f64>() / defined.len() as f64;
    Ok((per_layer, mean))
}

/// Edge recovery of the selected set against the aggregated truth edges.
pub fn edge_recovery(selected: &[Edge], truth_edges: &[Edge]) -> EdgeRecovery {
    let truth_set: HashSet<Edge> = truth_edges.iter().copied().collect();
    let hits = selected.iter().filter(|e| truth_set.contains(e)).count();
    EdgeRecovery {
        hits,
        total: truth_set.len(),
        rate: hits as f64 / truth_set.len() as f64,
    }
}

/// Full evaluation of a pipeline run against ground truth. `pi_hat` rows
/// must align with `cascades` iteration order, and every cascade must
/// carry truth.
pub fn compute_metrics(
    truth_net: &MultilayerNetwork,
    cascades: &CascadeSet,
    phase1_scores: &[(Edge, f64)],
    selected: &[Edge],
    alpha_hat: &[f64],
    pi_hat: &[Vec<f64>],
) -> Result<MetricsReport> {
    if !cascades.has_truth() {
        return Err(Error::Degenerate("metrics require cascade ground truth".into()));
    }
    if pi_hat.len() != cascades.len() {
        return Err(Error::Invariant("pi rows and cascades differ in length".into()));
    }
    let truth_labels: Vec<u32> = cascades
        .iter()
        .map(|c| c.truth.as_ref().expect("checked").main_layer)
        .collect();
    let truth_union = truth_net.union_edges().to_vec();

    let auc = roc_auc(
        phase1_scores,
        &truth_union,
        &PairUniverse::All {
            n_nodes: truth_net.n_nodes(),
        },
    )?;
    let perm = match_layers(pi_hat, &truth_labels, selected, alpha_hat, truth_net)?;
    let pi_acc = pi_accuracy(pi_hat, &truth_labels, &perm)?;
    let rho = alpha_spearman(selected, alpha_hat, truth_net, &perm)?;
    let (pr_auc_per_layer, pr_auc_mean) = pr_auc_layers(selected, alpha_hat, truth_net, &perm)?;
    let recovery = edge_recovery(selected, &truth_union);
    Ok(MetricsReport {
        auc,
        pi_accuracy: pi_acc,
        alpha_spearman: rho,
        pr_auc_per_layer,
        pr_auc_mean,
        edge_recovery: recovery,
        matched_permutation: perm,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cascade::{Cascade, CascadeTruth};
    use approx::assert_relative_eq;
    use rand::Rng;

    fn uni(pairs: &[Edge]) -> PairUniverse {
        PairUniverse::Explicit(pairs.to_vec())
    }

    #[test]
    fn auc_perfect_separation() {
        let scored = vec![((0, 1), 0.9), ((1, 2), 0.8), ((2, 0), 0.1)];
        let auc = roc_auc(&scored, &[(0, 1), (1, 2)], &uni(&[(0, 1), (1, 2), (2, 0)])).unwrap();
        assert_eq!(auc, 1.0);
    }

    #[test]
    fn auc_all_tied_is_half() {
        let scored = vec![((0, 1), 0.3), ((1, 2), 0.3), ((2, 0), 0.3)];
        let auc = roc_auc(&scored, &[(1, 2)], &uni(&[(0, 1), (1, 2), (2, 0)])).unwrap();
        assert_eq!(auc, 0.5);
    }

    #[test]
    fn auc_interleaved_three_quarters() {
        // Positives {0.6, 0.8}, negatives {0.7, 0.2}: 3 of 4 cross pairs win.
        let scored = vec![((0, 1), 0.6), ((1, 2), 0.8), ((2, 0), 0.7), ((2, 1), 0.2)];
        let auc = roc_auc(
            &scored,
            &[(0, 1), (1, 2)],
            &uni(&[(0, 1), (1, 2), (2, 0), (2, 1)]),
        )
        .unwrap();
        assert_eq!(auc, 0.75);
    }

    #[test]
    fn auc_tied_positives_and_negatives() {
        // Positives {0.5, 0.5}, negatives {0.5, 0.2}: value 0.75 by the
        // half-credit convention.
        let scored = vec![((0, 1), 0.5), ((1, 2), 0.5), ((2, 0), 0.5), ((2, 1), 0.2)];
        let auc = roc_auc(
            &scored,
            &[(0, 1), (1, 2)],
            &uni(&[(0, 1), (1, 2), (2, 0), (2, 1)]),
        )
        .unwrap();
        assert_eq!(auc, 0.75);
    }

    #[test]
    fn auc_unscored_pairs_count_as_zero() {
        // Truth edge scored 0.9; the other positive is unscored (0), as is
        // one negative: the zero tie contributes half credit.
        let scored = vec![((0, 1), 0.9)];
        let auc = roc_auc(
            &scored,
            &[(0, 1), (1, 2)],
            &PairUniverse::All { n_nodes: 2 },
        );
        // n=2 has universe {(0,1),(1,0)}; (1,2) is out of range.
        assert!(auc.is_err());
        let auc = roc_auc(
            &scored,
            &[(0, 1), (1, 2)],
            &PairUniverse::All { n_nodes: 3 },
        )
        .unwrap();
        // 1 scored positive beats all 4 zero negatives; the zero positive
        // ties them: (4 + 2) / (2 * 4).
        assert_eq!(auc, 0.75);
    }

    #[test]
    fn auc_invariant_under_monotone_transform_and_complement() {
        let mut rng = crate::rng::stream(3, 0);
        let n: u32 = 12;
        let mut scored = Vec::new();
        let mut truth = Vec::new();
        for s in 0..n {
            for d in 0..n {
                if s == d {
                    continue;
                }
                if rng.random_range(0.0..1.0) < 0.4 {
                    scored.push(((s, d), rng.random_range(0.0..1.0)));
                }
                if rng.random_range(0.0..1.0) < 0.2 {
                    truth.push((s, d));
                }
            }
        }
        let u = PairUniverse::All { n_nodes: n };
        let base = roc_auc(&scored, &truth, &u).unwrap();
        let transformed: Vec<(Edge, f64)> =
            scored.iter().map(|&(e, s)| (e, (3.0 * s).exp())).collect();
        assert_relative_eq!(roc_auc(&transformed, &truth, &u).unwrap(), base, epsilon = 1e-12);
        // Negation flips the ranking; no ties among scored, but the zero
        // block stays tied with itself, so restrict to a fully scored universe.
        let full: Vec<Edge> = scored.iter().map(|&(e, _)| e).collect();
        let truth_in: Vec<Edge> = truth
            .iter()
            .filter(|e| full.contains(e))
            .copied()
            .collect();
        let pos = roc_auc(&scored, &truth_in, &uni(&full)).unwrap();
        let negated: Vec<(Edge, f64)> = scored.iter().map(|&(e, s)| (e, -s)).collect();
        let neg = roc_auc(&negated, &truth_in, &uni(&full)).unwrap();
        assert_relative_eq!(pos + neg, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn auc_single_class_is_an_error() {
        let scored = vec![((0, 1), 0.9)];
        assert!(roc_auc(&scored, &[(0, 1)], &uni(&[(0, 1)])).is_err());
        assert!(roc_auc(&scored, &[], &uni(&[(0, 1)])).is_err());
    }

    #[test]
    fn spearman_frozen_values() {
        assert_eq!(spearman(&[1.0, 2.0, 3.0], &[10.0, 20.0, 30.0]).unwrap(), 1.0);
        assert_eq!(spearman(&[1.0, 2.0, 3.0], &[30.0, 20.0, 10.0]).unwrap(), -1.0);
        // Ranks (1,2,3) vs (2,3,1).
        assert_relative_eq!(
            spearman(&[0.1, 0.2, 0.3], &[5.0, 6.0, 4.0]).unwrap(),
            -0.5,
            epsilon = 1e-12
        );
        // Ranks (1,2,3) vs (2,1,3).
        assert_relative_eq!(
            spearman(&[0.1, 0.2, 0.3], &[5.0, 4.0, 6.0]).unwrap(),
            0.5,
            epsilon = 1e-12
        );
        assert!(spearman(&[1.0], &[2.0]).is_err());
        assert!(spearman(&[1.0, 2.0], &[5.0, 5.0]).is_err());
    }

    #[test]
    fn spearman_averages_tied_ranks() {
        // scipy.stats.spearmanr([1,1,2], [1,2,3]) = 0.866025...
        assert_relative_eq!(
            spearman(&[1.0, 1.0, 2.0], &[1.0, 2.0, 3.0]).unwrap(),
            0.8660254037844387,
            epsilon = 1e-12
        );
    }

    fn two_layer_net() -> MultilayerNetwork {
        MultilayerNetwork::new(
            4,
            vec![
                vec![(0, 1, 0.3), (1, 2, 0.6)],
                vec![(2, 3, 0.2), (3, 0, 0.9)],
            ],
        )
        .unwrap()
    }

    #[test]
    fn layer_matching_recovers_a_swap() {
        let net = two_layer_net();
        // Inferred layer 0 looks like truth layer 1 and vice versa.
        let edges: Vec<Edge> = net.union_edges().to_vec();
        let rate = |k: usize, e: &Edge| net.rate(k, e.0, e.1);
        let mut alpha_hat = Vec::new();
        for k in [1usize, 0] {
            for e in &edges {
                alpha_hat.push(rate(k, e));
            }
        }
        let pi_hat = vec![vec![0.9, 0.1], vec![0.8, 0.2], vec![0.1, 0.9]];
        let labels = vec![1, 1, 0];
        let perm = match_layers(&pi_hat, &labels, &edges, &alpha_hat, &net).unwrap();
        assert_eq!(perm, vec![1, 0]);
        assert_eq!(pi_accuracy(&pi_hat, &labels, &perm).unwrap(), 1.0);
        assert_eq!(best_pi_accuracy(&pi_hat, &labels, 2).unwrap(), 1.0);
        assert_eq!(alpha_spearman(&edges, &alpha_hat, &net, &perm).unwrap(), 1.0);
    }

    #[test]
    fn single_layer_matching_is_identity() {
        let net = MultilayerNetwork::new(3, vec![vec![(0, 1, 0.5), (1, 2, 0.5)]]).unwrap();
        let edges: Vec<Edge> = net.union_edges().to_vec();
        let alpha_hat = vec![0.4, 0.6];
        let pi_hat = vec![vec![1.0], vec![1.0]];
        let perm = match_layers(&pi_hat, &[0, 0], &edges, &alpha_hat, &net).unwrap();
        assert_eq!(perm, vec![0]);
    }

    #[test]
    fn uniform_rows_fall_to_the_lowest_layer() {
        // Argmax ties resolve to layer 0, so accuracy equals the fraction
        // of truth labels equal to 0 under the identity permutation.
        let pi_hat = vec![vec![0.5, 0.5]; 4];
        let labels = vec![0, 0, 1, 0];
        assert_eq!(pi_accuracy(&pi_hat, &labels, &[0, 1]).unwrap(), 0.75);
    }

    #[test]
    fn random_membership_scores_near_half() {
        let mut rng = crate::rng::stream(11, 0);
        let c = 4000;
        let pi_hat: Vec<Vec<f64>> = (0..c)
            .map(|_| {
                let p: f64 = rng.random_range(0.0..1.0);
                vec![p, 1.0 - p]
            })
            .collect();
        let labels: Vec<u32> = (0..c).map(|_| rng.random_range(0..2)).collect();
        let acc = pi_accuracy(&pi_hat, &labels, &[0, 1]).unwrap();
        assert!((acc - 0.5).abs() < 0.03, "accuracy {acc}");
    }

    #[test]
    fn reversed_rates_give_perfectly_negative_correlation() {
        let net = two_layer_net();
        let edges: Vec<Edge> = net.union_edges().to_vec();
        // Only non-zero truth entries are compared, and 1-x reverses their
        // order: truth (0.3, 0.6, 0.2, 0.9) vs inferred (0.7, 0.4, 0.8, 0.1).
        let mut alpha_hat = Vec::new();
        for k in 0..2 {
            for e in &edges {
                alpha_hat.push(1.0 - net.rate(k, e.0, e.1));
            }
        }
        let rho = alpha_spearman(&edges, &alpha_hat, &net, &[0, 1]).unwrap();
        assert_eq!(rho, -1.0);
    }

    #[test]
    fn average_precision_frozen_values() {
        // Descending: 0.8(+), 0.7(-), 0.6(+), 0.2(-) → 1/2·1 + 1/2·(2/3).
        let entries = vec![(0.6, 1, 0), (0.8, 1, 0), (0.7, 0, 1), (0.2, 0, 1)];
        assert_relative_eq!(
            average_precision_from_groups(entries).unwrap(),
            5.0 / 6.0,
            epsilon = 1e-12
        );
        // Constant scores: AP equals prevalence.
        let entries = vec![(0.4, 1, 0), (0.4, 1, 0), (0.4, 0, 1), (0.4, 0, 1)];
        assert_eq!(average_precision_from_groups(entries).unwrap(), 0.5);
    }

    #[test]
    fn pr_auc_perfect_and_zero_scores() {
        let net = two_layer_net();
        let edges: Vec<Edge> = net.union_edges().to_vec();
        let mut alpha_hat = Vec::new();
        for k in 0..2 {
            for e in &edges {
                alpha_hat.push(net.rate(k, e.0, e.1));
            }
        }
        let (per_layer, mean) = pr_auc_layers(&edges, &alpha_hat, &net, &[0, 1]).unwrap();
        assert_eq!(per_layer, vec![Some(1.0), Some(1.0)]);
        assert_eq!(mean, 1.0);

        // All-zero inferred rates: every pair ties at 0, AP = prevalence
        // = 2 / (4*3) per layer.
        let zeros = vec![0.0; alpha_hat.len()];
        let (_, mean) = pr_auc_layers(&edges, &zeros, &net, &[0, 1]).unwrap();
        assert_relative_eq!(mean, 2.0 / 12.0, epsilon = 1e-12);
    }

    #[test]
    fn recovery_counts() {
        let truth: Vec<Edge> = (0..4422u32).map(|i| (i, i + 10000)).collect();
        let selected: Vec<Edge> = truth[..2989].to_vec();
        let r = edge_recovery(&selected, &truth);
        assert_eq!((r.hits, r.total), (2989, 4422));
        assert_relative_eq!(r.rate, 0.6759, epsilon = 5e-5);
        let all = edge_recovery(&truth, &truth);
        assert_eq!(all.rate, 1.0);
        let disjoint = edge_recovery(&[(9u32, 8u32)], &truth);
        assert_eq!((disjoint.hits, disjoint.rate), (0, 0.0));
    }

    #[test]
    fn full_report_on_a_constructed_instance() {
        let net = two_layer_net();
        let edges: Vec<Edge> = net.union_edges().to_vec();
        let mut alpha_hat = Vec::new();
        for k in 0..2 {
            for e in &edges {
                alpha_hat.push(net.rate(k, e.0, e.1).max(0.01));
            }
        }
        let truth = CascadeTruth {
            main_layer: 0,
            eps: 0.0,
            pi: vec![1.0, 0.0],
        };
        let cascades = CascadeSet::new(vec![
            Cascade::new(0, 5.0, vec![(0, 0.0), (1, 1.0)], Some(truth.clone())).unwrap(),
            Cascade::new(1, 5.0, vec![(1, 0.0), (2, 2.0)], Some(truth)).unwrap(),
        ]);
        let scores: Vec<(Edge, f64)> = edges.iter().map(|&e| (e, 0.9)).collect();
        let pi_hat = vec![vec![0.8, 0.2], vec![0.7, 0.3]];
        let report =
            compute_metrics(&net, &cascades, &scores, &edges, &alpha_hat, &pi_hat).unwrap();
        assert_eq!(report.pi_accuracy, 1.0);
        assert_eq!(report.edge_recovery.rate, 1.0);
        assert_eq!(report.matched_permutation, vec![0, 1]);
        assert!(report.auc > 0.99);

        let untruthed = CascadeSet::new(vec![Cascade::new(
            0,
            5.0,
            vec![(0, 0.0), (1, 1.0)],
            None,
        )
        .unwrap()]);
        assert!(
            compute_metrics(&net, &untruthed, &scores, &edges, &alpha_hat, &pi_hat[..1]).is_err()
        );
    }
}
