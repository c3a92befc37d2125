//! Brute-force reference implementations shared by the integration tests
//! and the acceptance suite. Deliberately naive.

#![allow(dead_code)]

use std::collections::BTreeMap;

use condsel::{ModelId, PredictedRanking};

pub fn permutations(items: &[usize]) -> Vec<Vec<usize>> {
    if items.len() <= 1 {
        return vec![items.to_vec()];
    }
    let mut out = Vec::new();
    for i in 0..items.len() {
        let mut rest = items.to_vec();
        let head = rest.remove(i);
        for mut tail in permutations(&rest) {
            tail.insert(0, head);
            out.push(tail);
        }
    }
    out
}

fn dcg_of(order: &[usize], rel: &[f64]) -> f64 {
    let mut total = 0.0;
    for (pos, &m) in order.iter().enumerate() {
        total += (2f64.powf(rel[m]) - 1.0) / (pos as f64 + 2.0).log2();
    }
    total
}

/// Intersection of the predicted top-k and the ground-truth top-k, in
/// predicted order.
pub fn intersection(predicted: &PredictedRanking, truth: &BTreeMap<ModelId, f64>, k: usize) -> Vec<ModelId> {
    let mut out = Vec::new();
    for (pos, m) in predicted.order.iter().enumerate() {
        if pos < k && truth[m] <= k as f64 {
            out.push(m.clone());
        }
    }
    out
}

/// NDCG on the intersection with the ideal DCG found by trying every order.
pub fn ndcg_oracle(predicted: &PredictedRanking, truth: &BTreeMap<ModelId, f64>, k: usize) -> f64 {
    let members = intersection(predicted, truth, k);
    let n = members.len();
    if n < 2 {
        return 0.0;
    }
    let rel: Vec<f64> = members
        .iter()
        .map(|m| {
            let mut r = n;
            for o in &members {
                if truth[o] < truth[m] {
                    r -= 1;
                }
            }
            r as f64
        })
        .collect();
    let idx: Vec<usize> = (0..n).collect();
    let ideal = permutations(&idx)
        .iter()
        .map(|p| dcg_of(p, &rel))
        .fold(f64::NEG_INFINITY, f64::max);
    dcg_of(&idx, &rel) / ideal
}

/// Concordant, discordant, tied-only-in-prediction, tied-only-in-truth.
pub fn pair_counts(predicted: &PredictedRanking, truth: &BTreeMap<ModelId, f64>, k: usize) -> (i64, i64, i64, i64) {
    let members = intersection(predicted, truth, k);
    let pos: BTreeMap<&ModelId, f64> = predicted
        .order
        .iter()
        .enumerate()
        .map(|(i, m)| (m, i as f64))
        .collect();
    let (mut c, mut d, mut tp, mut tt) = (0, 0, 0, 0);
    for a in 0..members.len() {
        for b in a + 1..members.len() {
            let sp = (pos[&members[a]] - pos[&members[b]]).signum();
            let dt = truth[&members[a]] - truth[&members[b]];
            let st = if dt == 0.0 { 0.0 } else { dt.signum() };
            match (sp == 0.0, st == 0.0) {
                (true, true) => {}
                (true, false) => tp += 1,
                (false, true) => tt += 1,
                _ if sp * st > 0.0 => c += 1,
                _ => d += 1,
            }
        }
    }
    (c, d, tp, tt)
}

pub fn tau_oracle(predicted: &PredictedRanking, truth: &BTreeMap<ModelId, f64>, k: usize) -> f64 {
    if intersection(predicted, truth, k).len() < 2 {
        return 0.0;
    }
    let (c, d, tp, tt) = pair_counts(predicted, truth, k);
    let denom = (((c + d + tp) * (c + d + tt)) as f64).sqrt();
    if denom == 0.0 {
        0.0
    } else {
        (c - d) as f64 / denom
    }
}

/// Entropy-regularized alignment, written out directly.
pub fn alignment(alpha: &[f64], u: &[f64], eta: f64) -> f64 {
    let mut total = 0.0;
    for (a, x) in alpha.iter().zip(u) {
        total += a * x;
        if *a > 0.0 {
            total -= a * a.ln() / eta;
        }
    }
    total
}

/// Closed-form maximizer of [`alignment`].
pub fn softmax_oracle(u: &[f64], eta: f64) -> Vec<f64> {
    let m = u.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = u.iter().map(|x| (eta * (x - m)).exp()).collect();
    let z: f64 = e.iter().sum();
    e.iter().map(|x| x / z).collect()
}

/// Mass of `softmax(eta u)` outside the `k` largest entries of `u`.
pub fn tail_mass_oracle(u: &[f64], eta: f64, k: usize) -> f64 {
    let alpha = softmax_oracle(u, eta);
    let mut idx: Vec<usize> = (0..u.len()).collect();
    idx.sort_by(|&a, &b| u[b].partial_cmp(&u[a]).unwrap().then(a.cmp(&b)));
    idx[k..].iter().map(|&i| alpha[i]).sum()
}
