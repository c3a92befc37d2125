//! Top-k intersection ranking metrics (NDCG@k, Kendall tau-b@k), Spearman
//! correlation, and run-level aggregation.
//!
//! Both top-k metrics look only at the models that appear in the top k of
//! the predicted *and* the ground-truth ranking. When that set has fewer
//! than two members both metrics are defined as 0.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ids::{ModelId, TaskId};
use crate::rankagg::{average_ranks, PredictedRanking};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricResult {
    pub task_id: TaskId,
    pub k: usize,
    pub intersection_size: usize,
    pub ndcg: f64,
    pub tau: f64,
    pub sum: f64,
    /// Set when tau fell back to 0 because one side was fully tied.
    pub tau_degenerate: bool,
}

fn check_universe(predicted: &PredictedRanking, truth: &BTreeMap<ModelId, f64>, k: usize) -> Result<()> {
    let n = predicted.order.len();
    if k == 0 || k > n {
        return Err(Error::Parameter(format!("k = {k} must lie in 1..={n}")));
    }
    let pred: BTreeSet<&ModelId> = predicted.order.iter().collect();
    let same = pred.len() == n && pred.len() == truth.len() && truth.keys().all(|m| pred.contains(m));
    if !same {
        return Err(Error::Shape(format!(
            "predicted and ground-truth rankings for {} cover different models",
            predicted.target
        )));
    }
    Ok(())
}

/// Models in the predicted top k (by position) and the ground-truth top k
/// (by possibly tie-averaged rank). Returned in predicted order.
pub fn topk_intersection(
    predicted: &PredictedRanking,
    truth: &BTreeMap<ModelId, f64>,
    k: usize,
) -> Result<Vec<ModelId>> {
    check_universe(predicted, truth, k)?;
    Ok(predicted
        .order
        .iter()
        .take(k)
        .filter(|m| truth[*m] <= k as f64)
        .cloned()
        .collect())
}

fn dcg(relevances: impl IntoIterator<Item = f64>) -> f64 {
    relevances
        .into_iter()
        .enumerate()
        .map(|(i, rel)| (rel.exp2() - 1.0) / ((i + 2) as f64).log2())
        .sum()
}

/// Relevance inside the intersection: `|I|` for the best ground-truth
/// model, down to 1 for the worst. Tied models share the higher value.
fn relevances(members: &[ModelId], truth: &BTreeMap<ModelId, f64>) -> Vec<f64> {
    let n = members.len();
    members
        .iter()
        .map(|m| {
            let better = members.iter().filter(|o| truth[*o] < truth[m]).count();
            (n - better) as f64
        })
        .collect()
}

pub fn ndcg_at_k(predicted: &PredictedRanking, truth: &BTreeMap<ModelId, f64>, k: usize) -> Result<f64> {
    let members = topk_intersection(predicted, truth, k)?;
    Ok(ndcg_on(&members, truth))
}

fn ndcg_on(members: &[ModelId], truth: &BTreeMap<ModelId, f64>) -> f64 {
    if members.len() < 2 {
        return 0.0;
    }
    let rel = relevances(members, truth);
    let mut ideal = rel.clone();
    ideal.sort_by(|a, b| b.total_cmp(a));
    dcg(rel) / dcg(ideal)
}

/// Tau-b over `(x, y)` pairs, and whether it degenerated to 0.
pub fn kendall_tau_b(x: &[f64], y: &[f64]) -> (f64, bool) {
    let n = x.len().min(y.len());
    if n < 2 {
        return (0.0, false);
    }
    let (mut concordant, mut discordant, mut tied_x, mut tied_y) = (0u64, 0u64, 0u64, 0u64);
    for i in 0..n {
        for j in i + 1..n {
            let dx = x[i].partial_cmp(&x[j]).unwrap_or(Ordering::Equal);
            let dy = y[i].partial_cmp(&y[j]).unwrap_or(Ordering::Equal);
            match (dx, dy) {
                (Ordering::Equal, Ordering::Equal) => {}
                (Ordering::Equal, _) => tied_x += 1,
                (_, Ordering::Equal) => tied_y += 1,
                _ if dx == dy => concordant += 1,
                _ => discordant += 1,
            }
        }
    }
    let denom = (((concordant + discordant + tied_x) * (concordant + discordant + tied_y)) as f64).sqrt();
    if denom == 0.0 {
        return (0.0, true);
    }
    ((concordant as f64 - discordant as f64) / denom, false)
}

pub fn kendall_tau_at_k(
    predicted: &PredictedRanking,
    truth: &BTreeMap<ModelId, f64>,
    k: usize,
) -> Result<f64> {
    let members = topk_intersection(predicted, truth, k)?;
    Ok(tau_on(predicted, &members, truth).0)
}

fn tau_on(predicted: &PredictedRanking, members: &[ModelId], truth: &BTreeMap<ModelId, f64>) -> (f64, bool) {
    if members.len() < 2 {
        return (0.0, false);
    }
    let positions = predicted.positions();
    let x: Vec<f64> = members.iter().map(|m| positions[m] as f64).collect();
    let y: Vec<f64> = members.iter().map(|m| truth[m]).collect();
    let (tau, degenerate) = kendall_tau_b(&x, &y);
    if degenerate {
        log::warn!("tau@k for {} is degenerate (fully tied ranks); reporting 0", predicted.target);
    }
    (tau, degenerate)
}

/// NDCG@k, tau@k and their sum for one target.
pub fn evaluate(predicted: &PredictedRanking, truth: &BTreeMap<ModelId, f64>, k: usize) -> Result<MetricResult> {
    let members = topk_intersection(predicted, truth, k)?;
    let ndcg = ndcg_on(&members, truth);
    let (tau, tau_degenerate) = tau_on(predicted, &members, truth);
    Ok(MetricResult {
        task_id: predicted.target.clone(),
        k,
        intersection_size: members.len(),
        ndcg,
        tau,
        sum: ndcg + tau,
        tau_degenerate,
    })
}

/// Pearson correlation of tie-averaged ranks. Returns NaN when either
/// input is constant.
pub fn spearman(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() || xs.is_empty() {
        return Err(Error::Shape(format!(
            "spearman needs equal nonzero lengths, got {} and {}",
            xs.len(),
            ys.len()
        )));
    }
    let rx = average_ranks(xs, false);
    let ry = average_ranks(ys, false);
    let r = pearson(&rx, &ry);
    if r.is_nan() {
        log::warn!("spearman correlation undefined for constant input");
    }
    Ok(r)
}

fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return f64::NAN;
    }
    (sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    /// Sample standard deviation over runs; 0 for a single run.
    pub std: f64,
}

impl MeanStd {
    pub fn of(values: &[f64]) -> Self {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let std = if values.len() > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        Self { mean, std }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub runs: usize,
    pub ndcg: MeanStd,
    pub tau: MeanStd,
    pub sum: MeanStd,
}

/// Mean over tasks within each run, then mean and sample std over runs.
pub fn aggregate(rows: &[(usize, MetricResult)]) -> Result<Summary> {
    if rows.is_empty() {
        return Err(Error::InsufficientData("no metric rows to aggregate".into()));
    }
    let mut per_run: BTreeMap<usize, Vec<&MetricResult>> = BTreeMap::new();
    for (run, r) in rows {
        per_run.entry(*run).or_default().push(r);
    }
    let run_means = |f: fn(&MetricResult) -> f64| -> Vec<f64> {
        per_run
            .values()
            .map(|rs| rs.iter().map(|r| f(r)).sum::<f64>() / rs.len() as f64)
            .collect()
    };
    Ok(Summary {
        runs: per_run.len(),
        ndcg: MeanStd::of(&run_means(|r| r.ndcg)),
        tau: MeanStd::of(&run_means(|r| r.tau)),
        sum: MeanStd::of(&run_means(|r| r.sum)),
    })
}
