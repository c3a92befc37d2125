//! Directional Conductance Divergence and the salient-set relaxation
//! bounds that relate it to a hard, top-k restricted divergence.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ids::{ModelId, TaskId};
use crate::taskrep::{importance, ImportanceDistribution, TaskRepresentation};

pub const DEFAULT_GAMMA: f64 = 5.0;

/// Relative tolerance for floating comparisons in the bound checks.
pub const BOUND_RTOL: f64 = 1e-12;

/// `|v_t - v_s| / (|v_t| + eps)` per block.
pub fn relative_deviation(v_target: &[f64], v_source: &[f64], epsilon: f64) -> Result<Vec<f64>> {
    if v_target.len() != v_source.len() {
        return Err(Error::Shape(format!(
            "target has {} blocks, source has {}",
            v_target.len(),
            v_source.len()
        )));
    }
    if epsilon.is_nan() || epsilon <= 0.0 {
        return Err(Error::Parameter(format!("epsilon must be positive, got {epsilon}")));
    }
    Ok(v_target
        .iter()
        .zip(v_source)
        .map(|(t, s)| (t - s).abs() / (t.abs() + epsilon))
        .collect())
}

/// `sum_i alpha_i * delta_i`.
pub fn expected_deviation(alpha: &[f64], delta: &[f64]) -> f64 {
    alpha.iter().zip(delta).map(|(a, d)| a * d).sum()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DivergenceRecord {
    pub model_id: ModelId,
    pub source: TaskId,
    pub target: TaskId,
    pub delta: Vec<f64>,
    pub value: f64,
    /// Blocks where the target is zero but the source is not; their
    /// deviation is on the order of `v_source / eps`.
    pub epsilon_dominated: Vec<usize>,
}

/// `D(target -> source)` under the target's importance distribution.
pub fn dcd(
    target: &TaskRepresentation,
    source: &TaskRepresentation,
    alpha: &ImportanceDistribution,
    epsilon: f64,
) -> Result<DivergenceRecord> {
    target.ensure_comparable(source)?;
    if alpha.len() != target.block_count() {
        return Err(Error::Shape(format!(
            "importance has {} entries for {} blocks",
            alpha.len(),
            target.block_count()
        )));
    }
    let delta = relative_deviation(&target.v, &source.v, epsilon)?;
    let epsilon_dominated: Vec<usize> = target
        .v
        .iter()
        .zip(&source.v)
        .enumerate()
        .filter(|(_, (t, s))| **t == 0.0 && **s > 0.0)
        .map(|(i, _)| i)
        .collect();
    if !epsilon_dominated.is_empty() {
        log::debug!(
            "{}: target {} is zero on blocks {:?} where source {} is not",
            target.model_id,
            target.task_id,
            epsilon_dominated,
            source.task_id
        );
    }
    let value = expected_deviation(&alpha.alpha, &delta);
    Ok(DivergenceRecord {
        model_id: target.model_id.clone(),
        source: source.task_id.clone(),
        target: target.task_id.clone(),
        delta,
        value,
        epsilon_dominated,
    })
}

/// Convenience: divergence with the importance distribution derived from
/// the target at temperature `eta`.
pub fn dcd_with_eta(
    target: &TaskRepresentation,
    source: &TaskRepresentation,
    eta: f64,
    epsilon: f64,
) -> Result<DivergenceRecord> {
    dcd(target, source, &target.importance(eta), epsilon)
}

/// Softmin weighting of source tasks for one target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimilarityDistribution {
    pub target: TaskId,
    pub weights: BTreeMap<TaskId, f64>,
    pub gamma: f64,
}

impl SimilarityDistribution {
    pub fn weight(&self, source: &str) -> Option<f64> {
        self.weights.get(source).copied()
    }
}

pub fn similarity_weights(
    target: TaskId,
    divergences: &BTreeMap<TaskId, f64>,
    gamma: f64,
) -> Result<SimilarityDistribution> {
    if divergences.is_empty() {
        return Err(Error::InsufficientData(format!("no source tasks for target {target}")));
    }
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(Error::Parameter(format!("gamma must be positive, got {gamma}")));
    }
    if let Some((task, d)) = divergences.iter().find(|(_, d)| !d.is_finite()) {
        return Err(Error::NonFinite(format!("divergence to source {task} is {d}")));
    }
    let min = divergences.values().copied().fold(f64::INFINITY, f64::min);
    let scores: Vec<(TaskId, f64)> = divergences
        .iter()
        .map(|(task, d)| (task.clone(), (-gamma * (d - min)).exp()))
        .collect();
    let total: f64 = scores.iter().map(|(_, s)| s).sum();
    Ok(SimilarityDistribution {
        target,
        weights: scores.into_iter().map(|(t, s)| (t, s / total)).collect(),
        gamma,
    })
}

/// Blocks whose normalized conductance reaches the k-th largest value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SalientSet {
    pub k: usize,
    /// Zero-based, ascending.
    pub indices: Vec<usize>,
    pub threshold: f64,
}

impl SalientSet {
    pub fn contains(&self, i: usize) -> bool {
        self.indices.binary_search(&i).is_ok()
    }
}

fn sorted_descending(u: &[f64]) -> Vec<f64> {
    let mut sorted = u.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    sorted
}

pub fn salient_set(u: &[f64], k: usize) -> Result<SalientSet> {
    if k == 0 || k > u.len() {
        return Err(Error::Parameter(format!(
            "salient set size k = {k} must lie in 1..={}",
            u.len()
        )));
    }
    let threshold = sorted_descending(u)[k - 1];
    let indices = u
        .iter()
        .enumerate()
        .filter(|(_, &x)| x >= threshold)
        .map(|(i, _)| i)
        .collect();
    Ok(SalientSet {
        k,
        indices,
        threshold,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SetRestricted {
    /// Divergence under the importance renormalized onto the salient set.
    pub restricted: f64,
    /// Importance mass outside the salient set.
    pub tail: f64,
    /// `sum_{i not in S} alpha_i delta_i`.
    pub residual: f64,
}

pub fn set_restricted_divergence(
    delta: &[f64],
    alpha: &[f64],
    salient: &SalientSet,
) -> Result<SetRestricted> {
    if delta.len() != alpha.len() {
        return Err(Error::Shape(format!(
            "delta has {} entries, alpha has {}",
            delta.len(),
            alpha.len()
        )));
    }
    if salient.indices.last().is_some_and(|&i| i >= alpha.len()) {
        return Err(Error::Shape("salient set indexes past the block count".into()));
    }
    let (mut head, mut tail, mut residual) = (0.0, 0.0, 0.0);
    for (i, (a, d)) in alpha.iter().zip(delta).enumerate() {
        if salient.contains(i) {
            head += a;
        } else {
            tail += a;
            residual += a * d;
        }
    }
    if head <= 1e-12 {
        return Err(Error::DegenerateMass(head));
    }
    let restricted = salient
        .indices
        .iter()
        .map(|&i| alpha[i] / head * delta[i])
        .sum();
    Ok(SetRestricted {
        restricted,
        tail,
        residual,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "status")]
pub enum LemmaCheck {
    Holds { bound: f64 },
    Violated { bound: f64 },
    /// Zero gap at the salient boundary; the bound needs a positive gap.
    SkippedTie,
    /// `k = d`: there is no (k+1)-th value.
    NotApplicable,
}

impl LemmaCheck {
    pub fn is_violation(&self) -> bool {
        matches!(self, LemmaCheck::Violated { .. })
    }
}

/// Outcome of the tail-mass lemma and the set-restricted decomposition on
/// one instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailBoundReport {
    pub k: usize,
    pub eta: f64,
    pub tail_mass: f64,
    pub gap: Option<f64>,
    pub lemma: LemmaCheck,
    /// Largest deviation on this instance.
    pub max_deviation: f64,
    pub divergence: f64,
    pub restricted: f64,
    pub residual: f64,
    /// `|D - ((1 - t) d_k + r)|`.
    pub decomposition_error: f64,
    pub residual_bounded: bool,
    pub relaxation_bounded: bool,
    /// Coverage corollary; `None` unless delta vanishes on the salient set.
    pub coverage_bounded: Option<bool>,
}

impl TailBoundReport {
    pub fn passed(&self) -> bool {
        !self.lemma.is_violation()
            && self.residual_bounded
            && self.relaxation_bounded
            && self.coverage_bounded != Some(false)
    }
}

fn le_tol(lhs: f64, rhs: f64, scale: f64) -> bool {
    lhs <= rhs + BOUND_RTOL * scale.max(1.0)
}

/// Checks the tail-mass lemma for `softmax(eta u)` at size `k`, and the
/// decomposition bounds for the deviations `delta` of some source.
pub fn verify_tail_bound(u: &[f64], eta: f64, k: usize, delta: &[f64]) -> Result<TailBoundReport> {
    if delta.len() != u.len() {
        return Err(Error::Shape(format!(
            "delta has {} entries for {} blocks",
            delta.len(),
            u.len()
        )));
    }
    let d = u.len();
    let salient = salient_set(u, k)?;
    let alpha = importance(u, eta).alpha;
    let split = set_restricted_divergence(delta, &alpha, &salient)?;
    let divergence = expected_deviation(&alpha, delta);
    let max_deviation = delta.iter().copied().fold(0.0, f64::max);
    let t = split.tail;

    let (gap, lemma) = if k == d {
        (None, LemmaCheck::NotApplicable)
    } else {
        let sorted = sorted_descending(u);
        let gap = sorted[k - 1] - sorted[k];
        let check = if gap > 0.0 {
            let bound = (d - k) as f64 / k as f64 * (-eta * gap).exp();
            if t <= bound * (1.0 + BOUND_RTOL) {
                LemmaCheck::Holds { bound }
            } else {
                LemmaCheck::Violated { bound }
            }
        } else {
            LemmaCheck::SkippedTie
        };
        (Some(gap), check)
    };

    let scale = divergence.abs().max(max_deviation);
    let recomposed = (1.0 - t) * split.restricted + split.residual;
    let residual_bounded =
        split.residual >= 0.0 && le_tol(split.residual, max_deviation * t, scale);
    let relaxation_bounded = le_tol(
        (divergence - split.restricted).abs(),
        2.0 * max_deviation * t,
        scale,
    );
    let covered = salient.indices.iter().all(|&i| delta[i] == 0.0);
    let coverage_bounded = match (covered, &lemma) {
        (true, LemmaCheck::Holds { bound } | LemmaCheck::Violated { bound }) => {
            Some(le_tol(divergence, max_deviation * bound, scale))
        }
        _ => None,
    };

    Ok(TailBoundReport {
        k,
        eta,
        tail_mass: t,
        gap,
        lemma,
        max_deviation,
        divergence,
        restricted: split.restricted,
        residual: split.residual,
        decomposition_error: (divergence - recomposed).abs(),
        residual_bounded,
        relaxation_bounded,
        coverage_bounded,
    })
}
