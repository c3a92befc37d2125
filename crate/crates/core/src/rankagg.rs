//! Ground-truth ranks, similarity-weighted rank aggregation, and the
//! ImageNet / average-rank baselines.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::dcd::SimilarityDistribution;
use crate::error::{Error, Result};
use crate::ids::{ModelId, TaskId};

/// Predicted scores closer than this (in rank units) are treated as tied
/// and ordered by model id.
pub const SCORE_TIE_TOLERANCE: f64 = 1e-6;

/// Model-by-task accuracies in `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccuracyTable {
    models: Vec<ModelId>,
    tasks: Vec<TaskId>,
    /// `acc[m][t]`.
    acc: Vec<Vec<f64>>,
}

impl AccuracyTable {
    pub fn new(models: Vec<ModelId>, tasks: Vec<TaskId>, acc: Vec<Vec<f64>>) -> Result<Self> {
        check_unique(&models, "model")?;
        check_unique(&tasks, "task")?;
        if models.is_empty() || tasks.is_empty() {
            return Err(Error::InsufficientData("accuracy table is empty".into()));
        }
        if acc.len() != models.len() {
            return Err(Error::Shape(format!(
                "{} accuracy rows for {} models",
                acc.len(),
                models.len()
            )));
        }
        for (m, row) in models.iter().zip(&acc) {
            if row.len() != tasks.len() {
                return Err(Error::validation(
                    format!("row {m}"),
                    format!("{} cells for {} tasks", row.len(), tasks.len()),
                ));
            }
            for (t, &a) in tasks.iter().zip(row) {
                if !(0.0..=1.0).contains(&a) {
                    return Err(Error::validation(
                        format!("row {m}, column {t}"),
                        format!("accuracy {a} outside [0, 1]"),
                    ));
                }
            }
        }
        Ok(Self { models, tasks, acc })
    }

    pub fn models(&self) -> &[ModelId] {
        &self.models
    }

    pub fn tasks(&self) -> &[TaskId] {
        &self.tasks
    }

    pub fn accuracy(&self, model: &str, task: &str) -> Result<f64> {
        let m = position(&self.models, model, "model")?;
        let t = position(&self.tasks, task, "task")?;
        Ok(self.acc[m][t])
    }

    pub fn row(&self, model: &str) -> Result<&[f64]> {
        let m = position(&self.models, model, "model")?;
        Ok(&self.acc[m])
    }

    /// Same table with one task's column passed through `f`.
    pub fn map_column(&self, task: &str, f: impl Fn(f64) -> f64) -> Result<Self> {
        let t = position(&self.tasks, task, "task")?;
        let mut out = self.clone();
        for row in &mut out.acc {
            row[t] = f(row[t]);
        }
        Ok(out)
    }
}

fn check_unique<T: Ord + std::fmt::Display>(ids: &[T], what: &str) -> Result<()> {
    let mut seen = std::collections::BTreeSet::new();
    for id in ids {
        if !seen.insert(id) {
            return Err(Error::validation(format!("{what} ids"), format!("duplicate {what} `{id}`")));
        }
    }
    Ok(())
}

fn position<T: AsRef<str>>(ids: &[T], id: &str, what: &str) -> Result<usize> {
    ids.iter()
        .position(|x| x.as_ref() == id)
        .ok_or_else(|| Error::Lookup(format!("unknown {what} `{id}`")))
}

/// Read access to accuracy columns. The prediction path only sees sources
/// through this trait, which lets tests record which columns were touched.
pub trait AccuracySource {
    fn models(&self) -> &[ModelId];
    /// Accuracies of `task` in `models()` order.
    fn column(&self, task: &str) -> Result<Vec<f64>>;
}

impl AccuracySource for AccuracyTable {
    fn models(&self) -> &[ModelId] {
        &self.models
    }

    fn column(&self, task: &str) -> Result<Vec<f64>> {
        let t = position(&self.tasks, task, "task")?;
        Ok(self.acc.iter().map(|row| row[t]).collect())
    }
}

/// Fractional ranks (1-based); tied values share the mean of their
/// positions. `descending` ranks the largest value first.
pub fn average_ranks(values: &[f64], descending: bool) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| {
        let ord = values[a].total_cmp(&values[b]);
        if descending {
            ord.reverse()
        } else {
            ord
        }
    });
    let mut ranks = vec![0.0; values.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && values[order[end]] == values[order[start]] {
            end += 1;
        }
        // positions start+1 ..= end
        let rank = (start + 1 + end) as f64 / 2.0;
        for &i in &order[start..end] {
            ranks[i] = rank;
        }
        start = end;
    }
    ranks
}

/// Model ranks on one task, best accuracy first.
pub fn ground_truth_ranks<S: AccuracySource + ?Sized>(
    source: &S,
    task: &str,
) -> Result<BTreeMap<ModelId, f64>> {
    let column = source.column(task)?;
    let ranks = average_ranks(&column, true);
    Ok(source.models().iter().cloned().zip(ranks).collect())
}

/// Per-task ground-truth ranks for a set of tasks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankTable {
    ranks: BTreeMap<TaskId, BTreeMap<ModelId, f64>>,
}

impl RankTable {
    /// Reads exactly the listed task columns from `source`.
    pub fn from_source<S: AccuracySource + ?Sized>(source: &S, tasks: &[TaskId]) -> Result<Self> {
        let ranks = tasks
            .iter()
            .map(|t| Ok((t.clone(), ground_truth_ranks(source, t.as_str())?)))
            .collect::<Result<_>>()?;
        Ok(Self { ranks })
    }

    pub fn from_table(table: &AccuracyTable) -> Result<Self> {
        Self::from_source(table, table.tasks())
    }

    pub fn tasks(&self) -> impl Iterator<Item = &TaskId> {
        self.ranks.keys()
    }

    pub fn task(&self, task: &str) -> Result<&BTreeMap<ModelId, f64>> {
        self.ranks
            .get(task)
            .ok_or_else(|| Error::Lookup(format!("no ranks for task `{task}`")))
    }

    pub fn rank(&self, task: &str, model: &str) -> Result<f64> {
        self.task(task)?
            .get(model)
            .copied()
            .ok_or_else(|| Error::Lookup(format!("no rank for model `{model}` on task `{task}`")))
    }

    /// Drops one task (leave-one-out).
    pub fn without(&self, task: &str) -> Self {
        let mut ranks = self.ranks.clone();
        ranks.remove(task);
        Self { ranks }
    }
}

/// `sum_sigma p(sigma) * R_m(sigma)`.
pub fn predicted_rank(p: &SimilarityDistribution, ranks: &RankTable, model: &str) -> Result<f64> {
    p.weights
        .iter()
        .map(|(task, w)| Ok(w * ranks.rank(task.as_str(), model)?))
        .sum()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictedRanking {
    pub target: TaskId,
    pub scores: BTreeMap<ModelId, f64>,
    /// Best first.
    pub order: Vec<ModelId>,
}

impl PredictedRanking {
    /// 1-based position of each model in `order`.
    pub fn positions(&self) -> BTreeMap<ModelId, usize> {
        self.order
            .iter()
            .enumerate()
            .map(|(i, m)| (m.clone(), i + 1))
            .collect()
    }
}

/// Ascending sort of predicted ranks. Scores within
/// [`SCORE_TIE_TOLERANCE`] of the first member of their run are ordered by
/// model id.
pub fn ranking(target: TaskId, scores: BTreeMap<ModelId, f64>) -> Result<PredictedRanking> {
    if scores.is_empty() {
        return Err(Error::InsufficientData(format!("no scores for target {target}")));
    }
    if let Some((m, s)) = scores.iter().find(|(_, s)| !s.is_finite()) {
        return Err(Error::NonFinite(format!("score of model {m} is {s}")));
    }
    let mut by_score: Vec<(&ModelId, f64)> = scores.iter().map(|(m, s)| (m, *s)).collect();
    by_score.sort_by(|a, b| a.1.total_cmp(&b.1).then_with(|| a.0.cmp(b.0)));

    let mut order = Vec::with_capacity(by_score.len());
    let mut start = 0;
    while start < by_score.len() {
        let anchor = by_score[start].1;
        let mut end = start + 1;
        while end < by_score.len() && by_score[end].1 - anchor <= SCORE_TIE_TOLERANCE {
            end += 1;
        }
        let mut run: Vec<&ModelId> = by_score[start..end].iter().map(|(m, _)| *m).collect();
        run.sort();
        order.extend(run.into_iter().cloned());
        start = end;
    }
    Ok(PredictedRanking {
        target,
        scores,
        order,
    })
}

/// Aggregates one similarity distribution per model into a ranking.
pub fn predict_ranking(
    target: TaskId,
    weights: &BTreeMap<ModelId, SimilarityDistribution>,
    ranks: &RankTable,
) -> Result<PredictedRanking> {
    let scores = weights
        .iter()
        .map(|(m, p)| Ok((m.clone(), predicted_rank(p, ranks, m.as_str())?)))
        .collect::<Result<_>>()?;
    ranking(target, scores)
}

/// Orders models by accuracy on a fixed reference column, whatever the target.
pub fn baseline_inb<S: AccuracySource + ?Sized>(
    source: &S,
    reference_task: &str,
    target: TaskId,
) -> Result<PredictedRanking> {
    ranking(target, ground_truth_ranks(source, reference_task)?)
}

/// Orders models by their mean rank over every task in `ranks` except the target.
pub fn baseline_avgrank(ranks: &RankTable, target: &TaskId) -> Result<PredictedRanking> {
    let sources: Vec<&TaskId> = ranks.tasks().filter(|t| *t != target).collect();
    let first = sources.first().ok_or_else(|| {
        Error::InsufficientData(format!("no source tasks left after excluding {target}"))
    })?;
    let n = sources.len() as f64;
    let mut scores: BTreeMap<ModelId, f64> = BTreeMap::new();
    for model in ranks.task(first.as_str())?.keys() {
        let total = sources
            .iter()
            .map(|t| ranks.rank(t.as_str(), model.as_str()))
            .sum::<Result<f64>>()?;
        scores.insert(model.clone(), total / n);
    }
    ranking(target.clone(), scores)
}
