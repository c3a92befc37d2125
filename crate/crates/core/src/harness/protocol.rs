//! Leave-one-out evaluation: every task in turn is the unseen target,
//! every other task is a labelled source.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::bundle::{sample_indices, BundleSet};
use super::rng::stream_rng;
use crate::analysis::{ablation_distance, SymmetricMetric};
use crate::dcd::{dcd, similarity_weights, DEFAULT_GAMMA};
use crate::error::{Error, Result};
use crate::ids::{ModelId, TaskId};
use crate::metrics::{aggregate, evaluate, MetricResult, Summary};
use crate::rankagg::{
    baseline_avgrank, baseline_inb, ground_truth_ranks, predict_ranking, AccuracySource, PredictedRanking,
    RankTable,
};
use crate::taskrep::{TaskRepresentation, DEFAULT_EPSILON, DEFAULT_ETA};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// Directional conductance divergence with softmin rank aggregation.
    Dcd,
    AvgRank,
    /// Ranks by accuracy on a fixed reference column.
    Inb,
    /// Same aggregation with `1 - cos` in place of the divergence.
    Cosine,
    /// Same aggregation with Jensen-Shannon divergence of softmaxed vectors.
    Jsd,
}

impl Method {
    pub const ALL: [Method; 5] = [Method::Dcd, Method::AvgRank, Method::Inb, Method::Cosine, Method::Jsd];

    pub fn name(self) -> &'static str {
        match self {
            Method::Dcd => "dcd",
            Method::AvgRank => "avgrank",
            Method::Inb => "inb",
            Method::Cosine => "cosine",
            Method::Jsd => "jsd",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::Parameter(format!("unknown method `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub eta: f64,
    pub gamma: f64,
    pub epsilon: f64,
    pub k: usize,
    pub n_src: usize,
    pub n_tgt: usize,
    pub seed: u64,
    pub runs: usize,
    /// Accuracy column used by the INB baseline. It must not be one of the
    /// evaluated tasks.
    pub imagenet_column_id: Option<TaskId>,
    pub methods: Vec<Method>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            eta: DEFAULT_ETA,
            gamma: DEFAULT_GAMMA,
            epsilon: DEFAULT_EPSILON,
            k: 5,
            n_src: 25,
            n_tgt: 1,
            seed: 0,
            runs: 10,
            imagenet_column_id: None,
            methods: vec![Method::Dcd, Method::AvgRank],
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("eta", self.eta), ("gamma", self.gamma), ("epsilon", self.epsilon)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Parameter(format!("{name} must be positive and finite, got {v}")));
            }
        }
        for (name, v) in [("k", self.k), ("n_src", self.n_src), ("n_tgt", self.n_tgt), ("runs", self.runs)] {
            if v == 0 {
                return Err(Error::Parameter(format!("{name} must be at least 1")));
            }
        }
        if self.methods.is_empty() {
            return Err(Error::Parameter("no methods selected".into()));
        }
        if self.methods.contains(&Method::Inb) && self.imagenet_column_id.is_none() {
            return Err(Error::Parameter("the inb baseline needs a reference accuracy column".into()));
        }
        Ok(())
    }

    pub fn run_seed(&self, run: usize) -> u64 {
        self.seed.wrapping_add(run as u64)
    }
}

/// Hides one task's accuracy column from the prediction path.
pub struct Excluding<'a, S: ?Sized> {
    inner: &'a S,
    hidden: &'a TaskId,
}

impl<'a, S: AccuracySource + ?Sized> Excluding<'a, S> {
    pub fn new(inner: &'a S, hidden: &'a TaskId) -> Self {
        Self { inner, hidden }
    }
}

impl<S: AccuracySource + ?Sized> AccuracySource for Excluding<'_, S> {
    fn models(&self) -> &[ModelId] {
        self.inner.models()
    }

    fn column(&self, task: &str) -> Result<Vec<f64>> {
        if task == self.hidden.as_str() {
            return Err(Error::Lookup(format!("accuracy of held-out target `{task}` is not available")));
        }
        self.inner.column(task)
    }
}

/// Target-role and source-role representations of every (model, task)
/// pair for one run.
#[derive(Debug, Clone, PartialEq)]
pub struct Representations {
    target: BTreeMap<(ModelId, TaskId), TaskRepresentation>,
    source: BTreeMap<(ModelId, TaskId), TaskRepresentation>,
}

impl Representations {
    /// Subsamples `n_tgt` target rows and `n_src` source rows per bundle.
    /// Indices depend only on (run seed, task, role), so all models see the
    /// same images of a task.
    pub fn draw(bundles: &BundleSet, models: &[ModelId], tasks: &[TaskId], cfg: &RunConfig, run: usize) -> Result<Self> {
        let seed = cfg.run_seed(run);
        let mut target = BTreeMap::new();
        let mut source = BTreeMap::new();
        for task in tasks {
            for model in models {
                let bundle = bundles.require(model, task)?;
                let n = bundle.n_samples();
                let t_idx = sample_indices(&mut stream_rng(seed, task.as_str(), "target"), n, cfg.n_tgt)?;
                let s_idx = sample_indices(&mut stream_rng(seed, task.as_str(), "source"), n, cfg.n_src)?;
                let key = (model.clone(), task.clone());
                target.insert(key.clone(), bundle.select_rows(&t_idx)?.representation(cfg.epsilon)?);
                source.insert(key, bundle.select_rows(&s_idx)?.representation(cfg.epsilon)?);
            }
        }
        Ok(Self { target, source })
    }

    /// Uses the same representation for both roles.
    pub fn from_full(reps: impl IntoIterator<Item = TaskRepresentation>) -> Self {
        let source: BTreeMap<_, _> = reps
            .into_iter()
            .map(|r| ((r.model_id.clone(), r.task_id.clone()), r))
            .collect();
        Self {
            target: source.clone(),
            source,
        }
    }

    pub fn target(&self, model: &ModelId, task: &TaskId) -> Result<&TaskRepresentation> {
        self.target
            .get(&(model.clone(), task.clone()))
            .ok_or_else(|| Error::Coverage(vec![format!("{model}/{task}")]))
    }

    pub fn source(&self, model: &ModelId, task: &TaskId) -> Result<&TaskRepresentation> {
        self.source
            .get(&(model.clone(), task.clone()))
            .ok_or_else(|| Error::Coverage(vec![format!("{model}/{task}")]))
    }
}

/// Distance from `target` to each source under one model. Only
/// divergence-based methods have one.
pub fn divergences(
    method: Method,
    model: &ModelId,
    target: &TaskId,
    sources: &[TaskId],
    reps: &Representations,
    cfg: &RunConfig,
) -> Result<BTreeMap<TaskId, f64>> {
    let t_rep = reps.target(model, target)?;
    let alpha = t_rep.importance(cfg.eta);
    sources
        .iter()
        .map(|s| {
            let s_rep = reps.source(model, s)?;
            let value = match method {
                Method::Dcd => dcd(t_rep, s_rep, &alpha, cfg.epsilon)?.value,
                Method::Cosine => ablation_distance(&t_rep.v, &s_rep.v, SymmetricMetric::Cosine, cfg.epsilon)?,
                Method::Jsd => ablation_distance(&t_rep.v, &s_rep.v, SymmetricMetric::Jsd, cfg.epsilon)?,
                Method::AvgRank | Method::Inb => {
                    return Err(Error::Parameter(format!("method {method} has no divergence")))
                }
            };
            Ok((s.clone(), value))
        })
        .collect()
}

/// Ranking for one held-out target. `accuracy` should already hide the
/// target column; only the `sources` columns (and the INB reference) are read.
pub fn predict_target<S: AccuracySource + ?Sized>(
    method: Method,
    target: &TaskId,
    sources: &[TaskId],
    reps: &Representations,
    accuracy: &S,
    cfg: &RunConfig,
) -> Result<PredictedRanking> {
    match method {
        Method::Inb => {
            let column = cfg
                .imagenet_column_id
                .as_ref()
                .ok_or_else(|| Error::Parameter("inb needs a reference column".into()))?;
            baseline_inb(accuracy, column.as_str(), target.clone())
        }
        Method::AvgRank => {
            let ranks = RankTable::from_source(accuracy, sources)?;
            baseline_avgrank(&ranks, target)
        }
        Method::Dcd | Method::Cosine | Method::Jsd => {
            let ranks = RankTable::from_source(accuracy, sources)?;
            let weights = accuracy
                .models()
                .iter()
                .map(|m| {
                    let d = divergences(method, m, target, sources, reps, cfg)?;
                    Ok((m.clone(), similarity_weights(target.clone(), &d, cfg.gamma)?))
                })
                .collect::<Result<BTreeMap<_, _>>>()?;
            predict_ranking(target.clone(), &weights, &ranks)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRow {
    pub run: usize,
    pub method: Method,
    pub metrics: MetricResult,
    pub ranking: PredictedRanking,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: Method,
    pub summary: Summary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub config: RunConfig,
    pub models: Vec<ModelId>,
    pub tasks: Vec<TaskId>,
    /// Run-major, then target, then method in configuration order.
    pub rows: Vec<EvalRow>,
    pub summaries: Vec<MethodSummary>,
}

impl EvalReport {
    pub fn summary(&self, method: Method) -> Option<&Summary> {
        self.summaries.iter().find(|s| s.method == method).map(|s| &s.summary)
    }

    pub fn rows_for(&self, method: Method) -> impl Iterator<Item = &EvalRow> {
        self.rows.iter().filter(move |r| r.method == method)
    }

    /// Aggregates from the rows alone.
    pub fn recompute_summaries(&self) -> Result<Vec<MethodSummary>> {
        self.config
            .methods
            .iter()
            .map(|&method| {
                let rows: Vec<(usize, MetricResult)> =
                    self.rows_for(method).map(|r| (r.run, r.metrics.clone())).collect();
                Ok(MethodSummary {
                    method,
                    summary: aggregate(&rows)?,
                })
            })
            .collect()
    }
}

/// Leave-one-out over every task that has bundles.
pub fn leave_one_out<S: AccuracySource + Sync + ?Sized>(
    bundles: &BundleSet,
    accuracy: &S,
    cfg: &RunConfig,
) -> Result<EvalReport> {
    cfg.validate()?;
    let models = accuracy.models().to_vec();
    let tasks = bundles.tasks();
    if tasks.len() < 2 {
        return Err(Error::InsufficientData("leave-one-out needs at least two tasks".into()));
    }
    if let Some(extra) = bundles.models().into_iter().find(|m| !models.contains(m)) {
        return Err(Error::Lookup(format!("bundles mention model `{extra}` absent from the accuracy table")));
    }
    bundles.check_coverage(&models, &tasks)?;
    if cfg.k > models.len() {
        return Err(Error::Parameter(format!("k = {} exceeds the {} models", cfg.k, models.len())));
    }
    if let Some(col) = &cfg.imagenet_column_id {
        if tasks.contains(col) {
            return Err(Error::Parameter(format!(
                "reference column `{col}` is an evaluated task and would leak its accuracies"
            )));
        }
    }

    // Ground truth is read only for scoring.
    let truth: BTreeMap<&TaskId, BTreeMap<ModelId, f64>> = tasks
        .iter()
        .map(|t| Ok((t, ground_truth_ranks(accuracy, t.as_str())?)))
        .collect::<Result<_>>()?;

    let reps: Vec<Representations> = (0..cfg.runs)
        .into_par_iter()
        .map(|run| Representations::draw(bundles, &models, &tasks, cfg, run))
        .collect::<Result<_>>()?;

    let cells: Vec<(usize, &TaskId, Method)> = (0..cfg.runs)
        .flat_map(|run| tasks.iter().flat_map(move |t| cfg.methods.iter().map(move |&m| (run, t, m))))
        .collect();
    let rows: Vec<EvalRow> = cells
        .into_par_iter()
        .map(|(run, target, method)| {
            let sources: Vec<TaskId> = tasks.iter().filter(|t| *t != target).cloned().collect();
            let view = Excluding::new(accuracy, target);
            let ranking = predict_target(method, target, &sources, &reps[run], &view, cfg)?;
            let metrics = evaluate(&ranking, &truth[target], cfg.k)?;
            Ok(EvalRow {
                run,
                method,
                metrics,
                ranking,
            })
        })
        .collect::<Result<_>>()?;

    let mut report = EvalReport {
        config: cfg.clone(),
        models,
        tasks,
        rows,
        summaries: Vec::new(),
    };
    report.summaries = report.recompute_summaries()?;
    Ok(report)
}
