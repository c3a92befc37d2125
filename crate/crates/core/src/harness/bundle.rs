//! Conductance bundles: the per (model, task) sample matrices consumed by
//! the pipeline, stored as one JSON document each.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::rng::stream_rng;
use crate::error::{Error, Result};
use crate::ids::{ModelId, TaskId};
use crate::taskrep::{task_representation, TaskRepresentation};

pub const OBJECTIVE_TAG: &str = "l2norm";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExtractionMetadata {
    pub steps: usize,
    pub baseline: String,
    pub extractor_version: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preprocessing: Option<String>,
}

/// Validated `N x d` matrix of nonnegative per-sample block conductances.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawBundle")]
pub struct ConductanceBundle {
    model_id: ModelId,
    task_id: TaskId,
    block_count: usize,
    objective: String,
    metadata: ExtractionMetadata,
    samples: Vec<Vec<f64>>,
}

#[derive(Deserialize)]
struct RawBundle {
    model_id: ModelId,
    task_id: TaskId,
    block_count: usize,
    objective: String,
    metadata: ExtractionMetadata,
    samples: Vec<Vec<f64>>,
}

impl TryFrom<RawBundle> for ConductanceBundle {
    type Error = Error;

    fn try_from(raw: RawBundle) -> Result<Self> {
        if raw.objective != OBJECTIVE_TAG {
            return Err(Error::validation(
                "objective",
                format!("expected `{OBJECTIVE_TAG}`, found `{}`", raw.objective),
            ));
        }
        let bundle = Self {
            model_id: raw.model_id,
            task_id: raw.task_id,
            block_count: raw.block_count,
            objective: raw.objective,
            metadata: raw.metadata,
            samples: raw.samples,
        };
        bundle.validate()?;
        Ok(bundle)
    }
}

impl ConductanceBundle {
    pub fn new(
        model_id: ModelId,
        task_id: TaskId,
        metadata: ExtractionMetadata,
        samples: Vec<Vec<f64>>,
    ) -> Result<Self> {
        let block_count = samples.first().map_or(0, Vec::len);
        let bundle = Self {
            model_id,
            task_id,
            block_count,
            objective: OBJECTIVE_TAG.to_string(),
            metadata,
            samples,
        };
        bundle.validate()?;
        Ok(bundle)
    }

    fn validate(&self) -> Result<()> {
        if self.model_id.as_str().is_empty() || self.task_id.as_str().is_empty() {
            return Err(Error::validation("ids", "model_id and task_id must be non-empty"));
        }
        if self.block_count == 0 {
            return Err(Error::validation("block_count", "must be at least 1"));
        }
        if self.samples.is_empty() {
            return Err(Error::validation("samples", "bundle holds no samples"));
        }
        for (r, row) in self.samples.iter().enumerate() {
            if row.len() != self.block_count {
                return Err(Error::validation(
                    format!("samples row {r}"),
                    format!("{} entries, block_count is {}", row.len(), self.block_count),
                ));
            }
            for (c, &x) in row.iter().enumerate() {
                if !(x.is_finite() && x >= 0.0) {
                    return Err(Error::validation(
                        format!("samples row {r}, column {c}"),
                        format!("conductance must be finite and nonnegative, got {x}"),
                    ));
                }
            }
        }
        Ok(())
    }

    pub fn model_id(&self) -> &ModelId {
        &self.model_id
    }

    pub fn task_id(&self) -> &TaskId {
        &self.task_id
    }

    pub fn block_count(&self) -> usize {
        self.block_count
    }

    pub fn objective(&self) -> &str {
        &self.objective
    }

    pub fn metadata(&self) -> &ExtractionMetadata {
        &self.metadata
    }

    pub fn samples(&self) -> &[Vec<f64>] {
        &self.samples
    }

    pub fn n_samples(&self) -> usize {
        self.samples.len()
    }

    /// Compact JSON with fields in declaration order and shortest
    /// round-trip float formatting, followed by a newline.
    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let raw: RawBundle = serde_json::from_str(text)?;
        raw.try_into()
    }

    /// Rows at `indices`, in the given order.
    pub fn select_rows(&self, indices: &[usize]) -> Result<Self> {
        let mut samples = Vec::with_capacity(indices.len());
        for &i in indices {
            let row = self.samples.get(i).ok_or_else(|| {
                Error::Lookup(format!("row {i} out of range for {} samples", self.samples.len()))
            })?;
            samples.push(row.clone());
        }
        if samples.is_empty() {
            return Err(Error::InsufficientData("row selection is empty".into()));
        }
        Ok(Self {
            samples,
            ..self.clone_header()
        })
    }

    fn clone_header(&self) -> Self {
        Self {
            model_id: self.model_id.clone(),
            task_id: self.task_id.clone(),
            block_count: self.block_count,
            objective: self.objective.clone(),
            metadata: self.metadata.clone(),
            samples: Vec::new(),
        }
    }

    pub fn representation(&self, epsilon: f64) -> Result<TaskRepresentation> {
        task_representation(&self.samples, self.model_id.clone(), self.task_id.clone(), epsilon)
    }
}

/// `n` distinct row indices out of `total`, sorted ascending.
pub fn sample_indices<R: Rng + ?Sized>(rng: &mut R, total: usize, n: usize) -> Result<Vec<usize>> {
    if n == 0 || n > total {
        return Err(Error::InsufficientData(format!(
            "cannot draw {n} samples from {total}"
        )));
    }
    let mut idx = index::sample(rng, total, n).into_vec();
    idx.sort_unstable();
    Ok(idx)
}

/// Uniform subsample without replacement, rows kept in their original order.
pub fn subsample(bundle: &ConductanceBundle, n: usize, seed: u64) -> Result<ConductanceBundle> {
    let mut rng = stream_rng(seed, bundle.task_id.as_str(), "subsample");
    let idx = sample_indices(&mut rng, bundle.n_samples(), n)?;
    bundle.select_rows(&idx)
}

pub fn load_bundle(path: impl AsRef<Path>) -> Result<ConductanceBundle> {
    let path = path.as_ref();
    let read = || -> Result<ConductanceBundle> { ConductanceBundle::from_json(&fs::read_to_string(path)?) };
    read().map_err(|e| e.in_file(path))
}

pub fn save_bundle(bundle: &ConductanceBundle, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, bundle.to_json()?).map_err(|e| Error::from(e).in_file(path))
}

/// File name used when writing a bundle into a directory.
pub fn bundle_file_name(model: &str, task: &str) -> String {
    let clean = |s: &str| -> String {
        s.chars()
            .map(|c| if c.is_ascii_alphanumeric() || matches!(c, '-' | '.') { c } else { '_' })
            .collect()
    };
    format!("{}__{}.json", clean(model), clean(task))
}

/// All bundles of an experiment, keyed by (model, task).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct BundleSet {
    bundles: BTreeMap<(ModelId, TaskId), ConductanceBundle>,
}

impl BundleSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, bundle: ConductanceBundle) -> Result<()> {
        let key = (bundle.model_id.clone(), bundle.task_id.clone());
        if self.bundles.contains_key(&key) {
            return Err(Error::validation(
                "bundles",
                format!("duplicate bundle for {}/{}", key.0, key.1),
            ));
        }
        self.bundles.insert(key, bundle);
        Ok(())
    }

    pub fn get(&self, model: &ModelId, task: &TaskId) -> Option<&ConductanceBundle> {
        self.bundles.get(&(model.clone(), task.clone()))
    }

    pub fn require(&self, model: &ModelId, task: &TaskId) -> Result<&ConductanceBundle> {
        self.get(model, task)
            .ok_or_else(|| Error::Coverage(vec![format!("{model}/{task}")]))
    }

    pub fn len(&self) -> usize {
        self.bundles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bundles.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &ConductanceBundle> {
        self.bundles.values()
    }

    pub fn models(&self) -> Vec<ModelId> {
        let set: BTreeSet<&ModelId> = self.bundles.keys().map(|(m, _)| m).collect();
        set.into_iter().cloned().collect()
    }

    pub fn tasks(&self) -> Vec<TaskId> {
        let set: BTreeSet<&TaskId> = self.bundles.keys().map(|(_, t)| t).collect();
        set.into_iter().cloned().collect()
    }

    /// Fails with every missing `model/task` pair.
    pub fn check_coverage(&self, models: &[ModelId], tasks: &[TaskId]) -> Result<()> {
        let missing: Vec<String> = models
            .iter()
            .flat_map(|m| tasks.iter().map(move |t| (m, t)))
            .filter(|(m, t)| self.get(m, t).is_none())
            .map(|(m, t)| format!("{m}/{t}"))
            .collect();
        if missing.is_empty() {
            Ok(())
        } else {
            Err(Error::Coverage(missing))
        }
    }

    /// Loads every `*.json` file in `dir`, in file-name order.
    pub fn load_dir(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let mut paths = Vec::new();
        for entry in fs::read_dir(dir).map_err(|e| Error::from(e).in_file(dir))? {
            let path = entry?.path();
            if path.extension().is_some_and(|e| e == "json") {
                paths.push(path);
            }
        }
        paths.sort();
        let mut set = Self::new();
        for path in paths {
            let bundle = load_bundle(&path)?;
            set.insert(bundle).map_err(|e| e.in_file(&path))?;
        }
        if set.is_empty() {
            return Err(Error::InsufficientData(format!("no bundle files in {}", dir.display())));
        }
        Ok(set)
    }

    pub fn save_dir(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir).map_err(|e| Error::from(e).in_file(dir))?;
        for ((m, t), bundle) in &self.bundles {
            save_bundle(bundle, dir.join(bundle_file_name(m.as_str(), t.as_str())))?;
        }
        Ok(())
    }
}

impl FromIterator<ConductanceBundle> for Result<BundleSet> {
    fn from_iter<I: IntoIterator<Item = ConductanceBundle>>(iter: I) -> Self {
        let mut set = BundleSet::new();
        for b in iter {
            set.insert(b)?;
        }
        Ok(set)
    }
}
