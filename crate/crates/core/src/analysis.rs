//! Task-pair gap matrices, proxy reliability, cross-model agreement, and
//! the symmetric similarity measures used for ablation.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::dcd::dcd_with_eta;
use crate::error::{Error, Result};
use crate::ids::{ModelId, TaskId};
use crate::metrics::spearman;
use crate::rankagg::AccuracyTable;
use crate::taskrep::{softmax_scaled, TaskRepresentation};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GapKind {
    Performance,
    Conductance,
    /// Precomputed elsewhere (for example text-embedding distances).
    Imported,
}

/// Symmetric task-by-task matrix with a zero diagonal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapMatrix {
    pub kind: GapKind,
    pub tasks: Vec<TaskId>,
    pub values: Vec<Vec<f64>>,
}

impl GapMatrix {
    #[allow(clippy::needless_range_loop)]
    fn from_fn(kind: GapKind, tasks: Vec<TaskId>, mut f: impl FnMut(usize, usize) -> Result<f64>) -> Result<Self> {
        let n = tasks.len();
        let mut values = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in i + 1..n {
                let g = f(i, j)?;
                values[i][j] = g;
                values[j][i] = g;
            }
        }
        Ok(Self { kind, tasks, values })
    }

    /// Strict upper triangle, row-major.
    pub fn upper_triangle(&self) -> Vec<f64> {
        let n = self.tasks.len();
        (0..n)
            .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
            .map(|(i, j)| self.values[i][j])
            .collect()
    }

    pub fn is_symmetric(&self) -> bool {
        let n = self.tasks.len();
        (0..n).all(|i| self.values[i][i] == 0.0 && (0..n).all(|j| self.values[i][j] == self.values[j][i]))
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        write_matrix(out, "task", &self.tasks, &self.tasks, &self.values)
    }

    /// Reads a square matrix written by [`GapMatrix::write_csv`] or produced
    /// externally with the same layout.
    pub fn read_csv<R: Read>(input: R, kind: GapKind) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
        let header = reader.headers()?.clone();
        let tasks: Vec<TaskId> = header.iter().skip(1).map(TaskId::from).collect();
        let mut values = Vec::with_capacity(tasks.len());
        for (r, record) in reader.records().enumerate() {
            let record = record?;
            let name = record.get(0).unwrap_or_default();
            if tasks.get(r).map(TaskId::as_str) != Some(name) {
                return Err(Error::validation(
                    format!("row {}", r + 1),
                    format!("row label `{name}` does not match column order"),
                ));
            }
            let row = record
                .iter()
                .skip(1)
                .enumerate()
                .map(|(c, cell)| {
                    cell.trim().parse::<f64>().map_err(|_| {
                        Error::validation(format!("row {name}, column {}", c + 1), format!("not a number: `{cell}`"))
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            if row.len() != tasks.len() {
                return Err(Error::validation(format!("row {name}"), "row length differs from header"));
            }
            values.push(row);
        }
        if values.len() != tasks.len() {
            return Err(Error::Shape(format!("{} rows for {} columns", values.len(), tasks.len())));
        }
        let m = Self { kind, tasks, values };
        if !m.is_symmetric() {
            return Err(Error::validation("matrix", "gap matrix must be symmetric with zero diagonal"));
        }
        Ok(m)
    }
}

pub(crate) fn write_matrix<W: Write, R: std::fmt::Display, C: std::fmt::Display>(
    out: W,
    corner: &str,
    rows: &[R],
    cols: &[C],
    values: &[Vec<f64>],
) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec![corner.to_string()];
    header.extend(cols.iter().map(ToString::to_string));
    w.write_record(&header)?;
    for (name, row) in rows.iter().zip(values) {
        let mut rec = vec![name.to_string()];
        rec.extend(row.iter().map(|v| v.to_string()));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// `|a_m(tau) - a_m(sigma)|` over all task pairs.
pub fn performance_gap(table: &AccuracyTable, model: &str) -> Result<GapMatrix> {
    let row = table.row(model)?;
    GapMatrix::from_fn(GapKind::Performance, table.tasks().to_vec(), |i, j| Ok((row[i] - row[j]).abs()))
}

/// Symmetrized divergence `(D(t -> s) + D(s -> t)) / 2`, each direction
/// weighted by its own target's importance at temperature `eta`.
pub fn conductance_gap(reps: &[TaskRepresentation], eta: f64, epsilon: f64) -> Result<GapMatrix> {
    if reps.len() < 2 {
        return Err(Error::InsufficientData("conductance gap needs at least two tasks".into()));
    }
    for r in &reps[1..] {
        reps[0].ensure_comparable(r)?;
    }
    let tasks = reps.iter().map(|r| r.task_id.clone()).collect();
    GapMatrix::from_fn(GapKind::Conductance, tasks, |i, j| {
        let forward = dcd_with_eta(&reps[i], &reps[j], eta, epsilon)?.value;
        let backward = dcd_with_eta(&reps[j], &reps[i], eta, epsilon)?.value;
        Ok(0.5 * (forward + backward))
    })
}

/// Spearman correlation between the strict upper triangles of two gap
/// matrices over the same tasks.
pub fn proxy_reliability(truth: &GapMatrix, proxy: &GapMatrix) -> Result<f64> {
    if truth.tasks != proxy.tasks {
        return Err(Error::Shape("gap matrices cover different task lists".into()));
    }
    if truth.tasks.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "need at least 3 tasks for a rank correlation, got {}",
            truth.tasks.len()
        )));
    }
    spearman(&truth.upper_triangle(), &proxy.upper_triangle())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationMatrix {
    pub models: Vec<ModelId>,
    pub values: Vec<Vec<f64>>,
}

impl CorrelationMatrix {
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        write_matrix(out, "model", &self.models, &self.models, &self.values)
    }
}

/// Pairwise Spearman agreement of per-model conductance gap matrices.
pub fn model_correlation_matrix(gaps: &[(ModelId, GapMatrix)]) -> Result<CorrelationMatrix> {
    if gaps.len() < 2 {
        return Err(Error::InsufficientData("model correlation needs at least two models".into()));
    }
    let tasks = &gaps[0].1.tasks;
    if let Some((m, _)) = gaps.iter().find(|(_, g)| &g.tasks != tasks) {
        return Err(Error::Shape(format!("model {m} covers a different task list")));
    }
    let vecs: Vec<Vec<f64>> = gaps.iter().map(|(_, g)| g.upper_triangle()).collect();
    let n = gaps.len();
    let mut values = vec![vec![1.0; n]; n];
    for i in 0..n {
        for j in i + 1..n {
            let r = spearman(&vecs[i], &vecs[j])?;
            values[i][j] = r;
            values[j][i] = r;
        }
    }
    Ok(CorrelationMatrix {
        models: gaps.iter().map(|(m, _)| m.clone()).collect(),
        values,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SymmetricMetric {
    /// `1 - cos(v_t, v_s)`.
    Cosine,
    /// Base-2 Jensen-Shannon divergence of `softmax(v_t)` and `softmax(v_s)`.
    Jsd,
}

pub fn cosine_distance(a: &[f64], b: &[f64], epsilon: f64) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt().max(epsilon);
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt().max(epsilon);
    1.0 - dot / (na * nb)
}

pub fn jensen_shannon(p: &[f64], q: &[f64]) -> f64 {
    let kl_to_mid = |x: &[f64], y: &[f64]| -> f64 {
        x.iter()
            .zip(y)
            .filter(|(a, _)| **a > 0.0)
            .map(|(a, b)| a * (2.0 * a / (a + b)).log2())
            .sum()
    };
    (0.5 * kl_to_mid(p, q) + 0.5 * kl_to_mid(q, p)).max(0.0)
}

/// Symmetric drop-in replacement for the directional divergence.
pub fn ablation_distance(v_target: &[f64], v_source: &[f64], metric: SymmetricMetric, epsilon: f64) -> Result<f64> {
    if v_target.len() != v_source.len() {
        return Err(Error::Shape(format!(
            "vectors have lengths {} and {}",
            v_target.len(),
            v_source.len()
        )));
    }
    Ok(match metric {
        SymmetricMetric::Cosine => cosine_distance(v_target, v_source, epsilon),
        SymmetricMetric::Jsd => jensen_shannon(&softmax_scaled(v_target, 1.0), &softmax_scaled(v_source, 1.0)),
    })
}
