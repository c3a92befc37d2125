//! Gap-matrix study over full bundles: per-model proxy reliability and
//! cross-model agreement.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::bundle::BundleSet;
use crate::analysis::{conductance_gap, model_correlation_matrix, performance_gap, proxy_reliability, CorrelationMatrix, GapMatrix};
use crate::error::{Error, Result};
use crate::ids::ModelId;
use crate::rankagg::AccuracyTable;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelGaps {
    pub model: ModelId,
    pub performance: GapMatrix,
    pub conductance: GapMatrix,
    pub reliability: f64,
    /// Reliability of an imported proxy (for example semantic distances).
    pub imported_reliability: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapStudy {
    pub models: Vec<ModelGaps>,
    pub correlation: CorrelationMatrix,
}

/// Uses every sample of every bundle. `imported` must cover the bundle
/// tasks in sorted order.
pub fn gap_study(
    bundles: &BundleSet,
    accuracy: &AccuracyTable,
    eta: f64,
    epsilon: f64,
    imported: Option<&GapMatrix>,
) -> Result<GapStudy> {
    let tasks = bundles.tasks();
    let models = bundles.models();
    bundles.check_coverage(&models, &tasks)?;
    let mut out = Vec::with_capacity(models.len());
    for model in &models {
        let reps = tasks
            .iter()
            .map(|t| bundles.require(model, t)?.representation(epsilon))
            .collect::<Result<Vec<_>>>()?;
        let conductance = conductance_gap(&reps, eta, epsilon)?;
        let full = performance_gap(accuracy, model.as_str())?;
        let performance = restrict(&full, &tasks)?;
        let reliability = proxy_reliability(&performance, &conductance)?;
        let imported_reliability = imported.map(|g| proxy_reliability(&performance, g)).transpose()?;
        out.push(ModelGaps {
            model: model.clone(),
            performance,
            conductance,
            reliability,
            imported_reliability,
        });
    }
    let pairs: Vec<(ModelId, GapMatrix)> = out.iter().map(|g| (g.model.clone(), g.conductance.clone())).collect();
    let correlation = model_correlation_matrix(&pairs)?;
    Ok(GapStudy {
        models: out,
        correlation,
    })
}

fn restrict(m: &GapMatrix, tasks: &[crate::ids::TaskId]) -> Result<GapMatrix> {
    let idx = tasks
        .iter()
        .map(|t| {
            m.tasks
                .iter()
                .position(|x| x == t)
                .ok_or_else(|| Error::Lookup(format!("task `{t}` missing from the accuracy table")))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(GapMatrix {
        kind: m.kind,
        tasks: tasks.to_vec(),
        values: idx.iter().map(|&i| idx.iter().map(|&j| m.values[i][j]).collect()).collect(),
    })
}

/// `reliability.csv`, `model_correlation.csv`, and per-model
/// `gap_performance_<model>.csv` / `gap_conductance_<model>.csv`.
pub fn write_gap_study(study: &GapStudy, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::from(e).in_file(dir))?;
    let create = |name: String| -> Result<fs::File> {
        let path = dir.join(name);
        fs::File::create(&path).map_err(|e| Error::from(e).in_file(path))
    };
    let mut w = csv::Writer::from_writer(create("reliability.csv".into())?);
    w.write_record(["model", "conductance_reliability", "imported_reliability"])?;
    for g in &study.models {
        w.write_record([
            g.model.to_string(),
            g.reliability.to_string(),
            g.imported_reliability.map(|r| r.to_string()).unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    study.correlation.write_csv(create("model_correlation.csv".into())?)?;
    for g in &study.models {
        g.performance.write_csv(create(format!("gap_performance_{}.csv", g.model))?)?;
        g.conductance.write_csv(create(format!("gap_conductance_{}.csv", g.model))?)?;
    }
    Ok(())
}
