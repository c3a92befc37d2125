//! Hyperparameter and sample-size grids over the leave-one-out protocol.

use std::io::Write;

use serde::{Deserialize, Serialize};

use super::bundle::BundleSet;
use super::protocol::{leave_one_out, Method, RunConfig};
use crate::error::{Error, Result};
use crate::metrics::Summary;
use crate::rankagg::AccuracySource;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    pub eta: f64,
    pub gamma: f64,
    pub n_src: usize,
    pub summary: Summary,
}

fn cell<S: AccuracySource + Sync + ?Sized>(bundles: &BundleSet, accuracy: &S, cfg: RunConfig) -> Result<SweepCell> {
    let report = leave_one_out(bundles, accuracy, &cfg)?;
    let summary = *report
        .summary(Method::Dcd)
        .ok_or_else(|| Error::Parameter("sweep needs the dcd method".into()))?;
    Ok(SweepCell {
        eta: cfg.eta,
        gamma: cfg.gamma,
        n_src: cfg.n_src,
        summary,
    })
}

/// One cell per `(eta, gamma)`, eta-major.
pub fn sweep_eta_gamma<S: AccuracySource + Sync + ?Sized>(
    bundles: &BundleSet,
    accuracy: &S,
    base: &RunConfig,
    etas: &[f64],
    gammas: &[f64],
) -> Result<Vec<SweepCell>> {
    if etas.is_empty() || gammas.is_empty() {
        return Err(Error::Parameter("sweep grid is empty".into()));
    }
    let mut cells = Vec::with_capacity(etas.len() * gammas.len());
    for &eta in etas {
        for &gamma in gammas {
            cells.push(cell(bundles, accuracy, RunConfig {
                eta,
                gamma,
                methods: vec![Method::Dcd],
                ..base.clone()
            })?);
        }
    }
    Ok(cells)
}

pub fn sweep_n_src<S: AccuracySource + Sync + ?Sized>(
    bundles: &BundleSet,
    accuracy: &S,
    base: &RunConfig,
    n_srcs: &[usize],
) -> Result<Vec<SweepCell>> {
    if n_srcs.is_empty() {
        return Err(Error::Parameter("sweep grid is empty".into()));
    }
    n_srcs
        .iter()
        .map(|&n_src| {
            cell(bundles, accuracy, RunConfig {
                n_src,
                methods: vec![Method::Dcd],
                ..base.clone()
            })
        })
        .collect()
}

pub fn write_sweep_csv<W: Write>(cells: &[SweepCell], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["eta", "gamma", "n_src", "runs", "ndcg_mean", "ndcg_std", "tau_mean", "tau_std", "sum_mean", "sum_std"])?;
    for c in cells {
        let s = &c.summary;
        w.write_record([
            c.eta.to_string(),
            c.gamma.to_string(),
            c.n_src.to_string(),
            s.runs.to_string(),
            s.ndcg.mean.to_string(),
            s.ndcg.std.to_string(),
            s.tau.mean.to_string(),
            s.tau.std.to_string(),
            s.sum.mean.to_string(),
            s.sum.std.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
