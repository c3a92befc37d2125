//! Randomized checks of the salient-set bounds and the asymmetry witness.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::rng::stream_rng;
use crate::dcd::{dcd_with_eta, verify_tail_bound, LemmaCheck, TailBoundReport};
use crate::error::Result;
use crate::taskrep::{normalize, TaskRepresentation};

/// One random bound-check instance.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundInstance {
    pub u: Vec<f64>,
    pub eta: f64,
    pub k: usize,
    pub delta: Vec<f64>,
}

/// `d` in 2..=10, `u` normalized from uniform [0, 1) entries, `eta` in
/// [0.5, 20), `k` in 1..d, `delta` uniform in [0, 3).
pub fn random_instance<R: Rng + ?Sized>(rng: &mut R) -> BoundInstance {
    let d = rng.random_range(2..=10);
    let raw: Vec<f64> = (0..d).map(|_| rng.random::<f64>()).collect();
    BoundInstance {
        u: normalize(&raw, 1e-8),
        eta: rng.random_range(0.5..20.0),
        k: rng.random_range(1..d),
        delta: (0..d).map(|_| rng.random_range(0.0..3.0)).collect(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TheorySummary {
    pub instances: usize,
    pub lemma_checked: usize,
    pub lemma_skipped: usize,
    pub lemma_violations: usize,
    pub decomposition_violations: usize,
    pub max_decomposition_error: f64,
    pub asymmetry: AsymmetryWitness,
}

impl TheorySummary {
    pub fn passed(&self) -> bool {
        self.lemma_violations == 0 && self.decomposition_violations == 0 && self.asymmetry.holds()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AsymmetryWitness {
    pub eta: f64,
    pub forward: f64,
    pub backward: f64,
}

impl AsymmetryWitness {
    pub fn holds(&self) -> bool {
        self.forward < 0.05 && self.backward > 0.5
    }
}

/// A target concentrated on block 0 and a source that agrees there but
/// spikes on block 1: the target barely weights block 1, the source
/// weights it almost exclusively.
pub fn asymmetry_witness(eta: f64, epsilon: f64) -> Result<AsymmetryWitness> {
    let tau = TaskRepresentation::from_mean("witness".into(), "tau".into(), vec![1.0, 0.01, 0.01], 1, epsilon)?;
    let sigma = TaskRepresentation::from_mean("witness".into(), "sigma".into(), vec![1.0, 2.0, 0.01], 1, epsilon)?;
    Ok(AsymmetryWitness {
        eta,
        forward: dcd_with_eta(&tau, &sigma, eta, epsilon)?.value,
        backward: dcd_with_eta(&sigma, &tau, eta, epsilon)?.value,
    })
}

pub fn run_theory_suite(seed: u64, instances: usize) -> Result<TheorySummary> {
    let mut rng = stream_rng(seed, "theory", "instances");
    let mut summary = TheorySummary {
        instances,
        lemma_checked: 0,
        lemma_skipped: 0,
        lemma_violations: 0,
        decomposition_violations: 0,
        max_decomposition_error: 0.0,
        asymmetry: asymmetry_witness(10.0, 1e-8)?,
    };
    for _ in 0..instances {
        let inst = random_instance(&mut rng);
        let report: TailBoundReport = verify_tail_bound(&inst.u, inst.eta, inst.k, &inst.delta)?;
        match report.lemma {
            LemmaCheck::Holds { .. } => summary.lemma_checked += 1,
            LemmaCheck::Violated { .. } => {
                summary.lemma_checked += 1;
                summary.lemma_violations += 1;
            }
            LemmaCheck::SkippedTie | LemmaCheck::NotApplicable => summary.lemma_skipped += 1,
        }
        if !(report.residual_bounded && report.relaxation_bounded && report.decomposition_error <= 1e-12) {
            summary.decomposition_violations += 1;
        }
        summary.max_decomposition_error = summary.max_decomposition_error.max(report.decomposition_error);
    }
    Ok(summary)
}
