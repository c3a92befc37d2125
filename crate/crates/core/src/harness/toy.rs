//! Bundles from the built-in toy networks, for exercising the pipeline
//! end to end without an external extractor.

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::bundle::{BundleSet, ConductanceBundle, ExtractionMetadata};
use super::rng::stream_rng;
use crate::attribution::{conductance_vector, AttributionConfig, BlockKind, ToyNetwork};
use crate::error::{Error, Result};
use crate::ids::{ModelId, TaskId};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToyExtraction {
    pub seed: u64,
    pub n_models: usize,
    pub n_tasks: usize,
    pub samples: usize,
    /// Input width followed by each block's output width.
    pub widths: Vec<usize>,
    pub steps: usize,
}

impl Default for ToyExtraction {
    fn default() -> Self {
        Self {
            seed: 0,
            n_models: 3,
            n_tasks: 3,
            samples: 20,
            widths: vec![4, 8, 8, 6, 4],
            steps: 50,
        }
    }
}

pub struct ToyOutput {
    pub networks: Vec<(ModelId, ToyNetwork)>,
    pub bundles: BundleSet,
}

/// Task `t` draws inputs `mu_t + 0.3 z` with `mu_t ~ N(0, 1)`; model `m`
/// is `ToyNetwork::seeded(seed + m, widths, AffineTanh)`.
pub fn extract_toy(cfg: &ToyExtraction) -> Result<ToyOutput> {
    if cfg.n_models == 0 || cfg.n_tasks == 0 || cfg.samples == 0 {
        return Err(Error::Parameter("toy extraction needs models, tasks, and samples".into()));
    }
    let attribution = AttributionConfig::with_steps(cfg.steps);
    let input_dim = *cfg.widths.first().ok_or_else(|| Error::Parameter("widths is empty".into()))?;
    let networks: Vec<(ModelId, ToyNetwork)> = (0..cfg.n_models)
        .map(|m| {
            let net = ToyNetwork::seeded(cfg.seed.wrapping_add(m as u64), &cfg.widths, BlockKind::AffineTanh)?;
            Ok((ModelId::from(format!("toy{m:02}")), net))
        })
        .collect::<Result<_>>()?;
    let metadata = ExtractionMetadata {
        steps: cfg.steps,
        baseline: attribution.baseline.tag().to_string(),
        extractor_version: concat!("condsel-toy/", env!("CARGO_PKG_VERSION")).to_string(),
        preprocessing: None,
    };
    let mut bundles = BundleSet::new();
    for t in 0..cfg.n_tasks {
        let task = TaskId::from(format!("toytask{t:02}"));
        let mut rng = stream_rng(cfg.seed, task.as_str(), "toy-inputs");
        let mut normal = || -> f64 { StandardNormal.sample(&mut rng) };
        let mu: Vec<f64> = (0..input_dim).map(|_| normal()).collect();
        let inputs: Vec<Vec<f64>> = (0..cfg.samples)
            .map(|_| mu.iter().map(|m| m + 0.3 * normal()).collect())
            .collect();
        for (model, net) in &networks {
            let samples = inputs
                .iter()
                .map(|x| conductance_vector(net, x, &attribution))
                .collect::<Result<Vec<_>>>()?;
            bundles.insert(ConductanceBundle::new(model.clone(), task.clone(), metadata.clone(), samples)?)?;
        }
    }
    Ok(ToyOutput { networks, bundles })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toy_bundles_have_block_count_columns() {
        let out = extract_toy(&ToyExtraction {
            samples: 3,
            steps: 8,
            ..ToyExtraction::default()
        })
        .unwrap();
        assert_eq!(out.bundles.len(), 9);
        assert!(out.bundles.iter().all(|b| b.block_count() == 4 && b.n_samples() == 3));
    }
}
