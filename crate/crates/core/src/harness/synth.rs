//! Seeded synthetic model zoo for desk-scale experiments.
//!
//! Model `m` has log block affinities `l_m ~ N(0, 1)^d`. A prototype
//! `p ~ N(0, demand_spread^2)^d` defines two opposite demand profiles:
//! even tasks have log demand `p + j_t`, odd tasks `-p + j_t`, with a
//! per-task jitter `j_t ~ N(0, demand_jitter^2)^d`.
//!
//! Accuracy is `clamp(0.5 + 0.4 tanh(accuracy_gain * <log c_t, l_m> / sqrt(d)) + noise * z, 0, 1)`,
//! so tasks with the same demand share model orderings up to noise and
//! opposite tasks have reversed ones. An extra reference column uses the
//! flat log demand `demand_spread * 1` and has no bundles.
//!
//! A conductance sample for image `j` of task `t` under model `m` is
//!
//! `g_j * k_ji * b_i * (1 + s (2 w_ji - 1)) + noise * mean(b) * |z_ji|`, with `b = exp(l_m + log c_t)`,
//!
//! where `s = image_spread`, `w ~ U(0, 1)`, `z ~ N(0, 1)`. The image
//! intensity `g_j ~ U(1 - intensity_spread, 1 + intensity_spread)` and the
//! per-block dropout factor `k_ji` (`dropout_gain` with probability
//! `dropout_rate`, else 1) belong to the image, so every model sees them.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::bundle::{BundleSet, ConductanceBundle, ExtractionMetadata};
use super::rng::stream_rng;
use crate::error::{Error, Result};
use crate::ids::{ModelId, TaskId};
use crate::rankagg::AccuracyTable;

pub const REFERENCE_COLUMN: &str = "imagenet";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub seed: u64,
    pub n_models: usize,
    pub n_tasks: usize,
    pub d: usize,
    pub noise: f64,
    pub samples_per_bundle: usize,
    pub demand_spread: f64,
    pub demand_jitter: f64,
    pub accuracy_gain: f64,
    pub image_spread: f64,
    pub intensity_spread: f64,
    pub dropout_rate: f64,
    pub dropout_gain: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            n_models: 8,
            n_tasks: 6,
            d: 6,
            noise: 0.05,
            samples_per_bundle: 100,
            demand_spread: 1.0,
            demand_jitter: 0.0,
            accuracy_gain: 1.0,
            image_spread: 0.3,
            intensity_spread: 0.7,
            dropout_rate: 0.2,
            dropout_gain: 0.2,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticWorld {
    pub config: SynthConfig,
    pub bundles: BundleSet,
    /// Task columns followed by [`REFERENCE_COLUMN`].
    pub accuracy: AccuracyTable,
    pub models: Vec<ModelId>,
    pub tasks: Vec<TaskId>,
    /// 0 for the `+p` profile, 1 for `-p`, in `tasks` order.
    pub clusters: Vec<usize>,
    pub log_affinity: Vec<Vec<f64>>,
    /// Log demand of each task, in `tasks` order.
    pub log_demand: Vec<Vec<f64>>,
}

impl SyntheticWorld {
    /// True when conductance samples of a bundle are all identical, so
    /// the number of sampled images cannot matter.
    pub fn is_noise_free(&self) -> bool {
        let c = &self.config;
        c.noise == 0.0
            && c.image_spread == 0.0
            && c.intensity_spread == 0.0
            && (c.dropout_rate == 0.0 || c.dropout_gain == 1.0)
    }
}

fn normals<R: Rng + ?Sized>(rng: &mut R, n: usize, scale: f64) -> Vec<f64> {
    (0..n)
        .map(|_| {
            let z: f64 = StandardNormal.sample(rng);
            scale * z
        })
        .collect()
}

pub fn generate_synthetic_world(seed: u64, n_models: usize, n_tasks: usize, d: usize, noise: f64) -> Result<SyntheticWorld> {
    generate(&SynthConfig {
        seed,
        n_models,
        n_tasks,
        d,
        noise,
        ..SynthConfig::default()
    })
}

fn check(cfg: &SynthConfig) -> Result<()> {
    if cfg.n_models < 2 || cfg.n_tasks < 2 || cfg.d < 2 {
        return Err(Error::Parameter("synthetic world needs n_models, n_tasks, d >= 2".into()));
    }
    if cfg.samples_per_bundle == 0 {
        return Err(Error::Parameter("samples_per_bundle must be positive".into()));
    }
    for (name, v) in [
        ("noise", cfg.noise),
        ("demand_spread", cfg.demand_spread),
        ("demand_jitter", cfg.demand_jitter),
        ("accuracy_gain", cfg.accuracy_gain),
        ("dropout_gain", cfg.dropout_gain),
    ] {
        if !(v.is_finite() && v >= 0.0) {
            return Err(Error::Parameter(format!("{name} must be finite and nonnegative, got {v}")));
        }
    }
    for (name, v) in [
        ("image_spread", cfg.image_spread),
        ("intensity_spread", cfg.intensity_spread),
    ] {
        if !(0.0..1.0).contains(&v) {
            return Err(Error::Parameter(format!("{name} must lie in [0, 1), got {v}")));
        }
    }
    if !(0.0..=1.0).contains(&cfg.dropout_rate) {
        return Err(Error::Parameter("dropout_rate must lie in [0, 1]".into()));
    }
    Ok(())
}

pub fn generate(cfg: &SynthConfig) -> Result<SyntheticWorld> {
    check(cfg)?;
    let models: Vec<ModelId> = (0..cfg.n_models).map(|i| format!("model{i:02}").into()).collect();
    let tasks: Vec<TaskId> = (0..cfg.n_tasks).map(|i| format!("task{i:02}").into()).collect();
    let clusters: Vec<usize> = (0..cfg.n_tasks).map(|t| t % 2).collect();

    let mut latent = stream_rng(cfg.seed, "synth", "latent");
    let log_affinity: Vec<Vec<f64>> = (0..cfg.n_models).map(|_| normals(&mut latent, cfg.d, 1.0)).collect();
    let prototype = normals(&mut latent, cfg.d, cfg.demand_spread);
    let log_demand: Vec<Vec<f64>> = clusters
        .iter()
        .map(|&c| {
            let sign = if c == 0 { 1.0 } else { -1.0 };
            let jitter = normals(&mut latent, cfg.d, cfg.demand_jitter);
            prototype.iter().zip(jitter).map(|(p, j)| sign * p + j).collect()
        })
        .collect();

    let mut acc_rng = stream_rng(cfg.seed, "synth", "accuracy");
    let flat = vec![cfg.demand_spread; cfg.d];
    let norm = (cfg.d as f64).sqrt();
    let mut acc = vec![Vec::with_capacity(cfg.n_tasks + 1); cfg.n_models];
    for demand in log_demand.iter().chain(std::iter::once(&flat)) {
        for (m, row) in acc.iter_mut().enumerate() {
            let align: f64 = demand.iter().zip(&log_affinity[m]).map(|(c, l)| c * l).sum::<f64>() / norm;
            let z: f64 = StandardNormal.sample(&mut acc_rng);
            row.push((0.5 + 0.4 * (cfg.accuracy_gain * align).tanh() + cfg.noise * z).clamp(0.0, 1.0));
        }
    }
    let mut columns = tasks.clone();
    columns.push(REFERENCE_COLUMN.into());
    let accuracy = AccuracyTable::new(models.clone(), columns, acc)?;

    // Per-image factors g_j * k_ji, shared by every model.
    let image_factors: Vec<Vec<Vec<f64>>> = tasks
        .iter()
        .map(|task| {
            let mut rng = stream_rng(cfg.seed, task.as_str(), "synth-images");
            (0..cfg.samples_per_bundle)
                .map(|_| {
                    let g = 1.0 + cfg.intensity_spread * (2.0 * rng.random::<f64>() - 1.0);
                    (0..cfg.d)
                        .map(|_| {
                            let k = if rng.random::<f64>() < cfg.dropout_rate { cfg.dropout_gain } else { 1.0 };
                            g * k
                        })
                        .collect()
                })
                .collect()
        })
        .collect();

    let metadata = ExtractionMetadata {
        steps: 0,
        baseline: "zero".into(),
        extractor_version: "synthetic".into(),
        preprocessing: None,
    };
    let s = cfg.image_spread;
    let mut bundles = BundleSet::new();
    for (m, model) in models.iter().enumerate() {
        for (t, task) in tasks.iter().enumerate() {
            let base: Vec<f64> = log_affinity[m]
                .iter()
                .zip(&log_demand[t])
                .map(|(l, c)| (l + c).exp())
                .collect();
            let scale = base.iter().sum::<f64>() / cfg.d as f64;
            let mut rng = stream_rng(cfg.seed, task.as_str(), &format!("synth-samples/{model}"));
            let samples = image_factors[t]
                .iter()
                .map(|factors| {
                    base.iter()
                        .zip(factors)
                        .map(|(b, f)| {
                            let w: f64 = rng.random();
                            let z: f64 = StandardNormal.sample(&mut rng);
                            f * b * (1.0 + s * (2.0 * w - 1.0)) + cfg.noise * scale * z.abs()
                        })
                        .collect()
                })
                .collect();
            bundles.insert(ConductanceBundle::new(model.clone(), task.clone(), metadata.clone(), samples)?)?;
        }
    }

    Ok(SyntheticWorld {
        config: cfg.clone(),
        bundles,
        accuracy,
        models,
        tasks,
        clusters,
        log_affinity,
        log_demand,
    })
}
