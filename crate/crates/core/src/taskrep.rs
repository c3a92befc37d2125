//! Empirical task representations and the target-conditioned block
//! importance distribution.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ids::{ModelId, TaskId};

pub const DEFAULT_EPSILON: f64 = 1e-8;
pub const DEFAULT_ETA: f64 = 2.0;
/// Temperature used for the gap-matrix diagnostics.
pub const ANALYSIS_ETA: f64 = 2.5;

/// Mean block-conductance vector of one task under one model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskRepresentation {
    pub model_id: ModelId,
    pub task_id: TaskId,
    /// Empirical mean conductance, one entry per block.
    pub v: Vec<f64>,
    pub n_samples: usize,
    /// `v / max(||v||, eps)`.
    pub u: Vec<f64>,
}

impl TaskRepresentation {
    pub fn block_count(&self) -> usize {
        self.v.len()
    }

    /// Builds a representation from an already averaged vector.
    pub fn from_mean(
        model_id: ModelId,
        task_id: TaskId,
        v: Vec<f64>,
        n_samples: usize,
        epsilon: f64,
    ) -> Result<Self> {
        if v.is_empty() {
            return Err(Error::Shape("representation needs at least one block".into()));
        }
        if let Some(i) = v.iter().position(|x| !(x.is_finite() && *x >= 0.0)) {
            return Err(Error::validation(
                format!("{model_id}/{task_id} block {i}"),
                format!("conductance must be finite and nonnegative, got {}", v[i]),
            ));
        }
        let u = normalize(&v, epsilon);
        Ok(Self {
            model_id,
            task_id,
            v,
            n_samples,
            u,
        })
    }

    pub fn importance(&self, eta: f64) -> ImportanceDistribution {
        importance(&self.u, eta)
    }

    /// Fails unless `other` was produced by the same model with the same block count.
    pub fn ensure_comparable(&self, other: &TaskRepresentation) -> Result<()> {
        if self.model_id != other.model_id {
            return Err(Error::CrossModel {
                left: self.model_id.to_string(),
                right: other.model_id.to_string(),
            });
        }
        if self.v.len() != other.v.len() {
            return Err(Error::Shape(format!(
                "block counts differ for model {}: {} vs {}",
                self.model_id,
                self.v.len(),
                other.v.len()
            )));
        }
        Ok(())
    }
}

/// Component-wise mean of conductance vectors.
pub fn task_representation<S: AsRef<[f64]>>(
    samples: &[S],
    model_id: ModelId,
    task_id: TaskId,
    epsilon: f64,
) -> Result<TaskRepresentation> {
    let first = samples.first().ok_or_else(|| {
        Error::InsufficientData(format!("no conductance samples for {model_id}/{task_id}"))
    })?;
    let d = first.as_ref().len();
    let mut sum = vec![0.0; d];
    for (row, sample) in samples.iter().enumerate() {
        let sample = sample.as_ref();
        if sample.len() != d {
            return Err(Error::Shape(format!(
                "sample {row} has {} blocks, expected {d}",
                sample.len()
            )));
        }
        for (col, (acc, x)) in sum.iter_mut().zip(sample).enumerate() {
            if !(x.is_finite() && *x >= 0.0) {
                return Err(Error::validation(
                    format!("sample {row}, block {col}"),
                    format!("conductance must be finite and nonnegative, got {x}"),
                ));
            }
            *acc += x;
        }
    }
    let n = samples.len() as f64;
    let mean = sum.into_iter().map(|s| s / n).collect();
    TaskRepresentation::from_mean(model_id, task_id, mean, samples.len(), epsilon)
}

/// `v / max(||v||_2, eps)`.
pub fn normalize(v: &[f64], epsilon: f64) -> Vec<f64> {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let denom = norm.max(epsilon);
    v.iter().map(|x| x / denom).collect()
}

/// Block weights maximizing `<alpha, u> + H(alpha) / eta` over the simplex.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceDistribution {
    pub alpha: Vec<f64>,
    pub eta: f64,
}

impl ImportanceDistribution {
    pub fn len(&self) -> usize {
        self.alpha.len()
    }

    pub fn is_empty(&self) -> bool {
        self.alpha.is_empty()
    }
}

/// Softmax of `eta * u` (max-subtracted).
pub fn importance(u: &[f64], eta: f64) -> ImportanceDistribution {
    ImportanceDistribution {
        alpha: softmax_scaled(u, eta),
        eta,
    }
}

pub(crate) fn softmax_scaled(values: &[f64], scale: f64) -> Vec<f64> {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = values.iter().map(|x| (scale * (x - max)).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

/// Value of the entropy-regularized alignment objective at `alpha`.
pub fn alignment_objective(alpha: &[f64], u: &[f64], eta: f64) -> f64 {
    let inner: f64 = alpha.iter().zip(u).map(|(a, x)| a * x).sum();
    let entropy: f64 = alpha
        .iter()
        .filter(|&&a| a > 0.0)
        .map(|&a| -a * a.ln())
        .sum();
    inner + entropy / eta
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn rep(samples: &[Vec<f64>]) -> Result<TaskRepresentation> {
        task_representation(samples, "m".into(), "t".into(), DEFAULT_EPSILON)
    }

    #[test]
    fn mean_of_one() {
        let r = rep(&[vec![1.0, 2.0, 3.0]]).unwrap();
        assert_eq!(r.v, vec![1.0, 2.0, 3.0]);
        assert_eq!(r.n_samples, 1);
    }

    #[test]
    fn mean_of_two() {
        assert_eq!(rep(&[vec![1.0, 3.0], vec![3.0, 1.0]]).unwrap().v, vec![2.0, 2.0]);
    }

    #[test]
    fn empty_and_ragged_rejected() {
        assert!(matches!(rep(&[]), Err(Error::InsufficientData(_))));
        assert!(matches!(rep(&[vec![1.0, 2.0], vec![1.0]]), Err(Error::Shape(_))));
        assert!(matches!(rep(&[vec![1.0, -2.0]]), Err(Error::Validation { .. })));
    }

    #[test]
    fn normalize_examples() {
        let u = normalize(&[3.0, 4.0], 1e-8);
        assert_abs_diff_eq!(u[0], 0.6, epsilon = 1e-15);
        assert_abs_diff_eq!(u[1], 0.8, epsilon = 1e-15);
        assert_eq!(normalize(&[0.0, 0.0], 1e-8), vec![0.0, 0.0]);
        let clamped = normalize(&[5e-9, 0.0], 1e-8);
        assert_abs_diff_eq!(clamped[0], 0.5, epsilon = 1e-15);
        assert_eq!(clamped[1], 0.0);
    }

    #[test]
    fn constant_u_is_uniform() {
        for c in [-3.0, 0.0, 0.7] {
            let a = importance(&[c; 4], 2.0).alpha;
            for x in a {
                assert_abs_diff_eq!(x, 0.25, epsilon = 1e-15);
            }
        }
    }

    #[test]
    fn two_block_closed_form() {
        let a = importance(&[1.0, 0.0], 2.0).alpha;
        let expected0 = (2.0f64).exp() / ((2.0f64).exp() + 1.0);
        assert_abs_diff_eq!(a[0], expected0, epsilon = 1e-15);
        assert_abs_diff_eq!(a[0], 0.88080, epsilon = 1e-5);
        assert_abs_diff_eq!(a[1], 0.11920, epsilon = 1e-5);
    }

    #[test]
    fn cross_model_comparison_rejected() {
        let a = TaskRepresentation::from_mean("m1".into(), "t".into(), vec![1.0], 1, 1e-8).unwrap();
        let b = TaskRepresentation::from_mean("m2".into(), "t".into(), vec![1.0], 1, 1e-8).unwrap();
        assert!(matches!(a.ensure_comparable(&b), Err(Error::CrossModel { .. })));
    }

    proptest! {
        #[test]
        fn normalized_norm_at_most_one(v in prop::collection::vec(0.0f64..10.0, 1..8)) {
            let u = normalize(&v, DEFAULT_EPSILON);
            let n = u.iter().map(|x| x * x).sum::<f64>().sqrt();
            prop_assert!(n <= 1.0 + 1e-12);
            if v.iter().map(|x| x * x).sum::<f64>().sqrt() >= DEFAULT_EPSILON {
                prop_assert!((n - 1.0).abs() < 1e-12);
            }
        }

        #[test]
        fn alpha_is_a_positive_distribution(
            u in prop::collection::vec(-1.0f64..1.0, 1..10),
            eta in 0.1f64..20.0,
        ) {
            let a = importance(&u, eta).alpha;
            prop_assert!(a.iter().all(|&x| x > 0.0));
            prop_assert!((a.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }

        #[test]
        fn shift_invariance(u in prop::collection::vec(-1.0f64..1.0, 1..10), c in -5.0f64..5.0) {
            let a = importance(&u, 2.0).alpha;
            let shifted: Vec<f64> = u.iter().map(|x| x + c).collect();
            let b = importance(&shifted, 2.0).alpha;
            for (x, y) in a.iter().zip(&b) {
                prop_assert!((x - y).abs() < 1e-12);
            }
        }

        #[test]
        fn permutation_equivariance(u in prop::collection::vec(-1.0f64..1.0, 2..10), rot in 0usize..10) {
            let r = rot % u.len();
            let mut rotated = u.clone();
            rotated.rotate_left(r);
            let mut expected = importance(&u, 3.0).alpha;
            expected.rotate_left(r);
            let got = importance(&rotated, 3.0).alpha;
            for (x, y) in got.iter().zip(&expected) {
                prop_assert!((x - y).abs() < 1e-15);
            }
        }

        #[test]
        fn sharper_with_larger_eta(u in prop::collection::vec(0.0f64..1.0, 2..8), e1 in 0.1f64..10.0, de in 0.0f64..10.0) {
            let max = u.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            prop_assume!(u.iter().filter(|&&x| x == max).count() == 1);
            let lo = importance(&u, e1).alpha.into_iter().fold(0.0, f64::max);
            let hi = importance(&u, e1 + de).alpha.into_iter().fold(0.0, f64::max);
            prop_assert!(hi >= lo - 1e-15);
        }
    }
}
