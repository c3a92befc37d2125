//! Transferability estimation from layer-conductance task profiles.
//!
//! Each (model, task) pair is summarized by the mean per-block
//! conductance of a few images. For an unseen target the directional
//! conductance divergence to every labelled source task, weighted by the
//! target's own block importance, turns into softmin weights that average
//! the source-task model ranks into a predicted ranking.

pub mod analysis;
pub mod attribution;
pub mod dcd;
pub mod error;
pub mod harness;
pub mod ids;
pub mod metrics;
pub mod rankagg;
pub mod taskrep;

pub use attribution::{AttributionConfig, Baseline, BlockConductance, BlockKind, ToyNetwork};
pub use dcd::{DivergenceRecord, SalientSet, SimilarityDistribution, TailBoundReport};
pub use error::{Error, Result};
pub use harness::{BundleSet, ConductanceBundle, EvalReport, Method, RunConfig};
pub use ids::{ModelId, TaskId};
pub use metrics::{MetricResult, Summary};
pub use rankagg::{AccuracySource, AccuracyTable, PredictedRanking, RankTable};
pub use taskrep::{ImportanceDistribution, TaskRepresentation};
