//! Artifact I/O, synthetic worlds, and the leave-one-out experiment driver.

pub mod bundle;
pub mod gaps;
pub mod network;
pub mod protocol;
pub mod report;
pub mod rng;
pub mod sweep;
pub mod synth;
pub mod table;
pub mod theory;
pub mod toy;

pub use bundle::{load_bundle, save_bundle, subsample, BundleSet, ConductanceBundle, ExtractionMetadata};
pub use network::{load_network, save_network};
pub use protocol::{leave_one_out, EvalReport, EvalRow, Method, RunConfig};
pub use synth::{generate_synthetic_world, SynthConfig, SyntheticWorld};
pub use table::{load_accuracy_table, save_accuracy_table};
