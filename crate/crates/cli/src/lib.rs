//! Subcommand implementations behind the `facademap` binary.

pub mod evaluate;
pub mod output;
pub mod pipeline;
pub mod simulate;

pub use evaluate::{evaluate, Evaluation};
pub use pipeline::{run_pipeline, DatasetPaths, RunManifest, RunOptions};
pub use simulate::{simulate_scene, BUILTIN_SCENES};
