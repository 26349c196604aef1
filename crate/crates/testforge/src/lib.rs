//! Command-line pipeline, HTTP model clients, offline mocks and on-disk
//! artifacts for the `testforge_core` test-suite generator.

pub mod config;
pub mod error;
pub mod mock;
pub mod modelio;
pub mod pipeline;
pub mod report;
pub mod store;

pub use config::{PipelineConfig, Resources};
pub use error::{TfError, TfResult};
pub use modelio::{mock_registry, ModelRegistry};
pub use pipeline::{Checkpoint, Pipeline};
