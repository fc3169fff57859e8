//! Running backends over a dataset and turning their answers into reports.

mod backend;
mod config;
mod mock;
mod plugin;
mod report;
mod run;

pub use backend::{
    backend_answer, Backend, BackendAnswer, BackendDescriptor, BackendError, BackendRequest, Capability, CaptureBundle,
};
pub use config::{make_backend, ExperimentConfig, ROOT_ENV};
pub use mock::{mock_captures, MockBackend, MockBehavior, MockKind, UNPARSABLE_ANSWER};
pub use plugin::{PluginBackend, PluginDescriptor};
pub use report::{emit_report, localize_records, REPORT_CSV, REPORT_JSON, REPORT_PLOT};
pub use run::{load_existing, load_inputs, plan_work, run_experiment, run_with_backend, RunInputs, RunSummary, WorkItem};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Scene(#[from] crate::scene::SceneError),
    #[error(transparent)]
    Prompt(#[from] crate::prompt::PromptError),
    #[error(transparent)]
    Record(#[from] crate::metrics::RecordError),
    #[error(transparent)]
    Metrics(#[from] crate::metrics::MetricsError),
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error(transparent)]
    Capture(#[from] crate::intervention::capture::CaptureError),
    #[error(transparent)]
    Relevance(#[from] crate::relevance::RelevanceError),
    #[error(transparent)]
    Image(#[from] image::ImageError),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
