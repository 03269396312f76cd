//! Session orchestration: sources, stage adapters, segmentation routing,
//! resumable execution and provenance.

mod adapter;
mod mock;
mod provenance;
mod route;
mod run;
mod source;

pub use adapter::{
    validate_outputs, AdapterError, AdapterKind, AdapterRegistry, IdentityBiasCorrection, InvocationDescriptor,
    MockSegmenterAdapter, ProcessAdapter, ProcessClassifier, Registered, StageAdapter, ThresholdSkullStrip,
    TranslationRegistration, BUILTIN_ADAPTERS,
};
pub use mock::{mock_segmenter, MockThresholds};
pub use provenance::{sha256_bytes, sha256_file, FileHash, SessionProvenance, SessionStatus, StageEntry, StageStatus};
pub use route::{model_key, route_segmentation, select_registration_target, RouteKind, SegRoute, SequenceSet};
pub use run::{run_batch, run_session, segment_images, BatchSummary, PipelineContext, SessionOutcome};
pub use source::{discover_sessions, load_session, LoadedSession, SessionSource, SourceKind};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("session {0} has no selected scans")]
    EmptySession(String),
    #[error("{0}")]
    Io(String),
    #[error("cannot load input: {0}")]
    Load(String),
    #[error("duplicate session id {0}")]
    DuplicateSession(String),
    #[error("stage {stage} failed: {message}")]
    Stage { stage: String, message: String },
    #[error("adapter failure: {0}")]
    Adapter(#[from] AdapterError),
    #[error("config: {0}")]
    Config(#[from] crate::config::ConfigError),
}
