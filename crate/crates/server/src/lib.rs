//! HTTP API and batch commands over [`labelforge::project::Project`].
//!
//! Each project lives in its own directory under the data directory: the
//! corpus files, `project.json`, the append-only `events.jsonl` and a
//! `snapshot.json` of the latest state. Projects are rebuilt from their event
//! log on start-up.

pub mod api;
pub mod batch;
mod error;
mod state;

pub use api::router;
pub use error::ApiError;
pub use state::{AppState, DEFAULT_DEBOUNCE};
