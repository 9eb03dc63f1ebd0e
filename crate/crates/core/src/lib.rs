//! Forced-choice measurement of an AI system's authority stack.
//!
//! The crate builds scenario banks over three layer taxonomies (values,
//! evidence types, source types), runs respondents through them, and turns
//! the transcripts into layer profiles, reliability metrics, a hallucination
//! mechanism diagnosis, cascade predictions and audit reports.

pub mod agents;
pub mod bank;
pub mod cascade;
pub mod error;
pub mod exec;
pub mod gateway;
pub mod hashing;
pub mod metrics;
pub mod profile;
pub mod records;
pub mod report;
pub mod taxonomy;
pub mod workspace;

pub use error::{Error, Result};
pub use exec::Exec;

/// Version stamped into every persisted artifact.
pub const FORMAT_VERSION: u32 = 1;

pub(crate) fn unix_now() -> u64 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}
