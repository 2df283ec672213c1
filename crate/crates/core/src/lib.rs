//! Core of the homeview therapist dashboard.
//!
//! Client homework data is consolidated into a canonical [`record::ClientRecord`],
//! summarized into glanceable [`analytics`], and fed through a three-stage
//! [`pipeline`] (classify, retrieve, build prompt) to an LLM [`gateway`]. The
//! [`summary`] and [`chat`] engines validate model output against fixed
//! structural contracts and anchor every claim to its source entries via
//! [`provenance`]. [`dashboard`] maps onboarding preferences to widgets.

pub mod analytics;
pub mod batch;
pub mod chat;
pub mod dashboard;
pub mod fixtures;
pub mod gateway;
pub mod pipeline;
pub mod provenance;
pub mod record;
pub mod summary;

pub use record::{ClientRecord, Entry, RecordError, RecordStore};
