//! Canonical client record: types, document loading, and the embedded
//! store.

mod entry;
mod load;
mod store;
mod types;

pub use entry::{entry_order, Entry, EntryFilter, EntryKind, EntryRef, KindSelector};
pub use load::{serialize, validate_and_load};
pub use store::RecordStore;
pub use types::*;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum RecordError {
    #[error("schema error at `{path}`: {message}")]
    Schema { path: String, message: String },
    #[error("value {value} at `{path}` is outside {expected}")]
    Range { path: String, value: String, expected: String },
    #[error("duplicate entry id `{0}`")]
    DuplicateId(String),
    #[error("invalid entry at `{path}`: {message}")]
    Validation { path: String, message: String },
    #[error("unknown record `{0}`")]
    UnknownRecord(String),
    #[error("unknown entry `{0}`")]
    UnknownEntry(String),
    #[error("record `{0}` already exists")]
    AlreadyExists(String),
    #[error("stored file {file} is invalid: {source}")]
    Corrupt {
        file: String,
        #[source]
        source: Box<RecordError>,
    },
    #[error("store i/o: {0}")]
    Io(#[from] std::io::Error),
}

impl RecordError {
    /// Field path the error refers to, when there is one.
    pub fn path(&self) -> Option<&str> {
        match self {
            RecordError::Schema { path, .. }
            | RecordError::Range { path, .. }
            | RecordError::Validation { path, .. } => Some(path),
            _ => None,
        }
    }
}
