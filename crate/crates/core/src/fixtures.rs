//! Bundled fixture records.

use crate::record::{validate_and_load, ClientRecord};

/// Canonical document of the simulated client "Elias": seven thought
/// records over three ISO weeks with emotion, activity, biometric and
/// assessment logs.
pub const ELIAS_JSON: &str = include_str!("../fixtures/elias.json");

pub fn elias() -> ClientRecord {
    validate_and_load(ELIAS_JSON).expect("bundled fixture is valid")
}

/// Looks up a bundled fixture by name.
pub fn by_name(name: &str) -> Option<ClientRecord> {
    match name {
        "elias" => Some(elias()),
        _ => None,
    }
}
