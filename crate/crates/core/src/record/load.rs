//! Parsing and validation of canonical record documents.

use std::collections::{BTreeSet, HashSet};

use super::entry::{Entry, EntryRef};
use super::types::*;
use super::RecordError;

/// Parses a canonical record document and checks every record invariant.
///
/// Either the full record is returned, with every list sorted by
/// `(timestamp, entry_id)`, or a typed error naming the offending path.
pub fn validate_and_load(raw_document: &str) -> Result<ClientRecord, RecordError> {
    let de = &mut serde_json::Deserializer::from_str(raw_document);
    let mut record: ClientRecord = serde_path_to_error::deserialize(de).map_err(|err| {
        let path = err.path().to_string();
        RecordError::Schema {
            path: if path == "." { String::new() } else { path },
            message: err.into_inner().to_string(),
        }
    })?;
    validate_record(&record)?;
    record.sort_all();
    let floor = seq_floor(&record);
    record.next_entry_seq = record.next_entry_seq.max(floor);
    Ok(record)
}

/// Canonical serialization of a record (pretty-printed JSON).
pub fn serialize(record: &ClientRecord) -> String {
    serde_json::to_string_pretty(record).expect("record types serialize infallibly")
}

pub(crate) fn validate_record(record: &ClientRecord) -> Result<(), RecordError> {
    if record.schema_version != SCHEMA_VERSION {
        return Err(RecordError::Schema {
            path: "schema_version".into(),
            message: format!("unsupported schema version {} (expected {SCHEMA_VERSION})", record.schema_version),
        });
    }
    check_record_id(&record.record_id)?;
    non_empty("client_label", &record.client_label)?;

    let mut seen: HashSet<&str> = HashSet::new();
    let check_id = |path: String, id: &'_ str| -> Result<(), RecordError> {
        if id.is_empty() {
            return Err(RecordError::Schema { path, message: "missing entry id".into() });
        }
        if id == READING_MATERIALS_ID {
            return Err(RecordError::Schema { path, message: format!("`{id}` is a reserved id") });
        }
        Ok(())
    };

    for (i, e) in record.submissions.iter().enumerate() {
        check_id(format!("submissions[{i}].entry_id"), &e.entry_id)?;
        validate_submission(&format!("submissions[{i}]"), e)?;
    }
    for (i, e) in record.emotion_logs.iter().enumerate() {
        check_id(format!("emotion_logs[{i}].entry_id"), &e.entry_id)?;
    }
    for (i, e) in record.activity_logs.iter().enumerate() {
        check_id(format!("activity_logs[{i}].entry_id"), &e.entry_id)?;
        validate_activity(&format!("activity_logs[{i}]"), e)?;
    }
    for (i, e) in record.assessments.iter().enumerate() {
        check_id(format!("assessments[{i}].entry_id"), &e.entry_id)?;
        validate_assessment(&format!("assessments[{i}]"), e)?;
    }
    let mut biometric_dates = BTreeSet::new();
    for (i, e) in record.biometric_days.iter().enumerate() {
        check_id(format!("biometric_days[{i}].entry_id"), &e.entry_id)?;
        validate_biometric(&format!("biometric_days[{i}]"), e)?;
        if !biometric_dates.insert(e.date) {
            return Err(RecordError::Validation {
                path: format!("biometric_days[{i}].date"),
                message: format!("a biometric day for {} already exists", e.date),
            });
        }
    }
    for (i, e) in record.goals.iter().enumerate() {
        check_id(format!("goals[{i}].goal_id"), &e.goal_id)?;
        non_empty(&format!("goals[{i}].text"), &e.text)?;
    }
    for (i, e) in record.messages.iter().enumerate() {
        check_id(format!("messages[{i}].message_id"), &e.message_id)?;
        non_empty(&format!("messages[{i}].text"), &e.text)?;
    }
    validate_reading(&record.reading_materials)?;

    for entry in record.entries() {
        if !seen.insert(entry.entry_id()) {
            return Err(RecordError::DuplicateId(entry.entry_id().to_string()));
        }
    }
    Ok(())
}

/// Checks the invariants of a single entry in isolation.
pub(crate) fn validate_entry(path: &str, entry: &Entry) -> Result<(), RecordError> {
    match entry {
        Entry::Submission(e) => validate_submission(path, e),
        Entry::EmotionLog(_) => Ok(()),
        Entry::ActivityLog(e) => validate_activity(path, e),
        Entry::Assessment(e) => validate_assessment(path, e),
        Entry::BiometricDay(e) => validate_biometric(path, e),
        Entry::Goal(e) => non_empty(&format!("{path}.text"), &e.text),
        Entry::Message(e) => non_empty(&format!("{path}.text"), &e.text),
    }
}

pub(crate) fn check_record_id(id: &str) -> Result<(), RecordError> {
    let ok = !id.is_empty()
        && id.len() <= 128
        && id.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_');
    if ok {
        Ok(())
    } else {
        Err(RecordError::Schema {
            path: "record_id".into(),
            message: format!("record id `{id}` must be 1-128 characters of [A-Za-z0-9_-]"),
        })
    }
}

fn non_empty(path: &str, text: &str) -> Result<(), RecordError> {
    if text.trim().is_empty() {
        Err(RecordError::Validation { path: path.to_string(), message: "must not be empty".into() })
    } else {
        Ok(())
    }
}

fn range(path: String, value: i64, lo: i64, hi: i64) -> Result<(), RecordError> {
    if (lo..=hi).contains(&value) {
        Ok(())
    } else {
        Err(RecordError::Range { path, value: value.to_string(), expected: format!("{lo}..={hi}") })
    }
}

fn validate_submission(path: &str, e: &HomeworkSubmission) -> Result<(), RecordError> {
    range(format!("{path}.self_rated_quality"), e.self_rated_quality, 1, 5)?;
    range(format!("{path}.mood_before"), e.mood_before, 1, 10)?;
    range(format!("{path}.mood_after"), e.mood_after, 1, 10)?;
    range(format!("{path}.duration_minutes"), e.duration_minutes, 0, i64::MAX)?;
    match &e.body {
        SubmissionBody::Text(_) => Ok(()),
        SubmissionBody::ThoughtRecord(tr) => {
            non_empty(&format!("{path}.body.thought_record.trigger_situation"), &tr.trigger_situation)?;
            non_empty(&format!("{path}.body.thought_record.automatic_thought"), &tr.automatic_thought)?;
            non_empty(&format!("{path}.body.thought_record.rational_response"), &tr.rational_response)
        }
    }
}

fn validate_activity(path: &str, e: &ActivityLog) -> Result<(), RecordError> {
    non_empty(&format!("{path}.description"), &e.description)
}

fn validate_assessment(path: &str, e: &AssessmentResult) -> Result<(), RecordError> {
    let sum: i64 = e.items.iter().map(|i| i.score).sum();
    if sum != e.total {
        return Err(RecordError::Validation {
            path: format!("{path}.total"),
            message: format!("total {} does not equal the item score sum {sum}", e.total),
        });
    }
    if !e.thresholds.items.is_empty() && e.thresholds.items.len() != e.items.len() {
        return Err(RecordError::Validation {
            path: format!("{path}.thresholds.items"),
            message: format!("{} thresholds for {} items", e.thresholds.items.len(), e.items.len()),
        });
    }
    Ok(())
}

fn validate_biometric(path: &str, e: &BiometricDay) -> Result<(), RecordError> {
    if !e.sleep_hours.is_finite() || !(0.0..=24.0).contains(&e.sleep_hours) {
        return Err(RecordError::Range {
            path: format!("{path}.sleep_hours"),
            value: e.sleep_hours.to_string(),
            expected: "0..=24".into(),
        });
    }
    range(format!("{path}.resting_heart_rate_bpm"), e.resting_heart_rate_bpm, 1, i64::MAX)?;
    range(format!("{path}.activity_steps"), e.activity_steps, 0, i64::MAX)?;
    range(format!("{path}.mindfulness_minutes"), e.mindfulness_minutes, 0, i64::MAX)
}

fn validate_reading(reading: &ReadingStatus) -> Result<(), RecordError> {
    let finished: HashSet<&String> = reading.finished.iter().collect();
    if let Some(both) = reading.not_finished.iter().find(|t| finished.contains(t)) {
        return Err(RecordError::Validation {
            path: "reading_materials".into(),
            message: format!("`{both}` is listed as both finished and not finished"),
        });
    }
    Ok(())
}

/// Smallest sequence value guaranteed not to collide with existing
/// store-assigned ids.
pub(crate) fn seq_floor(record: &ClientRecord) -> u64 {
    record
        .entries()
        .iter()
        .filter_map(|e: &EntryRef<'_>| {
            let (prefix, n) = e.entry_id().rsplit_once('-')?;
            (prefix == e.kind().id_prefix()).then(|| n.parse::<u64>().ok()).flatten()
        })
        .max()
        .map_or(0, |n| n + 1)
}
