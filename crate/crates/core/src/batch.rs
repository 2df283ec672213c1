//! Whole-store jobs: analytics for every record and a provenance audit of
//! every persisted summary and answer.
//!
//! With the `parallel` feature records are processed on the rayon pool;
//! without it the same per-record functions run in order. Output order is
//! by record id either way, so both paths give identical results.

#[cfg(feature = "parallel")]
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analytics::{biometric_aggregate, completion_trend, BiometricAggregates, CompletionSeries, DateWindow};
use crate::chat::{AnchoredChatAnswer, ANSWER_NAMESPACE};
use crate::provenance::{audit_anchors, AuditReport, ProvenanceAnchor};
use crate::record::{RecordError, RecordStore};
use crate::summary::{AnchoredSummary, SUMMARY_NAMESPACE};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordAnalytics {
    pub record_id: String,
    pub completion: CompletionSeries,
    pub biometrics: BiometricAggregates,
}

fn analyze_one(store: &RecordStore, record_id: &str, window: DateWindow) -> Option<RecordAnalytics> {
    // A record deleted between listing and reading is skipped.
    let record = store.snapshot(record_id).ok()?;
    Some(RecordAnalytics {
        record_id: record_id.to_string(),
        completion: completion_trend(&record, window),
        biometrics: biometric_aggregate(&record, window),
    })
}

fn map_ids<T: Send>(ids: &[String], f: impl Fn(&str) -> T + Sync + Send) -> Vec<T> {
    #[cfg(feature = "parallel")]
    {
        ids.par_iter().map(|id| f(id)).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        ids.iter().map(|id| f(id)).collect()
    }
}

pub fn batch_analytics(store: &RecordStore, window: DateWindow) -> Vec<RecordAnalytics> {
    map_ids(&store.record_ids(), |id| analyze_one(store, id, window)).into_iter().flatten().collect()
}

/// Sequential reference for [`batch_analytics`].
pub fn batch_analytics_seq(store: &RecordStore, window: DateWindow) -> Vec<RecordAnalytics> {
    store.record_ids().iter().filter_map(|id| analyze_one(store, id, window)).collect()
}

/// Anchors held by the persisted summary and chat answer for one key.
pub fn persisted_anchors(store: &RecordStore, key: &str) -> Result<Vec<ProvenanceAnchor>, RecordError> {
    let mut anchors = Vec::new();
    if let Some(summary) = store.get_document::<AnchoredSummary>(SUMMARY_NAMESPACE, key)? {
        anchors.extend(summary.anchors().into_iter().cloned());
    }
    if let Some(answer) = store.get_document::<AnchoredChatAnswer>(ANSWER_NAMESPACE, key)? {
        anchors.extend(answer.text.anchors);
    }
    Ok(anchors)
}

fn document_keys(store: &RecordStore) -> Vec<String> {
    let mut keys = store.document_keys(SUMMARY_NAMESPACE);
    keys.extend(store.document_keys(ANSWER_NAMESPACE));
    keys.sort();
    keys.dedup();
    keys
}

fn merge_reports(parts: Vec<Result<AuditReport, RecordError>>) -> Result<AuditReport, RecordError> {
    let mut report = AuditReport::default();
    for part in parts {
        report.merge(part?);
    }
    Ok(report)
}

fn audit_key(store: &RecordStore, key: &str) -> Result<AuditReport, RecordError> {
    Ok(audit_anchors(&persisted_anchors(store, key)?, store))
}

/// Audits every persisted summary and answer against the current records.
/// Anchor indices in the report count across documents in key order.
pub fn audit_store(store: &RecordStore) -> Result<AuditReport, RecordError> {
    merge_reports(map_ids(&document_keys(store), |key| audit_key(store, key)))
}

/// Sequential reference for [`audit_store`].
pub fn audit_store_seq(store: &RecordStore) -> Result<AuditReport, RecordError> {
    merge_reports(document_keys(store).iter().map(|key| audit_key(store, key)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dashboard::{OnboardingConfig, SummaryLevel};
    use crate::fixtures;
    use crate::gateway::Gateway;
    use crate::record::READING_MATERIALS_ID;
    use crate::summary::SummaryEngine;
    use std::sync::Arc;

    #[test]
    fn parallel_and_sequential_agree() {
        let store = RecordStore::in_memory();
        for i in 0..6 {
            let mut r = fixtures::elias();
            r.record_id = format!("c{i}");
            store.create(r).unwrap();
        }
        let window = DateWindow::ending("2026-01-01".parse().unwrap(), 60);
        let par = batch_analytics(&store, window);
        assert_eq!(par.len(), 6);
        assert_eq!(par, batch_analytics_seq(&store, window));
    }

    #[test]
    fn audit_finds_dangling_after_entry_removal() {
        let store = Arc::new(RecordStore::in_memory());
        store.create(fixtures::elias()).unwrap();
        let engine = SummaryEngine::new(store.clone(), Arc::new(Gateway::mock()))
            .with_as_of("2026-01-01".parse().unwrap());
        let config = OnboardingConfig { summary_level: SummaryLevel::DetailedAnalysis, ..Default::default() };
        let summary = engine.generate_summary("elias", &config).unwrap();
        let clean = audit_store(&store).unwrap();
        assert!(clean.is_clean());
        assert_eq!(clean.resolved_count, summary.anchors().len());

        let victim = summary
            .anchors()
            .into_iter()
            .map(|a| a.entry_id.clone())
            .find(|id| id != READING_MATERIALS_ID)
            .unwrap();
        store.remove_entry("elias", &victim).unwrap();
        let report = audit_store(&store).unwrap();
        assert!(report.dangling.iter().any(|i| i.entry_id == victim));
        assert_eq!(report, audit_store_seq(&store).unwrap());
    }
}
