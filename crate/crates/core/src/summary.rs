//! The summary path: short-circuit, retrieve, prompt, complete, validate,
//! anchor.
//!
//! Generations are cached per (record content, config, reference day) and
//! concurrent requests for the same key share one provider call.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use chrono::{DateTime, NaiveDate, Utc};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::analytics::{DateWindow, NO_DATA};
use crate::dashboard::{ConfigError, HomeworkFrequency, OnboardingConfig, SummaryLevel};
use crate::gateway::{
    validate_summary, Gateway, GatewayError, GenerationError, SummaryDocument, ValidationContext, Violation,
};
use crate::pipeline::{
    build_summary_prompt, homework_frequency_lines, retrieve, ContextBundle, PipelineError, RetrievalRequest,
    SummaryRequest, SUMMARY_HEADERS,
};
use crate::provenance::{attach_anchors, AnchoredText, ProvenanceAnchor, ProvenanceError};
use crate::record::{ClientRecord, EntryRef, RecordError, RecordStore};

pub const SUMMARY_NAMESPACE: &str = "summaries";

#[derive(Debug, Error)]
pub enum EngineError {
    #[error(transparent)]
    Record(#[from] RecordError),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error(transparent)]
    Provider(#[from] GatewayError),
    #[error("generation failed after {attempts} attempts")]
    GenerationFailed { violations: Vec<Violation>, attempts: u32 },
    #[error(transparent)]
    Provenance(#[from] ProvenanceError),
}

impl From<GenerationError> for EngineError {
    fn from(e: GenerationError) -> Self {
        match e {
            GenerationError::Provider(p) => EngineError::Provider(p),
            GenerationError::Rejected { violations, attempts } => EngineError::GenerationFailed { violations, attempts },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnchoredSection {
    pub header: Option<String>,
    pub text: AnchoredText,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnchoredSummary {
    pub record_id: String,
    pub level: SummaryLevel,
    pub document: SummaryDocument,
    pub sections: Vec<AnchoredSection>,
    pub generated_at: DateTime<Utc>,
    /// Provider calls made, zero for the no-summary level.
    pub attempts: u32,
    pub window: Option<DateWindow>,
}

impl AnchoredSummary {
    pub fn anchors(&self) -> Vec<&ProvenanceAnchor> {
        self.sections.iter().flat_map(|s| s.text.anchors.iter()).collect()
    }

    /// The whole summary as one anchored text, tokens inline.
    pub fn anchored_text(&self) -> AnchoredText {
        let mut out = AnchoredText::default();
        for (i, section) in self.sections.iter().enumerate() {
            if i > 0 {
                out.body.push_str("\n\n");
            }
            if let Some(h) = &section.header {
                out.body.push_str(h);
                out.body.push('\n');
            }
            out.body.push_str(&section.text.body);
            out.anchors.extend(section.text.anchors.iter().cloned());
        }
        out
    }

    pub fn render(&self) -> String {
        self.anchored_text().body
    }
}

/// Aggregated homework text for a frequency setting over `window`.
pub fn summary_frequency_view(record: &ClientRecord, window: DateWindow, frequency: HomeworkFrequency) -> String {
    let subs: Vec<_> = record.submissions.iter().filter(|s| window.contains_ts(s.submitted_at)).collect();
    let lines = homework_frequency_lines(&subs, frequency);
    if lines.is_empty() {
        return NO_DATA.to_string();
    }
    lines.iter().map(|l| l.render()).collect::<Vec<_>>().join("\n")
}

fn digest(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Digest of a record's full content.
pub fn record_digest(record: &ClientRecord) -> String {
    digest(serde_json::to_string(record).expect("records serialize").as_bytes())
}

pub fn config_digest(config: &OnboardingConfig) -> String {
    digest(serde_json::to_string(config).expect("configs serialize").as_bytes())
}

/// Source entries a section falls back to when the model cites none.
fn domain_sources(header: Option<&str>, bundle: &ContextBundle) -> Vec<String> {
    let from = |names: &[&str]| -> Vec<String> {
        let mut ids: Vec<String> = Vec::new();
        for name in names {
            if let Some(section) = bundle.section(name) {
                for id in section.sources() {
                    if !ids.iter().any(|x| x == id) {
                        ids.push(id.to_string());
                    }
                }
            }
        }
        ids
    };
    let domain = match header {
        Some(h) if h == SUMMARY_HEADERS[0] => from(&["reading_materials"]),
        Some(h) if h == SUMMARY_HEADERS[1] => from(&["homework_data"]),
        Some(h) if h == SUMMARY_HEADERS[2] => from(&["emotion_logs", "assessments"]),
        Some(h) if h == SUMMARY_HEADERS[3] => from(&["journal_entries"]),
        Some(h) if h == SUMMARY_HEADERS[4] => from(&["biometric_aggregates"]),
        _ => Vec::new(),
    };
    if domain.is_empty() {
        bundle.source_entries.clone()
    } else {
        domain
    }
}

/// Rewrites a validated body's citations into anchors; a data-bearing
/// body with no citations is anchored to its domain's sources.
pub(crate) fn anchor_body(
    body: &str,
    header: Option<&str>,
    bundle: &ContextBundle,
    record: &ClientRecord,
) -> Result<AnchoredText, ProvenanceError> {
    if body.trim() == NO_DATA {
        return Ok(AnchoredText::plain(body));
    }
    let sources = bundle.source_refs(record);
    let mut text = attach_anchors(body, &record.record_id, &sources)?;
    if text.anchors.is_empty() {
        let fallback: Vec<EntryRef<'_>> =
            domain_sources(header, bundle).iter().filter_map(|id| record.find(id)).collect();
        text.append_sources(&record.record_id, &fallback);
    }
    Ok(text)
}

type CacheKey = (String, String, String);

/// Cached, coalescing summary generator over a store and a gateway.
pub struct SummaryEngine {
    store: Arc<RecordStore>,
    gateway: Arc<Gateway>,
    as_of: Option<NaiveDate>,
    cache: Mutex<HashMap<CacheKey, AnchoredSummary>>,
    inflight: Mutex<HashMap<CacheKey, Arc<Mutex<()>>>>,
}

impl SummaryEngine {
    pub fn new(store: Arc<RecordStore>, gateway: Arc<Gateway>) -> Self {
        Self { store, gateway, as_of: None, cache: Mutex::default(), inflight: Mutex::default() }
    }

    /// Pins the reference day instead of reading the clock.
    pub fn with_as_of(mut self, as_of: NaiveDate) -> Self {
        self.as_of = Some(as_of);
        self
    }

    pub fn gateway(&self) -> &Gateway {
        &self.gateway
    }

    fn today(&self) -> NaiveDate {
        self.as_of.unwrap_or_else(|| Utc::now().date_naive())
    }

    pub fn generate_summary(&self, record_id: &str, config: &OnboardingConfig) -> Result<AnchoredSummary, EngineError> {
        let record = self.store.snapshot(record_id)?;
        config.validate()?;
        if config.summary_level == SummaryLevel::NoAiSummary {
            let summary = AnchoredSummary {
                record_id: record_id.to_string(),
                level: SummaryLevel::NoAiSummary,
                document: SummaryDocument::no_summary(),
                sections: vec![AnchoredSection { header: None, text: AnchoredText::plain(crate::gateway::NO_SUMMARY_TEXT) }],
                generated_at: Utc::now(),
                attempts: 0,
                window: None,
            };
            self.persist(&summary)?;
            return Ok(summary);
        }

        let as_of = self.today();
        let key = (record_id.to_string(), record_digest(&record), format!("{}@{as_of}", config_digest(config)));
        if let Some(hit) = self.cache.lock().expect("cache lock").get(&key) {
            return Ok(hit.clone());
        }
        let gate = self.inflight.lock().expect("inflight lock").entry(key.clone()).or_default().clone();
        let _turn = gate.lock().expect("inflight gate");
        if let Some(hit) = self.cache.lock().expect("cache lock").get(&key) {
            return Ok(hit.clone());
        }
        let result = self.generate_uncached(&record, config, as_of);
        if let Ok(summary) = &result {
            let mut cache = self.cache.lock().expect("cache lock");
            cache.retain(|k, _| k.0 != key.0 || k.1 == key.1);
            cache.insert(key.clone(), summary.clone());
            self.persist(summary)?;
        }
        self.inflight.lock().expect("inflight lock").remove(&key);
        result
    }

    fn generate_uncached(
        &self,
        record: &ClientRecord,
        config: &OnboardingConfig,
        as_of: NaiveDate,
    ) -> Result<AnchoredSummary, EngineError> {
        let request = SummaryRequest { record_id: record.record_id.clone(), activate: true, config: config.clone() };
        let bundle = retrieve(record, RetrievalRequest::Summary(&request), config, as_of)?;
        let prompt = build_summary_prompt(&bundle, config)?;
        let ctx = ValidationContext::from_bundle(&bundle);
        let validated = self.gateway.complete_validated(&prompt, &prompt.params, |raw| validate_summary(raw, config, &ctx))?;
        let document = validated.value;
        let sections = document
            .sections
            .iter()
            .map(|s| {
                Ok(AnchoredSection {
                    header: s.header.clone(),
                    text: anchor_body(&s.body, s.header.as_deref(), &bundle, record)?,
                })
            })
            .collect::<Result<Vec<_>, ProvenanceError>>()?;
        Ok(AnchoredSummary {
            record_id: record.record_id.clone(),
            level: config.summary_level,
            document,
            sections,
            generated_at: Utc::now(),
            attempts: validated.attempts,
            window: bundle.windows.first().map(|w| w.window),
        })
    }

    fn persist(&self, summary: &AnchoredSummary) -> Result<(), RecordError> {
        self.store.put_document(SUMMARY_NAMESPACE, &summary.record_id, summary)
    }

    /// The most recently generated summary for a record, if any.
    pub fn latest(&self, record_id: &str) -> Result<Option<AnchoredSummary>, RecordError> {
        self.store.get_document(SUMMARY_NAMESPACE, record_id)
    }
}
