//! The chat path: classify, retrieve, prompt, complete, validate, anchor.
//!
//! Each question is answered from a fresh retrieval; no conversation state
//! is kept between questions.

use std::sync::Arc;

use chrono::{NaiveDate, Utc};
use serde::{Deserialize, Serialize};

use crate::dashboard::OnboardingConfig;
use crate::gateway::{validate_chat, ChatAnswer, Gateway, ValidationContext};
use crate::pipeline::{
    build_chat_prompt, question_tokens, retrieve, ChatRequest, RetrievalRequest, ScopedWindow,
};
use crate::provenance::{attach_anchors, AnchoredText, ProvenanceAnchor};
use crate::record::{RecordError, RecordStore};
use crate::summary::EngineError;

pub use crate::pipeline::{explain_routing, RoutingExplanation};

pub const ANSWER_NAMESPACE: &str = "answers";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnchoredChatAnswer {
    pub record_id: String,
    pub question: String,
    pub answer: ChatAnswer,
    pub text: AnchoredText,
    pub classification: RoutingExplanation,
    pub windows: Vec<ScopedWindow>,
    /// Provider calls made, zero for short-circuited answers.
    pub attempts: u32,
}

impl AnchoredChatAnswer {
    pub fn anchors(&self) -> &[ProvenanceAnchor] {
        &self.text.anchors
    }
}

/// Whether the question asks specifically about the configured focus.
pub fn is_focus_restricted(question: &str) -> bool {
    let tokens = question_tokens(question);
    tokens.windows(2).any(|w| w[0] == "focus" && (w[1] == "area" || w[1] == "areas"))
}

pub struct ChatEngine {
    store: Arc<RecordStore>,
    gateway: Arc<Gateway>,
    as_of: Option<NaiveDate>,
}

impl ChatEngine {
    pub fn new(store: Arc<RecordStore>, gateway: Arc<Gateway>) -> Self {
        Self { store, gateway, as_of: None }
    }

    pub fn with_as_of(mut self, as_of: NaiveDate) -> Self {
        self.as_of = Some(as_of);
        self
    }

    pub fn gateway(&self) -> &Gateway {
        &self.gateway
    }

    pub fn answer(&self, record_id: &str, question: &str, config: &OnboardingConfig) -> Result<AnchoredChatAnswer, EngineError> {
        let record = self.store.snapshot(record_id)?;
        config.validate()?;
        let request = ChatRequest::classified(question)?;
        let classification = explain_routing(question);
        let as_of = self.as_of.unwrap_or_else(|| Utc::now().date_naive());
        let bundle = retrieve(&record, RetrievalRequest::Chat(&request), config, as_of)?;
        let short = |answer: ChatAnswer| AnchoredChatAnswer {
            record_id: record_id.to_string(),
            question: question.to_string(),
            text: AnchoredText::plain(answer.render()),
            answer,
            classification: classification.clone(),
            windows: bundle.windows.clone(),
            attempts: 0,
        };

        let result = if !bundle.has_evidence() {
            short(ChatAnswer::insufficient(request.question_category))
        } else if is_focus_restricted(question) && bundle.focus_matched.is_empty() {
            short(ChatAnswer::no_focus_data(request.question_category))
        } else {
            let prompt = build_chat_prompt(&bundle, &request, config)?;
            let ctx = ValidationContext::from_bundle(&bundle);
            let validated =
                self.gateway.complete_validated(&prompt, &prompt.params, |raw| validate_chat(raw, &request, config, &ctx))?;
            let text = attach_anchors(&validated.value.render(), record_id, &bundle.source_refs(&record))?;
            AnchoredChatAnswer {
                record_id: record_id.to_string(),
                question: question.to_string(),
                answer: validated.value,
                text,
                classification,
                windows: bundle.windows.clone(),
                attempts: validated.attempts,
            }
        };
        self.store.put_document(ANSWER_NAMESPACE, record_id, &result)?;
        Ok(result)
    }

    /// The most recent answer for a record, if any.
    pub fn latest(&self, record_id: &str) -> Result<Option<AnchoredChatAnswer>, RecordError> {
        self.store.get_document(ANSWER_NAMESPACE, record_id)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dashboard::{ChatAbility, FocusArea};
    use crate::fixtures;
    use crate::gateway::{INSUFFICIENT_DATA, NO_FOCUS_DATA};
    use crate::pipeline::{QuestionCategory, QuestionScope, DISCLAIMER, RAW_DATA_TITLE};
    use crate::provenance::audit_document;
    use crate::record::ClientRecord;
    use std::collections::BTreeSet;

    fn engine() -> ChatEngine {
        let store = Arc::new(RecordStore::in_memory());
        store.create(fixtures::elias()).unwrap();
        let mut bare = ClientRecord::empty("bare", "Bare");
        bare.reading_materials.finished.clear();
        store.create(bare).unwrap();
        ChatEngine::new(store, Arc::new(Gateway::mock())).with_as_of("2026-01-01".parse().unwrap())
    }

    #[test]
    fn biometric_question_without_biometrics_is_insufficient() {
        let engine = engine();
        let out = engine.answer("bare", "How has her sleep been?", &OnboardingConfig::default()).unwrap();
        assert!(out.answer.insufficient);
        assert_eq!(out.text.body, INSUFFICIENT_DATA);
        assert_eq!(engine.gateway().call_count(), 0);
    }

    #[test]
    fn suggestion_starts_with_disclaimer_and_anchors_each_bullet() {
        let engine = engine();
        let out = engine.answer("elias", "What should I try next?", &OnboardingConfig::default()).unwrap();
        assert_eq!(out.classification.category, QuestionCategory::Suggestion);
        assert_eq!(out.text.body.lines().next().unwrap(), DISCLAIMER);
        assert!(out.answer.bullet_count() < 6);
        for line in out.text.body.lines().skip(1) {
            assert!(line.contains("[[entry:"), "{line}");
        }
        assert!(audit_document(&out.text, &engine.store).is_clean());
        assert_eq!(engine.gateway().call_count(), 1);
    }

    #[test]
    fn comparative_question_lists_raw_thought_records() {
        let engine = engine();
        let config = OnboardingConfig {
            ai_chat_abilities: BTreeSet::from([ChatAbility::RawDataExtraction]),
            ..Default::default()
        };
        let out = engine.answer("elias", "Has this concern come up before?", &config).unwrap();
        assert_eq!(out.classification.scope, QuestionScope::Comparative);
        let raw = out.answer.raw_data_block.as_ref().unwrap();
        assert!(raw.iter().any(|l| l.contains("thought_record: situation:")));
        assert!(out.text.body.starts_with(RAW_DATA_TITLE));
    }

    #[test]
    fn focus_query_without_focus_evidence() {
        let engine = engine();
        let config = OnboardingConfig {
            focus_areas: BTreeSet::from([FocusArea::ExposureTherapy]),
            ..Default::default()
        };
        let out = engine.answer("elias", "What happened in my focus areas?", &config).unwrap();
        assert_eq!(out.text.body, NO_FOCUS_DATA);
        assert_eq!(engine.gateway().call_count(), 0);
    }

    #[test]
    fn empty_question_rejected() {
        assert!(matches!(
            engine().answer("elias", "   ", &OnboardingConfig::default()),
            Err(EngineError::Pipeline(crate::pipeline::PipelineError::EmptyQuestion))
        ));
    }
}
