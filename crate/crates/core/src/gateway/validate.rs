//! Structural validators for raw model output.
//!
//! Validators never repair. Each returns either the parsed document or the
//! full list of violations found, so a caller can show them or retry.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dashboard::{ChatAbility, OnboardingConfig, SummaryLevel};
use crate::pipeline::{
    ChatRequest, ContextBundle, QuestionCategory, DISCLAIMER, EXPLANATION_TITLE, OTHER_OBSERVATIONS, RAW_DATA_TITLE,
    SUMMARY_HEADERS,
};
use crate::provenance::{cited_ids, CITATION_CLOSE, CITATION_OPEN, TOKEN_CLOSE, TOKEN_OPEN};

pub const NO_SUMMARY_TEXT: &str = "No AI summary is needed.";
pub const INSUFFICIENT_DATA: &str = "Insufficient data";
pub const NO_FOCUS_DATA: &str = "No data related to focus areas";
pub const CONFLICT_STEM: &str = "Conflicting entries observed:";
pub const MAX_SUGGESTION_BULLETS: usize = 5;

/// Unhedged diagnostic phrasing rejected in risk answers and summaries,
/// matched case-insensitively. A heuristic, not a clinical filter.
pub const DIAGNOSTIC_BLOCKLIST: &[&str] = &[
    "diagnosed",
    "diagnosis",
    "diagnose",
    "is depressed",
    "has depression",
    "clinically depressed",
    "suffers from",
    "disorder",
    "is suicidal",
    "is bipolar",
    "has ptsd",
    "has ocd",
    "meets criteria",
    "psychotic",
];

/// Context labels that mark a verbatim copy of prompt data.
const CONTEXT_LABELS: &[&str] = &[
    "reading_materials:",
    "biometric_aggregates:",
    "biometric_sources:",
    "biometric_days:",
    "homework_data:",
    "journal_entries:",
    "emotion_logs:",
    "activity_logs:",
    "assessments:",
    "homework_submitted:",
];

const SMALL_WORDS: &[&str] = &["&", "and", "of", "for", "from", "the", "to", "in", "on", "with", "a", "an", "or"];
const ABBREVIATIONS: &[&str] = &["e.g", "i.e", "vs", "dr", "mr", "mrs", "ms", "approx", "cf", "al"];

#[derive(Debug, Clone, Error, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "code", rename_all = "snake_case")]
pub enum Violation {
    #[error("output is empty")]
    EmptyOutput,
    #[error("expected exactly \"{NO_SUMMARY_TEXT}\", found {found:?}")]
    NotNoSummaryLiteral { found: String },
    #[error("missing section \"{header}\"")]
    MissingSection { header: String },
    #[error("section \"{header}\" appears more than once")]
    DuplicateSection { header: String },
    #[error("section \"{header}\" appears after \"{after}\"")]
    OutOfOrder { header: String, after: String },
    #[error("unknown heading {line:?}")]
    UnknownHeading { line: String },
    #[error("markdown heading {line:?}")]
    MarkdownHeading { line: String },
    #[error("markdown formatting in {line:?}")]
    MarkdownFormatting { line: String },
    #[error("table row {line:?}")]
    TableDetected { line: String },
    #[error("raw data copied into output: {line:?}")]
    RawDataDump { line: String },
    #[error("section \"{header}\" is empty; use \"No data\"")]
    EmptySection { header: String },
    #[error("text before the first section header: {line:?}")]
    ContentBeforeFirstSection { line: String },
    #[error("Overall Summary has {sentences} sentences, expected 1 or 2")]
    OverallSummaryLength { sentences: usize },
    #[error("\"{OTHER_OBSERVATIONS}\" must sit between Risk Alerts for Emotional Distress and Overall Summary")]
    OtherObservationsMisplaced,
    #[error("heading {line:?} in a single-paragraph overview")]
    HeadingInParagraph { line: String },
    #[error("overview has {paragraphs} paragraphs, expected 1")]
    MultipleParagraphs { paragraphs: usize },
    #[error("unhedged diagnostic term \"{term}\"")]
    DiagnosticLanguage { term: String },
    #[error("citation [ref:{id}] matches no retrieved entry")]
    UnmatchedCitation { id: String },
    #[error("first line must be the disclaimer, found {first_line:?}")]
    MissingDisclaimer { first_line: String },
    #[error("bullet count {count} ≥ 6")]
    TooManyBullets { count: usize },
    #[error("bullet without a citation: {line:?}")]
    UncitedBullet { line: String },
    #[error("\"{RAW_DATA_TITLE}\" block present without the raw-data preference and evidence")]
    RawDataBlockNotAllowed,
    #[error("\"{RAW_DATA_TITLE}\" block required by the raw-data preference is missing")]
    RawDataBlockMissing,
    #[error("\"{RAW_DATA_TITLE}\" block is not closed by \"{EXPLANATION_TITLE}\"")]
    MissingExplanationHeader,
    #[error("answer line is not a bullet: {line:?}")]
    NonBulletLine { line: String },
    #[error("answer has no body")]
    EmptyAnswer,
}

impl Violation {
    /// Stable snake-case code of the violation.
    pub fn code(&self) -> String {
        serde_json::to_value(self)
            .ok()
            .and_then(|v| v.get("code").and_then(|c| c.as_str()).map(str::to_string))
            .unwrap_or_default()
    }
}

/// What the validators need to know about the retrieval behind a prompt.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ValidationContext {
    pub source_ids: BTreeSet<String>,
    pub has_evidence: bool,
}

impl ValidationContext {
    pub fn new(source_ids: impl IntoIterator<Item = String>) -> Self {
        let source_ids: BTreeSet<String> = source_ids.into_iter().collect();
        Self { has_evidence: !source_ids.is_empty(), source_ids }
    }

    pub fn from_bundle(bundle: &ContextBundle) -> Self {
        Self::new(bundle.source_entries.iter().cloned())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SummarySection {
    /// `None` for the single paragraph of an overview or the no-summary text.
    pub header: Option<String>,
    pub body: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SummaryDocument {
    pub level: SummaryLevel,
    pub sections: Vec<SummarySection>,
}

impl SummaryDocument {
    pub fn no_summary() -> Self {
        Self {
            level: SummaryLevel::NoAiSummary,
            sections: vec![SummarySection { header: None, body: NO_SUMMARY_TEXT.to_string() }],
        }
    }

    pub fn headers(&self) -> Vec<&str> {
        self.sections.iter().filter_map(|s| s.header.as_deref()).collect()
    }

    pub fn render(&self) -> String {
        self.sections
            .iter()
            .map(|s| match &s.header {
                Some(h) => format!("{h}\n{}", s.body),
                None => s.body.clone(),
            })
            .collect::<Vec<_>>()
            .join("\n\n")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatAnswer {
    pub category: QuestionCategory,
    pub insufficient: bool,
    pub disclaimer: Option<String>,
    pub raw_data_block: Option<Vec<String>>,
    pub body: Vec<String>,
}

impl ChatAnswer {
    pub fn insufficient(category: QuestionCategory) -> Self {
        Self { category, insufficient: true, disclaimer: None, raw_data_block: None, body: vec![INSUFFICIENT_DATA.into()] }
    }

    pub fn no_focus_data(category: QuestionCategory) -> Self {
        Self { category, insufficient: false, disclaimer: None, raw_data_block: None, body: vec![NO_FOCUS_DATA.into()] }
    }

    pub fn bullet_count(&self) -> usize {
        self.body.iter().filter(|l| bullet_text(l).is_some()).count()
    }

    pub fn render(&self) -> String {
        let mut lines: Vec<String> = Vec::new();
        lines.extend(self.disclaimer.clone());
        if let Some(raw) = &self.raw_data_block {
            lines.push(RAW_DATA_TITLE.to_string());
            lines.extend(raw.iter().cloned());
            lines.push(EXPLANATION_TITLE.to_string());
        }
        lines.extend(self.body.iter().cloned());
        lines.join("\n")
    }
}

pub(crate) fn bullet_text(line: &str) -> Option<&str> {
    let t = line.trim_start();
    ["- ", "• ", "* "].iter().find_map(|b| t.strip_prefix(b))
}

fn strip_markers(text: &str) -> String {
    let mut out = text.to_string();
    for (open, close) in [(TOKEN_OPEN, TOKEN_CLOSE), (CITATION_OPEN, CITATION_CLOSE)] {
        while let Some(start) = out.find(open) {
            match out[start..].find(close) {
                Some(len) => out.replace_range(start..start + len + close.len(), ""),
                None => break,
            }
        }
    }
    out
}

/// Sentence count by terminator (`.`, `!`, `?`) followed by whitespace or
/// end of text. Abbreviations and decimals do not end sentences.
pub fn count_sentences(text: &str) -> usize {
    let text = strip_markers(text);
    let chars: Vec<char> = text.chars().collect();
    let mut count = 0;
    let mut pending = false;
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if matches!(c, '.' | '!' | '?') {
            let mut j = i;
            while j + 1 < chars.len() && matches!(chars[j + 1], '.' | '!' | '?' | '"' | '\'' | ')' | '’' | '”') {
                j += 1;
            }
            let at_break = j + 1 == chars.len() || chars[j + 1].is_whitespace();
            let word: String = chars[..i]
                .iter()
                .rev()
                .take_while(|c| !c.is_whitespace())
                .collect::<Vec<_>>()
                .into_iter()
                .rev()
                .collect::<String>()
                .trim_start_matches(['(', '"', '\''])
                .to_lowercase();
            let abbreviation = c == '.' && ABBREVIATIONS.contains(&word.as_str());
            if at_break && pending && !abbreviation {
                count += 1;
                pending = false;
            }
            i = j + 1;
            continue;
        }
        if c.is_alphanumeric() {
            pending = true;
        }
        i += 1;
    }
    count + usize::from(pending)
}

fn known_header(candidate: &str) -> Option<&'static str> {
    SUMMARY_HEADERS
        .iter()
        .copied()
        .find(|h| *h == candidate)
        .or_else(|| candidate.eq_ignore_ascii_case(OTHER_OBSERVATIONS).then_some(OTHER_OBSERVATIONS))
}

/// Short title-case line without terminal punctuation.
fn looks_like_heading(line: &str) -> bool {
    let t = line.trim().trim_end_matches(':');
    if t.contains('[') || bullet_text(line).is_some() || t.ends_with(['.', '!', '?', ';', ',']) {
        return false;
    }
    let words: Vec<&str> = t.split_whitespace().collect();
    if words.len() < 2 || words.len() > 7 {
        return false;
    }
    let capital = |w: &str| w.chars().next().is_some_and(|c| c.is_uppercase());
    capital(words[0]) && words.iter().all(|w| capital(w) || SMALL_WORDS.contains(&w.to_lowercase().as_str()))
}

/// Header match for a line, tolerating a trailing colon and bold or `#`
/// decoration. The decoration itself is reported separately.
fn header_of(line: &str) -> Option<&'static str> {
    let t = line.trim().trim_start_matches('#').trim().trim_matches('*').trim().trim_end_matches(':').trim();
    known_header(t)
}

fn is_table_line(line: &str) -> bool {
    let t = line.trim();
    let separator = !t.is_empty() && t.contains("---") && t.chars().all(|c| matches!(c, '|' | '-' | ':' | ' ' | '+'));
    t.matches('|').count() >= 2 || (separator && t.contains('|'))
}

fn is_raw_dump(line: &str) -> bool {
    let t = line.trim();
    let t = bullet_text(t).unwrap_or(t);
    let opens_structure = (t.starts_with('{') || t.starts_with('['))
        && !t.starts_with(CITATION_OPEN)
        && !t.starts_with(TOKEN_OPEN)
        && !t.starts_with("[Disclaimer]");
    opens_structure || CONTEXT_LABELS.iter().any(|l| t.contains(l)) || t.contains("\":")
}

fn markdown_violation(line: &str) -> Option<Violation> {
    let t = line.trim_start();
    if t.starts_with('#') {
        Some(Violation::MarkdownHeading { line: line.to_string() })
    } else if t.contains("**") || t.contains("__") || t.starts_with("```") || t.starts_with("> ") {
        Some(Violation::MarkdownFormatting { line: line.to_string() })
    } else {
        None
    }
}

/// Violations that apply to any prose line of any output.
fn line_violations(line: &str, out: &mut Vec<Violation>) {
    if let Some(v) = markdown_violation(line) {
        out.push(v);
    }
    if is_table_line(line) {
        out.push(Violation::TableDetected { line: line.to_string() });
    } else if is_raw_dump(line) {
        out.push(Violation::RawDataDump { line: line.to_string() });
    }
}

fn citation_violations(raw: &str, ctx: &ValidationContext, out: &mut Vec<Violation>) {
    let mut seen = BTreeSet::new();
    for id in cited_ids(raw) {
        if !ctx.source_ids.contains(&id) && seen.insert(id.clone()) {
            out.push(Violation::UnmatchedCitation { id });
        }
    }
}

fn diagnostic_violations(text: &str, out: &mut Vec<Violation>) {
    let lower = text.to_lowercase();
    for term in DIAGNOSTIC_BLOCKLIST.iter().filter(|t| lower.contains(*t)) {
        out.push(Violation::DiagnosticLanguage { term: term.to_string() });
    }
}

/// Parses raw summary text for the configured level.
pub fn validate_summary(
    raw: &str,
    config: &OnboardingConfig,
    ctx: &ValidationContext,
) -> Result<SummaryDocument, Vec<Violation>> {
    let text = raw.trim();
    if config.summary_level == SummaryLevel::NoAiSummary {
        return if text == NO_SUMMARY_TEXT {
            Ok(SummaryDocument::no_summary())
        } else {
            Err(vec![Violation::NotNoSummaryLiteral { found: text.to_string() }])
        };
    }
    if text.is_empty() {
        return Err(vec![Violation::EmptyOutput]);
    }
    let mut violations = Vec::new();
    citation_violations(text, ctx, &mut violations);
    diagnostic_violations(text, &mut violations);
    let doc = match config.summary_level {
        SummaryLevel::BasicOverview => validate_basic(text, &mut violations),
        _ => validate_detailed(text, &mut violations),
    };
    if violations.is_empty() {
        Ok(doc)
    } else {
        Err(violations)
    }
}

fn validate_basic(text: &str, violations: &mut Vec<Violation>) -> SummaryDocument {
    let paragraphs = text.split("\n\n").filter(|p| !p.trim().is_empty()).count();
    if paragraphs > 1 {
        violations.push(Violation::MultipleParagraphs { paragraphs });
    }
    for line in text.lines().filter(|l| !l.trim().is_empty()) {
        if header_of(line).is_some() || looks_like_heading(line) {
            violations.push(Violation::HeadingInParagraph { line: line.to_string() });
        }
        line_violations(line, violations);
    }
    SummaryDocument {
        level: SummaryLevel::BasicOverview,
        sections: vec![SummarySection { header: None, body: text.to_string() }],
    }
}

fn validate_detailed(text: &str, violations: &mut Vec<Violation>) -> SummaryDocument {
    let mut sections: Vec<(&'static str, Vec<&str>)> = Vec::new();
    let mut preamble_reported = false;
    for line in text.lines() {
        if line.trim().is_empty() {
            if let Some((_, body)) = sections.last_mut() {
                body.push(line);
            }
            continue;
        }
        if let Some(header) = header_of(line) {
            if let Some(v) = markdown_violation(line) {
                violations.push(v);
            }
            sections.push((header, Vec::new()));
            continue;
        }
        if looks_like_heading(line) {
            violations.push(Violation::UnknownHeading { line: line.to_string() });
        }
        line_violations(line, violations);
        match sections.last_mut() {
            Some((_, body)) => body.push(line),
            None if !preamble_reported => {
                preamble_reported = true;
                violations.push(Violation::ContentBeforeFirstSection { line: line.to_string() });
            }
            None => {}
        }
    }

    let mut first_index: BTreeMap<&str, usize> = BTreeMap::new();
    for (i, (header, _)) in sections.iter().enumerate() {
        if first_index.contains_key(header) {
            violations.push(Violation::DuplicateSection { header: header.to_string() });
        } else {
            first_index.insert(header, i);
        }
    }
    for header in SUMMARY_HEADERS {
        if !first_index.contains_key(header) {
            violations.push(Violation::MissingSection { header: header.to_string() });
        }
    }
    let rank = |h: &str| SUMMARY_HEADERS.iter().position(|x| *x == h);
    let mut ordered: Vec<(usize, &str)> = first_index
        .iter()
        .filter_map(|(h, i)| rank(h).map(|_| (*i, *h)))
        .collect();
    ordered.sort();
    for (pos, (_, header)) in ordered.iter().enumerate() {
        let r = rank(header).expect("ranked");
        if let Some((_, earlier)) = ordered[..pos].iter().find(|(_, e)| rank(e).expect("ranked") > r) {
            violations.push(Violation::OutOfOrder { header: header.to_string(), after: earlier.to_string() });
        }
    }
    if let Some(&other) = first_index.get(OTHER_OBSERVATIONS) {
        let after_risk = first_index.get(SUMMARY_HEADERS[5]).is_some_and(|&r| r < other);
        let before_overall = first_index.get(SUMMARY_HEADERS[6]).is_some_and(|&o| other < o);
        if !(after_risk && before_overall) {
            violations.push(Violation::OtherObservationsMisplaced);
        }
    }

    let mut out = Vec::new();
    let mut emitted = BTreeSet::new();
    for (header, body) in &sections {
        let body = body.join("\n").trim().to_string();
        if body.is_empty() {
            violations.push(Violation::EmptySection { header: header.to_string() });
        }
        if *header == SUMMARY_HEADERS[6] && !body.is_empty() {
            let sentences = count_sentences(&body);
            if !(1..=2).contains(&sentences) {
                violations.push(Violation::OverallSummaryLength { sentences });
            }
        }
        if emitted.insert(*header) {
            out.push(SummarySection { header: Some(header.to_string()), body });
        }
    }
    SummaryDocument { level: SummaryLevel::DetailedAnalysis, sections: out }
}

/// Parses a raw chat answer for `request` under `config`.
pub fn validate_chat(
    raw: &str,
    request: &ChatRequest,
    config: &OnboardingConfig,
    ctx: &ValidationContext,
) -> Result<ChatAnswer, Vec<Violation>> {
    let category = request.question_category;
    let text = raw.trim();
    if text.is_empty() {
        return Err(vec![Violation::EmptyOutput]);
    }
    if text == INSUFFICIENT_DATA {
        return Ok(ChatAnswer::insufficient(category));
    }
    let mut violations = Vec::new();
    citation_violations(text, ctx, &mut violations);

    let lines: Vec<&str> = text.lines().map(str::trim_end).collect();
    let mut at = 0;
    let mut disclaimer = None;
    if category == QuestionCategory::Suggestion {
        if lines[0] == DISCLAIMER {
            disclaimer = Some(DISCLAIMER.to_string());
            at = 1;
        } else {
            violations.push(Violation::MissingDisclaimer { first_line: lines[0].to_string() });
        }
    }
    while at < lines.len() && lines[at].trim().is_empty() {
        at += 1;
    }

    let raw_expected = config.has_ability(ChatAbility::RawDataExtraction) && ctx.has_evidence;
    let mut raw_block = None;
    if lines.get(at).map(|l| l.trim()) == Some(RAW_DATA_TITLE) {
        if !raw_expected {
            violations.push(Violation::RawDataBlockNotAllowed);
        }
        at += 1;
        let mut block = Vec::new();
        while at < lines.len() && lines[at].trim() != EXPLANATION_TITLE {
            if !lines[at].trim().is_empty() {
                block.push(lines[at].to_string());
            }
            at += 1;
        }
        if at == lines.len() {
            violations.push(Violation::MissingExplanationHeader);
        } else {
            at += 1;
        }
        raw_block = Some(block);
    } else {
        if raw_expected {
            violations.push(Violation::RawDataBlockMissing);
        }
        if lines.get(at).map(|l| l.trim()) == Some(EXPLANATION_TITLE) {
            at += 1;
        }
    }

    let body: Vec<String> =
        lines[at.min(lines.len())..].iter().filter(|l| !l.trim().is_empty()).map(|l| l.to_string()).collect();
    if body.is_empty() {
        violations.push(Violation::EmptyAnswer);
    }
    let mut bullets = 0;
    for line in &body {
        let t = line.trim();
        match bullet_text(line) {
            Some(content) => {
                bullets += 1;
                if category == QuestionCategory::Suggestion && cited_ids(content).is_empty() {
                    violations.push(Violation::UncitedBullet { line: line.clone() });
                }
            }
            None if t == NO_FOCUS_DATA || t.starts_with(CONFLICT_STEM) => {}
            None => violations.push(Violation::NonBulletLine { line: line.clone() }),
        }
        line_violations(line, &mut violations);
    }
    if let Some(block) = &raw_block {
        for line in block {
            if let Some(v) = markdown_violation(line) {
                violations.push(v);
            }
        }
    }
    if category == QuestionCategory::Suggestion && bullets > MAX_SUGGESTION_BULLETS {
        violations.push(Violation::TooManyBullets { count: bullets });
    }
    if category == QuestionCategory::Risk {
        diagnostic_violations(&body.join("\n"), &mut violations);
    }

    if violations.is_empty() {
        Ok(ChatAnswer { category, insufficient: false, disclaimer, raw_data_block: raw_block, body })
    } else {
        Err(violations)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pipeline::QuestionScope;

    fn detailed() -> OnboardingConfig {
        OnboardingConfig { summary_level: SummaryLevel::DetailedAnalysis, ..Default::default() }
    }

    fn ctx() -> ValidationContext {
        ValidationContext::new(["a".to_string(), "b".to_string()])
    }

    fn conforming() -> String {
        SUMMARY_HEADERS
            .iter()
            .enumerate()
            .map(|(i, h)| if i == 6 { format!("{h}\nSteady engagement overall [ref:a].") } else { format!("{h}\nNo data") })
            .collect::<Vec<_>>()
            .join("\n\n")
    }

    fn codes(r: Result<impl std::fmt::Debug, Vec<Violation>>) -> Vec<String> {
        r.unwrap_err().iter().map(Violation::code).collect()
    }

    #[test]
    fn conforming_detailed_parses() {
        let doc = validate_summary(&conforming(), &detailed(), &ctx()).unwrap();
        assert_eq!(doc.headers(), SUMMARY_HEADERS.to_vec());
        assert_eq!(doc.sections[0].body, "No data");
    }

    #[test]
    fn swap_names_both_headers() {
        let raw = conforming()
            .replace("Mental Health Patterns", "@@")
            .replace("Biometric Trends from Apple Health", "Mental Health Patterns")
            .replace("@@", "Biometric Trends from Apple Health");
        let v = validate_summary(&raw, &detailed(), &ctx()).unwrap_err();
        assert!(v.contains(&Violation::OutOfOrder {
            header: "Mental Health Patterns".into(),
            after: "Biometric Trends from Apple Health".into()
        }));
    }

    #[test]
    fn drop_duplicate_table_each_named() {
        let dropped = conforming().replace("Reading Materials\nNo data\n\n", "");
        assert_eq!(codes(validate_summary(&dropped, &detailed(), &ctx())), vec!["missing_section"]);
        let dup = format!("{}\n\nOverall Summary\nAgain [ref:b].", conforming());
        assert_eq!(codes(validate_summary(&dup, &detailed(), &ctx())), vec!["duplicate_section"]);
        let table = conforming().replace("Mental Health Patterns\nNo data", "Mental Health Patterns\n| a | b |\n|---|---|");
        assert!(codes(validate_summary(&table, &detailed(), &ctx())).contains(&"table_detected".to_string()));
    }

    #[test]
    fn overall_summary_sentences() {
        assert_eq!(count_sentences("One. Two! Three?"), 3);
        assert_eq!(count_sentences("Sleep averaged 7.5 hours, e.g. on weekdays [ref:a]."), 1);
        assert_eq!(count_sentences("No terminator"), 1);
        let long = conforming().replace("Steady engagement overall [ref:a].", "One. Two. Three.");
        assert_eq!(
            validate_summary(&long, &detailed(), &ctx()).unwrap_err(),
            vec![Violation::OverallSummaryLength { sentences: 3 }]
        );
    }

    #[test]
    fn other_observations_only_before_overall() {
        let ok = conforming().replace("Overall Summary", "Other Observations\nActivity logs steady [ref:b].\n\nOverall Summary");
        validate_summary(&ok, &detailed(), &ctx()).unwrap();
        let bad = format!("Other Observations\nx [ref:b].\n\n{}", conforming());
        assert!(validate_summary(&bad, &detailed(), &ctx()).unwrap_err().contains(&Violation::OtherObservationsMisplaced));
    }

    #[test]
    fn no_summary_literal_exact() {
        let config = OnboardingConfig { summary_level: SummaryLevel::NoAiSummary, ..Default::default() };
        validate_summary("No AI summary is needed.", &config, &ctx()).unwrap();
        assert!(validate_summary("No AI summary is needed", &config, &ctx()).is_err());
    }

    #[test]
    fn basic_rejects_headings_and_paragraphs() {
        let config = OnboardingConfig { summary_level: SummaryLevel::BasicOverview, ..Default::default() };
        validate_summary("Reading is done and homework is steady [ref:a].", &config, &ctx()).unwrap();
        let v = codes(validate_summary("Reading Materials\nDone.\n\nMore.", &config, &ctx()));
        assert!(v.contains(&"heading_in_paragraph".to_string()));
        assert!(v.contains(&"multiple_paragraphs".to_string()));
    }

    fn request(category: QuestionCategory) -> ChatRequest {
        ChatRequest { question: "q".into(), question_category: category, question_scope: QuestionScope::Recent }
    }

    fn suggestion(bullets: usize) -> String {
        let mut lines = vec![DISCLAIMER.to_string()];
        lines.extend((0..bullets).map(|i| format!("- Step {i} [ref:a]")));
        lines.join("\n")
    }

    #[test]
    fn suggestion_bullet_cap() {
        let req = request(QuestionCategory::Suggestion);
        let config = OnboardingConfig::default();
        assert_eq!(validate_chat(&suggestion(5), &req, &config, &ctx()).unwrap().bullet_count(), 5);
        let v = validate_chat(&suggestion(7), &req, &config, &ctx()).unwrap_err();
        assert_eq!(v, vec![Violation::TooManyBullets { count: 7 }]);
        assert_eq!(v[0].to_string(), "bullet count 7 ≥ 6");
    }

    #[test]
    fn raw_block_follows_preference() {
        let req = request(QuestionCategory::General);
        let raw = format!("{RAW_DATA_TITLE}\n- 2025-03-04 entry [ref:a]\n{EXPLANATION_TITLE}\n- Answer [ref:a]");
        let off = OnboardingConfig::default();
        assert_eq!(validate_chat(&raw, &req, &off, &ctx()).unwrap_err(), vec![Violation::RawDataBlockNotAllowed]);
        let on = OnboardingConfig {
            ai_chat_abilities: BTreeSet::from([ChatAbility::RawDataExtraction]),
            ..Default::default()
        };
        let answer = validate_chat(&raw, &req, &on, &ctx()).unwrap();
        assert_eq!(answer.raw_data_block.unwrap().len(), 1);
        assert_eq!(validate_chat("- Answer [ref:a]", &req, &on, &ctx()).unwrap_err(), vec![Violation::RawDataBlockMissing]);
    }

    #[test]
    fn insufficient_is_exact() {
        let req = request(QuestionCategory::Biometric);
        let empty = ValidationContext::default();
        assert!(validate_chat("Insufficient data", &req, &OnboardingConfig::default(), &empty).unwrap().insufficient);
        assert!(validate_chat("Insufficient data.", &req, &OnboardingConfig::default(), &empty).is_err());
    }

    #[test]
    fn risk_blocklist_and_citations() {
        let req = request(QuestionCategory::Risk);
        let config = OnboardingConfig::default();
        validate_chat("- Possible signals include low mood [ref:a]", &req, &config, &ctx()).unwrap();
        let v = validate_chat("- Client is depressed [ref:zz]", &req, &config, &ctx()).unwrap_err();
        assert!(v.contains(&Violation::DiagnosticLanguage { term: "is depressed".into() }));
        assert!(v.contains(&Violation::UnmatchedCitation { id: "zz".into() }));
    }
}
