//! Request classification, scoped context retrieval and prompt assembly.
//!
//! Every function here is pure: the same record, request, config and
//! reference date always produce byte-identical bundles and prompts.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use chrono::{Datelike, NaiveDate};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analytics::{assessment_severity, biometric_aggregate, iso_week_start, DateWindow, TotalBand, NO_DATA};
use crate::dashboard::{ChatAbility, ConfigError, HomeworkFrequency, OnboardingConfig, SummaryLevel};
use crate::gateway::InferenceParams;
use crate::provenance::citation;
use crate::record::{
    ActivityBlock, ClientRecord, EntryKind, EntryRef, HomeworkSubmission, SubmissionBody, READING_MATERIALS_ID,
};

pub const RECENT_WINDOW_DAYS: u32 = 7;
pub const SUMMARY_WINDOW_DAYS: u32 = 28;
pub const MAX_BUNDLE_ENTRIES: usize = 200;

pub const DISCLAIMER: &str =
    "[Disclaimer] AI-generated suggestions may be incomplete or contain errors. Review raw client data before acting.";
pub const RAW_DATA_TITLE: &str = "Relevant Raw Data";
pub const EXPLANATION_TITLE: &str = "AI-Generated Explanation";

pub const SUMMARY_SYSTEM_TEMPLATE: &str = include_str!("../templates/summary_system.v1.txt");
pub const CHAT_SYSTEM_TEMPLATE: &str = include_str!("../templates/chat_system.v1.txt");

pub const TASK_MARKER: &str = "=== TASK ===";
pub const CONTEXT_MARKER: &str = "=== CONTEXT ===";
pub const QUERY_MARKER: &str = "=== QUERY ===";
pub const PARAMETERS_MARKER: &str = "--- parameters ---";
pub const CLIENT_DATA_MARKER: &str = "--- client data ---";

/// Detailed-summary headers in their required order.
pub const SUMMARY_HEADERS: [&str; 7] = [
    "Reading Materials",
    "Homework Completion Trends",
    "Mental Health Patterns",
    "Journaling & Thought Records",
    "Biometric Trends from Apple Health",
    "Risk Alerts for Emotional Distress",
    "Overall Summary",
];
pub const OTHER_OBSERVATIONS: &str = "Other Observations";

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PipelineError {
    #[error("question is empty")]
    EmptyQuestion,
    #[error("summary level is No AI Summary; no prompt is built")]
    SummaryDisabled,
    #[error(transparent)]
    Config(#[from] ConfigError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuestionCategory {
    Journaling,
    Homework,
    Biometric,
    Risk,
    Suggestion,
    General,
}

impl QuestionCategory {
    pub const ALL: [QuestionCategory; 6] = [
        QuestionCategory::Journaling,
        QuestionCategory::Homework,
        QuestionCategory::Biometric,
        QuestionCategory::Risk,
        QuestionCategory::Suggestion,
        QuestionCategory::General,
    ];

    pub fn label(self) -> &'static str {
        match self {
            QuestionCategory::Journaling => "journaling",
            QuestionCategory::Homework => "homework",
            QuestionCategory::Biometric => "biometric",
            QuestionCategory::Risk => "risk",
            QuestionCategory::Suggestion => "suggestion",
            QuestionCategory::General => "general",
        }
    }

    /// Whether an entry counts as evidence for questions of this category.
    /// Goals and messages are never evidence.
    pub fn admits(self, entry: &EntryRef<'_>) -> bool {
        match entry.kind() {
            EntryKind::Goal | EntryKind::Message => false,
            kind => match self {
                QuestionCategory::Journaling => entry.homework_type().is_some_and(|t| t.is_journaling()),
                QuestionCategory::Homework => kind == EntryKind::Submission,
                QuestionCategory::Biometric => kind == EntryKind::BiometricDay,
                QuestionCategory::Risk | QuestionCategory::Suggestion | QuestionCategory::General => true,
            },
        }
    }

    fn admits_kind(self, kind: EntryKind) -> bool {
        match self {
            QuestionCategory::Journaling | QuestionCategory::Homework => kind == EntryKind::Submission,
            QuestionCategory::Biometric => kind == EntryKind::BiometricDay,
            _ => !matches!(kind, EntryKind::Goal | EntryKind::Message),
        }
    }
}

impl fmt::Display for QuestionCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for QuestionCategory {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL.into_iter().find(|c| c.label() == s).ok_or_else(|| format!("unknown question category `{s}`"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuestionScope {
    Recent,
    Comparative,
}

impl QuestionScope {
    pub fn label(self) -> &'static str {
        match self {
            QuestionScope::Recent => "recent",
            QuestionScope::Comparative => "comparative",
        }
    }
}

impl fmt::Display for QuestionScope {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for QuestionScope {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "recent" => Ok(QuestionScope::Recent),
            "comparative" => Ok(QuestionScope::Comparative),
            other => Err(format!("unknown question scope `{other}`")),
        }
    }
}

/// Category cue tables in precedence order: the first category with a
/// matching cue wins.
pub const CATEGORY_CUES: &[(QuestionCategory, &[&str])] = &[
    (
        QuestionCategory::Risk,
        &[
            "risk", "risks", "harm", "self harm", "suicide", "suicidal", "hopeless", "hopelessness", "crisis",
            "danger", "dangerous", "unsafe", "warning", "warning signs", "distress", "red flag", "red flags", "panic",
        ],
    ),
    (
        QuestionCategory::Suggestion,
        &[
            "should i", "recommend", "recommendation", "recommendations", "suggest", "suggestion", "suggestions",
            "advice", "advise", "next step", "next steps", "what can i", "how can i", "intervention",
            "interventions", "try next",
        ],
    ),
    (
        QuestionCategory::Biometric,
        &[
            "sleep", "slept", "sleeping", "insomnia", "heart", "heart rate", "bpm", "pulse", "steps", "step count",
            "walking", "exercise", "physical activity", "apple health", "biometric", "biometrics",
            "mindfulness minutes",
        ],
    ),
    (
        QuestionCategory::Journaling,
        &[
            "journal", "journals", "journaling", "thought record", "thought records", "automatic thought",
            "automatic thoughts", "thoughts", "reframe", "reframing", "cognitive", "distortion", "distortions",
            "belief", "beliefs", "wrote", "written", "writing", "rumination", "gratitude",
        ],
    ),
    (
        QuestionCategory::Homework,
        &[
            "homework", "assignment", "assignments", "completion", "completed", "complete", "adherence", "streak",
            "streaks", "consistency", "consistent", "submitted", "submission", "submissions", "missed", "skipped",
            "gaps",
        ],
    ),
];

pub const COMPARATIVE_CUES: &[&str] = &[
    "before", "compare", "compared", "comparing", "comparison", "last month", "last week", "previous",
    "previously", "since", "trend", "trends", "over time", "changed", "change", "changes", "versus", "vs",
    "earlier", "week over week", "used to",
];

/// One classifier rule that fired: `rule` is a category label or
/// `comparative`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatchedRule {
    pub rule: String,
    pub cue: String,
}

impl fmt::Display for MatchedRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:\"{}\"", self.rule, self.cue)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoutingExplanation {
    pub category: QuestionCategory,
    pub scope: QuestionScope,
    pub matched_rules: Vec<MatchedRule>,
}

/// Lowercase runs of ASCII alphanumerics.
pub fn question_tokens(question: &str) -> Vec<String> {
    question
        .split(|c: char| !c.is_ascii_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(|t| t.to_ascii_lowercase())
        .collect()
}

fn cue_matches(tokens: &[String], cue: &str) -> bool {
    let parts: Vec<&str> = cue.split(' ').collect();
    tokens.windows(parts.len()).any(|w| w.iter().zip(&parts).all(|(t, p)| t == p))
}

/// Every rule that fires on `question`, with the resulting routing.
pub fn explain_routing(question: &str) -> RoutingExplanation {
    let tokens = question_tokens(question);
    let mut matched_rules = Vec::new();
    let mut category = None;
    for (cat, cues) in CATEGORY_CUES {
        for cue in cues.iter().filter(|cue| cue_matches(&tokens, cue)) {
            category.get_or_insert(*cat);
            matched_rules.push(MatchedRule { rule: cat.label().to_string(), cue: cue.to_string() });
        }
    }
    let mut scope = QuestionScope::Recent;
    for cue in COMPARATIVE_CUES.iter().filter(|cue| cue_matches(&tokens, cue)) {
        scope = QuestionScope::Comparative;
        matched_rules.push(MatchedRule { rule: "comparative".to_string(), cue: cue.to_string() });
    }
    RoutingExplanation { category: category.unwrap_or(QuestionCategory::General), scope, matched_rules }
}

/// Total: unknown intents route to `general`, scope defaults to `recent`.
pub fn classify(question: &str) -> (QuestionCategory, QuestionScope) {
    let routing = explain_routing(question);
    (routing.category, routing.scope)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub question: String,
    pub question_category: QuestionCategory,
    pub question_scope: QuestionScope,
}

impl ChatRequest {
    pub fn classified(question: &str) -> Result<Self, PipelineError> {
        if question.trim().is_empty() {
            return Err(PipelineError::EmptyQuestion);
        }
        let (question_category, question_scope) = classify(question);
        Ok(Self { question: question.to_string(), question_category, question_scope })
    }
}

/// The summary path's input: a control signal, never free text.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SummaryRequest {
    pub record_id: String,
    pub activate: bool,
    pub config: OnboardingConfig,
}

#[derive(Debug, Clone, Copy)]
pub enum RetrievalRequest<'a> {
    Chat(&'a ChatRequest),
    Summary(&'a SummaryRequest),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "path", rename_all = "snake_case")]
pub enum BundlePurpose {
    Summary,
    Chat { category: QuestionCategory, scope: QuestionScope },
}

impl BundlePurpose {
    fn admits(self, entry: &EntryRef<'_>) -> bool {
        match self {
            BundlePurpose::Summary => QuestionCategory::General.admits(entry),
            BundlePurpose::Chat { category, .. } => category.admits(entry),
        }
    }

    fn admits_kind(self, kind: EntryKind) -> bool {
        match self {
            BundlePurpose::Summary => QuestionCategory::General.admits_kind(kind),
            BundlePurpose::Chat { category, .. } => category.admits_kind(kind),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WindowTag {
    Previous,
    Current,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScopedWindow {
    pub tag: WindowTag,
    pub window: DateWindow,
}

/// One line of client context. `sources` are the entries the line was
/// rendered from; an empty list marks a structural line.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContextLine {
    pub text: String,
    pub sources: Vec<String>,
    /// Whether the `[ref:..]` markers are printed on this line.
    pub cite: bool,
}

impl ContextLine {
    fn cited(text: String, sources: Vec<String>) -> Self {
        Self { text, sources, cite: true }
    }

    fn structural(text: impl Into<String>) -> Self {
        Self { text: text.into(), sources: Vec::new(), cite: false }
    }

    pub fn render(&self) -> String {
        if !self.cite || self.sources.is_empty() {
            return self.text.clone();
        }
        let refs: Vec<String> = self.sources.iter().map(|id| citation(id)).collect();
        format!("{} {}", self.text, refs.join(" "))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContextSection {
    pub name: String,
    /// Inline sections render their single line after the label.
    pub inline: bool,
    pub lines: Vec<ContextLine>,
}

impl ContextSection {
    pub fn sources(&self) -> BTreeSet<&str> {
        self.lines.iter().flat_map(|l| l.sources.iter().map(String::as_str)).collect()
    }

    fn render_into(&self, out: &mut Vec<String>) {
        if self.inline {
            let line = self.lines.first().map(ContextLine::render).unwrap_or_else(|| NO_DATA.to_string());
            out.push(format!("{}: {line}", self.name));
        } else {
            out.push(format!("{}:", self.name));
            out.extend(self.lines.iter().map(ContextLine::render));
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContextBundle {
    pub record_id: String,
    pub purpose: BundlePurpose,
    pub reference_date: NaiveDate,
    pub windows: Vec<ScopedWindow>,
    pub notices: Vec<String>,
    pub sections: Vec<ContextSection>,
    /// Ids of every included entry, in timeline order; the reading
    /// pseudo-entry comes first when present.
    pub source_entries: Vec<String>,
    /// Included submissions whose type matches a focus area or selected
    /// homework type.
    pub focus_matched: Vec<String>,
    pub truncated: usize,
    pub preferences: OnboardingConfig,
}

impl ContextBundle {
    pub fn has_evidence(&self) -> bool {
        !self.source_entries.is_empty()
    }

    pub fn section(&self, name: &str) -> Option<&ContextSection> {
        self.sections.iter().find(|s| s.name == name)
    }

    /// Live views of the source entries inside `record`.
    pub fn source_refs<'a>(&self, record: &'a ClientRecord) -> Vec<EntryRef<'a>> {
        self.source_entries.iter().filter_map(|id| record.find(id)).collect()
    }

    /// Client data lines as they appear in the prompt.
    pub fn client_data_text(&self) -> String {
        let mut out: Vec<String> = self.notices.clone();
        for section in &self.sections {
            section.render_into(&mut out);
        }
        out.join("\n")
    }

    /// Every rendered client data line with the entries it came from.
    pub fn provenance_map(&self) -> Vec<(String, Vec<String>)> {
        let mut out: Vec<(String, Vec<String>)> = self.notices.iter().map(|n| (n.clone(), Vec::new())).collect();
        for section in &self.sections {
            let mut lines = Vec::new();
            section.render_into(&mut lines);
            if section.inline {
                out.push((lines.remove(0), section.sources().into_iter().map(String::from).collect()));
            } else {
                out.push((lines.remove(0), Vec::new()));
                out.extend(lines.into_iter().zip(section.lines.iter()).map(|(text, l)| (text, l.sources.clone())));
            }
        }
        out
    }
}

/// Anchor day of every retrieval window: `as_of`, pulled back to the
/// record's latest entry when the record goes quiet. Keeps stale records
/// answerable without widening the window.
pub fn reference_date(record: &ClientRecord, as_of: NaiveDate) -> NaiveDate {
    match record.entries().iter().map(|e| e.date()).max() {
        Some(latest) => latest.min(as_of),
        None => as_of,
    }
}

pub fn scope_windows(purpose: BundlePurpose, reference: NaiveDate) -> Vec<ScopedWindow> {
    match purpose {
        BundlePurpose::Summary => {
            vec![ScopedWindow { tag: WindowTag::Current, window: DateWindow::ending(reference, SUMMARY_WINDOW_DAYS) }]
        }
        BundlePurpose::Chat { scope: QuestionScope::Recent, .. } => {
            vec![ScopedWindow { tag: WindowTag::Current, window: DateWindow::ending(reference, RECENT_WINDOW_DAYS) }]
        }
        BundlePurpose::Chat { scope: QuestionScope::Comparative, .. } => {
            let current = DateWindow::ending(reference, RECENT_WINDOW_DAYS);
            vec![
                ScopedWindow { tag: WindowTag::Previous, window: current.previous() },
                ScopedWindow { tag: WindowTag::Current, window: current },
            ]
        }
    }
}

fn one_line(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn block_label(block: ActivityBlock) -> &'static str {
    match block {
        ActivityBlock::Morning => "morning",
        ActivityBlock::Afternoon => "afternoon",
        ActivityBlock::Night => "night",
    }
}

fn signed(delta: f64) -> String {
    format!("{delta:+.2}")
}

fn type_counts<'a>(subs: impl Iterator<Item = &'a HomeworkSubmission>) -> String {
    let mut counts: BTreeMap<String, u32> = BTreeMap::new();
    for s in subs {
        *counts.entry(s.homework_type.to_string()).or_default() += 1;
    }
    counts.iter().map(|(t, n)| format!("{t} x{n}")).collect::<Vec<_>>().join(", ")
}

fn plural(n: usize, word: &str) -> String {
    if n == 1 {
        format!("{n} {word}")
    } else {
        format!("{n} {word}s")
    }
}

/// Homework block text under a summary frequency setting. Daily and
/// weekly lines aggregate, and no line ever carries a submission body.
pub fn homework_frequency_lines(subs: &[&HomeworkSubmission], frequency: HomeworkFrequency) -> Vec<ContextLine> {
    let ids = |group: &[&HomeworkSubmission]| group.iter().map(|s| s.entry_id.clone()).collect::<Vec<_>>();
    let aggregate = |group: &[&HomeworkSubmission]| {
        let n = group.len() as f64;
        let delta = group.iter().map(|s| s.mood_delta() as f64).sum::<f64>() / n;
        let quality = group.iter().map(|s| s.self_rated_quality as f64).sum::<f64>() / n;
        let minutes: i64 = group.iter().map(|s| s.duration_minutes).sum();
        format!(
            "{}; types: {}; mean mood delta {}; mean quality {:.2}; total duration {minutes} min",
            plural(group.len(), "submission"),
            type_counts(group.iter().copied()),
            signed(delta),
            quality
        )
    };
    match frequency {
        HomeworkFrequency::None => {
            let answer = if subs.is_empty() { "no" } else { "yes" };
            vec![ContextLine::cited(format!("homework_submitted: {answer}"), ids(subs))]
        }
        HomeworkFrequency::Daily => {
            let mut by_day: BTreeMap<NaiveDate, Vec<&HomeworkSubmission>> = BTreeMap::new();
            for s in subs {
                by_day.entry(s.submitted_at.date_naive()).or_default().push(s);
            }
            by_day.iter().map(|(day, group)| ContextLine::cited(format!("{day}: {}", aggregate(group)), ids(group))).collect()
        }
        HomeworkFrequency::Weekly => {
            let mut by_week: BTreeMap<NaiveDate, Vec<&HomeworkSubmission>> = BTreeMap::new();
            for s in subs {
                by_week.entry(iso_week_start(s.submitted_at.date_naive())).or_default().push(s);
            }
            by_week
                .iter()
                .map(|(monday, group)| {
                    let week = monday.iso_week();
                    ContextLine::cited(
                        format!("{}-W{:02} (week of {monday}): {}", week.year(), week.week(), aggregate(group)),
                        ids(group),
                    )
                })
                .collect()
        }
    }
}

fn submission_line(s: &HomeworkSubmission, with_note: bool) -> String {
    let mut line = format!(
        "{} {}: duration {} min, quality {}/5, mood {} -> {} ({:+})",
        s.submitted_at.date_naive(),
        s.homework_type,
        s.duration_minutes,
        s.self_rated_quality,
        s.mood_before,
        s.mood_after,
        s.mood_delta()
    );
    if let (true, SubmissionBody::Text(text)) = (with_note, &s.body) {
        line.push_str(&format!(", note: {}", one_line(text)));
    }
    line
}

fn journal_line(s: &HomeworkSubmission) -> String {
    let body = match &s.body {
        SubmissionBody::Text(text) => one_line(text),
        SubmissionBody::ThoughtRecord(tr) => format!(
            "situation: {} | automatic_thought: {} | evidence: {} | rational_response: {}",
            one_line(&tr.trigger_situation),
            one_line(&tr.automatic_thought),
            tr.evidence.as_deref().map(one_line).unwrap_or_else(|| "missing".to_string()),
            one_line(&tr.rational_response)
        ),
    };
    format!("{} {}: {body}", s.submitted_at.date_naive(), s.homework_type)
}

fn assessment_line(entry: &crate::record::AssessmentResult) -> String {
    let mut line = format!("{} {}: total {}", entry.administered_at.date_naive(), entry.instrument.label(), entry.total);
    if let Ok(bands) = assessment_severity(entry) {
        if let Some(threshold) = entry.thresholds.total {
            let band = match bands.total_band {
                TotalBand::AtOrAbove => "at or above",
                TotalBand::Below => "below",
            };
            line.push_str(&format!(" ({band} threshold {threshold})"));
        }
        let flagged: Vec<String> = bands
            .items
            .iter()
            .enumerate()
            .filter(|(_, item)| item.exceeded)
            .map(|(i, item)| format!("item {} score {} > {}", i + 1, item.score, item.threshold.unwrap_or_default()))
            .collect();
        if !flagged.is_empty() {
            line.push_str(&format!("; items above threshold: {}", flagged.join(", ")));
        }
    }
    line
}

fn prefix(windows: &[ScopedWindow], tag: WindowTag) -> &'static str {
    match (windows.len() > 1, tag) {
        (false, _) => "",
        (true, WindowTag::Previous) => "[previous] ",
        (true, WindowTag::Current) => "[current] ",
    }
}

fn with_prefix(p: &str, line: ContextLine) -> ContextLine {
    ContextLine { text: format!("{p}{}", line.text), ..line }
}

fn or_no_data(mut lines: Vec<ContextLine>) -> Vec<ContextLine> {
    if lines.is_empty() {
        lines.push(ContextLine::structural(NO_DATA));
    }
    lines
}

/// Gathers the scope-windowed, purpose-filtered context for a request.
pub fn retrieve(
    record: &ClientRecord,
    request: RetrievalRequest<'_>,
    config: &OnboardingConfig,
    as_of: NaiveDate,
) -> Result<ContextBundle, PipelineError> {
    config.validate()?;
    let purpose = match request {
        RetrievalRequest::Summary(_) => BundlePurpose::Summary,
        RetrievalRequest::Chat(r) => BundlePurpose::Chat { category: r.question_category, scope: r.question_scope },
    };
    let reference = reference_date(record, as_of);
    let windows = scope_windows(purpose, reference);
    let tag_of = |date: NaiveDate| windows.iter().find(|w| w.window.contains(date)).map(|w| w.tag);

    let mut selected: Vec<EntryRef<'_>> =
        record.entries().into_iter().filter(|e| purpose.admits(e) && tag_of(e.date()).is_some()).collect();
    let truncated = selected.len().saturating_sub(MAX_BUNDLE_ENTRIES);
    selected.drain(..truncated);

    let emphasized = config.emphasized_homework_types();
    let focus_matched: Vec<String> = selected
        .iter()
        .filter(|e| e.homework_type().is_some_and(|t| emphasized.contains(t)))
        .map(|e| e.entry_id().to_string())
        .collect();

    let mut notices = Vec::new();
    if truncated > 0 {
        notices.push(format!("notice: {truncated} older entries omitted (limit {MAX_BUNDLE_ENTRIES} entries)"));
    }

    let mut sections = Vec::new();
    let mut source_entries = Vec::new();
    let include_reading = purpose.admits_kind(EntryKind::ReadingMaterials);
    if include_reading {
        let reading = &record.reading_materials;
        let line = if reading.is_empty() {
            ContextLine::structural(NO_DATA)
        } else {
            source_entries.push(READING_MATERIALS_ID.to_string());
            ContextLine::cited(
                format!(
                    "{{ finished: {}, not_finished: {} }}",
                    serde_json::to_string(&reading.finished).expect("strings serialize"),
                    serde_json::to_string(&reading.not_finished).expect("strings serialize")
                ),
                vec![READING_MATERIALS_ID.to_string()],
            )
        };
        sections.push(ContextSection { name: "reading_materials".into(), inline: true, lines: vec![line] });
    }
    source_entries.extend(selected.iter().map(|e| e.entry_id().to_string()));

    let in_tag = |tag: WindowTag| selected.iter().filter(|e| tag_of(e.date()) == Some(tag)).copied().collect::<Vec<_>>();
    let is_chat = matches!(purpose, BundlePurpose::Chat { .. });

    if purpose.admits_kind(EntryKind::BiometricDay) {
        let mut lines = Vec::new();
        let mut days = Vec::new();
        for scoped in &windows {
            let p = prefix(&windows, scoped.tag);
            let mut window_record = ClientRecord::empty(&record.record_id, &record.client_label);
            window_record.biometric_days = in_tag(scoped.tag)
                .into_iter()
                .filter_map(|e| match e {
                    EntryRef::BiometricDay(d) => Some(d.clone()),
                    _ => None,
                })
                .collect();
            let agg = biometric_aggregate(&window_record, scoped.window);
            for text in agg.text.lines() {
                lines.push(ContextLine { text: format!("{p}{text}"), sources: agg.entry_ids.clone(), cite: false });
            }
            if !agg.entry_ids.is_empty() {
                lines.push(ContextLine::cited(format!("{p}biometric_sources:"), agg.entry_ids.clone()));
            }
            for day in &window_record.biometric_days {
                days.push(with_prefix(
                    p,
                    ContextLine::cited(
                        format!(
                            "{}: sleep {} h, resting heart rate {} bpm, steps {}, mindfulness {} min",
                            day.date,
                            day.sleep_hours,
                            day.resting_heart_rate_bpm,
                            day.activity_steps,
                            day.mindfulness_minutes
                        ),
                        vec![day.entry_id.clone()],
                    ),
                ));
            }
        }
        sections.push(ContextSection { name: "biometric_aggregates".into(), inline: false, lines });
        if is_chat {
            sections.push(ContextSection { name: "biometric_days".into(), inline: false, lines: or_no_data(days) });
        }
    }

    if purpose.admits_kind(EntryKind::Submission) {
        let mut homework = Vec::new();
        let mut journal = Vec::new();
        for scoped in &windows {
            let p = prefix(&windows, scoped.tag);
            let subs: Vec<&HomeworkSubmission> = in_tag(scoped.tag)
                .into_iter()
                .filter_map(|e| match e {
                    EntryRef::Submission(s) => Some(s),
                    _ => None,
                })
                .collect();
            let mut subs = subs;
            if is_chat {
                subs.sort_by_key(|s| !emphasized.contains(&s.homework_type));
            }
            match (purpose, request) {
                (BundlePurpose::Summary, _) => homework.extend(
                    homework_frequency_lines(&subs, config.homework_summary).into_iter().map(|l| with_prefix(p, l)),
                ),
                _ => homework.extend(subs.iter().map(|s| {
                    with_prefix(
                        p,
                        ContextLine::cited(submission_line(s, !s.homework_type.is_journaling()), vec![s.entry_id.clone()]),
                    )
                })),
            }
            journal.extend(
                subs.iter()
                    .filter(|s| s.homework_type.is_journaling())
                    .map(|s| with_prefix(p, ContextLine::cited(journal_line(s), vec![s.entry_id.clone()]))),
            );
        }
        sections.push(ContextSection { name: "homework_data".into(), inline: false, lines: or_no_data(homework) });
        sections.push(ContextSection { name: "journal_entries".into(), inline: false, lines: or_no_data(journal) });
    }

    let simple_sections: [(EntryKind, &str); 3] = [
        (EntryKind::EmotionLog, "emotion_logs"),
        (EntryKind::ActivityLog, "activity_logs"),
        (EntryKind::Assessment, "assessments"),
    ];
    for (kind, name) in simple_sections {
        if !purpose.admits_kind(kind) {
            continue;
        }
        let mut lines = Vec::new();
        for scoped in &windows {
            let p = prefix(&windows, scoped.tag);
            for e in in_tag(scoped.tag).into_iter().filter(|e| e.kind() == kind) {
                let text = match e {
                    EntryRef::EmotionLog(l) => format!("{} {}: {}", l.date, l.interval.label(), l.descriptor.label()),
                    EntryRef::ActivityLog(l) => {
                        format!("{} {}: {}", l.date, block_label(l.block), one_line(&l.description))
                    }
                    EntryRef::Assessment(a) => assessment_line(a),
                    _ => unreachable!("filtered by kind"),
                };
                lines.push(with_prefix(p, ContextLine::cited(text, vec![e.entry_id().to_string()])));
            }
        }
        sections.push(ContextSection { name: name.into(), inline: false, lines: or_no_data(lines) });
    }

    Ok(ContextBundle {
        record_id: record.record_id.clone(),
        purpose,
        reference_date: reference,
        windows,
        notices,
        sections,
        source_entries,
        focus_matched,
        truncated,
        preferences: config.clone(),
    })
}

/// The four prompt parts plus the parameters the call must use.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptDocument {
    pub system_text: String,
    pub task_instructions: String,
    pub context_block: String,
    pub user_query_or_signal: String,
    pub params: InferenceParams,
}

impl PromptDocument {
    /// Full prompt text: system, task, context, query, in that order.
    pub fn render(&self) -> String {
        format!(
            "{}\n\n{TASK_MARKER}\n{}\n\n{CONTEXT_MARKER}\n{}\n\n{QUERY_MARKER}\n{}\n",
            self.system_text, self.task_instructions, self.context_block, self.user_query_or_signal
        )
    }

    /// Everything after the system text, sent as the user turn.
    pub fn user_text(&self) -> String {
        let full = self.render();
        full[self.system_text.len()..].trim_start().to_string()
    }
}

fn json_list<T: fmt::Display>(items: impl IntoIterator<Item = T>) -> String {
    let labels: Vec<String> = items.into_iter().map(|i| i.to_string()).collect();
    serde_json::to_string(&labels).expect("strings serialize")
}

/// Parameter lines sorted by name (byte order).
fn parameter_block(params: BTreeMap<&'static str, String>) -> String {
    params.into_iter().map(|(k, v)| format!("{k}: {v}")).collect::<Vec<_>>().join("\n")
}

fn context_block(params: BTreeMap<&'static str, String>, bundle: &ContextBundle) -> String {
    format!("{PARAMETERS_MARKER}\n{}\n{CLIENT_DATA_MARKER}\n{}", parameter_block(params), bundle.client_data_text())
}

fn window_text(bundle: &ContextBundle) -> String {
    bundle
        .windows
        .iter()
        .map(|w| {
            let tag = match w.tag {
                WindowTag::Previous => "previous",
                WindowTag::Current => "current",
            };
            format!("{tag} {} to {}", w.window.start, w.window.end)
        })
        .collect::<Vec<_>>()
        .join("; ")
}

pub fn build_summary_prompt(bundle: &ContextBundle, config: &OnboardingConfig) -> Result<PromptDocument, PipelineError> {
    config.validate()?;
    let format_line = match config.summary_level {
        SummaryLevel::NoAiSummary => return Err(PipelineError::SummaryDisabled),
        SummaryLevel::BasicOverview => "output_format: one plain-text paragraph, no headings".to_string(),
        SummaryLevel::DetailedAnalysis => format!(
            "output_format: plain-text report; each section header on its own line, in this order: {}\n\
             optional_section: {OTHER_OBSERVATIONS} (only between {} and {})",
            SUMMARY_HEADERS.join("; "),
            SUMMARY_HEADERS[5],
            SUMMARY_HEADERS[6]
        ),
    };
    let task_instructions = format!(
        "task: summary\nrecord_id: {}\nwindow: {}\n{format_line}\n\
         citations: end each statement with the [ref:<id>] markers of the client data lines it draws on",
        bundle.record_id,
        window_text(bundle)
    );
    let params = BTreeMap::from([
        ("focus_areas", json_list(&config.focus_areas)),
        ("homework_summary", config.homework_summary.label().to_string()),
        ("homework_types", json_list(&config.homework_types)),
        ("summary_level", config.summary_level.label().to_string()),
        ("summary_priorities", json_list(config.summary_priorities.iter().map(|p| p.label()))),
    ]);
    Ok(PromptDocument {
        system_text: SUMMARY_SYSTEM_TEMPLATE.to_string(),
        task_instructions,
        context_block: context_block(params, bundle),
        user_query_or_signal: "activate_summary: true".to_string(),
        params: InferenceParams::summary(),
    })
}

fn category_instruction(category: QuestionCategory) -> String {
    match category {
        QuestionCategory::Journaling => "recurring themes, emotions and thought patterns in the journal entries".into(),
        QuestionCategory::Homework => "completion trends, consistency, gaps and streaks".into(),
        QuestionCategory::Biometric => "sleep, heart rate, activity and mindfulness patterns with the metrics cited".into(),
        QuestionCategory::Risk => "possible warning signs only, in calibrated language, each with what, when and source".into(),
        QuestionCategory::Suggestion => {
            format!("first line exactly \"{DISCLAIMER}\", then at most 5 bullets, each with a citation")
        }
        QuestionCategory::General => "only the details that directly answer the question".into(),
    }
}

pub fn build_chat_prompt(
    bundle: &ContextBundle,
    request: &ChatRequest,
    config: &OnboardingConfig,
) -> Result<PromptDocument, PipelineError> {
    config.validate()?;
    if request.question.trim().is_empty() {
        return Err(PipelineError::EmptyQuestion);
    }
    let raw_line = if config.has_ability(ChatAbility::RawDataExtraction) {
        format!(
            "raw_data_block: include; start with a line \"{RAW_DATA_TITLE}\" listing only the directly relevant \
             data lines, then a line \"{EXPLANATION_TITLE}\" before the bullets"
        )
    } else {
        "raw_data_block: omit".to_string()
    };
    let depth = if config.has_ability(ChatAbility::DetailedExplanations) { "detailed" } else { "brief" };
    let task_instructions = format!(
        "task: chat_answer\nrecord_id: {}\nwindow: {}\ncategory_instruction: {}\n{raw_line}\n\
         explanation_depth: {depth}\nfocus_order: entries matching focus_areas or homework_types are listed first\n\
         citations: end every bullet with the [ref:<id>] markers of the client data lines it draws on",
        bundle.record_id,
        window_text(bundle),
        category_instruction(request.question_category)
    );
    let params = BTreeMap::from([
        ("aiChatAbilities", json_list(config.ai_chat_abilities.iter().map(|a| a.label()))),
        ("focus_areas", json_list(&config.focus_areas)),
        ("homework_types", json_list(&config.homework_types)),
        ("question", one_line(&request.question)),
        ("question_category", request.question_category.label().to_string()),
        ("question_scope", request.question_scope.label().to_string()),
    ]);
    Ok(PromptDocument {
        system_text: CHAT_SYSTEM_TEMPLATE.to_string(),
        task_instructions,
        context_block: context_block(params, bundle),
        user_query_or_signal: one_line(&request.question),
        params: InferenceParams::chat(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dashboard::SummaryPriority;
    use crate::fixtures;

    fn rules(q: &str) -> Vec<String> {
        explain_routing(q).matched_rules.iter().map(ToString::to_string).collect()
    }

    #[test]
    fn classifier_examples() {
        assert_eq!(classify("Has this concern come up before?"), (QuestionCategory::General, QuestionScope::Comparative));
        assert_eq!(
            classify("Show entries where sleep dropped before low-mood logs."),
            (QuestionCategory::Biometric, QuestionScope::Comparative)
        );
        assert_eq!(classify("zzz qwerty"), (QuestionCategory::General, QuestionScope::Recent));
        assert_eq!(classify("What should I try next with her?").0, QuestionCategory::Suggestion);
        assert_eq!(classify("Any suicidal thoughts? What should I do").0, QuestionCategory::Risk);
    }

    #[test]
    fn routing_rules_for_compare_sleep() {
        assert_eq!(rules("compare her sleep to last month"), vec![
            "biometric:\"sleep\"",
            "comparative:\"compare\"",
            "comparative:\"last month\""
        ]);
        assert!(explain_routing("qwpo asdm").matched_rules.is_empty());
    }

    #[test]
    fn reference_date_clamps_to_latest_entry() {
        let record = fixtures::elias();
        let today: NaiveDate = "2026-01-01".parse().unwrap();
        assert_eq!(reference_date(&record, today), "2025-03-23".parse().unwrap());
        let early: NaiveDate = "2025-03-10".parse().unwrap();
        assert_eq!(reference_date(&record, early), early);
    }

    #[test]
    fn recent_scope_stays_in_window() {
        let record = fixtures::elias();
        let req = ChatRequest::classified("How is the homework going?").unwrap();
        let bundle =
            retrieve(&record, RetrievalRequest::Chat(&req), &OnboardingConfig::default(), "2026-01-01".parse().unwrap())
                .unwrap();
        assert_eq!(bundle.source_entries, vec!["elias-tr-6", "elias-tr-7"]);
        assert!(bundle.section("biometric_aggregates").is_none());
    }

    #[test]
    fn none_frequency_is_one_presence_line() {
        let record = fixtures::elias();
        let config = OnboardingConfig { homework_summary: HomeworkFrequency::None, ..Default::default() };
        let req = SummaryRequest { record_id: "elias".into(), activate: true, config: config.clone() };
        let bundle = retrieve(&record, RetrievalRequest::Summary(&req), &config, "2026-01-01".parse().unwrap()).unwrap();
        let homework = bundle.section("homework_data").unwrap();
        assert_eq!(homework.lines.len(), 1);
        assert!(homework.lines[0].render().starts_with("homework_submitted: yes [ref:elias-tr-1]"));
    }

    #[test]
    fn summary_prompt_lists_priorities_in_given_order() {
        let record = fixtures::elias();
        let config = OnboardingConfig {
            summary_priorities: vec![SummaryPriority::Risk, SummaryPriority::Reading],
            ..Default::default()
        };
        let req = SummaryRequest { record_id: "elias".into(), activate: true, config: config.clone() };
        let bundle = retrieve(&record, RetrievalRequest::Summary(&req), &config, "2026-01-01".parse().unwrap()).unwrap();
        let prompt = build_summary_prompt(&bundle, &config).unwrap();
        assert!(prompt.context_block.contains("summary_priorities: [\"risk\",\"reading\"]"));
        assert_eq!(prompt.system_text, SUMMARY_SYSTEM_TEMPLATE);
        let no_ai = OnboardingConfig { summary_level: SummaryLevel::NoAiSummary, ..config };
        assert_eq!(build_summary_prompt(&bundle, &no_ai), Err(PipelineError::SummaryDisabled));
    }

    #[test]
    fn empty_record_blocks_read_no_data() {
        let record = ClientRecord::empty("nobody", "Nobody");
        let config = OnboardingConfig::default();
        let req = SummaryRequest { record_id: "nobody".into(), activate: true, config: config.clone() };
        let bundle = retrieve(&record, RetrievalRequest::Summary(&req), &config, "2025-01-01".parse().unwrap()).unwrap();
        assert!(!bundle.has_evidence());
        let text = bundle.client_data_text();
        for line in text.lines() {
            assert!(line.ends_with(NO_DATA) || bundle.section(line.trim_end_matches(':')).is_some(), "{line}");
        }
    }

    #[test]
    fn raw_data_instruction_follows_preference() {
        let record = fixtures::elias();
        let req = ChatRequest::classified("What should I suggest next?").unwrap();
        let off = OnboardingConfig::default();
        let on = OnboardingConfig {
            ai_chat_abilities: BTreeSet::from([ChatAbility::RawDataExtraction]),
            ..Default::default()
        };
        let day: NaiveDate = "2026-01-01".parse().unwrap();
        let bundle = retrieve(&record, RetrievalRequest::Chat(&req), &off, day).unwrap();
        let p_off = build_chat_prompt(&bundle, &req, &off).unwrap();
        let p_on = build_chat_prompt(&bundle, &req, &on).unwrap();
        assert!(p_off.task_instructions.contains("raw_data_block: omit"));
        assert!(p_on.task_instructions.contains(RAW_DATA_TITLE));
        assert!(p_on.task_instructions.contains(DISCLAIMER));
    }
}
