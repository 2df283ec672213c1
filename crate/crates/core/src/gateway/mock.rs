//! Deterministic offline provider.
//!
//! Scripted outputs are looked up by prompt digest. Prompts without a
//! script get a conforming answer generated from the prompt's own context
//! block, so the mock output is a pure function of the prompt bytes.

use std::collections::BTreeMap;
use std::io;
use std::path::Path;

use super::validate::{INSUFFICIENT_DATA, NO_SUMMARY_TEXT};
use super::{prompt_digest, GatewayError, InferenceParams, Provider};
use crate::analytics::NO_DATA;
use crate::pipeline::{
    PromptDocument, CLIENT_DATA_MARKER, DISCLAIMER, EXPLANATION_TITLE, PARAMETERS_MARKER, RAW_DATA_TITLE,
    SUMMARY_HEADERS,
};
use crate::provenance::{cited_ids, citation, CITATION_OPEN};

#[derive(Debug, Clone, Default)]
pub struct MockProvider {
    scripts: BTreeMap<String, String>,
}

impl MockProvider {
    pub fn new() -> Self {
        Self::default()
    }

    /// Loads `<digest>.txt` scripts from `dir`.
    pub fn from_dir(dir: impl AsRef<Path>) -> io::Result<Self> {
        let mut scripts = BTreeMap::new();
        for entry in std::fs::read_dir(dir)? {
            let path = entry?.path();
            if path.extension().is_some_and(|e| e == "txt") {
                if let Some(stem) = path.file_stem().and_then(|s| s.to_str()) {
                    scripts.insert(stem.to_string(), std::fs::read_to_string(&path)?);
                }
            }
        }
        Ok(Self { scripts })
    }

    pub fn with_script(mut self, digest: impl Into<String>, output: impl Into<String>) -> Self {
        self.scripts.insert(digest.into(), output.into());
        self
    }

    /// Scripts `output` for exactly this prompt.
    pub fn script_prompt(self, prompt: &PromptDocument, output: impl Into<String>) -> Self {
        self.with_script(prompt_digest(prompt), output)
    }
}

impl Provider for MockProvider {
    fn name(&self) -> &str {
        "mock"
    }

    fn complete(&self, prompt: &PromptDocument, _params: &InferenceParams) -> Result<String, GatewayError> {
        if let Some(script) = self.scripts.get(&prompt_digest(prompt)) {
            return Ok(script.clone());
        }
        if prompt.task_instructions.starts_with("task: summary") {
            Ok(conforming_summary(prompt))
        } else {
            Ok(conforming_chat(prompt))
        }
    }
}

/// Parameters and client data sections read back from a context block.
#[derive(Debug, Default)]
struct ParsedContext {
    params: BTreeMap<String, String>,
    reading: Option<String>,
    sections: BTreeMap<String, Vec<String>>,
}

const SECTION_NAMES: &[&str] = &[
    "biometric_aggregates",
    "biometric_days",
    "homework_data",
    "journal_entries",
    "emotion_logs",
    "activity_logs",
    "assessments",
];

fn parse_context(block: &str) -> ParsedContext {
    let mut parsed = ParsedContext::default();
    let (params, data) = block.split_once(CLIENT_DATA_MARKER).unwrap_or(("", block));
    for line in params.lines().filter(|l| *l != PARAMETERS_MARKER) {
        if let Some((k, v)) = line.split_once(": ") {
            parsed.params.insert(k.to_string(), v.to_string());
        }
    }
    let mut current: Option<String> = None;
    for line in data.lines().filter(|l| !l.is_empty()) {
        if let Some(rest) = line.strip_prefix("reading_materials: ") {
            parsed.reading = Some(rest.to_string());
            current = None;
        } else if let Some(name) = line.strip_suffix(':').filter(|n| SECTION_NAMES.contains(n)) {
            current = Some(name.to_string());
            parsed.sections.entry(name.to_string()).or_default();
        } else if let Some(name) = &current {
            parsed.sections.entry(name.clone()).or_default().push(line.to_string());
        }
    }
    parsed
}

impl ParsedContext {
    fn cited_lines(&self, section: &str) -> Vec<&str> {
        self.sections
            .get(section)
            .map(|lines| lines.iter().map(String::as_str).filter(|l| !cited_ids(l).is_empty()).collect())
            .unwrap_or_default()
    }

    fn refs(&self, section: &str) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for line in self.cited_lines(section) {
            for id in cited_ids(line) {
                if !out.contains(&id) {
                    out.push(id);
                }
            }
        }
        out
    }
}

/// Line text with its citation markers removed.
fn strip_refs(line: &str) -> &str {
    match line.find(&format!(" {CITATION_OPEN}")) {
        Some(i) => &line[..i],
        None => line,
    }
}

fn cite_all(ids: &[String]) -> String {
    ids.iter().map(|id| citation(id)).collect::<Vec<_>>().join(" ")
}

fn parse_string_list(text: &str, key: &str) -> Vec<String> {
    text.find(key)
        .and_then(|i| {
            serde_json::Deserializer::from_str(&text[i + key.len()..]).into_iter::<Vec<String>>().next()?.ok()
        })
        .unwrap_or_default()
}

fn list_or_none(items: &[String]) -> String {
    if items.is_empty() {
        "none".to_string()
    } else {
        items.join("; ")
    }
}

fn summary_bodies(ctx: &ParsedContext) -> [String; 7] {
    let reading = match ctx.reading.as_deref() {
        Some(line) if line != NO_DATA => {
            let finished = parse_string_list(line, "{ finished: ");
            let unfinished = parse_string_list(line, "not_finished: ");
            format!(
                "Finished: {}. Not finished: {}. {}",
                list_or_none(&finished),
                list_or_none(&unfinished),
                cite_all(&cited_ids(line))
            )
        }
        _ => NO_DATA.to_string(),
    };

    let homework_refs = ctx.refs("homework_data");
    let homework = if homework_refs.is_empty() {
        NO_DATA.to_string()
    } else {
        format!(
            "{} homework submissions appear across {} reported periods. {}",
            homework_refs.len(),
            ctx.cited_lines("homework_data").len(),
            cite_all(&homework_refs)
        )
    };

    let emotions = ctx.cited_lines("emotion_logs");
    let assessments = ctx.cited_lines("assessments");
    let mental = if emotions.is_empty() && assessments.is_empty() {
        NO_DATA.to_string()
    } else {
        let mut parts = Vec::new();
        if !emotions.is_empty() {
            let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
            for line in &emotions {
                let descriptor = strip_refs(line).rsplit(": ").next().unwrap_or_default();
                *counts.entry(descriptor).or_default() += 1;
            }
            let (top, n) = counts.iter().max_by_key(|(d, n)| (**n, std::cmp::Reverse(**d))).expect("non-empty");
            let recent: Vec<String> = emotions.iter().rev().take(3).flat_map(|l| cited_ids(l)).collect();
            parts.push(format!(
                "The most frequent logged emotion is {top} ({n} of {} logs). {}",
                emotions.len(),
                cite_all(&recent)
            ));
        }
        if !assessments.is_empty() {
            let ids: Vec<String> = assessments.iter().flat_map(|l| cited_ids(l)).collect();
            parts.push(format!("{} assessment results were recorded. {}", assessments.len(), cite_all(&ids)));
        }
        parts.join(" ")
    };

    let journal_lines = ctx.cited_lines("journal_entries");
    let journaling = if journal_lines.is_empty() {
        NO_DATA.to_string()
    } else {
        let thought_records: Vec<&&str> = journal_lines.iter().filter(|l| l.contains("automatic_thought: ")).collect();
        let complete = thought_records.iter().filter(|l| !l.contains("evidence: missing")).count();
        format!(
            "{} journal entries were submitted; {complete} of {} thought records have every field completed. {}",
            journal_lines.len(),
            thought_records.len(),
            cite_all(&ctx.refs("journal_entries"))
        )
    };

    let bio_lines = ctx.sections.get("biometric_aggregates").cloned().unwrap_or_default();
    let bio_refs = ctx.refs("biometric_aggregates");
    let biometric = match bio_lines.iter().find_map(|l| l.split("sleep_hours: mean ").nth(1)) {
        Some(rest) if !bio_refs.is_empty() => {
            let mean = rest.split_whitespace().next().unwrap_or_default();
            format!("Sleep averaged {mean} hours across {} logged days. {}", bio_refs.len(), cite_all(&bio_refs))
        }
        _ => NO_DATA.to_string(),
    };

    let flagged: Vec<String> = assessments
        .iter()
        .filter(|l| l.contains("(at or above threshold"))
        .map(|l| {
            let text = strip_refs(l);
            let mut words = text.split_whitespace();
            let date = words.next().unwrap_or_default();
            let instrument = words.next().unwrap_or_default().trim_end_matches(':');
            format!("Possible signals include a {instrument} total at or above threshold on {date}. {}", cite_all(&cited_ids(l)))
        })
        .collect();
    let risk = if flagged.is_empty() { NO_DATA.to_string() } else { flagged.join(" ") };

    let anchor = [&homework_refs, &ctx.refs("journal_entries"), &bio_refs]
        .into_iter()
        .find_map(|ids| ids.last().cloned())
        .or_else(|| ctx.reading.as_deref().and_then(|l| cited_ids(l).into_iter().next()));
    let overall = match anchor {
        Some(id) => format!("Retrieved data for the window are summarized section by section above. {}", citation(&id)),
        None => NO_DATA.to_string(),
    };
    [reading, homework, mental, journaling, biometric, risk, overall]
}

/// A summary satisfying every structural rule, built from the prompt.
pub fn conforming_summary(prompt: &PromptDocument) -> String {
    let ctx = parse_context(&prompt.context_block);
    let level = ctx.params.get("summary_level").map(String::as_str).unwrap_or("Detailed Analysis");
    let bodies = summary_bodies(&ctx);
    match level {
        "No AI Summary" => NO_SUMMARY_TEXT.to_string(),
        "Basic Overview" => {
            let parts: Vec<&str> = bodies[..6].iter().map(String::as_str).filter(|b| *b != NO_DATA).collect();
            if parts.is_empty() {
                NO_DATA.to_string()
            } else {
                parts.join(" ")
            }
        }
        _ => SUMMARY_HEADERS.iter().zip(bodies.iter()).map(|(h, b)| format!("{h}\n{b}")).collect::<Vec<_>>().join("\n\n"),
    }
}

fn describe(line: &str) -> String {
    let text = strip_refs(line);
    let (tag, text) = match text.strip_prefix("[previous] ") {
        Some(rest) => (" (previous window)", rest),
        None => ("", text.strip_prefix("[current] ").unwrap_or(text)),
    };
    let text = text.split(" | ").next().unwrap_or(text);
    let text = text.split(", note: ").next().unwrap_or(text);
    if text.starts_with('{') {
        format!("reading status recorded{tag}")
    } else {
        format!("{text}{tag}")
    }
}

/// A chat answer satisfying every rule for the prompt's category and
/// preferences.
pub fn conforming_chat(prompt: &PromptDocument) -> String {
    let ctx = parse_context(&prompt.context_block);
    let category = ctx.params.get("question_category").map(String::as_str).unwrap_or("general");
    let raw_pref = ctx.params.get("aiChatAbilities").is_some_and(|v| v.contains("raw_data_extraction"));
    let order: &[&str] = match category {
        "journaling" => &["journal_entries"],
        "homework" => &["homework_data"],
        "biometric" => &["biometric_days"],
        "risk" => &["assessments", "emotion_logs", "journal_entries", "homework_data"],
        _ => &["journal_entries", "homework_data", "emotion_logs", "assessments", "activity_logs", "biometric_days"],
    };
    let mut lines: Vec<&str> = order.iter().map(|s| ctx.cited_lines(s)).find(|l| !l.is_empty()).unwrap_or_default();
    if lines.is_empty() {
        if let Some(reading) = ctx.reading.as_deref().filter(|r| !cited_ids(r).is_empty()) {
            lines.push(reading);
        }
    }
    if lines.is_empty() {
        return INSUFFICIENT_DATA.to_string();
    }
    let mut picked: Vec<&str> = Vec::new();
    for line in [lines[0]].into_iter().chain(lines.iter().rev().take(2).rev().copied()) {
        if !picked.contains(&line) {
            picked.push(line);
        }
    }

    let mut out = Vec::new();
    if category == "suggestion" {
        out.push(DISCLAIMER.to_string());
    }
    if raw_pref {
        out.push(RAW_DATA_TITLE.to_string());
        out.extend(picked.iter().map(|l| format!("- {l}")));
        out.push(EXPLANATION_TITLE.to_string());
    }
    for line in &picked {
        let refs = cite_all(&cited_ids(line));
        let text = describe(line);
        out.push(match category {
            "risk" => format!("- Possible signals include {text} {refs}"),
            "suggestion" => format!("- Review with the client: {text} {refs}"),
            _ => format!("- {text} {refs}"),
        });
    }
    out.join("\n")
}
