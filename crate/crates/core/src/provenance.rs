//! Provenance anchors linking generated text back to source entries.
//!
//! Generated text carries inline tokens of the form `[[entry:<entry_id>]]`,
//! one per anchor, in order of appearance. Model output may cite context
//! lines with `[ref:<entry_id>]` markers; anchoring verifies each cited id
//! against the retrieval set and rewrites it to a token.

use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::record::{ClientRecord, Entry, EntryKind, EntryRef, ReadingStatus, RecordStore};

pub const TOKEN_OPEN: &str = "[[entry:";
pub const TOKEN_CLOSE: &str = "]]";
pub const CITATION_OPEN: &str = "[ref:";
pub const CITATION_CLOSE: &str = "]";

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ProvenanceError {
    #[error("text cites entry `{0}` which is not among the sources")]
    UnmatchedCitation(String),
    #[error("anchor {record_id}/{entry_id} does not resolve")]
    DanglingAnchor { record_id: String, entry_id: String },
    #[error("inline tokens {tokens:?} do not match anchors {anchors:?}")]
    TokenMismatch { tokens: Vec<String>, anchors: Vec<String> },
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ProvenanceAnchor {
    pub record_id: String,
    pub entry_id: String,
    pub kind: EntryKind,
    pub excerpt_hash: String,
}

impl ProvenanceAnchor {
    pub fn for_entry(record_id: &str, entry: &EntryRef<'_>) -> Self {
        Self {
            record_id: record_id.to_string(),
            entry_id: entry.entry_id().to_string(),
            kind: entry.kind(),
            excerpt_hash: excerpt_hash(entry),
        }
    }
}

/// SHA-256 over the entry's canonical serialization, hex encoded.
pub fn excerpt_hash(entry: &EntryRef<'_>) -> String {
    hex::encode(Sha256::digest(entry.canonical_json().as_bytes()))
}

pub fn token(entry_id: &str) -> String {
    format!("{TOKEN_OPEN}{entry_id}{TOKEN_CLOSE}")
}

pub fn citation(entry_id: &str) -> String {
    format!("{CITATION_OPEN}{entry_id}{CITATION_CLOSE}")
}

/// Text with inline anchor tokens and the matching anchor list.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnchoredText {
    pub body: String,
    pub anchors: Vec<ProvenanceAnchor>,
}

impl AnchoredText {
    pub fn plain(body: impl Into<String>) -> Self {
        Self { body: body.into(), anchors: Vec::new() }
    }

    /// Entry ids of the inline tokens, in body order.
    pub fn token_ids(&self) -> Vec<&str> {
        scan_markers(&self.body)
            .into_iter()
            .filter(|m| m.style == MarkerStyle::Token)
            .map(|m| &self.body[m.id.clone()])
            .collect()
    }

    /// Checks that the inline tokens and the anchor list agree one to one.
    pub fn check(&self) -> Result<(), ProvenanceError> {
        let tokens = self.token_ids();
        let anchors: Vec<&str> = self.anchors.iter().map(|a| a.entry_id.as_str()).collect();
        if tokens == anchors {
            Ok(())
        } else {
            Err(ProvenanceError::TokenMismatch {
                tokens: tokens.into_iter().map(String::from).collect(),
                anchors: anchors.into_iter().map(String::from).collect(),
            })
        }
    }

    /// Body with every anchor token removed.
    pub fn display_text(&self) -> String {
        let mut out = String::with_capacity(self.body.len());
        let mut last = 0;
        for m in scan_markers(&self.body).into_iter().filter(|m| m.style == MarkerStyle::Token) {
            out.push_str(self.body[last..m.span.start].trim_end_matches(' '));
            last = m.span.end;
        }
        out.push_str(&self.body[last..]);
        out
    }

    /// Appends one trailing token per source entry.
    pub fn append_sources(&mut self, record_id: &str, sources: &[EntryRef<'_>]) {
        for entry in sources {
            if !self.body.is_empty() && !self.body.ends_with(char::is_whitespace) {
                self.body.push(' ');
            }
            self.body.push_str(&token(entry.entry_id()));
            self.anchors.push(ProvenanceAnchor::for_entry(record_id, entry));
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum MarkerStyle {
    Token,
    Citation,
}

#[derive(Debug, Clone)]
struct Marker {
    style: MarkerStyle,
    span: std::ops::Range<usize>,
    id: std::ops::Range<usize>,
}

fn valid_id(id: &str) -> bool {
    !id.is_empty() && id.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_' || c == '.')
}

/// Finds `[[entry:..]]` and `[ref:..]` markers, left to right.
fn scan_markers(text: &str) -> Vec<Marker> {
    let mut out = Vec::new();
    let mut at = 0;
    while at < text.len() {
        let rest = &text[at..];
        let next_token = rest.find(TOKEN_OPEN);
        let next_cite = rest.find(CITATION_OPEN);
        let (style, offset, open, close) = match (next_token, next_cite) {
            (None, None) => break,
            (Some(t), Some(c)) if c < t => (MarkerStyle::Citation, c, CITATION_OPEN, CITATION_CLOSE),
            (Some(t), _) => (MarkerStyle::Token, t, TOKEN_OPEN, TOKEN_CLOSE),
            (None, Some(c)) => (MarkerStyle::Citation, c, CITATION_OPEN, CITATION_CLOSE),
        };
        let start = at + offset;
        let id_start = start + open.len();
        match text[id_start..].find(close) {
            Some(len) if valid_id(&text[id_start..id_start + len]) => {
                let end = id_start + len + close.len();
                out.push(Marker { style, span: start..end, id: id_start..id_start + len });
                at = end;
            }
            _ => at = id_start,
        }
    }
    out
}

/// Ids cited by `[ref:..]` or token markers in `text`, in order.
pub fn cited_ids(text: &str) -> Vec<String> {
    scan_markers(text).into_iter().map(|m| text[m.id].to_string()).collect()
}

/// Rewrites every citation in `body` into an anchor token, checking each
/// cited id against `sources` (entries of record `record_id`).
pub fn attach_anchors(body: &str, record_id: &str, sources: &[EntryRef<'_>]) -> Result<AnchoredText, ProvenanceError> {
    let by_id: HashMap<&str, &EntryRef<'_>> = sources.iter().map(|e| (e.entry_id(), e)).collect();
    let mut out = AnchoredText::default();
    let mut last = 0;
    for m in scan_markers(body) {
        let id = &body[m.id.clone()];
        let entry = by_id.get(id).ok_or_else(|| ProvenanceError::UnmatchedCitation(id.to_string()))?;
        out.body.push_str(&body[last..m.span.start]);
        out.body.push_str(&token(id));
        out.anchors.push(ProvenanceAnchor::for_entry(record_id, entry));
        last = m.span.end;
    }
    out.body.push_str(&body[last..]);
    Ok(out)
}

/// The live content an anchor points at.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ResolvedEntry {
    Entry(Entry),
    ReadingMaterials(ReadingStatus),
}

impl ResolvedEntry {
    fn from_ref(entry: &EntryRef<'_>) -> Self {
        match entry {
            EntryRef::ReadingMaterials(status) => ResolvedEntry::ReadingMaterials((*status).clone()),
            other => ResolvedEntry::Entry(other.to_owned_entry().expect("non-reading entries are owned entries")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Resolution {
    pub entry: ResolvedEntry,
    /// The entry changed after the anchor was created.
    pub stale: bool,
}

/// Resolves an anchor against a specific record snapshot.
pub fn resolve_in(anchor: &ProvenanceAnchor, record: &ClientRecord) -> Result<Resolution, ProvenanceError> {
    let dangling = || ProvenanceError::DanglingAnchor {
        record_id: anchor.record_id.clone(),
        entry_id: anchor.entry_id.clone(),
    };
    if record.record_id != anchor.record_id {
        return Err(dangling());
    }
    let entry = record.find(&anchor.entry_id).ok_or_else(dangling)?;
    Ok(Resolution { stale: excerpt_hash(&entry) != anchor.excerpt_hash, entry: ResolvedEntry::from_ref(&entry) })
}

/// Resolves an anchor against the store's current state.
pub fn resolve(anchor: &ProvenanceAnchor, store: &RecordStore) -> Result<Resolution, ProvenanceError> {
    match store.snapshot(&anchor.record_id) {
        Ok(record) => resolve_in(anchor, &record),
        Err(_) => Err(ProvenanceError::DanglingAnchor {
            record_id: anchor.record_id.clone(),
            entry_id: anchor.entry_id.clone(),
        }),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnchorIssue {
    pub index: usize,
    pub record_id: String,
    pub entry_id: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditReport {
    pub resolved_count: usize,
    pub dangling: Vec<AnchorIssue>,
    pub stale: Vec<AnchorIssue>,
}

impl AuditReport {
    pub fn total(&self) -> usize {
        self.resolved_count + self.dangling.len() + self.stale.len()
    }

    pub fn is_clean(&self) -> bool {
        self.dangling.is_empty() && self.stale.is_empty()
    }

    pub fn merge(&mut self, other: AuditReport) {
        let offset = self.total();
        self.resolved_count += other.resolved_count;
        self.dangling.extend(other.dangling.into_iter().map(|mut i| {
            i.index += offset;
            i
        }));
        self.stale.extend(other.stale.into_iter().map(|mut i| {
            i.index += offset;
            i
        }));
    }
}

/// Classifies anchors as resolved, dangling or stale. Each record is read
/// from a single snapshot for the whole audit.
pub fn audit_anchors(anchors: &[ProvenanceAnchor], store: &RecordStore) -> AuditReport {
    let mut snapshots: BTreeMap<&str, Option<Arc<ClientRecord>>> = BTreeMap::new();
    let mut report = AuditReport::default();
    for (index, anchor) in anchors.iter().enumerate() {
        let snapshot = snapshots
            .entry(anchor.record_id.as_str())
            .or_insert_with(|| store.snapshot(&anchor.record_id).ok());
        let issue = || AnchorIssue { index, record_id: anchor.record_id.clone(), entry_id: anchor.entry_id.clone() };
        match snapshot.as_deref().map(|record| resolve_in(anchor, record)) {
            Some(Ok(Resolution { stale: false, .. })) => report.resolved_count += 1,
            Some(Ok(Resolution { stale: true, .. })) => report.stale.push(issue()),
            Some(Err(_)) | None => report.dangling.push(issue()),
        }
    }
    report
}

pub fn audit_document(doc: &AnchoredText, store: &RecordStore) -> AuditReport {
    audit_anchors(&doc.anchors, store)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::record::SubmissionBody;

    fn elias_sources(record: &ClientRecord) -> Vec<EntryRef<'_>> {
        record.entries()
    }

    #[test]
    fn citations_become_tokens_in_order() {
        let record = fixtures::elias();
        let sources = elias_sources(&record);
        let doc = attach_anchors("First [ref:elias-tr-2] then [ref:elias-tr-1].", "elias", &sources).unwrap();
        assert_eq!(doc.body, "First [[entry:elias-tr-2]] then [[entry:elias-tr-1]].");
        assert_eq!(doc.token_ids(), vec!["elias-tr-2", "elias-tr-1"]);
        assert_eq!(doc.anchors.len(), 2);
        doc.check().unwrap();
        assert_eq!(doc.display_text(), "First then.");
    }

    #[test]
    fn no_citations_no_anchors() {
        let record = fixtures::elias();
        let doc = attach_anchors("Nothing cited here.", "elias", &elias_sources(&record)).unwrap();
        assert!(doc.anchors.is_empty());
        assert_eq!(doc.body, "Nothing cited here.");
    }

    #[test]
    fn unknown_citation_is_named() {
        let record = fixtures::elias();
        let err = attach_anchors("See [ref:e3].", "elias", &elias_sources(&record)).unwrap_err();
        assert_eq!(err, ProvenanceError::UnmatchedCitation("e3".into()));
    }

    #[test]
    fn malformed_markers_are_ignored() {
        assert!(cited_ids("[ref:] [ref:has space] [[entry:]]").is_empty());
        assert_eq!(cited_ids("[[entry:a]][ref:b]"), vec!["a", "b"]);
    }

    #[test]
    fn resolve_first_thought_record() {
        let store = RecordStore::in_memory();
        store.put(fixtures::elias()).unwrap();
        let record = store.snapshot("elias").unwrap();
        let anchor = ProvenanceAnchor::for_entry("elias", &record.find("elias-tr-1").unwrap());
        let res = resolve(&anchor, &store).unwrap();
        assert!(!res.stale);
        match res.entry {
            ResolvedEntry::Entry(Entry::Submission(s)) => match s.body {
                SubmissionBody::ThoughtRecord(tr) => assert_eq!(tr.trigger_situation, "My paper got rejected."),
                other => panic!("unexpected body {other:?}"),
            },
            other => panic!("unexpected entry {other:?}"),
        }
    }

    #[test]
    fn edit_makes_stale_and_delete_makes_dangling() {
        let store = RecordStore::in_memory();
        store.put(fixtures::elias()).unwrap();
        let record = store.snapshot("elias").unwrap();
        let entry = record.find("elias-tr-3").unwrap();
        let anchor = ProvenanceAnchor::for_entry("elias", &entry);

        let Some(Entry::Submission(mut edited)) = entry.to_owned_entry() else { panic!() };
        edited.mood_after = 9;
        store.update_entry("elias", "elias-tr-3", Entry::Submission(edited)).unwrap();
        assert!(resolve(&anchor, &store).unwrap().stale);

        store.remove_entry("elias", "elias-tr-3").unwrap();
        assert!(matches!(resolve(&anchor, &store), Err(ProvenanceError::DanglingAnchor { .. })));

        let report = audit_anchors(std::slice::from_ref(&anchor), &store);
        assert_eq!(report.dangling.len(), 1);
        assert_eq!(report.total(), 1);
    }

    #[test]
    fn reading_materials_anchor_resolves() {
        let store = RecordStore::in_memory();
        store.put(fixtures::elias()).unwrap();
        let record = store.snapshot("elias").unwrap();
        let anchor = ProvenanceAnchor::for_entry("elias", &record.find("reading_materials").unwrap());
        assert!(matches!(resolve(&anchor, &store).unwrap().entry, ResolvedEntry::ReadingMaterials(_)));
    }

    #[test]
    fn tampered_id_audits_dangling() {
        let store = RecordStore::in_memory();
        store.put(fixtures::elias()).unwrap();
        let record = store.snapshot("elias").unwrap();
        let mut doc = attach_anchors("[ref:elias-tr-1] [ref:elias-tr-2]", "elias", &record.entries()).unwrap();
        assert!(audit_document(&doc, &store).is_clean());
        doc.anchors[1].entry_id = "elias-tr-99".into();
        let report = audit_document(&doc, &store);
        assert_eq!(report.dangling.len(), 1);
        assert_eq!(report.resolved_count, 1);
    }
}
