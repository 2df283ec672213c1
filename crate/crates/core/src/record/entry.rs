//! Uniform view over the heterogeneous entry lists of a record.

use std::fmt;
use std::str::FromStr;

use chrono::{DateTime, NaiveDate, Utc};
use serde::{Deserialize, Serialize};

use super::types::*;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EntryKind {
    Submission,
    EmotionLog,
    ActivityLog,
    Assessment,
    BiometricDay,
    Goal,
    Message,
    ReadingMaterials,
}

impl EntryKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EntryKind::Submission => "submission",
            EntryKind::EmotionLog => "emotion_log",
            EntryKind::ActivityLog => "activity_log",
            EntryKind::Assessment => "assessment",
            EntryKind::BiometricDay => "biometric_day",
            EntryKind::Goal => "goal",
            EntryKind::Message => "message",
            EntryKind::ReadingMaterials => "reading_materials",
        }
    }

    /// Prefix of store-assigned ids for this kind.
    pub(crate) fn id_prefix(self) -> &'static str {
        match self {
            EntryKind::Submission => "sub",
            EntryKind::EmotionLog => "emo",
            EntryKind::ActivityLog => "act",
            EntryKind::Assessment => "asm",
            EntryKind::BiometricDay => "bio",
            EntryKind::Goal => "goal",
            EntryKind::Message => "msg",
            EntryKind::ReadingMaterials => "reading",
        }
    }
}

impl fmt::Display for EntryKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// An owned entry of any kind, tagged by `kind` on the wire.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Entry {
    Submission(HomeworkSubmission),
    EmotionLog(EmotionLog),
    ActivityLog(ActivityLog),
    Assessment(AssessmentResult),
    BiometricDay(BiometricDay),
    Goal(TherapyGoal),
    Message(Message),
}

impl Entry {
    pub fn kind(&self) -> EntryKind {
        match self {
            Entry::Submission(_) => EntryKind::Submission,
            Entry::EmotionLog(_) => EntryKind::EmotionLog,
            Entry::ActivityLog(_) => EntryKind::ActivityLog,
            Entry::Assessment(_) => EntryKind::Assessment,
            Entry::BiometricDay(_) => EntryKind::BiometricDay,
            Entry::Goal(_) => EntryKind::Goal,
            Entry::Message(_) => EntryKind::Message,
        }
    }

    pub fn entry_id(&self) -> &str {
        match self {
            Entry::Submission(e) => &e.entry_id,
            Entry::EmotionLog(e) => &e.entry_id,
            Entry::ActivityLog(e) => &e.entry_id,
            Entry::Assessment(e) => &e.entry_id,
            Entry::BiometricDay(e) => &e.entry_id,
            Entry::Goal(e) => &e.goal_id,
            Entry::Message(e) => &e.message_id,
        }
    }

    pub(crate) fn set_entry_id(&mut self, id: String) {
        match self {
            Entry::Submission(e) => e.entry_id = id,
            Entry::EmotionLog(e) => e.entry_id = id,
            Entry::ActivityLog(e) => e.entry_id = id,
            Entry::Assessment(e) => e.entry_id = id,
            Entry::BiometricDay(e) => e.entry_id = id,
            Entry::Goal(e) => e.goal_id = id,
            Entry::Message(e) => e.message_id = id,
        }
    }

    pub fn timestamp(&self) -> DateTime<Utc> {
        EntryRef::from(self).timestamp()
    }
}

/// Borrowed view of one entry inside a record. Reading materials are
/// exposed here so provenance can anchor to them.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EntryRef<'a> {
    Submission(&'a HomeworkSubmission),
    EmotionLog(&'a EmotionLog),
    ActivityLog(&'a ActivityLog),
    Assessment(&'a AssessmentResult),
    BiometricDay(&'a BiometricDay),
    Goal(&'a TherapyGoal),
    Message(&'a Message),
    ReadingMaterials(&'a ReadingStatus),
}

impl<'a> From<&'a Entry> for EntryRef<'a> {
    fn from(entry: &'a Entry) -> Self {
        match entry {
            Entry::Submission(e) => EntryRef::Submission(e),
            Entry::EmotionLog(e) => EntryRef::EmotionLog(e),
            Entry::ActivityLog(e) => EntryRef::ActivityLog(e),
            Entry::Assessment(e) => EntryRef::Assessment(e),
            Entry::BiometricDay(e) => EntryRef::BiometricDay(e),
            Entry::Goal(e) => EntryRef::Goal(e),
            Entry::Message(e) => EntryRef::Message(e),
        }
    }
}

impl<'a> EntryRef<'a> {
    pub fn kind(&self) -> EntryKind {
        match self {
            EntryRef::Submission(_) => EntryKind::Submission,
            EntryRef::EmotionLog(_) => EntryKind::EmotionLog,
            EntryRef::ActivityLog(_) => EntryKind::ActivityLog,
            EntryRef::Assessment(_) => EntryKind::Assessment,
            EntryRef::BiometricDay(_) => EntryKind::BiometricDay,
            EntryRef::Goal(_) => EntryKind::Goal,
            EntryRef::Message(_) => EntryKind::Message,
            EntryRef::ReadingMaterials(_) => EntryKind::ReadingMaterials,
        }
    }

    pub fn entry_id(&self) -> &'a str {
        match self {
            EntryRef::Submission(e) => &e.entry_id,
            EntryRef::EmotionLog(e) => &e.entry_id,
            EntryRef::ActivityLog(e) => &e.entry_id,
            EntryRef::Assessment(e) => &e.entry_id,
            EntryRef::BiometricDay(e) => &e.entry_id,
            EntryRef::Goal(e) => &e.goal_id,
            EntryRef::Message(e) => &e.message_id,
            EntryRef::ReadingMaterials(_) => READING_MATERIALS_ID,
        }
    }

    /// Position on the record's UTC timeline. Date-only entries sit at the
    /// start hour of their slot; reading status has no time and sorts first.
    pub fn timestamp(&self) -> DateTime<Utc> {
        match self {
            EntryRef::Submission(e) => e.submitted_at,
            EntryRef::EmotionLog(e) => at_hour(e.date, e.interval.start_hour()),
            EntryRef::ActivityLog(e) => at_hour(e.date, e.block.start_hour()),
            EntryRef::Assessment(e) => e.administered_at,
            EntryRef::BiometricDay(e) => at_hour(e.date, 0),
            EntryRef::Goal(e) => e.created_at,
            EntryRef::Message(e) => e.sent_at,
            EntryRef::ReadingMaterials(_) => DateTime::<Utc>::MIN_UTC,
        }
    }

    pub fn date(&self) -> NaiveDate {
        self.timestamp().date_naive()
    }

    pub fn to_owned_entry(&self) -> Option<Entry> {
        Some(match *self {
            EntryRef::Submission(e) => Entry::Submission(e.clone()),
            EntryRef::EmotionLog(e) => Entry::EmotionLog(e.clone()),
            EntryRef::ActivityLog(e) => Entry::ActivityLog(e.clone()),
            EntryRef::Assessment(e) => Entry::Assessment(e.clone()),
            EntryRef::BiometricDay(e) => Entry::BiometricDay(e.clone()),
            EntryRef::Goal(e) => Entry::Goal(e.clone()),
            EntryRef::Message(e) => Entry::Message(e.clone()),
            EntryRef::ReadingMaterials(_) => return None,
        })
    }

    /// Canonical serialization, the input of excerpt hashing.
    pub fn canonical_json(&self) -> String {
        let value = match *self {
            EntryRef::Submission(e) => serde_json::to_string(e),
            EntryRef::EmotionLog(e) => serde_json::to_string(e),
            EntryRef::ActivityLog(e) => serde_json::to_string(e),
            EntryRef::Assessment(e) => serde_json::to_string(e),
            EntryRef::BiometricDay(e) => serde_json::to_string(e),
            EntryRef::Goal(e) => serde_json::to_string(e),
            EntryRef::Message(e) => serde_json::to_string(e),
            EntryRef::ReadingMaterials(e) => serde_json::to_string(e),
        };
        format!("{}:{}", self.kind(), value.expect("entry types serialize infallibly"))
    }

    pub fn homework_type(&self) -> Option<&'a HomeworkType> {
        match self {
            EntryRef::Submission(e) => Some(&e.homework_type),
            _ => None,
        }
    }
}

/// One term of an entry-kind filter: a whole kind, or submissions of a
/// single homework type.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum KindSelector {
    Kind(EntryKind),
    Homework(HomeworkType),
}

impl KindSelector {
    pub fn matches(&self, entry: &EntryRef<'_>) -> bool {
        match self {
            KindSelector::Kind(kind) => entry.kind() == *kind,
            KindSelector::Homework(ty) => entry.homework_type() == Some(ty),
        }
    }
}

impl FromStr for KindSelector {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let kind = match s {
            "submission" => Some(EntryKind::Submission),
            "emotion_log" => Some(EntryKind::EmotionLog),
            "activity_log" => Some(EntryKind::ActivityLog),
            "assessment" => Some(EntryKind::Assessment),
            "biometric_day" => Some(EntryKind::BiometricDay),
            "goal" => Some(EntryKind::Goal),
            "message" => Some(EntryKind::Message),
            _ => None,
        };
        match kind {
            Some(kind) => Ok(KindSelector::Kind(kind)),
            None => s.parse::<HomeworkType>().map(KindSelector::Homework),
        }
    }
}

impl fmt::Display for KindSelector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            KindSelector::Kind(kind) => kind.fmt(f),
            KindSelector::Homework(ty) => ty.fmt(f),
        }
    }
}

/// Filter for [`ClientRecord::entries`]-style listings. `None` fields are
/// unrestricted; the date range is inclusive and compared on UTC dates.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct EntryFilter {
    pub kinds: Option<Vec<KindSelector>>,
    pub from: Option<NaiveDate>,
    pub to: Option<NaiveDate>,
}

impl EntryFilter {
    pub fn matches(&self, entry: &EntryRef<'_>) -> bool {
        if let Some(kinds) = &self.kinds {
            if !kinds.iter().any(|k| k.matches(entry)) {
                return false;
            }
        }
        let date = entry.date();
        self.from.is_none_or(|from| date >= from) && self.to.is_none_or(|to| date <= to)
    }
}

impl ClientRecord {
    /// Every entry in the record (reading status excluded), ascending by
    /// `(timestamp, entry_id)`.
    pub fn entries(&self) -> Vec<EntryRef<'_>> {
        let mut out: Vec<EntryRef<'_>> = Vec::with_capacity(self.entry_count());
        out.extend(self.submissions.iter().map(EntryRef::Submission));
        out.extend(self.emotion_logs.iter().map(EntryRef::EmotionLog));
        out.extend(self.activity_logs.iter().map(EntryRef::ActivityLog));
        out.extend(self.assessments.iter().map(EntryRef::Assessment));
        out.extend(self.biometric_days.iter().map(EntryRef::BiometricDay));
        out.extend(self.goals.iter().map(EntryRef::Goal));
        out.extend(self.messages.iter().map(EntryRef::Message));
        out.sort_by(|a, b| entry_order(a, b));
        out
    }

    pub fn entry_count(&self) -> usize {
        self.submissions.len()
            + self.emotion_logs.len()
            + self.activity_logs.len()
            + self.assessments.len()
            + self.biometric_days.len()
            + self.goals.len()
            + self.messages.len()
    }

    pub fn filtered(&self, filter: &EntryFilter) -> Vec<EntryRef<'_>> {
        self.entries().into_iter().filter(|e| filter.matches(e)).collect()
    }

    /// Finds an entry by id, including the reserved reading-materials id.
    pub fn find(&self, entry_id: &str) -> Option<EntryRef<'_>> {
        if entry_id == READING_MATERIALS_ID {
            return Some(EntryRef::ReadingMaterials(&self.reading_materials));
        }
        self.submissions
            .iter()
            .find(|e| e.entry_id == entry_id)
            .map(EntryRef::Submission)
            .or_else(|| self.emotion_logs.iter().find(|e| e.entry_id == entry_id).map(EntryRef::EmotionLog))
            .or_else(|| self.activity_logs.iter().find(|e| e.entry_id == entry_id).map(EntryRef::ActivityLog))
            .or_else(|| self.assessments.iter().find(|e| e.entry_id == entry_id).map(EntryRef::Assessment))
            .or_else(|| self.biometric_days.iter().find(|e| e.entry_id == entry_id).map(EntryRef::BiometricDay))
            .or_else(|| self.goals.iter().find(|e| e.goal_id == entry_id).map(EntryRef::Goal))
            .or_else(|| self.messages.iter().find(|e| e.message_id == entry_id).map(EntryRef::Message))
    }

    /// Inserts an entry at its sorted position. Performs no validation.
    pub(crate) fn insert_sorted(&mut self, entry: Entry) {
        fn place<T>(list: &mut Vec<T>, item: T, key: impl Fn(&T) -> (DateTime<Utc>, String)) {
            let k = key(&item);
            let at = list.partition_point(|x| key(x) <= k);
            list.insert(at, item);
        }
        match entry {
            Entry::Submission(e) => place(&mut self.submissions, e, |x| (x.submitted_at, x.entry_id.clone())),
            Entry::EmotionLog(e) => place(&mut self.emotion_logs, e, |x| {
                (EntryRef::EmotionLog(x).timestamp(), x.entry_id.clone())
            }),
            Entry::ActivityLog(e) => place(&mut self.activity_logs, e, |x| {
                (EntryRef::ActivityLog(x).timestamp(), x.entry_id.clone())
            }),
            Entry::Assessment(e) => place(&mut self.assessments, e, |x| (x.administered_at, x.entry_id.clone())),
            Entry::BiometricDay(e) => place(&mut self.biometric_days, e, |x| {
                (EntryRef::BiometricDay(x).timestamp(), x.entry_id.clone())
            }),
            Entry::Goal(e) => place(&mut self.goals, e, |x| (x.created_at, x.goal_id.clone())),
            Entry::Message(e) => place(&mut self.messages, e, |x| (x.sent_at, x.message_id.clone())),
        }
    }

    pub(crate) fn remove(&mut self, entry_id: &str) -> Option<Entry> {
        fn take<T: Clone>(list: &mut Vec<T>, id: impl Fn(&T) -> bool) -> Option<T> {
            list.iter().position(id).map(|i| list.remove(i))
        }
        take(&mut self.submissions, |e| e.entry_id == entry_id)
            .map(Entry::Submission)
            .or_else(|| take(&mut self.emotion_logs, |e| e.entry_id == entry_id).map(Entry::EmotionLog))
            .or_else(|| take(&mut self.activity_logs, |e| e.entry_id == entry_id).map(Entry::ActivityLog))
            .or_else(|| take(&mut self.assessments, |e| e.entry_id == entry_id).map(Entry::Assessment))
            .or_else(|| take(&mut self.biometric_days, |e| e.entry_id == entry_id).map(Entry::BiometricDay))
            .or_else(|| take(&mut self.goals, |e| e.goal_id == entry_id).map(Entry::Goal))
            .or_else(|| take(&mut self.messages, |e| e.message_id == entry_id).map(Entry::Message))
    }

    /// Re-establishes the `(timestamp, entry_id)` order of every list.
    pub(crate) fn sort_all(&mut self) {
        self.submissions.sort_by(|a, b| (a.submitted_at, &a.entry_id).cmp(&(b.submitted_at, &b.entry_id)));
        self.emotion_logs.sort_by(|a, b| entry_order(&EntryRef::EmotionLog(a), &EntryRef::EmotionLog(b)));
        self.activity_logs.sort_by(|a, b| entry_order(&EntryRef::ActivityLog(a), &EntryRef::ActivityLog(b)));
        self.assessments.sort_by(|a, b| (a.administered_at, &a.entry_id).cmp(&(b.administered_at, &b.entry_id)));
        self.biometric_days.sort_by(|a, b| entry_order(&EntryRef::BiometricDay(a), &EntryRef::BiometricDay(b)));
        self.goals.sort_by(|a, b| (a.created_at, &a.goal_id).cmp(&(b.created_at, &b.goal_id)));
        self.messages.sort_by(|a, b| (a.sent_at, &a.message_id).cmp(&(b.sent_at, &b.message_id)));
    }
}

/// Total order on entries: timestamp, then entry id.
pub fn entry_order(a: &EntryRef<'_>, b: &EntryRef<'_>) -> std::cmp::Ordering {
    (a.timestamp(), a.entry_id()).cmp(&(b.timestamp(), b.entry_id()))
}
