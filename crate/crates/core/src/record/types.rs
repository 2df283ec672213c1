//! Domain types of the canonical client record.

use std::fmt;
use std::str::FromStr;

use chrono::{DateTime, NaiveDate, NaiveTime, Utc};
use serde::{Deserialize, Serialize};

/// Entry id reserved for the record's reading-material status, which is
/// anchorable like an entry but lives outside the entry lists.
pub const READING_MATERIALS_ID: &str = "reading_materials";

/// Current version of the canonical record document.
pub const SCHEMA_VERSION: u32 = 1;

macro_rules! labelled_enum {
    (
        $(#[$meta:meta])*
        $name:ident { $($variant:ident => $label:literal),+ $(,)? }
    ) => {
        $(#[$meta])*
        #[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
        pub enum $name {
            $($variant,)+
            /// Free-text label for anything outside the closed vocabulary.
            Other(String),
        }

        impl $name {
            pub const KNOWN: &'static [$name] = &[$($name::$variant),+];

            pub fn label(&self) -> &str {
                match self {
                    $($name::$variant => $label,)+
                    $name::Other(label) => label,
                }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                match self {
                    $name::Other(label) => write!(f, "other:{label}"),
                    known => f.write_str(known.label()),
                }
            }
        }

        impl FromStr for $name {
            type Err = String;

            fn from_str(s: &str) -> Result<Self, Self::Err> {
                match s {
                    $($label => Ok($name::$variant),)+
                    other => match other.strip_prefix("other:") {
                        Some(label) if !label.trim().is_empty() => Ok($name::Other(label.to_string())),
                        Some(_) => Err(format!("empty label in `{other}`")),
                        None => Err(format!("unknown {} `{other}`", stringify!($name))),
                    },
                }
            }
        }

        impl Serialize for $name {
            fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
                serializer.collect_str(self)
            }
        }

        impl<'de> Deserialize<'de> for $name {
            fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
                let raw = String::deserialize(deserializer)?;
                raw.parse().map_err(serde::de::Error::custom)
            }
        }
    };
}
pub(crate) use labelled_enum;

labelled_enum! {
    /// Kind of homework a submission answers.
    HomeworkType {
        ThoughtRecord => "thought_record",
        Journaling => "journaling",
        GratitudeJournal => "gratitude_journal",
        MoodTracking => "mood_tracking",
        RelaxationBreathing => "relaxation_breathing",
        BehavioralExperiment => "behavioral_experiment",
        ActivityScheduling => "activity_scheduling",
        ExposureTask => "exposure_task",
        MindfulnessPractice => "mindfulness_practice",
    }
}

labelled_enum! {
    /// Standardized instrument an assessment was scored on.
    Instrument {
        Gad7 => "GAD7",
        Phq9 => "PHQ9",
        Pcl => "PCL",
        Ocir => "OCIR",
    }
}

labelled_enum! {
    EmotionDescriptor {
        Energetic => "Energetic",
        Overwhelmed => "Overwhelmed",
        Sleepy => "Sleepy",
        Enthusiastic => "Enthusiastic",
        Bored => "Bored",
        Relaxed => "Relaxed",
    }
}

impl HomeworkType {
    /// Submission types whose bodies are reflective writing.
    pub fn is_journaling(&self) -> bool {
        matches!(
            self,
            HomeworkType::ThoughtRecord | HomeworkType::Journaling | HomeworkType::GratitudeJournal
        )
    }
}

/// Four-hour emotion logging slot. The two night slots are reserved for
/// clients who log outside waking hours.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum EmotionInterval {
    #[serde(rename = "06-10")]
    Morning,
    #[serde(rename = "10-14")]
    Midday,
    #[serde(rename = "14-18")]
    Afternoon,
    #[serde(rename = "18-22")]
    Evening,
    #[serde(rename = "22-02")]
    LateNight,
    #[serde(rename = "02-06")]
    EarlyMorning,
}

impl EmotionInterval {
    pub const ALL: [EmotionInterval; 6] = [
        EmotionInterval::Morning,
        EmotionInterval::Midday,
        EmotionInterval::Afternoon,
        EmotionInterval::Evening,
        EmotionInterval::LateNight,
        EmotionInterval::EarlyMorning,
    ];

    pub fn start_hour(self) -> u32 {
        match self {
            EmotionInterval::EarlyMorning => 2,
            EmotionInterval::Morning => 6,
            EmotionInterval::Midday => 10,
            EmotionInterval::Afternoon => 14,
            EmotionInterval::Evening => 18,
            EmotionInterval::LateNight => 22,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            EmotionInterval::Morning => "06-10",
            EmotionInterval::Midday => "10-14",
            EmotionInterval::Afternoon => "14-18",
            EmotionInterval::Evening => "18-22",
            EmotionInterval::LateNight => "22-02",
            EmotionInterval::EarlyMorning => "02-06",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ActivityBlock {
    Morning,
    Afternoon,
    Night,
}

impl ActivityBlock {
    pub const ALL: [ActivityBlock; 3] = [ActivityBlock::Morning, ActivityBlock::Afternoon, ActivityBlock::Night];

    pub fn start_hour(self) -> u32 {
        match self {
            ActivityBlock::Morning => 6,
            ActivityBlock::Afternoon => 12,
            ActivityBlock::Night => 18,
        }
    }
}

pub(crate) fn at_hour(date: NaiveDate, hour: u32) -> DateTime<Utc> {
    date.and_time(NaiveTime::from_hms_opt(hour, 0, 0).expect("hour < 24"))
        .and_utc()
}

/// Structured CBT worksheet: situation, automatic thought, evidence, reframe.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThoughtRecord {
    pub trigger_situation: String,
    pub automatic_thought: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub evidence: Option<String>,
    pub rational_response: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum SubmissionBody {
    Text(String),
    ThoughtRecord(ThoughtRecord),
}

impl SubmissionBody {
    /// Every free-text fragment the client wrote, in field order.
    pub fn fragments(&self) -> Vec<&str> {
        match self {
            SubmissionBody::Text(text) => vec![text.as_str()],
            SubmissionBody::ThoughtRecord(tr) => {
                let mut out = vec![tr.trigger_situation.as_str(), tr.automatic_thought.as_str()];
                if let Some(evidence) = &tr.evidence {
                    out.push(evidence);
                }
                out.push(&tr.rational_response);
                out
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HomeworkSubmission {
    #[serde(default)]
    pub entry_id: String,
    pub submitted_at: DateTime<Utc>,
    pub homework_type: HomeworkType,
    pub duration_minutes: i64,
    pub self_rated_quality: i64,
    pub mood_before: i64,
    pub mood_after: i64,
    pub body: SubmissionBody,
}

impl HomeworkSubmission {
    pub fn mood_delta(&self) -> i64 {
        self.mood_after - self.mood_before
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmotionLog {
    #[serde(default)]
    pub entry_id: String,
    pub date: NaiveDate,
    pub interval: EmotionInterval,
    pub descriptor: EmotionDescriptor,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ActivityLog {
    #[serde(default)]
    pub entry_id: String,
    pub date: NaiveDate,
    pub block: ActivityBlock,
    pub description: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AssessmentItem {
    pub item_text: String,
    pub score: i64,
}

/// Cutoffs for an assessment. `items` is either empty or has one threshold
/// per assessment item.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Thresholds {
    #[serde(default)]
    pub items: Vec<i64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub total: Option<i64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AssessmentResult {
    #[serde(default)]
    pub entry_id: String,
    pub administered_at: DateTime<Utc>,
    pub instrument: Instrument,
    pub items: Vec<AssessmentItem>,
    pub total: i64,
    #[serde(default)]
    pub thresholds: Thresholds,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BiometricDay {
    #[serde(default)]
    pub entry_id: String,
    pub date: NaiveDate,
    pub sleep_hours: f64,
    pub resting_heart_rate_bpm: i64,
    pub activity_steps: i64,
    pub mindfulness_minutes: i64,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReadingStatus {
    #[serde(default)]
    pub finished: Vec<String>,
    #[serde(default)]
    pub not_finished: Vec<String>,
}

impl ReadingStatus {
    pub fn is_empty(&self) -> bool {
        self.finished.is_empty() && self.not_finished.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GoalStatus {
    Active,
    Achieved,
    Revised,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TherapyGoal {
    #[serde(default)]
    pub goal_id: String,
    pub text: String,
    pub created_at: DateTime<Utc>,
    pub status: GoalStatus,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MessageDirection {
    ToClient,
    FromClient,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Message {
    #[serde(default)]
    pub message_id: String,
    pub sent_at: DateTime<Utc>,
    pub direction: MessageDirection,
    pub text: String,
}

/// Canonical container of every entry for one client.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClientRecord {
    pub schema_version: u32,
    pub record_id: String,
    pub client_label: String,
    #[serde(default)]
    pub submissions: Vec<HomeworkSubmission>,
    #[serde(default)]
    pub emotion_logs: Vec<EmotionLog>,
    #[serde(default)]
    pub activity_logs: Vec<ActivityLog>,
    #[serde(default)]
    pub assessments: Vec<AssessmentResult>,
    #[serde(default)]
    pub biometric_days: Vec<BiometricDay>,
    #[serde(default)]
    pub reading_materials: ReadingStatus,
    #[serde(default)]
    pub goals: Vec<TherapyGoal>,
    #[serde(default)]
    pub messages: Vec<Message>,
    /// Counter behind store-assigned entry ids.
    #[serde(default)]
    pub next_entry_seq: u64,
}

impl ClientRecord {
    pub fn empty(record_id: impl Into<String>, client_label: impl Into<String>) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            record_id: record_id.into(),
            client_label: client_label.into(),
            submissions: Vec::new(),
            emotion_logs: Vec::new(),
            activity_logs: Vec::new(),
            assessments: Vec::new(),
            biometric_days: Vec::new(),
            reading_materials: ReadingStatus::default(),
            goals: Vec::new(),
            messages: Vec::new(),
            next_entry_seq: 0,
        }
    }
}
