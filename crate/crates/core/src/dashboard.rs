//! Onboarding survey, widget recommendation and dashboard layout.
//!
//! The flow has three stages: the therapist declares needs in an
//! [`OnboardingConfig`], [`recommend_widgets`] maps those needs through the
//! declarative [`WidgetCatalog`], and [`apply_selection`] turns the chosen
//! widgets into a persisted [`DashboardLayout`] that [`set_display_mode`]
//! filters for clinician or in-session viewing.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::record::{labelled_enum, HomeworkType, Instrument, RecordError, RecordStore};

pub const CONFIG_VERSION: u32 = 1;
pub const LAYOUT_VERSION: u32 = 1;

const CONFIG_NAMESPACE: &str = "config";
const THERAPIST_KEY: &str = "therapist";
const LAYOUT_NAMESPACE: &str = "layouts";
const DEFAULT_LAYOUT_NAMESPACE: &str = "layout_defaults";

labelled_enum! {
    FocusArea {
        CognitiveRestructuring => "cognitive_restructuring",
        Mindfulness => "mindfulness",
        BehavioralActivation => "behavioral_activation",
        ExposureTherapy => "exposure_therapy",
        JournalingThoughtRecords => "journaling_thought_records",
    }
}

impl FocusArea {
    /// Homework types that produce evidence for this focus area.
    pub fn homework_types(&self) -> &'static [HomeworkType] {
        match self {
            FocusArea::CognitiveRestructuring => &[HomeworkType::ThoughtRecord],
            FocusArea::Mindfulness => &[HomeworkType::MindfulnessPractice, HomeworkType::RelaxationBreathing],
            FocusArea::BehavioralActivation => &[HomeworkType::ActivityScheduling, HomeworkType::BehavioralExperiment],
            FocusArea::ExposureTherapy => &[HomeworkType::ExposureTask],
            FocusArea::JournalingThoughtRecords => {
                &[HomeworkType::Journaling, HomeworkType::ThoughtRecord, HomeworkType::GratitudeJournal]
            }
            FocusArea::Other(_) => &[],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SummaryLevel {
    #[serde(rename = "Basic Overview", alias = "basic")]
    BasicOverview,
    #[serde(rename = "Detailed Analysis", alias = "detailed")]
    DetailedAnalysis,
    #[serde(rename = "No AI Summary", alias = "none")]
    NoAiSummary,
}

impl SummaryLevel {
    pub const ALL: [SummaryLevel; 3] =
        [SummaryLevel::BasicOverview, SummaryLevel::DetailedAnalysis, SummaryLevel::NoAiSummary];

    pub fn label(self) -> &'static str {
        match self {
            SummaryLevel::BasicOverview => "Basic Overview",
            SummaryLevel::DetailedAnalysis => "Detailed Analysis",
            SummaryLevel::NoAiSummary => "No AI Summary",
        }
    }
}

impl FromStr for SummaryLevel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "basic" | "Basic Overview" => Ok(SummaryLevel::BasicOverview),
            "detailed" | "Detailed Analysis" => Ok(SummaryLevel::DetailedAnalysis),
            "none" | "No AI Summary" => Ok(SummaryLevel::NoAiSummary),
            other => Err(format!("unknown summary level `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SummaryPriority {
    Reading,
    HomeworkTrends,
    MentalHealth,
    Journaling,
    Biometric,
    Risk,
}

impl SummaryPriority {
    pub const ALL: [SummaryPriority; 6] = [
        SummaryPriority::Reading,
        SummaryPriority::HomeworkTrends,
        SummaryPriority::MentalHealth,
        SummaryPriority::Journaling,
        SummaryPriority::Biometric,
        SummaryPriority::Risk,
    ];

    pub fn label(self) -> &'static str {
        match self {
            SummaryPriority::Reading => "reading",
            SummaryPriority::HomeworkTrends => "homework_trends",
            SummaryPriority::MentalHealth => "mental_health",
            SummaryPriority::Journaling => "journaling",
            SummaryPriority::Biometric => "biometric",
            SummaryPriority::Risk => "risk",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HomeworkFrequency {
    Daily,
    Weekly,
    None,
}

impl HomeworkFrequency {
    pub const ALL: [HomeworkFrequency; 3] = [HomeworkFrequency::Daily, HomeworkFrequency::Weekly, HomeworkFrequency::None];

    pub fn label(self) -> &'static str {
        match self {
            HomeworkFrequency::Daily => "daily",
            HomeworkFrequency::Weekly => "weekly",
            HomeworkFrequency::None => "none",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChatAbility {
    RawDataExtraction,
    DetailedExplanations,
}

impl ChatAbility {
    pub const ALL: [ChatAbility; 2] = [ChatAbility::RawDataExtraction, ChatAbility::DetailedExplanations];

    pub fn label(self) -> &'static str {
        match self {
            ChatAbility::RawDataExtraction => "raw_data_extraction",
            ChatAbility::DetailedExplanations => "detailed_explanations",
        }
    }
}

/// Clinical information the therapist wants displayed on the dashboard.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClinicalInfo {
    HomeworkProgress,
    HealthSignals,
    AssessmentResults,
}

impl ClinicalInfo {
    pub const ALL: [ClinicalInfo; 3] =
        [ClinicalInfo::HomeworkProgress, ClinicalInfo::HealthSignals, ClinicalInfo::AssessmentResults];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SideFunction {
    Messaging,
    TherapyGoals,
}

impl SideFunction {
    pub const ALL: [SideFunction; 2] = [SideFunction::Messaging, SideFunction::TherapyGoals];
}

fn config_version() -> u32 {
    CONFIG_VERSION
}

/// Therapist preferences gathered by the onboarding survey.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OnboardingConfig {
    #[serde(default = "config_version")]
    pub version: u32,
    #[serde(default)]
    pub focus_areas: BTreeSet<FocusArea>,
    #[serde(default)]
    pub homework_types: BTreeSet<HomeworkType>,
    #[serde(default)]
    pub assessments: BTreeSet<Instrument>,
    pub summary_level: SummaryLevel,
    #[serde(default)]
    pub summary_priorities: Vec<SummaryPriority>,
    pub homework_summary: HomeworkFrequency,
    #[serde(default, rename = "aiChatAbilities")]
    pub ai_chat_abilities: BTreeSet<ChatAbility>,
    #[serde(default)]
    pub clinical_info_display: BTreeSet<ClinicalInfo>,
    #[serde(default)]
    pub side_functions: BTreeSet<SideFunction>,
    /// Expected submissions per ISO week, by homework type.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub expected_cadence: BTreeMap<HomeworkType, u32>,
}

impl Default for OnboardingConfig {
    fn default() -> Self {
        Self {
            version: CONFIG_VERSION,
            focus_areas: BTreeSet::new(),
            homework_types: BTreeSet::new(),
            assessments: BTreeSet::new(),
            summary_level: SummaryLevel::DetailedAnalysis,
            summary_priorities: Vec::new(),
            homework_summary: HomeworkFrequency::Weekly,
            ai_chat_abilities: BTreeSet::new(),
            clinical_info_display: BTreeSet::new(),
            side_functions: BTreeSet::new(),
            expected_cadence: BTreeMap::new(),
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ConfigError {
    #[error("summary priority `{0}` is listed more than once")]
    DuplicatePriority(&'static str),
    #[error("unsupported config version {0}")]
    Version(u32),
}

impl OnboardingConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.version != CONFIG_VERSION {
            return Err(ConfigError::Version(self.version));
        }
        let mut seen = BTreeSet::new();
        for p in &self.summary_priorities {
            if !seen.insert(*p) {
                return Err(ConfigError::DuplicatePriority(p.label()));
            }
        }
        Ok(())
    }

    /// Homework types named directly or implied by a focus area.
    pub fn emphasized_homework_types(&self) -> BTreeSet<HomeworkType> {
        let mut out = self.homework_types.clone();
        for area in &self.focus_areas {
            out.extend(area.homework_types().iter().cloned());
        }
        out
    }

    pub fn has_ability(&self, ability: ChatAbility) -> bool {
        self.ai_chat_abilities.contains(&ability)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WidgetKind {
    HomeworkOverview,
    HealthSignals,
    AssessmentTracker,
    GenaiSummary,
    GenaiChat,
    Messaging,
    TherapyGoals,
}

impl WidgetKind {
    pub fn is_ai(self) -> bool {
        matches!(self, WidgetKind::GenaiSummary | WidgetKind::GenaiChat)
    }
}

/// Condition under which a catalog widget is recommended.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Requirement {
    Always,
    AssessmentsSelected,
    SummaryEnabled,
    ChatAbilitySelected,
    ClinicalInfo(ClinicalInfo),
    SideFunction(SideFunction),
    AnyOf(Vec<Requirement>),
}

impl Requirement {
    pub fn is_met(&self, config: &OnboardingConfig) -> bool {
        match self {
            Requirement::Always => true,
            Requirement::AssessmentsSelected => !config.assessments.is_empty(),
            Requirement::SummaryEnabled => config.summary_level != SummaryLevel::NoAiSummary,
            Requirement::ChatAbilitySelected => !config.ai_chat_abilities.is_empty(),
            Requirement::ClinicalInfo(info) => config.clinical_info_display.contains(info),
            Requirement::SideFunction(f) => config.side_functions.contains(f),
            Requirement::AnyOf(options) => options.iter().any(|r| r.is_met(config)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WidgetCatalogEntry {
    pub widget_id: String,
    pub kind: WidgetKind,
    pub title: String,
    pub requires: Requirement,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WidgetCatalog {
    pub version: u32,
    pub widgets: Vec<WidgetCatalogEntry>,
}

const DEFAULT_CATALOG: &str = include_str!("../templates/widgets.v1.json");

impl WidgetCatalog {
    pub fn builtin() -> Self {
        serde_json::from_str(DEFAULT_CATALOG).expect("bundled widget catalog is valid")
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    /// Widgets whose requirement the config meets, in catalog order.
    pub fn recommend(&self, config: &OnboardingConfig) -> Vec<WidgetCatalogEntry> {
        let mut seen = BTreeSet::new();
        self.widgets
            .iter()
            .filter(|w| w.requires.is_met(config) && seen.insert(w.widget_id.clone()))
            .cloned()
            .collect()
    }
}

impl Default for WidgetCatalog {
    fn default() -> Self {
        Self::builtin()
    }
}

/// Recommends widgets from the built-in catalog.
pub fn recommend_widgets(config: &OnboardingConfig) -> Vec<WidgetCatalogEntry> {
    WidgetCatalog::builtin().recommend(config)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DisplayMode {
    #[default]
    Clinician,
    Session,
}

impl fmt::Display for DisplayMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DisplayMode::Clinician => "clinician",
            DisplayMode::Session => "session",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WidgetInstance {
    pub widget_id: String,
    pub kind: WidgetKind,
    pub title: String,
    /// Default visibility in session mode.
    pub session_visible: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DisplayState {
    pub mode: DisplayMode,
    /// Per-widget session-mode visibility overrides.
    #[serde(default)]
    pub overrides: BTreeMap<String, bool>,
}

fn layout_version() -> u32 {
    LAYOUT_VERSION
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DashboardLayout {
    #[serde(default = "layout_version")]
    pub version: u32,
    pub widgets: Vec<WidgetInstance>,
    #[serde(default)]
    pub display: DisplayState,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum DashboardError {
    #[error("widget `{0}` is not among the recommendations")]
    UnknownWidget(String),
    #[error("widget `{0}` chosen more than once")]
    DuplicateWidget(String),
}

/// Builds a layout of the chosen widgets in the given order. AI widgets
/// start hidden in session mode.
pub fn apply_selection(
    recommendations: &[WidgetCatalogEntry],
    chosen: &[String],
) -> Result<DashboardLayout, DashboardError> {
    let mut seen = BTreeSet::new();
    let mut widgets = Vec::with_capacity(chosen.len());
    for id in chosen {
        let entry = recommendations
            .iter()
            .find(|w| &w.widget_id == id)
            .ok_or_else(|| DashboardError::UnknownWidget(id.clone()))?;
        if !seen.insert(id.as_str()) {
            return Err(DashboardError::DuplicateWidget(id.clone()));
        }
        widgets.push(WidgetInstance {
            widget_id: entry.widget_id.clone(),
            kind: entry.kind,
            title: entry.title.clone(),
            session_visible: !entry.kind.is_ai(),
        });
    }
    Ok(DashboardLayout { version: LAYOUT_VERSION, widgets, display: DisplayState::default() })
}

/// Widgets visible in `mode`. Clinician mode shows the whole layout;
/// session mode applies the defaults and then the overrides.
pub fn set_display_mode(
    layout: &DashboardLayout,
    mode: DisplayMode,
    overrides: &BTreeMap<String, bool>,
) -> Vec<WidgetInstance> {
    match mode {
        DisplayMode::Clinician => layout.widgets.clone(),
        DisplayMode::Session => layout
            .widgets
            .iter()
            .filter(|w| overrides.get(&w.widget_id).copied().unwrap_or(w.session_visible))
            .cloned()
            .collect(),
    }
}

impl DashboardLayout {
    pub fn visible(&self) -> Vec<WidgetInstance> {
        set_display_mode(self, self.display.mode, &self.display.overrides)
    }
}

pub fn load_config(store: &RecordStore) -> Result<OnboardingConfig, RecordError> {
    Ok(store.get_document(CONFIG_NAMESPACE, THERAPIST_KEY)?.unwrap_or_default())
}

pub fn save_config(store: &RecordStore, config: &OnboardingConfig) -> Result<(), RecordError> {
    store.put_document(CONFIG_NAMESPACE, THERAPIST_KEY, config)
}

/// The client's layout, falling back to the therapist's global default.
pub fn load_layout(store: &RecordStore, client: &str) -> Result<Option<DashboardLayout>, RecordError> {
    match store.get_document(LAYOUT_NAMESPACE, client)? {
        Some(layout) => Ok(Some(layout)),
        None => store.get_document(DEFAULT_LAYOUT_NAMESPACE, THERAPIST_KEY),
    }
}

pub fn save_layout(store: &RecordStore, client: &str, layout: &DashboardLayout) -> Result<(), RecordError> {
    store.put_document(LAYOUT_NAMESPACE, client, layout)
}

pub fn save_default_layout(store: &RecordStore, layout: &DashboardLayout) -> Result<(), RecordError> {
    store.put_document(DEFAULT_LAYOUT_NAMESPACE, THERAPIST_KEY, layout)
}
