//! Glanceable widget data: completion trends and streaks, before/after mood
//! series, assessment severity, biometric aggregates and reading status.
//!
//! Every function here is a pure function of its inputs. Days are UTC
//! calendar dates; weeks are ISO weeks (Monday start).

use std::collections::BTreeMap;

use chrono::{DateTime, Datelike, Duration, NaiveDate, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::record::{AssessmentResult, ClientRecord, EntryRef, HomeworkType, Instrument, ReadingStatus};

/// Literal rendered for an empty biometric window.
pub const NO_DATA: &str = "No data";

#[derive(Debug, Error, PartialEq, Eq)]
pub enum AnalyticsError {
    #[error("window end {end} precedes start {start}")]
    InvalidWindow { start: NaiveDate, end: NaiveDate },
    #[error("{thresholds} item thresholds for {items} assessment items")]
    ThresholdMismatch { items: usize, thresholds: usize },
}

/// Inclusive range of calendar days with `start <= end`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DateWindow {
    pub start: NaiveDate,
    pub end: NaiveDate,
}

impl DateWindow {
    pub fn new(start: NaiveDate, end: NaiveDate) -> Result<Self, AnalyticsError> {
        if end < start {
            return Err(AnalyticsError::InvalidWindow { start, end });
        }
        Ok(Self { start, end })
    }

    /// The `days`-long window ending on `end` (`days >= 1`).
    pub fn ending(end: NaiveDate, days: u32) -> Self {
        let days = days.max(1);
        Self { start: end - Duration::days(i64::from(days) - 1), end }
    }

    pub fn single(day: NaiveDate) -> Self {
        Self { start: day, end: day }
    }

    /// Smallest window covering every entry of the record.
    pub fn covering(record: &ClientRecord) -> Option<Self> {
        let entries = record.entries();
        let first = entries.first()?.date();
        let last = entries.iter().map(|e| e.date()).max()?;
        Some(Self { start: first, end: last })
    }

    pub fn len_days(&self) -> u32 {
        u32::try_from((self.end - self.start).num_days() + 1).expect("window length fits u32")
    }

    pub fn contains(&self, date: NaiveDate) -> bool {
        self.start <= date && date <= self.end
    }

    pub fn contains_ts(&self, ts: DateTime<Utc>) -> bool {
        self.contains(ts.date_naive())
    }

    pub fn days(&self) -> impl Iterator<Item = NaiveDate> + '_ {
        self.start.iter_days().take_while(move |d| *d <= self.end)
    }

    /// The window of equal length immediately preceding this one.
    pub fn previous(&self) -> Self {
        let len = i64::from(self.len_days());
        Self { start: self.start - Duration::days(len), end: self.start - Duration::days(1) }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DayCount {
    pub date: NaiveDate,
    pub count: u32,
}

/// Submissions inside the window falling in one ISO week.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WeekCount {
    pub iso_year: i32,
    pub iso_week: u32,
    pub week_start: NaiveDate,
    pub count: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DateRange {
    pub start: NaiveDate,
    pub end: NaiveDate,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CompletionSeries {
    pub window: DateWindow,
    pub daily: Vec<DayCount>,
    pub weekly: Vec<WeekCount>,
    pub total: u32,
    pub longest_streak: u32,
    /// Streak ending on the window's last day; zero if that day is empty.
    pub current_streak: u32,
    pub gaps: Vec<DateRange>,
    pub per_type: BTreeMap<HomeworkType, u32>,
}

/// Monday of the ISO week containing `date`.
pub fn iso_week_start(date: NaiveDate) -> NaiveDate {
    date - Duration::days(i64::from(date.weekday().num_days_from_monday()))
}

/// Per-day submission counts, streaks and gaps over `window`.
///
/// A streak is a run of consecutive days each with at least one
/// submission of any type.
pub fn completion_trend(record: &ClientRecord, window: DateWindow) -> CompletionSeries {
    let mut by_day: BTreeMap<NaiveDate, u32> = BTreeMap::new();
    let mut per_type: BTreeMap<HomeworkType, u32> = BTreeMap::new();
    for sub in record.submissions.iter().filter(|s| window.contains_ts(s.submitted_at)) {
        *by_day.entry(sub.submitted_at.date_naive()).or_default() += 1;
        *per_type.entry(sub.homework_type.clone()).or_default() += 1;
    }

    let daily: Vec<DayCount> = window
        .days()
        .map(|date| DayCount { date, count: by_day.get(&date).copied().unwrap_or(0) })
        .collect();

    let mut weekly: Vec<WeekCount> = Vec::new();
    let mut longest = 0u32;
    let mut run = 0u32;
    let mut gaps = Vec::new();
    let mut gap_start: Option<NaiveDate> = None;
    for day in &daily {
        let week_start = iso_week_start(day.date);
        match weekly.last_mut() {
            Some(w) if w.week_start == week_start => w.count += day.count,
            _ => {
                let iso = day.date.iso_week();
                weekly.push(WeekCount { iso_year: iso.year(), iso_week: iso.week(), week_start, count: day.count });
            }
        }
        if day.count > 0 {
            run += 1;
            longest = longest.max(run);
            if let Some(start) = gap_start.take() {
                gaps.push(DateRange { start, end: day.date - Duration::days(1) });
            }
        } else {
            run = 0;
            gap_start.get_or_insert(day.date);
        }
    }
    if let Some(start) = gap_start {
        gaps.push(DateRange { start, end: window.end });
    }

    CompletionSeries {
        window,
        total: daily.iter().map(|d| d.count).sum(),
        daily,
        weekly,
        longest_streak: longest,
        current_streak: run,
        gaps,
        per_type,
    }
}

/// Expected vs completed submissions of one homework type in one ISO week.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CadenceWeek {
    pub week_start: NaiveDate,
    pub homework_type: HomeworkType,
    pub expected: u32,
    pub completed: u32,
}

impl CadenceWeek {
    pub fn shortfall(&self) -> u32 {
        self.expected.saturating_sub(self.completed)
    }
}

/// Compares submissions against an expected weekly cadence per homework
/// type. Weeks only partly inside `window` count only in-window days.
pub fn cadence_report(
    record: &ClientRecord,
    window: DateWindow,
    cadence: &BTreeMap<HomeworkType, u32>,
) -> Vec<CadenceWeek> {
    let mut weeks: Vec<NaiveDate> = window.days().map(iso_week_start).collect();
    weeks.dedup();
    let mut out = Vec::with_capacity(weeks.len() * cadence.len());
    for week_start in weeks {
        for (ty, expected) in cadence {
            let completed = record
                .submissions
                .iter()
                .filter(|s| {
                    let d = s.submitted_at.date_naive();
                    &s.homework_type == ty && window.contains(d) && iso_week_start(d) == week_start
                })
                .count();
            out.push(CadenceWeek {
                week_start,
                homework_type: ty.clone(),
                expected: *expected,
                completed: u32::try_from(completed).unwrap_or(u32::MAX),
            });
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MoodDelta {
    pub entry_id: String,
    pub submitted_at: DateTime<Utc>,
    pub homework_type: HomeworkType,
    pub mood_before: i64,
    pub mood_after: i64,
    pub delta: i64,
}

/// Before/after mood pairs for submissions in `window`, optionally limited
/// to some homework types, ordered by submission time.
pub fn mood_delta_series(
    record: &ClientRecord,
    window: DateWindow,
    homework_types: Option<&[HomeworkType]>,
) -> Vec<MoodDelta> {
    record
        .submissions
        .iter()
        .filter(|s| window.contains_ts(s.submitted_at))
        .filter(|s| homework_types.is_none_or(|types| types.contains(&s.homework_type)))
        .map(|s| MoodDelta {
            entry_id: s.entry_id.clone(),
            submitted_at: s.submitted_at,
            homework_type: s.homework_type.clone(),
            mood_before: s.mood_before,
            mood_after: s.mood_after,
            delta: s.mood_delta(),
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ColorHint {
    Neutral,
    Alert,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TotalBand {
    Below,
    AtOrAbove,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ItemSeverity {
    pub item_text: String,
    pub score: i64,
    pub threshold: Option<i64>,
    pub exceeded: bool,
    pub color_hint: ColorHint,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeverityBands {
    pub entry_id: String,
    pub instrument: Instrument,
    pub items: Vec<ItemSeverity>,
    pub total: i64,
    pub total_threshold: Option<i64>,
    pub total_band: TotalBand,
}

/// Flags assessment items whose score strictly exceeds the item threshold.
///
/// Exceedance is strict (`score > threshold`): a score equal to its cutoff
/// is not flagged, even though many instruments publish `>=` cutoffs. The
/// total band compares with `>=` against the total threshold.
pub fn assessment_severity(result: &AssessmentResult) -> Result<SeverityBands, AnalyticsError> {
    let thresholds = &result.thresholds.items;
    if !thresholds.is_empty() && thresholds.len() != result.items.len() {
        return Err(AnalyticsError::ThresholdMismatch { items: result.items.len(), thresholds: thresholds.len() });
    }
    let items = result
        .items
        .iter()
        .enumerate()
        .map(|(i, item)| {
            let threshold = thresholds.get(i).copied();
            let exceeded = threshold.is_some_and(|t| item.score > t);
            ItemSeverity {
                item_text: item.item_text.clone(),
                score: item.score,
                threshold,
                exceeded,
                color_hint: if exceeded { ColorHint::Alert } else { ColorHint::Neutral },
            }
        })
        .collect();
    let total_threshold = if thresholds.is_empty() { None } else { result.thresholds.total };
    let total_band = match total_threshold {
        Some(t) if result.total >= t => TotalBand::AtOrAbove,
        _ => TotalBand::Below,
    };
    Ok(SeverityBands {
        entry_id: result.entry_id.clone(),
        instrument: result.instrument.clone(),
        items,
        total: result.total,
        total_threshold,
        total_band,
    })
}

/// Severity bands of every assessment administered inside `window`.
pub fn assessment_overview(record: &ClientRecord, window: DateWindow) -> Result<Vec<SeverityBands>, AnalyticsError> {
    record
        .assessments
        .iter()
        .filter(|a| window.contains_ts(a.administered_at))
        .map(assessment_severity)
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub mean: f64,
    pub min: f64,
    pub max: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BiometricMetrics {
    pub sleep_hours: MetricSummary,
    pub resting_heart_rate_bpm: MetricSummary,
    pub activity_steps: MetricSummary,
    pub mindfulness_minutes: MetricSummary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiometricAggregates {
    pub window: DateWindow,
    pub days: usize,
    pub entry_ids: Vec<String>,
    pub metrics: Option<BiometricMetrics>,
    /// One line per metric, or exactly [`NO_DATA`].
    pub text: String,
}

fn summarize(values: impl Iterator<Item = f64>) -> Option<MetricSummary> {
    let mut n = 0usize;
    let (mut sum, mut min, mut max) = (0.0, f64::INFINITY, f64::NEG_INFINITY);
    for v in values {
        n += 1;
        sum += v;
        min = min.min(v);
        max = max.max(v);
    }
    (n > 0).then(|| MetricSummary { mean: sum / n as f64, min, max })
}

/// Mean, min and max of each biometric metric over the window's days.
pub fn biometric_aggregate(record: &ClientRecord, window: DateWindow) -> BiometricAggregates {
    let days: Vec<_> = record.biometric_days.iter().filter(|d| window.contains(d.date)).collect();
    let metrics = summarize(days.iter().map(|d| d.sleep_hours)).map(|sleep_hours| BiometricMetrics {
        sleep_hours,
        resting_heart_rate_bpm: summarize(days.iter().map(|d| d.resting_heart_rate_bpm as f64)).expect("non-empty"),
        activity_steps: summarize(days.iter().map(|d| d.activity_steps as f64)).expect("non-empty"),
        mindfulness_minutes: summarize(days.iter().map(|d| d.mindfulness_minutes as f64)).expect("non-empty"),
    });
    let text = match &metrics {
        None => NO_DATA.to_string(),
        Some(m) => [
            render_metric("sleep_hours", &m.sleep_hours, "hours"),
            render_metric("resting_heart_rate_bpm", &m.resting_heart_rate_bpm, "bpm"),
            render_metric("activity_steps", &m.activity_steps, "steps"),
            render_metric("mindfulness_minutes", &m.mindfulness_minutes, "minutes"),
        ]
        .join("\n"),
    };
    BiometricAggregates {
        window,
        days: days.len(),
        entry_ids: days.iter().map(|d| d.entry_id.clone()).collect(),
        metrics,
        text,
    }
}

/// `metric: mean X (min Y – max Z) unit`, two decimals.
pub fn render_metric(name: &str, m: &MetricSummary, unit: &str) -> String {
    format!("{name}: mean {:.2} (min {:.2} – max {:.2}) {unit}", m.mean, m.min, m.max)
}

/// Finished and unfinished reading materials, passed through unchanged.
pub fn reading_overview(record: &ClientRecord) -> ReadingStatus {
    record.reading_materials.clone()
}

/// Entries of the record whose date falls inside `window`.
pub fn entries_in<'a>(record: &'a ClientRecord, window: &DateWindow) -> Vec<EntryRef<'a>> {
    record.entries().into_iter().filter(|e| window.contains(e.date())).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::record::{AssessmentItem, BiometricDay, HomeworkSubmission, SubmissionBody, Thresholds, SCHEMA_VERSION};

    fn day(s: &str) -> NaiveDate {
        s.parse().unwrap()
    }

    fn submission(id: &str, date: &str, before: i64, after: i64) -> HomeworkSubmission {
        HomeworkSubmission {
            entry_id: id.into(),
            submitted_at: format!("{date}T10:00:00Z").parse().unwrap(),
            homework_type: HomeworkType::Journaling,
            duration_minutes: 10,
            self_rated_quality: 3,
            mood_before: before,
            mood_after: after,
            body: SubmissionBody::Text("wrote a page".into()),
        }
    }

    fn record_with(subs: Vec<HomeworkSubmission>) -> ClientRecord {
        let mut r = ClientRecord::empty("t", "T");
        assert_eq!(r.schema_version, SCHEMA_VERSION);
        r.submissions = subs;
        r
    }

    #[test]
    fn three_day_streak_then_silence() {
        let r = record_with(vec![
            submission("a", "2025-01-01", 3, 4),
            submission("b", "2025-01-02", 3, 4),
            submission("c", "2025-01-03", 3, 4),
        ]);
        let s = completion_trend(&r, DateWindow::new(day("2025-01-01"), day("2025-01-06")).unwrap());
        assert_eq!(s.longest_streak, 3);
        assert_eq!(s.current_streak, 0);
        assert_eq!(s.total, 3);
        assert_eq!(s.gaps, vec![DateRange { start: day("2025-01-04"), end: day("2025-01-06") }]);
    }

    #[test]
    fn empty_window_is_all_zero() {
        let s = completion_trend(&record_with(vec![]), DateWindow::single(day("2025-02-01")));
        assert_eq!(s.total, 0);
        assert_eq!(s.longest_streak, 0);
        assert_eq!(s.daily, vec![DayCount { date: day("2025-02-01"), count: 0 }]);
    }

    #[test]
    fn inverted_window_rejected() {
        assert!(matches!(
            DateWindow::new(day("2025-02-02"), day("2025-02-01")),
            Err(AnalyticsError::InvalidWindow { .. })
        ));
    }

    #[test]
    fn mood_delta_is_after_minus_before() {
        let r = record_with(vec![submission("a", "2025-01-01", 4, 7)]);
        let series = mood_delta_series(&r, DateWindow::single(day("2025-01-01")), None);
        assert_eq!(series.len(), 1);
        assert_eq!(series[0].delta, 3);
        assert!(mood_delta_series(&record_with(vec![]), DateWindow::single(day("2025-01-01")), None).is_empty());
    }

    fn assessment(scores: &[i64], thresholds: Vec<i64>) -> AssessmentResult {
        AssessmentResult {
            entry_id: "x".into(),
            administered_at: "2025-01-01T00:00:00Z".parse().unwrap(),
            instrument: Instrument::Gad7,
            items: scores.iter().map(|&score| AssessmentItem { item_text: "item".into(), score }).collect(),
            total: scores.iter().sum(),
            thresholds: Thresholds { items: thresholds, total: Some(5) },
        }
    }

    #[test]
    fn exceedance_is_strict() {
        let bands = assessment_severity(&assessment(&[3, 2], vec![2, 2])).unwrap();
        assert!(bands.items[0].exceeded);
        assert_eq!(bands.items[0].color_hint, ColorHint::Alert);
        assert!(!bands.items[1].exceeded);
        assert_eq!(bands.total_band, TotalBand::AtOrAbove);
    }

    #[test]
    fn empty_thresholds_flag_nothing() {
        let bands = assessment_severity(&assessment(&[9, 9], vec![])).unwrap();
        assert!(bands.items.iter().all(|i| !i.exceeded));
        assert_eq!(bands.total_band, TotalBand::Below);
    }

    #[test]
    fn wrong_threshold_arity() {
        assert_eq!(
            assessment_severity(&assessment(&[1, 2, 3], vec![1])),
            Err(AnalyticsError::ThresholdMismatch { items: 3, thresholds: 1 })
        );
    }

    #[test]
    fn biometric_singleton_and_empty() {
        let mut r = record_with(vec![]);
        let w = DateWindow::single(day("2025-01-01"));
        assert_eq!(biometric_aggregate(&r, w).text, "No data");
        r.biometric_days.push(BiometricDay {
            entry_id: "b".into(),
            date: day("2025-01-01"),
            sleep_hours: 7.5,
            resting_heart_rate_bpm: 60,
            activity_steps: 1000,
            mindfulness_minutes: 5,
        });
        let agg = biometric_aggregate(&r, w);
        let sleep = agg.metrics.unwrap().sleep_hours;
        assert_eq!((sleep.mean, sleep.min, sleep.max), (7.5, 7.5, 7.5));
        assert_eq!(agg.text.lines().next().unwrap(), "sleep_hours: mean 7.50 (min 7.50 – max 7.50) hours");
        assert_eq!(agg.text.lines().count(), 4);
    }

    #[test]
    fn reading_is_pass_through() {
        let mut r = record_with(vec![]);
        assert_eq!(reading_overview(&r), ReadingStatus::default());
        r.reading_materials.finished.push("Workbook A".into());
        assert_eq!(reading_overview(&r).finished, vec!["Workbook A".to_string()]);
        assert!(reading_overview(&r).not_finished.is_empty());
    }

    #[test]
    fn cadence_counts_shortfall() {
        let r = record_with(vec![submission("a", "2025-01-06", 3, 4)]);
        let cadence = BTreeMap::from([(HomeworkType::Journaling, 3)]);
        let weeks = cadence_report(&r, DateWindow::new(day("2025-01-06"), day("2025-01-12")).unwrap(), &cadence);
        assert_eq!(weeks.len(), 1);
        assert_eq!(weeks[0].completed, 1);
        assert_eq!(weeks[0].shortfall(), 2);
    }
}
