//! Random valid client records and independent brute-force oracles.
#![allow(dead_code)]

use chrono::{Datelike, Duration, NaiveDate, TimeZone, Utc};
use homeview_core::record::{
    ActivityBlock, ActivityLog, AssessmentItem, AssessmentResult, BiometricDay, ClientRecord, EmotionDescriptor,
    EmotionInterval, GoalStatus, HomeworkSubmission, HomeworkType, Instrument, Message, MessageDirection,
    ReadingStatus, SubmissionBody, serialize, validate_and_load, TherapyGoal, ThoughtRecord, Thresholds,
};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

pub const TYPES: [HomeworkType; 9] = [
    HomeworkType::ThoughtRecord,
    HomeworkType::Journaling,
    HomeworkType::GratitudeJournal,
    HomeworkType::MoodTracking,
    HomeworkType::RelaxationBreathing,
    HomeworkType::BehavioralExperiment,
    HomeworkType::ActivityScheduling,
    HomeworkType::ExposureTask,
    HomeworkType::MindfulnessPractice,
];

const WORDS: [&str; 12] = [
    "deadline", "friend", "walk", "exam", "call", "sleep", "meeting", "rain", "coffee", "email", "family", "gym",
];

pub fn day0() -> NaiveDate {
    NaiveDate::from_ymd_opt(2025, 1, 6).unwrap()
}

fn phrase(rng: &mut StdRng) -> String {
    let n = rng.random_range(2..6);
    (0..n).map(|_| WORDS[rng.random_range(0..WORDS.len())]).collect::<Vec<_>>().join(" ")
}

fn pick<T: Clone>(rng: &mut StdRng, items: &[T]) -> T {
    items[rng.random_range(0..items.len())].clone()
}

fn at(date: NaiveDate, rng: &mut StdRng) -> chrono::DateTime<Utc> {
    let t = date.and_hms_opt(rng.random_range(0..24), rng.random_range(0..60), rng.random_range(0..60)).unwrap();
    Utc.from_utc_datetime(&t)
}

/// A valid record spanning `days` days from `start`. Density varies by
/// seed so some records are sparse, some empty of a kind, some dense.
pub fn random_record(seed: u64, record_id: &str, start: NaiveDate, days: u32) -> ClientRecord {
    let mut rng = StdRng::seed_from_u64(seed);
    let mut r = ClientRecord::empty(record_id, format!("Client {seed}"));
    let density = rng.random_range(0.0..1.0f64);
    let mut n = 0u32;
    let mut id = |prefix: &str| {
        n += 1;
        format!("{prefix}{n}")
    };
    for d in 0..days {
        let date = start + Duration::days(i64::from(d));
        if rng.random_bool(density * 0.8) {
            for _ in 0..rng.random_range(1..4) {
                let homework_type = if rng.random_bool(0.05) {
                    HomeworkType::Other("art_therapy".into())
                } else {
                    pick(&mut rng, &TYPES)
                };
                let body = if homework_type == HomeworkType::ThoughtRecord {
                    SubmissionBody::ThoughtRecord(ThoughtRecord {
                        trigger_situation: phrase(&mut rng),
                        automatic_thought: phrase(&mut rng),
                        evidence: rng.random_bool(0.6).then(|| phrase(&mut rng)),
                        rational_response: phrase(&mut rng),
                    })
                } else {
                    SubmissionBody::Text(phrase(&mut rng))
                };
                r.submissions.push(HomeworkSubmission {
                    entry_id: id("s"),
                    submitted_at: at(date, &mut rng),
                    homework_type,
                    duration_minutes: rng.random_range(0..90),
                    self_rated_quality: rng.random_range(1..=5),
                    mood_before: rng.random_range(1..=10),
                    mood_after: rng.random_range(1..=10),
                    body,
                });
            }
        }
        for interval in EmotionInterval::ALL {
            if rng.random_bool(density * 0.5) {
                r.emotion_logs.push(homeview_core::record::EmotionLog {
                    entry_id: id("e"),
                    date,
                    interval,
                    descriptor: pick(
                        &mut rng,
                        &[
                            EmotionDescriptor::Energetic,
                            EmotionDescriptor::Overwhelmed,
                            EmotionDescriptor::Sleepy,
                            EmotionDescriptor::Enthusiastic,
                            EmotionDescriptor::Bored,
                            EmotionDescriptor::Relaxed,
                        ],
                    ),
                });
            }
        }
        for block in ActivityBlock::ALL {
            if rng.random_bool(density * 0.3) {
                r.activity_logs.push(ActivityLog { entry_id: id("a"), date, block, description: phrase(&mut rng) });
            }
        }
        if rng.random_bool(density) {
            r.biometric_days.push(BiometricDay {
                entry_id: id("b"),
                date,
                sleep_hours: f64::from(rng.random_range(0..=2400u32)) / 100.0 * rng.random_range(0.2..=1.0),
                resting_heart_rate_bpm: rng.random_range(40..110),
                activity_steps: rng.random_range(0..25_000),
                mindfulness_minutes: rng.random_range(0..90),
            });
        }
        if date.weekday() == chrono::Weekday::Mon && rng.random_bool(density.max(0.2)) {
            let instrument = pick(&mut rng, &[Instrument::Gad7, Instrument::Phq9, Instrument::Pcl, Instrument::Ocir]);
            let k = rng.random_range(1..10);
            let items: Vec<AssessmentItem> = (0..k)
                .map(|i| AssessmentItem { item_text: format!("item {i}"), score: rng.random_range(0..=4) })
                .collect();
            let thresholds = if rng.random_bool(0.7) {
                Thresholds {
                    items: (0..k).map(|_| rng.random_range(0..=4)).collect(),
                    total: rng.random_bool(0.8).then(|| rng.random_range(0..=4 * k as i64)),
                }
            } else {
                Thresholds::default()
            };
            r.assessments.push(AssessmentResult {
                entry_id: id("q"),
                administered_at: at(date, &mut rng),
                instrument,
                total: items.iter().map(|i| i.score).sum(),
                items,
                thresholds,
            });
        }
    }
    if rng.random_bool(0.7) {
        r.reading_materials = ReadingStatus {
            finished: (0..rng.random_range(0..3)).map(|i| format!("Chapter {i}")).collect(),
            not_finished: (0..rng.random_range(0..3)).map(|i| format!("Handout {i}")).collect(),
        };
    }
    for _ in 0..rng.random_range(0..3) {
        r.goals.push(TherapyGoal {
            goal_id: id("g"),
            text: phrase(&mut rng),
            created_at: at(start, &mut rng),
            status: pick(&mut rng, &[GoalStatus::Active, GoalStatus::Achieved, GoalStatus::Revised]),
        });
    }
    for _ in 0..rng.random_range(0..3) {
        r.messages.push(Message {
            message_id: id("m"),
            sent_at: at(start + Duration::days(i64::from(rng.random_range(0..days))), &mut rng),
            direction: MessageDirection::ToClient,
            text: phrase(&mut rng),
        });
    }
    // Round-trip through the loader: validates and sorts.
    validate_and_load(&serialize(&r)).expect("generator emits valid records")
}

pub mod oracle {
    //! Direct restatements of the analytics definitions, written for
    //! clarity over speed.

    use std::collections::BTreeMap;

    use chrono::{Datelike, Duration, NaiveDate};
    use homeview_core::record::{AssessmentResult, ClientRecord, HomeworkType};

    pub fn days(start: NaiveDate, end: NaiveDate) -> Vec<NaiveDate> {
        let mut out = Vec::new();
        let mut d = start;
        while d <= end {
            out.push(d);
            d += Duration::days(1);
        }
        out
    }

    pub fn count_on(record: &ClientRecord, day: NaiveDate) -> u32 {
        record.submissions.iter().filter(|s| s.submitted_at.date_naive() == day).count() as u32
    }

    /// Length of the run of non-empty days ending on `day`.
    fn run_ending(record: &ClientRecord, start: NaiveDate, day: NaiveDate) -> u32 {
        let mut n = 0;
        let mut d = day;
        while d >= start && count_on(record, d) > 0 {
            n += 1;
            d -= Duration::days(1);
        }
        n
    }

    pub fn longest_streak(record: &ClientRecord, start: NaiveDate, end: NaiveDate) -> u32 {
        days(start, end).into_iter().map(|d| run_ending(record, start, d)).max().unwrap_or(0)
    }

    pub fn current_streak(record: &ClientRecord, start: NaiveDate, end: NaiveDate) -> u32 {
        run_ending(record, start, end)
    }

    /// Maximal runs of empty days as inclusive (start, end) pairs.
    pub fn gaps(record: &ClientRecord, start: NaiveDate, end: NaiveDate) -> Vec<(NaiveDate, NaiveDate)> {
        let empty = |d: NaiveDate| d >= start && d <= end && count_on(record, d) == 0;
        days(start, end)
            .into_iter()
            .filter(|&d| empty(d) && !empty(d - Duration::days(1)))
            .map(|s| {
                let mut e = s;
                while empty(e + Duration::days(1)) {
                    e += Duration::days(1);
                }
                (s, e)
            })
            .collect()
    }

    /// Counts keyed by (ISO year, ISO week) in window order.
    pub fn weekly(record: &ClientRecord, start: NaiveDate, end: NaiveDate) -> Vec<((i32, u32), u32)> {
        let mut out: Vec<((i32, u32), u32)> = Vec::new();
        for d in days(start, end) {
            let key = (d.iso_week().year(), d.iso_week().week());
            let c = count_on(record, d);
            match out.iter_mut().find(|(k, _)| *k == key) {
                Some((_, v)) => *v += c,
                None => out.push((key, c)),
            }
        }
        out
    }

    pub fn per_type(record: &ClientRecord, start: NaiveDate, end: NaiveDate) -> BTreeMap<HomeworkType, u32> {
        let mut out = BTreeMap::new();
        for s in &record.submissions {
            let d = s.submitted_at.date_naive();
            if d >= start && d <= end {
                *out.entry(s.homework_type.clone()).or_insert(0) += 1;
            }
        }
        out
    }

    /// (entry id, delta) pairs sorted by submission time.
    pub fn mood_deltas(record: &ClientRecord, start: NaiveDate, end: NaiveDate) -> Vec<(String, i64)> {
        let mut subs: Vec<_> = record
            .submissions
            .iter()
            .filter(|s| (start..=end).contains(&s.submitted_at.date_naive()))
            .collect();
        subs.sort_by_key(|s| (s.submitted_at, s.entry_id.clone()));
        subs.iter().map(|s| (s.entry_id.clone(), s.mood_after - s.mood_before)).collect()
    }

    /// Per-item exceedance flags and whether the total reaches its cutoff.
    pub fn severity(a: &AssessmentResult) -> (Vec<bool>, bool) {
        let t = &a.thresholds.items;
        let flags = (0..a.items.len()).map(|i| !t.is_empty() && a.items[i].score > t[i]).collect();
        let total = !t.is_empty() && a.thresholds.total.is_some_and(|c| a.total >= c);
        (flags, total)
    }

    /// (mean, min, max), mean accumulated in sorted order.
    pub fn stats(mut values: Vec<f64>) -> Option<(f64, f64, f64)> {
        if values.is_empty() {
            return None;
        }
        values.sort_by(f64::total_cmp);
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        Some((mean, values[0], values[values.len() - 1]))
    }
}

pub mod checks {
    //! Comparisons shared by the property suites and the acceptance run.
    //! Each returns the first discrepancy found.

    use homeview_core::analytics::{
        assessment_overview, biometric_aggregate, completion_trend, mood_delta_series, ColorHint, DateWindow, TotalBand,
    };
    use homeview_core::pipeline::ContextBundle;
    use homeview_core::record::{ClientRecord, READING_MATERIALS_ID};

    use super::oracle;

    /// Tolerance on decimal means; integer outputs must match exactly.
    pub const MEAN_TOLERANCE: f64 = 1e-9;

    fn ensure(cond: bool, what: impl FnOnce() -> String) -> Result<(), String> {
        if cond {
            Ok(())
        } else {
            Err(what())
        }
    }

    pub fn analytics(record: &ClientRecord, window: DateWindow) -> Result<(), String> {
        let (start, end) = (window.start, window.end);
        let id = &record.record_id;

        let series = completion_trend(record, window);
        let days = oracle::days(start, end);
        ensure(series.daily.len() == days.len(), || format!("{id}: daily length"))?;
        for (got, day) in series.daily.iter().zip(&days) {
            let want = oracle::count_on(record, *day);
            ensure(got.date == *day && got.count == want, || format!("{id}: {day} count {} != {want}", got.count))?;
        }
        let total: u32 = days.iter().map(|d| oracle::count_on(record, *d)).sum();
        ensure(series.total == total, || format!("{id}: total {} != {total}", series.total))?;
        let longest = oracle::longest_streak(record, start, end);
        ensure(series.longest_streak == longest, || format!("{id}: longest {} != {longest}", series.longest_streak))?;
        let current = oracle::current_streak(record, start, end);
        ensure(series.current_streak == current, || format!("{id}: current {} != {current}", series.current_streak))?;
        let gaps: Vec<_> = series.gaps.iter().map(|g| (g.start, g.end)).collect();
        ensure(gaps == oracle::gaps(record, start, end), || format!("{id}: gaps differ"))?;
        let weekly: Vec<_> = series.weekly.iter().map(|w| ((w.iso_year, w.iso_week), w.count)).collect();
        ensure(weekly == oracle::weekly(record, start, end), || format!("{id}: weekly differ"))?;
        ensure(series.per_type == oracle::per_type(record, start, end), || format!("{id}: per-type differ"))?;

        let moods: Vec<_> = mood_delta_series(record, window, None).into_iter().map(|m| (m.entry_id, m.delta)).collect();
        ensure(moods == oracle::mood_deltas(record, start, end), || format!("{id}: mood deltas differ"))?;

        let bands = assessment_overview(record, window).map_err(|e| format!("{id}: {e}"))?;
        let expected: Vec<_> = record
            .assessments
            .iter()
            .filter(|a| (start..=end).contains(&a.administered_at.date_naive()))
            .collect();
        ensure(bands.len() == expected.len(), || format!("{id}: assessment count"))?;
        for (band, a) in bands.iter().zip(expected) {
            let (flags, at_or_above) = oracle::severity(a);
            let got: Vec<bool> = band.items.iter().map(|i| i.exceeded).collect();
            ensure(got == flags, || format!("{id}: {} item flags", a.entry_id))?;
            ensure(
                band.items.iter().all(|i| (i.color_hint == ColorHint::Alert) == i.exceeded),
                || format!("{id}: {} colour hints", a.entry_id),
            )?;
            ensure((band.total_band == TotalBand::AtOrAbove) == at_or_above, || format!("{id}: {} total band", a.entry_id))?;
        }

        let agg = biometric_aggregate(record, window);
        let in_window: Vec<_> = record.biometric_days.iter().filter(|d| (start..=end).contains(&d.date)).collect();
        ensure(agg.days == in_window.len(), || format!("{id}: biometric days"))?;
        let ids: Vec<_> = in_window.iter().map(|d| d.entry_id.clone()).collect();
        ensure(agg.entry_ids == ids, || format!("{id}: biometric ids"))?;
        let metric = |name: &str, got: Option<(f64, f64, f64)>, values: Vec<f64>| -> Result<(), String> {
            match (got, oracle::stats(values)) {
                (None, None) => Ok(()),
                (Some(g), Some(w)) => ensure(
                    (g.0 - w.0).abs() <= MEAN_TOLERANCE && g.1 == w.1 && g.2 == w.2,
                    || format!("{id}: {name} {g:?} != {w:?}"),
                ),
                _ => Err(format!("{id}: {name} presence differs")),
            }
        };
        let m = agg.metrics;
        metric("sleep", m.map(|m| (m.sleep_hours.mean, m.sleep_hours.min, m.sleep_hours.max)), in_window.iter().map(|d| d.sleep_hours).collect())?;
        metric(
            "heart_rate",
            m.map(|m| (m.resting_heart_rate_bpm.mean, m.resting_heart_rate_bpm.min, m.resting_heart_rate_bpm.max)),
            in_window.iter().map(|d| d.resting_heart_rate_bpm as f64).collect(),
        )?;
        metric(
            "steps",
            m.map(|m| (m.activity_steps.mean, m.activity_steps.min, m.activity_steps.max)),
            in_window.iter().map(|d| d.activity_steps as f64).collect(),
        )?;
        metric(
            "mindfulness",
            m.map(|m| (m.mindfulness_minutes.mean, m.mindfulness_minutes.min, m.mindfulness_minutes.max)),
            in_window.iter().map(|d| d.mindfulness_minutes as f64).collect(),
        )?;
        ensure((agg.text == "No data") == in_window.is_empty(), || format!("{id}: empty-window text"))
    }

    /// Every source entry of the bundle lies inside one of its windows.
    pub fn bundle_in_scope(record: &ClientRecord, bundle: &ContextBundle) -> Result<(), String> {
        for entry_id in &bundle.source_entries {
            if entry_id == READING_MATERIALS_ID {
                continue;
            }
            let entry = record.find(entry_id).ok_or_else(|| format!("{entry_id} not in record"))?;
            let date = entry.date();
            ensure(bundle.windows.iter().any(|w| w.window.contains(date)), || {
                format!("{}: {entry_id} on {date} outside {:?}", record.record_id, bundle.windows)
            })?;
        }
        Ok(())
    }
}

pub mod golden {
    //! Prompt documents for the fixture, compared against committed files.

    use std::path::PathBuf;

    use chrono::NaiveDate;
    use homeview_core::dashboard::{ChatAbility, HomeworkFrequency, OnboardingConfig, SummaryLevel};
    use homeview_core::fixtures;
    use homeview_core::pipeline::{
        build_chat_prompt, build_summary_prompt, explain_routing, retrieve, ChatRequest, RetrievalRequest,
        SummaryRequest,
    };

    pub const AS_OF: &str = "2026-01-01";

    pub const QUESTIONS: [(&str, &str); 6] = [
        ("chat_journaling", "What themes show up in her thought records?"),
        ("chat_comparative", "Has the worry about papers come up before?"),
        ("chat_biometric", "How has she been sleeping?"),
        ("chat_risk", "Any signs of self-harm?"),
        ("chat_suggestion", "What should I try next?"),
        ("chat_general", "How is Elias doing overall?"),
    ];

    pub fn dir() -> PathBuf {
        PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests").join("golden")
    }

    fn as_of() -> NaiveDate {
        AS_OF.parse().unwrap()
    }

    /// (file stem, rendered document) for every golden case.
    pub fn cases() -> Vec<(String, String)> {
        let record = fixtures::elias();
        let mut out = Vec::new();
        let summary = |level, freq| {
            let config = OnboardingConfig { summary_level: level, homework_summary: freq, ..Default::default() };
            let req = SummaryRequest { record_id: record.record_id.clone(), activate: true, config: config.clone() };
            let bundle = retrieve(&record, RetrievalRequest::Summary(&req), &config, as_of()).unwrap();
            build_summary_prompt(&bundle, &config).unwrap().render()
        };
        out.push(("summary_detailed_weekly".into(), summary(SummaryLevel::DetailedAnalysis, HomeworkFrequency::Weekly)));
        out.push(("summary_detailed_daily".into(), summary(SummaryLevel::DetailedAnalysis, HomeworkFrequency::Daily)));
        out.push(("summary_basic_none".into(), summary(SummaryLevel::BasicOverview, HomeworkFrequency::None)));

        let config = OnboardingConfig {
            ai_chat_abilities: [ChatAbility::RawDataExtraction, ChatAbility::DetailedExplanations].into(),
            ..Default::default()
        };
        let mut routing = String::new();
        for (name, question) in QUESTIONS {
            let request = ChatRequest::classified(question).unwrap();
            let bundle = retrieve(&record, RetrievalRequest::Chat(&request), &config, as_of()).unwrap();
            out.push((name.into(), build_chat_prompt(&bundle, &request, &config).unwrap().render()));
            let r = explain_routing(question);
            let rules: Vec<String> = r.matched_rules.iter().map(|m| m.to_string()).collect();
            routing.push_str(&format!("{question}\t{}\t{}\t{}\n", r.category, r.scope, rules.join(",")));
        }
        out.push(("routing".into(), routing));
        out
    }
}

pub mod mutate {
    //! Seeded structural corruptions of conforming model output and of
    //! serialized records.

    use homeview_core::pipeline::SUMMARY_HEADERS;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};
    use serde_json::Value;

    pub const SUMMARY_MUTATIONS: [&str; 5] = ["swap", "drop", "duplicate", "table", "markdown_heading"];

    /// Applies the `kind`-th mutation to a seven-section summary. The
    /// result always breaks at least one structural rule.
    pub fn summary(text: &str, kind: usize, seed: u64) -> String {
        let mut rng = StdRng::seed_from_u64(seed);
        let mut lines: Vec<String> = text.lines().map(str::to_string).collect();
        let header_at: Vec<usize> =
            (0..lines.len()).filter(|&i| SUMMARY_HEADERS.contains(&lines[i].trim())).collect();
        assert_eq!(header_at.len(), SUMMARY_HEADERS.len(), "input is not a detailed summary");
        let k = rng.random_range(0..header_at.len());
        match kind % SUMMARY_MUTATIONS.len() {
            0 => {
                let mut j = rng.random_range(0..header_at.len() - 1);
                if j >= k {
                    j += 1;
                }
                lines.swap(header_at[k], header_at[j]);
            }
            1 => {
                lines.remove(header_at[k]);
            }
            2 => {
                lines.push(String::new());
                lines.push(SUMMARY_HEADERS[k].to_string());
                lines.push("No data".to_string());
            }
            3 => lines.insert(header_at[k] + 1, "| metric | value |".to_string()),
            _ => lines[header_at[k]] = format!("## {}", lines[header_at[k]]),
        }
        lines.join("\n")
    }

    fn count(v: &Value) -> usize {
        1 + match v {
            Value::Array(a) => a.iter().map(count).sum(),
            Value::Object(o) => o.values().map(count).sum(),
            _ => 0,
        }
    }

    fn replacement(choice: u8) -> Option<Value> {
        match choice % 8 {
            0 => Some(Value::Null),
            1 => Some(Value::from(-1)),
            2 => Some(Value::from("x")),
            3 => Some(Value::from(1e12)),
            4 => Some(Value::Array(Vec::new())),
            5 => Some(Value::Object(Default::default())),
            6 => Some(Value::from(true)),
            _ => None,
        }
    }

    /// Replaces (or, for object members, deletes) the `target`-th node in
    /// preorder. Returns false when the target is the root.
    fn apply(v: &mut Value, target: &mut usize, choice: u8) -> bool {
        let children: Vec<(Option<String>, usize)> = match v {
            Value::Array(a) => (0..a.len()).map(|i| (None, i)).collect(),
            Value::Object(o) => o.keys().cloned().map(|k| (Some(k), 0)).collect(),
            _ => return false,
        };
        for (key, idx) in children {
            *target -= 1;
            if *target == 0 {
                let new = replacement(choice);
                match (v, key, new) {
                    (Value::Object(o), Some(k), None) => {
                        o.remove(&k);
                    }
                    (Value::Object(o), Some(k), Some(n)) => {
                        o.insert(k, n);
                    }
                    (Value::Array(a), None, n) => a[idx] = n.unwrap_or(Value::Null),
                    _ => unreachable!(),
                }
                return true;
            }
            let child = match v {
                Value::Array(a) => &mut a[idx],
                Value::Object(o) => o.get_mut(key.as_deref().unwrap()).unwrap(),
                _ => unreachable!(),
            };
            let size = count(child);
            if *target < size {
                return apply(child, target, choice);
            }
            *target -= size - 1;
        }
        false
    }

    /// The document with one node replaced or removed.
    pub fn document(doc: &str, seed: u64) -> String {
        let mut rng = StdRng::seed_from_u64(seed);
        let mut value: Value = serde_json::from_str(doc).unwrap();
        let size = count(&value);
        let mut target = rng.random_range(1..size.max(2));
        apply(&mut value, &mut target, rng.random());
        serde_json::to_string(&value).unwrap()
    }
}
