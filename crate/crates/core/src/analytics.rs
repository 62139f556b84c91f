//! Summary views over a user's sessions: weekly activity totals, the
//! report time series and the monthly Memorial Moments.
//!
//! Calendar periods are resolved in the user's timezone, given as a fixed
//! UTC offset; stored timestamps stay UTC epoch seconds.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use chrono::{DateTime, Datelike, FixedOffset, NaiveDate, TimeZone, Weekday};
use serde::{Deserialize, Serialize};

use crate::datamodel::{SessionLog, Song, Target, Trial};
use crate::error::{Error, Result};

/// Calendar period in the user's timezone.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Period {
    Day(NaiveDate),
    /// ISO 8601 week.
    Week { year: i32, week: u32 },
    Month { year: i32, month: u32 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Span {
    Day,
    Week,
    Month,
}

impl FromStr for Span {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "day" => Ok(Span::Day),
            "week" => Ok(Span::Week),
            "month" => Ok(Span::Month),
            _ => Err(Error::InvalidInput(format!("unknown span `{s}`"))),
        }
    }
}

impl fmt::Display for Span {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Span::Day => "day",
            Span::Week => "week",
            Span::Month => "month",
        })
    }
}

impl Period {
    pub fn week(year: i32, week: u32) -> Result<Self> {
        NaiveDate::from_isoywd_opt(year, week, Weekday::Mon)
            .map(|_| Period::Week { year, week })
            .ok_or_else(|| Error::InvalidInput(format!("no ISO week {year}-W{week:02}")))
    }

    pub fn month(year: i32, month: u32) -> Result<Self> {
        NaiveDate::from_ymd_opt(year, month, 1)
            .map(|_| Period::Month { year, month })
            .ok_or_else(|| Error::InvalidInput(format!("no month {year}-{month:02}")))
    }

    /// The period of `span` containing `day`.
    pub fn containing(span: Span, day: NaiveDate) -> Self {
        match span {
            Span::Day => Period::Day(day),
            Span::Week => {
                let w = day.iso_week();
                Period::Week {
                    year: w.year(),
                    week: w.week(),
                }
            }
            Span::Month => Period::Month {
                year: day.year(),
                month: day.month(),
            },
        }
    }

    pub fn span(&self) -> Span {
        match self {
            Period::Day(_) => Span::Day,
            Period::Week { .. } => Span::Week,
            Period::Month { .. } => Span::Month,
        }
    }

    /// First day and the day after the last.
    pub fn days(&self) -> (NaiveDate, NaiveDate) {
        match *self {
            Period::Day(d) => (d, d.succ_opt().expect("date in range")),
            Period::Week { year, week } => {
                let first = NaiveDate::from_isoywd_opt(year, week, Weekday::Mon).expect("validated week");
                (first, first + chrono::Duration::days(7))
            }
            Period::Month { year, month } => {
                let first = NaiveDate::from_ymd_opt(year, month, 1).expect("validated month");
                let next = if month == 12 {
                    NaiveDate::from_ymd_opt(year + 1, 1, 1)
                } else {
                    NaiveDate::from_ymd_opt(year, month + 1, 1)
                };
                (first, next.expect("date in range"))
            }
        }
    }

    /// `[start, end)` in epoch seconds.
    pub fn bounds(&self, tz: &FixedOffset) -> (f64, f64) {
        let (first, next) = self.days();
        (day_start(first, tz), day_start(next, tz))
    }
}

impl fmt::Display for Period {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Period::Day(d) => write!(f, "{}", d.format("%Y-%m-%d")),
            Period::Week { year, week } => write!(f, "{year}-W{week:02}"),
            Period::Month { year, month } => write!(f, "{year}-{month:02}"),
        }
    }
}

/// `YYYY-MM-DD`, `YYYY-Www` or `YYYY-MM`.
impl FromStr for Period {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidInput(format!("invalid period `{s}` (want YYYY-MM-DD, YYYY-Www or YYYY-MM)"));
        if let Some((y, w)) = s.split_once("-W") {
            let year = y.parse().map_err(|_| bad())?;
            let week = w.parse().map_err(|_| bad())?;
            return Period::week(year, week);
        }
        if let Ok(d) = NaiveDate::parse_from_str(s, "%Y-%m-%d") {
            return Ok(Period::Day(d));
        }
        let (y, m) = s.split_once('-').ok_or_else(bad)?;
        if m.len() != 2 {
            return Err(bad());
        }
        Period::month(y.parse().map_err(|_| bad())?, m.parse().map_err(|_| bad())?)
    }
}

impl Serialize for Period {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Period {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Parses `+HH:MM`, `-HH:MM` or `UTC`.
pub fn parse_utc_offset(s: &str) -> Result<FixedOffset> {
    if s.eq_ignore_ascii_case("utc") || s == "Z" {
        return Ok(utc());
    }
    s.parse()
        .map_err(|_| Error::InvalidInput(format!("invalid UTC offset `{s}` (want +HH:MM)")))
}

pub fn utc() -> FixedOffset {
    FixedOffset::east_opt(0).expect("zero offset")
}

fn day_start(day: NaiveDate, tz: &FixedOffset) -> f64 {
    let local = day.and_hms_opt(0, 0, 0).expect("midnight");
    tz.from_local_datetime(&local)
        .single()
        .expect("fixed offsets are unambiguous")
        .timestamp() as f64
}

/// Local calendar day of an epoch timestamp.
pub fn local_day(ts: f64, tz: &FixedOffset) -> NaiveDate {
    let secs = ts.floor() as i64;
    DateTime::from_timestamp(secs, 0)
        .expect("timestamp in range")
        .with_timezone(tz)
        .date_naive()
}

/// A trial together with where it came from.
#[derive(Debug, Clone, Copy)]
struct TrialRef<'a> {
    session_id: &'a str,
    index: usize,
    trial: &'a Trial,
}

impl TrialRef<'_> {
    /// Chronological total order, independent of input order.
    fn chrono_cmp(&self, other: &Self) -> Ordering {
        self.trial
            .play_ts
            .total_cmp(&other.trial.play_ts)
            .then_with(|| self.session_id.cmp(other.session_id))
            .then_with(|| self.index.cmp(&other.index))
    }
}

fn trials_in<'a>(sessions: &'a [SessionLog], start: f64, end: f64) -> Vec<TrialRef<'a>> {
    let mut out: Vec<TrialRef> = sessions
        .iter()
        .flat_map(|s| {
            s.trials.iter().enumerate().map(move |(index, trial)| TrialRef {
                session_id: &s.session_id,
                index,
                trial,
            })
        })
        .filter(|r| r.trial.play_ts >= start && r.trial.play_ts < end)
        .collect();
    out.sort_by(TrialRef::chrono_cmp);
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ActivitySummary {
    /// Listening time inside the period, in minutes.
    pub eeg_minutes: f64,
    pub n_reports: usize,
    /// Distinct song titles.
    pub n_songs: usize,
}

/// Activity totals for one ISO week.
///
/// `eeg_minutes` sums each trial's listening interval `[play_ts, stop_ts)`
/// clipped to the week. Reports and songs count trials whose playback
/// starts inside the week.
pub fn weekly_activity(sessions: &[SessionLog], year: i32, week: u32, tz: &FixedOffset) -> Result<ActivitySummary> {
    Ok(period_activity(sessions, &Period::week(year, week)?, tz))
}

/// Activity totals over any period.
pub fn period_activity(sessions: &[SessionLog], period: &Period, tz: &FixedOffset) -> ActivitySummary {
    let (start, end) = period.bounds(tz);
    let seconds: f64 = sessions
        .iter()
        .flat_map(|s| &s.trials)
        .map(|t| (t.stop_ts.min(end) - t.play_ts.max(start)).max(0.0))
        .sum();
    let trials = trials_in(sessions, start, end);
    let titles: BTreeSet<&str> = trials.iter().map(|r| r.trial.song.title.as_str()).collect();
    ActivitySummary {
        eeg_minutes: seconds / 60.0,
        n_reports: trials.len(),
        n_songs: titles.len(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesPoint {
    pub timestamp: f64,
    pub day: NaiveDate,
    pub score: f64,
    pub song: Song,
    pub session_id: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DailyMean {
    pub day: NaiveDate,
    pub mean: f64,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActivitySeries {
    pub period: Period,
    pub dimension: Target,
    pub points: Vec<SeriesPoint>,
    /// One entry per day with reports; empty for single-day periods.
    pub daily_means: Vec<DailyMean>,
}

/// Reported scores inside `period`, oldest first.
pub fn activity_series(
    sessions: &[SessionLog],
    period: &Period,
    dimension: Target,
    tz: &FixedOffset,
) -> ActivitySeries {
    let (start, end) = period.bounds(tz);
    let points: Vec<SeriesPoint> = trials_in(sessions, start, end)
        .into_iter()
        .map(|r| SeriesPoint {
            timestamp: r.trial.play_ts,
            day: local_day(r.trial.play_ts, tz),
            score: score(r.trial, dimension),
            song: r.trial.song.clone(),
            session_id: r.session_id.to_string(),
        })
        .collect();
    let daily_means = if period.span() == Span::Day {
        Vec::new()
    } else {
        let mut by_day: BTreeMap<NaiveDate, (f64, usize)> = BTreeMap::new();
        for p in &points {
            let e = by_day.entry(p.day).or_default();
            e.0 += p.score;
            e.1 += 1;
        }
        by_day
            .into_iter()
            .map(|(day, (sum, n))| DailyMean {
                day,
                mean: sum / n as f64,
                n,
            })
            .collect()
    };
    ActivitySeries {
        period: *period,
        dimension,
        points,
        daily_means,
    }
}

fn score(t: &Trial, dimension: Target) -> f64 {
    match dimension {
        Target::Valence => t.valence,
        Target::Arousal => t.arousal,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Highlight {
    pub day: NaiveDate,
    pub value: f64,
    pub song: Song,
    pub timestamp: f64,
    pub session_id: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemorialMoments {
    pub month: Period,
    pub max_valence: Highlight,
    pub min_valence: Highlight,
    pub max_arousal: Highlight,
    pub min_arousal: Highlight,
}

/// Highest and lowest reported valence and arousal of a month. Each
/// highlight is the extreme trial itself; among equal values the earliest
/// trial wins.
pub fn memorial_moments(sessions: &[SessionLog], year: i32, month: u32, tz: &FixedOffset) -> Result<MemorialMoments> {
    let period = Period::month(year, month)?;
    let (start, end) = period.bounds(tz);
    let trials = trials_in(sessions, start, end);
    if trials.is_empty() {
        return Err(Error::NoData(format!("no reported trials in {period}")));
    }
    let pick = |dimension: Target, highest: bool| -> Highlight {
        // `trials` is chronological, so keeping the first strict improvement
        // resolves ties to the earliest trial
        let mut best = trials[0];
        for r in &trials[1..] {
            let (v, b) = (score(r.trial, dimension), score(best.trial, dimension));
            if (highest && v > b) || (!highest && v < b) {
                best = *r;
            }
        }
        Highlight {
            day: local_day(best.trial.play_ts, tz),
            value: score(best.trial, dimension),
            song: best.trial.song.clone(),
            timestamp: best.trial.play_ts,
            session_id: best.session_id.to_string(),
        }
    };
    Ok(MemorialMoments {
        month: period,
        max_valence: pick(Target::Valence, true),
        min_valence: pick(Target::Valence, false),
        max_arousal: pick(Target::Arousal, true),
        min_arousal: pick(Target::Arousal, false),
    })
}
