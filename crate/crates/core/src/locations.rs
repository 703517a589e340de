//! Day classification and most-frequent-cell home / work inference.
//!
//! Work: workdays, local time in [09:00, 16:00).
//! Home: workdays in [22:00, 24:00) ∪ [00:00, 06:00), plus every record on
//! holidays. Ties break on the cell's all-day record count, then on the
//! smaller cell id.

use std::collections::{BTreeSet, HashMap};
use std::io::{Read, Write};

use chrono::{Datelike, NaiveDate, Weekday};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{Activity, ActivityTable};
use crate::time::{self, LocalClock};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DayClass {
    Workday,
    Holiday,
}

impl DayClass {
    pub fn as_str(self) -> &'static str {
        match self {
            DayClass::Workday => "workday",
            DayClass::Holiday => "holiday",
        }
    }
}

/// `calendar.json`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Calendar {
    pub tz_offset_minutes: i32,
    /// First and last observed date (inclusive). When absent the range is
    /// unbounded and every date classifies.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub start: Option<NaiveDate>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub end: Option<NaiveDate>,
    #[serde(default)]
    pub holidays: BTreeSet<NaiveDate>,
    /// Weekend dates that are worked (e.g. bridge-day swaps).
    #[serde(default)]
    pub workday_overrides: BTreeSet<NaiveDate>,
}

impl Calendar {
    pub fn new(tz_offset_minutes: i32) -> Self {
        Self {
            tz_offset_minutes,
            start: None,
            end: None,
            holidays: BTreeSet::new(),
            workday_overrides: BTreeSet::new(),
        }
    }

    pub fn with_range(mut self, start: NaiveDate, end: NaiveDate) -> Self {
        self.start = Some(start);
        self.end = Some(end);
        self
    }

    pub fn clock(&self) -> LocalClock {
        LocalClock::new(self.tz_offset_minutes)
    }

    pub fn contains(&self, date: NaiveDate) -> bool {
        self.start.is_none_or(|s| date >= s) && self.end.is_none_or(|e| date <= e)
    }

    pub fn classify_day(&self, date: NaiveDate) -> Result<DayClass> {
        if !self.contains(date) {
            return Err(Error::DateOutOfRange(date));
        }
        Ok(self.class_unchecked(date))
    }

    fn class_unchecked(&self, date: NaiveDate) -> DayClass {
        if self.workday_overrides.contains(&date) {
            DayClass::Workday
        } else if self.holidays.contains(&date) || matches!(date.weekday(), Weekday::Sat | Weekday::Sun) {
            DayClass::Holiday
        } else {
            DayClass::Workday
        }
    }

    /// Every date of the configured range.
    pub fn dates(&self) -> Vec<NaiveDate> {
        match (self.start, self.end) {
            (Some(s), Some(e)) => time::date_range(s, e).collect(),
            _ => Vec::new(),
        }
    }

    pub fn read_json<R: Read>(source: R) -> Result<Self> {
        let cal: Calendar = serde_json::from_reader(source)?;
        if let (Some(s), Some(e)) = (cal.start, cal.end) {
            if s > e {
                return Err(Error::invalid("calendar start is after end"));
            }
        }
        Ok(cal)
    }

    pub fn write_json<W: Write>(&self, out: W) -> Result<()> {
        serde_json::to_writer_pretty(out, self)?;
        Ok(())
    }
}

/// Memoized day classes keyed by local day number.
#[derive(Debug, Clone)]
pub struct DayClassifier {
    clock: LocalClock,
    first_day: i64,
    classes: Vec<Option<DayClass>>,
    calendar: Calendar,
}

impl DayClassifier {
    /// Covers the calendar range, or the span of `table` when the calendar is open.
    pub fn new(calendar: &Calendar, table: &ActivityTable) -> Self {
        let clock = calendar.clock();
        let (mut lo, mut hi) = (i64::MAX, i64::MIN);
        if let (Some(s), Some(e)) = (calendar.start, calendar.end) {
            lo = time::day_number(s);
            hi = time::day_number(e);
        } else {
            for a in table.records() {
                let d = clock.local_day_number(a.timestamp);
                lo = lo.min(d);
                hi = hi.max(d);
            }
        }
        let classes = if lo > hi {
            Vec::new()
        } else {
            (lo..=hi)
                .map(|d| calendar.classify_day(time::date_from_day_number(d)).ok())
                .collect()
        };
        Self {
            clock,
            first_day: lo,
            classes,
            calendar: calendar.clone(),
        }
    }

    pub fn clock(&self) -> &LocalClock {
        &self.clock
    }

    /// `None` outside the calendar range.
    #[inline]
    pub fn class_of_day(&self, day: i64) -> Option<DayClass> {
        let i = day - self.first_day;
        if i < 0 || i as usize >= self.classes.len() {
            return None;
        }
        self.classes[i as usize]
    }

    #[inline]
    pub fn class_of(&self, epoch: i64) -> Option<DayClass> {
        self.class_of_day(self.clock.local_day_number(epoch))
    }

    pub fn calendar(&self) -> &Calendar {
        &self.calendar
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Window {
    Work,
    Home,
}

const WORK_START: u32 = 9 * 3600;
const WORK_END: u32 = 16 * 3600;
const NIGHT_START: u32 = 22 * 3600;
const NIGHT_END: u32 = 6 * 3600;

/// Whether a record at local `seconds_of_day` on a day of class `class`
/// qualifies for `window`.
#[inline]
pub fn qualifies(window: Window, class: DayClass, seconds_of_day: u32) -> bool {
    match (window, class) {
        (Window::Work, DayClass::Workday) => (WORK_START..WORK_END).contains(&seconds_of_day),
        (Window::Work, DayClass::Holiday) => false,
        (Window::Home, DayClass::Workday) => !(NIGHT_END..NIGHT_START).contains(&seconds_of_day),
        (Window::Home, DayClass::Holiday) => true,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LocationAssignment {
    pub sim_id: String,
    pub home_cell: Option<String>,
    pub home_support: u32,
    pub work_cell: Option<String>,
    pub work_support: u32,
}

/// Most frequent qualifying cell of one sim's records, with its support.
///
/// `records` may be in any order; the result only depends on the multiset.
pub fn infer_cell(records: &[Activity], classifier: &DayClassifier, window: Window) -> Option<(u32, u32)> {
    // (qualifying, all-day) per cell
    let mut counts: HashMap<u32, (u32, u32)> = HashMap::new();
    let clock = classifier.clock();
    for a in records {
        let entry = counts.entry(a.cell).or_default();
        entry.1 += 1;
        if let Some(class) = classifier.class_of(a.timestamp) {
            if qualifies(window, class, clock.seconds_of_day(a.timestamp)) {
                entry.0 += 1;
            }
        }
    }
    counts
        .into_iter()
        .filter(|(_, (q, _))| *q > 0)
        .max_by(|(ca, (qa, ta)), (cb, (qb, tb))| qa.cmp(qb).then(ta.cmp(tb)).then(cb.cmp(ca)))
        .map(|(cell, (q, _))| (cell, q))
}

pub fn infer_work(records: &[Activity], classifier: &DayClassifier) -> Option<(u32, u32)> {
    infer_cell(records, classifier, Window::Work)
}

pub fn infer_home(records: &[Activity], classifier: &DayClassifier) -> Option<(u32, u32)> {
    infer_cell(records, classifier, Window::Home)
}

/// Home and work for every sim in `table`, in sim-id order.
pub fn assign_locations(table: &ActivityTable, calendar: &Calendar) -> Vec<LocationAssignment> {
    let classifier = DayClassifier::new(calendar, table);
    let cells = table.cells();
    table
        .par_sims()
        .map(|(i, recs)| {
            let home = infer_home(recs, &classifier);
            let work = infer_work(recs, &classifier);
            LocationAssignment {
                sim_id: table.sims()[i].clone(),
                home_cell: home.map(|(c, _)| cells[c as usize].clone()),
                home_support: home.map_or(0, |(_, n)| n),
                work_cell: work.map(|(c, _)| cells[c as usize].clone()),
                work_support: work.map_or(0, |(_, n)| n),
            }
        })
        .collect()
}

pub fn write_locations_csv<W: Write>(rows: &[LocationAssignment], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["sim_id", "home_cell", "home_support", "work_cell", "work_support"])?;
    for r in rows {
        w.write_record([
            r.sim_id.as_str(),
            r.home_cell.as_deref().unwrap_or(""),
            &r.home_support.to_string(),
            r.work_cell.as_deref().unwrap_or(""),
            &r.work_support.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_locations_csv<R: Read>(source: R) -> Result<Vec<LocationAssignment>> {
    let mut reader = csv::Reader::from_reader(source);
    let mut out = Vec::new();
    for row in reader.deserialize::<(String, String, u32, String, u32)>() {
        let (sim_id, home, hs, work, ws) = row?;
        out.push(LocationAssignment {
            sim_id,
            home_cell: (!home.is_empty()).then_some(home),
            home_support: hs,
            work_cell: (!work.is_empty()).then_some(work),
            work_support: ws,
        });
    }
    Ok(out)
}

/// Home / work lookups keyed by sim index of an activity table, after
/// applying a minimum-support filter.
#[derive(Debug, Clone)]
pub struct LocationIndex {
    pub home_cell: Vec<Option<u32>>,
    pub work_cell: Vec<Option<u32>>,
}

impl LocationIndex {
    pub fn new(table: &ActivityTable, rows: &[LocationAssignment], min_support: u32) -> Self {
        let mut home_cell = vec![None; table.sims().len()];
        let mut work_cell = vec![None; table.sims().len()];
        for r in rows {
            let Some(s) = table.sim_index(&r.sim_id) else {
                continue;
            };
            if r.home_support >= min_support {
                home_cell[s] = r.home_cell.as_deref().and_then(|c| table.cell_index(c)).map(|c| c as u32);
            }
            if r.work_support >= min_support {
                work_cell[s] = r.work_cell.as_deref().and_then(|c| table.cell_index(c)).map(|c| c as u32);
            }
        }
        Self { home_cell, work_cell }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn d(s: &str) -> NaiveDate {
        s.parse().unwrap()
    }

    fn april_2017() -> Calendar {
        let mut cal = Calendar::new(120).with_range(d("2017-04-01"), d("2017-04-30"));
        cal.holidays.insert(d("2017-04-17"));
        cal
    }

    #[test]
    fn weekday_weekend_and_configured_holiday() {
        let cal = april_2017();
        assert_eq!(cal.classify_day(d("2017-04-05")).unwrap(), DayClass::Workday);
        assert_eq!(cal.classify_day(d("2017-04-16")).unwrap(), DayClass::Holiday);
        assert_eq!(cal.classify_day(d("2017-04-17")).unwrap(), DayClass::Holiday);
        assert!(matches!(cal.classify_day(d("2017-05-02")), Err(Error::DateOutOfRange(_))));
    }

    #[test]
    fn workday_override_beats_weekend() {
        let mut cal = april_2017();
        cal.workday_overrides.insert(d("2017-04-22"));
        assert_eq!(cal.classify_day(d("2017-04-22")).unwrap(), DayClass::Workday);
    }

    fn at(date: &str, h: u32, m: u32) -> i64 {
        LocalClock::new(120).epoch_from_local(d(date).and_hms_opt(h, m, 0).unwrap())
    }

    fn run(recs: &[(i64, &str)]) -> LocationAssignment {
        let table = ActivityTable::from_records(recs.iter().map(|(t, c)| ("s", *t, *c)));
        assign_locations(&table, &april_2017()).remove(0)
    }

    #[test]
    fn work_in_single_cell() {
        let a = run(&[(at("2017-04-05", 10, 0), "c3"), (at("2017-04-05", 11, 0), "c3")]);
        assert_eq!(a.work_cell.as_deref(), Some("c3"));
        assert_eq!(a.work_support, 2);
    }

    #[test]
    fn work_tie_broken_by_all_day_count() {
        let mut recs = Vec::new();
        for i in 0..5 {
            recs.push((at("2017-04-05", 10, i * 5), "c1"));
            recs.push((at("2017-04-06", 10, i * 5), "c2"));
        }
        for i in 0..2 {
            recs.push((at("2017-04-05", 20, i), "c1"));
        }
        for i in 0..4 {
            recs.push((at("2017-04-05", 20, 10 + i), "c2"));
        }
        let a = run(&recs);
        assert_eq!(a.work_cell.as_deref(), Some("c2"));
        assert_eq!(a.work_support, 5);
    }

    #[test]
    fn full_tie_prefers_smaller_cell_id() {
        let a = run(&[(at("2017-04-05", 10, 0), "c9"), (at("2017-04-05", 11, 0), "c1")]);
        assert_eq!(a.work_cell.as_deref(), Some("c1"));
    }

    #[test]
    fn night_only_sim_gets_home_only() {
        let a = run(&[(at("2017-04-05", 23, 0), "c7"), (at("2017-04-06", 2, 0), "c7")]);
        assert_eq!(a.home_cell.as_deref(), Some("c7"));
        assert_eq!(a.work_cell, None);
        let b = run(&[(at("2017-04-05", 12, 0), "c7")]);
        assert_eq!(b.home_cell, None);
        assert_eq!(b.home_support, 0);
    }

    #[test]
    fn window_endpoints_are_half_open() {
        let a = run(&[(at("2017-04-05", 6, 0), "c1")]);
        assert_eq!(a.home_cell, None);
        assert_eq!(a.work_cell, None);
        let b = run(&[(at("2017-04-05", 22, 0), "c1"), (at("2017-04-05", 16, 0), "c2")]);
        assert_eq!(b.home_cell.as_deref(), Some("c1"));
        assert_eq!(b.work_cell, None);
        let c = run(&[(at("2017-04-05", 9, 0), "c1")]);
        assert_eq!(c.work_cell.as_deref(), Some("c1"));
    }

    #[test]
    fn holiday_counts_all_day_for_home() {
        let a = run(&[(at("2017-04-17", 12, 0), "c5"), (at("2017-04-17", 13, 0), "c5")]);
        assert_eq!(a.home_cell.as_deref(), Some("c5"));
        assert_eq!(a.home_support, 2);
        assert_eq!(a.work_cell, None);
    }

    #[test]
    fn calendar_json_shape() {
        let cal: Calendar = serde_json::from_str(
            r#"{"tz_offset_minutes": 120, "holidays": ["2017-04-17"], "workday_overrides": []}"#,
        )
        .unwrap();
        assert_eq!(cal.tz_offset_minutes, 120);
        assert!(cal.holidays.contains(&d("2017-04-17")));
    }
}
