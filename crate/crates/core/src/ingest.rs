//! Wide-format CDR parsing, normalization into activity / subscriber /
//! device tables, cleaning filters and descriptive histograms.
//!
//! The activity table interns SIM and cell ids into dense `u32` indices
//! whose order matches the lexicographic order of the ids, so every
//! downstream stage can use index order as a deterministic tie-break.

use std::collections::{BTreeMap, HashMap};
use std::io::{Read, Write};

use chrono::{DateTime, NaiveDateTime};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::time::LocalClock;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CdrRecord {
    pub sim_id: String,
    /// Epoch seconds, always a multiple of 10.
    pub timestamp: i64,
    pub cell_id: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum CustomerType {
    Business,
    Consumer,
    #[default]
    Unknown,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SubscriptionType {
    Prepaid,
    Postpaid,
    #[default]
    Unknown,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Gender {
    #[serde(rename = "F")]
    Female,
    #[serde(rename = "M")]
    Male,
}

impl CustomerType {
    fn parse(s: &str) -> Self {
        match s.trim().to_ascii_lowercase().as_str() {
            "business" => CustomerType::Business,
            "consumer" => CustomerType::Consumer,
            _ => CustomerType::Unknown,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            CustomerType::Business => "business",
            CustomerType::Consumer => "consumer",
            CustomerType::Unknown => "unknown",
        }
    }
}

impl SubscriptionType {
    fn parse(s: &str) -> Self {
        match s.trim().to_ascii_lowercase().as_str() {
            "prepaid" => SubscriptionType::Prepaid,
            "postpaid" => SubscriptionType::Postpaid,
            _ => SubscriptionType::Unknown,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            SubscriptionType::Prepaid => "prepaid",
            SubscriptionType::Postpaid => "postpaid",
            SubscriptionType::Unknown => "unknown",
        }
    }
}

impl Gender {
    fn parse(s: &str) -> Option<Self> {
        match s.trim() {
            "F" | "f" | "female" => Some(Gender::Female),
            "M" | "m" | "male" => Some(Gender::Male),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Gender::Female => "F",
            Gender::Male => "M",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubscriberInfo {
    pub sim_id: String,
    pub customer_type: CustomerType,
    pub subscription_type: SubscriptionType,
    pub age: Option<u8>,
    pub gender: Option<Gender>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DeviceInterval {
    pub sim_id: String,
    pub tac: String,
    pub first_seen: i64,
    pub last_seen: i64,
}

/// Maps logical CDR fields to CSV header names. Optional fields may be
/// absent from the file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct CdrSchema {
    pub sim_id: String,
    pub timestamp: String,
    pub cell_id: String,
    pub customer_type: String,
    pub subscription_type: String,
    pub age: String,
    pub gender: String,
    pub tac: String,
}

impl Default for CdrSchema {
    fn default() -> Self {
        Self {
            sim_id: "sim_id".into(),
            timestamp: "timestamp".into(),
            cell_id: "cell_id".into(),
            customer_type: "customer_type".into(),
            subscription_type: "subscription_type".into(),
            age: "age".into(),
            gender: "gender".into(),
            tac: "tac".into(),
        }
    }
}

struct ColumnIndex {
    sim_id: usize,
    timestamp: usize,
    cell_id: usize,
    customer_type: Option<usize>,
    subscription_type: Option<usize>,
    age: Option<usize>,
    gender: Option<usize>,
    tac: Option<usize>,
}

impl ColumnIndex {
    fn resolve(schema: &CdrSchema, header: &csv::StringRecord) -> Result<Self> {
        let find = |name: &str| header.iter().position(|h| h.trim() == name);
        let require = |name: &str| find(name).ok_or_else(|| Error::MissingColumn(name.to_owned()));
        Ok(Self {
            sim_id: require(&schema.sim_id)?,
            timestamp: require(&schema.timestamp)?,
            cell_id: require(&schema.cell_id)?,
            customer_type: find(&schema.customer_type),
            subscription_type: find(&schema.subscription_type),
            age: find(&schema.age),
            gender: find(&schema.gender),
            tac: find(&schema.tac),
        })
    }
}

/// One parsed line, borrowing from the reader's buffer.
#[derive(Debug, Clone, Copy)]
pub struct CdrRow<'a> {
    pub sim_id: &'a str,
    pub timestamp: i64,
    pub cell_id: &'a str,
    pub customer_type: CustomerType,
    pub subscription_type: SubscriptionType,
    pub age: Option<u8>,
    pub gender: Option<Gender>,
    pub tac: Option<&'a str>,
}

impl CdrRow<'_> {
    pub fn record(&self) -> CdrRecord {
        CdrRecord {
            sim_id: self.sim_id.to_owned(),
            timestamp: self.timestamp,
            cell_id: self.cell_id.to_owned(),
        }
    }

    /// `None` when the line carries no subscriber attribute at all.
    pub fn subscriber(&self) -> Option<SubscriberInfo> {
        let known = self.customer_type != CustomerType::Unknown
            || self.subscription_type != SubscriptionType::Unknown
            || self.age.is_some()
            || self.gender.is_some();
        known.then(|| SubscriberInfo {
            sim_id: self.sim_id.to_owned(),
            customer_type: self.customer_type,
            subscription_type: self.subscription_type,
            age: self.age,
            gender: self.gender,
        })
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParseReport {
    /// Physical lines read, header included.
    pub lines_in: u64,
    pub records_out: u64,
    pub malformed: u64,
}

/// Truncates an epoch timestamp down to the 10-second grid.
#[inline]
pub fn truncate_10s(ts: i64) -> i64 {
    ts - ts.rem_euclid(10)
}

/// Parses integer epoch seconds, ISO-8601 local time (interpreted with
/// `clock`), or RFC 3339 with an explicit offset. The format is detected per
/// value.
pub fn parse_timestamp(raw: &str, clock: &LocalClock) -> Option<i64> {
    let s = raw.trim();
    if s.is_empty() {
        return None;
    }
    let bytes = s.as_bytes();
    let numeric = bytes
        .iter()
        .enumerate()
        .all(|(i, b)| b.is_ascii_digit() || (i == 0 && *b == b'-'));
    if numeric {
        return s.parse::<i64>().ok();
    }
    for fmt in ["%Y-%m-%dT%H:%M:%S%.f", "%Y-%m-%d %H:%M:%S%.f"] {
        if let Ok(local) = NaiveDateTime::parse_from_str(s, fmt) {
            return Some(clock.epoch_from_local(local));
        }
    }
    DateTime::parse_from_rfc3339(s).ok().map(|dt| dt.timestamp())
}

fn parse_tac(s: &str) -> Option<&str> {
    let s = s.trim();
    (s.len() == 8 && s.bytes().all(|b| b.is_ascii_digit())).then_some(s)
}

fn parse_age(s: &str) -> Option<u8> {
    s.trim().parse::<u8>().ok().filter(|a| *a <= 120)
}

/// Streams a wide-format CDR dump through `sink`, one call per valid line.
///
/// Malformed lines (missing fields, empty ids, unparseable timestamps) are
/// counted and skipped. A missing required column or an unreadable source
/// is fatal.
pub fn parse_cdr_stream<R: Read>(
    source: R,
    schema: &CdrSchema,
    clock: &LocalClock,
    mut sink: impl FnMut(&CdrRow<'_>),
) -> Result<ParseReport> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(source);
    let header = reader.headers()?.clone();
    let cols = ColumnIndex::resolve(schema, &header)?;
    let mut report = ParseReport {
        lines_in: 1,
        ..Default::default()
    };

    let mut rec = csv::StringRecord::new();
    loop {
        match reader.read_record(&mut rec) {
            Ok(false) => break,
            Ok(true) => {}
            Err(e) if e.is_io_error() => return Err(e.into()),
            Err(_) => {
                report.lines_in += 1;
                report.malformed += 1;
                continue;
            }
        }
        report.lines_in += 1;
        let field = |i: usize| rec.get(i).unwrap_or("");
        let opt = |i: Option<usize>| i.and_then(|i| rec.get(i)).unwrap_or("");

        let sim_id = field(cols.sim_id).trim();
        let cell_id = field(cols.cell_id).trim();
        let ts = parse_timestamp(field(cols.timestamp), clock);
        let (Some(ts), false, false) = (ts, sim_id.is_empty(), cell_id.is_empty()) else {
            report.malformed += 1;
            continue;
        };
        let row = CdrRow {
            sim_id,
            timestamp: truncate_10s(ts),
            cell_id,
            customer_type: CustomerType::parse(opt(cols.customer_type)),
            subscription_type: SubscriptionType::parse(opt(cols.subscription_type)),
            age: parse_age(opt(cols.age)),
            gender: Gender::parse(opt(cols.gender)),
            tac: parse_tac(opt(cols.tac)),
        };
        sink(&row);
        report.records_out += 1;
    }
    Ok(report)
}

/// Compact activity record: indices into the owning table's id lists.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Activity {
    pub sim: u32,
    pub timestamp: i64,
    pub cell: u32,
}

/// Normalized activity table, sorted by `(sim, timestamp, cell)`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ActivityTable {
    sims: Vec<String>,
    cells: Vec<String>,
    records: Vec<Activity>,
    sim_offsets: Vec<usize>,
}

impl ActivityTable {
    pub fn from_records<'a>(records: impl IntoIterator<Item = (&'a str, i64, &'a str)>) -> Self {
        let mut b = ActivityBuilder::default();
        for (sim, ts, cell) in records {
            b.push(sim, ts, cell);
        }
        b.finish()
    }

    pub fn sims(&self) -> &[String] {
        &self.sims
    }

    pub fn cells(&self) -> &[String] {
        &self.cells
    }

    pub fn records(&self) -> &[Activity] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn sim_records(&self, sim: usize) -> &[Activity] {
        &self.records[self.sim_offsets[sim]..self.sim_offsets[sim + 1]]
    }

    pub fn sim_index(&self, sim_id: &str) -> Option<usize> {
        self.sims.binary_search_by(|s| s.as_str().cmp(sim_id)).ok()
    }

    pub fn cell_index(&self, cell_id: &str) -> Option<usize> {
        self.cells.binary_search_by(|c| c.as_str().cmp(cell_id)).ok()
    }

    /// Iterates `(sim index, sim id, records)`.
    pub fn iter_sims(&self) -> impl Iterator<Item = (usize, &str, &[Activity])> {
        (0..self.sims.len()).map(move |i| (i, self.sims[i].as_str(), self.sim_records(i)))
    }

    pub fn par_sims(&self) -> impl IndexedParallelIterator<Item = (usize, &[Activity])> {
        (0..self.sims.len())
            .into_par_iter()
            .map(move |i| (i, self.sim_records(i)))
    }

    pub fn to_records(&self) -> Vec<CdrRecord> {
        self.records
            .iter()
            .map(|a| CdrRecord {
                sim_id: self.sims[a.sim as usize].clone(),
                timestamp: a.timestamp,
                cell_id: self.cells[a.cell as usize].clone(),
            })
            .collect()
    }

    /// Keeps the sims for which `keep(sim_index)` holds; ids are re-indexed.
    pub fn retain_sims(&self, keep: impl Fn(usize) -> bool) -> ActivityTable {
        let mut b = ActivityBuilder::default();
        for (i, sim, recs) in self.iter_sims() {
            if keep(i) {
                for a in recs {
                    b.push(sim, a.timestamp, &self.cells[a.cell as usize]);
                }
            }
        }
        b.finish()
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["sim_id", "timestamp", "cell_id"])?;
        let mut ts_buf = String::new();
        for a in &self.records {
            ts_buf.clear();
            use std::fmt::Write as _;
            let _ = write!(ts_buf, "{}", a.timestamp);
            w.write_record([
                self.sims[a.sim as usize].as_str(),
                ts_buf.as_str(),
                self.cells[a.cell as usize].as_str(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads `sim_id,timestamp,cell_id` as written by [`ActivityTable::write_csv`].
    pub fn read_csv<R: Read>(source: R) -> Result<Self> {
        let mut reader = csv::Reader::from_reader(source);
        let header = reader.headers()?.clone();
        let pos = |name: &str| {
            header
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| Error::MissingColumn(name.to_owned()))
        };
        let (si, ti, ci) = (pos("sim_id")?, pos("timestamp")?, pos("cell_id")?);
        let mut b = ActivityBuilder::default();
        let mut rec = csv::StringRecord::new();
        while reader.read_record(&mut rec)? {
            let ts = rec[ti]
                .parse::<i64>()
                .map_err(|_| Error::invalid(format!("bad timestamp `{}` in activity table", &rec[ti])))?;
            b.push(&rec[si], ts, &rec[ci]);
        }
        Ok(b.finish())
    }
}

#[derive(Debug, Default)]
struct Interner {
    ids: HashMap<String, u32>,
    names: Vec<String>,
}

impl Interner {
    #[inline]
    fn intern(&mut self, s: &str) -> u32 {
        if let Some(&id) = self.ids.get(s) {
            return id;
        }
        let id = self.names.len() as u32;
        self.ids.insert(s.to_owned(), id);
        self.names.push(s.to_owned());
        id
    }

    /// Returns the sorted names and the provisional-id → sorted-id map.
    fn into_sorted(self) -> (Vec<String>, Vec<u32>) {
        let mut order: Vec<u32> = (0..self.names.len() as u32).collect();
        order.sort_unstable_by(|a, b| self.names[*a as usize].cmp(&self.names[*b as usize]));
        let mut remap = vec![0u32; self.names.len()];
        for (new, old) in order.iter().enumerate() {
            remap[*old as usize] = new as u32;
        }
        let mut names = self.names;
        let sorted = order
            .iter()
            .map(|old| std::mem::take(&mut names[*old as usize]))
            .collect();
        (sorted, remap)
    }
}

#[derive(Debug, Default)]
struct ActivityBuilder {
    sims: Interner,
    cells: Interner,
    records: Vec<Activity>,
}

impl ActivityBuilder {
    #[inline]
    fn push(&mut self, sim: &str, ts: i64, cell: &str) -> u32 {
        let s = self.sims.intern(sim);
        let c = self.cells.intern(cell);
        self.records.push(Activity {
            sim: s,
            timestamp: ts,
            cell: c,
        });
        s
    }

    fn finish(self) -> ActivityTable {
        let (sims, sim_map) = self.sims.into_sorted();
        let (cells, cell_map) = self.cells.into_sorted();
        let mut records = self.records;
        for a in &mut records {
            a.sim = sim_map[a.sim as usize];
            a.cell = cell_map[a.cell as usize];
        }
        records.par_sort_unstable();
        let mut sim_offsets = Vec::with_capacity(sims.len() + 1);
        sim_offsets.push(0);
        let mut i = 0;
        for s in 0..sims.len() as u32 {
            while i < records.len() && records[i].sim == s {
                i += 1;
            }
            sim_offsets.push(i);
        }
        ActivityTable {
            sims,
            cells,
            records,
            sim_offsets,
        }
    }
}

#[derive(Debug, Clone, Default)]
struct SubscriberAcc {
    customer_type: CustomerType,
    subscription_type: SubscriptionType,
    age: Option<u8>,
    gender: Option<Gender>,
}

impl SubscriberAcc {
    /// First non-unknown value wins; returns the number of conflicting fields.
    fn absorb(&mut self, row: &CdrRow<'_>) -> u64 {
        fn take<T: PartialEq + Copy>(slot: &mut T, unknown: T, v: T) -> u64 {
            if v == unknown {
                0
            } else if *slot == unknown {
                *slot = v;
                0
            } else {
                u64::from(*slot != v)
            }
        }
        take(&mut self.customer_type, CustomerType::Unknown, row.customer_type)
            + take(&mut self.subscription_type, SubscriptionType::Unknown, row.subscription_type)
            + take(&mut self.age, None, row.age)
            + take(&mut self.gender, None, row.gender)
    }

    fn merge_after(&mut self, later: &SubscriberAcc) -> u64 {
        let row = CdrRow {
            sim_id: "",
            timestamp: 0,
            cell_id: "",
            customer_type: later.customer_type,
            subscription_type: later.subscription_type,
            age: later.age,
            gender: later.gender,
            tac: None,
        };
        self.absorb(&row)
    }
}

/// Accumulates parsed rows into the normalized tables. Builders over
/// disjoint partitions can be merged; the finished tables do not depend on
/// how rows were partitioned as long as each sim's rows keep file order.
#[derive(Debug, Default)]
pub struct TableBuilder {
    activity: ActivityBuilder,
    tacs: Interner,
    // (provisional sim, timestamp, tac)
    device_obs: Vec<(u32, i64, u32)>,
    subscribers: Vec<SubscriberAcc>,
    conflicts: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NormalizedTables {
    pub activity: ActivityTable,
    /// One row per sim, sorted by sim id.
    pub subscribers: Vec<SubscriberInfo>,
    /// Sorted by sim id, then time.
    pub devices: Vec<DeviceInterval>,
    pub subscriber_conflicts: u64,
}

impl TableBuilder {
    pub fn push(&mut self, row: &CdrRow<'_>) {
        let sim = self.activity.push(row.sim_id, row.timestamp, row.cell_id) as usize;
        if sim == self.subscribers.len() {
            self.subscribers.push(SubscriberAcc::default());
        }
        self.conflicts += self.subscribers[sim].absorb(row);
        if let Some(tac) = row.tac {
            let t = self.tacs.intern(tac);
            self.device_obs.push((sim as u32, row.timestamp, t));
        }
    }

    /// Appends `other` after `self` (rows of `other` count as later in file order).
    pub fn merge(&mut self, other: TableBuilder) {
        let sim_map: Vec<u32> = other
            .activity
            .sims
            .names
            .iter()
            .map(|s| self.activity.sims.intern(s))
            .collect();
        let cell_map: Vec<u32> = other
            .activity
            .cells
            .names
            .iter()
            .map(|c| self.activity.cells.intern(c))
            .collect();
        let tac_map: Vec<u32> = other.tacs.names.iter().map(|t| self.tacs.intern(t)).collect();
        self.subscribers
            .resize(self.activity.sims.names.len(), SubscriberAcc::default());
        for (old, acc) in other.subscribers.iter().enumerate() {
            let new = sim_map[old] as usize;
            self.conflicts += self.subscribers[new].merge_after(acc);
        }
        self.activity.records.extend(other.activity.records.iter().map(|a| Activity {
            sim: sim_map[a.sim as usize],
            timestamp: a.timestamp,
            cell: cell_map[a.cell as usize],
        }));
        self.device_obs.extend(
            other
                .device_obs
                .iter()
                .map(|(s, ts, t)| (sim_map[*s as usize], *ts, tac_map[*t as usize])),
        );
        self.conflicts += other.conflicts;
    }

    pub fn finish(self) -> NormalizedTables {
        let sim_names_provisional = self.activity.sims.names.clone();
        let subscribers_prov = self.subscribers;
        let tacs = self.tacs.names;
        let mut device_obs = self.device_obs;
        let activity = self.activity.finish();

        let mut subscribers: Vec<SubscriberInfo> = sim_names_provisional
            .iter()
            .zip(subscribers_prov)
            .map(|(sim, acc)| SubscriberInfo {
                sim_id: sim.clone(),
                customer_type: acc.customer_type,
                subscription_type: acc.subscription_type,
                age: acc.age,
                gender: acc.gender,
            })
            .collect();
        subscribers.sort_by(|a, b| a.sim_id.cmp(&b.sim_id));

        // Map provisional sim ids to their sorted rank for ordering.
        let rank: HashMap<&str, u32> = activity
            .sims()
            .iter()
            .enumerate()
            .map(|(i, s)| (s.as_str(), i as u32))
            .collect();
        let prov_rank: Vec<u32> = sim_names_provisional
            .iter()
            .map(|s| rank[s.as_str()])
            .collect();
        for obs in &mut device_obs {
            obs.0 = prov_rank[obs.0 as usize];
        }
        device_obs.par_sort_unstable_by(|a, b| {
            (a.0, a.1, &tacs[a.2 as usize]).cmp(&(b.0, b.1, &tacs[b.2 as usize]))
        });
        let devices = collapse_device_runs(&device_obs, activity.sims(), &tacs);

        NormalizedTables {
            activity,
            subscribers,
            devices,
            subscriber_conflicts: self.conflicts,
        }
    }
}

fn collapse_device_runs(obs: &[(u32, i64, u32)], sims: &[String], tacs: &[String]) -> Vec<DeviceInterval> {
    let mut out: Vec<DeviceInterval> = Vec::new();
    let mut current: Option<(u32, u32, i64, i64)> = None;
    for &(sim, ts, tac) in obs {
        match &mut current {
            Some((s, t, _, last)) if *s == sim && *t == tac => *last = ts,
            _ => {
                if let Some((s, t, first, last)) = current.take() {
                    out.push(interval(sims, tacs, s, t, first, last));
                }
                current = Some((sim, tac, ts, ts));
            }
        }
    }
    if let Some((s, t, first, last)) = current {
        out.push(interval(sims, tacs, s, t, first, last));
    }
    out
}

fn interval(sims: &[String], tacs: &[String], s: u32, t: u32, first: i64, last: i64) -> DeviceInterval {
    DeviceInterval {
        sim_id: sims[s as usize].clone(),
        tac: tacs[t as usize].clone(),
        first_seen: first,
        last_seen: last,
    }
}

/// Builds the normalized tables from an in-memory row sequence.
pub fn normalize_tables<'a>(rows: impl IntoIterator<Item = CdrRow<'a>>) -> NormalizedTables {
    let mut b = TableBuilder::default();
    for row in rows {
        b.push(&row);
    }
    b.finish()
}

/// Parses and normalizes a wide CDR dump in one pass.
pub fn ingest_reader<R: Read>(
    source: R,
    schema: &CdrSchema,
    clock: &LocalClock,
) -> Result<(NormalizedTables, ParseReport)> {
    let mut b = TableBuilder::default();
    let report = parse_cdr_stream(source, schema, clock, |row| b.push(row))?;
    Ok((b.finish(), report))
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExclusionReport {
    pub kept: usize,
    pub excluded_min_records: usize,
    pub excluded_min_active_days: usize,
}

fn active_days(records: &[Activity], clock: &LocalClock) -> usize {
    // Records are time-sorted, so distinct days appear as runs.
    let mut n = 0;
    let mut last = None;
    for a in records {
        let d = clock.local_day_number(a.timestamp);
        if last != Some(d) {
            n += 1;
            last = Some(d);
        }
    }
    n
}

/// Keeps sims with at least `min_records` records and `min_active_days`
/// distinct local days. A sim failing both is reported under `min_records`.
pub fn filter_sims(
    table: &ActivityTable,
    min_records: usize,
    min_active_days: usize,
    clock: &LocalClock,
) -> (ActivityTable, ExclusionReport) {
    let verdict: Vec<u8> = table
        .par_sims()
        .map(|(_, recs)| {
            if recs.len() < min_records {
                1
            } else if active_days(recs, clock) < min_active_days {
                2
            } else {
                0
            }
        })
        .collect();
    let report = ExclusionReport {
        kept: verdict.iter().filter(|v| **v == 0).count(),
        excluded_min_records: verdict.iter().filter(|v| **v == 1).count(),
        excluded_min_active_days: verdict.iter().filter(|v| **v == 2).count(),
    };
    if report.kept == table.sims().len() {
        return (table.clone(), report);
    }
    (table.retain_sims(|i| verdict[i] == 0), report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActivityHistogram {
    /// Upper-inclusive thresholds; bucket `i` holds sims with
    /// `edges[i-1] < count <= edges[i]`, the last bucket everything above.
    pub bucket_edges: Vec<u64>,
    pub sim_counts: Vec<u64>,
    pub activity_share: Vec<f64>,
}

/// Mergeable partial state for [`activity_histograms`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HistogramAccumulator {
    edges: Vec<u64>,
    sims: Vec<u64>,
    records: Vec<u64>,
    active_days: BTreeMap<u32, u64>,
}

impl HistogramAccumulator {
    pub fn new(edges: &[u64]) -> Result<Self> {
        if edges.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::invalid("histogram bucket edges must be strictly increasing"));
        }
        Ok(Self {
            edges: edges.to_vec(),
            sims: vec![0; edges.len() + 1],
            records: vec![0; edges.len() + 1],
            active_days: BTreeMap::new(),
        })
    }

    pub fn add_sim(&mut self, record_count: u64, active_days: u32) {
        let bucket = self.edges.partition_point(|e| *e < record_count);
        self.sims[bucket] += 1;
        self.records[bucket] += record_count;
        *self.active_days.entry(active_days).or_default() += 1;
    }

    pub fn merge(mut self, other: &HistogramAccumulator) -> Self {
        for (a, b) in self.sims.iter_mut().zip(&other.sims) {
            *a += b;
        }
        for (a, b) in self.records.iter_mut().zip(&other.records) {
            *a += b;
        }
        for (k, v) in &other.active_days {
            *self.active_days.entry(*k).or_default() += v;
        }
        self
    }

    pub fn finish(self) -> (ActivityHistogram, BTreeMap<u32, u64>) {
        let total: u64 = self.records.iter().sum();
        let activity_share = self
            .records
            .iter()
            .map(|r| if total == 0 { 0.0 } else { *r as f64 / total as f64 })
            .collect();
        (
            ActivityHistogram {
                bucket_edges: self.edges,
                sim_counts: self.sims,
                activity_share,
            },
            self.active_days,
        )
    }
}

/// SIM tally and activity share per record-count bucket, plus the number of
/// sims per active-day count.
pub fn activity_histograms(
    table: &ActivityTable,
    bucket_edges: &[u64],
    clock: &LocalClock,
) -> Result<(ActivityHistogram, BTreeMap<u32, u64>)> {
    let empty = HistogramAccumulator::new(bucket_edges)?;
    let acc = table
        .par_sims()
        .fold(
            || empty.clone(),
            |mut acc, (_, recs)| {
                acc.add_sim(recs.len() as u64, active_days(recs, clock) as u32);
                acc
            },
        )
        .reduce(|| empty.clone(), |a, b| a.merge(&b));
    Ok(acc.finish())
}

pub fn write_subscribers_csv<W: Write>(subs: &[SubscriberInfo], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["sim_id", "customer_type", "subscription_type", "age", "gender"])?;
    for s in subs {
        w.write_record([
            s.sim_id.as_str(),
            s.customer_type.as_str(),
            s.subscription_type.as_str(),
            &s.age.map(|a| a.to_string()).unwrap_or_default(),
            s.gender.map(Gender::as_str).unwrap_or(""),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_devices_csv<W: Write>(devices: &[DeviceInterval], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["sim_id", "tac", "first_seen", "last_seen"])?;
    for d in devices {
        w.write_record([
            d.sim_id.as_str(),
            d.tac.as_str(),
            &d.first_seen.to_string(),
            &d.last_seen.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_devices_csv<R: Read>(source: R) -> Result<Vec<DeviceInterval>> {
    #[derive(Deserialize)]
    struct Row {
        sim_id: String,
        tac: String,
        first_seen: i64,
        last_seen: i64,
    }
    let mut reader = csv::Reader::from_reader(source);
    let mut out = Vec::new();
    for row in reader.deserialize::<Row>() {
        let r = row?;
        out.push(DeviceInterval {
            sim_id: r.sim_id,
            tac: r.tac,
            first_seen: r.first_seen,
            last_seen: r.last_seen,
        });
    }
    Ok(out)
}
