use std::io::{Read, Write};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::{DailyEdges, EdgeSummary, GroupingKind, Heatmap, Periodogram, StartEndPairing, WorkingHours};
use crate::error::Result;
use crate::locations::DayClass;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgesDailyRow {
    pub group_kind: GroupingKind,
    pub group_id: String,
    pub date: NaiveDate,
    pub day_class: DayClass,
    pub wake_min: Option<f64>,
    pub bed_min: Option<f64>,
    pub day_length_min: Option<f64>,
    pub confidence: String,
}

impl EdgesDailyRow {
    pub fn new(kind: GroupingKind, e: &DailyEdges, confidence: &str) -> Self {
        Self {
            group_kind: kind,
            group_id: e.group_id.clone(),
            date: e.date,
            day_class: e.day_class,
            wake_min: e.wake_min,
            bed_min: e.bed_min,
            day_length_min: e.day_length_min(),
            confidence: confidence.to_owned(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgesSummaryRow {
    pub group_kind: GroupingKind,
    pub group_id: String,
    pub day_class: String,
    pub n_days: usize,
    pub wake_median: Option<f64>,
    pub bed_median: Option<f64>,
    pub day_length_median: Option<f64>,
}

impl EdgesSummaryRow {
    pub fn new(kind: GroupingKind, s: &EdgeSummary) -> Self {
        Self {
            group_kind: kind,
            group_id: s.group_id.clone(),
            day_class: s.filter.as_str().to_owned(),
            n_days: s.n_days,
            wake_median: s.wake_median,
            bed_median: s.bed_median,
            day_length_median: s.day_length_median,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorkingHoursRow {
    pub site_id: String,
    pub start_min: Option<f64>,
    pub end_min: Option<f64>,
    pub length_min: Option<f64>,
    pub volume: u64,
    pub confidence: String,
}

impl From<&WorkingHours> for WorkingHoursRow {
    fn from(w: &WorkingHours) -> Self {
        Self {
            site_id: w.site_id.clone(),
            start_min: w.start_min,
            end_min: w.end_min,
            length_min: w.length_min,
            volume: w.volume,
            confidence: if w.low_confidence { "low" } else { "ok" }.to_owned(),
        }
    }
}

fn write_rows<T: Serialize, W: Write>(rows: &[T], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

fn read_rows<T: for<'de> Deserialize<'de>, R: Read>(source: R) -> Result<Vec<T>> {
    let mut reader = csv::Reader::from_reader(source);
    let mut out = Vec::new();
    for row in reader.deserialize() {
        out.push(row?);
    }
    Ok(out)
}

pub fn write_edges_daily_csv<W: Write>(rows: &[EdgesDailyRow], out: W) -> Result<()> {
    write_rows(rows, out)
}

pub fn read_edges_daily_csv<R: Read>(source: R) -> Result<Vec<EdgesDailyRow>> {
    read_rows(source)
}

pub fn write_edges_summary_csv<W: Write>(rows: &[EdgesSummaryRow], out: W) -> Result<()> {
    write_rows(rows, out)
}

pub fn read_edges_summary_csv<R: Read>(source: R) -> Result<Vec<EdgesSummaryRow>> {
    read_rows(source)
}

pub fn write_working_hours_csv<W: Write>(rows: &[WorkingHoursRow], out: W) -> Result<()> {
    write_rows(rows, out)
}

pub fn read_working_hours_csv<R: Read>(source: R) -> Result<Vec<WorkingHoursRow>> {
    read_rows(source)
}

/// Long form: `scope,weekday,hour,count` with Monday = 0.
pub fn write_heatmap_csv<W: Write>(maps: &[(&str, Heatmap)], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["scope", "weekday", "hour", "count"])?;
    for (scope, h) in maps {
        for (wd, row) in h.iter().enumerate() {
            for (hour, c) in row.iter().enumerate() {
                w.write_record([scope.to_string(), wd.to_string(), hour.to_string(), c.to_string()])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_periodogram_csv<W: Write>(p: &Periodogram, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["period_hours", "magnitude"])?;
    for (period, mag) in &p.entries {
        w.write_record([format!("{period:.6}"), format!("{mag:.6}")])?;
    }
    w.flush()?;
    Ok(())
}

/// `start_min,end_min,sites` for every cell of the pairing matrix.
pub fn write_pairing_csv<W: Write>(p: &StartEndPairing, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["start_min", "end_min", "sites"])?;
    for (i, (s, _)) in p.top_starts.iter().enumerate() {
        for (j, (e, _)) in p.top_ends.iter().enumerate() {
            w.write_record([s.to_string(), e.to_string(), p.matrix[i][j].to_string()])?;
        }
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn edges_daily_round_trip() {
        let e = DailyEdges {
            group_id: "c1".into(),
            date: NaiveDate::from_ymd_opt(2017, 4, 3).unwrap(),
            day_class: DayClass::Workday,
            wake_min: Some(431.25),
            bed_min: None,
        };
        let rows = vec![EdgesDailyRow::new(GroupingKind::CellBased, &e, "ok")];
        let mut buf = Vec::new();
        write_edges_daily_csv(&rows, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("group_kind,group_id,date,day_class,wake_min,bed_min,day_length_min,confidence\n"));
        assert!(text.contains("cell_based,c1,2017-04-03,workday,431.25,,,ok"));
        assert_eq!(read_edges_daily_csv(buf.as_slice()).unwrap(), rows);
    }
}
