use std::collections::BTreeMap;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::{detect_daily_edges, ActivitySeries, EdgeParams, NoiseFloorRule, SearchWindow, SmoothedSeries};
use crate::locations::DayClass;
use crate::stats::lower_median;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WorkParams {
    pub start_search: SearchWindow,
    pub end_search: SearchWindow,
    /// Sites whose workday volume is below this share of the mean site
    /// volume are low-confidence.
    pub min_volume_fraction: f64,
    /// Sites where fewer than this share of workdays produced both edges
    /// are low-confidence.
    pub min_detected_fraction: f64,
}

impl Default for WorkParams {
    fn default() -> Self {
        Self {
            start_search: SearchWindow::new(240.0, 840.0),
            end_search: SearchWindow::new(840.0, 1440.0),
            min_volume_fraction: 0.1,
            min_detected_fraction: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorkingHoursDay {
    pub site_id: String,
    pub date: NaiveDate,
    pub start_min: f64,
    pub end_min: f64,
}

impl WorkingHoursDay {
    pub fn length_min(&self) -> f64 {
        self.end_min - self.start_min
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorkingHours {
    pub site_id: String,
    pub start_min: Option<f64>,
    pub end_min: Option<f64>,
    pub length_min: Option<f64>,
    /// Worker-based records on workdays.
    pub volume: u64,
    pub workdays: usize,
    pub detected_days: usize,
    pub low_confidence: bool,
}

/// Per-workday start / end from the rising and falling edge of the site's
/// worker-based curve, and their medians.
///
/// `low_confidence` only reflects the share of detected days here;
/// [`flag_low_volume`] adds the volume criterion across sites.
pub fn working_hours(
    raw: &ActivitySeries,
    smoothed: &SmoothedSeries,
    class_of: impl Fn(NaiveDate) -> DayClass,
    params: &WorkParams,
    rule: &NoiseFloorRule,
) -> (Vec<WorkingHoursDay>, WorkingHours) {
    let edge_params = EdgeParams {
        half_fraction: 0.5,
        rise: params.start_search,
        fall: params.end_search,
        noise_floor: rule.floor_for(smoothed),
    };
    let mut days = Vec::new();
    let mut volume = 0;
    let mut workdays = 0;
    for d in 0..smoothed.n_days() {
        let date = smoothed.date(d);
        if class_of(date) != DayClass::Workday {
            continue;
        }
        workdays += 1;
        volume += raw.day_total(d);
        let e = detect_daily_edges(&smoothed.day_view(d), &edge_params);
        if let (Some(start), Some(end)) = (e.wake_min, e.bed_min) {
            if end > start {
                days.push(WorkingHoursDay {
                    site_id: raw.group_id.clone(),
                    date,
                    start_min: start,
                    end_min: end,
                });
            }
        }
    }
    let starts: Vec<f64> = days.iter().map(|d| d.start_min).collect();
    let ends: Vec<f64> = days.iter().map(|d| d.end_min).collect();
    let lengths: Vec<f64> = days.iter().map(|d| d.length_min()).collect();
    let detected = days.len();
    let summary = WorkingHours {
        site_id: raw.group_id.clone(),
        start_min: lower_median(&starts),
        end_min: lower_median(&ends),
        length_min: lower_median(&lengths),
        volume,
        workdays,
        detected_days: detected,
        low_confidence: workdays == 0 || (detected as f64) < params.min_detected_fraction * workdays as f64,
    };
    (days, summary)
}

/// Flags sites whose volume is below `fraction` of the mean site volume.
pub fn flag_low_volume(sites: &mut [WorkingHours], fraction: f64) {
    if sites.is_empty() {
        return;
    }
    let mean = sites.iter().map(|s| s.volume as f64).sum::<f64>() / sites.len() as f64;
    for s in sites {
        if (s.volume as f64) < fraction * mean {
            s.low_confidence = true;
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StartEndPairing {
    /// `(bin start minute, site count)`, most frequent first.
    pub top_starts: Vec<(u32, u64)>,
    pub top_ends: Vec<(u32, u64)>,
    /// `matrix[i][j]`: sites starting in `top_starts[i]` and ending in
    /// `top_ends[j]`.
    pub matrix: Vec<Vec<u64>>,
}

fn round_to(minutes: f64, bin: f64) -> u32 {
    ((minutes / bin).round() * bin) as u32
}

fn top_k(counts: &BTreeMap<u32, u64>, k: usize) -> Vec<(u32, u64)> {
    let mut v: Vec<(u32, u64)> = counts.iter().map(|(b, c)| (*b, *c)).collect();
    // ties: earlier bin first
    v.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
    v.truncate(k);
    v
}

/// Rounds starts and ends to `bin_min` minutes and counts sites per
/// (start, end) pair among the `k` most frequent bins of each. Sites
/// without both values are ignored.
pub fn start_end_pairing<'a>(
    sites: impl IntoIterator<Item = &'a WorkingHours>,
    k: usize,
    bin_min: f64,
) -> StartEndPairing {
    let pairs: Vec<(u32, u32)> = sites
        .into_iter()
        .filter_map(|s| Some((round_to(s.start_min?, bin_min), round_to(s.end_min?, bin_min))))
        .collect();
    let mut starts = BTreeMap::new();
    let mut ends = BTreeMap::new();
    for (s, e) in &pairs {
        *starts.entry(*s).or_insert(0u64) += 1;
        *ends.entry(*e).or_insert(0u64) += 1;
    }
    let top_starts = top_k(&starts, k);
    let top_ends = top_k(&ends, k);
    let mut matrix = vec![vec![0u64; top_ends.len()]; top_starts.len()];
    for (s, e) in &pairs {
        let i = top_starts.iter().position(|t| t.0 == *s);
        let j = top_ends.iter().position(|t| t.0 == *e);
        if let (Some(i), Some(j)) = (i, j) {
            matrix[i][j] += 1;
        }
    }
    StartEndPairing {
        top_starts,
        top_ends,
        matrix,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circadian::smooth_series;
    use crate::time::BINS_PER_DAY;

    fn wh(start: f64, end: f64) -> WorkingHours {
        WorkingHours {
            site_id: "s".into(),
            start_min: Some(start),
            end_min: Some(end),
            length_min: Some(end - start),
            volume: 100,
            workdays: 20,
            detected_days: 20,
            low_confidence: false,
        }
    }

    #[test]
    fn office_block() {
        let start = NaiveDate::from_ymd_opt(2017, 4, 3).unwrap();
        let day: Vec<u32> = (0..BINS_PER_DAY).map(|k| if (54..102).contains(&k) { 30 } else { 0 }).collect();
        let raw = ActivitySeries {
            group_id: "s".into(),
            start,
            bins: day.repeat(5),
        };
        let sm = smooth_series(&raw, 12);
        let (days, sum) = working_hours(
            &raw,
            &sm,
            |_| DayClass::Workday,
            &WorkParams::default(),
            &NoiseFloorRule::default(),
        );
        assert_eq!(days.len(), 5);
        assert_eq!(sum.start_min, Some(540.0));
        assert_eq!(sum.end_min, Some(1020.0));
        assert_eq!(sum.length_min, Some(480.0));
        assert!(!sum.low_confidence);
        assert_eq!(sum.volume, 5 * 48 * 30);
    }

    #[test]
    fn low_volume_flag() {
        let mut v = vec![wh(540.0, 1020.0), wh(540.0, 1020.0), wh(540.0, 1020.0)];
        v[2].volume = 1;
        flag_low_volume(&mut v, 0.1);
        assert!(!v[0].low_confidence);
        assert!(v[2].low_confidence);
    }

    #[test]
    fn pairing_single_pair() {
        let v = vec![wh(541.0, 1019.0), wh(538.0, 1022.0)];
        let p = start_end_pairing(&v, 5, 30.0);
        assert_eq!(p.top_starts, vec![(540, 2)]);
        assert_eq!(p.top_ends, vec![(1020, 2)]);
        assert_eq!(p.matrix, vec![vec![2]]);
    }

    #[test]
    fn pairing_top_k_cut() {
        let v: Vec<WorkingHours> = (0..7).map(|i| wh(420.0 + 30.0 * i as f64, 1000.0)).collect();
        let p = start_end_pairing(&v, 5, 30.0);
        assert_eq!(p.top_starts.len(), 5);
        assert_eq!(p.matrix.iter().flatten().sum::<u64>(), 5);
    }
}
