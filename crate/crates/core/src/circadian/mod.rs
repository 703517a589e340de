//! Wake-up time, bedtime, day length and working hours from grouped
//! activity curves.
//!
//! Records are counted into 10-minute bins per group and local day, the
//! resulting curve is smoothed with a centered moving average, and the
//! rising / falling crossings of the level halfway between the daily
//! minimum and maximum give the wake-up time and bedtime of the group.
//!
//! Three groupings are supported:
//! - cell-based: records that occur in the group's cells, whoever made them;
//! - inhabitant-based: every record of the sims whose home is in the group;
//! - worker-based: the records that workers of the group make at their
//!   workplace group.

mod binning;
mod edges;
mod heatmap;
mod io;
mod periodogram;
mod smoothing;
mod summary;
mod working_hours;

use chrono::{Duration, NaiveDate};
use serde::{Deserialize, Serialize};

use crate::time::BINS_PER_DAY;

pub use binning::{bin_activity, BinnedGroups, GroupResolver};
pub use edges::{
    detect_daily_edges, detect_fall, detect_rise, detect_series, edge_threshold, DailyEdges, DayEdges, EdgeParams,
    NoiseFloorRule, SearchWindow,
};
pub use heatmap::{weekday_hour_heatmap, Heatmap};
pub use io::{
    read_edges_daily_csv, read_edges_summary_csv, read_working_hours_csv, write_edges_daily_csv,
    write_edges_summary_csv, write_heatmap_csv, write_pairing_csv, write_periodogram_csv, write_working_hours_csv,
    EdgesDailyRow, EdgesSummaryRow, WorkingHoursRow,
};
pub use periodogram::{dominant_period, periodogram, Periodogram};
pub use smoothing::{smooth, smooth_series, smoothing_offset_min};
pub use summary::{median_edges, DayFilter, EdgeSummary};
pub use working_hours::{
    flag_low_volume, start_end_pairing, working_hours, WorkParams, WorkingHours, WorkingHoursDay, StartEndPairing,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GroupingKind {
    CellBased,
    InhabitantBased,
    WorkerBased,
}

impl GroupingKind {
    pub fn as_str(self) -> &'static str {
        match self {
            GroupingKind::CellBased => "cell_based",
            GroupingKind::InhabitantBased => "inhabitant_based",
            GroupingKind::WorkerBased => "worker_based",
        }
    }

    pub fn requires_locations(self) -> bool {
        !matches!(self, GroupingKind::CellBased)
    }
}

/// Spatial unit a group covers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GroupLevel {
    Cell,
    Site,
    /// A single group named `all`.
    City,
}

/// Raw 10-minute counts of one group over consecutive local days.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ActivitySeries {
    pub group_id: String,
    pub start: NaiveDate,
    /// `n_days * 144` counts, day-major.
    pub bins: Vec<u32>,
}

impl ActivitySeries {
    pub fn n_days(&self) -> usize {
        self.bins.len() / BINS_PER_DAY
    }

    pub fn day(&self, d: usize) -> &[u32] {
        &self.bins[d * BINS_PER_DAY..(d + 1) * BINS_PER_DAY]
    }

    pub fn date(&self, d: usize) -> NaiveDate {
        self.start + Duration::days(d as i64)
    }

    pub fn total(&self) -> u64 {
        self.bins.iter().map(|b| u64::from(*b)).sum()
    }

    pub fn day_total(&self, d: usize) -> u64 {
        self.day(d).iter().map(|b| u64::from(*b)).sum()
    }
}

/// Smoothed curve. Sample `k` sits at `10·k + offset_min` minutes after the
/// first local midnight (the center of its averaging window).
#[derive(Debug, Clone, PartialEq)]
pub struct SmoothedSeries {
    pub group_id: String,
    pub start: NaiveDate,
    pub values: Vec<f64>,
    pub offset_min: f64,
}

impl SmoothedSeries {
    /// Wraps raw values whose samples sit at bin midpoints.
    pub fn from_bins(group_id: impl Into<String>, start: NaiveDate, values: Vec<f64>) -> Self {
        Self {
            group_id: group_id.into(),
            start,
            values,
            offset_min: 5.0,
        }
    }

    pub fn n_days(&self) -> usize {
        self.values.len() / BINS_PER_DAY
    }

    pub fn date(&self, d: usize) -> NaiveDate {
        self.start + Duration::days(d as i64)
    }

    /// Day `d` plus the following day's samples when present.
    pub fn day_view(&self, d: usize) -> DayView<'_> {
        let lo = d * BINS_PER_DAY;
        let hi = ((d + 2) * BINS_PER_DAY).min(self.values.len());
        DayView {
            values: &self.values[lo..hi],
            offset_min: self.offset_min,
        }
    }

    pub fn daily_peak(&self, d: usize) -> f64 {
        self.values[d * BINS_PER_DAY..(d + 1) * BINS_PER_DAY]
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Samples of one local day, optionally continued into the next day.
#[derive(Debug, Clone, Copy)]
pub struct DayView<'a> {
    /// Sample `k` sits at minute `10·k + offset_min` of the day; `k >= 144`
    /// belongs to the next day.
    pub values: &'a [f64],
    pub offset_min: f64,
}

impl<'a> DayView<'a> {
    pub fn new(values: &'a [f64], offset_min: f64) -> Self {
        Self { values, offset_min }
    }

    #[inline]
    pub fn time_of(&self, k: usize) -> f64 {
        10.0 * k as f64 + self.offset_min
    }
}
