use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::{DayView, SmoothedSeries};
use crate::locations::DayClass;
use crate::stats::lower_median;

/// Half-open range of minutes after local midnight; values above 1440
/// reach into the next day.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SearchWindow {
    pub start_min: f64,
    pub end_min: f64,
}

impl SearchWindow {
    pub const fn new(start_min: f64, end_min: f64) -> Self {
        Self { start_min, end_min }
    }

    #[inline]
    pub fn contains(&self, t: f64) -> bool {
        t >= self.start_min && t < self.end_min
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EdgeParams {
    /// Threshold position between the window minimum and maximum.
    pub half_fraction: f64,
    pub rise: SearchWindow,
    pub fall: SearchWindow,
    /// Days whose max - min in a window is below this have no edge there.
    pub noise_floor: f64,
}

impl Default for EdgeParams {
    fn default() -> Self {
        Self {
            half_fraction: 0.5,
            rise: SearchWindow::new(180.0, 720.0),
            fall: SearchWindow::new(1020.0, 1620.0),
            noise_floor: 0.0,
        }
    }
}

/// `max(min_counts, peak_fraction * median daily peak)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseFloorRule {
    pub min_counts: f64,
    pub peak_fraction: f64,
}

impl Default for NoiseFloorRule {
    fn default() -> Self {
        Self {
            min_counts: 5.0,
            peak_fraction: 0.05,
        }
    }
}

impl NoiseFloorRule {
    pub fn floor_for(&self, series: &SmoothedSeries) -> f64 {
        let peaks: Vec<f64> = (0..series.n_days()).map(|d| series.daily_peak(d)).collect();
        let median = lower_median(&peaks).unwrap_or(0.0);
        self.min_counts.max(self.peak_fraction * median)
    }
}

/// `(max - min) * fraction + min`.
pub fn edge_threshold(values: &[f64], fraction: f64) -> Option<(f64, f64)> {
    let (lo, hi) = min_max(values)?;
    Some(((hi - lo) * fraction + lo, hi - lo))
}

fn min_max(values: &[f64]) -> Option<(f64, f64)> {
    let mut it = values.iter().copied();
    let first = it.next()?;
    Some(it.fold((first, first), |(lo, hi), v| (lo.min(v), hi.max(v))))
}

/// Samples with time in `[0, end)`.
fn prefix<'a>(view: &DayView<'a>, end_min: f64) -> &'a [f64] {
    let n = view.values.iter().enumerate().take_while(|(k, _)| view.time_of(*k) < end_min).count();
    &view.values[..n]
}

/// First upward crossing of the threshold inside `window`, linearly
/// interpolated. The threshold uses the samples of `[0, max(1440, end))`.
pub fn detect_rise(view: &DayView, fraction: f64, window: SearchWindow, noise_floor: f64) -> Option<f64> {
    let span = prefix(view, window.end_min.max(1440.0));
    let (m, amp) = edge_threshold(span, fraction)?;
    if amp < noise_floor || amp <= 0.0 {
        return None;
    }
    let v = view.values;
    (0..v.len().saturating_sub(1)).find_map(|k| {
        if v[k] < m && v[k + 1] >= m {
            let t = view.time_of(k) + 10.0 * (m - v[k]) / (v[k + 1] - v[k]);
            window.contains(t).then_some(t)
        } else {
            None
        }
    })
}

/// Last downward crossing of the threshold inside `window`.
pub fn detect_fall(view: &DayView, fraction: f64, window: SearchWindow, noise_floor: f64) -> Option<f64> {
    let span = prefix(view, window.end_min.max(1440.0));
    let (m, amp) = edge_threshold(span, fraction)?;
    if amp < noise_floor || amp <= 0.0 {
        return None;
    }
    let v = view.values;
    (0..v.len().saturating_sub(1)).rev().find_map(|k| {
        if v[k] >= m && v[k + 1] < m {
            let t = view.time_of(k) + 10.0 * (v[k] - m) / (v[k] - v[k + 1]);
            window.contains(t).then_some(t)
        } else {
            None
        }
    })
}

/// Wake-up and bedtime of one day, each absent when its window has no
/// crossing or too little signal.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct DayEdges {
    pub wake_min: Option<f64>,
    pub bed_min: Option<f64>,
}

impl DayEdges {
    pub fn day_length_min(&self) -> Option<f64> {
        Some(self.bed_min? - self.wake_min?)
    }
}

pub fn detect_daily_edges(view: &DayView, params: &EdgeParams) -> DayEdges {
    DayEdges {
        wake_min: detect_rise(view, params.half_fraction, params.rise, params.noise_floor),
        bed_min: detect_fall(view, params.half_fraction, params.fall, params.noise_floor),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DailyEdges {
    pub group_id: String,
    pub date: NaiveDate,
    pub day_class: DayClass,
    pub wake_min: Option<f64>,
    pub bed_min: Option<f64>,
}

impl DailyEdges {
    pub fn day_length_min(&self) -> Option<f64> {
        Some(self.bed_min? - self.wake_min?)
    }
}

/// Runs detection on every day of a smoothed series. `noise_floor` in
/// `params` is replaced by the one `rule` derives from the series.
pub fn detect_series(
    series: &SmoothedSeries,
    params: &EdgeParams,
    rule: &NoiseFloorRule,
    class_of: impl Fn(NaiveDate) -> DayClass,
) -> Vec<DailyEdges> {
    let params = EdgeParams {
        noise_floor: rule.floor_for(series),
        ..*params
    };
    (0..series.n_days())
        .map(|d| {
            let date = series.date(d);
            let e = detect_daily_edges(&series.day_view(d), &params);
            DailyEdges {
                group_id: series.group_id.clone(),
                date,
                day_class: class_of(date),
                wake_min: e.wake_min,
                bed_min: e.bed_min,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circadian::smooth;
    use crate::time::BINS_PER_DAY;

    fn step(at_bin: usize) -> Vec<f64> {
        (0..BINS_PER_DAY).map(|k| if k < at_bin { 0.0 } else { 100.0 }).collect()
    }

    #[test]
    fn raw_step_at_seven() {
        let v = step(42);
        let view = DayView::new(&v, 5.0);
        let e = detect_daily_edges(&view, &EdgeParams::default());
        assert_eq!(e.wake_min, Some(420.0));
        assert_eq!(e.bed_min, None);
    }

    #[test]
    fn smoothed_step_at_seven() {
        let v = smooth(&step(42), 12);
        let view = DayView::new(&v, 0.0);
        assert_eq!(detect_rise(&view, 0.5, SearchWindow::new(180.0, 720.0), 0.0), Some(420.0));
    }

    #[test]
    fn box_profile() {
        // active 07:00 - 22:00
        let v: Vec<f64> = (0..BINS_PER_DAY).map(|k| if (42..132).contains(&k) { 50.0 } else { 2.0 }).collect();
        let e = detect_daily_edges(&DayView::new(&v, 5.0), &EdgeParams::default());
        assert_eq!(e.wake_min, Some(420.0));
        assert_eq!(e.bed_min, Some(1320.0));
        assert_eq!(e.day_length_min(), Some(900.0));
    }

    #[test]
    fn flat_day_has_no_edges() {
        let v = vec![7.0; BINS_PER_DAY];
        let e = detect_daily_edges(&DayView::new(&v, 5.0), &EdgeParams::default());
        assert_eq!(e, DayEdges::default());
    }

    #[test]
    fn noise_floor_suppresses() {
        let v: Vec<f64> = (0..BINS_PER_DAY).map(|k| if k >= 42 { 3.0 } else { 0.0 }).collect();
        let p = EdgeParams {
            noise_floor: 5.0,
            ..EdgeParams::default()
        };
        assert_eq!(detect_daily_edges(&DayView::new(&v, 5.0), &p).wake_min, None);
    }

    #[test]
    fn bed_after_midnight_uses_next_day() {
        // active 08:00 until 01:00 next day
        let mut v = vec![1.0; 2 * BINS_PER_DAY];
        for x in &mut v[48..150] {
            *x = 40.0;
        }
        let e = detect_daily_edges(&DayView::new(&v, 5.0), &EdgeParams::default());
        assert_eq!(e.wake_min, Some(480.0));
        assert_eq!(e.bed_min, Some(1500.0));
    }
}
