use serde::{Deserialize, Serialize};

use super::DailyEdges;
use crate::locations::DayClass;
use crate::stats::lower_median;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DayFilter {
    Workday,
    Holiday,
    All,
}

impl DayFilter {
    pub fn as_str(self) -> &'static str {
        match self {
            DayFilter::Workday => "workday",
            DayFilter::Holiday => "holiday",
            DayFilter::All => "all",
        }
    }

    pub fn admits(self, class: DayClass) -> bool {
        match self {
            DayFilter::Workday => class == DayClass::Workday,
            DayFilter::Holiday => class == DayClass::Holiday,
            DayFilter::All => true,
        }
    }
}

/// Medians over the days that produced the respective edge. Day length
/// only uses days with both edges.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeSummary {
    pub group_id: String,
    pub filter: DayFilter,
    pub n_days: usize,
    pub wake_median: Option<f64>,
    pub bed_median: Option<f64>,
    pub day_length_median: Option<f64>,
}

/// `edges` should belong to one group.
pub fn median_edges(edges: &[DailyEdges], filter: DayFilter) -> EdgeSummary {
    let days: Vec<&DailyEdges> = edges.iter().filter(|e| filter.admits(e.day_class)).collect();
    let wake: Vec<f64> = days.iter().filter_map(|e| e.wake_min).collect();
    let bed: Vec<f64> = days.iter().filter_map(|e| e.bed_min).collect();
    let len: Vec<f64> = days.iter().filter_map(|e| e.day_length_min()).collect();
    EdgeSummary {
        group_id: edges.first().map(|e| e.group_id.clone()).unwrap_or_default(),
        filter,
        n_days: days.len(),
        wake_median: lower_median(&wake),
        bed_median: lower_median(&bed),
        day_length_median: lower_median(&len),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn e(day: u32, class: DayClass, wake: Option<f64>, bed: Option<f64>) -> DailyEdges {
        DailyEdges {
            group_id: "g".into(),
            date: chrono::NaiveDate::from_ymd_opt(2017, 4, day).unwrap(),
            day_class: class,
            wake_min: wake,
            bed_min: bed,
        }
    }

    #[test]
    fn medians_by_class() {
        let v = vec![
            e(3, DayClass::Workday, Some(400.0), Some(1300.0)),
            e(4, DayClass::Workday, Some(420.0), None),
            e(5, DayClass::Workday, Some(440.0), Some(1320.0)),
            e(8, DayClass::Holiday, Some(500.0), Some(1350.0)),
        ];
        let w = median_edges(&v, DayFilter::Workday);
        assert_eq!(w.n_days, 3);
        assert_eq!(w.wake_median, Some(420.0));
        assert_eq!(w.bed_median, Some(1300.0));
        assert_eq!(w.day_length_median, Some(880.0));
        let h = median_edges(&v, DayFilter::Holiday);
        assert_eq!(h.wake_median, Some(500.0));
        assert_eq!(median_edges(&v, DayFilter::All).n_days, 4);
    }
}
