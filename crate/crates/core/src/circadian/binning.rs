use chrono::NaiveDate;
use rayon::prelude::*;

use super::{ActivitySeries, GroupLevel, GroupingKind};
use crate::geo::Tessellation;
use crate::ingest::ActivityTable;
use crate::locations::LocationIndex;
use crate::time::{self, LocalClock, BINS_PER_DAY};

/// Maps the activity table's cell indices onto group indices.
#[derive(Debug, Clone)]
pub struct GroupResolver {
    pub names: Vec<String>,
    /// Indexed by table cell index.
    pub of_cell: Vec<Option<u32>>,
}

impl GroupResolver {
    pub fn cells(table: &ActivityTable) -> Self {
        Self {
            names: table.cells().to_vec(),
            of_cell: (0..table.cells().len() as u32).map(Some).collect(),
        }
    }

    /// Cells unknown to the tessellation resolve to no group.
    pub fn sites(table: &ActivityTable, tess: &Tessellation) -> Self {
        Self {
            names: tess.sites().iter().map(|s| s.site_id.clone()).collect(),
            of_cell: table
                .cells()
                .iter()
                .map(|c| tess.site_of_cell(c).map(|i| i as u32))
                .collect(),
        }
    }

    pub fn city(table: &ActivityTable) -> Self {
        Self {
            names: vec!["all".to_owned()],
            of_cell: vec![Some(0); table.cells().len()],
        }
    }

    pub fn for_level(level: GroupLevel, table: &ActivityTable, tess: Option<&Tessellation>) -> Option<Self> {
        match level {
            GroupLevel::Cell => Some(Self::cells(table)),
            GroupLevel::Site => tess.map(|t| Self::sites(table, t)),
            GroupLevel::City => Some(Self::city(table)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinnedGroups {
    pub kind: GroupingKind,
    /// Groups with at least one record, in group-index order.
    pub series: Vec<ActivitySeries>,
    /// Records whose sim has no home / work (inhabitant and worker modes),
    /// or whose work lies in its home group (worker mode).
    pub skipped_unknown_sim: u64,
    /// Records in cells outside every group, or outside the day range.
    pub skipped_unresolved: u64,
}

#[derive(Clone)]
struct Acc {
    bins: Vec<u32>,
    unknown_sim: u64,
    unresolved: u64,
}

impl Acc {
    fn merge(mut self, other: Acc) -> Acc {
        for (a, b) in self.bins.iter_mut().zip(other.bins) {
            *a += b;
        }
        self.unknown_sim += other.unknown_sim;
        self.unresolved += other.unresolved;
        self
    }
}

/// Counts records into 10-minute bins per group and local day over
/// `n_days` days starting at `start`. Bin index is
/// `floor(local seconds of day / 600)`.
///
/// `locations` is required for inhabitant- and worker-based grouping;
/// without it every record is counted as belonging to an unknown sim.
pub fn bin_activity(
    table: &ActivityTable,
    kind: GroupingKind,
    groups: &GroupResolver,
    locations: Option<&LocationIndex>,
    start: NaiveDate,
    n_days: usize,
    clock: &LocalClock,
) -> BinnedGroups {
    let n_groups = groups.names.len();
    let stride = n_days * BINS_PER_DAY;
    let first_day = time::day_number(start);
    let empty = Acc {
        bins: vec![0; n_groups * stride],
        unknown_sim: 0,
        unresolved: 0,
    };

    let acc = table
        .par_sims()
        .fold(
            || empty.clone(),
            |mut acc, (sim, recs)| {
                let group_of_sim = match kind {
                    GroupingKind::CellBased => None,
                    GroupingKind::InhabitantBased => {
                        locations.and_then(|l| l.home_cell[sim]).map(|c| groups.of_cell[c as usize])
                    }
                    GroupingKind::WorkerBased => locations.and_then(|l| {
                        let work = groups.of_cell[l.work_cell[sim]? as usize];
                        let home = l.home_cell[sim].and_then(|c| groups.of_cell[c as usize]);
                        // Working where one lives is indistinguishable from
                        // staying home all day.
                        (work.is_none() || work != home).then_some(work)
                    }),
                };
                if kind.requires_locations() && group_of_sim.is_none() {
                    acc.unknown_sim += recs.len() as u64;
                    return acc;
                }
                for a in recs {
                    let here = groups.of_cell[a.cell as usize];
                    let g = match kind {
                        GroupingKind::CellBased => here,
                        GroupingKind::InhabitantBased => group_of_sim.flatten(),
                        GroupingKind::WorkerBased => group_of_sim.flatten().filter(|g| here == Some(*g)),
                    };
                    let day = clock.local_day_number(a.timestamp) - first_day;
                    match g {
                        Some(g) if (0..n_days as i64).contains(&day) => {
                            let idx = g as usize * stride + day as usize * BINS_PER_DAY + clock.bin_of_day(a.timestamp);
                            acc.bins[idx] += 1;
                        }
                        // A worker's records away from the workplace are not
                        // part of the worker-based curve.
                        None if kind == GroupingKind::WorkerBased && group_of_sim.flatten().is_some() => {}
                        _ => acc.unresolved += 1,
                    }
                }
                acc
            },
        )
        .reduce(|| empty.clone(), Acc::merge);

    let series = (0..n_groups)
        .filter_map(|g| {
            let bins = acc.bins[g * stride..(g + 1) * stride].to_vec();
            bins.iter().any(|b| *b > 0).then(|| ActivitySeries {
                group_id: groups.names[g].clone(),
                start,
                bins,
            })
        })
        .collect();
    BinnedGroups {
        kind,
        series,
        skipped_unknown_sim: acc.unknown_sim,
        skipped_unresolved: acc.unresolved,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn d(s: &str) -> NaiveDate {
        s.parse().unwrap()
    }

    #[test]
    fn record_at_0705_lands_in_bin_42() {
        let clock = LocalClock::new(120);
        let ts = clock.epoch_from_local(d("2017-04-03").and_hms_opt(7, 5, 0).unwrap());
        let table = ActivityTable::from_records([("s", ts, "c")]);
        let out = bin_activity(
            &table,
            GroupingKind::CellBased,
            &GroupResolver::cells(&table),
            None,
            d("2017-04-03"),
            1,
            &clock,
        );
        assert_eq!(out.series.len(), 1);
        assert_eq!(out.series[0].bins[42], 1);
        assert_eq!(out.series[0].total(), 1);
    }

    #[test]
    fn inhabitant_mode_without_home_skips() {
        let clock = LocalClock::new(0);
        let table = ActivityTable::from_records([("s", 100, "c"), ("t", 200, "c")]);
        let loc = LocationIndex {
            home_cell: vec![Some(0), None],
            work_cell: vec![None, None],
        };
        let out = bin_activity(
            &table,
            GroupingKind::InhabitantBased,
            &GroupResolver::cells(&table),
            Some(&loc),
            d("1970-01-01"),
            1,
            &clock,
        );
        assert_eq!(out.series[0].total(), 1);
        assert_eq!(out.skipped_unknown_sim, 1);
    }

    #[test]
    fn worker_mode_counts_only_at_workplace() {
        let clock = LocalClock::new(0);
        // cells: a (home), b (work)
        let table = ActivityTable::from_records([("s", 100, "a"), ("s", 40_000, "b"), ("s", 40_600, "b")]);
        let loc = LocationIndex {
            home_cell: vec![Some(0)],
            work_cell: vec![Some(1)],
        };
        let out = bin_activity(
            &table,
            GroupingKind::WorkerBased,
            &GroupResolver::cells(&table),
            Some(&loc),
            d("1970-01-01"),
            1,
            &clock,
        );
        assert_eq!(out.series.len(), 1);
        assert_eq!(out.series[0].group_id, "b");
        assert_eq!(out.series[0].total(), 2);
        assert_eq!(out.skipped_unresolved, 0);
    }
}
