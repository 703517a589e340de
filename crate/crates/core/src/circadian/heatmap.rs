use chrono::Datelike;
use rayon::prelude::*;

use crate::ingest::{Activity, ActivityTable};
use crate::time::LocalClock;

/// Record counts per weekday (Monday = 0) and local hour.
pub type Heatmap = [[u64; 24]; 7];

/// Counts the records for which `keep(sim, record)` holds.
pub fn weekday_hour_heatmap<F>(table: &ActivityTable, clock: &LocalClock, keep: F) -> Heatmap
where
    F: Fn(usize, &Activity) -> bool + Sync,
{
    table
        .par_sims()
        .fold(
            || [[0u64; 24]; 7],
            |mut h, (sim, recs)| {
                for a in recs.iter().filter(|a| keep(sim, a)) {
                    let wd = clock.local_date(a.timestamp).weekday().num_days_from_monday() as usize;
                    let hour = (clock.seconds_of_day(a.timestamp) / 3600) as usize;
                    h[wd][hour] += 1;
                }
                h
            },
        )
        .reduce(
            || [[0u64; 24]; 7],
            |mut a, b| {
                for (ra, rb) in a.iter_mut().zip(b) {
                    for (x, y) in ra.iter_mut().zip(rb) {
                        *x += y;
                    }
                }
                a
            },
        )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn monday_morning() {
        let clock = LocalClock::new(120);
        // 2017-04-03 is a Monday
        let ts = clock.epoch_from_local("2017-04-03T08:30:00".parse().unwrap());
        let t = ActivityTable::from_records([("a", ts, "c"), ("b", ts + 3600, "c")]);
        let h = weekday_hour_heatmap(&t, &clock, |_, _| true);
        assert_eq!(h[0][8], 1);
        assert_eq!(h[0][9], 1);
        let only_a = weekday_hour_heatmap(&t, &clock, |s, _| s == 0);
        assert_eq!(only_a.iter().flatten().sum::<u64>(), 1);
    }
}
