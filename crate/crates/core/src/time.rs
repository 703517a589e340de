//! Local civil time under a fixed UTC offset.
//!
//! A one-month observation window never straddles a DST switch in the
//! datasets this crate targets, so a single offset per dataset is enough.

use chrono::{Datelike, Duration, NaiveDate, NaiveDateTime, Weekday};
use serde::{Deserialize, Serialize};

pub const SECONDS_PER_DAY: i64 = 86_400;
pub const BIN_SECONDS: i64 = 600;
pub const BINS_PER_DAY: usize = 144;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LocalClock {
    pub offset_minutes: i32,
}

impl Default for LocalClock {
    fn default() -> Self {
        // Budapest in April: CEST.
        Self { offset_minutes: 120 }
    }
}

impl LocalClock {
    pub fn new(offset_minutes: i32) -> Self {
        Self { offset_minutes }
    }

    #[inline]
    pub fn local_seconds(&self, epoch: i64) -> i64 {
        epoch + i64::from(self.offset_minutes) * 60
    }

    /// Days since 1970-01-01 in local time.
    #[inline]
    pub fn local_day_number(&self, epoch: i64) -> i64 {
        self.local_seconds(epoch).div_euclid(SECONDS_PER_DAY)
    }

    #[inline]
    pub fn seconds_of_day(&self, epoch: i64) -> u32 {
        self.local_seconds(epoch).rem_euclid(SECONDS_PER_DAY) as u32
    }

    #[inline]
    pub fn bin_of_day(&self, epoch: i64) -> usize {
        (self.seconds_of_day(epoch) as i64 / BIN_SECONDS) as usize
    }

    pub fn local_date(&self, epoch: i64) -> NaiveDate {
        date_from_day_number(self.local_day_number(epoch))
    }

    pub fn weekday(&self, epoch: i64) -> Weekday {
        self.local_date(epoch).weekday()
    }

    /// Epoch seconds of local midnight starting `date`.
    pub fn midnight_epoch(&self, date: NaiveDate) -> i64 {
        day_number(date) * SECONDS_PER_DAY - i64::from(self.offset_minutes) * 60
    }

    pub fn epoch_from_local(&self, local: NaiveDateTime) -> i64 {
        local.and_utc().timestamp() - i64::from(self.offset_minutes) * 60
    }
}

pub fn day_number(date: NaiveDate) -> i64 {
    (date - unix_epoch_date()).num_days()
}

pub fn date_from_day_number(n: i64) -> NaiveDate {
    unix_epoch_date() + Duration::days(n)
}

fn unix_epoch_date() -> NaiveDate {
    NaiveDate::from_ymd_opt(1970, 1, 1).expect("valid date")
}

/// Inclusive range of dates.
pub fn date_range(start: NaiveDate, end: NaiveDate) -> impl Iterator<Item = NaiveDate> {
    let n = (end - start).num_days().max(-1) + 1;
    (0..n).map(move |i| start + Duration::days(i))
}

/// Formats minutes since midnight as `HH:MM` (values past 24h wrap).
pub fn format_minutes(minutes: f64) -> String {
    let total = minutes.round() as i64;
    let m = total.rem_euclid(1440);
    format!("{:02}:{:02}", m / 60, m % 60)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bin_and_day_under_offset() {
        let clock = LocalClock::new(120);
        let local = NaiveDate::from_ymd_opt(2017, 4, 3)
            .unwrap()
            .and_hms_opt(7, 5, 0)
            .unwrap();
        let epoch = clock.epoch_from_local(local);
        assert_eq!(clock.bin_of_day(epoch), 42);
        assert_eq!(clock.local_date(epoch), local.date());
        assert_eq!(clock.weekday(epoch), Weekday::Mon);
        // 01:00 local is still the previous UTC day
        let early = clock.epoch_from_local(local.date().and_hms_opt(1, 0, 0).unwrap());
        assert_eq!(clock.local_date(early), local.date());
        assert_eq!(clock.midnight_epoch(local.date()) + 7 * 3600 + 300, epoch);
    }

    #[test]
    fn format_wraps_past_midnight() {
        assert_eq!(format_minutes(430.0), "07:10");
        assert_eq!(format_minutes(1500.0), "01:00");
    }
}
