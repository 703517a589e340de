//! Synthetic CDR datasets with planted ground truth.
//!
//! Sites are scattered uniformly in a square around a city center. Every
//! sim has a home site, workers also a work site with the site's shift.
//! Per day a sim emits a Poisson number of records whose 10-minute bins
//! follow a plateau profile: a small night floor, a logistic rise at the
//! sim's wake-up time and a logistic fall at its bedtime. Workers are at
//! their work cell during the shift on workdays and at home otherwise, with
//! a small chance of an away visit to a random other site.
//!
//! Every random draw comes from a ChaCha8 stream keyed by the seed and the
//! sim index, so output does not depend on the number of threads.

mod world;

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use chrono::NaiveDate;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use world::{GroundTruth, SimPlan, SimTruth, SiteTruth, SynthRecord, SynthSite, World};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroupSpec {
    pub name: String,
    pub share: f64,
    /// Members get a work site and spend its shift there on workdays.
    pub works: bool,
    pub wake_mean_min: f64,
    pub wake_sigma_min: f64,
    pub bed_mean_min: f64,
    pub bed_sigma_min: f64,
    pub holiday_wake_shift_min: f64,
    pub holiday_bed_shift_min: f64,
    pub rate_per_day: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShiftSpec {
    pub share: f64,
    pub start_min: f64,
    pub end_min: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub seed: u64,
    pub start_date: NaiveDate,
    pub days: u32,
    pub tz_offset_minutes: i32,
    /// Non-weekend holidays.
    pub extra_holidays: Vec<NaiveDate>,
    pub n_sites: usize,
    pub n_sims: usize,
    pub center_lat: f64,
    pub center_lon: f64,
    /// Side of the square the sites are drawn from.
    pub box_km: f64,
    pub max_cells_per_site: u32,
    pub groups: Vec<GroupSpec>,
    /// Working hours of the sites; each site draws one.
    pub shifts: Vec<ShiftSpec>,
    /// Log-normal spread of the per-sim record rate (mean preserved).
    pub rate_sigma: f64,
    /// Time the logistic ramps take from 10% to 90%.
    pub rise_width_min: f64,
    /// Night intensity relative to the daytime plateau.
    pub night_floor: f64,
    pub away_workday: f64,
    pub away_holiday: f64,
    pub away_nonworker: f64,
    /// Share of sites that attract few workers.
    pub low_volume_site_share: f64,
    pub low_volume_weight: f64,
    /// Site property prices are uniform in this range, HUF per m².
    pub price_min_huf: f64,
    pub price_max_huf: f64,
    /// Wake-up shift in minutes per 1M HUF/m² above the price midpoint.
    pub wake_price_gradient_min: f64,
    pub ads_per_site: usize,
    /// Phone prices track home prices from this low to high end, EUR.
    pub phone_price_low_eur: f64,
    pub phone_price_high_eur: f64,
    pub phone_price_noise_eur: f64,
    pub multi_device_share: f64,
    pub non_phone_share: f64,
    pub unknown_tac_share: f64,
    pub missing_subscriber_share: f64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        let group = |name: &str, share: f64, works: bool| GroupSpec {
            name: name.to_owned(),
            share,
            works,
            wake_mean_min: 430.0,
            wake_sigma_min: 20.0,
            bed_mean_min: 1190.0,
            bed_sigma_min: 20.0,
            holiday_wake_shift_min: 60.0,
            holiday_bed_shift_min: 40.0,
            rate_per_day: 5.0 / 3.0,
        };
        Self {
            seed: 20170401,
            start_date: NaiveDate::from_ymd_opt(2017, 4, 1).expect("valid date"),
            days: 30,
            tz_offset_minutes: 120,
            extra_holidays: vec![
                NaiveDate::from_ymd_opt(2017, 4, 14).expect("valid date"),
                NaiveDate::from_ymd_opt(2017, 4, 17).expect("valid date"),
            ],
            n_sites: 50,
            n_sims: 100_000,
            center_lat: 47.4979,
            center_lon: 19.0402,
            box_km: 30.0,
            max_cells_per_site: 3,
            groups: vec![group("workers", 0.6, true), group("others", 0.4, false)],
            shifts: vec![
                ShiftSpec {
                    share: 0.6,
                    start_min: 540.0,
                    end_min: 1020.0,
                },
                ShiftSpec {
                    share: 0.2,
                    start_min: 480.0,
                    end_min: 960.0,
                },
                ShiftSpec {
                    share: 0.2,
                    start_min: 600.0,
                    end_min: 1080.0,
                },
            ],
            rate_sigma: 1.0,
            rise_width_min: 30.0,
            night_floor: 0.03,
            away_workday: 0.05,
            away_holiday: 0.08,
            away_nonworker: 0.1,
            low_volume_site_share: 0.1,
            low_volume_weight: 0.02,
            price_min_huf: 320_000.0,
            price_max_huf: 1_280_000.0,
            wake_price_gradient_min: 60.0,
            ads_per_site: 30,
            phone_price_low_eur: 100.0,
            phone_price_high_eur: 700.0,
            phone_price_noise_eur: 60.0,
            multi_device_share: 0.04,
            non_phone_share: 0.02,
            unknown_tac_share: 0.01,
            missing_subscriber_share: 0.4,
        }
    }
}

fn check(ok: bool, msg: &str) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::Config(format!("synthetic scenario: {msg}")))
    }
}

fn is_prob(p: f64) -> bool {
    (0.0..=1.0).contains(&p)
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        check(self.days >= 1, "days must be at least 1")?;
        check(self.n_sites >= 2, "at least two sites are needed")?;
        check(self.n_sims >= 1, "n_sims must be positive")?;
        check(self.box_km > 0.0, "box_km must be positive")?;
        check((1..=9).contains(&self.max_cells_per_site), "max_cells_per_site must be in 1..=9")?;
        check(!self.groups.is_empty(), "at least one group is needed")?;
        let share: f64 = self.groups.iter().map(|g| g.share).sum();
        check((share - 1.0).abs() < 1e-9, "group shares must sum to 1")?;
        for g in &self.groups {
            check(g.share >= 0.0, "group shares must be non-negative")?;
            check(g.rate_per_day > 0.0, "group rates must be positive")?;
            check(g.wake_sigma_min >= 0.0 && g.bed_sigma_min >= 0.0, "sigmas must be non-negative")?;
            check(g.bed_mean_min > g.wake_mean_min, "bedtime must be after wake-up")?;
            check(
                g.bed_mean_min + g.holiday_bed_shift_min > g.wake_mean_min + g.holiday_wake_shift_min,
                "holiday bedtime must be after holiday wake-up",
            )?;
        }
        if self.groups.iter().any(|g| g.works) {
            check(!self.shifts.is_empty(), "working groups need shifts")?;
            let share: f64 = self.shifts.iter().map(|s| s.share).sum();
            check((share - 1.0).abs() < 1e-9, "shift shares must sum to 1")?;
        }
        for s in &self.shifts {
            check(s.share >= 0.0, "shift shares must be non-negative")?;
            check(s.end_min > s.start_min, "shift end must be after its start")?;
            check(s.start_min >= 0.0 && s.end_min <= 1440.0, "shifts must lie within one day")?;
        }
        check(self.rate_sigma >= 0.0, "rate_sigma must be non-negative")?;
        check(self.rise_width_min > 0.0, "rise_width_min must be positive")?;
        check((0.0..1.0).contains(&self.night_floor), "night_floor must be in [0, 1)")?;
        for p in [
            self.away_workday,
            self.away_holiday,
            self.away_nonworker,
            self.low_volume_site_share,
            self.multi_device_share,
            self.non_phone_share,
            self.unknown_tac_share,
            self.missing_subscriber_share,
        ] {
            check(is_prob(p), "probabilities must be in [0, 1]")?;
        }
        check(self.low_volume_weight > 0.0, "low_volume_weight must be positive")?;
        check(
            self.price_min_huf > 0.0 && self.price_max_huf > self.price_min_huf,
            "price range must be positive and increasing",
        )?;
        check(self.phone_price_noise_eur >= 0.0, "phone price noise must be non-negative")?;
        Ok(())
    }

    pub fn end_date(&self) -> NaiveDate {
        self.start_date + chrono::Duration::days(i64::from(self.days) - 1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenerationReport {
    pub sims: usize,
    pub sites: usize,
    pub cells: usize,
    pub records: u64,
}

/// File names written by [`generate`].
pub const CDR_FILE: &str = "cdr_wide.csv";
pub const CELLS_FILE: &str = "cells.csv";
pub const CALENDAR_FILE: &str = "calendar.json";
pub const ADS_FILE: &str = "estate_ads.csv";
pub const CATALOG_FILE: &str = "device_catalog.csv";
pub const TRUTH_FILE: &str = "ground_truth.json";

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|e| Error::io(path, e))
}

fn finish(mut w: BufWriter<File>, path: &Path) -> Result<()> {
    w.flush().map_err(|e| Error::io(path, e))
}

/// Writes the CDR dump in sim order, formatting batches of sims in
/// parallel.
pub fn write_cdr<W: Write>(world: &World, out: &mut W) -> Result<u64> {
    out.write_all(b"sim_id,timestamp,cell_id,customer_type,subscription_type,age,gender,tac\n")
        .map_err(Error::Stream)?;
    let mut total = 0;
    let n = world.sims.len();
    const BATCH: usize = 4096;
    for lo in (0..n).step_by(BATCH) {
        let chunks: Vec<(Vec<u8>, u64)> = (lo..(lo + BATCH).min(n))
            .into_par_iter()
            .map(|i| {
                let mut buf = Vec::with_capacity(4096);
                let k = world.write_sim_csv(i, &mut buf);
                (buf, k)
            })
            .collect();
        for (buf, k) in chunks {
            out.write_all(&buf).map_err(Error::Stream)?;
            total += k;
        }
    }
    Ok(total)
}

/// Builds the world for `config` and writes every input file plus
/// `ground_truth.json` into `dir`.
pub fn generate(config: &ScenarioConfig, dir: &Path) -> Result<GenerationReport> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let world = World::build(config)?;

    let path = dir.join(CDR_FILE);
    let mut w = BufWriter::with_capacity(1 << 20, File::create(&path).map_err(|e| Error::io(&path, e))?);
    let records = write_cdr(&world, &mut w).map_err(|e| match e {
        Error::Stream(io) => Error::io(&path, io),
        other => other,
    })?;
    finish(w, &path)?;

    let path = dir.join(CELLS_FILE);
    let mut w = create(&path)?;
    crate::geo::write_cells_csv(&world.cells(), &mut w)?;
    finish(w, &path)?;

    let path = dir.join(CALENDAR_FILE);
    let mut w = create(&path)?;
    world.calendar.write_json(&mut w)?;
    finish(w, &path)?;

    let path = dir.join(ADS_FILE);
    let mut w = create(&path)?;
    crate::ses::write_estate_ads_csv(&world.ads, &mut w)?;
    finish(w, &path)?;

    let path = dir.join(CATALOG_FILE);
    let mut w = create(&path)?;
    crate::ses::write_device_catalog_csv(&world.catalog, &mut w)?;
    finish(w, &path)?;

    let path = dir.join(TRUTH_FILE);
    let mut w = create(&path)?;
    serde_json::to_writer(&mut w, &world.ground_truth())?;
    finish(w, &path)?;

    Ok(GenerationReport {
        sims: world.sims.len(),
        sites: world.sites.len(),
        cells: world.sites.iter().map(|s| s.cells.len()).sum(),
        records,
    })
}
