//! Subcommands over a shared run directory.
//!
//! Every subcommand reads the artifacts of earlier ones from the run
//! directory and writes its own next to them. Files are written to a
//! temporary name and renamed, so a failed step never leaves a truncated
//! artifact behind.

use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use chrono::{Datelike, Duration, NaiveDate};
use serde::Serialize;
use serde_json::{json, Value};

use crate::circadian::{
    bin_activity, detect_series, flag_low_volume, median_edges, periodogram, read_edges_daily_csv,
    read_edges_summary_csv, read_working_hours_csv, smooth_series, start_end_pairing, weekday_hour_heatmap,
    working_hours, write_edges_daily_csv, write_edges_summary_csv, write_heatmap_csv, write_pairing_csv,
    write_periodogram_csv, write_working_hours_csv, DayFilter, EdgesDailyRow, EdgesSummaryRow, GroupLevel,
    GroupResolver, GroupingKind, Heatmap, WorkingHours, WorkingHoursRow,
};
use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::geo::{build_voronoi, merge_cells_to_sites, read_cells_csv, BoundingBox, LatLon, LocalProjection, Tessellation};
use crate::ingest::{
    activity_histograms, filter_sims, ingest_reader, read_devices_csv, write_devices_csv, write_subscribers_csv,
    ActivityTable,
};
use crate::locations::{assign_locations, read_locations_csv, write_locations_csv, Calendar, DayClass, LocationIndex};
use crate::mobility::{
    city_daily, daily_mobility, minmax_normalize, pearson_aligned, read_city_daily_csv, write_city_daily_csv,
    write_mobility_daily_csv,
};
use crate::ses::{
    build_profiles, catalog_by_tac, categorize, read_device_catalog_csv, read_estate_ads_csv, site_price,
    wakeup_by_category, write_matrix_csv, write_profiles_csv, ColumnAxis,
};
use crate::stats::lower_median;
use crate::synthgen;
use crate::time::LocalClock;

pub const ACTIVITY: &str = "activity.csv";
pub const SUBSCRIBERS: &str = "subscribers.csv";
pub const DEVICES: &str = "devices.csv";
pub const INGEST_REPORT: &str = "ingest_report.json";
pub const SITES: &str = "sites.geojson";
pub const LOCATIONS: &str = "locations.csv";
pub const MOBILITY_DAILY: &str = "mobility_daily.csv";
pub const MOBILITY_CITY: &str = "mobility_city_daily.csv";
pub const MOBILITY_REPORT: &str = "mobility_report.json";
pub const EDGES_DAILY: &str = "edges_daily.csv";
pub const EDGES_SUMMARY: &str = "edges_summary.csv";
pub const HEATMAP: &str = "heatmap.csv";
pub const PERIODOGRAM: &str = "periodogram.csv";
pub const CIRCADIAN_REPORT: &str = "circadian_report.json";
pub const WORKING_HOURS: &str = "working_hours.csv";
pub const WORKING_HOURS_DAILY: &str = "working_hours_daily.csv";
pub const PAIRING: &str = "pairing.csv";
pub const SITE_PRICES: &str = "site_prices.csv";
pub const SES_PROFILES: &str = "ses_profiles.csv";
pub const SES_MATRIX_PRICE: &str = "ses_matrix_price.csv";
pub const SES_MATRIX_AGE: &str = "ses_matrix_age.csv";
pub const SES_REPORT: &str = "ses_report.json";
pub const CORRELATION: &str = "correlation.json";
pub const CORRELATION_DAILY: &str = "correlation_daily.csv";
pub const SUMMARY: &str = "summary.json";
pub const SYNTH_REPORT: &str = "synth_report.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Subcommand {
    Synth,
    Ingest,
    Tessellate,
    Locate,
    Mobility,
    Circadian,
    WorkingHours,
    Ses,
    Correlate,
    Report,
}

impl Subcommand {
    /// Pipeline order.
    pub const ALL: [Subcommand; 10] = [
        Subcommand::Synth,
        Subcommand::Ingest,
        Subcommand::Tessellate,
        Subcommand::Locate,
        Subcommand::Mobility,
        Subcommand::Circadian,
        Subcommand::WorkingHours,
        Subcommand::Ses,
        Subcommand::Correlate,
        Subcommand::Report,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Subcommand::Synth => "synth",
            Subcommand::Ingest => "ingest",
            Subcommand::Tessellate => "tessellate",
            Subcommand::Locate => "locate",
            Subcommand::Mobility => "mobility",
            Subcommand::Circadian => "circadian",
            Subcommand::WorkingHours => "working-hours",
            Subcommand::Ses => "ses",
            Subcommand::Correlate => "correlate",
            Subcommand::Report => "report",
        }
    }
}

/// Runs one subcommand. `threads` caps the worker pool; `None` uses the
/// global pool. Results do not depend on the thread count.
pub fn run(cmd: Subcommand, cfg: &RunConfig, threads: Option<usize>) -> Result<()> {
    cfg.validate()?;
    let ctx = Ctx::new(cfg)?;
    match threads {
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n.max(1))
                .build()
                .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
            pool.install(|| ctx.dispatch(cmd))
        }
        None => ctx.dispatch(cmd),
    }
}

/// Every subcommand in order.
pub fn run_all(cfg: &RunConfig, threads: Option<usize>) -> Result<()> {
    for cmd in Subcommand::ALL {
        run(cmd, cfg, threads)?;
    }
    Ok(())
}

struct Ctx<'a> {
    cfg: &'a RunConfig,
    run_dir: PathBuf,
    input_dir: PathBuf,
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path).map(BufReader::new).map_err(|e| Error::io(path, e))
}

/// Writes through `f` into `path` via a temporary sibling file.
fn write_atomic(path: &Path, f: impl FnOnce(&mut BufWriter<File>) -> Result<()>) -> Result<()> {
    let tmp = path.with_extension("tmp");
    let file = File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
    let mut w = BufWriter::with_capacity(1 << 20, file);
    f(&mut w)?;
    w.flush().map_err(|e| Error::io(&tmp, e))?;
    drop(w);
    std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    write_atomic(path, |w| {
        serde_json::to_writer_pretty(&mut *w, value)?;
        w.write_all(b"\n")?;
        Ok(())
    })
}

fn write_csv_rows<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    write_atomic(path, |w| {
        let mut c = csv::Writer::from_writer(w);
        for r in rows {
            c.serialize(r)?;
        }
        c.flush()?;
        Ok(())
    })
}

/// Calendar range, or the local dates spanned by the records.
fn day_range(calendar: &Calendar, table: &ActivityTable, clock: &LocalClock) -> Result<(NaiveDate, usize)> {
    if let (Some(s), Some(e)) = (calendar.start, calendar.end) {
        return Ok((s, ((e - s).num_days() + 1) as usize));
    }
    let mut lo = i64::MAX;
    let mut hi = i64::MIN;
    for a in table.records() {
        lo = lo.min(a.timestamp);
        hi = hi.max(a.timestamp);
    }
    if lo > hi {
        return Err(Error::invalid("activity table is empty"));
    }
    let (s, e) = (clock.local_date(lo), clock.local_date(hi));
    Ok((s, ((e - s).num_days() + 1) as usize))
}

fn day_classes(calendar: &Calendar, start: NaiveDate, n_days: usize) -> Result<Vec<DayClass>> {
    (0..n_days).map(|d| calendar.classify_day(start + Duration::days(d as i64))).collect()
}

fn class_lookup(classes: &[DayClass], start: NaiveDate) -> impl Fn(NaiveDate) -> DayClass + '_ {
    move |date| classes[(date - start).num_days() as usize]
}

/// Inhabitant-based rows of the configured level. City level is the single
/// group `all`; cell and site level never coexist for one kind.
fn rows_of_level(rows: &[EdgesDailyRow], kind: GroupingKind, level: GroupLevel) -> Vec<&EdgesDailyRow> {
    rows.iter()
        .filter(|r| r.group_kind == kind)
        .filter(|r| (level == GroupLevel::City) == (r.group_id == "all"))
        .collect()
}

impl<'a> Ctx<'a> {
    fn new(cfg: &'a RunConfig) -> Result<Self> {
        let run_dir = cfg.paths.run_dir.clone();
        std::fs::create_dir_all(&run_dir).map_err(|e| Error::io(&run_dir, e))?;
        Ok(Self {
            cfg,
            input_dir: cfg.input_dir().to_path_buf(),
            run_dir,
        })
    }

    fn dispatch(&self, cmd: Subcommand) -> Result<()> {
        match cmd {
            Subcommand::Synth => self.synth(),
            Subcommand::Ingest => self.ingest(),
            Subcommand::Tessellate => self.tessellate(),
            Subcommand::Locate => self.locate(),
            Subcommand::Mobility => self.mobility(),
            Subcommand::Circadian => self.circadian(),
            Subcommand::WorkingHours => self.working_hours(),
            Subcommand::Ses => self.ses(),
            Subcommand::Correlate => self.correlate(),
            Subcommand::Report => self.report(),
        }
    }

    fn out(&self, name: &str) -> PathBuf {
        self.run_dir.join(name)
    }

    /// An artifact of an earlier step.
    fn artifact(&self, name: &str, producer: Subcommand) -> Result<PathBuf> {
        let p = self.out(name);
        if p.is_file() {
            Ok(p)
        } else {
            Err(Error::MissingArtifact {
                path: p,
                producer: producer.as_str().to_owned(),
            })
        }
    }

    /// An input file; `synth` produces all of them.
    fn input(&self, name: &str) -> Result<PathBuf> {
        let p = self.input_dir.join(name);
        if p.is_file() {
            Ok(p)
        } else {
            Err(Error::MissingArtifact {
                path: p,
                producer: Subcommand::Synth.as_str().to_owned(),
            })
        }
    }

    /// `calendar.json` when present, otherwise weekends only. The config's
    /// offset wins over the file's.
    fn calendar(&self) -> Result<Calendar> {
        let p = self.input_dir.join(&self.cfg.paths.calendar);
        let mut cal = if p.is_file() {
            Calendar::read_json(open(&p)?)?
        } else {
            Calendar::new(120)
        };
        if let Some(tz) = self.cfg.calendar.tz_offset_minutes {
            cal.tz_offset_minutes = tz;
        }
        Ok(cal)
    }

    fn activity(&self) -> Result<ActivityTable> {
        ActivityTable::read_csv(open(&self.artifact(ACTIVITY, Subcommand::Ingest)?)?)
    }

    fn tessellation(&self) -> Result<Tessellation> {
        Tessellation::read_geojson(open(&self.artifact(SITES, Subcommand::Tessellate)?)?)
    }

    fn location_index(&self, table: &ActivityTable) -> Result<LocationIndex> {
        let rows = read_locations_csv(open(&self.artifact(LOCATIONS, Subcommand::Locate)?)?)?;
        Ok(LocationIndex::new(table, &rows, self.cfg.locations.min_support))
    }

    fn synth(&self) -> Result<()> {
        std::fs::create_dir_all(&self.input_dir).map_err(|e| Error::io(&self.input_dir, e))?;
        let report = synthgen::generate(&self.cfg.synth, &self.input_dir)?;
        write_json(&self.out(SYNTH_REPORT), &report)
    }

    fn ingest(&self) -> Result<()> {
        let cal = self.calendar()?;
        let clock = cal.clock();
        let src = self.input(&self.cfg.paths.cdr)?;
        let (tables, parse) = ingest_reader(open(&src)?, &self.cfg.ingest.schema, &clock)?;
        let (histogram, active_days) = activity_histograms(&tables.activity, &self.cfg.ingest.histogram_edges, &clock)?;
        let (activity, exclusion) = filter_sims(
            &tables.activity,
            self.cfg.ingest.min_records as usize,
            self.cfg.ingest.min_active_days as usize,
            &clock,
        );
        let kept = |sim: &str| activity.sim_index(sim).is_some();
        let subscribers: Vec<_> = tables.subscribers.iter().filter(|s| kept(&s.sim_id)).cloned().collect();
        let devices: Vec<_> = tables.devices.iter().filter(|d| kept(&d.sim_id)).cloned().collect();

        write_atomic(&self.out(ACTIVITY), |w| activity.write_csv(w))?;
        write_atomic(&self.out(SUBSCRIBERS), |w| write_subscribers_csv(&subscribers, w))?;
        write_atomic(&self.out(DEVICES), |w| write_devices_csv(&devices, w))?;
        write_json(
            &self.out(INGEST_REPORT),
            &json!({
                "lines_in": parse.lines_in,
                "records_parsed": parse.records_out,
                "malformed_lines": parse.malformed,
                "subscriber_conflicts": tables.subscriber_conflicts,
                "sims_total": tables.activity.sims().len(),
                "cells": tables.activity.cells().len(),
                "exclusion": exclusion,
                "records_kept": activity.len(),
                "histogram_scope": "all sims, before filtering",
                "records_per_sim": histogram,
                "sims_per_active_days": active_days,
            }),
        )
    }

    fn tessellate(&self) -> Result<()> {
        let cells = read_cells_csv(open(&self.input(&self.cfg.paths.cells)?)?)?;
        if cells.is_empty() {
            return Err(Error::invalid("cells.csv has no rows"));
        }
        let sites = merge_cells_to_sites(&cells, self.cfg.geo.merge_tolerance_m)?;
        let bbox = BoundingBox::around(sites.iter().map(|s| &s.location), self.cfg.geo.bbox_pad_km)
            .ok_or_else(|| Error::invalid("cannot bound the site locations"))?;
        let tess = build_voronoi(sites, bbox)?;
        write_atomic(&self.out(SITES), |w| tess.write_geojson(w))
    }

    fn locate(&self) -> Result<()> {
        let table = self.activity()?;
        let rows = assign_locations(&table, &self.calendar()?);
        write_atomic(&self.out(LOCATIONS), |w| write_locations_csv(&rows, w))
    }

    fn mobility(&self) -> Result<()> {
        let table = self.activity()?;
        let cells = read_cells_csv(open(&self.input(&self.cfg.paths.cells)?)?)?;
        let by_id: HashMap<&str, LatLon> = cells.iter().map(|c| (c.cell_id.as_str(), c.centroid)).collect();
        let centroids: Vec<Option<LatLon>> = table.cells().iter().map(|c| by_id.get(c.as_str()).copied()).collect();
        let proj = LocalProjection::centered_on(cells.iter().map(|c| &c.centroid));
        let clock = self.calendar()?.clock();
        let (rows, skipped) = daily_mobility(&table, &centroids, &proj, &clock);
        let city = city_daily(&rows, self.cfg.mobility.aggregate);
        if self.cfg.mobility.write_daily {
            write_atomic(&self.out(MOBILITY_DAILY), |w| write_mobility_daily_csv(&rows, w))?;
        }
        write_atomic(&self.out(MOBILITY_CITY), |w| write_city_daily_csv(&city, w))?;
        write_json(
            &self.out(MOBILITY_REPORT),
            &json!({
                "sim_days": rows.len(),
                "records_without_coordinates": skipped,
                "aggregate": self.cfg.mobility.aggregate,
            }),
        )
    }

    fn circadian(&self) -> Result<()> {
        let c = &self.cfg.circadian;
        let table = self.activity()?;
        let cal = self.calendar()?;
        let clock = cal.clock();
        let (start, n_days) = day_range(&cal, &table, &clock)?;
        let classes = day_classes(&cal, start, n_days)?;
        let class_of = class_lookup(&classes, start);

        let needs_locations = c.groupings.iter().any(|g| g.kind.requires_locations());
        let needs_sites = c.groupings.iter().any(|g| g.level == GroupLevel::Site);
        let locations = if needs_locations { Some(self.location_index(&table)?) } else { None };
        let tess = if needs_sites { Some(self.tessellation()?) } else { None };

        let params = c.edge_params();
        let rule = c.noise_rule();
        let mut daily_rows = Vec::new();
        let mut summary_rows = Vec::new();
        let mut grouping_reports = Vec::new();
        for g in &c.groupings {
            let resolver = GroupResolver::for_level(g.level, &table, tess.as_ref()).expect("tessellation loaded");
            let binned = bin_activity(&table, g.kind, &resolver, locations.as_ref(), start, n_days, &clock);
            let mut low = 0usize;
            for raw in &binned.series {
                let daily_volume: Vec<f64> = (0..raw.n_days()).map(|d| raw.day_total(d) as f64).collect();
                let adequate = lower_median(&daily_volume).is_some_and(|v| v >= c.min_daily_volume);
                let conf = if adequate { "ok" } else { "low" };
                low += usize::from(!adequate);
                let smoothed = smooth_series(raw, c.smoothing_window);
                let edges = detect_series(&smoothed, &params, &rule, &class_of);
                daily_rows.extend(edges.iter().map(|e| EdgesDailyRow::new(g.kind, e, conf)));
                for f in [DayFilter::Workday, DayFilter::Holiday, DayFilter::All] {
                    summary_rows.push(EdgesSummaryRow::new(g.kind, &median_edges(&edges, f)));
                }
            }
            grouping_reports.push(json!({
                "kind": g.kind,
                "level": g.level,
                "groups": binned.series.len(),
                "low_confidence_groups": low,
                "skipped_unknown_sim_records": binned.skipped_unknown_sim,
                "skipped_unresolved_records": binned.skipped_unresolved,
            }));
        }

        // Whole-city raw counts for the spectrum.
        let city = bin_activity(
            &table,
            GroupingKind::CellBased,
            &GroupResolver::city(&table),
            None,
            start,
            n_days,
            &clock,
        );
        let city_bins: Vec<f64> = city
            .series
            .first()
            .map(|s| s.bins.iter().map(|b| f64::from(*b)).collect())
            .unwrap_or_default();
        let spectrum = periodogram(&city_bins)?;

        let mut maps: Vec<(&str, Heatmap)> = vec![("all", weekday_hour_heatmap(&table, &clock, |_, _| true))];
        if let Some(loc) = &locations {
            maps.push(("home", weekday_hour_heatmap(&table, &clock, |s, a| loc.home_cell[s] == Some(a.cell))));
            maps.push(("work", weekday_hour_heatmap(&table, &clock, |s, a| loc.work_cell[s] == Some(a.cell))));
        }

        write_atomic(&self.out(EDGES_DAILY), |w| write_edges_daily_csv(&daily_rows, w))?;
        write_atomic(&self.out(EDGES_SUMMARY), |w| write_edges_summary_csv(&summary_rows, w))?;
        write_atomic(&self.out(HEATMAP), |w| write_heatmap_csv(&maps, w))?;
        write_atomic(&self.out(PERIODOGRAM), |w| write_periodogram_csv(&spectrum, w))?;
        write_json(
            &self.out(CIRCADIAN_REPORT),
            &json!({
                "start": start,
                "days": n_days,
                "workdays": classes.iter().filter(|c| **c == DayClass::Workday).count(),
                "holidays": classes.iter().filter(|c| **c == DayClass::Holiday).count(),
                "smoothing_window": c.smoothing_window,
                "groupings": grouping_reports,
                "dominant_period_hours": spectrum.dominant_period_hours,
            }),
        )
    }

    fn working_hours(&self) -> Result<()> {
        let wc = &self.cfg.working_hours;
        let table = self.activity()?;
        let locations = self.location_index(&table)?;
        let tess = self.tessellation()?;
        let cal = self.calendar()?;
        let clock = cal.clock();
        let (start, n_days) = day_range(&cal, &table, &clock)?;
        let classes = day_classes(&cal, start, n_days)?;
        let class_of = class_lookup(&classes, start);

        let resolver = GroupResolver::sites(&table, &tess);
        let binned = bin_activity(&table, GroupingKind::WorkerBased, &resolver, Some(&locations), start, n_days, &clock);
        let params = wc.params();
        let rule = self.cfg.circadian.noise_rule();
        let mut by_site: BTreeMap<&str, WorkingHours> = BTreeMap::new();
        let mut days = Vec::new();
        for raw in &binned.series {
            let smoothed = smooth_series(raw, self.cfg.circadian.smoothing_window);
            let (d, s) = working_hours(raw, &smoothed, &class_of, &params, &rule);
            days.extend(d);
            by_site.insert(raw.group_id.as_str(), s);
        }
        let workdays = classes.iter().filter(|c| **c == DayClass::Workday).count();
        let mut sites: Vec<WorkingHours> = resolver
            .names
            .iter()
            .map(|name| {
                by_site.remove(name.as_str()).unwrap_or_else(|| WorkingHours {
                    site_id: name.clone(),
                    start_min: None,
                    end_min: None,
                    length_min: None,
                    volume: 0,
                    workdays,
                    detected_days: 0,
                    low_confidence: true,
                })
            })
            .collect();
        flag_low_volume(&mut sites, wc.min_volume_fraction);
        let pairing = start_end_pairing(sites.iter().filter(|s| !s.low_confidence), wc.pairing_top_k, wc.pairing_bin_min);
        let rows: Vec<WorkingHoursRow> = sites.iter().map(WorkingHoursRow::from).collect();

        write_atomic(&self.out(WORKING_HOURS), |w| write_working_hours_csv(&rows, w))?;
        write_csv_rows(&self.out(WORKING_HOURS_DAILY), &days)?;
        write_atomic(&self.out(PAIRING), |w| write_pairing_csv(&pairing, w))
    }

    fn ses(&self) -> Result<()> {
        let inhabitant_site = self
            .cfg
            .circadian
            .groupings
            .iter()
            .any(|g| g.kind == GroupingKind::InhabitantBased && g.level == GroupLevel::Site);
        if !inhabitant_site {
            return Err(Error::Config(
                "ses needs circadian.groupings to contain inhabitant_based at site level".into(),
            ));
        }
        let tess = self.tessellation()?;
        let edges = read_edges_daily_csv(open(&self.artifact(EDGES_DAILY, Subcommand::Circadian)?)?)?;
        let locations = read_locations_csv(open(&self.artifact(LOCATIONS, Subcommand::Locate)?)?)?;
        let devices = read_devices_csv(open(&self.artifact(DEVICES, Subcommand::Ingest)?)?)?;
        let ads = read_estate_ads_csv(open(&self.input(&self.cfg.paths.estate_ads)?)?)?;
        let catalog = catalog_by_tac(read_device_catalog_csv(open(&self.input(&self.cfg.paths.device_catalog)?)?)?)?;
        let cal = self.calendar()?;

        let (prices, dropped_ads) = site_price(&ads, &tess);
        let min_support = self.cfg.locations.min_support;
        let home_sites: BTreeMap<String, Option<String>> = locations
            .iter()
            .map(|r| {
                let site = r
                    .home_cell
                    .as_deref()
                    .filter(|_| r.home_support >= min_support)
                    .and_then(|c| tess.site_of_cell(c))
                    .map(|i| tess.sites()[i].site_id.clone());
                (r.sim_id.clone(), site)
            })
            .collect();
        let month = match self.cfg.ses.dataset_month.or(cal.start) {
            Some(d) => d,
            None => {
                let clock = cal.clock();
                let first = devices.iter().map(|d| d.first_seen).min().ok_or_else(|| {
                    Error::Config("ses.dataset_month is required when no device was observed".into())
                })?;
                clock.local_date(first)
            }
        };
        let month = month_start(month);
        let (profiles, profile_counts) = build_profiles(&home_sites, &prices, &devices, &catalog, month);
        let bins = self.cfg.ses.binning()?;
        let (cats, cat_counts) = categorize(&profiles, &bins);

        let mut wakes: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
        for r in rows_of_level(&edges, GroupingKind::InhabitantBased, GroupLevel::Site) {
            if r.day_class == DayClass::Workday {
                if let Some(w) = r.wake_min {
                    wakes.entry(r.group_id.as_str()).or_default().push(w);
                }
            }
        }
        let site_wake: BTreeMap<&str, f64> =
            wakes.iter().filter_map(|(s, v)| Some((*s, lower_median(v)?))).collect();
        let wake_of_sim = |sim: &str| {
            let site = home_sites.get(sim)?.as_deref()?;
            site_wake.get(site).copied()
        };
        let by_price = wakeup_by_category(&cats, wake_of_sim, &bins, ColumnAxis::PhonePrice);
        let by_age = wakeup_by_category(&cats, wake_of_sim, &bins, ColumnAxis::PhoneAge);

        #[derive(Serialize)]
        struct SitePriceRow<'a> {
            site_id: &'a str,
            price_per_sqm: f64,
        }
        let price_rows: Vec<SitePriceRow> = prices
            .iter()
            .map(|(s, p)| SitePriceRow {
                site_id: s,
                price_per_sqm: *p,
            })
            .collect();
        write_csv_rows(&self.out(SITE_PRICES), &price_rows)?;
        write_atomic(&self.out(SES_PROFILES), |w| write_profiles_csv(&profiles, w))?;
        write_atomic(&self.out(SES_MATRIX_PRICE), |w| write_matrix_csv(&by_price, w))?;
        write_atomic(&self.out(SES_MATRIX_AGE), |w| write_matrix_csv(&by_age, w))?;
        write_json(
            &self.out(SES_REPORT),
            &json!({
                "dataset_month": month,
                "ads": ads.len(),
                "ads_dropped": dropped_ads,
                "sites_priced": prices.len(),
                "profiles": profile_counts,
                "categories": cat_counts,
                "matrix_price": by_price,
                "matrix_age": by_age,
            }),
        )
    }

    fn correlate(&self) -> Result<()> {
        let cc = &self.cfg.correlate;
        let edges = read_edges_daily_csv(open(&self.artifact(EDGES_DAILY, Subcommand::Circadian)?)?)?;
        let city = read_city_daily_csv(open(&self.artifact(MOBILITY_CITY, Subcommand::Mobility)?)?)?;
        if !self.cfg.circadian.groupings.contains(&cc.grouping) {
            return Err(Error::Config("correlate.grouping must be one of circadian.groupings".into()));
        }

        let mut wake_by_date: BTreeMap<NaiveDate, Vec<f64>> = BTreeMap::new();
        let mut bed_by_date: BTreeMap<NaiveDate, Vec<f64>> = BTreeMap::new();
        for r in rows_of_level(&edges, cc.grouping.kind, cc.grouping.level) {
            if r.confidence != "ok" {
                continue;
            }
            if let Some(w) = r.wake_min {
                wake_by_date.entry(r.date).or_default().push(w);
            }
            if let Some(b) = r.bed_min {
                bed_by_date.entry(r.date).or_default().push(b);
            }
        }
        let agg = |m: BTreeMap<NaiveDate, Vec<f64>>| -> BTreeMap<NaiveDate, f64> {
            m.into_iter().filter_map(|(d, v)| Some((d, cc.aggregate.apply(&v)?))).collect()
        };
        let wake = agg(wake_by_date);
        let bed = agg(bed_by_date);
        let entropy: BTreeMap<NaiveDate, f64> = city.iter().map(|c| (c.date, c.entropy)).collect();
        let gyration: BTreeMap<NaiveDate, f64> = city.iter().map(|c| (c.date, c.gyration_km)).collect();

        let norm = |m: &BTreeMap<NaiveDate, f64>| minmax_normalize(m).ok();
        let series = [
            ("wake", norm(&wake)),
            ("bed", norm(&bed)),
            ("entropy", norm(&entropy)),
            ("gyration", norm(&gyration)),
        ];
        let mut pairs = serde_json::Map::new();
        for (a, b) in [(0, 2), (0, 3), (1, 2), (1, 3)] {
            let key = format!("{}_{}", series[a].0, series[b].0);
            let entry = match (&series[a].1, &series[b].1) {
                (Some(x), Some(y)) => match pearson_aligned(x, y) {
                    Ok((r, n)) => json!({"r": r, "n": n}),
                    Err(e) => json!({"r": null, "error": e.to_string()}),
                },
                _ => json!({"r": null, "error": "constant or empty series"}),
            };
            pairs.insert(key, entry);
        }

        #[derive(Serialize)]
        struct DailyRow {
            date: NaiveDate,
            wake_norm: Option<f64>,
            bed_norm: Option<f64>,
            entropy_norm: Option<f64>,
            gyration_norm: Option<f64>,
        }
        let mut dates: Vec<NaiveDate> = wake.keys().chain(entropy.keys()).chain(bed.keys()).copied().collect();
        dates.sort();
        dates.dedup();
        let at = |i: usize, d: &NaiveDate| series[i].1.as_ref().and_then(|m| m.get(d).copied());
        let daily: Vec<DailyRow> = dates
            .iter()
            .map(|d| DailyRow {
                date: *d,
                wake_norm: at(0, d),
                bed_norm: at(1, d),
                entropy_norm: at(2, d),
                gyration_norm: at(3, d),
            })
            .collect();
        write_csv_rows(&self.out(CORRELATION_DAILY), &daily)?;
        write_json(
            &self.out(CORRELATION),
            &json!({
                "grouping": cc.grouping,
                "aggregate": cc.aggregate,
                "pearson": pairs,
            }),
        )
    }

    /// Optional report input; absent when its step has not run.
    fn read_json_artifact(&self, name: &str) -> Result<Option<Value>> {
        let p = self.out(name);
        if !p.is_file() {
            return Ok(None);
        }
        Ok(Some(serde_json::from_reader(open(&p)?)?))
    }

    fn report(&self) -> Result<()> {
        let summary = read_edges_summary_csv(open(&self.artifact(EDGES_SUMMARY, Subcommand::Circadian)?)?)?;
        let daily = read_edges_daily_csv(open(&self.artifact(EDGES_DAILY, Subcommand::Circadian)?)?)?;
        let circadian_report = self.read_json_artifact(CIRCADIAN_REPORT)?;

        let ok: std::collections::HashSet<(GroupingKind, &str)> = daily
            .iter()
            .filter(|r| r.confidence == "ok")
            .map(|r| (r.group_kind, r.group_id.as_str()))
            .collect();
        let mut chronotype = serde_json::Map::new();
        for kind in [GroupingKind::CellBased, GroupingKind::InhabitantBased, GroupingKind::WorkerBased] {
            let mut per_class = serde_json::Map::new();
            for f in [DayFilter::Workday, DayFilter::Holiday, DayFilter::All] {
                let rows: Vec<&EdgesSummaryRow> = summary
                    .iter()
                    .filter(|r| r.group_kind == kind && r.day_class == f.as_str() && r.group_id != "all")
                    .filter(|r| ok.contains(&(r.group_kind, r.group_id.as_str())))
                    .collect();
                if rows.is_empty() {
                    continue;
                }
                let med = |g: fn(&EdgesSummaryRow) -> Option<f64>| lower_median(&rows.iter().filter_map(|r| g(r)).collect::<Vec<_>>());
                let city = summary
                    .iter()
                    .find(|r| r.group_kind == kind && r.day_class == f.as_str() && r.group_id == "all");
                per_class.insert(
                    f.as_str().to_owned(),
                    json!({
                        "groups": rows.len(),
                        "wake_median": med(|r| r.wake_median),
                        "bed_median": med(|r| r.bed_median),
                        "day_length_median": med(|r| r.day_length_median),
                        "city": city.map(|c| json!({
                            "wake_median": c.wake_median,
                            "bed_median": c.bed_median,
                            "day_length_median": c.day_length_median,
                        })),
                    }),
                );
            }
            if per_class.is_empty() {
                continue;
            }
            let get = |c: &str, k: &str| per_class.get(c).and_then(|v| v[k].as_f64());
            let shift = |k: &str| Some(get("holiday", k)? - get("workday", k)?);
            per_class.insert(
                "holiday_minus_workday".into(),
                json!({
                    "wake": shift("wake_median"),
                    "bed": shift("bed_median"),
                    "day_length": shift("day_length_median"),
                }),
            );
            chronotype.insert(kind.as_str().to_owned(), Value::Object(per_class));
        }

        let working_hours = match self.out(WORKING_HOURS) {
            p if p.is_file() => {
                let rows = read_working_hours_csv(open(&p)?)?;
                let okr: Vec<&WorkingHoursRow> = rows.iter().filter(|r| r.confidence == "ok").collect();
                let vals = |g: fn(&WorkingHoursRow) -> Option<f64>| okr.iter().filter_map(|r| g(r)).collect::<Vec<_>>();
                let mut starts: BTreeMap<u32, usize> = BTreeMap::new();
                let mut lengths: BTreeMap<u32, usize> = BTreeMap::new();
                let bin = self.cfg.working_hours.pairing_bin_min;
                for r in &okr {
                    if let Some(s) = r.start_min {
                        *starts.entry(((s / bin).round() * bin) as u32).or_default() += 1;
                    }
                    if let Some(l) = r.length_min {
                        *lengths.entry(((l / bin).round() * bin) as u32).or_default() += 1;
                    }
                }
                json!({
                    "sites": rows.len(),
                    "sites_ok": okr.len(),
                    "start_median": lower_median(&vals(|r| r.start_min)),
                    "end_median": lower_median(&vals(|r| r.end_min)),
                    "length_median": lower_median(&vals(|r| r.length_min)),
                    "start_histogram": starts,
                    "length_histogram": lengths,
                })
            }
            _ => Value::Null,
        };

        let ses = self.read_json_artifact(SES_REPORT)?.map(|r| {
            json!({
                "matrix_price": r["matrix_price"],
                "matrix_age": r["matrix_age"],
                "profiles": r["profiles"],
            })
        });
        let correlation = self.read_json_artifact(CORRELATION)?;
        let ingest = self.read_json_artifact(INGEST_REPORT)?;
        let mobility = match self.out(MOBILITY_CITY) {
            p if p.is_file() => {
                let city = read_city_daily_csv(open(&p)?)?;
                let g: Vec<f64> = city.iter().map(|c| c.gyration_km).collect();
                let e: Vec<f64> = city.iter().map(|c| c.entropy).collect();
                json!({
                    "days": city.len(),
                    "gyration_km_median": lower_median(&g),
                    "entropy_median": lower_median(&e),
                })
            }
            _ => Value::Null,
        };

        write_json(
            &self.out(SUMMARY),
            &json!({
                "ingest": ingest.map(|i| json!({
                    "records": i["records_kept"],
                    "sims": i["exclusion"]["kept"],
                    "malformed_lines": i["malformed_lines"],
                })),
                "chronotype": chronotype,
                "dominant_period_hours": circadian_report.as_ref().map(|r| r["dominant_period_hours"].clone()),
                "working_hours": working_hours,
                "mobility": mobility,
                "correlation": correlation.map(|c| c["pearson"].clone()),
                "ses": ses,
                "config": self.cfg.effective(),
            }),
        )
    }
}

/// First day of the month of `date`.
pub fn month_start(date: NaiveDate) -> NaiveDate {
    NaiveDate::from_ymd_opt(date.year(), date.month(), 1).expect("valid month")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn missing_prerequisite_names_producer() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = RunConfig::default();
        cfg.paths.run_dir = dir.path().to_path_buf();
        let e = run(Subcommand::Report, &cfg, Some(1)).unwrap_err();
        assert_eq!(e.exit_code(), 3);
        assert!(e.to_string().contains("`circadian`"), "{e}");
        let e = run(Subcommand::Locate, &cfg, Some(1)).unwrap_err();
        assert!(e.to_string().contains("`ingest`"), "{e}");
    }

    #[test]
    fn day_range_from_records() {
        let t = ActivityTable::from_records([("a", 1_491_000_000, "c"), ("a", 1_491_300_000, "c")]);
        let clock = LocalClock::new(120);
        let (s, n) = day_range(&Calendar::new(120), &t, &clock).unwrap();
        assert_eq!(s, clock.local_date(1_491_000_000));
        assert_eq!(n, 4);
    }
}
