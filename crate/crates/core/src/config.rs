//! Run configuration.
//!
//! `run.json` is a flat object of dotted keys (`"circadian.smoothing_window": 12`)
//! that mirror the sections below. Nested objects are accepted as well.
//! Unknown keys are rejected. Every key has a default, so `{}` is a valid
//! configuration.

use std::io::Read;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::circadian::{
    EdgeParams, GroupLevel, GroupingKind, NoiseFloorRule, SearchWindow, WorkParams,
};
use crate::error::{Error, Result};
use crate::ingest::CdrSchema;
use crate::mobility::Aggregate;
use crate::ses::{Bins, SesBinning};
use crate::synthgen::ScenarioConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathsConfig {
    /// Directory every artifact is written to.
    pub run_dir: PathBuf,
    /// Directory of the input files; the run directory when absent.
    pub input_dir: Option<PathBuf>,
    pub cdr: String,
    pub cells: String,
    pub calendar: String,
    pub estate_ads: String,
    pub device_catalog: String,
}

impl Default for PathsConfig {
    fn default() -> Self {
        Self {
            run_dir: PathBuf::from("run"),
            input_dir: None,
            cdr: "cdr_wide.csv".into(),
            cells: "cells.csv".into(),
            calendar: "calendar.json".into(),
            estate_ads: "estate_ads.csv".into(),
            device_catalog: "device_catalog.csv".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IngestConfig {
    pub schema: CdrSchema,
    pub min_records: u64,
    pub min_active_days: u64,
    /// Upper bucket edges of the records-per-sim histogram.
    pub histogram_edges: Vec<u64>,
}

impl Default for IngestConfig {
    fn default() -> Self {
        Self {
            schema: CdrSchema::default(),
            min_records: 0,
            min_active_days: 0,
            histogram_edges: vec![1, 2, 5, 10, 20, 50, 100, 200, 500, 1000],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeoConfig {
    /// Cells whose stations are closer than this share a site.
    pub merge_tolerance_m: f64,
    pub bbox_pad_km: f64,
}

impl Default for GeoConfig {
    fn default() -> Self {
        Self {
            merge_tolerance_m: 0.0,
            bbox_pad_km: 10.0,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CalendarConfig {
    /// Overrides the offset in `calendar.json`; 120 when neither is given.
    pub tz_offset_minutes: Option<i32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LocationsConfig {
    /// Home / work with less support count as unknown downstream.
    pub min_support: u32,
}

impl Default for LocationsConfig {
    fn default() -> Self {
        Self { min_support: 1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MobilityConfig {
    pub aggregate: Aggregate,
    pub write_daily: bool,
}

impl Default for MobilityConfig {
    fn default() -> Self {
        Self {
            aggregate: Aggregate::Mean,
            write_daily: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grouping {
    pub kind: GroupingKind,
    pub level: GroupLevel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CircadianConfig {
    pub groupings: Vec<Grouping>,
    pub smoothing_window: usize,
    pub half_fraction: f64,
    pub wake_search: [f64; 2],
    pub bed_search: [f64; 2],
    pub noise_floor_counts: f64,
    pub noise_floor_peak_fraction: f64,
    /// Groups whose median daily record count is lower are marked `low`.
    pub min_daily_volume: f64,
}

impl Default for CircadianConfig {
    fn default() -> Self {
        Self {
            groupings: vec![
                Grouping {
                    kind: GroupingKind::InhabitantBased,
                    level: GroupLevel::Site,
                },
                Grouping {
                    kind: GroupingKind::CellBased,
                    level: GroupLevel::Site,
                },
                Grouping {
                    kind: GroupingKind::CellBased,
                    level: GroupLevel::City,
                },
            ],
            smoothing_window: 12,
            half_fraction: 0.5,
            wake_search: [180.0, 720.0],
            bed_search: [1020.0, 1620.0],
            noise_floor_counts: 5.0,
            noise_floor_peak_fraction: 0.05,
            min_daily_volume: 100.0,
        }
    }
}

impl CircadianConfig {
    pub fn edge_params(&self) -> EdgeParams {
        EdgeParams {
            half_fraction: self.half_fraction,
            rise: SearchWindow::new(self.wake_search[0], self.wake_search[1]),
            fall: SearchWindow::new(self.bed_search[0], self.bed_search[1]),
            noise_floor: 0.0,
        }
    }

    pub fn noise_rule(&self) -> NoiseFloorRule {
        NoiseFloorRule {
            min_counts: self.noise_floor_counts,
            peak_fraction: self.noise_floor_peak_fraction,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WorkingHoursConfig {
    pub start_search: [f64; 2],
    pub end_search: [f64; 2],
    pub min_volume_fraction: f64,
    pub min_detected_fraction: f64,
    pub pairing_top_k: usize,
    pub pairing_bin_min: f64,
}

impl Default for WorkingHoursConfig {
    fn default() -> Self {
        let p = WorkParams::default();
        Self {
            start_search: [p.start_search.start_min, p.start_search.end_min],
            end_search: [p.end_search.start_min, p.end_search.end_min],
            min_volume_fraction: p.min_volume_fraction,
            min_detected_fraction: p.min_detected_fraction,
            pairing_top_k: 5,
            pairing_bin_min: 30.0,
        }
    }
}

impl WorkingHoursConfig {
    pub fn params(&self) -> WorkParams {
        WorkParams {
            start_search: SearchWindow::new(self.start_search[0], self.start_search[1]),
            end_search: SearchWindow::new(self.end_search[0], self.end_search[1]),
            min_volume_fraction: self.min_volume_fraction,
            min_detected_fraction: self.min_detected_fraction,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SesConfig {
    pub property_edges_huf: Vec<f64>,
    pub price_edges_eur: Vec<f64>,
    pub age_edges_years: Vec<f64>,
    /// Reference month for phone age; the calendar's first month when absent.
    pub dataset_month: Option<NaiveDate>,
}

impl Default for SesConfig {
    fn default() -> Self {
        let b = SesBinning::default();
        Self {
            property_edges_huf: b.property.edges,
            price_edges_eur: b.price.edges,
            age_edges_years: b.age.edges,
            dataset_month: None,
        }
    }
}

impl SesConfig {
    pub fn binning(&self) -> Result<SesBinning> {
        Ok(SesBinning {
            property: Bins::new(self.property_edges_huf.clone())?,
            price: Bins::new(self.price_edges_eur.clone())?,
            age: Bins::new(self.age_edges_years.clone())?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CorrelateConfig {
    /// Grouping whose daily edges give the city's daily wake-up and bedtime.
    pub grouping: Grouping,
    /// How the groups' daily values combine into one value per day.
    pub aggregate: Aggregate,
}

impl Default for CorrelateConfig {
    fn default() -> Self {
        Self {
            grouping: Grouping {
                kind: GroupingKind::InhabitantBased,
                level: GroupLevel::Site,
            },
            aggregate: Aggregate::Median,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub paths: PathsConfig,
    pub ingest: IngestConfig,
    pub geo: GeoConfig,
    pub calendar: CalendarConfig,
    pub locations: LocationsConfig,
    pub mobility: MobilityConfig,
    pub circadian: CircadianConfig,
    pub working_hours: WorkingHoursConfig,
    pub ses: SesConfig,
    pub correlate: CorrelateConfig,
    pub synth: ScenarioConfig,
}

fn insert_path(root: &mut Map<String, Value>, key: &str, value: Value) -> Result<()> {
    let mut parts = key.split('.').peekable();
    let mut node = root;
    while let Some(part) = parts.next() {
        if part.is_empty() {
            return Err(Error::Config(format!("invalid config key `{key}`")));
        }
        if parts.peek().is_none() {
            match (node.get_mut(part), value) {
                (Some(Value::Object(existing)), Value::Object(obj)) => {
                    for (k, v) in obj {
                        insert_path(existing, &k, v)?;
                    }
                }
                (Some(_), _) => return Err(Error::Config(format!("config key `{key}` given twice"))),
                (None, v) => {
                    let v = match v {
                        Value::Object(obj) => {
                            let mut nested = Map::new();
                            for (k, v) in obj {
                                insert_path(&mut nested, &k, v)?;
                            }
                            Value::Object(nested)
                        }
                        other => other,
                    };
                    node.insert(part.to_owned(), v);
                }
            }
            return Ok(());
        }
        let child = node
            .entry(part.to_owned())
            .or_insert_with(|| Value::Object(Map::new()));
        node = child
            .as_object_mut()
            .ok_or_else(|| Error::Config(format!("config key `{key}` conflicts with a scalar value")))?;
    }
    Ok(())
}

/// Turns dotted keys into nested objects.
pub fn unflatten(flat: Map<String, Value>) -> Result<Value> {
    let mut root = Map::new();
    for (k, v) in flat {
        insert_path(&mut root, &k, v)?;
    }
    Ok(Value::Object(root))
}

/// Dotted keys for every scalar or array leaf.
pub fn flatten(value: &Value) -> Map<String, Value> {
    fn walk(prefix: &str, v: &Value, out: &mut Map<String, Value>) {
        match v {
            Value::Object(obj) if !obj.is_empty() => {
                for (k, child) in obj {
                    let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                    walk(&key, child, out);
                }
            }
            other => {
                out.insert(prefix.to_owned(), other.clone());
            }
        }
    }
    let mut out = Map::new();
    walk("", value, &mut out);
    out
}

impl RunConfig {
    pub fn from_value(value: Value) -> Result<Self> {
        let Value::Object(flat) = value else {
            return Err(Error::Config("run config must be a JSON object".into()));
        };
        let cfg: RunConfig =
            serde_json::from_value(unflatten(flat)?).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_reader<R: Read>(source: R) -> Result<Self> {
        let value: Value = serde_json::from_reader(source).map_err(|e| Error::Config(e.to_string()))?;
        Self::from_value(value)
    }

    /// Loads `path`; relative paths inside are resolved against its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_reader(std::io::BufReader::new(file))?;
        let base = path.parent().unwrap_or(Path::new(""));
        cfg.paths.run_dir = base.join(&cfg.paths.run_dir);
        if let Some(dir) = cfg.paths.input_dir.take() {
            cfg.paths.input_dir = Some(base.join(dir));
        }
        Ok(cfg)
    }

    pub fn effective(&self) -> Map<String, Value> {
        flatten(&serde_json::to_value(self).expect("config serializes"))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::Config(msg.to_owned()));
        let c = &self.circadian;
        if c.smoothing_window == 0 {
            return bad("circadian.smoothing_window must be at least 1");
        }
        if !(c.half_fraction > 0.0 && c.half_fraction < 1.0) {
            return bad("circadian.half_fraction must be in (0, 1)");
        }
        for (name, w) in [
            ("circadian.wake_search", c.wake_search),
            ("circadian.bed_search", c.bed_search),
            ("working_hours.start_search", self.working_hours.start_search),
            ("working_hours.end_search", self.working_hours.end_search),
        ] {
            if !(w[0] < w[1] && w[0] >= 0.0 && w[1] <= 2880.0) {
                return Err(Error::Config(format!("{name} must be an increasing pair within two days")));
            }
        }
        if c.wake_search[1] > c.bed_search[0] {
            return bad("circadian.wake_search must end before circadian.bed_search starts");
        }
        if c.noise_floor_counts < 0.0 || c.noise_floor_peak_fraction < 0.0 || c.min_daily_volume < 0.0 {
            return bad("circadian noise floor and volume thresholds must be non-negative");
        }
        for (i, g) in c.groupings.iter().enumerate() {
            for h in &c.groupings[i + 1..] {
                let cell_site = matches!(
                    (g.level, h.level),
                    (GroupLevel::Cell, GroupLevel::Site) | (GroupLevel::Site, GroupLevel::Cell)
                );
                if g.kind == h.kind && (g.level == h.level || cell_site) {
                    return bad("circadian.groupings: a grouping kind may be used at either cell or site level, once");
                }
            }
        }
        let w = &self.working_hours;
        if !(0.0..=1.0).contains(&w.min_volume_fraction) || !(0.0..=1.0).contains(&w.min_detected_fraction) {
            return bad("working_hours fractions must be in [0, 1]");
        }
        if w.pairing_top_k == 0 || w.pairing_bin_min <= 0.0 {
            return bad("working_hours.pairing_top_k and pairing_bin_min must be positive");
        }
        if self.ingest.histogram_edges.windows(2).any(|p| p[0] >= p[1]) {
            return bad("ingest.histogram_edges must be strictly increasing");
        }
        if self.geo.merge_tolerance_m < 0.0 || self.geo.bbox_pad_km <= 0.0 {
            return bad("geo.merge_tolerance_m must be non-negative and geo.bbox_pad_km positive");
        }
        self.ses.binning()?;
        self.synth.validate()
    }

    pub fn input_dir(&self) -> &Path {
        self.paths.input_dir.as_deref().unwrap_or(&self.paths.run_dir)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn empty_is_default() {
        assert_eq!(RunConfig::from_value(json!({})).unwrap(), RunConfig::default());
    }

    #[test]
    fn flat_keys() {
        let cfg = RunConfig::from_value(json!({
            "circadian.smoothing_window": 6,
            "synth.n_sims": 10,
            "ingest.schema.sim_id": "msisdn",
            "paths": {"run_dir": "out"}
        }))
        .unwrap();
        assert_eq!(cfg.circadian.smoothing_window, 6);
        assert_eq!(cfg.synth.n_sims, 10);
        assert_eq!(cfg.ingest.schema.sim_id, "msisdn");
        assert_eq!(cfg.paths.run_dir, PathBuf::from("out"));
    }

    #[test]
    fn unknown_key_rejected() {
        let e = RunConfig::from_value(json!({"circadian.windw": 6})).unwrap_err();
        assert_eq!(e.exit_code(), 2);
    }

    #[test]
    fn effective_round_trips() {
        let cfg = RunConfig::default();
        let flat = cfg.effective();
        assert_eq!(flat["circadian.smoothing_window"], json!(12));
        let back = RunConfig::from_value(Value::Object(flat)).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn invalid_ranges() {
        assert!(RunConfig::from_value(json!({"circadian.half_fraction": 1.5})).is_err());
        assert!(RunConfig::from_value(json!({"ses.price_edges_eur": [0, 0]})).is_err());
    }
}
