//! Radius of gyration, normalized location entropy, and the min-max /
//! Pearson helpers used to correlate daily series.

use std::collections::BTreeMap;
use std::io::Write;

use chrono::NaiveDate;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geo::{LatLon, LocalProjection};
use crate::ingest::ActivityTable;
use crate::stats;
use crate::time::{self, LocalClock};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Visit {
    pub location: LatLon,
    pub count: u32,
}

/// Visit counts per distinct location. Locations are identified by their
/// exact coordinates.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct VisitSet {
    visits: Vec<Visit>,
}

impl VisitSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_visits(visits: impl IntoIterator<Item = (LatLon, u32)>) -> Self {
        let mut v = Self::new();
        for (loc, n) in visits {
            v.add(loc, n);
        }
        v
    }

    /// Adds `count` visits to `location`; zero counts are ignored.
    pub fn add(&mut self, location: LatLon, count: u32) {
        if count == 0 {
            return;
        }
        match self
            .visits
            .iter_mut()
            .find(|v| v.location.lat.to_bits() == location.lat.to_bits() && v.location.lon.to_bits() == location.lon.to_bits())
        {
            Some(v) => v.count += count,
            None => self.visits.push(Visit { location, count }),
        }
    }

    pub fn extend(&mut self, other: &VisitSet) {
        for v in &other.visits {
            self.add(v.location, v.count);
        }
    }

    pub fn visits(&self) -> &[Visit] {
        &self.visits
    }

    /// Total visits N.
    pub fn total(&self) -> u64 {
        self.visits.iter().map(|v| u64::from(v.count)).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.visits.is_empty()
    }
}

/// Visit-weighted RMS distance (km) from the center of mass, computed in
/// the given local projection. Zero for an empty set.
pub fn radius_of_gyration(v: &VisitSet, projection: &LocalProjection) -> f64 {
    let n = v.total() as f64;
    if n == 0.0 {
        return 0.0;
    }
    let pts: Vec<([f64; 2], f64)> = v
        .visits
        .iter()
        .map(|x| (projection.project(x.location), f64::from(x.count)))
        .collect();
    let cx = pts.iter().map(|(p, w)| p[0] * w).sum::<f64>() / n;
    let cy = pts.iter().map(|(p, w)| p[1] * w).sum::<f64>() / n;
    let ss: f64 = pts
        .iter()
        .map(|(p, w)| w * ((p[0] - cx).powi(2) + (p[1] - cy).powi(2)))
        .sum();
    (ss / n).sqrt()
}

/// Shannon entropy of the visit distribution divided by ln N, where N is the
/// total number of visits. Zero when N == 1 or only one location was visited.
pub fn location_entropy(v: &VisitSet) -> f64 {
    let n = v.total();
    if n <= 1 || v.visits.len() <= 1 {
        return 0.0;
    }
    let nf = n as f64;
    let h: f64 = v
        .visits
        .iter()
        .map(|x| {
            let p = f64::from(x.count) / nf;
            -p * p.ln()
        })
        .sum();
    h / nf.ln()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MobilityDaily {
    pub sim_id: String,
    pub date: NaiveDate,
    pub gyration_km: f64,
    pub entropy: f64,
    pub activity: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Aggregate {
    #[default]
    Mean,
    Median,
}

impl Aggregate {
    pub fn apply(self, values: &[f64]) -> Option<f64> {
        match self {
            Aggregate::Mean => stats::mean(values),
            Aggregate::Median => stats::lower_median(values),
        }
    }
}

/// Per (sim, local day) metrics from the day's records, located at cell
/// centroids. `centroids` is indexed by the table's cell index; records in
/// cells without coordinates are skipped and counted.
pub fn daily_mobility(
    table: &ActivityTable,
    centroids: &[Option<LatLon>],
    projection: &LocalProjection,
    clock: &LocalClock,
) -> (Vec<MobilityDaily>, u64) {
    let per_sim: Vec<(Vec<MobilityDaily>, u64)> = table
        .par_sims()
        .map(|(i, recs)| {
            let mut rows = Vec::new();
            let mut skipped = 0u64;
            let mut start = 0;
            while start < recs.len() {
                let day = clock.local_day_number(recs[start].timestamp);
                let mut end = start;
                let mut visits = VisitSet::new();
                while end < recs.len() && clock.local_day_number(recs[end].timestamp) == day {
                    match centroids.get(recs[end].cell as usize).copied().flatten() {
                        Some(loc) => visits.add(loc, 1),
                        None => skipped += 1,
                    }
                    end += 1;
                }
                if !visits.is_empty() {
                    rows.push(MobilityDaily {
                        sim_id: table.sims()[i].clone(),
                        date: time::date_from_day_number(day),
                        gyration_km: radius_of_gyration(&visits, projection),
                        entropy: location_entropy(&visits),
                        activity: visits.total() as u32,
                    });
                }
                start = end;
            }
            (rows, skipped)
        })
        .collect();
    let skipped = per_sim.iter().map(|(_, s)| s).sum();
    (per_sim.into_iter().flat_map(|(r, _)| r).collect(), skipped)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CityMobility {
    pub date: NaiveDate,
    pub gyration_km: f64,
    pub entropy: f64,
    pub sims: usize,
}

/// Per-date aggregate over sims. Rows must be sorted by sim then date, as
/// returned by [`daily_mobility`]; the aggregation order is date-major and
/// therefore independent of scheduling.
pub fn city_daily(rows: &[MobilityDaily], aggregate: Aggregate) -> Vec<CityMobility> {
    let mut by_date: BTreeMap<NaiveDate, (Vec<f64>, Vec<f64>)> = BTreeMap::new();
    for r in rows {
        let e = by_date.entry(r.date).or_default();
        e.0.push(r.gyration_km);
        e.1.push(r.entropy);
    }
    by_date
        .into_iter()
        .map(|(date, (g, e))| CityMobility {
            date,
            gyration_km: aggregate.apply(&g).unwrap_or(0.0),
            entropy: aggregate.apply(&e).unwrap_or(0.0),
            sims: g.len(),
        })
        .collect()
}

/// (x − min)/(max − min); a constant series maps to all zeros.
pub fn minmax(values: &[f64]) -> Vec<f64> {
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = hi - lo;
    values
        .iter()
        .map(|x| if span > 0.0 { (x - lo) / span } else { 0.0 })
        .collect()
}

pub fn minmax_normalize(series: &BTreeMap<NaiveDate, f64>) -> Result<BTreeMap<NaiveDate, f64>> {
    if series.is_empty() {
        return Err(Error::invalid("cannot normalize an empty series"));
    }
    let values: Vec<f64> = series.values().copied().collect();
    Ok(series.keys().copied().zip(minmax(&values)).collect())
}

/// Sample Pearson correlation.
pub fn pearson_r(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::UndefinedCorrelation("series lengths differ"));
    }
    if x.len() < 2 {
        return Err(Error::UndefinedCorrelation("fewer than two points"));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::UndefinedCorrelation("constant series"));
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// Pearson r over the dates present in both series; returns (r, n).
pub fn pearson_aligned(x: &BTreeMap<NaiveDate, f64>, y: &BTreeMap<NaiveDate, f64>) -> Result<(f64, usize)> {
    let (xs, ys): (Vec<f64>, Vec<f64>) = x
        .iter()
        .filter_map(|(d, a)| y.get(d).map(|b| (*a, *b)))
        .unzip();
    Ok((pearson_r(&xs, &ys)?, xs.len()))
}

pub fn write_mobility_daily_csv<W: Write>(rows: &[MobilityDaily], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["sim_id", "date", "gyration_km", "entropy", "activity"])?;
    for r in rows {
        w.write_record([
            r.sim_id.clone(),
            r.date.to_string(),
            format!("{:.6}", r.gyration_km),
            format!("{:.6}", r.entropy),
            r.activity.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_city_daily_csv<W: Write>(rows: &[CityMobility], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["date", "gyration_km", "entropy", "sims"])?;
    for r in rows {
        w.write_record([
            r.date.to_string(),
            format!("{:.9}", r.gyration_km),
            format!("{:.9}", r.entropy),
            r.sims.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_city_daily_csv<R: std::io::Read>(source: R) -> Result<Vec<CityMobility>> {
    let mut reader = csv::Reader::from_reader(source);
    let mut out = Vec::new();
    for row in reader.deserialize::<CityMobility>() {
        out.push(row?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geo::distance_km;

    fn proj() -> LocalProjection {
        LocalProjection::new(LatLon::new(47.5, 19.05))
    }

    #[test]
    fn single_location_has_zero_radius_and_entropy() {
        let v = VisitSet::from_visits([(LatLon::new(47.5, 19.0), 50)]);
        assert_eq!(radius_of_gyration(&v, &proj()), 0.0);
        assert_eq!(location_entropy(&v), 0.0);
    }

    #[test]
    fn two_points_equal_weight_give_half_distance() {
        let p = proj();
        // Two points 2 km apart east-west in projected space.
        let a = p.unproject([-1.0, 0.3]);
        let b = p.unproject([1.0, 0.3]);
        let v = VisitSet::from_visits([(a, 3), (b, 3)]);
        assert!((radius_of_gyration(&v, &p) - 1.0).abs() < 1e-12);
        assert!((distance_km(a, b) - 2.0).abs() < 1e-3);
    }

    #[test]
    fn entropy_hand_values() {
        let v = VisitSet::from_visits([(LatLon::new(1.0, 1.0), 5), (LatLon::new(2.0, 2.0), 5)]);
        assert!((location_entropy(&v) - 0.301_029_995_663_981_14).abs() < 1e-12);
        let uniform = VisitSet::from_visits((0..7).map(|i| (LatLon::new(f64::from(i), 0.0), 1)));
        assert!((location_entropy(&uniform) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn minmax_examples() {
        assert_eq!(minmax(&[2.0, 4.0, 6.0]), vec![0.0, 0.5, 1.0]);
        assert_eq!(minmax(&[5.0, 5.0]), vec![0.0, 0.0]);
        assert!(minmax_normalize(&BTreeMap::new()).is_err());
    }

    #[test]
    fn pearson_extremes_and_errors() {
        let x = [1.0, 2.0, 4.0, 7.0];
        let neg: Vec<f64> = x.iter().map(|v| -v).collect();
        assert!((pearson_r(&x, &x).unwrap() - 1.0).abs() < 1e-15);
        assert!((pearson_r(&x, &neg).unwrap() + 1.0).abs() < 1e-15);
        assert!(matches!(pearson_r(&x, &[3.0; 4]), Err(Error::UndefinedCorrelation(_))));
        assert!(pearson_r(&[1.0], &[1.0]).is_err());
    }

    #[test]
    fn daily_rows_per_sim_day() {
        let clock = LocalClock::new(0);
        let table = ActivityTable::from_records([
            ("s", 3600, "a"),
            ("s", 7200, "a"),
            ("s", 86_400 + 3600, "a"),
            ("s", 86_400 + 7200, "b"),
            ("s", 86_400 + 7300, "zz"),
        ]);
        let p = proj();
        let centroids = vec![Some(p.unproject([0.0, 0.0])), Some(p.unproject([2.0, 0.0])), None];
        let (rows, skipped) = daily_mobility(&table, &centroids, &p, &clock);
        assert_eq!(skipped, 1);
        assert_eq!(rows.len(), 2);
        assert_eq!((rows[0].gyration_km, rows[0].entropy, rows[0].activity), (0.0, 0.0, 2));
        assert!((rows[1].gyration_km - 1.0).abs() < 1e-12);
        assert!((rows[1].entropy - 1.0).abs() < 1e-12);
    }
}
