//! Socioeconomic indicators: property price at the home site, price and
//! relative age of the subscriber's phone, their categories, and wake-up
//! times per category.
//!
//! A subscriber's wake-up time is the inhabitant-based median workday
//! wake-up time of their home site, so every category median weights each
//! sim by its home group's value.
//!
//! Catalog phone prices are indicative rather than launch prices; older
//! models may have depreciated.

use std::collections::{BTreeMap, HashMap};
use std::io::{Read, Write};

use chrono::{Datelike, NaiveDate};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::geo::{LatLon, Location, Tessellation};
use crate::ingest::DeviceInterval;
use crate::stats::lower_median;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstateAd {
    pub lat: f64,
    pub lon: f64,
    pub floor_sqm: f64,
    pub price_huf: f64,
}

impl EstateAd {
    pub fn price_per_sqm(&self) -> f64 {
        self.price_huf / self.floor_sqm
    }

    pub fn is_valid(&self) -> bool {
        self.floor_sqm > 0.0 && self.price_huf > 0.0 && LatLon::new(self.lat, self.lon).is_valid()
    }
}

fn de_month_date<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<NaiveDate, D::Error> {
    let s = String::deserialize(d)?;
    parse_month_date(&s).ok_or_else(|| serde::de::Error::custom(format!("invalid release date `{s}`")))
}

fn ser_date<S: Serializer>(d: &NaiveDate, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&d.format("%Y-%m-%d").to_string())
}

/// `YYYY-MM-DD` or `YYYY-MM` (first of the month).
pub fn parse_month_date(s: &str) -> Option<NaiveDate> {
    let s = s.trim();
    NaiveDate::parse_from_str(s, "%Y-%m-%d")
        .or_else(|_| NaiveDate::parse_from_str(&format!("{s}-01"), "%Y-%m-%d"))
        .ok()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviceCatalogEntry {
    pub tac: String,
    pub vendor: String,
    pub model: String,
    #[serde(deserialize_with = "de_month_date", serialize_with = "ser_date")]
    pub release_date: NaiveDate,
    pub price_eur: Option<f64>,
    pub is_phone: bool,
}

pub type DeviceCatalog = HashMap<String, DeviceCatalogEntry>;

pub fn catalog_by_tac(entries: Vec<DeviceCatalogEntry>) -> Result<DeviceCatalog> {
    let mut out = HashMap::with_capacity(entries.len());
    for e in entries {
        if e.tac.len() != 8 || !e.tac.bytes().all(|b| b.is_ascii_digit()) {
            return Err(Error::invalid(format!("catalog tac `{}` is not 8 digits", e.tac)));
        }
        if out.insert(e.tac.clone(), e).is_some() {
            return Err(Error::invalid("duplicate tac in device catalog"));
        }
    }
    Ok(out)
}

/// Median price per m² of the ads inside each site, and the number of ads
/// outside the area (or invalid).
pub fn site_price(ads: &[EstateAd], tess: &Tessellation) -> (BTreeMap<String, f64>, usize) {
    let mut per_site: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    let mut dropped = 0;
    for ad in ads {
        if !ad.is_valid() {
            dropped += 1;
            continue;
        }
        match tess.locate(LatLon::new(ad.lat, ad.lon)) {
            Location::Site(i) => per_site.entry(i).or_default().push(ad.price_per_sqm()),
            Location::OutOfArea => dropped += 1,
        }
    }
    let prices = per_site
        .into_iter()
        .filter_map(|(i, v)| Some((tess.sites()[i].site_id.clone(), lower_median(&v)?)))
        .collect();
    (prices, dropped)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DeviceResolution<'a> {
    NoDevice,
    /// Dominant tac is missing from the catalog.
    Unresolved,
    Device(&'a DeviceCatalogEntry),
}

/// Catalog entry of the tac with the longest total interval duration.
/// Ties go to the tac seen first, then the smaller tac.
pub fn dominant_device<'a>(intervals: &[&DeviceInterval], catalog: &'a DeviceCatalog) -> DeviceResolution<'a> {
    let mut per_tac: BTreeMap<&str, (i64, i64)> = BTreeMap::new();
    for iv in intervals {
        let e = per_tac.entry(iv.tac.as_str()).or_insert((0, i64::MAX));
        e.0 += iv.last_seen - iv.first_seen;
        e.1 = e.1.min(iv.first_seen);
    }
    let best = per_tac
        .into_iter()
        .min_by(|a, b| b.1 .0.cmp(&a.1 .0).then(a.1 .1.cmp(&b.1 .1)).then(a.0.cmp(b.0)));
    match best {
        None => DeviceResolution::NoDevice,
        Some((tac, _)) => catalog
            .get(tac)
            .map_or(DeviceResolution::Unresolved, DeviceResolution::Device),
    }
}

/// Whole months from `release` to `month`, divided by 12. Negative when the
/// device was released after `month`.
pub fn phone_age_years(release: NaiveDate, month: NaiveDate) -> f64 {
    let months = (month.year() - release.year()) * 12 + month.month() as i32 - release.month() as i32;
    f64::from(months) / 12.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SesProfile {
    pub sim_id: String,
    pub home_site: Option<String>,
    pub home_price_per_sqm: Option<f64>,
    pub phone_price_eur: Option<f64>,
    pub phone_age_years: Option<f64>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProfileCounts {
    pub sims: usize,
    pub no_device: usize,
    pub unresolved_device: usize,
    pub non_phone: usize,
    pub released_after_month: usize,
}

/// One profile per entry of `home_sites` (sim id → home site id, if any).
pub fn build_profiles(
    home_sites: &BTreeMap<String, Option<String>>,
    site_prices: &BTreeMap<String, f64>,
    devices: &[DeviceInterval],
    catalog: &DeviceCatalog,
    dataset_month: NaiveDate,
) -> (Vec<SesProfile>, ProfileCounts) {
    let mut by_sim: HashMap<&str, Vec<&DeviceInterval>> = HashMap::new();
    for d in devices {
        by_sim.entry(d.sim_id.as_str()).or_default().push(d);
    }
    let mut counts = ProfileCounts::default();
    let profiles = home_sites
        .iter()
        .map(|(sim, site)| {
            counts.sims += 1;
            let dev = by_sim.get(sim.as_str()).map_or(DeviceResolution::NoDevice, |v| dominant_device(v, catalog));
            let (price, age) = match dev {
                DeviceResolution::NoDevice => {
                    counts.no_device += 1;
                    (None, None)
                }
                DeviceResolution::Unresolved => {
                    counts.unresolved_device += 1;
                    (None, None)
                }
                DeviceResolution::Device(e) if !e.is_phone => {
                    counts.non_phone += 1;
                    (None, None)
                }
                DeviceResolution::Device(e) => {
                    let age = phone_age_years(e.release_date, dataset_month);
                    if age < 0.0 {
                        counts.released_after_month += 1;
                    }
                    (e.price_eur, (age >= 0.0).then_some(age))
                }
            };
            SesProfile {
                sim_id: sim.clone(),
                home_site: site.clone(),
                home_price_per_sqm: site.as_ref().and_then(|s| site_prices.get(s).copied()),
                phone_price_eur: price,
                phone_age_years: age,
            }
        })
        .collect();
    (profiles, counts)
}

/// Half-open bins `[edges[i], edges[i + 1])`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bins {
    pub edges: Vec<f64>,
}

impl Bins {
    pub fn new(edges: Vec<f64>) -> Result<Self> {
        if edges.len() < 2 || edges.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config("bin edges must be strictly increasing with at least two values".into()));
        }
        Ok(Self { edges })
    }

    /// Property price per m², HUF.
    pub fn property() -> Self {
        Self {
            edges: vec![300_000.0, 500_000.0, 700_000.0, 900_000.0, 1_300_000.0],
        }
    }

    /// Phone price, EUR.
    pub fn phone_price() -> Self {
        Self {
            edges: vec![0.0, 150.0, 300.0, 450.0, 600.0, 750.0],
        }
    }

    /// Phone age, years.
    pub fn phone_age() -> Self {
        Self {
            edges: vec![0.0, 1.0, 2.0, 3.0, 4.0, 5.0],
        }
    }

    pub fn len(&self) -> usize {
        self.edges.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn bin_of(&self, v: f64) -> Option<usize> {
        if !(v >= self.edges[0] && v < self.edges[self.edges.len() - 1]) {
            return None;
        }
        Some(self.edges.partition_point(|e| *e <= v) - 1)
    }

    pub fn label(&self, i: usize) -> String {
        const ROMAN: [&str; 10] = ["i", "ii", "iii", "iv", "v", "vi", "vii", "viii", "ix", "x"];
        ROMAN.get(i).map_or_else(|| (i + 1).to_string(), |s| (*s).to_owned())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SesBinning {
    pub property: Bins,
    pub price: Bins,
    pub age: Bins,
}

impl Default for SesBinning {
    fn default() -> Self {
        Self {
            property: Bins::property(),
            price: Bins::phone_price(),
            age: Bins::phone_age(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SesCategory {
    pub sim_id: String,
    pub property: Option<usize>,
    pub price: Option<usize>,
    pub age: Option<usize>,
}

/// Bin populations plus the number of present values outside every bin.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct CategoryCounts {
    pub property: Vec<usize>,
    pub price: Vec<usize>,
    pub age: Vec<usize>,
    pub uncategorized_property: usize,
    pub uncategorized_price: usize,
    pub uncategorized_age: usize,
}

pub fn categorize(profiles: &[SesProfile], bins: &SesBinning) -> (Vec<SesCategory>, CategoryCounts) {
    let mut counts = CategoryCounts {
        property: vec![0; bins.property.len()],
        price: vec![0; bins.price.len()],
        age: vec![0; bins.age.len()],
        ..CategoryCounts::default()
    };
    let one = |v: Option<f64>, b: &Bins, pop: &mut Vec<usize>, out: &mut usize| -> Option<usize> {
        let v = v?;
        let i = b.bin_of(v);
        match i {
            Some(i) => pop[i] += 1,
            None => *out += 1,
        }
        i
    };
    let cats = profiles
        .iter()
        .map(|p| SesCategory {
            sim_id: p.sim_id.clone(),
            property: one(
                p.home_price_per_sqm,
                &bins.property,
                &mut counts.property,
                &mut counts.uncategorized_property,
            ),
            price: one(p.phone_price_eur, &bins.price, &mut counts.price, &mut counts.uncategorized_price),
            age: one(p.phone_age_years, &bins.age, &mut counts.age, &mut counts.uncategorized_age),
        })
        .collect();
    (cats, counts)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ColumnAxis {
    PhonePrice,
    PhoneAge,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct CategoryCell {
    pub median_wake_min: Option<f64>,
    pub count: usize,
}

/// Property bins × phone price or age bins.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryMatrix {
    pub column: ColumnAxis,
    pub row_labels: Vec<String>,
    pub col_labels: Vec<String>,
    pub cells: Vec<Vec<CategoryCell>>,
    /// Median wake-up over all sims of each row / column.
    pub row_medians: Vec<Option<f64>>,
    pub col_medians: Vec<Option<f64>>,
}

impl CategoryMatrix {
    pub fn total(&self) -> usize {
        self.cells.iter().flatten().map(|c| c.count).sum()
    }
}

/// Counts every sim with both a row and a column bin; the median only uses
/// those with a wake-up value.
pub fn wakeup_by_category(
    cats: &[SesCategory],
    wake_of_sim: impl Fn(&str) -> Option<f64>,
    bins: &SesBinning,
    column: ColumnAxis,
) -> CategoryMatrix {
    let col_bins = match column {
        ColumnAxis::PhonePrice => &bins.price,
        ColumnAxis::PhoneAge => &bins.age,
    };
    let (nr, nc) = (bins.property.len(), col_bins.len());
    let mut wakes = vec![vec![Vec::new(); nc]; nr];
    let mut counts = vec![vec![0usize; nc]; nr];
    for c in cats {
        let col = match column {
            ColumnAxis::PhonePrice => c.price,
            ColumnAxis::PhoneAge => c.age,
        };
        if let (Some(r), Some(k)) = (c.property, col) {
            counts[r][k] += 1;
            if let Some(w) = wake_of_sim(&c.sim_id) {
                wakes[r][k].push(w);
            }
        }
    }
    let row_medians = (0..nr)
        .map(|r| lower_median(&wakes[r].concat()))
        .collect();
    let col_medians = (0..nc)
        .map(|k| lower_median(&wakes.iter().flat_map(|row| row[k].iter().copied()).collect::<Vec<_>>()))
        .collect();
    CategoryMatrix {
        column,
        row_medians,
        col_medians,
        row_labels: (0..nr).map(|i| bins.property.label(i)).collect(),
        col_labels: (0..nc).map(|i| col_bins.label(i)).collect(),
        cells: (0..nr)
            .map(|r| {
                (0..nc)
                    .map(|k| CategoryCell {
                        median_wake_min: lower_median(&wakes[r][k]),
                        count: counts[r][k],
                    })
                    .collect()
            })
            .collect(),
    }
}

fn read_rows<T: for<'de> Deserialize<'de>, R: Read>(source: R) -> Result<Vec<T>> {
    let mut reader = csv::Reader::from_reader(source);
    let mut out = Vec::new();
    for row in reader.deserialize() {
        out.push(row?);
    }
    Ok(out)
}

fn write_rows<T: Serialize, W: Write>(rows: &[T], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_estate_ads_csv<R: Read>(source: R) -> Result<Vec<EstateAd>> {
    read_rows(source)
}

pub fn write_estate_ads_csv<W: Write>(ads: &[EstateAd], out: W) -> Result<()> {
    write_rows(ads, out)
}

pub fn read_device_catalog_csv<R: Read>(source: R) -> Result<Vec<DeviceCatalogEntry>> {
    read_rows(source)
}

pub fn write_device_catalog_csv<W: Write>(entries: &[DeviceCatalogEntry], out: W) -> Result<()> {
    write_rows(entries, out)
}

pub fn write_profiles_csv<W: Write>(profiles: &[SesProfile], out: W) -> Result<()> {
    write_rows(profiles, out)
}

pub fn read_profiles_csv<R: Read>(source: R) -> Result<Vec<SesProfile>> {
    read_rows(source)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixRow {
    pub row_bin: String,
    pub col_bin: String,
    pub median_wake_min: Option<f64>,
    pub count: usize,
}

pub fn matrix_rows(m: &CategoryMatrix) -> Vec<MatrixRow> {
    let mut out = Vec::new();
    for (r, row) in m.cells.iter().enumerate() {
        for (k, cell) in row.iter().enumerate() {
            out.push(MatrixRow {
                row_bin: m.row_labels[r].clone(),
                col_bin: m.col_labels[k].clone(),
                median_wake_min: cell.median_wake_min,
                count: cell.count,
            });
        }
    }
    out
}

pub fn write_matrix_csv<W: Write>(m: &CategoryMatrix, out: W) -> Result<()> {
    write_rows(&matrix_rows(m), out)
}

pub fn read_matrix_csv<R: Read>(source: R) -> Result<Vec<MatrixRow>> {
    read_rows(source)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn entry(tac: &str, release: &str, price: Option<f64>, is_phone: bool) -> DeviceCatalogEntry {
        DeviceCatalogEntry {
            tac: tac.into(),
            vendor: "v".into(),
            model: "m".into(),
            release_date: parse_month_date(release).unwrap(),
            price_eur: price,
            is_phone,
        }
    }

    fn iv(sim: &str, tac: &str, a: i64, b: i64) -> DeviceInterval {
        DeviceInterval {
            sim_id: sim.into(),
            tac: tac.into(),
            first_seen: a,
            last_seen: b,
        }
    }

    #[test]
    fn ad_price() {
        let ad = EstateAd {
            lat: 47.5,
            lon: 19.0,
            floor_sqm: 50.0,
            price_huf: 30_000_000.0,
        };
        assert_eq!(ad.price_per_sqm(), 600_000.0);
    }

    #[test]
    fn bins_half_open() {
        let p = Bins::property();
        assert_eq!(p.bin_of(550_000.0), Some(1));
        assert_eq!(p.bin_of(1_500_000.0), None);
        assert_eq!(p.bin_of(300_000.0), Some(0));
        let e = Bins::phone_price();
        assert_eq!(e.bin_of(299.0), Some(1));
        assert_eq!(e.bin_of(300.0), Some(2));
        assert_eq!(e.bin_of(750.0), None);
        assert_eq!(p.label(1), "ii");
    }

    #[test]
    fn age_from_months() {
        let r = parse_month_date("2015-04").unwrap();
        let m = parse_month_date("2017-04-01").unwrap();
        assert_eq!(phone_age_years(r, m), 2.0);
    }

    #[test]
    fn dominant_by_duration() {
        let cat = catalog_by_tac(vec![
            entry("11111111", "2016-01", Some(200.0), true),
            entry("22222222", "2016-01", Some(500.0), true),
        ])
        .unwrap();
        let a = iv("s", "11111111", 0, 25 * 86_400);
        let b = iv("s", "22222222", 25 * 86_400, 30 * 86_400);
        match dominant_device(&[&b, &a], &cat) {
            DeviceResolution::Device(e) => assert_eq!(e.tac, "11111111"),
            other => panic!("{other:?}"),
        }
        let c = iv("s", "99999999", 0, 40 * 86_400);
        assert_eq!(dominant_device(&[&a, &c], &cat), DeviceResolution::Unresolved);
    }

    #[test]
    fn profiles_and_matrix() {
        let cat = catalog_by_tac(vec![
            entry("11111111", "2015-04", Some(200.0), true),
            entry("33333333", "2014-01", None, false),
        ])
        .unwrap();
        let homes: BTreeMap<String, Option<String>> = [
            ("a".to_owned(), Some("S1".to_owned())),
            ("b".to_owned(), Some("S2".to_owned())),
            ("c".to_owned(), None),
        ]
        .into();
        let prices: BTreeMap<String, f64> = [("S1".to_owned(), 600_000.0)].into();
        let devices = vec![iv("a", "11111111", 0, 10), iv("b", "33333333", 0, 10)];
        let month = parse_month_date("2017-04").unwrap();
        let (profiles, counts) = build_profiles(&homes, &prices, &devices, &cat, month);
        assert_eq!(counts.non_phone, 1);
        assert_eq!(counts.no_device, 1);
        assert_eq!(profiles[0].home_price_per_sqm, Some(600_000.0));
        assert_eq!(profiles[0].phone_age_years, Some(2.0));
        assert_eq!(profiles[1].home_price_per_sqm, None);

        let bins = SesBinning::default();
        let (cats, cc) = categorize(&profiles, &bins);
        assert_eq!(cc.property.iter().sum::<usize>(), 1);
        let m = wakeup_by_category(&cats, |_| Some(430.0), &bins, ColumnAxis::PhonePrice);
        assert_eq!(m.total(), 1);
        assert_eq!(m.cells[1][1].count, 1);
        assert_eq!(m.cells[1][1].median_wake_min, Some(430.0));
        let m = wakeup_by_category(&cats, |_| None, &bins, ColumnAxis::PhoneAge);
        assert_eq!(m.cells[1][2], CategoryCell { median_wake_min: None, count: 1 });
    }
}
