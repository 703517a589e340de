use std::io::Write;

use chrono::{Datelike, NaiveDate};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal, Normal, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::ScenarioConfig;
use crate::error::Result;
use crate::geo::{build_voronoi, BoundingBox, CellInfo, LatLon, LocalProjection, Location, SiteGeometry, Tessellation};
use crate::ingest::{ActivityTable, CustomerType, Gender, SubscriptionType};
use crate::locations::{Calendar, DayClass};
use crate::ses::{DeviceCatalogEntry, EstateAd};
use crate::time::{self, LocalClock, BINS_PER_DAY, BIN_SECONDS};

const WORLD_STREAM: u64 = u64::MAX;
/// Padding of the tessellation box around the sites.
pub const BBOX_PAD_KM: f64 = 10.0;

fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn pick_weighted<R: Rng>(rng: &mut R, cumulative: &[f64]) -> usize {
    let total = *cumulative.last().expect("non-empty weights");
    let u = rng.gen::<f64>() * total;
    cumulative.partition_point(|c| *c <= u).min(cumulative.len() - 1)
}

fn cumulative(weights: impl IntoIterator<Item = f64>) -> Vec<f64> {
    weights
        .into_iter()
        .scan(0.0, |acc, w| {
            *acc += w;
            Some(*acc)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthSite {
    pub site_id: String,
    pub location: LatLon,
    pub cells: Vec<String>,
    pub cell_centroids: Vec<LatLon>,
    pub price_per_sqm: f64,
    pub shift: (f64, f64),
    pub home_weight: f64,
    pub work_weight: f64,
    pub low_volume: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Subscriber {
    pub customer_type: CustomerType,
    pub subscription_type: SubscriptionType,
    pub age: u8,
    pub gender: Gender,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimPlan {
    pub sim_id: String,
    pub group: u16,
    pub home_site: u32,
    pub home_cell: u8,
    pub work: Option<(u32, u8)>,
    /// Indexed by `[workday, holiday]`.
    pub wake: [f64; 2],
    pub bed: [f64; 2],
    pub rate: f64,
    pub subscriber: Option<Subscriber>,
    /// Index into [`World::tacs`], and an optional switch to a second
    /// device from the given day on.
    pub device: (u16, Option<(u16, u32)>),
}

impl SimPlan {
    pub fn tac_on_day(&self, day: u32) -> u16 {
        match self.device.1 {
            Some((second, from)) if day >= from => second,
            _ => self.device.0,
        }
    }

    /// Device used on most days.
    pub fn dominant_tac(&self, days: u32) -> u16 {
        match self.device.1 {
            Some((second, from)) if days - from > from => second,
            _ => self.device.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SynthRecord {
    pub timestamp: i64,
    pub site: u32,
    pub cell: u8,
    pub tac: u16,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SiteTruth {
    pub site_id: String,
    pub lat: f64,
    pub lon: f64,
    pub cells: Vec<String>,
    pub price_per_sqm: f64,
    pub shift_start_min: f64,
    pub shift_end_min: f64,
    pub low_volume: bool,
    pub planted_wake_workday: f64,
    pub planted_wake_holiday: f64,
    pub planted_bed_workday: f64,
    pub planted_bed_holiday: f64,
    pub inhabitants: usize,
    pub workers: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimTruth {
    pub sim_id: String,
    pub group: String,
    pub home_site: String,
    pub home_cell: String,
    pub work_site: Option<String>,
    pub work_cell: Option<String>,
    pub wake_workday: f64,
    pub wake_holiday: f64,
    pub bed_workday: f64,
    pub bed_holiday: f64,
    pub rate_per_day: f64,
    pub dominant_tac: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub scenario: ScenarioConfig,
    pub sites: Vec<SiteTruth>,
    pub sims: Vec<SimTruth>,
}

impl GroundTruth {
    pub fn read_json<R: std::io::Read>(source: R) -> Result<Self> {
        Ok(serde_json::from_reader(source)?)
    }
}

#[derive(Debug, Clone)]
pub struct World {
    pub config: ScenarioConfig,
    pub calendar: Calendar,
    pub sites: Vec<SynthSite>,
    pub tessellation: Tessellation,
    pub catalog: Vec<DeviceCatalogEntry>,
    /// Catalog tacs first, then tacs missing from the catalog.
    pub tacs: Vec<String>,
    pub ads: Vec<EstateAd>,
    pub sims: Vec<SimPlan>,
    day_classes: Vec<DayClass>,
    midnights: Vec<i64>,
}

const VENDORS: [&str; 8] = ["Samsung", "Apple", "Huawei", "Nokia", "Sony", "LG", "Xiaomi", "Motorola"];
const PHONES: usize = 40;
const NON_PHONES: usize = 5;
const UNKNOWN_TACS: usize = 5;

fn digits(n: usize) -> usize {
    n.saturating_sub(1).to_string().len()
}

impl World {
    pub fn build(config: &ScenarioConfig) -> Result<World> {
        config.validate()?;
        let cfg = config.clone();
        let mut rng = rng_for(cfg.seed, WORLD_STREAM);

        let center = LatLon::new(cfg.center_lat, cfg.center_lon);
        let proj = LocalProjection::new(center);
        let half = cfg.box_km / 2.0;
        let width = digits(cfg.n_sites);
        let n_low = ((cfg.n_sites as f64) * cfg.low_volume_site_share).round() as usize;
        let mut order: Vec<usize> = (0..cfg.n_sites).collect();
        order.shuffle(&mut rng);
        let mut low = vec![false; cfg.n_sites];
        for i in &order[..n_low] {
            low[*i] = true;
        }
        let shift_cum = cumulative(cfg.shifts.iter().map(|s| s.share));
        let mut sites = Vec::with_capacity(cfg.n_sites);
        for (i, low_volume) in low.into_iter().enumerate() {
            let xy = [rng.gen_range(-half..half), rng.gen_range(-half..half)];
            let location = proj.unproject(xy);
            let n_cells = rng.gen_range(1..=cfg.max_cells_per_site) as usize;
            let start_angle = rng.gen_range(0.0..std::f64::consts::TAU);
            let cells = (0..n_cells).map(|k| format!("S{i:0width$}-{}", k + 1)).collect();
            let cell_centroids = (0..n_cells)
                .map(|k| {
                    let a = start_angle + std::f64::consts::TAU * k as f64 / n_cells as f64;
                    proj.unproject([xy[0] + 0.3 * a.cos(), xy[1] + 0.3 * a.sin()])
                })
                .collect();
            let price_per_sqm = rng.gen_range(cfg.price_min_huf..cfg.price_max_huf);
            let shift = if cfg.shifts.is_empty() {
                (0.0, 0.0)
            } else {
                let s = cfg.shifts[pick_weighted(&mut rng, &shift_cum)];
                (s.start_min, s.end_min)
            };
            let home_weight = rng.gen_range(0.5..1.5);
            let mut work_weight = rng.gen_range(0.5..1.5);
            if low_volume {
                work_weight *= cfg.low_volume_weight;
            }
            sites.push(SynthSite {
                site_id: format!("S{i:0width$}-1"),
                location,
                cells,
                cell_centroids,
                price_per_sqm,
                shift,
                home_weight,
                work_weight,
                low_volume,
            });
        }

        let geoms: Vec<SiteGeometry> = sites
            .iter()
            .map(|s| SiteGeometry {
                site_id: s.site_id.clone(),
                location: s.location,
                member_cells: s.cells.clone(),
                polygon: Vec::new(),
            })
            .collect();
        let bbox = BoundingBox::around(sites.iter().map(|s| &s.location), BBOX_PAD_KM).expect("at least two sites");
        let tessellation = build_voronoi(geoms, bbox)?;

        let (catalog, tacs) = Self::build_catalog(&mut rng);
        let ads = Self::build_ads(&cfg, &sites, &tessellation, &proj, &mut rng);

        let clock = LocalClock::new(cfg.tz_offset_minutes);
        let calendar = Calendar {
            holidays: cfg.extra_holidays.iter().copied().collect(),
            ..Calendar::new(cfg.tz_offset_minutes).with_range(cfg.start_date, cfg.end_date())
        };
        let dates: Vec<NaiveDate> = time::date_range(cfg.start_date, cfg.end_date()).collect();
        let day_classes = dates.iter().map(|d| calendar.classify_day(*d)).collect::<Result<Vec<_>>>()?;
        let midnights = dates.iter().map(|d| clock.midnight_epoch(*d)).collect();

        let sims = Self::build_sims(&cfg, &sites, &catalog);
        Ok(World {
            config: cfg,
            calendar,
            sites,
            tessellation,
            catalog,
            tacs,
            ads,
            sims,
            day_classes,
            midnights,
        })
    }

    fn build_catalog(rng: &mut ChaCha8Rng) -> (Vec<DeviceCatalogEntry>, Vec<String>) {
        let month = |m: u32| NaiveDate::from_ymd_opt(2011 + (m / 12) as i32, m % 12 + 1, 1).expect("valid month");
        let mut catalog = Vec::new();
        for i in 0..PHONES {
            catalog.push(DeviceCatalogEntry {
                tac: format!("35{:06}", 1000 + i * 131),
                vendor: VENDORS[i % VENDORS.len()].to_owned(),
                model: format!("Phone {}", i + 1),
                release_date: month(rng.gen_range(0..75)),
                price_eur: Some((80.0 + 720.0 * i as f64 / (PHONES - 1) as f64).round()),
                is_phone: true,
            });
        }
        for i in 0..NON_PHONES {
            catalog.push(DeviceCatalogEntry {
                tac: format!("86{:06}", 500 + i * 77),
                vendor: "Generic".to_owned(),
                model: format!("Modem {}", i + 1),
                release_date: month(rng.gen_range(0..75)),
                price_eur: None,
                is_phone: false,
            });
        }
        let mut tacs: Vec<String> = catalog.iter().map(|e| e.tac.clone()).collect();
        tacs.extend((0..UNKNOWN_TACS).map(|i| format!("99{:06}", 42 + i * 1009)));
        (catalog, tacs)
    }

    fn build_ads(
        cfg: &ScenarioConfig,
        sites: &[SynthSite],
        tess: &Tessellation,
        proj: &LocalProjection,
        rng: &mut ChaCha8Rng,
    ) -> Vec<EstateAd> {
        let spread = Normal::new(0.0, 0.8).expect("valid normal");
        let noise = Normal::new(0.0, 0.08).expect("valid normal");
        let mut ads = Vec::new();
        for s in sites {
            let [x, y] = proj.project(s.location);
            for _ in 0..cfg.ads_per_site {
                let p = proj.unproject([x + spread.sample(rng), y + spread.sample(rng)]);
                let floor: f64 = rng.gen_range(30.0..120.0);
                let eps: f64 = noise.sample(rng);
                let Location::Site(j) = tess.locate(p) else {
                    continue;
                };
                let ppsqm = sites[j].price_per_sqm * eps.exp();
                ads.push(EstateAd {
                    lat: p.lat,
                    lon: p.lon,
                    floor_sqm: (floor * 10.0).round() / 10.0,
                    price_huf: (ppsqm * floor / 1000.0).round() * 1000.0,
                });
            }
        }
        ads
    }

    fn build_sims(cfg: &ScenarioConfig, sites: &[SynthSite], catalog: &[DeviceCatalogEntry]) -> Vec<SimPlan> {
        let width = digits(cfg.n_sims);
        let group_cum = cumulative(cfg.groups.iter().map(|g| g.share));
        let home_cum = cumulative(sites.iter().map(|s| s.home_weight));
        let work_cum = cumulative(sites.iter().map(|s| s.work_weight));
        let mid_price = (cfg.price_min_huf + cfg.price_max_huf) / 2.0;
        let price_span = cfg.price_max_huf - cfg.price_min_huf;
        let phones: Vec<usize> = (0..catalog.len()).filter(|i| catalog[*i].is_phone).collect();
        let non_phones: Vec<usize> = (0..catalog.len()).filter(|i| !catalog[*i].is_phone).collect();
        let lognormal = LogNormal::new(-cfg.rate_sigma * cfg.rate_sigma / 2.0, cfg.rate_sigma).expect("valid sigma");

        (0..cfg.n_sims)
            .into_par_iter()
            .map(|i| {
                let mut rng = rng_for(cfg.seed, 2 * i as u64);
                let group = pick_weighted(&mut rng, &group_cum);
                let g = &cfg.groups[group];
                let home_site = pick_weighted(&mut rng, &home_cum);
                let home_cell = rng.gen_range(0..sites[home_site].cells.len()) as u8;
                let work = g.works.then(|| {
                    let mut w = pick_weighted(&mut rng, &work_cum);
                    for _ in 0..32 {
                        if w != home_site {
                            break;
                        }
                        w = pick_weighted(&mut rng, &work_cum);
                    }
                    if w == home_site {
                        w = (w + 1) % sites.len();
                    }
                    (w as u32, rng.gen_range(0..sites[w].cells.len()) as u8)
                });
                let home_price = sites[home_site].price_per_sqm;
                let wake_mean = g.wake_mean_min + cfg.wake_price_gradient_min * (home_price - mid_price) / 1e6;
                let wake = wake_mean + g.wake_sigma_min * rng.sample::<f64, _>(rand_distr::StandardNormal);
                let bed = (g.bed_mean_min + g.bed_sigma_min * rng.sample::<f64, _>(rand_distr::StandardNormal))
                    .max(wake + 120.0);
                let rate = g.rate_per_day * lognormal.sample(&mut rng);
                let subscriber = (rng.gen::<f64>() >= cfg.missing_subscriber_share).then(|| Subscriber {
                    customer_type: if rng.gen::<f64>() < 0.15 {
                        CustomerType::Business
                    } else {
                        CustomerType::Consumer
                    },
                    subscription_type: if rng.gen::<f64>() < 0.3 {
                        SubscriptionType::Prepaid
                    } else {
                        SubscriptionType::Postpaid
                    },
                    age: rng.gen_range(18..=80),
                    gender: if rng.gen::<bool>() { Gender::Female } else { Gender::Male },
                });

                let phone_target = cfg.phone_price_low_eur
                    + (cfg.phone_price_high_eur - cfg.phone_price_low_eur) * (home_price - cfg.price_min_huf) / price_span
                    + cfg.phone_price_noise_eur * rng.sample::<f64, _>(rand_distr::StandardNormal);
                let nearest_phone = *phones
                    .iter()
                    .min_by(|a, b| {
                        let da = (catalog[**a].price_eur.unwrap_or(0.0) - phone_target).abs();
                        let db = (catalog[**b].price_eur.unwrap_or(0.0) - phone_target).abs();
                        da.total_cmp(&db)
                    })
                    .expect("catalog has phones");
                let u = rng.gen::<f64>();
                let first = if u < cfg.unknown_tac_share {
                    catalog.len() + rng.gen_range(0..UNKNOWN_TACS)
                } else if u < cfg.unknown_tac_share + cfg.non_phone_share {
                    non_phones[rng.gen_range(0..non_phones.len())]
                } else {
                    nearest_phone
                };
                let second = (cfg.days > 1 && rng.gen::<f64>() < cfg.multi_device_share).then(|| {
                    let other = phones[rng.gen_range(0..phones.len())];
                    (other as u16, rng.gen_range(1..cfg.days))
                });

                SimPlan {
                    sim_id: format!("U{i:0width$}"),
                    group: group as u16,
                    home_site: home_site as u32,
                    home_cell,
                    work,
                    wake: [wake, wake + g.holiday_wake_shift_min],
                    bed: [bed, bed + g.holiday_bed_shift_min],
                    rate,
                    subscriber,
                    device: (first as u16, second),
                }
            })
            .collect()
    }

    /// Logistic scale giving a 10%-90% ramp of `rise_width_min`.
    fn ramp_scale(&self) -> f64 {
        self.config.rise_width_min / (2.0 * 9f64.ln())
    }

    /// Relative intensity at `t` minutes after local midnight.
    pub fn intensity(&self, wake: f64, bed: f64, t: f64) -> f64 {
        let s = self.ramp_scale();
        let logistic = |x: f64| 1.0 / (1.0 + (-x).exp());
        let floor = self.config.night_floor;
        floor + (1.0 - floor) * logistic((t - wake) / s) * logistic((bed - t) / s)
    }

    /// Cumulative bin weights of one day profile, bin midpoints.
    pub fn profile_cdf(&self, wake: f64, bed: f64) -> [f64; BINS_PER_DAY] {
        let mut out = [0.0; BINS_PER_DAY];
        let mut acc = 0.0;
        for (k, slot) in out.iter_mut().enumerate() {
            acc += self.intensity(wake, bed, 10.0 * k as f64 + 5.0);
            *slot = acc;
        }
        out
    }

    pub fn day_class(&self, day: usize) -> DayClass {
        self.day_classes[day]
    }

    pub fn clock(&self) -> LocalClock {
        LocalClock::new(self.config.tz_offset_minutes)
    }

    /// Records of sim `i` in time order.
    pub fn sim_records(&self, i: usize) -> Vec<SynthRecord> {
        let cfg = &self.config;
        let plan = &self.sims[i];
        let mut rng = rng_for(cfg.seed, 2 * i as u64 + 1);
        let cdfs = [
            self.profile_cdf(plan.wake[0], plan.bed[0]),
            self.profile_cdf(plan.wake[1], plan.bed[1]),
        ];
        let poisson = Poisson::new(plan.rate).ok();
        let n_sites = self.sites.len();
        let mut out = Vec::new();
        for day in 0..self.day_classes.len() {
            let class = self.day_classes[day];
            let ci = usize::from(class == DayClass::Holiday);
            let n = poisson.as_ref().map_or(0, |p| p.sample(&mut rng) as u64);
            let tac = plan.tac_on_day(day as u32);
            for _ in 0..n {
                let cdf = &cdfs[ci];
                let u = rng.gen::<f64>() * cdf[BINS_PER_DAY - 1];
                let bin = cdf.partition_point(|c| *c <= u).min(BINS_PER_DAY - 1);
                let sec = bin as i64 * BIN_SECONDS + rng.gen_range(0..60) * 10;
                let minute = sec as f64 / 60.0;
                let at_work = match (plan.work, class) {
                    (Some((w, _)), DayClass::Workday) => {
                        let (start, end) = self.sites[w as usize].shift;
                        minute >= start && minute < end
                    }
                    _ => false,
                };
                let p_away = match (plan.work.is_some(), class) {
                    (_, DayClass::Holiday) => cfg.away_holiday,
                    (true, DayClass::Workday) => cfg.away_workday,
                    (false, DayClass::Workday) => cfg.away_nonworker,
                };
                let (site, cell) = if rng.gen::<f64>() < p_away {
                    let mut s = rng.gen_range(0..n_sites) as u32;
                    while s == plan.home_site || plan.work.is_some_and(|(w, _)| w == s) {
                        s = rng.gen_range(0..n_sites) as u32;
                        if n_sites <= 2 {
                            break;
                        }
                    }
                    (s, rng.gen_range(0..self.sites[s as usize].cells.len()) as u8)
                } else if at_work {
                    plan.work.expect("worker")
                } else {
                    (plan.home_site, plan.home_cell)
                };
                out.push(SynthRecord {
                    timestamp: self.midnights[day] + sec,
                    site,
                    cell,
                    tac,
                });
            }
        }
        out.sort_by_key(|r| r.timestamp);
        out
    }

    pub fn cell_id(&self, site: u32, cell: u8) -> &str {
        &self.sites[site as usize].cells[cell as usize]
    }

    /// Appends the CSV lines of sim `i`; returns the record count.
    pub fn write_sim_csv(&self, i: usize, buf: &mut Vec<u8>) -> u64 {
        let plan = &self.sims[i];
        let tail = match &plan.subscriber {
            Some(s) => format!(
                "{},{},{},{}",
                s.customer_type.as_str(),
                s.subscription_type.as_str(),
                s.age,
                s.gender.as_str()
            ),
            None => ",,,".to_owned(),
        };
        let recs = self.sim_records(i);
        for r in &recs {
            // writing to a Vec cannot fail
            let _ = writeln!(
                buf,
                "{},{},{},{},{}",
                plan.sim_id,
                r.timestamp,
                self.cell_id(r.site, r.cell),
                tail,
                self.tacs[r.tac as usize]
            );
        }
        recs.len() as u64
    }

    /// Activity table built directly from the generated records.
    pub fn activity_table(&self) -> ActivityTable {
        let per_sim: Vec<Vec<SynthRecord>> = (0..self.sims.len()).into_par_iter().map(|i| self.sim_records(i)).collect();
        ActivityTable::from_records(per_sim.iter().enumerate().flat_map(|(i, recs)| {
            let id = self.sims[i].sim_id.as_str();
            recs.iter().map(move |r| (id, r.timestamp, self.cell_id(r.site, r.cell)))
        }))
    }

    pub fn cells(&self) -> Vec<CellInfo> {
        self.sites
            .iter()
            .flat_map(|s| {
                s.cells.iter().zip(&s.cell_centroids).map(|(id, c)| CellInfo {
                    cell_id: id.clone(),
                    centroid: *c,
                    base_station: s.location,
                })
            })
            .collect()
    }

    pub fn dataset_month(&self) -> NaiveDate {
        let d = self.config.start_date;
        NaiveDate::from_ymd_opt(d.year(), d.month(), 1).expect("valid month")
    }

    pub fn ground_truth(&self) -> GroundTruth {
        let cfg = &self.config;
        let mid_price = (cfg.price_min_huf + cfg.price_max_huf) / 2.0;
        let mean = |f: &dyn Fn(&super::GroupSpec) -> f64| cfg.groups.iter().map(|g| g.share * f(g)).sum::<f64>();
        let wake = mean(&|g| g.wake_mean_min);
        let wake_h = mean(&|g| g.wake_mean_min + g.holiday_wake_shift_min);
        let bed = mean(&|g| g.bed_mean_min);
        let bed_h = mean(&|g| g.bed_mean_min + g.holiday_bed_shift_min);
        let mut inhabitants = vec![0; self.sites.len()];
        let mut workers = vec![0; self.sites.len()];
        for p in &self.sims {
            inhabitants[p.home_site as usize] += 1;
            if let Some((w, _)) = p.work {
                workers[w as usize] += 1;
            }
        }
        let sites = self
            .sites
            .iter()
            .enumerate()
            .map(|(i, s)| {
                let ses = cfg.wake_price_gradient_min * (s.price_per_sqm - mid_price) / 1e6;
                SiteTruth {
                    site_id: s.site_id.clone(),
                    lat: s.location.lat,
                    lon: s.location.lon,
                    cells: s.cells.clone(),
                    price_per_sqm: s.price_per_sqm,
                    shift_start_min: s.shift.0,
                    shift_end_min: s.shift.1,
                    low_volume: s.low_volume,
                    planted_wake_workday: wake + ses,
                    planted_wake_holiday: wake_h + ses,
                    planted_bed_workday: bed,
                    planted_bed_holiday: bed_h,
                    inhabitants: inhabitants[i],
                    workers: workers[i],
                }
            })
            .collect();
        let sims = self
            .sims
            .iter()
            .map(|p| SimTruth {
                sim_id: p.sim_id.clone(),
                group: cfg.groups[p.group as usize].name.clone(),
                home_site: self.sites[p.home_site as usize].site_id.clone(),
                home_cell: self.cell_id(p.home_site, p.home_cell).to_owned(),
                work_site: p.work.map(|(w, _)| self.sites[w as usize].site_id.clone()),
                work_cell: p.work.map(|(w, c)| self.cell_id(w, c).to_owned()),
                wake_workday: p.wake[0],
                wake_holiday: p.wake[1],
                bed_workday: p.bed[0],
                bed_holiday: p.bed[1],
                rate_per_day: p.rate,
                dominant_tac: self.tacs[p.dominant_tac(cfg.days) as usize].clone(),
            })
            .collect();
        GroundTruth {
            scenario: cfg.clone(),
            sites,
            sims,
        }
    }
}
