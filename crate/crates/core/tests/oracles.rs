//! Randomized oracle and generator-ground-truth checks across modules.

use std::collections::{BTreeMap, HashMap};

use chrono::NaiveDate;
use chrono_cdr::circadian::{
    bin_activity, detect_daily_edges, detect_series, median_edges, smooth, smooth_series, start_end_pairing,
    working_hours, DayFilter, DayView, EdgeParams, GroupResolver, GroupingKind, NoiseFloorRule, WorkParams,
};
use chrono_cdr::geo::{
    build_voronoi, distance_km, merge_cells_to_sites, BoundingBox, CellInfo, LatLon, LocalProjection, Location,
    SiteGeometry,
};
use chrono_cdr::ingest::{filter_sims, ingest_reader, ActivityTable, CdrSchema};
use chrono_cdr::locations::{assign_locations, DayClass, LocationIndex};
use chrono_cdr::ses::{catalog_by_tac, dominant_device, site_price, DeviceResolution, EstateAd};
use chrono_cdr::stats::lower_median;
use chrono_cdr::synthgen::{write_cdr, ScenarioConfig, ShiftSpec, World};
use chrono_cdr::time::{LocalClock, BINS_PER_DAY};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn small_world(f: impl FnOnce(&mut ScenarioConfig)) -> World {
    let mut cfg = ScenarioConfig {
        n_sites: 8,
        n_sims: 3000,
        days: 14,
        ..ScenarioConfig::default()
    };
    f(&mut cfg);
    World::build(&cfg).unwrap()
}

#[test]
fn device_intervals_ignore_interleaving() {
    let mut r = rng(1);
    let clock = LocalClock::new(120);
    for _ in 0..50 {
        // per sim: strictly increasing times, tac drawn from a small set
        let mut per_sim: BTreeMap<String, Vec<(i64, String)>> = BTreeMap::new();
        for s in 0..5 {
            let mut t = 1_491_000_000i64;
            let v = per_sim.entry(format!("s{s}")).or_default();
            for _ in 0..r.gen_range(1..30) {
                t += 10 * r.gen_range(1..500);
                v.push((t, format!("3500000{}", r.gen_range(0..3))));
            }
        }
        let mut lines: Vec<(String, i64, String)> = per_sim
            .iter()
            .flat_map(|(s, v)| v.iter().map(move |(t, tac)| (s.clone(), *t, tac.clone())))
            .collect();
        // random interleaving that keeps each sim's own order
        lines.shuffle(&mut r);
        let mut csv = String::from("sim_id,timestamp,cell_id,tac\n");
        for (s, t, tac) in &lines {
            csv.push_str(&format!("{s},{t},c1,{tac}\n"));
        }
        let (tables, _) = ingest_reader(csv.as_bytes(), &CdrSchema::default(), &clock).unwrap();

        let mut want = Vec::new();
        for (s, v) in &per_sim {
            let mut v = v.clone();
            v.sort();
            let mut run: Option<(String, i64, i64)> = None;
            for (t, tac) in v {
                match &mut run {
                    Some((cur, _, last)) if *cur == tac => *last = t,
                    _ => {
                        if let Some((c, f, l)) = run.take() {
                            want.push((s.clone(), c, f, l));
                        }
                        run = Some((tac, t, t));
                    }
                }
            }
            if let Some((c, f, l)) = run {
                want.push((s.clone(), c, f, l));
            }
        }
        let got: Vec<_> = tables
            .devices
            .iter()
            .map(|d| (d.sim_id.clone(), d.tac.clone(), d.first_seen, d.last_seen))
            .collect();
        assert_eq!(got, want);
    }
}

#[test]
fn filter_matches_brute_force_scan() {
    let mut r = rng(2);
    let clock = LocalClock::new(120);
    let mut recs = Vec::new();
    let mut planted = Vec::new();
    for s in 0..100 {
        let days = r.gen_range(1..8);
        let per_day = r.gen_range(1..6);
        for d in 0..days {
            for k in 0..per_day {
                recs.push((format!("s{s:03}"), 1_491_004_800 + d * 86_400 + 3600 * (k + 6), "c".to_owned()));
            }
        }
        planted.push((format!("s{s:03}"), (days * per_day) as usize, days as usize));
    }
    let table = ActivityTable::from_records(recs.iter().map(|(s, t, c)| (s.as_str(), *t, c.as_str())));
    for (min_r, min_d) in [(0, 0), (10, 0), (0, 4), (12, 3)] {
        let (kept, report) = filter_sims(&table, min_r, min_d, &clock);
        let want: Vec<&str> = planted
            .iter()
            .filter(|(_, n, d)| *n >= min_r && *d >= min_d)
            .map(|p| p.0.as_str())
            .collect();
        let got: Vec<&str> = kept.sims().iter().map(String::as_str).collect();
        assert_eq!(got, want);
        assert_eq!(report.kept + report.excluded_min_records + report.excluded_min_active_days, 100);
    }
}

fn find(parent: &mut [usize], i: usize) -> usize {
    let mut i = i;
    while parent[i] != i {
        parent[i] = parent[parent[i]];
        i = parent[i];
    }
    i
}

#[test]
fn merge_equals_union_find_over_tolerance_graph() {
    let mut r = rng(3);
    let proj = LocalProjection::new(LatLon::new(47.5, 19.05));
    let stations: Vec<LatLon> = (0..50)
        .map(|_| proj.unproject([r.gen_range(-0.5..0.5), r.gen_range(-0.5..0.5)]))
        .collect();
    let cells: Vec<CellInfo> = (0..200)
        .map(|i| {
            let st = stations[r.gen_range(0..stations.len())];
            CellInfo {
                cell_id: format!("c{i:03}"),
                centroid: st,
                base_station: st,
            }
        })
        .collect();
    let tol_m = 60.0;
    let sites = merge_cells_to_sites(&cells, tol_m).unwrap();

    let mut parent: Vec<usize> = (0..cells.len()).collect();
    for i in 0..cells.len() {
        for j in i + 1..cells.len() {
            if distance_km(cells[i].base_station, cells[j].base_station) * 1000.0 <= tol_m {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                parent[a] = b;
            }
        }
    }
    let mut groups: BTreeMap<usize, Vec<String>> = BTreeMap::new();
    for (i, c) in cells.iter().enumerate() {
        let root = find(&mut parent, i);
        groups.entry(root).or_default().push(c.cell_id.clone());
    }
    let mut want: Vec<Vec<String>> = groups.into_values().collect();
    want.sort();
    let mut got: Vec<Vec<String>> = sites
        .iter()
        .map(|s| {
            let mut m = s.member_cells.clone();
            m.sort();
            m
        })
        .collect();
    got.sort();
    assert_eq!(got, want);
    for s in &sites {
        assert_eq!(&s.site_id, s.member_cells.iter().min().unwrap());
    }

    // permuting the input leaves assignments unchanged
    let mut shuffled = cells.clone();
    shuffled.reverse();
    let again = merge_cells_to_sites(&shuffled, tol_m).unwrap();
    let ids = |v: &[SiteGeometry]| v.iter().map(|s| s.site_id.clone()).collect::<Vec<_>>();
    assert_eq!(ids(&again), ids(&sites));
}

fn random_tessellation(r: &mut ChaCha8Rng, n: usize) -> chrono_cdr::geo::Tessellation {
    let proj = LocalProjection::new(LatLon::new(47.5, 19.05));
    let sites: Vec<SiteGeometry> = (0..n)
        .map(|i| SiteGeometry {
            site_id: format!("s{i:03}"),
            location: proj.unproject([r.gen_range(-15.0..15.0), r.gen_range(-15.0..15.0)]),
            member_cells: vec![format!("c{i:03}")],
            polygon: Vec::new(),
        })
        .collect();
    let bbox = BoundingBox::around(sites.iter().map(|s| &s.location), 3.0).unwrap();
    build_voronoi(sites, bbox).unwrap()
}

#[test]
fn locate_agrees_with_linear_scan_and_areas_partition_the_box() {
    let mut r = rng(4);
    let tess = random_tessellation(&mut r, 40);
    let proj = tess.projection();
    let seeds: Vec<[f64; 2]> = tess.sites().iter().map(|s| proj.project(s.location)).collect();
    let bb = tess.bbox();
    for _ in 0..1000 {
        let q = LatLon::new(r.gen_range(bb.min_lat..bb.max_lat), r.gen_range(bb.min_lon..bb.max_lon));
        let xy = proj.project(q);
        let nearest = (0..seeds.len())
            .min_by(|a, b| {
                let d = |i: usize| (seeds[i][0] - xy[0]).powi(2) + (seeds[i][1] - xy[1]).powi(2);
                d(*a).total_cmp(&d(*b))
            })
            .unwrap();
        assert_eq!(tess.locate(q), Location::Site(nearest));
    }
    let total: f64 = (0..tess.sites().len()).map(|i| tess.area_km2(i)).sum();
    assert!((total - tess.box_area_km2()).abs() <= 1e-6 * tess.box_area_km2());
}

#[test]
fn haversine_reference_and_triangle_inequality() {
    // independent evaluation of the reference pair
    let (lat, dlon) = (47.5f64.to_radians(), 0.0136f64.to_radians());
    let h = lat.cos() * lat.cos() * (dlon / 2.0).sin().powi(2);
    let want = 2.0 * 6371.0088 * h.sqrt().asin();
    let got = distance_km(LatLon::new(47.5, 19.0), LatLon::new(47.5, 19.0136));
    assert!((got - want).abs() < 1e-12);
    assert!((got - 1.025).abs() < 5e-3);

    let mut r = rng(5);
    let p = |r: &mut ChaCha8Rng| LatLon::new(r.gen_range(-80.0..80.0), r.gen_range(-179.0..179.0));
    for _ in 0..1000 {
        let (a, b, c) = (p(&mut r), p(&mut r), p(&mut r));
        assert!(distance_km(a, c) <= distance_km(a, b) + distance_km(b, c) + 1e-9);
        assert!((distance_km(a, b) - distance_km(b, a)).abs() < 1e-12);
    }
}

#[test]
fn site_prices_equal_nearest_site_grouping() {
    let mut r = rng(6);
    let tess = random_tessellation(&mut r, 15);
    let proj = tess.projection();
    let bb = tess.bbox();
    let ads: Vec<EstateAd> = (0..600)
        .map(|_| EstateAd {
            lat: r.gen_range(bb.min_lat..bb.max_lat),
            lon: r.gen_range(bb.min_lon..bb.max_lon),
            floor_sqm: r.gen_range(20.0..150.0),
            price_huf: r.gen_range(1e7..9e7),
        })
        .collect();
    let (prices, dropped) = site_price(&ads, &tess);
    assert_eq!(dropped, 0);
    let mut by_site: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for a in &ads {
        let xy = proj.project(LatLon::new(a.lat, a.lon));
        let i = (0..tess.sites().len())
            .min_by(|x, y| {
                let d = |i: usize| {
                    let s = proj.project(tess.sites()[i].location);
                    (s[0] - xy[0]).powi(2) + (s[1] - xy[1]).powi(2)
                };
                d(*x).total_cmp(&d(*y))
            })
            .unwrap();
        by_site.entry(tess.sites()[i].site_id.clone()).or_default().push(a.price_huf / a.floor_sqm);
    }
    let want: BTreeMap<String, f64> = by_site.into_iter().map(|(k, v)| (k, lower_median(&v).unwrap())).collect();
    assert_eq!(prices, want);
}

#[test]
fn planted_homes_and_work_sites_recovered() {
    let world = small_world(|c| {
        c.n_sims = 1000;
        c.days = 28;
    });
    let table = world.activity_table();
    let rows = assign_locations(&table, &world.calendar);
    let site_of = |cell: &str| world.tessellation.site_of_cell(cell);
    let by_id: HashMap<&str, _> = rows.iter().map(|r| (r.sim_id.as_str(), r)).collect();
    let (mut inferred, mut homes, mut works, mut workers) = (0, 0, 0, 0);
    for plan in &world.sims {
        let Some(row) = by_id.get(plan.sim_id.as_str()) else { continue };
        let Some(home) = row.home_cell.as_deref() else { continue };
        inferred += 1;
        homes += usize::from(site_of(home) == Some(plan.home_site as usize));
        if let Some((w, _)) = plan.work {
            workers += 1;
            works += usize::from(row.work_cell.as_deref().and_then(site_of) == Some(w as usize));
        }
    }
    assert!(inferred >= 900, "{inferred}");
    assert!(homes as f64 >= 0.98 * inferred as f64, "{homes}/{inferred}");
    assert!(works as f64 >= 0.95 * workers as f64, "{works}/{workers}");
}

#[test]
fn commuter_home_series_includes_workplace_records() {
    let world = small_world(|c| {
        c.n_sims = 200;
        c.away_workday = 0.0;
        c.away_holiday = 0.0;
        c.away_nonworker = 0.0;
    });
    let full = world.activity_table();
    let commuter: HashMap<&str, usize> = world
        .sims
        .iter()
        .enumerate()
        .filter(|(_, p)| p.work.is_some_and(|(w, _)| w != p.home_site))
        .map(|(i, p)| (p.sim_id.as_str(), i))
        .collect();
    let (idx, plan) = full
        .iter_sims()
        .filter_map(|(i, sim, recs)| commuter.get(sim).map(|p| (recs.len(), i, &world.sims[*p])))
        .max_by_key(|x| (x.0, std::cmp::Reverse(x.1)))
        .map(|(_, i, p)| (i, p))
        .unwrap();
    let table = full.retain_sims(|s| s == idx);
    let rows = assign_locations(&table, &world.calendar);
    let loc = LocationIndex::new(&table, &rows, 1);
    let resolver = GroupResolver::sites(&table, &world.tessellation);
    let clock = world.clock();
    let start = world.config.start_date;
    let n = world.config.days as usize;
    let inh = bin_activity(&table, GroupingKind::InhabitantBased, &resolver, Some(&loc), start, n, &clock);
    assert_eq!(inh.series.len(), 1);
    assert_eq!(inh.series[0].group_id, world.sites[plan.home_site as usize].site_id);
    assert_eq!(inh.series[0].total(), table.len() as u64);
    let cell = bin_activity(&table, GroupingKind::CellBased, &resolver, None, start, n, &clock);
    let home_cells = cell.series.iter().find(|s| s.group_id == inh.series[0].group_id).unwrap();
    assert!(home_cells.total() < inh.series[0].total());
}

#[test]
fn logistic_ramp_at_0650() {
    let lg = |x: f64| 1.0 / (1.0 + (-x).exp());
    let s = 30.0 / (2.0 * 9f64.ln());
    let bins: Vec<f64> = (0..BINS_PER_DAY)
        .map(|k| {
            let t = 10.0 * k as f64 + 5.0;
            2.0 + 100.0 * lg((t - 410.0) / s) * lg((1200.0 - t) / s)
        })
        .collect();
    let sm = smooth(&bins, 12);
    let e = detect_daily_edges(&DayView::new(&sm, 0.0), &EdgeParams::default());
    assert!((e.wake_min.unwrap() - 410.0).abs() <= 10.0);
}

#[test]
fn planted_month_medians_per_day_class() {
    let world = small_world(|c| {
        c.wake_price_gradient_min = 0.0;
        c.days = 30;
        for g in &mut c.groups {
            g.wake_sigma_min = 0.0;
            g.bed_sigma_min = 0.0;
        }
    });
    let table = world.activity_table();
    let clock = world.clock();
    let city = bin_activity(
        &table,
        GroupingKind::CellBased,
        &GroupResolver::city(&table),
        None,
        world.config.start_date,
        30,
        &clock,
    );
    let sm = smooth_series(&city.series[0], 12);
    let edges = detect_series(&sm, &EdgeParams::default(), &NoiseFloorRule::default(), |d| {
        world.calendar.classify_day(d).unwrap()
    });
    let wd = median_edges(&edges, DayFilter::Workday).wake_median.unwrap();
    let hd = median_edges(&edges, DayFilter::Holiday).wake_median.unwrap();
    assert!((wd - 430.0).abs() <= 10.0, "{wd}");
    assert!((hd - 490.0).abs() <= 10.0, "{hd}");
}

#[test]
fn shifts_are_ordered_and_pairs_recovered() {
    let world = small_world(|c| {
        c.n_sites = 9;
        c.n_sims = 30_000;
        c.low_volume_site_share = 0.0;
        c.shifts = [480.0, 540.0, 600.0]
            .iter()
            .map(|s| ShiftSpec {
                share: 1.0 / 3.0,
                start_min: *s,
                end_min: s + 480.0,
            })
            .collect();
    });
    let table = world.activity_table();
    let rows = assign_locations(&table, &world.calendar);
    let loc = LocationIndex::new(&table, &rows, 1);
    let resolver = GroupResolver::sites(&table, &world.tessellation);
    let clock = world.clock();
    let n = world.config.days as usize;
    let binned = bin_activity(&table, GroupingKind::WorkerBased, &resolver, Some(&loc), world.config.start_date, n, &clock);
    let class_of = |d: NaiveDate| world.calendar.classify_day(d).unwrap();

    let mut detected = Vec::new();
    let mut planted: HashMap<String, (f64, f64)> = HashMap::new();
    for s in &world.sites {
        planted.insert(s.site_id.clone(), s.shift);
    }
    let mut block_share = Vec::new();
    for raw in &binned.series {
        let sm = smooth_series(raw, 12);
        let (_, wh) = working_hours(raw, &sm, class_of, &WorkParams::default(), &NoiseFloorRule::default());
        // workday records inside 09:00-16:00 dominate the worker curve
        let mut inside = 0u64;
        let mut all = 0u64;
        for d in 0..raw.n_days() {
            if class_of(raw.date(d)) == DayClass::Workday {
                inside += raw.day(d)[54..96].iter().map(|b| u64::from(*b)).sum::<u64>();
                all += raw.day_total(d);
            }
        }
        block_share.push(inside as f64 / all as f64);
        detected.push((planted[&raw.group_id], wh));
    }
    assert!(block_share.iter().all(|s| *s > 0.6), "{block_share:?}");
    let start_of = |p: f64| -> Vec<f64> {
        detected.iter().filter(|(s, _)| s.0 == p).filter_map(|(_, w)| w.start_min).collect()
    };
    let (early, late) = (start_of(480.0), start_of(600.0));
    assert!(!early.is_empty() && !late.is_empty());
    assert!(early.iter().fold(f64::MIN, |a, b| a.max(*b)) < late.iter().fold(f64::MAX, |a, b| a.min(*b)));

    let pairing = start_end_pairing(detected.iter().map(|(_, w)| w), 3, 30.0);
    let mut heaviest = Vec::new();
    for (i, (s, _)) in pairing.top_starts.iter().enumerate() {
        for (j, (e, _)) in pairing.top_ends.iter().enumerate() {
            if pairing.matrix[i][j] > 0 {
                heaviest.push((*s, *e, pairing.matrix[i][j]));
            }
        }
    }
    heaviest.sort_by_key(|h| std::cmp::Reverse(h.2));
    let mut top: Vec<(u32, u32)> = heaviest.iter().take(3).map(|h| (h.0, h.1)).collect();
    top.sort();
    let mut want: Vec<(u32, u32)> = world
        .sites
        .iter()
        .map(|s| (s.shift.0 as u32, s.shift.1 as u32))
        .collect();
    want.sort();
    want.dedup();
    assert_eq!(top, want);
}

#[test]
fn multi_device_selection_matches_generator() {
    let world = small_world(|c| {
        c.n_sims = 4000;
        c.multi_device_share = 0.2;
    });
    let mut buf = Vec::new();
    write_cdr(&world, &mut buf).unwrap();
    let (tables, _) = ingest_reader(buf.as_slice(), &CdrSchema::default(), &world.clock()).unwrap();
    let catalog = catalog_by_tac(world.catalog.clone()).unwrap();
    let mut by_sim: HashMap<&str, Vec<_>> = HashMap::new();
    for d in &tables.devices {
        by_sim.entry(d.sim_id.as_str()).or_default().push(d);
    }
    let (mut n, mut agree) = (0, 0);
    // near-even splits have no clear dominant handset
    let days = world.config.days;
    let clear = |p: &&chrono_cdr::synthgen::SimPlan| p.device.1.is_some_and(|(_, from)| (days as i64 - 2 * from as i64).abs() >= 4);
    for plan in world.sims.iter().filter(clear) {
        let Some(iv) = by_sim.get(plan.sim_id.as_str()) else { continue };
        let want = &world.tacs[plan.dominant_tac(world.config.days) as usize];
        let got = match dominant_device(iv, &catalog) {
            DeviceResolution::Device(e) => Some(e.tac.as_str()),
            DeviceResolution::Unresolved => iv.iter().map(|d| d.tac.as_str()).find(|t| !catalog.contains_key(*t)),
            DeviceResolution::NoDevice => None,
        };
        n += 1;
        agree += usize::from(got == Some(want.as_str()));
    }
    assert!(n > 300);
    assert!(agree as f64 >= 0.97 * n as f64, "{agree}/{n}");
}
