use chrono::NaiveDate;
use chrono_cdr::circadian::{bin_activity, smooth, GroupResolver, GroupingKind};
use chrono_cdr::ingest::{activity_histograms, ingest_reader, ActivityTable, CdrSchema};
use chrono_cdr::locations::{assign_locations, Calendar, LocationIndex};
use chrono_cdr::mobility::{minmax, pearson_r};
use chrono_cdr::time::LocalClock;
use proptest::prelude::*;

const T0: i64 = 1_491_004_800 - 7200; // 2017-04-01 00:00 local at +02:00

fn records() -> impl Strategy<Value = Vec<(u8, i64, u8)>> {
    prop::collection::vec((0u8..12, 0i64..14 * 86_400, 0u8..6), 1..400)
}

fn table_of(recs: &[(u8, i64, u8)]) -> ActivityTable {
    let rows: Vec<(String, i64, String)> =
        recs.iter().map(|(s, t, c)| (format!("s{s:02}"), T0 + t, format!("c{c}"))).collect();
    ActivityTable::from_records(rows.iter().map(|(s, t, c)| (s.as_str(), *t, c.as_str())))
}

fn csv_bytes(t: &ActivityTable) -> Vec<u8> {
    let mut out = Vec::new();
    t.write_csv(&mut out).unwrap();
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn minmax_ignores_positive_affine_maps(
        xs in prop::collection::vec(-1e3f64..1e3, 2..60),
        a in 0.01f64..100.0,
        b in -1e3f64..1e3,
    ) {
        let mapped: Vec<f64> = xs.iter().map(|x| a * x + b).collect();
        for (p, q) in minmax(&xs).iter().zip(minmax(&mapped)) {
            prop_assert!((p - q).abs() < 1e-6);
        }
        let ys: Vec<f64> = xs.iter().enumerate().map(|(i, x)| x * x - i as f64).collect();
        if let (Ok(r1), Ok(r2)) = (pearson_r(&xs, &ys), pearson_r(&mapped, &ys)) {
            prop_assert!((r1 - r2).abs() < 1e-6);
        }
    }

    #[test]
    fn input_order_does_not_matter(recs in records(), seed in any::<u64>()) {
        let clock = LocalClock::new(120);
        let mut lines: Vec<String> =
            recs.iter().map(|(s, t, c)| format!("s{s:02},{},c{c}", T0 + t)).collect();
        let a = ingest_reader(
            format!("sim_id,timestamp,cell_id\n{}\n", lines.join("\n")).as_bytes(),
            &CdrSchema::default(),
            &clock,
        ).unwrap().0;
        use rand::{seq::SliceRandom, SeedableRng};
        lines.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
        let b = ingest_reader(
            format!("sim_id,timestamp,cell_id\n{}\n", lines.join("\n")).as_bytes(),
            &CdrSchema::default(),
            &clock,
        ).unwrap().0;
        prop_assert_eq!(csv_bytes(&a.activity), csv_bytes(&b.activity));
        let cal = Calendar::new(120);
        prop_assert_eq!(assign_locations(&a.activity, &cal), assign_locations(&b.activity, &cal));
    }

    #[test]
    fn located_sims_shrink_with_min_support(recs in records()) {
        let table = table_of(&recs);
        let rows = assign_locations(&table, &Calendar::new(120));
        let mut prev = usize::MAX;
        for k in 1..8 {
            let idx = LocationIndex::new(&table, &rows, k);
            let n = idx.home_cell.iter().filter(|c| c.is_some()).count();
            prop_assert!(n <= prev);
            prev = n;
        }
    }

    #[test]
    fn histograms_account_for_every_sim(recs in records()) {
        let table = table_of(&recs);
        let (h, days) = activity_histograms(&table, &[1, 2, 5, 10, 20, 50], &LocalClock::new(120)).unwrap();
        prop_assert_eq!(h.sim_counts.iter().sum::<u64>(), table.sims().len() as u64);
        prop_assert_eq!(days.values().sum::<u64>(), table.sims().len() as u64);
        prop_assert!((h.activity_share.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn binning_conserves_records(recs in records(), n_days in 1usize..16) {
        let table = table_of(&recs);
        let rows = assign_locations(&table, &Calendar::new(120));
        let loc = LocationIndex::new(&table, &rows, 1);
        let start = NaiveDate::from_ymd_opt(2017, 4, 1).unwrap();
        let clock = LocalClock::new(120);
        let resolver = GroupResolver::city(&table);
        for kind in [GroupingKind::CellBased, GroupingKind::InhabitantBased, GroupingKind::WorkerBased] {
            let b = bin_activity(&table, kind, &resolver, Some(&loc), start, n_days, &clock);
            let kept: u64 = b.series.iter().map(|s| s.total()).sum();
            prop_assert_eq!(kept + b.skipped_unknown_sim + b.skipped_unresolved, table.len() as u64);
        }
    }

    #[test]
    fn smoothing_preserves_bounds(xs in prop::collection::vec(0f64..1e4, 1..300), w in 1usize..20) {
        let lo = xs.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let s = smooth(&xs, w);
        prop_assert_eq!(s.len(), xs.len());
        prop_assert!(s.iter().all(|v| *v >= lo - 1e-9 && *v <= hi + 1e-9));
    }
}
