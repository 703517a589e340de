use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use chrono::{Duration, NaiveDate};
use chrono_cdr::circadian::{write_edges_daily_csv, EdgesDailyRow, GroupingKind};
use chrono_cdr::locations::DayClass;
use chrono_cdr::mobility::{write_city_daily_csv, CityMobility};
use serde_json::{json, Value};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_chrono-cdr"))
}

fn write_config(dir: &Path, extra: Value) -> PathBuf {
    let mut cfg = json!({
        "paths.run_dir": "run",
        "synth.n_sites": 6,
        "synth.n_sims": 1500,
        "synth.days": 14,
    });
    for (k, v) in extra.as_object().unwrap() {
        cfg[k] = v.clone();
    }
    let path = dir.join("config.json");
    fs::write(&path, serde_json::to_vec_pretty(&cfg).unwrap()).unwrap();
    path
}

fn run(cmd: &str, config: &Path, extra: &[&str]) -> Output {
    bin().arg(cmd).arg("--config").arg(config).args(extra).output().unwrap()
}

fn ok(out: &Output) {
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}

const STEPS: [&str; 10] = [
    "synth", "ingest", "tessellate", "locate", "mobility", "circadian", "working-hours", "ses", "correlate", "report",
];

fn full_run(config: &Path, threads: &str) {
    for s in STEPS {
        ok(&run(s, config, &["--threads", threads]));
    }
}

fn snapshot(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.is_file())
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect();
    files.sort();
    files
}

#[test]
fn small_scenario_end_to_end_is_idempotent() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), json!({}));
    full_run(&cfg, "1");
    let run_dir = tmp.path().join("run");
    let summary: Value = serde_json::from_slice(&fs::read(run_dir.join("summary.json")).unwrap()).unwrap();
    assert!(summary["chronotype"].is_object() || summary["chronotype"].is_array());
    for name in ["edges_daily.csv", "working_hours.csv", "ses_matrix_price.csv", "correlation.json"] {
        assert!(run_dir.join(name).is_file(), "{name}");
    }
    let first = snapshot(&run_dir);
    full_run(&cfg, "1");
    assert_eq!(snapshot(&run_dir), first);
}

#[test]
fn thread_count_does_not_change_outputs() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    full_run(&write_config(a.path(), json!({})), "1");
    full_run(&write_config(b.path(), json!({})), "4");
    let (sa, sb) = (snapshot(&a.path().join("run")), snapshot(&b.path().join("run")));
    assert_eq!(sa.len(), sb.len());
    for ((na, ba), (nb, bb)) in sa.iter().zip(&sb) {
        assert_eq!(na, nb);
        // the summary embeds the effective config, whose paths differ here
        if na != "summary.json" {
            assert!(ba == bb, "{na} differs");
        }
    }
}

#[test]
fn report_before_circadian_names_the_missing_step() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), json!({}));
    let out = run("report", &cfg, &["--json-errors"]);
    assert_eq!(out.status.code(), Some(3));
    let err: Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["error"], "missing_prerequisite");
    assert_eq!(err["producer"], "circadian");
    assert_eq!(err["subcommand"], "report");
}

#[test]
fn invalid_config_exits_with_validation_code() {
    let tmp = tempfile::tempdir().unwrap();
    for bad in [
        json!({"circadian.half_fraction": 1.5}),
        json!({"circadian.smoothing_windw": 12}),
        json!({"circadian.wake_search": [700, 1100]}),
    ] {
        let cfg = write_config(tmp.path(), bad);
        let out = run("ingest", &cfg, &["--json-errors"]);
        assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
    }
}

#[test]
fn missing_input_reports_synth_as_producer() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), json!({}));
    let out = run("ingest", &cfg, &["--json-errors"]);
    assert_eq!(out.status.code(), Some(3));
    let err: Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["producer"], "synth");
}

#[test]
fn planted_anti_correlation_is_exact() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), json!({}));
    let run_dir = tmp.path().join("run");
    fs::create_dir_all(&run_dir).unwrap();
    let start = NaiveDate::from_ymd_opt(2017, 4, 1).unwrap();
    let mut edges = Vec::new();
    let mut city = Vec::new();
    for i in 0..30i64 {
        let date = start + Duration::days(i);
        let wake = 400.0 + ((i * 37) % 11) as f64 * 7.0;
        for site in ["S1", "S2"] {
            edges.push(EdgesDailyRow {
                group_kind: GroupingKind::InhabitantBased,
                group_id: site.into(),
                date,
                day_class: DayClass::Workday,
                wake_min: Some(wake),
                bed_min: Some(1300.0 - wake / 2.0),
                day_length_min: Some(900.0),
                confidence: "ok".into(),
            });
        }
        city.push(CityMobility {
            date,
            gyration_km: 3.0 * wake + 1.0,
            entropy: 10.0 - 0.01 * wake,
            sims: 100,
        });
    }
    write_edges_daily_csv(&edges, fs::File::create(run_dir.join("edges_daily.csv")).unwrap()).unwrap();
    write_city_daily_csv(&city, fs::File::create(run_dir.join("mobility_city_daily.csv")).unwrap()).unwrap();
    ok(&run("correlate", &cfg, &[]));
    let corr: Value = serde_json::from_slice(&fs::read(run_dir.join("correlation.json")).unwrap()).unwrap();
    let r = |k: &str| corr["pearson"][k]["r"].as_f64().unwrap();
    assert!((r("wake_entropy") + 1.0).abs() < 1e-9);
    assert!((r("wake_gyration") - 1.0).abs() < 1e-9);
    assert!((r("bed_entropy") - 1.0).abs() < 1e-9);
    assert_eq!(corr["pearson"]["wake_entropy"]["n"], 30);
}
