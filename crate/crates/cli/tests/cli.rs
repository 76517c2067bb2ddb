use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use reo_cli::{run_with, ReportEnvelope};
use reo_core::ingest::write_log;
use reo_core::metrics::{TrafficRecord, TrafficSource};

fn run(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let mut argv = vec!["reo"];
    argv.extend_from_slice(args);
    let code = run_with(argv, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

fn rows(source: TrafficSource, group: usize, positives: usize, total: usize) -> Vec<TrafficRecord> {
    (0..total)
        .map(|i| TrafficRecord::new(source, i < positives, group))
        .collect()
}

fn write(path: &Path, records: &[TrafficRecord], with_date: bool) {
    let mut buf = Vec::new();
    write_log(&mut buf, records, with_date).unwrap();
    std::fs::write(path, buf).unwrap();
}

/// Unequal-utility toy population: young adults have half the utility.
fn dataset_b(dir: &Path) -> PathBuf {
    let mut recs = Vec::new();
    recs.extend(rows(TrafficSource::Random, 0, 200, 100_100));
    recs.extend(rows(TrafficSource::Random, 1, 100, 100_100));
    recs.extend(rows(TrafficSource::Default, 0, 100, 100));
    recs.extend(rows(TrafficSource::Default, 1, 100, 100));
    let path = dir.join("b.csv");
    write(&path, &recs, false);
    path
}

fn metric(env: &ReportEnvelope, name: &str) -> f64 {
    env.metrics.iter().find(|m| m.name == name).unwrap().estimate.unwrap()
}

#[test]
fn estimate_reports_one_third_with_convention_note() {
    let dir = tempfile::tempdir().unwrap();
    let b = dataset_b(dir.path());
    let (code, out, _) = run(&["estimate", "--default-log", b.to_str().unwrap()]);
    assert_eq!(code, 0);
    let env: ReportEnvelope = serde_json::from_str(&out).unwrap();
    assert!((metric(&env, "penalty") - 1.0 / 3.0).abs() < 1e-12);
    assert_eq!(metric(&env, "utility[0]") / metric(&env, "utility[1]"), 0.5);
    assert!(env.warnings.iter().any(|w| w.contains("erratum")));
    assert_eq!(env.std_divisor, "K");
}

#[test]
fn k_minus_one_divisor_is_labelled() {
    let dir = tempfile::tempdir().unwrap();
    let b = dataset_b(dir.path());
    let (code, out, _) = run(&["estimate", "--default-log", b.to_str().unwrap(), "--std-divisor", "K-1"]);
    assert_eq!(code, 0);
    let env: ReportEnvelope = serde_json::from_str(&out).unwrap();
    assert_eq!(env.std_divisor, "K-1");
    assert!((metric(&env, "penalty") - (2.0f64).sqrt() / 3.0).abs() < 1e-12);
}

#[test]
fn monitor_flags_only_the_spike_day() {
    let dir = tempfile::tempdir().unwrap();
    let start = NaiveDate::from_ymd_opt(2024, 3, 1).unwrap();
    let spike = 9;
    let mut default = Vec::new();
    for d in 0..14 {
        let g0 = if d == spike { 1_000 } else { 1_900 + 10 * d };
        for (group, pos) in [(0, g0), (1, 2_000)] {
            default.extend(
                rows(TrafficSource::Default, group, pos, 10_000)
                    .into_iter()
                    .map(|mut r| {
                        r.date = Some(start + chrono::Days::new(d as u64));
                        r
                    }),
            );
        }
    }
    let mut random = rows(TrafficSource::Random, 0, 1_000, 20_000);
    random.extend(rows(TrafficSource::Random, 1, 1_000, 20_000));
    let dpath = dir.path().join("default.csv");
    let rpath = dir.path().join("random.csv");
    write(&dpath, &default, true);
    write(&rpath, &random, false);

    let (code, out, err) = run(&[
        "monitor",
        "--default-log",
        dpath.to_str().unwrap(),
        "--random-log",
        rpath.to_str().unwrap(),
    ]);
    assert_eq!(code, 0, "{err}");
    let env: ReportEnvelope = serde_json::from_str(&out).unwrap();
    let table = env.table.unwrap();
    assert_eq!(table.rows.len(), 14);
    let col = |name| table.columns.iter().position(|c| c == name).unwrap();
    let flagged: Vec<&str> = table
        .rows
        .iter()
        .filter(|r| r[col("above_threshold")].as_bool().unwrap())
        .map(|r| r[col("date")].as_str().unwrap())
        .collect();
    assert_eq!(flagged, ["2024-03-10"]);
    let spike_row = &table.rows[spike];
    assert!((spike_row[col("penalty")].as_f64().unwrap() - 1.0 / 3.0).abs() < 1e-12);
    assert_eq!(spike_row[col("n_rand")].as_u64(), Some(40_000));
}

#[test]
fn abtest_of_identical_arms_is_null() {
    let dir = tempfile::tempdir().unwrap();
    let b = dataset_b(dir.path());
    let b = b.to_str().unwrap();
    for method in ["delta", "partition", "bootstrap"] {
        let (code, out, err) = run(&["abtest", "--control-log", b, "--treatment-log", b, "--method", method]);
        assert_eq!(code, 0, "{method}: {err}");
        let env: ReportEnvelope = serde_json::from_str(&out).unwrap();
        let d = env.metrics.iter().find(|m| m.name == "penalty_difference").unwrap();
        // Fold means differ slightly from the pooled point estimate.
        let tol = if method == "partition" { 0.05 } else { 0.0 };
        assert!(d.estimate.unwrap().abs() <= tol, "{method}: {:?}", d.estimate);
        assert_ne!(d.significant, Some(true), "{method}");
    }
}

#[test]
fn exit_codes_distinguish_config_and_data_errors() {
    let dir = tempfile::tempdir().unwrap();
    let b = dataset_b(dir.path());
    let missing = dir.path().join("absent.csv");
    assert_eq!(run(&["estimate", "--default-log", b.to_str().unwrap()]).0, 0);
    let (code, _, err) = run(&["estimate", "--default-log", missing.to_str().unwrap()]);
    assert_eq!(code, 1);
    assert!(err.starts_with("error["));
    assert_eq!(
        run(&["estimate", "--default-log", b.to_str().unwrap(), "--confidence", "1.5"]).0,
        2
    );
    assert_eq!(
        run(&["plan", "--k", "2", "--epsilon", "0.1", "--pilot-p", "0.2,1.5"]).0,
        2
    );
    assert_eq!(run(&["no-such-command"]).0, 2);
    assert_eq!(run(&["--help"]).0, 0);
}

#[test]
fn envelope_round_trips_losslessly() {
    let (code, out, _) = run(&["mse-study", "--sizes", "1000,5000", "--replicates", "10", "--seed", "2"]);
    assert_eq!(code, 0);
    let env: ReportEnvelope = serde_json::from_str(&out).unwrap();
    assert_eq!(env.to_json().unwrap(), out);
    assert_eq!(env.command, "mse-study");
    assert_eq!(env.seed, 2);
    assert_eq!(env.config["command"]["replicates"], 10);
    assert!(env.metrics.iter().all(|m| m.estimate.is_some() || m.reason.is_some()));
}

#[test]
fn csv_output_lists_metrics() {
    let dir = tempfile::tempdir().unwrap();
    let b = dataset_b(dir.path());
    let (code, out, _) = run(&["estimate", "--default-log", b.to_str().unwrap(), "--format", "csv"]);
    assert_eq!(code, 0);
    let mut reader = csv::Reader::from_reader(out.as_bytes());
    assert_eq!(reader.headers().unwrap().get(0), Some("name"));
    let names: Vec<String> = reader.records().map(|r| r.unwrap()[0].to_string()).collect();
    assert!(names.contains(&"penalty".to_string()));
}

#[test]
fn simulate_writes_a_readable_log() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sim.csv");
    let (code, _, err) = run(&[
        "simulate",
        "--days",
        "3",
        "--default-rows",
        "2000",
        "--random-rows",
        "2000",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code, 0, "{err}");
    let (code, json, _) = run(&["monitor", "--default-log", out.to_str().unwrap()]);
    assert_eq!(code, 0);
    let env: ReportEnvelope = serde_json::from_str(&json).unwrap();
    assert_eq!(env.table.unwrap().rows.len(), 3);
}

#[test]
fn plan_matches_closed_form() {
    let (code, out, _) = run(&["plan", "--k", "2", "--epsilon", "0.1"]);
    assert_eq!(code, 0);
    let env: ReportEnvelope = serde_json::from_str(&out).unwrap();
    let n = (4.0 * 4.0 / (4.0 * 0.01) * (2.0f64 / 0.05).ln()).ceil();
    assert_eq!(metric(&env, "n"), n);
}
