//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero when any criterion fails.

use std::collections::BTreeMap;
use std::path::Path;
use std::time::{Duration, Instant};

use rand::Rng;

use reo_cli::{run_with, ReportEnvelope};
use reo_core::inference::{
    ab_bootstrap_test, ab_delta_test, bootstrap_bias, bootstrap_report, delta_method_report, BootstrapConfig,
    BootstrapVariant,
};
use reo_core::ingest::write_log;
use reo_core::metrics::{
    point_report, reo_penalty, tally, GroupTally, Provenance, StdDivisor, TrafficRecord, TrafficSource, UtilityVector,
};
use reo_core::planner::{plan_sizes, PlanBound, PlanRequest};
use reo_core::sampling::replicate_rng;
use reo_core::synthetic::{
    boosted_stream, identifiability_pair, mse_study, population_tally, population_utilities, sample_counts,
    sample_counts_sized, simulate_records, BoostMode, BoostStrategy, LabeledPair, SimulationConfig,
};

const POP: StdDivisor = StdDivisor::Population;

type Criterion<'a> = (&'static str, Box<dyn Fn() -> Outcome + 'a>);

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn single_thread<T: Send>(f: impl FnOnce() -> T + Send) -> T {
    rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .unwrap()
        .install(f)
}

fn cli(args: &[&str]) -> (i32, Vec<u8>) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let mut argv = vec!["reo"];
    argv.extend_from_slice(args);
    let code = run_with(argv, &mut out, &mut err);
    (code, out)
}

/// Full populations of the two-group toy tables as labeled pairs.
fn toy_population(unrecommended_positive_group0: u64) -> Vec<LabeledPair> {
    let mut v = Vec::new();
    let mut add = |n: u64, recommended: bool, label: bool, group: usize| {
        v.extend((0..n).map(|_| LabeledPair {
            recommended,
            label,
            group,
        }))
    };
    add(100_000 - unrecommended_positive_group0, false, false, 0);
    add(unrecommended_positive_group0, false, true, 0);
    add(100, true, true, 0);
    add(100_000, false, false, 1);
    add(100, true, true, 1);
    v
}

fn population_records(pairs: &[LabeledPair]) -> Vec<TrafficRecord> {
    let mut out = Vec::new();
    for p in pairs {
        let r = TrafficRecord::new(TrafficSource::Random, p.label, p.group);
        if p.recommended {
            out.push(TrafficRecord {
                source: TrafficSource::Default,
                ..r.clone()
            });
        }
        out.push(r);
    }
    out
}

fn ac1(dir: &Path) -> Outcome {
    let start = Instant::now();
    let a = point_report(&population_tally(&toy_population(0), 2).unwrap(), POP).unwrap();
    let b = point_report(&population_tally(&toy_population(100), 2).unwrap(), POP).unwrap();
    let a_ok = a.utilities[0] == a.utilities[1] && a.penalty.estimate == 0.0;
    let ratio = b.utilities[0] / b.utilities[1];
    let b_ok = ratio == 0.5 && (b.penalty.estimate - 1.0 / 3.0).abs() < 1e-12;

    let path = dir.join("dataset_b.csv");
    let mut buf = Vec::new();
    write_log(&mut buf, &population_records(&toy_population(100)), false).unwrap();
    std::fs::write(&path, buf).unwrap();
    let (code, bytes) = cli(&["estimate", "--default-log", path.to_str().unwrap()]);
    let env: ReportEnvelope = serde_json::from_slice(&bytes).unwrap();
    let cli_penalty = env
        .metrics
        .iter()
        .find(|m| m.name == "penalty")
        .unwrap()
        .estimate
        .unwrap();
    let erratum = env.warnings.iter().any(|w| w.contains("2/3") && w.contains("erratum"));
    let cli_ok = code == 0 && (cli_penalty - 1.0 / 3.0).abs() < 1e-12 && erratum;
    let elapsed = start.elapsed();
    outcome(
        a_ok && b_ok && cli_ok && elapsed < Duration::from_secs(1),
        format!(
            "A: U={:?} penalty={}; B: U0/U1={ratio} penalty={:.15} (cli {:.15}, erratum noted: {erratum}); {:.0?}",
            a.utilities, a.penalty.estimate, b.penalty.estimate, cli_penalty, elapsed
        ),
    )
}

fn ac2() -> Outcome {
    let p = reo_penalty(&UtilityVector::new(vec![0.8, 1.0], Provenance::GroundTruth).unwrap()).unwrap();
    let err = (p - 1.0 / 9.0).abs();
    outcome(err <= 1e-12, format!("penalty(0.8, 1.0) = {p:.17}, |err| = {err:.1e}"))
}

fn ac3() -> Outcome {
    let start = Instant::now();
    let sizes = [1_000, 10_000, 100_000, 1_000_000];
    let (s1, s2, s3) = single_thread(|| {
        let study = |i, sizes: &[u64]| mse_study(&SimulationConfig::setting(i).unwrap(), sizes, 50, POP, 2024).unwrap();
        (study(1, &sizes), study(2, &[100_000]), study(3, &[100_000]))
    });
    let elapsed = start.elapsed();
    let slope = s1.slope.unwrap_or(f64::NAN);
    let slope_ok = (-1.15..=-0.85).contains(&slope);
    let base = &s1.rows[2];
    let larger = |s: &reo_core::synthetic::MseStudy| {
        let r = &s.rows[0];
        match (r.mse, r.mse_se, base.mse, base.mse_se) {
            (Some(m), Some(se), Some(m1), Some(se1)) => m - m1 > 2.0 * (se * se + se1 * se1).sqrt(),
            _ => false,
        }
    };
    let (l2, l3) = (larger(&s2), larger(&s3));
    outcome(
        slope_ok && l2 && l3 && elapsed < Duration::from_secs(120),
        format!(
            "slope {slope:.3}; MSE at 1e5: s1 {:.3e}, s2 {:.3e}, s3 {:.3e} (larger at 2σ: {l2}, {l3}); {:.1?} single-threaded",
            base.mse.unwrap_or(f64::NAN),
            s2.rows[0].mse.unwrap_or(f64::NAN),
            s3.rows[0].mse.unwrap_or(f64::NAN),
            elapsed
        ),
    )
}

fn ac4() -> Outcome {
    let start = Instant::now();
    let cfg = SimulationConfig::setting(1).unwrap();
    let truth = cfg.ground_truth_penalty(POP).unwrap();
    let reps = 1_000;
    let mut hit = 0;
    for r in 0..reps {
        let t = sample_counts(&cfg, 100_000, &mut replicate_rng(404, r)).unwrap();
        let rep = delta_method_report(&t, 0.95, POP).unwrap();
        hit += usize::from(rep.penalty.ci.unwrap().contains(truth));
    }
    let cov = hit as f64 / reps as f64;
    let elapsed = start.elapsed();
    outcome(
        (0.93..=0.97).contains(&cov) && elapsed < Duration::from_secs(300),
        format!("coverage {cov:.3} over {reps} replicates at n=1e5; {elapsed:.1?}"),
    )
}

/// Twenty synthetic days of 150,000 default and 150,000 random rows.
fn daily_tallies() -> Vec<GroupTally> {
    let cfg = SimulationConfig::setting(1).unwrap();
    (0..20)
        .map(|d| sample_counts(&cfg, 150_000, &mut replicate_rng(505, d)).unwrap())
        .collect()
}

fn ac5() -> Outcome {
    let mut agree = 0;
    let mut worst = 0.0f64;
    for (d, t) in daily_tallies().iter().enumerate() {
        let delta = delta_method_report(t, 0.95, POP).unwrap().penalty.ci.unwrap().width();
        let cfg = BootstrapConfig {
            replicates: 100,
            confidence: 0.95,
            variant: BootstrapVariant::Standard,
            std_divisor: POP,
            seed: 5_000 + d as u64,
        };
        let boot = bootstrap_report(t, &cfg).unwrap().penalty.ci.unwrap().width();
        let rel = (boot - delta).abs() / delta;
        worst = worst.max(rel);
        agree += usize::from(rel <= 0.2);
    }
    outcome(
        agree >= 18,
        format!("{agree}/20 days within 20% (largest relative gap {worst:.3})"),
    )
}

fn ac6() -> Outcome {
    let mut biases = Vec::new();
    for (d, t) in daily_tallies().iter().enumerate() {
        let rep = bootstrap_bias(t, 100, POP, 6_000 + d as u64).unwrap();
        biases.push(rep.penalty.unwrap_or(f64::NAN));
    }
    let max = biases.iter().fold(0.0f64, |a, b| a.max(b.abs()));
    let pos = biases.iter().filter(|b| **b > 0.0).count();
    let neg = biases.iter().filter(|b| **b < 0.0).count();
    outcome(
        biases.iter().all(|b| b.abs() < 0.03) && pos > 0 && neg > 0,
        format!(
            "max |relative bias| {:.2}%, {pos} positive / {neg} negative",
            100.0 * max
        ),
    )
}

fn ac7() -> Outcome {
    // Young adults (group 0) advantaged by a utility ratio of 1.2.
    let mut cfg = SimulationConfig::setting(1).unwrap();
    cfg.p = vec![0.05, 0.05];
    cfg.q = vec![0.12, 0.10];
    cfg.p_complement_split = vec![0.5, 0.5];
    cfg.q_complement_split = vec![0.5, 0.5];
    let reps = 50u64;
    let mut deboost_neg = 0;
    let mut boost_pos = 0;
    let mut reversed = 0;
    for r in 0..reps {
        let mut rng = replicate_rng(707, r);
        let control_rows = simulate_records(&cfg, 150_000, 150_000, &mut rng).unwrap();
        let control = tally(&control_rows, 2).unwrap();
        let arm = |s: BoostStrategy, rng: &mut reo_core::sampling::ReplicateRng| {
            let rows = simulate_records(&cfg, 0, 150_000, rng).unwrap();
            let boosted = boosted_stream(&rows, &s.group_weights(), BoostMode::WithoutReplacement, rng).unwrap();
            let t = tally(&boosted, 2).unwrap();
            ab_delta_test(&control, &t, &control, 0.95, POP).unwrap()
        };
        deboost_neg += usize::from(arm(BoostStrategy::Deboost125, &mut rng).penalty_difference.estimate < 0.0);
        boost_pos += usize::from(arm(BoostStrategy::Boost2, &mut rng).penalty_difference.estimate > 0.0);
        let ab = arm(BoostStrategy::Deboost2, &mut rng);
        let c0 = ab.control.as_ref().unwrap().relative_utilities[0].estimate;
        let t0 = ab.treatment.as_ref().unwrap().relative_utilities[0].estimate;
        reversed += usize::from(c0 > 0.0 && t0 < 0.0);
    }
    let need = (0.8 * reps as f64).ceil() as usize;
    outcome(
        deboost_neg >= need && boost_pos >= need && reversed >= need,
        format!(
            "1.25x deboost D<0 in {deboost_neg}/{reps}; 2x boost D>0 in {boost_pos}/{reps}; 2x deboost reverses group-0 advantage in {reversed}/{reps}"
        ),
    )
}

fn ac8() -> Outcome {
    let mut rng = replicate_rng(808, 0);
    let mut worst = 0.0f64;
    let mut worst_fair = 0.0f64;
    let mut ok = true;
    for _ in 0..100 {
        let k = rng.random_range(2..=6usize);
        let size = rng.random_range(k..=60);
        let mut omega: Vec<(bool, usize)> = (0..size)
            .map(|_| (rng.random_bool(0.5), rng.random_range(0..k)))
            .collect();
        for g in 0..k {
            omega.push((true, g));
        }
        let m0 = rng.random_range(1..=500u64);
        let pair = identifiability_pair(&omega, m0, k).unwrap();
        let rec = |v: &[LabeledPair]| v.iter().filter(|p| p.recommended).copied().collect::<Vec<_>>();
        let agree = rec(&pair.fair) == rec(&pair.unfair);
        let fair = point_report(&population_tally(&pair.fair, k).unwrap(), POP)
            .unwrap()
            .penalty
            .estimate;
        let unfair = point_report(&population_tally(&pair.unfair, k).unwrap(), POP)
            .unwrap()
            .penalty
            .estimate;
        let direct: Vec<f64> = population_utilities(&pair.unfair, k)
            .into_iter()
            .map(|u| u.unwrap())
            .collect();
        let direct_pen = reo_penalty(&UtilityVector::new(direct, Provenance::GroundTruth).unwrap()).unwrap();
        let alpha = m0 as f64 / omega.iter().filter(|(y, g)| *y && *g == 0).count() as f64;
        let km1 = (k - 1) as f64;
        let formula = alpha * km1.sqrt() / (1.0 + (1.0 + alpha) * km1);
        let err = (unfair - formula).abs().max((direct_pen - formula).abs());
        worst = worst.max(err);
        let fair_direct: Vec<f64> = population_utilities(&pair.fair, k)
            .into_iter()
            .map(|u| u.unwrap())
            .collect();
        let fair_exact = reo_penalty(&UtilityVector::new(fair_direct, Provenance::GroundTruth).unwrap()).unwrap();
        worst_fair = worst_fair.max(fair.abs());
        ok &= agree && fair_exact == 0.0 && fair.abs() <= 1e-12 && err <= 1e-12;
    }
    outcome(
        ok,
        format!(
            "100 constructions; fair penalty exactly 0 from population utilities, max {worst_fair:.1e} from counts; \
             max |unfair - closed form| {worst:.1e}"
        ),
    )
}

fn ac9() -> Outcome {
    let configs: Vec<(Vec<f64>, Vec<f64>)> = vec![
        (vec![0.01, 0.05], vec![0.1, 0.25]),
        (vec![0.02, 0.03, 0.05], vec![0.1, 0.12, 0.15]),
        (vec![0.01, 0.02, 0.03, 0.04, 0.05], vec![0.06, 0.1, 0.12, 0.14, 0.15]),
    ];
    let mut ok = true;
    let mut parts = Vec::new();
    for (p, q) in configs {
        let k = p.len();
        let mut cfg = SimulationConfig::setting(1).unwrap();
        cfg.k = k;
        cfg.p = p.clone();
        cfg.q = q.clone();
        cfg.p_complement_split = vec![1.0 / k as f64; k];
        cfg.q_complement_split = vec![1.0 / k as f64; k];
        let truth = cfg.ground_truth_penalty(POP).unwrap();
        for eps in [0.05, 0.1] {
            let plan = plan_sizes(
                &PlanRequest::new(k, eps, 0.05).with_rates(p.clone(), q.clone()),
                PlanBound::Uniform,
            )
            .unwrap();
            let mut good = 0;
            for r in 0..200u64 {
                let mut rng = replicate_rng(909 + k as u64, r);
                let t = sample_counts_sized(&cfg, plan.n_rand, plan.n_rec, &mut rng).unwrap();
                if let Ok(rep) = point_report(&t, POP) {
                    good += usize::from((rep.penalty.estimate - truth).abs() <= eps);
                }
            }
            ok &= good >= 190;
            parts.push(format!(
                "K={k} ε={eps}: {good}/200 (n_rec {}, n_rand {})",
                plan.n_rec, plan.n_rand
            ));
        }
    }
    outcome(ok, parts.join("; "))
}

fn ac10(dir: &Path) -> Outcome {
    let log = dir.join("sim.csv");
    let log_s = log.to_str().unwrap();
    let (code, _) = cli(&[
        "simulate",
        "--days",
        "2",
        "--default-rows",
        "20000",
        "--random-rows",
        "20000",
        "--seed",
        "3",
        "--out",
        log_s,
    ]);
    let first = std::fs::read(&log).unwrap();
    cli(&[
        "simulate",
        "--days",
        "2",
        "--default-rows",
        "20000",
        "--random-rows",
        "20000",
        "--seed",
        "3",
        "--out",
        log_s,
    ]);
    let sim_same = code == 0 && first == std::fs::read(&log).unwrap();
    let commands: Vec<Vec<&str>> = vec![
        vec![
            "estimate",
            "--default-log",
            log_s,
            "--method",
            "bca",
            "--seed",
            "9",
            "--verbose",
        ],
        vec![
            "abtest",
            "--control-log",
            log_s,
            "--treatment-log",
            log_s,
            "--method",
            "bootstrap",
            "--seed",
            "9",
        ],
        vec![
            "abtest",
            "--control-log",
            log_s,
            "--treatment-log",
            log_s,
            "--method",
            "partition",
            "--seed",
            "9",
        ],
        vec![
            "monitor",
            "--default-log",
            log_s,
            "--method",
            "bootstrap",
            "--format",
            "csv",
        ],
        vec![
            "mse-study",
            "--sizes",
            "1000,10000",
            "--replicates",
            "30",
            "--seed",
            "4",
        ],
        vec!["plan", "--k", "3", "--epsilon", "0.1"],
        vec!["demo-identifiability", "--k", "3"],
    ];
    let mut same = 0;
    for args in &commands {
        let (c1, a) = cli(args);
        let (_, b) = cli(args);
        let (_, serial) = single_thread(|| cli(args));
        let (_, wide) = rayon::ThreadPoolBuilder::new()
            .num_threads(4)
            .build()
            .unwrap()
            .install(|| cli(args));
        same += usize::from(c1 == 0 && a == b && a == serial && a == wide);
    }
    let c = GroupTally::from_counts(50_000, vec![500, 2_500], 50_000, vec![5_000, 12_500]).unwrap();
    let t = GroupTally::from_counts(50_000, vec![500, 2_500], 50_000, vec![5_200, 12_000]).unwrap();
    let cfg = BootstrapConfig {
        replicates: 300,
        confidence: 0.95,
        variant: BootstrapVariant::Bca,
        std_divisor: POP,
        seed: 10,
    };
    let lib_serial = single_thread(|| ab_bootstrap_test(&c, &t, &c, &cfg).unwrap());
    let lib_par = ab_bootstrap_test(&c, &t, &c, &cfg).unwrap();
    let bits = |r: &reo_core::inference::AbTestReport| {
        let ci = r.penalty_difference.ci.unwrap();
        [
            r.penalty_difference.se.unwrap().to_bits(),
            ci.low.to_bits(),
            ci.high.to_bits(),
        ]
    };
    let lib_same = bits(&lib_serial) == bits(&lib_par) && lib_serial == lib_par;
    outcome(
        sim_same && same == commands.len() && lib_same,
        format!(
            "simulate repeat identical: {sim_same}; {same}/{} commands byte-identical across repeats and 1/4/default threads; library bootstrap bit-exact: {lib_same}",
            commands.len()
        ),
    )
}

fn main() {
    let dir = tempfile::tempdir().unwrap();
    let criteria: Vec<Criterion> = vec![
        ("AC1 example fidelity", Box::new(|| ac1(dir.path()))),
        ("AC2 80%-rule threshold", Box::new(ac2)),
        ("AC3 MSE scaling", Box::new(ac3)),
        ("AC4 CI calibration", Box::new(ac4)),
        ("AC5 delta vs bootstrap widths", Box::new(ac5)),
        ("AC6 bootstrap bias", Box::new(ac6)),
        ("AC7 boosting directions", Box::new(ac7)),
        ("AC8 identifiability", Box::new(ac8)),
        ("AC9 planner soundness", Box::new(ac9)),
        ("AC10 determinism", Box::new(|| ac10(dir.path()))),
    ];
    let mut failed = Vec::new();
    let mut summary = BTreeMap::new();
    for (name, f) in &criteria {
        let o = f();
        println!("{} {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        summary.insert(*name, o.pass);
        if !o.pass {
            failed.push(*name);
        }
    }
    println!(
        "acceptance: {}/{} criteria passed",
        summary.values().filter(|p| **p).count(),
        summary.len()
    );
    if !failed.is_empty() {
        std::process::exit(1);
    }
}
