//! Standard errors, confidence intervals and A/B tests for REO metrics.
//!
//! Three routes are provided:
//!
//! * the delta method, which propagates the binomial variances of `P̂_k` and
//!   `Q̂_k` through `Û_k = Q̂_k / P̂_k`, then through `ΔU_k` and the penalty.
//!   It is one pass over the tallies.
//! * a partition test: each arm is split into disjoint folds, the penalty is
//!   computed per fold and the arms are compared with Welch's t.
//! * a row-level bootstrap, reporting either a normal interval from the
//!   bootstrap standard error or a BCa percentile interval.
//!
//! The metrics only depend on per-group positive counts and traffic sizes,
//! so resampling and fold splitting operate on category counts
//! (`K` positive cells plus one "everything else" cell per log). Drawing a
//! category count vector from the multinomial (bootstrap) or multivariate
//! hypergeometric (folds) law is equivalent in distribution to shuffling or
//! resampling the underlying rows.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{
    estimate_pq, estimate_utilities, penalty_from_relative, relative_utilities, FairnessMetric, FairnessReport,
    GroupTally, Interval, MetricEstimate, StdDivisor, STD_CONVENTION_NOTE,
};
use crate::sampling::{replicate_rng, resample_counts, split_folds};
use crate::stats::{
    check_confidence, mean, normal_cdf, normal_quantile, quantile_sorted, sample_std, t_upper, z_for_confidence,
};

/// Intermediate quantities of the delta-method propagation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariancePropagation {
    /// Diagonal of `Γ`, the variances of the group utility estimators.
    pub gamma: Vec<f64>,
    /// `G[j][k] = ∂ΔU_k / ∂U_j`.
    pub jacobian: Vec<Vec<f64>>,
    /// `H[j] = ∂Δ / ∂ΔU_j`; absent when the penalty is exactly zero.
    pub gradient: Option<Vec<f64>>,
    /// `Σ = Gᵀ Γ G`, covariance of the relative utilities.
    pub sigma: Vec<Vec<f64>>,
    /// `Ξ = Hᵀ Σ H`, variance of the penalty.
    pub xi: Option<f64>,
}

/// Propagates utility variances to the relative utilities and the penalty.
///
/// `relative` and `penalty` must be the point estimates matching
/// `utilities` under `divisor`.
pub fn propagate_variance(
    utilities: &[f64],
    gamma: Vec<f64>,
    relative: &[f64],
    penalty: f64,
    divisor: StdDivisor,
) -> Result<VariancePropagation> {
    let k = utilities.len();
    let kf = k as f64;
    let sum: f64 = utilities.iter().sum();
    if sum <= 0.0 {
        return Err(Error::DegenerateUtilities);
    }
    let jacobian: Vec<Vec<f64>> = (0..k)
        .map(|j| {
            (0..k)
                .map(|c| {
                    let kron = if j == c { sum } else { 0.0 };
                    kf * (kron - utilities[c]) / (sum * sum)
                })
                .collect()
        })
        .collect();
    let sigma: Vec<Vec<f64>> = (0..k)
        .map(|a| {
            (0..k)
                .map(|b| (0..k).map(|j| jacobian[j][a] * gamma[j] * jacobian[j][b]).sum())
                .collect()
        })
        .collect();
    let (gradient, xi) = if penalty > 0.0 {
        let d = divisor.value(k)?;
        let h: Vec<f64> = relative.iter().map(|x| x / (d * penalty)).collect();
        // Hᵀ Gᵀ Γ G H = Σ_j Γ_j (G H)_j², non-negative by construction.
        let xi = (0..k)
            .map(|j| {
                let gh: f64 = (0..k).map(|a| jacobian[j][a] * h[a]).sum();
                gamma[j] * gh * gh
            })
            .sum();
        (Some(h), Some(xi))
    } else {
        (None, None)
    };
    Ok(VariancePropagation {
        gamma,
        jacobian,
        gradient,
        sigma,
        xi,
    })
}

const BOUNDARY_REASON: &str = "penalty estimate is exactly 0; its gradient is undefined at this boundary";

/// Point estimates, delta-method standard errors and normal confidence
/// intervals for the relative utilities and the penalty.
pub fn delta_method_report(t: &GroupTally, confidence: f64, divisor: StdDivisor) -> Result<FairnessReport> {
    let z = z_for_confidence(confidence)?;
    let (p, q) = estimate_pq(t)?;
    let u = estimate_utilities(&p, &q)?;
    for (group, &qk) in q.iter().enumerate() {
        if qk <= 0.0 || qk >= 1.0 {
            return Err(Error::BoundaryVariance { group, rate: qk });
        }
    }
    let du = relative_utilities(&u)?;
    let penalty = penalty_from_relative(&du, divisor)?;
    let gamma: Vec<f64> = u
        .values()
        .iter()
        .zip(p.iter().zip(&q))
        .map(|(&uk, (&pk, &qk))| uk * uk * ((1.0 - qk) / qk / t.n_rec as f64 + (1.0 - pk) / pk / t.n_rand as f64))
        .collect();
    let prop = propagate_variance(u.values(), gamma, &du, penalty, divisor)?;

    let relative_utilities = du
        .iter()
        .enumerate()
        .map(|(k, &x)| MetricEstimate::with_normal_ci(x, prop.sigma[k][k].sqrt(), z))
        .collect();
    let mut notes = vec![STD_CONVENTION_NOTE.to_string()];
    let penalty_est = match prop.xi {
        Some(xi) => MetricEstimate::with_normal_ci(penalty, xi.sqrt(), z),
        None => {
            notes.push(BOUNDARY_REASON.to_string());
            MetricEstimate::unavailable(penalty, BOUNDARY_REASON)
        }
    };
    Ok(FairnessReport {
        metric: FairnessMetric::Reo,
        utilities: u.values().to_vec(),
        relative_utilities,
        penalty: penalty_est,
        confidence: Some(confidence),
        n_rand: t.n_rand,
        n_rec: t.n_rec,
        std_divisor: divisor,
        notes,
        diagnostics: Some(prop),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestMethod {
    DeltaMethod,
    Partition,
    Bootstrap,
    BcaBootstrap,
}

/// Treatment-minus-control differences with uncertainty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AbTestReport {
    pub method: TestMethod,
    pub confidence: f64,
    /// `D_k = ΔU_k(treatment) - ΔU_k(control)`.
    pub relative_differences: Vec<MetricEstimate>,
    /// `D_REO = Δ(treatment) - Δ(control)`.
    pub penalty_difference: MetricEstimate,
    /// Size of the shared random traffic; the arms are treated as
    /// independent, which is only accurate when this is large.
    pub n_rand: u64,
    pub n_rec_control: u64,
    pub n_rec_treatment: u64,
    pub std_divisor: StdDivisor,
    /// Welch degrees of freedom of the penalty difference (partition test).
    pub degrees_of_freedom: Option<u64>,
    /// Valid and discarded bootstrap replicates (bootstrap tests).
    pub replicates: Option<usize>,
    pub discarded_replicates: usize,
    /// Set for constructions beyond the normal-theory intervals (BCa).
    pub extended_method: bool,
    pub control: Option<FairnessReport>,
    pub treatment: Option<FairnessReport>,
    pub notes: Vec<String>,
}

impl AbTestReport {
    pub fn penalty_significant(&self) -> Option<bool> {
        self.penalty_difference.significant()
    }
}

fn difference(c: &MetricEstimate, t: &MetricEstimate, z: f64) -> MetricEstimate {
    let d = t.estimate - c.estimate;
    match (c.se, t.se) {
        (Some(sc), Some(st)) => MetricEstimate::with_normal_ci(d, (st * st + sc * sc).sqrt(), z),
        _ => MetricEstimate::unavailable(
            d,
            c.unavailable
                .clone()
                .or_else(|| t.unavailable.clone())
                .unwrap_or_else(|| "arm standard error unavailable".into()),
        ),
    }
}

/// Combines two delta-method arm reports into an A/B report, treating the
/// arms as independent.
pub fn combine_delta_reports(control: FairnessReport, treatment: FairnessReport) -> Result<AbTestReport> {
    if control.utilities.len() != treatment.utilities.len() {
        return Err(Error::InvalidConfig("arms have different group counts".into()));
    }
    let confidence = control
        .confidence
        .ok_or_else(|| Error::InvalidConfig("control report carries no confidence level".into()))?;
    if treatment.confidence != Some(confidence) {
        return Err(Error::InvalidConfig("arms use different confidence levels".into()));
    }
    if control.std_divisor != treatment.std_divisor {
        return Err(Error::InvalidConfig("arms use different std divisors".into()));
    }
    let z = z_for_confidence(confidence)?;
    let relative_differences = control
        .relative_utilities
        .iter()
        .zip(&treatment.relative_utilities)
        .map(|(c, t)| difference(c, t, z))
        .collect();
    let penalty_difference = difference(&control.penalty, &treatment.penalty, z);
    Ok(AbTestReport {
        method: TestMethod::DeltaMethod,
        confidence,
        relative_differences,
        penalty_difference,
        n_rand: control.n_rand.max(treatment.n_rand),
        n_rec_control: control.n_rec,
        n_rec_treatment: treatment.n_rec,
        std_divisor: control.std_divisor,
        degrees_of_freedom: None,
        replicates: None,
        discarded_replicates: 0,
        extended_method: false,
        control: Some(control),
        treatment: Some(treatment),
        notes: vec![
            STD_CONVENTION_NOTE.to_string(),
            "arms share random traffic; their correlation is ignored".to_string(),
        ],
    })
}

/// Delta-method A/B test. `control` and `treatment` supply default traffic;
/// `random` supplies the random traffic shared by both arms.
pub fn ab_delta_test(
    control: &GroupTally,
    treatment: &GroupTally,
    random: &GroupTally,
    confidence: f64,
    divisor: StdDivisor,
) -> Result<AbTestReport> {
    let c = control
        .with_random_from(random)
        .and_then(|t| delta_method_report(&t, confidence, divisor))
        .map_err(|e| e.in_arm("control"))?;
    let t = treatment
        .with_random_from(random)
        .and_then(|t| delta_method_report(&t, confidence, divisor))
        .map_err(|e| e.in_arm("treatment"))?;
    combine_delta_reports(c, t)
}

/// Category counts of a log: `K` positive cells then the remainder.
pub(crate) fn cells(pos: &[u64], n: u64) -> Vec<u64> {
    let mut v = pos.to_vec();
    v.push(n - pos.iter().sum::<u64>());
    v
}

/// `(penalty, ΔU)` from random and default category counts; `None` when the
/// metric is undefined.
pub(crate) fn metrics_from_cells(rand: &[u64], rec: &[u64], divisor: StdDivisor) -> Option<(f64, Vec<f64>)> {
    let k = rand.len() - 1;
    let n_rand: u64 = rand.iter().sum();
    let n_rec: u64 = rec.iter().sum();
    if n_rand == 0 || n_rec == 0 {
        return None;
    }
    let mut u = Vec::with_capacity(k);
    for g in 0..k {
        if rand[g] == 0 {
            return None;
        }
        let p = rand[g] as f64 / n_rand as f64;
        let q = rec[g] as f64 / n_rec as f64;
        u.push(q / p);
    }
    let sum: f64 = u.iter().sum();
    if sum <= 0.0 {
        return None;
    }
    let du: Vec<f64> = u.iter().map(|x| k as f64 * x / sum - 1.0).collect();
    let pen = penalty_from_relative(&du, divisor).ok()?;
    Some((pen, du))
}

/// Settings for [`ab_partition_test`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PartitionConfig {
    pub folds_control: usize,
    pub folds_treatment: usize,
    pub confidence: f64,
    pub std_divisor: StdDivisor,
    pub seed: u64,
}

struct ArmFolds {
    penalties: Vec<f64>,
    relative: Vec<Vec<f64>>,
}

fn fold_metrics(
    arm: &str,
    arm_index: u64,
    rec: &[u64],
    rand: &[u64],
    folds: usize,
    cfg: &PartitionConfig,
) -> Result<ArmFolds> {
    let mut rng_rec = replicate_rng(cfg.seed, 2 * arm_index);
    let mut rng_rand = replicate_rng(cfg.seed, 2 * arm_index + 1);
    let rec_folds = split_folds(&mut rng_rec, rec, folds);
    let rand_folds = split_folds(&mut rng_rand, rand, folds);
    let k = rand.len() - 1;
    let mut penalties = Vec::with_capacity(folds);
    let mut relative = Vec::with_capacity(folds);
    for (fold, (r, d)) in rand_folds.iter().zip(&rec_folds).enumerate() {
        if let Some(group) = (0..k).find(|&g| r[g] == 0) {
            return Err(Error::FoldDegenerate {
                arm: arm.to_string(),
                fold,
                group,
            });
        }
        let (pen, du) = metrics_from_cells(r, d, cfg.std_divisor)
            .ok_or_else(|| Error::DegenerateUtilities.in_arm(&format!("{arm} fold {fold}")))?;
        penalties.push(pen);
        relative.push(du);
    }
    Ok(ArmFolds { penalties, relative })
}

/// Welch statistic pieces for one metric.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WelchDifference {
    pub difference: f64,
    pub se: f64,
    /// `None` when both arms have zero spread.
    pub dof: Option<u64>,
}

/// Welch two-sample difference `mean(t) - mean(c)` with Satterthwaite
/// degrees of freedom floored to an integer.
pub fn welch_difference(control: &[f64], treatment: &[f64]) -> WelchDifference {
    let (mc, mt) = (control.len() as f64, treatment.len() as f64);
    let (sc, st) = (sample_std(control), sample_std(treatment));
    let vc = sc * sc / mc;
    let vt = st * st / mt;
    let var = vt + vc;
    let dof = if var > 0.0 {
        let denom = vt * vt / (mt - 1.0) + vc * vc / (mc - 1.0);
        Some((var * var / denom).floor() as u64)
    } else {
        None
    };
    WelchDifference {
        difference: mean(treatment) - mean(control),
        se: var.sqrt(),
        dof,
    }
}

fn welch_estimate(w: WelchDifference, confidence: f64) -> Result<MetricEstimate> {
    match w.dof {
        Some(dof) => {
            let t = t_upper(dof as f64, (1.0 - confidence) / 2.0)?;
            Ok(MetricEstimate::with_normal_ci(w.difference, w.se, t))
        }
        None => Ok(MetricEstimate {
            estimate: w.difference,
            se: Some(0.0),
            ci: Some(Interval::centered(w.difference, 0.0)),
            unavailable: None,
        }),
    }
}

/// Partition-based Welch test of the penalty difference (and of each `D_k`).
///
/// Each arm's default traffic and the shared random traffic are split into
/// that arm's number of disjoint equal-size folds (remainders dropped), the
/// random traffic independently per arm.
pub fn ab_partition_test(
    control: &GroupTally,
    treatment: &GroupTally,
    random: &GroupTally,
    cfg: &PartitionConfig,
) -> Result<AbTestReport> {
    check_confidence(cfg.confidence)?;
    if cfg.folds_control < 2 || cfg.folds_treatment < 2 {
        return Err(Error::InvalidConfig(
            "partition test needs at least two folds per arm".into(),
        ));
    }
    if control.k != random.k || treatment.k != random.k {
        return Err(Error::InvalidConfig(
            "arms and random traffic differ in group count".into(),
        ));
    }
    let rand = cells(&random.pos_rand, random.n_rand);
    let c = fold_metrics(
        "control",
        0,
        &cells(&control.pos_rec, control.n_rec),
        &rand,
        cfg.folds_control,
        cfg,
    )?;
    let t = fold_metrics(
        "treatment",
        1,
        &cells(&treatment.pos_rec, treatment.n_rec),
        &rand,
        cfg.folds_treatment,
        cfg,
    )?;
    let penalty_w = welch_difference(&c.penalties, &t.penalties);
    let penalty_difference = welch_estimate(penalty_w, cfg.confidence)?;
    let relative_differences = (0..random.k)
        .map(|g| {
            let cg: Vec<f64> = c.relative.iter().map(|v| v[g]).collect();
            let tg: Vec<f64> = t.relative.iter().map(|v| v[g]).collect();
            welch_estimate(welch_difference(&cg, &tg), cfg.confidence)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(AbTestReport {
        method: TestMethod::Partition,
        confidence: cfg.confidence,
        relative_differences,
        penalty_difference,
        n_rand: random.n_rand,
        n_rec_control: control.n_rec,
        n_rec_treatment: treatment.n_rec,
        std_divisor: cfg.std_divisor,
        degrees_of_freedom: penalty_w.dof,
        replicates: None,
        discarded_replicates: 0,
        extended_method: false,
        control: None,
        treatment: None,
        notes: vec![
            STD_CONVENTION_NOTE.to_string(),
            format!(
                "folds: control {}, treatment {}; random traffic split independently per arm",
                cfg.folds_control, cfg.folds_treatment
            ),
        ],
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BootstrapVariant {
    Standard,
    Bca,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BootstrapConfig {
    pub replicates: usize,
    pub confidence: f64,
    pub variant: BootstrapVariant,
    pub std_divisor: StdDivisor,
    pub seed: u64,
}

type Statistic<'a> = dyn Fn(&[Vec<u64>]) -> Option<Vec<f64>> + Sync + 'a;

struct BootstrapRun {
    point: Vec<f64>,
    /// Valid replicates in replicate-index order.
    replicates: Vec<Vec<f64>>,
    discarded: usize,
}

/// Resamples every sample independently with replacement, `b` times.
/// Replicates are evaluated in parallel and collected by index.
fn run_bootstrap(samples: &[Vec<u64>], stat: &Statistic<'_>, b: usize, seed: u64) -> Result<BootstrapRun> {
    if b < 2 {
        return Err(Error::InvalidConfig("bootstrap size must be at least 2".into()));
    }
    let point =
        stat(samples).ok_or_else(|| Error::InsufficientData("metric is undefined on the original data".into()))?;
    let results: Vec<Option<Vec<f64>>> = (0..b)
        .into_par_iter()
        .map(|i| {
            let mut rng = replicate_rng(seed, i as u64);
            let resampled: Vec<Vec<u64>> = samples.iter().map(|s| resample_counts(&mut rng, s)).collect();
            stat(&resampled)
        })
        .collect();
    let discarded = results.iter().filter(|r| r.is_none()).count();
    if discarded * 10 > b {
        return Err(Error::UnstableBootstrap { discarded, total: b });
    }
    let replicates: Vec<Vec<f64>> = results.into_iter().flatten().collect();
    if replicates.len() < 2 {
        return Err(Error::UnstableBootstrap { discarded, total: b });
    }
    Ok(BootstrapRun {
        point,
        replicates,
        discarded,
    })
}

fn component(run: &BootstrapRun, i: usize) -> Vec<f64> {
    run.replicates.iter().map(|r| r[i]).collect()
}

/// BCa acceleration from leave-one-row-out jackknife values over several
/// independent samples. Rows in the same category give identical values, so
/// each category is evaluated once and weighted by its count.
fn jackknife_acceleration(samples: &[Vec<u64>], stat: &Statistic<'_>, dims: usize) -> Option<Vec<f64>> {
    let mut num = vec![0.0; dims];
    let mut den = vec![0.0; dims];
    for (s, counts) in samples.iter().enumerate() {
        let n: u64 = counts.iter().sum();
        if n < 2 {
            return None;
        }
        let mut loo: Vec<(u64, Vec<f64>)> = Vec::new();
        for (c, &m) in counts.iter().enumerate() {
            if m == 0 {
                continue;
            }
            let mut reduced = samples.to_vec();
            reduced[s][c] -= 1;
            loo.push((m, stat(&reduced)?));
        }
        let nf = n as f64;
        for d in 0..dims {
            let bar = loo.iter().map(|(m, v)| *m as f64 * v[d]).sum::<f64>() / nf;
            for (m, v) in &loo {
                let infl = (nf - 1.0) * (bar - v[d]);
                num[d] += *m as f64 * infl.powi(3) / nf.powi(3);
                den[d] += *m as f64 * infl.powi(2) / nf.powi(2);
            }
        }
    }
    Some(
        num.iter()
            .zip(&den)
            .map(|(n, d)| if *d > 0.0 { n / (6.0 * d.powf(1.5)) } else { 0.0 })
            .collect(),
    )
}

fn bca_interval(point: f64, reps: &[f64], accel: f64, confidence: f64) -> Interval {
    let b = reps.len() as f64;
    let less = reps.iter().filter(|&&x| x < point).count() as f64;
    let equal = reps.iter().filter(|&&x| x == point).count() as f64;
    let frac = ((less + 0.5 * equal) / b).clamp(0.5 / b, 1.0 - 0.5 / b);
    let z0 = normal_quantile(frac);
    let alpha = (1.0 - confidence) / 2.0;
    let adjust = |zq: f64| {
        let s = z0 + zq;
        normal_cdf(z0 + s / (1.0 - accel * s))
    };
    let lo = adjust(normal_quantile(alpha));
    let hi = adjust(normal_quantile(1.0 - alpha));
    let mut sorted = reps.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    Interval {
        low: quantile_sorted(&sorted, lo),
        high: quantile_sorted(&sorted, hi),
    }
}

/// Turns a bootstrap run into one estimate per statistic component.
fn summarize(
    run: &BootstrapRun,
    accel: Option<&[f64]>,
    variant: BootstrapVariant,
    confidence: f64,
) -> Result<Vec<MetricEstimate>> {
    let z = z_for_confidence(confidence)?;
    (0..run.point.len())
        .map(|i| {
            let reps = component(run, i);
            let se = sample_std(&reps);
            let point = run.point[i];
            Ok(match variant {
                BootstrapVariant::Standard => MetricEstimate::with_normal_ci(point, se, z),
                BootstrapVariant::Bca => MetricEstimate {
                    estimate: point,
                    se: Some(se),
                    ci: Some(bca_interval(point, &reps, accel.map_or(0.0, |a| a[i]), confidence)),
                    unavailable: None,
                },
            })
        })
        .collect()
}

const BCA_NOTE: &str = "BCa interval: bias correction from the bootstrap distribution, \
acceleration from the leave-one-row-out jackknife (extended method)";

fn acceleration_for(
    samples: &[Vec<u64>],
    stat: &Statistic<'_>,
    dims: usize,
    variant: BootstrapVariant,
    notes: &mut Vec<String>,
) -> Option<Vec<f64>> {
    if variant != BootstrapVariant::Bca {
        return None;
    }
    notes.push(BCA_NOTE.to_string());
    let accel = jackknife_acceleration(samples, stat, dims);
    if accel.is_none() {
        notes.push("jackknife undefined for some left-out row; acceleration set to 0".to_string());
    }
    accel
}

/// Bootstrap A/B test. The three logs (shared random traffic, control and
/// treatment default traffic) are resampled independently at row level.
pub fn ab_bootstrap_test(
    control: &GroupTally,
    treatment: &GroupTally,
    random: &GroupTally,
    cfg: &BootstrapConfig,
) -> Result<AbTestReport> {
    check_confidence(cfg.confidence)?;
    if control.k != random.k || treatment.k != random.k {
        return Err(Error::InvalidConfig(
            "arms and random traffic differ in group count".into(),
        ));
    }
    let k = random.k;
    let samples = vec![
        cells(&random.pos_rand, random.n_rand),
        cells(&control.pos_rec, control.n_rec),
        cells(&treatment.pos_rec, treatment.n_rec),
    ];
    let divisor = cfg.std_divisor;
    let stat = move |s: &[Vec<u64>]| -> Option<Vec<f64>> {
        let (pc, dc) = metrics_from_cells(&s[0], &s[1], divisor)?;
        let (pt, dt) = metrics_from_cells(&s[0], &s[2], divisor)?;
        let mut out = Vec::with_capacity(k + 1);
        out.push(pt - pc);
        out.extend(dt.iter().zip(&dc).map(|(t, c)| t - c));
        Some(out)
    };
    let run = run_bootstrap(&samples, &stat, cfg.replicates, cfg.seed)?;
    let mut notes = vec![STD_CONVENTION_NOTE.to_string()];
    let accel = acceleration_for(&samples, &stat, k + 1, cfg.variant, &mut notes);
    let mut est = summarize(&run, accel.as_deref(), cfg.variant, cfg.confidence)?;
    let penalty_difference = est.remove(0);
    Ok(AbTestReport {
        method: match cfg.variant {
            BootstrapVariant::Standard => TestMethod::Bootstrap,
            BootstrapVariant::Bca => TestMethod::BcaBootstrap,
        },
        confidence: cfg.confidence,
        relative_differences: est,
        penalty_difference,
        n_rand: random.n_rand,
        n_rec_control: control.n_rec,
        n_rec_treatment: treatment.n_rec,
        std_divisor: divisor,
        degrees_of_freedom: None,
        replicates: Some(run.replicates.len()),
        discarded_replicates: run.discarded,
        extended_method: cfg.variant == BootstrapVariant::Bca,
        control: None,
        treatment: None,
        notes,
    })
}

fn single_arm_statistic(divisor: StdDivisor) -> impl Fn(&[Vec<u64>]) -> Option<Vec<f64>> + Sync {
    move |s: &[Vec<u64>]| {
        let (pen, du) = metrics_from_cells(&s[0], &s[1], divisor)?;
        let mut out = Vec::with_capacity(du.len() + 1);
        out.push(pen);
        out.extend(du);
        Some(out)
    }
}

fn single_arm_samples(t: &GroupTally) -> Vec<Vec<u64>> {
    vec![cells(&t.pos_rand, t.n_rand), cells(&t.pos_rec, t.n_rec)]
}

/// Bootstrap standard errors and intervals for one strategy's metrics.
pub fn bootstrap_report(t: &GroupTally, cfg: &BootstrapConfig) -> Result<FairnessReport> {
    check_confidence(cfg.confidence)?;
    let samples = single_arm_samples(t);
    let stat = single_arm_statistic(cfg.std_divisor);
    let run = run_bootstrap(&samples, &stat, cfg.replicates, cfg.seed)?;
    let mut notes = vec![STD_CONVENTION_NOTE.to_string()];
    let accel = acceleration_for(&samples, &stat, t.k + 1, cfg.variant, &mut notes);
    let mut est = summarize(&run, accel.as_deref(), cfg.variant, cfg.confidence)?;
    let penalty = est.remove(0);
    if run.discarded > 0 {
        notes.push(format!("{} degenerate replicates discarded", run.discarded));
    }
    let (p, q) = estimate_pq(t)?;
    let u = estimate_utilities(&p, &q)?;
    Ok(FairnessReport {
        metric: FairnessMetric::Reo,
        utilities: u.values().to_vec(),
        relative_utilities: est,
        penalty,
        confidence: Some(cfg.confidence),
        n_rand: t.n_rand,
        n_rec: t.n_rec,
        std_divisor: cfg.std_divisor,
        notes,
        diagnostics: None,
    })
}

/// Relative bias `(mean of bootstrap replicates - point) / point` per metric.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiasReport {
    pub point_penalty: f64,
    pub bootstrap_mean_penalty: f64,
    /// `None` when the point estimate is zero but the bootstrap mean is not.
    pub penalty: Option<f64>,
    pub relative_utilities: Vec<Option<f64>>,
    pub replicates: usize,
    pub discarded: usize,
}

fn relative_bias(point: f64, boot_mean: f64) -> Option<f64> {
    if boot_mean == point {
        Some(0.0)
    } else if point == 0.0 {
        None
    } else {
        Some((boot_mean - point) / point)
    }
}

pub fn bootstrap_bias(t: &GroupTally, replicates: usize, divisor: StdDivisor, seed: u64) -> Result<BiasReport> {
    let samples = single_arm_samples(t);
    let stat = single_arm_statistic(divisor);
    let run = run_bootstrap(&samples, &stat, replicates, seed)?;
    let means: Vec<f64> = (0..run.point.len()).map(|i| mean(&component(&run, i))).collect();
    Ok(BiasReport {
        point_penalty: run.point[0],
        bootstrap_mean_penalty: means[0],
        penalty: relative_bias(run.point[0], means[0]),
        relative_utilities: (1..run.point.len())
            .map(|i| relative_bias(run.point[i], means[i]))
            .collect(),
        replicates: run.replicates.len(),
        discarded: run.discarded,
    })
}
