//! Domain model and point estimators.
//!
//! Group utilities are ranking-based true positive rates,
//! `U_k = P(R = 1 | Y = 1, S = s_k)`. They cannot be observed directly when
//! labels are missing off the recommended subset, so they are recovered up to
//! a common scale from two logs: random traffic estimates
//! `p_k = P(Y = 1, S = s_k)` and default traffic estimates
//! `q_k = P(Y = 1, S = s_k | R = 1)`, giving `Û_k = Q̂_k / P̂_k`. Every
//! downstream metric (relative utilities, the fairness penalty) is invariant
//! under that common rescaling.
//!
//! Groups are addressed by zero-based index `0..k`.

use std::borrow::Borrow;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::inference::VariancePropagation;

/// Which log a row comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrafficSource {
    /// Production recommendation strategy (`D_rec`).
    Default,
    /// Uniformly random recommendations (`D_rand`).
    Random,
}

/// The six boolean engagement signals of the published log schema.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct EngagementSignals {
    pub like_video: bool,
    pub share: bool,
    pub follow: bool,
    pub finish: bool,
    pub download: bool,
    pub long_view: bool,
}

impl EngagementSignals {
    pub const NAMES: [&'static str; 6] = ["like_video", "share", "follow", "finish", "download", "long_view"];

    pub fn from_array(v: [bool; 6]) -> Self {
        EngagementSignals {
            like_video: v[0],
            share: v[1],
            follow: v[2],
            finish: v[3],
            download: v[4],
            long_view: v[5],
        }
    }

    pub fn to_array(self) -> [bool; 6] {
        [
            self.like_video,
            self.share,
            self.follow,
            self.finish,
            self.download,
            self.long_view,
        ]
    }

    /// Preference label: positive when any signal fires.
    pub fn label(self) -> bool {
        self.to_array().iter().any(|&s| s)
    }
}

/// One user-item interaction row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrafficRecord {
    pub source: TrafficSource,
    pub label: bool,
    /// Zero-based sensitive-group index.
    pub group: usize,
    pub signals: Option<EngagementSignals>,
    /// Recommendation decision, when known. Feeds exposure counters for RSP.
    pub recommended: Option<bool>,
    pub date: Option<NaiveDate>,
}

impl TrafficRecord {
    pub fn new(source: TrafficSource, label: bool, group: usize) -> Self {
        TrafficRecord {
            source,
            label,
            group,
            signals: None,
            recommended: None,
            date: None,
        }
    }

    /// Builds a record whose label is derived from raw engagement signals.
    pub fn from_signals(source: TrafficSource, signals: EngagementSignals, group: usize) -> Self {
        TrafficRecord {
            source,
            label: signals.label(),
            group,
            signals: Some(signals),
            recommended: None,
            date: None,
        }
    }

    pub fn with_date(mut self, date: NaiveDate) -> Self {
        self.date = Some(date);
        self
    }

    pub fn with_recommended(mut self, recommended: bool) -> Self {
        self.recommended = Some(recommended);
        self
    }

    /// Checks the record invariants against a declared group count.
    pub fn validate(&self, k: usize, row: u64) -> Result<()> {
        if self.group >= k {
            return Err(Error::Schema {
                row,
                message: format!("group index {} outside 0..{}", self.group, k),
            });
        }
        if let Some(signals) = self.signals {
            if signals.label() != self.label {
                return Err(Error::Schema {
                    row,
                    message: "label disagrees with the OR of engagement signals".into(),
                });
            }
        }
        Ok(())
    }
}

/// Per-group positive counts for both traffic sources, plus exposure counters.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupTally {
    pub k: usize,
    pub n_rand: u64,
    pub n_rec: u64,
    pub pos_rand: Vec<u64>,
    pub pos_rec: Vec<u64>,
    pub shown: Vec<u64>,
    pub total: Vec<u64>,
}

impl GroupTally {
    pub fn new(k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidConfig("group count K must be positive".into()));
        }
        Ok(GroupTally {
            k,
            n_rand: 0,
            n_rec: 0,
            pos_rand: vec![0; k],
            pos_rec: vec![0; k],
            shown: vec![0; k],
            total: vec![0; k],
        })
    }

    /// Builds a tally directly from counts. Exposure counters start at zero.
    pub fn from_counts(n_rand: u64, pos_rand: Vec<u64>, n_rec: u64, pos_rec: Vec<u64>) -> Result<Self> {
        let k = pos_rand.len();
        if pos_rec.len() != k {
            return Err(Error::InvalidConfig(format!(
                "positive-count vectors differ in length ({} vs {})",
                k,
                pos_rec.len()
            )));
        }
        let mut t = GroupTally::new(k)?;
        t.n_rand = n_rand;
        t.n_rec = n_rec;
        t.pos_rand = pos_rand;
        t.pos_rec = pos_rec;
        t.check()?;
        Ok(t)
    }

    fn check(&self) -> Result<()> {
        let sum_rand: u64 = self.pos_rand.iter().sum();
        let sum_rec: u64 = self.pos_rec.iter().sum();
        if sum_rand > self.n_rand || sum_rec > self.n_rec {
            return Err(Error::InvalidConfig(format!(
                "positive counts exceed traffic size (random {sum_rand}/{}, default {sum_rec}/{})",
                self.n_rand, self.n_rec
            )));
        }
        Ok(())
    }

    /// Adds one record; the caller guarantees `record.group < k`.
    pub fn push(&mut self, record: &TrafficRecord) {
        let g = record.group;
        match record.source {
            TrafficSource::Random => {
                self.n_rand += 1;
                self.pos_rand[g] += u64::from(record.label);
            }
            TrafficSource::Default => {
                self.n_rec += 1;
                self.pos_rec[g] += u64::from(record.label);
            }
        }
        if let Some(r) = record.recommended {
            self.total[g] += 1;
            self.shown[g] += u64::from(r);
        }
    }

    /// Field-wise sum. Commutative and associative.
    pub fn merge(&self, other: &GroupTally) -> Result<GroupTally> {
        if self.k != other.k {
            return Err(Error::InvalidConfig(format!(
                "cannot merge tallies with K={} and K={}",
                self.k, other.k
            )));
        }
        let add = |a: &[u64], b: &[u64]| a.iter().zip(b).map(|(x, y)| x + y).collect();
        Ok(GroupTally {
            k: self.k,
            n_rand: self.n_rand + other.n_rand,
            n_rec: self.n_rec + other.n_rec,
            pos_rand: add(&self.pos_rand, &other.pos_rand),
            pos_rec: add(&self.pos_rec, &other.pos_rec),
            shown: add(&self.shown, &other.shown),
            total: add(&self.total, &other.total),
        })
    }

    /// Default-traffic part of `self` joined with the random-traffic part of
    /// `random`. Used when several arms share one random log.
    pub fn with_random_from(&self, random: &GroupTally) -> Result<GroupTally> {
        if self.k != random.k {
            return Err(Error::InvalidConfig(format!(
                "default tally has K={} but random tally has K={}",
                self.k, random.k
            )));
        }
        let mut t = self.clone();
        t.n_rand = random.n_rand;
        t.pos_rand = random.pos_rand.clone();
        Ok(t)
    }
}

/// Single-pass aggregation of a record stream.
pub fn tally<I>(records: I, k: usize) -> Result<GroupTally>
where
    I: IntoIterator,
    I::Item: Borrow<TrafficRecord>,
{
    let mut t = GroupTally::new(k)?;
    for (row, rec) in records.into_iter().enumerate() {
        let rec = rec.borrow();
        rec.validate(k, row as u64)?;
        t.push(rec);
    }
    Ok(t)
}

/// Sample means `(P̂, Q̂)`: positive-and-in-group rates on random and default
/// traffic.
pub fn estimate_pq(t: &GroupTally) -> Result<(Vec<f64>, Vec<f64>)> {
    if t.n_rand == 0 {
        return Err(Error::InsufficientData("random traffic is empty".into()));
    }
    if t.n_rec == 0 {
        return Err(Error::InsufficientData("default traffic is empty".into()));
    }
    let p = t.pos_rand.iter().map(|&c| c as f64 / t.n_rand as f64).collect();
    let q = t.pos_rec.iter().map(|&c| c as f64 / t.n_rec as f64).collect();
    Ok((p, q))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Estimated,
    GroundTruth,
}

/// Group utilities, known up to a common positive scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UtilityVector {
    values: Vec<f64>,
    pub provenance: Provenance,
}

impl UtilityVector {
    pub fn new(values: Vec<f64>, provenance: Provenance) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidConfig("utility vector is empty".into()));
        }
        if let Some((i, v)) = values.iter().enumerate().find(|(_, v)| !v.is_finite() || **v < 0.0) {
            return Err(Error::InvalidConfig(format!(
                "utility of group {i} must be finite and non-negative, got {v}"
            )));
        }
        Ok(UtilityVector { values, provenance })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn k(&self) -> usize {
        self.values.len()
    }

    fn sum(&self) -> f64 {
        self.values.iter().sum()
    }
}

/// `Û_k = Q̂_k / P̂_k`.
pub fn estimate_utilities(p_hat: &[f64], q_hat: &[f64]) -> Result<UtilityVector> {
    if p_hat.len() != q_hat.len() {
        return Err(Error::InvalidConfig(format!(
            "P̂ has {} groups but Q̂ has {}",
            p_hat.len(),
            q_hat.len()
        )));
    }
    let mut u = Vec::with_capacity(p_hat.len());
    for (group, (&p, &q)) in p_hat.iter().zip(q_hat).enumerate() {
        if p <= 0.0 {
            return Err(Error::DegenerateGroup { group });
        }
        u.push(q / p);
    }
    UtilityVector::new(u, Provenance::Estimated)
}

/// Divisor used inside `std(U_1..U_K)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum StdDivisor {
    /// Population form, `1/K`.
    #[default]
    #[serde(rename = "K")]
    Population,
    /// Sample form, `1/(K-1)`.
    #[serde(rename = "K-1")]
    Sample,
}

impl StdDivisor {
    pub fn value(self, k: usize) -> Result<f64> {
        match self {
            StdDivisor::Population => Ok(k as f64),
            StdDivisor::Sample if k >= 2 => Ok((k - 1) as f64),
            StdDivisor::Sample => Err(Error::InvalidConfig("std divisor K-1 needs at least two groups".into())),
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            StdDivisor::Population => "K",
            StdDivisor::Sample => "K-1",
        }
    }
}

impl std::str::FromStr for StdDivisor {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "K" | "k" => Ok(StdDivisor::Population),
            "K-1" | "k-1" => Ok(StdDivisor::Sample),
            other => Err(Error::InvalidConfig(format!("unknown std divisor `{other}`"))),
        }
    }
}

/// `ΔU_k = U_k / mean(U) - 1`.
pub fn relative_utilities(u: &UtilityVector) -> Result<Vec<f64>> {
    let sum = u.sum();
    if sum <= 0.0 {
        return Err(Error::DegenerateUtilities);
    }
    let k = u.k() as f64;
    Ok(u.values.iter().map(|&x| k * x / sum - 1.0).collect())
}

/// Fairness penalty `std(U) / mean(U)` with the population divisor.
pub fn reo_penalty(u: &UtilityVector) -> Result<f64> {
    reo_penalty_with(u, StdDivisor::Population)
}

pub fn reo_penalty_with(u: &UtilityVector, divisor: StdDivisor) -> Result<f64> {
    let du = relative_utilities(u)?;
    penalty_from_relative(&du, divisor)
}

/// `sqrt(Σ ΔU_k² / d)`, which equals `std(U)/mean(U)`.
pub(crate) fn penalty_from_relative(du: &[f64], divisor: StdDivisor) -> Result<f64> {
    let d = divisor.value(du.len())?;
    Ok((du.iter().map(|x| x * x).sum::<f64>() / d).sqrt())
}

/// Closed interval `[low, high]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub low: f64,
    pub high: f64,
}

impl Interval {
    pub fn centered(center: f64, half_width: f64) -> Self {
        Interval {
            low: center - half_width,
            high: center + half_width,
        }
    }

    pub fn contains(&self, x: f64) -> bool {
        self.low <= x && x <= self.high
    }

    pub fn width(&self) -> f64 {
        self.high - self.low
    }
}

/// Point estimate with optional standard error and confidence interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricEstimate {
    pub estimate: f64,
    pub se: Option<f64>,
    pub ci: Option<Interval>,
    /// Why `se`/`ci` are absent, when they are.
    pub unavailable: Option<String>,
}

impl MetricEstimate {
    pub fn point(estimate: f64) -> Self {
        MetricEstimate {
            estimate,
            se: None,
            ci: None,
            unavailable: None,
        }
    }

    pub fn with_normal_ci(estimate: f64, se: f64, z: f64) -> Self {
        MetricEstimate {
            estimate,
            se: Some(se),
            ci: Some(Interval::centered(estimate, z * se)),
            unavailable: None,
        }
    }

    pub fn unavailable(estimate: f64, reason: impl Into<String>) -> Self {
        MetricEstimate {
            estimate,
            se: None,
            ci: None,
            unavailable: Some(reason.into()),
        }
    }

    /// CI excludes zero. `None` when no interval is available.
    pub fn significant(&self) -> Option<bool> {
        self.ci.map(|ci| !ci.contains(0.0))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FairnessMetric {
    /// Ranking-based equal opportunity.
    Reo,
    /// Ranking-based statistical parity.
    Rsp,
}

/// Note attached to every report about the std convention.
pub const STD_CONVENTION_NOTE: &str = "penalty = std/mean with the population divisor K unless stated; \
for utilities (1/2, 1) this gives 1/3 (0.4714 with K-1), so a quoted value of 2/3 for that case \
is not std/mean under either divisor and is treated as an erratum";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FairnessReport {
    pub metric: FairnessMetric,
    pub utilities: Vec<f64>,
    pub relative_utilities: Vec<MetricEstimate>,
    pub penalty: MetricEstimate,
    /// Confidence level `1 - δ` of the intervals, if any.
    pub confidence: Option<f64>,
    pub n_rand: u64,
    pub n_rec: u64,
    pub std_divisor: StdDivisor,
    pub notes: Vec<String>,
    pub diagnostics: Option<VariancePropagation>,
}

impl FairnessReport {
    pub fn relative_point_estimates(&self) -> Vec<f64> {
        self.relative_utilities.iter().map(|m| m.estimate).collect()
    }
}

/// REO point estimates (no uncertainty) from a tally.
pub fn point_report(t: &GroupTally, divisor: StdDivisor) -> Result<FairnessReport> {
    let (p, q) = estimate_pq(t)?;
    let u = estimate_utilities(&p, &q)?;
    let du = relative_utilities(&u)?;
    let penalty = penalty_from_relative(&du, divisor)?;
    Ok(FairnessReport {
        metric: FairnessMetric::Reo,
        utilities: u.values().to_vec(),
        relative_utilities: du.into_iter().map(MetricEstimate::point).collect(),
        penalty: MetricEstimate::point(penalty),
        confidence: None,
        n_rand: t.n_rand,
        n_rec: t.n_rec,
        std_divisor: divisor,
        notes: vec![STD_CONVENTION_NOTE.to_string()],
        diagnostics: None,
    })
}

/// Ranking-based statistical parity from exposure counters,
/// `U_k = shown_k / total_k`. Needs neither labels nor random traffic.
///
/// Group deviations are absolute, `U_k - mean(U)`; the penalty is the same
/// coefficient of variation as for REO.
pub fn rsp_metrics(t: &GroupTally, divisor: StdDivisor) -> Result<FairnessReport> {
    if t.total.iter().all(|&c| c == 0) {
        return Err(Error::Unsupported(
            "tally has no exposure counts; RSP needs the recommendation decision per row".into(),
        ));
    }
    let mut u = Vec::with_capacity(t.k);
    for (group, (&shown, &total)) in t.shown.iter().zip(&t.total).enumerate() {
        if total == 0 {
            return Err(Error::DegenerateGroup { group });
        }
        u.push(shown as f64 / total as f64);
    }
    let u = UtilityVector::new(u, Provenance::Estimated)?;
    let du = relative_utilities(&u)?;
    let penalty = penalty_from_relative(&du, divisor)?;
    let mean = u.sum() / u.k() as f64;
    Ok(FairnessReport {
        metric: FairnessMetric::Rsp,
        utilities: u.values().to_vec(),
        relative_utilities: u.values().iter().map(|&x| MetricEstimate::point(x - mean)).collect(),
        penalty: MetricEstimate::point(penalty),
        confidence: None,
        n_rand: t.n_rand,
        n_rec: t.n_rec,
        std_divisor: divisor,
        notes: vec![STD_CONVENTION_NOTE.to_string()],
        diagnostics: None,
    })
}

/// One delivered request in default traffic: the requesting user's group and
/// the labels of the items shown.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShownRequest {
    pub user_group: usize,
    pub labels: Vec<bool>,
}

/// User-side constrained utility: precision@`n_show` pooled per user group.
pub fn user_side_precision(requests: &[ShownRequest], n_show: usize, k: usize) -> Result<UtilityVector> {
    if n_show == 0 {
        return Err(Error::InvalidConfig("N_show must be positive".into()));
    }
    if k == 0 {
        return Err(Error::InvalidConfig("group count K must be positive".into()));
    }
    let mut hits = vec![0u64; k];
    let mut rows = vec![0u64; k];
    for (i, req) in requests.iter().enumerate() {
        if req.labels.len() != n_show {
            return Err(Error::MalformedSession {
                request: i,
                rows: req.labels.len(),
                expected: n_show,
            });
        }
        if req.user_group >= k {
            return Err(Error::Schema {
                row: i as u64,
                message: format!("user group {} outside 0..{}", req.user_group, k),
            });
        }
        hits[req.user_group] += req.labels.iter().filter(|&&y| y).count() as u64;
        rows[req.user_group] += n_show as u64;
    }
    let mut u = Vec::with_capacity(k);
    for (group, (&h, &r)) in hits.iter().zip(&rows).enumerate() {
        if r == 0 {
            return Err(Error::InsufficientData(format!("no requests from user group {group}")));
        }
        u.push(h as f64 / r as f64);
    }
    UtilityVector::new(u, Provenance::Estimated)
}
