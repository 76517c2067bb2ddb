//! Synthetic traffic with known ground truth.
//!
//! Random traffic rows fall into one of `2K` cells with probabilities
//! `(p_1..p_K, p̃_1..p̃_K)`, where `p_k = P(Y=1, S=s_k)` and the negative
//! cells split the remaining mass with configurable weights. Default traffic
//! does the same with `q_k = P(Y=1, S=s_k | R=1)`. Ground-truth utilities are
//! `q_k / p_k`, correct up to the unobservable `P(R=1)`.

use std::collections::BTreeMap;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{
    point_report, reo_penalty_with, EngagementSignals, GroupTally, Provenance, StdDivisor, TrafficRecord,
    TrafficSource, UtilityVector,
};
use crate::sampling::{check_probabilities, multinomial, replicate_rng};
use crate::stats::{mean, ols_slope, sample_std};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationConfig {
    pub k: usize,
    /// `P(Y=1, S=s_k)` on random traffic.
    pub p: Vec<f64>,
    /// `P(Y=1, S=s_k | R=1)` on default traffic.
    pub q: Vec<f64>,
    /// Weights splitting `1 - Σp` over the negative cells `p̃_k`.
    pub p_complement_split: Vec<f64>,
    pub q_complement_split: Vec<f64>,
    /// Rows per traffic source.
    pub n: u64,
    pub replications: usize,
    pub seed: u64,
    /// Per-group weights for boosted default traffic, keyed by group index.
    pub boost_weights: Option<BTreeMap<usize, f64>>,
    /// Probability that a request is served by random traffic.
    pub p_act: f64,
}

impl SimulationConfig {
    /// The three two-group settings of the synthetic study: `p = (1, 5)·10^-m`
    /// for `m = 2, 3, 4`, with `q_1 = 10 p_1`, `q_2 = 5 p_2` and the negative
    /// mass split 1:3.
    pub fn setting(index: u8) -> Result<Self> {
        let scale = match index {
            1 => 0.01,
            2 => 0.001,
            3 => 0.0001,
            _ => {
                return Err(Error::InvalidConfig(format!(
                    "unknown synthetic setting {index}; use 1, 2 or 3"
                )))
            }
        };
        let p = vec![scale, 5.0 * scale];
        let q = vec![10.0 * p[0], 5.0 * p[1]];
        Ok(SimulationConfig {
            k: 2,
            p,
            q,
            p_complement_split: vec![0.25, 0.75],
            q_complement_split: vec![0.25, 0.75],
            n: 100_000,
            replications: 50,
            seed: 0,
            boost_weights: None,
            p_act: 0.5,
        })
    }

    fn full(marginal: &[f64], split: &[f64]) -> Vec<f64> {
        let rest = 1.0 - marginal.iter().sum::<f64>();
        marginal.iter().copied().chain(split.iter().map(|w| w * rest)).collect()
    }

    /// Cell probabilities of random traffic, positives first.
    pub fn random_probs(&self) -> Vec<f64> {
        Self::full(&self.p, &self.p_complement_split)
    }

    pub fn default_probs(&self) -> Vec<f64> {
        Self::full(&self.q, &self.q_complement_split)
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::InvalidConfig("K must be positive".into()));
        }
        for (name, v) in [
            ("p", &self.p),
            ("q", &self.q),
            ("p complement split", &self.p_complement_split),
            ("q complement split", &self.q_complement_split),
        ] {
            if v.len() != self.k {
                return Err(Error::InvalidConfig(format!(
                    "{name} has {} entries, expected K={}",
                    v.len(),
                    self.k
                )));
            }
        }
        check_probabilities(&self.p_complement_split, "p complement split")?;
        check_probabilities(&self.q_complement_split, "q complement split")?;
        check_probabilities(&self.random_probs(), "random-traffic cells")?;
        check_probabilities(&self.default_probs(), "default-traffic cells")?;
        if !(self.p_act > 0.0 && self.p_act < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "p_act must lie in (0, 1), got {}",
                self.p_act
            )));
        }
        if let Some(w) = &self.boost_weights {
            check_weights(w)?;
        }
        Ok(())
    }

    /// `U_k = q_k / p_k`, up to the common factor `P(R=1)`.
    pub fn ground_truth_utilities(&self) -> Result<UtilityVector> {
        let mut u = Vec::with_capacity(self.k);
        for (group, (&p, &q)) in self.p.iter().zip(&self.q).enumerate() {
            if p <= 0.0 {
                return Err(Error::DegenerateGroup { group });
            }
            u.push(q / p);
        }
        UtilityVector::new(u, Provenance::GroundTruth)
    }

    pub fn ground_truth_penalty(&self, divisor: StdDivisor) -> Result<f64> {
        reo_penalty_with(&self.ground_truth_utilities()?, divisor)
    }
}

fn check_weights(w: &BTreeMap<usize, f64>) -> Result<()> {
    if let Some((g, x)) = w.iter().find(|(_, x)| !(x.is_finite() && **x > 0.0)) {
        return Err(Error::InvalidConfig(format!(
            "boost weight for group {g} must be positive, got {x}"
        )));
    }
    Ok(())
}

fn split_cells(k: usize, cells: &[u64]) -> (Vec<u64>, u64) {
    (cells[..k].to_vec(), cells.iter().sum())
}

/// Draws random and default traffic of `n` rows each.
pub fn sample_counts<R: Rng + ?Sized>(cfg: &SimulationConfig, n: u64, rng: &mut R) -> Result<GroupTally> {
    sample_counts_sized(cfg, n, n, rng)
}

/// Like [`sample_counts`] with separate random and default sizes.
pub fn sample_counts_sized<R: Rng + ?Sized>(
    cfg: &SimulationConfig,
    n_rand: u64,
    n_rec: u64,
    rng: &mut R,
) -> Result<GroupTally> {
    cfg.validate()?;
    let rand_cells = multinomial(rng, n_rand, &cfg.random_probs());
    let rec_cells = multinomial(rng, n_rec, &cfg.default_probs());
    let (pos_rand, n_rand) = split_cells(cfg.k, &rand_cells);
    let (pos_rec, n_rec) = split_cells(cfg.k, &rec_cells);
    GroupTally::from_counts(n_rand, pos_rand, n_rec, pos_rec)
}

/// Row-level synthetic log: `n_rand` random and `n_rec` default rows in
/// shuffled order. Positive rows carry one randomly chosen engagement signal.
pub fn simulate_records<R: Rng + ?Sized>(
    cfg: &SimulationConfig,
    n_rand: u64,
    n_rec: u64,
    rng: &mut R,
) -> Result<Vec<TrafficRecord>> {
    cfg.validate()?;
    let k = cfg.k;
    let mut out = Vec::with_capacity((n_rand + n_rec) as usize);
    for (source, n, probs) in [
        (TrafficSource::Random, n_rand, cfg.random_probs()),
        (TrafficSource::Default, n_rec, cfg.default_probs()),
    ] {
        let cells = multinomial(rng, n, &probs);
        for (cell, &count) in cells.iter().enumerate() {
            let (label, group) = if cell < k { (true, cell) } else { (false, cell - k) };
            for _ in 0..count {
                let signals = if label {
                    let mut s = [false; 6];
                    s[rng.random_range(0..6)] = true;
                    EngagementSignals::from_array(s)
                } else {
                    EngagementSignals::default()
                };
                out.push(TrafficRecord::from_signals(source, signals, group));
            }
        }
    }
    out.shuffle(rng);
    Ok(out)
}

/// Splits `total_rows` requests between random and default traffic with the
/// activation probability `p_act`, then simulates rows.
pub fn simulate_activated<R: Rng + ?Sized>(
    cfg: &SimulationConfig,
    total_rows: u64,
    rng: &mut R,
) -> Result<Vec<TrafficRecord>> {
    cfg.validate()?;
    let n_rand = multinomial(rng, total_rows, &[cfg.p_act, 1.0 - cfg.p_act])[0];
    simulate_records(cfg, n_rand, total_rows - n_rand, rng)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MseRow {
    pub n: u64,
    /// Mean squared error over successful replicates.
    pub mse: Option<f64>,
    /// Standard error of `mse`.
    pub mse_se: Option<f64>,
    /// Replicates where some `P̂_k` was zero.
    pub failures: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MseStudy {
    pub ground_truth_penalty: f64,
    pub replicates: usize,
    pub rows: Vec<MseRow>,
    /// Least-squares slope of `log10 MSE` on `log10 n`.
    pub slope: Option<f64>,
}

/// Monte Carlo mean squared error of the penalty estimator per traffic size.
pub fn mse_study(
    cfg: &SimulationConfig,
    sizes: &[u64],
    reps: usize,
    divisor: StdDivisor,
    seed: u64,
) -> Result<MseStudy> {
    cfg.validate()?;
    if reps == 0 {
        return Err(Error::InvalidConfig("replicate count must be positive".into()));
    }
    let truth = cfg.ground_truth_penalty(divisor)?;
    let mut rows = Vec::with_capacity(sizes.len());
    for (i, &n) in sizes.iter().enumerate() {
        if n == 0 {
            return Err(Error::InvalidConfig("traffic sizes must be positive".into()));
        }
        let errs: Vec<Option<f64>> = (0..reps)
            .into_par_iter()
            .map(|r| {
                let mut rng = replicate_rng(seed, ((i as u64) << 32) | r as u64);
                let t = sample_counts(cfg, n, &mut rng).ok()?;
                let est = point_report(&t, divisor).ok()?.penalty.estimate;
                Some((est - truth) * (est - truth))
            })
            .collect();
        let failures = errs.iter().filter(|e| e.is_none()).count();
        let sq: Vec<f64> = errs.into_iter().flatten().collect();
        let (mse, mse_se) = if sq.is_empty() {
            (None, None)
        } else {
            (Some(mean(&sq)), Some(sample_std(&sq) / (sq.len() as f64).sqrt()))
        };
        rows.push(MseRow {
            n,
            mse,
            mse_se,
            failures,
        });
    }
    let (lx, ly): (Vec<f64>, Vec<f64>) = rows
        .iter()
        .filter_map(|r| r.mse.filter(|m| *m > 0.0).map(|m| ((r.n as f64).log10(), m.log10())))
        .unzip();
    Ok(MseStudy {
        ground_truth_penalty: truth,
        replicates: reps,
        rows,
        slope: ols_slope(&lx, &ly),
    })
}

/// How boosted default traffic is drawn from a finite log.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoostMode {
    /// Keep each default row independently with probability `w[S] / max w`.
    #[default]
    WithoutReplacement,
    /// Draw as many rows as the input has, with replacement, with
    /// probability proportional to `w[S]`.
    WithReplacement,
}

/// Named boosting strategies over the young-adult attribute
/// (group 0 = young adult, group 1 = others).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoostStrategy {
    /// Others weighted 1.25, young adults 1.
    Deboost125,
    /// Others weighted 2, young adults 1.
    Deboost2,
    /// Others weighted 1, young adults 2.
    Boost2,
}

impl BoostStrategy {
    /// Weights keyed by the young-adult attribute value.
    pub fn attribute_weights(self) -> (f64, f64) {
        match self {
            BoostStrategy::Deboost125 => (1.25, 1.0),
            BoostStrategy::Deboost2 => (2.0, 1.0),
            BoostStrategy::Boost2 => (1.0, 2.0),
        }
    }

    /// Weights keyed by group index.
    pub fn group_weights(self) -> BTreeMap<usize, f64> {
        let (w_others, w_young) = self.attribute_weights();
        BTreeMap::from([(0, w_young), (1, w_others)])
    }
}

/// Re-weights default traffic by group; random traffic passes through.
pub fn boosted_stream<R: Rng + ?Sized>(
    records: &[TrafficRecord],
    weights: &BTreeMap<usize, f64>,
    mode: BoostMode,
    rng: &mut R,
) -> Result<Vec<TrafficRecord>> {
    check_weights(weights)?;
    let weight_of = |r: &TrafficRecord| {
        weights
            .get(&r.group)
            .copied()
            .ok_or_else(|| Error::InvalidConfig(format!("no boost weight for group {}", r.group)))
    };
    match mode {
        BoostMode::WithoutReplacement => {
            let max = weights.values().fold(0.0f64, |a, &b| a.max(b));
            let mut out = Vec::with_capacity(records.len());
            for r in records {
                match r.source {
                    TrafficSource::Random => out.push(r.clone()),
                    TrafficSource::Default => {
                        let keep = weight_of(r)? / max;
                        if keep >= 1.0 || rng.random::<f64>() < keep {
                            out.push(r.clone());
                        }
                    }
                }
            }
            Ok(out)
        }
        BoostMode::WithReplacement => {
            let (random, default): (Vec<&TrafficRecord>, Vec<&TrafficRecord>) =
                records.iter().partition(|r| r.source == TrafficSource::Random);
            let mut out: Vec<TrafficRecord> = random.into_iter().cloned().collect();
            if default.is_empty() {
                return Ok(out);
            }
            let w = default.iter().map(|r| weight_of(r)).collect::<Result<Vec<_>>>()?;
            let index = WeightedIndex::new(&w).map_err(|e| Error::InvalidConfig(format!("boost weights: {e}")))?;
            out.extend((0..default.len()).map(|_| default[index.sample(rng)].clone()));
            Ok(out)
        }
    }
}

/// One row of a fully enumerated population.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledPair {
    pub recommended: bool,
    pub label: bool,
    pub group: usize,
}

/// `U_k = P(R=1 | Y=1, S=s_k)` computed directly on a full population;
/// `None` for groups without positive pairs.
pub fn population_utilities(pairs: &[LabeledPair], k: usize) -> Vec<Option<f64>> {
    let mut hit = vec![0u64; k];
    let mut pos = vec![0u64; k];
    for p in pairs.iter().filter(|p| p.label) {
        pos[p.group] += 1;
        hit[p.group] += u64::from(p.recommended);
    }
    hit.iter()
        .zip(&pos)
        .map(|(&h, &n)| (n > 0).then(|| h as f64 / n as f64))
        .collect()
}

/// Encodes a full population as traffic: every pair as a random-traffic row
/// and every recommended pair as a default-traffic row.
pub fn population_tally(pairs: &[LabeledPair], k: usize) -> Result<GroupTally> {
    let mut t = GroupTally::new(k)?;
    for (row, p) in pairs.iter().enumerate() {
        if p.group >= k {
            return Err(Error::Schema {
                row: row as u64,
                message: format!("group index {} outside 0..{}", p.group, k),
            });
        }
        let rec = TrafficRecord::new(TrafficSource::Random, p.label, p.group);
        t.push(&rec);
        if p.recommended {
            t.push(&TrafficRecord {
                source: TrafficSource::Default,
                ..rec
            });
        }
    }
    Ok(t)
}

/// A perfectly fair and an unfair population sharing one recommended subset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdentifiabilityPair {
    pub k: usize,
    pub fair: Vec<LabeledPair>,
    pub unfair: Vec<LabeledPair>,
    /// Unrecommended-to-recommended positive ratio of group 0 in `unfair`.
    pub alpha: f64,
    pub fair_penalty: f64,
    /// `α √(K-1) / (1 + (1 + α)(K - 1))` under the population divisor.
    pub unfair_penalty: f64,
}

pub const NONTRIVIAL_DEFINITION: &str =
    "a recommended subset is nontrivial when it contains at least one pair with a positive preference label";

/// Builds two populations that agree on the recommended subset `omega1`
/// (pairs `(label, group)`) and each add `m0` unrecommended pairs of group 0:
/// all negative in the fair population, all positive in the unfair one.
pub fn identifiability_pair(omega1: &[(bool, usize)], m0: u64, k: usize) -> Result<IdentifiabilityPair> {
    if k < 2 {
        return Err(Error::Precondition(
            "at least two groups are needed for an unfair population".into(),
        ));
    }
    if m0 == 0 {
        return Err(Error::Precondition("m0 must be at least 1".into()));
    }
    if let Some(&(_, g)) = omega1.iter().find(|(_, g)| *g >= k) {
        return Err(Error::Precondition(format!("group index {g} outside 0..{k}")));
    }
    if !omega1.iter().any(|(y, _)| *y) {
        return Err(Error::Precondition(format!(
            "recommended subset is trivial: {NONTRIVIAL_DEFINITION}"
        )));
    }
    let mut positives = vec![0u64; k];
    for &(y, g) in omega1 {
        positives[g] += u64::from(y);
    }
    if let Some(g) = positives.iter().position(|&c| c == 0) {
        return Err(Error::Precondition(format!(
            "group {g} has no positive recommended pair, so its utility is undefined in every admissible population"
        )));
    }
    let recommended: Vec<LabeledPair> = omega1
        .iter()
        .map(|&(label, group)| LabeledPair {
            recommended: true,
            label,
            group,
        })
        .collect();
    let extend = |label: bool| {
        let mut v = recommended.clone();
        v.extend((0..m0).map(|_| LabeledPair {
            recommended: false,
            label,
            group: 0,
        }));
        v
    };
    let alpha = m0 as f64 / positives[0] as f64;
    let km1 = (k - 1) as f64;
    Ok(IdentifiabilityPair {
        k,
        fair: extend(false),
        unfair: extend(true),
        alpha,
        fair_penalty: 0.0,
        unfair_penalty: alpha * km1.sqrt() / (1.0 + (1.0 + alpha) * km1),
    })
}
