//! Traffic sizes for a target accuracy `ε` at failure probability `δ`.
//!
//! The uniform bound controls every relative utility and the penalty at
//! once through a control parameter
//! `n = ⌈4K² / (‖U‖₁² ε²) · ln(K/δ)⌉` and sizes
//! `|D_rec| = ⌈n · max_k U_k² (1 - q_k) / q_k⌉`,
//! `|D_rand| = ⌈n · max_k U_k² (1 - p_k) / p_k⌉`.
//! Both are invariant under a common rescaling of `U`.
//!
//! The per-group bound only makes each `P̂_k`, `Q̂_k` `ε`-close in relative
//! error: `⌈3 ε⁻² ln(2/δ) / p_k⌉` random rows and likewise with `q_k`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanRequest {
    pub k: usize,
    pub epsilon: f64,
    pub delta: f64,
    pub pilot_p: Option<Vec<f64>>,
    pub pilot_q: Option<Vec<f64>>,
    /// Pilot utilities; derived as `q/p` when absent and both rates are given.
    pub pilot_u: Option<Vec<f64>>,
}

impl PlanRequest {
    pub fn new(k: usize, epsilon: f64, delta: f64) -> Self {
        PlanRequest {
            k,
            epsilon,
            delta,
            pilot_p: None,
            pilot_q: None,
            pilot_u: None,
        }
    }

    pub fn with_rates(mut self, p: Vec<f64>, q: Vec<f64>) -> Self {
        self.pilot_p = Some(p);
        self.pilot_q = Some(q);
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlanBound {
    #[default]
    Uniform,
    PerGroup,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Plan {
    pub bound: PlanBound,
    /// Control parameter; absent for the per-group bound.
    pub n: Option<u64>,
    pub n_rec: u64,
    pub n_rand: u64,
    pub p: Vec<f64>,
    pub q: Vec<f64>,
    pub u: Vec<f64>,
    /// Some pilot value was replaced by its conservative default.
    pub conservative: bool,
}

const DEFAULT_RATE: f64 = 0.5;

fn check_vec(v: &[f64], k: usize, name: &str, open_unit: bool) -> Result<()> {
    if v.len() != k {
        return Err(Error::InvalidPilot(format!(
            "{name} has {} entries, expected K={k}",
            v.len()
        )));
    }
    for (i, &x) in v.iter().enumerate() {
        let ok = if open_unit {
            x > 0.0 && x < 1.0
        } else {
            x.is_finite() && x > 0.0
        };
        if !ok {
            let range = if open_unit { "(0, 1)" } else { "(0, inf)" };
            return Err(Error::InvalidPilot(format!("{name}[{i}] = {x} is outside {range}")));
        }
    }
    Ok(())
}

fn ceil_u64(x: f64) -> Result<u64> {
    if !x.is_finite() || x > u64::MAX as f64 {
        return Err(Error::InvalidConfig(format!(
            "planned size {x} does not fit in 64 bits"
        )));
    }
    Ok(x.ceil() as u64)
}

pub fn plan_sizes(req: &PlanRequest, bound: PlanBound) -> Result<Plan> {
    let k = req.k;
    if k == 0 {
        return Err(Error::InvalidConfig("K must be positive".into()));
    }
    if !(req.epsilon > 0.0 && req.epsilon.is_finite()) {
        return Err(Error::InvalidConfig(format!(
            "epsilon must be positive, got {}",
            req.epsilon
        )));
    }
    if !(req.delta > 0.0 && req.delta < 1.0) {
        return Err(Error::InvalidConfig(format!(
            "delta must lie in (0, 1), got {}",
            req.delta
        )));
    }
    let mut conservative = false;
    let mut rate = |v: &Option<Vec<f64>>, name: &str| -> Result<Vec<f64>> {
        match v {
            Some(v) => check_vec(v, k, name, true).map(|_| v.clone()),
            None => {
                conservative = true;
                Ok(vec![DEFAULT_RATE; k])
            }
        }
    };
    let p = rate(&req.pilot_p, "p")?;
    let q = rate(&req.pilot_q, "q")?;
    let u = match (&req.pilot_u, &req.pilot_p, &req.pilot_q) {
        (Some(u), _, _) => {
            check_vec(u, k, "U", false)?;
            u.clone()
        }
        (None, Some(_), Some(_)) => q.iter().zip(&p).map(|(q, p)| q / p).collect(),
        _ => {
            conservative = true;
            vec![1.0; k]
        }
    };
    let eps2 = req.epsilon * req.epsilon;
    match bound {
        PlanBound::Uniform => {
            let l1: f64 = u.iter().sum();
            let kf = k as f64;
            let n = ceil_u64(4.0 * kf * kf / (l1 * l1 * eps2) * (kf / req.delta).ln())?;
            let worst = |r: &[f64]| {
                u.iter()
                    .zip(r)
                    .map(|(u, r)| u * u * (1.0 - r) / r)
                    .fold(0.0f64, f64::max)
            };
            Ok(Plan {
                bound,
                n: Some(n),
                n_rec: ceil_u64(n as f64 * worst(&q))?,
                n_rand: ceil_u64(n as f64 * worst(&p))?,
                p,
                q,
                u,
                conservative,
            })
        }
        PlanBound::PerGroup => {
            let c = 3.0 / eps2 * (2.0 / req.delta).ln();
            let min = |r: &[f64]| r.iter().copied().fold(f64::INFINITY, f64::min);
            Ok(Plan {
                bound,
                n: None,
                n_rec: ceil_u64(c / min(&q))?,
                n_rand: ceil_u64(c / min(&p))?,
                p,
                q,
                u,
                conservative,
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn uniform(req: &PlanRequest) -> Plan {
        plan_sizes(req, PlanBound::Uniform).unwrap()
    }

    #[test]
    fn two_groups_unit_utilities() {
        let plan = uniform(&PlanRequest::new(2, 0.1, 0.05));
        assert_eq!(plan.n, Some(1476));
        assert!(plan.conservative);
        assert_eq!(plan.n_rec, 1476);
        assert_eq!(plan.n_rand, 1476);
    }

    #[test]
    fn halving_epsilon_quadruples_before_rounding() {
        let a = uniform(&PlanRequest::new(3, 0.2, 0.05)).n.unwrap();
        let b = uniform(&PlanRequest::new(3, 0.1, 0.05)).n.unwrap();
        assert!(b >= 4 * a - 4 && b <= 4 * a);
    }

    #[test]
    fn derived_utilities_are_scale_free() {
        let req = PlanRequest::new(2, 0.1, 0.05).with_rates(vec![0.01, 0.05], vec![0.1, 0.25]);
        let plan = uniform(&req);
        assert!(!plan.conservative);
        assert!((plan.u[0] - 10.0).abs() < 1e-12 && (plan.u[1] - 5.0).abs() < 1e-12);
        let mut scaled = req.clone();
        scaled.pilot_u = Some(vec![1.0, 0.5]);
        let b = uniform(&scaled);
        let rel = (plan.n_rec as f64 - b.n_rec as f64).abs() / b.n_rec as f64;
        assert!(rel < 1.0 / (plan.n.unwrap() - 1) as f64, "{rel}");
    }

    #[test]
    fn invalid_pilot() {
        let req = PlanRequest::new(2, 0.1, 0.05).with_rates(vec![0.0, 0.5], vec![0.5, 0.5]);
        assert!(matches!(
            plan_sizes(&req, PlanBound::Uniform),
            Err(Error::InvalidPilot(_))
        ));
        let req = PlanRequest::new(2, 0.1, 0.05).with_rates(vec![0.5], vec![0.5, 0.5]);
        assert!(plan_sizes(&req, PlanBound::Uniform).is_err());
    }

    #[test]
    fn invalid_targets() {
        assert!(plan_sizes(&PlanRequest::new(2, 0.0, 0.05), PlanBound::Uniform).is_err());
        assert!(plan_sizes(&PlanRequest::new(2, 0.1, 1.0), PlanBound::Uniform).is_err());
        assert!(plan_sizes(&PlanRequest::new(0, 0.1, 0.05), PlanBound::Uniform).is_err());
    }

    #[test]
    fn per_group_bound() {
        let req = PlanRequest::new(2, 0.1, 0.05).with_rates(vec![0.01, 0.05], vec![0.1, 0.25]);
        let plan = plan_sizes(&req, PlanBound::PerGroup).unwrap();
        let c = 300.0 * 40f64.ln();
        assert_eq!(plan.n_rand, (c / 0.01).ceil() as u64);
        assert_eq!(plan.n_rec, (c / 0.1).ceil() as u64);
    }
}
