//! Ranking-based equal opportunity (REO) fairness for recommender systems.
//!
//! Group utilities are estimated from a small random-traffic log and the
//! regular default-traffic log; [`metrics`] turns them into relative
//! utilities and the fairness penalty, [`inference`] attaches confidence
//! intervals and A/B tests, [`synthetic`] and [`planner`] support
//! simulation and sizing, and [`ingest`] reads logs.

pub mod error;
pub mod inference;
pub mod ingest;
pub mod metrics;
pub mod planner;
pub mod sampling;
pub mod stats;
pub mod synthetic;

pub use error::{Error, Result};
pub use metrics::{
    point_report, relative_utilities, reo_penalty, reo_penalty_with, tally, FairnessReport, GroupTally, MetricEstimate,
    StdDivisor, TrafficRecord, TrafficSource, UtilityVector,
};
