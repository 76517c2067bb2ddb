//! Machine-readable report wrapper shared by every subcommand.

use std::io::Write;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use reo_core::inference::AbTestReport;
use reo_core::metrics::{FairnessReport, MetricEstimate};

/// One estimated quantity. Numbers are finite or `null`; a `null` estimate
/// or interval comes with a `reason`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricBlock {
    pub name: String,
    pub method: String,
    pub estimate: Option<f64>,
    pub se: Option<f64>,
    pub ci_low: Option<f64>,
    pub ci_high: Option<f64>,
    pub significant: Option<bool>,
    pub reason: Option<String>,
}

fn finite(x: f64) -> Option<f64> {
    x.is_finite().then_some(x)
}

impl MetricBlock {
    pub fn point(name: impl Into<String>, method: &str, value: f64) -> Self {
        MetricBlock {
            name: name.into(),
            method: method.to_string(),
            estimate: finite(value),
            se: None,
            ci_low: None,
            ci_high: None,
            significant: None,
            reason: (!value.is_finite()).then(|| "value is not finite".to_string()),
        }
    }

    pub fn from_estimate(name: impl Into<String>, method: &str, m: &MetricEstimate) -> Self {
        let estimate = finite(m.estimate);
        let reason = m
            .unavailable
            .clone()
            .or_else(|| estimate.is_none().then(|| "estimate is not finite".to_string()));
        MetricBlock {
            name: name.into(),
            method: method.to_string(),
            estimate,
            se: m.se.and_then(finite),
            ci_low: m.ci.and_then(|c| finite(c.low)),
            ci_high: m.ci.and_then(|c| finite(c.high)),
            significant: m.significant(),
            reason,
        }
    }
}

/// A plot-ready table; cells are JSON scalars.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Value>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportEnvelope {
    pub command: String,
    pub toolkit_version: String,
    pub seed: u64,
    pub std_divisor: String,
    /// Echo of the parsed flags.
    pub config: Value,
    pub metrics: Vec<MetricBlock>,
    pub table: Option<Table>,
    pub warnings: Vec<String>,
    /// Full library report, with variance diagnostics, under `--verbose`.
    pub details: Option<Value>,
}

impl ReportEnvelope {
    pub fn new(command: &str, seed: u64, std_divisor: &str, config: Value) -> Self {
        ReportEnvelope {
            command: command.to_string(),
            toolkit_version: env!("CARGO_PKG_VERSION").to_string(),
            seed,
            std_divisor: std_divisor.to_string(),
            config,
            metrics: Vec::new(),
            table: None,
            warnings: Vec::new(),
            details: None,
        }
    }

    pub fn add_fairness(&mut self, report: &FairnessReport, method: &str) {
        for (g, u) in report.utilities.iter().enumerate() {
            self.metrics
                .push(MetricBlock::point(format!("utility[{g}]"), "point", *u));
        }
        for (g, m) in report.relative_utilities.iter().enumerate() {
            self.metrics
                .push(MetricBlock::from_estimate(format!("relative_utility[{g}]"), method, m));
        }
        self.metrics
            .push(MetricBlock::from_estimate("penalty", method, &report.penalty));
        self.warnings.extend(report.notes.iter().cloned());
    }

    pub fn add_ab(&mut self, report: &AbTestReport, method: &str) {
        self.metrics.push(MetricBlock::from_estimate(
            "penalty_difference",
            method,
            &report.penalty_difference,
        ));
        for (g, m) in report.relative_differences.iter().enumerate() {
            self.metrics.push(MetricBlock::from_estimate(
                format!("relative_difference[{g}]"),
                method,
                m,
            ));
        }
        self.warnings.extend(report.notes.iter().cloned());
    }

    pub fn to_json(&self) -> serde_json::Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    /// Writes the table when there is one, the metric blocks otherwise.
    pub fn write_csv<W: Write>(&self, w: W) -> csv::Result<()> {
        let mut out = csv::Writer::from_writer(w);
        match &self.table {
            Some(t) => {
                out.write_record(&t.columns)?;
                for row in &t.rows {
                    out.write_record(row.iter().map(cell))?;
                }
            }
            None => {
                out.write_record([
                    "name",
                    "method",
                    "estimate",
                    "se",
                    "ci_low",
                    "ci_high",
                    "significant",
                    "reason",
                ])?;
                for m in &self.metrics {
                    let num = |x: Option<f64>| x.map(|v| v.to_string()).unwrap_or_default();
                    out.write_record([
                        m.name.clone(),
                        m.method.clone(),
                        num(m.estimate),
                        num(m.se),
                        num(m.ci_low),
                        num(m.ci_high),
                        m.significant.map(|b| b.to_string()).unwrap_or_default(),
                        m.reason.clone().unwrap_or_default(),
                    ])?;
                }
            }
        }
        out.flush()?;
        Ok(())
    }
}

fn cell(v: &Value) -> String {
    match v {
        Value::Null => String::new(),
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

/// JSON number for finite values, `null` otherwise.
pub fn num(x: f64) -> Value {
    finite(x).map_or(Value::Null, Value::from)
}
