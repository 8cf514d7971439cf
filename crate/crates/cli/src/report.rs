use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::Value;

pub const WALL_TIME_FIELD: &str = "wall_time_s";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Residuals {
    pub left: f64,
    pub right: f64,
    pub b_norm_upper: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsReport {
    pub strategy: String,
    pub a_norm_upper: f64,
    pub a_norm_lower: f64,
    pub trunc: usize,
    pub seed_residual: Option<f64>,
    pub seed_span: Option<usize>,
    pub p_support: usize,
    pub q_support: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial: usize,
    pub pass: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub expected: Option<Vec<i64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub observed: Option<Vec<i64>>,
    pub metrics: BTreeMap<String, f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
    /// Serialized failing instance, for replay.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub instance: Option<Value>,
}

impl TrialRecord {
    pub fn new(trial: usize) -> Self {
        Self {
            trial,
            pass: false,
            expected: None,
            observed: None,
            metrics: BTreeMap::new(),
            note: None,
            instance: None,
        }
    }

    pub fn metric(&mut self, name: &str, value: f64) {
        self.metrics.insert(name.to_string(), value);
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignSummary {
    pub campaign: String,
    pub trials: usize,
    pub passed: usize,
    pub failed: usize,
}

/// Machine-readable result; field order is fixed by declaration order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub kind: String,
    pub inputs: Value,
    pub seed: Option<u64>,
    pub status: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k_class: Option<Vec<i64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub oracle_class: Option<Vec<i64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub oracle_agrees: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub residuals: Option<Residuals>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub diagnostics: Option<DiagnosticsReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub summary: Option<CampaignSummary>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub records: Vec<TrialRecord>,
    pub wall_time_s: f64,
}

impl Report {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("reports serialize");
        s.push('\n');
        s
    }
}

/// Report text with the wall-time value blanked, for determinism and
/// golden comparisons.
pub fn strip_wall_time(text: &str) -> String {
    text.lines()
        .map(|line| {
            let trimmed = line.trim_start();
            if trimmed.starts_with(&format!("\"{WALL_TIME_FIELD}\"")) {
                let indent = &line[..line.len() - trimmed.len()];
                format!("{indent}\"{WALL_TIME_FIELD}\": null")
            } else {
                line.to_string()
            }
        })
        .collect::<Vec<_>>()
        .join("\n")
}
