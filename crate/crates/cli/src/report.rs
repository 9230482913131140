//! Machine-readable run reports.
//!
//! Every command prints exactly one JSON report on stdout; human diagnostics
//! go to stderr. The report round-trips losslessly through serde and is
//! re-parsed and compared before printing as a schema self-check.

use serde::{Deserialize, Serialize};

use relucheck_core::{RunStats, Verdict};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportStats {
    pub lp_calls: u64,
    pub tasks_explored: u64,
    pub max_depth: u64,
    pub avg_depth: f64,
    pub wall_time: f64,
}

impl From<&RunStats> for ReportStats {
    fn from(s: &RunStats) -> Self {
        Self {
            lp_calls: s.lp_calls,
            tasks_explored: s.tasks_explored,
            max_depth: s.max_depth,
            avg_depth: s.avg_depth,
            wall_time: s.wall_time,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportWidths {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub nia: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sia: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub slr: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigEcho {
    pub network: String,
    pub property: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub timeout: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub threads: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_depth: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub normalized: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mode: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub oracle_limit: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub command: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub verdict: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub outputs: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stats: Option<ReportStats>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub widths: Option<ReportWidths>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub improvement_pct: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub exact_range: Option<Vec<[f64; 2]>>,
    pub config: ConfigEcho,
    pub started_at: String,
    pub finished_at: String,
}

pub fn verdict_name(v: &Verdict) -> &'static str {
    match v {
        Verdict::Safe => "safe",
        Verdict::Violated { .. } => "violated",
        Verdict::Timeout => "timeout",
        Verdict::SolverFailure => "solver_failure",
    }
}

/// Exit-code contract: 0 safe, 1 violated, 2 timeout, 3 solver failure.
pub fn verdict_exit_code(v: &Verdict) -> u8 {
    match v {
        Verdict::Safe => 0,
        Verdict::Violated { .. } => 1,
        Verdict::Timeout => 2,
        Verdict::SolverFailure => 3,
    }
}

/// Serialize, re-parse, and compare: the printed report provably matches the
/// schema and round-trips.
pub fn to_validated_json(report: &RunReport) -> Result<String, String> {
    let text = serde_json::to_string_pretty(report).map_err(|e| e.to_string())?;
    let back: RunReport = serde_json::from_str(&text)
        .map_err(|e| format!("report failed schema validation: {e}"))?;
    if &back != report {
        return Err("report did not round-trip losslessly".to_string());
    }
    Ok(text)
}
