//! JSON serialization of verification reports.

use guidec_core::verify::{VerifyConfig, VerifyReport};
use serde::Serialize;

#[derive(Serialize)]
pub struct ReportJson {
    pub suite: String,
    pub passed: bool,
    pub config: ConfigJson,
    pub checks: Vec<CheckJson>,
}

#[derive(Serialize)]
pub struct ConfigJson {
    pub trials: usize,
    pub vocab_max: usize,
    pub tol_linf: f64,
    pub tol_gap: f64,
}

#[derive(Serialize)]
pub struct CheckJson {
    pub name: String,
    pub passed: bool,
    pub worst: f64,
    pub threshold: f64,
    pub detail: String,
}

pub fn report_to_json(report: &VerifyReport, config: &VerifyConfig) -> String {
    let doc = ReportJson {
        suite: report.suite.to_string(),
        passed: report.passed,
        config: ConfigJson {
            trials: config.trials,
            vocab_max: config.vocab_max,
            tol_linf: config.tol_linf,
            tol_gap: config.tol_gap,
        },
        checks: report
            .checks
            .iter()
            .map(|check| CheckJson {
                name: check.name.clone(),
                passed: check.passed,
                worst: check.worst,
                threshold: check.threshold,
                detail: check.detail.clone(),
            })
            .collect(),
    };
    let mut out = serde_json::to_string_pretty(&doc).expect("report serializes");
    out.push('\n');
    out
}
