//! CSV output for metrics rows.
//!
//! Column order is fixed; decimals carry nine significant digits so repeated
//! runs with the same seed are byte-identical.

use guidec_core::episode::MetricsRow;

pub const HEADER: &str = "policy,param,value,attribution_rate,distinct_1,distinct_2,mean_loglik,mean_policy_entropy,n_samples,seed";

/// Nine significant digits in scientific notation.
fn sig9(x: f64) -> String {
    format!("{x:.8e}")
}

pub fn rows_to_csv(rows: &[MetricsRow]) -> String {
    let mut out = String::from(HEADER);
    out.push('\n');
    for row in rows {
        let param = row.param.as_deref().unwrap_or("");
        let value = row.value.map(sig9).unwrap_or_default();
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{}\n",
            row.policy,
            param,
            value,
            sig9(row.attribution_rate),
            sig9(row.distinct_1),
            sig9(row.distinct_2),
            sig9(row.mean_loglik),
            sig9(row.mean_policy_entropy),
            row.n_samples,
            row.seed,
        ));
    }
    out
}
