//! JSON model files.
//!
//! Probabilities are written as plain JSON numbers; serde_json emits the
//! shortest decimal that parses back to the identical f64, so a save/load
//! round trip reproduces every distribution bit-exactly. Unknown fields are
//! ignored on load.

use std::collections::BTreeMap;
use std::fmt;

use guidec_core::model::{context_string, parse_context, Context, LanguageModel, TabularLm};
use guidec_core::state::Vocab;
use serde::{Deserialize, Serialize};

#[derive(Debug)]
pub enum ModelFileError {
    /// The document cannot be interpreted as a model.
    Malformed(String),
    /// The document parses but a stored row is not a distribution.
    InvariantViolation(String),
}

impl fmt::Display for ModelFileError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Malformed(msg) => write!(f, "malformed model file: {msg}"),
            Self::InvariantViolation(msg) => write!(f, "model file invariant violation: {msg}"),
        }
    }
}

impl std::error::Error for ModelFileError {}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    vocab: Vec<String>,
    eos: String,
    order: usize,
    alpha: f64,
    conditional: BTreeMap<String, BTreeMap<String, Vec<f64>>>,
    marginal: BTreeMap<String, Vec<f64>>,
}

pub fn model_to_json(lm: &TabularLm) -> String {
    let vocab = lm.vocab();
    let table_out = |table: &BTreeMap<Context, Vec<f64>>| -> BTreeMap<String, Vec<f64>> {
        table
            .iter()
            .map(|(ctx, row)| (context_string(vocab, ctx), row.clone()))
            .collect()
    };
    let file = ModelFile {
        vocab: vocab.tokens().to_vec(),
        eos: vocab.token(vocab.eos()).to_string(),
        order: lm.order(),
        alpha: lm.alpha(),
        conditional: lm
            .conditional_tables()
            .iter()
            .map(|(evidence, table)| (evidence.clone(), table_out(table)))
            .collect(),
        marginal: table_out(lm.marginal_table()),
    };
    let mut out = serde_json::to_string_pretty(&file).expect("model file serializes");
    out.push('\n');
    out
}

pub fn model_from_json(text: &str) -> Result<TabularLm, ModelFileError> {
    let file: ModelFile =
        serde_json::from_str(text).map_err(|e| ModelFileError::Malformed(e.to_string()))?;
    let eos = file
        .vocab
        .iter()
        .position(|t| *t == file.eos)
        .ok_or_else(|| ModelFileError::Malformed(format!("eos {:?} not in vocab", file.eos)))?;
    let vocab =
        Vocab::new(file.vocab, eos).map_err(|e| ModelFileError::Malformed(e.to_string()))?;

    let n = vocab.len();
    let parse_table = |table: &BTreeMap<String, Vec<f64>>| -> Result<BTreeMap<Context, Vec<f64>>, ModelFileError> {
        let mut out = BTreeMap::new();
        for (ctx_str, row) in table {
            let ctx = parse_context(&vocab, ctx_str, file.order).ok_or_else(|| {
                ModelFileError::Malformed(format!("bad context key {ctx_str:?} for order {}", file.order))
            })?;
            validate_row(ctx_str, row, n)?;
            out.insert(ctx, row.clone());
        }
        Ok(out)
    };

    let conditional = file
        .conditional
        .iter()
        .map(|(evidence, table)| Ok((evidence.clone(), parse_table(table)?)))
        .collect::<Result<BTreeMap<_, _>, ModelFileError>>()?;
    let marginal = parse_table(&file.marginal)?;

    TabularLm::from_parts(vocab, file.order, file.alpha, conditional, marginal)
        .map_err(|e| ModelFileError::Malformed(e.to_string()))
}

fn validate_row(ctx: &str, row: &[f64], n: usize) -> Result<(), ModelFileError> {
    if row.len() != n {
        return Err(ModelFileError::Malformed(format!(
            "row for context {ctx:?} has {} entries, vocabulary has {n}",
            row.len()
        )));
    }
    let mut sum = 0.0;
    for &p in row {
        if !p.is_finite() || p < 0.0 {
            return Err(ModelFileError::InvariantViolation(format!(
                "row for context {ctx:?} has a negative or non-finite entry"
            )));
        }
        sum += p;
    }
    if (sum - 1.0).abs() > 1e-6 {
        return Err(ModelFileError::InvariantViolation(format!(
            "row for context {ctx:?} sums to {sum}, expected 1"
        )));
    }
    Ok(())
}
