//! TOML corpus files for `guidec train`.
//!
//! ```toml
//! eos = "eos"
//! # vocab = ["a", "b", "eos"]   # optional; inferred (sorted) when absent
//! sequences = [
//!   { evidence = "E1", tokens = ["a", "a", "eos"] },
//!   { evidence = "E2", tokens = ["b", "eos"] },
//! ]
//! ```

use std::collections::BTreeSet;
use std::fmt;

use guidec_core::state::{TokenId, Vocab};
use serde::Deserialize;

#[derive(Debug)]
pub struct CorpusFileError(pub String);

impl fmt::Display for CorpusFileError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "bad corpus file: {}", self.0)
    }
}

impl std::error::Error for CorpusFileError {}

#[derive(Deserialize)]
pub struct CorpusFile {
    pub eos: String,
    #[serde(default)]
    pub vocab: Option<Vec<String>>,
    pub sequences: Vec<SequenceEntry>,
}

#[derive(Deserialize)]
pub struct SequenceEntry {
    pub evidence: String,
    pub tokens: Vec<String>,
}

pub fn corpus_from_toml(text: &str) -> Result<CorpusFile, CorpusFileError> {
    toml::from_str(text).map_err(|e| CorpusFileError(e.to_string()))
}

/// Builds the vocabulary (explicit, or inferred in sorted order) and maps
/// every sequence onto token indices.
pub fn build_corpus(
    file: &CorpusFile,
) -> Result<(Vocab, Vec<(String, Vec<TokenId>)>), CorpusFileError> {
    let tokens: Vec<String> = match &file.vocab {
        Some(explicit) => explicit.clone(),
        None => {
            let mut seen: BTreeSet<&str> = file
                .sequences
                .iter()
                .flat_map(|s| s.tokens.iter().map(String::as_str))
                .collect();
            seen.insert(&file.eos);
            seen.into_iter().map(String::from).collect()
        }
    };
    let eos = tokens
        .iter()
        .position(|t| *t == file.eos)
        .ok_or_else(|| CorpusFileError(format!("eos {:?} not in vocab", file.eos)))?;
    let vocab = Vocab::new(tokens, eos).map_err(|e| CorpusFileError(e.to_string()))?;

    let corpus = file
        .sequences
        .iter()
        .map(|entry| {
            let ids = entry
                .tokens
                .iter()
                .map(|tok| {
                    vocab
                        .index_of(tok)
                        .ok_or_else(|| CorpusFileError(format!("token {tok:?} not in vocab")))
                })
                .collect::<Result<Vec<_>, _>>()?;
            Ok((entry.evidence.clone(), ids))
        })
        .collect::<Result<Vec<_>, CorpusFileError>>()?;
    Ok((vocab, corpus))
}
