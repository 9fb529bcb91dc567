//! Tabular generative models over symbolic vocabularies.
//!
//! A [`TabularLm`] is an order-k Markov model with add-α smoothing, trained
//! from a corpus of (evidence id, sequence) pairs. It answers two queries:
//! the evidence-conditioned next-token distribution for a state, and the
//! evidence-marginal distribution for the stripped view of the same state.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::dist::TokenDist;
use crate::fp;
use crate::state::{DecodeState, TokenId, Vocab};
use crate::Error;

pub const MAX_ORDER: usize = 3;

/// Anything that can serve next-token distributions.
///
/// States carrying an evidence id get the conditioned distribution; stripped
/// states get the marginal one.
pub trait LanguageModel {
    fn vocab(&self) -> &Vocab;
    fn next_dist(&self, state: &DecodeState) -> Result<TokenDist, Error>;
}

/// One position of a lookup context: a concrete token or begin padding.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum CtxSym {
    Begin,
    Tok(TokenId),
}

pub type Context = Vec<CtxSym>;

/// Formats a context the way model files key their tables: space-joined
/// tokens with `^` for begin padding, empty for order 0.
pub fn context_string(vocab: &Vocab, ctx: &[CtxSym]) -> String {
    let parts: Vec<&str> = ctx
        .iter()
        .map(|sym| match sym {
            CtxSym::Begin => "^",
            CtxSym::Tok(id) => vocab.token(*id),
        })
        .collect();
    parts.join(" ")
}

/// Inverse of [`context_string`]. `None` when a token is unknown or the
/// length does not match the order.
pub fn parse_context(vocab: &Vocab, s: &str, order: usize) -> Option<Context> {
    if order == 0 {
        return s.is_empty().then(Vec::new);
    }
    let parts: Vec<&str> = s.split(' ').collect();
    if parts.len() != order {
        return None;
    }
    let mut ctx = Vec::with_capacity(order);
    for part in parts {
        if part == "^" {
            ctx.push(CtxSym::Begin);
        } else {
            ctx.push(CtxSym::Tok(vocab.index_of(part)?));
        }
    }
    Some(ctx)
}

/// Order-k add-α tabular model with per-evidence conditional tables and a
/// pooled marginal table.
#[derive(Clone, Debug)]
pub struct TabularLm {
    vocab: Vocab,
    order: usize,
    alpha: f64,
    // rows are probability vectors; log-space views are built per query so
    // that serialization round-trips bit-exactly
    conditional: BTreeMap<String, BTreeMap<Context, Vec<f64>>>,
    marginal: BTreeMap<Context, Vec<f64>>,
}

impl TabularLm {
    /// Trains conditional tables per evidence id and the pooled marginal.
    ///
    /// Every position of every sequence is one event: the preceding k tokens
    /// (begin-padded) map to the observed token. The marginal row for a
    /// context is the count-weighted mixture of the smoothed conditional
    /// rows, so marginalizing two identical corpora reproduces their shared
    /// table exactly.
    pub fn train(
        vocab: Vocab,
        corpus: &[(String, Vec<TokenId>)],
        order: usize,
        alpha: f64,
    ) -> Result<Self, Error> {
        if corpus.is_empty() {
            return Err(Error::EmptyCorpus);
        }
        if order > MAX_ORDER {
            return Err(Error::OrderTooLarge {
                order,
                max: MAX_ORDER,
            });
        }
        if !(alpha > 0.0) || !alpha.is_finite() {
            return Err(Error::InvalidDistribution {
                reason: "smoothing constant must be positive and finite",
            });
        }
        let n_tokens = vocab.len();
        let mut counts: BTreeMap<String, BTreeMap<Context, Vec<u64>>> = BTreeMap::new();
        for (idx, (evidence, seq)) in corpus.iter().enumerate() {
            if seq.last() != Some(&vocab.eos()) {
                return Err(Error::SequenceMissingEos { index: idx });
            }
            for &tok in seq {
                if tok >= n_tokens {
                    return Err(Error::TokenOutOfRange {
                        token: tok,
                        vocab: n_tokens,
                    });
                }
            }
            let table = counts.entry(evidence.clone()).or_default();
            for (pos, &tok) in seq.iter().enumerate() {
                let ctx = context_at(seq, pos, order);
                let row = table.entry(ctx).or_insert_with(|| alloc::vec![0; n_tokens]);
                row[tok] += 1;
            }
        }

        let mut conditional: BTreeMap<String, BTreeMap<Context, Vec<f64>>> = BTreeMap::new();
        for (evidence, table) in &counts {
            let mut rows = BTreeMap::new();
            for (ctx, row) in table {
                rows.insert(ctx.clone(), smooth(row, alpha));
            }
            conditional.insert(evidence.clone(), rows);
        }

        // marginal(ctx) = sum_e P(e | ctx) * conditional_e(ctx), with the
        // empirical event counts as weights
        let mut marginal: BTreeMap<Context, Vec<f64>> = BTreeMap::new();
        let mut ctx_totals: BTreeMap<Context, u64> = BTreeMap::new();
        for table in counts.values() {
            for (ctx, row) in table {
                *ctx_totals.entry(ctx.clone()).or_insert(0) += row.iter().sum::<u64>();
            }
        }
        for (ctx, &total) in &ctx_totals {
            let mut mix = alloc::vec![0.0; n_tokens];
            for (evidence, table) in &counts {
                if let Some(row) = table.get(ctx) {
                    let weight = row.iter().sum::<u64>() as f64 / total as f64;
                    let smoothed = &conditional[evidence][ctx];
                    for (m, &p) in mix.iter_mut().zip(smoothed) {
                        *m += weight * p;
                    }
                }
            }
            marginal.insert(ctx.clone(), mix);
        }

        Ok(Self {
            vocab,
            order,
            alpha,
            conditional,
            marginal,
        })
    }

    /// Rebuilds a model from already-materialized probability tables, as read
    /// from a model file. Rows must sum to 1 within 1e-6; rows outside the
    /// 1e-9 distribution tolerance are renormalized once, anything tighter is
    /// kept bit-identical.
    pub fn from_parts(
        vocab: Vocab,
        order: usize,
        alpha: f64,
        conditional: BTreeMap<String, BTreeMap<Context, Vec<f64>>>,
        marginal: BTreeMap<Context, Vec<f64>>,
    ) -> Result<Self, Error> {
        if order > MAX_ORDER {
            return Err(Error::OrderTooLarge {
                order,
                max: MAX_ORDER,
            });
        }
        if !(alpha > 0.0) || !alpha.is_finite() {
            return Err(Error::InvalidDistribution {
                reason: "smoothing constant must be positive and finite",
            });
        }
        let mut model = Self {
            vocab,
            order,
            alpha,
            conditional,
            marginal,
        };
        let n = model.vocab.len();
        for table in model.conditional.values_mut() {
            for row in table.values_mut() {
                validate_row(row, n)?;
            }
        }
        for row in model.marginal.values_mut() {
            validate_row(row, n)?;
        }
        Ok(model)
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn conditional_tables(&self) -> &BTreeMap<String, BTreeMap<Context, Vec<f64>>> {
        &self.conditional
    }

    pub fn marginal_table(&self) -> &BTreeMap<Context, Vec<f64>> {
        &self.marginal
    }

    /// The lookup context for a state: the last k tokens of prompt +
    /// generated, begin-padded on the left.
    pub fn context_of(&self, state: &DecodeState) -> Context {
        let mut joined: Vec<TokenId> =
            Vec::with_capacity(state.prompt().len() + state.generated().len());
        joined.extend_from_slice(state.prompt());
        joined.extend_from_slice(state.generated());
        context_at(&joined, joined.len(), self.order)
    }

    fn row_to_dist(&self, row: &[f64]) -> TokenDist {
        TokenDist::new(row.iter().map(|&p| fp::ln(p)).collect())
            .expect("stored rows are validated distributions")
    }

    fn uniform(&self) -> TokenDist {
        TokenDist::uniform(self.vocab.len())
    }
}

impl LanguageModel for TabularLm {
    fn vocab(&self) -> &Vocab {
        &self.vocab
    }

    fn next_dist(&self, state: &DecodeState) -> Result<TokenDist, Error> {
        debug_assert!(!state.is_terminal(self.vocab.eos()));
        let ctx = self.context_of(state);
        match state.evidence_id() {
            Some(id) => {
                let table = self
                    .conditional
                    .get(id)
                    .ok_or_else(|| Error::UnknownEvidenceId { id: id.to_string() })?;
                Ok(table
                    .get(&ctx)
                    .map(|row| self.row_to_dist(row))
                    .unwrap_or_else(|| self.uniform()))
            }
            None => Ok(self
                .marginal
                .get(&ctx)
                .map(|row| self.row_to_dist(row))
                .unwrap_or_else(|| self.uniform())),
        }
    }
}

/// Context preceding `pos`, oldest token first, begin-padded on the left.
fn context_at(seq: &[TokenId], pos: usize, order: usize) -> Context {
    (1..=order)
        .rev()
        .map(|back| {
            if pos >= back {
                CtxSym::Tok(seq[pos - back])
            } else {
                CtxSym::Begin
            }
        })
        .collect()
}

fn smooth(counts: &[u64], alpha: f64) -> Vec<f64> {
    let total: u64 = counts.iter().sum();
    let denom = total as f64 + alpha * counts.len() as f64;
    counts.iter().map(|&c| (c as f64 + alpha) / denom).collect()
}

fn validate_row(row: &mut [f64], n: usize) -> Result<(), Error> {
    if row.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: row.len(),
        });
    }
    let mut sum = 0.0;
    for &p in row.iter() {
        if !p.is_finite() || p < 0.0 {
            return Err(Error::InvalidDistribution {
                reason: "row entries must be finite and nonnegative",
            });
        }
        sum += p;
    }
    if (sum - 1.0).abs() > 1e-6 {
        return Err(Error::InvalidDistribution {
            reason: "row does not sum to 1 within 1e-6",
        });
    }
    if (sum - 1.0).abs() > 1e-9 {
        for p in row.iter_mut() {
            *p /= sum;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::info::kl_divergence;
    use alloc::vec;

    fn vocab_abe() -> Vocab {
        Vocab::new(vec!["a".into(), "b".into(), "eos".into()], 2).unwrap()
    }

    fn state(evidence: Option<&str>, generated: Vec<TokenId>) -> DecodeState {
        DecodeState::new(evidence.map(String::from), vec![], generated)
    }

    #[test]
    fn add_one_counts() {
        let lm = TabularLm::train(vocab_abe(), &[("E1".to_string(), vec![0, 2])], 0, 1.0).unwrap();
        let d = lm.next_dist(&state(Some("E1"), vec![])).unwrap();
        assert!((d.prob(0) - 0.4).abs() < 1e-15);
        assert!((d.prob(1) - 0.2).abs() < 1e-15);
        assert!((d.prob(2) - 0.4).abs() < 1e-15);
    }

    #[test]
    fn unseen_context_is_uniform() {
        let lm = TabularLm::train(vocab_abe(), &[("E1".to_string(), vec![0, 2])], 1, 1.0).unwrap();
        // context "b" was never observed
        let d = lm.next_dist(&state(Some("E1"), vec![1])).unwrap();
        for i in 0..3 {
            assert!((d.prob(i) - 1.0 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn identical_corpora_make_conditional_equal_marginal() {
        let seqs = [vec![0, 0, 2], vec![1, 0, 2]];
        let corpus: Vec<(String, Vec<TokenId>)> = ["E1", "E2"]
            .iter()
            .flat_map(|e| seqs.iter().map(|s| (e.to_string(), s.clone())))
            .collect();
        let lm = TabularLm::train(vocab_abe(), &corpus, 1, 0.5).unwrap();
        for (ctx, marg_row) in lm.marginal_table() {
            let cond_row = &lm.conditional_tables()["E1"][ctx];
            for (m, c) in marg_row.iter().zip(cond_row) {
                assert!((m - c).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn marginal_is_count_weighted_mixture() {
        let corpus = vec![
            ("E1".to_string(), vec![0, 0, 2]),
            ("E1".to_string(), vec![0, 2]),
            ("E2".to_string(), vec![1, 2]),
        ];
        let lm = TabularLm::train(vocab_abe(), &corpus, 1, 1.0).unwrap();
        for (ctx, marg_row) in lm.marginal_table() {
            // recompute the mixture from raw corpus counts
            let mut mix = vec![0.0; 3];
            let mut weights = vec![];
            let mut rows = vec![];
            for (evidence, table) in lm.conditional_tables() {
                if let Some(row) = table.get(ctx) {
                    let events: f64 = corpus
                        .iter()
                        .filter(|(e, _)| e == evidence)
                        .map(|(_, seq)| {
                            (0..seq.len())
                                .filter(|&pos| context_at(seq, pos, 1) == *ctx)
                                .count() as f64
                        })
                        .sum();
                    weights.push(events);
                    rows.push(row.clone());
                }
            }
            let wsum: f64 = weights.iter().sum();
            for (w, row) in weights.iter().zip(&rows) {
                for (m, p) in mix.iter_mut().zip(row) {
                    *m += (w / wsum) * p;
                }
            }
            for (m, got) in mix.iter().zip(marg_row) {
                assert!((m - got).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn huge_alpha_approaches_uniform() {
        let lm = TabularLm::train(
            vocab_abe(),
            &[("E1".to_string(), vec![0, 0, 0, 0, 2])],
            0,
            1e6,
        )
        .unwrap();
        let d = lm.next_dist(&state(Some("E1"), vec![])).unwrap();
        for i in 0..3 {
            assert!((d.prob(i) - 1.0 / 3.0).abs() < 1e-5);
        }
    }

    #[test]
    fn single_evidence_marginal_matches_conditional() {
        let lm =
            TabularLm::train(vocab_abe(), &[("E1".to_string(), vec![0, 1, 2])], 1, 1.0).unwrap();
        let s = state(Some("E1"), vec![0]);
        let cond = lm.next_dist(&s).unwrap();
        let marg = lm.next_dist(&s.strip_evidence()).unwrap();
        assert!(kl_divergence(&cond, &marg).unwrap() <= 1e-9);
    }

    #[test]
    fn full_support_after_training() {
        let lm = TabularLm::train(vocab_abe(), &[("E1".to_string(), vec![0, 2])], 1, 0.01).unwrap();
        for table in lm.conditional_tables().values() {
            for row in table.values() {
                assert!(row.iter().all(|&p| p > 0.0));
            }
        }
        for row in lm.marginal_table().values() {
            assert!(row.iter().all(|&p| p > 0.0));
        }
    }

    #[test]
    fn training_errors() {
        assert_eq!(
            TabularLm::train(vocab_abe(), &[], 0, 1.0).unwrap_err(),
            Error::EmptyCorpus
        );
        assert_eq!(
            TabularLm::train(vocab_abe(), &[("E1".to_string(), vec![0, 1])], 0, 1.0).unwrap_err(),
            Error::SequenceMissingEos { index: 0 }
        );
        assert!(TabularLm::train(vocab_abe(), &[("E1".to_string(), vec![0, 2])], 4, 1.0).is_err());
        assert!(TabularLm::train(vocab_abe(), &[("E1".to_string(), vec![0, 2])], 0, 0.0).is_err());
    }

    #[test]
    fn unknown_evidence_id() {
        let lm = TabularLm::train(vocab_abe(), &[("E1".to_string(), vec![0, 2])], 0, 1.0).unwrap();
        let err = lm.next_dist(&state(Some("E9"), vec![])).unwrap_err();
        assert_eq!(
            err,
            Error::UnknownEvidenceId {
                id: "E9".to_string()
            }
        );
    }

    #[test]
    fn context_string_round_trip() {
        let v = vocab_abe();
        let ctx = vec![CtxSym::Begin, CtxSym::Tok(0)];
        let s = context_string(&v, &ctx);
        assert_eq!(s, "^ a");
        assert_eq!(parse_context(&v, &s, 2).unwrap(), ctx);
        assert_eq!(parse_context(&v, "", 0).unwrap(), Vec::<CtxSym>::new());
        assert!(parse_context(&v, "a zzz", 2).is_none());
    }
}
