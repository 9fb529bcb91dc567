//! Information-theoretic primitives: entropy, cross-entropy, KL divergence,
//! pointwise mutual information, and stable log-space normalization.
//!
//! Everything is in natural-log units. The `0 * log 0 = 0` convention applies
//! throughout, which is what makes one-hot distributions well-behaved.

use crate::dist::TokenDist;
use crate::fp;
use crate::Error;

/// Natural-log units; entropies and divergences are >= 0, log-ratios may not be.
pub type Nats = f64;

/// Numerical slack below zero that entropy/KL are clamped from.
const NEG_SLACK: f64 = -1e-12;

#[inline]
fn clamp_nonnegative(x: f64) -> f64 {
    if x < 0.0 {
        debug_assert!(x > NEG_SLACK, "more than numerical slack below zero: {x}");
        0.0
    } else {
        x
    }
}

/// log(sum(exp(w))) with max-subtraction.
pub fn logsumexp(weights: &[f64]) -> f64 {
    let max = weights.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    let sum: f64 = weights.iter().map(|&w| fp::exp(w - max)).sum();
    max + fp::ln(sum)
}

/// Normalizes finite log-weights into a distribution.
///
/// Computes `(w - max) - log(sum(exp(w - max)))`, which equals
/// `w - logsumexp(w)` but never forms the large intermediate, so adding a
/// constant to every weight leaves the result unchanged up to rounding of
/// the shifted inputs.
pub fn log_normalize(weights: &[f64]) -> Result<TokenDist, Error> {
    if weights.is_empty() {
        return Err(Error::EmptyInput);
    }
    if weights.iter().any(|w| w.is_nan() || *w == f64::INFINITY) {
        return Err(Error::NonFiniteInput);
    }
    let max = weights.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return Err(Error::InvalidDistribution {
            reason: "all log-weights are -inf",
        });
    }
    let shifted: alloc::vec::Vec<f64> = weights.iter().map(|&w| w - max).collect();
    let log_sum = fp::ln(shifted.iter().map(|&w| fp::exp(w)).sum());
    TokenDist::new(shifted.iter().map(|&w| w - log_sum).collect())
}

/// Shannon entropy −Σ p log p.
pub fn entropy(p: &TokenDist) -> Nats {
    let mut h = 0.0;
    for &lp in p.log_probs() {
        let prob = fp::exp(lp);
        if prob > 0.0 {
            h -= prob * lp;
        }
    }
    clamp_nonnegative(h)
}

/// Cross-entropy −Σ p log q.
pub fn cross_entropy(p: &TokenDist, q: &TokenDist) -> Result<Nats, Error> {
    if p.len() != q.len() {
        return Err(Error::DimensionMismatch {
            expected: p.len(),
            got: q.len(),
        });
    }
    let mut h = 0.0;
    for (&lp, &lq) in p.log_probs().iter().zip(q.log_probs()) {
        let prob = fp::exp(lp);
        if prob > 0.0 {
            h -= prob * lq;
        }
    }
    Ok(clamp_nonnegative(h))
}

/// KL divergence Σ p log(p/q).
///
/// Infinite when p has mass where q has none; q is full-support whenever it
/// comes from a smoothed model.
pub fn kl_divergence(p: &TokenDist, q: &TokenDist) -> Result<Nats, Error> {
    if p.len() != q.len() {
        return Err(Error::DimensionMismatch {
            expected: p.len(),
            got: q.len(),
        });
    }
    let mut kl = 0.0;
    for (&lp, &lq) in p.log_probs().iter().zip(q.log_probs()) {
        let prob = fp::exp(lp);
        if prob > 0.0 {
            kl += prob * (lp - lq);
        }
    }
    Ok(clamp_nonnegative(kl))
}

/// Pointwise mutual information log P(x|y) − log P(x). May be negative.
pub fn pmi(log_conditional: f64, log_marginal: f64) -> Result<Nats, Error> {
    if !log_conditional.is_finite() || !log_marginal.is_finite() {
        return Err(Error::NonFiniteInput);
    }
    Ok(log_conditional - log_marginal)
}

#[cfg(test)]
mod tests {
    use super::*;
    use core::f64::consts::LN_2;

    fn dist(probs: &[f64]) -> TokenDist {
        TokenDist::from_probs(probs).unwrap()
    }

    #[test]
    fn log_normalize_symmetry() {
        let d = log_normalize(&[0.0, 0.0]).unwrap();
        assert!((d.prob(0) - 0.5).abs() < 1e-15);
        assert!((d.prob(1) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn log_normalize_exact_ratio() {
        // exp weights 0.64 and 0.04 normalize to 16/17 and 1/17
        let d = log_normalize(&[0.64f64.ln(), 0.04f64.ln()]).unwrap();
        assert!((d.prob(0) - 16.0 / 17.0).abs() < 1e-12);
        assert!((d.prob(1) - 1.0 / 17.0).abs() < 1e-12);
    }

    #[test]
    fn log_normalize_no_overflow() {
        let d = log_normalize(&[1000.0, 1000.0, 1000.0]).unwrap();
        for i in 0..3 {
            assert!((d.prob(i) - 1.0 / 3.0).abs() < 1e-12);
        }
        // shift invariance is exact when the shift does not round the inputs
        let base = log_normalize(&[0.0, 0.0, 0.0]).unwrap();
        assert_eq!(base.log_probs(), d.log_probs());
    }

    #[test]
    fn logsumexp_shifted_and_degenerate() {
        assert!((logsumexp(&[0.0, 0.0]) - LN_2).abs() < 1e-15);
        assert!((logsumexp(&[1000.0, 1000.0]) - (1000.0 + LN_2)).abs() < 1e-12);
        assert_eq!(logsumexp(&[f64::NEG_INFINITY]), f64::NEG_INFINITY);
    }

    #[test]
    fn log_normalize_errors() {
        assert_eq!(log_normalize(&[]), Err(Error::EmptyInput));
        assert_eq!(log_normalize(&[f64::NAN, 0.0]), Err(Error::NonFiniteInput));
        assert_eq!(
            log_normalize(&[f64::INFINITY, 0.0]),
            Err(Error::NonFiniteInput)
        );
    }

    #[test]
    fn entropy_values() {
        assert!((entropy(&TokenDist::uniform(2)) - LN_2).abs() < 1e-12);
        assert_eq!(entropy(&TokenDist::one_hot(4, 1)), 0.0);
        assert!((entropy(&dist(&[0.8, 0.2])) - 0.500402).abs() < 1e-6);
    }

    #[test]
    fn cross_entropy_values() {
        let p = dist(&[0.8, 0.2]);
        assert!((cross_entropy(&p, &p).unwrap() - entropy(&p)).abs() < 1e-12);

        let one_hot = dist(&[1.0, 0.0]);
        let u = TokenDist::uniform(2);
        assert!((cross_entropy(&one_hot, &u).unwrap() - LN_2).abs() < 1e-12);

        let half = dist(&[0.5, 0.5]);
        assert!((cross_entropy(&half, &p).unwrap() - 0.916291).abs() < 1e-6);
    }

    #[test]
    fn kl_values() {
        let p = dist(&[0.8, 0.2]);
        let u = TokenDist::uniform(2);
        assert_eq!(kl_divergence(&p, &p).unwrap(), 0.0);
        assert!((kl_divergence(&dist(&[1.0, 0.0]), &u).unwrap() - LN_2).abs() < 1e-12);
        assert!((kl_divergence(&p, &u).unwrap() - 0.192745).abs() < 1e-6);
    }

    #[test]
    fn kl_matches_cross_entropy_minus_entropy() {
        let p = dist(&[0.3, 0.45, 0.25]);
        let q = dist(&[0.5, 0.2, 0.3]);
        let lhs = kl_divergence(&p, &q).unwrap();
        let rhs = cross_entropy(&p, &q).unwrap() - entropy(&p);
        assert!((lhs - rhs).abs() < 1e-10);
    }

    #[test]
    fn dimension_mismatch() {
        let p = dist(&[0.5, 0.5]);
        let q = TokenDist::uniform(3);
        assert!(matches!(
            cross_entropy(&p, &q),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(matches!(
            kl_divergence(&p, &q),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn pmi_values() {
        assert_eq!(pmi(0.3f64.ln(), 0.3f64.ln()).unwrap(), 0.0);
        assert!((pmi(0.6f64.ln(), 0.3f64.ln()).unwrap() - LN_2).abs() < 1e-12);
        assert!((pmi(0.1f64.ln(), 0.4f64.ln()).unwrap() - (-1.386294)).abs() < 1e-6);
        assert_eq!(pmi(f64::NEG_INFINITY, 0.0), Err(Error::NonFiniteInput));
    }
}
