//! Probability distributions over a vocabulary, kept in log space.

use alloc::vec::Vec;

use crate::fp;
use crate::rng::SplitRng;
use crate::state::TokenId;
use crate::Error;

/// How far the exponentiated entries may deviate from summing to 1.
pub const NORMALIZATION_TOL: f64 = 1e-9;

/// A distribution over the vocabulary, stored as natural-log probabilities.
///
/// Entries may be `-inf` (zero mass — greedy outputs are one-hot, and
/// handcrafted models may pin tokens to probability zero), but never NaN or
/// positive beyond normalization slack. Model-produced distributions have
/// full support; that is enforced where they are built, not here.
#[derive(Clone, Debug, PartialEq)]
pub struct TokenDist {
    log_probs: Vec<f64>,
}

impl TokenDist {
    /// Wraps a log-probability vector, validating the invariants.
    pub fn new(log_probs: Vec<f64>) -> Result<Self, Error> {
        if log_probs.is_empty() {
            return Err(Error::EmptyInput);
        }
        let mut sum = 0.0;
        for &lp in &log_probs {
            if lp.is_nan() || lp == f64::INFINITY {
                return Err(Error::InvalidDistribution {
                    reason: "log-probabilities must not be NaN or +inf",
                });
            }
            sum += fp::exp(lp);
        }
        if (sum - 1.0).abs() > NORMALIZATION_TOL {
            return Err(Error::InvalidDistribution {
                reason: "probabilities do not sum to 1",
            });
        }
        Ok(Self { log_probs })
    }

    /// Builds from a probability vector.
    pub fn from_probs(probs: &[f64]) -> Result<Self, Error> {
        for &p in probs {
            if !p.is_finite() || p < 0.0 {
                return Err(Error::InvalidDistribution {
                    reason: "probabilities must be finite and nonnegative",
                });
            }
        }
        Self::new(probs.iter().map(|&p| fp::ln(p)).collect())
    }

    pub fn uniform(n: usize) -> Self {
        assert!(n > 0);
        let lp = -fp::ln(n as f64);
        Self {
            log_probs: alloc::vec![lp; n],
        }
    }

    pub fn one_hot(n: usize, index: TokenId) -> Self {
        assert!(index < n);
        let mut log_probs = alloc::vec![f64::NEG_INFINITY; n];
        log_probs[index] = 0.0;
        Self { log_probs }
    }

    pub fn len(&self) -> usize {
        self.log_probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.log_probs.is_empty()
    }

    pub fn log_probs(&self) -> &[f64] {
        &self.log_probs
    }

    pub fn log_prob(&self, token: TokenId) -> f64 {
        self.log_probs[token]
    }

    pub fn prob(&self, token: TokenId) -> f64 {
        fp::exp(self.log_probs[token])
    }

    pub fn probs(&self) -> Vec<f64> {
        self.log_probs.iter().map(|&lp| fp::exp(lp)).collect()
    }

    /// Index of the largest probability; ties break toward the lowest index.
    pub fn argmax(&self) -> TokenId {
        let mut best = 0;
        for (i, &lp) in self.log_probs.iter().enumerate().skip(1) {
            if lp > self.log_probs[best] {
                best = i;
            }
        }
        best
    }

    /// Largest absolute probability difference to another distribution.
    pub fn linf_distance(&self, other: &Self) -> f64 {
        debug_assert_eq!(self.len(), other.len());
        self.log_probs
            .iter()
            .zip(&other.log_probs)
            .map(|(&a, &b)| (fp::exp(a) - fp::exp(b)).abs())
            .fold(0.0, f64::max)
    }

    /// Inverse-CDF sample in vocabulary order.
    pub fn sample(&self, rng: &mut SplitRng) -> TokenId {
        let u = rng.next_f64();
        let mut cum = 0.0;
        let mut last_supported = 0;
        for (i, &lp) in self.log_probs.iter().enumerate() {
            let p = fp::exp(lp);
            if p > 0.0 {
                last_supported = i;
                cum += p;
                if u < cum {
                    return i;
                }
            }
        }
        // u fell into normalization slack past the last positive entry
        last_supported
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_inputs() {
        assert_eq!(TokenDist::new(alloc::vec![]), Err(Error::EmptyInput));
        assert!(TokenDist::new(alloc::vec![0.0, 0.0]).is_err()); // sums to 2
        assert!(TokenDist::new(alloc::vec![f64::NAN, 0.0]).is_err());
        assert!(TokenDist::from_probs(&[1.2, -0.2]).is_err());
    }

    #[test]
    fn accepts_zero_mass_entries() {
        let d = TokenDist::from_probs(&[0.5, 0.5, 0.0]).unwrap();
        assert_eq!(d.log_prob(2), f64::NEG_INFINITY);
        assert_eq!(d.prob(2), 0.0);
    }

    #[test]
    fn argmax_tie_breaks_low() {
        let d = TokenDist::uniform(3);
        assert_eq!(d.argmax(), 0);
        let d = TokenDist::from_probs(&[0.2, 0.4, 0.4]).unwrap();
        assert_eq!(d.argmax(), 1);
    }

    #[test]
    fn sampling_matches_support() {
        let d = TokenDist::from_probs(&[0.0, 1.0, 0.0]).unwrap();
        let mut rng = SplitRng::new(3);
        for _ in 0..100 {
            assert_eq!(d.sample(&mut rng), 1);
        }
    }

    #[test]
    fn sampling_roughly_uniform() {
        let d = TokenDist::uniform(4);
        let mut rng = SplitRng::new(11);
        let mut counts = [0usize; 4];
        for _ in 0..40_000 {
            counts[d.sample(&mut rng)] += 1;
        }
        for &c in &counts {
            assert!((c as f64 - 10_000.0).abs() < 500.0, "counts {counts:?}");
        }
    }

    #[test]
    fn one_hot_sampling_ignores_draw() {
        let d = TokenDist::one_hot(5, 3);
        let mut rng = SplitRng::new(0);
        for _ in 0..50 {
            assert_eq!(d.sample(&mut rng), 3);
        }
    }
}
