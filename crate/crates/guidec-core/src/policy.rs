//! The five decoding policies in closed form.
//!
//! Each policy is the maximizer of a scalar objective over next-token
//! distributions (see [`crate::objective`]); the oracle module certifies the
//! closed forms against an independent simplex maximizer. All reweighting is
//! done in log space with max-subtraction so that large guidance strengths
//! and tiny temperatures cannot overflow.

use alloc::vec::Vec;

use crate::dist::TokenDist;
use crate::fp;
use crate::info::{kl_divergence, log_normalize, Nats};
use crate::Error;

/// Shape of the map from divergence to guidance strength.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum HKind {
    /// `h(x) = 2^(x/sigma) - 1`: flat below the threshold, steep above it.
    #[default]
    Exp2,
    /// `h(x) = x / sigma`.
    Linear,
}

impl HKind {
    pub fn name(self) -> &'static str {
        match self {
            HKind::Exp2 => "exp2",
            HKind::Linear => "linear",
        }
    }
}

/// Which rollout measure the value tables for classifier guidance use.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum QMode {
    /// Future steps follow the base model.
    #[default]
    BaseRollout,
    /// Future steps follow the guided policy itself (backward fixed point).
    OptimalBackward,
}

impl QMode {
    pub fn name(self) -> &'static str {
        match self {
            QMode::BaseRollout => "base_rollout",
            QMode::OptimalBackward => "optimal_backward",
        }
    }
}

/// A decoding algorithm plus its hyperparameters.
#[derive(Clone, Debug, PartialEq)]
pub enum PolicySpec {
    Greedy,
    Temperature { temperature: f64 },
    KlGuidedTemperature { sigma: f64, h: HKind },
    ClassifierGuidance { lambda: f64, q_mode: QMode },
    ClassifierFree { lambda: f64 },
}

impl PolicySpec {
    pub fn kind_name(&self) -> &'static str {
        match self {
            PolicySpec::Greedy => "greedy",
            PolicySpec::Temperature { .. } => "temperature",
            PolicySpec::KlGuidedTemperature { .. } => "kl_guided_temperature",
            PolicySpec::ClassifierGuidance { .. } => "classifier_guidance",
            PolicySpec::ClassifierFree { .. } => "classifier_free",
        }
    }

    pub fn validate(&self) -> Result<(), Error> {
        match *self {
            PolicySpec::Greedy => Ok(()),
            PolicySpec::Temperature { temperature } => {
                if temperature > 0.0 && temperature.is_finite() {
                    Ok(())
                } else {
                    Err(Error::NonPositiveTemperature { value: temperature })
                }
            }
            PolicySpec::KlGuidedTemperature { sigma, .. } => {
                if sigma > 0.0 && sigma.is_finite() {
                    Ok(())
                } else {
                    Err(Error::NonPositiveSigma { value: sigma })
                }
            }
            PolicySpec::ClassifierGuidance { lambda, .. }
            | PolicySpec::ClassifierFree { lambda } => {
                if lambda >= 0.0 && lambda.is_finite() {
                    Ok(())
                } else {
                    Err(Error::NegativeLambda { value: lambda })
                }
            }
        }
    }

    /// Whether this policy needs the evidence-stripped distribution.
    pub fn needs_uncond(&self) -> bool {
        matches!(
            self,
            PolicySpec::KlGuidedTemperature { .. } | PolicySpec::ClassifierFree { .. }
        )
    }

    /// Whether this policy needs action-value ratios.
    pub fn needs_values(&self) -> bool {
        matches!(self, PolicySpec::ClassifierGuidance { .. })
    }
}

/// Everything a policy may consume at one step.
#[derive(Clone, Debug)]
pub struct GuidanceInputs {
    /// Base model distribution at the full state.
    pub p_cond: TokenDist,
    /// Base model distribution at the evidence-stripped state.
    pub p_uncond: Option<TokenDist>,
    /// Per-action Q(s,a)/V(s) ratios, floored away from zero upstream.
    pub q_over_v: Option<Vec<f64>>,
}

impl GuidanceInputs {
    pub fn cond_only(p_cond: TokenDist) -> Self {
        Self {
            p_cond,
            p_uncond: None,
            q_over_v: None,
        }
    }
}

/// One-hot at the most probable token, ties toward the lowest index.
pub fn greedy_policy(p: &TokenDist) -> TokenDist {
    TokenDist::one_hot(p.len(), p.argmax())
}

/// Rescales p by the exponent 1/T. T = 1 returns p unchanged.
pub fn temperature_policy(p: &TokenDist, temperature: f64) -> Result<TokenDist, Error> {
    if !(temperature > 0.0) || !temperature.is_finite() {
        return Err(Error::NonPositiveTemperature { value: temperature });
    }
    if temperature == 1.0 {
        return Ok(p.clone());
    }
    let inv = 1.0 / temperature;
    let weights: Vec<f64> = p.log_probs().iter().map(|&lp| inv * lp).collect();
    log_normalize(&weights)
}

/// Maps a step's divergence to a guidance strength: `lambda = h(kl)`.
pub fn dynamic_lambda(kl: Nats, sigma: f64, h: HKind) -> Result<f64, Error> {
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(Error::NonPositiveSigma { value: sigma });
    }
    if !(kl >= 0.0) {
        return Err(Error::NegativeKl { value: kl });
    }
    Ok(match h {
        HKind::Exp2 => fp::exp2(kl / sigma) - 1.0,
        HKind::Linear => kl / sigma,
    })
}

/// The companion dynamic temperature `1 / (lambda + 1)`; `0.5^(kl/sigma)` for
/// the default shape.
pub fn dynamic_temperature(kl: Nats, sigma: f64, h: HKind) -> Result<f64, Error> {
    Ok(1.0 / (dynamic_lambda(kl, sigma, h)? + 1.0))
}

/// Temperature sampling with strength set per step from how much the
/// evidence moves the model: a cascade of the base softmax and a second one
/// at temperature `1 / (h(KL(p_cond || p_uncond)) + 1)`.
///
/// Substituting a static lambda reproduces plain temperature sampling with
/// `T = 1 / (lambda + 1)` exactly, since this is implemented as that very
/// composition.
pub fn kl_guided_policy(
    p_cond: &TokenDist,
    p_uncond: &TokenDist,
    sigma: f64,
    h: HKind,
) -> Result<TokenDist, Error> {
    let kl = kl_divergence(p_cond, p_uncond)?;
    let temperature = dynamic_temperature(kl, sigma, h)?;
    temperature_policy(p_cond, temperature)
}

/// Reweights the base distribution by discriminator-derived value ratios:
/// weights ∝ (Q/V)^lambda * p. Scaling all ratios by a positive constant
/// leaves the output unchanged, so the V denominator is optional.
pub fn classifier_guidance_policy(
    p_cond: &TokenDist,
    q_over_v: &[f64],
    lambda: f64,
) -> Result<TokenDist, Error> {
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(Error::NegativeLambda { value: lambda });
    }
    if q_over_v.len() != p_cond.len() {
        return Err(Error::DimensionMismatch {
            expected: p_cond.len(),
            got: q_over_v.len(),
        });
    }
    if let Some(&bad) = q_over_v.iter().find(|&&r| !(r >= 0.0)) {
        return Err(Error::NegativeGuidanceRatio { value: bad });
    }
    if lambda == 0.0 {
        return Ok(p_cond.clone());
    }
    let weights: Vec<f64> = p_cond
        .log_probs()
        .iter()
        .zip(q_over_v)
        .map(|(&lp, &ratio)| {
            if lp == f64::NEG_INFINITY {
                f64::NEG_INFINITY
            } else {
                lambda * fp::ln(ratio) + lp
            }
        })
        .collect();
    log_normalize(&weights)
}

/// Contrasts the evidence-conditioned and stripped distributions:
/// weights ∝ (p_cond / p_uncond)^lambda * p_cond.
pub fn classifier_free_policy(
    p_cond: &TokenDist,
    p_uncond: &TokenDist,
    lambda: f64,
) -> Result<TokenDist, Error> {
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(Error::NegativeLambda { value: lambda });
    }
    if p_cond.len() != p_uncond.len() {
        return Err(Error::DimensionMismatch {
            expected: p_cond.len(),
            got: p_uncond.len(),
        });
    }
    if lambda == 0.0 {
        return Ok(p_cond.clone());
    }
    let weights: Vec<f64> = p_cond
        .log_probs()
        .iter()
        .zip(p_uncond.log_probs())
        .map(|(&lc, &lu)| {
            if lc == f64::NEG_INFINITY {
                f64::NEG_INFINITY
            } else {
                lc + lambda * (lc - lu)
            }
        })
        .collect();
    log_normalize(&weights)
}

/// Computes the policy a spec prescribes from its inputs.
pub fn policy_dist(spec: &PolicySpec, inputs: &GuidanceInputs) -> Result<TokenDist, Error> {
    spec.validate()?;
    match spec {
        PolicySpec::Greedy => Ok(greedy_policy(&inputs.p_cond)),
        PolicySpec::Temperature { temperature } => temperature_policy(&inputs.p_cond, *temperature),
        PolicySpec::KlGuidedTemperature { sigma, h } => {
            let p_uncond = inputs
                .p_uncond
                .as_ref()
                .ok_or(Error::MissingGuidanceInput { field: "p_uncond" })?;
            kl_guided_policy(&inputs.p_cond, p_uncond, *sigma, *h)
        }
        PolicySpec::ClassifierGuidance { lambda, .. } => {
            let q_over_v = inputs
                .q_over_v
                .as_ref()
                .ok_or(Error::MissingGuidanceInput { field: "q_over_v" })?;
            classifier_guidance_policy(&inputs.p_cond, q_over_v, *lambda)
        }
        PolicySpec::ClassifierFree { lambda } => {
            let p_uncond = inputs
                .p_uncond
                .as_ref()
                .ok_or(Error::MissingGuidanceInput { field: "p_uncond" })?;
            classifier_free_policy(&inputs.p_cond, p_uncond, *lambda)
        }
    }
}
