//! Scalar objectives the closed-form policies maximize.
//!
//! Each decoding algorithm is the argmax over next-token distributions of a
//! weighted sum of information terms anchored at the base model: a guidance
//! reward (expected log value-ratio, expected log evidence-contrast, or a
//! cross-entropy penalty) minus the divergence from the base distribution.
//! Values and gradients are evaluated on raw probability vectors so that
//! finite-difference checks can step slightly off the simplex.

use alloc::vec::Vec;

use crate::dist::TokenDist;
use crate::fp;
use crate::info::kl_divergence;
use crate::policy::{dynamic_lambda, GuidanceInputs, PolicySpec};
use crate::Error;

/// The two algebraic writings of the fixed-temperature objective. They
/// differ by the positive factor 1/T, so they share an argmax but not a
/// value.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum TemperatureForm {
    /// −(1/T − 1)·H(π, p) − KL(π‖p)
    #[default]
    EntropyForm,
    /// −T·KL(π‖p) − (1 − T)·H(π, p)
    CrossEntropyForm,
}

/// An objective J(π) with its analytic gradient.
#[derive(Clone, Debug)]
pub enum Objective {
    /// λ·E_π[log(Q/V)] − KL(π‖p)
    ClassifierGuidance {
        lambda: f64,
        p_cond: TokenDist,
        log_q_over_v: Vec<f64>,
    },
    /// λ·E_π[log(p_cond/p_uncond)] − KL(π‖p_cond)
    ClassifierFree {
        lambda: f64,
        p_cond: TokenDist,
        p_uncond: TokenDist,
    },
    /// −λ(s, s⁻)·H(π, p) − KL(π‖p), λ fixed by the step's divergence
    KlGuidedTemperature { lambda_dyn: f64, p_cond: TokenDist },
    /// See [`TemperatureForm`].
    Temperature {
        temperature: f64,
        p_cond: TokenDist,
        form: TemperatureForm,
    },
    /// −H(π, p): linear, maximized at a vertex
    Greedy { p_cond: TokenDist },
    /// λ·KL(π‖π_fixed) − KL(π‖p): the self-referential contrast variant,
    /// explored only through the oracle (not concave, no closed form)
    SelfReferential {
        lambda: f64,
        p_cond: TokenDist,
        pi_fixed: TokenDist,
    },
}

impl Objective {
    /// Builds the objective a policy spec maximizes from its step inputs.
    pub fn from_spec(spec: &PolicySpec, inputs: &GuidanceInputs) -> Result<Self, Error> {
        spec.validate()?;
        let p_cond = inputs.p_cond.clone();
        match spec {
            PolicySpec::Greedy => Ok(Objective::Greedy { p_cond }),
            PolicySpec::Temperature { temperature } => Ok(Objective::Temperature {
                temperature: *temperature,
                p_cond,
                form: TemperatureForm::EntropyForm,
            }),
            PolicySpec::KlGuidedTemperature { sigma, h } => {
                let p_uncond = inputs
                    .p_uncond
                    .as_ref()
                    .ok_or(Error::MissingGuidanceInput { field: "p_uncond" })?;
                let kl = kl_divergence(&p_cond, p_uncond)?;
                let lambda_dyn = dynamic_lambda(kl, *sigma, *h)?;
                Ok(Objective::KlGuidedTemperature { lambda_dyn, p_cond })
            }
            PolicySpec::ClassifierGuidance { lambda, .. } => {
                let q_over_v = inputs
                    .q_over_v
                    .as_ref()
                    .ok_or(Error::MissingGuidanceInput { field: "q_over_v" })?;
                if q_over_v.len() != p_cond.len() {
                    return Err(Error::DimensionMismatch {
                        expected: p_cond.len(),
                        got: q_over_v.len(),
                    });
                }
                if let Some(&bad) = q_over_v.iter().find(|&&r| !(r >= 0.0)) {
                    return Err(Error::NegativeGuidanceRatio { value: bad });
                }
                Ok(Objective::ClassifierGuidance {
                    lambda: *lambda,
                    p_cond,
                    log_q_over_v: q_over_v.iter().map(|&r| fp::ln(r)).collect(),
                })
            }
            PolicySpec::ClassifierFree { lambda } => {
                let p_uncond = inputs
                    .p_uncond
                    .as_ref()
                    .ok_or(Error::MissingGuidanceInput { field: "p_uncond" })?;
                if p_uncond.len() != p_cond.len() {
                    return Err(Error::DimensionMismatch {
                        expected: p_cond.len(),
                        got: p_uncond.len(),
                    });
                }
                Ok(Objective::ClassifierFree {
                    lambda: *lambda,
                    p_cond,
                    p_uncond: p_uncond.clone(),
                })
            }
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Objective::ClassifierGuidance { p_cond, .. }
            | Objective::ClassifierFree { p_cond, .. }
            | Objective::KlGuidedTemperature { p_cond, .. }
            | Objective::Temperature { p_cond, .. }
            | Objective::Greedy { p_cond }
            | Objective::SelfReferential { p_cond, .. } => p_cond.len(),
        }
    }

    /// J at a raw probability vector.
    pub fn value(&self, pi: &[f64]) -> f64 {
        debug_assert_eq!(pi.len(), self.dim());
        match self {
            Objective::ClassifierGuidance {
                lambda,
                p_cond,
                log_q_over_v,
            } => lambda * dot(pi, log_q_over_v) - kl_raw(pi, p_cond.log_probs()),
            Objective::ClassifierFree {
                lambda,
                p_cond,
                p_uncond,
            } => {
                let mut guidance = 0.0;
                for ((&p, &lc), &lu) in pi.iter().zip(p_cond.log_probs()).zip(p_uncond.log_probs())
                {
                    if p > 0.0 {
                        guidance += p * (lc - lu);
                    }
                }
                lambda * guidance - kl_raw(pi, p_cond.log_probs())
            }
            Objective::KlGuidedTemperature { lambda_dyn, p_cond } => {
                -lambda_dyn * cross_raw(pi, p_cond.log_probs()) - kl_raw(pi, p_cond.log_probs())
            }
            Objective::Temperature {
                temperature,
                p_cond,
                form,
            } => match form {
                TemperatureForm::EntropyForm => {
                    -(1.0 / temperature - 1.0) * cross_raw(pi, p_cond.log_probs())
                        - kl_raw(pi, p_cond.log_probs())
                }
                TemperatureForm::CrossEntropyForm => {
                    -temperature * kl_raw(pi, p_cond.log_probs())
                        - (1.0 - temperature) * cross_raw(pi, p_cond.log_probs())
                }
            },
            Objective::Greedy { p_cond } => -cross_raw(pi, p_cond.log_probs()),
            Objective::SelfReferential {
                lambda,
                p_cond,
                pi_fixed,
            } => lambda * kl_raw(pi, pi_fixed.log_probs()) - kl_raw(pi, p_cond.log_probs()),
        }
    }

    /// Raw partial derivatives of J; project onto the tangent space to
    /// compare simplex-constrained gradients.
    pub fn gradient(&self, pi: &[f64]) -> Vec<f64> {
        debug_assert_eq!(pi.len(), self.dim());
        let n = pi.len();
        let mut grad = Vec::with_capacity(n);
        match self {
            Objective::ClassifierGuidance {
                lambda,
                p_cond,
                log_q_over_v,
            } => {
                for i in 0..n {
                    grad.push(lambda * log_q_over_v[i] - d_kl(pi[i], p_cond.log_probs()[i]));
                }
            }
            Objective::ClassifierFree {
                lambda,
                p_cond,
                p_uncond,
            } => {
                for i in 0..n {
                    let lc = p_cond.log_probs()[i];
                    let lu = p_uncond.log_probs()[i];
                    grad.push(lambda * (lc - lu) - d_kl(pi[i], lc));
                }
            }
            Objective::KlGuidedTemperature { lambda_dyn, p_cond } => {
                for i in 0..n {
                    let lc = p_cond.log_probs()[i];
                    grad.push(lambda_dyn * lc - d_kl(pi[i], lc));
                }
            }
            Objective::Temperature {
                temperature,
                p_cond,
                form,
            } => {
                for i in 0..n {
                    let lc = p_cond.log_probs()[i];
                    grad.push(match form {
                        TemperatureForm::EntropyForm => {
                            (1.0 / temperature - 1.0) * lc - d_kl(pi[i], lc)
                        }
                        TemperatureForm::CrossEntropyForm => {
                            (1.0 - temperature) * lc - temperature * d_kl(pi[i], lc)
                        }
                    });
                }
            }
            Objective::Greedy { p_cond } => grad.extend_from_slice(p_cond.log_probs()),
            Objective::SelfReferential {
                lambda,
                p_cond,
                pi_fixed,
            } => {
                for i in 0..n {
                    grad.push(
                        lambda * d_kl(pi[i], pi_fixed.log_probs()[i])
                            - d_kl(pi[i], p_cond.log_probs()[i]),
                    );
                }
            }
        }
        grad
    }
}

/// Evaluates the objective of `spec` at a candidate policy.
pub fn objective_value(
    spec: &PolicySpec,
    candidate: &TokenDist,
    inputs: &GuidanceInputs,
) -> Result<f64, Error> {
    if candidate.len() != inputs.p_cond.len() {
        return Err(Error::DimensionMismatch {
            expected: inputs.p_cond.len(),
            got: candidate.len(),
        });
    }
    Ok(Objective::from_spec(spec, inputs)?.value(&candidate.probs()))
}

#[inline]
fn dot(pi: &[f64], g: &[f64]) -> f64 {
    pi.iter()
        .zip(g)
        .filter(|(&p, _)| p > 0.0)
        .map(|(&p, &gi)| p * gi)
        .sum()
}

/// Σ π log(π/p) on raw vectors; infinite when π has mass outside p's support.
fn kl_raw(pi: &[f64], log_p: &[f64]) -> f64 {
    let mut kl = 0.0;
    for (&p, &lp) in pi.iter().zip(log_p) {
        if p > 0.0 {
            kl += p * (fp::ln(p) - lp);
        }
    }
    kl
}

/// −Σ π log p on raw vectors.
fn cross_raw(pi: &[f64], log_p: &[f64]) -> f64 {
    let mut h = 0.0;
    for (&p, &lp) in pi.iter().zip(log_p) {
        if p > 0.0 {
            h -= p * lp;
        }
    }
    h
}

/// d/dπ_i of KL(π‖p).
#[inline]
fn d_kl(pi_i: f64, log_p_i: f64) -> f64 {
    fp::ln(pi_i) - log_p_i + 1.0
}
