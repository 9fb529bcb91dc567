//! Binary terminal discriminators and exact state/action values.
//!
//! With a binary reward paid only at the end of the episode, the value of a
//! state under a rollout policy is exactly the probability that the finished
//! sequence is accepted. [`backward_induction`] computes those probabilities
//! for every reachable state of a bounded-horizon scenario by walking the
//! token tree from the last level toward the root; [`rollout_estimate`] is
//! the Monte Carlo counterpart.

use alloc::borrow::ToOwned;
use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use crate::dist::TokenDist;
use crate::fp;
use crate::model::LanguageModel;
use crate::policy::{classifier_guidance_policy, policy_dist, GuidanceInputs, PolicySpec};
use crate::rng::SplitRng;
use crate::state::{DecodeState, TokenId};
use crate::Error;

/// Floor substituted for an exact zero Q before it enters log(Q/V).
pub const Q_FLOOR: f64 = 1e-9;

/// Enumeration guard for backward induction.
pub const MAX_STATE_SPACE: u128 = 10_000_000;

/// A deterministic accept/reject rule over finished sequences.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum DiscriminatorRule {
    ContainsToken(TokenId),
    ContainsAny(Vec<TokenId>),
    SequenceInSet(Vec<Vec<TokenId>>),
}

/// Applies a rule to a finished sequence (which must end in eos).
pub fn discriminate(
    rule: &DiscriminatorRule,
    terminal_sequence: &[TokenId],
    eos: TokenId,
) -> Result<u8, Error> {
    if terminal_sequence.last() != Some(&eos) {
        return Err(Error::NonTerminalSequence);
    }
    let hit = match rule {
        DiscriminatorRule::ContainsToken(tok) => terminal_sequence.contains(tok),
        DiscriminatorRule::ContainsAny(set) => {
            terminal_sequence.iter().any(|tok| set.contains(tok))
        }
        DiscriminatorRule::SequenceInSet(set) => set.iter().any(|s| s == terminal_sequence),
    };
    Ok(hit as u8)
}

/// Measure the future steps follow while values are computed.
#[derive(Clone, Debug, PartialEq)]
pub enum RolloutPolicy {
    /// The base model.
    Base,
    /// The given policy, evaluated against the values of the already-finished
    /// later levels (the backward fixed point).
    Guided(PolicySpec),
}

impl RolloutPolicy {
    fn describe(&self) -> String {
        match self {
            RolloutPolicy::Base => "base model".to_owned(),
            RolloutPolicy::Guided(spec) => {
                let mut s = String::from("guided: ");
                s.push_str(spec.kind_name());
                s
            }
        }
    }
}

/// Exact V and Q for one (evidence, prompt, horizon) scenario, keyed by the
/// generated suffix.
#[derive(Clone, Debug)]
pub struct ValueTables {
    states: BTreeMap<Vec<TokenId>, StateValues>,
    horizon: usize,
    vocab_size: usize,
    eos: TokenId,
    policy_used: String,
}

/// Values stored per state. At the forced-eos level only the eos entry of
/// `q` carries value; the rollout policy there is one-hot, so the Bellman
/// identity still holds.
#[derive(Clone, Debug)]
pub struct StateValues {
    pub v: f64,
    pub q: Vec<f64>,
}

impl ValueTables {
    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn policy_used(&self) -> &str {
        &self.policy_used
    }

    pub fn root_value(&self) -> f64 {
        self.states[&Vec::new()].v
    }

    pub fn v(&self, suffix: &[TokenId]) -> Option<f64> {
        self.states.get(suffix).map(|sv| sv.v)
    }

    pub fn q(&self, suffix: &[TokenId]) -> Option<&[f64]> {
        self.states.get(suffix).map(|sv| sv.q.as_slice())
    }

    /// Q(s,·)/V(s) with zero Qs floored. When V(s) = 0 no action can reach
    /// the reward and the ratios are uninformative ones.
    pub fn q_over_v(&self, suffix: &[TokenId]) -> Option<Vec<f64>> {
        let sv = self.states.get(suffix)?;
        if sv.v == 0.0 {
            return Some(alloc::vec![1.0; self.vocab_size]);
        }
        Some(sv.q.iter().map(|&q| floor_q(q) / sv.v).collect())
    }

    pub fn states(&self) -> impl Iterator<Item = (&Vec<TokenId>, &StateValues)> {
        self.states.iter()
    }

    pub fn eos(&self) -> TokenId {
        self.eos
    }
}

#[inline]
fn floor_q(q: f64) -> f64 {
    if q == 0.0 {
        Q_FLOOR
    } else {
        q
    }
}

/// Exact values for every reachable state, from the terminal level toward
/// the root.
///
/// At the last level the engine forces eos, so Q there is the discriminator
/// bit itself; at earlier levels Q(s, a) is the value of the advanced state
/// (or the bit, when a is eos), and V aggregates Q under the rollout policy.
pub fn backward_induction<M: LanguageModel>(
    model: &M,
    rule: &DiscriminatorRule,
    evidence: Option<&str>,
    prompt: &[TokenId],
    horizon: usize,
    rollout: &RolloutPolicy,
) -> Result<ValueTables, Error> {
    let vocab = model.vocab();
    let n = vocab.len();
    let eos = vocab.eos();
    if horizon == 0 {
        return Err(Error::InvalidScenario {
            reason: "horizon must be at least 1",
        });
    }
    let mut size: u128 = 1;
    for _ in 0..horizon {
        size = size.saturating_mul(n as u128);
        if size > MAX_STATE_SPACE {
            return Err(Error::StateSpaceTooLarge { vocab: n, horizon });
        }
    }
    if let RolloutPolicy::Guided(spec) = rollout {
        spec.validate()?;
    }

    let free_tokens: Vec<TokenId> = (0..n).filter(|&t| t != eos).collect();
    let mut levels: Vec<Vec<Vec<TokenId>>> = Vec::with_capacity(horizon);
    levels.push(alloc::vec![Vec::new()]);
    for t in 1..horizon {
        let mut next = Vec::with_capacity(levels[t - 1].len() * free_tokens.len());
        for suffix in &levels[t - 1] {
            for &tok in &free_tokens {
                let mut child = suffix.clone();
                child.push(tok);
                next.push(child);
            }
        }
        levels.push(next);
    }

    let mut states: BTreeMap<Vec<TokenId>, StateValues> = BTreeMap::new();
    for t in (0..horizon).rev() {
        for suffix in &levels[t] {
            let mut terminal = suffix.clone();
            terminal.push(eos);
            let eos_bit = discriminate(rule, &terminal, eos)? as f64;

            let (q, rho) = if t == horizon - 1 {
                let mut q = alloc::vec![0.0; n];
                q[eos] = eos_bit;
                (q, TokenDist::one_hot(n, eos))
            } else {
                let mut q = alloc::vec![0.0; n];
                for &a in free_tokens.iter() {
                    let mut child = suffix.clone();
                    child.push(a);
                    q[a] = states[&child].v;
                }
                q[eos] = eos_bit;
                let state =
                    DecodeState::new(evidence.map(String::from), prompt.to_vec(), suffix.clone());
                let rho = rollout_dist(model, rollout, &state, &q)?;
                (q, rho)
            };

            // V is the Bellman aggregate of Q under the rollout measure
            let v: f64 = rho
                .log_probs()
                .iter()
                .zip(&q)
                .map(|(&lp, &qa)| fp::exp(lp) * qa)
                .sum();
            debug_assert!((-1e-12..=1.0 + 1e-12).contains(&v));
            states.insert(suffix.clone(), StateValues { v, q });
        }
    }

    Ok(ValueTables {
        states,
        horizon,
        vocab_size: n,
        eos,
        policy_used: rollout.describe(),
    })
}

/// Rollout distribution at a free state given the q values already known
/// for it.
fn rollout_dist<M: LanguageModel>(
    model: &M,
    rollout: &RolloutPolicy,
    state: &DecodeState,
    q: &[f64],
) -> Result<TokenDist, Error> {
    let p_cond = model.next_dist(state)?;
    match rollout {
        RolloutPolicy::Base => Ok(p_cond),
        RolloutPolicy::Guided(spec) => match spec {
            PolicySpec::ClassifierGuidance { lambda, .. } => {
                // the V denominator is a constant per state and may be
                // dropped; floored Q alone determines the tilt
                let floored: Vec<f64> = q.iter().map(|&qa| floor_q(qa)).collect();
                classifier_guidance_policy(&p_cond, &floored, *lambda)
            }
            _ => {
                let p_uncond = if spec.needs_uncond() {
                    Some(model.next_dist(&state.strip_evidence())?)
                } else {
                    None
                };
                policy_dist(
                    spec,
                    &GuidanceInputs {
                        p_cond,
                        p_uncond,
                        q_over_v: None,
                    },
                )
            }
        },
    }
}

/// Monte Carlo estimate of the success probability from `from`, following
/// the per-step distributions of `dist_fn` and forcing eos at the horizon.
///
/// Returns (mean, standard error). Episode i draws from the derived seed
/// `seed + i`, so batches are reproducible under any scheduling.
pub fn rollout_estimate<F>(
    dist_fn: F,
    rule: &DiscriminatorRule,
    eos: TokenId,
    horizon: usize,
    from: &DecodeState,
    n_samples: usize,
    seed: u64,
) -> Result<(f64, f64), Error>
where
    F: Fn(&DecodeState) -> Result<TokenDist, Error>,
{
    if n_samples == 0 {
        return Err(Error::EmptyInput);
    }
    if from.generated().len() >= horizon || from.is_terminal(eos) {
        return Err(Error::InvalidScenario {
            reason: "rollout start state has no remaining steps",
        });
    }
    let mut successes: u64 = 0;
    for i in 0..n_samples {
        let mut rng = SplitRng::new(SplitRng::derive(seed, i as u64));
        let mut generated = from.generated().to_vec();
        loop {
            let t = generated.len();
            let action = if t == horizon - 1 {
                eos
            } else {
                let state = DecodeState::new(
                    from.evidence_id().map(String::from),
                    from.prompt().to_vec(),
                    generated.clone(),
                );
                dist_fn(&state)?.sample(&mut rng)
            };
            generated.push(action);
            if action == eos {
                break;
            }
        }
        successes += discriminate(rule, &generated, eos)? as u64;
    }
    let n = n_samples as f64;
    let mean = successes as f64 / n;
    let stderr = if n_samples < 2 {
        0.0
    } else {
        let var = n / (n - 1.0) * mean * (1.0 - mean);
        fp::sqrt(var / n)
    };
    Ok((mean, stderr))
}
