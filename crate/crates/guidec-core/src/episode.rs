//! Episode execution, metrics, and hyperparameter sweeps.

use alloc::collections::BTreeSet;
use alloc::string::String;
use alloc::vec::Vec;

use crate::dist::TokenDist;
use crate::info::entropy;
use crate::model::LanguageModel;
use crate::policy::{policy_dist, GuidanceInputs, PolicySpec, QMode};
use crate::rng::SplitRng;
use crate::state::{DecodeState, EpisodeTrace, TokenId, TraceStep};
use crate::value::{
    backward_induction, discriminate, DiscriminatorRule, RolloutPolicy, ValueTables,
};
use crate::Error;

/// One concrete decoding setup: what to decode, how, and how often.
#[derive(Clone, Debug, PartialEq)]
pub struct Scenario {
    pub prompt: Vec<TokenId>,
    pub evidence: Option<String>,
    pub rule: DiscriminatorRule,
    pub horizon: usize,
    pub policy: PolicySpec,
    pub samples: usize,
    pub seed: u64,
}

impl Scenario {
    pub fn validate<M: LanguageModel>(&self, model: &M) -> Result<(), Error> {
        let vocab = model.vocab();
        if self.horizon == 0 {
            return Err(Error::InvalidScenario {
                reason: "horizon must be at least 1",
            });
        }
        let mut size: u128 = 1;
        for _ in 0..self.horizon {
            size = size.saturating_mul(vocab.len() as u128);
            if size > crate::value::MAX_STATE_SPACE {
                return Err(Error::StateSpaceTooLarge {
                    vocab: vocab.len(),
                    horizon: self.horizon,
                });
            }
        }
        if self.samples == 0 {
            return Err(Error::InvalidScenario {
                reason: "sample count must be at least 1",
            });
        }
        for &tok in &self.prompt {
            if tok >= vocab.len() {
                return Err(Error::TokenOutOfRange {
                    token: tok,
                    vocab: vocab.len(),
                });
            }
        }
        self.policy.validate()
    }

    /// A copy with one hyperparameter replaced; the name must belong to the
    /// scenario's policy kind.
    pub fn with_param(&self, param: &str, value: f64) -> Result<Scenario, Error> {
        let mut out = self.clone();
        out.policy = match (&self.policy, param) {
            (PolicySpec::Temperature { .. }, "temperature") => {
                PolicySpec::Temperature { temperature: value }
            }
            (PolicySpec::KlGuidedTemperature { h, .. }, "sigma") => {
                PolicySpec::KlGuidedTemperature {
                    sigma: value,
                    h: *h,
                }
            }
            (PolicySpec::ClassifierGuidance { q_mode, .. }, "lambda") => {
                PolicySpec::ClassifierGuidance {
                    lambda: value,
                    q_mode: *q_mode,
                }
            }
            (PolicySpec::ClassifierFree { .. }, "lambda") => {
                PolicySpec::ClassifierFree { lambda: value }
            }
            _ => {
                return Err(Error::UnknownParameter {
                    name: String::from(param),
                })
            }
        };
        Ok(out)
    }

    fn root_state(&self) -> DecodeState {
        DecodeState::new(self.evidence.clone(), self.prompt.clone(), Vec::new())
    }
}

/// A scenario bound to a model, with value tables prebuilt when the policy
/// needs them. Cheap to share; episodes only borrow it.
pub struct Decoder<'a, M: LanguageModel> {
    model: &'a M,
    scenario: Scenario,
    tables: Option<ValueTables>,
}

impl<'a, M: LanguageModel> Decoder<'a, M> {
    pub fn new(model: &'a M, scenario: &Scenario) -> Result<Self, Error> {
        scenario.validate(model)?;
        let tables = match &scenario.policy {
            PolicySpec::ClassifierGuidance { q_mode, .. } => {
                let rollout = match q_mode {
                    QMode::BaseRollout => RolloutPolicy::Base,
                    QMode::OptimalBackward => RolloutPolicy::Guided(scenario.policy.clone()),
                };
                Some(backward_induction(
                    model,
                    &scenario.rule,
                    scenario.evidence.as_deref(),
                    &scenario.prompt,
                    scenario.horizon,
                    &rollout,
                )?)
            }
            _ => None,
        };
        Ok(Self {
            model,
            scenario: scenario.clone(),
            tables,
        })
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    pub fn tables(&self) -> Option<&ValueTables> {
        self.tables.as_ref()
    }

    /// The policy distribution at a free (non-forced) state.
    pub fn action_dist(&self, state: &DecodeState) -> Result<TokenDist, Error> {
        let p_cond = self.model.next_dist(state)?;
        let p_uncond = if self.scenario.policy.needs_uncond() {
            Some(self.model.next_dist(&state.strip_evidence())?)
        } else {
            None
        };
        let q_over_v = if self.scenario.policy.needs_values() {
            let tables = self
                .tables
                .as_ref()
                .expect("tables built for value-guided policies");
            tables.q_over_v(state.generated())
        } else {
            None
        };
        policy_dist(
            &self.scenario.policy,
            &GuidanceInputs {
                p_cond,
                p_uncond,
                q_over_v,
            },
        )
    }

    /// Decodes one episode with the given seed.
    ///
    /// Each step samples the policy and appends the action; eos ends the
    /// episode and the engine forces it at the last horizon slot. The
    /// discriminator bit on the finished sequence is the terminal reward.
    pub fn run(&self, seed: u64) -> Result<EpisodeTrace, Error> {
        let vocab = self.model.vocab();
        let eos = vocab.eos();
        let mut rng = SplitRng::new(seed);
        let mut state = self.scenario.root_state();
        let mut steps: Vec<TraceStep> = Vec::new();
        loop {
            let t = state.generated().len();
            let forced = t == self.scenario.horizon - 1;
            let (policy, action) = if forced {
                (TokenDist::one_hot(vocab.len(), eos), eos)
            } else {
                let dist = self.action_dist(&state)?;
                let action = dist.sample(&mut rng);
                (dist, action)
            };
            let next = state.advance(action, eos)?;
            let done = action == eos;
            let reward = if done {
                discriminate(&self.scenario.rule, next.generated(), eos)?
            } else {
                0
            };
            steps.push(TraceStep {
                state,
                action,
                policy,
                forced,
                reward,
            });
            state = next;
            if done {
                let terminal_reward = steps.last().map(|s| s.reward).unwrap_or(0);
                return Ok(EpisodeTrace::new(steps, terminal_reward));
            }
        }
    }

    /// Sequential batch with derived seeds `base_seed + i`.
    pub fn run_batch(&self, base_seed: u64, n: usize) -> Result<Vec<EpisodeTrace>, Error> {
        (0..n)
            .map(|i| self.run(SplitRng::derive(base_seed, i as u64)))
            .collect()
    }

    /// Monte Carlo estimate of the decode policy's success probability from
    /// `from`; see [`crate::value::rollout_estimate`].
    pub fn rollout_estimate(
        &self,
        from: &DecodeState,
        n_samples: usize,
        seed: u64,
    ) -> Result<(f64, f64), Error> {
        crate::value::rollout_estimate(
            |state| self.action_dist(state),
            &self.scenario.rule,
            self.model.vocab().eos(),
            self.scenario.horizon,
            from,
            n_samples,
            seed,
        )
    }
}

/// Runs a single episode without keeping the decoder around.
pub fn run_episode<M: LanguageModel>(
    model: &M,
    scenario: &Scenario,
    seed: u64,
) -> Result<EpisodeTrace, Error> {
    Decoder::new(model, scenario)?.run(seed)
}

/// Sampled metrics for one batch of episodes.
#[derive(Clone, Debug, PartialEq)]
pub struct MetricsRow {
    pub policy: String,
    /// Set by sweeps: which hyperparameter the row belongs to.
    pub param: Option<String>,
    pub value: Option<f64>,
    pub attribution_rate: f64,
    pub distinct_1: f64,
    pub distinct_2: f64,
    pub mean_loglik: f64,
    pub mean_policy_entropy: f64,
    pub n_samples: usize,
    pub seed: u64,
}

/// Aggregates a batch of traces from one scenario.
///
/// distinct-n pools n-grams across all sampled sequences (eos included);
/// mean log-likelihood covers sampled actions only, since a forced eos was
/// not drawn from the policy; mean policy entropy covers every step.
pub fn compute_metrics<M: LanguageModel>(
    model: &M,
    scenario: &Scenario,
    traces: &[EpisodeTrace],
    seed: u64,
) -> Result<MetricsRow, Error> {
    if traces.is_empty() {
        return Err(Error::EmptyTraceSet);
    }
    let mut successes = 0u64;
    let mut unigrams: BTreeSet<TokenId> = BTreeSet::new();
    let mut bigrams: BTreeSet<(TokenId, TokenId)> = BTreeSet::new();
    let mut total_unigrams = 0usize;
    let mut total_bigrams = 0usize;
    let mut loglik_sum = 0.0;
    let mut loglik_count = 0usize;
    let mut entropy_sum = 0.0;
    let mut step_count = 0usize;

    for trace in traces {
        successes += trace.terminal_reward() as u64;
        let seq = trace.generated();
        total_unigrams += seq.len();
        unigrams.extend(seq.iter().copied());
        if seq.len() >= 2 {
            total_bigrams += seq.len() - 1;
            bigrams.extend(seq.windows(2).map(|w| (w[0], w[1])));
        }
        for step in trace.steps() {
            entropy_sum += entropy(&step.policy);
            step_count += 1;
            if !step.forced {
                let base = model.next_dist(&step.state)?;
                loglik_sum += base.log_prob(step.action);
                loglik_count += 1;
            }
        }
    }

    let n = traces.len();
    Ok(MetricsRow {
        policy: String::from(scenario.policy.kind_name()),
        param: None,
        value: None,
        attribution_rate: successes as f64 / n as f64,
        distinct_1: unigrams.len() as f64 / total_unigrams as f64,
        distinct_2: if total_bigrams == 0 {
            1.0
        } else {
            bigrams.len() as f64 / total_bigrams as f64
        },
        mean_loglik: if loglik_count == 0 {
            0.0
        } else {
            loglik_sum / loglik_count as f64
        },
        mean_policy_entropy: entropy_sum / step_count as f64,
        n_samples: n,
        seed,
    })
}

/// One metrics row per swept value.
///
/// Every row reuses the same episode seeds (`scenario.seed + i`), so a
/// hyperparameter that does not change the policy yields identical rows,
/// and cross-row comparisons see common random numbers.
pub fn sweep<M: LanguageModel>(
    model: &M,
    scenario: &Scenario,
    param: &str,
    values: &[f64],
) -> Result<Vec<MetricsRow>, Error> {
    let mut rows = Vec::with_capacity(values.len());
    for &value in values {
        let point = scenario.with_param(param, value)?;
        let decoder = Decoder::new(model, &point)?;
        let traces = decoder.run_batch(point.seed, point.samples)?;
        let mut row = compute_metrics(model, &point, &traces, point.seed)?;
        row.param = Some(String::from(param));
        row.value = Some(value);
        rows.push(row);
    }
    Ok(rows)
}
