//! Deterministic verification suites.
//!
//! Three suites certify the crate against independent routes: `theorems`
//! pits every closed-form policy against the simplex oracle and the
//! finite-difference gradient check; `identities` exercises the algebraic
//! relations between entropy, cross-entropy, and KL; `valuation` replays
//! backward induction against brute-force path enumeration and Monte Carlo.
//! All randomness comes from fixed internal seeds, so reports do not depend
//! on any caller-supplied seed.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::dist::TokenDist;
use crate::info::{cross_entropy, entropy, kl_divergence, log_normalize};
use crate::model::{LanguageModel, TabularLm};
use crate::objective::Objective;
use crate::oracle::{gradient_check, maximize_exponentiated_gradient, OracleConfig};
use crate::policy::{policy_dist, GuidanceInputs, HKind, PolicySpec, QMode};
use crate::rng::SplitRng;
use crate::state::{DecodeState, TokenId, Vocab};
use crate::value::{
    backward_induction, discriminate, rollout_estimate, DiscriminatorRule, RolloutPolicy,
};
use crate::Error;

const VERIFY_SEED: u64 = 0x9e1d_ec0d_e555_eedd;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Suite {
    Theorems,
    Identities,
    Valuation,
}

impl Suite {
    pub fn name(self) -> &'static str {
        match self {
            Suite::Theorems => "theorems",
            Suite::Identities => "identities",
            Suite::Valuation => "valuation",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "theorems" => Some(Suite::Theorems),
            "identities" => Some(Suite::Identities),
            "valuation" => Some(Suite::Valuation),
            _ => None,
        }
    }
}

#[derive(Clone, Debug)]
pub struct VerifyConfig {
    /// Instances per certified policy family.
    pub trials: usize,
    /// Vocabulary sizes are drawn from 2..=vocab_max.
    pub vocab_max: usize,
    /// L∞ bound between a closed form and the oracle maximizer.
    pub tol_linf: f64,
    /// Bound on the objective gap between them.
    pub tol_gap: f64,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self {
            trials: 100,
            vocab_max: 16,
            tol_linf: 1e-3,
            tol_gap: 1e-6,
        }
    }
}

/// One named check with its worst observed discrepancy.
#[derive(Clone, Debug)]
pub struct VerifyCheck {
    pub name: String,
    pub passed: bool,
    /// Worst-case observed value (interpretation in `detail`).
    pub worst: f64,
    pub threshold: f64,
    pub detail: String,
}

impl VerifyCheck {
    fn upper(name: &str, worst: f64, threshold: f64, detail: String) -> Self {
        Self {
            name: String::from(name),
            passed: worst <= threshold,
            worst,
            threshold,
            detail,
        }
    }

    fn lower(name: &str, worst: f64, threshold: f64, detail: String) -> Self {
        Self {
            name: String::from(name),
            passed: worst >= threshold,
            worst,
            threshold,
            detail,
        }
    }
}

#[derive(Clone, Debug)]
pub struct VerifyReport {
    pub suite: &'static str,
    pub passed: bool,
    pub checks: Vec<VerifyCheck>,
}

pub fn run_suite(suite: Suite, config: &VerifyConfig) -> Result<VerifyReport, Error> {
    let checks = match suite {
        Suite::Theorems => theorems_suite(config)?,
        Suite::Identities => identities_suite(config)?,
        Suite::Valuation => valuation_suite(config)?,
    };
    Ok(VerifyReport {
        suite: suite.name(),
        passed: checks.iter().all(|c| c.passed),
        checks,
    })
}

fn random_dist(n: usize, rng: &mut SplitRng) -> TokenDist {
    let weights: Vec<f64> = (0..n).map(|_| 6.0 * rng.next_f64() - 3.0).collect();
    log_normalize(&weights).expect("finite random logits")
}

fn random_interior_point(n: usize, rng: &mut SplitRng) -> TokenDist {
    // bounded logits keep every coordinate well inside the simplex
    let weights: Vec<f64> = (0..n).map(|_| 2.0 * rng.next_f64() - 1.0).collect();
    log_normalize(&weights).expect("finite random logits")
}

const FAMILIES: [&str; 5] = [
    "classifier_guidance",
    "classifier_free",
    "kl_guided_temperature",
    "temperature",
    "greedy",
];

fn family_instance(
    family: &str,
    trial: usize,
    n: usize,
    rng: &mut SplitRng,
) -> (PolicySpec, GuidanceInputs) {
    let lambdas = [0.25, 1.0, 4.0];
    let temperatures = [0.25, 0.5, 2.0];
    let sigmas = [0.5, 1.0, 2.0];
    let p_cond = random_dist(n, rng);
    match family {
        "classifier_guidance" => {
            let q_over_v: Vec<f64> = (0..n)
                .map(|_| crate::fp::exp(4.0 * rng.next_f64() - 2.0))
                .collect();
            (
                PolicySpec::ClassifierGuidance {
                    lambda: lambdas[trial % 3],
                    q_mode: QMode::BaseRollout,
                },
                GuidanceInputs {
                    p_cond,
                    p_uncond: None,
                    q_over_v: Some(q_over_v),
                },
            )
        }
        "classifier_free" => (
            PolicySpec::ClassifierFree {
                lambda: lambdas[trial % 3],
            },
            GuidanceInputs {
                p_uncond: Some(random_dist(n, rng)),
                p_cond,
                q_over_v: None,
            },
        ),
        "kl_guided_temperature" => (
            PolicySpec::KlGuidedTemperature {
                sigma: sigmas[trial % 3],
                h: HKind::Exp2,
            },
            GuidanceInputs {
                p_uncond: Some(random_dist(n, rng)),
                p_cond,
                q_over_v: None,
            },
        ),
        "temperature" => (
            PolicySpec::Temperature {
                temperature: temperatures[trial % 3],
            },
            GuidanceInputs::cond_only(p_cond),
        ),
        "greedy" => (PolicySpec::Greedy, GuidanceInputs::cond_only(p_cond)),
        other => unreachable!("unknown family {other}"),
    }
}

fn theorems_suite(config: &VerifyConfig) -> Result<Vec<VerifyCheck>, Error> {
    let mut checks = Vec::new();
    let oracle_config = OracleConfig::default();
    for (fam_idx, family) in FAMILIES.iter().enumerate() {
        let mut rng = SplitRng::new(VERIFY_SEED.wrapping_add(fam_idx as u64));
        let mut worst_linf = 0.0f64;
        let mut worst_gap = 0.0f64;
        let mut argmax_mismatches = 0usize;
        let mut nonconverged = 0usize;
        for trial in 0..config.trials {
            let n = 2 + rng.next_below(config.vocab_max.max(2) - 1);
            let (spec, inputs) = family_instance(family, trial, n, &mut rng);
            let closed = policy_dist(&spec, &inputs)?;
            let objective = Objective::from_spec(&spec, &inputs)?;
            let oracle = maximize_exponentiated_gradient(
                &objective,
                &oracle_config,
                VERIFY_SEED ^ (trial as u64),
            )?;
            if !oracle.converged {
                nonconverged += 1;
            }
            let gap = (objective.value(&closed.probs()) - oracle.objective).abs();
            worst_gap = worst_gap.max(gap);
            if *family == "greedy" {
                if closed.argmax() != oracle.dist.argmax() {
                    argmax_mismatches += 1;
                }
            } else {
                worst_linf = worst_linf.max(closed.linf_distance(&oracle.dist));
            }
        }
        if *family == "greedy" {
            checks.push(VerifyCheck::upper(
                &format!("{family}_argmax"),
                argmax_mismatches as f64,
                0.0,
                format!(
                    "vertex argmax mismatches over {} instances ({} oracle runs hit the cap)",
                    config.trials, nonconverged
                ),
            ));
        } else {
            checks.push(VerifyCheck::upper(
                &format!("{family}_linf"),
                worst_linf,
                config.tol_linf,
                format!(
                    "worst L-inf between closed form and oracle over {} instances",
                    config.trials
                ),
            ));
        }
        checks.push(VerifyCheck::upper(
            &format!("{family}_objective_gap"),
            worst_gap,
            config.tol_gap,
            String::from("worst |J(closed form) - J(oracle)|"),
        ));

        // analytic gradients against central differences
        let mut worst_grad = 0.0f64;
        let mut grad_rng = SplitRng::new(VERIFY_SEED.wrapping_mul(31).wrapping_add(fam_idx as u64));
        for trial in 0..20 {
            let n = 2 + grad_rng.next_below(config.vocab_max.max(2) - 1);
            let (spec, inputs) = family_instance(family, trial, n, &mut grad_rng);
            let objective = Objective::from_spec(&spec, &inputs)?;
            let point = random_interior_point(n, &mut grad_rng);
            worst_grad = worst_grad.max(gradient_check(&objective, &point, 1e-6)?);
        }
        checks.push(VerifyCheck::upper(
            &format!("{family}_gradient"),
            worst_grad,
            1e-5,
            String::from(
                "worst relative error, analytic vs central differences at 20 interior points",
            ),
        ));
    }
    Ok(checks)
}

fn identities_suite(config: &VerifyConfig) -> Result<Vec<VerifyCheck>, Error> {
    let mut rng = SplitRng::new(VERIFY_SEED ^ 0x1de);
    let pairs = 1000;
    let mut worst_chain = 0.0f64;
    let mut worst_equal_kl = 0.0f64;
    let mut min_distinct_kl = f64::INFINITY;
    for _ in 0..pairs {
        let n = 2 + rng.next_below(config.vocab_max.max(2) - 1);
        let p = random_dist(n, &mut rng);
        let q = random_dist(n, &mut rng);
        let chain = (cross_entropy(&p, &q)? - (kl_divergence(&p, &q)? + entropy(&p))).abs();
        worst_chain = worst_chain.max(chain);
        worst_equal_kl = worst_equal_kl.max(kl_divergence(&p, &p)?);
        if p.linf_distance(&q) > 1e-6 {
            min_distinct_kl = min_distinct_kl.min(kl_divergence(&p, &q)?);
        }
    }
    let mut checks = alloc::vec![
        VerifyCheck::upper(
            "chain_identity",
            worst_chain,
            1e-10,
            format!("worst |H(p,q) - KL(p||q) - H(p)| over {pairs} random pairs"),
        ),
        VerifyCheck::upper(
            "kl_zero_on_equal",
            worst_equal_kl,
            1e-12,
            String::from("worst KL(p||p)"),
        ),
        VerifyCheck::lower(
            "kl_positive_on_distinct",
            min_distinct_kl,
            1e-9,
            String::from("smallest KL over pairs that differ by more than 1e-6"),
        ),
    ];

    // scaling every q/v entry by a positive constant must not move the policy
    let mut worst_scale = 0.0f64;
    for trial in 0..200 {
        let n = 2 + rng.next_below(config.vocab_max.max(2) - 1);
        let p_cond = random_dist(n, &mut rng);
        let q_over_v: Vec<f64> = (0..n)
            .map(|_| crate::fp::exp(4.0 * rng.next_f64() - 2.0))
            .collect();
        let lambda = [0.25, 1.0, 4.0][trial % 3];
        let base = crate::policy::classifier_guidance_policy(&p_cond, &q_over_v, lambda)?;
        for scale in [1e-6, 0.37, 1e6] {
            let scaled: Vec<f64> = q_over_v.iter().map(|r| r * scale).collect();
            let moved = crate::policy::classifier_guidance_policy(&p_cond, &scaled, lambda)?;
            worst_scale = worst_scale.max(base.linf_distance(&moved));
        }
    }
    checks.push(VerifyCheck::upper(
        "guidance_scale_invariance",
        worst_scale,
        1e-12,
        String::from("worst L-inf shift from rescaling all q/v entries"),
    ));
    Ok(checks)
}

/// Success probability from a state by exhaustive path enumeration:
/// sum over complete sequences of the product of step probabilities times
/// the discriminator bit. Forward products over paths, deliberately sharing
/// nothing with the backward recursion it checks.
pub fn enumerate_success<F>(
    dist_fn: &F,
    rule: &DiscriminatorRule,
    eos: TokenId,
    horizon: usize,
    evidence: Option<&str>,
    prompt: &[TokenId],
    from_suffix: &[TokenId],
) -> Result<f64, Error>
where
    F: Fn(&DecodeState) -> Result<TokenDist, Error>,
{
    fn walk<F>(
        dist_fn: &F,
        rule: &DiscriminatorRule,
        eos: TokenId,
        horizon: usize,
        evidence: Option<&str>,
        prompt: &[TokenId],
        suffix: &mut Vec<TokenId>,
        acc: f64,
        total: &mut f64,
    ) -> Result<(), Error>
    where
        F: Fn(&DecodeState) -> Result<TokenDist, Error>,
    {
        if suffix.len() == horizon - 1 {
            suffix.push(eos);
            *total += acc * discriminate(rule, suffix, eos)? as f64;
            suffix.pop();
            return Ok(());
        }
        let state = DecodeState::new(evidence.map(String::from), prompt.to_vec(), suffix.clone());
        let dist = dist_fn(&state)?;
        for action in 0..dist.len() {
            let p = dist.prob(action);
            if p == 0.0 {
                continue;
            }
            suffix.push(action);
            if action == eos {
                *total += acc * p * discriminate(rule, suffix, eos)? as f64;
            } else {
                walk(
                    dist_fn,
                    rule,
                    eos,
                    horizon,
                    evidence,
                    prompt,
                    suffix,
                    acc * p,
                    total,
                )?;
            }
            suffix.pop();
        }
        Ok(())
    }

    let mut total = 0.0;
    let mut suffix = from_suffix.to_vec();
    walk(
        dist_fn,
        rule,
        eos,
        horizon,
        evidence,
        prompt,
        &mut suffix,
        1.0,
        &mut total,
    )?;
    Ok(total)
}

/// Uniform over two content tokens with zero eos mass at free steps; the
/// smallest scenario whose exact root value (3/4 under a contains-token
/// rule at horizon 3) is a clean rational.
struct UniformPairModel {
    vocab: Vocab,
    row: Vec<f64>,
}

impl UniformPairModel {
    fn new() -> Self {
        let vocab = Vocab::new(alloc::vec!["a".into(), "b".into(), "eos".into()], 2)
            .expect("static vocabulary");
        let half = crate::fp::ln(0.5);
        Self {
            vocab,
            row: alloc::vec![half, half, f64::NEG_INFINITY],
        }
    }
}

impl LanguageModel for UniformPairModel {
    fn vocab(&self) -> &Vocab {
        &self.vocab
    }
    fn next_dist(&self, _state: &DecodeState) -> Result<TokenDist, Error> {
        TokenDist::new(self.row.clone())
    }
}

fn random_rule(n: usize, eos: TokenId, horizon: usize, rng: &mut SplitRng) -> DiscriminatorRule {
    let content = |rng: &mut SplitRng| -> TokenId {
        let mut t = rng.next_below(n);
        if t == eos {
            t = (t + 1) % n;
        }
        t
    };
    match rng.next_below(3) {
        0 => DiscriminatorRule::ContainsToken(content(rng)),
        1 => DiscriminatorRule::ContainsAny(alloc::vec![content(rng), content(rng)]),
        _ => {
            let mut seqs = Vec::new();
            for _ in 0..2 {
                let len = 1 + rng.next_below(horizon.max(2) - 1);
                let mut seq: Vec<TokenId> = (0..len - 1).map(|_| content(rng)).collect();
                seq.push(eos);
                seqs.push(seq);
            }
            DiscriminatorRule::SequenceInSet(seqs)
        }
    }
}

fn random_tabular_model(n: usize, horizon: usize, rng: &mut SplitRng) -> Result<TabularLm, Error> {
    let tokens: Vec<String> = (0..n - 1)
        .map(|i| format!("t{i}"))
        .chain(core::iter::once(String::from("eos")))
        .collect();
    let eos = n - 1;
    let vocab = Vocab::new(tokens, eos)?;
    let mut corpus = Vec::new();
    for evidence in ["E1", "E2"] {
        for _ in 0..3 {
            let len = 1 + rng.next_below(horizon.max(2) - 1);
            let mut seq: Vec<TokenId> =
                (0..len - 1).map(|_| rng.next_below(n.max(2) - 1)).collect();
            seq.push(eos);
            corpus.push((String::from(evidence), seq));
        }
    }
    let order = rng.next_below(3);
    let alpha = [0.5, 1.0][rng.next_below(2)];
    TabularLm::train(vocab, &corpus, order, alpha)
}

fn valuation_suite(_config: &VerifyConfig) -> Result<Vec<VerifyCheck>, Error> {
    let mut rng = SplitRng::new(VERIFY_SEED ^ 0x0a1);
    let mut worst_enum = 0.0f64;
    let mut worst_bellman = 0.0f64;
    let mut worst_drop = 0.0f64;
    let mut scenarios = 0;

    for n in 2..=6usize {
        for horizon in 2..=5usize {
            let model = random_tabular_model(n, horizon, &mut rng)?;
            let eos = model.vocab().eos();
            let rule = random_rule(n, eos, horizon, &mut rng);
            let prompt: Vec<TokenId> = (0..rng.next_below(2))
                .map(|_| rng.next_below(n.max(2) - 1))
                .collect();
            let evidence = Some("E1");
            let tables = backward_induction(
                &model,
                &rule,
                evidence,
                &prompt,
                horizon,
                &RolloutPolicy::Base,
            )?;
            scenarios += 1;

            let dist_fn = |state: &DecodeState| model.next_dist(state);
            for (suffix, sv) in tables.states() {
                // V against forward enumeration from this state
                let enumerated =
                    enumerate_success(&dist_fn, &rule, eos, horizon, evidence, &prompt, suffix)?;
                worst_enum = worst_enum.max((sv.v - enumerated).abs());

                let forced = suffix.len() == horizon - 1;
                if !forced {
                    // Q(s,a) against enumeration from the advanced state
                    for action in 0..n {
                        let expected = if action == eos {
                            let mut terminal = suffix.clone();
                            terminal.push(eos);
                            discriminate(&rule, &terminal, eos)? as f64
                        } else {
                            let mut child = suffix.clone();
                            child.push(action);
                            enumerate_success(
                                &dist_fn, &rule, eos, horizon, evidence, &prompt, &child,
                            )?
                        };
                        worst_enum = worst_enum.max((sv.q[action] - expected).abs());
                    }
                }

                // Bellman identity under the recomputed rollout measure
                let rho = if forced {
                    TokenDist::one_hot(n, eos)
                } else {
                    let state = DecodeState::new(
                        evidence.map(String::from),
                        prompt.clone(),
                        suffix.clone(),
                    );
                    model.next_dist(&state)?
                };
                let dot: f64 = (0..n).map(|a| rho.prob(a) * sv.q[a]).sum();
                worst_bellman = worst_bellman.max((sv.v - dot).abs());
            }

            // guided rollouts may only raise the value they optimize
            for lambda in [0.5, 2.0] {
                let guided = backward_induction(
                    &model,
                    &rule,
                    evidence,
                    &prompt,
                    horizon,
                    &RolloutPolicy::Guided(PolicySpec::ClassifierGuidance {
                        lambda,
                        q_mode: QMode::OptimalBackward,
                    }),
                )?;
                worst_drop = worst_drop.max(tables.root_value() - guided.root_value());
            }
        }
    }

    let mut checks = alloc::vec![
        VerifyCheck::upper(
            "enumeration_match",
            worst_enum,
            1e-12,
            format!("worst |table - enumeration| over V and Q of {scenarios} scenarios"),
        ),
        VerifyCheck::upper(
            "bellman_consistency",
            worst_bellman,
            1e-9,
            String::from("worst |V - sum_a rho(a) Q(a)| over all stored states"),
        ),
        VerifyCheck::upper(
            "guided_monotone_improvement",
            worst_drop,
            1e-9,
            String::from("worst V_base - V_guided at the root"),
        ),
    ];

    // Monte Carlo estimates against the exact two-step value
    let model = UniformPairModel::new();
    let rule = DiscriminatorRule::ContainsToken(0);
    let root = DecodeState::new(None, Vec::new(), Vec::new());
    let exact = 0.75;
    let mut failures = 0usize;
    let trials = 100;
    for trial in 0..trials {
        let (mean, stderr) = rollout_estimate(
            |s| model.next_dist(s),
            &rule,
            model.vocab().eos(),
            3,
            &root,
            10_000,
            VERIFY_SEED.wrapping_add(1000 + trial as u64),
        )?;
        if (mean - exact).abs() > 4.0 * stderr {
            failures += 1;
        }
    }
    checks.push(VerifyCheck::upper(
        "monte_carlo_consistency",
        failures as f64,
        (trials / 100) as f64,
        format!("trials out of {trials} with |mean - {exact}| beyond 4 stderr at n=10000"),
    ));
    Ok(checks)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identities_suite_passes() {
        let report = run_suite(Suite::Identities, &VerifyConfig::default()).unwrap();
        assert!(report.passed, "{:#?}", report.checks);
    }

    #[test]
    fn valuation_suite_passes() {
        let report = run_suite(Suite::Valuation, &VerifyConfig::default()).unwrap();
        assert!(report.passed, "{:#?}", report.checks);
    }

    #[test]
    fn theorems_suite_passes_small() {
        // the acceptance suite runs the full default; keep the unit test quick
        let config = VerifyConfig {
            trials: 15,
            ..VerifyConfig::default()
        };
        let report = run_suite(Suite::Theorems, &config).unwrap();
        assert!(report.passed, "{:#?}", report.checks);
    }

    #[test]
    fn enumeration_matches_two_step_value() {
        let model = UniformPairModel::new();
        let rule = DiscriminatorRule::ContainsToken(0);
        let v = enumerate_success(
            &|s: &DecodeState| model.next_dist(s),
            &rule,
            2,
            3,
            None,
            &[],
            &[],
        )
        .unwrap();
        assert!((v - 0.75).abs() < 1e-15);
    }

    #[test]
    fn reports_are_deterministic() {
        let a = run_suite(Suite::Identities, &VerifyConfig::default()).unwrap();
        let b = run_suite(Suite::Identities, &VerifyConfig::default()).unwrap();
        for (ca, cb) in a.checks.iter().zip(&b.checks) {
            assert_eq!(ca.worst, cb.worst);
            assert_eq!(ca.passed, cb.passed);
        }
    }
}
