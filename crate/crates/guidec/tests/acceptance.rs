//! Acceptance suite: one test per criterion, each printing a pass line.
//!
//! Run with `cargo test -p guidec --test acceptance` (add `-- --nocapture`
//! to see the per-criterion lines).

use std::time::Instant;

use guidec::model_file::model_from_json;
use guidec_core::dist::TokenDist;
use guidec_core::episode::{compute_metrics, Decoder, Scenario};
use guidec_core::info::{entropy, kl_divergence, log_normalize};
use guidec_core::model::{LanguageModel, TabularLm};
use guidec_core::objective::{Objective, TemperatureForm};
use guidec_core::oracle::gradient_check;
use guidec_core::policy::{
    classifier_free_policy, classifier_guidance_policy, dynamic_lambda, greedy_policy,
    kl_guided_policy, temperature_policy, GuidanceInputs, HKind, PolicySpec, QMode,
};
use guidec_core::rng::SplitRng;
use guidec_core::state::{DecodeState, EpisodeTrace};
use guidec_core::value::{rollout_estimate, DiscriminatorRule};
use guidec_core::verify::{run_suite, Suite, VerifyConfig};

fn two_step_model() -> TabularLm {
    model_from_json(include_str!("../../../scenarios/two_step_model.json"))
        .expect("shipped two-step model loads")
}

fn two_step_scenario(policy: PolicySpec, samples: usize) -> Scenario {
    Scenario {
        prompt: vec![],
        evidence: None,
        rule: DiscriminatorRule::ContainsToken(0),
        horizon: 3,
        policy,
        samples,
        seed: 20_240_817,
    }
}

fn random_dist(n: usize, rng: &mut SplitRng) -> TokenDist {
    let weights: Vec<f64> = (0..n).map(|_| 6.0 * rng.next_f64() - 3.0).collect();
    log_normalize(&weights).unwrap()
}

fn interior_dist(n: usize, rng: &mut SplitRng) -> TokenDist {
    let weights: Vec<f64> = (0..n).map(|_| 2.0 * rng.next_f64() - 1.0).collect();
    log_normalize(&weights).unwrap()
}

#[test]
fn criterion_1_theorem_certification() {
    let started = Instant::now();
    let report = run_suite(Suite::Theorems, &VerifyConfig::default()).unwrap();
    let elapsed = started.elapsed();
    for check in &report.checks {
        assert!(
            check.passed,
            "{} failed: worst {:.3e} vs threshold {:.3e}",
            check.name, check.worst, check.threshold
        );
    }
    assert!(
        elapsed.as_secs() < 60,
        "certification took {elapsed:?}, budget is 60 s"
    );
    println!("criterion 1 (theorem certification, 100 instances/family): PASS in {elapsed:?}");
}

#[test]
fn criterion_2_value_exactness() {
    let report = run_suite(Suite::Valuation, &VerifyConfig::default()).unwrap();
    let enumeration = report
        .checks
        .iter()
        .find(|c| c.name == "enumeration_match")
        .unwrap();
    assert!(enumeration.passed, "{enumeration:?}");
    assert!(enumeration.threshold <= 1e-12);
    let bellman = report
        .checks
        .iter()
        .find(|c| c.name == "bellman_consistency")
        .unwrap();
    assert!(bellman.passed, "{bellman:?}");
    assert!(bellman.threshold <= 1e-9);
    let improvement = report
        .checks
        .iter()
        .find(|c| c.name == "guided_monotone_improvement")
        .unwrap();
    assert!(improvement.passed, "{improvement:?}");
    println!(
        "criterion 2 (backward induction vs enumeration to 1e-12, Bellman to 1e-9): PASS (worst {:.3e})",
        enumeration.worst
    );
}

#[test]
fn criterion_3_identity_suite() {
    let report = run_suite(Suite::Identities, &VerifyConfig::default()).unwrap();
    for check in &report.checks {
        assert!(check.passed, "{check:?}");
    }
    let chain = report
        .checks
        .iter()
        .find(|c| c.name == "chain_identity")
        .unwrap();
    let scale = report
        .checks
        .iter()
        .find(|c| c.name == "guidance_scale_invariance")
        .unwrap();
    println!(
        "criterion 3 (chain identity {:.3e} <= 1e-10, denominator invariance {:.3e} <= 1e-12, KL sign): PASS",
        chain.worst, scale.worst
    );
}

#[test]
fn criterion_4_degenerate_reductions() {
    let mut rng = SplitRng::new(4);
    for trial in 0..100 {
        let n = 2 + rng.next_below(15);
        let p_cond = random_dist(n, &mut rng);
        let p_uncond = random_dist(n, &mut rng);
        let q_over_v: Vec<f64> = (0..n).map(|_| 0.1 + 3.0 * rng.next_f64()).collect();
        let sigma = [0.3, 1.0, 2.5][trial % 3];

        // lambda = 0 leaves the base distribution untouched
        let guided = classifier_guidance_policy(&p_cond, &q_over_v, 0.0).unwrap();
        assert_eq!(guided.log_probs(), p_cond.log_probs());
        let contrast = classifier_free_policy(&p_cond, &p_uncond, 0.0).unwrap();
        assert_eq!(contrast.log_probs(), p_cond.log_probs());

        // identical conditioned/stripped distributions mean zero divergence,
        // zero dynamic lambda, and an unchanged policy
        let kl = kl_divergence(&p_cond, &p_cond).unwrap();
        assert_eq!(kl, 0.0);
        assert_eq!(dynamic_lambda(kl, sigma, HKind::Exp2).unwrap(), 0.0);
        let dynamic = kl_guided_policy(&p_cond, &p_cond, sigma, HKind::Exp2).unwrap();
        assert_eq!(dynamic.log_probs(), p_cond.log_probs());

        // unit temperature is the identity
        let warm = temperature_policy(&p_cond, 1.0).unwrap();
        assert_eq!(warm.log_probs(), p_cond.log_probs());

        // substituting the realized lambda statically reproduces plain
        // temperature sampling at T = 1/(lambda+1), bit for bit
        let kl = kl_divergence(&p_cond, &p_uncond).unwrap();
        let lambda = dynamic_lambda(kl, sigma, HKind::Exp2).unwrap();
        let via_dynamic = kl_guided_policy(&p_cond, &p_uncond, sigma, HKind::Exp2).unwrap();
        let via_static = temperature_policy(&p_cond, 1.0 / (lambda + 1.0)).unwrap();
        assert_eq!(via_dynamic.log_probs(), via_static.log_probs());
    }
    println!("criterion 4 (degenerate reductions, 100 random instances): PASS");
}

#[test]
fn criterion_5_greedy_limit() {
    let mut rng = SplitRng::new(5);
    let mut gap_cases = 0;
    for _ in 0..1000 {
        let n = 2 + rng.next_below(15);
        let p = random_dist(n, &mut rng);
        let target = greedy_policy(&p).argmax();
        for &t in &[1e-4, 0.05, 0.25, 1.0, 2.0, 10.0] {
            assert_eq!(
                temperature_policy(&p, t).unwrap().argmax(),
                target,
                "argmax moved at T={t}"
            );
        }
        let mut probs = p.probs();
        probs.sort_by(|a, b| b.partial_cmp(a).unwrap());
        if probs[0] - probs[1] >= 0.01 {
            gap_cases += 1;
            let cold = temperature_policy(&p, 1e-4).unwrap();
            let gap = cold.linf_distance(&greedy_policy(&p));
            assert!(
                gap <= 1e-6,
                "L-inf {gap} at top-two gap {}",
                probs[0] - probs[1]
            );
        }
    }
    assert!(
        gap_cases > 500,
        "gap cases {gap_cases} too rare to be meaningful"
    );
    println!(
        "criterion 5 (greedy limit on 1000 random distributions, {gap_cases} gap cases): PASS"
    );
}

#[test]
fn criterion_6_monte_carlo_consistency() {
    let model = two_step_model();
    let rule = DiscriminatorRule::ContainsToken(0);
    let root = DecodeState::new(None, vec![], vec![]);
    let exact = 0.75;
    let trials = 100;
    let mut failures = 0;
    for trial in 0..trials {
        let (mean, stderr) = rollout_estimate(
            |s| model.next_dist(s),
            &rule,
            model.vocab().eos(),
            3,
            &root,
            10_000,
            60_000 + trial as u64,
        )
        .unwrap();
        if (mean - exact).abs() > 4.0 * stderr {
            failures += 1;
        }
    }
    assert!(
        failures <= 1,
        "{failures} of {trials} trials outside 4 stderr"
    );
    println!(
        "criterion 6 (Monte Carlo within 4 stderr of V=0.75 in {}/{trials} trials): PASS",
        trials - failures
    );
}

#[test]
fn criterion_7_gradient_checks() {
    let mut rng = SplitRng::new(7);
    let make_objectives = |n: usize, rng: &mut SplitRng| -> Vec<(&'static str, Objective)> {
        let p_cond = random_dist(n, rng);
        let p_uncond = random_dist(n, rng);
        let q_over_v: Vec<f64> = (0..n).map(|_| 0.1 + 3.0 * rng.next_f64()).collect();
        vec![
            (
                "classifier_guidance",
                Objective::from_spec(
                    &PolicySpec::ClassifierGuidance {
                        lambda: 1.5,
                        q_mode: QMode::BaseRollout,
                    },
                    &GuidanceInputs {
                        p_cond: p_cond.clone(),
                        p_uncond: None,
                        q_over_v: Some(q_over_v),
                    },
                )
                .unwrap(),
            ),
            (
                "classifier_free",
                Objective::from_spec(
                    &PolicySpec::ClassifierFree { lambda: 2.0 },
                    &GuidanceInputs {
                        p_cond: p_cond.clone(),
                        p_uncond: Some(p_uncond.clone()),
                        q_over_v: None,
                    },
                )
                .unwrap(),
            ),
            (
                "kl_guided_temperature",
                Objective::from_spec(
                    &PolicySpec::KlGuidedTemperature {
                        sigma: 1.0,
                        h: HKind::Exp2,
                    },
                    &GuidanceInputs {
                        p_cond: p_cond.clone(),
                        p_uncond: Some(p_uncond.clone()),
                        q_over_v: None,
                    },
                )
                .unwrap(),
            ),
            (
                "temperature_entropy_form",
                Objective::Temperature {
                    temperature: 0.5,
                    p_cond: p_cond.clone(),
                    form: TemperatureForm::EntropyForm,
                },
            ),
            (
                "temperature_cross_entropy_form",
                Objective::Temperature {
                    temperature: 0.5,
                    p_cond: p_cond.clone(),
                    form: TemperatureForm::CrossEntropyForm,
                },
            ),
            (
                "greedy",
                Objective::Greedy {
                    p_cond: p_cond.clone(),
                },
            ),
            (
                "self_referential",
                Objective::SelfReferential {
                    lambda: 1.2,
                    p_cond,
                    pi_fixed: p_uncond,
                },
            ),
        ]
    };

    let mut families = 0;
    for point_set in 0..20 {
        let n = 2 + (point_set % 8);
        let objectives = make_objectives(n, &mut rng);
        families = objectives.len();
        let point = interior_dist(n, &mut rng);
        for (name, objective) in &objectives {
            let err = gradient_check(objective, &point, 1e-6).unwrap();
            assert!(
                err <= 1e-5,
                "{name} gradient error {err:.3e} at point {point_set}"
            );
        }
    }
    println!("criterion 7 (gradient checks, {families} objectives x 20 interior points): PASS");
}

/// Attribution bits and per-trace mean step entropies, for stderr estimates.
fn batch_stats(traces: &[EpisodeTrace]) -> ((f64, f64), (f64, f64)) {
    let n = traces.len() as f64;
    let bits: Vec<f64> = traces.iter().map(|t| t.terminal_reward() as f64).collect();
    let entropies: Vec<f64> = traces
        .iter()
        .map(|t| t.steps().iter().map(|s| entropy(&s.policy)).sum::<f64>() / t.steps().len() as f64)
        .collect();
    let stat = |xs: &[f64]| {
        let mean = xs.iter().sum::<f64>() / n;
        let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
        (mean, (var / n).sqrt())
    };
    (stat(&bits), stat(&entropies))
}

#[test]
fn criterion_8_tradeoff_behavior() {
    let model = two_step_model();
    let samples = 10_000;

    // guidance strength: attribution up, policy entropy down
    let lambdas = [0.0, 0.5, 1.0, 2.0, 4.0];
    let mut rows = Vec::new();
    for &lambda in &lambdas {
        let scenario = two_step_scenario(
            PolicySpec::ClassifierGuidance {
                lambda,
                q_mode: QMode::OptimalBackward,
            },
            samples,
        );
        let decoder = Decoder::new(&model, &scenario).unwrap();
        let traces = decoder.run_batch(scenario.seed, samples).unwrap();
        let row = compute_metrics(&model, &scenario, &traces, scenario.seed).unwrap();
        let (attr, ent) = batch_stats(&traces);
        rows.push((lambda, row, attr, ent));
    }
    for pair in rows.windows(2) {
        let (l0, r0, a0, e0) = &pair[0];
        let (l1, r1, a1, e1) = &pair[1];
        let attr_tol = 2.0 * (a0.1 + a1.1);
        assert!(
            r1.attribution_rate >= r0.attribution_rate - attr_tol,
            "attribution fell from {} (lambda={l0}) to {} (lambda={l1}), tol {attr_tol}",
            r0.attribution_rate,
            r1.attribution_rate
        );
        let ent_tol = 2.0 * (e0.1 + e1.1);
        assert!(
            r1.mean_policy_entropy <= r0.mean_policy_entropy + ent_tol,
            "entropy rose from {} (lambda={l0}) to {} (lambda={l1}), tol {ent_tol}",
            r0.mean_policy_entropy,
            r1.mean_policy_entropy
        );
    }

    // temperature: per-step entropy is exactly monotone
    let temperatures = [0.25, 0.5, 1.0];
    let mut entropy_rows = Vec::new();
    for &temperature in &temperatures {
        let scenario = two_step_scenario(PolicySpec::Temperature { temperature }, samples);
        let decoder = Decoder::new(&model, &scenario).unwrap();
        let traces = decoder.run_batch(scenario.seed, samples).unwrap();
        let row = compute_metrics(&model, &scenario, &traces, scenario.seed).unwrap();
        entropy_rows.push(row.mean_policy_entropy);
    }
    for pair in entropy_rows.windows(2) {
        assert!(
            pair[1] >= pair[0],
            "entropy not nondecreasing in T: {entropy_rows:?}"
        );
    }

    println!(
        "criterion 8 (lambda sweep attribution {:?} nondecreasing, entropy {:?} nonincreasing; T sweep entropy {:?} nondecreasing): PASS",
        rows.iter().map(|(_, r, _, _)| r.attribution_rate).collect::<Vec<_>>(),
        rows.iter().map(|(_, r, _, _)| r.mean_policy_entropy).collect::<Vec<_>>(),
        entropy_rows
    );
}

#[test]
fn criterion_9_reproducible_sweeps() {
    let exe = env!("CARGO_BIN_EXE_guidec");
    let scenario = concat!(env!("CARGO_MANIFEST_DIR"), "/../../scenarios/two_step.toml");
    let dir = tempfile::tempdir().unwrap();
    let mut outputs = Vec::new();
    for run in 0..2 {
        let out = dir.path().join(format!("sweep{run}.csv"));
        let status = std::process::Command::new(exe)
            .args(["sweep", "--scenario", scenario, "--param", "lambda"])
            .args(["--values", "0,0.5,1,2", "--out"])
            .arg(&out)
            .status()
            .unwrap();
        assert!(status.success());
        outputs.push(std::fs::read(&out).unwrap());
    }
    assert_eq!(outputs[0], outputs[1], "sweep CSV differed between runs");
    let text = String::from_utf8(outputs[0].clone()).unwrap();
    assert!(text.starts_with(guidec::csv_out::HEADER));
    assert_eq!(text.lines().count(), 5);
    println!("criterion 9 (byte-identical sweep CSV across runs): PASS");
}
