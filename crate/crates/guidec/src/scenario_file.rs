//! TOML scenario files.
//!
//! ```toml
//! model = "two_step_model.json"
//! prompt = []
//! evidence = "E1"
//! horizon = 3
//! samples = 10000
//! seed = 42
//! rule = { kind = "contains_token", tokens = ["a"] }
//! policy = { kind = "classifier_guidance", lambda = 1.0, q_mode = "base_rollout" }
//! ```
//!
//! The model path is resolved relative to the scenario file's directory.

use std::fmt;

use guidec_core::episode::Scenario;
use guidec_core::policy::{HKind, PolicySpec, QMode};
use guidec_core::state::{TokenId, Vocab};
use guidec_core::value::DiscriminatorRule;
use serde::Deserialize;

#[derive(Debug)]
pub struct ScenarioFileError(pub String);

impl fmt::Display for ScenarioFileError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "bad scenario file: {}", self.0)
    }
}

impl std::error::Error for ScenarioFileError {}

fn bad(msg: impl Into<String>) -> ScenarioFileError {
    ScenarioFileError(msg.into())
}

#[derive(Deserialize)]
pub struct ScenarioFile {
    pub model: String,
    #[serde(default)]
    pub prompt: Vec<String>,
    #[serde(default)]
    pub evidence: Option<String>,
    pub horizon: usize,
    pub samples: usize,
    pub seed: u64,
    pub rule: RuleEntry,
    pub policy: PolicyEntry,
}

#[derive(Deserialize)]
pub struct RuleEntry {
    pub kind: String,
    #[serde(default)]
    pub tokens: Vec<String>,
    #[serde(default)]
    pub sequences: Vec<Vec<String>>,
}

#[derive(Deserialize)]
pub struct PolicyEntry {
    pub kind: String,
    pub lambda: Option<f64>,
    pub temperature: Option<f64>,
    pub sigma: Option<f64>,
    pub h: Option<String>,
    pub q_mode: Option<String>,
}

pub fn scenario_from_toml(text: &str) -> Result<ScenarioFile, ScenarioFileError> {
    toml::from_str(text).map_err(|e| bad(e.to_string()))
}

/// Binds the parsed file to a vocabulary, mapping token strings to indices.
pub fn resolve(file: &ScenarioFile, vocab: &Vocab) -> Result<Scenario, ScenarioFileError> {
    let lookup = |tok: &String| -> Result<TokenId, ScenarioFileError> {
        vocab
            .index_of(tok)
            .ok_or_else(|| bad(format!("token {tok:?} is not in the model vocabulary")))
    };
    let prompt = file
        .prompt
        .iter()
        .map(lookup)
        .collect::<Result<Vec<_>, _>>()?;

    let rule = match file.rule.kind.as_str() {
        "contains_token" => {
            let [tok] = file.rule.tokens.as_slice() else {
                return Err(bad("contains_token takes exactly one entry in `tokens`"));
            };
            DiscriminatorRule::ContainsToken(lookup(tok)?)
        }
        "contains_any" => {
            if file.rule.tokens.is_empty() {
                return Err(bad("contains_any needs a nonempty `tokens` list"));
            }
            DiscriminatorRule::ContainsAny(
                file.rule
                    .tokens
                    .iter()
                    .map(lookup)
                    .collect::<Result<_, _>>()?,
            )
        }
        "sequence_in_set" => {
            if file.rule.sequences.is_empty() {
                return Err(bad("sequence_in_set needs a nonempty `sequences` list"));
            }
            let seqs = file
                .rule
                .sequences
                .iter()
                .map(|seq| seq.iter().map(lookup).collect::<Result<Vec<_>, _>>())
                .collect::<Result<Vec<_>, _>>()?;
            DiscriminatorRule::SequenceInSet(seqs)
        }
        other => return Err(bad(format!("unknown rule kind {other:?}"))),
    };

    let policy = resolve_policy(&file.policy)?;

    Ok(Scenario {
        prompt,
        evidence: file.evidence.clone(),
        rule,
        horizon: file.horizon,
        policy,
        samples: file.samples,
        seed: file.seed,
    })
}

fn resolve_policy(entry: &PolicyEntry) -> Result<PolicySpec, ScenarioFileError> {
    let need = |value: Option<f64>, field: &str| {
        value.ok_or_else(|| bad(format!("policy kind {:?} needs `{field}`", entry.kind)))
    };
    let h = match entry.h.as_deref() {
        None => HKind::Exp2,
        Some("exp2") => HKind::Exp2,
        Some("linear") => HKind::Linear,
        Some(other) => return Err(bad(format!("unknown h shape {other:?}"))),
    };
    let q_mode = match entry.q_mode.as_deref() {
        None => QMode::BaseRollout,
        Some("base_rollout") => QMode::BaseRollout,
        Some("optimal_backward") => QMode::OptimalBackward,
        Some(other) => return Err(bad(format!("unknown q_mode {other:?}"))),
    };
    // hyperparameters that do not belong to the kind are ignored
    Ok(match entry.kind.as_str() {
        "greedy" => PolicySpec::Greedy,
        "temperature" => PolicySpec::Temperature {
            temperature: need(entry.temperature, "temperature")?,
        },
        "kl_guided_temperature" => PolicySpec::KlGuidedTemperature {
            sigma: need(entry.sigma, "sigma")?,
            h,
        },
        "classifier_guidance" => PolicySpec::ClassifierGuidance {
            lambda: need(entry.lambda, "lambda")?,
            q_mode,
        },
        "classifier_free" => PolicySpec::ClassifierFree {
            lambda: need(entry.lambda, "lambda")?,
        },
        other => return Err(bad(format!("unknown policy kind {other:?}"))),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vocab() -> Vocab {
        Vocab::new(vec!["a".into(), "b".into(), "eos".into()], 2).unwrap()
    }

    #[test]
    fn parses_full_scenario() {
        let text = r#"
            model = "m.json"
            prompt = ["a"]
            evidence = "E1"
            horizon = 3
            samples = 100
            seed = 7
            rule = { kind = "contains_token", tokens = ["a"] }
            policy = { kind = "classifier_guidance", lambda = 2.0, q_mode = "optimal_backward" }
        "#;
        let file = scenario_from_toml(text).unwrap();
        let scenario = resolve(&file, &vocab()).unwrap();
        assert_eq!(scenario.prompt, vec![0]);
        assert_eq!(scenario.rule, DiscriminatorRule::ContainsToken(0));
        assert_eq!(
            scenario.policy,
            PolicySpec::ClassifierGuidance {
                lambda: 2.0,
                q_mode: QMode::OptimalBackward
            }
        );
    }

    #[test]
    fn sequence_rule_and_defaults() {
        let text = r#"
            model = "m.json"
            horizon = 4
            samples = 10
            seed = 1
            rule = { kind = "sequence_in_set", sequences = [["a", "eos"], ["b", "a", "eos"]] }
            policy = { kind = "temperature", temperature = 0.5 }
        "#;
        let file = scenario_from_toml(text).unwrap();
        let scenario = resolve(&file, &vocab()).unwrap();
        assert!(scenario.evidence.is_none());
        assert!(scenario.prompt.is_empty());
        assert_eq!(
            scenario.rule,
            DiscriminatorRule::SequenceInSet(vec![vec![0, 2], vec![1, 0, 2]])
        );
    }

    #[test]
    fn irrelevant_hyperparameters_are_ignored() {
        let text = r#"
            model = "m.json"
            horizon = 2
            samples = 1
            seed = 0
            rule = { kind = "contains_any", tokens = ["a", "b"] }
            policy = { kind = "greedy", lambda = 3.0, temperature = 0.1 }
        "#;
        let file = scenario_from_toml(text).unwrap();
        let scenario = resolve(&file, &vocab()).unwrap();
        assert_eq!(scenario.policy, PolicySpec::Greedy);
    }

    #[test]
    fn reports_unknown_tokens_and_kinds() {
        let text = r#"
            model = "m.json"
            horizon = 2
            samples = 1
            seed = 0
            rule = { kind = "contains_token", tokens = ["zzz"] }
            policy = { kind = "greedy" }
        "#;
        let file = scenario_from_toml(text).unwrap();
        assert!(resolve(&file, &vocab()).is_err());

        let text = text.replace("contains_token", "mystery");
        let file = scenario_from_toml(&text).unwrap();
        assert!(resolve(&file, &vocab()).is_err());
    }

    #[test]
    fn missing_hyperparameter_is_an_error() {
        let text = r#"
            model = "m.json"
            horizon = 2
            samples = 1
            seed = 0
            rule = { kind = "contains_token", tokens = ["a"] }
            policy = { kind = "temperature" }
        "#;
        let file = scenario_from_toml(text).unwrap();
        let err = resolve(&file, &vocab()).unwrap_err();
        assert!(err.to_string().contains("temperature"));
    }
}
