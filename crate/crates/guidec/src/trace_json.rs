//! JSON view of an episode trace, with token indices spelled out as strings.

use guidec_core::state::{DecodeState, EpisodeTrace, Vocab};
use serde::Serialize;

#[derive(Serialize)]
pub struct TraceJson {
    pub vocab: Vec<String>,
    pub horizon: usize,
    pub discount: f64,
    pub terminal_reward: u8,
    pub generated: Vec<String>,
    pub steps: Vec<StepJson>,
}

#[derive(Serialize)]
pub struct StepJson {
    pub state: StateJson,
    pub action: String,
    pub forced: bool,
    pub reward: u8,
    /// Probabilities of the distribution the action was drawn from, aligned
    /// with `vocab`.
    pub policy: Vec<f64>,
}

#[derive(Serialize)]
pub struct StateJson {
    pub evidence: Option<String>,
    pub prompt: Vec<String>,
    pub generated: Vec<String>,
}

fn names(vocab: &Vocab, ids: &[usize]) -> Vec<String> {
    ids.iter().map(|&id| vocab.token(id).to_string()).collect()
}

fn state_json(vocab: &Vocab, state: &DecodeState) -> StateJson {
    StateJson {
        evidence: state.evidence_id().map(String::from),
        prompt: names(vocab, state.prompt()),
        generated: names(vocab, state.generated()),
    }
}

pub fn trace_to_json(vocab: &Vocab, trace: &EpisodeTrace) -> String {
    let doc = TraceJson {
        vocab: vocab.tokens().to_vec(),
        horizon: trace.horizon(),
        discount: trace.discount(),
        terminal_reward: trace.terminal_reward(),
        generated: names(vocab, &trace.generated()),
        steps: trace
            .steps()
            .iter()
            .map(|step| StepJson {
                state: state_json(vocab, &step.state),
                action: vocab.token(step.action).to_string(),
                forced: step.forced,
                reward: step.reward,
                policy: step.policy.probs(),
            })
            .collect(),
    };
    let mut out = serde_json::to_string_pretty(&doc).expect("trace serializes");
    out.push('\n');
    out
}
