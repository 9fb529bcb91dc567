//! Decoding states, vocabularies, and episode traces.

use alloc::string::String;
use alloc::vec::Vec;

use crate::dist::TokenDist;
use crate::Error;

/// Index into a [`Vocab`]; the runtime currency of every operation.
pub type TokenId = usize;

pub const MAX_VOCAB: usize = 64;

/// An ordered symbolic vocabulary with a designated end-of-sequence token.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Vocab {
    tokens: Vec<String>,
    eos: TokenId,
}

impl Vocab {
    pub fn new(tokens: Vec<String>, eos: TokenId) -> Result<Self, Error> {
        if tokens.len() < 2 {
            return Err(Error::InvalidVocab {
                reason: "need at least two tokens",
            });
        }
        if tokens.len() > MAX_VOCAB {
            return Err(Error::InvalidVocab {
                reason: "more than 64 tokens",
            });
        }
        if eos >= tokens.len() {
            return Err(Error::InvalidVocab {
                reason: "eos index out of range",
            });
        }
        for (i, tok) in tokens.iter().enumerate() {
            if tok.is_empty() {
                return Err(Error::InvalidVocab {
                    reason: "empty token string",
                });
            }
            // "^" is the begin-padding marker and context strings are
            // space-joined, so neither may appear in a token
            if tok == "^" {
                return Err(Error::InvalidVocab {
                    reason: "\"^\" is reserved for context padding",
                });
            }
            if tok.chars().any(char::is_whitespace) {
                return Err(Error::InvalidVocab {
                    reason: "tokens must not contain whitespace",
                });
            }
            if tokens[..i].contains(tok) {
                return Err(Error::InvalidVocab {
                    reason: "duplicate token",
                });
            }
        }
        Ok(Self { tokens, eos })
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn eos(&self) -> TokenId {
        self.eos
    }

    pub fn token(&self, id: TokenId) -> &str {
        &self.tokens[id]
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn index_of(&self, token: &str) -> Option<TokenId> {
        self.tokens.iter().position(|t| t == token)
    }
}

/// Observable state of one decoding step: conditioning evidence (by id),
/// the prompt, and the tokens generated so far.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DecodeState {
    evidence_id: Option<String>,
    prompt: Vec<TokenId>,
    generated: Vec<TokenId>,
}

impl DecodeState {
    pub fn new(evidence_id: Option<String>, prompt: Vec<TokenId>, generated: Vec<TokenId>) -> Self {
        Self {
            evidence_id,
            prompt,
            generated,
        }
    }

    pub fn evidence_id(&self) -> Option<&str> {
        self.evidence_id.as_deref()
    }

    pub fn prompt(&self) -> &[TokenId] {
        &self.prompt
    }

    pub fn generated(&self) -> &[TokenId] {
        &self.generated
    }

    /// The same state viewed without its conditioning evidence.
    pub fn strip_evidence(&self) -> DecodeState {
        DecodeState {
            evidence_id: None,
            prompt: self.prompt.clone(),
            generated: self.generated.clone(),
        }
    }

    pub fn is_terminal(&self, eos: TokenId) -> bool {
        self.generated.last() == Some(&eos)
    }

    /// Appends `action` to the generated sequence. The transition is the
    /// identity on everything else.
    pub fn advance(&self, action: TokenId, eos: TokenId) -> Result<DecodeState, Error> {
        if self.is_terminal(eos) {
            return Err(Error::AdvancePastTerminal);
        }
        let mut next = self.clone();
        next.generated.push(action);
        Ok(next)
    }
}

/// One decoding step as recorded in a trace.
#[derive(Clone, Debug, PartialEq)]
pub struct TraceStep {
    /// State observed before acting.
    pub state: DecodeState,
    /// Token taken.
    pub action: TokenId,
    /// Distribution the action was drawn from (one-hot eos when forced).
    pub policy: TokenDist,
    /// Whether the engine forced eos at the horizon.
    pub forced: bool,
    /// Reward received after the action; zero everywhere except the last step.
    pub reward: u8,
}

/// A finished episode: the step sequence plus its terminal reward.
///
/// The discount is fixed at 1.0, so the return from any step equals the
/// terminal reward.
#[derive(Clone, Debug, PartialEq)]
pub struct EpisodeTrace {
    steps: Vec<TraceStep>,
    terminal_reward: u8,
    horizon: usize,
    discount: f64,
}

impl EpisodeTrace {
    pub(crate) fn new(steps: Vec<TraceStep>, terminal_reward: u8) -> Self {
        debug_assert!(!steps.is_empty());
        debug_assert!(steps[..steps.len() - 1].iter().all(|s| s.reward == 0));
        debug_assert_eq!(steps.last().map(|s| s.reward), Some(terminal_reward));
        let horizon = steps.len();
        Self {
            steps,
            terminal_reward,
            horizon,
            discount: 1.0,
        }
    }

    pub fn steps(&self) -> &[TraceStep] {
        &self.steps
    }

    pub fn terminal_reward(&self) -> u8 {
        self.terminal_reward
    }

    /// Number of actions taken, counting the closing eos.
    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn discount(&self) -> f64 {
        self.discount
    }

    /// The full generated sequence, ending in eos.
    pub fn generated(&self) -> Vec<TokenId> {
        let mut out: Vec<TokenId> = self
            .steps
            .last()
            .map(|s| s.state.generated().to_vec())
            .unwrap_or_default();
        if let Some(last) = self.steps.last() {
            out.push(last.action);
        }
        out
    }
}
