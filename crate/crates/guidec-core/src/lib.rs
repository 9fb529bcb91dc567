//! Guided decoding over symbolic vocabularies.
//!
//! This crate treats autoregressive decoding as a finite-horizon decision
//! process: a state is the prompt plus the partial output (optionally
//! conditioned on an evidence id), an action is the next token, and a binary
//! discriminator scores the finished sequence. On top of that it provides
//!
//! - exact state/action values for the binary terminal reward, computed by
//!   backward induction over the token tree ([`value`]);
//! - five decoding policies in closed form — greedy, temperature,
//!   KL-guided dynamic temperature, classifier guidance, and classifier-free
//!   guidance — together with the scalar objectives each one maximizes
//!   ([`policy`], [`objective`]);
//! - an independent maximizer over the probability simplex used to certify
//!   that every closed form actually attains its objective ([`oracle`]);
//! - an episode runner, metrics, and parameter sweeps ([`episode`]), plus
//!   deterministic verification suites ([`verify`]).
//!
//! Everything is `no_std`-compatible (with `alloc`); enable the `libm`
//! feature instead of `std` for freestanding builds. All randomness flows
//! through the counter-based generator in [`rng`], so traces are
//! bit-reproducible across platforms.

#![cfg_attr(not(feature = "std"), no_std)]

#[cfg(all(not(feature = "std"), not(feature = "libm")))]
compile_error!("guidec-core needs either the `std` or the `libm` feature for float math");

extern crate alloc;

pub mod dist;
pub mod episode;
mod error;
pub mod info;
pub mod model;
pub mod objective;
pub mod oracle;
pub mod policy;
pub mod rng;
pub mod state;
pub mod value;
pub mod verify;

pub use dist::TokenDist;
pub use error::Error;
pub use state::{DecodeState, EpisodeTrace, TokenId, TraceStep, Vocab};

/// Float math shims so the same code builds against std or libm.
pub(crate) mod fp {
    #[cfg(feature = "std")]
    #[inline]
    pub fn ln(x: f64) -> f64 {
        x.ln()
    }
    #[cfg(feature = "std")]
    #[inline]
    pub fn exp(x: f64) -> f64 {
        x.exp()
    }
    #[cfg(feature = "std")]
    #[inline]
    pub fn exp2(x: f64) -> f64 {
        x.exp2()
    }
    #[cfg(feature = "std")]
    #[inline]
    pub fn sqrt(x: f64) -> f64 {
        x.sqrt()
    }

    #[cfg(not(feature = "std"))]
    #[inline]
    pub fn ln(x: f64) -> f64 {
        libm::log(x)
    }
    #[cfg(not(feature = "std"))]
    #[inline]
    pub fn exp(x: f64) -> f64 {
        libm::exp(x)
    }
    #[cfg(not(feature = "std"))]
    #[inline]
    pub fn exp2(x: f64) -> f64 {
        libm::exp2(x)
    }
    #[cfg(not(feature = "std"))]
    #[inline]
    pub fn sqrt(x: f64) -> f64 {
        libm::sqrt(x)
    }
}
