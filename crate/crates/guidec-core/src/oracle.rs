//! Independent maximization over the probability simplex.
//!
//! The closed-form policies claim to maximize their objectives; this module
//! checks those claims numerically without sharing any code path with them.
//! The workhorse is exponentiated-gradient ascent (multiplicative updates
//! keep iterates on the simplex); a brute-force lattice scan backs it up in
//! two and three dimensions.

use alloc::vec::Vec;

use crate::dist::TokenDist;
use crate::fp;
use crate::info::log_normalize;
use crate::objective::Objective;
use crate::rng::SplitRng;
use crate::Error;

/// Iterates are clipped this far inside the simplex before gradients are
/// taken; entropy-like objectives have singular gradients on the boundary.
pub const INTERIOR_FLOOR: f64 = 1e-12;

/// Minimum probability for a point to count as interior in gradient checks.
pub const GRADCHECK_INTERIOR: f64 = 1e-4;

#[derive(Clone, Debug)]
pub struct OracleConfig {
    /// Constant ascent step.
    pub step: f64,
    pub max_iterations: usize,
    /// Random interior starts besides the uniform one.
    pub restarts: usize,
    /// Convergence threshold on the L∞ change per iteration.
    pub tol: f64,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self {
            step: 0.5,
            max_iterations: 10_000,
            restarts: 3,
            tol: 1e-10,
        }
    }
}

#[derive(Clone, Debug)]
pub struct OracleResult {
    pub dist: TokenDist,
    pub objective: f64,
    /// False when the iteration cap was hit before the tolerance; the best
    /// iterate is still returned.
    pub converged: bool,
    pub iterations: usize,
}

/// Mirror ascent π ← normalize(π · exp(η ∇J(π))) from the uniform start and
/// `restarts` random interior starts; returns the best iterate by objective,
/// ties broken by start order.
pub fn maximize_exponentiated_gradient(
    objective: &Objective,
    config: &OracleConfig,
    seed: u64,
) -> Result<OracleResult, Error> {
    let n = objective.dim();
    if n < 2 {
        return Err(Error::InvalidDistribution {
            reason: "simplex maximization needs dimension at least 2",
        });
    }
    let mut rng = SplitRng::new(seed);
    let mut best: Option<OracleResult> = None;
    for start in 0..=config.restarts {
        let init = if start == 0 {
            TokenDist::uniform(n)
        } else {
            random_interior(n, &mut rng)?
        };
        let run = ascend(objective, init, config);
        let replace = match &best {
            None => true,
            Some(current) => run.objective > current.objective,
        };
        if replace {
            best = Some(run);
        }
    }
    Ok(best.expect("at least the uniform start ran"))
}

fn ascend(objective: &Objective, init: TokenDist, config: &OracleConfig) -> OracleResult {
    let n = objective.dim();
    let mut probs = init.probs();
    clip_interior(&mut probs);
    let mut iterations = 0;
    let mut converged = false;
    while iterations < config.max_iterations {
        iterations += 1;
        let grad = objective.gradient(&probs);
        let mut weights = Vec::with_capacity(n);
        for (&p, &g) in probs.iter().zip(&grad) {
            weights.push(fp::ln(p) + config.step * g);
        }
        let next = log_normalize(&weights).expect("finite update weights");
        let mut next_probs = next.probs();
        clip_interior(&mut next_probs);
        let delta = probs
            .iter()
            .zip(&next_probs)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        probs = next_probs;
        if delta <= config.tol {
            converged = true;
            break;
        }
    }
    let dist = TokenDist::from_probs(&probs).expect("clipped iterate is a distribution");
    let objective_value = objective.value(&probs);
    OracleResult {
        dist,
        objective: objective_value,
        converged,
        iterations,
    }
}

fn clip_interior(probs: &mut [f64]) {
    let mut sum = 0.0;
    for p in probs.iter_mut() {
        if *p < INTERIOR_FLOOR {
            *p = INTERIOR_FLOOR;
        }
        sum += *p;
    }
    for p in probs.iter_mut() {
        *p /= sum;
    }
}

fn random_interior(n: usize, rng: &mut SplitRng) -> Result<TokenDist, Error> {
    let weights: Vec<f64> = (0..n).map(|_| 2.0 * rng.next_f64() - 1.0).collect();
    log_normalize(&weights)
}

/// Exhaustive lattice scan with spacing `step`; n must be 2 or 3.
pub fn maximize_grid(objective: &Objective, step: f64) -> Result<TokenDist, Error> {
    if !(step > 0.0 && step <= 1e-2) {
        return Err(Error::InvalidStep { value: step });
    }
    let n = objective.dim();
    if n != 2 && n != 3 {
        return Err(Error::DimensionTooLarge { dim: n });
    }
    let cells = (1.0 / step).round() as usize;
    let mut best_probs: Option<Vec<f64>> = None;
    let mut best_value = f64::NEG_INFINITY;
    let mut consider = |probs: Vec<f64>| {
        let value = objective.value(&probs);
        if value > best_value {
            best_value = value;
            best_probs = Some(probs);
        }
    };
    if n == 2 {
        for i in 0..=cells {
            let a = (i as f64 * step).min(1.0);
            consider(alloc::vec![a, 1.0 - a]);
        }
    } else {
        for i in 0..=cells {
            let a = (i as f64 * step).min(1.0);
            for j in 0..=(cells - i) {
                let b = (j as f64 * step).min(1.0 - a);
                consider(alloc::vec![a, b, 1.0 - a - b]);
            }
        }
    }
    TokenDist::from_probs(&best_probs.expect("lattice is nonempty"))
}

/// Compares the analytic gradient against central finite differences,
/// both projected onto the simplex tangent space. Returns the worst
/// discrepancy relative to the projected gradient scale.
pub fn gradient_check(objective: &Objective, point: &TokenDist, h: f64) -> Result<f64, Error> {
    let probs = point.probs();
    if probs.len() != objective.dim() {
        return Err(Error::DimensionMismatch {
            expected: objective.dim(),
            got: probs.len(),
        });
    }
    let min_prob = probs.iter().cloned().fold(f64::INFINITY, f64::min);
    if min_prob < GRADCHECK_INTERIOR {
        return Err(Error::PointTooCloseToBoundary { min_prob });
    }
    let analytic = project_tangent(&objective.gradient(&probs));
    let mut fd = Vec::with_capacity(probs.len());
    for i in 0..probs.len() {
        let mut plus = probs.clone();
        plus[i] += h;
        let mut minus = probs.clone();
        minus[i] -= h;
        fd.push((objective.value(&plus) - objective.value(&minus)) / (2.0 * h));
    }
    let fd = project_tangent(&fd);
    let scale = analytic.iter().map(|g| g.abs()).fold(1.0, f64::max);
    let worst = analytic
        .iter()
        .zip(&fd)
        .map(|(a, f)| (a - f).abs())
        .fold(0.0, f64::max);
    Ok(worst / scale)
}

/// Removes the component along the all-ones direction; only the remainder
/// is visible to simplex-constrained moves.
fn project_tangent(grad: &[f64]) -> Vec<f64> {
    let mean: f64 = grad.iter().sum::<f64>() / grad.len() as f64;
    grad.iter().map(|g| g - mean).collect()
}

/// Result of the alternating scheme for the self-referential objective.
#[derive(Clone, Debug)]
pub struct AlternatingResult {
    pub result: OracleResult,
    /// Whether the outer fixed-point loop settled; the maximized objective
    /// is not concave, so this is reported rather than asserted.
    pub outer_converged: bool,
    pub rounds: usize,
}

pub const MAX_OUTER_ROUNDS: usize = 50;

/// Maximizes λ·KL(π‖π_fixed) − KL(π‖p_cond), re-substituting each round's
/// maximizer for the fixed distribution until it stops moving.
pub fn maximize_self_referential(
    p_cond: &TokenDist,
    pi_fixed_init: &TokenDist,
    lambda: f64,
    config: &OracleConfig,
    seed: u64,
) -> Result<AlternatingResult, Error> {
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(Error::NegativeLambda { value: lambda });
    }
    if p_cond.len() != pi_fixed_init.len() {
        return Err(Error::DimensionMismatch {
            expected: p_cond.len(),
            got: pi_fixed_init.len(),
        });
    }
    let mut fixed = pi_fixed_init.clone();
    let mut rounds = 0;
    let mut outer_converged = false;
    let mut last: Option<OracleResult> = None;
    while rounds < MAX_OUTER_ROUNDS {
        rounds += 1;
        let objective = Objective::SelfReferential {
            lambda,
            p_cond: p_cond.clone(),
            pi_fixed: fixed.clone(),
        };
        let result = maximize_exponentiated_gradient(
            &objective,
            config,
            SplitRng::derive(seed, rounds as u64),
        )?;
        let moved = result.dist.linf_distance(&fixed);
        let inner_converged = result.converged;
        fixed = result.dist.clone();
        last = Some(result);
        if moved <= 1e-9 && inner_converged {
            outer_converged = true;
            break;
        }
    }
    Ok(AlternatingResult {
        result: last.expect("at least one round ran"),
        outer_converged,
        rounds,
    })
}
