//! The KL confidence set over context distributions.
//!
//! Given `n` samples over `|C|` contexts and a confidence level `beta`, the
//! set contains every simplex point `p` with `D(p_hat || p) <= eps` where
//!
//! ```text
//! eps(n, |C|, beta) = (|C| * log2(n + 1) - log2(1 - beta)) / n     [bits]
//! ```
//!
//! By the method of types, the true context distribution lies in the set
//! with probability at least `beta`, for every `n` and every true
//! distribution. All divergences here are in bits (base-2 logs).

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::rng;
use crate::Result;

/// Radii at or above this many bits are treated as infinite: the set is the
/// whole simplex (closure), as happens at `beta = 1`.
pub const EPS_SENTINEL_BITS: f64 = 1e6;

/// Simplex sums may drift from 1 by at most this much.
pub const SIMPLEX_SUM_TOL: f64 = 1e-9;

/// Confidence radius in bits. Returns [`EPS_SENTINEL_BITS`] at `beta = 1`.
pub fn epsilon_bits(n: usize, num_contexts: usize, beta: f64) -> Result<f64> {
    if n == 0 {
        return Err(Error::InvalidInput("sample count n must be positive".into()));
    }
    if num_contexts == 0 {
        return Err(Error::InvalidInput("context count must be positive".into()));
    }
    if !(beta > 0.0 && beta <= 1.0) {
        return Err(Error::ConfidenceOutOfRange(beta));
    }
    if beta == 1.0 {
        return Ok(EPS_SENTINEL_BITS);
    }
    let k = num_contexts as f64;
    let n = n as f64;
    let eps = (k * (n + 1.0).log2() - (1.0 - beta).log2()) / n;
    Ok(eps.min(EPS_SENTINEL_BITS))
}

/// Validates a nonnegative vector that sums to 1 within [`SIMPLEX_SUM_TOL`].
pub fn validate_simplex(p: &[f64]) -> Result<()> {
    if p.is_empty() {
        return Err(Error::InvalidInput("empty probability vector".into()));
    }
    for (i, &v) in p.iter().enumerate() {
        if !(v >= 0.0) {
            return Err(Error::NegativeEntry { index: i, value: v });
        }
    }
    let sum: f64 = p.iter().sum();
    if (sum - 1.0).abs() > SIMPLEX_SUM_TOL {
        return Err(Error::NotASimplex(sum));
    }
    Ok(())
}

/// KL divergence `D(p_hat || p)` in bits, with the conventions
/// `0 * log(0/q) = 0` and `p * log(p/0) = +inf` for `p > 0`.
pub fn kl_bits(p_hat: &[f64], p: &[f64]) -> Result<f64> {
    if p_hat.len() != p.len() {
        return Err(Error::LengthMismatch { expected: p_hat.len(), got: p.len() });
    }
    validate_simplex(p_hat)?;
    validate_simplex(p)?;
    let mut d = 0.0;
    for (&ph, &q) in p_hat.iter().zip(p) {
        if ph == 0.0 {
            continue;
        }
        if q == 0.0 {
            return Ok(f64::INFINITY);
        }
        d += ph * (ph / q).log2();
    }
    // Rounding can push the sum a hair negative when p_hat == p.
    Ok(d.max(0.0))
}

/// A fully resolved confidence set: level, sample size, context count, and
/// the implied radius in bits.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceParams {
    pub beta: f64,
    pub n: usize,
    pub num_contexts: usize,
    pub eps_bits: f64,
}

impl ConfidenceParams {
    pub fn new(beta: f64, n: usize, num_contexts: usize) -> Result<Self> {
        let eps_bits = epsilon_bits(n, num_contexts, beta)?;
        Ok(ConfidenceParams { beta, n, num_contexts, eps_bits })
    }

    /// Constructs from an explicit radius (test and CLI hook).
    pub fn from_eps(eps_bits: f64, n: usize, num_contexts: usize) -> Result<Self> {
        if !(eps_bits > 0.0) {
            return Err(Error::InvalidInput(format!("eps must be positive, got {eps_bits}")));
        }
        Ok(ConfidenceParams { beta: f64::NAN, n, num_contexts, eps_bits })
    }

    /// True when the radius is the infinite sentinel (whole simplex).
    pub fn is_infinite(&self) -> bool {
        self.eps_bits >= EPS_SENTINEL_BITS
    }
}

/// Membership test: `D(p_hat || p) <= eps`. At an infinite radius every
/// valid simplex point is a member (closure of the set).
pub fn contains(params: &ConfidenceParams, p_hat: &[f64], p: &[f64]) -> Result<bool> {
    if p_hat.len() != p.len() {
        return Err(Error::LengthMismatch { expected: p_hat.len(), got: p.len() });
    }
    validate_simplex(p_hat)?;
    validate_simplex(p)?;
    if params.is_infinite() {
        return Ok(true);
    }
    Ok(kl_bits(p_hat, p)? <= params.eps_bits)
}

/// Monte Carlo coverage of the confidence set: the fraction of `trials` in
/// which the set built from `n` categorical draws of `p_true` contains
/// `p_true`. Empirical frequencies keep zero counts (the KL conventions
/// handle them); contexts are never re-indexed here.
///
/// Deterministic given `seed`; trial `t` draws from the stream
/// `(seed, COVERAGE, t, 0)`.
pub fn simulate_coverage(
    p_true: &[f64],
    n: usize,
    beta: f64,
    trials: usize,
    seed: u64,
) -> Result<f64> {
    validate_simplex(p_true)?;
    if p_true.iter().any(|&v| v == 0.0) {
        return Err(Error::InvalidInput(
            "p_true must be strictly positive: zero-probability contexts never appear".into(),
        ));
    }
    if trials == 0 {
        return Err(Error::InvalidInput("trials must be positive".into()));
    }
    let params = ConfidenceParams::new(beta, n, p_true.len())?;
    let mut hits = 0usize;
    let mut counts = vec![0usize; p_true.len()];
    for t in 0..trials {
        let mut stream = rng::stream(seed, rng::purpose::COVERAGE, t as u64, 0);
        counts.iter_mut().for_each(|c| *c = 0);
        for _ in 0..n {
            counts[rng::categorical(&mut stream, p_true)] += 1;
        }
        let p_hat: Vec<f64> = counts.iter().map(|&c| c as f64 / n as f64).collect();
        if contains(&params, &p_hat, p_true)? {
            hits += 1;
        }
    }
    Ok(hits as f64 / trials as f64)
}
