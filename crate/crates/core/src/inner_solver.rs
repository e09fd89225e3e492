//! Exact inner maximization of the worst-case empirical excess risk.
//!
//! For an excess profile `(p_hat, delta)` and radius `eps` (bits), solves
//!
//! ```text
//! maximize   sum_c p_c * delta_c
//! subject to D(p_hat || p) <= eps,   p on the simplex
//! ```
//!
//! For a non-constant profile and finite radius the constraint is active at
//! the optimum and the KKT conditions give
//!
//! ```text
//! p*_c = lambda0 * p_hat_c / (nu* - delta_c)
//! lambda0 = 1 / sum_c [ p_hat_c / (nu* - delta_c) ]
//! ```
//!
//! with `nu*` the unique root above `max_c delta_c` of
//!
//! ```text
//! g(nu) = sum_c p_hat_c log2(nu - delta_c)
//!       + log2( sum_c p_hat_c / (nu - delta_c) ) - eps
//! ```
//!
//! (`g(nu)` is exactly `D(p_hat || p(nu)) - eps` along the KKT curve, so the
//! root saturates the constraint). `g` decreases monotonically from `+inf`
//! at the pole to `-eps` at infinity.
//!
//! The root is found by geometric bisection in the gap `t = nu - max_c
//! delta_c`, which stays well-conditioned even when the root sits within
//! f64 rounding of the pole; if the root lies below what f64 can resolve
//! (`t < ~1e-290`, requiring `eps / (1 - p_hat_argmax)` of order 10^3), the
//! solution is indistinguishable from the point-mass limit and the solver
//! returns that regime instead.

use serde::Serialize;

use crate::confidence::{validate_simplex, EPS_SENTINEL_BITS};
use crate::error::Error;
use crate::Result;

/// Profiles with `max(delta) - min(delta)` at or below this relative spread
/// are treated as constant.
pub const DEGENERACY_REL_TOL: f64 = 1e-12;

/// Excess values within this distance of the maximum tie for the point
/// mass.
pub const TIE_TOL: f64 = 1e-12;

/// Negative excess entries no lower than this are clamped to zero.
pub const DELTA_NEG_TOL: f64 = 1e-9;

/// Bisection stops once `|g| <= G_TOL` (stricter than the 1e-10 the KKT
/// residual checks demand).
const G_TOL: f64 = 1e-12;

/// Empirical context distribution with per-context excess risks and
/// per-context minimum risks.
///
/// `delta_c = R_hat_c(theta) - r_hat_c` is the empirical excess of context
/// `c`; `r_hat_c` enters only the objective decomposition.
#[derive(Debug, Clone, Serialize)]
pub struct ExcessProfile {
    p_hat: Vec<f64>,
    deltas: Vec<f64>,
    r_hats: Vec<f64>,
}

impl ExcessProfile {
    /// Validates and builds a profile. Excess entries in `[-1e-9, 0)` are
    /// clamped to zero; anything lower is an error.
    pub fn new(p_hat: Vec<f64>, deltas: Vec<f64>, r_hats: Vec<f64>) -> Result<Self> {
        if deltas.len() != p_hat.len() {
            return Err(Error::LengthMismatch { expected: p_hat.len(), got: deltas.len() });
        }
        if r_hats.len() != p_hat.len() {
            return Err(Error::LengthMismatch { expected: p_hat.len(), got: r_hats.len() });
        }
        validate_simplex(&p_hat)?;
        if let Some(i) = p_hat.iter().position(|&v| v == 0.0) {
            return Err(Error::InvalidInput(format!(
                "p_hat[{i}] is zero: every context in a profile must carry mass"
            )));
        }
        let mut deltas = deltas;
        for (i, d) in deltas.iter_mut().enumerate() {
            if !d.is_finite() {
                return Err(Error::InvalidInput(format!("delta[{i}] is not finite")));
            }
            if *d < 0.0 {
                if *d >= -DELTA_NEG_TOL {
                    *d = 0.0;
                } else {
                    return Err(Error::InvalidInput(format!(
                        "delta[{i}] = {d} is negative beyond tolerance {DELTA_NEG_TOL}"
                    )));
                }
            }
        }
        if r_hats.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("r_hat entries must be finite".into()));
        }
        Ok(ExcessProfile { p_hat, deltas, r_hats })
    }

    /// Profile with zero per-context minimum risks (when only the maximized
    /// objective matters, not its decomposition).
    pub fn without_r_hats(p_hat: Vec<f64>, deltas: Vec<f64>) -> Result<Self> {
        let k = p_hat.len();
        Self::new(p_hat, deltas, vec![0.0; k])
    }

    pub fn len(&self) -> usize {
        self.p_hat.len()
    }

    pub fn is_empty(&self) -> bool {
        self.p_hat.is_empty()
    }

    pub fn p_hat(&self) -> &[f64] {
        &self.p_hat
    }

    pub fn deltas(&self) -> &[f64] {
        &self.deltas
    }

    pub fn r_hats(&self) -> &[f64] {
        &self.r_hats
    }

    pub fn max_delta(&self) -> f64 {
        self.deltas.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn spread(&self) -> f64 {
        let min = self.deltas.iter().copied().fold(f64::INFINITY, f64::min);
        self.max_delta() - min
    }

    /// True when the excess values are constant up to relative tolerance.
    pub fn is_degenerate(&self) -> bool {
        self.spread() <= DEGENERACY_REL_TOL * self.max_delta().abs().max(1.0)
    }
}

/// Which branch of the solution applies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Regime {
    /// Finite radius, non-constant profile: KKT interior solution, KL
    /// constraint active.
    Interior,
    /// Constant profile: every feasible p gives the same objective.
    UniformDegenerate,
    /// Infinite radius (or a root below f64 resolution): mass concentrates
    /// on the argmax contexts.
    PointMass,
}

/// The maximizing distribution and its certificates.
#[derive(Debug, Clone, Serialize)]
pub struct LeastFavorable {
    pub regime: Regime,
    /// The maximizer on the simplex.
    pub p_star: Vec<f64>,
    /// KKT dual root; `None` outside the interior regime.
    pub nu_star: Option<f64>,
    /// `nu_star - max_c delta_c`, kept separately because the difference can
    /// round to zero in `nu_star` itself; residuals evaluate stably from it.
    pub nu_gap: Option<f64>,
    /// KKT normalization multiplier; `None` outside the interior regime.
    pub lambda0: Option<f64>,
    /// Reweighting factors `w_c = p*_c / p_hat_c - 1`.
    pub weights: Vec<f64>,
    /// The maximized objective `sum_c p*_c delta_c`.
    pub objective: f64,
}

/// Root of `g` in gap form `t = nu - max_delta`, written as
///
/// ```text
/// g(t) = sum_c p_hat_c log2(t + gap_c)
///      + log2( sum_c p_hat_c / (t + gap_c) ) - eps
/// ```
///
/// with `gap_c = max_delta - delta_c >= 0`. Identical to `g(nu)` but exact
/// near the pole.
fn g_gap(p_hat: &[f64], gaps: &[f64], t: f64, eps: f64) -> f64 {
    let mut log_term = 0.0;
    let mut inv_sum = 0.0;
    for (&ph, &gap) in p_hat.iter().zip(gaps) {
        let v = t + gap;
        log_term += ph * v.log2();
        inv_sum += ph / v;
    }
    log_term + inv_sum.log2() - eps
}

/// Finds the root gap `t* > 0` of `g`. Errors: [`Error::RootBelowResolution`]
/// when the root is below ~1e-290, [`Error::BracketNotFound`] when 200
/// doublings fail to bracket it from above.
fn root_gap(p_hat: &[f64], gaps: &[f64], spread: f64, eps: f64) -> Result<f64> {
    // Lower end: start at the conventional offset and shrink while g has
    // already gone nonpositive there (root closer to the pole).
    let mut t_lo = f64::max(1e-12, 1e-9 * (1.0 + spread));
    while g_gap(p_hat, gaps, t_lo, eps) <= 0.0 {
        t_lo *= 0.25;
        if t_lo < 1e-290 {
            return Err(Error::RootBelowResolution);
        }
    }

    // Upper end: double an initial span until g goes negative.
    let mut t_hi = (1.0 + spread).max(2.0 * t_lo);
    let mut doublings = 0;
    while g_gap(p_hat, gaps, t_hi, eps) > 0.0 {
        t_hi *= 2.0;
        doublings += 1;
        if doublings > 200 {
            return Err(Error::BracketNotFound(200));
        }
    }

    // Geometric bisection: g decreases monotonically in t, and its slope in
    // ln t is O(1), so the final |g| is far below the 1e-10 requirement.
    let mut lo = t_lo.ln();
    let mut hi = t_hi.ln();
    let mut mid = 0.5 * (lo + hi);
    for _ in 0..500 {
        mid = 0.5 * (lo + hi);
        let g_mid = g_gap(p_hat, gaps, mid.exp(), eps);
        if g_mid.abs() <= G_TOL {
            return Ok(mid.exp());
        }
        if g_mid > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-15 {
            break;
        }
    }
    Ok(mid.exp())
}

/// Root `nu*` of the dual equation, in nu form. Preconditions: a
/// non-constant profile and `0 < eps <` [`EPS_SENTINEL_BITS`].
pub fn root_nu(profile: &ExcessProfile, eps: f64) -> Result<f64> {
    if profile.is_degenerate() {
        return Err(Error::ConstantExcessProfile);
    }
    if !(eps > 0.0) {
        return Err(Error::InvalidInput(format!("eps must be positive, got {eps}")));
    }
    if eps >= EPS_SENTINEL_BITS {
        return Err(Error::InvalidInput(
            "eps is the infinite sentinel: the root equation applies to finite radii only".into(),
        ));
    }
    let m = profile.max_delta();
    let gaps: Vec<f64> = profile.deltas().iter().map(|&d| m - d).collect();
    let t = root_gap(profile.p_hat(), &gaps, profile.spread(), eps)?;
    Ok(m + t)
}

/// KKT residual `g` evaluated stably from the gap; used to certify roots.
pub fn kkt_residual(profile: &ExcessProfile, eps: f64, nu_gap: f64) -> f64 {
    let m = profile.max_delta();
    let gaps: Vec<f64> = profile.deltas().iter().map(|&d| m - d).collect();
    g_gap(profile.p_hat(), &gaps, nu_gap, eps)
}

fn degenerate_solution(profile: &ExcessProfile) -> LeastFavorable {
    let objective = profile
        .p_hat()
        .iter()
        .zip(profile.deltas())
        .map(|(&ph, &d)| ph * d)
        .sum();
    LeastFavorable {
        regime: Regime::UniformDegenerate,
        p_star: profile.p_hat().to_vec(),
        nu_star: None,
        nu_gap: None,
        lambda0: None,
        weights: vec![0.0; profile.len()],
        objective,
    }
}

fn point_mass_solution(profile: &ExcessProfile) -> LeastFavorable {
    let m = profile.max_delta();
    let tied: Vec<usize> = (0..profile.len())
        .filter(|&c| profile.deltas()[c] >= m - TIE_TOL)
        .collect();
    let share = 1.0 / tied.len() as f64;
    let mut p_star = vec![0.0; profile.len()];
    for &c in &tied {
        p_star[c] = share;
    }
    let weights: Vec<f64> =
        p_star.iter().zip(profile.p_hat()).map(|(&p, &ph)| p / ph - 1.0).collect();
    LeastFavorable {
        regime: Regime::PointMass,
        p_star,
        nu_star: None,
        nu_gap: None,
        lambda0: None,
        weights,
        objective: m,
    }
}

/// Solves the inner maximization exactly, dispatching on regime.
pub fn solve_least_favorable(profile: &ExcessProfile, eps: f64) -> Result<LeastFavorable> {
    if !(eps > 0.0) {
        return Err(Error::InvalidInput(format!("eps must be positive, got {eps}")));
    }
    if profile.is_degenerate() {
        return Ok(degenerate_solution(profile));
    }
    if eps >= EPS_SENTINEL_BITS {
        return Ok(point_mass_solution(profile));
    }

    let m = profile.max_delta();
    let gaps: Vec<f64> = profile.deltas().iter().map(|&d| m - d).collect();
    let t = match root_gap(profile.p_hat(), &gaps, profile.spread(), eps) {
        Ok(t) => t,
        // The interior solution rounds to the point mass in f64.
        Err(Error::RootBelowResolution) => return Ok(point_mass_solution(profile)),
        Err(e) => return Err(e),
    };

    let denoms: Vec<f64> = gaps.iter().map(|&gap| t + gap).collect();
    let inv_sum: f64 = profile.p_hat().iter().zip(&denoms).map(|(&ph, &d)| ph / d).sum();
    let lambda0 = 1.0 / inv_sum;
    let mut p_star: Vec<f64> =
        profile.p_hat().iter().zip(&denoms).map(|(&ph, &d)| lambda0 * ph / d).collect();
    let total: f64 = p_star.iter().sum();
    for p in &mut p_star {
        *p /= total;
    }
    let weights: Vec<f64> = denoms.iter().map(|&d| lambda0 / d - 1.0).collect();
    let objective = p_star.iter().zip(profile.deltas()).map(|(&p, &d)| p * d).sum();

    Ok(LeastFavorable {
        regime: Regime::Interior,
        p_star,
        nu_star: Some(m + t),
        nu_gap: Some(t),
        lambda0: Some(lambda0),
        weights,
        objective,
    })
}

/// Additive decomposition of the worst-case objective.
///
/// `objective = erm_risk + sum_c p_hat_c w_c delta_c + constant` where the
/// constant `-sum_c p_hat_c r_hat_c` does not depend on the parameter.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct Decomposition {
    pub erm_risk: f64,
    pub weighted_excess: f64,
    pub constant: f64,
}

impl Decomposition {
    pub fn total(&self) -> f64 {
        self.erm_risk + self.weighted_excess + self.constant
    }
}

/// Splits the worst-case objective into the ERM risk, the weight-tilted
/// excess term, and the parameter-free constant.
pub fn decompose_objective(
    profile: &ExcessProfile,
    solution: &LeastFavorable,
    erm_risk: f64,
) -> Result<Decomposition> {
    if solution.weights.len() != profile.len() {
        return Err(Error::LengthMismatch { expected: profile.len(), got: solution.weights.len() });
    }
    let weighted_excess = profile
        .p_hat()
        .iter()
        .zip(&solution.weights)
        .zip(profile.deltas())
        .map(|((&ph, &w), &d)| ph * w * d)
        .sum();
    let constant = -profile
        .p_hat()
        .iter()
        .zip(profile.r_hats())
        .map(|(&ph, &r)| ph * r)
        .sum::<f64>();
    Ok(Decomposition { erm_risk, weighted_excess, constant })
}
