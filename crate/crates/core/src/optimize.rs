//! Fitting procedures: empirical risk minimization, minimax fitting over
//! observed contexts, and robust fitting against the confidence set of
//! context distributions.
//!
//! The robust objective is
//!
//! ```text
//! F(theta) = max { sum_c p_c * delta_c(theta) : D(p_hat || p) <= eps }
//! ```
//!
//! with `delta_c(theta) = R_hat_c(theta) - r_hat_c` the empirical excess
//! risk of context `c` over its own minimum. The inner maximum has an
//! exact solution for every `theta` (see [`crate::inner_solver`]), and by
//! Danskin's theorem a subgradient of `F` at `theta` is the `p*`-weighted
//! mean of per-context risk subgradients. The outer minimization is
//! projected subgradient descent warm-started at the empirical risk
//! minimizer, returning the best iterate visited.
//!
//! The minimax baseline protects only the observed contexts: exponential
//! ascent on the adversary's mixture `q` over contexts alternates with
//! descent on the parameter, and the iterate with the smallest maximum
//! per-context risk is returned.

use serde::Serialize;

use crate::confidence::ConfidenceParams;
use crate::error::Error;
use crate::inner_solver::{solve_least_favorable, ExcessProfile, LeastFavorable, Regime};
use crate::model::{partition_by_context, ContextStats, Dataset, LossModel};
use crate::Result;

pub(crate) use crate::model::risk_on_indices;

/// Tolerances and budget for the iterative fits.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, serde::Deserialize)]
#[serde(default)]
pub struct OptimizerOptions {
    /// Base step size; multiplied by the loss model's `step_scale`.
    pub step_size: f64,
    /// Iteration budget.
    pub max_iters: usize,
    /// Gradient or step infinity-norm threshold for convergence.
    pub grad_tol: f64,
    /// Relative objective-change threshold for convergence.
    pub obj_rel_tol: f64,
    /// Overrides the confidence radius of the robust fit, bypassing the
    /// beta-to-radius formula. A diagnostic hook, not serialized.
    #[serde(skip)]
    pub eps_bits_override: Option<f64>,
}

impl Default for OptimizerOptions {
    fn default() -> Self {
        OptimizerOptions {
            step_size: 0.01,
            max_iters: 50_000,
            grad_tol: 1e-8,
            obj_rel_tol: 1e-10,
            eps_bits_override: None,
        }
    }
}

impl OptimizerOptions {
    /// Default options with the per-loss step size (logistic fits tolerate
    /// and need a larger step than the generic default).
    pub fn for_loss<L: LossModel + ?Sized>(loss: &L) -> Self {
        let mut opts = OptimizerOptions::default();
        if loss.name() == "logistic" {
            opts.step_size = 0.05;
        }
        opts
    }

    pub(crate) fn validate(&self) -> Result<()> {
        if !(self.step_size > 0.0 && self.step_size.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "step_size must be positive and finite, got {}",
                self.step_size
            )));
        }
        if self.max_iters == 0 {
            return Err(Error::InvalidInput("max_iters must be at least 1".into()));
        }
        if !(self.grad_tol >= 0.0) || !(self.obj_rel_tol >= 0.0) {
            return Err(Error::InvalidInput("tolerances must be nonnegative".into()));
        }
        if let Some(eps) = self.eps_bits_override {
            if !(eps > 0.0) {
                return Err(Error::InvalidInput(format!(
                    "eps_bits_override must be positive, got {eps}"
                )));
            }
        }
        Ok(())
    }
}

/// Step sizes and round budget for the minimax fit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, serde::Deserialize)]
#[serde(default)]
pub struct GroupDroOptions {
    /// Exponential-ascent rate on the adversary's context mixture.
    pub step_size_q: f64,
    /// Parameter descent step; multiplied by the loss model's `step_scale`.
    pub step_size_theta: f64,
    /// Fixed number of ascent/descent rounds.
    pub rounds: usize,
}

impl Default for GroupDroOptions {
    fn default() -> Self {
        GroupDroOptions { step_size_q: 0.1, step_size_theta: 0.1, rounds: 20_000 }
    }
}

impl GroupDroOptions {
    pub(crate) fn validate(&self) -> Result<()> {
        if !(self.step_size_q > 0.0) || !(self.step_size_theta > 0.0) {
            return Err(Error::InvalidInput("minimax step sizes must be positive".into()));
        }
        if self.rounds == 0 {
            return Err(Error::InvalidInput("rounds must be at least 1".into()));
        }
        Ok(())
    }
}

/// Which fitting procedure produced a result.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Erm,
    MinimaxGroupDro,
    Robust,
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Method::Erm => "erm",
            Method::MinimaxGroupDro => "minimax-group-dro",
            Method::Robust => "robust",
        })
    }
}

/// Echo of the settings a fit actually used.
#[derive(Debug, Clone, Serialize)]
pub struct FitConfig {
    pub step_size: f64,
    pub max_iters: usize,
    pub grad_tol: f64,
    pub obj_rel_tol: f64,
    /// Resolved confidence radius in bits; robust fits only.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eps_bits: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub step_size_q: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub step_size_theta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rounds: Option<usize>,
}

impl FitConfig {
    fn from_opts(opts: &OptimizerOptions) -> Self {
        FitConfig {
            step_size: opts.step_size,
            max_iters: opts.max_iters,
            grad_tol: opts.grad_tol,
            obj_rel_tol: opts.obj_rel_tol,
            eps_bits: None,
            step_size_q: None,
            step_size_theta: None,
            rounds: None,
        }
    }
}

/// Outcome of a fit: the parameter, objective value, and, for the robust
/// method, the least favorable distribution's certificates.
#[derive(Debug, Clone, Serialize)]
pub struct FitResult {
    pub method: Method,
    /// Confidence level; `None` for methods that do not use one.
    pub beta: Option<f64>,
    pub theta: Vec<f64>,
    /// ERM: pooled empirical risk. Minimax: largest per-context risk.
    /// Robust: worst-case empirical excess risk.
    pub objective: f64,
    /// Robust: the least favorable context distribution. Minimax: the
    /// adversary's mixture at the returned iterate.
    pub p_star: Option<Vec<f64>>,
    pub nu_star: Option<f64>,
    pub weights: Option<Vec<f64>>,
    pub regime: Option<Regime>,
    pub iterations: usize,
    pub converged: bool,
    pub warnings: Vec<String>,
    pub config: FitConfig,
}

/// Per-context minimum empirical risks and their minimizers.
#[derive(Debug, Clone, Serialize)]
pub struct PerContextMin {
    /// `r_hat_c`: minimum empirical risk of context `c`.
    pub r_hats: Vec<f64>,
    /// Minimizer for each context.
    pub thetas: Vec<Vec<f64>>,
    pub converged: Vec<bool>,
    pub warnings: Vec<String>,
}

/// Mean empirical risk of every context at `theta` (1-based contexts map
/// to index `c - 1`).
pub fn context_risks<L: LossModel + ?Sized>(loss: &L, ds: &Dataset, theta: &[f64]) -> Vec<f64> {
    (1..=ds.num_contexts())
        .map(|c| risk_on_indices(loss, theta, ds, ds.context_indices(c)))
        .collect()
}

/// Adds the `p`-weighted mean subgradient to `acc`: each context
/// contributes its mean risk subgradient scaled by `p[c]`.
fn add_mixture_gradient<L: LossModel + ?Sized>(
    loss: &L,
    ds: &Dataset,
    p: &[f64],
    theta: &[f64],
    acc: &mut [f64],
) {
    for c in 1..=ds.num_contexts() {
        let idx = ds.context_indices(c);
        let scale = p[c - 1] / idx.len() as f64;
        if scale == 0.0 {
            continue;
        }
        for &i in idx {
            loss.add_scaled_subgradient(theta, &ds.samples()[i], scale, acc);
        }
    }
}

/// Danskin subgradient of the worst-case objective: the least favorable
/// mixture of per-context mean risk subgradients.
pub fn danskin_gradient<L: LossModel + ?Sized>(
    loss: &L,
    ds: &Dataset,
    p_star: &[f64],
    theta: &[f64],
) -> Vec<f64> {
    let mut g = vec![0.0; theta.len()];
    add_mixture_gradient(loss, ds, p_star, theta, &mut g);
    g
}

/// Evaluates the worst-case empirical excess objective at a fixed `theta`:
/// builds the excess profile from the dataset and solves the inner
/// maximization exactly.
pub fn worst_case_excess<L: LossModel + ?Sized>(
    loss: &L,
    ds: &Dataset,
    r_hats: &[f64],
    eps_bits: f64,
    theta: &[f64],
) -> Result<(ExcessProfile, LeastFavorable)> {
    let stats = ContextStats::from_dataset(ds);
    let risks = context_risks(loss, ds, theta);
    let deltas: Vec<f64> = risks.iter().zip(r_hats).map(|(r, m)| r - m).collect();
    let profile = ExcessProfile::new(stats.p_hat, deltas, r_hats.to_vec())?;
    let solution = solve_least_favorable(&profile, eps_bits)?;
    Ok((profile, solution))
}

pub(crate) struct Minimized {
    pub(crate) theta: Vec<f64>,
    pub(crate) objective: f64,
    pub(crate) iterations: usize,
    pub(crate) converged: bool,
}

/// Projected subgradient descent on the mean loss over `samples`, from the
/// projection of the origin, returning the best iterate.
pub(crate) fn minimize_slice<L: LossModel + ?Sized>(
    loss: &L,
    samples: &[crate::model::Sample],
    feature_dim: usize,
    opts: &OptimizerOptions,
) -> Minimized {
    let domain = loss.domain(feature_dim);
    let dim = domain.dim();
    let mut theta = vec![0.0; dim];
    domain.project(&mut theta);
    let inv_n = 1.0 / samples.len() as f64;
    let eta = opts.step_size * loss.step_scale();
    let mut grad = vec![0.0; dim];
    let mut best_theta = theta.clone();
    let mut best_obj = f64::INFINITY;
    let mut prev_obj = f64::INFINITY;
    let mut iterations = opts.max_iters;
    let mut converged = false;
    for t in 0..opts.max_iters {
        let mut obj = 0.0;
        for s in samples {
            obj += loss.loss(&theta, s);
        }
        obj *= inv_n;
        if obj < best_obj {
            best_obj = obj;
            best_theta.copy_from_slice(&theta);
        }
        grad.fill(0.0);
        for s in samples {
            loss.add_scaled_subgradient(&theta, s, inv_n, &mut grad);
        }
        let grad_max = grad.iter().fold(0.0f64, |m, g| m.max(g.abs()));
        if grad_max <= opts.grad_tol {
            iterations = t;
            converged = true;
            break;
        }
        if t > 0 && (obj - prev_obj).abs() <= opts.obj_rel_tol * prev_obj.abs().max(1.0) {
            iterations = t;
            converged = true;
            break;
        }
        prev_obj = obj;
        for (th, g) in theta.iter_mut().zip(&grad) {
            *th -= eta * g;
        }
        domain.project(&mut theta);
    }
    Minimized { theta: best_theta, objective: best_obj, iterations, converged }
}

/// Minimum empirical risk of each context, by the loss model's closed form
/// when it has one and projected subgradient descent otherwise.
pub fn per_context_min<L: LossModel + ?Sized>(
    loss: &L,
    ds: &Dataset,
    opts: &OptimizerOptions,
) -> Result<PerContextMin> {
    opts.validate()?;
    let parts = partition_by_context(ds);
    let mut r_hats = Vec::with_capacity(parts.len());
    let mut thetas = Vec::with_capacity(parts.len());
    let mut converged = Vec::with_capacity(parts.len());
    let mut warnings = Vec::new();
    for (i, part) in parts.iter().enumerate() {
        if part.is_empty() {
            return Err(Error::EmptyContext(i + 1));
        }
        if let Some((theta, value)) = loss.exact_empirical_min(part) {
            r_hats.push(value);
            thetas.push(theta);
            converged.push(true);
        } else {
            let m = minimize_slice(loss, part, ds.feature_dim(), opts);
            if !m.converged {
                warnings.push(format!(
                    "context {} minimum hit the iteration budget ({}) before meeting tolerances",
                    i + 1,
                    opts.max_iters
                ));
            }
            r_hats.push(m.objective);
            thetas.push(m.theta);
            converged.push(m.converged);
        }
    }
    Ok(PerContextMin { r_hats, thetas, converged, warnings })
}

/// Minimizes the pooled empirical risk.
pub fn fit_erm<L: LossModel + ?Sized>(
    loss: &L,
    ds: &Dataset,
    opts: &OptimizerOptions,
) -> Result<FitResult> {
    opts.validate()?;
    let mut warnings = Vec::new();
    let (theta, objective, iterations, converged) =
        if let Some((theta, value)) = loss.exact_empirical_min(ds.samples()) {
            (theta, value, 0, true)
        } else {
            let m = minimize_slice(loss, ds.samples(), ds.feature_dim(), opts);
            if !m.converged {
                warnings.push(format!(
                    "fit hit the iteration budget ({}) before meeting tolerances",
                    opts.max_iters
                ));
            }
            (m.theta, m.objective, m.iterations, m.converged)
        };
    Ok(FitResult {
        method: Method::Erm,
        beta: None,
        theta,
        objective,
        p_star: None,
        nu_star: None,
        weights: None,
        regime: None,
        iterations,
        converged,
        warnings,
        config: FitConfig::from_opts(opts),
    })
}

/// Minimax fit over the observed contexts: exponential ascent on the
/// adversary's context mixture alternating with projected descent on the
/// parameter, warm-started at the empirical risk minimizer. Returns the
/// trajectory iterate with the smallest maximum per-context risk.
pub fn fit_group_dro<L: LossModel + ?Sized>(
    loss: &L,
    ds: &Dataset,
    opts: &OptimizerOptions,
    dro: &GroupDroOptions,
) -> Result<FitResult> {
    opts.validate()?;
    dro.validate()?;
    let k = ds.num_contexts();
    let erm = fit_erm(loss, ds, opts)?;
    let warnings: Vec<String> =
        erm.warnings.iter().map(|w| format!("warm start: {w}")).collect();
    let domain = loss.domain(ds.feature_dim());
    let mut theta = erm.theta;
    let eta = dro.step_size_theta * loss.step_scale();
    let uniform = (k as f64).recip();
    let mut log_q = vec![uniform.ln(); k];
    let mut q = vec![uniform; k];
    let mut grad = vec![0.0; domain.dim()];
    let consider = |risks: &[f64], theta: &[f64], q: &[f64], best: &mut (f64, Vec<f64>, Vec<f64>)| {
        let max_r = risks.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if max_r < best.0 {
            best.0 = max_r;
            best.1.copy_from_slice(theta);
            best.2.copy_from_slice(q);
        }
    };
    let mut best = (f64::INFINITY, theta.clone(), q.clone());
    for _ in 0..dro.rounds {
        let risks = context_risks(loss, ds, &theta);
        consider(&risks, &theta, &q, &mut best);
        // Adversary ascent in log space; logsumexp keeps it exact when one
        // context dominates for many rounds.
        for (lq, r) in log_q.iter_mut().zip(&risks) {
            *lq += dro.step_size_q * r;
        }
        let m = log_q.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = m + log_q.iter().map(|lq| (lq - m).exp()).sum::<f64>().ln();
        for (qi, lq) in q.iter_mut().zip(log_q.iter_mut()) {
            *lq -= lse;
            *qi = lq.exp();
        }
        grad.fill(0.0);
        add_mixture_gradient(loss, ds, &q, &theta, &mut grad);
        for (th, g) in theta.iter_mut().zip(&grad) {
            *th -= eta * g;
        }
        domain.project(&mut theta);
    }
    let final_risks = context_risks(loss, ds, &theta);
    consider(&final_risks, &theta, &q, &mut best);
    let (best_obj, best_theta, best_q) = best;
    let mut config = FitConfig::from_opts(opts);
    config.step_size_q = Some(dro.step_size_q);
    config.step_size_theta = Some(dro.step_size_theta);
    config.rounds = Some(dro.rounds);
    Ok(FitResult {
        method: Method::MinimaxGroupDro,
        beta: None,
        theta: best_theta,
        objective: best_obj,
        p_star: Some(best_q),
        nu_star: None,
        weights: None,
        regime: None,
        iterations: dro.rounds,
        converged: true,
        warnings,
        config,
    })
}

/// Minimizes the worst-case empirical excess risk over the confidence set
/// at level `beta`.
///
/// Each iteration re-solves the inner maximization exactly at the current
/// parameter and descends along the Danskin subgradient. The fit is
/// warm-started at the empirical risk minimizer and returns the best
/// iterate, so its worst-case objective never exceeds the warm start's.
pub fn fit_robust<L: LossModel + ?Sized>(
    loss: &L,
    ds: &Dataset,
    beta: f64,
    opts: &OptimizerOptions,
) -> Result<FitResult> {
    opts.validate()?;
    let conf = ConfidenceParams::new(beta, ds.len(), ds.num_contexts())?;
    let eps = opts.eps_bits_override.unwrap_or(conf.eps_bits);
    let stats = ContextStats::from_dataset(ds);
    let pcm = per_context_min(loss, ds, opts)?;
    let erm = fit_erm(loss, ds, opts)?;
    let mut warnings: Vec<String> = pcm
        .warnings
        .iter()
        .chain(&erm.warnings)
        .map(|w| format!("warm start: {w}"))
        .collect();

    let domain = loss.domain(ds.feature_dim());
    let mut theta = erm.theta;
    let eta = opts.step_size * loss.step_scale();
    let mut grad = vec![0.0; domain.dim()];
    let mut best: Option<(f64, Vec<f64>, LeastFavorable)> = None;
    let mut prev_obj = f64::INFINITY;
    let mut iterations = opts.max_iters;
    let mut converged = false;

    for t in 0..opts.max_iters {
        let risks = context_risks(loss, ds, &theta);
        let deltas: Vec<f64> = risks.iter().zip(&pcm.r_hats).map(|(r, m)| r - m).collect();
        let wrap = |e: Error| Error::SolverAt { iter: t, source: Box::new(e) };
        let profile =
            ExcessProfile::new(stats.p_hat.clone(), deltas, pcm.r_hats.clone()).map_err(wrap)?;
        let solution = solve_least_favorable(&profile, eps).map_err(wrap)?;
        let obj = solution.objective;
        if best.as_ref().map_or(true, |(b, _, _)| obj < *b) {
            best = Some((obj, theta.clone(), solution.clone()));
        }
        if t > 0 && (obj - prev_obj).abs() <= opts.obj_rel_tol * prev_obj.abs().max(1.0) {
            iterations = t;
            converged = true;
            break;
        }
        prev_obj = obj;
        grad.fill(0.0);
        add_mixture_gradient(loss, ds, &solution.p_star, &theta, &mut grad);
        let mut step_max = 0.0f64;
        for (th, g) in theta.iter_mut().zip(&grad) {
            let before = *th;
            *th -= eta * g;
            step_max = step_max.max((*th - before).abs());
        }
        domain.project(&mut theta);
        if step_max <= opts.grad_tol {
            iterations = t + 1;
            converged = true;
            break;
        }
    }
    if !converged {
        warnings.push(format!(
            "robust fit hit the iteration budget ({}) before meeting tolerances",
            opts.max_iters
        ));
    }
    let (objective, theta, solution) =
        best.expect("max_iters >= 1 guarantees at least one evaluated iterate");
    let mut config = FitConfig::from_opts(opts);
    config.eps_bits = Some(eps);
    Ok(FitResult {
        method: Method::Robust,
        beta: Some(beta),
        theta,
        objective,
        p_star: Some(solution.p_star.clone()),
        nu_star: solution.nu_star,
        weights: Some(solution.weights.clone()),
        regime: Some(solution.regime),
        iterations,
        converged,
        warnings,
        config,
    })
}
