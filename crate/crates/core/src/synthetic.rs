//! Synthetic heterogeneous-context generators: a ten-context stock-control
//! population, a three-context binary classification population, and a
//! small two-context stock desk.
//!
//! Each generator is specified by a sampler that knows the true context
//! distribution and can draw a sample conditionally on a context. Dataset
//! generation draws contexts from the true distribution (the desk uses
//! fixed counts instead) and features conditionally, all from one named
//! deterministic stream, so a (seed, run) pair pins the dataset bytes.

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::model::{Dataset, Sample};
use crate::rng::{self, Stream};
use crate::Result;

/// A population over contexts: the true context distribution plus
/// conditional sampling.
pub trait ContextSampler {
    fn num_contexts(&self) -> usize;

    /// True context probabilities, all strictly positive.
    fn p_true(&self) -> &[f64];

    /// Draws one sample conditionally on `context` (1-based).
    fn sample_context(&self, context: usize, rng: &mut Stream) -> Sample;
}

fn validate_probs(p: &[f64]) -> Result<()> {
    crate::confidence::validate_simplex(p)?;
    if let Some(i) = p.iter().position(|&v| v <= 0.0) {
        return Err(Error::InvalidInput(format!(
            "context probability {i} must be strictly positive"
        )));
    }
    Ok(())
}

/// Linear interpolation across the context index: contexts 1..=k sweep
/// `[lo, hi]` evenly; a single context sits at `lo`.
fn sweep(lo: f64, hi: f64, c: usize, k: usize) -> f64 {
    if k <= 1 {
        lo
    } else {
        lo + (hi - lo) * (c - 1) as f64 / (k - 1) as f64
    }
}

/// Configuration of the ten-context stock population. Context `c` has
/// median unit cost `mu_c` sweeping 1 to 7, demand slope `a_c` sweeping
/// 0.1 to 7, and demand intercept `b_c` sweeping 15 to 30; the first
/// context carries most of the mass.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct StockConfig {
    pub num_contexts: usize,
    /// Training sample size.
    pub n: usize,
    /// Mass of the first context; the rest split evenly.
    pub p_first: f64,
    /// Unit price of the associated stock-control loss. The default keeps
    /// every context profitable while separating the pooled, worst-risk,
    /// and worst-excess optima, so the three fitting methods land at
    /// visibly different stock levels.
    pub r: f64,
    pub theta_max: f64,
    /// When false (the default), `mu_c` is the median unit cost:
    /// `x = mu_c * exp(N(0, var))`. When true, `mu_c` is the mean of
    /// `ln x`, which inflates costs by `exp(mu_c)` and makes stocking
    /// unprofitable in the high-cost contexts.
    pub mu_is_log_mean: bool,
    /// Variance of the cost's log-normal exponent.
    pub cost_log_var: f64,
    /// Demand noise variance.
    pub demand_var: f64,
}

impl Default for StockConfig {
    fn default() -> Self {
        StockConfig {
            num_contexts: 10,
            n: 400,
            p_first: 0.7,
            r: 12.0,
            theta_max: 100.0,
            mu_is_log_mean: false,
            cost_log_var: 0.25,
            demand_var: 4.0,
        }
    }
}

/// Per-context stock parameters after resolving the sweeps.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct StockContext {
    /// Location of the cost's log: `ln(mu_c)` under the median reading,
    /// `mu_c` under the log-mean reading.
    pub cost_log_location: f64,
    /// Demand slope on the unit cost.
    pub demand_slope: f64,
    /// Demand intercept.
    pub demand_intercept: f64,
}

/// Sampler for [`StockConfig`].
#[derive(Debug, Clone)]
pub struct StockSampler {
    p_true: Vec<f64>,
    contexts: Vec<StockContext>,
    cost_log_var: f64,
    demand_var: f64,
}

impl StockSampler {
    pub fn new(cfg: &StockConfig) -> Result<Self> {
        let k = cfg.num_contexts;
        if k == 0 {
            return Err(Error::InvalidInput("num_contexts must be at least 1".into()));
        }
        if cfg.n == 0 {
            return Err(Error::InvalidInput("n must be at least 1".into()));
        }
        if !(cfg.r > 0.0) || !(cfg.theta_max > 0.0) {
            return Err(Error::InvalidInput("r and theta_max must be positive".into()));
        }
        if !(cfg.cost_log_var > 0.0) || !(cfg.demand_var > 0.0) {
            return Err(Error::InvalidInput("variances must be positive".into()));
        }
        let p_true = if k == 1 {
            vec![1.0]
        } else {
            if !(cfg.p_first > 0.0 && cfg.p_first < 1.0) {
                return Err(Error::InvalidInput(format!(
                    "p_first must be in (0, 1) with {k} contexts, got {}",
                    cfg.p_first
                )));
            }
            let rest = (1.0 - cfg.p_first) / (k - 1) as f64;
            std::iter::once(cfg.p_first).chain(std::iter::repeat(rest).take(k - 1)).collect()
        };
        let contexts = (1..=k)
            .map(|c| {
                let mu = sweep(1.0, 7.0, c, k);
                StockContext {
                    cost_log_location: if cfg.mu_is_log_mean { mu } else { mu.ln() },
                    demand_slope: sweep(0.1, 7.0, c, k),
                    demand_intercept: sweep(15.0, 30.0, c, k),
                }
            })
            .collect();
        Ok(StockSampler {
            p_true,
            contexts,
            cost_log_var: cfg.cost_log_var,
            demand_var: cfg.demand_var,
        })
    }

    pub fn contexts(&self) -> &[StockContext] {
        &self.contexts
    }
}

impl ContextSampler for StockSampler {
    fn num_contexts(&self) -> usize {
        self.contexts.len()
    }

    fn p_true(&self) -> &[f64] {
        &self.p_true
    }

    fn sample_context(&self, context: usize, rng: &mut Stream) -> Sample {
        let p = &self.contexts[context - 1];
        let x = rng::lognormal(rng, p.cost_log_location, self.cost_log_var);
        let y = rng::normal(rng, p.demand_slope * x + p.demand_intercept, self.demand_var);
        Sample { x: vec![x], y: y.max(0.0) }
    }
}

/// Configuration of the three-context classification population. The
/// contexts share the label rule `y ~ Bernoulli(sigma(x1))` but shift the
/// second feature: `x2 ~ N(x1 + a_c + 2*(1 - 2y), 4)` with
/// `a_c in {-8, 0, 8}` and `x1 ~ Unif[-5 + mu_c, 5 + mu_c]`,
/// `mu_c in {-1, 0, 1}`. The posterior log odds are `2*x1 - x2 + a_c`:
/// linear in the features, but with a context-dependent intercept no
/// single linear classifier matches everywhere.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct ClassifyConfig {
    /// Training sample size.
    pub n: usize,
    /// True context probabilities (three contexts).
    pub p_true: Vec<f64>,
    /// Variance of the second feature around its conditional mean.
    pub noise_var: f64,
}

impl Default for ClassifyConfig {
    fn default() -> Self {
        ClassifyConfig { n: 1000, p_true: vec![0.8, 0.1, 0.1], noise_var: 4.0 }
    }
}

/// Per-context classification parameters.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ClassifyContext {
    /// Center of the uniform first feature.
    pub x1_shift: f64,
    /// Additive shift of the second feature.
    pub x2_shift: f64,
}

/// Sampler for [`ClassifyConfig`].
#[derive(Debug, Clone)]
pub struct ClassifySampler {
    p_true: Vec<f64>,
    contexts: [ClassifyContext; 3],
    noise_var: f64,
}

impl ClassifySampler {
    pub fn new(cfg: &ClassifyConfig) -> Result<Self> {
        if cfg.n == 0 {
            return Err(Error::InvalidInput("n must be at least 1".into()));
        }
        if cfg.p_true.len() != 3 {
            return Err(Error::LengthMismatch { expected: 3, got: cfg.p_true.len() });
        }
        validate_probs(&cfg.p_true)?;
        if !(cfg.noise_var > 0.0) {
            return Err(Error::InvalidInput("noise_var must be positive".into()));
        }
        let contexts = [
            ClassifyContext { x1_shift: -1.0, x2_shift: -8.0 },
            ClassifyContext { x1_shift: 0.0, x2_shift: 0.0 },
            ClassifyContext { x1_shift: 1.0, x2_shift: 8.0 },
        ];
        Ok(ClassifySampler { p_true: cfg.p_true.clone(), contexts, noise_var: cfg.noise_var })
    }

    pub fn contexts(&self) -> &[ClassifyContext] {
        &self.contexts
    }

    /// Posterior log odds of the positive class given the features, the
    /// optimal score for context `c`.
    pub fn bayes_log_odds(&self, context: usize, x1: f64, x2: f64) -> f64 {
        2.0 * x1 - x2 + self.contexts[context - 1].x2_shift
    }
}

impl ContextSampler for ClassifySampler {
    fn num_contexts(&self) -> usize {
        3
    }

    fn p_true(&self) -> &[f64] {
        &self.p_true
    }

    fn sample_context(&self, context: usize, rng: &mut Stream) -> Sample {
        let p = &self.contexts[context - 1];
        let x1 = rng::uniform(rng, -5.0 + p.x1_shift, 5.0 + p.x1_shift);
        let sigma = 1.0 / (1.0 + (-x1).exp());
        let y = f64::from(rng::bernoulli(rng, sigma));
        let label_shift = if y == 1.0 { -2.0 } else { 2.0 };
        let x2 = rng::normal(rng, x1 + p.x2_shift + label_shift, self.noise_var);
        Sample { x: vec![x1, x2], y }
    }
}

/// One side of the two-context stock desk.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct DeskContext {
    /// Location of the unit cost's log: `x = exp(N(location, var))`.
    pub cost_log_location: f64,
    pub cost_log_var: f64,
    pub demand_slope: f64,
    pub demand_intercept: f64,
    pub demand_var: f64,
}

/// A two-context stock desk with fixed per-context counts: a large
/// low-volatility book and a small aggressive one.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct DeskConfig {
    pub n1: usize,
    pub n2: usize,
    pub r: f64,
    pub theta_max: f64,
    pub context1: DeskContext,
    pub context2: DeskContext,
}

impl Default for DeskConfig {
    fn default() -> Self {
        DeskConfig {
            n1: 90,
            n2: 10,
            r: 10.0,
            theta_max: 100.0,
            context1: DeskContext {
                cost_log_location: 1.0,
                cost_log_var: 0.25,
                demand_slope: 0.5,
                demand_intercept: 12.0,
                demand_var: 4.0,
            },
            context2: DeskContext {
                cost_log_location: 1.2,
                cost_log_var: 0.25,
                demand_slope: 2.0,
                demand_intercept: 21.0,
                demand_var: 16.0,
            },
        }
    }
}

/// Sampler for [`DeskConfig`].
#[derive(Debug, Clone)]
pub struct DeskSampler {
    p_true: Vec<f64>,
    contexts: [DeskContext; 2],
}

impl DeskSampler {
    pub fn new(cfg: &DeskConfig) -> Result<Self> {
        if cfg.n1 == 0 || cfg.n2 == 0 {
            return Err(Error::InvalidInput("both desk contexts need samples".into()));
        }
        if !(cfg.r > 0.0) || !(cfg.theta_max > 0.0) {
            return Err(Error::InvalidInput("r and theta_max must be positive".into()));
        }
        for (i, c) in [cfg.context1, cfg.context2].iter().enumerate() {
            if !(c.cost_log_var > 0.0) || !(c.demand_var > 0.0) {
                return Err(Error::InvalidInput(format!(
                    "desk context {} variances must be positive",
                    i + 1
                )));
            }
        }
        let n = (cfg.n1 + cfg.n2) as f64;
        Ok(DeskSampler {
            p_true: vec![cfg.n1 as f64 / n, cfg.n2 as f64 / n],
            contexts: [cfg.context1, cfg.context2],
        })
    }
}

impl ContextSampler for DeskSampler {
    fn num_contexts(&self) -> usize {
        2
    }

    fn p_true(&self) -> &[f64] {
        &self.p_true
    }

    fn sample_context(&self, context: usize, rng: &mut Stream) -> Sample {
        let p = &self.contexts[context - 1];
        let x = rng::lognormal(rng, p.cost_log_location, p.cost_log_var);
        let y = rng::normal(rng, p.demand_slope * x + p.demand_intercept, p.demand_var);
        Sample { x: vec![x], y: y.max(0.0) }
    }
}

/// Provenance of a generated dataset.
#[derive(Debug, Clone, Serialize)]
pub struct GenMetadata {
    /// Random number generation recipe.
    pub algorithm: &'static str,
    pub seed: u64,
    pub run: u64,
    pub scenario: String,
    pub num_contexts: usize,
    pub n: usize,
    /// Realized per-context counts.
    pub counts: Vec<usize>,
    /// True context distribution the contexts were drawn from.
    pub p_true: Vec<f64>,
}

/// Draws `n` samples with contexts from the sampler's true mixture, on the
/// generation stream keyed by `(seed, run)`.
pub fn gen_from_sampler(
    sampler: &dyn ContextSampler,
    n: usize,
    seed: u64,
    run: u64,
) -> Result<Dataset> {
    let mut stream = rng::stream(seed, rng::purpose::GEN, run, 0);
    let mut records = Vec::with_capacity(n);
    for _ in 0..n {
        let c = rng::categorical(&mut stream, sampler.p_true()) + 1;
        let s = sampler.sample_context(c, &mut stream);
        records.push((c as i64, s.x, s.y));
    }
    let declared: Vec<i64> = (1..=sampler.num_contexts() as i64).collect();
    Dataset::from_records_declared(records, &declared)
}

/// Draws a dataset with exactly `counts[c-1]` samples from context `c`.
pub fn gen_with_counts(
    sampler: &dyn ContextSampler,
    counts: &[usize],
    seed: u64,
    run: u64,
) -> Result<Dataset> {
    if counts.len() != sampler.num_contexts() {
        return Err(Error::LengthMismatch { expected: sampler.num_contexts(), got: counts.len() });
    }
    if counts.iter().any(|&c| c == 0) {
        return Err(Error::InvalidInput("every context needs at least one sample".into()));
    }
    let mut stream = rng::stream(seed, rng::purpose::GEN, run, 0);
    let mut records = Vec::with_capacity(counts.iter().sum());
    for (i, &count) in counts.iter().enumerate() {
        for _ in 0..count {
            let s = sampler.sample_context(i + 1, &mut stream);
            records.push((i as i64 + 1, s.x, s.y));
        }
    }
    Dataset::from_records(records)
}

/// Draws a stock training set: contexts from the true mixture, costs and
/// demands conditionally.
pub fn gen_stock(cfg: &StockConfig, seed: u64, run: u64) -> Result<Dataset> {
    let sampler = StockSampler::new(cfg)?;
    gen_from_sampler(&sampler, cfg.n, seed, run)
}

/// Draws a classification training set.
pub fn gen_classify(cfg: &ClassifyConfig, seed: u64, run: u64) -> Result<Dataset> {
    let sampler = ClassifySampler::new(cfg)?;
    gen_from_sampler(&sampler, cfg.n, seed, run)
}

/// Draws the desk dataset with its fixed per-context counts.
pub fn gen_desk(cfg: &DeskConfig, seed: u64, run: u64) -> Result<Dataset> {
    let sampler = DeskSampler::new(cfg)?;
    gen_with_counts(&sampler, &[cfg.n1, cfg.n2], seed, run)
}

/// Builds the provenance record for a generated dataset.
pub fn describe(
    sampler: &dyn ContextSampler,
    ds: &Dataset,
    scenario: &str,
    seed: u64,
    run: u64,
) -> GenMetadata {
    let stats = crate::model::ContextStats::from_dataset(ds);
    GenMetadata {
        algorithm: rng::ALGORITHM,
        seed,
        run,
        scenario: scenario.to_string(),
        num_contexts: sampler.num_contexts(),
        n: ds.len(),
        counts: stats.counts,
        p_true: sampler.p_true().to_vec(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stock_sweeps_hit_the_documented_endpoints() {
        let sampler = StockSampler::new(&StockConfig::default()).unwrap();
        let c = sampler.contexts();
        assert_eq!(c.len(), 10);
        assert!((c[0].cost_log_location - 1f64.ln()).abs() < 1e-15);
        assert!((c[0].demand_slope - 0.1).abs() < 1e-15);
        assert!((c[0].demand_intercept - 15.0).abs() < 1e-15);
        assert!((c[9].cost_log_location - 7f64.ln()).abs() < 1e-15);
        assert!((c[9].demand_slope - 7.0).abs() < 1e-15);
        assert!((c[9].demand_intercept - 30.0).abs() < 1e-15);
        // Context 4 of 10 sits at t = 1/3 of each sweep.
        assert!((c[3].demand_intercept - 20.0).abs() < 1e-12);
        let p = sampler.p_true();
        assert!((p[0] - 0.7).abs() < 1e-15);
        for pc in &p[1..] {
            assert!((pc - 1.0 / 30.0).abs() < 1e-15);
        }
    }

    #[test]
    fn generation_is_deterministic_in_seed_and_run() {
        let cfg = StockConfig { n: 300, ..StockConfig::default() };
        let a = gen_stock(&cfg, 11, 0).unwrap();
        let b = gen_stock(&cfg, 11, 0).unwrap();
        assert_eq!(a.samples(), b.samples());
        assert!((0..a.len()).all(|i| a.context_of(i) == b.context_of(i)));
        let c = gen_stock(&cfg, 11, 1).unwrap();
        assert_ne!(a.samples(), c.samples(), "different runs must differ");
        let d = gen_stock(&cfg, 12, 0).unwrap();
        assert_ne!(a.samples(), d.samples(), "different seeds must differ");
    }

    #[test]
    fn stock_costs_follow_the_median_reading_by_default() {
        let cfg = StockConfig { n: 60_000, num_contexts: 3, ..StockConfig::default() };
        let sampler = StockSampler::new(&cfg).unwrap();
        let ds = gen_stock(&cfg, 13, 0).unwrap();
        for c in 1..=3 {
            let idx = ds.context_indices(c);
            let m = idx.len() as f64;
            let mean_ln_x = idx.iter().map(|&i| ds.samples()[i].x[0].ln()).sum::<f64>() / m;
            let se = (cfg.cost_log_var / m).sqrt();
            let want = sampler.contexts()[c - 1].cost_log_location;
            assert!(
                (mean_ln_x - want).abs() < 3.0 * se,
                "context {c}: mean ln x {mean_ln_x} vs location {want} (se {se})"
            );
        }
    }

    #[test]
    fn stock_log_mean_reading_shifts_the_location() {
        let cfg = StockConfig {
            n: 40_000,
            num_contexts: 2,
            mu_is_log_mean: true,
            ..StockConfig::default()
        };
        let sampler = StockSampler::new(&cfg).unwrap();
        // Under the log-mean reading the second of two contexts has
        // location mu = 7 itself, not ln(7).
        assert!((sampler.contexts()[1].cost_log_location - 7.0).abs() < 1e-15);
        let ds = gen_stock(&cfg, 14, 0).unwrap();
        let idx = ds.context_indices(2);
        let m = idx.len() as f64;
        let mean_ln_x = idx.iter().map(|&i| ds.samples()[i].x[0].ln()).sum::<f64>() / m;
        let se = (cfg.cost_log_var / m).sqrt();
        assert!((mean_ln_x - 7.0).abs() < 3.0 * se, "mean ln x {mean_ln_x}");
    }

    #[test]
    fn stock_demands_track_the_linear_model() {
        let cfg = StockConfig { n: 80_000, ..StockConfig::default() };
        let sampler = StockSampler::new(&cfg).unwrap();
        let ds = gen_stock(&cfg, 15, 0).unwrap();
        // First context: demand mean a*E[x] + b with E[x] the log-normal
        // mean mu * exp(var/2); clamping at zero is a >7-sigma event here.
        let p = sampler.contexts()[0];
        let ex = p.cost_log_location.exp() * (cfg.cost_log_var / 2.0).exp();
        let want = p.demand_slope * ex + p.demand_intercept;
        let idx = ds.context_indices(1);
        let m = idx.len() as f64;
        let mean_y = idx.iter().map(|&i| ds.samples()[i].y).sum::<f64>() / m;
        let var_x = (cfg.cost_log_var.exp() - 1.0)
            * (2.0 * p.cost_log_location + cfg.cost_log_var).exp();
        let var_y = p.demand_slope * p.demand_slope * var_x + cfg.demand_var;
        let se = (var_y / m).sqrt();
        assert!((mean_y - want).abs() < 4.0 * se, "mean demand {mean_y} vs {want} (se {se})");
        // Demands are never negative after clamping.
        assert!(ds.samples().iter().all(|s| s.y >= 0.0));
    }

    #[test]
    fn stock_context_frequencies_match_p_true() {
        let cfg = StockConfig { n: 120_000, ..StockConfig::default() };
        let ds = gen_stock(&cfg, 16, 0).unwrap();
        let sampler = StockSampler::new(&cfg).unwrap();
        let n = ds.len() as f64;
        for c in 1..=10 {
            let freq = ds.context_indices(c).len() as f64 / n;
            let p = sampler.p_true()[c - 1];
            let se = (p * (1.0 - p) / n).sqrt();
            assert!((freq - p).abs() < 4.0 * se, "context {c} frequency {freq} vs {p}");
        }
    }

    #[test]
    fn classify_labels_and_features_follow_the_model() {
        let cfg = ClassifyConfig { n: 90_000, ..ClassifyConfig::default() };
        let sampler = ClassifySampler::new(&cfg).unwrap();
        let ds = gen_classify(&cfg, 17, 0).unwrap();
        for c in 1..=3 {
            let p = sampler.contexts()[c - 1];
            let idx = ds.context_indices(c);
            let m = idx.len() as f64;
            // x1 stays inside its uniform support.
            for &i in idx {
                let x1 = ds.samples()[i].x[0];
                assert!(x1 >= -5.0 + p.x1_shift && x1 <= 5.0 + p.x1_shift);
            }
            // Positive rate: E[sigma(x1)] over the uniform support has the
            // closed form (ln(1+e^(5+mu)) - ln(1+e^(-5+mu))) / 10.
            let hi: f64 = 5.0 + p.x1_shift;
            let lo: f64 = -5.0 + p.x1_shift;
            let want = (hi.exp().ln_1p() - lo.exp().ln_1p()) / 10.0;
            let rate = idx.iter().map(|&i| ds.samples()[i].y).sum::<f64>() / m;
            let se = (want * (1.0 - want) / m).sqrt();
            assert!((rate - want).abs() < 4.0 * se, "context {c} positive rate {rate} vs {want}");
            // x2 mean: E[x1] + shift + 2*(1 - 2*positive rate).
            let want_x2 = p.x1_shift + p.x2_shift + 2.0 * (1.0 - 2.0 * want);
            let mean_x2 = idx.iter().map(|&i| ds.samples()[i].x[1]).sum::<f64>() / m;
            // Var(x2) = Var(x1) + label variance + noise, bounded by 12.
            let se_x2 = (12.0f64 / m).sqrt();
            assert!(
                (mean_x2 - want_x2).abs() < 4.0 * se_x2,
                "context {c} x2 mean {mean_x2} vs {want_x2}"
            );
        }
    }

    #[test]
    fn classify_bayes_rule_errs_near_seven_percent() {
        let cfg = ClassifyConfig::default();
        let sampler = ClassifySampler::new(&cfg).unwrap();
        let mut stream = rng::stream(18, rng::purpose::TEST, 0, 0);
        for c in 1..=3 {
            let mut errors = 0usize;
            let trials = 50_000;
            for _ in 0..trials {
                let s = sampler.sample_context(c, &mut stream);
                let call = sampler.bayes_log_odds(c, s.x[0], s.x[1]) >= 0.0;
                if call != (s.y == 1.0) {
                    errors += 1;
                }
            }
            let rate = errors as f64 / trials as f64;
            assert!(
                (0.05..=0.09).contains(&rate),
                "context {c} optimal-rule error rate {rate} outside the expected band"
            );
        }
    }

    #[test]
    fn desk_counts_are_fixed_and_contexts_differ() {
        let cfg = DeskConfig::default();
        let ds = gen_desk(&cfg, 19, 0).unwrap();
        assert_eq!(ds.context_indices(1).len(), 90);
        assert_eq!(ds.context_indices(2).len(), 10);
        // The aggressive book has visibly larger demands.
        let mean = |c: usize| {
            let idx = ds.context_indices(c);
            idx.iter().map(|&i| ds.samples()[i].y).sum::<f64>() / idx.len() as f64
        };
        assert!(mean(2) > mean(1) + 5.0, "desk books look identical");
    }

    #[test]
    fn configs_are_validated() {
        let bad = StockConfig { p_first: 1.0, ..StockConfig::default() };
        assert!(StockSampler::new(&bad).is_err());
        let bad = StockConfig { num_contexts: 0, ..StockConfig::default() };
        assert!(StockSampler::new(&bad).is_err());
        let bad = ClassifyConfig { p_true: vec![0.5, 0.5], ..ClassifyConfig::default() };
        assert!(ClassifySampler::new(&bad).is_err());
        let bad = ClassifyConfig { p_true: vec![0.8, 0.2, 0.0], ..ClassifyConfig::default() };
        assert!(ClassifySampler::new(&bad).is_err());
        let bad = DeskConfig { n2: 0, ..DeskConfig::default() };
        assert!(DeskSampler::new(&bad).is_err());
    }

    #[test]
    fn describe_reports_counts_and_provenance() {
        let cfg = StockConfig { n: 400, ..StockConfig::default() };
        let sampler = StockSampler::new(&cfg).unwrap();
        let ds = gen_stock(&cfg, 20, 3).unwrap();
        let meta = describe(&sampler, &ds, "stock", 20, 3);
        assert_eq!(meta.counts.iter().sum::<usize>(), 400);
        assert_eq!(meta.seed, 20);
        assert_eq!(meta.run, 3);
        assert_eq!(meta.algorithm, rng::ALGORITHM);
        assert_eq!(meta.num_contexts, 10);
    }
}
