//! Concrete loss models: the newsvendor stock-control loss and logistic
//! regression with cross-entropy.
//!
//! The newsvendor loss for stock level `theta`, unit cost `x`, demand `y`
//! and unit price `r` is `theta*x - r*min(theta, y)`; its empirical risk is
//! convex piecewise-linear in `theta` and admits a closed-form minimizer
//! (an order statistic of the demands). The logistic loss is the standard
//! cross-entropy on a clamped logit, with an optional appended bias
//! feature.

use crate::error::Error;
use crate::model::{Domain, LossModel, Sample};
use crate::Result;

/// Logits are clamped to this magnitude before exponentiation; beyond it
/// the cross-entropy tail is below double-precision noise.
pub const LOGIT_CLAMP: f64 = 35.0;

/// Stock-control loss `theta*x - r*min(theta, y)` with `theta` constrained
/// to `[0, theta_max]`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct NewsvendorLoss {
    /// Price per unit sold.
    pub r: f64,
    /// Stock upper bound.
    pub theta_max: f64,
}

impl Default for NewsvendorLoss {
    fn default() -> Self {
        NewsvendorLoss { r: 10.0, theta_max: 100.0 }
    }
}

impl NewsvendorLoss {
    pub fn new(r: f64, theta_max: f64) -> Result<Self> {
        if !(r > 0.0) {
            return Err(Error::InvalidInput(format!("price r must be positive, got {r}")));
        }
        if !(theta_max > 0.0) {
            return Err(Error::InvalidInput(format!(
                "theta_max must be positive, got {theta_max}"
            )));
        }
        Ok(NewsvendorLoss { r, theta_max })
    }

    fn check_theta(&self, theta: f64) -> Result<()> {
        if !(0.0..=self.theta_max).contains(&theta) {
            return Err(Error::InvalidInput(format!(
                "stock level {theta} outside [0, {}]",
                self.theta_max
            )));
        }
        Ok(())
    }

    /// Pointwise loss with the domain check.
    pub fn loss_at(&self, theta: f64, x: f64, y: f64) -> Result<f64> {
        self.check_theta(theta)?;
        Ok(theta * x - self.r * theta.min(y))
    }

    /// Pointwise subgradient `x - r*1{theta < y}`; at the kink `theta = y`
    /// the right derivative `x` is returned so runs are reproducible.
    pub fn subgradient_at(&self, theta: f64, x: f64, y: f64) -> Result<f64> {
        self.check_theta(theta)?;
        Ok(if theta < y { x - self.r } else { x })
    }

    /// Exact minimizer of the empirical risk over `samples`.
    ///
    /// If `mean(x) >= r` stocking is never profitable and `theta* = 0`;
    /// otherwise `theta*` is the k-th smallest demand with
    /// `k = ceil(n * (1 - mean(x)/r))`, clipped to the domain. Flat
    /// segments resolve to the smallest minimizer (integer `k` keeps the
    /// lower endpoint of the flat interval).
    pub fn context_min(&self, samples: &[Sample]) -> Result<(f64, f64)> {
        if samples.is_empty() {
            return Err(Error::EmptyContext(0));
        }
        let n = samples.len();
        let x_mean = samples.iter().map(|s| s.x[0]).sum::<f64>() / n as f64;
        let theta = if x_mean >= self.r {
            0.0
        } else {
            let v = n as f64 * (1.0 - x_mean / self.r);
            // Integer v means a flat segment starting at the v-th order
            // statistic; absorb float dust before the ceiling.
            let k = if (v - v.round()).abs() < 1e-9 { v.round() } else { v.ceil() };
            let k = (k as usize).clamp(1, n);
            let mut ys: Vec<f64> = samples.iter().map(|s| s.y).collect();
            ys.sort_by(f64::total_cmp);
            ys[k - 1].clamp(0.0, self.theta_max)
        };
        let mut value = 0.0;
        for s in samples {
            value += theta * s.x[0] - self.r * theta.min(s.y);
        }
        Ok((theta, value / n as f64))
    }
}

impl LossModel for NewsvendorLoss {
    fn name(&self) -> &'static str {
        "newsvendor"
    }

    fn param_dim(&self, _feature_dim: usize) -> usize {
        1
    }

    fn domain(&self, _feature_dim: usize) -> Domain {
        Domain { lower: vec![0.0], upper: vec![self.theta_max] }
    }

    fn loss(&self, theta: &[f64], sample: &Sample) -> f64 {
        debug_assert_eq!(theta.len(), 1);
        let t = theta[0];
        t * sample.x[0] - self.r * t.min(sample.y)
    }

    fn add_scaled_subgradient(&self, theta: &[f64], sample: &Sample, scale: f64, acc: &mut [f64]) {
        let t = theta[0];
        let g = if t < sample.y { sample.x[0] - self.r } else { sample.x[0] };
        acc[0] += scale * g;
    }

    fn exact_empirical_min(&self, samples: &[Sample]) -> Option<(Vec<f64>, f64)> {
        self.context_min(samples).ok().map(|(t, v)| (vec![t], v))
    }

    /// Slopes scale with the price; normalizing keeps one step-size default
    /// usable across price configurations.
    fn step_scale(&self) -> f64 {
        1.0 / self.r
    }
}

/// Cross-entropy loss on a clamped logit, optionally with an appended bias
/// feature (the parameter's last coordinate).
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct LogisticLoss {
    pub add_bias: bool,
}

impl Default for LogisticLoss {
    fn default() -> Self {
        LogisticLoss { add_bias: true }
    }
}

impl LogisticLoss {
    fn logit(&self, theta: &[f64], x: &[f64]) -> f64 {
        debug_assert_eq!(theta.len(), x.len() + usize::from(self.add_bias));
        let mut t: f64 = x.iter().zip(theta).map(|(a, b)| a * b).sum();
        if self.add_bias {
            t += theta[theta.len() - 1];
        }
        t.clamp(-LOGIT_CLAMP, LOGIT_CLAMP)
    }

    /// Pointwise loss with dimension checks; `y` must be 0 or 1.
    pub fn loss_at(&self, theta: &[f64], x: &[f64], y: f64) -> Result<f64> {
        self.check_dims(theta, x)?;
        if y != 0.0 && y != 1.0 {
            return Err(Error::InvalidInput(format!("label must be 0 or 1, got {y}")));
        }
        Ok(self.loss(theta, &Sample { x: x.to_vec(), y }))
    }

    /// Pointwise gradient `(sigma(logit) - y) * x_tilde` with checks.
    pub fn gradient_at(&self, theta: &[f64], x: &[f64], y: f64) -> Result<Vec<f64>> {
        self.check_dims(theta, x)?;
        if y != 0.0 && y != 1.0 {
            return Err(Error::InvalidInput(format!("label must be 0 or 1, got {y}")));
        }
        Ok(self.subgradient(theta, &Sample { x: x.to_vec(), y }))
    }

    fn check_dims(&self, theta: &[f64], x: &[f64]) -> Result<()> {
        let want = x.len() + usize::from(self.add_bias);
        if theta.len() != want {
            return Err(Error::LengthMismatch { expected: want, got: theta.len() });
        }
        Ok(())
    }

    /// Errors unless every response in the dataset is a 0/1 label.
    pub fn validate_labels(&self, ds: &crate::model::Dataset) -> Result<()> {
        for (i, s) in ds.samples().iter().enumerate() {
            if s.y != 0.0 && s.y != 1.0 {
                return Err(Error::InvalidDataset(format!(
                    "sample {i} has label {}, logistic loss needs 0/1",
                    s.y
                )));
            }
        }
        Ok(())
    }
}

impl LossModel for LogisticLoss {
    fn name(&self) -> &'static str {
        "logistic"
    }

    fn param_dim(&self, feature_dim: usize) -> usize {
        feature_dim + usize::from(self.add_bias)
    }

    fn domain(&self, feature_dim: usize) -> Domain {
        Domain::unbounded(self.param_dim(feature_dim))
    }

    fn loss(&self, theta: &[f64], sample: &Sample) -> f64 {
        let t = self.logit(theta, &sample.x);
        // Stable form of -y ln(sigma) - (1-y) ln(1-sigma).
        (-t.abs()).exp().ln_1p() + t.max(0.0) - sample.y * t
    }

    fn add_scaled_subgradient(&self, theta: &[f64], sample: &Sample, scale: f64, acc: &mut [f64]) {
        let t = self.logit(theta, &sample.x);
        let sigma = 1.0 / (1.0 + (-t).exp());
        let factor = scale * (sigma - sample.y);
        for (a, &xi) in acc.iter_mut().zip(&sample.x) {
            *a += factor * xi;
        }
        if self.add_bias {
            acc[theta.len() - 1] += factor;
        }
    }

    fn predict_binary(&self, theta: &[f64], sample: &Sample) -> Option<bool> {
        Some(self.logit(theta, &sample.x) >= 0.0)
    }
}
