//! Data model: samples tagged with contexts, empirical context statistics,
//! bounded parameter vectors, and the loss-model contract shared by every
//! fitting routine.
//!
//! A dataset is a list of (context, features, response) records. Contexts
//! are opaque labels; on construction they are re-mapped to the contiguous
//! ids `1..=num_contexts` (ascending label order) and the original labels
//! are retained for reporting. All risk computations are per-context means
//! of a pointwise loss.

use std::io::{BufRead, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::Result;

/// One observation: a feature vector and a scalar response.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub x: Vec<f64>,
    pub y: f64,
}

/// Samples pooled across contexts, with the context partition precomputed.
///
/// Invariants: at least one sample; all feature vectors share one dimension;
/// every context id in `1..=num_contexts` owns at least one sample.
#[derive(Debug, Clone)]
pub struct Dataset {
    samples: Vec<Sample>,
    contexts: Vec<usize>,
    num_contexts: usize,
    feature_dim: usize,
    by_context: Vec<Vec<usize>>,
    original_labels: Vec<i64>,
    warnings: Vec<String>,
}

impl Dataset {
    /// Builds a dataset from raw records, re-mapping arbitrary integer
    /// context labels to `1..=K` in ascending label order.
    pub fn from_records(records: Vec<(i64, Vec<f64>, f64)>) -> Result<Self> {
        Self::build(records, None)
    }

    /// Like [`Dataset::from_records`] but with an explicit set of declared
    /// labels. Declared labels that never occur are dropped with a recorded
    /// warning; ids are re-indexed over the observed labels only.
    pub fn from_records_declared(
        records: Vec<(i64, Vec<f64>, f64)>,
        declared: &[i64],
    ) -> Result<Self> {
        Self::build(records, Some(declared))
    }

    fn build(records: Vec<(i64, Vec<f64>, f64)>, declared: Option<&[i64]>) -> Result<Self> {
        if records.is_empty() {
            return Err(Error::InvalidDataset("no samples".into()));
        }
        let feature_dim = records[0].1.len();
        if feature_dim == 0 {
            return Err(Error::InvalidDataset("feature dimension is zero".into()));
        }
        for (i, rec) in records.iter().enumerate() {
            if rec.1.len() != feature_dim {
                return Err(Error::InvalidDataset(format!(
                    "sample {i} has {} features, expected {feature_dim}",
                    rec.1.len()
                )));
            }
            if !rec.1.iter().all(|v| v.is_finite()) || !rec.2.is_finite() {
                return Err(Error::InvalidDataset(format!("sample {i} has a non-finite value")));
            }
        }

        let mut observed: Vec<i64> = records.iter().map(|r| r.0).collect();
        observed.sort_unstable();
        observed.dedup();

        let mut warnings = Vec::new();
        if let Some(declared) = declared {
            for &label in declared {
                if !observed.contains(&label) {
                    warnings.push(format!(
                        "declared context {label} has no samples; dropped and ids re-indexed"
                    ));
                }
            }
        }

        let num_contexts = observed.len();
        let mut samples = Vec::with_capacity(records.len());
        let mut contexts = Vec::with_capacity(records.len());
        let mut by_context = vec![Vec::new(); num_contexts];
        for (label, x, y) in records {
            let id = observed.binary_search(&label).expect("observed label") + 1;
            by_context[id - 1].push(samples.len());
            contexts.push(id);
            samples.push(Sample { x, y });
        }

        Ok(Dataset {
            samples,
            contexts,
            num_contexts,
            feature_dim,
            by_context,
            original_labels: observed,
            warnings,
        })
    }

    /// Reads the CSV format `context,x1,...,xd,y` (header required).
    pub fn from_csv(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        let mut lines = std::io::BufReader::new(file).lines();
        let header = match lines.next() {
            Some(h) => h?,
            None => return Err(Error::Csv { line: 1, msg: "empty file".into() }),
        };
        let cols: Vec<&str> = header.trim().split(',').collect();
        if cols.len() < 3 || cols[0] != "context" || *cols.last().unwrap() != "y" {
            return Err(Error::Csv {
                line: 1,
                msg: format!("header must be context,x1,...,xd,y; got {header:?}"),
            });
        }
        let d = cols.len() - 2;
        for (j, col) in cols[1..=d].iter().enumerate() {
            let want = format!("x{}", j + 1);
            if *col != want {
                return Err(Error::Csv {
                    line: 1,
                    msg: format!("feature column {} named {col:?}, expected {want:?}", j + 1),
                });
            }
        }

        let mut records = Vec::new();
        for (idx, line) in lines.enumerate() {
            let line_no = idx + 2;
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.trim().split(',').collect();
            if fields.len() != d + 2 {
                return Err(Error::Csv {
                    line: line_no,
                    msg: format!("expected {} fields, got {}", d + 2, fields.len()),
                });
            }
            let context: i64 = fields[0].trim().parse().map_err(|_| Error::Csv {
                line: line_no,
                msg: format!("context {:?} is not an integer", fields[0]),
            })?;
            let mut x = Vec::with_capacity(d);
            for f in &fields[1..=d] {
                x.push(f.trim().parse::<f64>().map_err(|_| Error::Csv {
                    line: line_no,
                    msg: format!("feature {f:?} is not a number"),
                })?);
            }
            let y: f64 = fields[d + 1].trim().parse().map_err(|_| Error::Csv {
                line: line_no,
                msg: format!("response {:?} is not a number", fields[d + 1]),
            })?;
            records.push((context, x, y));
        }
        Self::from_records(records)
    }

    /// Writes the CSV format `context,x1,...,xd,y`. Floats are printed in
    /// shortest round-trip form so write/read is lossless.
    pub fn to_csv(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path)?;
        let mut w = BufWriter::new(file);
        let mut header = String::from("context");
        for j in 1..=self.feature_dim {
            header.push_str(&format!(",x{j}"));
        }
        header.push_str(",y");
        writeln!(w, "{header}")?;
        for (i, s) in self.samples.iter().enumerate() {
            let mut row = format!("{}", self.original_labels[self.contexts[i] - 1]);
            for v in &s.x {
                row.push_str(&format!(",{v}"));
            }
            row.push_str(&format!(",{}", s.y));
            writeln!(w, "{row}")?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn num_contexts(&self) -> usize {
        self.num_contexts
    }

    pub fn feature_dim(&self) -> usize {
        self.feature_dim
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    /// Context id (1-based) of sample `i`.
    pub fn context_of(&self, i: usize) -> usize {
        self.contexts[i]
    }

    /// Sample indices belonging to context `c` (1-based).
    pub fn context_indices(&self, c: usize) -> &[usize] {
        &self.by_context[c - 1]
    }

    /// Original label that context id `c` was re-mapped from.
    pub fn original_label(&self, c: usize) -> i64 {
        self.original_labels[c - 1]
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }
}

/// Splits a dataset into per-context sample lists, ordered by context id.
/// Sample order within a context follows dataset order.
pub fn partition_by_context(ds: &Dataset) -> Vec<Vec<Sample>> {
    (1..=ds.num_contexts())
        .map(|c| ds.context_indices(c).iter().map(|&i| ds.samples()[i].clone()).collect())
        .collect()
}

/// Per-context sample counts and the empirical context distribution.
#[derive(Debug, Clone, Serialize)]
pub struct ContextStats {
    pub counts: Vec<usize>,
    pub p_hat: Vec<f64>,
}

impl ContextStats {
    pub fn from_dataset(ds: &Dataset) -> Self {
        let n = ds.len() as f64;
        let counts: Vec<usize> = (1..=ds.num_contexts()).map(|c| ds.context_indices(c).len()).collect();
        let p_hat = counts.iter().map(|&k| k as f64 / n).collect();
        ContextStats { counts, p_hat }
    }
}

/// Box constraints for a parameter vector; entries may be infinite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Domain {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl Domain {
    pub fn unbounded(dim: usize) -> Self {
        Domain { lower: vec![f64::NEG_INFINITY; dim], upper: vec![f64::INFINITY; dim] }
    }

    pub fn boxed(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(Error::LengthMismatch { expected: lower.len(), got: upper.len() });
        }
        if lower.iter().zip(&upper).any(|(l, u)| l > u) {
            return Err(Error::InvalidInput("domain has lower > upper".into()));
        }
        Ok(Domain { lower, upper })
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    /// Euclidean projection onto the box (componentwise clamp).
    pub fn project(&self, values: &mut [f64]) {
        for (v, (l, u)) in values.iter_mut().zip(self.lower.iter().zip(&self.upper)) {
            *v = v.clamp(*l, *u);
        }
    }

    pub fn contains(&self, values: &[f64]) -> bool {
        values.len() == self.dim()
            && values
                .iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(v, (l, u))| *v >= *l && *v <= *u)
    }
}

/// A parameter vector constrained to a box domain.
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterVector {
    values: Vec<f64>,
    domain: Domain,
}

impl ParameterVector {
    /// Values must already lie in the domain.
    pub fn new(values: Vec<f64>, domain: Domain) -> Result<Self> {
        if values.len() != domain.dim() {
            return Err(Error::LengthMismatch { expected: domain.dim(), got: values.len() });
        }
        if !domain.contains(&values) {
            return Err(Error::InvalidInput("parameter outside its domain".into()));
        }
        Ok(ParameterVector { values, domain })
    }

    /// Clamps values into the domain instead of erroring.
    pub fn projected(mut values: Vec<f64>, domain: Domain) -> Result<Self> {
        if values.len() != domain.dim() {
            return Err(Error::LengthMismatch { expected: domain.dim(), got: values.len() });
        }
        domain.project(&mut values);
        Ok(ParameterVector { values, domain })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }
}

/// Serialized as the bare value array; the domain is part of the loss
/// configuration, not the fit output.
impl Serialize for ParameterVector {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        self.values.serialize(serializer)
    }
}

/// The contract every loss implements: pointwise loss and subgradient on a
/// box domain, plus an optional exact empirical minimizer.
pub trait LossModel {
    /// Short stable identifier ("newsvendor", "logistic").
    fn name(&self) -> &'static str;

    /// Parameter dimension for feature dimension `d`.
    fn param_dim(&self, feature_dim: usize) -> usize;

    /// Feasible box for the parameter.
    fn domain(&self, feature_dim: usize) -> Domain;

    /// Pointwise loss. `theta` must lie in the domain.
    fn loss(&self, theta: &[f64], sample: &Sample) -> f64;

    /// Adds `scale` times a pointwise subgradient to `acc`.
    fn add_scaled_subgradient(&self, theta: &[f64], sample: &Sample, scale: f64, acc: &mut [f64]);

    /// Pointwise subgradient, allocated.
    fn subgradient(&self, theta: &[f64], sample: &Sample) -> Vec<f64> {
        let mut g = vec![0.0; theta.len()];
        self.add_scaled_subgradient(theta, sample, 1.0, &mut g);
        g
    }

    /// Exact minimizer of the empirical risk over `samples`, when the loss
    /// admits one. Returns (theta, minimum risk).
    fn exact_empirical_min(&self, _samples: &[Sample]) -> Option<(Vec<f64>, f64)> {
        None
    }

    /// Multiplier applied to the optimizer step size to normalize gradient
    /// scale across losses.
    fn step_scale(&self) -> f64 {
        1.0
    }

    /// Hard classification decision at `theta`, for losses that define one.
    fn predict_binary(&self, _theta: &[f64], _sample: &Sample) -> Option<bool> {
        None
    }
}

/// Mean pointwise loss over a sample list.
///
/// Errors on an empty list: the conditional risk of an unobserved context
/// is undefined.
pub fn empirical_conditional_risk<L: LossModel + ?Sized>(
    loss: &L,
    theta: &[f64],
    samples: &[Sample],
) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::EmptyContext(0));
    }
    let mut sum = 0.0;
    for s in samples {
        sum += loss.loss(theta, s);
    }
    Ok(sum / samples.len() as f64)
}

/// Mean pointwise loss over dataset indices (internal fast path).
pub(crate) fn risk_on_indices<L: LossModel + ?Sized>(
    loss: &L,
    theta: &[f64],
    ds: &Dataset,
    idx: &[usize],
) -> f64 {
    debug_assert!(!idx.is_empty());
    let mut sum = 0.0;
    for &i in idx {
        sum += loss.loss(theta, &ds.samples()[i]);
    }
    sum / idx.len() as f64
}
