//! Classifier backends. A backend maps one augmented view to a class
//! probability vector.

mod latency;
mod toy;
pub mod trace;

pub use latency::{LatencyError, LatencyModel};
pub use toy::ToyClassifier;
pub use trace::{TraceBackend, TraceHeader, TraceRecord};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::imaging::{Image, TransformPolicy};

/// Allowed deviation of a probability row's sum from 1.
pub const SUM_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProbError {
    #[error("probability vector needs at least 2 classes, got {0}")]
    TooFewClasses(usize),
    #[error("probability entry {index} is {value}, expected a finite non-negative value")]
    InvalidEntry { index: usize, value: f64 },
    #[error("probabilities sum to {0}, expected 1 within 1e-6")]
    BadSum(f64),
}

/// A class probability vector: `C >= 2` finite non-negative entries summing
/// to one within [`SUM_TOLERANCE`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct ProbVector(Vec<f64>);

impl ProbVector {
    pub fn new(probs: Vec<f64>) -> Result<Self, ProbError> {
        if probs.len() < 2 {
            return Err(ProbError::TooFewClasses(probs.len()));
        }
        if let Some((index, &value)) = probs
            .iter()
            .enumerate()
            .find(|(_, p)| !p.is_finite() || **p < 0.0)
        {
            return Err(ProbError::InvalidEntry { index, value });
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > SUM_TOLERANCE {
            return Err(ProbError::BadSum(sum));
        }
        Ok(Self(probs))
    }

    /// `[1/C; C]`.
    pub fn uniform(classes: usize) -> Result<Self, ProbError> {
        Self::new(vec![1.0 / classes as f64; classes])
    }

    /// Numerically stable softmax over `logits`.
    pub fn softmax(logits: &[f64]) -> Result<Self, ProbError> {
        let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = logits.iter().map(|&l| (l - max).exp()).collect();
        let z: f64 = exps.iter().sum();
        Self::new(exps.into_iter().map(|e| e / z).collect())
    }

    /// Wraps a vector the caller knows to be a valid distribution, such as a
    /// mean of valid distributions.
    pub(crate) fn from_trusted(probs: Vec<f64>) -> Self {
        debug_assert!(probs.len() >= 2);
        Self(probs)
    }

    pub fn classes(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl TryFrom<Vec<f64>> for ProbVector {
    type Error = ProbError;

    fn try_from(v: Vec<f64>) -> Result<Self, Self::Error> {
        Self::new(v)
    }
}

impl From<ProbVector> for Vec<f64> {
    fn from(p: ProbVector) -> Self {
        p.0
    }
}

impl AsRef<[f64]> for ProbVector {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

/// What a backend is asked to classify: pixels of a materialized view, or a
/// reference to a view recorded in a trace.
#[derive(Debug, Clone, Copy)]
pub enum ViewInput<'a> {
    Pixels(&'a Image),
    Recorded { sample_id: &'a str, view: usize },
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BackendError {
    #[error("view is {actual_width}x{actual_height}, backend expects {expected}x{expected}")]
    DimensionMismatch {
        expected: usize,
        actual_width: usize,
        actual_height: usize,
    },
    #[error("unknown sample {0:?}")]
    UnknownSample(String),
    #[error("sample {sample_id:?} has no view {view}")]
    UnknownView { sample_id: String, view: usize },
    #[error("{backend} backend cannot classify {input} inputs")]
    UnsupportedInput {
        backend: &'static str,
        input: &'static str,
    },
    #[error("policy {policy} needs {needed} views but the backend provides {available}")]
    PolicyMismatch {
        policy: String,
        needed: usize,
        available: usize,
    },
    #[error(transparent)]
    Prob(#[from] ProbError),
}

/// A classifier producing one probability vector per view.
///
/// Implementations are immutable after construction; `predict` may be
/// called concurrently from several threads.
pub trait Backend: Send + Sync {
    fn name(&self) -> &'static str;

    fn classes(&self) -> usize;

    fn predict(&self, input: ViewInput<'_>) -> Result<ProbVector, BackendError>;

    /// Element `i` of the result equals `predict(inputs[i])`. The first
    /// failing element aborts the batch.
    fn predict_batch(&self, inputs: &[ViewInput<'_>]) -> Result<Vec<ProbVector>, BackendError> {
        inputs.iter().map(|&input| self.predict(input)).collect()
    }

    /// Checks up front that every view of `policy` can be served.
    fn check_policy(&self, _policy: &TransformPolicy) -> Result<(), BackendError> {
        Ok(())
    }
}

impl<B: Backend + ?Sized> Backend for &B {
    fn name(&self) -> &'static str {
        (**self).name()
    }

    fn classes(&self) -> usize {
        (**self).classes()
    }

    fn predict(&self, input: ViewInput<'_>) -> Result<ProbVector, BackendError> {
        (**self).predict(input)
    }

    fn predict_batch(&self, inputs: &[ViewInput<'_>]) -> Result<Vec<ProbVector>, BackendError> {
        (**self).predict_batch(inputs)
    }

    fn check_policy(&self, policy: &TransformPolicy) -> Result<(), BackendError> {
        (**self).check_policy(policy)
    }
}
