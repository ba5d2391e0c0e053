//! TTA executors: static sequential and batched evaluation of every view,
//! and the adaptive loop that stops as soon as the running average is
//! confident enough.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::backend::{Backend, BackendError, ProbVector, ViewInput};
use crate::imaging::{Image, ImagingError, TransformPolicy};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EngineError {
    #[error("confidence threshold must lie in [0, 1], got {0}")]
    InvalidThreshold(f64),
    #[error("{operation} does not run in {mode} mode")]
    WrongMode {
        operation: &'static str,
        mode: ExecutionMode,
    },
    #[error("view {view}: {source}")]
    Backend { view: usize, source: BackendError },
    #[error("batched inference failed: {0}")]
    Batch(BackendError),
    #[error("view {view}: {source}")]
    Transform { view: usize, source: ImagingError },
    #[error("probability vector has {actual} classes, expected {expected}")]
    ClassMismatch { expected: usize, actual: usize },
}

/// How the views of one sample are executed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExecutionMode {
    /// Static TTA, one inference per view.
    #[serde(rename = "seq")]
    Sequential,
    /// Static TTA, all views in one batched inference.
    Batch,
    /// Confidence-gated early exit.
    Adaptive,
}

impl ExecutionMode {
    pub const ALL: [ExecutionMode; 3] = [Self::Batch, Self::Sequential, Self::Adaptive];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Sequential => "seq",
            Self::Batch => "batch",
            Self::Adaptive => "adaptive",
        }
    }

    pub fn is_static(self) -> bool {
        !matches!(self, Self::Adaptive)
    }
}

impl fmt::Display for ExecutionMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ExecutionMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "seq" | "sequential" => Ok(Self::Sequential),
            "batch" => Ok(Self::Batch),
            "adaptive" => Ok(Self::Adaptive),
            other => Err(format!(
                "unknown mode {other:?}, expected seq, batch or adaptive"
            )),
        }
    }
}

/// Executor configuration: threshold, view policy and execution mode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdapttaConfig {
    tau: f64,
    policy: TransformPolicy,
    mode: ExecutionMode,
}

impl AdapttaConfig {
    pub fn new(
        tau: f64,
        policy: TransformPolicy,
        mode: ExecutionMode,
    ) -> Result<Self, EngineError> {
        check_tau(tau)?;
        Ok(Self { tau, policy, mode })
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn policy(&self) -> &TransformPolicy {
        &self.policy
    }

    pub fn mode(&self) -> ExecutionMode {
        self.mode
    }

    pub fn with_mode(&self, mode: ExecutionMode) -> Self {
        Self {
            mode,
            ..self.clone()
        }
    }

    pub fn with_tau(&self, tau: f64) -> Result<Self, EngineError> {
        check_tau(tau)?;
        Ok(Self {
            tau,
            ..self.clone()
        })
    }

    pub fn with_policy(&self, policy: TransformPolicy) -> Self {
        Self {
            policy,
            ..self.clone()
        }
    }
}

pub(crate) fn check_tau(tau: f64) -> Result<(), EngineError> {
    if (0.0..=1.0).contains(&tau) {
        Ok(())
    } else {
        Err(EngineError::InvalidThreshold(tau))
    }
}

/// Gap between the largest and second-largest entries. Ties for the
/// largest entry give 0.
pub fn confidence_score(avg: &[f64]) -> f64 {
    let mut first = f64::NEG_INFINITY;
    let mut second = f64::NEG_INFINITY;
    for &v in avg {
        if v > first {
            second = first;
            first = v;
        } else if v > second {
            second = v;
        }
    }
    first - second
}

/// Index of the largest entry, lowest index on ties.
pub fn decide_label(avg: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in avg.iter().enumerate().skip(1) {
        if v > avg[best] {
            best = i;
        }
    }
    best
}

/// Running class-wise sum of per-view probabilities. The average is formed
/// on demand as `sum / count`.
#[derive(Debug, Clone, PartialEq)]
pub struct AggregationState {
    sum: Vec<f64>,
    count: usize,
}

impl AggregationState {
    pub fn new(classes: usize) -> Self {
        Self {
            sum: vec![0.0; classes],
            count: 0,
        }
    }

    pub fn push(&mut self, p: &ProbVector) -> Result<(), EngineError> {
        if p.classes() != self.sum.len() {
            return Err(EngineError::ClassMismatch {
                expected: self.sum.len(),
                actual: p.classes(),
            });
        }
        for (s, v) in self.sum.iter_mut().zip(p.as_slice()) {
            *s += v;
        }
        self.count += 1;
        Ok(())
    }

    /// Consuming form of [`push`](Self::push).
    pub fn aggregate(mut self, p: &ProbVector) -> Result<Self, EngineError> {
        self.push(p)?;
        Ok(self)
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn sum(&self) -> &[f64] {
        &self.sum
    }

    /// `None` before the first update.
    pub fn average(&self) -> Option<ProbVector> {
        if self.count == 0 {
            return None;
        }
        let n = self.count as f64;
        Some(ProbVector::from_trusted(
            self.sum.iter().map(|s| s / n).collect(),
        ))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionOutcome {
    pub label: usize,
    /// Confidence score of the final average.
    pub confidence: f64,
    pub inferences_used: usize,
    pub per_view_probs: Vec<ProbVector>,
    pub avg_probs: ProbVector,
}

impl PredictionOutcome {
    fn from_state(state: &AggregationState, per_view_probs: Vec<ProbVector>) -> Self {
        let avg_probs = state.average().expect("at least one view evaluated");
        Self {
            label: decide_label(avg_probs.as_slice()),
            confidence: confidence_score(avg_probs.as_slice()),
            inferences_used: state.count(),
            per_view_probs,
            avg_probs,
        }
    }
}

/// The sample being classified: a decoded image whose views are cut on
/// demand, or an id whose views were recorded in a trace.
#[derive(Debug, Clone, Copy)]
pub enum SampleInput<'a> {
    Image(&'a Image),
    Recorded(&'a str),
}

enum View<'a> {
    Pixels(Image),
    Recorded(&'a str, usize),
}

impl View<'_> {
    fn as_input(&self) -> ViewInput<'_> {
        match self {
            View::Pixels(img) => ViewInput::Pixels(img),
            View::Recorded(id, k) => ViewInput::Recorded {
                sample_id: id,
                view: *k,
            },
        }
    }
}

/// Cuts views lazily; the square source is prepared on the first request.
struct ViewSource<'a> {
    input: SampleInput<'a>,
    policy: &'a TransformPolicy,
    source: Option<Image>,
}

impl<'a> ViewSource<'a> {
    fn new(input: SampleInput<'a>, policy: &'a TransformPolicy) -> Self {
        Self {
            input,
            policy,
            source: None,
        }
    }

    fn view(&mut self, index: usize) -> Result<View<'a>, EngineError> {
        let err = |source| EngineError::Transform {
            view: index,
            source,
        };
        match self.input {
            SampleInput::Recorded(id) => Ok(View::Recorded(id, index)),
            SampleInput::Image(img) => {
                if self.source.is_none() {
                    self.source = Some(self.policy.prepare_source(img).map_err(err)?);
                }
                let source = self.source.as_ref().expect("prepared above");
                self.policy
                    .view(source, index)
                    .map(View::Pixels)
                    .map_err(err)
            }
        }
    }
}

fn infer<B: Backend + ?Sized>(
    backend: &B,
    view: &View<'_>,
    index: usize,
) -> Result<ProbVector, EngineError> {
    backend
        .predict(view.as_input())
        .map_err(|source| EngineError::Backend {
            view: index,
            source,
        })
}

/// Adaptive TTA. Views are generated and classified one at a time in
/// policy order; after each one the running average is scored and the loop
/// stops once the score strictly exceeds `tau`, or when the policy is
/// exhausted.
pub fn run_adaptta<B: Backend + ?Sized>(
    backend: &B,
    input: SampleInput<'_>,
    cfg: &AdapttaConfig,
) -> Result<PredictionOutcome, EngineError> {
    if cfg.mode != ExecutionMode::Adaptive {
        return Err(EngineError::WrongMode {
            operation: "run_adaptta",
            mode: cfg.mode,
        });
    }
    let mut views = ViewSource::new(input, &cfg.policy);
    let mut state = AggregationState::new(backend.classes());
    let mut per_view = Vec::with_capacity(cfg.policy.len());
    for index in 0..cfg.policy.len() {
        let view = views.view(index)?;
        let p = infer(backend, &view, index)?;
        state.push(&p)?;
        per_view.push(p);
        let avg = state.average().expect("pushed above");
        if confidence_score(avg.as_slice()) > cfg.tau {
            break;
        }
    }
    Ok(PredictionOutcome::from_state(&state, per_view))
}

/// Static TTA over every view, one at a time or as a single batch.
pub fn run_static<B: Backend + ?Sized>(
    backend: &B,
    input: SampleInput<'_>,
    cfg: &AdapttaConfig,
) -> Result<PredictionOutcome, EngineError> {
    let mut views = ViewSource::new(input, &cfg.policy);
    let per_view = match cfg.mode {
        ExecutionMode::Sequential => {
            let mut out = Vec::with_capacity(cfg.policy.len());
            for index in 0..cfg.policy.len() {
                let view = views.view(index)?;
                out.push(infer(backend, &view, index)?);
            }
            out
        }
        ExecutionMode::Batch => {
            let materialized = (0..cfg.policy.len())
                .map(|i| views.view(i))
                .collect::<Result<Vec<_>, _>>()?;
            let inputs: Vec<_> = materialized.iter().map(View::as_input).collect();
            backend.predict_batch(&inputs).map_err(EngineError::Batch)?
        }
        ExecutionMode::Adaptive => {
            return Err(EngineError::WrongMode {
                operation: "run_static",
                mode: cfg.mode,
            })
        }
    };
    let mut state = AggregationState::new(backend.classes());
    for p in &per_view {
        state.push(p)?;
    }
    Ok(PredictionOutcome::from_state(&state, per_view))
}

/// Dispatches on `cfg.mode`.
pub fn run<B: Backend + ?Sized>(
    backend: &B,
    input: SampleInput<'_>,
    cfg: &AdapttaConfig,
) -> Result<PredictionOutcome, EngineError> {
    match cfg.mode {
        ExecutionMode::Adaptive => run_adaptta(backend, input, cfg),
        _ => run_static(backend, input, cfg),
    }
}
