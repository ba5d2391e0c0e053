//! Adaptive test-time augmentation for image classification.
//!
//! A classifier is run on crop/flip views of an input one view at a time;
//! the per-view class probabilities are averaged and the loop stops as soon
//! as the gap between the two most likely classes exceeds a threshold.
//! Static sequential and batched TTA are provided as baselines, together
//! with a benchmark harness reporting accuracy, average inferences per
//! sample, latency and throughput.
//!
//! - [`imaging`]: RGB images, PPM I/O, resize/crop/flip, 5-crop and 10-crop policies.
//! - [`backend`]: the classifier trait, a seeded toy classifier, trace replay, latency model.
//! - [`engine`]: confidence score, aggregation, static and adaptive executors.
//! - [`harness`]: benchmark reports, threshold sweeps, mode comparison.

pub mod backend;
pub mod engine;
pub mod harness;
pub mod imaging;

pub use backend::{Backend, LatencyModel, ProbVector, ToyClassifier, TraceBackend};
pub use engine::{
    confidence_score, decide_label, run_adaptta, run_static, AdapttaConfig, AggregationState,
    ExecutionMode, PredictionOutcome, SampleInput,
};
pub use harness::{
    baseline_single, compare_modes, evaluate, sweep_tau, BenchmarkReport, DatasetManifest,
    LatencySource,
};
pub use imaging::{Image, TransformPolicy, ViewSpec};
