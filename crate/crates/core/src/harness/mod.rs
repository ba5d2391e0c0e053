//! Benchmark runner: accuracy, accuracy gain over the single center crop,
//! average inferences per sample, latency and throughput for each
//! execution mode, with wall-clock or simulated latency accounting.

mod manifest;
pub mod synthetic;

pub use manifest::{DatasetManifest, ManifestEntry, SampleSource};

use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::backend::{Backend, BackendError, LatencyModel};
use crate::engine::{self, check_tau, AdapttaConfig, EngineError, ExecutionMode, SampleInput};
use crate::imaging::{ppm, Image, TransformPolicy};

/// What the latency fields cover.
pub const LATENCY_SCOPE: &str = "resize+crop+flip+inference; decode excluded";

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("manifest is empty")]
    EmptyManifest,
    #[error("manifest declares {manifest} classes but the backend has {backend}")]
    ClassMismatch { manifest: usize, backend: usize },
    #[error("duplicate sample id {0:?}")]
    DuplicateSample(String),
    #[error("unknown sample id {0:?}")]
    UnknownSample(String),
    #[error("sample {sample_id:?}: label {label} outside 0..{classes}")]
    LabelOutOfRange {
        sample_id: String,
        label: usize,
        classes: usize,
    },
    #[error("manifest line {line}: {message}")]
    Manifest { line: usize, message: String },
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error("sample {sample_id:?}: {source}")]
    Image {
        sample_id: String,
        source: ppm::ReadError,
    },
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error("sample {sample_id:?}: {source}")]
    Engine {
        sample_id: String,
        source: EngineError,
    },
    #[error(transparent)]
    Config(#[from] EngineError),
    #[error("tau sweep needs at least one threshold")]
    EmptySweep,
    #[error("measured latency is zero, throughput is undefined")]
    ZeroLatency,
}

impl HarnessError {
    /// True when the failure comes from the inputs (files, traces,
    /// manifests) rather than from the configuration or the program.
    pub fn is_data_error(&self) -> bool {
        !matches!(self, Self::Config(_) | Self::EmptySweep | Self::ZeroLatency)
    }
}

/// Latency accounting for a benchmark run.
#[derive(Debug, Clone, PartialEq)]
pub enum LatencySource {
    /// Monotonic-clock timing of each sample's pipeline, single-threaded.
    WallClock,
    /// Costs from a parametric model; deterministic.
    Simulated(LatencyModel),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LatencyKind {
    WallClock,
    Simulated,
}

impl LatencySource {
    pub fn kind(&self) -> LatencyKind {
        match self {
            Self::WallClock => LatencyKind::WallClock,
            Self::Simulated(_) => LatencyKind::Simulated,
        }
    }
}

/// Summary of one benchmark run. Field names are the report schema.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkReport {
    pub mode: ExecutionMode,
    pub policy: String,
    pub tau: f64,
    pub samples: usize,
    pub top1_accuracy: f64,
    pub accuracy_gain_vs_single: f64,
    pub avg_inferences: f64,
    pub avg_latency_ms: f64,
    pub avg_fps: f64,
    /// Sequential average latency divided by this run's. Filled by
    /// [`compare_modes`]; a standalone sequential run reports 1.
    pub speedup_vs_seq: Option<f64>,
    pub latency_source: LatencyKind,
    pub median_latency_ms: f64,
    pub p95_latency_ms: f64,
    pub latency_scope: String,
}

/// Per-sample result of a benchmark run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleResult {
    pub sample_id: String,
    pub true_label: usize,
    pub predicted: usize,
    pub confidence: f64,
    pub inferences_used: usize,
    pub latency_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub report: BenchmarkReport,
    pub samples: Vec<SampleResult>,
}

/// The three execution modes run over the same inputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeComparison {
    pub batch: BenchmarkReport,
    pub sequential: BenchmarkReport,
    pub adaptive: BenchmarkReport,
}

impl ModeComparison {
    pub fn reports(&self) -> [&BenchmarkReport; 3] {
        [&self.batch, &self.sequential, &self.adaptive]
    }
}

enum Loaded<'a> {
    Image(Image),
    Recorded(&'a str),
}

impl Loaded<'_> {
    fn as_input(&self) -> SampleInput<'_> {
        match self {
            Loaded::Image(img) => SampleInput::Image(img),
            Loaded::Recorded(id) => SampleInput::Recorded(id),
        }
    }
}

fn load<'a>(entry: &'a ManifestEntry) -> Result<Loaded<'a>, HarnessError> {
    match &entry.source {
        SampleSource::Trace => Ok(Loaded::Recorded(&entry.sample_id)),
        SampleSource::Image(path) => {
            ppm::read_file(path)
                .map(Loaded::Image)
                .map_err(|source| HarnessError::Image {
                    sample_id: entry.sample_id.clone(),
                    source,
                })
        }
    }
}

fn check_inputs<B: Backend + ?Sized>(
    backend: &B,
    manifest: &DatasetManifest,
    policy: &TransformPolicy,
) -> Result<(), HarnessError> {
    if manifest.is_empty() {
        return Err(HarnessError::EmptyManifest);
    }
    if manifest.classes() != backend.classes() {
        return Err(HarnessError::ClassMismatch {
            manifest: manifest.classes(),
            backend: backend.classes(),
        });
    }
    backend.check_policy(policy)?;
    Ok(())
}

fn simulated_ms(
    model: &LatencyModel,
    policy: &TransformPolicy,
    mode: ExecutionMode,
    used: usize,
) -> f64 {
    match mode {
        ExecutionMode::Batch => model.batched_ms(policy.views()),
        ExecutionMode::Sequential | ExecutionMode::Adaptive => {
            model.sequential_ms(&policy.views()[..used])
        }
    }
}

/// Top-1 accuracy of the center-crop-only prediction, the reference for
/// accuracy gain.
pub fn baseline_single<B: Backend + ?Sized>(
    backend: &B,
    manifest: &DatasetManifest,
    policy: &TransformPolicy,
) -> Result<f64, HarnessError> {
    let center = policy.center_only();
    check_inputs(backend, manifest, &center)?;
    let cfg = AdapttaConfig::new(0.0, center, ExecutionMode::Sequential)?;
    let mut correct = 0usize;
    for entry in manifest.entries() {
        let loaded = load(entry)?;
        let out = engine::run_static(backend, loaded.as_input(), &cfg).map_err(|source| {
            HarnessError::Engine {
                sample_id: entry.sample_id.clone(),
                source,
            }
        })?;
        correct += usize::from(out.label == entry.label);
    }
    Ok(correct as f64 / manifest.len() as f64)
}

fn evaluate_against<B: Backend + ?Sized>(
    backend: &B,
    manifest: &DatasetManifest,
    cfg: &AdapttaConfig,
    latency: &LatencySource,
    baseline: f64,
) -> Result<Evaluation, HarnessError> {
    check_inputs(backend, manifest, cfg.policy())?;
    let mut results = Vec::with_capacity(manifest.len());
    for entry in manifest.entries() {
        let loaded = load(entry)?;
        let started = Instant::now();
        let outcome = engine::run(backend, loaded.as_input(), cfg);
        let elapsed_ms = started.elapsed().as_secs_f64() * 1e3;
        let outcome = outcome.map_err(|source| HarnessError::Engine {
            sample_id: entry.sample_id.clone(),
            source,
        })?;
        let latency_ms = match latency {
            LatencySource::WallClock => elapsed_ms,
            LatencySource::Simulated(model) => {
                simulated_ms(model, cfg.policy(), cfg.mode(), outcome.inferences_used)
            }
        };
        results.push(SampleResult {
            sample_id: entry.sample_id.clone(),
            true_label: entry.label,
            predicted: outcome.label,
            confidence: outcome.confidence,
            inferences_used: outcome.inferences_used,
            latency_ms,
        });
    }
    let report = summarize(&results, cfg, latency.kind(), baseline)?;
    Ok(Evaluation {
        report,
        samples: results,
    })
}

fn summarize(
    results: &[SampleResult],
    cfg: &AdapttaConfig,
    kind: LatencyKind,
    baseline: f64,
) -> Result<BenchmarkReport, HarnessError> {
    let n = results.len() as f64;
    let correct = results
        .iter()
        .filter(|r| r.predicted == r.true_label)
        .count();
    let top1_accuracy = correct as f64 / n;
    let avg_inferences = results
        .iter()
        .map(|r| r.inferences_used as f64)
        .sum::<f64>()
        / n;
    let mut latencies: Vec<f64> = results.iter().map(|r| r.latency_ms).collect();
    let avg_latency_ms = latencies.iter().sum::<f64>() / n;
    if avg_latency_ms.is_nan() || avg_latency_ms <= 0.0 {
        return Err(HarnessError::ZeroLatency);
    }
    latencies.sort_by(f64::total_cmp);
    Ok(BenchmarkReport {
        mode: cfg.mode(),
        policy: cfg.policy().name().to_string(),
        tau: cfg.tau(),
        samples: results.len(),
        top1_accuracy,
        accuracy_gain_vs_single: top1_accuracy - baseline,
        avg_inferences,
        avg_latency_ms,
        avg_fps: 1000.0 / avg_latency_ms,
        speedup_vs_seq: (cfg.mode() == ExecutionMode::Sequential).then_some(1.0),
        latency_source: kind,
        median_latency_ms: median(&latencies),
        p95_latency_ms: nearest_rank(&latencies, 0.95),
        latency_scope: LATENCY_SCOPE.to_string(),
    })
}

fn median(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0
    }
}

fn nearest_rank(sorted: &[f64], q: f64) -> f64 {
    let rank = (q * sorted.len() as f64).ceil() as usize;
    sorted[rank.clamp(1, sorted.len()) - 1]
}

/// Runs the configured executor over every sample, with per-sample detail.
pub fn evaluate_detailed<B: Backend + ?Sized>(
    backend: &B,
    manifest: &DatasetManifest,
    cfg: &AdapttaConfig,
    latency: &LatencySource,
) -> Result<Evaluation, HarnessError> {
    check_inputs(backend, manifest, cfg.policy())?;
    let baseline = baseline_single(backend, manifest, cfg.policy())?;
    evaluate_against(backend, manifest, cfg, latency, baseline)
}

/// Runs the configured executor over every sample.
pub fn evaluate<B: Backend + ?Sized>(
    backend: &B,
    manifest: &DatasetManifest,
    cfg: &AdapttaConfig,
    latency: &LatencySource,
) -> Result<BenchmarkReport, HarnessError> {
    evaluate_detailed(backend, manifest, cfg, latency).map(|e| e.report)
}

/// Adaptive runs at each threshold, ordered by ascending threshold.
pub fn sweep_tau<B: Backend + ?Sized>(
    backend: &B,
    manifest: &DatasetManifest,
    cfg: &AdapttaConfig,
    taus: &[f64],
    latency: &LatencySource,
) -> Result<Vec<BenchmarkReport>, HarnessError> {
    if taus.is_empty() {
        return Err(HarnessError::EmptySweep);
    }
    for &t in taus {
        check_tau(t)?;
    }
    let mut sorted = taus.to_vec();
    sorted.sort_by(f64::total_cmp);
    check_inputs(backend, manifest, cfg.policy())?;
    let baseline = baseline_single(backend, manifest, cfg.policy())?;
    let adaptive = cfg.with_mode(ExecutionMode::Adaptive);
    sorted
        .into_iter()
        .map(|t| {
            let c = adaptive.with_tau(t)?;
            evaluate_against(backend, manifest, &c, latency, baseline).map(|e| e.report)
        })
        .collect()
}

/// Batch, sequential and adaptive runs of the same policy, with each
/// report's speedup relative to the sequential run.
pub fn compare_modes<B: Backend + ?Sized>(
    backend: &B,
    manifest: &DatasetManifest,
    policy: &TransformPolicy,
    tau: f64,
    latency: &LatencySource,
) -> Result<ModeComparison, HarnessError> {
    let base = AdapttaConfig::new(tau, policy.clone(), ExecutionMode::Sequential)?;
    check_inputs(backend, manifest, policy)?;
    let baseline = baseline_single(backend, manifest, policy)?;
    let run = |mode| {
        evaluate_against(backend, manifest, &base.with_mode(mode), latency, baseline)
            .map(|e| e.report)
    };
    let mut batch = run(ExecutionMode::Batch)?;
    let sequential = run(ExecutionMode::Sequential)?;
    let mut adaptive = run(ExecutionMode::Adaptive)?;
    batch.speedup_vs_seq = Some(sequential.avg_latency_ms / batch.avg_latency_ms);
    adaptive.speedup_vs_seq = Some(sequential.avg_latency_ms / adaptive.avg_latency_ms);
    Ok(ModeComparison {
        batch,
        sequential,
        adaptive,
    })
}
