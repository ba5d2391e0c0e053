use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use adaptta::backend::trace::write_trace;
use adaptta::backend::{Backend, TraceHeader, TraceRecord, ViewInput};
use adaptta::harness::{self, DatasetManifest, SampleSource};
use adaptta::imaging::{ppm, ImagingError};
use adaptta::{AdapttaConfig, BenchmarkReport, ToyClassifier, TraceBackend, TransformPolicy};
use serde::Serialize;

use crate::args::{BackendSpec, Format, Resolved};
use crate::error::CliError;
use crate::latency::parse_latency;

/// Thresholds swept when `--taus` is not given: 0.0, 0.1, ..., 1.0.
fn default_taus() -> Vec<f64> {
    (0..=10).map(|i| f64::from(i) / 10.0).collect()
}

fn policy_by_name(name: &str) -> Result<TransformPolicy, CliError> {
    TransformPolicy::by_name(name).map_err(|e| match e {
        ImagingError::UnknownPolicy(_) => CliError::Usage(format!("{e}; expected 5C or 10C")),
        other => CliError::Internal(other.to_string()),
    })
}

/// A loaded backend with the samples and policy to run it on.
struct Setup {
    backend: Box<dyn Backend>,
    manifest: DatasetManifest,
    policy: TransformPolicy,
}

fn setup(cfg: &Resolved) -> Result<Setup, CliError> {
    match &cfg.backend {
        BackendSpec::Trace(path) => {
            let trace = TraceBackend::load(path)
                .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
            // Default to the policy the trace was recorded with.
            let policy = match &cfg.policy {
                Some(name) => policy_by_name(name)?,
                None => TransformPolicy::by_name(&trace.header().policy)
                    .or_else(|_| TransformPolicy::by_name("5C"))
                    .map_err(|e| CliError::Internal(e.to_string()))?,
            };
            let all = DatasetManifest::from_trace(&trace);
            let manifest = match &cfg.manifest {
                Some(path) => select_from_trace(&all, &trace, path)?,
                None => all,
            };
            Ok(Setup {
                backend: Box::new(trace),
                manifest,
                policy,
            })
        }
        BackendSpec::Toy { seed, classes } => {
            let policy = policy_by_name(cfg.policy.as_deref().unwrap_or("5C"))?;
            let path = cfg.manifest.as_ref().ok_or_else(|| {
                CliError::Usage(
                    "the toy backend needs --manifest with the images to classify".into(),
                )
            })?;
            let toy = ToyClassifier::new(*seed, *classes, policy.view_side())
                .map_err(|e| CliError::Usage(format!("--classes: {e}")))?;
            let manifest = DatasetManifest::load_tsv(path, *classes)?;
            Ok(Setup {
                backend: Box::new(toy),
                manifest,
                policy,
            })
        }
    }
}

/// Restricts a trace to the samples listed in a manifest file. The file's
/// labels must agree with the trace's; its path column is not used.
fn select_from_trace(
    all: &DatasetManifest,
    trace: &TraceBackend,
    path: &Path,
) -> Result<DatasetManifest, CliError> {
    let listed = DatasetManifest::load_tsv(path, all.classes())?;
    for entry in listed.entries() {
        match trace.label(&entry.sample_id) {
            Some(label) if label == entry.label => {}
            Some(label) => {
                return Err(CliError::Data(format!(
                    "{}: sample {:?} has label {} but the trace records {label}",
                    path.display(),
                    entry.sample_id,
                    entry.label
                )))
            }
            None => {
                return Err(CliError::Data(format!(
                    "{}: sample {:?} is not in the trace",
                    path.display(),
                    entry.sample_id
                )))
            }
        }
    }
    let ids: Vec<&str> = listed
        .entries()
        .iter()
        .map(|e| e.sample_id.as_str())
        .collect();
    Ok(all.select(&ids)?)
}

pub fn run(cfg: &Resolved) -> Result<(), CliError> {
    let latency = parse_latency(&cfg.latency)?;
    let s = setup(cfg)?;
    let config = AdapttaConfig::new(cfg.tau, s.policy, cfg.mode)
        .map_err(|e| CliError::Usage(e.to_string()))?;
    let report = harness::evaluate(s.backend.as_ref(), &s.manifest, &config, &latency)?;
    emit(cfg, &report, std::slice::from_ref(&report))
}

pub fn sweep(cfg: &Resolved) -> Result<(), CliError> {
    let latency = parse_latency(&cfg.latency)?;
    let s = setup(cfg)?;
    let taus = cfg.taus.clone().unwrap_or_else(default_taus);
    let config = AdapttaConfig::new(cfg.tau, s.policy, cfg.mode)
        .map_err(|e| CliError::Usage(e.to_string()))?;
    let reports = harness::sweep_tau(s.backend.as_ref(), &s.manifest, &config, &taus, &latency)?;
    emit(cfg, &reports, &reports)
}

pub fn compare(cfg: &Resolved) -> Result<(), CliError> {
    let latency = parse_latency(&cfg.latency)?;
    let s = setup(cfg)?;
    let cmp = harness::compare_modes(
        s.backend.as_ref(),
        &s.manifest,
        &s.policy,
        cfg.tau,
        &latency,
    )?;
    let rows: Vec<BenchmarkReport> = cmp.reports().into_iter().cloned().collect();
    emit(cfg, &cmp, &rows)
}

pub fn gen_trace(cfg: &Resolved) -> Result<(), CliError> {
    let BackendSpec::Toy { classes, .. } = cfg.backend else {
        return Err(CliError::Usage(
            "gen-trace needs --toy-seed and --classes, not --trace".into(),
        ));
    };
    let s = setup(cfg)?;
    let records = record_views(s.backend.as_ref(), &s.manifest, &s.policy)?;
    let header = TraceHeader {
        classes,
        policy: s.policy.name().to_string(),
        num_views: s.policy.len(),
    };
    write_output(cfg.out.as_deref(), |w| write_trace(w, &header, records))
}

/// Runs every view of every image through the backend, in manifest order.
fn record_views(
    backend: &dyn Backend,
    manifest: &DatasetManifest,
    policy: &TransformPolicy,
) -> Result<Vec<TraceRecord>, CliError> {
    let mut records = Vec::with_capacity(manifest.len() * policy.len());
    for entry in manifest.entries() {
        let SampleSource::Image(path) = &entry.source else {
            return Err(CliError::Internal(
                "image manifest entry without a path".into(),
            ));
        };
        let data_err = |e: &dyn std::fmt::Display| {
            CliError::Data(format!(
                "sample {:?} ({}): {e}",
                entry.sample_id,
                path.display()
            ))
        };
        let img = ppm::read_file(path).map_err(|e| data_err(&e))?;
        let source = policy.prepare_source(&img).map_err(|e| data_err(&e))?;
        for index in 0..policy.len() {
            let view = policy.view(&source, index).map_err(|e| data_err(&e))?;
            let probs = backend
                .predict(ViewInput::Pixels(&view))
                .map_err(|e| CliError::Internal(e.to_string()))?;
            records.push(TraceRecord {
                sample_id: entry.sample_id.clone(),
                view_index: index,
                true_label: entry.label,
                probs,
            });
        }
    }
    Ok(records)
}

/// Writes `json_value` as JSON, or `rows` as CSV with one line per report.
fn emit<T: Serialize>(
    cfg: &Resolved,
    json_value: &T,
    rows: &[BenchmarkReport],
) -> Result<(), CliError> {
    write_output(cfg.out.as_deref(), |w| match cfg.format {
        Format::Json => {
            serde_json::to_writer_pretty(&mut *w, json_value)?;
            w.write_all(b"\n")
        }
        Format::Csv => {
            let mut csv = csv::Writer::from_writer(w);
            for r in rows {
                csv.serialize(r).map_err(io::Error::other)?;
            }
            csv.flush()
        }
    })
}

fn write_output(
    out: Option<&Path>,
    write: impl FnOnce(&mut dyn Write) -> io::Result<()>,
) -> Result<(), CliError> {
    let fail = |e: io::Error| {
        let target = out.map_or_else(|| "stdout".to_string(), |p| p.display().to_string());
        CliError::Internal(format!("writing {target}: {e}"))
    };
    match out {
        Some(path) => {
            let file = File::create(path).map_err(fail)?;
            let mut w = BufWriter::new(file);
            write(&mut w).map_err(fail)?;
            w.flush().map_err(fail)
        }
        None => {
            let stdout = io::stdout();
            let mut w = BufWriter::new(stdout.lock());
            write(&mut w).map_err(fail)?;
            w.flush().map_err(fail)
        }
    }
}
