mod common;

use adaptta::backend::{
    Backend, ProbVector, ToyClassifier, TraceBackend, TraceHeader, TraceRecord, ViewInput,
};
use adaptta::engine::{run_adaptta, run_static, AdapttaConfig, ExecutionMode, SampleInput};
use adaptta::harness::synthetic::SyntheticTrace;
use adaptta::harness::{sweep_tau, DatasetManifest, LatencySource};
use adaptta::imaging::{Image, TransformPolicy};
use adaptta::LatencyModel;

use common::{brute_force_stop, first_argmax, prefix_mean, rows};

fn cfg(policy: &str, tau: f64, mode: ExecutionMode) -> AdapttaConfig {
    AdapttaConfig::new(tau, TransformPolicy::by_name(policy).unwrap(), mode).unwrap()
}

#[test]
fn adaptive_mean_inferences_match_prefix_scan() {
    let trace = SyntheticTrace::new(100, 10, 5, 2024).build();
    let c = cfg("5C", 0.8, ExecutionMode::Adaptive);
    let mut engine_total = 0usize;
    let mut oracle_total = 0usize;
    for (id, _) in trace.samples() {
        let out = run_adaptta(&trace, SampleInput::Recorded(id), &c).unwrap();
        let expected = brute_force_stop(&rows(&trace, id, 5), 0.8);
        assert_eq!(out.inferences_used, expected, "sample {id}");
        engine_total += out.inferences_used;
        oracle_total += expected;
    }
    assert_eq!(engine_total, oracle_total);
    // Frozen from the prefix-scan oracle for this seed.
    assert_eq!(oracle_total, FROZEN_TOTAL_INFERENCES_5C_SEED2024);
}

const FROZEN_TOTAL_INFERENCES_5C_SEED2024: usize = 376;

#[test]
fn batch_over_ten_crop_views_equals_sequential_predicts() {
    let img = Image::from_fn(256, 256, |x, y, c| {
        ((x * x / 7 + y * 3 + c * 71) % 256) as u8
    })
    .unwrap();
    let policy = TransformPolicy::by_name("10C").unwrap();
    let toy = ToyClassifier::new(11, 10, 224).unwrap();
    let source = policy.prepare_source(&img).unwrap();
    let views: Vec<Image> = (0..10).map(|i| policy.view(&source, i).unwrap()).collect();
    let inputs: Vec<ViewInput> = views.iter().map(ViewInput::Pixels).collect();
    let batched = toy.predict_batch(&inputs).unwrap();
    let mut sequential = Vec::new();
    for v in &views {
        sequential.push(toy.predict(ViewInput::Pixels(v)).unwrap());
    }
    assert_eq!(batched, sequential);
    // Batches of one and of identical views.
    assert_eq!(toy.predict_batch(&inputs[..1]).unwrap(), sequential[..1]);
    let same = vec![ViewInput::Pixels(&views[3]); 5];
    let out = toy.predict_batch(&same).unwrap();
    assert!(out.iter().all(|p| *p == sequential[3]));
}

/// Twenty samples over three classes with hand-picked rows. Class `majority`
/// tops three of the five views, but class `mean_winner` has the larger
/// mean: (3*0.3 + 2*0.7)/5 = 0.46 against (3*0.6 + 2*0.2)/5 = 0.44.
fn crafted_trace() -> (TraceBackend, Vec<usize>) {
    let header = TraceHeader {
        classes: 3,
        policy: "5C".into(),
        num_views: 5,
    };
    let mut records = Vec::new();
    let mut majorities = Vec::new();
    for s in 0..20usize {
        let majority = (s * 7) % 3;
        let mean_winner = (majority + 1 + s % 2) % 3;
        let label = if s % 4 == 0 { mean_winner } else { majority };
        majorities.push(majority);
        for v in 0..5 {
            let mut p = vec![0.1; 3];
            if v < 3 {
                p[majority] = 0.6;
                p[mean_winner] = 0.3;
            } else {
                p[mean_winner] = 0.7;
                p[majority] = 0.2;
            }
            records.push(TraceRecord {
                sample_id: format!("h{s:02}"),
                view_index: v,
                true_label: label,
                probs: ProbVector::new(p).unwrap(),
            });
        }
    }
    (
        TraceBackend::from_records(header, records).unwrap(),
        majorities,
    )
}

#[test]
fn static_five_crop_accuracy_matches_mean_argmax() {
    let (trace, majorities) = crafted_trace();
    let c = cfg("5C", 0.8, ExecutionMode::Sequential);
    let mut engine_correct = 0;
    let mut oracle_correct = 0;
    for ((id, label), majority) in trace.samples().zip(&majorities) {
        let mean = prefix_mean(&rows(&trace, id, 5), 5);
        let oracle_label = first_argmax(&mean);
        assert_ne!(oracle_label, *majority);
        let out = run_static(&trace, SampleInput::Recorded(id), &c).unwrap();
        assert_eq!(out.label, oracle_label);
        engine_correct += usize::from(out.label == label);
        oracle_correct += usize::from(oracle_label == label);
    }
    assert_eq!(engine_correct, oracle_correct);
    // Labels name the mean winner only when s % 4 == 0.
    assert_eq!(oracle_correct, 5);
}

#[test]
fn sweep_matches_prefix_scan_per_threshold() {
    let trace = SyntheticTrace::new(120, 10, 10, 77).build();
    let manifest = DatasetManifest::from_trace(&trace);
    let c = cfg("10C", 0.8, ExecutionMode::Adaptive);
    let taus = [0.2, 0.5, 0.8];
    let latency = LatencySource::Simulated(LatencyModel::reference_cortex_a53());
    let reports = sweep_tau(&trace, &manifest, &c, &taus, &latency).unwrap();
    for (report, &tau) in reports.iter().zip(&taus) {
        let total: usize = trace
            .samples()
            .map(|(id, _)| brute_force_stop(&rows(&trace, id, 10), tau))
            .sum();
        let expected = total as f64 / trace.len() as f64;
        assert_eq!(report.tau, tau);
        assert!(
            (report.avg_inferences - expected).abs() < 1e-12,
            "tau {tau}"
        );
    }
}
