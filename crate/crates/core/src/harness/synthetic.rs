//! Seeded synthetic traces for tests, sweeps and demos.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::backend::{ProbVector, TraceBackend, TraceHeader, TraceRecord};
use crate::imaging::{FIVE_CROP, TEN_CROP};

/// Shape of a random trace. Each sample gets a random true label and a
/// random difficulty; per-view logits are a shared sample-level logit
/// vector (biased toward the label by the difficulty draw) plus independent
/// Gaussian view noise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyntheticTrace {
    pub samples: usize,
    pub classes: usize,
    pub num_views: usize,
    pub seed: u64,
    /// Largest label bias; the per-sample bias is uniform in `[0, max_signal)`.
    pub max_signal: f64,
    /// Standard deviation of per-view logit noise.
    pub view_noise: f64,
}

impl SyntheticTrace {
    pub fn new(samples: usize, classes: usize, num_views: usize, seed: u64) -> Self {
        Self {
            samples,
            classes,
            num_views,
            seed,
            max_signal: 6.0,
            view_noise: 1.0,
        }
    }

    pub fn records(&self) -> Vec<TraceRecord> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let mut out = Vec::with_capacity(self.samples * self.num_views);
        for s in 0..self.samples {
            let label = rng.random_range(0..self.classes);
            let signal = rng.random_range(0.0..self.max_signal);
            let base: Vec<f64> = (0..self.classes)
                .map(|k| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    z + if k == label { signal } else { 0.0 }
                })
                .collect();
            for v in 0..self.num_views {
                let logits: Vec<f64> = base
                    .iter()
                    .map(|b| {
                        let z: f64 = StandardNormal.sample(&mut rng);
                        b + self.view_noise * z
                    })
                    .collect();
                out.push(TraceRecord {
                    sample_id: format!("s{s:05}"),
                    view_index: v,
                    true_label: label,
                    probs: ProbVector::softmax(&logits).expect("softmax of finite logits"),
                });
            }
        }
        out
    }

    pub fn header(&self) -> TraceHeader {
        TraceHeader {
            classes: self.classes,
            policy: policy_name(self.num_views),
            num_views: self.num_views,
        }
    }

    pub fn build(&self) -> TraceBackend {
        TraceBackend::from_records(self.header(), self.records())
            .expect("synthetic records satisfy the trace invariants")
    }
}

fn policy_name(num_views: usize) -> String {
    match num_views {
        5 => FIVE_CROP.to_string(),
        10 => TEN_CROP.to_string(),
        n => format!("custom{n}"),
    }
}

/// A two-class trace in which sample `i` first exceeds a 0.8 confidence
/// threshold after exactly `depths[i]` views (or never, when the depth
/// equals `num_views`). Every sample is labelled 0 and predicted 0.
///
/// Hesitant views are `[0.895, 0.105]` (score 0.79); the exiting view is
/// `[1, 0]`, which lifts the running score above 0.8 for any depth up to 10.
pub fn forced_depth_trace(depths: &[usize], num_views: usize) -> TraceBackend {
    assert!(
        (1..=10).contains(&num_views),
        "forced depths are calibrated for N <= 10"
    );
    let hesitant = ProbVector::new(vec![0.895, 0.105]).expect("valid");
    let decisive = ProbVector::new(vec![1.0, 0.0]).expect("valid");
    let mut records = Vec::with_capacity(depths.len() * num_views);
    for (i, &depth) in depths.iter().enumerate() {
        assert!(
            (1..=num_views).contains(&depth),
            "depth {depth} outside 1..={num_views}"
        );
        for v in 0..num_views {
            let exiting = depth < num_views && v + 1 == depth;
            records.push(TraceRecord {
                sample_id: format!("f{i:05}"),
                view_index: v,
                true_label: 0,
                probs: if exiting {
                    decisive.clone()
                } else {
                    hesitant.clone()
                },
            });
        }
    }
    let header = TraceHeader {
        classes: 2,
        policy: policy_name(num_views),
        num_views,
    };
    TraceBackend::from_records(header, records).expect("forced records are valid")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backend::Backend;

    #[test]
    fn deterministic_per_seed() {
        let a = SyntheticTrace::new(10, 4, 5, 3).records();
        let b = SyntheticTrace::new(10, 4, 5, 3).records();
        let c = SyntheticTrace::new(10, 4, 5, 4).records();
        assert_eq!(a, b);
        assert_ne!(a, c);
        let t = SyntheticTrace::new(10, 4, 5, 3).build();
        assert_eq!((t.len(), t.num_views(), t.classes()), (10, 5, 4));
        assert_eq!(t.header().policy, "5C");
    }
}
