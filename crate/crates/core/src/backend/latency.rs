use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::imaging::ViewSpec;

// MobileNetV1 on a 4-core Cortex-A53: single inference, batch of 5 and batch
// of 10 (ms), plus per-view crop and flip costs.
const REF_SINGLE_MS: f64 = 53.1;
const REF_BATCH5_MS: f64 = 290.6;
const REF_BATCH10_MS: f64 = 569.9;
const REF_CROP_MS: f64 = 0.8;
const REF_FLIP_MS: f64 = 0.9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LatencyError {
    #[error("{what} must be a finite non-negative number of milliseconds, got {value}")]
    Negative { what: String, value: f64 },
    #[error("batch size must be at least 1")]
    ZeroBatch,
}

/// Parametric cost model used for simulated latency accounting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatencyModel {
    per_inference_ms: f64,
    per_crop_ms: f64,
    per_flip_ms: f64,
    /// Total cost of one batched inference, keyed by batch size.
    batch_curve: BTreeMap<usize, f64>,
}

fn check(what: &str, value: f64) -> Result<f64, LatencyError> {
    if value.is_finite() && value >= 0.0 {
        Ok(value)
    } else {
        Err(LatencyError::Negative {
            what: what.to_string(),
            value,
        })
    }
}

impl LatencyModel {
    /// A model whose batch curve keeps the reference device's batch-5 and
    /// batch-10 ratios to single-inference cost.
    pub fn new(
        per_inference_ms: f64,
        per_crop_ms: f64,
        per_flip_ms: f64,
    ) -> Result<Self, LatencyError> {
        let per_inference_ms = check("per-inference cost", per_inference_ms)?;
        let batch_curve = BTreeMap::from([
            (1, per_inference_ms),
            (5, per_inference_ms * REF_BATCH5_MS / REF_SINGLE_MS),
            (10, per_inference_ms * REF_BATCH10_MS / REF_SINGLE_MS),
        ]);
        Ok(Self {
            per_inference_ms,
            per_crop_ms: check("crop cost", per_crop_ms)?,
            per_flip_ms: check("flip cost", per_flip_ms)?,
            batch_curve,
        })
    }

    /// MobileNetV1 timings on the reference embedded CPU.
    pub fn reference_cortex_a53() -> Self {
        Self {
            per_inference_ms: REF_SINGLE_MS,
            per_crop_ms: REF_CROP_MS,
            per_flip_ms: REF_FLIP_MS,
            batch_curve: BTreeMap::from([
                (1, REF_SINGLE_MS),
                (5, REF_BATCH5_MS),
                (10, REF_BATCH10_MS),
            ]),
        }
    }

    /// Sets the total cost of a batch of `size`. Setting size 1 also sets
    /// the per-inference cost.
    pub fn with_batch_point(mut self, size: usize, total_ms: f64) -> Result<Self, LatencyError> {
        if size == 0 {
            return Err(LatencyError::ZeroBatch);
        }
        let total_ms = check(&format!("batch-{size} cost"), total_ms)?;
        self.batch_curve.insert(size, total_ms);
        if size == 1 {
            self.per_inference_ms = total_ms;
        }
        Ok(self)
    }

    pub fn without_transform_costs(self) -> Self {
        Self {
            per_crop_ms: 0.0,
            per_flip_ms: 0.0,
            ..self
        }
    }

    pub fn per_inference_ms(&self) -> f64 {
        self.per_inference_ms
    }

    pub fn per_crop_ms(&self) -> f64 {
        self.per_crop_ms
    }

    pub fn per_flip_ms(&self) -> f64 {
        self.per_flip_ms
    }

    pub fn batch_curve(&self) -> &BTreeMap<usize, f64> {
        &self.batch_curve
    }

    /// Cost of one batched inference over `size` inputs. Sizes between
    /// curve points are linearly interpolated; sizes past the last point
    /// scale proportionally from it.
    pub fn batch_ms(&self, size: usize) -> f64 {
        if size == 0 {
            return 0.0;
        }
        if let Some(&ms) = self.batch_curve.get(&size) {
            return ms;
        }
        let below = self.batch_curve.range(..size).next_back();
        let above = self.batch_curve.range(size..).next();
        match (below, above) {
            (Some((&lo, &lo_ms)), Some((&hi, &hi_ms))) => {
                let t = (size - lo) as f64 / (hi - lo) as f64;
                lo_ms + t * (hi_ms - lo_ms)
            }
            (Some((&lo, &lo_ms)), None) => lo_ms * size as f64 / lo as f64,
            (None, Some((&hi, &hi_ms))) => hi_ms * size as f64 / hi as f64,
            (None, None) => self.per_inference_ms * size as f64,
        }
    }

    /// Crop cost for every view plus flip cost for mirrored ones.
    pub fn transform_ms(&self, views: &[ViewSpec]) -> f64 {
        views
            .iter()
            .map(|v| self.per_crop_ms + if v.hflip { self.per_flip_ms } else { 0.0 })
            .sum()
    }

    /// One inference per view, run back to back.
    pub fn sequential_ms(&self, views: &[ViewSpec]) -> f64 {
        views.len() as f64 * self.per_inference_ms + self.transform_ms(views)
    }

    /// All views in a single batched inference.
    pub fn batched_ms(&self, views: &[ViewSpec]) -> f64 {
        self.batch_ms(views.len()) + self.transform_ms(views)
    }
}

impl Default for LatencyModel {
    fn default() -> Self {
        Self::reference_cortex_a53()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imaging::TransformPolicy;

    #[test]
    fn reference_curve() {
        let m = LatencyModel::reference_cortex_a53();
        assert_eq!(m.batch_ms(1), m.per_inference_ms());
        assert_eq!(m.batch_ms(5), 290.6);
        assert_eq!(m.batch_ms(10), 569.9);
        // Batching is slower than running the same inferences one by one.
        assert!(m.batch_ms(5) > 5.0 * m.per_inference_ms());
        assert!(m.batch_ms(10) > 10.0 * m.per_inference_ms());
    }

    #[test]
    fn interpolation_and_extrapolation() {
        let m = LatencyModel::reference_cortex_a53();
        let b3 = m.batch_ms(3);
        assert!((b3 - (53.1 + 0.5 * (290.6 - 53.1))).abs() < 1e-12);
        assert!((m.batch_ms(20) - 2.0 * 569.9).abs() < 1e-9);
        assert_eq!(m.batch_ms(0), 0.0);
    }

    #[test]
    fn scaled_default_curve() {
        let m = LatencyModel::new(10.0, 0.0, 0.0).unwrap();
        assert_eq!(m.batch_ms(1), 10.0);
        assert!((m.batch_ms(5) - 10.0 * 290.6 / 53.1).abs() < 1e-12);
        assert!(LatencyModel::new(-1.0, 0.0, 0.0).is_err());
        assert!(LatencyModel::new(1.0, f64::NAN, 0.0).is_err());
    }

    #[test]
    fn batch_point_one_updates_single_cost() {
        let m = LatencyModel::new(10.0, 0.0, 0.0)
            .unwrap()
            .with_batch_point(1, 12.0)
            .unwrap();
        assert_eq!(m.per_inference_ms(), 12.0);
        assert!(LatencyModel::default().with_batch_point(0, 1.0).is_err());
    }

    #[test]
    fn transform_charges() {
        let m = LatencyModel::reference_cortex_a53();
        let p10 = TransformPolicy::by_name("10C").unwrap();
        // Ten crops and five flips.
        assert!((m.transform_ms(p10.views()) - (10.0 * 0.8 + 5.0 * 0.9)).abs() < 1e-12);
        let p5 = TransformPolicy::by_name("5C").unwrap();
        assert!((m.sequential_ms(p5.views()) - (5.0 * 53.1 + 4.0)).abs() < 1e-9);
        assert!((m.batched_ms(p5.views()) - (290.6 + 4.0)).abs() < 1e-9);
    }
}
