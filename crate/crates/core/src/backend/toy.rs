use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Backend, BackendError, ProbError, ProbVector, ViewInput};
use crate::imaging::{Image, CHANNELS};

/// Side of the average-pooling grid the classifier reads.
pub const POOL_GRID: usize = 8;
const FEATURES: usize = POOL_GRID * POOL_GRID * CHANNELS;
const WEIGHT_SCALE: f64 = 0.5;

/// Deterministic linear-softmax classifier: the view is average-pooled to an
/// 8×8×3 grid of intensities in [0, 1], multiplied by a seeded random weight
/// matrix, and passed through softmax. There is no bias, so a black view
/// yields a uniform distribution.
#[derive(Debug, Clone)]
pub struct ToyClassifier {
    seed: u64,
    classes: usize,
    view_side: usize,
    /// Row-major `classes × FEATURES`.
    weights: Vec<f64>,
}

impl ToyClassifier {
    pub fn new(seed: u64, classes: usize, view_side: usize) -> Result<Self, ProbError> {
        if classes < 2 {
            return Err(ProbError::TooFewClasses(classes));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let weights = (0..classes * FEATURES)
            .map(|_| rng.random_range(-WEIGHT_SCALE..WEIGHT_SCALE))
            .collect();
        Ok(Self {
            seed,
            classes,
            view_side,
            weights,
        })
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn view_side(&self) -> usize {
        self.view_side
    }

    pub fn feature_len(&self) -> usize {
        FEATURES
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    fn pooled_features(img: &Image) -> Vec<f64> {
        let mut sums = vec![0.0f64; FEATURES];
        let mut counts = vec![0u32; POOL_GRID * POOL_GRID];
        let (w, h) = (img.width(), img.height());
        for y in 0..h {
            let by = y * POOL_GRID / h;
            for x in 0..w {
                let bin = by * POOL_GRID + x * POOL_GRID / w;
                counts[bin] += 1;
                for (c, &v) in img.pixel(x, y).iter().enumerate() {
                    sums[bin * CHANNELS + c] += f64::from(v);
                }
            }
        }
        for (i, s) in sums.iter_mut().enumerate() {
            let n = counts[i / CHANNELS];
            if n > 0 {
                *s /= f64::from(n) * 255.0;
            }
        }
        sums
    }

    pub fn logits(&self, img: &Image) -> Vec<f64> {
        let features = Self::pooled_features(img);
        self.weights
            .chunks_exact(FEATURES)
            .map(|row| row.iter().zip(&features).map(|(w, f)| w * f).sum())
            .collect()
    }
}

impl Backend for ToyClassifier {
    fn name(&self) -> &'static str {
        "toy"
    }

    fn classes(&self) -> usize {
        self.classes
    }

    fn predict(&self, input: ViewInput<'_>) -> Result<ProbVector, BackendError> {
        let img = match input {
            ViewInput::Pixels(img) => img,
            ViewInput::Recorded { .. } => {
                return Err(BackendError::UnsupportedInput {
                    backend: "toy",
                    input: "recorded",
                })
            }
        };
        if img.width() != self.view_side || img.height() != self.view_side {
            return Err(BackendError::DimensionMismatch {
                expected: self.view_side,
                actual_width: img.width(),
                actual_height: img.height(),
            });
        }
        Ok(ProbVector::softmax(&self.logits(img))?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Direct evaluation: mean intensity of each 8x8 cell, dot product with
    /// the published weight rows, softmax.
    fn oracle(model: &ToyClassifier, img: &Image) -> Vec<f64> {
        let side = img.width();
        let cell = side / POOL_GRID;
        assert_eq!(cell * POOL_GRID, side, "oracle needs a divisible side");
        let mut feats = vec![];
        for gy in 0..POOL_GRID {
            for gx in 0..POOL_GRID {
                for c in 0..3 {
                    let mut acc = 0.0;
                    for y in gy * cell..(gy + 1) * cell {
                        for x in gx * cell..(gx + 1) * cell {
                            acc += img.sample(x, y, c) as f64;
                        }
                    }
                    feats.push(acc / (cell * cell) as f64 / 255.0);
                }
            }
        }
        let d = feats.len();
        let logits: Vec<f64> = (0..model.classes())
            .map(|k| (0..d).map(|i| model.weights()[k * d + i] * feats[i]).sum())
            .collect();
        let m = logits.iter().cloned().fold(f64::MIN, f64::max);
        let e: Vec<f64> = logits.iter().map(|l| (l - m).exp()).collect();
        let z: f64 = e.iter().sum();
        e.iter().map(|v| v / z).collect()
    }

    fn pattern(side: usize) -> Image {
        Image::from_fn(side, side, |x, y, c| {
            ((x * 7 + y * 13 + c * 61) % 256) as u8
        })
        .unwrap()
    }

    #[test]
    fn zero_image_is_uniform() {
        let m = ToyClassifier::new(3, 4, 16).unwrap();
        let p = m
            .predict(ViewInput::Pixels(&Image::filled(16, 16, 0).unwrap()))
            .unwrap();
        assert_eq!(p.as_slice(), &[0.25; 4]);
    }

    #[test]
    fn same_seed_same_model() {
        let a = ToyClassifier::new(42, 10, 32).unwrap();
        let b = ToyClassifier::new(42, 10, 32).unwrap();
        assert_eq!(a.weights(), b.weights());
        let img = pattern(32);
        assert_eq!(
            a.predict(ViewInput::Pixels(&img)).unwrap(),
            b.predict(ViewInput::Pixels(&img)).unwrap()
        );
        assert_eq!(
            a.predict(ViewInput::Pixels(&img)).unwrap(),
            a.predict(ViewInput::Pixels(&img)).unwrap()
        );
    }

    #[test]
    fn seeds_differ_and_match_oracle() {
        let img = pattern(32);
        let m1 = ToyClassifier::new(1, 5, 32).unwrap();
        let m2 = ToyClassifier::new(2, 5, 32).unwrap();
        let p1 = m1.predict(ViewInput::Pixels(&img)).unwrap();
        let p2 = m2.predict(ViewInput::Pixels(&img)).unwrap();
        for (got, want) in [(&p1, oracle(&m1, &img)), (&p2, oracle(&m2, &img))] {
            for (g, w) in got.as_slice().iter().zip(&want) {
                assert!((g - w).abs() < 1e-12, "{g} vs {w}");
            }
        }
        let o1 = oracle(&m1, &img);
        let o2 = oracle(&m2, &img);
        assert!(o1.iter().zip(&o2).any(|(a, b)| (a - b).abs() > 1e-6));
        assert_ne!(p1, p2);
    }

    #[test]
    fn rejects_wrong_size_and_recorded_input() {
        let m = ToyClassifier::new(0, 3, 8).unwrap();
        assert!(matches!(
            m.predict(ViewInput::Pixels(&Image::filled(9, 8, 1).unwrap())),
            Err(BackendError::DimensionMismatch { expected: 8, .. })
        ));
        assert!(matches!(
            m.predict(ViewInput::Recorded {
                sample_id: "a",
                view: 0
            }),
            Err(BackendError::UnsupportedInput { .. })
        ));
        assert!(ToyClassifier::new(0, 1, 8).is_err());
    }

    #[test]
    fn small_views_leave_empty_cells_at_zero() {
        let m = ToyClassifier::new(9, 3, 4).unwrap();
        let p = m.predict(ViewInput::Pixels(&pattern(4))).unwrap();
        assert!((p.as_slice().iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
}
