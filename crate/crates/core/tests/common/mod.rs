//! Independent reference computations shared by the integration tests.
//! Nothing here calls the engine's aggregation or scoring code.
#![allow(dead_code)]

use adaptta::backend::TraceBackend;

/// Top-two gap by sorting a copy in descending order.
pub fn sorted_gap(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(|a, b| b.partial_cmp(a).unwrap());
    s[0] - s[1]
}

/// First index holding the maximum, by explicit scan over all indices.
pub fn first_argmax(v: &[f64]) -> usize {
    let max = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    v.iter().position(|&x| x == max).unwrap()
}

/// Mean of the first `k` rows, summed from scratch in row order.
pub fn prefix_mean(rows: &[Vec<f64>], k: usize) -> Vec<f64> {
    let c = rows[0].len();
    (0..c)
        .map(|j| {
            let mut acc = 0.0;
            for row in &rows[..k] {
                acc += row[j];
            }
            acc / k as f64
        })
        .collect()
}

/// Stop depth by scanning every prefix independently: the first `k` whose
/// mean has a top-two gap strictly above `tau`, otherwise all rows.
pub fn brute_force_stop(rows: &[Vec<f64>], tau: f64) -> usize {
    (1..=rows.len())
        .find(|&k| sorted_gap(&prefix_mean(rows, k)) > tau)
        .unwrap_or(rows.len())
}

/// Rows of one sample, views `0..n`, read straight from the trace.
pub fn rows(trace: &TraceBackend, sample_id: &str, n: usize) -> Vec<Vec<f64>> {
    (0..n)
        .map(|v| trace.lookup(sample_id, v).unwrap().as_slice().to_vec())
        .collect()
}
