//! Parsing of the `--latency` spec.

use adaptta::harness::LatencySource;
use adaptta::LatencyModel;

use crate::error::CliError;

/// Parses `wall`, `sim`, or `sim:key=value,...`.
///
/// Simulation starts from the reference device preset. Setting
/// `per-inference` rebuilds the batch curve in proportion to it, so the
/// batch-5 and batch-10 costs keep the reference ratios unless they are
/// given as `batch5=` / `batch10=` (any `batchN` is accepted).
pub fn parse_latency(spec: &str) -> Result<LatencySource, CliError> {
    let usage = |msg: String| CliError::Usage(format!("--latency {spec:?}: {msg}"));
    let (kind, params) = match spec.split_once(':') {
        Some((kind, params)) => (kind, Some(params)),
        None => (spec, None),
    };
    match kind {
        "wall" => {
            return match params {
                None => Ok(LatencySource::WallClock),
                Some(_) => Err(usage("wall-clock timing takes no parameters".into())),
            }
        }
        "sim" => {}
        other => {
            return Err(usage(format!(
                "unknown latency source {other:?}, expected wall or sim"
            )))
        }
    }
    let reference = LatencyModel::reference_cortex_a53();
    let mut per_inference = None;
    let mut crop = reference.per_crop_ms();
    let mut flip = reference.per_flip_ms();
    let mut batch_points = Vec::new();
    for pair in params
        .into_iter()
        .flat_map(|p| p.split(','))
        .filter(|p| !p.is_empty())
    {
        let (key, value) = pair
            .split_once('=')
            .ok_or_else(|| usage(format!("expected key=value, got {pair:?}")))?;
        let ms: f64 = value
            .trim()
            .parse()
            .map_err(|_| usage(format!("{key}: {value:?} is not a number")))?;
        match key.trim() {
            "per-inference" => per_inference = Some(ms),
            "crop" => crop = ms,
            "flip" => flip = ms,
            k => match k
                .strip_prefix("batch")
                .and_then(|n| n.parse::<usize>().ok())
            {
                Some(size) => batch_points.push((size, ms)),
                None => return Err(usage(format!("unknown parameter {k:?}"))),
            },
        }
    }
    let per_inference = per_inference.unwrap_or(reference.per_inference_ms());
    let mut model =
        LatencyModel::new(per_inference, crop, flip).map_err(|e| usage(e.to_string()))?;
    if per_inference == reference.per_inference_ms() {
        // Keep the measured curve rather than the ratio-scaled one.
        for (&size, &ms) in reference.batch_curve() {
            model = model
                .with_batch_point(size, ms)
                .map_err(|e| usage(e.to_string()))?;
        }
    }
    for (size, ms) in batch_points {
        model = model
            .with_batch_point(size, ms)
            .map_err(|e| usage(e.to_string()))?;
    }
    Ok(LatencySource::Simulated(model))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model(spec: &str) -> LatencyModel {
        match parse_latency(spec).unwrap() {
            LatencySource::Simulated(m) => m,
            LatencySource::WallClock => panic!("{spec} parsed as wall clock"),
        }
    }

    #[test]
    fn presets() {
        assert_eq!(parse_latency("wall").unwrap(), LatencySource::WallClock);
        assert_eq!(model("sim"), LatencyModel::reference_cortex_a53());
        assert_eq!(model("sim:"), LatencyModel::reference_cortex_a53());
        assert_eq!(
            model("sim:per-inference=53.1"),
            LatencyModel::reference_cortex_a53()
        );
    }

    #[test]
    fn per_inference_scales_the_batch_curve() {
        let m = model("sim:per-inference=10,crop=0,flip=0");
        assert_eq!(m.batch_ms(1), 10.0);
        assert!((m.batch_ms(5) - 10.0 * 290.6 / 53.1).abs() < 1e-9);
        assert_eq!(m.per_crop_ms(), 0.0);
    }

    #[test]
    fn explicit_batch_points() {
        let m = model("sim:batch5=100,batch10=150");
        assert_eq!(m.batch_ms(5), 100.0);
        assert_eq!(m.batch_ms(10), 150.0);
        assert_eq!(m.batch_ms(1), 53.1);
    }

    #[test]
    fn malformed_specs_are_usage_errors() {
        for bad in [
            "fast",
            "wall:x=1",
            "sim:per-inference",
            "sim:gpu=3",
            "sim:crop=-1",
            "sim:batch0=4",
            "sim:flip=abc",
        ] {
            assert!(
                matches!(parse_latency(bad), Err(CliError::Usage(_))),
                "{bad}"
            );
        }
    }
}
