//! Two-segment fit of the saturation law to a sweep.
//!
//! Samples at or below a candidate breakpoint are fitted by a line through
//! the origin, `T = 8 λ_c p`, and samples above it by a flat plateau
//! `T = T_max`. Every admissible breakpoint is tried and the one with the
//! smallest total squared error wins; exact ties go to the larger size. The
//! critical size follows from where the two segments meet,
//! `p_c = T_max / (8 λ_c)`.
//!
//! Regression always uses on-wire frame sizes, which is the coordinate in
//! which the saturated line passes through the origin. The size convention
//! only changes how `p_c` is reported (payload = frame − 46).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frame::TOTAL_OVERHEAD;
use crate::series::{SizeConvention, SweepSeries};

/// Samples needed on each side of a breakpoint.
pub const MIN_SEGMENT: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    pub size_convention: SizeConvention,
    /// Samples losing more than this fraction are left out of the plateau
    /// level estimate. They still count towards the residual.
    pub max_plateau_loss: Option<f64>,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            size_convention: SizeConvention::Frame,
            max_plateau_loss: Some(0.05),
        }
    }
}

impl FitOptions {
    pub fn with_convention(size_convention: SizeConvention) -> Self {
        FitOptions {
            size_convention,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    FreeFlow,
    Saturated,
}

impl Regime {
    pub fn as_str(self) -> &'static str {
        match self {
            Regime::FreeFlow => "free_flow",
            Regime::Saturated => "saturated",
        }
    }
}

/// Ordinary least squares with intercept over the saturated segment, kept
/// as a check on the zero-intercept assumption.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InterceptDiagnostic {
    pub intercept_bps: f64,
    pub slope_bps_per_byte: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub t_max_hat: f64,
    pub p_c_hat: f64,
    pub lambda_c_hat: f64,
    /// Index of the last saturated sample in the payload-sorted series.
    pub breakpoint_index: usize,
    pub residual_sse: f64,
    pub regime_labels: Vec<Regime>,
    pub size_convention: SizeConvention,
    pub intercept_diagnostic: Option<InterceptDiagnostic>,
    /// Frame-size span of the fitted series, inclusive.
    pub frame_domain: (u32, u32),
    /// Frame size of the sample at `breakpoint_index`.
    pub breakpoint_frame: u32,
}

/// Wire form of [`FitResult`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitJson {
    pub t_max_bps: f64,
    pub p_c_bytes: f64,
    pub lambda_c_pps: f64,
    pub breakpoint_index: usize,
    pub residual_sse: f64,
    pub size_convention: SizeConvention,
}

impl FitResult {
    pub fn to_json(&self) -> FitJson {
        FitJson {
            t_max_bps: self.t_max_hat,
            p_c_bytes: self.p_c_hat,
            lambda_c_pps: self.lambda_c_hat,
            breakpoint_index: self.breakpoint_index,
            residual_sse: self.residual_sse,
            size_convention: self.size_convention,
        }
    }

    pub fn to_json_string(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.to_json())?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Candidate {
    k: usize,
    slope: f64,
    plateau: f64,
    sse: f64,
}

fn evaluate(x: &[f64], y: &[f64], plateau_ok: &[bool], k: usize) -> Candidate {
    let (sx, sy) = (&x[..=k], &y[..=k]);
    let sxx: f64 = sx.iter().map(|v| v * v).sum();
    let sxy: f64 = sx.iter().zip(sy).map(|(a, b)| a * b).sum();
    let slope = sxy / sxx;

    let upper = k + 1..y.len();
    let (mut sum, mut n) = (0.0, 0usize);
    for i in upper.clone().filter(|&i| plateau_ok[i]) {
        sum += y[i];
        n += 1;
    }
    if n == 0 {
        sum = y[upper.clone()].iter().sum();
        n = upper.len();
    }
    let plateau = sum / n as f64;

    let line_sse: f64 = sx.iter().zip(sy).map(|(a, b)| (b - slope * a).powi(2)).sum();
    let plateau_sse: f64 = y[upper].iter().map(|v| (v - plateau).powi(2)).sum();
    Candidate {
        k,
        slope,
        plateau,
        sse: line_sse + plateau_sse,
    }
}

/// Fits the saturation law by exhaustive breakpoint search.
pub fn fit(series: &SweepSeries, options: FitOptions) -> Result<FitResult> {
    let samples = series.samples();
    let n = samples.len();
    if n < 2 * MIN_SEGMENT {
        return Err(Error::FitDegenerate(format!(
            "{n} samples; need at least {} for {MIN_SEGMENT} on each side of a breakpoint",
            2 * MIN_SEGMENT
        )));
    }
    if samples.windows(2).any(|w| w[1].frame_size <= w[0].frame_size) {
        return Err(Error::FitDegenerate("sample sizes must be distinct and sorted".into()));
    }

    // x is the packet size in bits, so the saturated slope is a packet rate.
    let x: Vec<f64> = samples.iter().map(|s| f64::from(s.frame_size) * 8.0).collect();
    let y: Vec<f64> = samples.iter().map(|s| s.throughput).collect();
    let plateau_ok: Vec<bool> = samples
        .iter()
        .map(|s| options.max_plateau_loss.is_none_or(|max| s.loss_fraction <= max))
        .collect();

    let best = (MIN_SEGMENT - 1..=n - MIN_SEGMENT - 1)
        .map(|k| evaluate(&x, &y, &plateau_ok, k))
        .reduce(|best, c| if c.sse <= best.sse { c } else { best })
        .expect("at least one candidate when n >= 4");

    if !(best.slope > 0.0 && best.plateau > 0.0) {
        return Err(Error::FitDegenerate(format!(
            "non-positive segment (slope {}, plateau {})",
            best.slope, best.plateau
        )));
    }

    let t_max_hat = best.plateau;
    let p_c_frame = t_max_hat / (8.0 * best.slope);
    let p_c_hat = match options.size_convention {
        SizeConvention::Frame => p_c_frame,
        SizeConvention::Payload => p_c_frame - f64::from(TOTAL_OVERHEAD),
    };
    let lambda_c_hat = t_max_hat / (8.0 * p_c_hat);
    let regime_labels = (0..n)
        .map(|i| if i <= best.k { Regime::Saturated } else { Regime::FreeFlow })
        .collect();

    Ok(FitResult {
        t_max_hat,
        p_c_hat,
        lambda_c_hat,
        breakpoint_index: best.k,
        residual_sse: best.sse,
        regime_labels,
        size_convention: options.size_convention,
        intercept_diagnostic: intercept_fit(&samples[..=best.k]),
        frame_domain: (samples[0].frame_size, samples[n - 1].frame_size),
        breakpoint_frame: samples[best.k].frame_size,
    })
}

fn intercept_fit(samples: &[crate::series::SweepSample]) -> Option<InterceptDiagnostic> {
    let n = samples.len() as f64;
    let mx = samples.iter().map(|s| f64::from(s.frame_size)).sum::<f64>() / n;
    let my = samples.iter().map(|s| s.throughput).sum::<f64>() / n;
    let (mut sxx, mut sxy) = (0.0, 0.0);
    for s in samples {
        let dx = f64::from(s.frame_size) - mx;
        sxx += dx * dx;
        sxy += dx * (s.throughput - my);
    }
    if sxx == 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    Some(InterceptDiagnostic {
        intercept_bps: my - slope * mx,
        slope_bps_per_byte: slope,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassifiedSample {
    /// Size in the fit's convention.
    pub size: u32,
    pub throughput: f64,
    /// `t_max_hat - T`.
    pub deficit: f64,
    pub regime: Regime,
}

/// Labels each sample by which side of the fitted breakpoint it falls on and
/// computes its throughput deficit.
pub fn classify(series: &SweepSeries, fit: &FitResult) -> Result<Vec<ClassifiedSample>> {
    let (lo, hi) = fit.frame_domain;
    let overlaps = series.iter().any(|s| (lo..=hi).contains(&s.frame_size));
    if !overlaps {
        return Err(Error::DomainMismatch);
    }
    Ok(series
        .iter()
        .map(|s| ClassifiedSample {
            size: s.size(fit.size_convention),
            throughput: s.throughput,
            deficit: fit.t_max_hat - s.throughput,
            regime: if s.frame_size <= fit.breakpoint_frame {
                Regime::Saturated
            } else {
                Regime::FreeFlow
            },
        })
        .collect())
}

/// Writes `size_bytes,throughput_bps,deficit_bps,regime` rows.
pub fn write_regime_csv<W: std::io::Write>(rows: &[ClassifiedSample], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let io = |e: csv::Error| Error::Io(std::io::Error::other(e.to_string()));
    w.write_record(["size_bytes", "throughput_bps", "deficit_bps", "regime"])
        .map_err(io)?;
    for r in rows {
        w.write_record([
            r.size.to_string(),
            r.throughput.to_string(),
            r.deficit.to_string(),
            r.regime.as_str().to_string(),
        ])
        .map_err(io)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::saturation::{model_throughput, LinkModel};
    use crate::series::SweepSample;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    /// Noiseless samples from the piecewise law at payloads 25..=1450 step 25.
    fn synthetic(t_max: f64, p_c: f64) -> SweepSeries {
        let model = LinkModel::new(t_max.max(100e6), t_max, p_c).unwrap();
        (1..=58)
            .map(|i| {
                let payload = 25 * i;
                let frame = payload + 46;
                let t = model_throughput(&model, f64::from(frame));
                SweepSample::from_rates(payload, 0.0, t / (8.0 * f64::from(frame)), 0.0, 0.0)
            })
            .collect()
    }

    /// Independent re-implementation: for each split, fit both segments by
    /// closed forms computed from scratch and keep the minimum.
    fn brute_force_min_sse(series: &SweepSeries) -> f64 {
        let s = series.samples();
        let mut best = f64::INFINITY;
        for k in 1..s.len() - 2 {
            let (left, right) = s.split_at(k + 1);
            let m = left.iter().map(|v| v.frame_size as f64 * v.throughput).sum::<f64>()
                / left.iter().map(|v| (v.frame_size as f64).powi(2)).sum::<f64>();
            let mean = right.iter().map(|v| v.throughput).sum::<f64>() / right.len() as f64;
            let sse = left.iter().map(|v| (v.throughput - m * v.frame_size as f64).powi(2)).sum::<f64>()
                + right.iter().map(|v| (v.throughput - mean).powi(2)).sum::<f64>();
            best = best.min(sse);
        }
        best
    }

    #[test]
    fn recovers_noiseless_model() {
        let fit = fit(&synthetic(96e6, 480.0), FitOptions::default()).unwrap();
        assert_eq!(fit.t_max_hat, 96e6);
        assert!((fit.p_c_hat - 480.0).abs() <= 12.5, "{}", fit.p_c_hat);
        assert_eq!(fit.lambda_c_hat, fit.t_max_hat / (8.0 * fit.p_c_hat));
        assert_eq!(fit.breakpoint_frame, 471);
        assert!(fit.regime_labels[..=fit.breakpoint_index].iter().all(|r| *r == Regime::Saturated));
        assert!(fit.regime_labels[fit.breakpoint_index + 1..].iter().all(|r| *r == Regime::FreeFlow));
        let diag = fit.intercept_diagnostic.unwrap();
        assert!(diag.intercept_bps.abs() < 1.0);
    }

    #[test]
    fn noisy_recovery_over_seeds() {
        use rand::SeedableRng;
        use rand_distr::{Distribution, Normal};
        let clean = synthetic(96e6, 480.0);
        let noise = Normal::new(0.0, 0.01).unwrap();
        let mut total = 0.0;
        for seed in 42..52 {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let noisy: SweepSeries = clean
                .iter()
                .map(|s| {
                    let t = s.throughput * (1.0 + noise.sample(&mut rng));
                    SweepSample::from_rates(s.payload, 0.0, t / (8.0 * f64::from(s.frame_size)), 0.0, 0.0)
                })
                .collect();
            total += fit(&noisy, FitOptions::default()).unwrap().p_c_hat;
        }
        let mean = total / 10.0;
        assert!((mean - 480.0).abs() <= 0.05 * 480.0, "{mean}");
    }

    #[test]
    fn reference_link_critical_flow() {
        for (p_c, conv) in [(451.0, SizeConvention::Frame), (451.0 + 46.0, SizeConvention::Frame)] {
            let fit = fit(&synthetic(96e6, p_c), FitOptions::with_convention(conv)).unwrap();
            assert!((24_000.0..=28_000.0).contains(&fit.lambda_c_hat), "{}", fit.lambda_c_hat);
        }
    }

    #[test]
    fn conventions_differ_by_overhead() {
        let series = synthetic(96e6, 480.0);
        let frame = fit(&series, FitOptions::with_convention(SizeConvention::Frame)).unwrap();
        let payload = fit(&series, FitOptions::with_convention(SizeConvention::Payload)).unwrap();
        assert!((frame.p_c_hat - 46.0 - payload.p_c_hat).abs() <= 12.5);
        assert_eq!(payload.to_json().size_convention, SizeConvention::Payload);
    }

    #[test]
    fn degenerate_inputs() {
        let three: SweepSeries = synthetic(96e6, 480.0).iter().take(3).copied().collect();
        assert!(matches!(fit(&three, FitOptions::default()), Err(Error::FitDegenerate(_))));
        let four: SweepSeries = synthetic(96e6, 480.0).iter().take(4).copied().collect();
        assert!(fit(&four, FitOptions::default()).is_ok());
        let dup = SweepSeries::new(vec![SweepSample::from_rates(100, 0.0, 1.0, 0.0, 0.0); 5]);
        assert!(matches!(fit(&dup, FitOptions::default()), Err(Error::FitDegenerate(_))));
    }

    #[test]
    fn lossy_plateau_samples_do_not_set_the_level() {
        let mut samples = synthetic(96e6, 480.0).into_samples();
        let last = samples.len() - 1;
        samples[last] = SweepSample { loss_fraction: 0.5, ..samples[last] };
        samples[last].throughput *= 0.99;
        let series = SweepSeries::new(samples);
        let with = fit(&series, FitOptions::default()).unwrap();
        assert_eq!(with.t_max_hat, 96e6);
        let without = fit(&series, FitOptions { max_plateau_loss: None, ..FitOptions::default() }).unwrap();
        assert!(without.t_max_hat < 96e6);
    }

    #[test]
    fn json_field_names() {
        let fit = fit(&synthetic(96e6, 480.0), FitOptions::default()).unwrap();
        let v: serde_json::Value = serde_json::from_str(&fit.to_json_string().unwrap()).unwrap();
        let mut keys: Vec<_> = v.as_object().unwrap().keys().cloned().collect();
        keys.sort();
        assert_eq!(
            keys,
            ["breakpoint_index", "lambda_c_pps", "p_c_bytes", "residual_sse", "size_convention", "t_max_bps"]
        );
        assert_eq!(v["size_convention"], "frame");
    }

    #[test]
    fn classification() {
        let series = synthetic(96e6, 480.0);
        let fit = fit(&series, FitOptions::default()).unwrap();
        let rows = classify(&series, &fit).unwrap();
        let half = rows.iter().find(|r| r.size == 246).unwrap();
        assert_eq!(half.regime, Regime::Saturated);
        assert_relative_eq!(half.deficit, 96e6 * (1.0 - 246.0 / 480.0), max_relative = 1e-9);
        assert!(rows.iter().filter(|r| r.regime == Regime::FreeFlow).all(|r| r.deficit.abs() < 1e-6));

        let upper: SweepSeries = series.iter().filter(|s| s.frame_size > 600).copied().collect();
        assert!(classify(&upper, &fit).unwrap().iter().all(|r| r.regime == Regime::FreeFlow));

        let outside = SweepSeries::new(vec![SweepSample::from_rates(1472, 0.0, 1.0, 0.0, 0.0)]);
        let narrow = SweepSeries::new(series.iter().take(10).copied().collect());
        let narrow_fit = super::fit(&narrow, FitOptions::default()).unwrap();
        assert!(matches!(classify(&outside, &narrow_fit), Err(Error::DomainMismatch)));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn oracle_recovery(t_max in 1e6f64..1e9, p_c in 120.0f64..1400.0) {
            let fit = fit(&synthetic(t_max, p_c), FitOptions::default()).unwrap();
            prop_assert!((fit.t_max_hat - t_max).abs() <= 1e-9 * t_max);
            prop_assert!((fit.p_c_hat - p_c).abs() <= 12.5);
        }

        #[test]
        fn scale_equivariance(c in 0.01f64..100.0, p_c in 120.0f64..1400.0) {
            let series = synthetic(96e6, p_c);
            let scaled: SweepSeries = series
                .iter()
                .map(|s| SweepSample { throughput: s.throughput * c, ..*s })
                .collect();
            let a = fit(&series, FitOptions::default()).unwrap();
            let b = fit(&scaled, FitOptions::default()).unwrap();
            prop_assert!((b.t_max_hat - c * a.t_max_hat).abs() <= 1e-9 * b.t_max_hat);
            prop_assert!((b.p_c_hat - a.p_c_hat).abs() <= 1e-9 * a.p_c_hat);
        }

        #[test]
        fn exhaustive_minimum(seed in any::<u64>()) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let series: SweepSeries = synthetic(96e6, 480.0)
                .iter()
                .map(|s| SweepSample { throughput: s.throughput * rng.random_range(0.95..1.05), ..*s })
                .collect();
            let fit = fit(&series, FitOptions { max_plateau_loss: None, ..FitOptions::default() }).unwrap();
            let oracle = brute_force_min_sse(&series);
            prop_assert!((fit.residual_sse - oracle).abs() <= 1e-9 * oracle.max(1.0));
        }
    }
}
