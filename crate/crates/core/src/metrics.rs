//! Accuracy of a predicted surface against a simulation baseline.

use core::fmt;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Metrics {
    /// Mean absolute error over retained points.
    pub error_mean: f64,
    /// Population standard deviation of the absolute errors.
    pub error_std: f64,
    pub error_max: f64,
    pub rmse: f64,
    /// Points whose baseline exceeds the threshold.
    pub retained: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MetricsError {
    LengthMismatch { predicted: usize, baseline: usize },
    EmptyRetainedSet,
}

impl fmt::Display for MetricsError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MetricsError::LengthMismatch { predicted, baseline } => write!(
                f,
                "predicted surface has {predicted} points, baseline has {baseline}"
            ),
            MetricsError::EmptyRetainedSet => {
                write!(f, "no baseline value exceeds the threshold")
            }
        }
    }
}

impl core::error::Error for MetricsError {}

/// Error statistics over the points where `baseline > threshold`.
pub fn metrics(predicted: &[f64], baseline: &[f64], threshold: f64) -> Result<Metrics, MetricsError> {
    if predicted.len() != baseline.len() {
        return Err(MetricsError::LengthMismatch {
            predicted: predicted.len(),
            baseline: baseline.len(),
        });
    }
    let mut n = 0usize;
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    let mut max: f64 = 0.0;
    for (p, b) in predicted.iter().zip(baseline) {
        if *b > threshold {
            let e = (p - b).abs();
            n += 1;
            sum += e;
            sum_sq += e * e;
            max = max.max(e);
        }
    }
    if n == 0 {
        return Err(MetricsError::EmptyRetainedSet);
    }
    let nf = n as f64;
    let mean = sum / nf;
    let var = (sum_sq / nf - mean * mean).max(0.0);
    // With all errors equal the root can land one ulp above the max.
    Ok(Metrics {
        error_mean: mean,
        error_std: libm::sqrt(var),
        error_max: max,
        rmse: libm::sqrt(sum_sq / nf).min(max),
        retained: n,
    })
}
