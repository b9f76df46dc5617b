//! Standard normal helpers for the probit link.

use core::f64::consts::FRAC_1_SQRT_2;

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// Below this argument `log Φ` switches to its asymptotic expansion.
const ASYMPTOTIC_CUTOFF: f64 = -20.0;

#[inline]
pub fn norm_pdf(x: f64) -> f64 {
    libm::exp(-0.5 * x * x - LN_SQRT_2PI)
}

#[inline]
pub fn log_norm_pdf(x: f64) -> f64 {
    -0.5 * x * x - LN_SQRT_2PI
}

/// Standard normal CDF Φ.
#[inline]
pub fn norm_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x * FRAC_1_SQRT_2)
}

/// `1 - 1/x² + 3/x⁴ - 15/x⁶ + 105/x⁸`, the Mills-ratio series factor.
fn tail_series(x: f64) -> f64 {
    let z = 1.0 / (x * x);
    1.0 - z * (1.0 - z * (3.0 - z * (15.0 - 105.0 * z)))
}

/// `log Φ(x)`, accurate far into the lower tail.
pub fn log_norm_cdf(x: f64) -> f64 {
    if x > 0.0 {
        libm::log1p(-0.5 * libm::erfc(x * FRAC_1_SQRT_2))
    } else if x > ASYMPTOTIC_CUTOFF {
        libm::log(0.5 * libm::erfc(-x * FRAC_1_SQRT_2))
    } else {
        log_norm_pdf(x) - libm::log(-x) + libm::log(tail_series(x))
    }
}

/// Inverse Mills ratio `φ(x) / Φ(x)`, the derivative of `log Φ`.
pub fn inv_mills(x: f64) -> f64 {
    if x > ASYMPTOTIC_CUTOFF {
        libm::exp(log_norm_pdf(x) - log_norm_cdf(x))
    } else {
        -x / tail_series(x)
    }
}

/// Second derivative of `log Φ(x)`: `-λ(x) (x + λ(x))`.
#[inline]
pub fn log_norm_cdf_second(x: f64) -> f64 {
    let lam = inv_mills(x);
    -lam * (x + lam)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cdf_reference_values() {
        assert!((norm_cdf(0.0) - 0.5).abs() < 1e-16);
        assert!((norm_cdf(1.0) - 0.841_344_746_068_542_9).abs() < 1e-15);
        assert!((norm_cdf(-2.0) - 0.022_750_131_948_179_2).abs() < 1e-15);
    }

    #[test]
    fn log_cdf_is_continuous_across_branches() {
        for &x in &[ASYMPTOTIC_CUTOFF, 0.0] {
            let lo = log_norm_cdf(x - 1e-9);
            let hi = log_norm_cdf(x + 1e-9);
            assert!((lo - hi).abs() < 1e-6 * lo.abs().max(1.0), "x = {x}: {lo} vs {hi}");
        }
        // log Φ(-30) = -454.3212439563...
        assert!((log_norm_cdf(-30.0) + 454.321_243_956_343).abs() < 1e-8);
    }

    #[test]
    fn mills_ratio_matches_finite_difference() {
        for &x in &[-40.0, -19.9, -20.1, -3.0, 0.0, 2.5, 8.0] {
            let h = 1e-5;
            let fd = (log_norm_cdf(x + h) - log_norm_cdf(x - h)) / (2.0 * h);
            let an = inv_mills(x);
            assert!((fd - an).abs() < 1e-6 * an.abs().max(1.0), "x = {x}: {fd} vs {an}");
            let fd2 = (inv_mills(x + h) - inv_mills(x - h)) / (2.0 * h);
            let an2 = log_norm_cdf_second(x);
            assert!((fd2 - an2).abs() < 1e-5 * an2.abs().max(1e-3), "x = {x}: {fd2} vs {an2}");
        }
    }
}
