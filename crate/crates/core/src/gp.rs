//! Kernel algebra and Gaussian utilities shared by inference and queries.
//!
//! The squared-exponential kernel here uses the length scale linearly:
//! `k(x, x') = exp(-|x - x'|² / (2ℓ))`, so its gradient in the first
//! argument is `-(x - x') / ℓ · k(x, x')`.

use alloc::vec::Vec;
use core::fmt;

use crate::linalg::{Cholesky, Matrix};

pub const DEFAULT_LENGTH_SCALE: f64 = 0.25;
pub const DEFAULT_JITTER: f64 = 1e-6;
pub const DEFAULT_QUADRATURE_NODES: usize = 32;

#[derive(Debug, Clone, PartialEq)]
pub enum GpError {
    DimensionMismatch { expected: usize, found: usize },
    NotPositiveDefinite(&'static str),
    InvalidKernel(&'static str),
}

impl fmt::Display for GpError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GpError::DimensionMismatch { expected, found } => {
                write!(f, "dimension mismatch: expected {expected}, found {found}")
            }
            GpError::NotPositiveDefinite(what) => write!(f, "{what} is not positive-definite"),
            GpError::InvalidKernel(msg) => write!(f, "invalid kernel parameters: {msg}"),
        }
    }
}

impl core::error::Error for GpError {}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelParams {
    pub length_scale: f64,
    /// Added to the diagonal of square kernel matrices.
    pub jitter: f64,
}

impl Default for KernelParams {
    fn default() -> Self {
        Self {
            length_scale: DEFAULT_LENGTH_SCALE,
            jitter: DEFAULT_JITTER,
        }
    }
}

impl KernelParams {
    pub fn new(length_scale: f64, jitter: f64) -> Result<Self, GpError> {
        let k = Self {
            length_scale,
            jitter,
        };
        k.validate()?;
        Ok(k)
    }

    pub fn validate(&self) -> Result<(), GpError> {
        if !(self.length_scale > 0.0 && self.length_scale.is_finite()) {
            return Err(GpError::InvalidKernel("length scale must be positive"));
        }
        if !(self.jitter >= 0.0 && self.jitter.is_finite()) {
            return Err(GpError::InvalidKernel("jitter must be non-negative"));
        }
        Ok(())
    }
}

#[inline]
pub fn squared_distance(x: &[f64], y: &[f64]) -> f64 {
    debug_assert_eq!(x.len(), y.len());
    x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum()
}

/// Squared-exponential kernel `exp(-|x - y|² / (2ℓ))`.
#[inline]
pub fn se_kernel(x: &[f64], y: &[f64], params: &KernelParams) -> f64 {
    libm::exp(-squared_distance(x, y) / (2.0 * params.length_scale))
}

/// Cross kernel matrix `K(A, B)` without jitter.
pub fn cross_kernel(a: &[Vec<f64>], b: &[Vec<f64>], params: &KernelParams) -> Matrix {
    Matrix::from_fn(a.len(), b.len(), |i, j| se_kernel(&a[i], &b[j], params))
}

/// Square kernel matrix `K(A, A) + jitter·I`.
pub fn kernel_matrix_sym(a: &[Vec<f64>], params: &KernelParams) -> Matrix {
    let n = a.len();
    let mut k = Matrix::zeros(n, n);
    for i in 0..n {
        k[(i, i)] = 1.0 + params.jitter;
        for j in 0..i {
            let v = se_kernel(&a[i], &a[j], params);
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
    }
    k
}

/// `K(A, B)`; when `A` and `B` are the same set the jittered symmetric
/// matrix is returned.
pub fn kernel_matrix(a: &[Vec<f64>], b: &[Vec<f64>], params: &KernelParams) -> Matrix {
    if a == b {
        kernel_matrix_sym(a, params)
    } else {
        cross_kernel(a, b, params)
    }
}

/// Gradient of `k(x, u)` with respect to `x`.
pub fn se_kernel_gradient(x: &[f64], u: &[f64], params: &KernelParams) -> Vec<f64> {
    let k = se_kernel(x, u, params);
    x.iter()
        .zip(u)
        .map(|(a, b)| -(a - b) / params.length_scale * k)
        .collect()
}

/// Multivariate normal with explicit mean and covariance.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianDist {
    pub mean: Vec<f64>,
    pub covariance: Matrix,
}

impl GaussianDist {
    pub fn new(mean: Vec<f64>, covariance: Matrix) -> Result<Self, GpError> {
        if !covariance.is_square() || covariance.rows() != mean.len() {
            return Err(GpError::DimensionMismatch {
                expected: mean.len(),
                found: covariance.rows(),
            });
        }
        let scale = covariance
            .as_slice()
            .iter()
            .fold(1.0f64, |m, v| m.max(v.abs()));
        if covariance.max_asymmetry() > 1e-10 * scale {
            return Err(GpError::NotPositiveDefinite("asymmetric covariance"));
        }
        Ok(Self { mean, covariance })
    }

    pub fn standard(dim: usize) -> Self {
        Self {
            mean: alloc::vec![0.0; dim],
            covariance: Matrix::identity(dim),
        }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// Log density at `x`.
    pub fn log_pdf(&self, x: &[f64]) -> Result<f64, GpError> {
        let ch = Cholesky::factor(&self.covariance)
            .map_err(|_| GpError::NotPositiveDefinite("covariance"))?;
        let d: Vec<f64> = x.iter().zip(&self.mean).map(|(a, b)| a - b).collect();
        let z = ch.solve_lower(&d);
        let quad: f64 = z.iter().map(|v| v * v).sum();
        let n = self.dim() as f64;
        Ok(-0.5 * (quad + ch.log_det() + n * libm::log(2.0 * core::f64::consts::PI)))
    }
}

/// `KL(q ‖ p)` between multivariate normals.
pub fn kl_gaussians(q: &GaussianDist, p: &GaussianDist) -> Result<f64, GpError> {
    if q.dim() != p.dim() {
        return Err(GpError::DimensionMismatch {
            expected: p.dim(),
            found: q.dim(),
        });
    }
    let lp = Cholesky::factor(&p.covariance)
        .map_err(|_| GpError::NotPositiveDefinite("reference covariance"))?;
    let lq = Cholesky::factor(&q.covariance)
        .map_err(|_| GpError::NotPositiveDefinite("covariance"))?;
    Ok(kl_from_factors(&q.mean, &lq, &p.mean, &lp))
}

/// KL with both covariances already factored.
pub(crate) fn kl_from_factors(
    q_mean: &[f64],
    q_chol: &Cholesky,
    p_mean: &[f64],
    p_chol: &Cholesky,
) -> f64 {
    let k = q_mean.len() as f64;
    let trace = p_chol.solve_lower_matrix(q_chol.lower()).frobenius_sq();
    let d: Vec<f64> = p_mean.iter().zip(q_mean).map(|(a, b)| a - b).collect();
    let z = p_chol.solve_lower(&d);
    let maha: f64 = z.iter().map(|v| v * v).sum();
    let kl = 0.5 * (trace + maha - k + p_chol.log_det() - q_chol.log_det());
    kl.max(0.0)
}

/// KL to the standard normal from `N(m, L Lᵀ)`.
pub(crate) fn kl_to_standard(mean: &[f64], scale: &Matrix) -> f64 {
    let n = mean.len();
    let trace = scale.frobenius_sq();
    let maha: f64 = mean.iter().map(|v| v * v).sum();
    let log_det: f64 = 2.0 * (0..n).map(|i| libm::log(scale[(i, i)])).sum::<f64>();
    0.5 * (trace + maha - n as f64 - log_det)
}


/// Gauss–Hermite rule for expectations under a normal distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussHermite {
    /// Nodes for the weight `exp(-x²)`.
    nodes: Vec<f64>,
    /// Weights divided by √π, so they sum to one.
    weights: Vec<f64>,
}

impl GaussHermite {
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "quadrature needs at least one node");
        let (nodes, weights) = hermite_rule(n);
        let inv_sqrt_pi = 1.0 / libm::sqrt(core::f64::consts::PI);
        let weights = weights.into_iter().map(|w| w * inv_sqrt_pi).collect();
        Self { nodes, weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// `(g, w)` pairs such that `Σ w f(g) ≈ E[f(G)]`, `G ~ N(mean, var)`.
    pub fn points(&self, mean: f64, var: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let s = libm::sqrt(2.0 * var.max(0.0));
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(move |(x, w)| (mean + s * x, *w))
    }

    pub fn expect(&self, mut f: impl FnMut(f64) -> f64, mean: f64, var: f64) -> f64 {
        self.points(mean, var).map(|(g, w)| w * f(g)).sum()
    }
}

impl Default for GaussHermite {
    fn default() -> Self {
        Self::new(DEFAULT_QUADRATURE_NODES)
    }
}

/// `E[f(G)]`, `G ~ N(mean, var)`, with an `nodes`-point Gauss–Hermite rule.
pub fn gauss_hermite_expect(f: impl FnMut(f64) -> f64, mean: f64, var: f64, nodes: usize) -> f64 {
    GaussHermite::new(nodes).expect(f, mean, var)
}

/// Physicists' Gauss–Hermite nodes and weights by Newton iteration on the
/// orthonormal Hermite recurrence.
fn hermite_rule(n: usize) -> (Vec<f64>, Vec<f64>) {
    const PIM4: f64 = 0.751_125_544_464_942_5; // π^(-1/4)
    let mut x = alloc::vec![0.0; n];
    let mut w = alloc::vec![0.0; n];
    let nf = n as f64;
    let mut z = 0.0f64;
    for i in 0..n.div_ceil(2) {
        z = match i {
            0 => libm::sqrt(2.0 * nf + 1.0) - 1.855_75 * libm::pow(2.0 * nf + 1.0, -0.166_67),
            1 => z - 1.14 * libm::pow(nf, 0.426) / z,
            2 => 1.86 * z - 0.86 * x[0],
            3 => 1.91 * z - 0.91 * x[1],
            _ => 2.0 * z - x[i - 2],
        };
        let mut pp = 0.0;
        for _ in 0..200 {
            let mut p1 = PIM4;
            let mut p2 = 0.0;
            for j in 0..n {
                let p3 = p2;
                p2 = p1;
                let jf = j as f64;
                p1 = z * libm::sqrt(2.0 / (jf + 1.0)) * p2 - libm::sqrt(jf / (jf + 1.0)) * p3;
            }
            pp = libm::sqrt(2.0 * nf) * p2;
            let z1 = z;
            z = z1 - p1 / pp;
            if (z - z1).abs() <= 1e-15 * z.abs().max(1.0) {
                break;
            }
        }
        x[i] = z;
        x[n - 1 - i] = -z;
        w[i] = 2.0 / (pp * pp);
        w[n - 1 - i] = w[i];
    }
    if n % 2 == 1 {
        x[n / 2] = 0.0;
    }
    (x, w)
}
