//! Sparse variational Gaussian-process classification with a probit link.
//!
//! The latent function `g` has a zero-mean GP prior with the
//! squared-exponential kernel. A Gaussian `q(u) = N(μ, Σ)` over the latent
//! values at the inducing points summarizes the posterior; labels are
//! `y ~ Bernoulli(Φ(g(x)))`.
//!
//! Internally `q` is stored in whitened coordinates: with `K_mm = L_K L_Kᵀ`,
//! `u = L_K w` and `q(w) = N(m, S)`, `S = L_S L_Sᵀ`. Then
//! `μ = L_K m` and `Σ = (L_K L_S)(L_K L_S)ᵀ`, so `L_K L_S` is the
//! lower-triangular square root of `Σ`.
//!
//! Fitting maximizes the ELBO
//! `Σᵢ E_q[log p(yᵢ | gᵢ)] − KL(q(u) ‖ p(u))`
//! by full-batch natural-gradient ascent in the whitened coordinates, with a
//! step size that shrinks whenever a step would lower the objective. The
//! expectations are one-dimensional and use Gauss–Hermite quadrature.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::gp::{
    cross_kernel, kernel_matrix_sym, kl_to_standard, se_kernel, GaussHermite, GaussianDist,
    GpError, KernelParams, DEFAULT_QUADRATURE_NODES,
};
use crate::linalg::{dot, Cholesky, Matrix};
use crate::special::{inv_mills, log_norm_cdf, log_norm_cdf_second, norm_cdf};

#[derive(Debug, Clone, PartialEq)]
pub enum SvgpError {
    EmptyInducing,
    DuplicateInducing { first: usize, second: usize },
    DimensionMismatch { expected: usize, found: usize },
    LengthMismatch { points: usize, labels: usize },
    NotPositiveDefinite(&'static str),
    NonFiniteElbo { iteration: usize },
    InvalidOptions(&'static str),
    Gp(GpError),
}

impl fmt::Display for SvgpError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SvgpError::EmptyInducing => write!(f, "at least one inducing point is required"),
            SvgpError::DuplicateInducing { first, second } => {
                write!(f, "inducing points {first} and {second} coincide")
            }
            SvgpError::DimensionMismatch { expected, found } => {
                write!(f, "point dimension {found}, expected {expected}")
            }
            SvgpError::LengthMismatch { points, labels } => {
                write!(f, "{points} points but {labels} labels")
            }
            SvgpError::NotPositiveDefinite(what) => write!(f, "{what} is not positive-definite"),
            SvgpError::NonFiniteElbo { iteration } => {
                write!(f, "ELBO became non-finite at iteration {iteration}")
            }
            SvgpError::InvalidOptions(msg) => write!(f, "invalid fit options: {msg}"),
            SvgpError::Gp(e) => write!(f, "{e}"),
        }
    }
}

impl core::error::Error for SvgpError {}

impl From<GpError> for SvgpError {
    fn from(e: GpError) -> Self {
        SvgpError::Gp(e)
    }
}

/// Labelled observations `(xᵢ, yᵢ)`. Points may repeat.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Dataset {
    points: Vec<Vec<f64>>,
    labels: Vec<bool>,
}

impl Dataset {
    pub fn new(points: Vec<Vec<f64>>, labels: Vec<bool>) -> Result<Self, SvgpError> {
        if points.len() != labels.len() {
            return Err(SvgpError::LengthMismatch {
                points: points.len(),
                labels: labels.len(),
            });
        }
        if let Some(first) = points.first() {
            let d = first.len();
            if let Some(bad) = points.iter().find(|p| p.len() != d) {
                return Err(SvgpError::DimensionMismatch {
                    expected: d,
                    found: bad.len(),
                });
            }
        }
        Ok(Self { points, labels })
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn push(&mut self, point: Vec<f64>, label: bool) {
        self.points.push(point);
        self.labels.push(label);
    }

    /// Appends `n` observations at one point.
    pub fn push_labels(&mut self, point: &[f64], labels: &[bool]) {
        for &l in labels {
            self.push(point.to_vec(), l);
        }
    }

    pub fn extend(&mut self, other: &Dataset) {
        self.points.extend(other.points.iter().cloned());
        self.labels.extend_from_slice(&other.labels);
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn labels(&self) -> &[bool] {
        &self.labels
    }

    pub fn iter(&self) -> impl Iterator<Item = (&[f64], bool)> {
        self.points
            .iter()
            .zip(&self.labels)
            .map(|(p, l)| (p.as_slice(), *l))
    }

    /// Distinct points, in sorted order of their bit patterns.
    pub fn distinct_points(&self) -> Vec<Vec<f64>> {
        group(self).points
    }
}

/// Observations aggregated per distinct location. Ordering is by the bit
/// pattern of the coordinates, so it does not depend on row order.
pub(crate) struct Grouped {
    pub points: Vec<Vec<f64>>,
    pub ones: Vec<f64>,
    pub zeros: Vec<f64>,
}

pub(crate) fn group(data: &Dataset) -> Grouped {
    let mut map: BTreeMap<Vec<u64>, (usize, f64, f64)> = BTreeMap::new();
    for (i, (p, y)) in data.iter().enumerate() {
        let key: Vec<u64> = p.iter().map(|v| canonical_bits(*v)).collect();
        let e = map.entry(key).or_insert((i, 0.0, 0.0));
        if y {
            e.1 += 1.0;
        } else {
            e.2 += 1.0;
        }
    }
    let mut g = Grouped {
        points: Vec::with_capacity(map.len()),
        ones: Vec::with_capacity(map.len()),
        zeros: Vec::with_capacity(map.len()),
    };
    for (_, (i, ones, zeros)) in map {
        g.points.push(data.points[i].clone());
        g.ones.push(ones);
        g.zeros.push(zeros);
    }
    g
}

#[inline]
fn canonical_bits(v: f64) -> u64 {
    // -0.0 and 0.0 are the same location
    if v == 0.0 {
        0
    } else {
        v.to_bits()
    }
}

/// Latent Gaussian marginal at one test point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PredictiveDist {
    pub mean: f64,
    pub variance: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitOptions {
    pub max_iterations: usize,
    /// Stop once the relative ELBO change of an accepted step drops below this.
    pub tolerance: f64,
    pub quadrature_nodes: usize,
    /// Natural-gradient step size at the first iteration (at most 1).
    pub initial_step: f64,
    /// Factor applied to the step size after a rejected step.
    pub step_shrink: f64,
    /// Factor applied after an accepted step (capped at 1).
    pub step_growth: f64,
    /// Give up shrinking below this step size.
    pub min_step: f64,
    /// Recorded for provenance; the full-batch optimizer draws no randomness.
    pub seed: u64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            max_iterations: 500,
            tolerance: 1e-6,
            quadrature_nodes: DEFAULT_QUADRATURE_NODES,
            initial_step: 1.0,
            step_shrink: 0.5,
            step_growth: 2.0,
            min_step: 1e-6,
            seed: 0,
        }
    }
}

impl FitOptions {
    pub fn validate(&self) -> Result<(), SvgpError> {
        if self.max_iterations == 0 {
            return Err(SvgpError::InvalidOptions("max_iterations must be positive"));
        }
        if !(self.tolerance > 0.0) {
            return Err(SvgpError::InvalidOptions("tolerance must be positive"));
        }
        if self.quadrature_nodes == 0 {
            return Err(SvgpError::InvalidOptions("quadrature_nodes must be positive"));
        }
        if !(self.initial_step > 0.0 && self.initial_step <= 1.0) {
            return Err(SvgpError::InvalidOptions("initial_step must be in (0, 1]"));
        }
        if !(self.step_shrink > 0.0 && self.step_shrink < 1.0) {
            return Err(SvgpError::InvalidOptions("step_shrink must be in (0, 1)"));
        }
        if !(self.step_growth >= 1.0) {
            return Err(SvgpError::InvalidOptions("step_growth must be >= 1"));
        }
        if !(self.min_step > 0.0) {
            return Err(SvgpError::InvalidOptions("min_step must be positive"));
        }
        Ok(())
    }
}

/// Result of [`fit`] or a streaming update.
#[derive(Debug, Clone)]
pub struct FitOutcome {
    pub posterior: VariationalPosterior,
    /// Objective value at the start and after every accepted step.
    pub trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

/// Gaussian variational posterior over the latent values at the inducing
/// points.
#[derive(Debug, Clone, PartialEq)]
pub struct VariationalPosterior {
    inducing: Vec<Vec<f64>>,
    kernel: KernelParams,
    whitened_mean: Vec<f64>,
    whitened_scale: Matrix,
    kmm_chol: Cholesky,
    alpha: Vec<f64>,
}

fn check_inducing(inducing: &[Vec<f64>]) -> Result<usize, SvgpError> {
    let first = inducing.first().ok_or(SvgpError::EmptyInducing)?;
    let d = first.len();
    for p in inducing {
        if p.len() != d {
            return Err(SvgpError::DimensionMismatch {
                expected: d,
                found: p.len(),
            });
        }
    }
    let mut seen: BTreeMap<Vec<u64>, usize> = BTreeMap::new();
    for (i, p) in inducing.iter().enumerate() {
        let key: Vec<u64> = p.iter().map(|v| canonical_bits(*v)).collect();
        if let Some(first) = seen.insert(key, i) {
            return Err(SvgpError::DuplicateInducing { first, second: i });
        }
    }
    Ok(d)
}

fn kmm_factor(inducing: &[Vec<f64>], kernel: &KernelParams) -> Result<Cholesky, SvgpError> {
    kernel.validate()?;
    Cholesky::factor(&kernel_matrix_sym(inducing, kernel))
        .map_err(|_| SvgpError::NotPositiveDefinite("K_mm"))
}

impl VariationalPosterior {
    /// `q(u) = N(0, I)` at the given inducing points.
    pub fn init(inducing: Vec<Vec<f64>>, kernel: KernelParams) -> Result<Self, SvgpError> {
        check_inducing(&inducing)?;
        let lk = kmm_factor(&inducing, &kernel)?;
        // whitened covariance L_K⁻¹ L_K⁻ᵀ
        let w = lk.lower_inverse();
        let mut s = w.matmul(&w.transpose());
        s.symmetrize();
        let scale = Cholesky::factor(&s)
            .map_err(|_| SvgpError::NotPositiveDefinite("initial covariance"))?
            .into_lower();
        let m = inducing.len();
        Self::assemble(inducing, kernel, lk, vec![0.0; m], scale)
    }

    /// The prior `q(u) = p(u) = N(0, K_mm)`.
    pub fn prior(inducing: Vec<Vec<f64>>, kernel: KernelParams) -> Result<Self, SvgpError> {
        check_inducing(&inducing)?;
        let lk = kmm_factor(&inducing, &kernel)?;
        let m = inducing.len();
        Self::assemble(inducing, kernel, lk, vec![0.0; m], Matrix::identity(m))
    }

    /// Builds a posterior from its whitened mean and lower-triangular
    /// whitened covariance factor.
    pub fn from_whitened(
        inducing: Vec<Vec<f64>>,
        kernel: KernelParams,
        whitened_mean: Vec<f64>,
        whitened_scale: Matrix,
    ) -> Result<Self, SvgpError> {
        check_inducing(&inducing)?;
        let m = inducing.len();
        if whitened_mean.len() != m || whitened_scale.rows() != m || whitened_scale.cols() != m {
            return Err(SvgpError::DimensionMismatch {
                expected: m,
                found: whitened_mean.len(),
            });
        }
        if !whitened_scale.is_lower_triangular()
            || (0..m).any(|i| !(whitened_scale[(i, i)] > 0.0))
        {
            return Err(SvgpError::NotPositiveDefinite("whitened scale"));
        }
        let lk = kmm_factor(&inducing, &kernel)?;
        Self::assemble(inducing, kernel, lk, whitened_mean, whitened_scale)
    }

    /// Builds a posterior from `μ` and `Σ` in the original coordinates.
    pub fn from_moments(
        inducing: Vec<Vec<f64>>,
        kernel: KernelParams,
        mean: &[f64],
        covariance: &Matrix,
    ) -> Result<Self, SvgpError> {
        check_inducing(&inducing)?;
        let m = inducing.len();
        if mean.len() != m || covariance.rows() != m || !covariance.is_square() {
            return Err(SvgpError::DimensionMismatch {
                expected: m,
                found: mean.len(),
            });
        }
        let lk = kmm_factor(&inducing, &kernel)?;
        let wm = lk.solve_lower(mean);
        let half = lk.solve_lower_matrix(covariance);
        let mut s = lk.solve_lower_matrix(&half.transpose());
        s.symmetrize();
        let scale = Cholesky::factor(&s)
            .map_err(|_| SvgpError::NotPositiveDefinite("covariance"))?
            .into_lower();
        Self::assemble(inducing, kernel, lk, wm, scale)
    }

    fn assemble(
        inducing: Vec<Vec<f64>>,
        kernel: KernelParams,
        kmm_chol: Cholesky,
        whitened_mean: Vec<f64>,
        whitened_scale: Matrix,
    ) -> Result<Self, SvgpError> {
        let mut alpha = whitened_mean.clone();
        kmm_chol.solve_upper_in_place(&mut alpha);
        Ok(Self {
            inducing,
            kernel,
            whitened_mean,
            whitened_scale,
            kmm_chol,
            alpha,
        })
    }

    pub fn inducing(&self) -> &[Vec<f64>] {
        &self.inducing
    }

    pub fn num_inducing(&self) -> usize {
        self.inducing.len()
    }

    pub fn input_dim(&self) -> usize {
        self.inducing[0].len()
    }

    pub fn kernel(&self) -> &KernelParams {
        &self.kernel
    }

    pub fn whitened_mean(&self) -> &[f64] {
        &self.whitened_mean
    }

    pub fn whitened_scale(&self) -> &Matrix {
        &self.whitened_scale
    }

    /// Cholesky factor of `K_mm` (jitter included).
    pub fn kmm_chol(&self) -> &Cholesky {
        &self.kmm_chol
    }

    /// `α = K_mm⁻¹ μ`; the latent mean is `k(x, u) · α`.
    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    /// `μ`.
    pub fn mean(&self) -> Vec<f64> {
        self.kmm_chol.lower().matvec(&self.whitened_mean)
    }

    /// Lower-triangular square root of `Σ`.
    pub fn scale_tril(&self) -> Matrix {
        self.kmm_chol.lower().matmul(&self.whitened_scale)
    }

    /// `Σ`.
    pub fn covariance(&self) -> Matrix {
        self.scale_tril().gram()
    }

    /// `q(u)` as an explicit Gaussian.
    pub fn dist(&self) -> GaussianDist {
        GaussianDist {
            mean: self.mean(),
            covariance: self.covariance(),
        }
    }

    fn check_points(&self, xs: &[Vec<f64>]) -> Result<(), SvgpError> {
        let d = self.input_dim();
        match xs.iter().find(|x| x.len() != d) {
            Some(bad) => Err(SvgpError::DimensionMismatch {
                expected: d,
                found: bad.len(),
            }),
            None => Ok(()),
        }
    }

    /// `L_K⁻¹ K(u, X)`, one column per test point.
    fn projection(&self, xs: &[Vec<f64>]) -> Matrix {
        self.kmm_chol
            .solve_lower_matrix(&cross_kernel(&self.inducing, xs, &self.kernel))
    }

    /// Marginals of the latent function at each point:
    /// mean `k(x,u) K⁻¹ μ`, variance `k(x,x) − k(x,u) K⁻¹ (K − Σ) K⁻¹ k(u,x)`.
    pub fn latent_marginals(&self, xs: &[Vec<f64>]) -> Result<Vec<PredictiveDist>, SvgpError> {
        self.check_points(xs)?;
        let a = self.projection(xs);
        let means = a.matvec_transposed(&self.whitened_mean);
        let b = self.whitened_scale.transpose().matmul(&a);
        let n = xs.len();
        let mut prior_part = vec![0.0; n];
        let mut post_part = vec![0.0; n];
        for r in 0..a.rows() {
            for (j, v) in a.row(r).iter().enumerate() {
                prior_part[j] += v * v;
            }
            for (j, v) in b.row(r).iter().enumerate() {
                post_part[j] += v * v;
            }
        }
        Ok((0..n)
            .map(|j| PredictiveDist {
                mean: means[j],
                variance: (1.0 - prior_part[j] + post_part[j]).max(0.0),
            })
            .collect())
    }

    /// Joint Gaussian of the latent values at `xs` (jitter on the diagonal).
    pub fn joint_marginal(&self, xs: &[Vec<f64>]) -> Result<GaussianDist, SvgpError> {
        self.check_points(xs)?;
        let a = self.projection(xs);
        let mean = a.matvec_transposed(&self.whitened_mean);
        let b = self.whitened_scale.transpose().matmul(&a);
        let mut cov = kernel_matrix_sym(xs, &self.kernel);
        cov.add_scaled(-1.0, &a.transpose().matmul(&a));
        cov.add_scaled(1.0, &b.transpose().matmul(&b));
        cov.symmetrize();
        Ok(GaussianDist {
            mean,
            covariance: cov,
        })
    }

    /// Satisfaction probability `E[Φ(g(x))] = Φ(m / √(1 + v))`.
    pub fn predict_probability(&self, xs: &[Vec<f64>]) -> Result<Vec<f64>, SvgpError> {
        Ok(self
            .latent_marginals(xs)?
            .into_iter()
            .map(probit_mean)
            .collect())
    }

    /// `Var[Φ(g(x))] = E[Φ(g)²] − E[Φ(g)]²`, by quadrature.
    pub fn predictive_variance(
        &self,
        xs: &[Vec<f64>],
        gh: &GaussHermite,
    ) -> Result<Vec<f64>, SvgpError> {
        Ok(self
            .latent_marginals(xs)?
            .into_iter()
            .map(|d| probit_variance(d, gh))
            .collect())
    }

    /// Gradient of the latent mean `ḡ(x) = k(x, u) α` with respect to `x`.
    pub fn mean_gradient(&self, x: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; x.len()];
        let inv_l = 1.0 / self.kernel.length_scale;
        for (u, a) in self.inducing.iter().zip(&self.alpha) {
            let w = se_kernel(x, u, &self.kernel) * a * inv_l;
            for ((gi, xi), ui) in g.iter_mut().zip(x).zip(u) {
                *gi -= (xi - ui) * w;
            }
        }
        g
    }

    /// `KL(q(u) ‖ p(u))`.
    pub fn kl_to_prior(&self) -> f64 {
        kl_to_standard(&self.whitened_mean, &self.whitened_scale)
    }

    /// Evidence lower bound on `data`.
    pub fn elbo(&self, data: &Dataset, gh: &GaussHermite) -> Result<f64, SvgpError> {
        Ok(self.expected_log_likelihood(data, gh)? - self.kl_to_prior())
    }

    /// `Σᵢ E_q[log p(yᵢ | g(xᵢ))]`.
    pub fn expected_log_likelihood(
        &self,
        data: &Dataset,
        gh: &GaussHermite,
    ) -> Result<f64, SvgpError> {
        if data.is_empty() {
            return Ok(0.0);
        }
        let g = group(data);
        let marg = self.latent_marginals(&g.points)?;
        Ok(marg
            .iter()
            .zip(g.ones.iter().zip(&g.zeros))
            .map(|(d, (n1, n0))| bernoulli_expectation(gh, d.mean, d.variance, *n1, *n0).0)
            .sum())
    }
}

#[inline]
pub fn probit_mean(d: PredictiveDist) -> f64 {
    norm_cdf(d.mean / libm::sqrt(1.0 + d.variance))
}

/// Variance of `Φ(g)` for `g ~ N(mean, variance)`, computed with two
/// quadrature passes so the result lies in `[0, 1/4]`.
pub fn probit_variance(d: PredictiveDist, gh: &GaussHermite) -> f64 {
    let p = gh.expect(norm_cdf, d.mean, d.variance);
    let v = gh.expect(
        |g| {
            let e = norm_cdf(g) - p;
            e * e
        },
        d.mean,
        d.variance,
    );
    v.clamp(0.0, 0.25)
}

/// Value, mean-derivative and variance-derivative of
/// `n1 E[log Φ(g)] + n0 E[log Φ(−g)]`, `g ~ N(mean, var)`.
fn bernoulli_expectation(
    gh: &GaussHermite,
    mean: f64,
    var: f64,
    n1: f64,
    n0: f64,
) -> (f64, f64, f64) {
    let mut value = 0.0;
    let mut d_mean = 0.0;
    let mut d_second = 0.0;
    for (g, w) in gh.points(mean, var) {
        if n1 > 0.0 {
            value += w * n1 * log_norm_cdf(g);
            d_mean += w * n1 * inv_mills(g);
            d_second += w * n1 * log_norm_cdf_second(g);
        }
        if n0 > 0.0 {
            value += w * n0 * log_norm_cdf(-g);
            d_mean -= w * n0 * inv_mills(-g);
            d_second += w * n0 * log_norm_cdf_second(-g);
        }
    }
    // d/dvar E[f] = E[f''] / 2
    (value, d_mean, 0.5 * d_second)
}

/// Starting point for [`fit`]: `q(u) = N(0, I)`.
pub fn init_posterior(
    inducing: Vec<Vec<f64>>,
    kernel: KernelParams,
) -> Result<VariationalPosterior, SvgpError> {
    VariationalPosterior::init(inducing, kernel)
}

pub fn latent_marginals(
    q: &VariationalPosterior,
    xs: &[Vec<f64>],
) -> Result<Vec<PredictiveDist>, SvgpError> {
    q.latent_marginals(xs)
}

pub fn predict_probability(
    q: &VariationalPosterior,
    xs: &[Vec<f64>],
) -> Result<Vec<f64>, SvgpError> {
    q.predict_probability(xs)
}

pub fn predictive_variance(
    q: &VariationalPosterior,
    xs: &[Vec<f64>],
    nodes: usize,
) -> Result<Vec<f64>, SvgpError> {
    q.predictive_variance(xs, &GaussHermite::new(nodes))
}

pub fn elbo(q: &VariationalPosterior, data: &Dataset, opts: &FitOptions) -> Result<f64, SvgpError> {
    q.elbo(data, &GaussHermite::new(opts.quadrature_nodes))
}

/// Maximizes the ELBO starting from `q0`. Inducing points and kernel are
/// kept fixed.
pub fn fit(
    q0: &VariationalPosterior,
    data: &Dataset,
    opts: &FitOptions,
) -> Result<FitOutcome, SvgpError> {
    opts.validate()?;
    let gh = GaussHermite::new(opts.quadrature_nodes);
    let problem = Problem::new(q0.inducing(), q0.kmm_chol(), q0.kernel(), data, &gh, None)?;
    optimize(&problem, q0, opts)
}

/// Expected log-likelihood part of the objective, in whitened coordinates.
pub(crate) struct Problem<'a> {
    /// `A = L_K⁻¹ K(u, X)` over the distinct data locations.
    proj: Matrix,
    /// `k(x, x) − |Aⱼ|²`.
    resid: Vec<f64>,
    ones: Vec<f64>,
    zeros: Vec<f64>,
    gh: &'a GaussHermite,
    extra: Option<GaussianTerm>,
}

/// Quadratic term `cᵀm − ½ tr(B (S + m mᵀ)) + constant` added by streaming
/// updates.
pub(crate) struct GaussianTerm {
    pub b: Matrix,
    pub c: Vec<f64>,
    pub constant: f64,
}

/// Natural-parameter view of `q(w) = N(m, Λ⁻¹)`.
struct State {
    mean: Vec<f64>,
    precision: Matrix,
    prec_chol: Cholesky,
}

struct Evaluation {
    value: f64,
    /// dE/d(latent mean) per distinct location.
    d_mean: Vec<f64>,
    /// dE/d(latent variance) per distinct location.
    d_var: Vec<f64>,
}

impl<'a> Problem<'a> {
    pub(crate) fn new(
        inducing: &[Vec<f64>],
        kmm_chol: &Cholesky,
        kernel: &KernelParams,
        data: &Dataset,
        gh: &'a GaussHermite,
        extra: Option<GaussianTerm>,
    ) -> Result<Self, SvgpError> {
        let d = inducing[0].len();
        if let Some(bad) = data.points().iter().find(|p| p.len() != d) {
            return Err(SvgpError::DimensionMismatch {
                expected: d,
                found: bad.len(),
            });
        }
        let g = group(data);
        let proj = kmm_chol.solve_lower_matrix(&cross_kernel(inducing, &g.points, kernel));
        let n = g.points.len();
        let mut resid = vec![1.0; n];
        for r in 0..proj.rows() {
            for (j, v) in proj.row(r).iter().enumerate() {
                resid[j] -= v * v;
            }
        }
        resid.iter_mut().for_each(|v| *v = v.max(0.0));
        Ok(Self {
            proj,
            resid,
            ones: g.ones,
            zeros: g.zeros,
            gh,
            extra,
        })
    }

    fn dim(&self) -> usize {
        self.proj.rows()
    }

    fn evaluate(&self, state: &State) -> Evaluation {
        let m = self.dim();
        let n = self.resid.len();
        let lat_mean = self.proj.matvec_transposed(&state.mean);
        let y = state.prec_chol.solve_lower_matrix(&self.proj);
        let mut lat_var = self.resid.clone();
        for r in 0..m {
            for (j, v) in y.row(r).iter().enumerate() {
                lat_var[j] += v * v;
            }
        }
        let mut value = 0.0;
        let mut d_mean = vec![0.0; n];
        let mut d_var = vec![0.0; n];
        for j in 0..n {
            let (v, dm, dv) =
                bernoulli_expectation(self.gh, lat_mean[j], lat_var[j], self.ones[j], self.zeros[j]);
            value += v;
            d_mean[j] = dm;
            d_var[j] = dv;
        }

        let winv = state.prec_chol.lower_inverse();
        let trace_s = winv.frobenius_sq();
        let log_det_s = -state.prec_chol.log_det();
        let mm = dot(&state.mean, &state.mean);
        value -= 0.5 * (trace_s + mm - m as f64 - log_det_s);

        if let Some(extra) = &self.extra {
            let s = winv.transpose().matmul(&winv);
            let tr_bs: f64 = extra
                .b
                .as_slice()
                .iter()
                .zip(s.as_slice())
                .map(|(a, b)| a * b)
                .sum();
            let bm = extra.b.matvec(&state.mean);
            value += dot(&extra.c, &state.mean) - 0.5 * (tr_bs + dot(&state.mean, &bm))
                + extra.constant;
        }
        Evaluation {
            value,
            d_mean,
            d_var,
        }
    }

    /// Natural parameters `(Λ*, θ*)` of the full natural-gradient step.
    fn target(&self, state: &State, eval: &Evaluation) -> (Matrix, Vec<f64>) {
        let m = self.dim();
        let curv = self.proj.weighted_gram(&eval.d_var);
        let mut lam = Matrix::identity(m);
        lam.add_scaled(-2.0, &curv);
        let mut theta = self.proj.matvec(&eval.d_mean);
        let cm = curv.matvec(&state.mean);
        for (t, c) in theta.iter_mut().zip(&cm) {
            *t -= 2.0 * c;
        }
        if let Some(extra) = &self.extra {
            lam.add_scaled(1.0, &extra.b);
            for (t, c) in theta.iter_mut().zip(&extra.c) {
                *t += c;
            }
        }
        (lam, theta)
    }

    /// Objective and Euclidean gradients with respect to `m` and `S`.
    #[cfg(test)]
    pub(crate) fn value_and_gradient(&self, mean: &[f64], cov: &Matrix) -> (f64, Vec<f64>, Matrix) {
        let prec = Cholesky::factor(cov).unwrap().inverse();
        let state = State::new(mean.to_vec(), prec).unwrap();
        let eval = self.evaluate(&state);
        let m = self.dim();
        let mut gm = self.proj.matvec(&eval.d_mean);
        for (g, x) in gm.iter_mut().zip(mean) {
            *g -= x;
        }
        let mut gs = self.proj.weighted_gram(&eval.d_var);
        let mut half = state.precision.clone();
        half.add_scaled(-1.0, &Matrix::identity(m));
        gs.add_scaled(0.5, &half);
        if let Some(extra) = &self.extra {
            let bm = extra.b.matvec(mean);
            for ((g, c), b) in gm.iter_mut().zip(&extra.c).zip(&bm) {
                *g += c - b;
            }
            gs.add_scaled(-0.5, &extra.b);
        }
        (eval.value, gm, gs)
    }

    #[cfg(test)]
    pub(crate) fn value_at(&self, q: &VariationalPosterior) -> f64 {
        self.evaluate(&State::from_posterior(q).unwrap()).value
    }
}

impl State {
    fn new(mean: Vec<f64>, mut precision: Matrix) -> Option<Self> {
        precision.symmetrize();
        let prec_chol = Cholesky::factor(&precision).ok()?;
        Some(Self {
            mean,
            precision,
            prec_chol,
        })
    }

    fn from_posterior(q: &VariationalPosterior) -> Result<Self, SvgpError> {
        let scale = Cholesky::from_lower(q.whitened_scale().clone())
            .map_err(|_| SvgpError::NotPositiveDefinite("whitened scale"))?;
        let winv = scale.lower_inverse();
        let precision = winv.transpose().matmul(&winv);
        State::new(q.whitened_mean().to_vec(), precision)
            .ok_or(SvgpError::NotPositiveDefinite("posterior precision"))
    }

    fn whitened_scale(&self) -> Result<Matrix, SvgpError> {
        let winv = self.prec_chol.lower_inverse();
        let mut s = winv.transpose().matmul(&winv);
        s.symmetrize();
        Cholesky::factor(&s)
            .map(Cholesky::into_lower)
            .map_err(|_| SvgpError::NotPositiveDefinite("fitted covariance"))
    }
}

pub(crate) fn optimize(
    problem: &Problem<'_>,
    q0: &VariationalPosterior,
    opts: &FitOptions,
) -> Result<FitOutcome, SvgpError> {
    let mut state = State::from_posterior(q0)?;
    let mut eval = problem.evaluate(&state);
    if !eval.value.is_finite() {
        return Err(SvgpError::NonFiniteElbo { iteration: 0 });
    }
    let mut trace = vec![eval.value];
    let mut step = opts.initial_step;
    let mut converged = false;
    let mut iterations = 0;

    'outer: for it in 1..=opts.max_iterations {
        iterations = it;
        let (lam_t, theta_t) = problem.target(&state, &eval);
        let theta0 = state.precision.matvec(&state.mean);
        loop {
            let mut lam = state.precision.clone();
            lam.scale(1.0 - step);
            lam.add_scaled(step, &lam_t);
            let theta: Vec<f64> = theta0
                .iter()
                .zip(&theta_t)
                .map(|(a, b)| (1.0 - step) * a + step * b)
                .collect();
            let candidate = State::new(vec![0.0; theta.len()], lam).map(|mut s| {
                s.mean = s.prec_chol.solve(&theta);
                s
            });
            if let Some(cand) = candidate {
                let next = problem.evaluate(&cand);
                let slack = 1e-12 * eval.value.abs().max(1.0);
                if next.value.is_finite() && next.value >= eval.value - slack {
                    let change = (next.value - eval.value).abs() / eval.value.abs().max(1.0);
                    state = cand;
                    eval = next;
                    trace.push(eval.value);
                    step = (step * opts.step_growth).min(1.0);
                    if change < opts.tolerance {
                        converged = true;
                        break 'outer;
                    }
                    break;
                }
            }
            step *= opts.step_shrink;
            if step < opts.min_step {
                // No step improves the objective any more.
                converged = true;
                break 'outer;
            }
        }
    }

    let posterior = VariationalPosterior::assemble(
        q0.inducing.clone(),
        q0.kernel,
        q0.kmm_chol.clone(),
        state.mean.clone(),
        state.whitened_scale()?,
    )?;
    Ok(FitOutcome {
        posterior,
        trace,
        iterations,
        converged,
    })
}
