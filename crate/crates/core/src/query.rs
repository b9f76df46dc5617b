//! Pool-based batch queries: sample candidates, cluster them, and keep the
//! cluster centres where the surrogate is least certain or changes fastest.
//!
//! All geometry happens in normalized coordinates (the unit box), the same
//! space the posterior is fitted in.

use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;
use core::fmt;
use core::str::FromStr;

use crate::gp::{squared_distance, GaussHermite};
use crate::labeling::{to_dataset, LabelError, Oracle};
use crate::rng::{RngStream, StreamRng};
use crate::svgp::{Dataset, SvgpError, VariationalPosterior};

const KMEANS_MAX_ITERATIONS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Strategy {
    Variance,
    Gradient,
    Random,
}

impl Strategy {
    pub const ALL: [Strategy; 3] = [Strategy::Variance, Strategy::Gradient, Strategy::Random];

    pub fn name(self) -> &'static str {
        match self {
            Strategy::Variance => "variance",
            Strategy::Gradient => "gradient",
            Strategy::Random => "random",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Strategy {
    type Err = QueryError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Strategy::ALL
            .into_iter()
            .find(|st| st.name() == s)
            .ok_or_else(|| QueryError::UnknownStrategy(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum QueryError {
    UnknownStrategy(String),
    InvalidConfig(&'static str),
    TooFewPoints { k: usize, n: usize },
    Posterior(SvgpError),
    Label(LabelError),
}

impl fmt::Display for QueryError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            QueryError::UnknownStrategy(s) => {
                write!(f, "unknown query strategy `{s}` (expected variance, gradient or random)")
            }
            QueryError::InvalidConfig(msg) => write!(f, "invalid query configuration: {msg}"),
            QueryError::TooFewPoints { k, n } => {
                write!(f, "cannot form {k} clusters from {n} points")
            }
            QueryError::Posterior(e) => write!(f, "{e}"),
            QueryError::Label(e) => write!(f, "{e}"),
        }
    }
}

impl core::error::Error for QueryError {}

impl From<SvgpError> for QueryError {
    fn from(e: SvgpError) -> Self {
        QueryError::Posterior(e)
    }
}

impl From<LabelError> for QueryError {
    fn from(e: LabelError) -> Self {
        QueryError::Label(e)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QueryConfig {
    pub pool_size: usize,
    pub n_clusters: usize,
    pub batch_size: usize,
    pub strategy: Strategy,
    pub seed: u64,
}

impl Default for QueryConfig {
    fn default() -> Self {
        Self {
            pool_size: 1000,
            n_clusters: 450,
            batch_size: 150,
            strategy: Strategy::Variance,
            seed: 0,
        }
    }
}

impl QueryConfig {
    pub fn validate(&self) -> Result<(), QueryError> {
        if self.pool_size == 0 {
            return Err(QueryError::InvalidConfig("pool_size must be positive"));
        }
        if self.n_clusters > self.pool_size {
            return Err(QueryError::InvalidConfig("n_clusters exceeds pool_size"));
        }
        if self.batch_size > self.n_clusters {
            return Err(QueryError::InvalidConfig("batch_size exceeds n_clusters"));
        }
        Ok(())
    }
}

/// `n` points uniform over `[0, 1]^dim`.
pub fn sample_pool(dim: usize, n: usize, rng: &mut StreamRng) -> Vec<Vec<f64>> {
    (0..n)
        .map(|_| (0..dim).map(|_| rng.uniform()).collect())
        .collect()
}

fn nearest(p: &[f64], centers: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (i, c) in centers.iter().enumerate() {
        let d = squared_distance(p, c);
        if d < best.1 {
            best = (i, d);
        }
    }
    best
}

/// k-means++ seeding followed by Lloyd iterations, until the assignment
/// stops changing or 100 rounds have run. An empty cluster keeps its centre.
pub fn kmeans(
    points: &[Vec<f64>],
    k: usize,
    rng: &mut StreamRng,
) -> Result<Vec<Vec<f64>>, QueryError> {
    let n = points.len();
    if k > n {
        return Err(QueryError::TooFewPoints { k, n });
    }
    if k == 0 {
        return Ok(Vec::new());
    }
    let d = points[0].len();

    let mut chosen = vec![false; n];
    let first = rng.below(n);
    chosen[first] = true;
    let mut centers = vec![points[first].clone()];
    let mut dist: Vec<f64> = points.iter().map(|p| squared_distance(p, &centers[0])).collect();
    while centers.len() < k {
        let total: f64 = dist.iter().sum();
        let next = if total > 0.0 {
            let target = rng.uniform() * total;
            let mut acc = 0.0;
            let mut pick = None;
            for (i, w) in dist.iter().enumerate() {
                if *w > 0.0 {
                    acc += w;
                    pick = Some(i);
                    if target < acc {
                        break;
                    }
                }
            }
            pick.expect("positive total implies a positive weight")
        } else {
            // every point coincides with a centre already
            (0..n).find(|i| !chosen[*i]).expect("k <= n")
        };
        chosen[next] = true;
        centers.push(points[next].clone());
        for (w, p) in dist.iter_mut().zip(points) {
            *w = w.min(squared_distance(p, &points[next]));
        }
    }

    let mut assign: Vec<usize> = points.iter().map(|p| nearest(p, &centers).0).collect();
    for _ in 0..KMEANS_MAX_ITERATIONS {
        let mut sums = vec![vec![0.0; d]; k];
        let mut counts = vec![0usize; k];
        for (p, a) in points.iter().zip(&assign) {
            counts[*a] += 1;
            for (s, v) in sums[*a].iter_mut().zip(p) {
                *s += v;
            }
        }
        for ((c, s), n) in centers.iter_mut().zip(sums).zip(&counts) {
            if *n > 0 {
                *c = s.into_iter().map(|v| v / *n as f64).collect();
            }
        }
        let next: Vec<usize> = points.iter().map(|p| nearest(p, &centers).0).collect();
        if next == assign {
            break;
        }
        assign = next;
    }
    Ok(centers)
}

/// Acquisition score of each candidate; higher is more informative.
/// `Random` scores are all zero.
pub fn scores(
    q: &VariationalPosterior,
    candidates: &[Vec<f64>],
    strategy: Strategy,
    gh: &GaussHermite,
) -> Result<Vec<f64>, QueryError> {
    Ok(match strategy {
        Strategy::Variance => q.predictive_variance(candidates, gh)?,
        Strategy::Gradient => candidates
            .iter()
            .map(|x| {
                let g = q.mean_gradient(x);
                libm::sqrt(g.iter().map(|v| v * v).sum())
            })
            .collect(),
        Strategy::Random => vec![0.0; candidates.len()],
    })
}

/// Indices of the chosen candidates. Scored strategies take the top
/// `batch_size` (ties to the lower index); `Random` samples without
/// replacement. Duplicate candidates are only ever chosen once.
pub fn select_batch(
    q: &VariationalPosterior,
    candidates: &[Vec<f64>],
    batch_size: usize,
    strategy: Strategy,
    gh: &GaussHermite,
    rng: &mut StreamRng,
) -> Result<Vec<usize>, QueryError> {
    let mut distinct: Vec<usize> = Vec::with_capacity(candidates.len());
    for (i, c) in candidates.iter().enumerate() {
        if !distinct.iter().any(|j| candidates[*j] == *c) {
            distinct.push(i);
        }
    }
    let take = batch_size.min(distinct.len());
    if strategy == Strategy::Random {
        for i in 0..take {
            let j = i + rng.below(distinct.len() - i);
            distinct.swap(i, j);
        }
        distinct.truncate(take);
        return Ok(distinct);
    }
    let s = scores(q, candidates, strategy, gh)?;
    distinct.sort_by(|a, b| s[*b].partial_cmp(&s[*a]).unwrap_or(Ordering::Equal));
    distinct.truncate(take);
    Ok(distinct)
}

/// Pool → k-means → selection, in normalized coordinates.
pub fn propose_batch(
    q: &VariationalPosterior,
    config: &QueryConfig,
    gh: &GaussHermite,
) -> Result<Vec<Vec<f64>>, QueryError> {
    config.validate()?;
    if config.batch_size == 0 {
        return Ok(Vec::new());
    }
    let pool = sample_pool(
        q.input_dim(),
        config.pool_size,
        &mut RngStream::new(config.seed, 0).generator(),
    );
    let centers = kmeans(
        &pool,
        config.n_clusters,
        &mut RngStream::new(config.seed, 1).generator(),
    )?;
    let picked = select_batch(
        q,
        &centers,
        config.batch_size,
        config.strategy,
        gh,
        &mut RngStream::new(config.seed, 2).generator(),
    )?;
    Ok(picked.into_iter().map(|i| centers[i].clone()).collect())
}

/// New observations at a proposed batch: returns the chosen points in model
/// coordinates and their labels as a normalized [`Dataset`].
pub fn query_new(
    q: &VariationalPosterior,
    oracle: &Oracle,
    config: &QueryConfig,
    n_traj: usize,
    sim_seed: u64,
    gh: &GaussHermite,
) -> Result<(Vec<Vec<f64>>, Dataset), QueryError> {
    let space = oracle.space();
    let points: Vec<Vec<f64>> = propose_batch(q, config, gh)?
        .iter()
        .map(|u| space.denormalize(u))
        .collect();
    let labels = oracle.label_points(&points, n_traj, sim_seed)?;
    let data = to_dataset(&space, &points, &labels);
    Ok((points, data))
}
