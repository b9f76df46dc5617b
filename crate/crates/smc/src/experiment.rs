//! End-to-end procedures: dense and sparse smoothed model checking, and the
//! active loop that alternates queries with streaming updates.

use std::time::Instant;

use smc_core::design::grid_points;
use smc_core::labeling::to_dataset;
use smc_core::query::{kmeans, propose_batch};
use smc_core::rng::{mix_seed, RngStream};
use smc_core::streaming::streaming_update;
use smc_core::svgp::{fit, init_posterior};
use smc_core::{
    Dataset, Design, FitOutcome, GaussHermite, Oracle, ParameterSpace, QueryConfig, Strategy,
    VariationalPosterior,
};

use crate::config::{ExperimentConfig, InducingDesign, Mode};
use crate::error::{Error, Result};
use crate::simulation::label_points;

const SALT_DESIGN: u64 = 1;
const SALT_INITIAL_SIM: u64 = 2;
const SALT_INDUCING: u64 = 3;
const SALT_QUERY: u64 = 0x100;
const SALT_QUERY_SIM: u64 = 0x200;

/// Wall-clock seconds per phase.
#[derive(Debug, Clone, Copy, Default, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Timings {
    pub simulation: f64,
    pub inference: f64,
    pub query: f64,
    pub total: f64,
}

/// Simulated points (model coordinates) with one label per trajectory.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Batch {
    pub points: Vec<Vec<f64>>,
    pub labels: Vec<Vec<bool>>,
}

impl Batch {
    pub fn n_observations(&self) -> usize {
        self.labels.iter().map(Vec::len).sum()
    }

    pub fn dataset(&self, space: &ParameterSpace) -> Dataset {
        to_dataset(space, &self.points, &self.labels)
    }
}

/// Predicted satisfaction probability and its variance on a grid of model
/// parameter values.
#[derive(Debug, Clone, PartialEq)]
pub struct Surface {
    pub points: Vec<Vec<f64>>,
    pub mean: Vec<f64>,
    pub variance: Vec<f64>,
}

/// One fit (iteration 0) or one query/update round.
#[derive(Debug, Clone)]
pub struct Iteration {
    pub batch: Batch,
    pub elbo_trace: Vec<f64>,
    pub fit_iterations: usize,
    pub converged: bool,
    pub surface: Surface,
}

#[derive(Debug, Clone)]
pub struct RunReport {
    pub method: String,
    pub config: ExperimentConfig,
    pub space: ParameterSpace,
    pub posterior: VariationalPosterior,
    pub iterations: Vec<Iteration>,
    pub timings: Timings,
}

impl RunReport {
    /// Surface after the last iteration.
    pub fn surface(&self) -> &Surface {
        &self.iterations.last().expect("a report has at least one fit").surface
    }

    pub fn n_observations(&self) -> usize {
        self.iterations.iter().map(|i| i.batch.n_observations()).sum()
    }

    /// All observations, in normalized coordinates.
    pub fn dataset(&self) -> Dataset {
        let mut d = Dataset::empty();
        for it in &self.iterations {
            d.extend(&it.batch.dataset(&self.space));
        }
        d
    }
}

/// Simulates `n_traj` trajectories at every design point.
pub fn generate_initial_data(
    oracle: &Oracle,
    design: &Design,
    n_traj: usize,
    seed: u64,
) -> Result<Batch> {
    let mut rng = RngStream::new(mix_seed(seed, SALT_DESIGN), 0).generator();
    let points = design
        .points(&oracle.space(), &mut rng)
        .map_err(|e| Error::Config(e.to_string()))?;
    let labels = label_points(oracle, &points, n_traj, mix_seed(seed, SALT_INITIAL_SIM))?;
    Ok(Batch { points, labels })
}

pub fn method_name(config: &ExperimentConfig) -> String {
    match config.mode {
        Mode::Dense => "smoothed".into(),
        Mode::Sparse => "sparse".into(),
        Mode::Active => format!("active-{}", config.query.strategy),
    }
}

/// Runs the procedure selected by `config.mode`.
pub fn run(oracle: &Oracle, config: &ExperimentConfig) -> Result<RunReport> {
    match config.mode {
        Mode::Dense => run_smoothed(oracle, config),
        Mode::Sparse => run_sparse(oracle, config),
        Mode::Active => run_active(oracle, config),
    }
}

/// Single fit with an inducing point at every distinct training location.
pub fn run_smoothed(oracle: &Oracle, config: &ExperimentConfig) -> Result<RunReport> {
    let config = ExperimentConfig {
        mode: Mode::Dense,
        ..config.clone()
    };
    single_fit(oracle, &config, |data, _| Ok(data.distinct_points()))
}

/// Single fit with the configured inducing points.
pub fn run_sparse(oracle: &Oracle, config: &ExperimentConfig) -> Result<RunReport> {
    let config = ExperimentConfig {
        mode: Mode::Sparse,
        ..config.clone()
    };
    let inducing = config.inducing.clone();
    single_fit(oracle, &config, |data, seed| inducing_points(&inducing, data, seed))
}

fn single_fit(
    oracle: &Oracle,
    config: &ExperimentConfig,
    choose_inducing: impl FnOnce(&Dataset, u64) -> Result<Vec<Vec<f64>>>,
) -> Result<RunReport> {
    let space = oracle.space();
    config.validate(space.dim())?;
    let start = Instant::now();
    let mut timings = Timings::default();

    let t = Instant::now();
    let batch = generate_initial_data(oracle, &config.initial, config.n_traj, config.seed)?;
    timings.simulation += t.elapsed().as_secs_f64();

    let t = Instant::now();
    let data = batch.dataset(&space);
    let inducing = choose_inducing(&data, config.seed)?;
    let q0 = init_posterior(inducing, config.kernel)?;
    let out = fit(&q0, &data, &config.fit)?;
    timings.inference += t.elapsed().as_secs_f64();

    let gh = GaussHermite::new(config.fit.quadrature_nodes);
    let iteration = record(batch, &out, oracle, config, &gh)?;
    timings.total = start.elapsed().as_secs_f64();
    Ok(RunReport {
        method: method_name(config),
        config: config.clone(),
        space,
        posterior: out.posterior,
        iterations: vec![iteration],
        timings,
    })
}

/// Initial fit, then `active_iterations` rounds of query, simulation and
/// streaming update with the inducing points held fixed.
pub fn run_active(oracle: &Oracle, config: &ExperimentConfig) -> Result<RunReport> {
    let config = ExperimentConfig {
        mode: Mode::Active,
        ..config.clone()
    };
    let space = oracle.space();
    config.validate(space.dim())?;
    let gh = GaussHermite::new(config.fit.quadrature_nodes);
    let start = Instant::now();
    let mut timings = Timings::default();

    let t = Instant::now();
    let batch = generate_initial_data(oracle, &config.initial, config.n_traj, config.seed)?;
    timings.simulation += t.elapsed().as_secs_f64();

    let t = Instant::now();
    let data = batch.dataset(&space);
    let inducing = inducing_points(&config.inducing, &data, config.seed)?;
    let out = fit(&init_posterior(inducing, config.kernel)?, &data, &config.fit)?;
    timings.inference += t.elapsed().as_secs_f64();

    let mut iterations = vec![record(batch, &out, oracle, &config, &gh)?];
    let mut q = out.posterior;

    for round in 1..=config.active_iterations as u64 {
        let t = Instant::now();
        let query = QueryConfig {
            seed: mix_seed(config.seed, SALT_QUERY + round),
            ..config.query.clone()
        };
        let points: Vec<Vec<f64>> = propose_batch(&q, &query, &gh)?
            .iter()
            .map(|u| space.denormalize(u))
            .collect();
        timings.query += t.elapsed().as_secs_f64();

        let t = Instant::now();
        let labels = label_points(
            oracle,
            &points,
            config.active_n_traj,
            mix_seed(config.seed, SALT_QUERY_SIM + round),
        )?;
        timings.simulation += t.elapsed().as_secs_f64();

        let batch = Batch { points, labels };
        let t = Instant::now();
        let out = streaming_update(&q, &batch.dataset(&space), None, &config.fit)?;
        timings.inference += t.elapsed().as_secs_f64();

        iterations.push(record(batch, &out, oracle, &config, &gh)?);
        q = out.posterior;
    }
    timings.total = start.elapsed().as_secs_f64();
    Ok(RunReport {
        method: method_name(&config),
        config,
        space,
        posterior: q,
        iterations,
        timings,
    })
}

/// Inducing points in normalized coordinates.
pub fn inducing_points(
    design: &InducingDesign,
    data: &Dataset,
    seed: u64,
) -> Result<Vec<Vec<f64>>> {
    let distinct = data.distinct_points();
    match design {
        InducingDesign::Grid(dims) => grid_points(&ParameterSpace::unit(dims.len()), dims)
            .map_err(|e| Error::Config(e.to_string())),
        InducingDesign::Initial => Ok(distinct),
        InducingDesign::KMeans(k) => {
            let mut rng = RngStream::new(mix_seed(seed, SALT_INDUCING), 0).generator();
            kmeans(&distinct, *k, &mut rng).map_err(|e| Error::Config(e.to_string()))
        }
    }
}

/// Prediction surface on a regular grid over the model's parameter box.
pub fn evaluate_surface(
    q: &VariationalPosterior,
    space: &ParameterSpace,
    grid: &[usize],
    gh: &GaussHermite,
) -> Result<Surface> {
    let points = grid_points(space, grid).map_err(|e| Error::Config(e.to_string()))?;
    let unit: Vec<Vec<f64>> = points.iter().map(|p| space.normalize(p)).collect();
    let mean = q.predict_probability(&unit)?;
    let variance = q.predictive_variance(&unit, gh)?;
    Ok(Surface {
        points,
        mean,
        variance,
    })
}

fn record(
    batch: Batch,
    out: &FitOutcome,
    oracle: &Oracle,
    config: &ExperimentConfig,
    gh: &GaussHermite,
) -> Result<Iteration> {
    Ok(Iteration {
        batch,
        elbo_trace: out.trace.clone(),
        fit_iterations: out.iterations,
        converged: out.converged,
        surface: evaluate_surface(&out.posterior, &oracle.space(), &config.eval_grid, gh)?,
    })
}

/// Convenience for callers that only vary the query strategy.
pub fn with_strategy(config: &ExperimentConfig, strategy: Strategy) -> ExperimentConfig {
    let mut c = config.clone();
    c.mode = Mode::Active;
    c.query.strategy = strategy;
    c
}
