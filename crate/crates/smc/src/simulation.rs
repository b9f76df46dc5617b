//! Parallel simulation on top of the core labelling routines. Work is split
//! by point and every trajectory keeps its own random stream, so results do
//! not depend on the thread count.

use rayon::prelude::*;
use smc_core::design::grid_points;
use smc_core::labeling::success_rate;
use smc_core::rng::RngStream;
use smc_core::ssa::stream_index;
use smc_core::{simulate, Oracle, Trajectory};

use crate::error::{Error, Result};

/// Labels of `n_traj` trajectories at every point.
pub fn label_points(
    oracle: &Oracle,
    points: &[Vec<f64>],
    n_traj: usize,
    seed: u64,
) -> Result<Vec<Vec<bool>>> {
    points
        .par_iter()
        .enumerate()
        .map(|(i, p)| oracle.label_point(p, n_traj, seed, i).map_err(Error::from))
        .collect()
}

/// Estimated satisfaction probability at every point of a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Baseline {
    pub points: Vec<Vec<f64>>,
    pub estimate: Vec<f64>,
}

/// Monte-Carlo estimate `successes / runs` on a regular grid.
pub fn naive_baseline(oracle: &Oracle, grid: &[usize], runs: usize, seed: u64) -> Result<Baseline> {
    let points = grid_points(&oracle.space(), grid).map_err(|e| Error::Config(e.to_string()))?;
    let labels = label_points(oracle, &points, runs, seed)?;
    let estimate = labels.iter().map(|l| success_rate(l)).collect();
    Ok(Baseline { points, estimate })
}

/// `n_traj` trajectories at one point, with the same stream layout as a
/// single-point batch.
pub fn trajectories(oracle: &Oracle, point: &[f64], n_traj: usize, seed: u64) -> Result<Vec<Trajectory>> {
    let p = oracle
        .model
        .point(point.to_vec())
        .map_err(|e| Error::Config(e.to_string()))?;
    Ok((0..n_traj)
        .into_par_iter()
        .map(|j| {
            simulate(
                &oracle.model,
                &p,
                oracle.t_end,
                RngStream::new(seed, stream_index(0, n_traj, j)),
            )
        })
        .collect())
}
