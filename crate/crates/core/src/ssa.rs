//! Exact trajectory sampling with Gillespie's direct method.

use alloc::vec;
use alloc::vec::Vec;

use crate::crn::{CrnModel, ParameterPoint};
use crate::rng::{RngStream, StreamRng};

/// Right-continuous piecewise-constant path over `[0, t_end]`.
///
/// The state recorded at `times[i]` holds on `[times[i], times[i + 1])`; the
/// last state holds up to and including `t_end`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    n_species: usize,
    times: Vec<f64>,
    /// Row-major, one row of `n_species` counts per jump.
    states: Vec<u64>,
    t_end: f64,
}

impl Trajectory {
    /// Builds a trajectory from explicit jumps, checking the invariants.
    pub fn new(
        n_species: usize,
        times: Vec<f64>,
        states: Vec<Vec<u64>>,
        t_end: f64,
    ) -> Result<Self, &'static str> {
        if times.is_empty() || times[0] != 0.0 {
            return Err("trajectory must start at time 0");
        }
        if times.len() != states.len() {
            return Err("times and states differ in length");
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err("jump times must be strictly increasing");
        }
        if !(*times.last().unwrap() <= t_end) {
            return Err("last jump after t_end");
        }
        if states.iter().any(|s| s.len() != n_species) {
            return Err("state dimension mismatch");
        }
        Ok(Self {
            n_species,
            times,
            states: states.concat(),
            t_end,
        })
    }

    pub fn n_species(&self) -> usize {
        self.n_species
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn t_end(&self) -> f64 {
        self.t_end
    }

    pub fn state(&self, i: usize) -> &[u64] {
        &self.states[i * self.n_species..(i + 1) * self.n_species]
    }

    pub fn states(&self) -> impl Iterator<Item = &[u64]> {
        self.states.chunks_exact(self.n_species.max(1))
    }

    /// End of segment `i`: the next jump time, or `t_end` for the last one.
    pub fn segment_end(&self, i: usize) -> f64 {
        self.times.get(i + 1).copied().unwrap_or(self.t_end)
    }

    /// State at time `t`.
    pub fn state_at(&self, t: f64) -> &[u64] {
        let i = self.times.partition_point(|&s| s <= t).saturating_sub(1);
        self.state(i)
    }

    pub fn final_state(&self) -> &[u64] {
        self.state(self.len() - 1)
    }
}

/// Samples one trajectory up to `t_end`.
pub fn simulate(
    model: &CrnModel,
    point: &ParameterPoint,
    t_end: f64,
    stream: RngStream,
) -> Trajectory {
    assert!(t_end > 0.0, "simulation horizon must be positive");
    let mut rng = stream.generator();
    simulate_with(model, point, t_end, &mut rng)
}

fn simulate_with(
    model: &CrnModel,
    point: &ParameterPoint,
    t_end: f64,
    rng: &mut StreamRng,
) -> Trajectory {
    let n = model.n_species();
    let mut state = model.initial_state.clone();
    let mut props = vec![0.0; model.reactions.len()];
    let mut times = vec![0.0];
    let mut states = state.clone();
    let mut t = 0.0f64;

    loop {
        model.propensities_into(&state, point, &mut props);
        let total: f64 = props.iter().sum();
        if !(total > 0.0) {
            break;
        }
        let dt = rng.exponential(total);
        let mut next_t = t + dt;
        if next_t > t_end {
            break;
        }
        if next_t <= t {
            next_t = t.next_up();
        }
        let target = rng.uniform() * total;
        let mut acc = 0.0;
        let mut chosen = None;
        for (r, a) in props.iter().enumerate() {
            if *a > 0.0 {
                acc += a;
                chosen = Some(r);
                if target < acc {
                    break;
                }
            }
        }
        // `chosen` is the last positive reaction if rounding left target >= acc.
        let r = chosen.expect("positive total rate implies a positive propensity");
        model
            .apply_reaction_in_place(&mut state, r)
            .expect("reaction with positive propensity is applicable");
        t = next_t;
        times.push(t);
        states.extend_from_slice(&state);
    }

    Trajectory {
        n_species: n,
        times,
        states,
        t_end,
    }
}

/// Stream index used for trajectory `j` of point `i`.
#[inline]
pub fn stream_index(point_index: usize, n_traj: usize, traj_index: usize) -> u64 {
    (point_index * n_traj + traj_index) as u64
}

/// `n_traj` trajectories per point; trajectory `(i, j)` uses stream
/// `i * n_traj + j` of `base_seed`.
pub fn simulate_batch(
    model: &CrnModel,
    points: &[ParameterPoint],
    n_traj: usize,
    t_end: f64,
    base_seed: u64,
) -> Vec<Vec<Trajectory>> {
    assert!(n_traj >= 1, "need at least one trajectory per point");
    points
        .iter()
        .enumerate()
        .map(|(i, p)| {
            (0..n_traj)
                .map(|j| {
                    simulate(
                        model,
                        p,
                        t_end,
                        RngStream::new(base_seed, stream_index(i, n_traj, j)),
                    )
                })
                .collect()
        })
        .collect()
}
