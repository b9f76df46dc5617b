//! Turning parameter points into Bernoulli observations by simulating the
//! model and checking the property on every trajectory.

use alloc::vec::Vec;
use core::fmt;

use crate::crn::{CrnModel, ModelError, ParameterSpace};
use crate::property::{check, Property, PropertyError};
use crate::rng::RngStream;
use crate::ssa::{simulate, stream_index};
use crate::svgp::Dataset;

#[derive(Debug, Clone, PartialEq)]
pub enum LabelError {
    Model(ModelError),
    Property(PropertyError),
    InvalidHorizon(f64),
    NoTrajectories,
}

impl fmt::Display for LabelError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LabelError::Model(e) => write!(f, "{e}"),
            LabelError::Property(e) => write!(f, "{e}"),
            LabelError::InvalidHorizon(t) => write!(f, "simulation horizon {t} is not positive"),
            LabelError::NoTrajectories => write!(f, "need at least one trajectory per point"),
        }
    }
}

impl core::error::Error for LabelError {}

impl From<ModelError> for LabelError {
    fn from(e: ModelError) -> Self {
        LabelError::Model(e)
    }
}

impl From<PropertyError> for LabelError {
    fn from(e: PropertyError) -> Self {
        LabelError::Property(e)
    }
}

/// A model, a property and a simulation horizon.
#[derive(Debug, Clone)]
pub struct Oracle {
    pub model: CrnModel,
    pub property: Property,
    pub t_end: f64,
}

impl Oracle {
    pub fn new(model: CrnModel, property: Property, t_end: f64) -> Result<Self, LabelError> {
        if !(t_end > 0.0 && t_end.is_finite()) {
            return Err(LabelError::InvalidHorizon(t_end));
        }
        property.validate()?;
        if property.horizon() > t_end {
            return Err(PropertyError::HorizonTooShort {
                needed: property.horizon(),
                t_end,
            }
            .into());
        }
        if let Some(s) = property.max_species() {
            if s >= model.n_species() {
                return Err(PropertyError::SpeciesOutOfRange {
                    species: s,
                    n_species: model.n_species(),
                }
                .into());
            }
        }
        Ok(Self {
            model,
            property,
            t_end,
        })
    }

    pub fn space(&self) -> ParameterSpace {
        self.model.space()
    }

    /// Labels of `n_traj` trajectories at the `point_index`-th point of a
    /// batch; trajectory `j` uses stream `point_index * n_traj + j`.
    pub fn label_point(
        &self,
        point: &[f64],
        n_traj: usize,
        seed: u64,
        point_index: usize,
    ) -> Result<Vec<bool>, LabelError> {
        if n_traj == 0 {
            return Err(LabelError::NoTrajectories);
        }
        let p = self.model.point(point.to_vec())?;
        (0..n_traj)
            .map(|j| {
                let stream = RngStream::new(seed, stream_index(point_index, n_traj, j));
                let traj = simulate(&self.model, &p, self.t_end, stream);
                check(&traj, &self.property).map_err(LabelError::from)
            })
            .collect()
    }

    /// Sequential labelling of a batch of points.
    pub fn label_points(
        &self,
        points: &[Vec<f64>],
        n_traj: usize,
        seed: u64,
    ) -> Result<Vec<Vec<bool>>, LabelError> {
        points
            .iter()
            .enumerate()
            .map(|(i, p)| self.label_point(p, n_traj, seed, i))
            .collect()
    }
}

/// Fraction of `true` labels.
pub fn success_rate(labels: &[bool]) -> f64 {
    if labels.is_empty() {
        return 0.0;
    }
    labels.iter().filter(|l| **l).count() as f64 / labels.len() as f64
}

/// Observations in normalized coordinates, one row per trajectory.
pub fn to_dataset(space: &ParameterSpace, points: &[Vec<f64>], labels: &[Vec<bool>]) -> Dataset {
    let mut d = Dataset::empty();
    for (p, ls) in points.iter().zip(labels) {
        d.push_labels(&space.normalize(p), ls);
    }
    d
}
