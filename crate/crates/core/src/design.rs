//! Point sets over a parameter box: regular grids, uniform samples and
//! Latin hypercubes.

use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::crn::ParameterSpace;
use crate::rng::StreamRng;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DesignError {
    Syntax(String),
    DimensionMismatch { expected: usize, found: usize },
    Empty,
}

impl fmt::Display for DesignError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DesignError::Syntax(s) => write!(f, "cannot parse design `{s}`"),
            DesignError::DimensionMismatch { expected, found } => {
                write!(f, "design has {found} axes but the space has {expected}")
            }
            DesignError::Empty => write!(f, "design has no points"),
        }
    }
}

impl core::error::Error for DesignError {}

/// How to place points in a box.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Design {
    /// Regular grid with the given number of levels per axis.
    Grid(Vec<usize>),
    Uniform(usize),
    LatinHypercube(usize),
}

impl Design {
    pub fn len(&self) -> usize {
        match self {
            Design::Grid(dims) => dims.iter().product(),
            Design::Uniform(n) | Design::LatinHypercube(n) => *n,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Points in the box. Random designs draw from `rng`.
    pub fn points(
        &self,
        space: &ParameterSpace,
        rng: &mut StreamRng,
    ) -> Result<Vec<Vec<f64>>, DesignError> {
        if self.is_empty() {
            return Err(DesignError::Empty);
        }
        match self {
            Design::Grid(dims) => grid_points(space, dims),
            Design::Uniform(n) => Ok(uniform_points(space, *n, rng)),
            Design::LatinHypercube(n) => Ok(lhs_points(space, *n, rng)),
        }
    }
}

impl fmt::Display for Design {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Design::Grid(dims) => {
                write!(f, "grid ")?;
                for (i, d) in dims.iter().enumerate() {
                    if i > 0 {
                        write!(f, "x")?;
                    }
                    write!(f, "{d}")?;
                }
                Ok(())
            }
            Design::Uniform(n) => write!(f, "uniform {n}"),
            Design::LatinHypercube(n) => write!(f, "lhs {n}"),
        }
    }
}

impl FromStr for Design {
    type Err = DesignError;

    /// `grid 10x10`, `uniform 100` or `lhs 100`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = || DesignError::Syntax(s.to_string());
        let mut parts = s.split_whitespace();
        let kind = parts.next().ok_or_else(err)?;
        let arg = parts.next().ok_or_else(err)?;
        if parts.next().is_some() {
            return Err(err());
        }
        match kind {
            "grid" => parse_grid_dims(arg).map(Design::Grid).map_err(|_| err()),
            "uniform" => arg.parse().map(Design::Uniform).map_err(|_| err()),
            "lhs" => arg.parse().map(Design::LatinHypercube).map_err(|_| err()),
            _ => Err(err()),
        }
    }
}

/// Parses `20x20` (or `20` for one axis) into per-axis level counts.
pub fn parse_grid_dims(s: &str) -> Result<Vec<usize>, DesignError> {
    let dims: Option<Vec<usize>> = s
        .split('x')
        .map(|p| p.trim().parse::<usize>().ok().filter(|n| *n > 0))
        .collect();
    dims.ok_or_else(|| DesignError::Syntax(s.to_string()))
}

/// `n` evenly spaced values covering `[lo, hi]` including both ends; a
/// single value sits at the midpoint.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![0.5 * (lo + hi)],
        _ => (0..n)
            .map(|i| {
                if i == n - 1 {
                    hi
                } else {
                    lo + (hi - lo) * i as f64 / (n - 1) as f64
                }
            })
            .collect(),
    }
}

/// Cartesian grid; the last axis varies fastest.
pub fn grid_points(space: &ParameterSpace, dims: &[usize]) -> Result<Vec<Vec<f64>>, DesignError> {
    if dims.len() != space.dim() {
        return Err(DesignError::DimensionMismatch {
            expected: space.dim(),
            found: dims.len(),
        });
    }
    let axes: Vec<Vec<f64>> = space
        .bounds
        .iter()
        .zip(dims)
        .map(|((lo, hi), n)| linspace(*lo, *hi, *n))
        .collect();
    let total: usize = dims.iter().product();
    let mut out = Vec::with_capacity(total);
    let mut idx = vec![0usize; dims.len()];
    for _ in 0..total {
        out.push(idx.iter().zip(&axes).map(|(i, a)| a[*i]).collect());
        for k in (0..dims.len()).rev() {
            idx[k] += 1;
            if idx[k] < dims[k] {
                break;
            }
            idx[k] = 0;
        }
    }
    Ok(out)
}

pub fn uniform_points(space: &ParameterSpace, n: usize, rng: &mut StreamRng) -> Vec<Vec<f64>> {
    (0..n)
        .map(|_| {
            space
                .bounds
                .iter()
                .map(|(lo, hi)| lo + (hi - lo) * rng.uniform())
                .collect()
        })
        .collect()
}

/// Latin hypercube: every axis has exactly one point in each of its `n`
/// equal strata.
pub fn lhs_points(space: &ParameterSpace, n: usize, rng: &mut StreamRng) -> Vec<Vec<f64>> {
    let d = space.dim();
    let mut out = vec![vec![0.0; d]; n];
    for (k, (lo, hi)) in space.bounds.iter().enumerate() {
        let mut perm: Vec<usize> = (0..n).collect();
        for i in (1..n).rev() {
            perm.swap(i, rng.below(i + 1));
        }
        for (p, s) in out.iter_mut().zip(&perm) {
            let u = (*s as f64 + rng.uniform()) / n as f64;
            p[k] = lo + (hi - lo) * u;
        }
    }
    out
}
