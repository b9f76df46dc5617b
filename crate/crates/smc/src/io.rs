//! File formats: CSV surfaces and trajectories, JSON metadata and
//! posterior files.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use smc_core::linalg::Matrix;
use smc_core::{KernelParams, Oracle, ParameterSpace, Trajectory, VariationalPosterior};

use crate::error::{Error, Result};
use crate::experiment::{RunReport, Surface, Timings};
use crate::simulation::Baseline;

fn writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::write(dir, e))?;
    }
    csv::Writer::from_path(path).map_err(|e| Error::write(path, e))
}

fn coord_header(dim: usize) -> Vec<String> {
    (1..=dim).map(|i| format!("x{i}")).collect()
}

fn write_rows(
    path: &Path,
    header: Vec<String>,
    rows: impl Iterator<Item = Vec<String>>,
) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(&header).map_err(|e| Error::write(path, e))?;
    for r in rows {
        w.write_record(&r).map_err(|e| Error::write(path, e))?;
    }
    w.flush().map_err(|e| Error::write(path, e))
}

/// `t,<species...>`, one row per jump.
pub fn write_trajectory_csv(path: &Path, species: &[String], traj: &Trajectory) -> Result<()> {
    let mut header = vec!["t".to_string()];
    header.extend(species.iter().cloned());
    let rows = traj.times().iter().zip(traj.states()).map(|(t, s)| {
        let mut r = vec![t.to_string()];
        r.extend(s.iter().map(u64::to_string));
        r
    });
    write_rows(path, header, rows)
}

/// `x1,...,xd,estimate`.
pub fn write_baseline_csv(path: &Path, b: &Baseline) -> Result<()> {
    let dim = b.points.first().map_or(0, Vec::len);
    let mut header = coord_header(dim);
    header.push("estimate".into());
    let rows = b.points.iter().zip(&b.estimate).map(|(p, e)| {
        let mut r: Vec<String> = p.iter().map(f64::to_string).collect();
        r.push(e.to_string());
        r
    });
    write_rows(path, header, rows)
}

/// `x1,...,xd,mean,variance`.
pub fn write_surface_csv(path: &Path, s: &Surface) -> Result<()> {
    let dim = s.points.first().map_or(0, Vec::len);
    let mut header = coord_header(dim);
    header.extend(["mean".into(), "variance".into()]);
    let rows = s
        .points
        .iter()
        .zip(s.mean.iter().zip(&s.variance))
        .map(|(p, (m, v))| {
            let mut r: Vec<String> = p.iter().map(f64::to_string).collect();
            r.push(m.to_string());
            r.push(v.to_string());
            r
        });
    write_rows(path, header, rows)
}

type Columns = Vec<Vec<f64>>;

/// Coordinate columns plus the named value columns, in order.
fn read_table(path: &Path, values: &[&str]) -> Result<(Columns, Columns)> {
    let parse_err = |m: String| Error::Parse(format!("{}: {m}", path.display()));
    let mut r = csv::Reader::from_path(path).map_err(|e| match e.kind() {
        csv::ErrorKind::Io(_) => Error::Config(format!("{}: {e}", path.display())),
        _ => parse_err(e.to_string()),
    })?;
    let header: Vec<String> = r
        .headers()
        .map_err(|e| parse_err(e.to_string()))?
        .iter()
        .map(str::to_string)
        .collect();
    let dim = header.len().saturating_sub(values.len());
    let expected: Vec<String> = coord_header(dim)
        .into_iter()
        .chain(values.iter().map(|s| s.to_string()))
        .collect();
    if header != expected || dim == 0 {
        return Err(parse_err(format!(
            "expected header `{}`, found `{}`",
            expected.join(","),
            header.join(",")
        )));
    }
    let mut points = Vec::new();
    let mut cols = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| parse_err(e.to_string()))?;
        let nums: Vec<f64> = rec
            .iter()
            .map(|f| f.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| parse_err(format!("row {}: {e}", line + 2)))?;
        points.push(nums[..dim].to_vec());
        cols.push(nums[dim..].to_vec());
    }
    Ok((points, cols))
}

pub fn read_baseline_csv(path: &Path) -> Result<Baseline> {
    let (points, cols) = read_table(path, &["estimate"])?;
    Ok(Baseline {
        points,
        estimate: cols.into_iter().map(|c| c[0]).collect(),
    })
}

pub fn read_surface_csv(path: &Path) -> Result<Surface> {
    let (points, cols) = read_table(path, &["mean", "variance"])?;
    Ok(Surface {
        points,
        mean: cols.iter().map(|c| c[0]).collect(),
        variance: cols.iter().map(|c| c[1]).collect(),
    })
}

/// Self-describing posterior file. The whitened parameters are
/// authoritative; `mean` and `scale_tril` (μ and the lower-triangular square
/// root of Σ) are provided for other readers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorFile {
    pub format: String,
    pub version: u32,
    pub link: String,
    pub kernel: KernelFile,
    /// Parameter box used to normalize inputs.
    pub bounds: Vec<(f64, f64)>,
    /// Normalized inducing locations.
    pub inducing: Vec<Vec<f64>>,
    pub mean: Vec<f64>,
    pub scale_tril: Vec<Vec<f64>>,
    pub whitened_mean: Vec<f64>,
    pub whitened_scale_tril: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelFile {
    #[serde(rename = "type")]
    pub kind: String,
    pub length_scale: f64,
    pub jitter: f64,
}

const POSTERIOR_FORMAT: &str = "smc-posterior";

fn rows(m: &Matrix) -> Vec<Vec<f64>> {
    (0..m.rows()).map(|r| m.row(r).to_vec()).collect()
}

impl PosteriorFile {
    pub fn new(q: &VariationalPosterior, space: &ParameterSpace) -> Self {
        Self {
            format: POSTERIOR_FORMAT.into(),
            version: 1,
            link: "probit".into(),
            kernel: KernelFile {
                kind: "squared_exponential".into(),
                length_scale: q.kernel().length_scale,
                jitter: q.kernel().jitter,
            },
            bounds: space.bounds.clone(),
            inducing: q.inducing().to_vec(),
            mean: q.mean(),
            scale_tril: rows(&q.scale_tril()),
            whitened_mean: q.whitened_mean().to_vec(),
            whitened_scale_tril: rows(q.whitened_scale()),
        }
    }

    pub fn posterior(&self) -> Result<(VariationalPosterior, ParameterSpace)> {
        let bad = |m: String| Error::Parse(format!("posterior file: {m}"));
        if self.format != POSTERIOR_FORMAT || self.version != 1 {
            return Err(bad(format!("unsupported format {} v{}", self.format, self.version)));
        }
        if self.link != "probit" || self.kernel.kind != "squared_exponential" {
            return Err(bad("only probit / squared_exponential is supported".into()));
        }
        let m = self.whitened_mean.len();
        if self.whitened_scale_tril.len() != m || self.whitened_scale_tril.iter().any(|r| r.len() != m) {
            return Err(bad("scale matrix has the wrong shape".into()));
        }
        let scale = Matrix::from_row_major(m, m, self.whitened_scale_tril.concat());
        let kernel = KernelParams::new(self.kernel.length_scale, self.kernel.jitter)
            .map_err(|e| bad(e.to_string()))?;
        let q = VariationalPosterior::from_whitened(
            self.inducing.clone(),
            kernel,
            self.whitened_mean.clone(),
            scale,
        )
        .map_err(|e| bad(e.to_string()))?;
        Ok((q, ParameterSpace::new(self.bounds.clone())))
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::write(dir, e))?;
    }
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::write(path, e))?;
    fs::write(path, text + "\n").map_err(|e| Error::write(path, e))
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
}

pub fn save_posterior(path: &Path, q: &VariationalPosterior, space: &ParameterSpace) -> Result<()> {
    write_json(path, &PosteriorFile::new(q, space))
}

pub fn load_posterior(path: &Path) -> Result<(VariationalPosterior, ParameterSpace)> {
    read_json::<PosteriorFile>(path)?.posterior()
}

/// Contents of `metadata.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metadata {
    pub method: String,
    pub model: ModelInfo,
    pub config: ConfigEcho,
    pub timings: Timings,
    pub n_observations: usize,
    pub n_inducing: usize,
    pub iterations: Vec<IterationInfo>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelInfo {
    pub species: Vec<String>,
    pub parameters: Vec<String>,
    pub bounds: Vec<(f64, f64)>,
    pub property: String,
    pub t_end: f64,
}

/// The resolved configuration, with designs written in config-file syntax.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigEcho {
    pub mode: String,
    pub seed: u64,
    pub initial_design: String,
    pub n_traj: usize,
    pub inducing: String,
    pub length_scale: f64,
    pub jitter: f64,
    pub max_iterations: usize,
    pub tolerance: f64,
    pub quadrature_nodes: usize,
    pub active_iterations: usize,
    pub strategy: String,
    pub pool_size: usize,
    pub n_clusters: usize,
    pub batch_size: usize,
    pub active_n_traj: usize,
    pub eval_grid: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationInfo {
    pub index: usize,
    pub points: usize,
    pub observations: usize,
    pub fit_iterations: usize,
    pub converged: bool,
    pub elbo_trace: Vec<f64>,
}

impl Metadata {
    pub fn new(report: &RunReport, oracle: &Oracle) -> Self {
        let c = &report.config;
        Self {
            method: report.method.clone(),
            model: ModelInfo {
                species: oracle.model.species.clone(),
                parameters: oracle.model.parameters.iter().map(|p| p.name.clone()).collect(),
                bounds: report.space.bounds.clone(),
                property: oracle.property.display(&oracle.model.species).to_string(),
                t_end: oracle.t_end,
            },
            config: ConfigEcho {
                mode: c.mode.to_string(),
                seed: c.seed,
                initial_design: c.initial.to_string(),
                n_traj: c.n_traj,
                inducing: c.inducing.to_string(),
                length_scale: c.kernel.length_scale,
                jitter: c.kernel.jitter,
                max_iterations: c.fit.max_iterations,
                tolerance: c.fit.tolerance,
                quadrature_nodes: c.fit.quadrature_nodes,
                active_iterations: c.active_iterations,
                strategy: c.query.strategy.to_string(),
                pool_size: c.query.pool_size,
                n_clusters: c.query.n_clusters,
                batch_size: c.query.batch_size,
                active_n_traj: c.active_n_traj,
                eval_grid: c.eval_grid.clone(),
            },
            timings: report.timings,
            n_observations: report.n_observations(),
            n_inducing: report.posterior.num_inducing(),
            iterations: report
                .iterations
                .iter()
                .enumerate()
                .map(|(i, it)| IterationInfo {
                    index: i,
                    points: it.batch.points.len(),
                    observations: it.batch.n_observations(),
                    fit_iterations: it.fit_iterations,
                    converged: it.converged,
                    elbo_trace: it.elbo_trace.clone(),
                })
                .collect(),
        }
    }
}

pub fn read_metadata(path: &Path) -> Result<Metadata> {
    read_json(path)
}

/// Writes `surface.csv`, `surface_iter<k>.csv`, `observations.csv`,
/// `metadata.json` and `posterior.json` into `dir`.
pub fn write_report(dir: &Path, report: &RunReport, oracle: &Oracle) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::write(dir, e))?;
    write_surface_csv(&dir.join("surface.csv"), report.surface())?;
    for (i, it) in report.iterations.iter().enumerate() {
        write_surface_csv(&dir.join(format!("surface_iter{i}.csv")), &it.surface)?;
    }
    let dim = report.space.dim();
    let mut header = vec!["iteration".to_string()];
    header.extend(coord_header(dim));
    header.extend(["successes".into(), "trials".into()]);
    let rows = report.iterations.iter().enumerate().flat_map(|(i, it)| {
        it.batch.points.iter().zip(&it.batch.labels).map(move |(p, l)| {
            let mut r = vec![i.to_string()];
            r.extend(p.iter().map(f64::to_string));
            r.push(l.iter().filter(|y| **y).count().to_string());
            r.push(l.len().to_string());
            r
        })
    });
    write_rows(&dir.join("observations.csv"), header, rows)?;
    write_json(&dir.join("metadata.json"), &Metadata::new(report, oracle))?;
    save_posterior(&dir.join("posterior.json"), &report.posterior, &report.space)
}
