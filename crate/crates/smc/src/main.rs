use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use smc::compare::{compare_report, format_csv, format_table, NamedRun};
use smc::config::{load_oracle, load_oracle_with_formula, ConfigFile, Mode};
use smc::error::{Error, Result};
use smc::io::{read_baseline_csv, read_metadata, read_surface_csv, write_baseline_csv, write_report, write_trajectory_csv};
use smc::simulation::{naive_baseline, trajectories};
use smc_core::design::parse_grid_dims;
use smc_core::{parse_model, Strategy};

/// Smoothed statistical model checking of chemical reaction networks.
#[derive(Parser)]
#[command(name = "smc", version)]
struct Cli {
    /// Worker threads for simulation (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate trajectories at one parameter point and dump them as CSV.
    Simulate(SimulateArgs),
    /// Monte-Carlo estimate of the satisfaction probability on a grid.
    Baseline(BaselineArgs),
    /// Fit a satisfaction-probability surface (dense, sparse or active).
    Smc(SmcArgs),
    /// Compare report surfaces against a baseline.
    Compare(CompareArgs),
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    model: PathBuf,
    /// Comma-separated parameter values, in declaration order.
    #[arg(long)]
    point: String,
    #[arg(long)]
    t_end: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1)]
    traj: usize,
    /// Output file; with several trajectories `_<j>` is appended to the stem.
    #[arg(long, default_value = "trajectory.csv")]
    out: PathBuf,
}

#[derive(Args)]
struct BaselineArgs {
    /// Experiment config supplying model, property, horizon and grid.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    model: Option<PathBuf>,
    /// File holding the property.
    #[arg(long, conflicts_with = "formula")]
    property: Option<PathBuf>,
    /// Property given inline.
    #[arg(long)]
    formula: Option<String>,
    #[arg(long)]
    t_end: Option<f64>,
    /// Grid size such as `20x20`.
    #[arg(long)]
    grid: Option<String>,
    #[arg(long)]
    runs: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value = "baseline.csv")]
    out: PathBuf,
}

#[derive(Args)]
struct SmcArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long, value_enum)]
    mode: Option<Mode>,
    /// Query strategy: variance, gradient or random.
    #[arg(long)]
    query: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    length_scale: Option<f64>,
    #[arg(long, default_value = "report")]
    out: PathBuf,
}

#[derive(Args)]
struct CompareArgs {
    /// Baseline CSV (`x1,x2,estimate`).
    #[arg(long)]
    baseline: PathBuf,
    /// Keep only points whose baseline estimate exceeds this.
    #[arg(long, default_value_t = 0.02)]
    threshold: f64,
    /// Also write the table as CSV.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Report directories written by `smc smc`.
    #[arg(required = true)]
    reports: Vec<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads must be positive");
            return ExitCode::from(2);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(3);
        }
    }
    let result = match cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Baseline(a) => baseline(a),
        Command::Smc(a) => smc_run(a),
        Command::Compare(a) => compare(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn grid(spec: &str) -> Result<Vec<usize>> {
    parse_grid_dims(spec).map_err(|_| Error::Config(format!("bad grid `{spec}`")))
}

fn numbered(path: &Path, j: usize) -> PathBuf {
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("trajectory");
    let name = match path.extension().and_then(|e| e.to_str()) {
        Some(ext) => format!("{stem}_{j}.{ext}"),
        None => format!("{stem}_{j}"),
    };
    path.with_file_name(name)
}

fn simulate(a: SimulateArgs) -> Result<()> {
    let text = smc::config::read_text(&a.model)?;
    let model = parse_model(&text).map_err(|e| Error::Parse(format!("{}: {e}", a.model.display())))?;
    let values: Vec<f64> = a
        .point
        .split(',')
        .map(|v| v.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| Error::Config(format!("bad point `{}`", a.point)))?;
    if !(a.t_end > 0.0) || a.traj == 0 {
        return Err(Error::Config("--t-end and --traj must be positive".into()));
    }
    // a property that always holds; only the trajectories are needed
    let oracle = smc_core::Oracle::new(
        model.clone(),
        smc_core::Property::Atom {
            species: 0,
            op: smc_core::property::Comparison::Ge,
            value: 0,
        },
        a.t_end,
    )
    .map_err(|e| Error::Config(e.to_string()))?;
    let trajs = trajectories(&oracle, &values, a.traj, a.seed)?;
    for (j, t) in trajs.iter().enumerate() {
        let path = if a.traj == 1 { a.out.clone() } else { numbered(&a.out, j) };
        write_trajectory_csv(&path, &model.species, t)?;
        println!("{}", path.display());
    }
    Ok(())
}

fn baseline(a: BaselineArgs) -> Result<()> {
    let cfg = a.config.as_deref().map(ConfigFile::load).transpose()?;
    let missing = |what: &str| Error::Config(format!("--{what} is required without --config"));
    let model = a
        .model
        .or_else(|| cfg.as_ref().map(|c| c.model.path.clone()))
        .ok_or_else(|| missing("model"))?;
    let t_end = a
        .t_end
        .or_else(|| cfg.as_ref().map(|c| c.model.t_end))
        .ok_or_else(|| missing("t-end"))?;
    let oracle = match (a.formula, a.property) {
        (Some(f), _) => load_oracle_with_formula(&model, &f, t_end)?,
        (None, Some(p)) => load_oracle(&model, &p, t_end)?,
        (None, None) => {
            let p = cfg
                .as_ref()
                .map(|c| c.model.property.clone())
                .ok_or_else(|| missing("property"))?;
            load_oracle(&model, &p, t_end)?
        }
    };
    let dims = match (&a.grid, &cfg) {
        (Some(g), _) => grid(g)?,
        (None, Some(c)) => c.baseline_grid()?,
        (None, None) => vec![20; oracle.space().dim()],
    };
    let runs = a
        .runs
        .or_else(|| cfg.as_ref().map(|c| c.baseline.runs))
        .unwrap_or(2000);
    if runs == 0 {
        return Err(Error::Config("--runs must be positive".into()));
    }
    let seed = a.seed.or_else(|| cfg.as_ref().map(|c| c.run.seed)).unwrap_or(0);
    let b = naive_baseline(&oracle, &dims, runs, seed)?;
    write_baseline_csv(&a.out, &b)?;
    println!("{} points -> {}", b.points.len(), a.out.display());
    Ok(())
}

fn smc_run(a: SmcArgs) -> Result<()> {
    let file = ConfigFile::load(&a.config)?;
    let oracle = file.oracle()?;
    let mut cfg = file.experiment()?;
    if let Some(m) = a.mode {
        cfg.mode = m;
    }
    if let Some(q) = &a.query {
        cfg.query.strategy = q
            .parse::<Strategy>()
            .map_err(|e| Error::Config(e.to_string()))?;
    }
    if let Some(s) = a.seed {
        cfg.seed = s;
        cfg.fit.seed = s;
        cfg.query.seed = s;
    }
    if let Some(l) = a.length_scale {
        cfg.kernel = smc_core::KernelParams::new(l, cfg.kernel.jitter)
            .map_err(|e| Error::Config(e.to_string()))?;
    }
    let report = smc::run(&oracle, &cfg)?;
    write_report(&a.out, &report, &oracle)?;
    let t = report.timings;
    println!(
        "{}: {} observations, {} inducing points, total {:.2}s (ssa {:.2}s, inference {:.2}s, query {:.2}s) -> {}",
        report.method,
        report.n_observations(),
        report.posterior.num_inducing(),
        t.total,
        t.simulation,
        t.inference,
        t.query,
        a.out.display()
    );
    Ok(())
}

fn compare(a: CompareArgs) -> Result<()> {
    let baseline = read_baseline_csv(&a.baseline)?;
    let runs = a
        .reports
        .iter()
        .map(|dir| {
            let meta = read_metadata(&dir.join("metadata.json"))?;
            Ok(NamedRun {
                name: meta.method,
                surface: read_surface_csv(&dir.join("surface.csv"))?,
                timings: meta.timings,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let rows = compare_report(&runs, &baseline, a.threshold)?;
    print!("{}", format_table(&rows));
    if let Some(out) = &a.out {
        std::fs::write(out, format_csv(&rows)?).map_err(|e| Error::Runtime(format!("{}: {e}", out.display())))?;
    }
    Ok(())
}
