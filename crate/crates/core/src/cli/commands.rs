//! The `filter`, `simulate`, `variogram` and `validate` commands.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use crate::chebfilter::{apply_matrix_function, matrix_polynomial_consistency, DegreePolicy};
use crate::cli::config::{GridConfig, JobConfig};
use crate::cli::grid::{read_grid, write_grid, GridHeader};
use crate::error::{invalid, Error, Result};
use crate::krige::{self, standard_normals, ApproxSettings, ComponentKind, ComponentModel, FilterOutcome, FilterProblem, SolverSettings};
use crate::mesh::{triangulate_grid, Grid, TriMesh};
use crate::oracle::{self, ORACLE_MAX_N};
use crate::scalar::relative_error;
use crate::variogram::{experimental_variogram, Direction, DEFAULT_HALF_WIDTH_DEG};

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_NOT_CONVERGED: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "geofilter", version, about = "Matrix-free geostatistical filtering of gridded data")]
pub struct Cli {
    /// Worker threads for sparse products (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Extract the signal component of a raster by factorial kriging.
    Filter(FilterArgs),
    /// Simulate the configured components and their sum.
    Simulate(SimulateArgs),
    /// Experimental semi-variogram of a raster as CSV.
    Variogram(VariogramArgs),
    /// Compare the matrix-free operators with dense references on a small grid.
    Validate(ValidateArgs),
}

#[derive(Debug, Args)]
pub struct FilterArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub output: PathBuf,
    /// Also write `input − estimate`.
    #[arg(long)]
    pub noise_output: Option<PathBuf>,
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub degree: Option<usize>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub output_prefix: PathBuf,
    /// Defaults to the config's `seed`.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct VariogramArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// `a,b,c` or `start:stop:step`.
    #[arg(long)]
    pub lags: String,
    /// Distance tolerance; half the lag spacing by default.
    #[arg(long)]
    pub eps: Option<f64>,
    /// `θ` or `θ,δ` in degrees (δ defaults to 22.5).
    #[arg(long, allow_hyphen_values = true)]
    pub direction: Option<String>,
    #[arg(long)]
    pub max_pairs: Option<usize>,
    #[arg(long)]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Nodes per axis of the validation grid.
    #[arg(long, default_value_t = 10)]
    pub size: usize,
}

/// Runs a parsed command line and returns the process exit code.
pub fn run(cli: Cli) -> Result<i32> {
    let go = || match cli.command {
        Command::Filter(a) => cmd_filter(&a, &mut std::io::stdout()),
        Command::Simulate(a) => cmd_simulate(&a),
        Command::Variogram(a) => cmd_variogram(&a),
        Command::Validate(a) => cmd_validate(&a, &mut std::io::stdout()),
    };
    match cli.threads {
        Some(t) => {
            if t == 0 {
                return Err(invalid("--threads must be at least 1"));
            }
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(t)
                .build()
                .map_err(|e| invalid(format!("cannot start thread pool: {e}")))?;
            pool.install(go)
        }
        None => go(),
    }
}

/// Assembled components of a job, ready to filter or simulate.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub grid: Grid<f64>,
    pub mesh: Option<TriMesh<f64>>,
    pub names: Vec<String>,
    pub signal: ComponentModel<f64>,
    pub noises: Vec<ComponentModel<f64>>,
    pub solver: SolverSettings,
}

impl Prepared {
    pub fn components(&self) -> impl Iterator<Item = (&String, &ComponentModel<f64>)> {
        self.names.iter().zip(std::iter::once(&self.signal).chain(&self.noises))
    }

    /// Chebyshev degree of `g` per FEM component.
    pub fn degrees(&self) -> Value {
        let mut m = serde_json::Map::new();
        for (name, c) in self.components() {
            if let Some(g) = c.g_approx() {
                m.insert(name.clone(), json!(g.degree()));
            }
        }
        Value::Object(m)
    }

    pub fn fit_errors(&self) -> Value {
        let mut m = serde_json::Map::new();
        for (name, c) in self.components() {
            if let Some(g) = c.g_approx() {
                m.insert(name.clone(), json!(g.fit_error()));
            }
        }
        Value::Object(m)
    }

    pub fn problem<'a>(&'a self, data: &'a [f64]) -> Result<FilterProblem<'a, f64>> {
        FilterProblem::new(data, &self.signal, &self.noises, self.solver)
    }
}

/// Builds the job's components on a `grid` (the config grid, or a smaller
/// validation grid onto which raster anisotropy is resampled).
pub fn prepare(cfg: &JobConfig, base: &Path, grid: GridConfig, degree: Option<usize>, with_sqrt: bool) -> Result<Prepared> {
    let g = Grid::new(grid.nx, grid.ny, grid.dx, grid.dy)?;
    let needs_mesh = cfg.components().any(|(_, c)| c.anisotropy.is_some());
    let mesh = if needs_mesh { Some(triangulate_grid(grid.nx, grid.ny, grid.dx, grid.dy)?) } else { None };
    let settings = ApproxSettings {
        degree: match degree.or(cfg.solver.degree) {
            Some(k) => DegreePolicy::Fixed(k),
            None => DegreePolicy::Auto,
        },
        interval_end: cfg.solver.interval_end,
        with_sqrt,
    };
    let mut names = Vec::new();
    let mut built = Vec::new();
    for (name, c) in cfg.components() {
        let model = c.model.to_model()?;
        let comp = match (&c.anisotropy, &mesh) {
            (Some(a), Some(m)) => {
                let field = a.to_field(m, &cfg.grid, base)?;
                ComponentModel::build(m, model, field, &settings)?
            }
            _ => ComponentModel::nugget(model.sill())?,
        };
        names.push(name);
        built.push(comp);
    }
    let signal = built.remove(0);
    Ok(Prepared {
        grid: g,
        mesh,
        names,
        signal,
        noises: built,
        solver: SolverSettings {
            tol: cfg.solver.tol.unwrap_or(krige::DEFAULT_TOL),
            max_iter: cfg.solver.max_iter,
            jitter: cfg.solver.jitter,
        },
    })
}

fn check_dims(header: &GridHeader, grid: &GridConfig, what: &str) -> Result<()> {
    if header.nx != grid.nx || header.ny != grid.ny {
        return Err(invalid(format!(
            "{what} is {}x{} but the config grid is {}x{}",
            header.nx, header.ny, grid.nx, grid.ny
        )));
    }
    Ok(())
}

fn header_of(grid: &GridConfig) -> GridHeader {
    GridHeader { nx: grid.nx, ny: grid.ny, dx: grid.dx, dy: grid.dy }
}

pub fn cmd_filter(args: &FilterArgs, out: &mut dyn Write) -> Result<i32> {
    let start = Instant::now();
    let (mut cfg, base) = JobConfig::load(&args.config)?;
    if let Some(t) = args.tol {
        if !(t > 0.0) {
            return Err(invalid(format!("--tol must be positive, got {t}")));
        }
        cfg.solver.tol = Some(t);
    }
    let (header, data) = read_grid(&args.input)?;
    check_dims(&header, &cfg.grid, "input raster")?;
    let prepared = prepare(&cfg, &base, cfg.grid, args.degree, false)?;
    let outcome = krige::solve(&prepared.problem(&data)?)?;
    write_grid(&args.output, &header, &outcome.estimate)?;
    if let Some(p) = &args.noise_output {
        let residual: Vec<f64> = data.iter().zip(&outcome.estimate).map(|(z, s)| z - s).collect();
        write_grid(p, &header, &residual)?;
    }
    let report = filter_report(&prepared, &outcome, start.elapsed().as_secs_f64());
    writeln!(out, "{report}")?;
    Ok(if outcome.converged { EXIT_OK } else { EXIT_NOT_CONVERGED })
}

pub fn filter_report(prepared: &Prepared, outcome: &FilterOutcome<f64>, wall_time_s: f64) -> Value {
    json!({
        "command": "filter",
        "converged": outcome.converged,
        "iterations": outcome.iterations,
        "relative_residual": outcome.relative_residual,
        "degrees": prepared.degrees(),
        "fit_errors": prepared.fit_errors(),
        "jitter": outcome.jitter,
        "n": prepared.grid.len(),
        "wall_time_s": wall_time_s,
    })
}

pub fn cmd_simulate(args: &SimulateArgs) -> Result<i32> {
    let (cfg, base) = JobConfig::load(&args.config)?;
    let seed = args
        .seed
        .or(cfg.seed)
        .ok_or_else(|| Error::Config("simulation needs a seed (--seed or config 'seed')".into()))?;
    let prepared = prepare(&cfg, &base, cfg.grid, None, true)?;
    let n = prepared.grid.len();
    let syn = krige::synthesize(&prepared.signal, &prepared.noises, n, seed)?;
    let header = header_of(&cfg.grid);
    let prefix = args.output_prefix.to_string_lossy().into_owned();
    write_grid(format!("{prefix}.truth.grd"), &header, &syn.truth)?;
    for (k, f) in syn.noises.iter().enumerate() {
        write_grid(format!("{prefix}.noise-{}.grd", k + 1), &header, f)?;
    }
    write_grid(format!("{prefix}.noisy.grd"), &header, &syn.noisy)?;
    Ok(EXIT_OK)
}

/// Parses `a,b,c` or `start:stop:step` (stop included when hit).
pub fn parse_lags(spec: &str) -> Result<Vec<f64>> {
    let num = |s: &str| -> Result<f64> {
        s.trim().parse::<f64>().map_err(|_| invalid(format!("invalid number '{s}' in lag list")))
    };
    if spec.contains(':') {
        let parts: Vec<&str> = spec.split(':').collect();
        if parts.len() != 3 {
            return Err(invalid(format!("lag range '{spec}' must be start:stop:step")));
        }
        let (a, b, s) = (num(parts[0])?, num(parts[1])?, num(parts[2])?);
        if !(s > 0.0) || b < a {
            return Err(invalid(format!("lag range '{spec}' needs step > 0 and stop >= start")));
        }
        let count = ((b - a) / s + 1e-9).floor() as usize + 1;
        Ok((0..count).map(|k| a + k as f64 * s).collect())
    } else {
        spec.split(',').filter(|s| !s.trim().is_empty()).map(num).collect()
    }
}

/// Parses `θ` or `θ,δ` in degrees.
pub fn parse_direction(spec: &str) -> Result<Direction> {
    let parts: Vec<&str> = spec.split(',').collect();
    let deg = |s: &str| -> Result<f64> {
        s.trim().trim_start_matches('±').parse::<f64>().map_err(|_| invalid(format!("invalid angle '{s}'")))
    };
    let (theta, delta) = match parts.as_slice() {
        [t] => (deg(t)?, DEFAULT_HALF_WIDTH_DEG),
        [t, d] => (deg(t)?, deg(d)?),
        _ => return Err(invalid(format!("direction '{spec}' must be θ or θ,δ"))),
    };
    Direction::new(theta.to_radians(), delta.to_radians())
}

pub fn cmd_variogram(args: &VariogramArgs) -> Result<i32> {
    let (header, data) = read_grid(&args.input)?;
    let lags = parse_lags(&args.lags)?;
    let eps = match args.eps {
        Some(e) => e,
        None => {
            let spacing = lags.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min);
            if spacing.is_finite() {
                0.5 * spacing
            } else {
                0.5 * header.dx.min(header.dy)
            }
        }
    };
    let direction = args.direction.as_deref().map(parse_direction).transpose()?;
    let est = experimental_variogram(&data, &header.to_grid()?, &lags, eps, direction, args.max_pairs)?;
    std::fs::write(&args.output, est.to_csv())?;
    Ok(EXIT_OK)
}

struct Check {
    name: String,
    error: Option<f64>,
    tolerance: f64,
    message: Option<String>,
}

impl Check {
    fn pass(&self) -> bool {
        matches!(self.error, Some(e) if e <= self.tolerance)
    }

    fn from(name: String, tolerance: f64, r: Result<f64>) -> Self {
        match r {
            Ok(e) => Check { name, error: Some(e), tolerance, message: None },
            Err(e) => Check { name, error: None, tolerance, message: Some(e.to_string()) },
        }
    }

    fn to_json(&self) -> Value {
        let mut v = json!({
            "name": self.name,
            "error": self.error,
            "tolerance": self.tolerance,
            "pass": self.pass(),
        });
        if let Some(m) = &self.message {
            v["message"] = json!(m);
        }
        v
    }
}

pub const VALIDATE_MATVEC_TOL: f64 = 1e-6;
pub const VALIDATE_FILTER_TOL: f64 = 1e-6;
pub const VALIDATE_MARKOV_TOL: f64 = 1e-6;
const VALIDATE_CG_TOL: f64 = 1e-10;

pub fn cmd_validate(args: &ValidateArgs, out: &mut dyn Write) -> Result<i32> {
    let (cfg, base) = JobConfig::load(&args.config)?;
    let n = args.size * args.size;
    if n > ORACLE_MAX_N {
        return Err(Error::Size { n, limit: ORACLE_MAX_N });
    }
    if args.size < 2 {
        return Err(invalid("--size must be at least 2"));
    }
    let small = GridConfig { nx: args.size, ny: args.size, ..cfg.grid };
    let prepared = prepare(&cfg, &base, small, None, false)?;
    let mut checks = Vec::new();

    for (name, c) in prepared.components() {
        let Some(op) = c.operator() else { continue };
        let bound = oracle::stiffness_spectrum(op).map(|ev| {
            let top = *ev.last().unwrap();
            (top - op.eig_upper).max(0.0) / top.abs().max(f64::MIN_POSITIVE)
        });
        checks.push(Check::from(format!("spectral_bound:{name}"), 0.0, bound));

        let matvec = (|| -> Result<f64> {
            let dense = oracle::dense_covariance(op, c.spectral())?;
            let mut worst = 0.0f64;
            for k in 0..3 {
                let v: Vec<f64> = standard_normals(n, 1000 + k, 0);
                let a = apply_matrix_function(op, c.g_approx().expect("prepared"), &v)?;
                worst = worst.max(relative_error(&a, &dense.matvec(&v)));
            }
            Ok(worst)
        })();
        checks.push(Check::from(format!("matvec:{name}"), VALIDATE_MATVEC_TOL, matvec));

        if let Some(p0) = c.spectral().markov_polynomial() {
            let degree = c.g_approx().map_or(256, |g| g.degree());
            let markov = (|| -> Result<f64> {
                let v: Vec<f64> = standard_normals(n, 2000, 0);
                let (_, qsv) = matrix_polynomial_consistency(op, &p0, &v, degree)?;
                Ok(relative_error(&qsv, &v))
            })();
            checks.push(Check::from(format!("markov:{name}"), VALIDATE_MARKOV_TOL, markov));
        }
    }

    let filter = (|| -> Result<f64> {
        let data: Vec<f64> = standard_normals(n, 3000, 0);
        let settings = SolverSettings { tol: VALIDATE_CG_TOL, max_iter: Some(100 * n), ..prepared.solver };
        let p = FilterProblem::new(&data, &prepared.signal, &prepared.noises, settings)?;
        let mf = krige::filter(&p)?;
        let dense = oracle::dense_filter(&p)?;
        Ok(relative_error(&mf.estimate, &dense))
    })();
    checks.push(Check::from("filter".into(), VALIDATE_FILTER_TOL, filter));

    let all = checks.iter().all(Check::pass);
    let report = json!({
        "command": "validate",
        "n": n,
        "components": prepared.components().map(|(name, c)| json!({
            "name": name,
            "kind": match c.kind() { ComponentKind::Nugget => "nugget", ComponentKind::FemSpectral => "fem" },
            "degree": c.g_approx().map(|g| g.degree()),
            "interval_end": c.g_approx().map(|g| g.interval_end()),
            "eig_upper": c.operator().map(|o| o.eig_upper),
        })).collect::<Vec<_>>(),
        "checks": checks.iter().map(Check::to_json).collect::<Vec<_>>(),
        "pass": all,
    });
    writeln!(out, "{report}")?;
    Ok(if all { EXIT_OK } else { EXIT_ERROR })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lag_specs() {
        assert_eq!(parse_lags("1,2,4").unwrap(), vec![1.0, 2.0, 4.0]);
        assert_eq!(parse_lags("1:3:0.5").unwrap(), vec![1.0, 1.5, 2.0, 2.5, 3.0]);
        assert_eq!(parse_lags("0:1:0.3").unwrap().len(), 4);
        assert!(parse_lags("1:2").is_err());
        assert!(parse_lags("3:1:1").is_err());
        assert!(parse_lags("a,b").is_err());
    }

    #[test]
    fn direction_specs() {
        let d = parse_direction("90,10").unwrap();
        assert!((d.angle - std::f64::consts::FRAC_PI_2).abs() < 1e-15);
        assert!((d.half_width - 10f64.to_radians()).abs() < 1e-15);
        let d = parse_direction("45").unwrap();
        assert!((d.half_width - 22.5f64.to_radians()).abs() < 1e-15);
        assert!(parse_direction("45,±15").is_ok());
        assert!(parse_direction("1,2,3").is_err());
    }

    #[test]
    fn cli_parses() {
        let cli = Cli::try_parse_from([
            "geofilter", "filter", "--config", "c.json", "--input", "i.grd", "--output", "o.grd", "--threads", "4",
        ])
        .unwrap();
        assert_eq!(cli.threads, Some(4));
        assert!(matches!(cli.command, Command::Filter(_)));
        let cli = Cli::try_parse_from(["geofilter", "variogram", "--input", "a", "--lags", "1:5:1", "--direction", "-30,10", "--output", "x.csv"]).unwrap();
        match cli.command {
            Command::Variogram(v) => assert_eq!(v.direction.as_deref(), Some("-30,10")),
            _ => unreachable!(),
        }
    }
}
