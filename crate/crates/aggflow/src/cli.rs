//! Command-line surface: argument parsing, config echo/reload, experiment
//! orchestration, and CSV output.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::analysis::{critical_chi_sweep, fit_exponential_rate, self_similar_reconstruct, SweepResult};
use crate::dynamics::{evolve, NumParams, RunOutcome};
use crate::error::{Error, Result};
use crate::initdata::{load_quantile_csv, InitSpec};
use crate::model::{Frame, PhysParams};
use crate::state::ParticleState;

/// Top-level command line.
#[derive(Debug, Parser)]
#[command(
    name = "aggflow",
    version,
    about = "Particle simulator for 1D aggregation-diffusion gradient flows on the quantile grid"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Cmd,
}

#[derive(Debug, Subcommand)]
pub enum Cmd {
    /// Integrate one configuration forward in time.
    Evolve(EvolveArgs),
    /// Run the fair-competition flow over a (k, chi) grid and estimate chi_c(k).
    Sweep(SweepArgs),
    /// Fit an exponential rate to a timeseries column.
    Rate(RateArgs),
    /// Map a rescaled steady snapshot to original variables at time t.
    Reconstruct(ReconstructArgs),
}

#[derive(Debug, Args)]
pub struct EvolveArgs {
    /// Diffusion exponent m (defaults to the fair-competition pairing 1 - k).
    #[arg(long, allow_hyphen_values = true)]
    pub m: Option<f64>,
    /// Interaction exponent k in (-1, 1).
    #[arg(long, allow_hyphen_values = true)]
    pub k: Option<f64>,
    /// Interaction strength chi > 0.
    #[arg(long, allow_hyphen_values = true)]
    pub chi: Option<f64>,
    /// Self-similar frame (unit quadratic confinement).
    #[arg(long)]
    pub rescaled: bool,
    /// Original variables, no confinement (the default).
    #[arg(long, conflicts_with = "rescaled")]
    pub original: bool,
    /// Particle count.
    #[arg(long)]
    pub n: Option<usize>,
    /// Time step.
    #[arg(long, allow_hyphen_values = true)]
    pub dt: Option<f64>,
    /// Run horizon.
    #[arg(long, allow_hyphen_values = true)]
    pub tmax: Option<f64>,
    /// Steady-state detection tolerance on consecutive-step distance.
    #[arg(long, allow_hyphen_values = true)]
    pub steady_tol: Option<f64>,
    /// Newton residual tolerance.
    #[arg(long, allow_hyphen_values = true)]
    pub newton_tol: Option<f64>,
    /// Time-step halvings allowed before declaring blow-up.
    #[arg(long)]
    pub max_halvings: Option<usize>,
    /// Accepted steps between recorded samples.
    #[arg(long)]
    pub snapshot_stride: Option<usize>,
    /// Initial condition: gaussian:<var> | indicator:<R> | cauchy:<lambda> | hls:<c_scale> | file:<csv>.
    #[arg(long)]
    pub init: Option<String>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Reload settings from a previous config_echo.txt; explicit flags win.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// k grid as min:max:step (inclusive) or a single value.
    #[arg(long, allow_hyphen_values = true)]
    pub k_grid: Option<String>,
    /// chi grid as min:max:step (inclusive) or a single value.
    #[arg(long, allow_hyphen_values = true)]
    pub chi_grid: Option<String>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long, allow_hyphen_values = true)]
    pub dt: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub tmax: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub steady_tol: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub newton_tol: Option<f64>,
    #[arg(long)]
    pub max_halvings: Option<usize>,
    #[arg(long)]
    pub snapshot_stride: Option<usize>,
    /// Initial condition per cell (cold starts).
    #[arg(long)]
    pub init: Option<String>,
    /// Chain each chi column across k (descending), seeding runs with the
    /// previous steady state instead of cold starts.
    #[arg(long)]
    pub warm_start: bool,
    /// Worker threads for the sweep (defaults to one per core).
    #[arg(long)]
    pub jobs: Option<usize>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Reload settings from a previous config_echo.txt; explicit flags win.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RateArgs {
    /// Input timeseries.csv.
    #[arg(long = "in")]
    pub input: Option<PathBuf>,
    /// Column to fit (default wasserstein_to_final).
    #[arg(long)]
    pub column: Option<String>,
    /// Fit window start (requires --t1; default: central 80% of positive samples).
    #[arg(long, allow_hyphen_values = true)]
    pub t0: Option<f64>,
    /// Fit window end (requires --t0).
    #[arg(long, allow_hyphen_values = true)]
    pub t1: Option<f64>,
    /// Optional output directory for rate.csv + config_echo.txt.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Reload settings from a previous config_echo.txt; explicit flags win.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReconstructArgs {
    /// Input snapshot CSV (eta,X) of a rescaled steady state.
    #[arg(long = "in")]
    pub input: Option<PathBuf>,
    /// Interaction exponent k of the run that produced the snapshot.
    #[arg(long, allow_hyphen_values = true)]
    pub k: Option<f64>,
    /// Original-variable time to reconstruct at.
    #[arg(long, allow_hyphen_values = true)]
    pub t: Option<f64>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Reload settings from a previous config_echo.txt; explicit flags win.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

/// Parses argv (tests call this in-process) and executes.
pub fn run_cli<I, T>(args: I) -> Result<()>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = Cli::try_parse_from(args).map_err(|e| Error::Parse(e.to_string()))?;
    execute(cli)
}

/// Executes a parsed command line.
pub fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Cmd::Evolve(a) => run_evolve(a),
        Cmd::Sweep(a) => run_sweep(a),
        Cmd::Rate(a) => run_rate(a),
        Cmd::Reconstruct(a) => run_reconstruct(a),
    }
}

/// Serializes a float with 17 significant digits (value-preserving).
fn fmt17(v: f64) -> String {
    format!("{v:.16e}")
}

/// Inclusive min:max:step grid, or a bare number for a single-point grid.
pub fn parse_grid(s: &str) -> Result<Vec<f64>> {
    if !s.contains(':') {
        let v: f64 = s
            .parse()
            .map_err(|e| Error::Parse(format!("bad grid value '{s}': {e}")))?;
        return Ok(vec![v]);
    }
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() != 3 {
        return Err(Error::Parse(format!(
            "grid '{s}' must be min:max:step or a single value"
        )));
    }
    let nums: Vec<f64> = parts
        .iter()
        .map(|p| {
            p.parse::<f64>()
                .map_err(|e| Error::Parse(format!("bad grid bound '{p}' in '{s}': {e}")))
        })
        .collect::<Result<_>>()?;
    let (min, max, step) = (nums[0], nums[1], nums[2]);
    if !(step.is_finite() && step > 0.0) || !min.is_finite() || !max.is_finite() || min > max {
        return Err(Error::Parse(format!(
            "grid '{s}' needs min <= max and step > 0"
        )));
    }
    let mut grid = Vec::new();
    let mut i = 0u64;
    loop {
        let v = min + i as f64 * step;
        if v > max + 1e-9 * step {
            break;
        }
        grid.push(v);
        i += 1;
    }
    Ok(grid)
}

fn load_config_map(path: &Path, expect_command: &str) -> Result<BTreeMap<String, String>> {
    let text = std::fs::read_to_string(path)?;
    let mut map = BTreeMap::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            Error::Parse(format!(
                "{}: line {}: expected key=value",
                path.display(),
                lineno + 1
            ))
        })?;
        map.insert(key.trim().to_string(), value.trim().to_string());
    }
    if let Some(cmd) = map.get("command") {
        if cmd != expect_command {
            return Err(Error::Parse(format!(
                "{} echoes a '{cmd}' run, not '{expect_command}'",
                path.display()
            )));
        }
    }
    Ok(map)
}

fn cfg_parse<T: std::str::FromStr>(map: &BTreeMap<String, String>, key: &str) -> Result<Option<T>>
where
    T::Err: std::fmt::Display,
{
    match map.get(key) {
        None => Ok(None),
        Some(raw) => raw.parse::<T>().map(Some).map_err(|e| {
            Error::Parse(format!("config key {key}='{raw}' did not parse: {e}"))
        }),
    }
}

fn require<T>(v: Option<T>, what: &str) -> Result<T> {
    v.ok_or_else(|| Error::InvalidParameter(format!("missing required setting {what}")))
}

struct NumSettings {
    np: NumParams,
}

fn resolve_numerics(
    cfg: &BTreeMap<String, String>,
    dt: Option<f64>,
    tmax: Option<f64>,
    steady_tol: Option<f64>,
    newton_tol: Option<f64>,
    max_halvings: Option<usize>,
    snapshot_stride: Option<usize>,
) -> Result<NumSettings> {
    let d = NumParams::default();
    let np = NumParams {
        dt: dt.or(cfg_parse(cfg, "dt")?).unwrap_or(d.dt),
        t_max: tmax.or(cfg_parse(cfg, "tmax")?).unwrap_or(d.t_max),
        steady_tol: steady_tol
            .or(cfg_parse(cfg, "steady_tol")?)
            .unwrap_or(d.steady_tol),
        newton_tol: newton_tol
            .or(cfg_parse(cfg, "newton_tol")?)
            .unwrap_or(d.newton_tol),
        newton_max_iter: cfg_parse(cfg, "newton_max_iter")?.unwrap_or(d.newton_max_iter),
        max_halvings: max_halvings
            .or(cfg_parse(cfg, "max_halvings")?)
            .unwrap_or(d.max_halvings),
        gap_floor: cfg_parse(cfg, "gap_floor")?.unwrap_or(d.gap_floor),
        snapshot_stride: snapshot_stride
            .or(cfg_parse(cfg, "snapshot_stride")?)
            .unwrap_or(d.snapshot_stride),
    };
    Ok(NumSettings { np })
}

fn echo_numerics(echo: &mut BTreeMap<String, String>, np: &NumParams) {
    echo.insert("dt".into(), fmt17(np.dt));
    echo.insert("tmax".into(), fmt17(np.t_max));
    echo.insert("steady_tol".into(), fmt17(np.steady_tol));
    echo.insert("newton_tol".into(), fmt17(np.newton_tol));
    echo.insert("newton_max_iter".into(), np.newton_max_iter.to_string());
    echo.insert("max_halvings".into(), np.max_halvings.to_string());
    echo.insert("gap_floor".into(), fmt17(np.gap_floor));
    echo.insert("snapshot_stride".into(), np.snapshot_stride.to_string());
}

fn write_echo(dir: &Path, echo: &BTreeMap<String, String>) -> Result<()> {
    let mut f = std::fs::File::create(dir.join("config_echo.txt"))?;
    for (k, v) in echo {
        writeln!(f, "{k}={v}")?;
    }
    Ok(())
}

fn write_snapshot(path: &Path, s: &ParticleState) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(f, "eta,X")?;
    for (eta, x) in s.eta_grid().iter().zip(s.positions()) {
        writeln!(f, "{},{}", fmt17(*eta), fmt17(*x))?;
    }
    Ok(())
}

fn write_density(path: &Path, s: &ParticleState) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(f, "x,rho")?;
    for (x, rho) in s.to_density().nodes {
        writeln!(f, "{},{}", fmt17(x), fmt17(rho))?;
    }
    Ok(())
}

fn write_timeseries(path: &Path, out: &RunOutcome) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(
        f,
        "t,energy,entropy,interaction,confinement,second_moment,com,min_gap,max_density,step_dist,wasserstein_to_final"
    )?;
    let finals = out.final_state.positions();
    let de = 1.0 / finals.len() as f64;
    for s in &out.trajectory {
        let w2: f64 = s
            .positions
            .iter()
            .zip(finals)
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        let row = [
            s.t,
            s.energy.total,
            s.energy.entropy_part,
            s.energy.interaction_part,
            s.energy.confinement_part,
            s.second_moment,
            s.com,
            s.min_gap,
            s.max_density,
            s.step_dist,
            (de * w2).sqrt(),
        ];
        let cells: Vec<String> = row.iter().map(|v| fmt17(*v)).collect();
        writeln!(f, "{}", cells.join(","))?;
    }
    Ok(())
}

fn write_sweep_csv(dir: &Path, res: &SweepResult) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(dir.join("sweep.csv"))?);
    writeln!(f, "k,chi,status,final_time,final_energy")?;
    for c in &res.grid {
        writeln!(
            f,
            "{},{},{},{},{}",
            fmt17(c.k),
            fmt17(c.chi),
            c.status,
            fmt17(c.final_time),
            fmt17(c.final_energy)
        )?;
    }
    let mut f = std::io::BufWriter::new(std::fs::File::create(dir.join("chi_c.csv"))?);
    writeln!(f, "k,chi_c,c_star_estimate")?;
    for e in &res.chi_c {
        writeln!(
            f,
            "{},{},{}",
            fmt17(e.k),
            fmt17(e.chi_c.unwrap_or(f64::NAN)),
            fmt17(e.c_star_estimate.unwrap_or(f64::NAN))
        )?;
    }
    Ok(())
}

fn run_evolve(a: EvolveArgs) -> Result<()> {
    let cfg = match &a.config {
        Some(p) => load_config_map(p, "evolve")?,
        None => BTreeMap::new(),
    };
    let k = require(a.k.or(cfg_parse(&cfg, "k")?), "--k")?;
    let m = a.m.or(cfg_parse(&cfg, "m")?).unwrap_or(1.0 - k);
    let chi = require(a.chi.or(cfg_parse(&cfg, "chi")?), "--chi")?;
    let frame = if a.rescaled {
        Frame::Rescaled
    } else if a.original {
        Frame::Original
    } else {
        match cfg.get("frame").map(String::as_str) {
            Some("rescaled") => Frame::Rescaled,
            Some("original") | None => Frame::Original,
            Some(other) => {
                return Err(Error::Parse(format!("config frame '{other}' unknown")))
            }
        }
    };
    let n = a.n.or(cfg_parse(&cfg, "n")?).unwrap_or(100);
    let nums = resolve_numerics(
        &cfg,
        a.dt,
        a.tmax,
        a.steady_tol,
        a.newton_tol,
        a.max_halvings,
        a.snapshot_stride,
    )?;
    let init: InitSpec = a
        .init
        .or(cfg.get("init").cloned())
        .unwrap_or_else(|| "gaussian:0.32".into())
        .parse()?;
    let out_dir = require(a.out.or(cfg.get("out").map(PathBuf::from)), "--out")?;

    let p = PhysParams::new(m, k, chi, frame)?;
    let s0 = init.build(n, &p)?;
    std::fs::create_dir_all(&out_dir)?;

    let outcome = evolve(&s0, &p, &nums.np)?;

    write_timeseries(&out_dir.join("timeseries.csv"), &outcome)?;
    write_snapshot(&out_dir.join("snapshot_initial.csv"), &s0)?;
    write_snapshot(&out_dir.join("snapshot_final.csv"), &outcome.final_state)?;
    write_density(&out_dir.join("density_final.csv"), &outcome.final_state)?;

    let mut echo = BTreeMap::new();
    echo.insert("command".into(), "evolve".into());
    echo.insert("m".into(), fmt17(m));
    echo.insert("k".into(), fmt17(k));
    echo.insert("chi".into(), fmt17(chi));
    echo.insert(
        "frame".into(),
        match frame {
            Frame::Original => "original".into(),
            Frame::Rescaled => "rescaled".into(),
        },
    );
    echo.insert("n".into(), n.to_string());
    echo.insert("init".into(), init.to_string());
    echo.insert("out".into(), out_dir.display().to_string());
    echo_numerics(&mut echo, &nums.np);
    echo.insert("seedless".into(), "true".into());
    // Run status is a result, not a setting; the loader ignores it.
    echo.insert("status".into(), outcome.status.to_string());
    write_echo(&out_dir, &echo)?;

    println!(
        "status={} final_time={} samples={} halvings={}",
        outcome.status,
        outcome.final_state.time(),
        outcome.trajectory.len(),
        outcome.halvings
    );
    Ok(())
}

fn run_sweep(a: SweepArgs) -> Result<()> {
    let cfg = match &a.config {
        Some(p) => load_config_map(p, "sweep")?,
        None => BTreeMap::new(),
    };
    let k_grid_s = require(a.k_grid.or(cfg.get("k_grid").cloned()), "--k-grid")?;
    let chi_grid_s = require(a.chi_grid.or(cfg.get("chi_grid").cloned()), "--chi-grid")?;
    let k_grid = parse_grid(&k_grid_s)?;
    let chi_grid = parse_grid(&chi_grid_s)?;
    let n = a.n.or(cfg_parse(&cfg, "n")?).unwrap_or(100);
    let nums = resolve_numerics(
        &cfg,
        a.dt,
        a.tmax,
        a.steady_tol,
        a.newton_tol,
        a.max_halvings,
        a.snapshot_stride,
    )?;
    let init: InitSpec = a
        .init
        .or(cfg.get("init").cloned())
        .unwrap_or_else(|| "gaussian:0.32".into())
        .parse()?;
    let warm = a.warm_start || cfg.get("warm_start").map(String::as_str) == Some("true");
    let jobs = match a.jobs {
        Some(j) => Some(j),
        None => cfg_parse(&cfg, "jobs")?,
    };
    let out_dir = require(a.out.or(cfg.get("out").map(PathBuf::from)), "--out")?;

    let res = match jobs {
        None => critical_chi_sweep(&k_grid, &chi_grid, n, &nums.np, &init, warm)?,
        Some(j) => {
            if j == 0 {
                return Err(Error::InvalidParameter("--jobs must be >= 1".into()));
            }
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(j)
                .build()
                .map_err(|e| Error::InvalidParameter(format!("--jobs: {e}")))?;
            pool.install(|| critical_chi_sweep(&k_grid, &chi_grid, n, &nums.np, &init, warm))?
        }
    };

    std::fs::create_dir_all(&out_dir)?;
    write_sweep_csv(&out_dir, &res)?;

    let mut echo = BTreeMap::new();
    echo.insert("command".into(), "sweep".into());
    echo.insert("k_grid".into(), k_grid_s.clone());
    echo.insert("chi_grid".into(), chi_grid_s.clone());
    echo.insert("n".into(), n.to_string());
    echo.insert("init".into(), init.to_string());
    echo.insert("warm_start".into(), warm.to_string());
    if let Some(j) = jobs {
        echo.insert("jobs".into(), j.to_string());
    }
    echo.insert("out".into(), out_dir.display().to_string());
    echo_numerics(&mut echo, &nums.np);
    echo.insert("seedless".into(), "true".into());
    write_echo(&out_dir, &echo)?;

    for w in &res.warnings {
        eprintln!("warning: {w}");
    }
    println!(
        "cells={} warnings={} out={}",
        res.grid.len(),
        res.warnings.len(),
        out_dir.display()
    );
    Ok(())
}

/// Reads (t, column) pairs out of a timeseries CSV.
fn read_series(path: &Path, column: &str) -> Result<Vec<(f64, f64)>> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Parse(format!("empty file {}", path.display())))?;
    let names: Vec<&str> = header.split(',').collect();
    let t_idx = names
        .iter()
        .position(|h| *h == "t")
        .ok_or_else(|| Error::Parse("timeseries has no 't' column".into()))?;
    let c_idx = names.iter().position(|h| *h == column).ok_or_else(|| {
        Error::Parse(format!(
            "column '{column}' not found; available: {}",
            names.join(", ")
        ))
    })?;
    let mut series = Vec::new();
    for (lineno, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != names.len() {
            return Err(Error::Parse(format!(
                "{}: line {}: expected {} cells",
                path.display(),
                lineno + 2,
                names.len()
            )));
        }
        let parse = |i: usize| -> Result<f64> {
            cells[i].parse().map_err(|e| {
                Error::Parse(format!("{}: line {}: {e}", path.display(), lineno + 2))
            })
        };
        series.push((parse(t_idx)?, parse(c_idx)?));
    }
    Ok(series)
}

fn run_rate(a: RateArgs) -> Result<()> {
    let cfg = match &a.config {
        Some(p) => load_config_map(p, "rate")?,
        None => BTreeMap::new(),
    };
    let input = require(a.input.or(cfg.get("in").map(PathBuf::from)), "--in")?;
    let column = a
        .column
        .or(cfg.get("column").cloned())
        .unwrap_or_else(|| "wasserstein_to_final".into());
    let t0 = a.t0.or(cfg_parse(&cfg, "t0")?);
    let t1 = a.t1.or(cfg_parse(&cfg, "t1")?);
    let window = match (t0, t1) {
        (Some(a), Some(b)) => Some((a, b)),
        (None, None) => None,
        _ => {
            return Err(Error::InvalidParameter(
                "--t0 and --t1 must be given together".into(),
            ))
        }
    };

    let series = read_series(&input, &column)?;
    let fit = fit_exponential_rate(&series, window)?;
    let record = [fit.slope, fit.intercept, fit.t0, fit.t1, fit.residual]
        .iter()
        .map(|v| fmt17(*v))
        .collect::<Vec<_>>()
        .join(",");
    println!("{record}");

    if let Some(out_dir) = &a.out {
        std::fs::create_dir_all(out_dir)?;
        let mut f = std::fs::File::create(out_dir.join("rate.csv"))?;
        writeln!(f, "slope,intercept,t0,t1,residual")?;
        writeln!(f, "{record}")?;
        let mut echo = BTreeMap::new();
        echo.insert("command".into(), "rate".into());
        echo.insert("in".into(), input.display().to_string());
        echo.insert("column".into(), column);
        if let Some((w0, w1)) = window {
            echo.insert("t0".into(), fmt17(w0));
            echo.insert("t1".into(), fmt17(w1));
        }
        echo.insert("out".into(), out_dir.display().to_string());
        echo.insert("seedless".into(), "true".into());
        write_echo(out_dir, &echo)?;
    }
    Ok(())
}

fn run_reconstruct(a: ReconstructArgs) -> Result<()> {
    let cfg = match &a.config {
        Some(p) => load_config_map(p, "reconstruct")?,
        None => BTreeMap::new(),
    };
    let input = require(a.input.or(cfg.get("in").map(PathBuf::from)), "--in")?;
    let k = require(a.k.or(cfg_parse(&cfg, "k")?), "--k")?;
    let t = require(a.t.or(cfg_parse(&cfg, "t")?), "--t")?;
    let out_dir = require(a.out.or(cfg.get("out").map(PathBuf::from)), "--out")?;

    let u = load_quantile_csv(&input)?;
    let rec = self_similar_reconstruct(&u, k, t)?;
    std::fs::create_dir_all(&out_dir)?;
    write_snapshot(&out_dir.join("snapshot_reconstructed.csv"), &rec)?;
    write_density(&out_dir.join("density_reconstructed.csv"), &rec)?;

    let mut echo = BTreeMap::new();
    echo.insert("command".into(), "reconstruct".into());
    echo.insert("in".into(), input.display().to_string());
    echo.insert("k".into(), fmt17(k));
    echo.insert("t".into(), fmt17(t));
    echo.insert("out".into(), out_dir.display().to_string());
    echo.insert("seedless".into(), "true".into());
    write_echo(&out_dir, &echo)?;
    println!("reconstructed n={} at t={}", rec.n(), t);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn grid_parsing() {
        let g = parse_grid("0.8:1.2:0.02").unwrap();
        assert_eq!(g.len(), 21);
        assert_eq!(g[0], 0.8);
        assert_relative_eq!(g[20], 1.2, max_relative = 1e-12);

        let g = parse_grid("-0.99:0:0.01").unwrap();
        assert_eq!(g.len(), 100);
        assert_eq!(g[0], -0.99);
        assert!(g[99].abs() < 1e-12);

        assert_eq!(parse_grid("0.5").unwrap(), vec![0.5]);
        assert!(parse_grid("1:0:0.1").is_err());
        assert!(parse_grid("0:1:0").is_err());
        assert!(parse_grid("a:b:c").is_err());
        assert!(parse_grid("1:2").is_err());
    }

    #[test]
    fn float_echo_round_trips() {
        for v in [0.1, 1.0 / 3.0, 1e-10, 12345.6789, -0.99] {
            let s = fmt17(v);
            let back: f64 = s.parse().unwrap();
            assert_eq!(back, v);
        }
        assert_eq!(fmt17(f64::NAN), "NaN");
    }

    #[test]
    fn unknown_flags_and_missing_settings_error() {
        assert!(run_cli(["aggflow", "evolve", "--bogus", "1"]).is_err());
        // Missing --k.
        assert!(run_cli(["aggflow", "evolve", "--chi", "0.5", "--out", "/tmp/x"]).is_err());
    }
}
