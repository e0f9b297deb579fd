//! Experiment drivers: critical-chi phase sweeps, exponential rate fits,
//! and self-similar reconstruction from rescaled steady states.

use rayon::prelude::*;

use crate::dynamics::{evolve, NumParams, RunStatus};
use crate::error::{Error, Result};
use crate::initdata::InitSpec;
use crate::model::{Frame, PhysParams};
use crate::state::ParticleState;

/// One grid cell of a sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepCell {
    pub k: f64,
    pub chi: f64,
    pub status: RunStatus,
    pub final_time: f64,
    pub final_energy: f64,
}

/// Per-k critical strength estimate: largest chi on the grid that reached a
/// steady state (Timeout rows are ignored), and its reciprocal as the optimal
/// constant estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct ChiCEstimate {
    pub k: f64,
    pub chi_c: Option<f64>,
    pub c_star_estimate: Option<f64>,
}

/// Full sweep output: rows sorted by (k, chi), per-k estimates, and warning
/// records for monotonicity violations.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub grid: Vec<SweepCell>,
    pub chi_c: Vec<ChiCEstimate>,
    pub warnings: Vec<String>,
}

/// Exponential fit log y = slope * t + intercept over [t0, t1].
#[derive(Debug, Clone, PartialEq)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    pub t0: f64,
    pub t1: f64,
    /// Root-mean-square residual of the linear fit in log space.
    pub residual: f64,
}

/// Least-squares line through (t, log y). With an explicit window, every
/// sample inside must have y > 0; without one, the fit uses the central 80%
/// (by index) of the positive samples, which keeps the terminal
/// distance-to-final zeros out of the window. At least 5 samples either way.
pub fn fit_exponential_rate(
    series: &[(f64, f64)],
    window: Option<(f64, f64)>,
) -> Result<RateFit> {
    let (pts, t0, t1) = match window {
        Some((t0, t1)) => {
            if !(t0.is_finite() && t1.is_finite() && t0 < t1) {
                return Err(Error::FitRejected(format!(
                    "window must satisfy t0 < t1, got [{t0}, {t1}]"
                )));
            }
            let pts: Vec<(f64, f64)> = series
                .iter()
                .copied()
                .filter(|&(t, _)| t >= t0 && t <= t1)
                .collect();
            if let Some(&(t, y)) = pts.iter().find(|&&(_, y)| !(y.is_finite() && y > 0.0)) {
                return Err(Error::FitRejected(format!(
                    "nonpositive value y = {y} at t = {t} inside the fit window"
                )));
            }
            (pts, t0, t1)
        }
        None => {
            let positive: Vec<(f64, f64)> = series
                .iter()
                .copied()
                .filter(|&(t, y)| t.is_finite() && y.is_finite() && y > 0.0)
                .collect();
            let drop = positive.len() / 10;
            let pts: Vec<(f64, f64)> =
                positive[drop..positive.len().saturating_sub(drop)].to_vec();
            match (pts.first(), pts.last()) {
                (Some(&(a, _)), Some(&(b, _))) => (pts.clone(), a, b),
                _ => (pts, 0.0, 0.0),
            }
        }
    };
    if pts.len() < 5 {
        return Err(Error::FitRejected(format!(
            "need at least 5 samples in the window, got {}",
            pts.len()
        )));
    }

    let n = pts.len() as f64;
    let tbar = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let zs: Vec<(f64, f64)> = pts.iter().map(|&(t, y)| (t, y.ln())).collect();
    let zbar = zs.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = zs.iter().map(|&(t, _)| (t - tbar) * (t - tbar)).sum();
    if sxx == 0.0 {
        return Err(Error::FitRejected("all samples share one time value".into()));
    }
    let sxz: f64 = zs.iter().map(|&(t, z)| (t - tbar) * (z - zbar)).sum();
    let slope = sxz / sxx;
    let intercept = zbar - slope * tbar;
    let ss: f64 = zs
        .iter()
        .map(|&(t, z)| {
            let r = z - (slope * t + intercept);
            r * r
        })
        .sum();
    Ok(RateFit {
        slope,
        intercept,
        t0,
        t1,
        residual: (ss / n).sqrt(),
    })
}

/// Maps a rescaled steady profile u back to original variables at time t:
/// positions scale by ((2-k) t + 1)^(1/(2-k)).
pub fn self_similar_reconstruct(u: &ParticleState, k: f64, t: f64) -> Result<ParticleState> {
    if !(k.is_finite() && k > -1.0 && k < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "interaction exponent k must lie in (-1, 1), got {k}"
        )));
    }
    if !(t.is_finite() && t >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "reconstruction time must be nonnegative, got {t}"
        )));
    }
    let factor = ((2.0 - k) * t + 1.0).powf(1.0 / (2.0 - k));
    ParticleState::with_time(u.positions().iter().map(|x| x * factor).collect(), t)
}

fn validate_grid(name: &str, grid: &[f64], check: impl Fn(f64) -> bool) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::InvalidParameter(format!("{name} grid is empty")));
    }
    if grid.iter().any(|v| !v.is_finite() || !check(*v)) {
        return Err(Error::InvalidParameter(format!(
            "{name} grid leaves the admissible domain"
        )));
    }
    if grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidParameter(format!(
            "{name} grid must be strictly ascending"
        )));
    }
    Ok(())
}

fn sweep_cell(
    k: f64,
    chi: f64,
    n: usize,
    np: &NumParams,
    init: &InitSpec,
    start: Option<&ParticleState>,
) -> Result<(SweepCell, Option<ParticleState>)> {
    let p = PhysParams::new(1.0 - k, k, chi, Frame::Rescaled)?;
    let s0 = match start {
        Some(s) => s.clone(),
        None => init.build(n, &p)?,
    };
    // Bound memory: sweeps only need the first and last trajectory points.
    let np_cell = NumParams {
        snapshot_stride: usize::MAX,
        ..*np
    };
    let out = evolve(&s0, &p, &np_cell)?;
    let cell = SweepCell {
        k,
        chi,
        status: out.status,
        final_time: out.final_state.time(),
        final_energy: out.trajectory.last().map(|s| s.energy.total).unwrap_or(f64::NAN),
    };
    let carry = (out.status == RunStatus::Steady).then_some(out.final_state);
    Ok((cell, carry))
}

/// Runs the fair-competition flow (m = 1 - k, rescaled frame) on every
/// (k, chi) grid point and extracts chi_c(k) = largest Steady chi. Cold
/// starts build the configured init per cell; warm starts chain each chi
/// column across k in descending order, seeding each run with the previous
/// steady state. Cells run in parallel; results are deterministic and sorted.
pub fn critical_chi_sweep(
    k_grid: &[f64],
    chi_grid: &[f64],
    n: usize,
    np: &NumParams,
    init: &InitSpec,
    warm_start: bool,
) -> Result<SweepResult> {
    validate_grid("k", k_grid, |k| k > -1.0 && k < 1.0)?;
    validate_grid("chi", chi_grid, |c| c > 0.0)?;
    np.validate()?;

    let mut grid: Vec<SweepCell> = if warm_start {
        // One chain per chi, walking k from high to low.
        let chains: Result<Vec<Vec<SweepCell>>> = chi_grid
            .par_iter()
            .map(|&chi| {
                let mut cells = Vec::with_capacity(k_grid.len());
                let mut carry: Option<ParticleState> = None;
                for &k in k_grid.iter().rev() {
                    let (cell, next) = sweep_cell(k, chi, n, np, init, carry.as_ref())?;
                    cells.push(cell);
                    carry = next;
                }
                Ok(cells)
            })
            .collect();
        chains?.into_iter().flatten().collect()
    } else {
        let cells: Vec<(f64, f64)> = k_grid
            .iter()
            .flat_map(|&k| chi_grid.iter().map(move |&chi| (k, chi)))
            .collect();
        let run: Result<Vec<SweepCell>> = cells
            .par_iter()
            .map(|&(k, chi)| sweep_cell(k, chi, n, np, init, None).map(|(c, _)| c))
            .collect();
        run?
    };

    grid.sort_by(|a, b| {
        (a.k, a.chi)
            .partial_cmp(&(b.k, b.chi))
            .expect("finite sweep coordinates")
    });

    let mut chi_c = Vec::with_capacity(k_grid.len());
    let mut warnings = Vec::new();
    for &k in k_grid {
        let rows: Vec<&SweepCell> = grid.iter().filter(|c| c.k == k).collect();
        let best = rows
            .iter()
            .filter(|c| c.status == RunStatus::Steady)
            .map(|c| c.chi)
            .fold(None, |acc: Option<f64>, chi| Some(acc.map_or(chi, |a| a.max(chi))));
        if let Some(cc) = best {
            if let Some(bad) = rows
                .iter()
                .find(|c| c.status == RunStatus::BlowUp && c.chi < cc)
            {
                warnings.push(format!(
                    "monotonicity violation at k = {k}: BlowUp at chi = {} below Steady chi = {cc}",
                    bad.chi
                ));
            }
        }
        chi_c.push(ChiCEstimate {
            k,
            chi_c: best,
            c_star_estimate: best.map(|c| 1.0 / c),
        });
    }

    // chi_c should not decrease with k; allow one grid cell of slack.
    let cell_width = chi_grid
        .windows(2)
        .map(|w| w[1] - w[0])
        .fold(0.0, f64::max);
    for w in chi_c.windows(2) {
        if let (Some(a), Some(b)) = (w[0].chi_c, w[1].chi_c) {
            if b < a - cell_width - 1e-12 {
                warnings.push(format!(
                    "chi_c decreases from {a} at k = {} to {b} at k = {}",
                    w[0].k, w[1].k
                ));
            }
        }
    }

    Ok(SweepResult {
        grid,
        chi_c,
        warnings,
    })
}
