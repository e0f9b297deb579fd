//! Implicit-Euler time integration solved by damped Newton, an explicit
//! reference stepper, and the run loop with steady/blow-up/timeout detection.

use nalgebra::DVector;

use crate::energy::{breakdown_raw, discrete_energy, gradient_raw, hessian_raw, EnergyBreakdown};
use crate::error::{Error, Result};
use crate::model::PhysParams;
use crate::state::ParticleState;

/// Integration controls.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NumParams {
    /// Initial time step.
    pub dt: f64,
    /// Run horizon.
    pub t_max: f64,
    /// Steady detection: stop when consecutive states are closer than this
    /// in the quantile L2 distance.
    pub steady_tol: f64,
    /// Newton residual tolerance (max norm).
    pub newton_tol: f64,
    /// Newton iteration cap per step.
    pub newton_max_iter: usize,
    /// How many dt halvings to allow before declaring blow-up.
    pub max_halvings: usize,
    /// Smallest admissible inter-particle gap.
    pub gap_floor: f64,
    /// Accepted steps between recorded trajectory samples.
    pub snapshot_stride: usize,
}

impl Default for NumParams {
    fn default() -> Self {
        NumParams {
            dt: 1e-3,
            t_max: 10.0,
            steady_tol: 1e-5,
            newton_tol: 1e-10,
            newton_max_iter: 50,
            max_halvings: 20,
            gap_floor: 1e-12,
            snapshot_stride: 1,
        }
    }
}

impl NumParams {
    /// All quantities positive, at least one Newton iteration, and a steady
    /// tolerance coarser than the Newton tolerance (otherwise steady detection
    /// would fire on solver noise).
    pub fn validate(&self) -> Result<()> {
        let pos = [
            ("dt", self.dt),
            ("t_max", self.t_max),
            ("steady_tol", self.steady_tol),
            ("newton_tol", self.newton_tol),
            ("gap_floor", self.gap_floor),
        ];
        for (name, v) in pos {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "{name} must be positive and finite, got {v}"
                )));
            }
        }
        if self.newton_max_iter == 0 {
            return Err(Error::InvalidParameter("newton_max_iter must be >= 1".into()));
        }
        if self.snapshot_stride == 0 {
            return Err(Error::InvalidParameter("snapshot_stride must be >= 1".into()));
        }
        if self.steady_tol <= self.newton_tol {
            return Err(Error::InvalidParameter(format!(
                "steady_tol {} must exceed newton_tol {}",
                self.steady_tol, self.newton_tol
            )));
        }
        Ok(())
    }
}

/// Why an implicit step failed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepFailure {
    /// Newton ran out of iterations or no damped step made progress.
    NewtonDiverged,
    /// The linearized system could not be solved.
    Singular,
}

/// Result of one implicit step attempt.
#[derive(Debug, Clone)]
pub enum StepResult {
    Accepted {
        state: ParticleState,
        newton_iters: usize,
    },
    Failed(StepFailure),
}

/// Terminal status of a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunStatus {
    Steady,
    BlowUp,
    Timeout,
}

impl std::fmt::Display for RunStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            RunStatus::Steady => "Steady",
            RunStatus::BlowUp => "BlowUp",
            RunStatus::Timeout => "Timeout",
        })
    }
}

/// One recorded trajectory point.
#[derive(Debug, Clone)]
pub struct Sample {
    pub t: f64,
    pub energy: EnergyBreakdown,
    pub second_moment: f64,
    pub com: f64,
    pub min_gap: f64,
    pub max_density: f64,
    /// Quantile L2 distance from the previously accepted state (0 for the
    /// initial sample).
    pub step_dist: f64,
    /// Particle positions at this sample (kept so distances to the final
    /// state can be reconstructed after the run).
    pub positions: Vec<f64>,
}

/// Full run record.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub status: RunStatus,
    pub final_state: ParticleState,
    pub trajectory: Vec<Sample>,
    /// Step size in force when the run ended (halvings are never undone).
    pub final_dt: f64,
    /// Number of dt halvings consumed.
    pub halvings: usize,
}

fn min_gap_of(x: &[f64]) -> f64 {
    x.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min)
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |a, b| a.max(b.abs()))
}

/// One backward-Euler step: solves Y - X + dt g(Y) = 0 by Newton iteration
/// with the analytic Jacobian I + dt H(Y), a dense LU solve, and step damping
/// (halved up to 30 times) that insists on strict ordering with gaps above
/// gap_floor and a decrease of the residual max norm.
pub fn implicit_step(s: &ParticleState, p: &PhysParams, np: &NumParams) -> StepResult {
    let x = s.positions();
    let n = x.len();
    let dt = np.dt;

    let residual_of = |yv: &[f64]| -> Vec<f64> {
        let g = gradient_raw(yv, p);
        (0..n).map(|i| yv[i] - x[i] + dt * g[i]).collect()
    };

    let mut y = x.to_vec();
    let mut res = residual_of(&y);
    let mut rnorm = inf_norm(&res);
    if !rnorm.is_finite() {
        return StepResult::Failed(StepFailure::NewtonDiverged);
    }

    let mut iters = 0usize;
    while rnorm > np.newton_tol {
        if iters >= np.newton_max_iter {
            return StepResult::Failed(StepFailure::NewtonDiverged);
        }
        iters += 1;

        let mut a = hessian_raw(&y, p);
        a *= dt;
        for i in 0..n {
            a[(i, i)] += 1.0;
        }
        if a.iter().any(|v| !v.is_finite()) {
            return StepResult::Failed(StepFailure::Singular);
        }
        let rhs = DVector::from_iterator(n, res.iter().map(|v| -v));
        let Some(step) = a.lu().solve(&rhs) else {
            return StepResult::Failed(StepFailure::Singular);
        };
        if step.iter().any(|v| !v.is_finite()) {
            return StepResult::Failed(StepFailure::Singular);
        }

        let mut alpha = 1.0;
        let mut improved = false;
        for _ in 0..31 {
            let cand: Vec<f64> = y
                .iter()
                .zip(step.iter())
                .map(|(yi, si)| yi + alpha * si)
                .collect();
            if min_gap_of(&cand) > np.gap_floor {
                let cres = residual_of(&cand);
                let crn = inf_norm(&cres);
                if crn.is_finite() && crn < rnorm {
                    y = cand;
                    res = cres;
                    rnorm = crn;
                    improved = true;
                    break;
                }
            }
            alpha *= 0.5;
        }
        if !improved {
            return StepResult::Failed(StepFailure::NewtonDiverged);
        }
    }

    match ParticleState::with_time(y, s.time() + dt) {
        Ok(state) => StepResult::Accepted {
            state,
            newton_iters: iters,
        },
        Err(_) => StepResult::Failed(StepFailure::NewtonDiverged),
    }
}

/// One forward-Euler step X - dt g(X); errors instead of crossing particles.
pub fn explicit_step(s: &ParticleState, p: &PhysParams, dt: f64) -> Result<ParticleState> {
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "dt must be positive and finite, got {dt}"
        )));
    }
    let g = gradient_raw(s.positions(), p);
    let y: Vec<f64> = s
        .positions()
        .iter()
        .zip(&g)
        .map(|(xi, gi)| xi - dt * gi)
        .collect();
    if y.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::OrderingViolated);
    }
    ParticleState::with_time(y, s.time() + dt)
}

fn sample_of(s: &ParticleState, e: &EnergyBreakdown, step_dist: f64) -> Sample {
    Sample {
        t: s.time(),
        energy: *e,
        second_moment: s.second_moment(),
        com: s.center_of_mass(),
        min_gap: s.min_gap(),
        max_density: s.max_density(),
        step_dist,
        positions: s.positions().to_vec(),
    }
}

/// Runs the flow from s0: accepted steps must not raise the energy (beyond
/// 1e-12 relative slack); Newton failures and energy violations both halve dt
/// (at most max_halvings times in total, after which the run is declared
/// BlowUp); the run ends Steady when an accepted step moves less than
/// steady_tol scaled by dt/dt_nominal (a convergence-speed test: at the
/// nominal dt it is exactly `step distance < steady_tol`, and after halvings
/// a step must move proportionally less, so a collapsing run crawling at a
/// halved dt is not mistaken for a steady one), BlowUp when a gap falls under
/// gap_floor or halvings run out, and Timeout at t_max.
pub fn evolve(s0: &ParticleState, p: &PhysParams, np: &NumParams) -> Result<RunOutcome> {
    np.validate()?;
    let mut dt = np.dt;
    let mut halvings = 0usize;
    let mut s = s0.clone();
    let mut energy = breakdown_raw(s.positions(), p);
    let mut trajectory = vec![sample_of(&s, &energy, 0.0)];
    let mut accepted = 0usize;
    let mut recorded_at = 0usize;
    let mut last_dist = 0.0;

    let status = loop {
        if s.min_gap() < np.gap_floor {
            break RunStatus::BlowUp;
        }
        if s.time() >= np.t_max - 1e-9 {
            break RunStatus::Timeout;
        }
        let attempt = NumParams { dt, ..*np };
        match implicit_step(&s, p, &attempt) {
            StepResult::Accepted { state, .. } => {
                let e_new = discrete_energy(&state, p);
                if e_new.total > energy.total + 1e-12 * (1.0 + energy.total.abs()) {
                    halvings += 1;
                    if halvings > np.max_halvings {
                        break RunStatus::BlowUp;
                    }
                    dt *= 0.5;
                    continue;
                }
                let dist = s.wasserstein(&state)?;
                s = state;
                energy = e_new;
                accepted += 1;
                last_dist = dist;
                if accepted % np.snapshot_stride == 0 {
                    trajectory.push(sample_of(&s, &energy, dist));
                    recorded_at = accepted;
                }
                if dist < np.steady_tol * (dt / np.dt) {
                    break RunStatus::Steady;
                }
            }
            StepResult::Failed(_) => {
                halvings += 1;
                if halvings > np.max_halvings {
                    break RunStatus::BlowUp;
                }
                dt *= 0.5;
            }
        }
    };

    if recorded_at != accepted {
        trajectory.push(sample_of(&s, &energy, last_dist));
    }
    Ok(RunOutcome {
        status,
        final_state: s,
        trajectory,
        final_dt: dt,
        halvings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Frame;
    use approx::assert_relative_eq;

    fn pm(chi: f64, frame: Frame) -> PhysParams {
        PhysParams::new(1.5, -0.5, chi, frame).unwrap()
    }

    fn critical_chi_n2() -> f64 {
        0.5f64.powf(-0.5) / 2.0
    }

    #[test]
    fn numparams_validation() {
        assert!(NumParams::default().validate().is_ok());
        assert!(NumParams { dt: 0.0, ..Default::default() }.validate().is_err());
        assert!(NumParams { steady_tol: 1e-11, ..Default::default() }
            .validate()
            .is_err());
        assert!(NumParams { snapshot_stride: 0, ..Default::default() }
            .validate()
            .is_err());
    }

    #[test]
    fn critical_pair_is_a_fixed_point() {
        let s = ParticleState::new(vec![-0.5, 0.5]).unwrap();
        let p = pm(critical_chi_n2(), Frame::Original);
        match implicit_step(&s, &p, &NumParams::default()) {
            StepResult::Accepted { state, newton_iters } => {
                assert_eq!(newton_iters, 0);
                assert_eq!(state.positions(), s.positions());
                assert_relative_eq!(state.time(), 1e-3);
            }
            StepResult::Failed(f) => panic!("critical pair step failed: {f:?}"),
        }
    }

    #[test]
    fn explicit_step_closed_form() {
        let s = ParticleState::new(vec![-0.5, 0.5]).unwrap();
        let p = pm(1.0, Frame::Original);
        let y = explicit_step(&s, &p, 0.1).unwrap();
        let shift = 0.1 * (1.0 - 0.5f64.sqrt());
        assert_relative_eq!(y.positions()[0], -0.5 + shift, max_relative = 1e-12);
        assert_relative_eq!(y.positions()[1], 0.5 - shift, max_relative = 1e-12);
        assert_eq!(y.time(), 0.1);
        // Zero-gradient state is bitwise unchanged.
        let p = pm(critical_chi_n2(), Frame::Original);
        let y = explicit_step(&s, &p, 0.37).unwrap();
        assert_eq!(y.positions(), s.positions());
        // Too-large steps that would cross particles are rejected.
        let p = pm(100.0, Frame::Original);
        assert!(matches!(
            explicit_step(&s, &p, 10.0),
            Err(Error::OrderingViolated)
        ));
    }

    #[test]
    fn evolve_steady_on_critical_pair() {
        let s = ParticleState::new(vec![-0.5, 0.5]).unwrap();
        let p = pm(critical_chi_n2(), Frame::Original);
        let out = evolve(&s, &p, &NumParams::default()).unwrap();
        assert_eq!(out.status, RunStatus::Steady);
        assert_eq!(out.final_state.positions(), s.positions());
        assert_eq!(out.halvings, 0);
    }

    #[test]
    fn evolve_timeout_spreads() {
        let s = ParticleState::new(vec![-0.6, -0.1, 0.2, 0.7]).unwrap();
        let p = pm(0.2, Frame::Original);
        let np = NumParams {
            dt: 1e-2,
            t_max: 0.2,
            steady_tol: 1e-9,
            newton_tol: 1e-11,
            ..Default::default()
        };
        let out = evolve(&s, &p, &np).unwrap();
        assert_eq!(out.status, RunStatus::Timeout);
        // Sub-critical unconfined porous-medium flow spreads.
        let v: Vec<f64> = out.trajectory.iter().map(|q| q.second_moment).collect();
        assert!(v.windows(2).all(|w| w[1] > w[0]));
        // Trajectory times strictly increase and energy never increases.
        assert!(out.trajectory.windows(2).all(|w| w[1].t > w[0].t));
        let es: Vec<f64> = out.trajectory.iter().map(|q| q.energy.total).collect();
        assert!(es.windows(2).all(|w| w[1] <= w[0] + 1e-12 * (1.0 + w[0].abs())));
    }

    #[test]
    fn evolve_supercritical_pair_blows_up() {
        let s = ParticleState::new(vec![-0.5, 0.5]).unwrap();
        let p = pm(1.0, Frame::Original);
        let np = NumParams {
            dt: 1e-2,
            t_max: 50.0,
            ..Default::default()
        };
        let out = evolve(&s, &p, &np).unwrap();
        assert_eq!(out.status, RunStatus::BlowUp);
        let first = &out.trajectory[0];
        let last = out.trajectory.last().unwrap();
        assert!(last.min_gap < first.min_gap);
        assert!(last.energy.total < first.energy.total);
    }

    #[test]
    fn center_of_mass_law_under_confinement() {
        let s = ParticleState::new(vec![-0.9, -0.2, 0.3, 0.8]).unwrap();
        let s = s.translate(0.25).unwrap(); // deliberately off-center
        let p = pm(0.3, Frame::Rescaled);
        let np = NumParams { dt: 1e-2, ..Default::default() };
        match implicit_step(&s, &p, &np) {
            StepResult::Accepted { state, .. } => {
                let sx: f64 = s.positions().iter().sum();
                let sy: f64 = state.positions().iter().sum();
                assert_relative_eq!(sy, sx / (1.0 + 1e-2), max_relative = 1e-9);
            }
            StepResult::Failed(f) => panic!("step failed: {f:?}"),
        }
    }
}
