//! Discrete free energy on the quantile grid, its analytic gradient and Hessian,
//! and the stationarity/blow-up diagnostics built from them.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::model::{PhysParams, Frame, FAIR_TOL};
use crate::state::ParticleState;

/// Free-energy value split into its three terms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyBreakdown {
    /// Diffusion term: (de)^m/(m-1) sum gap^(1-m), or -de sum log(gap/de) at m = 1.
    pub entropy_part: f64,
    /// Interaction term: chi de^2 sum_{i!=j} |Xj-Xi|^k/k, log kernel at k = 0.
    pub interaction_part: f64,
    /// Confinement term: r (de/2) sum X^2.
    pub confinement_part: f64,
    /// Sum of the three parts, in that order.
    pub total: f64,
}

/// Energy of a state. The state's ordering invariant rules out the singular
/// coincident-particle configurations.
pub fn discrete_energy(s: &ParticleState, p: &PhysParams) -> EnergyBreakdown {
    breakdown_raw(s.positions(), p)
}

pub(crate) fn breakdown_raw(x: &[f64], p: &PhysParams) -> EnergyBreakdown {
    let n = x.len();
    let de = 1.0 / n as f64;
    let m = p.m;
    let k = p.k;

    let entropy_part = if m == 1.0 {
        -de * x.windows(2).map(|w| ((w[1] - w[0]) / de).ln()).sum::<f64>()
    } else {
        de.powf(m) / (m - 1.0) * x.windows(2).map(|w| (w[1] - w[0]).powf(1.0 - m)).sum::<f64>()
    };

    // Ordered pairs i != j counted twice; we sum i < j once and double.
    let mut pair_sum = 0.0;
    for i in 1..n {
        for j in 0..i {
            let d = x[i] - x[j];
            pair_sum += if k == 0.0 { d.ln() } else { d.powf(k) / k };
        }
    }
    let interaction_part = 2.0 * p.chi * de * de * pair_sum;

    let r = p.confinement();
    let confinement_part = r * 0.5 * de * x.iter().map(|v| v * v).sum::<f64>();

    let total = entropy_part + interaction_part + confinement_part;
    EnergyBreakdown {
        entropy_part,
        interaction_part,
        confinement_part,
        total,
    }
}

/// Metric gradient g with flow convention Xdot = -g. Equals the Euclidean
/// gradient of the discrete energy divided by de, so the extremal rows carry
/// one-sided diffusive differences automatically.
pub fn discrete_gradient(s: &ParticleState, p: &PhysParams) -> Vec<f64> {
    gradient_raw(s.positions(), p)
}

pub(crate) fn gradient_raw(x: &[f64], p: &PhysParams) -> Vec<f64> {
    let n = x.len();
    let de = 1.0 / n as f64;
    let cd = de.powf(p.m - 1.0);
    let ci = 2.0 * p.chi * de;
    let r = p.confinement();
    let km1 = p.k - 1.0;

    // gap^(-m) per gap; one-sided at the two extremal particles.
    let gp: Vec<f64> = x.windows(2).map(|w| (w[1] - w[0]).powf(-p.m)).collect();

    // acc_i = sum_{j<i} (X_i-X_j)^(k-1) - sum_{j>i} (X_j-X_i)^(k-1),
    // each unordered pair visited once.
    let mut acc = vec![0.0; n];
    for i in 1..n {
        let xi = x[i];
        let mut si = 0.0;
        for (j, &xj) in x.iter().enumerate().take(i) {
            let w = (xi - xj).powf(km1);
            si += w;
            acc[j] -= w;
        }
        acc[i] += si;
    }

    (0..n)
        .map(|i| {
            let mut v = ci * acc[i] + r * x[i];
            if i < n - 1 {
                v += cd * gp[i];
            }
            if i > 0 {
                v -= cd * gp[i - 1];
            }
            v
        })
        .collect()
}

/// Jacobian H = dg/dX: tridiagonal diffusive part, dense interaction part with
/// zero row sums, and r on the diagonal. Symmetric by construction.
pub fn discrete_hessian(s: &ParticleState, p: &PhysParams) -> DMatrix<f64> {
    hessian_raw(s.positions(), p)
}

pub(crate) fn hessian_raw(x: &[f64], p: &PhysParams) -> DMatrix<f64> {
    let n = x.len();
    let de = 1.0 / n as f64;
    let cd = de.powf(p.m - 1.0);
    let ci = 2.0 * p.chi * de;
    let r = p.confinement();
    let km2 = p.k - 2.0;

    let mut h = DMatrix::zeros(n, n);
    for i in 1..n {
        let xi = x[i];
        for j in 0..i {
            // d/dXj of the attraction felt by i: -ci (k-1) d^(k-2).
            let w = ci * (p.k - 1.0) * (xi - x[j]).powf(km2);
            h[(i, j)] = -w;
            h[(j, i)] = -w;
            h[(i, i)] += w;
            h[(j, j)] += w;
        }
    }
    for i in 0..n - 1 {
        let t = p.m * cd * (x[i + 1] - x[i]).powf(-p.m - 1.0);
        h[(i, i)] += t;
        h[(i + 1, i + 1)] += t;
        h[(i, i + 1)] -= t;
        h[(i + 1, i)] -= t;
    }
    for i in 0..n {
        h[(i, i)] += r;
    }
    h
}

/// Quantile-space dissipation D = de * sum g_i^2 (squared L2 norm of the velocity).
pub fn dissipation(s: &ParticleState, p: &PhysParams) -> f64 {
    let g = discrete_gradient(s, p);
    s.delta_eta() * g.iter().map(|v| v * v).sum::<f64>()
}

/// Stationarity defect of the rescaled-frame identity
/// F_resc = (1/2 - 1/k) V: returns F_resc[s] - (1/2 - 1/k) V[s].
/// Requires the rescaled frame, fair competition, and k != 0.
pub fn virial_residual(s: &ParticleState, p: &PhysParams) -> Result<f64> {
    if p.frame != Frame::Rescaled {
        return Err(Error::InvalidParameter(
            "virial residual is defined in the rescaled frame".into(),
        ));
    }
    if !p.is_fair_competition() {
        return Err(Error::InvalidParameter(
            "virial residual needs fair-competition parameters m = 1 - k".into(),
        ));
    }
    if p.k.abs() <= FAIR_TOL {
        return Err(Error::InvalidParameter(
            "virial residual is undefined at k = 0".into(),
        ));
    }
    let f = discrete_energy(s, p).total;
    Ok(f - (0.5 - 1.0 / p.k) * s.second_moment())
}

/// Both sides of the second-moment law dV/dt = 2(m-1) F in the unconfined
/// fair-competition flow: lhs is the exact discrete dV/dt along the flow,
/// rhs the energy form. Requires the original frame and m = 1 - k.
pub fn second_moment_rate(s: &ParticleState, p: &PhysParams) -> Result<(f64, f64)> {
    if p.frame != Frame::Original {
        return Err(Error::InvalidParameter(
            "second-moment law is stated in the original frame".into(),
        ));
    }
    if !p.is_fair_competition() {
        return Err(Error::InvalidParameter(
            "second-moment law needs fair-competition parameters m = 1 - k".into(),
        ));
    }
    let g = discrete_gradient(s, p);
    let lhs = -2.0
        * s.delta_eta()
        * s.positions().iter().zip(&g).map(|(x, gi)| x * gi).sum::<f64>();
    let rhs = 2.0 * (p.m - 1.0) * discrete_energy(s, p).total;
    Ok((lhs, rhs))
}

/// Blow-up indicator H = -D[s_hat] + ((m-1) F[s_hat])^2 evaluated on the
/// dilation s_hat of s with unit second moment. Nonpositive (up to
/// discretization error) in the porous-medium fair-competition regime, and
/// zero exactly at stationary states. Requires the original frame, m = 1 - k,
/// and k < 0.
pub fn blowup_functional(s: &ParticleState, p: &PhysParams) -> Result<f64> {
    if p.frame != Frame::Original {
        return Err(Error::InvalidParameter(
            "blow-up functional is defined in the original frame".into(),
        ));
    }
    if !p.is_fair_competition() {
        return Err(Error::InvalidParameter(
            "blow-up functional needs fair-competition parameters m = 1 - k".into(),
        ));
    }
    if p.k >= 0.0 {
        return Err(Error::InvalidParameter(
            "blow-up functional needs k < 0".into(),
        ));
    }
    let v = s.second_moment();
    if !(v.is_finite() && v > 0.0) {
        return Err(Error::Singular(format!(
            "degenerate second moment {v} in blow-up functional"
        )));
    }
    let hat = s.dilate(v.sqrt())?;
    let d = dissipation(&hat, p);
    let f = discrete_energy(&hat, p).total;
    Ok(-d + ((p.m - 1.0) * f).powi(2))
}
