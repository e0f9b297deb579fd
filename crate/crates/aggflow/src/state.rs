//! Particle states on the quantile grid and the operations the flow needs on them.

use crate::error::{Error, Result};

/// n strictly ordered particles of mass 1/n each, read as the quantile
/// function of a probability density sampled at eta_i = (i - 1/2)/n,
/// together with the simulation time the configuration belongs to.
#[derive(Debug, Clone, PartialEq)]
pub struct ParticleState {
    positions: Vec<f64>,
    time: f64,
}

impl ParticleState {
    /// Builds a state at time 0. Positions must be finite, strictly
    /// increasing, and at least two.
    pub fn new(positions: Vec<f64>) -> Result<Self> {
        Self::with_time(positions, 0.0)
    }

    /// Builds a state at the given time, with the same validation as [`new`](Self::new).
    pub fn with_time(positions: Vec<f64>, time: f64) -> Result<Self> {
        if positions.len() < 2 {
            return Err(Error::InvalidParameter(format!(
                "a state needs at least 2 particles, got {}",
                positions.len()
            )));
        }
        if positions.iter().any(|x| !x.is_finite()) {
            return Err(Error::Singular("non-finite particle position".into()));
        }
        if positions.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Singular(
                "particle positions must be strictly increasing".into(),
            ));
        }
        if !time.is_finite() {
            return Err(Error::InvalidParameter(format!("non-finite time {time}")));
        }
        Ok(ParticleState { positions, time })
    }

    pub fn n(&self) -> usize {
        self.positions.len()
    }

    /// Mass per particle, 1/n.
    pub fn delta_eta(&self) -> f64 {
        1.0 / self.positions.len() as f64
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn positions(&self) -> &[f64] {
        &self.positions
    }

    /// Midpoint mass grid eta_i = (i - 1/2)/n, i = 1..n.
    pub fn eta_grid(&self) -> Vec<f64> {
        let n = self.positions.len();
        (0..n).map(|i| (i as f64 + 0.5) / n as f64).collect()
    }

    /// Smallest inter-particle gap.
    pub fn min_gap(&self) -> f64 {
        self.positions
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(f64::INFINITY, f64::min)
    }

    /// Largest midpoint density value, delta_eta / min_gap.
    pub fn max_density(&self) -> f64 {
        self.delta_eta() / self.min_gap()
    }

    /// Mass-weighted mean position.
    pub fn center_of_mass(&self) -> f64 {
        self.delta_eta() * self.positions.iter().sum::<f64>()
    }

    /// Mass-weighted second moment about the origin.
    pub fn second_moment(&self) -> f64 {
        self.delta_eta() * self.positions.iter().map(|x| x * x).sum::<f64>()
    }

    /// Discrete L^m norm of the midpoint density:
    /// (sum_i rho_i^m * gap_i)^(1/m) over the n-1 gaps, rho_i = delta_eta/gap_i.
    /// Undefined at m = 0.
    pub fn lm_norm(&self, m: f64) -> Result<f64> {
        if !(m.is_finite() && m != 0.0) {
            return Err(Error::InvalidParameter(format!(
                "L^m norm needs finite m != 0, got {m}"
            )));
        }
        let de = self.delta_eta();
        let s: f64 = self
            .positions
            .windows(2)
            .map(|w| (w[1] - w[0]).powf(1.0 - m))
            .sum();
        Ok((de.powf(m) * s).powf(1.0 / m))
    }

    /// Center of mass, second moment, and L^m density norm in one pass-friendly call.
    pub fn moments(&self, m: f64) -> Result<(f64, f64, f64)> {
        Ok((self.center_of_mass(), self.second_moment(), self.lm_norm(m)?))
    }

    /// Shifts every particle by c.
    pub fn translate(&self, c: f64) -> Result<Self> {
        if !c.is_finite() {
            return Err(Error::InvalidParameter(format!("non-finite shift {c}")));
        }
        Self::with_time(self.positions.iter().map(|x| x + c).collect(), self.time)
    }

    /// Rescales X -> X / lambda (lambda > 0), the quantile form of the
    /// dilation rho -> lambda rho(lambda x).
    pub fn dilate(&self, lambda: f64) -> Result<Self> {
        if !(lambda.is_finite() && lambda > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "dilation factor must be positive and finite, got {lambda}"
            )));
        }
        Self::with_time(self.positions.iter().map(|x| x / lambda).collect(), self.time)
    }

    /// L^2 distance of quantile functions (the 1D 2-Wasserstein distance):
    /// sqrt(delta_eta * sum_i (X_i - Y_i)^2). Particle counts must match.
    pub fn wasserstein(&self, other: &ParticleState) -> Result<f64> {
        if self.n() != other.n() {
            return Err(Error::SizeMismatch {
                left: self.n(),
                right: other.n(),
            });
        }
        let s: f64 = self
            .positions
            .iter()
            .zip(&other.positions)
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        Ok((self.delta_eta() * s).sqrt())
    }

    /// Midpoint density reconstruction: one node per gap, located at the gap
    /// midpoint with value delta_eta / gap.
    pub fn to_density(&self) -> DensityProfile {
        let de = self.delta_eta();
        let nodes = self
            .positions
            .windows(2)
            .map(|w| (0.5 * (w[0] + w[1]), de / (w[1] - w[0])))
            .collect();
        DensityProfile { nodes }
    }
}

/// Piecewise density reconstruction: (x, rho) nodes at the gap midpoints.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityProfile {
    pub nodes: Vec<(f64, f64)>,
}

impl DensityProfile {
    /// Mass carried by the reconstruction's cells; each of the n-1 cells holds
    /// exactly delta_eta, so this is (n-1)/n rather than 1 (the two tail
    /// half-masses sit outside the extreme particles).
    pub fn mass(&self, gaps: &[f64]) -> f64 {
        self.nodes
            .iter()
            .zip(gaps)
            .map(|((_, rho), gap)| rho * gap)
            .sum()
    }

    pub fn max_value(&self) -> f64 {
        self.nodes.iter().map(|&(_, rho)| rho).fold(0.0, f64::max)
    }
}

/// Samples a quantile function on the midpoint grid, recenters the result to
/// zero mean (c = delta_eta * sum q(eta_i)), and returns the state at time 0.
pub fn from_quantile_fn(n: usize, q: impl Fn(f64) -> f64) -> Result<ParticleState> {
    if n < 2 {
        return Err(Error::InvalidParameter(format!(
            "a state needs at least 2 particles, got {n}"
        )));
    }
    let mut xs: Vec<f64> = (0..n)
        .map(|i| q((i as f64 + 0.5) / n as f64))
        .collect();
    if xs.iter().any(|x| !x.is_finite()) {
        return Err(Error::Singular("quantile sample is not finite".into()));
    }
    if xs.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Singular(
            "quantile samples must be strictly increasing".into(),
        ));
    }
    let c = xs.iter().sum::<f64>() / n as f64;
    for x in &mut xs {
        *x -= c;
    }
    ParticleState::new(xs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn two_particle() -> ParticleState {
        ParticleState::new(vec![-0.5, 0.5]).unwrap()
    }

    #[test]
    fn construction_validates() {
        assert!(ParticleState::new(vec![0.0]).is_err());
        assert!(ParticleState::new(vec![0.0, 0.0]).is_err());
        assert!(ParticleState::new(vec![1.0, 0.0]).is_err());
        assert!(ParticleState::new(vec![0.0, f64::NAN]).is_err());
        assert!(ParticleState::new(vec![0.0, 1.0]).is_ok());
    }

    #[test]
    fn quantile_sampling_recenters() {
        // q(eta) = eta on n = 2 samples {0.25, 0.75}; mean 0.5 is removed.
        let s = from_quantile_fn(2, |eta| eta).unwrap();
        assert_eq!(s.positions(), &[-0.25, 0.25]);
        assert_eq!(s.time(), 0.0);
        assert!(from_quantile_fn(2, |_| 1.0).is_err());
        assert!(from_quantile_fn(3, |eta| -eta).is_err());
    }

    #[test]
    fn grid_and_gaps() {
        let s = two_particle();
        assert_eq!(s.delta_eta(), 0.5);
        assert_eq!(s.eta_grid(), vec![0.25, 0.75]);
        assert_eq!(s.min_gap(), 1.0);
        assert_eq!(s.max_density(), 0.5);
    }

    #[test]
    fn density_reconstruction() {
        let s = two_particle();
        let d = s.to_density();
        assert_eq!(d.nodes, vec![(0.0, 0.5)]);

        let s = ParticleState::new(vec![0.0, 1.0, 3.0]).unwrap();
        let d = s.to_density();
        assert_eq!(d.nodes.len(), 2);
        assert_relative_eq!(d.nodes[0].0, 0.5);
        assert_relative_eq!(d.nodes[0].1, 1.0 / 3.0);
        assert_relative_eq!(d.nodes[1].0, 2.0);
        assert_relative_eq!(d.nodes[1].1, 1.0 / 6.0);
        // Each cell carries exactly delta_eta of mass: total (n-1)/n.
        let gaps = [1.0, 2.0];
        assert_relative_eq!(d.mass(&gaps), 2.0 / 3.0, max_relative = 1e-15);
    }

    #[test]
    fn wasserstein_distance() {
        let a = two_particle();
        let b = ParticleState::new(vec![-0.25, 0.25]).unwrap();
        assert_relative_eq!(a.wasserstein(&b).unwrap(), 0.25, max_relative = 1e-15);
        assert_eq!(a.wasserstein(&a).unwrap(), 0.0);
        let c = ParticleState::new(vec![0.0, 1.0, 2.0]).unwrap();
        assert!(a.wasserstein(&c).is_err());
    }

    #[test]
    fn moments_and_norms() {
        let s = two_particle();
        assert_eq!(s.center_of_mass(), 0.0);
        assert_relative_eq!(s.second_moment(), 0.25, max_relative = 1e-15);
        // L^1 "norm" of the midpoint density is exactly (n-1) * delta_eta.
        let s = ParticleState::new(vec![0.0, 0.3, 1.1, 2.0]).unwrap();
        assert_relative_eq!(s.lm_norm(1.0).unwrap(), 0.75, max_relative = 1e-14);
        assert!(s.lm_norm(0.0).is_err());
        let (com, v, l2) = s.moments(2.0).unwrap();
        assert_relative_eq!(com, 0.85, max_relative = 1e-14);
        assert_relative_eq!(v, (0.09 + 1.21 + 4.0) / 4.0, max_relative = 1e-14);
        // (sum (de/gap)^2 gap)^(1/2) with de = 1/4.
        let expect = (0.0625_f64 * (1.0 / 0.3 + 1.0 / 0.8 + 1.0 / 0.9)).sqrt();
        assert_relative_eq!(l2, expect, max_relative = 1e-14);
    }

    #[test]
    fn translate_and_dilate() {
        let s = two_particle();
        let t = s.translate(1.5).unwrap();
        assert_eq!(t.positions(), &[1.0, 2.0]);
        let d = s.dilate(2.0).unwrap();
        assert_eq!(d.positions(), &[-0.25, 0.25]);
        assert_relative_eq!(d.second_moment(), 0.0625, max_relative = 1e-15);
        assert!(s.dilate(0.0).is_err());
        assert!(s.dilate(-1.0).is_err());
    }
}
