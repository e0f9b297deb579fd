//! Helpers shared by the integration test targets.
#![allow(dead_code)]

use aggflow::energy::{discrete_energy, discrete_gradient};
use aggflow::model::PhysParams;
use aggflow::state::ParticleState;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Draws a strictly ordered random state: leftmost position in [-3, 3],
/// successive gaps in [0.05, 1.0].
pub fn random_state(rng: &mut ChaCha8Rng, n: usize) -> ParticleState {
    let mut x = Vec::with_capacity(n);
    let mut pos = rng.gen_range(-3.0..3.0);
    x.push(pos);
    for _ in 1..n {
        pos += rng.gen_range(0.05..1.0);
        x.push(pos);
    }
    ParticleState::new(x).unwrap()
}

/// A batch of seeded random states, sizes cycling over 3..=12.
pub fn random_states(count: usize, seed: u64) -> Vec<ParticleState> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|i| {
            let n = 3 + (i % 10);
            random_state(&mut rng, n)
        })
        .collect()
}

/// Central finite differences of the total energy, scaled to match the
/// (1/delta_eta) grad convention of the analytic gradient.
pub fn fd_gradient(s: &ParticleState, p: &PhysParams) -> Vec<f64> {
    let x = s.positions();
    let de = s.delta_eta();
    let mut g = Vec::with_capacity(x.len());
    for i in 0..x.len() {
        let h = 1e-6 * (1.0 + x[i].abs());
        let mut plus = x.to_vec();
        plus[i] += h;
        let mut minus = x.to_vec();
        minus[i] -= h;
        let ep = discrete_energy(&ParticleState::new(plus).unwrap(), p).total;
        let em = discrete_energy(&ParticleState::new(minus).unwrap(), p).total;
        g.push((ep - em) / (2.0 * h * de));
    }
    g
}

/// Central finite differences of the analytic gradient (column j of the
/// Hessian).
pub fn fd_hessian_column(s: &ParticleState, p: &PhysParams, j: usize) -> Vec<f64> {
    let x = s.positions();
    let h = 1e-6 * (1.0 + x[j].abs());
    let mut plus = x.to_vec();
    plus[j] += h;
    let mut minus = x.to_vec();
    minus[j] -= h;
    let gp = discrete_gradient(&ParticleState::new(plus).unwrap(), p);
    let gm = discrete_gradient(&ParticleState::new(minus).unwrap(), p);
    gp.iter().zip(&gm).map(|(a, b)| (a - b) / (2.0 * h)).collect()
}

/// Euclidean norm.
pub fn norm(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

/// Euclidean distance.
pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}
