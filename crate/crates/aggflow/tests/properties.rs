//! Structural properties of the discrete energy, gradient, Hessian, and the
//! quantile metric, checked on batches of random states.

mod common;

use aggflow::energy::{
    blowup_functional, discrete_energy, discrete_gradient, discrete_hessian, dissipation,
};
use aggflow::model::{Frame, PhysParams};
use aggflow::state::ParticleState;
use common::{dist, fd_gradient, fd_hessian_column, norm, random_states};
use proptest::prelude::*;

/// Parameter sets covering every formula branch (m = 1 vs m != 1, k = 0 vs
/// k != 0, both frames).
fn branch_params() -> Vec<PhysParams> {
    vec![
        PhysParams::new(1.5, -0.5, 0.8, Frame::Original).unwrap(),
        PhysParams::new(1.0, -0.5, 0.8, Frame::Rescaled).unwrap(),
        PhysParams::new(1.3, 0.0, 0.6, Frame::Original).unwrap(),
        PhysParams::new(1.0, 0.0, 0.6, Frame::Rescaled).unwrap(),
        PhysParams::new(0.7, 0.3, 0.9, Frame::Original).unwrap(),
    ]
}

#[test]
fn gradient_matches_finite_differences() {
    for (bi, p) in branch_params().iter().enumerate() {
        for s in random_states(100, 11 + bi as u64) {
            let g = discrete_gradient(&s, p);
            let fd = fd_gradient(&s, p);
            let rel = dist(&g, &fd) / norm(&g);
            assert!(
                rel <= 1e-6,
                "branch {bi}: gradient/FD relative error {rel:.3e} at n={}",
                s.n()
            );
        }
    }
}

#[test]
fn hessian_matches_finite_differences_and_is_symmetric() {
    for (bi, p) in branch_params().iter().enumerate() {
        for s in random_states(25, 37 + bi as u64) {
            let h = discrete_hessian(&s, p);
            let n = s.n();
            let scale = h.iter().fold(0.0_f64, |a, b| a.max(b.abs()));
            for j in 0..n {
                let col = fd_hessian_column(&s, p, j);
                for i in 0..n {
                    let err = (h[(i, j)] - col[i]).abs();
                    assert!(
                        err <= 1e-5 * (1.0 + scale),
                        "branch {bi}: H[{i},{j}]={} vs FD {} (n={n})",
                        h[(i, j)],
                        col[i]
                    );
                }
            }
            for i in 0..n {
                for j in 0..i {
                    let asym = (h[(i, j)] - h[(j, i)]).abs();
                    assert!(asym <= 1e-12 * (1.0 + scale), "asymmetry {asym:.3e}");
                }
            }
        }
    }
}

#[test]
fn fair_competition_energy_is_k_homogeneous() {
    let pairs = [(1.5, -0.5), (1.2, -0.2), (0.8, 0.2)];
    for (m, k) in pairs {
        let p = PhysParams::new(m, k, 0.7, Frame::Original).unwrap();
        for s in random_states(40, 101) {
            let e = discrete_energy(&s, &p).total;
            for lambda in [0.5, 2.0] {
                // dilate(1/lambda) maps X to lambda * X.
                let scaled = s.dilate(1.0 / lambda).unwrap();
                let es = discrete_energy(&scaled, &p).total;
                let expect = lambda.powf(k) * e;
                assert!(
                    (es - expect).abs() <= 1e-12 * (1.0 + expect.abs()),
                    "({m},{k}) lambda={lambda}: {es} vs {expect}"
                );
            }
        }
    }
}

#[test]
fn log_case_energy_shifts_by_exact_constant_under_dilation() {
    // m = 1, k = 0, r = 0: E(lambda X) = E(X) + (chi - 1)(1 - delta_eta) ln lambda.
    for chi in [0.5, 1.3] {
        let p = PhysParams::new(1.0, 0.0, chi, Frame::Original).unwrap();
        for s in random_states(40, 202) {
            let e = discrete_energy(&s, &p).total;
            let de = s.delta_eta();
            for lambda in [0.5, 2.0_f64] {
                let es = discrete_energy(&s.dilate(1.0 / lambda).unwrap(), &p).total;
                let expect = e + (chi - 1.0) * (1.0 - de) * lambda.ln();
                assert!(
                    (es - expect).abs() <= 1e-12 * (1.0 + expect.abs()),
                    "chi={chi} lambda={lambda}: {es} vs {expect}"
                );
            }
        }
    }
}

#[test]
fn unconfined_energy_and_gradient_are_translation_invariant() {
    let p = PhysParams::new(1.5, -0.5, 0.8, Frame::Original).unwrap();
    for s in random_states(40, 303) {
        let e = discrete_energy(&s, &p).total;
        let g = discrete_gradient(&s, &p);
        for c in [-2.5, 0.75] {
            let t = s.translate(c).unwrap();
            let et = discrete_energy(&t, &p).total;
            let gt = discrete_gradient(&t, &p);
            assert!((et - e).abs() <= 1e-12 * (1.0 + e.abs()));
            assert!(dist(&g, &gt) <= 1e-10 * (1.0 + norm(&g)));
        }
    }
}

#[test]
fn blowup_functional_is_nonpositive_on_porous_medium_states() {
    let p = PhysParams::new(1.5, -0.5, 0.9, Frame::Original).unwrap();
    for s in random_states(100, 404) {
        let h = blowup_functional(&s, &p).unwrap();
        let tol = 1e-6 * (1.0 + dissipation(&s, &p));
        assert!(h <= tol, "H = {h:.6e} exceeds {tol:.3e} at n={}", s.n());
    }
}

/// Strategy: n in 2..=10, three same-size states with bounded first point and
/// gaps.
fn three_states() -> impl Strategy<Value = (ParticleState, ParticleState, ParticleState)> {
    (2usize..=10).prop_flat_map(|n| {
        let one = (
            -3.0..3.0f64,
            proptest::collection::vec(0.05..1.0f64, n - 1),
        )
            .prop_map(|(first, gaps)| {
                let mut x = vec![first];
                for g in gaps {
                    x.push(x.last().unwrap() + g);
                }
                ParticleState::new(x).unwrap()
            });
        (one.clone(), one.clone(), one)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn wasserstein_is_a_metric((a, b, c) in three_states()) {
        let dab = a.wasserstein(&b).unwrap();
        let dba = b.wasserstein(&a).unwrap();
        let dac = a.wasserstein(&c).unwrap();
        let dbc = b.wasserstein(&c).unwrap();
        // Symmetry is exact: the summands are squared differences.
        prop_assert_eq!(dab, dba);
        // Identity.
        prop_assert_eq!(a.wasserstein(&a).unwrap(), 0.0);
        if a.positions() != b.positions() {
            prop_assert!(dab > 0.0);
        }
        // Triangle inequality.
        prop_assert!(dac <= dab + dbc + 1e-12);
    }
}
