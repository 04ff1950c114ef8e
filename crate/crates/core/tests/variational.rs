use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use ricci_forge_core::curvature::curvature_pack;
use ricci_forge_core::extrinsic::{extrinsic_pack, sigma2};
use ricci_forge_core::oracle::fd_connection;
use ricci_forge_core::variational::*;
use ricci_forge_core::{Chart, Expr, MetricField, ScalarField, SplitDistribution};
use std::f64::consts::TAU;

/// Diagonal metric `e^(2 a_k) dx_k^2` with distinct periodic exponents.
fn warped(p1: usize, p2: usize) -> MetricField {
    let n = p1 + p2;
    let mut entries = vec![ScalarField::constant(0.0); n * n];
    for k in 0..n {
        let a = Expr::constant(0.3) * Expr::coord((k + 1) % n).sin()
            + Expr::constant(0.15 + 0.05 * k as f64) * Expr::coord((k + 2) % n).cos();
        entries[k * n + k] = ScalarField::from_expr((Expr::constant(2.0) * a).exp());
    }
    MetricField::general(Chart::torus(p1, p2, TAU).unwrap(), entries).unwrap()
}

fn product(p1: usize, p2: usize) -> MetricField {
    let n = p1 + p2;
    let a = (Expr::constant(0.4) * Expr::coord(0).sin()).exp();
    let b = (Expr::constant(0.3) * Expr::coord(n - 1).cos() + Expr::constant(0.2) * Expr::coord(p1).sin()).exp();
    let mut entries = vec![ScalarField::constant(0.0); n * n];
    for k in 0..n {
        entries[k * n + k] = ScalarField::from_expr(if k < p1 { a.clone() } else { b.clone() });
    }
    MetricField::general(Chart::torus(p1, p2, TAU).unwrap(), entries).unwrap()
}

fn random_point(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(0.0..TAU)).collect()
}

#[test]
fn phi_is_the_second_derivative_of_rotated_k12() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for (p1, p2) in [(2, 2), (2, 3), (1, 3)] {
        let m = warped(p1, p2);
        let d = SplitDistribution::coordinate(p1, p2);
        for _ in 0..5 {
            let x = random_point(&mut rng, p1 + p2);
            let omega: Vec<f64> = (0..p1).map(|_| rng.gen_range(0.0..1.5)).collect();
            let pack = curvature_pack(&m, &d, &x).unwrap();
            let phi = phi_form(&m, &d, &x).unwrap();
            assert!((&phi.phi - phi.phi.transpose()).norm() < 1e-12);
            let h = 1e-2;
            let k = |s: f64| rotated_k12(&pack.riemann, p1, &omega.iter().map(|w| s * w).collect::<Vec<_>>());
            let d2 = (-k(-2.0 * h) + 16.0 * k(-h) - 30.0 * k(0.0) + 16.0 * k(h) - k(2.0 * h)) / (12.0 * h * h);
            let expect = 2.0 * phi.quadratic(&omega);
            assert!((d2 - expect).abs() < 1e-6 * (1.0 + expect.abs()), "{d2} vs {expect}");
        }
    }
}

fn frame_change(n: usize, rows: &[(usize, Vec<(usize, f64)>)]) -> Vec<Vec<f64>> {
    let mut basis: Vec<Vec<f64>> = (0..n).map(|a| (0..n).map(|b| if a == b { 1.0 } else { 0.0 }).collect()).collect();
    for (a, entries) in rows {
        basis[*a] = vec![0.0; n];
        for (b, v) in entries {
            basis[*a][*b] = *v;
        }
    }
    basis
}

#[test]
fn phi_is_covariant_under_signed_pair_permutations() {
    let m = warped(2, 3);
    let d = SplitDistribution::coordinate(2, 3);
    let pack = curvature_pack(&m, &d, &[0.7, 2.1, 4.0, 1.3, 5.5]).unwrap();
    let base = phi_from_riemann(&pack.riemann, 2).unwrap();
    // swap the pairs (e_0, xi_0) <-> (e_1, xi_1) and flip the sign of the second pair
    let basis = frame_change(5, &[(0, vec![(1, 1.0)]), (1, vec![(0, -1.0)]), (2, vec![(3, 1.0)]), (3, vec![(2, -1.0)])]);
    let moved = phi_from_riemann(&pack.riemann.in_basis(&basis), 2).unwrap();
    let p = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]);
    assert!((&moved - &p * &base * p.transpose()).norm() < 1e-10);
    let mut e0 = base.symmetric_eigenvalues().as_slice().to_vec();
    let mut e1 = moved.symmetric_eigenvalues().as_slice().to_vec();
    e0.sort_by(f64::total_cmp);
    e1.sort_by(f64::total_cmp);
    for (a, b) in e0.iter().zip(&e1) {
        assert!((a - b).abs() < 1e-10);
    }
}

#[test]
fn uniform_rotation_value_is_invariant_under_paired_rotation() {
    let m = warped(2, 3);
    let d = SplitDistribution::coordinate(2, 3);
    let pack = curvature_pack(&m, &d, &[0.7, 2.1, 4.0, 1.3, 5.5]).unwrap();
    let (s, c) = 0.8f64.sin_cos();
    let basis = frame_change(
        5,
        &[(0, vec![(0, c), (1, s)]), (1, vec![(0, -s), (1, c)]), (2, vec![(2, c), (3, s)]), (3, vec![(2, -s), (3, c)])],
    );
    let ones = DMatrix::from_element(2, 1, 1.0);
    let q = |phi: DMatrix<f64>| (ones.transpose() * phi * &ones)[(0, 0)];
    let before = q(phi_from_riemann(&pack.riemann, 2).unwrap());
    let after = q(phi_from_riemann(&pack.riemann.in_basis(&basis), 2).unwrap());
    assert!((before - after).abs() < 1e-10 * (1.0 + before.abs()));
}

#[test]
fn flat_torus_has_no_variation() {
    let m = MetricField::euclidean(Chart::torus(2, 2, TAU).unwrap());
    let d = SplitDistribution::coordinate(2, 2);
    let l = [TAU; 4];
    let mut sc = VariationScenario::new(m.clone(), d.clone(), vec![1.0, 0.5], Bump::centered(vec![1.0; 4], &l));
    sc.quadrature = Quadrature::new(8);
    let v = variation_derivatives(&sc).unwrap();
    for x in [v.i1_analytic, v.i1_fd, v.i2_analytic, v.i2_fd] {
        assert!(x.abs() <= 1e-8);
    }
    let phi = phi_form(&m, &d, &[0.1, 0.2, 0.3, 0.4]).unwrap();
    assert!(phi.phi.norm() <= 1e-8);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let qp = quasi_positive(&m, &d, &[vec![0.0; 4]], 4, &mut rng).unwrap();
    assert!(!qp.quasi_positive);
    let ids = integral_identity_check(&m, &d, &Quadrature::new(8)).unwrap();
    assert!(ids.energy_residual.abs() <= 1e-8);
    let b = bending_and_energy(&m, &d, &Quadrature::new(8), 1.0).unwrap();
    assert_eq!((b.bending, b.bending_bound, b.corrected_energy, b.ik), (0.0, 0.0, 0.0, 0.0));
}

#[test]
fn warped_torus_variations_match_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let m = warped(2, 2);
    let d = SplitDistribution::tilted(2, 2, vec![0.3, -0.2, 0.1, 0.25]).unwrap();
    let l = [TAU; 4];
    for _ in 0..3 {
        let omega = vec![rng.gen_range(0.2..1.5), rng.gen_range(0.0..1.5)];
        let center = random_point(&mut rng, 4);
        let mut sc = VariationScenario::new(m.clone(), d.clone(), omega, Bump::centered(center, &l));
        sc.quadrature = Quadrature::new(10);
        let v = variation_derivatives(&sc).unwrap();
        let rel = |a: f64, b: f64| (a - b).abs() / a.abs().max(b.abs()).max(1e-12);
        assert!(rel(v.i1_analytic, v.i1_fd) < 1e-4, "{v:?}");
        assert!(rel(v.i2_analytic, v.i2_fd) < 1e-4, "{v:?}");
        assert!(v.i1_analytic.abs() > 1e-6);
    }
}

#[test]
fn product_torus_is_critical() {
    let m = product(2, 2);
    let d = SplitDistribution::coordinate(2, 2);
    let pts = torus_points(m.chart(), 8).unwrap();
    let c = criticality(&m, &d, &pts, 1e-8).unwrap();
    assert!(c.critical, "{c:?}");
    let l = [TAU; 4];
    let mut sc = VariationScenario::new(m, d, vec![1.0, 0.7], Bump::centered(vec![0.5, 1.0, 2.0, 3.0], &l));
    sc.quadrature = Quadrature::new(8);
    let v = variation_derivatives(&sc).unwrap();
    assert!(v.i1_analytic.abs() <= 1e-8 && v.i1_fd.abs() <= 1e-6, "{v:?}");
}

#[test]
fn tilted_split_is_not_critical() {
    let m = warped(2, 2);
    let d = SplitDistribution::tilted(2, 2, vec![0.5, 0.0, 0.0, 0.5]).unwrap();
    let pts = torus_points(m.chart(), 8).unwrap();
    let c = criticality(&m, &d, &pts, 1e-8).unwrap();
    assert!(!c.critical && c.max_violation > 0.0);
}

#[test]
fn sphere_times_hyperbolic_plane() {
    // theta, phi on S^2(1); x, y on H^2(-1) with y > 0
    let chart = Chart::half_space(2, 2).unwrap();
    let n = 4;
    let mut e = vec![ScalarField::constant(0.0); n * n];
    e[0] = ScalarField::constant(1.0);
    e[n + 1] = ScalarField::from_expr(Expr::coord(0).sin().pow(2.0));
    let hyp = ScalarField::from_expr(Expr::coord(3).pow(-2.0));
    e[2 * n + 2] = hyp.clone();
    e[3 * n + 3] = hyp;
    let m = MetricField::general(chart, e).unwrap();
    let d = SplitDistribution::coordinate(2, 2);
    let x = [1.1, 0.4, -0.3, 0.8];
    let pack = curvature_pack(&m, &d, &x).unwrap();
    let ric = pack.ricci();
    assert!((ric[(0, 0)] - 1.0).abs() < 1e-8);
    assert!((ric[(2, 2)] + 1.0).abs() < 1e-8);
    let c = criticality(&m, &d, &[x.to_vec(), vec![0.6, 2.0, 1.0, 2.5]], 1e-8).unwrap();
    assert!(c.critical);
}

#[test]
fn integral_identities_on_closed_scenarios() {
    let d1 = SplitDistribution::coordinate(2, 2);
    let sin1 = MetricField::conformally_flat(
        Chart::torus(2, 2, TAU).unwrap(),
        ScalarField::from_expr(Expr::coord(0).sin().exp()),
    );
    let fine = Quadrature::per_axis(vec![32, 8, 8, 8]);
    let integrable = MetricField::conformally_flat(
        Chart::torus(2, 2, TAU).unwrap(),
        ScalarField::from_expr((Expr::constant(0.4) * Expr::coord(0).sin() + Expr::constant(0.3) * Expr::coord(1).cos()).exp()),
    );
    let scenarios = [
        (sin1, d1.clone()),
        (integrable, d1.clone()),
        (warped(2, 2), SplitDistribution::tilted(2, 2, vec![0.2, 0.0, -0.1, 0.3]).unwrap()),
    ];
    let quads = [fine, Quadrature::per_axis(vec![24, 24, 8, 8]), Quadrature::new(14)];
    for (i, (m, d)) in scenarios.iter().enumerate() {
        let ids = integral_identity_check(m, d, &quads[i]).unwrap();
        assert!(ids.energy_residual.abs() <= 1e-5, "{i}: {ids:?}");
        assert!(ids.sigma2_residual.abs() <= 1e-5, "{i}: {ids:?}");
        assert!(ids.max_norm_identity_gap <= 1e-9, "{i}: {ids:?}");
        if i == 1 {
            assert!(ids.max_t2_sq <= 1e-20);
        }
    }
}

#[test]
fn total_k12_matches_closed_form() {
    // g = delta / e^(2 sin x_0): K12 = p2 e^(2U)(U'' - (p1 - 1)U'^2), dvol = e^(-n U)
    let (p1, p2) = (2usize, 3usize);
    let m = MetricField::conformally_flat(
        Chart::torus(p1, p2, TAU).unwrap(),
        ScalarField::from_expr(Expr::coord(0).sin().exp()),
    );
    let d = SplitDistribution::coordinate(p1, p2);
    let ik = total_k12(&m, &d, &Quadrature::per_axis(vec![48, 8, 8, 8, 8])).unwrap();
    let n = (p1 + p2) as f64;
    let samples = 4096;
    let vals: Vec<f64> = (0..samples)
        .map(|k| {
            let t = k as f64 * TAU / samples as f64;
            let (u, u1, u2) = (t.sin(), t.cos(), -t.sin());
            p2 as f64 * (2.0 * u).exp() * (u2 - (p1 as f64 - 1.0) * u1 * u1) * (-n * u).exp()
        })
        .collect();
    let closed = vals.iter().sum::<f64>() * TAU / samples as f64 * TAU.powi(4);
    assert!((ik - closed).abs() <= 1e-6 * (1.0 + closed.abs()), "{ik} vs {closed}");
}

#[test]
fn quadrature_converges() {
    let m = warped(2, 2);
    let d = SplitDistribution::coordinate(2, 2);
    let a = total_k12(&m, &d, &Quadrature::new(10)).unwrap();
    let b = total_k12(&m, &d, &Quadrature::new(20)).unwrap();
    assert!((a - b).abs() <= 1e-8, "{a} vs {b}");
}

#[test]
fn bending_matrix_identity_and_newton() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for k in 0..1000 {
        let p = 2 + k % 5;
        let c = DMatrix::from_fn(p, p, |_, _| rng.gen_range(-2.0..2.0));
        let (lhs, rhs) = bending_matrix_identity(&c);
        assert!((lhs - rhs).abs() <= 1e-10 * (1.0 + lhs.abs()));
        assert!(newton_identity_gap(&c).abs() <= 1e-10);
        assert!(c.norm_squared() >= 2.0 / (p as f64 - 1.0) * sigma2(&c) - 1e-12);
    }
}

#[test]
fn bending_density_matches_frame_derivative_oracle() {
    let m = warped(2, 3);
    let d = SplitDistribution::tilted(2, 3, vec![0.2, 0.0, -0.1, 0.3, 0.0, 0.1]).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..5 {
        let x = random_point(&mut rng, 5);
        let ext = extrinsic_pack(&m, &d, &x).unwrap();
        let fd = fd_connection(&m, &d, &x).unwrap();
        let b = ext.bending_density();
        assert!((b - fd.bending_d1()).abs() < 1e-6 * (1.0 + b));
        assert!((b - fd.bending_d2()).abs() < 1e-6 * (1.0 + b));
    }
}

#[test]
fn bending_bounds_hold() {
    let q = Quadrature::new(10);
    for (m, d) in [
        (warped(2, 2), SplitDistribution::coordinate(2, 2)),
        (warped(2, 2), SplitDistribution::tilted(2, 2, vec![0.3, -0.2, 0.1, 0.25]).unwrap()),
        (product(2, 2), SplitDistribution::tilted(2, 2, vec![0.2, 0.1, -0.3, 0.0]).unwrap()),
    ] {
        let b = bending_and_energy(&m, &d, &q, 1.0).unwrap();
        assert!(b.bound_slack >= -1e-8, "{b:?}");
        assert!(b.equal_rank_slack.unwrap() >= -1e-8, "{b:?}");
        if let Some(s) = b.energy_slack {
            assert!(s >= -1e-8, "{b:?}");
        }
    }
    let m = warped(1, 3);
    assert!(matches!(
        bending_and_energy(&m, &SplitDistribution::coordinate(1, 3), &q, 1.0),
        Err(ricci_forge_core::Error::BoundUndefined(_))
    ));
}

#[test]
fn directional_sigma2_monte_carlo() {
    let m = warped(2, 3);
    let d = SplitDistribution::tilted(2, 3, vec![0.2, 0.0, -0.1, 0.3, 0.0, 0.1]).unwrap();
    let ext = extrinsic_pack(&m, &d, &[0.4, 1.0, 2.0, 3.0, 5.0]).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let (s1, s2) = sigma2_directional(&ext, 10_000, &mut rng);
    let exact1: f64 = ext.c1.iter().map(sigma2).sum();
    let exact2: f64 = ext.c2.iter().map(sigma2).sum();
    let scale = 1.0 + ext.bending_density();
    assert!((s1 - exact1).abs() <= 1e-2 * scale, "{s1} vs {exact1}");
    assert!((s2 - exact2).abs() <= 1e-2 * scale, "{s2} vs {exact2}");
}
