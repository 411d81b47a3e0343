mod common;

use apme::fem::{cutoff_in_place, cutoff_with_mass, total_mass, transfer, Discretization, SolutionField};
use apme::linalg::Mat2;
use apme::mesh::{generate_fixed_mesh, Rect};
use apme::metric::DiffusionField;
use proptest::prelude::*;
use rand::Rng;

/// Largest entry of `J - J_fd` relative to the largest entry of `J`.
fn jacobian_fd_mismatch(disc: &Discretization, u: &[f64]) -> f64 {
    let n = u.len();
    let jac = disc.jacobian(u, true).to_dense();
    let mut f_plus = vec![0.0; n];
    let mut f_minus = vec![0.0; n];
    let mut diff = 0.0f64;
    let mut scale = 0.0f64;
    for k in 0..n {
        let eps = 1e-6 * u[k].abs().max(1.0);
        let mut up = u.to_vec();
        let mut um = u.to_vec();
        up[k] += eps;
        um[k] -= eps;
        disc.rhs(&up, &mut f_plus);
        disc.rhs(&um, &mut f_minus);
        for i in 0..n {
            let fd = (f_plus[i] - f_minus[i]) / (2.0 * eps);
            diff = diff.max((fd - jac[i][k]).abs());
            scale = scale.max(jac[i][k].abs());
        }
    }
    diff / scale
}

#[test]
fn analytic_jacobian_matches_finite_differences_on_random_states() {
    let fields = [
        DiffusionField::constant(Mat2::new(5.5, 4.5, 4.5, 5.5)).unwrap(),
        DiffusionField::swirl(),
    ];
    let mut rng = common::rng(7);
    for (seed, field) in fields.iter().enumerate() {
        let mesh = common::jittered_mesh(Rect::square(3.0), 4, 0.2, seed as u64);
        assert!(mesh.n_vertices() <= 50);
        for m in [1.0, 2.5, 6.0] {
            let disc = Discretization::new(&mesh, field, m).unwrap();
            for _ in 0..5 {
                let u: Vec<f64> = (0..mesh.n_vertices()).map(|_| rng.random_range(0.05..1.0)).collect();
                let rel = jacobian_fd_mismatch(&disc, &u);
                assert!(rel <= 1e-5, "m = {m}: relative mismatch {rel:e}");
            }
        }
    }
}

#[test]
fn picard_jacobian_is_minus_stiffness() {
    let mesh = common::jittered_mesh(Rect::square(1.0), 3, 0.2, 3);
    let disc = Discretization::new(&mesh, &DiffusionField::swirl(), 2.0).unwrap();
    let u: Vec<f64> = (0..mesh.n_vertices()).map(|i| 0.1 + 0.05 * (i % 7) as f64).collect();
    let j = disc.jacobian(&u, false).to_dense();
    let a = disc.stiffness(&u).to_dense();
    for i in 0..u.len() {
        for k in 0..u.len() {
            assert!((j[i][k] + a[i][k]).abs() < 1e-14, "({i},{k})");
        }
    }
}

#[test]
fn interior_rhs_conserves_mass_when_boundary_is_zero() {
    // with zero boundary values the interior rows of A(u) u sum to zero,
    // so d/dt of the total mass vanishes
    let mesh = generate_fixed_mesh(Rect::square(3.0), 8, 8).unwrap();
    let disc = Discretization::new(&mesh, &DiffusionField::swirl(), 1.5).unwrap();
    let u = SolutionField::sample(&mesh, 0.0, |p| (1.0 - p.x * p.x - 0.5 * p.y * p.y).max(0.0));
    let mut f = vec![0.0; u.values.len()];
    disc.rhs(&u.values, &mut f);
    let total: f64 = f.iter().sum();
    let scale: f64 = f.iter().map(|v| v.abs()).sum();
    assert!(total.abs() <= 1e-12 * scale, "{total} vs {scale}");
}

#[test]
fn transfer_to_a_different_mesh_reproduces_linears() {
    let a = common::jittered_mesh(Rect::square(2.0), 6, 0.25, 11);
    let b = common::jittered_mesh(Rect::square(2.0), 9, 0.25, 12);
    let lin = |p: &apme::linalg::Point| 1.0 + 0.3 * p.x - 0.2 * p.y;
    let u = SolutionField::new(a.vertices().iter().map(lin).collect(), 0.0);
    let (v, report) = transfer(&a, &u, &b).unwrap();
    assert_eq!(report.projected, 0);
    for (i, (p, x)) in b.vertices().iter().zip(&v.values).enumerate() {
        let want = if b.is_boundary(i) { 0.0 } else { lin(p) };
        assert!((x - want).abs() < 1e-12, "vertex {i} at {p}: {x} vs {want}");
    }
}

proptest! {
    #[test]
    fn cutoff_is_nonnegative_and_idempotent(values in prop::collection::vec(-1.0f64..1.0, 1..200)) {
        let negatives = values.iter().filter(|v| **v < 0.0).count();
        let mut once = values.clone();
        prop_assert_eq!(cutoff_in_place(&mut once), negatives);
        prop_assert!(once.iter().all(|v| *v >= 0.0));
        for (a, b) in once.iter().zip(&values) {
            prop_assert!(*b < 0.0 || a == b);
        }
        let mut twice = once.clone();
        prop_assert_eq!(cutoff_in_place(&mut twice), 0);
        prop_assert_eq!(twice, once);
    }

    #[test]
    fn cutoff_never_removes_mass(seed in 0u64..1000) {
        let mesh = generate_fixed_mesh(Rect::square(1.0), 4, 4).unwrap();
        let mut rng = common::rng(seed);
        let u = SolutionField::new((0..mesh.n_vertices()).map(|_| rng.random_range(-0.5..1.0)).collect(), 0.0);
        let before = total_mass(&mesh, &u).unwrap();
        let (out, report) = cutoff_with_mass(&mesh, &u).unwrap();
        prop_assert!(report.mass_added >= 0.0);
        prop_assert!((total_mass(&mesh, &out).unwrap() - before - report.mass_added).abs() < 1e-12);
    }
}
