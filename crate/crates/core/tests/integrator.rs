mod common;

use std::sync::Arc;

use apme::integrate::{integrate_interval, IntegratorConfig, JacobianMode, OdeSystem, Radau5, StepAttempt};
use apme::sparse::{CsrMatrix, SparsityPattern};

/// `y' = -y²`, exact solution `y0 / (1 + y0 t)`.
struct Riccati {
    mass: CsrMatrix,
}

impl Riccati {
    fn new() -> Self {
        let mut mass = CsrMatrix::zeros(Arc::new(SparsityPattern::from_rows(vec![vec![0]])));
        mass.set_identity_row(0);
        Riccati { mass }
    }
}

impl OdeSystem for Riccati {
    fn dim(&self) -> usize {
        1
    }
    fn mass(&self) -> &CsrMatrix {
        &self.mass
    }
    fn rhs(&self, y: &[f64], out: &mut [f64]) {
        out[0] = -y[0] * y[0];
    }
    fn jacobian(&self, y: &[f64], _mode: JacobianMode) -> CsrMatrix {
        let mut j = CsrMatrix::zeros(self.mass.pattern().clone());
        j.values_mut()[0] = -2.0 * y[0];
        j
    }
}

fn tight() -> IntegratorConfig {
    IntegratorConfig {
        rtol: 1e-13,
        atol: 1e-13,
        newton_tol: 1e-3,
        newton_max_iters: 30,
        ..Default::default()
    }
}

/// `y1' = y2, y2' = -y1`, exact solution `(cos t, -sin t)`.
struct Oscillator {
    mass: CsrMatrix,
    jac: CsrMatrix,
}

impl Oscillator {
    fn new() -> Self {
        let pattern = Arc::new(SparsityPattern::from_rows(vec![vec![0, 1], vec![0, 1]]));
        let mut mass = CsrMatrix::zeros(pattern.clone());
        mass.set_identity_row(0);
        mass.set_identity_row(1);
        let mut jac = CsrMatrix::zeros(pattern);
        jac.add(0, 1, 1.0);
        jac.add(1, 0, -1.0);
        Oscillator { mass, jac }
    }
}

impl OdeSystem for Oscillator {
    fn dim(&self) -> usize {
        2
    }
    fn mass(&self) -> &CsrMatrix {
        &self.mass
    }
    fn rhs(&self, y: &[f64], out: &mut [f64]) {
        self.jac.mul_vec(y, out);
    }
    fn jacobian(&self, _y: &[f64], _mode: JacobianMode) -> CsrMatrix {
        self.jac.clone()
    }
}

fn fixed_step_error(steps: usize) -> f64 {
    let sys = Oscillator::new();
    let mut solver = Radau5::new(&sys, tight()).unwrap();
    let mut y = vec![1.0, 0.0];
    let t_end = 4.0;
    let h = t_end / steps as f64;
    for k in 0..steps {
        match solver.attempt(&y, h, JacobianMode::Analytic, k == 0).unwrap() {
            StepAttempt::Converged { .. } => {
                solver.accept(&mut y, h);
            }
            StepAttempt::NewtonFailed { .. } => panic!("Newton failed at step {k}"),
        }
    }
    ((y[0] - t_end.cos()).powi(2) + (y[1] + t_end.sin()).powi(2)).sqrt()
}

#[test]
fn fixed_step_order_is_five() {
    let ns = [8usize, 16, 32, 64];
    let errors: Vec<f64> = ns.iter().map(|&n| fixed_step_error(n)).collect();
    let orders: Vec<f64> = errors.windows(2).map(|e| (e[0] / e[1]).log2()).collect();
    for o in &orders {
        assert!((o - 5.0).abs() <= 0.3, "orders {orders:?}, errors {errors:?}");
    }
}

#[test]
fn adaptive_interval_ends_exactly_and_meets_tolerance() {
    let sys = Riccati::new();
    let cfg = IntegratorConfig {
        rtol: 1e-8,
        atol: 1e-10,
        ..Default::default()
    };
    let mut y = vec![1.0];
    let report = integrate_interval(&sys, &mut y, 0.0, 10.0, &cfg).unwrap();
    assert!((y[0] - 1.0 / 11.0).abs() < 1e-7, "y(10) = {}", y[0]);
    let last = report.steps.iter().rfind(|s| s.accepted).unwrap();
    assert_eq!(last.t, 10.0);
    assert!(report.accepted < 200, "{} steps", report.accepted);
    assert!(report.next_dt > 0.0);
}

/// Two-component stiff linear system with an algebraic row, `M` singular.
struct Dae {
    mass: CsrMatrix,
    jac: CsrMatrix,
}

impl Dae {
    fn new() -> Self {
        let pattern = Arc::new(SparsityPattern::from_rows(vec![vec![0, 1], vec![0, 1]]));
        let mut mass = CsrMatrix::zeros(pattern.clone());
        mass.add(0, 0, 1.0);
        // y1' = -1000 (y1 - cos-free target) ; 0 = -y2
        let mut jac = CsrMatrix::zeros(pattern);
        jac.add(0, 0, -1000.0);
        jac.add(1, 1, -1.0);
        Dae { mass, jac }
    }
}

impl OdeSystem for Dae {
    fn dim(&self) -> usize {
        2
    }
    fn mass(&self) -> &CsrMatrix {
        &self.mass
    }
    fn rhs(&self, y: &[f64], out: &mut [f64]) {
        self.jac.mul_vec(y, out);
    }
    fn jacobian(&self, _y: &[f64], _mode: JacobianMode) -> CsrMatrix {
        self.jac.clone()
    }
}

#[test]
fn stiff_system_with_algebraic_row() {
    let sys = Dae::new();
    let mut y = vec![1.0, 0.0];
    let report = integrate_interval(&sys, &mut y, 0.0, 1.0, &IntegratorConfig::default()).unwrap();
    assert!(y[0].abs() < 1e-8 && y[1] == 0.0, "{y:?}");
    // L-stability: the stiff decay does not force tiny steps
    assert!(report.accepted < 100, "{} steps", report.accepted);
}

#[test]
fn rejects_bad_configuration() {
    let sys = Riccati::new();
    let mut y = vec![1.0];
    let bad = IntegratorConfig {
        rtol: -1.0,
        ..Default::default()
    };
    assert!(integrate_interval(&sys, &mut y, 0.0, 1.0, &bad).is_err());
    assert!(integrate_interval(&sys, &mut y, 1.0, 1.0, &IntegratorConfig::default()).is_err());
    assert!(integrate_interval(&sys, &mut [1.0, 2.0], 0.0, 1.0, &IntegratorConfig::default()).is_err());
}
