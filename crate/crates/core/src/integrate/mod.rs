//! Stiff time integration of `M u' = f(u)` with the three-stage Radau IIA
//! method (order 5), simplified Newton on the real-transformed stage system
//! and an embedded error estimate with a predictive step-size controller.

mod radau;

use std::io::Write;
use std::path::Path;

pub use radau::{Radau5, StepAttempt, RADAU_A, RADAU_C};

use crate::error::{Error, Result};
use crate::fem::{cutoff_in_place, Discretization};
use crate::sparse::CsrMatrix;

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Deserialize, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum JacobianMode {
    /// Full derivative of `-A(u) u`, including the weight `(u^h)^m`.
    Analytic,
    /// Picard linearisation `-A(u)`.
    Lagged,
}

#[derive(Clone, Copy, Debug, PartialEq, serde::Deserialize, serde::Serialize)]
#[serde(default)]
pub struct IntegratorConfig {
    pub rtol: f64,
    pub atol: f64,
    pub dt_init: f64,
    pub dt_min: f64,
    pub dt_max: f64,
    /// Newton stopping threshold on the contraction-weighted scaled increment.
    pub newton_tol: f64,
    pub newton_max_iters: usize,
    pub jacobian_mode: JacobianMode,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        IntegratorConfig {
            rtol: 1e-6,
            atol: 1e-8,
            dt_init: 1e-5,
            dt_min: 1e-14,
            dt_max: f64::INFINITY,
            newton_tol: 3e-3,
            newton_max_iters: 7,
            jacobian_mode: JacobianMode::Analytic,
        }
    }
}

impl IntegratorConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidArgument(msg));
        if !(self.rtol > 0.0 && self.atol > 0.0) {
            return bad(format!(
                "tolerances must be positive (rtol {}, atol {})",
                self.rtol, self.atol
            ));
        }
        if !(self.dt_min > 0.0 && self.dt_min <= self.dt_init && self.dt_init <= self.dt_max) {
            return bad(format!(
                "need 0 < dt_min <= dt_init <= dt_max, got {} {} {}",
                self.dt_min, self.dt_init, self.dt_max
            ));
        }
        if self.newton_max_iters == 0 || !(self.newton_tol > 0.0) {
            return bad("newton_max_iters and newton_tol must be positive".into());
        }
        Ok(())
    }
}

/// Semi-discrete system `M y' = f(y)` with a constant (possibly singular)
/// mass matrix sharing its pattern with the Jacobian.
pub trait OdeSystem {
    fn dim(&self) -> usize;
    fn mass(&self) -> &CsrMatrix;
    fn rhs(&self, y: &[f64], out: &mut [f64]);
    fn jacobian(&self, y: &[f64], mode: JacobianMode) -> CsrMatrix;
    /// Hook applied to every accepted step; returns the number of modified entries.
    fn post_step(&self, _y: &mut [f64]) -> usize {
        0
    }
}

/// `M u' = -A(u) u` on one mesh, with cut-off after each accepted step.
pub struct OdeRightHandSide {
    disc: Discretization,
    mass: CsrMatrix,
    pub cutoff: bool,
}

impl OdeRightHandSide {
    pub fn new(disc: Discretization) -> Self {
        let mass = disc.mass();
        OdeRightHandSide {
            disc,
            mass,
            cutoff: true,
        }
    }

    pub fn discretization(&self) -> &Discretization {
        &self.disc
    }
}

impl OdeSystem for OdeRightHandSide {
    fn dim(&self) -> usize {
        self.disc.dim()
    }

    fn mass(&self) -> &CsrMatrix {
        &self.mass
    }

    fn rhs(&self, y: &[f64], out: &mut [f64]) {
        self.disc.rhs(y, out)
    }

    fn jacobian(&self, y: &[f64], mode: JacobianMode) -> CsrMatrix {
        self.disc.jacobian(y, mode == JacobianMode::Analytic)
    }

    fn post_step(&self, y: &mut [f64]) -> usize {
        // the boundary rows are algebraic (0 = -u_j); remove solver round-off
        for (v, &b) in y.iter_mut().zip(self.disc.boundary()) {
            if b {
                *v = 0.0;
            }
        }
        if self.cutoff {
            cutoff_in_place(y)
        } else {
            0
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepRecord {
    pub t: f64,
    pub dt: f64,
    pub newton_iters: usize,
    pub error_estimate: f64,
    pub accepted: bool,
    pub clipped_nodes: usize,
}

#[derive(Clone, Debug, Default)]
pub struct IntervalReport {
    pub steps: Vec<StepRecord>,
    pub accepted: usize,
    pub rejected: usize,
    /// Step size the controller proposes for the next interval.
    pub next_dt: f64,
}

/// Advances `y` from `t_a` to exactly `t_b`.
pub fn integrate_interval<S: OdeSystem>(
    sys: &S,
    y: &mut [f64],
    t_a: f64,
    t_b: f64,
    cfg: &IntegratorConfig,
) -> Result<IntervalReport> {
    cfg.validate()?;
    if !(t_b > t_a) {
        return Err(Error::InvalidArgument(format!("empty time span [{t_a}, {t_b}]")));
    }
    if y.len() != sys.dim() {
        return Err(Error::SizeMismatch {
            expected: sys.dim(),
            got: y.len(),
        });
    }
    let mut solver = Radau5::new(sys, *cfg)?;
    solver.integrate(y, t_a, t_b)
}

pub fn write_steps_csv(path: impl AsRef<Path>, steps: &[StepRecord]) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::from("t,dt,newton_iters,error_estimate,accepted,clipped_nodes\n");
    for s in steps {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            s.t, s.dt, s.newton_iters, s.error_estimate, s.accepted as u8, s.clipped_nodes
        ));
    }
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(out.as_bytes()).map_err(|e| Error::io(path, e))
}
