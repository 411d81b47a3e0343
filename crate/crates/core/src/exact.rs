//! Barenblatt–Pattle solutions of the isotropic and anisotropic porous medium
//! equation, used as initial data and as the reference for error measurement.

use crate::error::{Error, Result};
use crate::linalg::{inv_sqrt_spd, inverse, is_spd, Mat2, Point, Vec2};

/// Self-similar profile parameters. `t0` and `beta` are derived from `m`, `r0`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BarenblattParams {
    pub m: f64,
    pub d: usize,
    pub r0: f64,
    pub t0: f64,
    pub beta: f64,
}

impl BarenblattParams {
    pub fn new(m: f64, r0: f64) -> Result<Self> {
        if !(m >= 1.0) || !m.is_finite() {
            return Err(Error::InvalidArgument(format!("exponent m must be >= 1, got {m}")));
        }
        if !(r0 > 0.0) || !r0.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "support radius r0 must be > 0, got {r0}"
            )));
        }
        let d = 2;
        let beta = 1.0 / (d as f64 * m + 2.0);
        let t0 = 0.5 * beta * m * r0 * r0;
        Ok(BarenblattParams { m, d, r0, t0, beta })
    }

    /// Self-similar stretch factor `(t / t0)^beta`.
    pub fn kappa(&self, t: f64) -> f64 {
        (t / self.t0).powf(self.beta)
    }

    fn check_time(&self, t: f64) -> Result<()> {
        if t < self.t0 || !t.is_finite() {
            Err(Error::InvalidTime { t, t0: self.t0 })
        } else {
            Ok(())
        }
    }

    /// Profile as a function of the squared (computational) radius.
    fn profile(&self, rho2: f64, t: f64) -> f64 {
        let kappa = self.kappa(t);
        let s = 1.0 - rho2 / (self.r0 * self.r0 * kappa * kappa);
        if s <= 0.0 {
            0.0
        } else {
            kappa.powi(-(self.d as i32)) * s.powf(1.0 / self.m)
        }
    }
}

/// Isotropic solution at time `t >= t0`.
pub fn pme_solution(p: &BarenblattParams, x: &Point, t: f64) -> Result<f64> {
    p.check_time(t)?;
    Ok(p.profile(x.coords.norm_squared(), t))
}

/// Circular initial data of radius `r0`.
pub fn pme_initial(p: &BarenblattParams, x: &Point) -> f64 {
    p.profile(x.coords.norm_squared(), p.t0)
}

/// Anisotropic solution for a constant diffusion matrix, obtained from the
/// isotropic one through `x ↦ D^{-1/2} x`.
#[derive(Clone, Copy, Debug)]
pub struct AnisotropicExact {
    pub params: BarenblattParams,
    pub d: Mat2,
    pub d_inv: Mat2,
    pub d_inv_sqrt: Mat2,
}

impl AnisotropicExact {
    pub fn new(params: BarenblattParams, d: Mat2) -> Result<Self> {
        if !is_spd(&d) {
            return Err(Error::NotSpd);
        }
        let d_inv = inverse(&d).ok_or(Error::NotSpd)?;
        Ok(AnisotropicExact {
            params,
            d,
            d_inv,
            d_inv_sqrt: inv_sqrt_spd(&d),
        })
    }

    fn quad(&self, x: &Point) -> f64 {
        x.coords.dot(&(self.d_inv * x.coords))
    }

    /// Semi-axes of the support ellipse at time `t`, largest first, with
    /// their unit directions.
    pub fn support_axes(&self, t: f64) -> [(f64, Vec2); 2] {
        let e = crate::linalg::SymEigen::new(&self.d);
        let rk = self.params.r0 * self.params.kappa(t);
        [
            (rk * e.values[1].sqrt(), e.vectors.column(1).into_owned()),
            (rk * e.values[0].sqrt(), e.vectors.column(0).into_owned()),
        ]
    }

    /// Whether `x` lies strictly inside the support at time `t`.
    pub fn in_support(&self, x: &Point, t: f64) -> bool {
        let rk = self.params.r0 * self.params.kappa(t);
        self.quad(x) < rk * rk
    }
}

pub fn apme_solution(e: &AnisotropicExact, x: &Point, t: f64) -> Result<f64> {
    e.params.check_time(t)?;
    Ok(e.params.profile(e.quad(x), t))
}

/// Elliptic initial data; equals [`apme_solution`] at `t0`.
pub fn apme_initial(e: &AnisotropicExact, x: &Point) -> f64 {
    e.params.profile(e.quad(x), e.params.t0)
}

/// `|u_t - div(u^m D grad u)|` of an arbitrary field `u(x, t)` by nested
/// second-order central differences.
///
/// Space uses step `h`; time uses the parabolic step `h²` so the spatial
/// truncation error dominates and the residual converges at order two in `h`.
pub fn fd_residual(u: impl Fn(&Point, f64) -> f64, m: f64, d: &Mat2, x: &Point, t: f64, h: f64) -> f64 {
    let ht = h * h;
    let u_t = (u(x, t + ht) - u(x, t - ht)) / (2.0 * ht);
    let ex = Vec2::new(h, 0.0);
    let ey = Vec2::new(0.0, h);
    let flux = |y: Point| -> Vec2 {
        let gx = (u(&(y + ex), t) - u(&(y - ex), t)) / (2.0 * h);
        let gy = (u(&(y + ey), t) - u(&(y - ey), t)) / (2.0 * h);
        let w = u(&y, t).max(0.0).powf(m);
        w * (d * Vec2::new(gx, gy))
    };
    let div = (flux(x + ex).x - flux(x - ex).x) / (2.0 * h) + (flux(x + ey).y - flux(x - ey).y) / (2.0 * h);
    (u_t - div).abs()
}

/// Finite-difference residual of the anisotropic solution at an interior
/// point of its support.
pub fn residual_check(e: &AnisotropicExact, x: &Point, t: f64, h: f64) -> Result<f64> {
    if !(h > 0.0) {
        return Err(Error::InvalidArgument(format!("FD step must be positive, got {h}")));
    }
    let ht = h * h;
    e.params.check_time(t - ht)?;
    // the 4h ball around x must stay inside the (smallest) support on the stencil
    let reach = 4.0 * h * crate::linalg::spectral_norm(&e.d_inv_sqrt);
    let radius = (e.quad(x)).sqrt() + reach;
    let rk = e.params.r0 * e.params.kappa(t - ht);
    if radius >= rk {
        return Err(Error::StencilOutsideSupport { x: x.x, y: x.y });
    }
    Ok(fd_residual(
        |y, s| e.params.profile(e.quad(y), s),
        e.params.m,
        &e.d,
        x,
        t,
        h,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn ex1() -> AnisotropicExact {
        AnisotropicExact::new(BarenblattParams::new(1.0, 0.5).unwrap(), Mat2::new(5.5, 4.5, 4.5, 5.5)).unwrap()
    }

    #[test]
    fn start_time_of_example_one() {
        let p = BarenblattParams::new(1.0, 0.5).unwrap();
        assert_relative_eq!(p.t0, 0.03125, epsilon = 1e-16);
        assert_relative_eq!(p.beta, 0.25);
    }

    #[test]
    fn center_values() {
        let p = BarenblattParams::new(1.0, 0.5).unwrap();
        assert_relative_eq!(pme_solution(&p, &Point::origin(), p.t0).unwrap(), 1.0);
        // kappa = 16^(1/4) = 2
        assert_relative_eq!(
            pme_solution(&p, &Point::origin(), 16.0 * p.t0).unwrap(),
            0.25,
            epsilon = 1e-15
        );
        let e = ex1();
        for t in [p.t0, 0.07, 0.2] {
            let k = p.kappa(t);
            assert_relative_eq!(apme_solution(&e, &Point::origin(), t).unwrap(), k.powi(-2));
        }
    }

    #[test]
    fn early_time_rejected() {
        let p = BarenblattParams::new(1.0, 0.5).unwrap();
        assert!(matches!(
            pme_solution(&p, &Point::origin(), 0.01),
            Err(Error::InvalidTime { .. })
        ));
    }

    #[test]
    fn identity_diffusion_matches_pme() {
        let p = BarenblattParams::new(2.0, 0.7).unwrap();
        let e = AnisotropicExact::new(p, Mat2::identity()).unwrap();
        for (x, y) in [(0.1, 0.2), (-0.5, 0.3), (0.9, 0.9), (0.0, 0.69)] {
            let q = Point::new(x, y);
            for t in [p.t0, 2.0 * p.t0, 5.0 * p.t0] {
                assert_relative_eq!(
                    apme_solution(&e, &q, t).unwrap(),
                    pme_solution(&p, &q, t).unwrap(),
                    epsilon = 1e-15
                );
            }
        }
    }

    #[test]
    fn initial_data_values() {
        let p = BarenblattParams::new(1.0, 0.5).unwrap();
        let e = AnisotropicExact::new(p, Mat2::identity()).unwrap();
        assert_relative_eq!(apme_initial(&e, &Point::new(0.25, 0.0)), 0.75);
        assert_eq!(pme_initial(&p, &Point::origin()), 1.0);
        assert_eq!(pme_initial(&p, &Point::new(0.5, 0.0)), 0.0);
        assert_eq!(pme_initial(&p, &Point::new(0.0, 0.8)), 0.0);
        let e1 = ex1();
        // on the support boundary along the major axis: x = r0 * sqrt(10) * v
        let [(a, v), _] = e1.support_axes(p.t0);
        assert!(apme_initial(&e1, &Point::from(a * v)).abs() < 1e-12);
    }

    #[test]
    fn support_ellipse_axis_ratio() {
        let e = ex1();
        let [(a, va), (b, _)] = e.support_axes(0.1);
        assert_relative_eq!(a / b, 10f64.sqrt(), max_relative = 1e-12);
        // major axis along the north-east diagonal
        assert_relative_eq!(va.x.abs(), va.y.abs(), epsilon = 1e-12);
    }

    #[test]
    fn non_spd_rejected() {
        let p = BarenblattParams::new(1.0, 0.5).unwrap();
        assert!(matches!(
            AnisotropicExact::new(p, Mat2::new(1.0, 2.0, 2.0, 1.0)),
            Err(Error::NotSpd)
        ));
    }

    #[test]
    fn change_of_variables() {
        let e = ex1();
        for (x, y) in [(0.3, 0.2), (-1.0, -0.8), (0.2, -0.1), (1.2, 1.3)] {
            let q = Point::new(x, y);
            let qt = Point::from(e.d_inv_sqrt * q.coords);
            for t in [e.params.t0, 0.05, 0.2] {
                assert_relative_eq!(
                    apme_solution(&e, &q, t).unwrap(),
                    pme_solution(&e.params, &qt, t).unwrap(),
                    epsilon = 1e-12
                );
            }
        }
    }

    #[test]
    fn residual_small_and_second_order() {
        let p = BarenblattParams::new(1.0, 0.5).unwrap();
        let e = AnisotropicExact::new(p, Mat2::identity()).unwrap();
        let t = 2.0 * p.t0;
        let x = Point::origin();
        let r1 = residual_check(&e, &x, t, 1e-3).unwrap();
        assert!(r1 < 1e-4, "residual {r1}");
        let x = Point::new(0.1, -0.05);
        let a = residual_check(&e, &x, t, 2e-3).unwrap();
        let b = residual_check(&e, &x, t, 1e-3).unwrap();
        let ratio = a / b;
        assert!((ratio - 4.0).abs() < 0.8, "ratio {ratio}");
    }

    #[test]
    fn constant_field_has_zero_residual() {
        let r = fd_residual(
            |_, _| 0.7,
            1.0,
            &Mat2::new(5.5, 4.5, 4.5, 5.5),
            &Point::new(0.1, 0.2),
            1.0,
            1e-3,
        );
        assert_eq!(r, 0.0);
    }

    #[test]
    fn stencil_outside_support_rejected() {
        let e = ex1();
        let r = residual_check(&e, &Point::new(3.0, -3.0), 2.0 * e.params.t0, 1e-3);
        assert!(matches!(r, Err(Error::StencilOutsideSupport { .. })));
    }
}
