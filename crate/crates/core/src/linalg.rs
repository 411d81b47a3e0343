//! Closed-form helpers for symmetric 2x2 tensors.

use nalgebra::{Matrix2, Point2, Vector2};

pub type Mat2 = Matrix2<f64>;
pub type Vec2 = Vector2<f64>;
pub type Point = Point2<f64>;

/// Eigen-decomposition of a symmetric 2x2 matrix.
///
/// `values` are ascending; column `i` of `vectors` pairs with `values[i]`.
#[derive(Clone, Copy, Debug)]
pub struct SymEigen {
    pub values: [f64; 2],
    pub vectors: Mat2,
}

impl SymEigen {
    pub fn new(m: &Mat2) -> Self {
        let a = m[(0, 0)];
        let c = m[(1, 1)];
        let b = 0.5 * (m[(0, 1)] + m[(1, 0)]);
        let mean = 0.5 * (a + c);
        let half_diff = 0.5 * (a - c);
        let r = half_diff.hypot(b);
        // angle of the eigenvector belonging to the larger eigenvalue
        let theta = 0.5 * (2.0 * b).atan2(a - c);
        let (s, co) = theta.sin_cos();
        let vectors = Mat2::new(-s, co, co, s);
        SymEigen {
            values: [mean - r, mean + r],
            vectors,
        }
    }

    /// Rebuilds `Q f(Λ) Qᵀ`.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Mat2 {
        let q = &self.vectors;
        let d = Mat2::new(f(self.values[0]), 0.0, 0.0, f(self.values[1]));
        q * d * q.transpose()
    }

    pub fn min(&self) -> f64 {
        self.values[0]
    }

    pub fn max(&self) -> f64 {
        self.values[1]
    }
}

pub fn symmetrize(m: &Mat2) -> Mat2 {
    let off = 0.5 * (m[(0, 1)] + m[(1, 0)]);
    Mat2::new(m[(0, 0)], off, off, m[(1, 1)])
}

/// Spectral norm of an arbitrary 2x2 matrix.
pub fn spectral_norm(m: &Mat2) -> f64 {
    let ata = m.transpose() * m;
    SymEigen::new(&ata).max().max(0.0).sqrt()
}

pub fn is_spd(m: &Mat2) -> bool {
    let asym = (m[(0, 1)] - m[(1, 0)]).abs();
    let scale = m.abs().max();
    if !(scale.is_finite()) || asym > 1e-12 * scale.max(f64::MIN_POSITIVE) {
        return false;
    }
    SymEigen::new(m).min() > 0.0
}

/// `|H|`: eigenvalues replaced by their absolute values.
pub fn abs_sym(m: &Mat2) -> Mat2 {
    SymEigen::new(m).map(f64::abs)
}

pub fn inv_sqrt_spd(m: &Mat2) -> Mat2 {
    SymEigen::new(m).map(|l| 1.0 / l.sqrt())
}

pub fn sqrt_spd(m: &Mat2) -> Mat2 {
    SymEigen::new(m).map(f64::sqrt)
}

pub fn inverse(m: &Mat2) -> Option<Mat2> {
    let det = m.determinant();
    if det == 0.0 || !det.is_finite() {
        return None;
    }
    Some(Mat2::new(m[(1, 1)], -m[(0, 1)], -m[(1, 0)], m[(0, 0)]) / det)
}

pub fn rotation(theta: f64) -> Mat2 {
    let (s, c) = theta.sin_cos();
    Mat2::new(c, -s, s, c)
}
