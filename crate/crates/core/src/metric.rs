//! Diffusion fields, Hessian recovery, the three metric tensor constructions
//! and the equidistribution / alignment quality measures.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{abs_sym, inverse, is_spd, rotation, spectral_norm, symmetrize, Mat2, Point, SymEigen};
use crate::mesh::{element_geometry, Triangulation};
use crate::quadrature::{self, map_point};

/// Angle of the principal eigenvector as a function of position.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum AngleField {
    /// `amplitude * sin(kx * x) * cos(ky * y)`
    SinCos { amplitude: f64, kx: f64, ky: f64 },
}

impl AngleField {
    pub fn eval(&self, p: &Point) -> f64 {
        match *self {
            AngleField::SinCos { amplitude, kx, ky } => amplitude * (kx * p.x).sin() * (ky * p.y).cos(),
        }
    }
}

/// `x ↦ D(x)`, always symmetric positive definite.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum DiffusionField {
    Constant(Mat2),
    /// `R(θ(x)) diag(λ₁, λ₂) R(θ(x))ᵀ`
    Rotation {
        lambda: [f64; 2],
        angle: AngleField,
    },
}

impl DiffusionField {
    pub fn identity() -> Self {
        DiffusionField::Constant(Mat2::identity())
    }

    pub fn constant(d: Mat2) -> Result<Self> {
        if !is_spd(&d) {
            return Err(Error::NotSpd);
        }
        Ok(DiffusionField::Constant(d))
    }

    pub fn rotation(lambda: [f64; 2], angle: AngleField) -> Result<Self> {
        if !(lambda[0] > 0.0 && lambda[1] > 0.0) || !lambda.iter().all(|l| l.is_finite()) {
            return Err(Error::NotSpd);
        }
        Ok(DiffusionField::Rotation { lambda, angle })
    }

    /// Heterogeneous field with eigenvalues (50, 1) and `θ = π sin(0.2x) cos(0.1y)`.
    pub fn swirl() -> Self {
        DiffusionField::Rotation {
            lambda: [50.0, 1.0],
            angle: AngleField::SinCos {
                amplitude: std::f64::consts::PI,
                kx: 0.2,
                ky: 0.1,
            },
        }
    }

    pub fn eval(&self, p: &Point) -> Mat2 {
        match self {
            DiffusionField::Constant(d) => *d,
            DiffusionField::Rotation { lambda, angle } => {
                let r = rotation(angle.eval(p));
                let l = Mat2::new(lambda[0], 0.0, 0.0, lambda[1]);
                let d = r * l * r.transpose();
                crate::linalg::symmetrize(&d)
            }
        }
    }

    pub fn as_constant(&self) -> Option<Mat2> {
        match self {
            DiffusionField::Constant(d) => Some(*d),
            DiffusionField::Rotation { .. } => None,
        }
    }

    /// `D_K`: mean of `D` over the three-point rule on element `k`.
    pub fn element_average(&self, mesh: &Triangulation, k: usize) -> Mat2 {
        if let DiffusionField::Constant(d) = self {
            return *d;
        }
        let corners = mesh.corners(k);
        quadrature::order2()
            .iter()
            .map(|q| self.eval(&map_point(&corners, &q.bary)) * q.weight)
            .sum()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MetricKind {
    Identity,
    Adap,
    Dmp,
    DmpAdap,
}

/// Per-element SPD tensors with `σ_h = Σ_K det(M_K)^{1/2} |K|`.
#[derive(Clone, Debug)]
pub struct MetricField {
    pub tensors: Vec<Mat2>,
    pub sigma_h: f64,
    pub kind: MetricKind,
    pub alpha_h: f64,
}

impl MetricField {
    pub fn new(mesh: &Triangulation, tensors: Vec<Mat2>, kind: MetricKind, alpha_h: f64) -> Result<Self> {
        if tensors.len() != mesh.n_elements() {
            return Err(Error::SizeMismatch {
                expected: mesh.n_elements(),
                got: tensors.len(),
            });
        }
        if let Some(k) = tensors.iter().position(|m| !is_spd(m)) {
            log::error!("metric tensor on element {k} is not SPD: {:?}", tensors[k]);
            return Err(Error::NotSpd);
        }
        let sigma_h = tensors
            .iter()
            .enumerate()
            .map(|(k, m)| m.determinant().sqrt() * mesh.area(k))
            .sum();
        Ok(MetricField {
            tensors,
            sigma_h,
            kind,
            alpha_h,
        })
    }

    pub fn identity(mesh: &Triangulation) -> Self {
        MetricField {
            tensors: vec![Mat2::identity(); mesh.n_elements()],
            sigma_h: mesh.total_area(),
            kind: MetricKind::Identity,
            alpha_h: 0.0,
        }
    }

    /// Multiplies every tensor by `s > 0`; `σ_h` scales by `s^{d/2}`.
    pub fn scaled(&self, s: f64) -> MetricField {
        MetricField {
            tensors: self.tensors.iter().map(|m| m * s).collect(),
            sigma_h: self.sigma_h * s,
            kind: self.kind,
            alpha_h: self.alpha_h,
        }
    }

    /// Vertex tensors as the log-Euclidean mean `exp(mean log M_K)` of the
    /// incident element tensors. Unlike the arithmetic mean it does not
    /// inflate `det` when a tiny element with a huge tensor shares a vertex
    /// with large elements, so the vertex field keeps roughly the element
    /// field's `sigma_h`.
    pub fn vertex_tensors(&self, mesh: &Triangulation) -> Vec<Mat2> {
        let mut sum = vec![Mat2::zeros(); mesh.n_vertices()];
        let mut count = vec![0usize; mesh.n_vertices()];
        for (t, m) in mesh.triangles().iter().zip(&self.tensors) {
            let log = SymEigen::new(m).map(f64::ln);
            for &v in t {
                sum[v] += log;
                count[v] += 1;
            }
        }
        sum.into_iter()
            .zip(count)
            .map(|(s, c)| SymEigen::new(&symmetrize(&(s / c.max(1) as f64))).map(f64::exp))
            .collect()
    }
}

/// Nodal and element Hessians recovered from a piecewise-linear field.
#[derive(Clone, Debug)]
pub struct RecoveredHessian {
    pub nodal: Vec<Mat2>,
    pub elements: Vec<Mat2>,
}

impl RecoveredHessian {
    pub fn zeros(mesh: &Triangulation) -> Self {
        RecoveredHessian {
            nodal: vec![Mat2::zeros(); mesh.n_vertices()],
            elements: vec![Mat2::zeros(); mesh.n_elements()],
        }
    }
}

const RANK_TOL: f64 = 1e-8;

/// Hessian of a least-squares quadratic through the values on `patch`, or
/// `None` when the patch cannot determine a quadratic.
fn fit_quadratic(center: &Point, patch: &[usize], vertices: &[Point], values: &[f64]) -> Option<Mat2> {
    if patch.len() < 6 {
        return None;
    }
    let scale = patch.iter().map(|&j| (vertices[j] - center).norm()).fold(0.0, f64::max);
    if scale == 0.0 {
        return None;
    }
    let n = patch.len();
    let mut a = DMatrix::<f64>::zeros(n, 6);
    let mut b = DVector::<f64>::zeros(n);
    for (r, &j) in patch.iter().enumerate() {
        let d = (vertices[j] - center) / scale;
        let row = [1.0, d.x, d.y, d.x * d.x, d.x * d.y, d.y * d.y];
        for (c, v) in row.iter().enumerate() {
            a[(r, c)] = *v;
        }
        b[r] = values[j];
    }
    let svd = a.svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if !(smin > RANK_TOL * smax) {
        return None;
    }
    let c = svd.solve(&b, 0.0).ok()?;
    let s2 = scale * scale;
    Some(Mat2::new(2.0 * c[3], c[4], c[4], 2.0 * c[5]) / s2)
}

/// Per-vertex quadratic least-squares fit over the one-ring (grown to the
/// two-ring when the one-ring is too small or degenerate).
pub fn recover_hessian(mesh: &Triangulation, values: &[f64]) -> Result<RecoveredHessian> {
    if values.len() != mesh.n_vertices() {
        return Err(Error::SizeMismatch {
            expected: mesh.n_vertices(),
            got: values.len(),
        });
    }
    let adj = mesh.vertex_neighbors();
    let vertices = mesh.vertices();
    let mut nodal = Vec::with_capacity(mesh.n_vertices());
    let mut flat = 0usize;
    let mut mark = vec![usize::MAX; mesh.n_vertices()];
    for v in 0..mesh.n_vertices() {
        let mut patch = Vec::with_capacity(32);
        patch.push(v);
        mark[v] = v;
        for &j in &adj[v] {
            patch.push(j);
            mark[j] = v;
        }
        let mut h = fit_quadratic(&vertices[v], &patch, vertices, values);
        if h.is_none() {
            let ring = patch.len();
            for i in 1..ring {
                for &j in &adj[patch[i]] {
                    if mark[j] != v {
                        mark[j] = v;
                        patch.push(j);
                    }
                }
            }
            h = fit_quadratic(&vertices[v], &patch, vertices, values);
        }
        nodal.push(h.unwrap_or_else(|| {
            flat += 1;
            Mat2::zeros()
        }));
    }
    if flat > 0 {
        log::warn!("Hessian recovery: {flat} vertices with rank-deficient patches, set to zero");
    }
    let elements = mesh
        .triangles()
        .iter()
        .map(|t| (nodal[t[0]] + nodal[t[1]] + nodal[t[2]]) / 3.0)
        .collect();
    Ok(RecoveredHessian { nodal, elements })
}

/// `|H| = Q |Λ| Qᵀ`.
pub fn abs_matrix(h: &Mat2) -> Mat2 {
    abs_sym(h)
}

/// `‖B‖^{2/5} det(B)^{-1/5} B` with `B = I + |H_K| / α_h`.
pub fn metric_adap(mesh: &Triangulation, h: &RecoveredHessian, alpha_h: f64) -> Result<MetricField> {
    if !(alpha_h > 0.0) || !alpha_h.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "alpha_h must be positive, got {alpha_h}"
        )));
    }
    let tensors = h
        .elements
        .iter()
        .map(|hk| {
            let b = Mat2::identity() + abs_matrix(hk) / alpha_h;
            let norm = SymEigen::new(&b).max();
            b * (norm.powf(0.4) * b.determinant().powf(-0.2))
        })
        .collect();
    MetricField::new(mesh, tensors, MetricKind::Adap, alpha_h)
}

fn element_diffusion(mesh: &Triangulation, d: &DiffusionField) -> Result<Vec<(Mat2, Mat2)>> {
    (0..mesh.n_elements())
        .map(|k| {
            let dk = d.element_average(mesh, k);
            let inv = inverse(&dk).ok_or(Error::NotSpd)?;
            Ok((dk, crate::linalg::symmetrize(&inv)))
        })
        .collect()
}

/// `M_K = D_K⁻¹`.
pub fn metric_dmp(mesh: &Triangulation, d: &DiffusionField) -> Result<MetricField> {
    let tensors = element_diffusion(mesh, d)?.into_iter().map(|(_, inv)| inv).collect();
    MetricField::new(mesh, tensors, MetricKind::Dmp, 0.0)
}

/// Per-element `B_K = det(D_K)^{-1/2} ‖D_K⁻¹‖ ‖D_K |H_K|‖²`.
pub fn dmp_adap_weights(mesh: &Triangulation, d: &DiffusionField, h: &RecoveredHessian) -> Result<Vec<f64>> {
    Ok(element_diffusion(mesh, d)?
        .iter()
        .zip(&h.elements)
        .map(|((dk, inv), hk)| {
            let n = spectral_norm(&(dk * abs_matrix(hk)));
            dk.determinant().powf(-0.5) * spectral_norm(inv) * n * n
        })
        .collect())
}

/// `α_h = ((1/|Ω|) Σ_K |K| B_K^{1/2})²`.
pub fn dmp_adap_alpha(mesh: &Triangulation, weights: &[f64]) -> f64 {
    let s: f64 = weights.iter().enumerate().map(|(k, b)| mesh.area(k) * b.sqrt()).sum();
    let mean = s / mesh.total_area();
    mean * mean
}

/// `M_K = (1 + B_K/α_h)^{1/2} det(D_K)^{1/2} D_K⁻¹`; when every `B_K`
/// vanishes the prefactor is dropped.
pub fn metric_dmp_adap(mesh: &Triangulation, d: &DiffusionField, h: &RecoveredHessian) -> Result<MetricField> {
    let diff = element_diffusion(mesh, d)?;
    let weights = dmp_adap_weights(mesh, d, h)?;
    let alpha = dmp_adap_alpha(mesh, &weights);
    let tensors = diff
        .iter()
        .zip(&weights)
        .map(|((dk, inv), b)| {
            let pre = if alpha > 0.0 { (1.0 + b / alpha).sqrt() } else { 1.0 };
            inv * (pre * dk.determinant().sqrt())
        })
        .collect();
    MetricField::new(mesh, tensors, MetricKind::DmpAdap, alpha)
}

/// Which metric the adaptation loop builds from the current solution.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum MetricStrategy {
    Adap { alpha_h: f64 },
    Dmp,
    DmpAdap,
}

impl MetricStrategy {
    pub fn build(&self, mesh: &Triangulation, values: &[f64], d: &DiffusionField) -> Result<MetricField> {
        match *self {
            MetricStrategy::Adap { alpha_h } => metric_adap(mesh, &recover_hessian(mesh, values)?, alpha_h),
            MetricStrategy::Dmp => metric_dmp(mesh, d),
            MetricStrategy::DmpAdap => metric_dmp_adap(mesh, d, &recover_hessian(mesh, values)?),
        }
    }
}

/// `Q_ali` of a triangle with corners `p` under the tensor `m`; infinite for
/// inverted or degenerate triangles.
pub fn alignment_quality(p: &[Point; 3], m: &Mat2) -> f64 {
    match crate::mesh::triangle_geometry(0, p) {
        Ok(g) => alignment_from_jacobian(&g.jacobian, m),
        Err(_) => f64::INFINITY,
    }
}

fn alignment_from_jacobian(j: &Mat2, m: &Mat2) -> f64 {
    let g = j.transpose() * m * j;
    let det = g.determinant();
    if !(det > 0.0) {
        return f64::INFINITY;
    }
    // AM-GM; clamp the rounding-level undershoot for equilateral elements
    (0.5 * g.trace() / det.sqrt()).max(1.0)
}

#[derive(Clone, Debug)]
pub struct QualityMeasures {
    pub q_eq: Vec<f64>,
    pub q_ali: Vec<f64>,
}

impl QualityMeasures {
    pub fn mean_ali(&self) -> f64 {
        self.q_ali.iter().sum::<f64>() / self.q_ali.len().max(1) as f64
    }

    pub fn max_ali(&self) -> f64 {
        self.q_ali.iter().copied().fold(0.0, f64::max)
    }
}

/// `Q_eq = |K| det(M_K)^{1/2} N / σ_h` and `Q_ali` per element.
pub fn quality_measures(mesh: &Triangulation, metric: &MetricField) -> Result<QualityMeasures> {
    if metric.tensors.len() != mesh.n_elements() {
        return Err(Error::SizeMismatch {
            expected: mesh.n_elements(),
            got: metric.tensors.len(),
        });
    }
    if !(metric.sigma_h > 0.0) {
        return Err(Error::EmptyMetric);
    }
    let n = mesh.n_elements() as f64;
    let mut q_eq = Vec::with_capacity(mesh.n_elements());
    let mut q_ali = Vec::with_capacity(mesh.n_elements());
    for (k, m) in metric.tensors.iter().enumerate() {
        let g = element_geometry(mesh, k)?;
        q_eq.push(g.area * m.determinant().sqrt() * n / metric.sigma_h);
        q_ali.push(alignment_from_jacobian(&g.jacobian, m));
    }
    Ok(QualityMeasures { q_eq, q_ali })
}
