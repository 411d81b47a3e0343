//! Linear finite elements for `u_t = div(u^m D grad u)` with homogeneous
//! Dirichlet data.
//!
//! All `N_v` nodal values stay unknowns. Boundary rows of the mass matrix are
//! zero and boundary rows of the stiffness matrix are identity rows, so the
//! semi-discrete system `M u' + A(u) u = 0` pins boundary values at zero.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::linalg::{Mat2, Point, Vec2};
use crate::mesh::{element_geometry, locate_or_nearest, Triangulation};
use crate::metric::DiffusionField;
use crate::quadrature::{self, map_point};
use crate::sparse::{CsrMatrix, SparsityPattern};

/// Nodal values of `u^h` at time `time`. Lives on whatever mesh it was built
/// for; functions taking both check the length.
#[derive(Clone, Debug, PartialEq)]
pub struct SolutionField {
    pub values: Vec<f64>,
    pub time: f64,
}

impl SolutionField {
    pub fn new(values: Vec<f64>, time: f64) -> Self {
        SolutionField { values, time }
    }

    pub fn zeros(n: usize, time: f64) -> Self {
        SolutionField {
            values: vec![0.0; n],
            time,
        }
    }

    /// Samples `f` at the vertices; boundary vertices are set to zero.
    pub fn sample(mesh: &Triangulation, time: f64, f: impl Fn(&Point) -> f64) -> Self {
        let values = mesh
            .vertices()
            .iter()
            .enumerate()
            .map(|(i, p)| if mesh.is_boundary(i) { 0.0 } else { f(p) })
            .collect();
        SolutionField { values, time }
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    fn check(&self, mesh: &Triangulation) -> Result<()> {
        if self.values.len() != mesh.n_vertices() {
            return Err(Error::SizeMismatch {
                expected: mesh.n_vertices(),
                got: self.values.len(),
            });
        }
        Ok(())
    }
}

/// `(u^+)^m`, with integer exponents taken through `powi`.
#[inline]
pub(crate) fn pow_plus(u: f64, m: f64) -> f64 {
    if m == 0.0 {
        return 1.0;
    }
    if u <= 0.0 {
        return 0.0;
    }
    if m.fract() == 0.0 && m <= 32.0 {
        u.powi(m as i32)
    } else {
        u.powf(m)
    }
}

/// `d/du (u^+)^m`.
#[inline]
fn dpow_plus(u: f64, m: f64) -> f64 {
    if m == 0.0 || u <= 0.0 {
        0.0
    } else {
        m * pow_plus(u, m - 1.0)
    }
}

/// Per-element data reused across assemblies on one mesh: areas, basis
/// gradients and the diffusion tensor at the three quadrature nodes.
#[derive(Clone, Debug)]
pub struct ElementCache {
    triangles: Vec<[usize; 3]>,
    areas: Vec<f64>,
    gradients: Vec<[Vec2; 3]>,
    diffusion: Vec<[Mat2; 3]>,
}

impl ElementCache {
    pub fn new(mesh: &Triangulation, d: &DiffusionField) -> Result<Self> {
        let n = mesh.n_elements();
        let rule = quadrature::order2();
        let mut areas = Vec::with_capacity(n);
        let mut gradients = Vec::with_capacity(n);
        let mut diffusion = Vec::with_capacity(n);
        for k in 0..n {
            let g = element_geometry(mesh, k)?;
            areas.push(g.area);
            gradients.push(g.gradients);
            let corners = mesh.corners(k);
            diffusion.push(rule.map(|q| d.eval(&map_point(&corners, &q.bary))));
        }
        Ok(ElementCache {
            triangles: mesh.triangles().to_vec(),
            areas,
            gradients,
            diffusion,
        })
    }

    /// Local stiffness matrix of element `k` for nodal values `u`.
    fn local_stiffness(&self, k: usize, u: &[f64], m: f64) -> [[f64; 3]; 3] {
        let t = self.triangles[k];
        let g = &self.gradients[k];
        let rule = quadrature::order2();
        let mut dsum = Mat2::zeros();
        for (q, dq) in rule.iter().zip(&self.diffusion[k]) {
            let uq: f64 = (0..3).map(|i| q.bary[i] * u[t[i]]).sum();
            dsum += dq * (q.weight * pow_plus(uq, m));
        }
        dsum *= self.areas[k];
        let mut local = [[0.0; 3]; 3];
        for i in 0..3 {
            let dg = dsum * g[i];
            for j in 0..3 {
                local[j][i] = g[j].dot(&dg);
            }
        }
        local
    }

    /// Derivative of the local residual `A_K(u) u` with respect to the
    /// weight `(u^h)^m`, i.e. the `(dA/du) u` part of the Jacobian.
    fn local_weight_derivative(&self, k: usize, u: &[f64], m: f64) -> [[f64; 3]; 3] {
        let t = self.triangles[k];
        let g = &self.gradients[k];
        let grad_u = g[0] * u[t[0]] + g[1] * u[t[1]] + g[2] * u[t[2]];
        let rule = quadrature::order2();
        let mut local = [[0.0; 3]; 3];
        for (q, dq) in rule.iter().zip(&self.diffusion[k]) {
            let uq: f64 = (0..3).map(|i| q.bary[i] * u[t[i]]).sum();
            let dw = dpow_plus(uq, m);
            if dw == 0.0 {
                continue;
            }
            let flux = dq * grad_u;
            for i in 0..3 {
                let gi = g[i].dot(&flux) * q.weight * dw * self.areas[k];
                for kk in 0..3 {
                    local[i][kk] += gi * q.bary[kk];
                }
            }
        }
        local
    }
}

/// Spatial discretisation on one mesh: pattern, element cache, boundary
/// flags, exponent `m`.
#[derive(Clone, Debug)]
pub struct Discretization {
    pattern: Arc<SparsityPattern>,
    cache: ElementCache,
    boundary: Vec<bool>,
    m: f64,
}

impl Discretization {
    pub fn new(mesh: &Triangulation, d: &DiffusionField, m: f64) -> Result<Self> {
        if !(m >= 0.0) {
            return Err(Error::InvalidArgument(format!("exponent m must be >= 0, got {m}")));
        }
        Ok(Discretization {
            pattern: Arc::new(SparsityPattern::from_mesh(mesh)),
            cache: ElementCache::new(mesh, d)?,
            boundary: mesh.boundary_flags().to_vec(),
            m,
        })
    }

    pub fn pattern(&self) -> &Arc<SparsityPattern> {
        &self.pattern
    }

    pub fn dim(&self) -> usize {
        self.boundary.len()
    }

    pub fn exponent(&self) -> f64 {
        self.m
    }

    pub fn boundary(&self) -> &[bool] {
        &self.boundary
    }

    /// Consistent mass matrix, `|K|/12 (1 + δ_ij)` per element, zero boundary rows.
    pub fn mass(&self) -> CsrMatrix {
        let mut mass = CsrMatrix::zeros(self.pattern.clone());
        for (k, t) in self.cache.triangles.iter().enumerate() {
            let a = self.cache.areas[k];
            for (li, &i) in t.iter().enumerate() {
                if self.boundary[i] {
                    continue;
                }
                for (lj, &j) in t.iter().enumerate() {
                    mass.add(i, j, if li == lj { a / 6.0 } else { a / 12.0 });
                }
            }
        }
        mass
    }

    /// `A(u)` with identity rows at boundary vertices.
    pub fn stiffness(&self, u: &[f64]) -> CsrMatrix {
        let mut a = CsrMatrix::zeros(self.pattern.clone());
        for (k, t) in self.cache.triangles.iter().enumerate() {
            let local = self.cache.local_stiffness(k, u, self.m);
            for (li, &i) in t.iter().enumerate() {
                if self.boundary[i] {
                    continue;
                }
                for (lj, &j) in t.iter().enumerate() {
                    a.add(i, j, local[li][lj]);
                }
            }
        }
        for (i, &b) in self.boundary.iter().enumerate() {
            if b {
                a.set_identity_row(i);
            }
        }
        a
    }

    /// `f(u) = -A(u) u`, assembled element by element.
    pub fn rhs(&self, u: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        for (k, t) in self.cache.triangles.iter().enumerate() {
            let local = self.cache.local_stiffness(k, u, self.m);
            for (li, &i) in t.iter().enumerate() {
                if self.boundary[i] {
                    continue;
                }
                let mut s = 0.0;
                for (lj, &j) in t.iter().enumerate() {
                    s += local[li][lj] * u[j];
                }
                out[i] -= s;
            }
        }
        for (i, &b) in self.boundary.iter().enumerate() {
            if b {
                out[i] = -u[i];
            }
        }
    }

    /// Jacobian of `f(u) = -A(u) u`. With `full == false` the derivative of the
    /// weight `(u^h)^m` is dropped (Picard linearisation, `-A(u)`).
    pub fn jacobian(&self, u: &[f64], full: bool) -> CsrMatrix {
        let mut jac = CsrMatrix::zeros(self.pattern.clone());
        for (k, t) in self.cache.triangles.iter().enumerate() {
            let mut local = self.cache.local_stiffness(k, u, self.m);
            if full {
                let extra = self.cache.local_weight_derivative(k, u, self.m);
                for i in 0..3 {
                    for j in 0..3 {
                        local[i][j] += extra[i][j];
                    }
                }
            }
            for (li, &i) in t.iter().enumerate() {
                if self.boundary[i] {
                    continue;
                }
                for (lj, &j) in t.iter().enumerate() {
                    jac.add(i, j, -local[li][lj]);
                }
            }
        }
        for (i, &b) in self.boundary.iter().enumerate() {
            if b {
                jac.set_identity_row(i);
                let p = jac.pattern().find(i, i).expect("diagonal");
                jac.values_mut()[p] = -1.0;
            }
        }
        jac
    }
}

pub fn assemble_mass(mesh: &Triangulation) -> Result<CsrMatrix> {
    Ok(Discretization::new(mesh, &DiffusionField::identity(), 0.0)?.mass())
}

pub fn assemble_stiffness(mesh: &Triangulation, u: &SolutionField, d: &DiffusionField, m: f64) -> Result<CsrMatrix> {
    u.check(mesh)?;
    Ok(Discretization::new(mesh, d, m)?.stiffness(&u.values))
}

/// `‖u^h - reference‖_{L²}` with the seven-point quintic rule per element.
pub fn l2_error(mesh: &Triangulation, u: &SolutionField, reference: impl Fn(&Point) -> f64) -> Result<f64> {
    u.check(mesh)?;
    let rule = quadrature::order5();
    let mut sum = 0.0;
    for (k, t) in mesh.triangles().iter().enumerate() {
        let corners = mesh.corners(k);
        let area = mesh.area(k);
        let mut local = 0.0;
        for q in &rule {
            let uh: f64 = (0..3).map(|i| q.bary[i] * u.values[t[i]]).sum();
            let e = uh - reference(&map_point(&corners, &q.bary));
            local += q.weight * e * e;
        }
        sum += area * local;
    }
    Ok(sum.sqrt())
}

/// Exact integral of the piecewise-linear `u^h`.
pub fn total_mass(mesh: &Triangulation, u: &SolutionField) -> Result<f64> {
    u.check(mesh)?;
    Ok(mesh
        .triangles()
        .iter()
        .enumerate()
        .map(|(k, t)| mesh.area(k) * (u.values[t[0]] + u.values[t[1]] + u.values[t[2]]) / 3.0)
        .sum())
}

/// Clamps negative nodal values to zero; returns the number clipped.
pub fn cutoff_in_place(values: &mut [f64]) -> usize {
    let mut clipped = 0;
    for v in values.iter_mut() {
        if *v < 0.0 {
            *v = 0.0;
            clipped += 1;
        }
    }
    clipped
}

pub fn cutoff(u: &SolutionField) -> (SolutionField, usize) {
    let mut out = u.clone();
    let clipped = cutoff_in_place(&mut out.values);
    (out, clipped)
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct CutoffReport {
    pub clipped: usize,
    pub mass_added: f64,
}

pub fn cutoff_with_mass(mesh: &Triangulation, u: &SolutionField) -> Result<(SolutionField, CutoffReport)> {
    let before = total_mass(mesh, u)?;
    let (out, clipped) = cutoff(u);
    let after = total_mass(mesh, &out)?;
    Ok((
        out,
        CutoffReport {
            clipped,
            mass_added: after - before,
        },
    ))
}

#[derive(Clone, Copy, Debug)]
pub struct TransferOptions {
    pub zero_boundary: bool,
    pub cutoff: bool,
}

impl Default for TransferOptions {
    fn default() -> Self {
        TransferOptions {
            zero_boundary: true,
            cutoff: true,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct TransferReport {
    /// New vertices that fell outside the old mesh and were projected.
    pub projected: usize,
    pub clipped: usize,
}

/// Linear interpolation of `u_old` onto the vertices of `mesh_new`.
pub fn transfer(
    mesh_old: &Triangulation,
    u_old: &SolutionField,
    mesh_new: &Triangulation,
) -> Result<(SolutionField, TransferReport)> {
    transfer_with(mesh_old, u_old, mesh_new, TransferOptions::default())
}

pub fn transfer_with(
    mesh_old: &Triangulation,
    u_old: &SolutionField,
    mesh_new: &Triangulation,
    opts: TransferOptions,
) -> Result<(SolutionField, TransferReport)> {
    u_old.check(mesh_old)?;
    let mut report = TransferReport::default();
    let mut values = Vec::with_capacity(mesh_new.n_vertices());
    let mut hint = None;
    for (i, p) in mesh_new.vertices().iter().enumerate() {
        if opts.zero_boundary && mesh_new.is_boundary(i) {
            values.push(0.0);
            continue;
        }
        let (loc, projected) = locate_or_nearest(mesh_old, p, hint);
        if projected {
            log::warn!("transfer: vertex {i} at ({}, {}) projected onto old mesh", p.x, p.y);
            report.projected += 1;
        }
        hint = Some(loc.element);
        values.push(mesh_old.interpolate(&u_old.values, &loc));
    }
    if opts.cutoff {
        report.clipped = cutoff_in_place(&mut values);
    }
    Ok((SolutionField::new(values, u_old.time), report))
}
