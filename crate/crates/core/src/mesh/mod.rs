//! Conforming 2D triangulations of a rectangle.
//!
//! Storage is flat and index based. Adjacency (edges, triangle neighbours,
//! boundary flags) is derived from the vertex/triangle arrays whenever a
//! [`Triangulation`] is constructed, so every mesh handed around the crate
//! has already passed the orientation and conformity checks.

mod locate;
pub mod vtk;

pub use locate::{locate_or_nearest, locate_point, Location};

use crate::error::{Error, Result};
use crate::linalg::{Mat2, Point, Vec2};

/// Side of the rectangle hit by a boundary vertex, as a bit mask.
pub const SIDE_X_MIN: u8 = 1;
pub const SIDE_X_MAX: u8 = 2;
pub const SIDE_Y_MIN: u8 = 4;
pub const SIDE_Y_MAX: u8 = 8;

#[derive(Clone, Copy, Debug, PartialEq, serde::Deserialize, serde::Serialize)]
pub struct Rect {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl Rect {
    pub fn new(x_min: f64, x_max: f64, y_min: f64, y_max: f64) -> Result<Self> {
        if !(x_min < x_max && y_min < y_max) {
            return Err(Error::InvalidArgument(format!(
                "empty rectangle [{x_min}, {x_max}] x [{y_min}, {y_max}]"
            )));
        }
        Ok(Rect {
            x_min,
            x_max,
            y_min,
            y_max,
        })
    }

    pub fn square(half_width: f64) -> Self {
        Rect {
            x_min: -half_width,
            x_max: half_width,
            y_min: -half_width,
            y_max: half_width,
        }
    }

    pub fn width(&self) -> f64 {
        self.x_max - self.x_min
    }

    pub fn height(&self) -> f64 {
        self.y_max - self.y_min
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    pub fn diameter(&self) -> f64 {
        self.width().hypot(self.height())
    }

    /// Length tolerance used for boundary classification and point location.
    pub fn tolerance(&self) -> f64 {
        1e-10 * self.diameter()
    }

    /// Bit mask of the sides `p` lies on (0 for interior points).
    pub fn side_mask(&self, p: &Point) -> u8 {
        let tol = self.tolerance();
        let mut mask = 0;
        if (p.x - self.x_min).abs() <= tol {
            mask |= SIDE_X_MIN;
        }
        if (p.x - self.x_max).abs() <= tol {
            mask |= SIDE_X_MAX;
        }
        if (p.y - self.y_min).abs() <= tol {
            mask |= SIDE_Y_MIN;
        }
        if (p.y - self.y_max).abs() <= tol {
            mask |= SIDE_Y_MAX;
        }
        mask
    }

    pub fn contains(&self, p: &Point, tol: f64) -> bool {
        p.x >= self.x_min - tol && p.x <= self.x_max + tol && p.y >= self.y_min - tol && p.y <= self.y_max + tol
    }

    fn bounding(points: &[Point]) -> Result<Self> {
        let mut r = Rect {
            x_min: f64::INFINITY,
            x_max: f64::NEG_INFINITY,
            y_min: f64::INFINITY,
            y_max: f64::NEG_INFINITY,
        };
        for p in points {
            r.x_min = r.x_min.min(p.x);
            r.x_max = r.x_max.max(p.x);
            r.y_min = r.y_min.min(p.y);
            r.y_max = r.y_max.max(p.y);
        }
        Rect::new(r.x_min, r.x_max, r.y_min, r.y_max)
    }
}

/// An undirected mesh edge with its one or two incident triangles.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Edge {
    /// Endpoints, `v[0] < v[1]`.
    pub v: [usize; 2],
    pub left: usize,
    /// `None` for edges on the domain boundary.
    pub right: Option<usize>,
}

impl Edge {
    pub fn is_boundary(&self) -> bool {
        self.right.is_none()
    }
}

#[derive(Clone, Debug)]
pub struct Triangulation {
    vertices: Vec<Point>,
    triangles: Vec<[usize; 3]>,
    boundary: Vec<bool>,
    edges: Vec<Edge>,
    /// `neighbors[k][i]` is the triangle across the edge opposite local vertex `i`.
    neighbors: Vec<[Option<usize>; 3]>,
    domain: Rect,
}

/// Affine geometry of one element.
#[derive(Clone, Copy, Debug)]
pub struct ElementGeometry {
    pub index: usize,
    pub area: f64,
    /// Jacobian of the affine map from the equilateral unit-area reference triangle.
    pub jacobian: Mat2,
    /// Constant gradients of the three linear basis functions.
    pub gradients: [Vec2; 3],
}

/// Side length of the equilateral triangle of unit area.
pub fn reference_side() -> f64 {
    (4.0 / 3.0f64.sqrt()).sqrt()
}

/// Edge matrix `[v1 - v0, v2 - v0]` of the reference element.
fn reference_edges() -> Mat2 {
    let s = reference_side();
    Mat2::new(s, 0.5 * s, 0.0, 0.5 * 3.0f64.sqrt() * s)
}

pub fn signed_area(a: &Point, b: &Point, c: &Point) -> f64 {
    0.5 * ((b.x - a.x) * (c.y - a.y) - (c.x - a.x) * (b.y - a.y))
}

impl Triangulation {
    /// Builds a triangulation whose domain is the bounding box of `vertices`.
    pub fn new(vertices: Vec<Point>, triangles: Vec<[usize; 3]>) -> Result<Self> {
        let domain = Rect::bounding(&vertices)?;
        Self::with_domain(vertices, triangles, domain)
    }

    pub fn with_domain(vertices: Vec<Point>, triangles: Vec<[usize; 3]>, domain: Rect) -> Result<Self> {
        let nv = vertices.len();
        for (k, t) in triangles.iter().enumerate() {
            if t.iter().any(|&v| v >= nv) {
                return Err(Error::InvalidArgument(format!(
                    "triangle {k} references a missing vertex"
                )));
            }
            if t[0] == t[1] || t[1] == t[2] || t[0] == t[2] {
                return Err(Error::DegenerateElement(k));
            }
            let a = signed_area(&vertices[t[0]], &vertices[t[1]], &vertices[t[2]]);
            if !(a > 0.0) {
                return Err(Error::DegenerateElement(k));
            }
        }

        // (a, b, triangle, local index of the opposite vertex), sorted by edge
        let mut half: Vec<(usize, usize, usize, usize)> = Vec::with_capacity(3 * triangles.len());
        for (k, t) in triangles.iter().enumerate() {
            for i in 0..3 {
                let a = t[(i + 1) % 3];
                let b = t[(i + 2) % 3];
                half.push((a.min(b), a.max(b), k, i));
            }
        }
        half.sort_unstable();

        let mut edges = Vec::with_capacity(half.len() / 2 + 1);
        let mut neighbors = vec![[None; 3]; triangles.len()];
        let mut boundary = vec![false; nv];
        let mut used = vec![false; nv];
        for t in &triangles {
            for &v in t {
                used[v] = true;
            }
        }
        if let Some(v) = used.iter().position(|u| !u) {
            return Err(Error::NonConforming(format!("vertex {v} belongs to no triangle")));
        }

        let tol = domain.tolerance();
        let mut i = 0;
        while i < half.len() {
            let (a, b, k0, l0) = half[i];
            let mut j = i + 1;
            while j < half.len() && half[j].0 == a && half[j].1 == b {
                j += 1;
            }
            match j - i {
                1 => {
                    let common = domain.side_mask(&vertices[a]) & domain.side_mask(&vertices[b]);
                    if common == 0 {
                        return Err(Error::NonConforming(format!(
                            "edge ({a}, {b}) has one triangle but is not on the boundary"
                        )));
                    }
                    boundary[a] = true;
                    boundary[b] = true;
                    edges.push(Edge {
                        v: [a, b],
                        left: k0,
                        right: None,
                    });
                }
                2 => {
                    let (_, _, k1, l1) = half[i + 1];
                    neighbors[k0][l0] = Some(k1);
                    neighbors[k1][l1] = Some(k0);
                    edges.push(Edge {
                        v: [a, b],
                        left: k0,
                        right: Some(k1),
                    });
                }
                n => {
                    return Err(Error::NonConforming(format!(
                        "edge ({a}, {b}) is shared by {n} triangles"
                    )))
                }
            }
            i = j;
        }

        let mesh = Triangulation {
            vertices,
            triangles,
            boundary,
            edges,
            neighbors,
            domain,
        };
        let total = mesh.total_area();
        if (total - domain.area()).abs() > 1e-9 * domain.area().max(tol) {
            return Err(Error::NonConforming(format!(
                "triangles cover area {total}, domain area is {}",
                domain.area()
            )));
        }
        Ok(mesh)
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn neighbors(&self) -> &[[Option<usize>; 3]] {
        &self.neighbors
    }

    pub fn domain(&self) -> &Rect {
        &self.domain
    }

    pub fn is_boundary(&self, v: usize) -> bool {
        self.boundary[v]
    }

    pub fn boundary_flags(&self) -> &[bool] {
        &self.boundary
    }

    /// N, the number of elements.
    pub fn n_elements(&self) -> usize {
        self.triangles.len()
    }

    /// N_v, the number of vertices.
    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    /// N_vi, the number of interior vertices.
    pub fn n_interior(&self) -> usize {
        self.boundary.iter().filter(|b| !**b).count()
    }

    pub fn corners(&self, k: usize) -> [Point; 3] {
        let t = self.triangles[k];
        [self.vertices[t[0]], self.vertices[t[1]], self.vertices[t[2]]]
    }

    pub fn area(&self, k: usize) -> f64 {
        let [a, b, c] = self.corners(k);
        signed_area(&a, &b, &c)
    }

    pub fn total_area(&self) -> f64 {
        (0..self.n_elements()).map(|k| self.area(k)).sum()
    }

    pub fn centroid(&self, k: usize) -> Point {
        let [a, b, c] = self.corners(k);
        Point::from((a.coords + b.coords + c.coords) / 3.0)
    }

    /// Sorted one-ring neighbour lists of every vertex.
    pub fn vertex_neighbors(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.n_vertices()];
        for e in &self.edges {
            adj[e.v[0]].push(e.v[1]);
            adj[e.v[1]].push(e.v[0]);
        }
        for a in &mut adj {
            a.sort_unstable();
        }
        adj
    }

    /// Incident triangles of every vertex, in increasing order.
    pub fn vertex_triangles(&self) -> Vec<Vec<usize>> {
        let mut vt = vec![Vec::new(); self.n_vertices()];
        for (k, t) in self.triangles.iter().enumerate() {
            for &v in t {
                vt[v].push(k);
            }
        }
        vt
    }

    /// Point evaluation of the piecewise-linear interpolant of nodal `values`.
    pub fn interpolate(&self, values: &[f64], loc: &Location) -> f64 {
        let t = self.triangles[loc.element];
        loc.bary.iter().zip(t.iter()).map(|(l, &v)| l * values[v]).sum()
    }
}

/// Geometry of element `k`: area, reference Jacobian and basis gradients.
pub fn element_geometry(mesh: &Triangulation, k: usize) -> Result<ElementGeometry> {
    if k >= mesh.n_elements() {
        return Err(Error::InvalidArgument(format!("element {k} out of range")));
    }
    triangle_geometry(k, &mesh.corners(k))
}

pub(crate) fn triangle_geometry(index: usize, p: &[Point; 3]) -> Result<ElementGeometry> {
    let e1 = p[1] - p[0];
    let e2 = p[2] - p[0];
    let edges = Mat2::from_columns(&[e1, e2]);
    let det = edges.determinant();
    if !(det > 0.0) || !det.is_finite() {
        return Err(Error::DegenerateElement(index));
    }
    let area = 0.5 * det;
    let jacobian = edges * crate::linalg::inverse(&reference_edges()).expect("reference element");
    // grad of barycentric coordinate i is the inward edge normal over 2|K|
    let rot = |v: Vec2| Vec2::new(-v.y, v.x);
    let g1 = rot(p[0] - p[2]) / det;
    let g2 = rot(p[1] - p[0]) / det;
    let g0 = -(g1 + g2);
    Ok(ElementGeometry {
        index,
        area,
        jacobian,
        gradients: [g0, g1, g2],
    })
}

/// Structured mesh: each of the `nx * ny` cells is cut by both diagonals into
/// four triangles around a centre vertex.
pub fn generate_fixed_mesh(domain: Rect, nx: usize, ny: usize) -> Result<Triangulation> {
    if nx == 0 || ny == 0 {
        return Err(Error::InvalidArgument(format!(
            "cell counts must be positive, got nx = {nx}, ny = {ny}"
        )));
    }
    let hx = domain.width() / nx as f64;
    let hy = domain.height() / ny as f64;
    let mut vertices = Vec::with_capacity((nx + 1) * (ny + 1) + nx * ny);
    for j in 0..=ny {
        for i in 0..=nx {
            // snap the last row/column onto the boundary exactly
            let x = if i == nx {
                domain.x_max
            } else {
                domain.x_min + i as f64 * hx
            };
            let y = if j == ny {
                domain.y_max
            } else {
                domain.y_min + j as f64 * hy
            };
            vertices.push(Point::new(x, y));
        }
    }
    let grid = |i: usize, j: usize| j * (nx + 1) + i;
    let mut triangles = Vec::with_capacity(4 * nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            let c = vertices.len();
            vertices.push(Point::new(
                domain.x_min + (i as f64 + 0.5) * hx,
                domain.y_min + (j as f64 + 0.5) * hy,
            ));
            let p00 = grid(i, j);
            let p10 = grid(i + 1, j);
            let p11 = grid(i + 1, j + 1);
            let p01 = grid(i, j + 1);
            triangles.push([p00, p10, c]);
            triangles.push([p10, p11, c]);
            triangles.push([p11, p01, c]);
            triangles.push([p01, p00, c]);
        }
    }
    Triangulation::with_domain(vertices, triangles, domain)
}
