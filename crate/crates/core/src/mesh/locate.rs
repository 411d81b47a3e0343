use super::{signed_area, Triangulation};
use crate::error::{Error, Result};
use crate::linalg::Point;

/// Containing element and barycentric coordinates of a point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Location {
    pub element: usize,
    pub bary: [f64; 3],
}

fn barycentric(mesh: &Triangulation, k: usize, x: &Point) -> [f64; 3] {
    let [a, b, c] = mesh.corners(k);
    let area = signed_area(&a, &b, &c);
    [
        signed_area(x, &b, &c) / area,
        signed_area(&a, x, &c) / area,
        signed_area(&a, &b, x) / area,
    ]
}

/// Signed distances from `x` to the three edges of element `k`
/// (positive on the inner side).
fn edge_distances(mesh: &Triangulation, k: usize, bary: &[f64; 3]) -> [f64; 3] {
    let p = mesh.corners(k);
    let twice_area = 2.0 * mesh.area(k);
    let mut d = [0.0; 3];
    for i in 0..3 {
        let len = (p[(i + 2) % 3] - p[(i + 1) % 3]).norm();
        d[i] = bary[i] * twice_area / len;
    }
    d
}

fn clamp(bary: [f64; 3]) -> [f64; 3] {
    let c = bary.map(|l| l.max(0.0));
    let s: f64 = c.iter().sum();
    c.map(|l| l / s)
}

fn walk(mesh: &Triangulation, x: &Point, start: usize) -> Option<Location> {
    let mut k = start;
    for _ in 0..mesh.n_elements() {
        let bary = barycentric(mesh, k, x);
        let (imin, lmin) = bary
            .iter()
            .copied()
            .enumerate()
            .fold((0, f64::INFINITY), |acc, (i, l)| if l < acc.1 { (i, l) } else { acc });
        if lmin >= -1e-14 {
            return Some(Location {
                element: k,
                bary: clamp(bary),
            });
        }
        k = mesh.neighbors()[k][imin]?;
    }
    None
}

/// Best element by exhaustive scan: the one maximising the smallest signed
/// edge distance. Returns the location and that distance.
fn scan(mesh: &Triangulation, x: &Point) -> (Location, f64) {
    let mut best = (0, f64::NEG_INFINITY, [1.0 / 3.0; 3]);
    for k in 0..mesh.n_elements() {
        let bary = barycentric(mesh, k, x);
        let dmin = edge_distances(mesh, k, &bary).into_iter().fold(f64::INFINITY, f64::min);
        if dmin > best.1 {
            best = (k, dmin, bary);
        }
    }
    (
        Location {
            element: best.0,
            bary: clamp(best.2),
        },
        best.1,
    )
}

/// Locates `x` by walking from `hint`, falling back to an exhaustive scan.
///
/// Points up to `1e-10 * diam(domain)` outside an element are accepted with
/// clamped barycentric coordinates.
pub fn locate_point(mesh: &Triangulation, x: &Point, hint: Option<usize>) -> Result<Location> {
    let start = hint.filter(|&h| h < mesh.n_elements()).unwrap_or(0);
    if let Some(loc) = walk(mesh, x, start) {
        return Ok(loc);
    }
    let (loc, dist) = scan(mesh, x);
    if dist >= -mesh.domain().tolerance() {
        Ok(loc)
    } else {
        Err(Error::OutsideDomain { x: x.x, y: x.y })
    }
}

/// Like [`locate_point`] but projects far-away points onto the nearest
/// element instead of failing. The flag reports whether projection happened.
pub fn locate_or_nearest(mesh: &Triangulation, x: &Point, hint: Option<usize>) -> (Location, bool) {
    let start = hint.filter(|&h| h < mesh.n_elements()).unwrap_or(0);
    if let Some(loc) = walk(mesh, x, start) {
        return (loc, false);
    }
    let (loc, dist) = scan(mesh, x);
    (loc, dist < -mesh.domain().tolerance())
}
