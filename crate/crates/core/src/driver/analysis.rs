//! Post-processing of nodal solutions: thresholded regions, their
//! connectivity, second moments and overlap with the exact support.

use crate::error::Result;
use crate::exact::AnisotropicExact;
use crate::linalg::{Mat2, Point, SymEigen};
use crate::mesh::{locate_or_nearest, Rect, Triangulation};

/// Number of connected components of the vertex graph restricted to
/// `{u > threshold}`.
pub fn count_components(mesh: &Triangulation, values: &[f64], threshold: f64) -> usize {
    let n = mesh.n_vertices();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut i: usize) -> usize {
        while parent[i] != i {
            parent[i] = parent[parent[i]];
            i = parent[i];
        }
        i
    }
    let on = |i: usize| values[i] > threshold;
    for e in mesh.edges() {
        let [a, b] = e.v;
        if on(a) && on(b) {
            let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
            if ra != rb {
                parent[ra.max(rb)] = ra.min(rb);
            }
        }
    }
    (0..n).filter(|&i| on(i) && find(&mut parent, i) == i).count()
}

/// Regular grid of cell centres over `rect`, visited row by row so that
/// consecutive points are neighbours (cheap walking location).
fn grid_points(rect: &Rect, n: usize) -> impl Iterator<Item = Point> + '_ {
    let dx = rect.width() / n as f64;
    let dy = rect.height() / n as f64;
    (0..n).flat_map(move |j| {
        (0..n).map(move |i| {
            let ii = if j % 2 == 0 { i } else { n - 1 - i };
            Point::new(rect.x_min + (ii as f64 + 0.5) * dx, rect.y_min + (j as f64 + 0.5) * dy)
        })
    })
}

/// Samples `u^h` on an `n × n` cell-centre grid over `rect`.
pub fn sample_grid(mesh: &Triangulation, values: &[f64], rect: &Rect, n: usize) -> Vec<(Point, f64)> {
    let mut hint = None;
    grid_points(rect, n)
        .map(|p| {
            let (loc, _) = locate_or_nearest(mesh, &p, hint);
            hint = Some(loc.element);
            (p, mesh.interpolate(values, &loc))
        })
        .collect()
}

/// Eccentricity `sqrt(1 - λ_min / λ_max)` of the second-moment tensor of
/// `{u^h > threshold}`, estimated on a sampling grid. `None` for an empty region.
pub fn region_eccentricity(mesh: &Triangulation, values: &[f64], threshold: f64, n: usize) -> Option<f64> {
    let samples = sample_grid(mesh, values, mesh.domain(), n);
    let inside: Vec<Point> = samples
        .iter()
        .filter(|(_, u)| *u > threshold)
        .map(|(p, _)| *p)
        .collect();
    if inside.len() < 3 {
        return None;
    }
    let count = inside.len() as f64;
    let mean = inside.iter().fold(Point::origin().coords, |acc, p| acc + p.coords) / count;
    let mut c = Mat2::zeros();
    for p in &inside {
        let d = p.coords - mean;
        c += d * d.transpose();
    }
    let eig = SymEigen::new(&(c / count));
    if !(eig.max() > 0.0) {
        return None;
    }
    Some((1.0 - eig.min().max(0.0) / eig.max()).sqrt())
}

/// Area of the symmetric difference between `{u^h > threshold}` and the
/// exact `{u > threshold}` at time `t`, relative to the exact region's area.
pub fn support_mismatch(
    mesh: &Triangulation,
    values: &[f64],
    exact: &AnisotropicExact,
    t: f64,
    threshold: f64,
    n: usize,
) -> Result<f64> {
    let domain = mesh.domain();
    let mut diff = 0usize;
    let mut exact_count = 0usize;
    for (p, uh) in sample_grid(mesh, values, domain, n) {
        let ue = crate::exact::apme_solution(exact, &p, t)?;
        let a = uh > threshold;
        let b = ue > threshold;
        exact_count += b as usize;
        diff += (a != b) as usize;
    }
    if exact_count == 0 {
        return Ok(f64::INFINITY);
    }
    Ok(diff as f64 / exact_count as f64)
}

/// Largest nodal value outside the exact support at `t` scaled by `inflate`.
pub fn max_outside_support(
    mesh: &Triangulation,
    values: &[f64],
    exact: &AnisotropicExact,
    t: f64,
    inflate: f64,
) -> f64 {
    mesh.vertices()
        .iter()
        .zip(values)
        .filter(|(p, _)| !exact.in_support(&Point::from(p.coords / inflate), t))
        .map(|(_, &u)| u)
        .fold(0.0, f64::max)
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn loglog_slope(points: &[(f64, f64)]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = points
        .iter()
        .filter(|(x, y)| *x > 0.0 && *y > 0.0 && y.is_finite())
        .map(|(x, y)| (x.ln(), y.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        None
    } else {
        Some(sxy / sxx)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::BarenblattParams;
    use crate::fem::SolutionField;
    use crate::mesh::generate_fixed_mesh;
    use approx::assert_relative_eq;

    #[test]
    fn slope_of_power_law() {
        let pts: Vec<(f64, f64)> = [100.0, 400.0, 1600.0]
            .iter()
            .map(|&n: &f64| (n, 3.0 * n.powf(-0.5)))
            .collect();
        assert_relative_eq!(loglog_slope(&pts).unwrap(), -0.5, epsilon = 1e-12);
        assert!(loglog_slope(&pts[..1]).is_none());
    }

    #[test]
    fn two_bumps_are_two_components() {
        let mesh = generate_fixed_mesh(Rect::square(3.0), 20, 20).unwrap();
        let two = SolutionField::sample(&mesh, 0.0, |p| {
            let a = 1.0 - ((p.x - 1.5).powi(2) + p.y.powi(2));
            let b = 1.0 - ((p.x + 1.5).powi(2) + p.y.powi(2));
            a.max(b).max(0.0)
        });
        assert_eq!(count_components(&mesh, &two.values, 1e-3), 2);
        let one = SolutionField::sample(&mesh, 0.0, |p| (4.0 - p.x * p.x - p.y * p.y).max(0.0));
        assert_eq!(count_components(&mesh, &one.values, 1e-3), 1);
        assert_eq!(count_components(&mesh, &vec![0.0; mesh.n_vertices()], 1e-3), 0);
    }

    #[test]
    fn exact_interpolant_matches_its_own_support() {
        let d = Mat2::new(5.5, 4.5, 4.5, 5.5);
        let e = AnisotropicExact::new(BarenblattParams::new(1.0, 0.5).unwrap(), d).unwrap();
        let mesh = generate_fixed_mesh(Rect::square(3.0), 60, 60).unwrap();
        let t = 0.1;
        let u = SolutionField::sample(&mesh, t, |p| crate::exact::apme_solution(&e, p, t).unwrap());
        let mis = support_mismatch(&mesh, &u.values, &e, t, 1e-3, 300).unwrap();
        assert!(mis < 0.1, "mismatch {mis}");
        assert!(max_outside_support(&mesh, &u.values, &e, t, 1.05) == 0.0);
        // axis ratio sqrt(10) gives eccentricity sqrt(1 - 1/10)
        let ecc = region_eccentricity(&mesh, &u.values, 1e-3, 300).unwrap();
        assert!((ecc - 0.9f64.sqrt()).abs() < 0.02, "eccentricity {ecc}");
    }
}
