#![allow(dead_code)]

use apme::linalg::Point;
use apme::mesh::{generate_fixed_mesh, Rect, Triangulation};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Structured criss-cross mesh with every interior vertex jittered by up to
/// `jitter` times the cell size. Small enough jitter keeps all elements
/// positively oriented; the constructor re-checks that.
pub fn jittered_mesh(domain: Rect, n: usize, jitter: f64, seed: u64) -> Triangulation {
    let base = generate_fixed_mesh(domain, n, n).unwrap();
    let mut rng = rng(seed);
    let h = domain.width().min(domain.height()) / n as f64;
    let verts: Vec<Point> = base
        .vertices()
        .iter()
        .enumerate()
        .map(|(i, p)| {
            if base.is_boundary(i) {
                *p
            } else {
                let dx = rng.random_range(-jitter..jitter) * h;
                let dy = rng.random_range(-jitter..jitter) * h;
                Point::new(p.x + dx, p.y + dy)
            }
        })
        .collect();
    Triangulation::with_domain(verts, base.triangles().to_vec(), domain).unwrap()
}

/// Unstructured mesh of `[-3, 3]²`: a jittered grid remeshed toward a
/// smoothly varying anisotropic metric, so valences and shapes are irregular.
pub fn unstructured_mesh(target_n: usize, seed: u64) -> Triangulation {
    use apme::adapt::{adapt_once, normalize_metric, AdaptParams};
    use apme::linalg::Mat2;
    use apme::metric::{MetricField, MetricKind};
    let base = jittered_mesh(Rect::square(3.0), 10, 0.2, seed);
    let tensors = (0..base.n_elements())
        .map(|k| {
            let c = base.centroid(k);
            let r = apme::linalg::rotation(0.5 * c.x + 0.3 * c.y);
            r * Mat2::new(1.0 + 0.5 * c.x.sin().powi(2), 0.0, 0.0, 1.0 + 0.3 * c.y * c.y) * r.transpose()
        })
        .collect();
    let metric = MetricField::new(&base, tensors, MetricKind::Dmp, 0.0).unwrap();
    let metric = normalize_metric(&metric, target_n).unwrap();
    adapt_once(&base, &metric, &AdaptParams::with_target(target_n))
        .unwrap()
        .0
}
