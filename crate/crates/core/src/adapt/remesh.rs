//! Mutable working mesh with local split / collapse / flip / smoothing
//! operations, driven by a background metric.

use crate::error::Result;
use crate::linalg::{Mat2, Point};
use crate::mesh::{locate_or_nearest, signed_area, Rect, Triangulation};
use crate::metric::alignment_quality;

use super::{AdaptParams, PassLog};

/// Metric known on the input mesh, interpolated linearly from vertex
/// tensors at arbitrary points.
pub(super) struct Background<'a> {
    mesh: &'a Triangulation,
    tensors: Vec<Mat2>,
}

impl<'a> Background<'a> {
    pub fn new(mesh: &'a Triangulation, tensors: Vec<Mat2>) -> Self {
        Background { mesh, tensors }
    }

    pub fn eval(&self, p: &Point, hint: &mut usize) -> Mat2 {
        let (loc, _) = locate_or_nearest(self.mesh, p, Some(*hint));
        *hint = loc.element;
        let t = self.mesh.triangles()[loc.element];
        self.tensors[t[0]] * loc.bary[0] + self.tensors[t[1]] * loc.bary[1] + self.tensors[t[2]] * loc.bary[2]
    }
}

pub(super) struct WorkMesh<'a> {
    pts: Vec<Point>,
    side: Vec<u8>,
    metric: Vec<Mat2>,
    hint: Vec<usize>,
    alive_v: Vec<bool>,
    tris: Vec<[usize; 3]>,
    alive_t: Vec<bool>,
    vt: Vec<Vec<usize>>,
    domain: Rect,
    min_area: f64,
    bg: &'a Background<'a>,
    params: AdaptParams,
}

fn is_corner(mask: u8) -> bool {
    mask.count_ones() >= 2
}

impl<'a> WorkMesh<'a> {
    pub fn new(mesh: &Triangulation, bg: &'a Background<'a>, params: AdaptParams) -> Self {
        let domain = *mesh.domain();
        let pts = mesh.vertices().to_vec();
        let side: Vec<u8> = pts.iter().map(|p| domain.side_mask(p)).collect();
        let vt = mesh.vertex_triangles();
        let hint: Vec<usize> = vt.iter().map(|ts| ts[0]).collect();
        let mut w = WorkMesh {
            metric: vec![Mat2::identity(); pts.len()],
            alive_v: vec![true; pts.len()],
            tris: mesh.triangles().to_vec(),
            alive_t: vec![true; mesh.n_elements()],
            pts,
            side,
            hint,
            vt,
            domain,
            min_area: 1e-14 * domain.area(),
            bg,
            params,
        };
        for v in 0..w.pts.len() {
            w.metric[v] = w.eval_metric(v, w.pts[v]);
        }
        w
    }

    fn eval_metric(&mut self, v: usize, p: Point) -> Mat2 {
        let mut h = self.hint[v];
        let m = self.bg.eval(&p, &mut h);
        self.hint[v] = h;
        m
    }

    pub fn n_elements(&self) -> usize {
        self.alive_t.iter().filter(|a| **a).count()
    }

    pub fn edge_length(&self, a: usize, b: usize) -> f64 {
        let e = self.pts[b] - self.pts[a];
        let m = (self.metric[a] + self.metric[b]) * 0.5;
        e.dot(&(m * e)).sqrt()
    }

    fn quality(&self, t: &[usize; 3]) -> f64 {
        let m = (self.metric[t[0]] + self.metric[t[1]] + self.metric[t[2]]) / 3.0;
        alignment_quality(&[self.pts[t[0]], self.pts[t[1]], self.pts[t[2]]], &m)
    }

    fn area(&self, t: &[usize; 3]) -> f64 {
        signed_area(&self.pts[t[0]], &self.pts[t[1]], &self.pts[t[2]])
    }

    /// Sorted unique edges of the live triangles.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut e = Vec::with_capacity(3 * self.tris.len());
        for (t, alive) in self.tris.iter().zip(&self.alive_t) {
            if !alive {
                continue;
            }
            for i in 0..3 {
                let (a, b) = (t[i], t[(i + 1) % 3]);
                e.push((a.min(b), a.max(b)));
            }
        }
        e.sort_unstable();
        e.dedup();
        e
    }

    fn edge_tris(&self, a: usize, b: usize) -> Vec<usize> {
        self.vt[a]
            .iter()
            .copied()
            .filter(|&t| self.tris[t].contains(&b))
            .collect()
    }

    fn neighbors(&self, v: usize) -> Vec<usize> {
        let mut n: Vec<usize> = self.vt[v]
            .iter()
            .flat_map(|&t| self.tris[t])
            .filter(|&u| u != v)
            .collect();
        n.sort_unstable();
        n.dedup();
        n
    }

    fn push_tri(&mut self, t: [usize; 3]) -> usize {
        let k = self.tris.len();
        self.tris.push(t);
        self.alive_t.push(true);
        for &v in &t {
            self.vt[v].push(k);
        }
        k
    }

    fn remove_from_vt(&mut self, v: usize, t: usize) {
        self.vt[v].retain(|&k| k != t);
    }

    /// Splits edge `(a, b)` at its midpoint. Returns false if the edge no
    /// longer exists.
    pub fn split(&mut self, a: usize, b: usize) -> bool {
        let ts = self.edge_tris(a, b);
        if ts.is_empty() {
            return false;
        }
        let mid = Point::from((self.pts[a].coords + self.pts[b].coords) * 0.5);
        let nv = self.pts.len();
        let side = if ts.len() == 1 { self.side[a] & self.side[b] } else { 0 };
        self.pts.push(mid);
        self.side.push(side);
        self.alive_v.push(true);
        self.vt.push(Vec::new());
        self.hint.push(self.hint[a]);
        self.metric.push(Mat2::identity());
        let m = self.eval_metric(nv, mid);
        self.metric[nv] = m;
        for t in ts {
            let tri = self.tris[t];
            // rotate so that the split edge is (tri[0], tri[1])
            let r = (0..3)
                .find(|&i| {
                    let (p, q) = (tri[i], tri[(i + 1) % 3]);
                    (p == a && q == b) || (p == b && q == a)
                })
                .expect("edge in triangle");
            let (p, q, c) = (tri[r], tri[(r + 1) % 3], tri[(r + 2) % 3]);
            self.tris[t] = [p, nv, c];
            self.vt[nv].push(t);
            self.remove_from_vt(q, t);
            self.push_tri([nv, q, c]);
        }
        true
    }

    /// Tries to remove `v` by merging it into `w`. Returns the worst quality
    /// of the resulting fan when the collapse is legal, without applying it.
    fn collapse_check(&self, v: usize, w: usize) -> Option<f64> {
        let sv = self.side[v];
        if is_corner(sv) {
            return None;
        }
        let ts = self.edge_tris(v, w);
        if ts.is_empty() {
            return None;
        }
        if sv != 0 {
            // boundary vertices only slide along their own side
            if ts.len() != 1 || self.side[w] & sv == 0 {
                return None;
            }
        }
        // link condition
        let nv = self.neighbors(v);
        let nw = self.neighbors(w);
        let common = nv.iter().filter(|u| nw.binary_search(u).is_ok()).count();
        if common != ts.len() {
            return None;
        }
        let mut worst_old: f64 = 0.0;
        for &t in &self.vt[v] {
            worst_old = worst_old.max(self.quality(&self.tris[t]));
        }
        let mut worst_new: f64 = 0.0;
        for &t in &self.vt[v] {
            if ts.contains(&t) {
                continue;
            }
            let mut tri = self.tris[t];
            for x in tri.iter_mut() {
                if *x == v {
                    *x = w;
                }
            }
            if self.area(&tri) <= self.min_area {
                return None;
            }
            worst_new = worst_new.max(self.quality(&tri));
        }
        if worst_new > worst_old.max(self.params.quality_ceiling) {
            return None;
        }
        for &u in &nv {
            if u != w && nw.binary_search(&u).is_err() && self.edge_length(w, u) > self.params.l_high {
                return None;
            }
        }
        Some(worst_new)
    }

    fn apply_collapse(&mut self, v: usize, w: usize) {
        let ts = self.edge_tris(v, w);
        for &t in &ts {
            self.alive_t[t] = false;
            let tri = self.tris[t];
            for &x in &tri {
                self.remove_from_vt(x, t);
            }
        }
        let fan = std::mem::take(&mut self.vt[v]);
        for t in fan {
            for x in self.tris[t].iter_mut() {
                if *x == v {
                    *x = w;
                }
            }
            self.vt[w].push(t);
        }
        self.alive_v[v] = false;
    }

    /// Collapses the short edge `(a, b)` in the better legal direction.
    pub fn collapse(&mut self, a: usize, b: usize) -> bool {
        if !self.alive_v[a] || !self.alive_v[b] {
            return false;
        }
        let ab = self.collapse_check(a, b);
        let ba = self.collapse_check(b, a);
        match (ab, ba) {
            (Some(x), Some(y)) => {
                if x <= y {
                    self.apply_collapse(a, b)
                } else {
                    self.apply_collapse(b, a)
                }
            }
            (Some(_), None) => self.apply_collapse(a, b),
            (None, Some(_)) => self.apply_collapse(b, a),
            (None, None) => return false,
        }
        true
    }

    /// Flips the interior edge `(a, b)` when that lowers the worst quality of
    /// the two triangles without raising their sum.
    pub fn flip(&mut self, a: usize, b: usize) -> bool {
        let ts = self.edge_tris(a, b);
        if ts.len() != 2 {
            return false;
        }
        let third = |t: &[usize; 3]| *t.iter().find(|&&x| x != a && x != b).expect("third vertex");
        let (t1, t2) = (ts[0], ts[1]);
        let (tri1, tri2) = (self.tris[t1], self.tris[t2]);
        // orient so that tri1 runs a -> b
        let forward = (0..3).any(|i| tri1[i] == a && tri1[(i + 1) % 3] == b);
        let (a, b) = if forward { (a, b) } else { (b, a) };
        let c = third(&tri1);
        let d = third(&tri2);
        if self.vt[c].iter().any(|&t| self.tris[t].contains(&d)) {
            return false;
        }
        let n1 = [a, d, c];
        let n2 = [d, b, c];
        if self.area(&n1) <= self.min_area || self.area(&n2) <= self.min_area {
            return false;
        }
        let (q1, q2) = (self.quality(&tri1), self.quality(&tri2));
        let (p1, p2) = (self.quality(&n1), self.quality(&n2));
        if !(p1.max(p2) < q1.max(q2) * (1.0 - 1e-9)) || p1 + p2 > q1 + q2 {
            return false;
        }
        self.remove_from_vt(b, t1);
        self.remove_from_vt(a, t2);
        self.tris[t1] = n1;
        self.tris[t2] = n2;
        self.vt[d].push(t1);
        self.vt[c].push(t2);
        true
    }

    /// Moves `v` toward the point at unit metric distance from each
    /// neighbour; boundary vertices slide along their side, corners stay.
    pub fn smooth(&mut self, v: usize) -> bool {
        if !self.alive_v[v] || is_corner(self.side[v]) || self.vt[v].is_empty() {
            return false;
        }
        let nbrs = self.neighbors(v);
        let x = self.pts[v];
        let mut target = nalgebra::Vector2::zeros();
        for &j in &nbrs {
            let l = self.edge_length(v, j);
            if !(l > 0.0) {
                return false;
            }
            target += self.pts[j].coords + (x - self.pts[j]) / l;
        }
        let mut target = Point::from(target / nbrs.len() as f64);
        let side = self.side[v];
        if side & (crate::mesh::SIDE_X_MIN | crate::mesh::SIDE_X_MAX) != 0 {
            target.x = x.x;
            target.y = target.y.clamp(self.domain.y_min, self.domain.y_max);
        } else if side & (crate::mesh::SIDE_Y_MIN | crate::mesh::SIDE_Y_MAX) != 0 {
            target.y = x.y;
            target.x = target.x.clamp(self.domain.x_min, self.domain.x_max);
        }
        let fan = self.vt[v].clone();
        let old: Vec<f64> = fan.iter().map(|&t| self.quality(&self.tris[t])).collect();
        let old_max = old.iter().copied().fold(0.0, f64::max);
        let old_sum: f64 = old.iter().sum();
        let old_metric = self.metric[v];
        for omega in [1.0, 0.5, 0.25] {
            let cand = Point::from(x.coords + (target - x) * omega);
            if side & (crate::mesh::SIDE_X_MIN | crate::mesh::SIDE_X_MAX) != 0 {
                debug_assert_eq!(cand.x, x.x);
            }
            self.pts[v] = cand;
            let m = self.eval_metric(v, cand);
            self.metric[v] = m;
            let mut ok = true;
            let mut new_max: f64 = 0.0;
            let mut new_sum = 0.0;
            for &t in &fan {
                let tri = self.tris[t];
                if self.area(&tri) <= self.min_area {
                    ok = false;
                    break;
                }
                let q = self.quality(&tri);
                new_max = new_max.max(q);
                new_sum += q;
            }
            if ok && new_max <= old_max * (1.0 + 1e-12) && new_sum < old_sum * (1.0 - 1e-9) {
                return true;
            }
        }
        self.pts[v] = x;
        self.metric[v] = old_metric;
        false
    }

    pub fn live_vertices(&self) -> Vec<usize> {
        (0..self.pts.len()).filter(|&v| self.alive_v[v]).collect()
    }

    pub fn log(&self, pass: usize, counts: [usize; 4]) -> PassLog {
        let q: Vec<f64> = self
            .tris
            .iter()
            .zip(&self.alive_t)
            .filter(|(_, a)| **a)
            .map(|(t, _)| self.quality(t))
            .collect();
        let mut lens: Vec<f64> = self.edges().iter().map(|&(a, b)| self.edge_length(a, b)).collect();
        lens.sort_by(|x, y| x.total_cmp(y));
        let quant = |p: f64| -> f64 {
            if lens.is_empty() {
                return 0.0;
            }
            let i = ((lens.len() - 1) as f64 * p).round() as usize;
            lens[i]
        };
        let in_band = lens
            .iter()
            .filter(|l| **l >= self.params.l_low && **l <= self.params.l_high)
            .count();
        PassLog {
            pass,
            n_elements: q.len(),
            mean_q_ali: q.iter().sum::<f64>() / q.len().max(1) as f64,
            max_q_ali: q.iter().copied().fold(0.0, f64::max),
            len_min: quant(0.0),
            len_p10: quant(0.1),
            len_median: quant(0.5),
            len_p90: quant(0.9),
            len_max: quant(1.0),
            in_band_fraction: in_band as f64 / lens.len().max(1) as f64,
            splits: counts[0],
            collapses: counts[1],
            flips: counts[2],
            moves: counts[3],
        }
    }

    pub fn length_of(&self, a: usize, b: usize) -> f64 {
        self.edge_length(a, b)
    }

    #[cfg(test)]
    pub fn quality_stats(&self) -> (f64, f64) {
        let mut sum = 0.0;
        let mut max: f64 = 0.0;
        let mut n = 0;
        for (t, a) in self.tris.iter().zip(&self.alive_t) {
            if *a {
                let q = self.quality(t);
                sum += q;
                max = max.max(q);
                n += 1;
            }
        }
        (sum / n.max(1) as f64, max)
    }

    /// Compacts live vertices and triangles into a validated triangulation.
    pub fn finish(self) -> Result<Triangulation> {
        let mut map = vec![usize::MAX; self.pts.len()];
        let mut verts = Vec::new();
        for v in 0..self.pts.len() {
            if self.alive_v[v] && !self.vt[v].is_empty() {
                map[v] = verts.len();
                verts.push(self.pts[v]);
            }
        }
        let tris = self
            .tris
            .iter()
            .zip(&self.alive_t)
            .filter(|(_, a)| **a)
            .map(|(t, _)| [map[t[0]], map[t[1]], map[t[2]]])
            .collect();
        Triangulation::with_domain(verts, tris, self.domain)
    }

    #[cfg(test)]
    pub fn check_consistency(&self) {
        for (k, (t, a)) in self.tris.iter().zip(&self.alive_t).enumerate() {
            if !*a {
                continue;
            }
            assert!(self.area(t) > 0.0, "triangle {k} inverted");
            for &v in t {
                assert!(self.alive_v[v]);
                assert!(self.vt[v].contains(&k), "vt[{v}] misses {k}");
            }
        }
        for (v, ts) in self.vt.iter().enumerate() {
            for &t in ts {
                assert!(self.alive_t[t] && self.tris[t].contains(&v));
            }
        }
    }
}
