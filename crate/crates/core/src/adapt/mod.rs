//! Metric-conforming local remeshing toward an M-uniform mesh: edges of unit
//! metric length and elements that are equilateral under the metric.

mod remesh;

use std::path::Path;

use crate::error::{Error, Result};
use crate::fem::SolutionField;
use crate::linalg::{Mat2, Point, Vec2};
use crate::mesh::Triangulation;
use crate::metric::MetricField;

use remesh::{Background, WorkMesh};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdaptParams {
    pub target_n: usize,
    pub l_low: f64,
    pub l_high: f64,
    pub max_passes: usize,
    /// Collapses may not create elements with `Q_ali` above this value
    /// unless the fan was already that poor.
    pub quality_ceiling: f64,
    pub smooth_sweeps: usize,
    pub flip_sweeps: usize,
    /// `adapt_to_target` re-adapts with a rescaled metric when the element
    /// count misses `target_n` by more than this factor...
    pub count_tolerance: f64,
    /// ...at most this many times.
    pub count_retries: usize,
}

impl Default for AdaptParams {
    fn default() -> Self {
        AdaptParams {
            target_n: 4000,
            l_low: std::f64::consts::FRAC_1_SQRT_2,
            l_high: std::f64::consts::SQRT_2,
            max_passes: 10,
            quality_ceiling: 4.0,
            smooth_sweeps: 2,
            flip_sweeps: 4,
            count_tolerance: 1.5,
            count_retries: 2,
        }
    }
}

impl AdaptParams {
    pub fn with_target(target_n: usize) -> Self {
        AdaptParams {
            target_n,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0 < self.l_low && self.l_low < 1.0 && 1.0 < self.l_high) {
            return Err(Error::InvalidArgument(format!(
                "need 0 < l_low < 1 < l_high, got {} and {}",
                self.l_low, self.l_high
            )));
        }
        if self.max_passes == 0 || self.target_n == 0 {
            return Err(Error::InvalidArgument("max_passes and target_n must be >= 1".into()));
        }
        if !(self.count_tolerance > 1.0) {
            return Err(Error::InvalidArgument(format!(
                "count_tolerance must exceed 1, got {}",
                self.count_tolerance
            )));
        }
        Ok(())
    }
}

/// One row of the adaptation log.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PassLog {
    pub pass: usize,
    pub n_elements: usize,
    pub mean_q_ali: f64,
    pub max_q_ali: f64,
    pub len_min: f64,
    pub len_p10: f64,
    pub len_median: f64,
    pub len_p90: f64,
    pub len_max: f64,
    pub in_band_fraction: f64,
    pub splits: usize,
    pub collapses: usize,
    pub flips: usize,
    pub moves: usize,
}

#[derive(Clone, Debug)]
pub struct AdaptReport {
    /// Row 0 describes the input mesh; one further row per pass.
    pub passes: Vec<PassLog>,
    pub converged: bool,
}

/// `ℓ_M(e) = sqrt(eᵀ M_e e)` with `M_e` the mean of the endpoint tensors.
pub fn metric_edge_length(e: &Vec2, m_a: &Mat2, m_b: &Mat2) -> f64 {
    let m = (m_a + m_b) * 0.5;
    e.dot(&(m * e)).sqrt()
}

/// Lengths of all mesh edges under the metric, with vertex tensors averaged
/// from the incident elements.
pub fn metric_edge_lengths(mesh: &Triangulation, metric: &MetricField) -> Vec<f64> {
    let vm = metric.vertex_tensors(mesh);
    mesh.edges()
        .iter()
        .map(|e| {
            let [a, b] = e.v;
            metric_edge_length(&(mesh.vertices()[b] - mesh.vertices()[a]), &vm[a], &vm[b])
        })
        .collect()
}

/// Scales the metric so that a mesh of unit-length edges (equilateral
/// elements of metric area √3/4) has `target_n` elements.
pub fn normalize_metric(metric: &MetricField, target_n: usize) -> Result<MetricField> {
    if target_n == 0 {
        return Err(Error::InvalidArgument("target_n must be >= 1".into()));
    }
    if !(metric.sigma_h > 0.0) || !metric.sigma_h.is_finite() {
        return Err(Error::EmptyMetric);
    }
    let unit_area = 3f64.sqrt() / 4.0;
    Ok(metric.scaled(target_n as f64 * unit_area / metric.sigma_h))
}

/// Remeshes `mesh` toward the (normalised) metric given on its elements.
pub fn adapt_once(
    mesh: &Triangulation,
    metric: &MetricField,
    params: &AdaptParams,
) -> Result<(Triangulation, AdaptReport)> {
    params.validate()?;
    if metric.tensors.len() != mesh.n_elements() {
        return Err(Error::SizeMismatch {
            expected: mesh.n_elements(),
            got: metric.tensors.len(),
        });
    }
    let bg = Background::new(mesh, metric.vertex_tensors(mesh));
    let mut work = WorkMesh::new(mesh, &bg, *params);
    let mut passes = vec![work.log(0, [0; 4])];
    let mut converged = false;
    let cap = 8 * params.target_n.max(mesh.n_elements());
    for pass in 1..=params.max_passes {
        // splits, longest first
        let mut long: Vec<(f64, usize, usize)> = work
            .edges()
            .into_iter()
            .map(|(a, b)| (work.length_of(a, b), a, b))
            .filter(|(l, _, _)| *l > params.l_high)
            .collect();
        long.sort_by(|x, y| y.0.total_cmp(&x.0).then((x.1, x.2).cmp(&(y.1, y.2))));
        let mut splits = 0;
        for (_, a, b) in long {
            if work.n_elements() >= cap {
                log::warn!("adapt: element cap {cap} reached, stopping refinement");
                break;
            }
            if work.split(a, b) {
                splits += 1;
            }
        }
        // collapses, shortest first
        let mut short: Vec<(f64, usize, usize)> = work
            .edges()
            .into_iter()
            .map(|(a, b)| (work.length_of(a, b), a, b))
            .filter(|(l, _, _)| *l < params.l_low)
            .collect();
        short.sort_by(|x, y| x.0.total_cmp(&y.0).then((x.1, x.2).cmp(&(y.1, y.2))));
        let mut collapses = 0;
        for (_, a, b) in short {
            // the edge may have been stretched by an earlier collapse
            if work.length_of(a, b) < params.l_low && work.collapse(a, b) {
                collapses += 1;
            }
        }
        let (flips, moves) = improve(&mut work, params);
        passes.push(work.log(pass, [splits, collapses, flips, moves]));
        if splits == 0 && collapses == 0 {
            converged = true;
            break;
        }
    }
    if !converged {
        log::warn!("adapt: not converged after {} passes", params.max_passes);
    }
    let out = work.finish()?;
    Ok((out, AdaptReport { passes, converged }))
}

/// `adapt_once` with element-count control. Endpoint-averaged edge lengths
/// over-refine where the metric jumps by orders of magnitude between
/// neighbouring elements, so the count can overshoot the normalised target;
/// the metric is then rescaled by `target_n / N` and the input mesh adapted
/// again. The attempt closest to the target (in ratio) is returned.
pub fn adapt_to_target(
    mesh: &Triangulation,
    metric: &MetricField,
    params: &AdaptParams,
) -> Result<(Triangulation, AdaptReport)> {
    let target = params.target_n as f64;
    let miss = |n: usize| (n as f64 / target).ln().abs();
    let mut best = adapt_once(mesh, metric, params)?;
    let mut scale = 1.0;
    for _ in 0..params.count_retries {
        let n = best.0.n_elements();
        if miss(n) <= params.count_tolerance.ln() {
            break;
        }
        scale *= target / n as f64;
        log::info!(
            "adapt: {n} elements for target {}, rescaling metric by {scale:.3}",
            params.target_n
        );
        let next = adapt_once(mesh, &metric.scaled(scale), params)?;
        if miss(next.0.n_elements()) < miss(best.0.n_elements()) {
            best = next;
        } else {
            break;
        }
    }
    Ok(best)
}

/// Flip and smoothing sweeps; neither may raise the sum of `Q_ali`.
fn improve(work: &mut WorkMesh, params: &AdaptParams) -> (usize, usize) {
    let mut flips = 0;
    let mut moves = 0;
    for _ in 0..params.flip_sweeps {
        let mut n = 0;
        for (a, b) in work.edges() {
            if work.flip(a, b) {
                n += 1;
            }
        }
        flips += n;
        if n == 0 {
            break;
        }
    }
    for _ in 0..params.smooth_sweeps {
        for v in work.live_vertices() {
            if work.smooth(v) {
                moves += 1;
            }
        }
        for (a, b) in work.edges() {
            if work.flip(a, b) {
                flips += 1;
            }
        }
    }
    (flips, moves)
}

/// Builds an adapted initial mesh by resampling `u0` exactly on the current
/// mesh and re-adapting `k_init` times.
pub fn iterate_initial_mesh(
    seed: &Triangulation,
    t0: f64,
    u0: impl Fn(&Point) -> f64,
    mut build_metric: impl FnMut(&Triangulation, &[f64]) -> Result<MetricField>,
    params: &AdaptParams,
    k_init: usize,
) -> Result<(Triangulation, SolutionField, Vec<PassLog>)> {
    let mut mesh = seed.clone();
    let mut log = Vec::new();
    for _ in 0..k_init {
        let u = SolutionField::sample(&mesh, t0, &u0);
        let metric = normalize_metric(&build_metric(&mesh, &u.values)?, params.target_n)?;
        let (next, report) = adapt_to_target(&mesh, &metric, params)?;
        log.extend(report.passes);
        mesh = next;
    }
    let u = SolutionField::sample(&mesh, t0, &u0);
    Ok((mesh, u, log))
}

/// Structured seed mesh with roughly `target_n` elements.
pub fn seed_cells(target_n: usize) -> usize {
    (((target_n as f64) / 4.0).sqrt().round() as usize).max(1)
}

pub fn write_adapt_csv(path: impl AsRef<Path>, rows: &[(f64, PassLog)]) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::from(
        "time,pass,N,mean_q_ali,max_q_ali,len_min,len_p10,len_median,len_p90,len_max,in_band,splits,collapses,flips,moves\n",
    );
    for (t, p) in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
            t,
            p.pass,
            p.n_elements,
            p.mean_q_ali,
            p.max_q_ali,
            p.len_min,
            p.len_p10,
            p.len_median,
            p.len_p90,
            p.len_max,
            p.in_band_fraction,
            p.splits,
            p.collapses,
            p.flips,
            p.moves
        ));
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}
