//! Experiment orchestration: the solve / adapt / transfer loop, convergence
//! sweeps and the exact-solution check, plus all file output.

pub mod analysis;
pub mod config;

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;

pub use config::{
    ChecksConfig, ConvergenceConfig, DiffusionSpec, ExperimentConfig, InitialSpec, OutputConfig, Strategy, SweepCase,
};

use crate::adapt::{adapt_to_target, iterate_initial_mesh, normalize_metric, seed_cells, write_adapt_csv, PassLog};
use crate::error::{Error, Result};
use crate::exact::{apme_solution, fd_residual, residual_check, AnisotropicExact};
use crate::fem::{l2_error, total_mass, transfer, Discretization, SolutionField};
use crate::integrate::{integrate_interval, write_steps_csv, OdeRightHandSide, StepRecord};
use crate::linalg::{sqrt_spd, Point, Vec2};
use crate::mesh::vtk::{write_vtk, VtkFields};
use crate::mesh::{generate_fixed_mesh, Triangulation};
use crate::metric::DiffusionField;

/// Threshold defining the "positive region" in diagnostics.
pub const REGION_THRESHOLD: f64 = 1e-3;
/// Inflation of the exact ellipse outside which nodal values must be small.
pub const SUPPORT_INFLATION: f64 = 1.05;
pub const OUTSIDE_TOLERANCE: f64 = 1e-2;
pub const MASS_DRIFT_TOLERANCE: f64 = 1e-2;
pub const SUPPORT_MISMATCH_TOLERANCE: f64 = 0.1;
const SAMPLE_GRID: usize = 600;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HistoryRow {
    pub time: f64,
    pub total_mass: f64,
    pub min_u: f64,
    pub max_u: f64,
    pub clipped_nodes: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn new(name: &str, passed: bool, detail: String) -> Self {
        Check {
            name: name.into(),
            passed,
            detail,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Snapshot {
    pub step: usize,
    pub time: f64,
    pub n_elements: usize,
    pub min_u: f64,
    /// Largest `|u|` on boundary vertices.
    pub boundary_max: f64,
    pub path: Option<PathBuf>,
}

#[derive(Clone, Debug)]
pub struct RunSummary {
    pub name: String,
    pub strategy: Strategy,
    pub mesh: Triangulation,
    pub solution: SolutionField,
    pub history: Vec<HistoryRow>,
    pub steps: Vec<StepRecord>,
    pub adapt_log: Vec<(f64, PassLog)>,
    pub snapshots: Vec<Snapshot>,
    /// Component counts of `{u > threshold}` at the configured check times.
    pub components: Vec<(f64, usize)>,
    /// Largest relative mass drift observed while the support stayed inside.
    pub max_mass_drift: f64,
    pub l2_error: Option<f64>,
    pub support_mismatch: Option<f64>,
    pub max_outside: Option<f64>,
    pub eccentricity: Option<f64>,
    pub checks: Vec<Check>,
    pub seconds: f64,
}

impl RunSummary {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn report(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "name = {}", self.name);
        let _ = writeln!(s, "strategy = {}", self.strategy.name());
        let _ = writeln!(s, "final_time = {}", self.solution.time);
        let _ = writeln!(s, "elements = {}", self.mesh.n_elements());
        let _ = writeln!(s, "vertices = {}", self.mesh.n_vertices());
        let _ = writeln!(s, "steps = {}", self.steps.len());
        let _ = writeln!(s, "max_mass_drift = {:e}", self.max_mass_drift);
        let opt = |v: Option<f64>| v.map_or("n/a".to_string(), |x| format!("{x:e}"));
        let _ = writeln!(s, "l2_error = {}", opt(self.l2_error));
        let _ = writeln!(s, "support_mismatch = {}", opt(self.support_mismatch));
        let _ = writeln!(s, "max_outside = {}", opt(self.max_outside));
        let _ = writeln!(s, "eccentricity = {}", opt(self.eccentricity));
        for (t, c) in &self.components {
            let _ = writeln!(s, "components(t = {t}) = {c}");
        }
        let _ = writeln!(s, "seconds = {:.1}", self.seconds);
        for c in &self.checks {
            let _ = writeln!(
                s,
                "[{}] {}: {}",
                if c.passed { "PASS" } else { "FAIL" },
                c.name,
                c.detail
            );
        }
        s
    }
}

pub fn write_history_csv(path: impl AsRef<Path>, rows: &[HistoryRow]) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::from("time,total_mass,min_u,max_u,clipped_nodes\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            r.time, r.total_mass, r.min_u, r.max_u, r.clipped_nodes
        );
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Interval end points `t0 < t1 < ... < T`, refined so that every requested
/// check time is hit exactly.
fn time_grid(t0: f64, t_end: f64, dt: f64, extra: &[f64]) -> Vec<f64> {
    let n = ((t_end - t0) / dt - 1e-9).ceil().max(1.0) as usize;
    let mut times: Vec<f64> = (0..n).map(|k| t0 + k as f64 * dt).collect();
    times.push(t_end);
    for &t in extra {
        if t > t0 && t < t_end {
            times.push(t);
        }
    }
    times.sort_by(f64::total_cmp);
    let tol = 1e-9 * dt;
    times.dedup_by(|b, a| (*b - *a).abs() <= tol);
    *times.last_mut().unwrap() = t_end;
    times
}

fn boundary_max(mesh: &Triangulation, u: &[f64]) -> f64 {
    (0..mesh.n_vertices())
        .filter(|&i| mesh.is_boundary(i))
        .map(|i| u[i].abs())
        .fold(0.0, f64::max)
}

/// True when no vertex next to the boundary exceeds `REGION_THRESHOLD`
/// relative to the maximum (the degenerate scheme leaves exponentially small
/// values everywhere, so a strict positivity test would never hold).
fn support_inside(mesh: &Triangulation, u: &[f64]) -> bool {
    let scale = u.iter().copied().fold(0.0, f64::max);
    let tol = REGION_THRESHOLD * scale;
    mesh.edges().iter().all(|e| {
        let [a, b] = e.v;
        match (mesh.is_boundary(a), mesh.is_boundary(b)) {
            (true, false) => u[b] <= tol,
            (false, true) => u[a] <= tol,
            _ => true,
        }
    })
}

struct Runner<'a> {
    cfg: &'a ExperimentConfig,
    out: Option<PathBuf>,
    d: DiffusionField,
    exact: Option<AnisotropicExact>,
    history: Vec<HistoryRow>,
    steps: Vec<StepRecord>,
    adapt_log: Vec<(f64, PassLog)>,
    snapshots: Vec<Snapshot>,
    components: Vec<(f64, usize)>,
    count_violations: Vec<(f64, usize)>,
    max_mass_drift: f64,
}

impl<'a> Runner<'a> {
    fn snapshot(&mut self, step: usize, mesh: &Triangulation, u: &SolutionField) -> Result<()> {
        let path = match &self.out {
            Some(dir) => {
                let p = dir.join(format!("snap_{step}.vtk"));
                let fields = VtkFields {
                    point_scalars: vec![("u", &u.values)],
                    ..Default::default()
                };
                write_vtk(&p, mesh, &format!("{} t={}", self.cfg.name, u.time), &fields)?;
                Some(p)
            }
            None => None,
        };
        self.snapshots.push(Snapshot {
            step,
            time: u.time,
            n_elements: mesh.n_elements(),
            min_u: u.min(),
            boundary_max: boundary_max(mesh, &u.values),
            path,
        });
        Ok(())
    }

    fn write_logs(&self) -> Result<()> {
        if let Some(dir) = &self.out {
            write_steps_csv(dir.join("steps.csv"), &self.steps)?;
            write_history_csv(dir.join("history.csv"), &self.history)?;
            if !self.adapt_log.is_empty() {
                write_adapt_csv(dir.join("adapt.csv"), &self.adapt_log)?;
            }
        }
        Ok(())
    }

    fn initial(&mut self) -> Result<(Triangulation, SolutionField)> {
        let cfg = self.cfg;
        let t0 = cfg.start_time()?;
        let u0 = cfg.initial_function()?;
        let cells = seed_cells(cfg.target_n);
        let seed = generate_fixed_mesh(cfg.domain, cells, cells)?;
        match cfg.metric_strategy() {
            None => {
                let u = SolutionField::sample(&seed, t0, &u0);
                Ok((seed, u))
            }
            Some(strategy) => {
                let d = &self.d;
                let (mesh, u, log) = iterate_initial_mesh(
                    &seed,
                    t0,
                    &u0,
                    |m, v| strategy.build(m, v, d),
                    &cfg.adapt_params(),
                    cfg.k_init,
                )?;
                self.adapt_log.extend(log.into_iter().map(|p| (t0, p)));
                Ok((mesh, u))
            }
        }
    }

    fn execute(&mut self) -> Result<(Triangulation, SolutionField)> {
        let cfg = self.cfg;
        let t0 = cfg.start_time()?;
        let strategy = cfg.metric_strategy();
        let params = cfg.adapt_params();
        let target = cfg.target_n as f64;
        let check_times: Vec<f64> = cfg
            .checks
            .connected_at
            .iter()
            .chain(&cfg.checks.disconnected_at)
            .copied()
            .collect();
        let times = time_grid(t0, cfg.t_end, cfg.adapt_interval()?, &check_times);
        let is_check = |t: f64| check_times.iter().any(|&c| (c - t).abs() <= 1e-9 * (1.0 + c.abs()));

        let (mut mesh, mut u) = self.initial()?;
        let mass0 = total_mass(&mesh, &u)?;
        let mut inside = support_inside(&mesh, &u.values);
        self.history.push(HistoryRow {
            time: t0,
            total_mass: mass0,
            min_u: u.min(),
            max_u: u.max(),
            clipped_nodes: 0,
        });
        if strategy.is_some() && !(0.5 * target..=2.0 * target).contains(&(mesh.n_elements() as f64)) {
            self.count_violations.push((t0, mesh.n_elements()));
        }
        self.snapshot(0, &mesh, &u)?;

        let mut next_dt = cfg.integrator.dt_init;
        let last = times.len() - 1;
        for (n, w) in times.windows(2).enumerate() {
            let (ta, tb) = (w[0], w[1]);
            let mut clipped = 0;
            if let (Some(s), true) = (strategy, n > 0) {
                let metric = normalize_metric(&s.build(&mesh, &u.values, &self.d)?, cfg.target_n)?;
                let (new_mesh, report) = adapt_to_target(&mesh, &metric, &params)?;
                let (new_u, tr) = transfer(&mesh, &u, &new_mesh)?;
                clipped += tr.clipped;
                self.adapt_log.extend(report.passes.into_iter().map(|p| (ta, p)));
                mesh = new_mesh;
                u = new_u;
                if !(0.5 * target..=2.0 * target).contains(&(mesh.n_elements() as f64)) {
                    self.count_violations.push((ta, mesh.n_elements()));
                }
            }
            let sys = OdeRightHandSide::new(Discretization::new(&mesh, &self.d, cfg.m)?);
            let mut icfg = cfg.integrator;
            icfg.dt_init = next_dt.min(tb - ta).min(icfg.dt_max).max(icfg.dt_min);
            let report = integrate_interval(&sys, &mut u.values, ta, tb, &icfg)?;
            next_dt = report.next_dt;
            clipped += report.steps.iter().map(|s| s.clipped_nodes).sum::<usize>();
            self.steps.extend(report.steps);
            u.time = tb;

            let mass = total_mass(&mesh, &u)?;
            inside = inside && support_inside(&mesh, &u.values);
            if inside {
                self.max_mass_drift = self
                    .max_mass_drift
                    .max((mass - mass0).abs() / mass0.abs().max(f64::MIN_POSITIVE));
            }
            self.history.push(HistoryRow {
                time: tb,
                total_mass: mass,
                min_u: u.min(),
                max_u: u.max(),
                clipped_nodes: clipped,
            });
            log::info!(
                "t = {tb:.6} N = {} steps = {} (rejected {}) mass = {mass:.6e} max u = {:.4e}",
                mesh.n_elements(),
                report.accepted,
                report.rejected,
                u.max()
            );
            if is_check(tb) {
                self.components
                    .push((tb, analysis::count_components(&mesh, &u.values, cfg.checks.threshold)));
            }
            let step = n + 1;
            let every = cfg.output.snapshot_every;
            if step == last || is_check(tb) || (every > 0 && step % every == 0) {
                self.snapshot(step, &mesh, &u)?;
            }
        }
        Ok((mesh, u))
    }

    fn finish(self, mesh: Triangulation, u: SolutionField, seconds: f64) -> Result<RunSummary> {
        let cfg = self.cfg;
        let mut checks = Vec::new();
        let worst_min = self.snapshots.iter().map(|s| s.min_u).fold(f64::INFINITY, f64::min);
        let worst_boundary = self.snapshots.iter().map(|s| s.boundary_max).fold(0.0, f64::max);
        checks.push(Check::new(
            "snapshot_nonnegative",
            worst_min >= 0.0,
            format!(
                "min nodal value over {} snapshots = {worst_min:e}",
                self.snapshots.len()
            ),
        ));
        checks.push(Check::new(
            "snapshot_boundary_zero",
            worst_boundary == 0.0,
            format!("max |u| on boundary = {worst_boundary:e}"),
        ));
        if cfg.metric_strategy().is_some() {
            checks.push(Check::new(
                "element_count",
                self.count_violations.is_empty(),
                format!(
                    "{} adaptation steps outside [0.5, 2] x {} (first: {:?})",
                    self.count_violations.len(),
                    cfg.target_n,
                    self.count_violations.first()
                ),
            ));
        }
        checks.push(Check::new(
            "mass_drift",
            self.max_mass_drift <= MASS_DRIFT_TOLERANCE,
            format!("max relative drift while supported inside = {:e}", self.max_mass_drift),
        ));

        let t = u.time;
        let mut l2 = None;
        let mut mismatch = None;
        let mut outside = None;
        if let Some(e) = &self.exact {
            let err = l2_error(&mesh, &u, |p| apme_solution(e, p, t).unwrap_or(0.0))?;
            l2 = Some(err);
            let mis = analysis::support_mismatch(&mesh, &u.values, e, t, REGION_THRESHOLD, SAMPLE_GRID)?;
            mismatch = Some(mis);
            checks.push(Check::new(
                "support_mismatch",
                mis <= SUPPORT_MISMATCH_TOLERANCE,
                format!("symmetric difference / exact support area = {mis:.4}"),
            ));
            let out = analysis::max_outside_support(&mesh, &u.values, e, t, SUPPORT_INFLATION);
            outside = Some(out);
            checks.push(Check::new(
                "outside_support",
                out < OUTSIDE_TOLERANCE,
                format!("max nodal value outside the inflated exact ellipse = {out:e}"),
            ));
        }
        for &tc in &cfg.checks.connected_at {
            let c = self
                .components
                .iter()
                .find(|(t, _)| (t - tc).abs() <= 1e-9 * (1.0 + tc.abs()));
            checks.push(Check::new(
                "connected",
                c.is_some_and(|(_, k)| *k == 1),
                format!(
                    "components of {{u > {}}} at t = {tc}: {:?}",
                    cfg.checks.threshold,
                    c.map(|c| c.1)
                ),
            ));
        }
        for &tc in &cfg.checks.disconnected_at {
            let c = self
                .components
                .iter()
                .find(|(t, _)| (t - tc).abs() <= 1e-9 * (1.0 + tc.abs()));
            checks.push(Check::new(
                "disconnected",
                c.is_some_and(|(_, k)| *k >= 2),
                format!(
                    "components of {{u > {}}} at t = {tc}: {:?}",
                    cfg.checks.threshold,
                    c.map(|c| c.1)
                ),
            ));
        }
        let eccentricity = analysis::region_eccentricity(&mesh, &u.values, REGION_THRESHOLD, SAMPLE_GRID);
        let summary = RunSummary {
            name: cfg.name.clone(),
            strategy: cfg.strategy,
            mesh,
            solution: u,
            history: self.history,
            steps: self.steps,
            adapt_log: self.adapt_log,
            snapshots: self.snapshots,
            components: self.components,
            max_mass_drift: self.max_mass_drift,
            l2_error: l2,
            support_mismatch: mismatch,
            max_outside: outside,
            eccentricity,
            checks,
            seconds,
        };
        if let Some(dir) = &self.out {
            let p = dir.join("summary.txt");
            std::fs::write(&p, summary.report()).map_err(|e| Error::io(&p, e))?;
        }
        Ok(summary)
    }
}

/// Runs one experiment. When `out` is given, snapshots and logs are written
/// there; logs are written even if the run aborts.
pub fn run_simulation(cfg: &ExperimentConfig, out: Option<&Path>) -> Result<RunSummary> {
    cfg.validate()?;
    let start = Instant::now();
    if let Some(dir) = out {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let mut runner = Runner {
        cfg,
        out: out.map(Path::to_path_buf),
        d: cfg.diffusion.build()?,
        exact: cfg.exact(),
        history: Vec::new(),
        steps: Vec::new(),
        adapt_log: Vec::new(),
        snapshots: Vec::new(),
        components: Vec::new(),
        count_violations: Vec::new(),
        max_mass_drift: 0.0,
    };
    match runner.execute() {
        Ok((mesh, u)) => {
            runner.write_logs()?;
            runner.finish(mesh, u, start.elapsed().as_secs_f64())
        }
        Err(e) => {
            if let Err(w) = runner.write_logs() {
                log::error!("could not write partial logs: {w}");
            }
            Err(e)
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConvergenceRecord {
    pub label: String,
    pub strategy: Strategy,
    pub alpha_h: Option<f64>,
    pub target_n: usize,
    /// Elements of the final mesh.
    pub n_elements: usize,
    pub l2_error: f64,
    pub ref_sqrt: f64,
    pub ref_linear: f64,
    /// Fitted slope of the whole sweep of this label.
    pub slope: f64,
    pub failure: Option<String>,
    pub seconds: f64,
}

#[derive(Clone, Debug, Default)]
pub struct ConvergenceReport {
    pub records: Vec<ConvergenceRecord>,
}

impl ConvergenceReport {
    pub fn labels(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for r in &self.records {
            if !out.contains(&r.label) {
                out.push(r.label.clone());
            }
        }
        out
    }

    /// `(N, error)` pairs of the successful cells of `label`, by increasing N.
    pub fn series(&self, label: &str) -> Vec<(f64, f64)> {
        let mut s: Vec<(f64, f64)> = self
            .records
            .iter()
            .filter(|r| r.label == label && r.failure.is_none())
            .map(|r| (r.n_elements as f64, r.l2_error))
            .collect();
        s.sort_by(|a, b| a.0.total_cmp(&b.0));
        s
    }

    pub fn slope(&self, label: &str) -> Option<f64> {
        analysis::loglog_slope(&self.series(label))
    }

    /// Error of `label` at `n` by piecewise log-log interpolation, extended
    /// linearly beyond the sampled range.
    pub fn interpolate(&self, label: &str, n: f64) -> Option<f64> {
        let s = self.series(label);
        if s.len() < 2 {
            return None;
        }
        let i = s
            .iter()
            .position(|p| p.0 >= n)
            .unwrap_or(s.len() - 1)
            .clamp(1, s.len() - 1);
        let (a, b) = (s[i - 1], s[i]);
        let w = (n.ln() - a.0.ln()) / (b.0.ln() - a.0.ln());
        Some((a.1.ln() + w * (b.1.ln() - a.1.ln())).exp())
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("strategy,N,l2_error,ref_sqrt,ref_linear,slope\n");
        for r in &self.records {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                r.label, r.n_elements, r.l2_error, r.ref_sqrt, r.ref_linear, r.slope
            );
        }
        out
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }
}

/// Runs every (case, target) cell of the configured sweep, in parallel on
/// the current rayon pool. Failed cells are recorded and the sweep goes on.
pub fn run_convergence(cfg: &ExperimentConfig) -> Result<ConvergenceReport> {
    cfg.validate()?;
    let conv = cfg
        .convergence
        .as_ref()
        .ok_or_else(|| Error::Config("missing [convergence] section".into()))?;
    if cfg.exact().is_none() {
        return Err(Error::Config(
            "convergence needs a problem with a closed-form solution".into(),
        ));
    }
    let cells: Vec<(&SweepCase, usize)> = conv
        .cases
        .iter()
        .flat_map(|c| conv.targets.iter().map(move |&n| (c, n)))
        .collect();
    let mut records: Vec<ConvergenceRecord> = cells
        .par_iter()
        .map(|&(case, target)| {
            let mut cell = cfg.clone();
            cell.name = format!("{}_{}", case.label(), target);
            cell.strategy = case.strategy;
            cell.alpha_h = if case.strategy == Strategy::Adap {
                case.alpha_h
            } else {
                None
            };
            cell.target_n = target;
            cell.t_end = conv.t_end;
            cell.dt_adapt = None;
            cell.output = OutputConfig::default();
            cell.checks = ChecksConfig::default();
            let start = Instant::now();
            let result = run_simulation(&cell, None);
            let seconds = start.elapsed().as_secs_f64();
            let (n_elements, l2_error, failure) = match result {
                Ok(s) => (s.mesh.n_elements(), s.l2_error.unwrap_or(f64::NAN), None),
                Err(e) => (0, f64::NAN, Some(e.to_string())),
            };
            log::info!("{}: N = {n_elements} error = {l2_error:e} ({seconds:.1}s)", cell.name);
            let nf = n_elements.max(1) as f64;
            ConvergenceRecord {
                label: case.label(),
                strategy: case.strategy,
                alpha_h: case.alpha_h,
                target_n: target,
                n_elements,
                l2_error,
                ref_sqrt: 0.1 / nf.sqrt(),
                ref_linear: 1.0 / nf,
                slope: f64::NAN,
                failure,
                seconds,
            }
        })
        .collect();
    let mut report = ConvergenceReport {
        records: std::mem::take(&mut records),
    };
    for label in report.labels() {
        let slope = report.slope(&label).unwrap_or(f64::NAN);
        for r in report.records.iter_mut().filter(|r| r.label == label) {
            r.slope = slope;
        }
    }
    Ok(report)
}

#[derive(Clone, Debug, PartialEq)]
pub struct VerifyReport {
    pub t: f64,
    pub h: f64,
    pub points: usize,
    pub max_residual: f64,
    /// Same sample with step `2h`.
    pub max_residual_coarse: f64,
    /// `log2(max_residual_coarse / max_residual)`.
    pub observed_order: f64,
    /// Residual of `1.01 u` at step `h` (negative control).
    pub perturbed_max: f64,
}

impl VerifyReport {
    pub fn checks(&self, tolerance: f64) -> Vec<Check> {
        vec![
            Check::new(
                "sample_size",
                self.points >= 100,
                format!("{} interior points", self.points),
            ),
            Check::new(
                "max_residual",
                self.max_residual < tolerance,
                format!(
                    "max residual {:e} at h = {} (bound {tolerance:e})",
                    self.max_residual, self.h
                ),
            ),
            Check::new(
                "richardson_order",
                (self.observed_order - 2.0).abs() <= 0.4,
                format!(
                    "observed order {:.3} (2h residual {:e})",
                    self.observed_order, self.max_residual_coarse
                ),
            ),
            Check::new(
                "negative_control",
                self.perturbed_max > 10.0 * self.max_residual,
                format!("residual of 1.01 u = {:e}", self.perturbed_max),
            ),
        ]
    }
}

/// Finite-difference residual of the closed-form solution over a grid of
/// points well inside its support, at the midpoint of the time window.
pub fn verify_exact(cfg: &ExperimentConfig, h: f64, min_points: usize) -> Result<VerifyReport> {
    let e = cfg
        .exact()
        .ok_or_else(|| Error::Config("verify-exact needs constant diffusion and Barenblatt initial data".into()))?;
    let t0 = cfg.start_time()?;
    let t = t0 + 0.5 * (cfg.t_end - t0);
    let radius = 0.7 * e.params.r0 * e.params.kappa(t0.max(t - 4.0 * h * h));
    let root = sqrt_spd(&e.d);
    let mut n = 8;
    let points = loop {
        let pts: Vec<Point> = (0..n)
            .flat_map(|j| (0..n).map(move |i| (i, j)))
            .map(|(i, j)| {
                let s = |k: usize| -1.0 + 2.0 * (k as f64 + 0.5) / n as f64;
                Vec2::new(s(i), s(j))
            })
            .filter(|xi| xi.norm() <= 1.0)
            .map(|xi| Point::from(root * xi * radius))
            .collect();
        if pts.len() >= min_points {
            break pts;
        }
        n += 1;
    };
    let mut max_h = 0.0f64;
    let mut max_2h = 0.0f64;
    let mut max_p = 0.0f64;
    for x in &points {
        max_h = max_h.max(residual_check(&e, x, t, h)?);
        max_2h = max_2h.max(residual_check(&e, x, t, 2.0 * h)?);
        let perturbed = |y: &Point, s: f64| 1.01 * apme_solution(&e, y, s).unwrap_or(0.0);
        max_p = max_p.max(fd_residual(perturbed, e.params.m, &e.d, x, t, h));
    }
    Ok(VerifyReport {
        t,
        h,
        points: points.len(),
        max_residual: max_h,
        max_residual_coarse: max_2h,
        observed_order: (max_2h / max_h).log2(),
        perturbed_max: max_p,
    })
}
