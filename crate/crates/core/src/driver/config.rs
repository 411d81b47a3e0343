use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::adapt::AdaptParams;
use crate::error::{Error, Result};
use crate::exact::{AnisotropicExact, BarenblattParams};
use crate::integrate::IntegratorConfig;
use crate::linalg::{Mat2, Point};
use crate::mesh::Rect;
use crate::metric::{AngleField, DiffusionField, MetricStrategy};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    Fixed,
    Adap,
    Dmp,
    DmpAdap,
}

impl Strategy {
    pub fn name(&self) -> &'static str {
        match self {
            Strategy::Fixed => "fixed",
            Strategy::Adap => "adap",
            Strategy::Dmp => "dmp",
            Strategy::DmpAdap => "dmp_adap",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Deserialize, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DiffusionSpec {
    Constant {
        matrix: [[f64; 2]; 2],
    },
    /// `R(θ) diag(λ₁, λ₂) R(θ)ᵀ` with `θ = amplitude sin(kx x) cos(ky y)`.
    Rotation {
        lambda: [f64; 2],
        amplitude: f64,
        kx: f64,
        ky: f64,
    },
}

impl DiffusionSpec {
    pub fn build(&self) -> Result<DiffusionField> {
        match *self {
            DiffusionSpec::Constant { matrix } => {
                DiffusionField::constant(Mat2::new(matrix[0][0], matrix[0][1], matrix[1][0], matrix[1][1]))
            }
            DiffusionSpec::Rotation {
                lambda,
                amplitude,
                kx,
                ky,
            } => DiffusionField::rotation(lambda, AngleField::SinCos { amplitude, kx, ky }),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Deserialize, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialSpec {
    /// Elliptic Barenblatt profile `(1 - xᵀD⁻¹x / r0²)_+^{1/m}`.
    ApmeEllipse,
    /// Circular Barenblatt profile `(1 - |x|² / r0²)_+^{1/m}`.
    PmeCircle,
    /// Indicator of a union of closed boxes `[x_min, x_max, y_min, y_max]`.
    Boxes { boxes: Vec<[f64; 4]> },
}

/// Initial data `u0(x)` as a shareable closure.
pub type InitialFn = Box<dyn Fn(&Point) -> f64 + Send + Sync>;

#[derive(Clone, Debug, Default, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: Option<PathBuf>,
    /// Write a VTK snapshot every this many adaptation intervals (0: first and last only).
    #[serde(default)]
    pub snapshot_every: usize,
}

#[derive(Clone, Debug, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct SweepCase {
    pub strategy: Strategy,
    pub alpha_h: Option<f64>,
    pub label: Option<String>,
}

impl SweepCase {
    pub fn label(&self) -> String {
        self.label
            .clone()
            .unwrap_or_else(|| match (self.strategy, self.alpha_h) {
                (Strategy::Adap, Some(a)) => format!("adap_{a}"),
                (s, _) => s.name().to_string(),
            })
    }
}

#[derive(Clone, Debug, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ConvergenceConfig {
    pub t_end: f64,
    pub targets: Vec<usize>,
    pub cases: Vec<SweepCase>,
}

/// Connectivity expectations of the region `{u > threshold}` at given times.
#[derive(Clone, Debug, Default, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ChecksConfig {
    #[serde(default)]
    pub connected_at: Vec<f64>,
    #[serde(default)]
    pub disconnected_at: Vec<f64>,
    #[serde(default = "default_threshold")]
    pub threshold: f64,
}

fn default_threshold() -> f64 {
    1e-3
}

#[derive(Clone, Debug, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_name")]
    pub name: String,
    pub domain: Rect,
    pub m: f64,
    pub diffusion: DiffusionSpec,
    pub initial: InitialSpec,
    #[serde(default = "default_r0")]
    pub r0: f64,
    /// Start time; derived from `m` and `r0` for Barenblatt data when absent.
    pub t0: Option<f64>,
    pub t_end: f64,
    pub dt_adapt: Option<f64>,
    pub strategy: Strategy,
    pub alpha_h: Option<f64>,
    pub target_n: usize,
    #[serde(default = "default_k_init")]
    pub k_init: usize,
    #[serde(default = "default_max_passes")]
    pub max_passes: usize,
    #[serde(default)]
    pub integrator: IntegratorConfig,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default)]
    pub checks: ChecksConfig,
    pub convergence: Option<ConvergenceConfig>,
}

fn default_name() -> String {
    "run".into()
}

fn default_r0() -> f64 {
    0.5
}

fn default_k_init() -> usize {
    5
}

fn default_max_passes() -> usize {
    10
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        Rect::new(
            self.domain.x_min,
            self.domain.x_max,
            self.domain.y_min,
            self.domain.y_max,
        )
        .map_err(|e| Error::Config(e.to_string()))?;
        if !(self.m >= 0.0) {
            return bad(format!("m must be >= 0, got {}", self.m));
        }
        self.diffusion
            .build()
            .map_err(|_| Error::Config("diffusion matrix is not SPD".into()))?;
        if !(self.r0 > 0.0) {
            return bad(format!("r0 must be positive, got {}", self.r0));
        }
        let t0 = self.start_time()?;
        if !(self.t_end > t0) {
            return bad(format!("t_end {} must exceed t0 {t0}", self.t_end));
        }
        if let Some(dt) = self.dt_adapt {
            if !(dt > 0.0) {
                return bad(format!("dt_adapt must be positive, got {dt}"));
            }
        }
        if self.strategy == Strategy::Adap && !self.alpha_h.is_some_and(|a| a > 0.0) {
            return bad("strategy 'adap' needs a positive alpha_h".into());
        }
        if self.strategy != Strategy::Adap && self.alpha_h.is_some() {
            return bad(format!(
                "alpha_h is only used by strategy 'adap', not '{}'",
                self.strategy.name()
            ));
        }
        if self.target_n == 0 {
            return bad("target_n must be >= 1".into());
        }
        self.integrator.validate().map_err(|e| Error::Config(e.to_string()))?;
        if let Some(c) = &self.convergence {
            if c.targets.is_empty() || c.cases.is_empty() {
                return bad("convergence needs targets and cases".into());
            }
            for case in &c.cases {
                if case.strategy == Strategy::Adap && !case.alpha_h.is_some_and(|a| a > 0.0) {
                    return bad("convergence case 'adap' needs a positive alpha_h".into());
                }
            }
        }
        Ok(())
    }

    pub fn barenblatt(&self) -> Result<BarenblattParams> {
        BarenblattParams::new(self.m, self.r0)
    }

    pub fn start_time(&self) -> Result<f64> {
        match (self.t0, &self.initial) {
            (Some(t0), _) => Ok(t0),
            (None, InitialSpec::Boxes { .. }) => Ok(0.0),
            (None, _) => Ok(self.barenblatt().map_err(|e| Error::Config(e.to_string()))?.t0),
        }
    }

    /// Interval between mesh adaptations.
    pub fn adapt_interval(&self) -> Result<f64> {
        let t0 = self.start_time()?;
        Ok(self.dt_adapt.unwrap_or(match self.initial {
            InitialSpec::Boxes { .. } => self.t_end / 120.0,
            _ => (self.t_end - t0) / 64.0,
        }))
    }

    pub fn metric_strategy(&self) -> Option<MetricStrategy> {
        strategy_metric(self.strategy, self.alpha_h)
    }

    pub fn adapt_params(&self) -> AdaptParams {
        AdaptParams {
            target_n: self.target_n,
            max_passes: self.max_passes,
            ..AdaptParams::default()
        }
    }

    /// Closed-form solution, available for elliptic Barenblatt data under a
    /// constant diffusion matrix (and circular data when `D = I`).
    pub fn exact(&self) -> Option<AnisotropicExact> {
        let d = self.diffusion.build().ok()?.as_constant()?;
        let params = self.barenblatt().ok()?;
        if self
            .t0
            .is_some_and(|t0| (t0 - params.t0).abs() > 1e-15 * params.t0.max(1.0))
        {
            return None;
        }
        match self.initial {
            InitialSpec::ApmeEllipse => AnisotropicExact::new(params, d).ok(),
            InitialSpec::PmeCircle if d == Mat2::identity() => AnisotropicExact::new(params, d).ok(),
            _ => None,
        }
    }

    /// Initial data as a point function.
    pub fn initial_function(&self) -> Result<InitialFn> {
        match &self.initial {
            InitialSpec::ApmeEllipse => {
                let d =
                    self.diffusion.build()?.as_constant().ok_or_else(|| {
                        Error::Config("elliptic initial data needs a constant diffusion matrix".into())
                    })?;
                let e = AnisotropicExact::new(self.barenblatt()?, d)?;
                Ok(Box::new(move |p| crate::exact::apme_initial(&e, p)))
            }
            InitialSpec::PmeCircle => {
                let b = self.barenblatt()?;
                Ok(Box::new(move |p| crate::exact::pme_initial(&b, p)))
            }
            InitialSpec::Boxes { boxes } => {
                let boxes = boxes.clone();
                Ok(Box::new(move |p| {
                    let inside = boxes
                        .iter()
                        .any(|b| p.x >= b[0] && p.x <= b[1] && p.y >= b[2] && p.y <= b[3]);
                    if inside {
                        1.0
                    } else {
                        0.0
                    }
                }))
            }
        }
    }
}

pub fn strategy_metric(strategy: Strategy, alpha_h: Option<f64>) -> Option<MetricStrategy> {
    match strategy {
        Strategy::Fixed => None,
        Strategy::Adap => Some(MetricStrategy::Adap {
            alpha_h: alpha_h.unwrap_or(0.01),
        }),
        Strategy::Dmp => Some(MetricStrategy::Dmp),
        Strategy::DmpAdap => Some(MetricStrategy::DmpAdap),
    }
}
