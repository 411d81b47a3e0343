use std::sync::Arc;

use super::{IntegratorConfig, IntervalReport, JacobianMode, OdeSystem, StepRecord};
use crate::error::{Error, Result};
use crate::sparse::{CsrMatrix, SparseLu, SparsityPattern};

const SQ6: f64 = 2.449_489_742_783_178;
const C1: f64 = (4.0 - SQ6) / 10.0;
const C2: f64 = (4.0 + SQ6) / 10.0;
const C1M1: f64 = C1 - 1.0;
const C2M1: f64 = C2 - 1.0;
const C1MC2: f64 = C1 - C2;
const DD1: f64 = -(13.0 + 7.0 * SQ6) / 3.0;
const DD2: f64 = (-13.0 + 7.0 * SQ6) / 3.0;
const DD3: f64 = -1.0 / 3.0;

/// Stage abscissae.
pub const RADAU_C: [f64; 3] = [C1, C2, 1.0];

/// Butcher matrix of the three-stage Radau IIA method.
pub const RADAU_A: [[f64; 3]; 3] = [
    [
        (88.0 - 7.0 * SQ6) / 360.0,
        (296.0 - 169.0 * SQ6) / 1800.0,
        (-2.0 + 3.0 * SQ6) / 225.0,
    ],
    [
        (296.0 + 169.0 * SQ6) / 1800.0,
        (88.0 + 7.0 * SQ6) / 360.0,
        (-2.0 - 3.0 * SQ6) / 225.0,
    ],
    [(16.0 - SQ6) / 36.0, (16.0 + SQ6) / 36.0, 1.0 / 9.0],
];

// T diagonalises A⁻¹ to the real block form diag(γ, [[α, -β], [β, α]]).
const T: [[f64; 3]; 3] = [
    [
        9.123_239_487_089_294_279_2e-2,
        -0.141_255_295_020_954_208_43,
        -3.002_919_410_514_742_449_2e-2,
    ],
    [
        0.241_717_932_707_107_018_96,
        0.204_129_352_293_799_931_99,
        0.382_942_112_757_261_937_79,
    ],
    [0.966_048_182_615_092_936_19, 1.0, 0.0],
];
const TI: [[f64; 3]; 3] = [
    [
        4.325_579_890_063_155_351,
        0.339_199_251_815_809_869_54,
        0.541_770_539_935_874_871_19,
    ],
    [
        -4.178_718_591_551_904_727_3,
        -0.327_682_820_761_062_387_08,
        0.476_623_554_500_550_451_96,
    ],
    [
        -0.502_872_634_945_786_875_95,
        2.571_926_949_855_605_429_2,
        -0.596_039_204_828_224_924_97,
    ],
];

/// `(γ, α, β)`: the real eigenvalue and complex pair of `A⁻¹`.
fn eigen_constants() -> (f64, f64, f64) {
    let c81 = 81f64.cbrt();
    let c9 = 9f64.cbrt();
    let u1 = (6.0 + c81 - c9) / 30.0;
    let alph = (12.0 - c81 + c9) / 60.0;
    let beta = (c81 + c9) * 3f64.sqrt() / 60.0;
    let cno = alph * alph + beta * beta;
    (1.0 / u1, alph / cno, beta / cno)
}

/// Outcome of one attempted step.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum StepAttempt {
    /// Newton converged; `error` is the scaled error estimate.
    Converged { error: f64, newton_iters: usize },
    /// Newton diverged or was too slow; `factor` is the suggested step reduction.
    NewtonFailed { factor: f64, newton_iters: usize },
}

/// Radau IIA stepper bound to one system; keeps factorisations, work
/// vectors and the collocation polynomial of the last accepted step.
pub struct Radau5<'a, S: OdeSystem> {
    sys: &'a S,
    cfg: IntegratorConfig,
    n: usize,
    gamma: f64,
    alpha: f64,
    beta: f64,
    lu1: SparseLu,
    lu2: SparseLu,
    pattern2: Arc<SparsityPattern>,
    /// For every slot of the base pattern: slots of `(i, j)`, `(i, n+j)`,
    /// `(n+i, j)`, `(n+i, n+j)` in the doubled pattern.
    slots2: Vec<[usize; 4]>,
    z: [Vec<f64>; 3],
    w: [Vec<f64>; 3],
    f: [Vec<f64>; 3],
    scal: Vec<f64>,
    f0: Vec<f64>,
    tmp: Vec<f64>,
    tmp2: Vec<f64>,
    /// Collocation polynomial coefficients of the last accepted step.
    cont: [Vec<f64>; 3],
    h_old: f64,
    have_cont: bool,
    faccon: f64,
    pub last_theta: f64,
}

impl<'a, S: OdeSystem> Radau5<'a, S> {
    pub fn new(sys: &'a S, cfg: IntegratorConfig) -> Result<Self> {
        let n = sys.dim();
        let base = sys.mass().pattern().clone();
        let mut rows = vec![Vec::new(); 2 * n];
        for i in 0..n {
            for p in base.row(i) {
                let j = base.col(p);
                rows[i].extend_from_slice(&[j, n + j]);
                rows[n + i].extend_from_slice(&[j, n + j]);
            }
        }
        let pattern2 = Arc::new(SparsityPattern::from_rows(rows));
        let mut slots2 = Vec::with_capacity(base.nnz());
        for i in 0..n {
            for p in base.row(i) {
                let j = base.col(p);
                let f = |r, c| pattern2.find(r, c).expect("doubled pattern");
                slots2.push([f(i, j), f(i, n + j), f(n + i, j), f(n + i, n + j)]);
            }
        }
        let (gamma, alpha, beta) = eigen_constants();
        let zeros = || vec![0.0; n];
        Ok(Radau5 {
            sys,
            cfg,
            n,
            gamma,
            alpha,
            beta,
            lu1: SparseLu::new(base)?,
            lu2: SparseLu::new(pattern2.clone())?,
            pattern2,
            slots2,
            z: [zeros(), zeros(), zeros()],
            w: [zeros(), zeros(), zeros()],
            f: [zeros(), zeros(), zeros()],
            scal: zeros(),
            f0: zeros(),
            tmp: zeros(),
            tmp2: vec![0.0; 2 * n],
            cont: [zeros(), zeros(), zeros()],
            h_old: 0.0,
            have_cont: false,
            faccon: 1.0,
            last_theta: 0.0,
        })
    }

    fn factorize(&mut self, jac: &CsrMatrix, h: f64) -> Result<()> {
        let m = self.sys.mass();
        let fac1 = self.gamma / h;
        let e1 = m.combine(fac1, jac, -1.0);
        self.lu1.factorize(&e1)?;
        let (a, b) = (self.alpha / h, self.beta / h);
        let mut e2 = CsrMatrix::zeros(self.pattern2.clone());
        {
            let vals = e2.values_mut();
            for (p, s) in self.slots2.iter().enumerate() {
                let mv = m.values()[p];
                let jv = jac.values()[p];
                vals[s[0]] = a * mv - jv;
                vals[s[1]] = -b * mv;
                vals[s[2]] = b * mv;
                vals[s[3]] = a * mv - jv;
            }
        }
        self.lu2.factorize(&e2)
    }

    fn scaled_rms(&self, v: &[f64]) -> f64 {
        let s: f64 = v.iter().zip(&self.scal).map(|(x, s)| (x / s) * (x / s)).sum();
        (s / self.n as f64).sqrt()
    }

    /// Starting stage increments: extrapolated collocation polynomial of the
    /// previous step when available, zero otherwise.
    fn initial_stages(&mut self, h: f64) {
        if self.have_cont {
            let c3q = h / self.h_old;
            let c1q = C1 * c3q;
            let c2q = C2 * c3q;
            for i in 0..self.n {
                let (ak1, ak2, ak3) = (self.cont[0][i], self.cont[1][i], self.cont[2][i]);
                self.z[0][i] = c1q * (ak1 + (c1q - C2M1) * (ak2 + (c1q - C1M1) * ak3));
                self.z[1][i] = c2q * (ak1 + (c2q - C2M1) * (ak2 + (c2q - C1M1) * ak3));
                self.z[2][i] = c3q * (ak1 + (c3q - C2M1) * (ak2 + (c3q - C1M1) * ak3));
            }
        } else {
            for s in 0..3 {
                self.z[s].iter_mut().for_each(|v| *v = 0.0);
            }
        }
        for i in 0..self.n {
            let (z1, z2, z3) = (self.z[0][i], self.z[1][i], self.z[2][i]);
            for s in 0..3 {
                self.w[s][i] = TI[s][0] * z1 + TI[s][1] * z2 + TI[s][2] * z3;
            }
        }
    }

    /// One step of size `h` from `y`: solves the stage equations and computes
    /// the error estimate. On success the stage increments are kept so that
    /// [`Radau5::accept`] can form the new state.
    pub fn attempt(&mut self, y: &[f64], h: f64, mode: JacobianMode, first: bool) -> Result<StepAttempt> {
        let n = self.n;
        for i in 0..n {
            self.scal[i] = self.cfg.atol + self.cfg.rtol * y[i].abs();
        }
        let jac = self.sys.jacobian(y, mode);
        if self.factorize(&jac, h).is_err() {
            return Ok(StepAttempt::NewtonFailed {
                factor: 0.5,
                newton_iters: 0,
            });
        }
        self.sys.rhs(y, &mut self.f0);
        self.initial_stages(h);

        let nit = self.cfg.newton_max_iters;
        let fac1 = self.gamma / h;
        let (an, bn) = (self.alpha / h, self.beta / h);
        let mass = self.sys.mass();
        self.faccon = self.faccon.max(f64::EPSILON).powf(0.8);
        let mut theta = 0.0;
        let mut thqold = 0.0;
        let mut dynold = 0.0;
        let mut newt = 0;
        let mut mw = [vec![0.0; n], vec![0.0; n], vec![0.0; n]];
        loop {
            if newt >= nit {
                return Ok(StepAttempt::NewtonFailed {
                    factor: 0.5,
                    newton_iters: newt,
                });
            }
            for s in 0..3 {
                for i in 0..n {
                    self.tmp[i] = y[i] + self.z[s][i];
                }
                self.sys.rhs(&self.tmp, &mut self.f[s]);
            }
            for s in 0..3 {
                mass.mul_vec(&self.w[s], &mut mw[s]);
            }
            // transformed right-hand sides
            let mut r1 = vec![0.0; n];
            for i in 0..n {
                let (f1, f2, f3) = (self.f[0][i], self.f[1][i], self.f[2][i]);
                let tf1 = TI[0][0] * f1 + TI[0][1] * f2 + TI[0][2] * f3;
                let tf2 = TI[1][0] * f1 + TI[1][1] * f2 + TI[1][2] * f3;
                let tf3 = TI[2][0] * f1 + TI[2][1] * f2 + TI[2][2] * f3;
                r1[i] = tf1 - fac1 * mw[0][i];
                self.tmp2[i] = tf2 - an * mw[1][i] + bn * mw[2][i];
                self.tmp2[n + i] = tf3 - an * mw[2][i] - bn * mw[1][i];
            }
            if self.lu1.solve(&mut r1).is_err() || self.lu2.solve(&mut self.tmp2).is_err() {
                return Ok(StepAttempt::NewtonFailed {
                    factor: 0.5,
                    newton_iters: newt,
                });
            }
            newt += 1;
            let mut sum = 0.0;
            for i in 0..n {
                let s2 = self.scal[i] * self.scal[i];
                sum += (r1[i] * r1[i] + self.tmp2[i] * self.tmp2[i] + self.tmp2[n + i] * self.tmp2[n + i]) / s2;
            }
            let dyno = (sum / (3 * n) as f64).sqrt();
            if !dyno.is_finite() {
                return Ok(StepAttempt::NewtonFailed {
                    factor: 0.5,
                    newton_iters: newt,
                });
            }
            if newt > 1 && newt < nit {
                let thq = dyno / dynold;
                theta = if newt == 2 { thq } else { (thq * thqold).sqrt() };
                thqold = thq;
                if theta < 0.99 {
                    self.faccon = theta / (1.0 - theta);
                    let dyth = self.faccon * dyno * theta.powi((nit - 1 - newt) as i32) / self.cfg.newton_tol;
                    if dyth >= 1.0 {
                        let qnewt = dyth.clamp(1e-4, 20.0);
                        let factor = 0.8 * qnewt.powf(-1.0 / (4.0 + nit as f64 - 1.0 - newt as f64));
                        return Ok(StepAttempt::NewtonFailed {
                            factor,
                            newton_iters: newt,
                        });
                    }
                } else {
                    return Ok(StepAttempt::NewtonFailed {
                        factor: 0.5,
                        newton_iters: newt,
                    });
                }
            }
            dynold = dyno.max(f64::EPSILON);
            for i in 0..n {
                self.w[0][i] += r1[i];
                self.w[1][i] += self.tmp2[i];
                self.w[2][i] += self.tmp2[n + i];
                let (w1, w2, w3) = (self.w[0][i], self.w[1][i], self.w[2][i]);
                for s in 0..3 {
                    self.z[s][i] = T[s][0] * w1 + T[s][1] * w2 + T[s][2] * w3;
                }
            }
            if self.faccon * dyno <= self.cfg.newton_tol {
                break;
            }
        }
        self.last_theta = theta;

        // embedded error estimate
        let mut f2 = vec![0.0; n];
        for i in 0..n {
            f2[i] = (DD1 * self.z[0][i] + DD2 * self.z[1][i] + DD3 * self.z[2][i]) / h;
        }
        let mut cont = vec![0.0; n];
        mass.mul_vec(&f2, &mut cont);
        let mf2 = cont.clone();
        for i in 0..n {
            cont[i] += self.f0[i];
        }
        if self.lu1.solve(&mut cont).is_err() {
            return Ok(StepAttempt::NewtonFailed {
                factor: 0.5,
                newton_iters: newt,
            });
        }
        let mut err = self.scaled_rms(&cont).max(1e-10);
        if err >= 1.0 && first {
            for i in 0..n {
                self.tmp[i] = y[i] + cont[i];
            }
            let mut fy = vec![0.0; n];
            self.sys.rhs(&self.tmp, &mut fy);
            for i in 0..n {
                cont[i] = fy[i] + mf2[i];
            }
            if self.lu1.solve(&mut cont).is_ok() {
                err = self.scaled_rms(&cont).max(1e-10);
            }
        }
        if !err.is_finite() {
            err = 1e10;
        }
        Ok(StepAttempt::Converged {
            error: err,
            newton_iters: newt,
        })
    }

    /// Applies the last converged attempt: `y ← y + Z₃`, post-step hook, and
    /// stores the collocation polynomial for the next starting values.
    pub fn accept(&mut self, y: &mut [f64], h: f64) -> usize {
        for i in 0..self.n {
            let (z1, z2, z3) = (self.z[0][i], self.z[1][i], self.z[2][i]);
            y[i] += z3;
            let c0 = (z2 - z3) / C2M1;
            let ak = (z1 - z2) / C1MC2;
            let acont3 = (ak - z1 / C1) / C2;
            let c1 = (ak - c0) / C1M1;
            self.cont[0][i] = c0;
            self.cont[1][i] = c1;
            self.cont[2][i] = c1 - acont3;
        }
        self.h_old = h;
        self.have_cont = true;
        self.sys.post_step(y)
    }

    /// Forgets the previous step (starting values restart from zero).
    pub fn reset(&mut self) {
        self.have_cont = false;
        self.faccon = 1.0;
    }

    /// Adaptive integration over `[t_a, t_b]`, landing exactly on `t_b`.
    pub fn integrate(&mut self, y: &mut [f64], t_a: f64, t_b: f64) -> Result<IntervalReport> {
        const SAFE: f64 = 0.9;
        const FACL: f64 = 5.0;
        const FACR: f64 = 1.0 / 8.0;
        let cfg = self.cfg;
        let nit = cfg.newton_max_iters as f64;
        let mut report = IntervalReport::default();
        let mut t = t_a;
        let mut h = cfg.dt_init.min(cfg.dt_max);
        let mut first = true;
        let mut rejected = false;
        let mut h_acc = 0.0;
        let mut err_acc = 0.0;
        let mut newton_failures = 0;
        let span_tol = 1e-12 * (t_b - t_a).abs().max(t_b.abs());
        while t < t_b - span_tol {
            let last = t + h >= t_b - span_tol;
            if last {
                h = t_b - t;
            }
            if h < cfg.dt_min && !last {
                return Err(Error::StiffFailure {
                    t,
                    reason: format!("step size {h:e} below dt_min {:e}", cfg.dt_min),
                });
            }
            let mode = if newton_failures >= 2 {
                JacobianMode::Lagged
            } else {
                cfg.jacobian_mode
            };
            match self.attempt(y, h, mode, first || rejected)? {
                StepAttempt::NewtonFailed { factor, newton_iters } => {
                    newton_failures += 1;
                    report.rejected += 1;
                    report.steps.push(StepRecord {
                        t,
                        dt: h,
                        newton_iters,
                        error_estimate: f64::NAN,
                        accepted: false,
                        clipped_nodes: 0,
                    });
                    if newton_failures > 30 {
                        return Err(Error::StiffFailure {
                            t,
                            reason: "repeated Newton failures".into(),
                        });
                    }
                    self.reset();
                    h *= factor;
                    rejected = true;
                }
                StepAttempt::Converged { error, newton_iters } => {
                    let fac = SAFE.min(SAFE * (1.0 + 2.0 * nit) / (newton_iters as f64 + 2.0 * nit));
                    let mut quot = (error.powf(0.25) / fac).clamp(FACR, FACL);
                    let mut h_new = h / quot;
                    if error < 1.0 {
                        if !first {
                            let facgus = ((h_acc / h) * (error * error / err_acc).powf(0.25) / SAFE).clamp(FACR, FACL);
                            quot = quot.max(facgus);
                            h_new = h / quot;
                        }
                        h_acc = h;
                        err_acc = error.max(1e-2);
                        first = false;
                        newton_failures = 0;
                        let clipped = self.accept(y, h);
                        t = if last { t_b } else { t + h };
                        report.accepted += 1;
                        report.steps.push(StepRecord {
                            t,
                            dt: h,
                            newton_iters,
                            error_estimate: error,
                            accepted: true,
                            clipped_nodes: clipped,
                        });
                        if rejected {
                            h_new = h_new.min(h);
                        }
                        rejected = false;
                        if !last || report.next_dt == 0.0 {
                            report.next_dt = h_new.min(cfg.dt_max);
                        }
                        h = h_new.clamp(cfg.dt_min, cfg.dt_max);
                    } else {
                        report.rejected += 1;
                        report.steps.push(StepRecord {
                            t,
                            dt: h,
                            newton_iters,
                            error_estimate: error,
                            accepted: false,
                            clipped_nodes: 0,
                        });
                        h = if first { h * 0.1 } else { h_new };
                        rejected = true;
                    }
                }
            }
        }
        if report.next_dt == 0.0 {
            report.next_dt = h;
        }
        Ok(report)
    }
}
