//! Fixed-step closed-loop integration.
//!
//! Classical RK4 is the default. The DADS wing-rock loop has closed-loop
//! eigenvalues far beyond RK4's stability interval at `dt = 1e-4` (the last
//! term of the law scales like `ρ⁶L³` with gains around 10⁴–10⁶), so the
//! three-stage Radau IIA collocation method is available for those runs. Both
//! keep the output grid fixed and deterministic.

use std::cell::Cell;
use std::io::Write;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::controllers::{Controller, ControllerError};
use crate::system::{
    norm, DisturbanceProfile, ParameterSignal, StrictFeedbackSystem, Structure, SystemError,
};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid simulation config: {0}")]
    Config(String),
    #[error("state diverged after t = {t_last_finite}")]
    Divergence { t_last_finite: f64 },
    #[error("implicit stage equations did not converge at t = {t}")]
    Solver { t: f64 },
    #[error(transparent)]
    Controller(#[from] ControllerError),
    #[error(transparent)]
    System(#[from] SystemError),
    #[error("csv output: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Integrator {
    #[default]
    Rk4,
    RadauIia,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub t_end: f64,
    pub dt: f64,
    pub plant_init: Vec<f64>,
    pub ctrl_init: Vec<f64>,
    pub disturbance: DisturbanceProfile,
    pub parameter: ParameterSignal,
    #[serde(default = "one")]
    pub log_stride: usize,
    #[serde(default)]
    pub integrator: Integrator,
}

fn one() -> usize {
    1
}

impl SimConfig {
    /// The wing-rock experiment: `x(0) = (1, −0.5, −18)`, `θ = (20, 20, 2, 1)`,
    /// 10 s at `dt = 1e-4`. `ctrl_init` is `z(0) = −ln 10` for DADS laws and
    /// `θ̂(0) = 0` otherwise.
    pub fn wingrock(ctrl: &Controller, disturbance: DisturbanceProfile) -> Self {
        let (ctrl_init, integrator) = if ctrl.is_dads() {
            (vec![-(10f64.ln())], Integrator::RadauIia)
        } else {
            (vec![0.0; 4], Integrator::Rk4)
        };
        SimConfig {
            t_end: 10.0,
            dt: 1e-4,
            plant_init: vec![1.0, -0.5, -18.0],
            ctrl_init,
            disturbance,
            parameter: ParameterSignal::Constant {
                value: crate::system::WINGROCK_THETA.to_vec(),
            },
            log_stride: 10,
            integrator,
        }
    }

    pub fn validate(&self, sys: &StrictFeedbackSystem, ctrl: &Controller) -> Result<(), SimError> {
        let bad = |m: String| Err(SimError::Config(m));
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return bad(format!("dt = {} must be positive", self.dt));
        }
        if !(self.t_end > 0.0 && self.t_end.is_finite()) {
            return bad(format!("t_end = {} must be positive", self.t_end));
        }
        if self.log_stride == 0 {
            return bad("log_stride must be at least 1".into());
        }
        if self.plant_init.len() != sys.dim() || ctrl.plant_dim() != sys.dim() {
            return bad(format!(
                "plant dimension {}, initial state length {}, controller expects {}",
                sys.dim(),
                self.plant_init.len(),
                ctrl.plant_dim()
            ));
        }
        if self.ctrl_init.len() != ctrl.state_dim() {
            return bad(format!(
                "controller state has length {}, got {}",
                ctrl.state_dim(),
                self.ctrl_init.len()
            ));
        }
        if self.disturbance.dim() != sys.l {
            return bad(format!(
                "disturbance has {} channels, plant takes {}",
                self.disturbance.dim(),
                sys.l
            ));
        }
        if self.parameter.dim() != sys.p {
            return bad(format!(
                "parameter has length {}, plant takes {}",
                self.parameter.dim(),
                sys.p
            ));
        }
        self.disturbance.validate()?;
        self.parameter.validate(&sys.theta_set)?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ControllerKind {
    Dads,
    SigmaMod,
}

/// Logged closed-loop trajectory. All per-sample vectors have equal length.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryLog {
    pub kind: ControllerKind,
    pub plant_labels: Vec<String>,
    pub ctrl_labels: Vec<String>,
    pub times: Vec<f64>,
    pub plant_states: Vec<Vec<f64>>,
    pub ctrl_states: Vec<Vec<f64>>,
    pub u: Vec<f64>,
    /// The controller's Lyapunov function (`W` with the true θ for σ-modification).
    pub v: Vec<f64>,
    pub output_norm: Vec<f64>,
    /// `ρ = 1 + e^z` or `|θ̂|`.
    pub gain: Vec<f64>,
    pub disturbance: Vec<Vec<f64>>,
    pub theta: Vec<Vec<f64>>,
    /// Running `∫₀ᵗ u² dt`, accumulated on every integrator stage rather than from the logged samples.
    pub energy: Vec<f64>,
    /// Sup of `|d|` and `|θ|` over every right-hand-side evaluation.
    pub d_sup: f64,
    pub theta_sup: f64,
}

impl TrajectoryLog {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Samples `range` of the log; the signal sups are kept.
    pub fn slice(&self, range: std::ops::Range<usize>) -> TrajectoryLog {
        TrajectoryLog {
            kind: self.kind,
            plant_labels: self.plant_labels.clone(),
            ctrl_labels: self.ctrl_labels.clone(),
            times: self.times[range.clone()].to_vec(),
            plant_states: self.plant_states[range.clone()].to_vec(),
            ctrl_states: self.ctrl_states[range.clone()].to_vec(),
            u: self.u[range.clone()].to_vec(),
            v: self.v[range.clone()].to_vec(),
            output_norm: self.output_norm[range.clone()].to_vec(),
            gain: self.gain[range.clone()].to_vec(),
            disturbance: self.disturbance[range.clone()].to_vec(),
            theta: self.theta[range.clone()].to_vec(),
            energy: self.energy[range].to_vec(),
            d_sup: self.d_sup,
            theta_sup: self.theta_sup,
        }
    }

    /// Index of the first sample with `t ≥ t_end − fraction·(t_end − t₀)`.
    pub fn tail_start(&self, fraction: f64) -> usize {
        let (t0, t1) = (self.times[0], *self.times.last().unwrap());
        let cut = t1 - fraction * (t1 - t0);
        self.times
            .partition_point(|&t| t < cut - 1e-12 * t1.abs().max(1.0))
    }

    /// Last sample with `t ≤ at`.
    pub fn index_at(&self, at: f64) -> usize {
        self.times
            .partition_point(|&t| t <= at + 1e-12 * at.abs().max(1.0))
            .saturating_sub(1)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), SimError> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["t".to_string()];
        header.extend(self.plant_labels.iter().cloned());
        header.extend(self.ctrl_labels.iter().cloned());
        header.extend(["u", "V", "Ynorm"].map(String::from));
        w.write_record(&header).map_err(csv_err)?;
        let f = |v: f64| format!("{v:.16e}");
        for i in 0..self.len() {
            let mut rec = vec![f(self.times[i])];
            rec.extend(self.plant_states[i].iter().map(|&v| f(v)));
            rec.extend(self.ctrl_states[i].iter().map(|&v| f(v)));
            rec.extend([self.u[i], self.v[i], self.output_norm[i]].map(f));
            w.write_record(&rec).map_err(csv_err)?;
        }
        w.flush()?;
        Ok(())
    }
}

fn csv_err(e: csv::Error) -> SimError {
    SimError::Io(std::io::Error::other(e))
}

fn plant_labels(sys: &StrictFeedbackSystem) -> Vec<String> {
    match sys.structure {
        Structure::Pure => (1..=sys.dim()).map(|i| format!("x{i}")).collect(),
        Structure::Cascade { n, m } => (1..=n)
            .map(|i| format!("x{i}"))
            .chain((1..=m).map(|j| format!("y{j}")))
            .collect(),
    }
}

/// The augmented right-hand side `(plant, controller)`.
struct ClosedLoop<'a> {
    sys: &'a StrictFeedbackSystem,
    ctrl: &'a Controller,
    cfg: &'a SimConfig,
    n: usize,
    d_sup: Cell<f64>,
    theta_sup: Cell<f64>,
}

impl ClosedLoop<'_> {
    fn rhs(&self, t: f64, y: &[f64], out: &mut [f64]) -> Result<f64, SimError> {
        let d = self.cfg.disturbance.sample(t);
        let theta = self.cfg.parameter.sample(t);
        self.d_sup.set(self.d_sup.get().max(norm(&d)));
        self.theta_sup.set(self.theta_sup.get().max(norm(&theta)));
        let (x, cs) = y.split_at(self.n);
        let u = self.ctrl.evaluate(x, cs, &mut out[self.n..])?;
        let dx = self.sys.eval_dynamics(x, u, &theta, &d)?;
        out[..self.n].copy_from_slice(&dx);
        Ok(u)
    }

    fn dim(&self) -> usize {
        self.n + self.ctrl.state_dim()
    }
}

/// Classical RK4 step; returns `∫u²` over the step by the same quadrature.
fn rk4_step(cl: &ClosedLoop, t: f64, h: f64, y: &mut [f64]) -> Result<f64, SimError> {
    let n = y.len();
    let mut k = [vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]];
    let mut tmp = vec![0.0; n];
    let mut u = [0.0; 4];
    u[0] = cl.rhs(t, y, &mut k[0])?;
    for (stage, (frac, c)) in [(0.5, 0.5), (0.5, 0.5), (1.0, 1.0)].iter().enumerate() {
        for i in 0..n {
            tmp[i] = y[i] + frac * h * k[stage][i];
        }
        let (done, rest) = k.split_at_mut(stage + 1);
        let _ = done;
        u[stage + 1] = cl.rhs(t + c * h, &tmp, &mut rest[0])?;
    }
    for i in 0..n {
        y[i] += h / 6.0 * (k[0][i] + 2.0 * k[1][i] + 2.0 * k[2][i] + k[3][i]);
    }
    Ok(h / 6.0 * (u[0] * u[0] + 2.0 * u[1] * u[1] + 2.0 * u[2] * u[2] + u[3] * u[3]))
}

struct Radau {
    c: [f64; 3],
    a: [[f64; 3]; 3],
}

impl Radau {
    fn new() -> Self {
        let s6 = 6f64.sqrt();
        Radau {
            c: [(4.0 - s6) / 10.0, (4.0 + s6) / 10.0, 1.0],
            a: [
                [
                    (88.0 - 7.0 * s6) / 360.0,
                    (296.0 - 169.0 * s6) / 1800.0,
                    (-2.0 + 3.0 * s6) / 225.0,
                ],
                [
                    (296.0 + 169.0 * s6) / 1800.0,
                    (88.0 + 7.0 * s6) / 360.0,
                    (-2.0 - 3.0 * s6) / 225.0,
                ],
                [(16.0 - s6) / 36.0, (16.0 + s6) / 36.0, 1.0 / 9.0],
            ],
        }
    }
}

const NEWTON_MAX_ITER: usize = 25;
const NEWTON_TOL: f64 = 1e-12;
const MAX_SPLIT_DEPTH: u32 = 8;

/// Central-difference Jacobian of the closed loop at `(t, y)`.
fn jacobian(cl: &ClosedLoop, t: f64, y: &[f64]) -> Result<DMatrix<f64>, SimError> {
    let n = y.len();
    let mut jac = DMatrix::zeros(n, n);
    let mut yp = y.to_vec();
    let (mut fp, mut fm) = (vec![0.0; n], vec![0.0; n]);
    for j in 0..n {
        let step = 1e-6 * y[j].abs().max(1.0);
        yp[j] = y[j] + step;
        cl.rhs(t, &yp, &mut fp)?;
        yp[j] = y[j] - step;
        cl.rhs(t, &yp, &mut fm)?;
        yp[j] = y[j];
        for i in 0..n {
            jac[(i, j)] = (fp[i] - fm[i]) / (2.0 * step);
        }
    }
    Ok(jac)
}

/// One Radau IIA step by simplified Newton, plus `∫u²` by the collocation
/// quadrature; `None` when the iteration stalls.
fn radau_try(
    cl: &ClosedLoop,
    rd: &Radau,
    t: f64,
    h: f64,
    y: &[f64],
) -> Result<Option<(Vec<f64>, f64)>, SimError> {
    let n = y.len();
    let jac = jacobian(cl, t, y)?;
    let mut m = DMatrix::<f64>::identity(3 * n, 3 * n);
    for i in 0..3 {
        for j in 0..3 {
            let blk = -h * rd.a[i][j];
            for r in 0..n {
                for c in 0..n {
                    m[(i * n + r, j * n + c)] += blk * jac[(r, c)];
                }
            }
        }
    }
    let lu = m.lu();
    let mut z = vec![0.0; 3 * n];
    let mut f = vec![vec![0.0; n]; 3];
    let mut stage = vec![0.0; n];
    let scale = 1.0 + y.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let mut prev = f64::INFINITY;
    let mut u = [0.0; 3];
    for iter in 0..NEWTON_MAX_ITER {
        for (s, fs) in f.iter_mut().enumerate() {
            for r in 0..n {
                stage[r] = y[r] + z[s * n + r];
            }
            u[s] = cl.rhs(t + rd.c[s] * h, &stage, fs)?;
        }
        let mut res = DVector::zeros(3 * n);
        for i in 0..3 {
            for r in 0..n {
                let hf: f64 = (0..3).map(|j| rd.a[i][j] * f[j][r]).sum();
                res[i * n + r] = -(z[i * n + r] - h * hf);
            }
        }
        let Some(delta) = lu.solve(&res) else {
            return Ok(None);
        };
        let size = delta.amax();
        if !size.is_finite() || (iter >= 2 && size > prev) {
            return Ok(None);
        }
        for (zi, di) in z.iter_mut().zip(delta.iter()) {
            *zi += di;
        }
        if size <= NEWTON_TOL * scale {
            let energy = h * (0..3).map(|s| rd.a[2][s] * u[s] * u[s]).sum::<f64>();
            return Ok(Some((
                (0..n).map(|r| y[r] + z[2 * n + r]).collect(),
                energy,
            )));
        }
        prev = size;
    }
    Ok(None)
}

/// Radau step over `[t, t+h]`, bisected when Newton fails.
fn radau_step(
    cl: &ClosedLoop,
    rd: &Radau,
    t: f64,
    h: f64,
    y: &mut Vec<f64>,
    depth: u32,
) -> Result<f64, SimError> {
    if let Some((next, energy)) = radau_try(cl, rd, t, h, y)? {
        *y = next;
        return Ok(energy);
    }
    if depth >= MAX_SPLIT_DEPTH {
        return Err(SimError::Solver { t });
    }
    let first = radau_step(cl, rd, t, 0.5 * h, y, depth + 1)?;
    Ok(first + radau_step(cl, rd, t + 0.5 * h, 0.5 * h, y, depth + 1)?)
}

struct Recorder<'a> {
    cl: &'a ClosedLoop<'a>,
    log: TrajectoryLog,
    scratch: Vec<f64>,
}

impl Recorder<'_> {
    fn record(&mut self, t: f64, y: &[f64], energy: f64) -> Result<(), SimError> {
        let cl = self.cl;
        let (x, cs) = y.split_at(cl.n);
        let d = cl.cfg.disturbance.sample(t);
        let theta = cl.cfg.parameter.sample(t);
        let u = cl.ctrl.evaluate(x, cs, &mut self.scratch)?;
        let log = &mut self.log;
        log.times.push(t);
        log.plant_states.push(x.to_vec());
        log.ctrl_states.push(cs.to_vec());
        log.u.push(u);
        log.v.push(cl.ctrl.lyapunov(x, cs, &theta)?);
        log.output_norm.push(cl.sys.output_norm(x));
        log.gain.push(cl.ctrl.gain_magnitude(cs));
        log.disturbance.push(d);
        log.theta.push(theta);
        log.energy.push(energy);
        Ok(())
    }
}

pub fn simulate(
    sys: &StrictFeedbackSystem,
    ctrl: &Controller,
    cfg: &SimConfig,
) -> Result<TrajectoryLog, SimError> {
    cfg.validate(sys, ctrl)?;
    let cl = ClosedLoop {
        sys,
        ctrl,
        cfg,
        n: sys.dim(),
        d_sup: Cell::new(0.0),
        theta_sup: Cell::new(0.0),
    };
    let mut y: Vec<f64> = cfg
        .plant_init
        .iter()
        .chain(&cfg.ctrl_init)
        .copied()
        .collect();
    let steps = ((cfg.t_end / cfg.dt) - 1e-9).ceil().max(1.0) as usize;
    let mut rec = Recorder {
        cl: &cl,
        log: TrajectoryLog {
            kind: if ctrl.is_dads() {
                ControllerKind::Dads
            } else {
                ControllerKind::SigmaMod
            },
            plant_labels: plant_labels(sys),
            ctrl_labels: ctrl.state_labels(),
            times: Vec::new(),
            plant_states: Vec::new(),
            ctrl_states: Vec::new(),
            u: Vec::new(),
            v: Vec::new(),
            output_norm: Vec::new(),
            gain: Vec::new(),
            disturbance: Vec::new(),
            theta: Vec::new(),
            energy: Vec::new(),
            d_sup: 0.0,
            theta_sup: 0.0,
        },
        scratch: vec![0.0; ctrl.state_dim()],
    };
    let mut energy = 0.0;
    rec.record(0.0, &y, energy)?;
    let radau = Radau::new();
    let mut scratch = vec![0.0; cl.dim()];
    cl.rhs(0.0, &y, &mut scratch)?;
    for i in 0..steps {
        let t = i as f64 * cfg.dt;
        let t_next = if i + 1 == steps {
            cfg.t_end
        } else {
            (i + 1) as f64 * cfg.dt
        };
        let h = t_next - t;
        energy += match cfg.integrator {
            Integrator::Rk4 => rk4_step(&cl, t, h, &mut y),
            Integrator::RadauIia => radau_step(&cl, &radau, t, h, &mut y, 0),
        }
        .map_err(|e| match e {
            SimError::Solver { .. } if !y.iter().all(|v| v.is_finite()) => {
                SimError::Divergence { t_last_finite: t }
            }
            other => other,
        })?;
        if !y.iter().all(|v| v.is_finite()) {
            return Err(SimError::Divergence { t_last_finite: t });
        }
        if (i + 1) % cfg.log_stride == 0 || i + 1 == steps {
            rec.record(t_next, &y, energy)?;
        }
    }
    let mut log = rec.log;
    log.d_sup = cl.d_sup.get();
    log.theta_sup = cl.theta_sup.get();
    Ok(log)
}

/// Runs every scenario in parallel; results keep the input order.
pub fn batch_simulate(
    runs: &[(&StrictFeedbackSystem, &Controller, &SimConfig)],
) -> Vec<Result<TrajectoryLog, SimError>> {
    runs.par_iter()
        .map(|(sys, ctrl, cfg)| simulate(sys, ctrl, cfg))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryStats {
    pub sup_output_tail: f64,
    pub sup_gain: f64,
    /// `z(t_end)` for DADS laws, `|θ̂(t_end)|` for the σ-modification.
    pub final_z_or_theta_norm: f64,
    /// `∫u² dt` over the logged span.
    pub control_energy: f64,
    /// `∫u² dt` over the tail window only, past the initial transient.
    pub control_energy_tail: f64,
}

pub fn trajectory_stats(
    log: &TrajectoryLog,
    tail_fraction: f64,
) -> Result<TrajectoryStats, SimError> {
    if log.is_empty() {
        return Err(SimError::Config("empty trajectory log".into()));
    }
    if !(tail_fraction > 0.0 && tail_fraction <= 1.0) {
        return Err(SimError::Config(format!(
            "tail fraction {tail_fraction} must lie in (0, 1]"
        )));
    }
    let start = log.tail_start(tail_fraction);
    let sup = |v: &[f64]| v.iter().fold(0.0f64, |a, &b| a.max(b));
    let last = log.ctrl_states.last().unwrap();
    let final_z_or_theta_norm = match log.kind {
        ControllerKind::Dads => last[0],
        ControllerKind::SigmaMod => norm(last),
    };
    let e_end = *log.energy.last().unwrap();
    Ok(TrajectoryStats {
        sup_output_tail: sup(&log.output_norm[start..]),
        sup_gain: sup(&log.gain),
        final_z_or_theta_norm,
        control_energy: e_end - log.energy[0],
        control_energy_tail: e_end - log.energy[start],
    })
}
