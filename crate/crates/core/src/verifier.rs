//! Executable checks: sampled dissipation inequalities, trajectory estimates
//! of DADS runs and the behavioural contrasts against the σ-modification.
//!
//! Every check yields a [`CheckReport`]; `worst_margin ≥ −tolerance` means pass.

use std::io::Write;

use rayon::prelude::*;
use thiserror::Error;

use crate::controllers::{
    sigma_errors, sigma_lyapunov_map, sigma_mod_control, wingrock_attractivity_radius,
    wingrock_control, wingrock_lyapunov_map, wingrock_z_rate, ControllerError, SigmaModController,
    WingRockDadsController,
};
use crate::jets::{JetError, SmoothMap};
use crate::simulator::{ControllerKind, TrajectoryLog};
use crate::synthesis::{certify_stage, DadsGains, Synthesis, SynthesisError};
use crate::system::{
    norm, seeded_rng, uniform_ball, Sample, SampleBox, StrictFeedbackSystem, SystemError,
};

#[derive(Debug, Error)]
pub enum VerifyError {
    #[error("logs do not match: {0}")]
    Mismatch(String),
    #[error("check needs {0}")]
    Precondition(String),
    #[error(transparent)]
    Jet(#[from] JetError),
    #[error(transparent)]
    System(#[from] SystemError),
    #[error(transparent)]
    Controller(#[from] ControllerError),
    #[error(transparent)]
    Synthesis(#[from] SynthesisError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckReport {
    pub name: String,
    pub n_samples: usize,
    pub worst_margin: f64,
    /// The sample (or `[t, value]` pair for trajectory checks) at the worst margin.
    pub witness: Vec<f64>,
    pub tolerance: f64,
    pub passed: bool,
    pub detail: String,
}

impl CheckReport {
    pub fn new(
        name: &str,
        n_samples: usize,
        worst_margin: f64,
        witness: Vec<f64>,
        tolerance: f64,
        detail: String,
    ) -> Self {
        CheckReport {
            name: name.to_string(),
            n_samples,
            worst_margin,
            witness,
            tolerance,
            passed: worst_margin >= -tolerance,
            detail,
        }
    }

    pub fn summary_line(&self) -> String {
        format!(
            "{} {}: worst_margin={:.6e} tol={:e} n={}{}",
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.worst_margin,
            self.tolerance,
            self.n_samples,
            if self.detail.is_empty() {
                String::new()
            } else {
                format!(" ({})", self.detail)
            }
        )
    }
}

/// Plain-text summary, one line per report.
pub fn summary(reports: &[CheckReport]) -> String {
    reports.iter().map(|r| r.summary_line() + "\n").collect()
}

pub fn write_reports_csv<W: Write>(reports: &[CheckReport], out: W) -> std::io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let io = |e: csv::Error| std::io::Error::other(e);
    w.write_record([
        "name",
        "passed",
        "worst_margin",
        "tolerance",
        "n_samples",
        "witness",
    ])
    .map_err(io)?;
    for r in reports {
        let witness: Vec<String> = r.witness.iter().map(|v| format!("{v:.16e}")).collect();
        w.write_record([
            r.name.clone(),
            r.passed.to_string(),
            format!("{:.16e}", r.worst_margin),
            format!("{:e}", r.tolerance),
            r.n_samples.to_string(),
            witness.join(" "),
        ])
        .map_err(io)?;
    }
    w.flush()
}

// ---------------------------------------------------------------- dissipation

/// Half-width of the band around the deadzone level excluded from derivative checks.
pub const KINK_BAND: f64 = 1e-9;

/// A sampled dissipation inequality `∇V·flow ≤ bound`.
pub struct Dissipation<'a> {
    pub v: &'a dyn SmoothMap,
    /// Point of `V`'s domain for a sample.
    pub point: &'a (dyn Fn(&Sample) -> Vec<f64> + Sync),
    /// Time derivative of that point along the closed loop.
    pub flow: &'a (dyn Fn(&Sample) -> Result<Vec<f64>, VerifyError> + Sync),
    /// Right side, given the sample and `V` at it.
    pub bound: &'a (dyn Fn(&Sample, f64) -> Result<f64, VerifyError> + Sync),
    /// Deadzone level; samples within [`KINK_BAND`] of it are skipped.
    pub kink: Option<f64>,
}

fn flatten(s: &Sample) -> Vec<f64> {
    let mut w = s.x.clone();
    w.push(s.z);
    w.extend(&s.theta);
    w.extend(&s.d);
    w
}

/// Worst `bound − ∇V·flow` over `samples`. The witness is `(x, z, θ, d)` flattened.
pub fn check_dissipation(
    name: &str,
    problem: &Dissipation,
    samples: &[Sample],
    tol: f64,
) -> Result<CheckReport, VerifyError> {
    let margins: Vec<Option<f64>> = samples
        .par_iter()
        .map(|s| -> Result<Option<f64>, VerifyError> {
            let jet = problem.v.taylor(&(problem.point)(s), 1)?.remove(0);
            let v = jet.value();
            if problem.kink.is_some_and(|e| (v - e).abs() < KINK_BAND) {
                return Ok(None);
            }
            let flow = (problem.flow)(s)?;
            let lhs: f64 = jet.gradient().iter().zip(&flow).map(|(g, f)| g * f).sum();
            Ok(Some((problem.bound)(s, v)? - lhs))
        })
        .collect::<Result<_, _>>()?;
    let mut worst = f64::INFINITY;
    let mut witness = Vec::new();
    let mut skipped = 0;
    for (m, s) in margins.iter().zip(samples) {
        match m {
            None => skipped += 1,
            Some(m) if *m < worst || m.is_nan() => {
                worst = if m.is_nan() { f64::NEG_INFINITY } else { *m };
                witness = flatten(s);
            }
            _ => {}
        }
    }
    Ok(CheckReport::new(
        name,
        samples.len(),
        worst,
        witness,
        tol,
        format!("{skipped} samples in the kink band"),
    ))
}

/// Samples for the wing-rock checks: `x` and `d` in balls, `z` in an interval, `θ` in a ball.
pub fn wingrock_samples(n: usize, seed: u64, sample_box: &SampleBox) -> Vec<Sample> {
    sample_box.draw_many(seed, n, 3, &crate::system::ThetaSet::Whole, 4, 2)
}

/// Samples for the σ-modification check: `x` holds `(x, θ̂)` with `θ̂` drawn
/// from the θ ball.
pub fn sigma_samples(n: usize, seed: u64, sample_box: &SampleBox) -> Vec<Sample> {
    let mut rng = seeded_rng(seed);
    (0..n)
        .map(|_| {
            let mut s = sample_box.draw(&mut rng, 3, &crate::system::ThetaSet::Whole, 4, 2);
            s.x.extend(uniform_ball(&mut rng, 4, sample_box.theta_radius));
            s.z = 0.0;
            s
        })
        .collect()
}

/// `V̇ ≤ −cV + a(|d|² + ((|θ| − b − e^z)⁺)²)/(1 + e^z)` for the wing-rock DADS law,
/// with `(a, b) = (2, 1)`.
pub fn wingrock_dissipation(
    sys: &StrictFeedbackSystem,
    ctrl: &WingRockDadsController,
    samples: &[Sample],
    tol: f64,
) -> Result<CheckReport, VerifyError> {
    let v = wingrock_lyapunov_map(ctrl.c, ctrl.k);
    let gains = DadsGains::new(1.0, ctrl.gamma, ctrl.eps_dz, ctrl.c, 2.0);
    let point = |s: &Sample| vec![s.x[0], s.x[1], s.x[2], s.z];
    let flow = |s: &Sample| -> Result<Vec<f64>, VerifyError> {
        let u = wingrock_control(&s.x, s.z, ctrl);
        let mut f = sys.eval_dynamics(&s.x, u, &s.theta, &s.d)?;
        f.push(wingrock_z_rate(&s.x, s.z, ctrl));
        Ok(f)
    };
    let bound = |s: &Sample, v: f64| -> Result<f64, VerifyError> {
        Ok(-gains.c * v + gains.a * gains.disturbance_term(s.z, &s.theta, &s.d)?)
    };
    let problem = Dissipation {
        v: v.as_ref(),
        point: &point,
        flow: &flow,
        bound: &bound,
        kink: Some(ctrl.eps_dz),
    };
    let name = if ctrl.flip_xi_term {
        "dissipation-wingrock-mutated"
    } else {
        "dissipation-wingrock"
    };
    check_dissipation(name, &problem, samples, tol)
}

/// `Ẇ ≤ −c(x₁² + ζ² + χ²) − (σ/2Γ)|θ̂ − θ|² + ½|d|² + (σ/2Γ)|θ|²` for the
/// σ-modification law with constant θ. Samples come from [`sigma_samples`].
pub fn sigma_dissipation(
    sys: &StrictFeedbackSystem,
    ctrl: &SigmaModController,
    samples: &[Sample],
    tol: f64,
) -> Result<CheckReport, VerifyError> {
    let w = sigma_lyapunov_map(*ctrl);
    let point = |s: &Sample| s.x.iter().chain(&s.theta).copied().collect::<Vec<f64>>();
    let flow = |s: &Sample| -> Result<Vec<f64>, VerifyError> {
        let (x, th) = s.x.split_at(3);
        let out = sigma_mod_control(x, th, ctrl);
        let mut f = sys.eval_dynamics(x, out.u, &s.theta, &s.d)?;
        f.extend(out.w);
        f.extend([0.0; 4]);
        Ok(f)
    };
    let bound = |s: &Sample, _w: f64| -> Result<f64, VerifyError> {
        let (x, th) = s.x.split_at(3);
        let (zeta, chi) = sigma_errors(x, th, ctrl);
        let k = ctrl.sigma / (2.0 * ctrl.gamma);
        let err: f64 = th.iter().zip(&s.theta).map(|(a, b)| (a - b).powi(2)).sum();
        Ok(-ctrl.c * (x[0] * x[0] + zeta * zeta + chi * chi) - k * err
            + 0.5 * norm(&s.d).powi(2)
            + k * norm(&s.theta).powi(2))
    };
    let problem = Dissipation {
        v: w.as_ref(),
        point: &point,
        flow: &flow,
        bound: &bound,
        kink: None,
    };
    check_dissipation("dissipation-sigma-mod", &problem, samples, tol)
}

/// Certificates of every synthesized stage. `per_stage` samples for
/// intermediate levels, `final_samples` for the last one.
pub fn synthesized_dissipation(
    sys: &StrictFeedbackSystem,
    syn: &Synthesis,
    per_stage: usize,
    final_samples: usize,
    seed: u64,
    sample_box: &SampleBox,
    tol: f64,
) -> Result<Vec<CheckReport>, VerifyError> {
    let last = syn.stages.len();
    syn.stages
        .iter()
        .map(|stage| {
            let n = if stage.level == last {
                final_samples
            } else {
                per_stage
            };
            let samples = sample_box.draw_many(
                seed + stage.level as u64,
                n,
                sys.dim(),
                &sys.theta_set,
                sys.p,
                sys.l,
            );
            let cert = certify_stage(sys, stage, &syn.gains, &samples)?;
            let name = if stage.level == last {
                "dissipation-synthesized".to_string()
            } else {
                format!("dissipation-stage-{}", stage.level)
            };
            Ok(CheckReport::new(
                &name,
                n,
                cert.worst_margin,
                cert.witness.as_ref().map(flatten).unwrap_or_default(),
                tol,
                format!(
                    "rate_c={} gain_a={}, {} samples in the kink band",
                    stage.rate_c, stage.gain_a, cert.skipped
                ),
            ))
        })
        .collect()
}

/// Worst relative disagreement between order-1 jet gradients and central
/// differences with step `h·max(1, |x_i|)`, at `n` points drawn uniformly
/// from `[−radius, radius]^arity`. Maps capped at order 0 are reported as
/// vacuously passing.
pub fn check_gradient(
    map: &dyn SmoothMap,
    n: usize,
    radius: f64,
    seed: u64,
    h: f64,
    tol: f64,
) -> Result<CheckReport, VerifyError> {
    use rand::Rng;
    let name = format!("gradient-{}", map.name());
    if map.max_order() == 0 {
        return Ok(CheckReport::new(
            &name,
            0,
            0.0,
            Vec::new(),
            tol,
            "order-0 map".into(),
        ));
    }
    let mut rng = seeded_rng(seed);
    let mut worst = f64::INFINITY;
    let mut witness = Vec::new();
    for _ in 0..n {
        let p: Vec<f64> = (0..map.arity())
            .map(|_| radius * (2.0 * rng.random::<f64>() - 1.0))
            .collect();
        for (out, jet) in map.taylor(&p, 1)?.iter().enumerate() {
            let grad = jet.gradient();
            let mut fd = vec![0.0; p.len()];
            let mut q = p.clone();
            for (i, g) in fd.iter_mut().enumerate() {
                let step = h * p[i].abs().max(1.0);
                q[i] = p[i] + step;
                let hi = map.eval(&q)?[out];
                q[i] = p[i] - step;
                let lo = map.eval(&q)?[out];
                q[i] = p[i];
                *g = (hi - lo) / (2.0 * step);
            }
            let scale = fd.iter().chain(&grad).fold(1.0f64, |a, v| a.max(v.abs()));
            let err = grad
                .iter()
                .zip(&fd)
                .fold(0.0f64, |a, (g, f)| a.max((g - f).abs()))
                / scale;
            if tol - err < worst {
                worst = tol - err;
                witness = p.clone();
            }
        }
    }
    // The tolerance is already inside the margin.
    Ok(CheckReport::new(
        &name,
        n,
        worst,
        witness,
        0.0,
        format!("relative error tolerance {tol:e}"),
    ))
}

// ---------------------------------------------------------------- trajectories

/// Finite-horizon surrogates for limits: window and relative slack.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TailWindow {
    pub fraction: f64,
    pub slack: f64,
}

impl Default for TailWindow {
    fn default() -> Self {
        TailWindow {
            fraction: 0.2,
            slack: 0.1,
        }
    }
}

fn require_dads(log: &TrajectoryLog) -> Result<(), VerifyError> {
    if log.kind != ControllerKind::Dads || log.is_empty() {
        return Err(VerifyError::Precondition("a non-empty DADS log".into()));
    }
    Ok(())
}

fn worst_over<I: Iterator<Item = (f64, f64)>>(it: I) -> (f64, Vec<f64>) {
    let mut worst = f64::INFINITY;
    let mut witness = Vec::new();
    for (t, m) in it {
        if m < worst || m.is_nan() {
            worst = if m.is_nan() { f64::NEG_INFINITY } else { m };
            witness = vec![t];
        }
    }
    (worst, witness)
}

/// `V(t) ≤ e^{−ct}V(0) + a(‖d‖² + ((‖θ‖ − b − λ(e^{z₀}))⁺)²)/(c(1 + κ(e^{z₀})))`
/// along the log, with the sups taken from the simulated signals.
pub fn check_envelope(
    log: &TrajectoryLog,
    gains: &DadsGains,
    tol: f64,
) -> Result<CheckReport, VerifyError> {
    require_dads(log)?;
    let z0 = log.ctrl_states[0][0];
    let v0 = log.v[0];
    let ez0 = z0.exp();
    let lam = gains.lambda.eval(&[ez0])?[0];
    let kap = gains.kappa.eval(&[ez0])?[0];
    let excess = (log.theta_sup - gains.b - lam).max(0.0);
    let offset = gains.a * (log.d_sup.powi(2) + excess * excess) / (gains.c * (1.0 + kap));
    let (worst, witness) = worst_over(
        log.times
            .iter()
            .zip(&log.v)
            .map(|(&t, &v)| (t, (-gains.c * t).exp() * v0 + offset - v)),
    );
    Ok(CheckReport::new(
        "envelope",
        log.len(),
        worst,
        witness,
        tol,
        format!(
            "V0={v0:.6} offset={offset:.6e} d_sup={:.4} theta_sup={:.4}",
            log.d_sup, log.theta_sup
        ),
    ))
}

/// `z(t_{i+1}) ≥ z(t_i)` and everything finite.
pub fn check_z_monotone(log: &TrajectoryLog, tol: f64) -> Result<CheckReport, VerifyError> {
    require_dads(log)?;
    let (mut worst, mut witness) = worst_over(
        log.times
            .windows(2)
            .zip(log.ctrl_states.windows(2))
            .map(|(t, z)| (t[1], z[1][0] - z[0][0])),
    );
    if log.len() == 1 {
        worst = 0.0;
    }
    let finite = log
        .ctrl_states
        .iter()
        .chain(&log.plant_states)
        .flatten()
        .all(|v| v.is_finite());
    if !finite {
        worst = f64::NEG_INFINITY;
        witness.clear();
    }
    let z = |i: usize| log.ctrl_states[i][0];
    Ok(CheckReport::new(
        "z-monotone",
        log.len(),
        worst,
        witness,
        tol,
        format!("z0={:.6} z_end={:.6}", z(0), z(log.len() - 1)),
    ))
}

/// Tail sup of `signal` against `(1 + slack)·limit`.
fn tail_check(
    name: &str,
    log: &TrajectoryLog,
    signal: &[f64],
    limit: f64,
    window: TailWindow,
) -> CheckReport {
    let start = log.tail_start(window.fraction);
    let allowed = (1.0 + window.slack) * limit;
    let (worst, witness) =
        worst_over((start..log.len()).map(|i| (log.times[i], allowed - signal[i])));
    CheckReport::new(
        name,
        log.len() - start,
        worst,
        witness,
        0.0,
        format!(
            "limit {limit:.6e} with slack {}, last {} of the horizon",
            window.slack, window.fraction
        ),
    )
}

/// Reports for a DADS log: envelope, z-monotonicity, `V` tail against `ε_dz`
/// and, when `radius` is given, the output tail against it.
pub fn check_trajectory_estimates(
    log: &TrajectoryLog,
    gains: &DadsGains,
    radius: Option<f64>,
    window: TailWindow,
) -> Result<Vec<CheckReport>, VerifyError> {
    let mut out = vec![
        check_envelope(log, gains, 1e-6)?,
        check_z_monotone(log, 1e-12)?,
        tail_check("v-tail", log, &log.v, gains.eps_dz, window),
    ];
    if let Some(r) = radius {
        out.push(tail_check("output-tail", log, &log.output_norm, r, window));
    }
    Ok(out)
}

/// Attractivity radius for the wing-rock DADS law.
pub fn wingrock_radius(ctrl: &WingRockDadsController) -> f64 {
    wingrock_attractivity_radius(ctrl.c, ctrl.eps_dz)
}

/// `|Y(t_end)| < limit`: the observable corollary for vanishing disturbances.
pub fn check_convergence(log: &TrajectoryLog, limit: f64) -> Result<CheckReport, VerifyError> {
    let last = log
        .len()
        .checked_sub(1)
        .ok_or_else(|| VerifyError::Precondition("a non-empty log".into()))?;
    let x = norm(&log.plant_states[last]);
    Ok(CheckReport::new(
        "convergence",
        1,
        limit - x,
        vec![log.times[last], x],
        0.0,
        format!("|x(t_end)| = {x:.3e}"),
    ))
}

/// Relative growth of the controller gain in the tail window: the tail sup
/// over the sup of everything before it, minus one.
pub fn gain_growth(log: &TrajectoryLog, fraction: f64) -> f64 {
    let start = log.tail_start(fraction).max(1);
    let sup = |v: &[f64]| v.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    sup(&log.gain[start..]) / sup(&log.gain[..start]) - 1.0
}

/// Gain plateau: growth below `max_growth` over the tail window.
pub fn check_plateau(
    name: &str,
    log: &TrajectoryLog,
    fraction: f64,
    max_growth: f64,
) -> CheckReport {
    let g = gain_growth(log, fraction);
    CheckReport::new(
        name,
        log.len(),
        max_growth - g,
        vec![*log.times.last().unwrap_or(&0.0), g],
        0.0,
        format!(
            "tail growth {:.4}% (limit {}%)",
            100.0 * g,
            100.0 * max_growth
        ),
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DriftMode {
    /// Persistent disturbance: the unleaked estimate must drift.
    DriftExpected,
    /// Disturbance-free: all three gains only need to stay bounded.
    NoDriftExpected,
}

/// Minimum ratio `|θ̂(t_end)| / |θ̂(t_end/2)|` that counts as drift.
pub const DRIFT_RATIO: f64 = 1.1;
/// Maximum tail growth for a gain that counts as plateaued.
pub const PLATEAU_GROWTH: f64 = 0.01;

/// DADS plateaus, the leaky baseline stays bounded and (in drift mode) the
/// unleaked baseline drifts. The report's margin is the worst sub-margin.
pub fn check_drift_contrast(
    dads: &TrajectoryLog,
    sigma0: &TrajectoryLog,
    sigma: &TrajectoryLog,
    mode: DriftMode,
    window: TailWindow,
) -> Result<CheckReport, VerifyError> {
    require_dads(dads)?;
    for (name, log) in [("sigma=0", sigma0), ("sigma", sigma)] {
        if log.kind != ControllerKind::SigmaMod || log.is_empty() {
            return Err(VerifyError::Precondition(format!(
                "{name} to be a σ-modification log"
            )));
        }
    }
    let end = |l: &TrajectoryLog| *l.times.last().unwrap();
    let (t1, t2, t3) = (end(dads), end(sigma0), end(sigma));
    if (t1 - t2).abs() > 1e-9 * t1 || (t1 - t3).abs() > 1e-9 * t1 {
        return Err(VerifyError::Mismatch(format!("horizons {t1}, {t2}, {t3}")));
    }
    let mut parts = vec![
        (
            "dads-plateau",
            PLATEAU_GROWTH - gain_growth(dads, window.fraction),
        ),
        (
            "sigma-bounded",
            PLATEAU_GROWTH - gain_growth(sigma, window.fraction),
        ),
    ];
    let ratio = sigma0.gain[sigma0.len() - 1] / sigma0.gain[sigma0.index_at(0.5 * t2)];
    match mode {
        DriftMode::DriftExpected => parts.push(("sigma0-drift", ratio - DRIFT_RATIO)),
        DriftMode::NoDriftExpected => parts.push((
            "sigma0-bounded",
            window.slack - gain_growth(sigma0, window.fraction),
        )),
    }
    let (worst_name, worst) =
        parts.iter().fold(
            ("", f64::INFINITY),
            |a, &(n, m)| if m < a.1 { (n, m) } else { a },
        );
    let detail = parts
        .iter()
        .map(|(n, m)| format!("{n}={m:.4e}"))
        .collect::<Vec<_>>()
        .join(" ")
        + &format!(" sigma0_ratio={ratio:.4} worst={worst_name}");
    let name = match mode {
        DriftMode::DriftExpected => "drift-contrast",
        DriftMode::NoDriftExpected => "drift-contrast-no-drift",
    };
    Ok(CheckReport::new(
        name,
        dads.len(),
        worst,
        vec![ratio],
        0.0,
        detail,
    ))
}

/// `(½‖d‖² + (σ/2Γ)|θ|²)/c`: the residual level of `x₁² + ζ² + χ²` implied by
/// the σ-modification dissipation inequality.
pub fn sigma_residual_bound(ctrl: &SigmaModController, d_sup: f64, theta: &[f64]) -> f64 {
    (0.5 * d_sup * d_sup + ctrl.sigma / (2.0 * ctrl.gamma) * norm(theta).powi(2)) / ctrl.c
}

/// Tail sup of `x₁² + ζ² + χ²` against [`sigma_residual_bound`] with slack.
pub fn check_sigma_tradeoff(
    log: &TrajectoryLog,
    theta: &[f64],
    ctrl: &SigmaModController,
    window: TailWindow,
) -> Result<CheckReport, VerifyError> {
    if log.kind != ControllerKind::SigmaMod || log.is_empty() {
        return Err(VerifyError::Precondition(
            "a non-empty σ-modification log".into(),
        ));
    }
    let energy: Vec<f64> = log
        .plant_states
        .iter()
        .zip(&log.ctrl_states)
        .map(|(x, th)| {
            let (zeta, chi) = sigma_errors(x, th, ctrl);
            x[0] * x[0] + zeta * zeta + chi * chi
        })
        .collect();
    let bound = sigma_residual_bound(ctrl, log.d_sup, theta);
    let mut r = tail_check("sigma-tradeoff", log, &energy, bound, window);
    let start = log.tail_start(window.fraction);
    let sup = energy[start..].iter().fold(0.0f64, |a, &b| a.max(b));
    r.detail = format!(
        "tail sup {sup:.4e} against bound {bound:.4} with slack {}",
        window.slack
    );
    Ok(r)
}
