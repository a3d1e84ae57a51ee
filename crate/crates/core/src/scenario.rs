//! TOML scenario files: which plant, which law, how to simulate and which
//! checks to run.
//!
//! ```toml
//! name = "fig1_dads"
//!
//! [system]
//! builtin = "wingrock"
//!
//! [controller]
//! kind = "dads-wingrock"
//! c = 0.5
//! K = 14.0
//! gamma = 20.0
//! eps_dz = 0.01
//!
//! [sim]
//! t_end = 10.0
//! dt = 1e-4
//! plant_init = [1.0, -0.5, -18.0]
//! ctrl_init = [-2.302585092994046]
//! log_stride = 10
//! integrator = "radau-iia"
//! disturbance = { kind = "zero", dim = 2 }
//! parameter = { kind = "constant", value = [20.0, 20.0, 2.0, 1.0] }
//!
//! [[checks]]
//! name = "trajectory-estimates"
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::controllers::{
    Controller, ControllerError, SigmaModController, SynthesizedDadsController,
    WingRockDadsController,
};
use crate::jets::{identity_map, scalar_map, Map};
use crate::simulator::{
    batch_simulate, simulate, trajectory_stats, SimConfig, SimError, TrajectoryLog, TrajectoryStats,
};
use crate::synthesis::{
    synthesize, wingrock_majorants, DadsGains, LevelMajorants, MajorantPack, Synthesis,
    SynthesisError, SynthesisOptions, WINGROCK_R3,
};
use crate::system::{
    sine_gain_chain, wingrock, DisturbanceProfile, ParameterSignal, SampleBox, StrictFeedbackSystem,
};
use crate::verifier::{
    check_convergence, check_drift_contrast, check_gradient, check_plateau, check_sigma_tradeoff,
    check_trajectory_estimates, sigma_dissipation, sigma_samples, synthesized_dissipation,
    wingrock_dissipation, wingrock_radius, wingrock_samples, CheckReport, DriftMode, TailWindow,
    VerifyError,
};

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("invalid scenario: {0}")]
    Invalid(String),
    #[error(transparent)]
    Controller(#[from] ControllerError),
    #[error(transparent)]
    Synthesis(#[from] SynthesisError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Verify(#[from] VerifyError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemSpec {
    /// `wingrock` or `sine-gain`.
    pub builtin: String,
    /// Lower gain bound `η₁` of the `sine-gain` plant.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta: Option<f64>,
}

impl SystemSpec {
    pub fn build(&self) -> Result<StrictFeedbackSystem, ScenarioError> {
        match self.builtin.as_str() {
            "wingrock" => Ok(wingrock()),
            "sine-gain" => Ok(sine_gain_chain(self.eta.unwrap_or(1.0))),
            other => Err(ScenarioError::Invalid(format!(
                "unknown built-in system `{other}`"
            ))),
        }
    }
}

/// Class-K∞ function choices for `κ` and `λ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ClassK {
    #[default]
    Identity,
    Linear {
        slope: f64,
    },
    /// `s ↦ sᵖ` with integer `p ≥ 1`.
    Power {
        exponent: u32,
    },
}

impl ClassK {
    pub fn to_map(self) -> Result<Map, ScenarioError> {
        match self {
            ClassK::Identity => Ok(identity_map()),
            ClassK::Linear { slope } if slope > 0.0 => {
                Ok(scalar_map("linear", 1, move |u| u[0].scale(slope)))
            }
            ClassK::Power { exponent } if exponent >= 1 => Ok(scalar_map("power", 1, move |u| {
                u[0].pow_int(exponent as i32)
            })),
            other => Err(ScenarioError::Invalid(format!(
                "{other:?} is not of class K∞"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GainSpec {
    pub b: f64,
    pub gamma: f64,
    pub eps_dz: f64,
    pub c: f64,
    pub a: f64,
    #[serde(default)]
    pub kappa: ClassK,
    #[serde(default)]
    pub lambda: ClassK,
}

impl Default for GainSpec {
    fn default() -> Self {
        GainSpec {
            b: 1.0,
            gamma: 20.0,
            eps_dz: 0.01,
            c: 0.5,
            a: 2.0,
            kappa: ClassK::Identity,
            lambda: ClassK::Identity,
        }
    }
}

impl GainSpec {
    pub fn build(&self) -> Result<DadsGains, ScenarioError> {
        let mut g = DadsGains::new(self.b, self.gamma, self.eps_dz, self.c, self.a);
        g.kappa = self.kappa.to_map()?;
        g.lambda = self.lambda.to_map()?;
        g.validate()?;
        Ok(g)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MajorantKind {
    #[serde(rename = "r")]
    SmallR,
    #[serde(rename = "R")]
    BigR,
    Rho,
}

/// Replaces one majorant by a constant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MajorantOverride {
    pub level: usize,
    pub which: MajorantKind,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MajorantSpec {
    /// Hand-derived pack: `wingrock` or `unit` (`r ≡ 1` at every level, for one-row plants).
    pub builtin: String,
    /// Constants of the wing-rock level-3 `R`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r3: Option<[f64; 4]>,
    #[serde(default, rename = "override", skip_serializing_if = "Vec::is_empty")]
    pub overrides: Vec<MajorantOverride>,
}

impl MajorantSpec {
    pub fn build(
        &self,
        gains: &DadsGains,
        sys: &StrictFeedbackSystem,
    ) -> Result<MajorantPack, ScenarioError> {
        let mut pack = match self.builtin.as_str() {
            "wingrock" => wingrock_majorants(gains, self.r3.unwrap_or(WINGROCK_R3)),
            "unit" => MajorantPack {
                levels: (1..=sys.dim())
                    .map(|j| LevelMajorants {
                        r: scalar_map("one", j.max(2) - 1, |u| u[0].like(1.0)),
                        big_r: None,
                        rho: None,
                    })
                    .collect(),
            },
            other => {
                return Err(ScenarioError::Invalid(format!(
                    "unknown majorant pack `{other}`"
                )))
            }
        };
        for o in &self.overrides {
            let lvl = pack
                .levels
                .get_mut(o.level.wrapping_sub(1))
                .ok_or_else(|| ScenarioError::Invalid(format!("no majorant level {}", o.level)))?;
            let v = o.value;
            let arity_of = |m: &Option<Map>| m.as_ref().map(|m| m.arity());
            match o.which {
                MajorantKind::SmallR => {
                    lvl.r = scalar_map("r-override", lvl.r.arity(), move |u| u[0].like(v));
                }
                MajorantKind::BigR => {
                    let a = arity_of(&lvl.big_r).ok_or_else(|| {
                        ScenarioError::Invalid(format!("level {} has no R", o.level))
                    })?;
                    lvl.big_r = Some(scalar_map("R-override", a, move |u| u[0].like(v)));
                }
                MajorantKind::Rho => {
                    let a = arity_of(&lvl.rho).ok_or_else(|| {
                        ScenarioError::Invalid(format!("level {} has no rho", o.level))
                    })?;
                    lvl.rho = Some(scalar_map("rho-override", a, move |u| u[0].like(v)));
                }
            }
        }
        Ok(pack)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ControllerSpec {
    DadsWingrock(WingRockDadsController),
    SigmaMod(SigmaModController),
    DadsSynthesized {
        #[serde(default)]
        gains: GainSpec,
        majorants: MajorantSpec,
        #[serde(default = "default_synthesis_samples")]
        samples: usize,
    },
}

fn default_synthesis_samples() -> usize {
    SynthesisOptions::default().samples
}

/// Which checks `verify` runs; tolerances default to the documented ones.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "kebab-case", deny_unknown_fields)]
pub enum CheckSpec {
    /// Sampled dissipation inequality of the scenario's controller.
    Dissipation {
        #[serde(default = "default_dissipation_samples")]
        samples: usize,
        #[serde(default = "default_dissipation_tol")]
        tolerance: f64,
    },
    /// Every stage certificate of a synthesized law.
    StageCertificates {
        #[serde(default = "default_stage_samples")]
        stage_samples: usize,
        #[serde(default = "default_final_samples")]
        final_samples: usize,
        #[serde(default = "default_certificate_tol")]
        tolerance: f64,
    },
    /// Envelope, z-monotonicity and tail checks on the simulated DADS run.
    TrajectoryEstimates {
        #[serde(default = "default_tail")]
        tail_fraction: f64,
        #[serde(default = "default_slack")]
        slack: f64,
    },
    /// `|x(t_end)| < limit`.
    Convergence {
        #[serde(default = "default_convergence")]
        limit: f64,
    },
    /// Tail of `x₁² + ζ² + χ²` against the σ-modification residual bound.
    SigmaTradeoff {
        #[serde(default = "default_tail")]
        tail_fraction: f64,
        #[serde(default = "default_slack")]
        slack: f64,
    },
    /// Gain plateau of the simulated run.
    Plateau {
        #[serde(default = "default_tail")]
        tail_fraction: f64,
        #[serde(default = "default_growth")]
        max_growth: f64,
    },
    /// Jet gradients of the plant and controller maps against central differences.
    Gradients {
        #[serde(default = "default_gradient_points")]
        points: usize,
        #[serde(default = "default_gradient_tol")]
        tolerance: f64,
    },
    /// `η ≤ g ≤ μ(1+|θ|)` on sampled states.
    GainBounds {
        #[serde(default = "default_dissipation_samples")]
        samples: usize,
        #[serde(default = "default_box_radius")]
        radius: f64,
    },
}

fn default_dissipation_samples() -> usize {
    1000
}
fn default_dissipation_tol() -> f64 {
    1e-6
}
fn default_stage_samples() -> usize {
    200
}
fn default_final_samples() -> usize {
    500
}
fn default_certificate_tol() -> f64 {
    1e-7
}
fn default_tail() -> f64 {
    0.2
}
fn default_slack() -> f64 {
    0.1
}
fn default_convergence() -> f64 {
    1e-3
}
fn default_growth() -> f64 {
    crate::verifier::PLATEAU_GROWTH
}
fn default_gradient_points() -> usize {
    100
}
fn default_gradient_tol() -> f64 {
    1e-5
}
fn default_box_radius() -> f64 {
    5.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    pub system: SystemSpec,
    pub controller: ControllerSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sim: Option<SimConfig>,
    #[serde(default)]
    pub sample_box: SampleBox,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub checks: Vec<CheckSpec>,
}

/// A built controller plus the synthesis it came from, if any.
pub struct BuiltController {
    pub controller: Controller,
    pub synthesis: Option<Synthesis>,
}

impl Scenario {
    pub fn from_toml(text: &str, path: &Path) -> Result<Scenario, ScenarioError> {
        let sc: Scenario = toml::from_str(text).map_err(|e| ScenarioError::Parse {
            path: path.to_path_buf(),
            message: e.to_string().trim_end().to_string(),
        })?;
        sc.validate()?;
        Ok(sc)
    }

    pub fn load(path: &Path) -> Result<Scenario, ScenarioError> {
        let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Scenario::from_toml(&text, path)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario fields are TOML-representable")
    }

    /// Cheap load-time checks; anything needing synthesis waits for [`Scenario::build_controller`].
    pub fn validate(&self) -> Result<(), ScenarioError> {
        let sys = self.system.build()?;
        let (ctrl_dim, plant_dim) = match &self.controller {
            ControllerSpec::DadsWingrock(c) => {
                c.validate()?;
                (1, 3)
            }
            ControllerSpec::SigmaMod(c) => {
                c.validate()?;
                (4, 3)
            }
            ControllerSpec::DadsSynthesized { gains, .. } => {
                gains.build()?;
                (1, sys.dim())
            }
        };
        if plant_dim != sys.dim() {
            return Err(ScenarioError::Invalid(format!(
                "controller expects a {plant_dim}-state plant, `{}` has {}",
                self.system.builtin,
                sys.dim()
            )));
        }
        if let Some(sim) = &self.sim {
            if sim.ctrl_init.len() != ctrl_dim || sim.plant_init.len() != plant_dim {
                return Err(ScenarioError::Invalid(format!(
                    "initial states need lengths {plant_dim} (plant) and {ctrl_dim} (controller)"
                )));
            }
            if !(sim.dt > 0.0 && sim.t_end > 0.0 && sim.log_stride >= 1) {
                return Err(ScenarioError::Invalid(
                    "dt, t_end and log_stride must be positive".into(),
                ));
            }
        }
        Ok(())
    }

    pub fn build_system(&self) -> Result<StrictFeedbackSystem, ScenarioError> {
        self.system.build()
    }

    /// Builds the runtime law, running the synthesis when the scenario asks for one.
    pub fn build_controller(
        &self,
        sys: &StrictFeedbackSystem,
    ) -> Result<BuiltController, ScenarioError> {
        Ok(match &self.controller {
            ControllerSpec::DadsWingrock(c) => BuiltController {
                controller: Controller::WingRockDads(*c),
                synthesis: None,
            },
            ControllerSpec::SigmaMod(c) => BuiltController {
                controller: Controller::SigmaMod(*c),
                synthesis: None,
            },
            ControllerSpec::DadsSynthesized {
                gains,
                majorants,
                samples,
            } => {
                let g = gains.build()?;
                let pack = majorants.build(&g, sys)?;
                let opts = SynthesisOptions {
                    samples: *samples,
                    seed: self.seed,
                    sample_box: self.sample_box,
                };
                let syn = synthesize(sys, &g, &pack, &opts)?;
                BuiltController {
                    controller: Controller::SynthesizedDads(
                        SynthesizedDadsController::from_synthesis(&syn),
                    ),
                    synthesis: Some(syn),
                }
            }
        })
    }

    /// Output directory, relative paths resolved against `base`.
    pub fn output_dir(&self, base: &Path) -> PathBuf {
        match &self.output_dir {
            Some(p) if p.is_absolute() => p.clone(),
            Some(p) => base.join(p),
            None => base.to_path_buf(),
        }
    }
}

impl Scenario {
    /// Command-line overrides of the seed and the time grid.
    pub fn apply_overrides(
        &mut self,
        seed: Option<u64>,
        dt: Option<f64>,
        t_end: Option<f64>,
    ) -> Result<(), ScenarioError> {
        if let Some(s) = seed {
            self.seed = s;
        }
        if dt.is_some() || t_end.is_some() {
            let sim = self.sim.as_mut().ok_or_else(|| {
                ScenarioError::Invalid(
                    "--dt/--t-end given but the scenario has no [sim] table".into(),
                )
            })?;
            if let Some(v) = dt {
                sim.dt = v;
            }
            if let Some(v) = t_end {
                sim.t_end = v;
            }
        }
        self.validate()
    }

    pub fn sim_config(&self) -> Result<&SimConfig, ScenarioError> {
        self.sim.as_ref().ok_or_else(|| {
            ScenarioError::Invalid(format!("scenario `{}` has no [sim] table", self.name))
        })
    }

    /// Gains behind the scenario's DADS estimates, if the law is a DADS law.
    pub fn dads_gains(&self, built: &BuiltController) -> Option<DadsGains> {
        match (&self.controller, &built.synthesis) {
            (ControllerSpec::DadsWingrock(c), _) => {
                Some(DadsGains::new(1.0, c.gamma, c.eps_dz, c.c, 2.0))
            }
            (_, Some(syn)) => Some(syn.gains.clone()),
            _ => None,
        }
    }

    /// Runs every listed check. The simulation runs at most once.
    pub fn run_checks(
        &self,
        sys: &StrictFeedbackSystem,
        built: &BuiltController,
    ) -> Result<Vec<CheckReport>, ScenarioError> {
        let mut log: Option<TrajectoryLog> = None;
        let get_log = |log: &mut Option<TrajectoryLog>| -> Result<TrajectoryLog, ScenarioError> {
            if log.is_none() {
                *log = Some(simulate(sys, &built.controller, self.sim_config()?)?);
            }
            Ok(log.clone().unwrap())
        };
        let needs = |what: &str| ScenarioError::Invalid(format!("check needs {what}"));
        let mut out = Vec::new();
        for check in &self.checks {
            match check {
                CheckSpec::Dissipation { samples, tolerance } => match &self.controller {
                    ControllerSpec::DadsWingrock(c) => {
                        let pts = wingrock_samples(*samples, self.seed, &self.sample_box);
                        out.push(wingrock_dissipation(sys, c, &pts, *tolerance)?);
                    }
                    ControllerSpec::SigmaMod(c) => {
                        let pts = sigma_samples(*samples, self.seed, &self.sample_box);
                        out.push(sigma_dissipation(sys, c, &pts, *tolerance)?);
                    }
                    ControllerSpec::DadsSynthesized { .. } => {
                        let syn = built
                            .synthesis
                            .as_ref()
                            .ok_or_else(|| needs("a synthesis"))?;
                        let reports = synthesized_dissipation(
                            sys,
                            syn,
                            *samples,
                            *samples,
                            self.seed,
                            &self.sample_box,
                            *tolerance,
                        )?;
                        out.extend(reports.into_iter().last());
                    }
                },
                CheckSpec::StageCertificates {
                    stage_samples,
                    final_samples,
                    tolerance,
                } => {
                    let syn = built
                        .synthesis
                        .as_ref()
                        .ok_or_else(|| needs("a synthesized controller"))?;
                    out.extend(synthesized_dissipation(
                        sys,
                        syn,
                        *stage_samples,
                        *final_samples,
                        self.seed,
                        &self.sample_box,
                        *tolerance,
                    )?);
                }
                CheckSpec::TrajectoryEstimates {
                    tail_fraction,
                    slack,
                } => {
                    let gains = self
                        .dads_gains(built)
                        .ok_or_else(|| needs("a DADS controller"))?;
                    let radius = match &self.controller {
                        ControllerSpec::DadsWingrock(c) => Some(wingrock_radius(c)),
                        _ => None,
                    };
                    let window = TailWindow {
                        fraction: *tail_fraction,
                        slack: *slack,
                    };
                    out.extend(check_trajectory_estimates(
                        &get_log(&mut log)?,
                        &gains,
                        radius,
                        window,
                    )?);
                }
                CheckSpec::Convergence { limit } => {
                    out.push(check_convergence(&get_log(&mut log)?, *limit)?)
                }
                CheckSpec::SigmaTradeoff {
                    tail_fraction,
                    slack,
                } => {
                    let ControllerSpec::SigmaMod(c) = &self.controller else {
                        return Err(needs("a σ-modification controller"));
                    };
                    let ParameterSignal::Constant { value } = &self.sim_config()?.parameter else {
                        return Err(needs("a constant parameter"));
                    };
                    let window = TailWindow {
                        fraction: *tail_fraction,
                        slack: *slack,
                    };
                    out.push(check_sigma_tradeoff(&get_log(&mut log)?, value, c, window)?);
                }
                CheckSpec::Plateau {
                    tail_fraction,
                    max_growth,
                } => {
                    out.push(check_plateau(
                        "plateau",
                        &get_log(&mut log)?,
                        *tail_fraction,
                        *max_growth,
                    ));
                }
                CheckSpec::Gradients { points, tolerance } => {
                    for (i, map) in shipped_maps(sys, built).iter().enumerate() {
                        out.push(check_gradient(
                            map.as_ref(),
                            *points,
                            2.0,
                            self.seed + i as u64,
                            1e-6,
                            *tolerance,
                        )?);
                    }
                }
                CheckSpec::GainBounds { samples, radius } => {
                    let rep = sys
                        .validate_majorants(*samples, *radius, self.seed)
                        .map_err(SynthesisError::from)?;
                    let worst = rep.worst_margin_low.min(rep.worst_margin_high);
                    let witness = rep
                        .violations
                        .first()
                        .map(|v| v.state.clone())
                        .unwrap_or_default();
                    out.push(CheckReport::new(
                        "gain-bounds",
                        *samples,
                        worst,
                        witness,
                        0.0,
                        format!(
                            "low {:.4e} high {:.4e}",
                            rep.worst_margin_low, rep.worst_margin_high
                        ),
                    ));
                }
            }
        }
        Ok(out)
    }
}

/// Every smooth map the scenario's plant and law are built from.
pub fn shipped_maps(sys: &StrictFeedbackSystem, built: &BuiltController) -> Vec<Map> {
    let mut maps = Vec::new();
    for row in &sys.rows {
        maps.extend([&row.h, &row.g, &row.phi, &row.alpha, &row.eta, &row.mu].map(|m| m.clone()));
    }
    match &built.controller {
        Controller::WingRockDads(c) => {
            maps.push(crate::controllers::wingrock_lyapunov_map(c.c, c.k))
        }
        Controller::SigmaMod(c) => maps.push(crate::controllers::sigma_lyapunov_map(*c)),
        Controller::SynthesizedDads(_) => {}
    }
    if let Some(syn) = &built.synthesis {
        for st in &syn.stages {
            maps.extend([&st.v, &st.k, &st.gain, &st.sigma].map(|m| m.clone()));
            if let Some(m) = &st.majorants {
                maps.push(m.r.clone());
                maps.extend(m.big_r.iter().cloned());
                maps.extend(m.rho.iter().cloned());
            }
        }
        maps.push(syn.gains.kappa.clone());
        maps.push(syn.gains.lambda.clone());
    }
    maps
}

/// One row of a comparison table.
#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonRow {
    pub name: String,
    pub controller: String,
    pub stats: TrajectoryStats,
    pub drift: bool,
}

pub struct Comparison {
    pub rows: Vec<ComparisonRow>,
    pub logs: Vec<TrajectoryLog>,
    /// Present when the set holds a DADS run plus leaky and unleaked σ-modification runs.
    pub contrast: Option<CheckReport>,
}

fn persistent(d: &DisturbanceProfile) -> bool {
    !matches!(
        d,
        DisturbanceProfile::Zero { .. } | DisturbanceProfile::Vanishing { .. }
    )
}

impl Comparison {
    pub fn table(&self) -> String {
        let mut out = format!(
            "{:<16} {:<16} {:>12} {:>12} {:>12} {:>14} {:>14}  {}\n",
            "scenario",
            "controller",
            "sup_Y_tail",
            "sup_gain",
            "final_z|th",
            "energy",
            "energy_tail",
            "note"
        );
        for r in &self.rows {
            out.push_str(&format!(
                "{:<16} {:<16} {:>12.4e} {:>12.4e} {:>12.4e} {:>14.6e} {:>14.6e}  {}\n",
                r.name,
                r.controller,
                r.stats.sup_output_tail,
                r.stats.sup_gain,
                r.stats.final_z_or_theta_norm,
                r.stats.control_energy,
                r.stats.control_energy_tail,
                if r.drift { "drift" } else { "" }
            ));
        }
        out
    }

    pub fn write_csv<W: std::io::Write>(&self, out: W) -> std::io::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let io = |e: csv::Error| std::io::Error::other(e);
        w.write_record([
            "scenario",
            "controller",
            "sup_output_tail",
            "sup_gain",
            "final_z_or_theta_norm",
            "control_energy",
            "control_energy_tail",
            "drift",
        ])
        .map_err(io)?;
        for r in &self.rows {
            w.write_record([
                r.name.clone(),
                r.controller.clone(),
                format!("{:.16e}", r.stats.sup_output_tail),
                format!("{:.16e}", r.stats.sup_gain),
                format!("{:.16e}", r.stats.final_z_or_theta_norm),
                format!("{:.16e}", r.stats.control_energy),
                format!("{:.16e}", r.stats.control_energy_tail),
                r.drift.to_string(),
            ])
            .map_err(io)?;
        }
        w.flush()
    }
}

/// Simulates every scenario (in parallel) and tabulates them side by side.
pub fn compare(scenarios: &[Scenario]) -> Result<Comparison, ScenarioError> {
    if scenarios.len() < 2 {
        return Err(ScenarioError::Invalid(
            "compare needs at least two scenarios".into(),
        ));
    }
    let first = &scenarios[0];
    let t_end = first.sim_config()?.t_end;
    for sc in scenarios {
        if sc.system.builtin != first.system.builtin {
            return Err(ScenarioError::Invalid(format!(
                "`{}` uses a different plant",
                sc.name
            )));
        }
        let t = sc.sim_config()?.t_end;
        if (t - t_end).abs() > 1e-9 * t_end {
            return Err(ScenarioError::Invalid(format!(
                "horizon mismatch: {t} vs {t_end}"
            )));
        }
    }
    let systems: Vec<StrictFeedbackSystem> = scenarios
        .iter()
        .map(Scenario::build_system)
        .collect::<Result<_, _>>()?;
    let built: Vec<BuiltController> = scenarios
        .iter()
        .zip(&systems)
        .map(|(sc, sys)| sc.build_controller(sys))
        .collect::<Result<_, _>>()?;
    let runs: Vec<_> = scenarios
        .iter()
        .zip(&systems)
        .zip(&built)
        .map(|((sc, sys), b)| (sys, &b.controller, sc.sim.as_ref().unwrap()))
        .collect();
    let logs: Vec<TrajectoryLog> = batch_simulate(&runs)
        .into_iter()
        .collect::<Result<_, _>>()?;

    let kind = |sc: &Scenario| match &sc.controller {
        ControllerSpec::DadsWingrock(_) => "dads-wingrock".to_string(),
        ControllerSpec::DadsSynthesized { .. } => "dads-synthesized".to_string(),
        ControllerSpec::SigmaMod(c) => format!("sigma-mod({})", c.sigma),
    };
    let sigma_of = |sc: &Scenario| match &sc.controller {
        ControllerSpec::SigmaMod(c) => Some(c.sigma),
        _ => None,
    };
    let dads = scenarios.iter().position(|s| sigma_of(s).is_none());
    let sig0 = scenarios.iter().position(|s| sigma_of(s) == Some(0.0));
    let sig = scenarios
        .iter()
        .position(|s| sigma_of(s).is_some_and(|v| v > 0.0));
    let mut contrast = None;
    let mut drift_row = None;
    if let (Some(a), Some(b), Some(c)) = (dads, sig0, sig) {
        let mode = if persistent(&scenarios[b].sim_config()?.disturbance) {
            DriftMode::DriftExpected
        } else {
            DriftMode::NoDriftExpected
        };
        let window = TailWindow::default();
        contrast = Some(check_drift_contrast(
            &logs[a], &logs[b], &logs[c], mode, window,
        )?);
        let l = &logs[b];
        let ratio = l.gain[l.len() - 1] / l.gain[l.index_at(0.5 * t_end)];
        if mode == DriftMode::DriftExpected && ratio > crate::verifier::DRIFT_RATIO {
            drift_row = Some(b);
        }
    }
    let rows = scenarios
        .iter()
        .zip(&logs)
        .enumerate()
        .map(|(i, (sc, log))| {
            Ok(ComparisonRow {
                name: sc.name.clone(),
                controller: kind(sc),
                stats: trajectory_stats(log, TailWindow::default().fraction)?,
                drift: drift_row == Some(i),
            })
        })
        .collect::<Result<Vec<_>, ScenarioError>>()?;
    Ok(Comparison {
        rows,
        logs,
        contrast,
    })
}
