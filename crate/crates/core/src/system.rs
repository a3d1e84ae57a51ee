//! Plants in strict-feedback form and the signals that drive them.
//!
//! Both plant classes are stored as one triangular [`StrictFeedbackSystem`]: an
//! ordered list of [`Row`]s where row `i` reads the state prefix `s_0..=s_i` and
//! has the form
//!
//! ```text
//! ṡ_i = h_i(s_≤i) + g_i(s_≤i, θ) s_{i+1} + φ_i(s_≤i)'θ + α_i(s_≤i)'d,   s_N = u
//! ```
//!
//! A pure chain uses one row per state. The `(x, y)` cascade uses `n` plain
//! integrator rows for `x` followed by one row per `y_j` whose maps read all of
//! `x` and `y_1..=y_j`.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::jets::{constant_map, scalar_map, vector_map, zero_vector_map, Jet, JetError, Map};

#[derive(Debug, Error)]
pub enum SystemError {
    #[error("{what}: expected dimension {expected}, got {got}")]
    Dimension {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("invalid system: {0}")]
    Invalid(String),
    #[error(transparent)]
    Jet(#[from] JetError),
}

/// One level of the triangular chain. All maps read the state prefix of length
/// `arity`; `g` additionally reads θ after the state.
#[derive(Clone)]
pub struct Row {
    pub arity: usize,
    pub h: Map,
    pub g: Map,
    pub phi: Map,
    pub alpha: Map,
    /// Positive lower bound of `g`.
    pub eta: Map,
    /// Positive map with `g ≤ μ(1+|θ|)`; unused on the last row.
    pub mu: Map,
}

impl Row {
    /// `ṡ_i = s_{i+1}` with no parameter or disturbance channel.
    pub fn integrator(arity: usize, p: usize, l: usize) -> Row {
        Row {
            arity,
            h: constant_map("h", arity, 0.0),
            g: constant_map("g", arity + p, 1.0),
            phi: zero_vector_map("phi", arity, p),
            alpha: zero_vector_map("alpha", arity, l),
            eta: constant_map("eta", arity, 1.0),
            mu: constant_map("mu", arity, 1.0),
        }
    }
}

/// Admissible parameter set, given by a sampler and a membership test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ThetaSet {
    /// All of ℝᵖ; sampled in the ball of the caller's radius.
    Whole,
    Ball {
        radius: f64,
    },
    Box {
        lo: Vec<f64>,
        hi: Vec<f64>,
    },
}

impl ThetaSet {
    pub fn contains(&self, theta: &[f64]) -> bool {
        match self {
            ThetaSet::Whole => theta.iter().all(|v| v.is_finite()),
            ThetaSet::Ball { radius } => norm(theta) <= *radius,
            ThetaSet::Box { lo, hi } => theta
                .iter()
                .zip(lo.iter().zip(hi))
                .all(|(t, (a, b))| *a <= *t && *t <= *b),
        }
    }

    /// Draws an admissible θ. `cap` bounds the sample radius for unbounded sets.
    pub fn sample<R: Rng>(&self, rng: &mut R, p: usize, cap: f64) -> Vec<f64> {
        match self {
            ThetaSet::Whole => uniform_ball(rng, p, cap),
            ThetaSet::Ball { radius } => uniform_ball(rng, p, radius.min(cap)),
            ThetaSet::Box { lo, hi } => lo
                .iter()
                .zip(hi)
                .map(|(a, b)| a + (b - a) * rng.random::<f64>())
                .collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Structure {
    /// Every state carries its own nonlinear row.
    Pure,
    /// `n` integrators feeding an `m`-row cascade.
    Cascade { n: usize, m: usize },
}

#[derive(Clone)]
pub struct StrictFeedbackSystem {
    pub name: String,
    pub rows: Vec<Row>,
    pub p: usize,
    pub l: usize,
    pub theta_set: ThetaSet,
    pub structure: Structure,
    /// State components forming the regulated output `Y`.
    pub output: Vec<usize>,
}

pub fn norm(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

/// Uniform sample in the closed Euclidean ball of `radius` in ℝ^dim.
pub fn uniform_ball<R: Rng>(rng: &mut R, dim: usize, radius: f64) -> Vec<f64> {
    if dim == 0 {
        return Vec::new();
    }
    let dir: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
    let n = norm(&dir).max(f64::MIN_POSITIVE);
    let r = radius * rng.random::<f64>().powf(1.0 / dim as f64);
    dir.iter().map(|v| v * r / n).collect()
}

pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Sampling region for certificates: Euclidean balls for state, θ and d and an
/// interval for the adaptation state z.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SampleBox {
    pub x_radius: f64,
    pub z_radius: f64,
    pub theta_radius: f64,
    pub d_radius: f64,
}

impl Default for SampleBox {
    fn default() -> Self {
        SampleBox {
            x_radius: 3.0,
            z_radius: 3.0,
            theta_radius: 40.0,
            d_radius: 30.0,
        }
    }
}

/// One draw of `(state, z, θ, d)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub x: Vec<f64>,
    pub z: f64,
    pub theta: Vec<f64>,
    pub d: Vec<f64>,
}

impl SampleBox {
    pub fn draw<R: Rng>(
        &self,
        rng: &mut R,
        n: usize,
        theta_set: &ThetaSet,
        p: usize,
        l: usize,
    ) -> Sample {
        Sample {
            x: uniform_ball(rng, n, self.x_radius),
            z: self.z_radius * (2.0 * rng.random::<f64>() - 1.0),
            theta: theta_set.sample(rng, p, self.theta_radius),
            d: uniform_ball(rng, l, self.d_radius),
        }
    }

    /// `count` reproducible samples.
    pub fn draw_many(
        &self,
        seed: u64,
        count: usize,
        n: usize,
        theta_set: &ThetaSet,
        p: usize,
        l: usize,
    ) -> Vec<Sample> {
        let mut rng = seeded_rng(seed);
        (0..count)
            .map(|_| self.draw(&mut rng, n, theta_set, p, l))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MajorantSide {
    /// `η ≤ g` failed.
    Low,
    /// `g ≤ μ(1+|θ|)` failed.
    High,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MajorantViolation {
    pub row: usize,
    pub side: MajorantSide,
    pub state: Vec<f64>,
    pub theta: Vec<f64>,
    pub margin: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MajorantReport {
    pub worst_margin_low: f64,
    pub worst_margin_high: f64,
    pub violations: Vec<MajorantViolation>,
}

impl StrictFeedbackSystem {
    pub fn new(
        name: &str,
        rows: Vec<Row>,
        p: usize,
        l: usize,
        theta_set: ThetaSet,
        structure: Structure,
        output: Vec<usize>,
    ) -> Result<Self, SystemError> {
        for (i, row) in rows.iter().enumerate() {
            let checks = [
                (row.arity, i + 1, "row arity"),
                (row.h.arity(), row.arity, "h arity"),
                (row.g.arity(), row.arity + p, "g arity"),
                (row.phi.arity(), row.arity, "phi arity"),
                (row.phi.codim(), p, "phi codim"),
                (row.alpha.arity(), row.arity, "alpha arity"),
                (row.alpha.codim(), l, "alpha codim"),
                (row.eta.arity(), row.arity, "eta arity"),
                (row.mu.arity(), row.arity, "mu arity"),
            ];
            for (got, expected, what) in checks {
                if got != expected {
                    return Err(SystemError::Invalid(format!(
                        "row {}: {what} is {got}, expected {expected}",
                        i + 1
                    )));
                }
            }
        }
        if let Structure::Cascade { n, m } = structure {
            if n + m != rows.len() || n == 0 || m == 0 {
                return Err(SystemError::Invalid(format!(
                    "cascade ({n}, {m}) does not match {} rows",
                    rows.len()
                )));
            }
        }
        if output.iter().any(|&i| i >= rows.len()) {
            return Err(SystemError::Invalid("output index out of range".into()));
        }
        Ok(StrictFeedbackSystem {
            name: name.to_string(),
            rows,
            p,
            l,
            theta_set,
            structure,
            output,
        })
    }

    /// `(x, y)` cascade with `n` integrators and the given `y` rows (row `j` has
    /// arity `n + j + 1`). The output is `(x, y_1)`.
    pub fn cascade(
        name: &str,
        n: usize,
        y_rows: Vec<Row>,
        p: usize,
        l: usize,
        theta_set: ThetaSet,
    ) -> Result<Self, SystemError> {
        let m = y_rows.len();
        let mut rows: Vec<Row> = (0..n).map(|i| Row::integrator(i + 1, p, l)).collect();
        rows.extend(y_rows);
        Self::new(
            name,
            rows,
            p,
            l,
            theta_set,
            Structure::Cascade { n, m },
            (0..=n).collect(),
        )
    }

    pub fn dim(&self) -> usize {
        self.rows.len()
    }

    fn check_dims(&self, state: usize, theta: usize, d: usize) -> Result<(), SystemError> {
        let pairs = [
            ("state", self.dim(), state),
            ("theta", self.p, theta),
            ("disturbance", self.l, d),
        ];
        for (what, expected, got) in pairs {
            if expected != got {
                return Err(SystemError::Dimension {
                    what,
                    expected,
                    got,
                });
            }
        }
        Ok(())
    }

    /// Time derivative of the plant state.
    pub fn eval_dynamics(
        &self,
        state: &[f64],
        u: f64,
        theta: &[f64],
        d: &[f64],
    ) -> Result<Vec<f64>, SystemError> {
        self.check_dims(state.len(), theta.len(), d.len())?;
        let n = self.dim();
        let order0 = |v: f64| Jet::constant(v, 1, 0);
        let s: Vec<Jet> = state.iter().map(|&v| order0(v)).collect();
        let out = self.dynamics_jets(&s, &order0(u), theta, d)?;
        debug_assert_eq!(out.len(), n);
        Ok(out.iter().map(Jet::value).collect())
    }

    /// Dynamics evaluated on jets of the state and input; θ and d enter as constants.
    pub fn dynamics_jets(
        &self,
        state: &[Jet],
        u: &Jet,
        theta: &[f64],
        d: &[f64],
    ) -> Result<Vec<Jet>, SystemError> {
        self.check_dims(state.len(), theta.len(), d.len())?;
        let n = self.dim();
        let proto = &state[0];
        let theta_j: Vec<Jet> = theta.iter().map(|&t| proto.like(t)).collect();
        let mut out = Vec::with_capacity(n);
        for (i, row) in self.rows.iter().enumerate() {
            let prefix = &state[..=i];
            let next = if i + 1 < n { &state[i + 1] } else { u };
            out.push(self.row_rhs(row, prefix, next, &theta_j, theta, d)?);
        }
        Ok(out)
    }

    /// `h + g·next + φ'θ + α'd` for one row.
    pub(crate) fn row_rhs(
        &self,
        row: &Row,
        prefix: &[Jet],
        next: &Jet,
        theta_j: &[Jet],
        theta: &[f64],
        d: &[f64],
    ) -> Result<Jet, SystemError> {
        let mut g_in = prefix.to_vec();
        g_in.extend_from_slice(theta_j);
        let h = row.h.eval_jets(prefix)?.remove(0);
        let g = row.g.eval_jets(&g_in)?.remove(0);
        let mut acc = &h + &(&g * next);
        if self.p > 0 {
            for (phi, t) in row.phi.eval_jets(prefix)?.iter().zip(theta) {
                acc += &phi.scale(*t);
            }
        }
        if self.l > 0 {
            for (a, dv) in row.alpha.eval_jets(prefix)?.iter().zip(d) {
                acc += &a.scale(*dv);
            }
        }
        Ok(acc)
    }

    /// `|Y|` for the configured output components.
    pub fn output_norm(&self, state: &[f64]) -> f64 {
        self.output
            .iter()
            .map(|&i| state[i] * state[i])
            .sum::<f64>()
            .sqrt()
    }

    /// Samples the gain bounds `η ≤ g ≤ μ(1+|θ|)` on a ball of states.
    pub fn validate_majorants(
        &self,
        n_samples: usize,
        box_radius: f64,
        seed: u64,
    ) -> Result<MajorantReport, SystemError> {
        let mut rng = seeded_rng(seed);
        let mut low = f64::INFINITY;
        let mut high = f64::INFINITY;
        let mut violations = Vec::new();
        let last = self.dim() - 1;
        for _ in 0..n_samples {
            let state = uniform_ball(&mut rng, self.dim(), box_radius);
            let theta = self
                .theta_set
                .sample(&mut rng, self.p, SampleBox::default().theta_radius);
            let tn = norm(&theta);
            for (i, row) in self.rows.iter().enumerate() {
                let prefix = &state[..=i];
                let mut g_in = prefix.to_vec();
                g_in.extend_from_slice(&theta);
                let g = row.g.eval(&g_in)?[0];
                let eta = row.eta.eval(prefix)?[0];
                let m_low = g - eta;
                low = low.min(m_low);
                if m_low < 0.0 {
                    violations.push(MajorantViolation {
                        row: i,
                        side: MajorantSide::Low,
                        state: prefix.to_vec(),
                        theta: theta.clone(),
                        margin: m_low,
                    });
                }
                if i < last {
                    let mu = row.mu.eval(prefix)?[0];
                    let m_high = mu * (1.0 + tn) - g;
                    high = high.min(m_high);
                    if m_high < 0.0 {
                        violations.push(MajorantViolation {
                            row: i,
                            side: MajorantSide::High,
                            state: prefix.to_vec(),
                            theta: theta.clone(),
                            margin: m_high,
                        });
                    }
                }
            }
        }
        Ok(MajorantReport {
            worst_margin_low: low,
            worst_margin_high: if high.is_finite() { high } else { 0.0 },
            violations,
        })
    }

    /// Whether row `i`'s gain ignores θ on sampled points.
    pub fn gain_is_theta_free(
        &self,
        i: usize,
        samples: usize,
        seed: u64,
    ) -> Result<bool, SystemError> {
        let row = &self.rows[i];
        let mut rng = seeded_rng(seed);
        let sb = SampleBox::default();
        for _ in 0..samples {
            let prefix = uniform_ball(&mut rng, row.arity, sb.x_radius);
            let t1 = self.theta_set.sample(&mut rng, self.p, sb.theta_radius);
            let t2 = self.theta_set.sample(&mut rng, self.p, sb.theta_radius);
            let eval = |t: &[f64]| -> Result<f64, SystemError> {
                let mut v = prefix.clone();
                v.extend_from_slice(t);
                Ok(row.g.eval(&v)?[0])
            };
            let (a, b) = (eval(&t1)?, eval(&t2)?);
            if (a - b).abs() > 1e-12 * (1.0 + a.abs()) {
                return Ok(false);
            }
        }
        Ok(true)
    }
}

/// The wing-rock plant: `ẋ₁ = x₂`, `ẋ₂ = θ'(x₁, x₂, x₁x₂, x₂²) + x₃ + d₁`, `ẋ₃ = u + d₂`.
pub fn wingrock() -> StrictFeedbackSystem {
    let (p, l) = (4, 2);
    let row1 = Row::integrator(1, p, l);
    let mut row2 = Row::integrator(2, p, l);
    row2.phi = vector_map("phi2", 2, 4, |x| {
        vec![x[0].clone(), x[1].clone(), &x[0] * &x[1], x[1].square()]
    });
    row2.alpha = vector_map("alpha2", 2, 2, |x| vec![x[0].like(1.0), x[0].like(0.0)]);
    let mut row3 = Row::integrator(3, p, l);
    row3.alpha = vector_map("alpha3", 3, 2, |x| vec![x[0].like(0.0), x[0].like(1.0)]);
    StrictFeedbackSystem::new(
        "wingrock",
        vec![row1, row2, row3],
        p,
        l,
        ThetaSet::Whole,
        Structure::Pure,
        vec![0, 1],
    )
    .expect("wing-rock rows are consistent")
}

/// Scalar example with a state-dependent gain `g₁ = 2 + sin(x₁)` and lower bound `η₁`.
pub fn sine_gain_chain(eta: f64) -> StrictFeedbackSystem {
    let mut row = Row::integrator(1, 1, 1);
    row.g = scalar_map("g1", 2, |v| v[0].sin() + 2.0);
    row.eta = constant_map("eta1", 1, eta);
    row.mu = constant_map("mu1", 1, 3.0);
    row.alpha = vector_map("alpha1", 1, 1, |x| vec![x[0].like(1.0)]);
    StrictFeedbackSystem::new(
        "sine-gain",
        vec![row],
        1,
        1,
        ThetaSet::Whole,
        Structure::Pure,
        vec![0],
    )
    .expect("consistent")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum DisturbanceProfile {
    Zero {
        dim: usize,
    },
    /// Channel `i` is `amplitude[i]·cos(frequency[i]·t)`.
    SinusoidBank {
        amplitude: Vec<f64>,
        frequency: Vec<f64>,
    },
    /// Sinusoid bank multiplied by `e^{-rate·t}`.
    Vanishing {
        amplitude: Vec<f64>,
        frequency: Vec<f64>,
        rate: f64,
    },
    /// Piecewise-linear table; the first or last row is held outside its range.
    Table {
        times: Vec<f64>,
        values: Vec<Vec<f64>>,
    },
}

fn interpolate(times: &[f64], values: &[Vec<f64>], t: f64) -> Vec<f64> {
    if times.is_empty() {
        return Vec::new();
    }
    if t <= times[0] {
        return values[0].clone();
    }
    let last = times.len() - 1;
    if t >= times[last] {
        return values[last].clone();
    }
    let k = times.partition_point(|&s| s <= t) - 1;
    let w = (t - times[k]) / (times[k + 1] - times[k]);
    values[k]
        .iter()
        .zip(&values[k + 1])
        .map(|(a, b)| a + w * (b - a))
        .collect()
}

fn validate_table(times: &[f64], values: &[Vec<f64>]) -> Result<(), SystemError> {
    if times.is_empty() || times.len() != values.len() {
        return Err(SystemError::Invalid(
            "table needs matching, non-empty times and values".into(),
        ));
    }
    if times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(SystemError::Invalid(
            "table times must be strictly increasing".into(),
        ));
    }
    let dim = values[0].len();
    if values.iter().any(|v| v.len() != dim) {
        return Err(SystemError::Invalid("table rows differ in length".into()));
    }
    Ok(())
}

impl DisturbanceProfile {
    /// The two-channel persistent disturbance `(20cos 10t, 10cos 20t)`.
    pub fn persistent() -> Self {
        DisturbanceProfile::SinusoidBank {
            amplitude: vec![20.0, 10.0],
            frequency: vec![10.0, 20.0],
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            DisturbanceProfile::Zero { dim } => *dim,
            DisturbanceProfile::SinusoidBank { amplitude, .. } => amplitude.len(),
            DisturbanceProfile::Vanishing { amplitude, .. } => amplitude.len(),
            DisturbanceProfile::Table { values, .. } => values.first().map_or(0, Vec::len),
        }
    }

    pub fn validate(&self) -> Result<(), SystemError> {
        match self {
            DisturbanceProfile::Zero { .. } => Ok(()),
            DisturbanceProfile::SinusoidBank {
                amplitude,
                frequency,
            }
            | DisturbanceProfile::Vanishing {
                amplitude,
                frequency,
                ..
            } => {
                if amplitude.len() != frequency.len() {
                    Err(SystemError::Invalid(
                        "amplitude and frequency lengths differ".into(),
                    ))
                } else {
                    Ok(())
                }
            }
            DisturbanceProfile::Table { times, values } => validate_table(times, values),
        }
    }

    pub fn sample(&self, t: f64) -> Vec<f64> {
        match self {
            DisturbanceProfile::Zero { dim } => vec![0.0; *dim],
            DisturbanceProfile::SinusoidBank {
                amplitude,
                frequency,
            } => amplitude
                .iter()
                .zip(frequency)
                .map(|(a, w)| a * (w * t).cos())
                .collect(),
            DisturbanceProfile::Vanishing {
                amplitude,
                frequency,
                rate,
            } => {
                let decay = (-rate * t).exp();
                amplitude
                    .iter()
                    .zip(frequency)
                    .map(|(a, w)| a * (w * t).cos() * decay)
                    .collect()
            }
            DisturbanceProfile::Table { times, values } => interpolate(times, values, t),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ParameterSignal {
    Constant {
        value: Vec<f64>,
    },
    Table {
        times: Vec<f64>,
        values: Vec<Vec<f64>>,
    },
}

impl ParameterSignal {
    pub fn dim(&self) -> usize {
        match self {
            ParameterSignal::Constant { value } => value.len(),
            ParameterSignal::Table { values, .. } => values.first().map_or(0, Vec::len),
        }
    }

    pub fn sample(&self, t: f64) -> Vec<f64> {
        match self {
            ParameterSignal::Constant { value } => value.clone(),
            ParameterSignal::Table { times, values } => interpolate(times, values, t),
        }
    }

    /// Checks the table shape and that every listed value lies in `set`.
    pub fn validate(&self, set: &ThetaSet) -> Result<(), SystemError> {
        let values: Vec<&Vec<f64>> = match self {
            ParameterSignal::Constant { value } => vec![value],
            ParameterSignal::Table { times, values } => {
                validate_table(times, values)?;
                values.iter().collect()
            }
        };
        if values.iter().all(|v| set.contains(v)) {
            Ok(())
        } else {
            Err(SystemError::Invalid(
                "parameter signal leaves the admissible set".into(),
            ))
        }
    }
}

/// The wing-rock parameter vector used throughout the experiments.
pub const WINGROCK_THETA: [f64; 4] = [20.0, 20.0, 2.0, 1.0];

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn half_period(frequency: f64) -> f64 {
        PI / frequency
    }

    #[test]
    fn wingrock_equilibrium() {
        let sys = wingrock();
        let f = sys
            .eval_dynamics(&[0.0; 3], 0.0, &[3.0, -1.0, 7.0, 2.0], &[0.0, 0.0])
            .unwrap();
        assert_eq!(f, vec![0.0, 0.0, 0.0]);
    }

    #[test]
    fn wingrock_hand_evaluation() {
        let sys = wingrock();
        let x = [1.0, -0.5, -18.0];
        let th = WINGROCK_THETA;
        let f = sys.eval_dynamics(&x, 0.0, &th, &[0.0, 0.0]).unwrap();
        let oracle_x2 =
            th[0] * x[0] + th[1] * x[1] + th[2] * x[0] * x[1] + th[3] * x[1] * x[1] + x[2];
        assert_eq!(f[0], -0.5);
        assert!((f[1] - oracle_x2).abs() < 1e-12);
        assert!((f[1] + 8.75).abs() < 1e-12);
        assert_eq!(f[2], 0.0);
        let fd = sys.eval_dynamics(&x, 0.0, &th, &[1.0, 0.0]).unwrap();
        assert!((fd[1] - f[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let sys = wingrock();
        assert!(matches!(
            sys.eval_dynamics(&[0.0; 2], 0.0, &[0.0; 4], &[0.0; 2]),
            Err(SystemError::Dimension { what: "state", .. })
        ));
        assert!(sys
            .eval_dynamics(&[0.0; 3], 0.0, &[0.0; 3], &[0.0; 2])
            .is_err());
    }

    #[test]
    fn majorant_examples() {
        let r = wingrock().validate_majorants(200, 5.0, 7).unwrap();
        assert_eq!(r.worst_margin_low, 0.0);
        assert!(r.violations.is_empty());
        let ok = sine_gain_chain(1.0)
            .validate_majorants(500, 5.0, 7)
            .unwrap();
        assert!(ok.worst_margin_low >= 0.0);
        assert!(ok.violations.is_empty());
        let bad = sine_gain_chain(3.0)
            .validate_majorants(500, 5.0, 7)
            .unwrap();
        assert!(!bad.violations.is_empty());
        // direct scan oracle: min over the box of 2 + sin(x) - 3 is -2
        assert!(bad.worst_margin_low >= -2.0 - 1e-12 && bad.worst_margin_low < -1.9);
    }

    #[test]
    fn disturbance_examples() {
        let bank = DisturbanceProfile::persistent();
        assert_eq!(bank.sample(0.0), vec![20.0, 10.0]);
        assert_eq!(
            DisturbanceProfile::Zero { dim: 2 }.sample(3.7),
            vec![0.0, 0.0]
        );
        let one = DisturbanceProfile::SinusoidBank {
            amplitude: vec![20.0],
            frequency: vec![10.0],
        };
        assert!((one.sample(half_period(10.0))[0] + 20.0).abs() < 1e-12);
        let table = DisturbanceProfile::Table {
            times: vec![0.0, 1.0],
            values: vec![vec![0.0], vec![2.0]],
        };
        assert_eq!(table.sample(0.5), vec![1.0]);
        assert_eq!(table.sample(5.0), vec![2.0]);
        let van = DisturbanceProfile::Vanishing {
            amplitude: vec![20.0],
            frequency: vec![10.0],
            rate: 1.0,
        };
        assert!((van.sample(1.0)[0] - 20.0 * 10f64.cos() * (-1f64).exp()).abs() < 1e-12);
    }

    #[test]
    fn theta_free_detection() {
        let sys = wingrock();
        assert!(sys.gain_is_theta_free(1, 20, 1).unwrap());
        let mut row = Row::integrator(1, 1, 1);
        row.g = scalar_map("g", 2, |v| v[1].square() + 1.0);
        let s = StrictFeedbackSystem::new(
            "t",
            vec![row],
            1,
            1,
            ThetaSet::Whole,
            Structure::Pure,
            vec![0],
        )
        .unwrap();
        assert!(!s.gain_is_theta_free(0, 20, 1).unwrap());
    }

    #[test]
    fn uniform_ball_stays_inside() {
        let mut rng = seeded_rng(3);
        for _ in 0..1000 {
            assert!(norm(&uniform_ball(&mut rng, 4, 2.5)) <= 2.5 + 1e-12);
        }
    }

    proptest! {
        #[test]
        fn affine_in_u(x in prop::array::uniform3(-3.0..3.0f64), u1 in -50.0..50.0f64, u2 in -50.0..50.0f64,
                       th in prop::array::uniform4(-40.0..40.0f64), d in prop::array::uniform2(-30.0..30.0f64)) {
            let sys = wingrock();
            let f = |u: f64| sys.eval_dynamics(&x, u, &th, &d).unwrap();
            let (a, b, z, s) = (f(u1), f(u2), f(0.0), f(u1 + u2));
            for i in 0..3 {
                prop_assert!((a[i] + b[i] - z[i] - s[i]).abs() < 1e-12 * (1.0 + s[i].abs()));
            }
        }

        #[test]
        fn affine_in_d(x in prop::array::uniform3(-3.0..3.0f64), th in prop::array::uniform4(-40.0..40.0f64),
                       d1 in prop::array::uniform2(-30.0..30.0f64), d2 in prop::array::uniform2(-30.0..30.0f64)) {
            let sys = wingrock();
            let f = |d: [f64; 2]| sys.eval_dynamics(&x, 0.7, &th, &d).unwrap();
            let sum = [d1[0] + d2[0], d1[1] + d2[1]];
            let (a, b, z, s) = (f(d1), f(d2), f([0.0, 0.0]), f(sum));
            for i in 0..3 {
                prop_assert!((a[i] + b[i] - z[i] - s[i]).abs() < 1e-12 * (1.0 + s[i].abs()));
            }
        }

        #[test]
        fn origin_is_equilibrium(th in prop::array::uniform4(-100.0..100.0f64)) {
            let f = wingrock().eval_dynamics(&[0.0; 3], 0.0, &th, &[0.0, 0.0]).unwrap();
            prop_assert_eq!(f, vec![0.0; 3]);
        }
    }
}
