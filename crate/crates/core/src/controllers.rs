//! Runtime feedback laws. Each exposes `u(state, controller_state)` and the
//! controller-state derivative; integration lives in [`crate::simulator`].

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::jets::{scalar_map, Jet, JetError, Map};
use crate::synthesis::Synthesis;

#[derive(Debug, Error)]
pub enum ControllerError {
    #[error("invalid controller parameter: {0}")]
    InvalidParameter(String),
    #[error("{what}: expected length {expected}, got {got}")]
    Dimension {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error(transparent)]
    Jet(#[from] JetError),
}

fn check_len(what: &'static str, v: &[f64], expected: usize) -> Result<(), ControllerError> {
    if v.len() != expected {
        return Err(ControllerError::Dimension {
            what,
            expected,
            got: v.len(),
        });
    }
    Ok(())
}

// ---------------------------------------------------------------- wing-rock DADS

/// Closed-form DADS law for the wing-rock plant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WingRockDadsController {
    pub c: f64,
    #[serde(rename = "K")]
    pub k: f64,
    pub gamma: f64,
    pub eps_dz: f64,
    /// Mutation switch: flips the sign of the final `ξ` term. Only useful to
    /// show that the certificate catches a wrong law.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub flip_xi_term: bool,
}

impl Default for WingRockDadsController {
    fn default() -> Self {
        WingRockDadsController {
            c: 0.5,
            k: 14.0,
            gamma: 20.0,
            eps_dz: 0.01,
            flip_xi_term: false,
        }
    }
}

/// Intermediate quantities of the wing-rock law.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WingRockIntermediates {
    pub zeta: f64,
    pub rho: f64,
    pub l: f64,
    pub xi: f64,
    pub v: f64,
}

impl WingRockDadsController {
    pub fn new(c: f64, k: f64, gamma: f64, eps_dz: f64) -> Result<Self, ControllerError> {
        let ctrl = WingRockDadsController {
            c,
            k,
            gamma,
            eps_dz,
            flip_xi_term: false,
        };
        ctrl.validate()?;
        Ok(ctrl)
    }

    pub fn with_flipped_xi_term(mut self) -> Self {
        self.flip_xi_term = true;
        self
    }

    pub fn validate(&self) -> Result<(), ControllerError> {
        let bad = |m: String| Err(ControllerError::InvalidParameter(m));
        if !(self.c >= 0.5) {
            return bad(format!("c = {} must be ≥ 1/2", self.c));
        }
        if !(self.k >= 28.0 * self.c) {
            return bad(format!("K = {} must be ≥ 28c = {}", self.k, 28.0 * self.c));
        }
        if !(self.gamma > 0.0) {
            return bad(format!("gamma = {} must be positive", self.gamma));
        }
        if !(self.eps_dz > 0.0) {
            return bad(format!("eps_dz = {} must be positive", self.eps_dz));
        }
        Ok(())
    }
}

pub fn wingrock_intermediates(x: &[f64], z: f64, c: f64, k: f64) -> WingRockIntermediates {
    let zeta = x[1] + 2.0 * c * x[0];
    let rho = 1.0 + z.exp();
    let l = 1.0 + x[0].powi(4) + x[1].powi(4);
    let xi = x[2] + x[0] + 2.0 * c * x[1] + k * rho * rho * l * zeta;
    let v = 0.5 * (x[0] * x[0] + zeta * zeta + xi * xi);
    WingRockIntermediates {
        zeta,
        rho,
        l,
        xi,
        v,
    }
}

/// The wing-rock Lyapunov function on jets in `(x₁, x₂, x₃, z)`.
pub fn wingrock_lyapunov_jet(x: &[Jet], z: &Jet, c: f64, k: f64) -> Jet {
    let zeta = &x[1] + &x[0].scale(2.0 * c);
    let rho = z.exp().add_scalar(1.0);
    let l = (x[0].pow_int(4) + x[1].pow_int(4)).add_scalar(1.0);
    let xi = &x[2] + &x[0] + x[1].scale(2.0 * c) + (rho.square() * l * &zeta).scale(k);
    (x[0].square() + zeta.square() + xi.square()).scale(0.5)
}

/// `V` as a map of `(x₁, x₂, x₃, z)`.
pub fn wingrock_lyapunov_map(c: f64, k: f64) -> Map {
    scalar_map("wingrock V", 4, move |u| {
        wingrock_lyapunov_jet(&u[..3], &u[3], c, k)
    })
}

pub fn wingrock_control(x: &[f64], z: f64, ctrl: &WingRockDadsController) -> f64 {
    let (c, k, gamma) = (ctrl.c, ctrl.k, ctrl.gamma);
    let WingRockIntermediates {
        zeta,
        rho,
        l,
        xi,
        v,
    } = wingrock_intermediates(x, z, c, k);
    let rho2 = rho * rho;
    let dz = (v - ctrl.eps_dz).max(0.0);
    let last = 42.0 * c * (2.0 * c + 1.0) * rho2 * l * (1.0 + 18.0 * c * k * rho2 * l).powi(2) * xi;
    let last = if ctrl.flip_xi_term { -last } else { last };
    -(2.0 * c + k * rho2 * (l + 4.0 * zeta * x[1].powi(3))) * x[2]
        - zeta
        - x[1]
        - 2.0 * gamma * k * rho * l * dz * zeta
        - k * rho2 * x[1] * (4.0 * x[0].powi(3) * zeta + 2.0 * c * l)
        - last
}

pub fn wingrock_z_rate(x: &[f64], z: f64, ctrl: &WingRockDadsController) -> f64 {
    let v = wingrock_intermediates(x, z, ctrl.c, ctrl.k).v;
    ctrl.gamma * (-z).exp() * (v - ctrl.eps_dz).max(0.0)
}

/// `(√(c²+1) − c) / (2(√(c²+1) + c))`: lower bound of `V / |(x₁, x₂)|²`.
pub fn wingrock_v_lower_constant(c: f64) -> f64 {
    let s = (c * c + 1.0).sqrt();
    (s - c) / (2.0 * (s + c))
}

/// `(√(c²+1) + c)·√(2ε)`: asymptotic radius of `|(x₁, x₂)|`.
pub fn wingrock_attractivity_radius(c: f64, eps: f64) -> f64 {
    ((c * c + 1.0).sqrt() + c) * (2.0 * eps).sqrt()
}

// ---------------------------------------------------------------- σ-modification

/// Certainty-equivalence adaptive backstepping law with leakage `σ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SigmaModController {
    pub c: f64,
    pub gamma: f64,
    #[serde(rename = "K")]
    pub k: f64,
    pub sigma: f64,
}

impl Default for SigmaModController {
    fn default() -> Self {
        SigmaModController {
            c: 0.5,
            gamma: 20.0,
            k: 14.0,
            sigma: 0.4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SigmaModOutput {
    pub u: f64,
    pub w: [f64; 4],
}

impl SigmaModController {
    pub fn new(c: f64, gamma: f64, k: f64, sigma: f64) -> Result<Self, ControllerError> {
        let ctrl = SigmaModController { c, gamma, k, sigma };
        ctrl.validate()?;
        Ok(ctrl)
    }

    pub fn validate(&self) -> Result<(), ControllerError> {
        let bad = |m: String| Err(ControllerError::InvalidParameter(m));
        if !(self.c > 0.0) {
            return bad(format!("c = {} must be positive", self.c));
        }
        if !(self.gamma > 0.0) {
            return bad(format!("gamma = {} must be positive", self.gamma));
        }
        if !(self.k >= 1.0 + 2.0 * self.c) {
            return bad(format!(
                "K = {} must be ≥ 1 + 2c = {}",
                self.k,
                1.0 + 2.0 * self.c
            ));
        }
        if !(self.sigma >= 0.0) {
            return bad(format!("sigma = {} must be non-negative", self.sigma));
        }
        Ok(())
    }
}

fn regressor(x: &[f64]) -> [f64; 4] {
    [x[0], x[1], x[0] * x[1], x[1] * x[1]]
}

pub fn sigma_mod_control(x: &[f64], th: &[f64], ctrl: &SigmaModController) -> SigmaModOutput {
    let (c, k) = (ctrl.c, ctrl.k);
    let psi = regressor(x);
    let est: f64 = th.iter().zip(&psi).map(|(a, b)| a * b).sum();
    let zeta = x[1] + 2.0 * c * x[0];
    let chi = est + 2.0 * c * x[1] + k * zeta + x[0] + x[2];
    let phi = 2.0 * c + k + th[1] + th[2] * x[0] + 2.0 * th[3] * x[1];
    let drive = ctrl.gamma * (zeta + phi * chi);
    let w: [f64; 4] = std::array::from_fn(|i| drive * psi[i] - ctrl.sigma * th[i]);
    let u = -(w[0] + 2.0 * c + w[2] * x[1]) * x[0]
        - (th[0] + w[1] + 2.0 + 2.0 * k * c) * x[1]
        - (th[2] + w[3]) * x[1] * x[1]
        - phi * (est + x[2])
        - (k + phi * phi) * chi;
    SigmaModOutput { u, w }
}

/// `W` on jets in `(x₁, x₂, x₃, θ̂₁..θ̂₄)` against the true parameter `theta`.
pub fn sigma_lyapunov_jet(vars: &[Jet], theta: &[Jet], ctrl: &SigmaModController) -> Jet {
    let (c, k) = (ctrl.c, ctrl.k);
    let (x, th) = vars.split_at(3);
    let psi = [x[0].clone(), x[1].clone(), &x[0] * &x[1], x[1].square()];
    let est = Jet::dot(th, &psi);
    let zeta = &x[1] + &x[0].scale(2.0 * c);
    let chi = est + x[1].scale(2.0 * c) + zeta.scale(k) + &x[0] + &x[2];
    let mut w = (x[0].square() + zeta.square() + chi.square()).scale(0.5);
    for (t, t0) in th.iter().zip(theta) {
        w += &(t - t0).square().scale(0.5 / ctrl.gamma);
    }
    w
}

/// `W` as a map of `(x, θ̂, θ)`; taking θ as an argument lets one map serve
/// every sample.
pub fn sigma_lyapunov_map(ctrl: SigmaModController) -> Map {
    scalar_map("sigma-mod W", 11, move |u| {
        sigma_lyapunov_jet(&u[..7], &u[7..], &ctrl)
    })
}

/// `(ζ, χ)` of the σ-modification law.
pub fn sigma_errors(x: &[f64], th: &[f64], ctrl: &SigmaModController) -> (f64, f64) {
    let psi = regressor(x);
    let est: f64 = th.iter().zip(&psi).map(|(a, b)| a * b).sum();
    let zeta = x[1] + 2.0 * ctrl.c * x[0];
    (
        zeta,
        est + 2.0 * ctrl.c * x[1] + ctrl.k * zeta + x[0] + x[2],
    )
}

pub fn sigma_lyapunov(x: &[f64], th: &[f64], theta: &[f64], ctrl: &SigmaModController) -> f64 {
    let vars: Vec<Jet> = x
        .iter()
        .chain(th)
        .chain(theta)
        .map(|&v| Jet::constant(v, 11, 0))
        .collect();
    sigma_lyapunov_jet(&vars[..7], &vars[7..], ctrl).value()
}

// ---------------------------------------------------------------- synthesized DADS

/// The synthesized law `u = k(state, z)`, `ż = Γe^{-z}(V − ε)⁺`.
#[derive(Clone)]
pub struct SynthesizedDadsController {
    pub k_final: Map,
    pub v_final: Map,
    pub gamma: f64,
    pub eps_dz: f64,
    /// Plant dimension; the maps read `(state, z)`.
    pub dim: usize,
}

impl SynthesizedDadsController {
    pub fn from_synthesis(syn: &Synthesis) -> Self {
        SynthesizedDadsController {
            k_final: syn.k_final.clone(),
            v_final: syn.v_final.clone(),
            gamma: syn.gains.gamma,
            eps_dz: syn.gains.eps_dz,
            dim: syn.k_final.arity() - 1,
        }
    }

    pub fn lyapunov(&self, state: &[f64], z: f64) -> Result<f64, ControllerError> {
        check_len("state", state, self.dim)?;
        let mut xz = state.to_vec();
        xz.push(z);
        Ok(self.v_final.eval(&xz)?[0])
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthesizedOutput {
    pub u: f64,
    pub z_rate: f64,
}

pub fn synthesized_control(
    state: &[f64],
    z: f64,
    ctrl: &SynthesizedDadsController,
) -> Result<SynthesizedOutput, ControllerError> {
    check_len("state", state, ctrl.dim)?;
    let mut xz = state.to_vec();
    xz.push(z);
    let u = ctrl.k_final.eval(&xz)?[0];
    let v = ctrl.v_final.eval(&xz)?[0];
    Ok(SynthesizedOutput {
        u,
        z_rate: ctrl.gamma * (-z).exp() * (v - ctrl.eps_dz).max(0.0),
    })
}

// ---------------------------------------------------------------- dispatch

/// Any of the runtime laws, as seen by the simulator.
#[derive(Clone)]
pub enum Controller {
    WingRockDads(WingRockDadsController),
    SigmaMod(SigmaModController),
    SynthesizedDads(SynthesizedDadsController),
}

impl Controller {
    /// Length of the controller state.
    pub fn state_dim(&self) -> usize {
        match self {
            Controller::SigmaMod(_) => 4,
            _ => 1,
        }
    }

    /// Plant dimension the law expects.
    pub fn plant_dim(&self) -> usize {
        match self {
            Controller::SynthesizedDads(s) => s.dim,
            _ => 3,
        }
    }

    pub fn is_dads(&self) -> bool {
        !matches!(self, Controller::SigmaMod(_))
    }

    pub fn state_labels(&self) -> Vec<String> {
        match self {
            Controller::SigmaMod(_) => (1..=4).map(|i| format!("thetahat{i}")).collect(),
            _ => vec!["z".to_string()],
        }
    }

    fn check(&self, x: &[f64], cs: &[f64]) -> Result<(), ControllerError> {
        check_len("plant state", x, self.plant_dim())?;
        check_len("controller state", cs, self.state_dim())
    }

    /// Input and controller-state derivative.
    pub fn evaluate(
        &self,
        x: &[f64],
        cs: &[f64],
        rate: &mut [f64],
    ) -> Result<f64, ControllerError> {
        self.check(x, cs)?;
        match self {
            Controller::WingRockDads(c) => {
                rate[0] = wingrock_z_rate(x, cs[0], c);
                Ok(wingrock_control(x, cs[0], c))
            }
            Controller::SigmaMod(c) => {
                let out = sigma_mod_control(x, cs, c);
                rate.copy_from_slice(&out.w);
                Ok(out.u)
            }
            Controller::SynthesizedDads(c) => {
                let out = synthesized_control(x, cs[0], c)?;
                rate[0] = out.z_rate;
                Ok(out.u)
            }
        }
    }

    /// The law's Lyapunov function. The σ-modification one needs the true θ.
    pub fn lyapunov(&self, x: &[f64], cs: &[f64], theta: &[f64]) -> Result<f64, ControllerError> {
        self.check(x, cs)?;
        match self {
            Controller::WingRockDads(c) => Ok(wingrock_intermediates(x, cs[0], c.c, c.k).v),
            Controller::SigmaMod(c) => {
                check_len("theta", theta, 4)?;
                Ok(sigma_lyapunov(x, cs, theta, c))
            }
            Controller::SynthesizedDads(c) => c.lyapunov(x, cs[0]),
        }
    }

    /// `ρ = 1 + e^z` for DADS laws, `|θ̂|` for the σ-modification.
    pub fn gain_magnitude(&self, cs: &[f64]) -> f64 {
        match self {
            Controller::SigmaMod(_) => crate::system::norm(cs),
            _ => 1.0 + cs[0].exp(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn x0() -> [f64; 3] {
        [1.0, -0.5, -18.0]
    }

    #[test]
    fn intermediates_at_initial_point() {
        let z = -(10f64.ln());
        let i = wingrock_intermediates(&x0(), z, 0.5, 14.0);
        assert_relative_eq!(i.zeta, 0.5, epsilon = 1e-15);
        assert_relative_eq!(i.rho, 1.1, epsilon = 1e-15);
        assert_relative_eq!(i.l, 2.0625, epsilon = 1e-15);
        assert_relative_eq!(i.xi, -0.030625, epsilon = 1e-12);
        // ½·1 + ½·0.25 + ½·0.030625²
        assert_relative_eq!(i.v, 0.625 + 0.5 * 0.030625f64.powi(2), epsilon = 1e-14);
        assert!((i.v - 0.625469).abs() < 1e-6);
        let o = wingrock_intermediates(&[0.0; 3], 0.0, 0.5, 14.0);
        assert_eq!((o.zeta, o.rho, o.l, o.xi, o.v), (0.0, 2.0, 1.0, 0.0, 0.0));
    }

    #[test]
    fn control_termwise() {
        let ctrl = WingRockDadsController::default();
        let z = -(10f64.ln());
        let (c, k, g, eps) = (0.5, 14.0, 20.0, 0.01);
        let [x1, x2, x3] = x0();
        let zeta = x2 + 2.0 * c * x1;
        let rho: f64 = 1.1;
        let l = 1.0 + x1.powi(4) + x2.powi(4);
        let xi = x3 + x1 + 2.0 * c * x2 + k * rho.powi(2) * l * zeta;
        let v = 0.5 * (x1 * x1 + zeta * zeta + xi * xi);
        let terms = [
            -(2.0 * c + k * rho.powi(2) * (l + 4.0 * zeta * x2.powi(3))) * x3,
            -zeta,
            -x2,
            -2.0 * g * k * rho * l * (v - eps).max(0.0) * zeta,
            -k * rho.powi(2) * x2 * (4.0 * x1.powi(3) * zeta + 2.0 * c * l),
            -42.0
                * c
                * (2.0 * c + 1.0)
                * rho.powi(2)
                * l
                * (1.0 + 18.0 * c * k * rho.powi(2) * l).powi(2)
                * xi,
        ];
        let oracle: f64 = terms.iter().sum();
        assert_relative_eq!(
            wingrock_control(&x0(), z, &ctrl),
            oracle,
            max_relative = 1e-9
        );
        assert_eq!(wingrock_control(&[0.0; 3], 1.3, &ctrl), 0.0);
    }

    #[test]
    fn gamma_enters_one_term() {
        let z = -(10f64.ln());
        let a = WingRockDadsController::default();
        let b = WingRockDadsController { gamma: 40.0, ..a };
        let i = wingrock_intermediates(&x0(), z, 0.5, 14.0);
        let expect = -2.0 * 20.0 * 14.0 * i.rho * i.l * (i.v - 0.01) * i.zeta;
        let diff = wingrock_control(&x0(), z, &b) - wingrock_control(&x0(), z, &a);
        assert_relative_eq!(diff, expect, max_relative = 1e-9);
    }

    #[test]
    fn z_rate_values() {
        let ctrl = WingRockDadsController::default();
        let z = -(10f64.ln());
        let v = wingrock_intermediates(&x0(), z, 0.5, 14.0).v;
        let rate = wingrock_z_rate(&x0(), z, &ctrl);
        assert_relative_eq!(rate, 200.0 * (v - 0.01), max_relative = 1e-12);
        assert!((rate - 123.094).abs() < 1e-3);
        // V = 0.005 and V = ε exactly: x = (x₁, −x₁, 0) with c = ½ gives ζ = 0, ξ = 0, V = ½x₁².
        let x1 = 0.1f64;
        assert_eq!(wingrock_z_rate(&[x1, -x1, 0.0], 0.0, &ctrl), 0.0);
        let at_eps = WingRockDadsController {
            eps_dz: 0.5 * x1 * x1,
            ..ctrl
        };
        assert_eq!(wingrock_z_rate(&[x1, -x1, 0.0], 0.0, &at_eps), 0.0);
    }

    #[test]
    fn parameter_constraints() {
        assert!(WingRockDadsController::new(0.5, 14.0, 20.0, 0.01).is_ok());
        assert!(WingRockDadsController::new(0.4, 14.0, 20.0, 0.01).is_err());
        assert!(WingRockDadsController::new(0.5, 13.9, 20.0, 0.01).is_err());
        assert!(WingRockDadsController::new(0.5, 14.0, 0.0, 0.01).is_err());
        assert!(SigmaModController::new(0.5, 20.0, 2.0, 0.0).is_ok());
        assert!(SigmaModController::new(0.5, 20.0, 1.9, 0.0).is_err());
        assert!(SigmaModController::new(0.5, 20.0, 14.0, -0.1).is_err());
    }

    #[test]
    fn sigma_mod_at_origin() {
        let ctrl = SigmaModController::default();
        let o = sigma_mod_control(&[0.0; 3], &[0.0; 4], &ctrl);
        assert_eq!(o.u, 0.0);
        assert_eq!(o.w, [0.0; 4]);
        let o = sigma_mod_control(&[0.0; 3], &[1.0, 0.0, 0.0, 0.0], &ctrl);
        assert_relative_eq!(o.w[0], -0.4);
        assert_eq!(&o.w[1..], &[0.0; 3]);
        let no_leak = SigmaModController { sigma: 0.0, ..ctrl };
        let o = sigma_mod_control(&[0.0; 3], &[3.0, -1.0, 2.0, 5.0], &no_leak);
        assert_eq!(o.w, [0.0; 4]);
    }

    #[test]
    fn v_lower_constant() {
        assert!((wingrock_v_lower_constant(0.5) - 0.190983).abs() < 1e-6);
        assert!((wingrock_attractivity_radius(0.5, 0.01) - 0.22882).abs() < 1e-5);
    }

    #[test]
    fn lyapunov_jet_matches_plain() {
        let z = 0.7;
        let x = [0.3, -1.2, 2.0];
        let mut p = x.to_vec();
        p.push(z);
        let j = Jet::lift_point(&p, 0);
        let v = wingrock_lyapunov_jet(&j[..3], &j[3], 0.5, 14.0).value();
        assert_relative_eq!(
            v,
            wingrock_intermediates(&x, z, 0.5, 14.0).v,
            max_relative = 1e-14
        );
    }

    proptest! {
        #[test]
        fn v_bounded_below(x1 in -3.0..3.0f64, x2 in -3.0..3.0f64, x3 in -3.0..3.0f64, z in -3.0..3.0f64) {
            let v = wingrock_intermediates(&[x1, x2, x3], z, 0.5, 14.0).v;
            let bound = wingrock_v_lower_constant(0.5) * (x1 * x1 + x2 * x2);
            prop_assert!(v >= bound * (1.0 - 1e-12));
        }

        #[test]
        fn z_rate_nonnegative(x1 in -3.0..3.0f64, x2 in -3.0..3.0f64, x3 in -3.0..3.0f64, z in -3.0..3.0f64) {
            let ctrl = WingRockDadsController::default();
            let x = [x1, x2, x3];
            let r = wingrock_z_rate(&x, z, &ctrl);
            prop_assert!(r >= 0.0);
            if wingrock_intermediates(&x, z, 0.5, 14.0).v <= ctrl.eps_dz {
                prop_assert_eq!(r, 0.0);
            }
        }
    }
}
