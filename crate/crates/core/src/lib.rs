//! Deadzone-adapted disturbance suppression (DADS) for strict-feedback systems.
//!
//! The crate covers the whole pipeline:
//!
//! * [`jets`]: truncated Taylor arithmetic used for every derivative.
//! * [`system`]: plants in strict-feedback form, signals and majorant checks.
//! * [`synthesis`]: recursive backstepping that builds `(V, k)` and the update law.
//! * [`controllers`]: the closed-form wing-rock DADS law, the σ-modification
//!   baseline and the generic synthesized law.
//! * [`simulator`]: fixed-step closed-loop integration and trajectory statistics.
//! * [`verifier`]: sampled dissipation certificates and trajectory checks.
//! * [`scenario`]: TOML scenario files shared by the examples and the `dads` binary.

// `!(a <= b)` is deliberate throughout: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod controllers;
pub mod jets;
pub mod scenario;
pub mod simulator;
pub mod synthesis;
pub mod system;
pub mod verifier;

pub use controllers::{
    Controller, SigmaModController, SynthesizedDadsController, WingRockDadsController,
};
pub use jets::{Jet, JetError, Map, SmoothMap};
pub use simulator::{simulate, SimConfig, TrajectoryLog};

pub use synthesis::{synthesize, DadsGains, DadsStage, Synthesis};
pub use system::{DisturbanceProfile, ParameterSignal, StrictFeedbackSystem};
