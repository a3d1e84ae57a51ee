//! Recursive backstepping synthesis of the DADS controller.
//!
//! A synthesis starts from a base stage, either the scalar first row of a pure
//! chain or the linear `(x, y₁)` block of a cascade, and then adds one row at a
//! time. Every stage holds a Lyapunov function `V`, a virtual feedback `k` and a
//! comparison function `σ` on `(state prefix, z)` together with the decay rate
//! and disturbance gain of its own dissipation inequality
//!
//! ```text
//! ∂V/∂s·ṡ + ∂V/∂z·Γe^{-z}(V − ε)⁺ ≤ −c_j V + a_j (|d|² + ((|θ| − b − λ(e^z))⁺)²) / (1 + κ(e^z))
//! ```
//!
//! where the last state derivative uses `k` in place of the next state. Each
//! backstepping step halves `c_j` and doubles `a_j`. Derivatives of earlier
//! stages are taken with jets, so every map carries an explicit order budget.
//!
//! The smooth majorants the construction needs are supplied by the caller and
//! checked by sampling before they are used.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use thiserror::Error;

use crate::jets::{identity_map, scalar_map, Jet, JetError, LocalExpansion, Map, SmoothMap};
use crate::system::{norm, Row, Sample, SampleBox, StrictFeedbackSystem, Structure, SystemError};

#[derive(Debug, Error)]
pub enum SynthesisError {
    #[error("majorant `{which}` at level {level} fails at {witness:?} (margin {margin:e})")]
    MajorantViolation {
        level: usize,
        which: String,
        witness: Vec<f64>,
        margin: f64,
    },
    #[error("level {level} has no majorants")]
    MissingMajorants { level: usize },
    #[error("gain of row {row} depends on θ; only the last row may")]
    ThetaDependentGain { row: usize },
    #[error("jet order budget exhausted at level {level}")]
    OrderExhausted { level: usize },
    #[error("invalid gains: {0}")]
    InvalidGains(String),
    #[error("linear algebra: {0}")]
    Linear(String),
    #[error(transparent)]
    Jet(#[from] JetError),
    #[error(transparent)]
    System(#[from] SystemError),
}

/// Design constants of the DADS law.
#[derive(Clone)]
pub struct DadsGains {
    pub b: f64,
    pub gamma: f64,
    /// Level inside the positive part of the update law.
    pub eps_dz: f64,
    pub c: f64,
    pub a: f64,
    pub kappa: Map,
    pub lambda: Map,
}

impl std::fmt::Debug for DadsGains {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("DadsGains")
            .field("b", &self.b)
            .field("gamma", &self.gamma)
            .field("eps_dz", &self.eps_dz)
            .field("c", &self.c)
            .field("a", &self.a)
            .field("kappa", &self.kappa.name())
            .field("lambda", &self.lambda.name())
            .finish()
    }
}

impl DadsGains {
    /// Gains with `κ = λ = identity`.
    pub fn new(b: f64, gamma: f64, eps_dz: f64, c: f64, a: f64) -> Self {
        DadsGains {
            b,
            gamma,
            eps_dz,
            c,
            a,
            kappa: identity_map(),
            lambda: identity_map(),
        }
    }

    /// The wing-rock design: `b = 1, Γ = 20, ε = 0.01, c = 0.5, a = 2`.
    pub fn wingrock() -> Self {
        DadsGains::new(1.0, 20.0, 0.01, 0.5, 2.0)
    }

    /// Deadzone level `ε²/(2M)` used by cascades with comparison constant `M`.
    pub fn cascade_deadzone(eps: f64, m_const: f64) -> f64 {
        eps * eps / (2.0 * m_const)
    }

    /// Deadzone level `ε²/2` used by pure chains.
    pub fn chain_deadzone(eps: f64) -> f64 {
        eps * eps / 2.0
    }

    pub fn validate(&self) -> Result<(), SynthesisError> {
        for (name, v) in [
            ("b", self.b),
            ("gamma", self.gamma),
            ("eps_dz", self.eps_dz),
            ("c", self.c),
            ("a", self.a),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(SynthesisError::InvalidGains(format!(
                    "{name} must be positive, got {v}"
                )));
            }
        }
        for f in [&self.kappa, &self.lambda] {
            if f.arity() != 1 {
                return Err(SynthesisError::InvalidGains(format!(
                    "`{}` must be scalar",
                    f.name()
                )));
            }
            let at0 = f.eval(&[0.0])?[0];
            if at0.abs() > 1e-12 {
                return Err(SynthesisError::InvalidGains(format!(
                    "`{}`(0) = {at0}, expected 0",
                    f.name()
                )));
            }
            let mut prev = at0;
            for i in 1..=200 {
                let v = f.eval(&[i as f64 * 0.5])?[0];
                if v <= prev {
                    return Err(SynthesisError::InvalidGains(format!(
                        "`{}` is not increasing",
                        f.name()
                    )));
                }
                prev = v;
            }
        }
        Ok(())
    }

    /// `(|d|² + ((|θ| − b − λ(e^z))⁺)²) / (1 + κ(e^z))`.
    pub fn disturbance_term(&self, z: f64, theta: &[f64], d: &[f64]) -> Result<f64, JetError> {
        let ez = z.exp();
        let lam = self.lambda.eval(&[ez])?[0];
        let kap = self.kappa.eval(&[ez])?[0];
        let excess = (norm(theta) - self.b - lam).max(0.0);
        Ok((norm(d).powi(2) + excess * excess) / (1.0 + kap))
    }
}

/// Majorants supplied for one level. The base level needs only `r`; later
/// levels need `R(x, z)`, `r(x)` and `ρ(x, y)`.
#[derive(Clone)]
pub struct LevelMajorants {
    pub r: Map,
    pub big_r: Option<Map>,
    pub rho: Option<Map>,
}

#[derive(Clone)]
pub struct MajorantPack {
    pub levels: Vec<LevelMajorants>,
}

/// Sampled margin of one majorant inequality.
#[derive(Debug, Clone, PartialEq)]
pub struct MajorantCheck {
    pub which: String,
    pub worst_margin: f64,
    pub witness: Vec<f64>,
}

/// One backstepping level.
#[derive(Clone)]
pub struct DadsStage {
    pub level: usize,
    /// Number of plant states the stage reads (its maps read these plus `z`).
    pub dim: usize,
    pub v: Map,
    pub k: Map,
    /// `k = −gain/η · s` with `s` the stage's tracking error.
    pub gain: Map,
    pub sigma: Map,
    pub rate_c: f64,
    pub gain_a: f64,
    pub majorants: Option<LevelMajorants>,
    pub checks: Vec<MajorantCheck>,
}

/// Extra data of the linear base step of a cascade.
#[derive(Debug, Clone, PartialEq)]
pub struct BaseStepResult {
    pub p: DMatrix<f64>,
    pub omega: DVector<f64>,
    pub k_const: f64,
    /// `1/λ_min` of the quadratic form before inflation.
    pub m_raw: f64,
    /// `max(1, 1.01·m_raw)`.
    pub m_const: f64,
    /// Largest eigenvalue of `P(A+bω') + (A+bω')'P + 2ᵐcP`.
    /// Equals −1 for an exact solve, since the right-hand side is `−I`.
    pub lyapunov_residual: f64,
    /// Smallest eigenvalue of `M·Q − I`.
    pub comparison_margin: f64,
}

pub struct Synthesis {
    pub k_final: Map,
    pub v_final: Map,
    pub m_const: f64,
    pub base: Option<BaseStepResult>,
    pub stages: Vec<DadsStage>,
    pub gains: DadsGains,
}

#[derive(Debug, Clone, Copy)]
pub struct SynthesisOptions {
    pub samples: usize,
    pub seed: u64,
    pub sample_box: SampleBox,
}

impl Default for SynthesisOptions {
    fn default() -> Self {
        SynthesisOptions {
            samples: 2000,
            seed: 11,
            sample_box: SampleBox::default(),
        }
    }
}

fn pow2(e: i32) -> f64 {
    2f64.powi(e)
}

fn min_order(maps: &[&Map]) -> usize {
    maps.iter()
        .map(|m| m.max_order())
        .min()
        .unwrap_or(usize::MAX)
}

fn sum_sq(v: &[Jet]) -> Jet {
    Jet::norm_sq(v)
}

fn draws(opts: &SynthesisOptions, n: usize, sys: &StrictFeedbackSystem, salt: u64) -> Vec<Sample> {
    opts.sample_box.draw_many(
        opts.seed.wrapping_add(salt),
        opts.samples,
        n,
        &sys.theta_set,
        sys.p,
        sys.l,
    )
}

fn tolerance(scale: f64) -> f64 {
    1e-9 * (1.0 + scale.abs())
}

fn record(
    level: usize,
    which: &str,
    samples: impl Iterator<Item = Result<(f64, f64, Vec<f64>), SynthesisError>>,
) -> Result<MajorantCheck, SynthesisError> {
    let mut worst = f64::INFINITY;
    let mut witness = Vec::new();
    for s in samples {
        let (margin, scale, point) = s?;
        if margin < -tolerance(scale) {
            return Err(SynthesisError::MajorantViolation {
                level,
                which: which.to_string(),
                witness: point,
                margin,
            });
        }
        if margin < worst {
            worst = margin;
            witness = point;
        }
    }
    Ok(MajorantCheck {
        which: which.to_string(),
        worst_margin: worst,
        witness,
    })
}

fn eval_row_terms(row: &Row, point: &[f64]) -> Result<(f64, Vec<f64>, Vec<f64>), JetError> {
    Ok((
        row.h.eval(point)?[0],
        row.phi.eval(point)?,
        row.alpha.eval(point)?,
    ))
}

// ---------------------------------------------------------------- base steps

/// `M(x₁, z)` of the scalar base step of a chain with `n` rows.
pub fn chain_base_gain(gains: &DadsGains, n: usize, r: Map, alpha: Map) -> Map {
    let (b, a, c) = (gains.b, gains.a, gains.c);
    let (kappa, lambda) = (gains.kappa.clone(), gains.lambda.clone());
    scalar_map("chain-base-gain", 2, move |u| {
        let (x1, z) = (&u[0], &u[1]);
        let ez = z.exp();
        let lam = &lambda
            .eval_jets(std::slice::from_ref(&ez))
            .expect("class-K map")[0];
        let kap = &kappa
            .eval_jets(std::slice::from_ref(&ez))
            .expect("class-K map")[0];
        let rv = &r.eval_jets(std::slice::from_ref(x1)).expect("majorant")[0];
        let al = alpha.eval_jets(std::slice::from_ref(x1)).expect("alpha");
        let first = &(lam + (b + 1.0)) * rv;
        let quad = &sum_sq(&al) + &(&rv.square() * &x1.square());
        let second = &(kap + 1.0) * &quad.scale(1.0 / (pow2(3 - n as i32) * a));
        &(&first + &second) + pow2(n as i32 - 2) * c
    })
}

/// Scalar base step `V₁ = ½x₁²`, `k₁ = −M/η₁·x₁` for a chain with `n` rows.
pub fn solve_base_chain(
    sys: &StrictFeedbackSystem,
    gains: &DadsGains,
    r: &Map,
    budget: usize,
    opts: &SynthesisOptions,
) -> Result<DadsStage, SynthesisError> {
    let n = sys.dim();
    let row = &sys.rows[0];
    let samples = draws(opts, 1, sys, 101);
    let check = record(
        1,
        "r",
        samples.iter().map(|s| {
            let (h, phi, _) = eval_row_terms(row, &s.x)?;
            let lhs = h.abs() + norm(&phi);
            let rhs = r.eval(&s.x)?[0] * s.x[0].abs();
            Ok((rhs - lhs, lhs, s.x.clone()))
        }),
    )?;
    let gain = chain_base_gain(gains, n, r.clone(), row.alpha.clone());
    let eta = row.eta.clone();
    let gain_k = gain.clone();
    let k: Map = Arc::new(Budgeted::new(
        "k1",
        2,
        budget,
        Box::new(move |u: &[Jet]| {
            let m = &gain_k.eval_jets(u)?[0];
            let e = &eta.eval_jets(&u[..1])?[0];
            Ok(vec![-(&(m / e) * &u[0])])
        }),
    ));
    let v: Map = Arc::new(Budgeted::new(
        "V1",
        2,
        budget,
        Box::new(|u: &[Jet]| Ok(vec![u[0].square().scale(0.5)])),
    ));
    let sigma: Map = Arc::new(Budgeted::new(
        "sigma1",
        2,
        usize::MAX,
        Box::new(|u: &[Jet]| Ok(vec![u[0].like(2.0)])),
    ));
    Ok(DadsStage {
        level: 1,
        dim: 1,
        v,
        k,
        gain,
        sigma,
        rate_c: pow2(n as i32 - 1) * gains.c,
        gain_a: pow2(1 - n as i32) * gains.a,
        majorants: Some(LevelMajorants {
            r: r.clone(),
            big_r: None,
            rho: None,
        }),
        checks: vec![check],
    })
}

/// Closed-loop matrix `A + bω'` of an integrator chain with feedback `ω`.
pub fn closed_loop_matrix(omega: &DVector<f64>) -> DMatrix<f64> {
    let n = omega.len();
    let mut a = DMatrix::zeros(n, n);
    for i in 0..n - 1 {
        a[(i, i + 1)] = 1.0;
    }
    for j in 0..n {
        a[(n - 1, j)] += omega[j];
    }
    a
}

/// Feedback placing the eigenvalues of `A + bω'` at `poles` (all real).
pub fn place_poles(poles: &[f64]) -> DVector<f64> {
    // coefficients of Π(s − p_i), lowest degree first, leading 1 implied
    let mut coef = vec![1.0];
    for &p in poles {
        let mut next = vec![0.0; coef.len() + 1];
        for (i, c) in coef.iter().enumerate() {
            next[i + 1] += c;
            next[i] -= p * c;
        }
        coef = next;
    }
    DVector::from_iterator(poles.len(), coef[..poles.len()].iter().map(|c| -c))
}

/// Solves `B'P + PB = −I` through its Kronecker form.
pub fn solve_lyapunov(b: &DMatrix<f64>) -> Result<DMatrix<f64>, SynthesisError> {
    let n = b.nrows();
    let eye = DMatrix::<f64>::identity(n, n);
    let bt = b.transpose();
    let sys = eye.kronecker(&bt) + bt.kronecker(&eye);
    let rhs = DVector::from_iterator(n * n, (-eye.clone()).iter().copied());
    let sol = sys
        .lu()
        .solve(&rhs)
        .ok_or_else(|| SynthesisError::Linear("singular Lyapunov system".into()))?;
    let p = DMatrix::from_column_slice(n, n, sol.as_slice());
    Ok((&p + p.transpose()) * 0.5)
}

/// Matrix of `x'Px + ½(y₁ − ω'x)²` in the variables `(x, y₁)`.
pub fn base_quadratic_form(p: &DMatrix<f64>, omega: &DVector<f64>) -> DMatrix<f64> {
    let n = p.nrows();
    let mut q = DMatrix::zeros(n + 1, n + 1);
    q.view_mut((0, 0), (n, n))
        .copy_from(&(p + omega * omega.transpose() * 0.5));
    for i in 0..n {
        q[(i, n)] = -0.5 * omega[i];
        q[(n, i)] = -0.5 * omega[i];
    }
    q[(n, n)] = 0.5;
    q
}

fn min_eig(m: &DMatrix<f64>) -> f64 {
    SymmetricEigen::new(m.clone()).eigenvalues.min()
}

fn max_eig(m: &DMatrix<f64>) -> f64 {
    SymmetricEigen::new(m.clone()).eigenvalues.max()
}

/// Linear algebra of the cascade base step: `P`, `ω`, `K` and `M`.
pub fn base_linear_algebra(n: usize, m: usize, c: f64) -> Result<BaseStepResult, SynthesisError> {
    if n == 0 || m == 0 {
        return Err(SynthesisError::InvalidGains(
            "cascade needs n, m ≥ 1".into(),
        ));
    }
    let shift = pow2(m as i32 - 1) * c;
    let poles: Vec<f64> = (0..n).map(|i| -(shift + 0.5 * (i as f64 + 1.0))).collect();
    let omega = place_poles(&poles);
    let acl = closed_loop_matrix(&omega);
    let shifted = &acl + DMatrix::identity(n, n) * shift;
    let p = solve_lyapunov(&shifted)?;
    if min_eig(&p) <= 0.0 {
        return Err(SynthesisError::Linear(
            "Lyapunov solution is not positive definite".into(),
        ));
    }
    let residual = &p * &acl + acl.transpose() * &p + &p * (2.0 * shift);
    let lyapunov_residual = max_eig(&residual);
    let mut a = DMatrix::zeros(n, n);
    for i in 0..n - 1 {
        a[(i, i + 1)] = 1.0;
    }
    let mut bvec = DVector::zeros(n);
    bvec[n - 1] = 1.0;
    let wb = omega.dot(&bvec);
    let row = bvec.transpose() * &p * 2.0 - omega.transpose() * &a - omega.transpose() * wb;
    let k_const = row.norm();
    let q = base_quadratic_form(&p, &omega);
    let m_raw = 1.0 / min_eig(&q);
    let m_const = (1.01 * m_raw).max(1.0);
    let comparison_margin = min_eig(&(&q * m_const - DMatrix::identity(n + 1, n + 1)));
    Ok(BaseStepResult {
        p,
        omega,
        k_const,
        m_raw,
        m_const,
        lyapunov_residual,
        comparison_margin,
    })
}

/// `G(x, y₁, z)` of the cascade base step.
fn cascade_base_gain(
    gains: &DadsGains,
    n: usize,
    m: usize,
    base: &BaseStepResult,
    r: Map,
    alpha: Map,
) -> Map {
    let (b, a, c) = (gains.b, gains.a, gains.c);
    let (kappa, lambda) = (gains.kappa.clone(), gains.lambda.clone());
    let big_m = base.m_const;
    let k_const = base.k_const;
    let wnorm = base.omega.norm();
    let wb = base.omega[n - 1].abs();
    scalar_map("cascade-base-gain", n + 2, move |u| {
        let xy = &u[..=n];
        let z = &u[n + 1];
        let ez = z.exp();
        let lam = &lambda
            .eval_jets(std::slice::from_ref(&ez))
            .expect("class-K map")[0];
        let kap = &kappa
            .eval_jets(std::slice::from_ref(&ez))
            .expect("class-K map")[0];
        let rv = &r.eval_jets(xy).expect("majorant")[0];
        let al = alpha.eval_jets(xy).expect("alpha");
        let blam = lam + (1.0 + b);
        let cross = (&(rv * &blam) * (1.0 + wnorm)) + k_const;
        let t1 = cross.square().scale(big_m / (pow2(m as i32 + 1) * c));
        let quad = &sum_sq(&al) + &(&rv.square() * &sum_sq(xy)).scale(2.0);
        let t2 = &(kap + 1.0) * &quad.scale(big_m / (pow2(3 - m as i32) * a));
        let t3 = rv * &blam;
        &(&(&t1 + &t2) + &t3) + (wb + pow2(m as i32 - 2) * c)
    })
}

/// Base step of a cascade with `n` integrators and `m` rows.
pub fn solve_base_cascade(
    sys: &StrictFeedbackSystem,
    n: usize,
    m: usize,
    gains: &DadsGains,
    r: &Map,
    budget: usize,
    opts: &SynthesisOptions,
) -> Result<(BaseStepResult, DadsStage), SynthesisError> {
    let base = base_linear_algebra(n, m, gains.c)?;
    let row = &sys.rows[n];
    let samples = draws(opts, n + 1, sys, 103);
    let check = record(
        1,
        "r",
        samples.iter().map(|s| {
            let (h, phi, _) = eval_row_terms(row, &s.x)?;
            let lhs = h.abs() + norm(&phi);
            let xs = norm(&s.x[..n]) + s.x[n].abs();
            let rhs = r.eval(&s.x)?[0] * xs;
            Ok((rhs - lhs, lhs, s.x.clone()))
        }),
    )?;
    let gain = cascade_base_gain(gains, n, m, &base, r.clone(), row.alpha.clone());
    let omega: Vec<f64> = base.omega.iter().copied().collect();
    let pmat = base.p.clone();
    let err = {
        let omega = omega.clone();
        move |u: &[Jet]| -> Jet {
            let mut e = u[n].clone();
            for (i, w) in omega.iter().enumerate() {
                e = &e - &u[i].scale(*w);
            }
            e
        }
    };
    let eta = row.eta.clone();
    let gain_k = gain.clone();
    let err_k = err.clone();
    let k: Map = Arc::new(Budgeted::new(
        "k1",
        n + 2,
        budget,
        Box::new(move |u: &[Jet]| {
            let g = &gain_k.eval_jets(u)?[0];
            let e = &eta.eval_jets(&u[..=n])?[0];
            Ok(vec![-(&(g / e) * &err_k(u))])
        }),
    ));
    let v: Map = Arc::new(Budgeted::new(
        "V1",
        n + 2,
        budget,
        Box::new(move |u: &[Jet]| {
            let mut acc = err(u).square().scale(0.5);
            for i in 0..n {
                for j in 0..n {
                    let pij = pmat[(i, j)];
                    if pij != 0.0 {
                        acc += &(&u[i] * &u[j]).scale(pij);
                    }
                }
            }
            Ok(vec![acc])
        }),
    ));
    let mc = base.m_const;
    let sigma: Map = Arc::new(Budgeted::new(
        "sigma1",
        n + 2,
        usize::MAX,
        Box::new(move |u: &[Jet]| Ok(vec![u[0].like(mc)])),
    ));
    let stage = DadsStage {
        level: 1,
        dim: n + 1,
        v,
        k,
        gain,
        sigma,
        rate_c: pow2(m as i32 - 1) * gains.c,
        gain_a: pow2(1 - m as i32) * gains.a / base.m_const,
        majorants: Some(LevelMajorants {
            r: r.clone(),
            big_r: None,
            rho: None,
        }),
        checks: vec![check],
    };
    Ok((base, stage))
}

// ---------------------------------------------------------------- maps

type JetFnResult = dyn Fn(&[Jet]) -> Result<Vec<Jet>, JetError> + Send + Sync;

/// Scalar closure map with a declared order budget.
struct Budgeted {
    name: String,
    arity: usize,
    max_order: usize,
    f: Box<JetFnResult>,
}

impl Budgeted {
    fn new(name: &str, arity: usize, max_order: usize, f: Box<JetFnResult>) -> Self {
        Budgeted {
            name: name.to_string(),
            arity,
            max_order,
            f,
        }
    }
}

impl SmoothMap for Budgeted {
    fn name(&self) -> &str {
        &self.name
    }
    fn arity(&self) -> usize {
        self.arity
    }
    fn max_order(&self) -> usize {
        self.max_order
    }
    fn eval_unchecked(&self, inputs: &[Jet]) -> Result<Vec<Jet>, JetError> {
        (self.f)(inputs)
    }
}

/// Everything one backstepping step reads. Inputs of the produced maps are
/// `(x_0..x_{n-1}, y, z)` where `n` is the previous stage's dimension.
struct StepData {
    n: usize,
    prev_v: Map,
    prev_k: Map,
    prev_sigma: Map,
    /// Rows `0..=n`; row `n` is the new one.
    rows: Vec<Row>,
    b: f64,
    gamma: f64,
    c: f64,
    a: f64,
    kappa: Map,
    lambda: Map,
    big_r: Map,
    r: Map,
    rho: Map,
}

impl StepData {
    /// `(M, s)` at the given jets.
    fn gain_and_error(&self, u: &[Jet]) -> Result<(Jet, Jet), JetError> {
        let n = self.n;
        let x = &u[..n];
        let xy = &u[..=n];
        let y = &u[n];
        let z = &u[n + 1];
        let mut xz = x.to_vec();
        xz.push(z.clone());

        let ev = LocalExpansion::new(self.prev_v.as_ref(), &xz)?;
        let ek = LocalExpansion::new(self.prev_k.as_ref(), &xz)?;
        let v = ev.value(0)?;
        let k = ek.value(0)?;
        let vz = ev.partial(0, n)?;
        let kz = ek.partial(0, n)?;
        let kx: Vec<Jet> = (0..n).map(|i| ek.partial(0, i)).collect::<Result<_, _>>()?;
        let kx2 = sum_sq(&kx);
        let s = y - &k;
        let s2 = s.square();

        let mu = &self.rows[n - 1].mu.eval_jets(x)?[0];
        let rho = &self.rho.eval_jets(xy)?[0];
        let r = &self.r.eval_jets(x)?[0];
        let big_r = &self.big_r.eval_jets(&xz)?[0];
        let sigma = &self.prev_sigma.eval_jets(&xz)?[0];
        let ez = z.exp();
        let emz = (-z).exp();
        let lam = &self.lambda.eval_jets(std::slice::from_ref(&ez))?[0];
        let kap = &self.kappa.eval_jets(std::slice::from_ref(&ez))?[0];
        let one_kap = kap + 1.0;

        let p = {
            let t1 = &(r + mu).scale(0.5) * &(&kx2 + 1.0);
            let inner = &(&(mu.scale(0.5)) * &(&kx2 + 3.0)) + &(rho + 1.0);
            &(&t1 + rho) + &(&inner * big_r)
        };

        // α' − (∂k/∂x)G, one entry per disturbance channel
        let alpha_new = self.rows[n].alpha.eval_jets(xy)?;
        let mut coupled = alpha_new;
        for (i, row) in self.rows[..n].iter().enumerate() {
            let ai = row.alpha.eval_jets(&u[..=i])?;
            for (cj, aij) in coupled.iter_mut().zip(&ai) {
                *cj = &*cj - &(&kx[i] * aij);
            }
        }
        let coupled2 = if coupled.is_empty() {
            y.zero_like()
        } else {
            sum_sq(&coupled)
        };

        let kz1 = &kz.square() + 1.0;
        let g_emz = emz.scale(self.gamma);
        let x2 = sum_sq(x);
        let (b, c, a) = (self.b, self.c, self.a);

        let mut m = y.like(c / 4.0);
        m += &(&(&g_emz.square() * &kz1.square()) * &v).scale(1.0 / (4.0 * c));
        m += &(&p * &(lam + b));
        m += &(&(&(&g_emz * &(&s2 + 1.0)).scale(0.25) + mu) * &kz1).scale(0.5);
        m += &(mu * &kx2).scale(0.5);
        m += rho;
        m += &(&(sigma * &p.square()) * &(lam + (b + 1.0)).square()).scale(1.0 / c);
        m += &(&one_kap * &coupled2).scale(1.0 / (4.0 * a));
        m += &(&(&one_kap * &p.square()) * &(&s2 + &x2)).scale(1.0 / (2.0 * a));
        m += &(&g_emz * &(&vz.square() + 1.0)).scale(0.25);
        Ok((m, s))
    }
}

struct StepGain(Arc<StepData>, usize);

impl SmoothMap for StepGain {
    fn name(&self) -> &str {
        "step-gain"
    }
    fn arity(&self) -> usize {
        self.0.n + 2
    }
    fn max_order(&self) -> usize {
        self.1
    }
    fn eval_unchecked(&self, u: &[Jet]) -> Result<Vec<Jet>, JetError> {
        Ok(vec![self.0.gain_and_error(u)?.0])
    }
}

struct StepK(Arc<StepData>, usize);

impl SmoothMap for StepK {
    fn name(&self) -> &str {
        "step-k"
    }
    fn arity(&self) -> usize {
        self.0.n + 2
    }
    fn max_order(&self) -> usize {
        self.1
    }
    fn eval_unchecked(&self, u: &[Jet]) -> Result<Vec<Jet>, JetError> {
        let d = &self.0;
        let (m, s) = d.gain_and_error(u)?;
        let eta = &d.rows[d.n].eta.eval_jets(&u[..=d.n])?[0];
        Ok(vec![-(&(&m / eta) * &s)])
    }
}

/// `V̄ = V(x, z) + ½(y − k(x, z))²`.
struct StepV {
    n: usize,
    prev_v: Map,
    prev_k: Map,
    max_order: usize,
}

impl SmoothMap for StepV {
    fn name(&self) -> &str {
        "step-V"
    }
    fn arity(&self) -> usize {
        self.n + 2
    }
    fn max_order(&self) -> usize {
        self.max_order
    }
    fn eval_unchecked(&self, u: &[Jet]) -> Result<Vec<Jet>, JetError> {
        let mut xz = u[..self.n].to_vec();
        xz.push(u[self.n + 1].clone());
        let v = &self.prev_v.eval_jets(&xz)?[0];
        let k = &self.prev_k.eval_jets(&xz)?[0];
        Ok(vec![v + &(&u[self.n] - k).square().scale(0.5)])
    }
}

/// Validates the majorants of one step on samples of `(x, y, z)`.
fn check_step_majorants(
    sys: &StrictFeedbackSystem,
    prev: &DadsStage,
    maj: &LevelMajorants,
    big_r: &Map,
    rho: &Map,
    level: usize,
    opts: &SynthesisOptions,
) -> Result<Vec<MajorantCheck>, SynthesisError> {
    let n = prev.dim;
    let samples = draws(opts, n + 1, sys, 1000 + level as u64);
    let zero_theta = vec![0.0; sys.p];
    let zero_d = vec![0.0; sys.l];

    let r_check = record(
        level,
        "r",
        samples.iter().map(|s| {
            let x = &s.x[..n];
            // f(x): inner rows with their successor, the last with the successor dropped
            let xj: Vec<Jet> = x.iter().map(|&v| Jet::constant(v, 1, 0)).collect();
            let mut f2 = 0.0;
            let th: Vec<Jet> = zero_theta.iter().map(|&t| Jet::constant(t, 1, 0)).collect();
            for i in 0..n {
                let next = if i + 1 < n {
                    xj[i + 1].clone()
                } else {
                    xj[0].like(0.0)
                };
                // θ = 0 and d = 0 leave h + g·next
                let fi = sys.row_rhs(&sys.rows[i], &xj[..=i], &next, &th, &zero_theta, &zero_d)?;
                f2 += fi.value().powi(2);
            }
            let lhs = f2.sqrt();
            let rhs = maj.r.eval(x)?[0] * norm(x);
            Ok((rhs - lhs, lhs, x.to_vec()))
        }),
    )?;

    let big_r_check = record(
        level,
        "R",
        samples.iter().map(|s| {
            let x = &s.x[..n];
            let mut xz = x.to_vec();
            xz.push(s.z);
            let vt = prev.v.taylor(&xz, 1)?.remove(0);
            let kt = prev.k.taylor(&xz, 1)?.remove(0);
            let vx = norm(&vt.gradient()[..n]);
            let kx = &kt.gradient()[..n];
            let mut kphi = vec![0.0; sys.p];
            for (i, row) in sys.rows[..n].iter().enumerate() {
                let phi = row.phi.eval(&x[..=i])?;
                for (acc, ph) in kphi.iter_mut().zip(&phi) {
                    *acc += kx[i] * ph;
                }
            }
            let lhs = vx + kt.value().abs() + norm(&kphi);
            let rhs = big_r.eval(&xz)?[0] * norm(x);
            Ok((rhs - lhs, lhs, xz))
        }),
    )?;

    let rho_check = record(
        level,
        "rho",
        samples.iter().map(|s| {
            let xy = &s.x[..=n];
            let (h, phi, _) = eval_row_terms(&sys.rows[n], xy)?;
            let lhs = h.abs() + norm(&phi);
            let rhs = rho.eval(xy)?[0] * (norm(&xy[..n]) + xy[n].abs());
            Ok((rhs - lhs, lhs, xy.to_vec()))
        }),
    )?;
    Ok(vec![r_check, big_r_check, rho_check])
}

/// One backstepping step adding state row `prev.dim`.
pub fn backstep(
    sys: &StrictFeedbackSystem,
    prev: &DadsStage,
    gains: &DadsGains,
    maj: &LevelMajorants,
    opts: &SynthesisOptions,
) -> Result<DadsStage, SynthesisError> {
    let n = prev.dim;
    let level = prev.level + 1;
    let big_r = maj
        .big_r
        .clone()
        .ok_or(SynthesisError::MissingMajorants { level })?;
    let rho = maj
        .rho
        .clone()
        .ok_or(SynthesisError::MissingMajorants { level })?;
    for i in 0..n.saturating_sub(1) {
        if !sys.gain_is_theta_free(i, 16, opts.seed)? {
            return Err(SynthesisError::ThetaDependentGain { row: i + 1 });
        }
    }
    let checks = check_step_majorants(sys, prev, maj, &big_r, &rho, level, opts)?;

    let rows = sys.rows[..=n].to_vec();
    let user_order = {
        let mut maps: Vec<&Map> = vec![
            &big_r,
            &rho,
            &maj.r,
            &prev.sigma,
            &gains.kappa,
            &gains.lambda,
        ];
        for r in &rows {
            maps.extend([&r.mu, &r.eta, &r.alpha]);
        }
        min_order(&maps)
    };
    let prev_budget = prev.k.max_order().min(prev.v.max_order());
    if prev_budget == 0 {
        return Err(SynthesisError::OrderExhausted { level });
    }
    let k_order = (prev_budget - 1).min(user_order);
    let data = Arc::new(StepData {
        n,
        prev_v: prev.v.clone(),
        prev_k: prev.k.clone(),
        prev_sigma: prev.sigma.clone(),
        rows,
        b: gains.b,
        gamma: gains.gamma,
        c: prev.rate_c,
        a: prev.gain_a,
        kappa: gains.kappa.clone(),
        lambda: gains.lambda.clone(),
        big_r: big_r.clone(),
        r: maj.r.clone(),
        rho,
    });
    let k: Map = Arc::new(StepK(data.clone(), k_order));
    let gain: Map = Arc::new(StepGain(data, k_order));
    let v: Map = Arc::new(StepV {
        n,
        prev_v: prev.v.clone(),
        prev_k: prev.k.clone(),
        max_order: prev_budget,
    });
    let prev_sigma = prev.sigma.clone();
    let sigma_r = big_r;
    let sigma: Map = Arc::new(Budgeted::new(
        "sigma",
        n + 2,
        usize::MAX,
        Box::new(move |u: &[Jet]| {
            let mut xz = u[..n].to_vec();
            xz.push(u[n + 1].clone());
            let r = &sigma_r.eval_jets(&xz)?[0];
            let s = &prev_sigma.eval_jets(&xz)?[0];
            Ok(vec![&(&(&r.square().scale(2.0) + 1.0) * s) + 4.0])
        }),
    ));
    Ok(DadsStage {
        level,
        dim: n + 1,
        v,
        k,
        gain,
        sigma,
        rate_c: prev.rate_c / 2.0,
        gain_a: prev.gain_a * 2.0,
        majorants: Some(maj.clone()),
        checks,
    })
}

/// Full synthesis: base step followed by one backstep per remaining row.
pub fn synthesize(
    sys: &StrictFeedbackSystem,
    gains: &DadsGains,
    pack: &MajorantPack,
    opts: &SynthesisOptions,
) -> Result<Synthesis, SynthesisError> {
    gains.validate()?;
    let n_stages = match sys.structure {
        Structure::Pure => sys.dim(),
        Structure::Cascade { m, .. } => m,
    };
    let level_maj = |level: usize| -> Result<&LevelMajorants, SynthesisError> {
        pack.levels
            .get(level - 1)
            .ok_or(SynthesisError::MissingMajorants { level })
    };
    let budget = n_stages;
    let (base, mut stage, m_const) = match sys.structure {
        Structure::Pure => {
            let st = solve_base_chain(sys, gains, &level_maj(1)?.r, budget, opts)?;
            (None, st, 2.0)
        }
        Structure::Cascade { n, m } => {
            let (b, st) = solve_base_cascade(sys, n, m, gains, &level_maj(1)?.r, budget, opts)?;
            let mc = b.m_const;
            (Some(b), st, mc)
        }
    };
    let mut stages = vec![stage.clone()];
    for level in 2..=n_stages {
        stage = backstep(sys, &stage, gains, level_maj(level)?, opts)?;
        stages.push(stage.clone());
    }
    Ok(Synthesis {
        k_final: stage.k.clone(),
        v_final: stage.v.clone(),
        m_const,
        base,
        stages,
        gains: gains.clone(),
    })
}

// ---------------------------------------------------------------- certificates

/// Margin of one stage's dissipation inequality at a sample (`≥ 0` means it holds).
/// Returns `None` inside the deadzone kink band.
pub fn stage_margin(
    sys: &StrictFeedbackSystem,
    stage: &DadsStage,
    gains: &DadsGains,
    sample: &Sample,
) -> Result<Option<f64>, SynthesisError> {
    let n = stage.dim;
    let x = &sample.x[..n];
    let mut xz = x.to_vec();
    xz.push(sample.z);
    let vt = stage.v.taylor(&xz, 1)?.remove(0);
    let v = vt.value();
    if (v - gains.eps_dz).abs() < 1e-9 {
        return Ok(None);
    }
    let grad = vt.gradient();
    let k = stage.k.eval(&xz)?[0];
    let c0 = |t: f64| Jet::constant(t, 1, 0);
    let xj: Vec<Jet> = x.iter().map(|&t| c0(t)).collect();
    let th: Vec<Jet> = sample.theta.iter().map(|&t| c0(t)).collect();
    let mut lhs = 0.0;
    for i in 0..n {
        let next = if i + 1 < n { xj[i + 1].clone() } else { c0(k) };
        let rhs_i = sys.row_rhs(
            &sys.rows[i],
            &xj[..=i],
            &next,
            &th,
            &sample.theta,
            &sample.d,
        )?;
        lhs += grad[i] * rhs_i.value();
    }
    lhs += grad[n] * gains.gamma * (-sample.z).exp() * (v - gains.eps_dz).max(0.0);
    let rhs = -stage.rate_c * v
        + stage.gain_a * gains.disturbance_term(sample.z, &sample.theta, &sample.d)?;
    Ok(Some(rhs - lhs))
}

/// Worst sampled margin of a stage certificate together with its witness.
#[derive(Debug, Clone, PartialEq)]
pub struct CertificateResult {
    pub level: usize,
    pub n_samples: usize,
    pub skipped: usize,
    pub worst_margin: f64,
    pub witness: Option<Sample>,
}

pub fn certify_stage(
    sys: &StrictFeedbackSystem,
    stage: &DadsStage,
    gains: &DadsGains,
    samples: &[Sample],
) -> Result<CertificateResult, SynthesisError> {
    use rayon::prelude::*;
    let margins: Vec<Option<f64>> = samples
        .par_iter()
        .map(|s| stage_margin(sys, stage, gains, s))
        .collect::<Result<_, _>>()?;
    let mut worst = f64::INFINITY;
    let mut witness = None;
    let mut skipped = 0;
    for (m, s) in margins.iter().zip(samples) {
        match m {
            None => skipped += 1,
            Some(m) if *m < worst => {
                worst = *m;
                witness = Some(s.clone());
            }
            _ => {}
        }
    }
    Ok(CertificateResult {
        level: stage.level,
        n_samples: samples.len(),
        skipped,
        worst_margin: worst,
        witness,
    })
}

/// Worst sampled value of `σ·V − |state|²` for a stage.
pub fn comparison_margin(stage: &DadsStage, samples: &[Sample]) -> Result<f64, SynthesisError> {
    let mut worst = f64::INFINITY;
    for s in samples {
        let mut xz = s.x[..stage.dim].to_vec();
        xz.push(s.z);
        let v = stage.v.eval(&xz)?[0];
        let sig = stage.sigma.eval(&xz)?[0];
        worst = worst.min(sig * v - norm(&s.x[..stage.dim]).powi(2));
    }
    Ok(worst)
}

impl Synthesis {
    /// Plain-text trace of every stage.
    pub fn report(&self) -> String {
        let mut out = String::new();
        let g = &self.gains;
        out.push_str(&format!(
            "gains: b={} gamma={} eps_dz={} c={} a={} kappa={} lambda={}\n",
            g.b,
            g.gamma,
            g.eps_dz,
            g.c,
            g.a,
            g.kappa.name(),
            g.lambda.name()
        ));
        out.push_str(&format!("M_const={}\n", self.m_const));
        if let Some(b) = &self.base {
            out.push_str(&format!(
                "base: omega={:?} K={} M_raw={} lyapunov_residual={:e} comparison_margin={:e}\n",
                b.omega.as_slice(),
                b.k_const,
                b.m_raw,
                b.lyapunov_residual,
                b.comparison_margin
            ));
        }
        for s in &self.stages {
            out.push_str(&format!(
                "stage {}: dim={} rate_c={} gain_a={} k_order={}\n",
                s.level,
                s.dim,
                s.rate_c,
                s.gain_a,
                s.k.max_order()
            ));
            for c in &s.checks {
                out.push_str(&format!(
                    "  majorant {}: worst_margin={:e} at {:?}\n",
                    c.which, c.worst_margin, c.witness
                ));
            }
        }
        out
    }
}

// ---------------------------------------------------------------- wing-rock pack

/// Level-3 majorant `R(x₁, x₂, z) = C(1+e^z)^p(1+e^{-z})^q(1+|x|²)^s` with the
/// constants `[C, p, q, s]` fitted on the default sampling box.
/// A dense grid scan of the required ratio peaks at about 0.45·C near `z = 3`.
pub const WINGROCK_R3: [f64; 4] = [2.0e4, 6.5, 1.0, 10.5];

/// Hand-derived majorants for the wing-rock chain under `gains`. Level 2 uses
/// `R = 1 + M₁` (since `∂V₁/∂x₁ = x₁` and `k₁ = −M₁x₁`) and
/// `ρ = √(1+x₂²)` (since `|φ₂| = |(x₁,x₂)|√(1+x₂²)`).
pub fn wingrock_majorants(gains: &DadsGains, r3: [f64; 4]) -> MajorantPack {
    let one1 = scalar_map("one", 1, |u| u[0].like(1.0));
    let base_gain = chain_base_gain(
        gains,
        3,
        one1.clone(),
        crate::system::wingrock().rows[0].alpha.clone(),
    );
    let r2_big = scalar_map("R2", 2, move |u| {
        &base_gain.eval_jets(u).expect("base gain")[0] + 1.0
    });
    let rho2 = scalar_map("rho2", 2, |u| (&u[1].square() + 1.0).sqrt());
    let [cst, p, q, s] = r3;
    let r3_big = scalar_map("R3", 3, move |u| {
        let ez = u[2].exp();
        let emz = (-&u[2]).exp();
        let xx = &(&u[0].square() + &u[1].square()) + 1.0;
        let f = &(&(&ez + 1.0).powf(p) * &(&emz + 1.0).powf(q)) * &xx.powf(s);
        f.scale(cst)
    });
    MajorantPack {
        levels: vec![
            LevelMajorants {
                r: one1.clone(),
                big_r: None,
                rho: None,
            },
            LevelMajorants {
                r: one1,
                big_r: Some(r2_big),
                rho: Some(rho2),
            },
            LevelMajorants {
                r: scalar_map("one", 2, |u| u[0].like(1.0)),
                big_r: Some(r3_big),
                rho: Some(scalar_map("rho3", 3, |u| u[0].like(1.0))),
            },
        ],
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::jets::constant_map;
    use crate::system::wingrock;

    #[test]
    fn scalar_cascade_base() {
        let b = base_linear_algebra(1, 1, 0.5).unwrap();
        assert!((b.p[(0, 0)] - 1.0).abs() < 1e-12);
        assert!((b.omega[0] + 1.0).abs() < 1e-12);
        // 2ωP = −2 ≤ −2·0.5·P
        assert!(2.0 * b.omega[0] * b.p[(0, 0)] <= -1.0);
        assert!(b.lyapunov_residual <= 1e-9);
        let q = base_quadratic_form(&b.p, &b.omega);
        assert!(
            (q[(0, 0)] - 1.5).abs() < 1e-12
                && (q[(0, 1)] - 0.5).abs() < 1e-12
                && (q[(1, 1)] - 0.5).abs() < 1e-12
        );
        let lam = (2.0 - 2f64.sqrt()) / 2.0;
        assert!((b.m_raw - 1.0 / lam).abs() < 1e-9);
        assert!((b.m_raw - (2.0 + 2f64.sqrt())).abs() < 1e-9);
        assert!(b.comparison_margin >= -1e-9);
        assert!((b.k_const - 1.0).abs() < 1e-12);
    }

    #[test]
    fn larger_cascades_satisfy_matrix_inequality() {
        for n in 1..5 {
            for m in 1..4 {
                let b = base_linear_algebra(n, m, 0.7).unwrap();
                assert!(b.lyapunov_residual <= 1e-9, "n={n} m={m}");
                assert!(b.comparison_margin >= -1e-9);
                assert!(min_eig(&b.p) > 0.0);
                assert!((&b.p - b.p.transpose()).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn pole_placement_matches_characteristic_polynomial() {
        let omega = place_poles(&[-1.0, -2.0, -3.0]);
        let a = closed_loop_matrix(&omega);
        let mut eig: Vec<f64> = a.complex_eigenvalues().iter().map(|c| c.re).collect();
        eig.sort_by(|x, y| x.partial_cmp(y).unwrap());
        for (e, p) in eig.iter().zip([-3.0, -2.0, -1.0]) {
            assert!((e - p).abs() < 1e-8);
        }
    }

    #[test]
    fn chain_base_gain_termwise() {
        let g = DadsGains::wingrock();
        let r = constant_map("r", 1, 1.0);
        let alpha = wingrock().rows[0].alpha.clone();
        let m = chain_base_gain(&g, 3, r, alpha);
        // (b+1+λ(1))·r + (1+κ(1))/(2⁰·a)·(|α|² + r²x²) + 2c at x₁ = 0, z = 0
        let oracle = (1.0 + 1.0 + 1.0) * 1.0 + 2.0 / 2.0 * 0.0 + 2.0 * 0.5;
        assert!((m.eval(&[0.0, 0.0]).unwrap()[0] - oracle).abs() < 1e-12);
        let x = 0.7;
        let z: f64 = -0.4;
        let ez = z.exp();
        let oracle = (2.0 + ez) + (1.0 + ez) / 2.0 * x * x + 1.0;
        assert!((m.eval(&[x, z]).unwrap()[0] - oracle).abs() < 1e-12);
    }

    #[test]
    fn sigma_recursion_example() {
        // σ̄ with R ≡ 1, σ ≡ 2 → 10
        let r = 1.0f64;
        assert_eq!((1.0 + 2.0 * r * r) * 2.0 + 4.0, 10.0);
    }
}
