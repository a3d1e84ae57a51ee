//! Truncated multivariate Taylor arithmetic ("jets").
//!
//! A [`Jet`] stores the Taylor coefficients of a scalar quantity up to a
//! fixed total degree in `n_vars` variables. Coefficients are laid out densely
//! in graded lexicographic order: all degree-0 terms, then degree 1 with the
//! first variable leading, and so on. For two variables and order 2 the
//! layout is `(), (1,0), (0,1), (2,0), (1,1), (0,2)`.
//!
//! Coefficients are Taylor coefficients, not raw derivatives: the entry for
//! multi-index `α` equals `∂^α f / α!`.
//!
//! [`SmoothMap`] is the unit of composition used by the synthesis engine. A map
//! consumes jets and produces jets, so nested differentiation (derivatives of
//! a feedback law that itself contains derivatives) reduces to evaluating the
//! inner map one order higher and re-expanding around the caller's jets, see
//! [`LocalExpansion`].

use std::collections::HashMap;
use std::fmt;
use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub};
use std::sync::{Arc, Mutex, OnceLock};

use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum JetError {
    #[error("variable index {var} out of range for {n_vars} variables")]
    VarOutOfRange { var: usize, n_vars: usize },
    #[error("jet shape mismatch: ({0}, {1}) vs ({2}, {3}) as (order, n_vars)")]
    ShapeMismatch(usize, usize, usize, usize),
    #[error("map `{name}` expects {expected} inputs, got {got}")]
    ArityMismatch {
        name: String,
        expected: usize,
        got: usize,
    },
    #[error("map `{name}` evaluated at order {requested} but declares max order {max}")]
    MaxOrderExceeded {
        name: String,
        requested: usize,
        max: usize,
    },
    #[error("cannot compose: polynomial order {poly} is below the requested order {needed}")]
    CompositionOrder { poly: usize, needed: usize },
    #[error("{0}")]
    Domain(String),
}

/// Index tables shared by all jets with the same `(n_vars, order)`.
pub(crate) struct Layout {
    n_vars: usize,
    order: usize,
    exps: Vec<Vec<u16>>,
    degree: Vec<usize>,
    index: HashMap<Vec<u16>, usize>,
    /// `(i, j, k)` with `exps[i] + exps[j] == exps[k]`.
    products: Vec<(u32, u32, u32)>,
}

fn binomial(n: usize, k: usize) -> usize {
    let k = k.min(n - k);
    (0..k).fold(1usize, |acc, i| acc * (n - i) / (i + 1))
}

fn push_degree(n_vars: usize, degree: usize, prefix: &mut Vec<u16>, out: &mut Vec<Vec<u16>>) {
    if prefix.len() + 1 == n_vars {
        let mut e = prefix.clone();
        e.push(degree as u16);
        out.push(e);
        return;
    }
    for first in (0..=degree).rev() {
        prefix.push(first as u16);
        push_degree(n_vars, degree - first, prefix, out);
        prefix.pop();
    }
}

impl Layout {
    fn build(n_vars: usize, order: usize) -> Layout {
        let mut exps = Vec::with_capacity(binomial(n_vars + order, order));
        for d in 0..=order {
            push_degree(n_vars, d, &mut Vec::with_capacity(n_vars), &mut exps);
        }
        let degree: Vec<usize> = exps
            .iter()
            .map(|e| e.iter().map(|&v| v as usize).sum())
            .collect();
        let index: HashMap<Vec<u16>, usize> = exps
            .iter()
            .enumerate()
            .map(|(i, e)| (e.clone(), i))
            .collect();
        let mut products = Vec::new();
        let mut sum = vec![0u16; n_vars];
        for i in 0..exps.len() {
            for j in 0..exps.len() {
                if degree[i] + degree[j] > order {
                    continue;
                }
                for v in 0..n_vars {
                    sum[v] = exps[i][v] + exps[j][v];
                }
                products.push((i as u32, j as u32, index[&sum] as u32));
            }
        }
        Layout {
            n_vars,
            order,
            exps,
            degree,
            index,
            products,
        }
    }

    pub(crate) fn get(n_vars: usize, order: usize) -> Arc<Layout> {
        type Cache = Mutex<HashMap<(usize, usize), Arc<Layout>>>;
        static CACHE: OnceLock<Cache> = OnceLock::new();
        let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
        let mut guard = cache.lock().unwrap_or_else(|e| e.into_inner());
        guard
            .entry((n_vars, order))
            .or_insert_with(|| Arc::new(Layout::build(n_vars, order)))
            .clone()
    }

    fn len(&self) -> usize {
        self.exps.len()
    }
}

/// Truncated Taylor polynomial in `n_vars` variables up to total degree `order`.
#[derive(Clone)]
pub struct Jet {
    layout: Arc<Layout>,
    coeffs: Vec<f64>,
}

impl fmt::Debug for Jet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut m = f.debug_map();
        for (e, c) in self.layout.exps.iter().zip(&self.coeffs) {
            m.entry(e, c);
        }
        m.finish()
    }
}

impl PartialEq for Jet {
    fn eq(&self, other: &Self) -> bool {
        self.same_shape(other) && self.coeffs == other.coeffs
    }
}

impl Jet {
    /// Constant jet.
    pub fn constant(value: f64, n_vars: usize, order: usize) -> Jet {
        assert!(n_vars > 0, "jets need at least one variable");
        let layout = Layout::get(n_vars, order);
        let mut coeffs = vec![0.0; layout.len()];
        coeffs[0] = value;
        Jet { layout, coeffs }
    }

    /// The coordinate function `x_var` expanded around `value`.
    pub fn lift(value: f64, var: usize, n_vars: usize, order: usize) -> Result<Jet, JetError> {
        if var >= n_vars {
            return Err(JetError::VarOutOfRange { var, n_vars });
        }
        let mut j = Jet::constant(value, n_vars, order);
        if order >= 1 {
            j.coeffs[1 + var] = 1.0;
        }
        Ok(j)
    }

    /// Coordinate jets for every component of `point`.
    pub fn lift_point(point: &[f64], order: usize) -> Vec<Jet> {
        let n = point.len();
        point
            .iter()
            .enumerate()
            .map(|(i, &v)| Jet::lift(v, i, n, order).expect("index in range"))
            .collect()
    }

    /// Builds a jet from raw coefficients in graded lexicographic order.
    pub fn from_coeffs(n_vars: usize, order: usize, coeffs: Vec<f64>) -> Result<Jet, JetError> {
        let layout = Layout::get(n_vars, order);
        if coeffs.len() != layout.len() {
            return Err(JetError::Domain(format!(
                "expected {} coefficients, got {}",
                layout.len(),
                coeffs.len()
            )));
        }
        Ok(Jet { layout, coeffs })
    }

    pub fn order(&self) -> usize {
        self.layout.order
    }

    pub fn n_vars(&self) -> usize {
        self.layout.n_vars
    }

    pub fn value(&self) -> f64 {
        self.coeffs[0]
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    /// Exponent vectors matching [`Jet::coeffs`].
    pub fn multi_indices(&self) -> &[Vec<u16>] {
        &self.layout.exps
    }

    /// Coefficient of the monomial with exponents `exps` (zero when truncated away).
    pub fn coeff(&self, exps: &[u16]) -> f64 {
        self.layout
            .index
            .get(exps)
            .map(|&i| self.coeffs[i])
            .unwrap_or(0.0)
    }

    /// First-order partial derivative with respect to `var`.
    pub fn partial(&self, var: usize) -> f64 {
        if self.order() == 0 || var >= self.n_vars() {
            0.0
        } else {
            self.coeffs[1 + var]
        }
    }

    pub fn gradient(&self) -> Vec<f64> {
        (0..self.n_vars()).map(|v| self.partial(v)).collect()
    }

    pub fn same_shape(&self, other: &Jet) -> bool {
        Arc::ptr_eq(&self.layout, &other.layout)
            || (self.order() == other.order() && self.n_vars() == other.n_vars())
    }

    fn check_shape(&self, other: &Jet) -> Result<(), JetError> {
        if self.same_shape(other) {
            Ok(())
        } else {
            Err(JetError::ShapeMismatch(
                self.order(),
                self.n_vars(),
                other.order(),
                other.n_vars(),
            ))
        }
    }

    /// A constant jet with the same shape as `self`.
    pub fn like(&self, value: f64) -> Jet {
        let mut coeffs = vec![0.0; self.coeffs.len()];
        coeffs[0] = value;
        Jet {
            layout: self.layout.clone(),
            coeffs,
        }
    }

    pub fn zero_like(&self) -> Jet {
        self.like(0.0)
    }

    pub fn checked_add(&self, other: &Jet) -> Result<Jet, JetError> {
        self.check_shape(other)?;
        let coeffs = self
            .coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(a, b)| a + b)
            .collect();
        Ok(Jet {
            layout: self.layout.clone(),
            coeffs,
        })
    }

    pub fn checked_sub(&self, other: &Jet) -> Result<Jet, JetError> {
        self.check_shape(other)?;
        let coeffs = self
            .coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(a, b)| a - b)
            .collect();
        Ok(Jet {
            layout: self.layout.clone(),
            coeffs,
        })
    }

    /// Truncated product: the coefficient of `γ` is `Σ_{α+β=γ} a_α b_β`.
    pub fn checked_mul(&self, other: &Jet) -> Result<Jet, JetError> {
        self.check_shape(other)?;
        let mut coeffs = vec![0.0; self.coeffs.len()];
        if self.order() == 0 {
            coeffs[0] = self.coeffs[0] * other.coeffs[0];
        } else {
            for &(i, j, k) in &self.layout.products {
                coeffs[k as usize] += self.coeffs[i as usize] * other.coeffs[j as usize];
            }
        }
        Ok(Jet {
            layout: self.layout.clone(),
            coeffs,
        })
    }

    pub fn checked_div(&self, other: &Jet) -> Result<Jet, JetError> {
        self.checked_mul(&other.recip())
    }

    pub fn scale(&self, s: f64) -> Jet {
        Jet {
            layout: self.layout.clone(),
            coeffs: self.coeffs.iter().map(|c| c * s).collect(),
        }
    }

    pub fn add_scalar(&self, s: f64) -> Jet {
        let mut out = self.clone();
        out.coeffs[0] += s;
        out
    }

    pub fn square(&self) -> Jet {
        self * self
    }

    /// `Σ_k t_k (a - a₀)^k` where `t_k = f⁽ᵏ⁾(a₀)/k!`.
    pub fn compose_univariate(&self, taylor: &[f64]) -> Jet {
        let mut delta = self.clone();
        delta.coeffs[0] = 0.0;
        let mut out = self.like(taylor.first().copied().unwrap_or(0.0));
        let mut power = self.like(1.0);
        for t in taylor.iter().take(self.order() + 1).skip(1) {
            power = &power * &delta;
            if *t != 0.0 {
                for (o, p) in out.coeffs.iter_mut().zip(&power.coeffs) {
                    *o += t * p;
                }
            }
        }
        out
    }

    pub fn exp(&self) -> Jet {
        let e = self.value().exp();
        let mut t = Vec::with_capacity(self.order() + 1);
        let mut fact = 1.0;
        for k in 0..=self.order() {
            if k > 0 {
                fact *= k as f64;
            }
            t.push(e / fact);
        }
        self.compose_univariate(&t)
    }

    /// Natural logarithm, valid for positive value.
    pub fn ln(&self) -> Jet {
        let a = self.value();
        let mut t = vec![a.ln()];
        for k in 1..=self.order() {
            let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
            t.push(sign / (k as f64 * a.powi(k as i32)));
        }
        self.compose_univariate(&t)
    }

    pub fn recip(&self) -> Jet {
        let a = self.value();
        let t: Vec<f64> = (0..=self.order())
            .map(|k| {
                let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
                sign / a.powi(k as i32 + 1)
            })
            .collect();
        self.compose_univariate(&t)
    }

    /// Real power `a^p` via the generalized binomial series; needs positive value
    /// unless `p` is a non-negative integer.
    pub fn powf(&self, p: f64) -> Jet {
        let a = self.value();
        let mut t = Vec::with_capacity(self.order() + 1);
        let mut binom = 1.0;
        for k in 0..=self.order() {
            if k > 0 {
                binom *= (p - (k as f64 - 1.0)) / k as f64;
            }
            t.push(binom * a.powf(p - k as f64));
        }
        self.compose_univariate(&t)
    }

    pub fn pow_int(&self, p: i32) -> Jet {
        if p >= 0 {
            let mut out = self.like(1.0);
            for _ in 0..p {
                out = &out * self;
            }
            out
        } else {
            self.pow_int(-p).recip()
        }
    }

    pub fn sqrt(&self) -> Jet {
        self.powf(0.5)
    }

    pub fn sin(&self) -> Jet {
        let (s, c) = self.value().sin_cos();
        let cycle = [s, c, -s, -c];
        let mut fact = 1.0;
        let t: Vec<f64> = (0..=self.order())
            .map(|k| {
                if k > 0 {
                    fact *= k as f64;
                }
                cycle[k % 4] / fact
            })
            .collect();
        self.compose_univariate(&t)
    }

    pub fn cos(&self) -> Jet {
        let (s, c) = self.value().sin_cos();
        let cycle = [c, -s, -c, s];
        let mut fact = 1.0;
        let t: Vec<f64> = (0..=self.order())
            .map(|k| {
                if k > 0 {
                    fact *= k as f64;
                }
                cycle[k % 4] / fact
            })
            .collect();
        self.compose_univariate(&t)
    }

    /// Positive part `max(a, 0)`. At exactly zero the left limit (zero jet) is used.
    pub fn relu_plus(&self) -> Jet {
        if self.value() > 0.0 {
            self.clone()
        } else {
            self.zero_like()
        }
    }

    /// Partial derivative as a jet of one lower order.
    pub fn derivative(&self, var: usize) -> Result<Jet, JetError> {
        if var >= self.n_vars() {
            return Err(JetError::VarOutOfRange {
                var,
                n_vars: self.n_vars(),
            });
        }
        if self.order() == 0 {
            return Err(JetError::Domain(
                "cannot differentiate an order-0 jet".into(),
            ));
        }
        let target = Layout::get(self.n_vars(), self.order() - 1);
        let mut coeffs = vec![0.0; target.len()];
        let mut shifted = vec![0u16; self.n_vars()];
        for (k, e) in target.exps.iter().enumerate() {
            shifted.copy_from_slice(e);
            shifted[var] += 1;
            let src = self.layout.index[&shifted];
            coeffs[k] = (shifted[var] as f64) * self.coeffs[src];
        }
        Ok(Jet {
            layout: target,
            coeffs,
        })
    }

    /// Drops every term above `order`.
    pub fn truncate(&self, order: usize) -> Jet {
        if order >= self.order() {
            return self.clone();
        }
        let target = Layout::get(self.n_vars(), order);
        let coeffs = self.coeffs[..target.len()].to_vec();
        Jet {
            layout: target,
            coeffs,
        }
    }

    /// Treats `self` as a polynomial in displacements `(u₁ - u₁₀, …)` and substitutes
    /// `inner[i] - inner[i].value()` for each displacement. The result lives in the
    /// variables of `inner` and has their order; `self` must be at least that order.
    pub fn compose(&self, inner: &[Jet]) -> Result<Jet, JetError> {
        if inner.len() != self.n_vars() {
            return Err(JetError::ArityMismatch {
                name: "polynomial".into(),
                expected: self.n_vars(),
                got: inner.len(),
            });
        }
        let first = &inner[0];
        for j in &inner[1..] {
            first.check_shape(j)?;
        }
        let q = first.order();
        if self.order() < q {
            return Err(JetError::CompositionOrder {
                poly: self.order(),
                needed: q,
            });
        }
        let deltas: Vec<Jet> = inner
            .iter()
            .map(|j| {
                let mut d = j.clone();
                d.coeffs[0] = 0.0;
                d
            })
            .collect();
        // powers[i][k] = delta_i^k
        let mut powers: Vec<Vec<Jet>> = Vec::with_capacity(deltas.len());
        for d in &deltas {
            let mut p = vec![first.like(1.0)];
            for k in 1..=q {
                let next = &p[k - 1] * d;
                p.push(next);
            }
            powers.push(p);
        }
        let mut out = first.zero_like();
        for (idx, e) in self.layout.exps.iter().enumerate() {
            let c = self.coeffs[idx];
            if c == 0.0 || self.layout.degree[idx] > q {
                continue;
            }
            let mut term: Option<Jet> = None;
            for (v, &ev) in e.iter().enumerate() {
                if ev == 0 {
                    continue;
                }
                let p = &powers[v][ev as usize];
                term = Some(match term {
                    None => p.clone(),
                    Some(t) => &t * p,
                });
            }
            match term {
                None => out.coeffs[0] += c,
                Some(t) => {
                    for (o, tc) in out.coeffs.iter_mut().zip(&t.coeffs) {
                        *o += c * tc;
                    }
                }
            }
        }
        Ok(out)
    }

    /// Sum of squares of a slice of jets (smooth `|v|²`).
    pub fn norm_sq(v: &[Jet]) -> Jet {
        let mut it = v.iter();
        let first = it.next().expect("non-empty vector");
        let mut acc = first.square();
        for j in it {
            acc += &j.square();
        }
        acc
    }

    /// Inner product of two jet vectors.
    pub fn dot(a: &[Jet], b: &[Jet]) -> Jet {
        assert_eq!(a.len(), b.len());
        let mut acc = &a[0] * &b[0];
        for (x, y) in a.iter().zip(b).skip(1) {
            acc += &(x * y);
        }
        acc
    }
}

macro_rules! binop {
    ($trait:ident, $method:ident, $checked:ident) => {
        impl $trait<&Jet> for &Jet {
            type Output = Jet;
            fn $method(self, rhs: &Jet) -> Jet {
                self.$checked(rhs).expect("jet shape mismatch")
            }
        }
        impl $trait<Jet> for Jet {
            type Output = Jet;
            fn $method(self, rhs: Jet) -> Jet {
                (&self).$checked(&rhs).expect("jet shape mismatch")
            }
        }
        impl $trait<&Jet> for Jet {
            type Output = Jet;
            fn $method(self, rhs: &Jet) -> Jet {
                (&self).$checked(rhs).expect("jet shape mismatch")
            }
        }
        impl $trait<Jet> for &Jet {
            type Output = Jet;
            fn $method(self, rhs: Jet) -> Jet {
                self.$checked(&rhs).expect("jet shape mismatch")
            }
        }
    };
}

binop!(Add, add, checked_add);
binop!(Sub, sub, checked_sub);
binop!(Mul, mul, checked_mul);
binop!(Div, div, checked_div);

impl Add<f64> for &Jet {
    type Output = Jet;
    fn add(self, rhs: f64) -> Jet {
        self.add_scalar(rhs)
    }
}

impl Add<f64> for Jet {
    type Output = Jet;
    fn add(self, rhs: f64) -> Jet {
        self.add_scalar(rhs)
    }
}

impl Sub<f64> for &Jet {
    type Output = Jet;
    fn sub(self, rhs: f64) -> Jet {
        self.add_scalar(-rhs)
    }
}

impl Sub<f64> for Jet {
    type Output = Jet;
    fn sub(self, rhs: f64) -> Jet {
        self.add_scalar(-rhs)
    }
}

impl Mul<f64> for &Jet {
    type Output = Jet;
    fn mul(self, rhs: f64) -> Jet {
        self.scale(rhs)
    }
}

impl Mul<f64> for Jet {
    type Output = Jet;
    fn mul(self, rhs: f64) -> Jet {
        self.scale(rhs)
    }
}

impl Mul<&Jet> for f64 {
    type Output = Jet;
    fn mul(self, rhs: &Jet) -> Jet {
        rhs.scale(self)
    }
}

impl Mul<Jet> for f64 {
    type Output = Jet;
    fn mul(self, rhs: Jet) -> Jet {
        rhs.scale(self)
    }
}

impl Neg for &Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self.scale(-1.0)
    }
}

impl Neg for Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self.scale(-1.0)
    }
}

impl AddAssign<&Jet> for Jet {
    fn add_assign(&mut self, rhs: &Jet) {
        self.check_shape(rhs).expect("jet shape mismatch");
        for (a, b) in self.coeffs.iter_mut().zip(&rhs.coeffs) {
            *a += b;
        }
    }
}

/// A smooth vector-valued map evaluated on jets.
pub trait SmoothMap: Send + Sync {
    fn name(&self) -> &str;
    fn arity(&self) -> usize;
    fn codim(&self) -> usize {
        1
    }
    /// Highest jet order this map can be evaluated at.
    fn max_order(&self) -> usize {
        usize::MAX
    }
    /// Evaluates on jets that already passed the shape and order checks of
    /// [`SmoothMap::eval_jets`].
    fn eval_unchecked(&self, inputs: &[Jet]) -> Result<Vec<Jet>, JetError>;

    fn eval_jets(&self, inputs: &[Jet]) -> Result<Vec<Jet>, JetError> {
        if inputs.len() != self.arity() {
            return Err(JetError::ArityMismatch {
                name: self.name().to_string(),
                expected: self.arity(),
                got: inputs.len(),
            });
        }
        let first = &inputs[0];
        for j in &inputs[1..] {
            first.check_shape(j)?;
        }
        if first.order() > self.max_order() {
            return Err(JetError::MaxOrderExceeded {
                name: self.name().to_string(),
                requested: first.order(),
                max: self.max_order(),
            });
        }
        let out = self.eval_unchecked(inputs)?;
        debug_assert_eq!(out.len(), self.codim());
        Ok(out)
    }

    /// Plain numeric evaluation (order-0 jets).
    fn eval(&self, point: &[f64]) -> Result<Vec<f64>, JetError> {
        let n = point.len().max(1);
        let inputs: Vec<Jet> = point.iter().map(|&v| Jet::constant(v, n, 0)).collect();
        Ok(self.eval_jets(&inputs)?.iter().map(Jet::value).collect())
    }

    /// Taylor expansion of every output around `point` in the map's own variables.
    fn taylor(&self, point: &[f64], order: usize) -> Result<Vec<Jet>, JetError> {
        if point.len() != self.arity() {
            return Err(JetError::ArityMismatch {
                name: self.name().to_string(),
                expected: self.arity(),
                got: point.len(),
            });
        }
        self.eval_jets(&Jet::lift_point(point, order))
    }
}

/// Shared handle to a smooth map.
pub type Map = Arc<dyn SmoothMap>;

type JetFn = dyn Fn(&[Jet]) -> Vec<Jet> + Send + Sync;

/// A map defined by a closure over jet arithmetic; valid at every order.
pub struct FnMap {
    name: String,
    arity: usize,
    codim: usize,
    f: Box<JetFn>,
}

impl SmoothMap for FnMap {
    fn name(&self) -> &str {
        &self.name
    }
    fn arity(&self) -> usize {
        self.arity
    }
    fn codim(&self) -> usize {
        self.codim
    }
    fn eval_unchecked(&self, inputs: &[Jet]) -> Result<Vec<Jet>, JetError> {
        Ok((self.f)(inputs))
    }
}

/// Vector-valued map from a closure.
pub fn vector_map<F>(name: &str, arity: usize, codim: usize, f: F) -> Map
where
    F: Fn(&[Jet]) -> Vec<Jet> + Send + Sync + 'static,
{
    Arc::new(FnMap {
        name: name.to_string(),
        arity,
        codim,
        f: Box::new(f),
    })
}

/// Scalar map from a closure.
pub fn scalar_map<F>(name: &str, arity: usize, f: F) -> Map
where
    F: Fn(&[Jet]) -> Jet + Send + Sync + 'static,
{
    vector_map(name, arity, 1, move |x| vec![f(x)])
}

/// Constant scalar map.
pub fn constant_map(name: &str, arity: usize, value: f64) -> Map {
    scalar_map(name, arity, move |x| x[0].like(value))
}

/// Constant zero vector map.
pub fn zero_vector_map(name: &str, arity: usize, codim: usize) -> Map {
    vector_map(name, arity, codim, move |x| vec![x[0].zero_like(); codim])
}

/// Identity on one variable, the default class-K∞ choice.
pub fn identity_map() -> Map {
    scalar_map("identity", 1, |x| x[0].clone())
}

/// Evaluates a scalar map at a point and returns its value.
pub fn eval_scalar(f: &dyn SmoothMap, point: &[f64]) -> Result<f64, JetError> {
    Ok(f.eval(point)?[0])
}

/// Exact first-order partials of a scalar map.
pub fn gradient(f: &dyn SmoothMap, point: &[f64]) -> Result<Vec<f64>, JetError> {
    if f.codim() != 1 {
        return Err(JetError::Domain(format!(
            "gradient needs a scalar map, `{}` has {} outputs",
            f.name(),
            f.codim()
        )));
    }
    Ok(f.taylor(point, 1)?[0].gradient())
}

/// Local polynomial model of a map around the values of some caller jets,
/// one order higher than the caller needs so that first partials can be
/// re-expanded in the caller's variables.
pub struct LocalExpansion {
    polys: Vec<Jet>,
    inner: Vec<Jet>,
}

impl LocalExpansion {
    pub fn new(f: &dyn SmoothMap, inputs: &[Jet]) -> Result<LocalExpansion, JetError> {
        if inputs.len() != f.arity() {
            return Err(JetError::ArityMismatch {
                name: f.name().to_string(),
                expected: f.arity(),
                got: inputs.len(),
            });
        }
        let q = inputs[0].order();
        let point: Vec<f64> = inputs.iter().map(Jet::value).collect();
        let polys = f.taylor(&point, q + 1)?;
        Ok(LocalExpansion {
            polys,
            inner: inputs.to_vec(),
        })
    }

    /// Output `component` as a jet in the caller's variables.
    pub fn value(&self, component: usize) -> Result<Jet, JetError> {
        self.polys[component].compose(&self.inner)
    }

    /// `∂f_component/∂u_var` as a jet in the caller's variables.
    pub fn partial(&self, component: usize, var: usize) -> Result<Jet, JetError> {
        self.polys[component].derivative(var)?.compose(&self.inner)
    }
}
