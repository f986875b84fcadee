//! Electromagnetic potentials `(V, A)`, their field strengths, gauge
//! transformations, and the `Psi` / `Psi'` vector fields used in the
//! short-time analysis.
//!
//! Evaluators write into caller-provided slices so that the dense kernel
//! loops never allocate.

use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Largest supported spatial dimension for potentials.
pub const MAX_DIM: usize = 3;

/// Gauss-Legendre rule mapped to `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Quadrature {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl Quadrature {
    pub fn gauss_legendre(order: usize) -> Result<Self> {
        if order == 0 {
            return Err(Error::InvalidParameter {
                name: "quadrature_order",
                reason: "must be at least 1".into(),
            });
        }
        if order == 1 {
            return Ok(Self {
                nodes: vec![0.5],
                weights: vec![1.0],
            });
        }
        let rule = gauss_quad::legendre::GaussLegendre::new(order)
            .map_err(|e| Error::Numerical(format!("Gauss-Legendre rule of order {order}: {e}")))?;
        let mut pairs = rule.into_node_weight_pairs();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        // Enforce the reflection symmetry theta -> 1 - theta exactly.
        let q = pairs.len();
        let mut nodes = Vec::with_capacity(q);
        let mut weights = Vec::with_capacity(q);
        for i in 0..q {
            let (xa, wa) = pairs[i];
            let (xb, wb) = pairs[q - 1 - i];
            let x = 0.5 * (xa - xb);
            nodes.push(0.5 + 0.5 * x);
            weights.push(0.25 * (wa + wb));
        }
        Ok(Self { nodes, weights })
    }

    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn pairs(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.nodes.iter().copied().zip(self.weights.iter().copied())
    }

    /// `int_0^1 f(theta) d theta`.
    pub fn integrate(&self, mut f: impl FnMut(f64) -> f64) -> f64 {
        self.pairs().map(|(x, w)| w * f(x)).sum()
    }
}

/// Monomial `coef * t^t_pow * prod_j x_j^x_pows[j]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Monomial {
    pub coef: f64,
    pub t_pow: u32,
    pub x_pows: Vec<u32>,
}

fn falling(p: u32, k: u32) -> f64 {
    (0..k).map(|i| (p - i) as f64).product()
}

fn pow_derivative(v: f64, p: u32, k: u32) -> f64 {
    if k > p {
        0.0
    } else {
        falling(p, k) * v.powi((p - k) as i32)
    }
}

impl Monomial {
    /// `d^dt/dt^dt d^dx/dx^dx` of the monomial at `(t, x)`.
    fn derivative(&self, t: f64, x: &[f64], dt: u32, dx: &[u32]) -> f64 {
        let mut v = self.coef * pow_derivative(t, self.t_pow, dt);
        for j in 0..self.x_pows.len().max(dx.len()) {
            let p = self.x_pows.get(j).copied().unwrap_or(0);
            let k = dx.get(j).copied().unwrap_or(0);
            if p > 0 || k > 0 {
                v *= pow_derivative(x[j], p, k);
            }
        }
        v
    }

    fn degree(&self) -> u32 {
        self.t_pow + self.x_pows.iter().sum::<u32>()
    }
}

/// Real polynomial in `(t, x_1, ..., x_d)`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Polynomial {
    dim: usize,
    terms: Vec<Monomial>,
}

impl Polynomial {
    pub fn new(dim: usize, terms: Vec<Monomial>) -> Result<Self> {
        if !(1..=MAX_DIM).contains(&dim) {
            return Err(Error::UnsupportedDimension(dim));
        }
        for m in &terms {
            if m.x_pows.len() > dim {
                return Err(Error::DimensionMismatch {
                    what: "monomial exponents",
                    expected: dim,
                    found: m.x_pows.len(),
                });
            }
            if !m.coef.is_finite() {
                return Err(Error::InvalidParameter {
                    name: "coef",
                    reason: "must be finite".into(),
                });
            }
        }
        Ok(Self { dim, terms })
    }

    pub fn zero(dim: usize) -> Self {
        Self {
            dim,
            terms: Vec::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_zero(&self) -> bool {
        self.terms.iter().all(|m| m.coef == 0.0)
    }

    /// Total degree in `(t, x)`.
    pub fn degree(&self) -> u32 {
        self.terms.iter().filter(|m| m.coef != 0.0).map(Monomial::degree).max().unwrap_or(0)
    }

    pub fn derivative(&self, t: f64, x: &[f64], dt: u32, dx: &[u32]) -> f64 {
        self.terms.iter().map(|m| m.derivative(t, x, dt, dx)).sum()
    }

    pub fn value(&self, t: f64, x: &[f64]) -> f64 {
        self.derivative(t, x, 0, &[])
    }

    fn unit(&self, j: usize, order: u32) -> [u32; MAX_DIM] {
        let mut dx = [0; MAX_DIM];
        dx[j] = order;
        dx
    }

    pub fn partial_x(&self, t: f64, x: &[f64], j: usize, dt: u32) -> f64 {
        self.derivative(t, x, dt, &self.unit(j, 1))
    }

    pub fn partial_xx(&self, t: f64, x: &[f64], j: usize, k: usize, dt: u32) -> f64 {
        let mut dx = self.unit(j, 1);
        dx[k] += 1;
        self.derivative(t, x, dt, &dx)
    }
}

/// Analytic potential `(V, A)` together with the derivatives the field
/// strengths and `Psi'` need.
pub trait FieldEvaluator: Send + Sync + fmt::Debug {
    fn dim(&self) -> usize;
    fn scalar(&self, t: f64, x: &[f64]) -> f64;
    fn vector(&self, t: f64, x: &[f64], out: &mut [f64]);
    /// `out[j] = dV/dx_j`.
    fn grad_scalar(&self, t: f64, x: &[f64], out: &mut [f64]);
    /// `out[k] = dA_k/dt`.
    fn dt_vector(&self, t: f64, x: &[f64], out: &mut [f64]);
    /// `out[j * d + k] = dA_k/dx_j`.
    fn jacobian_vector(&self, t: f64, x: &[f64], out: &mut [f64]);
    /// Time derivative of the Jacobian, same layout. Returns `false` when
    /// the evaluator does not provide it.
    fn dt_jacobian_vector(&self, _t: f64, _x: &[f64], _out: &mut [f64]) -> bool {
        false
    }
    fn scalar_is_zero(&self) -> bool {
        false
    }
    fn vector_is_zero(&self) -> bool {
        false
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Family {
    Zero,
    ConstantE,
    ConstantB,
    HarmonicV,
    TimeRampedA,
    Custom,
}

impl Family {
    pub fn tag(&self) -> &'static str {
        match self {
            Family::Zero => "zero",
            Family::ConstantE => "constant_E",
            Family::ConstantB => "constant_B",
            Family::HarmonicV => "harmonic_V",
            Family::TimeRampedA => "time_ramped_A",
            Family::Custom => "custom",
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

/// Which potential carries a constant electric field.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ElectricGauge {
    /// `V = -E . x`, `A = 0`.
    Scalar,
    /// `V = 0`, `A = -E t`.
    Vector,
}

#[derive(Debug)]
struct ZeroField {
    dim: usize,
}

impl FieldEvaluator for ZeroField {
    fn dim(&self) -> usize {
        self.dim
    }
    fn scalar(&self, _t: f64, _x: &[f64]) -> f64 {
        0.0
    }
    fn vector(&self, _t: f64, _x: &[f64], out: &mut [f64]) {
        out.fill(0.0);
    }
    fn grad_scalar(&self, _t: f64, _x: &[f64], out: &mut [f64]) {
        out.fill(0.0);
    }
    fn dt_vector(&self, _t: f64, _x: &[f64], out: &mut [f64]) {
        out.fill(0.0);
    }
    fn jacobian_vector(&self, _t: f64, _x: &[f64], out: &mut [f64]) {
        out.fill(0.0);
    }
    fn dt_jacobian_vector(&self, _t: f64, _x: &[f64], out: &mut [f64]) -> bool {
        out.fill(0.0);
        true
    }
    fn scalar_is_zero(&self) -> bool {
        true
    }
    fn vector_is_zero(&self) -> bool {
        true
    }
}

#[derive(Debug)]
struct ConstantElectric {
    field: Vec<f64>,
    gauge: ElectricGauge,
}

impl FieldEvaluator for ConstantElectric {
    fn dim(&self) -> usize {
        self.field.len()
    }
    fn scalar(&self, _t: f64, x: &[f64]) -> f64 {
        match self.gauge {
            ElectricGauge::Scalar => -self.field.iter().zip(x).map(|(e, x)| e * x).sum::<f64>(),
            ElectricGauge::Vector => 0.0,
        }
    }
    fn vector(&self, t: f64, _x: &[f64], out: &mut [f64]) {
        match self.gauge {
            ElectricGauge::Scalar => out.fill(0.0),
            ElectricGauge::Vector => {
                for (o, e) in out.iter_mut().zip(&self.field) {
                    *o = -e * t;
                }
            }
        }
    }
    fn grad_scalar(&self, _t: f64, _x: &[f64], out: &mut [f64]) {
        match self.gauge {
            ElectricGauge::Scalar => {
                for (o, e) in out.iter_mut().zip(&self.field) {
                    *o = -e;
                }
            }
            ElectricGauge::Vector => out.fill(0.0),
        }
    }
    fn dt_vector(&self, _t: f64, _x: &[f64], out: &mut [f64]) {
        match self.gauge {
            ElectricGauge::Scalar => out.fill(0.0),
            ElectricGauge::Vector => {
                for (o, e) in out.iter_mut().zip(&self.field) {
                    *o = -e;
                }
            }
        }
    }
    fn jacobian_vector(&self, _t: f64, _x: &[f64], out: &mut [f64]) {
        out.fill(0.0);
    }
    fn dt_jacobian_vector(&self, _t: f64, _x: &[f64], out: &mut [f64]) -> bool {
        out.fill(0.0);
        true
    }
    fn scalar_is_zero(&self) -> bool {
        self.gauge == ElectricGauge::Vector
    }
    fn vector_is_zero(&self) -> bool {
        self.gauge == ElectricGauge::Scalar
    }
}

/// `V = 0`, `A = (rate t) (a + curl (-x_2/2, x_1/2))`. The curl part exists
/// only for `d = 2`; with `rate = 0` it is a static field.
#[derive(Debug)]
struct RampedVector {
    offset: f64,
    rate: f64,
    direction: Vec<f64>,
    curl: f64,
}

impl RampedVector {
    fn amplitude(&self, t: f64) -> f64 {
        self.offset + self.rate * t
    }

    fn shape(&self, x: &[f64], out: &mut [f64]) {
        out.copy_from_slice(&self.direction);
        if out.len() == 2 {
            out[0] -= 0.5 * self.curl * x[1];
            out[1] += 0.5 * self.curl * x[0];
        }
    }

    fn shape_jacobian(&self, out: &mut [f64]) {
        out.fill(0.0);
        if self.direction.len() == 2 {
            // out[j*2 + k] = d shape_k / dx_j
            out[1] = 0.5 * self.curl;
            out[2] = -0.5 * self.curl;
        }
    }
}

impl FieldEvaluator for RampedVector {
    fn dim(&self) -> usize {
        self.direction.len()
    }
    fn scalar(&self, _t: f64, _x: &[f64]) -> f64 {
        0.0
    }
    fn vector(&self, t: f64, x: &[f64], out: &mut [f64]) {
        self.shape(x, out);
        let a = self.amplitude(t);
        out.iter_mut().for_each(|o| *o *= a);
    }
    fn grad_scalar(&self, _t: f64, _x: &[f64], out: &mut [f64]) {
        out.fill(0.0);
    }
    fn dt_vector(&self, _t: f64, x: &[f64], out: &mut [f64]) {
        self.shape(x, out);
        out.iter_mut().for_each(|o| *o *= self.rate);
    }
    fn jacobian_vector(&self, t: f64, _x: &[f64], out: &mut [f64]) {
        self.shape_jacobian(out);
        let a = self.amplitude(t);
        out.iter_mut().for_each(|o| *o *= a);
    }
    fn dt_jacobian_vector(&self, _t: f64, _x: &[f64], out: &mut [f64]) -> bool {
        self.shape_jacobian(out);
        out.iter_mut().for_each(|o| *o *= self.rate);
        true
    }
    fn scalar_is_zero(&self) -> bool {
        true
    }
    fn vector_is_zero(&self) -> bool {
        (self.offset == 0.0 && self.rate == 0.0)
            || (self.curl == 0.0 && self.direction.iter().all(|&a| a == 0.0))
    }
}

#[derive(Debug)]
struct Harmonic {
    stiffness: f64,
    center: Vec<f64>,
}

impl FieldEvaluator for Harmonic {
    fn dim(&self) -> usize {
        self.center.len()
    }
    fn scalar(&self, _t: f64, x: &[f64]) -> f64 {
        0.5 * self.stiffness * x.iter().zip(&self.center).map(|(x, c)| (x - c) * (x - c)).sum::<f64>()
    }
    fn vector(&self, _t: f64, _x: &[f64], out: &mut [f64]) {
        out.fill(0.0);
    }
    fn grad_scalar(&self, _t: f64, x: &[f64], out: &mut [f64]) {
        for ((o, x), c) in out.iter_mut().zip(x).zip(&self.center) {
            *o = self.stiffness * (x - c);
        }
    }
    fn dt_vector(&self, _t: f64, _x: &[f64], out: &mut [f64]) {
        out.fill(0.0);
    }
    fn jacobian_vector(&self, _t: f64, _x: &[f64], out: &mut [f64]) {
        out.fill(0.0);
    }
    fn dt_jacobian_vector(&self, _t: f64, _x: &[f64], out: &mut [f64]) -> bool {
        out.fill(0.0);
        true
    }
    fn scalar_is_zero(&self) -> bool {
        self.stiffness == 0.0
    }
    fn vector_is_zero(&self) -> bool {
        true
    }
}

/// Potential given by polynomials `V` and `A_1, ..., A_d`.
#[derive(Debug)]
struct PolynomialField {
    scalar: Polynomial,
    vector: Vec<Polynomial>,
}

impl FieldEvaluator for PolynomialField {
    fn dim(&self) -> usize {
        self.vector.len()
    }
    fn scalar(&self, t: f64, x: &[f64]) -> f64 {
        self.scalar.value(t, x)
    }
    fn vector(&self, t: f64, x: &[f64], out: &mut [f64]) {
        for (o, p) in out.iter_mut().zip(&self.vector) {
            *o = p.value(t, x);
        }
    }
    fn grad_scalar(&self, t: f64, x: &[f64], out: &mut [f64]) {
        for (j, o) in out.iter_mut().enumerate() {
            *o = self.scalar.partial_x(t, x, j, 0);
        }
    }
    fn dt_vector(&self, t: f64, x: &[f64], out: &mut [f64]) {
        for (o, p) in out.iter_mut().zip(&self.vector) {
            *o = p.derivative(t, x, 1, &[]);
        }
    }
    fn jacobian_vector(&self, t: f64, x: &[f64], out: &mut [f64]) {
        let d = self.dim();
        for j in 0..d {
            for (k, p) in self.vector.iter().enumerate() {
                out[j * d + k] = p.partial_x(t, x, j, 0);
            }
        }
    }
    fn dt_jacobian_vector(&self, t: f64, x: &[f64], out: &mut [f64]) -> bool {
        let d = self.dim();
        for j in 0..d {
            for (k, p) in self.vector.iter().enumerate() {
                out[j * d + k] = p.partial_x(t, x, j, 1);
            }
        }
        true
    }
    fn scalar_is_zero(&self) -> bool {
        self.scalar.is_zero()
    }
    fn vector_is_zero(&self) -> bool {
        self.vector.iter().all(Polynomial::is_zero)
    }
}

/// Real gauge function `psi(t, x)`.
#[derive(Debug, Clone, PartialEq)]
pub enum GaugeFunction {
    Polynomial(Polynomial),
    /// `amplitude * sin(k . x + omega t)`.
    Sine {
        amplitude: f64,
        wavevector: Vec<f64>,
        omega: f64,
    },
}

impl GaugeFunction {
    pub fn zero(dim: usize) -> Self {
        GaugeFunction::Polynomial(Polynomial::zero(dim))
    }

    pub fn dim(&self) -> usize {
        match self {
            GaugeFunction::Polynomial(p) => p.dim(),
            GaugeFunction::Sine { wavevector, .. } => wavevector.len(),
        }
    }

    /// Degree of `theta -> psi` along straight space-time paths, `None` when
    /// not polynomial.
    pub fn path_degree(&self) -> Option<u32> {
        match self {
            GaugeFunction::Polynomial(p) => Some(p.degree()),
            GaugeFunction::Sine { amplitude, .. } if *amplitude == 0.0 => Some(0),
            GaugeFunction::Sine { .. } => None,
        }
    }

    fn sine_parts(&self, t: f64, x: &[f64]) -> Option<(f64, f64, f64, &[f64], f64)> {
        match self {
            GaugeFunction::Sine {
                amplitude,
                wavevector,
                omega,
            } => {
                let phase: f64 = wavevector.iter().zip(x).map(|(k, x)| k * x).sum::<f64>() + omega * t;
                Some((*amplitude, phase.sin(), phase.cos(), wavevector, *omega))
            }
            _ => None,
        }
    }

    pub fn value(&self, t: f64, x: &[f64]) -> f64 {
        match self {
            GaugeFunction::Polynomial(p) => p.value(t, x),
            _ => {
                let (a, s, _, _, _) = self.sine_parts(t, x).unwrap();
                a * s
            }
        }
    }

    pub fn dt(&self, t: f64, x: &[f64]) -> f64 {
        match self {
            GaugeFunction::Polynomial(p) => p.derivative(t, x, 1, &[]),
            _ => {
                let (a, _, c, _, w) = self.sine_parts(t, x).unwrap();
                a * w * c
            }
        }
    }

    /// `d/dx_j` differentiated `dt` times in `t` (`dt` is 0 or 1).
    pub fn grad(&self, t: f64, x: &[f64], j: usize, dt: u32) -> f64 {
        match self {
            GaugeFunction::Polynomial(p) => p.partial_x(t, x, j, dt),
            _ => {
                let (a, s, c, k, w) = self.sine_parts(t, x).unwrap();
                if dt == 0 {
                    a * k[j] * c
                } else {
                    -a * k[j] * w * s
                }
            }
        }
    }

    /// `d^2/dx_j dx_k` differentiated `dt` times in `t` (`dt` is 0 or 1).
    pub fn hessian(&self, t: f64, x: &[f64], j: usize, k: usize, dt: u32) -> f64 {
        match self {
            GaugeFunction::Polynomial(p) => p.partial_xx(t, x, j, k, dt),
            _ => {
                let (a, s, c, kv, w) = self.sine_parts(t, x).unwrap();
                if dt == 0 {
                    -a * kv[j] * kv[k] * s
                } else {
                    -a * kv[j] * kv[k] * w * c
                }
            }
        }
    }
}

/// `V' = V - dpsi/dt`, `A' = A + grad psi`.
#[derive(Debug)]
struct Gauged {
    base: Arc<dyn FieldEvaluator>,
    psi: GaugeFunction,
}

impl FieldEvaluator for Gauged {
    fn dim(&self) -> usize {
        self.base.dim()
    }
    fn scalar(&self, t: f64, x: &[f64]) -> f64 {
        self.base.scalar(t, x) - self.psi.dt(t, x)
    }
    fn vector(&self, t: f64, x: &[f64], out: &mut [f64]) {
        self.base.vector(t, x, out);
        for (j, o) in out.iter_mut().enumerate() {
            *o += self.psi.grad(t, x, j, 0);
        }
    }
    fn grad_scalar(&self, t: f64, x: &[f64], out: &mut [f64]) {
        self.base.grad_scalar(t, x, out);
        for (j, o) in out.iter_mut().enumerate() {
            *o -= self.psi.grad(t, x, j, 1);
        }
    }
    fn dt_vector(&self, t: f64, x: &[f64], out: &mut [f64]) {
        self.base.dt_vector(t, x, out);
        for (j, o) in out.iter_mut().enumerate() {
            *o += self.psi.grad(t, x, j, 1);
        }
    }
    fn jacobian_vector(&self, t: f64, x: &[f64], out: &mut [f64]) {
        let d = self.dim();
        self.base.jacobian_vector(t, x, out);
        for j in 0..d {
            for k in 0..d {
                out[j * d + k] += self.psi.hessian(t, x, j, k, 0);
            }
        }
    }
    fn dt_jacobian_vector(&self, t: f64, x: &[f64], out: &mut [f64]) -> bool {
        let d = self.dim();
        if !self.base.dt_jacobian_vector(t, x, out) {
            return false;
        }
        for j in 0..d {
            for k in 0..d {
                out[j * d + k] += self.psi.hessian(t, x, j, k, 1);
            }
        }
        true
    }
}

/// A potential together with its family tag and declared growth exponent.
#[derive(Debug, Clone)]
pub struct PotentialSpec {
    family: Family,
    growth_exponent: u32,
    gauged: bool,
    evaluator: Arc<dyn FieldEvaluator>,
}

/// Relative tolerance of the finite-difference derivative self-check.
pub const DERIVATIVE_CHECK_TOL: f64 = 1e-6;

impl PotentialSpec {
    fn build(family: Family, growth_exponent: u32, evaluator: Arc<dyn FieldEvaluator>) -> Result<Self> {
        let dim = evaluator.dim();
        if !(1..=MAX_DIM).contains(&dim) {
            return Err(Error::UnsupportedDimension(dim));
        }
        let spec = Self {
            family,
            growth_exponent,
            gauged: false,
            evaluator,
        };
        spec.check_derivatives(0x5eed, 100, 1.0, 1.0)?;
        Ok(spec)
    }

    pub fn zero(dim: usize) -> Result<Self> {
        Self::build(Family::Zero, 1, Arc::new(ZeroField { dim }))
    }

    /// Uniform electric field `E`; `M = 1`, all spatial derivatives of `E`
    /// vanish and `B = 0`.
    pub fn constant_e(field: Vec<f64>, gauge: ElectricGauge) -> Result<Self> {
        finite("field", &field)?;
        Self::build(Family::ConstantE, 1, Arc::new(ConstantElectric { field, gauge }))
    }

    /// Uniform magnetic field `B_12 = strength` in `d = 2`, symmetric gauge
    /// `A = (strength/2) (-x_2, x_1)`. Time independent, so `dB/dt = 0`.
    pub fn constant_b(strength: f64) -> Result<Self> {
        finite("strength", &[strength])?;
        Self::build(
            Family::ConstantB,
            1,
            Arc::new(RampedVector {
                offset: 1.0,
                rate: 0.0,
                direction: vec![0.0, 0.0],
                curl: strength,
            }),
        )
    }

    /// `V = (stiffness/2) |x - center|^2`, `A = 0`; `M = 2`.
    pub fn harmonic_v(stiffness: f64, center: Vec<f64>) -> Result<Self> {
        finite("stiffness", &[stiffness])?;
        finite("center", &center)?;
        Self::build(Family::HarmonicV, 2, Arc::new(Harmonic { stiffness, center }))
    }

    /// `A = rate t (direction + curl (-x_2/2, x_1/2))`, `V = 0`. In `d = 2`
    /// the curl part gives `B_12 = rate t curl` with `dB/dt = rate curl`.
    pub fn time_ramped_a(rate: f64, direction: Vec<f64>, curl: f64) -> Result<Self> {
        finite("rate", &[rate])?;
        finite("direction", &direction)?;
        finite("curl", &[curl])?;
        if curl != 0.0 && direction.len() != 2 {
            return Err(Error::InvalidParameter {
                name: "curl",
                reason: "a curl component requires d = 2".into(),
            });
        }
        Self::build(
            Family::TimeRampedA,
            1,
            Arc::new(RampedVector {
                offset: 0.0,
                rate,
                direction,
                curl,
            }),
        )
    }

    /// Polynomial potential. Growth assumptions are not verified for it.
    pub fn custom_polynomial(scalar: Polynomial, vector: Vec<Polynomial>) -> Result<Self> {
        let d = vector.len();
        if scalar.dim() != d || vector.iter().any(|p| p.dim() != d) {
            return Err(Error::DimensionMismatch {
                what: "polynomial potential",
                expected: d,
                found: scalar.dim(),
            });
        }
        let m = vector
            .iter()
            .map(Polynomial::degree)
            .chain(std::iter::once(scalar.degree().saturating_sub(1)))
            .max()
            .unwrap_or(1)
            .max(1);
        Self::build(Family::Custom, m, Arc::new(PolynomialField { scalar, vector }))
    }

    /// Any user evaluator, self-checked against finite differences.
    pub fn custom(evaluator: Arc<dyn FieldEvaluator>, growth_exponent: u32) -> Result<Self> {
        Self::build(Family::Custom, growth_exponent.max(1), evaluator)
    }

    pub fn family(&self) -> Family {
        self.family
    }

    /// True for custom potentials, whose growth assumptions are taken on
    /// trust.
    pub fn needs_warning(&self) -> bool {
        self.family == Family::Custom
    }

    pub fn is_gauge_transformed(&self) -> bool {
        self.gauged
    }

    pub fn growth_exponent(&self) -> u32 {
        self.growth_exponent
    }

    pub fn dim(&self) -> usize {
        self.evaluator.dim()
    }

    pub fn evaluator(&self) -> &dyn FieldEvaluator {
        self.evaluator.as_ref()
    }

    pub fn scalar_is_zero(&self) -> bool {
        self.evaluator.scalar_is_zero()
    }

    pub fn vector_is_zero(&self) -> bool {
        self.evaluator.vector_is_zero()
    }

    /// `V = 0` and `A = 0` identically.
    pub fn is_free(&self) -> bool {
        self.scalar_is_zero() && self.vector_is_zero()
    }

    pub fn scalar(&self, t: f64, x: &[f64]) -> f64 {
        self.evaluator.scalar(t, x)
    }

    pub fn vector(&self, t: f64, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        self.evaluator.vector(t, x, &mut out);
        out
    }

    /// `E = -dA/dt - grad V`, written into `out`.
    pub fn electric_field_into(&self, t: f64, x: &[f64], out: &mut [f64]) {
        let d = self.dim();
        let mut g = [0.0; MAX_DIM];
        self.evaluator.dt_vector(t, x, out);
        self.evaluator.grad_scalar(t, x, &mut g[..d]);
        for (o, g) in out.iter_mut().zip(&g[..d]) {
            *o = -*o - g;
        }
    }

    pub fn electric_field(&self, t: f64, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        self.electric_field_into(t, x, &mut out);
        out
    }

    /// Full antisymmetric `B[j * d + k] = dA_k/dx_j - dA_j/dx_k`.
    pub fn magnetic_matrix_into(&self, t: f64, x: &[f64], out: &mut [f64]) {
        let d = self.dim();
        let mut jac = [0.0; MAX_DIM * MAX_DIM];
        self.evaluator.jacobian_vector(t, x, &mut jac[..d * d]);
        antisymmetrize(&jac[..d * d], d, out);
    }

    /// `dB/dt` in the layout of [`Self::magnetic_matrix_into`].
    pub fn dt_magnetic_matrix_into(&self, t: f64, x: &[f64], out: &mut [f64]) -> Result<()> {
        let d = self.dim();
        let mut jac = [0.0; MAX_DIM * MAX_DIM];
        if !self.evaluator.dt_jacobian_vector(t, x, &mut jac[..d * d]) {
            return Err(Error::MissingDerivative("dB/dt"));
        }
        antisymmetrize(&jac[..d * d], d, out);
        Ok(())
    }

    /// Independent components `B_jk`, `j < k`, in lexicographic order.
    /// Empty for `d = 1`.
    pub fn magnetic_tensor(&self, t: f64, x: &[f64]) -> Vec<f64> {
        let d = self.dim();
        let mut full = [0.0; MAX_DIM * MAX_DIM];
        self.magnetic_matrix_into(t, x, &mut full[..d * d]);
        let mut out = Vec::new();
        for j in 0..d {
            for k in (j + 1)..d {
                out.push(full[j * d + k]);
            }
        }
        out
    }

    /// `V' = V - dpsi/dt`, `A' = A + grad psi`.
    pub fn gauge_transform(&self, psi: &GaugeFunction) -> Result<Self> {
        if psi.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                what: "gauge function",
                expected: self.dim(),
                found: psi.dim(),
            });
        }
        Ok(Self {
            family: self.family,
            growth_exponent: self.growth_exponent,
            gauged: true,
            evaluator: Arc::new(Gauged {
                base: self.evaluator.clone(),
                psi: psi.clone(),
            }),
        })
    }

    /// Compares every analytic derivative with a central finite difference
    /// at `points` seeded random points of `[-t_box, t_box] x [-x_box, x_box]^d`.
    pub fn check_derivatives(&self, seed: u64, points: usize, t_box: f64, x_box: f64) -> Result<()> {
        let d = self.dim();
        let ev = self.evaluator.as_ref();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let step = 1e-4;
        let mut worst: (f64, &'static str) = (0.0, "");
        let mut note = |err: f64, scale: f64, name: &'static str| {
            let rel = err / scale.abs().max(1.0);
            if rel > worst.0 {
                worst = (rel, name);
            }
        };
        let mut buf_p = [0.0; MAX_DIM];
        let mut buf_m = [0.0; MAX_DIM];
        let mut an = [0.0; MAX_DIM * MAX_DIM];
        for _ in 0..points {
            let t = rng.random_range(-t_box..=t_box);
            let mut x = [0.0; MAX_DIM];
            for xi in x.iter_mut().take(d) {
                *xi = rng.random_range(-x_box..=x_box);
            }
            let x = &x[..d];

            ev.grad_scalar(t, x, &mut an[..d]);
            for j in 0..d {
                let (mut xp, mut xm) = ([0.0; MAX_DIM], [0.0; MAX_DIM]);
                xp[..d].copy_from_slice(x);
                xm[..d].copy_from_slice(x);
                xp[j] += step;
                xm[j] -= step;
                let fd = (ev.scalar(t, &xp[..d]) - ev.scalar(t, &xm[..d])) / (2.0 * step);
                note((fd - an[j]).abs(), an[j], "dV/dx");
            }

            ev.dt_vector(t, x, &mut an[..d]);
            ev.vector(t + step, x, &mut buf_p[..d]);
            ev.vector(t - step, x, &mut buf_m[..d]);
            for k in 0..d {
                let fd = (buf_p[k] - buf_m[k]) / (2.0 * step);
                note((fd - an[k]).abs(), an[k], "dA/dt");
            }

            ev.jacobian_vector(t, x, &mut an[..d * d]);
            for j in 0..d {
                let (mut xp, mut xm) = ([0.0; MAX_DIM], [0.0; MAX_DIM]);
                xp[..d].copy_from_slice(x);
                xm[..d].copy_from_slice(x);
                xp[j] += step;
                xm[j] -= step;
                ev.vector(t, &xp[..d], &mut buf_p[..d]);
                ev.vector(t, &xm[..d], &mut buf_m[..d]);
                for k in 0..d {
                    let fd = (buf_p[k] - buf_m[k]) / (2.0 * step);
                    note((fd - an[j * d + k]).abs(), an[j * d + k], "dA/dx");
                }
            }

            let mut jp = [0.0; MAX_DIM * MAX_DIM];
            let mut jm = [0.0; MAX_DIM * MAX_DIM];
            if ev.dt_jacobian_vector(t, x, &mut an[..d * d]) {
                ev.jacobian_vector(t + step, x, &mut jp[..d * d]);
                ev.jacobian_vector(t - step, x, &mut jm[..d * d]);
                for i in 0..d * d {
                    let fd = (jp[i] - jm[i]) / (2.0 * step);
                    note((fd - an[i]).abs(), an[i], "d2A/dtdx");
                }
            }
        }
        if worst.0 > DERIVATIVE_CHECK_TOL {
            return Err(Error::DerivativeCheck {
                evaluator: worst.1,
                error: worst.0,
                tolerance: DERIVATIVE_CHECK_TOL,
            });
        }
        Ok(())
    }
}

fn finite(name: &'static str, values: &[f64]) -> Result<()> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            name,
            reason: "must be finite".into(),
        })
    }
}

fn antisymmetrize(jac: &[f64], d: usize, out: &mut [f64]) {
    for j in 0..d {
        for k in 0..d {
            out[j * d + k] = jac[j * d + k] - jac[k * d + j];
        }
    }
}

/// Point `y + s1 (z - y) + s1 s2 (x - z)` of the space triangle.
#[inline]
fn triangle_point(x: &[f64], y: &[f64], z: &[f64], s1: f64, s2: f64, out: &mut [f64]) {
    for j in 0..out.len() {
        out[j] = y[j] + s1 * (z[j] - y[j]) + s1 * s2 * (x[j] - z[j]);
    }
}

fn check_psi_args(pot: &PotentialSpec, x: &[f64], y: &[f64], z: &[f64]) -> Result<usize> {
    let d = pot.dim();
    for v in [x, y, z] {
        if v.len() != d {
            return Err(Error::DimensionMismatch {
                what: "point",
                expected: d,
                found: v.len(),
            });
        }
    }
    Ok(d)
}

/// The two terms shared by `Psi` and `Psi'`: minus the mean of `A(s, .)`
/// along `z -> x`, plus `(t - s)` times the weighted triangle mean of `E`.
fn psi_common(pot: &PotentialSpec, quad: &Quadrature, t: f64, s: f64, x: &[f64], y: &[f64], z: &[f64], out: &mut [f64]) {
    let d = out.len();
    let rho = t - s;
    out.fill(0.0);
    let mut p = [0.0; MAX_DIM];
    let mut a = [0.0; MAX_DIM];
    for (th, w) in quad.pairs() {
        for j in 0..d {
            p[j] = z[j] + th * (x[j] - z[j]);
        }
        pot.evaluator.vector(s, &p[..d], &mut a[..d]);
        for j in 0..d {
            out[j] -= w * a[j];
        }
    }
    let mut e = [0.0; MAX_DIM];
    for (s1, w1) in quad.pairs() {
        for (s2, w2) in quad.pairs() {
            triangle_point(x, y, z, s1, s2, &mut p[..d]);
            pot.electric_field_into(t - s1 * rho, &p[..d], &mut e[..d]);
            for j in 0..d {
                out[j] += rho * w1 * w2 * s1 * e[j];
            }
        }
    }
}

/// `Psi(t, s; x, y, z)` by nested Gauss-Legendre quadrature.
pub fn psi_vector(pot: &PotentialSpec, quad: &Quadrature, t: f64, s: f64, x: &[f64], y: &[f64], z: &[f64]) -> Result<Vec<f64>> {
    let d = check_psi_args(pot, x, y, z)?;
    let rho = t - s;
    let mut out = vec![0.0; d];
    psi_common(pot, quad, t, s, x, y, z, &mut out);
    let mut p = [0.0; MAX_DIM];
    let mut b = [0.0; MAX_DIM * MAX_DIM];
    for (s1, w1) in quad.pairs() {
        for (s2, w2) in quad.pairs() {
            triangle_point(x, y, z, s1, s2, &mut p[..d]);
            pot.magnetic_matrix_into(t - s1 * rho, &p[..d], &mut b[..d * d]);
            for j in 0..d {
                for k in 0..d {
                    out[j] += (y[k] - z[k]) * w1 * w2 * s1 * b[j * d + k];
                }
            }
        }
    }
    Ok(out)
}

/// `Psi'(t, s; x, y, z)`, whose magnetic term uses `dB/dt`.
pub fn psi_prime_vector(pot: &PotentialSpec, quad: &Quadrature, t: f64, s: f64, x: &[f64], y: &[f64], z: &[f64]) -> Result<Vec<f64>> {
    let d = check_psi_args(pot, x, y, z)?;
    let rho = t - s;
    let mut out = vec![0.0; d];
    psi_common(pot, quad, t, s, x, y, z, &mut out);
    let mut p = [0.0; MAX_DIM];
    let mut db = [0.0; MAX_DIM * MAX_DIM];
    for (th, w0) in quad.pairs() {
        for (s1, w1) in quad.pairs() {
            for (s2, w2) in quad.pairs() {
                triangle_point(x, y, z, s1, s2, &mut p[..d]);
                pot.dt_magnetic_matrix_into(s + th * rho * (1.0 - s1), &p[..d], &mut db[..d * d])?;
                let weight = rho * w0 * w1 * w2 * s1 * (1.0 - s1);
                for j in 0..d {
                    for k in 0..d {
                        out[j] += (y[k] - z[k]) * weight * db[j * d + k];
                    }
                }
            }
        }
    }
    Ok(out)
}

/// `sum_jk (x - z)_j (y - z)_k int int s1 B_jk(s, triangle point)`: the
/// magnetic flux of `B(s, .)` through the space triangle with vertices
/// `y, z, x`, up to orientation. This is exactly
/// `(x - z) . Psi - (x - z) . Psi'` whenever the quadrature resolves the
/// time dependence of `B`.
pub fn triangle_flux(pot: &PotentialSpec, quad: &Quadrature, s: f64, x: &[f64], y: &[f64], z: &[f64]) -> Result<f64> {
    let d = check_psi_args(pot, x, y, z)?;
    let mut p = [0.0; MAX_DIM];
    let mut b = [0.0; MAX_DIM * MAX_DIM];
    let mut total = 0.0;
    for (s1, w1) in quad.pairs() {
        for (s2, w2) in quad.pairs() {
            triangle_point(x, y, z, s1, s2, &mut p[..d]);
            pot.magnetic_matrix_into(s, &p[..d], &mut b[..d * d]);
            for j in 0..d {
                for k in 0..d {
                    total += (x[j] - z[j]) * (y[k] - z[k]) * w1 * w2 * s1 * b[j * d + k];
                }
            }
        }
    }
    Ok(total)
}
