//! Hermitian matrix systems `(alpha_1, ..., alpha_d, beta)` for the Dirac
//! Hamiltonian, their momentum symbols, and the matrix exponentials built on
//! top of them.
//!
//! The standard systems satisfy the Clifford relations
//! `alpha_j alpha_k + alpha_k alpha_j = 2 delta_jk I` (with `alpha_0 = beta`),
//! but arbitrary Hermitian systems are accepted as well. For those the
//! propagation-speed constant `lambda_max` has to be found numerically.

use std::f64::consts::PI;
use std::sync::OnceLock;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

/// Max-entry tolerance for the Hermiticity and anticommutation checks.
pub const STRUCTURE_TOL: f64 = 1e-12;

const EXP_HERMITIAN_TOL: f64 = 1e-10;

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

fn c64(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// Largest entry modulus.
pub fn max_abs_entry(m: &CMatrix) -> f64 {
    m.iter().fold(0.0_f64, |acc, z| acc.max(z.norm()))
}

/// `max |M - M^H|` over all entries.
pub fn hermitian_deviation(m: &CMatrix) -> f64 {
    if !m.is_square() {
        return f64::INFINITY;
    }
    max_abs_entry(&(m - m.adjoint()))
}

pub fn pauli_x() -> CMatrix {
    CMatrix::from_row_slice(2, 2, &[c64(0., 0.), c64(1., 0.), c64(1., 0.), c64(0., 0.)])
}

pub fn pauli_y() -> CMatrix {
    CMatrix::from_row_slice(2, 2, &[c64(0., 0.), c64(0., -1.), c64(0., 1.), c64(0., 0.)])
}

pub fn pauli_z() -> CMatrix {
    CMatrix::from_row_slice(2, 2, &[c64(1., 0.), c64(0., 0.), c64(0., 0.), c64(-1., 0.)])
}

/// Speed of light and mass in simulation units (hbar = e = 1).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysicalParams {
    c: f64,
    m: f64,
}

impl PhysicalParams {
    pub fn new(c: f64, m: f64) -> Result<Self> {
        if !(c.is_finite() && c > 0.0) {
            return Err(Error::InvalidParameter {
                name: "c",
                reason: format!("must be positive, got {c}"),
            });
        }
        if !(m.is_finite() && m >= 0.0) {
            return Err(Error::InvalidParameter {
                name: "m",
                reason: format!("must be nonnegative, got {m}"),
            });
        }
        Ok(Self { c, m })
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn m(&self) -> f64 {
        self.m
    }

    /// `m c^2`, the coefficient of `beta` in the symbol.
    pub fn rest_energy(&self) -> f64 {
        self.m * self.c * self.c
    }
}

/// Sampling density for the `lambda_max` search of non-Clifford systems.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SphereSearch {
    pub samples_2d: usize,
    pub samples_3d: usize,
    pub refine_iterations: usize,
}

impl Default for SphereSearch {
    fn default() -> Self {
        Self {
            samples_2d: 10_000,
            samples_3d: 100_000,
            refine_iterations: 60,
        }
    }
}

#[derive(Debug, Clone)]
pub struct DiracAlgebra {
    alphas: Vec<CMatrix>,
    beta: CMatrix,
    clifford: bool,
    search: SphereSearch,
    lambda_max: OnceLock<f64>,
}

impl DiracAlgebra {
    /// Standard Clifford system: Pauli matrices for `d = 1, 2` and the Dirac
    /// representation (`N = 4`) for `d = 3`.
    pub fn standard(d: usize) -> Result<Self> {
        let (alphas, beta) = match d {
            1 => (vec![pauli_x()], pauli_z()),
            2 => (vec![pauli_x(), pauli_y()], pauli_z()),
            3 => {
                let zero = CMatrix::zeros(2, 2);
                let id = CMatrix::identity(2, 2);
                let off = |s: &CMatrix| block2(&zero, s, s, &zero);
                (
                    vec![off(&pauli_x()), off(&pauli_y()), off(&pauli_z())],
                    block2(&id, &zero, &zero, &(-id.clone())),
                )
            }
            other => return Err(Error::UnsupportedDimension(other)),
        };
        Self::custom(alphas, beta)
    }

    /// Arbitrary Hermitian system. The Clifford flag is detected, not assumed.
    pub fn custom(alphas: Vec<CMatrix>, beta: CMatrix) -> Result<Self> {
        let d = alphas.len();
        if !(1..=3).contains(&d) {
            return Err(Error::UnsupportedDimension(d));
        }
        let n = beta.nrows();
        if n == 0 {
            return Err(Error::InvalidParameter {
                name: "beta",
                reason: "empty matrix".into(),
            });
        }
        let named = std::iter::once(("beta".to_string(), &beta))
            .chain(alphas.iter().enumerate().map(|(j, a)| (format!("alpha[{}]", j + 1), a)));
        for (name, m) in named {
            if m.nrows() != n || m.ncols() != n {
                return Err(Error::DimensionMismatch {
                    what: "algebra matrix",
                    expected: n,
                    found: if m.nrows() != n { m.nrows() } else { m.ncols() },
                });
            }
            let deviation = hermitian_deviation(m);
            if deviation > STRUCTURE_TOL {
                return Err(Error::NotHermitian { name, deviation });
            }
        }
        let clifford = clifford_deviation(&alphas, &beta) <= STRUCTURE_TOL;
        Ok(Self {
            alphas,
            beta,
            clifford,
            search: SphereSearch::default(),
            lambda_max: OnceLock::new(),
        })
    }

    pub fn with_search(mut self, search: SphereSearch) -> Self {
        self.search = search;
        self.lambda_max = OnceLock::new();
        self
    }

    pub fn dim(&self) -> usize {
        self.alphas.len()
    }

    pub fn spinor_dim(&self) -> usize {
        self.beta.nrows()
    }

    pub fn alphas(&self) -> &[CMatrix] {
        &self.alphas
    }

    pub fn beta(&self) -> &CMatrix {
        &self.beta
    }

    pub fn is_clifford(&self) -> bool {
        self.clifford
    }

    /// Largest max-entry deviation from the anticommutation relations.
    pub fn clifford_deviation(&self) -> f64 {
        clifford_deviation(&self.alphas, &self.beta)
    }

    /// `alpha . xi` for a real momentum.
    pub fn alpha_dot(&self, xi: &[f64]) -> CMatrix {
        let n = self.spinor_dim();
        let mut out = CMatrix::zeros(n, n);
        for (a, &x) in self.alphas.iter().zip(xi) {
            out += a * Complex64::from(x);
        }
        out
    }

    /// `c alpha . zeta + beta m c^2` for a (possibly complex) momentum.
    pub fn symbol(&self, params: &PhysicalParams, zeta: &[Complex64]) -> Result<CMatrix> {
        if zeta.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                what: "momentum",
                expected: self.dim(),
                found: zeta.len(),
            });
        }
        let mut out = &self.beta * Complex64::from(params.rest_energy());
        for (a, &z) in self.alphas.iter().zip(zeta) {
            out += a * (z * params.c());
        }
        Ok(out)
    }

    /// Real-momentum symbol; Hermitian.
    pub fn symbol_real(&self, params: &PhysicalParams, xi: &[f64]) -> Result<CMatrix> {
        let zeta: Vec<Complex64> = xi.iter().map(|&x| Complex64::from(x)).collect();
        self.symbol(params, &zeta)
    }

    /// Largest eigenvalue of `alpha . xi` over unit `xi`.
    ///
    /// Exactly 1 for Clifford systems. Otherwise exact for `d = 1`, and a
    /// sampled search plus local ascent for `d >= 2` (no optimality
    /// certificate). The value is computed once and cached.
    pub fn lambda_max(&self) -> f64 {
        *self.lambda_max.get_or_init(|| {
            if self.clifford {
                return 1.0;
            }
            match self.dim() {
                1 => {
                    let ev = hermitian_eigenvalues(&self.alphas[0]);
                    ev.iter().fold(0.0_f64, |acc, &l| acc.max(l.abs()))
                }
                2 => self.search_circle(),
                _ => self.search_sphere(),
            }
        })
    }

    fn top_eigenvalue(&self, xi: &[f64]) -> f64 {
        hermitian_eigenvalues(&self.alpha_dot(xi))
            .iter()
            .fold(f64::NEG_INFINITY, |acc, &l| acc.max(l))
    }

    fn search_circle(&self) -> f64 {
        let samples = self.search.samples_2d.max(8);
        let at = |phi: f64| self.top_eigenvalue(&[phi.cos(), phi.sin()]);
        let (mut best_phi, mut best) = (0.0, f64::NEG_INFINITY);
        for k in 0..samples {
            let phi = 2.0 * PI * k as f64 / samples as f64;
            let v = at(phi);
            if v > best {
                best = v;
                best_phi = phi;
            }
        }
        let mut step = 2.0 * PI / samples as f64;
        for _ in 0..self.search.refine_iterations {
            let mut moved = false;
            for cand in [best_phi - step, best_phi + step] {
                let v = at(cand);
                if v > best {
                    best = v;
                    best_phi = cand;
                    moved = true;
                }
            }
            if !moved {
                step *= 0.5;
            }
        }
        best.max(0.0)
    }

    fn search_sphere(&self) -> f64 {
        let samples = self.search.samples_3d.max(16);
        let dir = |theta: f64, phi: f64| {
            [theta.sin() * phi.cos(), theta.sin() * phi.sin(), theta.cos()]
        };
        let golden = PI * (3.0 - 5.0_f64.sqrt());
        let (mut best, mut best_theta, mut best_phi) = (f64::NEG_INFINITY, 0.0, 0.0);
        for k in 0..samples {
            // Fibonacci lattice on the unit sphere.
            let z = 1.0 - 2.0 * (k as f64 + 0.5) / samples as f64;
            let theta = z.clamp(-1.0, 1.0).acos();
            let phi = golden * k as f64;
            let v = self.top_eigenvalue(&dir(theta, phi));
            if v > best {
                best = v;
                best_theta = theta;
                best_phi = phi;
            }
        }
        let mut step = (4.0 * PI / samples as f64).sqrt();
        for _ in 0..self.search.refine_iterations {
            let mut moved = false;
            for (dt, dp) in [(step, 0.0), (-step, 0.0), (0.0, step), (0.0, -step)] {
                let (th, ph) = (best_theta + dt, best_phi + dp);
                let v = self.top_eigenvalue(&dir(th, ph));
                if v > best {
                    best = v;
                    best_theta = th;
                    best_phi = ph;
                    moved = true;
                }
            }
            if !moved {
                step *= 0.5;
            }
        }
        best.max(0.0)
    }
}

fn block2(a: &CMatrix, b: &CMatrix, c: &CMatrix, d: &CMatrix) -> CMatrix {
    let n = a.nrows();
    let mut out = CMatrix::zeros(2 * n, 2 * n);
    out.view_mut((0, 0), (n, n)).copy_from(a);
    out.view_mut((0, n), (n, n)).copy_from(b);
    out.view_mut((n, 0), (n, n)).copy_from(c);
    out.view_mut((n, n), (n, n)).copy_from(d);
    out
}

fn clifford_deviation(alphas: &[CMatrix], beta: &CMatrix) -> f64 {
    let n = beta.nrows();
    let all: Vec<&CMatrix> = std::iter::once(beta).chain(alphas.iter()).collect();
    let mut worst = 0.0_f64;
    for j in 0..all.len() {
        for k in j..all.len() {
            let mut anti = all[j] * all[k] + all[k] * all[j];
            if j == k {
                anti -= CMatrix::identity(n, n) * Complex64::from(2.0);
            }
            worst = worst.max(max_abs_entry(&anti));
        }
    }
    worst
}

/// Eigenvalues of a Hermitian matrix (ascending order not guaranteed).
pub fn hermitian_eigenvalues(h: &CMatrix) -> Vec<f64> {
    h.clone().symmetric_eigenvalues().iter().copied().collect()
}

/// `exp(-i theta H)` for Hermitian `H`, through its eigendecomposition.
pub fn unitary_exp(h: &CMatrix, theta: f64) -> Result<CMatrix> {
    let deviation = hermitian_deviation(h);
    if deviation > EXP_HERMITIAN_TOL {
        return Err(Error::NotHermitian {
            name: "exponent".into(),
            deviation,
        });
    }
    let n = h.nrows();
    if theta == 0.0 {
        return Ok(CMatrix::identity(n, n));
    }
    // Symmetrize so round-off in the input cannot leak into the eigensolver.
    let sym = (h + h.adjoint()) * Complex64::from(0.5);
    let eig = sym.symmetric_eigen();
    let v = &eig.eigenvectors;
    let mut scaled = v.clone();
    for (j, &lambda) in eig.eigenvalues.iter().enumerate() {
        let phase = Complex64::from_polar(1.0, -theta * lambda);
        for r in 0..scaled.nrows() {
            scaled[(r, j)] *= phase;
        }
    }
    Ok(scaled * v.adjoint())
}

/// General matrix exponential (Pade approximant with scaling and squaring).
pub fn expm(a: &CMatrix) -> CMatrix {
    a.clone().exp()
}

fn matrix_power(base: &CMatrix, mut n: usize) -> CMatrix {
    let mut result = CMatrix::identity(base.nrows(), base.ncols());
    let mut square = base.clone();
    while n > 0 {
        if n & 1 == 1 {
            result = &result * &square;
        }
        n >>= 1;
        if n > 0 {
            square = &square * &square;
        }
    }
    result
}

/// `[exp(A/n) exp(B/n)]^n`, which tends to `exp(A + B)` as `n` grows.
pub fn lie_product(a: &CMatrix, b: &CMatrix, n: usize) -> Result<CMatrix> {
    if !a.is_square() || a.shape() != b.shape() {
        return Err(Error::DimensionMismatch {
            what: "Lie product operand",
            expected: a.nrows(),
            found: b.nrows(),
        });
    }
    if n == 0 {
        return Err(Error::InvalidParameter {
            name: "n",
            reason: "must be at least 1".into(),
        });
    }
    let scale = Complex64::from(1.0 / n as f64);
    let step = expm(&(a * scale)) * expm(&(b * scale));
    Ok(matrix_power(&step, n))
}

/// `exp(|rho| c |eta| lambda_max) |u| - |exp(-i rho {c alpha.(xi + i eta) + beta m c^2}) u|`.
///
/// Nonnegative whenever the complexified propagator obeys the growth bound.
pub fn growth_bound_margin(
    algebra: &DiracAlgebra,
    params: &PhysicalParams,
    rho: f64,
    xi: &[f64],
    eta: &[f64],
    u: &[Complex64],
) -> Result<f64> {
    let d = algebra.dim();
    if xi.len() != d || eta.len() != d {
        return Err(Error::DimensionMismatch {
            what: "momentum",
            expected: d,
            found: if xi.len() != d { xi.len() } else { eta.len() },
        });
    }
    if u.len() != algebra.spinor_dim() {
        return Err(Error::DimensionMismatch {
            what: "spinor",
            expected: algebra.spinor_dim(),
            found: u.len(),
        });
    }
    let u = CVector::from_column_slice(u);
    let u_norm = u.norm();
    if u_norm == 0.0 {
        return Err(Error::InvalidParameter {
            name: "u",
            reason: "must be nonzero".into(),
        });
    }
    let zeta: Vec<Complex64> = xi.iter().zip(eta).map(|(&x, &e)| c64(x, e)).collect();
    let generator = algebra.symbol(params, &zeta)? * (-I * rho);
    let image = expm(&generator) * &u;
    let eta_norm = eta.iter().map(|e| e * e).sum::<f64>().sqrt();
    let bound = (rho.abs() * params.c() * eta_norm * algebra.lambda_max()).exp() * u_norm;
    Ok(bound - image.norm())
}
