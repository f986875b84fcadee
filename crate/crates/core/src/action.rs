//! Straight space-time paths and the matrix-valued classical action along
//! them, together with its scalar electromagnetic phase factor.

use num_complex::Complex64;

use crate::algebra::{CMatrix, DiracAlgebra, PhysicalParams};
use crate::error::{Error, Result};
use crate::fields::{PotentialSpec, Quadrature, MAX_DIM};

/// Below this `|t - s|` the coincident-time action `(x - y) . xi` is used.
pub const COINCIDENT_TIME: f64 = 1e-15;

pub const DEFAULT_QUADRATURE_ORDER: usize = 8;

pub fn is_coincident(t: f64, s: f64) -> bool {
    (t - s).abs() < COINCIDENT_TIME
}

/// Which straight path the potential phase `w(t, s; x, y)` is integrated
/// along in the dense step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PhasePath {
    /// From node `y` to node `x` inside the fundamental cell. Gauge
    /// covariance holds exactly, also for non-periodic `psi`.
    #[default]
    Unwrapped,
    /// Along the shortest periodic segment (see
    /// [`crate::propagator::Grid::segment`]). Keeps pairs straddling the
    /// seam consistent with the periodic kernel, which long compositions
    /// need when the potential is large near the boundary.
    MinimalImage,
}

#[derive(Debug, Clone)]
pub struct ActionContext {
    pub algebra: DiracAlgebra,
    pub params: PhysicalParams,
    pub potential: PotentialSpec,
    pub quad: Quadrature,
    pub phase_path: PhasePath,
}

impl ActionContext {
    pub fn new(
        algebra: DiracAlgebra,
        params: PhysicalParams,
        potential: PotentialSpec,
        quadrature_order: usize,
    ) -> Result<Self> {
        if algebra.dim() != potential.dim() {
            return Err(Error::DimensionMismatch {
                what: "potential",
                expected: algebra.dim(),
                found: potential.dim(),
            });
        }
        Ok(Self {
            algebra,
            params,
            potential,
            quad: Quadrature::gauss_legendre(quadrature_order)?,
            phase_path: PhasePath::default(),
        })
    }

    pub fn dim(&self) -> usize {
        self.algebra.dim()
    }

    pub fn with_phase_path(mut self, phase_path: PhasePath) -> Self {
        self.phase_path = phase_path;
        self
    }

    /// Same context with a different potential.
    pub fn with_potential(&self, potential: PotentialSpec) -> Result<Self> {
        if potential.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                what: "potential",
                expected: self.dim(),
                found: potential.dim(),
            });
        }
        Ok(Self {
            potential,
            ..self.clone()
        })
    }

    /// Real exponent of the potential phase:
    /// `(x - y) . int_0^1 A(t - theta rho, x - theta (x - y)) - rho int_0^1 V(...)`.
    ///
    /// Zero at coincident times, where the action carries no potential terms.
    pub fn phase_exponent(&self, t: f64, s: f64, x: &[f64], y: &[f64]) -> f64 {
        if is_coincident(t, s) {
            return 0.0;
        }
        let rho = t - s;
        let d = x.len();
        let pot = self.potential.evaluator();
        let with_v = !pot.scalar_is_zero();
        let with_a = !pot.vector_is_zero();
        if !with_v && !with_a {
            return 0.0;
        }
        let mut dx = [0.0; MAX_DIM];
        for j in 0..d {
            dx[j] = x[j] - y[j];
        }
        let mut p = [0.0; MAX_DIM];
        let mut a = [0.0; MAX_DIM];
        let (mut a_int, mut v_int) = (0.0, 0.0);
        for (th, w) in self.quad.pairs() {
            let tau = t - th * rho;
            for j in 0..d {
                p[j] = x[j] - th * dx[j];
            }
            if with_a {
                pot.vector(tau, &p[..d], &mut a[..d]);
                let dot: f64 = (0..d).map(|j| dx[j] * a[j]).sum();
                a_int += w * dot;
            }
            if with_v {
                v_int += w * pot.scalar(tau, &p[..d]);
            }
        }
        a_int - rho * v_int
    }

    /// `w(t, s; x, y)`, the unit-modulus electromagnetic factor of the kernel.
    pub fn potential_phase(&self, t: f64, s: f64, x: &[f64], y: &[f64]) -> Result<Complex64> {
        self.check_points(x, y)?;
        Ok(Complex64::from_polar(1.0, self.phase_exponent(t, s, x, y)))
    }

    /// `S(t, s; x, xi, y)`; Hermitian.
    pub fn action_matrix(&self, t: f64, s: f64, x: &[f64], y: &[f64], xi: &[f64]) -> Result<CMatrix> {
        self.check_points(x, y)?;
        if xi.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                what: "momentum",
                expected: self.dim(),
                found: xi.len(),
            });
        }
        let n = self.algebra.spinor_dim();
        let free_phase: f64 = x.iter().zip(y).zip(xi).map(|((x, y), k)| (x - y) * k).sum();
        let id = CMatrix::identity(n, n);
        if is_coincident(t, s) {
            return Ok(id * Complex64::from(free_phase));
        }
        let rho = t - s;
        let scalar = free_phase + self.phase_exponent(t, s, x, y);
        let symbol = self.algebra.symbol_real(&self.params, xi)?;
        Ok(id * Complex64::from(scalar) - symbol * Complex64::from(rho))
    }

    fn check_points(&self, x: &[f64], y: &[f64]) -> Result<()> {
        for v in [x, y] {
            if v.len() != self.dim() {
                return Err(Error::DimensionMismatch {
                    what: "point",
                    expected: self.dim(),
                    found: v.len(),
                });
            }
        }
        Ok(())
    }
}

/// `y + (theta - s)/(t - s) (x - y)`; `None` at coincident times, where the
/// path plays no role.
pub fn straight_path(t: f64, s: f64, x: &[f64], y: &[f64], theta: f64) -> Option<Vec<f64>> {
    if is_coincident(t, s) {
        return None;
    }
    let r = (theta - s) / (t - s);
    Some(x.iter().zip(y).map(|(x, y)| y + r * (x - y)).collect())
}
