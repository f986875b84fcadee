use std::collections::HashMap;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;

use super::division::TimeDivision;
use super::grid::{Grid, SpinorField};
use super::kernel::{check_field, FreeKernel, FreeMultiplier};
use crate::action::{ActionContext, PhasePath};
use crate::error::{Error, Result};

/// How a short-time step is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum StepRoute {
    /// Spectral multiplier when the potential vanishes, dense kernel
    /// otherwise.
    #[default]
    Auto,
    /// Offset kernel times the potential phase, `O(n^{2d})`.
    Dense,
    /// FFT multiplier, valid for `V = A = 0` only.
    Spectral,
}

/// Applies `G(t, s)` and compositions of it, caching the free kernel and
/// multiplier per step length.
#[derive(Debug)]
pub struct Propagator<'a> {
    ctx: &'a ActionContext,
    grid: &'a Grid,
    route: StepRoute,
    multipliers: HashMap<u64, Arc<FreeMultiplier>>,
    kernels: HashMap<u64, Arc<FreeKernel>>,
}

impl<'a> Propagator<'a> {
    pub fn new(ctx: &'a ActionContext, grid: &'a Grid) -> Result<Self> {
        Self::with_route(ctx, grid, StepRoute::Auto)
    }

    pub fn with_route(ctx: &'a ActionContext, grid: &'a Grid, route: StepRoute) -> Result<Self> {
        if ctx.dim() != grid.dim() {
            return Err(Error::DimensionMismatch {
                what: "grid dimension",
                expected: ctx.dim(),
                found: grid.dim(),
            });
        }
        if route == StepRoute::Spectral && !ctx.potential.is_free() {
            return Err(Error::InvalidParameter {
                name: "route",
                reason: "the spectral route requires V = A = 0".into(),
            });
        }
        Ok(Self {
            ctx,
            grid,
            route,
            multipliers: HashMap::new(),
            kernels: HashMap::new(),
        })
    }

    fn spectral(&self) -> bool {
        match self.route {
            StepRoute::Auto => self.ctx.potential.is_free(),
            StepRoute::Dense => false,
            StepRoute::Spectral => true,
        }
    }

    fn multiplier(&mut self, rho: f64) -> Result<Arc<FreeMultiplier>> {
        if let Some(m) = self.multipliers.get(&rho.to_bits()) {
            return Ok(m.clone());
        }
        let m = Arc::new(FreeMultiplier::new(self.grid, &self.ctx.algebra, &self.ctx.params, rho)?);
        self.multipliers.insert(rho.to_bits(), m.clone());
        Ok(m)
    }

    fn kernel(&mut self, rho: f64) -> Result<Arc<FreeKernel>> {
        if let Some(k) = self.kernels.get(&rho.to_bits()) {
            return Ok(k.clone());
        }
        let k = Arc::new(FreeKernel::from_multiplier(&*self.multiplier(rho)?));
        self.kernels.insert(rho.to_bits(), k.clone());
        Ok(k)
    }

    /// `G(t, s) f`.
    pub fn step(&mut self, t: f64, s: f64, f: &SpinorField) -> Result<SpinorField> {
        check_field(&self.ctx.algebra, self.grid, f)?;
        let rho = t - s;
        if self.spectral() {
            return Ok(self.multiplier(rho)?.apply(f));
        }
        let kernel = self.kernel(rho)?;
        Ok(dense_apply(self.ctx, self.grid, &kernel, self.ctx.phase_path, t, s, f))
    }

    /// `G(tau_nu, tau_{nu-1}) ... G(tau_1, tau_0) f`.
    pub fn compose(&mut self, division: &TimeDivision, f: &SpinorField) -> Result<SpinorField> {
        self.compose_observed(division, f, |_, _| {})
    }

    /// As [`Self::compose`], calling `observe(j, field)` after slice `j`.
    pub fn compose_observed(
        &mut self,
        division: &TimeDivision,
        f: &SpinorField,
        mut observe: impl FnMut(usize, &SpinorField),
    ) -> Result<SpinorField> {
        let mut current = f.clone();
        for (j, (t, s)) in division.slices().enumerate() {
            current = self.step(t, s, &current)?;
            observe(j, &current);
        }
        Ok(current)
    }
}

/// `(G f)(x_k) = h^d sum_l K0[k - l] w(t, s; x_k, y_l) f(y_l)`, with the
/// phase path chosen by `phase_path`.
fn dense_apply(
    ctx: &ActionContext,
    grid: &Grid,
    kernel: &FreeKernel,
    phase_path: PhasePath,
    t: f64,
    s: f64,
    f: &SpinorField,
) -> SpinorField {
    let n = f.spinor_dim();
    let d = grid.dim();
    let len = grid.len();
    let vol = grid.cell_volume();
    let support: Vec<usize> = (0..len).filter(|&l| f.at(l).iter().any(|z| *z != Complex64::new(0.0, 0.0))).collect();
    let mut out = vec![Complex64::new(0.0, 0.0); len * n];
    out.par_chunks_mut(n).enumerate().for_each(|(k, acc)| {
        for &l in &support {
            let (x, y) = match phase_path {
                PhasePath::Unwrapped => (grid.point(k), grid.point(l)),
                PhasePath::MinimalImage => grid.segment(k, l),
            };
            let w = Complex64::from_polar(1.0, ctx.phase_exponent(t, s, &x[..d], &y[..d]));
            let block = kernel.block(grid.offset(k, l));
            let fl = f.at(l);
            for a in 0..n {
                let mut v = Complex64::new(0.0, 0.0);
                for b in 0..n {
                    v += block[a * n + b] * fl[b];
                }
                acc[a] += v * w;
            }
        }
        acc.iter_mut().for_each(|z| *z *= vol);
    });
    SpinorField::from_data(grid, n, out).expect("consistent sizes")
}

/// One short-time step `G(t, s) f` with the default route.
pub fn short_time_step(ctx: &ActionContext, grid: &Grid, t: f64, s: f64, f: &SpinorField) -> Result<SpinorField> {
    Propagator::new(ctx, grid)?.step(t, s, f)
}

/// `K_{D Delta}(t_f, t_i) f` with the default route.
pub fn compose(ctx: &ActionContext, grid: &Grid, division: &TimeDivision, f: &SpinorField) -> Result<SpinorField> {
    Propagator::new(ctx, grid)?.compose(division, f)
}
