use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};

use super::grid::{Grid, SpinorField};
use crate::algebra::{unitary_exp, DiracAlgebra, PhysicalParams};
use crate::error::{Error, Result};

/// Unnormalized `d`-dimensional DFT on a row-major `n^d` buffer.
#[derive(Clone)]
pub struct GridFft {
    dim: usize,
    n: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for GridFft {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("GridFft").field("dim", &self.dim).field("n", &self.n).finish()
    }
}

impl GridFft {
    pub fn new(grid: &Grid) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            dim: grid.dim(),
            n: grid.n(),
            forward: planner.plan_fft_forward(grid.n()),
            inverse: planner.plan_fft_inverse(grid.n()),
        }
    }

    /// `forward`: `sum_k e^{-2 pi i k.m/n} buf[k]`; inverse uses `e^{+...}`.
    pub fn transform(&self, buf: &mut [Complex64], forward: bool) {
        let plan = if forward { &self.forward } else { &self.inverse };
        let n = self.n;
        // Rows are contiguous; in 2D this covers the second axis.
        for row in buf.chunks_exact_mut(n) {
            plan.process(row);
        }
        if self.dim == 2 {
            let mut column = vec![Complex64::new(0.0, 0.0); n];
            for c in 0..n {
                for r in 0..n {
                    column[r] = buf[r * n + c];
                }
                plan.process(&mut column);
                for r in 0..n {
                    buf[r * n + c] = column[r];
                }
            }
        }
    }
}

fn check_spinor(algebra: &DiracAlgebra, grid: &Grid, f: &SpinorField) -> Result<()> {
    if f.grid() != grid {
        return Err(Error::DimensionMismatch {
            what: "field grid points",
            expected: grid.len(),
            found: f.grid().len(),
        });
    }
    if f.spinor_dim() != algebra.spinor_dim() {
        return Err(Error::DimensionMismatch {
            what: "spinor",
            expected: algebra.spinor_dim(),
            found: f.spinor_dim(),
        });
    }
    Ok(())
}

/// Diagonal-in-momentum free propagator `exp(-i rho (c alpha.xi + beta m c^2))`
/// sampled at every DFT momentum.
#[derive(Debug, Clone)]
pub struct FreeMultiplier {
    grid: Grid,
    spinor_dim: usize,
    rho: f64,
    /// `N x N` row-major block per momentum index.
    blocks: Vec<Complex64>,
    fft: GridFft,
}

impl FreeMultiplier {
    pub fn new(grid: &Grid, algebra: &DiracAlgebra, params: &PhysicalParams, rho: f64) -> Result<Self> {
        if algebra.dim() != grid.dim() {
            return Err(Error::DimensionMismatch {
                what: "grid dimension",
                expected: algebra.dim(),
                found: grid.dim(),
            });
        }
        let n = algebra.spinor_dim();
        let d = grid.dim();
        let per_point: Vec<Vec<Complex64>> = (0..grid.len())
            .into_par_iter()
            .map(|k| {
                let xi = grid.momentum(k);
                let h = algebra.symbol_real(params, &xi[..d])?;
                let u = unitary_exp(&h, rho)?;
                let mut block = Vec::with_capacity(n * n);
                for a in 0..n {
                    for b in 0..n {
                        block.push(u[(a, b)]);
                    }
                }
                Ok(block)
            })
            .collect::<Result<_>>()?;
        Ok(Self {
            grid: grid.clone(),
            spinor_dim: n,
            rho,
            blocks: per_point.concat(),
            fft: GridFft::new(grid),
        })
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// `N x N` row-major multiplier at momentum index `k`.
    pub fn block(&self, k: usize) -> &[Complex64] {
        let nn = self.spinor_dim * self.spinor_dim;
        &self.blocks[k * nn..(k + 1) * nn]
    }

    /// Split components into separate scalar grids.
    fn components(&self, f: &SpinorField) -> Vec<Vec<Complex64>> {
        let n = self.spinor_dim;
        (0..n)
            .map(|a| f.data().iter().skip(a).step_by(n).copied().collect())
            .collect()
    }

    /// Multiplies the DFT coefficients of `f` by the multiplier.
    pub fn apply(&self, f: &SpinorField) -> SpinorField {
        let n = self.spinor_dim;
        let len = self.grid.len();
        let mut comps = self.components(f);
        comps.par_iter_mut().for_each(|c| self.fft.transform(c, true));
        let mut mixed = vec![vec![Complex64::new(0.0, 0.0); len]; n];
        for k in 0..len {
            let b = self.block(k);
            for a in 0..n {
                let mut acc = Complex64::new(0.0, 0.0);
                for c in 0..n {
                    acc += b[a * n + c] * comps[c][k];
                }
                mixed[a][k] = acc;
            }
        }
        mixed.par_iter_mut().for_each(|c| self.fft.transform(c, false));
        let scale = 1.0 / len as f64;
        let mut data = vec![Complex64::new(0.0, 0.0); len * n];
        for (a, comp) in mixed.iter().enumerate() {
            for (k, v) in comp.iter().enumerate() {
                data[k * n + a] = v * scale;
            }
        }
        SpinorField::from_data(&self.grid, n, data).expect("consistent sizes")
    }
}

/// Offset-indexed free kernel
/// `K0[o] = (2L)^{-d} sum_b e^{i x_o . xi_b} exp(-i rho (c alpha.xi_b + beta m c^2))`,
/// obtained entrywise by an inverse DFT of the multiplier.
#[derive(Debug, Clone)]
pub struct FreeKernel {
    grid: Grid,
    spinor_dim: usize,
    rho: f64,
    blocks: Vec<Complex64>,
}

impl FreeKernel {
    pub fn from_multiplier(mult: &FreeMultiplier) -> Self {
        let grid = mult.grid.clone();
        let n = mult.spinor_dim;
        let len = grid.len();
        let scale = (2.0 * grid.half_width()).powi(-(grid.dim() as i32));
        let mut blocks = vec![Complex64::new(0.0, 0.0); len * n * n];
        let mut entry = vec![Complex64::new(0.0, 0.0); len];
        for a in 0..n {
            for b in 0..n {
                for (k, e) in entry.iter_mut().enumerate() {
                    *e = mult.block(k)[a * n + b];
                }
                mult.fft.transform(&mut entry, false);
                for (o, e) in entry.iter().enumerate() {
                    blocks[o * n * n + a * n + b] = e * scale;
                }
            }
        }
        Self {
            grid,
            spinor_dim: n,
            rho: mult.rho,
            blocks,
        }
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// `N x N` row-major kernel block at flat periodic offset `o`.
    pub fn block(&self, o: usize) -> &[Complex64] {
        let nn = self.spinor_dim * self.spinor_dim;
        &self.blocks[o * nn..(o + 1) * nn]
    }
}

/// Free kernel for step length `rho`.
pub fn free_kernel(grid: &Grid, algebra: &DiracAlgebra, params: &PhysicalParams, rho: f64) -> Result<FreeKernel> {
    Ok(FreeKernel::from_multiplier(&FreeMultiplier::new(grid, algebra, params, rho)?))
}

pub(crate) fn check_field(algebra: &DiracAlgebra, grid: &Grid, f: &SpinorField) -> Result<()> {
    check_spinor(algebra, grid, f)
}
