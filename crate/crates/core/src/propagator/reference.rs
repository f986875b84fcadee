use num_complex::Complex64;
use rayon::prelude::*;

use super::grid::{Grid, SpinorField};
use super::kernel::{check_field, FreeMultiplier};
use crate::action::ActionContext;
use crate::algebra::{unitary_exp, CMatrix};
use crate::error::{Error, Result};
use crate::fields::MAX_DIM;

/// Target sub-interval length of the default reference discretization.
pub const REFERENCE_SUBSTEP: f64 = 1e-3;

/// `ceil(|t_f - t_i| / 1e-3)`, at least 1.
pub fn default_substeps(t_i: f64, t_f: f64) -> usize {
    ((t_f - t_i).abs() / REFERENCE_SUBSTEP).ceil().max(1.0) as usize
}

/// `exp(-i theta H)` for a Hermitian `2 x 2` matrix, in closed form through
/// `H = a_0 I + a . sigma`.
fn exp_hermitian_2x2(h: [Complex64; 4], theta: f64) -> [Complex64; 4] {
    let a0 = 0.5 * (h[0].re + h[3].re);
    let az = 0.5 * (h[0].re - h[3].re);
    let (ax, ay) = (h[1].re, -h[1].im);
    let r = (ax * ax + ay * ay + az * az).sqrt();
    let global = Complex64::from_polar(1.0, -theta * a0);
    let (c, s) = ((theta * r).cos(), (theta * r).sin());
    // sin(theta r) / r, finite as r -> 0.
    let sr = if r > 0.0 { s / r } else { theta };
    let mi = Complex64::new(0.0, -sr);
    [
        global * (Complex64::from(c) + mi * az),
        global * (mi * Complex64::new(ax, -ay)),
        global * (mi * Complex64::new(ax, ay)),
        global * (Complex64::from(c) - mi * az),
    ]
}

/// Multiplies every node by `exp(-i theta [-c alpha.A(t, x) + V(t, x)])`.
fn potential_half_step(ctx: &ActionContext, grid: &Grid, t: f64, theta: f64, f: &mut SpinorField) -> Result<()> {
    let pot = ctx.potential.evaluator();
    let n = f.spinor_dim();
    let d = grid.dim();
    let c = ctx.params.c();
    let with_a = !pot.vector_is_zero();
    let with_v = !pot.scalar_is_zero();
    if !with_a && !with_v {
        return Ok(());
    }
    let alphas = ctx.algebra.alphas();
    f.data_mut()
        .par_chunks_mut(n)
        .enumerate()
        .try_for_each(|(k, spinor)| -> Result<()> {
            let p = grid.point(k);
            let x = &p[..d];
            let v = if with_v { pot.scalar(t, x) } else { 0.0 };
            if !with_a {
                let z = Complex64::from_polar(1.0, -theta * v);
                spinor.iter_mut().for_each(|s| *s *= z);
                return Ok(());
            }
            let mut a = [0.0; MAX_DIM];
            pot.vector(t, x, &mut a[..d]);
            let mut h = CMatrix::identity(n, n) * Complex64::from(v);
            for (alpha, &aj) in alphas.iter().zip(&a[..d]) {
                h -= alpha * Complex64::from(c * aj);
            }
            let old: Vec<Complex64> = spinor.to_vec();
            if n == 2 {
                let u = exp_hermitian_2x2([h[(0, 0)], h[(0, 1)], h[(1, 0)], h[(1, 1)]], theta);
                spinor[0] = u[0] * old[0] + u[1] * old[1];
                spinor[1] = u[2] * old[0] + u[3] * old[1];
            } else {
                let u = unitary_exp(&h, theta)?;
                for r in 0..n {
                    spinor[r] = (0..n).map(|q| u[(r, q)] * old[q]).sum();
                }
            }
            Ok(())
        })
}

/// Strang-splitting solution of the Dirac equation from `t_i` to `t_f`,
/// independent of the path-integral construction.
///
/// Each of the `substeps` sub-intervals applies half of the pointwise
/// potential part at the sub-interval midpoint, the exact free step, and the
/// other half.
pub fn reference_solve(
    ctx: &ActionContext,
    grid: &Grid,
    t_i: f64,
    t_f: f64,
    f: &SpinorField,
    substeps: usize,
) -> Result<SpinorField> {
    if substeps == 0 {
        return Err(Error::InvalidParameter {
            name: "substeps",
            reason: "must be at least 1".into(),
        });
    }
    if ctx.dim() != grid.dim() {
        return Err(Error::DimensionMismatch {
            what: "grid dimension",
            expected: ctx.dim(),
            found: grid.dim(),
        });
    }
    check_field(&ctx.algebra, grid, f)?;
    let dt = (t_f - t_i) / substeps as f64;
    let free = FreeMultiplier::new(grid, &ctx.algebra, &ctx.params, dt)?;
    let mut current = f.clone();
    for j in 0..substeps {
        let mid = t_i + (j as f64 + 0.5) * dt;
        potential_half_step(ctx, grid, mid, 0.5 * dt, &mut current)?;
        current = free.apply(&current);
        potential_half_step(ctx, grid, mid, 0.5 * dt, &mut current)?;
    }
    Ok(current)
}
