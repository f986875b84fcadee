use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Uniform periodic grid on `[-L, L)^d`, `d` in {1, 2}.
///
/// Nodes are `x_k = -L + k h` with `h = 2L / n`. Flat indices are row-major:
/// `k = k_1 n + k_2` in two dimensions.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    dim: usize,
    n: usize,
    half_width: f64,
}

pub const DEFAULT_POINTS_1D: usize = 256;
pub const DEFAULT_POINTS_2D: usize = 64;

impl Grid {
    pub fn new(dim: usize, n: usize, half_width: f64) -> Result<Self> {
        if !(1..=2).contains(&dim) {
            return Err(Error::UnsupportedDimension(dim));
        }
        if n < 2 || !n.is_power_of_two() {
            return Err(Error::InvalidParameter {
                name: "n",
                reason: format!("must be a power of two >= 2, got {n}"),
            });
        }
        if !(half_width.is_finite() && half_width > 0.0) {
            return Err(Error::InvalidParameter {
                name: "half_width",
                reason: format!("must be positive, got {half_width}"),
            });
        }
        Ok(Self { dim, n, half_width })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn h(&self) -> f64 {
        2.0 * self.half_width / self.n as f64
    }

    /// `h^d`, the quadrature weight of one node.
    pub fn cell_volume(&self) -> f64 {
        self.h().powi(self.dim as i32)
    }

    /// Number of nodes, `n^d`.
    pub fn len(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn coord(&self, i: usize) -> f64 {
        -self.half_width + i as f64 * self.h()
    }

    /// Endpoints `(x, y)` of the shortest periodic segment joining node `l`
    /// to node `k`, translated so that its midpoint lies in `[-L, L)^d`.
    ///
    /// Away from the seam these are the nodes themselves. Swapping `k` and
    /// `l` yields the same segment reversed, exactly.
    pub fn segment(&self, k: usize, l: usize) -> ([f64; 2], [f64; 2]) {
        let (ak, al) = (self.axes(k), self.axes(l));
        let n = self.n as i64;
        let mut x = [0.0; 2];
        let mut y = [0.0; 2];
        for j in 0..self.dim {
            let a = ak[j] as i64;
            let mut delta = a - al[j] as i64;
            if delta > n / 2 {
                delta -= n;
            } else if delta < -n / 2 {
                delta += n;
            }
            let b = a - delta;
            let shift = match a + b {
                s if s < 0 => n,
                s if s >= 2 * n => -n,
                _ => 0,
            };
            x[j] = -self.half_width + (a + shift) as f64 * self.h();
            y[j] = -self.half_width + (b + shift) as f64 * self.h();
        }
        (x, y)
    }

    /// Per-axis indices of flat index `k`.
    pub fn axes(&self, k: usize) -> [usize; 2] {
        if self.dim == 1 {
            [k, 0]
        } else {
            [k / self.n, k % self.n]
        }
    }

    pub fn flat(&self, axes: [usize; 2]) -> usize {
        if self.dim == 1 {
            axes[0]
        } else {
            axes[0] * self.n + axes[1]
        }
    }

    /// Coordinates of node `k` in the first `d` slots.
    pub fn point(&self, k: usize) -> [f64; 2] {
        let a = self.axes(k);
        let mut p = [self.coord(a[0]), 0.0];
        if self.dim == 2 {
            p[1] = self.coord(a[1]);
        }
        p
    }

    /// Angular frequency `(pi / L) m` of DFT index `i`, with `m` the signed
    /// representative in `[-n/2, n/2)`.
    pub fn frequency(&self, i: usize) -> f64 {
        let m = if i < self.n / 2 {
            i as f64
        } else {
            i as f64 - self.n as f64
        };
        PI / self.half_width * m
    }

    /// Momentum node of flat DFT index `k`.
    pub fn momentum(&self, k: usize) -> [f64; 2] {
        let a = self.axes(k);
        let mut p = [self.frequency(a[0]), 0.0];
        if self.dim == 2 {
            p[1] = self.frequency(a[1]);
        }
        p
    }

    /// Flat index of the periodic offset `k - l`.
    pub fn offset(&self, k: usize, l: usize) -> usize {
        let (a, b) = (self.axes(k), self.axes(l));
        let n = self.n;
        self.flat([(a[0] + n - b[0]) % n, (a[1] + n - b[1]) % n])
    }
}

/// Complex `N`-component spinor samples on a grid, stored node-major:
/// component `a` of node `k` is `data[k * N + a]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpinorField {
    grid: Grid,
    spinor_dim: usize,
    data: Vec<Complex64>,
}

impl SpinorField {
    pub fn zeros(grid: &Grid, spinor_dim: usize) -> Self {
        Self {
            grid: grid.clone(),
            spinor_dim,
            data: vec![Complex64::new(0.0, 0.0); grid.len() * spinor_dim],
        }
    }

    pub fn from_data(grid: &Grid, spinor_dim: usize, data: Vec<Complex64>) -> Result<Self> {
        if spinor_dim == 0 || data.len() != grid.len() * spinor_dim {
            return Err(Error::DimensionMismatch {
                what: "field data",
                expected: grid.len() * spinor_dim,
                found: data.len(),
            });
        }
        Ok(Self {
            grid: grid.clone(),
            spinor_dim,
            data,
        })
    }

    /// Samples `f(x_k)`; the closure writes the `N` components.
    pub fn from_fn(grid: &Grid, spinor_dim: usize, mut f: impl FnMut(&[f64], &mut [Complex64])) -> Self {
        let mut out = Self::zeros(grid, spinor_dim);
        let d = grid.dim();
        for k in 0..grid.len() {
            let p = grid.point(k);
            f(&p[..d], &mut out.data[k * spinor_dim..(k + 1) * spinor_dim]);
        }
        out
    }

    /// `spinor * exp(-|x - center|^2 / (2 width^2) + i momentum . x)`, set to
    /// zero outside the ball of radius `cutoff` when given.
    pub fn gaussian(
        grid: &Grid,
        center: &[f64],
        width: f64,
        cutoff: Option<f64>,
        spinor: &[Complex64],
        momentum: &[f64],
    ) -> Result<Self> {
        let d = grid.dim();
        if center.len() != d || momentum.len() != d {
            return Err(Error::DimensionMismatch {
                what: "gaussian center/momentum",
                expected: d,
                found: if center.len() != d { center.len() } else { momentum.len() },
            });
        }
        if !(width > 0.0) {
            return Err(Error::InvalidParameter {
                name: "width",
                reason: "must be positive".into(),
            });
        }
        if spinor.is_empty() || spinor.iter().all(|z| z.norm() == 0.0) {
            return Err(Error::InvalidParameter {
                name: "spinor",
                reason: "must be a nonzero vector".into(),
            });
        }
        let n = spinor.len();
        let field = Self::from_fn(grid, n, |x, out| {
            let r2: f64 = x.iter().zip(center).map(|(x, c)| (x - c) * (x - c)).sum();
            if cutoff.is_some_and(|r| r2 > r * r) {
                out.fill(Complex64::new(0.0, 0.0));
                return;
            }
            let phase: f64 = x.iter().zip(momentum).map(|(x, k)| x * k).sum();
            let amp = Complex64::from_polar((-r2 / (2.0 * width * width)).exp(), phase);
            for (o, s) in out.iter_mut().zip(spinor) {
                *o = amp * s;
            }
        });
        if field.norm() == 0.0 {
            return Err(Error::InvalidParameter {
                name: "cutoff",
                reason: "initial state vanishes on the grid".into(),
            });
        }
        Ok(field)
    }

    /// `exp(i xi_m . x) u` for integer mode `m` (components in `[-n/2, n/2)`).
    pub fn plane_wave(grid: &Grid, mode: &[i64], spinor: &[Complex64]) -> Result<Self> {
        let d = grid.dim();
        if mode.len() != d {
            return Err(Error::DimensionMismatch {
                what: "plane-wave mode",
                expected: d,
                found: mode.len(),
            });
        }
        let half = (grid.n() / 2) as i64;
        if mode.iter().any(|&m| m < -half || m >= half) {
            return Err(Error::InvalidParameter {
                name: "mode",
                reason: format!("components must lie in [-{half}, {half})"),
            });
        }
        let k: Vec<f64> = mode.iter().map(|&m| PI / grid.half_width() * m as f64).collect();
        Ok(Self::from_fn(grid, spinor.len(), |x, out| {
            let phase: f64 = x.iter().zip(&k).map(|(x, k)| x * k).sum();
            let e = Complex64::from_polar(1.0, phase);
            for (o, s) in out.iter_mut().zip(spinor) {
                *o = e * s;
            }
        }))
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn spinor_dim(&self) -> usize {
        self.spinor_dim
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<Complex64> {
        self.data
    }

    /// Spinor at node `k`.
    pub fn at(&self, k: usize) -> &[Complex64] {
        &self.data[k * self.spinor_dim..(k + 1) * self.spinor_dim]
    }

    /// `|f(x_k)|^2`.
    pub fn density(&self, k: usize) -> f64 {
        self.at(k).iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.grid.cell_volume() * self.data.iter().map(|z| z.norm_sqr()).sum::<f64>()
    }

    /// `(h^d sum_k |f(x_k)|^2)^(1/2)`.
    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    /// `h^d sum_k <f(x_k), g(x_k)>`, antilinear in `self`.
    pub fn inner(&self, other: &Self) -> Complex64 {
        let s: Complex64 = self.data.iter().zip(&other.data).map(|(a, b)| a.conj() * b).sum();
        s * self.grid.cell_volume()
    }

    /// `||self - other||`.
    pub fn distance(&self, other: &Self) -> f64 {
        let s: f64 = self.data.iter().zip(&other.data).map(|(a, b)| (a - b).norm_sqr()).sum();
        (self.grid.cell_volume() * s).sqrt()
    }

    pub fn scale(&mut self, factor: Complex64) {
        self.data.iter_mut().for_each(|z| *z *= factor);
    }

    /// Multiplies node `k` by the scalar `phase(x_k)`.
    pub fn multiply_pointwise(&mut self, mut phase: impl FnMut(&[f64]) -> Complex64) {
        let d = self.grid.dim();
        let n = self.spinor_dim;
        for k in 0..self.grid.len() {
            let p = self.grid.point(k);
            let z = phase(&p[..d]);
            self.data[k * n..(k + 1) * n].iter_mut().for_each(|v| *v *= z);
        }
    }

    pub fn is_compatible(&self, other: &Self) -> bool {
        self.grid == other.grid && self.spinor_dim == other.spinor_dim
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn segments_are_short_and_symmetric() {
        for dim in [1, 2] {
            let g = Grid::new(dim, 8, 2.0).unwrap();
            for k in 0..g.len() {
                for l in 0..g.len() {
                    let (x, y) = g.segment(k, l);
                    let (y2, x2) = g.segment(l, k);
                    assert_eq!((x, y), (x2, y2));
                    for j in 0..dim {
                        assert!((x[j] - y[j]).abs() <= g.half_width() + 1e-12);
                        let mid = 0.5 * (x[j] + y[j]);
                        assert!((-2.0..2.0).contains(&mid));
                    }
                    // Off the seam the endpoints are the nodes.
                    let (pk, pl) = (g.point(k), g.point(l));
                    if (0..dim).all(|j| (pk[j] - pl[j]).abs() <= g.half_width()) {
                        assert_eq!((x, y), (pk, pl));
                    }
                }
            }
        }
    }

    #[test]
    fn grid_validation() {
        assert!(Grid::new(1, 100, 1.0).is_err());
        assert!(Grid::new(3, 8, 1.0).is_err());
        assert!(Grid::new(1, 8, 0.0).is_err());
        let g = Grid::new(2, 8, 2.0).unwrap();
        assert_eq!(g.len(), 64);
        assert_eq!(g.h(), 0.5);
        assert_eq!(g.cell_volume(), 0.25);
        assert_eq!(g.point(9), [-1.5, -1.5]);
        assert_eq!(g.axes(g.flat([3, 5])), [3, 5]);
    }

    #[test]
    fn frequencies_are_dft_frequencies() {
        let g = Grid::new(1, 8, 2.0).unwrap();
        let f: Vec<f64> = (0..8).map(|i| g.frequency(i) * 2.0 / PI).collect();
        assert_eq!(f, vec![0., 1., 2., 3., -4., -3., -2., -1.]);
        // e^{i xi_m x_k} = e^{-i pi m} e^{2 pi i m k / n}
        for m in 0..8 {
            for k in 0..8 {
                let direct = Complex64::from_polar(1.0, g.frequency(m) * g.coord(k));
                let signed = if m < 4 { m as f64 } else { m as f64 - 8.0 };
                let dft = Complex64::from_polar(1.0, -PI * signed + 2.0 * PI * (m * k) as f64 / 8.0);
                assert!((direct - dft).norm() < 1e-13);
            }
        }
    }

    #[test]
    fn offsets_wrap() {
        let g = Grid::new(2, 4, 1.0).unwrap();
        assert_eq!(g.offset(g.flat([0, 1]), g.flat([1, 3])), g.flat([3, 2]));
        let g1 = Grid::new(1, 4, 1.0).unwrap();
        assert_eq!(g1.offset(0, 3), 1);
    }

    #[test]
    fn plane_wave_norm() {
        let g = Grid::new(1, 16, 3.0).unwrap();
        let u = [Complex64::new(0.6, 0.0), Complex64::new(0.0, 0.8)];
        let f = SpinorField::plane_wave(&g, &[3], &u).unwrap();
        assert!((f.norm_sqr() - 6.0).abs() < 1e-13);
        assert!(SpinorField::plane_wave(&g, &[8], &u).is_err());
    }

    #[test]
    fn truncated_gaussian_has_compact_support() {
        let g = Grid::new(1, 64, 2.0).unwrap();
        let f = SpinorField::gaussian(&g, &[0.25], 0.1, Some(0.5), &[Complex64::new(1.0, 0.0)], &[0.0]).unwrap();
        for k in 0..g.len() {
            let x = g.point(k)[0];
            if (x - 0.25).abs() > 0.5 {
                assert_eq!(f.density(k), 0.0);
            }
        }
        assert!(f.norm() > 0.0);
    }
}
