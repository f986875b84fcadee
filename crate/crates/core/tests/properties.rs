//! Closed-form oracles and randomized invariants of the discrete propagator.

use feynman_dirac::action::ActionContext;
use feynman_dirac::algebra::{expm, lie_product, max_abs_entry, CMatrix, DiracAlgebra, PhysicalParams};
use feynman_dirac::fields::{ElectricGauge, GaugeFunction, Monomial, Polynomial, PotentialSpec};
use feynman_dirac::propagator::{Grid, Propagator, SpinorField, StepRoute, TimeDivision};
use feynman_dirac::validation::gauge_discrepancy;
use num_complex::Complex64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn ctx(pot: PotentialSpec) -> ActionContext {
    let d = pot.dim();
    ActionContext::new(DiracAlgebra::standard(d).unwrap(), PhysicalParams::new(1.0, 1.0).unwrap(), pot, 8).unwrap()
}

fn random_field(grid: &Grid, seed: u64) -> SpinorField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    SpinorField::from_fn(grid, 2, |_, out| {
        for o in out.iter_mut() {
            *o = Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        }
    })
}

/// With `alpha = sigma_x`, `beta = sigma_z` and `c = m = 1` the symbol at
/// wavenumber `k` is `[[1, k], [k, -1]]`, and `(1 + e, k)` is an eigenvector
/// for `e = +-sqrt(1 + k^2)`.
#[test]
fn plane_waves_pick_up_the_free_energy_phase() {
    let half_width = 3.0;
    let grid = Grid::new(1, 32, half_width).unwrap();
    let c = ctx(PotentialSpec::zero(1).unwrap());
    let div = TimeDivision::new(vec![0.0, 0.4, -0.3, 0.9]).unwrap();
    for mode in [-5_i64, 0, 3] {
        let k = std::f64::consts::PI * mode as f64 / half_width;
        for sign in [1.0, -1.0] {
            let e = sign * (1.0 + k * k).sqrt();
            let spinor = [Complex64::new(1.0 + e, 0.0), Complex64::new(k, 0.0)];
            if spinor.iter().all(|z| z.norm() < 1e-12) {
                continue;
            }
            let f = SpinorField::plane_wave(&grid, &[mode], &spinor).unwrap();
            let mut expected = f.clone();
            expected.scale(Complex64::from_polar(1.0, -e * 0.9));
            for route in [StepRoute::Dense, StepRoute::Spectral] {
                let out = Propagator::with_route(&c, &grid, route).unwrap().compose(&div, &f).unwrap();
                assert!(out.distance(&expected) <= 1e-11 * f.norm(), "mode {mode} sign {sign} {route:?}");
            }
        }
    }
}

#[test]
fn commuting_generators_have_no_lie_product_error() {
    let a = CMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![Complex64::new(0.0, 1.0), Complex64::new(0.0, -2.0)]));
    let b = CMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![Complex64::new(0.0, 0.5), Complex64::new(0.0, 3.0)]));
    let exact = expm(&(&a + &b));
    for n in [1, 3, 17] {
        assert!(max_abs_entry(&(lie_product(&a, &b, n).unwrap() - &exact)) <= 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn step_adjoint_in_inner_products(t in -1.0..1.0f64, s in -1.0..1.0f64, e in -2.0..2.0f64, seed in any::<u64>()) {
        let grid = Grid::new(1, 16, 3.0).unwrap();
        let c = ctx(PotentialSpec::constant_e(vec![e], ElectricGauge::Scalar).unwrap());
        let f = random_field(&grid, seed);
        let g = random_field(&grid, seed.wrapping_add(1));
        let mut p = Propagator::new(&c, &grid).unwrap();
        let lhs = p.step(t, s, &f).unwrap().inner(&g);
        let rhs = f.inner(&p.step(s, t, &g).unwrap());
        prop_assert!((lhs - rhs).norm() <= 1e-10 * f.norm() * g.norm());
    }

    #[test]
    fn free_compositions_are_isometric(times in prop::collection::vec(-0.5..0.5f64, 2..7), seed in any::<u64>()) {
        let div = TimeDivision::new(times).unwrap();
        prop_assume!(div.sigma() <= 1.0);
        let grid = Grid::new(1, 64, 4.0).unwrap();
        let c = ctx(PotentialSpec::zero(1).unwrap());
        let f = random_field(&grid, seed);
        let out = Propagator::new(&c, &grid).unwrap().compose(&div, &f).unwrap();
        prop_assert!((out.norm() / f.norm() - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn linear_gauge_functions_are_exact(a in -1.0..1.0f64, b in -1.0..1.0f64, cc in -1.0..1.0f64, nu in 1usize..6) {
        let grid = Grid::new(1, 64, 6.0).unwrap();
        let c = ctx(PotentialSpec::constant_e(vec![0.7], ElectricGauge::Scalar).unwrap());
        let f = SpinorField::gaussian(&grid, &[0.0], 0.6, None, &[Complex64::new(1.0, 0.0), Complex64::new(0.0, 1.0)], &[0.5]).unwrap();
        let psi = GaugeFunction::Polynomial(Polynomial::new(1, vec![
            Monomial { coef: a, t_pow: 0, x_pows: vec![1] },
            Monomial { coef: b, t_pow: 1, x_pows: vec![0] },
            Monomial { coef: cc, t_pow: 1, x_pows: vec![1] },
        ]).unwrap());
        let div = TimeDivision::uniform(0.0, 0.5, nu).unwrap();
        prop_assert!(gauge_discrepancy(&c, &grid, &div, &f, &psi).unwrap() <= 1e-9);
    }
}
