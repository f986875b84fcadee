//! Acceptance suite: the twelve criteria at their stated tolerances, one
//! PASS/FAIL line each.
//!
//! Two criteria fail on their merits and are reported as FAIL:
//!
//! * 4: `(x - z).(Psi - Psi')` equals the flux of `B(s)` through the
//!   triangle `(z, y, x)` exactly, so the identity holds only when that flux
//!   vanishes. It fails for the curl variant of `time_ramped_A` and passes for
//!   every curl-free family.
//! * 8: in d = 1 the magnetic field vanishes identically and, for the
//!   constant electric field, the dense step coincides with a Strang step,
//!   so the local error is `O(rho^3)` and the slope is 3, outside
//!   `[1.8, 2.2]`. The second-order local error does show up once `B != 0`
//!   (d = 2, constant_B).
//!
//! For those two the test asserts the analysed behaviour instead, so a
//! change in either direction is noticed.

use std::path::Path;
use std::time::{Duration, Instant};

use feynman_dirac::action::ActionContext;
use feynman_dirac::algebra::{
    expm, growth_bound_margin, lie_product, max_abs_entry, pauli_x, CMatrix, DiracAlgebra, PhysicalParams,
};
use feynman_dirac::config::parse_config_str;
use feynman_dirac::fields::{
    psi_prime_vector, psi_vector, triangle_flux, ElectricGauge, GaugeFunction, Monomial, Polynomial, PotentialSpec,
};
use feynman_dirac::propagator::{Grid, Propagator, SpinorField, StepRoute, TimeDivision};
use feynman_dirac::validation::{
    adjoint_report, causality_report, convergence_report, gauge_report, local_error_report, log_log_slope,
    psi_samples, unitarity_report, CausalitySetup, ConvergenceTolerances, UnitarityTolerances,
};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const SEED: u64 = 0x00AC_CE97;

struct Outcome {
    id: u32,
    title: &'static str,
    passed: bool,
    detail: String,
    elapsed: Duration,
    budget: Duration,
    /// Set for criteria that fail on their merits; the closure result says
    /// whether the analysed behaviour was observed.
    known_red: Option<(&'static str, bool)>,
}

impl Outcome {
    fn within_budget(&self) -> bool {
        self.elapsed <= self.budget
    }

    fn green(&self) -> bool {
        self.passed && self.within_budget()
    }

    fn line(&self) -> String {
        let verdict = if self.green() { "PASS" } else { "FAIL" };
        let mut s = format!(
            "[{verdict}] {:>2} {}: {} ({:.2} s, budget {} s)",
            self.id,
            self.title,
            self.detail,
            self.elapsed.as_secs_f64(),
            self.budget.as_secs()
        );
        if let Some((why, _)) = self.known_red {
            s.push_str(&format!("\n           analysis: {why}"));
        }
        s
    }
}

fn c64(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn ctx(pot: PotentialSpec) -> ActionContext {
    let d = pot.dim();
    ActionContext::new(DiracAlgebra::standard(d).unwrap(), PhysicalParams::new(1.0, 1.0).unwrap(), pot, 8).unwrap()
}

fn unit_bump(grid: &Grid, width: f64) -> SpinorField {
    let d = grid.dim();
    let spinor = [c64(1.0, 0.0), c64(0.0, 0.5)];
    let mut f = SpinorField::gaussian(grid, &vec![0.0; d], width, None, &spinor, &vec![1.0; d]).unwrap();
    let n = f.norm();
    f.scale(Complex64::from(1.0 / n));
    f
}

fn diag_non_clifford() -> DiracAlgebra {
    let alpha = CMatrix::from_row_slice(2, 2, &[c64(2.0, 0.0), c64(0.0, 0.0), c64(0.0, 0.0), c64(-1.0, 0.0)]);
    DiracAlgebra::custom(vec![alpha], CMatrix::zeros(2, 2)).unwrap()
}

fn criterion_1() -> (bool, String) {
    let mut worst: f64 = 0.0;
    let mut ok = true;
    for d in 1..=3 {
        let alg = DiracAlgebra::standard(d).unwrap();
        worst = worst.max(alg.clifford_deviation());
        ok &= alg.is_clifford() && alg.lambda_max() == 1.0;
    }
    (ok && worst <= 1e-12, format!("max anticommutator deviation {worst:.2e}, lambda_max = 1 exactly: {ok}"))
}

fn criterion_2() -> (bool, String) {
    let params = PhysicalParams::new(1.0, 1.0).unwrap();
    // diag(2, -1) with a beta that does not anticommute with it.
    let non_clifford = DiracAlgebra::custom(diag_non_clifford().alphas().to_vec(), pauli_x()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let mut worst = f64::INFINITY;
    for alg in [DiracAlgebra::standard(1).unwrap(), non_clifford] {
        for _ in 0..1000 {
            let rho = rng.random_range(-2.0..2.0);
            let xi = [rng.random_range(-4.0..4.0)];
            let eta = [rng.random_range(-2.0..2.0)];
            let u = [c64(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)), c64(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))];
            worst = worst.min(growth_bound_margin(&alg, &params, rho, &xi, &eta, &u).unwrap());
        }
    }
    (worst >= -1e-10, format!("min margin {worst:.3e} over 2 x 1000 samples (>= -1e-10)"))
}

fn random_anti_hermitian(rng: &mut ChaCha8Rng, n: usize) -> CMatrix {
    let m = CMatrix::from_fn(n, n, |_, _| c64(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
    (&m - m.adjoint()) * Complex64::from(0.5)
}

fn criterion_3() -> (bool, String) {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED + 3);
    let ns = [8usize, 16, 32, 64];
    let mut worst = f64::INFINITY;
    for _ in 0..20 {
        let a = random_anti_hermitian(&mut rng, 4);
        let b = random_anti_hermitian(&mut rng, 4);
        let exact = expm(&(&a + &b));
        let errs: Vec<f64> = ns
            .iter()
            .map(|&n| max_abs_entry(&(lie_product(&a, &b, n).unwrap() - &exact)))
            .collect();
        let xs: Vec<f64> = ns.iter().map(|&n| n as f64).collect();
        worst = worst.min(-log_log_slope(&xs, &errs));
    }
    (worst >= 0.9, format!("min observed order {worst:.3} over 20 pairs (>= 0.9)"))
}

/// Returns (passed, detail, analysed behaviour observed).
fn criterion_4() -> (bool, String, bool) {
    let families: Vec<(&str, PotentialSpec)> = vec![
        ("constant_E vector d=1", PotentialSpec::constant_e(vec![0.8], ElectricGauge::Vector).unwrap()),
        ("constant_E vector d=2", PotentialSpec::constant_e(vec![0.8, -0.3], ElectricGauge::Vector).unwrap()),
        ("time_ramped_A d=1", PotentialSpec::time_ramped_a(1.3, vec![1.0], 0.0).unwrap()),
        ("time_ramped_A d=2", PotentialSpec::time_ramped_a(1.3, vec![0.6, -0.8], 0.0).unwrap()),
        ("time_ramped_A d=2 curl", PotentialSpec::time_ramped_a(1.3, vec![0.6, -0.8], 0.7).unwrap()),
    ];
    let quad = feynman_dirac::fields::Quadrature::gauss_legendre(8).unwrap();
    let mut all_pass = true;
    let mut analysis_holds = true;
    let mut parts = Vec::new();
    for (label, pot) in &families {
        let mut worst: f64 = 0.0;
        let mut worst_flux_gap: f64 = 0.0;
        for s in psi_samples(pot.dim(), 500, SEED + 4, 1.0, 1.0) {
            let psi = psi_vector(pot, &quad, s.t, s.s, &s.x, &s.y, &s.z).unwrap();
            let psi_p = psi_prime_vector(pot, &quad, s.t, s.s, &s.x, &s.y, &s.z).unwrap();
            let r: f64 = (0..pot.dim()).map(|j| (s.x[j] - s.z[j]) * (psi[j] - psi_p[j])).sum();
            worst = worst.max(r.abs());
            // Independent closed form of the flux for this family:
            // B_12(s) = rate * s * curl, so the flux is (B/2)(x - z) ^ (y - z).
            let flux = if pot.dim() == 2 {
                let b = 1.3 * s.s * if label.ends_with("curl") { 0.7 } else { 0.0 };
                0.5 * b * ((s.x[0] - s.z[0]) * (s.y[1] - s.z[1]) - (s.x[1] - s.z[1]) * (s.y[0] - s.z[0]))
            } else {
                0.0
            };
            let lib_flux = triangle_flux(pot, &quad, s.s, &s.x, &s.y, &s.z).unwrap();
            worst_flux_gap = worst_flux_gap.max((r - flux).abs()).max((lib_flux - flux).abs());
        }
        let pass = worst <= 1e-8;
        all_pass &= pass;
        analysis_holds &= worst_flux_gap <= 1e-10 && (pass != label.ends_with("curl"));
        parts.push(format!("{label}: {worst:.1e}"));
    }
    (all_pass, format!("max residual per family [{}] (<= 1e-8)", parts.join("; ")), analysis_holds)
}

fn criterion_5() -> (bool, String) {
    let mut worst_id: f64 = 0.0;
    let g1 = Grid::new(1, 256, 8.0).unwrap();
    let g2 = Grid::new(2, 32, 4.0).unwrap();
    for (grid, pot) in [
        (&g1, PotentialSpec::constant_e(vec![0.7], ElectricGauge::Scalar).unwrap()),
        (&g1, PotentialSpec::harmonic_v(1.0, vec![0.2]).unwrap()),
        (&g2, PotentialSpec::constant_b(1.0).unwrap()),
    ] {
        let c = ctx(pot);
        let f = unit_bump(grid, 0.6);
        for s in [-0.4, 0.0, 0.3] {
            let g = Propagator::new(&c, grid).unwrap().step(s, s, &f).unwrap();
            worst_id = worst_id.max(g.distance(&f));
        }
    }
    let mut worst_route: f64 = 0.0;
    for grid in [&g1, &g2] {
        let c = ctx(PotentialSpec::zero(grid.dim()).unwrap());
        let f = unit_bump(grid, 0.6);
        for (t, s) in [(0.3, 0.1), (-0.2, 0.5), (1.0, 0.0)] {
            let dense = Propagator::with_route(&c, grid, StepRoute::Dense).unwrap().step(t, s, &f).unwrap();
            let spectral = Propagator::with_route(&c, grid, StepRoute::Spectral).unwrap().step(t, s, &f).unwrap();
            worst_route = worst_route.max(dense.distance(&spectral));
        }
    }
    (
        worst_id <= 1e-12 && worst_route <= 1e-10,
        format!("||G(s,s)f - f|| max {worst_id:.1e} (<= 1e-12); dense vs spectral {worst_route:.1e} (<= 1e-10)"),
    )
}

fn criterion_6() -> (bool, String) {
    let grid = Grid::new(1, 32, 4.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(SEED + 6);
    let pairs: Vec<(f64, f64)> = (0..5).map(|_| (rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect();
    let three = TimeDivision::new(vec![0.1, 0.6, 0.25, 0.45]).unwrap();
    let mut worst: f64 = 0.0;
    let mut ok = true;
    for pot in [
        PotentialSpec::constant_e(vec![1.0], ElectricGauge::Scalar).unwrap(),
        PotentialSpec::harmonic_v(1.0, vec![0.0]).unwrap(),
        PotentialSpec::time_ramped_a(1.0, vec![1.0], 0.0).unwrap(),
    ] {
        let r = adjoint_report(&ctx(pot), &grid, &pairs, Some(&three), &[]).unwrap();
        for c in &r.checks {
            worst = worst.max(c.measured);
            ok &= c.passed;
        }
    }
    (ok && worst <= 1e-10, format!("max ||M(t,s)^H - M(s,t)|| {worst:.1e} over 5 pairs + 3-slice division, 3 families (<= 1e-10)"))
}

fn criterion_7() -> (bool, String) {
    // Free case: uniform and zig-zag divisions, all with sigma <= 1.
    let g1 = Grid::new(1, 256, 8.0).unwrap();
    let free = ctx(PotentialSpec::zero(1).unwrap());
    let f1 = unit_bump(&g1, 0.5);
    let mut free_divs: Vec<TimeDivision> = [1, 4, 16, 64].iter().map(|&n| TimeDivision::uniform(0.0, 1.0, n).unwrap()).collect();
    free_divs.push(TimeDivision::zigzag(-0.1, 0.1, 0.3, 1).unwrap());
    free_divs.push(TimeDivision::zigzag(-0.1, 0.1, 0.3, 2).unwrap());
    free_divs.push(TimeDivision::zigzag(-0.25, 0.25, 0.5, 4).unwrap());
    free_divs.push(TimeDivision::zigzag(-0.25, 0.25, 0.5, 8).unwrap());
    let mut free_dev: f64 = 0.0;
    for d in &free_divs {
        assert!(d.sigma() <= 1.0);
        let out = Propagator::new(&free, &g1).unwrap().compose(d, &f1).unwrap();
        free_dev = free_dev.max((out.norm() / f1.norm() - 1.0).abs());
    }
    // Interacting case: constant magnetic field in d = 2.
    let g2 = Grid::new(2, 32, 4.0).unwrap();
    let mag = ctx(PotentialSpec::constant_b(1.0).unwrap());
    let f2 = unit_bump(&g2, 0.6);
    let ladder: Vec<TimeDivision> = [4, 8, 16, 32, 64].iter().map(|&n| TimeDivision::uniform(0.0, 1.0, n).unwrap()).collect();
    let r = unitarity_report(&mag, &g2, &ladder, &f2, &UnitarityTolerances::default()).unwrap();
    let ratios: Vec<String> = r
        .checks
        .iter()
        .filter(|c| c.name.starts_with("log_ratio"))
        .map(|c| format!("{:.3}", c.measured))
        .collect();
    // d = 1 constant_E for reference: every step is exactly unitary.
    let ce = ctx(PotentialSpec::constant_e(vec![1.0], ElectricGauge::Scalar).unwrap());
    let e_dev = ladder
        .iter()
        .map(|d| {
            let out = Propagator::new(&ce, &g1).unwrap().compose(d, &f1).unwrap();
            (out.norm() - 1.0).abs()
        })
        .fold(0.0, f64::max);
    (
        free_dev <= 1e-12 && r.passed() && ratios.len() == 4,
        format!(
            "free |r-1| max {free_dev:.1e} (<= 1e-12) over {} divisions; constant_B d=2 successive |log r| ratios [{}] (in [1.6, 2.4]); constant_E d=1 |r-1| {e_dev:.1e}",
            free_divs.len(),
            ratios.join(", ")
        ),
    )
}

/// Returns (passed, detail, analysed behaviour observed).
fn criterion_8() -> (bool, String, bool) {
    let rhos = [0.1, 0.05, 0.025, 0.0125];
    let g1 = Grid::new(1, 256, 8.0).unwrap();
    let ce = ctx(PotentialSpec::constant_e(vec![1.0], ElectricGauge::Scalar).unwrap());
    let r1 = local_error_report(&ce, &g1, 0.0, &unit_bump(&g1, 0.5), &rhos, (1.8, 2.2), 200).unwrap();
    let slope1 = r1.checks[0].measured;
    let g2 = Grid::new(2, 32, 4.0).unwrap();
    let cb = ctx(PotentialSpec::constant_b(1.0).unwrap());
    let r2 = local_error_report(&cb, &g2, 0.0, &unit_bump(&g2, 0.6), &rhos, (1.8, 2.2), 200).unwrap();
    let slope2 = r2.checks[0].measured;
    (
        r1.passed(),
        format!("constant_E d=1 slope {slope1:.3} (in [1.8, 2.2]); supplementary constant_B d=2 slope {slope2:.3}"),
        (2.8..=3.2).contains(&slope1) && r2.passed(),
    )
}

fn criterion_9() -> (bool, String) {
    let grid = Grid::new(1, 256, 8.0).unwrap();
    let c = ctx(PotentialSpec::constant_e(vec![1.0], ElectricGauge::Scalar).unwrap());
    let f = unit_bump(&grid, 0.5);
    let ladder: Vec<TimeDivision> = [4, 8, 16, 32, 64].iter().map(|&n| TimeDivision::uniform(-0.25, 0.25, n).unwrap()).collect();
    let zz: Vec<TimeDivision> = [2, 4, 8].iter().map(|&n| TimeDivision::zigzag(-0.25, 0.25, 0.5, n).unwrap()).collect();
    let r = convergence_report(&c, &grid, &f, &ladder, &zz, None, &ConvergenceTolerances::default()).unwrap();
    let get = |n: &str| r.check(n).map(|c| c.measured).unwrap_or(f64::NAN);
    let zz_errs: Vec<String> = r
        .series("error_ladder")
        .unwrap()
        .rows
        .iter()
        .filter(|row| row[0] == 1.0)
        .map(|row| format!("{:.2e}", row[3]))
        .collect();
    let limit = r.check("limit_agreement").unwrap();
    (
        r.passed(),
        format!(
            "uniform order {:.3} (>= 0.9); zig-zag errors [{}] monotone; limit gap {:.2e} <= 5 x finest zig-zag error = {:.2e}",
            get("uniform_order"),
            zz_errs.join(", "),
            limit.measured,
            match limit.relation {
                feynman_dirac::validation::Relation::AtMost(b) => b,
                _ => f64::NAN,
            }
        ),
    )
}

fn criterion_10() -> (bool, String) {
    let grid = Grid::new(1, 256, 8.0).unwrap();
    let c = ctx(PotentialSpec::constant_e(vec![1.0], ElectricGauge::Scalar).unwrap());
    let f = unit_bump(&grid, 0.5);
    let div = TimeDivision::uniform(0.0, 1.0, 16).unwrap();
    let poly = |t_pow, x: u32| {
        GaugeFunction::Polynomial(Polynomial::new(1, vec![Monomial { coef: 1.0, t_pow, x_pows: vec![x] }]).unwrap())
    };
    let psis = vec![("x1".to_string(), poly(0, 1)), ("t".to_string(), poly(1, 0)), ("t_x1".to_string(), poly(1, 1))];
    let r = gauge_report(&c, &grid, &div, &f, &psis, 1e-9, 1e-9).unwrap();
    let parts: Vec<String> = r.checks.iter().map(|c| format!("{} {:.1e}", c.name, c.measured)).collect();
    (r.passed(), format!("{} (<= 1e-9)", parts.join(", ")))
}

fn criterion_11() -> (bool, String) {
    let grid = Grid::new(1, 256, 4.0).unwrap();
    let h = grid.h();
    let radius = 0.5;
    let div = TimeDivision::uniform(0.0, 1.0, 64).unwrap();
    let setup = CausalitySetup {
        center: vec![0.0],
        radius,
        eps_tail: 1e-8,
        margin: Some(3.0 * h),
        record_every: 8,
        expect_escape_unit_cone: false,
    };
    let bump = |spinor: &[Complex64]| SpinorField::gaussian(&grid, &[0.0], radius / 6.0, Some(radius), spinor, &[0.0]).unwrap();
    let clifford = ctx(PotentialSpec::zero(1).unwrap());
    let r1 = causality_report(&clifford, &grid, &div, &bump(&[c64(1.0, 0.0), c64(0.0, 0.0)]), &setup).unwrap();
    let non = ActionContext::new(diag_non_clifford(), PhysicalParams::new(1.0, 1.0).unwrap(), PotentialSpec::zero(1).unwrap(), 8).unwrap();
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let escape = CausalitySetup {
        expect_escape_unit_cone: true,
        ..setup.clone()
    };
    let r2 = causality_report(&non, &grid, &div, &bump(&[c64(s, 0.0), c64(s, 0.0)]), &escape).unwrap();
    let rad = |r: &feynman_dirac::validation::ReportFragment| r.check("support_within_cone").unwrap().measured;
    (
        r1.passed() && r2.passed(),
        format!(
            "Clifford radius {:.4} (<= {:.4}); diag(2,-1) radius {:.4} (> {:.4}, <= {:.4})",
            rad(&r1),
            1.5 + 3.0 * h,
            rad(&r2),
            1.5 + 3.0 * h,
            2.5 + 3.0 * h
        ),
    )
}

const DETERMINISM_CONFIG: &str = r#"
scenario = "all"
seed = 11

[potential]
family = "constant_E"
field = [1.0]
gauge = "vector"

[grid]
n = 128
half_width = 8.0

[time]
t_i = -0.25
t_f = 0.25
t_max = 0.5

[initial]
width = 0.5
spinor = [[1.0, 0.0], [0.0, 0.5]]
momentum = [1.0]

[division]
ladder_nu = [4, 8, 16, 32]
zigzag_n = [2, 4, 8]

[causality]
radius = 2.5
nu = 16

[psi_identity]
samples = 100
"#;

fn run_cli(config: &Path, out: &Path, threads: &str) -> std::process::ExitStatus {
    std::process::Command::new(env!("CARGO_BIN_EXE_feynman-dirac"))
        .arg(config)
        .arg("--out")
        .arg(out)
        .arg("--seed")
        .arg("99")
        .arg("--threads")
        .arg(threads)
        .output()
        .expect("binary runs")
        .status
}

fn criterion_12() -> (bool, String) {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("all.toml");
    std::fs::write(&config, DETERMINISM_CONFIG).unwrap();
    parse_config_str(DETERMINISM_CONFIG).unwrap().build().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let sa = run_cli(&config, &a, "1");
    let sb = run_cli(&config, &b, "2");
    let mut names: Vec<String> = std::fs::read_dir(&a)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    names.sort();
    let mut identical = 0;
    let mut differing = Vec::new();
    for name in &names {
        let x = std::fs::read(a.join(name)).unwrap();
        match std::fs::read(b.join(name)) {
            Ok(y) if x == y => identical += 1,
            _ => differing.push(name.clone()),
        }
    }
    let csvs = names.iter().filter(|n| n.ends_with(".csv")).count();
    (
        sa.success() && sb.success() && differing.is_empty() && csvs >= 5,
        format!(
            "{identical}/{} files byte-identical across two runs (1 and 2 threads), {csvs} CSVs; exit codes {:?}/{:?}",
            names.len(),
            sa.code(),
            sb.code()
        ),
    )
}

fn timed(
    id: u32,
    title: &'static str,
    budget_s: u64,
    f: impl FnOnce() -> (bool, String),
) -> Outcome {
    let start = Instant::now();
    let (passed, detail) = f();
    Outcome {
        id,
        title,
        passed,
        detail,
        elapsed: start.elapsed(),
        budget: Duration::from_secs(budget_s),
        known_red: None,
    }
}

fn timed_red(
    id: u32,
    title: &'static str,
    budget_s: u64,
    why: &'static str,
    f: impl FnOnce() -> (bool, String, bool),
) -> Outcome {
    let start = Instant::now();
    let (passed, detail, analysed) = f();
    Outcome {
        id,
        title,
        passed,
        detail,
        elapsed: start.elapsed(),
        budget: Duration::from_secs(budget_s),
        known_red: Some((why, analysed)),
    }
}

fn main() {
    let outcomes = vec![
        timed(1, "Clifford validation", 1, criterion_1),
        timed(2, "Growth bound", 5, criterion_2),
        timed(3, "Lie product", 5, criterion_3),
        timed_red(
            4,
            "Psi identity",
            30,
            "the residual equals the flux of B(s) through the triangle (z, y, x); nonzero whenever B(s) != 0 (curl variant)",
            criterion_4,
        ),
        timed(5, "Coincident step and route agreement", 10, criterion_5),
        timed(6, "Adjoint symmetry", 60, criterion_6),
        timed(7, "Unitarity", 300, criterion_7),
        timed_red(
            8,
            "Local order",
            120,
            "in d = 1 the constant_E step is a Strang step, so the local error is O(rho^3); the O(rho^2) term appears with B != 0",
            criterion_8,
        ),
        timed(9, "Global convergence", 600, criterion_9),
        timed(10, "Gauge covariance", 120, criterion_10),
        timed(11, "Causality", 120, criterion_11),
        timed(12, "Determinism", 600, criterion_12),
    ];
    println!();
    for o in &outcomes {
        println!("{}", o.line());
    }
    let green = outcomes.iter().filter(|o| o.green()).count();
    println!("{green}/{} criteria pass", outcomes.len());

    let mut problems = Vec::new();
    for o in &outcomes {
        match o.known_red {
            None if !o.green() => problems.push(format!("criterion {} failed", o.id)),
            Some((_, analysed)) => {
                if !analysed {
                    problems.push(format!("criterion {} no longer matches its analysis", o.id));
                }
                if !o.within_budget() {
                    problems.push(format!("criterion {} exceeded its time budget", o.id));
                }
            }
            _ => {}
        }
    }
    if !problems.is_empty() {
        eprintln!("acceptance: {}", problems.join("; "));
        std::process::exit(1);
    }
}
