//! Run configuration: a TOML file with one section per concern.
//!
//! Unknown keys anywhere are errors. Omitted keys take the defaults listed
//! in the README; [`RunConfig::build`] turns a parsed file into ready-to-run
//! objects and reports every violated invariant with the offending key.

use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::action::{ActionContext, DEFAULT_QUADRATURE_ORDER};
use crate::algebra::{CMatrix, DiracAlgebra, PhysicalParams};
use crate::error::{Error, Result};
use crate::fields::{ElectricGauge, GaugeFunction, Monomial, Polynomial, PotentialSpec};
use crate::propagator::grid::{DEFAULT_POINTS_1D, DEFAULT_POINTS_2D};
use crate::propagator::{Grid, PhasePath, SpinorField, TimeDivision};
use crate::validation::{required_half_width, CausalitySetup, DEFAULT_EPS_TAIL, MAX_DENSE_POINTS};

fn config_err(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scenario {
    Propagate,
    Unitarity,
    Adjoint,
    Gauge,
    Converge,
    Causality,
    PsiIdentity,
    All,
}

impl Scenario {
    pub fn name(self) -> &'static str {
        match self {
            Scenario::Propagate => "propagate",
            Scenario::Unitarity => "unitarity",
            Scenario::Adjoint => "adjoint",
            Scenario::Gauge => "gauge",
            Scenario::Converge => "converge",
            Scenario::Causality => "causality",
            Scenario::PsiIdentity => "psi-identity",
            Scenario::All => "all",
        }
    }

    /// Scenarios executed, in order.
    pub fn expand(self) -> Vec<Scenario> {
        match self {
            Scenario::All => vec![
                Scenario::Propagate,
                Scenario::Unitarity,
                Scenario::Adjoint,
                Scenario::Gauge,
                Scenario::Converge,
                Scenario::Causality,
                Scenario::PsiIdentity,
            ],
            s => vec![s],
        }
    }
}

/// Complex number as `[re, im]`.
pub type ComplexPair = [f64; 2];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlgebraKind {
    #[default]
    Standard,
    Custom,
}

/// `[[re, im], ...]` rows.
pub type MatrixRows = Vec<Vec<ComplexPair>>;

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AlgebraConfig {
    pub kind: AlgebraKind,
    /// TOML file holding `alphas` and `beta`, relative to the config file.
    pub file: Option<PathBuf>,
    pub alphas: Option<Vec<MatrixRows>>,
    pub beta: Option<MatrixRows>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MatrixFile {
    alphas: Vec<MatrixRows>,
    beta: MatrixRows,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ParamsConfig {
    pub c: f64,
    pub m: f64,
}

impl Default for ParamsConfig {
    fn default() -> Self {
        Self { c: 1.0, m: 1.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhasePathName {
    #[default]
    Unwrapped,
    MinimalImage,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NumericsConfig {
    pub quadrature_order: usize,
    pub phase_path: PhasePathName,
    /// Reference-solver substeps; default `max(ceil(|t_f - t_i| / 1e-3), 10 nu_max)`.
    pub reference_substeps: Option<usize>,
}

impl Default for NumericsConfig {
    fn default() -> Self {
        Self {
            quadrature_order: DEFAULT_QUADRATURE_ORDER,
            phase_path: PhasePathName::Unwrapped,
            reference_substeps: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum FamilyName {
    #[default]
    #[serde(rename = "zero")]
    Zero,
    #[serde(rename = "constant_E")]
    ConstantE,
    #[serde(rename = "constant_B")]
    ConstantB,
    #[serde(rename = "harmonic_V")]
    HarmonicV,
    #[serde(rename = "time_ramped_A")]
    TimeRampedA,
    #[serde(rename = "custom")]
    Custom,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GaugeName {
    #[default]
    Scalar,
    Vector,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MonomialConfig {
    pub coef: f64,
    #[serde(default)]
    pub t_pow: u32,
    #[serde(default)]
    pub x_pows: Vec<u32>,
}

impl From<&MonomialConfig> for Monomial {
    fn from(m: &MonomialConfig) -> Self {
        Monomial {
            coef: m.coef,
            t_pow: m.t_pow,
            x_pows: m.x_pows.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PotentialConfig {
    pub family: FamilyName,
    /// constant_E field vector; default `e_1`.
    pub field: Option<Vec<f64>>,
    pub gauge: GaugeName,
    /// constant_B strength.
    pub strength: f64,
    /// harmonic_V stiffness and center (default origin).
    pub stiffness: f64,
    pub center: Option<Vec<f64>>,
    /// time_ramped_A: `A = rate t (direction + curl (-x_2/2, x_1/2))`.
    pub rate: f64,
    pub direction: Option<Vec<f64>>,
    pub curl: f64,
    /// custom: polynomial terms of `V` and of each `A_j`.
    pub scalar: Vec<MonomialConfig>,
    pub vector: Vec<Vec<MonomialConfig>>,
}

impl Default for PotentialConfig {
    fn default() -> Self {
        Self {
            family: FamilyName::Zero,
            field: None,
            gauge: GaugeName::Scalar,
            strength: 1.0,
            stiffness: 1.0,
            center: None,
            rate: 1.0,
            direction: None,
            curl: 0.0,
            scalar: Vec::new(),
            vector: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SineConfig {
    pub amplitude: f64,
    pub wavevector: Vec<f64>,
    #[serde(default)]
    pub omega: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PsiConfig {
    pub label: String,
    pub terms: Option<Vec<MonomialConfig>>,
    pub sine: Option<SineConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GaugeConfig {
    pub psi: Vec<PsiConfig>,
}

impl Default for GaugeConfig {
    fn default() -> Self {
        let mono = |t_pow, x: u32| MonomialConfig {
            coef: 1.0,
            t_pow,
            x_pows: vec![x],
        };
        let psi = |label: &str, m| PsiConfig {
            label: label.into(),
            terms: Some(vec![m]),
            sine: None,
        };
        Self {
            psi: vec![psi("x1", mono(0, 1)), psi("t", mono(1, 0)), psi("t_x1", mono(1, 1))],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridConfig {
    pub dim: usize,
    /// Default 256 in d = 1 and 64 in d = 2.
    pub n: Option<usize>,
    pub half_width: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            dim: 1,
            n: None,
            half_width: 8.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TimeConfig {
    pub t_i: f64,
    pub t_f: f64,
    /// Window half-length `T`; default `max(|t_i|, |t_f|)`.
    pub t_max: Option<f64>,
}

impl Default for TimeConfig {
    fn default() -> Self {
        Self {
            t_i: 0.0,
            t_f: 1.0,
            t_max: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DivisionKind {
    #[default]
    Uniform,
    Zigzag,
    Explicit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DivisionConfig {
    /// Shape of the single division used by propagate and gauge.
    pub kind: DivisionKind,
    pub nu: usize,
    /// Zig-zag order.
    pub n: usize,
    pub times: Vec<f64>,
    /// Uniform ladder for unitarity and converge.
    pub ladder_nu: Vec<usize>,
    /// Zig-zag ladder for converge.
    pub zigzag_n: Vec<usize>,
    /// Zig-zag rungs added to the unitarity ladder (each needs `sigma <= 1`).
    pub unitarity_zigzag_n: Vec<usize>,
}

impl Default for DivisionConfig {
    fn default() -> Self {
        Self {
            kind: DivisionKind::Uniform,
            nu: 16,
            n: 4,
            times: Vec::new(),
            ladder_nu: vec![4, 8, 16, 32, 64],
            zigzag_n: vec![2, 4, 8],
            unitarity_zigzag_n: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialKind {
    #[default]
    Gaussian,
    PlaneWave,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InitialConfig {
    pub kind: InitialKind,
    pub center: Option<Vec<f64>>,
    pub width: f64,
    pub cutoff: Option<f64>,
    /// Spinor direction as `[re, im]` pairs; default the first basis vector.
    pub spinor: Option<Vec<ComplexPair>>,
    pub momentum: Option<Vec<f64>>,
    /// Plane-wave mode index per axis.
    pub mode: Option<Vec<i64>>,
    /// Scale to unit L2 norm.
    pub normalize: bool,
}

impl Default for InitialConfig {
    fn default() -> Self {
        Self {
            kind: InitialKind::Gaussian,
            center: None,
            width: 0.5,
            cutoff: None,
            spinor: None,
            momentum: None,
            mode: None,
            normalize: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ToleranceConfig {
    pub eps_tail: f64,
    pub gauge_exact: f64,
    pub gauge_quadrature: f64,
    pub unitarity_discretization: f64,
    pub min_order: f64,
    pub free_exact: f64,
    pub zigzag_vs_uniform: f64,
    pub limit_agreement: f64,
    pub psi_identity: f64,
}

impl Default for ToleranceConfig {
    fn default() -> Self {
        Self {
            eps_tail: DEFAULT_EPS_TAIL,
            gauge_exact: 1e-9,
            gauge_quadrature: 1e-6,
            unitarity_discretization: 1e-12,
            min_order: 0.9,
            free_exact: 1e-11,
            zigzag_vs_uniform: 3.0,
            limit_agreement: 5.0,
            psi_identity: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AdjointConfig {
    pub points: usize,
    /// Default: the main grid's half-width.
    pub half_width: Option<f64>,
    /// Number of random `(t, s)` pairs drawn from `[-T, T]`.
    pub pairs: usize,
    pub isometry_nu: Vec<usize>,
}

impl Default for AdjointConfig {
    fn default() -> Self {
        Self {
            points: MAX_DENSE_POINTS,
            half_width: None,
            pairs: 5,
            isometry_nu: vec![4, 8, 16, 32],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CausalityConfig {
    /// Default: the initial state's center.
    pub center: Option<Vec<f64>>,
    pub radius: f64,
    pub nu: usize,
    /// Default `3 h`.
    pub margin: Option<f64>,
    pub record_every: usize,
    pub expect_escape_unit_cone: bool,
}

impl Default for CausalityConfig {
    fn default() -> Self {
        Self {
            center: None,
            radius: 0.5,
            nu: 64,
            margin: None,
            record_every: 1,
            expect_escape_unit_cone: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PsiIdentityConfig {
    pub samples: usize,
}

impl Default for PsiIdentityConfig {
    fn default() -> Self {
        Self { samples: 500 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub dir: PathBuf,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { dir: PathBuf::from("out") }
    }
}

pub const DEFAULT_SEED: u64 = 20_240_601;

fn default_seed() -> u64 {
    DEFAULT_SEED
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub scenario: Scenario,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default)]
    pub algebra: AlgebraConfig,
    #[serde(default)]
    pub params: ParamsConfig,
    #[serde(default)]
    pub numerics: NumericsConfig,
    #[serde(default)]
    pub potential: PotentialConfig,
    #[serde(default)]
    pub gauge: GaugeConfig,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub time: TimeConfig,
    #[serde(default)]
    pub division: DivisionConfig,
    #[serde(default)]
    pub initial: InitialConfig,
    #[serde(default)]
    pub tolerances: ToleranceConfig,
    #[serde(default)]
    pub adjoint: AdjointConfig,
    #[serde(default)]
    pub causality: CausalityConfig,
    #[serde(default)]
    pub psi_identity: PsiIdentityConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

/// Everything a run needs, built and validated from a [`RunConfig`].
#[derive(Debug)]
pub struct RunSetup {
    pub ctx: ActionContext,
    pub grid: Grid,
    pub initial: SpinorField,
    pub t_max: f64,
    pub causality: CausalitySetup,
    pub psis: Vec<(String, GaugeFunction)>,
}

/// Reads, parses and fully validates a config file. Relative paths inside
/// it are resolved against the file's directory.
pub fn parse_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| config_err(format!("cannot read {}: {e}", path.display())))?;
    let mut cfg = parse_config_str(&text)?;
    if let Some(file) = &cfg.algebra.file {
        if file.is_relative() {
            let base = path.parent().unwrap_or(Path::new("."));
            cfg.algebra.file = Some(base.join(file));
        }
    }
    cfg.build()?;
    Ok(cfg)
}

/// Parses config text without building (see [`RunConfig::build`]).
pub fn parse_config_str(text: &str) -> Result<RunConfig> {
    toml::from_str(text).map_err(|e| config_err(e.to_string()))
}

fn complex(p: &ComplexPair) -> Complex64 {
    Complex64::new(p[0], p[1])
}

fn matrix(rows: &MatrixRows, key: &str) -> Result<CMatrix> {
    let n = rows.len();
    if n == 0 || rows.iter().any(|r| r.len() != n) {
        return Err(config_err(format!("{key} must be a non-empty square matrix")));
    }
    let flat: Vec<Complex64> = rows.iter().flatten().map(complex).collect();
    Ok(CMatrix::from_row_slice(n, n, &flat))
}

fn check_len(v: &[f64], d: usize, key: &str) -> Result<()> {
    if v.len() != d {
        return Err(config_err(format!("{key} has {} entries, grid.dim is {d}", v.len())));
    }
    Ok(())
}

fn unit(d: usize) -> Vec<f64> {
    let mut e = vec![0.0; d];
    e[0] = 1.0;
    e
}

impl RunConfig {
    pub fn algebra(&self) -> Result<DiracAlgebra> {
        let d = self.grid.dim;
        match self.algebra.kind {
            AlgebraKind::Standard => {
                if self.algebra.file.is_some() || self.algebra.alphas.is_some() || self.algebra.beta.is_some() {
                    return Err(config_err("algebra.file/alphas/beta require algebra.kind = \"custom\""));
                }
                DiracAlgebra::standard(d)
            }
            AlgebraKind::Custom => {
                let (alphas, beta) = match (&self.algebra.file, &self.algebra.alphas, &self.algebra.beta) {
                    (Some(file), None, None) => {
                        let text = std::fs::read_to_string(file)
                            .map_err(|e| config_err(format!("algebra.file {}: {e}", file.display())))?;
                        let m: MatrixFile = toml::from_str(&text)
                            .map_err(|e| config_err(format!("algebra.file {}: {e}", file.display())))?;
                        (m.alphas, m.beta)
                    }
                    (None, Some(a), Some(b)) => (a.clone(), b.clone()),
                    _ => {
                        return Err(config_err(
                            "algebra.kind = \"custom\" needs either algebra.file or both algebra.alphas and algebra.beta",
                        ))
                    }
                };
                if alphas.len() != d {
                    return Err(config_err(format!("algebra.alphas has {} matrices, grid.dim is {d}", alphas.len())));
                }
                let alphas = alphas
                    .iter()
                    .enumerate()
                    .map(|(j, a)| matrix(a, &format!("algebra.alphas[{j}]")))
                    .collect::<Result<Vec<_>>>()?;
                DiracAlgebra::custom(alphas, matrix(&beta, "algebra.beta")?)
            }
        }
    }

    pub fn potential(&self) -> Result<PotentialSpec> {
        let d = self.grid.dim;
        let p = &self.potential;
        let vec_or = |v: &Option<Vec<f64>>, key: &str, default: Vec<f64>| -> Result<Vec<f64>> {
            match v {
                Some(v) => {
                    check_len(v, d, key)?;
                    Ok(v.clone())
                }
                None => Ok(default),
            }
        };
        match p.family {
            FamilyName::Zero => PotentialSpec::zero(d),
            FamilyName::ConstantE => {
                let gauge = match p.gauge {
                    GaugeName::Scalar => ElectricGauge::Scalar,
                    GaugeName::Vector => ElectricGauge::Vector,
                };
                PotentialSpec::constant_e(vec_or(&p.field, "potential.field", unit(d))?, gauge)
            }
            FamilyName::ConstantB => PotentialSpec::constant_b(p.strength),
            FamilyName::HarmonicV => {
                PotentialSpec::harmonic_v(p.stiffness, vec_or(&p.center, "potential.center", vec![0.0; d])?)
            }
            FamilyName::TimeRampedA => {
                PotentialSpec::time_ramped_a(p.rate, vec_or(&p.direction, "potential.direction", unit(d))?, p.curl)
            }
            FamilyName::Custom => {
                let poly = |terms: &[MonomialConfig]| Polynomial::new(d, terms.iter().map(Monomial::from).collect());
                let vector = if p.vector.is_empty() {
                    vec![Polynomial::zero(d); d]
                } else if p.vector.len() == d {
                    p.vector.iter().map(|t| poly(t)).collect::<Result<Vec<_>>>()?
                } else {
                    return Err(config_err(format!(
                        "potential.vector has {} components, grid.dim is {d}",
                        p.vector.len()
                    )));
                };
                PotentialSpec::custom_polynomial(poly(&p.scalar)?, vector)
            }
        }
    }

    pub fn psis(&self) -> Result<Vec<(String, GaugeFunction)>> {
        let d = self.grid.dim;
        self.gauge
            .psi
            .iter()
            .map(|p| {
                let g = match (&p.terms, &p.sine) {
                    (Some(terms), None) => {
                        GaugeFunction::Polynomial(Polynomial::new(d, terms.iter().map(Monomial::from).collect())?)
                    }
                    (None, Some(s)) => {
                        check_len(&s.wavevector, d, "gauge.psi.sine.wavevector")?;
                        GaugeFunction::Sine {
                            amplitude: s.amplitude,
                            wavevector: s.wavevector.clone(),
                            omega: s.omega,
                        }
                    }
                    _ => {
                        return Err(config_err(format!(
                            "gauge.psi `{}` needs exactly one of terms or sine",
                            p.label
                        )))
                    }
                };
                Ok((p.label.clone(), g))
            })
            .collect()
    }

    pub fn grid(&self) -> Result<Grid> {
        let d = self.grid.dim;
        if !(1..=2).contains(&d) {
            return Err(config_err(format!("grid.dim = {d}; propagation grids support d = 1 or 2")));
        }
        let n = self.grid.n.unwrap_or(if d == 1 { DEFAULT_POINTS_1D } else { DEFAULT_POINTS_2D });
        if !n.is_power_of_two() || n < 2 {
            return Err(config_err(format!("grid.n = {n} is not a power of two >= 2")));
        }
        if !(self.grid.half_width > 0.0) {
            return Err(config_err(format!("grid.half_width = {} must be positive", self.grid.half_width)));
        }
        Grid::new(d, n, self.grid.half_width)
    }

    pub fn adjoint_grid(&self) -> Result<Grid> {
        let n = self.adjoint.points;
        if !n.is_power_of_two() || !(2..=MAX_DENSE_POINTS).contains(&n) {
            return Err(config_err(format!(
                "adjoint.points = {n} must be a power of two in [2, {MAX_DENSE_POINTS}]"
            )));
        }
        Grid::new(self.grid.dim, n, self.adjoint.half_width.unwrap_or(self.grid.half_width))
    }

    pub fn t_max(&self) -> Result<f64> {
        let (t_i, t_f) = (self.time.t_i, self.time.t_f);
        let needed = t_i.abs().max(t_f.abs());
        let t_max = self.time.t_max.unwrap_or(needed);
        if t_max < needed {
            return Err(config_err(format!(
                "time.t_max = {t_max} is below max(|t_i|, |t_f|) = {needed}"
            )));
        }
        Ok(t_max)
    }

    /// The single division used by propagate and gauge.
    pub fn division(&self) -> Result<TimeDivision> {
        let (t_i, t_f) = (self.time.t_i, self.time.t_f);
        let div = &self.division;
        let d = match div.kind {
            DivisionKind::Uniform => TimeDivision::uniform(t_i, t_f, div.nu),
            DivisionKind::Zigzag => TimeDivision::zigzag(t_i, t_f, self.t_max()?, div.n),
            DivisionKind::Explicit => {
                let d = TimeDivision::new(div.times.clone())?;
                if d.initial() != t_i || d.final_time() != t_f {
                    return Err(config_err("division.times must start at time.t_i and end at time.t_f"));
                }
                Ok(d)
            }
        };
        d.map_err(|e| config_err(format!("division: {e}")))
    }

    pub fn uniform_ladder(&self) -> Result<Vec<TimeDivision>> {
        self.division
            .ladder_nu
            .iter()
            .map(|&nu| TimeDivision::uniform(self.time.t_i, self.time.t_f, nu))
            .collect::<Result<_>>()
            .map_err(|e| config_err(format!("division.ladder_nu: {e}")))
    }

    pub fn zigzag_ladder(&self, orders: &[usize], key: &str) -> Result<Vec<TimeDivision>> {
        let t_max = self.t_max()?;
        orders
            .iter()
            .map(|&n| TimeDivision::zigzag(self.time.t_i, self.time.t_f, t_max, n))
            .collect::<Result<_>>()
            .map_err(|e| config_err(format!("{key}: {e}")))
    }

    fn initial_field(&self, grid: &Grid, spinor_dim: usize) -> Result<SpinorField> {
        let d = grid.dim();
        let init = &self.initial;
        let spinor: Vec<Complex64> = match &init.spinor {
            Some(s) => {
                if s.len() != spinor_dim {
                    return Err(config_err(format!(
                        "initial.spinor has {} entries, the algebra acts on {spinor_dim}",
                        s.len()
                    )));
                }
                s.iter().map(complex).collect()
            }
            None => {
                let mut e = vec![Complex64::new(0.0, 0.0); spinor_dim];
                e[0] = Complex64::new(1.0, 0.0);
                e
            }
        };
        let mut f = match init.kind {
            InitialKind::Gaussian => {
                let center = init.center.clone().unwrap_or(vec![0.0; d]);
                check_len(&center, d, "initial.center")?;
                let momentum = init.momentum.clone().unwrap_or(vec![0.0; d]);
                check_len(&momentum, d, "initial.momentum")?;
                SpinorField::gaussian(grid, &center, init.width, init.cutoff, &spinor, &momentum)?
            }
            InitialKind::PlaneWave => {
                let mode = init.mode.clone().unwrap_or(vec![1; d]);
                if mode.len() != d {
                    return Err(config_err(format!("initial.mode has {} entries, grid.dim is {d}", mode.len())));
                }
                SpinorField::plane_wave(grid, &mode, &spinor)?
            }
        };
        let norm = f.norm();
        if !(norm > 0.0) {
            return Err(config_err("initial state has zero norm"));
        }
        if init.normalize {
            f.scale(Complex64::from(1.0 / norm));
        }
        Ok(f)
    }

    fn causality_setup(&self, grid: &Grid) -> CausalitySetup {
        let c = &self.causality;
        CausalitySetup {
            center: c
                .center
                .clone()
                .or_else(|| self.initial.center.clone())
                .unwrap_or(vec![0.0; grid.dim()]),
            radius: c.radius,
            eps_tail: self.tolerances.eps_tail,
            margin: c.margin,
            record_every: c.record_every,
            expect_escape_unit_cone: c.expect_escape_unit_cone,
        }
    }

    fn runs(&self, s: Scenario) -> bool {
        self.scenario == s || self.scenario == Scenario::All
    }

    /// Builds every object the run needs and checks the cross-field
    /// invariants.
    pub fn build(&self) -> Result<RunSetup> {
        let grid = self.grid()?;
        let algebra = self.algebra()?;
        let params = PhysicalParams::new(self.params.c, self.params.m)?;
        let phase_path = match self.numerics.phase_path {
            PhasePathName::Unwrapped => PhasePath::Unwrapped,
            PhasePathName::MinimalImage => PhasePath::MinimalImage,
        };
        let ctx = ActionContext::new(algebra, params, self.potential()?, self.numerics.quadrature_order)?
            .with_phase_path(phase_path);
        let t_max = self.t_max()?;
        let initial = self.initial_field(&grid, ctx.algebra.spinor_dim())?;
        let causality = self.causality_setup(&grid);
        check_len(&causality.center, grid.dim(), "causality.center")?;
        if !(self.tolerances.eps_tail > 0.0 && self.tolerances.eps_tail < 1.0) {
            return Err(config_err("tolerances.eps_tail must lie in (0, 1)"));
        }
        if self.runs(Scenario::Causality) {
            let elapsed = (self.time.t_f - self.time.t_i).abs();
            let required = required_half_width(&ctx, &causality, elapsed, grid.h());
            if required > grid.half_width() {
                return Err(config_err(format!(
                    "grid.half_width = {} is too small for the causality cone; need at least {required:.6}",
                    grid.half_width()
                )));
            }
            if self.causality.nu == 0 {
                return Err(config_err("causality.nu must be at least 1"));
            }
        }
        if self.runs(Scenario::Propagate) || self.runs(Scenario::Gauge) {
            self.division()?;
        }
        if self.runs(Scenario::Unitarity) || self.runs(Scenario::Converge) {
            if self.division.ladder_nu.is_empty() {
                return Err(config_err("division.ladder_nu must not be empty"));
            }
            self.uniform_ladder()?;
        }
        if self.runs(Scenario::Converge) {
            self.zigzag_ladder(&self.division.zigzag_n, "division.zigzag_n")?;
        }
        if self.runs(Scenario::Unitarity) {
            self.zigzag_ladder(&self.division.unitarity_zigzag_n, "division.unitarity_zigzag_n")?;
        }
        if self.scenario == Scenario::Adjoint {
            self.adjoint_grid()?;
            if self.grid.dim != 1 {
                return Err(config_err("the adjoint scenario needs grid.dim = 1"));
            }
        }
        let psis = self.psis()?;
        Ok(RunSetup {
            ctx,
            grid,
            initial,
            t_max,
            causality,
            psis,
        })
    }
}
