//! Batch driver: runs the scenarios of a [`RunConfig`] and writes the report,
//! plot data and field snapshots as CSV files with TOML sidecars.

use std::path::{Path, PathBuf};

use clap::Parser;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::config::{parse_config, RunConfig, RunSetup, Scenario};
use crate::error::{Error, Result};
use crate::propagator::{SpinorField, TimeDivision};
use crate::validation::{
    adjoint_report, causality_report, convergence_report, propagation_report, psi_identity_report,
    unitarity_report, Check, ConvergenceTolerances, ReportFragment, Series, UnitarityTolerances,
};

pub const THREADS_ENV: &str = "FEYNMAN_DIRAC_THREADS";
pub const REPORT_COLUMNS: [&str; 6] = ["scenario", "check", "measured", "bound", "verdict", "tolerance"];

#[derive(Debug, Parser)]
#[command(version, about = "Path-integral Dirac propagators: propagation and validation runs")]
pub struct Args {
    /// Scenario configuration file (TOML).
    pub config: PathBuf,
    /// Output directory (overrides `output.dir`).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Random seed (overrides `seed`).
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads (overrides the FEYNMAN_DIRAC_THREADS environment variable).
    #[arg(long)]
    pub threads: Option<usize>,
}

/// One scenario's verdicts and plot data.
#[derive(Debug, Clone)]
pub struct ScenarioOutcome {
    pub scenario: Scenario,
    pub report: ReportFragment,
    pub fields: Vec<(String, SpinorField)>,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub scenarios: Vec<ScenarioOutcome>,
    pub files: Vec<PathBuf>,
}

impl RunOutcome {
    pub fn passed(&self) -> bool {
        self.scenarios.iter().all(|s| s.report.passed())
    }

    pub fn checks(&self) -> impl Iterator<Item = (Scenario, &Check)> {
        self.scenarios
            .iter()
            .flat_map(|s| s.report.checks.iter().map(move |c| (s.scenario, c)))
    }
}

fn fmt_num(x: f64) -> String {
    format!("{x:.16e}")
}

fn bound_text(check: &Check) -> String {
    use crate::validation::Relation::*;
    match check.relation {
        AtMost(b) => format!("<={}", fmt_num(b)),
        AtLeast(b) => format!(">={}", fmt_num(b)),
        Within(lo, hi) => format!("[{};{}]", fmt_num(lo), fmt_num(hi)),
    }
}

fn run_propagate(cfg: &RunConfig, setup: &RunSetup) -> Result<ScenarioOutcome> {
    let division = cfg.division()?;
    let substeps = cfg
        .numerics
        .reference_substeps
        .unwrap_or(0)
        .max(crate::propagator::default_substeps(division.initial(), division.final_time()))
        .max(10 * division.nu());
    let c = &setup.causality;
    let (summary, out) = propagation_report(
        "propagate",
        &setup.ctx,
        &setup.grid,
        &division,
        &setup.initial,
        Some(substeps),
        None,
    )?;
    let mut report = ReportFragment::default();
    report.checks.extend(summary.checks.iter().cloned());
    let mut s = Series::new(
        "propagation_summary",
        &["nu", "sigma", "mesh", "variation", "turns", "norm_ratio", "k0_estimate", "reference_error"],
    );
    s.push(vec![
        summary.nu as f64,
        summary.sigma,
        summary.mesh,
        summary.variation,
        summary.turns as f64,
        summary.norm_ratio,
        summary.k0_estimate,
        summary.reference_error.unwrap_or(f64::NAN),
    ]);
    report.series.push(s);
    report.notes.push(format!(
        "nu {} sigma {:.6e} norm ratio {:.16e} reference error {:.6e} (cone center {:?})",
        summary.nu,
        summary.sigma,
        summary.norm_ratio,
        summary.reference_error.unwrap_or(f64::NAN),
        c.center
    ));
    Ok(ScenarioOutcome {
        scenario: Scenario::Propagate,
        report,
        fields: vec![("field_initial".into(), setup.initial.clone()), ("field_final".into(), out)],
    })
}

fn run_unitarity(cfg: &RunConfig, setup: &RunSetup) -> Result<ReportFragment> {
    let mut ladder = cfg.uniform_ladder()?;
    ladder.extend(cfg.zigzag_ladder(&cfg.division.unitarity_zigzag_n, "division.unitarity_zigzag_n")?);
    let tol = UnitarityTolerances {
        discretization: cfg.tolerances.unitarity_discretization,
        ..Default::default()
    };
    unitarity_report(&setup.ctx, &setup.grid, &ladder, &setup.initial, &tol)
}

fn random_pairs(seed: u64, count: usize, t_max: f64) -> Vec<(f64, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| (rng.random_range(-t_max..=t_max), rng.random_range(-t_max..=t_max)))
        .collect()
}

fn run_adjoint(cfg: &RunConfig, setup: &RunSetup, seed: u64) -> Result<ReportFragment> {
    let grid = cfg.adjoint_grid()?;
    let t_max = setup.t_max.max(f64::MIN_POSITIVE);
    let pairs = random_pairs(seed, cfg.adjoint.pairs, t_max);
    let (t_i, t_f) = (cfg.time.t_i, cfg.time.t_f);
    let three = if t_i != t_f {
        Some(TimeDivision::new(vec![t_i, t_f, 0.5 * (t_i + t_f), t_f])?)
    } else {
        None
    };
    let iso = cfg
        .adjoint
        .isometry_nu
        .iter()
        .map(|&nu| TimeDivision::uniform(t_i, t_f, nu))
        .collect::<Result<Vec<_>>>()?;
    adjoint_report(&setup.ctx, &grid, &pairs, three.as_ref(), &iso)
}

fn run_gauge(cfg: &RunConfig, setup: &RunSetup) -> Result<ReportFragment> {
    crate::validation::gauge_report(
        &setup.ctx,
        &setup.grid,
        &cfg.division()?,
        &setup.initial,
        &setup.psis,
        cfg.tolerances.gauge_exact,
        cfg.tolerances.gauge_quadrature,
    )
}

fn run_converge(cfg: &RunConfig, setup: &RunSetup) -> Result<ReportFragment> {
    let ladder = cfg.uniform_ladder()?;
    let zigzag = cfg.zigzag_ladder(&cfg.division.zigzag_n, "division.zigzag_n")?;
    let t = &cfg.tolerances;
    let tol = ConvergenceTolerances {
        min_order: t.min_order,
        free_exact: t.free_exact,
        zigzag_vs_uniform: t.zigzag_vs_uniform,
        limit_agreement: t.limit_agreement,
    };
    convergence_report(
        &setup.ctx,
        &setup.grid,
        &setup.initial,
        &ladder,
        &zigzag,
        cfg.numerics.reference_substeps,
        &tol,
    )
}

fn run_causality(cfg: &RunConfig, setup: &RunSetup) -> Result<ReportFragment> {
    let division = TimeDivision::uniform(cfg.time.t_i, cfg.time.t_f, cfg.causality.nu)?;
    causality_report(&setup.ctx, &setup.grid, &division, &setup.initial, &setup.causality)
}

fn run_psi_identity(cfg: &RunConfig, setup: &RunSetup, seed: u64) -> Result<ReportFragment> {
    psi_identity_report(
        &setup.ctx.potential,
        &setup.ctx.quad,
        cfg.psi_identity.samples,
        seed,
        cfg.tolerances.psi_identity,
    )
}

/// Runs every scenario of `cfg` without writing anything.
pub fn execute(cfg: &RunConfig) -> Result<Vec<ScenarioOutcome>> {
    let setup = cfg.build()?;
    let mut outcomes = Vec::new();
    for scenario in cfg.scenario.expand() {
        let fragment = |report| ScenarioOutcome {
            scenario,
            report,
            fields: Vec::new(),
        };
        let outcome = match scenario {
            Scenario::Propagate => run_propagate(cfg, &setup)?,
            Scenario::Unitarity => fragment(run_unitarity(cfg, &setup)?),
            Scenario::Adjoint => {
                if cfg.scenario == Scenario::All && cfg.grid.dim != 1 {
                    let mut r = ReportFragment::default();
                    r.notes.push("adjoint skipped: dense assembly needs grid.dim = 1".into());
                    fragment(r)
                } else {
                    fragment(run_adjoint(cfg, &setup, cfg.seed)?)
                }
            }
            Scenario::Gauge => fragment(run_gauge(cfg, &setup)?),
            Scenario::Converge => fragment(run_converge(cfg, &setup)?),
            Scenario::Causality => fragment(run_causality(cfg, &setup)?),
            Scenario::PsiIdentity => fragment(run_psi_identity(cfg, &setup, cfg.seed)?),
            Scenario::All => unreachable!("expanded above"),
        };
        outcomes.push(outcome);
    }
    Ok(outcomes)
}

#[derive(Serialize)]
struct Sidecar<'a> {
    file: &'a str,
    columns: &'a [String],
    scenario: &'a str,
    seed: u64,
    version: &'a str,
    config: &'a RunConfig,
}

fn write_csv(path: &Path, columns: &[String], rows: impl IntoIterator<Item = Vec<String>>) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    let io = |e: csv::Error| Error::Config(format!("{}: {e}", path.display()));
    w.write_record(columns).map_err(io)?;
    for row in rows {
        w.write_record(&row).map_err(io)?;
    }
    w.flush()?;
    Ok(())
}

fn write_sidecar(path: &Path, columns: &[String], scenario: &str, cfg: &RunConfig) -> Result<()> {
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or_default();
    let meta = Sidecar {
        file: name,
        columns,
        scenario,
        seed: cfg.seed,
        version: env!("CARGO_PKG_VERSION"),
        config: cfg,
    };
    let text = toml::to_string(&meta).map_err(|e| Error::Config(e.to_string()))?;
    std::fs::write(path.with_extension("csv.meta.toml"), text)?;
    Ok(())
}

/// Columns of a field snapshot: coordinates, then `re_a, im_a` per spinor
/// component.
pub fn field_columns(field: &SpinorField) -> Vec<String> {
    let d = field.grid().dim();
    let mut cols: Vec<String> = (1..=d).map(|j| format!("x_{j}")).collect();
    for a in 1..=field.spinor_dim() {
        cols.push(format!("re_{a}"));
        cols.push(format!("im_{a}"));
    }
    cols
}

fn field_rows(field: &SpinorField) -> impl Iterator<Item = Vec<String>> + '_ {
    let grid = field.grid();
    (0..grid.len()).map(move |k| {
        let p = grid.point(k);
        let mut row: Vec<String> = p[..grid.dim()].iter().map(|x| fmt_num(*x)).collect();
        for z in field.at(k) {
            row.push(fmt_num(z.re));
            row.push(fmt_num(z.im));
        }
        row
    })
}

/// Writes `report.csv`, one CSV per series and per field snapshot, each with
/// a `.meta.toml` sidecar. Returns the paths written.
pub fn write_outputs(cfg: &RunConfig, outcomes: &[ScenarioOutcome], dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let mut files = Vec::new();
    let report_cols: Vec<String> = REPORT_COLUMNS.iter().map(|s| s.to_string()).collect();
    let rows = outcomes.iter().flat_map(|o| {
        o.report.checks.iter().map(move |c| {
            vec![
                o.scenario.name().to_string(),
                c.name.clone(),
                fmt_num(c.measured),
                bound_text(c),
                c.verdict().to_string(),
                fmt_num(c.tolerance),
            ]
        })
    });
    let path = dir.join("report.csv");
    write_csv(&path, &report_cols, rows)?;
    write_sidecar(&path, &report_cols, cfg.scenario.name(), cfg)?;
    files.push(path);

    let mut used = std::collections::BTreeSet::new();
    for o in outcomes {
        for series in &o.report.series {
            let mut name = series.name.clone();
            if !used.insert(name.clone()) {
                name = format!("{}_{}", o.scenario.name().replace('-', "_"), series.name);
                used.insert(name.clone());
            }
            let path = dir.join(format!("{name}.csv"));
            write_csv(&path, &series.columns, series.rows.iter().map(|r| r.iter().map(|x| fmt_num(*x)).collect()))?;
            write_sidecar(&path, &series.columns, o.scenario.name(), cfg)?;
            files.push(path);
        }
        for (name, field) in &o.fields {
            let path = dir.join(format!("{name}.csv"));
            let cols = field_columns(field);
            write_csv(&path, &cols, field_rows(field))?;
            write_sidecar(&path, &cols, o.scenario.name(), cfg)?;
            files.push(path);
        }
    }
    Ok(files)
}

/// Executes `cfg` and writes its outputs under `dir`.
pub fn run(cfg: &RunConfig, dir: &Path) -> Result<RunOutcome> {
    let scenarios = execute(cfg)?;
    let files = write_outputs(cfg, &scenarios, dir)?;
    Ok(RunOutcome { scenarios, files })
}

fn thread_count(flag: Option<usize>) -> Result<Option<usize>> {
    if let Some(n) = flag {
        return Ok(Some(n));
    }
    match std::env::var(THREADS_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| Error::Config(format!("{THREADS_ENV} = {v:?} is not a thread count"))),
        Err(_) => Ok(None),
    }
}

/// Exit code 0 if every check passes, 1 if any fails, 2 on errors.
pub fn main_with_args(args: Args) -> i32 {
    let result = (|| -> Result<RunOutcome> {
        if let Some(n) = thread_count(args.threads)? {
            if n == 0 {
                return Err(Error::Config("thread count must be at least 1".into()));
            }
            rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build_global()
                .map_err(|e| Error::Config(e.to_string()))?;
        }
        let mut cfg = parse_config(&args.config)?;
        if let Some(seed) = args.seed {
            cfg.seed = seed;
        }
        let dir = args.out.clone().unwrap_or_else(|| cfg.output.dir.clone());
        run(&cfg, &dir)
    })();
    match result {
        Ok(outcome) => {
            for s in &outcome.scenarios {
                for c in &s.report.checks {
                    println!("{}/{}", s.scenario.name(), c);
                }
                for n in &s.report.notes {
                    println!("  {}: {n}", s.scenario.name());
                }
            }
            if outcome.passed() {
                0
            } else {
                1
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            2
        }
    }
}
