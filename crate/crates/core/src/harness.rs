//! eps-sweeps against the classical limit: error norms, order fits and output files.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use log::{info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{DatumChoice, DtRule, ReferenceChoice, StudyConfig};
use crate::error::{Error, Result};
use crate::geometry::{build_collar, build_grid, BoundaryDatum, Domain, Grid, Point};
use crate::kernels::{KernelProfile, NormalizationConstants};
use crate::operator::{assemble_flux_with, assemble_operator_with, FluxAssembler, NonlocalOperator};
use crate::reference::{self, ReferenceSolution};
use crate::solver::{self, GridField, PicardConfig, Scheme};

pub const CSV_HEADER: &str = "eps,sup_error,l1_error,weak_1,weak_x,weak_sin,runtime_s";

/// Test functions for the weak pairings.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum TestFunction {
    One,
    /// First coordinate.
    X,
    /// `sin(pi (x - a)/(b - a))` on an interval; `cos(pi r / 2R)` on a disk.
    Sin,
}

pub const WEAK_TEST_FUNCTIONS: [TestFunction; 3] = [TestFunction::One, TestFunction::X, TestFunction::Sin];

impl TestFunction {
    pub fn eval(&self, domain: &Domain, x: &Point) -> f64 {
        match self {
            TestFunction::One => 1.0,
            TestFunction::X => x[0],
            TestFunction::Sin => match *domain {
                Domain::Interval { a, b } => (PI * (x[0] - a) / (b - a)).sin(),
                Domain::Disk { center, radius } => {
                    let r = (x[0] - center[0]).hypot(x[1] - center[1]);
                    (0.5 * PI * r / radius).cos()
                }
            },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorNorms {
    pub sup: f64,
    pub l1: f64,
    pub weak: Vec<f64>,
}

/// Errors of `u_eps` against `reference` at time `t` on the nodes of `grid`.
pub fn error_norms(
    u_eps: &GridField,
    grid: &Grid,
    reference: &ReferenceSolution,
    t: f64,
    psis: &[TestFunction],
) -> ErrorNorms {
    let diff: Vec<f64> = grid
        .nodes()
        .iter()
        .zip(u_eps.values())
        .map(|(x, u)| u - reference.eval(x, t))
        .collect();
    let vols = grid.volumes();
    let sup = diff.iter().fold(0.0f64, |m, d| m.max(d.abs()));
    let l1 = diff.iter().zip(vols).map(|(d, v)| d.abs() * v).sum();
    let weak = psis
        .iter()
        .map(|psi| {
            diff.iter()
                .zip(vols)
                .zip(grid.nodes())
                .map(|((d, v), x)| d * v * psi.eval(grid.domain(), x))
                .sum::<f64>()
                .abs()
        })
        .collect();
    ErrorNorms { sup, l1, weak }
}

/// Least-squares slope of `ln err` against `ln eps`. `None` with fewer than two
/// points or any nonpositive value.
pub fn fit_order(eps: &[f64], err: &[f64]) -> Option<f64> {
    if eps.len() != err.len() || eps.len() < 2 {
        return None;
    }
    if eps.iter().chain(err).any(|&v| !(v > 0.0) || !v.is_finite()) {
        return None;
    }
    let xs: Vec<f64> = eps.iter().map(|e| e.ln()).collect();
    let ys: Vec<f64> = err.iter().map(|e| e.ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        return None;
    }
    Some(sxy / sxx)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StudyRow {
    pub eps: f64,
    pub h: f64,
    pub nodes: usize,
    pub dt: f64,
    pub sup_error: f64,
    pub l1_error: f64,
    pub weak_errors: Vec<f64>,
    pub runtime_s: f64,
    /// `|Σ vol u(T) - Σ vol u0|`, recorded when the flux term vanishes.
    pub mass_drift: Option<f64>,
    /// `sup |picard - stepper|` over one window, when requested.
    pub picard_gap: Option<f64>,
    pub reference_error: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RowFailure {
    pub eps: f64,
    pub message: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FittedOrders {
    pub sup: Option<f64>,
    pub l1: Option<f64>,
    pub weak: Vec<Option<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnvironmentStamp {
    pub crate_version: String,
    pub threads: usize,
    pub os: String,
    pub arch: String,
}

impl EnvironmentStamp {
    pub fn current() -> Self {
        EnvironmentStamp {
            crate_version: env!("CARGO_PKG_VERSION").to_string(),
            threads: rayon::current_num_threads(),
            os: std::env::consts::OS.to_string(),
            arch: std::env::consts::ARCH.to_string(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StudyResult {
    pub config: StudyConfig,
    pub rows: Vec<StudyRow>,
    pub failures: Vec<RowFailure>,
    /// Fitted over the last three valid rows; absent with fewer than two.
    pub orders: Option<FittedOrders>,
    pub environment: EnvironmentStamp,
}

impl StudyResult {
    pub fn from_rows(config: StudyConfig, rows: Vec<StudyRow>, failures: Vec<RowFailure>) -> Self {
        let orders = fit_orders(&rows);
        StudyResult {
            config,
            rows,
            failures,
            orders,
            environment: EnvironmentStamp::current(),
        }
    }
}

fn fit_orders(rows: &[StudyRow]) -> Option<FittedOrders> {
    if rows.len() < 2 {
        return None;
    }
    let tail = &rows[rows.len().saturating_sub(3)..];
    let eps: Vec<f64> = tail.iter().map(|r| r.eps).collect();
    let col = |f: &dyn Fn(&StudyRow) -> f64| fit_order(&eps, &tail.iter().map(f).collect::<Vec<_>>());
    let nweak = tail.iter().map(|r| r.weak_errors.len()).min().unwrap_or(0);
    Some(FittedOrders {
        sup: col(&|r| r.sup_error),
        l1: col(&|r| r.l1_error),
        weak: (0..nweak).map(|j| col(&|r| r.weak_errors[j])).collect(),
    })
}

/// Assembled pieces for one value of `eps`.
pub struct Discretization {
    pub grid: Grid,
    pub profile: KernelProfile,
    pub constants: NormalizationConstants,
    pub op: NonlocalOperator,
    pub flux: FluxAssembler,
    pub u0: GridField,
}

pub fn discretize(cfg: &StudyConfig, eps: f64) -> Result<Discretization> {
    let problem = reference::catalog(cfg.case);
    let profile = KernelProfile::from_spec(&cfg.kernel, cfg.domain.dim())?;
    let constants = NormalizationConstants::compute(&profile)?;
    let h = cfg.spacing(eps);
    if h > 0.5 * profile.support() * eps {
        return Err(Error::Config(format!(
            "h = {h} exceeds d*eps/2 = {} at eps = {eps}",
            0.5 * profile.support() * eps
        )));
    }
    let mut grid = build_grid(&cfg.domain, h)?;
    grid.mark_band(eps, profile.support())?;
    let datum = match cfg.datum {
        DatumChoice::Case => problem.g.clone(),
        DatumChoice::Zero => BoundaryDatum::zero(),
    };
    let collar = build_collar(&cfg.domain, eps, h, profile.support(), datum)?;
    let op = assemble_operator_with(&grid, &profile, &constants, eps, cfg.quadrature)?;
    let flux = assemble_flux_with(
        &grid,
        &collar,
        cfg.flux_kernel,
        &profile,
        &constants,
        eps,
        cfg.quadrature,
    )?;
    let u0 = GridField::new(grid.sample(|x| (problem.u0)(x)), 0.0);
    Ok(Discretization {
        grid,
        profile,
        constants,
        op,
        flux,
        u0,
    })
}

pub fn time_step(cfg: &StudyConfig, op: &NonlocalOperator) -> f64 {
    match cfg.dt {
        DtRule::Auto => solver::auto_dt(op),
        DtRule::Fixed(dt) => dt,
    }
}

/// Builds the limit solution the study measures against.
pub fn reference_for(cfg: &StudyConfig, h: f64) -> Result<ReferenceSolution> {
    let mut problem = reference::catalog(cfg.case);
    problem.t_end = cfg.t_end;
    if cfg.datum == DatumChoice::Zero && !problem.g.is_zero() {
        problem.g = BoundaryDatum::zero();
        problem.exact = None;
    }
    let want_fd = match cfg.reference {
        ReferenceChoice::Fd => true,
        ReferenceChoice::Exact => false,
        ReferenceChoice::Auto => problem.exact.is_none(),
    };
    if want_fd {
        let h_ref = h / 4.0;
        reference::solve_heat_fd(&problem, h_ref, h_ref)
    } else {
        ReferenceSolution::exact(&problem).ok_or_else(|| {
            Error::Config(format!("case {} has no closed form with this flux datum", cfg.case))
        })
    }
}

/// Everything produced by a single-`eps` run.
pub struct CaseRun {
    pub row: StudyRow,
    pub grid: Grid,
    pub field: GridField,
    pub reference: ReferenceSolution,
}

pub fn run_case(cfg: &StudyConfig, eps: f64) -> Result<CaseRun> {
    let started = Instant::now();
    let disc = discretize(cfg, eps)?;
    let dt = time_step(cfg, &disc.op);
    let field = solver::integrate_final(&disc.op, &disc.flux, &disc.u0, cfg.t_end, dt, cfg.scheme)?;
    let reference = reference_for(cfg, disc.grid.h())?;
    let errs = error_norms(&field, &disc.grid, &reference, cfg.t_end, &WEAK_TEST_FUNCTIONS);
    let mass_drift = disc.flux.is_trivial().then(|| {
        let vols = disc.grid.volumes();
        (field.integral(vols) - disc.u0.integral(vols)).abs()
    });
    let picard_gap = if cfg.picard_check {
        Some(picard_gap(&disc.op, &disc.flux, &disc.u0)?)
    } else {
        None
    };
    let runtime_s = started.elapsed().as_secs_f64();
    info!(
        "eps = {eps}: {} nodes, dt = {dt:.3e}, sup = {:.3e}, l1 = {:.3e} ({runtime_s:.2} s)",
        disc.grid.len(),
        errs.sup,
        errs.l1
    );
    Ok(CaseRun {
        row: StudyRow {
            eps,
            h: disc.grid.h(),
            nodes: disc.grid.len(),
            dt,
            sup_error: errs.sup,
            l1_error: errs.l1,
            weak_errors: errs.weak,
            runtime_s,
            mass_drift,
            picard_gap,
            reference_error: reference.error_estimate,
        },
        grid: disc.grid,
        field,
        reference,
    })
}

fn picard_gap(op: &NonlocalOperator, fa: &FluxAssembler, u0: &GridField) -> Result<f64> {
    let t0 = 0.8 * PicardConfig::max_window(op);
    let out = solver::picard_solve(op, fa, u0, &PicardConfig::new(t0))?;
    let rk = solver::integrate_final(op, fa, u0, t0, t0 / 2000.0, Scheme::Rk4)?;
    Ok(sup_diff(out.field.values(), rk.values()))
}

pub(crate) fn sup_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()))
}

/// Runs every `eps` of the sweep. Rows run concurrently and are reported in
/// `eps_list` order; a failed row is recorded and skipped.
pub fn run_study(cfg: &StudyConfig) -> Result<StudyResult> {
    cfg.validate()?;
    let outcomes: Vec<(f64, Result<StudyRow>)> = cfg
        .eps_list
        .par_iter()
        .map(|&eps| (eps, run_case(cfg, eps).map(|run| run.row)))
        .collect();
    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for (eps, outcome) in outcomes {
        match outcome {
            Ok(row) => rows.push(row),
            Err(e) if e.is_validation() => return Err(e),
            Err(e) => {
                warn!("eps = {eps} failed: {e}");
                failures.push(RowFailure {
                    eps,
                    message: e.to_string(),
                })
            }
        }
    }
    if let Some(min_err) = rows.iter().map(|r| r.sup_error).reduce(f64::min) {
        for row in &rows {
            if let Some(re) = row.reference_error {
                if re > 0.1 * min_err {
                    warn!(
                        "reference error estimate {re:.2e} at eps = {} is not below 10% of the smallest error {min_err:.2e}",
                        row.eps
                    );
                }
            }
        }
    }
    Ok(StudyResult::from_rows(cfg.clone(), rows, failures))
}

/// Picard-versus-stepper comparison over `[0, T]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PicardComparison {
    pub eps: f64,
    pub window: f64,
    pub windows: usize,
    pub max_iterations: usize,
    pub max_ratio: f64,
    pub sup_difference: f64,
}

pub fn compare_picard(cfg: &StudyConfig, eps: f64) -> Result<PicardComparison> {
    let disc = discretize(cfg, eps)?;
    let t0 = 0.8 * PicardConfig::max_window(&disc.op);
    let pcfg = PicardConfig::new(t0);
    let (picard, windows) = solver::picard_integrate(&disc.op, &disc.flux, &disc.u0, cfg.t_end, &pcfg)?;
    let dt = (t0 / 200.0).min(solver::stability_limit(&disc.op, Scheme::Rk4));
    let rk = solver::integrate_final(&disc.op, &disc.flux, &disc.u0, cfg.t_end, dt, Scheme::Rk4)?;
    Ok(PicardComparison {
        eps,
        window: t0,
        windows: windows.len(),
        max_iterations: windows.iter().map(|w| w.iterations).max().unwrap_or(0),
        max_ratio: windows
            .iter()
            .flat_map(|w| w.ratios.iter().copied())
            .fold(0.0, f64::max),
        sup_difference: sup_diff(picard.values(), rk.values()),
    })
}

/// `%.6e`-style formatting: six fractional digits, signed two-digit exponent.
pub fn format_sci(v: f64) -> String {
    if !v.is_finite() {
        return format!("{v}");
    }
    let s = format!("{v:.6e}");
    let (mantissa, exp) = s.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    let sign = if exp < 0 { '-' } else { '+' };
    format!("{mantissa}e{sign}{:02}", exp.abs())
}

pub fn csv_string(result: &StudyResult) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for row in &result.rows {
        let weak = |j: usize| row.weak_errors.get(j).copied().unwrap_or(f64::NAN);
        let fields = [
            row.eps,
            row.sup_error,
            row.l1_error,
            weak(0),
            weak(1),
            weak(2),
            row.runtime_s,
        ];
        let line: Vec<String> = fields.iter().map(|&v| format_sci(v)).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    out
}

/// Parses CSV text produced by [`csv_string`] into numeric rows.
pub fn parse_csv(text: &str) -> Result<Vec<Vec<f64>>> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h.trim() == CSV_HEADER => {}
        other => {
            return Err(Error::Config(format!(
                "unexpected CSV header {:?}",
                other.unwrap_or("")
            )))
        }
    }
    lines
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            l.split(',')
                .map(|f| {
                    f.trim()
                        .parse::<f64>()
                        .map_err(|_| Error::Config(format!("bad CSV field `{f}`")))
                })
                .collect()
        })
        .collect()
}

pub fn plot_script(csv_name: &str, image_name: &str) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "# log-log error curves; run with: gnuplot plot.gp");
    let _ = writeln!(s, "set terminal pngcairo size 900,600");
    let _ = writeln!(s, "set output '{image_name}'");
    let _ = writeln!(s, "set datafile separator ','");
    let _ = writeln!(s, "set logscale xy");
    let _ = writeln!(s, "set key top left");
    let _ = writeln!(s, "set grid");
    let _ = writeln!(s, "set xlabel 'eps'");
    let _ = writeln!(s, "set ylabel 'error at T'");
    let _ = writeln!(
        s,
        "plot '{csv_name}' using 1:2 skip 1 with linespoints title 'sup', \\"
    );
    let cols = [(3, "L1"), (4, "weak 1"), (5, "weak x"), (6, "weak sin")];
    for (k, (col, title)) in cols.iter().enumerate() {
        let tail = if k + 1 == cols.len() { "" } else { ", \\" };
        let _ = writeln!(
            s,
            "     '{csv_name}' using 1:{col} skip 1 with linespoints title '{title}'{tail}"
        );
    }
    s
}

#[derive(Clone, Debug, PartialEq)]
pub struct OutputPaths {
    pub csv: PathBuf,
    pub plot: PathBuf,
    pub manifest: PathBuf,
}

impl OutputPaths {
    pub fn in_dir(dir: &Path) -> Self {
        OutputPaths {
            csv: dir.join("errors.csv"),
            plot: dir.join("plot.gp"),
            manifest: dir.join("manifest.json"),
        }
    }
}

fn write(path: &Path, contents: &str) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    std::fs::write(path, contents).map_err(|e| Error::io(path, e))
}

/// Writes the error table, a gnuplot script and a JSON manifest.
pub fn emit_outputs(result: &StudyResult, paths: &OutputPaths) -> Result<()> {
    write(&paths.csv, &csv_string(result))?;
    let csv_name = paths
        .csv
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| "errors.csv".into());
    write(&paths.plot, &plot_script(&csv_name, "errors.png"))?;
    let manifest = serde_json::to_string_pretty(result)
        .map_err(|e| Error::Config(format!("manifest serialization failed: {e}")))?;
    write(&paths.manifest, &manifest)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reference::{CaseName, Provenance};

    fn row(eps: f64, sup: f64) -> StudyRow {
        StudyRow {
            eps,
            h: eps / 20.0,
            nodes: 10,
            dt: 1e-4,
            sup_error: sup,
            l1_error: sup / 2.0,
            weak_errors: vec![sup / 4.0, sup / 8.0, sup / 16.0],
            runtime_s: 0.5,
            mass_drift: None,
            picard_gap: None,
            reference_error: None,
        }
    }

    #[test]
    fn exact_power_law_order() {
        assert!((fit_order(&[0.2, 0.1, 0.05], &[0.08, 0.04, 0.02]).unwrap() - 1.0).abs() < 1e-12);
        let eps = [0.3, 0.17, 0.08, 0.031];
        let err: Vec<f64> = eps.iter().map(|e: &f64| 3.7 * e.powf(1.63)).collect();
        assert!((fit_order(&eps, &err).unwrap() - 1.63).abs() < 1e-10);
        assert_eq!(fit_order(&[0.1], &[0.2]), None);
        assert_eq!(fit_order(&[0.1, 0.05], &[0.2, 0.0]), None);
    }

    #[test]
    fn orders_absent_for_single_row() {
        let cfg = StudyConfig::for_case(CaseName::Cosine, vec![0.2]);
        let r = StudyResult::from_rows(cfg, vec![row(0.2, 0.1)], vec![]);
        assert!(r.orders.is_none());
    }

    #[test]
    fn orders_use_the_last_three_rows() {
        let cfg = StudyConfig::for_case(CaseName::Cosine, vec![0.4, 0.2, 0.1, 0.05]);
        let rows = vec![row(0.4, 5.0), row(0.2, 0.08), row(0.1, 0.04), row(0.05, 0.02)];
        let r = StudyResult::from_rows(cfg, rows, vec![]);
        let o = r.orders.unwrap();
        assert!((o.sup.unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(o.weak.len(), 3);
    }

    #[test]
    fn error_norms_examples() {
        let d = Domain::interval(0.0, 1.0).unwrap();
        let grid = build_grid(&d, 0.01).unwrap();
        let reference = ReferenceSolution::from_fn(|x, t| x[0].sin() + t, Provenance::Exact);
        let exact = GridField::new(grid.sample(|x| reference.eval(x, 0.3)), 0.3);
        let e = error_norms(&exact, &grid, &reference, 0.3, &WEAK_TEST_FUNCTIONS);
        assert!(e.sup < 1e-9 && e.l1 < 1e-9 && e.weak.iter().all(|&w| w < 1e-9));

        let c = 0.25;
        let shifted = GridField::new(exact.values().iter().map(|v| v + c).collect(), 0.3);
        let e = error_norms(&shifted, &grid, &reference, 0.3, &WEAK_TEST_FUNCTIONS);
        assert!((e.sup - c).abs() < 1e-12);
        assert!((e.l1 - c * d.measure()).abs() < 1e-12);
        assert!((e.weak[0] - c * d.measure()).abs() < 1e-12);
    }

    #[test]
    fn weak_norm_damps_boundary_layers() {
        let d = Domain::interval(0.0, 1.0).unwrap();
        let reference = ReferenceSolution::from_fn(|_, _| 0.0, Provenance::Exact);
        let mut prev = f64::INFINITY;
        for eps in [0.2, 0.1, 0.05, 0.025] {
            let grid = build_grid(&d, eps / 20.0).unwrap();
            let bump = GridField::new(grid.sample(|x| if x[0] < eps { 1.0 } else { 0.0 }), 0.0);
            let e = error_norms(&bump, &grid, &reference, 0.0, &[TestFunction::Sin]);
            // direct oracle: ∫_0^eps sin(pi x) dx = (1 - cos(pi eps)) / pi
            let oracle = (1.0 - (PI * eps).cos()) / PI;
            assert!((e.weak[0] - oracle).abs() < 1e-3 * eps, "{} vs {oracle}", e.weak[0]);
            assert!(e.weak[0] <= eps);
            assert_eq!(e.sup, 1.0);
            assert!(e.weak[0] < prev);
            prev = e.weak[0];
        }
    }

    #[test]
    fn sci_format() {
        assert_eq!(format_sci(0.0123456789), "1.234568e-02");
        assert_eq!(format_sci(12345.0), "1.234500e+04");
        assert_eq!(format_sci(0.0), "0.000000e+00");
        assert_eq!(format_sci(-2.5e-120), "-2.500000e-120");
    }

    #[test]
    fn csv_shapes() {
        let cfg = StudyConfig::for_case(CaseName::Cosine, vec![0.2]);
        let empty = StudyResult::from_rows(cfg.clone(), vec![], vec![]);
        assert_eq!(csv_string(&empty), format!("{CSV_HEADER}\n"));
        let full = StudyResult::from_rows(cfg, vec![row(0.2, 0.1), row(0.1, 0.05), row(0.05, 0.02)], vec![]);
        let text = csv_string(&full);
        assert_eq!(text.lines().count(), 4);
        let parsed = parse_csv(&text).unwrap();
        assert_eq!(parsed.len(), 3);
        for (p, r) in parsed.iter().zip(&full.rows) {
            assert_eq!(p.len(), 7);
            assert!((p[0] - r.eps).abs() <= 1e-12);
            assert!((p[1] - r.sup_error).abs() <= 5e-7 * r.sup_error);
        }
    }

    #[test]
    fn emits_files() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = StudyConfig::for_case(CaseName::Cosine, vec![0.2, 0.1]);
        let result = StudyResult::from_rows(cfg, vec![row(0.2, 0.1), row(0.1, 0.05)], vec![]);
        let paths = OutputPaths::in_dir(&dir.path().join("nested"));
        emit_outputs(&result, &paths).unwrap();
        let csv = std::fs::read_to_string(&paths.csv).unwrap();
        assert!(csv.starts_with(CSV_HEADER));
        let plot = std::fs::read_to_string(&paths.plot).unwrap();
        assert!(plot.contains("set logscale xy") && plot.contains("errors.csv"));
        let manifest: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(&paths.manifest).unwrap()).unwrap();
        assert!(manifest["orders"]["sup"].as_f64().is_some());
        assert_eq!(manifest["config"]["case"], "Cosine");
    }

    #[test]
    fn emit_reports_path_on_failure() {
        let dir = tempfile::tempdir().unwrap();
        let blocker = dir.path().join("file");
        std::fs::write(&blocker, "x").unwrap();
        let cfg = StudyConfig::for_case(CaseName::Cosine, vec![0.2]);
        let result = StudyResult::from_rows(cfg, vec![], vec![]);
        let err = emit_outputs(&result, &OutputPaths::in_dir(&blocker.join("sub"))).unwrap_err();
        assert!(matches!(err, Error::Io { .. }));
        assert!(err.to_string().contains("file"));
    }
}
