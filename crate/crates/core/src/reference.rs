//! Classical Neumann heat-equation references: manufactured exact solutions
//! and Crank–Nicolson finite-difference solvers (1D and radial).

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{BoundaryDatum, Domain, Point};

pub type SpaceFn = Arc<dyn Fn(&Point) -> f64 + Send + Sync>;
pub type SpaceTimeFn = Arc<dyn Fn(&Point, f64) -> f64 + Send + Sync>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum CaseName {
    Cosine,
    PolyFlux,
    DiskRadial,
}

impl CaseName {
    pub fn parse(s: &str) -> Result<Self> {
        match s.trim() {
            "cosine" => Ok(CaseName::Cosine),
            "poly-flux" => Ok(CaseName::PolyFlux),
            "disk-radial" => Ok(CaseName::DiskRadial),
            other => Err(Error::UnknownCase(other.to_string())),
        }
    }
}

impl fmt::Display for CaseName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CaseName::Cosine => "cosine",
            CaseName::PolyFlux => "poly-flux",
            CaseName::DiskRadial => "disk-radial",
        })
    }
}

/// `u_t = Δu` in `Ω`, `∂u/∂η = g` on `∂Ω`, `u(·, 0) = u0`.
#[derive(Clone)]
pub struct HeatProblem {
    pub name: CaseName,
    pub domain: Domain,
    pub u0: SpaceFn,
    pub g: BoundaryDatum,
    pub t_end: f64,
    pub exact: Option<SpaceTimeFn>,
}

impl fmt::Debug for HeatProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("HeatProblem")
            .field("name", &self.name)
            .field("domain", &self.domain)
            .field("t_end", &self.t_end)
            .field("exact", &self.exact.is_some())
            .finish_non_exhaustive()
    }
}

/// `J_0` by its power series; accurate to rounding for `|x| <= 8`.
pub fn bessel_j0(x: f64) -> f64 {
    let q = -0.25 * x * x;
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..60 {
        term *= q / (k * k) as f64;
        sum += term;
        if term.abs() < 1e-18 * sum.abs().max(1e-300) {
            break;
        }
    }
    sum
}

/// `J_1` by its power series.
pub fn bessel_j1(x: f64) -> f64 {
    let q = -0.25 * x * x;
    let mut term = 0.5 * x;
    let mut sum = term;
    for k in 1..60 {
        term *= q / (k * (k + 1)) as f64;
        sum += term;
        if term.abs() < 1e-18 * sum.abs().max(1e-300) {
            break;
        }
    }
    sum
}

/// First positive zero of `J_1` (so `J_0'(λ) = 0`), by bisection.
pub fn first_neumann_root() -> f64 {
    let (mut lo, mut hi) = (3.0, 4.5);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if bessel_j1(lo) * bessel_j1(mid) <= 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

pub fn exact_catalog(name: &str) -> Result<HeatProblem> {
    let case = CaseName::parse(name)?;
    Ok(catalog(case))
}

pub fn catalog(case: CaseName) -> HeatProblem {
    match case {
        CaseName::Cosine => HeatProblem {
            name: case,
            domain: Domain::Interval { a: 0.0, b: 1.0 },
            u0: Arc::new(|x| (PI * x[0]).cos()),
            g: BoundaryDatum::zero(),
            t_end: 0.1,
            exact: Some(Arc::new(|x, t| (-PI * PI * t).exp() * (PI * x[0]).cos())),
        },
        CaseName::PolyFlux => HeatProblem {
            name: case,
            domain: Domain::Interval { a: 0.0, b: 1.0 },
            u0: Arc::new(|x| x[0] * x[0]),
            g: BoundaryDatum::new(|xbar, _| if xbar[0] > 0.5 { 2.0 } else { 0.0 }),
            t_end: 0.1,
            exact: Some(Arc::new(|x, t| x[0] * x[0] + 2.0 * t)),
        },
        CaseName::DiskRadial => {
            let lambda = first_neumann_root();
            HeatProblem {
                name: case,
                domain: Domain::Disk {
                    center: [0.0, 0.0],
                    radius: 1.0,
                },
                u0: Arc::new(move |x| bessel_j0(lambda * x[0].hypot(x[1]))),
                g: BoundaryDatum::zero(),
                t_end: 0.1,
                exact: Some(Arc::new(move |x, t| {
                    (-lambda * lambda * t).exp() * bessel_j0(lambda * x[0].hypot(x[1]))
                })),
            }
        }
    }
}

impl HeatProblem {
    /// Largest `|u_t - Δu|` of the exact solution over `samples x samples`
    /// interior points, by central differences.
    pub fn exact_residual(&self, samples: usize) -> Option<f64> {
        let exact = self.exact.as_ref()?;
        // Richardson-combined central differences, fourth order in the step.
        let d = 1e-3;
        let t_lo = 0.05;
        let mut worst: f64 = 0.0;
        for a in 0..samples {
            for b in 0..samples {
                let fa = (a as f64 + 0.5) / samples as f64;
                let t = t_lo + 0.9 * self.t_end * (b as f64 + 0.5) / samples as f64;
                let (x, lap_axes): (Point, usize) = match self.domain {
                    Domain::Interval { a: lo, b: hi } => ([lo + (hi - lo) * fa, 0.0], 1),
                    Domain::Disk { center, radius } => {
                        let r = 0.98 * radius * fa;
                        let th = 2.0 * PI * ((a * 7 + b * 3) % samples) as f64 / samples as f64;
                        ([center[0] + r * th.cos(), center[1] + r * th.sin()], 2)
                    }
                };
                let u = exact(&x, t);
                let dt = |s: f64| (exact(&x, t + s) - exact(&x, t - s)) / (2.0 * s);
                let ut = (4.0 * dt(d / 2.0) - dt(d)) / 3.0;
                let mut lap = 0.0;
                for axis in 0..lap_axes {
                    let second = |s: f64| {
                        let mut p = x;
                        let mut m = x;
                        p[axis] += s;
                        m[axis] -= s;
                        (exact(&p, t) - 2.0 * u + exact(&m, t)) / (s * s)
                    };
                    lap += (4.0 * second(d / 2.0) - second(d)) / 3.0;
                }
                worst = worst.max((ut - lap).abs());
            }
        }
        Some(worst)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Provenance {
    Exact,
    Fd1d,
    FdRadial,
}

/// Evaluable limit solution `u(x, t)`.
#[derive(Clone)]
pub struct ReferenceSolution {
    evaluator: SpaceTimeFn,
    pub provenance: Provenance,
    /// Richardson estimate of the discretization error at the final time.
    pub error_estimate: Option<f64>,
}

impl fmt::Debug for ReferenceSolution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ReferenceSolution")
            .field("provenance", &self.provenance)
            .field("error_estimate", &self.error_estimate)
            .finish_non_exhaustive()
    }
}

impl ReferenceSolution {
    pub fn exact(problem: &HeatProblem) -> Option<Self> {
        problem.exact.clone().map(|evaluator| ReferenceSolution {
            evaluator,
            provenance: Provenance::Exact,
            error_estimate: Some(0.0),
        })
    }

    pub fn from_fn<F: Fn(&Point, f64) -> f64 + Send + Sync + 'static>(f: F, provenance: Provenance) -> Self {
        ReferenceSolution {
            evaluator: Arc::new(f),
            provenance,
            error_estimate: None,
        }
    }

    pub fn eval(&self, x: &Point, t: f64) -> f64 {
        (self.evaluator)(x, t)
    }
}

/// Tabulated space-time solution on a uniform 1D mesh, bilinear lookup.
struct Table {
    x0: f64,
    h: f64,
    dt: f64,
    rows: Vec<Vec<f64>>,
}

impl Table {
    fn eval(&self, s: f64, t: f64) -> f64 {
        let nx = self.rows[0].len();
        let nt = self.rows.len();
        let fx = ((s - self.x0) / self.h).clamp(0.0, (nx - 1) as f64);
        let ft = (t / self.dt).clamp(0.0, (nt - 1) as f64);
        let i = (fx.floor() as usize).min(nx - 2);
        let k = (ft.floor() as usize).min(nt.saturating_sub(2));
        let ax = fx - i as f64;
        let at = ft - k as f64;
        let lerp = |row: &[f64]| row[i] * (1.0 - ax) + row[i + 1] * ax;
        if nt == 1 {
            return lerp(&self.rows[0]);
        }
        lerp(&self.rows[k]) * (1.0 - at) + lerp(&self.rows[k + 1]) * at
    }

    fn last(&self) -> &[f64] {
        self.rows.last().expect("table holds the initial row")
    }
}

/// Thomas algorithm for a tridiagonal system; `lower[0]` and `upper[n-1]` are unused.
fn solve_tridiagonal(lower: &[f64], diag: &[f64], upper: &[f64], rhs: &mut [f64]) {
    let n = diag.len();
    let mut c = vec![0.0; n];
    let mut beta = diag[0];
    rhs[0] /= beta;
    for i in 1..n {
        c[i - 1] = upper[i - 1] / beta;
        beta = diag[i] - lower[i] * c[i - 1];
        rhs[i] = (rhs[i] - lower[i] * rhs[i - 1]) / beta;
    }
    for i in (0..n - 1).rev() {
        rhs[i] -= c[i] * rhs[i + 1];
    }
}

/// Semi-discrete system `u' = A u + s(t)` on mesh points `0..=m`, tridiagonal `A`.
struct Tridiagonal {
    lower: Vec<f64>,
    diag: Vec<f64>,
    upper: Vec<f64>,
}

impl Tridiagonal {
    fn mul(&self, u: &[f64], out: &mut [f64]) {
        let n = u.len();
        for i in 0..n {
            let mut v = self.diag[i] * u[i];
            if i > 0 {
                v += self.lower[i] * u[i - 1];
            }
            if i + 1 < n {
                v += self.upper[i] * u[i + 1];
            }
            out[i] = v;
        }
    }
}

/// Crank–Nicolson march; `source(t)` returns the boundary source vector.
fn crank_nicolson<S: Fn(f64) -> Vec<f64>>(
    a: &Tridiagonal,
    u0: Vec<f64>,
    t_end: f64,
    dt_target: f64,
    source: S,
) -> (Vec<Vec<f64>>, f64) {
    let steps = (t_end / dt_target).ceil().max(1.0) as usize;
    let dt = t_end / steps as f64;
    let n = u0.len();
    let lower: Vec<f64> = a.lower.iter().map(|v| -0.5 * dt * v).collect();
    let upper: Vec<f64> = a.upper.iter().map(|v| -0.5 * dt * v).collect();
    let diag: Vec<f64> = a.diag.iter().map(|v| 1.0 - 0.5 * dt * v).collect();
    let mut rows = Vec::with_capacity(steps + 1);
    rows.push(u0);
    let mut au = vec![0.0; n];
    for k in 0..steps {
        let t = k as f64 * dt;
        let u = rows.last().expect("rows is seeded");
        a.mul(u, &mut au);
        let s0 = source(t);
        let s1 = source(t + dt);
        let mut rhs: Vec<f64> = (0..n)
            .map(|i| u[i] + 0.5 * dt * au[i] + 0.5 * dt * (s0[i] + s1[i]))
            .collect();
        solve_tridiagonal(&lower, &diag, &upper, &mut rhs);
        rows.push(rhs);
    }
    (rows, dt)
}

fn fd_interval(problem: &HeatProblem, a: f64, b: f64, h_target: f64, dt: f64) -> Table {
    let m = ((b - a) / h_target).round().max(2.0) as usize;
    let h = (b - a) / m as f64;
    let inv = 1.0 / (h * h);
    let n = m + 1;
    let mut op = Tridiagonal {
        lower: vec![inv; n],
        diag: vec![-2.0 * inv; n],
        upper: vec![inv; n],
    };
    // ghost points: u_{-1} = u_1 + 2h g(a), u_{m+1} = u_{m-1} + 2h g(b)
    op.upper[0] = 2.0 * inv;
    op.lower[m] = 2.0 * inv;
    let u0: Vec<f64> = (0..n).map(|i| (problem.u0)(&[a + i as f64 * h, 0.0])).collect();
    let g = problem.g.clone();
    let source = move |t: f64| {
        let mut s = vec![0.0; n];
        s[0] = 2.0 * g.eval(&[a, 0.0], t) / h;
        s[m] = 2.0 * g.eval(&[b, 0.0], t) / h;
        s
    };
    let (rows, dt) = crank_nicolson(&op, u0, problem.t_end, dt, source);
    Table { x0: a, h, dt, rows }
}

fn fd_radial(problem: &HeatProblem, radius: f64, h_target: f64, dt: f64) -> Table {
    let dim = 2.0;
    let m = (radius / h_target).round().max(2.0) as usize;
    let h = radius / m as f64;
    let inv = 1.0 / (h * h);
    let n = m + 1;
    let mut op = Tridiagonal {
        lower: vec![0.0; n],
        diag: vec![-2.0 * inv; n],
        upper: vec![0.0; n],
    };
    // r = 0: u_t = N u_rr with u_{-1} = u_1
    op.diag[0] = -2.0 * dim * inv;
    op.upper[0] = 2.0 * dim * inv;
    for j in 1..n {
        let r = j as f64 * h;
        let c = (dim - 1.0) / (2.0 * h * r);
        op.lower[j] = inv - c;
        if j < m {
            op.upper[j] = inv + c;
        }
    }
    // r = R: ghost u_{m+1} = u_{m-1} + 2h g
    op.lower[m] = 2.0 * inv;
    let u0: Vec<f64> = (0..n).map(|j| (problem.u0)(&[j as f64 * h, 0.0])).collect();
    let g = problem.g.clone();
    let coef = 2.0 / h + (dim - 1.0) / radius;
    let source = move |t: f64| {
        let mut s = vec![0.0; n];
        s[m] = coef * g.eval(&[radius, 0.0], t);
        s
    };
    let (rows, dt) = crank_nicolson(&op, u0, problem.t_end, dt, source);
    Table { x0: 0.0, h, dt, rows }
}

fn check_radial(problem: &HeatProblem, center: Point, radius: f64) -> Result<()> {
    for k in 1..8 {
        let r = radius * k as f64 / 8.0;
        let base = (problem.u0)(&[center[0] + r, center[1]]);
        for q in 1..6 {
            let th = q as f64;
            let v = (problem.u0)(&[center[0] + r * th.cos(), center[1] + r * th.sin()]);
            if (v - base).abs() > 1e-12 * base.abs().max(1.0) {
                return Err(Error::Unsupported(
                    "finite-difference reference on the disk needs radially symmetric data".into(),
                ));
            }
        }
        let gb = problem.g.eval(&[center[0] + radius, center[1]], 0.0);
        let gq = problem.g.eval(&[center[0] - radius, center[1]], 0.0);
        if (gb - gq).abs() > 1e-12 * gb.abs().max(1.0) {
            return Err(Error::Unsupported(
                "finite-difference reference on the disk needs a radially symmetric flux".into(),
            ));
        }
    }
    Ok(())
}

/// Crank–Nicolson reference with ghost-point Neumann closure. The Richardson
/// estimate compares against a run at `2 h_ref`, `2 dt_ref`.
pub fn solve_heat_fd(problem: &HeatProblem, h_ref: f64, dt_ref: f64) -> Result<ReferenceSolution> {
    if !(h_ref > 0.0) || !(dt_ref > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "reference resolution must be positive, got h = {h_ref}, dt = {dt_ref}"
        )));
    }
    match problem.domain {
        Domain::Interval { a, b } => {
            let fine = fd_interval(problem, a, b, h_ref, dt_ref);
            let coarse = fd_interval(problem, a, b, 2.0 * h_ref, 2.0 * dt_ref);
            let est = richardson(&fine, &coarse);
            let table = Arc::new(fine);
            Ok(ReferenceSolution {
                evaluator: Arc::new(move |x, t| table.eval(x[0], t)),
                provenance: Provenance::Fd1d,
                error_estimate: Some(est),
            })
        }
        Domain::Disk { center, radius } => {
            check_radial(problem, center, radius)?;
            let fine = fd_radial(problem, radius, h_ref, dt_ref);
            let coarse = fd_radial(problem, radius, 2.0 * h_ref, 2.0 * dt_ref);
            let est = richardson(&fine, &coarse);
            let table = Arc::new(fine);
            Ok(ReferenceSolution {
                evaluator: Arc::new(move |x, t| {
                    table.eval((x[0] - center[0]).hypot(x[1] - center[1]), t)
                }),
                provenance: Provenance::FdRadial,
                error_estimate: Some(est),
            })
        }
    }
}

// Second-order scheme: error(fine) ≈ |fine - coarse| / 3 at shared mesh points.
fn richardson(fine: &Table, coarse: &Table) -> f64 {
    let f = fine.last();
    let c = coarse.last();
    c.iter()
        .enumerate()
        .map(|(j, cv)| {
            let x = coarse.x0 + j as f64 * coarse.h;
            let k = ((x - fine.x0) / fine.h).round() as usize;
            (f[k.min(f.len() - 1)] - cv).abs() / 3.0
        })
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bessel_values() {
        assert!((bessel_j0(0.0) - 1.0).abs() < 1e-16);
        assert!((bessel_j0(1.0) - 0.765_197_686_557_966_6).abs() < 1e-15);
        assert!((bessel_j1(1.0) - 0.440_050_585_744_933_5).abs() < 1e-15);
        assert!((first_neumann_root() - 3.831_705_970_207_512).abs() < 1e-12);
    }

    #[test]
    fn cosine_case() {
        let p = exact_catalog("cosine").unwrap();
        let ex = p.exact.clone().unwrap();
        for x in [0.0, 0.3, 0.9] {
            assert!((ex(&[x, 0.0], 0.0) - (p.u0)(&[x, 0.0])).abs() < 1e-15);
        }
        // u_x vanishes at both endpoints
        let d = 1e-6;
        let ux0 = (ex(&[d, 0.0], 0.0) - ex(&[-d, 0.0], 0.0)) / (2.0 * d);
        let ux1 = (ex(&[1.0 + d, 0.0], 0.0) - ex(&[1.0 - d, 0.0], 0.0)) / (2.0 * d);
        assert!(ux0.abs() < 1e-8 && ux1.abs() < 1e-8);
        assert!(p.exact_residual(50).unwrap() < 1e-6);
    }

    #[test]
    fn poly_flux_case() {
        let p = exact_catalog("poly-flux").unwrap();
        assert!(p.exact_residual(20).unwrap() < 1e-6);
        assert_eq!(p.g.eval(&[1.0, 0.0], 0.0), 2.0);
        assert_eq!(p.g.eval(&[0.0, 0.0], 0.0), 0.0);
    }

    #[test]
    fn disk_case_residual() {
        let p = exact_catalog("disk-radial").unwrap();
        assert!(p.exact_residual(20).unwrap() < 1e-6);
    }

    #[test]
    fn unknown_case() {
        assert!(matches!(exact_catalog("square"), Err(Error::UnknownCase(_))));
    }

    #[test]
    fn fd_cosine_accuracy() {
        let p = exact_catalog("cosine").unwrap();
        let r = solve_heat_fd(&p, 1.0 / 400.0, 1e-4).unwrap();
        let ex = p.exact.clone().unwrap();
        let err = (0..=400)
            .map(|i| {
                let x = [i as f64 / 400.0, 0.0];
                (r.eval(&x, 0.1) - ex(&x, 0.1)).abs()
            })
            .fold(0.0, f64::max);
        assert!(err < 1e-5, "{err}");
        assert!(r.error_estimate.unwrap() < 1e-5);
    }

    #[test]
    fn fd_poly_flux_is_exact() {
        let p = exact_catalog("poly-flux").unwrap();
        let r = solve_heat_fd(&p, 1.0 / 50.0, 1e-3).unwrap();
        for i in 0..=50 {
            let x = [i as f64 / 50.0, 0.0];
            for t in [0.0, 0.05, 0.1] {
                assert!((r.eval(&x, t) - (x[0] * x[0] + 2.0 * t)).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn fd_constant_state() {
        let mut p = exact_catalog("cosine").unwrap();
        p.u0 = Arc::new(|_| 1.0);
        let r = solve_heat_fd(&p, 0.01, 1e-3).unwrap();
        assert!((r.eval(&[0.37, 0.0], 0.1) - 1.0).abs() < 1e-13);
    }

    #[test]
    fn fd_richardson_order() {
        let p = exact_catalog("cosine").unwrap();
        let ex = p.exact.clone().unwrap();
        let err = |h: f64| {
            let r = solve_heat_fd(&p, h, h * h / 4.0).unwrap();
            let m = (1.0 / h).round() as usize;
            (0..=m)
                .map(|i| {
                    let x = [i as f64 * h, 0.0];
                    (r.eval(&x, 0.1) - ex(&x, 0.1)).abs()
                })
                .fold(0.0, f64::max)
        };
        let ratio = err(1.0 / 40.0) / err(1.0 / 80.0);
        assert!((3.3..=4.7).contains(&ratio), "{ratio}");
    }

    #[test]
    fn fd_mass_balance() {
        let p = exact_catalog("poly-flux").unwrap();
        let h = 0.01;
        let r = solve_heat_fd(&p, h, 1e-3).unwrap();
        // trapezoid mass of the mesh function
        let mass = |t: f64| {
            (0..=100)
                .map(|i| {
                    let w = if i == 0 || i == 100 { 0.5 } else { 1.0 };
                    w * h * r.eval(&[i as f64 * h, 0.0], t)
                })
                .sum::<f64>()
        };
        let rate = (mass(0.1) - mass(0.0)) / 0.1;
        assert!((rate - 2.0).abs() < 1e-3, "{rate}");
    }

    #[test]
    fn fd_radial_matches_bessel_mode() {
        let p = exact_catalog("disk-radial").unwrap();
        let r = solve_heat_fd(&p, 1.0 / 200.0, 1e-4).unwrap();
        let ex = p.exact.clone().unwrap();
        let err = (0..=40)
            .map(|k| {
                let x = [0.0, k as f64 / 40.0 * 0.999];
                (r.eval(&x, 0.1) - ex(&x, 0.1)).abs()
            })
            .fold(0.0, f64::max);
        assert!(err < 1e-4, "{err}");
    }

    #[test]
    fn fd_rejects_non_radial_disk_data() {
        let mut p = exact_catalog("disk-radial").unwrap();
        p.u0 = Arc::new(|x| x[0]);
        assert!(matches!(solve_heat_fd(&p, 0.01, 1e-3), Err(Error::Unsupported(_))));
    }
}
