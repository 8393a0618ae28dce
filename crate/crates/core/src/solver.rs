//! Time integration of `u_t = L_eps u + b(t)`.
//!
//! The production path is explicit stepping (forward Euler or classical RK4).
//! A second, independent path builds the solution as the fixed point of
//! `T(w)(t) = u0 + ∫_0^t (L_eps w(s) + b(s)) ds` on short windows, which is
//! used to validate the stepper.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::operator::{FluxAssembler, NonlocalOperator};

/// Real part of the RK4 stability boundary on the negative axis.
pub const RK4_REAL_STABILITY: f64 = 2.785;

/// Nodal values of a field at one time.
#[derive(Clone, Debug, PartialEq)]
pub struct GridField {
    values: Vec<f64>,
    time: f64,
}

impl GridField {
    pub fn new(values: Vec<f64>, time: f64) -> Self {
        GridField { values, time }
    }

    pub fn zeros(len: usize, time: f64) -> Self {
        GridField::new(vec![0.0; len], time)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    /// `Σ_i vol_i u_i`.
    pub fn integral(&self, volumes: &[f64]) -> f64 {
        self.values.iter().zip(volumes).map(|(u, v)| u * v).sum()
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Scheme {
    Euler,
    Rk4,
}

impl Scheme {
    pub fn parse(s: &str) -> Result<Self> {
        match s.trim() {
            "euler" => Ok(Scheme::Euler),
            "rk4" => Ok(Scheme::Rk4),
            other => Err(Error::Config(format!(
                "unknown scheme `{other}` (expected euler or rk4)"
            ))),
        }
    }
}

impl std::fmt::Display for Scheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Scheme::Euler => "euler",
            Scheme::Rk4 => "rk4",
        })
    }
}

/// Largest admissible step. For Euler, `dt * 2 max_i d_i <= 1` keeps every
/// update a convex combination of old values plus the flux.
pub fn stability_limit(op: &NonlocalOperator, scheme: Scheme) -> f64 {
    let base = 1.0 / (2.0 * op.max_diagonal());
    match scheme {
        Scheme::Euler => base,
        Scheme::Rk4 => RK4_REAL_STABILITY * base,
    }
}

/// The default step `0.25 / (2 max_i d_i)`.
pub fn auto_dt(op: &NonlocalOperator) -> f64 {
    0.25 / (2.0 * op.max_diagonal())
}

fn check_dt(op: &NonlocalOperator, dt: f64, scheme: Scheme) -> Result<()> {
    let limit = stability_limit(op, scheme);
    if !(dt > 0.0) || dt > limit * (1.0 + 1e-12) {
        return Err(Error::UnstableStep { dt, limit });
    }
    Ok(())
}

fn check_pair(op: &NonlocalOperator, fa: &FluxAssembler, len: usize) -> Result<()> {
    if fa.len() != op.len() || len != op.len() {
        return Err(Error::Contract(format!(
            "operator has {} nodes, flux {} and field {len}",
            op.len(),
            fa.len()
        )));
    }
    Ok(())
}

/// Reusable work buffers for explicit stepping.
struct Stepper<'a> {
    op: &'a NonlocalOperator,
    fa: &'a FluxAssembler,
    scheme: Scheme,
    k: [Vec<f64>; 4],
    stage: Vec<f64>,
    flux: Vec<f64>,
}

impl<'a> Stepper<'a> {
    fn new(op: &'a NonlocalOperator, fa: &'a FluxAssembler, scheme: Scheme) -> Self {
        let n = op.len();
        Stepper {
            op,
            fa,
            scheme,
            k: [vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]],
            stage: vec![0.0; n],
            flux: vec![0.0; n],
        }
    }

    // out = L u + b(t)
    fn rhs(op: &NonlocalOperator, fa: &FluxAssembler, flux: &mut [f64], u: &[f64], t: f64, out: &mut [f64]) {
        op.apply_into(u, out);
        if !fa.is_trivial() {
            fa.flux_into(t, flux);
            for (o, b) in out.iter_mut().zip(flux.iter()) {
                *o += b;
            }
        }
    }

    fn advance(&mut self, u: &mut [f64], t: f64, dt: f64) {
        let (op, fa) = (self.op, self.fa);
        match self.scheme {
            Scheme::Euler => {
                let k1 = &mut self.k[0];
                Self::rhs(op, fa, &mut self.flux, u, t, k1);
                for (ui, ki) in u.iter_mut().zip(k1.iter()) {
                    *ui += dt * ki;
                }
            }
            Scheme::Rk4 => {
                let [k1, k2, k3, k4] = &mut self.k;
                let stage = &mut self.stage;
                Self::rhs(op, fa, &mut self.flux, u, t, k1);
                for ((s, ui), ki) in stage.iter_mut().zip(u.iter()).zip(k1.iter()) {
                    *s = ui + 0.5 * dt * ki;
                }
                Self::rhs(op, fa, &mut self.flux, stage, t + 0.5 * dt, k2);
                for ((s, ui), ki) in stage.iter_mut().zip(u.iter()).zip(k2.iter()) {
                    *s = ui + 0.5 * dt * ki;
                }
                Self::rhs(op, fa, &mut self.flux, stage, t + 0.5 * dt, k3);
                for ((s, ui), ki) in stage.iter_mut().zip(u.iter()).zip(k3.iter()) {
                    *s = ui + dt * ki;
                }
                Self::rhs(op, fa, &mut self.flux, stage, t + dt, k4);
                for (i, ui) in u.iter_mut().enumerate() {
                    *ui += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
                }
            }
        }
    }
}

/// One step from `(u, t)` to `t + dt`.
pub fn step(
    op: &NonlocalOperator,
    fa: &FluxAssembler,
    u: &GridField,
    t: f64,
    dt: f64,
    scheme: Scheme,
) -> Result<GridField> {
    check_pair(op, fa, u.len())?;
    check_dt(op, dt, scheme)?;
    let mut values = u.values().to_vec();
    Stepper::new(op, fa, scheme).advance(&mut values, t, dt);
    Ok(GridField::new(values, t + dt))
}

/// Time-ordered snapshots `0, dt, 2 dt, ..., T`.
#[derive(Clone, Debug)]
pub struct Trajectory {
    pub snapshots: Vec<GridField>,
    pub dt: f64,
    pub t_end: f64,
    pub scheme: Scheme,
}

impl Trajectory {
    pub fn last(&self) -> &GridField {
        self.snapshots.last().expect("trajectory holds the initial state")
    }
}

fn step_times(t_start: f64, t_end: f64, dt: f64) -> impl Iterator<Item = (f64, f64)> {
    let span = t_end - t_start;
    let full = (span / dt * (1.0 - 1e-12)).floor() as usize;
    let n = if (full as f64) * dt < span { full + 1 } else { full };
    (0..n).map(move |k| {
        let t = t_start + k as f64 * dt;
        let next = if k + 1 == n { t_end } else { t_start + (k + 1) as f64 * dt };
        (t, next - t)
    })
}

/// Integrates from `u0` (at `u0.time()`) to `t_end`, calling `observe` on every
/// state including the initial one. The last step is shortened to land on `t_end`.
pub fn integrate_with<F: FnMut(&[f64], f64)>(
    op: &NonlocalOperator,
    fa: &FluxAssembler,
    u0: &GridField,
    t_end: f64,
    dt: f64,
    scheme: Scheme,
    mut observe: F,
) -> Result<GridField> {
    check_pair(op, fa, u0.len())?;
    check_dt(op, dt, scheme)?;
    if !(t_end >= u0.time()) {
        return Err(Error::InvalidParameter(format!(
            "final time {t_end} precedes the initial time {}",
            u0.time()
        )));
    }
    let mut stepper = Stepper::new(op, fa, scheme);
    let mut u = u0.values().to_vec();
    observe(&u, u0.time());
    for (t, h) in step_times(u0.time(), t_end, dt) {
        stepper.advance(&mut u, t, h);
        observe(&u, t + h);
    }
    Ok(GridField::new(u, t_end))
}

/// Integrates and keeps only the final state.
pub fn integrate_final(
    op: &NonlocalOperator,
    fa: &FluxAssembler,
    u0: &GridField,
    t_end: f64,
    dt: f64,
    scheme: Scheme,
) -> Result<GridField> {
    integrate_with(op, fa, u0, t_end, dt, scheme, |_, _| {})
}

pub fn integrate(
    op: &NonlocalOperator,
    fa: &FluxAssembler,
    u0: &GridField,
    t_end: f64,
    dt: f64,
    scheme: Scheme,
) -> Result<Trajectory> {
    let mut snapshots = Vec::new();
    integrate_with(op, fa, u0, t_end, dt, scheme, |u, t| {
        snapshots.push(GridField::new(u.to_vec(), t))
    })?;
    if let Some(last) = snapshots.last_mut() {
        last.time = t_end;
    }
    Ok(Trajectory {
        snapshots,
        dt,
        t_end,
        scheme,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PicardConfig {
    /// Window length `t0`.
    pub t0: f64,
    pub max_iters: usize,
    /// Stop once `max_t ||w^{m+1}(t) - w^m(t)||_{L1}` drops below this.
    pub tol: f64,
    /// Trapezoid intervals per window.
    pub intervals: usize,
}

impl PicardConfig {
    pub fn new(t0: f64) -> Self {
        PicardConfig {
            t0,
            max_iters: 200,
            tol: 1e-13,
            intervals: 64,
        }
    }

    /// Largest admissible window, `0.5 / (2 max_i d_i)`.
    pub fn max_window(op: &NonlocalOperator) -> f64 {
        0.5 / (2.0 * op.max_diagonal())
    }
}

#[derive(Clone, Debug)]
pub struct PicardOutcome {
    /// State at the end of the window.
    pub field: GridField,
    pub iterations: usize,
    pub increments: Vec<f64>,
    /// `increments[m] / increments[m - 1]`.
    pub ratios: Vec<f64>,
}

/// `|||w||| = max_k Σ_i vol_i |w_k,i|`.
fn x_norm(w: &[Vec<f64>], volumes: &[f64]) -> f64 {
    w.iter()
        .map(|s| s.iter().zip(volumes).map(|(v, vol)| v.abs() * vol).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Cumulative trapezoid: `out[k] = base + Σ_{m<=k} (dt/2)(f[m-1] + f[m])`.
fn cumulative_trapezoid(base: &[f64], f: &[Vec<f64>], dt: f64, out: &mut [Vec<f64>]) {
    out[0].copy_from_slice(base);
    for k in 1..f.len() {
        let (done, rest) = out.split_at_mut(k);
        let prev = &done[k - 1];
        for (i, o) in rest[0].iter_mut().enumerate() {
            *o = prev[i] + 0.5 * dt * (f[k - 1][i] + f[k][i]);
        }
    }
}

/// Fixed-point solve on one window `[t_s, t_s + t0]`, `t_s = u0.time()`.
pub fn picard_solve(
    op: &NonlocalOperator,
    fa: &FluxAssembler,
    u0: &GridField,
    cfg: &PicardConfig,
) -> Result<PicardOutcome> {
    picard_window(op, fa, u0, cfg.t0, cfg)
}

fn picard_window(
    op: &NonlocalOperator,
    fa: &FluxAssembler,
    u0: &GridField,
    t0: f64,
    cfg: &PicardConfig,
) -> Result<PicardOutcome> {
    check_pair(op, fa, u0.len())?;
    let bound = PicardConfig::max_window(op);
    if !(t0 > 0.0) || t0 >= bound {
        return Err(Error::InvalidParameter(format!(
            "window t0 = {t0:e} must lie in (0, {bound:e}) for the map to contract"
        )));
    }
    if cfg.intervals == 0 {
        return Err(Error::InvalidParameter("picard needs at least one interval".into()));
    }
    let n = op.len();
    let m = cfg.intervals;
    let dt = t0 / m as f64;
    let ts = u0.time();
    let volumes = op.grid().volumes();

    let fluxes: Vec<Vec<f64>> = (0..=m)
        .map(|k| fa.flux_vector(ts + k as f64 * dt).into_values())
        .collect();
    let mut w: Vec<Vec<f64>> = vec![u0.values().to_vec(); m + 1];
    let mut next: Vec<Vec<f64>> = vec![vec![0.0; n]; m + 1];
    let mut rates: Vec<Vec<f64>> = vec![vec![0.0; n]; m + 1];
    let mut increments: Vec<f64> = Vec::new();
    let mut ratios: Vec<f64> = Vec::new();
    let mut growing = 0;

    for iter in 1..=cfg.max_iters {
        for k in 0..=m {
            op.apply_into(&w[k], &mut rates[k]);
            for (r, b) in rates[k].iter_mut().zip(&fluxes[k]) {
                *r += b;
            }
        }
        cumulative_trapezoid(u0.values(), &rates, dt, &mut next);
        let diff: Vec<Vec<f64>> = next
            .iter()
            .zip(&w)
            .map(|(a, b)| a.iter().zip(b).map(|(x, y)| x - y).collect())
            .collect();
        let inc = x_norm(&diff, volumes);
        std::mem::swap(&mut w, &mut next);
        if let Some(&prev) = increments.last() {
            if prev > 0.0 {
                let ratio = inc / prev;
                ratios.push(ratio);
                growing = if ratio >= 1.0 { growing + 1 } else { 0 };
                if growing >= 3 {
                    return Err(Error::NotContracting(format!(
                        "increment ratio >= 1 for 3 consecutive iterations (last {ratio:.3e}, increments {increments:?})"
                    )));
                }
            }
        }
        increments.push(inc);
        if inc < cfg.tol {
            let last = w.pop().expect("window has snapshots");
            return Ok(PicardOutcome {
                field: GridField::new(last, ts + t0),
                iterations: iter,
                increments,
                ratios,
            });
        }
    }
    Err(Error::NotContracting(format!(
        "no convergence to {:e} within {} iterations (last increment {:e})",
        cfg.tol,
        cfg.max_iters,
        increments.last().copied().unwrap_or(f64::NAN)
    )))
}

/// Chains fixed-point windows of length `cfg.t0` from `u0.time()` to `t_end`.
pub fn picard_integrate(
    op: &NonlocalOperator,
    fa: &FluxAssembler,
    u0: &GridField,
    t_end: f64,
    cfg: &PicardConfig,
) -> Result<(GridField, Vec<PicardOutcome>)> {
    let mut u = u0.clone();
    let mut windows = Vec::new();
    while t_end - u.time() > 1e-14 * t_end.abs().max(1.0) {
        let len = cfg.t0.min(t_end - u.time());
        let out = picard_window(op, fa, &u, len, cfg)?;
        u = out.field.clone();
        windows.push(out);
    }
    let mut field = u;
    field.time = t_end;
    Ok((field, windows))
}

/// Both sides of the Lipschitz estimate for the fixed-point map.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContractionReport {
    /// `|||T_{u0,g}(w) - T_{v0,h}(z)|||`.
    pub lhs: f64,
    /// `||u0 - v0||_{L1} + C t0 (|||w - z||| + ||g - h||)`.
    pub rhs: f64,
    /// Estimated `C = max(2 max_i d_i, max_k Σ_i vol_i |q_ik| / vol_k)`.
    pub constant: f64,
    pub initial_gap: f64,
    pub state_gap: f64,
    pub datum_gap: f64,
}

/// Evaluates the Lipschitz bound of `T` on `[t_s, t_s + t0]` for snapshot
/// sequences `w`, `z` on a uniform grid of `w.len() - 1` intervals.
///
/// `fa_g` and `fa_h` must share weights and differ only in their data.
#[allow(clippy::too_many_arguments)]
pub fn contraction_test(
    op: &NonlocalOperator,
    fa_g: &FluxAssembler,
    fa_h: &FluxAssembler,
    u0: &GridField,
    v0: &GridField,
    w: &[Vec<f64>],
    z: &[Vec<f64>],
    t0: f64,
) -> Result<ContractionReport> {
    check_pair(op, fa_g, u0.len())?;
    check_pair(op, fa_h, v0.len())?;
    if w.len() != z.len() || w.len() < 2 {
        return Err(Error::Contract(
            "w and z need the same snapshot grid with at least two times".into(),
        ));
    }
    if fa_g.kind() != fa_h.kind() || fa_g.collar().len() != fa_h.collar().len() {
        return Err(Error::Contract("flux assemblers must share their weights".into()));
    }
    let n = op.len();
    let m = w.len() - 1;
    let dt = t0 / m as f64;
    let ts = u0.time();
    let volumes = op.grid().volumes();
    let collar_vol = fa_g.collar().volumes();

    let mut rates = vec![vec![0.0; n]; m + 1];
    let mut datum_gap: f64 = 0.0;
    let mut gap = vec![0.0; n];
    let mut bdiff = vec![0.0; n];
    for k in 0..=m {
        let t = ts + k as f64 * dt;
        for (i, g) in gap.iter_mut().enumerate() {
            *g = w[k][i] - z[k][i];
        }
        op.apply_into(&gap, &mut rates[k]);
        let gv = fa_g.collar().flux_values(t);
        let hv = fa_h.collar().flux_values(t);
        let dg: Vec<f64> = gv.iter().zip(&hv).map(|(a, b)| a - b).collect();
        datum_gap = datum_gap.max(dg.iter().zip(collar_vol).map(|(d, v)| d.abs() * v).sum());
        fa_g.apply_values(&dg, &mut bdiff);
        for (r, b) in rates[k].iter_mut().zip(&bdiff) {
            *r += b;
        }
    }
    let base: Vec<f64> = u0.values().iter().zip(v0.values()).map(|(a, b)| a - b).collect();
    let mut out = vec![vec![0.0; n]; m + 1];
    cumulative_trapezoid(&base, &rates, dt, &mut out);
    let lhs = x_norm(&out, volumes);

    let diffs: Vec<Vec<f64>> = w
        .iter()
        .zip(z)
        .map(|(a, b)| a.iter().zip(b).map(|(x, y)| x - y).collect())
        .collect();
    let state_gap = x_norm(&diffs, volumes);
    let initial_gap = x_norm(&[base], volumes);
    let constant = (2.0 * op.max_diagonal()).max(fa_g.column_norm());
    Ok(ContractionReport {
        lhs,
        rhs: initial_gap + constant * t0 * (state_gap + datum_gap),
        constant,
        initial_gap,
        state_gap,
        datum_gap,
    })
}
