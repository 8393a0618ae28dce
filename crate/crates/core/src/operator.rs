//! Discrete nonlocal diffusion operator and boundary flux assembly.
//!
//! Both integrals use the midpoint rule on the cell-centered lattice. On a
//! uniform lattice the interaction weight between two cells depends only on
//! their offset, so the operator stores a single stencil and walks the grid
//! row spans instead of keeping per-node neighbor lists.
//!
//! With [`Quadrature::MomentMatched`] the midpoint weights are rescaled so the
//! lattice sums reproduce the continuum moments exactly: the interior stencil
//! maps `x_1^2` to 2 and a lattice-aligned flat boundary passes unit mass per
//! unit flux. At a fixed ratio `h / eps` the plain midpoint sums carry an
//! eps-independent relative error in both, which floors any eps-sweep.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{ExteriorCollar, Grid};
use crate::kernels::{self, FluxKernelKind, KernelProfile, NormalizationConstants};
use crate::solver::GridField;

// Offsets at |z| >= d (1 - SUPPORT_SLACK) are treated as outside the support.
const SUPPORT_SLACK: f64 = 1e-12;
const LANES: usize = 4;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum Quadrature {
    /// Node value times cell volume with the analytic constants.
    Midpoint,
    /// Midpoint weights rescaled to match the continuum second moment and
    /// boundary mass flux on the lattice.
    #[default]
    MomentMatched,
}

impl Quadrature {
    pub fn parse(s: &str) -> Result<Self> {
        match s.trim() {
            "midpoint" => Ok(Quadrature::Midpoint),
            "moment" | "moment-matched" => Ok(Quadrature::MomentMatched),
            other => Err(Error::Config(format!(
                "unknown quadrature `{other}` (expected midpoint or moment)"
            ))),
        }
    }
}

impl std::fmt::Display for Quadrature {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Quadrature::Midpoint => "midpoint",
            Quadrature::MomentMatched => "moment",
        })
    }
}

#[derive(Clone, Debug)]
struct StencilRow {
    dr: i64,
    half_width: i64,
    weights: Vec<f64>,
}

/// Realizes `(L_eps u)(x_i) = Σ_j w_ij (u_j - u_i)` with
/// `w_ij = eps^-2 J_eps(x_i - x_j) vol_j`.
#[derive(Clone, Debug)]
pub struct NonlocalOperator {
    grid: Grid,
    eps: f64,
    // C1, times the moment factor when the weights were rescaled
    c1: f64,
    stencil: Vec<StencilRow>,
    diag: Vec<f64>,
    max_diag: f64,
}

fn support_radius_sq(support: f64, eps: f64) -> f64 {
    let reach = support * eps * (1.0 - SUPPORT_SLACK);
    reach * reach
}

/// Midpoint assembly, `w_ij = eps^-2 J_eps(x_i - x_j) vol_j`.
pub fn assemble_operator(
    grid: &Grid,
    profile: &KernelProfile,
    constants: &NormalizationConstants,
    eps: f64,
) -> Result<NonlocalOperator> {
    assemble_operator_with(grid, profile, constants, eps, Quadrature::Midpoint)
}

pub fn assemble_operator_with(
    grid: &Grid,
    profile: &KernelProfile,
    constants: &NormalizationConstants,
    eps: f64,
    quadrature: Quadrature,
) -> Result<NonlocalOperator> {
    if !(eps > 0.0) {
        return Err(Error::InvalidParameter(format!("eps must be positive, got {eps}")));
    }
    if profile.dim() != grid.dim() {
        return Err(Error::InvalidParameter(format!(
            "kernel dimension {} does not match domain dimension {}",
            profile.dim(),
            grid.dim()
        )));
    }
    let h = grid.h();
    let reach = profile.support() * eps;
    if h > reach {
        return Err(Error::InvalidParameter(format!(
            "grid spacing {h} exceeds the interaction radius d*eps = {reach}"
        )));
    }
    let r2 = support_radius_sq(profile.support(), eps);
    let m = (reach / h).ceil() as i64;
    let row_reach = if grid.dim() == 1 { 0 } else { m };
    let vol = h.powi(grid.dim() as i32);
    let scale = vol / (eps * eps);
    let mut stencil = Vec::new();
    for dr in -row_reach..=row_reach {
        let dy = dr as f64 * h;
        if dy * dy >= r2 {
            continue;
        }
        let mut hw = 0;
        while {
            let dx = (hw + 1) as f64 * h;
            dx * dx + dy * dy < r2
        } {
            hw += 1;
        }
        let weights = (-hw..=hw)
            .map(|dc| {
                let xi = [dc as f64 * h, dy];
                scale * kernels::eval_j_eps(profile, constants.c1, eps, &xi[..grid.dim()])
            })
            .collect();
        stencil.push(StencilRow {
            dr,
            half_width: hw,
            weights,
        });
    }
    let mut c1 = constants.c1;
    if quadrature == Quadrature::MomentMatched {
        // interior image of x_1^2 is Σ w ξ_1^2; the continuum value is 2
        let second: f64 = stencil
            .iter()
            .flat_map(|row| {
                row.weights
                    .iter()
                    .enumerate()
                    .map(move |(c, w)| w * ((c as i64 - row.half_width) as f64 * h).powi(2))
            })
            .sum();
        let factor = 2.0 / second;
        c1 *= factor;
        for row in &mut stencil {
            row.weights.iter_mut().for_each(|w| *w *= factor);
        }
    }
    let mut op = NonlocalOperator {
        grid: grid.clone(),
        eps,
        c1,
        stencil,
        diag: Vec::new(),
        max_diag: 0.0,
    };
    let diag: Vec<f64> = (0..grid.len()).map(|i| op.row_weight_sum(i)).collect();
    op.max_diag = diag.iter().copied().fold(0.0, f64::max);
    op.diag = diag;
    Ok(op)
}

#[inline]
fn accumulate(acc: &mut [f64; LANES], w: &[f64], u: &[f64], ui: f64) {
    let mut wc = w.chunks_exact(LANES);
    let mut uc = u.chunks_exact(LANES);
    for (ws, us) in (&mut wc).zip(&mut uc) {
        for l in 0..LANES {
            acc[l] += ws[l] * (us[l] - ui);
        }
    }
    for (l, (wr, ur)) in wc.remainder().iter().zip(uc.remainder()).enumerate() {
        acc[l] += wr * (ur - ui);
    }
}

impl NonlocalOperator {
    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    /// `d_i = Σ_j w_ij`.
    pub fn diagonal(&self) -> &[f64] {
        &self.diag
    }

    pub fn max_diagonal(&self) -> f64 {
        self.max_diag
    }

    /// Spectral bound `2 C1 / eps^2` (with the rescaled `C1` under moment matching).
    pub fn operator_norm_bound(&self) -> f64 {
        2.0 * self.c1 / (self.eps * self.eps)
    }

    /// Calls `visit(row_weights, node_range_start)` for each overlap of the
    /// stencil centered at node `i` with a grid row, in ascending node order.
    #[inline]
    fn for_each_run<F: FnMut(&[f64], usize)>(&self, i: usize, mut visit: F) {
        let [ci, rj] = self.grid.cells()[i];
        for row in &self.stencil {
            let Some(span) = self.grid.row(rj + row.dr) else {
                continue;
            };
            let lo = (ci - row.half_width).max(span.col_lo);
            let hi = (ci + row.half_width).min(span.col_hi());
            if lo > hi {
                continue;
            }
            let w0 = (lo - (ci - row.half_width)) as usize;
            let len = (hi - lo + 1) as usize;
            let start = span.start + (lo - span.col_lo) as usize;
            visit(&row.weights[w0..w0 + len], start);
        }
    }

    fn row_weight_sum(&self, i: usize) -> f64 {
        let mut acc = [0.0; LANES];
        self.for_each_run(i, |w, _| {
            let mut chunks = w.chunks_exact(LANES);
            for c in &mut chunks {
                for l in 0..LANES {
                    acc[l] += c[l];
                }
            }
            for (l, v) in chunks.remainder().iter().enumerate() {
                acc[l] += v;
            }
        });
        (acc[0] + acc[1]) + (acc[2] + acc[3])
    }

    #[inline]
    fn apply_node(&self, i: usize, u: &[f64]) -> f64 {
        let ui = u[i];
        let mut acc = [0.0; LANES];
        self.for_each_run(i, |w, start| accumulate(&mut acc, w, &u[start..start + w.len()], ui));
        (acc[0] + acc[1]) + (acc[2] + acc[3])
    }

    /// Writes `L_eps u` into `out`. Node-parallel; each node sums in a fixed
    /// order, so the result does not depend on the thread count.
    pub fn apply_into(&self, u: &[f64], out: &mut [f64]) {
        assert_eq!(u.len(), self.len(), "field does not match the operator grid");
        assert_eq!(out.len(), self.len(), "output does not match the operator grid");
        out.par_iter_mut()
            .with_min_len(512)
            .enumerate()
            .for_each(|(i, o)| *o = self.apply_node(i, u));
    }

    pub fn apply(&self, u: &GridField) -> Result<GridField> {
        if u.len() != self.len() {
            return Err(Error::Contract(format!(
                "field has {} values, operator grid has {} nodes",
                u.len(),
                self.len()
            )));
        }
        let mut out = vec![0.0; self.len()];
        self.apply_into(u.values(), &mut out);
        Ok(GridField::new(out, u.time()))
    }

    /// Interaction partners `(j, w_ij)` of node `i`, ascending in `j`, including `j = i`.
    pub fn neighbors(&self, i: usize) -> Vec<(usize, f64)> {
        let mut out = Vec::new();
        self.for_each_run(i, |w, start| {
            out.extend(w.iter().enumerate().map(|(k, &wk)| (start + k, wk)));
        });
        out
    }
}

/// Sparse realization of `(1/eps) ∫_{R^N \ Ω} G_eps(x, x - y) g(y, t) dy` on
/// band nodes, with `q_ik = eps^-1 G_eps(x_i, x_i - y_k) vol_k`.
#[derive(Clone, Debug)]
pub struct FluxAssembler {
    kind: FluxKernelKind,
    eps: f64,
    collar: ExteriorCollar,
    offsets: Vec<usize>,
    entries: Vec<(u32, f64)>,
    volumes: Vec<f64>,
}

/// Midpoint assembly, `q_ik = eps^-1 G_eps(x_i, x_i - y_k) vol_k`.
pub fn assemble_flux(
    grid: &Grid,
    collar: &ExteriorCollar,
    kind: FluxKernelKind,
    profile: &KernelProfile,
    constants: &NormalizationConstants,
    eps: f64,
) -> Result<FluxAssembler> {
    assemble_flux_with(grid, collar, kind, profile, constants, eps, Quadrature::Midpoint)
}

/// Mass passed per unit flux and unit boundary measure across a flat,
/// lattice-aligned boundary, by the same midpoint sums the assembly uses.
/// The continuum value is 1 for G1 and G2.
pub fn flat_boundary_mass(
    kind: FluxKernelKind,
    profile: &KernelProfile,
    constants: &NormalizationConstants,
    eps: f64,
    h: f64,
) -> f64 {
    let dim = profile.dim();
    let r2 = support_radius_sq(profile.support(), eps);
    let m = (profile.support() * eps / h).ceil() as i64;
    let tangential = if dim == 1 { 0 } else { m };
    let eta = if dim == 1 { [-1.0, 0.0] } else { [0.0, -1.0] };
    let cell = h.powi(dim as i32);
    let mut total = 0.0;
    // interior node at depth (i + 1/2) h, collar node at -(k + 1/2) h
    for depth in 1..=2 * m {
        let dn = depth as f64 * h;
        let pairs = depth as f64;
        for t in -tangential..=tangential {
            let dt = t as f64 * h;
            if dn * dn + dt * dt >= r2 {
                continue;
            }
            let xi = if dim == 1 { [dn, 0.0] } else { [dt, dn] };
            let eta = &eta[..dim];
            let g = kernels::flux_kernel_value(kind, profile, constants, eps, eta, &xi[..dim]);
            total += pairs * h * g / eps * cell;
        }
    }
    total
}

#[allow(clippy::too_many_arguments)]
pub fn assemble_flux_with(
    grid: &Grid,
    collar: &ExteriorCollar,
    kind: FluxKernelKind,
    profile: &KernelProfile,
    constants: &NormalizationConstants,
    eps: f64,
    quadrature: Quadrature,
) -> Result<FluxAssembler> {
    if collar.eps() != eps {
        return Err(Error::Contract(format!(
            "collar was built for eps = {}, flux requested for eps = {eps}",
            collar.eps()
        )));
    }
    if kind.needs_projection() && grid.band_eps() != Some(eps) {
        return Err(Error::Contract(format!(
            "{kind} needs band records for eps = {eps}; call Grid::mark_band first"
        )));
    }
    let h = grid.h();
    let reach = profile.support() * eps;
    let r2 = support_radius_sq(profile.support(), eps);
    let m = (reach / h).ceil() as i64;
    let row_reach = if grid.dim() == 1 { 0 } else { m };
    let dim = grid.dim();
    let lattice = *grid.lattice();
    let domain = *grid.domain();

    let mut offsets = Vec::with_capacity(grid.len() + 1);
    let mut entries = Vec::new();
    offsets.push(0);
    for (i, x) in grid.nodes().iter().enumerate() {
        let in_band = -domain.signed_distance(x) < reach;
        if kind != FluxKernelKind::Zero && in_band {
            let eta = match grid.band()[i] {
                Some(b) => b.eta,
                None if kind.needs_projection() => {
                    return Err(Error::Contract(format!(
                        "node {i} is within d*eps of the boundary but has no band record"
                    )))
                }
                None => [0.0, 0.0],
            };
            let [ci, rj] = grid.cells()[i];
            for dr in -row_reach..=row_reach {
                for dc in -m..=m {
                    let cell = [ci + dc, rj + dr];
                    let Some(k) = collar.index_of(&cell) else {
                        continue;
                    };
                    let y = lattice.point(cell);
                    let xi = [x[0] - y[0], x[1] - y[1]];
                    if xi[0] * xi[0] + xi[1] * xi[1] >= r2 {
                        continue;
                    }
                    let g = kernels::flux_kernel_value(
                        kind,
                        profile,
                        constants,
                        eps,
                        &eta[..dim],
                        &xi[..dim],
                    );
                    entries.push((k as u32, g / eps * collar.volumes()[k]));
                }
            }
        }
        offsets.push(entries.len());
    }
    if quadrature == Quadrature::MomentMatched && kind != FluxKernelKind::Zero {
        // G1Tilde is calibrated by its G1 part so kappa = 0 stays identical to G1
        let base = match kind {
            FluxKernelKind::G1Tilde { .. } => FluxKernelKind::G1,
            other => other,
        };
        let factor = 1.0 / flat_boundary_mass(base, profile, constants, eps, h);
        entries.iter_mut().for_each(|(_, q)| *q *= factor);
    }
    Ok(FluxAssembler {
        kind,
        eps,
        collar: collar.clone(),
        offsets,
        entries,
        volumes: grid.volumes().to_vec(),
    })
}

impl FluxAssembler {
    pub fn kind(&self) -> FluxKernelKind {
        self.kind
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn collar(&self) -> &ExteriorCollar {
        &self.collar
    }

    /// Same weights, flux datum replaced.
    pub fn with_datum(&self, datum: crate::geometry::BoundaryDatum) -> Self {
        FluxAssembler {
            collar: self.collar.with_datum(datum),
            ..self.clone()
        }
    }

    /// `(k, q_ik)` for node `i`.
    pub fn weights(&self, i: usize) -> &[(u32, f64)] {
        &self.entries[self.offsets[i]..self.offsets[i + 1]]
    }

    pub fn len(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// True when the flux term is identically zero (zero kernel or zero datum).
    pub fn is_trivial(&self) -> bool {
        self.entries.is_empty() || self.collar.datum().is_zero()
    }

    /// `max_k Σ_i vol_i |q_ik| / vol_k`, the L1 operator norm of the flux map.
    pub fn column_norm(&self) -> f64 {
        let mut cols = vec![0.0; self.collar.len()];
        for i in 0..self.len() {
            for &(k, q) in self.weights(i) {
                cols[k as usize] += self.volumes[i] * q.abs();
            }
        }
        cols.iter()
            .zip(self.collar.volumes())
            .map(|(c, v)| c / v)
            .fold(0.0, f64::max)
    }

    /// `b_i = Σ_k q_ik g_k` for collar values `g`.
    pub fn apply_values(&self, g: &[f64], out: &mut [f64]) {
        assert_eq!(out.len(), self.len());
        for (i, o) in out.iter_mut().enumerate() {
            *o = self.weights(i).iter().map(|&(k, q)| q * g[k as usize]).sum();
        }
    }

    pub fn flux_into(&self, t: f64, out: &mut [f64]) {
        if self.is_trivial() {
            out.fill(0.0);
            return;
        }
        let g = self.collar.flux_values(t);
        self.apply_values(&g, out);
    }

    pub fn flux_vector(&self, t: f64) -> GridField {
        let mut out = vec![0.0; self.len()];
        self.flux_into(t, &mut out);
        GridField::new(out, t)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_collar, build_grid, BoundaryDatum, Domain};
    use crate::quadrature;
    use approx::assert_abs_diff_eq;

    fn setup_1d(eps: f64, h: f64) -> (Grid, KernelProfile, NormalizationConstants) {
        let d = Domain::interval(0.0, 1.0).unwrap();
        let mut g = build_grid(&d, h).unwrap();
        g.mark_band(eps, 1.0).unwrap();
        let k = KernelProfile::quartic(1).unwrap();
        let c = NormalizationConstants::compute(&k).unwrap();
        (g, k, c)
    }

    #[test]
    fn support_width_in_cells() {
        let (g, k, c) = setup_1d(0.25, 0.05);
        let op = assemble_operator(&g, &k, &c, 0.25).unwrap();
        let i = 10;
        let nb = op.neighbors(i);
        for j in 0..g.len() {
            let w = nb.iter().find(|(jj, _)| *jj == j).map(|p| p.1).unwrap_or(0.0);
            let gap = (i as i64 - j as i64).abs();
            if gap != 0 {
                assert_eq!(w > 0.0, gap <= 4, "j = {j}, w = {w}");
            }
        }
        assert!(nb.windows(2).all(|p| p[0].0 < p[1].0));
    }

    #[test]
    fn rejects_coarse_grid() {
        let (g, k, c) = setup_1d(0.2, 0.05);
        assert!(assemble_operator(&g, &k, &c, 0.04).is_err());
    }

    #[test]
    fn constants_are_annihilated_exactly() {
        let (g, k, c) = setup_1d(0.1, 0.01);
        let op = assemble_operator(&g, &k, &c, 0.1).unwrap();
        let u = GridField::new(vec![5.0; g.len()], 0.0);
        assert!(op.apply(&u).unwrap().values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn grid_mismatch_is_contract_error() {
        let (g, k, c) = setup_1d(0.1, 0.01);
        let op = assemble_operator(&g, &k, &c, 0.1).unwrap();
        let u = GridField::new(vec![1.0; 3], 0.0);
        assert!(matches!(op.apply(&u), Err(Error::Contract(_))));
    }

    #[test]
    fn interior_diagonal_matches_refined_quadrature() {
        let eps = 0.25;
        let h = 0.0125;
        let (g, k, c) = setup_1d(eps, h);
        let op = assemble_operator(&g, &k, &c, eps).unwrap();
        let i = g.len() / 2;
        // 10x refined midpoint sum of eps^-2 J_eps over the support
        let hf = h / 10.0;
        let n = (eps / hf).ceil() as i64;
        let refined: f64 = (-n..=n)
            .map(|m| kernels::eval_j_eps(&k, c.c1, eps, &[m as f64 * hf]) * hf / (eps * eps))
            .sum();
        let exact = c.c1 / (eps * eps);
        let adaptive = quadrature::integrate(
            |x| kernels::eval_j_eps(&k, c.c1, eps, &[x]) / (eps * eps),
            -eps,
            eps,
            1e-12,
            0.0,
        )
        .unwrap();
        assert_abs_diff_eq!(adaptive, exact, epsilon = 1e-8 * exact);
        // midpoint error is O((h/eps)^2); the refined sum sits 100x closer
        let coarse_err = (op.diagonal()[i] - exact).abs();
        let fine_err = (refined - exact).abs();
        assert!(coarse_err < 5e-3 * exact, "{coarse_err}");
        assert!(fine_err < coarse_err / 50.0, "{fine_err} vs {coarse_err}");
        assert!(op.max_diagonal() <= exact * (1.0 + 1e-3));
    }

    #[test]
    fn linear_field_cancels_in_the_interior() {
        let eps = 0.1;
        let (g, k, c) = setup_1d(eps, 0.005);
        let op = assemble_operator(&g, &k, &c, eps).unwrap();
        let u = GridField::new(g.sample(|p| p[0]), 0.0);
        let lu = op.apply(&u).unwrap();
        for (x, v) in g.nodes().iter().zip(lu.values()) {
            if x[0] > eps + 1e-9 && x[0] < 1.0 - eps - 1e-9 {
                assert!(v.abs() < 1e-10, "x = {}, Lu = {v}", x[0]);
            }
        }
    }

    #[test]
    fn quadratic_field_gives_laplacian() {
        let eps = 0.1;
        let (g, k, c) = setup_1d(eps, 0.005);
        let op = assemble_operator(&g, &k, &c, eps).unwrap();
        let u = GridField::new(g.sample(|p| p[0] * p[0]), 0.0);
        let lu = op.apply(&u).unwrap();
        for (x, v) in g.nodes().iter().zip(lu.values()) {
            if x[0] > eps + 1e-9 && x[0] < 1.0 - eps - 1e-9 {
                assert!((v - 2.0).abs() < 0.05, "x = {}, Lu = {v}", x[0]);
            }
        }
    }

    #[test]
    fn disk_weights_are_symmetric() {
        let d = Domain::disk([0.0, 0.0], 1.0).unwrap();
        let g = build_grid(&d, 0.05).unwrap();
        let k = KernelProfile::quartic(2).unwrap();
        let c = NormalizationConstants::compute(&k).unwrap();
        let op = assemble_operator(&g, &k, &c, 0.2).unwrap();
        for i in (0..g.len()).step_by(37) {
            for (j, w) in op.neighbors(i) {
                let back = op.neighbors(j).into_iter().find(|p| p.0 == i).unwrap().1;
                assert_eq!(w, back);
                assert!(w >= 0.0);
            }
            let sum: f64 = op.neighbors(i).iter().map(|p| p.1).sum();
            assert_abs_diff_eq!(sum, op.diagonal()[i], epsilon = 1e-9 * sum);
        }
        assert!(op.max_diagonal() <= c.c1 / 0.04 * (1.0 + 1e-3));
    }

    fn flux_setup(kind: FluxKernelKind, datum: BoundaryDatum, eps: f64, h: f64) -> (Grid, FluxAssembler) {
        let (g, k, c) = setup_1d(eps, h);
        let collar = build_collar(g.domain(), eps, h, 1.0, datum).unwrap();
        let fa = assemble_flux(&g, &collar, kind, &k, &c, eps).unwrap();
        (g, fa)
    }

    #[test]
    fn zero_kernel_has_no_weights() {
        let (g, fa) = flux_setup(FluxKernelKind::Zero, BoundaryDatum::constant(1.0), 0.1, 0.01);
        assert!((0..g.len()).all(|i| fa.weights(i).is_empty()));
        assert!(fa.flux_vector(0.0).values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn zero_datum_gives_zero_flux() {
        for kind in [FluxKernelKind::G1, FluxKernelKind::G2, FluxKernelKind::G1Tilde { kappa: 1.0 }] {
            let (_, fa) = flux_setup(kind, BoundaryDatum::zero(), 0.1, 0.01);
            assert!(fa.flux_vector(0.7).values().iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn weights_live_on_the_band() {
        let eps = 0.1;
        let (g, fa) = flux_setup(FluxKernelKind::G2, BoundaryDatum::constant(1.0), eps, 0.01);
        for (i, x) in g.nodes().iter().enumerate() {
            let dist = x[0].min(1.0 - x[0]);
            if dist >= eps {
                assert!(fa.weights(i).is_empty());
            }
            for &(k, q) in fa.weights(i) {
                assert!(q > 0.0);
                let y = fa.collar().nodes()[k as usize];
                assert!((x[0] - y[0]).abs() < eps);
            }
        }
    }

    #[test]
    fn g2_mass_flux_identity() {
        let eps = 0.1;
        let h = 0.0025;
        let (g, fa) = flux_setup(FluxKernelKind::G2, BoundaryDatum::constant(1.0), eps, h);
        let b = fa.flux_vector(0.0);
        let total: f64 = g.volumes().iter().zip(b.values()).map(|(v, b)| v * b).sum();
        // independent oracle for ∫_0^d ∫_{z>s} J dz ds
        let k = KernelProfile::quartic(1).unwrap();
        let inner = |s: f64| {
            quadrature::integrate(|z| kernels::eval_j(&k, &[z]), s, 1.0, 1e-12, 0.0).unwrap()
        };
        let bracket = quadrature::integrate(inner, 0.0, 1.0, 1e-11, 0.0).unwrap();
        assert_abs_diff_eq!(bracket, 3.0 / 16.0, epsilon = 1e-10);
        let expected = 10.0 * (8.0 / 15.0) * 2.0 * bracket;
        assert_abs_diff_eq!(expected, 2.0, epsilon = 1e-9);
        assert!((total - expected).abs() < 0.02 * expected, "{total}");
    }

    #[test]
    fn flux_is_linear_and_time_consistent() {
        let eps = 0.1;
        let g1 = BoundaryDatum::new(|x, t| x[0] + t);
        let g2 = BoundaryDatum::new(|x, _| 3.0 - x[0]);
        let (_, fa) = flux_setup(FluxKernelKind::G1, g1.clone(), eps, 0.01);
        let fa2 = fa.with_datum(g2.clone());
        let fsum = fa.with_datum(g1.sum(&g2));
        let (a, b, s) = (fa.flux_vector(0.3), fa2.flux_vector(0.3), fsum.flux_vector(0.3));
        for i in 0..a.len() {
            assert_abs_diff_eq!(a.values()[i] + b.values()[i], s.values()[i], epsilon = 1e-12);
        }
        let c = fa2.flux_vector(0.0);
        let d = fa2.flux_vector(5.0);
        assert_eq!(c.values(), d.values());
    }

    #[test]
    fn g1_needs_band_records() {
        let d = Domain::interval(0.0, 1.0).unwrap();
        let g = build_grid(&d, 0.01).unwrap();
        let k = KernelProfile::quartic(1).unwrap();
        let c = NormalizationConstants::compute(&k).unwrap();
        let collar = build_collar(&d, 0.1, 0.01, 1.0, BoundaryDatum::zero()).unwrap();
        assert!(matches!(
            assemble_flux(&g, &collar, FluxKernelKind::G1, &k, &c, 0.1),
            Err(Error::Contract(_))
        ));
        assert!(assemble_flux(&g, &collar, FluxKernelKind::G2, &k, &c, 0.1).is_ok());
        assert!(matches!(
            assemble_flux(&g, &collar, FluxKernelKind::G2, &k, &c, 0.2),
            Err(Error::Contract(_))
        ));
    }

    #[test]
    fn midpoint_floor_matches_trapezoid_error() {
        // j z^2 = 3/4 (z^2 - z^4) on a symmetric lattice with j(±1) = 0 is a
        // trapezoid sum; Euler-Maclaurin terminates for this polynomial:
        // (h^2/12)(f'(1) - f'(-1)) - (h^4/720)(f'''(1) - f'''(-1)) = -h^2/4 + h^4/20
        let (g, k, c) = setup_1d(0.1, 0.005);
        let op = assemble_operator(&g, &k, &c, 0.1).unwrap();
        let i = g.len() / 2;
        let x = g.nodes()[i][0];
        let second: f64 = op.neighbors(i).iter().map(|&(j, w)| w * (g.nodes()[j][0] - x).powi(2)).sum();
        let rel: f64 = 1.0 / 20.0;
        let oracle = 2.0 * (0.2 - rel * rel / 4.0 + rel.powi(4) / 20.0) / 0.2;
        assert_abs_diff_eq!(second, oracle, epsilon = 1e-10);
    }

    #[test]
    fn moment_matched_interior_is_exact_on_quadratics() {
        let (g, k, c) = setup_1d(0.1, 0.005);
        let op = assemble_operator_with(&g, &k, &c, 0.1, Quadrature::MomentMatched).unwrap();
        let u = GridField::new(g.sample(|x| 3.0 * x[0] * x[0] - x[0] + 1.0), 0.0);
        let lu = op.apply(&u).unwrap();
        for (x, v) in g.nodes().iter().zip(lu.values()) {
            if x[0] > 0.1 && x[0] < 0.9 {
                assert_abs_diff_eq!(*v, 6.0, epsilon = 1e-9);
            }
        }
        assert!(op.max_diagonal() <= op.operator_norm_bound() / 2.0 * (1.0 + 1e-3));

        let d = Domain::disk([0.0, 0.0], 1.0).unwrap();
        let g2 = build_grid(&d, 0.02).unwrap();
        let k2 = KernelProfile::quartic(2).unwrap();
        let c2 = NormalizationConstants::compute(&k2).unwrap();
        let op2 = assemble_operator_with(&g2, &k2, &c2, 0.2, Quadrature::MomentMatched).unwrap();
        let u2 = GridField::new(g2.sample(|x| x[0] * x[0] + 2.0 * x[1] * x[1] + x[0] * x[1]), 0.0);
        let lu2 = op2.apply(&u2).unwrap();
        for (x, v) in g2.nodes().iter().zip(lu2.values()) {
            if x[0].hypot(x[1]) < 0.7 {
                assert_abs_diff_eq!(*v, 6.0, epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn flat_boundary_mass_approaches_one() {
        let k = KernelProfile::quartic(1).unwrap();
        let c = NormalizationConstants::compute(&k).unwrap();
        for kind in [FluxKernelKind::G1, FluxKernelKind::G2] {
            let coarse = (flat_boundary_mass(kind, &k, &c, 0.1, 0.01) - 1.0).abs();
            let fine = (flat_boundary_mass(kind, &k, &c, 0.1, 0.0025) - 1.0).abs();
            assert!(coarse < 0.05 && fine < coarse / 8.0, "{kind}: {coarse} {fine}");
            // scale invariance: only h / eps matters
            let a = flat_boundary_mass(kind, &k, &c, 0.2, 0.01);
            let b = flat_boundary_mass(kind, &k, &c, 0.1, 0.005);
            assert_abs_diff_eq!(a, b, epsilon = 1e-12);
        }
        let k2 = KernelProfile::quartic(2).unwrap();
        let c2 = NormalizationConstants::compute(&k2).unwrap();
        let m = flat_boundary_mass(FluxKernelKind::G2, &k2, &c2, 0.2, 0.005);
        assert!((m - 1.0).abs() < 0.01, "{m}");
    }

    #[test]
    fn moment_matched_flux_passes_exact_mass() {
        let d = Domain::interval(0.0, 1.0).unwrap();
        let (eps, h) = (0.1, 0.005);
        let (g, k, c) = setup_1d(eps, h);
        let collar = build_collar(&d, eps, h, 1.0, BoundaryDatum::constant(1.0)).unwrap();
        for kind in [FluxKernelKind::G1, FluxKernelKind::G2] {
            let fa = assemble_flux_with(&g, &collar, kind, &k, &c, eps, Quadrature::MomentMatched).unwrap();
            let total: f64 = fa.flux_vector(0.0).integral(g.volumes());
            assert_abs_diff_eq!(total, 2.0, epsilon = 1e-12);
        }
        let plain = assemble_flux(&g, &collar, FluxKernelKind::G1, &k, &c, eps).unwrap();
        let tilde0 = FluxKernelKind::G1Tilde { kappa: 0.0 };
        let a = assemble_flux_with(&g, &collar, FluxKernelKind::G1, &k, &c, eps, Quadrature::MomentMatched).unwrap();
        let b = assemble_flux_with(&g, &collar, tilde0, &k, &c, eps, Quadrature::MomentMatched).unwrap();
        assert_eq!(a.flux_vector(0.0).values(), b.flux_vector(0.0).values());
        assert!(plain.flux_vector(0.0).integral(g.volumes()) != 2.0);
    }

    #[test]
    fn quadrature_names() {
        assert_eq!(Quadrature::parse("midpoint").unwrap(), Quadrature::Midpoint);
        assert_eq!(Quadrature::parse("moment").unwrap(), Quadrature::MomentMatched);
        assert!(Quadrature::parse("gauss").is_err());
        assert_eq!(Quadrature::MomentMatched.to_string(), "moment");
    }
}
