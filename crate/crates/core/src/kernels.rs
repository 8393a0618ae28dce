//! Radial interaction kernels, their rescalings and the Neumann flux kernels.
//!
//! A [`KernelProfile`] stores the radial density `j(r)` of a compactly
//! supported, radially symmetric kernel `J(z) = j(|z|)` in dimension `N`.
//! The rescaled kernel is `J_eps(xi) = C1 eps^-N J(xi / eps)`, where `C1`
//! turns the rescaled nonlocal operator into the Laplacian (not a multiple
//! of it) as `eps -> 0`. `C2` calibrates the scalar flux kernel `C2 J`.

use std::f64::consts::PI;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature;

/// Relative tolerance of every moment integral.
pub const MOMENT_RTOL: f64 = 1e-10;

const DEGENERATE: f64 = 1e-14;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum KernelCatalog {
    /// `j(r) ∝ 1 - r^2` on `[0, 1)`.
    Quartic,
    /// `j(r) ∝ 1 + cos(pi r)` on `[0, 1)`.
    Cosine,
    /// Tabulated profile read from a file.
    Custom,
}

impl fmt::Display for KernelCatalog {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            KernelCatalog::Quartic => "quartic",
            KernelCatalog::Cosine => "cosine",
            KernelCatalog::Custom => "custom",
        })
    }
}

#[derive(Clone, Debug)]
enum Shape {
    Quartic,
    Cosine,
    Tabulated(MonotoneCubic),
}

impl Shape {
    fn eval(&self, r: f64) -> f64 {
        match self {
            Shape::Quartic => 1.0 - r * r,
            Shape::Cosine => 1.0 + (PI * r).cos(),
            Shape::Tabulated(table) => table.eval(r),
        }
    }
}

/// Shape-preserving piecewise cubic Hermite interpolant (Fritsch–Carlson).
#[derive(Clone, Debug)]
struct MonotoneCubic {
    xs: Vec<f64>,
    ys: Vec<f64>,
    slopes: Vec<f64>,
}

impl MonotoneCubic {
    fn new(xs: Vec<f64>, ys: Vec<f64>) -> Self {
        let n = xs.len();
        let secants: Vec<f64> = (0..n - 1)
            .map(|i| (ys[i + 1] - ys[i]) / (xs[i + 1] - xs[i]))
            .collect();
        let mut slopes = vec![0.0; n];
        if n == 2 {
            slopes[0] = secants[0];
            slopes[1] = secants[0];
        } else {
            for i in 1..n - 1 {
                let (s0, s1) = (secants[i - 1], secants[i]);
                if s0 * s1 > 0.0 {
                    let h0 = xs[i] - xs[i - 1];
                    let h1 = xs[i + 1] - xs[i];
                    let w0 = 2.0 * h1 + h0;
                    let w1 = h1 + 2.0 * h0;
                    slopes[i] = (w0 + w1) / (w0 / s0 + w1 / s1);
                }
            }
            slopes[0] = end_slope(xs[1] - xs[0], xs[2] - xs[1], secants[0], secants[1]);
            slopes[n - 1] = end_slope(
                xs[n - 1] - xs[n - 2],
                xs[n - 2] - xs[n - 3],
                secants[n - 2],
                secants[n - 3],
            );
        }
        MonotoneCubic { xs, ys, slopes }
    }

    fn eval(&self, x: f64) -> f64 {
        let n = self.xs.len();
        let i = match self.xs.partition_point(|&v| v <= x) {
            0 => 0,
            k if k >= n => n - 2,
            k => k - 1,
        };
        let h = self.xs[i + 1] - self.xs[i];
        let t = (x - self.xs[i]) / h;
        let t2 = t * t;
        let t3 = t2 * t;
        let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
        let h10 = t3 - 2.0 * t2 + t;
        let h01 = -2.0 * t3 + 3.0 * t2;
        let h11 = t3 - t2;
        h00 * self.ys[i]
            + h10 * h * self.slopes[i]
            + h01 * self.ys[i + 1]
            + h11 * h * self.slopes[i + 1]
    }
}

// Three-point end condition, clipped to keep the end interval monotone.
fn end_slope(h0: f64, h1: f64, s0: f64, s1: f64) -> f64 {
    let d = ((2.0 * h0 + h1) * s0 - h0 * s1) / (h0 + h1);
    if d * s0 <= 0.0 {
        0.0
    } else if s0 * s1 <= 0.0 && d.abs() > 3.0 * s0.abs() {
        3.0 * s0
    } else {
        d
    }
}

/// Radially symmetric kernel `J(z) = j(|z|)` supported in the ball of radius `d`.
#[derive(Clone, Debug)]
pub struct KernelProfile {
    catalog: KernelCatalog,
    dim: usize,
    support: f64,
    scale: f64,
    shape: Shape,
}

fn sphere_area(dim: usize) -> f64 {
    match dim {
        1 => 2.0,
        2 => 2.0 * PI,
        3 => 4.0 * PI,
        _ => unreachable!("dimension checked at construction"),
    }
}

/// `∫ ω_N dω` over the upper half of the unit sphere, i.e. the volume of the
/// unit ball one dimension down.
fn half_sphere_normal_moment(dim: usize) -> f64 {
    match dim {
        1 => 1.0,
        2 => 2.0,
        3 => PI,
        _ => unreachable!("dimension checked at construction"),
    }
}

fn check_dim(dim: usize) -> Result<()> {
    if (1..=3).contains(&dim) {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "kernel dimension must be 1, 2 or 3, got {dim}"
        )))
    }
}

impl KernelProfile {
    fn normalized(catalog: KernelCatalog, dim: usize, support: f64, shape: Shape) -> Result<Self> {
        check_dim(dim)?;
        let mut profile = KernelProfile {
            catalog,
            dim,
            support,
            scale: 1.0,
            shape,
        };
        let mass = profile.mass()?;
        if mass < DEGENERATE {
            return Err(Error::DegenerateKernel(format!(
                "radial profile has mass {mass:e}"
            )));
        }
        profile.scale = 1.0 / mass;
        Ok(profile)
    }

    /// `j(r) = c (1 - r^2)` on the unit ball, `c` fixed by unit mass.
    pub fn quartic(dim: usize) -> Result<Self> {
        Self::normalized(KernelCatalog::Quartic, dim, 1.0, Shape::Quartic)
    }

    /// `j(r) = c (1 + cos(pi r))` on the unit ball, `c` fixed by unit mass.
    pub fn cosine(dim: usize) -> Result<Self> {
        Self::normalized(KernelCatalog::Cosine, dim, 1.0, Shape::Cosine)
    }

    /// Builds a profile from samples `(r_k, j_k)` with `r_0 = 0 < r_1 < ... < r_n = d`.
    /// The interpolant is rescaled to unit mass.
    pub fn tabulated(dim: usize, radii: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if radii.len() != values.len() {
            return Err(Error::InvalidParameter(
                "radius and value columns differ in length".into(),
            ));
        }
        if radii.len() < 2 {
            return Err(Error::InvalidParameter(
                "a tabulated profile needs at least two samples".into(),
            ));
        }
        if radii[0] != 0.0 {
            return Err(Error::InvalidParameter(
                "tabulated radii must start at 0".into(),
            ));
        }
        if radii.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidParameter(
                "tabulated radii must be strictly increasing".into(),
            ));
        }
        if values.iter().any(|&v| !(v >= 0.0) || !v.is_finite()) {
            return Err(Error::InvalidParameter(
                "tabulated values must be finite and nonnegative".into(),
            ));
        }
        let support = *radii.last().expect("length checked");
        let table = MonotoneCubic::new(radii, values);
        Self::normalized(KernelCatalog::Custom, dim, support, Shape::Tabulated(table))
    }

    /// Reads a two-column `r value` text file. Blank lines and `#` comments are skipped.
    pub fn from_file(dim: usize, path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut radii = Vec::new();
        let mut values = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let mut cols = line.split_whitespace().map(str::parse::<f64>);
            match (cols.next(), cols.next(), cols.next()) {
                (Some(Ok(r)), Some(Ok(v)), None) => {
                    radii.push(r);
                    values.push(v);
                }
                _ => {
                    return Err(Error::Config(format!(
                        "{}:{}: expected two numeric columns `r value`",
                        path.display(),
                        lineno + 1
                    )))
                }
            }
        }
        Self::tabulated(dim, radii, values)
    }

    /// Parses `quartic`, `cosine` or `custom:<path>`.
    pub fn from_spec(spec: &str, dim: usize) -> Result<Self> {
        match spec.trim() {
            "quartic" => Self::quartic(dim),
            "cosine" => Self::cosine(dim),
            s => match s.strip_prefix("custom:") {
                Some(path) => Self::from_file(dim, Path::new(path)),
                None => Err(Error::Config(format!(
                    "unknown kernel `{s}` (expected quartic, cosine or custom:<path>)"
                ))),
            },
        }
    }

    /// Returns a copy whose density is multiplied by `factor`, without renormalizing.
    pub fn scaled(&self, factor: f64) -> Self {
        KernelProfile {
            scale: self.scale * factor,
            ..self.clone()
        }
    }

    pub fn catalog(&self) -> KernelCatalog {
        self.catalog
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Support radius `d`.
    pub fn support(&self) -> f64 {
        self.support
    }

    /// The radial density `j(r)`; zero for `r >= d`.
    pub fn radial_density(&self, r: f64) -> f64 {
        if r < self.support {
            self.scale * self.shape.eval(r)
        } else {
            0.0
        }
    }

    fn breakpoints(&self) -> Vec<f64> {
        match &self.shape {
            Shape::Tabulated(table) => table.xs.clone(),
            _ => vec![0.0, self.support],
        }
    }

    /// `|S^{N-1}| ∫_0^d j(r) r^{N-1+power} dr`, the integral of `J(z) |z|^power`.
    pub fn radial_moment(&self, power: i32) -> Result<f64> {
        let n = self.dim as i32;
        let area = sphere_area(self.dim);
        let integral = quadrature::integrate_pieces(
            |r| self.radial_density(r) * r.powi(n - 1 + power),
            &self.breakpoints(),
            MOMENT_RTOL * 1e-2,
            1e-16,
        )?;
        Ok(area * integral)
    }

    /// `∫ J(z) dz`.
    pub fn mass(&self) -> Result<f64> {
        self.radial_moment(0)
    }

    /// `∫_{z_N > 0} J(z) z_N dz`.
    pub fn half_space_first_moment(&self) -> Result<f64> {
        let n = self.dim as i32;
        let integral = quadrature::integrate_pieces(
            |r| self.radial_density(r) * r.powi(n),
            &self.breakpoints(),
            MOMENT_RTOL * 1e-2,
            1e-16,
        )?;
        Ok(half_sphere_normal_moment(self.dim) * integral)
    }

    /// Marginal density of the last coordinate, `∫_{R^{N-1}} J(z', t) dz'`.
    pub fn marginal(&self, t: f64) -> Result<f64> {
        let d = self.support;
        if t.abs() >= d {
            return Ok(0.0);
        }
        let reach = (d * d - t * t).sqrt();
        match self.dim {
            1 => Ok(self.radial_density(t.abs())),
            2 => Ok(2.0
                * quadrature::integrate(
                    |x| self.radial_density((x * x + t * t).sqrt()),
                    0.0,
                    reach,
                    1e-12,
                    1e-15,
                )?),
            _ => Ok(2.0
                * PI
                * quadrature::integrate(
                    |rho| self.radial_density((rho * rho + t * t).sqrt()) * rho,
                    0.0,
                    reach,
                    1e-12,
                    1e-15,
                )?),
        }
    }
}

/// `J(z)` for an `N`-vector `z`.
pub fn eval_j(profile: &KernelProfile, z: &[f64]) -> f64 {
    profile.radial_density(norm(z))
}

/// `J_eps(xi) = C1 eps^-N J(xi / eps)`.
pub fn eval_j_eps(profile: &KernelProfile, c1: f64, eps: f64, xi: &[f64]) -> f64 {
    let r = norm(xi) / eps;
    c1 * eps.powi(-(profile.dim as i32)) * profile.radial_density(r)
}

pub(crate) fn norm(z: &[f64]) -> f64 {
    z.iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Calibration constants of a kernel; independent of `eps`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormalizationConstants {
    pub c1: f64,
    pub c2: f64,
}

impl NormalizationConstants {
    pub fn compute(profile: &KernelProfile) -> Result<Self> {
        Ok(NormalizationConstants {
            c1: compute_c1(profile)?,
            c2: compute_c2(profile)?,
        })
    }
}

/// `C1 = 2 / ∫ J(z) z_N^2 dz`, using `∫ J z_N^2 = (1/N) ∫ J |z|^2` for radial `J`.
pub fn compute_c1(profile: &KernelProfile) -> Result<f64> {
    let second = profile.radial_moment(2)? / profile.dim as f64;
    if second < DEGENERATE {
        return Err(Error::DegenerateKernel(format!(
            "second moment {second:e} is too small"
        )));
    }
    Ok(2.0 / second)
}

/// `C2` solving `∫_0^d ∫_{z_N > s} J(z) (C2 - z_N) dz ds = 0`.
///
/// Swapping the order of integration reduces numerator and denominator to
/// half-space moments: `∫_{z_N>0} J z_N^2` and `∫_{z_N>0} J z_N`.
pub fn compute_c2(profile: &KernelProfile) -> Result<f64> {
    let denominator = profile.half_space_first_moment()?;
    if denominator < DEGENERATE {
        return Err(Error::DegenerateKernel(format!(
            "half-space first moment {denominator:e} is too small"
        )));
    }
    let numerator = 0.5 * profile.radial_moment(2)? / profile.dim as f64;
    Ok(numerator / denominator)
}

/// Evaluates `∫_0^d ∫_{z_N > s} J(z) (c2 - z_N) dz ds` literally, as an iterated
/// integral over the marginal of `z_N`.
pub fn c2_residual(profile: &KernelProfile, c2: f64) -> Result<f64> {
    let d = profile.support();
    let inner = |s: f64| -> f64 {
        quadrature::integrate(
            |t| profile.marginal(t).unwrap_or(f64::NAN) * (c2 - t),
            s,
            d,
            1e-12,
            1e-15,
        )
        .unwrap_or(f64::NAN)
    };
    let value = quadrature::integrate(inner, 0.0, d, 1e-11, 1e-14)?;
    if value.is_nan() {
        return Err(Error::Quadrature {
            estimate: value,
            error: f64::NAN,
        });
    }
    Ok(value)
}

/// Flux kernel choice for the boundary term.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum FluxKernelKind {
    Zero,
    /// `G1(x, xi) = -J(xi) eta(xbar) . xi`.
    G1,
    /// `G1` plus `kappa eps J_eps`; nonnegative when `kappa` bounds the boundary curvature.
    G1Tilde { kappa: f64 },
    /// `G2(x, xi) = C2 J(xi)`.
    G2,
}

impl FluxKernelKind {
    /// Parses `zero`, `g1`, `g1tilde:<kappa>` or `g2`.
    pub fn parse(s: &str) -> Result<Self> {
        match s.trim() {
            "zero" => Ok(FluxKernelKind::Zero),
            "g1" => Ok(FluxKernelKind::G1),
            "g2" => Ok(FluxKernelKind::G2),
            other => {
                let kappa = other
                    .strip_prefix("g1tilde:")
                    .and_then(|k| k.trim().parse::<f64>().ok())
                    .ok_or_else(|| {
                        Error::Config(format!(
                            "unknown flux kernel `{other}` (expected zero, g1, g1tilde:<kappa> or g2)"
                        ))
                    })?;
                if !(kappa >= 0.0) || !kappa.is_finite() {
                    return Err(Error::Config(format!(
                        "g1tilde curvature bound must be finite and nonnegative, got {kappa}"
                    )));
                }
                Ok(FluxKernelKind::G1Tilde { kappa })
            }
        }
    }

    /// True for the kinds whose values never go negative on admissible pairs.
    pub fn is_nonnegative(&self) -> bool {
        !matches!(self, FluxKernelKind::G1)
    }

    /// Whether evaluation needs the boundary projection of `x`.
    pub fn needs_projection(&self) -> bool {
        matches!(self, FluxKernelKind::G1 | FluxKernelKind::G1Tilde { .. })
    }
}

impl fmt::Display for FluxKernelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FluxKernelKind::Zero => f.write_str("zero"),
            FluxKernelKind::G1 => f.write_str("g1"),
            FluxKernelKind::G1Tilde { kappa } => write!(f, "g1tilde:{kappa}"),
            FluxKernelKind::G2 => f.write_str("g2"),
        }
    }
}

/// Evaluates the rescaled flux kernel `(G_kind)_eps(x, xi) = C1 eps^-N G_kind(x, xi / eps)`.
///
/// `x` must lie in the band `dist(x, ∂Ω) < d eps` (so `|x - xbar| < d eps`) and
/// `|xi| < d eps`; the flux term vanishes elsewhere and querying there is a
/// contract error.
#[allow(clippy::too_many_arguments)]
pub fn eval_g_eps(
    kind: FluxKernelKind,
    profile: &KernelProfile,
    constants: &NormalizationConstants,
    eps: f64,
    x: &[f64],
    xbar: &[f64],
    eta: &[f64],
    xi: &[f64],
) -> Result<f64> {
    let reach = profile.support() * eps;
    let depth = norm(
        &x.iter()
            .zip(xbar)
            .map(|(a, b)| a - b)
            .collect::<Vec<_>>(),
    );
    if depth >= reach {
        return Err(Error::Contract(format!(
            "x is {depth:e} from the boundary, outside the band of width {reach:e}"
        )));
    }
    if norm(xi) >= reach {
        return Err(Error::Contract(format!(
            "|xi| = {:e} is outside the kernel support {reach:e}",
            norm(xi)
        )));
    }
    Ok(flux_kernel_value(kind, profile, constants, eps, eta, xi))
}

/// Unchecked evaluation used by assembly, where the band contract holds by construction.
pub(crate) fn flux_kernel_value(
    kind: FluxKernelKind,
    profile: &KernelProfile,
    constants: &NormalizationConstants,
    eps: f64,
    eta: &[f64],
    xi: &[f64],
) -> f64 {
    match kind {
        FluxKernelKind::Zero => 0.0,
        FluxKernelKind::G1 => g1_eps(profile, constants.c1, eps, eta, xi),
        FluxKernelKind::G1Tilde { kappa } => {
            g1_eps(profile, constants.c1, eps, eta, xi)
                + kappa * eps * eval_j_eps(profile, constants.c1, eps, xi)
        }
        FluxKernelKind::G2 => constants.c2 * eval_j_eps(profile, constants.c1, eps, xi),
    }
}

// C1 eps^-N G1(x, xi/eps) = -J_eps(xi) eta . xi / eps
fn g1_eps(profile: &KernelProfile, c1: f64, eps: f64, eta: &[f64], xi: &[f64]) -> f64 {
    -eval_j_eps(profile, c1, eps, xi) * dot(eta, xi) / eps
}

/// Health report for a kernel profile.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelReport {
    pub unit_mass_error: f64,
    pub min_on_support: f64,
    /// Radial storage makes the kernel symmetric by construction; always zero.
    pub symmetry_error: f64,
}

impl KernelReport {
    pub fn passes(&self) -> bool {
        self.unit_mass_error < 1e-10 && self.min_on_support > 0.0
    }
}

pub fn verify_kernel(profile: &KernelProfile) -> KernelReport {
    let unit_mass_error = profile
        .mass()
        .map(|m| (m - 1.0).abs())
        .unwrap_or(f64::INFINITY);
    let top = profile.support() * (1.0 - 1e-3);
    const SAMPLES: usize = 2000;
    let min_on_support = (0..=SAMPLES)
        .map(|k| profile.radial_density(top * k as f64 / SAMPLES as f64))
        .fold(f64::INFINITY, f64::min);
    KernelReport {
        unit_mass_error: unit_mass_error.max(0.0),
        min_on_support,
        symmetry_error: 0.0,
    }
}
