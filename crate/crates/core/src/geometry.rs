//! Domains, cell-centered grids, the boundary band and the exterior collar.
//!
//! Points are stored as `[f64; 2]`; one-dimensional domains keep the second
//! coordinate at zero so Euclidean norms work unchanged.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Point = [f64; 2];

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Domain {
    Interval { a: f64, b: f64 },
    Disk { center: Point, radius: f64 },
}

/// Nearest boundary point, outward unit normal there, and distance to it.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Projection {
    pub xbar: Point,
    pub eta: Point,
    pub dist: f64,
}

impl Domain {
    pub fn interval(a: f64, b: f64) -> Result<Self> {
        if !(a < b) || !a.is_finite() || !b.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "interval endpoints must satisfy a < b, got ({a}, {b})"
            )));
        }
        Ok(Domain::Interval { a, b })
    }

    pub fn disk(center: Point, radius: f64) -> Result<Self> {
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "disk radius must be positive, got {radius}"
            )));
        }
        Ok(Domain::Disk { center, radius })
    }

    /// Parses `interval:a,b` or `disk:cx,cy,R`.
    pub fn parse(s: &str) -> Result<Self> {
        let s = s.trim();
        let (kind, args) = s
            .split_once(':')
            .ok_or_else(|| Error::Config(format!("malformed domain `{s}`")))?;
        let nums: Vec<f64> = args
            .split(',')
            .map(|v| v.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| Error::Config(format!("non-numeric domain parameters in `{s}`")))?;
        match (kind.trim(), nums.as_slice()) {
            ("interval", &[a, b]) => Domain::interval(a, b),
            ("disk", &[cx, cy, r]) => Domain::disk([cx, cy], r),
            _ => Err(Error::Config(format!(
                "unknown domain `{s}` (expected interval:a,b or disk:cx,cy,R)"
            ))),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Domain::Interval { .. } => 1,
            Domain::Disk { .. } => 2,
        }
    }

    /// Lebesgue measure `|Ω|`.
    pub fn measure(&self) -> f64 {
        match *self {
            Domain::Interval { a, b } => b - a,
            Domain::Disk { radius, .. } => PI * radius * radius,
        }
    }

    /// Measure of `∂Ω` (two points count 2 for an interval).
    pub fn boundary_measure(&self) -> f64 {
        match *self {
            Domain::Interval { .. } => 2.0,
            Domain::Disk { radius, .. } => 2.0 * PI * radius,
        }
    }

    pub fn diameter(&self) -> f64 {
        match *self {
            Domain::Interval { a, b } => b - a,
            Domain::Disk { radius, .. } => 2.0 * radius,
        }
    }

    /// Largest boundary curvature (zero for an interval).
    pub fn max_curvature(&self) -> f64 {
        match *self {
            Domain::Interval { .. } => 0.0,
            Domain::Disk { radius, .. } => 1.0 / radius,
        }
    }

    /// Negative inside, positive outside, zero on the boundary.
    pub fn signed_distance(&self, x: &Point) -> f64 {
        match *self {
            Domain::Interval { a, b } => (a - x[0]).max(x[0] - b),
            Domain::Disk { center, radius } => {
                (x[0] - center[0]).hypot(x[1] - center[1]) - radius
            }
        }
    }

    pub fn contains(&self, x: &Point) -> bool {
        self.signed_distance(x) < 0.0
    }

    pub fn project_to_boundary(&self, x: &Point) -> Result<Projection> {
        match *self {
            Domain::Interval { a, b } => {
                // Ties at the midpoint go to the left endpoint.
                if (x[0] - a).abs() <= (x[0] - b).abs() {
                    Ok(Projection {
                        xbar: [a, 0.0],
                        eta: [-1.0, 0.0],
                        dist: (x[0] - a).abs(),
                    })
                } else {
                    Ok(Projection {
                        xbar: [b, 0.0],
                        eta: [1.0, 0.0],
                        dist: (x[0] - b).abs(),
                    })
                }
            }
            Domain::Disk { center, radius } => {
                let dx = x[0] - center[0];
                let dy = x[1] - center[1];
                let r = dx.hypot(dy);
                if r == 0.0 {
                    return Err(Error::AmbiguousProjection(*x));
                }
                let eta = [dx / r, dy / r];
                Ok(Projection {
                    xbar: [center[0] + radius * eta[0], center[1] + radius * eta[1]],
                    eta,
                    dist: (r - radius).abs(),
                })
            }
        }
    }
}

impl fmt::Display for Domain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Domain::Interval { a, b } => write!(f, "interval:{a},{b}"),
            Domain::Disk { center, radius } => {
                write!(f, "disk:{},{},{}", center[0], center[1], radius)
            }
        }
    }
}

/// Band record of a node within `d eps` of the boundary.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BandInfo {
    pub xbar: Point,
    pub eta: Point,
    /// `dist(x, ∂Ω) / eps`, in `(0, d)`.
    pub s: f64,
}

/// `Some` iff `dist(node, ∂Ω) < d eps`.
pub fn band_membership(domain: &Domain, eps: f64, support: f64, node: &Point) -> Result<Option<BandInfo>> {
    let dist = -domain.signed_distance(node);
    if dist >= support * eps {
        return Ok(None);
    }
    let p = domain.project_to_boundary(node)?;
    Ok(Some(BandInfo {
        xbar: p.xbar,
        eta: p.eta,
        s: p.dist / eps,
    }))
}

/// Contiguous run of grid nodes sharing one lattice row.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) struct RowSpan {
    /// Lattice column of the first node in the run.
    pub col_lo: i64,
    /// Index of the first node in the run.
    pub start: usize,
    pub len: usize,
}

impl RowSpan {
    pub fn col_hi(&self) -> i64 {
        self.col_lo + self.len as i64 - 1
    }
}

/// Uniform cell-centered lattice: cell `(i, j)` has center `origin + h (i, j)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub(crate) struct Lattice {
    pub origin: Point,
    pub h: f64,
}

impl Lattice {
    fn for_domain(domain: &Domain, h: f64) -> Self {
        match *domain {
            Domain::Interval { a, .. } => Lattice {
                origin: [a + 0.5 * h, 0.0],
                h,
            },
            Domain::Disk { center, .. } => Lattice {
                origin: [center[0] + 0.5 * h, center[1] + 0.5 * h],
                h,
            },
        }
    }

    pub fn point(&self, cell: [i64; 2]) -> Point {
        [
            self.origin[0] + cell[0] as f64 * self.h,
            self.origin[1] + cell[1] as f64 * self.h,
        ]
    }
}

/// Cell-centered grid of `Ω`: nodes in row-major lattice order.
#[derive(Clone, Debug)]
pub struct Grid {
    domain: Domain,
    h: f64,
    lattice: Lattice,
    nodes: Vec<Point>,
    cells: Vec<[i64; 2]>,
    volumes: Vec<f64>,
    row_lo: i64,
    rows: Vec<Option<RowSpan>>,
    band: Vec<Option<BandInfo>>,
    band_eps: Option<f64>,
}

pub fn build_grid(domain: &Domain, h: f64) -> Result<Grid> {
    if !(h > 0.0) || !(h <= domain.diameter() / 4.0) {
        return Err(Error::InvalidParameter(format!(
            "grid spacing must satisfy 0 < h <= diameter/4 = {}, got {h}",
            domain.diameter() / 4.0
        )));
    }
    let lattice = Lattice::for_domain(domain, h);
    let dim = domain.dim();
    let vol = h.powi(dim as i32);
    let mut nodes = Vec::new();
    let mut cells = Vec::new();
    let mut rows = Vec::new();
    let row_lo;
    match *domain {
        Domain::Interval { a, b } => {
            row_lo = 0;
            let n = ((b - a) / h).ceil() as i64 + 1;
            let mut span: Option<RowSpan> = None;
            for i in 0..n {
                let p = lattice.point([i, 0]);
                if domain.contains(&p) {
                    push_node(&mut span, &mut nodes, &mut cells, p, [i, 0]);
                }
            }
            rows.push(span);
        }
        Domain::Disk { radius, .. } => {
            let n = (radius / h).ceil() as i64 + 1;
            row_lo = -n;
            for j in -n..n {
                let mut span: Option<RowSpan> = None;
                for i in -n..n {
                    let p = lattice.point([i, j]);
                    if domain.contains(&p) {
                        push_node(&mut span, &mut nodes, &mut cells, p, [i, j]);
                    }
                }
                rows.push(span);
            }
        }
    }
    let count = nodes.len();
    Ok(Grid {
        domain: *domain,
        h,
        lattice,
        nodes,
        cells,
        volumes: vec![vol; count],
        row_lo,
        rows,
        band: vec![None; count],
        band_eps: None,
    })
}

fn push_node(
    span: &mut Option<RowSpan>,
    nodes: &mut Vec<Point>,
    cells: &mut Vec<[i64; 2]>,
    p: Point,
    cell: [i64; 2],
) {
    match span {
        Some(s) => {
            // convex domains: inside cells of a row are contiguous
            debug_assert_eq!(s.col_hi() + 1, cell[0]);
            s.len += 1;
        }
        None => {
            *span = Some(RowSpan {
                col_lo: cell[0],
                start: nodes.len(),
                len: 1,
            })
        }
    }
    nodes.push(p);
    cells.push(cell);
}

impl Grid {
    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[Point] {
        &self.nodes
    }

    pub fn volumes(&self) -> &[f64] {
        &self.volumes
    }

    pub fn total_volume(&self) -> f64 {
        self.volumes.iter().sum()
    }

    pub(crate) fn lattice(&self) -> &Lattice {
        &self.lattice
    }

    pub(crate) fn cells(&self) -> &[[i64; 2]] {
        &self.cells
    }

    pub(crate) fn row(&self, j: i64) -> Option<&RowSpan> {
        let k = j - self.row_lo;
        if k < 0 {
            return None;
        }
        self.rows.get(k as usize).and_then(Option::as_ref)
    }

    /// Node index of a lattice cell, if that cell belongs to the grid.
    #[cfg(test)]
    pub(crate) fn node_at(&self, cell: [i64; 2]) -> Option<usize> {
        let span = self.row(cell[1])?;
        if cell[0] < span.col_lo || cell[0] > span.col_hi() {
            return None;
        }
        Some(span.start + (cell[0] - span.col_lo) as usize)
    }

    /// Populates the band records for scale `eps` and support radius `support`.
    pub fn mark_band(&mut self, eps: f64, support: f64) -> Result<()> {
        for (node, slot) in self.nodes.iter().zip(self.band.iter_mut()) {
            *slot = band_membership(&self.domain, eps, support, node)?;
        }
        self.band_eps = Some(eps);
        Ok(())
    }

    pub fn band(&self) -> &[Option<BandInfo>] {
        &self.band
    }

    /// The `eps` for which the band was last marked.
    pub fn band_eps(&self) -> Option<f64> {
        self.band_eps
    }

    /// Samples a function at the nodes.
    pub fn sample<F: Fn(&Point) -> f64>(&self, f: F) -> Vec<f64> {
        self.nodes.iter().map(f).collect()
    }
}

type DatumFn = Arc<dyn Fn(&Point, f64) -> f64 + Send + Sync>;

/// Flux datum `g(xbar, t)` on the boundary.
#[derive(Clone)]
pub struct BoundaryDatum {
    f: DatumFn,
    zero: bool,
}

impl BoundaryDatum {
    pub fn new<F: Fn(&Point, f64) -> f64 + Send + Sync + 'static>(f: F) -> Self {
        BoundaryDatum {
            f: Arc::new(f),
            zero: false,
        }
    }

    pub fn zero() -> Self {
        BoundaryDatum {
            f: Arc::new(|_, _| 0.0),
            zero: true,
        }
    }

    pub fn constant(value: f64) -> Self {
        if value == 0.0 {
            return Self::zero();
        }
        Self::new(move |_, _| value)
    }

    /// Pointwise sum of two data.
    pub fn sum(&self, other: &BoundaryDatum) -> Self {
        let (a, b) = (self.f.clone(), other.f.clone());
        BoundaryDatum {
            f: Arc::new(move |x, t| a(x, t) + b(x, t)),
            zero: self.zero && other.zero,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.zero
    }

    pub fn eval(&self, xbar: &Point, t: f64) -> f64 {
        (self.f)(xbar, t)
    }
}

impl fmt::Debug for BoundaryDatum {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("BoundaryDatum")
            .field("zero", &self.zero)
            .finish_non_exhaustive()
    }
}

/// Exterior cells within `d eps` of `∂Ω`, where the flux datum is sampled.
#[derive(Clone, Debug)]
pub struct ExteriorCollar {
    eps: f64,
    nodes: Vec<Point>,
    cells: Vec<[i64; 2]>,
    projections: Vec<Point>,
    volumes: Vec<f64>,
    index: HashMap<[i64; 2], usize>,
    datum: BoundaryDatum,
}

/// Builds the collar on the same lattice as `build_grid(domain, h)`.
pub fn build_collar(
    domain: &Domain,
    eps: f64,
    h: f64,
    support: f64,
    datum: BoundaryDatum,
) -> Result<ExteriorCollar> {
    let reach = support * eps;
    if !(reach > h) {
        return Err(Error::InvalidParameter(format!(
            "collar needs d*eps > h, got d*eps = {reach} and h = {h}"
        )));
    }
    let lattice = Lattice::for_domain(domain, h);
    let mut candidates: Vec<[i64; 2]> = Vec::new();
    match *domain {
        Domain::Interval { a, b } => {
            let lo = ((a - reach - lattice.origin[0]) / h).floor() as i64 - 1;
            let hi = ((b + reach - lattice.origin[0]) / h).ceil() as i64 + 1;
            candidates.extend((lo..=hi).map(|i| [i, 0]));
        }
        Domain::Disk { radius, .. } => {
            let n = ((radius + reach) / h).ceil() as i64 + 1;
            for j in -n..n {
                for i in -n..n {
                    candidates.push([i, j]);
                }
            }
        }
    }
    let mut collar = ExteriorCollar {
        eps,
        nodes: Vec::new(),
        cells: Vec::new(),
        projections: Vec::new(),
        volumes: Vec::new(),
        index: HashMap::new(),
        datum,
    };
    let vol = h.powi(domain.dim() as i32);
    for cell in candidates {
        let y = lattice.point(cell);
        let sd = domain.signed_distance(&y);
        if sd > 0.0 && sd < reach {
            let p = domain.project_to_boundary(&y)?;
            collar.index.insert(cell, collar.nodes.len());
            collar.nodes.push(y);
            collar.cells.push(cell);
            collar.projections.push(p.xbar);
            collar.volumes.push(vol);
        }
    }
    Ok(collar)
}

impl ExteriorCollar {
    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[Point] {
        &self.nodes
    }

    pub fn volumes(&self) -> &[f64] {
        &self.volumes
    }

    pub fn datum(&self) -> &BoundaryDatum {
        &self.datum
    }

    /// Same nodes, different flux datum.
    pub fn with_datum(&self, datum: BoundaryDatum) -> Self {
        ExteriorCollar {
            datum,
            ..self.clone()
        }
    }

    pub(crate) fn index_of(&self, cell: &[i64; 2]) -> Option<usize> {
        self.index.get(cell).copied()
    }

    /// `g(y, t)`, extended constantly along normals: `g(ybar, t)`.
    pub fn flux_value(&self, k: usize, t: f64) -> f64 {
        self.datum.eval(&self.projections[k], t)
    }

    pub fn flux_values(&self, t: f64) -> Vec<f64> {
        if self.datum.is_zero() {
            return vec![0.0; self.nodes.len()];
        }
        (0..self.nodes.len()).map(|k| self.flux_value(k, t)).collect()
    }
}
