//! Plain-text `key = value` configuration files.
//!
//! Lines are `key = value`; `#` starts a comment; values may be wrapped in
//! double quotes. Unknown keys are rejected.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Domain;
use crate::kernels::FluxKernelKind;
use crate::operator::Quadrature;
use crate::reference::{self, CaseName};
use crate::solver::Scheme;

const KNOWN_KEYS: &[&str] = &[
    "case",
    "domain",
    "kernel",
    "flux_kernel",
    "g",
    "eps",
    "eps_list",
    "rho",
    "h",
    "scheme",
    "dt",
    "T",
    "picard_check",
    "reference",
    "out_dir",
    "quadrature",
];

/// Parses the raw `key = value` pairs.
pub fn parse_pairs(text: &str) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = strip_comment(raw).trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            Error::Config(format!("line {}: expected `key = value`", lineno + 1))
        })?;
        let key = key.trim();
        if !KNOWN_KEYS.contains(&key) {
            return Err(Error::Config(format!("line {}: unknown key `{key}`", lineno + 1)));
        }
        let value = unquote(value.trim());
        if map.insert(key.to_string(), value.to_string()).is_some() {
            return Err(Error::Config(format!("line {}: duplicate key `{key}`", lineno + 1)));
        }
    }
    Ok(map)
}

// `#` inside a quoted value does not start a comment.
fn strip_comment(line: &str) -> &str {
    let mut quoted = false;
    for (i, c) in line.char_indices() {
        match c {
            '"' => quoted = !quoted,
            '#' if !quoted => return &line[..i],
            _ => {}
        }
    }
    line
}

fn unquote(v: &str) -> &str {
    v.strip_prefix('"')
        .and_then(|s| s.strip_suffix('"'))
        .unwrap_or(v)
}

fn number(key: &str, v: &str) -> Result<f64> {
    let x: f64 = v
        .trim()
        .parse()
        .map_err(|_| Error::Config(format!("`{key}` must be a number, got `{v}`")))?;
    if !x.is_finite() {
        return Err(Error::Config(format!("`{key}` must be finite")));
    }
    Ok(x)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum DtRule {
    /// `0.25 / (2 max_i d_i)`.
    Auto,
    Fixed(f64),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ReferenceChoice {
    /// Closed form when the case has one, otherwise finite differences.
    Auto,
    Exact,
    Fd,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum DatumChoice {
    /// The case's own boundary flux.
    Case,
    Zero,
}

/// Everything a run or an eps-sweep needs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StudyConfig {
    pub case: CaseName,
    pub domain: Domain,
    pub kernel: String,
    pub flux_kernel: FluxKernelKind,
    pub datum: DatumChoice,
    pub eps_list: Vec<f64>,
    /// `h = eps / rho` unless `h` is fixed.
    pub rho: f64,
    pub h: Option<f64>,
    pub scheme: Scheme,
    pub dt: DtRule,
    pub t_end: f64,
    pub picard_check: bool,
    pub reference: ReferenceChoice,
    pub quadrature: Quadrature,
    pub out_dir: PathBuf,
}

impl StudyConfig {
    /// Defaults for a catalog case: quartic kernel, zero flux kernel, `rho = 20`,
    /// RK4 with the automatic step, moment-matched weights.
    pub fn for_case(case: CaseName, eps_list: Vec<f64>) -> Self {
        let problem = reference::catalog(case);
        StudyConfig {
            case,
            domain: problem.domain,
            kernel: "quartic".into(),
            flux_kernel: FluxKernelKind::Zero,
            datum: DatumChoice::Case,
            eps_list,
            rho: 20.0,
            h: None,
            scheme: Scheme::Rk4,
            dt: DtRule::Auto,
            t_end: problem.t_end,
            picard_check: false,
            reference: ReferenceChoice::Auto,
            quadrature: Quadrature::MomentMatched,
            out_dir: PathBuf::from("study_out"),
        }
    }

    fn parse_text(text: &str) -> Result<Self> {
        let map = parse_pairs(text)?;
        let case = CaseName::parse(
            map.get("case")
                .ok_or_else(|| Error::Config("missing required key `case`".into()))?,
        )
        .map_err(|e| Error::Config(e.to_string()))?;
        let eps_list = match (map.get("eps_list"), map.get("eps")) {
            (Some(_), Some(_)) => {
                return Err(Error::Config("give either `eps` or `eps_list`, not both".into()))
            }
            (Some(v), None) | (None, Some(v)) => v
                .split(',')
                .map(|s| number("eps_list", s))
                .collect::<Result<Vec<_>>>()?,
            (None, None) => return Err(Error::Config("missing `eps` or `eps_list`".into())),
        };
        let mut cfg = StudyConfig::for_case(case, eps_list);
        if let Some(v) = map.get("domain") {
            cfg.domain = Domain::parse(v)?;
        }
        if let Some(v) = map.get("kernel") {
            cfg.kernel = v.clone();
        }
        if let Some(v) = map.get("flux_kernel") {
            cfg.flux_kernel = FluxKernelKind::parse(v)?;
        }
        if let Some(v) = map.get("g") {
            cfg.datum = match v.as_str() {
                "zero" => DatumChoice::Zero,
                "case" => DatumChoice::Case,
                other => {
                    return Err(Error::Config(format!(
                        "unknown flux datum `{other}` (expected zero or case)"
                    )))
                }
            };
        }
        if let Some(v) = map.get("rho") {
            cfg.rho = number("rho", v)?;
        }
        if let Some(v) = map.get("h") {
            cfg.h = Some(number("h", v)?);
        }
        if let Some(v) = map.get("scheme") {
            cfg.scheme = Scheme::parse(v)?;
        }
        if let Some(v) = map.get("dt") {
            cfg.dt = if v == "auto" {
                DtRule::Auto
            } else {
                DtRule::Fixed(number("dt", v)?)
            };
        }
        if let Some(v) = map.get("T") {
            cfg.t_end = number("T", v)?;
        }
        if let Some(v) = map.get("picard_check") {
            cfg.picard_check = match v.as_str() {
                "true" => true,
                "false" => false,
                other => {
                    return Err(Error::Config(format!(
                        "`picard_check` must be true or false, got `{other}`"
                    )))
                }
            };
        }
        if let Some(v) = map.get("reference") {
            cfg.reference = match v.as_str() {
                "auto" => ReferenceChoice::Auto,
                "exact" => ReferenceChoice::Exact,
                "fd" => ReferenceChoice::Fd,
                other => {
                    return Err(Error::Config(format!(
                        "unknown reference `{other}` (expected auto, exact or fd)"
                    )))
                }
            };
        }
        if let Some(v) = map.get("quadrature") {
            cfg.quadrature = Quadrature::parse(v)?;
        }
        if let Some(v) = map.get("out_dir") {
            cfg.out_dir = PathBuf::from(v);
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse_text(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    /// Grid spacing used at scale `eps`.
    pub fn spacing(&self, eps: f64) -> f64 {
        self.h.unwrap_or(eps / self.rho)
    }

    /// Checks the invariants that do not need the kernel (support radius `d = 1`
    /// for catalog kernels is checked again at assembly).
    pub fn validate(&self) -> Result<()> {
        if self.eps_list.is_empty() {
            return Err(Error::Config("eps list is empty".into()));
        }
        if self.eps_list.iter().any(|&e| !(e > 0.0)) {
            return Err(Error::Config("eps values must be positive".into()));
        }
        if self.eps_list.windows(2).any(|w| w[1] >= w[0]) {
            return Err(Error::Config("eps list must be strictly decreasing".into()));
        }
        if !(self.rho > 0.0) {
            return Err(Error::Config("rho must be positive".into()));
        }
        if let DtRule::Fixed(dt) = self.dt {
            if !(dt > 0.0) {
                return Err(Error::Config("dt must be positive".into()));
            }
        }
        if !(self.t_end > 0.0) {
            return Err(Error::Config("T must be positive".into()));
        }
        let problem = reference::catalog(self.case);
        if self.domain != problem.domain {
            return Err(Error::Config(format!(
                "case {} is posed on {}, not {}",
                self.case, problem.domain, self.domain
            )));
        }
        if self.reference == ReferenceChoice::Exact && problem.exact.is_none() {
            return Err(Error::Config(format!("case {} has no closed form", self.case)));
        }
        Ok(())
    }

    /// `h <= d eps / 2` for every `eps`.
    pub fn check_coupling(&self, support: f64) -> Result<()> {
        for &eps in &self.eps_list {
            let h = self.spacing(eps);
            if h > 0.5 * support * eps {
                return Err(Error::Config(format!(
                    "h = {h} exceeds d*eps/2 = {} at eps = {eps}",
                    0.5 * support * eps
                )));
            }
        }
        Ok(())
    }
}

impl std::str::FromStr for StudyConfig {
    type Err = Error;

    fn from_str(text: &str) -> Result<Self> {
        Self::parse_text(text)
    }
}
