//! Nonlocal approximations of the Neumann heat problem.
//!
//! A nonlocal diffusion `u_t = L_eps u + F_eps(g)` with a rescaled kernel
//! `J_eps` on a uniform lattice, a boundary-flux term fed from an exterior
//! collar, explicit and fixed-point time integrators, classical reference
//! solutions, and an eps-sweep harness that measures how fast the nonlocal
//! solutions approach the local one.

// `!(x > 0.0)` is used on purpose so NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod error;
pub mod geometry;
pub mod harness;
pub mod kernels;
pub mod operator;
pub mod quadrature;
pub mod reference;
pub mod solver;

pub use config::{DatumChoice, DtRule, ReferenceChoice, StudyConfig};
pub use error::{Error, Result};
pub use geometry::{build_collar, build_grid, BoundaryDatum, Domain, ExteriorCollar, Grid, Point};
pub use harness::{run_case, run_study, StudyResult, StudyRow, TestFunction};
pub use kernels::{FluxKernelKind, KernelCatalog, KernelProfile, NormalizationConstants};
pub use operator::{
    assemble_flux, assemble_flux_with, assemble_operator, assemble_operator_with, FluxAssembler,
    NonlocalOperator, Quadrature,
};
pub use reference::{CaseName, HeatProblem, ReferenceSolution};
pub use solver::{GridField, PicardConfig, Scheme};
