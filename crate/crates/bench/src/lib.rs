//! Fixtures shared by the benchmarks.

use nonlocal_neumann::geometry::{build_collar, build_grid, BoundaryDatum, Domain, Grid};
use nonlocal_neumann::kernels::{FluxKernelKind, KernelProfile, NormalizationConstants};
use nonlocal_neumann::operator::{assemble_flux, assemble_operator, FluxAssembler, NonlocalOperator};

/// Grid, kernel and constants ready for assembly.
pub struct Problem {
    pub grid: Grid,
    pub profile: KernelProfile,
    pub constants: NormalizationConstants,
    pub eps: f64,
}

impl Problem {
    /// `h = eps / rho` on the unit interval or the unit disk.
    pub fn new(disk: bool, eps: f64, rho: f64) -> Self {
        let domain = if disk {
            Domain::disk([0.0, 0.0], 1.0).unwrap()
        } else {
            Domain::interval(0.0, 1.0).unwrap()
        };
        let profile = KernelProfile::quartic(domain.dim()).unwrap();
        let constants = NormalizationConstants::compute(&profile).unwrap();
        let mut grid = build_grid(&domain, eps / rho).unwrap();
        grid.mark_band(eps, profile.support()).unwrap();
        Problem {
            grid,
            profile,
            constants,
            eps,
        }
    }

    pub fn operator(&self) -> NonlocalOperator {
        assemble_operator(&self.grid, &self.profile, &self.constants, self.eps).unwrap()
    }

    pub fn flux(&self, kind: FluxKernelKind) -> FluxAssembler {
        let collar = build_collar(
            self.grid.domain(),
            self.eps,
            self.grid.h(),
            self.profile.support(),
            BoundaryDatum::constant(1.0),
        )
        .unwrap();
        assemble_flux(&self.grid, &collar, kind, &self.profile, &self.constants, self.eps).unwrap()
    }
}
