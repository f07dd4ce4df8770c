//! Test problems: the Prothero–Robinson ODE and its linear error-recursion
//! oracle, a Schrödinger and a viscous Burgers method-of-lines system, and
//! the Van der Pol oscillator with an RK4 reference trajectory.

mod burgers;
mod prothero;
mod schrodinger;
pub mod stencils;
mod vdp;

pub use burgers::{burgers_mol, Burgers};
pub use prothero::{phi_derivative, prothero_robinson, LinearDecay, OracleRun, ProtheroRobinson, RecursionOracle};
pub use schrodinger::{schrodinger_mol, Schrodinger};
pub use vdp::{van_der_pol, VanDerPol, VdpReference, VdpReferenceParams};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Boundary {
    Dirichlet,
    Neumann,
}

/// Uniform grid of `cells` cells on `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GridSpec {
    pub cells: usize,
    pub boundary: Boundary,
}

impl GridSpec {
    pub const MIN_CELLS: usize = 16;

    pub fn new(cells: usize, boundary: Boundary) -> Result<Self> {
        let g = Self { cells, boundary };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if self.cells < Self::MIN_CELLS {
            return Err(Error::InvalidArgument(format!(
                "grid needs at least {} cells, got {}",
                Self::MIN_CELLS,
                self.cells
            )));
        }
        Ok(())
    }

    pub fn h(&self) -> f64 {
        1.0 / self.cells as f64
    }

    pub fn node(&self, i: usize) -> f64 {
        i as f64 / self.cells as f64
    }
}

fn max_norm(v: impl IntoIterator<Item = f64>) -> f64 {
    v.into_iter().fold(0.0, |m, x| m.max(x.abs()))
}
