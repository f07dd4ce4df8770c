//! Diagonally-implicit Runge–Kutta (DIRK) integrators with high weak stage
//! order, together with the tooling needed to check them: Butcher tableau
//! diagnostics, stiff test problems, convergence studies and a coefficient
//! search.
//!
//! The crate is organised bottom-up:
//!
//! * [`tableau`]: the [`ButcherTableau`] value type, the scheme registry and
//!   the line-oriented text format.
//! * [`analysis`]: order conditions, stage order, weak stage order, the
//!   eigenvector criterion, stability function and related residuals.
//! * [`linalg`]: dense and banded LU factorizations used by the stage solves.
//! * [`integrator`]: fixed-step DIRK stepping with Newton stage solves.
//! * [`problems`]: Prothero–Robinson, Schrödinger, Burgers and Van der Pol
//!   test problems plus the linear error-recursion oracle.
//! * [`convergence`]: Δt sweeps, slope fitting and CSV output.
//! * [`search`]: penalty-based multistart search over DIRK coefficients.
//!
//! Data-parallel loops (Δt sweeps, multistarts, stability sampling) run on
//! rayon when the `parallel` feature is enabled and fall back to plain
//! iterators otherwise; see [`exec`].

pub mod analysis;
pub mod convergence;
mod error;
pub mod exec;
pub mod integrator;
pub mod linalg;
pub mod problems;
pub mod search;
pub mod tableau;

pub use analysis::{analyze, SchemeReport};
pub use error::{Error, Result};
pub use exec::Execution;
pub use integrator::{dirk_step, integrate, NewtonSettings, OdeSystem};
pub use tableau::ButcherTableau;
