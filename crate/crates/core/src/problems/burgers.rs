use super::stencils::{apply, d1_rows, d2_rows, neumann_d2_weights, Row};
use super::{max_norm, Boundary, GridSpec};
use crate::error::{Error, Result};
use crate::integrator::{Observable, OdeSystem};
use crate::linalg::{BandMatrix, Matrix};

/// Viscous Burgers `u_t + u u_x = ν u_xx + f` on `(0, 1)` with Neumann data
/// `u_x = h` at both walls, manufactured from
/// `u(x, t) = cos(2 + 10t) sin(0.2 + 20x)`.
///
/// All nodes `0..=N` are unknowns. At the walls `u_x` is the prescribed
/// slope and `u_xx` uses a one-sided closure that also consumes the slope;
/// the two nearest interior nodes use biased 4th-order stencils.
#[derive(Debug, Clone)]
pub struct Burgers {
    pub nu: f64,
    pub grid: GridSpec,
    d1: Vec<Row>,
    d2: Vec<Row>,
    wall_weights: [f64; 5],
    wall_slope_weight: f64,
    /// `sin(0.2 + 20x)` and `cos(0.2 + 20x)` at the nodes.
    sin_x: Vec<f64>,
    cos_x: Vec<f64>,
}

pub fn burgers_mol(nu: f64, grid: GridSpec) -> Result<Burgers> {
    grid.validate()?;
    if grid.boundary != Boundary::Neumann {
        return Err(Error::InvalidArgument("the Burgers problem needs a Neumann grid".into()));
    }
    if !(nu > 0.0) {
        return Err(Error::InvalidArgument(format!("viscosity must be positive, got {nu}")));
    }
    let h = grid.h();
    let (w, beta) = neumann_d2_weights();
    Ok(Burgers {
        nu,
        grid,
        d1: d1_rows(grid.cells, h),
        d2: d2_rows(grid.cells, h),
        wall_weights: w.map(|x| x / (h * h)),
        wall_slope_weight: beta / h,
        sin_x: (0..=grid.cells).map(|i| (0.2 + 20.0 * grid.node(i)).sin()).collect(),
        cos_x: (0..=grid.cells).map(|i| (0.2 + 20.0 * grid.node(i)).cos()).collect(),
    })
}

impl Burgers {
    pub const DEFAULT_NU: f64 = 0.1;
    pub const DEFAULT_CELLS: usize = 2048;
    pub const T_END: f64 = 1.0;

    pub fn exact_at(x: f64, t: f64) -> f64 {
        (2.0 + 10.0 * t).cos() * (0.2 + 20.0 * x).sin()
    }

    pub fn exact_ut(x: f64, t: f64) -> f64 {
        -10.0 * (2.0 + 10.0 * t).sin() * (0.2 + 20.0 * x).sin()
    }

    pub fn exact_ux(x: f64, t: f64) -> f64 {
        20.0 * (2.0 + 10.0 * t).cos() * (0.2 + 20.0 * x).cos()
    }

    pub fn exact_uxx(x: f64, t: f64) -> f64 {
        -400.0 * Self::exact_at(x, t)
    }

    pub fn forcing(&self, x: f64, t: f64) -> f64 {
        Self::exact_ut(x, t) + Self::exact_at(x, t) * Self::exact_ux(x, t) - self.nu * Self::exact_uxx(x, t)
    }

    /// Discrete `(u_x, u_xx)` at node `i` including the wall closures.
    fn derivatives(&self, t: f64, u: &[f64], i: usize) -> (f64, f64) {
        let n = self.grid.cells;
        let dot = |row: &Row| row.iter().map(|(k, w)| w * u[*k]).sum::<f64>();
        if i == 0 {
            let slope = Self::exact_ux(0.0, t);
            let uxx = (0..5).map(|k| self.wall_weights[k] * u[k]).sum::<f64>() + self.wall_slope_weight * slope;
            (slope, uxx)
        } else if i == n {
            // mirrored closure: derivative along the inward coordinate is -h1
            let slope = Self::exact_ux(1.0, t);
            let uxx = (0..5).map(|k| self.wall_weights[k] * u[n - k]).sum::<f64>() - self.wall_slope_weight * slope;
            (slope, uxx)
        } else {
            (dot(&self.d1[i]), dot(&self.d2[i]))
        }
    }
}

impl OdeSystem for Burgers {
    fn dim(&self) -> usize {
        self.grid.cells + 1
    }

    fn rhs(&self, t: f64, u: &[f64], out: &mut [f64]) {
        // forcing = -10 sin(τ) S + 20 cos²(τ) S C + 400 ν cos(τ) S with τ = 2 + 10t
        let (st, ct) = (2.0 + 10.0 * t).sin_cos();
        let (fa, fb) = (-10.0 * st + 400.0 * self.nu * ct, 20.0 * ct * ct);
        for (i, o) in out.iter_mut().enumerate() {
            let (ux, uxx) = self.derivatives(t, u, i);
            let (sx, cx) = (self.sin_x[i], self.cos_x[i]);
            *o = -u[i] * ux + self.nu * uxx + sx * (fa + fb * cx);
        }
    }

    fn jacobian(&self, t: f64, u: &[f64]) -> Matrix {
        let n = self.grid.cells;
        let mut j = BandMatrix::zeros(n + 1, 4, 4);
        for i in 0..=n {
            let (ux, _) = self.derivatives(t, u, i);
            j.add(i, i, -ux);
            if i == 0 || i == n {
                for k in 0..5 {
                    let col = if i == 0 { k } else { n - k };
                    j.add(i, col, self.nu * self.wall_weights[k]);
                }
                continue;
            }
            for (col, w) in &self.d1[i] {
                j.add(i, *col, -u[i] * w);
            }
            for (col, w) in &self.d2[i] {
                j.add(i, *col, self.nu * w);
            }
        }
        Matrix::Banded(j)
    }

    fn initial_state(&self, t0: f64) -> Vec<f64> {
        self.exact(t0).expect("exact solution is known")
    }

    fn exact(&self, t: f64) -> Option<Vec<f64>> {
        Some((0..=self.grid.cells).map(|i| Self::exact_at(self.grid.node(i), t)).collect())
    }

    fn observables(&self) -> Vec<Observable> {
        vec![Observable::U, Observable::Ux, Observable::Uxx]
    }

    fn observable_error(&self, obs: Observable, _t: f64, u: &[f64], reference: &[f64]) -> Option<f64> {
        let err: Vec<f64> = u.iter().zip(reference).map(|(a, b)| a - b).collect();
        let values = match obs {
            Observable::U => err,
            Observable::Ux => apply(&self.d1, &err),
            Observable::Uxx => apply(&self.d2, &err),
        };
        Some(max_norm(values))
    }

    fn describe(&self) -> String {
        format!("burgers nu={} cells={} neumann", self.nu, self.grid.cells)
    }
}
