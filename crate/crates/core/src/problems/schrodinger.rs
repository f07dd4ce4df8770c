use num_complex::Complex64;

use super::stencils::{apply, d1_rows, d2_rows, Row};
use super::{max_norm, Boundary, GridSpec};
use crate::error::{Error, Result};
use crate::integrator::{Linearity, Observable, OdeSystem};
use crate::linalg::{BandMatrix, Matrix};

/// `u_t = (iω/k²) u_xx` on `(0, 1)` with Dirichlet data taken from the exact
/// solution `u = exp(i(kx - ωt))`.
///
/// The complex unknowns at the interior nodes `1..N` are stored interleaved as
/// `[Re u_1, Im u_1, Re u_2, Im u_2, ...]`, which keeps the Jacobian banded.
#[derive(Debug, Clone)]
pub struct Schrodinger {
    pub omega: f64,
    pub k: f64,
    pub grid: GridSpec,
    alpha: f64,
    d1: Vec<Row>,
    d2: Vec<Row>,
}

pub fn schrodinger_mol(omega: f64, k: f64, grid: GridSpec) -> Result<Schrodinger> {
    grid.validate()?;
    if grid.boundary != Boundary::Dirichlet {
        return Err(Error::InvalidArgument("the Schrodinger problem needs a Dirichlet grid".into()));
    }
    if k == 0.0 {
        return Err(Error::InvalidArgument("wavenumber must be nonzero".into()));
    }
    let h = grid.h();
    Ok(Schrodinger {
        omega,
        k,
        grid,
        alpha: omega / (k * k),
        d1: d1_rows(grid.cells, h),
        d2: d2_rows(grid.cells, h),
    })
}

impl Schrodinger {
    pub const DEFAULT_OMEGA: f64 = 2.0 * std::f64::consts::PI;
    pub const DEFAULT_K: f64 = 5.0;
    pub const DEFAULT_CELLS: usize = 2000;
    pub const T_END: f64 = 1.2;

    pub fn exact_at(&self, x: f64, t: f64) -> Complex64 {
        Complex64::from_polar(1.0, self.k * x - self.omega * t)
    }

    fn interior(&self) -> usize {
        self.grid.cells - 1
    }

    /// Right-hand side with explicitly supplied wall values.
    pub fn rhs_with_boundary(&self, u: &[f64], left: Complex64, right: Complex64, out: &mut [f64]) {
        let n = self.grid.cells;
        let value = |node: usize| -> Complex64 {
            if node == 0 {
                left
            } else if node == n {
                right
            } else {
                Complex64::new(u[2 * (node - 1)], u[2 * (node - 1) + 1])
            }
        };
        for i in 1..n {
            let uxx: Complex64 = self.d2[i].iter().map(|(k, w)| value(*k) * *w).sum();
            // i alpha uxx
            out[2 * (i - 1)] = -self.alpha * uxx.im;
            out[2 * (i - 1) + 1] = self.alpha * uxx.re;
        }
    }

    /// Complex grid function on all nodes from a state and wall values.
    fn nodes(&self, u: &[f64], left: Complex64, right: Complex64) -> Vec<Complex64> {
        let n = self.grid.cells;
        let mut v = Vec::with_capacity(n + 1);
        v.push(left);
        v.extend(u.chunks_exact(2).map(|p| Complex64::new(p[0], p[1])));
        v.push(right);
        v
    }
}

impl OdeSystem for Schrodinger {
    fn dim(&self) -> usize {
        2 * self.interior()
    }

    fn rhs(&self, t: f64, u: &[f64], out: &mut [f64]) {
        self.rhs_with_boundary(u, self.exact_at(0.0, t), self.exact_at(1.0, t), out);
    }

    fn jacobian(&self, _t: f64, _u: &[f64]) -> Matrix {
        let n = self.grid.cells;
        let mut j = BandMatrix::zeros(self.dim(), 9, 9);
        for i in 1..n {
            for (node, w) in &self.d2[i] {
                if *node == 0 || *node == n {
                    continue;
                }
                let (row_re, row_im) = (2 * (i - 1), 2 * (i - 1) + 1);
                let (col_re, col_im) = (2 * (node - 1), 2 * (node - 1) + 1);
                j.add(row_re, col_im, -self.alpha * w);
                j.add(row_im, col_re, self.alpha * w);
            }
        }
        Matrix::Banded(j)
    }

    fn linearity(&self) -> Linearity {
        Linearity::Affine
    }

    fn initial_state(&self, t0: f64) -> Vec<f64> {
        self.exact(t0).expect("exact solution is known")
    }

    fn exact(&self, t: f64) -> Option<Vec<f64>> {
        let mut v = Vec::with_capacity(self.dim());
        for i in 1..self.grid.cells {
            let z = self.exact_at(self.grid.node(i), t);
            v.push(z.re);
            v.push(z.im);
        }
        Some(v)
    }

    fn observables(&self) -> Vec<Observable> {
        vec![Observable::U, Observable::Ux, Observable::Uxx]
    }

    fn observable_error(&self, obs: Observable, t: f64, u: &[f64], reference: &[f64]) -> Option<f64> {
        let (l, r) = (self.exact_at(0.0, t), self.exact_at(1.0, t));
        let num = self.nodes(u, l, r);
        let exact = self.nodes(reference, l, r);
        let err: Vec<Complex64> = num.iter().zip(&exact).map(|(a, b)| a - b).collect();
        let rows = match obs {
            Observable::U => return Some(max_norm(err.iter().map(|z| z.norm()))),
            Observable::Ux => &self.d1,
            Observable::Uxx => &self.d2,
        };
        let re: Vec<f64> = err.iter().map(|z| z.re).collect();
        let im: Vec<f64> = err.iter().map(|z| z.im).collect();
        let (dre, dim) = (apply(rows, &re), apply(rows, &im));
        Some(max_norm(dre.iter().zip(&dim).map(|(a, b)| a.hypot(*b))))
    }

    fn describe(&self) -> String {
        format!(
            "schrodinger omega={} k={} cells={} dirichlet",
            self.omega, self.k, self.grid.cells
        )
    }
}
