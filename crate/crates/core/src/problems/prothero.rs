use std::f64::consts::FRAC_PI_4;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::analysis::{quadrature_residual, solve_shifted, stability_function, stage_order_vector};
use crate::error::{Error, Result};
use crate::integrator::{Linearity, OdeSystem};
use crate::linalg::Matrix;
use crate::tableau::ButcherTableau;

/// `φ^(j)(t)` for `φ(t) = sin(t + π/4)`.
pub fn phi_derivative(j: u32, t: f64) -> f64 {
    (t + FRAC_PI_4 + f64::from(j) * std::f64::consts::FRAC_PI_2).sin()
}

/// `u' = λ(u - φ(t)) + φ'(t)` with `φ(t) = sin(t + π/4)`, `u(0) = φ(0)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProtheroRobinson {
    pub lambda: f64,
}

pub fn prothero_robinson(lambda: f64) -> Result<ProtheroRobinson> {
    if !(lambda <= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "stiffness parameter must satisfy Re(lambda) <= 0, got {lambda}"
        )));
    }
    Ok(ProtheroRobinson { lambda })
}

impl OdeSystem for ProtheroRobinson {
    fn dim(&self) -> usize {
        1
    }

    fn rhs(&self, t: f64, u: &[f64], out: &mut [f64]) {
        out[0] = self.lambda * (u[0] - phi_derivative(0, t)) + phi_derivative(1, t);
    }

    fn jacobian(&self, _t: f64, _u: &[f64]) -> Matrix {
        Matrix::Dense(DMatrix::from_element(1, 1, self.lambda))
    }

    fn linearity(&self) -> Linearity {
        Linearity::Affine
    }

    fn initial_state(&self, t0: f64) -> Vec<f64> {
        vec![phi_derivative(0, t0)]
    }

    fn exact(&self, t: f64) -> Option<Vec<f64>> {
        Some(vec![phi_derivative(0, t)])
    }

    fn describe(&self) -> String {
        format!("prothero-robinson lambda={:e} phi=sin(t+pi/4)", self.lambda)
    }
}

/// `u' = λ u`, `u(0) = 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearDecay {
    pub lambda: f64,
}

impl OdeSystem for LinearDecay {
    fn dim(&self) -> usize {
        1
    }

    fn rhs(&self, _t: f64, u: &[f64], out: &mut [f64]) {
        out[0] = self.lambda * u[0];
    }

    fn jacobian(&self, _t: f64, _u: &[f64]) -> Matrix {
        Matrix::Dense(DMatrix::from_element(1, 1, self.lambda))
    }

    fn linearity(&self) -> Linearity {
        Linearity::Affine
    }

    fn initial_state(&self, _t0: f64) -> Vec<f64> {
        vec![1.0]
    }

    fn exact(&self, t: f64) -> Option<Vec<f64>> {
        Some(vec![(self.lambda * t).exp()])
    }

    fn describe(&self) -> String {
        format!("linear-decay lambda={:e}", self.lambda)
    }
}

/// Predicts the Prothero–Robinson error `u_n - φ(t_n)` of a scheme from the
/// linear error recursion
///
/// `err^{n+1} = R(ζ) err^n + ζ b^T (I - ζA)^{-1} Σ_{j>=2} dt^j/(j-1)! τ^(j) φ^(j)(t_n)
///             + Σ_{j>=1} dt^j/(j-1)! (b^T c^{j-1} - 1/j) φ^(j)(t_n)`,
///
/// with the series truncated at `jmax`.
#[derive(Debug, Clone)]
pub struct RecursionOracle {
    tableau: ButcherTableau,
    lambda: f64,
    jmax: u32,
}

/// Result of running the oracle for several steps.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleRun {
    /// `err^n` for `n = 0..=steps`.
    pub errors: Vec<f64>,
    /// Accumulated bound on the omitted series terms.
    pub tail_bound: f64,
}

/// Terms beyond `jmax` included when bounding the truncated series.
const TAIL_TERMS: u32 = 40;

impl RecursionOracle {
    pub const DEFAULT_JMAX: u32 = 12;

    pub fn new(tableau: ButcherTableau, lambda: f64, jmax: u32) -> Result<Self> {
        if jmax < 2 {
            return Err(Error::InvalidArgument(format!("jmax must be at least 2, got {jmax}")));
        }
        Ok(Self { tableau, lambda, jmax })
    }

    fn factorial(n: u32) -> f64 {
        (1..=n).map(f64::from).product()
    }

    /// `|ζ b^T (I - ζA)^{-1} τ^(j)|` and the quadrature defect for term `j`.
    fn term(&self, j: u32, zeta: Complex64) -> Result<(f64, f64)> {
        let stage = if j >= 2 {
            let tau: Vec<Complex64> = stage_order_vector(&self.tableau, j)
                .tau
                .iter()
                .map(|v| Complex64::new(*v, 0.0))
                .collect();
            let x = solve_shifted(&self.tableau, zeta, &tau)?;
            let bx: Complex64 = self.tableau.b().iter().zip(&x).map(|(b, x)| *b * x).sum();
            (zeta * bx).re
        } else {
            0.0
        };
        Ok((stage, quadrature_residual(&self.tableau, j)))
    }

    /// One application of the recursion.
    pub fn step(&self, err: f64, tn: f64, dt: f64) -> Result<f64> {
        let zeta = Complex64::new(self.lambda * dt, 0.0);
        let r = stability_function(&self.tableau, zeta)?.re;
        let mut next = r * err;
        for j in 1..=self.jmax {
            let (stage, quad) = self.term(j, zeta)?;
            let w = dt.powi(j as i32) / Self::factorial(j - 1) * phi_derivative(j, tn);
            next += w * (stage + quad);
        }
        Ok(next)
    }

    /// Bound on the series terms `j > jmax` omitted by one step, using
    /// `|φ^(j)| <= 1`.
    pub fn tail_bound(&self, dt: f64) -> Result<f64> {
        let zeta = Complex64::new(self.lambda * dt, 0.0);
        let mut total = 0.0;
        for j in self.jmax + 1..=self.jmax + TAIL_TERMS {
            let (stage, quad) = self.term(j, zeta)?;
            total += dt.powi(j as i32) / Self::factorial(j - 1) * (stage.abs() + quad.abs());
        }
        Ok(total)
    }

    /// Run `steps` steps of size `dt` from `t0` with `err^0 = 0`.
    pub fn run(&self, t0: f64, dt: f64, steps: usize) -> Result<OracleRun> {
        let zeta = Complex64::new(self.lambda * dt, 0.0);
        let r = stability_function(&self.tableau, zeta)?.re.abs();
        let per_step = self.tail_bound(dt)?;
        let mut errors = Vec::with_capacity(steps + 1);
        errors.push(0.0);
        let mut bound = 0.0;
        for n in 0..steps {
            let tn = t0 + n as f64 * dt;
            let last = *errors.last().expect("nonempty");
            errors.push(self.step(last, tn, dt)?);
            bound = r * bound + per_step;
        }
        Ok(OracleRun {
            errors,
            tail_bound: bound,
        })
    }
}
