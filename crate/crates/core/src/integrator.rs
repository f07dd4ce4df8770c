//! Fixed-step DIRK integration with Newton stage solves.
//!
//! Stage `i` solves `U_i = u_n + dt Σ_{j<=i} a_ij f(t_n + c_j dt, U_j)` with
//! Newton iteration on `G(U) = U - dt a_ii f(t_i, U) - known`, using the
//! iteration matrix `I - dt a_ii J(t_i, U)` rebuilt every iteration. Stages
//! with `a_ii = 0` are explicit.

use crate::error::{Error, Result};
use crate::linalg::{Factorization, Matrix};
use crate::tableau::ButcherTableau;

/// Quantities whose error a convergence study can measure.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Observable {
    U,
    Ux,
    Uxx,
}

impl Observable {
    pub fn label(self) -> &'static str {
        match self {
            Observable::U => "u",
            Observable::Ux => "ux",
            Observable::Uxx => "uxx",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.trim() {
            "u" => Some(Observable::U),
            "ux" | "u_x" => Some(Observable::Ux),
            "uxx" | "u_xx" => Some(Observable::Uxx),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Linearity {
    Nonlinear,
    /// `f(t, u) = J u + g(t)` with constant `J`: one Newton iteration is an
    /// exact solve and iteration matrices can be reused across steps.
    Affine,
}

/// An initial-value problem `u' = f(t, u)`.
///
/// Implementations must be safe to evaluate concurrently from independent
/// integrations.
pub trait OdeSystem: Send + Sync {
    fn dim(&self) -> usize;

    fn rhs(&self, t: f64, u: &[f64], out: &mut [f64]);

    fn jacobian(&self, t: f64, u: &[f64]) -> Matrix;

    fn linearity(&self) -> Linearity {
        Linearity::Nonlinear
    }

    fn initial_state(&self, t0: f64) -> Vec<f64>;

    fn exact(&self, _t: f64) -> Option<Vec<f64>> {
        None
    }

    /// Observables this system can measure.
    fn observables(&self) -> Vec<Observable> {
        vec![Observable::U]
    }

    /// Max-norm error of `obs` for the numerical state `u` against the
    /// reference state `reference` at time `t`.
    fn observable_error(&self, obs: Observable, _t: f64, u: &[f64], reference: &[f64]) -> Option<f64> {
        match obs {
            Observable::U => Some(
                u.iter()
                    .zip(reference)
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0, f64::max),
            ),
            _ => None,
        }
    }

    /// Short human-readable description including parameters.
    fn describe(&self) -> String;
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonSettings {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_iters: usize,
}

impl Default for NewtonSettings {
    fn default() -> Self {
        Self {
            rel_tol: 1e-12,
            abs_tol: 1e-14,
            max_iters: 25,
        }
    }
}

impl NewtonSettings {
    pub fn validate(&self) -> Result<()> {
        if !(self.rel_tol > 0.0 && self.abs_tol > 0.0) || self.max_iters == 0 {
            return Err(Error::InvalidArgument(format!(
                "Newton tolerances must be positive and max_iters >= 1, got {self:?}"
            )));
        }
        Ok(())
    }
}

/// Newton history of one stage solve.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct StageReport {
    pub iterations: usize,
    /// `‖δ_k‖∞` for each iteration.
    pub update_norms: Vec<f64>,
    /// `‖G(U_k)‖∞` before each update.
    pub residual_norms: Vec<f64>,
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Reusable stepping state for one trajectory.
pub struct DirkStepper<'a, S: OdeSystem + ?Sized> {
    tableau: &'a ButcherTableau,
    sys: &'a S,
    newton: NewtonSettings,
    /// Constant Jacobian of an affine system and its ∞-norm.
    affine_jacobian: Option<(Matrix, f64)>,
    // (bits of dt * a_ii, factorization of I - dt a_ii J) for affine systems
    cache: Vec<(u64, Factorization)>,
    reports: Vec<StageReport>,
    stage_values: Vec<Vec<f64>>,
    stage_derivs: Vec<Vec<f64>>,
    last_start: Option<(Vec<f64>, f64)>,
}

impl<'a, S: OdeSystem + ?Sized> DirkStepper<'a, S> {
    pub fn new(tableau: &'a ButcherTableau, sys: &'a S, newton: NewtonSettings) -> Result<Self> {
        if !tableau.is_dirk() {
            return Err(Error::InvalidTableau(format!(
                "{} is not diagonally implicit",
                tableau.name()
            )));
        }
        newton.validate()?;
        Ok(Self {
            tableau,
            sys,
            newton,
            affine_jacobian: None,
            cache: Vec::new(),
            reports: Vec::new(),
            stage_values: Vec::new(),
            stage_derivs: Vec::new(),
            last_start: None,
        })
    }

    /// Newton histories of the stages of the most recent step.
    pub fn stage_reports(&self) -> &[StageReport] {
        &self.reports
    }

    fn affine_factor(&mut self, t: f64, u: &[f64], scale: f64) -> Result<(usize, f64)> {
        let key = scale.to_bits();
        if self.affine_jacobian.is_none() {
            let jac = self.sys.jacobian(t, u);
            let norm = jac.inf_norm();
            self.affine_jacobian = Some((jac, norm));
        }
        let (jac, norm) = self.affine_jacobian.as_ref().expect("set above");
        let kappa = scale.abs() * norm;
        if let Some(pos) = self.cache.iter().position(|(k, _)| *k == key) {
            return Ok((pos, kappa));
        }
        let f = jac.identity_minus(scale).factor()?;
        // a handful of distinct diagonals per scheme; keep the cache bounded
        // when the step size changes (e.g. a shortened final step)
        if self.cache.len() >= 16 {
            self.cache.remove(0);
        }
        self.cache.push((key, f));
        Ok((self.cache.len() - 1, kappa))
    }

    /// Advance `un` from `tn` by `dt`.
    pub fn step(&mut self, tn: f64, un: &[f64], dt: f64) -> Result<Vec<f64>> {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::InvalidArgument(format!("time step must be positive, got {dt}")));
        }
        let n = self.sys.dim();
        if un.len() != n {
            return Err(Error::Dimension(format!("state has length {}, system dimension is {n}", un.len())));
        }
        let tab = self.tableau;
        let s = tab.stages();
        let (a, c) = (tab.a(), tab.c());
        let affine = self.sys.linearity() == Linearity::Affine;

        let mut stage_values: Vec<Vec<f64>> = std::mem::take(&mut self.stage_values);
        let mut stage_derivs: Vec<Vec<f64>> = std::mem::take(&mut self.stage_derivs);
        stage_values.clear();
        stage_derivs.clear();
        self.reports.clear();
        self.last_start = None;

        let mut known = vec![0.0; n];
        let mut f = vec![0.0; n];
        let mut g = vec![0.0; n];
        for i in 0..s {
            let ti = tn + c[i] * dt;
            known.copy_from_slice(un);
            for j in 0..i {
                let w = dt * a[(i, j)];
                if w != 0.0 {
                    known.iter_mut().zip(&stage_derivs[j]).for_each(|(k, d)| *k += w * d);
                }
            }
            let scale = dt * a[(i, i)];
            let mut report = StageReport::default();
            let u = if scale == 0.0 {
                known.clone()
            } else {
                let mut u = stage_values.last().cloned().unwrap_or_else(|| un.to_vec());
                let mut converged = false;
                for _ in 0..self.newton.max_iters {
                    self.sys.rhs(ti, &u, &mut f);
                    for k in 0..n {
                        g[k] = -(u[k] - scale * f[k] - known[k]);
                    }
                    report.residual_norms.push(max_abs(&g));
                    let kappa = if affine {
                        let (pos, kappa) = self.affine_factor(ti, &u, scale)?;
                        self.cache[pos].1.solve_in_place(&mut g);
                        kappa
                    } else {
                        let jac = self.sys.jacobian(ti, &u);
                        let kappa = scale.abs() * jac.inf_norm();
                        jac.identity_minus(scale).factor()?.solve_in_place(&mut g);
                        kappa
                    };
                    u.iter_mut().zip(&g).for_each(|(x, d)| *x += d);
                    let norm = max_abs(&g);
                    report.update_norms.push(norm);
                    report.iterations += 1;
                    if !norm.is_finite() {
                        break;
                    }
                    // the attainable update size grows with the conditioning of
                    // the iteration matrix; quadratic convergence makes the
                    // remaining error far smaller than the accepted update
                    let tol = self.newton.abs_tol + self.newton.rel_tol * max_abs(&u) * kappa.max(1.0);
                    if affine || norm <= tol {
                        converged = true;
                        break;
                    }
                }
                if !converged {
                    return Err(Error::NewtonDivergence {
                        stage: i + 1,
                        iterations: report.iterations,
                        history: report.update_norms.clone(),
                    });
                }
                u
            };
            let mut k = vec![0.0; n];
            self.sys.rhs(ti, &u, &mut k);
            stage_values.push(u);
            stage_derivs.push(k);
            self.reports.push(report);
        }

        self.stage_values = stage_values;
        self.stage_derivs = stage_derivs;
        self.last_start = Some((un.to_vec(), dt));
        if tab.is_stiffly_accurate() {
            return Ok(self.stage_values[s - 1].clone());
        }
        Ok(self.quadrature_output().expect("stages were just computed"))
    }

    /// Stage values `U_i` of the most recent step.
    pub fn stage_values(&self) -> &[Vec<f64>] {
        &self.stage_values
    }

    /// The quadrature form `u_n + dt Σ b_j f(t_j, U_j)` of the most recent
    /// step. For stiffly accurate schemes [`step`](Self::step) returns `U_s`
    /// instead; the two agree up to the stage-solve tolerance.
    pub fn quadrature_output(&self) -> Option<Vec<f64>> {
        let (un, dt) = self.last_start.as_ref()?;
        let mut out = un.clone();
        for (j, d) in self.stage_derivs.iter().enumerate() {
            let w = dt * self.tableau.b()[j];
            out.iter_mut().zip(d).for_each(|(o, x)| *o += w * x);
        }
        Some(out)
    }
}

/// One DIRK step; see [`DirkStepper::step`].
pub fn dirk_step<S: OdeSystem + ?Sized>(
    tableau: &ButcherTableau,
    sys: &S,
    tn: f64,
    un: &[f64],
    dt: f64,
    newton: NewtonSettings,
) -> Result<Vec<f64>> {
    DirkStepper::new(tableau, sys, newton)?.step(tn, un, dt)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Integration {
    pub state: Vec<f64>,
    pub t_final: f64,
    pub steps: usize,
    /// Length of the final step when it had to be shortened to land on `t_end`.
    pub shortened_last_step: Option<f64>,
    pub trajectory: Option<Vec<(f64, Vec<f64>)>>,
}

/// Step from `t0` to `t_end` with fixed `dt`. When `(t_end - t0) / dt` is not
/// an integer (to 1e-9 relative) the final step is shortened.
pub fn integrate<S: OdeSystem + ?Sized>(
    tableau: &ButcherTableau,
    sys: &S,
    t0: f64,
    u0: &[f64],
    t_end: f64,
    dt: f64,
    newton: NewtonSettings,
) -> Result<Integration> {
    integrate_impl(tableau, sys, t0, u0, t_end, dt, newton, false)
}

/// As [`integrate`], also recording `(t, u)` after every step.
pub fn integrate_trajectory<S: OdeSystem + ?Sized>(
    tableau: &ButcherTableau,
    sys: &S,
    t0: f64,
    u0: &[f64],
    t_end: f64,
    dt: f64,
    newton: NewtonSettings,
) -> Result<Integration> {
    integrate_impl(tableau, sys, t0, u0, t_end, dt, newton, true)
}

/// Number of full steps and the optional shortened final step.
pub fn step_plan(t0: f64, t_end: f64, dt: f64) -> Result<(usize, Option<f64>)> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::InvalidArgument(format!("time step must be positive, got {dt}")));
    }
    if !(t_end >= t0) {
        return Err(Error::InvalidArgument(format!("t_end = {t_end} precedes t0 = {t0}")));
    }
    let ratio = (t_end - t0) / dt;
    let nearest = ratio.round();
    if (ratio - nearest).abs() <= 1e-9 * ratio.max(1.0) {
        return Ok((nearest as usize, None));
    }
    let full = ratio.floor() as usize;
    let rest = t_end - (t0 + full as f64 * dt);
    Ok((full, Some(rest)))
}

#[allow(clippy::too_many_arguments)]
fn integrate_impl<S: OdeSystem + ?Sized>(
    tableau: &ButcherTableau,
    sys: &S,
    t0: f64,
    u0: &[f64],
    t_end: f64,
    dt: f64,
    newton: NewtonSettings,
    record: bool,
) -> Result<Integration> {
    let (full, last) = step_plan(t0, t_end, dt)?;
    let mut stepper = DirkStepper::new(tableau, sys, newton)?;
    let mut u = u0.to_vec();
    let mut trajectory = record.then(|| vec![(t0, u.clone())]);
    let wrap = |step: usize, time: f64, e: Error| Error::Step {
        step,
        time,
        source: Box::new(e),
    };
    for k in 0..full {
        let tn = t0 + k as f64 * dt;
        u = stepper.step(tn, &u, dt).map_err(|e| wrap(k + 1, tn, e))?;
        if let Some(tr) = trajectory.as_mut() {
            tr.push((t0 + (k + 1) as f64 * dt, u.clone()));
        }
    }
    let mut steps = full;
    if let Some(h) = last {
        let tn = t0 + full as f64 * dt;
        u = stepper.step(tn, &u, h).map_err(|e| wrap(full + 1, tn, e))?;
        steps += 1;
        if let Some(tr) = trajectory.as_mut() {
            tr.push((t_end, u.clone()));
        }
    }
    Ok(Integration {
        state: u,
        t_final: t_end,
        steps,
        shortened_last_step: last,
        trajectory,
    })
}
