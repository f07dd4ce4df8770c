//! Scheme diagnostics: order conditions, stage order, weak stage order (both
//! the Krylov form and the eigenvector criterion), the stability function,
//! A- and L-stability, the stiff-limit stage residual `g^(j)`, the 2×2 upper
//! block residual and truncation-error norms.
//!
//! Elementwise powers use `0^0 = 1`, so EDIRK first rows are handled.

use std::fmt;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::tableau::ButcherTableau;

/// Default detection tolerance for orders. The published coefficients carry
/// 11–15 digits, so exact conditions hold to about 1e-10.
pub const DEFAULT_TOL: f64 = 1e-8;

/// Default highest `j` examined for (weak) stage order.
pub const DEFAULT_JMAX: u32 = 6;

/// Upper bound on `j` when searching for stage/quadrature order.
const ORDER_SCAN_LIMIT: u32 = 16;

/// `|R(iy)| <= 1 + A_STABILITY_SLACK` counts as bounded.
pub const A_STABILITY_SLACK: f64 = 1e-12;

/// Stage-order vector `τ^(j) = A c^(j-1) - c^j / j`.
#[derive(Debug, Clone, PartialEq)]
pub struct StageOrderVector {
    pub j: u32,
    pub tau: DVector<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StabilitySample {
    pub zeta: Complex64,
    pub r: Complex64,
}

fn powers(c: &DVector<f64>, k: u32) -> DVector<f64> {
    c.map(|x| x.powi(k as i32))
}

pub fn stage_order_vector(t: &ButcherTableau, j: u32) -> StageOrderVector {
    assert!(j >= 1, "stage order vectors start at j = 1");
    let c = t.c();
    let tau = t.a() * powers(c, j - 1) - powers(c, j) / f64::from(j);
    StageOrderVector { j, tau }
}

/// `b^T c^(j-1) - 1/j`.
pub fn quadrature_residual(t: &ButcherTableau, j: u32) -> f64 {
    t.b().dot(&powers(t.c(), j - 1)) - 1.0 / f64::from(j)
}

/// Largest `p̂` with all quadrature conditions up to `p̂` below `tol`.
pub fn quadrature_order(t: &ButcherTableau, tol: f64) -> u32 {
    (1..=ORDER_SCAN_LIMIT)
        .take_while(|&j| quadrature_residual(t, j).abs() < tol)
        .last()
        .unwrap_or(0)
}

/// Stage order `q = min(p̂, q̂)`.
pub fn stage_order(t: &ButcherTableau, tol: f64) -> u32 {
    let q_hat = (1..=ORDER_SCAN_LIMIT)
        .take_while(|&j| stage_order_vector(t, j).tau.amax() < tol)
        .last()
        .unwrap_or(0);
    q_hat.min(quadrature_order(t, tol))
}

/// `max_ℓ |b^T A^ℓ τ^(j)|` over `0 <= ℓ <= s-1`.
pub fn krylov_residual(t: &ButcherTableau, j: u32) -> f64 {
    let mut v = stage_order_vector(t, j).tau;
    let mut worst: f64 = 0.0;
    for _ in 0..t.stages() {
        worst = worst.max(t.b().dot(&v).abs());
        v = t.a() * v;
    }
    worst
}

/// Weak stage order from the condition `b^T A^ℓ τ^(j) = 0`, `0 <= ℓ <= s-1`.
/// Never less than the stage order.
pub fn wso(t: &ButcherTableau, jmax: u32, tol: f64) -> u32 {
    let krylov = (1..=jmax)
        .take_while(|&j| krylov_residual(t, j) < tol)
        .last()
        .unwrap_or(0);
    krylov.max(stage_order(t, tol).min(jmax))
}

/// Least-squares eigenvalue estimate for `τ` and the relative residual
/// `‖Aτ - μτ‖∞ / ‖τ‖∞`. Returns `None` when `τ` is (numerically) zero.
pub fn eigen_defect(t: &ButcherTableau, j: u32, tol: f64) -> Option<(f64, f64)> {
    let tau = stage_order_vector(t, j).tau;
    let norm = tau.amax();
    if norm <= tol {
        return None;
    }
    let atau = t.a() * &tau;
    let mu = tau.dot(&atau) / tau.dot(&tau);
    Some((mu, (atau - &tau * mu).amax() / norm))
}

/// Whether `τ^(j)` is an eigenvector of `A` (a zero vector qualifies).
pub fn eigenvector_relation_holds(t: &ButcherTableau, j: u32, tol: f64) -> bool {
    eigen_defect(t, j, tol).map_or(true, |(_, rel)| rel < tol)
}

/// Order of the eigenvector criterion: for each `j <= q̃_e`, `τ^(j)` is an
/// eigenvector of `A` and `b^T τ^(j) = 0`.
pub fn wso_eigenvector_order(t: &ButcherTableau, jmax: u32, tol: f64) -> u32 {
    (1..=jmax)
        .take_while(|&j| {
            eigenvector_relation_holds(t, j, tol)
                && t.b().dot(&stage_order_vector(t, j).tau).abs() < tol
        })
        .last()
        .unwrap_or(0)
}

/// Rooted trees through order 4 as `(label, order, exact value)`.
pub const TREES: [(&str, u32, f64); 8] = [
    ("b.e", 1, 1.0),
    ("b.c", 2, 1.0 / 2.0),
    ("b.c^2", 3, 1.0 / 3.0),
    ("b.Ac", 3, 1.0 / 6.0),
    ("b.c^3", 4, 1.0 / 4.0),
    ("b.(c*Ac)", 4, 1.0 / 8.0),
    ("b.Ac^2", 4, 1.0 / 12.0),
    ("b.A^2c", 4, 1.0 / 24.0),
];

fn tree_value(t: &ButcherTableau, index: usize) -> f64 {
    let (a, b, c) = (t.a(), t.b(), t.c());
    match index {
        0 => b.sum(),
        1 => b.dot(c),
        2 => b.dot(&powers(c, 2)),
        3 => b.dot(&(a * c)),
        4 => b.dot(&powers(c, 3)),
        5 => b.dot(&c.component_mul(&(a * c))),
        6 => b.dot(&(a * powers(c, 2))),
        7 => b.dot(&(a * (a * c))),
        _ => unreachable!(),
    }
}

/// Residuals of the rooted-tree order conditions of order `<= p` (`p <= 4`).
pub fn order_condition_residuals(t: &ButcherTableau, p: u32) -> Result<Vec<(&'static str, f64)>> {
    if p > 4 {
        return Err(Error::InvalidArgument(format!(
            "order conditions are available through order 4, requested {p}"
        )));
    }
    Ok(TREES
        .iter()
        .enumerate()
        .filter(|(_, (_, order, _))| *order <= p)
        .map(|(k, (label, _, exact))| (*label, tree_value(t, k) - exact))
        .collect())
}

/// Largest `p <= 4` whose order conditions all hold to `tol`.
pub fn classical_order(t: &ButcherTableau, tol: f64) -> u32 {
    (1..=4)
        .take_while(|&p| {
            TREES
                .iter()
                .enumerate()
                .filter(|(_, (_, order, _))| *order == p)
                .all(|(k, (_, _, exact))| (tree_value(t, k) - exact).abs() < tol)
        })
        .last()
        .unwrap_or(0)
}

/// Euclidean norm of the order-`p+1` residuals (`p <= 3`).
pub fn truncation_error_norm(t: &ButcherTableau, p: u32) -> Result<f64> {
    if p > 3 {
        return Err(Error::InvalidArgument(format!(
            "truncation error coefficients are available for p <= 3, requested {p}"
        )));
    }
    Ok(TREES
        .iter()
        .enumerate()
        .filter(|(_, (_, order, _))| *order == p + 1)
        .map(|(k, (_, _, exact))| (tree_value(t, k) - exact).powi(2))
        .sum::<f64>()
        .sqrt())
}

/// Solve `(I - ζA) x = rhs`.
pub fn solve_shifted(t: &ButcherTableau, zeta: Complex64, rhs: &[Complex64]) -> Result<Vec<Complex64>> {
    let s = t.stages();
    let a = t.a();
    let pole = || Error::Pole {
        zeta: format!("{zeta}"),
    };
    if t.is_dirk() {
        let mut x = vec![Complex64::new(0.0, 0.0); s];
        for i in 0..s {
            let mut acc = rhs[i];
            for j in 0..i {
                acc += zeta * a[(i, j)] * x[j];
            }
            let d = Complex64::new(1.0, 0.0) - zeta * a[(i, i)];
            if d.norm() <= 1e-14 * (1.0 + (zeta * a[(i, i)]).norm()) {
                return Err(pole());
            }
            x[i] = acc / d;
        }
        return Ok(x);
    }
    let m = DMatrix::from_fn(s, s, |i, j| {
        let id = if i == j { 1.0 } else { 0.0 };
        Complex64::new(id, 0.0) - zeta * a[(i, j)]
    });
    let scale = m.iter().fold(0.0f64, |acc, v| acc.max(v.norm()));
    let lu = m.lu();
    let u = lu.u();
    if (0..s).any(|i| u[(i, i)].norm() <= 1e-14 * scale) {
        return Err(pole());
    }
    lu.solve(&DVector::from_column_slice(rhs))
        .map(|v| v.as_slice().to_vec())
        .ok_or_else(pole)
}

fn complex(v: &DVector<f64>) -> Vec<Complex64> {
    v.iter().map(|x| Complex64::new(*x, 0.0)).collect()
}

fn b_dot(t: &ButcherTableau, x: &[Complex64]) -> Complex64 {
    t.b().iter().zip(x).map(|(b, x)| *b * x).sum()
}

/// `R(ζ) = 1 + ζ b^T (I - ζA)^{-1} e`.
pub fn stability_function(t: &ButcherTableau, zeta: Complex64) -> Result<Complex64> {
    let e = vec![Complex64::new(1.0, 0.0); t.stages()];
    let x = solve_shifted(t, zeta, &e)?;
    Ok(Complex64::new(1.0, 0.0) + zeta * b_dot(t, &x))
}

pub fn stability_sample(t: &ButcherTableau, zeta: Complex64) -> Result<StabilitySample> {
    Ok(StabilitySample {
        zeta,
        r: stability_function(t, zeta)?,
    })
}

/// `R(∞) = 1 - b^T A^{-1} e`; requires invertible `A`.
pub fn r_at_infinity(t: &ButcherTableau) -> Result<f64> {
    let s = t.stages();
    let scale = t.a().amax();
    let lu = t.a().clone().lu();
    for i in 0..s {
        let pivot = lu.u()[(i, i)];
        if !(pivot.abs() > 1e-14 * scale) {
            return Err(Error::Singular { index: i, pivot });
        }
    }
    let x = lu
        .solve(&DVector::from_element(s, 1.0))
        .ok_or(Error::Singular { index: 0, pivot: 0.0 })?;
    Ok(1.0 - t.b().dot(&x))
}

/// Sample points `y` on the imaginary axis for the A-stability check.
#[derive(Debug, Clone, PartialEq)]
pub struct ImagAxisSampling {
    pub count: usize,
    pub min_abs: f64,
    pub max_abs: f64,
    pub include_zero: bool,
}

impl Default for ImagAxisSampling {
    fn default() -> Self {
        Self {
            count: 4001,
            min_abs: 1e-4,
            max_abs: 1e8,
            include_zero: true,
        }
    }
}

impl ImagAxisSampling {
    /// Coarse sampling used inside the coefficient search.
    pub fn coarse() -> Self {
        Self {
            count: 128,
            ..Self::default()
        }
    }

    pub fn points(&self) -> Vec<f64> {
        let mut ys = Vec::with_capacity(2 * self.count + 1);
        if self.include_zero {
            ys.push(0.0);
        }
        let (lo, hi) = (self.min_abs.ln(), self.max_abs.ln());
        for k in 0..self.count {
            let frac = if self.count == 1 {
                0.0
            } else {
                k as f64 / (self.count - 1) as f64
            };
            let y = (lo + frac * (hi - lo)).exp();
            ys.push(y);
            ys.push(-y);
        }
        ys
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AStability {
    pub a_stable: bool,
    pub max_abs_r: f64,
    pub worst_y: f64,
}

/// Certify A-stability by sampling `|R(iy)|`. A pole on the axis counts as
/// unbounded.
pub fn is_a_stable(t: &ButcherTableau, sampling: &ImagAxisSampling) -> Result<AStability> {
    let ys = sampling.points();
    if ys.is_empty() {
        return Err(Error::InvalidArgument("empty imaginary-axis sampling".into()));
    }
    let mut worst = (f64::NEG_INFINITY, 0.0);
    for y in ys {
        let r = stability_function(t, Complex64::new(0.0, y))
            .map(|r| r.norm())
            .unwrap_or(f64::INFINITY);
        let r = if r.is_nan() { f64::INFINITY } else { r };
        if r > worst.0 {
            worst = (r, y);
        }
    }
    Ok(AStability {
        a_stable: worst.0 <= 1.0 + A_STABILITY_SLACK,
        max_abs_r: worst.0,
        worst_y: worst.1,
    })
}

/// Stiff-limit stage residual `g^(j)(ζ) = ζ b^T (I - ζA)^{-1} τ^(j)`.
pub fn g_residual(t: &ButcherTableau, j: u32, zeta: Complex64) -> Result<Complex64> {
    let tau = complex(&stage_order_vector(t, j).tau);
    let x = solve_shifted(t, zeta, &tau)?;
    Ok(zeta * b_dot(t, &x))
}

/// Rescaled coordinates `(a11/a21, a22/a21)` of the upper 2×2 block.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Wso2x2Point {
    pub x: f64,
    pub y: f64,
}

impl Wso2x2Point {
    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn from_block(a11: f64, a21: f64, a22: f64) -> Result<Self> {
        if a21 == 0.0 {
            return Err(Error::InvalidArgument("a21 must be nonzero to rescale".into()));
        }
        Ok(Self {
            x: a11 / a21,
            y: a22 / a21,
        })
    }

    /// `P1 = (-4 + 3√2, √2 - 1)`.
    pub fn p1() -> Self {
        let r = std::f64::consts::SQRT_2;
        Self::new(-4.0 + 3.0 * r, r - 1.0)
    }

    /// `P2 = (-(√2 + 1)(√2 + 2), -(√2 + 1))`.
    pub fn p2() -> Self {
        let r = std::f64::consts::SQRT_2;
        Self::new(-(r + 1.0) * (r + 2.0), -(r + 1.0))
    }
}

/// Second row of `A τ^(j) = a11 τ^(j)` for a DIRK upper 2×2 block.
/// Homogeneous of degree `j + 1` in `(a11, a21, a22)`.
pub fn wso2x2_residual_block(a11: f64, a21: f64, a22: f64, j: u32) -> f64 {
    let jf = f64::from(j);
    let ji = j as i32;
    let c2 = a21 + a22;
    (1.0 - 1.0 / jf) * a11.powi(ji) * a21
        + (a22 - a11) * (a11.powi(ji - 1) * a21 + c2.powi(ji - 1) * a22 - c2.powi(ji) / jf)
}

/// The 2×2 residual in rescaled coordinates (`a21 = 1`).
pub fn wso2x2_residual(p: Wso2x2Point, j: u32) -> f64 {
    assert!(j >= 2, "the 2x2 condition is defined for j >= 2");
    wso2x2_residual_block(p.x, 1.0, p.y, j)
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnalysisSettings {
    pub tol: f64,
    pub jmax: u32,
    pub sampling: ImagAxisSampling,
}

impl Default for AnalysisSettings {
    fn default() -> Self {
        Self {
            tol: DEFAULT_TOL,
            jmax: DEFAULT_JMAX,
            sampling: ImagAxisSampling::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SchemeReport {
    pub name: String,
    pub stages: usize,
    pub classical_order: u32,
    pub quadrature_order: u32,
    pub stage_order: u32,
    pub wso: u32,
    pub wso_eigenvector: u32,
    pub stiffly_accurate: bool,
    pub a_stable: bool,
    pub max_abs_r_imag: f64,
    /// `None` when `A` is singular (e.g. EDIRK schemes).
    pub r_at_infinity: Option<f64>,
    pub order_condition_residuals: Vec<(String, f64)>,
    pub stage_order_residual_norms: Vec<(u32, f64)>,
    pub wso_residuals: Vec<(u32, f64)>,
    pub truncation_error_norm: Option<f64>,
    pub tol: f64,
}

impl SchemeReport {
    pub fn l_stable(&self) -> bool {
        self.a_stable && self.r_at_infinity.is_some_and(|r| r.abs() < 1e-10)
    }

    /// `key = value` lines for machine consumption.
    pub fn to_key_value(&self) -> String {
        let mut out = vec![
            format!("name = {}", self.name),
            format!("stages = {}", self.stages),
            format!("classical_order = {}", self.classical_order),
            format!("quadrature_order = {}", self.quadrature_order),
            format!("stage_order = {}", self.stage_order),
            format!("wso = {}", self.wso),
            format!("wso_eigenvector = {}", self.wso_eigenvector),
            format!("stiffly_accurate = {}", self.stiffly_accurate),
            format!("a_stable = {}", self.a_stable),
            format!("l_stable = {}", self.l_stable()),
            format!("max_abs_r_imag = {:e}", self.max_abs_r_imag),
            match self.r_at_infinity {
                Some(r) => format!("r_at_infinity = {r:e}"),
                None => "r_at_infinity = nan".to_string(),
            },
            format!("tol = {:e}", self.tol),
        ];
        if let Some(n) = self.truncation_error_norm {
            out.push(format!("truncation_error_norm = {n:e}"));
        }
        for (label, r) in &self.order_condition_residuals {
            out.push(format!("order_residual[{label}] = {r:e}"));
        }
        for (j, r) in &self.stage_order_residual_norms {
            out.push(format!("tau_norm[{j}] = {r:e}"));
        }
        for (j, r) in &self.wso_residuals {
            out.push(format!("wso_residual[{j}] = {r:e}"));
        }
        out.join("\n") + "\n"
    }
}

impl fmt::Display for SchemeReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "scheme            {}", self.name)?;
        writeln!(f, "stages            {}", self.stages)?;
        writeln!(f, "classical order   {}", self.classical_order)?;
        writeln!(f, "quadrature order  {}", self.quadrature_order)?;
        writeln!(f, "stage order       {}", self.stage_order)?;
        writeln!(f, "WSO               {}", self.wso)?;
        writeln!(f, "WSO eigenvector   {}", self.wso_eigenvector)?;
        writeln!(f, "stiffly accurate  {}", self.stiffly_accurate)?;
        writeln!(
            f,
            "A-stable          {} (max |R(iy)| = {:.15})",
            self.a_stable, self.max_abs_r_imag
        )?;
        match self.r_at_infinity {
            Some(r) => writeln!(f, "R(inf)            {r:.3e}")?,
            None => writeln!(f, "R(inf)            n/a (singular A)")?,
        }
        writeln!(f, "L-stable          {}", self.l_stable())?;
        if let Some(n) = self.truncation_error_norm {
            writeln!(f, "trunc. err. norm  {n:.6e}")?;
        }
        writeln!(f, "order conditions (tol {:.0e}):", self.tol)?;
        for (label, r) in &self.order_condition_residuals {
            writeln!(f, "  {label:<10} {r:+.3e}")?;
        }
        writeln!(f, "stage order vectors |tau^(j)|_inf:")?;
        for (j, r) in &self.stage_order_residual_norms {
            writeln!(f, "  j = {j:<3}      {r:.3e}")?;
        }
        writeln!(f, "WSO residuals max_l |b^T A^l tau^(j)|:")?;
        for (j, r) in &self.wso_residuals {
            writeln!(f, "  j = {j:<3}      {r:.3e}")?;
        }
        Ok(())
    }
}

pub fn analyze(t: &ButcherTableau) -> Result<SchemeReport> {
    analyze_with(t, &AnalysisSettings::default())
}

pub fn analyze_with(t: &ButcherTableau, settings: &AnalysisSettings) -> Result<SchemeReport> {
    let tol = settings.tol;
    let p = classical_order(t, tol);
    let stability = is_a_stable(t, &settings.sampling)?;
    let r_inf = if t.is_invertible() {
        Some(r_at_infinity(t)?)
    } else {
        None
    };
    Ok(SchemeReport {
        name: t.name().to_string(),
        stages: t.stages(),
        classical_order: p,
        quadrature_order: quadrature_order(t, tol),
        stage_order: stage_order(t, tol),
        wso: wso(t, settings.jmax, tol),
        wso_eigenvector: wso_eigenvector_order(t, settings.jmax, tol),
        stiffly_accurate: t.is_stiffly_accurate(),
        a_stable: stability.a_stable,
        max_abs_r_imag: stability.max_abs_r,
        r_at_infinity: r_inf,
        order_condition_residuals: order_condition_residuals(t, 4)?
            .into_iter()
            .map(|(l, r)| (l.to_string(), r))
            .collect(),
        stage_order_residual_norms: (1..=settings.jmax)
            .map(|j| (j, stage_order_vector(t, j).tau.amax()))
            .collect(),
        wso_residuals: (1..=settings.jmax).map(|j| (j, krylov_residual(t, j))).collect(),
        truncation_error_norm: if p <= 3 { truncation_error_norm(t, p).ok() } else { None },
        tol,
    })
}
