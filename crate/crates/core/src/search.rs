//! Coefficient search for stiffly accurate DIRK schemes.
//!
//! Decision variables are the lower triangle of `A` including the diagonal,
//! row by row. `b` is the last row of `A` and `c` the row sums. Equality
//! constraints (order conditions through `p`, eigenvector criterion through
//! `qe`) and inequality constraints (diagonal bound, sampled `|R(iy)| <= 1`)
//! are aggregated into a quadratic penalty that is minimized by Nelder–Mead
//! from random starts, then polished with Levenberg–Marquardt on the
//! constraint residuals. A candidate is returned only if [`analyze_with`]
//! confirms the requested properties.

use argmin::core::{CostFunction, Executor};
use argmin::solver::neldermead::NelderMead;
use levenberg_marquardt::{LeastSquaresProblem, LevenbergMarquardt};
use nalgebra::{DMatrix, DVector, Dyn, Owned};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::analysis::{
    analyze_with, order_condition_residuals, stability_function, stage_order_vector,
    truncation_error_norm, AnalysisSettings, ImagAxisSampling, SchemeReport,
};
use crate::error::{Error, Result};
use crate::exec::{self, Execution};
use crate::tableau::ButcherTableau;

/// Largest attainable eigenvector-criterion order for DIRK schemes with
/// invertible `A`.
pub const MAX_QE: u32 = 3;

#[derive(Debug, Clone, PartialEq)]
pub struct SearchSpec {
    pub stages: usize,
    pub order: u32,
    pub qe: u32,
    pub multistarts: usize,
    pub seed: u64,
    /// Weight on squared equality residuals.
    pub equality_weight: f64,
    /// Weight on squared inequality violations.
    pub inequality_weight: f64,
    /// Lower bound `ε` on diagonal entries.
    pub diag_min: f64,
    /// Bounds for random starting points of every entry.
    pub coeff_bounds: (f64, f64),
    /// Nelder–Mead iterations per start.
    pub max_iters: u64,
    pub execution: Execution,
}

impl SearchSpec {
    pub fn new(stages: usize, order: u32, qe: u32, seed: u64) -> Self {
        Self {
            stages,
            order,
            qe,
            multistarts: 32,
            seed,
            equality_weight: 1e4,
            inequality_weight: 1e4,
            diag_min: 1e-3,
            coeff_bounds: (-1.0, 1.5),
            max_iters: 4000,
            execution: Execution::Parallel,
        }
    }

    pub fn parameter_count(&self) -> usize {
        self.stages * (self.stages + 1) / 2
    }

    pub fn validate(&self) -> Result<()> {
        if self.qe > MAX_QE {
            return Err(Error::InvalidSearch(format!(
                "qe = {} is unattainable: DIRK schemes with invertible A satisfy the eigenvector criterion only up to order {MAX_QE}",
                self.qe
            )));
        }
        if self.stages == 0 {
            return Err(Error::InvalidSearch("stages must be at least 1".into()));
        }
        if !(1..=4).contains(&self.order) {
            return Err(Error::InvalidSearch(format!(
                "order must be between 1 and 4, got {}",
                self.order
            )));
        }
        if self.multistarts == 0 {
            return Err(Error::InvalidSearch("multistarts must be positive".into()));
        }
        let (lo, hi) = self.coeff_bounds;
        if !(lo < hi) || !(self.diag_min > 0.0) || hi <= self.diag_min {
            return Err(Error::InvalidSearch("inconsistent coefficient bounds".into()));
        }
        if !(self.equality_weight > 0.0) || !(self.inequality_weight > 0.0) {
            return Err(Error::InvalidSearch("penalty weights must be positive".into()));
        }
        Ok(())
    }
}

/// Parameter vector of a DIRK tableau (lower triangle of `A`, row by row).
pub fn params_from_tableau(t: &ButcherTableau) -> Result<Vec<f64>> {
    if !t.is_dirk() {
        return Err(Error::InvalidTableau(format!("{} is not diagonally implicit", t.name())));
    }
    let s = t.stages();
    Ok((0..s).flat_map(|i| (0..=i).map(move |j| (i, j))).map(|(i, j)| t.a()[(i, j)]).collect())
}

/// Stiffly accurate DIRK tableau from a parameter vector.
pub fn tableau_from_params(x: &[f64], stages: usize, name: &str) -> Result<ButcherTableau> {
    if x.len() != stages * (stages + 1) / 2 {
        return Err(Error::Dimension(format!(
            "{} parameters do not describe a {stages}-stage DIRK",
            x.len()
        )));
    }
    let mut a = DMatrix::zeros(stages, stages);
    let mut k = 0;
    for i in 0..stages {
        for j in 0..=i {
            a[(i, j)] = x[k];
            k += 1;
        }
    }
    let b = a.row(stages - 1).transpose();
    ButcherTableau::new(a, b, name)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintResiduals {
    pub equality: Vec<(String, f64)>,
    /// Nonnegative violations; zero when satisfied.
    pub inequality: Vec<(String, f64)>,
}

impl ConstraintResiduals {
    pub fn max_equality(&self) -> f64 {
        self.equality.iter().fold(0.0, |m, (_, r)| m.max(r.abs()))
    }

    pub fn max_inequality(&self) -> f64 {
        self.inequality.iter().fold(0.0, |m, (_, r)| m.max(*r))
    }
}

fn equality_residuals(t: &ButcherTableau, spec: &SearchSpec, out: &mut Vec<(String, f64)>) -> Result<()> {
    for (label, r) in order_condition_residuals(t, spec.order)? {
        out.push((format!("order[{label}]"), r));
    }
    // For j >= 2 the first component of τ^(j) is a11^j (1 - 1/j) != 0, so
    // the only admissible eigenvalue is a11.
    let a11 = t.a()[(0, 0)];
    for j in 1..=spec.qe {
        let tau = stage_order_vector(t, j).tau;
        let defect = t.a() * &tau - &tau * a11;
        for i in 1..t.stages() {
            out.push((format!("eig[j={j},i={}]", i + 1), defect[i]));
        }
        out.push((format!("eig_b[j={j}]"), t.b().dot(&tau)));
    }
    Ok(())
}

fn stability_violation(t: &ButcherTableau, ys: &[f64]) -> f64 {
    ys.iter()
        .map(|&y| match stability_function(t, Complex64::new(0.0, y)) {
            Ok(r) if r.norm().is_finite() => (r.norm() - 1.0).max(0.0),
            _ => 1e3,
        })
        .fold(0.0, f64::max)
}

/// Named constraint residuals at `x`.
pub fn constraint_residuals(x: &[f64], spec: &SearchSpec) -> Result<ConstraintResiduals> {
    let t = tableau_from_params(x, spec.stages, "candidate")?;
    let mut equality = vec![];
    equality_residuals(&t, spec, &mut equality)?;
    let mut inequality: Vec<(String, f64)> = (0..spec.stages)
        .map(|i| (format!("diag[{}]", i + 1), (spec.diag_min - t.a()[(i, i)]).max(0.0)))
        .collect();
    inequality.push((
        "a_stability".into(),
        stability_violation(&t, &ImagAxisSampling::coarse().points()),
    ));
    Ok(ConstraintResiduals { equality, inequality })
}

fn objective(t: &ButcherTableau, spec: &SearchSpec) -> f64 {
    if spec.order >= 4 {
        0.0
    } else {
        truncation_error_norm(t, spec.order).unwrap_or(f64::INFINITY)
    }
}

struct Penalty<'a> {
    spec: &'a SearchSpec,
    ys: Vec<f64>,
}

impl Penalty<'_> {
    fn value(&self, x: &[f64]) -> f64 {
        let Ok(t) = tableau_from_params(x, self.spec.stages, "candidate") else {
            return f64::INFINITY;
        };
        let mut eq = vec![];
        if equality_residuals(&t, self.spec, &mut eq).is_err() {
            return f64::INFINITY;
        }
        let eq: f64 = eq.iter().map(|(_, r)| r * r).sum();
        let diag: f64 = (0..self.spec.stages)
            .map(|i| (self.spec.diag_min - t.a()[(i, i)]).max(0.0).powi(2))
            .sum();
        let stab = stability_violation(&t, &self.ys).powi(2);
        let v = objective(&t, self.spec)
            + self.spec.equality_weight * eq
            + self.spec.inequality_weight * (diag + stab);
        if v.is_finite() {
            v
        } else {
            f64::INFINITY
        }
    }
}

impl CostFunction for Penalty<'_> {
    type Param = Vec<f64>;
    type Output = f64;

    fn cost(&self, x: &Self::Param) -> std::result::Result<f64, argmin::core::Error> {
        Ok(self.value(x))
    }
}

/// Least-squares view of the equality residuals and diagonal violations.
struct Polish<'a> {
    spec: &'a SearchSpec,
    x: DVector<f64>,
}

impl Polish<'_> {
    fn residual_vec(&self, x: &[f64]) -> Option<DVector<f64>> {
        let t = tableau_from_params(x, self.spec.stages, "candidate").ok()?;
        let mut eq = vec![];
        equality_residuals(&t, self.spec, &mut eq).ok()?;
        let mut r: Vec<f64> = eq.into_iter().map(|(_, v)| v).collect();
        r.extend((0..self.spec.stages).map(|i| (self.spec.diag_min - t.a()[(i, i)]).max(0.0)));
        r.iter().all(|v| v.is_finite()).then(|| DVector::from_vec(r))
    }
}

impl LeastSquaresProblem<f64, Dyn, Dyn> for Polish<'_> {
    type ResidualStorage = Owned<f64, Dyn>;
    type JacobianStorage = Owned<f64, Dyn, Dyn>;
    type ParameterStorage = Owned<f64, Dyn>;

    fn set_params(&mut self, x: &DVector<f64>) {
        self.x.copy_from(x);
    }

    fn params(&self) -> DVector<f64> {
        self.x.clone()
    }

    fn residuals(&self) -> Option<DVector<f64>> {
        self.residual_vec(self.x.as_slice())
    }

    fn jacobian(&self) -> Option<DMatrix<f64>> {
        let base = self.x.as_slice().to_vec();
        let r0 = self.residual_vec(&base)?;
        let mut jac = DMatrix::zeros(r0.len(), base.len());
        for k in 0..base.len() {
            let h = 1e-7 * base[k].abs().max(1.0);
            let mut xp = base.clone();
            let mut xm = base.clone();
            xp[k] += h;
            xm[k] -= h;
            let d = (self.residual_vec(&xp)? - self.residual_vec(&xm)?) / (2.0 * h);
            jac.set_column(k, &d);
        }
        Some(jac)
    }
}

/// Outcome of one multistart.
#[derive(Debug, Clone, PartialEq)]
pub struct StartResult {
    pub start: usize,
    pub params: Vec<f64>,
    pub objective: f64,
    pub max_equality: f64,
    pub max_inequality: f64,
    pub verified: bool,
}

#[derive(Debug, Clone)]
pub struct SearchResult {
    pub tableau: ButcherTableau,
    pub report: SchemeReport,
    pub objective: f64,
    pub start: usize,
    pub starts: Vec<StartResult>,
}

fn start_rng(seed: u64, start: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(start as u64);
    rng
}

fn initial_point(spec: &SearchSpec, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let (lo, hi) = spec.coeff_bounds;
    (0..spec.stages)
        .flat_map(|i| (0..=i).map(move |j| i == j))
        .map(|diag| {
            if diag {
                rng.gen_range(spec.diag_min.max(0.05)..hi.min(1.0).max(0.1))
            } else {
                rng.gen_range(lo..hi)
            }
        })
        .collect()
}

fn nelder_mead(spec: &SearchSpec, x0: Vec<f64>) -> Vec<f64> {
    let n = x0.len();
    let mut simplex = vec![x0.clone()];
    for k in 0..n {
        let mut v = x0.clone();
        v[k] += 0.1;
        simplex.push(v);
    }
    let cost = Penalty {
        spec,
        ys: ImagAxisSampling::coarse().points(),
    };
    let Ok(solver) = NelderMead::new(simplex).with_sd_tolerance(1e-14) else {
        return x0;
    };
    match Executor::new(cost, solver)
        .configure(|state| state.max_iters(spec.max_iters))
        .run()
    {
        Ok(res) => res.state().best_param.clone().unwrap_or(x0),
        Err(_) => x0,
    }
}

fn polish(spec: &SearchSpec, x: Vec<f64>) -> Vec<f64> {
    let problem = Polish {
        spec,
        x: DVector::from_vec(x.clone()),
    };
    let (problem, _report) = LevenbergMarquardt::new()
        .with_ftol(1e-15)
        .with_xtol(1e-15)
        .with_gtol(1e-15)
        .minimize(problem);
    let polished = problem.x.as_slice().to_vec();
    if polished.iter().all(|v| v.is_finite()) {
        polished
    } else {
        x
    }
}

fn verification_settings() -> AnalysisSettings {
    AnalysisSettings::default()
}

/// Independent check of a candidate against the requested properties.
pub fn verify(t: &ButcherTableau, spec: &SearchSpec) -> Result<SchemeReport> {
    let report = analyze_with(t, &verification_settings())?;
    let positive_diag = (0..t.stages()).all(|i| t.a()[(i, i)] >= spec.diag_min * (1.0 - 1e-12));
    let ok = report.classical_order >= spec.order
        && report.wso_eigenvector >= spec.qe
        && report.stiffly_accurate
        && report.a_stable
        && report.l_stable()
        && positive_diag;
    if ok {
        Ok(report)
    } else {
        Err(Error::SearchFailed(format!(
            "candidate has p = {}, qe = {}, A-stable = {}, L-stable = {}, diagonal >= eps = {}",
            report.classical_order,
            report.wso_eigenvector,
            report.a_stable,
            report.l_stable(),
            positive_diag
        )))
    }
}

fn run_start(spec: &SearchSpec, start: usize) -> StartResult {
    let mut rng = start_rng(spec.seed, start);
    let x0 = initial_point(spec, &mut rng);
    let x = polish(spec, nelder_mead(spec, x0));
    let (max_equality, max_inequality) = match constraint_residuals(&x, spec) {
        Ok(r) => (r.max_equality(), r.max_inequality()),
        Err(_) => (f64::INFINITY, f64::INFINITY),
    };
    let (objective, verified) = match tableau_from_params(&x, spec.stages, "candidate") {
        Ok(t) => (objective(&t, spec), verify(&t, spec).is_ok()),
        Err(_) => (f64::INFINITY, false),
    };
    StartResult {
        start,
        params: x,
        objective,
        max_equality,
        max_inequality,
        verified,
    }
}

/// Multistart search. Returns the verified candidate with the lowest
/// objective (ties go to the lower start index), or
/// [`Error::SearchFailed`] with the best residuals seen.
pub fn search(spec: &SearchSpec) -> Result<SearchResult> {
    spec.validate()?;
    let starts = exec::map_range(spec.execution, spec.multistarts, |k| run_start(spec, k));
    let best = starts
        .iter()
        .filter(|r| r.verified)
        .min_by(|a, b| a.objective.total_cmp(&b.objective).then(a.start.cmp(&b.start)));
    match best {
        Some(best) => {
            let name = format!("search-s{}-p{}-qe{}-seed{}", spec.stages, spec.order, spec.qe, spec.seed);
            let tableau = tableau_from_params(&best.params, spec.stages, &name)?
                .with_claims(Some(spec.order), Some(spec.qe))
                .with_provenance(format!(
                    "coefficient search, start {} of {}, objective {:e}",
                    best.start, spec.multistarts, best.objective
                ));
            let report = verify(&tableau, spec)?;
            Ok(SearchResult {
                tableau,
                report,
                objective: best.objective,
                start: best.start,
                starts: starts.clone(),
            })
        }
        None => {
            let closest = starts
                .iter()
                .min_by(|a, b| {
                    (a.max_equality + a.max_inequality).total_cmp(&(b.max_equality + b.max_inequality))
                })
                .expect("at least one start");
            Err(Error::SearchFailed(format!(
                "no verified scheme in {} starts; best start {} has max equality residual {:.3e} and max inequality violation {:.3e}",
                spec.multistarts, closest.start, closest.max_equality, closest.max_inequality
            )))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tableau::registry_get;

    #[test]
    fn params_round_trip() {
        let t = registry_get("wso3-p3").unwrap();
        let x = params_from_tableau(&t).unwrap();
        assert_eq!(x.len(), 10);
        let back = tableau_from_params(&x, 4, "x").unwrap();
        assert_eq!(back.a(), t.a());
        assert_eq!(back.b(), t.b());
    }

    #[test]
    fn rejects_qe_above_three() {
        let err = SearchSpec::new(4, 3, 4, 1).validate().unwrap_err();
        assert!(err.to_string().contains("invertible A"));
    }

    #[test]
    fn backward_euler_is_feasible() {
        let spec = SearchSpec::new(1, 1, 1, 0);
        let r = constraint_residuals(&[1.0], &spec).unwrap();
        assert!(r.max_equality() < 1e-15);
        assert_eq!(r.max_inequality(), 0.0);
    }

    #[test]
    fn streams_differ_per_start() {
        let spec = SearchSpec::new(3, 2, 1, 7);
        let a = initial_point(&spec, &mut start_rng(7, 0));
        let b = initial_point(&spec, &mut start_rng(7, 1));
        assert_ne!(a, b);
        assert_eq!(a, initial_point(&spec, &mut start_rng(7, 0)));
    }
}
