//! Δt sweeps over (scheme, problem) pairs, log–log slope fits and CSV output.
//!
//! Rows are independent integrations and run concurrently under
//! [`Execution::Parallel`]; the table is always ordered by decreasing Δt.

use std::fmt;
use std::io::Write;
use std::path::PathBuf;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::exec::{self, Execution};
use crate::integrator::{integrate, NewtonSettings, Observable, OdeSystem};
use crate::problems::{
    burgers_mol, prothero_robinson, schrodinger_mol, van_der_pol, Boundary, Burgers, GridSpec, LinearDecay,
    Schrodinger, VanDerPol, VdpReference, VdpReferenceParams,
};
use crate::tableau::text::fmt_f64;
use crate::tableau::ButcherTableau;

#[derive(Debug, Clone, PartialEq)]
pub enum ProblemSpec {
    ProtheroRobinson { lambda: f64 },
    LinearDecay { lambda: f64 },
    Schrodinger { omega: f64, k: f64, cells: usize },
    Burgers { nu: f64, cells: usize },
    VanDerPol {
        mu: f64,
        reference: VdpReferenceParams,
        cache: Option<PathBuf>,
    },
}

impl ProblemSpec {
    pub fn prothero_robinson(lambda: f64) -> Self {
        ProblemSpec::ProtheroRobinson { lambda }
    }

    pub fn schrodinger_default() -> Self {
        ProblemSpec::Schrodinger {
            omega: Schrodinger::DEFAULT_OMEGA,
            k: Schrodinger::DEFAULT_K,
            cells: Schrodinger::DEFAULT_CELLS,
        }
    }

    pub fn burgers_default() -> Self {
        ProblemSpec::Burgers {
            nu: Burgers::DEFAULT_NU,
            cells: Burgers::DEFAULT_CELLS,
        }
    }

    pub fn van_der_pol_default() -> Self {
        ProblemSpec::VanDerPol {
            mu: VanDerPol::DEFAULT_MU,
            reference: VdpReferenceParams::default(),
            cache: None,
        }
    }

    pub fn key(&self) -> &'static str {
        match self {
            ProblemSpec::ProtheroRobinson { .. } => "pr",
            ProblemSpec::LinearDecay { .. } => "decay",
            ProblemSpec::Schrodinger { .. } => "schrodinger",
            ProblemSpec::Burgers { .. } => "burgers",
            ProblemSpec::VanDerPol { .. } => "vdp",
        }
    }

    pub fn t_end(&self) -> f64 {
        match self {
            ProblemSpec::ProtheroRobinson { .. } => 10.0,
            ProblemSpec::LinearDecay { .. } => 1.0,
            ProblemSpec::Schrodinger { .. } => Schrodinger::T_END,
            ProblemSpec::Burgers { .. } => Burgers::T_END,
            ProblemSpec::VanDerPol { reference, .. } => reference.t_end,
        }
    }

    pub fn build(&self) -> Result<Arc<dyn OdeSystem>> {
        Ok(match self {
            ProblemSpec::ProtheroRobinson { lambda } => Arc::new(prothero_robinson(*lambda)?),
            ProblemSpec::LinearDecay { lambda } => Arc::new(LinearDecay { lambda: *lambda }),
            ProblemSpec::Schrodinger { omega, k, cells } => Arc::new(schrodinger_mol(
                *omega,
                *k,
                GridSpec::new(*cells, Boundary::Dirichlet)?,
            )?),
            ProblemSpec::Burgers { nu, cells } => {
                Arc::new(burgers_mol(*nu, GridSpec::new(*cells, Boundary::Neumann)?)?)
            }
            ProblemSpec::VanDerPol { mu, reference, cache } => {
                let params = VdpReferenceParams { mu: *mu, ..*reference };
                let path = cache.clone().unwrap_or_else(|| VdpReference::default_cache_path(&params));
                let reference = VdpReference::load_or_generate(&path, params)?;
                Arc::new(van_der_pol(*mu)?.with_reference(Arc::new(reference)))
            }
        })
    }

    /// Default Δt sequence; every value divides the time interval exactly.
    pub fn default_dt_list(&self) -> Vec<f64> {
        let t_end = self.t_end();
        match self {
            ProblemSpec::ProtheroRobinson { .. } => log_spaced_divisors(t_end, 1e-5, 1.0, 24),
            ProblemSpec::LinearDecay { .. } => (1..=8).map(|k| t_end / f64::from(1 << k)).collect(),
            ProblemSpec::Schrodinger { .. } | ProblemSpec::Burgers { .. } => half_octave_divisors(t_end, 16, 16384),
            ProblemSpec::VanDerPol { .. } => log_spaced_divisors(t_end, 1e-4, 1e-1, 16),
        }
    }

    /// Default slope windows.
    pub fn default_windows(&self) -> Vec<SlopeWindow> {
        match self {
            ProblemSpec::ProtheroRobinson { .. } => vec![
                SlopeWindow::new("stiff", 1e-3, 1e-1),
                SlopeWindow::new("nonstiff", 3e-5, 3e-4),
            ],
            ProblemSpec::LinearDecay { .. } => vec![SlopeWindow::new("all", 0.0, f64::INFINITY)],
            ProblemSpec::Schrodinger { .. } => vec![SlopeWindow::new("stiff", 1.2 / 16384.0, 1.2 / 64.0)],
            ProblemSpec::Burgers { .. } => vec![SlopeWindow::new("stiff", 1.0 / 8192.0, 1.0 / 128.0)],
            ProblemSpec::VanDerPol { .. } => vec![SlopeWindow::new("stiff-mid", 3e-3, 3e-2)],
        }
    }

    pub fn default_observables(&self) -> Vec<Observable> {
        match self {
            ProblemSpec::Schrodinger { .. } | ProblemSpec::Burgers { .. } => {
                vec![Observable::U, Observable::Ux, Observable::Uxx]
            }
            _ => vec![Observable::U],
        }
    }
}

/// `T/n` for `n = n_min·2^(k/2)` (rounded) up to `n_max`.
pub fn half_octave_divisors(t_end: f64, n_min: u32, n_max: u32) -> Vec<f64> {
    let mut out = vec![];
    let mut k = 0;
    loop {
        let n = (f64::from(n_min) * 2f64.powf(f64::from(k) / 2.0)).round();
        if n > f64::from(n_max) {
            break out;
        }
        out.push(t_end / n);
        k += 1;
    }
}

/// `count` log-spaced step sizes in `[lo, hi]`, each adjusted to `T/n` for
/// integer `n`. Duplicates are dropped.
pub fn log_spaced_divisors(t_end: f64, lo: f64, hi: f64, count: usize) -> Vec<f64> {
    let mut out: Vec<f64> = Vec::with_capacity(count);
    for k in 0..count {
        let frac = if count == 1 { 0.0 } else { k as f64 / (count - 1) as f64 };
        let target = (hi.ln() + frac * (lo.ln() - hi.ln())).exp();
        let n = (t_end / target).round().max(1.0);
        let dt = t_end / n;
        if out.last() != Some(&dt) {
            out.push(dt);
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct SlopeWindow {
    pub name: String,
    pub dt_lo: f64,
    pub dt_hi: f64,
}

impl SlopeWindow {
    pub fn new(name: impl Into<String>, dt_lo: f64, dt_hi: f64) -> Self {
        Self {
            name: name.into(),
            dt_lo,
            dt_hi,
        }
    }

    pub fn contains(&self, dt: f64) -> bool {
        let slack = 1e-9;
        dt >= self.dt_lo * (1.0 - slack) && dt <= self.dt_hi * (1.0 + slack)
    }
}

impl fmt::Display for SlopeWindow {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} = [{:e}, {:e}]", self.name, self.dt_lo, self.dt_hi)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    /// Root-mean-square residual of the log–log fit.
    pub residual: f64,
    pub points: usize,
}

/// Least-squares slope of `ln err` against `ln dt` over the rows inside
/// `window`. Rows without an error value (failed integrations) and
/// nonpositive errors are skipped.
pub fn fit_slope(rows: &[(f64, Option<f64>)], window: &SlopeWindow) -> Result<SlopeFit> {
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .filter(|(dt, _)| window.contains(*dt))
        .filter_map(|(dt, e)| e.filter(|e| e.is_finite() && *e > 0.0).map(|e| (dt.ln(), e.ln())))
        .collect();
    if pts.len() < 3 {
        return Err(Error::UnderfilledWindow { found: pts.len() });
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        return Err(Error::UnderfilledWindow { found: 1 });
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residual = (pts
        .iter()
        .map(|p| (p.1 - intercept - slope * p.0).powi(2))
        .sum::<f64>()
        / n)
        .sqrt();
    Ok(SlopeFit {
        slope,
        intercept,
        residual,
        points: pts.len(),
    })
}

#[derive(Debug, Clone)]
pub struct StudySpec {
    pub tableau: ButcherTableau,
    pub problem: ProblemSpec,
    pub dt_list: Vec<f64>,
    pub observables: Vec<Observable>,
    pub windows: Vec<SlopeWindow>,
    pub newton: NewtonSettings,
    pub execution: Execution,
    /// Once a column has stagnated, rows whose error is within this factor of
    /// its smallest error are left out of slope fits; `0` disables the filter.
    pub floor_factor: f64,
}

const PLATEAU_SPAN: f64 = 4.0;
const PLATEAU_SLOPE: f64 = 0.7;

/// Default [`StudySpec::floor_factor`].
pub const DEFAULT_FLOOR_FACTOR: f64 = 20.0;

impl StudySpec {
    /// Study with the problem's default Δt list, observables and windows.
    pub fn new(tableau: ButcherTableau, problem: ProblemSpec) -> Self {
        Self {
            dt_list: problem.default_dt_list(),
            observables: problem.default_observables(),
            windows: problem.default_windows(),
            tableau,
            problem,
            newton: NewtonSettings::default(),
            execution: Execution::Parallel,
            floor_factor: DEFAULT_FLOOR_FACTOR,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.dt_list.iter().any(|dt| !(*dt > 0.0) || !dt.is_finite()) {
            return Err(Error::InvalidArgument("every dt must be positive and finite".into()));
        }
        if !(self.floor_factor >= 0.0) || !self.floor_factor.is_finite() {
            return Err(Error::InvalidArgument("floor_factor must be finite and nonnegative".into()));
        }
        if self.observables.is_empty() {
            return Err(Error::InvalidArgument("at least one observable is required".into()));
        }
        self.newton.validate()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudyRow {
    pub dt: f64,
    pub steps: usize,
    /// Error per observable, or the failure message.
    pub errors: std::result::Result<Vec<f64>, String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WindowFit {
    pub window: SlopeWindow,
    pub observable: Observable,
    pub fit: Option<SlopeFit>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceTable {
    pub scheme: String,
    pub problem: String,
    pub parameters: Vec<(String, String)>,
    pub observables: Vec<Observable>,
    pub rows: Vec<StudyRow>,
    pub fits: Vec<WindowFit>,
    pub floor_factor: f64,
}

impl ConvergenceTable {
    pub fn new(scheme: impl Into<String>, problem: impl Into<String>, observables: Vec<Observable>) -> Self {
        Self {
            scheme: scheme.into(),
            problem: problem.into(),
            parameters: vec![],
            observables,
            rows: vec![],
            fits: vec![],
            floor_factor: 0.0,
        }
    }

    pub fn slope(&self, window: &str, obs: Observable) -> Option<f64> {
        self.fits
            .iter()
            .find(|f| f.window.name == window && f.observable == obs)
            .and_then(|f| f.fit.map(|s| s.slope))
    }

    /// `(dt, error)` pairs for one observable.
    pub fn series(&self, obs: Observable) -> Vec<(f64, Option<f64>)> {
        let col = self.observables.iter().position(|o| *o == obs);
        self.rows
            .iter()
            .map(|r| (r.dt, col.and_then(|c| r.errors.as_ref().ok().map(|e| e[c]))))
            .collect()
    }

    /// `series` with rows at the error floor blanked out. The filter only
    /// acts once the column has stagnated: over a factor `PLATEAU_SPAN` in
    /// dt ending at the smallest step, the error fell by less than
    /// `PLATEAU_SPAN^PLATEAU_SLOPE`.
    pub fn fit_series(&self, obs: Observable) -> Vec<(f64, Option<f64>)> {
        let series = self.series(obs);
        if self.floor_factor <= 0.0 {
            return series;
        }
        let mut valid: Vec<(f64, f64)> = series
            .iter()
            .filter_map(|(dt, e)| e.map(|e| (*dt, e)))
            .filter(|(_, e)| e.is_finite())
            .collect();
        valid.sort_by(|a, b| a.0.total_cmp(&b.0));
        let Some(&(dt0, e0)) = valid.first() else {
            return series;
        };
        let Some(&(dt1, e1)) = valid.iter().find(|(dt, _)| *dt >= PLATEAU_SPAN * dt0 * (1.0 - 1e-9)) else {
            return series;
        };
        let stagnant = e0 <= 0.0 || (e1 / e0).ln() < PLATEAU_SLOPE * (dt1 / dt0).ln();
        if !stagnant {
            return series;
        }
        let floor = valid
            .iter()
            .map(|(_, e)| *e)
            .filter(|e| *e > 0.0)
            .fold(f64::INFINITY, f64::min);
        let cut = self.floor_factor * floor;
        series
            .into_iter()
            .map(|(dt, e)| (dt, e.filter(|e| !(*e <= cut))))
            .collect()
    }

    /// Refit every window/observable pair from the current rows.
    pub fn refit(&mut self, windows: &[SlopeWindow]) {
        self.fits = windows
            .iter()
            .flat_map(|w| self.observables.iter().map(move |o| (w, *o)))
            .map(|(w, o)| WindowFit {
                window: w.clone(),
                observable: o,
                fit: fit_slope(&self.fit_series(o), w).ok(),
            })
            .collect();
    }
}

fn run_row(spec: &StudySpec, sys: &dyn OdeSystem, reference: &[f64], dt: f64) -> StudyRow {
    let t_end = spec.problem.t_end();
    let u0 = sys.initial_state(0.0);
    match integrate(&spec.tableau, sys, 0.0, &u0, t_end, dt, spec.newton) {
        Ok(run) => {
            let errors: std::result::Result<Vec<f64>, String> = spec
                .observables
                .iter()
                .map(|o| {
                    sys.observable_error(*o, t_end, &run.state, reference)
                        .ok_or_else(|| format!("observable {} not available", o.label()))
                })
                .collect();
            StudyRow {
                dt,
                steps: run.steps,
                errors,
            }
        }
        Err(e) => StudyRow {
            dt,
            steps: 0,
            errors: Err(e.to_string()),
        },
    }
}

pub fn run_study(spec: &StudySpec) -> Result<ConvergenceTable> {
    spec.validate()?;
    let sys = spec.problem.build()?;
    let t_end = spec.problem.t_end();
    let reference = sys
        .exact(t_end)
        .ok_or_else(|| Error::InvalidArgument(format!("no reference solution for {}", sys.describe())))?;
    let mut dts = spec.dt_list.clone();
    dts.sort_by(|a, b| b.partial_cmp(a).expect("finite dt"));
    let rows = exec::map(spec.execution, &dts, |dt| run_row(spec, sys.as_ref(), &reference, *dt));
    if !rows.is_empty() && rows.iter().all(|r| r.errors.is_err()) {
        let first = rows[0].errors.clone().err().unwrap_or_default();
        return Err(Error::StudyFailed(first));
    }
    let mut table = ConvergenceTable::new(spec.tableau.name(), sys.describe(), spec.observables.clone());
    table.parameters = vec![
        ("t_end".into(), format!("{t_end}")),
        (
            "newton".into(),
            format!(
                "rel_tol={:e} abs_tol={:e} max_iters={}",
                spec.newton.rel_tol, spec.newton.abs_tol, spec.newton.max_iters
            ),
        ),
        ("error_norm".into(), "max over space at t_end".into()),
        ("floor_factor".into(), format!("{}", spec.floor_factor)),
    ];
    for w in &spec.windows {
        table.parameters.push(("window".into(), w.to_string()));
    }
    table.rows = rows;
    table.floor_factor = spec.floor_factor;
    table.refit(&spec.windows);
    Ok(table)
}

pub fn emit_csv<W: Write>(table: &ConvergenceTable, mut out: W) -> Result<()> {
    writeln!(out, "# scheme = {}", table.scheme)?;
    writeln!(out, "# problem = {}", table.problem)?;
    for (k, v) in &table.parameters {
        writeln!(out, "# {k} = {v}")?;
    }
    for f in &table.fits {
        match f.fit {
            Some(s) => writeln!(
                out,
                "# slope {} {} = {:.4} (residual {:.2e}, points {})",
                f.window.name,
                f.observable.label(),
                s.slope,
                s.residual,
                s.points
            )?,
            None => writeln!(out, "# slope {} {} = none (window underfilled)", f.window.name, f.observable.label())?,
        }
    }
    for r in &table.rows {
        if let Err(msg) = &r.errors {
            writeln!(out, "# failed dt = {}: {}", fmt_f64(r.dt), msg.replace('\n', " "))?;
        }
    }
    let mut header = vec!["dt".to_string()];
    header.extend(table.observables.iter().map(|o| format!("err_{}", o.label())));
    writeln!(out, "{}", header.join(","))?;
    for r in &table.rows {
        let mut cells = vec![fmt_f64(r.dt)];
        match &r.errors {
            Ok(e) => cells.extend(e.iter().map(|v| fmt_f64(*v))),
            Err(_) => cells.extend(table.observables.iter().map(|_| "nan".to_string())),
        }
        writeln!(out, "{}", cells.join(","))?;
    }
    Ok(())
}

/// Parsed form of an emitted CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct ParsedCsv {
    pub comments: Vec<String>,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

pub fn parse_csv(text: &str) -> Result<ParsedCsv> {
    let mut comments = vec![];
    let mut columns: Option<Vec<String>> = None;
    let mut rows = vec![];
    for (idx, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(c) = line.strip_prefix('#') {
            comments.push(c.trim().to_string());
            continue;
        }
        match &columns {
            None => columns = Some(line.split(',').map(|s| s.trim().to_string()).collect()),
            Some(cols) => {
                let vals: std::result::Result<Vec<f64>, _> = line.split(',').map(|s| s.trim().parse::<f64>()).collect();
                let vals = vals.map_err(|_| Error::Parse {
                    line: idx + 1,
                    message: format!("non-numeric CSV row `{line}`"),
                })?;
                if vals.len() != cols.len() {
                    return Err(Error::Parse {
                        line: idx + 1,
                        message: format!("expected {} columns, found {}", cols.len(), vals.len()),
                    });
                }
                rows.push(vals);
            }
        }
    }
    Ok(ParsedCsv {
        comments,
        columns: columns.unwrap_or_default(),
        rows,
    })
}
