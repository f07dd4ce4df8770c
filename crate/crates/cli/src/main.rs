//! `wso-dirk` command-line front end.
//!
//! Machine-readable output (CSV, tableaux, final states) goes to stdout or
//! `--output`; progress and diagnostics go to stderr.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 usage error, 3 search found
//! no verified scheme.

use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use wso_dirk::analysis::{
    analyze_with, classical_order, stage_order, wso, wso2x2_residual, wso_eigenvector_order, AnalysisSettings,
    Wso2x2Point, DEFAULT_JMAX, DEFAULT_TOL,
};
use wso_dirk::convergence::{emit_csv, run_study, ProblemSpec, SlopeWindow, StudySpec};
use wso_dirk::integrator::{integrate, integrate_trajectory, NewtonSettings, Observable};
use wso_dirk::problems::{Burgers, Schrodinger, VanDerPol, VdpReferenceParams};
use wso_dirk::search::{search, SearchSpec};
use wso_dirk::tableau::{parse, registry, registry_get, serialize};
use wso_dirk::{ButcherTableau, Error, Execution};

const EXIT_FAILURE: u8 = 1;
const EXIT_USAGE: u8 = 2;
const EXIT_SEARCH_FAILED: u8 = 3;

#[derive(Parser, Debug)]
#[command(name = "wso-dirk", version, about = "DIRK schemes with high weak stage order")]
struct Cli {
    /// Worker threads for study rows and search starts (1 = sequential).
    #[arg(long, global = true)]
    jobs: Option<usize>,

    /// File of `key = value` lines supplying defaults for the subcommand's flags.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// List registered schemes with their order labels.
    List,
    /// Print the analysis report of a scheme.
    Analyze(AnalyzeArgs),
    /// Integrate a problem with a fixed step.
    Integrate(IntegrateArgs),
    /// Run a convergence study and write CSV.
    Converge(ConvergeArgs),
    /// Search for a DIRK scheme with the requested properties.
    Search(SearchArgs),
    /// Tabulate the 2x2 block eigenvector residual on a grid of
    /// `(a11/a21, a22/a21)`; its zero contours are the solution curves.
    Block(BlockArgs),
}

#[derive(Args, Debug)]
#[group(required = true, multiple = false)]
struct SchemeSource {
    /// Registered scheme name (see `list`).
    #[arg(long)]
    scheme: Option<String>,
    /// Tableau file in the text format.
    #[arg(long)]
    tableau: Option<PathBuf>,
}

impl SchemeSource {
    fn load(&self) -> Result<ButcherTableau> {
        match (&self.scheme, &self.tableau) {
            (Some(name), None) => Ok(registry_get(name)?),
            (None, Some(path)) => {
                let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
                parse(&text).with_context(|| format!("parsing {}", path.display()))
            }
            _ => bail!("give exactly one of --scheme and --tableau"),
        }
    }
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq)]
enum ReportFormat {
    Text,
    Kv,
}

#[derive(Args, Debug)]
struct AnalyzeArgs {
    #[command(flatten)]
    source: SchemeSource,
    /// Detection tolerance for orders.
    #[arg(long, default_value_t = DEFAULT_TOL)]
    tol: f64,
    #[arg(long, value_enum, default_value_t = ReportFormat::Text)]
    format: ReportFormat,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq)]
enum ProblemName {
    Pr,
    Decay,
    Schrodinger,
    Burgers,
    Vdp,
}

#[derive(Args, Debug)]
struct ProblemArgs {
    #[arg(long, value_enum)]
    problem: ProblemName,
    /// Stiffness parameter for `pr` and `decay`.
    #[arg(long, allow_hyphen_values = true)]
    lambda: Option<f64>,
    /// Grid cells for `schrodinger` and `burgers`.
    #[arg(long)]
    cells: Option<usize>,
    #[arg(long)]
    omega: Option<f64>,
    #[arg(long)]
    k: Option<f64>,
    #[arg(long)]
    nu: Option<f64>,
    #[arg(long)]
    mu: Option<f64>,
    /// RK4 step of the Van der Pol reference.
    #[arg(long)]
    ref_dt: Option<f64>,
    /// Cache file for the Van der Pol reference.
    #[arg(long)]
    ref_cache: Option<PathBuf>,
}

impl ProblemArgs {
    fn spec(&self) -> ProblemSpec {
        match self.problem {
            ProblemName::Pr => ProblemSpec::ProtheroRobinson {
                lambda: self.lambda.unwrap_or(-1e4),
            },
            ProblemName::Decay => ProblemSpec::LinearDecay {
                lambda: self.lambda.unwrap_or(-1.0),
            },
            ProblemName::Schrodinger => ProblemSpec::Schrodinger {
                omega: self.omega.unwrap_or(Schrodinger::DEFAULT_OMEGA),
                k: self.k.unwrap_or(Schrodinger::DEFAULT_K),
                cells: self.cells.unwrap_or(Schrodinger::DEFAULT_CELLS),
            },
            ProblemName::Burgers => ProblemSpec::Burgers {
                nu: self.nu.unwrap_or(Burgers::DEFAULT_NU),
                cells: self.cells.unwrap_or(Burgers::DEFAULT_CELLS),
            },
            ProblemName::Vdp => {
                let mu = self.mu.unwrap_or(VanDerPol::DEFAULT_MU);
                let defaults = VdpReferenceParams::default();
                ProblemSpec::VanDerPol {
                    mu,
                    reference: VdpReferenceParams {
                        mu,
                        dt: self.ref_dt.unwrap_or(defaults.dt),
                        ..defaults
                    },
                    cache: self.ref_cache.clone(),
                }
            }
        }
    }
}

#[derive(Args, Debug)]
struct NewtonArgs {
    #[arg(long, default_value_t = NewtonSettings::default().rel_tol)]
    newton_rel_tol: f64,
    #[arg(long, default_value_t = NewtonSettings::default().abs_tol)]
    newton_abs_tol: f64,
    #[arg(long, default_value_t = NewtonSettings::default().max_iters)]
    newton_max_iters: usize,
}

impl NewtonArgs {
    fn settings(&self) -> NewtonSettings {
        NewtonSettings {
            rel_tol: self.newton_rel_tol,
            abs_tol: self.newton_abs_tol,
            max_iters: self.newton_max_iters,
        }
    }
}

#[derive(Args, Debug)]
struct IntegrateArgs {
    #[command(flatten)]
    source: SchemeSource,
    #[command(flatten)]
    problem: ProblemArgs,
    #[command(flatten)]
    newton: NewtonArgs,
    #[arg(long)]
    dt: f64,
    /// Final time (defaults to the problem's).
    #[arg(long)]
    t_end: Option<f64>,
    /// Write `t,u1,...` after every step instead of the final state.
    #[arg(long)]
    trajectory: bool,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ConvergeArgs {
    #[command(flatten)]
    source: SchemeSource,
    #[command(flatten)]
    problem: ProblemArgs,
    #[command(flatten)]
    newton: NewtonArgs,
    /// Comma-separated step sizes (defaults to the problem's list).
    #[arg(long, value_delimiter = ',', conflicts_with = "dt_range")]
    dt_list: Option<Vec<f64>>,
    /// `lo:hi:count` log-spaced step sizes, each adjusted to divide the interval.
    #[arg(long)]
    dt_range: Option<String>,
    /// Slope window `name=lo:hi`; repeatable. Defaults to the problem's windows.
    #[arg(long)]
    window: Vec<String>,
    /// Comma-separated observables among u, ux, uxx.
    #[arg(long, value_delimiter = ',')]
    observables: Option<Vec<String>>,
    /// Rows within this factor of the smallest error are left out of fits.
    #[arg(long)]
    floor_factor: Option<f64>,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SearchArgs {
    #[arg(long)]
    stages: usize,
    #[arg(long)]
    order: u32,
    /// Target order of the eigenvector criterion.
    #[arg(long)]
    qe: u32,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    multistarts: Option<usize>,
    /// Nelder-Mead iterations per start.
    #[arg(long)]
    max_iters: Option<u64>,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct BlockArgs {
    /// Comma-separated values of j (each >= 2).
    #[arg(long, value_delimiter = ',', default_value = "2,3,4")]
    j: Vec<u32>,
    /// `lo:hi` range of a11/a21.
    #[arg(long, default_value = "-10:10", allow_hyphen_values = true)]
    x_range: String,
    /// `lo:hi` range of a22/a21.
    #[arg(long, default_value = "-10:10", allow_hyphen_values = true)]
    y_range: String,
    /// Points per axis.
    #[arg(long, default_value_t = 241)]
    grid: usize,
    #[arg(long)]
    output: Option<PathBuf>,
}

struct UsageError(String);

fn execution(jobs: Option<usize>) -> Execution {
    match jobs {
        Some(1) => Execution::Sequential,
        _ => Execution::Parallel,
    }
}

fn write_output(path: &Option<PathBuf>, text: &str) -> Result<()> {
    match path {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())?;
            out.flush()?;
            Ok(())
        }
    }
}

fn cmd_list() -> Result<()> {
    let mut text = String::new();
    for e in registry() {
        let t = &e.tableau;
        text.push_str(&format!(
            "{:<16} s={} p={} q={} wso={} wso_eig={}\n",
            e.name,
            t.stages(),
            classical_order(t, DEFAULT_TOL),
            stage_order(t, DEFAULT_TOL),
            wso(t, DEFAULT_JMAX, DEFAULT_TOL),
            wso_eigenvector_order(t, DEFAULT_JMAX, DEFAULT_TOL),
        ));
    }
    write_output(&None, &text)
}

fn cmd_analyze(args: &AnalyzeArgs) -> Result<()> {
    let t = args.source.load()?;
    let settings = AnalysisSettings {
        tol: args.tol,
        ..AnalysisSettings::default()
    };
    let report = analyze_with(&t, &settings)?;
    let text = match args.format {
        ReportFormat::Text => report.to_string(),
        ReportFormat::Kv => report.to_key_value(),
    };
    write_output(&None, &text)
}

fn cmd_integrate(args: &IntegrateArgs) -> Result<()> {
    if !(args.dt > 0.0) || !args.dt.is_finite() {
        return Err(UsageError(format!("--dt must be positive, got {}", args.dt)).into());
    }
    let t = args.source.load()?;
    let problem = args.problem.spec();
    let sys = problem.build()?;
    let t_end = args.t_end.unwrap_or(problem.t_end());
    let u0 = sys.initial_state(0.0);
    let run = if args.trajectory {
        integrate_trajectory(&t, sys.as_ref(), 0.0, &u0, t_end, args.dt, args.newton.settings())?
    } else {
        integrate(&t, sys.as_ref(), 0.0, &u0, t_end, args.dt, args.newton.settings())?
    };
    eprintln!("{} on {}: {} steps to t = {}", t.name(), sys.describe(), run.steps, run.t_final);
    if let Some(exact) = sys.exact(run.t_final) {
        if let Some(err) = sys.observable_error(Observable::U, run.t_final, &run.state, &exact) {
            eprintln!("max error at t_end = {err:e}");
        }
    }
    let text = match &run.trajectory {
        Some(traj) => {
            let mut s = String::from("t");
            for i in 0..sys.dim() {
                s.push_str(&format!(",u{}", i + 1));
            }
            s.push('\n');
            for (time, u) in traj {
                s.push_str(&format!("{time}"));
                for v in u {
                    s.push_str(&format!(",{v}"));
                }
                s.push('\n');
            }
            s
        }
        None => run.state.iter().map(|v| format!("{v}\n")).collect(),
    };
    write_output(&args.output, &text)
}

fn parse_window(s: &str) -> std::result::Result<SlopeWindow, UsageError> {
    let bad = || UsageError(format!("window `{s}` is not of the form name=lo:hi"));
    let (name, range) = s.split_once('=').ok_or_else(bad)?;
    let (lo, hi) = range.split_once(':').ok_or_else(bad)?;
    let lo: f64 = lo.trim().parse().map_err(|_| bad())?;
    let hi: f64 = hi.trim().parse().map_err(|_| bad())?;
    if !(lo < hi) {
        return Err(bad());
    }
    Ok(SlopeWindow::new(name.trim(), lo, hi))
}

fn parse_range(s: &str, t_end: f64) -> std::result::Result<Vec<f64>, UsageError> {
    let bad = || UsageError(format!("--dt-range `{s}` is not of the form lo:hi:count"));
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() != 3 {
        return Err(bad());
    }
    let lo: f64 = parts[0].parse().map_err(|_| bad())?;
    let hi: f64 = parts[1].parse().map_err(|_| bad())?;
    let count: usize = parts[2].parse().map_err(|_| bad())?;
    if !(lo > 0.0 && lo <= hi) || count == 0 {
        return Err(bad());
    }
    Ok(wso_dirk::convergence::log_spaced_divisors(t_end, lo, hi, count))
}

fn cmd_converge(args: &ConvergeArgs, exec: Execution) -> Result<()> {
    let t = args.source.load()?;
    let problem = args.problem.spec();
    let mut spec = StudySpec::new(t, problem.clone());
    spec.newton = args.newton.settings();
    spec.execution = exec;
    if let Some(list) = &args.dt_list {
        if list.iter().any(|dt| !(*dt > 0.0)) {
            return Err(UsageError("--dt-list entries must be positive".into()).into());
        }
        spec.dt_list = list.clone();
    }
    if let Some(range) = &args.dt_range {
        spec.dt_list = parse_range(range, problem.t_end())?;
    }
    if !args.window.is_empty() {
        spec.windows = args.window.iter().map(|w| parse_window(w)).collect::<std::result::Result<_, _>>()?;
    }
    if let Some(obs) = &args.observables {
        spec.observables = obs
            .iter()
            .map(|o| Observable::parse(o).ok_or_else(|| UsageError(format!("unknown observable `{o}`"))))
            .collect::<std::result::Result<_, _>>()?;
    }
    if let Some(f) = args.floor_factor {
        spec.floor_factor = f;
    }
    eprintln!(
        "running {} rows of {} on {}",
        spec.dt_list.len(),
        spec.tableau.name(),
        problem.key()
    );
    let table = run_study(&spec)?;
    for f in &table.fits {
        match f.fit {
            Some(s) => eprintln!("slope {} {}: {:.3}", f.window.name, f.observable.label(), s.slope),
            None => eprintln!("slope {} {}: window underfilled", f.window.name, f.observable.label()),
        }
    }
    let mut buf = vec![];
    emit_csv(&table, &mut buf)?;
    write_output(&args.output, &String::from_utf8(buf)?)
}

fn cmd_search(args: &SearchArgs, exec: Execution) -> Result<ExitCode> {
    let mut spec = SearchSpec::new(args.stages, args.order, args.qe, args.seed);
    spec.execution = exec;
    if let Some(m) = args.multistarts {
        spec.multistarts = m;
    }
    if let Some(m) = args.max_iters {
        spec.max_iters = m;
    }
    match search(&spec) {
        Ok(found) => {
            eprintln!("verified scheme from start {} (objective {:e})", found.start, found.objective);
            eprint!("{}", found.report);
            write_output(&args.output, &serialize(&found.tableau))?;
            Ok(ExitCode::SUCCESS)
        }
        Err(e @ Error::InvalidSearch(_)) => Err(UsageError(e.to_string()).into()),
        Err(e @ Error::SearchFailed(_)) => {
            eprintln!("error: {e}");
            Ok(ExitCode::from(EXIT_SEARCH_FAILED))
        }
        Err(e) => Err(e.into()),
    }
}

fn parse_span(s: &str, flag: &str) -> std::result::Result<(f64, f64), UsageError> {
    let bad = || UsageError(format!("{flag} `{s}` is not of the form lo:hi"));
    let (lo, hi) = s.split_once(':').ok_or_else(bad)?;
    let lo: f64 = lo.trim().parse().map_err(|_| bad())?;
    let hi: f64 = hi.trim().parse().map_err(|_| bad())?;
    if !(lo < hi) {
        return Err(bad());
    }
    Ok((lo, hi))
}

fn cmd_block(args: &BlockArgs) -> Result<()> {
    if args.j.iter().any(|j| *j < 2) {
        return Err(UsageError("the block condition is defined for j >= 2".into()).into());
    }
    if args.grid < 2 {
        return Err(UsageError("--grid needs at least 2 points".into()).into());
    }
    let (x0, x1) = parse_span(&args.x_range, "--x-range")?;
    let (y0, y1) = parse_span(&args.y_range, "--y-range")?;
    let at = |lo: f64, hi: f64, k: usize| lo + (hi - lo) * k as f64 / (args.grid - 1) as f64;
    let mut text = String::from("x,y");
    for j in &args.j {
        text.push_str(&format!(",r{j}"));
    }
    text.push('\n');
    for a in 0..args.grid {
        for b in 0..args.grid {
            let p = Wso2x2Point::new(at(x0, x1, a), at(y0, y1, b));
            text.push_str(&format!("{},{}", p.x, p.y));
            for j in &args.j {
                text.push_str(&format!(",{:e}", wso2x2_residual(p, *j)));
            }
            text.push('\n');
        }
    }
    write_output(&args.output, &text)
}

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::fmt::Debug for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

/// Splice `key = value` lines from `--config` into the argument list right
/// after the subcommand. Flags given on the command line take precedence.
fn expand_config(args: Vec<String>) -> Result<Vec<String>> {
    let Some(pos) = args.iter().position(|a| a == "--config" || a.starts_with("--config=")) else {
        return Ok(args);
    };
    let path = match args[pos].split_once('=') {
        Some((_, p)) => p.to_string(),
        None => args
            .get(pos + 1)
            .cloned()
            .ok_or_else(|| UsageError("--config needs a file".into()))?,
    };
    let text = fs::read_to_string(&path).with_context(|| format!("reading config {path}"))?;
    let mut extra = vec![];
    for (n, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| UsageError(format!("{path}:{}: expected `key = value`", n + 1)))?;
        let flag = format!("--{}", key.trim().replace('_', "-"));
        if args.iter().any(|a| *a == flag || a.starts_with(&format!("{flag}="))) {
            continue;
        }
        match value.trim() {
            "true" => extra.push(flag),
            "false" => {}
            v => {
                extra.push(flag);
                extra.push(v.to_string());
            }
        }
    }
    let commands = ["list", "analyze", "integrate", "converge", "search", "block"];
    let sub = args
        .iter()
        .position(|a| commands.contains(&a.as_str()))
        .ok_or_else(|| UsageError("missing subcommand".into()))?;
    let mut out = args[..=sub].to_vec();
    out.extend(extra);
    out.extend_from_slice(&args[sub + 1..]);
    Ok(out)
}

fn run(cli: Cli) -> Result<ExitCode> {
    let exec = execution(cli.jobs);
    let body = move || -> Result<ExitCode> {
        match &cli.command {
            Command::List => cmd_list().map(|_| ExitCode::SUCCESS),
            Command::Analyze(a) => cmd_analyze(a).map(|_| ExitCode::SUCCESS),
            Command::Integrate(a) => cmd_integrate(a).map(|_| ExitCode::SUCCESS),
            Command::Converge(a) => cmd_converge(a, exec).map(|_| ExitCode::SUCCESS),
            Command::Search(a) => cmd_search(a, exec),
            Command::Block(a) => cmd_block(a).map(|_| ExitCode::SUCCESS),
        }
    };
    match cli.jobs {
        Some(n) if n > 1 => wso_dirk::exec::with_threads(n, body),
        _ => body(),
    }
}

fn main() -> ExitCode {
    let args = match expand_config(std::env::args().collect()) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(EXIT_USAGE);
        }
    };
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE } else { 0 });
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            let usage = matches!(
                e.downcast_ref::<Error>(),
                Some(Error::UnknownScheme { .. } | Error::InvalidArgument(_) | Error::InvalidSearch(_))
            );
            if usage || e.downcast_ref::<UsageError>().is_some() {
                ExitCode::from(EXIT_USAGE)
            } else {
                ExitCode::from(EXIT_FAILURE)
            }
        }
    }
}
