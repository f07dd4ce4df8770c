//! Van der Pol oscillator and its cached RK4 reference trajectory.
//!
//! Reference file format (plain text):
//!
//! ```text
//! # van der pol reference, explicit RK4
//! mu = 500
//! dt = 1e-6
//! t_end = 10
//! checkpoint_every = 1000000
//! x0 = 2
//! y0 = 0
//! t x y
//! 0.0000000000000000e0 2.0000000000000000e0 0.0000000000000000e0
//! ...
//! ```
//!
//! `checkpoint_every` counts RK4 steps between stored rows; the final time is
//! always stored. A file whose parameters differ from the requested ones is
//! regenerated.

use std::fs;
use std::path::Path;
use std::sync::Arc;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::integrator::OdeSystem;
use crate::linalg::Matrix;
use crate::tableau::text::fmt_f64;

#[derive(Debug, Clone)]
pub struct VanDerPol {
    pub mu: f64,
    reference: Option<Arc<VdpReference>>,
}

pub fn van_der_pol(mu: f64) -> Result<VanDerPol> {
    if !(mu > 0.0) {
        return Err(Error::InvalidArgument(format!("mu must be positive, got {mu}")));
    }
    Ok(VanDerPol { mu, reference: None })
}

impl VanDerPol {
    pub const DEFAULT_MU: f64 = 500.0;
    pub const T_END: f64 = 10.0;
    pub const INITIAL: [f64; 2] = [2.0, 0.0];

    pub fn with_reference(mut self, reference: Arc<VdpReference>) -> Self {
        self.reference = Some(reference);
        self
    }

    pub fn reference(&self) -> Option<&VdpReference> {
        self.reference.as_deref()
    }

    fn f(&self, u: &[f64]) -> [f64; 2] {
        let (x, y) = (u[0], u[1]);
        [y, self.mu * (1.0 - x * x) * y - x]
    }
}

impl OdeSystem for VanDerPol {
    fn dim(&self) -> usize {
        2
    }

    fn rhs(&self, _t: f64, u: &[f64], out: &mut [f64]) {
        out.copy_from_slice(&self.f(u));
    }

    fn jacobian(&self, _t: f64, u: &[f64]) -> Matrix {
        let (x, y) = (u[0], u[1]);
        Matrix::Dense(DMatrix::from_row_slice(
            2,
            2,
            &[0.0, 1.0, -2.0 * self.mu * x * y - 1.0, self.mu * (1.0 - x * x)],
        ))
    }

    fn initial_state(&self, _t0: f64) -> Vec<f64> {
        Self::INITIAL.to_vec()
    }

    fn exact(&self, t: f64) -> Option<Vec<f64>> {
        self.reference.as_ref()?.at(t)
    }

    fn describe(&self) -> String {
        match &self.reference {
            Some(r) => format!(
                "van-der-pol mu={} x0=2 y0=0 reference=rk4(dt={:e})",
                self.mu, r.params.dt
            ),
            None => format!("van-der-pol mu={} x0=2 y0=0", self.mu),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VdpReferenceParams {
    pub mu: f64,
    pub dt: f64,
    pub t_end: f64,
    pub checkpoint_every: usize,
}

impl Default for VdpReferenceParams {
    fn default() -> Self {
        Self {
            mu: VanDerPol::DEFAULT_MU,
            dt: 1e-6,
            t_end: VanDerPol::T_END,
            checkpoint_every: 1_000_000,
        }
    }
}

/// Checkpoints `(t, x, y)` of an explicit RK4 solve.
#[derive(Debug, Clone, PartialEq)]
pub struct VdpReference {
    pub params: VdpReferenceParams,
    pub rows: Vec<[f64; 3]>,
}

impl VdpReference {
    pub fn generate(params: VdpReferenceParams) -> Result<Self> {
        if !(params.dt > 0.0 && params.t_end > 0.0) || params.checkpoint_every == 0 {
            return Err(Error::InvalidArgument(format!("invalid reference parameters {params:?}")));
        }
        let sys = van_der_pol(params.mu)?;
        let steps = (params.t_end / params.dt).round() as usize;
        let dt = params.t_end / steps as f64;
        let mut u = VanDerPol::INITIAL;
        let mut rows = vec![[0.0, u[0], u[1]]];
        let add = |u: &[f64; 2], k: &[f64; 2], w: f64| [u[0] + w * k[0], u[1] + w * k[1]];
        for n in 0..steps {
            let k1 = sys.f(&u);
            let k2 = sys.f(&add(&u, &k1, dt / 2.0));
            let k3 = sys.f(&add(&u, &k2, dt / 2.0));
            let k4 = sys.f(&add(&u, &k3, dt));
            for d in 0..2 {
                u[d] += dt / 6.0 * (k1[d] + 2.0 * k2[d] + 2.0 * k3[d] + k4[d]);
            }
            let done = n + 1;
            if done % params.checkpoint_every == 0 || done == steps {
                let t = if done == steps { params.t_end } else { done as f64 * dt };
                if rows.last().map(|r| r[0]) != Some(t) {
                    rows.push([t, u[0], u[1]]);
                }
            }
        }
        Ok(Self { params, rows })
    }

    /// State at a stored checkpoint time.
    pub fn at(&self, t: f64) -> Option<Vec<f64>> {
        self.rows
            .iter()
            .find(|r| (r[0] - t).abs() <= 1e-12 * t.abs().max(1.0))
            .map(|r| vec![r[1], r[2]])
    }

    pub fn to_text(&self) -> String {
        let p = &self.params;
        let mut out = String::from("# van der pol reference, explicit RK4\n");
        out += &format!("mu = {}\n", fmt_f64(p.mu));
        out += &format!("dt = {}\n", fmt_f64(p.dt));
        out += &format!("t_end = {}\n", fmt_f64(p.t_end));
        out += &format!("checkpoint_every = {}\n", p.checkpoint_every);
        out += "x0 = 2\ny0 = 0\nt x y\n";
        for r in &self.rows {
            out += &format!("{} {} {}\n", fmt_f64(r[0]), fmt_f64(r[1]), fmt_f64(r[2]));
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut mu = None;
        let mut dt = None;
        let mut t_end = None;
        let mut every = None;
        let mut rows = Vec::new();
        let mut in_table = false;
        for (idx, line) in text.lines().enumerate() {
            let bad = |m: &str| Error::Parse {
                line: idx + 1,
                message: m.to_string(),
            };
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if in_table {
                let v: std::result::Result<Vec<f64>, _> = line.split_whitespace().map(str::parse).collect();
                match v {
                    Ok(v) if v.len() == 3 => rows.push([v[0], v[1], v[2]]),
                    _ => return Err(bad("expected `t x y`")),
                }
                continue;
            }
            if line == "t x y" {
                in_table = true;
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| bad("expected key = value"))?;
            let value = value.trim();
            let num = || value.parse::<f64>().map_err(|_| bad("bad number"));
            match key.trim() {
                "mu" => mu = Some(num()?),
                "dt" => dt = Some(num()?),
                "t_end" => t_end = Some(num()?),
                "checkpoint_every" => every = Some(value.parse().map_err(|_| bad("bad integer"))?),
                "x0" | "y0" => {}
                other => return Err(bad(&format!("unknown key `{other}`"))),
            }
        }
        let missing = |k: &str| Error::Parse {
            line: 0,
            message: format!("missing `{k}`"),
        };
        Ok(Self {
            params: VdpReferenceParams {
                mu: mu.ok_or_else(|| missing("mu"))?,
                dt: dt.ok_or_else(|| missing("dt"))?,
                t_end: t_end.ok_or_else(|| missing("t_end"))?,
                checkpoint_every: every.ok_or_else(|| missing("checkpoint_every"))?,
            },
            rows,
        })
    }

    /// Load the cached trajectory at `path` if it was generated with `params`,
    /// otherwise generate it and write it there.
    pub fn load_or_generate(path: &Path, params: VdpReferenceParams) -> Result<Self> {
        if let Ok(text) = fs::read_to_string(path) {
            if let Ok(cached) = Self::from_text(&text) {
                if cached.params == params {
                    return Ok(cached);
                }
            }
        }
        let fresh = Self::generate(params)?;
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir)?;
        }
        let tmp = path.with_extension(format!("tmp{}", std::process::id()));
        fs::write(&tmp, fresh.to_text())?;
        fs::rename(&tmp, path)?;
        Ok(fresh)
    }

    /// Default cache location: `$WSO_DIRK_CACHE` or the system temp directory.
    pub fn default_cache_path(params: &VdpReferenceParams) -> std::path::PathBuf {
        let dir = std::env::var_os("WSO_DIRK_CACHE")
            .map(std::path::PathBuf::from)
            .unwrap_or_else(|| std::env::temp_dir().join("wso-dirk"));
        dir.join(format!(
            "vdp_mu{}_dt{:e}_T{}_every{}.txt",
            params.mu, params.dt, params.t_end, params.checkpoint_every
        ))
    }
}
