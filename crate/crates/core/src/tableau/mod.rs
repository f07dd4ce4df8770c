//! Butcher tableaux, the named-scheme registry and the text format.

mod registry;
pub(crate) mod text;

pub use registry::{registry, registry_get, registry_names, RegistryEntry};
pub use text::{parse, serialize};

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Tolerance used when testing structural properties (lower-triangularity,
/// stiff accuracy) of tableaux built from decimal coefficients.
pub const STRUCTURE_TOL: f64 = 1e-14;

/// An `s`-stage Runge–Kutta scheme `(A, b, c)` with `c = A e`.
///
/// The abscissae are always derived from the row sums of `A`; there is no way
/// to set them independently.
#[derive(Debug, Clone, PartialEq)]
pub struct ButcherTableau {
    a: DMatrix<f64>,
    b: DVector<f64>,
    c: DVector<f64>,
    name: String,
    claimed_order: Option<u32>,
    claimed_wso: Option<u32>,
    provenance: Option<String>,
}

impl ButcherTableau {
    pub fn new(a: DMatrix<f64>, b: DVector<f64>, name: impl Into<String>) -> Result<Self> {
        let s = a.nrows();
        if s == 0 {
            return Err(Error::Dimension("tableau must have at least one stage".into()));
        }
        if a.ncols() != s {
            return Err(Error::Dimension(format!(
                "A must be square, got {}x{}",
                a.nrows(),
                a.ncols()
            )));
        }
        if b.len() != s {
            return Err(Error::Dimension(format!(
                "b has length {} but A has {} stages",
                b.len(),
                s
            )));
        }
        if a.iter().chain(b.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidTableau("coefficients must be finite".into()));
        }
        let c = row_sums(&a);
        Ok(Self {
            a,
            b,
            c,
            name: name.into(),
            claimed_order: None,
            claimed_wso: None,
            provenance: None,
        })
    }

    /// Build from row slices; convenient for literal tables.
    pub fn from_rows(rows: &[&[f64]], b: &[f64], name: impl Into<String>) -> Result<Self> {
        let s = rows.len();
        if let Some(bad) = rows.iter().position(|r| r.len() != s) {
            return Err(Error::Dimension(format!(
                "row {} of A has {} entries, expected {}",
                bad + 1,
                rows[bad].len(),
                s
            )));
        }
        let a = DMatrix::from_fn(s, s, |i, j| rows[i][j]);
        Self::new(a, DVector::from_column_slice(b), name)
    }

    /// Build a DIRK tableau from its lower-triangular rows (row `i` holds
    /// `a_i1 ..= a_ii`). The weights default to the last row when `b` is `None`.
    pub fn lower_triangular(rows: &[&[f64]], b: Option<&[f64]>, name: impl Into<String>) -> Result<Self> {
        let s = rows.len();
        let mut a = DMatrix::zeros(s, s);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != i + 1 {
                return Err(Error::Dimension(format!(
                    "row {} of a lower-triangular tableau needs {} entries, got {}",
                    i + 1,
                    i + 1,
                    row.len()
                )));
            }
            for (j, v) in row.iter().enumerate() {
                a[(i, j)] = *v;
            }
        }
        let b = match b {
            Some(b) => DVector::from_column_slice(b),
            None => a.row(s - 1).transpose(),
        };
        Self::new(a, b, name)
    }

    pub fn with_claims(mut self, order: Option<u32>, wso: Option<u32>) -> Self {
        self.claimed_order = order;
        self.claimed_wso = wso;
        self
    }

    pub fn with_provenance(mut self, provenance: impl Into<String>) -> Self {
        self.provenance = Some(provenance.into());
        self
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn stages(&self) -> usize {
        self.b.len()
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn b(&self) -> &DVector<f64> {
        &self.b
    }

    pub fn c(&self) -> &DVector<f64> {
        &self.c
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn claimed_order(&self) -> Option<u32> {
        self.claimed_order
    }

    pub fn claimed_wso(&self) -> Option<u32> {
        self.claimed_wso
    }

    pub fn provenance(&self) -> Option<&str> {
        self.provenance.as_deref()
    }

    /// `a_ij = 0` for all `j > i`.
    pub fn is_dirk(&self) -> bool {
        let s = self.stages();
        (0..s).all(|i| (i + 1..s).all(|j| self.a[(i, j)] == 0.0))
    }

    /// `b_j = a_sj` for all `j`.
    pub fn is_stiffly_accurate(&self) -> bool {
        let s = self.stages();
        (0..s).all(|j| (self.b[j] - self.a[(s - 1, j)]).abs() <= STRUCTURE_TOL)
    }

    /// Nonzero diagonal for DIRK tableaux; a relative determinant test
    /// otherwise.
    pub fn is_invertible(&self) -> bool {
        if self.is_dirk() {
            return self.a.diagonal().iter().all(|d| *d != 0.0);
        }
        let scale = self.a.amax().max(f64::MIN_POSITIVE);
        let det = (self.a.clone() / scale).determinant();
        det.abs() > 1e-12
    }

    /// Whether `c = ν e` for a constant `ν`.
    pub fn is_equal_time(&self) -> bool {
        let c0 = self.c[0];
        self.c.iter().all(|ci| (ci - c0).abs() <= STRUCTURE_TOL)
    }

    /// Largest `|c_i - Σ_j a_ij|`, recomputed from scratch.
    pub fn row_sum_defect(&self) -> f64 {
        let sums = row_sums(&self.a);
        (&sums - &self.c).amax()
    }
}

fn row_sums(a: &DMatrix<f64>) -> DVector<f64> {
    DVector::from_iterator(a.nrows(), a.row_iter().map(|r| r.iter().sum()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn backward_euler_structure() {
        let t = ButcherTableau::from_rows(&[&[1.0]], &[1.0], "be").unwrap();
        assert_eq!(t.c()[0], 1.0);
        assert!(t.is_dirk());
        assert!(t.is_stiffly_accurate());
        assert!(t.is_invertible());
    }

    #[test]
    fn row_sums_give_abscissae() {
        let t = ButcherTableau::from_rows(&[&[0.5, 0.0], &[0.3, 0.2]], &[0.3, 0.2], "t").unwrap();
        assert_eq!(t.c().as_slice(), &[0.5, 0.5]);
        assert!(t.is_stiffly_accurate());
        assert!(t.is_equal_time());
    }

    #[test]
    fn first_abscissa_of_wso2_scheme() {
        let t = registry_get("wso2-p3").unwrap();
        assert_eq!(t.c()[0], 0.01900072890);
    }

    #[test]
    fn dimension_errors() {
        let a = DMatrix::zeros(2, 3);
        assert!(matches!(
            ButcherTableau::new(a, DVector::zeros(2), "x"),
            Err(Error::Dimension(_))
        ));
        let a = DMatrix::zeros(2, 2);
        assert!(matches!(
            ButcherTableau::new(a, DVector::zeros(3), "x"),
            Err(Error::Dimension(_))
        ));
        assert!(ButcherTableau::from_rows(&[&[1.0, 0.0], &[1.0]], &[0.5, 0.5], "x").is_err());
    }

    #[test]
    fn non_dirk_detection() {
        let t = ButcherTableau::from_rows(&[&[0.25, -0.1], &[0.5, 0.25]], &[0.5, 0.5], "full").unwrap();
        assert!(!t.is_dirk());
        assert!(t.is_invertible());
        let singular = ButcherTableau::from_rows(&[&[1.0, 2.0], &[2.0, 4.0]], &[0.5, 0.5], "sing").unwrap();
        assert!(!singular.is_invertible());
    }
}
