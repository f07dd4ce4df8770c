//! Dense and banded linear solves for Newton iteration matrices.
//!
//! Dense systems go through nalgebra's partially pivoted LU. Banded systems
//! use a band LU with partial pivoting in LAPACK `gbtrf` layout, which keeps
//! the 10^3–10^4 unknown method-of-lines systems at O(n·kl·(kl+ku)) cost.

use nalgebra::{DMatrix, DVector, LU};

use crate::error::{Error, Result};

/// Pivots below `SINGULAR_RTOL * n * max|M|` are treated as zero.
const SINGULAR_RTOL: f64 = 1e2 * f64::EPSILON;

/// Square band matrix with `kl` sub- and `ku` superdiagonals.
#[derive(Debug, Clone, PartialEq)]
pub struct BandMatrix {
    n: usize,
    kl: usize,
    ku: usize,
    // column-major, ldab = kl + ku + 1, entry (i, j) at ku + i - j + j * ldab
    data: Vec<f64>,
}

impl BandMatrix {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        Self {
            n,
            kl,
            ku,
            data: vec![0.0; (kl + ku + 1) * n],
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn bandwidths(&self) -> (usize, usize) {
        (self.kl, self.ku)
    }

    fn in_band(&self, i: usize, j: usize) -> bool {
        i < self.n && j < self.n && i + self.ku >= j && j + self.kl >= i
    }

    fn idx(&self, i: usize, j: usize) -> usize {
        self.ku + i - j + j * (self.kl + self.ku + 1)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        if self.in_band(i, j) {
            self.data[self.idx(i, j)]
        } else {
            0.0
        }
    }

    /// Panics when `(i, j)` lies outside the band.
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        assert!(self.in_band(i, j), "({i}, {j}) outside band kl={} ku={}", self.kl, self.ku);
        let k = self.idx(i, j);
        self.data[k] = v;
    }

    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        assert!(self.in_band(i, j), "({i}, {j}) outside band kl={} ku={}", self.kl, self.ku);
        let k = self.idx(i, j);
        self.data[k] += v;
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.n, self.n, |i, j| self.get(i, j))
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|i| {
                let lo = i.saturating_sub(self.kl);
                let hi = (i + self.ku).min(self.n - 1);
                (lo..=hi).map(|j| self.get(i, j) * x[j]).sum()
            })
            .collect()
    }

    fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    fn inf_norm(&self) -> f64 {
        (0..self.n)
            .map(|i| {
                let lo = i.saturating_sub(self.kl);
                let hi = (i + self.ku).min(self.n - 1);
                (lo..=hi).map(|j| self.get(i, j).abs()).sum::<f64>()
            })
            .fold(0.0, f64::max)
    }
}

/// A Jacobian or iteration matrix.
#[derive(Debug, Clone, PartialEq)]
pub enum Matrix {
    Dense(DMatrix<f64>),
    Banded(BandMatrix),
}

impl Matrix {
    pub fn n(&self) -> usize {
        match self {
            Matrix::Dense(m) => m.nrows(),
            Matrix::Banded(b) => b.n,
        }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        match self {
            Matrix::Dense(m) => m.clone(),
            Matrix::Banded(b) => b.to_dense(),
        }
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        match self {
            Matrix::Dense(m) => (m * DVector::from_column_slice(x)).as_slice().to_vec(),
            Matrix::Banded(b) => b.mul_vec(x),
        }
    }

    /// Maximum absolute row sum.
    pub fn inf_norm(&self) -> f64 {
        match self {
            Matrix::Dense(m) => m
                .row_iter()
                .map(|r| r.iter().map(|v| v.abs()).sum::<f64>())
                .fold(0.0, f64::max),
            Matrix::Banded(b) => b.inf_norm(),
        }
    }

    /// `I - scale * self`, keeping the storage layout.
    pub fn identity_minus(&self, scale: f64) -> Matrix {
        match self {
            Matrix::Dense(m) => {
                let mut out = m * (-scale);
                for i in 0..out.nrows() {
                    out[(i, i)] += 1.0;
                }
                Matrix::Dense(out)
            }
            Matrix::Banded(b) => {
                let mut out = b.clone();
                out.data.iter_mut().for_each(|v| *v *= -scale);
                for i in 0..out.n {
                    out.add(i, i, 1.0);
                }
                Matrix::Banded(out)
            }
        }
    }

    pub fn factor(&self) -> Result<Factorization> {
        match self {
            Matrix::Dense(m) => factor_dense(m),
            Matrix::Banded(b) => factor_band(b).map(Factorization::Banded),
        }
    }
}

#[derive(Debug, Clone)]
pub enum Factorization {
    Dense(LU<f64, nalgebra::Dyn, nalgebra::Dyn>),
    Banded(BandLu),
}

impl Factorization {
    pub fn solve_in_place(&self, rhs: &mut [f64]) {
        match self {
            Factorization::Dense(lu) => {
                let mut v = DVector::from_column_slice(rhs);
                // singularity was rejected when factoring
                lu.solve_mut(&mut v);
                rhs.copy_from_slice(v.as_slice());
            }
            Factorization::Banded(lu) => lu.solve_in_place(rhs),
        }
    }
}

fn factor_dense(m: &DMatrix<f64>) -> Result<Factorization> {
    let n = m.nrows();
    if m.ncols() != n {
        return Err(Error::Dimension(format!("matrix is {}x{}", m.nrows(), m.ncols())));
    }
    let scale = m.amax();
    let lu = m.clone().lu();
    let tiny = SINGULAR_RTOL * n as f64 * scale;
    for i in 0..n {
        let pivot = lu.u()[(i, i)];
        if !(pivot.abs() > tiny) {
            return Err(Error::Singular { index: i, pivot });
        }
    }
    Ok(Factorization::Dense(lu))
}

/// LU factors of a band matrix with row pivoting.
#[derive(Debug, Clone)]
pub struct BandLu {
    n: usize,
    kl: usize,
    ku: usize,
    // column-major, ldab = 2 kl + ku + 1; U occupies the top kl + ku + 1
    // rows, multipliers of L the bottom kl rows
    data: Vec<f64>,
    pivots: Vec<usize>,
}

impl BandLu {
    fn ldab(&self) -> usize {
        2 * self.kl + self.ku + 1
    }

    pub fn solve_in_place(&self, b: &mut [f64]) {
        let n = self.n;
        assert_eq!(b.len(), n);
        let (ldab, kv) = (self.ldab(), self.kl + self.ku);
        // L y = P b
        for j in 0..n {
            let p = self.pivots[j];
            if p != j {
                b.swap(j, p);
            }
            let km = self.kl.min(n - 1 - j);
            let bj = b[j];
            if bj != 0.0 && km > 0 {
                let l = &self.data[j * ldab + kv + 1..][..km];
                for (x, m) in b[j + 1..=j + km].iter_mut().zip(l) {
                    *x -= m * bj;
                }
            }
        }
        // U x = y by columns; U has kl + ku superdiagonals
        for j in (0..n).rev() {
            let col = &self.data[j * ldab..][..ldab];
            let xj = b[j] / col[kv];
            b[j] = xj;
            if xj != 0.0 {
                let top = j.saturating_sub(kv);
                // entry (i, j) sits at kv + i - j
                let u = &col[kv + top - j..kv];
                for (x, uij) in b[top..j].iter_mut().zip(u) {
                    *x -= uij * xj;
                }
            }
        }
    }
}

fn factor_band(m: &BandMatrix) -> Result<BandLu> {
    let (n, kl, ku) = (m.n, m.kl, m.ku);
    let kv = kl + ku;
    let ldab = 2 * kl + ku + 1;
    let mut data = vec![0.0; ldab * n];
    // input rows 0..=kl+ku (entry (i, j) at ku + i - j) shift down by kl
    let src_ld = kl + ku + 1;
    for j in 0..n {
        data[j * ldab + kl..][..src_ld].copy_from_slice(&m.data[j * src_ld..][..src_ld]);
    }
    let mut pivots = vec![0; n];
    let tiny = SINGULAR_RTOL * n as f64 * m.max_abs();
    let mut ju = 0usize;
    for j in 0..n {
        let km = kl.min(n - 1 - j);
        let colj = &data[j * ldab..][..ldab];
        let mut p = 0;
        let mut best = colj[kv].abs();
        for r in 1..=km {
            let v = colj[kv + r].abs();
            if v > best {
                best = v;
                p = r;
            }
        }
        pivots[j] = j + p;
        if !(best > tiny) {
            return Err(Error::Singular {
                index: j,
                pivot: colj[kv + p],
            });
        }
        ju = ju.max((j + ku + p).min(n - 1));
        if p != 0 {
            for col in j..=ju {
                let base = col * ldab + kv;
                // rows j and j + p of column col
                data.swap(base + j - col, base + j + p - col);
            }
        }
        let d = data[j * ldab + kv];
        for v in &mut data[j * ldab + kv + 1..][..km] {
            *v /= d;
        }
        if km == 0 {
            continue;
        }
        let (head, tail) = data.split_at_mut((j + 1) * ldab);
        let l = &head[j * ldab + kv + 1..][..km];
        for col in j + 1..=ju {
            let c = &mut tail[(col - j - 1) * ldab..][..ldab];
            let ujc = c[kv + j - col];
            if ujc == 0.0 {
                continue;
            }
            for (x, m) in c[kv + j + 1 - col..][..km].iter_mut().zip(l) {
                *x -= m * ujc;
            }
        }
    }
    Ok(BandLu {
        n,
        kl,
        ku,
        data,
        pivots,
    })
}

/// Solve `M x = rhs` by factorization.
pub fn linear_solve(m: &Matrix, rhs: &[f64]) -> Result<Vec<f64>> {
    if rhs.len() != m.n() {
        return Err(Error::Dimension(format!(
            "right-hand side has length {}, matrix is {}x{}",
            rhs.len(),
            m.n(),
            m.n()
        )));
    }
    let f = m.factor()?;
    let mut x = rhs.to_vec();
    f.solve_in_place(&mut x);
    Ok(x)
}
