//! Fourth-order finite-difference stencils on a uniform grid of `N` cells,
//! nodes `0..=N`. Interior nodes use centered 5-point stencils; the two nodes
//! nearest each boundary use biased stencils of the same order.

use nalgebra::{DMatrix, DVector};

/// Fornberg's algorithm: weights for derivatives `0..=m` at `x0` from values
/// at `points`. Returns `w[d][k]`.
pub fn fd_weights(x0: f64, points: &[f64], m: usize) -> Vec<Vec<f64>> {
    let n = points.len();
    let mut c = vec![vec![0.0; n]; m + 1];
    let mut c1 = 1.0;
    let mut c4 = points[0] - x0;
    c[0][0] = 1.0;
    for i in 1..n {
        let mn = i.min(m);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = points[i] - x0;
        for j in 0..i {
            let c3 = points[i] - points[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[k][i] = c1 * (k as f64 * c[k - 1][i - 1] - c5 * c[k][i - 1]) / c2;
                }
                c[0][i] = -c1 * c5 * c[0][i - 1] / c2;
            }
            for k in (1..=mn).rev() {
                c[k][j] = (c4 * c[k][j] - k as f64 * c[k - 1][j]) / c3;
            }
            c[0][j] = c4 * c[0][j] / c3;
        }
        c1 = c2;
    }
    c
}

/// Sparse row of a difference operator: `(node, weight)`.
pub type Row = Vec<(usize, f64)>;

fn row(center: usize, offsets: std::ops::RangeInclusive<i64>, deriv: usize, h: f64) -> Row {
    let offs: Vec<i64> = offsets.collect();
    let pts: Vec<f64> = offs.iter().map(|o| *o as f64).collect();
    let w = fd_weights(0.0, &pts, deriv);
    let scale = h.powi(deriv as i32);
    offs.iter()
        .zip(&w[deriv])
        .map(|(o, wk)| ((center as i64 + o) as usize, wk / scale))
        .collect()
}

/// 4th-order first-derivative rows for all nodes `0..=cells`.
pub fn d1_rows(cells: usize, h: f64) -> Vec<Row> {
    (0..=cells)
        .map(|i| match i {
            0 => row(0, 0..=4, 1, h),
            1 => row(1, -1..=3, 1, h),
            _ if i == cells - 1 => row(i, -3..=1, 1, h),
            _ if i == cells => row(i, -4..=0, 1, h),
            _ => row(i, -2..=2, 1, h),
        })
        .collect()
}

/// 4th-order second-derivative rows for all nodes `0..=cells`.
pub fn d2_rows(cells: usize, h: f64) -> Vec<Row> {
    (0..=cells)
        .map(|i| match i {
            0 => row(0, 0..=5, 2, h),
            1 => row(1, -1..=4, 2, h),
            _ if i == cells - 1 => row(i, -4..=1, 2, h),
            _ if i == cells => row(i, -5..=0, 2, h),
            _ => row(i, -2..=2, 2, h),
        })
        .collect()
}

/// Second derivative at a wall from the values at the wall and the next four
/// nodes plus the prescribed first derivative there: exact for polynomials of
/// degree 5, hence 4th-order accurate. Returns `(value weights, slope weight)`
/// for unit spacing; scale by `1/h²` and `1/h`.
pub fn neumann_d2_weights() -> ([f64; 5], f64) {
    // unknowns w0..w4, beta; conditions: exact for x^m, m = 0..=5
    let mut m = DMatrix::zeros(6, 6);
    let mut rhs = DVector::zeros(6);
    for p in 0..6 {
        for k in 0..5 {
            m[(p, k)] = (k as f64).powi(p as i32);
        }
        m[(p, 5)] = if p == 1 { 1.0 } else { 0.0 };
        rhs[p] = if p == 2 { 2.0 } else { 0.0 };
    }
    let w = m.lu().solve(&rhs).expect("Neumann closure system is nonsingular");
    ([w[0], w[1], w[2], w[3], w[4]], w[5])
}

pub fn apply(rows: &[Row], values: &[f64]) -> Vec<f64> {
    rows.iter()
        .map(|r| r.iter().map(|(k, w)| w * values[*k]).sum())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() < tol)
    }

    #[test]
    fn textbook_stencils() {
        let w = fd_weights(0.0, &[-2.0, -1.0, 0.0, 1.0, 2.0], 2);
        let s: Vec<f64> = [-1.0, 16.0, -30.0, 16.0, -1.0].iter().map(|v| v / 12.0).collect();
        assert!(close(&w[2], &s, 1e-14));
        let s: Vec<f64> = [1.0, -8.0, 0.0, 8.0, -1.0].iter().map(|v| v / 12.0).collect();
        assert!(close(&w[1], &s, 1e-14));
        let w = fd_weights(0.0, &[-1.0, 0.0, 1.0, 2.0, 3.0, 4.0], 2);
        let s: Vec<f64> = [10.0, -15.0, -4.0, 14.0, -6.0, 1.0].iter().map(|v| v / 12.0).collect();
        assert!(close(&w[2], &s, 1e-13));
        let w = fd_weights(0.0, &[0.0, 1.0, 2.0, 3.0, 4.0], 1);
        let s: Vec<f64> = [-25.0, 48.0, -36.0, 16.0, -3.0].iter().map(|v| v / 12.0).collect();
        assert!(close(&w[1], &s, 1e-13));
    }

    #[test]
    fn rows_are_exact_on_quartics() {
        let n = 20;
        let h = 1.0 / n as f64;
        let f: Vec<f64> = (0..=n).map(|i| (i as f64 * h).powi(4) - 2.0 * (i as f64 * h).powi(3)).collect();
        let d1 = apply(&d1_rows(n, h), &f);
        let d2 = apply(&d2_rows(n, h), &f);
        for i in 0..=n {
            let x = i as f64 * h;
            assert!((d1[i] - (4.0 * x.powi(3) - 6.0 * x * x)).abs() < 1e-10, "d1 at {i}");
            assert!((d2[i] - (12.0 * x * x - 12.0 * x)).abs() < 1e-8, "d2 at {i}");
        }
    }

    #[test]
    fn neumann_closure_is_exact_to_degree_five() {
        let (w, beta) = neumann_d2_weights();
        for p in 0..=5 {
            let approx: f64 = (0..5).map(|k| w[k] * (k as f64).powi(p)).sum::<f64>()
                + if p == 1 { beta } else { 0.0 };
            let exact = if p == 2 { 2.0 } else { 0.0 };
            assert!((approx - exact).abs() < 1e-11, "degree {p}");
        }
    }
}
