//! Minimal dense row-major matrix used by the models and solvers.
//!
//! The workloads here are desk-scale (hundreds of rows, tens of columns), so a
//! plain `Vec`-backed matrix with textbook kernels is sufficient and keeps the
//! whole engine free of BLAS/LAPACK build requirements.

use crate::error::{Error, Result};
use crate::scalar::{sc, Scalar};

#[derive(Debug, Clone, PartialEq)]
pub struct Matrix<S> {
    rows: usize,
    cols: usize,
    data: Vec<S>,
}

impl<S: Scalar> Matrix<S> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![S::zero(); rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<S>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Shape(format!(
                "expected {} values for a {}x{} matrix, got {}",
                rows * cols,
                rows,
                cols,
                data.len()
            )));
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<S>]) -> Result<Self> {
        let n = rows.len();
        let d = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(n * d);
        for (i, r) in rows.iter().enumerate() {
            if r.len() != d {
                return Err(Error::Shape(format!(
                    "row {} has {} columns, expected {}",
                    i,
                    r.len(),
                    d
                )));
            }
            data.extend_from_slice(r);
        }
        Ok(Matrix { rows: n, cols: d, data })
    }

    /// Single-row matrix view of a vector.
    pub fn row_vector(v: &[S]) -> Self {
        Matrix {
            rows: 1,
            cols: v.len(),
            data: v.to_vec(),
        }
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> S {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: S) {
        self.data[r * self.cols + c] = v;
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[S] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, r: usize) -> &mut [S] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn data(&self) -> &[S] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [S] {
        &mut self.data
    }

    pub fn row_iter(&self) -> impl Iterator<Item = &[S]> {
        self.data.chunks(self.cols.max(1))
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn map<F: Fn(S) -> S>(&self, f: F) -> Self {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    /// `self (n x k) * other (k x m)`.
    pub fn matmul(&self, other: &Matrix<S>) -> Matrix<S> {
        assert_eq!(self.cols, other.rows, "matmul shape mismatch");
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            let a_row = self.row(i);
            let out_row = out.row_mut(i);
            for (k, &a) in a_row.iter().enumerate() {
                if a == S::zero() {
                    continue;
                }
                let b_row = other.row(k);
                for (o, &b) in out_row.iter_mut().zip(b_row) {
                    *o = *o + a * b;
                }
            }
        }
        out
    }

    /// `self (n x k) * otherᵀ` where `other` is `(m x k)`.
    pub fn matmul_transpose(&self, other: &Matrix<S>) -> Matrix<S> {
        assert_eq!(self.cols, other.cols, "matmul_transpose shape mismatch");
        let mut out = Matrix::zeros(self.rows, other.rows);
        for i in 0..self.rows {
            let a_row = self.row(i);
            for j in 0..other.rows {
                let b_row = other.row(j);
                let mut acc = S::zero();
                for (&a, &b) in a_row.iter().zip(b_row) {
                    acc = acc + a * b;
                }
                out.set(i, j, acc);
            }
        }
        out
    }

    /// `selfᵀ (k x n) * other (n x m)` where `self` is `(n x k)`.
    pub fn transpose_matmul(&self, other: &Matrix<S>) -> Matrix<S> {
        assert_eq!(self.rows, other.rows, "transpose_matmul shape mismatch");
        let mut out = Matrix::zeros(self.cols, other.cols);
        for r in 0..self.rows {
            let a_row = self.row(r);
            let b_row = other.row(r);
            for (k, &a) in a_row.iter().enumerate() {
                if a == S::zero() {
                    continue;
                }
                let out_row = out.row_mut(k);
                for (o, &b) in out_row.iter_mut().zip(b_row) {
                    *o = *o + a * b;
                }
            }
        }
        out
    }

    /// New matrix holding the listed rows, in order.
    pub fn gather_rows(&self, indices: &[usize]) -> Matrix<S> {
        let mut out = Matrix::zeros(indices.len(), self.cols);
        for (r, &i) in indices.iter().enumerate() {
            out.row_mut(r).copy_from_slice(self.row(i));
        }
        out
    }

    pub fn add_row_bias(&mut self, bias: &[S]) {
        assert_eq!(bias.len(), self.cols, "bias length mismatch");
        for r in 0..self.rows {
            for (v, &b) in self.row_mut(r).iter_mut().zip(bias) {
                *v = *v + b;
            }
        }
    }
}

/// Euclidean norm of a slice.
pub fn l2_norm<S: Scalar>(v: &[S]) -> S {
    v.iter().map(|&x| x * x).fold(S::zero(), |a, b| a + b).sqrt()
}

/// Euclidean distance between two slices.
pub fn l2_distance<S: Scalar>(a: &[S], b: &[S]) -> S {
    a.iter()
        .zip(b)
        .map(|(&x, &y)| (x - y) * (x - y))
        .fold(S::zero(), |acc, v| acc + v)
        .sqrt()
}

/// Solution of a weighted least-squares problem, plus a degeneracy flag.
pub struct WlsSolution<S> {
    pub coefficients: Vec<S>,
    /// True when the normal equations were singular and a ridge-regularized
    /// least-norm solve was substituted.
    pub regularized: bool,
}

/// Solve `min_beta sum_i w_i (y_i - x_i . beta)^2` via the normal equations.
///
/// A singular system is re-solved with an escalating ridge term, which picks
/// the minimum-norm solution in the small-ridge limit; callers surface the
/// `regularized` flag in their reports.
pub fn weighted_least_squares<S: Scalar>(
    design: &Matrix<S>,
    targets: &[S],
    weights: &[S],
) -> Result<WlsSolution<S>> {
    let n = design.rows();
    let p = design.cols();
    if targets.len() != n || weights.len() != n {
        return Err(Error::Shape(format!(
            "WLS: {} rows, {} targets, {} weights",
            n,
            targets.len(),
            weights.len()
        )));
    }

    // Normal equations: (Xᵀ W X) beta = Xᵀ W y.
    let mut xtwx = vec![S::zero(); p * p];
    let mut xtwy = vec![S::zero(); p];
    for i in 0..n {
        let w = weights[i];
        let row = design.row(i);
        for a in 0..p {
            let wa = w * row[a];
            xtwy[a] = xtwy[a] + wa * targets[i];
            for b in a..p {
                xtwx[a * p + b] = xtwx[a * p + b] + wa * row[b];
            }
        }
    }
    for a in 0..p {
        for b in 0..a {
            xtwx[a * p + b] = xtwx[b * p + a];
        }
    }

    let scale = (0..p)
        .map(|a| xtwx[a * p + a])
        .fold(S::zero(), |m, v| if v > m { v } else { m });

    if let Some(beta) = solve_dense(&xtwx, &xtwy, p) {
        return Ok(WlsSolution {
            coefficients: beta,
            regularized: false,
        });
    }

    // Singular: escalate a ridge on the diagonal until the solve succeeds.
    let base = if scale > S::zero() { scale } else { S::one() };
    let mut ridge = base * sc::<S>(1e-12);
    for _ in 0..8 {
        let mut reg = xtwx.clone();
        for a in 0..p {
            reg[a * p + a] = reg[a * p + a] + ridge;
        }
        if let Some(beta) = solve_dense(&reg, &xtwy, p) {
            return Ok(WlsSolution {
                coefficients: beta,
                regularized: true,
            });
        }
        ridge = ridge * sc::<S>(100.0);
    }
    Err(Error::Shape(
        "weighted least squares: system unsolvable even with ridge".into(),
    ))
}

/// Gaussian elimination with partial pivoting; `None` if a pivot collapses.
fn solve_dense<S: Scalar>(a: &[S], b: &[S], p: usize) -> Option<Vec<S>> {
    let mut m = a.to_vec();
    let mut rhs = b.to_vec();
    let tiny = sc::<S>(1e-12)
        * m.iter()
            .fold(S::zero(), |mx, v| if v.abs() > mx { v.abs() } else { mx })
            .max(S::one());

    for col in 0..p {
        let mut pivot = col;
        for r in col + 1..p {
            if m[r * p + col].abs() > m[pivot * p + col].abs() {
                pivot = r;
            }
        }
        if m[pivot * p + col].abs() <= tiny {
            return None;
        }
        if pivot != col {
            for c in 0..p {
                m.swap(col * p + c, pivot * p + c);
            }
            rhs.swap(col, pivot);
        }
        let diag = m[col * p + col];
        for r in col + 1..p {
            let factor = m[r * p + col] / diag;
            if factor == S::zero() {
                continue;
            }
            for c in col..p {
                let v = m[col * p + c];
                m[r * p + c] = m[r * p + c] - factor * v;
            }
            let v = rhs[col];
            rhs[r] = rhs[r] - factor * v;
        }
    }

    let mut x = vec![S::zero(); p];
    for col in (0..p).rev() {
        let mut acc = rhs[col];
        for c in col + 1..p {
            acc = acc - m[col * p + c] * x[c];
        }
        x[col] = acc / m[col * p + col];
    }
    if x.iter().all(|v| v.is_finite()) {
        Some(x)
    } else {
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matmul_small() {
        let a = Matrix::from_rows(&[vec![1.0_f64, 2.0], vec![3.0, 4.0]]).unwrap();
        let b = Matrix::from_rows(&[vec![5.0, 6.0], vec![7.0, 8.0]]).unwrap();
        let c = a.matmul(&b);
        assert_eq!(c.row(0), &[19.0, 22.0]);
        assert_eq!(c.row(1), &[43.0, 50.0]);
    }

    #[test]
    fn transpose_variants_agree() {
        let a = Matrix::from_rows(&[vec![1.0_f64, 2.0, 3.0], vec![4.0, 5.0, 6.0]]).unwrap();
        let b = Matrix::from_rows(&[vec![1.0, 0.5], vec![-1.0, 2.0], vec![0.0, 1.0]]).unwrap();
        let direct = a.matmul(&b);
        // (bᵀ aᵀ)ᵀ == a b
        let bt = Matrix::from_rows(&[vec![1.0, -1.0, 0.0], vec![0.5, 2.0, 1.0]]).unwrap();
        let via_t = a.matmul_transpose(&bt);
        assert_eq!(direct, via_t);
    }

    #[test]
    fn wls_recovers_exact_linear_fit() {
        // y = 2 x0 - x1 + 0.5, weighted arbitrarily.
        let design = Matrix::from_rows(&[
            vec![1.0_f64, 0.0, 1.0],
            vec![0.0, 1.0, 1.0],
            vec![1.0, 1.0, 1.0],
            vec![2.0, -1.0, 1.0],
            vec![0.5, 0.25, 1.0],
        ])
        .unwrap();
        let targets: Vec<f64> = design
            .row_iter()
            .map(|r| 2.0 * r[0] - r[1] + 0.5)
            .collect();
        let weights = vec![1.0, 2.0, 0.5, 3.0, 1.5];
        let sol = weighted_least_squares(&design, &targets, &weights).unwrap();
        assert!(!sol.regularized);
        assert!((sol.coefficients[0] - 2.0).abs() < 1e-10);
        assert!((sol.coefficients[1] + 1.0).abs() < 1e-10);
        assert!((sol.coefficients[2] - 0.5).abs() < 1e-10);
    }

    #[test]
    fn wls_flags_singular_systems() {
        // Two identical columns: rank deficient.
        let design = Matrix::from_rows(&[
            vec![1.0_f64, 1.0],
            vec![2.0, 2.0],
            vec![3.0, 3.0],
        ])
        .unwrap();
        let targets = vec![2.0, 4.0, 6.0];
        let weights = vec![1.0, 1.0, 1.0];
        let sol = weighted_least_squares(&design, &targets, &weights).unwrap();
        assert!(sol.regularized);
        // Ridge splits the coefficient evenly: least-norm solution.
        assert!((sol.coefficients[0] - 1.0).abs() < 1e-4);
        assert!((sol.coefficients[1] - 1.0).abs() < 1e-4);
    }
}
