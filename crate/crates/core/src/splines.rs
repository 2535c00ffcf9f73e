//! Clamped B-spline bases and the k-th order difference penalty.

use std::sync::atomic::{AtomicUsize, Ordering};

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// A clamped B-spline basis on `[lo, hi]` with equally spaced interior knots.
#[derive(Debug)]
pub struct SplineBasis {
    knots: Vec<f64>,
    degree: usize,
    b: usize,
    k: usize,
    q: DMatrix<f64>,
    clamped: AtomicUsize,
}

impl Clone for SplineBasis {
    fn clone(&self) -> Self {
        SplineBasis {
            knots: self.knots.clone(),
            degree: self.degree,
            b: self.b,
            k: self.k,
            q: self.q.clone(),
            clamped: AtomicUsize::new(self.clamped.load(Ordering::Relaxed)),
        }
    }
}

impl SplineBasis {
    /// Builds `b` basis functions of the given degree spanning the range of
    /// `x_values`, with a k-th order difference penalty.
    pub fn new(x_values: &[f64], b: usize, degree: usize, k: usize) -> Result<Self> {
        let (lo, hi) = x_values
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)));
        Self::on_interval(lo, hi, b, degree, k)
    }

    pub fn on_interval(lo: f64, hi: f64, b: usize, degree: usize, k: usize) -> Result<Self> {
        if degree == 0 || b <= degree {
            return Err(Error::domain(format!(
                "need b > degree >= 1, got b={b}, degree={degree}"
            )));
        }
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::domain(format!("degenerate knot span [{lo}, {hi}]")));
        }
        let q = penalty_matrix(b, k)?;
        let n_interior = b - degree - 1;
        let step = (hi - lo) / (n_interior + 1) as f64;
        let mut knots = Vec::with_capacity(b + degree + 1);
        knots.extend(std::iter::repeat_n(lo, degree + 1));
        knots.extend((1..=n_interior).map(|j| lo + step * j as f64));
        knots.extend(std::iter::repeat_n(hi, degree + 1));
        Ok(SplineBasis {
            knots,
            degree,
            b,
            k,
            q,
            clamped: AtomicUsize::new(0),
        })
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn dim(&self) -> usize {
        self.b
    }

    pub fn penalty_order(&self) -> usize {
        self.k
    }

    pub fn penalty(&self) -> &DMatrix<f64> {
        &self.q
    }

    pub fn span(&self) -> (f64, f64) {
        (self.knots[0], self.knots[self.knots.len() - 1])
    }

    /// Number of evaluations so far whose argument fell outside the span.
    pub fn clamp_count(&self) -> usize {
        self.clamped.load(Ordering::Relaxed)
    }

    /// Basis row at `x`; arguments outside the span are clamped to it.
    pub fn eval_row(&self, x: f64) -> Vec<f64> {
        let mut row = vec![0.0; self.b];
        self.eval_into(x, &mut row);
        row
    }

    pub fn eval_into(&self, x: f64, row: &mut [f64]) {
        debug_assert_eq!(row.len(), self.b);
        let (lo, hi) = self.span();
        let x = if x < lo || x > hi {
            self.clamped.fetch_add(1, Ordering::Relaxed);
            x.clamp(lo, hi)
        } else {
            x
        };
        row.fill(0.0);
        let p = self.degree;
        let t = &self.knots;
        // Knot span s with t[s] <= x < t[s + 1]; the right end belongs to the last span.
        let s = if x >= hi {
            self.b - 1
        } else {
            let upper = t.partition_point(|&kn| kn <= x);
            (upper - 1).clamp(p, self.b - 1)
        };

        let mut n = [0.0f64; 16];
        let mut left = [0.0f64; 16];
        let mut right = [0.0f64; 16];
        assert!(p < 16, "degree too large");
        n[0] = 1.0;
        for j in 1..=p {
            left[j] = x - t[s + 1 - j];
            right[j] = t[s + j] - x;
            let mut saved = 0.0;
            for r in 0..j {
                let denom = right[r + 1] + left[j - r];
                let temp = if denom == 0.0 { 0.0 } else { n[r] / denom };
                n[r] = saved + right[r + 1] * temp;
                saved = left[j - r] * temp;
            }
            n[j] = saved;
        }
        row[s - p..=s].copy_from_slice(&n[..=p]);
    }

    /// Design matrix with one basis row per entry of `xs`.
    pub fn design(&self, xs: &[f64]) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(xs.len(), self.b);
        let mut row = vec![0.0; self.b];
        for (i, &x) in xs.iter().enumerate() {
            self.eval_into(x, &mut row);
            for (j, v) in row.iter().enumerate() {
                m[(i, j)] = *v;
            }
        }
        m
    }
}

/// Basis with the default penalty order `degree + 1` (k = 4 for cubic splines).
pub fn build_basis(x_values: &[f64], b: usize, degree: usize) -> Result<SplineBasis> {
    SplineBasis::new(x_values, b, degree, degree + 1)
}

pub fn eval_row(basis: &SplineBasis, x: f64) -> Vec<f64> {
    basis.eval_row(x)
}

/// The `(b - k) x b` matrix of k-th order finite differences.
pub fn difference_matrix(b: usize, k: usize) -> Result<DMatrix<f64>> {
    if k == 0 || k >= b {
        return Err(Error::domain(format!("penalty order must satisfy 0 < k < b, got k={k}, b={b}")));
    }
    // Row stencil: binomial coefficients with alternating sign, ending in +1.
    let mut stencil = vec![1.0f64];
    for _ in 0..k {
        let mut next = vec![0.0; stencil.len() + 1];
        for (i, c) in stencil.iter().enumerate() {
            next[i] -= c;
            next[i + 1] += c;
        }
        stencil = next;
    }
    let mut d = DMatrix::zeros(b - k, b);
    for r in 0..b - k {
        for (j, c) in stencil.iter().enumerate() {
            d[(r, r + j)] = *c;
        }
    }
    Ok(d)
}

/// `Q = D'D` for the k-th order difference matrix `D`.
pub fn penalty_matrix(b: usize, k: usize) -> Result<DMatrix<f64>> {
    let d = difference_matrix(b, k)?;
    Ok(d.transpose() * d)
}

/// Numerical rank of a symmetric non-negative definite matrix: eigenvalues
/// above `1e-9` times the largest.
pub fn symmetric_rank(q: &DMatrix<f64>) -> usize {
    let eig = q.clone().symmetric_eigen();
    let max = eig.eigenvalues.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    eig.eigenvalues.iter().filter(|v| **v > 1e-9 * max).count()
}

/// Solves `(B'B / s_y^2 + Q / s_beta^2) beta = B'y / s_y^2`.
pub fn penalized_fit(
    design: &DMatrix<f64>,
    y: &[f64],
    q: &DMatrix<f64>,
    sigma_y2: f64,
    sigma_beta2: f64,
) -> Result<DVector<f64>> {
    if design.nrows() != y.len() || q.nrows() != design.ncols() {
        return Err(Error::domain("penalized_fit: dimension mismatch"));
    }
    let yv = DVector::from_column_slice(y);
    let lhs = design.transpose() * design / sigma_y2 + q / sigma_beta2;
    let rhs = design.transpose() * yv / sigma_y2;
    lhs.cholesky()
        .map(|c| c.solve(&rhs))
        .ok_or_else(|| Error::Numerical {
            index: 0,
            message: "penalized normal equations are not positive definite".into(),
        })
}

/// Ordinary least squares via the normal equations.
pub fn least_squares(design: &DMatrix<f64>, y: &[f64]) -> Result<DVector<f64>> {
    let b = design.ncols();
    penalized_fit(design, y, &DMatrix::zeros(b, b), 1.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn penalty_first_order_by_hand() {
        let q = penalty_matrix(3, 1).unwrap();
        let expected = DMatrix::from_row_slice(3, 3, &[1.0, -1.0, 0.0, -1.0, 2.0, -1.0, 0.0, -1.0, 1.0]);
        assert_eq!(q, expected);
        let d2 = difference_matrix(4, 2).unwrap();
        assert_eq!(d2.row(0).iter().copied().collect::<Vec<_>>(), vec![1.0, -2.0, 1.0, 0.0]);
    }

    #[test]
    fn penalty_rank_and_kernel() {
        for (b, k) in [(8, 4), (10, 2), (6, 1), (12, 3)] {
            let q = penalty_matrix(b, k).unwrap();
            assert_eq!(symmetric_rank(&q), b - k);
            let ones = DVector::from_element(b, 1.0);
            assert!((&q * &ones).amax() < 1e-12);
            // Polynomials of degree < k lie in the kernel.
            let lin = DVector::from_fn(b, |i, _| (i as f64).powi(k as i32 - 1));
            assert!((&q * lin).amax() < 1e-8);
        }
        assert!(penalty_matrix(4, 4).is_err());
        assert!(penalty_matrix(4, 0).is_err());
    }

    #[test]
    fn basis_row_basics() {
        let basis = build_basis(&[0.0, 0.7, 2.0], 8, 3).unwrap();
        assert_eq!(basis.dim(), 8);
        let row = basis.eval_row(1.0);
        assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-14);
        assert!(row.iter().filter(|v| **v != 0.0).count() <= 4);
        let first = basis.eval_row(0.0);
        assert_eq!(first[0], 1.0);
        assert!(first[1..].iter().all(|v| *v == 0.0));
        let last = basis.eval_row(2.0);
        assert_eq!(last[7], 1.0);
    }

    #[test]
    fn symmetric_span_gives_symmetric_midpoint_row() {
        let basis = SplineBasis::on_interval(-1.0, 1.0, 8, 3, 4).unwrap();
        let row = basis.eval_row(0.0);
        for i in 0..8 {
            assert!((row[i] - row[7 - i]).abs() < 1e-14);
        }
    }

    #[test]
    fn out_of_span_is_clamped_and_counted() {
        let basis = SplineBasis::on_interval(0.2, 1.8, 8, 3, 4).unwrap();
        assert_eq!(basis.eval_row(0.0), basis.eval_row(0.2));
        assert_eq!(basis.eval_row(2.0), basis.eval_row(1.8));
        assert_eq!(basis.clamp_count(), 2);
    }

    #[test]
    fn rejects_bad_arguments() {
        assert!(build_basis(&[1.0, 1.0], 8, 3).is_err());
        assert!(build_basis(&[0.0, 1.0], 3, 3).is_err());
    }
}
