//! Small dense linear-algebra helpers over row-major `f64` buffers.

use nalgebra::{DMatrix, DVector};

use crate::{Error, Result};

/// `c = alpha * op(a) * op(b) + beta * c` with explicit strides.
///
/// `a` is `m × k`, `b` is `k × n`, `c` is `m × n` (row-major, contiguous).
/// Transposes are expressed by swapping the row/column strides.
#[allow(clippy::too_many_arguments)]
pub fn gemm(
    m: usize,
    k: usize,
    n: usize,
    alpha: f64,
    a: &[f64],
    a_strides: (isize, isize),
    b: &[f64],
    b_strides: (isize, isize),
    beta: f64,
    c: &mut [f64],
) {
    debug_assert!(c.len() >= m * n);
    if m == 0 || n == 0 {
        return;
    }
    // SAFETY: callers pass buffers covering the strided extents; checked in debug.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            alpha,
            a.as_ptr(),
            a_strides.0,
            a_strides.1,
            b.as_ptr(),
            b_strides.0,
            b_strides.1,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

/// Cholesky factor of a symmetric positive definite matrix.
#[derive(Debug, Clone)]
pub struct SpdFactor {
    chol: nalgebra::Cholesky<f64, nalgebra::Dyn>,
    n: usize,
}

impl SpdFactor {
    /// Factorizes the `n × n` row-major matrix `a`.
    pub fn new(a: &[f64], n: usize) -> Result<Self> {
        if a.len() != n * n {
            return Err(Error::DimensionMismatch {
                expected: n * n,
                actual: a.len(),
            });
        }
        let m = DMatrix::from_row_slice(n, n, a);
        let chol = m
            .cholesky()
            .ok_or_else(|| Error::Singular("matrix is not positive definite".into()))?;
        let f = Self { chol, n };
        // Reject numerically singular systems: tiny pivots relative to the largest.
        let diag = f.chol.l_dirty().diagonal();
        let max = diag.iter().cloned().fold(0.0f64, f64::max);
        let min = diag.iter().cloned().fold(f64::INFINITY, f64::min);
        if n > 0 && !(min > max * 1e-7) {
            return Err(Error::Singular(format!(
                "ill-conditioned system (pivot ratio {:.3e})",
                min / max
            )));
        }
        Ok(f)
    }

    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let b = DVector::from_column_slice(rhs);
        self.chol.solve(&b).iter().copied().collect()
    }

    pub fn dim(&self) -> usize {
        self.n
    }
}

/// Factorization of a weighted ridge regression with an unpenalized intercept.
///
/// Fits `y ≈ intercept + design · coef` minimizing
/// `Σ w_i (y_i − intercept − d_i·coef)² + λ‖coef‖²`. The design and weights
/// are fixed at construction, so repeated fits against new targets only cost
/// one matrix-vector product and a triangular solve.
#[derive(Debug, Clone)]
pub struct WeightedRidge {
    n_rows: usize,
    n_cols: usize,
    centered: Vec<f64>,
    weights: Vec<f64>,
    col_means: Vec<f64>,
    weight_sum: f64,
    factor: SpdFactor,
}

impl WeightedRidge {
    pub fn new(
        design: &[f64],
        n_rows: usize,
        n_cols: usize,
        weights: &[f64],
        lambda: f64,
    ) -> Result<Self> {
        if design.len() != n_rows * n_cols || weights.len() != n_rows {
            return Err(Error::invalid("design/weight shape mismatch"));
        }
        let weight_sum: f64 = weights.iter().sum();
        if !(weight_sum > 0.0) {
            return Err(Error::invalid("sample weights sum to zero"));
        }
        let mut col_means = vec![0.0; n_cols];
        for (row, &w) in design.chunks_exact(n_cols).zip(weights) {
            for (m, &v) in col_means.iter_mut().zip(row) {
                *m += w * v;
            }
        }
        for m in &mut col_means {
            *m /= weight_sum;
        }
        let mut centered = design.to_vec();
        for row in centered.chunks_exact_mut(n_cols) {
            for (v, m) in row.iter_mut().zip(&col_means) {
                *v -= m;
            }
        }
        // Gram = Cᵀ W C + λ I
        let mut scaled = centered.clone();
        for (row, &w) in scaled.chunks_exact_mut(n_cols).zip(weights) {
            for v in row {
                *v *= w;
            }
        }
        let mut gram = vec![0.0; n_cols * n_cols];
        gemm(
            n_cols,
            n_rows,
            n_cols,
            1.0,
            &centered,
            (1, n_cols as isize),
            &scaled,
            (n_cols as isize, 1),
            0.0,
            &mut gram,
        );
        for i in 0..n_cols {
            gram[i * n_cols + i] += lambda;
        }
        let factor = SpdFactor::new(&gram, n_cols)?;
        Ok(Self {
            n_rows,
            n_cols,
            centered,
            weights: weights.to_vec(),
            col_means,
            weight_sum,
            factor,
        })
    }

    /// Returns `(coefficients, intercept)` for targets `y`.
    pub fn fit(&self, y: &[f64]) -> (Vec<f64>, f64) {
        assert_eq!(y.len(), self.n_rows);
        let y_mean = y.iter().zip(&self.weights).map(|(v, w)| v * w).sum::<f64>() / self.weight_sum;
        let mut rhs = vec![0.0; self.n_cols];
        for ((row, &w), &yi) in self
            .centered
            .chunks_exact(self.n_cols)
            .zip(&self.weights)
            .zip(y)
        {
            let s = w * (yi - y_mean);
            for (r, &v) in rhs.iter_mut().zip(row) {
                *r += s * v;
            }
        }
        let coef = self.factor.solve(&rhs);
        let intercept = y_mean
            - coef
                .iter()
                .zip(&self.col_means)
                .map(|(c, m)| c * m)
                .sum::<f64>();
        (coef, intercept)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gemm_matches_naive() {
        let a = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0]; // 2×3
        let b = [1.0, 0.0, 0.0, 1.0, 1.0, 1.0]; // 3×2
        let mut c = [0.0; 4];
        gemm(2, 3, 2, 1.0, &a, (3, 1), &b, (2, 1), 0.0, &mut c);
        assert_eq!(c, [4.0, 5.0, 10.0, 11.0]);
        // aᵀ·a, 3×3
        let mut g = [0.0; 9];
        gemm(3, 2, 3, 1.0, &a, (1, 3), &a, (3, 1), 0.0, &mut g);
        assert_eq!(g, [17.0, 22.0, 27.0, 22.0, 29.0, 36.0, 27.0, 36.0, 45.0]);
    }

    #[test]
    fn ridge_recovers_exact_line() {
        let design = [0.0, 1.0, 2.0, 3.0];
        let y = [1.0, 3.0, 5.0, 7.0];
        let r = WeightedRidge::new(&design, 4, 1, &[1.0, 2.0, 1.0, 0.5], 0.0).unwrap();
        let (coef, b) = r.fit(&y);
        assert!((coef[0] - 2.0).abs() < 1e-12);
        assert!((b - 1.0).abs() < 1e-12);
    }

    #[test]
    fn singular_design_is_reported() {
        let design = [1.0, 1.0, 1.0];
        assert!(matches!(
            WeightedRidge::new(&design, 3, 1, &[1.0; 3], 0.0),
            Err(Error::Singular(_))
        ));
    }
}
