use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct LsqSolution {
    pub coefficients: DVector<f64>,
    /// Euclidean norm of `design * coefficients - rhs`.
    pub residual_norm: f64,
    /// Singular-value ratio of the column-normalized design matrix.
    pub condition: f64,
}

/// Least squares by SVD of the column-normalized design matrix.
pub fn solve(design: &DMatrix<f64>, rhs: &DVector<f64>) -> Result<LsqSolution> {
    let (rows, cols) = design.shape();
    if rows < cols || cols == 0 {
        return Err(Error::Domain(format!(
            "least squares needs rows >= cols > 0, got {rows}x{cols}"
        )));
    }
    let norms: Vec<f64> = design.column_iter().map(|c| c.norm()).collect();
    if norms.iter().any(|n| !(*n > 0.0) || !n.is_finite()) {
        return Err(Error::IllConditioned(f64::INFINITY));
    }
    let mut scaled = design.clone();
    for (j, n) in norms.iter().enumerate() {
        scaled.column_mut(j).scale_mut(1.0 / n);
    }
    let svd = scaled.svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    let condition = if smin > 0.0 {
        smax / smin
    } else {
        f64::INFINITY
    };
    let y = svd
        .solve(rhs, 0.0)
        .map_err(|e| Error::Domain(format!("svd solve failed: {e}")))?;
    let coefficients = DVector::from_iterator(cols, y.iter().zip(&norms).map(|(y, n)| y / n));
    let residual_norm = (design * &coefficients - rhs).norm();
    Ok(LsqSolution {
        coefficients,
        residual_norm,
        condition,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_line() {
        let design = DMatrix::from_fn(10, 2, |i, j| if j == 0 { 1.0 } else { i as f64 });
        let rhs = DVector::from_fn(10, |i, _| 3.0 - 0.5 * i as f64);
        let s = solve(&design, &rhs).unwrap();
        assert!((s.coefficients[0] - 3.0).abs() < 1e-12);
        assert!((s.coefficients[1] + 0.5).abs() < 1e-12);
        assert!(s.residual_norm < 1e-12);
        assert!(s.condition < 10.0);
    }

    #[test]
    fn badly_scaled_columns_are_fine() {
        let design = DMatrix::from_fn(50, 2, |i, j| {
            let t = 10.0 + i as f64;
            if j == 0 {
                1e-8 / (t * t)
            } else {
                1e6 / (t * t * t)
            }
        });
        let truth = DVector::from_vec(vec![2e8, -3e-6]);
        let rhs = &design * &truth;
        let s = solve(&design, &rhs).unwrap();
        assert!(((s.coefficients[0] - truth[0]) / truth[0]).abs() < 1e-10);
        assert!(((s.coefficients[1] - truth[1]) / truth[1]).abs() < 1e-10);
    }

    #[test]
    fn degenerate_inputs() {
        let design = DMatrix::from_fn(3, 2, |_, j| if j == 0 { 1.0 } else { 0.0 });
        assert!(solve(&design, &DVector::zeros(3)).is_err());
        let design = DMatrix::from_element(1, 2, 1.0);
        assert!(solve(&design, &DVector::zeros(1)).is_err());
    }
}
