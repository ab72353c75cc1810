//! Least-squares fitting on a labeled design matrix, plain and row-weighted.

use serde::Serialize;

use super::matrix::{Cholesky, Matrix};
use crate::error::{Error, Result};

/// Condition estimate above which a fit is flagged as ill-conditioned.
pub const CONDITION_WARN: f64 = 1e8;

/// Design matrix with an explicit constant column and column labels.
#[derive(Debug, Clone)]
pub struct DesignMatrix {
    matrix: Matrix,
    labels: Vec<String>,
}

impl DesignMatrix {
    /// Prepend the constant column to the given covariate columns.
    pub fn with_intercept(columns: &[(&str, &[f64])]) -> Self {
        assert!(!columns.is_empty() || !columns.is_empty());
        let n = columns.first().map(|(_, c)| c.len()).unwrap_or(0);
        let ones = vec![1.0; n];
        let mut cols: Vec<&[f64]> = vec![&ones];
        let mut labels = vec!["const".to_string()];
        for (name, col) in columns {
            cols.push(col);
            labels.push((*name).to_string());
        }
        DesignMatrix {
            matrix: Matrix::from_columns(&cols),
            labels,
        }
    }

    /// Intercept-only design for n rows.
    pub fn intercept_only(n: usize) -> Self {
        let ones = vec![1.0; n];
        DesignMatrix {
            matrix: Matrix::from_columns(&[&ones]),
            labels: vec!["const".to_string()],
        }
    }

    pub fn matrix(&self) -> &Matrix {
        &self.matrix
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn n(&self) -> usize {
        self.matrix.rows()
    }

    pub fn p(&self) -> usize {
        self.matrix.cols()
    }

    fn validate_for_fit(&self, y_len: usize) -> Result<()> {
        if !self.matrix.is_finite() {
            return Err(Error::Domain("non-finite entry in design matrix".into()));
        }
        if self.n() != y_len {
            return Err(Error::Domain(format!(
                "design has {} rows but response has {}",
                self.n(),
                y_len
            )));
        }
        if self.n() <= self.p() {
            return Err(Error::Domain(format!(
                "need n > p for a fit (n = {}, p = {})",
                self.n(),
                self.p()
            )));
        }
        Ok(())
    }
}

/// Coefficients plus the pieces every downstream consumer needs.
#[derive(Debug, Clone, Serialize)]
pub struct FitResult {
    pub labels: Vec<String>,
    pub coefficients: Vec<f64>,
    /// Coefficient covariance: (XᵀX)⁻¹ s² for least squares, (XᵀWX)⁻¹ at the
    /// optimum for logistic fits.
    #[serde(skip)]
    pub covariance: Matrix,
    /// Residual mean square s² (least squares only).
    pub residual_variance: Option<f64>,
    /// Maximized Bernoulli log-likelihood (logistic only).
    pub log_likelihood: Option<f64>,
    pub df: usize,
    pub condition_estimate: f64,
}

impl FitResult {
    pub fn coefficient_se(&self, k: usize) -> f64 {
        self.covariance[(k, k)].sqrt()
    }

    pub fn ill_conditioned(&self) -> bool {
        self.condition_estimate > CONDITION_WARN
    }
}

/// Ordinary least squares via the normal equations with a Cholesky solve.
pub fn solve_ols(x: &DesignMatrix, y: &[f64]) -> Result<FitResult> {
    weighted_ols(x, y, None)
}

/// Weighted least squares; `weights = None` reduces to OLS. The residual
/// variance is the weighted residual mean square over n − p.
pub fn weighted_ols(x: &DesignMatrix, y: &[f64], weights: Option<&[f64]>) -> Result<FitResult> {
    x.validate_for_fit(y.len())?;
    if let Some(w) = weights {
        assert_eq!(w.len(), y.len());
        if w.iter().any(|&v| !v.is_finite() || v < 0.0) {
            return Err(Error::Domain("weights must be finite and nonnegative".into()));
        }
    }
    let m = x.matrix();
    let (gram, xty) = match weights {
        None => (m.gram(), m.t_matvec(y)),
        Some(w) => {
            let wy: Vec<f64> = y.iter().zip(w).map(|(a, b)| a * b).collect();
            (m.weighted_gram(w), m.t_matvec(&wy))
        }
    };
    let chol = Cholesky::decompose(&gram)
        .map_err(|_| Error::SingularMatrix("design matrix is rank deficient".into()))?;
    let beta = chol.solve(&xty);
    let fitted = m.matvec(&beta);
    let df = x.n() - x.p();
    let mut rss = 0.0;
    for i in 0..x.n() {
        let r = y[i] - fitted[i];
        rss += weights.map_or(1.0, |w| w[i]) * r * r;
    }
    let s2 = rss / df as f64;
    let inv = chol.inverse();
    let mut cov = inv.clone();
    for i in 0..cov.rows() {
        for j in 0..cov.cols() {
            cov[(i, j)] *= s2;
        }
    }
    Ok(FitResult {
        labels: x.labels().to_vec(),
        coefficients: beta,
        covariance: cov,
        residual_variance: Some(s2),
        log_likelihood: None,
        df,
        condition_estimate: chol.condition_estimate(),
    })
}
