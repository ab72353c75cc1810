//! Self-contained numerical kernels: least squares, logistic maximum
//! likelihood, min-cost bipartite assignment, the Mahalanobis metric, and
//! reproducible random variates. Everything here is a pure function; random
//! state is always passed in explicitly.

pub mod assignment;
pub mod logistic;
pub mod matrix;
pub mod ols;
pub mod random;
pub mod special;

use serde::Serialize;

use crate::error::{Error, Result};
use matrix::{Cholesky, Matrix};

pub use assignment::{assignment_min_cost, AssignmentResult};
pub use logistic::{logistic_newton, lrt_compare, LrtResult, DEFAULT_MAX_ITER, DEFAULT_TOL};
pub use ols::{solve_ols, weighted_ols, DesignMatrix, FitResult};

/// Labeled covariance matrix over covariates; must be positive definite for
/// inversion-based uses.
#[derive(Debug, Clone)]
pub struct CovarianceMatrix {
    pub labels: Vec<String>,
    pub matrix: Matrix,
}

impl CovarianceMatrix {
    /// Sample covariance (ddof = 1) of the given columns.
    pub fn estimate(labels: &[&str], columns: &[&[f64]]) -> Result<Self> {
        if columns.is_empty() || columns[0].len() < 2 {
            return Err(Error::Domain("need at least two observations".into()));
        }
        let n = columns[0].len();
        let p = columns.len();
        let means: Vec<f64> = columns.iter().map(|c| c.iter().sum::<f64>() / n as f64).collect();
        let mut m = Matrix::zeros(p, p);
        for i in 0..p {
            for j in i..p {
                let mut s = 0.0;
                for r in 0..n {
                    s += (columns[i][r] - means[i]) * (columns[j][r] - means[j]);
                }
                let v = s / (n - 1) as f64;
                m[(i, j)] = v;
                m[(j, i)] = v;
            }
        }
        Ok(CovarianceMatrix {
            labels: labels.iter().map(|s| s.to_string()).collect(),
            matrix: m,
        })
    }

    pub fn inverse(&self) -> Result<Matrix> {
        Ok(Cholesky::decompose(&self.matrix)
            .map_err(|_| Error::SingularMatrix("covariance matrix is singular".into()))?
            .inverse())
    }
}

/// Squared Mahalanobis distance (u − v)ᵀ S⁻¹ (u − v) with a pre-inverted S.
pub fn mahalanobis_sq_with_inverse(u: &[f64], v: &[f64], s_inv: &Matrix) -> f64 {
    debug_assert_eq!(u.len(), v.len());
    debug_assert_eq!(s_inv.rows(), u.len());
    let d: Vec<f64> = u.iter().zip(v).map(|(a, b)| a - b).collect();
    let sd = s_inv.matvec(&d);
    d.iter().zip(&sd).map(|(a, b)| a * b).sum()
}

/// Squared Mahalanobis distance, inverting S on the fly.
pub fn mahalanobis_sq(u: &[f64], v: &[f64], s: &CovarianceMatrix) -> Result<f64> {
    if u.len() != v.len() || u.len() != s.matrix.rows() {
        return Err(Error::Domain("dimension mismatch".into()));
    }
    Ok(mahalanobis_sq_with_inverse(u, v, &s.inverse()?))
}

/// Welch two-sample t: statistic, Satterthwaite df, standard error.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct WelchT {
    pub estimate: f64,
    pub se: f64,
    pub t: f64,
    pub df: f64,
}

pub fn welch_t(treated: &[f64], control: &[f64]) -> Result<WelchT> {
    if treated.len() < 2 {
        return Err(Error::VarianceUndefined(treated.len()));
    }
    if control.len() < 2 {
        return Err(Error::VarianceUndefined(control.len()));
    }
    let (nt, nc) = (treated.len() as f64, control.len() as f64);
    let mt = treated.iter().sum::<f64>() / nt;
    let mc = control.iter().sum::<f64>() / nc;
    let vt = treated.iter().map(|x| (x - mt) * (x - mt)).sum::<f64>() / (nt - 1.0);
    let vc = control.iter().map(|x| (x - mc) * (x - mc)).sum::<f64>() / (nc - 1.0);
    let se2 = vt / nt + vc / nc;
    let se = se2.sqrt();
    let df = se2 * se2 / ((vt / nt).powi(2) / (nt - 1.0) + (vc / nc).powi(2) / (nc - 1.0));
    let estimate = mt - mc;
    Ok(WelchT {
        estimate,
        se,
        t: if se > 0.0 { estimate / se } else { 0.0 },
        df,
    })
}

/// Sample mean.
pub fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Sample standard deviation (ddof = 1).
pub fn sample_sd(x: &[f64]) -> f64 {
    let m = mean(x);
    (x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (x.len() as f64 - 1.0)).sqrt()
}
