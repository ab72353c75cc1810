//! Logistic maximum likelihood by Newton-Raphson with step halving, plus the
//! likelihood-ratio comparison used for model selection.

use serde::Serialize;

use super::matrix::Cholesky;
use super::ols::{DesignMatrix, FitResult};
use super::special::chi_square_sf;
use crate::error::{Error, Result};

pub const DEFAULT_TOL: f64 = 1e-8;
pub const DEFAULT_MAX_ITER: usize = 50;

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

fn log_likelihood(x: &DesignMatrix, w: &[f64], beta: &[f64]) -> f64 {
    let eta = x.matrix().matvec(beta);
    let mut ll = 0.0;
    for i in 0..w.len() {
        // log(p) = -log(1+e^-eta), log(1-p) = -log(1+e^eta); stable via ln_1p
        let e = eta[i];
        ll += if w[i] > 0.5 {
            -(-e).exp().ln_1p()
        } else {
            -e.exp().ln_1p()
        };
    }
    ll
}

/// Fit w ~ Bernoulli(sigmoid(Xβ)) by Newton-Raphson on the score.
///
/// Converged when the max absolute score entry drops below `tol`. Likelihood
/// decreases trigger step halving. Monotone coefficient blow-up with fitted
/// probabilities pinned at the data labels is reported as separation.
pub fn logistic_newton(
    x: &DesignMatrix,
    w: &[f64],
    tol: f64,
    max_iter: usize,
) -> Result<FitResult> {
    let n = x.n();
    if w.len() != n {
        return Err(Error::Domain("response length mismatch".into()));
    }
    if w.iter().any(|&v| v != 0.0 && v != 1.0) {
        return Err(Error::Domain("logistic response must be binary 0/1".into()));
    }
    let n_ones = w.iter().filter(|&&v| v == 1.0).count();
    if n_ones == 0 || n_ones == n {
        return Err(Error::Domain("both classes must be present".into()));
    }

    let m = x.matrix();
    let p = x.p();
    let mut beta = vec![0.0; p];
    let mut ll = log_likelihood(x, w, &beta);
    let mut last_norm = f64::INFINITY;
    let mut growing = 0usize;

    for iter in 0..max_iter {
        let eta = m.matvec(&beta);
        let probs: Vec<f64> = eta.iter().map(|&e| sigmoid(e)).collect();
        let resid: Vec<f64> = w.iter().zip(&probs).map(|(a, b)| a - b).collect();
        let score = m.t_matvec(&resid);
        let score_max = score.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
        if score_max < tol {
            let weights: Vec<f64> = probs.iter().map(|&q| q * (1.0 - q)).collect();
            let info = m.weighted_gram(&weights);
            let cov_chol = Cholesky::decompose(&info)
                .map_err(|_| Error::SingularMatrix("information matrix singular".into()))?;
            return Ok(FitResult {
                labels: x.labels().to_vec(),
                coefficients: beta,
                covariance: cov_chol.inverse(),
                residual_variance: None,
                log_likelihood: Some(ll),
                df: n - p,
                condition_estimate: cov_chol.condition_estimate(),
            });
        }

        let weights: Vec<f64> = probs.iter().map(|&q| (q * (1.0 - q)).max(1e-12)).collect();
        let info = m.weighted_gram(&weights);
        let chol = Cholesky::decompose(&info)
            .map_err(|_| Error::SingularMatrix("information matrix singular".into()))?;
        let step = chol.solve(&score);

        // step halving on likelihood decrease
        let mut factor = 1.0;
        let mut candidate;
        let mut cand_ll;
        loop {
            candidate = beta
                .iter()
                .zip(&step)
                .map(|(b, s)| b + factor * s)
                .collect::<Vec<f64>>();
            cand_ll = log_likelihood(x, w, &candidate);
            if cand_ll >= ll - 1e-12 || factor < 1e-8 {
                break;
            }
            factor *= 0.5;
        }
        beta = candidate;
        ll = cand_ll;

        let norm = beta.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
        growing = if norm > last_norm { growing + 1 } else { 0 };
        last_norm = norm;

        // separation: coefficients diverging monotonically while every fitted
        // probability approaches its observed label
        if norm > 30.0 && growing >= 3 {
            let eta = m.matvec(&beta);
            let pinned = w.iter().zip(&eta).all(|(&wi, &e)| {
                let q = sigmoid(e);
                if wi > 0.5 {
                    q > 1.0 - 1e-4
                } else {
                    q < 1e-4
                }
            });
            if pinned {
                return Err(Error::Separation);
            }
        }
        let _ = iter;
    }
    Err(Error::Divergence(max_iter))
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct LrtResult {
    pub statistic: f64,
    pub p_value: f64,
    pub df: usize,
}

/// Likelihood-ratio comparison of a reduced model nested in a full model.
pub fn lrt_compare(full: &FitResult, reduced: &FitResult, df_diff: usize) -> Result<LrtResult> {
    if df_diff == 0 {
        return Err(Error::Domain("df_diff must be at least 1".into()));
    }
    let (lf, lr) = match (full.log_likelihood, reduced.log_likelihood) {
        (Some(a), Some(b)) => (a, b),
        _ => {
            return Err(Error::Domain(
                "likelihood-ratio comparison needs likelihood-based fits".into(),
            ))
        }
    };
    let statistic = 2.0 * (lf - lr);
    if statistic < -1e-8 {
        return Err(Error::NestingViolation(statistic));
    }
    let statistic = statistic.max(0.0);
    Ok(LrtResult {
        statistic,
        p_value: chi_square_sf(statistic, df_diff as f64),
        df: df_diff,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn no_signal_fit_recovers_logit_of_mean() {
        // x independent of w, both classes balanced
        let x1: Vec<f64> = (0..40).map(|i| ((i * 13) % 7) as f64).collect();
        let w: Vec<f64> = (0..40).map(|i| (i % 2) as f64).collect();
        let x = DesignMatrix::with_intercept(&[("x1", &x1)]);
        let fit = logistic_newton(&x, &w, DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap();
        // slope near zero, intercept near logit(0.5) = 0
        assert!(fit.coefficients[1].abs() < 0.2);
        assert!(fit.coefficients[0].abs() < 0.6);
    }

    #[test]
    fn perfectly_separable_data_errors() {
        let x1: Vec<f64> = (-10..10).map(|i| i as f64 + 0.5).collect();
        let w: Vec<f64> = x1.iter().map(|&v| if v > 0.0 { 1.0 } else { 0.0 }).collect();
        let x = DesignMatrix::with_intercept(&[("x1", &x1)]);
        match logistic_newton(&x, &w, DEFAULT_TOL, 200) {
            Err(Error::Separation) | Err(Error::Divergence(_)) => {}
            other => panic!("expected separation, got {other:?}"),
        }
    }

    #[test]
    fn score_vanishes_at_convergence() {
        let x1: Vec<f64> = (0..60).map(|i| (i as f64 / 9.0).sin() * 2.0).collect();
        let w: Vec<f64> = (0..60)
            .map(|i| if (i * 29) % 97 < 40 { 1.0 } else { 0.0 })
            .collect();
        let x = DesignMatrix::with_intercept(&[("x1", &x1)]);
        let fit = logistic_newton(&x, &w, 1e-10, 100).unwrap();
        let eta = x.matrix().matvec(&fit.coefficients);
        let resid: Vec<f64> = w
            .iter()
            .zip(&eta)
            .map(|(&wi, &e)| wi - 1.0 / (1.0 + (-e).exp()))
            .collect();
        let score = x.matrix().t_matvec(&resid);
        for s in score {
            assert!(s.abs() < 1e-10);
        }
    }

    #[test]
    fn identical_models_give_zero_statistic() {
        let x1: Vec<f64> = (0..30).map(|i| (i % 5) as f64).collect();
        let w: Vec<f64> = (0..30).map(|i| ((i * 7) % 3 == 0) as u8 as f64).collect();
        let x = DesignMatrix::with_intercept(&[("x1", &x1)]);
        let fit = logistic_newton(&x, &w, DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap();
        let lrt = lrt_compare(&fit, &fit, 1).unwrap();
        assert!(lrt.statistic.abs() < 1e-9);
        assert!((lrt.p_value - 1.0).abs() < 1e-9);
    }
}
