//! Core estimation routines: maximum-likelihood logistic regression for
//! propensity scores and weighted least squares for the outcome model.

use crate::data::DesignMatrix;
use crate::linalg::{qr_least_squares, Matrix};
use thiserror::Error;

/// Fitted propensities are clamped to `[PROPENSITY_CLAMP, 1 − PROPENSITY_CLAMP]`
/// so that inverse-probability weights stay finite.
pub const PROPENSITY_CLAMP: f64 = 1e-6;

/// Default cap on IRLS iterations.
pub const DEFAULT_MAX_ITER: usize = 50;

/// Default convergence tolerance on the max absolute coefficient change.
pub const DEFAULT_TOL: f64 = 1e-8;

/// Linear predictors beyond this magnitude with non-shrinking steps indicate
/// (quasi-)separation: the MLE is at infinity.
const SEPARATION_ETA: f64 = 30.0;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("design matrix is rank deficient at column {column} ('{name}')")]
    RankDeficientDesign { column: usize, name: String },
    #[error("negative regression weight {value} at row {row}")]
    NegativeWeight { row: usize, value: f64 },
    #[error("non-finite regression weight {value} at row {row}")]
    NonFiniteWeight { row: usize, value: f64 },
    #[error("{what}: expected length {expected}, got {actual}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        actual: usize,
    },
    #[error("response must contain both outcomes among positively weighted rows")]
    DegenerateResponse,
}

/// Result of a logistic regression fit.
///
/// Non-convergence and separation are reported through the flags rather than
/// as errors: the clamped fit is still usable for weighting, which mirrors
/// how propensity models are treated in practice.
#[derive(Debug, Clone)]
pub struct LogisticFit {
    /// Coefficients in design-column order (intercept first).
    pub coefficients: Vec<f64>,
    /// Inverse-logit of the linear predictor, clamped away from 0 and 1.
    pub fitted_propensity: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
    pub log_likelihood: f64,
    /// Log-likelihood after each IRLS iteration, starting at the null value;
    /// non-decreasing by construction (step-halving enforces ascent).
    pub log_likelihood_path: Vec<f64>,
    pub separation_detected: bool,
}

/// Weighted least-squares solution.
#[derive(Debug, Clone)]
pub struct CoefficientFit {
    pub coefficients: Vec<f64>,
    /// Weighted residual sum of squares at the solution.
    pub residual_sum: f64,
}

#[inline]
fn sigmoid(eta: f64) -> f64 {
    if eta >= 0.0 {
        1.0 / (1.0 + (-eta).exp())
    } else {
        let e = eta.exp();
        e / (1.0 + e)
    }
}

/// log(1 + exp(eta)) without overflow.
#[inline]
fn log1p_exp(eta: f64) -> f64 {
    if eta > 0.0 {
        eta + (-eta).exp().ln_1p()
    } else {
        eta.exp().ln_1p()
    }
}

fn bernoulli_log_likelihood(eta: &[f64], response: &[bool], prior: &[f64]) -> f64 {
    let mut ll = 0.0;
    for i in 0..eta.len() {
        if prior[i] == 0.0 {
            continue;
        }
        let y = if response[i] { 1.0 } else { 0.0 };
        ll += prior[i] * (y * eta[i] - log1p_exp(eta[i]));
    }
    ll
}

/// Fits logistic regression by iteratively reweighted least squares.
///
/// The design must already contain its intercept column. Each Newton step is
/// solved through the same pivoted QR used by [`weighted_least_squares`] and
/// halved until the log-likelihood does not decrease, so the reported
/// likelihood path is monotone.
pub fn fit_logistic(
    design: &DesignMatrix,
    response: &[bool],
    max_iter: usize,
    tol: f64,
) -> Result<LogisticFit, ModelError> {
    let ones = vec![1.0; response.len()];
    fit_logistic_weighted(design, response, &ones, max_iter, tol)
}

/// Logistic regression with per-row prior (frequency) weights. Rows with
/// weight zero are ignored entirely; used when refitting the propensity
/// model on a resampled dataset.
pub fn fit_logistic_weighted(
    design: &DesignMatrix,
    response: &[bool],
    prior_weights: &[f64],
    max_iter: usize,
    tol: f64,
) -> Result<LogisticFit, ModelError> {
    let x = &design.matrix;
    let n = x.n_rows();
    let p = x.n_cols();
    check_len("response", response.len(), n)?;
    check_len("prior weights", prior_weights.len(), n)?;
    for (row, &w) in prior_weights.iter().enumerate() {
        if !w.is_finite() {
            return Err(ModelError::NonFiniteWeight { row, value: w });
        }
        if w < 0.0 {
            return Err(ModelError::NegativeWeight { row, value: w });
        }
    }
    let mut saw = [false, false];
    for i in 0..n {
        if prior_weights[i] > 0.0 {
            saw[response[i] as usize] = true;
        }
    }
    if !(saw[0] && saw[1]) {
        return Err(ModelError::DegenerateResponse);
    }

    let mut beta = vec![0.0; p];
    let mut eta = vec![0.0; n];
    let mut ll = bernoulli_log_likelihood(&eta, response, prior_weights);
    let mut ll_path = vec![ll];

    let mut working = vec![0.0; n];
    let mut irls_weights = vec![0.0; n];
    let mut converged = false;
    let mut separation = false;
    let mut iterations = 0;
    let mut prev_step = f64::INFINITY;

    for iter in 1..=max_iter {
        iterations = iter;
        for i in 0..n {
            let mu = sigmoid(eta[i]);
            let var = (mu * (1.0 - mu)).max(1e-10);
            let y = if response[i] { 1.0 } else { 0.0 };
            working[i] = eta[i] + (y - mu) / var;
            irls_weights[i] = prior_weights[i] * var;
        }
        let proposal = solve_wls(x, &design.col_names, &working, &irls_weights)?;

        // Step-halving keeps the likelihood path monotone even when the raw
        // Newton step overshoots.
        let mut candidate = proposal;
        let mut cand_eta: Vec<f64> = (0..n).map(|i| x.row_dot(i, &candidate)).collect();
        let mut cand_ll = bernoulli_log_likelihood(&cand_eta, response, prior_weights);
        let mut halvings = 0;
        while cand_ll < ll - 1e-12 && halvings < 30 {
            for j in 0..p {
                candidate[j] = 0.5 * (candidate[j] + beta[j]);
            }
            for (i, eta_i) in cand_eta.iter_mut().enumerate() {
                *eta_i = x.row_dot(i, &candidate);
            }
            cand_ll = bernoulli_log_likelihood(&cand_eta, response, prior_weights);
            halvings += 1;
        }

        let step = beta
            .iter()
            .zip(&candidate)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        beta = candidate;
        eta = cand_eta;
        ll = cand_ll;
        ll_path.push(ll);

        let max_eta = eta.iter().fold(0.0f64, |acc, &e| acc.max(e.abs()));
        if step < tol {
            converged = true;
            break;
        }
        if max_eta > SEPARATION_ETA && step >= prev_step * 0.9 {
            // Coefficients are marching to infinity along a separating
            // direction; stop and hand back the clamped fit.
            separation = true;
            break;
        }
        prev_step = step;
    }

    let fitted: Vec<f64> = eta
        .iter()
        .map(|&e| sigmoid(e).clamp(PROPENSITY_CLAMP, 1.0 - PROPENSITY_CLAMP))
        .collect();

    Ok(LogisticFit {
        coefficients: beta,
        fitted_propensity: fitted,
        converged,
        iterations,
        log_likelihood: ll,
        log_likelihood_path: ll_path,
        separation_detected: separation,
    })
}

/// Minimizes `Σ wᵢ (yᵢ − xᵢᵀθ)²`.
///
/// The weighted problem is reduced to an ordinary one by scaling each row by
/// `√wᵢ` and solved by pivoted QR; rank deficiency is a hard error naming the
/// offending column. Rows with zero weight drop out of the fit.
pub fn weighted_least_squares(
    design: &DesignMatrix,
    response: &[f64],
    weights: &[f64],
) -> Result<CoefficientFit, ModelError> {
    let x = &design.matrix;
    let n = x.n_rows();
    check_len("response", response.len(), n)?;
    check_len("weights", weights.len(), n)?;
    for (row, &w) in weights.iter().enumerate() {
        if !w.is_finite() {
            return Err(ModelError::NonFiniteWeight { row, value: w });
        }
        if w < 0.0 {
            return Err(ModelError::NegativeWeight { row, value: w });
        }
    }
    let coefficients = solve_wls(x, &design.col_names, response, weights)?;
    let mut residual_sum = 0.0;
    for i in 0..n {
        let r = response[i] - x.row_dot(i, &coefficients);
        residual_sum += weights[i] * r * r;
    }
    Ok(CoefficientFit {
        coefficients,
        residual_sum,
    })
}

fn solve_wls(
    x: &Matrix,
    col_names: &[String],
    response: &[f64],
    weights: &[f64],
) -> Result<Vec<f64>, ModelError> {
    let n = x.n_rows();
    let p = x.n_cols();
    let mut scaled = Matrix::zeros(n, p);
    let mut rhs = vec![0.0; n];
    for i in 0..n {
        let s = weights[i].sqrt();
        rhs[i] = response[i] * s;
        for j in 0..p {
            scaled.set(i, j, x.get(i, j) * s);
        }
    }
    qr_least_squares(&scaled, &rhs).map_err(|e| ModelError::RankDeficientDesign {
        column: e.column,
        name: col_names
            .get(e.column)
            .cloned()
            .unwrap_or_else(|| format!("#{}", e.column)),
    })
}

fn check_len(what: &'static str, actual: usize, expected: usize) -> Result<(), ModelError> {
    if actual != expected {
        return Err(ModelError::DimensionMismatch {
            what,
            expected,
            actual,
        });
    }
    Ok(())
}
