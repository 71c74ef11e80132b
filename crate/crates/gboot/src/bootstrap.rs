//! The three resampling engines and bootstrap summarization.
//!
//! All three procedures resample within the treated and control groups by
//! drawing occurrence counts from a multinomial distribution, then solve one
//! weighted least-squares problem per replicate over the *original* row set,
//! giving each row the weight `count × occurrence weight` (zero for rows not
//! drawn). They differ in the sampling probabilities and occurrence weights:
//!
//! * **OB** (ordinary): uniform sampling probabilities `1/n_g`; occurrence
//!   weight is the row's IPTW weight.
//! * **TB** (trimmed): as OB, with the IPTW weights clamped at a threshold
//!   before entering the objective.
//! * **GB** (generalized): sampling probabilities proportional to the IPTW
//!   weights within each group; occurrence weight `1/(n_g · prob)`, the
//!   group-normalized (stabilized) IPTW weight.
//!
//! Replicates draw their RNG streams from `master_seed` and the replicate
//! index (see [`crate::rng`]), so results are bit-identical under any degree
//! of parallelism.

use crate::data::{build_design, DataError, Dataset, DesignMatrix, Term};
use crate::model::{
    fit_logistic, fit_logistic_weighted, weighted_least_squares, ModelError, DEFAULT_MAX_ITER,
    DEFAULT_TOL,
};
use crate::rng::SeedStream;
use crate::stat;
use crate::weights::{
    gb_sampling_probabilities, iptw_weights, trim_weights, SamplingProbabilities, WeightError,
    DEFAULT_OVERSIZED_THRESHOLD,
};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Normal critical value used for all 95% intervals.
pub const CI_MULTIPLIER: f64 = 1.96;

#[derive(Debug, Error)]
pub enum BootstrapError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Weight(#[from] WeightError),
    #[error("{failed} of {replicates} replicates degenerate (more than 10% allowed)")]
    TooManyFailures { failed: usize, replicates: usize },
    #[error("invalid bootstrap configuration: {0}")]
    InvalidConfig(String),
}

/// Bootstrap procedure selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "GB")]
    Gb,
    #[serde(rename = "OB")]
    Ob,
    #[serde(rename = "TB")]
    Tb,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Gb, Method::Ob, Method::Tb];

    pub fn label(&self) -> &'static str {
        match self {
            Method::Gb => "GB",
            Method::Ob => "OB",
            Method::Tb => "TB",
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

impl std::str::FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "gb" => Ok(Method::Gb),
            "ob" => Ok(Method::Ob),
            "tb" => Ok(Method::Tb),
            other => Err(format!("unknown bootstrap method '{other}'")),
        }
    }
}

/// Configuration of one bootstrap run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BootstrapConfig {
    pub method: Method,
    /// Number of replicates B.
    pub replicates: usize,
    /// Trim threshold for the TB procedure.
    pub trim_threshold: f64,
    /// Refit the propensity model on each resample before weighting. Off by
    /// default: the procedures compute weights from the original-sample fit.
    pub refit_propensity: bool,
    pub master_seed: u64,
    #[serde(default = "default_max_iter")]
    pub irls_max_iter: usize,
    #[serde(default = "default_tol")]
    pub irls_tol: f64,
}

fn default_max_iter() -> usize {
    DEFAULT_MAX_ITER
}

fn default_tol() -> f64 {
    DEFAULT_TOL
}

impl BootstrapConfig {
    pub fn new(method: Method, replicates: usize, master_seed: u64) -> Self {
        BootstrapConfig {
            method,
            replicates,
            trim_threshold: DEFAULT_OVERSIZED_THRESHOLD,
            refit_propensity: false,
            master_seed,
            irls_max_iter: DEFAULT_MAX_ITER,
            irls_tol: DEFAULT_TOL,
        }
    }

    fn validate(&self) -> Result<(), BootstrapError> {
        if self.replicates < 2 {
            return Err(BootstrapError::InvalidConfig(format!(
                "need at least 2 replicates, got {}",
                self.replicates
            )));
        }
        if self.method == Method::Tb && (self.trim_threshold.is_nan() || self.trim_threshold <= 0.0)
        {
            return Err(BootstrapError::InvalidConfig(format!(
                "TB requires a positive trim threshold, got {}",
                self.trim_threshold
            )));
        }
        Ok(())
    }
}

/// Replicate estimates plus their summary statistics.
#[derive(Debug, Clone)]
pub struct BootstrapResult {
    /// One entry per replicate, in replicate order; degenerate replicates
    /// hold NaN and are excluded from the summaries.
    pub estimates: Vec<f64>,
    pub mean: f64,
    /// Sample standard deviation of the retained estimates.
    pub se: f64,
    /// `mean ± 1.96·se`.
    pub ci95: (f64, f64),
    pub n_failed: usize,
}

impl BootstrapResult {
    fn from_estimates(estimates: Vec<f64>) -> Self {
        let retained: Vec<f64> = estimates
            .iter()
            .copied()
            .filter(|e| e.is_finite())
            .collect();
        let n_failed = estimates.len() - retained.len();
        let mean = stat::mean(&retained);
        let se = stat::sample_sd(&retained);
        BootstrapResult {
            estimates,
            mean,
            se,
            ci95: (mean - CI_MULTIPLIER * se, mean + CI_MULTIPLIER * se),
            n_failed,
        }
    }

    pub fn summary(&self, method: Method, seed: u64) -> BootstrapSummary {
        BootstrapSummary {
            method: method.label().to_string(),
            replicates: self.estimates.len(),
            n_failed: self.n_failed,
            mean: self.mean,
            se: self.se,
            ci_low: self.ci95.0,
            ci_high: self.ci95.1,
            seed,
        }
    }

    /// Raw estimate vector as a single-column CSV; failed replicates are NA.
    pub fn estimates_csv(&self) -> String {
        let mut out = String::from("estimate\n");
        for e in &self.estimates {
            if e.is_finite() {
                out.push_str(&format!("{e}\n"));
            } else {
                out.push_str("NA\n");
            }
        }
        out
    }
}

/// Wire form of a bootstrap result (JSON).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BootstrapSummary {
    pub method: String,
    #[serde(rename = "B")]
    pub replicates: usize,
    pub n_failed: usize,
    pub mean: f64,
    pub se: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub seed: u64,
}

/// Draws occurrence counts distributed Multinomial(`size`, `probs`) via
/// `size` independent categorical draws (cumulative-sum inversion).
///
/// # Panics
/// If `probs` is empty, contains a negative entry, does not sum to 1 within
/// 1e−9, or `size` is zero.
pub fn multinomial_counts<R: Rng + ?Sized>(probs: &[f64], size: usize, rng: &mut R) -> Vec<u64> {
    assert!(!probs.is_empty(), "empty probability vector");
    assert!(size >= 1, "multinomial size must be at least 1");
    let mut cum = Vec::with_capacity(probs.len());
    let mut total = 0.0;
    for &p in probs {
        assert!(p >= 0.0 && p.is_finite(), "invalid probability {p}");
        total += p;
        cum.push(total);
    }
    assert!(
        (total - 1.0).abs() <= 1e-9,
        "probabilities sum to {total}, not 1"
    );
    let mut counts = vec![0u64; probs.len()];
    let last = probs.len() - 1;
    for _ in 0..size {
        // Scaling by the (≈1) total makes the inversion exact even when the
        // cumulative sum rounds slightly below or above 1.
        let u: f64 = rng.random::<f64>() * total;
        let idx = cum.partition_point(|&c| c <= u).min(last);
        counts[idx] += 1;
    }
    counts
}

/// Per-dataset resampling state shared by all replicates: designs built once,
/// weights and sampling probabilities precomputed per row.
pub struct Resampler<'a> {
    data: &'a Dataset,
    outcome_design: DesignMatrix,
    ps_design: Option<DesignMatrix>,
    probs: SamplingProbabilities,
    uniform_treated: Vec<f64>,
    uniform_control: Vec<f64>,
    /// Per-row occurrence weights by method, indexed by dataset row.
    gb_occurrence: Vec<f64>,
    ob_occurrence: Vec<f64>,
    tb_occurrence: Vec<f64>,
    trim_threshold: f64,
    treatment_col: usize,
    refit_propensity: bool,
    irls_max_iter: usize,
    irls_tol: f64,
}

impl<'a> Resampler<'a> {
    /// Builds the shared replicate state from fitted (or known) propensities.
    ///
    /// `ps_terms` is only consulted when `refit_propensity` is set, in which
    /// case the propensity model is refit on every resample (frequency
    /// weighted by the occurrence counts) before the weights are rebuilt.
    pub fn new(
        data: &'a Dataset,
        propensity: &[f64],
        ps_terms: &[Term],
        outcome_terms: &[Term],
        config: &BootstrapConfig,
    ) -> Result<Self, BootstrapError> {
        config.validate()?;
        if propensity.len() != data.n_rows() {
            return Err(BootstrapError::InvalidConfig(format!(
                "{} propensities for {} rows",
                propensity.len(),
                data.n_rows()
            )));
        }
        let outcome_design = build_design(data, outcome_terms, true)?;
        let treatment_col = outcome_design
            .treatment_col
            .expect("outcome design includes the treatment column");
        let ps_design = if config.refit_propensity {
            Some(build_design(data, ps_terms, false)?)
        } else {
            None
        };

        let treatment = data.treatment();
        let probs = gb_sampling_probabilities(propensity, treatment)?;
        let n = data.n_rows();
        let iptw = iptw_weights(propensity, treatment)?;
        // The threshold only matters for TB; validate() has already rejected
        // a bad one in that case, so fall back to no-op trimming here.
        let trim_threshold = if config.trim_threshold > 0.0 {
            config.trim_threshold
        } else {
            f64::INFINITY
        };
        let trimmed = trim_weights(&iptw, trim_threshold)?;
        let gb_occurrence = crate::weights::gb_objective_weights(&probs, n)
            .values()
            .to_vec();

        let n_t = probs.treated_rows.len();
        let n_c = probs.control_rows.len();
        Ok(Resampler {
            data,
            outcome_design,
            ps_design,
            uniform_treated: vec![1.0 / n_t as f64; n_t],
            uniform_control: vec![1.0 / n_c as f64; n_c],
            probs,
            gb_occurrence,
            ob_occurrence: iptw.values().to_vec(),
            tb_occurrence: trimmed.values().to_vec(),
            trim_threshold,
            treatment_col,
            refit_propensity: config.refit_propensity,
            irls_max_iter: config.irls_max_iter,
            irls_tol: config.irls_tol,
        })
    }

    /// Sampling probabilities a method uses within (treated, control).
    pub fn sampling_probabilities(&self, method: Method) -> (&[f64], &[f64]) {
        match method {
            Method::Gb => (&self.probs.treated, &self.probs.control),
            Method::Ob | Method::Tb => (&self.uniform_treated, &self.uniform_control),
        }
    }

    /// Draws one resample and returns its treatment-effect estimate.
    pub fn replicate_estimate<R: Rng + ?Sized>(
        &self,
        method: Method,
        rng: &mut R,
    ) -> Result<f64, ModelError> {
        let (p_t, p_c) = self.sampling_probabilities(method);
        let counts_t = multinomial_counts(p_t, p_t.len(), rng);
        let counts_c = multinomial_counts(p_c, p_c.len(), rng);
        self.replicate_from_counts(method, &counts_t, &counts_c)
    }

    /// Treatment-effect estimate for fixed occurrence counts (one entry per
    /// treated/control row, aligned with the group row order).
    pub fn replicate_from_counts(
        &self,
        method: Method,
        counts_t: &[u64],
        counts_c: &[u64],
    ) -> Result<f64, ModelError> {
        let n = self.data.n_rows();
        let mut row_weights = vec![0.0; n];

        if self.refit_propensity {
            self.occurrence_after_refit(counts_t, counts_c, method, &mut row_weights)?;
        } else {
            let occurrence = match method {
                Method::Gb => &self.gb_occurrence,
                Method::Ob => &self.ob_occurrence,
                Method::Tb => &self.tb_occurrence,
            };
            for (slot, &row) in self.probs.treated_rows.iter().enumerate() {
                row_weights[row] = counts_t[slot] as f64 * occurrence[row];
            }
            for (slot, &row) in self.probs.control_rows.iter().enumerate() {
                row_weights[row] = counts_c[slot] as f64 * occurrence[row];
            }
        }

        let fit = weighted_least_squares(&self.outcome_design, self.data.outcome(), &row_weights)?;
        Ok(fit.coefficients[self.treatment_col])
    }

    /// Refits the propensity model on the resampled rows (frequency weighted
    /// by the counts), then rebuilds this method's occurrence weights from
    /// the refit propensities. The *sampling* probabilities are always the
    /// original-fit ones; only the objective weights change.
    fn occurrence_after_refit(
        &self,
        counts_t: &[u64],
        counts_c: &[u64],
        method: Method,
        row_weights: &mut [f64],
    ) -> Result<(), ModelError> {
        let design = self
            .ps_design
            .as_ref()
            .expect("refit requested without a propensity design");
        let n = self.data.n_rows();
        let mut freq = vec![0.0; n];
        for (slot, &row) in self.probs.treated_rows.iter().enumerate() {
            freq[row] = counts_t[slot] as f64;
        }
        for (slot, &row) in self.probs.control_rows.iter().enumerate() {
            freq[row] = counts_c[slot] as f64;
        }
        let refit = fit_logistic_weighted(
            design,
            self.data.treatment(),
            &freq,
            self.irls_max_iter,
            self.irls_tol,
        )?;
        let e = &refit.fitted_propensity;
        match method {
            Method::Ob | Method::Tb => {
                let cap = match method {
                    Method::Tb => self.trim_threshold,
                    _ => f64::INFINITY,
                };
                for (slot, &row) in self.probs.treated_rows.iter().enumerate() {
                    row_weights[row] = counts_t[slot] as f64 * (1.0 / e[row]).min(cap);
                }
                for (slot, &row) in self.probs.control_rows.iter().enumerate() {
                    row_weights[row] = counts_c[slot] as f64 * (1.0 / (1.0 - e[row])).min(cap);
                }
            }
            Method::Gb => {
                let refit_probs = gb_sampling_probabilities(e, self.data.treatment())
                    .expect("clamped propensities are always in (0,1)");
                let n_t = refit_probs.treated.len() as f64;
                let n_c = refit_probs.control.len() as f64;
                for (slot, &row) in refit_probs.treated_rows.iter().enumerate() {
                    row_weights[row] = counts_t[slot] as f64 / (n_t * refit_probs.treated[slot]);
                }
                for (slot, &row) in refit_probs.control_rows.iter().enumerate() {
                    row_weights[row] = counts_c[slot] as f64 / (n_c * refit_probs.control[slot]);
                }
            }
        }
        Ok(())
    }
}

/// Runs a full bootstrap: fits the propensity model once on the original
/// data, draws `config.replicates` resamples on independent substreams, and
/// aggregates the estimates.
///
/// Errors if more than a tenth of the replicates are degenerate (a resample
/// that leaves the weighted design rank deficient is skipped and counted).
pub fn run_bootstrap(
    data: &Dataset,
    ps_terms: &[Term],
    outcome_terms: &[Term],
    config: &BootstrapConfig,
) -> Result<BootstrapResult, BootstrapError> {
    config.validate()?;
    let ps_design = build_design(data, ps_terms, false)?;
    let fit = fit_logistic(
        &ps_design,
        data.treatment(),
        config.irls_max_iter,
        config.irls_tol,
    )?;
    run_bootstrap_with_propensity(
        data,
        &fit.fitted_propensity,
        ps_terms,
        outcome_terms,
        config,
    )
}

/// As [`run_bootstrap`], with externally supplied propensities (used when the
/// caller has already fit or knows the propensity model).
pub fn run_bootstrap_with_propensity(
    data: &Dataset,
    propensity: &[f64],
    ps_terms: &[Term],
    outcome_terms: &[Term],
    config: &BootstrapConfig,
) -> Result<BootstrapResult, BootstrapError> {
    let resampler = Resampler::new(data, propensity, ps_terms, outcome_terms, config)?;
    let stream = SeedStream::new(config.master_seed);
    let b = config.replicates;

    // Each replicate owns the substream derived from its index; estimates are
    // stored by index and reduced sequentially, so any parallel schedule
    // produces identical output.
    let estimates: Vec<f64> = (0..b)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream.child(i as u64).rng();
            resampler
                .replicate_estimate(config.method, &mut rng)
                .unwrap_or(f64::NAN)
        })
        .collect();

    let result = BootstrapResult::from_estimates(estimates);
    if result.n_failed * 10 > b {
        return Err(BootstrapError::TooManyFailures {
            failed: result.n_failed,
            replicates: b,
        });
    }
    Ok(result)
}
