//! The simulation data-generating process.
//!
//! Outcomes follow a fixed linear model in a continuous score `x`, an ordinal
//! 12-category covariate `z`, their interaction, and a homogeneous treatment
//! effect; treatment is assigned by a latent-index rule whose noise variance
//! controls how extreme the weights get. The outcome and selection residuals
//! `(u, v)` are jointly normal, and setting their correlation away from zero
//! simulates an unmeasured confounder.

use crate::data::{Dataset, Term};
use crate::rng::SeedStream;
use crate::stat::normal_quantile;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::SimError;

/// Treatment coefficient of the default data-generating process.
pub const TRUE_EFFECT: f64 = 1.677;

/// Variance of the outcome residual `u`.
pub const OUTCOME_NOISE_VAR: f64 = 27.4;

// Outcome model: y = 2.15 + effect·w + 0.9·x + 0.946·z − 0.013·x·z + u.
const OUTCOME_INTERCEPT: f64 = 2.15;
const OUTCOME_X: f64 = 0.9;
const OUTCOME_Z: f64 = 0.946;
const OUTCOME_XZ: f64 = -0.013;

// Selection index: w = 1[−4.26 + 0.19·z + 0.047·x − 0.004·x·z + 0.01·z² + v > 0].
const SELECT_INTERCEPT: f64 = -4.26;
const SELECT_Z: f64 = 0.19;
const SELECT_X: f64 = 0.047;
const SELECT_XZ: f64 = -0.004;
const SELECT_Z2: f64 = 0.01;

/// Latent selection index before noise, exposed so tests can derive the true
/// propensity `Φ(index/σ_v)`.
pub fn selection_index(x: f64, z: f64) -> f64 {
    SELECT_INTERCEPT + SELECT_Z * z + SELECT_X * x + SELECT_XZ * x * z + SELECT_Z2 * z * z
}

/// Distribution of the covariates `(x, z)`: `x` is normal, `z` is an ordinal
/// category drawn through a Gaussian copula so the pair carries the requested
/// correlation.
///
/// The shipped defaults are documented placeholders with the right scale for
/// the selection model above (a test-score-like `x`, a mildly right-leaning
/// unimodal `z`); calibrate from data via [`CovariateModel::from_dataset`]
/// when a reference dataset is available.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CovariateModel {
    pub x_mean: f64,
    pub x_sd: f64,
    /// Probabilities of the 12 ordinal categories, summing to one.
    pub z_category_probs: Vec<f64>,
    pub xz_correlation: f64,
}

impl Default for CovariateModel {
    fn default() -> Self {
        CovariateModel {
            x_mean: 50.0,
            x_sd: 10.0,
            z_category_probs: vec![
                0.025, 0.025, 0.03, 0.035, 0.04, 0.045, 0.05, 0.08, 0.11, 0.15, 0.19, 0.22,
            ],
            xz_correlation: 0.3,
        }
    }
}

impl CovariateModel {
    pub fn validate(&self) -> Result<(), SimError> {
        if self.x_sd.is_nan() || self.x_sd <= 0.0 {
            return Err(SimError::InvalidCovariateModel(format!(
                "x_sd must be positive, got {}",
                self.x_sd
            )));
        }
        if self.z_category_probs.len() != 12 {
            return Err(SimError::InvalidCovariateModel(format!(
                "need 12 z-category probabilities, got {}",
                self.z_category_probs.len()
            )));
        }
        let total: f64 = self.z_category_probs.iter().sum();
        if (total - 1.0).abs() > 1e-9 || self.z_category_probs.iter().any(|p| *p < 0.0) {
            return Err(SimError::InvalidCovariateModel(format!(
                "z-category probabilities must be nonnegative and sum to 1 (sum {total})"
            )));
        }
        if !(self.xz_correlation > -1.0 && self.xz_correlation < 1.0) {
            return Err(SimError::InvalidCovariateModel(format!(
                "xz correlation must lie in (−1, 1), got {}",
                self.xz_correlation
            )));
        }
        Ok(())
    }

    /// Calibrates the covariate model from observed columns: `x` by its
    /// moments, `z` by the relative frequencies of categories 1–12, and the
    /// correlation by the sample Pearson correlation.
    pub fn from_dataset(data: &Dataset, x_col: &str, z_col: &str) -> Result<Self, SimError> {
        let x = data
            .covariate(x_col)
            .ok_or_else(|| SimError::InvalidCovariateModel(format!("no column '{x_col}'")))?;
        let z = data
            .covariate(z_col)
            .ok_or_else(|| SimError::InvalidCovariateModel(format!("no column '{z_col}'")))?;
        let x_mean = crate::stat::mean(x);
        let x_sd = crate::stat::sample_variance(x).sqrt();
        let mut counts = [0usize; 12];
        let mut kept = 0usize;
        for &v in z {
            let cat = v.round() as i64;
            if (1..=12).contains(&cat) {
                counts[(cat - 1) as usize] += 1;
                kept += 1;
            }
        }
        if kept == 0 {
            return Err(SimError::InvalidCovariateModel(
                "no z values in categories 1-12".to_string(),
            ));
        }
        let z_category_probs: Vec<f64> = counts.iter().map(|&c| c as f64 / kept as f64).collect();
        let z_mean = crate::stat::mean(z);
        let mut cov = 0.0;
        let mut var_z = 0.0;
        for (&xi, &zi) in x.iter().zip(z) {
            cov += (xi - x_mean) * (zi - z_mean);
            var_z += (zi - z_mean) * (zi - z_mean);
        }
        let xz_correlation = cov / (var_z.sqrt() * x_sd * (x.len() as f64 - 1.0).sqrt());
        let model = CovariateModel {
            x_mean,
            x_sd,
            z_category_probs,
            xz_correlation,
        };
        model.validate()?;
        Ok(model)
    }

    /// Copula cutpoints: z falls in category k+1 when the latent normal lies
    /// between cutpoint k−1 and k.
    fn cutpoints(&self) -> Vec<f64> {
        let mut cuts = Vec::with_capacity(11);
        let mut cum = 0.0;
        for p in &self.z_category_probs[..11] {
            cum += p;
            cuts.push(normal_quantile(cum.clamp(0.0, 1.0)));
        }
        cuts
    }
}

/// One cell of the simulation grid.
#[derive(Debug, Clone, Serialize)]
pub struct ScenarioConfig {
    pub sample_size: usize,
    /// Correlation of the outcome and selection residuals; nonzero violates
    /// unconfoundedness.
    pub confounding_rho: f64,
    /// Variance of the selection noise `v`; smaller values produce more
    /// extreme propensities and hence more oversized weights.
    pub selection_noise_var: f64,
    pub ps_correctly_specified: bool,
    pub covariates: CovariateModel,
    pub n_datasets: usize,
    /// Bootstrap replicates per method per dataset.
    pub replicates: usize,
    pub trim_threshold: f64,
    pub refit_propensity: bool,
    pub beta_true: f64,
}

impl ScenarioConfig {
    /// Compact scenario tag used in output files, e.g. `n1000_rho0_v1_mis`.
    pub fn label(&self) -> String {
        format!(
            "n{}_rho{}_v{}_{}",
            self.sample_size,
            self.confounding_rho,
            self.selection_noise_var,
            if self.ps_correctly_specified {
                "correct"
            } else {
                "mis"
            }
        )
    }
}

/// Propensity-model terms: the correctly specified model mirrors the
/// selection index `{z, x, x·z, z²}`; the misspecified one drops the
/// interaction and the square, keeping only the main effects.
pub fn propensity_formula(correctly_specified: bool) -> Vec<Term> {
    if correctly_specified {
        vec![
            Term::Column("z".into()),
            Term::Column("x".into()),
            Term::Interaction("x".into(), "z".into()),
            Term::Square("z".into()),
        ]
    } else {
        vec![Term::Column("z".into()), Term::Column("x".into())]
    }
}

/// Outcome-model terms (the treatment indicator is added by the design
/// builder); always correctly specified.
pub fn outcome_formula() -> Vec<Term> {
    vec![
        Term::Column("x".into()),
        Term::Column("z".into()),
        Term::Interaction("x".into(), "z".into()),
    ]
}

/// Simulates one dataset under the scenario.
///
/// A draw leaving fewer than 10 rows in either arm is discarded and
/// regenerated on the next substream, up to 100 attempts.
pub fn generate_dataset(
    scenario: &ScenarioConfig,
    stream: SeedStream,
) -> Result<Dataset, SimError> {
    scenario.covariates.validate()?;
    const MAX_ATTEMPTS: usize = 100;
    const MIN_ARM: usize = 10;

    let cov = &scenario.covariates;
    let cuts = cov.cutpoints();
    let rho_xz = cov.xz_correlation;
    let xz_resid = (1.0 - rho_xz * rho_xz).sqrt();
    let sigma_u = OUTCOME_NOISE_VAR.sqrt();
    let sigma_v = scenario.selection_noise_var.sqrt();
    let rho_uv = scenario.confounding_rho;
    let uv_resid = (1.0 - rho_uv * rho_uv).sqrt();
    let n = scenario.sample_size;

    for attempt in 0..MAX_ATTEMPTS {
        let mut rng = stream.child(attempt as u64).rng();
        let mut treatment = Vec::with_capacity(n);
        let mut outcome = Vec::with_capacity(n);
        let mut xs = Vec::with_capacity(n);
        let mut zs = Vec::with_capacity(n);
        for _ in 0..n {
            // Fixed draw order per row: copula pair, then residual pair.
            let g1: f64 = StandardNormal.sample(&mut rng);
            let g2: f64 = StandardNormal.sample(&mut rng);
            let a: f64 = StandardNormal.sample(&mut rng);
            let b: f64 = StandardNormal.sample(&mut rng);

            let x = cov.x_mean + cov.x_sd * g1;
            let latent_z = rho_xz * g1 + xz_resid * g2;
            let z = (cuts.partition_point(|&c| c < latent_z) + 1) as f64;

            let u = sigma_u * a;
            let v = sigma_v * (rho_uv * a + uv_resid * b);

            let w = selection_index(x, z) + v > 0.0;
            let y = OUTCOME_INTERCEPT
                + scenario.beta_true * (w as u8 as f64)
                + OUTCOME_X * x
                + OUTCOME_Z * z
                + OUTCOME_XZ * x * z
                + u;

            treatment.push(w);
            outcome.push(y);
            xs.push(x);
            zs.push(z);
        }
        let n_treated = treatment.iter().filter(|&&t| t).count();
        if n_treated < MIN_ARM || n - n_treated < MIN_ARM {
            continue;
        }
        let data = Dataset::new(treatment, outcome, vec![("x".into(), xs), ("z".into(), zs)])?;
        return Ok(data);
    }
    Err(SimError::DegenerateTreatmentArm {
        attempts: MAX_ATTEMPTS,
    })
}
