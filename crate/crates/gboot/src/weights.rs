//! Inverse-probability-of-treatment weights, weight trimming, the
//! within-group sampling probabilities used by the generalized bootstrap,
//! shrinkage ratios, and descriptive weight diagnostics.
//!
//! Conventions throughout: a treated row with propensity `e` carries IPTW
//! weight `1/e`; a control row carries `1/(1−e)`. The generalized-bootstrap
//! sampling probability of a row is its IPTW weight normalized within its own
//! treatment group, and the matching objective weight per occurrence is
//! `1/(n_g · prob)` for group size `n_g`.

use crate::stat;
use serde::Serialize;
use thiserror::Error;

/// Weights larger than this are conventionally "oversized".
pub const DEFAULT_OVERSIZED_THRESHOLD: f64 = 20.0;

#[derive(Debug, Error)]
pub enum WeightError {
    #[error("propensity {value} at row {row} is outside (0, 1)")]
    PropensityOutOfRange { row: usize, value: f64 },
    #[error("lengths disagree: {n_propensity} propensities vs {n_treatment} treatment flags")]
    LengthMismatch {
        n_propensity: usize,
        n_treatment: usize,
    },
    #[error("trim threshold must be positive, got {0}")]
    NonPositiveThreshold(f64),
    #[error("group has no rows")]
    EmptyGroup,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightKind {
    Iptw,
    Trimmed,
    GbObjective,
}

impl WeightKind {
    pub fn label(&self) -> &'static str {
        match self {
            WeightKind::Iptw => "iptw",
            WeightKind::Trimmed => "trimmed",
            WeightKind::GbObjective => "gb_objective",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Group {
    Treated,
    Control,
}

/// Per-row regression weights with group bookkeeping.
#[derive(Debug, Clone)]
pub struct WeightSet {
    values: Vec<f64>,
    groups: Vec<Group>,
    kind: WeightKind,
    trim_threshold: Option<f64>,
}

impl WeightSet {
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn kind(&self) -> WeightKind {
        self.kind
    }

    pub fn trim_threshold(&self) -> Option<f64> {
        self.trim_threshold
    }

    pub fn groups(&self) -> &[Group] {
        &self.groups
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Weights belonging to one treatment group, in dataset order.
    pub fn group_values(&self, group: Group) -> Vec<f64> {
        self.values
            .iter()
            .zip(&self.groups)
            .filter(|(_, g)| **g == group)
            .map(|(v, _)| *v)
            .collect()
    }
}

fn validate_propensity(propensity: &[f64], treatment: &[bool]) -> Result<(), WeightError> {
    if propensity.len() != treatment.len() {
        return Err(WeightError::LengthMismatch {
            n_propensity: propensity.len(),
            n_treatment: treatment.len(),
        });
    }
    for (row, &e) in propensity.iter().enumerate() {
        if !(e > 0.0 && e < 1.0) {
            return Err(WeightError::PropensityOutOfRange { row, value: e });
        }
    }
    Ok(())
}

/// IPTW weights: `1/e` for treated rows, `1/(1−e)` for control rows.
pub fn iptw_weights(propensity: &[f64], treatment: &[bool]) -> Result<WeightSet, WeightError> {
    validate_propensity(propensity, treatment)?;
    let values = propensity
        .iter()
        .zip(treatment)
        .map(|(&e, &t)| if t { 1.0 / e } else { 1.0 / (1.0 - e) })
        .collect();
    Ok(WeightSet {
        values,
        groups: treatment
            .iter()
            .map(|&t| if t { Group::Treated } else { Group::Control })
            .collect(),
        kind: WeightKind::Iptw,
        trim_threshold: None,
    })
}

/// Clamps every weight at `threshold`, leaving the input untouched.
pub fn trim_weights(weights: &WeightSet, threshold: f64) -> Result<WeightSet, WeightError> {
    if threshold.is_nan() || threshold <= 0.0 {
        return Err(WeightError::NonPositiveThreshold(threshold));
    }
    Ok(WeightSet {
        values: weights.values.iter().map(|w| w.min(threshold)).collect(),
        groups: weights.groups.clone(),
        kind: WeightKind::Trimmed,
        trim_threshold: Some(threshold),
    })
}

/// Within-group resampling probabilities: IPTW weights normalized to sum to
/// one over the treated rows and, separately, over the control rows.
#[derive(Debug, Clone)]
pub struct SamplingProbabilities {
    /// Probabilities for treated rows, aligned with `treated_rows`.
    pub treated: Vec<f64>,
    /// Probabilities for control rows, aligned with `control_rows`.
    pub control: Vec<f64>,
    /// Dataset row index of each treated entry, in dataset order.
    pub treated_rows: Vec<usize>,
    /// Dataset row index of each control entry, in dataset order.
    pub control_rows: Vec<usize>,
}

/// Generalized-bootstrap sampling probabilities.
pub fn gb_sampling_probabilities(
    propensity: &[f64],
    treatment: &[bool],
) -> Result<SamplingProbabilities, WeightError> {
    validate_propensity(propensity, treatment)?;
    let mut treated_rows = Vec::new();
    let mut control_rows = Vec::new();
    let mut treated = Vec::new();
    let mut control = Vec::new();
    for (i, (&e, &t)) in propensity.iter().zip(treatment).enumerate() {
        if t {
            treated_rows.push(i);
            treated.push(1.0 / e);
        } else {
            control_rows.push(i);
            control.push(1.0 / (1.0 - e));
        }
    }
    if treated.is_empty() || control.is_empty() {
        return Err(WeightError::EmptyGroup);
    }
    normalize(&mut treated);
    normalize(&mut control);
    Ok(SamplingProbabilities {
        treated,
        control,
        treated_rows,
        control_rows,
    })
}

fn normalize(values: &mut [f64]) {
    let total: f64 = values.iter().sum();
    for v in values.iter_mut() {
        *v /= total;
    }
}

/// Per-occurrence objective weights of the generalized bootstrap,
/// `1/(n_g · prob)`, returned per dataset row.
pub fn gb_objective_weights(probs: &SamplingProbabilities, n_rows: usize) -> WeightSet {
    let n_t = probs.treated.len() as f64;
    let n_c = probs.control.len() as f64;
    let mut values = vec![0.0; n_rows];
    let mut groups = vec![Group::Control; n_rows];
    for (&row, &p) in probs.treated_rows.iter().zip(&probs.treated) {
        values[row] = 1.0 / (n_t * p);
        groups[row] = Group::Treated;
    }
    for (&row, &q) in probs.control_rows.iter().zip(&probs.control) {
        values[row] = 1.0 / (n_c * q);
        groups[row] = Group::Control;
    }
    WeightSet {
        values,
        groups,
        kind: WeightKind::GbObjective,
        trim_threshold: None,
    }
}

/// Ratio of the generalized-bootstrap objective weight to the IPTW weight,
/// per row: `(Σ_group w / n_g) · e²` for treated rows (with `1−e` in place of
/// `e` for control rows). Below one exactly where IPTW weights are large.
pub fn shrinkage_ratio(propensity: &[f64], treatment: &[bool]) -> Result<Vec<f64>, WeightError> {
    validate_propensity(propensity, treatment)?;
    let mut sum_t = 0.0;
    let mut sum_c = 0.0;
    let mut n_t = 0usize;
    let mut n_c = 0usize;
    for (&e, &t) in propensity.iter().zip(treatment) {
        if t {
            sum_t += 1.0 / e;
            n_t += 1;
        } else {
            sum_c += 1.0 / (1.0 - e);
            n_c += 1;
        }
    }
    if n_t == 0 || n_c == 0 {
        return Err(WeightError::EmptyGroup);
    }
    let mean_t = sum_t / n_t as f64;
    let mean_c = sum_c / n_c as f64;
    Ok(propensity
        .iter()
        .zip(treatment)
        .map(|(&e, &t)| {
            if t {
                mean_t * e * e
            } else {
                mean_c * (1.0 - e) * (1.0 - e)
            }
        })
        .collect())
}

/// Descriptive statistics of a weight vector against an oversize threshold.
#[derive(Debug, Clone, Serialize)]
pub struct WeightDiagnostics {
    pub mean: f64,
    /// Sample variance (n−1 denominator).
    pub variance: f64,
    pub oversized_count: usize,
    /// Mean of the oversized weights; absent when none exceed the threshold.
    pub oversized_mean: Option<f64>,
    pub max_weight: f64,
    pub threshold: f64,
}

/// Summarizes all weights in the set; see [`weight_diagnostics_for`] for a
/// single group.
pub fn weight_diagnostics(weights: &WeightSet, threshold: f64) -> WeightDiagnostics {
    diagnostics_of(weights.values(), threshold)
}

pub fn weight_diagnostics_for(
    weights: &WeightSet,
    group: Group,
    threshold: f64,
) -> WeightDiagnostics {
    diagnostics_of(&weights.group_values(group), threshold)
}

fn diagnostics_of(values: &[f64], threshold: f64) -> WeightDiagnostics {
    assert!(!values.is_empty(), "diagnostics need at least one weight");
    let oversized: Vec<f64> = values.iter().copied().filter(|w| *w > threshold).collect();
    WeightDiagnostics {
        mean: stat::mean(values),
        variance: stat::sample_variance(values),
        oversized_count: oversized.len(),
        oversized_mean: if oversized.is_empty() {
            None
        } else {
            Some(stat::mean(&oversized))
        },
        max_weight: values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        threshold,
    }
}

/// Header for the diagnostics CSV table.
pub fn diagnostics_csv_header() -> String {
    "kind,mean,variance,oversized_count,oversized_mean,max,threshold".to_string()
}

impl WeightDiagnostics {
    /// One CSV row; `kind` labels the weight flavor (optionally suffixed with
    /// a group tag by the caller).
    pub fn csv_row(&self, kind: &str) -> String {
        let oversized_mean = match self.oversized_mean {
            Some(m) => format!("{m}"),
            None => "NA".to_string(),
        };
        format!(
            "{kind},{},{},{},{oversized_mean},{},{}",
            self.mean, self.variance, self.oversized_count, self.max_weight, self.threshold
        )
    }
}
