//! Empirical pipeline: CSV ingestion with the high-income exclusion rule,
//! the three-method bootstrap analysis, weight diagnostics, and histogram
//! tables for the propensity-score and weight distributions.

use crate::bootstrap::{
    run_bootstrap_with_propensity, BootstrapConfig, BootstrapError, BootstrapSummary, Method,
};
use crate::data::{build_design, DataError, Dataset, Term, INTERCEPT_NAME};
use crate::model::{fit_logistic, ModelError, DEFAULT_MAX_ITER, DEFAULT_TOL};
use crate::rng::SeedStream;
use crate::weights::{
    iptw_weights, weight_diagnostics_for, Group, WeightDiagnostics, WeightError,
    DEFAULT_OVERSIZED_THRESHOLD,
};
use serde::{Deserialize, Serialize};
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum AnalyzeError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("missing required column '{name}'")]
    MissingColumn { name: String },
    #[error("row {row}: cannot parse field '{field}' from '{value}'")]
    UnparseableRow {
        row: usize,
        field: String,
        value: String,
    },
    #[error("no rows remain after filtering")]
    EmptyAfterFilter,
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Weight(#[from] WeightError),
    #[error(transparent)]
    Bootstrap(#[from] BootstrapError),
}

/// Column names of the empirical extract: a 0/1 treatment flag, a continuous
/// outcome, a continuous pretest score, and a 15-category ordinal family
/// income whose top three categories (annual income over $75,000) are
/// excluded from analysis.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EmpiricalSchema {
    pub treatment: String,
    pub outcome: String,
    pub pretest: String,
    pub income: String,
}

impl Default for EmpiricalSchema {
    fn default() -> Self {
        EmpiricalSchema {
            treatment: "catholic".into(),
            outcome: "math12".into(),
            pretest: "math8".into(),
            income: "faminc8".into(),
        }
    }
}

/// Income categories at or above this code are excluded.
pub const INCOME_EXCLUSION_CODE: f64 = 13.0;

/// Row accounting from CSV ingestion.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct LoadReport {
    pub rows_read: usize,
    pub rows_dropped_missing: usize,
    pub rows_dropped_high_income: usize,
    pub rows_retained: usize,
}

fn is_missing(field: &str) -> bool {
    let t = field.trim();
    t.is_empty() || t.eq_ignore_ascii_case("na") || t.eq_ignore_ascii_case("nan")
}

/// Loads the empirical CSV, dropping rows with any missing required field
/// (counted) and rows in income categories 13–15 (the exclusion rule), then
/// assembles a [`Dataset`] with the pretest and income columns. Extra CSV
/// columns are ignored.
pub fn load_empirical(
    path: &Path,
    schema: &EmpiricalSchema,
) -> Result<(Dataset, LoadReport), AnalyzeError> {
    let file = std::fs::File::open(path).map_err(|source| AnalyzeError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(file);

    let headers = reader.headers()?.clone();
    let col = |name: &str| -> Result<usize, AnalyzeError> {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| AnalyzeError::MissingColumn {
                name: name.to_string(),
            })
    };
    let idx_treatment = col(&schema.treatment)?;
    let idx_outcome = col(&schema.outcome)?;
    let idx_pretest = col(&schema.pretest)?;
    let idx_income = col(&schema.income)?;

    let mut treatment = Vec::new();
    let mut outcome = Vec::new();
    let mut pretest = Vec::new();
    let mut income = Vec::new();
    let mut rows_read = 0usize;
    let mut rows_dropped_missing = 0usize;
    let mut rows_dropped_high_income = 0usize;

    for (row_idx, record) in reader.records().enumerate() {
        let record = record?;
        rows_read += 1;
        let fields = [
            (idx_treatment, &schema.treatment),
            (idx_outcome, &schema.outcome),
            (idx_pretest, &schema.pretest),
            (idx_income, &schema.income),
        ];
        if fields
            .iter()
            .any(|(i, _)| record.get(*i).is_none_or(is_missing))
        {
            rows_dropped_missing += 1;
            continue;
        }
        let parse = |i: usize, field: &str| -> Result<f64, AnalyzeError> {
            let raw = record.get(i).unwrap_or("");
            raw.trim()
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| AnalyzeError::UnparseableRow {
                    row: row_idx + 1,
                    field: field.to_string(),
                    value: raw.to_string(),
                })
        };
        let t = parse(idx_treatment, &schema.treatment)?;
        if t != 0.0 && t != 1.0 {
            return Err(AnalyzeError::UnparseableRow {
                row: row_idx + 1,
                field: schema.treatment.clone(),
                value: format!("{t} (must be 0 or 1)"),
            });
        }
        let y = parse(idx_outcome, &schema.outcome)?;
        let x = parse(idx_pretest, &schema.pretest)?;
        let inc = parse(idx_income, &schema.income)?;
        if inc.fract() != 0.0 || !(1.0..=15.0).contains(&inc) {
            return Err(AnalyzeError::UnparseableRow {
                row: row_idx + 1,
                field: schema.income.clone(),
                value: format!("{inc} (must be an integer category 1-15)"),
            });
        }
        if inc >= INCOME_EXCLUSION_CODE {
            rows_dropped_high_income += 1;
            continue;
        }
        treatment.push(t == 1.0);
        outcome.push(y);
        pretest.push(x);
        income.push(inc);
    }

    let rows_retained = treatment.len();
    if rows_retained == 0 {
        return Err(AnalyzeError::EmptyAfterFilter);
    }
    let data = Dataset::new(
        treatment,
        outcome,
        vec![
            (schema.pretest.clone(), pretest),
            (schema.income.clone(), income),
        ],
    )?;
    Ok((
        data,
        LoadReport {
            rows_read,
            rows_dropped_missing,
            rows_dropped_high_income,
            rows_retained,
        },
    ))
}

/// Model terms used by the reproduction preset: pretest, income, and their
/// interaction, in both the propensity and outcome models.
pub fn empirical_terms(schema: &EmpiricalSchema) -> Vec<Term> {
    vec![
        Term::Column(schema.pretest.clone()),
        Term::Column(schema.income.clone()),
        Term::Interaction(schema.pretest.clone(), schema.income.clone()),
    ]
}

/// Fixed-width histogram counts.
#[derive(Debug, Clone, Serialize)]
pub struct Histogram {
    pub bin_low: Vec<f64>,
    pub bin_high: Vec<f64>,
    pub counts: Vec<u64>,
}

/// Equal-width histogram over `[min, max]`; the final bin is closed on the
/// right so the maximum lands inside.
pub fn histogram(values: &[f64], min: f64, max: f64, bins: usize) -> Histogram {
    assert!(bins > 0 && max > min, "degenerate histogram range");
    let width = (max - min) / bins as f64;
    let mut counts = vec![0u64; bins];
    for &v in values {
        let idx = (((v - min) / width) as usize).min(bins - 1);
        counts[idx] += 1;
    }
    let bin_low = (0..bins).map(|i| min + i as f64 * width).collect();
    let bin_high = (1..=bins)
        .map(|i| {
            if i == bins {
                max
            } else {
                min + i as f64 * width
            }
        })
        .collect();
    Histogram {
        bin_low,
        bin_high,
        counts,
    }
}

pub const HISTOGRAM_BINS: usize = 30;

/// One labeled histogram panel of the report.
#[derive(Debug, Clone, Serialize)]
pub struct HistogramEntry {
    pub group: String,
    pub variable: String,
    #[serde(flatten)]
    pub histogram: Histogram,
}

/// Parameters of an empirical run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EmpiricalConfig {
    pub methods: Vec<Method>,
    pub replicates: usize,
    pub trim_threshold: f64,
    pub refit_propensity: bool,
    pub master_seed: u64,
    pub schema: EmpiricalSchema,
}

impl Default for EmpiricalConfig {
    fn default() -> Self {
        EmpiricalConfig {
            methods: Method::ALL.to_vec(),
            replicates: 1000,
            trim_threshold: DEFAULT_OVERSIZED_THRESHOLD,
            refit_propensity: false,
            master_seed: 1,
            schema: EmpiricalSchema::default(),
        }
    }
}

/// Per-group weight diagnostics.
#[derive(Debug, Clone, Serialize)]
pub struct GroupDiagnostics {
    pub treated: WeightDiagnostics,
    pub control: WeightDiagnostics,
}

/// Everything an empirical run reports; serializable to JSON.
#[derive(Debug, Serialize)]
pub struct AnalysisReport {
    pub rows_read: usize,
    pub rows_dropped_missing: usize,
    pub rows_dropped_high_income: usize,
    pub rows_retained: usize,
    pub n_treated: usize,
    pub n_control: usize,
    pub treated_share: f64,
    pub control_share: f64,
    pub propensity_model: Vec<String>,
    pub outcome_model: Vec<String>,
    pub oversized_threshold: f64,
    pub oversized_count: usize,
    pub oversized_count_treated: usize,
    pub oversized_count_control: usize,
    pub weight_diagnostics: GroupDiagnostics,
    pub methods: Vec<BootstrapSummary>,
    pub histograms: Vec<HistogramEntry>,
}

impl AnalysisReport {
    pub fn summary_for(&self, method: Method) -> Option<&BootstrapSummary> {
        self.methods.iter().find(|s| s.method == method.label())
    }

    /// Histogram table as CSV rows (group, variable, bin_low, bin_high, count).
    pub fn histograms_csv(&self) -> String {
        let mut out = String::from("group,variable,bin_low,bin_high,count\n");
        for entry in &self.histograms {
            let h = &entry.histogram;
            for i in 0..h.counts.len() {
                out.push_str(&format!(
                    "{},{},{},{},{}\n",
                    entry.group, entry.variable, h.bin_low[i], h.bin_high[i], h.counts[i]
                ));
            }
        }
        out
    }

    /// The raw estimate vectors are not part of the JSON report.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// An empirical run with the raw per-method bootstrap results attached.
#[derive(Debug)]
pub struct EmpiricalRun {
    pub report: AnalysisReport,
    pub results: Vec<(Method, crate::bootstrap::BootstrapResult)>,
}

/// As [`run_empirical_full`], returning only the report.
pub fn run_empirical(
    data: &Dataset,
    load: &LoadReport,
    config: &EmpiricalConfig,
) -> Result<AnalysisReport, AnalyzeError> {
    run_empirical_full(data, load, config).map(|run| run.report)
}

/// Runs the full empirical pipeline on a loaded dataset: one propensity fit,
/// per-group diagnostics and histograms, then one bootstrap per requested
/// method on method-tagged substreams of the master seed.
pub fn run_empirical_full(
    data: &Dataset,
    load: &LoadReport,
    config: &EmpiricalConfig,
) -> Result<EmpiricalRun, AnalyzeError> {
    let terms = empirical_terms(&config.schema);
    let ps_design = build_design(data, &terms, false)?;
    let fit = fit_logistic(&ps_design, data.treatment(), DEFAULT_MAX_ITER, DEFAULT_TOL)?;
    let propensity = &fit.fitted_propensity;

    let iptw = iptw_weights(propensity, data.treatment())?;
    let diag_treated = weight_diagnostics_for(&iptw, Group::Treated, config.trim_threshold);
    let diag_control = weight_diagnostics_for(&iptw, Group::Control, config.trim_threshold);

    let mut histograms = Vec::new();
    let max_weight = iptw
        .values()
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    for (group, tag) in [(Group::Treated, "treated"), (Group::Control, "control")] {
        let rows: Vec<usize> = match group {
            Group::Treated => data.treated_rows(),
            Group::Control => data.control_rows(),
        };
        let e_values: Vec<f64> = rows.iter().map(|&i| propensity[i]).collect();
        let w_values: Vec<f64> = rows.iter().map(|&i| iptw.values()[i]).collect();
        histograms.push(HistogramEntry {
            group: tag.to_string(),
            variable: "propensity".to_string(),
            histogram: histogram(&e_values, 0.0, 1.0, HISTOGRAM_BINS),
        });
        histograms.push(HistogramEntry {
            group: tag.to_string(),
            variable: "weight".to_string(),
            histogram: histogram(&w_values, 0.0, max_weight, HISTOGRAM_BINS),
        });
    }

    let method_stream = SeedStream::new(config.master_seed);
    let mut methods = Vec::new();
    let mut results = Vec::new();
    for (m_idx, method) in config.methods.iter().enumerate() {
        let bconfig = BootstrapConfig {
            method: *method,
            replicates: config.replicates,
            trim_threshold: config.trim_threshold,
            refit_propensity: config.refit_propensity,
            master_seed: method_stream.child(m_idx as u64).seed(),
            irls_max_iter: DEFAULT_MAX_ITER,
            irls_tol: DEFAULT_TOL,
        };
        let result = run_bootstrap_with_propensity(data, propensity, &terms, &terms, &bconfig)?;
        methods.push(result.summary(*method, bconfig.master_seed));
        results.push((*method, result));
    }

    let n = data.n_rows();
    let term_names: Vec<String> = terms.iter().map(|t| t.name()).collect();
    let mut model_names = vec![INTERCEPT_NAME.to_string()];
    model_names.extend(term_names.iter().cloned());
    let mut outcome_names = vec![INTERCEPT_NAME.to_string(), config.schema.treatment.clone()];
    outcome_names.extend(term_names);

    let report = AnalysisReport {
        rows_read: load.rows_read,
        rows_dropped_missing: load.rows_dropped_missing,
        rows_dropped_high_income: load.rows_dropped_high_income,
        rows_retained: load.rows_retained,
        n_treated: data.n_treated(),
        n_control: data.n_control(),
        treated_share: data.n_treated() as f64 / n as f64,
        control_share: data.n_control() as f64 / n as f64,
        propensity_model: model_names,
        outcome_model: outcome_names,
        oversized_threshold: config.trim_threshold,
        oversized_count: diag_treated.oversized_count + diag_control.oversized_count,
        oversized_count_treated: diag_treated.oversized_count,
        oversized_count_control: diag_control.oversized_count,
        weight_diagnostics: GroupDiagnostics {
            treated: diag_treated,
            control: diag_control,
        },
        methods,
        histograms,
    };
    Ok(EmpiricalRun { report, results })
}
