//! Orchestration of a multi-scenario simulation study.

use crate::bootstrap::{run_bootstrap_with_propensity, BootstrapConfig, Method};
use crate::data::build_design;
use crate::model::fit_logistic;
use crate::rng::SeedStream;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::sync::atomic::{AtomicUsize, Ordering};

use super::dgp::{
    generate_dataset, outcome_formula, propensity_formula, CovariateModel, ScenarioConfig,
    TRUE_EFFECT,
};
use super::metrics::{scenario_metrics, DatasetResult, MethodEstimate, ScenarioMetrics};
use super::SimError;

/// Propensity-model specification toggle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PsSpec {
    Correct,
    Misspecified,
}

impl PsSpec {
    pub fn label(&self) -> &'static str {
        match self {
            PsSpec::Correct => "correct",
            PsSpec::Misspecified => "misspecified",
        }
    }
}

/// The study grid and shared run parameters; serializable as the config-file
/// schema. The default covers the full 3 sizes × 2 confounding levels ×
/// 2 noise levels × 2 specifications = 24-scenario grid at full scale.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct StudyConfig {
    pub sizes: Vec<usize>,
    pub rhos: Vec<f64>,
    pub noise_variances: Vec<f64>,
    pub ps_specs: Vec<PsSpec>,
    /// Simulated datasets per scenario.
    pub datasets: usize,
    /// Bootstrap replicates per method per dataset.
    pub bootstrap_replicates: usize,
    pub trim_threshold: f64,
    pub refit_propensity: bool,
    pub seed: u64,
    pub beta_true: f64,
    pub covariates: CovariateModel,
}

impl Default for StudyConfig {
    fn default() -> Self {
        StudyConfig {
            sizes: vec![1000, 5000, 10000],
            rhos: vec![0.0, 0.1],
            noise_variances: vec![1.0, 0.3],
            ps_specs: vec![PsSpec::Correct, PsSpec::Misspecified],
            datasets: 1000,
            bootstrap_replicates: 1000,
            trim_threshold: 20.0,
            refit_propensity: false,
            seed: 1,
            beta_true: TRUE_EFFECT,
            covariates: CovariateModel::default(),
        }
    }
}

impl StudyConfig {
    /// Expands the factor lists into concrete scenarios in a fixed order
    /// (size, then confounding, then noise, then specification).
    pub fn expand_grid(&self) -> Vec<ScenarioConfig> {
        let mut grid = Vec::new();
        for &sample_size in &self.sizes {
            for &confounding_rho in &self.rhos {
                for &selection_noise_var in &self.noise_variances {
                    for spec in &self.ps_specs {
                        grid.push(ScenarioConfig {
                            sample_size,
                            confounding_rho,
                            selection_noise_var,
                            ps_correctly_specified: *spec == PsSpec::Correct,
                            covariates: self.covariates.clone(),
                            n_datasets: self.datasets,
                            replicates: self.bootstrap_replicates,
                            trim_threshold: self.trim_threshold,
                            refit_propensity: self.refit_propensity,
                            beta_true: self.beta_true,
                        });
                    }
                }
            }
        }
        grid
    }
}

/// Progress events emitted while a study runs.
#[derive(Debug)]
pub enum StudyProgress<'a> {
    ScenarioStarted {
        index: usize,
        total: usize,
        label: String,
    },
    DatasetFinished {
        scenario_index: usize,
        completed: usize,
        total: usize,
    },
    ScenarioFinished {
        index: usize,
        label: String,
        metrics: &'a ScenarioMetrics,
    },
}

/// Everything produced for one scenario.
#[derive(Debug)]
pub struct ScenarioResult {
    pub scenario: ScenarioConfig,
    pub metrics: ScenarioMetrics,
    pub per_dataset: Vec<DatasetResult>,
}

/// Runs the study over the scenario grid derived from `config.seed`.
///
/// Scenarios run sequentially (so partial results stream out in order);
/// datasets within a scenario run in parallel on substreams indexed by
/// dataset number, keeping the output independent of the thread count.
pub fn run_study(
    config: &StudyConfig,
    progress: Option<&(dyn Fn(StudyProgress) + Sync)>,
) -> Result<Vec<ScenarioResult>, SimError> {
    let grid = config.expand_grid();
    if grid.is_empty() {
        return Err(SimError::InvalidCovariateModel(
            "empty scenario grid".to_string(),
        ));
    }
    let root = SeedStream::new(config.seed);
    let n_scenarios = grid.len();
    let mut results = Vec::with_capacity(n_scenarios);

    for (s_idx, scenario) in grid.into_iter().enumerate() {
        if let Some(cb) = progress {
            cb(StudyProgress::ScenarioStarted {
                index: s_idx,
                total: n_scenarios,
                label: scenario.label(),
            });
        }
        let scenario_stream = root.child(s_idx as u64);
        let done = AtomicUsize::new(0);
        let per_dataset: Result<Vec<DatasetResult>, SimError> = (0..scenario.n_datasets)
            .into_par_iter()
            .map(|d_idx| {
                let out = run_one_dataset(&scenario, scenario_stream.child(d_idx as u64)).map_err(
                    |e| SimError::InScenario {
                        scenario: format!("{} dataset {d_idx}", scenario.label()),
                        source: Box::new(e),
                    },
                )?;
                if let Some(cb) = progress {
                    cb(StudyProgress::DatasetFinished {
                        scenario_index: s_idx,
                        completed: done.fetch_add(1, Ordering::Relaxed) + 1,
                        total: scenario.n_datasets,
                    });
                }
                Ok(out)
            })
            .collect();
        let per_dataset = per_dataset?;
        let metrics = scenario_metrics(&per_dataset, scenario.beta_true);
        if let Some(cb) = progress {
            cb(StudyProgress::ScenarioFinished {
                index: s_idx,
                label: scenario.label(),
                metrics: &metrics,
            });
        }
        results.push(ScenarioResult {
            scenario,
            metrics,
            per_dataset,
        });
    }
    Ok(results)
}

/// Seed-tree layout per dataset: child 0 feeds generation (whose own children
/// are the regeneration attempts); children 1–3 seed the GB, OB, and TB
/// bootstrap runs.
fn run_one_dataset(
    scenario: &ScenarioConfig,
    stream: SeedStream,
) -> Result<DatasetResult, SimError> {
    let data = generate_dataset(scenario, stream.child(0))?;
    let ps_terms = propensity_formula(scenario.ps_correctly_specified);
    let outcome_terms = outcome_formula();

    let ps_design = build_design(&data, &ps_terms, false)?;
    let fit = fit_logistic(
        &ps_design,
        data.treatment(),
        crate::model::DEFAULT_MAX_ITER,
        crate::model::DEFAULT_TOL,
    )?;

    let mut estimates = [MethodEstimate { mean: 0.0, se: 0.0 }; 3];
    for (m_idx, method) in Method::ALL.iter().enumerate() {
        let config = BootstrapConfig {
            method: *method,
            replicates: scenario.replicates,
            trim_threshold: scenario.trim_threshold,
            refit_propensity: scenario.refit_propensity,
            master_seed: stream.child(1 + m_idx as u64).seed(),
            irls_max_iter: crate::model::DEFAULT_MAX_ITER,
            irls_tol: crate::model::DEFAULT_TOL,
        };
        let result = run_bootstrap_with_propensity(
            &data,
            &fit.fitted_propensity,
            &ps_terms,
            &outcome_terms,
            &config,
        )?;
        estimates[m_idx] = MethodEstimate {
            mean: result.mean,
            se: result.se,
        };
    }
    Ok(DatasetResult {
        gb: estimates[0],
        ob: estimates[1],
        tb: estimates[2],
    })
}

/// Scenario-level metrics table, one row per scenario × method, mirroring the
/// study's summary tables.
pub fn metrics_csv(results: &[ScenarioResult]) -> String {
    let mut out = String::from(
        "sample_size,confounding,oversized,ps_spec,method,mean_bias,true_se,mean_se,se_of_se,underest_prop,coverage,re_point,re_se\n",
    );
    for r in results {
        let spec = if r.scenario.ps_correctly_specified {
            "correct"
        } else {
            "misspecified"
        };
        for method in Method::ALL {
            let m = r.metrics.get(method);
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
                r.scenario.sample_size,
                r.scenario.confounding_rho,
                r.scenario.selection_noise_var,
                spec,
                method.label(),
                m.mean_bias,
                m.true_se,
                m.mean_se,
                m.se_of_se,
                m.underestimation_proportion,
                m.coverage,
                m.re_point,
                m.re_se,
            ));
        }
    }
    out
}

/// Tidy per-dataset table (scenario, dataset, method, mean, se) from which
/// interval plots can be regenerated externally.
pub fn per_dataset_csv(results: &[ScenarioResult]) -> String {
    let mut out = String::from("scenario,dataset_index,method,mean,se\n");
    for r in results {
        let label = r.scenario.label();
        for (d_idx, d) in r.per_dataset.iter().enumerate() {
            for method in Method::ALL {
                let est = d.get(method);
                out.push_str(&format!(
                    "{label},{d_idx},{},{},{}\n",
                    method.label(),
                    est.mean,
                    est.se
                ));
            }
        }
    }
    out
}
