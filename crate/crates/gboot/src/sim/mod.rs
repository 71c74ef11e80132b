//! Simulation study: data-generating process, scenario grid, evaluation
//! metrics, and the study driver.

mod dgp;
mod metrics;
mod study;

pub use dgp::{
    generate_dataset, outcome_formula, propensity_formula, selection_index, CovariateModel,
    ScenarioConfig, OUTCOME_NOISE_VAR, TRUE_EFFECT,
};
pub use metrics::{
    relative_efficiency, scenario_metrics, true_se, DatasetResult, MethodEstimate, MethodMetrics,
    ScenarioMetrics,
};
pub use study::{
    metrics_csv, per_dataset_csv, run_study, PsSpec, ScenarioResult, StudyConfig, StudyProgress,
};

use crate::bootstrap::BootstrapError;
use crate::data::DataError;
use crate::model::ModelError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("could not generate a dataset with both arms populated after {attempts} attempts")]
    DegenerateTreatmentArm { attempts: usize },
    #[error("invalid covariate model: {0}")]
    InvalidCovariateModel(String),
    #[error(transparent)]
    Bootstrap(#[from] BootstrapError),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("in {scenario}: {source}")]
    InScenario {
        scenario: String,
        #[source]
        source: Box<SimError>,
    },
}
