//! The estimation dataset and regression design construction.

use crate::linalg::Matrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("column lengths disagree: expected {expected}, column '{name}' has {actual}")]
    LengthMismatch {
        name: String,
        expected: usize,
        actual: usize,
    },
    #[error("non-finite value in column '{name}' at row {row}")]
    NonFinite { name: String, row: usize },
    #[error(
        "treatment arm too small: {n_treated} treated, {n_control} control (need at least 2 each)"
    )]
    ArmTooSmall { n_treated: usize, n_control: usize },
    #[error("unknown covariate column '{name}'")]
    UnknownColumn { name: String },
    #[error("duplicate covariate column '{name}'")]
    DuplicateColumn { name: String },
}

/// Observed rows for causal-effect estimation: a binary treatment indicator,
/// a real outcome, and named covariate columns.
#[derive(Debug, Clone)]
pub struct Dataset {
    treatment: Vec<bool>,
    outcome: Vec<f64>,
    covariate_names: Vec<String>,
    covariates: Vec<Vec<f64>>,
    n_treated: usize,
    n_control: usize,
}

impl Dataset {
    /// Validates lengths, finiteness, and that both arms hold at least two
    /// rows (the minimum for any weighted fit).
    pub fn new(
        treatment: Vec<bool>,
        outcome: Vec<f64>,
        covariates: Vec<(String, Vec<f64>)>,
    ) -> Result<Self, DataError> {
        let n = treatment.len();
        if outcome.len() != n {
            return Err(DataError::LengthMismatch {
                name: "outcome".into(),
                expected: n,
                actual: outcome.len(),
            });
        }
        for (row, y) in outcome.iter().enumerate() {
            if !y.is_finite() {
                return Err(DataError::NonFinite {
                    name: "outcome".into(),
                    row,
                });
            }
        }
        let mut names = Vec::with_capacity(covariates.len());
        let mut cols = Vec::with_capacity(covariates.len());
        for (name, col) in covariates {
            if names.contains(&name) {
                return Err(DataError::DuplicateColumn { name });
            }
            if col.len() != n {
                return Err(DataError::LengthMismatch {
                    expected: n,
                    actual: col.len(),
                    name,
                });
            }
            if let Some(row) = col.iter().position(|v| !v.is_finite()) {
                return Err(DataError::NonFinite { name, row });
            }
            names.push(name);
            cols.push(col);
        }
        let n_treated = treatment.iter().filter(|&&t| t).count();
        let n_control = n - n_treated;
        if n_treated < 2 || n_control < 2 {
            return Err(DataError::ArmTooSmall {
                n_treated,
                n_control,
            });
        }
        Ok(Dataset {
            treatment,
            outcome,
            covariate_names: names,
            covariates: cols,
            n_treated,
            n_control,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.treatment.len()
    }

    pub fn n_treated(&self) -> usize {
        self.n_treated
    }

    pub fn n_control(&self) -> usize {
        self.n_control
    }

    pub fn treatment(&self) -> &[bool] {
        &self.treatment
    }

    pub fn outcome(&self) -> &[f64] {
        &self.outcome
    }

    pub fn covariate_names(&self) -> &[String] {
        &self.covariate_names
    }

    pub fn covariate(&self, name: &str) -> Option<&[f64]> {
        self.covariate_names
            .iter()
            .position(|n| n == name)
            .map(|j| self.covariates[j].as_slice())
    }

    /// Row indices of treated rows, in dataset order.
    pub fn treated_rows(&self) -> Vec<usize> {
        (0..self.n_rows()).filter(|&i| self.treatment[i]).collect()
    }

    /// Row indices of control rows, in dataset order.
    pub fn control_rows(&self) -> Vec<usize> {
        (0..self.n_rows()).filter(|&i| !self.treatment[i]).collect()
    }
}

/// One predictor term of a regression formula. Interactions and squares are
/// materialized during design construction, never stored in the dataset, so a
/// specification toggle cannot drift out of sync with the raw columns.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Term {
    /// A raw covariate column.
    Column(String),
    /// Elementwise product of two covariate columns.
    Interaction(String, String),
    /// Elementwise square of a covariate column.
    Square(String),
}

impl Term {
    pub fn name(&self) -> String {
        match self {
            Term::Column(a) => a.clone(),
            Term::Interaction(a, b) => format!("{a}:{b}"),
            Term::Square(a) => format!("{a}^2"),
        }
    }
}

pub const INTERCEPT_NAME: &str = "(intercept)";
pub const TREATMENT_NAME: &str = "treatment";

/// A fully materialized design matrix with column names. The intercept is
/// always column 0; when the treatment indicator is included it is column 1.
#[derive(Debug, Clone)]
pub struct DesignMatrix {
    pub matrix: Matrix,
    pub col_names: Vec<String>,
    pub treatment_col: Option<usize>,
}

/// Builds the design for `terms`, with an implicit intercept and, when
/// `include_treatment` is set, the 0/1 treatment indicator as column 1.
pub fn build_design(
    data: &Dataset,
    terms: &[Term],
    include_treatment: bool,
) -> Result<DesignMatrix, DataError> {
    let n = data.n_rows();
    let offset = if include_treatment { 2 } else { 1 };
    let n_cols = offset + terms.len();

    let mut col_names = Vec::with_capacity(n_cols);
    col_names.push(INTERCEPT_NAME.to_string());
    if include_treatment {
        col_names.push(TREATMENT_NAME.to_string());
    }

    let mut matrix = Matrix::zeros(n, n_cols);
    for i in 0..n {
        matrix.set(i, 0, 1.0);
    }
    if include_treatment {
        for (i, &t) in data.treatment().iter().enumerate() {
            matrix.set(i, 1, if t { 1.0 } else { 0.0 });
        }
    }

    let lookup = |name: &str| {
        data.covariate(name)
            .ok_or_else(|| DataError::UnknownColumn {
                name: name.to_string(),
            })
    };
    for (t_idx, term) in terms.iter().enumerate() {
        let j = offset + t_idx;
        match term {
            Term::Column(a) => {
                for (i, v) in lookup(a)?.iter().enumerate() {
                    matrix.set(i, j, *v);
                }
            }
            Term::Interaction(a, b) => {
                let ca = lookup(a)?;
                let cb = lookup(b)?;
                for (i, (va, vb)) in ca.iter().zip(cb).enumerate() {
                    matrix.set(i, j, va * vb);
                }
            }
            Term::Square(a) => {
                for (i, v) in lookup(a)?.iter().enumerate() {
                    matrix.set(i, j, v * v);
                }
            }
        }
        col_names.push(term.name());
    }

    Ok(DesignMatrix {
        matrix,
        col_names,
        treatment_col: include_treatment.then_some(1),
    })
}
