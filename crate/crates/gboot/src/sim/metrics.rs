//! Evaluation metrics for a simulation scenario.

use crate::bootstrap::{Method, CI_MULTIPLIER};
use crate::stat;
use serde::Serialize;

/// Approximate true standard error over per-dataset point estimates:
/// `sqrt(MSE − MB²)` against the known effect, which is algebraically the
/// population-style (denominator n) standard deviation of the estimates. A
/// negative radicand can only arise from rounding and is clamped to zero.
pub fn true_se(estimates: &[f64], beta_true: f64) -> f64 {
    assert!(!estimates.is_empty(), "true_se needs at least one estimate");
    let n = estimates.len() as f64;
    let mb: f64 = estimates.iter().map(|e| e - beta_true).sum::<f64>() / n;
    let mse: f64 = estimates
        .iter()
        .map(|e| (e - beta_true) * (e - beta_true))
        .sum::<f64>()
        / n;
    (mse - mb * mb).max(0.0).sqrt()
}

/// Efficiency of a method relative to a reference, as the variance ratio
/// `(method / reference)²` of the corresponding spread statistics.
pub fn relative_efficiency(method_spread: f64, reference_spread: f64) -> f64 {
    let ratio = method_spread / reference_spread;
    ratio * ratio
}

/// Bootstrap output of one method on one simulated dataset.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct MethodEstimate {
    pub mean: f64,
    pub se: f64,
}

/// Bootstrap outputs of all three methods on one simulated dataset.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct DatasetResult {
    pub gb: MethodEstimate,
    pub ob: MethodEstimate,
    pub tb: MethodEstimate,
}

impl DatasetResult {
    pub fn get(&self, method: Method) -> MethodEstimate {
        match method {
            Method::Gb => self.gb,
            Method::Ob => self.ob,
            Method::Tb => self.tb,
        }
    }
}

/// The six per-method evaluation metrics plus efficiencies relative to OB.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct MethodMetrics {
    pub mean_bias: f64,
    pub true_se: f64,
    pub mean_se: f64,
    /// Sample standard deviation of the per-dataset SE estimates.
    pub se_of_se: f64,
    /// Fraction of datasets whose SE estimate fell below this method's true SE.
    pub underestimation_proportion: f64,
    /// Fraction of datasets whose `mean ± 1.96·se` interval covers the truth.
    pub coverage: f64,
    pub re_point: f64,
    pub re_se: f64,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct ScenarioMetrics {
    pub gb: MethodMetrics,
    pub ob: MethodMetrics,
    pub tb: MethodMetrics,
}

impl ScenarioMetrics {
    pub fn get(&self, method: Method) -> &MethodMetrics {
        match method {
            Method::Gb => &self.gb,
            Method::Ob => &self.ob,
            Method::Tb => &self.tb,
        }
    }
}

fn method_metrics(results: &[DatasetResult], method: Method, beta_true: f64) -> MethodMetrics {
    let means: Vec<f64> = results.iter().map(|r| r.get(method).mean).collect();
    let ses: Vec<f64> = results.iter().map(|r| r.get(method).se).collect();
    let true_se_val = true_se(&means, beta_true);
    let covered = results
        .iter()
        .filter(|r| {
            let m = r.get(method);
            (m.mean - CI_MULTIPLIER * m.se) <= beta_true
                && beta_true <= (m.mean + CI_MULTIPLIER * m.se)
        })
        .count();
    let underestimated = ses.iter().filter(|se| **se < true_se_val).count();
    MethodMetrics {
        mean_bias: stat::mean(&means) - beta_true,
        true_se: true_se_val,
        mean_se: stat::mean(&ses),
        se_of_se: stat::sample_sd(&ses),
        underestimation_proportion: underestimated as f64 / results.len() as f64,
        coverage: covered as f64 / results.len() as f64,
        re_point: f64::NAN, // filled in against OB below
        re_se: f64::NAN,
    }
}

/// Aggregates per-dataset bootstrap outputs into the scenario metrics table.
/// Relative efficiencies are variance ratios against OB, which therefore has
/// both efficiencies pinned at one.
pub fn scenario_metrics(results: &[DatasetResult], beta_true: f64) -> ScenarioMetrics {
    assert!(!results.is_empty(), "no per-dataset results");
    let mut gb = method_metrics(results, Method::Gb, beta_true);
    let mut ob = method_metrics(results, Method::Ob, beta_true);
    let mut tb = method_metrics(results, Method::Tb, beta_true);
    gb.re_point = relative_efficiency(gb.true_se, ob.true_se);
    gb.re_se = relative_efficiency(gb.se_of_se, ob.se_of_se);
    tb.re_point = relative_efficiency(tb.true_se, ob.true_se);
    tb.re_se = relative_efficiency(tb.se_of_se, ob.se_of_se);
    ob.re_point = 1.0;
    ob.re_se = 1.0;
    ScenarioMetrics { gb, ob, tb }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SeedStream;
    use crate::stat::population_sd;
    use rand::Rng;

    #[test]
    fn true_se_zero_dispersion() {
        // Bias alone: all estimates equal 2 against truth 1.677. The
        // uncentered MSE − MB² cancels to rounding noise, so the result is
        // zero up to sqrt-of-epsilon.
        let estimates = [2.0; 7];
        assert!(true_se(&estimates, 1.677) < 1e-7);
    }

    #[test]
    fn true_se_symmetric_pair() {
        assert!((true_se(&[1.0, 3.0], 2.0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn true_se_equals_population_sd() {
        let mut rng = SeedStream::new(8).rng();
        for _ in 0..50 {
            let v: Vec<f64> = (0..40).map(|_| rng.random::<f64>() * 10.0 - 5.0).collect();
            let lhs = true_se(&v, 1.234);
            let rhs = population_sd(&v);
            assert!((lhs - rhs).abs() < 1e-10, "{lhs} vs {rhs}");
        }
    }

    #[test]
    fn identical_methods_give_identical_metrics_and_unit_re() {
        let results: Vec<DatasetResult> = (0..20)
            .map(|i| {
                let est = MethodEstimate {
                    mean: 1.5 + 0.03 * i as f64,
                    se: 0.2 + 0.001 * i as f64,
                };
                DatasetResult {
                    gb: est,
                    ob: est,
                    tb: est,
                }
            })
            .collect();
        let m = scenario_metrics(&results, 1.677);
        assert_eq!(m.gb.coverage, m.ob.coverage);
        assert_eq!(m.gb.mean_bias, m.ob.mean_bias);
        assert!((m.gb.re_point - 1.0).abs() < 1e-12);
        assert!((m.gb.re_se - 1.0).abs() < 1e-12);
        assert_eq!(m.ob.re_point, 1.0);
        assert_eq!(m.ob.re_se, 1.0);
        assert!(m.gb.coverage >= 0.0 && m.gb.coverage <= 1.0);
        assert!(m.gb.underestimation_proportion >= 0.0 && m.gb.underestimation_proportion <= 1.0);
    }
}
