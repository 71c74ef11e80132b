//! `gboot simulate`: run the scenario study, write the metrics table, the
//! tidy per-dataset table, and the run manifest.

use crate::manifest::{unix_now, RunManifest};
use crate::{ensure_out_dir, write_output, CliError, SimulateArgs};
use gboot::analyze::{load_empirical, EmpiricalSchema};
use gboot::sim::{
    metrics_csv, per_dataset_csv, run_study, CovariateModel, PsSpec, StudyConfig, StudyProgress,
};
use std::path::Path;

pub fn run(
    args: SimulateArgs,
    seed: Option<u64>,
    threads: usize,
    out: &Path,
) -> Result<(), CliError> {
    let config = resolve_config(&args, seed)?;
    ensure_out_dir(out)?;
    let started = unix_now();

    let progress = |event: StudyProgress| match event {
        StudyProgress::ScenarioStarted {
            index,
            total,
            label,
        } => {
            eprintln!("[{}/{}] {label}", index + 1, total);
        }
        StudyProgress::DatasetFinished {
            completed, total, ..
        } => {
            if completed % 100 == 0 || completed == total {
                eprintln!("    {completed}/{total} datasets");
            }
        }
        StudyProgress::ScenarioFinished { label, metrics, .. } => {
            eprintln!(
                "    {label}: GB coverage {:.3}, OB coverage {:.3}, TB coverage {:.3}",
                metrics.gb.coverage, metrics.ob.coverage, metrics.tb.coverage
            );
        }
    };
    let results = run_study(&config, Some(&progress)).map_err(CliError::runtime)?;

    let metrics_path = out.join("metrics.csv");
    let tidy_path = out.join("per_dataset.csv");
    write_output(&metrics_path, &metrics_csv(&results))?;
    write_output(&tidy_path, &per_dataset_csv(&results))?;

    let manifest = RunManifest {
        subcommand: "simulate".to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        master_seed: config.seed,
        threads,
        config: serde_json::to_value(&config).map_err(CliError::runtime)?,
        started_unix: started,
        finished_unix: unix_now(),
        outputs: vec![
            metrics_path.display().to_string(),
            tidy_path.display().to_string(),
        ],
    };
    manifest.write(out).map_err(CliError::runtime)?;
    eprintln!(
        "wrote {} and {}",
        metrics_path.display(),
        tidy_path.display()
    );
    Ok(())
}

/// Precedence: defaults < config file < explicit flags.
fn resolve_config(args: &SimulateArgs, seed: Option<u64>) -> Result<StudyConfig, CliError> {
    let mut config = match &args.config {
        Some(path) => {
            let body = std::fs::read_to_string(path)
                .map_err(|e| CliError::config(format!("cannot read config {path:?}: {e}")))?;
            serde_json::from_str::<StudyConfig>(&body)
                .map_err(|e| CliError::config(format!("invalid config {path:?}: {e}")))?
        }
        None => StudyConfig::default(),
    };

    match args.scenarios.as_str() {
        "full" => {
            config.sizes = vec![1000, 5000, 10000];
            config.ps_specs = vec![PsSpec::Correct, PsSpec::Misspecified];
        }
        "n1000" => config.sizes = vec![1000],
        "n5000" => config.sizes = vec![5000],
        "n10000" => config.sizes = vec![10000],
        other => {
            return Err(CliError::config(format!(
                "unknown scenario subset '{other}' (expected n1000, n5000, n10000, or full)"
            )))
        }
    }
    if args.scenarios != "full" {
        config.ps_specs = match args.ps_spec.as_str() {
            "correct" => vec![PsSpec::Correct],
            "mis" | "misspecified" => vec![PsSpec::Misspecified],
            "both" => vec![PsSpec::Correct, PsSpec::Misspecified],
            other => {
                return Err(CliError::config(format!(
                    "unknown ps-spec '{other}' (expected correct, mis, or both)"
                )))
            }
        };
    }
    if let Some(d) = args.datasets {
        config.datasets = d;
    }
    if let Some(b) = args.bootstrap {
        config.bootstrap_replicates = b;
    }
    if let Some(t) = args.trim_threshold {
        config.trim_threshold = t;
    }
    if args.refit_ps {
        config.refit_propensity = true;
    }
    if let Some(s) = seed {
        config.seed = s;
    }
    if let Some(path) = &args.calibrate {
        let (data, _) = load_empirical(path, &EmpiricalSchema::default())
            .map_err(|e| CliError::config(format!("cannot calibrate from {path:?}: {e}")))?;
        config.covariates = CovariateModel::from_dataset(&data, "math8", "faminc8")
            .map_err(|e| CliError::config(format!("calibration failed: {e}")))?;
    }
    if config.datasets == 0 || config.bootstrap_replicates < 2 {
        return Err(CliError::config(
            "need at least 1 dataset and 2 bootstrap replicates".to_string(),
        ));
    }
    Ok(config)
}
