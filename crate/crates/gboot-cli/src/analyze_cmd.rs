//! `gboot analyze`: bootstrap an empirical dataset, write the JSON report,
//! histogram tables, optional raw estimate dumps, and the run manifest.

use crate::manifest::{unix_now, RunManifest};
use crate::{ensure_out_dir, write_output, AnalyzeArgs, CliError};
use gboot::analyze::{load_empirical, run_empirical_full, EmpiricalConfig};
use gboot::bootstrap::Method;
use std::path::Path;

pub fn run(
    args: AnalyzeArgs,
    seed: Option<u64>,
    threads: usize,
    out: &Path,
) -> Result<(), CliError> {
    let methods: Vec<Method> = match args.method.as_str() {
        "all" => Method::ALL.to_vec(),
        one => vec![one.parse().map_err(CliError::config)?],
    };
    if args.bootstrap < 2 {
        return Err(CliError::config("need at least 2 bootstrap replicates"));
    }
    let schema = args.schema.to_schema();

    // Input is loaded and validated before any output path is touched, so a
    // bad invocation leaves no partial output behind.
    let (data, load) = load_empirical(&args.data, &schema).map_err(CliError::config)?;

    let config = EmpiricalConfig {
        methods,
        replicates: args.bootstrap,
        trim_threshold: args.trim_threshold,
        refit_propensity: args.refit_ps,
        master_seed: seed.unwrap_or(1),
        schema,
    };
    let started = unix_now();
    let run = run_empirical_full(&data, &load, &config).map_err(CliError::runtime)?;

    ensure_out_dir(out)?;
    let report_path = out.join("report.json");
    let hist_path = out.join("histograms.csv");
    write_output(&report_path, &run.report.to_json())?;
    write_output(&hist_path, &run.report.histograms_csv())?;
    let mut outputs = vec![
        report_path.display().to_string(),
        hist_path.display().to_string(),
    ];
    if args.dump_estimates {
        for (method, result) in &run.results {
            let path = out.join(format!(
                "estimates_{}.csv",
                method.label().to_ascii_lowercase()
            ));
            write_output(&path, &result.estimates_csv())?;
            outputs.push(path.display().to_string());
        }
    }

    for summary in &run.report.methods {
        println!(
            "{}: mean {:.4}, se {:.4}, 95% CI [{:.4}, {:.4}] ({} replicates, {} failed)",
            summary.method,
            summary.mean,
            summary.se,
            summary.ci_low,
            summary.ci_high,
            summary.replicates,
            summary.n_failed
        );
    }
    println!(
        "rows: {} read, {} retained ({} missing, {} high-income); oversized weights: {}",
        run.report.rows_read,
        run.report.rows_retained,
        run.report.rows_dropped_missing,
        run.report.rows_dropped_high_income,
        run.report.oversized_count
    );

    let manifest = RunManifest {
        subcommand: "analyze".to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        master_seed: config.master_seed,
        threads,
        config: serde_json::json!({
            "data": args.data.display().to_string(),
            "analysis": serde_json::to_value(&config).map_err(CliError::runtime)?,
            "dump_estimates": args.dump_estimates,
        }),
        started_unix: started,
        finished_unix: unix_now(),
        outputs,
    };
    manifest.write(out).map_err(CliError::runtime)?;
    Ok(())
}
