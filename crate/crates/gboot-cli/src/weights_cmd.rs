//! `gboot weights`: fit the propensity model, print weight diagnostics per
//! group and resampling-probability summaries, and write the diagnostics and
//! histogram tables.

use crate::manifest::{unix_now, RunManifest};
use crate::{ensure_out_dir, write_output, CliError, WeightsArgs};
use gboot::analyze::{histogram, load_empirical, HISTOGRAM_BINS};
use gboot::data::{build_design, Term};
use gboot::model::{fit_logistic, DEFAULT_MAX_ITER, DEFAULT_TOL};
use gboot::weights::{
    diagnostics_csv_header, gb_sampling_probabilities, iptw_weights, trim_weights,
    weight_diagnostics, weight_diagnostics_for, Group, WeightDiagnostics,
};
use std::path::Path;

pub fn run(
    args: WeightsArgs,
    seed: Option<u64>,
    threads: usize,
    out: &Path,
) -> Result<(), CliError> {
    if args.threshold.is_nan() || args.threshold <= 0.0 {
        return Err(CliError::config("threshold must be positive"));
    }
    let schema = args.schema.to_schema();
    let (data, load) = load_empirical(&args.data, &schema).map_err(CliError::config)?;
    let started = unix_now();

    let terms = vec![
        Term::Column(schema.pretest.clone()),
        Term::Column(schema.income.clone()),
        Term::Interaction(schema.pretest.clone(), schema.income.clone()),
    ];
    let design = build_design(&data, &terms, false).map_err(CliError::runtime)?;
    let fit = fit_logistic(&design, data.treatment(), DEFAULT_MAX_ITER, DEFAULT_TOL)
        .map_err(CliError::runtime)?;
    if !fit.converged {
        eprintln!("warning: propensity fit did not converge");
    }
    if fit.separation_detected {
        eprintln!("warning: separation detected in the propensity model");
    }

    let iptw = iptw_weights(&fit.fitted_propensity, data.treatment()).map_err(CliError::runtime)?;
    let trimmed = trim_weights(&iptw, args.threshold).map_err(CliError::runtime)?;
    let all = weight_diagnostics(&iptw, args.threshold);
    let treated = weight_diagnostics_for(&iptw, Group::Treated, args.threshold);
    let control = weight_diagnostics_for(&iptw, Group::Control, args.threshold);
    let trimmed_all = weight_diagnostics(&trimmed, args.threshold);

    println!(
        "rows retained: {} ({} treated, {} control)",
        load.rows_retained,
        data.n_treated(),
        data.n_control()
    );
    print_diag("iptw (all)", &all);
    print_diag("iptw (treated)", &treated);
    print_diag("iptw (control)", &control);
    print_diag("trimmed (all)", &trimmed_all);

    let probs = gb_sampling_probabilities(&fit.fitted_propensity, data.treatment())
        .map_err(CliError::runtime)?;
    for (label, p) in [("treated", &probs.treated), ("control", &probs.control)] {
        let max = p.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let min = p.iter().copied().fold(f64::INFINITY, f64::min);
        let sum: f64 = p.iter().sum();
        println!(
            "GB sampling probabilities ({label}): n {}, min {min:.6}, max {max:.6}, sum {sum:.12}",
            p.len()
        );
    }

    ensure_out_dir(out)?;
    let mut diag_csv = diagnostics_csv_header();
    diag_csv.push('\n');
    diag_csv.push_str(&all.csv_row("iptw"));
    diag_csv.push('\n');
    diag_csv.push_str(&treated.csv_row("iptw:treated"));
    diag_csv.push('\n');
    diag_csv.push_str(&control.csv_row("iptw:control"));
    diag_csv.push('\n');
    diag_csv.push_str(&trimmed_all.csv_row("trimmed"));
    diag_csv.push('\n');
    let diag_path = out.join("weight_diagnostics.csv");
    write_output(&diag_path, &diag_csv)?;

    let max_weight = iptw
        .values()
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    let mut hist_csv = String::from("group,variable,bin_low,bin_high,count\n");
    for (group, tag) in [(Group::Treated, "treated"), (Group::Control, "control")] {
        let rows: Vec<usize> = match group {
            Group::Treated => data.treated_rows(),
            Group::Control => data.control_rows(),
        };
        let e: Vec<f64> = rows.iter().map(|&i| fit.fitted_propensity[i]).collect();
        let w: Vec<f64> = rows.iter().map(|&i| iptw.values()[i]).collect();
        for (variable, values, lo, hi) in [
            ("propensity", &e, 0.0, 1.0),
            ("weight", &w, 0.0, max_weight),
        ] {
            let h = histogram(values, lo, hi, HISTOGRAM_BINS);
            for i in 0..h.counts.len() {
                hist_csv.push_str(&format!(
                    "{tag},{variable},{},{},{}\n",
                    h.bin_low[i], h.bin_high[i], h.counts[i]
                ));
            }
        }
    }
    let hist_path = out.join("histograms.csv");
    write_output(&hist_path, &hist_csv)?;

    let manifest = RunManifest {
        subcommand: "weights".to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        master_seed: seed.unwrap_or(1),
        threads,
        config: serde_json::json!({
            "data": args.data.display().to_string(),
            "threshold": args.threshold,
        }),
        started_unix: started,
        finished_unix: unix_now(),
        outputs: vec![
            diag_path.display().to_string(),
            hist_path.display().to_string(),
        ],
    };
    manifest.write(out).map_err(CliError::runtime)?;
    Ok(())
}

fn print_diag(label: &str, d: &WeightDiagnostics) {
    let oversized_mean = d
        .oversized_mean
        .map(|m| format!("{m:.2}"))
        .unwrap_or_else(|| "NA".to_string());
    println!(
        "{label}: mean {:.3}, variance {:.2}, oversized (> {}) {} with mean {}, max {:.2}",
        d.mean, d.variance, d.threshold, d.oversized_count, oversized_mean, d.max_weight
    );
}
