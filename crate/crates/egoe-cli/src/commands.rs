//! Subcommand implementations. The orchestrator owns all I/O; the compute
//! pipelines in the `egoe` crate only return values.

use std::time::Instant;

use egoe::analytics::{
    self, ed_gaussian_density, gamma2_asymptotic, gamma2_finite, semicircle_density,
    variance_h0, variance_v,
};
use egoe::dynamics::{averaged_survival, time_grid};
use egoe::ensemble::EnsembleConfig;
use egoe::fock::sp_energies;
use egoe::spectral::{ensemble_density, DensityRun};

use crate::config::RunConfig;
use crate::output::{AnalyticRow, CsvFile, FailureRecord, KSummary, RunManifest};
use crate::CliError;

/// Fraction of failed members above which a sampling run is a numerical
/// failure (exit code 2).
const FAILURE_THRESHOLD: f64 = 0.01;

/// Closed-form table for the configured k range; no sampling involved.
pub fn analytic_table(config: &RunConfig) -> Vec<AnalyticRow> {
    let eps = sp_energies(config.levels);
    let s2_h0 = if config.pure_interaction {
        0.0
    } else {
        variance_h0(config.levels, config.fermions, &eps)
    };
    config
        .k_values
        .iter()
        .map(|&k| {
            let p = config.params_for(k);
            let s2_v = variance_v(&p);
            let total = s2_h0 + s2_v;
            AnalyticRow {
                k,
                sigma2_v: s2_v,
                fourth_moment_v: analytics::fourth_moment_v(&p),
                gamma2_finite: gamma2_finite(&p).ok(),
                gamma2_asymptotic: gamma2_asymptotic(k, config.fermions),
                sigma2_h0: s2_h0,
                sigma0_sq: if total == 0.0 { 0.0 } else { s2_v / total },
            }
        })
        .collect()
}

/// `egoe analytic`: print the table and exit; nothing is sampled or written.
pub fn cmd_analytic(config: &RunConfig) -> Result<(), CliError> {
    let rows = analytic_table(config);
    println!(
        "{:>3} {:>14} {:>16} {:>12} {:>12} {:>12} {:>10}",
        "k", "sigma2_V", "fourth_moment", "gamma2", "gamma2_asym", "sigma2_H0", "sigma0_sq"
    );
    for r in rows {
        let g2 = r
            .gamma2_finite
            .map(|g| format!("{g:.6}"))
            .unwrap_or_else(|| "n/a".into());
        println!(
            "{:>3} {:>14.6} {:>16.6} {:>12} {:>12.6} {:>12.6} {:>10.6}",
            r.k, r.sigma2_v, r.fourth_moment_v, g2, r.gamma2_asymptotic, r.sigma2_h0, r.sigma0_sq
        );
    }
    Ok(())
}

fn ensemble_config(config: &RunConfig, k: u32) -> EnsembleConfig {
    EnsembleConfig {
        params: config.params_for(k),
        members: config.members,
        base_seed: config.base_seed,
    }
}

fn eps_for(config: &RunConfig) -> Option<Vec<f64>> {
    if config.pure_interaction {
        None
    } else {
        Some(sp_energies(config.levels))
    }
}

fn check_failure_threshold(k: u32, failed: usize, members: u32) -> Result<(), CliError> {
    let frac = failed as f64 / members as f64;
    if frac > FAILURE_THRESHOLD {
        return Err(CliError::Numerical(format!(
            "k={k}: {failed}/{members} members failed ({:.1}% > {:.0}%)",
            100.0 * frac,
            100.0 * FAILURE_THRESHOLD
        )));
    }
    Ok(())
}

/// Runs one k of the density pipeline and writes `density_k{K}.csv`.
fn density_for_k(
    config: &RunConfig,
    k: u32,
    eps: Option<&[f64]>,
    manifest: &mut RunManifest,
) -> Result<DensityRun, CliError> {
    let run = ensemble_density(&ensemble_config(config, k), eps, &config.histogram_spec())
        .map_err(|e| CliError::Numerical(e.to_string()))?;
    manifest
        .failures
        .extend(FailureRecord::from_members(k, &run.failures));
    check_failure_threshold(k, run.failures.len(), config.members)?;

    let mut csv = CsvFile::create(
        &config.out_dir,
        &format!("density_k{k}.csv"),
        config,
        Some(k),
    )?;
    csv.comment(&format!(
        "pooled moments: variance {:.6} gamma1 {:+.6} gamma2 {:+.6}",
        run.moments.variance, run.moments.gamma1, run.moments.gamma2
    ))?;
    csv.comment(&format!(
        "out_of_range_fraction: {:.6e}",
        run.histogram.out_of_range_fraction()
    ))?;
    csv.header(&[
        "bin_center",
        "density_numeric",
        "density_ed_gaussian",
        "density_semicircle",
    ])?;
    // the model columns follow the histogram normalization convention
    let dim_scale = match config.normalize.as_str() {
        "dim" => config.params_for(k).basis_dim() as f64,
        _ => 1.0,
    };
    let centers = run.histogram.bin_centers();
    let density = run.histogram.density();
    for (&c, &d) in centers.iter().zip(&density) {
        let ed = ed_gaussian_density(c, run.moments.gamma1, run.moments.gamma2) * dim_scale;
        let sc = semicircle_density(c) * dim_scale;
        csv.row(&[c, d, ed, sc])?;
    }
    manifest.outputs.push(csv.finish()?.display().to_string());

    if config.dump_matrices {
        manifest.outputs.push(dump_member0_matrix(config, k)?);
    }

    manifest.summaries.push(KSummary {
        k,
        gamma2_pooled: Some(run.moments.gamma2),
        trace_variance: Some(run.trace_variance.mean),
        out_of_range_fraction: Some(run.histogram.out_of_range_fraction()),
        ..Default::default()
    });
    Ok(run)
}

/// Debug dump of the first member's interaction matrix, regenerated from
/// its substream.
fn dump_member0_matrix(config: &RunConfig, k: u32) -> Result<String, CliError> {
    use egoe::ensemble::{draw_coefficients, member_stream};
    use egoe::fock::{build_v_matrix, write_matrix_dump};

    let mut rng = member_stream(config.base_seed, 0);
    let coeffs = draw_coefficients(config.levels, k, &mut rng);
    let v = build_v_matrix(config.levels, config.fermions, k, &coeffs)
        .map_err(|e| CliError::Numerical(e.to_string()))?;
    let path = config.out_dir.join(format!("vmatrix_k{k}.bin"));
    let mut file = std::fs::File::create(&path)
        .map_err(|e| CliError::Io(format!("create {}: {e}", path.display())))?;
    write_matrix_dump(&mut file, config.levels, config.fermions, k, &v)
        .map_err(|e| CliError::Io(format!("write {}: {e}", path.display())))?;
    Ok(path.display().to_string())
}

/// `egoe density`: eigenvalue-density histograms against the
/// Edgeworth-corrected Gaussian and the semicircle, one CSV per k.
pub fn cmd_density(config: &RunConfig) -> Result<(), CliError> {
    let started = Instant::now();
    let mut manifest = RunManifest::new("density", config.clone());
    manifest.analytic = analytic_table(config);
    let eps = eps_for(config);

    let mut outcome = Ok(());
    for &k in &config.k_values {
        match density_for_k(config, k, eps.as_deref(), &mut manifest) {
            Ok(run) => {
                println!(
                    "k={k}: {} members pooled, gamma2 = {:+.4} ({} failures)",
                    run.histogram.members(),
                    run.moments.gamma2,
                    run.failures.len()
                );
            }
            Err(e) => {
                manifest.errors.push(e.to_string());
                outcome = Err(e);
                break;
            }
        }
    }
    manifest.wall_clock_seconds = started.elapsed().as_secs_f64();
    manifest.write(&config.out_dir)?;
    outcome
}

/// `egoe moments`: Monte Carlo trace variance and pooled kurtosis against
/// the closed forms, one row per k in `moments.csv`. Always runs on pure
/// V(k): the closed forms being checked describe the interaction alone.
pub fn cmd_moments(config: &RunConfig) -> Result<(), CliError> {
    let started = Instant::now();
    let mut manifest = RunManifest::new("moments", config.clone());
    manifest.analytic = analytic_table(config);

    let mut csv = CsvFile::create(&config.out_dir, "moments.csv", config, None)?;
    csv.header(&[
        "k",
        "sigma2_numeric",
        "sigma2_numeric_err",
        "sigma2_eq",
        "gamma2_numeric",
        "gamma2_numeric_err",
        "gamma2_finite_n",
        "gamma2_asymptotic",
    ])?;

    let mut outcome = Ok(());
    for &k in &config.k_values {
        let run = match ensemble_density(
            &ensemble_config(config, k),
            None,
            &config.histogram_spec(),
        ) {
            Ok(run) => run,
            Err(e) => {
                let msg = e.to_string();
                manifest.errors.push(msg.clone());
                outcome = Err(CliError::Numerical(msg));
                break;
            }
        };
        manifest
            .failures
            .extend(FailureRecord::from_members(k, &run.failures));
        if let Err(e) = check_failure_threshold(k, run.failures.len(), config.members) {
            manifest.errors.push(e.to_string());
            outcome = Err(e);
            break;
        }
        let p = config.params_for(k);
        csv.row_with_index(
            k as u64,
            &[
                run.trace_variance.mean,
                run.trace_variance.std_error,
                variance_v(&p),
                run.moments.gamma2,
                run.member_gamma2.std_error,
                gamma2_finite(&p).unwrap_or(f64::NAN),
                gamma2_asymptotic(k, config.fermions),
            ],
        )?;
        manifest.summaries.push(KSummary {
            k,
            gamma2_pooled: Some(run.moments.gamma2),
            trace_variance: Some(run.trace_variance.mean),
            ..Default::default()
        });
        println!(
            "k={k}: sigma2 MC/closed = {:.4}, gamma2 pooled = {:+.4}",
            run.trace_variance.mean / variance_v(&p),
            run.moments.gamma2
        );
    }
    manifest.outputs.push(csv.finish()?.display().to_string());
    manifest.wall_clock_seconds = started.elapsed().as_secs_f64();
    manifest.write(&config.out_dir)?;
    outcome
}

/// `egoe survival`: ensemble-averaged post-quench survival probability per
/// k, with the Gaussian and Bessel laws attached, plus the strength-function
/// diagnostic histogram.
pub fn cmd_survival(config: &RunConfig) -> Result<(), CliError> {
    let started = Instant::now();
    let mut manifest = RunManifest::new("survival", config.clone());
    manifest.analytic = analytic_table(config);
    let eps = eps_for(config);
    let times = time_grid(config.t_max, config.time_points);

    let mut outcome = Ok(());
    for &k in &config.k_values {
        let run = match averaged_survival(
            &ensemble_config(config, k),
            eps.as_deref(),
            config.delta,
            &times,
            &config.histogram_spec(),
        ) {
            Ok(run) => run,
            Err(e) => {
                let msg = e.to_string();
                manifest.errors.push(msg.clone());
                outcome = Err(CliError::Numerical(msg));
                break;
            }
        };
        let curve = &run.curve;
        manifest
            .failures
            .extend(FailureRecord::from_members(k, &curve.failures));
        if let Err(e) = check_failure_threshold(k, curve.failures.len(), config.members) {
            manifest.errors.push(e.to_string());
            outcome = Err(e);
            break;
        }

        let mut csv = CsvFile::create(
            &config.out_dir,
            &format!("survival_k{k}.csv"),
            config,
            Some(k),
        )?;
        csv.comment(&format!("delta: {}", config.delta))?;
        csv.comment(&format!(
            "sigma0_sq analytic: {:.6}  measured: {:.6} +- {:.6}",
            curve.sigma0_sq, curve.sigma0_sq_measured.mean, curve.sigma0_sq_measured.std_error
        ))?;
        csv.comment(&format!(
            "pairs: {}  fallback_members: {}",
            curve.pair_count, curve.fallback_members
        ))?;
        csv.header(&["t", "F_numeric", "F_sem", "F_gauss", "F_bessel"])?;
        for i in 0..curve.times.len() {
            csv.row(&[
                curve.times[i],
                curve.f_numeric[i],
                curve.std_error[i],
                curve.f_gauss[i],
                curve.f_bessel[i],
            ])?;
        }
        manifest.outputs.push(csv.finish()?.display().to_string());

        let mut strength = CsvFile::create(
            &config.out_dir,
            &format!("strength_k{k}.csv"),
            config,
            Some(k),
        )?;
        strength.comment(&format!(
            "out_of_range_weight_fraction: {:.6e}",
            run.strength.out_of_range_fraction()
        ))?;
        strength.header(&["bin_center", "strength"])?;
        for (&c, &w) in run
            .strength
            .bin_centers()
            .iter()
            .zip(&run.strength.density())
        {
            strength.row(&[c, w])?;
        }
        manifest.outputs.push(strength.finish()?.display().to_string());

        manifest.summaries.push(KSummary {
            k,
            pair_count: Some(curve.pair_count),
            fallback_members: Some(curve.fallback_members),
            sigma0_sq_measured: Some(curve.sigma0_sq_measured.mean),
            sigma0_sq_measured_err: Some(curve.sigma0_sq_measured.std_error),
            ..Default::default()
        });
        println!(
            "k={k}: {} pairs, sigma0^2 analytic {:.4} / measured {:.4} ({} failures)",
            curve.pair_count,
            curve.sigma0_sq,
            curve.sigma0_sq_measured.mean,
            curve.failures.len()
        );
    }
    manifest.wall_clock_seconds = started.elapsed().as_secs_f64();
    manifest.write(&config.out_dir)?;
    outcome
}
