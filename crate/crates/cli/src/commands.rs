use std::fs::File;
use std::io::{BufWriter, Write};
use std::time::Instant;

use mdshrink::rmt::optimal_delta;
use mdshrink::shrinkers::eta_classical;
use mdshrink::sim::{
    run_manifold_experiment_with, run_spiked_experiment_with, ErrorMetric,
    ManifoldExperimentConfig, SpikedExperimentConfig, RNG_ALGORITHM,
};
use mdshrink::{AspectRatio, Execution, ShrinkageRule};
use serde_json::Value;

use crate::args::{AsymLossArgs, Cli, Command, ManifoldSimArgs, ShrinkerCurveArgs, SpikedSimArgs};
use crate::output::{write_csv, write_json, Manifest, Table};
use crate::CliError;

const MAX_GRID_POINTS: usize = 10_000_000;

/// Evenly spaced points `min, min + step, ...` up to `max` inclusive.
///
/// Each point is `k * step` rounded to the nearest grid multiple when it is
/// one, so round values such as `alpha = 2` appear exactly.
pub fn grid(name: &str, min: f64, max: f64, step: f64) -> Result<Vec<f64>, CliError> {
    if !(min.is_finite() && max.is_finite() && step.is_finite()) || step <= 0.0 || max < min {
        return Err(CliError::Usage(format!(
            "invalid {name} range [{min}, {max}] with step {step}"
        )));
    }
    let count = ((max - min) / step + 1e-9).floor() as usize + 1;
    if count > MAX_GRID_POINTS {
        return Err(CliError::Usage(format!("{name} grid has {count} points")));
    }
    Ok((0..count)
        .map(|i| {
            let x = min + i as f64 * step;
            let k = (x / step).round();
            if (k * step - x).abs() <= 1e-9 * step {
                k * step
            } else {
                x
            }
        })
        .collect())
}

fn beta(b: f64) -> Result<AspectRatio, CliError> {
    AspectRatio::new(b).map_err(|e| CliError::Usage(e.to_string()))
}

struct Outcome {
    table: Table,
    seed: Option<u64>,
    config: Value,
}

fn asym_loss(a: &AsymLossArgs) -> Result<Outcome, CliError> {
    if a.alpha_min <= 0.0 {
        return Err(CliError::Usage(format!(
            "alpha range must lie in (0, inf), got min {}",
            a.alpha_min
        )));
    }
    if a.beta.is_empty() {
        return Err(CliError::Usage("empty beta list".into()));
    }
    let alphas = grid("alpha", a.alpha_min, a.alpha_max, a.step)?;
    let betas = a
        .beta
        .iter()
        .map(|&b| beta(b))
        .collect::<Result<Vec<_>, _>>()?;
    let mut table = Table::new(&["beta", "alpha", "optimal_delta"]);
    for b in &betas {
        for &alpha in &alphas {
            table.push(vec![
                b.value().into(),
                alpha.into(),
                optimal_delta(alpha, *b)?.into(),
            ]);
        }
    }
    let config = serde_json::json!({
        "beta": a.beta, "alpha_min": a.alpha_min, "alpha_max": a.alpha_max, "step": a.step,
    });
    Ok(Outcome {
        table,
        seed: None,
        config,
    })
}

fn shrinker_curve(a: &ShrinkerCurveArgs) -> Result<Outcome, CliError> {
    if !(a.sigma > 0.0 && a.sigma.is_finite()) {
        return Err(CliError::Usage(format!(
            "sigma must be positive, got {}",
            a.sigma
        )));
    }
    if a.lambda_min < 0.0 {
        return Err(CliError::Usage(format!(
            "lambda range must be nonnegative, got min {}",
            a.lambda_min
        )));
    }
    let b = beta(a.beta)?;
    let rule = ShrinkageRule::optimal_with_threshold(a.sigma, b, a.threshold_variant.into())?;
    let mut table = Table::new(&["lambda", "eta_classical", "eta_optimal"]);
    for lam in grid("lambda", a.lambda_min, a.lambda_max, a.step)? {
        table.push(vec![
            lam.into(),
            eta_classical(lam, a.sigma)?.into(),
            rule.eval(lam)?.into(),
        ]);
    }
    let config = serde_json::json!({
        "beta": a.beta, "sigma": a.sigma, "lambda_min": a.lambda_min, "lambda_max": a.lambda_max,
        "step": a.step, "threshold": rule.threshold(),
    });
    Ok(Outcome {
        table,
        seed: None,
        config,
    })
}

pub fn spiked_config(a: &SpikedSimArgs) -> Result<SpikedExperimentConfig, CliError> {
    if a.d == 0 {
        return Err(CliError::Usage("--d must be at least 1".into()));
    }
    let mut cfg = SpikedExperimentConfig::with_rank(a.d);
    cfg.n = a.n;
    cfg.beta_grid = a.beta.clone();
    if !a.sigma.is_empty() {
        cfg.sigma_grid = a.sigma.clone();
    }
    cfg.reps = a.reps;
    cfg.master_seed = a.seed;
    cfg.noise_scaling = a.noise_scaling.into();
    cfg.threshold = a.threshold_variant.into();
    cfg.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    Ok(cfg)
}

fn spiked_sim(a: &SpikedSimArgs, exec: Execution) -> Result<Outcome, CliError> {
    let cfg = spiked_config(a)?;
    let report = run_spiked_experiment_with(&cfg, exec)?;
    let mut table = Table::new(&[
        "beta",
        "sigma",
        "rule",
        "median_log_excess_loss",
        "iqr_low",
        "iqr_high",
        "clamp_count",
        "theoretical_optimal_loss",
        "critical_sigma",
    ]);
    for cell in &report.cells {
        // The weakest spike is the first to be lost as sigma grows.
        let critical = cell
            .critical_sigma
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min);
        for r in &cell.rules {
            let s = &r.log_excess_summary;
            table.push(vec![
                cell.beta.into(),
                cell.sigma.into(),
                r.rule.name().into(),
                s.median.into(),
                s.q1.into(),
                s.q3.into(),
                r.clamp_count.into(),
                cell.theoretical_optimal_loss.into(),
                critical.into(),
            ]);
        }
    }
    let mut config = serde_json::to_value(&cfg)?;
    config["critical_sigma_per_spike"] = serde_json::to_value(
        report
            .cells
            .iter()
            .map(|c| (c.beta, c.sigma, c.critical_sigma.clone()))
            .collect::<Vec<_>>(),
    )?;
    Ok(Outcome {
        table,
        seed: Some(cfg.master_seed),
        config,
    })
}

pub fn manifold_config(a: &ManifoldSimArgs) -> Result<ManifoldExperimentConfig, CliError> {
    let cfg = ManifoldExperimentConfig {
        p: a.p,
        beta_grid: a.beta.clone(),
        sigma_grid: a.sigma.clone(),
        reps: a.reps,
        param_range: (a.range_min, a.range_max),
        master_seed: a.seed,
        noise_scaling: a.noise_scaling.into(),
        threshold: a.threshold_variant.into(),
        ..Default::default()
    };
    cfg.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    Ok(cfg)
}

fn manifold_sim(a: &ManifoldSimArgs, exec: Execution) -> Result<Outcome, CliError> {
    let cfg = manifold_config(a)?;
    let metric: ErrorMetric = a.error_metric.into();
    let report = run_manifold_experiment_with(&cfg, exec)?;
    let mut table = Table::new(&[
        "beta",
        "sigma",
        "test_point",
        "rule",
        "mean_error",
        "std_error",
        "n_actual",
    ]);
    for cell in &report.cells {
        for e in &cell.entries {
            let s = e.summary(metric);
            table.push(vec![
                cell.beta.into(),
                cell.sigma.into(),
                format!("y{}", e.test_point + 1).as_str().into(),
                e.rule.name().into(),
                s.mean.into(),
                s.std.into(),
                cell.n.into(),
            ]);
        }
    }
    let mut config = serde_json::to_value(&cfg)?;
    config["error_metric"] = serde_json::to_value(metric)?;
    Ok(Outcome {
        table,
        seed: Some(cfg.master_seed),
        config,
    })
}

/// Runs one command and returns its manifest and data.
pub fn run(
    command: &Command,
    exec: Execution,
    threads: Option<usize>,
) -> Result<(Manifest, Table), CliError> {
    let start = Instant::now();
    let outcome = mdshrink::par::with_threads(threads, || match command {
        Command::AsymLoss(a) => asym_loss(a),
        Command::ShrinkerCurve(a) => shrinker_curve(a),
        Command::SpikedSim(a) => spiked_sim(a, exec),
        Command::ManifoldSim(a) => manifold_sim(a, exec),
    })
    .map_err(|e| CliError::Usage(e.to_string()))??;
    let manifest = Manifest {
        command: command.name().to_owned(),
        version: env!("CARGO_PKG_VERSION").to_owned(),
        seed: outcome.seed,
        rng: outcome.seed.map(|_| RNG_ALGORITHM.to_owned()),
        threads,
        duration_s: start.elapsed().as_secs_f64(),
        config: outcome.config,
    };
    Ok((manifest, outcome.table))
}

/// Runs the parsed command line and writes its output.
pub fn execute(cli: &Cli, threads: Option<usize>) -> Result<(), CliError> {
    let exec = if cli.output.sequential {
        Execution::Sequential
    } else {
        Execution::Parallel
    };
    let (manifest, table) = run(&cli.command, exec, threads)?;
    let sink: Box<dyn Write> = match &cli.output.out {
        Some(path) => Box::new(File::create(path)?),
        None => Box::new(std::io::stdout().lock()),
    };
    let mut sink = BufWriter::new(sink);
    if cli.output.json {
        write_json(&mut sink, &manifest, &table)?;
    } else {
        write_csv(&mut sink, &manifest, &table)?;
    }
    sink.flush()?;
    Ok(())
}
