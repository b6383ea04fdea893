//! Monte-Carlo studies: simulate, estimate and fit `R` times, then summarize
//! each parameter by mean estimate, RMSE and MAE against the truth.

use rayon::prelude::*;
use serde::Serialize;
use stmado::lattice::{GridSpec, LagPlan};
use stmado::madogram::{estimate_plan, MarginMode};
use stmado::models::{Family, ModelSpec};
use stmado::simulate::{SimConfig, Simulator};

use crate::commands::{fit_family, required_seed};
use crate::config::{lags_or_default, StudyConfig};
use crate::failure::{CliResult, Failure};
use crate::manifest::Artifacts;

// Parameter vector, objective and convergence flag, or the error message.
type ReplicateOutcome = Result<(Vec<f64>, f64, bool), String>;

/// Largest tolerated share of failed replicates.
pub const MAX_FAILURE_SHARE: f64 = 0.10;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ParamMetrics {
    pub param: &'static str,
    pub truth: f64,
    pub mean: f64,
    pub rmse: f64,
    pub mae: f64,
    /// Spread of the estimates around their own mean.
    pub sd: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ReplicateFailure {
    pub replicate: usize,
    pub error: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StudyReport {
    pub family: Family,
    pub replicates: usize,
    pub succeeded: usize,
    pub failures: Vec<ReplicateFailure>,
    pub metrics: Vec<ParamMetrics>,
}

/// Per-parameter metrics over the rows of `estimates`.
pub fn summarize(truth: &ModelSpec, estimates: &[Vec<f64>]) -> Vec<ParamMetrics> {
    let names = truth.family().param_names();
    let truth = truth.to_vec();
    let n = estimates.len() as f64;
    names
        .into_iter()
        .enumerate()
        .map(|(j, param)| {
            let col: Vec<f64> = estimates.iter().map(|e| e[j]).collect();
            let mean = col.iter().sum::<f64>() / n;
            let rmse = (col.iter().map(|v| (v - truth[j]).powi(2)).sum::<f64>() / n).sqrt();
            let mae = col.iter().map(|v| (v - truth[j]).abs()).sum::<f64>() / n;
            let sd = (col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
            ParamMetrics {
                param,
                truth: truth[j],
                mean,
                rmse,
                mae,
                sd,
            }
        })
        .collect()
}

/// Runs the study and writes `metrics.json` and `estimates.csv`. The report
/// is written even when too many replicates fail, in which case the run ends
/// with a partial-study failure.
pub fn run_study(cfg: &StudyConfig, out: &mut Artifacts) -> CliResult<StudyReport> {
    let seed = required_seed(cfg.seed);
    let grid = GridSpec::new(cfg.n)?;
    let lags = lags_or_default(&cfg.lags, cfg.t_len);
    let plan = LagPlan::new(grid, cfg.t_len, &lags)?;
    let simulator = Simulator::new(
        &cfg.truth,
        grid,
        cfg.t_len,
        &SimConfig {
            seed,
            ..cfg.sampler.clone()
        },
    )?;
    let family = cfg.truth.family();

    let outcomes: Vec<ReplicateOutcome> = (0..cfg.replicates)
        .into_par_iter()
        .map(|i| {
            let index = if cfg.repeat_first_replicate { 0 } else { i as u64 };
            let field = simulator.replicate(index);
            let est = estimate_plan(&field, &plan, MarginMode::Frechet).map_err(|e| e.to_string())?;
            let fit = fit_family(family, cfg.scheme, &est, &cfg.fit).map_err(|e| e.to_string())?;
            Ok((fit.model.to_vec(), fit.objective, fit.converged))
        })
        .collect();

    let names = family.param_names();
    let mut rows = Vec::with_capacity(cfg.replicates + 1);
    let mut header = vec!["replicate".to_owned()];
    header.extend(names.iter().map(|s| s.to_string()));
    header.extend(["objective", "converged", "error"].map(String::from));
    rows.push(header);
    let mut estimates = Vec::new();
    let mut failures = Vec::new();
    for (i, outcome) in outcomes.into_iter().enumerate() {
        let mut row = vec![i.to_string()];
        match outcome {
            Ok((v, objective, converged)) => {
                row.extend(v.iter().map(|x| format!("{x:?}")));
                row.extend([format!("{objective:?}"), converged.to_string(), String::new()]);
                estimates.push(v);
            }
            Err(error) => {
                row.extend(std::iter::repeat_n(String::new(), names.len() + 2));
                row.push(error.clone());
                failures.push(ReplicateFailure { replicate: i, error });
            }
        }
        rows.push(row);
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in &rows {
        w.write_record(row)?;
    }
    out.write_bytes(
        "estimates.csv",
        &w.into_inner().map_err(|e| Failure::config(e.to_string()))?,
    )?;

    let report = StudyReport {
        family,
        replicates: cfg.replicates,
        succeeded: estimates.len(),
        metrics: summarize(&cfg.truth, &estimates),
        failures,
    };
    out.write_json("metrics.json", &report)?;
    let lost = report.failures.len() as f64 / cfg.replicates as f64;
    if lost > MAX_FAILURE_SHARE {
        return Err(Failure::partial_study(format!(
            "{} of {} replicates failed (limit {:.0}%)",
            report.failures.len(),
            cfg.replicates,
            100.0 * MAX_FAILURE_SHARE
        )));
    }
    Ok(report)
}
