use serde::Serialize;
use stmado::field::Margins;
use stmado::fit::{fit_scheme1, fit_scheme2, fitted_points, select_model, AicReport, FitOptions, FitResult, Scheme};
use stmado::lattice::{GridSpec, LagPlan, LagSets, SpatialLag};
use stmado::madogram::{empirical_st_fmadogram_with, estimate_plan, write_estimates_csv, MarginMode, PlanEstimates};
use stmado::margins::{block_maxima, transform_margins, write_params_csv, MarginOptions, MarginReport, OutputMargins};
use stmado::models::{Family, ModelSpec};
use stmado::permtest::{dependence_range, spatial_perm_band, temporal_perm_band};
use stmado::simulate::SimConfig;
use stmado::SpaceTimeField;

use crate::config::{
    lags_or_default, Blocks, FitConfig, MadogramConfig, MarginsConfig, PermtestConfig, SelectConfig, SimulateConfig,
};
use crate::failure::CliResult;
use crate::manifest::Artifacts;

pub(crate) fn required_seed(seed: Option<u64>) -> u64 {
    seed.expect("configuration loading enforces a seed for stochastic commands")
}

pub(crate) fn load_field(path: &std::path::Path, untagged: Margins) -> CliResult<SpaceTimeField> {
    let (field, _) =
        SpaceTimeField::load(path, untagged).map_err(|e| crate::Failure::from(e).context(path.display()))?;
    Ok(field)
}

fn untagged_margins(mode: MarginMode) -> Margins {
    match mode {
        MarginMode::Frechet => Margins::Frechet,
        MarginMode::EmpiricalRank => Margins::Raw,
    }
}

/// Madogram estimates of `field` over `lags` (or the default sets).
pub fn plan_estimates(field: &SpaceTimeField, lags: &Option<LagSets>, mode: MarginMode) -> CliResult<PlanEstimates> {
    let lags = lags_or_default(lags, field.t_len());
    let plan = LagPlan::new(GridSpec::new(field.n())?, field.t_len(), &lags)?;
    Ok(estimate_plan(field, &plan, mode)?)
}

pub(crate) fn write_estimates(out: &mut Artifacts, est: &PlanEstimates) -> CliResult<()> {
    out.write_with("madogram_spatial.csv", |w| {
        write_estimates_csv(w, &est.spatial_scalar())
    })?;
    out.write_with("madogram_temporal.csv", |w| {
        write_estimates_csv(w, &est.temporal_scalar())
    })?;
    out.write_with("madogram_joint.csv", |w| write_estimates_csv(w, &est.joint_scalar()))
}

/// Fits one family. A separate-scheme fit without a start value is started
/// from the joint-scheme estimate.
pub fn fit_family(
    family: Family,
    scheme: Scheme,
    data: &PlanEstimates,
    opts: &FitOptions,
) -> stmado::Result<FitResult> {
    match scheme {
        Scheme::Joint => fit_scheme2(family, data, opts),
        Scheme::Separate if opts.init.is_some() => fit_scheme1(family, data, opts),
        Scheme::Separate => {
            let start = fit_scheme2(family, data, opts)?;
            fit_scheme1(
                family,
                data,
                &FitOptions {
                    init: Some(start.model.to_vec()),
                    ..opts.clone()
                },
            )
        }
    }
}

pub(crate) fn write_fitted(out: &mut Artifacts, name: &str, model: &ModelSpec, est: &PlanEstimates) -> CliResult<()> {
    let mut points = fitted_points(model, &est.spatial);
    points.extend(fitted_points(model, &est.temporal));
    points.extend(fitted_points(model, &est.joint));
    out.write_csv_rows(name, &points)
}

fn with_seed(opts: &FitOptions, seed: Option<u64>) -> FitOptions {
    let mut opts = opts.clone();
    if let Some(s) = seed {
        opts.nls.seed = s;
    }
    opts
}

pub fn simulate(cfg: &SimulateConfig, out: &mut Artifacts) -> CliResult<SpaceTimeField> {
    let seed = required_seed(cfg.seed);
    let sampler = SimConfig {
        seed,
        ..cfg.sampler.clone()
    };
    let field = stmado::simulate::simulate(&cfg.model, GridSpec::new(cfg.n)?, cfg.t_len, &sampler)?;
    out.write_field("field", &field, &field.meta(Some(cfg.model), Some(seed)))?;
    Ok(field)
}

pub fn madogram(cfg: &MadogramConfig, out: &mut Artifacts) -> CliResult<PlanEstimates> {
    let field = load_field(&cfg.input, untagged_margins(cfg.margin_mode))?;
    let est = plan_estimates(&field, &cfg.lags, cfg.margin_mode)?;
    write_estimates(out, &est)?;
    Ok(est)
}

pub fn fit(cfg: &FitConfig, out: &mut Artifacts) -> CliResult<FitResult> {
    let field = load_field(&cfg.input, untagged_margins(cfg.margin_mode))?;
    let est = plan_estimates(&field, &cfg.lags, cfg.margin_mode)?;
    let result = fit_family(cfg.family, cfg.scheme, &est, &with_seed(&cfg.fit, cfg.seed))?;
    out.write_json("fit.json", &result)?;
    write_fitted(out, "fitted.csv", &result.model, &est)?;
    Ok(result)
}

#[derive(Serialize)]
struct AicRow {
    family: Family,
    k: usize,
    aic: f64,
    aicc: f64,
    selected: bool,
}

pub(crate) fn write_aic(out: &mut Artifacts, report: &AicReport) -> CliResult<()> {
    out.write_json("aic.json", report)?;
    let rows: Vec<AicRow> = report
        .entries
        .iter()
        .map(|e| AicRow {
            family: e.family,
            k: e.family.k_spatial() + e.family.k_temporal(),
            aic: e.aic,
            aicc: e.aicc,
            selected: e.family == report.selected,
        })
        .collect();
    out.write_csv_rows("aic.csv", &rows)
}

pub fn select(cfg: &SelectConfig, out: &mut Artifacts) -> CliResult<AicReport> {
    let field = load_field(&cfg.input, untagged_margins(cfg.margin_mode))?;
    let est = plan_estimates(&field, &cfg.lags, cfg.margin_mode)?;
    let report = select_model(&cfg.candidates, &est, &with_seed(&cfg.fit, cfg.seed))?;
    write_aic(out, &report)?;
    Ok(report)
}

/// Block maxima (when requested) followed by per-site marginal fits.
pub(crate) fn marginal_stage(
    raw: &SpaceTimeField,
    blocks: Option<Blocks>,
    opts: &MarginOptions,
    out: &mut Artifacts,
) -> CliResult<MarginReport> {
    let maxima;
    let source = match blocks {
        Some(b) => {
            maxima = block_maxima(raw, b.space, b.time)?;
            out.write_field("block_maxima", &maxima, &maxima.meta(None, None))?;
            &maxima
        }
        None => raw,
    };
    let report = transform_margins(source, opts)?;
    out.write_with("margin_params.csv", |w| write_params_csv(w, &report.sites))?;
    let stem = match opts.output {
        OutputMargins::Frechet => "frechet",
        OutputMargins::Gumbel => "gumbel",
    };
    out.write_field(stem, &report.field, &report.field.meta(None, None))?;
    Ok(report)
}

pub fn margins(cfg: &MarginsConfig, out: &mut Artifacts) -> CliResult<MarginReport> {
    let raw = load_field(&cfg.input, Margins::Raw)?;
    marginal_stage(&raw, cfg.blocks, &cfg.margins, out)
}

/// First lags at which the fitted curves enter the permutation bands.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct DependenceRanges {
    pub spatial: Option<f64>,
    pub temporal: Option<f64>,
}

/// Writes spatial and temporal bands with empirical (and fitted) overlays.
/// The temporal band draws from seed `seed + 1` so the two never share
/// streams.
pub(crate) fn bands(
    field: &SpaceTimeField,
    lags: &LagSets,
    permutations: usize,
    seed: u64,
    fitted: Option<&ModelSpec>,
    out: &mut Artifacts,
) -> CliResult<DependenceRanges> {
    let spatial = spatial_perm_band(field, lags.spatial(), permutations, seed)?;
    let temporal = temporal_perm_band(field, lags.temporal(), permutations, seed.wrapping_add(1))?;
    let s_groups = empirical_st_fmadogram_with(field, lags.spatial(), &[0], MarginMode::Frechet)?;
    let t_groups = empirical_st_fmadogram_with(field, &[SpatialLag::ZERO], lags.temporal(), MarginMode::Frechet)?;
    let s_emp: Vec<f64> = s_groups.iter().map(|g| g.estimate.value).collect();
    let t_emp: Vec<f64> = t_groups.iter().map(|g| g.estimate.value).collect();
    let mut ranges = DependenceRanges::default();
    match fitted {
        Some(model) => {
            let s_fit: Vec<f64> = fitted_points(model, &s_groups).iter().map(|p| p.fitted).collect();
            let t_fit: Vec<f64> = fitted_points(model, &t_groups).iter().map(|p| p.fitted).collect();
            out.write_with("band_spatial.csv", |w| {
                spatial.write_csv(w, &[("empirical", &s_emp), ("fitted", &s_fit)])
            })?;
            out.write_with("band_temporal.csv", |w| {
                temporal.write_csv(w, &[("empirical", &t_emp), ("fitted", &t_fit)])
            })?;
            ranges.spatial = dependence_range(&spatial, &s_fit)?;
            ranges.temporal = dependence_range(&temporal, &t_fit)?;
        }
        None => {
            out.write_with("band_spatial.csv", |w| spatial.write_csv(w, &[("empirical", &s_emp)]))?;
            out.write_with("band_temporal.csv", |w| temporal.write_csv(w, &[("empirical", &t_emp)]))?;
        }
    }
    Ok(ranges)
}

pub fn permtest(cfg: &PermtestConfig, out: &mut Artifacts) -> CliResult<DependenceRanges> {
    let field = load_field(&cfg.input, Margins::Frechet)?;
    let lags = lags_or_default(&cfg.lags, field.t_len());
    let ranges = bands(
        &field,
        &lags,
        cfg.permutations,
        required_seed(cfg.seed),
        cfg.fitted.as_ref(),
        out,
    )?;
    if cfg.fitted.is_some() {
        out.write_json("ranges.json", &ranges)?;
    }
    Ok(ranges)
}
