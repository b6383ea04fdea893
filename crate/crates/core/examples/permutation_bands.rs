// Permutation bands for spatial and temporal independence, and the lag at
// which the generating model's F-madogram enters each band.

use stmado::fit::fitted_points;
use stmado::lattice::{GridSpec, LagSets, SpatialLag};
use stmado::madogram::{empirical_st_fmadogram_with, MarginMode};
use stmado::models::{Family, ModelSpec};
use stmado::permtest::{dependence_range, spatial_perm_band, temporal_perm_band, PermBand};
use stmado::simulate::{simulate, SimConfig};

pub struct Bands {
    pub spatial: PermBand,
    pub temporal: PermBand,
    pub spatial_model: Vec<f64>,
    pub temporal_model: Vec<f64>,
    pub spatial_range: Option<f64>,
    pub temporal_range: Option<f64>,
}

pub fn run_example() -> stmado::Result<Bands> {
    let truth = ModelSpec::from_vec(Family::A1, &[1.0, 1.5, 1.0, 1.5])?;
    let field = simulate(&truth, GridSpec::new(10)?, 100, &SimConfig::with_seed(8))?;
    let lags = LagSets::standard();
    let spatial = spatial_perm_band(&field, lags.spatial(), 200, 1)?;
    let temporal = temporal_perm_band(&field, lags.temporal(), 200, 2)?;
    let model_at = |groups| -> Vec<f64> { fitted_points(&truth, groups).iter().map(|p| p.fitted).collect() };
    let s_groups = empirical_st_fmadogram_with(&field, lags.spatial(), &[0], MarginMode::Frechet)?;
    let t_groups = empirical_st_fmadogram_with(&field, &[SpatialLag::ZERO], lags.temporal(), MarginMode::Frechet)?;
    let (spatial_model, temporal_model) = (model_at(&s_groups), model_at(&t_groups));
    Ok(Bands {
        spatial_range: dependence_range(&spatial, &spatial_model)?,
        temporal_range: dependence_range(&temporal, &temporal_model)?,
        spatial,
        temporal,
        spatial_model,
        temporal_model,
    })
}

#[allow(dead_code)]
fn main() -> stmado::Result<()> {
    let b = run_example()?;
    for (name, band, model) in [
        ("space", &b.spatial, &b.spatial_model),
        ("time", &b.temporal, &b.temporal_model),
    ] {
        println!("{name}: lag   lower    upper    model");
        for (((lag, lo), hi), m) in band.lags.iter().zip(&band.lower).zip(&band.upper).zip(model) {
            println!("       {lag:<5.2} {lo:.5}  {hi:.5}  {m:.5}");
        }
    }
    println!(
        "dependence range: space {:?}, time {:?}",
        b.spatial_range, b.temporal_range
    );
    Ok(())
}
