// Empirical spatial, temporal and joint F-madograms of a simulated field,
// next to the values implied by the generating model.

use stmado::fit::fitted_points;
use stmado::lattice::{GridSpec, LagPlan, LagSets};
use stmado::madogram::{estimate_plan, MarginMode};
use stmado::models::{Family, ModelSpec};
use stmado::simulate::{simulate, SimConfig};

/// `(h, l', empirical, model)` for every spatial and temporal lag.
pub fn run_example() -> stmado::Result<Vec<(f64, u32, f64, f64)>> {
    let truth = ModelSpec::from_vec(Family::A1, &[0.4, 1.5, 0.2, 1.0])?;
    let grid = GridSpec::new(12)?;
    let field = simulate(&truth, grid, 40, &SimConfig::with_seed(7))?;
    let lags = LagSets::standard();
    let plan = LagPlan::new(grid, field.t_len(), &lags)?;
    let est = estimate_plan(&field, &plan, MarginMode::Frechet)?;
    let mut rows: Vec<_> = fitted_points(&truth, &est.spatial)
        .into_iter()
        .chain(fitted_points(&truth, &est.temporal))
        .map(|p| (p.h, p.lprime, p.empirical, p.fitted))
        .collect();
    rows.sort_by(|a, b| (a.1, a.0).partial_cmp(&(b.1, b.0)).unwrap());
    Ok(rows)
}

#[allow(dead_code)]
fn main() -> stmado::Result<()> {
    println!("h       l'  empirical  model");
    for (h, l, emp, model) in run_example()? {
        println!("{h:<7.3} {l:<3} {emp:.5}    {model:.5}");
    }
    Ok(())
}
