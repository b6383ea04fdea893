// Ranking candidate families by the least-squares information criterion on
// data simulated from a separable Brown-Resnick model.

use stmado::fit::{select_model, AicReport, FitOptions};
use stmado::lattice::{GridSpec, LagPlan, LagSets};
use stmado::madogram::{estimate_plan, MarginMode};
use stmado::models::{Family, ModelSpec};
use stmado::simulate::{simulate, SimConfig};

pub fn run_example() -> stmado::Result<AicReport> {
    let truth = ModelSpec::from_vec(Family::A1, &[0.4, 1.5, 0.2, 1.0])?;
    let grid = GridSpec::new(12)?;
    let field = simulate(&truth, grid, 40, &SimConfig::with_seed(5))?;
    let plan = LagPlan::new(grid, field.t_len(), &LagSets::standard())?;
    let est = estimate_plan(&field, &plan, MarginMode::Frechet)?;
    select_model(&[Family::A1, Family::A2, Family::B1], &est, &FitOptions::default())
}

#[allow(dead_code)]
fn main() -> stmado::Result<()> {
    let report = run_example()?;
    println!("family  AIC        AICc");
    for e in &report.entries {
        println!("{:<7} {:<10.3} {:.3}", e.family.to_string(), e.aic, e.aicc);
    }
    println!("selected: {}", report.selected);
    Ok(())
}
