// Weighted least-squares fits with both schemes: the separate scheme fits
// spatial and temporal parameters on their own lag sets, the joint scheme
// fits everything on the space-time lags.

use stmado::fit::{exact_estimates, fit_scheme1, fit_scheme2, FitOptions, FitResult};
use stmado::lattice::{GridSpec, LagPlan, LagSets};
use stmado::madogram::{estimate_plan, MarginMode};
use stmado::models::{Family, ModelSpec};
use stmado::simulate::{simulate, SimConfig};

pub struct Fits {
    pub truth: ModelSpec,
    /// Fits to model-implied madograms, which recover the truth.
    pub exact: FitResult,
    pub joint: FitResult,
    pub separate: FitResult,
}

pub fn run_example() -> stmado::Result<Fits> {
    let truth = ModelSpec::from_vec(Family::B1, &[0.5, 1.0, 1.0, 0.0, 0.6])?;
    let grid = GridSpec::new(12)?;
    let plan = LagPlan::new(grid, 60, &LagSets::standard())?;
    let opts = FitOptions::default();

    let exact = fit_scheme2(Family::B1, &exact_estimates(&truth, &plan), &opts)?;

    let field = simulate(&truth, grid, 60, &SimConfig::with_seed(11))?;
    let est = estimate_plan(&field, &plan, MarginMode::Frechet)?;
    let joint = fit_scheme2(Family::B1, &est, &opts)?;
    let separate = fit_scheme1(
        Family::B1,
        &est,
        &FitOptions {
            init: Some(joint.model.to_vec()),
            ..opts
        },
    )?;
    Ok(Fits {
        truth,
        exact,
        joint,
        separate,
    })
}

#[allow(dead_code)]
fn main() -> stmado::Result<()> {
    let f = run_example()?;
    let show = |v: Vec<f64>| v.iter().map(|x| format!("{x:.4}")).collect::<Vec<_>>().join(", ");
    println!("parameters: {}", f.truth.family().param_names().join(", "));
    println!("truth:      {}", show(f.truth.to_vec()));
    println!(
        "exact data: {}  (objective {:.2e})",
        show(f.exact.model.to_vec()),
        f.exact.objective
    );
    println!("scheme 2:   {}", show(f.joint.model.to_vec()));
    println!("scheme 1:   {}", show(f.separate.model.to_vec()));
    Ok(())
}
