// Pair classes on a grid: closed-form counts against explicit enumeration,
// and the lag plan used by the estimators.

use stmado::lattice::{count_pairs, enumerate_spatial_pairs, GridSpec, LagPlan, LagSets};

pub struct Summary {
    /// `(h, closed-form count, enumerated count)` per standard distance.
    pub counts: Vec<(f64, u64, usize)>,
    pub spatial_groups: usize,
    pub temporal_groups: usize,
    pub joint_groups: usize,
}

pub fn run_example() -> stmado::Result<Summary> {
    let grid = GridSpec::new(10)?;
    let lags = LagSets::standard();
    let counts = lags
        .spatial()
        .iter()
        .map(|&h| {
            Ok((
                h.distance(),
                count_pairs(grid.n(), h)?,
                enumerate_spatial_pairs(grid, h)?.count(),
            ))
        })
        .collect::<stmado::Result<Vec<_>>>()?;
    let plan = LagPlan::new(grid, 20, &lags)?;
    Ok(Summary {
        counts,
        spatial_groups: plan.spatial().len(),
        temporal_groups: plan.temporal().len(),
        joint_groups: plan.joint().len(),
    })
}

#[allow(dead_code)]
fn main() -> stmado::Result<()> {
    let s = run_example()?;
    println!("h        closed-form  enumerated");
    for (h, closed, listed) in &s.counts {
        println!("{h:<8.4} {closed:<12} {listed}");
    }
    println!(
        "plan: {} spatial, {} temporal, {} joint lag groups",
        s.spatial_groups, s.temporal_groups, s.joint_groups
    );
    Ok(())
}
