// Closed-form pairwise dependence for one model of each family: extremal
// coefficient, tail dependence coefficient and F-madogram on a few lags.

use stmado::models::{theta_from_fmadogram, Family, ModelSpec};

pub struct Row {
    pub family: Family,
    pub h: [f64; 2],
    pub lprime: f64,
    pub theta: f64,
    pub chi: f64,
    pub nu: f64,
}

pub fn run_example() -> stmado::Result<Vec<Row>> {
    let models = [
        ModelSpec::from_vec(Family::A1, &[0.4, 1.5, 0.2, 1.0])?,
        ModelSpec::from_vec(Family::A2, &[3.0, 1.0, 4.0, 0.8])?,
        ModelSpec::from_vec(Family::B1, &[0.5, 1.0, 1.0, 0.0, 0.6])?,
        ModelSpec::from_vec(Family::B2, &[1.0, 0.0, 1.0, 1.0, 1.0, 0.7])?,
        ModelSpec::from_vec(Family::B3, &[1.0, 1.0, 3.0, 1.0, 0.0, 0.5])?,
        ModelSpec::from_vec(Family::MarSchlather, &[2.0, 1.0, 1.0, 0.0, 0.7])?,
    ];
    let lags = [
        ([1.0, 0.0], 0.0),
        ([0.0, 2.0], 0.0),
        ([0.0, 0.0], 1.0),
        ([1.0, 1.0], 2.0),
    ];
    let mut rows = Vec::new();
    for m in &models {
        for &(h, lprime) in &lags {
            rows.push(Row {
                family: m.family(),
                h,
                lprime,
                theta: m.theta(h, lprime),
                chi: m.chi(h, lprime),
                nu: m.fmadogram(h, lprime),
            });
        }
    }
    Ok(rows)
}

#[allow(dead_code)]
fn main() -> stmado::Result<()> {
    println!("family       h          l'  theta    chi      nu_F     theta(nu_F)");
    for r in run_example()? {
        println!(
            "{:<12} {:<10} {:<3} {:.5}  {:.5}  {:.5}  {:.5}",
            r.family.to_string(),
            format!("({},{})", r.h[0], r.h[1]),
            r.lprime,
            r.theta,
            r.chi,
            r.nu,
            theta_from_fmadogram(r.nu)
        );
    }
    Ok(())
}
