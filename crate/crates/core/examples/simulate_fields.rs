// Simulating fields from a separable and a max-autoregressive model, with
// independent replicates on separate RNG streams.

use stmado::lattice::GridSpec;
use stmado::models::{Family, ModelSpec};
use stmado::simulate::{SimConfig, Simulator};
use stmado::SpaceTimeField;

pub fn run_example() -> stmado::Result<Vec<(Family, SpaceTimeField)>> {
    let grid = GridSpec::new(8)?;
    let models = [
        ModelSpec::from_vec(Family::A1, &[0.4, 1.5, 0.2, 1.0])?,
        ModelSpec::from_vec(Family::B1, &[0.5, 1.0, 1.0, 0.0, 0.6])?,
    ];
    let mut out = Vec::new();
    for m in &models {
        let sim = Simulator::new(m, grid, 12, &SimConfig::with_seed(2024))?;
        for field in sim.replicates(2) {
            out.push((m.family(), field));
        }
    }
    Ok(out)
}

#[allow(dead_code)]
fn main() -> stmado::Result<()> {
    for (family, field) in run_example()? {
        let v = field.values();
        let median = {
            let mut s = v.to_vec();
            s.sort_by(f64::total_cmp);
            s[s.len() / 2]
        };
        println!(
            "{family}: {}x{}x{} field, median {median:.3} (unit Fréchet median {:.3})",
            field.n(),
            field.n(),
            field.t_len(),
            1.0 / std::f64::consts::LN_2
        );
    }
    Ok(())
}
