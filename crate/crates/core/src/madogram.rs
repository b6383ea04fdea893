//! Empirical F-madograms on gridded fields.
//!
//! Every estimator pools the pairs of a lag class: the estimate is
//! `sum |F(X_i) - F(X_j)| / (2 * npairs)`. Pairs with a missing value are
//! dropped from both the sum and the count. On a complete field this equals
//! the average over time slices (spatial lags) or over sites (temporal lags)
//! of the per-slice/per-site estimators, because every slice and every site
//! contributes the same number of pairs.
//!
//! Spatial, temporal and joint estimates all go through the same routine, so
//! `(h, 0)` and `(0, l')` joint estimates coincide bit-for-bit with the
//! purely spatial and purely temporal ones.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{Margins, SpaceTimeField};
use crate::lattice::{GridSpec, LagGroup, LagPlan, SpatialLag, VectorLag};

/// Standard Fréchet distribution function `exp(-1/x)`.
pub fn frechet_cdf(x: f64) -> Result<f64> {
    if x > 0.0 {
        Ok((-1.0 / x).exp())
    } else {
        Err(Error::InvalidArgs(format!("Fréchet CDF needs x > 0, got {x}")))
    }
}

/// How values are mapped to uniforms before differencing.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MarginMode {
    /// Exact standard Fréchet CDF; the field must be tagged Fréchet.
    #[default]
    Frechet,
    /// Per-site ranks over time, `rank / (N + 1)` with mid-ranks for ties.
    EmpiricalRank,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MadogramEstimate {
    pub h: SpatialLag,
    pub lprime: u32,
    pub value: f64,
    pub npairs: u64,
}

/// Estimate for a single oriented vector lag.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct VectorEstimate {
    pub lag: VectorLag,
    pub value: f64,
    pub npairs: u64,
}

/// Pooled estimate of a scalar lag together with its vector components.
#[derive(Clone, Debug, PartialEq)]
pub struct GroupEstimate {
    pub estimate: MadogramEstimate,
    pub vectors: Vec<VectorEstimate>,
}

/// All estimates for one [`LagPlan`].
#[derive(Clone, Debug, PartialEq)]
pub struct PlanEstimates {
    pub spatial: Vec<GroupEstimate>,
    pub temporal: Vec<GroupEstimate>,
    pub joint: Vec<GroupEstimate>,
}

impl PlanEstimates {
    pub fn spatial_scalar(&self) -> Vec<MadogramEstimate> {
        self.spatial.iter().map(|g| g.estimate).collect()
    }

    pub fn temporal_scalar(&self) -> Vec<MadogramEstimate> {
        self.temporal.iter().map(|g| g.estimate).collect()
    }

    pub fn joint_scalar(&self) -> Vec<MadogramEstimate> {
        self.joint.iter().map(|g| g.estimate).collect()
    }
}

/// Uniform scores of the field; missing values stay `NaN`.
pub fn uniform_scores(field: &SpaceTimeField, mode: MarginMode) -> Result<Vec<f64>> {
    match mode {
        MarginMode::Frechet => {
            if field.margins() != Margins::Frechet {
                return Err(Error::WrongMargins {
                    found: field.margins().to_string(),
                    expected: Margins::Frechet.to_string(),
                });
            }
            Ok(field
                .values()
                .iter()
                .map(|&x| if x.is_nan() { x } else { (-1.0 / x).exp() })
                .collect())
        }
        MarginMode::EmpiricalRank => {
            let mut u = vec![f64::NAN; field.values().len()];
            let n = field.n();
            for y in 0..n {
                for x in 0..n {
                    let series = field.series(x, y);
                    for (t, r) in mid_ranks(&series).into_iter().enumerate() {
                        u[field.index(x, y, t)] = r;
                    }
                }
            }
            Ok(u)
        }
    }
}

// rank / (N + 1) over the non-missing entries, averaging tied ranks.
fn mid_ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).filter(|&i| !v[i].is_nan()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let m = idx.len() as f64;
    let mut out = vec![f64::NAN; v.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            out[k] = rank / (m + 1.0);
        }
        i = j + 1;
    }
    out
}

/// Neumaier-compensated accumulator.
#[derive(Clone, Copy, Default)]
struct KahanSum {
    sum: f64,
    comp: f64,
}

impl KahanSum {
    fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    fn total(&self) -> f64 {
        self.sum + self.comp
    }
}

// Sum of |u_i - u_j| and pair count over one vector lag, fixed loop order.
fn vector_sums(u: &[f64], n: usize, t_len: usize, v: VectorLag) -> (f64, u64) {
    let (dx, dy, l) = (v.dx as isize, v.dy as isize, v.lprime as usize);
    if l >= t_len {
        return (0.0, 0);
    }
    let ni = n as isize;
    let x_range = (0.max(-dx), ni.min(ni - dx));
    let y_range = (0.max(-dy), ni.min(ni - dy));
    let mut acc = KahanSum::default();
    let mut count = 0u64;
    let stride = n * n;
    for t in 0..t_len - l {
        let base_a = t * stride;
        let base_b = (t + l) * stride;
        for y in y_range.0..y_range.1 {
            let row_a = base_a + y as usize * n;
            let row_b = base_b + (y + dy) as usize * n;
            for x in x_range.0..x_range.1 {
                let a = u[row_a + x as usize];
                let b = u[row_b + (x + dx) as usize];
                let d = (a - b).abs();
                if !d.is_nan() {
                    acc.add(d);
                    count += 1;
                }
            }
        }
    }
    (acc.total(), count)
}

fn estimate_group(u: &[f64], n: usize, t_len: usize, g: &LagGroup) -> GroupEstimate {
    let mut total = KahanSum::default();
    let mut pairs = 0u64;
    let vectors = g
        .vectors
        .iter()
        .map(|&lag| {
            let (s, c) = vector_sums(u, n, t_len, lag);
            total.add(s);
            pairs += c;
            let value = if c == 0 { f64::NAN } else { s / (2.0 * c as f64) };
            VectorEstimate { lag, value, npairs: c }
        })
        .collect();
    let value = if pairs == 0 {
        f64::NAN
    } else {
        total.total() / (2.0 * pairs as f64)
    };
    GroupEstimate {
        estimate: MadogramEstimate {
            h: g.h,
            lprime: g.lprime,
            value,
            npairs: pairs,
        },
        vectors,
    }
}

fn estimate_groups(u: &[f64], n: usize, t_len: usize, groups: &[LagGroup]) -> Vec<GroupEstimate> {
    groups.par_iter().map(|g| estimate_group(u, n, t_len, g)).collect()
}

/// Estimates every class of a precomputed plan in one pass over the data.
pub fn estimate_plan(field: &SpaceTimeField, plan: &LagPlan, mode: MarginMode) -> Result<PlanEstimates> {
    if plan.grid().n() != field.n() || plan.t_len() != field.t_len() {
        return Err(Error::InvalidArgs(format!(
            "plan is for {0}x{0}x{1}, field is {2}x{2}x{3}",
            plan.grid().n(),
            plan.t_len(),
            field.n(),
            field.t_len()
        )));
    }
    let u = uniform_scores(field, mode)?;
    let (n, t) = (field.n(), field.t_len());
    Ok(PlanEstimates {
        spatial: estimate_groups(&u, n, t, plan.spatial()),
        temporal: estimate_groups(&u, n, t, plan.temporal()),
        joint: estimate_groups(&u, n, t, plan.joint()),
    })
}

fn single_group(grid: GridSpec, t_len: usize, h: SpatialLag, l: u32) -> Result<LagGroup> {
    if h.sq() == 0 && l == 0 {
        return Err(Error::InvalidArgs("lag (0, 0) has no distinct pairs".into()));
    }
    if h.sq() > 0 && !h.realizable_on(grid) {
        return Err(Error::UnrealizableLag {
            h_sq: h.sq(),
            n: grid.n(),
        });
    }
    if l as usize >= t_len {
        return Err(Error::InvalidArgs(format!(
            "temporal lag {l} needs more than {t_len} time points"
        )));
    }
    let offs = if l == 0 { h.half_offsets() } else { h.offsets() };
    let vectors = offs
        .into_iter()
        .map(|(dx, dy)| VectorLag { dx, dy, lprime: l })
        .filter(|v| v.pair_count(grid, t_len) > 0)
        .collect();
    Ok(LagGroup { h, lprime: l, vectors })
}

/// Joint estimates over `H x K`, in the order `for l in K { for h in H }`.
/// Either set may contain zero.
pub fn empirical_st_fmadogram_with(
    field: &SpaceTimeField,
    spatial: &[SpatialLag],
    temporal: &[u32],
    mode: MarginMode,
) -> Result<Vec<GroupEstimate>> {
    let grid = GridSpec::new(field.n())?;
    let mut groups = Vec::with_capacity(spatial.len() * temporal.len());
    for &l in temporal {
        for &h in spatial {
            groups.push(single_group(grid, field.t_len(), h, l)?);
        }
    }
    let u = uniform_scores(field, mode)?;
    Ok(estimate_groups(&u, field.n(), field.t_len(), &groups))
}

/// Joint spatio-temporal F-madogram of a Fréchet field over `H x K`.
pub fn empirical_st_fmadogram(
    field: &SpaceTimeField,
    spatial: &[SpatialLag],
    temporal: &[u32],
) -> Result<Vec<MadogramEstimate>> {
    Ok(
        empirical_st_fmadogram_with(field, spatial, temporal, MarginMode::Frechet)?
            .into_iter()
            .map(|g| g.estimate)
            .collect(),
    )
}

/// Purely spatial F-madogram, averaged over time slices.
pub fn empirical_spatial_fmadogram(field: &SpaceTimeField, spatial: &[SpatialLag]) -> Result<Vec<MadogramEstimate>> {
    empirical_st_fmadogram(field, spatial, &[0])
}

/// Purely temporal F-madogram, averaged over sites.
pub fn empirical_temporal_fmadogram(field: &SpaceTimeField, temporal: &[u32]) -> Result<Vec<MadogramEstimate>> {
    empirical_st_fmadogram(field, &[SpatialLag::ZERO], temporal)
}

/// Writes estimates as CSV `h,lprime,nu_hat,npairs`.
pub fn write_estimates_csv<W: std::io::Write>(w: W, estimates: &[MadogramEstimate]) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(["h", "lprime", "nu_hat", "npairs"])?;
    for e in estimates {
        wr.write_record(&[
            format!("{:?}", e.h.distance()),
            e.lprime.to_string(),
            format!("{:?}", e.value),
            e.npairs.to_string(),
        ])?;
    }
    wr.flush()?;
    Ok(())
}
