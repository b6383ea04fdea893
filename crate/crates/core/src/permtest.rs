//! Permutation null bands for extremal independence.
//!
//! Shuffling site labels within each time slice destroys spatial dependence
//! while keeping every margin; shuffling each site's time order does the
//! same for temporal dependence. The empirical F-madogram of many such
//! shuffles gives a pointwise 95% band under independence, and the first lag
//! at which a fitted model enters that band estimates the dependence range.

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::SpaceTimeField;
use crate::lattice::SpatialLag;
use crate::madogram::{empirical_spatial_fmadogram, empirical_temporal_fmadogram};
use crate::simulate::replicate_rng;

pub const DEFAULT_REPLICATES: usize = 1000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LagAxis {
    Spatial,
    Temporal,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PermBand {
    pub axis: LagAxis,
    /// Euclidean distance `h` or time lag `l'`.
    pub lags: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub replicates: usize,
}

impl PermBand {
    pub fn contains(&self, i: usize, value: f64) -> bool {
        self.lower[i] <= value && value <= self.upper[i]
    }

    /// `lag,lower,upper` followed by any overlay columns given, such as
    /// `empirical` or `fitted`, each with one value per lag.
    pub fn write_csv<W: std::io::Write>(&self, w: W, overlays: &[(&str, &[f64])]) -> Result<()> {
        if let Some((_, v)) = overlays.iter().find(|(_, v)| v.len() != self.lags.len()) {
            return Err(Error::LengthMismatch {
                len: v.len(),
                expected: self.lags.len(),
            });
        }
        let mut out = csv::Writer::from_writer(w);
        let mut header = vec!["lag", "lower", "upper"];
        header.extend(overlays.iter().map(|(name, _)| *name));
        out.write_record(&header)?;
        for i in 0..self.lags.len() {
            let mut row = vec![
                self.lags[i].to_string(),
                self.lower[i].to_string(),
                self.upper[i].to_string(),
            ];
            row.extend(overlays.iter().map(|(_, v)| v[i].to_string()));
            out.write_record(&row)?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Type-7 sample quantile of finite values; `NaN` if there are none.
pub fn quantile_type7(values: &[f64], p: f64) -> f64 {
    let mut v: Vec<f64> = values.iter().copied().filter(|x| x.is_finite()).collect();
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(f64::total_cmp);
    let h = (v.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(v.len() - 1);
    v[lo] + (h - lo as f64) * (v[hi] - v[lo])
}

/// Copy of `field` with sites shuffled independently in every time slice.
pub fn permute_sites<R: Rng + ?Sized>(field: &SpaceTimeField, rng: &mut R) -> SpaceTimeField {
    let mut values = field.values().to_vec();
    let sites = field.n() * field.n();
    for slice in values.chunks_mut(sites) {
        slice.shuffle(rng);
    }
    SpaceTimeField::new(field.n(), field.t_len(), values, field.margins())
        .expect("a permutation of a valid field is valid")
}

/// Copy of `field` with each site's time series shuffled independently.
pub fn permute_times<R: Rng + ?Sized>(field: &SpaceTimeField, rng: &mut R) -> SpaceTimeField {
    let (n, t_len) = (field.n(), field.t_len());
    let mut values = field.values().to_vec();
    let mut order: Vec<usize> = (0..t_len).collect();
    let mut buf = vec![0.0; t_len];
    for site in 0..n * n {
        order.shuffle(rng);
        for (t, &src) in order.iter().enumerate() {
            buf[t] = field.values()[src * n * n + site];
        }
        for (t, v) in buf.iter().enumerate() {
            values[t * n * n + site] = *v;
        }
    }
    SpaceTimeField::new(n, t_len, values, field.margins()).expect("a permutation of a valid field is valid")
}

fn band<F>(axis: LagAxis, lags: Vec<f64>, replicates: usize, estimate: F) -> Result<PermBand>
where
    F: Fn(u64) -> Result<Vec<f64>> + Sync + Send,
{
    if replicates == 0 {
        return Err(Error::InvalidArgs("need at least one permutation replicate".into()));
    }
    let draws = (0..replicates as u64)
        .into_par_iter()
        .map(estimate)
        .collect::<Result<Vec<_>>>()?;
    let column = |i: usize| draws.iter().map(|d| d[i]).collect::<Vec<f64>>();
    let (lower, upper) = (0..lags.len())
        .map(|i| {
            let c = column(i);
            (quantile_type7(&c, 0.025), quantile_type7(&c, 0.975))
        })
        .unzip();
    Ok(PermBand {
        axis,
        lags,
        lower,
        upper,
        replicates,
    })
}

/// Empirical spatial F-madogram of one site-shuffled copy of `field`.
pub fn permuted_spatial_estimates<R: Rng + ?Sized>(
    field: &SpaceTimeField,
    lags: &[SpatialLag],
    rng: &mut R,
) -> Result<Vec<f64>> {
    let shuffled = permute_sites(field, rng);
    Ok(empirical_spatial_fmadogram(&shuffled, lags)?
        .iter()
        .map(|e| e.value)
        .collect())
}

/// Empirical temporal F-madogram of one time-shuffled copy of `field`.
pub fn permuted_temporal_estimates<R: Rng + ?Sized>(
    field: &SpaceTimeField,
    lags: &[u32],
    rng: &mut R,
) -> Result<Vec<f64>> {
    let shuffled = permute_times(field, rng);
    Ok(empirical_temporal_fmadogram(&shuffled, lags)?
        .iter()
        .map(|e| e.value)
        .collect())
}

/// Pointwise 2.5% / 97.5% band of the spatial F-madogram over `replicates`
/// site permutations. Replicate `i` draws from stream `i` of `seed`.
pub fn spatial_perm_band(
    field: &SpaceTimeField,
    lags: &[SpatialLag],
    replicates: usize,
    seed: u64,
) -> Result<PermBand> {
    let axis = lags.iter().map(|h| h.distance()).collect();
    band(LagAxis::Spatial, axis, replicates, |i| {
        permuted_spatial_estimates(field, lags, &mut replicate_rng(seed, i))
    })
}

/// Temporal counterpart of [`spatial_perm_band`], shuffling time order.
pub fn temporal_perm_band(field: &SpaceTimeField, lags: &[u32], replicates: usize, seed: u64) -> Result<PermBand> {
    let axis = lags.iter().map(|&l| l as f64).collect();
    band(LagAxis::Temporal, axis, replicates, |i| {
        permuted_temporal_estimates(field, lags, &mut replicate_rng(seed, i))
    })
}

/// First lag whose fitted F-madogram lies inside the band, if any.
pub fn dependence_range(band: &PermBand, fitted: &[f64]) -> Result<Option<f64>> {
    if fitted.len() != band.lags.len() {
        return Err(Error::LengthMismatch {
            len: fitted.len(),
            expected: band.lags.len(),
        });
    }
    Ok(fitted
        .iter()
        .enumerate()
        .find(|&(i, &v)| band.contains(i, v))
        .map(|(i, _)| band.lags[i]))
}
