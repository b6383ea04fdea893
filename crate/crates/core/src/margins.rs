//! Marginal treatment of raw observations before dependence analysis.
//!
//! Raw data are reduced to space-time block maxima, optionally deseasonalized,
//! and each site's series is fitted by a GEV or Gumbel law. The probability
//! integral transform then maps every site to unit Fréchet margins (or, on
//! request, standard Gumbel margins).
//!
//! Missing values (`NaN`) are ignored by every fit and passed through the
//! transforms unchanged.

use nalgebra::Matrix3;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{Margins, SpaceTimeField};
use crate::optim::{nls_minimize, Bound, NlsOptions, ParamSpec};

const MIN_OBSERVATIONS: usize = 30;
const Z_975: f64 = 1.959_963_984_540_054;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GumbelParams {
    pub mu: f64,
    pub sigma: f64,
}

impl GumbelParams {
    pub fn new(mu: f64, sigma: f64) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite() && mu.is_finite()) {
            return Err(Error::InvalidParams(format!(
                "Gumbel needs finite mu and sigma > 0, got ({mu}, {sigma})"
            )));
        }
        Ok(Self { mu, sigma })
    }

    pub fn cdf(&self, x: f64) -> f64 {
        (-(-(x - self.mu) / self.sigma).exp()).exp()
    }

    pub fn quantile(&self, p: f64) -> f64 {
        self.mu - self.sigma * (-p.ln()).ln()
    }

    pub fn log_likelihood(&self, xs: &[f64]) -> f64 {
        xs.iter()
            .filter(|x| !x.is_nan())
            .map(|&x| {
                let z = (x - self.mu) / self.sigma;
                -self.sigma.ln() - z - (-z).exp()
            })
            .sum()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GevParams {
    pub mu: f64,
    pub sigma: f64,
    pub xi: f64,
}

impl GevParams {
    /// `1 + xi (x - mu) / sigma`, or `None` outside the support.
    fn support_term(&self, x: f64) -> Option<f64> {
        let t = 1.0 + self.xi * (x - self.mu) / self.sigma;
        (t > 0.0).then_some(t)
    }

    fn is_gumbel_limit(&self) -> bool {
        self.xi.abs() < 1e-10
    }

    pub fn cdf(&self, x: f64) -> f64 {
        if self.is_gumbel_limit() {
            return GumbelParams {
                mu: self.mu,
                sigma: self.sigma,
            }
            .cdf(x);
        }
        match self.support_term(x) {
            Some(t) => (-t.powf(-1.0 / self.xi)).exp(),
            None if self.xi > 0.0 => 0.0,
            None => 1.0,
        }
    }

    pub fn quantile(&self, p: f64) -> f64 {
        if self.is_gumbel_limit() {
            return GumbelParams {
                mu: self.mu,
                sigma: self.sigma,
            }
            .quantile(p);
        }
        self.mu + self.sigma * ((-p.ln()).powf(-self.xi) - 1.0) / self.xi
    }

    /// `-inf` if any observation lies outside the support.
    pub fn log_likelihood(&self, xs: &[f64]) -> f64 {
        if self.sigma.is_nan() || self.sigma <= 0.0 {
            return f64::NEG_INFINITY;
        }
        if self.is_gumbel_limit() {
            return GumbelParams {
                mu: self.mu,
                sigma: self.sigma,
            }
            .log_likelihood(xs);
        }
        let mut ll = 0.0;
        for &x in xs.iter().filter(|x| !x.is_nan()) {
            let Some(t) = self.support_term(x) else {
                return f64::NEG_INFINITY;
            };
            ll += -self.sigma.ln() - (1.0 + 1.0 / self.xi) * t.ln() - t.powf(-1.0 / self.xi);
        }
        ll
    }
}

/// A fitted marginal law.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "lowercase")]
pub enum MarginalLaw {
    Gumbel(GumbelParams),
    Gev(GevParams),
}

impl MarginalLaw {
    pub fn as_gev(&self) -> GevParams {
        match *self {
            MarginalLaw::Gumbel(g) => GevParams {
                mu: g.mu,
                sigma: g.sigma,
                xi: 0.0,
            },
            MarginalLaw::Gev(g) => g,
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        self.as_gev().cdf(x)
    }

    /// `x -> -1 / log F(x)`, computed without forming `F`. Missing values
    /// stay missing.
    pub fn to_frechet(&self, x: f64) -> f64 {
        if x.is_nan() {
            return f64::NAN;
        }
        let g = self.as_gev();
        let z = (x - g.mu) / g.sigma;
        if g.is_gumbel_limit() {
            z.exp()
        } else {
            let t = 1.0 + g.xi * z;
            if t > 0.0 {
                t.powf(1.0 / g.xi)
            } else if g.xi > 0.0 {
                0.0
            } else {
                f64::INFINITY
            }
        }
    }
}

/// Space-time block maxima over `space_block x space_block` cells and
/// `time_block` steps. Missing values are skipped; an all-missing block is
/// missing.
pub fn block_maxima(raw: &SpaceTimeField, space_block: usize, time_block: usize) -> Result<SpaceTimeField> {
    let (n, t_len) = (raw.n(), raw.t_len());
    if space_block == 0 || n % space_block != 0 {
        return Err(Error::IndivisibleBlocks {
            block: space_block,
            extent: n,
        });
    }
    if time_block == 0 || t_len % time_block != 0 {
        return Err(Error::IndivisibleBlocks {
            block: time_block,
            extent: t_len,
        });
    }
    let (m, tb) = (n / space_block, t_len / time_block);
    let mut out = vec![f64::NAN; m * m * tb];
    for t in 0..t_len {
        let slice = raw.slice(t);
        for y in 0..n {
            for x in 0..n {
                let v = slice[y * n + x];
                if v.is_nan() {
                    continue;
                }
                let cell = &mut out[((t / time_block) * m + y / space_block) * m + x / space_block];
                if cell.is_nan() || v > *cell {
                    *cell = v;
                }
            }
        }
    }
    SpaceTimeField::new(m, tb, out, raw.margins())
}

/// Removes the cross-year mean of each within-period index. The mean
/// includes the observation itself and skips missing values.
pub fn deseasonalize(series: &[f64], period: usize, years: usize) -> Result<Vec<f64>> {
    if period == 0 || years == 0 || series.len() != period * years {
        return Err(Error::LengthMismatch {
            len: series.len(),
            expected: period * years,
        });
    }
    let means: Vec<f64> = (0..period)
        .map(|i| {
            let (sum, count) = (0..years)
                .map(|y| series[y * period + i])
                .filter(|v| !v.is_nan())
                .fold((0.0, 0usize), |(s, c), v| (s + v, c + 1));
            if count == 0 {
                0.0
            } else {
                sum / count as f64
            }
        })
        .collect();
    Ok(series.iter().enumerate().map(|(k, v)| v - means[k % period]).collect())
}

pub fn deseasonalize_field(field: &SpaceTimeField, period: usize, years: usize) -> Result<SpaceTimeField> {
    field.map_series(field.margins(), |_, _, s| deseasonalize(s, period, years))
}

// Observed values rescaled to mean 0 and unit sd, with the affine map back.
struct Standardized {
    z: Vec<f64>,
    center: f64,
    scale: f64,
}

fn standardize(series: &[f64]) -> Result<Standardized> {
    if series.iter().any(|v| v.is_infinite()) {
        return Err(Error::InvalidArgs("series contains infinite values".into()));
    }
    let xs: Vec<f64> = series.iter().copied().filter(|v| !v.is_nan()).collect();
    if xs.len() < MIN_OBSERVATIONS {
        return Err(Error::InvalidArgs(format!(
            "need at least {MIN_OBSERVATIONS} observations, got {}",
            xs.len()
        )));
    }
    let n = xs.len() as f64;
    let center = xs.iter().sum::<f64>() / n;
    let scale = (xs.iter().map(|x| (x - center).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    if scale.is_nan() || scale <= 0.0 {
        return Err(Error::InvalidArgs("series is constant".into()));
    }
    Ok(Standardized {
        z: xs.iter().map(|x| (x - center) / scale).collect(),
        center,
        scale,
    })
}

/// Gumbel maximum likelihood. The scale solves the profile equation
/// `sigma = mean(x) - sum(x w) / sum(w)`, `w = exp(-x / sigma)`, by Newton's
/// method kept inside a shrinking bracket; the location follows in closed
/// form.
pub fn fit_gumbel(series: &[f64]) -> Result<GumbelParams> {
    let s = standardize(series)?;
    let (mu, sigma) = gumbel_mle_standard(&s.z)?;
    GumbelParams::new(s.center + s.scale * mu, s.scale * sigma)
}

fn gumbel_mle_standard(z: &[f64]) -> Result<(f64, f64)> {
    let zmin = z.iter().copied().fold(f64::INFINITY, f64::min);
    let mean = z.iter().sum::<f64>() / z.len() as f64;
    // g(sigma) and g'(sigma) = 1 + weighted variance / sigma^2 >= 1.
    let profile = |sigma: f64| {
        let (mut s0, mut s1, mut s2) = (0.0, 0.0, 0.0);
        for &v in z {
            let w = (-(v - zmin) / sigma).exp();
            s0 += w;
            s1 += w * v;
            s2 += w * v * v;
        }
        let m1 = s1 / s0;
        let var = (s2 / s0 - m1 * m1).max(0.0);
        (sigma - mean + m1, 1.0 + var / (sigma * sigma), s0)
    };
    let (mut lo, mut hi) = (1e-8, 2.0);
    while profile(hi).0 <= 0.0 {
        hi *= 2.0;
        if hi > 1e8 {
            return Err(Error::NoConvergence("Gumbel profile equation has no root".into()));
        }
    }
    let mut sigma = (6.0f64).sqrt() / std::f64::consts::PI;
    if !(lo..hi).contains(&sigma) {
        sigma = 0.5 * (lo + hi);
    }
    for _ in 0..200 {
        let (g, dg, _) = profile(sigma);
        if g == 0.0 {
            break;
        }
        if g < 0.0 {
            lo = sigma;
        } else {
            hi = sigma;
        }
        let newton = sigma - g / dg;
        let next = if newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        let done = (next - sigma).abs() <= 1e-15 * sigma.max(1.0) || hi - lo <= 1e-15 * hi;
        sigma = next;
        if done {
            break;
        }
    }
    let (_, _, s0) = profile(sigma);
    let mu = zmin - sigma * (s0 / z.len() as f64).ln();
    if !(mu.is_finite() && sigma.is_finite()) {
        return Err(Error::NoConvergence("Gumbel likelihood".into()));
    }
    Ok((mu, sigma))
}

/// GEV fit together with the asymptotic 95% interval for the shape.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GevFit {
    pub params: GevParams,
    pub xi_ci: (f64, f64),
}

impl GevFit {
    pub fn xi_ci_covers_zero(&self) -> bool {
        self.xi_ci.0 <= 0.0 && 0.0 <= self.xi_ci.1
    }
}

pub fn fit_gev(series: &[f64]) -> Result<GevParams> {
    fit_gev_with_ci(series).map(|f| f.params)
}

/// GEV maximum likelihood started from the Gumbel fit; the shape interval
/// uses the observed information from a finite-difference Hessian. If the
/// information matrix is not invertible the interval is the whole line.
pub fn fit_gev_with_ci(series: &[f64]) -> Result<GevFit> {
    let s = standardize(series)?;
    let (mu0, sigma0) = gumbel_mle_standard(&s.z)?;
    let nll = |p: &[f64]| {
        let ll = GevParams {
            mu: p[0],
            sigma: p[1],
            xi: p[2],
        }
        .log_likelihood(&s.z);
        if ll.is_finite() {
            -ll
        } else {
            f64::INFINITY
        }
    };
    let specs = [
        ParamSpec::new(Bound::Free, -1.0, 1.0),
        ParamSpec::new(Bound::POSITIVE, 0.3, 2.0),
        ParamSpec::new(Bound::Interval(-1.0, 1.0), -0.3, 0.3),
    ];
    let opts = NlsOptions {
        starts: 4,
        ..NlsOptions::default()
    };
    let min = nls_minimize(nll, &specs, Some(&[mu0, sigma0, 0.0]), &opts)?;
    if !min.value.is_finite() {
        return Err(Error::SupportViolation);
    }
    let p = &min.x;
    let xi_ci = match observed_information_inverse(&nll, p) {
        Some(cov) if cov[(2, 2)] > 0.0 => {
            let half = Z_975 * cov[(2, 2)].sqrt();
            (p[2] - half, p[2] + half)
        }
        _ => (f64::NEG_INFINITY, f64::INFINITY),
    };
    let params = GevParams {
        mu: s.center + s.scale * p[0],
        sigma: s.scale * p[1],
        xi: p[2],
    };
    if !params.log_likelihood(series).is_finite() {
        return Err(Error::SupportViolation);
    }
    Ok(GevFit { params, xi_ci })
}

fn observed_information_inverse(nll: &dyn Fn(&[f64]) -> f64, p: &[f64]) -> Option<Matrix3<f64>> {
    let step: Vec<f64> = p.iter().map(|v| 1e-4 * (1.0 + v.abs())).collect();
    let eval = |di: [f64; 3]| {
        let q: Vec<f64> = (0..3).map(|k| p[k] + di[k]).collect();
        nll(&q)
    };
    let f0 = nll(p);
    let mut hess = Matrix3::zeros();
    for i in 0..3 {
        for j in i..3 {
            let e = |si: f64, sj: f64| {
                let mut d = [0.0; 3];
                d[i] += si * step[i];
                d[j] += sj * step[j];
                eval(d)
            };
            let v = if i == j {
                (e(1.0, 0.0) - 2.0 * f0 + e(-1.0, 0.0)) / (step[i] * step[i])
            } else {
                (e(1.0, 1.0) - e(1.0, -1.0) - e(-1.0, 1.0) + e(-1.0, -1.0)) / (4.0 * step[i] * step[j])
            };
            hess[(i, j)] = v;
            hess[(j, i)] = v;
        }
    }
    if !hess.iter().all(|v| v.is_finite()) {
        return None;
    }
    hess.cholesky().map(|c| c.inverse())
}

/// Unit Fréchet scores `exp((x - mu) / sigma)`, equal to `-1 / log G(x)`.
pub fn pit_to_frechet(series: &[f64], p: &GumbelParams) -> Vec<f64> {
    let law = MarginalLaw::Gumbel(*p);
    series.iter().map(|&x| law.to_frechet(x)).collect()
}

/// Sorted sample against model quantiles at plotting positions `i/(N+1)`.
/// Missing values are dropped.
pub fn qq_data(series: &[f64], p: &GumbelParams) -> Vec<(f64, f64)> {
    let mut xs: Vec<f64> = series.iter().copied().filter(|v| !v.is_nan()).collect();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    xs.into_iter()
        .enumerate()
        .map(|(i, x)| (x, p.quantile((i as f64 + 1.0) / (n + 1.0))))
        .collect()
}

/// Which law each site receives.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LawChoice {
    /// Gumbel when the shape interval covers zero, GEV otherwise.
    #[default]
    Auto,
    Gumbel,
    Gev,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MarginOptions {
    pub law: LawChoice,
    /// Target margins of the transformed field: Fréchet or Gumbel.
    pub output: OutputMargins,
    /// `(period, years)` for deseasonalizing each site first.
    pub season: Option<(usize, usize)>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputMargins {
    #[default]
    Frechet,
    Gumbel,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SiteMargin {
    pub x: usize,
    pub y: usize,
    pub law: MarginalLaw,
    /// Shape interval from the GEV fit (absent when only Gumbel was fitted).
    pub xi_ci: Option<(f64, f64)>,
}

#[derive(Clone, Debug)]
pub struct MarginReport {
    pub sites: Vec<SiteMargin>,
    pub field: SpaceTimeField,
}

fn fit_site(series: &[f64], law: LawChoice) -> Result<(MarginalLaw, Option<(f64, f64)>)> {
    match law {
        LawChoice::Gumbel => Ok((MarginalLaw::Gumbel(fit_gumbel(series)?), None)),
        LawChoice::Gev => {
            let f = fit_gev_with_ci(series)?;
            Ok((MarginalLaw::Gev(f.params), Some(f.xi_ci)))
        }
        LawChoice::Auto => {
            let f = fit_gev_with_ci(series)?;
            let law = if f.xi_ci_covers_zero() {
                MarginalLaw::Gumbel(fit_gumbel(series)?)
            } else {
                MarginalLaw::Gev(f.params)
            };
            Ok((law, Some(f.xi_ci)))
        }
    }
}

/// Fits every site (in parallel) and transforms the field to the requested
/// margins.
pub fn transform_margins(raw: &SpaceTimeField, opts: &MarginOptions) -> Result<MarginReport> {
    if raw.margins() != Margins::Raw {
        return Err(Error::WrongMargins {
            found: raw.margins().to_string(),
            expected: Margins::Raw.to_string(),
        });
    }
    let n = raw.n();
    let per_site = (0..n * n)
        .into_par_iter()
        .map(|k| {
            let (x, y) = (k % n, k / n);
            let mut series = raw.series(x, y);
            if let Some((period, years)) = opts.season {
                series = deseasonalize(&series, period, years)?;
            }
            let (law, xi_ci) = fit_site(&series, opts.law)?;
            let out: Vec<f64> = series
                .iter()
                .map(|&v| match opts.output {
                    OutputMargins::Frechet => law.to_frechet(v),
                    OutputMargins::Gumbel => law.to_frechet(v).ln(),
                })
                .collect();
            Ok((SiteMargin { x, y, law, xi_ci }, out))
        })
        .collect::<Result<Vec<_>>>()?;
    let margins = match opts.output {
        OutputMargins::Frechet => Margins::Frechet,
        OutputMargins::Gumbel => Margins::Gumbel,
    };
    let mut values = vec![f64::NAN; raw.values().len()];
    for (site, series) in &per_site {
        for (t, v) in series.iter().enumerate() {
            values[raw.index(site.x, site.y, t)] = *v;
        }
    }
    let field = SpaceTimeField::new(n, raw.t_len(), values, margins)?;
    Ok(MarginReport {
        sites: per_site.into_iter().map(|(s, _)| s).collect(),
        field,
    })
}

/// Writes `x,y,mu,sigma,xi,ci_lo,ci_hi` with 1-based coordinates. Gumbel
/// sites report `xi = 0`; sites without a shape interval leave it empty.
pub fn write_params_csv<W: std::io::Write>(w: W, sites: &[SiteMargin]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["x", "y", "mu", "sigma", "xi", "ci_lo", "ci_hi"])?;
    for s in sites {
        let g = s.law.as_gev();
        let (lo, hi) = match s.xi_ci {
            Some((lo, hi)) => (lo.to_string(), hi.to_string()),
            None => (String::new(), String::new()),
        };
        out.write_record([
            (s.x + 1).to_string(),
            (s.y + 1).to_string(),
            g.mu.to_string(),
            g.sigma.to_string(),
            g.xi.to_string(),
            lo,
            hi,
        ])?;
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulate::replicate_rng;
    use proptest::prelude::*;

    const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;
    use rand::Rng;

    fn gumbel_sample(mu: f64, sigma: f64, n: usize, seed: u64) -> Vec<f64> {
        let mut rng = replicate_rng(seed, 0);
        (0..n).map(|_| mu - sigma * (-rng.random::<f64>().ln()).ln()).collect()
    }

    fn ks_frechet(xs: &[f64]) -> f64 {
        let mut v = xs.to_vec();
        v.sort_by(f64::total_cmp);
        let n = v.len() as f64;
        v.iter()
            .enumerate()
            .map(|(i, &x)| {
                let f = (-1.0 / x).exp();
                (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
            })
            .fold(0.0, f64::max)
    }

    #[test]
    fn block_maxima_shapes() {
        let f = SpaceTimeField::from_fn(6, 8, Margins::Raw, |x, y, t| (x + 10 * y + 100 * t) as f64).unwrap();
        assert_eq!(block_maxima(&f, 1, 1).unwrap().values(), f.values());
        let b = block_maxima(&f, 3, 4).unwrap();
        assert_eq!((b.n(), b.t_len()), (2, 2));
        assert_eq!(b.get(0, 0, 0), (2 + 20 + 300) as f64);
        assert_eq!(b.get(1, 1, 1), (5 + 50 + 700) as f64);
        assert!(matches!(
            block_maxima(&f, 4, 1),
            Err(Error::IndivisibleBlocks { block: 4, extent: 6 })
        ));
        assert!(matches!(
            block_maxima(&f, 1, 3),
            Err(Error::IndivisibleBlocks { block: 3, extent: 8 })
        ));
        let c = SpaceTimeField::from_fn(6, 8, Margins::Raw, |_, _, _| 2.5).unwrap();
        assert!(block_maxima(&c, 2, 2).unwrap().values().iter().all(|&v| v == 2.5));
    }

    #[test]
    fn block_maxima_of_the_hourly_design() {
        let f = SpaceTimeField::from_fn(70, 48, Margins::Raw, |x, y, t| (x * y + t) as f64).unwrap();
        let b = block_maxima(&f, 5, 24).unwrap();
        assert_eq!((b.n(), b.t_len()), (14, 2));
        assert_eq!(17568 / 24, 732);
    }

    #[test]
    fn missing_values_stay_missing_under_every_law() {
        let laws = [
            MarginalLaw::Gumbel(GumbelParams::new(0.0, 1.0).unwrap()),
            MarginalLaw::Gev(GevParams {
                mu: 0.0,
                sigma: 1.0,
                xi: -0.3,
            }),
            MarginalLaw::Gev(GevParams {
                mu: 0.0,
                sigma: 1.0,
                xi: 0.3,
            }),
        ];
        for law in laws {
            assert!(law.to_frechet(f64::NAN).is_nan(), "{law:?}");
        }
    }

    #[test]
    fn block_maxima_skip_missing() {
        let mut v: Vec<f64> = (0..16).map(|k| k as f64).collect();
        for k in [0, 1, 4] {
            v[k] = f64::NAN;
        }
        v[5] = f64::NAN;
        let f = SpaceTimeField::new(4, 1, v, Margins::Raw).unwrap();
        let b = block_maxima(&f, 2, 1).unwrap();
        assert!(b.get(0, 0, 0).is_nan());
        assert_eq!(b.get(1, 0, 0), 7.0);
        assert_eq!(b.get(1, 1, 0), 15.0);
    }

    #[test]
    fn deseasonalize_examples() {
        assert!(deseasonalize(&[4.0; 12], 4, 3).unwrap().iter().all(|&v| v == 0.0));
        let season = [1.0, 5.0, -2.0, 7.5];
        let rep: Vec<f64> = season.iter().cycle().take(12).copied().collect();
        assert!(deseasonalize(&rep, 4, 3).unwrap().iter().all(|&v| v == 0.0));
        assert!(matches!(
            deseasonalize(&rep, 5, 3),
            Err(Error::LengthMismatch { len: 12, expected: 15 })
        ));

        let noisy: Vec<f64> = gumbel_sample(0.0, 1.0, 122 * 6, 3)
            .iter()
            .enumerate()
            .map(|(k, e)| (k % 122) as f64 * 0.1 + e)
            .collect();
        let r = deseasonalize(&noisy, 122, 6).unwrap();
        for i in 0..122 {
            let m: f64 = (0..6).map(|y| r[y * 122 + i]).sum::<f64>() / 6.0;
            assert!(m.abs() < 1e-14, "index {i}: {m}");
        }
    }

    #[test]
    fn gumbel_mle_recovers_parameters() {
        let xs = gumbel_sample(2.0, 3.0, 10_000, 11);
        let p = fit_gumbel(&xs).unwrap();
        assert!((p.mu - 2.0).abs() / 2.0 < 0.02, "{p:?}");
        assert!((p.sigma - 3.0).abs() / 3.0 < 0.02, "{p:?}");
        // Beats the moment initializer.
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let sd = (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        let s0 = sd * 6f64.sqrt() / std::f64::consts::PI;
        let init = GumbelParams {
            mu: mean - EULER_GAMMA * s0,
            sigma: s0,
        };
        assert!(p.log_likelihood(&xs) >= init.log_likelihood(&xs));
    }

    #[test]
    fn gumbel_fit_is_a_stationary_point() {
        let xs = gumbel_sample(-1.0, 0.5, 500, 5);
        let p = fit_gumbel(&xs).unwrap();
        let ll = p.log_likelihood(&xs);
        for (dm, ds) in [(1e-4, 0.0), (-1e-4, 0.0), (0.0, 1e-4), (0.0, -1e-4)] {
            let q = GumbelParams {
                mu: p.mu + dm,
                sigma: p.sigma + ds,
            };
            assert!(q.log_likelihood(&xs) <= ll);
        }
    }

    #[test]
    fn fit_preconditions() {
        assert!(matches!(fit_gumbel(&[1.0; 10]), Err(Error::InvalidArgs(_))));
        let mut xs = gumbel_sample(0.0, 1.0, 50, 1);
        xs[3] = f64::INFINITY;
        assert!(fit_gumbel(&xs).is_err());
    }

    #[test]
    fn gev_recovers_shape_and_interval() {
        let mut rng = replicate_rng(21, 0);
        let truth = GevParams {
            mu: 10.0,
            sigma: 2.0,
            xi: 0.2,
        };
        let xs: Vec<f64> = (0..5000).map(|_| truth.quantile(rng.random::<f64>())).collect();
        let f = fit_gev_with_ci(&xs).unwrap();
        assert!((f.params.xi - 0.2).abs() < 0.05, "{f:?}");
        assert!((f.params.mu - 10.0).abs() < 0.15 && (f.params.sigma - 2.0).abs() < 0.1);
        assert!(f.xi_ci.0 < f.params.xi && f.params.xi < f.xi_ci.1);
        assert!(!f.xi_ci_covers_zero());

        let g = fit_gev_with_ci(&gumbel_sample(0.0, 1.0, 2000, 8)).unwrap();
        assert!(g.xi_ci_covers_zero(), "{g:?}");
    }

    #[test]
    fn pit_examples() {
        let p = GumbelParams::new(2.0, 3.0).unwrap();
        assert!((pit_to_frechet(&[2.0], &p)[0] - 1.0).abs() < 1e-15);
        let direct = -1.0 / p.cdf(5.0).ln();
        assert!((pit_to_frechet(&[5.0], &p)[0] - direct).abs() < 1e-12);

        let xs = gumbel_sample(2.0, 3.0, 10_000, 13);
        let fitted = fit_gumbel(&xs).unwrap();
        let z = pit_to_frechet(&xs, &fitted);
        assert!(z.iter().all(|&v| v > 0.0));
        let d = ks_frechet(&z);
        assert!(d < 1.628 / (xs.len() as f64).sqrt(), "KS {d}");
    }

    #[test]
    fn qq_examples() {
        let p = GumbelParams::new(1.0, 2.0).unwrap();
        let n = 99;
        let exact: Vec<f64> = (1..=n).rev().map(|i| p.quantile(i as f64 / (n as f64 + 1.0))).collect();
        for (a, b) in qq_data(&exact, &p) {
            assert!((a - b).abs() < 1e-12);
        }
        let one = qq_data(&[4.0], &p);
        assert_eq!(one.len(), 1);
        assert_eq!(one[0].0, 4.0);
        assert!((one[0].1 - p.quantile(0.5)).abs() < 1e-15);

        let max_dev = |n: usize| {
            qq_data(&gumbel_sample(1.0, 2.0, n, 17), &p)
                .iter()
                .skip(n / 20)
                .take(n - n / 10)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max)
        };
        assert!(max_dev(10_000) < max_dev(100));
    }

    #[test]
    fn transform_field_and_params_csv() {
        let mut rng = replicate_rng(4, 0);
        let raw = SpaceTimeField::from_fn(3, 200, Margins::Raw, |x, y, _| {
            (x + y) as f64 - 0.7 * (-rng.random::<f64>().ln()).ln()
        })
        .unwrap();
        let opts = MarginOptions {
            law: LawChoice::Gumbel,
            ..Default::default()
        };
        let r = transform_margins(&raw, &opts).unwrap();
        assert_eq!(r.field.margins(), Margins::Frechet);
        assert_eq!(r.sites.len(), 9);
        let gum = transform_margins(
            &raw,
            &MarginOptions {
                output: OutputMargins::Gumbel,
                ..opts
            },
        )
        .unwrap();
        assert!((gum.field.values()[7] - r.field.values()[7].ln()).abs() < 1e-12);
        let mut buf = Vec::new();
        write_params_csv(&mut buf, &r.sites).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("x,y,mu,sigma,xi,ci_lo,ci_hi\n1,1,"));
        assert_eq!(text.lines().count(), 10);
        assert!(matches!(
            transform_margins(&r.field, &opts),
            Err(Error::WrongMargins { .. })
        ));
    }

    #[test]
    fn auto_law_prefers_gumbel_on_gumbel_data() {
        let mut rng = replicate_rng(9, 0);
        let raw = SpaceTimeField::from_fn(2, 400, Margins::Raw, |_, _, _| -(-rng.random::<f64>().ln()).ln()).unwrap();
        let r = transform_margins(&raw, &MarginOptions::default()).unwrap();
        let gumbels = r
            .sites
            .iter()
            .filter(|s| matches!(s.law, MarginalLaw::Gumbel(_)))
            .count();
        assert!(gumbels >= 3, "{:?}", r.sites);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn gumbel_fit_is_affine_equivariant(seed in 0u64..1000, shift in -50.0f64..50.0, scale in 0.1f64..20.0) {
            let xs = gumbel_sample(0.5, 1.5, 200, seed);
            let base = fit_gumbel(&xs).unwrap();
            let shifted: Vec<f64> = xs.iter().map(|x| x + shift).collect();
            let scaled: Vec<f64> = xs.iter().map(|x| x * scale).collect();
            let a = fit_gumbel(&shifted).unwrap();
            let b = fit_gumbel(&scaled).unwrap();
            prop_assert!((a.mu - (base.mu + shift)).abs() < 1e-8);
            prop_assert!((a.sigma - base.sigma).abs() < 1e-8);
            prop_assert!((b.mu - scale * base.mu).abs() < 1e-8 * scale.max(1.0));
            prop_assert!((b.sigma - scale * base.sigma).abs() < 1e-8 * scale.max(1.0));
        }

        #[test]
        fn pit_is_invariant_under_affine_refits(seed in 0u64..1000, shift in -50.0f64..50.0, scale in 0.1f64..20.0) {
            let xs = gumbel_sample(0.5, 1.5, 200, seed);
            let ys: Vec<f64> = xs.iter().map(|x| scale * x + shift).collect();
            let zx = pit_to_frechet(&xs, &fit_gumbel(&xs).unwrap());
            let zy = pit_to_frechet(&ys, &fit_gumbel(&ys).unwrap());
            for (a, b) in zx.iter().zip(&zy) {
                prop_assert!((a - b).abs() <= 1e-8 * a.max(1.0));
            }
        }

        #[test]
        fn pit_is_strictly_increasing(mu in -10.0f64..10.0, sigma in 0.1f64..10.0, a in -5.0f64..5.0, d in 1e-3f64..5.0) {
            let p = GumbelParams::new(mu, sigma).unwrap();
            let z = pit_to_frechet(&[mu + a * sigma, mu + (a + d) * sigma], &p);
            prop_assert!(z[0] > 0.0 && z[0] < z[1]);
        }

        #[test]
        fn fit_inverts_frechet_pit(seed in 0u64..1000) {
            // Gumbel data built as mu + sigma * log(Frechet draw).
            let mut rng = replicate_rng(seed, 1);
            let xs: Vec<f64> = (0..3000).map(|_| 3.0 + 0.5 * (-1.0 / rng.random::<f64>().ln()).ln()).collect();
            let p = fit_gumbel(&xs).unwrap();
            prop_assert!((p.mu - 3.0).abs() < 0.06 && (p.sigma - 0.5).abs() < 0.05);
        }
    }
}
