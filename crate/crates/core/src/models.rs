//! Closed-form pairwise dependence for the supported space-time max-stable
//! families.
//!
//! Lags are always oriented: a pair is `(X(0, 0), X(h, l))` with `l >= 0`,
//! so `h` is the spatial offset from the earlier point to the later one.
//!
//! | family | construction | spatial params | temporal params |
//! |---|---|---|---|
//! | `A1` | Brown-Resnick, `gamma = 2 phi_s h^kappa_s + 2 phi_t l^kappa_t` | `phi_s, kappa_s` | `phi_t, kappa_t` |
//! | `A2` | Schlather, separable powered-exponential correlation | `phi_s, kappa_s` | `phi_t, kappa_t` |
//! | `B1` | max-autoregressive, Brown-Resnick innovation `gamma = (h/phi)^kappa` | `phi, kappa` | `tau1, tau2, delta` |
//! | `B2` | max-autoregressive, Smith innovation with covariance `Sigma` | `sigma11, sigma12, sigma22` | `tau1, tau2, delta` |
//! | `B3` | max-autoregressive, extremal-t innovation | `phi, kappa, nu` | `tau1, tau2, delta` |
//! | `B-Schlather` | max-autoregressive, Schlather innovation | `phi, kappa` | `tau1, tau2, delta` |
//!
//! The max-autoregressive families satisfy
//! `X(s, t) = max(delta X(s - tau, t - 1), (1 - delta) H(s, t))`, which gives
//! `V_{h,l}(x1, x2) = V^H_{h - l tau}(x1, x2 / delta^l) + (1 - delta^l) / x2`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::special::{norm_cdf, student_t_cdf};

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::InvalidParams(msg()))
    }
}

fn positive(name: &str, v: f64) -> Result<()> {
    check(v.is_finite() && v > 0.0, || format!("{name} must be > 0, got {v}"))
}

fn smoothness_closed(name: &str, v: f64) -> Result<()> {
    check(v > 0.0 && v <= 2.0, || format!("{name} must lie in (0, 2], got {v}"))
}

fn smoothness_open(name: &str, v: f64) -> Result<()> {
    check(v > 0.0 && v < 2.0, || format!("{name} must lie in (0, 2), got {v}"))
}

/// Space-time Brown-Resnick with the fractional-Brownian-motion semivariogram
/// `gamma(h, l) = 2 phi_s h^kappa_s + 2 phi_t l^kappa_t`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BrParams {
    pub phi_s: f64,
    pub kappa_s: f64,
    pub phi_t: f64,
    pub kappa_t: f64,
}

impl BrParams {
    pub fn new(phi_s: f64, kappa_s: f64, phi_t: f64, kappa_t: f64) -> Result<Self> {
        let p = Self {
            phi_s,
            kappa_s,
            phi_t,
            kappa_t,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        positive("phi_s", self.phi_s)?;
        smoothness_closed("kappa_s", self.kappa_s)?;
        positive("phi_t", self.phi_t)?;
        smoothness_closed("kappa_t", self.kappa_t)
    }

    pub fn spatial_semivariogram(&self, h: f64) -> f64 {
        if h == 0.0 {
            0.0
        } else {
            2.0 * self.phi_s * h.powf(self.kappa_s)
        }
    }

    pub fn temporal_semivariogram(&self, l: f64) -> f64 {
        if l == 0.0 {
            0.0
        } else {
            2.0 * self.phi_t * l.abs().powf(self.kappa_t)
        }
    }
}

/// Semivariogram of the space-time Brown-Resnick model.
pub fn fbm_semivariogram(h: f64, lprime: f64, p: &BrParams) -> f64 {
    p.spatial_semivariogram(h) + p.temporal_semivariogram(lprime)
}

/// Space-time Schlather with separable correlation
/// `rho(h, l) = exp(-[(h / phi_s)^kappa_s + (l / phi_t)^kappa_t])`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SepSchlatherParams {
    pub phi_s: f64,
    pub kappa_s: f64,
    pub phi_t: f64,
    pub kappa_t: f64,
}

impl SepSchlatherParams {
    pub fn new(phi_s: f64, kappa_s: f64, phi_t: f64, kappa_t: f64) -> Result<Self> {
        let p = Self {
            phi_s,
            kappa_s,
            phi_t,
            kappa_t,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        positive("phi_s", self.phi_s)?;
        smoothness_open("kappa_s", self.kappa_s)?;
        positive("phi_t", self.phi_t)?;
        smoothness_open("kappa_t", self.kappa_t)
    }

    pub fn correlation(&self, h: f64, l: f64) -> f64 {
        let mut e = 0.0;
        if h != 0.0 {
            e += (h / self.phi_s).powf(self.kappa_s);
        }
        if l != 0.0 {
            e += (l.abs() / self.phi_t).powf(self.kappa_t);
        }
        (-e).exp()
    }
}

/// Spatial max-stable process driving a max-autoregressive model.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Innovation {
    /// Gaussian storm profiles with covariance `[[s11, s12], [s12, s22]]`.
    Smith { sigma11: f64, sigma12: f64, sigma22: f64 },
    /// Brown-Resnick with semivariogram `(h / phi)^kappa`.
    BrownResnick { phi: f64, kappa: f64 },
    /// Schlather with correlation `exp(-(h / phi)^kappa)`.
    Schlather { phi: f64, kappa: f64 },
    /// Extremal-t with `nu` degrees of freedom and correlation `exp(-(h / phi)^kappa)`.
    ExtremalT { phi: f64, kappa: f64, nu: f64 },
}

impl Innovation {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Innovation::Smith {
                sigma11,
                sigma12,
                sigma22,
            } => {
                positive("sigma11", sigma11)?;
                positive("sigma22", sigma22)?;
                check(sigma11 * sigma22 - sigma12 * sigma12 > 0.0, || {
                    "Sigma must be positive definite".to_string()
                })
            }
            Innovation::BrownResnick { phi, kappa } => {
                positive("phi", phi)?;
                smoothness_closed("kappa", kappa)
            }
            Innovation::Schlather { phi, kappa } => {
                positive("phi", phi)?;
                smoothness_open("kappa", kappa)
            }
            Innovation::ExtremalT { phi, kappa, nu } => {
                positive("phi", phi)?;
                smoothness_open("kappa", kappa)?;
                check(nu.is_finite() && nu >= 1.0, || format!("nu must be >= 1, got {nu}"))
            }
        }
    }

    fn powered_exp_corr(d: [f64; 2], phi: f64, kappa: f64) -> f64 {
        let h = d[0].hypot(d[1]);
        if h == 0.0 {
            1.0
        } else {
            (-(h / phi).powf(kappa)).exp()
        }
    }

    /// Mahalanobis length `sqrt(d' Sigma^{-1} d)` for Smith, `sqrt(2 gamma(d))`
    /// for Brown-Resnick. `None` for the correlation-based innovations.
    pub fn hr_scale(&self, d: [f64; 2]) -> Option<f64> {
        match *self {
            Innovation::Smith {
                sigma11,
                sigma12,
                sigma22,
            } => {
                let det = sigma11 * sigma22 - sigma12 * sigma12;
                let q = (sigma22 * d[0] * d[0] - 2.0 * sigma12 * d[0] * d[1] + sigma11 * d[1] * d[1]) / det;
                Some(q.max(0.0).sqrt())
            }
            Innovation::BrownResnick { phi, kappa } => {
                let h = d[0].hypot(d[1]);
                let gamma = if h == 0.0 { 0.0 } else { (h / phi).powf(kappa) };
                Some((2.0 * gamma).sqrt())
            }
            _ => None,
        }
    }

    /// Spatial correlation for the Schlather and extremal-t innovations.
    pub fn correlation(&self, d: [f64; 2]) -> Option<f64> {
        match *self {
            Innovation::Schlather { phi, kappa } | Innovation::ExtremalT { phi, kappa, .. } => {
                Some(Self::powered_exp_corr(d, phi, kappa))
            }
            _ => None,
        }
    }

    /// Bivariate exponent function of the innovation at spatial offset `d`.
    pub fn exponent(&self, d: [f64; 2], x1: f64, x2: f64) -> f64 {
        match *self {
            Innovation::Smith { .. } | Innovation::BrownResnick { .. } => {
                hr_exponent(self.hr_scale(d).unwrap(), x1, x2)
            }
            Innovation::Schlather { .. } => schlather_exponent(self.correlation(d).unwrap(), x1, x2),
            Innovation::ExtremalT { nu, .. } => extremal_t_exponent(self.correlation(d).unwrap(), nu, x1, x2),
        }
    }
}

/// Husler-Reiss / Brown-Resnick pair exponent with dependence scale
/// `a = sqrt(2 gamma)`.
pub fn hr_exponent(a: f64, x1: f64, x2: f64) -> f64 {
    if a == 0.0 {
        return (1.0 / x1).max(1.0 / x2);
    }
    if a.is_infinite() {
        return 1.0 / x1 + 1.0 / x2;
    }
    let r = (x2 / x1).ln();
    let w1 = norm_cdf(0.5 * a + r / a);
    let w2 = norm_cdf(0.5 * a - r / a);
    term(w1, x1) + term(w2, x2)
}

// w / x with 0 / inf = 0.
fn term(w: f64, x: f64) -> f64 {
    if w == 0.0 {
        0.0
    } else {
        w / x
    }
}

/// Schlather pair exponent for correlation `rho`.
pub fn schlather_exponent(rho: f64, x1: f64, x2: f64) -> f64 {
    let (lo, hi) = if x1 <= x2 { (x1, x2) } else { (x2, x1) };
    let q = if hi.is_infinite() { 0.0 } else { lo / hi };
    let inner = (1.0 - 2.0 * (rho + 1.0) * q / ((1.0 + q) * (1.0 + q))).max(0.0);
    0.5 * (1.0 / x1 + 1.0 / x2) * (1.0 + inner.sqrt())
}

/// Extremal-t pair exponent
/// `x1^-1 T_{nu+1}(z(x2/x1)) + x2^-1 T_{nu+1}(z(x1/x2))`,
/// `z(r) = sqrt((nu+1)/(1-rho^2)) (r^{1/nu} - rho)`.
pub fn extremal_t_exponent(rho: f64, nu: f64, x1: f64, x2: f64) -> f64 {
    if rho >= 1.0 {
        return (1.0 / x1).max(1.0 / x2);
    }
    let scale = ((nu + 1.0) / (1.0 - rho * rho)).sqrt();
    let z = |ln_r: f64| scale * ((ln_r / nu).exp() - rho);
    let ln_r = (x2 / x1).ln();
    term(student_t_cdf(z(ln_r), nu + 1.0), x1) + term(student_t_cdf(z(-ln_r), nu + 1.0), x2)
}

/// Max-autoregressive model parameters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MarParams {
    pub innovation: Innovation,
    pub tau: [f64; 2],
    pub delta: f64,
}

impl MarParams {
    pub fn new(innovation: Innovation, tau: [f64; 2], delta: f64) -> Result<Self> {
        let p = Self { innovation, tau, delta };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        self.innovation.validate()?;
        check(self.tau.iter().all(|t| t.is_finite()), || "tau must be finite".into())?;
        check(self.delta > 0.0 && self.delta < 1.0, || {
            format!("delta must lie in (0, 1), got {}", self.delta)
        })
    }

    fn shifted(&self, h: [f64; 2], l: f64) -> [f64; 2] {
        [h[0] - l * self.tau[0], h[1] - l * self.tau[1]]
    }
}

/// Model family identifier.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Family {
    A1,
    A2,
    B1,
    B2,
    B3,
    #[serde(rename = "B-Schlather")]
    MarSchlather,
}

impl Family {
    pub const ALL: [Family; 6] = [
        Family::A1,
        Family::A2,
        Family::B1,
        Family::B2,
        Family::B3,
        Family::MarSchlather,
    ];

    pub fn id(&self) -> &'static str {
        match self {
            Family::A1 => "A1",
            Family::A2 => "A2",
            Family::B1 => "B1",
            Family::B2 => "B2",
            Family::B3 => "B3",
            Family::MarSchlather => "B-Schlather",
        }
    }

    pub fn spatial_names(&self) -> &'static [&'static str] {
        match self {
            Family::A1 | Family::A2 => &["phi_s", "kappa_s"],
            Family::B1 | Family::MarSchlather => &["phi", "kappa"],
            Family::B2 => &["sigma11", "sigma12", "sigma22"],
            Family::B3 => &["phi", "kappa", "nu"],
        }
    }

    pub fn temporal_names(&self) -> &'static [&'static str] {
        match self {
            Family::A1 | Family::A2 => &["phi_t", "kappa_t"],
            _ => &["tau1", "tau2", "delta"],
        }
    }

    pub fn param_names(&self) -> Vec<&'static str> {
        let mut v = self.spatial_names().to_vec();
        v.extend_from_slice(self.temporal_names());
        v
    }

    /// Number of purely spatial parameters `k_s`.
    pub fn k_spatial(&self) -> usize {
        self.spatial_names().len()
    }

    /// Number of purely temporal parameters `k_t`.
    pub fn k_temporal(&self) -> usize {
        self.temporal_names().len()
    }

    pub fn is_mar(&self) -> bool {
        !matches!(self, Family::A1 | Family::A2)
    }
}

impl std::fmt::Display for Family {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.id())
    }
}

impl std::str::FromStr for Family {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Family::ALL
            .into_iter()
            .find(|f| f.id().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Parse(format!("unknown model family {s:?}")))
    }
}

/// A fully parameterized model.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ModelRepr", into = "ModelRepr")]
pub enum ModelSpec {
    A1(BrParams),
    A2(SepSchlatherParams),
    Mar(MarParams),
}

impl ModelSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            ModelSpec::A1(p) => p.validate(),
            ModelSpec::A2(p) => p.validate(),
            ModelSpec::Mar(p) => p.validate(),
        }
    }

    pub fn family(&self) -> Family {
        match self {
            ModelSpec::A1(_) => Family::A1,
            ModelSpec::A2(_) => Family::A2,
            ModelSpec::Mar(m) => match m.innovation {
                Innovation::BrownResnick { .. } => Family::B1,
                Innovation::Smith { .. } => Family::B2,
                Innovation::ExtremalT { .. } => Family::B3,
                Innovation::Schlather { .. } => Family::MarSchlather,
            },
        }
    }

    /// Parameter vector, spatial block first (see [`Family::param_names`]).
    pub fn to_vec(&self) -> Vec<f64> {
        match *self {
            ModelSpec::A1(p) => vec![p.phi_s, p.kappa_s, p.phi_t, p.kappa_t],
            ModelSpec::A2(p) => vec![p.phi_s, p.kappa_s, p.phi_t, p.kappa_t],
            ModelSpec::Mar(m) => {
                let mut v = match m.innovation {
                    Innovation::Smith {
                        sigma11,
                        sigma12,
                        sigma22,
                    } => {
                        vec![sigma11, sigma12, sigma22]
                    }
                    Innovation::BrownResnick { phi, kappa } | Innovation::Schlather { phi, kappa } => {
                        vec![phi, kappa]
                    }
                    Innovation::ExtremalT { phi, kappa, nu } => vec![phi, kappa, nu],
                };
                v.extend_from_slice(&[m.tau[0], m.tau[1], m.delta]);
                v
            }
        }
    }

    /// Inverse of [`ModelSpec::to_vec`]; validates the result.
    pub fn from_vec(family: Family, v: &[f64]) -> Result<Self> {
        let need = family.k_spatial() + family.k_temporal();
        if v.len() != need {
            return Err(Error::InvalidArgs(format!(
                "{family} takes {need} parameters, got {}",
                v.len()
            )));
        }
        let mar = |innovation: Innovation, rest: &[f64]| {
            ModelSpec::Mar(MarParams {
                innovation,
                tau: [rest[0], rest[1]],
                delta: rest[2],
            })
        };
        let m = match family {
            Family::A1 => ModelSpec::A1(BrParams {
                phi_s: v[0],
                kappa_s: v[1],
                phi_t: v[2],
                kappa_t: v[3],
            }),
            Family::A2 => ModelSpec::A2(SepSchlatherParams {
                phi_s: v[0],
                kappa_s: v[1],
                phi_t: v[2],
                kappa_t: v[3],
            }),
            Family::B1 => mar(Innovation::BrownResnick { phi: v[0], kappa: v[1] }, &v[2..]),
            Family::B2 => mar(
                Innovation::Smith {
                    sigma11: v[0],
                    sigma12: v[1],
                    sigma22: v[2],
                },
                &v[3..],
            ),
            Family::B3 => mar(
                Innovation::ExtremalT {
                    phi: v[0],
                    kappa: v[1],
                    nu: v[2],
                },
                &v[3..],
            ),
            Family::MarSchlather => mar(Innovation::Schlather { phi: v[0], kappa: v[1] }, &v[2..]),
        };
        m.validate()?;
        Ok(m)
    }

    /// Extremal coefficient `theta(h, l)` from the family's closed form.
    pub fn theta(&self, h: [f64; 2], l: f64) -> f64 {
        let l = l.abs();
        match self {
            ModelSpec::A1(p) => {
                let g = fbm_semivariogram(h[0].hypot(h[1]), l, p);
                2.0 * norm_cdf((0.5 * g).sqrt())
            }
            ModelSpec::A2(p) => {
                let rho = p.correlation(h[0].hypot(h[1]), l);
                1.0 + ((1.0 - rho) / 2.0).max(0.0).sqrt()
            }
            ModelSpec::Mar(m) => mar_theta(m, h, l),
        }
    }

    /// Extremal coefficient at a scalar distance, for families whose
    /// dependence only involves `|h|` (`A1`, `A2`).
    pub fn theta_iso(&self, h: f64, l: f64) -> f64 {
        self.theta([h, 0.0], l)
    }

    /// Upper tail dependence `chi = 2 - theta`.
    pub fn chi(&self, h: [f64; 2], l: f64) -> f64 {
        2.0 - self.theta(h, l)
    }

    /// Model F-madogram `1/2 - 1/(theta + 1)`.
    pub fn fmadogram(&self, h: [f64; 2], l: f64) -> f64 {
        fmadogram_from_theta(self.theta(h, l))
    }

    /// Bivariate exponent `V_{h,l}(x1, x2)` of `(X(0, 0), X(h, l))`.
    pub fn exponent_v(&self, h: [f64; 2], l: f64, x1: f64, x2: f64) -> Result<f64> {
        if !(x1 > 0.0 && x2 > 0.0) {
            return Err(Error::InvalidArgs(format!(
                "exponent arguments must be positive, got ({x1}, {x2})"
            )));
        }
        let l = l.abs();
        Ok(match self {
            ModelSpec::A1(p) => {
                let g = fbm_semivariogram(h[0].hypot(h[1]), l, p);
                hr_exponent((2.0 * g).sqrt(), x1, x2)
            }
            ModelSpec::A2(p) => schlather_exponent(p.correlation(h[0].hypot(h[1]), l), x1, x2),
            ModelSpec::Mar(m) => {
                let dl = m.delta.powf(l);
                let d = m.shifted(h, l);
                m.innovation.exponent(d, x1, x2 / dl) + (1.0 - dl) / x2
            }
        })
    }

    /// `P(X(0, 0) <= x1, X(h, l) <= x2) = exp(-V)`.
    pub fn bivariate_cdf(&self, h: [f64; 2], l: f64, x1: f64, x2: f64) -> Result<f64> {
        Ok((-self.exponent_v(h, l, x1, x2)?).exp())
    }

    /// Space-time lambda-madogram of a max-autoregressive model,
    /// `nu_lambda = ((1-lambda) V* + 1 - delta^l) / ((1-lambda)(1 + V*) + 1 - delta^l) - c(lambda)`
    /// with `V* = V^H_{h - l tau}(lambda, (1-lambda) delta^{-l})`.
    pub fn lambda_madogram(&self, h: [f64; 2], l: f64, lambda: f64) -> Result<f64> {
        if !(lambda > 0.0 && lambda < 1.0) {
            return Err(Error::InvalidArgs(format!("lambda must lie in (0, 1), got {lambda}")));
        }
        let ModelSpec::Mar(m) = self else {
            return Err(Error::InvalidArgs(
                "the lambda-madogram closed form applies to max-autoregressive models".into(),
            ));
        };
        let l = l.abs();
        let dl = m.delta.powf(l);
        let v = m.innovation.exponent(m.shifted(h, l), lambda, (1.0 - lambda) / dl);
        let num = (1.0 - lambda) * v + 1.0 - dl;
        let den = (1.0 - lambda) * (1.0 + v) + 1.0 - dl;
        Ok(num / den - lambda_madogram_offset(lambda))
    }
}

/// `c(lambda) = 3 / (2 (1 + lambda) (2 - lambda))`.
pub fn lambda_madogram_offset(lambda: f64) -> f64 {
    3.0 / (2.0 * (1.0 + lambda) * (2.0 - lambda))
}

/// `nu_F = 1/2 - 1/(theta + 1)`.
pub fn fmadogram_from_theta(theta: f64) -> f64 {
    0.5 - 1.0 / (theta + 1.0)
}

/// Inverse of [`fmadogram_from_theta`]: `theta = (1 + 2 nu) / (1 - 2 nu)`.
pub fn theta_from_fmadogram(nu: f64) -> f64 {
    (1.0 + 2.0 * nu) / (1.0 - 2.0 * nu)
}

fn mar_theta(m: &MarParams, h: [f64; 2], l: f64) -> f64 {
    let ln_dl = l * m.delta.ln();
    let dl = ln_dl.exp();
    let d = m.shifted(h, l);
    let spatial = match m.innovation {
        Innovation::Smith { .. } | Innovation::BrownResnick { .. } => {
            let b = m.innovation.hr_scale(d).unwrap();
            if b == 0.0 {
                // Limit b -> 0: complete dependence of the shifted innovation.
                1.0f64.max(dl)
            } else {
                norm_cdf(0.5 * b - ln_dl / b) + dl * norm_cdf(0.5 * b + ln_dl / b)
            }
        }
        Innovation::Schlather { .. } => {
            let rho = m.innovation.correlation(d).unwrap();
            let s = 1.0 + dl;
            let inner = (1.0 - 2.0 * dl * (rho + 1.0) / (s * s)).max(0.0);
            0.5 * s * (1.0 + inner.sqrt())
        }
        Innovation::ExtremalT { nu, .. } => {
            let rho = m.innovation.correlation(d).unwrap();
            if rho >= 1.0 {
                1.0f64.max(dl)
            } else {
                let scale = ((nu + 1.0) / (1.0 - rho * rho)).sqrt();
                let z_up = scale * ((-ln_dl / nu).exp() - rho);
                let z_dn = scale * ((ln_dl / nu).exp() - rho);
                student_t_cdf(z_up, nu + 1.0) + dl * student_t_cdf(z_dn, nu + 1.0)
            }
        }
    };
    spatial + 1.0 - dl
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "family", content = "params")]
enum ModelRepr {
    A1(BrParams),
    A2(SepSchlatherParams),
    B1 {
        phi: f64,
        kappa: f64,
        tau: [f64; 2],
        delta: f64,
    },
    B2 {
        sigma11: f64,
        sigma12: f64,
        sigma22: f64,
        tau: [f64; 2],
        delta: f64,
    },
    B3 {
        phi: f64,
        kappa: f64,
        nu: f64,
        tau: [f64; 2],
        delta: f64,
    },
    #[serde(rename = "B-Schlather")]
    MarSchlather {
        phi: f64,
        kappa: f64,
        tau: [f64; 2],
        delta: f64,
    },
}

impl TryFrom<ModelRepr> for ModelSpec {
    type Error = Error;
    fn try_from(r: ModelRepr) -> Result<Self> {
        let m = match r {
            ModelRepr::A1(p) => ModelSpec::A1(p),
            ModelRepr::A2(p) => ModelSpec::A2(p),
            ModelRepr::B1 { phi, kappa, tau, delta } => ModelSpec::Mar(MarParams {
                innovation: Innovation::BrownResnick { phi, kappa },
                tau,
                delta,
            }),
            ModelRepr::B2 {
                sigma11,
                sigma12,
                sigma22,
                tau,
                delta,
            } => ModelSpec::Mar(MarParams {
                innovation: Innovation::Smith {
                    sigma11,
                    sigma12,
                    sigma22,
                },
                tau,
                delta,
            }),
            ModelRepr::B3 {
                phi,
                kappa,
                nu,
                tau,
                delta,
            } => ModelSpec::Mar(MarParams {
                innovation: Innovation::ExtremalT { phi, kappa, nu },
                tau,
                delta,
            }),
            ModelRepr::MarSchlather { phi, kappa, tau, delta } => ModelSpec::Mar(MarParams {
                innovation: Innovation::Schlather { phi, kappa },
                tau,
                delta,
            }),
        };
        m.validate()?;
        Ok(m)
    }
}

impl From<ModelSpec> for ModelRepr {
    fn from(m: ModelSpec) -> Self {
        match m {
            ModelSpec::A1(p) => ModelRepr::A1(p),
            ModelSpec::A2(p) => ModelRepr::A2(p),
            ModelSpec::Mar(MarParams { innovation, tau, delta }) => match innovation {
                Innovation::BrownResnick { phi, kappa } => ModelRepr::B1 { phi, kappa, tau, delta },
                Innovation::Smith {
                    sigma11,
                    sigma12,
                    sigma22,
                } => ModelRepr::B2 {
                    sigma11,
                    sigma12,
                    sigma22,
                    tau,
                    delta,
                },
                Innovation::ExtremalT { phi, kappa, nu } => ModelRepr::B3 {
                    phi,
                    kappa,
                    nu,
                    tau,
                    delta,
                },
                Innovation::Schlather { phi, kappa } => ModelRepr::MarSchlather { phi, kappa, tau, delta },
            },
        }
    }
}
