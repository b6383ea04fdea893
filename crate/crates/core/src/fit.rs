//! Weighted least-squares fits of model F-madograms to empirical ones.
//!
//! Scheme 1 fits the spatial parameters to purely spatial estimates, then the
//! temporal parameters to purely temporal estimates with the spatial ones held
//! fixed. Scheme 2 fits everything at once to the joint estimates over
//! `H x K`.
//!
//! For the isotropic families (`A1`, `A2`) each scalar lag `(h, l')` is one
//! least-squares term. The max-autoregressive families depend on the vector
//! `h - l' tau`, so their joint terms are the individual vector lag classes;
//! the Smith innovation is anisotropic, so its spatial terms are vector
//! classes too.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{LagGroup, LagPlan};
use crate::madogram::{GroupEstimate, MadogramEstimate, PlanEstimates, VectorEstimate};
use crate::models::{Family, ModelSpec};
use crate::optim::{nls_minimize, Bound, NlsOptions, ParamSpec};

/// Per-lag weights of the least-squares objectives.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "policy", rename_all = "snake_case")]
pub enum Weights {
    #[default]
    Equal,
    /// `1{h <= r} 1{l' <= q}`.
    Cutoff { r: f64, q: f64 },
    /// `exp(-c (h + l'))`.
    Exponential { c: f64 },
    /// `exp(-c (h^2 + l'^2))`.
    Gaussian { c: f64 },
    /// `(h + l')^(-c)`.
    Power { c: f64 },
}

impl Weights {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            Weights::Equal => true,
            Weights::Cutoff { r, q } => r >= 0.0 && q >= 0.0,
            Weights::Exponential { c } | Weights::Gaussian { c } | Weights::Power { c } => c > 0.0 && c.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgs(format!("invalid weights {self:?}")))
        }
    }

    pub fn weight(&self, h: f64, l: f64) -> f64 {
        match *self {
            Weights::Equal => 1.0,
            Weights::Cutoff { r, q } => {
                if h <= r && l <= q {
                    1.0
                } else {
                    0.0
                }
            }
            Weights::Exponential { c } => (-c * (h + l)).exp(),
            Weights::Gaussian { c } => (-c * (h * h + l * l)).exp(),
            Weights::Power { c } => (h + l).powf(-c),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum Scheme {
    #[default]
    #[serde(rename = "1")]
    Separate,
    #[serde(rename = "2")]
    Joint,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FitOptions {
    pub weights: Weights,
    /// Starting parameter vector in [`ModelSpec::to_vec`] order.
    pub init: Option<Vec<f64>>,
    pub nls: NlsOptions,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub model: ModelSpec,
    /// Final weighted sum of squares (both parts for Scheme 1).
    pub objective: f64,
    pub scheme: Scheme,
    pub iterations: usize,
    pub converged: bool,
    pub restarts_used: usize,
    /// Scheme 1 only: unit-weight sums of squares over the scalar spatial and
    /// temporal lags, and the number of lags in each.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub losses: Option<SchemeLosses>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SchemeLosses {
    pub spatial: f64,
    pub temporal: f64,
    pub spatial_lags: usize,
    pub temporal_lags: usize,
}

impl FitResult {
    /// `(AIC_NLS, AIC_NLSc)` of a Scheme 1 fit.
    pub fn aic(&self) -> Result<AicValues> {
        let l = self
            .losses
            .ok_or_else(|| Error::InvalidArgs("AIC is defined for Scheme 1 fits only".into()))?;
        let f = self.model.family();
        aic_nls(
            l.spatial,
            l.temporal,
            l.spatial_lags,
            l.temporal_lags,
            f.k_spatial(),
            f.k_temporal(),
        )
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AicValues {
    pub aic: f64,
    pub aicc: f64,
}

/// `AIC_NLS = |H| log(L_s/|H|) + 2(k_s+1) + |K| log(L_t/|K|) + 2(k_t+1)` and
/// the corrected version adding `2(k+1)(k+2)/(n-k)` for each part.
pub fn aic_nls(l_s: f64, l_t: f64, nh: usize, nk: usize, k_s: usize, k_t: usize) -> Result<AicValues> {
    if nh <= k_s || nk <= k_t {
        return Err(Error::InvalidArgs(format!(
            "need more lags than parameters: |H|={nh}, k_s={k_s}, |K|={nk}, k_t={k_t}"
        )));
    }
    let part = |loss: f64, n: usize, k: usize| {
        let (n, k) = (n as f64, k as f64);
        let aic = n * (loss / n).ln() + 2.0 * (k + 1.0);
        (aic, 2.0 * (k + 1.0) * (k + 2.0) / (n - k))
    };
    let (a_s, c_s) = part(l_s, nh, k_s);
    let (a_t, c_t) = part(l_t, nk, k_t);
    Ok(AicValues {
        aic: a_s + a_t,
        aicc: a_s + a_t + c_s + c_t,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
struct Term {
    h: [f64; 2],
    l: f64,
    weight: f64,
    target: f64,
}

fn objective(model: &ModelSpec, terms: &[Term]) -> f64 {
    terms
        .iter()
        .map(|t| {
            let r = t.target - model.fmadogram(t.h, t.l);
            t.weight * r * r
        })
        .sum()
}

fn usable(v: f64, n: u64) -> bool {
    n > 0 && v.is_finite()
}

fn scalar_terms(groups: &[GroupEstimate], w: &Weights) -> Vec<Term> {
    groups
        .iter()
        .filter(|g| usable(g.estimate.value, g.estimate.npairs))
        .map(|g| {
            let (h, l) = (g.estimate.h.distance(), g.estimate.lprime as f64);
            Term {
                h: [h, 0.0],
                l,
                weight: w.weight(h, l),
                target: g.estimate.value,
            }
        })
        .collect()
}

fn vector_terms(groups: &[GroupEstimate], w: &Weights) -> Vec<Term> {
    groups
        .iter()
        .flat_map(|g| g.vectors.iter())
        .filter(|v| usable(v.value, v.npairs))
        .map(|v| {
            let l = v.lag.lprime as f64;
            Term {
                h: v.lag.offset(),
                l,
                weight: w.weight(v.lag.h(), l),
                target: v.value,
            }
        })
        .collect()
}

#[derive(Clone, Copy, PartialEq)]
enum Block {
    Spatial,
    Temporal,
    All,
}

fn smooth() -> ParamSpec {
    ParamSpec::new(Bound::Interval(0.0, 2.0), 0.2, 1.9)
}

fn range() -> ParamSpec {
    ParamSpec::new(Bound::POSITIVE, 0.2, 5.0)
}

fn spatial_specs(f: Family) -> Vec<ParamSpec> {
    match f {
        Family::A1 => vec![ParamSpec::new(Bound::POSITIVE, 0.02, 2.0), smooth()],
        Family::A2 | Family::B1 | Family::MarSchlather => vec![range(), smooth()],
        // Cholesky factor (l11, l21, l22) of Sigma.
        Family::B2 => vec![
            ParamSpec::new(Bound::POSITIVE, 0.3, 3.0),
            ParamSpec::new(Bound::Free, -1.0, 1.0),
            ParamSpec::new(Bound::POSITIVE, 0.3, 3.0),
        ],
        Family::B3 => vec![range(), smooth(), ParamSpec::new(Bound::Lower(1.0), 1.0, 20.0)],
    }
}

fn temporal_specs(f: Family) -> Vec<ParamSpec> {
    match f {
        Family::A1 => vec![ParamSpec::new(Bound::POSITIVE, 0.02, 2.0), smooth()],
        Family::A2 => vec![range(), smooth()],
        _ => vec![
            ParamSpec::new(Bound::Free, -2.0, 2.0),
            ParamSpec::new(Bound::Free, -2.0, 2.0),
            ParamSpec::new(Bound::Interval(0.0, 1.0), 0.05, 0.95),
        ],
    }
}

// Natural spatial block <-> optimizer coordinates (differs only for Sigma).
fn spatial_to_opt(f: Family, x: &[f64]) -> Vec<f64> {
    if f == Family::B2 {
        let l11 = x[0].max(1e-12).sqrt();
        let l21 = x[1] / l11;
        let l22 = (x[2] - l21 * l21).max(1e-12).sqrt();
        vec![l11, l21, l22]
    } else {
        x.to_vec()
    }
}

fn spatial_from_opt(f: Family, x: &[f64]) -> Vec<f64> {
    if f == Family::B2 {
        vec![x[0] * x[0], x[0] * x[1], x[1] * x[1] + x[2] * x[2]]
    } else {
        x.to_vec()
    }
}

// Temporal values used when only the spatial block matters (l' = 0).
fn neutral_temporal(f: Family) -> Vec<f64> {
    match f {
        Family::A1 | Family::A2 => vec![1.0, 1.0],
        _ => vec![0.0, 0.0, 0.5],
    }
}

struct Problem<'a> {
    family: Family,
    block: Block,
    fixed_spatial: &'a [f64],
    /// Unit direction of `tau` in the MAR temporal block, where only the
    /// magnitude is fitted.
    shift_direction: [f64; 2],
    terms: Vec<Term>,
}

impl Problem<'_> {
    fn specs(&self) -> Vec<ParamSpec> {
        match self.block {
            Block::Spatial => spatial_specs(self.family),
            Block::Temporal if self.family.is_mar() => vec![
                ParamSpec::new(Bound::Free, 0.0, 2.0),
                ParamSpec::new(Bound::Interval(0.0, 1.0), 0.05, 0.95),
            ],
            Block::Temporal => temporal_specs(self.family),
            Block::All => {
                let mut v = spatial_specs(self.family);
                v.extend(temporal_specs(self.family));
                v
            }
        }
    }

    fn decode(&self, x: &[f64]) -> Result<ModelSpec> {
        let ks = self.family.k_spatial();
        let full = match self.block {
            Block::Spatial => [spatial_from_opt(self.family, x), neutral_temporal(self.family)].concat(),
            Block::Temporal if self.family.is_mar() => {
                let [u, v] = self.shift_direction;
                [self.fixed_spatial.to_vec(), vec![x[0] * u, x[0] * v, x[1]]].concat()
            }
            Block::Temporal => [self.fixed_spatial.to_vec(), x.to_vec()].concat(),
            Block::All => [spatial_from_opt(self.family, &x[..ks]), x[ks..].to_vec()].concat(),
        };
        ModelSpec::from_vec(self.family, &full)
    }

    fn encode(&self, natural: &[f64]) -> Vec<f64> {
        let ks = self.family.k_spatial();
        match self.block {
            Block::Spatial => spatial_to_opt(self.family, &natural[..ks]),
            Block::Temporal if self.family.is_mar() => {
                let [u, v] = self.shift_direction;
                vec![natural[ks] * u + natural[ks + 1] * v, natural[ks + 2]]
            }
            Block::Temporal => natural[ks..].to_vec(),
            Block::All => [spatial_to_opt(self.family, &natural[..ks]), natural[ks..].to_vec()].concat(),
        }
    }

    fn value(&self, x: &[f64]) -> f64 {
        match self.decode(x) {
            Ok(m) => objective(&m, &self.terms),
            Err(_) => f64::INFINITY,
        }
    }

    fn solve(&self, init: Option<&[f64]>, nls: &NlsOptions) -> Result<(ModelSpec, crate::optim::Minimum)> {
        let nparams = self.specs().len();
        let informative = self.terms.iter().filter(|t| t.weight > 0.0).count();
        if informative < nparams {
            return Err(Error::InsufficientLags {
                have: informative,
                need: nparams,
            });
        }
        let start = init.map(|v| self.encode(v));
        let specs = self.specs();
        let start = start.filter(|s| s.iter().zip(&specs).all(|(v, p)| p.bound.contains(*v)));
        let min = nls_minimize(|x| self.value(x), &specs, start.as_deref(), nls)?;
        Ok((self.decode(&min.x)?, min))
    }
}

fn uses_vector_spatial_terms(f: Family) -> bool {
    f == Family::B2
}

fn check_init(family: Family, opts: &FitOptions) -> Result<()> {
    opts.weights.validate()?;
    if let Some(init) = &opts.init {
        ModelSpec::from_vec(family, init)?;
    }
    Ok(())
}

/// Unit-weight squared error of `model` over the scalar lags of `groups`.
fn unit_loss(model: &ModelSpec, groups: &[GroupEstimate]) -> (f64, usize) {
    let mut loss = 0.0;
    let mut n = 0;
    for g in groups.iter().filter(|g| usable(g.estimate.value, g.estimate.npairs)) {
        let r = g.estimate.value - model_group_value(model, g);
        loss += r * r;
        n += 1;
    }
    (loss, n)
}

/// Model F-madogram for a scalar lag class: the pair-count-weighted mean of
/// the model over the class's vector lags.
pub fn model_group_value(model: &ModelSpec, g: &GroupEstimate) -> f64 {
    let l = g.estimate.lprime as f64;
    let total: u64 = g.vectors.iter().map(|v| v.npairs).sum();
    if total == 0 {
        return model.fmadogram([g.estimate.h.distance(), 0.0], l);
    }
    g.vectors
        .iter()
        .map(|v| v.npairs as f64 * model.fmadogram(v.lag.offset(), l))
        .sum::<f64>()
        / total as f64
}

/// Purely temporal lags see the MAR shift only through a quadratic form in
/// `tau`, so its direction is taken from the starting value (the x-axis if
/// there is none) and only its magnitude is fitted.
fn shift_direction(family: Family, init: Option<&[f64]>) -> [f64; 2] {
    let ks = family.k_spatial();
    match init {
        Some(v) if family.is_mar() => {
            let norm = v[ks].hypot(v[ks + 1]);
            if norm > 0.0 {
                [v[ks] / norm, v[ks + 1] / norm]
            } else {
                [1.0, 0.0]
            }
        }
        _ => [1.0, 0.0],
    }
}

/// Scheme 1: spatial parameters from `(h, 0)` estimates, then temporal
/// parameters from `(0, l')` estimates with the spatial ones fixed.
pub fn fit_scheme1(family: Family, data: &PlanEstimates, opts: &FitOptions) -> Result<FitResult> {
    check_init(family, opts)?;
    let w = &opts.weights;
    let spatial_terms = if uses_vector_spatial_terms(family) {
        vector_terms(&data.spatial, w)
    } else {
        scalar_terms(&data.spatial, w)
    };
    let ks = family.k_spatial();
    let sp = Problem {
        family,
        block: Block::Spatial,
        fixed_spatial: &[],
        shift_direction: [1.0, 0.0],
        terms: spatial_terms,
    };
    let (sp_model, sp_min) = sp.solve(opts.init.as_deref(), &opts.nls)?;
    let spatial = sp_model.to_vec()[..ks].to_vec();
    let tp = Problem {
        family,
        block: Block::Temporal,
        fixed_spatial: &spatial,
        shift_direction: shift_direction(family, opts.init.as_deref()),
        terms: scalar_terms(&data.temporal, w),
    };
    let init = opts.init.as_ref().map(|v| [spatial.clone(), v[ks..].to_vec()].concat());
    let (model, tp_min) = tp.solve(init.as_deref(), &opts.nls)?;
    let (ls, nh) = unit_loss(&model, &data.spatial);
    let (lt, nk) = unit_loss(&model, &data.temporal);
    Ok(FitResult {
        model,
        objective: sp_min.value + tp_min.value,
        scheme: Scheme::Separate,
        iterations: sp_min.iterations + tp_min.iterations,
        converged: sp_min.converged && tp_min.converged,
        restarts_used: sp_min.starts_used + tp_min.starts_used,
        losses: Some(SchemeLosses {
            spatial: ls,
            temporal: lt,
            spatial_lags: nh,
            temporal_lags: nk,
        }),
    })
}

/// Scheme 2: all parameters at once from the joint estimates.
pub fn fit_scheme2(family: Family, data: &PlanEstimates, opts: &FitOptions) -> Result<FitResult> {
    check_init(family, opts)?;
    let terms = if family.is_mar() {
        vector_terms(&data.joint, &opts.weights)
    } else {
        scalar_terms(&data.joint, &opts.weights)
    };
    let p = Problem {
        family,
        block: Block::All,
        fixed_spatial: &[],
        shift_direction: [1.0, 0.0],
        terms,
    };
    let (model, min) = p.solve(opts.init.as_deref(), &opts.nls)?;
    Ok(FitResult {
        model,
        objective: min.value,
        scheme: Scheme::Joint,
        iterations: min.iterations,
        converged: min.converged,
        restarts_used: min.starts_used,
        losses: None,
    })
}

/// Exact model F-madograms laid out like empirical estimates for `plan`;
/// pair counts are those of a complete field.
pub fn exact_estimates(model: &ModelSpec, plan: &LagPlan) -> PlanEstimates {
    let build = |groups: &[LagGroup]| -> Vec<GroupEstimate> {
        groups
            .iter()
            .map(|g| {
                let vectors: Vec<VectorEstimate> = g
                    .vectors
                    .iter()
                    .map(|&lag| VectorEstimate {
                        lag,
                        value: model.fmadogram(lag.offset(), lag.lprime as f64),
                        npairs: lag.pair_count(plan.grid(), plan.t_len()) as u64,
                    })
                    .collect();
                let mut ge = GroupEstimate {
                    estimate: MadogramEstimate {
                        h: g.h,
                        lprime: g.lprime,
                        value: 0.0,
                        npairs: 0,
                    },
                    vectors,
                };
                ge.estimate.npairs = ge.vectors.iter().map(|v| v.npairs).sum();
                ge.estimate.value = model_group_value(model, &ge);
                ge
            })
            .collect()
    };
    PlanEstimates {
        spatial: build(plan.spatial()),
        temporal: build(plan.temporal()),
        joint: build(plan.joint()),
    }
}

/// Empirical vs fitted F-madogram per scalar lag.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FittedPoint {
    pub h: f64,
    pub lprime: u32,
    pub empirical: f64,
    pub fitted: f64,
}

pub fn fitted_points(model: &ModelSpec, groups: &[GroupEstimate]) -> Vec<FittedPoint> {
    groups
        .iter()
        .map(|g| FittedPoint {
            h: g.estimate.h.distance(),
            lprime: g.estimate.lprime,
            empirical: g.estimate.value,
            fitted: model_group_value(model, g),
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AicEntry {
    pub family: Family,
    pub aic: f64,
    pub aicc: f64,
    pub scheme1: FitResult,
    pub scheme2: FitResult,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AicReport {
    pub entries: Vec<AicEntry>,
    pub selected: Family,
}

/// Fits every candidate (Scheme 2 first, its estimate seeding Scheme 1) and
/// picks the smallest `AIC_NLSc`. Ties within `1e-9` go to the model with
/// fewer parameters, then to the earlier candidate.
pub fn select_model(candidates: &[Family], data: &PlanEstimates, opts: &FitOptions) -> Result<AicReport> {
    if candidates.is_empty() {
        return Err(Error::InvalidArgs("no candidate models".into()));
    }
    let entries = candidates
        .par_iter()
        .map(|&family| {
            let s2 = fit_scheme2(
                family,
                data,
                &FitOptions {
                    init: None,
                    ..opts.clone()
                },
            )?;
            let s1 = fit_scheme1(
                family,
                data,
                &FitOptions {
                    init: Some(s2.model.to_vec()),
                    ..opts.clone()
                },
            )?;
            let a = s1.aic()?;
            Ok(AicEntry {
                family,
                aic: a.aic,
                aicc: a.aicc,
                scheme1: s1,
                scheme2: s2,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let nparams = |f: Family| f.k_spatial() + f.k_temporal();
    let mut best = 0;
    for (i, e) in entries.iter().enumerate().skip(1) {
        let b = &entries[best];
        let tie = (e.aicc - b.aicc).abs() < 1e-9;
        if (!tie && e.aicc < b.aicc) || (tie && nparams(e.family) < nparams(b.family)) {
            best = i;
        }
    }
    let selected = entries[best].family;
    Ok(AicReport { entries, selected })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{GridSpec, LagSets};

    fn plan(n: usize, t: usize) -> LagPlan {
        LagPlan::new(GridSpec::new(n).unwrap(), t, &LagSets::standard()).unwrap()
    }

    fn truths() -> Vec<ModelSpec> {
        vec![
            ModelSpec::from_vec(Family::A1, &[0.4, 1.5, 0.2, 1.0]).unwrap(),
            ModelSpec::from_vec(Family::A2, &[3.0, 1.0, 4.0, 0.8]).unwrap(),
            ModelSpec::from_vec(Family::B1, &[2.0, 1.2, 1.0, 0.0, 0.6]).unwrap(),
            ModelSpec::from_vec(Family::B2, &[1.0, 0.0, 1.0, 1.0, 1.0, 0.7]).unwrap(),
            ModelSpec::from_vec(Family::B3, &[3.0, 1.0, 4.0, 1.0, 0.0, 0.6]).unwrap(),
            ModelSpec::from_vec(Family::MarSchlather, &[2.0, 1.5, 1.0, 0.0, 0.3]).unwrap(),
        ]
    }

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn weights_policies() {
        assert_eq!(Weights::Equal.weight(3.0, 4.0), 1.0);
        let c = Weights::Cutoff { r: 2.0, q: 3.0 };
        assert_eq!(c.weight(2.0, 0.0), 1.0);
        assert_eq!(c.weight(2.5, 0.0), 0.0);
        assert_eq!(c.weight(0.0, 4.0), 0.0);
        assert!((Weights::Exponential { c: 0.5 }.weight(1.0, 1.0) - (-1.0f64).exp()).abs() < 1e-15);
        assert!((Weights::Gaussian { c: 0.5 }.weight(1.0, 1.0) - (-1.0f64).exp()).abs() < 1e-15);
        assert!((Weights::Power { c: 2.0 }.weight(1.0, 1.0) - 0.25).abs() < 1e-15);
        assert!(Weights::Power { c: -1.0 }.validate().is_err());
        let json = serde_json::to_string(&c).unwrap();
        assert_eq!(json, r#"{"policy":"cutoff","r":2.0,"q":3.0}"#);
    }

    #[test]
    fn aic_arithmetic() {
        let a = aic_nls(1e-3, 1e-3, 10, 10, 2, 2).unwrap();
        let expect = 2.0 * (10.0 * (1e-4f64).ln() + 6.0);
        assert!((a.aic - expect).abs() < 1e-12);
        assert!((a.aicc - a.aic - 6.0).abs() < 1e-12);
        let half = aic_nls(5e-4, 1e-3, 10, 10, 2, 2).unwrap();
        assert!(half.aic < a.aic);
        assert_eq!(aic_nls(1e-3, 1e-3, 10, 10, 2, 2).unwrap(), a);
        assert!(aic_nls(1e-3, 1e-3, 2, 10, 2, 2).is_err());
        assert!(aic_nls(1e-3, 1e-3, 10, 3, 2, 3).is_err());
    }

    #[test]
    fn zero_residual_recovery_both_schemes() {
        let p = plan(20, 40);
        for truth in truths() {
            let data = exact_estimates(&truth, &p);
            let f = truth.family();
            let truth_v = truth.to_vec();
            let s2 = fit_scheme2(f, &data, &FitOptions::default()).unwrap();
            assert!(s2.objective < 1e-12, "{f} scheme 2 objective {}", s2.objective);
            assert!(
                close(&s2.model.to_vec(), &truth_v, 1e-4),
                "{f} scheme 2 {:?}",
                s2.model.to_vec()
            );
            // Temporal-only data identify tau only up to a ridge, so Scheme 1
            // starts from the Scheme 2 answer, as in model selection.
            let opts = FitOptions {
                init: Some(s2.model.to_vec()),
                ..FitOptions::default()
            };
            let s1 = fit_scheme1(f, &data, &opts).unwrap();
            assert!(s1.objective < 1e-12, "{f} scheme 1 objective {}", s1.objective);
            assert!(
                close(&s1.model.to_vec(), &truth_v, 1e-4),
                "{f} scheme 1 {:?}",
                s1.model.to_vec()
            );
        }
    }

    #[test]
    fn scheme1_shift_direction_comes_from_the_start() {
        let truth = ModelSpec::from_vec(Family::B1, &[2.0, 1.2, 1.0, 0.0, 0.6]).unwrap();
        let data = exact_estimates(&truth, &plan(12, 30));
        let free = fit_scheme1(Family::B1, &data, &FitOptions::default())
            .unwrap()
            .model
            .to_vec();
        assert!(close(&free, &truth.to_vec(), 1e-4), "{free:?}");
        let opts = FitOptions {
            init: Some(vec![2.0, 1.2, 0.0, 0.4, 0.5]),
            ..FitOptions::default()
        };
        let turned = fit_scheme1(Family::B1, &data, &opts).unwrap().model.to_vec();
        assert!(close(&turned, &[2.0, 1.2, 0.0, 1.0, 0.6], 1e-4), "{turned:?}");
    }

    #[test]
    fn a1_scheme1_needs_no_start() {
        let truth = ModelSpec::from_vec(Family::A1, &[0.4, 1.5, 0.2, 1.0]).unwrap();
        let data = exact_estimates(&truth, &plan(15, 30));
        let s1 = fit_scheme1(Family::A1, &data, &FitOptions::default()).unwrap();
        assert!(close(&s1.model.to_vec(), &truth.to_vec(), 1e-4));
        assert!(s1.aic().is_ok());
        let s2 = fit_scheme2(Family::A1, &data, &FitOptions::default()).unwrap();
        assert!(s2.aic().is_err());
    }

    #[test]
    fn insufficient_lags() {
        let lags = LagSets::new(vec![crate::lattice::SpatialLag::from_sq(1).unwrap()], vec![1, 2]).unwrap();
        let p = LagPlan::new(GridSpec::new(6).unwrap(), 10, &lags).unwrap();
        let truth = ModelSpec::from_vec(Family::A1, &[0.4, 1.5, 0.2, 1.0]).unwrap();
        let data = exact_estimates(&truth, &p);
        assert!(matches!(
            fit_scheme1(Family::A1, &data, &FitOptions::default()),
            Err(Error::InsufficientLags { have: 1, need: 2 })
        ));
    }

    #[test]
    fn weight_scaling_leaves_minimizer_unchanged() {
        let truth = ModelSpec::from_vec(Family::A1, &[0.4, 1.5, 0.2, 1.0]).unwrap();
        let mut data = exact_estimates(&truth, &plan(12, 20));
        for (i, g) in data.spatial.iter_mut().enumerate() {
            g.estimate.value += 0.004 * ((i * 7 % 5) as f64 - 2.0);
        }
        let terms = scalar_terms(&data.spatial, &Weights::Exponential { c: 0.3 });
        let scaled: Vec<Term> = terms
            .iter()
            .map(|t| Term {
                weight: 17.0 * t.weight,
                ..*t
            })
            .collect();
        let solve = |terms: Vec<Term>| {
            Problem {
                family: Family::A1,
                block: Block::Spatial,
                fixed_spatial: &[],
                shift_direction: [1.0, 0.0],
                terms,
            }
            .solve(None, &NlsOptions::default())
            .unwrap()
            .0
            .to_vec()
        };
        assert!(close(&solve(terms), &solve(scaled), 1e-6));
    }

    #[test]
    fn upward_shift_weakens_fitted_dependence() {
        let truth = ModelSpec::from_vec(Family::A1, &[0.4, 1.5, 0.2, 1.0]).unwrap();
        let p = plan(15, 30);
        let base = exact_estimates(&truth, &p);
        let mut up = base.clone();
        for g in up.spatial.iter_mut().chain(up.temporal.iter_mut()) {
            g.estimate.value += 0.01;
        }
        let a = fit_scheme1(Family::A1, &base, &FitOptions::default()).unwrap().model;
        let b = fit_scheme1(Family::A1, &up, &FitOptions::default()).unwrap().model;
        for g in base.spatial.iter().chain(&base.temporal) {
            let (h, l) = (g.estimate.h.distance(), g.estimate.lprime as f64);
            assert!(b.theta_iso(h, l) > a.theta_iso(h, l), "lag ({h}, {l})");
        }
    }

    #[test]
    fn select_prefers_the_generating_family() {
        let truth = ModelSpec::from_vec(Family::A1, &[0.4, 1.5, 0.2, 1.0]).unwrap();
        let mut data = exact_estimates(&truth, &plan(16, 30));
        for (i, g) in data.spatial.iter_mut().chain(data.temporal.iter_mut()).enumerate() {
            g.estimate.value += 1e-4 * (((i * 37) % 11) as f64 - 5.0) / 5.0;
        }
        let r = select_model(&[Family::B2, Family::A1], &data, &FitOptions::default()).unwrap();
        assert_eq!(r.selected, Family::A1);
        let single = select_model(&[Family::A1], &data, &FitOptions::default()).unwrap();
        assert_eq!(single.selected, Family::A1);
        assert!(select_model(&[], &data, &FitOptions::default()).is_err());
    }

    #[test]
    fn fitted_points_reproduce_exact_values() {
        let truth = ModelSpec::from_vec(Family::B2, &[1.0, 0.3, 2.0, 1.0, -1.0, 0.6]).unwrap();
        let data = exact_estimates(&truth, &plan(10, 20));
        for pt in fitted_points(&truth, &data.joint) {
            assert!((pt.empirical - pt.fitted).abs() < 1e-15);
        }
    }

    #[test]
    fn fit_result_json_round_trip() {
        let truth = ModelSpec::from_vec(Family::A1, &[0.4, 1.5, 0.2, 1.0]).unwrap();
        let data = exact_estimates(&truth, &plan(10, 20));
        let r = fit_scheme1(Family::A1, &data, &FitOptions::default()).unwrap();
        let s = serde_json::to_string(&r).unwrap();
        assert!(s.contains(r#""scheme":"1""#));
        let back: FitResult = serde_json::from_str(&s).unwrap();
        assert_eq!(back.model.family(), Family::A1);
    }
}
