//! Bound-constrained derivative-free minimization.
//!
//! Each parameter lives in an unconstrained coordinate `u`:
//! `x = lo + exp(u)` for a lower bound, a scaled logistic for an interval,
//! and `x = u` when free. Nelder-Mead runs in `u`. A fixed set of starting
//! points (the caller's initial value, then a Latin hypercube over the
//! caller's start box sorted lexicographically) is tried and the best result
//! kept. Values within `1e-9` relative of the best, or within `1e-14` of the
//! median objective value at the starting points, are ties and go to the
//! earliest start.

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::simulate::replicate_rng;

/// Feasible set of one parameter.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Bound {
    Free,
    /// `x > lo`.
    Lower(f64),
    /// `lo < x < hi`.
    Interval(f64, f64),
}

impl Bound {
    pub const POSITIVE: Bound = Bound::Lower(0.0);

    pub fn to_internal(&self, x: f64) -> f64 {
        match *self {
            Bound::Free => x,
            Bound::Lower(lo) => (x - lo).max(f64::MIN_POSITIVE).ln(),
            Bound::Interval(lo, hi) => {
                let p = ((x - lo) / (hi - lo)).clamp(1e-15, 1.0 - 1e-15);
                (p / (1.0 - p)).ln()
            }
        }
    }

    pub fn to_external(&self, u: f64) -> f64 {
        match *self {
            Bound::Free => u,
            Bound::Lower(lo) => lo + u.exp(),
            Bound::Interval(lo, hi) => {
                let p = if u >= 0.0 {
                    1.0 / (1.0 + (-u).exp())
                } else {
                    u.exp() / (1.0 + u.exp())
                };
                lo + (hi - lo) * p
            }
        }
    }

    pub fn contains(&self, x: f64) -> bool {
        match *self {
            Bound::Free => x.is_finite(),
            Bound::Lower(lo) => x > lo && x.is_finite(),
            Bound::Interval(lo, hi) => x > lo && x < hi,
        }
    }
}

/// One parameter: its bound and the box multi-starts are drawn from.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamSpec {
    pub bound: Bound,
    pub start_lo: f64,
    pub start_hi: f64,
}

impl ParamSpec {
    pub fn new(bound: Bound, start_lo: f64, start_hi: f64) -> Self {
        Self {
            bound,
            start_lo,
            start_hi,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NlsOptions {
    pub max_iter: usize,
    /// Relative tolerance on the spread of simplex values.
    pub ftol: f64,
    /// Number of Latin-hypercube starts.
    pub starts: usize,
    pub seed: u64,
}

impl Default for NlsOptions {
    fn default() -> Self {
        Self {
            max_iter: 2000,
            ftol: 1e-10,
            starts: 8,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Index of the winning start (0 is the caller's initial value when given).
    pub start_index: usize,
    /// Number of starting points tried.
    pub starts_used: usize,
    /// Best objective value after each iteration of the winning run.
    pub trace: Vec<f64>,
}

const ABS_FTOL: f64 = 1e-24;
const XTOL: f64 = 1e-11;

struct RunResult {
    initial: f64,
    u: Vec<f64>,
    value: f64,
    iterations: usize,
    converged: bool,
    trace: Vec<f64>,
}

fn nelder_mead(f: &dyn Fn(&[f64]) -> f64, u0: &[f64], opts: &NlsOptions) -> RunResult {
    let d = u0.len();
    let eval = |u: &[f64]| {
        let v = f(u);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };
    let mut simplex: Vec<Vec<f64>> = vec![u0.to_vec()];
    for i in 0..d {
        let mut p = u0.to_vec();
        p[i] += 0.25 * u0[i].abs().max(1.0);
        simplex.push(p);
    }
    let mut values: Vec<f64> = simplex.iter().map(|p| eval(p)).collect();
    let initial = values[0];
    let mut trace = Vec::new();
    let mut converged = false;
    let mut it = 0;
    while it < opts.max_iter {
        let mut order: Vec<usize> = (0..=d).collect();
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        simplex = order.iter().map(|&i| simplex[i].clone()).collect();
        values = order.iter().map(|&i| values[i]).collect();
        let (best, worst) = (values[0], values[d]);
        let diameter = simplex[1..]
            .iter()
            .map(|p| {
                p.iter()
                    .zip(&simplex[0])
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0, f64::max)
            })
            .fold(0.0, f64::max);
        if worst - best <= opts.ftol * best.abs() + ABS_FTOL
            || diameter <= XTOL * (1.0 + simplex[0].iter().fold(0.0f64, |m, v| m.max(v.abs())))
        {
            converged = true;
            break;
        }
        it += 1;
        let centroid: Vec<f64> = (0..d)
            .map(|j| simplex[..d].iter().map(|p| p[j]).sum::<f64>() / d as f64)
            .collect();
        let along = |t: f64| -> Vec<f64> { centroid.iter().zip(&simplex[d]).map(|(c, w)| c + t * (w - c)).collect() };
        let xr = along(-1.0);
        let fr = eval(&xr);
        if fr < values[0] {
            let xe = along(-2.0);
            let fe = eval(&xe);
            if fe < fr {
                simplex[d] = xe;
                values[d] = fe;
            } else {
                simplex[d] = xr;
                values[d] = fr;
            }
        } else if fr < values[d - 1] {
            simplex[d] = xr;
            values[d] = fr;
        } else {
            let (xc, fc) = if fr < values[d] {
                let xc = along(-0.5);
                let fc = eval(&xc);
                (xc, fc)
            } else {
                let xc = along(0.5);
                let fc = eval(&xc);
                (xc, fc)
            };
            if fc < values[d].min(fr) {
                simplex[d] = xc;
                values[d] = fc;
            } else {
                for i in 1..=d {
                    let p: Vec<f64> = simplex[i]
                        .iter()
                        .zip(&simplex[0])
                        .map(|(a, b)| b + 0.5 * (a - b))
                        .collect();
                    values[i] = eval(&p);
                    simplex[i] = p;
                }
            }
        }
        trace.push(values.iter().copied().fold(f64::INFINITY, f64::min));
    }
    let bi = (0..=d).min_by(|&a, &b| values[a].total_cmp(&values[b])).unwrap();
    RunResult {
        initial,
        u: simplex[bi].clone(),
        value: values[bi],
        iterations: it,
        converged,
        trace,
    }
}

// Nelder-Mead followed by one restart from its answer, which guards against
// a collapsed simplex stopping short of the minimum.
fn polished_run(f: &dyn Fn(&[f64]) -> f64, u0: &[f64], opts: &NlsOptions) -> RunResult {
    let first = nelder_mead(f, u0, opts);
    // The restart begins at the best vertex, so its value cannot be worse.
    let mut second = nelder_mead(f, &first.u, opts);
    let mut trace = first.trace;
    trace.extend(second.trace.iter().map(|v| v.min(first.value)));
    second.trace = trace;
    second.iterations += first.iterations;
    second.initial = first.initial;
    second
}

/// Latin-hypercube points in the start box, sorted lexicographically.
pub fn latin_hypercube_starts(params: &[ParamSpec], count: usize, seed: u64) -> Vec<Vec<f64>> {
    if count == 0 {
        return Vec::new();
    }
    let mut rng = replicate_rng(seed, u64::MAX);
    let columns: Vec<Vec<f64>> = params
        .iter()
        .map(|p| {
            let mut strata: Vec<usize> = (0..count).collect();
            strata.shuffle(&mut rng);
            strata
                .into_iter()
                .map(|k| {
                    let frac = (k as f64 + rng.random::<f64>()) / count as f64;
                    let x = p.start_lo + (p.start_hi - p.start_lo) * frac;
                    // Keep draws strictly feasible.
                    let u = p.bound.to_internal(x);
                    p.bound.to_external(u)
                })
                .collect()
        })
        .collect();
    let mut points: Vec<Vec<f64>> = (0..count).map(|i| columns.iter().map(|c| c[i]).collect()).collect();
    points.sort_by(|a, b| {
        a.iter()
            .zip(b)
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    points
}

/// Minimizes `objective` over the box described by `params`.
///
/// Returns [`Error::NoConvergence`] only if no start converged.
pub fn nls_minimize<F>(objective: F, params: &[ParamSpec], init: Option<&[f64]>, opts: &NlsOptions) -> Result<Minimum>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    if params.is_empty() {
        return Err(Error::InvalidArgs("no parameters to optimize".into()));
    }
    let mut starts = Vec::new();
    if let Some(x0) = init {
        if x0.len() != params.len() {
            return Err(Error::InvalidArgs(format!(
                "initial value has {} entries, expected {}",
                x0.len(),
                params.len()
            )));
        }
        starts.push(x0.to_vec());
    }
    starts.extend(latin_hypercube_starts(params, opts.starts, opts.seed));
    if starts.is_empty() {
        return Err(Error::InvalidArgs("no starting points".into()));
    }
    let internal = |u: &[f64]| -> Vec<f64> { params.iter().zip(u).map(|(p, &v)| p.bound.to_external(v)).collect() };
    let g = |u: &[f64]| objective(&internal(u));
    let runs: Vec<RunResult> = starts
        .par_iter()
        .map(|x0| {
            let u0: Vec<f64> = params.iter().zip(x0).map(|(p, &x)| p.bound.to_internal(x)).collect();
            polished_run(&g, &u0, opts)
        })
        .collect();
    let best_value = runs.iter().map(|r| r.value).fold(f64::INFINITY, f64::min);
    if !best_value.is_finite() {
        return Err(Error::NoConvergence("objective is not finite at any start".into()));
    }
    if !runs.iter().any(|r| r.converged) {
        return Err(Error::NoConvergence(format!(
            "no start converged within {} iterations (best value {best_value:e})",
            opts.max_iter
        )));
    }
    // Values that agree to 1e-9 relative, or to 1e-14 of the objective's
    // typical size at the starts, count as ties.
    let mut initial: Vec<f64> = runs.iter().map(|r| r.initial).filter(|v| v.is_finite()).collect();
    initial.sort_by(f64::total_cmp);
    let scale = initial.get(initial.len() / 2).copied().unwrap_or(0.0).abs();
    let tol = 1e-9 * best_value.abs() + 1e-14 * scale + ABS_FTOL;
    let (idx, run) = runs
        .iter()
        .enumerate()
        .find(|(_, r)| r.value <= best_value + tol)
        .unwrap();
    Ok(Minimum {
        x: internal(&run.u),
        value: run.value,
        iterations: run.iterations,
        converged: run.converged,
        start_index: idx,
        starts_used: starts.len(),
        trace: run.trace.clone(),
    })
}
