//! Samplers for the supported max-stable fields on `n x n x T` grids.
//!
//! * Brown-Resnick (`A1`) uses the exact extremal-functions algorithm. Its
//!   log-Gaussian spectral process is a sum of independent spatial and
//!   temporal intrinsic fields, so each draw needs one factorization of size
//!   `n^2` and one of size `T` rather than one of size `n^2 T`.
//! * Schlather (`A2`) uses the truncated spectral construction with a
//!   Kronecker-factored Gaussian field.
//! * Max-autoregressive models run the recursion
//!   `X(s, t) = max(delta X(s - tau, t - 1), (1 - delta) H(s, t))` on an
//!   enlarged window, with Smith, Brown-Resnick or Schlather innovations `H`.
//!
//! Every sampler is deterministic given its RNG. Replicate `i` of a run with
//! seed `s` uses ChaCha8 seeded with `s` on stream `i`.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Exp1, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{Margins, SpaceTimeField};
use crate::lattice::GridSpec;
use crate::models::{BrParams, Innovation, MarParams, ModelSpec, SepSchlatherParams};

/// Tuning knobs shared by all samplers.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    pub seed: u64,
    /// Max-autoregressive unroll depth `J`; derived from `truncation_tol` when unset.
    pub truncation: Option<usize>,
    /// Target for `delta^(J+1)` when `truncation` is unset.
    pub truncation_tol: f64,
    /// Bound on the Schlather spectral process, in standard deviations.
    pub spectral_bound: f64,
    /// Initial diagonal regularization for Cholesky factorizations.
    pub jitter: f64,
    /// Largest dense factorization allowed.
    pub cholesky_budget: usize,
    /// Smith storm centers are drawn this many standard deviations beyond the window.
    pub storm_buffer: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            truncation: None,
            truncation_tol: 1e-6,
            spectral_bound: 5.0,
            jitter: 0.0,
            cholesky_budget: 4000,
            storm_buffer: 6.0,
        }
    }
}

impl SimConfig {
    pub fn with_seed(seed: u64) -> Self {
        Self {
            seed,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgs(m));
        if self.truncation == Some(0) {
            return bad("truncation depth J must be >= 1".into());
        }
        if !(self.truncation_tol > 0.0 && self.truncation_tol < 1.0) {
            return bad(format!(
                "truncation_tol must lie in (0, 1), got {}",
                self.truncation_tol
            ));
        }
        if !(self.jitter >= 0.0 && self.jitter.is_finite()) {
            return bad(format!("jitter must be >= 0, got {}", self.jitter));
        }
        if !(self.spectral_bound > 0.0 && self.storm_buffer > 0.0) {
            return bad("spectral_bound and storm_buffer must be positive".into());
        }
        Ok(())
    }

    /// `J = ceil(ln tol / ln delta) - 1`, at least 1, unless fixed explicitly.
    pub fn truncation_for(&self, delta: f64) -> usize {
        self.truncation.unwrap_or_else(|| {
            let j = (self.truncation_tol.ln() / delta.ln()).ceil() - 1.0;
            (j.max(1.0)) as usize
        })
    }
}

/// RNG for replicate `index` of a run seeded with `seed`.
pub fn replicate_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Draws `x = L z` for a fixed covariance factor `L`.
#[derive(Clone, Debug)]
pub struct GaussianSampler {
    dim: usize,
    // Row i of the lower factor, entries 0..=i, rows concatenated.
    packed: Vec<f64>,
}

impl GaussianSampler {
    /// Factorizes `cov`, adding diagonal jitter in decades when the plain
    /// factorization fails.
    pub fn from_covariance(cov: DMatrix<f64>, initial_jitter: f64) -> Result<Self> {
        let dim = cov.nrows();
        if dim == 0 {
            return Ok(Self {
                dim,
                packed: Vec::new(),
            });
        }
        let scale = (cov.trace() / dim as f64).abs().max(f64::MIN_POSITIVE);
        let mut schedule = vec![initial_jitter];
        schedule.extend(
            (0..=7)
                .map(|k| scale * 1e-13 * 10f64.powi(k))
                .filter(|&j| j > initial_jitter),
        );
        let mut last = initial_jitter;
        for jitter in schedule {
            last = jitter;
            let mut m = cov.clone();
            for i in 0..dim {
                m[(i, i)] += jitter;
            }
            if let Some(ch) = nalgebra::Cholesky::new(m) {
                let l = ch.l();
                let mut packed = Vec::with_capacity(dim * (dim + 1) / 2);
                for i in 0..dim {
                    for j in 0..=i {
                        packed.push(l[(i, j)]);
                    }
                }
                return Ok(Self { dim, packed });
            }
        }
        Err(Error::NotPsd { jitter: last })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Fills `out` (length `dim`) with one draw; `z` is scratch of the same length.
    pub fn sample_into<R: Rng + ?Sized>(&self, rng: &mut R, z: &mut [f64], out: &mut [f64]) {
        for zi in z.iter_mut() {
            *zi = rng.sample(StandardNormal);
        }
        let mut start = 0;
        for (i, o) in out.iter_mut().enumerate() {
            let row = &self.packed[start..start + i + 1];
            *o = row.iter().zip(&z[..=i]).map(|(a, b)| a * b).sum();
            start += i + 1;
        }
    }
}

/// Centered Gaussian field with stationary increments anchored at its first
/// site: `Cov(p, q) = g(p - o) + g(q - o) - g(p - q)` where `o` is the anchor.
#[derive(Clone, Debug)]
struct IntrinsicSampler {
    inner: GaussianSampler,
}

impl IntrinsicSampler {
    fn new(sites: usize, semivariogram_between: impl Fn(usize, usize) -> f64, jitter: f64) -> Result<Self> {
        let m = sites - 1;
        let cov = DMatrix::from_fn(m, m, |i, j| {
            semivariogram_between(0, i + 1) + semivariogram_between(0, j + 1) - semivariogram_between(i + 1, j + 1)
        });
        Ok(Self {
            inner: GaussianSampler::from_covariance(cov, jitter)?,
        })
    }

    fn sample_into<R: Rng + ?Sized>(&self, rng: &mut R, z: &mut [f64], out: &mut [f64]) {
        out[0] = 0.0;
        self.inner.sample_into(rng, &mut z[1..], &mut out[1..]);
    }
}

/// Draws a centered Gaussian vector at `sites` (space-time points) with
/// `Cov(p, q) = g(p) + g(q) - g(p - q)`, so that `Var(e(p)) = 2 g(p)` and
/// `e(0) = 0`.
pub fn simulate_gaussian_field(
    semivariogram: impl Fn([f64; 3]) -> f64,
    sites: &[[f64; 3]],
    seed: u64,
) -> Result<Vec<f64>> {
    let mut rng = replicate_rng(seed, 0);
    let sampler = gaussian_field_sampler(&semivariogram, sites, 0.0)?;
    Ok(sampler.draw(&mut rng))
}

/// Reusable sampler behind [`simulate_gaussian_field`].
pub struct GaussianFieldSampler {
    free: Vec<usize>,
    len: usize,
    inner: GaussianSampler,
}

impl GaussianFieldSampler {
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let mut z = vec![0.0; self.free.len()];
        let mut x = vec![0.0; self.free.len()];
        self.inner.sample_into(rng, &mut z, &mut x);
        let mut out = vec![0.0; self.len];
        for (&i, v) in self.free.iter().zip(x) {
            out[i] = v;
        }
        out
    }
}

pub fn gaussian_field_sampler(
    semivariogram: impl Fn([f64; 3]) -> f64,
    sites: &[[f64; 3]],
    jitter: f64,
) -> Result<GaussianFieldSampler> {
    let free: Vec<usize> = (0..sites.len()).filter(|&i| sites[i] != [0.0; 3]).collect();
    let sub = |a: [f64; 3], b: [f64; 3]| [a[0] - b[0], a[1] - b[1], a[2] - b[2]];
    let cov = DMatrix::from_fn(free.len(), free.len(), |i, j| {
        let (p, q) = (sites[free[i]], sites[free[j]]);
        semivariogram(p) + semivariogram(q) - semivariogram(sub(p, q))
    });
    Ok(GaussianFieldSampler {
        len: sites.len(),
        inner: GaussianSampler::from_covariance(cov, jitter)?,
        free,
    })
}

fn check_budget(sites: usize, cfg: &SimConfig) -> Result<()> {
    if sites > cfg.cholesky_budget {
        Err(Error::BudgetExceeded {
            sites,
            budget: cfg.cholesky_budget,
        })
    } else {
        Ok(())
    }
}

/// Exact Brown-Resnick sampler on a `w1 x w2 x t_len` box whose spectral
/// Gaussian is `W_s(s) + W_t(t)` with independent intrinsic parts.
struct SeparableBr {
    w1: usize,
    w2: usize,
    t_len: usize,
    space: IntrinsicSampler,
    time: Option<IntrinsicSampler>,
    // Semivariogram of each part by absolute offset: space[|dy| * w1 + |dx|].
    space_gamma: Vec<f64>,
    time_gamma: Vec<f64>,
}

impl SeparableBr {
    fn new(
        w1: usize,
        w2: usize,
        t_len: usize,
        space_sv: impl Fn(f64) -> f64,
        time_sv: impl Fn(f64) -> f64,
        cfg: &SimConfig,
    ) -> Result<Self> {
        check_budget(w1 * w2, cfg)?;
        check_budget(t_len, cfg)?;
        let space_gamma: Vec<f64> = (0..w1 * w2)
            .map(|i| space_sv(((i % w1) as f64).hypot((i / w1) as f64)))
            .collect();
        let time_gamma: Vec<f64> = (0..t_len).map(|l| time_sv(l as f64)).collect();
        let sg = |a: usize, b: usize| {
            let dx = (a % w1).abs_diff(b % w1);
            let dy = (a / w1).abs_diff(b / w1);
            space_gamma[dy * w1 + dx]
        };
        let space = IntrinsicSampler::new(w1 * w2, sg, cfg.jitter)?;
        let time = if t_len > 1 {
            Some(IntrinsicSampler::new(
                t_len,
                |a, b| time_gamma[a.abs_diff(b)],
                cfg.jitter,
            )?)
        } else {
            None
        };
        Ok(Self {
            w1,
            w2,
            t_len,
            space,
            time,
            space_gamma,
            time_gamma,
        })
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let ns = self.w1 * self.w2;
        let total = ns * self.t_len;
        let mut log_z = vec![f64::NEG_INFINITY; total];
        let mut ws = vec![0.0; ns];
        let mut wt = vec![0.0; self.t_len];
        let mut zs = vec![0.0; ns];
        let mut zt = vec![0.0; self.t_len];
        let mut a = vec![0.0; ns];
        let mut b = vec![0.0; self.t_len];
        for k in 0..total {
            let (sk, tk) = (k % ns, k / ns);
            let (xk, yk) = (sk % self.w1, sk / self.w1);
            let mut arrival: f64 = rng.sample(Exp1);
            while -arrival.ln() > log_z[k] {
                self.space.sample_into(rng, &mut zs, &mut ws);
                if let Some(time) = &self.time {
                    time.sample_into(rng, &mut zt, &mut wt);
                }
                let shift = ws[sk] + wt[tk] + arrival.ln();
                for (s, ai) in a.iter_mut().enumerate() {
                    let dx = (s % self.w1).abs_diff(xk);
                    let dy = (s / self.w1).abs_diff(yk);
                    *ai = ws[s] - self.space_gamma[dy * self.w1 + dx] - shift;
                }
                for (t, bi) in b.iter_mut().enumerate() {
                    *bi = wt[t] - self.time_gamma[t.abs_diff(tk)];
                }
                let valid = (0..k).all(|j| a[j % ns] + b[j / ns] < log_z[j]);
                if valid {
                    for (j, lz) in log_z.iter_mut().enumerate().skip(k) {
                        let v = a[j % ns] + b[j / ns];
                        if v > *lz {
                            *lz = v;
                        }
                    }
                }
                arrival += rng.sample::<f64, _>(Exp1);
            }
        }
        log_z.into_iter().map(f64::exp).collect()
    }
}

/// Smith storm-profile sampler on a `w1 x w2` window.
struct SmithSampler {
    w1: usize,
    w2: usize,
    // Inverse covariance entries and the Gaussian density's peak.
    inv: [f64; 3],
    peak: f64,
    // Half-widths of the storm footprint and the squared Mahalanobis cutoff.
    reach: [f64; 2],
    cutoff_sq: f64,
}

impl SmithSampler {
    fn new(w1: usize, w2: usize, s11: f64, s12: f64, s22: f64, cfg: &SimConfig) -> Self {
        let det = s11 * s22 - s12 * s12;
        let b = cfg.storm_buffer;
        Self {
            w1,
            w2,
            inv: [s22 / det, -s12 / det, s11 / det],
            peak: 1.0 / (2.0 * std::f64::consts::PI * det.sqrt()),
            reach: [b * s11.sqrt(), b * s22.sqrt()],
            cutoff_sq: b * b,
        }
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let (w1, w2) = (self.w1, self.w2);
        let lo = [-self.reach[0], -self.reach[1]];
        let span = [
            (w1 - 1) as f64 + 2.0 * self.reach[0],
            (w2 - 1) as f64 + 2.0 * self.reach[1],
        ];
        let area = span[0] * span[1];
        let mut z = vec![0.0f64; w1 * w2];
        let mut floor = 0.0f64;
        let mut arrival = 0.0f64;
        let mut storms = 0usize;
        loop {
            arrival += rng.sample::<f64, _>(Exp1);
            let xi = area / arrival;
            if xi * self.peak < floor {
                // The stored floor may be stale (too low); refresh before stopping.
                floor = z.iter().copied().fold(f64::INFINITY, f64::min);
                if xi * self.peak < floor {
                    break;
                }
            }
            let cx = lo[0] + span[0] * rng.random::<f64>();
            let cy = lo[1] + span[1] * rng.random::<f64>();
            let x0 = (cx - self.reach[0]).ceil().max(0.0) as usize;
            let x1 = (cx + self.reach[0]).floor().min((w1 - 1) as f64);
            let y0 = (cy - self.reach[1]).ceil().max(0.0) as usize;
            let y1 = (cy + self.reach[1]).floor().min((w2 - 1) as f64);
            if x1 >= 0.0 && y1 >= 0.0 {
                for y in y0..=y1 as usize {
                    let dy = y as f64 - cy;
                    for x in x0..=x1 as usize {
                        let dx = x as f64 - cx;
                        let q = self.inv[0] * dx * dx + 2.0 * self.inv[1] * dx * dy + self.inv[2] * dy * dy;
                        if q <= self.cutoff_sq {
                            let v = xi * self.peak * (-0.5 * q).exp();
                            let cell = &mut z[y * w1 + x];
                            if v > *cell {
                                *cell = v;
                            }
                        }
                    }
                }
            }
            storms += 1;
            if storms.is_multiple_of(64) {
                floor = z.iter().copied().fold(f64::INFINITY, f64::min);
            }
        }
        z
    }
}

/// Schlather sampler: `max_i (sqrt(2 pi) / Gamma_i) max(W_i, 0)` with
/// standard Gaussian `W_i`.
struct SchlatherSampler {
    gauss: GaussianLayout,
    bound: f64,
}

enum GaussianLayout {
    Dense(GaussianSampler),
    // Space factor (n^2) and time factor (T); field index t * n^2 + s.
    Kronecker { space: DMatrix<f64>, time: DMatrix<f64> },
}

impl GaussianLayout {
    fn len(&self) -> usize {
        match self {
            GaussianLayout::Dense(g) => g.dim(),
            GaussianLayout::Kronecker { space, time } => space.nrows() * time.nrows(),
        }
    }

    fn sample_into<R: Rng + ?Sized>(&self, rng: &mut R, z: &mut [f64], out: &mut [f64]) {
        match self {
            GaussianLayout::Dense(g) => g.sample_into(rng, z, out),
            GaussianLayout::Kronecker { space, time } => {
                let (ns, nt) = (space.nrows(), time.nrows());
                let zm = DMatrix::from_fn(ns, nt, |_, _| rng.sample::<f64, _>(StandardNormal));
                let w = space * zm * time.transpose();
                for t in 0..nt {
                    for s in 0..ns {
                        out[t * ns + s] = w[(s, t)];
                    }
                }
            }
        }
    }
}

fn lower_factor(cov: DMatrix<f64>, jitter: f64) -> Result<DMatrix<f64>> {
    let g = GaussianSampler::from_covariance(cov, jitter)?;
    let n = g.dim();
    let mut l = DMatrix::zeros(n, n);
    let mut start = 0;
    for i in 0..n {
        for j in 0..=i {
            l[(i, j)] = g.packed[start + j];
        }
        start += i + 1;
    }
    Ok(l)
}

impl SchlatherSampler {
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let m = self.gauss.len();
        let mut z = vec![0.0; m];
        let mut scratch = vec![0.0; m];
        let mut w = vec![0.0; m];
        let scale = (2.0 * std::f64::consts::PI).sqrt();
        let mut arrival = 0.0f64;
        let mut floor = 0.0f64;
        loop {
            arrival += rng.sample::<f64, _>(Exp1);
            let xi = scale / arrival;
            if xi * self.bound < floor {
                break;
            }
            self.gauss.sample_into(rng, &mut scratch, &mut w);
            let mut lowest = f64::INFINITY;
            for (zi, &wi) in z.iter_mut().zip(&w) {
                let v = xi * wi.max(0.0);
                if v > *zi {
                    *zi = v;
                }
                lowest = lowest.min(*zi);
            }
            floor = lowest;
        }
        z
    }
}

/// Spatial max-stable field on a `w1 x w2` window with unit Fréchet margins.
pub struct SpatialSampler {
    kind: SpatialKind,
}

enum SpatialKind {
    Smith(SmithSampler),
    BrownResnick(SeparableBr),
    Schlather(SchlatherSampler),
}

impl SpatialSampler {
    pub fn new(innovation: &Innovation, w1: usize, w2: usize, cfg: &SimConfig) -> Result<Self> {
        innovation.validate()?;
        cfg.validate()?;
        if w1 == 0 || w2 == 0 {
            return Err(Error::InvalidGrid("empty simulation window".into()));
        }
        let kind = match *innovation {
            Innovation::Smith {
                sigma11,
                sigma12,
                sigma22,
            } => SpatialKind::Smith(SmithSampler::new(w1, w2, sigma11, sigma12, sigma22, cfg)),
            Innovation::BrownResnick { phi, kappa } => {
                let sv = move |h: f64| if h == 0.0 { 0.0 } else { (h / phi).powf(kappa) };
                SpatialKind::BrownResnick(SeparableBr::new(w1, w2, 1, sv, |_| 0.0, cfg)?)
            }
            Innovation::Schlather { .. } => {
                check_budget(w1 * w2, cfg)?;
                let cov = DMatrix::from_fn(w1 * w2, w1 * w2, |i, j| {
                    let dx = (i % w1) as f64 - (j % w1) as f64;
                    let dy = (i / w1) as f64 - (j / w1) as f64;
                    innovation.correlation([dx, dy]).unwrap()
                });
                SpatialKind::Schlather(SchlatherSampler {
                    gauss: GaussianLayout::Dense(GaussianSampler::from_covariance(cov, cfg.jitter)?),
                    bound: cfg.spectral_bound,
                })
            }
            Innovation::ExtremalT { .. } => {
                return Err(Error::Unsupported("extremal-t simulation".into()));
            }
        };
        Ok(Self { kind })
    }

    /// One draw, `x` fastest.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        match &self.kind {
            SpatialKind::Smith(s) => s.sample(rng),
            SpatialKind::BrownResnick(s) => s.sample(rng),
            SpatialKind::Schlather(s) => s.sample(rng),
        }
    }
}

/// One spatial innovation field on a `w1 x w2` window.
pub fn simulate_spatial_innovation(innovation: &Innovation, w1: usize, w2: usize, cfg: &SimConfig) -> Result<Vec<f64>> {
    let s = SpatialSampler::new(innovation, w1, w2, cfg)?;
    Ok(s.sample(&mut replicate_rng(cfg.seed, 0)))
}

/// Output of [`MarSampler::sample_detailed`]: the field plus the innovations
/// that produced it.
#[derive(Clone, Debug)]
pub struct MarDraw {
    pub field: SpaceTimeField,
    /// Innovations on the enlarged window, `x` fastest, then `y`, then slice.
    pub innovations: Vec<f64>,
    /// Window size per axis.
    pub window: [usize; 2],
    /// Window coordinate of output site 0 per axis.
    pub offset: [usize; 2],
    /// Unroll depth; window slice `J + t` is output time `t`.
    pub depth: usize,
}

pub struct MarSampler {
    n: usize,
    t_len: usize,
    delta: f64,
    shift: [i64; 2],
    depth: usize,
    window: [usize; 2],
    offset: [usize; 2],
    spatial: SpatialSampler,
}

impl MarSampler {
    pub fn new(m: &MarParams, grid: GridSpec, t_len: usize, cfg: &SimConfig) -> Result<Self> {
        m.validate()?;
        cfg.validate()?;
        if matches!(m.innovation, Innovation::ExtremalT { .. }) {
            return Err(Error::Unsupported("extremal-t simulation".into()));
        }
        if m.tau.iter().any(|t| t.fract() != 0.0) {
            return Err(Error::NonIntegerShift(m.tau[0], m.tau[1]));
        }
        if t_len == 0 {
            return Err(Error::InvalidArgs("T must be positive".into()));
        }
        let n = grid.n();
        let shift = [m.tau[0] as i64, m.tau[1] as i64];
        let depth = cfg.truncation_for(m.delta);
        let window = shift.map(|s| n + depth * s.unsigned_abs() as usize);
        let offset = shift.map(|s| depth * s.max(0) as usize);
        let spatial = SpatialSampler::new(&m.innovation, window[0], window[1], cfg)?;
        Ok(Self {
            n,
            t_len,
            delta: m.delta,
            shift,
            depth,
            window,
            offset,
            spatial,
        })
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> SpaceTimeField {
        self.run(rng, false).field
    }

    pub fn sample_detailed<R: Rng + ?Sized>(&self, rng: &mut R) -> MarDraw {
        self.run(rng, true)
    }

    fn run<R: Rng + ?Sized>(&self, rng: &mut R, keep: bool) -> MarDraw {
        let [w1, w2] = self.window;
        let slices = self.depth + self.t_len;
        let mut innovations = Vec::new();
        let mut prev: Vec<f64> = Vec::new();
        let mut out = Vec::with_capacity(self.n * self.n * self.t_len);
        let scale = 1.0 - self.delta;
        for i in 0..slices {
            let h = self.spatial.sample(rng);
            let mut cur: Vec<f64> = h.iter().map(|v| scale * v).collect();
            if i > 0 {
                for y in 0..w2 {
                    let py = y as i64 - self.shift[1];
                    if py < 0 || py >= w2 as i64 {
                        continue;
                    }
                    for x in 0..w1 {
                        let px = x as i64 - self.shift[0];
                        if px < 0 || px >= w1 as i64 {
                            continue;
                        }
                        let carried = self.delta * prev[py as usize * w1 + px as usize];
                        let cell = &mut cur[y * w1 + x];
                        if carried > *cell {
                            *cell = carried;
                        }
                    }
                }
            }
            if i >= self.depth {
                for y in 0..self.n {
                    let row = (y + self.offset[1]) * w1 + self.offset[0];
                    out.extend_from_slice(&cur[row..row + self.n]);
                }
            }
            if keep {
                innovations.extend_from_slice(&h);
            }
            prev = cur;
        }
        MarDraw {
            field: SpaceTimeField::new(self.n, self.t_len, out, Margins::Frechet)
                .expect("max-autoregressive output is positive"),
            innovations,
            window: self.window,
            offset: self.offset,
            depth: self.depth,
        }
    }
}

/// Max-autoregressive field with integer shift `tau`.
pub fn simulate_mar(m: &MarParams, grid: GridSpec, t_len: usize, cfg: &SimConfig) -> Result<SpaceTimeField> {
    Ok(MarSampler::new(m, grid, t_len, cfg)?.sample(&mut replicate_rng(cfg.seed, 0)))
}

/// Exact space-time Brown-Resnick field.
pub fn simulate_br(p: &BrParams, grid: GridSpec, t_len: usize, cfg: &SimConfig) -> Result<SpaceTimeField> {
    let s = Simulator::new(&ModelSpec::A1(*p), grid, t_len, cfg)?;
    Ok(s.replicate(0))
}

/// A prepared sampler for one model and geometry. Factorizations are done
/// once; replicates are independent and can run in parallel.
pub struct Simulator {
    n: usize,
    t_len: usize,
    seed: u64,
    kind: SimKind,
}

enum SimKind {
    Br(SeparableBr),
    Schlather(SchlatherSampler),
    Mar(MarSampler),
}

impl Simulator {
    pub fn new(model: &ModelSpec, grid: GridSpec, t_len: usize, cfg: &SimConfig) -> Result<Self> {
        model.validate()?;
        cfg.validate()?;
        if t_len == 0 {
            return Err(Error::InvalidArgs("T must be positive".into()));
        }
        let n = grid.n();
        let kind = match model {
            ModelSpec::A1(p) => {
                let p = *p;
                SimKind::Br(SeparableBr::new(
                    n,
                    n,
                    t_len,
                    move |h| p.spatial_semivariogram(h),
                    move |l| p.temporal_semivariogram(l),
                    cfg,
                )?)
            }
            ModelSpec::A2(p) => SimKind::Schlather(separable_schlather(p, n, t_len, cfg)?),
            ModelSpec::Mar(m) => SimKind::Mar(MarSampler::new(m, grid, t_len, cfg)?),
        };
        Ok(Self {
            n,
            t_len,
            seed: cfg.seed,
            kind,
        })
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> SpaceTimeField {
        let values = match &self.kind {
            SimKind::Br(s) => s.sample(rng),
            SimKind::Schlather(s) => s.sample(rng),
            SimKind::Mar(s) => return s.sample(rng),
        };
        SpaceTimeField::new(self.n, self.t_len, values, Margins::Frechet).expect("sampler output is positive")
    }

    /// Replicate `index` on its own RNG stream.
    pub fn replicate(&self, index: u64) -> SpaceTimeField {
        self.sample(&mut replicate_rng(self.seed, index))
    }

    /// Replicates `0..count`, in parallel.
    pub fn replicates(&self, count: usize) -> Vec<SpaceTimeField> {
        (0..count as u64).into_par_iter().map(|i| self.replicate(i)).collect()
    }
}

fn separable_schlather(p: &SepSchlatherParams, n: usize, t_len: usize, cfg: &SimConfig) -> Result<SchlatherSampler> {
    check_budget(n * n, cfg)?;
    check_budget(t_len, cfg)?;
    let space = DMatrix::from_fn(n * n, n * n, |i, j| {
        let dx = (i % n) as f64 - (j % n) as f64;
        let dy = (i / n) as f64 - (j / n) as f64;
        p.correlation(dx.hypot(dy), 0.0)
    });
    let time = DMatrix::from_fn(t_len, t_len, |i, j| p.correlation(0.0, i as f64 - j as f64));
    Ok(SchlatherSampler {
        gauss: GaussianLayout::Kronecker {
            space: lower_factor(space, cfg.jitter)?,
            time: lower_factor(time, cfg.jitter)?,
        },
        bound: cfg.spectral_bound,
    })
}

/// Simulates one field of `model`, replicate 0 of `cfg.seed`.
pub fn simulate(model: &ModelSpec, grid: GridSpec, t_len: usize, cfg: &SimConfig) -> Result<SpaceTimeField> {
    Ok(Simulator::new(model, grid, t_len, cfg)?.replicate(0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::SpatialLag;
    use crate::madogram::{empirical_spatial_fmadogram, empirical_st_fmadogram, empirical_temporal_fmadogram};
    use crate::models::{theta_from_fmadogram, Family};

    fn grid(n: usize) -> GridSpec {
        GridSpec::new(n).unwrap()
    }

    fn lag(sq: u64) -> SpatialLag {
        SpatialLag::from_sq(sq).unwrap()
    }

    // Kolmogorov-Smirnov distance of `xs` against the unit Fréchet law.
    fn ks_frechet(xs: &mut [f64]) -> f64 {
        xs.sort_by(f64::total_cmp);
        let n = xs.len() as f64;
        xs.iter()
            .enumerate()
            .map(|(i, &x)| {
                let f = (-1.0 / x).exp();
                (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
            })
            .fold(0.0, f64::max)
    }

    // Asymptotic 1% critical value.
    fn ks_critical(n: usize) -> f64 {
        1.628 / (n as f64).sqrt()
    }

    #[test]
    fn gaussian_field_anchor_and_variance() {
        let gamma = |p: [f64; 3]| 0.8 * p[0].hypot(p[1]).powf(1.5) + 0.4 * p[2].abs();
        let sites = [[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 2.0, 1.0], [3.0, 1.0, 2.0]];
        let s = gaussian_field_sampler(gamma, &sites, 0.0).unwrap();
        let reps = 10_000;
        let mut rng = replicate_rng(5, 0);
        let mut sum_sq = [0.0; 4];
        let mut inc_sq = 0.0;
        for _ in 0..reps {
            let x = s.draw(&mut rng);
            assert_eq!(x[0], 0.0);
            for i in 0..4 {
                sum_sq[i] += x[i] * x[i];
            }
            inc_sq += (x[3] - x[2]).powi(2);
        }
        for i in 1..4 {
            let var = sum_sq[i] / reps as f64;
            let expect = 2.0 * gamma(sites[i]);
            // sd of a sample variance is about expect * sqrt(2 / reps).
            let sd = expect * (2.0 / reps as f64).sqrt();
            assert!((var - expect).abs() < 3.0 * sd, "site {i}: {var} vs {expect}");
        }
        let semi = 0.5 * inc_sq / reps as f64;
        let expect = gamma([3.0, -1.0, 1.0]);
        assert!((semi - expect).abs() < 3.0 * expect * (2.0 / reps as f64).sqrt());
        let single = simulate_gaussian_field(gamma, &[[0.0; 3]], 1).unwrap();
        assert_eq!(single, vec![0.0]);
    }

    #[test]
    fn cholesky_escalates_jitter_and_reports_failure() {
        // Rank-one PSD matrix needs jitter; an indefinite one fails.
        let psd = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        assert!(GaussianSampler::from_covariance(psd, 0.0).is_ok());
        let bad = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(matches!(
            GaussianSampler::from_covariance(bad, 0.0),
            Err(Error::NotPsd { .. })
        ));
    }

    #[test]
    fn budget_is_enforced() {
        let cfg = SimConfig {
            cholesky_budget: 50,
            ..SimConfig::default()
        };
        let m = ModelSpec::A1(BrParams::new(0.4, 1.5, 0.2, 1.0).unwrap());
        assert!(matches!(
            Simulator::new(&m, grid(8), 3, &cfg),
            Err(Error::BudgetExceeded { .. })
        ));
    }

    #[test]
    fn config_validation_and_truncation_depth() {
        assert!(SimConfig {
            truncation: Some(0),
            ..SimConfig::default()
        }
        .validate()
        .is_err());
        assert!(SimConfig {
            jitter: -1.0,
            ..SimConfig::default()
        }
        .validate()
        .is_err());
        let cfg = SimConfig::default();
        assert_eq!(cfg.truncation_for(0.7), 38);
        assert!(0.7f64.powi(39) <= 1e-6 && 0.7f64.powi(38) > 1e-6);
        assert_eq!(cfg.truncation_for(1e-8), 1);
    }

    #[test]
    fn br_is_reproducible_and_positive() {
        let p = BrParams::new(0.4, 1.5, 0.2, 1.0).unwrap();
        let cfg = SimConfig::with_seed(17);
        let a = simulate_br(&p, grid(5), 4, &cfg).unwrap();
        let b = simulate_br(&p, grid(5), 4, &cfg).unwrap();
        assert_eq!(a.values(), b.values());
        assert!(a.values().iter().all(|&v| v > 0.0 && v.is_finite()));
        let c = simulate_br(&p, grid(5), 4, &SimConfig::with_seed(18)).unwrap();
        assert_ne!(a.values(), c.values());
    }

    #[test]
    fn br_margins_and_dependence() {
        let m = ModelSpec::A1(BrParams::new(0.4, 1.5, 0.2, 1.0).unwrap());
        let sim = Simulator::new(&m, grid(10), 3, &SimConfig::with_seed(3)).unwrap();
        let fields = sim.replicates(500);
        let mut site: Vec<f64> = fields.iter().map(|f| f.get(4, 6, 1)).collect();
        assert!(ks_frechet(&mut site) < ks_critical(site.len()));
        let mut nu = 0.0;
        for f in &fields {
            nu += empirical_spatial_fmadogram(f, &[lag(1)]).unwrap()[0].value;
        }
        let theta_hat = theta_from_fmadogram(nu / fields.len() as f64);
        assert!((theta_hat - m.theta_iso(1.0, 0.0)).abs() < 0.05, "{theta_hat}");
    }

    #[test]
    fn smith_innovation_dependence() {
        let inn = Innovation::Smith {
            sigma11: 10.0,
            sigma12: 0.0,
            sigma22: 10.0,
        };
        let s = SpatialSampler::new(&inn, 10, 10, &SimConfig::default()).unwrap();
        let mut rng = replicate_rng(9, 0);
        let mut nu = 0.0;
        let mut site = Vec::new();
        for _ in 0..500 {
            let v = s.sample(&mut rng);
            site.push(v[55]);
            let f = SpaceTimeField::new(10, 1, v, Margins::Frechet).unwrap();
            nu += empirical_spatial_fmadogram(&f, &[lag(1)]).unwrap()[0].value;
        }
        let theta_hat = theta_from_fmadogram(nu / 500.0);
        let theta = 2.0 * crate::special::norm_cdf((0.1f64).sqrt() / 2.0);
        assert!((theta_hat - theta).abs() < 0.05, "{theta_hat} vs {theta}");
        assert!(ks_frechet(&mut site) < ks_critical(site.len()));
    }

    #[test]
    fn schlather_innovation_dependence() {
        let inn = Innovation::Schlather { phi: 2.0, kappa: 1.5 };
        let s = SpatialSampler::new(&inn, 10, 10, &SimConfig::default()).unwrap();
        let mut rng = replicate_rng(4, 0);
        let mut nu = [0.0; 2];
        let mut site = Vec::new();
        for _ in 0..500 {
            let v = s.sample(&mut rng);
            site.push(v[44]);
            let f = SpaceTimeField::new(10, 1, v, Margins::Frechet).unwrap();
            let e = empirical_spatial_fmadogram(&f, &[lag(1), lag(4)]).unwrap();
            nu[0] += e[0].value;
            nu[1] += e[1].value;
        }
        for (k, h) in [1.0f64, 2.0].into_iter().enumerate() {
            let rho = (-(h / 2.0).powf(1.5)).exp();
            let theta = 1.0 + ((1.0 - rho) / 2.0).sqrt();
            let theta_hat = theta_from_fmadogram(nu[k] / 500.0);
            assert!((theta_hat - theta).abs() < 0.05, "h={h}: {theta_hat} vs {theta}");
        }
        assert!(ks_frechet(&mut site) < ks_critical(site.len()));
    }

    #[test]
    fn brown_resnick_innovation_dependence() {
        let inn = Innovation::BrownResnick { phi: 1.5, kappa: 1.0 };
        let s = SpatialSampler::new(&inn, 6, 6, &SimConfig::default()).unwrap();
        let mut rng = replicate_rng(2, 0);
        let mut nu = 0.0;
        for _ in 0..500 {
            let f = SpaceTimeField::new(6, 1, s.sample(&mut rng), Margins::Frechet).unwrap();
            nu += empirical_spatial_fmadogram(&f, &[lag(1)]).unwrap()[0].value;
        }
        let theta = 2.0 * crate::special::norm_cdf((0.5 / 1.5f64).sqrt());
        assert!((theta_from_fmadogram(nu / 500.0) - theta).abs() < 0.05);
    }

    fn b2() -> MarParams {
        let ModelSpec::Mar(m) = ModelSpec::from_vec(Family::B2, &[1.0, 0.0, 1.0, 1.0, 1.0, 0.7]).unwrap() else {
            unreachable!()
        };
        m
    }

    #[test]
    fn mar_recursion_identity_holds_exactly() {
        for tau in [[1.0, 1.0], [-1.0, 2.0], [0.0, 0.0]] {
            let m = MarParams { tau, ..b2() };
            let cfg = SimConfig {
                truncation: Some(4),
                ..SimConfig::with_seed(1)
            };
            let s = MarSampler::new(&m, grid(5), 6, &cfg).unwrap();
            let d = s.sample_detailed(&mut replicate_rng(1, 0));
            let [w1, w2] = d.window;
            let inn = |x: usize, y: usize, i: usize| d.innovations[(i * w2 + y) * w1 + x];
            let f = &d.field;
            for t in 1..6 {
                for y in 0..5 {
                    for x in 0..5 {
                        let (px, py) = (x as i64 - tau[0] as i64, y as i64 - tau[1] as i64);
                        if !(0..5).contains(&px) || !(0..5).contains(&py) {
                            continue;
                        }
                        let expect = (0.7 * f.get(px as usize, py as usize, t - 1))
                            .max((1.0 - 0.7) * inn(x + d.offset[0], y + d.offset[1], t + d.depth));
                        assert_eq!(f.get(x, y, t), expect);
                    }
                }
            }
        }
    }

    #[test]
    fn mar_with_tiny_delta_is_the_innovation() {
        let m = MarParams { delta: 1e-8, ..b2() };
        let cfg = SimConfig {
            truncation: Some(1),
            ..SimConfig::with_seed(2)
        };
        let s = MarSampler::new(&m, grid(6), 3, &cfg).unwrap();
        let d = s.sample_detailed(&mut replicate_rng(2, 0));
        let [w1, w2] = d.window;
        for t in 0..3 {
            for y in 0..6 {
                for x in 0..6 {
                    let h = d.innovations[((t + 1) * w2 + y + d.offset[1]) * w1 + x + d.offset[0]];
                    let rel = (d.field.get(x, y, t) - (1.0 - 1e-8) * h).abs() / h;
                    assert!(rel <= 1e-6);
                }
            }
        }
    }

    #[test]
    fn mar_rejects_unsupported_inputs() {
        let cfg = SimConfig::default();
        let m = MarParams {
            tau: [0.5, 1.0],
            ..b2()
        };
        assert!(matches!(
            simulate_mar(&m, grid(4), 3, &cfg),
            Err(Error::NonIntegerShift(..))
        ));
        let t = ModelSpec::from_vec(Family::B3, &[1.0, 1.0, 3.0, 1.0, 0.0, 0.5]).unwrap();
        assert!(matches!(simulate(&t, grid(4), 3, &cfg), Err(Error::Unsupported(_))));
    }

    #[test]
    fn mar_marginal_exponent_matches_truncation() {
        // At the first output time every site has exactly J + 1 terms, so the
        // exponent of the marginal law is 1 - delta^(J+1).
        let m = MarParams { delta: 0.5, ..b2() };
        let mut prev = 0.0;
        for j in [1usize, 2, 4] {
            let cfg = SimConfig {
                truncation: Some(j),
                ..SimConfig::with_seed(6)
            };
            let s = MarSampler::new(&m, grid(4), 1, &cfg).unwrap();
            let mut rng = replicate_rng(6, j as u64);
            let mut pooled = Vec::new();
            for _ in 0..2500 {
                pooled.extend_from_slice(s.sample(&mut rng).values());
            }
            // Fraction below 1 estimates exp(-c); invert for the exponent c.
            let p = pooled.iter().filter(|&&x| x <= 1.0).count() as f64 / pooled.len() as f64;
            let c_hat = -p.ln();
            let c = 1.0 - 0.5f64.powi(j as i32 + 1);
            // Sites within one draw are dependent; allow a generous band.
            let sd = ((1.0 - p) / (p * 2500.0)).sqrt();
            assert!((c_hat - c).abs() < 4.0 * sd, "J={j}: {c_hat} vs {c}");
            assert!(c > prev);
            prev = c;
        }
    }

    #[test]
    fn mar_smith_joint_madogram() {
        let model = ModelSpec::Mar(b2());
        let sim = Simulator::new(&model, grid(12), 30, &SimConfig::with_seed(8)).unwrap();
        let fields = sim.replicates(40);
        let nus: Vec<f64> = fields
            .iter()
            .map(|f| empirical_st_fmadogram(f, &[lag(2)], &[1]).unwrap()[0].value)
            .collect();
        let mean = nus.iter().sum::<f64>() / nus.len() as f64;
        let sd = (nus.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (nus.len() - 1) as f64).sqrt();
        // Scalar lag (sqrt2, 1) pools four directions; average the model over them.
        let dirs = [[1.0, 1.0], [1.0, -1.0], [-1.0, 1.0], [-1.0, -1.0]];
        let expect = dirs.iter().map(|&h| model.fmadogram(h, 1.0)).sum::<f64>() / 4.0;
        let band = 3.0 * sd / (nus.len() as f64).sqrt();
        assert!(
            (mean - expect).abs() < band.max(0.004),
            "{mean} vs {expect} (band {band})"
        );
    }

    #[test]
    fn a2_dependence_matches_closed_form() {
        let p = SepSchlatherParams::new(2.0, 1.0, 1.5, 1.0).unwrap();
        let model = ModelSpec::A2(p);
        let sim = Simulator::new(&model, grid(6), 4, &SimConfig::with_seed(12)).unwrap();
        let fields = sim.replicates(400);
        let mut s = 0.0;
        let mut t = 0.0;
        for f in &fields {
            s += empirical_spatial_fmadogram(f, &[lag(1)]).unwrap()[0].value;
            t += empirical_temporal_fmadogram(f, &[1]).unwrap()[0].value;
        }
        let k = fields.len() as f64;
        assert!((theta_from_fmadogram(s / k) - model.theta_iso(1.0, 0.0)).abs() < 0.05);
        assert!((theta_from_fmadogram(t / k) - model.theta_iso(0.0, 1.0)).abs() < 0.05);
    }
}
