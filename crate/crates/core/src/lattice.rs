//! Regular-grid geometry: sites `{1..n} x {1..n}` with unit spacing, time
//! points `1..T`, and the classes of site/time pairs that realize a given
//! spatial distance and temporal lag.
//!
//! Distances are carried as the integer `h^2` so that pairs are assigned to
//! lag classes with exact arithmetic. All pair classes are unordered: each
//! pair of points appears once.

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "usize", into = "usize")]
pub struct GridSpec {
    n: usize,
}

impl GridSpec {
    pub fn new(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidGrid(format!("grid side must be at least 2, got {n}")));
        }
        Ok(Self { n })
    }

    /// Side length.
    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of sites, `n^2`.
    pub fn sites(&self) -> usize {
        self.n * self.n
    }
}

impl TryFrom<usize> for GridSpec {
    type Error = Error;
    fn try_from(n: usize) -> Result<Self> {
        Self::new(n)
    }
}

impl From<GridSpec> for usize {
    fn from(g: GridSpec) -> usize {
        g.n
    }
}

/// A spatial distance `h`, stored exactly as `h^2`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SpatialLag(u64);

impl SpatialLag {
    pub const ZERO: SpatialLag = SpatialLag(0);

    /// Build from the squared distance; it must be a sum of two integer squares.
    pub fn from_sq(sq: u64) -> Result<Self> {
        if sum_of_two_squares(sq) {
            Ok(Self(sq))
        } else {
            Err(Error::NotGridDistance((sq as f64).sqrt()))
        }
    }

    /// Build from a floating distance such as `5f64.sqrt()`.
    pub fn from_distance(h: f64) -> Result<Self> {
        if !h.is_finite() || h < 0.0 {
            return Err(Error::NotGridDistance(h));
        }
        let sq = h * h;
        let rounded = sq.round();
        if (sq - rounded).abs() > 1e-9 * rounded.max(1.0) {
            return Err(Error::NotGridDistance(h));
        }
        Self::from_sq(rounded as u64).map_err(|_| Error::NotGridDistance(h))
    }

    pub fn sq(&self) -> u64 {
        self.0
    }

    pub fn distance(&self) -> f64 {
        (self.0 as f64).sqrt()
    }

    /// Every integer vector of this length.
    pub fn offsets(&self) -> Vec<(i32, i32)> {
        let r = (self.0 as f64).sqrt().ceil() as i64;
        let mut out = Vec::new();
        for dx in -r..=r {
            for dy in -r..=r {
                if (dx * dx + dy * dy) as u64 == self.0 {
                    out.push((dx as i32, dy as i32));
                }
            }
        }
        out
    }

    /// One representative of each `{v, -v}` pair (`dx > 0`, or `dx == 0` and
    /// `dy > 0`); `[(0, 0)]` for the zero lag.
    pub fn half_offsets(&self) -> Vec<(i32, i32)> {
        if self.0 == 0 {
            return vec![(0, 0)];
        }
        self.offsets()
            .into_iter()
            .filter(|&(dx, dy)| dx > 0 || (dx == 0 && dy > 0))
            .collect()
    }

    /// Whether some site pair of the grid is at this distance.
    pub fn realizable_on(&self, grid: GridSpec) -> bool {
        let n = grid.n() as i32;
        self.offsets().iter().any(|&(dx, dy)| dx.abs() < n && dy.abs() < n)
    }
}

impl std::fmt::Display for SpatialLag {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let r = (self.0 as f64).sqrt();
        if r.fract() == 0.0 {
            write!(f, "{}", r as u64)
        } else {
            write!(f, "sqrt({})", self.0)
        }
    }
}

impl Serialize for SpatialLag {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_f64(self.distance())
    }
}

impl<'de> Deserialize<'de> for SpatialLag {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Num(f64),
            Text(String),
        }
        match Repr::deserialize(d)? {
            Repr::Num(h) => SpatialLag::from_distance(h).map_err(serde::de::Error::custom),
            Repr::Text(s) => s.parse().map_err(serde::de::Error::custom),
        }
    }
}

impl std::str::FromStr for SpatialLag {
    type Err = Error;

    /// Accepts `"2"`, `"2.2360679775"` or `"sqrt(5)"`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if let Some(inner) = s.strip_prefix("sqrt(").and_then(|r| r.strip_suffix(')')) {
            let sq: u64 = inner
                .trim()
                .parse()
                .map_err(|_| Error::Parse(format!("bad lag {s:?}")))?;
            return SpatialLag::from_sq(sq);
        }
        let h: f64 = s.parse().map_err(|_| Error::Parse(format!("bad lag {s:?}")))?;
        SpatialLag::from_distance(h)
    }
}

fn sum_of_two_squares(sq: u64) -> bool {
    let mut a = 0u64;
    while a * a <= sq {
        let rest = sq - a * a;
        let b = (rest as f64).sqrt().round() as u64;
        if b * b == rest {
            return true;
        }
        a += 1;
    }
    false
}

/// Spatial distance set `H` and temporal lag set `K`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "LagSetsRepr", into = "LagSetsRepr")]
pub struct LagSets {
    spatial: Vec<SpatialLag>,
    temporal: Vec<u32>,
}

#[derive(Serialize, Deserialize)]
struct LagSetsRepr {
    spatial: Vec<SpatialLag>,
    temporal: Vec<u32>,
}

impl TryFrom<LagSetsRepr> for LagSets {
    type Error = Error;
    fn try_from(r: LagSetsRepr) -> Result<Self> {
        LagSets::new(r.spatial, r.temporal)
    }
}

impl From<LagSets> for LagSetsRepr {
    fn from(l: LagSets) -> Self {
        LagSetsRepr {
            spatial: l.spatial,
            temporal: l.temporal,
        }
    }
}

impl LagSets {
    /// Sorts both sets; duplicates and a zero temporal lag are rejected.
    pub fn new(mut spatial: Vec<SpatialLag>, mut temporal: Vec<u32>) -> Result<Self> {
        spatial.sort();
        temporal.sort();
        if spatial.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidArgs("duplicate spatial lag".into()));
        }
        if temporal.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidArgs("duplicate temporal lag".into()));
        }
        if temporal.first() == Some(&0) {
            return Err(Error::InvalidArgs("temporal lags must be positive".into()));
        }
        Ok(Self { spatial, temporal })
    }

    /// `H = {1, sqrt2, 2, sqrt5, sqrt8, 3, sqrt10, sqrt13, 4, sqrt17}`, `K = {1..10}`.
    pub fn standard() -> Self {
        let spatial = STANDARD_SPATIAL_SQ.iter().map(|&sq| SpatialLag(sq)).collect();
        Self {
            spatial,
            temporal: (1..=10).collect(),
        }
    }

    pub fn spatial(&self) -> &[SpatialLag] {
        &self.spatial
    }

    pub fn temporal(&self) -> &[u32] {
        &self.temporal
    }

    /// Keeps only temporal lags `<= max_lag`.
    pub fn with_max_temporal(mut self, max_lag: u32) -> Self {
        self.temporal.retain(|&l| l <= max_lag);
        self
    }

    /// Checks that every lag can be realized by at least one pair of points.
    pub fn validate_on(&self, grid: GridSpec, t_len: usize) -> Result<()> {
        for h in &self.spatial {
            if h.sq() > 0 && !h.realizable_on(grid) {
                return Err(Error::UnrealizableLag {
                    h_sq: h.sq(),
                    n: grid.n(),
                });
            }
        }
        for &l in &self.temporal {
            if l as usize >= t_len {
                return Err(Error::InvalidArgs(format!(
                    "temporal lag {l} needs more than {t_len} time points"
                )));
            }
        }
        Ok(())
    }
}

const STANDARD_SPATIAL_SQ: [u64; 10] = [1, 2, 4, 5, 8, 9, 10, 13, 16, 17];

/// A grid point: 0-based site coordinates and time index.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SiteTime {
    pub x: u32,
    pub y: u32,
    pub t: u32,
}

/// All unordered point pairs realizing one lag.
#[derive(Clone, Debug)]
pub struct PairClass {
    pub h: SpatialLag,
    pub lprime: Option<u32>,
    pub pairs: Vec<(SiteTime, SiteTime)>,
}

impl PairClass {
    pub fn count(&self) -> usize {
        self.pairs.len()
    }
}

/// Every unordered site pair at distance `h` within one time slice.
pub fn enumerate_spatial_pairs(grid: GridSpec, h: SpatialLag) -> Result<PairClass> {
    if h.sq() == 0 || !h.realizable_on(grid) {
        return Err(Error::UnrealizableLag {
            h_sq: h.sq(),
            n: grid.n(),
        });
    }
    let mut pairs = Vec::new();
    push_pairs(grid, 1, &h.half_offsets(), 0, &mut pairs);
    Ok(PairClass { h, lprime: None, pairs })
}

/// Per-time-slice pair count from the closed forms for the ten standard
/// distances.
pub fn count_pairs(n: usize, h: SpatialLag) -> Result<u64> {
    let n = n as i64;
    let c = match h.sq() {
        1 => 2 * n * (n - 1),
        2 => 2 * (n - 1) * (n - 1),
        4 => 2 * n * (n - 2),
        5 => 4 * (n - 1) * (n - 2),
        8 => 2 * (n - 2) * (n - 2),
        9 => 2 * n * (n - 3),
        10 => 4 * (n - 1) * (n - 3),
        13 => 4 * (n - 2) * (n - 3),
        16 => 2 * n * (n - 4),
        17 => 4 * (n - 1) * (n - 4),
        other => return Err(Error::UnsupportedLag(other)),
    };
    Ok(c.max(0) as u64)
}

/// Every unordered pair `((s_i, t_i), (s_j, t_j))` with `|s_i - s_j| = h` and
/// `|t_i - t_j| = lprime`. For `lprime > 0` pairs are stored earlier point first.
pub fn enumerate_spacetime_pairs(grid: GridSpec, t_len: usize, h: SpatialLag, lprime: u32) -> Result<PairClass> {
    if h.sq() == 0 && lprime == 0 {
        return Err(Error::InvalidArgs("lag (0, 0) has no distinct pairs".into()));
    }
    if (lprime as usize) >= t_len {
        return Err(Error::InvalidArgs(format!(
            "temporal lag {lprime} needs more than {t_len} time points"
        )));
    }
    if h.sq() > 0 && !h.realizable_on(grid) {
        return Err(Error::UnrealizableLag {
            h_sq: h.sq(),
            n: grid.n(),
        });
    }
    let offsets = if lprime == 0 { h.half_offsets() } else { h.offsets() };
    let mut pairs = Vec::new();
    push_pairs(grid, t_len, &offsets, lprime, &mut pairs);
    Ok(PairClass {
        h,
        lprime: Some(lprime),
        pairs,
    })
}

fn push_pairs(grid: GridSpec, t_len: usize, offsets: &[(i32, i32)], lprime: u32, out: &mut Vec<(SiteTime, SiteTime)>) {
    let n = grid.n() as i32;
    for t in 0..(t_len as u32 - lprime) {
        for &(dx, dy) in offsets {
            for y in 0..n {
                for x in 0..n {
                    let (x2, y2) = (x + dx, y + dy);
                    if (0..n).contains(&x2) && (0..n).contains(&y2) {
                        out.push((
                            SiteTime {
                                x: x as u32,
                                y: y as u32,
                                t,
                            },
                            SiteTime {
                                x: x2 as u32,
                                y: y2 as u32,
                                t: t + lprime,
                            },
                        ));
                    }
                }
            }
        }
    }
}

/// One vector lag: spatial offset from the earlier point to the later one,
/// plus the temporal lag. For `lprime == 0` the offset is the canonical
/// half-plane representative.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct VectorLag {
    pub dx: i32,
    pub dy: i32,
    pub lprime: u32,
}

impl VectorLag {
    pub fn h_sq(&self) -> u64 {
        (self.dx as i64 * self.dx as i64 + self.dy as i64 * self.dy as i64) as u64
    }

    pub fn h(&self) -> f64 {
        (self.h_sq() as f64).sqrt()
    }

    pub fn offset(&self) -> [f64; 2] {
        [self.dx as f64, self.dy as f64]
    }

    /// Number of point pairs of an `n x n x t_len` grid realizing this lag.
    pub fn pair_count(&self, grid: GridSpec, t_len: usize) -> usize {
        let n = grid.n() as i64;
        let a = (n - self.dx.abs() as i64).max(0);
        let b = (n - self.dy.abs() as i64).max(0);
        let c = (t_len as i64 - self.lprime as i64).max(0);
        (a * b * c) as usize
    }
}

/// The vector lags sharing one scalar lag `(h, lprime)`.
#[derive(Clone, Debug)]
pub struct LagGroup {
    pub h: SpatialLag,
    pub lprime: u32,
    pub vectors: Vec<VectorLag>,
}

/// Lag classes for one geometry, computed once and reused across replicates.
#[derive(Clone, Debug)]
pub struct LagPlan {
    grid: GridSpec,
    t_len: usize,
    spatial: Vec<LagGroup>,
    temporal: Vec<LagGroup>,
    joint: Vec<LagGroup>,
}

impl LagPlan {
    pub fn new(grid: GridSpec, t_len: usize, lags: &LagSets) -> Result<Self> {
        lags.validate_on(grid, t_len)?;
        let group = |h: SpatialLag, l: u32| -> Result<LagGroup> {
            if h.sq() == 0 && l == 0 {
                return Err(Error::InvalidArgs("lag (0, 0) has no distinct pairs".into()));
            }
            let offs = if l == 0 { h.half_offsets() } else { h.offsets() };
            let vectors = offs
                .into_iter()
                .map(|(dx, dy)| VectorLag { dx, dy, lprime: l })
                .filter(|v| v.pair_count(grid, t_len) > 0)
                .collect();
            Ok(LagGroup { h, lprime: l, vectors })
        };
        let spatial = lags
            .spatial()
            .iter()
            .filter(|h| h.sq() > 0)
            .map(|&h| group(h, 0))
            .collect::<Result<Vec<_>>>()?;
        let temporal = lags
            .temporal()
            .iter()
            .map(|&l| group(SpatialLag::ZERO, l))
            .collect::<Result<Vec<_>>>()?;
        let mut joint = Vec::new();
        for &l in lags.temporal() {
            for &h in lags.spatial() {
                joint.push(group(h, l)?);
            }
        }
        Ok(Self {
            grid,
            t_len,
            spatial,
            temporal,
            joint,
        })
    }

    pub fn grid(&self) -> GridSpec {
        self.grid
    }

    pub fn t_len(&self) -> usize {
        self.t_len
    }

    /// Purely spatial groups `(h, 0)`.
    pub fn spatial(&self) -> &[LagGroup] {
        &self.spatial
    }

    /// Purely temporal groups `(0, l')`.
    pub fn temporal(&self) -> &[LagGroup] {
        &self.temporal
    }

    /// Joint groups over `H x K`.
    pub fn joint(&self) -> &[LagGroup] {
        &self.joint
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    fn lag(sq: u64) -> SpatialLag {
        SpatialLag::from_sq(sq).unwrap()
    }

    #[test]
    fn grid_rejects_degenerate_side() {
        assert!(GridSpec::new(1).is_err());
        assert!(GridSpec::new(2).is_ok());
    }

    #[test]
    fn distances_parse_exactly() {
        assert_eq!(SpatialLag::from_distance(5f64.sqrt()).unwrap().sq(), 5);
        assert_eq!("sqrt(13)".parse::<SpatialLag>().unwrap().sq(), 13);
        assert_eq!("3".parse::<SpatialLag>().unwrap().sq(), 9);
        assert!(SpatialLag::from_distance(3f64.sqrt()).is_err());
        assert!(SpatialLag::from_distance(1.5).is_err());
        assert!(SpatialLag::from_sq(7).is_err());
    }

    #[test]
    fn small_grid_examples() {
        let g2 = GridSpec::new(2).unwrap();
        assert_eq!(enumerate_spatial_pairs(g2, lag(1)).unwrap().count(), 4);
        assert_eq!(count_pairs(2, lag(2)).unwrap(), 2);
        assert_eq!(enumerate_spatial_pairs(g2, lag(2)).unwrap().count(), 2);
        assert!(matches!(
            enumerate_spatial_pairs(g2, lag(4)),
            Err(Error::UnrealizableLag { .. })
        ));
    }

    #[test]
    fn published_counts_for_the_14_grid() {
        let g = GridSpec::new(14).unwrap();
        assert_eq!(enumerate_spatial_pairs(g, lag(1)).unwrap().count(), 364);
        assert_eq!(enumerate_spatial_pairs(g, lag(4)).unwrap().count(), 336);
        assert_eq!(count_pairs(14, lag(1)).unwrap(), 364);
        assert_eq!(count_pairs(14, lag(2)).unwrap(), 338);
        assert_eq!(364 * 732, 266_448);
        assert_eq!(336 * 732, 245_952);
        let t = enumerate_spacetime_pairs(g, 732, SpatialLag::ZERO, 1).unwrap();
        assert_eq!(t.count(), 143_276);
        let t = enumerate_spacetime_pairs(g, 732, SpatialLag::ZERO, 2).unwrap();
        assert_eq!(t.count(), 143_080);
        let s = enumerate_spacetime_pairs(g, 732, lag(1), 0).unwrap();
        assert_eq!(s.count(), 266_448);
    }

    #[test]
    fn unsupported_closed_form() {
        assert!(matches!(count_pairs(10, lag(25)), Err(Error::UnsupportedLag(25))));
    }

    #[test]
    fn two_by_two_space_time_matches_brute_force() {
        // Oracle: every unordered pair of the 8 points of a 2x2x2 block.
        let pts: Vec<(i32, i32, i32)> = (0..2)
            .flat_map(|t| (0..2).flat_map(move |y| (0..2).map(move |x| (x, y, t))))
            .collect();
        let mut brute = 0;
        for i in 0..pts.len() {
            for j in (i + 1)..pts.len() {
                let (a, b) = (pts[i], pts[j]);
                let d2 = (a.0 - b.0).pow(2) + (a.1 - b.1).pow(2);
                if d2 == 1 && (a.2 - b.2).abs() == 1 {
                    brute += 1;
                }
            }
        }
        assert_eq!(brute, 8);
        let g = GridSpec::new(2).unwrap();
        assert_eq!(enumerate_spacetime_pairs(g, 2, lag(1), 1).unwrap().count(), brute);
    }

    #[test]
    fn table_counts_match_enumeration() {
        for n in 5..=20 {
            let g = GridSpec::new(n).unwrap();
            for &sq in &STANDARD_SPATIAL_SQ {
                let e = enumerate_spatial_pairs(g, lag(sq)).unwrap().count() as u64;
                assert_eq!(e, count_pairs(n, lag(sq)).unwrap(), "n={n} h^2={sq}");
            }
        }
    }

    #[test]
    fn classes_are_disjoint_and_unordered() {
        let g = GridSpec::new(6).unwrap();
        let mut seen = HashSet::new();
        for &sq in &STANDARD_SPATIAL_SQ {
            for l in 0..3 {
                let class = enumerate_spacetime_pairs(g, 5, lag(sq), l).unwrap();
                for (a, b) in class.pairs {
                    let key = if a < b { (a, b) } else { (b, a) };
                    assert!(seen.insert(key), "pair {key:?} appears twice");
                }
            }
        }
    }

    #[test]
    fn zero_spatial_lag_count() {
        let g = GridSpec::new(7).unwrap();
        for l in 1..5u32 {
            let c = enumerate_spacetime_pairs(g, 12, SpatialLag::ZERO, l).unwrap().count();
            assert_eq!(c, 49 * (12 - l as usize));
        }
    }

    #[test]
    fn plan_counts_agree_with_enumeration() {
        let g = GridSpec::new(7).unwrap();
        let plan = LagPlan::new(g, 6, &LagSets::standard().with_max_temporal(5)).unwrap();
        for grp in plan.joint().iter().chain(plan.spatial()).chain(plan.temporal()) {
            let total: usize = grp.vectors.iter().map(|v| v.pair_count(g, 6)).sum();
            let e = enumerate_spacetime_pairs(g, 6, grp.h, grp.lprime).unwrap().count();
            assert_eq!(total, e, "h^2={} l'={}", grp.h.sq(), grp.lprime);
        }
    }

    #[test]
    fn lag_sets_serde_accepts_sqrt_strings() {
        let l: LagSets = serde_json::from_str(r#"{"spatial":[1,"sqrt(2)",2.0],"temporal":[2,1]}"#).unwrap();
        assert_eq!(l.spatial().iter().map(|h| h.sq()).collect::<Vec<_>>(), vec![1, 2, 4]);
        assert_eq!(l.temporal(), &[1, 2]);
        assert!(serde_json::from_str::<LagSets>(r#"{"spatial":[1],"temporal":[0]}"#).is_err());
    }
}
