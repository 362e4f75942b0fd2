//! Level-by-level evolution of reachable heights.
//!
//! A frontier holds the reachable heights at level `n` together with the
//! heights at level `n - 1` whose site was open: those still owe their
//! `(n+1, m)` contribution through the `(2, 0)` edge. Nothing at a level
//! above `n` is ever consulted.
//!
//! Half-line starter sets are cut at a finite floor `z - K - horizon`. A
//! starter below the floor climbs at most one unit per level, so any edge
//! value at least `z - K` is exactly the untruncated value.

use serde::{Deserialize, Serialize};

use crate::env::{to_reflected, Environment, SiteR};
use crate::error::{check_probability, Error, Result};
use crate::ext::ExtInt;

#[derive(Clone, Debug, Default)]
pub struct FrontierState {
    level: i64,
    cur: Vec<i64>,
    prev_open: Vec<i64>,
    open_buf: Vec<i64>,
    next_buf: Vec<i64>,
}

impl PartialEq for FrontierState {
    fn eq(&self, other: &Self) -> bool {
        self.level == other.level && self.cur == other.cur && self.prev_open == other.prev_open
    }
}

impl Eq for FrontierState {}

fn parity_ok(level: i64, h: i64) -> bool {
    (level + h).rem_euclid(2) == 0
}

fn sorted_dedup(mut v: Vec<i64>) -> Vec<i64> {
    v.sort_unstable();
    v.dedup();
    v
}

impl FrontierState {
    pub fn new(level: i64, heights: Vec<i64>) -> Result<Self> {
        Self::from_parts(level, heights, Vec::new())
    }

    pub fn from_parts(level: i64, cur: Vec<i64>, prev_open: Vec<i64>) -> Result<Self> {
        if level < 0 {
            return Err(Error::OffLattice { n: level, m: 0 });
        }
        if let Some(&m) = cur.iter().find(|&&m| !parity_ok(level, m)) {
            return Err(Error::OffLattice { n: level, m });
        }
        if let Some(&m) = prev_open.iter().find(|&&m| !parity_ok(level - 1, m)) {
            return Err(Error::OffLattice { n: level - 1, m });
        }
        if level == 0 && !prev_open.is_empty() {
            return Err(Error::InvalidArgument("level 0 has no previous level".into()));
        }
        Ok(FrontierState {
            level,
            cur: sorted_dedup(cur),
            prev_open: sorted_dedup(prev_open),
            ..Default::default()
        })
    }

    pub fn level(&self) -> i64 {
        self.level
    }

    /// Heights reached at the current level, ascending.
    pub fn cur(&self) -> &[i64] {
        &self.cur
    }

    /// Open heights of the previous level, ascending.
    pub fn prev_open(&self) -> &[i64] {
        &self.prev_open
    }

    pub fn is_empty(&self) -> bool {
        self.cur.is_empty()
    }

    pub fn sup(&self) -> ExtInt {
        self.cur.last().map_or(ExtInt::NegInf, |&m| ExtInt::Finite(m))
    }

    pub fn inf(&self) -> ExtInt {
        self.cur.first().map_or(ExtInt::PosInf, |&m| ExtInt::Finite(m))
    }

    /// One step of evolution, returning the next state.
    pub fn evolve<E: Environment + ?Sized>(&self, env: &E, p: f64) -> FrontierState {
        let mut next = self.clone();
        next.advance(env, p);
        next
    }

    /// In-place [`FrontierState::evolve`].
    pub fn advance<E: Environment + ?Sized>(&mut self, env: &E, p: f64) {
        self.advance_within(env, p, |_, _| true);
    }

    /// Advance, keeping only next-level heights accepted by `keep(level, m)`.
    pub fn advance_within<E, K>(&mut self, env: &E, p: f64, keep: K)
    where
        E: Environment + ?Sized,
        K: Fn(i64, i64) -> bool,
    {
        let level = self.level;
        self.open_buf.clear();
        for &m in &self.cur {
            if env.is_open(level, m, p) {
                self.open_buf.push(m);
            }
        }
        self.next_buf.clear();
        merge_children(&self.open_buf, &self.prev_open, &mut self.next_buf);
        let next_level = level + 1;
        self.next_buf.retain(|&m| keep(next_level, m));
        std::mem::swap(&mut self.prev_open, &mut self.open_buf);
        std::mem::swap(&mut self.cur, &mut self.next_buf);
        self.level = next_level;
    }

    /// Add starter heights at the current level. Starters belong to the
    /// frontier whether or not they are open.
    pub fn inject(&mut self, heights: &[i64]) -> Result<()> {
        if let Some(&m) = heights.iter().find(|&&m| !parity_ok(self.level, m)) {
            return Err(Error::OffLattice { n: self.level, m });
        }
        if heights.is_empty() {
            return Ok(());
        }
        self.cur.extend_from_slice(heights);
        self.cur.sort_unstable();
        self.cur.dedup();
        Ok(())
    }
}

/// Sorted union of `{m - 1, m + 1 : m in open}` and `straight`.
fn merge_children(open: &[i64], straight: &[i64], out: &mut Vec<i64>) {
    let (mut i, mut j, mut k) = (0usize, 0usize, 0usize);
    let n = open.len();
    loop {
        let a = if i < n { Some(open[i] - 1) } else { None };
        let b = if j < n { Some(open[j] + 1) } else { None };
        let c = straight.get(k).copied();
        let next = [a, b, c].into_iter().flatten().min();
        let Some(v) = next else { break };
        if a == Some(v) {
            i += 1;
        }
        if b == Some(v) {
            j += 1;
        }
        if c == Some(v) {
            k += 1;
        }
        if out.last() != Some(&v) {
            out.push(v);
        }
    }
}

/// Starting sets on the first two columns of a run.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StarterSpec {
    /// Heights at the base level (parity of the base level).
    pub column0: Vec<i64>,
    /// Heights at the base level + 1.
    pub column1: Vec<i64>,
    /// Where a half-line was cut, if this set came from one.
    pub truncation_floor: Option<i64>,
}

pub(crate) fn heights_with_parity(lo: i64, hi: i64, parity: i64) -> Vec<i64> {
    let mut start = lo;
    if (start - parity).rem_euclid(2) != 0 {
        start += 1;
    }
    (start..=hi).step_by(2).collect()
}

impl StarterSpec {
    /// `{(0, 0)}`.
    pub fn origin() -> Self {
        Self::column0(vec![0])
    }

    pub fn column0(heights: Vec<i64>) -> Self {
        StarterSpec { column0: sorted_dedup(heights), column1: Vec::new(), truncation_floor: None }
    }

    /// `{(0, y) : y even, lo <= y <= hi}`.
    pub fn interval(lo: i64, hi: i64) -> Self {
        Self::column0(heights_with_parity(lo, hi, 0))
    }

    /// Both columns inside `[lo, hi]`.
    pub fn window(lo: i64, hi: i64) -> Self {
        StarterSpec {
            column0: heights_with_parity(lo, hi, 0),
            column1: heights_with_parity(lo, hi, 1),
            truncation_floor: None,
        }
    }

    /// Both columns at or below `z`, cut at `floor`.
    pub fn below(z: i64, floor: i64) -> Self {
        StarterSpec {
            column0: heights_with_parity(floor, z, 0),
            column1: heights_with_parity(floor, z, 1),
            truncation_floor: Some(floor),
        }
    }

    /// Both columns at or above `z`, cut at `ceiling`.
    pub fn above(z: i64, ceiling: i64) -> Self {
        StarterSpec {
            column0: heights_with_parity(z, ceiling, 0),
            column1: heights_with_parity(z, ceiling, 1),
            truncation_floor: Some(ceiling),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.column0.is_empty() && self.column1.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        if self.is_empty() {
            return Err(Error::EmptyStarters);
        }
        if let Some(&h) = self.column0.iter().find(|&&h| !parity_ok(0, h)) {
            return Err(Error::StarterParity { column: 0, height: h });
        }
        if let Some(&h) = self.column1.iter().find(|&&h| !parity_ok(1, h)) {
            return Err(Error::StarterParity { column: 1, height: h });
        }
        Ok(())
    }
}

/// Run from starters on columns `base` and `base + 1` up to `last` inclusive,
/// calling `visit` on the state at every level.
pub(crate) fn drive<E, K, V>(
    env: &E,
    p: f64,
    base: i64,
    column0: &[i64],
    column1: &[i64],
    last: i64,
    keep: K,
    mut visit: V,
) where
    E: Environment + ?Sized,
    K: Fn(i64, i64) -> bool,
    V: FnMut(&FrontierState),
{
    let mut state = FrontierState {
        level: base,
        cur: column0.to_vec(),
        ..Default::default()
    };
    visit(&state);
    while state.level < last {
        state.advance_within(env, p, &keep);
        if state.level == base + 1 {
            state.cur.extend_from_slice(column1);
            state.cur.sort_unstable();
            state.cur.dedup();
        }
        visit(&state);
    }
}

/// Upper and lower edges of `xi^A` and its death time.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct XiTrajectory {
    pub u: Vec<ExtInt>,
    pub l: Vec<ExtInt>,
    /// First empty level; `+inf` if the frontier is alive at the horizon.
    pub tau: ExtInt,
}

pub fn run_xi<E: Environment + ?Sized>(
    env: &E,
    p: f64,
    start: &StarterSpec,
    horizon: usize,
) -> Result<XiTrajectory> {
    check_probability(p)?;
    start.validate()?;
    if horizon < 1 {
        return Err(Error::InvalidArgument("horizon must be >= 1".into()));
    }
    let mut u = Vec::with_capacity(horizon + 1);
    let mut l = Vec::with_capacity(horizon + 1);
    let mut tau = ExtInt::PosInf;
    drive(env, p, 0, &start.column0, &start.column1, horizon as i64, |_, _| true, |s| {
        if s.is_empty() && tau == ExtInt::PosInf {
            tau = ExtInt::Finite(s.level());
        }
        u.push(s.sup());
        l.push(s.inf());
    });
    Ok(XiTrajectory { u, l, tau })
}

/// Edges of the half-line processes: `ubar` from the starters at or below
/// `z` and `lbar` from those at or above `-z` (`z = 0` gives the plain
/// barred processes).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BarredTrajectory {
    pub ubar: Vec<ExtInt>,
    pub lbar: Vec<ExtInt>,
    pub offset: i64,
    pub k: i64,
    pub truncated_below: bool,
    pub truncated_above: bool,
    exact_everywhere: bool,
}

impl BarredTrajectory {
    pub fn horizon(&self) -> usize {
        self.ubar.len() - 1
    }

    pub fn ubar_exact(&self, n: usize) -> bool {
        self.exact_everywhere || self.ubar[n] >= ExtInt::Finite(self.offset - self.k)
    }

    pub fn lbar_exact(&self, n: usize) -> bool {
        self.exact_everywhere || self.lbar[n] <= ExtInt::Finite(self.k - self.offset)
    }

    /// Decide `lbar[n] > ubar[n]` for the untruncated processes.
    pub fn separated(&self, n: usize) -> Result<bool> {
        let (u, l) = (self.ubar[n], self.lbar[n]);
        let lo = ExtInt::Finite(self.offset - self.k);
        let hi = ExtInt::Finite(self.k - self.offset);
        match (self.ubar_exact(n), self.lbar_exact(n)) {
            (true, true) => Ok(l > u),
            (false, true) if l >= lo => Ok(true),
            (true, false) if u <= hi => Ok(true),
            (false, false) if self.k >= self.offset => Ok(true),
            _ => Err(Error::Undecidable { level: n, k: self.k }),
        }
    }
}

/// `ubar_n` and `lbar_n` for `n <= horizon` with truncation depth `k`.
pub fn run_barred<E: Environment + ?Sized>(
    env: &E,
    p: f64,
    horizon: usize,
    k: i64,
) -> Result<BarredTrajectory> {
    run_barred_at(env, p, horizon, k, 0)
}

/// `ubar^z` (starters `<= z`) and `lbar^{-z}` (starters `>= -z`).
pub fn run_barred_at<E: Environment + ?Sized>(
    env: &E,
    p: f64,
    horizon: usize,
    k: i64,
    z: i64,
) -> Result<BarredTrajectory> {
    check_probability(p)?;
    if k < 0 {
        return Err(Error::InvalidArgument("K must be >= 0".into()));
    }
    let ubar = half_line_edge(env, p, horizon, k, z, true);
    let lbar = half_line_edge(env, p, horizon, k, -z, false);
    let exact_everywhere = p <= 0.0;
    let mut t = BarredTrajectory {
        ubar,
        lbar,
        offset: z,
        k,
        truncated_below: false,
        truncated_above: false,
        exact_everywhere,
    };
    t.truncated_below = (0..=horizon).any(|n| !t.ubar_exact(n));
    t.truncated_above = (0..=horizon).any(|n| !t.lbar_exact(n));
    Ok(t)
}

/// Edge of the half-line process below (`upper`) or above `z`, per level.
///
/// Heights beyond the line `floor + level` are dropped as the run goes: a
/// site there cannot reach the exact band at any later level, so values
/// inside the band are unchanged.
pub(crate) fn half_line_edge<E: Environment + ?Sized>(
    env: &E,
    p: f64,
    horizon: usize,
    k: i64,
    z: i64,
    upper: bool,
) -> Vec<ExtInt> {
    let h = horizon as i64;
    let mut out = Vec::with_capacity(horizon + 1);
    if upper {
        let floor = z - k - h;
        let st = StarterSpec::below(z, floor);
        drive(env, p, 0, &st.column0, &st.column1, h, |n, m| m >= floor + n, |s| out.push(s.sup()));
    } else {
        let ceiling = z + k + h;
        let st = StarterSpec::above(z, ceiling);
        drive(env, p, 0, &st.column0, &st.column1, h, |n, m| m <= ceiling - n, |s| out.push(s.inf()));
    }
    out
}

/// `ubar_n` for `n <= horizon` and whether any level fell below `-k`.
pub fn ubar_path<E: Environment + ?Sized>(
    env: &E,
    p: f64,
    horizon: usize,
    k: i64,
) -> Result<(Vec<ExtInt>, bool)> {
    check_probability(p)?;
    if k < 0 {
        return Err(Error::InvalidArgument("K must be >= 0".into()));
    }
    let u = half_line_edge(env, p, horizon, k, 0, true);
    let truncated = p > 0.0 && u.iter().any(|&v| v < ExtInt::Finite(-k));
    Ok((u, truncated))
}

/// Death time of the origin's frontier, `+inf` if alive at `horizon`.
pub fn death_time<E: Environment + ?Sized>(env: &E, p: f64, horizon: usize) -> Result<ExtInt> {
    check_probability(p)?;
    let mut state = FrontierState::new(0, vec![0])?;
    while (state.level() as usize) < horizon {
        state.advance(env, p);
        if state.is_empty() {
            return Ok(ExtInt::Finite(state.level()));
        }
    }
    Ok(ExtInt::PosInf)
}

/// `inf{m : lbar_m > ubar_m}`, `+inf` if no level up to the horizon separates.
pub fn tau_via_edges(t: &BarredTrajectory) -> Result<ExtInt> {
    for n in 0..=t.horizon() {
        if t.separated(n)? {
            return Ok(ExtInt::Finite(n as i64));
        }
    }
    Ok(ExtInt::PosInf)
}

/// `ubar_{m,n}`: gain over `ubar_m` of the highest level-`n` point reachable
/// from columns `m`, `m+1` at or below `ubar_m`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RelativeGain {
    pub base: ExtInt,
    pub top: ExtInt,
    pub gain: ExtInt,
    pub exact: bool,
}

pub fn u_bar_relative<E: Environment + ?Sized>(
    env: &E,
    p: f64,
    m: usize,
    n: usize,
    k: i64,
) -> Result<RelativeGain> {
    check_probability(p)?;
    if n <= m {
        return Err(Error::InvalidArgument(format!("need n > m, got m={m}, n={n}")));
    }
    let base_run = run_barred(env, p, m, k)?;
    let base = base_run.ubar[m];
    let base_exact = base_run.ubar_exact(m);
    let Some(b) = base.as_finite() else {
        return Ok(RelativeGain { base, top: ExtInt::NegInf, gain: ExtInt::NegInf, exact: base_exact });
    };
    let (mi, ni) = (m as i64, n as i64);
    let floor = b - k - (ni - mi);
    let col0 = heights_with_parity(floor, b, mi);
    let col1 = heights_with_parity(floor, b, mi + 1);
    let mut top = ExtInt::NegInf;
    drive(env, p, mi, &col0, &col1, ni, |l, h| h >= floor + (l - mi), |s| {
        if s.level() == ni {
            top = s.sup();
        }
    });
    let exact = base_exact && (p <= 0.0 || top >= ExtInt::Finite(b - k));
    Ok(RelativeGain { base, top, gain: top.shift(-b), exact })
}

/// Forward cluster of a site up to `depth` further levels, with the
/// reflected-frame boundaries.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClusterSample {
    pub source: SiteR,
    pub sites: Vec<SiteR>,
    /// `w[x]`: highest reflected `y` in column `x`, relative to the source.
    pub w: Vec<Option<i64>>,
    /// `v[x]`: lowest reflected `y` in column `x`.
    pub v: Vec<Option<i64>>,
    pub survived: bool,
}

pub fn explore_cluster<E: Environment + ?Sized>(
    env: &E,
    p: f64,
    source: SiteR,
    depth: usize,
) -> Result<ClusterSample> {
    check_probability(p)?;
    if !source.is_valid() {
        return Err(Error::OffLattice { n: source.n, m: source.m });
    }
    if depth < 1 {
        return Err(Error::InvalidArgument("depth must be >= 1".into()));
    }
    let mut sites = Vec::new();
    let mut w = vec![None; depth + 1];
    let mut v = vec![None; depth + 1];
    let mut survived = false;
    let last = source.n + depth as i64;
    drive(env, p, source.n, &[source.m], &[], last, |_, _| true, |s| {
        for &m in s.cur() {
            let site = SiteR { n: s.level(), m };
            sites.push(site);
            let r = to_reflected(SiteR { n: site.n - source.n, m: site.m - source.m });
            let x = r.x as usize;
            w[x] = Some(w[x].map_or(r.y, |old: i64| old.max(r.y)));
            v[x] = Some(v[x].map_or(r.y, |old: i64| old.min(r.y)));
        }
        if s.level() == last {
            survived = !s.is_empty();
        }
    });
    Ok(ClusterSample { source, sites, w, v, survived })
}

/// Reflected boundaries of the cluster of the origin in columns `0..=columns`,
/// explored until every such column is final.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundarySample {
    pub w: Vec<Option<i64>>,
    pub v: Vec<Option<i64>>,
    /// Alive at the level where all requested columns were resolved.
    pub survived: bool,
    /// False if `max_levels` was hit first.
    pub resolved: bool,
    pub levels: usize,
}

/// Column `x` is the rotated diagonal `m = n - 2x`. The upper edge obeys
/// `u_{n+1} <= max(u_n + 1, u_{n-1})`, so once two consecutive levels sit
/// strictly below that diagonal the cluster never returns to it and every
/// column up to `x` is final.
pub fn reflected_boundaries<E: Environment + ?Sized>(
    env: &E,
    p: f64,
    columns: usize,
    max_levels: usize,
) -> Result<BoundarySample> {
    check_probability(p)?;
    let cols = columns as i64;
    let mut w = vec![None; columns + 1];
    let mut v = vec![None; columns + 1];
    let mut state = FrontierState::new(0, vec![0])?;
    let mut below_prev = false;
    loop {
        let n = state.level();
        // sites on diagonals 0..=columns satisfy m >= n - 2 * columns
        let cutoff = n - 2 * cols;
        let first = state.cur().partition_point(|&m| m < cutoff);
        for &m in &state.cur()[first..] {
            let x = ((n - m) / 2) as usize;
            let y = (n + m) / 2;
            w[x] = Some(w[x].map_or(y, |old: i64| old.max(y)));
            v[x] = Some(v[x].map_or(y, |old: i64| old.min(y)));
        }
        if state.is_empty() && state.prev_open().is_empty() {
            return Ok(BoundarySample { w, v, survived: false, resolved: true, levels: n as usize });
        }
        let below_now = state.sup() < ExtInt::Finite(cutoff);
        if below_now && below_prev && !state.is_empty() {
            return Ok(BoundarySample { w, v, survived: true, resolved: true, levels: n as usize });
        }
        below_prev = below_now;
        if n as usize >= max_levels {
            return Ok(BoundarySample {
                w,
                v,
                survived: !state.is_empty(),
                resolved: false,
                levels: n as usize,
            });
        }
        state.advance(env, p);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{ConstantEnv, EnvField};

    const OPEN: ConstantEnv = ConstantEnv(0.0);
    const CLOSED: ConstantEnv = ConstantEnv(0.999);

    #[test]
    fn all_open_evolution() {
        let s0 = FrontierState::new(0, vec![0]).unwrap();
        let s1 = s0.evolve(&OPEN, 1.0);
        assert_eq!(s1.cur(), &[-1, 1]);
        assert_eq!(s1.prev_open(), &[0]);
        let s2 = s1.evolve(&OPEN, 1.0);
        assert_eq!(s2.cur(), &[-2, 0, 2]);
    }

    #[test]
    fn closed_origin_dies() {
        let s1 = FrontierState::new(0, vec![0]).unwrap().evolve(&CLOSED, 0.5);
        assert!(s1.is_empty());
        let t = run_xi(&EnvField::new(1), 0.0, &StarterSpec::origin(), 5).unwrap();
        assert_eq!(t.tau, ExtInt::Finite(1));
        assert_eq!(t.u[1], ExtInt::NegInf);
        assert_eq!(t.l[1], ExtInt::PosInf);
    }

    #[test]
    fn parity_validated() {
        assert!(FrontierState::new(1, vec![0]).is_err());
        assert!(FrontierState::from_parts(2, vec![0], vec![0]).is_err());
        let mut s = FrontierState::new(2, vec![0]).unwrap();
        assert!(s.inject(&[1]).is_err());
        assert!(StarterSpec { column0: vec![], column1: vec![0], truncation_floor: None }
            .validate()
            .is_err());
        assert_eq!(StarterSpec::below(0, -6).column1, vec![-5, -3, -1]);
        assert_eq!(StarterSpec::below(0, -6).column0, vec![-6, -4, -2, 0]);
    }

    #[test]
    fn empty_starters_rejected() {
        let e = StarterSpec::column0(vec![]);
        assert_eq!(run_xi(&OPEN, 1.0, &e, 3).unwrap_err(), Error::EmptyStarters);
    }

    #[test]
    fn origin_two_steps_needs_origin_open() {
        // 0 in xi_2 iff the origin is open
        for seed in 0..2000 {
            let f = EnvField::new(seed);
            let s2 = FrontierState::new(0, vec![0]).unwrap().evolve(&f, 0.37).evolve(&f, 0.37);
            assert_eq!(s2.cur().contains(&0), f.is_open(0, 0, 0.37));
        }
    }

    #[test]
    fn tau_is_never_two() {
        for seed in 0..5000 {
            let t = run_xi(&EnvField::new(seed), 0.5, &StarterSpec::origin(), 4).unwrap();
            assert_ne!(t.tau, ExtInt::Finite(2));
        }
    }

    #[test]
    fn barred_extremes() {
        let t = run_barred(&EnvField::new(3), 1.0, 20, 20).unwrap();
        for n in 0..=20 {
            assert_eq!(t.ubar[n], ExtInt::Finite(n as i64));
            assert_eq!(t.lbar[n], ExtInt::Finite(-(n as i64)));
        }
        assert!(!t.truncated_below);
        let t = run_barred(&EnvField::new(3), 0.0, 20, 20).unwrap();
        assert_eq!(t.ubar[0], ExtInt::Finite(0));
        // column-1 starters are connected to themselves
        assert_eq!(t.ubar[1], ExtInt::Finite(-1));
        assert_eq!(t.lbar[1], ExtInt::Finite(1));
        for n in 2..=20 {
            assert_eq!(t.ubar[n], ExtInt::NegInf);
            assert_eq!(t.lbar[n], ExtInt::PosInf);
        }
        assert!(!t.truncated_below);
        assert_eq!(tau_via_edges(&t).unwrap(), ExtInt::Finite(1));
    }

    #[test]
    fn tau_via_edges_at_p_one_is_infinite() {
        let t = run_barred(&EnvField::new(3), 1.0, 30, 30).unwrap();
        assert_eq!(tau_via_edges(&t).unwrap(), ExtInt::PosInf);
    }

    #[test]
    fn truncation_flag() {
        // subcritical: the upper edge falls below -K quickly when K is tiny
        let mut flagged = 0;
        for seed in 0..200 {
            let t = run_barred(&EnvField::new(seed), 0.3, 30, 1).unwrap();
            if t.truncated_below {
                flagged += 1;
                let n = (0..=30).find(|&n| !t.ubar_exact(n)).unwrap();
                assert!(t.ubar[n] < ExtInt::Finite(-1));
            }
        }
        assert!(flagged > 0);
    }

    #[test]
    fn relative_gain_at_p_one() {
        for m in 1..6 {
            let g = u_bar_relative(&OPEN, 1.0, m, 10, 10).unwrap();
            assert_eq!(g.gain, ExtInt::Finite(10 - m as i64));
            assert!(g.exact);
        }
        assert!(u_bar_relative(&OPEN, 1.0, 4, 4, 4).is_err());
    }

    #[test]
    fn cluster_extremes() {
        let c = explore_cluster(&EnvField::new(5), 0.0, SiteR::origin(), 6).unwrap();
        assert_eq!(c.sites, vec![SiteR::origin()]);
        assert!(!c.survived);
        let c = explore_cluster(&OPEN, 1.0, SiteR::origin(), 6).unwrap();
        let expected: usize = (0..=6).map(|k| k + 1).sum();
        assert_eq!(c.sites.len(), expected);
        assert!(c.survived);
        // column 0 is the top diagonal m = n, reaching reflected height 6
        assert_eq!(c.w[0], Some(6));
        assert_eq!(c.v[0], Some(0));
        assert_eq!(c.w[3], Some(3));
        assert_eq!(c.v[3], Some(0));
    }

    #[test]
    fn boundary_columns_resolve_and_match_full_exploration() {
        for seed in 0..50 {
            let f = EnvField::new(seed);
            let b = reflected_boundaries(&f, 0.75, 20, 10_000).unwrap();
            assert!(b.resolved);
            let c = explore_cluster(&f, 0.75, SiteR::origin(), b.levels + 40).unwrap();
            for x in 0..=20 {
                assert_eq!(b.w[x], c.w[x], "seed {seed} column {x}");
                assert_eq!(b.v[x], c.v[x], "seed {seed} column {x}");
            }
        }
    }
}
