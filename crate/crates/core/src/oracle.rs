//! Exact small-instance distributions by enumeration.
//!
//! Every enumerator works on an explicit finite graph: the sites a statistic
//! can depend on, found from the light cone (a step changes the height by at
//! most one per level), with the three lattice steps wired up directly.
//! Openness is branched on lazily, only for sites that are reached and whose
//! state can still change the outcome, so the leaf count is far below
//! `2^sites`. Leaves are tallied by `(#open, #closed)` and the probability is
//! evaluated exactly in rationals; every binary64 `p` is a dyadic rational.

use std::collections::{BTreeMap, HashMap};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::block::BlockSpec;
use crate::env::SiteR;
use crate::error::{check_probability, Error, Result};
use crate::ext::ExtInt;
use crate::frontier::{death_time, ubar_path, StarterSpec};
use crate::replicas::{fold_replicas, McConfig};
use crate::stats::binomial_within;

/// Largest number of branchable sites an enumeration accepts.
pub const SITE_LIMIT: usize = 36;

const STEPS: [(i64, i64); 3] = [(1, 1), (2, 0), (1, -1)];

/// Exact distribution over extended integers.
#[derive(Clone, Debug, PartialEq)]
pub struct ExactDist {
    pub support: Vec<ExtInt>,
    pub probs: Vec<BigRational>,
}

fn rat_str(r: &BigRational) -> String {
    if r.is_integer() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

pub fn rat_f64(r: &BigRational) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

impl Serialize for ExactDist {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct Row {
            value: ExtInt,
            prob: String,
            prob_f64: f64,
        }
        let rows: Vec<Row> = self
            .support
            .iter()
            .zip(&self.probs)
            .map(|(v, p)| Row { value: *v, prob: rat_str(p), prob_f64: rat_f64(p) })
            .collect();
        rows.serialize(s)
    }
}

impl ExactDist {
    fn from_map(map: BTreeMap<ExtInt, BigRational>) -> Self {
        let (support, probs) = map.into_iter().unzip();
        ExactDist { support, probs }
    }

    pub fn prob(&self, v: ExtInt) -> BigRational {
        self.support
            .iter()
            .position(|&s| s == v)
            .map_or_else(BigRational::zero, |i| self.probs[i].clone())
    }

    pub fn prob_f64(&self, v: ExtInt) -> f64 {
        rat_f64(&self.prob(v))
    }

    pub fn total(&self) -> BigRational {
        self.probs.iter().fold(BigRational::zero(), |a, b| a + b)
    }

    /// Map every value below `t` to `-inf`.
    pub fn lump_below(&self, t: i64) -> ExactDist {
        let mut map: BTreeMap<ExtInt, BigRational> = BTreeMap::new();
        for (v, p) in self.support.iter().zip(&self.probs) {
            let key = if *v < ExtInt::Finite(t) { ExtInt::NegInf } else { *v };
            *map.entry(key).or_insert_with(BigRational::zero) += p;
        }
        ExactDist::from_map(map)
    }

    /// Mean over finite values, `None` if an infinite value has positive mass.
    pub fn mean(&self) -> Option<BigRational> {
        let mut acc = BigRational::zero();
        for (v, p) in self.support.iter().zip(&self.probs) {
            match v {
                ExtInt::Finite(x) => acc += p * BigRational::from_integer(BigInt::from(*x)),
                _ if p.is_zero() => {}
                _ => return None,
            }
        }
        Some(acc)
    }

    /// `E[X | X >= t]` and `P(X >= t)`.
    pub fn conditional_mean_at_least(&self, t: i64) -> (BigRational, BigRational) {
        let mut mass = BigRational::zero();
        let mut acc = BigRational::zero();
        for (v, p) in self.support.iter().zip(&self.probs) {
            if let ExtInt::Finite(x) = v {
                if *x >= t {
                    mass += p;
                    acc += p * BigRational::from_integer(BigInt::from(*x));
                }
            }
        }
        let mean = if mass.is_zero() { BigRational::zero() } else { acc / &mass };
        (mean, mass)
    }
}

/// Explicit site graph with up to two reachability layers.
struct Net {
    sites: Vec<SiteR>,
    /// `succ[layer][i]`: successor bits of site `i` usable by that layer.
    succ: Vec<Vec<u128>>,
}

impl Net {
    /// Edges of a layer join members of its region and leave operable sites only.
    fn new(
        mut sites: Vec<SiteR>,
        regions: &[&dyn Fn(SiteR) -> bool],
        operable: impl Fn(SiteR) -> bool,
    ) -> Result<Self> {
        sites.sort_by_key(|s| (s.n, s.m));
        sites.dedup();
        if sites.len() > 128 {
            return Err(Error::TooLarge { sites: sites.len(), limit: 128 });
        }
        let index: HashMap<SiteR, usize> = sites.iter().enumerate().map(|(i, s)| (*s, i)).collect();
        let succ = regions
            .iter()
            .map(|inside| {
                sites
                    .iter()
                    .map(|s| {
                        if !inside(*s) || !operable(*s) {
                            return 0;
                        }
                        STEPS.iter().fold(0u128, |acc, (dn, dm)| {
                            let t = SiteR { n: s.n + dn, m: s.m + dm };
                            match index.get(&t) {
                                Some(&j) if inside(t) => acc | 1u128 << j,
                                _ => acc,
                            }
                        })
                    })
                    .collect()
            })
            .collect();
        Ok(Net { sites, succ })
    }

    fn bits(&self, pred: impl Fn(SiteR) -> bool) -> u128 {
        self.sites.iter().enumerate().filter(|(_, s)| pred(**s)).fold(0, |a, (i, _)| a | 1 << i)
    }

    /// Sites that could ever be branched on: those with a successor in some layer.
    fn branchable(&self) -> usize {
        (0..self.sites.len()).filter(|&i| self.succ.iter().any(|l| l[i] != 0)).count()
    }
}

type Tally<K> = BTreeMap<K, BTreeMap<(u32, u32), u64>>;

struct Walk<'a, K, S, C> {
    net: &'a Net,
    settled: S,
    classify: C,
    tally: Tally<K>,
}

impl<K: Ord, S: Fn(usize, u128) -> bool, C: Fn(&[u128]) -> K> Walk<'_, K, S, C> {
    fn go(&mut self, i: usize, layers: &mut Vec<u128>, open: u32, closed: u32) {
        if i == self.net.sites.len() {
            let key = (self.classify)(layers);
            *self.tally.entry(key).or_default().entry((open, closed)).or_insert(0) += 1;
            return;
        }
        let bit = 1u128 << i;
        let active: Vec<usize> = (0..layers.len())
            .filter(|&l| layers[l] & bit != 0 && self.net.succ[l][i] != 0 && !(self.settled)(l, layers[l]))
            .collect();
        if active.is_empty() {
            self.go(i + 1, layers, open, closed);
            return;
        }
        let saved = layers.clone();
        for &l in &active {
            layers[l] |= self.net.succ[l][i];
        }
        self.go(i + 1, layers, open + 1, closed);
        layers.copy_from_slice(&saved);
        self.go(i + 1, layers, open, closed + 1);
    }
}

fn enumerate<K: Ord>(
    net: &Net,
    start: Vec<u128>,
    settled: impl Fn(usize, u128) -> bool,
    classify: impl Fn(&[u128]) -> K,
) -> Result<Tally<K>> {
    let b = net.branchable();
    if b > SITE_LIMIT {
        return Err(Error::TooLarge { sites: b, limit: SITE_LIMIT });
    }
    let mut walk = Walk { net, settled, classify, tally: BTreeMap::new() };
    let mut layers = start;
    walk.go(0, &mut layers, 0, 0);
    Ok(walk.tally)
}

fn pow(r: &BigRational, e: u32) -> BigRational {
    num_traits::pow(r.clone(), e as usize)
}

fn weigh<K: Ord + Clone>(tally: &Tally<K>, p: f64) -> BTreeMap<K, BigRational> {
    let pr = BigRational::from_float(p).expect("finite p");
    let qr = BigRational::one() - &pr;
    let mut cache: HashMap<(u32, u32), BigRational> = HashMap::new();
    tally
        .iter()
        .map(|(k, counts)| {
            let mut total = BigRational::zero();
            for (&(a, b), &c) in counts {
                let w = cache.entry((a, b)).or_insert_with(|| pow(&pr, a) * pow(&qr, b));
                total += &*w * BigRational::from_integer(BigInt::from(c));
            }
            (k.clone(), total)
        })
        .collect()
}

/// Sites reachable from `starts` along any steps, up to level `last`.
fn light_cone(starts: &[SiteR], last: i64) -> Vec<SiteR> {
    let mut seen: std::collections::BTreeSet<(i64, i64)> = starts.iter().map(|s| (s.n, s.m)).collect();
    let mut stack: Vec<SiteR> = starts.to_vec();
    while let Some(s) = stack.pop() {
        for (dn, dm) in STEPS {
            let t = SiteR { n: s.n + dn, m: s.m + dm };
            if t.n <= last && seen.insert((t.n, t.m)) {
                stack.push(t);
            }
        }
    }
    seen.into_iter().map(|(n, m)| SiteR { n, m }).collect()
}

/// Distribution of the death time of the origin's frontier over
/// `1..=n_max`, with `+inf` standing for "alive at level `n_max`".
pub fn exact_tau_dist(p: f64, n_max: usize) -> Result<ExactDist> {
    check_probability(p)?;
    if n_max < 1 {
        return Err(Error::InvalidArgument("n_max must be >= 1".into()));
    }
    let last = n_max as i64;
    let operable = |s: SiteR| s.n < last;
    let sites = light_cone(&[SiteR::origin()], last);
    let net = Net::new(sites, &[&|_| true], operable)?;
    let levels: Vec<u128> = (0..=last).map(|k| net.bits(|s| s.n == k)).collect();
    let start = vec![net.bits(|s| s == SiteR::origin())];
    let tally = enumerate(&net, start, |_, _| false, |l| {
        (1..=last)
            .find(|&k| l[0] & levels[k as usize] == 0)
            .map_or(ExtInt::PosInf, ExtInt::Finite)
    })?;
    Ok(ExactDist::from_map(weigh(&tally, p)))
}

fn starter_sites(start: &StarterSpec) -> Vec<SiteR> {
    let mut v: Vec<SiteR> = start.column0.iter().map(|&m| SiteR { n: 0, m }).collect();
    v.extend(start.column1.iter().map(|&m| SiteR { n: 1, m }));
    v
}

/// Distribution of `sup xi_n^A` for the given starters (no truncation is
/// applied; a cut half-line is simply a finite starter set here).
pub fn exact_dist_u(p: f64, n: usize, start: &StarterSpec) -> Result<ExactDist> {
    check_probability(p)?;
    start.validate()?;
    if n < 1 {
        return Err(Error::InvalidArgument("n must be >= 1".into()));
    }
    let last = n as i64;
    let starts = starter_sites(start);
    let operable = |s: SiteR| s.n < last;
    let net = Net::new(light_cone(&starts, last), &[&|_| true], operable)?;
    let top: Vec<(usize, i64)> =
        net.sites.iter().enumerate().filter(|(_, s)| s.n == last).map(|(i, s)| (i, s.m)).collect();
    let start_bits = vec![net.bits(|s| starts.contains(&s))];
    let tally = enumerate(&net, start_bits, |_, _| false, |l| {
        top.iter()
            .filter(|(i, _)| l[0] >> i & 1 == 1)
            .map(|&(_, m)| ExtInt::Finite(m))
            .max()
            .unwrap_or(ExtInt::NegInf)
    })?;
    Ok(ExactDist::from_map(weigh(&tally, p)))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExactAlpha {
    pub p: f64,
    pub n: usize,
    pub k: i64,
    /// `P(ubar_j >= -k for all j <= n)`.
    pub untruncated: String,
    pub untruncated_f64: f64,
    /// `E[ubar_n / n]` on that event.
    pub alpha_n: String,
    pub alpha_n_f64: f64,
}

/// Exact counterpart of the Monte Carlo `alpha_n`: the mean of `ubar_n / n`
/// over configurations whose edge stays at or above `-k` through level `n`.
/// Starters below `-k-n` cannot affect that event or the value on it.
pub fn exact_alpha_n(p: f64, n: usize, k: i64) -> Result<ExactAlpha> {
    check_probability(p)?;
    if n < 1 || k < 0 {
        return Err(Error::InvalidArgument("need n >= 1 and k >= 0".into()));
    }
    let last = n as i64;
    let start = StarterSpec::below(0, -k - last);
    let starts = starter_sites(&start);
    let operable = |s: SiteR| s.n < last;
    let net = Net::new(light_cone(&starts, last), &[&|_| true], operable)?;
    let levels: Vec<Vec<(usize, i64)>> = (0..=last)
        .map(|j| net.sites.iter().enumerate().filter(|(_, s)| s.n == j).map(|(i, s)| (i, s.m)).collect())
        .collect();
    let start_bits = vec![net.bits(|s| starts.contains(&s))];
    let tally = enumerate(&net, start_bits, |_, _| false, |l| {
        let sup = |j: usize| levels[j].iter().filter(|(i, _)| l[0] >> i & 1 == 1).map(|&(_, m)| m).max();
        let good = (1..=n).all(|j| sup(j).is_some_and(|u| u >= -k));
        good.then(|| sup(n).unwrap())
    })?;
    let w = weigh(&tally, p);
    let mut mass = BigRational::zero();
    let mut acc = BigRational::zero();
    for (key, pr) in &w {
        if let Some(u) = key {
            mass += pr;
            acc += pr * BigRational::from_integer(BigInt::from(*u));
        }
    }
    let alpha = if mass.is_zero() {
        BigRational::zero()
    } else {
        acc / (&mass * BigRational::from_integer(BigInt::from(last)))
    };
    Ok(ExactAlpha {
        p,
        n,
        k,
        untruncated_f64: rat_f64(&mass),
        untruncated: rat_str(&mass),
        alpha_n_f64: rat_f64(&alpha),
        alpha_n: rat_str(&alpha),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    /// The lower bound already reaches `2p`.
    Certified,
    /// The upper bound is below `2p`.
    Refuted,
    /// The window is too small to decide.
    Inconclusive,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AddingPoints {
    pub p: f64,
    pub n: usize,
    pub slack: usize,
    /// Exact lower bound on `E[u^n_{C+o}] - E[u^n_C]`; equal to it at `n = 0`.
    pub gap_lower: String,
    pub gap_lower_f64: f64,
    /// Exact upper bound, absent when it is infinite.
    pub gap_upper: Option<String>,
    pub gap_upper_f64: f64,
    pub verdict: Verdict,
}

impl AddingPoints {
    /// `gap >= 2p` shown in exact arithmetic.
    pub fn holds(&self) -> bool {
        self.verdict == Verdict::Certified
    }
}

/// Gap from adding the origin to `C = {(i, j) : i in {0, 1}, j < 0}`.
///
/// The gain is `(u_o - u_C)^+`. Only starters of `C` that can reach height
/// `>= f = -n-2-2*slack` at level `n` are simulated; call their edge `u_W`.
/// Then `u_W <= u_C`, with equality once `u_W >= f`, so
/// `(u_o - max(u_W, f))^+ <= gain <= (u_o - u_W)^+` per configuration and the
/// two means bracket the gap, the lower one tightening as `slack` grows.
pub fn exact_addingpoints(p: f64, n: usize, slack: usize) -> Result<AddingPoints> {
    check_probability(p)?;
    let ni = n as i64;
    let floor = -ni - 2 - 2 * slack as i64;
    let mut c_sites: Vec<SiteR> = (1..)
        .map(|k| SiteR { n: 0, m: -2 * k })
        .take_while(|s| s.m + ni >= floor)
        .collect();
    if n >= 1 {
        c_sites.extend((0..).map(|k| SiteR { n: 1, m: -1 - 2 * k }).take_while(|s| s.m + ni > floor));
    }
    let mut all = c_sites.clone();
    all.push(SiteR::origin());
    let operable = |s: SiteR| s.n < ni;
    let net = Net::new(light_cone(&all, ni), &[&|_| true, &|_| true], operable)?;
    let top: Vec<(usize, i64)> =
        net.sites.iter().enumerate().filter(|(_, s)| s.n == ni).map(|(i, s)| (i, s.m)).collect();
    let start = vec![net.bits(|s| s == SiteR::origin()), net.bits(|s| c_sites.contains(&s))];
    let tally = enumerate(&net, start, |_, _| false, |l| {
        let sup = |mask: u128| top.iter().filter(|(i, _)| mask >> i & 1 == 1).map(|&(_, m)| m).max();
        let (uo, uw) = (sup(l[0]), sup(l[1]));
        let lower = uo.map_or(0, |u| (u - uw.unwrap_or(floor).max(floor)).max(0));
        let upper = match (uo, uw) {
            (None, _) => Some(0),
            (Some(u), Some(w)) => Some((u - w).max(0)),
            (Some(_), None) => None,
        };
        (lower, upper)
    })?;
    let w = weigh(&tally, p);
    let int = |k: i64| BigRational::from_integer(BigInt::from(k));
    let mut lo = BigRational::zero();
    let mut hi = Some(BigRational::zero());
    for ((l, u), pr) in &w {
        lo += pr * int(*l);
        hi = match (hi, u) {
            (Some(h), Some(u)) => Some(h + pr * int(*u)),
            (h, None) if pr.is_zero() => h,
            _ => None,
        };
    }
    let two_p = BigRational::from_float(p).unwrap() * int(2);
    let verdict = if lo >= two_p {
        Verdict::Certified
    } else if hi.as_ref().is_some_and(|h| *h < two_p) {
        Verdict::Refuted
    } else {
        Verdict::Inconclusive
    };
    Ok(AddingPoints {
        p,
        n,
        slack,
        gap_lower_f64: rat_f64(&lo),
        gap_lower: rat_str(&lo),
        gap_upper_f64: hi.as_ref().map_or(f64::INFINITY, rat_f64),
        gap_upper: hi.as_ref().map(rat_str),
        verdict,
    })
}

pub const DEFAULT_SLACK: usize = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Segment {
    NE,
    NW,
    SW,
    SE,
}

impl Segment {
    pub const ALL: [Segment; 4] = [Segment::NE, Segment::NW, Segment::SW, Segment::SE];

    pub fn delta(self) -> (i64, i64) {
        match self {
            Segment::NE => (1, 1),
            Segment::NW => (-1, 1),
            Segment::SW => (-1, -1),
            Segment::SE => (1, -1),
        }
    }

    pub fn reverse(self) -> Segment {
        match self {
            Segment::NE => Segment::SW,
            Segment::NW => Segment::SE,
            Segment::SW => Segment::NE,
            Segment::SE => Segment::NW,
        }
    }
}

/// A contour word; valid when no segment immediately reverses the previous one.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContourWord {
    pub segments: Vec<Segment>,
}

impl ContourWord {
    pub fn is_valid(&self) -> bool {
        self.segments.windows(2).all(|w| w[1] != w[0].reverse())
    }

    /// `(m1 + m4 - m2 - m3, m1 + m2 - m3 - m4)`.
    pub fn displacement(&self) -> (i64, i64) {
        self.segments.iter().fold((0, 0), |(x, y), s| {
            let (dx, dy) = s.delta();
            (x + dx, y + dy)
        })
    }
}

pub const CONTOUR_LIMIT: usize = 18;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContourCount {
    pub m: usize,
    pub first_fixed: bool,
    pub no_reversal: u64,
    /// Words with the requested displacement, if one was given.
    pub balanced: Option<u64>,
    /// `3^(m-1)`.
    pub bound: u64,
}

/// Count non-reversing words of length `m`, optionally with the first
/// segment fixed to NE and with a target displacement.
pub fn count_contours(m: usize, first_fixed: bool, target: Option<(i64, i64)>) -> Result<ContourCount> {
    if m == 0 || m > CONTOUR_LIMIT {
        return Err(Error::TooLarge { sites: m, limit: CONTOUR_LIMIT });
    }
    // state: (last segment, displacement) -> count
    let mut states: HashMap<(Segment, i64, i64), u64> = HashMap::new();
    let firsts: &[Segment] = if first_fixed { &[Segment::NE] } else { &Segment::ALL };
    for &s in firsts {
        let (dx, dy) = s.delta();
        states.insert((s, dx, dy), 1);
    }
    for _ in 1..m {
        let mut next: HashMap<(Segment, i64, i64), u64> = HashMap::new();
        for (&(last, x, y), &c) in &states {
            for s in Segment::ALL {
                if s == last.reverse() {
                    continue;
                }
                let (dx, dy) = s.delta();
                *next.entry((s, x + dx, y + dy)).or_insert(0) += c;
            }
        }
        states = next;
    }
    let no_reversal = states.values().sum();
    let balanced = target.map(|(tx, ty)| {
        states.iter().filter(|(&(_, x, y), _)| x == tx && y == ty).map(|(_, &c)| c).sum()
    });
    Ok(ContourCount { m, first_fixed, no_reversal, balanced, bound: 3u64.pow(m as u32 - 1) })
}

/// All valid words of length `m` (brute force; small `m` only).
pub fn enumerate_contours(m: usize, first_fixed: bool) -> Vec<ContourWord> {
    let mut out = Vec::new();
    let mut word = Vec::with_capacity(m);
    fn rec(m: usize, first_fixed: bool, word: &mut Vec<Segment>, out: &mut Vec<ContourWord>) {
        if word.len() == m {
            out.push(ContourWord { segments: word.clone() });
            return;
        }
        for s in Segment::ALL {
            if word.is_empty() && first_fixed && s != Segment::NE {
                continue;
            }
            if word.last().is_some_and(|l| l.reverse() == s) {
                continue;
            }
            word.push(s);
            rec(m, first_fixed, word, out);
            word.pop();
        }
    }
    rec(m, first_fixed, &mut word, &mut out);
    out
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CrossingExact {
    pub spec: BlockSpec,
    pub p: f64,
    pub sites: usize,
    pub up: String,
    pub down: String,
    pub both: String,
    pub up_f64: f64,
    pub down_f64: f64,
    pub both_f64: f64,
}

/// Exact `P(H_up)`, `P(H_down)` and `P(G)` for block `(0, 0)`.
pub fn exact_crossing(p: f64, spec: &BlockSpec) -> Result<CrossingExact> {
    check_probability(p)?;
    spec.validate()?;
    let in_a = |s: SiteR| spec.contains(0, 0, false, s);
    let in_b = |s: SiteR| spec.contains(0, 0, true, s);
    let mut sites = spec.sites(0, 0, false);
    sites.extend(spec.sites(0, 0, true));
    let net = Net::new(sites, &[&in_a, &in_b], |_| true)?;
    let left = |mirror| {
        let l = spec.left_sites(0, 0, mirror);
        net.bits(|s| l.contains(&s))
    };
    let right = |mirror| {
        let r = spec.right_sites(0, 0, mirror);
        net.bits(|s| r.contains(&s))
    };
    let targets = [right(false), right(true)];
    let tally = enumerate(
        &net,
        vec![left(false), left(true)],
        |l, mask| mask & targets[l] != 0,
        |l| (l[0] & targets[0] != 0, l[1] & targets[1] != 0),
    )?;
    let w = weigh(&tally, p);
    let sum = |f: &dyn Fn(bool, bool) -> bool| {
        w.iter().filter(|((a, b), _)| f(*a, *b)).fold(BigRational::zero(), |acc, (_, v)| acc + v)
    };
    let up = sum(&|a, _| a);
    let down = sum(&|_, b| b);
    let both = sum(&|a, b| a && b);
    Ok(CrossingExact {
        spec: *spec,
        p,
        sites: net.sites.len(),
        up_f64: rat_f64(&up),
        down_f64: rat_f64(&down),
        both_f64: rat_f64(&both),
        up: rat_str(&up),
        down: rat_str(&down),
        both: rat_str(&both),
    })
}

/// One support point of an oracle-versus-Monte-Carlo comparison.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ComparisonRow {
    pub label: String,
    pub value: String,
    pub exact: f64,
    pub observed: f64,
    /// Null standard error `sqrt(p0 (1 - p0) / replicas)`.
    pub se: f64,
    pub ok: bool,
}

fn compare_counts(label: &str, exact: &ExactDist, counts: &BTreeMap<ExtInt, u64>, replicas: usize) -> Vec<ComparisonRow> {
    let mut values: Vec<ExtInt> = exact.support.clone();
    values.extend(counts.keys().copied());
    values.sort();
    values.dedup();
    values
        .into_iter()
        .map(|v| {
            let p0 = exact.prob_f64(v);
            let c = counts.get(&v).copied().unwrap_or(0);
            ComparisonRow {
                label: label.to_string(),
                value: v.to_string(),
                exact: p0,
                observed: c as f64 / replicas as f64,
                se: (p0 * (1.0 - p0) / replicas as f64).sqrt(),
                ok: binomial_within(c, replicas as u64, p0, crate::estimators::Z),
            }
        })
        .collect()
}

fn count_by<F>(cfg: &McConfig, f: F) -> Result<BTreeMap<ExtInt, u64>>
where
    F: Fn(&crate::env::EnvField) -> ExtInt + Sync + Send,
{
    fold_replicas(
        cfg,
        BTreeMap::new,
        |a: &mut BTreeMap<ExtInt, u64>, _, env| *a.entry(f(env)).or_insert(0) += 1,
        |a, b| b.into_iter().for_each(|(k, v)| *a.entry(k).or_insert(0) += v),
    )
}

/// Monte Carlo death times against [`exact_tau_dist`].
pub fn compare_tau(p: f64, n_max: usize, cfg: &McConfig) -> Result<Vec<ComparisonRow>> {
    let exact = exact_tau_dist(p, n_max)?;
    let counts = count_by(cfg, |env| death_time(env, p, n_max).expect("validated"))?;
    Ok(compare_counts("tau", &exact, &counts, cfg.replicas))
}

/// Monte Carlo `ubar_n` (cut at depth `k`, values below `-k` lumped)
/// against [`exact_dist_u`] on the same starters.
pub fn compare_u(p: f64, n: usize, k: i64, cfg: &McConfig) -> Result<Vec<ComparisonRow>> {
    let exact = exact_dist_u(p, n, &StarterSpec::below(0, -k - n as i64))?.lump_below(-k);
    let counts = count_by(cfg, |env| {
        let (u, _) = ubar_path(env, p, n, k).expect("validated");
        if u[n] < ExtInt::Finite(-k) {
            ExtInt::NegInf
        } else {
            u[n]
        }
    })?;
    Ok(compare_counts(&format!("ubar_{n}"), &exact, &counts, cfg.replicas))
}

/// Monte Carlo crossing frequencies of block `(0, 0)` against [`exact_crossing`].
pub fn compare_crossing(p: f64, spec: &BlockSpec, cfg: &McConfig) -> Result<Vec<ComparisonRow>> {
    let exact = exact_crossing(p, spec)?;
    let mc = crate::block::crossing_frequencies(p, spec, cfg)?;
    let n = cfg.replicas as u64;
    Ok([("up", exact.up_f64, mc.up), ("down", exact.down_f64, mc.down), ("both", exact.both_f64, mc.both)]
        .into_iter()
        .map(|(label, p0, m)| {
            let c = (m.mean * n as f64).round() as u64;
            ComparisonRow {
                label: format!("crossing_{label}"),
                value: "1".into(),
                exact: p0,
                observed: m.mean,
                se: (p0 * (1.0 - p0) / n as f64).sqrt(),
                ok: binomial_within(c, n, p0, crate::estimators::Z),
            }
        })
        .collect())
}
