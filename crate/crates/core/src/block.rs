//! Block renormalization: interlocking parallelograms, the crossing events
//! and the induced `eta` site system on the square lattice.

use std::collections::{HashMap, HashSet, VecDeque};

use num_bigint::BigInt;
use num_rational::{BigRational, Rational64};
use num_traits::{One, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::env::{Environment, SiteR};
use crate::error::{check_probability, Error, Result};
use crate::frontier::FrontierState;
use crate::replicas::{fold_replicas, McConfig};
use crate::stats::{proportion, Accum, MeanSe};

pub type Q = Rational64;

fn q(n: i64) -> Q {
    Q::from_integer(n)
}

fn half() -> Q {
    Q::new(1, 2)
}

/// Parse a decimal such as `"0.75"` or a ratio `"3/4"` exactly.
pub fn parse_rational(s: &str) -> Result<Q> {
    let s = s.trim();
    let bad = || Error::BlockSpec(format!("not a decimal or ratio: {s:?}"));
    if let Some((a, b)) = s.split_once('/') {
        let a: i64 = a.trim().parse().map_err(|_| bad())?;
        let b: i64 = b.trim().parse().map_err(|_| bad())?;
        if b == 0 {
            return Err(bad());
        }
        return Ok(Q::new(a, b));
    }
    let (neg, body) = match s.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, s),
    };
    let (int, frac) = body.split_once('.').unwrap_or((body, ""));
    if int.is_empty() && frac.is_empty() || frac.len() > 15 {
        return Err(bad());
    }
    let digits = format!("{int}{frac}");
    if !digits.chars().all(|c| c.is_ascii_digit()) {
        return Err(bad());
    }
    let num: i64 = digits.parse().map_err(|_| bad())?;
    let v = Q::new(num, 10i64.pow(frac.len() as u32));
    Ok(if neg { -v } else { v })
}

/// Exact rational for a binary64 value, via its shortest decimal rendering.
pub fn rational_from_f64(x: f64) -> Result<Q> {
    if !x.is_finite() {
        return Err(Error::BlockSpec(format!("non-finite parameter {x}")));
    }
    parse_rational(&format!("{x}"))
}

fn q_f64(x: Q) -> f64 {
    *x.numer() as f64 / *x.denom() as f64
}

fn q_str(x: Q) -> String {
    if x.is_integer() {
        x.numer().to_string()
    } else {
        format!("{}/{}", x.numer(), x.denom())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct BlockSpec {
    alpha: Q,
    delta: Q,
    l: i64,
}

impl Serialize for BlockSpec {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        use serde::ser::SerializeStruct;
        let mut st = s.serialize_struct("BlockSpec", 3)?;
        st.serialize_field("alpha", &q_str(self.alpha))?;
        st.serialize_field("delta", &q_str(self.delta))?;
        st.serialize_field("L", &self.l)?;
        st.end()
    }
}

impl BlockSpec {
    pub fn new(alpha: Q, delta: Q, l: i64) -> Result<Self> {
        let s = BlockSpec { alpha, delta, l };
        s.validate()?;
        Ok(s)
    }

    /// Construct without checking the invariants; for probing what breaks.
    pub fn new_unchecked(alpha: Q, delta: Q, l: i64) -> Self {
        BlockSpec { alpha, delta, l }
    }

    pub fn parse(alpha: &str, delta: &str, l: i64) -> Result<Self> {
        Self::new(parse_rational(alpha)?, parse_rational(delta)?, l)
    }

    pub fn from_f64(alpha: f64, delta: f64, l: i64) -> Result<Self> {
        Self::new(rational_from_f64(alpha)?, rational_from_f64(delta)?, l)
    }

    pub fn validate(&self) -> Result<()> {
        let (a, d, l) = (self.alpha, self.delta, self.l);
        if !(a > Q::zero() && a <= Q::one()) {
            return Err(Error::BlockSpec(format!("alpha must lie in (0,1], got {}", q_str(a))));
        }
        if !(d > Q::zero() && d < Q::new(1, 4)) {
            return Err(Error::BlockSpec(format!("delta must lie in (0,1/4), got {}", q_str(d))));
        }
        if l <= 0 || l % 2 != 0 {
            return Err(Error::BlockSpec(format!("L must be a positive even integer, got {l}")));
        }
        let h = self.step();
        if !h.is_integer() || h.numer() % 2 != 0 {
            return Err(Error::BlockSpec(format!(
                "(1-delta)*alpha*L must be an even integer, got {}",
                q_str(h)
            )));
        }
        Ok(())
    }

    pub fn alpha(&self) -> Q {
        self.alpha
    }

    pub fn delta(&self) -> Q {
        self.delta
    }

    pub fn l(&self) -> i64 {
        self.l
    }

    /// `(1 - delta) alpha L`, the vertical spacing of block centres.
    pub fn step(&self) -> Q {
        (Q::one() - self.delta) * self.alpha * q(self.l)
    }

    /// `(1 + delta) L`, the block width.
    pub fn width(&self) -> Q {
        (Q::one() + self.delta) * q(self.l)
    }

    fn dal(&self) -> Q {
        self.delta * self.alpha * q(self.l)
    }

    pub fn center(&self, n: i64, m: i64) -> (Q, Q) {
        (q(self.l * n), self.step() * q(m))
    }

    pub fn rect(&self, n: i64, m: i64) -> Rect {
        let (cx, cy) = self.center(n, m);
        let h = (Q::one() + self.delta * half()) * self.alpha * q(self.l);
        Rect { x0: cx, x1: cx + self.width(), y0: cy - h, y1: cy + h }
    }

    /// Vertices `[w0, w1, v0, v1]` of `A_{n,m}`; `mirror` gives `B_{n,m}`.
    pub fn parallelogram(&self, n: i64, m: i64, mirror: bool) -> [(Q, Q); 4] {
        let (cx, cy) = self.center(n, m);
        let w0 = -Q::new(3, 2) * self.dal();
        let v0 = -half() * self.dal();
        let rise = self.alpha * self.width();
        let sgn = if mirror { -Q::one() } else { Q::one() };
        let w = self.width();
        [
            (cx, cy + sgn * w0),
            (cx + w, cy + sgn * (w0 + rise)),
            (cx, cy + sgn * v0),
            (cx + w, cy + sgn * (v0 + rise)),
        ]
    }

    /// Closed membership of a lattice point in `A_{n,m}` (or `B_{n,m}`).
    pub fn contains(&self, n: i64, m: i64, mirror: bool, site: SiteR) -> bool {
        let (cx, cy) = self.center(n, m);
        let dx = q(site.n) - cx;
        if dx < Q::zero() || dx > self.width() {
            return false;
        }
        let mut dy = q(site.m) - cy;
        if mirror {
            dy = -dy;
        }
        let base = self.alpha * dx;
        dy >= base - Q::new(3, 2) * self.dal() && dy <= base - half() * self.dal()
    }

    /// Last lattice column of a block, `floor(C.x + (1 + delta) L)`.
    pub fn right_column(&self, n: i64) -> i64 {
        (q(self.l * n) + self.width()).floor().to_integer()
    }

    /// Lattice sites of `A_{n,m}` (or `B_{n,m}`) ordered by level then height.
    pub fn sites(&self, n: i64, m: i64, mirror: bool) -> Vec<SiteR> {
        let r = self.rect(n, m);
        let x0 = r.x0.ceil().to_integer().max(0);
        let x1 = self.right_column(n);
        let mut out = Vec::new();
        for x in x0..=x1 {
            let y0 = r.y0.ceil().to_integer();
            let y1 = r.y1.floor().to_integer();
            for y in y0..=y1 {
                let s = SiteR { n: x, m: y };
                if s.is_valid() && self.contains(n, m, mirror, s) {
                    out.push(s);
                }
            }
        }
        out
    }

    /// Sites at offset 0 or 1 from the left edge.
    pub fn left_sites(&self, n: i64, m: i64, mirror: bool) -> Vec<SiteR> {
        let x0 = self.l * n;
        self.sites(n, m, mirror).into_iter().filter(|s| s.n <= x0 + 1).collect()
    }

    pub fn right_sites(&self, n: i64, m: i64, mirror: bool) -> Vec<SiteR> {
        let x1 = self.right_column(n);
        self.sites(n, m, mirror).into_iter().filter(|s| s.n == x1).collect()
    }

    /// Lattice sites of `R_{n,m}`, on which `eta(n, m)` depends.
    pub fn footprint_sites(&self, n: i64, m: i64) -> Vec<SiteR> {
        let r = self.rect(n, m);
        let mut out = Vec::new();
        for x in r.x0.ceil().to_integer().max(0)..=r.x1.floor().to_integer() {
            for y in r.y0.ceil().to_integer()..=r.y1.floor().to_integer() {
                let s = SiteR { n: x, m: y };
                if s.is_valid() {
                    out.push(s);
                }
            }
        }
        out
    }
}

/// Closed axis-parallel rectangle.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Rect {
    pub x0: Q,
    pub x1: Q,
    pub y0: Q,
    pub y1: Q,
}

impl Rect {
    pub fn intersects(&self, o: &Rect) -> bool {
        self.x0 <= o.x1 && o.x0 <= self.x1 && self.y0 <= o.y1 && o.y0 <= self.y1
    }

    pub fn contains(&self, x: Q, y: Q) -> bool {
        self.x0 <= x && x <= self.x1 && self.y0 <= y && y <= self.y1
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Point {
    pub x: String,
    pub y: String,
    pub x_f64: f64,
    pub y_f64: f64,
}

impl Point {
    fn of((x, y): (Q, Q)) -> Self {
        Point { x: q_str(x), y: q_str(y), x_f64: q_f64(x), y_f64: q_f64(y) }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BlockGeometry {
    pub spec: BlockSpec,
    pub n: i64,
    pub m: i64,
    pub center: Point,
    /// Corners `(x0, y0)` and `(x1, y1)`.
    pub rect: [Point; 2],
    /// `w0, w1, v0, v1`.
    pub a_vertices: [Point; 4],
    pub b_vertices: [Point; 4],
    pub right_column: i64,
    pub right_convention: &'static str,
}

pub const RIGHT_CONVENTION: &str = "right column = floor(C.x + (1+delta)L), sites inside the closed parallelogram";

pub fn block_geometry(spec: &BlockSpec, n: i64, m: i64) -> Result<BlockGeometry> {
    spec.validate()?;
    let r = spec.rect(n, m);
    let pts = |mirror| spec.parallelogram(n, m, mirror).map(Point::of);
    Ok(BlockGeometry {
        spec: *spec,
        n,
        m,
        center: Point::of(spec.center(n, m)),
        rect: [Point::of((r.x0, r.y0)), Point::of((r.x1, r.y1))],
        a_vertices: pts(false),
        b_vertices: pts(true),
        right_column: spec.right_column(n),
        right_convention: RIGHT_CONVENTION,
    })
}

/// The translates allowed to share sites with a block.
pub const NEIGHBOR_OFFSETS: [(i64, i64); 6] = [(0, 2), (0, -2), (1, 1), (1, -1), (-1, 1), (-1, -1)];

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FootprintReport {
    pub range: i64,
    pub pairs_checked: u64,
    /// First few offending pairs `((n, m), (n', m'))`.
    pub violations: Vec<((i64, i64), (i64, i64))>,
    pub violation_count: u64,
    /// Largest number of other blocks whose rectangle meets a given one.
    pub max_overlaps: usize,
    pub ok: bool,
}

/// Check that `R_z` meets `R_z'` only for `z' - z` among [`NEIGHBOR_OFFSETS`],
/// over all block sites with `|n|, |m| <= range`.
pub fn check_dependence_footprint(spec: &BlockSpec, range: i64) -> FootprintReport {
    let blocks: Vec<(i64, i64)> = (-range..=range)
        .flat_map(|n| (-range..=range).map(move |m| (n, m)))
        .filter(|(n, m)| (n + m).rem_euclid(2) == 0)
        .collect();
    let rects: Vec<Rect> = blocks.iter().map(|&(n, m)| spec.rect(n, m)).collect();
    let mut report = FootprintReport {
        range,
        pairs_checked: 0,
        violations: Vec::new(),
        violation_count: 0,
        max_overlaps: 0,
        ok: true,
    };
    for (i, &(n, m)) in blocks.iter().enumerate() {
        let mut overlaps = 0;
        for (j, &(n2, m2)) in blocks.iter().enumerate() {
            if i == j {
                continue;
            }
            let meets = rects[i].intersects(&rects[j]);
            if meets {
                overlaps += 1;
            }
            if j < i {
                continue;
            }
            report.pairs_checked += 1;
            let allowed = NEIGHBOR_OFFSETS.contains(&(n2 - n, m2 - m));
            if meets && !allowed {
                report.violation_count += 1;
                if report.violations.len() < 16 {
                    report.violations.push(((n, m), (n2, m2)));
                }
            }
        }
        report.max_overlaps = report.max_overlaps.max(overlaps);
    }
    report.ok = report.violation_count == 0;
    report
}

/// Whether some open path inside the parallelogram joins left to right.
pub fn crossing<E: Environment + ?Sized>(
    env: &E,
    p: f64,
    spec: &BlockSpec,
    n: i64,
    m: i64,
    mirror: bool,
) -> bool {
    let left = spec.left_sites(n, m, mirror);
    let x0 = spec.l * n;
    let x1 = spec.right_column(n);
    let col0: Vec<i64> = left.iter().filter(|s| s.n == x0).map(|s| s.m).collect();
    let col1: Vec<i64> = left.iter().filter(|s| s.n == x0 + 1).map(|s| s.m).collect();
    let inside = |lvl: i64, h: i64| spec.contains(n, m, mirror, SiteR { n: lvl, m: h });
    let mut state = FrontierState::new(x0, col0).expect("parallelogram sites lie on the lattice");
    while state.level() < x1 {
        if state.is_empty() && state.prev_open().is_empty() && state.level() > x0 {
            return false;
        }
        state.advance_within(env, p, inside);
        if state.level() == x0 + 1 {
            state.inject(&col1).expect("parity checked by construction");
        }
    }
    !state.is_empty()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EtaSample {
    pub n: i64,
    pub m: i64,
    pub up: bool,
    pub down: bool,
    pub value: bool,
}

/// `eta(n, m)`: both parallelogram crossings of block `(n, m)` occur.
pub fn sample_eta<E: Environment + ?Sized>(env: &E, p: f64, spec: &BlockSpec, n: i64, m: i64) -> EtaSample {
    let up = crossing(env, p, spec, n, m, false);
    let down = crossing(env, p, spec, n, m, true);
    EtaSample { n, m, up, down, value: up && down }
}

fn bfs_path<E: Environment + ?Sized>(
    env: &E,
    p: f64,
    spec: &BlockSpec,
    n: i64,
    m: i64,
    mirror: bool,
) -> Option<Vec<SiteR>> {
    let targets: HashSet<SiteR> = spec.right_sites(n, m, mirror).into_iter().collect();
    let mut parent: HashMap<SiteR, Option<SiteR>> = HashMap::new();
    let mut queue = VecDeque::new();
    for s in spec.left_sites(n, m, mirror) {
        parent.insert(s, None);
        queue.push_back(s);
    }
    while let Some(s) = queue.pop_front() {
        if targets.contains(&s) {
            let mut path = vec![s];
            let mut cur = s;
            while let Some(Some(prev)) = parent.get(&cur) {
                path.push(*prev);
                cur = *prev;
            }
            path.reverse();
            return Some(path);
        }
        if !env.is_open(s.n, s.m, p) {
            continue;
        }
        for t in s.neighbors() {
            if spec.contains(n, m, mirror, t) && !parent.contains_key(&t) {
                parent.insert(t, Some(s));
                queue.push_back(t);
            }
        }
    }
    None
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SpliceOutcome {
    /// `G_{n,m}` and `G_{n+1,m+1}` do not both occur.
    NotApplicable,
    Witness(Vec<SiteR>),
    Failed(String),
}

/// Check that `path` is an open path from a left site of block `(n, m)` to a
/// right site of block `(n + 1, m + 1)`.
pub fn verify_witness<E: Environment + ?Sized>(
    env: &E,
    p: f64,
    spec: &BlockSpec,
    n: i64,
    m: i64,
    path: &[SiteR],
) -> Result<()> {
    let (first, last) = match (path.first(), path.last()) {
        (Some(a), Some(b)) => (*a, *b),
        _ => return Err(Error::SpliceFailed { n, m, reason: "empty path".into() }),
    };
    if !spec.left_sites(n, m, false).contains(&first) {
        return Err(Error::SpliceFailed { n, m, reason: format!("{first:?} is not a left site") });
    }
    if !spec.right_sites(n + 1, m + 1, false).contains(&last) {
        return Err(Error::SpliceFailed { n, m, reason: format!("{last:?} is not a right site") });
    }
    for w in path.windows(2) {
        if !w[0].is_successor(w[1]) {
            return Err(Error::BadPath { from: w[0], to: w[1] });
        }
        if !env.is_open(w[0].n, w[0].m, p) {
            return Err(Error::SpliceFailed { n, m, reason: format!("{:?} is closed", w[0]) });
        }
    }
    Ok(())
}

/// An explicit open path from the left of block `(n, m)` to the right of
/// block `(n + 1, m + 1)` when both blocks are `eta`-open. The downward
/// crossing of the second block meets the upward crossings of both blocks;
/// the path follows the first upward crossing to that meeting point, the
/// downward crossing to the second meeting point, then the second upward
/// crossing.
pub fn splice_witness<E: Environment + ?Sized>(
    env: &E,
    p: f64,
    spec: &BlockSpec,
    n: i64,
    m: i64,
) -> SpliceOutcome {
    let g0 = sample_eta(env, p, spec, n, m);
    let g1 = sample_eta(env, p, spec, n + 1, m + 1);
    if !(g0.value && g1.value) {
        return SpliceOutcome::NotApplicable;
    }
    let paths = (
        bfs_path(env, p, spec, n, m, false),
        bfs_path(env, p, spec, n + 1, m + 1, true),
        bfs_path(env, p, spec, n + 1, m + 1, false),
    );
    let (Some(p1), Some(p2), Some(p3)) = paths else {
        return SpliceOutcome::Failed("crossing path not recovered".into());
    };
    let on1: HashMap<SiteR, usize> = p1.iter().enumerate().map(|(i, s)| (*s, i)).collect();
    let on3: HashMap<SiteR, usize> = p3.iter().enumerate().map(|(i, s)| (*s, i)).collect();
    let Some(k1) = p2.iter().position(|s| on1.contains_key(s)) else {
        return SpliceOutcome::Failed("downward crossing misses the first upward crossing".into());
    };
    let Some(k2) = (k1..p2.len()).find(|&k| on3.contains_key(&p2[k])) else {
        return SpliceOutcome::Failed("downward crossing misses the second upward crossing".into());
    };
    let mut path: Vec<SiteR> = p1[..on1[&p2[k1]]].to_vec();
    path.extend_from_slice(&p2[k1..k2]);
    path.extend_from_slice(&p3[on3[&p2[k2]]..]);
    match verify_witness(env, p, spec, n, m, &path) {
        Ok(()) => SpliceOutcome::Witness(path),
        Err(e) => SpliceOutcome::Failed(e.to_string()),
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpliceReport {
    pub trials: usize,
    /// Trials where `G_{0,0}` and `G_{1,1}` both occur.
    pub occurrences: usize,
    pub verified: usize,
    pub failures: usize,
    /// Replica index and reason of the first failure.
    pub first_failure: Option<(usize, String)>,
}

impl SpliceReport {
    pub fn ok(&self) -> bool {
        self.failures == 0 && self.verified == self.occurrences
    }
}

/// Run [`splice_witness`] at block `(0, 0)` on every replica.
pub fn splice_report(p: f64, spec: &BlockSpec, cfg: &McConfig) -> Result<SpliceReport> {
    check_probability(p)?;
    spec.validate()?;
    let outcomes = crate::replicas::map_replicas(cfg, |_, env| splice_witness(env, p, spec, 0, 0))?;
    let mut rep = SpliceReport { trials: cfg.replicas, occurrences: 0, verified: 0, failures: 0, first_failure: None };
    for (r, o) in outcomes.into_iter().enumerate() {
        match o {
            SpliceOutcome::NotApplicable => {}
            SpliceOutcome::Witness(_) => {
                rep.occurrences += 1;
                rep.verified += 1;
            }
            SpliceOutcome::Failed(why) => {
                rep.occurrences += 1;
                rep.failures += 1;
                rep.first_failure.get_or_insert((r, why));
            }
        }
    }
    Ok(rep)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum EtaMode {
    /// Independent `eta` with the given open rate.
    Synthetic { rate: f64 },
    /// `eta` computed from the underlying site field.
    Underlying { p: f64, spec: BlockSpec },
}

impl<'de> Deserialize<'de> for BlockSpec {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Raw {
            alpha: String,
            delta: String,
            #[serde(rename = "L")]
            l: i64,
        }
        let r = Raw::deserialize(d)?;
        BlockSpec::parse(&r.alpha, &r.delta, r.l).map_err(serde::de::Error::custom)
    }
}

/// One `eta` cluster from the origin on the square lattice.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EtaRun {
    pub survived: bool,
    /// Highest populated level.
    pub last_level: usize,
    pub cluster: Vec<(i64, i64)>,
}

pub fn eta_cluster<E: Environment + ?Sized>(env: &E, mode: &EtaMode, levels: usize) -> Result<EtaRun> {
    if levels < 1 {
        return Err(Error::InvalidArgument("levels must be >= 1".into()));
    }
    match mode {
        EtaMode::Synthetic { rate } => check_probability(*rate)?,
        EtaMode::Underlying { p, spec } => {
            check_probability(*p)?;
            spec.validate()?;
        }
    }
    let eta = |n: i64, m: i64| match mode {
        EtaMode::Synthetic { rate } => env.is_open(n, m, *rate),
        EtaMode::Underlying { p, spec } => sample_eta(env, *p, spec, n, m).value,
    };
    let mut cluster = vec![(0i64, 0i64)];
    let mut cur = vec![0i64];
    let mut last_level = 0;
    for n in 0..levels as i64 {
        let mut next: Vec<i64> = Vec::new();
        for &m in &cur {
            if eta(n, m) {
                next.push(m - 1);
                next.push(m + 1);
            }
        }
        next.sort_unstable();
        next.dedup();
        if next.is_empty() {
            break;
        }
        last_level = n as usize + 1;
        cluster.extend(next.iter().map(|&m| (n + 1, m)));
        cur = next;
    }
    Ok(EtaRun { survived: last_level == levels, last_level, cluster })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EtaSurvival {
    pub levels: usize,
    pub replicas: usize,
    pub survivors: usize,
    pub survival: MeanSe,
    pub mean_cluster_size: f64,
}

pub fn run_eta_percolation(mode: &EtaMode, levels: usize, cfg: &McConfig) -> Result<EtaSurvival> {
    eta_cluster(&crate::env::ConstantEnv(0.0), mode, 1)?;
    let (survivors, size) = fold_replicas(
        cfg,
        || (0usize, 0usize),
        |a, _, env| {
            let run = eta_cluster(env, mode, levels).expect("validated");
            a.0 += run.survived as usize;
            a.1 += run.cluster.len();
        },
        |a, b| {
            a.0 += b.0;
            a.1 += b.1;
        },
    )?;
    Ok(EtaSurvival {
        levels,
        replicas: cfg.replicas,
        survivors,
        survival: proportion(survivors as u64, cfg.replicas as u64),
        mean_cluster_size: size as f64 / cfg.replicas as f64,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CrossingFrequencies {
    pub up: MeanSe,
    pub down: MeanSe,
    pub both: MeanSe,
}

/// Frequencies of the two crossings of block `(0, 0)` and of their intersection.
pub fn crossing_frequencies(p: f64, spec: &BlockSpec, cfg: &McConfig) -> Result<CrossingFrequencies> {
    check_probability(p)?;
    spec.validate()?;
    let c = fold_replicas(
        cfg,
        || [0u64; 3],
        |a, _, env| {
            let e = sample_eta(env, p, spec, 0, 0);
            a[0] += e.up as u64;
            a[1] += e.down as u64;
            a[2] += e.value as u64;
        },
        |a, b| (0..3).for_each(|i| a[i] += b[i]),
    )?;
    let r = cfg.replicas as u64;
    Ok(CrossingFrequencies { up: proportion(c[0], r), down: proportion(c[1], r), both: proportion(c[2], r) })
}

/// Frequency of `eta(n, m) = 1` over replicas.
pub fn eta_frequency(p: f64, spec: &BlockSpec, n: i64, m: i64, cfg: &McConfig) -> Result<MeanSe> {
    check_probability(p)?;
    spec.validate()?;
    let ones = fold_replicas(cfg, || 0u64, |a, _, env| *a += sample_eta(env, p, spec, n, m).value as u64, |a, b| *a += b)?;
    Ok(proportion(ones, cfg.replicas as u64))
}

/// Sample covariance of `eta(a)` and `eta(b)` with its standard error.
pub fn eta_covariance(
    p: f64,
    spec: &BlockSpec,
    a: (i64, i64),
    b: (i64, i64),
    cfg: &McConfig,
) -> Result<MeanSe> {
    check_probability(p)?;
    spec.validate()?;
    let pairs = crate::replicas::map_replicas(cfg, |_, env| {
        let x = sample_eta(env, p, spec, a.0, a.1).value as u8 as f64;
        let y = sample_eta(env, p, spec, b.0, b.1).value as u8 as f64;
        (x, y)
    })?;
    let r = pairs.len() as f64;
    let mx = pairs.iter().map(|v| v.0).sum::<f64>() / r;
    let my = pairs.iter().map(|v| v.1).sum::<f64>() / r;
    let acc: Accum = pairs.iter().map(|&(x, y)| (x - mx) * (y - my)).collect();
    Ok(acc.finish())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PeierlsReport {
    pub eps: f64,
    pub n: u64,
    pub q: Option<f64>,
    /// Per-step decay factor `3 eps^((1-q)/28)`, `q = 0` for the survival form.
    pub factor: f64,
    pub below_one: bool,
    /// `-ln(factor)`.
    pub gamma: f64,
    /// `factor^(2N)`.
    pub bound: f64,
    /// `eps < 3^-28`, decided in exact arithmetic.
    pub survival_threshold_met: bool,
}

/// `eps < 3^-28` for the exact value of the binary64 `eps`.
pub fn survival_threshold_met(eps: f64) -> bool {
    let e = BigRational::from_float(eps).expect("finite eps");
    e * BigRational::from_integer(BigInt::from(3u8).pow(28u32)) < BigRational::one()
}

/// Bound on `P(eta cluster of [0, 2N] dies)` from the contour count; with
/// `q`, the per-step factor for `P(s_n <= q n)`.
pub fn peierls_bound(eps: f64, n: u64, q: Option<f64>) -> Result<PeierlsReport> {
    if !(eps > 0.0 && eps < 0.5) {
        return Err(Error::InvalidArgument(format!("eps must lie in (0, 1/2), got {eps}")));
    }
    if let Some(q) = q {
        if !(0.0..1.0).contains(&q) {
            return Err(Error::InvalidArgument(format!("q must lie in [0, 1), got {q}")));
        }
    }
    let expo = (1.0 - q.unwrap_or(0.0)) / 28.0;
    let factor = 3.0 * eps.powf(expo);
    Ok(PeierlsReport {
        eps,
        n,
        q,
        factor,
        below_one: factor < 1.0,
        gamma: -factor.ln(),
        bound: factor.powf(2.0 * n as f64),
        survival_threshold_met: survival_threshold_met(eps),
    })
}

/// Valid spec with the fewest parallelogram sites for which both crossings
/// succeed when every site is open. Scans `L <= max_l`, and `alpha`, `delta`
/// on grids of step `1/40` and `1/20`.
pub fn smallest_nondegenerate_spec(max_l: i64) -> Option<BlockSpec> {
    let mut best: Option<(usize, BlockSpec)> = None;
    let open = crate::env::ConstantEnv(0.0);
    for l in (2..=max_l).step_by(2) {
        for d in 1..5 {
            for a in 1..=40 {
                let Ok(spec) = BlockSpec::new(Q::new(a, 40), Q::new(d, 20), l) else { continue };
                let size = spec.sites(0, 0, false).len() + spec.sites(0, 0, true).len();
                if size == 0 || best.as_ref().is_some_and(|(s, _)| *s <= size) {
                    continue;
                }
                if sample_eta(&open, 1.0, &spec, 0, 0).value {
                    best = Some((size, spec));
                }
            }
        }
    }
    best.map(|(_, s)| s)
}

pub fn q_to_f64(x: Q) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{ConstantEnv, EnvField, SplicedEnv};

    fn figure() -> BlockSpec {
        BlockSpec::parse("0.75", "0.2", 10).unwrap()
    }

    #[test]
    fn parse_exact() {
        assert_eq!(parse_rational("0.75").unwrap(), Q::new(3, 4));
        assert_eq!(parse_rational("3/4").unwrap(), Q::new(3, 4));
        assert_eq!(parse_rational("-0.05").unwrap(), Q::new(-1, 20));
        assert!(parse_rational("abc").is_err());
        assert_eq!(rational_from_f64(0.2).unwrap(), Q::new(1, 5));
    }

    #[test]
    fn invariants_enforced() {
        assert!(BlockSpec::parse("0.75", "0.3", 10).is_err());
        assert!(BlockSpec::parse("0.75", "0.2", 9).is_err());
        assert!(BlockSpec::parse("0.7", "0.2", 10).is_err());
        assert!(BlockSpec::parse("1.5", "0.2", 10).is_err());
        assert!(BlockSpec::parse("0.75", "0", 10).is_err());
    }

    #[test]
    fn figure_geometry() {
        let s = figure();
        assert_eq!(s.center(1, 1), (q(10), q(6)));
        let [w0, w1, v0, v1] = s.parallelogram(0, 0, false);
        assert_eq!(w0, (q(0), Q::new(-9, 4)));
        assert_eq!(w1, (q(12), Q::new(27, 4)));
        assert_eq!(v0, (q(0), Q::new(-3, 4)));
        assert_eq!(v1, (q(12), Q::new(33, 4)));
        let b = s.parallelogram(0, 0, true);
        for (pa, pb) in s.parallelogram(0, 0, false).iter().zip(&b) {
            assert_eq!(pa.0, pb.0);
            assert_eq!(pa.1, -pb.1);
        }
        let g = block_geometry(&s, 1, 1).unwrap();
        assert_eq!(g.center.x, "10");
        assert_eq!(g.a_vertices[0].y, "15/4");
    }

    #[test]
    fn mirror_membership() {
        let s = figure();
        for site in s.sites(0, 0, false) {
            assert!(s.contains(0, 0, true, SiteR { n: site.n, m: -site.m }));
        }
    }

    #[test]
    fn parallelograms_inside_rectangle() {
        let s = figure();
        let r = s.rect(2, 0);
        for mirror in [false, true] {
            for t in s.sites(2, 0, mirror) {
                assert!(r.contains(q(t.n), q(t.m)));
            }
        }
    }

    #[test]
    fn footprint_figure_and_override() {
        let r = check_dependence_footprint(&figure(), 6);
        assert!(r.ok, "{r:?}");
        assert_eq!(r.max_overlaps, 6);
        let bad = BlockSpec::new_unchecked(Q::new(3, 4), Q::new(3, 10), 10);
        let r = check_dependence_footprint(&bad, 4);
        assert!(!r.ok);
        assert!(r.violations.iter().any(|&((n, m), (n2, m2))| (n2 - n, (m2 - m).abs()) == (1, 3)));
    }

    #[test]
    fn eta_extremes() {
        let s = figure();
        assert!(sample_eta(&ConstantEnv(0.0), 1.0, &s, 0, 0).value);
        assert!(sample_eta(&ConstantEnv(0.0), 1.0, &s, 3, -1).value);
        assert!(!sample_eta(&EnvField::new(1), 0.0, &s, 0, 0).value);
    }

    #[test]
    fn eta_depends_only_on_rectangle() {
        let s = figure();
        for seed in 0..200 {
            let inside = EnvField::new(seed);
            let outside = EnvField::new(seed + 10_000);
            let r = s.rect(1, 1);
            let mixed = SplicedEnv { inside: &inside, outside: &outside, region: |n: i64, m: i64| r.contains(q(n), q(m)) };
            assert_eq!(sample_eta(&inside, 0.8, &s, 1, 1), sample_eta(&mixed, 0.8, &s, 1, 1));
        }
    }

    #[test]
    fn splice_at_extremes() {
        let s = figure();
        match splice_witness(&ConstantEnv(0.0), 1.0, &s, 0, 0) {
            SpliceOutcome::Witness(path) => {
                verify_witness(&ConstantEnv(0.0), 1.0, &s, 0, 0, &path).unwrap();
            }
            other => panic!("{other:?}"),
        }
        assert_eq!(splice_witness(&EnvField::new(2), 0.0, &s, 0, 0), SpliceOutcome::NotApplicable);
    }

    #[test]
    fn peierls_examples() {
        let r = peierls_bound(1e-14, 10, None).unwrap();
        assert!((r.factor - 3.0 * 10f64.powf(-0.5)).abs() < 1e-12);
        assert!(r.below_one);
        assert!(r.survival_threshold_met);
        assert!(!peierls_bound(1e-13, 10, None).unwrap().below_one);
        let r = peierls_bound(1e-30, 10, Some(0.5)).unwrap();
        assert!((r.factor - 0.8736).abs() < 1e-3);
        assert!(peierls_bound(0.5, 1, None).is_err());
        let t = 3f64.powi(-28);
        assert!(!survival_threshold_met(t * (1.0 + 1e-15)));
        assert!(survival_threshold_met(t * (1.0 - 1e-15)));
    }

    #[test]
    fn synthetic_eta_extremes() {
        let f = EnvField::new(4);
        let r = eta_cluster(&f, &EtaMode::Synthetic { rate: 1.0 }, 30).unwrap();
        assert!(r.survived);
        assert_eq!(r.cluster.len(), (1..=31).sum::<usize>());
        let r = eta_cluster(&f, &EtaMode::Synthetic { rate: 0.0 }, 30).unwrap();
        assert_eq!(r.last_level, 0);
        assert_eq!(r.cluster, vec![(0, 0)]);
    }
}
