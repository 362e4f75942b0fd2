//! Per-configuration invariant suite.
//!
//! Each check runs on every replica environment and counts the comparisons it
//! made and how many of them failed. Comparisons that the truncated edge
//! processes cannot decide are counted apart and never as failures.
//!
//! Below the critical point the half-line edges fall faster than linearly,
//! so no fixed truncation keeps them exact over a long horizon. Checks whose
//! proofs hold for any finite starter set are therefore run on the simulated
//! system itself, with the exactly-untruncated trials reported alongside.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::env::{EnvField, Environment};
use crate::error::{check_probability, Error, Result};
use crate::ext::ExtInt;
use crate::frontier::{drive, run_barred, run_barred_at, run_xi, tau_via_edges, StarterSpec};
use crate::replicas::{fold_replicas, McConfig};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Check {
    Sandwich,
    XiAbsorbing,
    TauEdges,
    Subadditivity,
    Recurrences,
    TauCriterion,
    Coupling,
}

impl Check {
    pub const ALL: [Check; 7] = [
        Check::Sandwich,
        Check::XiAbsorbing,
        Check::TauEdges,
        Check::Subadditivity,
        Check::Recurrences,
        Check::TauCriterion,
        Check::Coupling,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Check::Sandwich => "sandwich",
            Check::XiAbsorbing => "xi_absorbing",
            Check::TauEdges => "tau_edges",
            Check::Subadditivity => "subadditivity",
            Check::Recurrences => "recurrences",
            Check::TauCriterion => "tau_criterion",
            Check::Coupling => "coupling",
        }
    }
}

/// Where a failing comparison happened, enough to replay it.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FailureCase {
    pub replica: usize,
    pub env_seed: u64,
    pub level: usize,
    /// Height window of the levels involved.
    pub window: (i64, i64),
    pub detail: String,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
struct Tally {
    trials: u64,
    failures: u64,
    undecided: u64,
    exact: u64,
    first: Option<FailureCase>,
}

impl Tally {
    fn merge(&mut self, o: Tally) {
        self.trials += o.trials;
        self.failures += o.failures;
        self.undecided += o.undecided;
        self.exact += o.exact;
        if self.first.is_none() {
            self.first = o.first;
        }
    }

    fn record(&mut self, ok: bool, fail: impl FnOnce() -> FailureCase) {
        self.trials += 1;
        if !ok {
            self.failures += 1;
            if self.first.is_none() {
                self.first = Some(fail());
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerifyRow {
    pub check: Check,
    pub p: f64,
    pub configs: usize,
    pub trials: u64,
    pub failures: u64,
    pub undecided: u64,
    /// Trials whose values are those of the untruncated process (only for
    /// checks that run on a truncated system).
    pub exact: Option<u64>,
    pub first_failure: Option<FailureCase>,
    /// Wall time; not part of any reproducible output.
    #[serde(skip)]
    pub runtime_s: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub horizon: usize,
    pub seed: u64,
    pub rows: Vec<VerifyRow>,
}

impl VerifyReport {
    pub fn ok(&self) -> bool {
        self.rows.iter().all(|r| r.failures == 0)
    }

    pub fn failures(&self) -> u64 {
        self.rows.iter().map(|r| r.failures).sum()
    }
}

/// Truncation depth for the half-line edges.
pub fn edge_depth(horizon: usize) -> i64 {
    2 * horizon as i64
}

/// Per-level height sets of the frontier.
fn level_sets<E: Environment + ?Sized>(
    env: &E,
    p: f64,
    start: &StarterSpec,
    horizon: usize,
    keep: impl Fn(i64, i64) -> bool,
) -> Vec<Vec<i64>> {
    let mut out = Vec::with_capacity(horizon + 1);
    drive(env, p, 0, &start.column0, &start.column1, horizon as i64, keep, |s| out.push(s.cur().to_vec()));
    out
}

fn window(sets: &[&[i64]]) -> (i64, i64) {
    let lo = sets.iter().filter_map(|s| s.first()).min().copied().unwrap_or(0);
    let hi = sets.iter().filter_map(|s| s.last()).max().copied().unwrap_or(0);
    (lo, hi)
}

fn case(env: &EnvField, r: usize, level: usize, window: (i64, i64), detail: String) -> FailureCase {
    FailureCase { replica: r, env_seed: env.seed(), level, window, detail }
}

/// The origin's frontier is the half-line frontier cut at its own lower
/// edge (and the mirror statement), with matching edges.
fn sandwich(env: &EnvField, r: usize, p: f64, h: usize, t: &mut Tally) {
    let hi = h as i64;
    let floor = -2 * hi - 2;
    let xi = level_sets(env, p, &StarterSpec::origin(), h, |_, _| true);
    let below = level_sets(env, p, &StarterSpec::below(0, floor), h, |n, m| m >= floor + n);
    let above = level_sets(env, p, &StarterSpec::above(0, -floor), h, |n, m| m <= -floor - n);
    for n in 0..=h {
        let x = &xi[n];
        let (Some(&l), Some(&u)) = (x.first(), x.last()) else { continue };
        let cut_b: Vec<i64> = below[n].iter().copied().filter(|&y| y >= l).collect();
        let cut_a: Vec<i64> = above[n].iter().copied().filter(|&y| y <= u).collect();
        let ub = below[n].last().copied();
        let la = above[n].first().copied();
        let ok = cut_b == *x && cut_a == *x && ub == Some(u) && la == Some(l);
        t.record(ok, || {
            case(env, r, n, window(&[x, &below[n], &above[n]]), format!("xi={x:?} ubar={ub:?} lbar={la:?}"))
        });
    }
}

/// Once empty, the frontier stays empty, from the origin and from a block.
fn xi_absorbing(env: &EnvField, r: usize, p: f64, h: usize, t: &mut Tally) {
    for start in [StarterSpec::origin(), StarterSpec::interval(-6, 6)] {
        let sets = level_sets(env, p, &start, h, |_, _| true);
        let traj = run_xi(env, p, &start, h).expect("valid starters");
        let first_empty = sets.iter().position(|s| s.is_empty());
        if let Some(m) = first_empty {
            for n in m..=h {
                let ok = sets[n].is_empty() && traj.u[n] == ExtInt::NegInf && traj.l[n] == ExtInt::PosInf;
                t.record(ok, || case(env, r, n, window(&[&sets[n]]), format!("nonempty after death at {m}")));
            }
            let ok = traj.tau == ExtInt::Finite(m as i64);
            t.record(ok, || case(env, r, m, (0, 0), format!("tau={:?}", traj.tau)));
        } else {
            t.record(traj.tau == ExtInt::PosInf, || case(env, r, h, (0, 0), format!("tau={:?}", traj.tau)));
        }
    }
}

/// Death time from the frontier against the edge-separation time.
fn tau_edges(env: &EnvField, r: usize, p: f64, h: usize, t: &mut Tally) {
    let direct = run_xi(env, p, &StarterSpec::origin(), h).expect("origin").tau;
    let edges = run_barred(env, p, h, edge_depth(h)).expect("valid K");
    match tau_via_edges(&edges) {
        Ok(via) => t.record(via == direct, || {
            let lvl = direct.as_finite().unwrap_or(h as i64) as usize;
            case(env, r, lvl, (-(h as i64), h as i64), format!("direct={direct:?} via_edges={via:?}"))
        }),
        Err(Error::Undecidable { .. }) => t.undecided += 1,
        Err(e) => panic!("unexpected error: {e}"),
    }
}

/// Upper half-line edge from starters in `[floor, 0]`, pruned below the line
/// `floor + level`. Equals the untruncated edge wherever it is `>= floor + h + h`.
fn pruned_upper<E: Environment + ?Sized>(env: &E, p: f64, h: usize, floor: i64) -> Vec<ExtInt> {
    let st = StarterSpec::below(0, floor);
    let mut out = Vec::with_capacity(h + 1);
    drive(env, p, 0, &st.column0, &st.column1, h as i64, |n, m| m >= floor + n, |s| out.push(s.sup()));
    out
}

/// `ubar_m + ubar_{m,n} >= ubar_n` for a spread of `m`.
///
/// The relation is checked on the finite starter system `[floor, 0]` that is
/// actually simulated; its proof only needs the relative starters to cover
/// the heights a path from that system can have at level `m`. Where the
/// simulated edges are exact the comparison is about the untruncated process.
fn subadditivity(env: &EnvField, r: usize, p: f64, h: usize, t: &mut Tally) {
    let k = edge_depth(h);
    let floor = -k - h as i64;
    let exact_from = -k;
    let ubar = pruned_upper(env, p, h, floor);
    let ms = [1, 2, h / 4, h / 2, 3 * h / 4, h - 1];
    let n = h;
    let ni = n as i64;
    for m in ms.into_iter().filter(|&m| m >= 1 && m < h) {
        let mi = m as i64;
        let top = match ubar[m].as_finite() {
            None => ExtInt::NegInf,
            Some(b) => {
                let lo = floor + mi;
                let col0 = crate::frontier::heights_with_parity(lo, b, mi);
                let col1 = crate::frontier::heights_with_parity(lo, b, mi + 1);
                let mut top = ExtInt::NegInf;
                drive(env, p, mi, &col0, &col1, ni, |l, y| y >= floor + l, |s| {
                    if s.level() == ni {
                        top = s.sup();
                    }
                });
                top
            }
        };
        let exact = ubar[m] >= ExtInt::Finite(exact_from) && ubar[n] >= ExtInt::Finite(exact_from);
        if exact {
            t.exact += 1;
        }
        t.record(top >= ubar[n], || {
            case(env, r, n, (floor, 0), format!("m={m} ubar_m={:?} top={top:?} ubar_n={:?}", ubar[m], ubar[n]))
        });
    }
}

fn one_step_bound(a: ExtInt, b: ExtInt, c: ExtInt, upper: bool) -> bool {
    if upper {
        c <= a.shift(1).max(b)
    } else {
        c >= a.shift(-1).min(b)
    }
}

/// `ubar_{n+1} <= (ubar_n + 1) v ubar_{n-1}` and the mirror bound, on the
/// simulated systems; the bound holds for any starters on the first two
/// columns, and exact triples are counted apart.
fn recurrences(env: &EnvField, r: usize, p: f64, h: usize, t: &mut Tally) {
    let e = run_barred(env, p, h, edge_depth(h)).expect("valid K");
    let hw = (-(h as i64), h as i64);
    for n in 1..h {
        let ok = one_step_bound(e.ubar[n], e.ubar[n - 1], e.ubar[n + 1], true);
        if (n - 1..=n + 1).all(|i| e.ubar_exact(i)) {
            t.exact += 1;
        }
        t.record(ok, || case(env, r, n + 1, hw, format!("ubar {:?}", &e.ubar[n - 1..=n + 1])));
        let ok = one_step_bound(e.lbar[n], e.lbar[n - 1], e.lbar[n + 1], false);
        if (n - 1..=n + 1).all(|i| e.lbar_exact(i)) {
            t.exact += 1;
        }
        t.record(ok, || case(env, r, n + 1, hw, format!("lbar {:?}", &e.lbar[n - 1..=n + 1])));
    }
}

/// Edges started at `+-M` that straddle zero up to the horizon force survival
/// of the frontier from `[-M, M]`. Both starting columns are used, as for the
/// edges themselves; with column 0 alone the inclusion already breaks at
/// level 1.
fn tau_criterion(env: &EnvField, r: usize, p: f64, h: usize, t: &mut Tally) {
    let k = edge_depth(h);
    for big_m in [0i64, 2, 5] {
        let e = run_barred_at(env, p, h, k, big_m).expect("valid K");
        let straddles = (0..=h).all(|n| e.lbar[n] <= ExtInt::Finite(0) && ExtInt::Finite(0) <= e.ubar[n]);
        if !straddles {
            continue;
        }
        let start = StarterSpec::window(-big_m, big_m);
        let tau = run_xi(env, p, &start, h).expect("valid starters").tau;
        t.record(tau == ExtInt::PosInf, || case(env, r, h, (-big_m, big_m), format!("M={big_m} tau={tau:?}")));
    }
}

/// Frontier at the larger `p` contains the one at the smaller, per level.
fn coupling(env: &EnvField, r: usize, p: f64, h: usize, t: &mut Tally) {
    let q = (p + 0.1).min(1.0);
    let lo = level_sets(env, p, &StarterSpec::origin(), h, |_, _| true);
    let hi = level_sets(env, q, &StarterSpec::origin(), h, |_, _| true);
    for n in 0..=h {
        let ok = lo[n].iter().all(|m| hi[n].binary_search(m).is_ok());
        t.record(ok, || case(env, r, n, window(&[&lo[n], &hi[n]]), format!("p={p} q={q}")));
    }
}

fn run_check(check: Check, env: &EnvField, r: usize, p: f64, h: usize, t: &mut Tally) {
    match check {
        Check::Sandwich => sandwich(env, r, p, h, t),
        Check::XiAbsorbing => xi_absorbing(env, r, p, h, t),
        Check::TauEdges => tau_edges(env, r, p, h, t),
        Check::Subadditivity => subadditivity(env, r, p, h, t),
        Check::Recurrences => recurrences(env, r, p, h, t),
        Check::TauCriterion => tau_criterion(env, r, p, h, t),
        Check::Coupling => coupling(env, r, p, h, t),
    }
}

/// Run the checks at every `p`, with `cfg.replicas` configurations each.
pub fn verify_invariants(p_grid: &[f64], horizon: usize, checks: &[Check], cfg: &McConfig) -> Result<VerifyReport> {
    if horizon < 2 {
        return Err(Error::InvalidArgument("horizon must be >= 2".into()));
    }
    let mut rows = Vec::new();
    for (i, &p) in p_grid.iter().enumerate() {
        check_probability(p)?;
        let pcfg = cfg.substream(i as u64);
        for &check in checks {
            let start = Instant::now();
            let tally = fold_replicas(
                &pcfg,
                Tally::default,
                |t, r, env| run_check(check, env, r, p, horizon, t),
                |a, b| a.merge(b),
            )?;
            rows.push(VerifyRow {
                check,
                p,
                configs: cfg.replicas,
                trials: tally.trials,
                failures: tally.failures,
                undecided: tally.undecided,
                exact: matches!(check, Check::Subadditivity | Check::Recurrences).then_some(tally.exact),
                first_failure: tally.first,
                runtime_s: start.elapsed().as_secs_f64(),
            });
        }
    }
    Ok(VerifyReport { horizon, seed: cfg.seed, rows })
}

/// Death time of the origin for one configuration, for edge-case reporting.
pub fn tau_values(p: f64, horizon: usize, cfg: &McConfig) -> Result<Vec<ExtInt>> {
    check_probability(p)?;
    crate::replicas::map_replicas(cfg, |_, env| run_xi(env, p, &StarterSpec::origin(), horizon).map(|t| t.tau))?
        .into_iter()
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_suite_passes() {
        let cfg = McConfig::new(200, 9);
        let rep = verify_invariants(&[0.3, 0.6, 0.8], 30, &Check::ALL, &cfg).unwrap();
        assert!(rep.ok(), "{:#?}", rep.rows.iter().filter(|r| r.failures > 0).collect::<Vec<_>>());
        assert!(rep.rows.iter().all(|r| r.trials > 0 || r.check == Check::TauCriterion));
    }

    #[test]
    fn extremes() {
        let cfg = McConfig::new(50, 1);
        let rep = verify_invariants(&[0.0, 1.0], 20, &Check::ALL, &cfg).unwrap();
        assert!(rep.ok());
        assert!(tau_values(0.0, 20, &cfg).unwrap().iter().all(|&t| t == ExtInt::Finite(1)));
        assert!(tau_values(1.0, 20, &cfg).unwrap().iter().all(|&t| t == ExtInt::PosInf));
    }

    #[test]
    fn broken_relation_is_caught() {
        // a frontier against a different environment must disagree somewhere
        let a = EnvField::new(1);
        let b = EnvField::new(2);
        let xa = level_sets(&a, 0.7, &StarterSpec::origin(), 30, |_, _| true);
        let xb = level_sets(&b, 0.7, &StarterSpec::origin(), 30, |_, _| true);
        assert_ne!(xa, xb);
        let mut t = Tally::default();
        t.record(false, || case(&a, 0, 3, (0, 1), "x".into()));
        assert_eq!(t.failures, 1);
        assert_eq!(t.first.unwrap().env_seed, a.seed());
    }
}
