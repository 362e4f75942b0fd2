//! Monte Carlo estimators over independent replicas.

use serde::{Deserialize, Serialize};

use crate::error::{check_probability, Error, Result};
use crate::ext::ExtInt;
use crate::frontier::{death_time, reflected_boundaries, ubar_path};
use crate::replicas::{fold_replicas, McConfig};
use crate::stats::{ols, proportion, Accum, MeanSe};

/// Standard errors used by every built-in acceptance decision.
pub const Z: f64 = 3.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlphaEstimate {
    pub p: f64,
    pub n_levels: usize,
    pub k: i64,
    pub replicas: usize,
    /// Untruncated replicas entering the means.
    pub used: usize,
    pub truncation_rate: f64,
    /// `alpha_n[n - 1]` estimates `E[ubar_n] / n`.
    pub alpha_n: Vec<MeanSe>,
    pub alpha_hat: MeanSe,
    /// `alpha_hat <= 1` up to the CI.
    pub below_one: bool,
}

impl AlphaEstimate {
    pub fn at(&self, n: usize) -> MeanSe {
        self.alpha_n[n - 1]
    }
}

fn min_replicas(cfg: &McConfig, min: usize) -> Result<()> {
    if cfg.replicas < min {
        return Err(Error::InvalidArgument(format!("need at least {min} replicas, got {}", cfg.replicas)));
    }
    Ok(())
}

/// `E[ubar_n] / n` for `n <= n_levels` from replicas truncated at depth `k`
/// (default `n_levels`).
pub fn estimate_alpha(p: f64, n_levels: usize, k: Option<i64>, cfg: &McConfig) -> Result<AlphaEstimate> {
    check_probability(p)?;
    min_replicas(cfg, 100)?;
    if n_levels < 1 {
        return Err(Error::InvalidArgument("n_levels must be >= 1".into()));
    }
    let k = k.unwrap_or(n_levels as i64);
    if p == 0.0 {
        // ubar_1 = -1 (the column-1 starters) and nothing moves afterwards
        let alpha_n: Vec<MeanSe> = (1..=n_levels)
            .map(|n| MeanSe::exact(if n == 1 { -1.0 } else { f64::NEG_INFINITY }))
            .collect();
        let alpha_hat = *alpha_n.last().unwrap();
        return Ok(AlphaEstimate {
            p,
            n_levels,
            k,
            replicas: cfg.replicas,
            used: cfg.replicas,
            truncation_rate: 0.0,
            alpha_n,
            alpha_hat,
            below_one: true,
        });
    }
    struct Acc {
        levels: Vec<Accum>,
        truncated: usize,
    }
    let acc = fold_replicas(
        cfg,
        || Acc { levels: vec![Accum::default(); n_levels], truncated: 0 },
        |a, _, env| {
            let (u, truncated) = ubar_path(env, p, n_levels, k).expect("validated");
            if truncated {
                a.truncated += 1;
                return;
            }
            for n in 1..=n_levels {
                let v = u[n].as_finite().expect("untruncated values are finite");
                a.levels[n - 1].push(v as f64 / n as f64);
            }
        },
        |a, b| {
            a.truncated += b.truncated;
            for (x, y) in a.levels.iter_mut().zip(&b.levels) {
                x.merge(y);
            }
        },
    )?;
    let used = cfg.replicas - acc.truncated;
    if used == 0 {
        return Err(Error::AllTruncated { replicas: cfg.replicas });
    }
    let alpha_n: Vec<MeanSe> = acc.levels.iter().map(Accum::finish).collect();
    let alpha_hat = *alpha_n.last().unwrap();
    Ok(AlphaEstimate {
        p,
        n_levels,
        k,
        replicas: cfg.replicas,
        used,
        truncation_rate: acc.truncated as f64 / cfg.replicas as f64,
        alpha_n,
        below_one: alpha_hat.mean <= 1.0 + Z * alpha_hat.se,
        alpha_hat,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThetaEstimate {
    pub p: f64,
    pub horizon: usize,
    pub replicas: usize,
    pub survivors: usize,
    pub theta: MeanSe,
}

/// Fraction of replicas whose origin frontier is alive at `horizon`.
pub fn estimate_theta(p: f64, horizon: usize, cfg: &McConfig) -> Result<ThetaEstimate> {
    check_probability(p)?;
    if horizon < 1 {
        return Err(Error::InvalidArgument("horizon must be >= 1".into()));
    }
    let survivors = fold_replicas(
        cfg,
        || 0usize,
        |a, _, env| {
            if death_time(env, p, horizon).expect("validated") == ExtInt::PosInf {
                *a += 1;
            }
        },
        |a, b| *a += b,
    )?;
    Ok(ThetaEstimate {
        p,
        horizon,
        replicas: cfg.replicas,
        survivors,
        theta: proportion(survivors as u64, cfg.replicas as u64),
    })
}

/// Counts of `tau = t` for `t = 1..=horizon` (index `t - 1`) and of
/// replicas still alive at `horizon`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TauHistogram {
    pub p: f64,
    pub horizon: usize,
    pub replicas: usize,
    pub deaths: Vec<u64>,
    pub alive: u64,
}

impl TauHistogram {
    pub fn frequency(&self, t: usize) -> MeanSe {
        proportion(self.deaths[t - 1], self.replicas as u64)
    }

    pub fn alive_frequency(&self) -> MeanSe {
        proportion(self.alive, self.replicas as u64)
    }
}

pub fn tau_histogram(p: f64, horizon: usize, cfg: &McConfig) -> Result<TauHistogram> {
    check_probability(p)?;
    if horizon < 1 {
        return Err(Error::InvalidArgument("horizon must be >= 1".into()));
    }
    let deaths = fold_replicas(
        cfg,
        || vec![0u64; horizon + 1],
        |a, _, env| match death_time(env, p, horizon).expect("validated") {
            ExtInt::Finite(t) => a[t as usize - 1] += 1,
            _ => a[horizon] += 1,
        },
        |a, b| a.iter_mut().zip(b).for_each(|(x, y)| *x += y),
    )?;
    let alive = deaths[horizon];
    Ok(TauHistogram {
        p,
        horizon,
        replicas: cfg.replicas,
        deaths: deaths[..horizon].to_vec(),
        alive,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PcBracket {
    pub lo: f64,
    pub hi: f64,
    pub theta_lo: MeanSe,
    pub theta_hi: MeanSe,
    pub threshold: f64,
    pub horizon: usize,
    pub replicas: usize,
    pub steps: usize,
}

impl PcBracket {
    pub fn overlaps(&self, other: &PcBracket) -> bool {
        self.lo <= other.hi && other.lo <= self.hi
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }
}

/// Bisection on `p` for the survival threshold.
pub fn scan_pc(threshold: f64, horizon: usize, tolerance: f64, cfg: &McConfig) -> Result<PcBracket> {
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(Error::InvalidArgument(format!("threshold must lie in (0,1), got {threshold}")));
    }
    if !(tolerance > 0.0) {
        return Err(Error::InvalidArgument("tolerance must be positive".into()));
    }
    if cfg.replicas < 2 {
        return Err(Error::NoBracket {
            threshold,
            reason: format!("{} replica(s) cannot resolve a survival fraction", cfg.replicas),
        });
    }
    let mut lo = 0.0;
    let mut hi = 1.0;
    let mut theta_lo = estimate_theta(lo, horizon, cfg)?.theta;
    let mut theta_hi = estimate_theta(hi, horizon, cfg)?.theta;
    if theta_hi.mean < threshold {
        return Err(Error::NoBracket { threshold, reason: "threshold unreachable at p = 1".into() });
    }
    let mut steps = 0;
    while hi - lo > tolerance {
        let mid = 0.5 * (lo + hi);
        let t = estimate_theta(mid, horizon, cfg)?.theta;
        if t.mean >= threshold {
            hi = mid;
            theta_hi = t;
        } else {
            lo = mid;
            theta_lo = t;
        }
        steps += 1;
    }
    Ok(PcBracket { lo, hi, theta_lo, theta_hi, threshold, horizon, replicas: cfg.replicas, steps })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TailBin {
    pub n: usize,
    pub count: u64,
    pub frequency: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TailFit {
    pub gamma_hat: f64,
    pub c_hat: f64,
    pub r_squared: f64,
    /// Smallest and largest `n` entering the fit.
    pub n_range: (usize, usize),
    pub bins: Vec<TailBin>,
    pub replicas: usize,
}

/// Bins with fewer events than this are left out of tail fits.
pub const MIN_EVENTS: u64 = 10;
pub const MIN_BINS: usize = 5;

fn fit_bins(bins: Vec<TailBin>, replicas: usize) -> Result<TailFit> {
    let used: Vec<&TailBin> = bins.iter().filter(|b| b.count >= MIN_EVENTS).collect();
    if used.len() < MIN_BINS {
        return Err(Error::TooFewBins { needed: MIN_BINS, min_events: MIN_EVENTS, found: used.len() });
    }
    let xs: Vec<f64> = used.iter().map(|b| b.n as f64).collect();
    let ys: Vec<f64> = used.iter().map(|b| b.frequency.ln()).collect();
    let fit = ols(&xs, &ys);
    let n_range = (used[0].n, used[used.len() - 1].n);
    Ok(TailFit {
        gamma_hat: -fit.slope,
        c_hat: fit.intercept.exp(),
        r_squared: fit.r_squared,
        n_range,
        bins,
        replicas,
    })
}

/// Log-linear fit of `P(n <= tau < inf)` over `n_min..=n_max`, with
/// `tau < inf` read as death by `death_horizon`.
pub fn fit_tail_tau(
    p: f64,
    n_min: usize,
    n_max: usize,
    death_horizon: usize,
    cfg: &McConfig,
) -> Result<TailFit> {
    if n_min < 1 || n_min > n_max || n_max > death_horizon {
        return Err(Error::InvalidArgument("need 1 <= n_min <= n_max <= death_horizon".into()));
    }
    let h = tau_histogram(p, death_horizon, cfg)?;
    if h.deaths.iter().all(|&c| c == 0) {
        return Err(Error::NoFiniteDeaths);
    }
    let mut tail = vec![0u64; death_horizon + 2];
    for t in (1..=death_horizon).rev() {
        tail[t] = tail[t + 1] + h.deaths[t - 1];
    }
    let bins = (n_min..=n_max)
        .map(|n| TailBin { n, count: tail[n], frequency: tail[n] as f64 / cfg.replicas as f64 })
        .collect();
    fit_bins(bins, cfg.replicas)
}

/// Counts of `ubar_n > alpha_prime * n` for `n = 1..=n_max` (index `n - 1`).
pub fn upper_tail_counts(p: f64, alpha_prime: f64, n_max: usize, cfg: &McConfig) -> Result<Vec<u64>> {
    check_probability(p)?;
    if alpha_prime < -1.0 {
        return Err(Error::InvalidArgument("alpha' below -1 is outside the exact band".into()));
    }
    fold_replicas(
        cfg,
        || vec![0u64; n_max],
        |a, _, env| {
            // values below -n_max are truncated, but they cannot exceed alpha' n >= -n
            let (u, _) = ubar_path(env, p, n_max, n_max as i64).expect("validated");
            for n in 1..=n_max {
                if u[n].to_f64() > alpha_prime * n as f64 {
                    a[n - 1] += 1;
                }
            }
        },
        |a, b| a.iter_mut().zip(b).for_each(|(x, y)| *x += y),
    )
}

/// Log-linear fit of `P(ubar_n > alpha_prime * n)`. `alpha_prime` must exceed
/// the estimated slope at `n_max` by more than its CI.
pub fn fit_tail_upper(p: f64, alpha_prime: f64, n_max: usize, cfg: &McConfig) -> Result<TailFit> {
    let a = estimate_alpha(p, n_max, None, &cfg.substream(1))?;
    let limit = a.alpha_hat.mean + Z * a.alpha_hat.se;
    if !(alpha_prime > limit) {
        return Err(Error::AlphaPrimeTooSmall { alpha_prime, limit });
    }
    let counts = upper_tail_counts(p, alpha_prime, n_max, cfg)?;
    let bins = counts
        .iter()
        .enumerate()
        .map(|(i, &c)| TailBin { n: i + 1, count: c, frequency: c as f64 / cfg.replicas as f64 })
        .collect();
    fit_bins(bins, cfg.replicas)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MonoRow {
    pub p: f64,
    pub alpha: MeanSe,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MonoPair {
    pub p: f64,
    pub q: f64,
    /// Paired `alpha_hat[p] - alpha_hat[q]`.
    pub diff: MeanSe,
    pub bound: f64,
    /// `diff - bound`.
    pub margin: f64,
    pub ok: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MonoReport {
    pub n_levels: usize,
    pub replicas: usize,
    pub used: usize,
    pub rows: Vec<MonoRow>,
    pub pairs: Vec<MonoPair>,
    pub max_adjacent_jump: f64,
    /// Replica-level violations of `ubar_n[p] >= ubar_n[q]`; zero under the coupling.
    pub pointwise_violations: u64,
    /// Whether the smallest grid point has `alpha_hat` within the CI of 0.
    pub lowest_near_zero: bool,
}

/// Shared-seed `alpha_hat` over a grid with the gap bound `p^2 - q^2` checked
/// for every pair.
pub fn monotonicity_report(p_grid: &[f64], n_levels: usize, cfg: &McConfig) -> Result<MonoReport> {
    if p_grid.is_empty() {
        return Err(Error::InvalidArgument("empty p grid".into()));
    }
    for &p in p_grid {
        check_probability(p)?;
        if p == 0.0 {
            return Err(Error::InvalidArgument("grid must avoid p = 0".into()));
        }
    }
    min_replicas(cfg, 2)?;
    let mut grid = p_grid.to_vec();
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    let g = grid.len();
    let k = n_levels as i64;
    struct Acc {
        single: Vec<Accum>,
        paired: Vec<Accum>,
        used: usize,
        violations: u64,
    }
    let acc = fold_replicas(
        cfg,
        || Acc { single: vec![Accum::default(); g], paired: vec![Accum::default(); g * g], used: 0, violations: 0 },
        |a, _, env| {
            let paths: Vec<(Vec<ExtInt>, bool)> =
                grid.iter().map(|&p| ubar_path(env, p, n_levels, k).expect("validated")).collect();
            for i in 1..g {
                for n in 0..=n_levels {
                    let (hi, lo) = (paths[i].0[n], paths[i - 1].0[n]);
                    // values outside the exact band are only bounds
                    if !paths[i - 1].1 && hi < lo {
                        a.violations += 1;
                    }
                }
            }
            if paths.iter().any(|(_, t)| *t) {
                return;
            }
            a.used += 1;
            let vals: Vec<f64> =
                paths.iter().map(|(u, _)| u[n_levels].to_f64() / n_levels as f64).collect();
            for i in 0..g {
                a.single[i].push(vals[i]);
                for j in 0..i {
                    a.paired[i * g + j].push(vals[i] - vals[j]);
                }
            }
        },
        |a, b| {
            a.used += b.used;
            a.violations += b.violations;
            a.single.iter_mut().zip(&b.single).for_each(|(x, y)| x.merge(y));
            a.paired.iter_mut().zip(&b.paired).for_each(|(x, y)| x.merge(y));
        },
    )?;
    if acc.used == 0 {
        return Err(Error::AllTruncated { replicas: cfg.replicas });
    }
    let rows: Vec<MonoRow> =
        grid.iter().zip(&acc.single).map(|(&p, a)| MonoRow { p, alpha: a.finish() }).collect();
    let mut pairs = Vec::new();
    for i in 0..g {
        for j in 0..i {
            let diff = acc.paired[i * g + j].finish();
            let bound = grid[i] * grid[i] - grid[j] * grid[j];
            let margin = diff.mean - bound;
            pairs.push(MonoPair { p: grid[i], q: grid[j], diff, bound, margin, ok: margin >= -Z * diff.se });
        }
    }
    let max_adjacent_jump = rows
        .windows(2)
        .map(|w| (w[1].alpha.mean - w[0].alpha.mean).abs())
        .fold(0.0, f64::max);
    let lowest_near_zero = rows[0].alpha.within(0.0, Z);
    Ok(MonoReport {
        n_levels,
        replicas: cfg.replicas,
        used: acc.used,
        rows,
        pairs,
        max_adjacent_jump,
        pointwise_violations: acc.violations,
        lowest_near_zero,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RhoEstimate {
    pub p: f64,
    /// Reflected column at which the boundary slope is read.
    pub columns: usize,
    pub replicas: usize,
    pub survivors: usize,
    /// Replicas that hit the level cap before the column was final.
    pub unresolved: usize,
    /// `w_N / N` over survivors.
    pub slope_direct: MeanSe,
    /// `(1 + alpha_hat) / (1 - alpha_hat)`.
    pub slope_formula: MeanSe,
    pub rho_direct: MeanSe,
    pub rho_formula: MeanSe,
    pub alpha: AlphaEstimate,
    /// `-p / (1 - p)`.
    pub geometric_bound: f64,
    pub geometric_ok: bool,
}

impl RhoEstimate {
    /// `|direct - formula|` in joint standard errors.
    pub fn discrepancy(&self) -> f64 {
        let d = self.slope_direct.mean - self.slope_formula.mean;
        d.abs() / self.slope_direct.se.hypot(self.slope_formula.se)
    }
}

/// `-(1 + a) / (1 - a)` and the delta-method standard error.
pub fn rho_from_alpha(alpha: MeanSe) -> MeanSe {
    let a = alpha.mean;
    MeanSe { mean: -(1.0 + a) / (1.0 - a), se: 2.0 * alpha.se / ((1.0 - a) * (1.0 - a)), count: alpha.count }
}

/// Upper-boundary slope read at reflected column `columns`, against the
/// value implied by `alpha_hat`. The slope is estimated at rotated level
/// `alpha_levels`, by default the mean level where the boundary was read.
pub fn estimate_rho(
    p: f64,
    columns: usize,
    alpha_levels: Option<usize>,
    cfg: &McConfig,
) -> Result<RhoEstimate> {
    check_probability(p)?;
    if p >= 1.0 {
        return Err(Error::InvalidArgument("alpha = 1 at p = 1, the boundary slope is infinite".into()));
    }
    if columns < 1 {
        return Err(Error::InvalidArgument("columns must be >= 1".into()));
    }
    let max_levels = 200 * columns + 2000;
    struct Acc {
        slope: Accum,
        level: Accum,
        unresolved: usize,
    }
    let n = columns as f64;
    let acc = fold_replicas(
        cfg,
        || Acc { slope: Accum::default(), level: Accum::default(), unresolved: 0 },
        |a, _, env| {
            let b = reflected_boundaries(env, p, columns, max_levels).expect("validated");
            if !b.resolved {
                a.unresolved += 1;
                return;
            }
            if b.survived {
                let w = b.w[columns].expect("a surviving cluster crosses every column") as f64;
                a.slope.push(w / n);
                a.level.push(n + w);
            }
        },
        |a, b| {
            a.slope.merge(&b.slope);
            a.level.merge(&b.level);
            a.unresolved += b.unresolved;
        },
    )?;
    let survivors = acc.slope.count as usize;
    if survivors == 0 {
        return Err(Error::NoSurvivors { replicas: cfg.replicas });
    }
    let slope_direct = acc.slope.finish();
    let levels = alpha_levels.unwrap_or_else(|| acc.level.mean().round().max(1.0) as usize);
    let alpha = estimate_alpha(p, levels, None, &cfg.substream(2))?;
    let rho_formula = rho_from_alpha(alpha.alpha_hat);
    let slope_formula = MeanSe { mean: -rho_formula.mean, ..rho_formula };
    let rho_direct = MeanSe { mean: -slope_direct.mean, ..slope_direct };
    let geometric_bound = -p / (1.0 - p);
    Ok(RhoEstimate {
        p,
        columns,
        replicas: cfg.replicas,
        survivors,
        unresolved: acc.unresolved,
        slope_direct,
        slope_formula,
        rho_direct,
        rho_formula,
        geometric_ok: rho_direct.mean >= geometric_bound - Z * rho_direct.se,
        geometric_bound,
        alpha,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn alpha_extremes() {
        let cfg = McConfig::new(100, 1);
        let a = estimate_alpha(1.0, 20, None, &cfg).unwrap();
        assert_eq!(a.alpha_hat.mean, 1.0);
        assert_eq!(a.alpha_hat.se, 0.0);
        let a = estimate_alpha(0.0, 20, None, &cfg).unwrap();
        assert_eq!(a.alpha_hat.mean, f64::NEG_INFINITY);
        assert!(estimate_alpha(0.5, 20, None, &McConfig::new(10, 1)).is_err());
    }

    #[test]
    fn alpha_all_truncated() {
        let e = estimate_alpha(0.05, 30, Some(0), &McConfig::new(100, 1)).unwrap_err();
        assert_eq!(e, Error::AllTruncated { replicas: 100 });
    }

    #[test]
    fn theta_extremes_and_coupling() {
        let cfg = McConfig::new(300, 9);
        assert_eq!(estimate_theta(1.0, 50, &cfg).unwrap().theta.mean, 1.0);
        assert_eq!(estimate_theta(0.0, 50, &cfg).unwrap().theta.mean, 0.0);
        let a = estimate_theta(0.6, 50, &cfg).unwrap();
        let b = estimate_theta(0.7, 50, &cfg).unwrap();
        assert!(a.survivors <= b.survivors);
    }

    #[test]
    fn rho_formula_identity() {
        let r = rho_from_alpha(MeanSe { mean: 1.0 / 3.0, se: 0.0, count: 1 });
        assert!((r.mean + 2.0).abs() < 1e-12);
    }

    #[test]
    fn pc_degenerate_replicas() {
        assert!(matches!(scan_pc(0.5, 50, 0.01, &McConfig::new(1, 1)), Err(Error::NoBracket { .. })));
        assert!(scan_pc(1.5, 50, 0.01, &McConfig::new(10, 1)).is_err());
    }

    #[test]
    fn tail_refusals() {
        let cfg = McConfig::new(200, 4);
        assert_eq!(fit_tail_tau(1.0, 5, 40, 60, &cfg).unwrap_err(), Error::NoFiniteDeaths);
        assert!(matches!(fit_tail_upper(1.0, 1.1, 20, &cfg), Err(Error::TooFewBins { .. })));
        assert_eq!(upper_tail_counts(1.0, 1.1, 20, &cfg).unwrap(), vec![0; 20]);
        assert!(matches!(fit_tail_upper(0.8, 0.0, 20, &cfg), Err(Error::AlphaPrimeTooSmall { .. })));
    }

    #[test]
    fn mono_pointwise_coupling() {
        let r = monotonicity_report(&[0.7, 0.8, 0.9, 1.0], 30, &McConfig::new(200, 2)).unwrap();
        assert_eq!(r.pointwise_violations, 0);
        for w in r.rows.windows(2) {
            assert!(w[0].alpha.mean <= w[1].alpha.mean);
        }
        assert_eq!(r.rows[3].alpha.mean, 1.0);
    }
}
