use operc::block::{
    block_geometry, check_dependence_footprint, eta_frequency, peierls_bound, run_eta_percolation, splice_report,
};
use operc::estimators::{
    estimate_alpha, estimate_rho, estimate_theta, fit_tail_tau, fit_tail_upper, monotonicity_report, scan_pc,
    TailFit,
};
use operc::oracle::{
    compare_crossing, compare_tau, compare_u, count_contours, exact_addingpoints, exact_alpha_n, exact_crossing,
    exact_dist_u, exact_tau_dist, rat_f64, ComparisonRow, ExactDist,
};
use operc::verify::{verify_invariants, Check};
use operc::{EtaMode, StarterSpec};
use serde_json::json;

use crate::config::{Command, ExperimentConfig, OracleKind, StartKind};
use crate::row;
use crate::table::{Meta, ResultTable};
use crate::CliError;

/// A finished command: its table, and a description of the first failed
/// invariant if any.
#[derive(Debug)]
pub struct Outcome {
    pub table: ResultTable,
    pub invariant_failure: Option<String>,
}

impl Outcome {
    fn ok(table: ResultTable) -> Self {
        Outcome { table, invariant_failure: None }
    }
}

fn grid(cfg: &ExperimentConfig, default_p: f64) -> Vec<f64> {
    match (&cfg.p_grid, cfg.p) {
        (Some(g), _) => g.clone(),
        (None, Some(p)) => vec![p],
        (None, None) => vec![default_p],
    }
}

pub fn execute(cmd: Command, cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    let meta = Meta::new(cmd.name(), cfg);
    match cmd {
        Command::Alpha => alpha(meta, cfg),
        Command::Rho => rho(meta, cfg),
        Command::Theta => theta(meta, cfg),
        Command::Pc => pc(meta, cfg),
        Command::Tails => tails(meta, cfg),
        Command::Mono => mono(meta, cfg),
        Command::Block => block(meta, cfg),
        Command::Verify => verify(meta, cfg),
        Command::Oracle(_) => oracle(meta, cfg),
    }
}

fn alpha(meta: Meta, cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    let n_levels = cfg.horizon.unwrap_or(200);
    let mc = cfg.mc(1000);
    let mut t = ResultTable::new(meta, &["p", "n", "alpha_n", "se", "replicas", "used", "truncation_rate"]);
    for p in grid(cfg, 0.8) {
        let a = estimate_alpha(p, n_levels, cfg.k, &mc)?;
        for (i, m) in a.alpha_n.iter().enumerate() {
            t.push(row![p, i + 1, m.mean, m.se, a.replicas, a.used, a.truncation_rate]);
        }
        t.note(format!(
            "p={p}: alpha_hat={} se={} at n={n_levels}, K={}, used {}/{}, alpha<=1: {}",
            a.alpha_hat.mean, a.alpha_hat.se, a.k, a.used, a.replicas, a.below_one
        ));
    }
    Ok(Outcome::ok(t))
}

fn rho(meta: Meta, cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    let columns = cfg.horizon.unwrap_or(50);
    let mc = cfg.mc(300);
    let mut t = ResultTable::new(
        meta,
        &[
            "p", "columns", "replicas", "survivors", "unresolved", "slope_direct", "slope_direct_se",
            "slope_formula", "slope_formula_se", "rho_direct", "rho_direct_se", "rho_formula", "rho_formula_se",
            "alpha", "alpha_se", "geometric_bound", "geometric_ok", "discrepancy_se",
        ],
    );
    for p in grid(cfg, 0.8) {
        let r = estimate_rho(p, columns, cfg.alpha_levels, &mc)?;
        t.push(row![
            p,
            columns,
            r.replicas,
            r.survivors,
            r.unresolved,
            r.slope_direct.mean,
            r.slope_direct.se,
            r.slope_formula.mean,
            r.slope_formula.se,
            r.rho_direct.mean,
            r.rho_direct.se,
            r.rho_formula.mean,
            r.rho_formula.se,
            r.alpha.alpha_hat.mean,
            r.alpha.alpha_hat.se,
            r.geometric_bound,
            r.geometric_ok,
            r.discrepancy(),
        ]);
        t.note(format!(
            "p={p}: rho_direct={:.4}±{:.4} rho_formula={:.4}±{:.4} ({:.2} joint SE), bound {:.4} ok={}",
            r.rho_direct.mean,
            r.rho_direct.se,
            r.rho_formula.mean,
            r.rho_formula.se,
            r.discrepancy(),
            r.geometric_bound,
            r.geometric_ok
        ));
    }
    Ok(Outcome::ok(t))
}

fn theta(meta: Meta, cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    let horizon = cfg.horizon.unwrap_or(200);
    let mc = cfg.mc(1000);
    let mut t = ResultTable::new(meta, &["p", "horizon", "replicas", "survivors", "theta", "se"]);
    for p in grid(cfg, 0.8) {
        let th = estimate_theta(p, horizon, &mc)?;
        t.push(row![p, horizon, th.replicas, th.survivors, th.theta.mean, th.theta.se]);
        t.note(format!("p={p}: theta={} se={} (horizon {horizon})", th.theta.mean, th.theta.se));
    }
    Ok(Outcome::ok(t))
}

fn pc(meta: Meta, cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    let horizon = cfg.horizon.unwrap_or(200);
    let mc = cfg.mc(1000);
    let b = scan_pc(cfg.threshold, horizon, cfg.tolerance, &mc)?;
    let levels = cfg.alpha_levels.unwrap_or(horizon);
    let a = estimate_alpha(b.midpoint(), levels, None, &mc.substream(7))?;
    let mut t = ResultTable::new(
        meta,
        &[
            "threshold", "horizon", "replicas", "lo", "hi", "theta_lo", "theta_lo_se", "theta_hi", "theta_hi_se",
            "steps", "midpoint", "alpha_mid", "alpha_mid_se",
        ],
    );
    t.push(row![
        b.threshold,
        horizon,
        b.replicas,
        b.lo,
        b.hi,
        b.theta_lo.mean,
        b.theta_lo.se,
        b.theta_hi.mean,
        b.theta_hi.se,
        b.steps,
        b.midpoint(),
        a.alpha_hat.mean,
        a.alpha_hat.se
    ]);
    t.note(format!(
        "bracket [{}, {}] after {} steps; theta(lo)={:.4} theta(hi)={:.4}; alpha at midpoint {:.4}±{:.4}",
        b.lo, b.hi, b.steps, b.theta_lo.mean, b.theta_hi.mean, a.alpha_hat.mean, a.alpha_hat.se
    ));
    Ok(Outcome::ok(t))
}

fn fit_row(kind: &str, p: f64, alpha_prime: f64, f: &TailFit) -> Vec<crate::table::Cell> {
    row![kind, p, alpha_prime, f.gamma_hat, f.c_hat, f.r_squared, f.n_range.0, f.n_range.1, f.bins.len(), f.replicas]
}

fn tails(meta: Meta, cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    let n_max = cfg.horizon.unwrap_or(40);
    let upper_levels = cfg.alpha_levels.unwrap_or(200);
    let death_horizon = cfg.death_horizon.unwrap_or(3 * n_max);
    let mc = cfg.mc(100_000);
    let mut t = ResultTable::new(
        meta,
        &["kind", "p", "alpha_prime", "gamma_hat", "c_hat", "r_squared", "n_lo", "n_hi", "bins", "replicas"],
    );
    let mut extra = Vec::new();
    for p in grid(cfg, 0.8) {
        let tau = fit_tail_tau(p, cfg.n_min, n_max, death_horizon, &mc)?;
        let alpha_prime = match cfg.alpha_prime {
            Some(a) => a,
            None => estimate_alpha(p, upper_levels, None, &mc.substream(1))?.alpha_hat.mean + 0.1,
        };
        let up = fit_tail_upper(p, alpha_prime, upper_levels, &mc)?;
        t.push(fit_row("tau", p, f64::NAN, &tau));
        t.push(fit_row("upper", p, alpha_prime, &up));
        t.note(format!(
            "p={p}: P(n<=tau<oo) gamma={:.4} R2={:.4}; P(ubar_n>{alpha_prime:.4}n) gamma={:.4} R2={:.4}",
            tau.gamma_hat, tau.r_squared, up.gamma_hat, up.r_squared
        ));
        extra.push(json!({ "p": p, "death_horizon": death_horizon, "tau": tau, "upper": up }));
    }
    t.extra = Some(json!(extra));
    Ok(Outcome::ok(t))
}

fn mono(meta: Meta, cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    let levels = cfg.horizon.unwrap_or(200);
    let grid = cfg.p_grid.clone().unwrap_or_else(|| vec![0.7, 0.8, 0.9, 1.0]);
    let rep = monotonicity_report(&grid, levels, &cfg.mc(300))?;
    let mut t = ResultTable::new(meta, &["p", "q", "diff", "se", "bound", "margin", "ok"]);
    for pr in &rep.pairs {
        t.push(row![pr.p, pr.q, pr.diff.mean, pr.diff.se, pr.bound, pr.margin, pr.ok]);
    }
    for r in &rep.rows {
        t.note(format!("alpha_hat[{}] = {:.4} ± {:.4}", r.p, r.alpha.mean, r.alpha.se));
    }
    t.note(format!(
        "max adjacent jump {:.4}; pointwise coupling violations {}; lowest grid point near 0: {}",
        rep.max_adjacent_jump, rep.pointwise_violations, rep.lowest_near_zero
    ));
    t.extra = Some(serde_json::to_value(&rep).expect("report serializes"));
    let bad = rep.pointwise_violations > 0;
    Ok(Outcome {
        table: t,
        invariant_failure: bad.then(|| format!("{} pointwise coupling violations", rep.pointwise_violations)),
    })
}

fn block(meta: Meta, cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    let b = &cfg.block;
    let spec = b.spec;
    let p = cfg.p.unwrap_or(0.85);
    let mc = cfg.mc(1000);
    let geometry = block_geometry(&spec, 0, 0)?;
    let eta = eta_frequency(p, &spec, 0, 0, &mc)?;
    let perc = run_eta_percolation(&EtaMode::Underlying { p, spec }, b.eta_levels, &mc.substream(1))?;
    let foot = check_dependence_footprint(&spec, b.footprint_range);
    let splice_mc = operc::McConfig { replicas: b.splice_trials, ..mc.substream(2) };
    let splice = splice_report(p, &spec, &splice_mc)?;
    let peierls = peierls_bound(b.eps, b.peierls_n, None)?;
    let mut t = ResultTable::new(meta, &["metric", "value", "se"]);
    t.push(row!["eta_frequency", eta.mean, eta.se]);
    t.push(row!["eta_survival", perc.survival.mean, perc.survival.se]);
    t.push(row!["eta_mean_cluster_size", perc.mean_cluster_size, f64::NAN]);
    t.push(row!["footprint_pairs_checked", foot.pairs_checked as f64, f64::NAN]);
    t.push(row!["footprint_violations", foot.violation_count as f64, f64::NAN]);
    t.push(row!["footprint_max_overlaps", foot.max_overlaps as f64, f64::NAN]);
    t.push(row!["splice_trials", splice.trials as f64, f64::NAN]);
    t.push(row!["splice_occurrences", splice.occurrences as f64, f64::NAN]);
    t.push(row!["splice_verified", splice.verified as f64, f64::NAN]);
    t.push(row!["peierls_factor", peierls.factor, f64::NAN]);
    t.push(row!["peierls_bound", peierls.bound, f64::NAN]);
    t.push(row!["peierls_threshold_met", peierls.survival_threshold_met as u8 as f64, f64::NAN]);
    t.note(format!("spec alpha={} delta={} L={}; right column {}", spec.alpha(), spec.delta(), spec.l(), geometry.right_column));
    t.note(format!("P(eta=1) = {:.4} ± {:.4}; eta cluster survives {} levels: {:.4}", eta.mean, eta.se, b.eta_levels, perc.survival.mean));
    t.note(format!(
        "footprint: {} pairs, {} violations, max overlaps {}",
        foot.pairs_checked, foot.violation_count, foot.max_overlaps
    ));
    t.note(format!("splice: {}/{} occurrences verified over {} trials", splice.verified, splice.occurrences, splice.trials));
    t.note(format!("peierls: eps={} below 3^-28: {}", b.eps, peierls.survival_threshold_met));
    t.extra = Some(json!({
        "geometry": geometry,
        "footprint": foot,
        "splice": splice,
        "peierls": peierls,
        "eta_survival": perc,
    }));
    let failure = if !foot.ok {
        Some(format!("dependence footprint violated, first pairs {:?}", foot.violations))
    } else if !splice.ok() {
        Some(format!("splice failed: {:?}", splice.first_failure))
    } else {
        None
    };
    Ok(Outcome { table: t, invariant_failure: failure })
}

fn verify(meta: Meta, cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    let horizon = cfg.horizon.unwrap_or(60);
    let grid = match (&cfg.p_grid, cfg.p) {
        (Some(g), _) => g.clone(),
        (None, Some(p)) => vec![p],
        (None, None) => vec![0.3, 0.6, 0.8],
    };
    let rep = verify_invariants(&grid, horizon, &Check::ALL, &cfg.mc(10_000))?;
    let mut t = ResultTable::new(meta, &["check", "p", "configs", "trials", "failures", "undecided", "exact"]);
    let mut failure = None;
    for r in &rep.rows {
        let exact = r.exact.map_or(crate::table::Cell::Str(String::new()), |e| e.into());
        t.push(vec![
            r.check.name().into(),
            r.p.into(),
            r.configs.into(),
            r.trials.into(),
            r.failures.into(),
            r.undecided.into(),
            exact,
        ]);
        t.note(format!(
            "{:<14} p={:<4} trials={:<8} failures={} undecided={} runtime={:.2}s",
            r.check.name(),
            r.p,
            r.trials,
            r.failures,
            r.undecided,
            r.runtime_s
        ));
        if let (None, Some(f)) = (&failure, &r.first_failure) {
            failure = Some(format!(
                "{} at p={}: replica {} (env seed {}), level {}, heights {:?}: {}",
                r.check.name(),
                r.p,
                f.replica,
                f.env_seed,
                f.level,
                f.window,
                f.detail
            ));
        }
    }
    Ok(Outcome { table: t, invariant_failure: failure })
}

fn dist_table(meta: Meta, d: &ExactDist) -> ResultTable {
    let mut t = ResultTable::new(meta, &["value", "prob", "prob_f64"]);
    for (v, p) in d.support.iter().zip(&d.probs) {
        let exact = if p.is_integer() { p.numer().to_string() } else { format!("{}/{}", p.numer(), p.denom()) };
        t.push(row![*v, exact, rat_f64(p)]);
    }
    t.extra = Some(serde_json::to_value(d).expect("dist serializes"));
    t
}

fn comparison_table(meta: Meta, rows: Vec<ComparisonRow>) -> Outcome {
    let mut t = ResultTable::new(meta, &["label", "value", "exact", "observed", "se", "ok"]);
    let bad = rows.iter().filter(|r| !r.ok).count();
    for r in &rows {
        t.push(row![r.label.clone(), r.value.clone(), r.exact, r.observed, r.se, r.ok]);
    }
    t.note(format!("{} support points, {} outside 3 SE", rows.len(), bad));
    Outcome { table: t, invariant_failure: (bad > 0).then(|| format!("{bad} support points outside 3 SE")) }
}

fn oracle(meta: Meta, cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    let o = &cfg.oracle;
    let p = cfg.p.unwrap_or(0.5);
    let out = match o.kind {
        OracleKind::Tau => {
            let d = exact_tau_dist(p, o.n)?;
            let mut t = dist_table(meta, &d);
            t.note(format!("death time at p={p}, +inf = alive at level {}", o.n));
            Outcome::ok(t)
        }
        OracleKind::U => {
            let start = match o.start {
                StartKind::Origin => StarterSpec::origin(),
                StartKind::Below => StarterSpec::below(0, -o.k - o.n as i64),
            };
            let d = exact_dist_u(p, o.n, &start)?;
            let mut t = dist_table(meta, &d);
            t.note(format!("sup of level {} at p={p} from {:?} starters", o.n, o.start));
            Outcome::ok(t)
        }
        OracleKind::AlphaN => {
            let a = exact_alpha_n(p, o.n, o.k)?;
            let mut t = ResultTable::new(meta, &["p", "n", "k", "alpha_n", "alpha_n_f64", "untruncated", "untruncated_f64"]);
            t.push(row![p, o.n, o.k, a.alpha_n.clone(), a.alpha_n_f64, a.untruncated.clone(), a.untruncated_f64]);
            t.note(format!("alpha_{} = {} on the untruncated event (prob {})", o.n, a.alpha_n_f64, a.untruncated_f64));
            Outcome::ok(t)
        }
        OracleKind::Addingpoints => {
            let mut t = ResultTable::new(
                meta,
                &["p", "n", "slack", "gap_lower", "gap_lower_f64", "gap_upper", "gap_upper_f64", "two_p", "verdict"],
            );
            for p in grid(cfg, 0.5) {
                for n in 0..=o.n {
                    let a = exact_addingpoints(p, n, o.slack)?;
                    let verdict = serde_json::to_value(a.verdict).expect("verdict").as_str().unwrap_or("").to_string();
                    t.push(row![
                        p,
                        n,
                        o.slack,
                        a.gap_lower.clone(),
                        a.gap_lower_f64,
                        a.gap_upper.clone().unwrap_or_else(|| "inf".into()),
                        a.gap_upper_f64,
                        2.0 * p,
                        verdict
                    ]);
                }
            }
            t.note("gap bracketed in exact arithmetic; certified means the lower end is >= 2p".to_string());
            Outcome::ok(t)
        }
        OracleKind::Contours => {
            let mut t = ResultTable::new(meta, &["m", "first_fixed", "no_reversal", "balanced", "bound"]);
            for m in 1..=o.n {
                let c = count_contours(m, o.first_fixed, o.target)?;
                let bal = c.balanced.map_or(crate::table::Cell::Str(String::new()), |b| b.into());
                t.push(vec![m.into(), c.first_fixed.into(), c.no_reversal.into(), bal, c.bound.into()]);
            }
            Outcome::ok(t)
        }
        OracleKind::Crossing => {
            let c = exact_crossing(p, &cfg.block.spec)?;
            let mut t = ResultTable::new(meta, &["event", "prob", "prob_f64"]);
            t.push(row!["up", c.up.clone(), c.up_f64]);
            t.push(row!["down", c.down.clone(), c.down_f64]);
            t.push(row!["both", c.both.clone(), c.both_f64]);
            t.note(format!("{} sites in the two parallelograms", c.sites));
            Outcome::ok(t)
        }
        OracleKind::CompareTau => comparison_table(meta, compare_tau(p, o.n, &cfg.mc(100_000))?),
        OracleKind::CompareU => comparison_table(meta, compare_u(p, o.n, o.k, &cfg.mc(100_000))?),
        OracleKind::CompareCrossing => comparison_table(meta, compare_crossing(p, &cfg.block.spec, &cfg.mc(100_000))?),
    };
    Ok(out)
}
