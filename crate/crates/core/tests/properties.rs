use operc::block::BlockSpec;
use operc::estimators::{estimate_theta, monotonicity_report};
use operc::oracle::{count_contours, exact_tau_dist};
use operc::replicas::{fold_replicas, map_replicas};
use operc::*;
use proptest::prelude::*;

#[test]
fn parity_and_round_trip_over_many_sites() {
    let f = EnvField::new(99);
    for i in 0..100_000u64 {
        let n = (f.bits(i as i64, 0) % 10_000) as i64;
        let m = (f.bits(i as i64, 1) % 20_001) as i64 - 10_000;
        let m = if (n + m) % 2 == 0 { m } else { m + 1 };
        let s = SiteR::new(n, m).unwrap();
        for t in s.neighbors() {
            assert!(t.is_valid());
        }
        assert_eq!(to_rotated(to_reflected(s)).unwrap(), s);
    }
}

#[test]
fn determinism_of_rectangles() {
    let a = EnvField::new(5);
    let b = EnvField::new(5);
    let grid = |f: &EnvField| -> Vec<bool> {
        (0..40).flat_map(|n| (-40..=40).filter(move |m| (n + m) % 2 == 0).map(move |m| (n, m)))
            .map(|(n, m)| f.is_open(n, m, 0.6))
            .collect()
    };
    assert_eq!(grid(&a), grid(&b));
}

#[test]
fn theta_coupled_in_p() {
    let cfg = McConfig::new(2000, 8);
    let lo = estimate_theta(0.6, 60, &cfg).unwrap();
    let hi = estimate_theta(0.7, 60, &cfg).unwrap();
    assert!(lo.survivors <= hi.survivors);
}

#[test]
fn alpha_pointwise_monotone_under_coupling() {
    let rep = monotonicity_report(&[0.7, 0.8, 0.9, 1.0], 40, &McConfig::new(300, 2)).unwrap();
    assert_eq!(rep.pointwise_violations, 0);
}

#[test]
fn reductions_do_not_depend_on_workers() {
    let cfg = McConfig::new(777, 4);
    let run = |w| {
        fold_replicas(
            &cfg.with_workers(w),
            || 0.0f64,
            |a, _, env| *a += death_time(env, 0.7, 30).unwrap().to_f64().min(1e9),
            |a, b| *a += b,
        )
        .unwrap()
    };
    assert_eq!(run(1).to_bits(), run(3).to_bits());
    let a = map_replicas(&cfg.with_workers(1), |r, _| r).unwrap();
    assert_eq!(a, (0..777).collect::<Vec<_>>());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn openness_is_monotone_in_p(seed in any::<u64>(), n in 0i64..1000, k in -500i64..500, p in 0.0f64..1.0, dq in 0.0f64..1.0) {
        let m = if (n + k) % 2 == 0 { k } else { k + 1 };
        let f = EnvField::new(seed);
        let q = (p + dq).min(1.0);
        prop_assert!(!f.is_open(n, m, p) || f.is_open(n, m, q));
        let u = f.uniform(n, m);
        prop_assert!((0.0..1.0).contains(&u));
    }

    #[test]
    fn xi_edges_are_ordered(seed in any::<u64>(), p in 0.0f64..=1.0) {
        let f = EnvField::new(seed);
        let t = run_xi(&f, p, &StarterSpec::origin(), 40).unwrap();
        for n in 0..=40 {
            if t.u[n] != ExtInt::NegInf {
                prop_assert!(t.l[n] <= t.u[n]);
                prop_assert!(t.u[n] <= ExtInt::Finite(n as i64));
            }
        }
    }

    #[test]
    fn frontier_sets_grow_with_p(seed in any::<u64>(), p in 0.0f64..1.0, dq in 0.0f64..0.5) {
        let f = EnvField::new(seed);
        let q = (p + dq).min(1.0);
        let mut a = FrontierState::new(0, vec![0]).unwrap();
        let mut b = a.clone();
        for _ in 0..30 {
            a.advance(&f, p);
            b.advance(&f, q);
            prop_assert!(a.cur().iter().all(|m| b.cur().binary_search(m).is_ok()));
        }
    }

    #[test]
    fn barred_separation_matches_death(seed in any::<u64>(), p in 0.2f64..=1.0) {
        let f = EnvField::new(seed);
        let e = run_barred(&f, p, 40, 80).unwrap();
        let direct = run_xi(&f, p, &StarterSpec::origin(), 40).unwrap().tau;
        if let Ok(via) = tau_via_edges(&e) {
            prop_assert_eq!(via, direct);
        }
    }

    #[test]
    fn exact_tau_sums_to_one(p in 0.0f64..=1.0) {
        let d = exact_tau_dist(p, 4).unwrap();
        prop_assert!((d.probs.iter().map(operc::oracle::rat_f64).sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert_eq!(d.total(), num_rational::BigRational::from_integer(1.into()));
    }

    #[test]
    fn contours_bounded(m in 1usize..=18) {
        let c = count_contours(m, true, None).unwrap();
        prop_assert!(c.no_reversal <= c.bound);
    }

    #[test]
    fn block_spec_json_round_trip(a in 1i64..40, l in 1i64..8) {
        let alpha = format!("{}/40", a);
        if let Ok(spec) = BlockSpec::parse(&alpha, "1/5", 10 * l) {
            let js = serde_json::to_string(&spec).unwrap();
            let back: BlockSpec = serde_json::from_str(&js).unwrap();
            prop_assert_eq!(back, spec);
        }
    }
}
