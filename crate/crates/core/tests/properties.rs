use proptest::prelude::*;
use smc::features::{Boundary, FeatureTerm};
use smc::{
    cross_correlation, demean, init_objective_state, log_returns, objective_delta, rho, EmpiricalDistribution,
    FeatureSpec, FeatureVector, PlottingPosition, PriceSeries, ReturnSeries, Transform,
};

fn series(min: usize, max: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-10.0f64..10.0, min..max)
}

fn permutation_of(v: Vec<f64>) -> impl Strategy<Value = (Vec<f64>, Vec<usize>)> {
    let n = v.len();
    (Just(v), Just((0..n).collect::<Vec<_>>()).prop_shuffle())
}

fn apply(v: &[f64], perm: &[usize]) -> Vec<f64> {
    perm.iter().map(|&k| v[k]).collect()
}

fn not_constant(v: &[f64]) -> bool {
    v.iter().any(|&x| x != v[0])
}

const TRANSFORMS: [Transform; 3] = [Transform::Centered, Transform::Absolute, Transform::Square];

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn log_returns_reconstruct_prices(prices in prop::collection::vec(0.01f64..1e4, 2..200)) {
        let p = PriceSeries::new(prices.clone(), None).unwrap();
        let r = log_returns(&p, 1).unwrap();
        prop_assert_eq!(r.len(), prices.len() - 1);
        let mut log_p = prices[0].ln();
        for (k, x) in r.values().iter().enumerate() {
            log_p += x;
            let rebuilt = log_p.exp();
            prop_assert!((rebuilt - prices[k + 1]).abs() <= 1e-9 * prices[k + 1]);
        }
    }

    #[test]
    fn log_return_count(prices in prop::collection::vec(0.01f64..1e4, 2..100), interval in 1usize..10) {
        let p = PriceSeries::new(prices.clone(), None).unwrap();
        match log_returns(&p, interval) {
            Ok(r) => prop_assert_eq!(r.len(), prices.len() - interval),
            Err(_) => prop_assert!(interval >= prices.len()),
        }
    }

    #[test]
    fn demean_idempotent_and_equivariant((v, perm) in series(1, 100).prop_flat_map(permutation_of)) {
        let r = ReturnSeries::new(v.clone()).unwrap();
        let once = demean(&r);
        let twice = demean(&once);
        prop_assert_eq!(twice.values(), once.values());

        let permuted = demean(&ReturnSeries::new(apply(&v, &perm)).unwrap());
        let expected = apply(once.values(), &perm);
        prop_assert_eq!(permuted.values(), expected.as_slice());
    }

    #[test]
    fn return_series_mean(v in series(1, 100)) {
        let r = ReturnSeries::new(v.clone()).unwrap();
        let naive = v.iter().sum::<f64>() / v.len() as f64;
        let scale = v.iter().map(|x| x.abs()).fold(1e-300, f64::max);
        prop_assert!((r.mean() - naive).abs() <= 1e-12 * scale);
    }

    #[test]
    fn inverse_round_trip_at_knots(v in series(2, 200)) {
        let d = EmpiricalDistribution::fit(&v, PlottingPosition::Midpoint).unwrap();
        for (x, u) in d.sorted_values().iter().zip(d.cdf_levels()) {
            prop_assert_eq!(d.inverse_transform(*u).unwrap(), *x);
        }
    }

    #[test]
    fn inverse_monotone_and_in_range(
        v in series(2, 200),
        mut us in prop::collection::vec(0.0f64..=1.0, 2..50),
    ) {
        let d = EmpiricalDistribution::fit(&v, PlottingPosition::Midpoint).unwrap();
        us.sort_by(f64::total_cmp);
        let xs: Vec<f64> = us.iter().map(|&u| d.inverse_transform(u).unwrap()).collect();
        for w in xs.windows(2) {
            prop_assert!(w[0] <= w[1]);
        }
        for x in xs {
            prop_assert!(d.min() <= x && x <= d.max());
        }
    }

    #[test]
    fn objective_is_a_pseudometric(
        a in prop::collection::vec(-1.0f64..1.0, 6),
        b in prop::collection::vec(-1.0f64..1.0, 6),
        c in prop::collection::vec(-1.0f64..1.0, 6),
    ) {
        let spec = FeatureSpec::from_terms(vec![
            FeatureTerm::new(Transform::Centered, Transform::Centered, 4),
            FeatureTerm::new(Transform::Absolute, Transform::Absolute, 2).with_weight(2.5),
        ]);
        let (a, b, c) = (
            FeatureVector { entries: a },
            FeatureVector { entries: b },
            FeatureVector { entries: c },
        );
        let d = |x: &FeatureVector, y: &FeatureVector| objective_delta(x, y, &spec).unwrap();
        prop_assert_eq!(d(&a, &a), 0.0);
        prop_assert!(d(&a, &b) >= 0.0);
        prop_assert_eq!(d(&a, &b), d(&b, &a));
        prop_assert!(d(&a, &c) <= d(&a, &b) + d(&b, &c) + 1e-12);
    }

    #[test]
    fn self_objective_is_zero(v in series(8, 100).prop_filter("varied", |v| not_constant(v))) {
        for spec in [
            FeatureSpec::stylized_facts(3, 5),
            FeatureSpec::stylized_facts(3, 5).with_mode(smc::ObjectiveMode::PaperLiteral),
            FeatureSpec::target(v.clone()),
        ] {
            let r = rho(&v, &spec);
            // Zero-variance transforms (e.g. |x| of a two-valued symmetric series) are errors.
            if let Ok(r) = r {
                prop_assert_eq!(objective_delta(&r, &r, &spec).unwrap(), 0.0);
                prop_assert_eq!(init_objective_state(&v, &r, &spec).unwrap().delta(), 0.0);
            }
        }
    }

    #[test]
    fn autocorrelation_bound(v in series(4, 120).prop_filter("varied", |v| not_constant(v)), tau_frac in 0.0f64..1.0) {
        let n = v.len();
        let tau = 1 + (tau_frac * (n - 2) as f64) as usize;
        for t in TRANSFORMS {
            if let Ok(c) = cross_correlation(&v, t, t, tau) {
                prop_assert!(c.abs() <= n as f64 / (n - tau) as f64 + 1e-12, "{:?} lag {} gave {}", t, tau, c);
            }
        }
    }

    #[test]
    fn norms_are_permutation_invariant((v, perm) in series(8, 120).prop_flat_map(permutation_of)) {
        let spec = FeatureSpec::stylized_facts(2, 3);
        let w = apply(&v, &perm);
        let Ok(target) = rho(&v, &spec) else { return Ok(()) };
        let a = init_objective_state(&v, &target, &spec).unwrap();
        let b = init_objective_state(&w, &target, &spec).unwrap();
        prop_assert_eq!(a.norms(), b.norms());
        prop_assert!(a.norms().iter().all(|&m| m > 0.0));
    }

    #[test]
    fn incremental_swaps_match_recompute(
        v in series(20, 80).prop_filter("varied", |v| not_constant(v)),
        swaps in prop::collection::vec((0usize..1000, 0usize..1000), 1..30),
        circular in any::<bool>(),
    ) {
        let boundary = if circular { Boundary::Circular } else { Boundary::NonCircular };
        let spec = FeatureSpec::stylized_facts(3, 6).with_boundary(boundary);
        let target: Vec<f64> = (0..v.len()).map(|t| (t as f64 * 0.37).sin()).collect();
        let Ok(want) = rho(&target, &spec) else { return Ok(()) };
        let Ok(mut state) = init_objective_state(&v, &want, &spec) else { return Ok(()) };
        let mut z = v.clone();
        for (a, b) in swaps {
            let (i, j) = (a % v.len(), b % v.len());
            if i == j {
                continue;
            }
            let p = state.swap_delta(i, j).unwrap();
            state.apply_swap(&p).unwrap();
            z.swap(i, j);
            let full = objective_delta(&want, &rho(&z, &spec).unwrap(), &spec).unwrap();
            prop_assert!((state.delta() - full).abs() <= 1e-9 * full.max(1.0));
        }
        prop_assert_eq!(state.series(), z.as_slice());
    }

    #[test]
    fn phase_diagram_shape(z in series(2, 200), lag_frac in 0.0f64..1.0) {
        let lag = 1 + (lag_frac * (z.len() - 2) as f64) as usize;
        let p = smc::diagnostics::phase_diagram(&z, lag).unwrap();
        prop_assert_eq!(p.points.len(), z.len() - lag);
        let lo = z.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        for (a, b) in &p.points {
            prop_assert!(lo <= *a && *a <= hi && lo <= *b && *b <= hi);
        }
    }

    #[test]
    fn band_shape(n in 3usize..100_000, lag_frac in 0.0f64..1.0) {
        use smc::features::white_noise_band;
        let lag = 1 + (lag_frac * (n - 3) as f64) as usize;
        prop_assert!(white_noise_band(n + 1, lag) < white_noise_band(n, lag));
        prop_assert!(white_noise_band(n, lag + 1) > white_noise_band(n, lag));
    }

    #[test]
    fn panels_of_identical_series_agree(seed in any::<u64>()) {
        let x = smc::diagnostics::StochasticVolatility::default().generate(300, seed).unwrap();
        let panels = smc::diagnostics::acf_panels(&x, &x, 5, 12).unwrap();
        for panel in [&panels.absolute, &panels.leverage, &panels.returns] {
            prop_assert_eq!(panel.max_discrepancy(), 0.0);
        }
    }
}
