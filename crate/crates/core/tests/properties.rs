use std::collections::BTreeSet;

use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use stochmort::data::{read_panel_csv, simulate_panel, stationary_initial_state, write_panel_csv};
use stochmort::diagnostics::DicReport;
use stochmort::forecast::forecast_seeded;
use stochmort::gibbs::{read_chain_csv, write_chain_csv};
use stochmort::lgssm::{ffbs_sample, kalman_filter};
use stochmort::model::build_system;
use stochmort::*;

fn window(p: usize, n: usize) -> AgeYearWindow {
    AgeYearWindow::new(50..=(49 + p as i32), 1990..=(1989 + n as i32)).unwrap()
}

fn normalized(v: Vec<f64>) -> Vec<f64> {
    let s: f64 = v.iter().sum();
    v.into_iter().map(|x| x / s).collect()
}

prop_compose! {
    fn arb_params(kind: ModelKind, p: usize)(
        alpha in prop::collection::vec(-6.0..-2.0f64, p),
        beta in prop::collection::vec(0.2..1.0f64, p),
        bg in prop::collection::vec(0.2..1.0f64, p),
        theta in -0.5..0.5f64,
        eta in -0.3..0.3f64,
        lambda in -0.95..0.95f64,
        vars in prop::collection::vec(1e-3..0.2f64, 3),
    ) -> StaticParams {
        let cohort = kind.has_cohort();
        StaticParams {
            alpha,
            beta: normalized(beta),
            beta_gamma: (kind == ModelKind::FullCohort).then(|| normalized(bg)),
            theta,
            eta: cohort.then_some(eta),
            lambda: cohort.then_some(lambda),
            sigma2_eps: vars[0],
            sigma2_kappa: vars[1],
            sigma2_gamma: cohort.then_some(vars[2]),
        }
    }
}

fn arb_kind() -> impl Strategy<Value = ModelKind> {
    prop::sample::select(ModelKind::ALL.to_vec())
}

fn arb_case() -> impl Strategy<Value = (ModelKind, usize, usize, StaticParams, u64)> {
    (arb_kind(), 2..5usize, 2..7usize).prop_flat_map(|(kind, p, n)| {
        (Just(kind), Just(p), Just(n), arb_params(kind, p), any::<u64>())
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn ffbs_paths_satisfy_the_shift_identity((kind, p, n, params, seed) in arb_case()) {
        let spec = ModelSpec::new(kind, window(p, n));
        let phi0 = stationary_initial_state(&spec, &params, 0.0, seed).unwrap();
        let y = simulate_panel(&spec, &params, &phi0, seed ^ 1).unwrap().panel.log_rates().clone();
        let sys = build_system(&spec, &params).unwrap();
        let d = spec.state_dim();
        let filter = kalman_filter(&y, &sys, &DVector::zeros(d), &DMatrix::identity(d, d)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..5 {
            let path = ffbs_sample(&filter, &sys, &mut rng).unwrap();
            prop_assert!(path.satisfies_shift_identity_exactly());
            prop_assert_eq!(path.n_steps(), n);
        }
    }

    #[test]
    fn full_model_with_flat_loadings_nests_the_simplified_model(
        (_, p, n, params, seed) in arb_case().prop_filter("cohort", |c| c.0 == ModelKind::SimplifiedCohort)
    ) {
        let w = window(p, n);
        let simple = ModelSpec::new(ModelKind::SimplifiedCohort, w);
        let full = ModelSpec::new(ModelKind::FullCohort, w);
        let phi0 = stationary_initial_state(&simple, &params, 0.1, seed).unwrap();
        let path = simulate_panel(&simple, &params, &phi0, seed).unwrap().path;
        // loadings 1/p on a cohort factor scaled by p give the same cells
        let mut scaled = path.states().clone();
        scaled.rows_mut(1, p).scale_mut(p as f64);
        let full_params = StaticParams { beta_gamma: Some(vec![1.0 / p as f64; p]), ..params.clone() };
        let bs = build_system(&simple, &params).unwrap();
        let bf = build_system(&full, &full_params).unwrap();
        for t in 1..=n {
            let ms = &bs.obs_intercept + &bs.obs_matrix * path.state(t);
            let mf = &bf.obs_intercept + &bf.obs_matrix * scaled.column(t);
            prop_assert!((ms - mf).abs().max() < 1e-12);
        }
    }

    #[test]
    fn window_cohorts_are_year_minus_age(p in 2..12usize, n in 2..12usize, a0 in 0..90i32, y0 in 1900..2000i32) {
        let w = AgeYearWindow::new(a0..=(a0 + p as i32 - 1), y0..=(y0 + n as i32 - 1)).unwrap();
        let mut seen = BTreeSet::new();
        for age in w.ages() {
            for year in w.years() {
                let c = w.cohort_index(age, year).unwrap();
                prop_assert_eq!(c, year - age);
                seen.insert(c);
            }
        }
        prop_assert_eq!(seen.len(), n + p - 1);
        prop_assert_eq!(w.n_cohorts(), n + p - 1);
    }

    #[test]
    fn panel_csv_round_trip_is_bitwise(p in 2..6usize, n in 2..6usize, values in prop::collection::vec(-20.0..5.0f64, 36)) {
        let w = window(p, n);
        let panel = DataPanel::new(w, DMatrix::from_fn(p, n, |i, j| values[i * 6 + j])).unwrap();
        let mut buf = Vec::new();
        write_panel_csv(&panel, &mut buf).unwrap();
        prop_assert_eq!(read_panel_csv(buf.as_slice(), "mem").unwrap(), panel);
    }

    #[test]
    fn chain_csv_round_trip_is_exact((kind, p, n, params, seed) in arb_case()) {
        let spec = ModelSpec::new(kind, window(p, n));
        let phi0 = stationary_initial_state(&spec, &params, -0.3, seed).unwrap();
        let path = simulate_panel(&spec, &params, &phi0, seed).unwrap().path;
        let chain = PosteriorChain {
            spec,
            config: SamplerConfig::new(3, 1, seed),
            draws: vec![Draw { params: params.clone(), path: path.clone() }, Draw { params, path }],
        };
        let mut buf = Vec::new();
        write_chain_csv(&chain, &mut buf).unwrap();
        prop_assert_eq!(read_chain_csv(buf.as_slice(), "mem").unwrap(), chain);
    }

    #[test]
    fn forecast_bands_are_ordered((kind, p, n, params, seed) in arb_case(), k in 1..6usize) {
        let spec = ModelSpec::new(kind, window(p, n));
        let phi0 = stationary_initial_state(&spec, &params, 0.0, seed).unwrap();
        let path = simulate_panel(&spec, &params, &phi0, seed).unwrap().path;
        let chain = PosteriorChain {
            spec,
            config: SamplerConfig::new(2, 1, seed),
            draws: vec![Draw { params, path }; 40],
        };
        let f = forecast_seeded(&chain, k, seed).unwrap();
        for g in [&f.log_rates, &f.rates] {
            prop_assert!(g.lower.iter().zip(g.upper.iter()).all(|(l, u)| l <= u));
        }
        prop_assert!(f.rates.lower.iter().all(|v| *v > 0.0));
    }

    #[test]
    fn dic_identities(mean_dev in -1e4..1e4f64, at_mean in -1e4..1e4f64) {
        let r = DicReport::from_deviances(mean_dev, at_mean);
        prop_assert!((r.p_d - (mean_dev - at_mean)).abs() <= 1e-12 * mean_dev.abs().max(1.0));
        prop_assert!((r.dic - (2.0 * mean_dev - at_mean)).abs() <= 1e-12 * mean_dev.abs().max(1.0) * 4.0);
        prop_assert!((r.dic - (r.mean_deviance + r.p_d)).abs() <= 1e-8);
    }
}
