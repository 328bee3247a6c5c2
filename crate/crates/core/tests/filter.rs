use approx::assert_relative_eq;
use proptest::prelude::*;

use roughctrl::control::{Axis, SENTINEL};
use roughctrl::filter::*;
use roughctrl::paths::uniform_grid;
use roughctrl::rough::lift_piecewise_linear;

fn field(values: Vec<f64>) -> KappaField {
    KappaField::new(Axis::new("mu", -2.0, 2.0, 5), Axis::new("sigma", 0.1, 1.0, 4), values).unwrap()
}

fn kappa_strategy() -> impl Strategy<Value = KappaField> {
    prop::collection::vec(prop_oneof![4 => 0.0f64..6.0, 1 => Just(SENTINEL)], 20)
        .prop_filter("one finite node", |v| v.iter().any(|x| *x < SENTINEL))
        .prop_map(field)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn expectation_is_monotone_and_translation_equivariant(kf in kappa_strategy(), shift in -3.0f64..3.0, k2 in 1.0f64..3.0) {
        let phi = |x: f64| (x - 0.3).tanh();
        let e = nonlinear_expectation(phi, &kf, 1.5, k2).unwrap().value;
        let above = nonlinear_expectation(|x| phi(x) + (x * x).min(1.0), &kf, 1.5, k2).unwrap().value;
        let shifted = nonlinear_expectation(|x| phi(x) + shift, &kf, 1.5, k2).unwrap().value;
        prop_assert!(above >= e - 1e-14);
        prop_assert!((shifted - e - shift).abs() <= 1e-12);
    }

    #[test]
    fn expectation_is_convex(kf in kappa_strategy(), lambda in 0.0f64..1.0) {
        let f = |x: f64| x.sin();
        let g = |x: f64| (x * x).min(2.0);
        let mix = nonlinear_expectation(|x| lambda * f(x) + (1.0 - lambda) * g(x), &kf, 1.0, 2.0).unwrap().value;
        let ef = nonlinear_expectation(f, &kf, 1.0, 2.0).unwrap().value;
        let eg = nonlinear_expectation(g, &kf, 1.0, 2.0).unwrap().value;
        prop_assert!(mix <= lambda * ef + (1.0 - lambda) * eg + 1e-12);
    }

    #[test]
    fn intervals_widen_as_the_penalty_softens(kf in kappa_strategy(), k1 in 0.2f64..4.0, factor in 1.0f64..5.0) {
        let phi = |x: f64| x;
        let tight = robust_interval(phi, &kf, k1, 1.0).unwrap();
        let loose = robust_interval(phi, &kf, k1 * factor, 1.0).unwrap();
        prop_assert!(tight.lower <= tight.upper + 1e-14);
        prop_assert!(loose.lower <= tight.lower + 1e-14);
        prop_assert!(loose.upper >= tight.upper - 1e-14);
        // scaling the field by 1/factor is the same as scaling k1 by factor
        let scaled = robust_interval(phi, &kf.scaled(1.0 / factor), k1, 1.0).unwrap();
        prop_assert!((scaled.upper - loose.upper).abs() <= 1e-12 * loose.upper.abs().max(1.0));
    }
}

#[test]
fn riccati_matches_its_closed_form() {
    let (alpha, sigma, c, r0) = (-0.7, 0.9, 1.3, 0.05);
    let model = FilterModel::scalar(alpha, sigma, c, 0.0, 0.0, r0).unwrap();
    let times = uniform_grid(0.0, 2.0, 4000);
    let y = roughctrl::paths::SampledPath::constant(times.clone(), &[0.0]).unwrap();
    let kb = kalman_bucy_forward(&model, &y).unwrap();
    // R' = -c²(R - r₊)(R - r₋)
    let disc = (alpha * alpha + c * c * sigma * sigma).sqrt();
    let (rp, rm) = ((alpha + disc) / (c * c), (alpha - disc) / (c * c));
    let w0 = (r0 - rp) / (r0 - rm);
    for (i, &t) in times.iter().enumerate().step_by(500) {
        let w = w0 * (-c * c * (rp - rm) * t).exp();
        let exact = (rp - w * rm) / (1.0 - w);
        assert_relative_eq!(kb.r.value(i)[0], exact, max_relative = 1e-6);
    }
}

#[test]
fn true_parameters_are_more_likely_on_average() {
    let truth = FilterModel::scalar(-0.5, 0.8, 1.5, 0.0, 0.0, 0.5).unwrap();
    let wrong = FilterModel::scalar(2.0, 0.8, 1.5, 0.0, 0.0, 0.5).unwrap();
    let mut gap = 0.0;
    for seed in 0..40 {
        let (_, y) = simulate_signal_observation(&truth, seed, 400, 4.0).unwrap();
        let t = neg_log_likelihood(&truth, Observation::Path(&y), LikelihoodMode::Ito).unwrap().value;
        let w = neg_log_likelihood(&wrong, Observation::Path(&y), LikelihoodMode::Ito).unwrap().value;
        gap += w - t;
    }
    assert!(gap / 40.0 > 0.0, "mean log-likelihood ratio {}", gap / 40.0);
}

#[test]
fn shooting_cost_is_the_forward_penalty_of_its_trajectory() {
    let truth = FilterModel::scalar(-0.4, 0.6, 1.0, 0.0, 0.0, 0.5).unwrap();
    let (_, y) = simulate_signal_observation(&truth, 21, 2000, 1.0).unwrap();
    let obs = lift_piecewise_linear(&y);
    let cfg = PenaltyConfig {
        k1: 1.0,
        k2: 1.0,
        prior_mean: vec![0.0],
        prior_cov: vec![0.5],
        mean_weight: 1.0,
        cov_weight: 1.0,
        gamma_ref: vec![-0.4, 0.6, 1.0, 0.0],
        mask: vec![true, false, false, false],
        running_weight: 1.0,
        initial_weight: 1.0,
    };
    let spec = cfg.to_spec().unwrap();
    let epsilon = 0.5;
    let ctl = FilterControl::reduced(0.6, 1.0, spec.clone(), epsilon, 2.0).unwrap();
    let opts = ShootingOptions { n_pieces: 4, seeds: vec![1, 2], max_sweeps: 40, ..ShootingOptions::default() };
    let (mu, sig, a) = ([0.3], [0.25], [-0.2]);
    let res = filter_value_shooting(1.0, &mu, &sig, &a, &ctl, &obs, &opts).unwrap();
    assert!(res.path.valid && res.value < SENTINEL);
    assert!(res.value <= backward_cost(1.0, &mu, &sig, &a, &PiecewiseControl::zero(1.0, 4, 1), &ctl, &obs).unwrap().0.total + 1e-12);

    // Run the filter forward from the trajectory's start under its parameters.
    let path = &res.path;
    let model = FilterModel::from_trajectory(&Gamma::scalar(0.0, 0.6, 1.0, 0.0), &path.gamma, path.q.first().to_vec(), path.r.first().to_vec()).unwrap();
    let kb = kalman_bucy_forward(&model, &y).unwrap();
    assert_relative_eq!(kb.q.last()[0], mu[0], epsilon = 2e-3);
    assert_relative_eq!(kb.r.last()[0], sig[0], epsilon = 2e-3);
    assert_relative_eq!(path.gamma.last()[0], a[0], epsilon = 1e-12);

    let forward = penalty(&model, &obs, &spec, 1.0).unwrap().total;
    let width = res.control.horizon / res.control.knots.len() as f64;
    let effort: f64 = res.control.knots.iter().map(|k| epsilon * k[0] * k[0] * width).sum();
    assert_relative_eq!(forward + effort, res.value, max_relative = 1e-2);
}
