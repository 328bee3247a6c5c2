use approx::assert_abs_diff_eq;
use proptest::prelude::*;

use roughctrl::paths::{p_variation, p_variation_bruteforce, uniform_grid, SampledPath};
use roughctrl::rough::{
    chen_residual, lift_brownian_stratonovich, lift_piecewise_linear, lift_piecewise_linear_with_p, rough_integral, rough_metric,
    symmetry_residual, ControlledPath, MetricMode, RoughPath,
};

fn path_strategy(max_len: usize, dim: usize) -> impl Strategy<Value = SampledPath> {
    (3..=max_len).prop_flat_map(move |n| {
        (prop::collection::vec(0.01f64..1.0, n - 1), prop::collection::vec(-2.0f64..2.0, n * dim)).prop_map(move |(gaps, data)| {
            let mut times = vec![0.0];
            for g in gaps {
                times.push(times.last().unwrap() + g);
            }
            SampledPath::from_flat(times, dim, data).unwrap()
        })
    })
}

fn lift_on(times: &[f64], dim: usize, data: Vec<f64>, p: f64) -> RoughPath {
    lift_piecewise_linear_with_p(&SampledPath::from_flat(times.to_vec(), dim, data).unwrap(), p)
}

/// Riemann zeta by direct summation with an integral tail.
fn zeta(s: f64) -> f64 {
    let n = 200_000;
    let head: f64 = (1..=n).map(|k| (k as f64).powf(-s)).sum();
    head + (n as f64).powf(1.0 - s) / (s - 1.0) - 0.5 * (n as f64).powf(-s)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn chen_relation_holds_in_every_triple(x in path_strategy(12, 2), a in 0usize..4, b in 0usize..4) {
        let rp = lift_piecewise_linear(&x);
        let n = rp.len();
        let i = a.min(n - 3);
        let j = (i + 1 + b).min(n - 2);
        for k in j + 1..n {
            let (xij, xjk, xik) = (rp.second(i, j), rp.second(j, k), rp.second(i, k));
            let (u, v) = (x.increment(i, j), x.increment(j, k));
            for r in 0..2 {
                for c in 0..2 {
                    let want = xij[r * 2 + c] + xjk[r * 2 + c] + u[r] * v[c];
                    prop_assert!((xik[r * 2 + c] - want).abs() <= 1e-12 * (1.0 + want.abs()));
                }
            }
        }
        prop_assert_eq!(chen_residual(&rp), 0.0);
    }

    #[test]
    fn geometric_lifts_have_symmetric_part_half_the_square(x in path_strategy(16, 3)) {
        let rp = lift_piecewise_linear(&x);
        prop_assert!(symmetry_residual(&rp) <= 1e-12);
        let n = rp.len();
        let (s, u) = (rp.second(0, n - 1), x.increment(0, n - 1));
        for r in 0..3 {
            for c in 0..3 {
                let sym = 0.5 * (s[r * 3 + c] + s[c * 3 + r]);
                prop_assert!((sym - 0.5 * u[r] * u[c]).abs() <= 1e-12 * (1.0 + u[r].abs() * u[c].abs()));
            }
        }
    }

    #[test]
    fn p_variation_matches_exhaustive_search(x in path_strategy(11, 2), p in 1.0f64..4.0) {
        let span = (x.start_time(), x.end_time());
        let dp = p_variation(&x, p, span).unwrap();
        let bf = p_variation_bruteforce(&x, p, span).unwrap();
        prop_assert!((dp - bf).abs() <= 1e-12 * bf.max(1.0), "dp {dp} bf {bf}");
    }

    #[test]
    fn p_variation_dominates_and_decreases_in_p(x in path_strategy(24, 1), p in 1.0f64..3.0, dq in 0.0f64..2.0) {
        let span = (x.start_time(), x.end_time());
        let vp = p_variation(&x, p, span).unwrap();
        let vq = p_variation(&x, p + dq, span).unwrap();
        prop_assert!(vq <= vp * (1.0 + 1e-12));
        prop_assert!(x.increment(0, x.len() - 1)[0].abs() <= vq * (1.0 + 1e-12));
    }

    #[test]
    fn p_variation_is_superadditive_over_adjacent_intervals(x in path_strategy(24, 2), p in 1.0f64..3.0, cut in 1usize..22) {
        let t = x.times();
        let k = cut.min(t.len() - 2);
        let whole = p_variation(&x, p, (t[0], *t.last().unwrap())).unwrap().powf(p);
        let left = p_variation(&x, p, (t[0], t[k])).unwrap().powf(p);
        let right = p_variation(&x, p, (t[k], *t.last().unwrap())).unwrap().powf(p);
        prop_assert!(left + right <= whole * (1.0 + 1e-12) + 1e-300);
    }

    #[test]
    fn integral_of_the_identity_is_half_the_square(x in path_strategy(40, 2), cut in 1usize..38) {
        let rp = lift_piecewise_linear(&x);
        let y = ControlledPath::identity(&rp);
        let t = x.times();
        let k = cut.min(t.len() - 2);
        let end = *t.last().unwrap();
        let whole = *rough_integral(&y, &rp, (t[0], end)).unwrap().last().first().unwrap();
        let left = *rough_integral(&y, &rp, (t[0], t[k])).unwrap().last().first().unwrap();
        let right = *rough_integral(&y, &rp, (t[k], end)).unwrap().last().first().unwrap();
        // ∫ ζ·dζ over [s, u] for a geometric lift is ½(|ζ_u|² - |ζ_s|²).
        let sq = |i: usize| x.value(i).iter().map(|v| v * v).sum::<f64>();
        assert_abs_diff_eq!(whole, 0.5 * (sq(t.len() - 1) - sq(0)), epsilon = 1e-11);
        assert_abs_diff_eq!(left + right, whole, epsilon = 1e-11);
    }

    #[test]
    fn rough_metric_is_a_metric(
        times in prop::collection::vec(0.05f64..1.0, 6..=6),
        a in prop::collection::vec(-1.0f64..1.0, 14),
        b in prop::collection::vec(-1.0f64..1.0, 14),
        c in prop::collection::vec(-1.0f64..1.0, 14),
    ) {
        let mut grid = vec![0.0];
        for g in times {
            grid.push(grid.last().unwrap() + g);
        }
        let p = 2.5;
        let (ra, rb, rc) = (lift_on(&grid, 2, a, p), lift_on(&grid, 2, b, p), lift_on(&grid, 2, c, p));
        for mode in [MetricMode::PVar, MetricMode::Holder] {
            let ab = rough_metric(&ra, &rb, mode).unwrap();
            let ba = rough_metric(&rb, &ra, mode).unwrap();
            let bc = rough_metric(&rb, &rc, mode).unwrap();
            let ac = rough_metric(&ra, &rc, mode).unwrap();
            prop_assert_eq!(rough_metric(&ra, &ra, mode).unwrap(), 0.0);
            prop_assert!((ab - ba).abs() <= 1e-12 * ab.max(1.0));
            prop_assert!(ac <= ab + bc + 1e-12);
        }
    }

    #[test]
    fn young_loeve_bound_for_the_second_level(x in path_strategy(14, 2), p in 1.05f64..1.9) {
        let rp = lift_piecewise_linear(&x);
        let n = rp.len();
        let (x0, x1) = (x.component(0), x.component(1));
        let c = zeta(2.0 / p);
        for i in 0..n - 1 {
            for j in i + 1..n {
                let span = (x.times()[i], x.times()[j]);
                let area = rp.second(i, j)[1];
                let bound = c * p_variation(&x0, p, span).unwrap() * p_variation(&x1, p, span).unwrap();
                // |∫ (x⁰ - x⁰_s) dx¹| ≤ ζ(2/p) ‖x⁰‖_p ‖x¹‖_p
                prop_assert!(area.abs() <= bound * (1.0 + 1e-12) + 1e-15, "area {area} bound {bound}");
            }
        }
    }
}

#[test]
fn brownian_lift_is_chen_consistent_and_geometric() {
    let rp = lift_brownian_stratonovich(5, 512, 1.0, 2).unwrap();
    assert_eq!(chen_residual(&rp), 0.0);
    assert!(symmetry_residual(&rp) <= 1e-12);
    assert!(rp.is_geometric());
}

#[test]
fn zeta_oracle_matches_known_values() {
    assert_abs_diff_eq!(zeta(2.0), std::f64::consts::PI.powi(2) / 6.0, epsilon = 1e-9);
    assert_abs_diff_eq!(zeta(4.0), std::f64::consts::PI.powi(4) / 90.0, epsilon = 1e-12);
}

#[test]
fn uniform_grid_endpoints_are_exact() {
    let g = uniform_grid(0.25, 1.75, 7);
    assert_eq!(g.len(), 8);
    assert_eq!(g[0], 0.25);
    assert_eq!(g[7], 1.75);
}
