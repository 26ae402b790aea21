//! Property-based invariants for the metric layer: transport against the
//! vertex-enumeration oracle, the total-variation reduction, metric
//! axioms, duality, and scaling covariance.

use confmdp::metric::{
    lipschitz_seminorm, smooth_to_lipschitz, tv_divergence, wasserstein, Distribution,
    MetricSpace,
};
use confmdp::suite::brute_force_transport;
use ndarray::{Array1, Array2};
use proptest::prelude::*;

fn distribution_strategy(n: usize) -> impl Strategy<Value = Distribution> {
    prop::collection::vec(1e-3..1.0f64, n).prop_map(|weights| {
        let sum: f64 = weights.iter().sum();
        Distribution::new(Array1::from_iter(weights.into_iter().map(|w| w / sum))).unwrap()
    })
}

fn embedded_space_strategy(n: usize) -> impl Strategy<Value = MetricSpace> {
    prop::collection::vec((0.0..1.0f64, 0.0..1.0f64), n).prop_filter_map(
        "points must be separated",
        move |points| {
            for i in 0..n {
                for j in (i + 1)..n {
                    let dx = points[i].0 - points[j].0;
                    let dy = points[i].1 - points[j].1;
                    if (dx * dx + dy * dy).sqrt() < 1e-3 {
                        return None;
                    }
                }
            }
            let mut dist = Array2::zeros((n, n));
            for i in 0..n {
                for j in (i + 1)..n {
                    let dx = points[i].0 - points[j].0;
                    let dy = points[i].1 - points[j].1;
                    let d = (dx * dx + dy * dy).sqrt();
                    dist[[i, j]] = d;
                    dist[[j, i]] = d;
                }
            }
            MetricSpace::new(dist).ok()
        },
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn transport_matches_vertex_enumeration_on_small_supports(
        space in embedded_space_strategy(4),
        p in distribution_strategy(4),
        q in distribution_strategy(4),
    ) {
        let result = wasserstein(&space, &p, &q).unwrap();
        let oracle = brute_force_transport(
            &space.dist_matrix().to_owned(),
            p.as_slice(),
            q.as_slice(),
        );
        prop_assert!((result.distance - oracle).abs() <= 1e-9,
            "solver {} vs oracle {}", result.distance, oracle);
    }

    #[test]
    fn discrete_metric_transport_is_total_variation(
        p in distribution_strategy(5),
        q in distribution_strategy(5),
    ) {
        let space = MetricSpace::discrete(5);
        let w = wasserstein(&space, &p, &q).unwrap().distance;
        let tv = tv_divergence(&p, &q).unwrap();
        prop_assert!((w - tv).abs() <= 1e-9);
    }

    #[test]
    fn transport_satisfies_metric_axioms(
        space in embedded_space_strategy(5),
        p in distribution_strategy(5),
        q in distribution_strategy(5),
        r in distribution_strategy(5),
    ) {
        let w_pq = wasserstein(&space, &p, &q).unwrap().distance;
        let w_qp = wasserstein(&space, &q, &p).unwrap().distance;
        let w_pp = wasserstein(&space, &p, &p).unwrap().distance;
        let w_pr = wasserstein(&space, &p, &r).unwrap().distance;
        let w_qr = wasserstein(&space, &q, &r).unwrap().distance;
        prop_assert!((w_pq - w_qp).abs() <= 1e-9);
        prop_assert!(w_pp.abs() <= 1e-9);
        prop_assert!(w_pr <= w_pq + w_qr + 1e-9);
    }

    #[test]
    fn transport_plans_have_correct_marginals(
        space in embedded_space_strategy(5),
        p in distribution_strategy(5),
        q in distribution_strategy(5),
    ) {
        let result = wasserstein(&space, &p, &q).unwrap();
        for i in 0..5 {
            let row: f64 = result.plan.row(i).sum();
            let col: f64 = result.plan.column(i).sum();
            prop_assert!((row - p.mass(i)).abs() <= 1e-9);
            prop_assert!((col - q.mass(i)).abs() <= 1e-9);
        }
        let recost: f64 = result
            .plan
            .indexed_iter()
            .map(|((i, j), &f)| f * space.dist(i, j))
            .sum();
        prop_assert!((recost - result.distance).abs() <= 1e-9);
    }

    #[test]
    fn duality_dominates_smoothed_witnesses(
        space in embedded_space_strategy(5),
        p in distribution_strategy(5),
        q in distribution_strategy(5),
        raw in prop::collection::vec(-1.0..1.0f64, 5),
    ) {
        let w = wasserstein(&space, &p, &q).unwrap().distance;
        let witness = smooth_to_lipschitz(&space, &raw);
        prop_assert!(lipschitz_seminorm(&space, witness.view()) <= 1.0 + 1e-12);
        let pairing: f64 = (0..5)
            .map(|i| (p.mass(i) - q.mass(i)) * witness[i])
            .sum();
        prop_assert!(pairing.abs() <= w + 1e-9);
    }

    #[test]
    fn scaling_the_metric_scales_transport_and_inversely_scales_seminorms(
        space in embedded_space_strategy(4),
        p in distribution_strategy(4),
        q in distribution_strategy(4),
        raw in prop::collection::vec(-1.0..1.0f64, 4),
        factor in 0.1..10.0f64,
    ) {
        let scaled = space.scaled(factor).unwrap();
        let w = wasserstein(&space, &p, &q).unwrap().distance;
        let w_scaled = wasserstein(&scaled, &p, &q).unwrap().distance;
        prop_assert!((w_scaled - factor * w).abs() <= 1e-9 * (1.0 + factor));

        let f = Array1::from_vec(raw);
        let norm = lipschitz_seminorm(&space, f.view());
        let norm_scaled = lipschitz_seminorm(&scaled, f.view());
        prop_assert!((norm_scaled - norm / factor).abs() <= 1e-9 * (1.0 + norm));
    }
}
