use monolattice::forge::io::{instance_from_json, instance_to_json};
use monolattice::oracle::{is_feasible, reference_solve, verify_epsilon_solution};
use monolattice::{
    error_bound, solve_linear, LinearGlbProblem, Method, PieceData, PolicyTag, SolveOptions,
};
use proptest::prelude::*;

fn inf_dist(x: &[f64], y: &[f64]) -> f64 {
    x.iter()
        .zip(y)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max)
}

/// Dense-ish random instances with `n <= 7`, `L <= 3` and row sums below 0.9.
fn problems() -> impl Strategy<Value = LinearGlbProblem> {
    (1usize..8, 1usize..4)
        .prop_flat_map(|(n, pieces)| {
            let bound = 0.9 / n as f64;
            let piece = (
                prop::collection::vec(prop::option::weighted(0.6, 0.0..bound), n * n),
                prop::collection::vec(0.0..1.0f64, n),
            );
            (
                Just(n),
                prop::collection::vec(piece, pieces),
                prop::collection::vec(0.5..20.0f64, n),
            )
        })
        .prop_map(|(n, pieces, cap)| {
            let data = pieces
                .into_iter()
                .map(|(entries, b)| {
                    let t = entries
                        .into_iter()
                        .enumerate()
                        .filter_map(|(k, v)| v.map(|v| (k / n, k % n, v)))
                        .collect();
                    PieceData::new(t, b)
                })
                .collect();
            LinearGlbProblem::new(n, data, cap).unwrap()
        })
}

fn point(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0..25.0f64, n)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn every_method_lands_within_the_error_bound(p in problems()) {
        let oracle = reference_solve(&p);
        prop_assert!(oracle.certified);
        let eps = 1e-9;
        let gamma_hat = p.precondition().gamma_hat;
        let bound = error_bound(1.0 - gamma_hat, eps).unwrap();
        for method in Method::ALL {
            for policy in PolicyTag::ALL {
                let r = solve_linear(&p, method, None, &SolveOptions::new(eps, policy)).unwrap();
                prop_assert!(r.feasible);
                let own = r.error_bound().unwrap();
                let d = inf_dist(&r.x, &oracle.x_star);
                prop_assert!(d <= own.max(bound) + 1e-12, "{method}/{policy}: {d:e}");
                prop_assert!(verify_epsilon_solution(&p, &r.x, eps * 1.0001));
            }
        }
    }

    #[test]
    fn join_of_scaled_solutions_stays_feasible(p in problems(), l1 in 0.0..1.0f64, l2 in 0.0..1.0f64) {
        let x_star = reference_solve(&p).x_star;
        let x: Vec<f64> = x_star.iter().map(|v| l1 * v).collect();
        // a second point from a rotated scaling, so the two are incomparable
        let y: Vec<f64> = x_star
            .iter()
            .enumerate()
            .map(|(i, v)| if i % 2 == 0 { l2 * v } else { l2 * l1 * v })
            .collect();
        prop_assume!(is_feasible(&p, &x) && is_feasible(&p, &y));
        let join: Vec<f64> = x.iter().zip(&y).map(|(a, b)| a.max(*b)).collect();
        prop_assert!(is_feasible(&p, &join));
    }

    #[test]
    fn glb_maps_are_lipschitz(p in problems(), seed in point(7), other in point(7)) {
        let n = p.dim();
        let (x, y) = (&seed[..n], &other[..n]);
        let pre = p.precondition();
        prop_assert!(pre.gamma_hat <= pre.gamma);
        let dxy = inf_dist(x, y);
        let slack = 1e-12;
        prop_assert!(inf_dist(&p.glb_eval(x), &p.glb_eval(y)) <= pre.gamma * dxy + slack);
        prop_assert!(inf_dist(&pre.problem.glb_eval(x), &pre.problem.glb_eval(y)) <= pre.gamma_hat * dxy + slack);
    }

    #[test]
    fn glb_is_monotone(p in problems(), base in point(7), bump in point(7)) {
        let n = p.dim();
        let x = &base[..n];
        let y: Vec<f64> = x.iter().zip(&bump).map(|(a, b)| a + b).collect();
        let gx = p.glb_eval(x);
        let gy = p.glb_eval(&y);
        prop_assert!(gx.iter().zip(&gy).all(|(a, b)| a <= b));
    }

    #[test]
    fn policies_agree(p in problems()) {
        let eps = 1e-9;
        let runs: Vec<_> = PolicyTag::ALL
            .iter()
            .map(|&policy| solve_linear(&p, Method::SelectivePrecond, None, &SolveOptions::new(eps, policy)).unwrap())
            .collect();
        let bound = runs[0].error_bound().unwrap();
        for a in &runs {
            for b in &runs {
                prop_assert!(inf_dist(&a.x, &b.x) <= 2.0 * bound);
            }
        }
    }

    #[test]
    fn json_round_trip_is_exact(p in problems()) {
        let back = instance_from_json(&instance_to_json(&p)).unwrap();
        prop_assert_eq!(back, p);
    }

    #[test]
    fn lp_form_accepts_interior_points(p in problems(), lambda in 0.0..0.99f64) {
        let x: Vec<f64> = reference_solve(&p).x_star.iter().map(|v| lambda * v).collect();
        prop_assume!(is_feasible(&p, &x));
        prop_assert!(p.to_lp_form().contains(&x));
        let above: Vec<f64> = p.cap().iter().map(|u| u + 1.0).collect();
        prop_assert!(!p.to_lp_form().contains(&above));
    }
}
