use proptest::prelude::*;
use reo_core::planner::{plan_sizes, PlanBound, PlanRequest};

fn n(k: usize, eps: f64, u: Option<Vec<f64>>) -> u64 {
    let mut req = PlanRequest::new(k, eps, 0.05);
    req.pilot_u = u;
    plan_sizes(&req, PlanBound::Uniform).unwrap().n.unwrap()
}

proptest! {
    #[test]
    fn n_grows_with_k(k in 1usize..40) {
        prop_assert!(n(k + 1, 0.1, None) >= n(k, 0.1, None));
    }

    #[test]
    fn n_shrinks_with_epsilon(k in 1usize..10, e in 0.01f64..0.5, f in 1.0f64..3.0) {
        prop_assert!(n(k, e * f, None) <= n(k, e, None));
    }

    #[test]
    fn n_shrinks_with_utility_mass(u in prop::collection::vec(0.1f64..5.0, 3), c in 1.0f64..4.0) {
        let bigger: Vec<f64> = u.iter().map(|x| x * c).collect();
        prop_assert!(n(3, 0.1, Some(bigger)) <= n(3, 0.1, Some(u)));
    }

    #[test]
    fn halving_epsilon_quadruples(k in 1usize..10, e in 0.01f64..0.5) {
        let mut a = PlanRequest::new(k, e, 0.05);
        a.pilot_u = Some(vec![1.0; k]);
        let big = plan_sizes(&PlanRequest { epsilon: e / 2.0, ..a.clone() }, PlanBound::Uniform).unwrap().n.unwrap();
        let small = plan_sizes(&a, PlanBound::Uniform).unwrap().n.unwrap();
        prop_assert!(big <= 4 * small && big + 4 > 4 * small);
    }
}
