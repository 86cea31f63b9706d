mod common;

use common::*;
use pomdp_voi::belief::{belief_predict, belief_update, observation_likelihood, value_of_belief};
use pomdp_voi::metrics::{bellman_direct, bellman_via_netvoi, step_voi, step_vopi};
use pomdp_voi::solvers::{self, exact_finite_horizon, mdp_value_iteration, SolverConfig, SolverKind};
use pomdp_voi::{AlphaVector, Belief, JointAction};
use proptest::prelude::*;

fn weights(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0..1.0f64, n).prop_filter("non-zero", |w| w.iter().sum::<f64>() > 1e-6)
}

fn belief_of(w: Vec<f64>) -> Belief {
    Belief::from_weights(w).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn posterior_is_a_distribution_and_marginalizes(seed in 0u64..500, w in weights(4), a in 0usize..3) {
        let m = random_model(seed);
        let n = m.n_states();
        let b = belief_of(w[..n].to_vec().iter().map(|x| x + 1e-9).collect());
        let a = m.actions[a % m.actions.len()];
        let pred = belief_predict(&m, &b, a.maintenance).unwrap();
        let mut mix = vec![0.0; n];
        let mut total = 0.0;
        for o in m.joint_observations(a.observation) {
            let p = observation_likelihood(&m, &b, a, o).unwrap();
            prop_assert!(p >= 0.0);
            total += p;
            if p > 1e-300 {
                let post = belief_update(&m, &b, a, o).unwrap();
                prop_assert!(post.probs().iter().all(|&x| x >= 0.0));
                prop_assert!((post.probs().iter().sum::<f64>() - 1.0).abs() <= 1e-9);
                for (x, y) in mix.iter_mut().zip(post.probs()) {
                    *x += p * y;
                }
            }
        }
        prop_assert!((total - 1.0).abs() <= 1e-9);
        for (x, y) in mix.iter().zip(pred.probs()) {
            prop_assert!((x - y).abs() <= 1e-9);
        }
    }

    #[test]
    fn value_function_is_convex(
        vs in prop::collection::vec(prop::collection::vec(-50.0..0.0f64, 3), 1..6),
        w1 in weights(3),
        w2 in weights(3),
        lambda in 0.0..=1.0f64,
    ) {
        let gamma: Vec<AlphaVector> = vs.into_iter().map(|v| AlphaVector::new(v, JointAction::new(0, 0))).collect();
        let (b1, b2) = (belief_of(w1), belief_of(w2));
        let mid: Vec<f64> = b1.probs().iter().zip(b2.probs()).map(|(x, y)| lambda * x + (1.0 - lambda) * y).collect();
        let v = |b: &Belief| value_of_belief(&gamma, b).unwrap().0;
        let lhs = v(&belief_of(mid));
        prop_assert!(lhs <= lambda * v(&b1) + (1.0 - lambda) * v(&b2) + 1e-9);
    }

    #[test]
    fn step_metrics_are_ordered_on_exact_values(seed in 0u64..200, w in weights(4)) {
        let m = random_model(seed);
        let lower = exact_finite_horizon(&m, 6).unwrap();
        let b = belief_of(w[..m.n_states()].to_vec().iter().map(|x| x + 1e-9).collect());
        for a_m in m.available_maintenance() {
            let vopi = step_vopi(&m, &lower, &b, a_m).unwrap();
            for a_o in m.observation_choices(a_m) {
                let voi = step_voi(&m, &lower, &b, a_m, a_o).unwrap();
                prop_assert!(voi >= -1e-9);
                prop_assert!(vopi >= voi - 1e-9);
            }
        }
        let d = bellman_direct(&m, &lower, &b).unwrap() - bellman_via_netvoi(&m, &lower, &b).unwrap();
        prop_assert!(d.abs() <= 1e-9);
    }
}

#[test]
fn solved_bounds_sandwich_the_oracle() {
    let config = SolverConfig { epsilon: 0.05, max_wall_seconds: Some(20.0), ..SolverConfig::default() };
    for seed in 0..10 {
        let m = random_model(seed);
        let h = oracle_horizon(&m, 0.005);
        let exact = exact_finite_horizon(&m, h).unwrap();
        let v_mdp = mdp_value_iteration(&m);
        for kind in [SolverKind::Perseus, SolverKind::Pbvi, SolverKind::Gap] {
            let o = solvers::solve(kind, &m, &config, &m.initial_belief, None).unwrap();
            let mut r = rng(seed);
            for _ in 0..50 {
                let b = random_belief(&mut r, m.n_states());
                let lo = o.bounds.lower_value(&b).unwrap();
                let v = value_of_belief(&exact, &b).unwrap().0;
                assert!(lo <= o.bounds.upper_value(&b) + 1e-6, "seed {seed} {kind}");
                assert!(lo <= v + 1e-6, "seed {seed} {kind}: lower {lo} above exact {v}");
                let backed = solvers::backup(&m, &o.bounds, &b).unwrap().value_at(&b);
                assert!(backed >= lo - 1e-9);
            }
            for s in 0..m.n_states() {
                let lo = o.bounds.lower_value(&Belief::corner(m.n_states(), s)).unwrap();
                assert!(lo <= v_mdp[s] + 1e-6);
            }
        }
    }
}

#[test]
fn solvers_agree_on_the_root() {
    let config = SolverConfig { epsilon: 0.01, max_wall_seconds: Some(20.0), ..SolverConfig::default() };
    for seed in 20..30 {
        let m = random_model(seed);
        let exact = solvers::exact_finite_horizon_oracle(&m, oracle_horizon(&m, 1e-4), &m.initial_belief).unwrap();
        for kind in [SolverKind::Perseus, SolverKind::Pbvi, SolverKind::Gap] {
            let o = solvers::solve(kind, &m, &config, &m.initial_belief, None).unwrap();
            assert!((o.lower() - exact).abs() <= 0.01 + 1e-4, "seed {seed} {kind}: {} vs {exact}", o.lower());
        }
    }
}
