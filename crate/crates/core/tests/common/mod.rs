#![allow(dead_code)]

use pomdp_voi::{Belief, JointAction, ModelBuilder, PomdpModel};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const GAMMA: f64 = 0.8;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn simplex(rng: &mut impl Rng, n: usize) -> Vec<f64> {
    // occasionally sparse rows so that zero-likelihood branches get exercised
    let w: Vec<f64> = (0..n).map(|_| if rng.random_bool(0.15) { 0.0 } else { rng.random::<f64>() + 1e-3 }).collect();
    let total: f64 = w.iter().sum();
    if total == 0.0 {
        let mut v = vec![0.0; n];
        v[rng.random_range(0..n)] = 1.0;
        return v;
    }
    w.into_iter().map(|x| x / total).collect()
}

pub fn stochastic(rng: &mut impl Rng, rows: usize, cols: usize) -> Vec<Vec<f64>> {
    (0..rows).map(|_| simplex(rng, cols)).collect()
}

pub fn random_belief(rng: &mut impl Rng, n: usize) -> Belief {
    Belief::new(simplex(rng, n)).unwrap()
}

/// Random model with |S| in 2..=4, at most 3 joint actions and at most 3 joint outcomes.
///
/// Observation action 0 is trivial; action 1 is informative with 2 or 3 outcomes.
/// With two maintenance actions the second one is only available without observation.
pub fn random_model(seed: u64) -> PomdpModel {
    let mut r = rng(seed);
    let n = r.random_range(2..=4);
    let n_m = r.random_range(1..=2);
    let n_o = r.random_range(2..=3);
    let maint: Vec<(String, Vec<Vec<f64>>, Vec<f64>)> = (0..n_m)
        .map(|a| (format!("m{a}"), stochastic(&mut r, n, n), (0..n).map(|_| -10.0 * r.random::<f64>() * a as f64).collect()))
        .collect();
    let cost = -2.0 * r.random::<f64>();
    let obs = [
        ("none".to_string(), vec![vec![1.0]; n], vec![0.0; n]),
        ("look".to_string(), stochastic(&mut r, n, n_o), vec![cost; n]),
    ];
    let damage = (0..n).map(|_| -10.0 * r.random::<f64>()).collect();
    let mut actions = vec![JointAction::new(0, 0), JointAction::new(0, 1)];
    if n_m == 2 {
        actions.push(JointAction::new(1, 0));
    }
    let b0 = random_belief(&mut r, n);
    ModelBuilder::new(n, GAMMA)
        .maintenance(maint.iter().map(|(a, b, c)| (a.as_str(), b.clone(), c.clone())).collect())
        .unwrap()
        .observation_actions(obs.iter().map(|(a, b, c)| (a.as_str(), b.clone(), c.clone())).collect())
        .unwrap()
        .damage(damage)
        .actions(actions)
        .initial_belief(b0)
        .build()
        .unwrap()
}

/// Same model with a two-outcome informative default channel.
pub fn with_default_channel(model: &PomdpModel, seed: u64) -> PomdpModel {
    let mut r = rng(seed ^ 0x9e37_79b9);
    let n = model.n_states();
    let mut m = model.clone();
    let rows = stochastic(&mut r, n, 2);
    m.default_observations = vec!["e0".into(), "e1".into()];
    m.default_obs_model = pomdp_voi::linalg::DenseMatrix::from_rows(&rows).unwrap();
    m.validate().unwrap();
    m
}

/// Largest one-step reward magnitude.
pub fn reward_bound(model: &PomdpModel) -> f64 {
    model
        .actions
        .iter()
        .flat_map(|&a| model.reward_vector(a))
        .fold(0.0_f64, |acc, x| acc.max(x.abs()))
}

/// Horizon after which the discounted tail is below `eps`.
pub fn oracle_horizon(model: &PomdpModel, eps: f64) -> usize {
    let bound = reward_bound(model) / (1.0 - model.discount);
    if bound <= eps {
        return 1;
    }
    ((eps / bound).ln() / model.discount.ln()).ceil() as usize
}

pub fn tail_bound(model: &PomdpModel, horizon: usize) -> f64 {
    model.discount.powi(horizon as i32) * reward_bound(model) / (1.0 - model.discount)
}
