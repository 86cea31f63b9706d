//! Randomized point-based value iteration over a belief set collected from
//! random trajectories.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::belief::{AlphaVector, Belief, SparseBelief};
use crate::error::Result;
use crate::model::PomdpModel;

use super::engine::{best_alpha, BeliefSet, Engine};
use super::{SolveOutcome, SolveStatus, SolverConfig, State, ValueBounds};

pub fn perseus_solve(model: &PomdpModel, config: &SolverConfig, root: &Belief) -> Result<SolveOutcome> {
    run(model, config, root, None)
}

pub(super) fn run(model: &PomdpModel, config: &SolverConfig, root: &Belief, warm: Option<&ValueBounds>) -> Result<SolveOutcome> {
    let mut st = State::new(model, config, root, warm)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.exploration_seed);
    let beliefs = collect_beliefs(&st.engine, &st.root, config, &mut rng);
    let threshold = config.epsilon * (1.0 - model.discount);
    let mut status = SolveStatus::BudgetExhausted;

    for it in 1..=config.max_iterations {
        if st.out_of_time() {
            break;
        }
        let old: Vec<f64> = beliefs.iter().map(|b| st.lower_at(b)).collect();
        let mut next: Vec<AlphaVector> = Vec::new();
        let mut todo: Vec<usize> = (0..beliefs.len()).collect();
        while !todo.is_empty() {
            let pick = todo[rng.random_range(0..todo.len())];
            let b = &beliefs[pick];
            let exp = st.engine.expand(b);
            let (alpha, _) = st.engine.backup(b, &exp, &st.lower);
            let vec = if b.dot(&alpha.values) >= old[pick] {
                alpha
            } else {
                st.lower[best_alpha(&st.lower, b).1].clone()
            };
            todo.retain(|&i| beliefs[i].dot(&vec.values) < old[i] && i != pick);
            next.push(vec);
        }
        let improvement = beliefs
            .iter()
            .zip(&old)
            .map(|(b, o)| best_alpha(&next, b).0 - o)
            .fold(0.0, f64::max);
        st.lower = next;
        st.record(it, beliefs.len());
        if improvement < threshold {
            status = SolveStatus::Converged;
            break;
        }
    }
    if st.history.is_empty() {
        st.record(0, beliefs.len());
    }
    refine_upper(&mut st, &beliefs);
    Ok(st.finish(status))
}

/// Root plus beliefs met along random trajectories: uniform actions, sampled observations.
fn collect_beliefs(engine: &Engine, root: &SparseBelief, config: &SolverConfig, rng: &mut ChaCha8Rng) -> Vec<SparseBelief> {
    let mut set = BeliefSet::default();
    set.insert(root.clone());
    let mut trajectories = 0;
    while set.len() < config.belief_set_size && trajectories < config.belief_set_size {
        trajectories += 1;
        let mut b = root.clone();
        for _ in 0..config.trajectory_length {
            let a = engine.actions[rng.random_range(0..engine.n_actions())];
            let pred = engine.predict(&b, a.maintenance);
            let branches = engine.branches(&pred, a.observation);
            let total: f64 = branches.iter().map(|br| br.prob).sum();
            let mut u = rng.random::<f64>() * total;
            let mut chosen = branches.len() - 1;
            for (i, br) in branches.iter().enumerate() {
                if u < br.prob {
                    chosen = i;
                    break;
                }
                u -= br.prob;
            }
            b = branches.into_iter().nth(chosen).expect("at least one branch").post;
            set.insert(b.clone());
            if set.len() >= config.belief_set_size {
                break;
            }
        }
    }
    set.items
}

/// Bellman passes of the upper bound over the collected beliefs, newest first;
/// the final convergence record picks up the tightened root value.
pub(super) fn refine_upper(st: &mut State, beliefs: &[SparseBelief]) {
    for _ in 0..st.config.upper_passes {
        if st.out_of_time() {
            break;
        }
        for b in beliefs.iter().rev() {
            let exp = st.engine.expand(b);
            st.update_upper(b, &exp);
        }
    }
    let lower = st.lower_at(&st.root);
    let upper = st.upper.value(&st.root).max(lower);
    let wall = st.elapsed();
    if let Some(last) = st.history.last_mut() {
        last.upper = upper;
        last.wall_seconds = wall;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ModelBuilder;

    #[test]
    fn one_state_converges_in_one_sweep() {
        let m = ModelBuilder::new(1, 0.95)
            .maintenance(vec![("stay", vec![vec![1.0]], vec![-1.0])])
            .unwrap()
            .build()
            .unwrap();
        let out = perseus_solve(&m, &SolverConfig::default(), &Belief::corner(1, 0)).unwrap();
        assert_eq!(out.status, SolveStatus::Converged);
        assert_eq!(out.history.len(), 1);
        assert!((out.lower() + 20.0).abs() < 1e-7);
        assert!(out.gap() < 1e-7);
    }
}
