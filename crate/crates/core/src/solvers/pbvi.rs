//! Point-based value iteration: synchronous backups over the belief set,
//! alternating with expansion towards the farthest successors.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::belief::{Belief, SparseBelief};
use crate::error::Result;
use crate::model::PomdpModel;

use super::engine::{best_alpha, BeliefSet, Engine};
use super::perseus::refine_upper;
use super::{SolveOutcome, SolveStatus, SolverConfig, State, ValueBounds};

pub fn pbvi_solve(model: &PomdpModel, config: &SolverConfig, root: &Belief) -> Result<SolveOutcome> {
    run(model, config, root, None)
}

pub(super) fn run(model: &PomdpModel, config: &SolverConfig, root: &Belief, warm: Option<&ValueBounds>) -> Result<SolveOutcome> {
    let mut st = State::new(model, config, root, warm)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.exploration_seed);
    let mut set = BeliefSet::default();
    set.insert(st.root.clone());
    let threshold = config.epsilon * (1.0 - model.discount);
    let mut status = SolveStatus::BudgetExhausted;

    for it in 1..=config.max_iterations {
        if st.out_of_time() {
            break;
        }
        let improvement = sweep(&mut st, &set.items);
        st.record(it, set.len());
        if improvement < threshold
            && (set.len() >= config.belief_set_size || !expand(&st.engine, &mut set, config.belief_set_size, &mut rng))
        {
            status = SolveStatus::Converged;
            break;
        }
    }
    if st.history.is_empty() {
        st.record(0, set.len());
    }
    refine_upper(&mut st, &set.items);
    Ok(st.finish(status))
}

/// Backs up every belief against a frozen copy of the lower set and merges in
/// belief order. Returns the largest value improvement.
fn sweep(st: &mut State, beliefs: &[SparseBelief]) -> f64 {
    let snapshot = &st.lower;
    let engine = &st.engine;
    let results: Vec<_> = beliefs
        .par_iter()
        .map(|b| {
            let (old, oi) = best_alpha(snapshot, b);
            let exp = engine.expand(b);
            let (alpha, _) = engine.backup(b, &exp, snapshot);
            if b.dot(&alpha.values) >= old {
                alpha
            } else {
                snapshot[oi].clone()
            }
        })
        .collect();
    let old: Vec<f64> = beliefs.iter().map(|b| st.lower_at(b)).collect();
    st.lower.clear();
    for alpha in results {
        st.add_alpha(alpha);
    }
    beliefs
        .iter()
        .zip(&old)
        .map(|(b, o)| st.lower_at(b) - o)
        .fold(0.0, f64::max)
}

/// For every belief, samples one successor per action and adds the one farthest
/// (in L1) from the current set. Returns whether anything new was added.
fn expand(engine: &Engine, set: &mut BeliefSet, cap: usize, rng: &mut ChaCha8Rng) -> bool {
    let current = set.items.clone();
    let mut added = false;
    for b in &current {
        if set.len() >= cap {
            break;
        }
        let mut best: Option<(f64, SparseBelief)> = None;
        for a in &engine.actions {
            let pred = engine.predict(b, a.maintenance);
            let branches = engine.branches(&pred, a.observation);
            let total: f64 = branches.iter().map(|br| br.prob).sum();
            let mut u = rng.random::<f64>() * total;
            let mut pick = branches.len() - 1;
            for (i, br) in branches.iter().enumerate() {
                if u < br.prob {
                    pick = i;
                    break;
                }
                u -= br.prob;
            }
            let cand = &branches[pick].post;
            let d = nearest_distance(&set.items, cand, best.as_ref().map(|x| x.0).unwrap_or(0.0));
            if d > best.as_ref().map(|x| x.0).unwrap_or(1e-9) {
                best = Some((d, cand.clone()));
            }
        }
        if let Some((_, cand)) = best {
            added |= set.insert(cand);
        }
    }
    added
}

/// L1 distance to the nearest set member; stops early once it cannot beat `floor`.
fn nearest_distance(items: &[SparseBelief], b: &SparseBelief, floor: f64) -> f64 {
    let mut best = f64::INFINITY;
    for x in items {
        best = best.min(x.l1_distance(b));
        if best <= floor {
            return best;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ModelBuilder;

    #[test]
    fn uninformative_expansion_follows_prediction_chain() {
        let m = ModelBuilder::new(3, 0.9)
            .maintenance(vec![(
                "do-nothing",
                vec![vec![0.8, 0.2, 0.0], vec![0.0, 0.8, 0.2], vec![0.0, 0.0, 1.0]],
                vec![0.0, -1.0, -3.0],
            )])
            .unwrap()
            .build()
            .unwrap();
        let engine = Engine::new(&m);
        let mut set = BeliefSet::default();
        set.insert(Belief::corner(3, 0).to_sparse());
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..3 {
            expand(&engine, &mut set, 100, &mut rng);
        }
        let mut chain = vec![Belief::corner(3, 0).to_sparse()];
        for _ in 0..3 {
            let next = engine.predict(chain.last().unwrap(), 0);
            chain.push(next);
        }
        assert_eq!(set.len(), 4);
        for (x, y) in set.items.iter().zip(&chain) {
            assert!(x.linf_distance(y) < 1e-12);
        }
    }
}
