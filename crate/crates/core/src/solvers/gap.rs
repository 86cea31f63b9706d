//! Heuristic search with both bounds: trials descend along the upper-bound
//! greedy action and the observation with the largest weighted excess gap,
//! then back up both bounds on the way out.

use crate::belief::{Belief, SparseBelief};
use crate::error::Result;
use crate::model::PomdpModel;

use super::engine::{BeliefSet, Expansion};
use super::{SolveOutcome, SolveStatus, SolverConfig, State, ValueBounds};

pub fn gap_heuristic_solve(model: &PomdpModel, config: &SolverConfig, root: &Belief) -> Result<SolveOutcome> {
    run(model, config, root, None)
}

pub(super) fn run(model: &PomdpModel, config: &SolverConfig, root: &Belief, warm: Option<&ValueBounds>) -> Result<SolveOutcome> {
    let mut st = State::new(model, config, root, warm)?;
    let mut visited = BeliefSet::default();
    visited.insert(st.root.clone());
    let mut pruned_at = st.lower.len();
    let mut status = SolveStatus::BudgetExhausted;
    let mut it = 0;
    loop {
        let root = st.root.clone();
        if st.upper.value(&root) - st.lower_at(&root) <= config.epsilon {
            status = SolveStatus::Converged;
            break;
        }
        if it >= config.max_iterations || st.out_of_time() {
            break;
        }
        it += 1;
        trial(&mut st, &mut visited);
        if st.lower.len() > 2 * pruned_at + 16 {
            st.prune_to_support(&visited.items);
            pruned_at = st.lower.len();
        }
        st.record(it, visited.len());
    }
    if st.history.is_empty() {
        st.record(0, visited.len());
    }
    st.prune_to_support(&visited.items);
    Ok(st.finish(status))
}

fn trial(st: &mut State, visited: &mut BeliefSet) {
    let gamma = st.engine.gamma;
    let eps = st.config.epsilon;
    let mut path: Vec<(SparseBelief, Expansion)> = Vec::new();
    let mut b = st.root.clone();
    let mut t = 0usize;
    loop {
        let threshold = eps * gamma.powi(-(t as i32));
        if st.upper.value(&b) - st.lower_at(&b) <= threshold || t >= st.config.trajectory_length {
            break;
        }
        let exp = st.engine.expand(&b);
        let q = st.engine.upper_q(&b, &exp, &st.upper);
        let mut a = 0;
        for (i, &v) in q.iter().enumerate() {
            if v > q[a] {
                a = i;
            }
        }
        let next_threshold = threshold / gamma;
        let mut best: Option<(f64, usize)> = None;
        for (i, br) in exp.branches[a].iter().enumerate() {
            let excess = br.prob * (st.upper.value(&br.post) - st.lower_at(&br.post) - next_threshold);
            if excess > best.map(|x| x.0).unwrap_or(0.0) {
                best = Some((excess, i));
            }
        }
        let next = best.map(|(_, i)| exp.branches[a][i].post.clone());
        path.push((b, exp));
        match next {
            Some(post) => {
                b = post;
                t += 1;
            }
            None => break,
        }
    }
    for (b, exp) in path.into_iter().rev() {
        let before = st.lower_at(&b);
        let (alpha, _) = st.engine.backup(&b, &exp, &st.lower);
        if b.dot(&alpha.values) > before + st.config.pruning_tolerance {
            st.lower.push(alpha);
        }
        st.update_upper(&b, &exp);
        visited.insert(b);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ModelBuilder;
    use crate::solvers::mdp_value_iteration;

    #[test]
    fn perfect_observations_reduce_to_the_mdp() {
        let m = ModelBuilder::new(3, 0.9)
            .maintenance(vec![
                (
                    "do-nothing",
                    vec![vec![0.7, 0.3, 0.0], vec![0.0, 0.6, 0.4], vec![0.0, 0.0, 1.0]],
                    vec![0.0; 3],
                ),
                ("repair", vec![vec![1.0, 0.0, 0.0]; 3], vec![-4.0, -6.0, -9.0]),
            ])
            .unwrap()
            .observation_actions(vec![(
                "look",
                vec![vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0]],
                vec![0.0; 3],
            )])
            .unwrap()
            .damage(vec![0.0, -2.0, -5.0])
            .build()
            .unwrap();
        let v = mdp_value_iteration(&m);
        let cfg = SolverConfig { epsilon: 1e-6, ..SolverConfig::default() };
        for s in 0..3 {
            let out = gap_heuristic_solve(&m, &cfg, &Belief::corner(3, s)).unwrap();
            assert_eq!(out.status, SolveStatus::Converged);
            assert!((out.lower() - v[s]).abs() < 1e-6, "{} vs {}", out.lower(), v[s]);
        }
    }
}
