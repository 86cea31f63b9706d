//! Exact finite-horizon value by exhaustive α-vector generation with
//! incremental cross-sums and linear-programming dominance pruning.

use std::panic::{catch_unwind, AssertUnwindSafe};

use minilp::{ComparisonOp, OptimizationDirection, Problem};

use crate::belief::{AlphaVector, Belief};
use crate::error::{Error, Result};
use crate::model::PomdpModel;

/// Upper limit on candidate vectors generated in one horizon step.
pub const ORACLE_VECTOR_LIMIT: usize = 1_000_000;

const PRUNE_TOL: f64 = 1e-10;

/// The exact `H`-step α-vector set (`H = 0` gives the zero vector).
pub fn exact_finite_horizon(model: &PomdpModel, horizon: usize) -> Result<Vec<AlphaVector>> {
    model.validate()?;
    let n = model.n_states();
    let gamma = model.discount;
    let mut set = vec![AlphaVector::new(vec![0.0; n], model.actions[0])];
    for _ in 0..horizon {
        let mut generated = 0usize;
        let mut next: Vec<AlphaVector> = Vec::new();
        for &a in &model.actions {
            let r = model.reward_vector(a);
            let p = &model.transition[a.maintenance];
            let mut acc: Option<Vec<Vec<f64>>> = None;
            for o in model.joint_observations(a.observation) {
                let projected: Vec<Vec<f64>> = set
                    .iter()
                    .map(|alpha| {
                        let g: Vec<f64> = (0..n)
                            .map(|sp| model.observation_probability(sp, a.observation, o) * alpha.values[sp])
                            .collect();
                        (0..n).map(|s| p.row(s).dot(&g)).collect()
                    })
                    .collect();
                let projected = prune(projected)?;
                acc = Some(match acc {
                    None => projected,
                    Some(prev) => {
                        generated += prev.len() * projected.len();
                        if generated > ORACLE_VECTOR_LIMIT {
                            return Err(Error::OracleTooLarge { vectors: generated });
                        }
                        let sums = prev
                            .iter()
                            .flat_map(|x| projected.iter().map(move |y| x.iter().zip(y).map(|(u, v)| u + v).collect()))
                            .collect();
                        prune(sums)?
                    }
                });
            }
            for v in acc.unwrap_or_default() {
                let values = r.iter().zip(&v).map(|(ri, vi)| ri + gamma * vi).collect();
                next.push(AlphaVector::new(values, a));
            }
        }
        set = prune_alphas(next)?;
    }
    Ok(set)
}

/// Exact `H`-step discounted value at `root`.
pub fn exact_finite_horizon_oracle(model: &PomdpModel, horizon: usize, root: &Belief) -> Result<f64> {
    model.check_belief(root)?;
    let set = exact_finite_horizon(model, horizon)?;
    Ok(crate::belief::value_of_belief(&set, root)?.0)
}

fn prune_alphas(alphas: Vec<AlphaVector>) -> Result<Vec<AlphaVector>> {
    let keep = prune_indices(&alphas.iter().map(|a| a.values.as_slice()).collect::<Vec<_>>())?;
    let mut it = keep.into_iter();
    Ok(alphas.into_iter().filter(|_| it.next().unwrap()).collect())
}

fn prune(vs: Vec<Vec<f64>>) -> Result<Vec<Vec<f64>>> {
    let keep = prune_indices(&vs.iter().map(|v| v.as_slice()).collect::<Vec<_>>())?;
    let mut it = keep.into_iter();
    Ok(vs.into_iter().filter(|_| it.next().unwrap()).collect())
}

/// Marks the vectors that are strictly best somewhere on the simplex. Earlier
/// vectors win exact ties.
fn prune_indices(vs: &[&[f64]]) -> Result<Vec<bool>> {
    let m = vs.len();
    let mut keep = vec![true; m];
    // pointwise dominance and duplicates
    for i in 0..m {
        if !keep[i] {
            continue;
        }
        for j in 0..m {
            if i == j || !keep[j] {
                continue;
            }
            let dominated = vs[j].iter().zip(vs[i]).all(|(x, y)| x >= y);
            if dominated && (j < i || vs[j] != vs[i]) {
                keep[i] = false;
                break;
            }
        }
    }
    let n = vs.first().map(|v| v.len()).unwrap_or(0);
    if n <= 1 {
        return Ok(keep);
    }
    let scale = vs.iter().flat_map(|v| v.iter()).fold(1.0f64, |a, x| a.max(x.abs()));
    for i in 0..m {
        if !keep[i] {
            continue;
        }
        let others: Vec<usize> = (0..m).filter(|&j| j != i && keep[j]).collect();
        if others.is_empty() {
            continue;
        }
        let mut lp = Problem::new(OptimizationDirection::Maximize);
        let b: Vec<_> = (0..n).map(|_| lp.add_var(0.0, (0.0, 1.0))).collect();
        let delta = lp.add_var(1.0, (-4.0 * scale, 4.0 * scale));
        lp.add_constraint(b.iter().map(|&v| (v, 1.0)).collect::<Vec<_>>(), ComparisonOp::Eq, 1.0);
        for &j in &others {
            let mut row: Vec<_> = b.iter().enumerate().map(|(s, &v)| (v, vs[i][s] - vs[j][s])).collect();
            row.push((delta, -1.0));
            lp.add_constraint(row, ComparisonOp::Ge, 0.0);
        }
        // minilp can panic on degenerate bases; keeping the vector is always safe
        let objective = match catch_unwind(AssertUnwindSafe(|| lp.solve())) {
            Ok(Ok(sol)) => sol.objective(),
            Ok(Err(e)) => return Err(Error::Contract(format!("pruning LP failed: {e}"))),
            Err(_) => continue,
        };
        if objective <= PRUNE_TOL * scale {
            keep[i] = false;
        }
    }
    Ok(keep)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::belief::expected_reward;
    use crate::model::ModelBuilder;

    /// Tiger-style problem: listen (cost 1, 85% accurate) or open a door.
    fn tiger() -> PomdpModel {
        let stay = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        let reset = vec![vec![0.5, 0.5], vec![0.5, 0.5]];
        ModelBuilder::new(2, 0.95)
            .maintenance(vec![
                ("wait", stay, vec![-2.0, -2.0]),
                ("open-left", reset.clone(), vec![-100.0, -10.0]),
                ("open-right", reset, vec![-10.0, -100.0]),
            ])
            .unwrap()
            .observation_actions(vec![
                ("none", vec![vec![1.0], vec![1.0]], vec![0.0, 0.0]),
                ("listen", vec![vec![0.85, 0.15], vec![0.15, 0.85]], vec![-1.0, -1.0]),
            ])
            .unwrap()
            .build()
            .unwrap()
    }

    /// Plain recursion over the reachable belief tree.
    fn tree_value(m: &PomdpModel, b: &Belief, h: usize) -> f64 {
        if h == 0 {
            return 0.0;
        }
        m.actions
            .iter()
            .map(|&a| {
                let mut q = expected_reward(m, b, a).unwrap();
                for (_, p, post) in crate::belief::successors(m, b, a).unwrap() {
                    q += m.discount * p * tree_value(m, &post, h - 1);
                }
                q
            })
            .fold(f64::NEG_INFINITY, f64::max)
    }

    #[test]
    fn horizon_zero_and_one() {
        let m = tiger();
        let b = Belief::new(vec![0.3, 0.7]).unwrap();
        assert_eq!(exact_finite_horizon_oracle(&m, 0, &b).unwrap(), 0.0);
        let one = m.actions.iter().map(|&a| expected_reward(&m, &b, a).unwrap()).fold(f64::NEG_INFINITY, f64::max);
        assert!((exact_finite_horizon_oracle(&m, 1, &b).unwrap() - one).abs() < 1e-12);
    }

    #[test]
    fn horizon_three_matches_tree_search() {
        let m = tiger();
        for p in [0.5, 0.2, 0.9] {
            let b = Belief::new(vec![p, 1.0 - p]).unwrap();
            let exact = exact_finite_horizon_oracle(&m, 3, &b).unwrap();
            assert!((exact - tree_value(&m, &b, 3)).abs() < 1e-9);
        }
        // at the uniform belief opening never pays within three steps: -2, -2 - 1.9, ...
        let u = Belief::uniform(2);
        assert!((exact_finite_horizon_oracle(&m, 1, &u).unwrap() + 2.0).abs() < 1e-12);
        assert!((exact_finite_horizon_oracle(&m, 2, &u).unwrap() + 3.9).abs() < 1e-12);
        assert!((exact_finite_horizon_oracle(&m, 3, &u).unwrap() + 5.705).abs() < 1e-12);
    }

    #[test]
    fn lp_pruning_drops_interior_vectors() {
        let keep = prune_indices(&[&[1.0, 0.0], &[0.0, 1.0], &[0.4, 0.4], &[0.6, 0.6]]).unwrap();
        assert_eq!(keep, vec![true, true, false, true]);
    }
}
