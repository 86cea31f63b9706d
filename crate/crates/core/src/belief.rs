//! Beliefs and the single-step belief-space mathematics: prediction,
//! observation likelihoods, Bayesian update, expected rewards and the
//! piece-wise linear value of a belief.

use serde::{Deserialize, Serialize};

use crate::error::{contract, Error, Result};
use crate::linalg::dot;
use crate::model::{JointAction, JointObservation, PomdpModel};

/// Probabilities summing to one within this tolerance count as a belief.
pub const BELIEF_TOL: f64 = 1e-9;

/// Likelihoods at or below this are treated as impossible observations.
pub const LIKELIHOOD_FLOOR: f64 = 1e-300;

/// Two computed beliefs closer than this in L∞ are the same belief.
pub const BELIEF_EQ_TOL: f64 = 1e-9;

/// A probability distribution over the model's states.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Belief(Vec<f64>);

impl Belief {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(contract("belief must have at least one entry"));
        }
        let mut sum = 0.0;
        for &p in &probs {
            if !(p >= 0.0) || !p.is_finite() {
                return Err(contract(format!("belief entry {p} is not a probability")));
            }
            sum += p;
        }
        if (sum - 1.0).abs() > BELIEF_TOL {
            return Err(contract(format!("belief sums to {sum}")));
        }
        Ok(Belief(probs))
    }

    /// Normalizes non-negative weights into a belief.
    pub fn from_weights(w: Vec<f64>) -> Result<Self> {
        let total: f64 = w.iter().sum();
        if !(total > 0.0) || w.iter().any(|&x| x < 0.0) {
            return Err(contract("weights must be non-negative with a positive sum"));
        }
        Ok(Belief(w.into_iter().map(|x| x / total).collect()))
    }

    pub fn corner(n: usize, k: usize) -> Self {
        let mut v = vec![0.0; n];
        v[k] = 1.0;
        Belief(v)
    }

    pub fn uniform(n: usize) -> Self {
        Belief(vec![1.0 / n as f64; n])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn probs(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn support(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.iter().enumerate().filter(|(_, p)| **p > 0.0).map(|(i, _)| i)
    }

    pub fn linf_distance(&self, other: &Belief) -> f64 {
        self.0.iter().zip(&other.0).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }

    pub fn l1_distance(&self, other: &Belief) -> f64 {
        self.0.iter().zip(&other.0).map(|(a, b)| (a - b).abs()).sum()
    }

    pub fn to_sparse(&self) -> SparseBelief {
        SparseBelief::from_dense(&self.0)
    }
}

/// A belief stored as its support only; used by the solvers, where beliefs of
/// large time-augmented models touch a handful of states.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparseBelief {
    pub n: usize,
    pub idx: Vec<usize>,
    pub val: Vec<f64>,
}

impl SparseBelief {
    pub fn from_dense(p: &[f64]) -> Self {
        let mut idx = Vec::new();
        let mut val = Vec::new();
        for (i, &v) in p.iter().enumerate() {
            if v > 0.0 {
                idx.push(i);
                val.push(v);
            }
        }
        SparseBelief { n: p.len(), idx, val }
    }

    pub fn corner(n: usize, k: usize) -> Self {
        SparseBelief { n, idx: vec![k], val: vec![1.0] }
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let mut v = vec![0.0; self.n];
        for (&i, &p) in self.idx.iter().zip(&self.val) {
            v[i] = p;
        }
        v
    }

    pub fn to_belief(&self) -> Belief {
        Belief(self.to_dense())
    }

    #[inline]
    pub fn dot(&self, dense: &[f64]) -> f64 {
        self.idx.iter().zip(&self.val).map(|(&i, &p)| p * dense[i]).sum()
    }

    pub fn support_len(&self) -> usize {
        self.idx.len()
    }

    /// L∞ distance between two sparse beliefs of the same dimension.
    pub fn linf_distance(&self, other: &SparseBelief) -> f64 {
        let (mut i, mut j) = (0, 0);
        let mut worst = 0.0f64;
        while i < self.idx.len() || j < other.idx.len() {
            let a = self.idx.get(i).copied().unwrap_or(usize::MAX);
            let b = other.idx.get(j).copied().unwrap_or(usize::MAX);
            let d = if a == b {
                i += 1;
                j += 1;
                self.val[i - 1] - other.val[j - 1]
            } else if a < b {
                i += 1;
                self.val[i - 1]
            } else {
                j += 1;
                other.val[j - 1]
            };
            worst = worst.max(d.abs());
        }
        worst
    }

    pub fn l1_distance(&self, other: &SparseBelief) -> f64 {
        let (mut i, mut j) = (0, 0);
        let mut total = 0.0;
        while i < self.idx.len() || j < other.idx.len() {
            let a = self.idx.get(i).copied().unwrap_or(usize::MAX);
            let b = other.idx.get(j).copied().unwrap_or(usize::MAX);
            total += if a == b {
                i += 1;
                j += 1;
                (self.val[i - 1] - other.val[j - 1]).abs()
            } else if a < b {
                i += 1;
                self.val[i - 1]
            } else {
                j += 1;
                other.val[j - 1]
            };
        }
        total
    }
}

/// One supporting hyperplane of a piece-wise linear value function, tagged
/// with the action whose conditional plan produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlphaVector {
    pub values: Vec<f64>,
    pub action: JointAction,
}

impl AlphaVector {
    pub fn new(values: Vec<f64>, action: JointAction) -> Self {
        AlphaVector { values, action }
    }

    #[inline]
    pub fn value_at(&self, b: &Belief) -> f64 {
        dot(&self.values, b.probs())
    }
}

/// `b^a(s') = Σ_s p(s'|s, a_M) b(s)`.
pub fn belief_predict(model: &PomdpModel, b: &Belief, a_m: usize) -> Result<Belief> {
    model.check_belief(b)?;
    if a_m >= model.n_maintenance() {
        return Err(contract(format!("maintenance action {a_m} out of range")));
    }
    Ok(Belief(predict_raw(model, b.probs(), a_m)))
}

pub(crate) fn predict_raw(model: &PomdpModel, b: &[f64], a_m: usize) -> Vec<f64> {
    let p = &model.transition[a_m];
    let mut out = vec![0.0; b.len()];
    for (s, &w) in b.iter().enumerate() {
        if w > 0.0 {
            p.row(s).for_each_nonzero(|j, v| out[j] += w * v);
        }
    }
    out
}

/// `p(o | b, a) = Σ_{s'} p(o_e|s') p(o_O|s', a_O) b^a(s')`.
pub fn observation_likelihood(model: &PomdpModel, b: &Belief, a: JointAction, o: JointObservation) -> Result<f64> {
    model.check_action(a)?;
    model.check_observation(a.observation, o)?;
    let predicted = belief_predict(model, b, a.maintenance)?;
    Ok(likelihood_of_predicted(model, predicted.probs(), a.observation, o))
}

fn likelihood_of_predicted(model: &PomdpModel, predicted: &[f64], a_o: usize, o: JointObservation) -> f64 {
    predicted
        .iter()
        .enumerate()
        .filter(|(_, p)| **p > 0.0)
        .map(|(s, p)| p * model.observation_probability(s, a_o, o))
        .sum()
}

/// Bayesian posterior `b^{a,o}`.
pub fn belief_update(model: &PomdpModel, b: &Belief, a: JointAction, o: JointObservation) -> Result<Belief> {
    model.check_action(a)?;
    model.check_observation(a.observation, o)?;
    let predicted = belief_predict(model, b, a.maintenance)?;
    update_predicted(model, &predicted, a.observation, o)
}

/// Posterior from an already-predicted belief.
pub fn update_predicted(model: &PomdpModel, predicted: &Belief, a_o: usize, o: JointObservation) -> Result<Belief> {
    let mut post: Vec<f64> = predicted
        .probs()
        .iter()
        .enumerate()
        .map(|(s, p)| if *p > 0.0 { p * model.observation_probability(s, a_o, o) } else { 0.0 })
        .collect();
    let z: f64 = post.iter().sum();
    if z <= LIKELIHOOD_FLOOR {
        return Err(Error::ZeroLikelihoodObservation { likelihood: z });
    }
    for p in &mut post {
        *p /= z;
    }
    Ok(Belief(post))
}

/// `r_b = b·R_M + γ b·R_O + b·R_D`.
pub fn expected_reward(model: &PomdpModel, b: &Belief, a: JointAction) -> Result<f64> {
    model.check_belief(b)?;
    model.check_action(a)?;
    Ok(dot(b.probs(), &model.reward_vector(a)))
}

/// `max_α b·α` with its (lowest) argmax index.
pub fn value_of_belief(gamma_set: &[AlphaVector], b: &Belief) -> Result<(f64, usize)> {
    if gamma_set.is_empty() {
        return Err(Error::EmptyAlphaSet);
    }
    let mut best = (f64::NEG_INFINITY, 0);
    for (i, alpha) in gamma_set.iter().enumerate() {
        if alpha.values.len() != b.len() {
            return Err(contract("alpha-vector and belief dimensions differ"));
        }
        let v = alpha.value_at(b);
        if v > best.0 {
            best = (v, i);
        }
    }
    Ok(best)
}

/// All joint observations with positive likelihood, with their posteriors.
pub fn successors(model: &PomdpModel, b: &Belief, a: JointAction) -> Result<Vec<(JointObservation, f64, Belief)>> {
    model.check_action(a)?;
    let predicted = belief_predict(model, b, a.maintenance)?;
    let mut out = Vec::new();
    for o in model.joint_observations(a.observation) {
        let p = likelihood_of_predicted(model, predicted.probs(), a.observation, o);
        if p > LIKELIHOOD_FLOOR {
            out.push((o, p, update_predicted(model, &predicted, a.observation, o)?));
        }
    }
    Ok(out)
}

/// `p(b' | b, a)`: total likelihood of the observations whose posterior is `b'`.
pub fn belief_transition_probability(model: &PomdpModel, b: &Belief, a: JointAction, target: &Belief) -> Result<f64> {
    model.check_belief(target)?;
    Ok(successors(model, b, a)?
        .into_iter()
        .filter(|(_, _, post)| post.linf_distance(target) <= BELIEF_EQ_TOL)
        .map(|(_, p, _)| p)
        .sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ModelBuilder;
    use proptest::prelude::*;

    const COMPONENT_1: [[f64; 3]; 3] = [[0.82, 0.13, 0.05], [0.0, 0.87, 0.13], [0.0, 0.0, 1.0]];

    fn accuracy_rows(p: f64) -> Vec<Vec<f64>> {
        let q = (1.0 - p) / 2.0;
        vec![vec![p, q, q], vec![q, p, q], vec![q, q, p]]
    }

    /// Component 1 of the three-component system with an inspection of accuracy 0.90.
    fn component_model() -> PomdpModel {
        ModelBuilder::new(3, 0.95)
            .maintenance(vec![("do-nothing", COMPONENT_1.iter().map(|r| r.to_vec()).collect(), vec![0.0; 3])])
            .unwrap()
            .observation_actions(vec![
                ("none", vec![vec![1.0]; 3], vec![0.0; 3]),
                ("inspect", accuracy_rows(0.90), vec![-1.0; 3]),
            ])
            .unwrap()
            .build()
            .unwrap()
    }

    fn b(v: &[f64]) -> Belief {
        Belief::new(v.to_vec()).unwrap()
    }

    #[test]
    fn predict_examples() {
        let m = component_model();
        let p = belief_predict(&m, &b(&[1.0, 0.0, 0.0]), 0).unwrap();
        assert_eq!(p.probs(), &[0.82, 0.13, 0.05]);
        // 0.5*(0.82,0.13,0.05) + 0.5*(0,0.87,0.13)
        let p = belief_predict(&m, &b(&[0.5, 0.5, 0.0]), 0).unwrap();
        for (x, y) in p.probs().iter().zip([0.41, 0.50, 0.09]) {
            assert!((x - y).abs() < 1e-12);
        }
        let ident = ModelBuilder::new(3, 0.9).build().unwrap();
        let q = b(&[0.2, 0.3, 0.5]);
        assert_eq!(belief_predict(&ident, &q, 0).unwrap(), q);
    }

    #[test]
    fn likelihood_and_update_examples() {
        let m = component_model();
        let a = JointAction::new(0, 1);
        let o = JointObservation::new(0, 0);
        let root = b(&[1.0, 0.0, 0.0]);
        let l = observation_likelihood(&m, &root, a, o).unwrap();
        assert!((l - 0.747).abs() < 1e-12);
        let post = belief_update(&m, &root, a, o).unwrap();
        let expect = [0.738 / 0.747, 0.0065 / 0.747, 0.0025 / 0.747];
        for (x, y) in post.probs().iter().zip(expect) {
            assert!((x - y).abs() < 1e-12);
        }
        assert!((post.probs()[0] - 0.98795).abs() < 1e-5);
        assert!((post.probs()[1] - 0.00870).abs() < 1e-5);
        assert!((post.probs()[2] - 0.00335).abs() < 1e-5);
        assert!((belief_transition_probability(&m, &root, a, &post).unwrap() - 0.747).abs() < 1e-12);
    }

    #[test]
    fn uninformative_and_perfect_observations() {
        let m = component_model();
        let root = b(&[0.3, 0.3, 0.4]);
        let trivial = JointAction::new(0, 0);
        let post = belief_update(&m, &root, trivial, JointObservation::new(0, 0)).unwrap();
        assert_eq!(post, belief_predict(&m, &root, 0).unwrap());
        assert_eq!(belief_transition_probability(&m, &root, trivial, &post).unwrap(), 1.0);

        let perfect = ModelBuilder::new(3, 0.9)
            .observation_actions(vec![("look", accuracy_rows(1.0), vec![0.0; 3])])
            .unwrap()
            .build()
            .unwrap();
        let q = b(&[0.2, 0.3, 0.5]);
        let a = JointAction::new(0, 0);
        let o = JointObservation::new(0, 2);
        assert!((observation_likelihood(&perfect, &q, a, o).unwrap() - 0.5).abs() < 1e-15);
        assert_eq!(belief_update(&perfect, &q, a, o).unwrap(), Belief::corner(3, 2));
        let corner = Belief::corner(3, 1);
        assert_eq!(belief_transition_probability(&perfect, &corner, a, &corner).unwrap(), 1.0);
    }

    #[test]
    fn uniform_observation_likelihood() {
        let m = ModelBuilder::new(3, 0.9)
            .observation_actions(vec![("look", vec![vec![1.0 / 3.0; 3]; 3], vec![0.0; 3])])
            .unwrap()
            .build()
            .unwrap();
        for k in 0..3 {
            let l = observation_likelihood(&m, &b(&[0.1, 0.6, 0.3]), JointAction::new(0, 0), JointObservation::new(0, k))
                .unwrap();
            assert!((l - 1.0 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn zero_likelihood_is_reported() {
        let perfect = ModelBuilder::new(2, 0.9)
            .observation_actions(vec![("look", vec![vec![1.0, 0.0], vec![0.0, 1.0]], vec![0.0; 2])])
            .unwrap()
            .build()
            .unwrap();
        let r = belief_update(&perfect, &Belief::corner(2, 0), JointAction::new(0, 0), JointObservation::new(0, 1));
        assert!(matches!(r, Err(Error::ZeroLikelihoodObservation { .. })));
    }

    #[test]
    fn expected_reward_zero_model() {
        let m = ModelBuilder::new(3, 0.9).build().unwrap();
        assert_eq!(expected_reward(&m, &Belief::uniform(3), JointAction::new(0, 0)).unwrap(), 0.0);
    }

    #[test]
    fn value_of_belief_examples() {
        let a = JointAction::new(0, 0);
        let zero = vec![AlphaVector::new(vec![0.0; 3], a)];
        assert_eq!(value_of_belief(&zero, &Belief::uniform(3)).unwrap(), (0.0, 0));
        let corners = vec![AlphaVector::new(vec![1.0, 0.0], a), AlphaVector::new(vec![0.0, 1.0], a)];
        let (v, i) = value_of_belief(&corners, &b(&[0.7, 0.3])).unwrap();
        assert!((v - 0.7).abs() < 1e-15);
        assert_eq!(i, 0);
        let two = vec![AlphaVector::new(vec![2.0, 2.0], a), AlphaVector::new(vec![3.0, 0.0], a)];
        assert_eq!(value_of_belief(&two, &b(&[0.5, 0.5])).unwrap(), (2.0, 0));
        assert!(matches!(value_of_belief(&[], &b(&[1.0])), Err(Error::EmptyAlphaSet)));
    }

    #[test]
    fn sparse_distances() {
        let a = SparseBelief::from_dense(&[0.5, 0.0, 0.5]);
        let c = SparseBelief::from_dense(&[0.0, 0.25, 0.75]);
        assert!((a.l1_distance(&c) - 1.0).abs() < 1e-15);
        assert!((a.linf_distance(&c) - 0.5).abs() < 1e-15);
    }

    fn simplex(n: usize) -> impl Strategy<Value = Belief> {
        prop::collection::vec(0.0f64..1.0, n).prop_filter_map("positive mass", |w| Belief::from_weights(w).ok())
    }

    proptest! {
        #[test]
        fn posteriors_marginalize_to_prediction(root in simplex(3), p in 0.34f64..1.0) {
            let m = ModelBuilder::new(3, 0.95)
                .maintenance(vec![("do-nothing", COMPONENT_1.iter().map(|r| r.to_vec()).collect(), vec![0.0; 3])])
                .unwrap()
                .observation_actions(vec![("inspect", accuracy_rows(p), vec![0.0; 3])])
                .unwrap()
                .build()
                .unwrap();
            let a = JointAction::new(0, 0);
            let predicted = belief_predict(&m, &root, 0).unwrap();
            let mut mix = vec![0.0; 3];
            let mut total = 0.0;
            for (_, l, post) in successors(&m, &root, a).unwrap() {
                total += l;
                prop_assert!((post.probs().iter().sum::<f64>() - 1.0).abs() < 1e-9);
                for (x, y) in mix.iter_mut().zip(post.probs()) {
                    *x += l * y;
                }
            }
            prop_assert!((total - 1.0).abs() < 1e-9);
            for (x, y) in mix.iter().zip(predicted.probs()) {
                prop_assert!((x - y).abs() < 1e-9);
            }
        }

        #[test]
        fn value_of_belief_is_convex(
            alphas in prop::collection::vec(prop::collection::vec(-10.0f64..0.0, 3), 1..6),
            b1 in simplex(3), b2 in simplex(3), lambda in 0.0f64..1.0,
        ) {
            let set: Vec<_> = alphas.into_iter().map(|v| AlphaVector::new(v, JointAction::new(0, 0))).collect();
            let mid: Vec<f64> = b1.probs().iter().zip(b2.probs()).map(|(x, y)| lambda * x + (1.0 - lambda) * y).collect();
            let mid = Belief::from_weights(mid).unwrap();
            let v = |q: &Belief| value_of_belief(&set, q).unwrap().0;
            prop_assert!(v(&mid) <= lambda * v(&b1) + (1.0 - lambda) * v(&b2) + 1e-9);
        }
    }
}
