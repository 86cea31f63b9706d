//! Shared belief-space machinery for the point-based solvers: sparse
//! prediction and expansion, point backups and the indexed sawtooth bound.

use std::collections::HashMap;

use crate::belief::{AlphaVector, SparseBelief, LIKELIHOOD_FLOOR};
use crate::model::{JointAction, PomdpModel};

/// Joint observation likelihoods `p(o_e|s') p(o_O|s', a_O)` for one observation action,
/// row-major `|S| x K` with `k = e * |Ω_{a_O}| + o`.
struct ObsTable {
    k: usize,
    probs: Vec<f64>,
}

pub(crate) struct Branch {
    pub obs: usize,
    pub prob: f64,
    pub post: SparseBelief,
}

/// All one-step successors of a belief, per available joint action.
pub(crate) struct Expansion {
    pub preds: Vec<Option<SparseBelief>>,
    pub branches: Vec<Vec<Branch>>,
}

pub(crate) struct Engine<'m> {
    pub model: &'m PomdpModel,
    pub n: usize,
    pub gamma: f64,
    pub actions: Vec<JointAction>,
    pub rewards: Vec<Vec<f64>>,
    obs: Vec<ObsTable>,
}

impl<'m> Engine<'m> {
    pub fn new(model: &'m PomdpModel) -> Self {
        let n = model.n_states();
        let obs = (0..model.n_observation_actions())
            .map(|a_o| {
                let k = model.joint_observation_count(a_o);
                let mut probs = vec![0.0; n * k];
                for s in 0..n {
                    for (ki, o) in model.joint_observations(a_o).enumerate() {
                        probs[s * k + ki] = model.observation_probability(s, a_o, o);
                    }
                }
                ObsTable { k, probs }
            })
            .collect();
        Engine {
            model,
            n,
            gamma: model.discount,
            actions: model.actions.clone(),
            rewards: model.actions.iter().map(|&a| model.reward_vector(a)).collect(),
            obs,
        }
    }

    pub fn n_actions(&self) -> usize {
        self.actions.len()
    }

    pub fn predict(&self, b: &SparseBelief, a_m: usize) -> SparseBelief {
        let p = &self.model.transition[a_m];
        let mut acc: Vec<(usize, f64)> = Vec::with_capacity(b.idx.len() * 2);
        for (&s, &w) in b.idx.iter().zip(&b.val) {
            p.row(s).for_each_nonzero(|j, v| acc.push((j, w * v)));
        }
        merge_sorted(self.n, acc)
    }

    /// Successors of an already-predicted belief under observation action `a_o`.
    pub fn branches(&self, pred: &SparseBelief, a_o: usize) -> Vec<Branch> {
        let table = &self.obs[a_o];
        let k = table.k;
        if k == 1 {
            return vec![Branch { obs: 0, prob: 1.0, post: pred.clone() }];
        }
        let mut mass = vec![0.0; k];
        for (&s, &w) in pred.idx.iter().zip(&pred.val) {
            let row = &table.probs[s * k..(s + 1) * k];
            for (m, &q) in mass.iter_mut().zip(row) {
                *m += w * q;
            }
        }
        let mut out = Vec::new();
        for (ki, &z) in mass.iter().enumerate() {
            if z <= LIKELIHOOD_FLOOR {
                continue;
            }
            let mut idx = Vec::new();
            let mut val = Vec::new();
            for (&s, &w) in pred.idx.iter().zip(&pred.val) {
                let q = table.probs[s * k + ki];
                if q > 0.0 {
                    idx.push(s);
                    val.push(w * q / z);
                }
            }
            out.push(Branch { obs: ki, prob: z, post: SparseBelief { n: self.n, idx, val } });
        }
        out
    }

    pub fn expand(&self, b: &SparseBelief) -> Expansion {
        let mut preds: Vec<Option<SparseBelief>> = vec![None; self.model.n_maintenance()];
        let mut branches = Vec::with_capacity(self.actions.len());
        for a in &self.actions {
            let pred = preds[a.maintenance].get_or_insert_with(|| self.predict(b, a.maintenance));
            branches.push(self.branches(pred, a.observation));
        }
        Expansion { preds, branches }
    }

    /// Point backup at `b`: the α-vector of the maximizing action and its value at `b`.
    pub fn backup(&self, b: &SparseBelief, exp: &Expansion, set: &[AlphaVector]) -> (AlphaVector, f64) {
        let mut best_q = f64::NEG_INFINITY;
        let mut best_a = 0;
        let mut best_choice: Vec<(usize, usize)> = Vec::new();
        for (ai, branches) in exp.branches.iter().enumerate() {
            let mut q = b.dot(&self.rewards[ai]);
            let mut choice = Vec::with_capacity(branches.len());
            for br in branches {
                let (v, idx) = best_alpha(set, &br.post);
                q += self.gamma * br.prob * v;
                choice.push((br.obs, idx));
            }
            if q > best_q {
                best_q = q;
                best_a = ai;
                best_choice = choice;
            }
        }
        let a = self.actions[best_a];
        let fallback = exp.preds[a.maintenance].as_ref().map(|p| best_alpha(set, p).1).unwrap_or(0);
        let table = &self.obs[a.observation];
        let mut chosen = vec![fallback; table.k];
        for (k, idx) in best_choice {
            chosen[k] = idx;
        }
        let mut g = vec![0.0; self.n];
        for (s, gs) in g.iter_mut().enumerate() {
            let row = &table.probs[s * table.k..(s + 1) * table.k];
            *gs = row.iter().zip(&chosen).filter(|(q, _)| **q > 0.0).map(|(q, &i)| q * set[i].values[s]).sum();
        }
        let p = &self.model.transition[a.maintenance];
        let values = (0..self.n).map(|s| self.rewards[best_a][s] + self.gamma * p.row(s).dot(&g)).collect();
        (AlphaVector::new(values, a), best_q)
    }

    /// Upper-bound Q-values `b·r_a + γ Σ_o p(o|b,a) U(b^{a,o})`, one per action.
    pub fn upper_q(&self, b: &SparseBelief, exp: &Expansion, upper: &UpperBound) -> Vec<f64> {
        exp.branches
            .iter()
            .enumerate()
            .map(|(ai, branches)| {
                b.dot(&self.rewards[ai])
                    + self.gamma * branches.iter().map(|br| br.prob * upper.value(&br.post)).sum::<f64>()
            })
            .collect()
    }
}

fn merge_sorted(n: usize, mut acc: Vec<(usize, f64)>) -> SparseBelief {
    acc.sort_unstable_by_key(|e| e.0);
    let mut idx: Vec<usize> = Vec::with_capacity(acc.len());
    let mut val: Vec<f64> = Vec::with_capacity(acc.len());
    for (j, v) in acc {
        if idx.last() == Some(&j) {
            *val.last_mut().unwrap() += v;
        } else {
            idx.push(j);
            val.push(v);
        }
    }
    SparseBelief { n, idx, val }
}

/// `max_α b·α`, lowest index on ties. Panics on an empty set.
#[inline]
pub(crate) fn best_alpha(set: &[AlphaVector], b: &SparseBelief) -> (f64, usize) {
    let mut best = (f64::NEG_INFINITY, 0);
    for (i, a) in set.iter().enumerate() {
        let v = b.dot(&a.values);
        if v > best.0 {
            best = (v, i);
        }
    }
    best
}

/// Sawtooth upper bound with points indexed by their smallest support state,
/// so a query only visits points whose support can lie inside its own.
pub(crate) struct UpperBound {
    pub corners: Vec<f64>,
    pub points: Vec<(SparseBelief, f64)>,
    by_first: Vec<Vec<usize>>,
    capacity: usize,
}

impl UpperBound {
    pub fn new(corners: Vec<f64>, capacity: usize) -> Self {
        let n = corners.len();
        UpperBound { corners, points: Vec::new(), by_first: vec![Vec::new(); n], capacity: capacity.max(1) }
    }

    pub fn value(&self, b: &SparseBelief) -> f64 {
        let base = b.dot(&self.corners);
        let mut best = 0.0f64;
        for &s in &b.idx {
            for &pid in &self.by_first[s] {
                let (p, v) = &self.points[pid];
                let delta = v - p.dot(&self.corners);
                if delta >= 0.0 {
                    continue;
                }
                let r = ratio(b, p);
                if r > 0.0 {
                    best = best.min(delta * r);
                }
            }
        }
        base + best
    }

    /// Records `U(b) <= v`; ignored unless it tightens the bound at `b`.
    pub fn insert(&mut self, b: SparseBelief, v: f64) -> bool {
        if v >= self.value(&b) - 1e-12 {
            return false;
        }
        if b.idx.len() == 1 {
            let s = b.idx[0];
            self.corners[s] = self.corners[s].min(v);
            return true;
        }
        if self.points.len() >= self.capacity {
            self.evict();
        }
        let first = b.idx[0];
        self.by_first[first].push(self.points.len());
        self.points.push((b, v));
        true
    }

    fn evict(&mut self) {
        let old = std::mem::take(&mut self.points);
        for list in &mut self.by_first {
            list.clear();
        }
        let mut kept: Vec<(SparseBelief, f64)> = Vec::with_capacity(old.len());
        // newest first; a point survives unless the points kept so far already imply it
        for (b, v) in old.into_iter().rev() {
            if v < sawtooth(&self.corners, &kept, &b) - 1e-12 {
                kept.push((b, v));
            }
        }
        kept.reverse();
        if kept.len() >= self.capacity {
            let drop = kept.len() + 1 - self.capacity;
            kept.drain(..drop);
        }
        for (i, (b, _)) in kept.iter().enumerate() {
            self.by_first[b.idx[0]].push(i);
        }
        self.points = kept;
    }
}

/// `min_{s ∈ supp(p)} b(s) / p(s)`, zero when the support of `p` leaves that of `b`.
#[inline]
fn ratio(b: &SparseBelief, p: &SparseBelief) -> f64 {
    let mut r = f64::INFINITY;
    let mut j = 0;
    for (&s, &ps) in p.idx.iter().zip(&p.val) {
        while j < b.idx.len() && b.idx[j] < s {
            j += 1;
        }
        if j == b.idx.len() || b.idx[j] != s {
            return 0.0;
        }
        r = r.min(b.val[j] / ps);
    }
    r
}

/// Sawtooth value over an explicit point list, without indexing.
pub(crate) fn sawtooth(corners: &[f64], points: &[(SparseBelief, f64)], b: &SparseBelief) -> f64 {
    let base = b.dot(corners);
    let mut best = 0.0f64;
    for (p, v) in points {
        let delta = v - p.dot(corners);
        if delta < 0.0 {
            let r = ratio(b, p);
            if r > 0.0 {
                best = best.min(delta * r);
            }
        }
    }
    base + best
}

/// Deduplicates beliefs by rounding to a 1e-9 grid.
#[derive(Default)]
pub(crate) struct BeliefSet {
    pub items: Vec<SparseBelief>,
    seen: HashMap<Vec<(usize, i64)>, usize>,
}

impl BeliefSet {
    pub fn insert(&mut self, b: SparseBelief) -> bool {
        let key: Vec<(usize, i64)> = b.idx.iter().zip(&b.val).map(|(&i, &v)| (i, (v * 1e9).round() as i64)).collect();
        if self.seen.contains_key(&key) {
            return false;
        }
        self.seen.insert(key, self.items.len());
        self.items.push(b);
        true
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }
}
