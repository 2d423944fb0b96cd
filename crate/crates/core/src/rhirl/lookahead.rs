//! Shared lookahead graph of unique states and the soft value recursion
//! over it.
//!
//! States reachable within the horizon are interned once, so transpositions
//! and repeated demonstration states are expanded and valued only once.

use alloc::vec;
use alloc::vec::Vec;

use hashbrown::HashTable;

use super::boltzmann::softmax_into;
use crate::engine::{applicable_actions, apply_action, ActionInstance, GameState};
use crate::hashing::hash_state;
use crate::reward::{dot, FeatureMap};
use crate::story::WorldSpec;

pub(crate) type NodeId = u32;

pub(crate) struct Node {
    pub(crate) state: GameState,
    pub(crate) terminal: bool,
    /// Applicable actions in engine order with their successor nodes.
    pub(crate) children: Option<Vec<(ActionInstance, NodeId)>>,
    explored: usize,
}

pub(crate) struct Lookahead<'w> {
    world: &'w WorldSpec,
    fm: &'w FeatureMap,
    table: HashTable<NodeId>,
    nodes: Vec<Node>,
    phi: Vec<f64>,
}

impl<'w> Lookahead<'w> {
    pub(crate) fn new(world: &'w WorldSpec, fm: &'w FeatureMap) -> Self {
        Self {
            world,
            fm,
            table: HashTable::new(),
            nodes: Vec::new(),
            phi: Vec::new(),
        }
    }

    pub(crate) fn world(&self) -> &'w WorldSpec {
        self.world
    }

    pub(crate) fn len(&self) -> usize {
        self.nodes.len()
    }

    pub(crate) fn node(&self, id: NodeId) -> &Node {
        &self.nodes[id as usize]
    }

    pub(crate) fn phi(&self, id: NodeId) -> &[f64] {
        let k = self.fm.len();
        &self.phi[id as usize * k..(id as usize + 1) * k]
    }

    /// Children of an expanded node; empty for terminal or unexpanded nodes.
    pub(crate) fn children(&self, id: NodeId) -> &[(ActionInstance, NodeId)] {
        self.nodes[id as usize].children.as_deref().unwrap_or(&[])
    }

    pub(crate) fn intern(&mut self, state: &GameState) -> NodeId {
        let hash = hash_state(state);
        let nodes = &self.nodes;
        if let Some(&id) = self.table.find(hash, |&id| nodes[id as usize].state == *state) {
            return id;
        }
        let id = NodeId::try_from(self.nodes.len()).expect("lookahead graph exceeds u32 nodes");
        let k = self.fm.len();
        let start = self.phi.len();
        self.phi.resize(start + k, 0.0);
        self.fm.phi_into(state, &mut self.phi[start..]);
        self.nodes.push(Node {
            state: state.clone(),
            terminal: state.is_terminal(self.world),
            children: None,
            explored: 0,
        });
        let nodes = &self.nodes;
        self.table
            .insert_unique(hash, id, |&i| hash_state(&nodes[i as usize].state));
        id
    }

    fn expand(&mut self, id: NodeId) {
        let node = &self.nodes[id as usize];
        if node.children.is_some() || node.terminal {
            return;
        }
        let state = node.state.clone();
        let actions = applicable_actions(self.world, &state);
        let mut children = Vec::with_capacity(actions.len());
        for a in actions {
            let next = apply_action(self.world, &state, &a)
                .expect("enumerated actions are applicable")
                .next_state;
            children.push((a, self.intern(&next)));
        }
        self.nodes[id as usize].children = Some(children);
    }

    /// Ensures every node within `depth` actions of `id` is expanded.
    pub(crate) fn explore(&mut self, id: NodeId, depth: usize) {
        let mut stack = vec![(id, depth)];
        while let Some((id, depth)) = stack.pop() {
            let node = &mut self.nodes[id as usize];
            if depth == 0 || node.terminal || node.explored >= depth {
                continue;
            }
            node.explored = depth;
            self.expand(id);
            for &(_, child) in self.children(id) {
                if self.nodes[child as usize].explored < depth - 1 {
                    stack.push((child, depth - 1));
                }
            }
        }
    }
}

/// Memoised `V_j` for one weight vector over a fixed graph.
pub(crate) struct SoftValues<'a, 'w> {
    la: &'a Lookahead<'w>,
    beta: f64,
    horizon: usize,
    rewards: Vec<f64>,
    values: Vec<f64>,
    scratch_p: Vec<f64>,
}

impl<'a, 'w> SoftValues<'a, 'w> {
    pub(crate) fn new(la: &'a Lookahead<'w>, weights: &[f64], horizon: usize, beta: f64) -> Self {
        let rewards = (0..la.len() as NodeId).map(|i| dot(weights, la.phi(i))).collect();
        Self {
            la,
            beta,
            horizon,
            rewards,
            values: vec![f64::NAN; la.len() * horizon],
            scratch_p: Vec::new(),
        }
    }

    /// `V_j(node)`, with `V_0 = 0` and zero at terminal nodes.
    pub(crate) fn value(&mut self, id: NodeId, j: usize) -> f64 {
        if j == 0 || self.la.node(id).terminal {
            return 0.0;
        }
        debug_assert!(j < self.horizon);
        let slot = id as usize * self.horizon + j;
        let cached = self.values[slot];
        if !cached.is_nan() {
            return cached;
        }
        let q = self.q_values(id, j);
        let v = if q.is_empty() {
            0.0
        } else {
            let mut p = core::mem::take(&mut self.scratch_p);
            softmax_into(&q, self.beta, &mut p);
            let v = p.iter().zip(&q).map(|(p, q)| p * q).sum();
            self.scratch_p = p;
            v
        };
        self.values[slot] = v;
        v
    }

    /// `Q_d(node, a) = R(s') + V_{d-1}(s')` for each child, in engine order.
    pub(crate) fn q_values(&mut self, id: NodeId, d: usize) -> Vec<f64> {
        let la = self.la;
        let mut q = Vec::with_capacity(la.children(id).len());
        for &(_, c) in la.children(id) {
            let v = self.value(c, d - 1);
            q.push(self.rewards[c as usize] + v);
        }
        q
    }

    /// Log-likelihood of `(root, chosen)` pairs and its gradient in the
    /// weights, by reverse-mode accumulation over the graph.
    pub(crate) fn likelihood_and_gradient(&mut self, pairs: &[(NodeId, usize)]) -> (f64, Vec<f64>) {
        let la = self.la;
        let h = self.horizon;
        let beta = self.beta;
        let n = la.len();
        let mut adj_v = vec![0.0; n * h];
        let mut adj_r = vec![0.0; n];
        let mut ll = 0.0;
        let mut p = Vec::new();

        for &(root, chosen) in pairs {
            let q = self.q_values(root, h);
            ll += super::boltzmann::log_prob(&q, beta, chosen, &mut p);
            for (b, &(_, c)) in la.children(root).iter().enumerate() {
                let g = beta * (if b == chosen { 1.0 } else { 0.0 } - p[b]);
                adj_r[c as usize] += g;
                if h > 1 && !la.node(c).terminal {
                    adj_v[c as usize * h + h - 1] += g;
                }
            }
        }

        for j in (1..h).rev() {
            for id in 0..n {
                let a = adj_v[id * h + j];
                if a == 0.0 {
                    continue;
                }
                let id = id as NodeId;
                let q = self.q_values(id, j);
                if q.is_empty() {
                    continue;
                }
                softmax_into(&q, beta, &mut p);
                let v: f64 = p.iter().zip(&q).map(|(p, q)| p * q).sum();
                for (b, &(_, c)) in la.children(id).iter().enumerate() {
                    let g = a * p[b] * (1.0 + beta * (q[b] - v));
                    adj_r[c as usize] += g;
                    if j > 1 && !la.node(c).terminal {
                        adj_v[c as usize * h + j - 1] += g;
                    }
                }
            }
        }

        let mut grad = vec![0.0; la.fm.len()];
        for (id, &a) in adj_r.iter().enumerate() {
            if a != 0.0 {
                for (g, f) in grad.iter_mut().zip(la.phi(id as NodeId)) {
                    *g += a * f;
                }
            }
        }
        (ll, grad)
    }

    pub(crate) fn log_likelihood(&mut self, pairs: &[(NodeId, usize)]) -> f64 {
        let mut p = Vec::new();
        let mut ll = 0.0;
        for &(root, chosen) in pairs {
            let q = self.q_values(root, self.horizon);
            ll += super::boltzmann::log_prob(&q, self.beta, chosen, &mut p);
        }
        ll
    }
}
