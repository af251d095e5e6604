//! Hierarchical welfare games over a simultaneous-move leaf game.
//!
//! Leaf `k` receives `(1-κ)·u_k(y) - κ·(x_k - x_Pa)²`; an intermediate
//! player receives `(1-κ)·Σ_{k below} u_k(y) - κ·(x_i - x_Pa)²`; the root
//! receives the plain sum of every `u_k`. `y` is the vector of leaf actions
//! and every player has a scalar action.

use nalgebra::{DMatrix, DVector};

use crate::error::{Result, ShgError};
use crate::oracle::UtilityOracle;
use crate::profile::ActionProfile;
use crate::tree::{GameTree, PlayerId};

/// Base payoffs of the flat leaf game, indexed by leaf position `0..n`.
pub trait LeafPayoff: Send + Sync {
    fn n(&self) -> usize;
    fn value(&self, k: usize, y: &[f64]) -> f64;
    /// Gradient over all leaf actions.
    fn grad(&self, k: usize, y: &[f64]) -> DVector<f64>;
    /// Hessian over all leaf actions.
    fn hess(&self, k: usize, y: &[f64]) -> DMatrix<f64>;
}

#[derive(Debug, Clone)]
pub struct WelfareGame<P> {
    tree: GameTree,
    payoff: P,
    kappa: Vec<f64>,
    /// Leaf positions whose payoffs enter each player's welfare term.
    members: Vec<Vec<usize>>,
}

impl<P: LeafPayoff> WelfareGame<P> {
    /// `kappa[i]` is the non-compliance weight of player `i` (ignored for the
    /// root).
    pub fn new(tree: GameTree, payoff: P, kappa: Vec<f64>) -> Result<Self> {
        if tree.dims().iter().any(|&d| d != 1) {
            return Err(ShgError::InvalidParams("welfare games need scalar actions".into()));
        }
        if tree.n_levels() < 2 {
            return Err(ShgError::InvalidParams("welfare games need at least two levels".into()));
        }
        if payoff.n() != tree.n_leaves() {
            return Err(ShgError::InvalidParams(format!(
                "leaf game has {} players, tree has {} leaves",
                payoff.n(),
                tree.n_leaves()
            )));
        }
        if kappa.len() != tree.n_players() {
            return Err(ShgError::InvalidWeights(format!("{} weights for {} players", kappa.len(), tree.n_players())));
        }
        if let Some(k) = kappa.iter().skip(1).find(|k| !(0.0..=1.0).contains(*k)) {
            return Err(ShgError::InvalidWeights(format!("non-compliance weight {k} outside [0,1]")));
        }
        let first = tree.first_leaf().0;
        let members = tree.players().map(|i| tree.subtree_leaves(i).iter().map(|l| l.0 - first).collect()).collect();
        Ok(WelfareGame { tree, payoff, kappa, members })
    }

    pub fn payoff(&self) -> &P {
        &self.payoff
    }

    pub fn kappa(&self, i: PlayerId) -> f64 {
        self.kappa[i.0]
    }

    fn welfare_weight(&self, i: PlayerId) -> f64 {
        if self.tree.parent(i).is_none() {
            1.0
        } else {
            1.0 - self.kappa[i.0]
        }
    }

    fn leaf_actions<'a>(&self, x: &'a ActionProfile) -> &'a [f64] {
        &x.as_slice()[self.tree.leaf_range()]
    }

    /// Sum of the member payoffs of `i` (unweighted).
    pub fn group_welfare(&self, i: PlayerId, x: &ActionProfile) -> f64 {
        let y = self.leaf_actions(x);
        self.members[i.0].iter().map(|&k| self.payoff.value(k, y)).sum()
    }

    fn leaf_pos(&self, j: PlayerId) -> Option<usize> {
        self.tree.is_leaf(j).then(|| j.0 - self.tree.first_leaf().0)
    }

    /// Second derivative of `-κ(x_i - x_p)²` along players `a`, `b`.
    fn nc_second(&self, i: PlayerId, a: PlayerId, b: PlayerId) -> f64 {
        let Some(p) = self.tree.parent(i) else { return 0.0 };
        let k = self.kappa[i.0];
        let s = |v: PlayerId| {
            if v == i {
                1.0
            } else if v == p {
                -1.0
            } else {
                0.0
            }
        };
        -2.0 * k * s(a) * s(b)
    }
}

impl<P: LeafPayoff> UtilityOracle for WelfareGame<P> {
    fn tree(&self) -> &GameTree {
        &self.tree
    }

    fn value(&self, i: PlayerId, x: &ActionProfile) -> f64 {
        let mut u = self.welfare_weight(i) * self.group_welfare(i, x);
        if let Some(p) = self.tree.parent(i) {
            let d = x[i][0] - x[p][0];
            u -= self.kappa[i.0] * d * d;
        }
        u
    }

    fn grad(&self, i: PlayerId, wrt: PlayerId, x: &ActionProfile) -> DVector<f64> {
        let mut g = 0.0;
        if let Some(m) = self.leaf_pos(wrt) {
            let y = self.leaf_actions(x);
            let w = self.welfare_weight(i);
            g += w * self.members[i.0].iter().map(|&k| self.payoff.grad(k, y)[m]).sum::<f64>();
        }
        if let Some(p) = self.tree.parent(i) {
            let d = 2.0 * self.kappa[i.0] * (x[i][0] - x[p][0]);
            if wrt == i {
                g -= d;
            }
            if wrt == p {
                g += d;
            }
        }
        DVector::from_element(1, g)
    }

    fn hess(&self, i: PlayerId, a: PlayerId, b: PlayerId, x: &ActionProfile) -> DMatrix<f64> {
        let mut h = self.nc_second(i, a, b);
        if let (Some(ma), Some(mb)) = (self.leaf_pos(a), self.leaf_pos(b)) {
            let y = self.leaf_actions(x);
            let w = self.welfare_weight(i);
            h += w * self.members[i.0].iter().map(|&k| self.payoff.hess(k, y)[(ma, mb)]).sum::<f64>();
        }
        DMatrix::from_element(1, 1, h)
    }

    fn leaf_grad(&self, i: PlayerId, x: &ActionProfile) -> DVector<f64> {
        let y = self.leaf_actions(x);
        let mut g = DVector::zeros(y.len());
        for &k in &self.members[i.0] {
            g += self.payoff.grad(k, y);
        }
        g *= self.welfare_weight(i);
        if let (Some(m), Some(p)) = (self.leaf_pos(i), self.tree.parent(i)) {
            g[m] -= 2.0 * self.kappa[i.0] * (x[i][0] - x[p][0]);
        }
        g
    }
}
