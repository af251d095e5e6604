//! Utility evaluation interface consumed by every solver.
//!
//! Oracles expose *partial* derivatives only; total derivatives along the
//! local best-response composition live in [`crate::diff`].

use nalgebra::{DMatrix, DVector};

use crate::profile::ActionProfile;
use crate::tree::{GameTree, PlayerId};

/// Relative finite-difference step: `h = FD_STEP * max(1, |x|)`.
pub const FD_STEP: f64 = 1e-5;

#[inline]
pub fn fd_step(v: f64, rel: f64) -> f64 {
    rel * v.abs().max(1.0)
}

pub trait UtilityOracle: Send + Sync {
    fn tree(&self) -> &GameTree;

    /// `u_i(x)`.
    fn value(&self, i: PlayerId, x: &ActionProfile) -> f64;

    /// Players whose actions may affect `u_i`. Must be a subset of
    /// `{i, Pa(i)} ∪ leaves`.
    fn dependency_set(&self, i: PlayerId) -> Vec<PlayerId> {
        structural_dependencies(self.tree(), i)
    }

    /// Partial gradient `∇_{x_wrt} u_i`, length `d_wrt`.
    fn grad(&self, i: PlayerId, wrt: PlayerId, x: &ActionProfile) -> DVector<f64> {
        fd_grad(self, i, wrt, x)
    }

    /// Partial Hessian block `∇²_{x_a, x_b} u_i` of shape `d_a × d_b`.
    fn hess(&self, i: PlayerId, a: PlayerId, b: PlayerId, x: &ActionProfile) -> DMatrix<f64> {
        fd_hess_values(self, i, a, b, x)
    }

    /// `∇_{x_L} u_i`: the gradient with respect to every leaf action,
    /// concatenated in leaf order. Games with cheap joint leaf gradients
    /// should override this.
    fn leaf_grad(&self, i: PlayerId, x: &ActionProfile) -> DVector<f64> {
        let tree = self.tree();
        let mut out = DVector::zeros(tree.leaf_dim());
        for j in tree.leaves() {
            let r = tree.leaf_local_range(j);
            out.rows_mut(r.start, r.len()).copy_from(&self.grad(i, j, x));
        }
        out
    }
}

/// `{i, Pa(i)} ∪ leaves`, sorted and deduplicated.
pub fn structural_dependencies(tree: &GameTree, i: PlayerId) -> Vec<PlayerId> {
    let mut v = vec![i];
    v.extend(tree.parent(i));
    v.extend(tree.leaves());
    v.sort();
    v.dedup();
    v
}

/// Central-difference partial gradient from function values.
pub fn fd_grad<O: UtilityOracle + ?Sized>(o: &O, i: PlayerId, wrt: PlayerId, x: &ActionProfile) -> DVector<f64> {
    let r = o.tree().range(wrt);
    let mut g = DVector::zeros(r.len());
    let mut xp = x.clone();
    for (c, k) in r.enumerate() {
        let v = x.as_slice()[k];
        let h = fd_step(v, FD_STEP);
        xp.as_mut_slice()[k] = v + h;
        let fp = o.value(i, &xp);
        xp.as_mut_slice()[k] = v - h;
        let fm = o.value(i, &xp);
        xp.as_mut_slice()[k] = v;
        g[c] = (fp - fm) / (2.0 * h);
    }
    g
}

/// Relative step for second differences of values, balancing truncation
/// against cancellation.
pub const FD_STEP2: f64 = 1e-4;

/// Second-difference Hessian block from function values only.
pub fn fd_hess_values<O: UtilityOracle + ?Sized>(
    o: &O,
    i: PlayerId,
    a: PlayerId,
    b: PlayerId,
    x: &ActionProfile,
) -> DMatrix<f64> {
    let (ra, rb) = (o.tree().range(a), o.tree().range(b));
    let mut h = DMatrix::zeros(ra.len(), rb.len());
    let mut xp = x.clone();
    let mut f = |ka: usize, sa: f64, kb: usize, sb: f64| {
        xp.as_mut_slice()[ka] += sa;
        xp.as_mut_slice()[kb] += sb;
        let v = o.value(i, &xp);
        xp.as_mut_slice()[ka] = x.as_slice()[ka];
        xp.as_mut_slice()[kb] = x.as_slice()[kb];
        v
    };
    for (r, ka) in ra.clone().enumerate() {
        let ha = fd_step(x.as_slice()[ka], FD_STEP2);
        for (c, kb) in rb.clone().enumerate() {
            h[(r, c)] = if ka == kb {
                (f(ka, ha, kb, 0.0) - 2.0 * f(ka, 0.0, kb, 0.0) + f(ka, -ha, kb, 0.0)) / (ha * ha)
            } else {
                let hb = fd_step(x.as_slice()[kb], FD_STEP2);
                (f(ka, ha, kb, hb) - f(ka, ha, kb, -hb) - f(ka, -ha, kb, hb) + f(ka, -ha, kb, -hb)) / (4.0 * ha * hb)
            };
        }
    }
    h
}

/// Central-difference Hessian block, differencing `o.grad`. Accurate when
/// the gradient is analytic.
pub fn fd_hess<O: UtilityOracle + ?Sized>(o: &O, i: PlayerId, a: PlayerId, b: PlayerId, x: &ActionProfile) -> DMatrix<f64> {
    let rb = o.tree().range(b);
    let da = o.tree().dim(a);
    let mut h = DMatrix::zeros(da, rb.len());
    let mut xp = x.clone();
    for (c, k) in rb.enumerate() {
        let v = x.as_slice()[k];
        let step = fd_step(v, FD_STEP);
        xp.as_mut_slice()[k] = v + step;
        let gp = o.grad(i, a, &xp);
        xp.as_mut_slice()[k] = v - step;
        let gm = o.grad(i, a, &xp);
        xp.as_mut_slice()[k] = v;
        h.set_column(c, &((gp - gm) / (2.0 * step)));
    }
    h
}

/// Utility function given as `Fn(player, flat actions) -> value`. All
/// derivatives come from the finite-difference fallbacks.
pub struct FnOracle<F> {
    tree: GameTree,
    f: F,
}

impl<F> FnOracle<F>
where
    F: Fn(PlayerId, &[f64]) -> f64 + Send + Sync,
{
    pub fn new(tree: GameTree, f: F) -> Self {
        FnOracle { tree, f }
    }
}

impl<F> UtilityOracle for FnOracle<F>
where
    F: Fn(PlayerId, &[f64]) -> f64 + Send + Sync,
{
    fn tree(&self) -> &GameTree {
        &self.tree
    }

    fn value(&self, i: PlayerId, x: &ActionProfile) -> f64 {
        (self.f)(i, x.as_slice())
    }
}

impl<T: UtilityOracle + ?Sized> UtilityOracle for Box<T> {
    fn tree(&self) -> &GameTree {
        (**self).tree()
    }
    fn value(&self, i: PlayerId, x: &ActionProfile) -> f64 {
        (**self).value(i, x)
    }
    fn dependency_set(&self, i: PlayerId) -> Vec<PlayerId> {
        (**self).dependency_set(i)
    }
    fn grad(&self, i: PlayerId, wrt: PlayerId, x: &ActionProfile) -> DVector<f64> {
        (**self).grad(i, wrt, x)
    }
    fn hess(&self, i: PlayerId, a: PlayerId, b: PlayerId, x: &ActionProfile) -> DMatrix<f64> {
        (**self).hess(i, a, b, x)
    }
    fn leaf_grad(&self, i: PlayerId, x: &ActionProfile) -> DVector<f64> {
        (**self).leaf_grad(i, x)
    }
}
