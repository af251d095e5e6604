//! Total derivatives along the local best-response composition.
//!
//! Each non-root player `j` responds to its parent through `φ_j`, whose
//! Jacobian comes from the implicit function theorem applied to
//! `∇_{x_j} u_j = 0`. Composing those Jacobians bottom-up yields, for every
//! player, the Jacobian of the leaf profile with respect to its own action,
//! and from that its total gradient. Everything is evaluated at the profile
//! passed in; no best response is ever solved for.

use nalgebra::{DMatrix, DVector};

use crate::error::{Result, ShgError};
use crate::linalg::solve_checked;
use crate::oracle::{fd_step, UtilityOracle, FD_STEP};
use crate::profile::ActionProfile;
use crate::tree::{GameTree, PlayerId};

/// `D_{x_owner} Φ`: sensitivity of the whole leaf profile to the owner's
/// action, shape `leaf_dim × d_owner`.
#[derive(Debug, Clone, PartialEq)]
pub struct LeafJacobian {
    pub owner: PlayerId,
    pub matrix: DMatrix<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TotalGradient {
    pub owner: PlayerId,
    pub vector: DVector<f64>,
}

/// `D_{x_{Pa(j)}} φ_j = −(∇²_{x_j x_j} u_j)⁻¹ ∇²_{x_j x_{Pa(j)}} u_j`,
/// shape `d_j × d_{Pa(j)}`.
pub fn local_response_jacobian<O: UtilityOracle + ?Sized>(oracle: &O, j: PlayerId, x: &ActionProfile) -> Result<DMatrix<f64>> {
    let tree = oracle.tree();
    tree.check(j)?;
    let pa = tree.parent(j).ok_or_else(|| ShgError::MalformedTree(format!("player {j} is the root and responds to no one")))?;
    let hjj = oracle.hess(j, j, j, x);
    let hjp = oracle.hess(j, j, pa, x);
    Ok(-solve_checked(&hjj, &hjp, j)?)
}

/// Identity on the leaf's own rows, zero elsewhere.
pub fn leaf_identity(tree: &GameTree, j: PlayerId) -> LeafJacobian {
    let d = tree.dim(j);
    let r = tree.leaf_local_range(j);
    let mut m = DMatrix::zeros(tree.leaf_dim(), d);
    m.view_mut((r.start, 0), (d, d)).fill_with_identity();
    LeafJacobian { owner: j, matrix: m }
}

/// `D_{x_i} Φ = Σ_{j ∈ Chd(i)} (D_{x_j} Φ)(D_{x_i} φ_j)`.
///
/// `child_jacobians` must contain an entry for every child of `i`; extra
/// entries are ignored.
pub fn backprop_leaf_jacobian<O: UtilityOracle + ?Sized>(
    oracle: &O,
    i: PlayerId,
    child_jacobians: &[LeafJacobian],
    x: &ActionProfile,
) -> Result<LeafJacobian> {
    let tree = oracle.tree();
    tree.check(i)?;
    if tree.is_leaf(i) {
        return Err(ShgError::InvalidParams(format!("player {i} is a leaf; its Jacobian is the identity")));
    }
    let mut m = DMatrix::zeros(tree.leaf_dim(), tree.dim(i));
    for &c in tree.children(i) {
        let jc = child_jacobians
            .iter()
            .find(|lj| lj.owner == c)
            .ok_or_else(|| ShgError::InvalidParams(format!("missing leaf Jacobian for child {c} of {i}")))?;
        let dphi = local_response_jacobian(oracle, c, x)?;
        m.gemm(1.0, &jc.matrix, &dphi, 1.0);
    }
    Ok(LeafJacobian { owner: i, matrix: m })
}

/// Leaf Jacobian of `i`, recursing through its subtree.
pub fn leaf_jacobian<O: UtilityOracle + ?Sized>(oracle: &O, i: PlayerId, x: &ActionProfile) -> Result<LeafJacobian> {
    let tree = oracle.tree();
    if tree.is_leaf(i) {
        return Ok(leaf_identity(tree, i));
    }
    let kids = tree.children(i).iter().map(|&c| leaf_jacobian(oracle, c, x)).collect::<Result<Vec<_>>>()?;
    backprop_leaf_jacobian(oracle, i, &kids, x)
}

/// `D_{x_i} u_i = ∇_{x_i} u_i + (D_{x_i} Φ)ᵀ ∇_{x_L} u_i`. For a leaf this is
/// the partial gradient and `leaf_jac` is not consulted.
pub fn total_grad<O: UtilityOracle + ?Sized>(
    oracle: &O,
    i: PlayerId,
    x: &ActionProfile,
    leaf_jac: &LeafJacobian,
) -> TotalGradient {
    let mut g = oracle.grad(i, i, x);
    if !oracle.tree().is_leaf(i) {
        let gl = oracle.leaf_grad(i, x);
        g.gemv_tr(1.0, &leaf_jac.matrix, &gl, 1.0);
    }
    TotalGradient { owner: i, vector: g }
}

/// [`total_grad`] with the leaf Jacobian assembled on the spot.
pub fn total_grad_at<O: UtilityOracle + ?Sized>(oracle: &O, i: PlayerId, x: &ActionProfile) -> Result<TotalGradient> {
    let lj = leaf_jacobian(oracle, i, x)?;
    Ok(total_grad(oracle, i, x, &lj))
}

/// Total gradients of every player in one bottom-up sweep (the DBI field),
/// indexed by player.
pub fn dbi_field<O: UtilityOracle + ?Sized>(oracle: &O, x: &ActionProfile) -> Result<Vec<DVector<f64>>> {
    let n = oracle.tree().n_players();
    dbi_field_masked(oracle, x, &vec![true; n])
}

/// As [`dbi_field`], but only players with `active[i]` are evaluated; the
/// rest get zero vectors. The active set must be closed under taking
/// descendants.
pub fn dbi_field_masked<O: UtilityOracle + ?Sized>(oracle: &O, x: &ActionProfile, active: &[bool]) -> Result<Vec<DVector<f64>>> {
    let tree = oracle.tree();
    let mut jac: Vec<Option<LeafJacobian>> = vec![None; tree.n_players()];
    let mut out: Vec<DVector<f64>> = tree.players().map(|i| DVector::zeros(tree.dim(i))).collect();
    for l in (1..=tree.n_levels()).rev() {
        for i in tree.level_players(l) {
            if !active[i.0] {
                continue;
            }
            let lj = if tree.is_leaf(i) {
                leaf_identity(tree, i)
            } else {
                let kids: Vec<LeafJacobian> = tree
                    .children(i)
                    .iter()
                    .map(|&c| {
                        jac[c.0]
                            .take()
                            .ok_or_else(|| ShgError::InvalidParams(format!("active set not closed: child {c} of {i} inactive")))
                    })
                    .collect::<Result<_>>()?;
                backprop_leaf_jacobian(oracle, i, &kids, x)?
            };
            out[i.0] = total_grad(oracle, i, x, &lj).vector;
            jac[i.0] = Some(lj);
        }
    }
    Ok(out)
}

/// Concatenates per-player vectors in player order (the flat layout).
pub fn flatten(parts: &[DVector<f64>]) -> DVector<f64> {
    let n = parts.iter().map(|p| p.len()).sum();
    let mut v = DVector::zeros(n);
    let mut k = 0;
    for p in parts {
        v.rows_mut(k, p.len()).copy_from(p);
        k += p.len();
    }
    v
}

/// `D_{x_i} x_k` for `i` and each strict descendant `k`, following the chain
/// of local responses. Indexed by player; `None` outside the subtree.
pub fn response_jacobians_below<O: UtilityOracle + ?Sized>(
    oracle: &O,
    i: PlayerId,
    x: &ActionProfile,
) -> Result<Vec<Option<DMatrix<f64>>>> {
    let tree = oracle.tree();
    let mut d: Vec<Option<DMatrix<f64>>> = vec![None; tree.n_players()];
    d[i.0] = Some(DMatrix::identity(tree.dim(i), tree.dim(i)));
    for k in tree.descendants(i) {
        let pa = tree.parent(k).expect("descendant has a parent");
        let dphi = local_response_jacobian(oracle, k, x)?;
        let above = d[pa.0].as_ref().expect("pre-order visits parents first");
        d[k.0] = Some(dphi * above);
    }
    Ok(d)
}

/// `D²_{x_i x_i} u_i` by central differences of the total gradient along
/// `x_i`, moving every descendant linearly along its response Jacobian.
/// Leaves use the partial Hessian directly.
pub fn total_hessian<O: UtilityOracle + ?Sized>(oracle: &O, i: PlayerId, x: &ActionProfile) -> Result<DMatrix<f64>> {
    let tree = oracle.tree();
    tree.check(i)?;
    if tree.is_leaf(i) {
        return Ok(oracle.hess(i, i, i, x));
    }
    let d = response_jacobians_below(oracle, i, x)?;
    let sub = tree.subtree(i);
    let di = tree.dim(i);
    let base = tree.range(i).start;
    let mut h = DMatrix::zeros(di, di);
    for c in 0..di {
        let step = fd_step(x.as_slice()[base + c], FD_STEP);
        let mut xp = x.clone();
        let mut xm = x.clone();
        for &k in &sub {
            let col = d[k.0].as_ref().expect("subtree Jacobian").column(c);
            for (off, v) in col.iter().enumerate() {
                let idx = tree.range(k).start + off;
                xp.as_mut_slice()[idx] += step * v;
                xm.as_mut_slice()[idx] -= step * v;
            }
        }
        let gp = total_grad_at(oracle, i, &xp)?.vector;
        let gm = total_grad_at(oracle, i, &xm)?.vector;
        h.set_column(c, &((gp - gm) / (2.0 * step)));
    }
    Ok(h)
}
