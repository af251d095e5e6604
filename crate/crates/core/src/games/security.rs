//! Hierarchical interdependent security game.
//!
//! Defender `i` survives an attack on itself with probability
//! `x_i/(1+x_i)` and an attack on `j` unless it cascades, which happens with
//! probability `q/((1+x_j)(1+x_i))`. Nature attacks according to
//! `a = softmax(λ(1 - y))`, so every payoff depends on every defender.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::welfare::{LeafPayoff, WelfareGame};
use crate::error::{Result, ShgError};
use crate::tree::{GameTree, Interval};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SecurityParams {
    /// Level sizes; every player of a level gets the same number of children.
    pub shape: Vec<usize>,
    /// Cascade probability shared by every ordered pair.
    pub q: f64,
    pub c: f64,
    pub lambda: f64,
    /// Non-compliance weight of every non-root player.
    pub kappa: f64,
}

impl Default for SecurityParams {
    fn default() -> Self {
        SecurityParams { shape: vec![1, 3, 6], q: 0.5, c: 0.2, lambda: 5.0, kappa: 0.5 }
    }
}

#[derive(Debug, Clone)]
pub struct SecurityPayoff {
    pub n: usize,
    pub q: f64,
    pub c: f64,
    pub lambda: f64,
}

impl SecurityPayoff {
    /// Attack distribution `softmax(λ(1 - y))`.
    pub fn attack(&self, y: &[f64]) -> Vec<f64> {
        let s: Vec<f64> = y.iter().map(|v| self.lambda * (1.0 - v)).collect();
        let m = s.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let e: Vec<f64> = s.iter().map(|v| (v - m).exp()).collect();
        let z: f64 = e.iter().sum();
        e.into_iter().map(|v| v / z).collect()
    }

    /// Survival value `w_k` of defender `i` when `k` is attacked, with its
    /// gradient and Hessian entries restricted to the coordinates `{i, k}`.
    fn survival(&self, i: usize, k: usize, y: &[f64]) -> (f64, [(usize, f64); 2], [(usize, usize, f64); 3]) {
        let pi = 1.0 / (1.0 + y[i]);
        if k == i {
            return ((y[i]) * pi, [(i, pi * pi), (i, 0.0)], [(i, i, -2.0 * pi * pi * pi), (i, i, 0.0), (i, i, 0.0)]);
        }
        let pk = 1.0 / (1.0 + y[k]);
        let q = self.q;
        (
            1.0 - q * pk * pi,
            [(k, q * pk * pk * pi), (i, q * pk * pi * pi)],
            [(k, k, -2.0 * q * pk.powi(3) * pi), (i, i, -2.0 * q * pk * pi.powi(3)), (i, k, -q * pk * pk * pi * pi)],
        )
    }
}

impl LeafPayoff for SecurityPayoff {
    fn n(&self) -> usize {
        self.n
    }

    fn value(&self, i: usize, y: &[f64]) -> f64 {
        let a = self.attack(y);
        (0..self.n).map(|k| a[k] * self.survival(i, k, y).0).sum::<f64>() - self.c * y[i]
    }

    fn grad(&self, i: usize, y: &[f64]) -> DVector<f64> {
        let n = self.n;
        let a = self.attack(y);
        let lam = self.lambda;
        let mut g = DVector::zeros(n);
        // ∂a_k/∂y_m = -λ a_k (δ_km - a_m).
        let mut aw = 0.0;
        let w: Vec<f64> = (0..n).map(|k| self.survival(i, k, y).0).collect();
        for k in 0..n {
            aw += a[k] * w[k];
        }
        for m in 0..n {
            g[m] = -lam * a[m] * (w[m] - aw);
        }
        for k in 0..n {
            let (_, dw, _) = self.survival(i, k, y);
            for (m, d) in dw {
                g[m] += a[k] * d;
            }
        }
        g[i] -= self.c;
        g
    }

    fn hess(&self, i: usize, y: &[f64]) -> DMatrix<f64> {
        let n = self.n;
        let a = self.attack(y);
        let lam = self.lambda;
        let mut w = vec![0.0; n];
        let mut dw = DMatrix::zeros(n, n); // dw[(k, m)] = ∂w_k/∂y_m
        let mut h = DMatrix::zeros(n, n);
        for k in 0..n {
            let (v, d, s) = self.survival(i, k, y);
            w[k] = v;
            for (m, dv) in d {
                dw[(k, m)] += dv;
            }
            for (p, r, sv) in s {
                if p == r {
                    h[(p, r)] += a[k] * sv;
                } else {
                    h[(p, r)] += a[k] * sv;
                    h[(r, p)] += a[k] * sv;
                }
            }
        }
        // da[(k, m)] = ∂a_k/∂y_m.
        let da = DMatrix::from_fn(n, n, |k, m| -lam * a[k] * (if k == m { 1.0 } else { 0.0 } - a[m]));
        // Cross terms Σ_k ∂a_k/∂y_m ∂w_k/∂y_r + (m ↔ r).
        let cross = da.transpose() * &dw;
        h += &cross + cross.transpose();
        // Σ_k w_k ∂²a_k/∂y_m∂y_r with
        // ∂²a_k = λ² a_k [(δ_km - a_m)(δ_kr - a_r) - a_m(δ_mr - a_r)].
        let aw: f64 = (0..n).map(|k| a[k] * w[k]).sum();
        for m in 0..n {
            for r in 0..n {
                // Σ_k a_k w_k (δ_km - a_m)(δ_kr - a_r)
                let mut t = if m == r { a[m] * w[m] } else { 0.0 };
                t -= a[m] * a[r] * w[r];
                t -= a[r] * a[m] * w[m];
                t += a[m] * a[r] * aw;
                let d = if m == r { 1.0 } else { 0.0 };
                t -= aw * a[m] * (d - a[r]);
                h[(m, r)] += lam * lam * t;
            }
        }
        h
    }
}

pub type SecurityGame = WelfareGame<SecurityPayoff>;

pub fn make_security(params: &SecurityParams) -> Result<SecurityGame> {
    if !(0.0..=1.0).contains(&params.q) {
        return Err(ShgError::InvalidParams(format!("cascade probability {} outside [0,1]", params.q)));
    }
    if !(params.c >= 0.0 && params.lambda >= 0.0 && params.lambda.is_finite()) {
        return Err(ShgError::InvalidParams("cost and sharpness must be non-negative".into()));
    }
    if params.shape.len() < 2 {
        return Err(ShgError::InvalidParams("security games need at least two levels".into()));
    }
    let tree = GameTree::balanced(&params.shape, 1, Some(Interval::UNIT))?;
    let n = tree.n_leaves();
    let mut kappa = vec![params.kappa; tree.n_players()];
    kappa[0] = 0.0;
    WelfareGame::new(tree, SecurityPayoff { n, q: params.q, c: params.c, lambda: params.lambda }, kappa)
}
