//! Sparse multivariate polynomials over the flat action vector, and games
//! whose utilities are such polynomials.

use std::collections::{BTreeMap, BTreeSet};
use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Result, ShgError};
use crate::oracle::UtilityOracle;
use crate::profile::ActionProfile;
use crate::tree::{GameTree, PlayerId};

/// `coef · Π x_v^p` with variables strictly increasing and powers ≥ 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Term {
    pub coef: f64,
    pub vars: Vec<(usize, u32)>,
}

impl Term {
    fn eval(&self, x: &[f64]) -> f64 {
        self.vars.iter().fold(self.coef, |acc, &(v, p)| acc * x[v].powi(p as i32))
    }

    /// Product over all factors except position `skip`.
    fn rest(&self, x: &[f64], skip: usize) -> f64 {
        self.vars.iter().enumerate().filter(|&(k, _)| k != skip).fold(self.coef, |acc, (_, &(v, p))| acc * x[v].powi(p as i32))
    }

    fn rest2(&self, x: &[f64], s1: usize, s2: usize) -> f64 {
        self.vars
            .iter()
            .enumerate()
            .filter(|&(k, _)| k != s1 && k != s2)
            .fold(self.coef, |acc, (_, &(v, p))| acc * x[v].powi(p as i32))
    }

    pub fn degree(&self) -> u32 {
        self.vars.iter().map(|&(_, p)| p).sum()
    }
}

/// Canonical form: terms sorted by monomial, like monomials merged, no zero
/// coefficients.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Polynomial {
    terms: Vec<Term>,
}

impl Polynomial {
    pub fn zero() -> Self {
        Polynomial::default()
    }

    pub fn constant(c: f64) -> Self {
        Polynomial::monomial(c, &[])
    }

    pub fn var(v: usize) -> Self {
        Polynomial::monomial(1.0, &[(v, 1)])
    }

    pub fn monomial(coef: f64, vars: &[(usize, u32)]) -> Self {
        Polynomial::from_terms([Term { coef, vars: vars.to_vec() }])
    }

    /// Sum of the given terms; factors may repeat or come in any order.
    pub fn from_terms(terms: impl IntoIterator<Item = Term>) -> Self {
        let mut acc: BTreeMap<Vec<(usize, u32)>, f64> = BTreeMap::new();
        for t in terms {
            let mut powers: BTreeMap<usize, u32> = BTreeMap::new();
            for (v, p) in t.vars {
                *powers.entry(v).or_default() += p;
            }
            let key: Vec<(usize, u32)> = powers.into_iter().filter(|&(_, p)| p > 0).collect();
            *acc.entry(key).or_default() += t.coef;
        }
        let terms = acc.into_iter().filter(|(_, c)| *c != 0.0).map(|(vars, coef)| Term { coef, vars }).collect();
        Polynomial { terms }
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    pub fn variables(&self) -> BTreeSet<usize> {
        self.terms.iter().flat_map(|t| t.vars.iter().map(|&(v, _)| v)).collect()
    }

    pub fn degree(&self) -> u32 {
        self.terms.iter().map(Term::degree).max().unwrap_or(0)
    }

    pub fn pow(&self, n: u32) -> Self {
        (0..n).fold(Polynomial::constant(1.0), |acc, _| acc * self.clone())
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.terms.iter().map(|t| t.eval(x)).sum()
    }

    pub fn partial(&self, x: &[f64], a: usize) -> f64 {
        let mut s = 0.0;
        for t in &self.terms {
            if let Some(k) = t.vars.iter().position(|&(v, _)| v == a) {
                let p = t.vars[k].1;
                s += t.rest(x, k) * p as f64 * x[a].powi(p as i32 - 1);
            }
        }
        s
    }

    pub fn second(&self, x: &[f64], a: usize, b: usize) -> f64 {
        let mut s = 0.0;
        for t in &self.terms {
            let Some(ka) = t.vars.iter().position(|&(v, _)| v == a) else { continue };
            let pa = t.vars[ka].1;
            if a == b {
                if pa >= 2 {
                    s += t.rest(x, ka) * (pa * (pa - 1)) as f64 * x[a].powi(pa as i32 - 2);
                }
            } else if let Some(kb) = t.vars.iter().position(|&(v, _)| v == b) {
                let pb = t.vars[kb].1;
                s += t.rest2(x, ka, kb) * (pa * pb) as f64 * x[a].powi(pa as i32 - 1) * x[b].powi(pb as i32 - 1);
            }
        }
        s
    }

    /// Gradient restricted to the contiguous coordinates `r`.
    pub fn grad_block(&self, x: &[f64], r: std::ops::Range<usize>) -> DVector<f64> {
        let mut g = DVector::zeros(r.len());
        for t in &self.terms {
            for (k, &(v, p)) in t.vars.iter().enumerate() {
                if r.contains(&v) {
                    g[v - r.start] += t.rest(x, k) * p as f64 * x[v].powi(p as i32 - 1);
                }
            }
        }
        g
    }

    /// Hessian block over coordinates `ra × rb`.
    pub fn hess_block(&self, x: &[f64], ra: std::ops::Range<usize>, rb: std::ops::Range<usize>) -> DMatrix<f64> {
        let mut h = DMatrix::zeros(ra.len(), rb.len());
        for t in &self.terms {
            for (ka, &(va, pa)) in t.vars.iter().enumerate() {
                if !ra.contains(&va) {
                    continue;
                }
                for (kb, &(vb, pb)) in t.vars.iter().enumerate() {
                    if !rb.contains(&vb) {
                        continue;
                    }
                    let d = if ka == kb {
                        if pa < 2 {
                            continue;
                        }
                        t.rest(x, ka) * (pa * (pa - 1)) as f64 * x[va].powi(pa as i32 - 2)
                    } else {
                        t.rest2(x, ka, kb) * (pa * pb) as f64 * x[va].powi(pa as i32 - 1) * x[vb].powi(pb as i32 - 1)
                    };
                    h[(va - ra.start, vb - rb.start)] += d;
                }
            }
        }
        h
    }
}

impl Add for Polynomial {
    type Output = Polynomial;
    fn add(self, rhs: Polynomial) -> Polynomial {
        Polynomial::from_terms(self.terms.into_iter().chain(rhs.terms))
    }
}

impl Sub for Polynomial {
    type Output = Polynomial;
    fn sub(self, rhs: Polynomial) -> Polynomial {
        self + (-rhs)
    }
}

impl Neg for Polynomial {
    type Output = Polynomial;
    fn neg(self) -> Polynomial {
        self * -1.0
    }
}

impl Mul<f64> for Polynomial {
    type Output = Polynomial;
    fn mul(self, c: f64) -> Polynomial {
        Polynomial::from_terms(self.terms.into_iter().map(|t| Term { coef: t.coef * c, vars: t.vars }))
    }
}

impl Mul<Polynomial> for f64 {
    type Output = Polynomial;
    fn mul(self, p: Polynomial) -> Polynomial {
        p * self
    }
}

impl Mul for Polynomial {
    type Output = Polynomial;
    fn mul(self, rhs: Polynomial) -> Polynomial {
        let mut out = Vec::with_capacity(self.terms.len() * rhs.terms.len());
        for a in &self.terms {
            for b in &rhs.terms {
                let mut vars = a.vars.clone();
                vars.extend_from_slice(&b.vars);
                out.push(Term { coef: a.coef * b.coef, vars });
            }
        }
        Polynomial::from_terms(out)
    }
}

/// Game with one polynomial utility per player.
#[derive(Debug, Clone)]
pub struct PolynomialGame {
    tree: GameTree,
    utilities: Vec<Polynomial>,
    deps: Vec<Vec<PlayerId>>,
}

impl PolynomialGame {
    /// Rejects utilities that read a coordinate owned by a player outside
    /// `{i, Pa(i)} ∪ leaves`.
    pub fn new(tree: GameTree, utilities: Vec<Polynomial>) -> Result<Self> {
        if utilities.len() != tree.n_players() {
            return Err(ShgError::DimensionMismatch { expected: tree.n_players(), actual: utilities.len() });
        }
        let mut deps = Vec::with_capacity(utilities.len());
        for (i, u) in utilities.iter().enumerate() {
            let i = PlayerId(i);
            let mut owners = BTreeSet::from([i]);
            for v in u.variables() {
                if v >= tree.total_dim() {
                    return Err(ShgError::GameSpec(format!("utility of {i} uses coordinate {v} beyond the profile")));
                }
                let k = tree.owner_of_coord(v);
                if k != i && Some(k) != tree.parent(i) && !tree.is_leaf(k) {
                    return Err(ShgError::DependencyViolation { player: i, other: k });
                }
                owners.insert(k);
            }
            deps.push(owners.into_iter().collect());
        }
        Ok(PolynomialGame { tree, utilities, deps })
    }

    pub fn utility(&self, i: PlayerId) -> &Polynomial {
        &self.utilities[i.0]
    }

    /// The (1,1,1) game with 1-d actions `(x, y, z)`.
    pub fn p111() -> Self {
        let (x, y, z) = (Polynomial::var(0), Polynomial::var(1), Polynomial::var(2));
        let u1 = -7.0 * x.pow(2) + 9.0 * x.clone() * z.clone() + x.clone() - z.clone();
        let u2 = -2.0 * y.pow(2) - 4.0 * y.clone() * z.clone() - 10.0 * x.pow(2) + 2.0 * x.clone() * z.clone() - 3.0 * z.pow(2)
            + 4.0 * y.clone()
            + 7.0 * x.clone()
            - 8.0 * z.clone()
            - 8.0 * x.clone() * y.clone() * z.clone();
        let u3 = -10.0 * z.pow(2) - 9.0 * y.clone() * z.clone() + 9.0 * y.pow(2) - 5.0 * z - 2.0 * y;
        let tree = GameTree::chain(&[1, 1, 1]).expect("static shape");
        PolynomialGame::new(tree, vec![u1, u2, u3]).expect("static game")
    }

    /// The (1,1,2) game; players are `(x, w, y, z)` in breadth-first order.
    pub fn p112() -> Self {
        let (x, w, y, z) = (Polynomial::var(0), Polynomial::var(1), Polynomial::var(2), Polynomial::var(3));
        let m = |c: f64, f: &[&Polynomial]| f.iter().fold(Polynomial::constant(c), |acc, p| acc * (*p).clone());
        let u1 = m(-2.0, &[&x, &x])
            + m(-3.0, &[&x, &y])
            + m(1.0, &[&y, &y])
            + m(5.0, &[&x])
            + m(7.0, &[&y])
            + m(3.0, &[&x, &z])
            + m(-10.0, &[&y, &z])
            + m(5.0, &[&x, &y, &z])
            + m(-6.0, &[&z]);
        let u2 = m(2.0, &[&w, &w])
            + m(-1.0, &[&w, &x])
            + m(-3.0, &[&w, &y])
            + m(-5.0, &[&x, &x])
            + m(9.0, &[&x, &y])
            + m(2.0, &[&y, &y])
            + m(3.0, &[&w])
            + m(5.0, &[&x])
            + m(-4.0, &[&y])
            + m(5.0, &[&z, &z])
            + m(8.0, &[&w, &z])
            + m(7.0, &[&x, &z])
            + m(-9.0, &[&y, &z])
            + m(-10.0, &[&z]);
        let u3 = m(-5.0, &[&y, &y])
            + m(-8.0, &[&y, &z])
            + m(1.0, &[&z, &z])
            + m(8.0, &[&y])
            + m(-9.0, &[&z])
            + m(-2.0, &[&w, &y])
            + m(-4.0, &[&w, &z])
            + m(-1.0, &[&w, &w])
            + m(-8.0, &[&w, &y, &z])
            + m(-2.0, &[&w]);
        let u4 = m(-10.0, &[&z, &z])
            + m(-2.0, &[&y, &z])
            + m(5.0, &[&y, &y])
            + m(-7.0, &[&z])
            + m(-6.0, &[&y])
            + m(-3.0, &[&w, &z])
            + m(-8.0, &[&w, &y])
            + m(-10.0, &[&w, &y, &z])
            + m(5.0, &[&w]);
        let tree = GameTree::balanced(&[1, 1, 2], 1, None).expect("static shape");
        PolynomialGame::new(tree, vec![u1, u2, u3, u4]).expect("static game")
    }

    /// The (1,1,1) game with 3-d actions; utilities depend on each player's
    /// coordinates through their sums and sums of squares.
    pub fn p111_3d() -> Self {
        let sum = |p: usize| (0..3).map(|k| Polynomial::var(3 * p + k)).fold(Polynomial::zero(), |a, b| a + b);
        let sq = |p: usize| (0..3).map(|k| Polynomial::var(3 * p + k).pow(2)).fold(Polynomial::zero(), |a, b| a + b);
        let (sx, sy, sz) = (sum(0), sum(1), sum(2));
        let (qx, qy, qz) = (sq(0), sq(1), sq(2));
        let u1 = -7.0 * qx.clone() + 9.0 * sx.clone() * sz.clone() + sx.clone() - sz.clone();
        let u2 = -2.0 * qy.clone() - 4.0 * sy.clone() * sz.clone() - 10.0 * sx.clone() * sz.clone() + 2.0 * qx - 3.0 * qz.clone()
            + 4.0 * sx.clone() * sy.clone() * sz.clone()
            + 7.0 * sx
            - 8.0 * sy.clone()
            - 8.0 * sz.clone();
        let u3 = -10.0 * qz - 9.0 * sy.clone() * sz.clone() + 9.0 * qy - 5.0 * sy - 2.0 * sz;
        let tree = GameTree::chain(&[3, 3, 3]).expect("static shape");
        PolynomialGame::new(tree, vec![u1, u2, u3]).expect("static game")
    }

    /// Random game on a tree of 1-d players: each utility is a full
    /// polynomial of total degree ≤ `degree` in the actions of its
    /// dependency set. Coefficients are integers uniform in `[−c, c]`, or
    /// uniform reals in `[−1, 1]` when `c` is `None`.
    pub fn random<R: Rng + ?Sized>(shape: &[usize], degree: u32, c: Option<i64>, rng: &mut R) -> Result<Self> {
        let tree = GameTree::balanced(shape, 1, None)?;
        let mut utilities = Vec::with_capacity(tree.n_players());
        for i in tree.players() {
            let vars: Vec<usize> = crate::oracle::structural_dependencies(&tree, i).iter().map(|p| p.0).collect();
            let terms = exponent_vectors(vars.len(), degree).into_iter().map(|exps| {
                let coef = match c {
                    Some(c) => rng.gen_range(-c..=c) as f64,
                    None => rng.gen_range(-1.0..=1.0),
                };
                Term { coef, vars: vars.iter().zip(exps).filter(|(_, e)| *e > 0).map(|(&v, e)| (v, e)).collect() }
            });
            utilities.push(Polynomial::from_terms(terms.collect::<Vec<_>>()));
        }
        PolynomialGame::new(tree, utilities)
    }
}

/// All exponent vectors of length `k` with sum ≤ `degree`, in graded
/// lexicographic order.
pub fn exponent_vectors(k: usize, degree: u32) -> Vec<Vec<u32>> {
    fn rec(k: usize, left: u32, cur: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for e in 0..=left {
            cur.push(e);
            rec(k, left - e, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(k, degree, &mut Vec::with_capacity(k), &mut out);
    out.sort_by_key(|e| e.iter().sum::<u32>());
    out
}

impl UtilityOracle for PolynomialGame {
    fn tree(&self) -> &GameTree {
        &self.tree
    }

    fn value(&self, i: PlayerId, x: &ActionProfile) -> f64 {
        self.utilities[i.0].eval(x.as_slice())
    }

    fn dependency_set(&self, i: PlayerId) -> Vec<PlayerId> {
        self.deps[i.0].clone()
    }

    fn grad(&self, i: PlayerId, wrt: PlayerId, x: &ActionProfile) -> DVector<f64> {
        self.utilities[i.0].grad_block(x.as_slice(), self.tree.range(wrt))
    }

    fn hess(&self, i: PlayerId, a: PlayerId, b: PlayerId, x: &ActionProfile) -> DMatrix<f64> {
        self.utilities[i.0].hess_block(x.as_slice(), self.tree.range(a), self.tree.range(b))
    }

    fn leaf_grad(&self, i: PlayerId, x: &ActionProfile) -> DVector<f64> {
        self.utilities[i.0].grad_block(x.as_slice(), self.tree.leaf_range())
    }
}
