//! Hierarchical networked public goods game.
//!
//! Leaf payoff `u_k = a_k + b_k y_k + Σ_j g_jk y_k y_j - cost_k(y_k)` on an
//! undirected network, wrapped in the welfare hierarchy of [`super::welfare`]
//! with the network's groups as the middle level.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::welfare::{LeafPayoff, WelfareGame};
use crate::error::{Result, ShgError};
use crate::tree::{GameTree, Interval};

pub const KARATE_EDGES: &str = include_str!("../../data/karate.edges");
pub const KARATE_PARTITION: &str = include_str!("../../data/karate.partition");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum CostForm {
    /// `(c/2)·y²`.
    #[default]
    Quadratic,
    /// `c·y`.
    Linear,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PublicGoodsParams {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub cost: CostForm,
    /// Non-compliance weight of the group players.
    pub kappa_group: f64,
    /// Non-compliance weight of the individuals.
    pub kappa_leaf: f64,
}

impl Default for PublicGoodsParams {
    fn default() -> Self {
        PublicGoodsParams { a: 0.0, b: 1.0, c: 6.0, cost: CostForm::Quadratic, kappa_group: 0.5, kappa_leaf: 0.5 }
    }
}

#[derive(Debug, Clone)]
pub struct NetworkPayoff {
    /// Symmetric adjacency.
    pub adjacency: DMatrix<f64>,
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub cost: CostForm,
}

impl NetworkPayoff {
    fn cost_d1(&self, y: f64) -> f64 {
        match self.cost {
            CostForm::Quadratic => self.c * y,
            CostForm::Linear => self.c,
        }
    }

    fn cost_d2(&self) -> f64 {
        match self.cost {
            CostForm::Quadratic => self.c,
            CostForm::Linear => 0.0,
        }
    }

    fn spill(&self, k: usize, y: &[f64]) -> f64 {
        self.adjacency.column(k).iter().zip(y).map(|(g, v)| g * v).sum()
    }
}

impl LeafPayoff for NetworkPayoff {
    fn n(&self) -> usize {
        self.adjacency.nrows()
    }

    fn value(&self, k: usize, y: &[f64]) -> f64 {
        let yk = y[k];
        let cost = match self.cost {
            CostForm::Quadratic => 0.5 * self.c * yk * yk,
            CostForm::Linear => self.c * yk,
        };
        self.a + self.b * yk + yk * self.spill(k, y) - cost
    }

    fn grad(&self, k: usize, y: &[f64]) -> DVector<f64> {
        let mut g = self.adjacency.column(k) * y[k];
        g[k] = self.b + self.spill(k, y) - self.cost_d1(y[k]);
        g
    }

    fn hess(&self, k: usize, _y: &[f64]) -> DMatrix<f64> {
        let n = self.n();
        let mut h = DMatrix::zeros(n, n);
        for m in 0..n {
            let g = self.adjacency[(m, k)];
            h[(k, m)] += g;
            h[(m, k)] += g;
        }
        h[(k, k)] = -self.cost_d2();
        h
    }
}

pub type PublicGoodsGame = WelfareGame<NetworkPayoff>;

fn data_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines().enumerate().map(|(n, l)| (n + 1, l.split('#').next().unwrap_or("").trim())).filter(|(_, l)| !l.is_empty())
}

/// Parses a 1-indexed undirected `u v` edge list into an `n × n` adjacency.
/// Node count is the largest index mentioned.
pub fn parse_edge_list(text: &str) -> Result<DMatrix<f64>> {
    let mut edges = Vec::new();
    for (line, l) in data_lines(text) {
        let parts: Vec<&str> = l.split_whitespace().collect();
        let parse = |s: &str| {
            s.parse::<usize>()
                .ok()
                .filter(|&v| v >= 1)
                .ok_or_else(|| ShgError::BadNetworkFile(format!("line {line}: '{s}' is not a positive node index")))
        };
        if parts.len() != 2 {
            return Err(ShgError::BadNetworkFile(format!("line {line}: expected two node indices")));
        }
        let (u, v) = (parse(parts[0])?, parse(parts[1])?);
        if u == v {
            return Err(ShgError::BadNetworkFile(format!("line {line}: self-loop on {u}")));
        }
        edges.push((u - 1, v - 1));
    }
    let n = edges.iter().map(|&(u, v)| u.max(v) + 1).max().ok_or_else(|| ShgError::BadNetworkFile("no edges".into()))?;
    let mut g = DMatrix::zeros(n, n);
    for (u, v) in edges {
        g[(u, v)] = 1.0;
        g[(v, u)] = 1.0;
    }
    Ok(g)
}

/// Parses `node group` lines (both 1-indexed) into a 0-indexed group per
/// node. Every node `1..=n` must appear exactly once and groups must be
/// numbered `1..=k` without gaps.
pub fn parse_partition(text: &str, n: usize) -> Result<Vec<usize>> {
    let mut group = vec![None; n];
    for (line, l) in data_lines(text) {
        let parts: Vec<usize> = l
            .split_whitespace()
            .map(|s| s.parse::<usize>().map_err(|_| ShgError::BadPartition(format!("line {line}: '{s}' is not an index"))))
            .collect::<Result<_>>()?;
        let [node, g] = parts[..] else {
            return Err(ShgError::BadPartition(format!("line {line}: expected 'node group'")));
        };
        if node == 0 || node > n || g == 0 {
            return Err(ShgError::BadPartition(format!("line {line}: indices are 1-based and nodes at most {n}")));
        }
        if group[node - 1].replace(g - 1).is_some() {
            return Err(ShgError::BadPartition(format!("node {node} assigned twice")));
        }
    }
    let group: Vec<usize> = group
        .into_iter()
        .enumerate()
        .map(|(k, g)| g.ok_or_else(|| ShgError::BadPartition(format!("node {} has no group", k + 1))))
        .collect::<Result<_>>()?;
    let k = group.iter().max().map_or(0, |m| m + 1);
    if (0..k).any(|g| !group.contains(&g)) {
        return Err(ShgError::BadPartition("group numbers must be contiguous from 1".into()));
    }
    Ok(group)
}

/// Three-level game: root, one player per group, one leaf per network node
/// (leaf order = node order). Actions in `[0,1]`.
pub fn make_public_goods(adjacency: DMatrix<f64>, partition: &[usize], params: &PublicGoodsParams) -> Result<PublicGoodsGame> {
    let n = adjacency.nrows();
    if adjacency.ncols() != n || adjacency != adjacency.transpose() {
        return Err(ShgError::BadNetworkFile("adjacency must be square and symmetric".into()));
    }
    if partition.len() != n {
        return Err(ShgError::BadPartition(format!("{} group labels for {n} nodes", partition.len())));
    }
    let groups = partition.iter().max().map_or(0, |m| m + 1);
    let mut parents = vec![None];
    parents.extend(std::iter::repeat_n(Some(0), groups));
    parents.extend(partition.iter().map(|g| Some(1 + g)));
    let total = 1 + groups + n;
    let bounds = vec![Some(vec![Interval::UNIT]); total];
    let tree =
        GameTree::new(&[1, groups, n], &parents, &vec![1; total], bounds).map_err(|e| ShgError::BadPartition(e.to_string()))?;
    let mut kappa = vec![0.0];
    kappa.extend(std::iter::repeat_n(params.kappa_group, groups));
    kappa.extend(std::iter::repeat_n(params.kappa_leaf, n));
    let payoff = NetworkPayoff { adjacency, a: params.a, b: params.b, c: params.c, cost: params.cost };
    WelfareGame::new(tree, payoff, kappa)
}

pub fn make_public_goods_files(network: &Path, partition: &Path, params: &PublicGoodsParams) -> Result<PublicGoodsGame> {
    let read =
        |p: &Path, bad: fn(String) -> ShgError| std::fs::read_to_string(p).map_err(|e| bad(format!("{}: {e}", p.display())));
    let g = parse_edge_list(&read(network, ShgError::BadNetworkFile)?)?;
    let part = parse_partition(&read(partition, ShgError::BadPartition)?, g.nrows())?;
    make_public_goods(g, &part, params)
}

/// The bundled karate-club instance.
pub fn karate(params: &PublicGoodsParams) -> Result<PublicGoodsGame> {
    let g = parse_edge_list(KARATE_EDGES)?;
    let part = parse_partition(KARATE_PARTITION, g.nrows())?;
    make_public_goods(g, &part, params)
}
