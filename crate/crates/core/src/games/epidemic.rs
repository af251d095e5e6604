//! Decentralized epidemic policy game.
//!
//! Actions are social-distancing factors in `[0,1]`; counties implement,
//! everyone above recommends. Each player minimizes
//! `κ·C^inc + η·C^dec + (1-κ-η)·(x_i - x_Pa)²` (the root uses
//! `κ·C^inc + (1-κ)·C^dec`), where the infection and implementation costs of
//! a player are population-weighted averages over the counties below it.
//!
//! In the two-level variant the leaves are states, each owning a fixed
//! number of non-strategic counties that copy the state's action.

use nalgebra::{DMatrix, DVector};
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Result, ShgError};
use crate::oracle::UtilityOracle;
use crate::profile::ActionProfile;
use crate::rng::rng_tagged;
use crate::tree::{GameTree, Interval, PlayerId};

const POPULATION_TAG: u64 = 0xe91d;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct County {
    pub population: f64,
    pub infected: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EpidemicParams {
    /// Level sizes, two or three levels, split evenly.
    pub shape: Vec<usize>,
    /// Counties per state in the two-level variant.
    pub counties_per_leaf: usize,
    pub contacts: f64,
    pub infection_prob: f64,
    /// κ per level (index 0 = government).
    pub kappa: Vec<f64>,
    /// η per level; the government entry is ignored.
    pub eta: Vec<f64>,
    /// Population range for randomly drawn counties.
    pub population_range: (f64, f64),
    pub initial_infected_fraction: f64,
    /// Explicit counties, overriding the random draw.
    pub counties: Option<Vec<County>>,
    /// Explicit transport matrix, overriding the uniform `1/#counties`.
    pub transport: Option<Vec<Vec<f64>>>,
}

impl Default for EpidemicParams {
    fn default() -> Self {
        EpidemicParams::two_level(20)
    }
}

impl EpidemicParams {
    pub fn two_level(states: usize) -> Self {
        EpidemicParams {
            shape: vec![1, states],
            counties_per_leaf: 3,
            contacts: 20.0,
            infection_prob: 0.3,
            kappa: vec![0.2, 0.5],
            eta: vec![0.0, 0.2],
            population_range: (1e4, 1e6),
            initial_infected_fraction: 0.01,
            counties: None,
            transport: None,
        }
    }

    pub fn three_level(states: usize, counties: usize) -> Self {
        let eta_county = if counties <= 4 { 0.3 } else { 0.2 };
        EpidemicParams {
            shape: vec![1, states, counties],
            counties_per_leaf: 1,
            kappa: vec![0.8, 0.5, 0.5],
            eta: vec![0.0, 0.2, eta_county],
            ..EpidemicParams::two_level(states)
        }
    }

    /// Defaults for the named shape: `[1, n]` or `[1, s, c]`.
    pub fn for_shape(shape: &[usize]) -> Result<Self> {
        match shape {
            [1, n] => Ok(Self::two_level(*n)),
            [1, s, c] => Ok(Self::three_level(*s, *c)),
            _ => Err(ShgError::InvalidParams(format!("epidemic shape {shape:?} is neither [1,n] nor [1,s,c]"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct EpidemicGame {
    tree: GameTree,
    counties: Vec<County>,
    /// `v[(l, l')]`: coupling of leaf `l`'s infection cost to leaf `l'`'s
    /// action, already multiplied by population, `μM(N-N^init)/N²` and the
    /// transport-weighted initial infections.
    v: DMatrix<f64>,
    /// Total population of the counties of each leaf.
    leaf_pop: Vec<f64>,
    /// Population below each player.
    pop: Vec<f64>,
    kappa: Vec<f64>,
    eta: Vec<f64>,
    members: Vec<Vec<usize>>,
}

impl EpidemicGame {
    pub fn new(params: &EpidemicParams, seed: u64) -> Result<Self> {
        let levels = params.shape.len();
        if !(2..=3).contains(&levels) {
            return Err(ShgError::InvalidParams("epidemic games have two or three levels".into()));
        }
        let per = if levels == 2 { params.counties_per_leaf } else { 1 };
        if per == 0 {
            return Err(ShgError::InvalidParams("each state needs at least one county".into()));
        }
        if !(0.0..=1.0).contains(&params.infection_prob) || params.contacts < 0.0 {
            return Err(ShgError::InvalidParams("infection probability must lie in [0,1] and contacts be >= 0".into()));
        }
        if params.kappa.len() != levels || params.eta.len() != levels {
            return Err(ShgError::InvalidWeights(format!("need {levels} κ and η entries")));
        }
        for (l, (&k, &e)) in params.kappa.iter().zip(&params.eta).enumerate() {
            let e = if l == 0 { 0.0 } else { e };
            if k < 0.0 || e < 0.0 || k + e > 1.0 || (l == 0 && k > 1.0) {
                return Err(ShgError::InvalidWeights(format!("level {}: κ={k}, η={e}", l + 1)));
            }
        }
        let tree = GameTree::balanced(&params.shape, 1, Some(Interval::UNIT))?;
        let n_leaves = tree.n_leaves();
        let n_counties = n_leaves * per;
        let counties = match &params.counties {
            Some(c) => c.clone(),
            None => {
                let (lo, hi) = params.population_range;
                if !(0.0 < lo && lo <= hi) {
                    return Err(ShgError::InvalidParams("population range must be positive and ordered".into()));
                }
                let mut r = rng_tagged(seed, POPULATION_TAG);
                (0..n_counties)
                    .map(|_| {
                        let population = if hi > lo { r.gen_range(lo..hi) } else { lo };
                        County { population, infected: params.initial_infected_fraction * population }
                    })
                    .collect()
            }
        };
        if counties.len() != n_counties {
            return Err(ShgError::InvalidParams(format!("{} counties given, {n_counties} needed", counties.len())));
        }
        if let Some(c) = counties.iter().find(|c| !(c.population > 0.0 && (0.0..=c.population).contains(&c.infected))) {
            return Err(ShgError::InvalidParams(format!("county with population {} and {} infected", c.population, c.infected)));
        }
        let transport = match &params.transport {
            Some(t) => {
                if t.len() != n_counties || t.iter().any(|row| row.len() != n_counties) {
                    return Err(ShgError::InvalidParams(format!("transport matrix must be {n_counties}×{n_counties}")));
                }
                if t.iter().flatten().any(|v| !(*v >= 0.0)) {
                    return Err(ShgError::InvalidParams("transport entries must be non-negative".into()));
                }
                DMatrix::from_fn(n_counties, n_counties, |a, b| t[a][b])
            }
            None => DMatrix::from_element(n_counties, n_counties, 1.0 / n_counties as f64),
        };
        let mu_m = params.infection_prob * params.contacts;
        let leaf_of = |a: usize| a / per;
        let mut v = DMatrix::zeros(n_leaves, n_leaves);
        for (a, ca) in counties.iter().enumerate() {
            let k = mu_m * (ca.population - ca.infected) / (ca.population * ca.population);
            for (b, cb) in counties.iter().enumerate() {
                v[(leaf_of(a), leaf_of(b))] += ca.population * k * transport[(a, b)] * cb.infected;
            }
        }
        let mut leaf_pop = vec![0.0; n_leaves];
        for (a, c) in counties.iter().enumerate() {
            leaf_pop[leaf_of(a)] += c.population;
        }
        let first = tree.first_leaf().0;
        let members: Vec<Vec<usize>> =
            tree.players().map(|i| tree.subtree_leaves(i).iter().map(|l| l.0 - first).collect()).collect();
        let pop = members.iter().map(|m| m.iter().map(|&l| leaf_pop[l]).sum()).collect();
        let kappa = tree.players().map(|i| params.kappa[tree.level(i) - 1]).collect();
        let eta = tree.players().map(|i| if tree.level(i) == 1 { 0.0 } else { params.eta[tree.level(i) - 1] }).collect();
        Ok(EpidemicGame { tree, counties, v, leaf_pop, pop, kappa, eta, members })
    }

    pub fn counties(&self) -> &[County] {
        &self.counties
    }

    fn leaf_actions<'a>(&self, x: &'a ActionProfile) -> &'a [f64] {
        &x.as_slice()[self.tree.leaf_range()]
    }

    /// Population-weighted infection cost of the counties below `i`.
    pub fn infection_cost(&self, i: PlayerId, x: &ActionProfile) -> f64 {
        let y = self.leaf_actions(x);
        let s: f64 = self.members[i.0].iter().map(|&l| y[l] * self.v.row(l).iter().zip(y).map(|(a, b)| a * b).sum::<f64>()).sum();
        s / self.pop[i.0]
    }

    /// Population-weighted `1 - x` over the counties below `i`.
    pub fn implementation_cost(&self, i: PlayerId, x: &ActionProfile) -> f64 {
        let y = self.leaf_actions(x);
        let s: f64 = self.members[i.0].iter().map(|&l| self.leaf_pop[l] * (1.0 - y[l])).sum();
        s / self.pop[i.0]
    }

    pub fn noncompliance_cost(&self, i: PlayerId, x: &ActionProfile) -> f64 {
        match self.tree.parent(i) {
            Some(p) => (x[i][0] - x[p][0]).powi(2),
            None => 0.0,
        }
    }

    /// Weights `(κ, η, ν)` of infection, implementation and non-compliance.
    pub fn weights(&self, i: PlayerId) -> (f64, f64, f64) {
        let k = self.kappa[i.0];
        if self.tree.parent(i).is_none() {
            (k, 1.0 - k, 0.0)
        } else {
            let e = self.eta[i.0];
            (k, e, 1.0 - k - e)
        }
    }

    pub fn cost(&self, i: PlayerId, x: &ActionProfile) -> f64 {
        let (k, e, nc) = self.weights(i);
        k * self.infection_cost(i, x) + e * self.implementation_cost(i, x) + nc * self.noncompliance_cost(i, x)
    }

    fn leaf_pos(&self, j: PlayerId) -> Option<usize> {
        self.tree.is_leaf(j).then(|| j.0 - self.tree.first_leaf().0)
    }

    /// Gradient of the cost over leaf actions, excluding non-compliance.
    fn leaf_cost_grad(&self, i: PlayerId, y: &[f64]) -> DVector<f64> {
        let (k, e, _) = self.weights(i);
        let n = y.len();
        let mut g = DVector::zeros(n);
        for &l in &self.members[i.0] {
            let vy: f64 = self.v.row(l).iter().zip(y).map(|(a, b)| a * b).sum();
            g[l] += k * vy - e * self.leaf_pop[l];
            g.axpy(k * y[l], &self.v.row(l).transpose(), 1.0);
        }
        g / self.pop[i.0]
    }
}

impl UtilityOracle for EpidemicGame {
    fn tree(&self) -> &GameTree {
        &self.tree
    }

    fn value(&self, i: PlayerId, x: &ActionProfile) -> f64 {
        -self.cost(i, x)
    }

    fn grad(&self, i: PlayerId, wrt: PlayerId, x: &ActionProfile) -> DVector<f64> {
        let mut g = 0.0;
        if let Some(m) = self.leaf_pos(wrt) {
            let y = self.leaf_actions(x);
            let (k, e, _) = self.weights(i);
            let mut s = 0.0;
            if self.members[i.0].contains(&m) {
                s += k * (0..y.len()).map(|b| self.v[(m, b)] * y[b]).sum::<f64>() - e * self.leaf_pop[m];
            }
            s += k * self.members[i.0].iter().map(|&l| y[l] * self.v[(l, m)]).sum::<f64>();
            g -= s / self.pop[i.0];
        }
        if let Some(p) = self.tree.parent(i) {
            let d = 2.0 * self.weights(i).2 * (x[i][0] - x[p][0]);
            if wrt == i {
                g -= d;
            }
            if wrt == p {
                g += d;
            }
        }
        DVector::from_element(1, g)
    }

    fn hess(&self, i: PlayerId, a: PlayerId, b: PlayerId, _x: &ActionProfile) -> DMatrix<f64> {
        let mut h = 0.0;
        if let (Some(ma), Some(mb)) = (self.leaf_pos(a), self.leaf_pos(b)) {
            let k = self.weights(i).0;
            let inside = |l: usize| self.members[i.0].contains(&l);
            let mut s = 0.0;
            if inside(ma) {
                s += self.v[(ma, mb)];
            }
            if inside(mb) {
                s += self.v[(mb, ma)];
            }
            h -= k * s / self.pop[i.0];
        }
        if let Some(p) = self.tree.parent(i) {
            let nc = self.weights(i).2;
            let sgn = |v: PlayerId| {
                if v == i {
                    1.0
                } else if v == p {
                    -1.0
                } else {
                    0.0
                }
            };
            h -= 2.0 * nc * sgn(a) * sgn(b);
        }
        DMatrix::from_element(1, 1, h)
    }

    fn leaf_grad(&self, i: PlayerId, x: &ActionProfile) -> DVector<f64> {
        let y = self.leaf_actions(x);
        let mut g = -self.leaf_cost_grad(i, y);
        if let (Some(m), Some(p)) = (self.leaf_pos(i), self.tree.parent(i)) {
            g[m] -= 2.0 * self.weights(i).2 * (x[i][0] - x[p][0]);
        }
        g
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::{fd_grad, fd_hess_values};
    use crate::rng::rng;
    use rand::Rng;

    fn random_profile(g: &EpidemicGame, seed: u64) -> ActionProfile {
        let mut r = rng(seed);
        let v = (0..g.tree().total_dim()).map(|_| r.gen_range(0.0..1.0)).collect();
        ActionProfile::new(g.tree(), v).unwrap()
    }

    fn shapes() -> Vec<EpidemicParams> {
        vec![
            EpidemicParams::two_level(20),
            EpidemicParams::two_level(50),
            EpidemicParams::three_level(2, 4),
            EpidemicParams::three_level(2, 10),
        ]
    }

    #[test]
    fn single_county_infection_cost() {
        let p = EpidemicParams {
            shape: vec![1, 1],
            counties_per_leaf: 1,
            counties: Some(vec![County { population: 100.0, infected: 10.0 }]),
            ..EpidemicParams::two_level(1)
        };
        let g = EpidemicGame::new(&p, 0).unwrap();
        let x = ActionProfile::new(g.tree(), vec![1.0, 1.0]).unwrap();
        // μ·M·x·(N-N0)/N²·(r·N0·x), by hand.
        let want = 0.3 * 20.0 * 1.0 * (90.0 / 10_000.0) * (1.0 * 10.0 * 1.0);
        assert!((g.infection_cost(PlayerId(1), &x) - want).abs() < 1e-15);
        assert!((want - 0.54).abs() < 1e-12);
    }

    #[test]
    fn extreme_actions() {
        for p in shapes() {
            let g = EpidemicGame::new(&p, 7).unwrap();
            let zero = ActionProfile::zeros(g.tree());
            let one = ActionProfile::new(g.tree(), vec![1.0; g.tree().total_dim()]).unwrap();
            for i in g.tree().players() {
                assert_eq!(g.infection_cost(i, &zero), 0.0);
                assert!(g.implementation_cost(i, &one).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn components_are_bounded() {
        for p in shapes() {
            let g = EpidemicGame::new(&p, 1).unwrap();
            for s in 0..50 {
                let x = random_profile(&g, s);
                for i in g.tree().players() {
                    let d = g.implementation_cost(i, &x);
                    let nc = g.noncompliance_cost(i, &x);
                    assert!((0.0..=1.0).contains(&d) && (0.0..=1.0).contains(&nc));
                    assert!(g.infection_cost(i, &x) >= 0.0);
                }
            }
        }
    }

    #[test]
    fn aggregates_are_population_weighted() {
        // Independent recomputation from the county list.
        let p = EpidemicParams::two_level(4);
        let g = EpidemicGame::new(&p, 3).unwrap();
        let x = random_profile(&g, 9);
        let c = g.counties();
        let act = |a: usize| x.as_slice()[1 + a / 3];
        let s: f64 = (0..12).map(|b| c[b].infected * act(b)).sum::<f64>() / 12.0;
        let inc = |a: usize| 6.0 * act(a) * (c[a].population - c[a].infected) / c[a].population.powi(2) * s;
        let n: f64 = c.iter().map(|c| c.population).sum();
        let root = (0..12).map(|a| c[a].population * inc(a)).sum::<f64>() / n;
        assert!((g.infection_cost(PlayerId(0), &x) - root).abs() < 1e-12 * root.max(1.0));
        let n1: f64 = c[..3].iter().map(|c| c.population).sum();
        let s1 = (0..3).map(|a| c[a].population * inc(a)).sum::<f64>() / n1;
        assert!((g.infection_cost(PlayerId(1), &x) - s1).abs() < 1e-12);
    }

    #[test]
    fn analytic_matches_finite_differences() {
        for p in shapes() {
            let g = EpidemicGame::new(&p, 11).unwrap();
            for s in 0..10 {
                let x = random_profile(&g, s);
                for i in g.tree().players() {
                    let lg = g.leaf_grad(i, &x);
                    for a in g.dependency_set(i) {
                        let ga = g.grad(i, a, &x)[0];
                        let gf = fd_grad(&g, i, a, &x)[0];
                        assert!((ga - gf).abs() <= 1e-7 * ga.abs().max(1.0), "{i} {a}: {ga} vs {gf}");
                        if let Some(m) = g.leaf_pos(a) {
                            assert!((lg[m] - ga).abs() < 1e-14);
                        }
                    }
                    let deps = g.dependency_set(i);
                    for &a in deps.iter().take(4) {
                        for &b in deps.iter().rev().take(4) {
                            let ha = g.hess(i, a, b, &x)[(0, 0)];
                            let hf = fd_hess_values(&g, i, a, b, &x)[(0, 0)];
                            assert!((ha - hf).abs() <= 1e-5 * ha.abs().max(1.0), "{i} {a} {b}: {ha} vs {hf}");
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn populations_follow_seed() {
        let p = EpidemicParams::three_level(2, 4);
        let a = EpidemicGame::new(&p, 5).unwrap();
        let b = EpidemicGame::new(&p, 5).unwrap();
        assert_eq!(a.counties(), b.counties());
        assert_ne!(a.counties(), EpidemicGame::new(&p, 6).unwrap().counties());
        for c in a.counties() {
            assert!((1e4..1e6).contains(&c.population));
            assert!((c.infected - 0.01 * c.population).abs() < 1e-9);
        }
    }

    #[test]
    fn invalid_weights() {
        let p = EpidemicParams { kappa: vec![0.2, 0.9], ..EpidemicParams::two_level(4) };
        assert!(matches!(EpidemicGame::new(&p, 0), Err(ShgError::InvalidWeights(_))));
        let p = EpidemicParams { shape: vec![1, 2, 4, 8], ..EpidemicParams::two_level(4) };
        assert!(EpidemicGame::new(&p, 0).is_err());
    }
}
