//! Discretized best-response machinery: grid search with subgame
//! re-equilibration, level-wise best-response dynamics (BRD), global SPE
//! regret, and local SPE regret via restricted DBI runs.
//!
//! Every candidate set in [`search`] contains the player's current action
//! ahead of the grid points, so ties favour the current action and then the
//! lowest grid index, and a player can never "gain" a negative amount.

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::dbi::dbi_solve_from;
use crate::error::{Result, ShgError};
use crate::oracle::UtilityOracle;
use crate::profile::ActionProfile;
use crate::rng::{mix, rng_tagged, Rng};
use crate::trace::SolverConfig;
use crate::tree::{GameTree, Interval, PlayerId};

const EPS_TAG: u64 = 0xe95;
const BRD_TAG: u64 = 0xb6d;

/// Admissible actions per player.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    points: Vec<Vec<Vec<f64>>>,
}

impl Grid {
    /// `n` evenly spaced points per action dimension (the full product for
    /// multi-dimensional actions). Unbounded dimensions use `fallback`.
    pub fn uniform(tree: &GameTree, n: usize, fallback: Interval) -> Result<Self> {
        if n == 0 {
            return Err(ShgError::InvalidConfig("grids need at least one point".into()));
        }
        let points = tree
            .players()
            .map(|i| {
                let axes: Vec<Vec<f64>> = tree
                    .range(i)
                    .map(|k| {
                        let iv = tree.coord_bound(k).unwrap_or(fallback);
                        if n == 1 {
                            vec![0.5 * (iv.lo + iv.hi)]
                        } else {
                            (0..n).map(|s| iv.lo + (iv.hi - iv.lo) * s as f64 / (n - 1) as f64).collect()
                        }
                    })
                    .collect();
                product(&axes)
            })
            .collect();
        Ok(Grid { points })
    }

    /// Grid with spacing `step` (a "discretization factor"): `round(w/step)+1`
    /// points over a dimension of width `w`.
    pub fn with_step(tree: &GameTree, step: f64, fallback: Interval) -> Result<Self> {
        if !(step > 0.0) {
            return Err(ShgError::InvalidConfig(format!("grid step must be positive, got {step}")));
        }
        let width = (0..tree.total_dim()).map(|k| tree.coord_bound(k).unwrap_or(fallback).width()).fold(0.0, f64::max);
        Grid::uniform(tree, (width / step).round() as usize + 1, fallback)
    }

    /// Explicit per-player point lists.
    pub fn from_points(tree: &GameTree, points: Vec<Vec<Vec<f64>>>) -> Result<Self> {
        if points.len() != tree.n_players() {
            return Err(ShgError::InvalidConfig(format!("{} grids for {} players", points.len(), tree.n_players())));
        }
        for (i, p) in tree.players().zip(&points) {
            if p.is_empty() || p.iter().any(|a| a.len() != tree.dim(i)) {
                return Err(ShgError::InvalidConfig(format!("grid of {i} is empty or has the wrong dimension")));
            }
        }
        Ok(Grid { points })
    }

    pub fn points(&self, i: PlayerId) -> &[Vec<f64>] {
        &self.points[i.0]
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.points.iter().map(Vec::len).collect()
    }
}

fn product(axes: &[Vec<f64>]) -> Vec<Vec<f64>> {
    axes.iter().fold(vec![Vec::new()], |acc, axis| {
        acc.iter()
            .flat_map(|prefix| {
                axis.iter().map(move |v| {
                    let mut p = prefix.clone();
                    p.push(*v);
                    p
                })
            })
            .collect()
    })
}

/// `(round, best profile so far, its regret)`.
pub type RoundCallback<'a> = dyn FnMut(usize, &ActionProfile, f64) + 'a;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BrdConfig {
    /// Best-response rounds per subgame solve.
    pub rounds: usize,
    pub seed: u64,
}

impl BrdConfig {
    pub fn new(rounds: usize, seed: u64) -> Self {
        BrdConfig { rounds, seed }
    }

    fn validate(&self) -> Result<()> {
        if self.rounds == 0 {
            return Err(ShgError::InvalidConfig("BRD needs at least one round".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegretReport {
    pub per_player: Vec<f64>,
    /// `max(per_player)`.
    pub epsilon: f64,
    /// Grid size per player (empty for local regret).
    pub grid_sizes: Vec<usize>,
    /// Best-response rounds (global) or DBI iterations (local).
    pub rounds: usize,
    /// Per-player failure, if the evaluation for that player failed.
    pub errors: Vec<Option<String>>,
}

impl RegretReport {
    fn new(per_player: Vec<f64>, grid_sizes: Vec<usize>, rounds: usize, errors: Vec<Option<String>>) -> Self {
        let epsilon = per_player.iter().cloned().fold(0.0, f64::max);
        RegretReport { per_player, epsilon, grid_sizes, rounds, errors }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchResult {
    pub action: Vec<f64>,
    pub payoff: f64,
    /// Profile with the best action and its re-equilibrated subgame.
    pub profile: ActionProfile,
    /// The current action won (no grid point was strictly better).
    pub kept_current: bool,
}

/// How the current action enters a search.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CurrentCandidate {
    /// Evaluated on the profile as given, descendants untouched.
    AsIs,
    /// Evaluated after re-equilibrating its subgame, like the grid points.
    ReEquilibrated,
}

/// Outcome of one subgame solve.
#[derive(Debug, Clone, PartialEq)]
pub struct SolveResult {
    pub profile: ActionProfile,
    /// Minimum round regret, attained by `profile`.
    pub epsilon: f64,
    /// Regret of every round's entering profile.
    pub round_eps: Vec<f64>,
}

struct Engine<'a, O: ?Sized> {
    oracle: &'a O,
    grid: &'a Grid,
    rounds: usize,
    rng: Rng,
}

impl<O: UtilityOracle + ?Sized> Engine<'_, O> {
    fn tree(&self) -> &GameTree {
        self.oracle.tree()
    }

    fn search(&mut self, x: &ActionProfile, i: PlayerId, current: (f64, ActionProfile)) -> SearchResult {
        let (mut best_u, mut best_profile) = current;
        let mut best_action = x[i].to_vec();
        let mut kept = true;
        for a in self.grid.points(i) {
            let xa = x.with_action(i, a);
            let (u, _, prof) = self.re_eq(i, &xa);
            if u > best_u {
                best_u = u;
                best_profile = prof;
                best_action = a.clone();
                kept = false;
            }
        }
        SearchResult { action: best_action, payoff: best_u, profile: best_profile, kept_current: kept }
    }

    fn re_eq(&mut self, i: PlayerId, x: &ActionProfile) -> (f64, f64, ActionProfile) {
        if self.tree().is_leaf(i) {
            return (self.oracle.value(i, x), 0.0, x.clone());
        }
        let children = self.tree().children(i).to_vec();
        let r = self.solve_children(&children, x, None);
        (self.oracle.value(i, &r.profile), r.epsilon, r.profile)
    }

    /// Level-wise best response among `children` (siblings), starting from
    /// `x` with their actions re-randomized on the grid. `on_round` sees the
    /// best profile so far after every round.
    fn solve_children(
        &mut self,
        children: &[PlayerId],
        x: &ActionProfile,
        mut on_round: Option<&mut RoundCallback<'_>>,
    ) -> SolveResult {
        let mut xt = x.clone();
        for &j in children {
            let pts = self.grid.points(j);
            let k = self.rng.gen_range(0..pts.len());
            xt.set(j, &pts[k]).expect("grid point matches the player's dimension");
        }
        let mut best: Option<(f64, ActionProfile)> = None;
        let mut round_eps = Vec::with_capacity(self.rounds);
        for t in 0..self.rounds {
            let mut next = xt.clone();
            // The profile ε_round describes: children as entered, their
            // subgames re-equilibrated.
            let mut evaluated = xt.clone();
            let mut eps_round = 0.0f64;
            for &j in children {
                let (u_re, eps_des, prof_re) = self.re_eq(j, &xt);
                evaluated.copy_players_from(&prof_re, &self.tree().descendants(j));
                let s = self.search(&xt, j, (u_re, prof_re));
                eps_round = eps_round.max(eps_des.max(s.payoff - u_re));
                let sub = self.tree().subtree(j);
                next.copy_players_from(&s.profile, &sub);
            }
            round_eps.push(eps_round);
            if best.as_ref().is_none_or(|(e, _)| eps_round < *e) {
                best = Some((eps_round, evaluated));
            }
            if let (Some(cb), Some((e, p))) = (on_round.as_deref_mut(), best.as_ref()) {
                cb(t, p, *e);
            }
            if eps_round == 0.0 {
                break;
            }
            xt = next;
        }
        let (epsilon, profile) = best.expect("at least one round");
        SolveResult { profile, epsilon, round_eps }
    }
}

fn engine<'a, O: UtilityOracle + ?Sized>(oracle: &'a O, grid: &'a Grid, config: &BrdConfig, tag: u64) -> Engine<'a, O> {
    Engine { oracle, grid, rounds: config.rounds, rng: rng_tagged(config.seed, tag) }
}

fn check_grid(tree: &GameTree, grid: &Grid) -> Result<()> {
    if grid.points.len() != tree.n_players() {
        return Err(ShgError::InvalidConfig(format!("grid covers {} players, game has {}", grid.points.len(), tree.n_players())));
    }
    Ok(())
}

/// Best deviation of `i` at `x`: every grid point (and the current action)
/// is tried with `i`'s subgame re-equilibrated by BRD.
pub fn search<O: UtilityOracle + ?Sized>(
    oracle: &O,
    x: &ActionProfile,
    i: PlayerId,
    grid: &Grid,
    config: &BrdConfig,
    current: CurrentCandidate,
) -> Result<SearchResult> {
    config.validate()?;
    check_grid(oracle.tree(), grid)?;
    oracle.tree().check(i)?;
    let mut e = engine(oracle, grid, config, mix(EPS_TAG, i.0 as u64));
    let cur = match current {
        CurrentCandidate::AsIs => (oracle.value(i, x), x.clone()),
        CurrentCandidate::ReEquilibrated => {
            let (u, _, p) = e.re_eq(i, x);
            (u, p)
        }
    };
    Ok(e.search(x, i, cur))
}

/// `i`'s payoff after re-equilibrating its subgame, the subgame's regret,
/// and the re-equilibrated profile. Leaves return `x` unchanged.
pub fn re_eq<O: UtilityOracle + ?Sized>(
    oracle: &O,
    i: PlayerId,
    x: &ActionProfile,
    grid: &Grid,
    config: &BrdConfig,
) -> Result<(f64, f64, ActionProfile)> {
    config.validate()?;
    check_grid(oracle.tree(), grid)?;
    oracle.tree().check(i)?;
    Ok(engine(oracle, grid, config, mix(EPS_TAG, i.0 as u64)).re_eq(i, x))
}

/// Solves the subgame below the non-leaf `i` by level-wise best response.
pub fn shg_solve<O: UtilityOracle + ?Sized>(
    oracle: &O,
    i: PlayerId,
    x: &ActionProfile,
    grid: &Grid,
    config: &BrdConfig,
) -> Result<SolveResult> {
    config.validate()?;
    check_grid(oracle.tree(), grid)?;
    let tree = oracle.tree();
    tree.check(i)?;
    if tree.is_leaf(i) {
        return Err(ShgError::InvalidConfig(format!("{i} is a leaf and has no subgame")));
    }
    let children = tree.children(i).to_vec();
    Ok(engine(oracle, grid, config, mix(BRD_TAG, i.0 as u64)).solve_children(&children, x, None))
}

/// BRD on the whole game: a virtual super-root whose only child is the root,
/// started from a random grid profile. `on_round(t, best, ε)` is called after
/// each top-level round.
pub fn brd_solve<O: UtilityOracle + ?Sized>(
    oracle: &O,
    grid: &Grid,
    config: &BrdConfig,
    on_round: Option<&mut RoundCallback<'_>>,
) -> Result<SolveResult> {
    config.validate()?;
    let tree = oracle.tree();
    check_grid(tree, grid)?;
    let mut e = engine(oracle, grid, config, BRD_TAG);
    let mut x = ActionProfile::zeros(tree);
    for i in tree.players() {
        let pts = grid.points(i);
        let k = e.rng.gen_range(0..pts.len());
        x.set(i, &pts[k])?;
    }
    let root = PlayerId(0);
    Ok(e.solve_children(&[root], &x, on_round))
}

/// Global SPE regret: the largest gain any player gets from a grid deviation
/// with its subgame re-equilibrated. Each player's evaluation uses its own
/// seeded stream, so the report does not depend on evaluation order.
pub fn compute_eps<O: UtilityOracle + ?Sized>(
    oracle: &O,
    x: &ActionProfile,
    grid: &Grid,
    config: &BrdConfig,
) -> Result<RegretReport> {
    config.validate()?;
    let tree = oracle.tree();
    check_grid(tree, grid)?;
    let per_player: Vec<f64> = tree
        .players()
        .map(|i| {
            let mut e = engine(oracle, grid, config, mix(EPS_TAG, i.0 as u64));
            let u = oracle.value(i, x);
            e.search(x, i, (u, x.clone())).payoff - u
        })
        .collect();
    let n = per_player.len();
    Ok(RegretReport::new(per_player, grid.sizes(), config.rounds, vec![None; n]))
}

/// Local SPE regret: for each player, DBI restarted from `x` with only that
/// player and its descendants moving; the gain is floored at zero.
pub fn local_regret<O: UtilityOracle + ?Sized>(oracle: &O, x: &ActionProfile, config: &SolverConfig) -> Result<RegretReport> {
    config.validate()?;
    let tree = oracle.tree();
    let mut per_player = Vec::with_capacity(tree.n_players());
    let mut errors = Vec::with_capacity(tree.n_players());
    for i in tree.players() {
        let mut active = vec![false; tree.n_players()];
        for j in tree.subtree(i) {
            active[j.0] = true;
        }
        let tr = dbi_solve_from(oracle, x.clone(), config, Some(&active));
        let gain = oracle.value(i, &tr.final_profile) - oracle.value(i, x);
        match &tr.stop {
            crate::trace::StopReason::Diverged(reason) => {
                per_player.push(f64::NAN);
                errors.push(Some(reason.clone()));
            }
            _ => {
                per_player.push(gain.max(0.0));
                errors.push(None);
            }
        }
    }
    let mut r = RegretReport::new(per_player, Vec::new(), config.max_iters, errors);
    r.epsilon = r.per_player.iter().filter(|v| v.is_finite()).cloned().fold(0.0, f64::max);
    Ok(r)
}
