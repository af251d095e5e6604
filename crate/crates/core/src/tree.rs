//! Player hierarchy of a structured hierarchical game.
//!
//! Players are numbered breadth-first: the root is player 0, then every
//! level-2 player, and so on down to the leaves. Every vector and matrix in
//! the crate uses this ordering, and because the leaves form the last level
//! their actions occupy one contiguous tail of the flat action vector.

use std::fmt;
use std::ops::Range;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Result, ShgError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PlayerId(pub usize);

impl PlayerId {
    pub const ROOT: PlayerId = PlayerId(0);

    #[inline]
    pub fn index(self) -> usize {
        self.0
    }
}

impl fmt::Display for PlayerId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Closed interval `[lo, hi]` bounding one action coordinate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub const UNIT: Interval = Interval { lo: 0.0, hi: 1.0 };

    pub fn new(lo: f64, hi: f64) -> Self {
        Interval { lo, hi }
    }

    #[inline]
    pub fn clamp(&self, v: f64) -> f64 {
        v.clamp(self.lo, self.hi)
    }

    #[inline]
    pub fn contains(&self, v: f64) -> bool {
        v >= self.lo && v <= self.hi
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }
}

/// Per-player box constraint, one interval per action dimension.
pub type PlayerBounds = Option<Vec<Interval>>;

#[derive(Debug, Clone, PartialEq)]
pub struct GameTree {
    level_sizes: Vec<usize>,
    level_start: Vec<usize>,
    level_of: Vec<usize>,
    parent: Vec<Option<PlayerId>>,
    children: Vec<Vec<PlayerId>>,
    dims: Vec<usize>,
    offsets: Arc<[usize]>,
    bounds: Vec<PlayerBounds>,
    total_dim: usize,
}

impl GameTree {
    /// Validates and builds a tree.
    ///
    /// `parents[i]` is the parent of player `i` (breadth-first numbering);
    /// it must be `None` for the root and name a player of the level directly
    /// above otherwise. `bounds` may be empty (everything unbounded) or hold
    /// one entry per player.
    pub fn new(
        level_sizes: &[usize],
        parents: &[Option<usize>],
        action_dims: &[usize],
        bounds: Vec<PlayerBounds>,
    ) -> Result<Self> {
        if level_sizes.is_empty() {
            return Err(ShgError::MalformedTree("no levels".into()));
        }
        if let Some(l) = level_sizes.iter().position(|&n| n == 0) {
            return Err(ShgError::EmptyLevel(l + 1));
        }
        if level_sizes[0] != 1 {
            return Err(ShgError::MalformedTree(format!("level 1 must hold exactly one root, found {}", level_sizes[0])));
        }
        let n: usize = level_sizes.iter().sum();
        if parents.len() != n {
            return Err(ShgError::MalformedTree(format!("{} parent entries for {} players", parents.len(), n)));
        }
        if action_dims.len() != n {
            return Err(ShgError::MalformedTree(format!("{} action dimensions for {} players", action_dims.len(), n)));
        }
        if let Some(i) = action_dims.iter().position(|&d| d == 0) {
            return Err(ShgError::MalformedTree(format!("player {i} has zero action dimension")));
        }

        let mut level_start = Vec::with_capacity(level_sizes.len() + 1);
        let mut level_of = Vec::with_capacity(n);
        let mut acc = 0;
        for (l, &size) in level_sizes.iter().enumerate() {
            level_start.push(acc);
            level_of.extend(std::iter::repeat_n(l + 1, size));
            acc += size;
        }
        level_start.push(acc);

        let mut parent = Vec::with_capacity(n);
        let mut children = vec![Vec::new(); n];
        for (i, p) in parents.iter().enumerate() {
            let level = level_of[i];
            match (level, *p) {
                (1, None) => parent.push(None),
                (1, Some(p)) => {
                    return Err(ShgError::MalformedTree(format!("root has a parent ({p})")));
                }
                (_, None) => {
                    return Err(ShgError::MalformedTree(format!("player {i} at level {level} has no parent (a second root)")));
                }
                (_, Some(p)) => {
                    if p >= n || level_of[p] + 1 != level {
                        return Err(ShgError::MalformedTree(format!(
                            "player {i} at level {level} has parent {p} outside level {}",
                            level - 1
                        )));
                    }
                    parent.push(Some(PlayerId(p)));
                    children[p].push(PlayerId(i));
                }
            }
        }
        // Every non-leaf must have a child, otherwise it would be a leaf that
        // does not sit on the last level.
        let last = level_sizes.len();
        for i in 0..n {
            if level_of[i] < last && children[i].is_empty() {
                return Err(ShgError::MalformedTree(format!(
                    "player {i} at level {} has no children but is not on the last level",
                    level_of[i]
                )));
            }
        }

        let bounds = if bounds.is_empty() { vec![None; n] } else { bounds };
        if bounds.len() != n {
            return Err(ShgError::MalformedTree(format!("{} bound entries for {} players", bounds.len(), n)));
        }
        for (i, b) in bounds.iter().enumerate() {
            if let Some(b) = b {
                if b.len() != action_dims[i] {
                    return Err(ShgError::MalformedTree(format!(
                        "player {i}: {} intervals for {} action dimensions",
                        b.len(),
                        action_dims[i]
                    )));
                }
                if b.iter().any(|iv| !(iv.lo <= iv.hi)) {
                    return Err(ShgError::MalformedTree(format!("player {i}: empty bound interval")));
                }
            }
        }

        let mut offsets = Vec::with_capacity(n + 1);
        let mut off = 0;
        for &d in action_dims {
            offsets.push(off);
            off += d;
        }
        offsets.push(off);

        Ok(GameTree {
            level_sizes: level_sizes.to_vec(),
            level_start,
            level_of,
            parent,
            children,
            dims: action_dims.to_vec(),
            offsets: offsets.into(),
            bounds,
            total_dim: off,
        })
    }

    /// Tree where the players of each level are split evenly and contiguously
    /// among the players of the level above. Every player gets `dim` actions
    /// and the same (optional) per-dimension bound.
    pub fn balanced(level_sizes: &[usize], dim: usize, bound: Option<Interval>) -> Result<Self> {
        let mut parents = Vec::new();
        let mut start_prev = 0;
        for (l, &size) in level_sizes.iter().enumerate() {
            if l == 0 {
                parents.extend(std::iter::repeat_n(None, size));
            } else {
                let above = level_sizes[l - 1];
                if above == 0 || size % above != 0 {
                    return Err(ShgError::MalformedTree(format!(
                        "level {} ({size} players) cannot be split evenly under {above} parents",
                        l + 1
                    )));
                }
                let per = size / above;
                for k in 0..size {
                    parents.push(Some(start_prev + k / per));
                }
            }
            if l > 0 {
                start_prev += level_sizes[l - 1];
            }
        }
        let n = parents.len();
        let bounds = match bound {
            Some(b) => vec![Some(vec![b; dim]); n],
            None => Vec::new(),
        };
        GameTree::new(level_sizes, &parents, &vec![dim; n], bounds)
    }

    /// `len`-level chain with one player per level.
    pub fn chain(dims: &[usize]) -> Result<Self> {
        let parents: Vec<Option<usize>> = (0..dims.len()).map(|i| if i == 0 { None } else { Some(i - 1) }).collect();
        GameTree::new(&vec![1; dims.len()], &parents, dims, Vec::new())
    }

    pub fn with_bounds(mut self, bounds: Vec<PlayerBounds>) -> Result<Self> {
        let parents: Vec<Option<usize>> = self.parent.iter().map(|p| p.map(|p| p.0)).collect();
        self = GameTree::new(&self.level_sizes, &parents, &self.dims, bounds)?;
        Ok(self)
    }

    pub fn n_players(&self) -> usize {
        self.level_of.len()
    }

    /// Number of levels `L`.
    pub fn n_levels(&self) -> usize {
        self.level_sizes.len()
    }

    pub fn level_sizes(&self) -> &[usize] {
        &self.level_sizes
    }

    /// Level of `i`, counted from 1 at the root.
    pub fn level(&self, i: PlayerId) -> usize {
        self.level_of[i.0]
    }

    pub fn players(&self) -> impl DoubleEndedIterator<Item = PlayerId> + ExactSizeIterator {
        (0..self.n_players()).map(PlayerId)
    }

    /// Players of level `l` (1-based).
    pub fn level_players(&self, l: usize) -> impl DoubleEndedIterator<Item = PlayerId> + ExactSizeIterator {
        (self.level_start[l - 1]..self.level_start[l]).map(PlayerId)
    }

    pub fn contains(&self, i: PlayerId) -> bool {
        i.0 < self.n_players()
    }

    pub fn check(&self, i: PlayerId) -> Result<()> {
        if self.contains(i) {
            Ok(())
        } else {
            Err(ShgError::UnknownPlayer(i))
        }
    }

    pub fn parent(&self, i: PlayerId) -> Option<PlayerId> {
        self.parent[i.0]
    }

    pub fn children(&self, i: PlayerId) -> &[PlayerId] {
        &self.children[i.0]
    }

    pub fn is_leaf(&self, i: PlayerId) -> bool {
        self.level_of[i.0] == self.n_levels()
    }

    pub fn leaves(&self) -> impl DoubleEndedIterator<Item = PlayerId> + ExactSizeIterator {
        self.level_players(self.n_levels())
    }

    pub fn n_leaves(&self) -> usize {
        *self.level_sizes.last().unwrap()
    }

    /// Index of the first leaf player.
    pub fn first_leaf(&self) -> PlayerId {
        PlayerId(self.level_start[self.n_levels() - 1])
    }

    pub fn dim(&self, i: PlayerId) -> usize {
        self.dims[i.0]
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    /// Range of `i`'s coordinates inside the flat action vector.
    pub fn range(&self, i: PlayerId) -> Range<usize> {
        self.offsets[i.0]..self.offsets[i.0 + 1]
    }

    pub(crate) fn layout(&self) -> Arc<[usize]> {
        Arc::clone(&self.offsets)
    }

    pub fn total_dim(&self) -> usize {
        self.total_dim
    }

    /// Flat range holding all leaf actions.
    pub fn leaf_range(&self) -> Range<usize> {
        self.offsets[self.first_leaf().0]..self.total_dim
    }

    pub fn leaf_dim(&self) -> usize {
        self.leaf_range().len()
    }

    /// Offset of leaf `j`'s block inside the leaf sub-vector.
    pub fn leaf_local_range(&self, j: PlayerId) -> Range<usize> {
        let base = self.leaf_range().start;
        let r = self.range(j);
        r.start - base..r.end - base
    }

    pub fn bounds(&self, i: PlayerId) -> Option<&[Interval]> {
        self.bounds[i.0].as_deref()
    }

    pub fn all_bounds(&self) -> &[PlayerBounds] {
        &self.bounds
    }

    /// Interval of flat coordinate `k`, if bounded.
    pub fn coord_bound(&self, k: usize) -> Option<Interval> {
        let i = self.owner_of_coord(k);
        self.bounds[i.0].as_ref().map(|b| b[k - self.offsets[i.0]])
    }

    pub fn owner_of_coord(&self, k: usize) -> PlayerId {
        // offsets is sorted; partition_point gives the first offset > k.
        PlayerId(self.offsets.partition_point(|&o| o <= k) - 1)
    }

    /// Strict descendants of `i` in pre-order.
    pub fn descendants(&self, i: PlayerId) -> Vec<PlayerId> {
        let mut out = Vec::new();
        let mut stack: Vec<PlayerId> = self.children(i).iter().rev().copied().collect();
        while let Some(j) = stack.pop() {
            out.push(j);
            stack.extend(self.children(j).iter().rev().copied());
        }
        out
    }

    /// `i` followed by its strict descendants.
    pub fn subtree(&self, i: PlayerId) -> Vec<PlayerId> {
        let mut v = vec![i];
        v.extend(self.descendants(i));
        v
    }

    /// Leaves of `i`'s subtree (just `i` for a leaf).
    pub fn subtree_leaves(&self, i: PlayerId) -> Vec<PlayerId> {
        self.subtree(i).into_iter().filter(|&j| self.is_leaf(j)).collect()
    }

    pub fn is_ancestor(&self, a: PlayerId, mut j: PlayerId) -> bool {
        while let Some(p) = self.parent(j) {
            if p == a {
                return true;
            }
            j = p;
        }
        false
    }

    /// Parent ids as plain indices, in the layout used by game definition files.
    pub fn parent_indices(&self) -> Vec<Option<usize>> {
        self.parent.iter().map(|p| p.map(|p| p.0)).collect()
    }
}

/// Convenience wrapper matching the `build_tree` operation.
pub fn build_tree(
    level_sizes: &[usize],
    parents: &[Option<usize>],
    action_dims: &[usize],
    bounds: Vec<PlayerBounds>,
) -> Result<GameTree> {
    GameTree::new(level_sizes, parents, action_dims, bounds)
}
