use std::ops::{Index, IndexMut};
use std::sync::Arc;

use nalgebra::DVector;

use crate::error::{Result, ShgError};
use crate::tree::{GameTree, PlayerId};

/// Joint action vector with per-player slices.
///
/// The layout (player offsets) is shared with the tree that created it, so
/// cloning a profile copies only the flat vector.
#[derive(Debug, Clone, PartialEq)]
pub struct ActionProfile {
    flat: Vec<f64>,
    offsets: Arc<[usize]>,
}

impl ActionProfile {
    pub fn new(tree: &GameTree, flat: Vec<f64>) -> Result<Self> {
        if flat.len() != tree.total_dim() {
            return Err(ShgError::DimensionMismatch { expected: tree.total_dim(), actual: flat.len() });
        }
        Ok(ActionProfile { flat, offsets: tree.layout() })
    }

    pub fn zeros(tree: &GameTree) -> Self {
        ActionProfile { flat: vec![0.0; tree.total_dim()], offsets: tree.layout() }
    }

    /// Builds a profile from one action vector per player.
    pub fn from_players(tree: &GameTree, actions: &[Vec<f64>]) -> Result<Self> {
        if actions.len() != tree.n_players() {
            return Err(ShgError::DimensionMismatch { expected: tree.n_players(), actual: actions.len() });
        }
        let mut p = ActionProfile::zeros(tree);
        for (i, a) in actions.iter().enumerate() {
            p.set(PlayerId(i), a)?;
        }
        Ok(p)
    }

    pub fn n_players(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn len(&self) -> usize {
        self.flat.len()
    }

    pub fn is_empty(&self) -> bool {
        self.flat.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.flat
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.flat
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.flat
    }

    pub fn to_dvector(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.flat)
    }

    /// The `d_i` coordinates of player `i`.
    pub fn slice(&self, i: PlayerId) -> Result<&[f64]> {
        if i.0 >= self.n_players() {
            return Err(ShgError::UnknownPlayer(i));
        }
        Ok(&self[i])
    }

    pub fn slice_mut(&mut self, i: PlayerId) -> Result<&mut [f64]> {
        if i.0 >= self.n_players() {
            return Err(ShgError::UnknownPlayer(i));
        }
        Ok(&mut self[i])
    }

    pub fn set(&mut self, i: PlayerId, v: &[f64]) -> Result<()> {
        let s = self.slice_mut(i)?;
        if s.len() != v.len() {
            return Err(ShgError::DimensionMismatch { expected: s.len(), actual: v.len() });
        }
        s.copy_from_slice(v);
        Ok(())
    }

    /// Copy of `self` with player `i`'s action replaced.
    pub fn with_action(&self, i: PlayerId, v: &[f64]) -> Self {
        let mut p = self.clone();
        p[i].copy_from_slice(v);
        p
    }

    /// Copies the actions of `players` from `other` into `self`.
    pub fn copy_players_from(&mut self, other: &ActionProfile, players: &[PlayerId]) {
        for &j in players {
            let (a, b) = (self.offsets[j.0], self.offsets[j.0 + 1]);
            self.flat[a..b].copy_from_slice(&other.flat[a..b]);
        }
    }

    pub fn is_finite(&self) -> bool {
        self.flat.iter().all(|v| v.is_finite())
    }

    /// Clamps every bounded coordinate into its interval.
    pub fn project(&mut self, tree: &GameTree) {
        for i in tree.players() {
            if let Some(b) = tree.bounds(i) {
                for (v, iv) in self[i].iter_mut().zip(b) {
                    *v = iv.clamp(*v);
                }
            }
        }
    }
}

impl Index<PlayerId> for ActionProfile {
    type Output = [f64];

    fn index(&self, i: PlayerId) -> &[f64] {
        &self.flat[self.offsets[i.0]..self.offsets[i.0 + 1]]
    }
}

impl IndexMut<PlayerId> for ActionProfile {
    fn index_mut(&mut self, i: PlayerId) -> &mut [f64] {
        let (a, b) = (self.offsets[i.0], self.offsets[i.0 + 1]);
        &mut self.flat[a..b]
    }
}

/// Nearest point of the tree's box constraints (identity on unbounded
/// coordinates).
pub fn project(profile: &ActionProfile, tree: &GameTree) -> ActionProfile {
    let mut p = profile.clone();
    p.project(tree);
    p
}
