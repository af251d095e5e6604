use thiserror::Error;

use crate::tree::PlayerId;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ShgError {
    #[error("malformed tree: {0}")]
    MalformedTree(String),

    #[error("level {0} has no players")]
    EmptyLevel(usize),

    #[error("unknown player {0}")]
    UnknownPlayer(PlayerId),

    #[error("profile has dimension {actual}, tree expects {expected}")]
    DimensionMismatch { expected: usize, actual: usize },

    /// The own-action Hessian of `player` is singular (or too badly
    /// conditioned to invert) at the current profile.
    #[error("singular own-action Hessian for player {player} (condition estimate {condition:e})")]
    SingularHessian { player: PlayerId, condition: f64 },

    #[error("player {player} utility depends on player {other}, which is neither itself, its parent nor a leaf")]
    DependencyViolation { player: PlayerId, other: PlayerId },

    #[error("invalid weights: {0}")]
    InvalidWeights(String),

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("bad network file: {0}")]
    BadNetworkFile(String),

    #[error("bad partition: {0}")]
    BadPartition(String),

    #[error("invalid solver configuration: {0}")]
    InvalidConfig(String),

    #[error("profile is not stationary (projected field norm {norm:e} > {tol:e})")]
    NotStationary { norm: f64, tol: f64 },

    #[error("eigenvalue {re}{im:+}i has a non-negative real part")]
    NotLasp { re: f64, im: f64 },

    #[error("game definition: {0}")]
    GameSpec(String),
}

pub type Result<T, E = ShgError> = std::result::Result<T, E>;
