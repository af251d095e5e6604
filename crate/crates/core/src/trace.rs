//! Solver configuration, run records and the shared projected fixed-step
//! iteration `x ← project(x + α·F(x))`.

use nalgebra::DVector;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Result, ShgError};
use crate::profile::ActionProfile;
use crate::rng::rng_tagged;
use crate::tree::{GameTree, Interval};

const INIT_TAG: u64 = 0x1417;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Init {
    /// Uniform over the bounds of bounded coordinates and over `unbounded`
    /// elsewhere.
    Uniform {
        #[serde(default = "default_unbounded")]
        unbounded: Interval,
    },
    Explicit {
        profile: Vec<f64>,
    },
}

fn default_unbounded() -> Interval {
    Interval::new(-1.0, 1.0)
}

impl Default for Init {
    fn default() -> Self {
        Init::Uniform { unbounded: default_unbounded() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    pub learning_rate: f64,
    pub max_iters: usize,
    pub grad_tol: f64,
    pub seed: u64,
    pub init: Init,
    /// Keep every k-th iterate; `None` keeps all of them for runs of at most
    /// 10⁴ steps and thins longer runs to about 10⁴ entries.
    pub record_every: Option<usize>,
    /// Stop after this many consecutive steps whose largest coordinate move
    /// is below `stall_tol`.
    pub stall_window: usize,
    pub stall_tol: f64,
    /// A profile coordinate beyond this magnitude counts as divergence.
    pub blowup: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            learning_rate: 1e-3,
            max_iters: 10_000,
            grad_tol: 1e-6,
            seed: 0,
            init: Init::default(),
            record_every: None,
            stall_window: 100,
            stall_tol: 1e-12,
            blowup: 1e10,
        }
    }
}

impl SolverConfig {
    pub fn new(learning_rate: f64, max_iters: usize, grad_tol: f64, seed: u64) -> Self {
        SolverConfig { learning_rate, max_iters, grad_tol, seed, ..Default::default() }
    }

    pub fn with_init(mut self, init: Init) -> Self {
        self.init = init;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(ShgError::InvalidConfig(format!("learning rate must be positive, got {}", self.learning_rate)));
        }
        if self.max_iters == 0 {
            return Err(ShgError::InvalidConfig("max_iters must be at least 1".into()));
        }
        if !(self.grad_tol > 0.0) {
            return Err(ShgError::InvalidConfig(format!("grad_tol must be positive, got {}", self.grad_tol)));
        }
        if self.record_every == Some(0) {
            return Err(ShgError::InvalidConfig("record_every must be at least 1".into()));
        }
        Ok(())
    }

    pub fn record_stride(&self) -> usize {
        self.record_every.unwrap_or(if self.max_iters <= 10_000 { 1 } else { self.max_iters / 10_000 })
    }

    /// Starting profile: explicit, or drawn from the seeded generator and
    /// projected into the bounds.
    pub fn initial_profile(&self, tree: &GameTree) -> Result<ActionProfile> {
        let mut x = match &self.init {
            Init::Explicit { profile } => ActionProfile::new(tree, profile.clone())?,
            Init::Uniform { unbounded } => {
                let mut r = rng_tagged(self.seed, INIT_TAG);
                let v = (0..tree.total_dim())
                    .map(|k| {
                        let iv = tree.coord_bound(k).unwrap_or(*unbounded);
                        if iv.width() > 0.0 {
                            r.gen_range(iv.lo..=iv.hi)
                        } else {
                            iv.lo
                        }
                    })
                    .collect();
                ActionProfile::new(tree, v)?
            }
        };
        x.project(tree);
        Ok(x)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub iteration: usize,
    pub profile: Vec<f64>,
    /// Norm of each player's total gradient.
    pub grad_norms: Vec<f64>,
    /// Euclidean norm of the concatenated total gradients.
    pub field_norm: f64,
    /// Norm of the field actually being iterated (equal to `field_norm` for
    /// the DBI solver).
    pub update_norm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "reason", rename_all = "snake_case")]
pub enum StopReason {
    Converged,
    Stagnated,
    MaxIters,
    Diverged(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub entries: Vec<TraceEntry>,
    /// Projected update field below `grad_tol` at `final_profile`.
    pub converged: bool,
    pub stop: StopReason,
    /// Steps taken.
    pub iterations: usize,
    pub final_profile: ActionProfile,
}

impl Trace {
    pub fn last(&self) -> &TraceEntry {
        self.entries.last().expect("a trace records at least its initial iterate")
    }

    pub fn diverged(&self) -> bool {
        matches!(self.stop, StopReason::Diverged(_))
    }
}

/// Euclidean norm of per-player vectors, concatenated.
pub fn field_norm_of(norms: &[f64]) -> f64 {
    norms.iter().map(|n| n * n).sum::<f64>().sqrt()
}

/// Zeroes components that push a coordinate further outside its bound
/// while it sits on that bound.
pub fn projected_field(tree: &GameTree, x: &ActionProfile, field: &DVector<f64>) -> DVector<f64> {
    let mut g = field.clone();
    for (k, gk) in g.iter_mut().enumerate() {
        if let Some(iv) = tree.coord_bound(k) {
            let v = x.as_slice()[k];
            if (v <= iv.lo && *gk < 0.0) || (v >= iv.hi && *gk > 0.0) {
                *gk = 0.0;
            }
        }
    }
    g
}

/// One evaluation of the iterated field at the current profile.
pub(crate) struct FieldEval {
    pub update: DVector<f64>,
    /// Per-player total gradients, when the update field is itself the DBI
    /// field (otherwise computed on demand for recorded iterates).
    pub totals: Option<Vec<DVector<f64>>>,
}

/// Runs the projected iteration from `x0`. `field` evaluates the update
/// field; `totals` produces per-player total-gradient norms for recorded
/// iterates that do not already carry them (NaN where undefined). On
/// divergence the last finite iterate and the offending one are recorded.
pub(crate) fn run<F, T>(tree: &GameTree, config: &SolverConfig, x0: ActionProfile, mut field: F, mut totals: T) -> Trace
where
    F: FnMut(&ActionProfile) -> Result<FieldEval>,
    T: FnMut(&ActionProfile) -> Vec<f64>,
{
    let stride = config.record_stride();
    let mut entries = Vec::new();
    let mut x = x0;
    let mut stalled = 0usize;
    let record = |entries: &mut Vec<TraceEntry>, t: usize, x: &ActionProfile, eval: &FieldEval, totals: &mut T| {
        let grad_norms = match &eval.totals {
            Some(parts) => parts.iter().map(|p| p.norm()).collect(),
            None => totals(x),
        };
        entries.push(TraceEntry {
            iteration: t,
            profile: x.as_slice().to_vec(),
            field_norm: field_norm_of(&grad_norms),
            grad_norms,
            update_norm: eval.update.norm(),
        });
    };

    let record_failed = |entries: &mut Vec<TraceEntry>, t: usize, x: &ActionProfile, totals: &mut T| {
        let grad_norms = totals(x);
        entries.push(TraceEntry {
            iteration: t,
            profile: x.as_slice().to_vec(),
            field_norm: field_norm_of(&grad_norms),
            grad_norms,
            update_norm: f64::NAN,
        });
    };

    let mut t = 0usize;
    let stop = loop {
        let eval = match field(&x) {
            Ok(e) => e,
            Err(e) => {
                record_failed(&mut entries, t, &x, &mut totals);
                break StopReason::Diverged(e.to_string());
            }
        };
        if eval.update.iter().any(|v| !v.is_finite()) {
            record(&mut entries, t, &x, &eval, &mut totals);
            break StopReason::Diverged("non-finite field".into());
        }
        let stationary = projected_field(tree, &x, &eval.update).norm() < config.grad_tol;
        let last = stationary || t == config.max_iters;
        if t % stride == 0 || last {
            record(&mut entries, t, &x, &eval, &mut totals);
        }
        if stationary {
            break StopReason::Converged;
        }
        if t == config.max_iters {
            break StopReason::MaxIters;
        }
        let mut next = x.clone();
        for (v, g) in next.as_mut_slice().iter_mut().zip(eval.update.iter()) {
            *v += config.learning_rate * g;
        }
        next.project(tree);
        t += 1;
        if !next.is_finite() || next.as_slice().iter().any(|v| v.abs() > config.blowup) {
            if entries.last().map(|e| e.iteration) != Some(t - 1) {
                record(&mut entries, t - 1, &x, &eval, &mut totals);
            }
            x = next;
            match field(&x) {
                Ok(eval) => record(&mut entries, t, &x, &eval, &mut totals),
                Err(_) => record_failed(&mut entries, t, &x, &mut totals),
            }
            break StopReason::Diverged("profile left the finite range".into());
        }
        let moved = x.as_slice().iter().zip(next.as_slice()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        x = next;
        stalled = if moved < config.stall_tol { stalled + 1 } else { 0 };
        if stalled >= config.stall_window {
            if let Ok(eval) = field(&x) {
                record(&mut entries, t, &x, &eval, &mut totals);
            }
            break StopReason::Stagnated;
        }
    };
    Trace { entries, converged: stop == StopReason::Converged, stop, iterations: t, final_profile: x }
}
