//! Stability of DBI stationary points.
//!
//! A stationary point is an LASP when every eigenvalue of the DBI field's
//! Jacobian has a negative real part, and an LSPE when every player's total
//! Hessian is negative definite there.

use nalgebra::{Complex, DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::diff::{dbi_field, flatten, total_hessian};
use crate::error::{Result, ShgError};
use crate::fields::fd_jacobian;
use crate::games::PolynomialGame;
use crate::linalg::{eigenvalues, spectral_radius, symmetric_eigenvalues};
use crate::oracle::UtilityOracle;
use crate::profile::ActionProfile;
use crate::rng::{rng_tagged, Rng};
use crate::trace::projected_field;
use crate::tree::GameTree;
use rand::Rng as _;

/// Relative step of the field-Jacobian differences.
pub const JACOBIAN_STEP: f64 = 1e-6;
/// Half-width of the marginal band around zero real part.
pub const DEFAULT_TOL: f64 = 1e-6;
/// Projected field norm below which a point counts as stationary. Matches
/// the solvers' default convergence tolerance.
pub const DEFAULT_STATIONARITY_TOL: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Classification {
    Lasp,
    Unstable,
    Marginal,
}

/// Sign of the largest eigenvalue of a (restricted) total Hessian.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Definiteness {
    /// Every eigenvalue `< -tol`.
    NegativeDefinite,
    /// Largest eigenvalue within `[-tol, tol]`.
    Indeterminate,
    /// Some eigenvalue `> tol`.
    NotNegative,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Eigenvalue {
    pub re: f64,
    pub im: f64,
}

impl From<Complex<f64>> for Eigenvalue {
    fn from(c: Complex<f64>) -> Self {
        Eigenvalue { re: c.re, im: c.im }
    }
}

impl From<Eigenvalue> for Complex<f64> {
    fn from(e: Eigenvalue) -> Self {
        Complex::new(e.re, e.im)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StabilityOptions {
    pub tol: f64,
    pub stationarity_tol: f64,
    /// Step size for the contraction factor. When absent, half the
    /// learning-rate bound is used at an LASP.
    pub learning_rate: Option<f64>,
}

impl Default for StabilityOptions {
    fn default() -> Self {
        StabilityOptions { tol: DEFAULT_TOL, stationarity_tol: DEFAULT_STATIONARITY_TOL, learning_rate: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub eigenvalues: Vec<Eigenvalue>,
    pub classification: Classification,
    /// `-2 Re(λ*)/|λ*|²`, present at an LASP.
    pub lr_bound: Option<f64>,
    /// Step size the contraction factor refers to.
    pub learning_rate: Option<f64>,
    /// `1 - ρ(I + αJ)`.
    pub contraction: Option<f64>,
    pub is_lspe: Option<bool>,
    pub hessian_flags: Vec<Definiteness>,
    /// Projected field norm at the point.
    pub field_norm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LspeReport {
    pub is_lspe: bool,
    pub flags: Vec<Definiteness>,
}

pub fn classify_eigenvalues(eigs: &[Complex<f64>], tol: f64) -> Classification {
    if eigs.iter().all(|e| e.re < -tol) {
        Classification::Lasp
    } else if eigs.iter().any(|e| e.re > tol) {
        Classification::Unstable
    } else {
        Classification::Marginal
    }
}

/// Largest step size for which `x + αJx` contracts: `min_i -2Re(λ_i)/|λ_i|²`.
/// The minimum is attained at `λ* = argmax Re(λ)/|λ|²`; equal ratios give
/// equal bounds, so ties need no rule.
pub fn max_stable_lr(eigs: &[Complex<f64>]) -> Result<f64> {
    if let Some(e) = eigs.iter().find(|e| !(e.re < 0.0)) {
        return Err(ShgError::NotLasp { re: e.re, im: e.im });
    }
    Ok(eigs.iter().map(|e| -2.0 * e.re / e.norm_sqr()).fold(f64::INFINITY, f64::min))
}

/// `1 - ρ(I + αJ)` from the eigenvalues of `J`.
pub fn contraction(eigs: &[Complex<f64>], alpha: f64) -> f64 {
    let shifted: Vec<Complex<f64>> = eigs.iter().map(|e| Complex::new(1.0, 0.0) + e * alpha).collect();
    1.0 - spectral_radius(&shifted)
}

/// Report for a field Jacobian given directly. LSPE fields stay empty.
pub fn classify_jacobian(jac: &DMatrix<f64>, opts: &StabilityOptions) -> StabilityReport {
    let eigs = eigenvalues(jac);
    let classification = classify_eigenvalues(&eigs, opts.tol);
    let lr_bound = if classification == Classification::Lasp { max_stable_lr(&eigs).ok() } else { None };
    let learning_rate = opts.learning_rate.or(lr_bound.map(|b| 0.5 * b));
    StabilityReport {
        eigenvalues: eigs.iter().map(|&e| e.into()).collect(),
        classification,
        lr_bound,
        learning_rate,
        contraction: learning_rate.map(|a| contraction(&eigs, a)),
        is_lspe: None,
        hessian_flags: Vec::new(),
        field_norm: 0.0,
    }
}

/// Flat DBI field.
pub fn dbi_vector<O: UtilityOracle + ?Sized>(oracle: &O, x: &ActionProfile) -> Result<DVector<f64>> {
    Ok(flatten(&dbi_field(oracle, x)?))
}

/// Central-difference Jacobian of the DBI field.
pub fn dbi_jacobian<O: UtilityOracle + ?Sized>(oracle: &O, x: &ActionProfile) -> Result<DMatrix<f64>> {
    fd_jacobian(|y| dbi_vector(oracle, y), x, JACOBIAN_STEP)
}

/// Coordinates sitting on one of their bounds.
pub fn pinned_coords(tree: &GameTree, x: &ActionProfile) -> Vec<bool> {
    (0..x.len()).map(|k| tree.coord_bound(k).is_some_and(|iv| x.as_slice()[k] <= iv.lo || x.as_slice()[k] >= iv.hi)).collect()
}

fn require_stationary<O: UtilityOracle + ?Sized>(oracle: &O, x: &ActionProfile, tol: f64) -> Result<f64> {
    let g = dbi_vector(oracle, x)?;
    let norm = projected_field(oracle.tree(), x, &g).norm();
    if !(norm < tol) {
        return Err(ShgError::NotStationary { norm, tol });
    }
    Ok(norm)
}

fn restrict(m: &DMatrix<f64>, keep: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(keep.len(), keep.len(), |r, c| m[(keep[r], keep[c])])
}

/// Full report at a stationary point: LASP classification of the DBI field
/// Jacobian and the LSPE check. Bound-pinned coordinates are dropped from
/// both, since projection holds them fixed.
pub fn classify_lasp<O: UtilityOracle + ?Sized>(
    oracle: &O,
    x: &ActionProfile,
    opts: &StabilityOptions,
) -> Result<StabilityReport> {
    let field_norm = require_stationary(oracle, x, opts.stationarity_tol)?;
    let pinned = pinned_coords(oracle.tree(), x);
    let free: Vec<usize> = (0..x.len()).filter(|&k| !pinned[k]).collect();
    let jac = restrict(&dbi_jacobian(oracle, x)?, &free);
    let mut report = classify_jacobian(&jac, opts);
    let lspe = lspe_flags(oracle, x, opts.tol, &pinned)?;
    report.is_lspe = Some(lspe.is_lspe);
    report.hessian_flags = lspe.flags;
    report.field_norm = field_norm;
    Ok(report)
}

/// Second-order check: every player's total Hessian, restricted to its
/// free coordinates, must have all eigenvalues below `-tol`.
pub fn check_lspe<O: UtilityOracle + ?Sized>(oracle: &O, x: &ActionProfile, opts: &StabilityOptions) -> Result<LspeReport> {
    require_stationary(oracle, x, opts.stationarity_tol)?;
    lspe_flags(oracle, x, opts.tol, &pinned_coords(oracle.tree(), x))
}

fn lspe_flags<O: UtilityOracle + ?Sized>(oracle: &O, x: &ActionProfile, tol: f64, pinned: &[bool]) -> Result<LspeReport> {
    let tree = oracle.tree();
    let mut flags = Vec::with_capacity(tree.n_players());
    for i in tree.players() {
        let r = tree.range(i);
        let free: Vec<usize> = r.clone().filter(|&k| !pinned[k]).map(|k| k - r.start).collect();
        let h = restrict(&total_hessian(oracle, i, x)?, &free);
        // A fully pinned player has nothing left to check.
        let top = symmetric_eigenvalues(&h).last().copied().unwrap_or(f64::NEG_INFINITY);
        flags.push(if top < -tol {
            Definiteness::NegativeDefinite
        } else if top > tol {
            Definiteness::NotNegative
        } else {
            Definiteness::Indeterminate
        });
    }
    let is_lspe = flags.iter().all(|f| *f == Definiteness::NegativeDefinite);
    Ok(LspeReport { is_lspe, flags })
}

/// Settings of the critical-point search.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RootSearch {
    pub starts: usize,
    /// Starts are uniform in `[-box, box]^d`.
    pub init_box: f64,
    pub dedup_radius: f64,
    pub max_newton_iters: usize,
    /// Field norm at which a Newton run is accepted as a critical point.
    pub root_tol: f64,
}

impl Default for RootSearch {
    fn default() -> Self {
        RootSearch { starts: 32, init_box: 5.0, dedup_radius: 1e-4, max_newton_iters: 100, root_tol: 1e-8 }
    }
}

/// Damped Newton on the DBI field from `x0`. `None` when the run stalls,
/// leaves any reasonable region or hits a singular Hessian.
pub fn newton_root<O: UtilityOracle + ?Sized>(oracle: &O, x0: ActionProfile, search: &RootSearch) -> Option<ActionProfile> {
    let mut x = x0;
    let mut g = dbi_vector(oracle, &x).ok()?;
    for _ in 0..search.max_newton_iters {
        let norm = g.norm();
        if norm < search.root_tol {
            return Some(x);
        }
        let jac = dbi_jacobian(oracle, &x).ok()?;
        let step = jac.clone().lu().solve(&(-&g)).or_else(|| jac.svd(true, true).solve(&(-&g), 1e-12).ok())?;
        let mut t = 1.0;
        loop {
            let mut xn = x.clone();
            for (v, s) in xn.as_mut_slice().iter_mut().zip(step.iter()) {
                *v += t * s;
            }
            if let Ok(gn) = dbi_vector(oracle, &xn) {
                if gn.norm() < (1.0 - 1e-4 * t) * norm {
                    x = xn;
                    g = gn;
                    break;
                }
            }
            t *= 0.5;
            if t < 1e-8 {
                return None;
            }
        }
        if x.as_slice().iter().any(|v| !(v.abs() < 1e6)) {
            return None;
        }
    }
    (g.norm() < search.root_tol).then_some(x)
}

/// Distinct critical points found from seeded starts, in discovery order.
pub fn critical_points<O: UtilityOracle + ?Sized>(oracle: &O, rng: &mut Rng, search: &RootSearch) -> Vec<ActionProfile> {
    let tree = oracle.tree();
    let mut found: Vec<ActionProfile> = Vec::new();
    for _ in 0..search.starts {
        let v = (0..tree.total_dim()).map(|_| rng.gen_range(-search.init_box..=search.init_box)).collect();
        let x0 = ActionProfile::new(tree, v).expect("dimension matches the tree");
        if let Some(x) = newton_root(oracle, x0, search) {
            let dup =
                found.iter().any(|y| y.as_slice().iter().zip(x.as_slice()).all(|(a, b)| (a - b).abs() <= search.dedup_radius));
            if !dup {
                found.push(x);
            }
        }
    }
    found
}

/// Outcome for one random instance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct InstanceOutcome {
    pub critical_points: usize,
    pub lasp: bool,
    pub lspe: bool,
}

/// Classifies every critical point of `oracle`. The instance is an LSPE
/// instance when some LASP also passes the second-order check.
pub fn classify_instance<O: UtilityOracle + ?Sized>(oracle: &O, rng: &mut Rng, search: &RootSearch) -> InstanceOutcome {
    let points = critical_points(oracle, rng, search);
    let opts = StabilityOptions { stationarity_tol: search.root_tol * 10.0, ..Default::default() };
    let mut out = InstanceOutcome { critical_points: points.len(), lasp: false, lspe: false };
    for x in &points {
        let Ok(jac) = dbi_jacobian(oracle, x) else { continue };
        if classify_eigenvalues(&eigenvalues(&jac), opts.tol) != Classification::Lasp {
            continue;
        }
        out.lasp = true;
        if check_lspe(oracle, x, &opts).is_ok_and(|r| r.is_lspe) {
            out.lspe = true;
            break;
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasureReport {
    pub n: usize,
    pub n_lasp: usize,
    pub n_lspe: usize,
    /// Instances where no critical point was found.
    pub n_no_critical: usize,
    pub pct_lasp: f64,
    /// Share of LASP-found instances whose LASP is an LSPE; 0 when none.
    pub pct_lspe: f64,
}

impl MeasureReport {
    fn from_outcomes(outcomes: &[InstanceOutcome]) -> Self {
        let n = outcomes.len();
        let n_lasp = outcomes.iter().filter(|o| o.lasp).count();
        let n_lspe = outcomes.iter().filter(|o| o.lspe).count();
        let pct = |a: usize, b: usize| if b == 0 { 0.0 } else { 100.0 * a as f64 / b as f64 };
        MeasureReport {
            n,
            n_lasp,
            n_lspe,
            n_no_critical: outcomes.iter().filter(|o| o.critical_points == 0).count(),
            pct_lasp: pct(n_lasp, n),
            pct_lspe: pct(n_lspe, n_lasp),
        }
    }
}

const INSTANCE_TAG: u64 = 0x3ea5;
const START_TAG: u64 = 0x57a7;

/// Measure properties of an arbitrary instance generator. Instance `k` is
/// built from `rng_tagged(mix(seed, k))` and searched with its own stream,
/// so the result does not depend on scheduling.
pub fn measure_with<G, F>(n: usize, seed: u64, search: &RootSearch, make: F) -> Result<MeasureReport>
where
    G: UtilityOracle,
    F: Fn(&mut Rng) -> Result<G> + Sync,
{
    let outcomes: Vec<InstanceOutcome> = (0..n)
        .into_par_iter()
        .map(|k| {
            let s = crate::rng::mix(seed, k as u64);
            let game = make(&mut rng_tagged(s, INSTANCE_TAG))?;
            Ok(classify_instance(&game, &mut rng_tagged(s, START_TAG), search))
        })
        .collect::<Result<_>>()?;
    Ok(MeasureReport::from_outcomes(&outcomes))
}

/// Measure properties of the random polynomial class on `shape`: degree-4
/// utilities, integer coefficients in `[-c, c]` (reals in `[-1, 1]` when
/// `c` is `None`).
pub fn measure_properties(shape: &[usize], c: Option<i64>, n: usize, seed: u64) -> Result<MeasureReport> {
    const SHAPES: [&[usize]; 4] = [&[1, 1], &[1, 2], &[1, 1, 1], &[1, 1, 2]];
    if !SHAPES.contains(&shape) {
        return Err(ShgError::InvalidParams(format!("measure study shape {shape:?} not one of {SHAPES:?}")));
    }
    if c.is_some_and(|c| c < 1) {
        return Err(ShgError::InvalidParams("coefficient range must be at least 1".into()));
    }
    measure_with(n, seed, &RootSearch::default(), |r| PolynomialGame::random(shape, 4, c, r))
}
