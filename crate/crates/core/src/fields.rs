//! Baseline update fields for differentiable games, all built from the
//! simultaneous-gradient field `G = (∇_{x_1}u_1, …, ∇_{x_n}u_n)`.
//!
//! `G` is treated as a row vector: the symplectic correction is `G·A`,
//! i.e. `(G·A)_k = Σ_j G_j A_{jk}`.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::diff::dbi_field;
use crate::error::{Result, ShgError};
use crate::oracle::{fd_step, UtilityOracle, FD_STEP};
use crate::profile::ActionProfile;
use crate::trace::{run, FieldEval, SolverConfig, Trace};

pub const DEFAULT_GAMMA: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FieldKind {
    Sim,
    Sym,
    SymAln,
    Co {
        #[serde(default = "default_gamma")]
        gamma: f64,
    },
    Ham,
}

fn default_gamma() -> f64 {
    DEFAULT_GAMMA
}

impl FieldKind {
    pub const ALL: [FieldKind; 5] =
        [FieldKind::Sim, FieldKind::Sym, FieldKind::SymAln, FieldKind::Co { gamma: DEFAULT_GAMMA }, FieldKind::Ham];

    pub fn name(&self) -> &'static str {
        match self {
            FieldKind::Sim => "sim",
            FieldKind::Sym => "sym",
            FieldKind::SymAln => "sym_aln",
            FieldKind::Co { .. } => "co",
            FieldKind::Ham => "ham",
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            FieldKind::Co { gamma } if !(*gamma > 0.0) => {
                Err(ShgError::InvalidConfig(format!("consensus weight must be positive, got {gamma}")))
            }
            _ => Ok(()),
        }
    }
}

impl fmt::Display for FieldKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FieldKind {
    type Err = ShgError;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "sim" => Ok(FieldKind::Sim),
            "sym" => Ok(FieldKind::Sym),
            "sym_aln" | "symaln" => Ok(FieldKind::SymAln),
            "co" => Ok(FieldKind::Co { gamma: DEFAULT_GAMMA }),
            "ham" => Ok(FieldKind::Ham),
            other => Err(ShgError::InvalidConfig(format!("unknown field kind `{other}`"))),
        }
    }
}

/// Each player's partial gradient with respect to its own action.
pub fn field_sim<O: UtilityOracle + ?Sized>(oracle: &O, x: &ActionProfile) -> DVector<f64> {
    let tree = oracle.tree();
    let mut g = DVector::zeros(tree.total_dim());
    for i in tree.players() {
        let r = tree.range(i);
        g.rows_mut(r.start, r.len()).copy_from(&oracle.grad(i, i, x));
    }
    g
}

/// Central-difference Jacobian of a vector field, step `rel · max(1, |x_k|)`.
pub fn fd_jacobian<F>(f: F, x: &ActionProfile, rel: f64) -> Result<DMatrix<f64>>
where
    F: Fn(&ActionProfile) -> Result<DVector<f64>>,
{
    let d = x.len();
    let mut jac = DMatrix::zeros(d, d);
    let mut xp = x.clone();
    for k in 0..d {
        let v = x.as_slice()[k];
        let h = fd_step(v, rel);
        xp.as_mut_slice()[k] = v + h;
        let fp = f(&xp)?;
        xp.as_mut_slice()[k] = v - h;
        let fm = f(&xp)?;
        xp.as_mut_slice()[k] = v;
        jac.set_column(k, &((fp - fm) / (2.0 * h)));
    }
    Ok(jac)
}

/// Jacobian of the simultaneous-gradient field.
pub fn sim_jacobian<O: UtilityOracle + ?Sized>(oracle: &O, x: &ActionProfile) -> DMatrix<f64> {
    fd_jacobian(|p| Ok(field_sim(oracle, p)), x, FD_STEP).expect("the simultaneous field cannot fail")
}

/// Jacobian of the chosen baseline field.
pub fn field_jacobian<O: UtilityOracle + ?Sized>(oracle: &O, kind: FieldKind, x: &ActionProfile) -> DMatrix<f64> {
    fd_jacobian(|p| Ok(field(oracle, kind, p)), x, FD_STEP).expect("baseline fields cannot fail")
}

/// `−∇‖G‖² = −2 Jᵀ G`.
fn ham_from(g: &DVector<f64>, jac: &DMatrix<f64>) -> DVector<f64> {
    jac.tr_mul(g) * -2.0
}

fn antisymmetric(jac: &DMatrix<f64>) -> DMatrix<f64> {
    (jac - jac.transpose()) * 0.5
}

/// `sign(v)` with `sign(0) = 0`.
fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// `G + G·A`, or `G + ζ·G·A` when `aligned`, with
/// `ζ = sign((1/2d)·⟨G_HAM, G⟩·⟨G_HAM, G·A⟩ + 0.1)`.
pub fn field_sym<O: UtilityOracle + ?Sized>(oracle: &O, x: &ActionProfile, aligned: bool) -> DVector<f64> {
    let g = field_sim(oracle, x);
    let jac = sim_jacobian(oracle, x);
    let ga = antisymmetric(&jac).tr_mul(&g);
    let zeta = if aligned {
        let ham = ham_from(&g, &jac);
        let d = g.len() as f64;
        sign(ham.dot(&g) * ham.dot(&ga) / (2.0 * d) + 0.1)
    } else {
        1.0
    };
    g + ga * zeta
}

pub fn field_ham<O: UtilityOracle + ?Sized>(oracle: &O, x: &ActionProfile) -> DVector<f64> {
    let g = field_sim(oracle, x);
    ham_from(&g, &sim_jacobian(oracle, x))
}

/// `G + γ·G_HAM`.
pub fn field_co<O: UtilityOracle + ?Sized>(oracle: &O, x: &ActionProfile, gamma: f64) -> DVector<f64> {
    let g = field_sim(oracle, x);
    let ham = ham_from(&g, &sim_jacobian(oracle, x));
    g + ham * gamma
}

pub fn field<O: UtilityOracle + ?Sized>(oracle: &O, kind: FieldKind, x: &ActionProfile) -> DVector<f64> {
    match kind {
        FieldKind::Sim => field_sim(oracle, x),
        FieldKind::Sym => field_sym(oracle, x, false),
        FieldKind::SymAln => field_sym(oracle, x, true),
        FieldKind::Co { gamma } => field_co(oracle, x, gamma),
        FieldKind::Ham => field_ham(oracle, x),
    }
}

/// Projected fixed-step ascent along a baseline field. Recorded iterates
/// carry DBI total-gradient norms (NaN where those are undefined) so runs
/// are comparable with DBI.
pub fn iterate_field<O: UtilityOracle + ?Sized>(oracle: &O, kind: FieldKind, config: &SolverConfig) -> Result<Trace> {
    config.validate()?;
    kind.validate()?;
    let x0 = config.initial_profile(oracle.tree())?;
    Ok(iterate_field_from(oracle, kind, x0, config))
}

pub fn iterate_field_from<O: UtilityOracle + ?Sized>(
    oracle: &O,
    kind: FieldKind,
    x0: ActionProfile,
    config: &SolverConfig,
) -> Trace {
    let tree = oracle.tree();
    let n = tree.n_players();
    run(
        tree,
        config,
        x0,
        |x| Ok(FieldEval { update: field(oracle, kind, x), totals: None }),
        |x| match dbi_field(oracle, x) {
            Ok(parts) => parts.iter().map(|p| p.norm()).collect(),
            Err(_) => vec![f64::NAN; n],
        },
    )
}
