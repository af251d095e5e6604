//! Differential backward induction: projected Jacobi ascent along every
//! player's total gradient.

use nalgebra::DVector;

use crate::diff::{dbi_field, dbi_field_masked, flatten};
use crate::error::Result;
use crate::oracle::UtilityOracle;
use crate::profile::ActionProfile;
use crate::trace::{run, FieldEval, SolverConfig, Trace};

/// One sweep: every total gradient is evaluated at `x`, then all players
/// move together and the result is projected. Returns the new profile and
/// the field at `x`.
pub fn dbi_step<O: UtilityOracle + ?Sized>(
    oracle: &O,
    x: &ActionProfile,
    config: &SolverConfig,
) -> Result<(ActionProfile, DVector<f64>)> {
    let g = flatten(&dbi_field(oracle, x)?);
    let mut next = x.clone();
    for (v, d) in next.as_mut_slice().iter_mut().zip(g.iter()) {
        *v += config.learning_rate * d;
    }
    next.project(oracle.tree());
    Ok((next, g))
}

/// Runs DBI from `config.init`.
pub fn dbi_solve<O: UtilityOracle + ?Sized>(oracle: &O, config: &SolverConfig) -> Result<Trace> {
    config.validate()?;
    let x0 = config.initial_profile(oracle.tree())?;
    Ok(dbi_solve_from(oracle, x0, config, None))
}

/// Runs DBI from `x0`. With `active`, only the flagged players move (the
/// set must be closed under descendants); the others stay frozen.
pub fn dbi_solve_from<O: UtilityOracle + ?Sized>(
    oracle: &O,
    x0: ActionProfile,
    config: &SolverConfig,
    active: Option<&[bool]>,
) -> Trace {
    let tree = oracle.tree();
    let field = |x: &ActionProfile| -> Result<FieldEval> {
        let parts = match active {
            Some(mask) => dbi_field_masked(oracle, x, mask)?,
            None => dbi_field(oracle, x)?,
        };
        Ok(FieldEval { update: flatten(&parts), totals: Some(parts) })
    };
    let n = tree.n_players();
    let fallback = |x: &ActionProfile| match dbi_field(oracle, x) {
        Ok(parts) => parts.iter().map(|p| p.norm()).collect(),
        Err(_) => vec![f64::NAN; n],
    };
    run(tree, config, x0, field, fallback)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::games::{Polynomial, PolynomialGame};
    use crate::trace::{field_norm_of, Init, StopReason};
    use crate::tree::{GameTree, Interval, PlayerId};
    use proptest::prelude::*;

    fn single(u: Polynomial) -> PolynomialGame {
        PolynomialGame::new(GameTree::chain(&[1]).unwrap(), vec![u]).unwrap()
    }

    #[test]
    fn single_player_step() {
        let g = single(-1.0 * Polynomial::var(0).pow(2));
        let x = ActionProfile::new(g.tree(), vec![1.0]).unwrap();
        let (next, field) = dbi_step(&g, &x, &SolverConfig::new(0.1, 1, 1e-6, 0)).unwrap();
        assert!((next.as_slice()[0] - 0.8).abs() < 1e-15);
        assert_eq!(field[0], -2.0);
    }

    #[test]
    fn fixed_point_is_kept() {
        // Stackelberg pair whose equilibrium is the origin.
        let (x, y) = (Polynomial::var(0), Polynomial::var(1));
        let u1 = -1.0 * (x.clone() - y.clone()).pow(2) - x.clone().pow(2);
        let u2 = -1.0 * (y - 2.0 * x).pow(2);
        let g = PolynomialGame::new(GameTree::chain(&[1, 1]).unwrap(), vec![u1, u2]).unwrap();
        let p = ActionProfile::zeros(g.tree());
        let (next, _) = dbi_step(&g, &p, &SolverConfig::new(0.3, 1, 1e-6, 0)).unwrap();
        assert_eq!(next, p);
    }

    #[test]
    fn projection_after_step() {
        let tree = GameTree::chain(&[1]).unwrap().with_bounds(vec![Some(vec![Interval::UNIT])]).unwrap();
        let g = PolynomialGame::new(tree, vec![Polynomial::var(0) * 5.0]).unwrap();
        let x = ActionProfile::new(g.tree(), vec![0.9]).unwrap();
        let (next, _) = dbi_step(&g, &x, &SolverConfig::new(1.0, 1, 1e-6, 0)).unwrap();
        assert_eq!(next.as_slice(), &[1.0]);
        // Pinned at the bound: stops as converged on the projected field.
        let c = SolverConfig::new(0.1, 100, 1e-6, 0).with_init(Init::Explicit { profile: vec![0.5] });
        let tr = dbi_solve(&g, &c).unwrap();
        assert!(tr.converged);
        assert_eq!(tr.final_profile.as_slice(), &[1.0]);
    }

    #[test]
    fn p111_converges() {
        let g = PolynomialGame::p111();
        let c = SolverConfig { learning_rate: 1e-3, max_iters: 200_000, grad_tol: 1e-6, ..Default::default() }
            .with_init(Init::Explicit { profile: vec![-0.3, 1.8, -1.0] });
        let tr = dbi_solve(&g, &c).unwrap();
        assert!(tr.converged, "{:?}", tr.stop);
        let want = [-0.34, 1.85, -1.08];
        for (a, b) in tr.final_profile.as_slice().iter().zip(want) {
            assert!((a - b).abs() < 0.01, "{a} vs {b}");
        }
        let e = tr.last();
        assert!((e.field_norm - field_norm_of(&e.grad_norms)).abs() < 1e-15);
        assert!(e.grad_norms.iter().all(|n| *n < 1e-6));
    }

    #[test]
    fn deterministic() {
        let g = PolynomialGame::p112();
        let c = SolverConfig::new(4e-6, 3000, 1e-9, 42);
        let a = dbi_solve(&g, &c).unwrap();
        let b = dbi_solve(&g, &c).unwrap();
        assert_eq!(a.entries, b.entries);
        assert_eq!(a.final_profile, b.final_profile);
    }

    #[test]
    fn singular_hessian_marks_trace() {
        let t = GameTree::chain(&[1, 1]).unwrap();
        let g = PolynomialGame::new(t, vec![Polynomial::var(0), Polynomial::var(0) * Polynomial::var(1)]).unwrap();
        let tr = dbi_solve(&g, &SolverConfig::new(0.1, 10, 1e-6, 0)).unwrap();
        assert!(matches!(tr.stop, StopReason::Diverged(_)));
        assert!(!tr.converged);
    }

    #[test]
    fn masked_run_freezes_others() {
        let g = PolynomialGame::p111();
        let x0 = ActionProfile::new(g.tree(), vec![0.5, 0.5, 0.5]).unwrap();
        let c = SolverConfig::new(1e-3, 500, 1e-9, 0);
        let tr = dbi_solve_from(&g, x0.clone(), &c, Some(&[false, true, true]));
        assert_eq!(tr.final_profile[PlayerId(0)], x0[PlayerId(0)]);
        assert_ne!(tr.final_profile[PlayerId(1)], x0[PlayerId(1)]);
    }

    proptest! {
        #[test]
        fn halving_alpha_halves_displacement(v in proptest::collection::vec(-2.0f64..2.0, 3), a in 1e-4f64..1e-1) {
            let g = PolynomialGame::p111();
            let x = ActionProfile::new(g.tree(), v).unwrap();
            let (n1, _) = dbi_step(&g, &x, &SolverConfig::new(a, 1, 1e-6, 0)).unwrap();
            let (n2, _) = dbi_step(&g, &x, &SolverConfig::new(a / 2.0, 1, 1e-6, 0)).unwrap();
            for k in 0..3 {
                let d1 = n1.as_slice()[k] - x.as_slice()[k];
                let d2 = n2.as_slice()[k] - x.as_slice()[k];
                prop_assert!((d1 - 2.0 * d2).abs() <= 1e-12 * d1.abs().max(1.0));
            }
        }
    }
}
