//! JSON game definitions and the named built-in instances.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use super::epidemic::{EpidemicGame, EpidemicParams};
use super::polynomial::{PolynomialGame, Term};
use super::public_goods::{karate, make_public_goods_files, PublicGoodsParams};
use super::security::{make_security, SecurityParams};
use super::Polynomial;
use crate::error::{Result, ShgError};
use crate::oracle::UtilityOracle;
use crate::tree::{GameTree, Interval};

pub type DynGame = Box<dyn UtilityOracle>;

/// Names accepted by [`builtin`].
pub const BUILTINS: &[&str] = &[
    "p111",
    "p112",
    "p111_3d",
    "epidemic_1_20",
    "epidemic_1_50",
    "epidemic_1_2_4",
    "epidemic_1_2_10",
    "public_goods",
    "security_k0.1",
    "security_k0.5",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "game_kind", rename_all = "snake_case")]
pub enum GameKind {
    /// Either a named instance (`p111`, `p112`, `p111_3d`) or one term list
    /// per player.
    Polynomial {
        #[serde(default)]
        instance: Option<String>,
        #[serde(default)]
        utilities: Option<Vec<Vec<Term>>>,
    },
    Epidemic {
        #[serde(default)]
        params: Option<EpidemicParams>,
        /// Seed for the county populations.
        #[serde(default)]
        population_seed: u64,
    },
    PublicGoods {
        #[serde(default)]
        params: PublicGoodsParams,
        /// Edge list; the bundled karate network when absent.
        #[serde(default)]
        network: Option<PathBuf>,
        #[serde(default)]
        partition: Option<PathBuf>,
    },
    Security {
        #[serde(default)]
        params: SecurityParams,
    },
}

/// A game definition file. Tree keys are required for custom polynomial
/// games; for the other kinds `levels`, when present, must match the shape
/// the kind builds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GameSpec {
    #[serde(default)]
    pub levels: Option<Vec<usize>>,
    /// Parent index per player (`null` for the root).
    #[serde(default)]
    pub parents: Option<Vec<Option<usize>>>,
    #[serde(default)]
    pub action_dims: Option<Vec<usize>>,
    /// Per player: `null` or one `[lo, hi]` pair per action dimension.
    #[serde(default)]
    pub bounds: Option<Vec<Option<Vec<[f64; 2]>>>>,
    #[serde(flatten)]
    pub kind: GameKind,
}

impl GameSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| ShgError::GameSpec(e.to_string()))
    }

    fn tree(&self) -> Result<GameTree> {
        let levels = self.levels.as_ref().ok_or_else(|| ShgError::GameSpec("missing 'levels'".into()))?;
        let n: usize = levels.iter().sum();
        let parents = match &self.parents {
            Some(p) => p.clone(),
            None => GameTree::balanced(levels, 1, None)?.parent_indices(),
        };
        let dims = self.action_dims.clone().unwrap_or_else(|| vec![1; n]);
        let bounds = self
            .bounds
            .as_ref()
            .map(|b| b.iter().map(|p| p.as_ref().map(|v| v.iter().map(|[lo, hi]| Interval::new(*lo, *hi)).collect())).collect())
            .unwrap_or_default();
        GameTree::new(levels, &parents, &dims, bounds)
    }

    pub fn build(&self) -> Result<DynGame> {
        let game: DynGame = match &self.kind {
            GameKind::Polynomial { instance: Some(name), utilities: None } => match name.as_str() {
                "p111" => Box::new(PolynomialGame::p111()),
                "p112" => Box::new(PolynomialGame::p112()),
                "p111_3d" => Box::new(PolynomialGame::p111_3d()),
                other => return Err(ShgError::GameSpec(format!("unknown polynomial instance '{other}'"))),
            },
            GameKind::Polynomial { instance: None, utilities: Some(u) } => {
                let polys = u.iter().map(|t| Polynomial::from_terms(t.iter().cloned())).collect();
                return Ok(Box::new(PolynomialGame::new(self.tree()?, polys)?));
            }
            GameKind::Polynomial { .. } => {
                return Err(ShgError::GameSpec("polynomial games need exactly one of 'instance' or 'utilities'".into()))
            }
            GameKind::Epidemic { params, population_seed } => {
                let p = match (params, &self.levels) {
                    (Some(p), _) => p.clone(),
                    (None, Some(levels)) => EpidemicParams::for_shape(levels)?,
                    (None, None) => EpidemicParams::default(),
                };
                Box::new(EpidemicGame::new(&p, *population_seed)?)
            }
            GameKind::PublicGoods { params, network, partition } => match (network, partition) {
                (None, None) => Box::new(karate(params)?),
                (Some(n), Some(p)) => Box::new(make_public_goods_files(n, p, params)?),
                _ => return Err(ShgError::GameSpec("give both 'network' and 'partition' or neither".into())),
            },
            GameKind::Security { params } => Box::new(make_security(params)?),
        };
        if let Some(levels) = &self.levels {
            if levels.as_slice() != game.tree().level_sizes() {
                return Err(ShgError::GameSpec(format!(
                    "'levels' {levels:?} does not match the built shape {:?}",
                    game.tree().level_sizes()
                )));
            }
        }
        Ok(game)
    }
}

/// Builds a named built-in game. `seed` only affects games with random
/// parameters (epidemic populations).
pub fn builtin(name: &str, seed: u64) -> Result<DynGame> {
    let epidemic =
        |shape: &[usize]| -> Result<DynGame> { Ok(Box::new(EpidemicGame::new(&EpidemicParams::for_shape(shape)?, seed)?)) };
    let security = |kappa| -> Result<DynGame> { Ok(Box::new(make_security(&SecurityParams { kappa, ..Default::default() })?)) };
    match name {
        "p111" => Ok(Box::new(PolynomialGame::p111())),
        "p112" => Ok(Box::new(PolynomialGame::p112())),
        "p111_3d" => Ok(Box::new(PolynomialGame::p111_3d())),
        "epidemic_1_20" => epidemic(&[1, 20]),
        "epidemic_1_50" => epidemic(&[1, 50]),
        "epidemic_1_2_4" => epidemic(&[1, 2, 4]),
        "epidemic_1_2_10" => epidemic(&[1, 2, 10]),
        "public_goods" => Ok(Box::new(karate(&PublicGoodsParams::default())?)),
        "security_k0.1" => security(0.1),
        "security_k0.5" => security(0.5),
        other => Err(ShgError::GameSpec(format!("unknown game '{other}' (known: {})", BUILTINS.join(", ")))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profile::ActionProfile;
    use crate::tree::PlayerId;

    #[test]
    fn all_builtins_build() {
        for name in BUILTINS {
            let g = builtin(name, 0).unwrap();
            assert!(g.tree().n_players() >= 3, "{name}");
        }
        assert!(matches!(builtin("nope", 0), Err(ShgError::GameSpec(_))));
    }

    #[test]
    fn custom_polynomial_from_json() {
        let text = r#"{
            "levels": [1, 1],
            "parents": [null, 0],
            "action_dims": [1, 1],
            "bounds": [null, [[0.0, 1.0]]],
            "game_kind": "polynomial",
            "utilities": [
                [{"coef": -1.0, "vars": [[0, 2]]}],
                [{"coef": -1.0, "vars": [[1, 2]]}, {"coef": 3.0, "vars": [[0, 1], [1, 1]]}]
            ]
        }"#;
        let g = GameSpec::from_json(text).unwrap().build().unwrap();
        let x = ActionProfile::new(g.tree(), vec![1.0, 0.5]).unwrap();
        assert!((g.value(PlayerId(1), &x) - (-0.25 + 1.5)).abs() < 1e-15);
        assert_eq!(g.tree().bounds(PlayerId(1)).unwrap()[0], Interval::UNIT);
    }

    #[test]
    fn kinds_from_json() {
        let g = GameSpec::from_json(r#"{"levels": [1, 2, 4], "game_kind": "epidemic", "population_seed": 3}"#)
            .unwrap()
            .build()
            .unwrap();
        assert_eq!(g.tree().n_players(), 7);
        let g = GameSpec::from_json(r#"{"game_kind": "security", "params": {"kappa": 0.1}}"#).unwrap().build().unwrap();
        assert_eq!(g.tree().level_sizes(), &[1, 3, 6]);
        let g = GameSpec::from_json(r#"{"game_kind": "public_goods"}"#).unwrap().build().unwrap();
        assert_eq!(g.tree().n_players(), 37);
        let g = GameSpec::from_json(r#"{"game_kind": "polynomial", "instance": "p112"}"#).unwrap().build().unwrap();
        assert_eq!(g.tree().level_sizes(), &[1, 1, 2]);
    }

    #[test]
    fn rejects_inconsistent_specs() {
        let bad = [
            r#"{"game_kind": "polynomial"}"#,
            r#"{"game_kind": "polynomial", "instance": "p999"}"#,
            r#"{"levels": [1, 4], "game_kind": "security"}"#,
            r#"{"game_kind": "mystery"}"#,
            r#"{"levels": [1, 1], "parents": [null, 0], "game_kind": "polynomial",
                "utilities": [[{"coef": 1.0, "vars": [[5, 1]]}], []]}"#,
        ];
        for text in bad {
            assert!(GameSpec::from_json(text).and_then(|s| s.build()).is_err(), "{text}");
        }
    }
}
