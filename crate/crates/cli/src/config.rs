//! Experiment configuration files and command-line overrides.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use serde::{Deserialize, Serialize};
use shg_core::brd::{BrdConfig, Grid};
use shg_core::fields::FieldKind;
use shg_core::games::{builtin, DynGame, GameSpec, BUILTINS};
use shg_core::{GameTree, Interval, SolverConfig};

/// A built-in name, a path to a game definition file, or an inline
/// definition.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GameRef {
    Named(String),
    Inline(Box<GameSpec>),
}

impl GameRef {
    /// Builds the game. Relative paths resolve against `base`.
    pub fn build(&self, seed: u64, base: &Path) -> anyhow::Result<DynGame> {
        match self {
            GameRef::Named(name) if BUILTINS.contains(&name.as_str()) => Ok(builtin(name, seed)?),
            GameRef::Named(path) => {
                let p = base.join(path);
                let text = std::fs::read_to_string(&p).with_context(|| {
                    format!("'{path}' is neither a built-in game ({}) nor a readable file", BUILTINS.join(", "))
                })?;
                let mut spec = GameSpec::from_json(&text)?;
                resolve_paths(&mut spec, p.parent().unwrap_or(Path::new(".")));
                Ok(spec.build()?)
            }
            GameRef::Inline(spec) => {
                let mut spec = (**spec).clone();
                resolve_paths(&mut spec, base);
                Ok(spec.build()?)
            }
        }
    }

    pub fn label(&self) -> String {
        match self {
            GameRef::Named(n) => n.clone(),
            GameRef::Inline(_) => "inline".into(),
        }
    }
}

fn resolve_paths(spec: &mut GameSpec, base: &Path) {
    if let shg_core::games::spec::GameKind::PublicGoods { network, partition, .. } = &mut spec.kind {
        for p in [network, partition].into_iter().flatten() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverName {
    Dbi,
    Sim,
    Sym,
    SymAln,
    Co,
    Ham,
    Brd,
}

impl SolverName {
    pub const ALL: [SolverName; 7] =
        [SolverName::Dbi, SolverName::Sim, SolverName::Sym, SolverName::SymAln, SolverName::Co, SolverName::Ham, SolverName::Brd];

    pub fn name(&self) -> &'static str {
        match self {
            SolverName::Dbi => "dbi",
            SolverName::Sim => "sim",
            SolverName::Sym => "sym",
            SolverName::SymAln => "sym_aln",
            SolverName::Co => "co",
            SolverName::Ham => "ham",
            SolverName::Brd => "brd",
        }
    }

    pub fn parse(s: &str) -> anyhow::Result<Self> {
        SolverName::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .with_context(|| format!("unknown solver '{s}' (known: dbi, sim, sym, sym_aln, co, ham, brd)"))
    }

    /// The gradient field iterated by a baseline solver.
    pub fn field(&self, gamma: f64) -> Option<FieldKind> {
        match self {
            SolverName::Sim => Some(FieldKind::Sim),
            SolverName::Sym => Some(FieldKind::Sym),
            SolverName::SymAln => Some(FieldKind::SymAln),
            SolverName::Co => Some(FieldKind::Co { gamma }),
            SolverName::Ham => Some(FieldKind::Ham),
            SolverName::Dbi | SolverName::Brd => None,
        }
    }
}

/// Grid and best-response settings shared by BRD and global regret.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GridSettings {
    /// Points per action dimension.
    pub points: Option<usize>,
    /// Spacing; overrides `points`.
    pub step: Option<f64>,
    /// Range used for unbounded dimensions.
    pub unbounded: Option<Interval>,
    /// Best-response rounds per subgame solve.
    pub rounds: Option<usize>,
}

impl GridSettings {
    /// Fills unset fields with the defaults for `tree`: 101 points and 100
    /// rounds for two-level epidemic games, 11 points and 20 rounds for
    /// three-level ones, 11 points and 2 rounds otherwise.
    pub fn resolved(&self, game_label: &str, tree: &GameTree) -> GridSettings {
        let epidemic = game_label.starts_with("epidemic");
        let (points, rounds) = match (epidemic, tree.n_levels()) {
            (true, 2) => (101, 100),
            (true, _) => (11, 20),
            _ => (11, 2),
        };
        GridSettings {
            points: Some(self.points.unwrap_or(points)),
            step: self.step,
            unbounded: Some(self.unbounded.unwrap_or(Interval::new(-1.0, 1.0))),
            rounds: Some(self.rounds.unwrap_or(rounds)),
        }
    }

    /// Requires [`GridSettings::resolved`] first.
    pub fn grid(&self, tree: &GameTree) -> anyhow::Result<Grid> {
        let fallback = self.unbounded.expect("resolved");
        Ok(match self.step {
            Some(step) => Grid::with_step(tree, step, fallback)?,
            None => Grid::uniform(tree, self.points.expect("resolved"), fallback)?,
        })
    }

    pub fn brd(&self, seed: u64) -> BrdConfig {
        BrdConfig::new(self.rounds.expect("resolved"), seed)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolverEntry {
    pub solver: SolverName,
    /// Step size, iteration budget, tolerance and initialization for the
    /// gradient solvers. The experiment seed replaces `seed`.
    #[serde(default)]
    pub config: Option<SolverConfig>,
    /// Consensus-optimization weight.
    #[serde(default)]
    pub gamma: Option<f64>,
    /// BRD grid; falls back to the experiment's regret grid.
    #[serde(default)]
    pub grid: Option<GridSettings>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct RegretSettings {
    pub global: bool,
    pub local: bool,
    pub grid: GridSettings,
}

impl Default for RegretSettings {
    fn default() -> Self {
        RegretSettings { global: true, local: false, grid: GridSettings::default() }
    }
}

fn default_checkpoints() -> usize {
    20
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub game: GameRef,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub solvers: Vec<SolverEntry>,
    #[serde(default)]
    pub regret: RegretSettings,
    #[serde(default)]
    pub stability: Option<bool>,
    #[serde(default)]
    pub out: Option<PathBuf>,
    /// DBI regret checkpoints in `compare`.
    #[serde(default = "default_checkpoints")]
    pub checkpoints: usize,
}

/// Command-line values that override the file.
#[derive(Debug, Default, Clone)]
pub struct Overrides {
    pub game: Option<String>,
    pub solvers: Option<Vec<String>>,
    pub alpha: Option<f64>,
    pub iters: Option<usize>,
    pub seed: Option<u64>,
    pub grid: Option<usize>,
    pub out: Option<PathBuf>,
}

/// Default gradient-solver settings for a built-in game: the step sizes
/// used in the experiments for each family.
pub fn default_solver_config(game_label: &str) -> SolverConfig {
    let (alpha, iters) = match game_label {
        "p111" | "p111_3d" => (1e-5, 1_000_000),
        "p112" => (4e-6, 1_000_000),
        l if l.starts_with("epidemic") => (0.01, 100_000),
        _ => (0.1, 100_000),
    };
    SolverConfig::new(alpha, iters, 1e-6, 0)
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("cannot read config {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("invalid config {}", path.display()))
    }

    /// Config from flags alone.
    pub fn from_overrides(o: &Overrides) -> anyhow::Result<Self> {
        let Some(game) = &o.game else { bail!("either --config or --game is required") };
        Ok(ExperimentConfig {
            game: GameRef::Named(game.clone()),
            seed: 0,
            solvers: Vec::new(),
            regret: RegretSettings::default(),
            stability: None,
            out: None,
            checkpoints: default_checkpoints(),
        })
    }

    pub fn apply(&mut self, o: &Overrides, default_solvers: &[SolverName]) -> anyhow::Result<()> {
        if let Some(g) = &o.game {
            self.game = GameRef::Named(g.clone());
        }
        if let Some(s) = o.seed {
            self.seed = s;
        }
        if let Some(list) = &o.solvers {
            let mut entries = Vec::new();
            for name in list {
                let solver = SolverName::parse(name.trim())?;
                let existing = self.solvers.iter().find(|e| e.solver == solver).cloned();
                entries.push(existing.unwrap_or(SolverEntry { solver, config: None, gamma: None, grid: None }));
            }
            self.solvers = entries;
        }
        if self.solvers.is_empty() {
            self.solvers =
                default_solvers.iter().map(|&solver| SolverEntry { solver, config: None, gamma: None, grid: None }).collect();
        }
        let label = self.game.label();
        for e in &mut self.solvers {
            let mut c = e.config.clone().unwrap_or_else(|| default_solver_config(&label));
            if let Some(a) = o.alpha {
                c.learning_rate = a;
            }
            if let Some(t) = o.iters {
                c.max_iters = t;
            }
            c.seed = self.seed;
            e.config = Some(c);
            if let (Some(n), Some(g)) = (o.grid, e.grid.as_mut()) {
                g.points = Some(n);
                g.step = None;
            }
        }
        if let Some(n) = o.grid {
            self.regret.grid.points = Some(n);
            self.regret.grid.step = None;
        }
        if let Some(out) = &o.out {
            self.out = Some(out.clone());
        }
        self.validate()
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        if self.solvers.is_empty() {
            bail!("at least one solver is required");
        }
        for e in &self.solvers {
            if let Some(c) = &e.config {
                c.validate()?;
            }
            if let Some(g) = e.gamma {
                if !(g > 0.0) {
                    bail!("consensus weight must be positive");
                }
            }
        }
        if self.checkpoints == 0 {
            bail!("checkpoints must be at least 1");
        }
        Ok(())
    }
}
