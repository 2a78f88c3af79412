//! Run configuration: JSON ingestion, defaults and validation.

use std::fmt;
use std::path::{Path, PathBuf};

use sdgame_core::game::{builtin, AffineGame};
use sdgame_core::{Domain, GameSpec, ParamPoint, SolveOptions};
use serde::Deserialize;

use crate::registry;

/// A configuration problem: exit code 2.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

fn bad<T>(msg: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError(msg.into()))
}

/// A builtin name, `{"builtin": ..}` or `{"inline": ..}`.
#[derive(Clone, Debug)]
pub enum GameSource {
    Name(String),
    Builtin {
        builtin: String,
        drift_scale: Option<f64>,
        /// Restrict the parameter set to `p̄`.
        base_only: bool,
    },
    Inline {
        inline: Box<AffineGame>,
    },
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct BuiltinRef {
    builtin: String,
    #[serde(default)]
    drift_scale: Option<f64>,
    #[serde(default)]
    base_only: bool,
}

impl<'de> Deserialize<'de> for GameSource {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        use serde::de::Error as _;
        let v = serde_json::Value::deserialize(d)?;
        match v {
            serde_json::Value::String(s) => Ok(GameSource::Name(s)),
            serde_json::Value::Object(ref m) if m.contains_key("inline") => {
                if m.len() != 1 {
                    return Err(D::Error::custom("game: an inline game object takes only the \"inline\" key"));
                }
                let g = AffineGame::deserialize(&m["inline"]).map_err(|e| D::Error::custom(format!("game.inline: {e}")))?;
                Ok(GameSource::Inline { inline: Box::new(g) })
            }
            serde_json::Value::Object(_) => {
                let b = BuiltinRef::deserialize(&v).map_err(|e| D::Error::custom(format!("game: {e}")))?;
                Ok(GameSource::Builtin {
                    builtin: b.builtin,
                    drift_scale: b.drift_scale,
                    base_only: b.base_only,
                })
            }
            _ => Err(D::Error::custom("game: expected a builtin name or an object")),
        }
    }
}

/// How a player is driven in `simulate`.
#[derive(Clone, Debug, Default, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum Play {
    /// The ε-optimal mesh construction from the solved field.
    #[default]
    Saddle,
    Constant(usize),
}

#[derive(Clone, Debug, Default, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum RuleConfig {
    #[default]
    ConstantBase,
    TimeChangeRotation {
        scale: f64,
        #[serde(default)]
        rotation: Option<Vec<f64>>,
    },
}

impl RuleConfig {
    pub fn to_rule(&self) -> sdgame_core::ParamProcessRule {
        match self {
            RuleConfig::ConstantBase => sdgame_core::ParamProcessRule::ConstantBase,
            RuleConfig::TimeChangeRotation { scale, rotation } => {
                sdgame_core::ParamProcessRule::TimeChangeRotation(ParamPoint {
                    scale: *scale,
                    rotation: rotation.clone(),
                })
            }
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateConfig {
    #[serde(default = "ten")]
    pub n_paths: usize,
    #[serde(default)]
    pub alpha: Play,
    #[serde(default)]
    pub beta: Play,
    #[serde(default)]
    pub rule: RuleConfig,
}

fn ten() -> usize {
    10
}

impl Default for SimulateConfig {
    fn default() -> Self {
        SimulateConfig {
            n_paths: 10,
            alpha: Play::Saddle,
            beta: Play::Saddle,
            rule: RuleConfig::ConstantBase,
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExhaustionConfig {
    /// Levels `n` of the shrunken domains `D_n`, shrink radius `2⁻ⁿ`.
    #[serde(default = "levels")]
    pub levels: Vec<u32>,
    #[serde(default = "five_milli")]
    pub tol: f64,
}

fn levels() -> Vec<u32> {
    (2..=6).collect()
}

fn five_milli() -> f64 {
    5e-3
}

impl Default for ExhaustionConfig {
    fn default() -> Self {
        ExhaustionConfig {
            levels: levels(),
            tol: five_milli(),
        }
    }
}

/// The on-disk configuration.
#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub game: GameSource,
    #[serde(default)]
    pub domain: Option<Domain>,
    /// Lattice spacing of the value solve.
    pub h: f64,
    /// Lattice spacing of the field the strategies are built from
    /// (defaults to `h`).
    #[serde(default)]
    pub strategy_h: Option<f64>,
    pub dt: f64,
    pub n_paths: usize,
    pub seed: u64,
    /// Defaults to the centre of the domain's bounding box.
    #[serde(default)]
    pub x0: Option<Vec<f64>>,
    #[serde(default)]
    pub solver: SolveOptions,
    /// Defaults to ten times the solver tolerance.
    #[serde(default)]
    pub eps: Option<f64>,
    /// Strategy mesh `n`; defaults to `⌈1/(10·dt)⌉`.
    #[serde(default)]
    pub mesh: Option<u32>,
    #[serde(default)]
    pub t_cap: Option<f64>,
    #[serde(default = "yes")]
    pub bridge: bool,
    #[serde(default)]
    pub allow_cap: bool,
    #[serde(default = "full")]
    pub checks: Vec<String>,
    #[serde(default = "out_dir")]
    pub out: PathBuf,
    #[serde(default)]
    pub simulate: SimulateConfig,
    #[serde(default)]
    pub exhaustion: ExhaustionConfig,
    #[serde(default = "checkpoints")]
    pub checkpoints: Vec<f64>,
    /// Paths per calibration start in the moment checks.
    #[serde(default = "calib_paths")]
    pub calib_paths: usize,
    #[serde(default = "max_power")]
    pub max_power: u32,
    /// Fixed time `T` of the `dpp` fixed-time rule.
    #[serde(default = "dpp_time")]
    pub dpp_time: f64,
    /// Bias allowance of `p_invariance`; defaults to `2·dt`.
    #[serde(default)]
    pub p_allowance: Option<f64>,
}

fn yes() -> bool {
    true
}

fn full() -> Vec<String> {
    vec!["full".to_string()]
}

fn out_dir() -> PathBuf {
    PathBuf::from("out")
}

fn checkpoints() -> Vec<f64> {
    vec![0.05, 0.1, 0.2, 0.4]
}

fn calib_paths() -> usize {
    2000
}

fn max_power() -> u32 {
    4
}

fn dpp_time() -> f64 {
    0.05
}

/// Parses JSON text; syntax and type errors carry `line:column`.
pub fn parse(text: &str, origin: &str) -> Result<RunConfig, ConfigError> {
    let cfg: RunConfig = serde_json::from_str(text).map_err(|e| ConfigError(format!("{origin}:{}:{}: {e}", e.line(), e.column())))?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn load(path: &Path) -> Result<RunConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|e| ConfigError(format!("{}: {e}", path.display())))?;
    parse(&text, &path.display().to_string())
}

fn positive(name: &str, v: f64) -> Result<(), ConfigError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        bad(format!("{name} must be positive and finite, got {v}"))
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        positive("h", self.h)?;
        positive("dt", self.dt)?;
        positive("solver.tol", self.solver.tol)?;
        positive("dpp_time", self.dpp_time)?;
        positive("exhaustion.tol", self.exhaustion.tol)?;
        for (name, v) in [("strategy_h", self.strategy_h), ("eps", self.eps), ("t_cap", self.t_cap), ("p_allowance", self.p_allowance)] {
            if let Some(v) = v {
                positive(name, v)?;
            }
        }
        if self.n_paths < 2 {
            return bad("n_paths must be at least 2");
        }
        if self.simulate.n_paths == 0 || self.calib_paths < 2 {
            return bad("simulate.n_paths and calib_paths must be positive");
        }
        if self.mesh == Some(0) {
            return bad("mesh must be positive");
        }
        if self.solver.max_outer == 0 || self.solver.max_inner == 0 {
            return bad("solver iteration limits must be positive");
        }
        if !(1..=4).contains(&self.max_power) {
            return bad("max_power must lie in 1..=4");
        }
        if self.checkpoints.is_empty() || self.checkpoints.iter().any(|&t| !(t > 0.0)) || self.checkpoints.windows(2).any(|w| !(w[1] > w[0])) {
            return bad("checkpoints must be positive and increasing");
        }
        if self.exhaustion.levels.is_empty() {
            return bad("exhaustion.levels must be nonempty");
        }
        registry::expand(&self.checks).map_err(ConfigError)?;
        Ok(())
    }

    /// `--seed` and `--checks` overrides.
    pub fn apply_overrides(&mut self, seed: Option<u64>, checks: Option<Vec<String>>, out: Option<PathBuf>) -> Result<(), ConfigError> {
        if let Some(s) = seed {
            self.seed = s;
        }
        if let Some(c) = checks {
            registry::expand(&c).map_err(ConfigError)?;
            self.checks = c;
        }
        if let Some(o) = out {
            self.out = o;
        }
        Ok(())
    }

    pub fn game(&self) -> Result<(GameSpec, Domain), ConfigError> {
        let core = |e: sdgame_core::Error| ConfigError(format!("game: {e}"));
        let (spec, dom) = match &self.game {
            GameSource::Name(name) => {
                let g = builtin::load(name).map_err(core)?;
                (g.spec, Some(g.domain))
            }
            GameSource::Builtin {
                builtin: name,
                drift_scale,
                base_only,
            } => {
                let g = match drift_scale {
                    Some(s) if name == "bm1d" => builtin::bm1d_with_drift_scale(*s).map_err(core)?,
                    Some(_) => return bad("drift_scale is only available for bm1d"),
                    None => builtin::load(name).map_err(core)?,
                };
                let spec = if *base_only { g.spec.base_only() } else { g.spec };
                (spec, Some(g.domain))
            }
            GameSource::Inline { inline } => ((**inline).clone().into_spec().map_err(core)?, None),
        };
        let dom = match (&self.domain, dom) {
            (Some(d), _) => d.clone(),
            (None, Some(d)) => d,
            (None, None) => return bad("an inline game needs a domain"),
        };
        dom.validate().map_err(core)?;
        if dom.dim() != spec.dim {
            return bad(format!("domain has dimension {}, game has {}", dom.dim(), spec.dim));
        }
        if let Some(x0) = &self.x0 {
            if x0.len() != spec.dim {
                return bad(format!("x0 must have {} coordinates", spec.dim));
            }
        }
        Ok((spec, dom))
    }

    pub fn x0(&self, dom: &Domain) -> Vec<f64> {
        self.x0.clone().unwrap_or_else(|| {
            let (lo, hi) = dom.bounding_box();
            lo.iter().zip(&hi).map(|(a, b)| 0.5 * (a + b)).collect()
        })
    }

    pub fn eps(&self) -> f64 {
        self.eps.unwrap_or_else(|| sdgame_core::strategy::default_eps(self.solver.tol))
    }

    pub fn mesh(&self) -> u32 {
        self.mesh.unwrap_or_else(|| sdgame_core::strategy::default_mesh(self.dt))
    }

    pub fn mc(&self) -> sdgame_core::McConfig {
        sdgame_core::McConfig {
            dt: self.dt,
            n_paths: self.n_paths,
            seed: self.seed,
            t_cap: self.t_cap,
            first_path: 0,
            bridge: self.bridge,
            allow_cap: self.allow_cap,
        }
    }
}
