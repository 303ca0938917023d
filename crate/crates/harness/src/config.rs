//! Strict TOML run configurations.
//!
//! ```toml
//! output_dir = "runs/bump"   # relative paths resolve against the output root
//! seed = 7
//!
//! [grid]
//! cells = [64, 64]
//! lengths = [1.0, 1.0]
//!
//! [params]
//! chi = 1.0
//! mu = 1.0
//! m = 1.5
//!
//! [solver]
//! t_end = 10.0
//!
//! [initial]
//! kind = "gaussian-bump"
//! amplitude = 10.0
//! width = 0.1
//! ```
//!
//! Unknown keys anywhere are errors; omitted optional keys take the documented defaults.

use std::path::{Path, PathBuf};

use chemotaxis_core::{DiagConfig, GridSpec, ModelParams, SolverConfig};
use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};

/// Environment variable that overrides the directory relative output paths resolve against.
pub const OUTPUT_ROOT_ENV: &str = "CHEMOTAXIS_OUTPUT_ROOT";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub cells: Vec<usize>,
    pub lengths: Vec<f64>,
}

impl GridConfig {
    pub fn spec(&self) -> Result<GridSpec> {
        Ok(GridSpec::new(&self.cells, &self.lengths)?)
    }
}

fn one() -> f64 {
    1.0
}

/// Named initial-data generators. `v` is the (constant) initial chemoattractant level.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum InitialCondition {
    /// Constant `u` and `v`.
    Uniform { u: f64, v: f64 },
    /// `background + amplitude · exp(−|x − center|² / (2 width²))`; the centre defaults to the
    /// middle of the domain.
    GaussianBump {
        amplitude: f64,
        width: f64,
        #[serde(default)]
        center: Option<Vec<f64>>,
        #[serde(default)]
        background: f64,
        #[serde(default = "one")]
        v: f64,
    },
    /// `mean + amplitude · ξ` with `ξ` uniform on `[−1, 1]` from the run seed, clipped at zero;
    /// `v` gets independent noise of size `v_amplitude`.
    RandomPerturbation {
        #[serde(default = "one")]
        mean: f64,
        amplitude: f64,
        #[serde(default = "one")]
        v: f64,
        #[serde(default)]
        v_amplitude: f64,
    },
}

impl InitialCondition {
    pub fn name(&self) -> &'static str {
        match self {
            InitialCondition::Uniform { .. } => "uniform",
            InitialCondition::GaussianBump { .. } => "gaussian-bump",
            InitialCondition::RandomPerturbation { .. } => "random-perturbation",
        }
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        let nonneg = |name: &str, x: f64| {
            if x.is_finite() && x >= 0.0 {
                Ok(())
            } else {
                Err(HarnessError::Invalid(format!(
                    "`initial.{name}` must be nonnegative and finite (got {x})"
                )))
            }
        };
        match self {
            InitialCondition::Uniform { u, v } => {
                nonneg("u", *u)?;
                nonneg("v", *v)
            }
            InitialCondition::GaussianBump {
                amplitude,
                width,
                center,
                background,
                v,
            } => {
                nonneg("amplitude", *amplitude)?;
                nonneg("background", *background)?;
                nonneg("v", *v)?;
                if !(width.is_finite() && *width > 0.0) {
                    return Err(HarnessError::Invalid(format!(
                        "`initial.width` must be positive (got {width})"
                    )));
                }
                if let Some(c) = center {
                    if c.len() != dim || c.iter().any(|x| !x.is_finite()) {
                        return Err(HarnessError::Invalid(format!(
                            "`initial.center` needs {dim} finite coordinates"
                        )));
                    }
                }
                Ok(())
            }
            InitialCondition::RandomPerturbation {
                mean,
                amplitude,
                v,
                v_amplitude,
            } => {
                nonneg("mean", *mean)?;
                nonneg("amplitude", *amplitude)?;
                nonneg("v", *v)?;
                nonneg("v_amplitude", *v_amplitude)
            }
        }
    }
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("output")
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub grid: GridConfig,
    pub params: ModelParams,
    pub solver: SolverConfig,
    #[serde(default)]
    pub diag: DiagConfig,
    pub initial: InitialCondition,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub seed: u64,
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        let spec = self.grid.spec()?;
        self.params.validate()?;
        self.solver.validate()?;
        self.diag.validate()?;
        self.initial.validate(spec.dim())
    }

    pub fn spec(&self) -> Result<GridSpec> {
        self.grid.spec()
    }

    /// `output_dir` resolved against `root` when relative.
    pub fn resolve_output_dir(&self, root: &Path) -> PathBuf {
        if self.output_dir.is_absolute() {
            self.output_dir.clone()
        } else {
            root.join(&self.output_dir)
        }
    }
}

/// The root relative output paths resolve against: `$CHEMOTAXIS_OUTPUT_ROOT` or the working
/// directory.
pub fn output_root() -> PathBuf {
    std::env::var_os(OUTPUT_ROOT_ENV)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("."))
}

/// 1-based line and column of a byte offset.
pub(crate) fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let offset = offset.min(text.len());
    let before = &text[..offset];
    let line = before.matches('\n').count() + 1;
    let column = before.rfind('\n').map_or(offset, |p| offset - p - 1) + 1;
    (line, column)
}

/// Deserialises TOML strictly, mapping errors to their position in `text`.
pub(crate) fn parse_toml<T: serde::de::DeserializeOwned>(text: &str, origin: &str) -> Result<T> {
    toml::from_str(text).map_err(|e| {
        let (line, column) = e.span().map_or((0, 0), |s| line_col(text, s.start));
        HarnessError::Parse {
            path: origin.to_string(),
            line,
            column,
            message: e.message().to_string(),
        }
    })
}

pub fn parse_config(text: &str, origin: &str) -> Result<RunConfig> {
    let cfg: RunConfig = parse_toml(text, origin)?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
    parse_config(&text, &path.display().to_string())
}
