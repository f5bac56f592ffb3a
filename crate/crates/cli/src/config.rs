//! Experiment configuration: a JSON document describing one fixture and one experiment.
//!
//! ```json
//! {
//!   "fixture": {
//!     "blocks": [2],
//!     "state": "random",
//!     "d": 2,
//!     "action": { "mode": "random-unitary" },
//!     "seed": 1
//!   },
//!   "experiment": "identities",
//!   "params": { "n_max": 4 }
//! }
//! ```
//!
//! Randomness comes from one ChaCha8 generator seeded with `fixture.seed`, drawn in a
//! fixed order: the state, then the generators `σ_1, …, σ_d` (random-unitary mode),
//! then the experiment's own samples.

use std::fmt;
use std::path::PathBuf;

use ncergo_core::fixtures::StateMode;
use ncergo_core::free::TransitionSystem;
use schemars::{json_schema, JsonSchema, Schema, SchemaGenerator};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub fixture: FixtureSpec,
    pub experiment: Selector,
    #[serde(default)]
    pub params: Params,
    #[serde(default)]
    pub output: OutputSpec,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct FixtureSpec {
    /// Block sizes `d_k` of `A = ⊕ M_{d_k}`.
    pub blocks: Vec<usize>,
    #[schemars(schema_with = "state_mode_schema")]
    pub state: StateMode,
    /// Number of free generators.
    pub d: usize,
    pub action: ActionSpec,
    #[serde(default)]
    pub seed: u64,
}

fn state_mode_schema(_: &mut SchemaGenerator) -> Schema {
    json_schema!({
        "description": "Spectrum of the density: uniform, random, or random with one eigenvalue at 1e-6.",
        "type": "string",
        "enum": ["tracial", "random", "near-degenerate"]
    })
}

/// The JSON Schema of [`ExperimentConfig`].
pub fn schema() -> Schema {
    schemars::schema_for!(ExperimentConfig)
}

/// The schema as pretty JSON, as committed in `config.schema.json`.
pub fn schema_text() -> String {
    let mut text = serde_json::to_string_pretty(&schema()).expect("schema serializes");
    text.push('\n');
    text
}

/// How the generators `σ_1, …, σ_d` are built.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(tag = "mode", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ActionSpec {
    /// `(σ_i x)_k = x_{perm_i[k]}` on a commutative space.
    Permutation { perms: Vec<Vec<usize>> },
    /// Conjugation by random unitaries commuting with the density.
    RandomUnitary,
    /// Conjugation by the given unitaries: generator → block → row → entry `[re, im]`.
    Unitaries { unitaries: Vec<Vec<Vec<Vec<[f64; 2]>>>> },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "kebab-case")]
pub enum Selector {
    Identities,
    Dilation,
    Rota,
    S2n,
    Cesaro,
    BufetovVsBrute,
    Adjoints,
    LpContraction,
}

impl Selector {
    pub const ALL: [Selector; 8] = [
        Selector::Identities,
        Selector::Dilation,
        Selector::Rota,
        Selector::S2n,
        Selector::Cesaro,
        Selector::BufetovVsBrute,
        Selector::Adjoints,
        Selector::LpContraction,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Selector::Identities => "identities",
            Selector::Dilation => "dilation",
            Selector::Rota => "rota",
            Selector::S2n => "s2n",
            Selector::Cesaro => "cesaro",
            Selector::BufetovVsBrute => "bufetov-vs-brute",
            Selector::Adjoints => "adjoints",
            Selector::LpContraction => "lp-contraction",
        }
    }
}

impl fmt::Display for Selector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Experiment parameters. Missing values fall back to per-experiment defaults.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct Params {
    pub n_max: Option<usize>,
    pub depth: Option<usize>,
    /// Finite L^p indices, each at least 1.
    pub p: Option<Vec<f64>>,
    /// Include `p = ∞` alongside `p`.
    pub p_inf: Option<bool>,
    pub tol: Option<f64>,
    pub tol_conv: Option<f64>,
    pub samples: Option<usize>,
    /// Number of random maps drawn by the map-level experiments.
    pub maps: Option<usize>,
    /// Diagonal entries of the test element for the limit experiments on a commutative
    /// space; a random Hermitian element is drawn when absent.
    pub x: Option<Vec<f64>>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    pub dir: Option<PathBuf>,
    pub format: Option<Format>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, JsonSchema, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

/// Resource caps checked before any computation starts.
pub const MAX_DEPTH: usize = 4;
pub const MAX_N: usize = 100_000;
pub const MAX_SAMPLES: usize = 10_000;

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let cfg: ExperimentConfig =
            serde_json::from_str(text).map_err(|e| CliError::Config(format!("invalid config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Schema-level checks that do not need the fixture.
    pub fn validate(&self) -> Result<(), CliError> {
        let f = &self.fixture;
        if f.blocks.is_empty() || f.blocks.contains(&0) {
            return Err(CliError::Config(
                "blocks must be a nonempty list of positive sizes".into(),
            ));
        }
        // Rejects d < 2 with the library's own message.
        TransitionSystem::nevo_stein(f.d).map_err(|e| CliError::Config(e.to_string()))?;
        match &f.action {
            ActionSpec::Permutation { perms } if perms.len() != f.d => {
                return Err(CliError::Config(format!(
                    "{} permutations given for d = {}",
                    perms.len(),
                    f.d
                )));
            }
            ActionSpec::Unitaries { unitaries } if unitaries.len() != f.d => {
                return Err(CliError::Config(format!(
                    "{} unitaries given for d = {}",
                    unitaries.len(),
                    f.d
                )));
            }
            _ => {}
        }
        let p = &self.params;
        for (name, v) in [("tol", p.tol), ("tol_conv", p.tol_conv)] {
            if let Some(v) = v {
                if v <= 0.0 || !v.is_finite() {
                    return Err(CliError::Config(format!("{name} must be positive, got {v}")));
                }
            }
        }
        if let Some(ps) = &p.p {
            if let Some(bad) = ps.iter().find(|&&v| v.is_nan() || v < 1.0) {
                return Err(CliError::Config(format!("p values must be >= 1, got {bad}")));
            }
        }
        if let Some(r) = p.depth {
            if r > MAX_DEPTH {
                return Err(CliError::ResourceCap(format!("depth {r} exceeds the cap {MAX_DEPTH}")));
            }
        }
        if let Some(n) = p.n_max {
            if n > MAX_N {
                return Err(CliError::ResourceCap(format!("n_max {n} exceeds the cap {MAX_N}")));
            }
        }
        for (name, v) in [("samples", p.samples), ("maps", p.maps)] {
            if let Some(v) = v {
                if v > MAX_SAMPLES {
                    return Err(CliError::ResourceCap(format!(
                        "{name} {v} exceeds the cap {MAX_SAMPLES}"
                    )));
                }
            }
        }
        if let Some(x) = &p.x {
            if x.len() != f.blocks.len() || f.blocks.iter().any(|&b| b != 1) {
                return Err(CliError::Config(
                    "x needs a commutative space with one entry per point".into(),
                ));
            }
        }
        Ok(())
    }
}
