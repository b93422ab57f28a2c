//! Experiment configuration: a versioned JSON document.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use subgraph_stein::copies::{DEFAULT_CHAIN6_BUDGET, DEFAULT_COPY_LIMIT, DEFAULT_TRIPLE_BUDGET};
use subgraph_stein::exact::OracleOptions;
use subgraph_stein::pattern::PatternGraph;

use crate::CliError;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PatternSpec {
    Preset(String),
    EdgeList { edge_list: PathBuf },
}

/// `p` as a constant or as `θ n^{−α}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum PSpec {
    Fixed(f64),
    Power { theta: f64, alpha: f64 },
}

impl PSpec {
    pub fn at(&self, n: usize) -> f64 {
        match *self {
            PSpec::Fixed(p) => p,
            PSpec::Power { theta, alpha } => theta * (n as f64).powf(-alpha),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum TGridSpec {
    /// derived from `A` per point
    #[default]
    Default,
    Points(Vec<f64>),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Budgets {
    /// largest number of edge configurations the exact oracle may visit
    pub configs: u64,
    pub copies: u128,
    pub triple: u128,
    pub chain6: u128,
}

impl Default for Budgets {
    fn default() -> Self {
        Self {
            configs: 1 << OracleOptions::default().max_edges,
            copies: DEFAULT_COPY_LIMIT,
            triple: DEFAULT_TRIPLE_BUDGET,
            chain6: DEFAULT_CHAIN6_BUDGET,
        }
    }
}

impl Budgets {
    pub fn oracle_options(&self) -> OracleOptions {
        let max_edges = if self.configs == 0 { 0 } else { self.configs.ilog2() as usize };
        OracleOptions {
            max_edges,
            ..OracleOptions::default()
        }
    }
}

/// Small-`n` sweeps for the fitted shape constants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct FitSpec {
    pub triple_n: Option<Vec<usize>>,
    pub chain_n: Option<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema: u32,
    pub pattern: PatternSpec,
    pub n_grid: Vec<usize>,
    pub p: PSpec,
    pub m: usize,
    pub seed: u64,
    #[serde(default = "default_p0")]
    pub p0: f64,
    #[serde(default)]
    pub t_grid: TGridSpec,
    #[serde(default)]
    pub budgets: Budgets,
    #[serde(default)]
    pub fit: FitSpec,
    /// Monte Carlo draws for `A` and `B` where the oracle is out of reach; 0 skips them
    #[serde(default)]
    pub bounds_samples: usize,
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
}

fn default_p0() -> f64 {
    subgraph_stein::bounds::DEFAULT_P0
}

/// A validated configuration together with the resolved pattern.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub config: ExperimentConfig,
    pub pattern: PatternGraph,
    pub pattern_name: String,
    pub base_dir: PathBuf,
}

/// 1-based line of the first occurrence of `"key"` in `text`.
fn line_of_key(text: &str, key: &str) -> Option<usize> {
    let needle = format!("\"{key}\"");
    text.lines().position(|l| l.contains(&needle)).map(|i| i + 1)
}

impl LoadedConfig {
    pub fn from_path(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(|e| CliError::Config {
            line: None,
            message: format!("cannot read {}: {e}", path.display()),
        })?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::from_str(&text, &base)
    }

    pub fn from_str(text: &str, base_dir: &Path) -> Result<Self, CliError> {
        let config: ExperimentConfig = serde_json::from_str(text).map_err(|e| CliError::Config {
            line: Some(e.line()),
            message: e.to_string(),
        })?;
        let at = |key: &str, message: String| CliError::Config {
            line: line_of_key(text, key),
            message,
        };
        if config.schema != SCHEMA_VERSION {
            return Err(at(
                "schema",
                format!("unsupported schema {}, expected {SCHEMA_VERSION}", config.schema),
            ));
        }
        if config.n_grid.is_empty() {
            return Err(at("n_grid", "n_grid is empty".into()));
        }
        if config.n_grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(at("n_grid", "n_grid must be strictly increasing".into()));
        }
        if config.m < 100 {
            return Err(at("m", format!("m = {} is below the minimum of 100", config.m)));
        }
        if !(config.p0 > 0.0 && config.p0 < 1.0) {
            return Err(at("p0", format!("p0 = {} must lie in (0, 1)", config.p0)));
        }
        match config.p {
            PSpec::Fixed(p) if !(p > 0.0 && p < 1.0) => {
                return Err(at("p", format!("p = {p} must lie in (0, 1)")));
            }
            PSpec::Power { theta, alpha } => {
                if !(theta > 0.0 && theta.is_finite()) {
                    return Err(at("theta", format!("theta = {theta} must be positive")));
                }
                if !(0.0..1.0).contains(&alpha) {
                    return Err(at("alpha", format!("alpha = {alpha} must lie in [0, 1)")));
                }
                for &n in &config.n_grid {
                    let p = config.p.at(n);
                    if !(p > 0.0 && p < 1.0) {
                        return Err(at("p", format!("p({n}) = {p} falls outside (0, 1)")));
                    }
                }
            }
            _ => {}
        }
        if let TGridSpec::Points(ts) = &config.t_grid {
            if ts.is_empty() || ts.iter().any(|t| !t.is_finite()) {
                return Err(at("t_grid", "t_grid points must be finite and nonempty".into()));
            }
        }
        let (pattern, pattern_name) = match &config.pattern {
            PatternSpec::Preset(name) => (
                PatternGraph::preset(name).map_err(|e| at("pattern", e.to_string()))?,
                name.clone(),
            ),
            PatternSpec::EdgeList { edge_list } => {
                let path = base_dir.join(edge_list);
                let body = fs::read_to_string(&path).map_err(|e| {
                    at("edge_list", format!("cannot read {}: {e}", path.display()))
                })?;
                let g = PatternGraph::parse_edge_list(&body).map_err(|e| CliError::Config {
                    line: None,
                    message: format!("{}: {e}", path.display()),
                })?;
                (g, edge_list.display().to_string())
            }
        };
        let v = pattern.stripped().vertex_count();
        if config.n_grid[0] < v {
            return Err(at(
                "n_grid",
                format!("n = {} is smaller than the pattern's {v} vertices", config.n_grid[0]),
            ));
        }
        Ok(Self {
            config,
            pattern,
            pattern_name,
            base_dir: base_dir.to_path_buf(),
        })
    }

    /// SHA-256 of the effective configuration and the resolved pattern.
    pub fn hash(&self) -> String {
        let mut h = Sha256::new();
        h.update(serde_json::to_vec(&self.config).expect("config serializes"));
        h.update(self.pattern.stripped().to_string().as_bytes());
        hex::encode(h.finalize())
    }

    pub fn p_at(&self, n: usize) -> f64 {
        self.config.p.at(n)
    }
}
