//! Declarative run configuration (TOML). Command-line flags override it.
//!
//! ```toml
//! assets = "db"          # relative to this file
//! seed = 7
//! threads = 4
//!
//! [match]
//! k_cat = 3
//! k_cous = 3
//! selector_path = "embedding_only"
//!
//! [compile]
//! cousin_rank = 1
//! [compile.post]
//! wall_proximity = 0.05
//!
//! [randomize]
//! xy_jitter = 0.05
//!
//! [eval]
//! centrosymmetric = ["bowl"]
//!
//! [traj]
//! waypoints = 32
//! ```

use std::path::{Path, PathBuf};

use acdc_core::affordance::HandleParams;
use acdc_core::matching::MatchConfig;
use acdc_core::metrics::SymmetryTable;
use acdc_core::scenegen::{CompileConfig, RandomizationSpec};
use serde::{Deserialize, Serialize};

use crate::error::IoError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    /// Categories evaluated modulo a half turn about z.
    pub centrosymmetric: Vec<String>,
    /// Explicit symmetry groups; merged with `centrosymmetric`.
    pub symmetry: SymmetryTable,
}

impl EvalConfig {
    pub fn table(&self) -> SymmetryTable {
        let mut t = SymmetryTable::with_centrosymmetric(self.centrosymmetric.iter().map(String::as_str));
        for (k, v) in &self.symmetry.categories {
            t.categories.insert(k.clone(), v.clone());
        }
        t
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrajConfig {
    pub waypoints: usize,
    pub handle: HandleParams,
}

impl Default for TrajConfig {
    fn default() -> Self {
        TrajConfig {
            waypoints: 32,
            handle: HandleParams::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub assets: Option<PathBuf>,
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    #[serde(rename = "match")]
    pub matching: MatchConfig,
    pub compile: CompileConfig,
    pub randomize: RandomizationSpec,
    pub eval: EvalConfig,
    pub traj: TrajConfig,
}

impl RunConfig {
    /// Parses a config file; a relative `assets` path is taken relative to it.
    pub fn load(path: &Path) -> Result<RunConfig, IoError> {
        let text = std::fs::read_to_string(path).map_err(IoError::io(path))?;
        let mut cfg: RunConfig = toml::from_str(&text).map_err(|e| IoError::parse(path, e))?;
        if let (Some(a), Some(dir)) = (&cfg.assets, path.parent()) {
            if a.is_relative() {
                cfg.assets = Some(dir.join(a));
            }
        }
        Ok(cfg)
    }
}
