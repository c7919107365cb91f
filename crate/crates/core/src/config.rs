//! Exploration settings, read from TOML.

use serde::{Deserialize, Serialize};

use crate::dse::{AreaWeights, Dedup, EnergyWeights, DEFAULT_TIME_BUDGET};
use crate::error::{Error, Result};
use crate::tiling::ArrayDims;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExploreConfig {
    /// `RxC`.
    pub array: String,
    /// Bank transfers per tensor per cycle; absent means unlimited.
    pub bandwidth_cap: Option<usize>,
    pub alphabet: Vec<i64>,
    /// Number of best-ranked points to simulate.
    pub top_k: usize,
    pub time_budget: usize,
    pub dedup: Dedup,
    pub seed: u64,
    pub area: AreaWeights,
    pub energy: EnergyWeights,
}

impl Default for ExploreConfig {
    fn default() -> Self {
        ExploreConfig {
            array: "16x16".into(),
            bandwidth_cap: None,
            alphabet: vec![-1, 0, 1],
            top_k: 0,
            time_budget: DEFAULT_TIME_BUDGET,
            dedup: Dedup::Signature,
            seed: 1,
            area: AreaWeights::default(),
            energy: EnergyWeights::default(),
        }
    }
}

impl ExploreConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ExploreConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.array_dims()?;
        if cfg.alphabet.is_empty() {
            return Err(Error::Config("alphabet is empty".into()));
        }
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn array_dims(&self) -> Result<ArrayDims> {
        ArrayDims::parse(&self.array)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partial_file_keeps_defaults() {
        let cfg = ExploreConfig::from_toml("array = \"4x8\"\n[energy]\nmulticast = 6.0\n").unwrap();
        assert_eq!(cfg.array_dims().unwrap(), ArrayDims::new(4, 8));
        assert_eq!(cfg.energy.multicast, 6.0);
        assert_eq!(cfg.energy.mac, 1.0);
        assert_eq!(cfg.alphabet, vec![-1, 0, 1]);
        assert_eq!(cfg.dedup, Dedup::Signature);
        let cfg = ExploreConfig::from_toml("dedup = \"array-symmetry\"").unwrap();
        assert_eq!(cfg.dedup, Dedup::ArraySymmetry);
    }

    #[test]
    fn rejects_unknown_keys() {
        assert!(ExploreConfig::from_toml("arrray = \"4x4\"").is_err());
        assert!(ExploreConfig::from_toml("array = \"4by4\"").is_err());
    }

    #[test]
    fn shipped_default_parses() {
        let text = include_str!("../../../configs/default.toml");
        let cfg = ExploreConfig::from_toml(text).unwrap();
        assert_eq!(cfg, ExploreConfig::default());
    }
}
