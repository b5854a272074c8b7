//! Pipeline configuration file.
//!
//! ```toml
//! seed = 7
//!
//! [augment]
//! variants = 19
//!
//! [patches]
//! query = ["identity", "rot90", "rot180", "rot270", "center-exact", "center-third", "proposals:3"]
//!
//! [features]
//! scales = [256]
//! [[features.models]]
//! id = "tiled8"
//! grid = 8
//!
//! [matching]
//! top_t = 50
//!
//! [tricks]
//! partial_penalty = 0.95
//!
//! [[ensemble]]
//! criterion = "completeness"
//! models = ["tiled8"]
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::augment::AugmentConfig;
use crate::error::{Error, Result};
use crate::features::{TiledDescriptor, DEFAULT_SCALES};
use crate::matching::{EnsembleSpec, MatchConfig, TrickConfig};
use crate::patches::{PatchConfig, PatchPlan, PatchRule, ProposalConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PatchSection {
    pub query: Vec<PatchRule>,
    pub reference: Vec<PatchRule>,
    pub exact_ratio: f64,
    pub third_ratio: f64,
    pub proposals: ProposalConfig,
}

impl Default for PatchSection {
    fn default() -> Self {
        let cfg = PatchConfig::default();
        PatchSection {
            query: PatchPlan::default_query().rules().to_vec(),
            reference: PatchPlan::default_reference().rules().to_vec(),
            exact_ratio: cfg.exact_ratio,
            third_ratio: cfg.third_ratio,
            proposals: cfg.proposals,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeatureSection {
    pub models: Vec<TiledDescriptor>,
    pub scales: Vec<u32>,
    /// PCA model applied after description.
    pub pca: Option<PathBuf>,
    /// Output dimension for `pca-fit`; the default rule applies when unset.
    pub pca_dim: Option<usize>,
    pub whiten: bool,
}

impl Default for FeatureSection {
    fn default() -> Self {
        FeatureSection {
            models: vec![TiledDescriptor::default()],
            scales: DEFAULT_SCALES.to_vec(),
            pca: None,
            pca_dim: None,
            whiten: false,
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub seed: u64,
    pub augment: AugmentConfig,
    pub patches: PatchSection,
    pub features: FeatureSection,
    pub matching: MatchConfig,
    pub tricks: TrickConfig,
    pub ensemble: Vec<EnsembleSpec>,
}

impl PipelineConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: PipelineConfig = toml::from_str(text).map_err(|e| Error::Config(e.message().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn validate(&self) -> Result<()> {
        self.augment.validate()?;
        self.query_plan()?;
        self.reference_plan()?;
        self.tricks.validate()?;
        for s in &self.ensemble {
            s.validate()?;
        }
        let f = &self.features;
        if f.scales.is_empty() || f.scales.contains(&0) {
            return Err(Error::Config("features.scales must list positive sides".into()));
        }
        if f.models.is_empty() {
            return Err(Error::Config("features.models is empty".into()));
        }
        let mut ids = std::collections::HashSet::new();
        for m in &f.models {
            if m.id.is_empty() || m.grid == 0 || !m.gradient_weight.is_finite() {
                return Err(Error::Config(format!("invalid model entry {m:?}")));
            }
            if !ids.insert(m.id.as_str()) {
                return Err(Error::Config(format!("model id {:?} is listed twice", m.id)));
            }
        }
        for ratio in [self.patches.exact_ratio, self.patches.third_ratio] {
            if !(ratio > 0.0 && ratio <= 1.0) {
                return Err(Error::Config(format!("center crop ratio {ratio} outside (0, 1]")));
            }
        }
        Ok(())
    }

    /// Checks that referenced files exist.
    pub fn check_paths(&self) -> Result<()> {
        if let Some(p) = &self.features.pca {
            if !p.is_file() {
                return Err(Error::io(p, std::io::Error::from(std::io::ErrorKind::NotFound)));
            }
        }
        Ok(())
    }

    pub fn query_plan(&self) -> Result<PatchPlan> {
        PatchPlan::new("query", self.patches.query.clone())
    }

    pub fn reference_plan(&self) -> Result<PatchPlan> {
        PatchPlan::new("reference", self.patches.reference.clone())
    }

    /// Patch geometry; the query size floor comes from `tricks.min_patch_side`.
    pub fn patch_config(&self) -> PatchConfig {
        PatchConfig {
            exact_ratio: self.patches.exact_ratio,
            third_ratio: self.patches.third_ratio,
            min_query_side: self.tricks.min_patch_side,
            proposals: self.patches.proposals,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        let cfg = PipelineConfig::parse("").unwrap();
        assert_eq!(cfg.features.scales, vec![200, 256, 320]);
        assert_eq!(cfg.reference_plan().unwrap(), PatchPlan::default_reference());
        assert_eq!(cfg.matching.top_t, 50);
        assert_eq!(cfg.patch_config(), PatchConfig::default());
    }

    #[test]
    fn module_doc_example_parses() {
        let text = r#"
            seed = 7
            [augment]
            variants = 19
            [patches]
            query = ["identity", "rot90", "rot180", "rot270", "center-exact", "center-third", "proposals:3"]
            [features]
            scales = [256]
            [[features.models]]
            id = "tiled8"
            grid = 8
            [matching]
            top_t = 50
            [tricks]
            partial_penalty = 0.95
            [[ensemble]]
            criterion = "completeness"
            models = ["tiled8"]
        "#;
        let cfg = PipelineConfig::parse(text).unwrap();
        assert_eq!(cfg.seed, 7);
        assert_eq!(cfg.query_plan().unwrap().rules().len(), 7);
        assert_eq!(cfg.ensemble.len(), 1);
    }

    #[test]
    fn violations_are_config_errors() {
        for bad in [
            "unknown = 1",
            "[patches]\nquery = [\"rot90\"]",
            "[features]\nscales = []",
            "[tricks]\npartial_penalty = 2.0",
            "[[ensemble]]\ncriterion = \"confidence\"\nmodels = [\"a\"]",
            "[augment]\nprobability = 3.0",
        ] {
            assert!(matches!(PipelineConfig::parse(bad), Err(Error::Config(_))), "{bad}");
        }
    }

    #[test]
    fn missing_pca_file_is_reported() {
        let cfg = PipelineConfig::parse("[features]\npca = \"/nonexistent/p.d2pc\"").unwrap();
        assert!(matches!(cfg.check_paths(), Err(Error::Io { .. })));
    }
}
