//! Workspace configuration: one TOML section per pipeline stage.

use std::path::Path;

use canonlab_core::embed::EmbedConfig;
use canonlab_core::engagement::TenureConfig;
use canonlab_core::importance::ImportanceConfig;
use canonlab_core::learner::{ActiveConfig, GbtGrid, PoolingStrategy, RfGrid};
use canonlab_core::sampling::BiasedConfig;
use canonlab_core::textprep::VocabConfig;
use canonlab_core::{sha256_hex, Error, Result};
use serde::{Deserialize, Serialize};

pub const CONFIG_FILE: &str = "canonlab.toml";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MappingKind {
    #[default]
    Default,
    Pushshift,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct IngestSection {
    /// Comment dump, relative to the workspace root unless absolute.
    pub input: Option<String>,
    pub mapping: MappingKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CorefSection {
    pub enabled: bool,
}

impl Default for CorefSection {
    fn default() -> Self {
        CorefSection { enabled: true }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct EmbedSection {
    #[serde(flatten)]
    pub table: EmbedConfig,
    /// Seed of the 50-dimensional table behind the document embeddings.
    pub doc_seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LexiconSection {
    /// Seed lexicon file, `dimension<TAB>phrase` per line.
    pub seed: Option<String>,
    pub session: String,
    pub suggestions: usize,
    /// Sample comments shown per suggested phrase.
    pub evidence: usize,
}

impl Default for LexiconSection {
    fn default() -> Self {
        LexiconSection { seed: None, session: "expansion-1".into(), suggestions: 20, evidence: 5 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PoolSection {
    pub random_size: usize,
    pub random_seed: u64,
    pub biased: BiasedConfig,
}

impl Default for PoolSection {
    fn default() -> Self {
        PoolSection { random_size: 1000, random_seed: 0, biased: BiasedConfig::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AnnotateSection {
    /// Pool served by `annotate-serve`: "random" or "biased".
    pub pool: String,
    pub annotator: String,
    pub active: ActiveConfig,
}

impl Default for AnnotateSection {
    fn default() -> Self {
        AnnotateSection { pool: "random".into(), annotator: "expert".into(), active: ActiveConfig::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainSection {
    pub folds: usize,
    pub seed: u64,
    pub one_sided_selection: bool,
    pub rf: RfGrid,
    pub gbt: GbtGrid,
}

impl Default for TrainSection {
    fn default() -> Self {
        TrainSection { folds: 5, seed: 0, one_sided_selection: true, rf: RfGrid::default(), gbt: GbtGrid::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PredictSection {
    pub strategy: String,
}

impl Default for PredictSection {
    fn default() -> Self {
        PredictSection { strategy: PoolingStrategy::Consensus.to_string() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ImportanceSection {
    #[serde(flatten)]
    pub fit: ImportanceConfig,
    pub top: usize,
}

impl Default for ImportanceSection {
    fn default() -> Self {
        ImportanceSection { fit: ImportanceConfig::default(), top: 20 }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct EngagementSection {
    /// Community whose comments count as inside.
    pub community: Option<String>,
    /// Unix time of the community ban, required for tenure records.
    pub ban_time: Option<i64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ItsSection {
    pub window: usize,
    pub cluster_robust: bool,
}

impl Default for ItsSection {
    fn default() -> Self {
        ItsSection { window: 13, cluster_robust: false }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct TenureSection {
    #[serde(flatten)]
    pub records: TenureConfig,
    /// Ridge penalty for the logit model; 0 reports separation as an error.
    pub logit_ridge: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ServerSection {
    pub addr: String,
}

impl Default for ServerSection {
    fn default() -> Self {
        ServerSection { addr: "127.0.0.1:8080".into() }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct Config {
    pub ingest: IngestSection,
    pub coref: CorefSection,
    pub vocab: VocabConfig,
    pub embed: EmbedSection,
    pub lexicon: LexiconSection,
    pub pool: PoolSection,
    pub annotate: AnnotateSection,
    pub train: TrainSection,
    pub predict: PredictSection,
    pub importance: ImportanceSection,
    pub engagement: EngagementSection,
    pub its: ItsSection,
    pub tenure: TenureSection,
    pub server: ServerSection,
}

impl Config {
    pub fn parse(text: &str) -> Result<Config> {
        toml::from_str(text).map_err(|e| Error::invalid(format!("config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Config> {
        Config::parse(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::invalid(format!("config: {e}")))
    }

    /// Hash of one section's effective values, recorded as an upstream of
    /// the artifacts it shapes.
    pub fn section_hash(&self, section: &str) -> Result<String> {
        let v = toml::Value::try_from(self).map_err(|e| Error::invalid(format!("config: {e}")))?;
        let s = v.get(section).ok_or_else(|| Error::invalid(format!("unknown config section {section}")))?;
        let text = toml::to_string(s).map_err(|e| Error::invalid(format!("config: {e}")))?;
        Ok(sha256_hex(text.as_bytes()))
    }
}
