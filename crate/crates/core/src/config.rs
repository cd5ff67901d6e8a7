//! Engine configuration files (TOML).
//!
//! ```toml
//! collection = "collection.txt"   # one doc id per line
//! state_dir = "state"
//! m = [50, 10]
//! f_assumed = 0.1
//! output_k = 10
//! seed = 7
//!
//! [[tiers]]
//! id = 0
//! kind = "truncation"
//! width = 16
//! cost = 1.0
//! images = "images.csc"
//! queries = "queries.csc"
//!
//! [[tiers]]
//! id = 1
//! kind = "file"
//! cost = 4.3
//! images = "b16_images.csc"
//! texts = "b16_texts.csc"
//! ```
//!
//! Relative paths are resolved against the directory holding the file.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::engine::CascadeConfig;
use crate::error::{Error, Result};
use crate::store::{read_matrix, EmbeddingMatrix};
use crate::tiers::{FileTier, Tier, TruncationTier};
use crate::DocId;

fn default_f() -> f64 {
    0.1
}

fn default_k() -> usize {
    10
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum TierSource {
    Truncation {
        width: usize,
        images: PathBuf,
        queries: PathBuf,
    },
    File {
        images: PathBuf,
        texts: PathBuf,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TierSpec {
    pub id: u16,
    pub cost: f64,
    #[serde(flatten)]
    pub source: TierSource,
}

impl TierSpec {
    fn paths(&self) -> [&Path; 2] {
        match &self.source {
            TierSource::Truncation { images, queries, .. } => [images, queries],
            TierSource::File { images, texts } => [images, texts],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EngineConfigFile {
    /// Collection manifest: one doc id per line.
    pub collection: PathBuf,
    pub state_dir: PathBuf,
    #[serde(default)]
    pub m: Vec<usize>,
    #[serde(default = "default_f")]
    pub f_assumed: f64,
    #[serde(default = "default_k")]
    pub output_k: usize,
    #[serde(default)]
    pub seed: u64,
    pub tiers: Vec<TierSpec>,
}

impl EngineConfigFile {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::config(e.to_string()))
    }

    /// Parses `path` and resolves relative paths against its directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path)
            .map_err(|e| Error::config(format!("cannot read config {}: {e}", path.display())))?;
        let mut config = Self::parse(&text)?;
        let base = path.parent().unwrap_or(Path::new(""));
        config.resolve_paths(base);
        Ok(config)
    }

    fn resolve_paths(&mut self, base: &Path) {
        let join = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        join(&mut self.collection);
        join(&mut self.state_dir);
        for tier in &mut self.tiers {
            match &mut tier.source {
                TierSource::Truncation { images, queries, .. } => {
                    join(images);
                    join(queries);
                }
                TierSource::File { images, texts } => {
                    join(images);
                    join(texts);
                }
            }
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    /// Fails with a config error naming the first referenced input file that
    /// does not exist.
    pub fn check_inputs_exist(&self) -> Result<()> {
        let inputs = std::iter::once(self.collection.as_path())
            .chain(self.tiers.iter().flat_map(|t| t.paths()));
        for path in inputs {
            if !path.exists() {
                return Err(Error::config(format!("missing path {}", path.display())));
            }
        }
        Ok(())
    }

    pub fn read_collection(&self) -> Result<Vec<DocId>> {
        read_id_list(&self.collection)
    }

    /// Loads every tier, sharing matrices referenced by several tiers.
    pub fn load_tiers(&self) -> Result<Vec<Arc<dyn Tier>>> {
        let mut loaded: HashMap<PathBuf, Arc<EmbeddingMatrix>> = HashMap::new();
        let mut load = |p: &Path| -> Result<Arc<EmbeddingMatrix>> {
            if let Some(m) = loaded.get(p) {
                return Ok(m.clone());
            }
            let m = Arc::new(read_matrix(p)?);
            loaded.insert(p.to_path_buf(), m.clone());
            Ok(m)
        };
        self.tiers
            .iter()
            .map(|spec| -> Result<Arc<dyn Tier>> {
                Ok(match &spec.source {
                    TierSource::Truncation {
                        width,
                        images,
                        queries,
                    } => Arc::new(TruncationTier::new(
                        spec.id,
                        spec.cost,
                        *width,
                        load(images)?,
                        load(queries)?,
                    )?),
                    TierSource::File { images, texts } => Arc::new(FileTier::new(
                        spec.id,
                        spec.cost,
                        load(images)?,
                        load(texts)?,
                    )?),
                })
            })
            .collect()
    }

    pub fn cascade_config(&self) -> Result<CascadeConfig> {
        self.cascade_config_with(self.load_tiers()?)
    }

    pub fn cascade_config_with(&self, tiers: Vec<Arc<dyn Tier>>) -> Result<CascadeConfig> {
        CascadeConfig::new(tiers, self.m.clone(), self.f_assumed, self.output_k)
    }
}

/// Reads one doc id per line; blank lines and `#` comments are skipped.
pub fn read_id_list(path: impl AsRef<Path>) -> Result<Vec<DocId>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(|l| {
            l.parse()
                .map_err(|e| Error::parse(format!("id list {}", path.display()), e))
        })
        .collect()
}

pub fn write_id_list(path: impl AsRef<Path>, ids: &[DocId]) -> Result<()> {
    let path = path.as_ref();
    let mut text = String::with_capacity(ids.len() * 8);
    for id in ids {
        text.push_str(&id.to_string());
        text.push('\n');
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}
