//! Run configuration: profile defaults, then the TOML file, then `--set`.

use std::path::{Path, PathBuf};

use fsearch_core::augment::AugmentConfig;
use fsearch_core::encoder::HeadOrder;
use fsearch_core::eval::DEFAULT_K_RRF;
use fsearch_core::retrieval::SearchConfig;
use fsearch_core::semantic::{Anchor, ContextConfig, TruncationUnit, DEFAULT_FALLBACK_DIM, DEFAULT_IMPORT_DIM};
use fsearch_core::train::{ModelConfig, TrainConfig};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Profile {
    Desk,
    Paper,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SemanticMode {
    None,
    Fallback,
    Import,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SemanticConfig {
    pub mode: SemanticMode,
    pub dim: usize,
    pub max_len: usize,
    pub unit: TruncationUnit,
    pub anchor: Anchor,
}

impl SemanticConfig {
    pub fn context(&self) -> ContextConfig {
        ContextConfig {
            max_len: self.max_len,
            unit: self.unit,
            anchor: self.anchor,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalConfig {
    pub k_rrf: f64,
    pub depth: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathsConfig {
    pub corpus: Option<PathBuf>,
    pub store: Option<PathBuf>,
    pub model: Option<PathBuf>,
    pub train_log: Option<PathBuf>,
    pub structural: Option<PathBuf>,
    pub semantic: Option<PathBuf>,
    pub query_semantic: Option<PathBuf>,
    pub topics: Option<PathBuf>,
    pub run: Option<PathBuf>,
    pub qrels: Option<PathBuf>,
    pub visual_map: Option<PathBuf>,
    pub report: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub profile: Profile,
    pub model: ModelConfig,
    pub augment: AugmentConfig,
    pub train: TrainConfig,
    pub search: SearchConfig,
    pub semantic: SemanticConfig,
    pub eval: EvalConfig,
    #[serde(default)]
    pub paths: PathsConfig,
}

impl RunConfig {
    pub fn profile_defaults(profile: Profile) -> RunConfig {
        match profile {
            Profile::Desk => RunConfig {
                profile,
                model: ModelConfig {
                    dim: 32,
                    layers: 2,
                    min_frequency: 2,
                    head_order: HeadOrder::default(),
                },
                augment: AugmentConfig::default(),
                train: TrainConfig {
                    epochs: 10,
                    batch_size: 64,
                    learning_rate: 3e-3,
                    ..TrainConfig::default()
                },
                search: SearchConfig::desk(),
                semantic: SemanticConfig {
                    mode: SemanticMode::Fallback,
                    dim: DEFAULT_FALLBACK_DIM,
                    max_len: 1024,
                    unit: TruncationUnit::Chars,
                    anchor: Anchor::Centered,
                },
                eval: EvalConfig {
                    k_rrf: DEFAULT_K_RRF,
                    depth: 1000,
                },
                paths: PathsConfig::default(),
            },
            Profile::Paper => RunConfig {
                profile,
                model: ModelConfig::default(),
                augment: AugmentConfig::default(),
                train: TrainConfig::default(),
                search: SearchConfig::default(),
                semantic: SemanticConfig {
                    mode: SemanticMode::Import,
                    dim: DEFAULT_IMPORT_DIM,
                    max_len: 1024,
                    unit: TruncationUnit::Chars,
                    anchor: Anchor::Centered,
                },
                eval: EvalConfig {
                    k_rrf: DEFAULT_K_RRF,
                    depth: 1000,
                },
                paths: PathsConfig::default(),
            },
        }
    }

    /// Resolves the configuration. The profile comes from `profile_flag`,
    /// else the file's `profile` key, else desk.
    pub fn resolve(file: Option<&Path>, profile_flag: Option<Profile>, sets: &[String]) -> Result<RunConfig, String> {
        let file_table = match file {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| format!("{}: {e}", p.display()))?;
                let mut t: toml::Table = toml::from_str(&text).map_err(|e| format!("{}: {e}", p.display()))?;
                // Relative paths in the file are taken relative to the file.
                if let (Some(toml::Value::Table(paths)), Some(dir)) = (t.get_mut("paths"), p.parent()) {
                    for (_, v) in paths.iter_mut() {
                        if let toml::Value::String(s) = v {
                            if Path::new(s.as_str()).is_relative() {
                                *s = dir.join(s.as_str()).to_string_lossy().into_owned();
                            }
                        }
                    }
                }
                t
            }
            None => toml::Table::new(),
        };
        let profile = match (profile_flag, file_table.get("profile")) {
            (Some(p), _) => p,
            (None, Some(v)) => Profile::deserialize(v.clone()).map_err(|e| format!("profile: {e}"))?,
            (None, None) => Profile::Desk,
        };
        let mut table = toml::Table::try_from(Self::profile_defaults(profile)).map_err(|e| e.to_string())?;
        merge(&mut table, file_table);
        table.insert("profile".into(), toml::Value::try_from(profile).map_err(|e| e.to_string())?);
        for s in sets {
            apply_set(&mut table, s)?;
        }
        let cfg: RunConfig = toml::Value::Table(table).try_into().map_err(|e: toml::de::Error| e.to_string())?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.model.dim == 0 || self.model.layers == 0 {
            return Err("model.dim and model.layers must be positive".into());
        }
        if self.model.min_frequency == 0 {
            return Err("model.min_frequency must be at least 1".into());
        }
        self.augment.validate().map_err(|e| format!("augment: {e}"))?;
        self.train.validate().map_err(|e| format!("train: {e}"))?;
        self.search.validate().map_err(|e| format!("search: {e}"))?;
        if self.semantic.dim == 0 || self.semantic.max_len == 0 {
            return Err("semantic.dim and semantic.max_len must be positive".into());
        }
        if !(self.eval.k_rrf >= 0.0) || self.eval.depth == 0 {
            return Err("eval.k_rrf must be >= 0 and eval.depth positive".into());
        }
        Ok(())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }
}

fn merge(base: &mut toml::Table, over: toml::Table) {
    for (k, v) in over {
        match (base.get_mut(&k), v) {
            (Some(toml::Value::Table(b)), toml::Value::Table(o)) => merge(b, o),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

/// `a.b.c=value`; the value is read as a TOML literal, or as a bare string
/// when it does not parse as one.
fn apply_set(table: &mut toml::Table, assignment: &str) -> Result<(), String> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| format!("--set expects key=value, got {assignment:?}"))?;
    let value = toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()));
    let parts: Vec<&str> = key.trim().split('.').collect();
    let mut cur = table;
    for p in &parts[..parts.len() - 1] {
        let entry = cur
            .entry(p.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry
            .as_table_mut()
            .ok_or_else(|| format!("--set {key}: {p} is not a table"))?;
    }
    cur.insert(parts[parts.len() - 1].to_string(), value);
    Ok(())
}
