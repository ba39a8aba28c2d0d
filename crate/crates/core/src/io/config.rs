//! Single-file TOML configuration for the command-line pipeline.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{config_err, Error, Result};
use crate::eval::ExperimentConfig;
use crate::graph::{
    align_common_users, build_graph, generate_synthetic_pair, k_core, BipartiteGraph,
    CommonUserAlignment, IdMap, SynthConfig,
};
use crate::io::reviews::{parse_reviews, ReviewFormat};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KCoreConfig {
    pub user: usize,
    pub item: usize,
}

impl Default for KCoreConfig {
    fn default() -> Self {
        KCoreConfig { user: 5, item: 5 }
    }
}

/// Where the two domains come from: review files when both paths are set,
/// otherwise the synthetic generator.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    pub source: Option<PathBuf>,
    pub target: Option<PathBuf>,
    /// Inferred from each file's extension when absent.
    pub format: Option<ReviewFormat>,
    pub k_core: KCoreConfig,
    pub synth: SynthConfig,
}

impl DataConfig {
    pub fn is_synthetic(&self) -> bool {
        self.source.is_none() && self.target.is_none()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub out_dir: PathBuf,
    /// Seeds used by the ablation runner; single runs use `experiment.seed`.
    pub seeds: Vec<u64>,
    pub data: DataConfig,
    pub experiment: ExperimentConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            out_dir: PathBuf::from("out"),
            seeds: vec![0, 1, 2, 3, 4],
            data: DataConfig::default(),
            experiment: ExperimentConfig::default(),
        }
    }
}

impl PipelineConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    /// Reads a config file; relative data paths resolve against its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut cfg = Self::from_toml(&text)?;
        let base = path.parent().unwrap_or(Path::new(""));
        for p in [&mut cfg.data.source, &mut cfg.data.target].into_iter().flatten() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        self.experiment.validate()?;
        if self.data.k_core.user == 0 || self.data.k_core.item == 0 {
            return config_err("k-core thresholds must be positive");
        }
        match (&self.data.source, &self.data.target) {
            (None, None) => self.data.synth.validate()?,
            (Some(s), Some(t)) => {
                for p in [s, t] {
                    if !p.is_file() {
                        return Err(Error::Io(std::io::Error::new(
                            std::io::ErrorKind::NotFound,
                            format!("review file {} not found", p.display()),
                        )));
                    }
                }
            }
            _ => return config_err("data.source and data.target must be given together"),
        }
        Ok(())
    }

    /// Seeds the run and the synthetic generator.
    pub fn set_seed(&mut self, seed: u64) {
        self.experiment.seed = seed;
        self.data.synth.seed = seed;
    }
}

#[derive(Clone, Debug)]
pub struct Domain {
    pub graph: BipartiteGraph,
    pub ids: IdMap,
    /// Rows read and rows skipped; zero for synthetic data.
    pub pairs_read: usize,
    pub skipped: usize,
}

#[derive(Clone, Debug)]
pub struct LoadedDomains {
    pub source: Domain,
    pub target: Domain,
    pub alignment: CommonUserAlignment,
}

impl LoadedDomains {
    pub fn domains(&self) -> crate::eval::Domains<'_> {
        crate::eval::Domains {
            source: &self.source.graph,
            target: &self.target.graph,
            alignment: &self.alignment,
        }
    }
}

/// Parses a review file, applies the k-core filter and re-indexes.
pub fn ingest_reviews(path: &Path, format: ReviewFormat, kc: &KCoreConfig) -> Result<Domain> {
    let parsed = parse_reviews(path, format)?;
    let (raw, raw_ids) = build_graph(&parsed.pairs)?;
    let core = k_core(&raw, kc.user, kc.item)?;
    let ids = raw_ids.restrict(&core.kept_users, &core.kept_items);
    if core.graph.is_empty() {
        return Err(Error::EmptyGraph);
    }
    Ok(Domain {
        graph: core.graph,
        ids,
        pairs_read: parsed.pairs.len(),
        skipped: parsed.skipped,
    })
}

pub fn load_domains(data: &DataConfig) -> Result<LoadedDomains> {
    if data.is_synthetic() {
        let p = generate_synthetic_pair(&data.synth)?;
        let wrap = |graph, ids| Domain { graph, ids, pairs_read: 0, skipped: 0 };
        return Ok(LoadedDomains {
            source: wrap(p.source, p.source_ids),
            target: wrap(p.target, p.target_ids),
            alignment: p.alignment,
        });
    }
    let (Some(s), Some(t)) = (&data.source, &data.target) else {
        return config_err("data.source and data.target must be given together");
    };
    let fmt = |p: &Path| data.format.unwrap_or_else(|| ReviewFormat::from_path(p));
    let source = ingest_reviews(s, fmt(s), &data.k_core)?;
    let target = ingest_reviews(t, fmt(t), &data.k_core)?;
    let alignment = align_common_users(&source.ids, &target.ids);
    Ok(LoadedDomains { source, target, alignment })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_round_trips_through_toml() {
        let cfg = PipelineConfig::default();
        let text = cfg.to_toml().unwrap();
        assert_eq!(PipelineConfig::from_toml(&text).unwrap(), cfg);
    }

    #[test]
    fn partial_file_fills_defaults() {
        let cfg = PipelineConfig::from_toml(
            "seeds = [3]\n[experiment]\nseed = 3\n[experiment.finetune]\nlgcn_layers = 1\n",
        )
        .unwrap();
        assert_eq!(cfg.seeds, vec![3]);
        assert_eq!(cfg.experiment.finetune.lgcn_layers, 1);
        assert_eq!(cfg.experiment.finetune.lr, 0.001);
    }

    #[test]
    fn unknown_keys_and_bad_values_rejected() {
        assert!(PipelineConfig::from_toml("bogus = 1\n").is_err());
        let cfg = PipelineConfig::from_toml("[experiment.finetune]\nlgcn_layers = 2\n").unwrap();
        assert!(matches!(cfg.validate(), Err(Error::Config(_))));
    }

    #[test]
    fn missing_review_file_is_io_error() {
        let mut cfg = PipelineConfig::default();
        cfg.data.source = Some("/nonexistent/a.csv".into());
        cfg.data.target = Some("/nonexistent/b.csv".into());
        assert!(matches!(cfg.validate(), Err(Error::Io(_))));
        cfg.data.target = None;
        assert!(matches!(cfg.validate(), Err(Error::Config(_))));
    }
}
