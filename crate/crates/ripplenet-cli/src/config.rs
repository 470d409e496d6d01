//! Run configuration: a TOML file merged with command-line overrides.
//!
//! Every table and field is optional; omitted values fall back to the
//! defaults documented on each field. Flags beat file values, which beat
//! defaults. Unknown keys are rejected so a typo cannot silently revert a
//! knob to its default.

use std::path::PathBuf;

use clap::Args;
use ripplenet::model::Hyperparams;
use serde::Deserialize;

use crate::error::CliError;

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub paths: Paths,
    pub hyperparams: Hyperparams,
    pub data: DataConfig,
    pub eval: EvalConfig,
    pub explain: ExplainConfig,
    pub analyze: AnalyzeConfig,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    /// Knowledge-graph triples, `head<TAB>relation<TAB>tail`.
    pub kg: Option<PathBuf>,
    /// Ratings, `user<TAB>item<TAB>rating`.
    pub ratings: Option<PathBuf>,
    /// Item-entity anchoring, `item<TAB>entity`.
    pub item_map: Option<PathBuf>,
    /// Where artifacts land; created if absent. Default `ripple-out`.
    pub out_dir: PathBuf,
}

impl Default for Paths {
    fn default() -> Self {
        Paths { kg: None, ratings: None, item_map: None, out_dir: PathBuf::from("ripple-out") }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    /// Ratings >= this count as clicks; absent means every rating does.
    pub rating_threshold: Option<f64>,
    /// Train/eval/test fractions; must be positive and sum to 1.
    pub split_ratios: [f64; 3],
}

impl Default for DataConfig {
    fn default() -> Self {
        DataConfig { rating_threshold: None, split_ratios: [0.6, 0.2, 0.2] }
    }
}

/// Which example split a command reads.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum SplitChoice {
    Train,
    Eval,
    Test,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    /// Split scored by `eval`. Default: test.
    pub split: SplitChoice,
    /// Ranking cutoffs; empty disables the top-K table.
    pub top_k: Vec<usize>,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig { split: SplitChoice::Test, top_k: vec![1, 2, 5, 10] }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExplainConfig {
    /// Keep edges whose log-scale relevance is at least this. Default -1.0.
    pub threshold: f64,
    pub user: Option<String>,
    pub item: Option<String>,
}

impl Default for ExplainConfig {
    fn default() -> Self {
        ExplainConfig { threshold: -1.0, user: None, item: None }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalyzeConfig {
    /// Item pairs sampled for the overlap study.
    pub pair_count: usize,
    /// Deepest neighborhood compared.
    pub max_hop: usize,
}

impl Default for AnalyzeConfig {
    fn default() -> Self {
        AnalyzeConfig { pair_count: 10_000, max_hop: 2 }
    }
}

/// Flags every subcommand accepts; each one overrides its config field.
#[derive(Debug, Clone, Args)]
pub struct Overrides {
    /// TOML run configuration.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Knowledge-graph triples file.
    #[arg(long, global = true, value_name = "PATH")]
    pub kg: Option<PathBuf>,
    /// Ratings file.
    #[arg(long, global = true, value_name = "PATH")]
    pub ratings: Option<PathBuf>,
    /// Item-entity map file.
    #[arg(long, global = true, value_name = "PATH")]
    pub item_map: Option<PathBuf>,
    /// Artifact directory.
    #[arg(long, global = true, value_name = "DIR")]
    pub out_dir: Option<PathBuf>,
    /// Embedding dimension.
    #[arg(long, global = true)]
    pub dim: Option<usize>,
    /// Propagation hops.
    #[arg(long, global = true)]
    pub hops: Option<usize>,
    /// Triples sampled per hop.
    #[arg(long, global = true)]
    pub ripple_size: Option<usize>,
    /// L2 penalty weight.
    #[arg(long, global = true)]
    pub l2_weight: Option<f64>,
    /// Graph-reconstruction loss weight.
    #[arg(long, global = true)]
    pub kge_weight: Option<f64>,
    /// SGD step size.
    #[arg(long, global = true)]
    pub learning_rate: Option<f64>,
    /// Examples per SGD step.
    #[arg(long, global = true)]
    pub batch_size: Option<usize>,
    /// Training epochs.
    #[arg(long, global = true)]
    pub epochs: Option<usize>,
    /// Root RNG seed; every random choice derives from it.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Click threshold on ratings.
    #[arg(long, global = true)]
    pub rating_threshold: Option<f64>,
    /// Train,eval,test fractions, e.g. 0.6,0.2,0.2.
    #[arg(long, global = true, value_delimiter = ',', value_name = "R,R,R")]
    pub split_ratios: Option<Vec<f64>>,
}

impl RunConfig {
    /// Loads the file named by `--config` (if any) and applies flag
    /// overrides on top.
    pub fn resolve(overrides: &Overrides) -> Result<RunConfig, CliError> {
        let mut cfg = match &overrides.config {
            Some(path) => {
                let text = crate::io::read_config_text(path)?;
                toml::from_str(&text)
                    .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?
            }
            None => RunConfig::default(),
        };
        let o = overrides.clone();
        cfg.paths.kg = o.kg.or(cfg.paths.kg);
        cfg.paths.ratings = o.ratings.or(cfg.paths.ratings);
        cfg.paths.item_map = o.item_map.or(cfg.paths.item_map);
        if let Some(dir) = o.out_dir {
            cfg.paths.out_dir = dir;
        }
        let hp = &mut cfg.hyperparams;
        hp.dim = o.dim.unwrap_or(hp.dim);
        hp.hops = o.hops.unwrap_or(hp.hops);
        hp.ripple_size = o.ripple_size.unwrap_or(hp.ripple_size);
        hp.l2_weight = o.l2_weight.unwrap_or(hp.l2_weight);
        hp.kge_weight = o.kge_weight.unwrap_or(hp.kge_weight);
        hp.learning_rate = o.learning_rate.unwrap_or(hp.learning_rate);
        hp.batch_size = o.batch_size.unwrap_or(hp.batch_size);
        hp.epochs = o.epochs.unwrap_or(hp.epochs);
        hp.rng_seed = o.seed.unwrap_or(hp.rng_seed);
        cfg.data.rating_threshold = o.rating_threshold.or(cfg.data.rating_threshold);
        if let Some(ratios) = o.split_ratios {
            cfg.data.split_ratios = ratios.try_into().map_err(|bad: Vec<f64>| {
                CliError::Config(format!(
                    "--split-ratios needs exactly three fractions, got {}",
                    bad.len()
                ))
            })?;
        }
        Ok(cfg)
    }

    /// A required input path, or a clear message naming the missing knob.
    pub fn require(path: &Option<PathBuf>, what: &str, flag: &str) -> Result<PathBuf, CliError> {
        path.clone().ok_or_else(|| {
            CliError::Config(format!("no {what} file configured; pass {flag} or set it in the config"))
        })
    }
}
