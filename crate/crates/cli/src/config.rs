//! Flat `key = value` pipeline configuration.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use lexiphylo::pmi_train::TrainingConfig;

use crate::error::CliError;

/// Canonical stage order; enabled stages always run in this sequence.
pub const STAGE_ORDER: [&str; 6] =
    ["train-pmi", "distances", "cluster", "chars", "bionj", "validate"];

#[derive(Debug, Clone)]
pub struct PipelineConfig {
    pub corpus: PathBuf,
    pub gold: Option<PathBuf>,
    pub expert_tree: Option<PathBuf>,
    pub out_dir: PathBuf,
    pub seed: u64,
    pub threads: Option<usize>,
    pub stages: Vec<&'static str>,
    pub training: TrainingConfig,
    pub cluster_threshold: f64,
    pub svm_c: f64,
    pub feature_mask: u8,
    pub max_train_pairs: usize,
}

fn parse_pairs(text: &str) -> Result<BTreeMap<String, String>, CliError> {
    let mut pairs = BTreeMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(CliError::Usage(format!(
                "config line {}: expected key = value, found {line:?}",
                lineno + 1
            )));
        };
        let key = key.trim().to_string();
        if pairs.insert(key.clone(), value.trim().to_string()).is_some() {
            return Err(CliError::Usage(format!(
                "config line {}: duplicate key {key:?}",
                lineno + 1
            )));
        }
    }
    Ok(pairs)
}

fn parse_num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, CliError> {
    value
        .parse()
        .map_err(|_| CliError::Usage(format!("config key {key:?}: cannot parse {value:?}")))
}

impl PipelineConfig {
    /// Reads a config file. Relative paths inside it are resolved against the
    /// file's directory, so a run does not depend on the invoking directory.
    pub fn load(path: &Path, out_dir_override: Option<&Path>) -> Result<PipelineConfig, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            CliError::Usage(format!("cannot read config {}: {e}", path.display()))
        })?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        let resolve = |p: &str| -> PathBuf {
            let pb = PathBuf::from(p);
            if pb.is_absolute() {
                pb
            } else {
                base.join(pb)
            }
        };

        let mut pairs = parse_pairs(&text)?;
        let mut take = |key: &str| pairs.remove(key);

        let corpus = take("corpus")
            .map(|v| resolve(&v))
            .ok_or_else(|| CliError::Usage("config key 'corpus' is required".into()))?;
        let seed: u64 = match take("seed") {
            Some(v) => parse_num("seed", &v)?,
            None => return Err(CliError::Usage("config key 'seed' is required".into())),
        };
        let gold = take("gold").map(|v| resolve(&v));
        let expert_tree = take("expert_tree").map(|v| resolve(&v));
        let out_dir = match out_dir_override {
            Some(p) => p.to_path_buf(),
            None => take("out_dir")
                .map(|v| resolve(&v))
                .ok_or_else(|| CliError::Usage("config key 'out_dir' is required".into()))?,
        };
        if out_dir_override.is_some() {
            take("out_dir");
        }
        let threads = match take("threads") {
            Some(v) => Some(parse_num::<usize>("threads", &v)?),
            None => None,
        };

        let mut training = TrainingConfig::default();
        if let Some(v) = take("gap_open") {
            training.gap_open = parse_num("gap_open", &v)?;
        }
        if let Some(v) = take("gap_extend") {
            training.gap_extend = parse_num("gap_extend", &v)?;
        }
        if let Some(v) = take("theta") {
            training.theta = parse_num("theta", &v)?;
        }
        if let Some(v) = take("ldn_related_threshold") {
            training.ldn_related_threshold = parse_num("ldn_related_threshold", &v)?;
        }
        if let Some(v) = take("refine_iterations") {
            training.refine_iterations = parse_num("refine_iterations", &v)?;
        }
        if let Some(v) = take("smoothing") {
            training.smoothing = parse_num("smoothing", &v)?;
        }

        let cluster_threshold = match take("cluster_threshold") {
            Some(v) => parse_num("cluster_threshold", &v)?,
            None => 0.25,
        };
        let svm_c = match take("svm_c") {
            Some(v) => parse_num("svm_c", &v)?,
            None => 1.0,
        };
        let feature_mask: u8 = match take("feature_mask") {
            Some(v) => parse_num("feature_mask", &v)?,
            None => 0b0010100,
        };
        if feature_mask == 0 || feature_mask > 127 {
            return Err(CliError::Usage("feature_mask must be in 1..=127".into()));
        }
        let max_train_pairs = match take("max_train_pairs") {
            Some(v) => parse_num("max_train_pairs", &v)?,
            None => 7000,
        };

        let stages: Vec<&'static str> = match take("stages") {
            Some(v) => {
                let requested: Vec<String> =
                    v.split(',').map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect();
                for name in &requested {
                    if !STAGE_ORDER.contains(&name.as_str()) {
                        return Err(CliError::Usage(format!(
                            "unknown stage {name:?}; known: {}",
                            STAGE_ORDER.join(", ")
                        )));
                    }
                }
                STAGE_ORDER
                    .into_iter()
                    .filter(|s| requested.iter().any(|r| r == s))
                    .collect()
            }
            None => {
                let mut all: Vec<&'static str> =
                    STAGE_ORDER.into_iter().filter(|s| *s != "validate").collect();
                if expert_tree.is_some() {
                    all.push("validate");
                }
                all
            }
        };
        if stages.contains(&"validate") && expert_tree.is_none() {
            return Err(CliError::Usage(
                "stage 'validate' needs config key 'expert_tree'".into(),
            ));
        }
        if stages.contains(&"cluster") && gold.is_none() {
            return Err(CliError::Usage("stage 'cluster' needs config key 'gold'".into()));
        }

        if let Some(extra) = pairs.keys().next() {
            return Err(CliError::Usage(format!("unknown config key {extra:?}")));
        }

        Ok(PipelineConfig {
            corpus,
            gold,
            expert_tree,
            out_dir,
            seed,
            threads,
            stages,
            training,
            cluster_threshold,
            svm_c,
            feature_mask,
            max_train_pairs,
        })
    }
}
