//! Cached stage execution and the run manifest.
//!
//! Every stage reads files, writes files into the output directory, and is
//! keyed by a content hash of its inputs, parameters, and derived seed.
//! Timestamps and thread counts never enter a key, so a cache hit means the
//! outputs are byte-for-byte what a recomputation would produce.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use lexiphylo::align::PmiModel;
use lexiphylo::chars::{
    build_cognate_chars, build_soundclass_chars, combine_and_partition, filter_variable,
    to_phylip,
};
use lexiphylo::cogclust::{
    cluster_corpus, compute_features, gold_items, sample_training_pairs, train_classifier,
    ClusterOptions, CognatePartition, FeatureContext, TrainOptions,
};
use lexiphylo::corpus::{load_corpus, GoldStandard};
use lexiphylo::lexdist::{distance_matrix, pmi_similarity, DistanceMatrix};
use lexiphylo::phylo::{bionj, gqd, parse_newick, write_newick, GqdOptions};
use lexiphylo::pmi_train::train;

use crate::config::PipelineConfig;
use crate::error::CliError;
use crate::ops::matrix_in_corpus_order;

pub fn sha256_hex(bytes: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(bytes);
    let digest = h.finalize();
    let mut out = String::with_capacity(64);
    for b in digest {
        out.push_str(&format!("{b:02x}"));
    }
    out
}

fn hash_file(path: &Path) -> Result<String, anyhow::Error> {
    let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(sha256_hex(&bytes))
}

/// Per-stage seed: the master seed and the stage name, hashed together.
/// Stages are independent streams; renaming or reordering stages never
/// silently reuses another stage's randomness.
pub fn stage_seed(master: u64, stage: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(master.to_le_bytes());
    h.update(stage.as_bytes());
    let digest = h.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("digest is 32 bytes"))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StageStatus {
    Computed,
    Cached,
    Rebuilt,
}

impl StageStatus {
    fn as_str(self) -> &'static str {
        match self {
            StageStatus::Computed => "computed",
            StageStatus::Cached => "cached",
            StageStatus::Rebuilt => "rebuilt",
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct CacheEntry {
    key: String,
    outputs: BTreeMap<String, String>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ManifestArtifact {
    pub path: String,
    pub sha256: String,
    pub stage: String,
    pub status: String,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct Manifest {
    pub seed: u64,
    pub artifacts: Vec<ManifestArtifact>,
}

/// What one stage declares about itself before running.
struct StagePlan {
    name: &'static str,
    /// Labeled input files; contents are hashed into the cache key.
    inputs: Vec<(&'static str, PathBuf)>,
    /// Parameters that change the outputs; formatted into the cache key.
    params: Vec<(&'static str, String)>,
    /// Output file names, relative to the output directory.
    outputs: Vec<&'static str>,
}

fn cache_key(plan: &StagePlan, seed: u64) -> Result<String, anyhow::Error> {
    let mut transcript = String::new();
    transcript.push_str("stage=");
    transcript.push_str(plan.name);
    transcript.push('\n');
    transcript.push_str(&format!("seed={seed}\n"));
    for (label, value) in &plan.params {
        transcript.push_str(&format!("param.{label}={value}\n"));
    }
    for (label, path) in &plan.inputs {
        let digest = hash_file(path).with_context(|| format!("hashing input '{label}'"))?;
        transcript.push_str(&format!("input.{label}={digest}\n"));
    }
    Ok(sha256_hex(transcript.as_bytes()))
}

/// Checks a cache entry against the files on disk. `Some(outputs)` means
/// every declared output exists with the recorded hash.
fn verify_cache(
    out_dir: &Path,
    plan: &StagePlan,
    entry: &CacheEntry,
) -> Option<BTreeMap<String, String>> {
    let mut outputs = BTreeMap::new();
    for name in &plan.outputs {
        let recorded = entry.outputs.get(*name)?;
        let actual = hash_file(&out_dir.join(name)).ok()?;
        if actual != *recorded {
            return None;
        }
        outputs.insert(name.to_string(), actual);
    }
    Some(outputs)
}

struct StageResult {
    status: StageStatus,
    /// Relative path -> content hash for every declared output.
    outputs: BTreeMap<String, String>,
}

fn run_stage(
    out_dir: &Path,
    plan: StagePlan,
    seed: u64,
    compute: impl FnOnce(u64) -> Result<(), anyhow::Error>,
) -> Result<StageResult, CliError> {
    let key =
        cache_key(&plan, seed).map_err(|e| CliError::stage(plan.name, e))?;
    let cache_path = out_dir.join(".cache").join(format!("{}.json", plan.name));

    // Distinguish a stale entry (inputs or parameters changed: a normal
    // recompute) from a damaged one (unreadable metadata, or recorded
    // outputs that no longer verify: a rebuild the manifest must flag).
    let cache_text = std::fs::read_to_string(&cache_path).ok();
    let prior: Option<CacheEntry> =
        cache_text.as_deref().and_then(|text| serde_json::from_str(text).ok());
    let damaged = cache_text.is_some() && prior.is_none();
    let key_matched = prior.as_ref().is_some_and(|e| e.key == key);
    if let Some(entry) = prior.filter(|e| e.key == key) {
        if let Some(outputs) = verify_cache(out_dir, &plan, &entry) {
            return Ok(StageResult { status: StageStatus::Cached, outputs });
        }
    }

    compute(seed).map_err(|e| CliError::stage(plan.name, e))?;

    let mut outputs = BTreeMap::new();
    for name in &plan.outputs {
        let digest = hash_file(&out_dir.join(name)).map_err(|e| {
            CliError::stage(plan.name, e.context(format!("missing declared output {name}")))
        })?;
        outputs.insert(name.to_string(), digest);
    }
    let entry = CacheEntry { key, outputs: outputs.clone() };
    let text = serde_json::to_string_pretty(&entry).expect("cache entry serializes");
    std::fs::write(&cache_path, text)
        .map_err(|e| CliError::stage(plan.name, anyhow!(e).context("writing cache entry")))?;

    // A matching key whose outputs failed verification means something
    // damaged or removed them after a successful run.
    let status =
        if key_matched || damaged { StageStatus::Rebuilt } else { StageStatus::Computed };
    Ok(StageResult { status, outputs })
}

fn fmt_f64(v: f64) -> String {
    format!("{v:?}")
}

pub fn run_pipeline(config: &PipelineConfig) -> Result<Manifest, CliError> {
    std::fs::create_dir_all(config.out_dir.join(".cache")).map_err(|e| {
        CliError::Usage(format!(
            "cannot create output dir {}: {e}",
            config.out_dir.display()
        ))
    })?;

    // Input files must exist before any stage runs; a missing input is a
    // data problem, not a stage failure.
    let mut required: Vec<&Path> = vec![&config.corpus];
    if config.stages.contains(&"cluster") {
        required.push(config.gold.as_deref().expect("config validation requires gold"));
    }
    if config.stages.contains(&"validate") {
        required.push(config.expert_tree.as_deref().expect("config validation requires tree"));
    }
    for path in required {
        if !path.is_file() {
            return Err(CliError::data(anyhow!("input file not found: {}", path.display())));
        }
    }

    let threads = match std::env::var("LEXIPHYLO_THREADS") {
        Ok(v) => Some(v.parse::<usize>().map_err(|_| {
            CliError::Usage(format!("LEXIPHYLO_THREADS must be a thread count, got {v:?}"))
        })?),
        Err(_) => config.threads,
    };
    match threads {
        Some(n) if n > 0 => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| CliError::data(anyhow!(e).context("building thread pool")))?;
            pool.install(|| run_stages(config))
        }
        Some(_) => Err(CliError::Usage("thread count must be positive".into())),
        None => run_stages(config),
    }
}

fn run_stages(config: &PipelineConfig) -> Result<Manifest, CliError> {
    let out = &config.out_dir;
    let mut artifacts: Vec<ManifestArtifact> = Vec::new();
    let mut record = |name: &'static str, result: &StageResult| {
        for (path, sha) in &result.outputs {
            artifacts.push(ManifestArtifact {
                path: path.clone(),
                sha256: sha.clone(),
                stage: name.to_string(),
                status: result.status.as_str().to_string(),
            });
        }
    };

    for &name in &config.stages {
        let seed = stage_seed(config.seed, name);
        let result = match name {
            "train-pmi" => {
                let plan = StagePlan {
                    name,
                    inputs: vec![("corpus", config.corpus.clone())],
                    params: vec![
                        ("gap_open", fmt_f64(config.training.gap_open)),
                        ("gap_extend", fmt_f64(config.training.gap_extend)),
                        ("theta", fmt_f64(config.training.theta)),
                        (
                            "ldn_related_threshold",
                            fmt_f64(config.training.ldn_related_threshold),
                        ),
                        (
                            "refine_iterations",
                            config.training.refine_iterations.to_string(),
                        ),
                        ("smoothing", fmt_f64(config.training.smoothing)),
                    ],
                    outputs: vec!["pmi.csv", "gaps.csv"],
                };
                run_stage(out, plan, seed, |seed| {
                    let corpus = load_corpus(&config.corpus)?;
                    let mut training = config.training.clone();
                    training.seed = seed;
                    let model = train(&corpus, &training)?;
                    model.write_csv(out.join("pmi.csv"), out.join("gaps.csv"))?;
                    Ok(())
                })?
            }
            "distances" => {
                let plan = StagePlan {
                    name,
                    inputs: vec![
                        ("corpus", config.corpus.clone()),
                        ("pmi", out.join("pmi.csv")),
                        ("gaps", out.join("gaps.csv")),
                    ],
                    params: vec![],
                    outputs: vec!["dist.csv", "dist.nex"],
                };
                run_stage(out, plan, seed, |_| {
                    let corpus = load_corpus(&config.corpus)?;
                    let model = PmiModel::read_csv(out.join("pmi.csv"), out.join("gaps.csv"))?;
                    let dm = distance_matrix(&corpus, pmi_similarity(&model));
                    dm.write_csv(out.join("dist.csv"))?;
                    dm.write_nexus(out.join("dist.nex"))?;
                    Ok(())
                })?
            }
            "cluster" => {
                let gold_path = config.gold.clone().expect("config validation requires gold");
                let plan = StagePlan {
                    name,
                    inputs: vec![
                        ("corpus", config.corpus.clone()),
                        ("gold", gold_path.clone()),
                        ("pmi", out.join("pmi.csv")),
                        ("gaps", out.join("gaps.csv")),
                        ("dist", out.join("dist.csv")),
                    ],
                    params: vec![
                        ("threshold", fmt_f64(config.cluster_threshold)),
                        ("svm_c", fmt_f64(config.svm_c)),
                        ("feature_mask", config.feature_mask.to_string()),
                        ("max_train_pairs", config.max_train_pairs.to_string()),
                    ],
                    outputs: vec!["cognates.csv"],
                };
                run_stage(out, plan, seed, |seed| {
                    let corpus = load_corpus(&config.corpus)?;
                    let gold = GoldStandard::load(&gold_path)?;
                    let model = PmiModel::read_csv(out.join("pmi.csv"), out.join("gaps.csv"))?;
                    let dm = matrix_in_corpus_order(
                        &corpus,
                        &DistanceMatrix::read_csv(out.join("dist.csv"))?,
                    )?;
                    let items = gold_items(&corpus, &gold)?;
                    let ctx = FeatureContext::new(&corpus, &model, &dm)?;
                    let families: BTreeSet<&str> =
                        items.values().map(|i| i.family.as_str()).collect();
                    let mut rng = ChaCha8Rng::seed_from_u64(seed);
                    let pairs = sample_training_pairs(
                        &ctx,
                        &items,
                        &families,
                        config.max_train_pairs,
                        &mut rng,
                    );
                    if pairs.is_empty() {
                        return Err(anyhow!("gold standard yields no usable training pairs"));
                    }
                    let rows: Vec<_> = pairs
                        .iter()
                        .map(|&(a, b, y)| Ok((compute_features(&ctx, a, b)?, y)))
                        .collect::<Result<_, anyhow::Error>>()?;
                    let classifier = train_classifier(
                        &rows,
                        config.feature_mask,
                        &TrainOptions { c: config.svm_c, ..TrainOptions::default() },
                    )?;
                    let options =
                        ClusterOptions { threshold: config.cluster_threshold, seed };
                    let partition =
                        cluster_corpus(&corpus, &model, &dm, &classifier, &options)?;
                    partition.write_csv_path(&corpus, &out.join("cognates.csv"))?;
                    Ok(())
                })?
            }
            "chars" => {
                let plan = StagePlan {
                    name,
                    inputs: vec![
                        ("corpus", config.corpus.clone()),
                        ("cognates", out.join("cognates.csv")),
                    ],
                    params: vec![],
                    outputs: vec!["cc_sc.phy", "part.txt"],
                };
                run_stage(out, plan, seed, |_| {
                    let corpus = load_corpus(&config.corpus)?;
                    let partition =
                        CognatePartition::read_csv_path(&corpus, &out.join("cognates.csv"))?;
                    let cc = build_cognate_chars(&corpus, &partition)?;
                    let sc = build_soundclass_chars(&corpus);
                    let taxa: Vec<&str> =
                        corpus.doculects.iter().map(|d| d.id.as_str()).collect();
                    let cc = filter_variable(&cc, &taxa)?;
                    let sc = filter_variable(&sc, &taxa)?;
                    let (combined, spec) = combine_and_partition(&cc, &sc)?;
                    std::fs::write(out.join("cc_sc.phy"), to_phylip(&combined)?)?;
                    std::fs::write(out.join("part.txt"), spec.render())?;
                    Ok(())
                })?
            }
            "bionj" => {
                let plan = StagePlan {
                    name,
                    inputs: vec![("dist", out.join("dist.csv"))],
                    params: vec![],
                    outputs: vec!["bionj.tre"],
                };
                run_stage(out, plan, seed, |_| {
                    let dm = DistanceMatrix::read_csv(out.join("dist.csv"))?;
                    let tree = bionj(&dm)?;
                    std::fs::write(out.join("bionj.tre"), write_newick(&tree) + "\n")?;
                    Ok(())
                })?
            }
            "validate" => {
                let expert =
                    config.expert_tree.clone().expect("config validation requires tree");
                let plan = StagePlan {
                    name,
                    inputs: vec![
                        ("inferred", out.join("bionj.tre")),
                        ("expert", expert.clone()),
                    ],
                    params: vec![],
                    outputs: vec!["gqd.txt"],
                };
                run_stage(out, plan, seed, |seed| {
                    let inferred =
                        parse_newick(&std::fs::read_to_string(out.join("bionj.tre"))?)?.tree;
                    let reference =
                        parse_newick(&std::fs::read_to_string(&expert)?)?.tree;
                    let options = GqdOptions { seed, ..GqdOptions::default() };
                    let result = gqd(&inferred, &reference, &options)?;
                    std::fs::write(out.join("gqd.txt"), crate::ops::render_gqd(&result))?;
                    Ok(())
                })?
            }
            other => {
                return Err(CliError::Usage(format!("unknown stage {other:?}")));
            }
        };
        record(name, &result);
    }

    artifacts.sort_by(|a, b| a.path.cmp(&b.path));
    let manifest = Manifest { seed: config.seed, artifacts };
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes") + "\n";
    std::fs::write(out.join("manifest.json"), text)
        .map_err(|e| CliError::data(anyhow!(e).context("writing manifest")))?;
    Ok(manifest)
}
