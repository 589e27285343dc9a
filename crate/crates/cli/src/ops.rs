//! Standalone subcommands: single operations without caching.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use lexiphylo::align::PmiModel;
use lexiphylo::chars::{
    build_cognate_chars, build_soundclass_chars, combine_and_partition, filter_variable,
    to_phylip,
};
use lexiphylo::cogclust::{
    cluster_corpus, compute_features, gold_items, sample_training_pairs, train_classifier,
    ClusterOptions, CognatePartition, FeatureContext, TrainOptions,
};
use lexiphylo::corpus::{load_corpus, Corpus, GoldStandard};
use lexiphylo::lexdist::{distance_matrix, pmi_similarity, DistanceMatrix};
use lexiphylo::phylo::{
    bionj, gqd, parse_newick, write_newick, GqdOptions, GqdResult, Tree,
};
use lexiphylo::pmi_train::{train, TrainingConfig};
use lexiphylo::stats::{
    default_correlogram_bins, mantel, mantel_correlogram, punctuation_analysis, GeoMatrix,
};

use crate::error::CliError;

fn data<E: Into<anyhow::Error>>(e: E) -> CliError {
    CliError::data(e.into())
}

pub fn train_pmi(
    corpus: &Path,
    scores: &Path,
    gaps: &Path,
    seed: u64,
) -> Result<(), CliError> {
    let corpus = load_corpus(corpus).map_err(data)?;
    let config = TrainingConfig { seed, ..TrainingConfig::default() };
    let model = train(&corpus, &config).map_err(data)?;
    model.write_csv(scores, gaps).map_err(data)?;
    Ok(())
}

pub fn distances(
    corpus: &Path,
    scores: &Path,
    gaps: &Path,
    out_csv: &Path,
    out_nexus: Option<&Path>,
) -> Result<(), CliError> {
    let corpus = load_corpus(corpus).map_err(data)?;
    let model = PmiModel::read_csv(scores, gaps).map_err(data)?;
    let dm = distance_matrix(&corpus, pmi_similarity(&model));
    dm.write_csv(out_csv).map_err(data)?;
    if let Some(path) = out_nexus {
        dm.write_nexus(path).map_err(data)?;
    }
    Ok(())
}

/// Reorders a distance matrix to the corpus's doculect order so positional
/// lookups agree with corpus indices.
pub fn matrix_in_corpus_order(
    corpus: &Corpus,
    dm: &DistanceMatrix,
) -> Result<DistanceMatrix, anyhow::Error> {
    let ids: Vec<String> = corpus.doculects.iter().map(|d| d.id.clone()).collect();
    let positions: Vec<usize> = ids
        .iter()
        .map(|id| {
            dm.index_of(id)
                .ok_or_else(|| anyhow!("distance matrix has no row for doculect {id:?}"))
        })
        .collect::<Result<_, _>>()?;
    let mut out = DistanceMatrix::new(ids);
    for i in 0..positions.len() {
        for j in i + 1..positions.len() {
            if let Some(v) = dm.get(positions[i], positions[j]) {
                out.set(i, j, v);
            }
        }
    }
    Ok(out)
}

#[allow(clippy::too_many_arguments)]
pub fn cluster(
    corpus: &Path,
    scores: &Path,
    gaps: &Path,
    dist: &Path,
    gold: &Path,
    out: &Path,
    seed: u64,
    threshold: f64,
    mask: u8,
    svm_c: f64,
    max_pairs: usize,
) -> Result<(), CliError> {
    let corpus = load_corpus(corpus).map_err(data)?;
    let gold = GoldStandard::load(gold).map_err(data)?;
    let model = PmiModel::read_csv(scores, gaps).map_err(data)?;
    let dm = DistanceMatrix::read_csv(dist).map_err(data)?;
    let dm = matrix_in_corpus_order(&corpus, &dm).map_err(CliError::data)?;
    let items = gold_items(&corpus, &gold).map_err(data)?;
    let ctx = FeatureContext::new(&corpus, &model, &dm).map_err(data)?;
    let families: BTreeSet<&str> = items.values().map(|i| i.family.as_str()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pairs = sample_training_pairs(&ctx, &items, &families, max_pairs, &mut rng);
    if pairs.is_empty() {
        return Err(CliError::data(anyhow!(
            "gold standard yields no usable training pairs"
        )));
    }
    let rows: Vec<_> = pairs
        .iter()
        .map(|&(a, b, y)| compute_features(&ctx, a, b).map(|f| (f, y)))
        .collect::<Result<_, _>>()
        .map_err(data)?;
    let classifier =
        train_classifier(&rows, mask, &TrainOptions { c: svm_c, ..TrainOptions::default() })
            .map_err(data)?;
    let partition =
        cluster_corpus(&corpus, &model, &dm, &classifier, &ClusterOptions { threshold, seed })
            .map_err(data)?;
    partition.write_csv_path(&corpus, out).map_err(data)?;
    Ok(())
}

pub fn chars(
    corpus: &Path,
    cognates: &Path,
    out_phylip: &Path,
    out_partition: &Path,
) -> Result<(), CliError> {
    let corpus = load_corpus(corpus).map_err(data)?;
    let partition = CognatePartition::read_csv_path(&corpus, cognates).map_err(data)?;
    let cc = build_cognate_chars(&corpus, &partition).map_err(data)?;
    let sc = build_soundclass_chars(&corpus);
    let taxa: Vec<&str> = corpus.doculects.iter().map(|d| d.id.as_str()).collect();
    let cc = filter_variable(&cc, &taxa).map_err(data)?;
    let sc = filter_variable(&sc, &taxa).map_err(data)?;
    let (combined, spec) = combine_and_partition(&cc, &sc).map_err(data)?;
    std::fs::write(out_phylip, to_phylip(&combined).map_err(data)?).map_err(data)?;
    std::fs::write(out_partition, spec.render()).map_err(data)?;
    Ok(())
}

pub fn bionj_cmd(dist: &Path, out: &Path) -> Result<(), CliError> {
    let dm = DistanceMatrix::read_csv(dist).map_err(data)?;
    let tree = bionj(&dm).map_err(data)?;
    std::fs::write(out, write_newick(&tree) + "\n").map_err(data)?;
    Ok(())
}

fn read_tree(path: &Path) -> Result<Tree, CliError> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading {}", path.display()))
        .map_err(CliError::data)?;
    Ok(parse_newick(&text).map_err(data)?.tree)
}

/// Fixed-width report so the validate artifact is byte-stable.
pub fn render_gqd(result: &GqdResult) -> String {
    let mut out = String::new();
    out.push_str(&format!("gqd\t{:.6}\n", result.value));
    out.push_str(&format!("quartets\t{}\n", result.quartets));
    out.push_str(&format!(
        "method\t{}\n",
        if result.exact { "exact" } else { "sampled" }
    ));
    if let Some(se) = result.standard_error {
        out.push_str(&format!("standard_error\t{se:.6}\n"));
    }
    out
}

pub fn gqd_cmd(
    tree: &Path,
    reference: &Path,
    samples: usize,
    seed: u64,
) -> Result<(), CliError> {
    let inferred = read_tree(tree)?;
    let expert = read_tree(reference)?;
    let options = GqdOptions { samples, seed, ..GqdOptions::default() };
    let result = gqd(&inferred, &expert, &options).map_err(data)?;
    print!("{}", render_gqd(&result));
    Ok(())
}

fn read_coordinates(path: &Path) -> Result<BTreeMap<String, (f64, f64)>, CliError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(data)?;
    let headers = reader.headers().map_err(data)?.clone();
    let expected = ["id", "latitude", "longitude"];
    if headers.iter().ne(expected) {
        return Err(CliError::data(anyhow!(
            "coordinate file must have header id,latitude,longitude"
        )));
    }
    let mut coords = BTreeMap::new();
    for row in reader.records() {
        let row = row.map_err(data)?;
        let id = row.get(0).unwrap_or_default().to_string();
        let lat: f64 = row
            .get(1)
            .unwrap_or_default()
            .parse()
            .map_err(|_| CliError::data(anyhow!("bad latitude for {id:?}")))?;
        let lon: f64 = row
            .get(2)
            .unwrap_or_default()
            .parse()
            .map_err(|_| CliError::data(anyhow!("bad longitude for {id:?}")))?;
        if coords.insert(id.clone(), (lat, lon)).is_some() {
            return Err(CliError::data(anyhow!("duplicate coordinate id {id:?}")));
        }
    }
    Ok(coords)
}

fn dense_rows(dm: &DistanceMatrix) -> Result<Vec<Vec<f64>>, CliError> {
    let n = dm.len();
    let mut rows = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..n {
            rows[i][j] = dm.get(i, j).ok_or_else(|| {
                CliError::data(anyhow!(
                    "distance between {:?} and {:?} is undefined; Mantel needs a complete matrix",
                    dm.ids[i],
                    dm.ids[j]
                ))
            })?;
        }
    }
    Ok(rows)
}

pub fn mantel_cmd(
    geo: &Path,
    ling: &Path,
    permutations: usize,
    seed: u64,
    correlogram: bool,
    out: Option<&Path>,
) -> Result<(), CliError> {
    let coords = read_coordinates(geo)?;
    let dm = DistanceMatrix::read_csv(ling).map_err(data)?;
    let points: Vec<(String, f64, f64)> = dm
        .ids
        .iter()
        .map(|id| {
            coords
                .get(id)
                .map(|&(lat, lon)| (id.clone(), lat, lon))
                .ok_or_else(|| CliError::data(anyhow!("no coordinates for doculect {id:?}")))
        })
        .collect::<Result<_, _>>()?;
    let geo = GeoMatrix::from_coordinates(&points).map_err(data)?;
    let ling_rows = dense_rows(&dm)?;

    let report = if correlogram {
        let bins = default_correlogram_bins();
        let rows = mantel_correlogram(&geo, &ling_rows, &bins, permutations, seed)
            .map_err(data)?;
        let mut text = String::from("lower_km,upper_km,n_pairs,r,p,significant,excluded\n");
        for b in rows {
            let fmt_opt = |v: Option<f64>| match v {
                Some(v) => format!("{v:.6}"),
                None => String::new(),
            };
            text.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                b.lower,
                b.upper,
                b.n_pairs,
                fmt_opt(b.r),
                fmt_opt(b.p),
                b.significant,
                b.excluded
            ));
        }
        text
    } else {
        let result = mantel(geo.rows(), &ling_rows, permutations, seed).map_err(data)?;
        format!("r\t{:.6}\np\t{:.6}\n", result.r, result.p)
    };

    match out {
        Some(path) => std::fs::write(path, report).map_err(data)?,
        None => print!("{report}"),
    }
    Ok(())
}

fn read_delta_flags(path: &Path) -> Result<BTreeMap<String, bool>, CliError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(data)?;
    let headers = reader.headers().map_err(data)?.clone();
    if headers.iter().ne(["family", "delta"]) {
        return Err(CliError::data(anyhow!(
            "delta flag file must have header family,delta"
        )));
    }
    let mut flags = BTreeMap::new();
    for row in reader.records() {
        let row = row.map_err(data)?;
        let family = row.get(0).unwrap_or_default().to_string();
        let delta = match row.get(1).unwrap_or_default() {
            "true" => true,
            "false" => false,
            other => {
                return Err(CliError::data(anyhow!(
                    "delta flag for {family:?} must be true or false, got {other:?}"
                )))
            }
        };
        if flags.insert(family.clone(), delta).is_some() {
            return Err(CliError::data(anyhow!("duplicate family {family:?}")));
        }
    }
    Ok(flags)
}

/// Loads one tree per `*.tre` file in a directory; the family name is the
/// file stem.
fn read_tree_dir(dir: &Path) -> Result<BTreeMap<String, Tree>, CliError> {
    let mut trees = BTreeMap::new();
    let entries = std::fs::read_dir(dir)
        .with_context(|| format!("reading tree dir {}", dir.display()))
        .map_err(CliError::data)?;
    for entry in entries {
        let path = entry.map_err(data)?.path();
        if path.extension().and_then(|e| e.to_str()) != Some("tre") {
            continue;
        }
        let family = path
            .file_stem()
            .and_then(|s| s.to_str())
            .ok_or_else(|| CliError::data(anyhow!("unusable tree file name {path:?}")))?
            .to_string();
        trees.insert(family, read_tree(&path)?);
    }
    Ok(trees)
}

#[allow(clippy::too_many_arguments)]
pub fn punctuation_cmd(
    corpus: &Path,
    dist: &Path,
    trees: Option<&Path>,
    delta: &Path,
    out: Option<&Path>,
    alpha: f64,
) -> Result<(), CliError> {
    let corpus = load_corpus(corpus).map_err(data)?;
    let dm = DistanceMatrix::read_csv(dist).map_err(data)?;
    let trees = match trees {
        Some(dir) => read_tree_dir(dir)?,
        None => BTreeMap::new(),
    };
    let flags = read_delta_flags(delta)?;
    let rows = punctuation_analysis(&corpus, &dm, &trees, &flags, alpha).map_err(data)?;

    let mut text = String::from("family,slope,intercept,p_value,n_taxa,significant\n");
    for r in &rows {
        text.push_str(&format!(
            "{},{:.6},{:.6},{:.6},{},{}\n",
            r.family, r.slope, r.intercept, r.p_value, r.n_taxa, r.significant
        ));
    }
    match out {
        Some(path) => std::fs::write(path, text).map_err(data)?,
        None => print!("{text}"),
    }
    Ok(())
}

pub fn pipeline_cmd(config: &Path, out_dir: Option<&PathBuf>) -> Result<(), CliError> {
    let config = crate::config::PipelineConfig::load(config, out_dir.map(|p| p.as_path()))?;
    let manifest = crate::pipeline::run_pipeline(&config)?;
    for a in &manifest.artifacts {
        println!("{}\t{}\t{}", a.status, a.stage, a.path);
    }
    Ok(())
}
