//! Gold-standard handling, feature-subset model selection, and corpus-wide
//! cognate clustering.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::align::PmiModel;
use crate::corpus::{Corpus, GoldStandard};
use crate::lexdist::DistanceMatrix;

use super::classify::{train_classifier, train_logistic, Classifier, TrainOptions};
use super::features::{compute_features, mask_names, FeatureContext, PairFeatures};
use super::labelprop::label_propagation;
use super::{bcubed_f, CogclustError, CognatePartition, FormOccurrence};

/// Expert judgment for one matched form occurrence.
#[derive(Debug, Clone, PartialEq)]
pub struct GoldItem {
    pub family: String,
    pub label: String,
}

/// Matches every gold record to a form occurrence of the corpus.
///
/// Rejects doculects listed under two family names (in the gold data or
/// against the corpus), unknown doculects, and records whose transcription
/// has no unclaimed counterpart in the corpus.
pub fn gold_items(
    corpus: &Corpus,
    gold: &GoldStandard,
) -> Result<BTreeMap<FormOccurrence, GoldItem>, CogclustError> {
    let mut family_of: BTreeMap<&str, &str> = BTreeMap::new();
    let mut items: BTreeMap<FormOccurrence, GoldItem> = BTreeMap::new();
    for record in &gold.records {
        if let Some(&known) = family_of.get(record.doculect_id.as_str()) {
            if known != record.family {
                return Err(CogclustError::FamilyConflict {
                    doculect: record.doculect_id.clone(),
                    a: known.to_string(),
                    b: record.family.clone(),
                });
            }
        } else {
            family_of.insert(&record.doculect_id, &record.family);
        }
        let di = corpus
            .doculect_index(&record.doculect_id)
            .ok_or_else(|| CogclustError::UnknownDoculect(record.doculect_id.clone()))?;
        let corpus_family = &corpus.doculects[di].family;
        if !corpus_family.is_empty() && *corpus_family != record.family {
            return Err(CogclustError::FamilyConflict {
                doculect: record.doculect_id.clone(),
                a: corpus_family.clone(),
                b: record.family.clone(),
            });
        }
        let forms = corpus.doculects[di].forms(record.concept);
        let occ = forms
            .iter()
            .enumerate()
            .find(|(si, form)| {
                form.segments == record.form.segments
                    && !items.contains_key(&FormOccurrence {
                        doculect: di,
                        concept: record.concept,
                        synonym: *si,
                    })
            })
            .map(|(si, _)| FormOccurrence { doculect: di, concept: record.concept, synonym: si })
            .ok_or_else(|| CogclustError::GoldMismatch {
                doculect: record.doculect_id.clone(),
                concept: corpus.concepts[record.concept].clone(),
            })?;
        items.insert(occ, GoldItem { family: record.family.clone(), label: record.cognate_class.clone() });
    }
    Ok(items)
}

/// The gold standard as a partition, class labels taken verbatim.
pub fn partition_from_gold(
    corpus: &Corpus,
    gold: &GoldStandard,
) -> Result<CognatePartition, CogclustError> {
    let items = gold_items(corpus, gold)?;
    let mut partition = CognatePartition::new();
    for (occ, item) in items {
        partition.assign(occ, item.label);
    }
    Ok(partition)
}

/// All labeled synonymous cross-doculect pairs within the allowed families
/// whose doculect distance is defined, downsampled to `max_pairs`.
///
/// Pairs across two families count as non-cognate regardless of class label.
pub fn sample_training_pairs(
    ctx: &FeatureContext<'_>,
    items: &BTreeMap<FormOccurrence, GoldItem>,
    families: &BTreeSet<&str>,
    max_pairs: usize,
    rng: &mut impl Rng,
) -> Vec<(FormOccurrence, FormOccurrence, bool)> {
    let mut by_concept: BTreeMap<usize, Vec<(&FormOccurrence, &GoldItem)>> = BTreeMap::new();
    for (occ, item) in items {
        if families.contains(item.family.as_str()) {
            by_concept.entry(occ.concept).or_default().push((occ, item));
        }
    }
    let mut candidates = Vec::new();
    for list in by_concept.values() {
        for (i, (occ_a, item_a)) in list.iter().enumerate() {
            for (occ_b, item_b) in &list[i + 1..] {
                if occ_a.doculect == occ_b.doculect {
                    continue;
                }
                if ctx.stats(occ_a.doculect, occ_b.doculect).is_none() {
                    continue;
                }
                let cognate = item_a.family == item_b.family && item_a.label == item_b.label;
                candidates.push((**occ_a, **occ_b, cognate));
            }
        }
    }
    if candidates.len() > max_pairs {
        candidates.shuffle(rng);
        candidates.truncate(max_pairs);
    }
    candidates
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClassifierKind {
    Svm,
    Logistic,
}

#[derive(Debug, Clone)]
pub struct SelectionOptions {
    /// Random train/test family splits to average over.
    pub splits: usize,
    /// Families per training side (capped at one less than available).
    pub train_families: usize,
    pub max_train_pairs: usize,
    pub threshold: f64,
    pub classifier: ClassifierKind,
    pub train: TrainOptions,
    pub seed: u64,
}

impl Default for SelectionOptions {
    fn default() -> Self {
        SelectionOptions {
            splits: 10,
            train_families: 6,
            max_train_pairs: 7000,
            threshold: 0.25,
            classifier: ClassifierKind::Svm,
            train: TrainOptions::default(),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubsetScore {
    pub mask: u8,
    pub features: Vec<&'static str>,
    pub mean_f: f64,
}

/// Scores every non-empty subset of the seven features by training on the
/// training families of each split and clustering the held-out ones, then
/// ranks by mean B-cubed F (ties: fewer features, then lower mask).
pub fn model_selection(
    gold: &GoldStandard,
    corpus: &Corpus,
    model: &PmiModel,
    dmatrix: &DistanceMatrix,
    options: &SelectionOptions,
) -> Result<Vec<SubsetScore>, CogclustError> {
    let items = gold_items(corpus, gold)?;
    let families: Vec<String> = {
        let set: BTreeSet<&str> = items.values().map(|g| g.family.as_str()).collect();
        set.into_iter().map(str::to_string).collect()
    };
    if families.len() < 2 {
        return Err(CogclustError::InsufficientFamilies(families.len(), 2));
    }
    let ctx = FeatureContext::new(corpus, model, dmatrix)?;
    let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
    let mut totals = vec![0.0f64; 128];

    for _ in 0..options.splits {
        let mut shuffled = families.clone();
        shuffled.shuffle(&mut rng);
        let n_train = options.train_families.min(families.len() - 1).max(1);
        let train_fams: BTreeSet<&str> = shuffled[..n_train].iter().map(String::as_str).collect();
        let test_fams: BTreeSet<&str> = shuffled[n_train..].iter().map(String::as_str).collect();

        let pairs =
            sample_training_pairs(&ctx, &items, &train_fams, options.max_train_pairs, &mut rng);
        let rows: Vec<(PairFeatures, bool)> = pairs
            .iter()
            .map(|&(a, b, y)| Ok((compute_features(&ctx, a, b)?, y)))
            .collect::<Result<_, CogclustError>>()?;

        let test_docs: BTreeSet<usize> = items
            .iter()
            .filter(|(_, item)| test_fams.contains(item.family.as_str()))
            .map(|(occ, _)| occ.doculect)
            .collect();
        let graphs = concept_graphs(&ctx, &test_docs);
        let clustering_seed = rng.gen::<u64>();

        let scores: Vec<(u8, f64)> = (1u8..=127)
            .into_par_iter()
            .map(|mask| -> Result<(u8, f64), CogclustError> {
                let classifier: Box<dyn Classifier> = match options.classifier {
                    ClassifierKind::Svm => {
                        Box::new(train_classifier(&rows, mask, &options.train)?)
                    }
                    ClassifierKind::Logistic => Box::new(train_logistic(&rows, mask)?),
                };
                let predicted = cluster_graphs(
                    corpus,
                    &graphs,
                    classifier.as_ref(),
                    options.threshold,
                    clustering_seed,
                );
                let mut gold_map = HashMap::new();
                let mut pred_map = HashMap::new();
                for (occ, item) in &items {
                    if !test_docs.contains(&occ.doculect) {
                        continue;
                    }
                    let Some(label) = predicted.label(*occ) else { continue };
                    // Family-scoped gold keys: equal labels across families
                    // must not read as cognate.
                    gold_map.insert(*occ, format!("{}\u{1}{}", item.family, item.label));
                    pred_map.insert(*occ, label.to_string());
                }
                let b = bcubed_f(&gold_map, &pred_map)?;
                Ok((mask, b.f))
            })
            .collect::<Result<_, _>>()?;
        for (mask, f) in scores {
            totals[mask as usize] += f;
        }
    }

    let mut ranking: Vec<SubsetScore> = (1u8..=127)
        .map(|mask| SubsetScore {
            mask,
            features: mask_names(mask),
            mean_f: totals[mask as usize] / options.splits as f64,
        })
        .collect();
    ranking.sort_by(|a, b| {
        b.mean_f
            .total_cmp(&a.mean_f)
            .then(a.mask.count_ones().cmp(&b.mask.count_ones()))
            .then(a.mask.cmp(&b.mask))
    });
    Ok(ranking)
}

#[derive(Debug, Clone)]
pub struct ClusterOptions {
    pub threshold: f64,
    pub seed: u64,
}

impl Default for ClusterOptions {
    fn default() -> Self {
        ClusterOptions { threshold: 0.25, seed: 0 }
    }
}

/// One concept's nodes and scored candidate edges.
type ConceptGraph = (usize, Vec<FormOccurrence>, Vec<(usize, usize, PairFeatures)>);

/// Nodes and feature-bearing edges per concept, restricted to `doculects`.
/// Pairs without a defined distance contribute no edge.
fn concept_graphs(ctx: &FeatureContext<'_>, doculects: &BTreeSet<usize>) -> Vec<ConceptGraph> {
    let corpus = ctx.corpus;
    (0..corpus.concepts.len())
        .map(|ci| {
            let mut nodes = Vec::new();
            for &di in doculects {
                for si in 0..corpus.doculects[di].forms(ci).len() {
                    nodes.push(FormOccurrence { doculect: di, concept: ci, synonym: si });
                }
            }
            let mut edges = Vec::new();
            for i in 0..nodes.len() {
                for j in (i + 1)..nodes.len() {
                    if nodes[i].doculect == nodes[j].doculect {
                        continue;
                    }
                    if ctx.stats(nodes[i].doculect, nodes[j].doculect).is_none() {
                        continue;
                    }
                    let features = compute_features(ctx, nodes[i], nodes[j])
                        .expect("stats checked, features must exist");
                    edges.push((i, j, features));
                }
            }
            (ci, nodes, edges)
        })
        .collect()
}

fn concept_seed(seed: u64, concept: usize) -> u64 {
    seed ^ (concept as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// Scores the prepared graphs with `classifier` and propagates labels,
/// one concept at a time in parallel.
fn cluster_graphs(
    corpus: &Corpus,
    graphs: &[ConceptGraph],
    classifier: &dyn Classifier,
    threshold: f64,
    seed: u64,
) -> CognatePartition {
    let labeled: Vec<Vec<(FormOccurrence, String)>> = graphs
        .par_iter()
        .map(|(ci, nodes, edges)| {
            let probs: Vec<(usize, usize, f64)> = edges
                .iter()
                .map(|&(i, j, ref f)| (i, j, classifier.predict_proba(f)))
                .collect();
            let raw = label_propagation(nodes.len(), &probs, threshold, concept_seed(seed, *ci));
            // Class numbering by first occurrence in corpus order.
            let mut class_of: HashMap<usize, usize> = HashMap::new();
            let mut next = 1usize;
            let mut out = Vec::with_capacity(nodes.len());
            for (node, &label) in nodes.iter().zip(&raw) {
                let k = *class_of.entry(label).or_insert_with(|| {
                    let k = next;
                    next += 1;
                    k
                });
                out.push((*node, format!("{}_{}", corpus.concepts[*ci], k)));
            }
            out
        })
        .collect();
    let mut partition = CognatePartition::new();
    for per_concept in labeled {
        for (occ, label) in per_concept {
            partition.assign(occ, label);
        }
    }
    partition
}

/// Clusters every concept of the corpus with a trained classifier.
pub fn cluster_corpus(
    corpus: &Corpus,
    model: &PmiModel,
    dmatrix: &DistanceMatrix,
    classifier: &dyn Classifier,
    options: &ClusterOptions,
) -> Result<CognatePartition, CogclustError> {
    let ctx = FeatureContext::new(corpus, model, dmatrix)?;
    let all: BTreeSet<usize> = (0..corpus.doculects.len()).collect();
    let graphs = concept_graphs(&ctx, &all);
    Ok(cluster_graphs(corpus, &graphs, classifier, options.threshold, options.seed))
}
