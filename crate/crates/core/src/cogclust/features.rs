//! The seven per-word-pair features the cognacy classifier consumes.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{CogclustError, FormOccurrence};
use crate::align::{align_pmi, PmiModel};
use crate::corpus::Corpus;
use crate::lexdist::{pair_stats, pmi_similarity, DistanceMatrix, LanguagePairStats};

pub const FEATURE_COUNT: usize = 7;

pub const FEATURE_NAMES: [&str; FEATURE_COUNT] = [
    "pmi_similarity",
    "calibrated_p",
    "word_similarity",
    "language_distance",
    "language_log_distance",
    "avg_word_length",
    "concept_language_correlation",
];

/// Feature vector for one synonymous cross-doculect word pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairFeatures(pub [f64; FEATURE_COUNT]);

impl PairFeatures {
    /// The features selected by a 7-bit mask, lowest bit = first feature.
    pub fn select(&self, mask: u8) -> Vec<f64> {
        (0..FEATURE_COUNT)
            .filter(|i| mask & (1 << i) != 0)
            .map(|i| self.0[i])
            .collect()
    }
}

/// Names selected by a mask, for reports.
pub fn mask_names(mask: u8) -> Vec<&'static str> {
    (0..FEATURE_COUNT)
        .filter(|i| mask & (1 << i) != 0)
        .map(|i| FEATURE_NAMES[i])
        .collect()
}

/// Everything feature computation reuses across word pairs: per-doculect-pair
/// calibration stats and the two per-concept aggregates.
pub struct FeatureContext<'a> {
    pub corpus: &'a Corpus,
    pub model: &'a PmiModel,
    distances: &'a DistanceMatrix,
    stats: BTreeMap<(usize, usize), LanguagePairStats>,
    avg_len: Vec<f64>,
    correlation: Vec<f64>,
}

impl<'a> FeatureContext<'a> {
    /// Precomputes calibration stats for every doculect pair with a defined
    /// distance, then the per-concept averages and correlations.
    pub fn new(
        corpus: &'a Corpus,
        model: &'a PmiModel,
        distances: &'a DistanceMatrix,
    ) -> Result<FeatureContext<'a>, CogclustError> {
        let simfn = pmi_similarity(model);
        let wanted: Vec<(usize, usize)> = corpus
            .pairs()
            .into_iter()
            .filter(|&(i, j)| distances.get(i, j).is_some())
            .collect();
        let computed: Vec<((usize, usize), LanguagePairStats)> = wanted
            .par_iter()
            .map(|&(i, j)| {
                let s = pair_stats(&corpus.doculects[i], &corpus.doculects[j], &simfn)
                    .expect("a defined distance implies shared concepts");
                ((i, j), s)
            })
            .collect();
        let stats: BTreeMap<(usize, usize), LanguagePairStats> = computed.into_iter().collect();

        let n_concepts = corpus.concepts.len();
        let avg_len: Vec<f64> = (0..n_concepts)
            .map(|ci| {
                let lengths: Vec<usize> = corpus
                    .doculects
                    .iter()
                    .flat_map(|d| d.forms(ci).iter().map(|f| f.segments.len()))
                    .collect();
                if lengths.is_empty() {
                    0.0
                } else {
                    lengths.iter().sum::<usize>() as f64 / lengths.len() as f64
                }
            })
            .collect();

        // Per concept: Pearson correlation of (word similarity, language
        // distance) over all synonymous cross-doculect pairs.
        let correlation: Vec<f64> = (0..n_concepts)
            .map(|ci| {
                let mut xs = Vec::new();
                let mut ys = Vec::new();
                for (&(i, j), s) in &stats {
                    let Some(p) = s.p_value(ci) else { continue };
                    let d = distances.get(i, j).expect("stats exist only for defined pairs");
                    let n_word_pairs =
                        corpus.doculects[i].forms(ci).len() * corpus.doculects[j].forms(ci).len();
                    for _ in 0..n_word_pairs {
                        xs.push(-p.ln());
                        ys.push(d);
                    }
                }
                pearson(&xs, &ys).unwrap_or(0.0)
            })
            .collect();

        Ok(FeatureContext { corpus, model, distances, stats, avg_len, correlation })
    }

    fn pair_key(&self, a: usize, b: usize) -> (usize, usize) {
        if a < b {
            (a, b)
        } else {
            (b, a)
        }
    }

    /// The calibration stats of a doculect pair, if its distance is defined.
    pub fn stats(&self, a: usize, b: usize) -> Option<&LanguagePairStats> {
        self.stats.get(&self.pair_key(a, b))
    }
}

/// Pearson correlation; None when fewer than 2 samples or zero variance.
pub(crate) fn pearson(xs: &[f64], ys: &[f64]) -> Option<f64> {
    let n = xs.len();
    if n < 2 || n != ys.len() {
        return None;
    }
    let nf = n as f64;
    let mx = xs.iter().sum::<f64>() / nf;
    let my = ys.iter().sum::<f64>() / nf;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    let mut sxy = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
        sxy += (x - mx) * (y - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some(sxy / (sxx * syy).sqrt())
}

/// Computes the seven features for one synonymous cross-doculect pair.
/// The occurrences must share a concept and come from different doculects.
pub fn compute_features(
    ctx: &FeatureContext<'_>,
    a: FormOccurrence,
    b: FormOccurrence,
) -> Result<PairFeatures, CogclustError> {
    assert_eq!(a.concept, b.concept, "feature pairs are synonymous");
    assert_ne!(a.doculect, b.doculect, "feature pairs are cross-doculect");
    let missing = || CogclustError::MissingDistance {
        a: ctx.corpus.doculects[a.doculect].id.clone(),
        b: ctx.corpus.doculects[b.doculect].id.clone(),
    };
    let d = ctx.distances.get(a.doculect, b.doculect).ok_or_else(missing)?;
    let stats = ctx.stats(a.doculect, b.doculect).ok_or_else(missing)?;
    let p = stats
        .p_value(a.concept)
        .expect("both occurrences attest the concept");
    let form_a = &ctx.corpus.doculects[a.doculect].forms(a.concept)[a.synonym];
    let form_b = &ctx.corpus.doculects[b.doculect].forms(b.concept)[b.synonym];
    let pmi = align_pmi(form_a, form_b, ctx.model)
        .expect("corpus forms are non-empty")
        .score;
    let d_clamped = d.min(1.0 - 1e-9);
    Ok(PairFeatures([
        pmi,
        p,
        -p.ln(),
        d,
        -(1.0 - d_clamped).ln(),
        ctx.avg_len[a.concept],
        ctx.correlation[a.concept],
    ]))
}
