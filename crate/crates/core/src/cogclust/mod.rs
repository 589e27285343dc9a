//! Automatic cognate classification: pair features, a probabilistic
//! classifier, label-propagation clustering, and B-cubed evaluation.

mod bcubed;
mod classify;
mod features;
mod labelprop;
mod select;
mod svm;

pub use bcubed::{bcubed_f, BcubedScores};
pub use classify::{
    train_classifier, train_logistic, Classifier, ClassifierModel, LogisticModel, TrainOptions,
};
pub use features::{
    compute_features, mask_names, FeatureContext, PairFeatures, FEATURE_COUNT, FEATURE_NAMES,
};
pub use labelprop::label_propagation;
pub use select::{
    cluster_corpus, gold_items, model_selection, partition_from_gold, sample_training_pairs,
    ClassifierKind, ClusterOptions, GoldItem, SelectionOptions, SubsetScore,
};

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use thiserror::Error;

use crate::corpus::Corpus;

#[derive(Debug, Error)]
pub enum CogclustError {
    #[error("distance undefined for doculect pair {a:?}, {b:?}")]
    MissingDistance { a: String, b: String },
    #[error("training labels are degenerate: need both classes, got only {0}")]
    DegenerateLabels(u8),
    #[error("too few training pairs: {0} (need at least 10)")]
    TooFewPairs(usize),
    #[error("partitions cover different item sets")]
    ItemSetMismatch,
    #[error("gold standard has {0} families, need at least {1}")]
    InsufficientFamilies(usize, usize),
    #[error("doculect {doculect:?} appears under two families: {a:?} and {b:?}")]
    FamilyConflict { doculect: String, a: String, b: String },
    #[error("gold standard names doculect {0:?} which the corpus lacks")]
    UnknownDoculect(String),
    #[error("gold record for doculect {doculect:?}, concept {concept:?} matches no corpus form")]
    GoldMismatch { doculect: String, concept: String },
    #[error("cognate table row {line}: {message}")]
    Format { line: u64, message: String },
    #[error(transparent)]
    Lexdist(#[from] crate::lexdist::LexdistError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

/// One transcribed form inside a corpus: doculect, concept, and which of the
/// doculect's synonyms for that concept.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct FormOccurrence {
    pub doculect: usize,
    pub concept: usize,
    pub synonym: usize,
}

/// Per-concept assignment of every present form to a cognate class.
///
/// Class labels follow the `<concept>_<integer>` convention.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CognatePartition {
    by_concept: BTreeMap<usize, BTreeMap<(usize, usize), String>>,
}

impl CognatePartition {
    pub fn new() -> Self {
        CognatePartition::default()
    }

    pub fn assign(&mut self, occ: FormOccurrence, label: impl Into<String>) {
        self.by_concept
            .entry(occ.concept)
            .or_default()
            .insert((occ.doculect, occ.synonym), label.into());
    }

    pub fn label(&self, occ: FormOccurrence) -> Option<&str> {
        self.by_concept
            .get(&occ.concept)?
            .get(&(occ.doculect, occ.synonym))
            .map(|s| s.as_str())
    }

    pub fn is_empty(&self) -> bool {
        self.by_concept.values().all(|m| m.is_empty())
    }

    /// Distinct class labels of one concept, ordered by class index (the
    /// trailing integer), falling back to the label text.
    pub fn concept_classes(&self, concept: usize) -> Vec<String> {
        let mut labels: Vec<String> = match self.by_concept.get(&concept) {
            Some(m) => {
                let mut v: Vec<String> = m.values().cloned().collect();
                v.sort();
                v.dedup();
                v
            }
            None => Vec::new(),
        };
        labels.sort_by(|a, b| class_sort_key(a).cmp(&class_sort_key(b)));
        labels
    }

    /// True when every present (doculect, concept, synonym) of the corpus has
    /// a label and no label points outside the corpus.
    pub fn covers(&self, corpus: &Corpus) -> bool {
        for (ci, per_concept) in &self.by_concept {
            for (di, si) in per_concept.keys() {
                let Some(doc) = corpus.doculects.get(*di) else {
                    return false;
                };
                if *ci >= corpus.concepts.len() || *si >= doc.forms(*ci).len() {
                    return false;
                }
            }
        }
        for (di, doc) in corpus.doculects.iter().enumerate() {
            for ci in 0..corpus.concepts.len() {
                for si in 0..doc.forms(ci).len() {
                    if self
                        .label(FormOccurrence { doculect: di, concept: ci, synonym: si })
                        .is_none()
                    {
                        return false;
                    }
                }
            }
        }
        true
    }

    /// Rows `doculect_id,concept,transcription,cognate_class` in corpus order.
    pub fn write_csv<W: Write>(&self, corpus: &Corpus, writer: W) -> Result<(), CogclustError> {
        let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(writer);
        w.write_record(["doculect_id", "concept", "transcription", "cognate_class"])?;
        for (di, doc) in corpus.doculects.iter().enumerate() {
            for (ci, concept) in corpus.concepts.iter().enumerate() {
                for (si, form) in doc.forms(ci).iter().enumerate() {
                    let occ = FormOccurrence { doculect: di, concept: ci, synonym: si };
                    let label = self.label(occ).unwrap_or("");
                    w.write_record([doc.id.as_str(), concept, form.raw.as_str(), label])?;
                }
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_csv_path(&self, corpus: &Corpus, path: &Path) -> Result<(), CogclustError> {
        self.write_csv(corpus, std::fs::File::create(path)?)
    }

    /// Reads the CSV written by [`write_csv`], matching rows to corpus
    /// entries. Synonyms with identical transcriptions are matched in order
    /// of occurrence.
    pub fn read_csv<R: Read>(corpus: &Corpus, reader: R) -> Result<Self, CogclustError> {
        let mut r = csv::Reader::from_reader(reader);
        {
            let headers = r.headers()?;
            let expect = ["doculect_id", "concept", "transcription", "cognate_class"];
            if headers.iter().ne(expect) {
                return Err(CogclustError::Format {
                    line: 1,
                    message: format!("expected header {expect:?}, found {headers:?}"),
                });
            }
        }
        let mut partition = CognatePartition::new();
        for record in r.records() {
            let record = record?;
            let line = record.position().map_or(0, |p| p.line());
            let field = |i: usize| record.get(i).unwrap_or("").to_string();
            let (doc_id, concept, transcription, label) =
                (field(0), field(1), field(2), field(3));
            let di = corpus
                .doculect_index(&doc_id)
                .ok_or_else(|| CogclustError::Format {
                    line,
                    message: format!("unknown doculect {doc_id:?}"),
                })?;
            let ci = crate::corpus::concept_index(&concept).ok_or_else(|| {
                CogclustError::Format { line, message: format!("unknown concept {concept:?}") }
            })?;
            let forms = corpus.doculects[di].forms(ci);
            let si = forms
                .iter()
                .enumerate()
                .position(|(si, f)| {
                    f.raw == transcription
                        && partition
                            .label(FormOccurrence { doculect: di, concept: ci, synonym: si })
                            .is_none()
                })
                .ok_or_else(|| CogclustError::Format {
                    line,
                    message: format!(
                        "no unassigned form {transcription:?} for {doc_id:?} / {concept:?}"
                    ),
                })?;
            partition.assign(FormOccurrence { doculect: di, concept: ci, synonym: si }, label);
        }
        Ok(partition)
    }

    pub fn read_csv_path(corpus: &Corpus, path: &Path) -> Result<Self, CogclustError> {
        Self::read_csv(corpus, std::fs::File::open(path)?)
    }
}

/// Orders class labels `<stem>_<k>` numerically by k, then textually.
fn class_sort_key(label: &str) -> (u64, String) {
    match label.rsplit_once('_').and_then(|(_, k)| k.parse::<u64>().ok()) {
        Some(k) => (k, label.to_string()),
        None => (u64::MAX, label.to_string()),
    }
}
