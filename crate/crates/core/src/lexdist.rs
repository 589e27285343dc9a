//! Calibrated pairwise language distance.
//!
//! For a doculect pair, the similarity of every concept pair forms a
//! calibration panel: the diagonal cell (c,c) is compared against all
//! off-diagonal cells to yield a per-concept p-value, the p-values are
//! combined into a Z statistic, and Z maps affinely onto a distance.

use rayon::prelude::*;
use std::path::Path;

use thiserror::Error;

use crate::align::{align_pmi, ldn, PmiModel};
use crate::corpus::{Corpus, Doculect, Form, CONCEPT_COUNT};

#[derive(Debug, Error)]
pub enum LexdistError {
    #[error("doculects {a:?} and {b:?} share no concepts")]
    NoSharedConcepts { a: String, b: String },
    #[error("p-value list is empty")]
    EmptyList,
    #[error("similarity table undefined at concept {0}")]
    UndefinedConcept(usize),
    #[error("matrix csv malformed: {0}")]
    MatrixFormat(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

/// Upper calibration bound: the Z of a full 40-concept panel where every
/// diagonal similarity beats all 1560 off-diagonal cells.
pub fn z_max() -> f64 {
    let n = CONCEPT_COUNT as f64;
    let panel = (CONCEPT_COUNT * CONCEPT_COUNT - CONCEPT_COUNT + 1) as f64;
    (n * panel.ln() - n) / n.sqrt()
}

/// Lower calibration bound: the Z of a full panel where every p-value is 1.
pub fn z_min() -> f64 {
    -(CONCEPT_COUNT as f64).sqrt()
}

/// Maps a Z statistic onto the calibrated distance scale. The bounds are
/// global constants so pairs with fewer shared concepts stay comparable.
pub fn distance_from_z(z: f64) -> f64 {
    (z_max() - z) / (z_max() - z_min())
}

/// Cross-concept similarity panel for one doculect pair. Row = concept in
/// the first doculect, column = concept in the second; cells are defined
/// only where both sides have entries.
#[derive(Debug, Clone)]
pub struct ConceptSimilarityTable {
    values: Vec<Option<f64>>,
}

impl ConceptSimilarityTable {
    pub fn get(&self, c1: usize, c2: usize) -> Option<f64> {
        self.values[c1 * CONCEPT_COUNT + c2]
    }

    /// Defined off-diagonal cells.
    pub fn off_diagonal(&self) -> impl Iterator<Item = f64> + '_ {
        self.values
            .iter()
            .enumerate()
            .filter(|(idx, _)| idx / CONCEPT_COUNT != idx % CONCEPT_COUNT)
            .filter_map(|(_, v)| *v)
    }
}

/// Builds the similarity panel: each defined cell is the maximum similarity
/// over all synonym pairs for that concept pair.
pub fn concept_similarities<F>(l1: &Doculect, l2: &Doculect, simfn: F) -> ConceptSimilarityTable
where
    F: Fn(&Form, &Form) -> f64,
{
    let mut values = vec![None; CONCEPT_COUNT * CONCEPT_COUNT];
    for c1 in l1.present_concepts() {
        for c2 in l2.present_concepts() {
            let mut best = f64::NEG_INFINITY;
            for w1 in l1.forms(c1) {
                for w2 in l2.forms(c2) {
                    best = best.max(simfn(w1, w2));
                }
            }
            values[c1 * CONCEPT_COUNT + c2] = Some(best);
        }
    }
    ConceptSimilarityTable { values }
}

/// The calibrated p-value of one concept: the fraction of the augmented
/// panel whose similarity reaches the diagonal cell.
///
/// p_c = (1 + #{off-diagonal cells >= diagonal}) / (1 + #off-diagonal cells)
pub fn p_value(table: &ConceptSimilarityTable, c: usize) -> Result<f64, LexdistError> {
    let diag = table
        .get(c, c)
        .ok_or(LexdistError::UndefinedConcept(c))?;
    let mut at_least = 0usize;
    let mut defined = 0usize;
    for v in table.off_diagonal() {
        defined += 1;
        if v >= diag {
            at_least += 1;
        }
    }
    Ok((1 + at_least) as f64 / (1 + defined) as f64)
}

/// Combines per-concept p-values: Z = (sum of -ln p  -  N) / sqrt(N).
pub fn z_score(p_values: &[f64]) -> Result<f64, LexdistError> {
    if p_values.is_empty() {
        return Err(LexdistError::EmptyList);
    }
    let n = p_values.len() as f64;
    let sum: f64 = p_values.iter().map(|p| -p.ln()).sum();
    Ok((sum - n) / n.sqrt())
}

/// Everything computed for one doculect pair: per-concept p-values (indexed
/// by concept, None where not shared), shared-concept count, Z, distance.
#[derive(Debug, Clone)]
pub struct LanguagePairStats {
    pub p_values: Vec<Option<f64>>,
    pub n: usize,
    pub z: f64,
    pub distance: f64,
}

impl LanguagePairStats {
    pub fn p_value(&self, concept: usize) -> Option<f64> {
        self.p_values[concept]
    }
}

/// Runs the full calibration for a doculect pair.
pub fn pair_stats<F>(l1: &Doculect, l2: &Doculect, simfn: F) -> Result<LanguagePairStats, LexdistError>
where
    F: Fn(&Form, &Form) -> f64,
{
    let table = concept_similarities(l1, l2, simfn);
    let mut p_values = vec![None; CONCEPT_COUNT];
    let mut collected = Vec::new();
    for c in 0..CONCEPT_COUNT {
        if table.get(c, c).is_some() {
            let p = p_value(&table, c)?;
            p_values[c] = Some(p);
            collected.push(p);
        }
    }
    if collected.is_empty() {
        return Err(LexdistError::NoSharedConcepts {
            a: l1.id.clone(),
            b: l2.id.clone(),
        });
    }
    let z = z_score(&collected)?;
    Ok(LanguagePairStats {
        p_values,
        n: collected.len(),
        z,
        distance: distance_from_z(z),
    })
}

/// Calibrated distance between two doculects under a similarity function.
pub fn language_distance<F>(l1: &Doculect, l2: &Doculect, simfn: F) -> Result<f64, LexdistError>
where
    F: Fn(&Form, &Form) -> f64,
{
    Ok(pair_stats(l1, l2, simfn)?.distance)
}

/// Similarity function backed by affine-gap alignment scores under a model.
pub fn pmi_similarity(model: &PmiModel) -> impl Fn(&Form, &Form) -> f64 + Sync + '_ {
    move |a, b| {
        align_pmi(a, b, model)
            .expect("corpus forms are non-empty")
            .score
    }
}

/// Similarity function 1 - LDN, used to bootstrap model training.
pub fn ldn_similarity() -> impl Fn(&Form, &Form) -> f64 + Sync {
    |a, b| 1.0 - ldn(a, b).expect("corpus forms are non-empty")
}

/// Symmetric pairwise distances over a corpus; `None` marks pairs with no
/// shared concepts.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix {
    pub ids: Vec<String>,
    d: Vec<Option<f64>>,
}

impl DistanceMatrix {
    pub fn new(ids: Vec<String>) -> DistanceMatrix {
        let n = ids.len();
        let mut d = vec![None; n * n];
        for i in 0..n {
            d[i * n + i] = Some(0.0);
        }
        DistanceMatrix { ids, d }
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn get(&self, i: usize, j: usize) -> Option<f64> {
        self.d[i * self.ids.len() + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        let n = self.ids.len();
        self.d[i * n + j] = Some(v);
        self.d[j * n + i] = Some(v);
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.ids.iter().position(|x| x == id)
    }

    /// True when every off-diagonal entry is defined.
    pub fn is_complete(&self) -> bool {
        self.d.iter().all(|v| v.is_some())
    }

    /// Writes the matrix as CSV: header row of ids (first cell empty), one
    /// row per id; missing entries are empty cells.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<(), LexdistError> {
        let mut w = csv::WriterBuilder::new()
            .has_headers(false)
            .from_path(path.as_ref())?;
        let mut header = vec![String::new()];
        header.extend(self.ids.iter().cloned());
        w.write_record(&header)?;
        let n = self.ids.len();
        for i in 0..n {
            let mut row = vec![self.ids[i].clone()];
            for j in 0..n {
                row.push(match self.get(i, j) {
                    Some(v) => format!("{v}"),
                    None => String::new(),
                });
            }
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads a matrix written by [`write_csv`](DistanceMatrix::write_csv).
    pub fn read_csv(path: impl AsRef<Path>) -> Result<DistanceMatrix, LexdistError> {
        let mut r = csv::ReaderBuilder::new()
            .has_headers(false)
            .from_path(path.as_ref())?;
        let mut records = r.records();
        let header = records
            .next()
            .ok_or_else(|| LexdistError::MatrixFormat("empty file".into()))??;
        let ids: Vec<String> = header.iter().skip(1).map(|s| s.to_string()).collect();
        let n = ids.len();
        let mut m = DistanceMatrix::new(ids.clone());
        for (i, rec) in records.enumerate() {
            let rec = rec?;
            if i >= n {
                return Err(LexdistError::MatrixFormat("more rows than ids".into()));
            }
            if rec.len() != n + 1 {
                return Err(LexdistError::MatrixFormat(format!(
                    "row {} has {} fields, expected {}",
                    i + 2,
                    rec.len(),
                    n + 1
                )));
            }
            if rec.get(0) != Some(ids[i].as_str()) {
                return Err(LexdistError::MatrixFormat(format!(
                    "row label {:?} does not match header id {:?}",
                    rec.get(0),
                    ids[i]
                )));
            }
            for j in 0..n {
                let field = rec.get(j + 1).unwrap_or("");
                if field.is_empty() {
                    continue;
                }
                let v: f64 = field.parse().map_err(|e| {
                    LexdistError::MatrixFormat(format!("bad value {field:?}: {e}"))
                })?;
                m.d[i * n + j] = Some(v);
            }
        }
        Ok(m)
    }

    /// Writes a Nexus file with TAXA and DISTANCES blocks (full matrix,
    /// labels on rows). Missing entries are written as `?`.
    pub fn write_nexus(&self, path: impl AsRef<Path>) -> Result<(), LexdistError> {
        let n = self.ids.len();
        let mut out = String::new();
        out.push_str("#NEXUS\n\nBEGIN TAXA;\n");
        out.push_str(&format!("  DIMENSIONS NTAX={n};\n"));
        out.push_str("  TAXLABELS\n");
        for id in &self.ids {
            out.push_str(&format!("    {id}\n"));
        }
        out.push_str("  ;\nEND;\n\nBEGIN DISTANCES;\n");
        out.push_str(&format!("  DIMENSIONS NTAX={n};\n"));
        out.push_str("  FORMAT TRIANGLE=BOTH DIAGONAL LABELS;\n  MATRIX\n");
        for i in 0..n {
            out.push_str(&format!("    {}", self.ids[i]));
            for j in 0..n {
                match self.get(i, j) {
                    Some(v) => out.push_str(&format!(" {v}")),
                    None => out.push_str(" ?"),
                }
            }
            out.push('\n');
        }
        out.push_str("  ;\nEND;\n");
        std::fs::write(path.as_ref(), out)?;
        Ok(())
    }
}

/// Computes all pairwise distances. Pairs are processed in parallel; the
/// result is independent of scheduling because each pair lands at a fixed
/// index.
pub fn distance_matrix<F>(corpus: &Corpus, simfn: F) -> DistanceMatrix
where
    F: Fn(&Form, &Form) -> f64 + Sync,
{
    let ids: Vec<String> = corpus.doculects.iter().map(|d| d.id.clone()).collect();
    let pairs = corpus.pairs();
    let computed: Vec<Option<f64>> = pairs
        .par_iter()
        .map(|&(i, j)| {
            language_distance(&corpus.doculects[i], &corpus.doculects[j], &simfn).ok()
        })
        .collect();
    let mut m = DistanceMatrix::new(ids);
    for (&(i, j), v) in pairs.iter().zip(computed) {
        if let Some(v) = v {
            m.set(i, j, v);
        }
    }
    m
}
