//! Binary character matrices: one character per cognate class and one per
//! (concept, sound class) pair, plus the Phylip/Nexus/partition exports that
//! downstream tree-inference tools consume.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::ops::Range;

use thiserror::Error;

use crate::cogclust::{CognatePartition, FormOccurrence};
use crate::corpus::{concept_index, Corpus, SoundClass, CONCEPTS};

#[derive(Debug, Error)]
pub enum CharsError {
    #[error("partition does not cover the corpus exactly")]
    PartitionCoverage,
    #[error("matrices have different taxa")]
    TaxaMismatch,
    #[error("unknown taxon {0:?}")]
    UnknownTaxon(String),
    #[error("unknown concept {0:?}")]
    UnknownConcept(String),
    #[error("taxa {a:?} and {b:?} both sanitize to {sanitized:?}")]
    NameCollision { a: String, b: String, sanitized: String },
    #[error("taxon {taxon:?} has no entry for concept {concept:?}")]
    MissingConcept { taxon: String, concept: String },
    #[error("phylip line {line}: {message}")]
    Format { line: usize, message: String },
}

/// Which of the two character systems a column belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CharKind {
    /// Cognate class membership; ids are class labels like `dog_149`.
    Cc,
    /// Sound-class presence; ids are `<concept>:<symbol>` like `dog:d`.
    Sc,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Character {
    pub id: String,
    pub kind: CharKind,
}

/// Taxa × binary characters with explicit missing values.
#[derive(Debug, Clone, PartialEq)]
pub struct CharacterMatrix {
    pub taxa: Vec<String>,
    pub characters: Vec<Character>,
    values: Vec<Option<bool>>,
}

impl CharacterMatrix {
    pub fn new(taxa: Vec<String>, characters: Vec<Character>) -> CharacterMatrix {
        let values = vec![None; taxa.len() * characters.len()];
        CharacterMatrix { taxa, characters, values }
    }

    pub fn ntaxa(&self) -> usize {
        self.taxa.len()
    }

    pub fn nchars(&self) -> usize {
        self.characters.len()
    }

    pub fn get(&self, taxon: usize, character: usize) -> Option<bool> {
        self.values[taxon * self.characters.len() + character]
    }

    pub fn set(&mut self, taxon: usize, character: usize, value: Option<bool>) {
        self.values[taxon * self.characters.len() + character] = value;
    }

    pub fn taxon_index(&self, taxon: &str) -> Option<usize> {
        self.taxa.iter().position(|t| t == taxon)
    }

    pub fn character_index(&self, id: &str) -> Option<usize> {
        self.characters.iter().position(|c| c.id == id)
    }

    /// The sub-matrix over a contiguous block of columns.
    pub fn column_block(&self, range: Range<usize>) -> CharacterMatrix {
        let mut out = CharacterMatrix::new(
            self.taxa.clone(),
            self.characters[range.clone()].to_vec(),
        );
        for t in 0..self.ntaxa() {
            for (k, c) in range.clone().enumerate() {
                out.set(t, k, self.get(t, c));
            }
        }
        out
    }
}

/// One character per cognate class: 1 when any of the taxon's forms for the
/// class's concept belongs to the class, 0 when the concept is attested but
/// no form does, missing when the concept is absent. Columns are ordered by
/// (concept, class index).
pub fn build_cognate_chars(
    corpus: &Corpus,
    partition: &CognatePartition,
) -> Result<CharacterMatrix, CharsError> {
    if !partition.covers(corpus) {
        return Err(CharsError::PartitionCoverage);
    }
    let mut characters = Vec::new();
    let mut columns: Vec<(usize, String)> = Vec::new();
    for ci in 0..corpus.concepts.len() {
        for label in partition.concept_classes(ci) {
            characters.push(Character { id: label.clone(), kind: CharKind::Cc });
            columns.push((ci, label));
        }
    }
    let taxa: Vec<String> = corpus.doculects.iter().map(|d| d.id.clone()).collect();
    let mut matrix = CharacterMatrix::new(taxa, characters);
    for (di, doc) in corpus.doculects.iter().enumerate() {
        for (k, (ci, label)) in columns.iter().enumerate() {
            if !doc.has_concept(*ci) {
                continue;
            }
            let hit = (0..doc.forms(*ci).len()).any(|si| {
                partition.label(FormOccurrence { doculect: di, concept: *ci, synonym: si })
                    == Some(label.as_str())
            });
            matrix.set(di, k, Some(hit));
        }
    }
    Ok(matrix)
}

/// One character per (concept, alphabet symbol): 1 when some form for the
/// concept contains the symbol, missing when the concept is absent.
pub fn build_soundclass_chars(corpus: &Corpus) -> CharacterMatrix {
    let mut characters = Vec::with_capacity(corpus.concepts.len() * 41);
    for concept in &corpus.concepts {
        for s in SoundClass::all() {
            characters.push(Character {
                id: format!("{concept}:{s}"),
                kind: CharKind::Sc,
            });
        }
    }
    let taxa: Vec<String> = corpus.doculects.iter().map(|d| d.id.clone()).collect();
    let mut matrix = CharacterMatrix::new(taxa, characters);
    for (di, doc) in corpus.doculects.iter().enumerate() {
        for ci in 0..corpus.concepts.len() {
            if !doc.has_concept(ci) {
                continue;
            }
            let present = symbol_set(corpus, di, ci);
            for s in SoundClass::all() {
                matrix.set(di, ci * 41 + s.index(), Some(present.contains(&s)));
            }
        }
    }
    matrix
}

/// Restricts to a taxa subset and keeps only variable characters: those with
/// at least one 0 and at least one 1 among their defined values.
pub fn filter_variable(
    matrix: &CharacterMatrix,
    subset: &[&str],
) -> Result<CharacterMatrix, CharsError> {
    let wanted: BTreeSet<&str> = subset.iter().copied().collect();
    for name in &wanted {
        if matrix.taxon_index(name).is_none() {
            return Err(CharsError::UnknownTaxon(name.to_string()));
        }
    }
    let rows: Vec<usize> = (0..matrix.ntaxa())
        .filter(|&t| wanted.contains(matrix.taxa[t].as_str()))
        .collect();
    let keep: Vec<usize> = (0..matrix.nchars())
        .filter(|&c| {
            let mut zeros = 0;
            let mut ones = 0;
            for &t in &rows {
                match matrix.get(t, c) {
                    Some(true) => ones += 1,
                    Some(false) => zeros += 1,
                    None => {}
                }
            }
            zeros >= 1 && ones >= 1
        })
        .collect();
    let taxa: Vec<String> = rows.iter().map(|&t| matrix.taxa[t].clone()).collect();
    let characters: Vec<Character> =
        keep.iter().map(|&c| matrix.characters[c].clone()).collect();
    let mut out = CharacterMatrix::new(taxa, characters);
    for (ti, &t) in rows.iter().enumerate() {
        for (ki, &c) in keep.iter().enumerate() {
            out.set(ti, ki, matrix.get(t, c));
        }
    }
    Ok(out)
}

/// A named block of 1-based column positions, for partitioned analyses.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PartitionSpec {
    pub blocks: Vec<(String, usize, usize)>,
}

impl PartitionSpec {
    /// RAxML-style partition lines, e.g. `BIN, cc = 1-3`.
    pub fn render(&self) -> String {
        let mut out = String::new();
        for (name, start, end) in &self.blocks {
            writeln!(out, "BIN, {name} = {start}-{end}").unwrap();
        }
        out
    }
}

/// Concatenates the cognate-class block before the sound-class block and
/// records where each lands. Empty blocks are left out of the spec.
pub fn combine_and_partition(
    cc: &CharacterMatrix,
    sc: &CharacterMatrix,
) -> Result<(CharacterMatrix, PartitionSpec), CharsError> {
    if cc.taxa != sc.taxa {
        return Err(CharsError::TaxaMismatch);
    }
    let mut characters = cc.characters.clone();
    characters.extend(sc.characters.iter().cloned());
    let mut combined = CharacterMatrix::new(cc.taxa.clone(), characters);
    for t in 0..cc.ntaxa() {
        for c in 0..cc.nchars() {
            combined.set(t, c, cc.get(t, c));
        }
        for c in 0..sc.nchars() {
            combined.set(t, cc.nchars() + c, sc.get(t, c));
        }
    }
    let mut blocks = Vec::new();
    if cc.nchars() > 0 {
        blocks.push(("cc".to_string(), 1, cc.nchars()));
    }
    if sc.nchars() > 0 {
        blocks.push(("sc".to_string(), cc.nchars() + 1, cc.nchars() + sc.nchars()));
    }
    Ok((combined, PartitionSpec { blocks }))
}

/// Replaces non-alphanumeric characters with '_' and truncates to 50.
pub fn sanitize_taxon(name: &str) -> String {
    name.chars()
        .map(|c| if c.is_ascii_alphanumeric() { c } else { '_' })
        .take(50)
        .collect()
}

fn sanitized_taxa(matrix: &CharacterMatrix) -> Result<Vec<String>, CharsError> {
    let sanitized: Vec<String> = matrix.taxa.iter().map(|t| sanitize_taxon(t)).collect();
    for i in 0..sanitized.len() {
        for j in (i + 1)..sanitized.len() {
            if sanitized[i] == sanitized[j] {
                return Err(CharsError::NameCollision {
                    a: matrix.taxa[i].clone(),
                    b: matrix.taxa[j].clone(),
                    sanitized: sanitized[i].clone(),
                });
            }
        }
    }
    Ok(sanitized)
}

fn render_row(matrix: &CharacterMatrix, taxon: usize) -> String {
    (0..matrix.nchars())
        .map(|c| match matrix.get(taxon, c) {
            Some(true) => '1',
            Some(false) => '0',
            None => '?',
        })
        .collect()
}

/// Relaxed Phylip: `<ntaxa> <nchars>` header, then `<name>\t<row>` lines.
pub fn to_phylip(matrix: &CharacterMatrix) -> Result<String, CharsError> {
    let names = sanitized_taxa(matrix)?;
    let mut out = format!("{} {}\n", matrix.ntaxa(), matrix.nchars());
    for (t, name) in names.iter().enumerate() {
        writeln!(out, "{}\t{}", name, render_row(matrix, t)).unwrap();
    }
    Ok(out)
}

/// Reads the relaxed Phylip produced by [`to_phylip`]. The format carries no
/// character names, so columns come back with positional ids `c1..cN`.
pub fn from_phylip(text: &str) -> Result<CharacterMatrix, CharsError> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or(CharsError::Format {
        line: 1,
        message: "empty file".to_string(),
    })?;
    let mut parts = header.split_whitespace();
    let parse = |field: Option<&str>| -> Result<usize, CharsError> {
        field
            .and_then(|f| f.parse().ok())
            .ok_or_else(|| CharsError::Format {
                line: 1,
                message: format!("expected `<ntaxa> <nchars>`, found {header:?}"),
            })
    };
    let ntaxa = parse(parts.next())?;
    let nchars = parse(parts.next())?;
    let characters = (1..=nchars)
        .map(|i| Character { id: format!("c{i}"), kind: CharKind::Sc })
        .collect();
    let mut taxa = Vec::with_capacity(ntaxa);
    let mut rows = Vec::with_capacity(ntaxa);
    for (idx, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let lineno = idx + 1;
        let (name, row) = line.split_once(char::is_whitespace).ok_or_else(|| {
            CharsError::Format { line: lineno, message: "expected `<name>\\t<row>`".to_string() }
        })?;
        let row = row.trim();
        if row.chars().count() != nchars {
            return Err(CharsError::Format {
                line: lineno,
                message: format!("expected {nchars} states, found {}", row.chars().count()),
            });
        }
        let mut values = Vec::with_capacity(nchars);
        for ch in row.chars() {
            values.push(match ch {
                '0' => Some(false),
                '1' => Some(true),
                '?' => None,
                other => {
                    return Err(CharsError::Format {
                        line: lineno,
                        message: format!("invalid state {other:?}"),
                    })
                }
            });
        }
        taxa.push(name.to_string());
        rows.push(values);
    }
    if taxa.len() != ntaxa {
        return Err(CharsError::Format {
            line: text.lines().count(),
            message: format!("header promised {ntaxa} taxa, found {}", taxa.len()),
        });
    }
    let mut matrix = CharacterMatrix::new(taxa, characters);
    for (t, row) in rows.into_iter().enumerate() {
        for (c, v) in row.into_iter().enumerate() {
            matrix.set(t, c, v);
        }
    }
    Ok(matrix)
}

/// Nexus DATA block with binary symbols and '?' for missing.
pub fn to_nexus(matrix: &CharacterMatrix) -> Result<String, CharsError> {
    let names = sanitized_taxa(matrix)?;
    let mut out = String::from("#NEXUS\nBEGIN DATA;\n");
    writeln!(out, "DIMENSIONS NTAX={} NCHAR={};", matrix.ntaxa(), matrix.nchars()).unwrap();
    out.push_str("FORMAT DATATYPE=STANDARD SYMBOLS=\"01\" MISSING=?;\nMATRIX\n");
    for (t, name) in names.iter().enumerate() {
        writeln!(out, "{}\t{}", name, render_row(matrix, t)).unwrap();
    }
    out.push_str(";\nEND;\n");
    Ok(out)
}

/// Cognate-class and sound-class mutation counts between two taxa for one
/// concept, matching how character changes along a branch are tallied.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MutationCounts {
    pub cc: usize,
    pub sc: usize,
}

/// Counts mutation events between two attested entries of `concept`.
///
/// Cognate-class events are the symmetric difference of the two class sets.
/// Sound-class events depend on whether any class is shared: a word that
/// stayed in its class mutates in place, so the differing symbols count; a
/// full replacement discards every old symbol and introduces every new one,
/// so both inventories count even where they overlap.
pub fn mutation_events(
    corpus: &Corpus,
    partition: &CognatePartition,
    taxon_a: &str,
    taxon_b: &str,
    concept: &str,
) -> Result<MutationCounts, CharsError> {
    let ci = concept_index(concept)
        .ok_or_else(|| CharsError::UnknownConcept(concept.to_string()))?;
    let resolve = |taxon: &str| -> Result<usize, CharsError> {
        let di = corpus
            .doculect_index(taxon)
            .ok_or_else(|| CharsError::UnknownTaxon(taxon.to_string()))?;
        if !corpus.doculects[di].has_concept(ci) {
            return Err(CharsError::MissingConcept {
                taxon: taxon.to_string(),
                concept: CONCEPTS[ci].to_string(),
            });
        }
        Ok(di)
    };
    let da = resolve(taxon_a)?;
    let db = resolve(taxon_b)?;
    let classes = |di: usize| -> BTreeSet<&str> {
        (0..corpus.doculects[di].forms(ci).len())
            .filter_map(|si| {
                partition.label(FormOccurrence { doculect: di, concept: ci, synonym: si })
            })
            .collect()
    };
    let (ca, cb) = (classes(da), classes(db));
    let cc = ca.symmetric_difference(&cb).count();
    let (sa, sb) = (symbol_set(corpus, da, ci), symbol_set(corpus, db, ci));
    let sc = if ca.intersection(&cb).next().is_some() {
        sa.symmetric_difference(&sb).count()
    } else {
        sa.len() + sb.len()
    };
    Ok(MutationCounts { cc, sc })
}

/// Distinct symbols across all of a doculect's forms for one concept.
fn symbol_set(corpus: &Corpus, doculect: usize, concept: usize) -> BTreeSet<SoundClass> {
    corpus.doculects[doculect]
        .forms(concept)
        .iter()
        .flat_map(|f| f.segments.iter().copied())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{strip_diacritics, Doculect};

    fn form(s: &str) -> crate::corpus::Form {
        strip_diacritics(s).unwrap()
    }

    /// Old and Modern English restricted to the paper's two worked concepts.
    fn english_fixture() -> (Corpus, CognatePartition) {
        let dog = concept_index("dog").unwrap();
        let tree = concept_index("tree").unwrap();
        let mut oe = Doculect::new("old_english", "Old English", "IE");
        oe.entries[dog] = vec![form("hund")];
        oe.entries[tree] = vec![form("treow")];
        let mut me = Doculect::new("modern_english", "Modern English", "IE");
        me.entries[dog] = vec![form("dag")];
        me.entries[tree] = vec![form("tri")];
        let corpus = Corpus::from_doculects(vec![oe, me]);
        let mut partition = CognatePartition::new();
        let occ = |d, c| FormOccurrence { doculect: d, concept: c, synonym: 0 };
        partition.assign(occ(0, dog), "dog_149");
        partition.assign(occ(1, dog), "dog_150");
        partition.assign(occ(0, tree), "tree_17");
        partition.assign(occ(1, tree), "tree_17");
        (corpus, partition)
    }

    #[test]
    fn cognate_chars_for_the_english_fixture() {
        let (corpus, partition) = english_fixture();
        let m = build_cognate_chars(&corpus, &partition).unwrap();
        let ids: Vec<&str> = m.characters.iter().map(|c| c.id.as_str()).collect();
        assert_eq!(ids, ["dog_149", "dog_150", "tree_17"]);
        assert!(m.characters.iter().all(|c| c.kind == CharKind::Cc));
        let row = |t: usize| (0..3).map(|c| m.get(t, c)).collect::<Vec<_>>();
        assert_eq!(row(0), [Some(true), Some(false), Some(true)]);
        assert_eq!(row(1), [Some(false), Some(true), Some(true)]);
    }

    #[test]
    fn word_replacement_flips_two_cognate_characters() {
        let (corpus, partition) = english_fixture();
        let m = mutation_events(&corpus, &partition, "old_english", "modern_english", "dog")
            .unwrap();
        assert_eq!(m.cc, 2, "dog_149 1->0 and dog_150 0->1");
    }

    #[test]
    fn cognate_words_flip_no_cognate_characters() {
        let (corpus, partition) = english_fixture();
        let m = mutation_events(&corpus, &partition, "old_english", "modern_english", "tree")
            .unwrap();
        assert_eq!(m.cc, 0);
    }

    #[test]
    fn replacement_counts_full_symbol_turnover() {
        let (corpus, partition) = english_fixture();
        let m = mutation_events(&corpus, &partition, "old_english", "modern_english", "dog")
            .unwrap();
        // hund loses h,u,n,d and dag gains d,a,g: the d counts on both sides.
        assert_eq!(m.sc, 7);
    }

    #[test]
    fn in_place_change_counts_differing_symbols() {
        let (corpus, partition) = english_fixture();
        let m = mutation_events(&corpus, &partition, "old_english", "modern_english", "tree")
            .unwrap();
        // treow -> tri: i gained; e, o, w lost; t and r persist.
        assert_eq!(m.sc, 4);
    }

    #[test]
    fn mutation_events_require_attested_entries() {
        let (corpus, partition) = english_fixture();
        assert!(matches!(
            mutation_events(&corpus, &partition, "old_english", "modern_english", "fish"),
            Err(CharsError::MissingConcept { .. })
        ));
        assert!(matches!(
            mutation_events(&corpus, &partition, "nope", "modern_english", "dog"),
            Err(CharsError::UnknownTaxon(_))
        ));
    }

    #[test]
    fn soundclass_chars_use_presence_semantics() {
        let (corpus, _) = english_fixture();
        let m = build_soundclass_chars(&corpus);
        assert_eq!(m.nchars(), 40 * 41);
        let dog_d = m.character_index("dog:d").unwrap();
        // d occurs in both hund and dag, so the character does not differ.
        assert_eq!(m.get(0, dog_d), Some(true));
        assert_eq!(m.get(1, dog_d), Some(true));
        let dog_h = m.character_index("dog:h").unwrap();
        assert_eq!(m.get(0, dog_h), Some(true));
        assert_eq!(m.get(1, dog_h), Some(false));
        // Concepts missing from both doculects stay missing.
        let fish_f = m.character_index("fish:f").unwrap();
        assert_eq!(m.get(0, fish_f), None);
        // Character-level diffs for dog: a,g,h,u,n (not d).
        let dog_cols = (0..41).map(|k| concept_index("dog").unwrap() * 41 + k);
        let differing = dog_cols.filter(|&c| m.get(0, c) != m.get(1, c)).count();
        assert_eq!(differing, 5);
    }

    #[test]
    fn repeated_symbols_count_once() {
        let dog = concept_index("dog").unwrap();
        let mut d = Doculect::new("x", "X", "F");
        d.entries[dog] = vec![form("dada")];
        let corpus = Corpus::from_doculects(vec![d]);
        let m = build_soundclass_chars(&corpus);
        assert_eq!(m.get(0, m.character_index("dog:d").unwrap()), Some(true));
        assert_eq!(m.get(0, m.character_index("dog:a").unwrap()), Some(true));
        assert_eq!(m.get(0, m.character_index("dog:g").unwrap()), Some(false));
    }

    #[test]
    fn missing_concept_blanks_its_cognate_characters() {
        let dog = concept_index("dog").unwrap();
        let tree = concept_index("tree").unwrap();
        let mut a = Doculect::new("a", "A", "F");
        a.entries[dog] = vec![form("hund")];
        a.entries[tree] = vec![form("treow")];
        let mut b = Doculect::new("b", "B", "F");
        b.entries[dog] = vec![form("dag")];
        let corpus = Corpus::from_doculects(vec![a, b]);
        let mut p = CognatePartition::new();
        let occ = |d, c| FormOccurrence { doculect: d, concept: c, synonym: 0 };
        p.assign(occ(0, dog), "dog_1");
        p.assign(occ(1, dog), "dog_2");
        p.assign(occ(0, tree), "tree_1");
        let m = build_cognate_chars(&corpus, &p).unwrap();
        let tree_col = m.character_index("tree_1").unwrap();
        assert_eq!(m.get(1, tree_col), None);
        // Every present entry sets at least one of its concept's characters.
        for (di, doc) in corpus.doculects.iter().enumerate() {
            for ci in 0..corpus.concepts.len() {
                let cols: Vec<usize> = (0..m.nchars())
                    .filter(|&c| {
                        p.concept_classes(ci).iter().any(|l| l == &m.characters[c].id)
                    })
                    .collect();
                if doc.has_concept(ci) {
                    assert!(cols.iter().any(|&c| m.get(di, c) == Some(true)));
                } else {
                    assert!(cols.iter().all(|&c| m.get(di, c).is_none()));
                }
            }
        }
    }

    #[test]
    fn coverage_gap_is_an_error() {
        let (corpus, _) = english_fixture();
        let partial = CognatePartition::new();
        assert!(matches!(
            build_cognate_chars(&corpus, &partial),
            Err(CharsError::PartitionCoverage)
        ));
    }

    fn hand_matrix() -> CharacterMatrix {
        let characters = (0..4)
            .map(|i| Character { id: format!("k{i}"), kind: CharKind::Cc })
            .collect();
        let taxa = vec!["t1".to_string(), "t2".to_string(), "t3".to_string()];
        let mut m = CharacterMatrix::new(taxa, characters);
        let rows = [
            [Some(true), Some(true), Some(false), Some(false)],
            [Some(true), None, Some(true), Some(true)],
            [Some(true), None, Some(true), None],
        ];
        for (t, row) in rows.iter().enumerate() {
            for (c, &v) in row.iter().enumerate() {
                m.set(t, c, v);
            }
        }
        m
    }

    #[test]
    fn variable_filter_keeps_two_of_four() {
        let m = hand_matrix();
        let f = filter_variable(&m, &["t1", "t2", "t3"]).unwrap();
        let ids: Vec<&str> = f.characters.iter().map(|c| c.id.as_str()).collect();
        // k0 is constant 1, k1 is defined for one taxon only.
        assert_eq!(ids, ["k2", "k3"]);
        assert_eq!(f.get(0, 0), Some(false));
        assert_eq!(f.get(1, 1), Some(true));
    }

    #[test]
    fn variable_filter_respects_the_subset() {
        let m = hand_matrix();
        // Restricted to t2, t3 nothing varies.
        let f = filter_variable(&m, &["t2", "t3"]).unwrap();
        assert_eq!(f.taxa, ["t2", "t3"]);
        assert_eq!(f.nchars(), 0);
        assert!(matches!(
            filter_variable(&m, &["t1", "zz"]),
            Err(CharsError::UnknownTaxon(_))
        ));
    }

    #[test]
    fn combine_records_both_ranges() {
        let (corpus, partition) = english_fixture();
        let cc = build_cognate_chars(&corpus, &partition).unwrap();
        let taxa: Vec<&str> = cc.taxa.iter().map(|s| s.as_str()).collect();
        let sc = filter_variable(&build_soundclass_chars(&corpus), &taxa).unwrap();
        let (combined, spec) = combine_and_partition(&cc, &sc).unwrap();
        assert_eq!(combined.nchars(), cc.nchars() + sc.nchars());
        assert_eq!(
            spec.blocks,
            [
                ("cc".to_string(), 1, cc.nchars()),
                ("sc".to_string(), cc.nchars() + 1, cc.nchars() + sc.nchars()),
            ]
        );
        // Splitting by the recorded ranges recovers the inputs.
        assert_eq!(combined.column_block(0..cc.nchars()), cc);
        assert_eq!(combined.column_block(cc.nchars()..combined.nchars()), sc);
    }

    #[test]
    fn empty_block_yields_single_partition() {
        let cc = CharacterMatrix::new(vec!["a".to_string()], Vec::new());
        let mut sc = CharacterMatrix::new(
            vec!["a".to_string()],
            vec![Character { id: "x:a".to_string(), kind: CharKind::Sc }],
        );
        sc.set(0, 0, Some(true));
        let (_, spec) = combine_and_partition(&cc, &sc).unwrap();
        assert_eq!(spec.blocks, [("sc".to_string(), 1, 1)]);
        let mismatched = CharacterMatrix::new(vec!["b".to_string()], Vec::new());
        assert!(matches!(
            combine_and_partition(&mismatched, &sc),
            Err(CharsError::TaxaMismatch)
        ));
    }

    #[test]
    fn partition_spec_renders_raxml_lines() {
        let spec = PartitionSpec {
            blocks: vec![("cc".to_string(), 1, 3), ("sc".to_string(), 4, 8)],
        };
        assert_eq!(spec.render(), "BIN, cc = 1-3\nBIN, sc = 4-8\n");
    }

    #[test]
    fn phylip_export_format() {
        let mut m = CharacterMatrix::new(
            vec!["name".to_string(), "name2".to_string()],
            (0..3).map(|i| Character { id: format!("c{i}"), kind: CharKind::Sc }).collect(),
        );
        for (c, v) in [Some(false), Some(true), Some(false)].into_iter().enumerate() {
            m.set(0, c, v);
        }
        for (c, v) in [Some(true), None, Some(false)].into_iter().enumerate() {
            m.set(1, c, v);
        }
        assert_eq!(to_phylip(&m).unwrap(), "2 3\nname\t010\nname2\t1?0\n");
    }

    #[test]
    fn phylip_round_trip() {
        let (corpus, partition) = english_fixture();
        let (combined, _) = combine_and_partition(
            &build_cognate_chars(&corpus, &partition).unwrap(),
            &build_soundclass_chars(&corpus),
        )
        .unwrap();
        let text = to_phylip(&combined).unwrap();
        let back = from_phylip(&text).unwrap();
        assert_eq!(back.taxa, combined.taxa);
        assert_eq!(back.nchars(), combined.nchars());
        for t in 0..combined.ntaxa() {
            for c in 0..combined.nchars() {
                assert_eq!(back.get(t, c), combined.get(t, c));
            }
        }
    }

    #[test]
    fn phylip_import_rejects_malformed_input() {
        assert!(matches!(from_phylip(""), Err(CharsError::Format { line: 1, .. })));
        assert!(matches!(
            from_phylip("x y\n"),
            Err(CharsError::Format { line: 1, .. })
        ));
        assert!(matches!(
            from_phylip("1 3\na\t01\n"),
            Err(CharsError::Format { line: 2, .. })
        ));
        assert!(matches!(
            from_phylip("1 3\na\t012\n"),
            Err(CharsError::Format { line: 2, .. })
        ));
        assert!(matches!(from_phylip("2 1\na\t0\n"), Err(CharsError::Format { .. })));
    }

    #[test]
    fn nexus_export_format() {
        let mut m = CharacterMatrix::new(
            vec!["a".to_string(), "b".to_string()],
            (0..2).map(|i| Character { id: format!("c{i}"), kind: CharKind::Sc }).collect(),
        );
        m.set(0, 0, Some(true));
        m.set(1, 1, None);
        let text = to_nexus(&m).unwrap();
        assert!(text.starts_with("#NEXUS\nBEGIN DATA;\nDIMENSIONS NTAX=2 NCHAR=2;\n"));
        assert!(text.contains("FORMAT DATATYPE=STANDARD SYMBOLS=\"01\" MISSING=?;"));
        assert!(text.contains("MATRIX\na\t1?\nb\t?"));
        assert!(text.trim_end().ends_with("END;"));
    }

    #[test]
    fn taxon_sanitization_and_collisions() {
        assert_eq!(sanitize_taxon("Tok Pisin (PNG)"), "Tok_Pisin__PNG_");
        assert_eq!(sanitize_taxon(&"x".repeat(80)).len(), 50);
        let m = CharacterMatrix::new(
            vec!["a b".to_string(), "a_b".to_string()],
            Vec::new(),
        );
        assert!(matches!(to_phylip(&m), Err(CharsError::NameCollision { .. })));
    }
}
