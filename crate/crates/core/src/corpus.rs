//! Word-list data model and ingestion: doculects, forms over the 41-symbol
//! sound-class alphabet, gold-standard cognacy records, and symbol frequency
//! estimation.

use std::collections::HashMap;
use std::fmt;
use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// The 41 sound-class symbols, in the fixed order used by every export.
///
/// Vowels first, then consonants grouped roughly by place of articulation.
/// The order is load-bearing for reproducibility (score-matrix CSV columns,
/// soundclass-concept character order), so treat it as frozen.
pub const SOUND_CLASSES: [char; 41] = [
    'i', 'e', 'E', '3', 'a', 'u', 'o', // vowels
    'p', 'b', 'm', 'f', 'v', 'w', '8', // labials and dental fricative
    't', 'd', 's', 'z', 'c', 'n', 'r', 'l', // dentals/alveolars
    'S', 'Z', 'C', 'j', // postalveolars
    'T', '5', 'y', // palatals
    'k', 'g', 'x', 'N', // velars
    'q', 'X', 'G', // uvulars
    '7', 'h', // glottals
    'L', '4', '!', // lateral, other nasal, click
];

/// Number of sound classes in the alphabet.
pub const SOUND_CLASS_COUNT: usize = SOUND_CLASSES.len();

/// The fixed 40-concept list shared by all word lists and exports.
/// Unknown concepts in input are an ingestion error, never silently dropped.
pub const CONCEPTS: [&str; 40] = [
    "I", "you", "we", "one", "two", "person", "fish", "dog", "louse", "tree", "leaf", "skin",
    "blood", "bone", "horn", "ear", "eye", "nose", "tooth", "tongue", "knee", "hand", "breast",
    "liver", "drink", "see", "hear", "die", "come", "sun", "star", "water", "stone", "fire",
    "path", "mountain", "night", "full", "new", "name",
];

/// Number of concepts in the fixed list.
pub const CONCEPT_COUNT: usize = CONCEPTS.len();

/// Looks up a concept name in the fixed list.
pub fn concept_index(name: &str) -> Option<usize> {
    CONCEPTS.iter().position(|c| *c == name)
}

/// One sound class, stored as an index into [`SOUND_CLASSES`].
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SoundClass(u8);

impl SoundClass {
    /// Maps a transcription character to its sound class, if it is one of the 41.
    pub fn from_char(c: char) -> Option<SoundClass> {
        SOUND_CLASSES
            .iter()
            .position(|&s| s == c)
            .map(|i| SoundClass(i as u8))
    }

    /// The sound class with the given alphabet index. Panics if out of range.
    pub fn from_index(i: usize) -> SoundClass {
        assert!(i < SOUND_CLASS_COUNT, "sound class index out of range");
        SoundClass(i as u8)
    }

    pub fn as_char(self) -> char {
        SOUND_CLASSES[self.0 as usize]
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }

    /// All 41 sound classes in alphabet order.
    pub fn all() -> impl Iterator<Item = SoundClass> {
        (0..SOUND_CLASS_COUNT).map(|i| SoundClass(i as u8))
    }
}

impl fmt::Debug for SoundClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.as_char())
    }
}

impl fmt::Display for SoundClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.as_char())
    }
}

/// Errors raised by corpus construction and ingestion.
#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("unknown symbol {symbol:?} at character {position} in {raw:?}")]
    UnknownSymbol {
        raw: String,
        position: usize,
        symbol: char,
    },
    #[error("transcription {raw:?} has no segments after diacritic stripping")]
    EmptyForm { raw: String },
    #[error("parse error at line {line}: {message}")]
    Parse { line: u64, message: String },
    #[error("doculect id {0:?} appears with conflicting metadata")]
    DuplicateDoculect(String),
    #[error("unknown concept {concept:?} at line {line}")]
    UnknownConcept { line: u64, concept: String },
    #[error("corpus contains no segments")]
    EmptyCorpus,
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

/// Symbol frequencies over the fixed alphabet. Houses q(a), the probability
/// that an arbitrary segment drawn from the corpus is the symbol a.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SoundClassAlphabet {
    freq: Vec<f64>,
}

impl SoundClassAlphabet {
    /// A uniform frequency assignment; placeholder until estimated from data.
    pub fn uniform() -> SoundClassAlphabet {
        SoundClassAlphabet {
            freq: vec![1.0 / SOUND_CLASS_COUNT as f64; SOUND_CLASS_COUNT],
        }
    }

    /// Builds an alphabet from raw per-symbol frequencies.
    pub fn from_frequencies(freq: Vec<f64>) -> SoundClassAlphabet {
        assert_eq!(freq.len(), SOUND_CLASS_COUNT);
        SoundClassAlphabet { freq }
    }

    /// q(a) for one symbol.
    pub fn frequency(&self, s: SoundClass) -> f64 {
        self.freq[s.index()]
    }

    pub fn frequencies(&self) -> &[f64] {
        &self.freq
    }
}

/// One transcribed word: the raw field as ingested plus its segment sequence
/// after diacritic stripping.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Form {
    pub raw: String,
    pub segments: Vec<SoundClass>,
}

impl Form {
    /// Builds a form directly from segments; the raw field is the rendered
    /// segment string.
    pub fn from_segments(segments: Vec<SoundClass>) -> Form {
        let raw = segments.iter().map(|s| s.as_char()).collect();
        Form { raw, segments }
    }

    pub fn len(&self) -> usize {
        self.segments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }

    /// The segment sequence rendered as a plain string of sound-class symbols.
    pub fn segment_string(&self) -> String {
        self.segments.iter().map(|s| s.as_char()).collect()
    }
}

/// Strips diacritics and modifier characters from a raw transcription.
///
/// `~` collapses the two preceding symbols to the first (an aspirated stop
/// written as two symbols becomes the plain stop), `$` collapses the three
/// preceding symbols to the first. `*`, `"`, `%` and whitespace are dropped.
/// Any residual character outside the 41-symbol alphabet is an error.
pub fn strip_diacritics(raw: &str) -> Result<Form, CorpusError> {
    let trimmed = raw.trim();
    if trimmed.is_empty() {
        return Err(CorpusError::EmptyForm {
            raw: raw.to_string(),
        });
    }
    let mut segments: Vec<SoundClass> = Vec::with_capacity(trimmed.chars().count());
    for (position, symbol) in trimmed.chars().enumerate() {
        match symbol {
            '*' | '"' | '%' => {}
            c if c.is_whitespace() => {}
            '~' => {
                // Collapse the last two symbols to the first: drop one.
                if segments.len() >= 2 {
                    segments.pop();
                }
            }
            '$' => {
                // Collapse the last three symbols to the first: drop two.
                let drop = (segments.len().saturating_sub(1)).min(2);
                segments.truncate(segments.len() - drop);
            }
            c => match SoundClass::from_char(c) {
                Some(s) => segments.push(s),
                None => {
                    return Err(CorpusError::UnknownSymbol {
                        raw: trimmed.to_string(),
                        position,
                        symbol: c,
                    })
                }
            },
        }
    }
    if segments.is_empty() {
        return Err(CorpusError::EmptyForm {
            raw: trimmed.to_string(),
        });
    }
    Ok(Form {
        raw: trimmed.to_string(),
        segments,
    })
}

/// One documented language variety: metadata plus a concept-indexed word list.
#[derive(Debug, Clone, PartialEq)]
pub struct Doculect {
    pub id: String,
    pub name: String,
    pub family: String,
    pub classification_path: Vec<String>,
    pub latitude: Option<f64>,
    pub longitude: Option<f64>,
    /// One slot per concept in [`CONCEPTS`] order; an empty slot is a missing entry.
    pub entries: Vec<Vec<Form>>,
}

impl Doculect {
    /// A doculect with the given metadata and no entries.
    pub fn new(id: impl Into<String>, name: impl Into<String>, family: impl Into<String>) -> Self {
        Doculect {
            id: id.into(),
            name: name.into(),
            family: family.into(),
            classification_path: Vec::new(),
            latitude: None,
            longitude: None,
            entries: vec![Vec::new(); CONCEPT_COUNT],
        }
    }

    /// Forms recorded for a concept; empty means the entry is missing.
    pub fn forms(&self, concept: usize) -> &[Form] {
        &self.entries[concept]
    }

    pub fn has_concept(&self, concept: usize) -> bool {
        !self.entries[concept].is_empty()
    }

    /// Indices of concepts with at least one form.
    pub fn present_concepts(&self) -> impl Iterator<Item = usize> + '_ {
        self.entries
            .iter()
            .enumerate()
            .filter(|(_, forms)| !forms.is_empty())
            .map(|(c, _)| c)
    }
}

/// A collection of doculects over the shared alphabet and concept list.
#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    pub doculects: Vec<Doculect>,
    pub alphabet: SoundClassAlphabet,
    pub concepts: Vec<String>,
}

impl Corpus {
    /// Assembles a corpus from doculects, estimating symbol frequencies from
    /// the data when any segments are present.
    pub fn from_doculects(doculects: Vec<Doculect>) -> Corpus {
        let mut corpus = Corpus {
            doculects,
            alphabet: SoundClassAlphabet::uniform(),
            concepts: CONCEPTS.iter().map(|c| c.to_string()).collect(),
        };
        if let Ok(alphabet) = estimate_frequencies(&corpus) {
            corpus.alphabet = alphabet;
        }
        corpus
    }

    pub fn len(&self) -> usize {
        self.doculects.len()
    }

    pub fn is_empty(&self) -> bool {
        self.doculects.is_empty()
    }

    pub fn doculect_index(&self, id: &str) -> Option<usize> {
        self.doculects.iter().position(|d| d.id == id)
    }

    /// Concepts for which both doculects have at least one form.
    pub fn shared_concepts(&self, a: usize, b: usize) -> Vec<usize> {
        (0..CONCEPT_COUNT)
            .filter(|&c| self.doculects[a].has_concept(c) && self.doculects[b].has_concept(c))
            .collect()
    }

    /// All unordered doculect index pairs, in (i, j) order with i < j.
    pub fn pairs(&self) -> Vec<(usize, usize)> {
        let n = self.doculects.len();
        let mut out = Vec::with_capacity(n * (n.saturating_sub(1)) / 2);
        for i in 0..n {
            for j in (i + 1)..n {
                out.push((i, j));
            }
        }
        out
    }
}

/// Ingestion controls for [`load_corpus_with`].
#[derive(Debug, Clone)]
pub struct LoadOptions {
    /// Drop doculects whose name or classification path flags them as
    /// reconstructed, artificial, pidgin, or creole varieties.
    pub exclude_artificial: bool,
}

impl Default for LoadOptions {
    fn default() -> Self {
        LoadOptions {
            exclude_artificial: false,
        }
    }
}

const ARTIFICIAL_MARKERS: [&str; 5] = ["reconstructed", "artificial", "pidgin", "creole", "proto"];

fn is_artificial(name: &str, classification_path: &[String]) -> bool {
    let hit = |s: &str| {
        let lower = s.to_lowercase();
        ARTIFICIAL_MARKERS.iter().any(|m| lower.contains(m))
    };
    hit(name) || classification_path.iter().any(|p| hit(p))
}

#[derive(Debug, Deserialize, Serialize)]
struct WordlistRow {
    doculect_id: String,
    doculect_name: String,
    family: String,
    classification_path: String,
    latitude: Option<f64>,
    longitude: Option<f64>,
    concept: String,
    transcription: String,
}

const WORDLIST_HEADER: [&str; 8] = [
    "doculect_id",
    "doculect_name",
    "family",
    "classification_path",
    "latitude",
    "longitude",
    "concept",
    "transcription",
];

/// Loads a word-list CSV (see the module docs for the schema).
pub fn load_corpus(path: impl AsRef<Path>) -> Result<Corpus, CorpusError> {
    load_corpus_with(path, &LoadOptions::default())
}

/// Loads a word-list CSV with explicit ingestion options.
///
/// Synonyms are comma-separated inside the transcription field; rows with an
/// empty transcription record a missing entry. Loanword markers are stripped
/// and ignored.
pub fn load_corpus_with(
    path: impl AsRef<Path>,
    options: &LoadOptions,
) -> Result<Corpus, CorpusError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path.as_ref())?;
    {
        let headers = reader.headers()?;
        if headers.iter().ne(WORDLIST_HEADER.iter().copied()) {
            return Err(CorpusError::Parse {
                line: 1,
                message: format!(
                    "expected header {:?}, found {:?}",
                    WORDLIST_HEADER.join(","),
                    headers.iter().collect::<Vec<_>>().join(",")
                ),
            });
        }
    }

    let headers = reader.headers()?.clone();
    let mut doculects: Vec<Doculect> = Vec::new();
    let mut by_id: HashMap<String, usize> = HashMap::new();

    for result in reader.records() {
        let record = result?;
        let line = record.position().map_or(0, |p| p.line());
        let row: WordlistRow = record.deserialize(Some(&headers)).map_err(|e| {
            CorpusError::Parse {
                line,
                message: e.to_string(),
            }
        })?;

        let classification_path: Vec<String> = if row.classification_path.trim().is_empty() {
            Vec::new()
        } else {
            row.classification_path
                .split('/')
                .map(|s| s.trim().to_string())
                .collect()
        };

        let index = match by_id.get(&row.doculect_id) {
            Some(&i) => {
                let d = &doculects[i];
                if d.name != row.doculect_name
                    || d.family != row.family
                    || d.classification_path != classification_path
                    || d.latitude != row.latitude
                    || d.longitude != row.longitude
                {
                    return Err(CorpusError::DuplicateDoculect(row.doculect_id.clone()));
                }
                i
            }
            None => {
                let mut d = Doculect::new(
                    row.doculect_id.clone(),
                    row.doculect_name.clone(),
                    row.family.clone(),
                );
                d.classification_path = classification_path;
                d.latitude = row.latitude;
                d.longitude = row.longitude;
                by_id.insert(row.doculect_id.clone(), doculects.len());
                doculects.push(d);
                doculects.len() - 1
            }
        };

        let concept =
            concept_index(row.concept.trim()).ok_or_else(|| CorpusError::UnknownConcept {
                line,
                concept: row.concept.clone(),
            })?;

        for synonym in row.transcription.split(',') {
            let synonym = synonym.trim();
            if synonym.is_empty() {
                continue;
            }
            let form = strip_diacritics(synonym)?;
            doculects[index].entries[concept].push(form);
        }
    }

    if options.exclude_artificial {
        doculects.retain(|d| !is_artificial(&d.name, &d.classification_path));
    }

    Ok(Corpus::from_doculects(doculects))
}

/// Writes a corpus back out in the word-list CSV schema. One row per
/// (doculect, concept); synonyms joined with ", "; missing entries kept as
/// rows with an empty transcription so reloading is a fixed point.
pub fn write_corpus(corpus: &Corpus, path: impl AsRef<Path>) -> Result<(), CorpusError> {
    let mut writer = csv::WriterBuilder::new()
        .has_headers(false)
        .from_path(path.as_ref())?;
    writer.write_record(WORDLIST_HEADER)?;
    for d in &corpus.doculects {
        for (c, forms) in d.entries.iter().enumerate() {
            let transcription = forms
                .iter()
                .map(|f| f.raw.as_str())
                .collect::<Vec<_>>()
                .join(", ");
            writer.serialize(WordlistRow {
                doculect_id: d.id.clone(),
                doculect_name: d.name.clone(),
                family: d.family.clone(),
                classification_path: d.classification_path.join("/"),
                latitude: d.latitude,
                longitude: d.longitude,
                concept: corpus.concepts[c].clone(),
                transcription,
            })?;
        }
    }
    writer.flush()?;
    Ok(())
}

/// Estimates q(a) as the relative frequency of each symbol across all
/// segments of all forms in the corpus.
pub fn estimate_frequencies(corpus: &Corpus) -> Result<SoundClassAlphabet, CorpusError> {
    let mut counts = vec![0u64; SOUND_CLASS_COUNT];
    let mut total = 0u64;
    for d in &corpus.doculects {
        for forms in &d.entries {
            for form in forms {
                for &s in &form.segments {
                    counts[s.index()] += 1;
                    total += 1;
                }
            }
        }
    }
    if total == 0 {
        return Err(CorpusError::EmptyCorpus);
    }
    let freq = counts
        .into_iter()
        .map(|c| c as f64 / total as f64)
        .collect();
    Ok(SoundClassAlphabet::from_frequencies(freq))
}

/// One expert cognacy judgment: a form occurrence with its class label.
#[derive(Debug, Clone, PartialEq)]
pub struct GoldRecord {
    pub family: String,
    pub doculect_id: String,
    pub concept: usize,
    pub form: Form,
    pub cognate_class: String,
}

/// Expert cognate judgments used for classifier training and evaluation.
/// Labels are equivalence-class identifiers scoped per concept; cross-family
/// pairs are non-cognate by construction.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct GoldStandard {
    pub records: Vec<GoldRecord>,
}

#[derive(Debug, Deserialize, Serialize)]
struct GoldRow {
    family: String,
    doculect_id: String,
    concept: String,
    transcription: String,
    cognate_class: String,
}

const GOLD_HEADER: [&str; 5] = [
    "family",
    "doculect_id",
    "concept",
    "transcription",
    "cognate_class",
];

impl GoldStandard {
    /// Loads a gold-standard CSV (`family,doculect_id,concept,transcription,cognate_class`).
    pub fn load(path: impl AsRef<Path>) -> Result<GoldStandard, CorpusError> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .from_path(path.as_ref())?;
        {
            let headers = reader.headers()?;
            if headers.iter().ne(GOLD_HEADER.iter().copied()) {
                return Err(CorpusError::Parse {
                    line: 1,
                    message: format!(
                        "expected header {:?}, found {:?}",
                        GOLD_HEADER.join(","),
                        headers.iter().collect::<Vec<_>>().join(",")
                    ),
                });
            }
        }
        let headers = reader.headers()?.clone();
        let mut records = Vec::new();
        for result in reader.records() {
            let record = result?;
            let line = record.position().map_or(0, |p| p.line());
            let row: GoldRow = record.deserialize(Some(&headers)).map_err(|e| {
                CorpusError::Parse {
                    line,
                    message: e.to_string(),
                }
            })?;
            let concept =
                concept_index(row.concept.trim()).ok_or_else(|| CorpusError::UnknownConcept {
                    line,
                    concept: row.concept.clone(),
                })?;
            records.push(GoldRecord {
                family: row.family,
                doculect_id: row.doculect_id,
                concept,
                form: strip_diacritics(&row.transcription)?,
                cognate_class: row.cognate_class,
            });
        }
        Ok(GoldStandard { records })
    }

    /// Writes the records back out in the gold-standard CSV schema.
    pub fn write(&self, path: impl AsRef<Path>) -> Result<(), CorpusError> {
        let file = File::create(path.as_ref())?;
        let mut writer = csv::WriterBuilder::new()
            .has_headers(false)
            .from_writer(BufWriter::new(file));
        writer.write_record(GOLD_HEADER)?;
        for r in &self.records {
            writer.serialize(GoldRow {
                family: r.family.clone(),
                doculect_id: r.doculect_id.clone(),
                concept: CONCEPTS[r.concept].to_string(),
                transcription: r.form.raw.clone(),
                cognate_class: r.cognate_class.clone(),
            })?;
        }
        writer.flush()?;
        Ok(())
    }

    /// Family names present in the records, sorted and deduplicated.
    pub fn families(&self) -> Vec<String> {
        let mut out: Vec<String> = self.records.iter().map(|r| r.family.clone()).collect();
        out.sort();
        out.dedup();
        out
    }
}
