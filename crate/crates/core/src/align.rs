//! String-comparison kernels: Levenshtein distance, length-normalized
//! Levenshtein (LDN), and affine-gap alignment maximizing summed segment
//! scores (Gotoh three-matrix formulation).

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Form, SoundClass, SoundClassAlphabet, SOUND_CLASSES, SOUND_CLASS_COUNT};

#[derive(Debug, Error)]
pub enum AlignError {
    #[error("form {raw:?} is empty")]
    EmptyForm { raw: String },
    #[error("model csv malformed: {0}")]
    ModelFormat(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

/// Segment-pair scores in log-odds units plus affine gap penalties.
///
/// A gap run of length k costs `gap_open + (k-1) * gap_extend`; terminal gaps
/// are penalized like internal ones.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PmiModel {
    scores: Vec<f64>,
    pub gap_open: f64,
    pub gap_extend: f64,
    pub alphabet: SoundClassAlphabet,
}

impl PmiModel {
    /// Builds a model from a full 41x41 score table in alphabet order.
    /// Scores must be symmetric; asymmetry beyond 1e-12 is a bug upstream.
    pub fn new(
        scores: Vec<f64>,
        gap_open: f64,
        gap_extend: f64,
        alphabet: SoundClassAlphabet,
    ) -> PmiModel {
        assert_eq!(scores.len(), SOUND_CLASS_COUNT * SOUND_CLASS_COUNT);
        let model = PmiModel {
            scores,
            gap_open,
            gap_extend,
            alphabet,
        };
        debug_assert!(model.is_symmetric(1e-12));
        model
    }

    /// A model scoring `match_score` on the diagonal and `mismatch` elsewhere.
    pub fn flat(
        match_score: f64,
        mismatch: f64,
        gap_open: f64,
        gap_extend: f64,
    ) -> PmiModel {
        let mut scores = vec![mismatch; SOUND_CLASS_COUNT * SOUND_CLASS_COUNT];
        for i in 0..SOUND_CLASS_COUNT {
            scores[i * SOUND_CLASS_COUNT + i] = match_score;
        }
        PmiModel::new(scores, gap_open, gap_extend, SoundClassAlphabet::uniform())
    }

    pub fn score(&self, a: SoundClass, b: SoundClass) -> f64 {
        self.scores[a.index() * SOUND_CLASS_COUNT + b.index()]
    }

    pub fn set_score(&mut self, a: SoundClass, b: SoundClass, value: f64) {
        self.scores[a.index() * SOUND_CLASS_COUNT + b.index()] = value;
        self.scores[b.index() * SOUND_CLASS_COUNT + a.index()] = value;
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        for i in 0..SOUND_CLASS_COUNT {
            for j in (i + 1)..SOUND_CLASS_COUNT {
                let d = self.scores[i * SOUND_CLASS_COUNT + j]
                    - self.scores[j * SOUND_CLASS_COUNT + i];
                if d.abs() > tol {
                    return false;
                }
            }
        }
        true
    }

    /// Writes the score table (header of 41 symbols, then 41 rows of 41
    /// scores) and the companion gap-penalty CSV (`gap_open,gap_extend`).
    pub fn write_csv(
        &self,
        scores_path: impl AsRef<Path>,
        gaps_path: impl AsRef<Path>,
    ) -> Result<(), AlignError> {
        let mut w = csv::WriterBuilder::new()
            .has_headers(false)
            .from_path(scores_path.as_ref())?;
        w.write_record(SOUND_CLASSES.iter().map(|c| c.to_string()))?;
        for i in 0..SOUND_CLASS_COUNT {
            let row = &self.scores[i * SOUND_CLASS_COUNT..(i + 1) * SOUND_CLASS_COUNT];
            w.write_record(row.iter().map(|v| format_score(*v)))?;
        }
        w.flush()?;

        let mut w = csv::WriterBuilder::new()
            .has_headers(false)
            .from_path(gaps_path.as_ref())?;
        w.write_record(["gap_open", "gap_extend"])?;
        w.write_record([format_score(self.gap_open), format_score(self.gap_extend)])?;
        w.flush()?;
        Ok(())
    }

    /// Reads the score-table/gap-penalty CSV pair written by [`write_csv`].
    /// Symbol frequencies are not stored in the files, so the loaded model
    /// carries a uniform alphabet.
    ///
    /// [`write_csv`]: PmiModel::write_csv
    pub fn read_csv(
        scores_path: impl AsRef<Path>,
        gaps_path: impl AsRef<Path>,
    ) -> Result<PmiModel, AlignError> {
        let mut r = csv::ReaderBuilder::new()
            .has_headers(true)
            .from_path(scores_path.as_ref())?;
        {
            let headers = r.headers()?;
            let expected: Vec<String> = SOUND_CLASSES.iter().map(|c| c.to_string()).collect();
            if headers.iter().ne(expected.iter().map(|s| s.as_str())) {
                return Err(AlignError::ModelFormat(
                    "score table header must list the 41 sound classes in canonical order".into(),
                ));
            }
        }
        let mut scores = Vec::with_capacity(SOUND_CLASS_COUNT * SOUND_CLASS_COUNT);
        for rec in r.records() {
            let rec = rec?;
            if rec.len() != SOUND_CLASS_COUNT {
                return Err(AlignError::ModelFormat(format!(
                    "score row has {} fields, expected {SOUND_CLASS_COUNT}",
                    rec.len()
                )));
            }
            for field in rec.iter() {
                let v: f64 = field
                    .parse()
                    .map_err(|e| AlignError::ModelFormat(format!("bad score {field:?}: {e}")))?;
                scores.push(v);
            }
        }
        if scores.len() != SOUND_CLASS_COUNT * SOUND_CLASS_COUNT {
            return Err(AlignError::ModelFormat(format!(
                "score table has {} rows, expected {SOUND_CLASS_COUNT}",
                scores.len() / SOUND_CLASS_COUNT
            )));
        }

        let mut r = csv::ReaderBuilder::new()
            .has_headers(true)
            .from_path(gaps_path.as_ref())?;
        {
            let headers = r.headers()?;
            if headers.iter().ne(["gap_open", "gap_extend"]) {
                return Err(AlignError::ModelFormat(
                    "gap csv header must be gap_open,gap_extend".into(),
                ));
            }
        }
        let rec = r
            .records()
            .next()
            .ok_or_else(|| AlignError::ModelFormat("gap csv has no data row".into()))??;
        let parse = |i: usize| -> Result<f64, AlignError> {
            rec.get(i)
                .ok_or_else(|| AlignError::ModelFormat("gap csv row too short".into()))?
                .parse()
                .map_err(|e| AlignError::ModelFormat(format!("bad gap value: {e}")))
        };
        let gap_open = parse(0)?;
        let gap_extend = parse(1)?;
        Ok(PmiModel {
            scores,
            gap_open,
            gap_extend,
            alphabet: SoundClassAlphabet::uniform(),
        })
    }
}

/// Shortest round-trip decimal for a score value.
fn format_score(v: f64) -> String {
    let mut buf = ryu_like(v);
    if !buf.contains('.') && !buf.contains('e') && !buf.contains("inf") && !buf.contains("NaN") {
        buf.push_str(".0");
    }
    buf
}

fn ryu_like(v: f64) -> String {
    // `{}` on f64 already produces the shortest representation that
    // round-trips; this wrapper exists so the CSV always carries a decimal
    // point and reloads as a float.
    format!("{v}")
}

/// One pairwise alignment. Gap columns are `None` on exactly one side.
#[derive(Debug, Clone, PartialEq)]
pub struct Alignment {
    pub gapped_a: Vec<Option<SoundClass>>,
    pub gapped_b: Vec<Option<SoundClass>>,
    pub score: f64,
}

impl Alignment {
    pub fn columns(&self) -> impl Iterator<Item = (Option<SoundClass>, Option<SoundClass>)> + '_ {
        self.gapped_a
            .iter()
            .copied()
            .zip(self.gapped_b.iter().copied())
    }

    /// Aligned segment pairs with gap columns dropped.
    pub fn matched_columns(&self) -> impl Iterator<Item = (SoundClass, SoundClass)> + '_ {
        self.columns().filter_map(|(a, b)| Some((a?, b?)))
    }

    /// True when no column is gap/gap and no gap in one row is immediately
    /// followed by a gap in the other.
    pub fn is_licit(&self) -> bool {
        let mut prev: Option<(bool, bool)> = None;
        for (a, b) in self.columns() {
            let col = (a.is_none(), b.is_none());
            if col.0 && col.1 {
                return false;
            }
            if let Some(p) = prev {
                if (p.0 && col.1) || (p.1 && col.0) {
                    return false;
                }
            }
            prev = Some(col);
        }
        true
    }

    /// Renders both rows with '-' for gaps, for diagnostics.
    pub fn render(&self) -> (String, String) {
        let render = |row: &[Option<SoundClass>]| {
            row.iter()
                .map(|s| s.map_or('-', |s| s.as_char()))
                .collect::<String>()
        };
        (render(&self.gapped_a), render(&self.gapped_b))
    }
}

/// Unit-cost edit distance between two segment sequences.
pub fn levenshtein(x: &Form, y: &Form) -> usize {
    let a = &x.segments;
    let b = &y.segments;
    if a.is_empty() {
        return b.len();
    }
    if b.is_empty() {
        return a.len();
    }
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0usize; b.len() + 1];
    for (i, &ai) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, &bj) in b.iter().enumerate() {
            let sub = prev[j] + usize::from(ai != bj);
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// Levenshtein distance divided by the length of the longer input.
pub fn ldn(x: &Form, y: &Form) -> Result<f64, AlignError> {
    for f in [x, y] {
        if f.is_empty() {
            return Err(AlignError::EmptyForm { raw: f.raw.clone() });
        }
    }
    Ok(levenshtein(x, y) as f64 / x.len().max(y.len()) as f64)
}

/// An optimal unit-cost edit alignment (match 0, substitution/indel 1).
/// Ties prefer match/substitution, then a gap in `x`, then a gap in `y`,
/// so counting over alignments is deterministic.
pub fn levenshtein_align(x: &Form, y: &Form) -> (Alignment, usize) {
    let a = &x.segments;
    let b = &y.segments;
    let n = a.len();
    let m = b.len();
    let width = m + 1;
    let mut dp = vec![0usize; (n + 1) * width];
    for j in 0..=m {
        dp[j] = j;
    }
    for i in 1..=n {
        dp[i * width] = i;
        for j in 1..=m {
            let sub = dp[(i - 1) * width + j - 1] + usize::from(a[i - 1] != b[j - 1]);
            let del = dp[(i - 1) * width + j] + 1;
            let ins = dp[i * width + j - 1] + 1;
            dp[i * width + j] = sub.min(del).min(ins);
        }
    }
    let mut cols: Vec<(Option<SoundClass>, Option<SoundClass>)> = Vec::with_capacity(n.max(m));
    let (mut i, mut j) = (n, m);
    while i > 0 || j > 0 {
        let here = dp[i * width + j];
        if i > 0 && j > 0 && here == dp[(i - 1) * width + j - 1] + usize::from(a[i - 1] != b[j - 1])
        {
            cols.push((Some(a[i - 1]), Some(b[j - 1])));
            i -= 1;
            j -= 1;
        } else if j > 0 && here == dp[i * width + j - 1] + 1 {
            // gap in x
            cols.push((None, Some(b[j - 1])));
            j -= 1;
        } else {
            // gap in y
            cols.push((Some(a[i - 1]), None));
            i -= 1;
        }
    }
    cols.reverse();
    let distance = dp[n * width + m];
    let alignment = Alignment {
        gapped_a: cols.iter().map(|c| c.0).collect(),
        gapped_b: cols.iter().map(|c| c.1).collect(),
        score: -(distance as f64),
    };
    (alignment, distance)
}

const NEG_INF: f64 = f64::NEG_INFINITY;

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
enum State {
    Diag,
    GapInY, // column consumes x[i] against a gap
    GapInX, // column consumes y[j] against a gap
}

/// Maximizes the summed segment scores under affine gap penalties, returning
/// a licit alignment: a gap in one row is never immediately followed by a gap
/// in the other, enforced by forbidding the transition between the two gap
/// states.
pub fn align_pmi(x: &Form, y: &Form, model: &PmiModel) -> Result<Alignment, AlignError> {
    for f in [x, y] {
        if f.is_empty() {
            return Err(AlignError::EmptyForm { raw: f.raw.clone() });
        }
    }
    let a = &x.segments;
    let b = &y.segments;
    let n = a.len();
    let m = b.len();
    let width = m + 1;
    let open = model.gap_open;
    let extend = model.gap_extend;

    // diag: last column is a segment pair. gap_y: last column is (x_i, gap),
    // the gap sits in the y row. gap_x: last column is (gap, y_j).
    // Licitness forbids gap_y <-> gap_x transitions.
    let mut diag = vec![NEG_INF; (n + 1) * width];
    let mut gap_y = vec![NEG_INF; (n + 1) * width];
    let mut gap_x = vec![NEG_INF; (n + 1) * width];
    diag[0] = 0.0;
    for i in 1..=n {
        gap_y[i * width] = open + (i - 1) as f64 * extend;
    }
    for j in 1..=m {
        gap_x[j] = open + (j - 1) as f64 * extend;
    }
    for i in 1..=n {
        for j in 1..=m {
            let idx = i * width + j;
            let prev = (i - 1) * width + (j - 1);
            let best_prev = diag[prev].max(gap_y[prev]).max(gap_x[prev]);
            diag[idx] = best_prev + model.score(a[i - 1], b[j - 1]);
            let up = (i - 1) * width + j;
            gap_y[idx] = (diag[up] + open).max(gap_y[up] + extend);
            let left = i * width + (j - 1);
            gap_x[idx] = (diag[left] + open).max(gap_x[left] + extend);
        }
    }

    let last = n * width + m;
    // Tie preference throughout: segment pair, then gap in x, then gap in y.
    let mut state = State::Diag;
    let mut best = diag[last];
    if gap_x[last] > best {
        state = State::GapInX;
        best = gap_x[last];
    }
    if gap_y[last] > best {
        state = State::GapInY;
        best = gap_y[last];
    }
    let score = best;

    let mut cols: Vec<(Option<SoundClass>, Option<SoundClass>)> = Vec::with_capacity(n.max(m));
    let (mut i, mut j) = (n, m);
    while i > 0 || j > 0 {
        match state {
            State::Diag => {
                cols.push((Some(a[i - 1]), Some(b[j - 1])));
                let prev = (i - 1) * width + (j - 1);
                state = if diag[prev] >= gap_x[prev] && diag[prev] >= gap_y[prev] {
                    State::Diag
                } else if gap_x[prev] >= gap_y[prev] {
                    State::GapInX
                } else {
                    State::GapInY
                };
                i -= 1;
                j -= 1;
            }
            State::GapInY => {
                cols.push((Some(a[i - 1]), None));
                let up = (i - 1) * width + j;
                state = if diag[up] + open >= gap_y[up] + extend {
                    State::Diag
                } else {
                    State::GapInY
                };
                i -= 1;
            }
            State::GapInX => {
                cols.push((None, Some(b[j - 1])));
                let left = i * width + (j - 1);
                state = if diag[left] + open >= gap_x[left] + extend {
                    State::Diag
                } else {
                    State::GapInX
                };
                j -= 1;
            }
        }
    }
    cols.reverse();
    let alignment = Alignment {
        gapped_a: cols.iter().map(|c| c.0).collect(),
        gapped_b: cols.iter().map(|c| c.1).collect(),
        score,
    };
    debug_assert!(alignment.is_licit());
    Ok(alignment)
}

/// Recomputes an alignment's score from its columns: segment pairs score via
/// the model, gap columns cost `gap_open` at a run start and `gap_extend`
/// inside a run. Used to check score/column consistency.
pub fn score_from_columns(alignment: &Alignment, model: &PmiModel) -> f64 {
    let mut total = 0.0;
    let mut prev_gap_a = false;
    let mut prev_gap_b = false;
    for (a, b) in alignment.columns() {
        match (a, b) {
            (Some(a), Some(b)) => {
                total += model.score(a, b);
                prev_gap_a = false;
                prev_gap_b = false;
            }
            (Some(_), None) => {
                total += if prev_gap_b {
                    model.gap_extend
                } else {
                    model.gap_open
                };
                prev_gap_a = false;
                prev_gap_b = true;
            }
            (None, Some(_)) => {
                total += if prev_gap_a {
                    model.gap_extend
                } else {
                    model.gap_open
                };
                prev_gap_a = true;
                prev_gap_b = false;
            }
            (None, None) => unreachable!("gap/gap column"),
        }
    }
    total
}

/// Exhaustive maximum over all licit alignments, by direct recursion over
/// column choices. Exponential; only for short inputs in tests and checks.
pub fn exhaustive_best_score(x: &Form, y: &Form, model: &PmiModel) -> f64 {
    #[derive(Clone, Copy, PartialEq)]
    enum Last {
        None,
        Pair,
        GapInY,
        GapInX,
    }
    fn go(
        a: &[SoundClass],
        b: &[SoundClass],
        i: usize,
        j: usize,
        last: Last,
        model: &PmiModel,
    ) -> f64 {
        if i == a.len() && j == b.len() {
            return 0.0;
        }
        let mut best = NEG_INF;
        if i < a.len() && j < b.len() {
            let v = model.score(a[i], b[j]) + go(a, b, i + 1, j + 1, Last::Pair, model);
            best = best.max(v);
        }
        if i < a.len() && last != Last::GapInX {
            let cost = if last == Last::GapInY {
                model.gap_extend
            } else {
                model.gap_open
            };
            best = best.max(cost + go(a, b, i + 1, j, Last::GapInY, model));
        }
        if j < b.len() && last != Last::GapInY {
            let cost = if last == Last::GapInX {
                model.gap_extend
            } else {
                model.gap_open
            };
            best = best.max(cost + go(a, b, i, j + 1, Last::GapInX, model));
        }
        best
    }
    go(&x.segments, &y.segments, 0, 0, Last::None, model)
}
