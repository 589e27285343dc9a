//! Model training: LDN bootstrap of probably-related pairs and potential
//! cognates, iterative re-alignment refinement of segment scores, and
//! Nelder-Mead search over (gap_open, gap_extend, theta).

use rayon::prelude::*;

use thiserror::Error;

use crate::align::{align_pmi, ldn, levenshtein_align, PmiModel};
use crate::corpus::{Corpus, Form, SOUND_CLASS_COUNT};
use crate::lexdist::{distance_matrix, language_distance, ldn_similarity, pmi_similarity, LexdistError};

#[derive(Debug, Error)]
pub enum PmiTrainError {
    #[error("no aligned segment pairs to estimate from")]
    NoAlignedPairs,
    #[error("score filter left no training pairs at iteration {iteration}")]
    NoPairsAboveTheta { iteration: usize },
    #[error("optimizer did not converge within {evaluations} evaluations")]
    MaxEvaluationsExceeded { evaluations: usize },
    #[error(transparent)]
    Lexdist(#[from] LexdistError),
    #[error(transparent)]
    Align(#[from] crate::align::AlignError),
}

/// Training knobs. Defaults reproduce the published setup: bootstrap
/// threshold 0.7, ten refinement iterations, and the optimized
/// (gap_open, gap_extend, theta) triple.
#[derive(Debug, Clone)]
pub struct TrainingConfig {
    pub ldn_related_threshold: f64,
    pub refine_iterations: usize,
    pub theta: f64,
    pub gap_open: f64,
    pub gap_extend: f64,
    pub smoothing: f64,
    pub seed: u64,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        TrainingConfig {
            ldn_related_threshold: 0.7,
            refine_iterations: 10,
            theta: 4.401,
            gap_open: -2.330,
            gap_extend: -1.276,
            smoothing: 1.0,
            seed: 0,
        }
    }
}

/// Unordered doculect index pairs whose bootstrap distance cleared the
/// threshold. Indices refer to the corpus the pairs were computed from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProbablyRelatedPairs {
    pub pairs: Vec<(usize, usize)>,
}

/// One training item: the synonym pair with minimal LDN for a related
/// doculect pair and a shared concept.
#[derive(Debug, Clone, PartialEq)]
pub struct CognateCandidate {
    pub pair: (usize, usize),
    pub concept: usize,
    pub form_a: Form,
    pub form_b: Form,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct PotentialCognates {
    pub items: Vec<CognateCandidate>,
}

/// Bootstrap: doculect pairs whose calibrated distance under the 1-LDN
/// similarity is at most the threshold. Pairs with no shared concepts are
/// treated as unrelated.
pub fn find_probably_related(corpus: &Corpus, config: &TrainingConfig) -> ProbablyRelatedPairs {
    let m = distance_matrix(corpus, ldn_similarity());
    let pairs = corpus
        .pairs()
        .into_iter()
        .filter(|&(i, j)| {
            m.get(i, j)
                .is_some_and(|d| d <= config.ldn_related_threshold)
        })
        .collect();
    ProbablyRelatedPairs { pairs }
}

/// For each related pair and shared concept, the synonym pair minimizing
/// LDN; ties resolved by the lexicographically smallest (raw_a, raw_b).
pub fn find_potential_cognates(
    corpus: &Corpus,
    related: &ProbablyRelatedPairs,
) -> PotentialCognates {
    let mut items = Vec::new();
    for &(i, j) in &related.pairs {
        let (a, b) = (&corpus.doculects[i], &corpus.doculects[j]);
        for concept in corpus.shared_concepts(i, j) {
            let mut best: Option<(f64, &Form, &Form)> = None;
            for w1 in a.forms(concept) {
                for w2 in b.forms(concept) {
                    let d = ldn(w1, w2).expect("corpus forms are non-empty");
                    let better = match &best {
                        None => true,
                        Some((bd, bw1, bw2)) => {
                            d < *bd
                                || (d == *bd
                                    && (w1.raw.as_str(), w2.raw.as_str())
                                        < (bw1.raw.as_str(), bw2.raw.as_str()))
                        }
                    };
                    if better {
                        best = Some((d, w1, w2));
                    }
                }
            }
            if let Some((_, w1, w2)) = best {
                items.push(CognateCandidate {
                    pair: (i, j),
                    concept,
                    form_a: w1.clone(),
                    form_b: w2.clone(),
                });
            }
        }
    }
    PotentialCognates { items }
}

/// Symmetrized aligned-pair counts over the alphabet.
struct PairCounts {
    counts: Vec<u64>,
    total: u64,
}

impl PairCounts {
    fn new() -> PairCounts {
        PairCounts {
            counts: vec![0; SOUND_CLASS_COUNT * SOUND_CLASS_COUNT],
            total: 0,
        }
    }

    fn add_column(&mut self, a: usize, b: usize) {
        self.counts[a * SOUND_CLASS_COUNT + b] += 1;
        self.counts[b * SOUND_CLASS_COUNT + a] += 1;
        self.total += 2;
    }
}

/// Turns counts into a score table: s(a,b) smoothed relative frequency,
/// score = ln(s(a,b) / (q(a) q(b))). Symbols absent from the corpus (q = 0)
/// get score 0 so the table stays finite; they can never be queried by
/// alignments over that corpus.
fn model_from_counts(
    counts: &PairCounts,
    corpus: &Corpus,
    config: &TrainingConfig,
    gap_open: f64,
    gap_extend: f64,
) -> PmiModel {
    let sigma = config.smoothing;
    let k = SOUND_CLASS_COUNT;
    let denom = counts.total as f64 + sigma * (k * k) as f64;
    let q = corpus.alphabet.frequencies();
    let mut scores = vec![0.0; k * k];
    for a in 0..k {
        for b in 0..k {
            if q[a] == 0.0 || q[b] == 0.0 {
                continue;
            }
            let s = (counts.counts[a * k + b] as f64 + sigma) / denom;
            scores[a * k + b] = (s / (q[a] * q[b])).ln();
        }
    }
    PmiModel::new(scores, gap_open, gap_extend, corpus.alphabet.clone())
}

/// First score table: potential cognates are aligned with unit edit costs,
/// aligned segment pairs are counted (gap columns excluded), and the
/// smoothed relative frequencies are turned into log-odds scores. Gap
/// penalties come from the config.
pub fn initial_pmi(
    corpus: &Corpus,
    cognates: &PotentialCognates,
    config: &TrainingConfig,
) -> Result<PmiModel, PmiTrainError> {
    let mut counts = PairCounts::new();
    for item in &cognates.items {
        let (alignment, _) = levenshtein_align(&item.form_a, &item.form_b);
        for (a, b) in alignment.matched_columns() {
            counts.add_column(a.index(), b.index());
        }
    }
    if counts.total == 0 {
        return Err(PmiTrainError::NoAlignedPairs);
    }
    Ok(model_from_counts(
        &counts,
        corpus,
        config,
        config.gap_open,
        config.gap_extend,
    ))
}

/// Iterative refinement: in each round every potential cognate pair is
/// re-aligned under the previous score table, pairs scoring at least theta
/// are counted, and the table is re-estimated. Alignments are computed in
/// parallel but counted in fixed item order, so results do not depend on
/// the worker count.
pub fn refine_pmi(
    corpus: &Corpus,
    cognates: &PotentialCognates,
    model0: &PmiModel,
    config: &TrainingConfig,
) -> Result<PmiModel, PmiTrainError> {
    let mut model = model0.clone();
    for iteration in 1..=config.refine_iterations {
        let alignments: Vec<_> = cognates
            .items
            .par_iter()
            .map(|item| {
                align_pmi(&item.form_a, &item.form_b, &model).expect("corpus forms are non-empty")
            })
            .collect();
        let mut counts = PairCounts::new();
        for alignment in &alignments {
            if alignment.score >= config.theta {
                for (a, b) in alignment.matched_columns() {
                    counts.add_column(a.index(), b.index());
                }
            }
        }
        if counts.total == 0 {
            return Err(PmiTrainError::NoPairsAboveTheta { iteration });
        }
        model = model_from_counts(&counts, corpus, config, model.gap_open, model.gap_extend);
    }
    Ok(model)
}

/// Bootstrap, initial estimate, and refinement in one call.
pub fn train(corpus: &Corpus, config: &TrainingConfig) -> Result<PmiModel, PmiTrainError> {
    let related = find_probably_related(corpus, config);
    let cognates = find_potential_cognates(corpus, &related);
    let model0 = initial_pmi(corpus, &cognates, config)?;
    refine_pmi(corpus, &cognates, &model0, config)
}

/// The optimizer objective: train with the given hyperparameters and return
/// the mean calibrated distance over the probably-related pairs.
pub fn target_function(
    corpus: &Corpus,
    related: &ProbablyRelatedPairs,
    gap_open: f64,
    gap_extend: f64,
    theta: f64,
    config: &TrainingConfig,
) -> Result<f64, PmiTrainError> {
    let run = TrainingConfig {
        gap_open,
        gap_extend,
        theta,
        ..config.clone()
    };
    let cognates = find_potential_cognates(corpus, related);
    let model0 = initial_pmi(corpus, &cognates, &run)?;
    let model = refine_pmi(corpus, &cognates, &model0, &run)?;
    let simfn = pmi_similarity(&model);
    let mut sum = 0.0;
    for &(i, j) in &related.pairs {
        sum += language_distance(&corpus.doculects[i], &corpus.doculects[j], &simfn)?;
    }
    Ok(sum / related.pairs.len() as f64)
}

/// Controls for [`nelder_mead`].
#[derive(Debug, Clone)]
pub struct NelderMeadOptions {
    pub max_evaluations: usize,
    pub diameter_tolerance: f64,
    /// When set, exhausting the budget before the simplex shrinks below the
    /// tolerance is an error instead of returning the best vertex so far.
    pub require_convergence: bool,
}

impl Default for NelderMeadOptions {
    fn default() -> Self {
        NelderMeadOptions {
            max_evaluations: 200,
            diameter_tolerance: 1e-3,
            require_convergence: false,
        }
    }
}

/// Downhill simplex minimization with the standard coefficients
/// (reflection 1, expansion 2, contraction 0.5, shrink 0.5).
///
/// The initial simplex is the start point plus a 10% perturbation per
/// coordinate (0.1 absolute where the coordinate is zero), so the search is
/// deterministic. Stops when the simplex diameter falls below the tolerance
/// or the objective is flat across the simplex.
pub fn nelder_mead<F>(
    mut f: F,
    init: &[f64],
    options: &NelderMeadOptions,
) -> Result<(Vec<f64>, f64), PmiTrainError>
where
    F: FnMut(&[f64]) -> f64,
{
    let n = init.len();
    assert!(n >= 1, "need at least one dimension");
    let mut evaluations = 0usize;
    let mut eval = |x: &[f64], evaluations: &mut usize| -> f64 {
        *evaluations += 1;
        f(x)
    };

    let mut simplex: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
    simplex.push(init.to_vec());
    for d in 0..n {
        let mut v = init.to_vec();
        v[d] += if v[d] != 0.0 { 0.1 * v[d] } else { 0.1 };
        simplex.push(v);
    }
    let mut values: Vec<f64> = simplex
        .iter()
        .map(|v| eval(v, &mut evaluations))
        .collect();

    let diameter = |s: &[Vec<f64>]| -> f64 {
        let mut d: f64 = 0.0;
        for i in 0..s.len() {
            for j in (i + 1)..s.len() {
                let dist = s[i]
                    .iter()
                    .zip(&s[j])
                    .map(|(a, b)| (a - b).powi(2))
                    .sum::<f64>()
                    .sqrt();
                d = d.max(dist);
            }
        }
        d
    };

    loop {
        // Stable sort keeps the start point first among exact ties, so a
        // flat objective hands back the init vertex.
        let mut order: Vec<usize> = (0..=n).collect();
        order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).expect("objective is NaN"));
        simplex = order.iter().map(|&i| simplex[i].clone()).collect();
        values = order.iter().map(|&i| values[i]).collect();

        let spread = values[n] - values[0];
        if spread.abs() <= f64::EPSILON * values[0].abs().max(1.0) {
            return Ok((simplex[0].clone(), values[0]));
        }
        if diameter(&simplex) < options.diameter_tolerance {
            return Ok((simplex[0].clone(), values[0]));
        }
        if evaluations >= options.max_evaluations {
            if options.require_convergence {
                return Err(PmiTrainError::MaxEvaluationsExceeded { evaluations });
            }
            return Ok((simplex[0].clone(), values[0]));
        }

        let centroid: Vec<f64> = (0..n)
            .map(|d| simplex[..n].iter().map(|v| v[d]).sum::<f64>() / n as f64)
            .collect();
        let worst = simplex[n].clone();
        let point = |coef: f64| -> Vec<f64> {
            centroid
                .iter()
                .zip(&worst)
                .map(|(c, w)| c + coef * (c - w))
                .collect()
        };

        let reflected = point(1.0);
        let f_reflected = eval(&reflected, &mut evaluations);
        if f_reflected < values[0] {
            let expanded = point(2.0);
            let f_expanded = eval(&expanded, &mut evaluations);
            if f_expanded < f_reflected {
                simplex[n] = expanded;
                values[n] = f_expanded;
            } else {
                simplex[n] = reflected;
                values[n] = f_reflected;
            }
        } else if f_reflected < values[n - 1] {
            simplex[n] = reflected;
            values[n] = f_reflected;
        } else {
            // Contract on the better side of the worst vertex.
            let (contracted, f_against) = if f_reflected < values[n] {
                (point(0.5), f_reflected)
            } else {
                (point(-0.5), values[n])
            };
            let f_contracted = eval(&contracted, &mut evaluations);
            if f_contracted <= f_against {
                simplex[n] = contracted;
                values[n] = f_contracted;
            } else {
                // Shrink everything toward the best vertex.
                for k in 1..=n {
                    simplex[k] = simplex[0]
                        .iter()
                        .zip(&simplex[k])
                        .map(|(b, v)| b + 0.5 * (v - b))
                        .collect();
                    values[k] = eval(&simplex[k], &mut evaluations);
                }
            }
        }
    }
}

/// Result of the hyperparameter search.
#[derive(Debug, Clone, PartialEq)]
pub struct HyperparameterFit {
    pub gap_open: f64,
    pub gap_extend: f64,
    pub theta: f64,
    pub target: f64,
}

/// Nelder-Mead minimization of [`target_function`] over
/// (gap_open, gap_extend, theta) from the given start. The search itself is
/// deterministic; the seed is carried into the training config so seeded
/// downstream consumers agree between runs.
pub fn optimize_hyperparameters(
    corpus: &Corpus,
    related: &ProbablyRelatedPairs,
    init: (f64, f64, f64),
    seed: u64,
    config: &TrainingConfig,
    options: &NelderMeadOptions,
) -> Result<HyperparameterFit, PmiTrainError> {
    let base = TrainingConfig {
        seed,
        ..config.clone()
    };
    let objective = |x: &[f64]| -> f64 {
        // Out-of-range or degenerate hyperparameters are scored as the worst
        // possible mean distance instead of erroring mid-search.
        target_function(corpus, related, x[0], x[1], x[2], &base).unwrap_or(f64::MAX)
    };
    let (best, target) = nelder_mead(objective, &[init.0, init.1, init.2], options)?;
    Ok(HyperparameterFit {
        gap_open: best[0],
        gap_extend: best[1],
        theta: best[2],
        target,
    })
}
