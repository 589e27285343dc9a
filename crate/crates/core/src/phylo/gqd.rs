//! Generalized quartet distance: among quartets fully resolved in the
//! reference tree, the fraction whose induced topology in the inferred tree
//! disagrees. Quartets the inferred tree leaves unresolved count as
//! disagreements (see [`quartet_differs`]).

use std::collections::HashSet;

use rand::Rng;
use rand::SeedableRng;
use rayon::prelude::*;

use super::{PhyloError, Tree};

/// Controls for [`gqd`].
#[derive(Debug, Clone)]
pub struct GqdOptions {
    /// Leaf counts up to this bound are enumerated exactly.
    pub exact_threshold: usize,
    /// Sample size when enumeration is skipped.
    pub samples: usize,
    pub seed: u64,
    /// Forces the sampling path even below the threshold (for validation).
    pub force_sampling: bool,
}

impl Default for GqdOptions {
    fn default() -> Self {
        GqdOptions {
            exact_threshold: 80,
            samples: 1_000_000,
            seed: 0,
            force_sampling: false,
        }
    }
}

/// GQD value plus how it was obtained.
#[derive(Debug, Clone)]
pub struct GqdResult {
    pub value: f64,
    /// Binomial standard error of the sampled estimate; None when exact.
    pub standard_error: Option<f64>,
    pub exact: bool,
    /// Reference-resolved quartets inspected (all of them when exact).
    pub quartets: u64,
}

/// Quartet split over indices (a,b,c,d): which partner `a` takes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Split {
    AbCd,
    AcBd,
    AdBc,
}

/// Resolves a quartet from a table of pairwise topological distances using
/// the four-point condition; None means the quartet is a star.
fn quartet_split(m: &[Vec<u32>], a: usize, b: usize, c: usize, d: usize) -> Option<Split> {
    let s0 = m[a][b] + m[c][d];
    let s1 = m[a][c] + m[b][d];
    let s2 = m[a][d] + m[b][c];
    let min = s0.min(s1).min(s2);
    let hits = u8::from(s0 == min) + u8::from(s1 == min) + u8::from(s2 == min);
    if hits != 1 {
        return None;
    }
    Some(if s0 == min {
        Split::AbCd
    } else if s1 == min {
        Split::AcBd
    } else {
        Split::AdBc
    })
}

/// The disagreement predicate: a reference-resolved quartet counts as
/// different unless the inferred tree resolves it the same way. An
/// inferred star therefore disagrees.
fn quartet_differs(reference: Split, inferred: Option<Split>) -> bool {
    inferred != Some(reference)
}

/// Compares two trees over their shared leaves.
pub fn gqd(inferred: &Tree, reference: &Tree, options: &GqdOptions) -> Result<GqdResult, PhyloError> {
    let inf_leaves: HashSet<String> = inferred.leaf_labels().into_iter().collect();
    let ref_leaves: HashSet<String> = reference.leaf_labels().into_iter().collect();
    let shared: HashSet<&str> = inf_leaves
        .iter()
        .map(|s| s.as_str())
        .filter(|s| ref_leaves.contains(*s))
        .collect();
    if shared.len() < 4 {
        return Err(PhyloError::NoResolvedQuartets);
    }
    let inf = inferred.restricted_to(&shared);
    let re = reference.restricted_to(&shared);
    let (labels_i, m_i) = unit_distances(&inf);
    let (labels_r, m_r) = unit_distances(&re);
    debug_assert_eq!(labels_i, labels_r, "restriction orders labels identically");
    let n = labels_i.len();

    if n <= options.exact_threshold && !options.force_sampling {
        // Exact enumeration, parallel over the first index.
        let (resolved, differing) = (0..n)
            .into_par_iter()
            .map(|a| {
                let mut resolved = 0u64;
                let mut differing = 0u64;
                for b in (a + 1)..n {
                    for c in (b + 1)..n {
                        for d in (c + 1)..n {
                            if let Some(r) = quartet_split(&m_r, a, b, c, d) {
                                resolved += 1;
                                if quartet_differs(r, quartet_split(&m_i, a, b, c, d)) {
                                    differing += 1;
                                }
                            }
                        }
                    }
                }
                (resolved, differing)
            })
            .reduce(|| (0, 0), |x, y| (x.0 + y.0, x.1 + y.1));
        if resolved == 0 {
            return Err(PhyloError::NoResolvedQuartets);
        }
        Ok(GqdResult {
            value: differing as f64 / resolved as f64,
            standard_error: None,
            exact: true,
            quartets: resolved,
        })
    } else {
        // Uniform quartet sampling; the estimator conditions on quartets
        // resolved in the reference tree.
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(options.seed);
        let quads: Vec<[usize; 4]> = (0..options.samples)
            .map(|_| {
                let mut pick = [0usize; 4];
                let mut k = 0;
                while k < 4 {
                    let v = rng.gen_range(0..n);
                    if !pick[..k].contains(&v) {
                        pick[k] = v;
                        k += 1;
                    }
                }
                pick
            })
            .collect();
        let (resolved, differing) = quads
            .par_iter()
            .map(|&[a, b, c, d]| match quartet_split(&m_r, a, b, c, d) {
                Some(r) => (
                    1u64,
                    u64::from(quartet_differs(r, quartet_split(&m_i, a, b, c, d))),
                ),
                None => (0, 0),
            })
            .reduce(|| (0, 0), |x, y| (x.0 + y.0, x.1 + y.1));
        if resolved == 0 {
            return Err(PhyloError::NoResolvedQuartets);
        }
        let p = differing as f64 / resolved as f64;
        let se = (p * (1.0 - p) / resolved as f64).sqrt();
        Ok(GqdResult {
            value: p,
            standard_error: Some(se),
            exact: false,
            quartets: resolved,
        })
    }
}

/// Topological (unit-branch) leaf distances as exact integers.
fn unit_distances(tree: &Tree) -> (Vec<String>, Vec<Vec<u32>>) {
    let (labels, m) = tree.leaf_distance_matrix(true);
    let n = labels.len();
    let mut out = vec![vec![0u32; n]; n];
    for i in 0..n {
        for j in 0..n {
            out[i][j] = m[i][j] as u32;
        }
    }
    (labels, out)
}
