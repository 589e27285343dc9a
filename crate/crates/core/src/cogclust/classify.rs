//! Pair classifiers: an RBF-kernel SVM with probability calibration, and a
//! small regularized logistic model as a cheap substitute.

use serde::{Deserialize, Serialize};

use super::features::{PairFeatures, FEATURE_COUNT};
use super::svm::{sigmoid_predict, sigmoid_train, smo_decision, smo_train, SmoOptions};
use super::CogclustError;

/// Anything that can score a feature vector as P(cognate).
pub trait Classifier: Send + Sync {
    fn predict_proba(&self, features: &PairFeatures) -> f64;
    /// Bitmask of the features the model consumes.
    fn subset(&self) -> u8;
}

#[derive(Debug, Clone)]
pub struct TrainOptions {
    pub c: f64,
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for TrainOptions {
    fn default() -> Self {
        TrainOptions { c: 1.0, tolerance: 1e-3, max_iterations: 100_000 }
    }
}

/// Column-wise location/scale remembered from training data.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct Standardizer {
    pub means: Vec<f64>,
    pub scales: Vec<f64>,
}

impl Standardizer {
    fn fit(rows: &[Vec<f64>]) -> Standardizer {
        let d = rows[0].len();
        let n = rows.len() as f64;
        let mut means = vec![0.0; d];
        for row in rows {
            for (m, v) in means.iter_mut().zip(row) {
                *m += v;
            }
        }
        for m in &mut means {
            *m /= n;
        }
        let mut scales = vec![0.0; d];
        for row in rows {
            for ((s, v), m) in scales.iter_mut().zip(row).zip(&means) {
                *s += (v - m) * (v - m);
            }
        }
        for s in &mut scales {
            *s = (*s / n).sqrt();
            if *s == 0.0 {
                *s = 1.0; // constant column: leave it centred at zero
            }
        }
        Standardizer { means, scales }
    }

    fn apply(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .zip(&self.means)
            .zip(&self.scales)
            .map(|((v, m), s)| (v - m) / s)
            .collect()
    }
}

fn check_training_set(
    data: &[(PairFeatures, bool)],
) -> Result<(), CogclustError> {
    if data.len() < 10 {
        return Err(CogclustError::TooFewPairs(data.len()));
    }
    if data.iter().all(|(_, y)| *y) {
        return Err(CogclustError::DegenerateLabels(1));
    }
    if data.iter().all(|(_, y)| !*y) {
        return Err(CogclustError::DegenerateLabels(0));
    }
    Ok(())
}

/// SVM over a feature subset; probabilities via a fitted sigmoid over the
/// training decision values.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClassifierModel {
    pub subset: u8,
    standardizer: Standardizer,
    pub gamma: f64,
    support: Vec<Vec<f64>>,
    /// y_s · α_s for each support vector.
    coef: Vec<f64>,
    rho: f64,
    sigmoid_a: f64,
    sigmoid_b: f64,
    pub iterations: usize,
    pub converged: bool,
}

pub fn train_classifier(
    data: &[(PairFeatures, bool)],
    subset: u8,
    options: &TrainOptions,
) -> Result<ClassifierModel, CogclustError> {
    assert!(subset >= 1 && subset < 1 << FEATURE_COUNT, "subset mask out of range");
    check_training_set(data)?;
    let raw: Vec<Vec<f64>> = data.iter().map(|(f, _)| f.select(subset)).collect();
    let labels: Vec<bool> = data.iter().map(|(_, y)| *y).collect();
    let standardizer = Standardizer::fit(&raw);
    let x: Vec<Vec<f64>> = raw.iter().map(|r| standardizer.apply(r)).collect();
    let d = x[0].len();

    // 1/(dimension · pooled variance) of the scaled data; after scaling the
    // pooled variance is 1 unless columns were constant.
    let n_total = (x.len() * d) as f64;
    let mean_all: f64 = x.iter().flat_map(|r| r.iter()).sum::<f64>() / n_total;
    let var_all: f64 =
        x.iter().flat_map(|r| r.iter()).map(|v| (v - mean_all) * (v - mean_all)).sum::<f64>()
            / n_total;
    let gamma = if var_all > 0.0 { 1.0 / (d as f64 * var_all) } else { 1.0 / d as f64 };

    let y: Vec<f64> = labels.iter().map(|&b| if b { 1.0 } else { -1.0 }).collect();
    let smo = SmoOptions {
        c: options.c,
        tolerance: options.tolerance,
        max_iterations: options.max_iterations,
    };
    let fit = smo_train(&x, &y, gamma, &smo);

    let mut support = Vec::new();
    let mut coef = Vec::new();
    for (t, &a) in fit.alpha.iter().enumerate() {
        if a > 1e-12 {
            support.push(x[t].clone());
            coef.push(a * y[t]);
        }
    }
    let (sigmoid_a, sigmoid_b) = sigmoid_train(&fit.decision_values, &labels);

    Ok(ClassifierModel {
        subset,
        standardizer,
        gamma,
        support,
        coef,
        rho: fit.rho,
        sigmoid_a,
        sigmoid_b,
        iterations: fit.iterations,
        converged: fit.converged,
    })
}

impl ClassifierModel {
    pub fn decision_value(&self, features: &PairFeatures) -> f64 {
        let z = self.standardizer.apply(&features.select(self.subset));
        smo_decision(&self.support, &self.coef, self.rho, self.gamma, &z)
    }

    pub fn n_support(&self) -> usize {
        self.support.len()
    }
}

impl Classifier for ClassifierModel {
    fn predict_proba(&self, features: &PairFeatures) -> f64 {
        sigmoid_predict(self.decision_value(features), self.sigmoid_a, self.sigmoid_b)
    }

    fn subset(&self) -> u8 {
        self.subset
    }
}

/// Logistic regression on a feature subset plus all quadratic terms,
/// fitted by Newton iterations with an L2 penalty.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LogisticModel {
    pub subset: u8,
    standardizer: Standardizer,
    /// One weight per expanded column, bias last.
    weights: Vec<f64>,
}

fn expand_quadratic(z: &[f64]) -> Vec<f64> {
    let mut out = z.to_vec();
    for i in 0..z.len() {
        for j in i..z.len() {
            out.push(z[i] * z[j]);
        }
    }
    out
}

/// Gaussian elimination with partial pivoting; the systems here are tiny.
fn solve_linear(mut m: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n).max_by(|&r, &s| m[r][col].abs().total_cmp(&m[s][col].abs()))?;
        if m[pivot][col].abs() < 1e-12 {
            return None;
        }
        m.swap(col, pivot);
        b.swap(col, pivot);
        for row in 0..n {
            if row == col {
                continue;
            }
            let f = m[row][col] / m[col][col];
            for k in col..n {
                m[row][k] -= f * m[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    Some((0..n).map(|i| b[i] / m[i][i]).collect())
}

pub fn train_logistic(
    data: &[(PairFeatures, bool)],
    subset: u8,
) -> Result<LogisticModel, CogclustError> {
    assert!(subset >= 1 && subset < 1 << FEATURE_COUNT, "subset mask out of range");
    check_training_set(data)?;
    let raw: Vec<Vec<f64>> = data.iter().map(|(f, _)| f.select(subset)).collect();
    let standardizer = Standardizer::fit(&raw);
    let x: Vec<Vec<f64>> =
        raw.iter().map(|r| expand_quadratic(&standardizer.apply(r))).collect();
    let y: Vec<f64> = data.iter().map(|(_, l)| if *l { 1.0 } else { 0.0 }).collect();
    let d = x[0].len() + 1; // bias
    let lambda = 1e-3;
    let mut w = vec![0.0f64; d];

    for _ in 0..100 {
        let mut grad = vec![0.0f64; d];
        let mut hess = vec![vec![0.0f64; d]; d];
        for (row, &target) in x.iter().zip(&y) {
            let lin: f64 =
                row.iter().zip(&w).map(|(v, wi)| v * wi).sum::<f64>() + w[d - 1];
            let p = 1.0 / (1.0 + (-lin).exp());
            let err = p - target;
            let weight = (p * (1.0 - p)).max(1e-10);
            for i in 0..d {
                let xi = if i == d - 1 { 1.0 } else { row[i] };
                grad[i] += err * xi;
                for j in i..d {
                    let xj = if j == d - 1 { 1.0 } else { row[j] };
                    hess[i][j] += weight * xi * xj;
                }
            }
        }
        for i in 0..d {
            grad[i] += lambda * w[i];
            hess[i][i] += lambda;
            for j in 0..i {
                hess[i][j] = hess[j][i];
            }
        }
        let norm: f64 = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
        if norm < 1e-10 {
            break;
        }
        match solve_linear(hess, grad) {
            Some(step) => {
                for (wi, s) in w.iter_mut().zip(&step) {
                    *wi -= s;
                }
            }
            None => break,
        }
    }

    Ok(LogisticModel { subset, standardizer, weights: w })
}

impl Classifier for LogisticModel {
    fn predict_proba(&self, features: &PairFeatures) -> f64 {
        let z = expand_quadratic(&self.standardizer.apply(&features.select(self.subset)));
        let d = self.weights.len();
        let lin: f64 =
            z.iter().zip(&self.weights).map(|(v, w)| v * w).sum::<f64>() + self.weights[d - 1];
        1.0 / (1.0 + (-lin).exp())
    }

    fn subset(&self) -> u8 {
        self.subset
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// Cognate-looking pairs get feature 3 near 0, non-cognates near 3.
    fn synthetic_pairs(n_per: usize, seed: u64) -> Vec<(PairFeatures, bool)> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut data = Vec::new();
        for _ in 0..n_per {
            let mut f = [0.0; FEATURE_COUNT];
            f[0] = 8.0 + rng.gen::<f64>();
            f[2] = rng.gen::<f64>() * 0.5;
            f[4] = 0.2 + rng.gen::<f64>() * 0.1;
            data.push((PairFeatures(f), true));
            let mut g = [0.0; FEATURE_COUNT];
            g[0] = -2.0 + rng.gen::<f64>();
            g[2] = 3.0 + rng.gen::<f64>() * 0.5;
            g[4] = 1.5 + rng.gen::<f64>() * 0.1;
            data.push((PairFeatures(g), false));
        }
        data
    }

    #[test]
    fn svm_separates_synthetic_pairs() {
        let data = synthetic_pairs(40, 2);
        let model = train_classifier(&data, 0b0010101, &TrainOptions::default()).unwrap();
        assert!(model.converged);
        let correct = data
            .iter()
            .filter(|(f, y)| (model.predict_proba(f) > 0.5) == *y)
            .count();
        assert!(correct as f64 / data.len() as f64 >= 0.95);
        // Probabilities land on the right side decisively for clear cases.
        assert!(model.predict_proba(&data[0].0) > 0.8);
        assert!(model.predict_proba(&data[1].0) < 0.2);
    }

    #[test]
    fn label_flip_roughly_mirrors_probabilities() {
        let data = synthetic_pairs(30, 9);
        let flipped: Vec<(PairFeatures, bool)> =
            data.iter().map(|(f, y)| (*f, !*y)).collect();
        let m1 = train_classifier(&data, 0b0000101, &TrainOptions::default()).unwrap();
        let m2 = train_classifier(&flipped, 0b0000101, &TrainOptions::default()).unwrap();
        for (f, _) in data.iter().take(20) {
            let p = m1.predict_proba(f);
            let q = m2.predict_proba(f);
            assert!(
                (p + q - 1.0).abs() < 0.05,
                "p={p} q={q} should be near-complementary"
            );
        }
    }

    #[test]
    fn degenerate_labels_are_rejected() {
        let data: Vec<(PairFeatures, bool)> = synthetic_pairs(10, 1)
            .into_iter()
            .map(|(f, _)| (f, true))
            .collect();
        match train_classifier(&data, 1, &TrainOptions::default()) {
            Err(CogclustError::DegenerateLabels(1)) => {}
            other => panic!("expected DegenerateLabels, got {other:?}"),
        }
    }

    #[test]
    fn tiny_training_sets_are_rejected() {
        let data = synthetic_pairs(3, 1);
        let six: Vec<_> = data.into_iter().take(6).collect();
        match train_classifier(&six, 1, &TrainOptions::default()) {
            Err(CogclustError::TooFewPairs(6)) => {}
            other => panic!("expected TooFewPairs, got {other:?}"),
        }
    }

    #[test]
    fn serialized_models_are_byte_identical_across_runs() {
        let data = synthetic_pairs(25, 4);
        let m1 = train_classifier(&data, 0b0010100, &TrainOptions::default()).unwrap();
        let m2 = train_classifier(&data, 0b0010100, &TrainOptions::default()).unwrap();
        let s1 = serde_json::to_string(&m1).unwrap();
        let s2 = serde_json::to_string(&m2).unwrap();
        assert_eq!(s1, s2);
    }

    #[test]
    fn constant_columns_do_not_poison_the_scale() {
        let mut data = synthetic_pairs(20, 6);
        for (f, _) in &mut data {
            f.0[1] = 42.0; // same value everywhere
        }
        let model = train_classifier(&data, 0b0000111, &TrainOptions::default()).unwrap();
        let p = model.predict_proba(&data[0].0);
        assert!(p.is_finite() && (0.0..=1.0).contains(&p));
    }

    #[test]
    fn logistic_fallback_separates_the_same_data() {
        let data = synthetic_pairs(40, 8);
        let model = train_logistic(&data, 0b0010100).unwrap();
        let correct = data
            .iter()
            .filter(|(f, y)| (model.predict_proba(f) > 0.5) == *y)
            .count();
        assert!(correct as f64 / data.len() as f64 >= 0.95);
        assert_eq!(model.subset(), 0b0010100);
    }

    #[test]
    fn logistic_learns_a_quadratic_boundary() {
        // Inside-vs-outside a ring in feature 3: linear terms alone cannot
        // split this, the squared term can.
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut data = Vec::new();
        for _ in 0..60 {
            let v: f64 = rng.gen::<f64>() * 4.0 - 2.0;
            let mut f = [0.0; FEATURE_COUNT];
            f[2] = v;
            data.push((PairFeatures(f), v.abs() < 1.0));
        }
        let model = train_logistic(&data, 0b0000100).unwrap();
        let correct = data
            .iter()
            .filter(|(f, y)| (model.predict_proba(f) > 0.5) == *y)
            .count();
        assert!(correct as f64 / data.len() as f64 >= 0.9, "correct = {correct}/60");
    }

    #[test]
    fn probability_is_monotone_in_the_decision_value() {
        let data = synthetic_pairs(20, 12);
        let model = train_classifier(&data, 0b0000101, &TrainOptions::default()).unwrap();
        let mut scored: Vec<(f64, f64)> = data
            .iter()
            .map(|(f, _)| (model.decision_value(f), model.predict_proba(f)))
            .collect();
        scored.sort_by(|a, b| a.0.total_cmp(&b.0));
        for w in scored.windows(2) {
            assert!(w[0].1 <= w[1].1 + 1e-12);
        }
    }
}
