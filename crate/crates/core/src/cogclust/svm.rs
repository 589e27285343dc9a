//! Sequential minimal optimization for a soft-margin RBF-kernel SVM, plus
//! the sigmoid fit used to turn decision values into probabilities.
//!
//! Solves min ½αᵀQα − eᵀα with 0 ≤ α ≤ C and yᵀα = 0, Q_ij = y_i y_j K_ij,
//! by repeatedly updating the maximal violating pair.

use std::collections::{HashMap, VecDeque};

#[derive(Debug, Clone)]
pub struct SmoOptions {
    pub c: f64,
    /// Stop when the maximal KKT violation drops below this.
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for SmoOptions {
    fn default() -> Self {
        SmoOptions { c: 1.0, tolerance: 1e-3, max_iterations: 100_000 }
    }
}

#[derive(Debug, Clone)]
pub struct SmoFit {
    pub alpha: Vec<f64>,
    pub rho: f64,
    /// Decision values of the training points, rho already subtracted.
    pub decision_values: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

pub fn rbf_kernel(a: &[f64], b: &[f64], gamma: f64) -> f64 {
    let sq: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    (-gamma * sq).exp()
}

/// Bounded FIFO cache of kernel rows; the active set revisits rows often.
struct RowCache<'a> {
    x: &'a [Vec<f64>],
    gamma: f64,
    rows: HashMap<usize, Vec<f64>>,
    order: VecDeque<usize>,
    cap: usize,
}

impl<'a> RowCache<'a> {
    fn new(x: &'a [Vec<f64>], gamma: f64) -> RowCache<'a> {
        RowCache { x, gamma, rows: HashMap::new(), order: VecDeque::new(), cap: 512 }
    }

    fn row(&mut self, i: usize) -> &[f64] {
        if !self.rows.contains_key(&i) {
            let xi = &self.x[i];
            let row: Vec<f64> = self.x.iter().map(|xj| rbf_kernel(xi, xj, self.gamma)).collect();
            if self.order.len() == self.cap {
                let evict = self.order.pop_front().unwrap();
                self.rows.remove(&evict);
            }
            self.order.push_back(i);
            self.rows.insert(i, row);
        }
        &self.rows[&i]
    }
}

/// Trains on pre-scaled inputs; `y` entries must be ±1.
pub fn smo_train(x: &[Vec<f64>], y: &[f64], gamma: f64, options: &SmoOptions) -> SmoFit {
    let n = x.len();
    assert_eq!(n, y.len());
    assert!(y.iter().all(|&v| v == 1.0 || v == -1.0), "labels must be +/-1");
    let c = options.c;
    // For the RBF kernel every diagonal entry is exp(0) = 1.
    const TAU: f64 = 1e-12;
    let mut alpha = vec![0.0f64; n];
    // G_t = dObj/dα_t = Σ_s Q_ts α_s − 1; all α start at 0.
    let mut g = vec![-1.0f64; n];
    let mut cache = RowCache::new(x, gamma);
    let mut iterations = 0;
    let mut converged = false;

    while iterations < options.max_iterations {
        // Maximal violating pair: i maximizes −y_t G_t over points that can
        // grow along +y_t, j minimizes it over points that can shrink.
        let mut i = usize::MAX;
        let mut g_max = f64::NEG_INFINITY;
        let mut j = usize::MAX;
        let mut g_min = f64::INFINITY;
        for t in 0..n {
            let v = -y[t] * g[t];
            let in_up = (y[t] > 0.0 && alpha[t] < c) || (y[t] < 0.0 && alpha[t] > 0.0);
            let in_low = (y[t] > 0.0 && alpha[t] > 0.0) || (y[t] < 0.0 && alpha[t] < c);
            if in_up && v > g_max {
                g_max = v;
                i = t;
            }
            if in_low && v < g_min {
                g_min = v;
                j = t;
            }
        }
        if i == usize::MAX || j == usize::MAX || g_max - g_min < options.tolerance {
            converged = true;
            break;
        }
        iterations += 1;

        let k_ij = cache.row(i)[j];
        let (old_i, old_j) = (alpha[i], alpha[j]);
        if y[i] != y[j] {
            // QD_i + QD_j + 2 Q_ij with Q_ij = −K_ij for opposite labels.
            let quad = (2.0 - 2.0 * k_ij).max(TAU);
            let delta = (-g[i] - g[j]) / quad;
            let diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > 0.0 {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = c - diff;
                }
            } else {
                if alpha[i] < 0.0 {
                    alpha[i] = 0.0;
                    alpha[j] = -diff;
                }
                if alpha[j] > c {
                    alpha[j] = c;
                    alpha[i] = c + diff;
                }
            }
        } else {
            let quad = (2.0 - 2.0 * k_ij).max(TAU); // QD_i + QD_j − 2 Q_ij
            let delta = (g[i] - g[j]) / quad;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > c {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = sum - c;
                }
                if alpha[j] > c {
                    alpha[j] = c;
                    alpha[i] = sum - c;
                }
            } else {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = sum;
                }
                if alpha[i] < 0.0 {
                    alpha[i] = 0.0;
                    alpha[j] = sum;
                }
            }
        }

        let (d_i, d_j) = (alpha[i] - old_i, alpha[j] - old_j);
        if d_i == 0.0 && d_j == 0.0 {
            // Numerically stuck pair; the violation is below resolution.
            converged = true;
            break;
        }
        let row_i: Vec<f64> = cache.row(i).to_vec();
        let row_j = cache.row(j);
        for t in 0..n {
            g[t] += y[t] * (y[i] * row_i[t] * d_i + y[j] * row_j[t] * d_j);
        }
    }

    // rho averages y_t G_t over free points, or brackets it at the bounds.
    let mut upper = f64::INFINITY;
    let mut lower = f64::NEG_INFINITY;
    let mut free_sum = 0.0;
    let mut free_count = 0usize;
    for t in 0..n {
        let yg = y[t] * g[t];
        if alpha[t] >= c {
            if y[t] < 0.0 {
                upper = upper.min(yg);
            } else {
                lower = lower.max(yg);
            }
        } else if alpha[t] <= 0.0 {
            if y[t] > 0.0 {
                upper = upper.min(yg);
            } else {
                lower = lower.max(yg);
            }
        } else {
            free_count += 1;
            free_sum += yg;
        }
    }
    let rho = if free_count > 0 { free_sum / free_count as f64 } else { (upper + lower) / 2.0 };

    // Σ_s y_s α_s K_ts = y_t (G_t + 1), so training decisions come for free.
    let decision_values: Vec<f64> =
        (0..n).map(|t| y[t] * (g[t] + 1.0) - rho).collect();

    SmoFit { alpha, rho, decision_values, iterations, converged }
}

/// Decision value for a new point given the support set.
pub fn smo_decision(
    support: &[Vec<f64>],
    coef: &[f64],
    rho: f64,
    gamma: f64,
    point: &[f64],
) -> f64 {
    support
        .iter()
        .zip(coef)
        .map(|(sv, &c)| c * rbf_kernel(sv, point, gamma))
        .sum::<f64>()
        - rho
}

/// Fits P(y=1|f) = 1/(1+exp(A·f+B)) to decision values by the regularized
/// maximum-likelihood Newton iteration of Lin, Lin & Weng.
pub fn sigmoid_train(decision_values: &[f64], labels: &[bool]) -> (f64, f64) {
    let l = decision_values.len();
    assert_eq!(l, labels.len());
    let prior1 = labels.iter().filter(|&&y| y).count() as f64;
    let prior0 = l as f64 - prior1;
    let max_iterations = 100;
    let min_step = 1e-10;
    let sigma = 1e-12;
    let eps = 1e-5;

    // Smoothed targets keep the likelihood bounded away from 0 and 1.
    let hi = (prior1 + 1.0) / (prior1 + 2.0);
    let lo = 1.0 / (prior0 + 2.0);
    let t: Vec<f64> = labels.iter().map(|&y| if y { hi } else { lo }).collect();

    let objective = |a: f64, b: f64| -> f64 {
        let mut fval = 0.0;
        for i in 0..l {
            let f_apb = decision_values[i] * a + b;
            if f_apb >= 0.0 {
                fval += t[i] * f_apb + (1.0 + (-f_apb).exp()).ln();
            } else {
                fval += (t[i] - 1.0) * f_apb + (1.0 + f_apb.exp()).ln();
            }
        }
        fval
    };

    let mut a = 0.0;
    let mut b = ((prior0 + 1.0) / (prior1 + 1.0)).ln();
    let mut fval = objective(a, b);

    for _ in 0..max_iterations {
        let mut h11 = sigma;
        let mut h22 = sigma;
        let mut h21 = 0.0;
        let mut g1 = 0.0;
        let mut g2 = 0.0;
        for i in 0..l {
            let f_apb = decision_values[i] * a + b;
            let (p, q) = if f_apb >= 0.0 {
                let e = (-f_apb).exp();
                (e / (1.0 + e), 1.0 / (1.0 + e))
            } else {
                let e = f_apb.exp();
                (1.0 / (1.0 + e), e / (1.0 + e))
            };
            let d2 = p * q;
            h11 += decision_values[i] * decision_values[i] * d2;
            h22 += d2;
            h21 += decision_values[i] * d2;
            let d1 = t[i] - p;
            g1 += decision_values[i] * d1;
            g2 += d1;
        }
        if g1.abs() < eps && g2.abs() < eps {
            break;
        }
        let det = h11 * h22 - h21 * h21;
        let da = -(h22 * g1 - h21 * g2) / det;
        let db = -(-h21 * g1 + h11 * g2) / det;
        let gd = g1 * da + g2 * db;

        let mut step = 1.0;
        while step >= min_step {
            let (na, nb) = (a + step * da, b + step * db);
            let nf = objective(na, nb);
            if nf < fval + 1e-4 * step * gd {
                a = na;
                b = nb;
                fval = nf;
                break;
            }
            step /= 2.0;
        }
        if step < min_step {
            break;
        }
    }
    (a, b)
}

/// P(y=1|f), branch chosen to avoid overflow.
pub fn sigmoid_predict(decision_value: f64, a: f64, b: f64) -> f64 {
    let f_apb = decision_value * a + b;
    if f_apb >= 0.0 {
        (-f_apb).exp() / (1.0 + (-f_apb).exp())
    } else {
        1.0 / (1.0 + f_apb.exp())
    }
}
