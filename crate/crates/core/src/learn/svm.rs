//! Soft-margin SVM with an RBF kernel, solved by sequential minimal
//! optimization with second-order working-set selection. Multiclass problems
//! use one-vs-one voting.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{argmax, check_dim, column_stats, standardize, LearnError, Result, TrainingData};

const TAU: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmParams {
    pub gamma: f64,
    pub c: f64,
    /// Stop once the maximal KKT violation `m(a) - M(a)` drops below this.
    pub tol: f64,
    /// Iteration cap; `None` means `max(100_000, 100 n)`.
    pub max_iter: Option<usize>,
    /// Scale features to zero mean / unit variance with training statistics.
    pub standardize: bool,
}

impl Default for SvmParams {
    fn default() -> Self {
        Self { gamma: 0.1, c: 10.0, tol: 1e-3, max_iter: None, standardize: true }
    }
}

pub fn rbf(gamma: f64, a: &[f64], b: &[f64]) -> f64 {
    (-gamma * a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>()).exp()
}

/// Dual solution of one binary problem.
#[derive(Debug, Clone, PartialEq)]
pub struct SmoSolution {
    pub alpha: Vec<f64>,
    pub bias: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Solves `min 1/2 a'Qa - e'a` s.t. `y'a = 0`, `0 <= a <= C`, with
/// `Q_ij = y_i y_j k(x_i, x_j)`. Labels must be `+1.0` / `-1.0`.
pub fn smo(x: &[Vec<f64>], y: &[f64], gamma: f64, c: f64, tol: f64, max_iter: usize) -> SmoSolution {
    let n = x.len();
    let mut k = vec![0.0; n * n];
    for i in 0..n {
        for j in i..n {
            let v = rbf(gamma, &x[i], &x[j]);
            k[i * n + j] = v;
            k[j * n + i] = v;
        }
    }
    let q = |i: usize, j: usize| y[i] * y[j] * k[i * n + j];

    let mut alpha = vec![0.0; n];
    let mut grad = vec![-1.0; n];
    let is_upper = |a: f64| a >= c;
    let is_lower = |a: f64| a <= 0.0;
    let mut iterations = 0;
    let mut converged = false;

    while iterations < max_iter {
        // i: maximal -y G over I_up
        let mut gmax = f64::NEG_INFINITY;
        let mut i_sel = None;
        for t in 0..n {
            let in_up = if y[t] > 0.0 { !is_upper(alpha[t]) } else { !is_lower(alpha[t]) };
            if in_up && -y[t] * grad[t] >= gmax {
                gmax = -y[t] * grad[t];
                i_sel = Some(t);
            }
        }
        // j: second-order choice over I_low
        let mut gmax2 = f64::NEG_INFINITY;
        let mut j_sel = None;
        let mut obj_min = f64::INFINITY;
        if let Some(i) = i_sel {
            for t in 0..n {
                let in_low = if y[t] > 0.0 { !is_lower(alpha[t]) } else { !is_upper(alpha[t]) };
                if !in_low {
                    continue;
                }
                let yg = y[t] * grad[t];
                gmax2 = gmax2.max(yg);
                let grad_diff = gmax + yg;
                if grad_diff > 0.0 {
                    let quad = k[i * n + i] + k[t * n + t] - 2.0 * k[i * n + t];
                    let obj = -(grad_diff * grad_diff) / if quad > 0.0 { quad } else { TAU };
                    if obj <= obj_min {
                        obj_min = obj;
                        j_sel = Some(t);
                    }
                }
            }
        }
        let (Some(i), Some(j)) = (i_sel, j_sel) else {
            converged = true;
            break;
        };
        if gmax + gmax2 < tol {
            converged = true;
            break;
        }
        iterations += 1;

        let (old_i, old_j) = (alpha[i], alpha[j]);
        if y[i] != y[j] {
            let quad = (q(i, i) + q(j, j) + 2.0 * q(i, j)).max(TAU);
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > 0.0 {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            if diff > 0.0 {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = c - diff;
                }
            } else if alpha[j] > c {
                alpha[j] = c;
                alpha[i] = c + diff;
            }
        } else {
            let quad = (q(i, i) + q(j, j) - 2.0 * q(i, j)).max(TAU);
            let delta = (grad[i] - grad[j]) / quad;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > c {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = sum - c;
                }
            } else if alpha[j] < 0.0 {
                alpha[j] = 0.0;
                alpha[i] = sum;
            }
            if sum > c {
                if alpha[j] > c {
                    alpha[j] = c;
                    alpha[i] = sum - c;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = sum;
            }
        }

        let (di, dj) = (alpha[i] - old_i, alpha[j] - old_j);
        for (t, g) in grad.iter_mut().enumerate() {
            *g += q(t, i) * di + q(t, j) * dj;
        }
    }

    // bias from free vectors, or the middle of the feasible interval
    let (mut ub, mut lb) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut sum_free, mut n_free) = (0.0, 0usize);
    for t in 0..n {
        let yg = y[t] * grad[t];
        if is_upper(alpha[t]) {
            if y[t] < 0.0 { ub = ub.min(yg) } else { lb = lb.max(yg) }
        } else if is_lower(alpha[t]) {
            if y[t] > 0.0 { ub = ub.min(yg) } else { lb = lb.max(yg) }
        } else {
            n_free += 1;
            sum_free += yg;
        }
    }
    let rho = match (n_free, ub.is_finite(), lb.is_finite()) {
        (1.., _, _) => sum_free / n_free as f64,
        (0, true, true) => (ub + lb) / 2.0,
        (0, true, false) => ub,
        (0, false, true) => lb,
        _ => 0.0,
    };

    SmoSolution { alpha, bias: -rho, iterations, converged }
}

/// One binary machine stored as its dual expansion over support vectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinarySvm {
    pub support_vectors: Vec<Vec<f64>>,
    /// `alpha_i * y_i` for each support vector.
    pub dual_coef: Vec<f64>,
    pub bias: f64,
    pub gamma: f64,
    pub converged: bool,
    pub iterations: usize,
}

impl BinarySvm {
    pub fn from_solution(x: &[Vec<f64>], y: &[f64], sol: &SmoSolution, gamma: f64) -> Self {
        let (support_vectors, dual_coef) = x
            .iter()
            .zip(y)
            .zip(&sol.alpha)
            .filter(|(_, &a)| a > 0.0)
            .map(|((xi, yi), a)| (xi.clone(), a * yi))
            .unzip();
        Self {
            support_vectors,
            dual_coef,
            bias: sol.bias,
            gamma,
            converged: sol.converged,
            iterations: sol.iterations,
        }
    }

    pub fn train(x: &[Vec<f64>], y: &[f64], params: &SvmParams) -> Self {
        let max_iter = params.max_iter.unwrap_or_else(|| (100 * x.len()).max(100_000));
        let sol = smo(x, y, params.gamma, params.c, params.tol, max_iter);
        Self::from_solution(x, y, &sol, params.gamma)
    }

    /// `sum_i coef_i k(sv_i, x) + b`; positive means the `+1` side.
    pub fn decision(&self, x: &[f64]) -> f64 {
        self.support_vectors
            .iter()
            .zip(&self.dual_coef)
            .map(|(sv, c)| c * rbf(self.gamma, sv, x))
            .sum::<f64>()
            + self.bias
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairMachine {
    /// Class index voted for when the decision value is positive.
    pub positive: usize,
    pub negative: usize,
    pub svm: BinarySvm,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmModel {
    pub machines: Vec<PairMachine>,
    pub n_classes: usize,
    /// Classes seen in training, ascending.
    pub present: Vec<usize>,
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
    pub params: SvmParams,
}

impl SvmModel {
    fn prepare(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim(x.len(), self.means.len())?;
        Ok(if self.params.standardize { standardize(x, &self.means, &self.stds) } else { x.to_vec() })
    }

    pub fn votes(&self, x: &[f64]) -> Result<Vec<usize>> {
        let x = self.prepare(x)?;
        let mut votes = vec![0; self.n_classes];
        for m in &self.machines {
            let winner = if m.svm.decision(&x) > 0.0 { m.positive } else { m.negative };
            votes[winner] += 1;
        }
        Ok(votes)
    }

    /// One-vs-one vote; ties go to the lowest class index.
    pub fn predict_index(&self, x: &[f64]) -> Result<usize> {
        if let [only] = self.present.as_slice() {
            check_dim(x.len(), self.means.len())?;
            return Ok(*only);
        }
        Ok(argmax(&self.votes(x)?))
    }

    pub fn converged(&self) -> bool {
        self.machines.iter().all(|m| m.svm.converged)
    }
}

/// Trains one machine per class pair. Non-convergence of any machine returns
/// [`LearnError::NotConverged`] carrying the best-so-far model.
pub fn train_svm(data: &TrainingData, params: &SvmParams) -> Result<SvmModel> {
    if !(params.gamma > 0.0 && params.c > 0.0 && params.tol > 0.0) {
        return Err(LearnError::Config(format!(
            "gamma ({}), C ({}) and tol ({}) must be > 0",
            params.gamma, params.c, params.tol
        )));
    }
    if data.is_empty() {
        return Err(LearnError::Train("cannot train an SVM on an empty dataset".into()));
    }
    let d = data.n_features();
    let (means, stds) = if params.standardize {
        column_stats(&data.x, d)
    } else {
        (vec![0.0; d], vec![1.0; d])
    };
    let xs: Vec<Vec<f64>> = data.x.iter().map(|r| standardize(r, &means, &stds)).collect();

    let k = data.n_classes();
    // classes absent from this training set get no machines and no votes
    let counts = data.class_counts();
    let present: Vec<usize> = (0..k).filter(|&c| counts[c] > 0).collect();
    let pairs: Vec<(usize, usize)> = present
        .iter()
        .enumerate()
        .flat_map(|(i, &a)| present[i + 1..].iter().map(move |&b| (a, b)))
        .collect();
    let machines: Vec<PairMachine> = pairs
        .par_iter()
        .map(|&(a, b)| {
            let (px, py): (Vec<Vec<f64>>, Vec<f64>) = xs
                .iter()
                .zip(&data.y)
                .filter(|(_, &c)| c == a || c == b)
                .map(|(r, &c)| (r.clone(), if c == a { 1.0 } else { -1.0 }))
                .unzip();
            PairMachine { positive: a, negative: b, svm: BinarySvm::train(&px, &py, params) }
        })
        .collect();

    let model = SvmModel { machines, n_classes: k, present, means, stds, params: params.clone() };
    if model.converged() {
        Ok(model)
    } else {
        Err(LearnError::NotConverged(Box::new(model)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::FeatureId;
    use crate::learn::ClassLabel;
    use crate::signal::EmotionLabel;

    #[test]
    fn two_points_bisected() {
        let x = vec![vec![0.0, 1.0], vec![2.0, -1.0]];
        let y = vec![1.0, -1.0];
        let m = BinarySvm::train(&x, &y, &SvmParams { gamma: 0.5, c: 10.0, ..Default::default() });
        assert!(m.decision(&[1.0, 0.0]).abs() < 1e-12);
        assert!(m.decision(&x[0]) > 0.0 && m.decision(&x[1]) < 0.0);
        assert!(m.converged);
    }

    #[test]
    fn alpha_in_box() {
        let x: Vec<Vec<f64>> = (0..40).map(|i| vec![(i as f64 * 0.37).sin(), (i as f64 * 0.11).cos()]).collect();
        let y: Vec<f64> = (0..40).map(|i| if (i * 7) % 3 == 0 { 1.0 } else { -1.0 }).collect();
        let sol = smo(&x, &y, 1.0, 2.0, 1e-3, 100_000);
        assert!(sol.converged);
        assert!(sol.alpha.iter().all(|&a| (0.0..=2.0).contains(&a)));
        let balance: f64 = sol.alpha.iter().zip(&y).map(|(a, y)| a * y).sum();
        assert!(balance.abs() < 1e-9);
    }

    #[test]
    fn multiclass_vote() {
        let mut x = Vec::new();
        let mut labels = Vec::new();
        for (k, centre) in [(1u8, -3.0), (3, 0.0), (5, 3.0)] {
            for i in 0..10 {
                x.push(vec![centre + i as f64 * 0.05]);
                labels.push(ClassLabel::Emotion(EmotionLabel::from_code(k).unwrap()));
            }
        }
        let d = TrainingData::new(x, &labels, vec![FeatureId::HrMean]).unwrap();
        let m = train_svm(&d, &SvmParams::default()).unwrap();
        assert_eq!(m.machines.len(), 3);
        for (r, &k) in d.x.iter().zip(&d.y) {
            assert_eq!(m.predict_index(r).unwrap(), k);
        }
    }

    #[test]
    fn not_converged_carries_model() {
        let x: Vec<Vec<f64>> = (0..30).map(|i| vec![(i as f64).sin()]).collect();
        let labels: Vec<ClassLabel> = (0..30)
            .map(|i| ClassLabel::Emotion(if i % 2 == 0 { EmotionLabel::Fear } else { EmotionLabel::AweRev }))
            .collect();
        let d = TrainingData::new(x, &labels, vec![FeatureId::HrMean]).unwrap();
        let p = SvmParams { max_iter: Some(1), ..Default::default() };
        match train_svm(&d, &p) {
            Err(LearnError::NotConverged(m)) => assert!(!m.converged()),
            other => panic!("expected NotConverged, got {other:?}"),
        }
    }

    #[test]
    fn bad_params() {
        let d = TrainingData::new(vec![vec![0.0]], &[ClassLabel::Emotion(EmotionLabel::Fear)], vec![FeatureId::HrMean]).unwrap();
        assert!(matches!(train_svm(&d, &SvmParams { gamma: 0.0, ..Default::default() }), Err(LearnError::Config(_))));
        assert!(matches!(train_svm(&d, &SvmParams { c: -1.0, ..Default::default() }), Err(LearnError::Config(_))));
    }
}
