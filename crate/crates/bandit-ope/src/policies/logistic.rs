//! Deterministic one-vs-all logistic regression.
//!
//! A small weighted L2-regularized binary logistic learner trained with
//! full-batch gradient descent: a fixed iteration count and the step size
//! `1/L`, where `L = λ + 0.25·(weighted mean squared feature norm, intercept
//! included)` bounds the curvature of the objective. Step `1/L` guarantees
//! the objective never increases, which training asserts in debug builds.
//! No line search, no stochastic sampling, no tolerance-based early exit:
//! training twice on the same inputs yields bit-identical weights.
//!
//! Multi-label data is reduced one-vs-all: class `a` is fit as a binary
//! problem with target `I(a ∈ labels)`. The per-class sigmoid outputs are
//! probabilities of label membership and are deliberately not normalized
//! across classes.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::Context;

/// Training hyperparameters. The defaults fit the evaluation tasks in this
/// crate; `iterations` is the main runtime knob.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearnerConfig {
    /// L2 regularization strength λ > 0.
    pub lambda: f64,
    /// Fixed number of full-batch gradient steps.
    pub iterations: usize,
    /// Diagnostic bound: gradient norm the trained model is expected to
    /// reach on well-conditioned problems. Not an early-exit tolerance.
    pub grad_tolerance: f64,
}

impl Default for LearnerConfig {
    fn default() -> Self {
        Self {
            lambda: 1.0,
            iterations: 500,
            grad_tolerance: 1e-6,
        }
    }
}

impl LearnerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda > 0.0) {
            return Err(Error::invalid_argument(format!(
                "lambda must be positive, got {}",
                self.lambda
            )));
        }
        if self.iterations == 0 {
            return Err(Error::invalid_argument("iterations must be at least 1"));
        }
        Ok(())
    }
}

/// A fully labeled (or deliberately negative-only) multi-label example with
/// an importance weight.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledExample {
    pub context: Context,
    pub labels: Vec<usize>,
    pub weight: f64,
}

impl LabeledExample {
    pub fn new(context: Context, labels: Vec<usize>, weight: f64) -> Result<Self> {
        if !(weight > 0.0) {
            return Err(Error::invalid_argument(format!(
                "example weight must be positive, got {weight}"
            )));
        }
        Ok(Self {
            context,
            labels,
            weight,
        })
    }

    pub fn has_label(&self, a: usize) -> bool {
        self.labels.contains(&a)
    }
}

/// One binary training case for a single class: borrowed context, target in
/// `[0, 1]`, positive weight.
#[derive(Debug, Clone, Copy)]
pub struct BinaryExample<'a> {
    pub context: &'a Context,
    pub target: f64,
    pub weight: f64,
}

// ── The trained model ───────────────────────────────────────────────────

/// Per-class linear scores with sigmoid outputs.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    /// Dense weight vector per class; index = feature id.
    weights: Vec<Vec<f64>>,
    biases: Vec<f64>,
    dim: usize,
    lambda: f64,
    iterations: usize,
    trained_on: usize,
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    k: usize,
    dim: usize,
    lambda: f64,
    iterations: usize,
    trained_on: usize,
    biases: Vec<f64>,
    /// Sparse id → weight maps, zeros omitted.
    weights: Vec<BTreeMap<u32, f64>>,
}

impl LinearModel {
    pub(crate) fn from_parts(
        weights: Vec<Vec<f64>>,
        biases: Vec<f64>,
        dim: usize,
        lambda: f64,
        iterations: usize,
        trained_on: usize,
    ) -> Self {
        assert_eq!(weights.len(), biases.len());
        Self {
            weights,
            biases,
            dim,
            lambda,
            iterations,
            trained_on,
        }
    }

    pub fn num_classes(&self) -> usize {
        self.biases.len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn trained_on(&self) -> usize {
        self.trained_on
    }

    /// Raw linear score `w_a·x + b_a`.
    pub fn score(&self, context: &Context, a: usize) -> f64 {
        context.dot(&self.weights[a]) + self.biases[a]
    }

    /// Dense weights and bias of one class.
    pub fn class_parameters(&self, a: usize) -> (&[f64], f64) {
        (&self.weights[a], self.biases[a])
    }

    /// Per-class membership probabilities `sigmoid(score)`, length K. Not
    /// normalized across classes.
    pub fn predict_proba(&self, context: &Context) -> Vec<f64> {
        (0..self.num_classes())
            .map(|a| sigmoid(self.score(context, a)))
            .collect()
    }

    /// Argmax class, ties broken toward the lowest index.
    pub fn best_action(&self, context: &Context) -> usize {
        let mut best = 0usize;
        let mut best_score = self.score(context, 0);
        for a in 1..self.num_classes() {
            let s = self.score(context, a);
            if s > best_score {
                best = a;
                best_score = s;
            }
        }
        best
    }

    pub fn to_json(&self) -> String {
        let file = ModelFile {
            k: self.num_classes(),
            dim: self.dim,
            lambda: self.lambda,
            iterations: self.iterations,
            trained_on: self.trained_on,
            biases: self.biases.clone(),
            weights: self
                .weights
                .iter()
                .map(|w| {
                    w.iter()
                        .enumerate()
                        .filter(|&(_, &v)| v != 0.0)
                        .map(|(i, &v)| (i as u32, v))
                        .collect()
                })
                .collect(),
        };
        serde_json::to_string(&file).expect("model serialization cannot fail")
    }

    pub fn from_json(json: &str) -> Result<Self> {
        let file: ModelFile = serde_json::from_str(json)?;
        if file.biases.len() != file.k || file.weights.len() != file.k {
            return Err(Error::invalid_argument(
                "model file class count mismatch".to_string(),
            ));
        }
        let weights = file
            .weights
            .into_iter()
            .map(|sparse| {
                let mut dense = vec![0.0; file.dim];
                for (id, v) in sparse {
                    if (id as usize) < file.dim {
                        dense[id as usize] = v;
                    }
                }
                dense
            })
            .collect();
        Ok(Self {
            weights,
            biases: file.biases,
            dim: file.dim,
            lambda: file.lambda,
            iterations: file.iterations,
            trained_on: file.trained_on,
        })
    }

    pub fn save_to(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json())?;
        Ok(())
    }

    pub fn load_from(path: &Path) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }
}

/// Numerically stable logistic function.
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

// ── Training ────────────────────────────────────────────────────────────

/// Stable weighted cross-entropy `−y·ln σ(z) − (1−y)·ln(1−σ(z))`.
fn logistic_loss(z: f64, y: f64) -> f64 {
    z.max(0.0) - y * z + (-z.abs()).exp().ln_1p()
}

/// Objective `λ/2·‖w‖² + (1/S)·Σ s_i·ℓ(z_i, y_i)`. The bias is not
/// regularized.
fn objective(examples: &[BinaryExample<'_>], w: &[f64], b: f64, lambda: f64, total: f64) -> f64 {
    let reg = 0.5 * lambda * w.iter().map(|v| v * v).sum::<f64>();
    let data: f64 = examples
        .iter()
        .map(|e| e.weight * logistic_loss(e.context.dot(w) + b, e.target))
        .sum();
    reg + data / total
}

/// Gradient of [`objective`]; returns `(grad_w, grad_b)`.
fn gradient(
    examples: &[BinaryExample<'_>],
    w: &[f64],
    b: f64,
    lambda: f64,
    total: f64,
) -> (Vec<f64>, f64) {
    let mut gw: Vec<f64> = w.iter().map(|v| lambda * v).collect();
    let mut gb = 0.0;
    for e in examples {
        let z = e.context.dot(w) + b;
        let resid = e.weight * (sigmoid(z) - e.target) / total;
        for (id, v) in e.context.iter() {
            gw[id as usize] += resid * v;
        }
        gb += resid;
    }
    (gw, gb)
}

/// Fit one binary class. Returns `(weights, bias)`; all-zero for an empty
/// class dataset (sigmoid gives the uninformed 1/2 everywhere).
pub(crate) fn train_binary(
    examples: &[BinaryExample<'_>],
    dim: usize,
    config: &LearnerConfig,
) -> (Vec<f64>, f64) {
    let mut w = vec![0.0; dim];
    let mut b = 0.0;
    if examples.is_empty() {
        return (w, b);
    }
    let total: f64 = examples.iter().map(|e| e.weight).sum();
    // Curvature bound over the intercept-augmented features; step 1/L keeps
    // descent monotone.
    let msn: f64 = examples
        .iter()
        .map(|e| e.weight * (e.context.squared_norm() + 1.0))
        .sum::<f64>()
        / total;
    let lipschitz = config.lambda + 0.25 * msn;
    let step = 1.0 / lipschitz;

    #[cfg(debug_assertions)]
    let mut last_obj = objective(examples, &w, b, config.lambda, total);

    for _ in 0..config.iterations {
        let (gw, gb) = gradient(examples, &w, b, config.lambda, total);
        for (wi, gi) in w.iter_mut().zip(&gw) {
            *wi -= step * gi;
        }
        b -= step * gb;

        #[cfg(debug_assertions)]
        {
            let obj = objective(examples, &w, b, config.lambda, total);
            debug_assert!(
                obj <= last_obj + 1e-9,
                "objective increased: {last_obj} -> {obj}"
            );
            last_obj = obj;
        }
    }
    (w, b)
}

/// Multi-label one-vs-all training: class `a` is fit against the binary
/// target `I(a ∈ labels)` on all examples.
pub fn train_logistic_ova(
    examples: &[LabeledExample],
    k: usize,
    config: &LearnerConfig,
) -> Result<LinearModel> {
    if examples.is_empty() {
        return Err(Error::NoData);
    }
    config.validate()?;
    if k == 0 {
        return Err(Error::invalid_argument("need at least one class"));
    }
    if let Some(bad) = examples
        .iter()
        .flat_map(|e| e.labels.iter())
        .find(|&&l| l >= k)
    {
        return Err(Error::invalid_argument(format!(
            "label {bad} out of range for {k} classes"
        )));
    }
    let dim = dimension_of(examples.iter().map(|e| &e.context));
    let mut weights = Vec::with_capacity(k);
    let mut biases = Vec::with_capacity(k);
    for a in 0..k {
        let binary: Vec<BinaryExample<'_>> = examples
            .iter()
            .map(|e| BinaryExample {
                context: &e.context,
                target: if e.has_label(a) { 1.0 } else { 0.0 },
                weight: e.weight,
            })
            .collect();
        let (w, b) = train_binary(&binary, dim, config);
        weights.push(w);
        biases.push(b);
    }
    Ok(LinearModel::from_parts(
        weights,
        biases,
        dim,
        config.lambda,
        config.iterations,
        examples.len(),
    ))
}

/// One-vs-all training from per-class binary datasets (partially labeled
/// data: each case belongs to exactly one class's dataset).
pub fn train_logistic_partial(
    per_class: &[Vec<BinaryExample<'_>>],
    dim: usize,
    trained_on: usize,
    config: &LearnerConfig,
) -> Result<LinearModel> {
    config.validate()?;
    if per_class.is_empty() {
        return Err(Error::invalid_argument("need at least one class"));
    }
    let mut weights = Vec::with_capacity(per_class.len());
    let mut biases = Vec::with_capacity(per_class.len());
    for binary in per_class {
        let (w, b) = train_binary(binary, dim, config);
        weights.push(w);
        biases.push(b);
    }
    Ok(LinearModel::from_parts(
        weights,
        biases,
        dim,
        config.lambda,
        config.iterations,
        trained_on,
    ))
}

/// Dense dimension covering every feature id in `contexts`.
pub(crate) fn dimension_of<'a>(contexts: impl Iterator<Item = &'a Context>) -> usize {
    contexts
        .filter_map(|c| c.max_feature_id())
        .map(|id| id as usize + 1)
        .max()
        .unwrap_or(0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn example(features: &[f64], labels: &[usize]) -> LabeledExample {
        LabeledExample::new(Context::dense(features), labels.to_vec(), 1.0).unwrap()
    }

    #[test]
    fn separable_singletons() {
        let data = vec![example(&[1.0], &[0]), example(&[-1.0], &[1])];
        let config = LearnerConfig {
            lambda: 0.01,
            ..LearnerConfig::default()
        };
        let model = train_logistic_ova(&data, 2, &config).unwrap();
        assert_eq!(model.best_action(&data[0].context), 0);
        assert_eq!(model.best_action(&data[1].context), 1);
    }

    #[test]
    fn shared_label_is_confident() {
        let data = vec![
            example(&[1.0, 0.0], &[1]),
            example(&[0.0, 1.0], &[1]),
            example(&[0.5, 0.5], &[1]),
        ];
        let model = train_logistic_ova(&data, 3, &LearnerConfig::default()).unwrap();
        for e in &data {
            let proba = model.predict_proba(&e.context);
            assert!(proba[1] > 0.5, "expected confidence on the shared label");
            assert!(proba[0] < 0.5 && proba[2] < 0.5);
        }
    }

    #[test]
    fn training_is_bit_deterministic() {
        let data = vec![
            example(&[0.2, 1.0], &[0]),
            example(&[1.0, 0.1], &[1]),
            example(&[0.4, 0.4], &[0, 1]),
        ];
        let a = train_logistic_ova(&data, 2, &LearnerConfig::default()).unwrap();
        let b = train_logistic_ova(&data, 2, &LearnerConfig::default()).unwrap();
        assert_eq!(a.to_json(), b.to_json());
        for cls in 0..2 {
            assert_eq!(
                a.score(&data[0].context, cls).to_bits(),
                b.score(&data[0].context, cls).to_bits()
            );
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let contexts = [
            Context::dense(&[0.3, -0.2, 0.9]),
            Context::dense(&[1.0, 0.4, 0.0]),
            Context::dense(&[-0.5, 0.8, 0.2]),
            Context::dense(&[0.1, 0.1, 0.7]),
        ];
        let binary: Vec<BinaryExample<'_>> = contexts
            .iter()
            .enumerate()
            .map(|(i, c)| BinaryExample {
                context: c,
                target: (i % 2) as f64,
                weight: 1.0 + i as f64 * 0.5,
            })
            .collect();
        let total: f64 = binary.iter().map(|e| e.weight).sum();
        let lambda = 0.7;
        let w = vec![0.15, -0.3, 0.45];
        let b = 0.2;
        let (gw, gb) = gradient(&binary, &w, b, lambda, total);

        let h = 1e-6;
        for i in 0..3 {
            let mut wp = w.clone();
            let mut wm = w.clone();
            wp[i] += h;
            wm[i] -= h;
            let fd = (objective(&binary, &wp, b, lambda, total)
                - objective(&binary, &wm, b, lambda, total))
                / (2.0 * h);
            let rel = (gw[i] - fd).abs() / fd.abs().max(1e-8);
            assert!(rel < 1e-4, "coordinate {i}: analytic {} vs fd {fd}", gw[i]);
        }
        let fd_b = (objective(&binary, &w, b + h, lambda, total)
            - objective(&binary, &w, b - h, lambda, total))
            / (2.0 * h);
        assert!((gb - fd_b).abs() / fd_b.abs().max(1e-8) < 1e-4);

        // Checking both signs of the bias step exercises the loss branches.
        assert!(logistic_loss(30.0, 1.0) < 1e-12);
        assert!(logistic_loss(-30.0, 0.0) < 1e-12);
    }

    #[test]
    fn trained_gradient_is_small() {
        let data = vec![
            example(&[1.0, 0.2], &[0]),
            example(&[0.1, 1.0], &[1]),
            example(&[0.9, 0.3], &[0]),
            example(&[0.2, 0.8], &[1]),
        ];
        let config = LearnerConfig::default();
        let model = train_logistic_ova(&data, 2, &config).unwrap();
        let binary: Vec<BinaryExample<'_>> = data
            .iter()
            .map(|e| BinaryExample {
                context: &e.context,
                target: if e.has_label(0) { 1.0 } else { 0.0 },
                weight: 1.0,
            })
            .collect();
        let (w, b) = model.class_parameters(0);
        let (gw, gb) = gradient(&binary, w, b, config.lambda, 4.0);
        let norm = (gw.iter().map(|g| g * g).sum::<f64>() + gb * gb).sqrt();
        assert!(
            norm <= config.grad_tolerance,
            "gradient norm {norm} above declared tolerance"
        );
    }

    #[test]
    fn zero_model_predicts_half() {
        let model = LinearModel::from_parts(vec![vec![0.0; 3]; 4], vec![0.0; 4], 3, 1.0, 0, 0);
        let proba = model.predict_proba(&Context::dense(&[0.3, 0.1, 0.5]));
        assert_eq!(proba, vec![0.5; 4]);
    }

    #[test]
    fn saturated_score_is_near_one() {
        let model = LinearModel::from_parts(vec![vec![50.0], vec![0.0]], vec![0.0; 2], 1, 1.0, 0, 0);
        let proba = model.predict_proba(&Context::dense(&[1.0]));
        assert!(proba[0] > 0.999999);
        assert!((proba[1] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn proba_matches_manual_sigmoid() {
        let data = vec![example(&[0.4, 0.6], &[0]), example(&[0.9, 0.2], &[1])];
        let model = train_logistic_ova(&data, 2, &LearnerConfig::default()).unwrap();
        let x = Context::dense(&[0.3, 0.7]);
        let proba = model.predict_proba(&x);
        for a in 0..2 {
            let manual = sigmoid(model.score(&x, a));
            assert!((proba[a] - manual).abs() < 1e-12);
        }
    }

    #[test]
    fn json_round_trip_preserves_bits() {
        let data = vec![
            example(&[0.2, 0.0, 0.7], &[0]),
            example(&[0.0, 0.5, 0.1], &[2]),
            example(&[0.6, 0.3, 0.0], &[1]),
        ];
        let model = train_logistic_ova(&data, 3, &LearnerConfig::default()).unwrap();
        let back = LinearModel::from_json(&model.to_json()).unwrap();
        let x = Context::dense(&[0.1, 0.2, 0.3]);
        for a in 0..3 {
            assert_eq!(model.score(&x, a).to_bits(), back.score(&x, a).to_bits());
        }
        assert_eq!(back.trained_on(), 3);
        assert_eq!(back.num_classes(), 3);
    }

    #[test]
    fn empty_inputs_are_errors() {
        assert!(matches!(
            train_logistic_ova(&[], 2, &LearnerConfig::default()),
            Err(Error::NoData)
        ));
        let data = vec![example(&[1.0], &[5])];
        assert!(train_logistic_ova(&data, 2, &LearnerConfig::default()).is_err());
        assert!(LabeledExample::new(Context::dense(&[1.0]), vec![0], 0.0).is_err());
    }
}
