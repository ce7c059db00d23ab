//! Identifiability lab: permutation alignment, the sufficiently-scattered
//! membership test, and evaluation metrics.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::argmax_column;
use crate::error::{invalid, Error, Result};
use crate::model::{crowd_forward, CrowdModel};
use crate::numerics::{assignment_cost, hungarian, nnls, DenseMatrix, Rng, PROB_FLOOR};
use crate::simulator::{AnnotationSet, Dataset, Split};

pub const DEFAULT_SSC_SAMPLES: usize = 1000;
pub const DEFAULT_SSC_TOL: f64 = 1e-6;

/// A global class correspondence: `permutation[j] = k` pairs estimated class
/// `j` with true class `k`, i.e. `Â_m(:, j) ≈ A♮_m(:, k)` and `f̂_j ≈ f♮_k`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlignmentResult {
    pub permutation: Vec<usize>,
    /// `‖Â_m − A♮_m Π‖_F` per annotator.
    pub confusion_errors: Vec<f64>,
    /// `Σ_m ‖Â_m − A♮_m Π‖²_F`.
    pub objective: f64,
}

impl AlignmentResult {
    /// `(1/(MK²))·Σ_m ‖Â_m − A♮_m Π‖²_F`.
    pub fn confusion_mse(&self) -> f64 {
        let k = self.permutation.len();
        let m = self.confusion_errors.len();
        self.objective / (m * k * k) as f64
    }
}

fn check_pairs(estimated: &[DenseMatrix], truth: &[DenseMatrix]) -> Result<usize> {
    if estimated.is_empty() || estimated.len() != truth.len() {
        return Err(Error::ShapeMismatch {
            context: "align_permutation",
            expected: format!("{} confusion matrices", truth.len()),
            actual: format!("{}", estimated.len()),
        });
    }
    let k = truth[0].rows();
    for (e, t) in estimated.iter().zip(truth) {
        if e.shape() != (k, k) || t.shape() != (k, k) {
            return Err(Error::ShapeMismatch {
                context: "align_permutation",
                expected: format!("{k}x{k}"),
                actual: format!("{:?} vs {:?}", e.shape(), t.shape()),
            });
        }
    }
    Ok(k)
}

/// `cost(j, k) = Σ_m ‖Â_m(:, j) − A♮_m(:, k)‖²`.
pub fn alignment_cost(estimated: &[DenseMatrix], truth: &[DenseMatrix]) -> Result<DenseMatrix> {
    let k = check_pairs(estimated, truth)?;
    let mut cost = DenseMatrix::zeros(k, k);
    for (e, t) in estimated.iter().zip(truth) {
        for j in 0..k {
            for kk in 0..k {
                cost[(j, kk)] += (0..k).map(|r| (e[(r, j)] - t[(r, kk)]).powi(2)).sum::<f64>();
            }
        }
    }
    Ok(cost)
}

/// Errors of `estimated` against `truth` under a fixed correspondence.
pub fn alignment_with(estimated: &[DenseMatrix], truth: &[DenseMatrix], permutation: &[usize]) -> Result<AlignmentResult> {
    let k = check_pairs(estimated, truth)?;
    if permutation.len() != k {
        return Err(invalid("permutation length differs from K"));
    }
    let confusion_errors: Vec<f64> = estimated
        .iter()
        .zip(truth)
        .map(|(e, t)| {
            (0..k)
                .flat_map(|j| (0..k).map(move |r| (r, j)))
                .map(|(r, j)| (e[(r, j)] - t[(r, permutation[j])]).powi(2))
                .sum::<f64>()
                .sqrt()
        })
        .collect();
    Ok(AlignmentResult {
        permutation: permutation.to_vec(),
        objective: confusion_errors.iter().map(|e| e * e).sum(),
        confusion_errors,
    })
}

/// Single global permutation minimizing `Σ_m ‖Â_m − A♮_m Π‖²_F`.
pub fn align_permutation(estimated: &[DenseMatrix], truth: &[DenseMatrix]) -> Result<AlignmentResult> {
    let cost = alignment_cost(estimated, truth)?;
    let permutation = hungarian(&cost)?;
    debug_assert!(assignment_cost(&cost, &permutation).is_finite());
    alignment_with(estimated, truth, &permutation)
}

/// `(1/N)·Σ_n ‖f̂(x_n) − Πᵀ f♮(x_n)‖²` over the columns.
pub fn predictor_error(estimated: &DenseMatrix, truth: &DenseMatrix, permutation: &[usize]) -> Result<f64> {
    if estimated.shape() != truth.shape() || permutation.len() != truth.rows() {
        return Err(Error::ShapeMismatch {
            context: "predictor_error",
            expected: format!("{:?}", truth.shape()),
            actual: format!("{:?}", estimated.shape()),
        });
    }
    let (k, n) = truth.shape();
    if n == 0 {
        return Err(invalid("predictor_error: no items"));
    }
    let total: f64 = (0..n)
        .map(|c| {
            (0..k)
                .map(|j| (estimated[(j, c)] - truth[(permutation[j], c)]).powi(2))
                .sum::<f64>()
        })
        .sum();
    Ok(total / n as f64)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SscVerdict {
    pub samples: usize,
    pub failures: usize,
    pub max_residual: f64,
    pub tolerance: f64,
    pub verdict: Verdict,
    /// Only the cone-containment condition is tested.
    pub scope: String,
}

/// Unit `x` on the boundary of `{x : 𝟙ᵀx ≥ √(K−1)·‖x‖}`.
fn boundary_direction(k: usize, rng: &mut Rng) -> Vec<f64> {
    loop {
        let g: Vec<f64> = (0..k).map(|_| rng.normal()).collect();
        let mean = g.iter().sum::<f64>() / k as f64;
        let v: Vec<f64> = g.iter().map(|x| x - mean).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm < 1e-12 {
            continue;
        }
        let a = ((k - 1) as f64).sqrt() / k as f64;
        let b = 1.0 / (k as f64).sqrt();
        return v.iter().map(|vi| a + b * vi / norm).collect();
    }
}

/// Monte-Carlo test of `𝒞 ⊆ cone(Zᵀ)` on `samples` boundary directions of the
/// second-order cone `𝒞`. A single uncovered direction proves a violation; an
/// all-pass result is evidence only.
pub fn ssc_check(z: &DenseMatrix, samples: usize, tol: f64, seed: u64) -> Result<SscVerdict> {
    let (l, k) = z.shape();
    if l == 0 || k < 2 {
        return Err(invalid("ssc_check needs at least one row and K >= 2"));
    }
    if samples == 0 {
        return Err(invalid("ssc_check needs at least one sample"));
    }
    if let Some(v) = z.as_slice().iter().find(|&&v| !(v >= -1e-12)) {
        return Err(invalid(format!("ssc_check: matrix has a negative entry {v:e}")));
    }
    // Canonical column order makes the verdict independent of class labeling.
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| {
        (0..l)
            .map(|r| z[(r, a)].total_cmp(&z[(r, b)]))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let zt = DenseMatrix::from_fn(k, l, |c, r| z[(r, order[c])]);
    let mut rng = Rng::new(seed).derive(0x55C);
    let directions: Vec<Vec<f64>> = (0..samples).map(|_| boundary_direction(k, &mut rng)).collect();
    let residuals = directions
        .par_iter()
        .map(|x| nnls(&zt, x).map(|s| s.residual_norm))
        .collect::<Result<Vec<f64>>>()?;
    let failures = residuals.iter().filter(|&&r| r > tol).count();
    Ok(SscVerdict {
        samples,
        failures,
        max_residual: residuals.iter().cloned().fold(0.0, f64::max),
        tolerance: tol,
        verdict: if failures > 0 { Verdict::Fail } else { Verdict::Pass },
        scope: "condition (i) only".into(),
    })
}

/// Flat metrics record; absent ground truth leaves the corresponding fields empty.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub test_accuracy: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub aligned_test_accuracy: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub confusion_mse: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub predictor_error: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mean_kl: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bayes_accuracy: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub label_accuracy: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub permutation: Option<Vec<usize>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub test_items: Option<usize>,
}

fn accuracy(probs: &DenseMatrix, labels: &[usize], relabel: impl Fn(usize) -> usize) -> f64 {
    let hits = (0..probs.cols())
        .filter(|&c| relabel(argmax_column(probs, c)) == labels[c])
        .count();
    hits as f64 / probs.cols().max(1) as f64
}

/// Metrics for classifier outputs `f̂` on a set of items.
///
/// `estimated`/`truth` confusions determine the global permutation; without
/// them aligned metrics use the identity correspondence.
pub fn evaluate_predictions(
    predicted: &DenseMatrix,
    labels: &[usize],
    true_posteriors: Option<&DenseMatrix>,
    estimated: Option<&[DenseMatrix]>,
    truth: Option<&[DenseMatrix]>,
) -> Result<Metrics> {
    if predicted.cols() == 0 {
        return Err(invalid("evaluation needs a non-empty test split"));
    }
    if labels.len() != predicted.cols() {
        return Err(Error::ShapeMismatch {
            context: "evaluate",
            expected: format!("{} labels", predicted.cols()),
            actual: format!("{}", labels.len()),
        });
    }
    let k = predicted.rows();
    let mut metrics = Metrics {
        test_accuracy: Some(accuracy(predicted, labels, |j| j)),
        test_items: Some(labels.len()),
        ..Metrics::default()
    };
    let alignment = match (estimated, truth) {
        (Some(e), Some(t)) if e.len() == t.len() => Some(align_permutation(e, t)?),
        _ => None,
    };
    let permutation = alignment
        .as_ref()
        .map(|a| a.permutation.clone())
        .unwrap_or_else(|| (0..k).collect());
    if let Some(a) = &alignment {
        metrics.confusion_mse = Some(a.confusion_mse());
        metrics.aligned_test_accuracy = Some(accuracy(predicted, labels, |j| permutation[j]));
        metrics.permutation = Some(permutation.clone());
    }
    if let Some(f) = true_posteriors {
        metrics.predictor_error = Some(predictor_error(predicted, f, &permutation)?);
        metrics.bayes_accuracy = Some(accuracy(f, labels, |j| j));
    }
    Ok(metrics)
}

/// Test-split metrics of a trained model, plus `KL(p♮‖p̂)` on the observed pairs
/// when annotations and true confusions are supplied.
pub fn evaluate(
    model: &CrowdModel,
    dataset: &Dataset,
    true_confusions: Option<&[DenseMatrix]>,
    annotations: Option<&AnnotationSet>,
) -> Result<Metrics> {
    let test = dataset.indices(Split::Test);
    if test.is_empty() {
        return Err(invalid("evaluation needs a non-empty test split"));
    }
    let predicted = model.predict(&dataset.features_of(&test))?;
    let labels: Vec<usize> = test.iter().map(|&n| dataset.labels[n]).collect();
    let posteriors = dataset.soft_labels.as_ref().map(|f| f.select_columns(&test));
    let estimated = true_confusions
        .filter(|t| t.len() == model.num_annotators())
        .map(|_| model.confusions());
    let mut metrics = evaluate_predictions(&predicted, &labels, posteriors.as_ref(), estimated, true_confusions)?;
    if let (Some(t), Some(ann), Some(_)) = (true_confusions, annotations, dataset.soft_labels.as_ref()) {
        if t.len() == model.num_annotators() && !ann.is_empty() {
            metrics.mean_kl = Some(observed_kl(model, dataset, t, ann)?);
        }
    }
    Ok(metrics)
}

/// Mean `KL(A♮_m f♮(x_n) ‖ Â_m f̂(x_n))` over observed `(n, m)` pairs.
pub fn observed_kl(model: &CrowdModel, dataset: &Dataset, truth: &[DenseMatrix], annotations: &AnnotationSet) -> Result<f64> {
    let items: Vec<usize> = (0..annotations.num_items())
        .filter(|&n| !annotations.for_item(n).is_empty())
        .collect();
    let mut pairs = Vec::with_capacity(annotations.len());
    for (col, &n) in items.iter().enumerate() {
        pairs.extend(annotations.for_item(n).iter().map(|&(m, _)| (col, m)));
    }
    let fwd = crowd_forward(model, &dataset.features_of(&items), &pairs)?;
    let mut total = 0.0;
    for (t, &(col, m)) in pairs.iter().enumerate() {
        let target = truth[m].matvec(&dataset.posterior(items[col]))?;
        for (r, &p) in target.iter().enumerate() {
            if p > 0.0 {
                total += p * (p / fwd.probs[(r, t)].max(PROB_FLOOR)).ln();
            }
        }
    }
    Ok((total / pairs.len() as f64).max(0.0))
}

/// Accuracy of integrated labels against the truth on the given items.
pub fn label_accuracy(hard: &[usize], truth: &[usize], items: &[usize]) -> f64 {
    if items.is_empty() {
        return 0.0;
    }
    items.iter().filter(|&&n| hard[n] == truth[n]).count() as f64 / items.len() as f64
}
