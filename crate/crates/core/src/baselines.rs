//! Two-stage references: majority voting and Dawid–Skene EM.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::DenseMatrix;
use crate::simulator::AnnotationSet;

/// Additive smoothing in the Dawid–Skene M-step.
pub const DS_SMOOTHING: f64 = 0.01;

/// Per-item class responsibilities (`K × N`).
#[derive(Clone, Debug, PartialEq)]
pub struct PosteriorLabels {
    pub q: DenseMatrix,
}

impl PosteriorLabels {
    pub fn num_classes(&self) -> usize {
        self.q.rows()
    }

    pub fn num_items(&self) -> usize {
        self.q.cols()
    }

    /// Argmax per item, ties to the smallest class index.
    pub fn hard_labels(&self) -> Vec<usize> {
        (0..self.q.cols()).map(|n| argmax_column(&self.q, n)).collect()
    }
}

pub(crate) fn argmax_column(m: &DenseMatrix, col: usize) -> usize {
    let mut best = 0;
    for k in 1..m.rows() {
        if m[(k, col)] > m[(best, col)] {
            best = k;
        }
    }
    best
}

pub fn majority_vote(annotations: &AnnotationSet, classes: usize) -> PosteriorLabels {
    let n = annotations.num_items();
    let mut q = DenseMatrix::zeros(classes, n);
    for item in 0..n {
        let votes = annotations.for_item(item);
        if votes.is_empty() {
            for k in 0..classes {
                q[(k, item)] = 1.0 / classes as f64;
            }
            continue;
        }
        for &(_, label) in votes {
            q[(label, item)] += 1.0;
        }
        let total = votes.len() as f64;
        for k in 0..classes {
            q[(k, item)] /= total;
        }
    }
    PosteriorLabels { q }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmOptions {
    pub max_iters: usize,
    pub tol: f64,
    pub smoothing: f64,
}

impl Default for EmOptions {
    fn default() -> Self {
        EmOptions {
            max_iters: 200,
            tol: 1e-6,
            smoothing: DS_SMOOTHING,
        }
    }
}

#[derive(Clone, Debug)]
pub struct DawidSkeneFit {
    /// `Â_m(k, k′) = Pr(ŷ = k | y = k′)`.
    pub confusions: Vec<DenseMatrix>,
    pub posteriors: PosteriorLabels,
    pub priors: Vec<f64>,
    /// Smoothed log-likelihood `Σ_n log Σ_k π_k Π_m A_m(ŷ, k) + s·Σ log A` after every M-step.
    pub objective_trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

fn m_step(
    annotations: &AnnotationSet,
    q: &DenseMatrix,
    k: usize,
    m: usize,
    s: f64,
) -> (Vec<DenseMatrix>, Vec<f64>) {
    let mut counts = vec![DenseMatrix::filled(k, k, s); m];
    for a in annotations.triples() {
        for kp in 0..k {
            counts[a.annotator][(a.label, kp)] += q[(kp, a.item)];
        }
    }
    for c in counts.iter_mut() {
        // Column total equals Σ_n q_n(k′)·𝕀[m ∈ S_n] + sK.
        let sums = c.column_sums();
        for kp in 0..k {
            for r in 0..k {
                c[(r, kp)] /= sums[kp];
            }
        }
    }
    let mut priors = vec![0.0; k];
    let mut annotated = 0usize;
    for n in 0..q.cols() {
        if annotations.for_item(n).is_empty() {
            continue;
        }
        annotated += 1;
        for (kk, p) in priors.iter_mut().enumerate() {
            *p += q[(kk, n)];
        }
    }
    priors.iter_mut().for_each(|p| *p /= annotated as f64);
    (counts, priors)
}

/// Per-item log joint `log π_k + Σ_m log A_m(ŷ, k)`.
fn log_joint(annotations: &AnnotationSet, confusions: &[DenseMatrix], log_priors: &[f64], item: usize) -> Vec<f64> {
    let mut lj = log_priors.to_vec();
    for &(m, label) in annotations.for_item(item) {
        for (kk, v) in lj.iter_mut().enumerate() {
            *v += confusions[m][(label, kk)].ln();
        }
    }
    lj
}

fn log_sum_exp(v: &[f64]) -> f64 {
    let max = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + v.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

fn objective(annotations: &AnnotationSet, confusions: &[DenseMatrix], priors: &[f64], s: f64) -> f64 {
    let log_priors: Vec<f64> = priors.iter().map(|p| p.ln()).collect();
    let ll: f64 = (0..annotations.num_items())
        .filter(|&n| !annotations.for_item(n).is_empty())
        .map(|n| log_sum_exp(&log_joint(annotations, confusions, &log_priors, n)))
        .sum();
    let penalty: f64 = confusions
        .iter()
        .flat_map(|a| a.as_slice().iter())
        .map(|v| v.ln())
        .sum();
    ll + s * penalty
}

/// Dawid–Skene EM initialized from majority vote.
pub fn dawid_skene_em(
    annotations: &AnnotationSet,
    classes: usize,
    annotators: usize,
    options: &EmOptions,
) -> Result<DawidSkeneFit> {
    if annotations.is_empty() {
        return Err(Error::EmptyAnnotations);
    }
    if annotations.num_classes() != classes || annotations.num_annotators() != annotators {
        return Err(Error::ShapeMismatch {
            context: "dawid_skene_em",
            expected: format!("K={classes}, M={annotators}"),
            actual: format!(
                "K={}, M={}",
                annotations.num_classes(),
                annotations.num_annotators()
            ),
        });
    }
    let s = options.smoothing;
    let n = annotations.num_items();
    let mut q = majority_vote(annotations, classes).q;
    let (mut confusions, mut priors) = m_step(annotations, &q, classes, annotators, s);
    let mut trace = vec![objective(annotations, &confusions, &priors, s)];
    let mut converged = false;
    let mut iterations = 0;

    while iterations < options.max_iters {
        iterations += 1;
        let log_priors: Vec<f64> = priors.iter().map(|p| p.max(f64::MIN_POSITIVE).ln()).collect();
        let mut next = DenseMatrix::zeros(classes, n);
        for item in 0..n {
            let lj = log_joint(annotations, &confusions, &log_priors, item);
            let lse = log_sum_exp(&lj);
            for kk in 0..classes {
                next[(kk, item)] = (lj[kk] - lse).exp();
            }
        }
        let delta = next.max_abs_diff(&q);
        q = next;
        let (c, p) = m_step(annotations, &q, classes, annotators, s);
        confusions = c;
        priors = p;
        trace.push(objective(annotations, &confusions, &priors, s));
        if delta < options.tol {
            converged = true;
            break;
        }
    }

    Ok(DawidSkeneFit {
        confusions,
        posteriors: PosteriorLabels { q },
        priors,
        objective_trace: trace,
        iterations,
        converged,
    })
}
