//! Synthetic worlds: Gaussian-mixture data with analytic posteriors, annotator
//! confusion ensembles, and incomplete noisy annotations.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::numerics::{DenseMatrix, Rng};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }

    pub fn parse(s: &str) -> Option<Split> {
        match s {
            "train" => Some(Split::Train),
            "val" => Some(Split::Val),
            "test" => Some(Split::Test),
            _ => None,
        }
    }
}

/// Parameters of the Gaussian-mixture generator.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MixtureSpec {
    pub classes: usize,
    pub dim: usize,
    pub n_train: usize,
    #[serde(default)]
    pub n_val: usize,
    #[serde(default)]
    pub n_test: usize,
    pub separation: f64,
    /// Mixture weights; uniform when absent.
    #[serde(default)]
    pub weights: Option<Vec<f64>>,
    #[serde(default = "default_std")]
    pub std_dev: f64,
    pub seed: u64,
}

fn default_std() -> f64 {
    1.0
}

impl MixtureSpec {
    pub fn total_items(&self) -> usize {
        self.n_train + self.n_val + self.n_test
    }

    pub fn mixture_weights(&self) -> Vec<f64> {
        match &self.weights {
            Some(w) => {
                let s: f64 = w.iter().sum();
                w.iter().map(|v| v / s).collect()
            }
            None => vec![1.0 / self.classes as f64; self.classes],
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    /// `D × N`, one column per item.
    pub features: DenseMatrix,
    pub labels: Vec<usize>,
    /// Bayes posteriors `F♮` (`K × N`) when known.
    pub soft_labels: Option<DenseMatrix>,
    pub splits: Vec<Split>,
    pub num_classes: usize,
    /// Generator that produced the data, when synthetic.
    pub generator: Option<MixtureSpec>,
}

impl Dataset {
    pub fn new(
        features: DenseMatrix,
        labels: Vec<usize>,
        soft_labels: Option<DenseMatrix>,
        splits: Vec<Split>,
        num_classes: usize,
    ) -> Result<Self> {
        let n = features.cols();
        if labels.len() != n || splits.len() != n {
            return Err(Error::ShapeMismatch {
                context: "Dataset::new",
                expected: format!("{n} labels and splits"),
                actual: format!("{} labels, {} splits", labels.len(), splits.len()),
            });
        }
        if num_classes < 2 {
            return Err(invalid("dataset needs at least two classes"));
        }
        if let Some(&bad) = labels.iter().find(|&&y| y >= num_classes) {
            return Err(Error::IndexOutOfRange {
                what: "label",
                index: bad,
                limit: num_classes,
            });
        }
        if let Some(f) = &soft_labels {
            if f.shape() != (num_classes, n) {
                return Err(Error::ShapeMismatch {
                    context: "Dataset::new (soft labels)",
                    expected: format!("{num_classes}x{n}"),
                    actual: format!("{:?}", f.shape()),
                });
            }
        }
        if !features.is_finite() {
            return Err(invalid("dataset features must be finite"));
        }
        Ok(Dataset {
            features,
            labels,
            soft_labels,
            splits,
            num_classes,
            generator: None,
        })
    }

    pub fn num_items(&self) -> usize {
        self.labels.len()
    }

    pub fn dim(&self) -> usize {
        self.features.rows()
    }

    pub fn indices(&self, split: Split) -> Vec<usize> {
        (0..self.num_items()).filter(|&i| self.splits[i] == split).collect()
    }

    pub fn features_of(&self, items: &[usize]) -> DenseMatrix {
        self.features.select_columns(items)
    }

    /// `F♮` column `n`, or the one-hot true label when posteriors are unknown.
    pub fn posterior(&self, n: usize) -> Vec<f64> {
        match &self.soft_labels {
            Some(f) => f.column(n),
            None => (0..self.num_classes)
                .map(|k| if k == self.labels[n] { 1.0 } else { 0.0 })
                .collect(),
        }
    }
}

/// Orthonormalizes `vectors` in place (modified Gram–Schmidt); returns false on rank loss.
fn gram_schmidt(vectors: &mut [Vec<f64>]) -> bool {
    for i in 0..vectors.len() {
        for j in 0..i {
            let dot: f64 = vectors[i].iter().zip(&vectors[j]).map(|(a, b)| a * b).sum();
            let (head, tail) = vectors.split_at_mut(i);
            for (x, y) in tail[0].iter_mut().zip(&head[j]) {
                *x -= dot * y;
            }
        }
        let norm = vectors[i].iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm < 1e-10 {
            return false;
        }
        vectors[i].iter_mut().for_each(|x| *x /= norm);
    }
    true
}

/// Unit-norm class mean directions.
///
/// When `K ≤ D + 1` these are the vertices of a regular simplex under a random
/// isometry, so every pair of classes is equally far apart; otherwise they are
/// independent uniform directions.
fn mean_directions(k: usize, d: usize, rng: &mut Rng) -> Vec<Vec<f64>> {
    let random_unit = |rng: &mut Rng| loop {
        let v: Vec<f64> = (0..d).map(|_| rng.normal()).collect();
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 1e-8 {
            return v.into_iter().map(|x| x / n).collect::<Vec<_>>();
        }
    };
    if k > d + 1 {
        return (0..k).map(|_| random_unit(rng)).collect();
    }
    // Regular simplex in the hyperplane 1ᵀx = 0 of R^K, expressed in an
    // orthonormal basis of that hyperplane (K−1 coordinates).
    let mut basis: Vec<Vec<f64>> = (0..k - 1)
        .map(|i| {
            let mut v = vec![0.0; k];
            v[i] = 1.0;
            v[k - 1] = -1.0;
            v
        })
        .collect();
    gram_schmidt(&mut basis);
    let vertex_coords: Vec<Vec<f64>> = (0..k)
        .map(|j| {
            let centered: Vec<f64> = (0..k)
                .map(|i| if i == j { 1.0 } else { 0.0 } - 1.0 / k as f64)
                .collect();
            let c: Vec<f64> = basis
                .iter()
                .map(|b| b.iter().zip(&centered).map(|(x, y)| x * y).sum())
                .collect();
            let n = c.iter().map(|x| x * x).sum::<f64>().sqrt();
            c.into_iter().map(|x| x / n).collect()
        })
        .collect();
    // Random isometric embedding of R^{K−1} into R^D.
    let embed = loop {
        let mut cols: Vec<Vec<f64>> = (0..k - 1)
            .map(|_| (0..d).map(|_| rng.normal()).collect())
            .collect();
        if gram_schmidt(&mut cols) {
            break cols;
        }
    };
    vertex_coords
        .iter()
        .map(|c| {
            (0..d)
                .map(|r| c.iter().zip(&embed).map(|(ci, col)| ci * col[r]).sum())
                .collect()
        })
        .collect()
}

/// Samples a labeled Gaussian mixture and its exact Bayes posteriors.
pub fn gen_mixture_dataset(spec: &MixtureSpec) -> Result<Dataset> {
    let (k, d) = (spec.classes, spec.dim);
    let n = spec.total_items();
    if k < 2 || d < 1 {
        return Err(invalid("mixture needs K >= 2 and D >= 1"));
    }
    if spec.n_train < k {
        return Err(invalid("mixture needs at least K training items"));
    }
    if !(spec.std_dev > 0.0) || !spec.std_dev.is_finite() {
        return Err(invalid("degenerate covariance: std_dev must be positive and finite"));
    }
    if !(spec.separation >= 0.0) || !spec.separation.is_finite() {
        return Err(invalid("separation must be finite and >= 0"));
    }
    if let Some(w) = &spec.weights {
        if w.len() != k || w.iter().any(|&v| !(v >= 0.0)) || w.iter().sum::<f64>() <= 0.0 {
            return Err(invalid("mixture weights must be K non-negative numbers with positive sum"));
        }
    }
    let weights = spec.mixture_weights();
    let root = Rng::new(spec.seed);
    let means: Vec<Vec<f64>> = mean_directions(k, d, &mut root.derive(1))
        .into_iter()
        .map(|u| u.into_iter().map(|v| v * spec.separation).collect())
        .collect();

    let mut rng = root.derive(2);
    let mut features = DenseMatrix::zeros(d, n);
    let mut labels = Vec::with_capacity(n);
    for col in 0..n {
        let y = rng.categorical(&weights);
        for r in 0..d {
            features[(r, col)] = means[y][r] + spec.std_dev * rng.normal();
        }
        labels.push(y);
    }

    let log_w: Vec<f64> = weights.iter().map(|w| w.ln()).collect();
    let var = spec.std_dev * spec.std_dev;
    let mut soft = DenseMatrix::zeros(k, n);
    for col in 0..n {
        let scores: Vec<f64> = (0..k)
            .map(|j| {
                let sq: f64 = (0..d).map(|r| (features[(r, col)] - means[j][r]).powi(2)).sum();
                log_w[j] - 0.5 * sq / var
            })
            .collect();
        let max = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let total: f64 = scores.iter().map(|s| (s - max).exp()).sum();
        for j in 0..k {
            soft[(j, col)] = (scores[j] - max).exp() / total;
        }
    }

    let splits = (0..n)
        .map(|i| {
            if i < spec.n_train {
                Split::Train
            } else if i < spec.n_train + spec.n_val {
                Split::Val
            } else {
                Split::Test
            }
        })
        .collect();
    let mut ds = Dataset::new(features, labels, Some(soft), splits, k)?;
    ds.generator = Some(spec.clone());
    Ok(ds)
}

/// Recipe for an annotator population.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ConfusionSpec {
    /// `hammers` annotators get `normalize(I + γ·U(0,1)^{K×K})`, the rest answer uniformly.
    HammerSpammer { gamma: f64, hammers: usize },
    /// One class specialist per class with row distance at most `xi`; the
    /// remaining annotators have `Dir(others_alpha)` columns plus `others_boost` on the diagonal.
    Specialist {
        xi: f64,
        #[serde(default = "default_alpha")]
        others_alpha: f64,
        #[serde(default)]
        others_boost: f64,
    },
    /// Every column `Dir(α) + boost·e_j`, renormalized.
    Dirichlet {
        alpha: f64,
        #[serde(default)]
        diagonal_boost: f64,
    },
}

fn default_alpha() -> f64 {
    1.0
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", content = "class", rename_all = "snake_case")]
pub enum Provenance {
    Hammer,
    Spammer,
    Specialist(usize),
    Dirichlet,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConfusionEnsemble {
    pub matrices: Vec<DenseMatrix>,
    pub provenance: Vec<Provenance>,
}

impl ConfusionEnsemble {
    pub fn new(matrices: Vec<DenseMatrix>, provenance: Vec<Provenance>) -> Result<Self> {
        if matrices.is_empty() || matrices.len() != provenance.len() {
            return Err(invalid("ensemble needs one provenance tag per (at least one) matrix"));
        }
        let k = matrices[0].rows();
        for (m, a) in matrices.iter().enumerate() {
            if a.shape() != (k, k) {
                return Err(invalid(format!("confusion {m} is not {k}x{k}")));
            }
            if a.as_slice().iter().any(|&v| !(v >= 0.0)) {
                return Err(invalid(format!("confusion {m} has negative or NaN entries")));
            }
            if a.column_sums().iter().any(|s| (s - 1.0).abs() > 1e-9) {
                return Err(invalid(format!("confusion {m} is not column-stochastic")));
            }
        }
        Ok(ConfusionEnsemble {
            matrices,
            provenance,
        })
    }

    pub fn num_annotators(&self) -> usize {
        self.matrices.len()
    }

    pub fn num_classes(&self) -> usize {
        self.matrices[0].rows()
    }

    /// `W = [A_1; …; A_M]` (`MK × K`).
    pub fn stacked(&self) -> DenseMatrix {
        DenseMatrix::vstack(&self.matrices).expect("validated square blocks")
    }
}

fn normalize_columns(a: &mut DenseMatrix) {
    for (c, s) in a.column_sums().into_iter().enumerate() {
        for r in 0..a.rows() {
            a[(r, c)] /= s;
        }
    }
}

fn dirichlet_confusion(k: usize, alpha: f64, boost: f64, rng: &mut Rng) -> DenseMatrix {
    let mut a = DenseMatrix::zeros(k, k);
    for c in 0..k {
        let col = rng.dirichlet(&vec![alpha; k]);
        for r in 0..k {
            a[(r, c)] = col[r] + if r == c { boost } else { 0.0 };
        }
    }
    normalize_columns(&mut a);
    a
}

/// Class-`class` specialist: column `class` is `(1−ξ/2)e_k + (ξ/2)u`, and no
/// other column ever emits `class`, so row `class` is `A(k,k)·e_kᵀ`.
fn specialist_confusion(k: usize, class: usize, xi: f64, rng: &mut Rng) -> DenseMatrix {
    let mut a = DenseMatrix::zeros(k, k);
    let u = rng.dirichlet(&vec![1.0; k]);
    for r in 0..k {
        a[(r, class)] = 0.5 * xi * u[r] + if r == class { 1.0 - 0.5 * xi } else { 0.0 };
    }
    for c in (0..k).filter(|&c| c != class) {
        let rest = rng.dirichlet(&vec![1.0; k - 1]);
        for (r, v) in (0..k).filter(|&r| r != class).zip(rest) {
            a[(r, c)] = v;
        }
    }
    a
}

pub fn gen_confusions(spec: &ConfusionSpec, classes: usize, annotators: usize, seed: u64) -> Result<ConfusionEnsemble> {
    if classes < 2 || annotators < 1 {
        return Err(invalid("confusion ensemble needs K >= 2 and M >= 1"));
    }
    let k = classes;
    let mut rng = Rng::new(seed).derive(3);
    let spammer = DenseMatrix::filled(k, k, 1.0 / k as f64);
    let (matrices, provenance) = match *spec {
        ConfusionSpec::HammerSpammer { gamma, hammers } => {
            if hammers > annotators {
                return Err(invalid(format!(
                    "hammer count {hammers} exceeds annotator count {annotators}"
                )));
            }
            if !(gamma >= 0.0) || !gamma.is_finite() {
                return Err(invalid("gamma must be finite and >= 0"));
            }
            let mut order: Vec<usize> = (0..annotators).collect();
            rng.shuffle(&mut order);
            let hammer_set: HashSet<usize> = order[..hammers].iter().copied().collect();
            (0..annotators)
                .map(|m| {
                    if hammer_set.contains(&m) {
                        let mut a = DenseMatrix::from_fn(k, k, |r, c| {
                            gamma * rng.uniform() + if r == c { 1.0 } else { 0.0 }
                        });
                        normalize_columns(&mut a);
                        (a, Provenance::Hammer)
                    } else {
                        (spammer.clone(), Provenance::Spammer)
                    }
                })
                .unzip()
        }
        ConfusionSpec::Specialist {
            xi,
            others_alpha,
            others_boost,
        } => {
            if !(0.0..1.0).contains(&xi) {
                return Err(invalid(format!("specialist xi must lie in [0, 1), got {xi}")));
            }
            if annotators < k {
                return Err(invalid("specialist ensemble needs at least K annotators"));
            }
            if !(others_alpha > 0.0) || !(others_boost >= 0.0) {
                return Err(invalid("specialist ensemble needs others_alpha > 0 and others_boost >= 0"));
            }
            let mut order: Vec<usize> = (0..annotators).collect();
            rng.shuffle(&mut order);
            let mut class_of = vec![None; annotators];
            for (class, &m) in order[..k].iter().enumerate() {
                class_of[m] = Some(class);
            }
            (0..annotators)
                .map(|m| match class_of[m] {
                    Some(class) => (
                        specialist_confusion(k, class, xi, &mut rng),
                        Provenance::Specialist(class),
                    ),
                    None => (
                        dirichlet_confusion(k, others_alpha, others_boost, &mut rng),
                        Provenance::Dirichlet,
                    ),
                })
                .unzip()
        }
        ConfusionSpec::Dirichlet {
            alpha,
            diagonal_boost,
        } => {
            if !(alpha > 0.0) || !(diagonal_boost >= 0.0) {
                return Err(invalid("dirichlet ensemble needs alpha > 0 and diagonal_boost >= 0"));
            }
            (0..annotators)
                .map(|_| {
                    (
                        dirichlet_confusion(k, alpha, diagonal_boost, &mut rng),
                        Provenance::Dirichlet,
                    )
                })
                .unzip()
        }
    };
    ConfusionEnsemble::new(matrices, provenance)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Annotation {
    pub item: usize,
    pub annotator: usize,
    pub label: usize,
}

/// Observed `(item, annotator, label)` triples with a per-item index.
#[derive(Clone, Debug, PartialEq)]
pub struct AnnotationSet {
    num_items: usize,
    num_annotators: usize,
    num_classes: usize,
    triples: Vec<Annotation>,
    by_item: Vec<Vec<(usize, usize)>>,
}

impl AnnotationSet {
    pub fn new(num_items: usize, num_annotators: usize, num_classes: usize, triples: Vec<Annotation>) -> Result<Self> {
        let mut seen = HashSet::with_capacity(triples.len());
        let mut by_item = vec![Vec::new(); num_items];
        for a in &triples {
            if a.item >= num_items {
                return Err(Error::IndexOutOfRange {
                    what: "item",
                    index: a.item,
                    limit: num_items,
                });
            }
            if a.annotator >= num_annotators {
                return Err(Error::IndexOutOfRange {
                    what: "annotator",
                    index: a.annotator,
                    limit: num_annotators,
                });
            }
            if a.label >= num_classes {
                return Err(Error::IndexOutOfRange {
                    what: "label",
                    index: a.label,
                    limit: num_classes,
                });
            }
            if !seen.insert((a.item, a.annotator)) {
                return Err(invalid(format!(
                    "duplicate annotation for item {} by annotator {}",
                    a.item, a.annotator
                )));
            }
            by_item[a.item].push((a.annotator, a.label));
        }
        Ok(AnnotationSet {
            num_items,
            num_annotators,
            num_classes,
            triples,
            by_item,
        })
    }

    pub fn len(&self) -> usize {
        self.triples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triples.is_empty()
    }

    pub fn num_items(&self) -> usize {
        self.num_items
    }

    pub fn num_annotators(&self) -> usize {
        self.num_annotators
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn triples(&self) -> &[Annotation] {
        &self.triples
    }

    /// `S_n` as `(annotator, label)` pairs.
    pub fn for_item(&self, item: usize) -> &[(usize, usize)] {
        &self.by_item[item]
    }
}

/// Masks each `(m, n)` pair of the training split with probability `p` and
/// draws the kept labels from `A_m F♮(:, n)`.
pub fn sample_annotations(dataset: &Dataset, ensemble: &ConfusionEnsemble, p: f64, seed: u64) -> Result<AnnotationSet> {
    if !(p > 0.0 && p <= 1.0) {
        return Err(invalid(format!("observation probability must lie in (0, 1], got {p}")));
    }
    if ensemble.num_classes() != dataset.num_classes {
        return Err(invalid("ensemble and dataset disagree on the number of classes"));
    }
    let mut rng = Rng::new(seed).derive(4);
    let mut triples = Vec::new();
    for n in dataset.indices(Split::Train) {
        let f = dataset.posterior(n);
        for (m, a) in ensemble.matrices.iter().enumerate() {
            if !rng.bernoulli(p) {
                continue;
            }
            let probs = a.matvec(&f)?;
            triples.push(Annotation {
                item: n,
                annotator: m,
                label: rng.categorical(&probs),
            });
        }
    }
    AnnotationSet::new(
        dataset.num_items(),
        ensemble.num_annotators(),
        dataset.num_classes,
        triples,
    )
}

/// `P = W F`, block `(m, n)` equal to `A_m F(:, n)`.
pub fn build_p(ensemble: &ConfusionEnsemble, f: &DenseMatrix) -> Result<DenseMatrix> {
    ensemble.stacked().matmul(f)
}
