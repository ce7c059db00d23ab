//! The ground-truth-predictor network `f_θ` (ReLU MLP with a softmax head) and
//! the annotator confusion layers `A_m = col_softmax(B_m)`.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::numerics::{col_softmax, col_softmax_backward, DenseMatrix, Rng};

/// Default confusion-logit scale at initialization: `B_m = 4·I`.
pub const DEFAULT_MU_INIT: f64 = 4.0;

const INIT_STREAM: u64 = 0x1417;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    /// `out × in`
    pub weight: DenseMatrix,
    pub bias: Vec<f64>,
}

impl Layer {
    fn out_dim(&self) -> usize {
        self.weight.rows()
    }

    fn in_dim(&self) -> usize {
        self.weight.cols()
    }
}

/// Fully connected network; every layer but the last is followed by ReLU, the
/// last by a column softmax.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassifierParams {
    layers: Vec<Layer>,
}

#[derive(Clone, Debug)]
pub struct ClassifierCache {
    /// Input of each layer: `inputs[0]` is `X`, `inputs[i]` is the ReLU output of layer `i-1`.
    inputs: Vec<DenseMatrix>,
    /// Pre-activations of the hidden layers.
    pre_activations: Vec<DenseMatrix>,
    /// `K × B`, each column on the simplex.
    pub output: DenseMatrix,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ClassifierGrads {
    pub weights: Vec<DenseMatrix>,
    pub biases: Vec<Vec<f64>>,
}

impl ClassifierParams {
    pub fn new(layers: Vec<Layer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(invalid("classifier needs at least one layer"));
        }
        for (i, layer) in layers.iter().enumerate() {
            if layer.bias.len() != layer.out_dim() {
                return Err(invalid(format!(
                    "layer {i}: bias length {} does not match width {}",
                    layer.bias.len(),
                    layer.out_dim()
                )));
            }
            if i > 0 && layer.in_dim() != layers[i - 1].out_dim() {
                return Err(invalid(format!(
                    "layer {i} expects {} inputs but layer {} produces {}",
                    layer.in_dim(),
                    i - 1,
                    layers[i - 1].out_dim()
                )));
            }
        }
        if layers.last().map(Layer::out_dim).unwrap_or(0) < 2 {
            return Err(invalid("classifier output dimension must be at least 2"));
        }
        Ok(ClassifierParams { layers })
    }

    /// He-normal weights, zero biases.
    pub fn he_init(input_dim: usize, hidden: &[usize], classes: usize, rng: &mut Rng) -> Result<Self> {
        let mut widths = vec![input_dim];
        widths.extend_from_slice(hidden);
        widths.push(classes);
        let layers = widths
            .windows(2)
            .map(|w| {
                let std = (2.0 / w[0] as f64).sqrt();
                Layer {
                    weight: DenseMatrix::from_fn(w[1], w[0], |_, _| std * rng.normal()),
                    bias: vec![0.0; w[1]],
                }
            })
            .collect();
        Self::new(layers)
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].in_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().expect("non-empty").out_dim()
    }

    pub fn hidden_widths(&self) -> Vec<usize> {
        self.layers[..self.layers.len() - 1]
            .iter()
            .map(Layer::out_dim)
            .collect()
    }

    pub fn num_params(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weight.as_slice().len() + l.bias.len())
            .sum()
    }

    /// Forward pass on `X` (`D × B`, one column per item).
    pub fn forward(&self, x: &DenseMatrix) -> Result<ClassifierCache> {
        if x.rows() != self.input_dim() {
            return Err(Error::ShapeMismatch {
                context: "classifier forward",
                expected: format!("{} feature rows", self.input_dim()),
                actual: format!("{} rows", x.rows()),
            });
        }
        if !x.is_finite() {
            return Err(invalid("classifier forward: non-finite features"));
        }
        let mut inputs = vec![x.clone()];
        let mut pre_activations = Vec::with_capacity(self.layers.len() - 1);
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            let mut z = layer.weight.matmul(&inputs[i])?;
            for r in 0..z.rows() {
                let b = layer.bias[r];
                z.row_mut(r).iter_mut().for_each(|v| *v += b);
            }
            if i == last {
                let output = col_softmax(&z)?;
                return Ok(ClassifierCache {
                    inputs,
                    pre_activations,
                    output,
                });
            }
            inputs.push(z.map(|v| v.max(0.0)));
            pre_activations.push(z);
        }
        unreachable!("loop returns on the last layer")
    }

    /// Back-propagates `∂L/∂F̃` (`K × B`) through the softmax head and the MLP.
    pub fn backward(&self, cache: &ClassifierCache, d_output: &DenseMatrix) -> Result<ClassifierGrads> {
        if d_output.shape() != cache.output.shape() {
            return Err(Error::ShapeMismatch {
                context: "classifier backward",
                expected: format!("{:?}", cache.output.shape()),
                actual: format!("{:?}", d_output.shape()),
            });
        }
        let n = self.layers.len();
        let mut weights = vec![DenseMatrix::zeros(0, 0); n];
        let mut biases = vec![Vec::new(); n];
        let mut delta = col_softmax_backward(&cache.output, d_output);
        for i in (0..n).rev() {
            let input = &cache.inputs[i];
            weights[i] = delta.matmul(&input.transpose())?;
            biases[i] = (0..delta.rows()).map(|r| delta.row(r).iter().sum()).collect();
            if i > 0 {
                let mut back = self.layers[i].weight.transpose().matmul(&delta)?;
                let pre = &cache.pre_activations[i - 1];
                for (g, &z) in back.as_mut_slice().iter_mut().zip(pre.as_slice()) {
                    if z <= 0.0 {
                        *g = 0.0;
                    }
                }
                delta = back;
            }
        }
        Ok(ClassifierGrads { weights, biases })
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out = Vec::with_capacity(2 * self.layers.len());
        for layer in &mut self.layers {
            out.push(layer.weight.as_mut_slice());
            out.push(layer.bias.as_mut_slice());
        }
        out
    }
}

impl ClassifierGrads {
    pub fn zeros_like(params: &ClassifierParams) -> Self {
        ClassifierGrads {
            weights: params
                .layers
                .iter()
                .map(|l| DenseMatrix::zeros(l.out_dim(), l.in_dim()))
                .collect(),
            biases: params.layers.iter().map(|l| vec![0.0; l.out_dim()]).collect(),
        }
    }
}

/// Classifier plus one confusion layer per annotator.
///
/// The materialized `A_m` are kept in sync with the logits `B_m`; every mutation
/// goes through [`CrowdModel::apply`] or [`CrowdModel::set_confusion_logits`],
/// which also advance the model version used to detect stale forward caches.
#[derive(Clone, Debug)]
pub struct CrowdModel {
    classifier: ClassifierParams,
    confusion_logits: Vec<DenseMatrix>,
    confusions: Vec<DenseMatrix>,
    mu_init: f64,
    seed: u64,
    version: u64,
}

/// Gradients for every trainable tensor of a [`CrowdModel`].
#[derive(Clone, Debug, PartialEq)]
pub struct ModelGrads {
    pub classifier: ClassifierGrads,
    /// `∂L/∂B_m`, one per annotator.
    pub confusion_logits: Vec<DenseMatrix>,
}

impl ModelGrads {
    /// Flattened views in the same order as [`CrowdModel::apply`] exposes parameters.
    pub fn tensors(&self) -> Vec<&[f64]> {
        let mut out = Vec::new();
        for (w, b) in self.classifier.weights.iter().zip(&self.classifier.biases) {
            out.push(w.as_slice());
            out.push(b.as_slice());
        }
        out.extend(self.confusion_logits.iter().map(DenseMatrix::as_slice));
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out = Vec::new();
        for (w, b) in self
            .classifier
            .weights
            .iter_mut()
            .zip(self.classifier.biases.iter_mut())
        {
            out.push(w.as_mut_slice());
            out.push(b.as_mut_slice());
        }
        out.extend(self.confusion_logits.iter_mut().map(DenseMatrix::as_mut_slice));
        out
    }

    pub fn global_norm(&self) -> f64 {
        self.tensors()
            .iter()
            .flat_map(|t| t.iter())
            .map(|g| g * g)
            .sum::<f64>()
            .sqrt()
    }
}

/// Forward state of one batch: classifier activations, the (column, annotator)
/// pairs evaluated, and `p = A_m f(x)` for each pair.
#[derive(Clone, Debug)]
pub struct CrowdForward {
    pub classifier: ClassifierCache,
    pub pairs: Vec<(usize, usize)>,
    /// `K × T`, column `t` is `A_m f(x_n)` for `pairs[t]`.
    pub probs: DenseMatrix,
    version: u64,
}

impl CrowdForward {
    /// `F̃`, the classifier outputs for the batch (`K × B`).
    pub fn outputs(&self) -> &DenseMatrix {
        &self.classifier.output
    }
}

/// Extra gradient contributions that do not flow through `p` (regularizers).
#[derive(Clone, Debug, Default)]
pub struct ExtraGrads {
    /// `∂L/∂F̃`
    pub outputs: Option<DenseMatrix>,
    /// `∂L/∂A_m`
    pub confusions: Option<Vec<DenseMatrix>>,
}

impl CrowdModel {
    pub fn new(classifier: ClassifierParams, confusion_logits: Vec<DenseMatrix>, mu_init: f64, seed: u64) -> Result<Self> {
        let k = classifier.output_dim();
        if confusion_logits.is_empty() {
            return Err(invalid("crowd model needs at least one annotator"));
        }
        if let Some(bad) = confusion_logits.iter().position(|b| b.shape() != (k, k)) {
            return Err(Error::ShapeMismatch {
                context: "CrowdModel::new",
                expected: format!("{k}x{k} confusion logits"),
                actual: format!("{:?} for annotator {bad}", confusion_logits[bad].shape()),
            });
        }
        let confusions = confusion_logits
            .iter()
            .map(col_softmax)
            .collect::<Result<Vec<_>>>()?;
        Ok(CrowdModel {
            classifier,
            confusion_logits,
            confusions,
            mu_init,
            seed,
            version: 0,
        })
    }

    pub fn classifier(&self) -> &ClassifierParams {
        &self.classifier
    }

    pub fn confusion_logits(&self) -> &[DenseMatrix] {
        &self.confusion_logits
    }

    /// Materialized `A_m = col_softmax(B_m)`.
    pub fn confusions(&self) -> &[DenseMatrix] {
        &self.confusions
    }

    pub fn num_classes(&self) -> usize {
        self.classifier.output_dim()
    }

    pub fn num_annotators(&self) -> usize {
        self.confusion_logits.len()
    }

    pub fn input_dim(&self) -> usize {
        self.classifier.input_dim()
    }

    pub fn mu_init(&self) -> f64 {
        self.mu_init
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn version(&self) -> u64 {
        self.version
    }

    pub fn set_confusion_logits(&mut self, logits: Vec<DenseMatrix>) -> Result<()> {
        let rebuilt = CrowdModel::new(self.classifier.clone(), logits, self.mu_init, self.seed)?;
        self.confusion_logits = rebuilt.confusion_logits;
        self.confusions = rebuilt.confusions;
        self.version += 1;
        Ok(())
    }

    pub fn set_classifier(&mut self, classifier: ClassifierParams) -> Result<()> {
        if classifier.output_dim() != self.num_classes() {
            return Err(invalid("replacement classifier has a different output dimension"));
        }
        self.classifier = classifier;
        self.version += 1;
        Ok(())
    }

    /// Hands every trainable tensor (classifier layers as weight, bias pairs,
    /// then each `B_m`) to `update`, then re-materializes the confusions.
    pub fn apply<F>(&mut self, update: F) -> Result<()>
    where
        F: FnOnce(&mut [&mut [f64]]) -> Result<()>,
    {
        let mut tensors = self.classifier.tensors_mut();
        tensors.extend(self.confusion_logits.iter_mut().map(DenseMatrix::as_mut_slice));
        let outcome = update(&mut tensors);
        self.version += 1;
        self.confusions = self
            .confusion_logits
            .iter()
            .map(col_softmax)
            .collect::<Result<Vec<_>>>()?;
        outcome
    }

    /// Largest `|Σ_k A_m(k, j) − 1|` over all annotators and columns.
    pub fn max_column_sum_deviation(&self) -> f64 {
        self.confusions
            .iter()
            .flat_map(|a| a.column_sums())
            .map(|s| (s - 1.0).abs())
            .fold(0.0, f64::max)
    }

    /// Classifier outputs for arbitrary features, without keeping the cache.
    pub fn predict(&self, x: &DenseMatrix) -> Result<DenseMatrix> {
        Ok(self.classifier.forward(x)?.output)
    }
}

/// Builds a model with He-initialized classifier and `B_m = μ_init·I`.
pub fn init_model(
    input_dim: usize,
    classes: usize,
    annotators: usize,
    hidden: &[usize],
    mu_init: f64,
    seed: u64,
) -> Result<CrowdModel> {
    if !(mu_init >= 0.0) || !mu_init.is_finite() {
        return Err(invalid("mu_init must be a finite non-negative number"));
    }
    if classes < 2 || annotators < 1 || input_dim < 1 {
        return Err(invalid("init_model needs D >= 1, K >= 2 and M >= 1"));
    }
    let mut rng = Rng::new(seed).derive(INIT_STREAM);
    let classifier = ClassifierParams::he_init(input_dim, hidden, classes, &mut rng)?;
    let logits = vec![DenseMatrix::identity(classes).scale(mu_init); annotators];
    CrowdModel::new(classifier, logits, mu_init, seed)
}

/// `p_n^{(m)} = A_m f(x_n)` for every `(column of X, annotator)` pair.
pub fn crowd_forward(model: &CrowdModel, x: &DenseMatrix, pairs: &[(usize, usize)]) -> Result<CrowdForward> {
    let classifier = model.classifier.forward(x)?;
    let k = model.num_classes();
    let mut probs = DenseMatrix::zeros(k, pairs.len());
    for (t, &(col, m)) in pairs.iter().enumerate() {
        if col >= x.cols() {
            return Err(Error::IndexOutOfRange {
                what: "batch column",
                index: col,
                limit: x.cols(),
            });
        }
        if m >= model.num_annotators() {
            return Err(Error::IndexOutOfRange {
                what: "annotator",
                index: m,
                limit: model.num_annotators(),
            });
        }
        let a = &model.confusions[m];
        for r in 0..k {
            let mut s = 0.0;
            for j in 0..k {
                s += a[(r, j)] * classifier.output[(j, col)];
            }
            probs[(r, t)] = s;
        }
    }
    Ok(CrowdForward {
        classifier,
        pairs: pairs.to_vec(),
        probs,
        version: model.version,
    })
}

/// Exact gradients of a loss with respect to every `θ` and `B_m`, given
/// `∂L/∂p` for each evaluated pair plus any regularizer gradients.
pub fn backward(model: &CrowdModel, fwd: &CrowdForward, d_probs: &DenseMatrix, extra: &ExtraGrads) -> Result<ModelGrads> {
    if fwd.version != model.version {
        return Err(Error::StaleCache {
            cache: fwd.version,
            model: model.version,
        });
    }
    if d_probs.shape() != fwd.probs.shape() {
        return Err(Error::ShapeMismatch {
            context: "backward",
            expected: format!("{:?}", fwd.probs.shape()),
            actual: format!("{:?}", d_probs.shape()),
        });
    }
    let k = model.num_classes();
    let f = &fwd.classifier.output;
    let mut d_outputs = match &extra.outputs {
        Some(g) if g.shape() == f.shape() => g.clone(),
        Some(g) => {
            return Err(Error::ShapeMismatch {
                context: "backward (output gradient)",
                expected: format!("{:?}", f.shape()),
                actual: format!("{:?}", g.shape()),
            })
        }
        None => DenseMatrix::zeros(k, f.cols()),
    };
    let mut d_conf = match &extra.confusions {
        Some(g) if g.len() == model.num_annotators() => g.clone(),
        Some(g) => {
            return Err(Error::ShapeMismatch {
                context: "backward (confusion gradient)",
                expected: format!("{} blocks", model.num_annotators()),
                actual: format!("{} blocks", g.len()),
            })
        }
        None => vec![DenseMatrix::zeros(k, k); model.num_annotators()],
    };

    for (t, &(col, m)) in fwd.pairs.iter().enumerate() {
        let a = &model.confusions[m];
        for r in 0..k {
            let g = d_probs[(r, t)];
            if g == 0.0 {
                continue;
            }
            for j in 0..k {
                d_conf[m][(r, j)] += g * f[(j, col)];
                d_outputs[(j, col)] += g * a[(r, j)];
            }
        }
    }

    let classifier = model.classifier.backward(&fwd.classifier, &d_outputs)?;
    let confusion_logits = model
        .confusions
        .iter()
        .zip(&d_conf)
        .map(|(a, g)| col_softmax_backward(a, g))
        .collect();
    Ok(ModelGrads {
        classifier,
        confusion_logits,
    })
}
