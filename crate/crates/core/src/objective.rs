//! Loss terms and their analytic gradients.
//!
//! Data terms take a `K × T` matrix with one column per annotation term and
//! return the mean loss together with its gradient with respect to that matrix.
//! Regularizers return their value and the gradient with respect to `F̃` or the
//! materialized confusions `A_m`; chaining into the logits `B_m` happens in
//! [`crate::model::backward`].

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::model::ExtraGrads;
use crate::numerics::{logdet_and_inverse, DenseMatrix, PROB_FLOOR};

/// Default ridge inside both log-determinants.
pub const DEFAULT_RIDGE: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegularizerKind {
    None,
    /// `−λ·log det(F̃F̃ᵀ + εI)` on the batch outputs.
    LogdetF,
    /// `−λ·log det(WᵀW + εI)` on the stacked confusions.
    LogdetW,
    /// `λ·Σ_m trace(A_m)`.
    Trace,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegularizerSpec {
    pub kind: RegularizerKind,
    pub lambda: f64,
    #[serde(default = "default_ridge")]
    pub ridge: f64,
}

fn default_ridge() -> f64 {
    DEFAULT_RIDGE
}

impl RegularizerSpec {
    pub fn none() -> Self {
        RegularizerSpec {
            kind: RegularizerKind::None,
            lambda: 0.0,
            ridge: DEFAULT_RIDGE,
        }
    }

    pub fn new(kind: RegularizerKind, lambda: f64) -> Self {
        RegularizerSpec {
            kind,
            lambda,
            ridge: DEFAULT_RIDGE,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0) || !self.lambda.is_finite() {
            return Err(invalid("regularizer lambda must be finite and >= 0"));
        }
        if !(self.ridge >= 0.0) || !self.ridge.is_finite() {
            return Err(invalid("regularizer ridge must be finite and >= 0"));
        }
        Ok(())
    }

    /// Evaluates the regularizer on a batch and returns its gradients.
    pub fn evaluate(&self, outputs: &DenseMatrix, confusions: &[DenseMatrix]) -> Result<(f64, ExtraGrads)> {
        match self.kind {
            RegularizerKind::None => Ok((0.0, ExtraGrads::default())),
            RegularizerKind::LogdetF => {
                let (v, g) = reg_logdet_f(outputs, self.lambda, self.ridge)?;
                Ok((
                    v,
                    ExtraGrads {
                        outputs: Some(g),
                        confusions: None,
                    },
                ))
            }
            RegularizerKind::LogdetW => {
                let (v, g) = reg_logdet_w(confusions, self.lambda, self.ridge)?;
                Ok((
                    v,
                    ExtraGrads {
                        outputs: None,
                        confusions: Some(g),
                    },
                ))
            }
            RegularizerKind::Trace => {
                let (v, g) = reg_trace(confusions, self.lambda);
                Ok((
                    v,
                    ExtraGrads {
                        outputs: None,
                        confusions: Some(g),
                    },
                ))
            }
        }
    }
}

/// Which data term couples the classifier and the confusion layers.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DataTerm {
    /// Cross-entropy of `A_m f(x_n)` against the observed label.
    Ccem,
    /// Cross-entropy of `softmax(A_m f(x_n))`.
    Crowdlayer,
    /// KL divergence to the exact annotation distributions (needs ground truth).
    OracleKl,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub data: f64,
    pub regularizer: f64,
    pub total: f64,
    pub terms: usize,
}

impl LossBreakdown {
    pub fn new(data: f64, regularizer: f64, terms: usize) -> Self {
        LossBreakdown {
            data,
            regularizer,
            total: data + regularizer,
            terms,
        }
    }
}

fn check_labels(probs: &DenseMatrix, labels: &[usize]) -> Result<()> {
    if labels.len() != probs.cols() {
        return Err(Error::ShapeMismatch {
            context: "data loss",
            expected: format!("{} labels", probs.cols()),
            actual: format!("{} labels", labels.len()),
        });
    }
    if let Some(&bad) = labels.iter().find(|&&y| y >= probs.rows()) {
        return Err(Error::IndexOutOfRange {
            what: "label",
            index: bad,
            limit: probs.rows(),
        });
    }
    Ok(())
}

/// Mean of `−log max(p̂_{ŷ}, floor)` over the columns of `probs`.
pub fn ccem_data_loss(probs: &DenseMatrix, labels: &[usize]) -> Result<(f64, DenseMatrix)> {
    check_labels(probs, labels)?;
    let mut grad = DenseMatrix::zeros(probs.rows(), probs.cols());
    let t = labels.len();
    if t == 0 {
        return Ok((0.0, grad));
    }
    let scale = 1.0 / t as f64;
    let mut loss = 0.0;
    for (col, &y) in labels.iter().enumerate() {
        let p = probs[(y, col)].max(PROB_FLOOR);
        loss -= p.ln();
        grad[(y, col)] = -scale / p;
    }
    Ok((loss * scale, grad))
}

/// Cross-entropy after a softmax over each column of `products`.
pub fn crowdlayer_loss(products: &DenseMatrix, labels: &[usize]) -> Result<(f64, DenseMatrix)> {
    check_labels(products, labels)?;
    let (k, t) = products.shape();
    let mut grad = DenseMatrix::zeros(k, t);
    if t == 0 {
        return Ok((0.0, grad));
    }
    let scale = 1.0 / t as f64;
    let mut loss = 0.0;
    for (col, &y) in labels.iter().enumerate() {
        let max = (0..k).map(|r| products[(r, col)]).fold(f64::NEG_INFINITY, f64::max);
        let lse = max + (0..k).map(|r| (products[(r, col)] - max).exp()).sum::<f64>().ln();
        loss += lse - products[(y, col)];
        for r in 0..k {
            let s = (products[(r, col)] - lse).exp();
            grad[(r, col)] = scale * (s - if r == y { 1.0 } else { 0.0 });
        }
    }
    Ok((loss * scale, grad))
}

/// Mean `KL(p♮ ‖ p̂)` over the columns.
pub fn oracle_kl_loss(targets: &DenseMatrix, probs: &DenseMatrix) -> Result<(f64, DenseMatrix)> {
    if targets.shape() != probs.shape() {
        return Err(Error::ShapeMismatch {
            context: "oracle_kl_loss",
            expected: format!("{:?}", targets.shape()),
            actual: format!("{:?}", probs.shape()),
        });
    }
    let (k, t) = probs.shape();
    let mut grad = DenseMatrix::zeros(k, t);
    if t == 0 {
        return Ok((0.0, grad));
    }
    let scale = 1.0 / t as f64;
    let mut loss = 0.0;
    for col in 0..t {
        for r in 0..k {
            let p = targets[(r, col)];
            if p <= 0.0 {
                continue;
            }
            let q = probs[(r, col)].max(PROB_FLOOR);
            loss += p * (p / q).ln();
            grad[(r, col)] = -scale * p / q;
        }
    }
    Ok(((loss * scale).max(0.0), grad))
}

/// `−λ·log det(F̃F̃ᵀ + εI)` and `∂/∂F̃ = −2λ (F̃F̃ᵀ + εI)⁻¹ F̃`.
pub fn reg_logdet_f(outputs: &DenseMatrix, lambda: f64, ridge: f64) -> Result<(f64, DenseMatrix)> {
    if outputs.cols() == 0 {
        return Err(invalid("reg_logdet_f: empty batch"));
    }
    if lambda == 0.0 {
        return Ok((0.0, DenseMatrix::zeros(outputs.rows(), outputs.cols())));
    }
    let (logdet, inv) = logdet_and_inverse(&outputs.gram_rows(), ridge)?;
    let grad = inv.matmul(outputs)?.scale(-2.0 * lambda);
    Ok((-lambda * logdet, grad))
}

/// `−λ·log det(WᵀW + εI)` with `W = [A_1; …; A_M]`, and `∂/∂A_m = −2λ A_m (WᵀW + εI)⁻¹`.
pub fn reg_logdet_w(confusions: &[DenseMatrix], lambda: f64, ridge: f64) -> Result<(f64, Vec<DenseMatrix>)> {
    let k = confusions
        .first()
        .map(DenseMatrix::cols)
        .ok_or_else(|| invalid("reg_logdet_w: no confusion matrices"))?;
    if lambda == 0.0 {
        return Ok((0.0, vec![DenseMatrix::zeros(k, k); confusions.len()]));
    }
    let w = DenseMatrix::vstack(confusions)?;
    let (logdet, inv) = logdet_and_inverse(&w.gram_cols(), ridge)?;
    let grads = confusions
        .iter()
        .map(|a| a.matmul(&inv).map(|g| g.scale(-2.0 * lambda)))
        .collect::<Result<Vec<_>>>()?;
    Ok((-lambda * logdet, grads))
}

/// `λ·Σ_m trace(A_m)`; the gradient is `λ·I` per block.
pub fn reg_trace(confusions: &[DenseMatrix], lambda: f64) -> (f64, Vec<DenseMatrix>) {
    let value = lambda * confusions.iter().map(DenseMatrix::trace).sum::<f64>();
    let grads = confusions
        .iter()
        .map(|a| DenseMatrix::identity(a.rows()).scale(lambda))
        .collect();
    (value, grads)
}
