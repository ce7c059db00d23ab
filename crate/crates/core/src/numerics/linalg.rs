use super::DenseMatrix;
use crate::error::{invalid, Error, Result};

/// Softmax applied independently to every column, with the column maximum
/// subtracted before exponentiation.
pub fn col_softmax(logits: &DenseMatrix) -> Result<DenseMatrix> {
    if !logits.is_finite() {
        return Err(invalid("col_softmax: logits contain non-finite entries"));
    }
    let (rows, cols) = logits.shape();
    let mut out = DenseMatrix::zeros(rows, cols);
    for c in 0..cols {
        let max = (0..rows)
            .map(|r| logits[(r, c)])
            .fold(f64::NEG_INFINITY, f64::max);
        let mut total = 0.0;
        for r in 0..rows {
            let e = (logits[(r, c)] - max).exp();
            out[(r, c)] = e;
            total += e;
        }
        for r in 0..rows {
            out[(r, c)] /= total;
        }
    }
    Ok(out)
}

/// Pulls a gradient with respect to `probs = col_softmax(logits)` back to the logits.
///
/// Per column: `dz_i = a_i (g_i - Σ_k a_k g_k)`.
pub fn col_softmax_backward(probs: &DenseMatrix, grad: &DenseMatrix) -> DenseMatrix {
    debug_assert_eq!(probs.shape(), grad.shape());
    let (rows, cols) = probs.shape();
    let mut out = DenseMatrix::zeros(rows, cols);
    for c in 0..cols {
        let dot: f64 = (0..rows).map(|r| probs[(r, c)] * grad[(r, c)]).sum();
        for r in 0..rows {
            out[(r, c)] = probs[(r, c)] * (grad[(r, c)] - dot);
        }
    }
    out
}

fn check_symmetric(m: &DenseMatrix, context: &str) -> Result<()> {
    let (r, c) = m.shape();
    if r != c {
        return Err(invalid(format!("{context}: matrix is {r}x{c}, expected square")));
    }
    for i in 0..r {
        for j in 0..i {
            if (m[(i, j)] - m[(j, i)]).abs() > 1e-10 {
                return Err(invalid(format!(
                    "{context}: matrix not symmetric at ({i},{j})"
                )));
            }
        }
    }
    Ok(())
}

/// Lower-triangular Cholesky factor of `m + ridge·I`.
pub fn cholesky(m: &DenseMatrix, ridge: f64) -> Result<DenseMatrix> {
    check_symmetric(m, "cholesky")?;
    if !(ridge >= 0.0) {
        return Err(invalid("cholesky: ridge must be non-negative"));
    }
    let n = m.rows();
    let mut l = DenseMatrix::zeros(n, n);
    for j in 0..n {
        let mut d = m[(j, j)] + ridge;
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        if !(d > 0.0) || !d.is_finite() {
            return Err(Error::NotPositiveDefinite { pivot: j, value: d });
        }
        let d = d.sqrt();
        l[(j, j)] = d;
        for i in (j + 1)..n {
            let mut s = m[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / d;
        }
    }
    Ok(l)
}

/// `log det(m + ridge·I)` for a symmetric positive semi-definite `m`.
pub fn logdet_psd(m: &DenseMatrix, ridge: f64) -> Result<f64> {
    let l = cholesky(m, ridge)?;
    Ok((0..l.rows()).map(|i| 2.0 * l[(i, i)].ln()).sum())
}

/// Log-determinant together with the inverse of `m + ridge·I`, sharing one factorization.
pub fn logdet_and_inverse(m: &DenseMatrix, ridge: f64) -> Result<(f64, DenseMatrix)> {
    let l = cholesky(m, ridge)?;
    let n = l.rows();
    let logdet = (0..n).map(|i| 2.0 * l[(i, i)].ln()).sum();

    // L⁻¹ by forward substitution, then (L Lᵀ)⁻¹ = L⁻ᵀ L⁻¹.
    let mut linv = DenseMatrix::zeros(n, n);
    for c in 0..n {
        for i in c..n {
            let mut s = if i == c { 1.0 } else { 0.0 };
            for k in c..i {
                s -= l[(i, k)] * linv[(k, c)];
            }
            linv[(i, c)] = s / l[(i, i)];
        }
    }
    let mut inv = DenseMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let v: f64 = (i..n).map(|k| linv[(k, i)] * linv[(k, j)]).sum();
            inv[(i, j)] = v;
            inv[(j, i)] = v;
        }
    }
    Ok((logdet, inv))
}
