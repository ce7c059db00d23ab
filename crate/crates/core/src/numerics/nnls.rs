//! Nonnegative least squares, `min ‖Aλ − b‖₂ s.t. λ ≥ 0`, by the Lawson–Hanson
//! active-set method.

use super::linalg::cholesky;
use super::DenseMatrix;
use crate::error::{Error, Result};

#[derive(Clone, Debug)]
pub struct NnlsSolution {
    pub coefficients: Vec<f64>,
    pub residual_norm: f64,
    /// Residual norm after every accepted update, starting from λ = 0.
    pub trace: Vec<f64>,
}

fn residual(a: &DenseMatrix, b: &[f64], x: &[f64]) -> Vec<f64> {
    let ax = a.matvec(x).expect("shape checked by caller");
    b.iter().zip(ax).map(|(bi, axi)| bi - axi).collect()
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Unconstrained least squares restricted to the `passive` columns, via the
/// normal equations. `None` when the passive columns are numerically dependent.
fn passive_solve(a: &DenseMatrix, b: &[f64], passive: &[usize]) -> Option<Vec<f64>> {
    let sub = a.select_columns(passive);
    let gram = sub.gram_cols();
    let rhs = sub.matvec_t(b).ok()?;
    let scale = (0..gram.rows()).map(|i| gram[(i, i)]).fold(0.0, f64::max);
    let l = cholesky(&gram, 0.0).ok()?;
    let n = l.rows();
    if (0..n).any(|i| l[(i, i)] * l[(i, i)] <= 1e-13 * scale) {
        return None;
    }
    let mut y = vec![0.0; n];
    for i in 0..n {
        let s: f64 = (0..i).map(|k| l[(i, k)] * y[k]).sum();
        y[i] = (rhs[i] - s) / l[(i, i)];
    }
    let mut z = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = ((i + 1)..n).map(|k| l[(k, i)] * z[k]).sum();
        z[i] = (y[i] - s) / l[(i, i)];
    }
    Some(z)
}

pub fn nnls(a: &DenseMatrix, b: &[f64]) -> Result<NnlsSolution> {
    let (n, k) = a.shape();
    if n == 0 || k == 0 {
        return Err(Error::InvalidArgument("nnls: empty system".into()));
    }
    if b.len() != n {
        return Err(Error::ShapeMismatch {
            context: "nnls",
            expected: format!("rhs of length {n}"),
            actual: format!("length {}", b.len()),
        });
    }

    let col_scale = (0..k)
        .map(|j| (0..n).map(|i| a[(i, j)].abs()).fold(0.0, f64::max))
        .fold(0.0, f64::max);
    let tol = 1e-12 * col_scale.max(1.0) * norm(b).max(1.0);

    let mut x = vec![0.0; k];
    let mut in_passive = vec![false; k];
    // Columns whose inclusion made the passive set singular; skipped until x changes.
    let mut rejected = vec![false; k];
    let mut r = b.to_vec();
    let mut trace = vec![norm(&r)];
    let max_outer = 10 * k + 10;
    let mut stalled = 0;

    for _ in 0..max_outer {
        let w = a.matvec_t(&r)?;
        let candidate = (0..k)
            .filter(|&j| !in_passive[j] && !rejected[j] && w[j] > tol)
            .max_by(|&i, &j| w[i].total_cmp(&w[j]));
        let Some(j) = candidate else { break };
        in_passive[j] = true;

        loop {
            let passive: Vec<usize> = (0..k).filter(|&i| in_passive[i]).collect();
            let Some(z) = passive_solve(a, b, &passive) else {
                in_passive[j] = false;
                rejected[j] = true;
                break;
            };
            if z.iter().all(|&v| v > 0.0) {
                for (p, &v) in passive.iter().zip(&z) {
                    x[*p] = v;
                }
                break;
            }
            // Step toward z until the first passive coordinate hits zero.
            let mut alpha = 1.0f64;
            for (p, &v) in passive.iter().zip(&z) {
                if v <= 0.0 {
                    let denom = x[*p] - v;
                    if denom > 0.0 {
                        alpha = alpha.min(x[*p] / denom);
                    }
                }
            }
            for (p, &v) in passive.iter().zip(&z) {
                x[*p] += alpha * (v - x[*p]);
                if x[*p] <= 1e-15 * (1.0 + v.abs()) {
                    x[*p] = 0.0;
                    in_passive[*p] = false;
                }
            }
            if !passive.iter().any(|&p| in_passive[p]) {
                break;
            }
        }

        r = residual(a, b, &x);
        let res = norm(&r);
        let last = *trace.last().expect("trace starts non-empty");
        if res < last {
            rejected.iter_mut().for_each(|v| *v = false);
            stalled = 0;
        } else {
            stalled += 1;
        }
        trace.push(res);
        if stalled > k {
            break;
        }
    }

    Ok(NnlsSolution {
        residual_norm: norm(&residual(a, b, &x)),
        coefficients: x,
        trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_system() {
        let s = nnls(&DenseMatrix::identity(2), &[1.0, 2.0]).unwrap();
        assert_eq!(s.coefficients, vec![1.0, 2.0]);
        assert!(s.residual_norm < 1e-15);
    }

    #[test]
    fn negative_target_clamped() {
        let s = nnls(&DenseMatrix::identity(2), &[-1.0, 1.0]).unwrap();
        assert_eq!(s.coefficients, vec![0.0, 1.0]);
        assert!((s.residual_norm - 1.0).abs() < 1e-15);
    }

    #[test]
    fn single_column_exact_fit() {
        let a = DenseMatrix::from_rows(&[vec![1.0], vec![1.0]]).unwrap();
        let s = nnls(&a, &[1.0, 1.0]).unwrap();
        assert!((s.coefficients[0] - 1.0).abs() < 1e-15);
        assert!(s.residual_norm < 1e-15);
    }

    #[test]
    fn dependent_columns_do_not_break_solver() {
        let a = DenseMatrix::from_rows(&[vec![1.0, 2.0, 0.0], vec![1.0, 2.0, 1.0]]).unwrap();
        let s = nnls(&a, &[2.0, 3.0]).unwrap();
        assert!(s.residual_norm < 1e-10, "{}", s.residual_norm);
        assert!(s.coefficients.iter().all(|&c| c >= 0.0));
    }

    #[test]
    fn shape_mismatch_rejected() {
        assert!(nnls(&DenseMatrix::identity(2), &[1.0]).is_err());
        assert!(nnls(&DenseMatrix::zeros(0, 0), &[]).is_err());
    }
}
