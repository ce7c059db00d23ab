//! Dense linear assignment by the O(K³) Hungarian method with potentials.

use super::DenseMatrix;
use crate::error::{invalid, Result};

/// Returns `perm` minimizing `Σ_j cost(j, perm[j])`.
pub fn hungarian(cost: &DenseMatrix) -> Result<Vec<usize>> {
    let (n, m) = cost.shape();
    if n != m {
        return Err(invalid(format!("hungarian: cost matrix is {n}x{m}, expected square")));
    }
    if !cost.is_finite() {
        return Err(invalid("hungarian: cost matrix contains non-finite entries"));
    }
    if n == 0 {
        return Ok(Vec::new());
    }

    // 1-based potentials; column 0 is a virtual sentinel.
    let mut u = vec![0.0f64; n + 1];
    let mut v = vec![0.0f64; n + 1];
    let mut owner = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];

    for i in 1..=n {
        owner[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = owner[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = cost[(i0 - 1, j - 1)] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[owner[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if owner[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            owner[j0] = owner[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    let mut perm = vec![0usize; n];
    for j in 1..=n {
        perm[owner[j] - 1] = j - 1;
    }
    Ok(perm)
}

pub fn assignment_cost(cost: &DenseMatrix, perm: &[usize]) -> f64 {
    perm.iter().enumerate().map(|(j, &k)| cost[(j, k)]).sum()
}
