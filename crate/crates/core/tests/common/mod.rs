#![allow(dead_code)]

use geocrowd::model::{backward, crowd_forward, init_model, CrowdModel};
use geocrowd::numerics::{col_softmax, DenseMatrix, Rng};
use geocrowd::objective::{
    ccem_data_loss, oracle_kl_loss, reg_logdet_f, reg_logdet_w, reg_trace, RegularizerKind, RegularizerSpec,
    DEFAULT_RIDGE,
};

pub const FD_STEP: f64 = 1e-5;
pub const FD_TOL: f64 = 1e-4;
/// Gradients smaller than this are compared in absolute terms.
const FD_FLOOR: f64 = 1e-5;

#[derive(Debug, Clone, Copy)]
pub struct FdReport {
    pub coordinates: usize,
    pub max_rel_error: f64,
    pub worst: usize,
}

impl FdReport {
    pub fn passed(&self) -> bool {
        self.max_rel_error <= FD_TOL
    }
}

/// Central differences of `f` at `x` compared with `grad` on `coords`.
pub fn fd_check(f: impl Fn(&[f64]) -> f64, x: &[f64], grad: &[f64], coords: &[usize]) -> FdReport {
    let mut worst = (0.0, 0);
    let mut probe = x.to_vec();
    for &i in coords {
        probe[i] = x[i] + FD_STEP;
        let up = f(&probe);
        probe[i] = x[i] - FD_STEP;
        let down = f(&probe);
        probe[i] = x[i];
        let numeric = (up - down) / (2.0 * FD_STEP);
        let scale = numeric.abs().max(grad[i].abs()).max(FD_FLOOR);
        let rel = (numeric - grad[i]).abs() / scale;
        if rel > worst.0 || rel.is_nan() {
            worst = (rel, i);
        }
    }
    FdReport {
        coordinates: coords.len(),
        max_rel_error: worst.0,
        worst: worst.1,
    }
}

/// `count` distinct coordinates out of `0..len` (all of them when `len <= count`).
pub fn pick(len: usize, count: usize, rng: &mut Rng) -> Vec<usize> {
    let mut all: Vec<usize> = (0..len).collect();
    rng.shuffle(&mut all);
    all.truncate(count.min(len));
    all
}

pub fn random_matrix(rows: usize, cols: usize, rng: &mut Rng) -> DenseMatrix {
    DenseMatrix::from_fn(rows, cols, |_, _| rng.normal())
}

pub fn random_simplex_columns(rows: usize, cols: usize, rng: &mut Rng) -> DenseMatrix {
    col_softmax(&random_matrix(rows, cols, rng)).unwrap()
}

fn reshape(rows: usize, cols: usize, v: &[f64]) -> DenseMatrix {
    DenseMatrix::from_vec(rows, cols, v.to_vec()).unwrap()
}

fn split_blocks(k: usize, v: &[f64]) -> Vec<DenseMatrix> {
    v.chunks(k * k).map(|c| reshape(k, k, c)).collect()
}

pub fn ccem_check(seed: u64) -> FdReport {
    let mut rng = Rng::new(seed);
    let (k, t) = (4, 300);
    let probs = random_simplex_columns(k, t, &mut rng);
    let labels: Vec<usize> = (0..t).map(|_| rng.below(k)).collect();
    let (_, grad) = ccem_data_loss(&probs, &labels).unwrap();
    // Every labelled entry plus a spread of entries the loss ignores.
    let mut coords: Vec<usize> = labels.iter().enumerate().map(|(c, &y)| y * t + c).collect();
    coords.truncate(250);
    coords.extend(pick(k * t, 50, &mut rng));
    fd_check(
        |v| ccem_data_loss(&reshape(k, t, v), &labels).unwrap().0,
        probs.as_slice(),
        grad.as_slice(),
        &coords,
    )
}

pub fn logdet_f_check(seed: u64) -> FdReport {
    let mut rng = Rng::new(seed);
    let (k, b, lambda) = (3, 100, 0.7);
    let f = random_simplex_columns(k, b, &mut rng);
    let (_, grad) = reg_logdet_f(&f, lambda, DEFAULT_RIDGE).unwrap();
    let coords = pick(k * b, 300, &mut rng);
    fd_check(
        |v| reg_logdet_f(&reshape(k, b, v), lambda, DEFAULT_RIDGE).unwrap().0,
        f.as_slice(),
        grad.as_slice(),
        &coords,
    )
}

fn random_confusions(k: usize, m: usize, rng: &mut Rng) -> Vec<DenseMatrix> {
    (0..m)
        .map(|_| col_softmax(&random_matrix(k, k, rng).add(&DenseMatrix::identity(k).scale(2.0)).unwrap()).unwrap())
        .collect()
}

pub fn logdet_w_check(seed: u64) -> FdReport {
    let mut rng = Rng::new(seed);
    let (k, m, lambda) = (3, 25, 0.3);
    let a = random_confusions(k, m, &mut rng);
    let (_, grads) = reg_logdet_w(&a, lambda, DEFAULT_RIDGE).unwrap();
    let x: Vec<f64> = a.iter().flat_map(|b| b.as_slice().to_vec()).collect();
    let g: Vec<f64> = grads.iter().flat_map(|b| b.as_slice().to_vec()).collect();
    let coords = pick(x.len(), 225, &mut rng);
    fd_check(
        |v| reg_logdet_w(&split_blocks(k, v), lambda, DEFAULT_RIDGE).unwrap().0,
        &x,
        &g,
        &coords,
    )
}

pub fn trace_check(seed: u64) -> FdReport {
    let mut rng = Rng::new(seed);
    let (k, m, lambda) = (3, 25, 0.05);
    let a = random_confusions(k, m, &mut rng);
    let (_, grads) = reg_trace(&a, lambda);
    let x: Vec<f64> = a.iter().flat_map(|b| b.as_slice().to_vec()).collect();
    let g: Vec<f64> = grads.iter().flat_map(|b| b.as_slice().to_vec()).collect();
    let coords = pick(x.len(), 225, &mut rng);
    fd_check(|v| reg_trace(&split_blocks(k, v), lambda).0, &x, &g, &coords)
}

pub fn oracle_kl_check(seed: u64) -> FdReport {
    let mut rng = Rng::new(seed);
    let (k, t) = (3, 100);
    let target = random_simplex_columns(k, t, &mut rng);
    let probs = random_simplex_columns(k, t, &mut rng);
    let (_, grad) = oracle_kl_loss(&target, &probs).unwrap();
    let coords = pick(k * t, 300, &mut rng);
    fd_check(
        |v| oracle_kl_loss(&target, &reshape(k, t, v)).unwrap().0,
        probs.as_slice(),
        grad.as_slice(),
        &coords,
    )
}

fn flat_params(model: &mut CrowdModel) -> Vec<f64> {
    let mut out = Vec::new();
    model
        .apply(|ts| {
            for t in ts.iter() {
                out.extend_from_slice(t);
            }
            Ok(())
        })
        .unwrap();
    out
}

fn with_params(model: &CrowdModel, v: &[f64]) -> CrowdModel {
    let mut m = model.clone();
    m.apply(|ts| {
        let mut off = 0;
        for t in ts.iter_mut() {
            let n = t.len();
            t.copy_from_slice(&v[off..off + n]);
            off += n;
        }
        Ok(())
    })
    .unwrap();
    m
}

/// Full CCEM objective with both volume regularizers, through every layer.
pub fn model_check(seed: u64) -> FdReport {
    let mut rng = Rng::new(seed);
    let (d, k, m, b) = (4, 3, 4, 12);
    let mut model = init_model(d, k, m, &[12, 10], 1.0, seed).unwrap();
    // Move the confusion logits away from the symmetric initialization.
    let x0 = flat_params(&mut model);
    let perturbed: Vec<f64> = x0.iter().map(|v| v + 0.3 * rng.normal()).collect();
    let model = with_params(&model, &perturbed);
    let x = random_matrix(d, b, &mut rng);
    let mut pairs = Vec::new();
    let mut labels = Vec::new();
    for col in 0..b {
        for a in 0..m {
            if rng.bernoulli(0.6) {
                pairs.push((col, a));
                labels.push(rng.below(k));
            }
        }
    }
    let f_reg = RegularizerSpec::new(RegularizerKind::LogdetF, 0.2);
    let w_reg = RegularizerSpec::new(RegularizerKind::LogdetW, 0.1);
    let loss = |mdl: &CrowdModel| {
        let fwd = crowd_forward(mdl, &x, &pairs).unwrap();
        let (data, d_probs) = ccem_data_loss(&fwd.probs, &labels).unwrap();
        let (rf, ef) = f_reg.evaluate(fwd.outputs(), mdl.confusions()).unwrap();
        let (rw, ew) = w_reg.evaluate(fwd.outputs(), mdl.confusions()).unwrap();
        (data + rf + rw, fwd, d_probs, ef, ew)
    };
    let (_, fwd, d_probs, ef, ew) = loss(&model);
    let extra = geocrowd::model::ExtraGrads {
        outputs: ef.outputs,
        confusions: ew.confusions,
    };
    let grads = backward(&model, &fwd, &d_probs, &extra).unwrap();
    let g: Vec<f64> = grads.tensors().iter().flat_map(|t| t.to_vec()).collect();
    let mut base = model.clone();
    let x_flat = flat_params(&mut base);
    assert_eq!(g.len(), x_flat.len());
    let coords = pick(x_flat.len(), 220, &mut rng);
    fd_check(|v| loss(&with_params(&model, v)).0, &x_flat, &g, &coords)
}

/// Every permutation of `0..k` in lexicographic order.
pub fn permutations(k: usize) -> Vec<Vec<usize>> {
    fn rec(cur: &mut Vec<usize>, used: &mut Vec<bool>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == used.len() {
            out.push(cur.clone());
            return;
        }
        for i in 0..used.len() {
            if !used[i] {
                used[i] = true;
                cur.push(i);
                rec(cur, used, out);
                cur.pop();
                used[i] = false;
            }
        }
    }
    let mut out = Vec::new();
    rec(&mut Vec::new(), &mut vec![false; k], &mut out);
    out
}

/// `A·Π` where column `j` of the result is column `perm[j]` of `a`.
pub fn permute_columns(a: &DenseMatrix, perm: &[usize]) -> DenseMatrix {
    DenseMatrix::from_fn(a.rows(), a.cols(), |r, c| a[(r, perm[c])])
}

/// Row `j` of the result is row `perm[j]` of `a`.
pub fn permute_rows(a: &DenseMatrix, perm: &[usize]) -> DenseMatrix {
    DenseMatrix::from_fn(a.rows(), a.cols(), |r, c| a[(perm[r], c)])
}
