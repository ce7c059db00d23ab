mod common;

use common::*;
use geocrowd::numerics::{DenseMatrix, Rng};
use geocrowd::objective::{crowdlayer_loss, reg_logdet_f, reg_logdet_w, DEFAULT_RIDGE};

fn assert_fd(name: &str, report: FdReport) {
    assert!(report.coordinates >= 200, "{name}: only {} coordinates", report.coordinates);
    assert!(
        report.passed(),
        "{name}: max relative error {:e} at coordinate {}",
        report.max_rel_error,
        report.worst
    );
}

#[test]
fn ccem_gradient_matches_finite_differences() {
    for seed in 0..3 {
        assert_fd("ccem", ccem_check(seed));
    }
}

#[test]
fn logdet_f_gradient_matches_finite_differences() {
    for seed in 0..3 {
        assert_fd("logdet_f", logdet_f_check(seed));
    }
}

#[test]
fn logdet_w_gradient_matches_finite_differences() {
    for seed in 0..3 {
        assert_fd("logdet_w", logdet_w_check(seed));
    }
}

#[test]
fn trace_gradient_matches_finite_differences() {
    assert_fd("trace", trace_check(0));
}

#[test]
fn oracle_kl_gradient_matches_finite_differences() {
    for seed in 0..3 {
        assert_fd("oracle_kl", oracle_kl_check(seed));
    }
}

#[test]
fn full_model_gradient_matches_finite_differences() {
    for seed in 0..3 {
        assert_fd("model", model_check(seed));
    }
}

#[test]
fn crowdlayer_gradient_matches_finite_differences() {
    let mut rng = Rng::new(9);
    let (k, t) = (3, 80);
    let products = random_simplex_columns(k, t, &mut rng);
    let labels: Vec<usize> = (0..t).map(|_| rng.below(k)).collect();
    let (_, grad) = crowdlayer_loss(&products, &labels).unwrap();
    let report = fd_check(
        |v| crowdlayer_loss(&DenseMatrix::from_vec(k, t, v.to_vec()).unwrap(), &labels).unwrap().0,
        products.as_slice(),
        grad.as_slice(),
        &(0..k * t).collect::<Vec<_>>(),
    );
    assert_fd("crowdlayer", report);
}

#[test]
fn logdet_f_rank_one_penalty_grows_as_ridge_shrinks() {
    let f = DenseMatrix::from_fn(3, 10, |_, _| 1.0 / 3.0);
    let mut last = f64::NEG_INFINITY;
    for ridge in [1e-2, 1e-4, 1e-6, 1e-8] {
        let (v, _) = reg_logdet_f(&f, 1.0, ridge).unwrap();
        // Eigenvalues of F Fᵀ + εI are 10/3 + ε and ε (twice).
        let expected = -((10.0 / 3.0 + ridge).ln() + 2.0 * ridge.ln());
        assert!((v - expected).abs() < 1e-6 * expected.abs().max(1.0), "{v} vs {expected}");
        assert!(v > last);
        last = v;
    }
}

#[test]
fn logdet_w_uniform_annotators_is_rank_one() {
    let k = 3;
    let u = DenseMatrix::filled(k, k, 1.0 / k as f64);
    let m = 4;
    let mut last = f64::NEG_INFINITY;
    for ridge in [1e-2, 1e-5, 1e-8] {
        let (v, _) = reg_logdet_w(&vec![u.clone(); m], 1.0, ridge).unwrap();
        // WᵀW = (M/K)·𝟙𝟙ᵀ has eigenvalues M and 0 (twice).
        let expected = -((m as f64 + ridge).ln() + 2.0 * ridge.ln());
        assert!((v - expected).abs() < 1e-6 * expected.abs());
        assert!(v > last);
        last = v;
    }
}

#[test]
fn duplicating_an_annotator_matches_direct_evaluation() {
    let mut rng = Rng::new(4);
    let a: Vec<DenseMatrix> = (0..3).map(|_| random_simplex_columns(3, 3, &mut rng)).collect();
    let mut dup = a.clone();
    dup.push(a[1].clone());
    let (v, _) = reg_logdet_w(&dup, 0.5, DEFAULT_RIDGE).unwrap();
    let mut gram = DenseMatrix::zeros(3, 3);
    for b in &dup {
        gram.axpy(1.0, &b.transpose().matmul(b).unwrap()).unwrap();
    }
    let direct = {
        let g = nalgebra::DMatrix::from_fn(3, 3, |r, c| gram[(r, c)] + if r == c { DEFAULT_RIDGE } else { 0.0 });
        g.determinant().ln()
    };
    assert!((v + 0.5 * direct).abs() < 1e-9);
}
