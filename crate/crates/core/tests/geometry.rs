mod common;

use common::*;
use geocrowd::geometry::{align_permutation, alignment_with, evaluate, ssc_check, Verdict};
use geocrowd::model::{init_model, ClassifierParams, CrowdModel, Layer};
use geocrowd::numerics::{DenseMatrix, Rng};
use geocrowd::simulator::{gen_confusions, gen_mixture_dataset, ConfusionSpec, Dataset, MixtureSpec, Split};

fn dataset(weights: Option<Vec<f64>>, seed: u64) -> Dataset {
    gen_mixture_dataset(&MixtureSpec {
        classes: 3,
        dim: 2,
        n_train: 50,
        n_val: 0,
        n_test: 4000,
        separation: 2.0,
        weights,
        std_dev: 1.0,
        seed,
    })
    .unwrap()
}

fn positive_confusions(m: usize, seed: u64) -> Vec<DenseMatrix> {
    gen_confusions(
        &ConfusionSpec::Dirichlet {
            alpha: 1.0,
            diagonal_boost: 1.0,
        },
        3,
        m,
        seed,
    )
    .unwrap()
    .matrices
}

/// Linear softmax model reproducing the dataset's true posteriors, fitted
/// exactly from the log-odds `log f_j − log f_0`, which are affine in `x`.
fn bayes_model(ds: &Dataset, confusions: &[DenseMatrix]) -> CrowdModel {
    let f = ds.soft_labels.as_ref().unwrap();
    let d = ds.dim();
    let items: Vec<usize> = (0..ds.num_items()).collect();
    let design = nalgebra::DMatrix::from_fn(items.len(), d + 1, |i, c| {
        if c < d {
            ds.features[(c, items[i])]
        } else {
            1.0
        }
    });
    let svd = design.clone().svd(true, true);
    let mut weight = DenseMatrix::zeros(3, d);
    let mut bias = vec![0.0; 3];
    for j in 1..3 {
        let target = nalgebra::DVector::from_fn(items.len(), |i, _| (f[(j, items[i])] / f[(0, items[i])]).ln());
        let coef = svd.solve(&target, 1e-14).unwrap();
        for c in 0..d {
            weight[(j, c)] = coef[c];
        }
        bias[j] = coef[d];
    }
    let classifier = ClassifierParams::new(vec![Layer { weight, bias }]).unwrap();
    let logits = confusions.iter().map(|a| a.map(f64::ln)).collect();
    CrowdModel::new(classifier, logits, 0.0, 0).unwrap()
}

#[test]
fn truth_model_reaches_bayes_accuracy_with_zero_errors() {
    let ds = dataset(None, 1);
    let truth = positive_confusions(4, 1);
    let model = bayes_model(&ds, &truth);
    let m = evaluate(&model, &ds, Some(&truth), None).unwrap();
    assert_eq!(m.test_accuracy, m.bayes_accuracy);
    assert_eq!(m.aligned_test_accuracy, m.bayes_accuracy);
    assert!(m.confusion_mse.unwrap() <= 1e-20);
    assert!(m.predictor_error.unwrap() <= 1e-16);
    assert_eq!(m.permutation, Some(vec![0, 1, 2]));
    // Bayes accuracy of a well-mixed 3-class problem is far above chance.
    assert!(m.bayes_accuracy.unwrap() > 0.7);
}

#[test]
fn uniform_model_scores_the_largest_prior() {
    let ds = dataset(Some(vec![0.5, 0.3, 0.2]), 2);
    let model = init_model(2, 3, 1, &[], 0.0, 0).unwrap();
    let zeroed = ClassifierParams::new(vec![Layer {
        weight: DenseMatrix::zeros(3, 2),
        bias: vec![0.0; 3],
    }])
    .unwrap();
    let mut model = model;
    model.set_classifier(zeroed).unwrap();
    let m = evaluate(&model, &ds, None, None).unwrap();
    let test = ds.indices(Split::Test);
    let share = test.iter().filter(|&&n| ds.labels[n] == 0).count() as f64 / test.len() as f64;
    assert_eq!(m.test_accuracy, Some(share));
    assert!((share - 0.5).abs() < 0.03);
    assert!(m.confusion_mse.is_none() && m.aligned_test_accuracy.is_none());
}

#[test]
fn permuted_model_is_wrong_raw_and_right_aligned() {
    let ds = dataset(None, 3);
    let truth = positive_confusions(4, 3);
    let base = bayes_model(&ds, &truth);
    let perm = [1usize, 2, 0];
    let l = &base.classifier().layers()[0];
    let classifier = ClassifierParams::new(vec![Layer {
        weight: permute_rows(&l.weight, &perm),
        bias: perm.iter().map(|&p| l.bias[p]).collect(),
    }])
    .unwrap();
    let logits = base.confusion_logits().iter().map(|b| permute_columns(b, &perm)).collect();
    let model = CrowdModel::new(classifier, logits, 0.0, 0).unwrap();
    let m = evaluate(&model, &ds, Some(&truth), None).unwrap();
    assert!(m.test_accuracy.unwrap() <= 1.0 / 3.0, "raw {:?}", m.test_accuracy);
    assert_eq!(m.aligned_test_accuracy, m.bayes_accuracy);
    assert_eq!(m.permutation, Some(perm.to_vec()));
    assert!(m.confusion_mse.unwrap() <= 1e-20);
    assert!(m.predictor_error.unwrap() <= 1e-16);
}

#[test]
fn constructed_permutation_is_recovered() {
    let truth = positive_confusions(5, 4);
    let perm = vec![2usize, 0, 1];
    let est: Vec<DenseMatrix> = truth.iter().map(|a| permute_columns(a, &perm)).collect();
    let r = align_permutation(&est, &truth).unwrap();
    assert_eq!(r.permutation, perm);
    assert!(r.objective <= 1e-28);
}

#[test]
fn noisy_permutation_is_recovered_and_matches_brute_force() {
    let mut rng = Rng::new(5);
    for k in 2..=5 {
        let (m, sigma) = (6, 0.01);
        let truth: Vec<DenseMatrix> = (0..m)
            .map(|_| random_simplex_columns(k, k, &mut rng).add(&DenseMatrix::identity(k)).unwrap().scale(0.5))
            .collect();
        let mut perm: Vec<usize> = (0..k).collect();
        rng.shuffle(&mut perm);
        let est: Vec<DenseMatrix> = truth
            .iter()
            .map(|a| permute_columns(a, &perm).add(&random_matrix(k, k, &mut rng).scale(sigma)).unwrap())
            .collect();
        let r = align_permutation(&est, &truth).unwrap();
        assert_eq!(r.permutation, perm);
        let brute = permutations(k)
            .iter()
            .map(|p| alignment_with(&est, &truth, p).unwrap().objective)
            .fold(f64::INFINITY, f64::min);
        assert!((r.objective - brute).abs() <= 1e-12);
        // Expected squared noise is M·K²·σ².
        let scale = (m * k * k) as f64 * sigma * sigma;
        assert!(r.objective > 0.2 * scale && r.objective < 5.0 * scale, "{} vs {scale}", r.objective);
    }
}

#[test]
fn identity_rows_pass_ssc_exactly() {
    let v = ssc_check(&DenseMatrix::identity(3), 1000, 1e-6, 0).unwrap();
    assert_eq!(v.verdict, Verdict::Pass);
    assert!(v.max_residual <= 1e-8);
    assert_eq!(v.samples, 1000);
}

#[test]
fn uniform_rows_fail_ssc() {
    let v = ssc_check(&DenseMatrix::filled(5, 3, 1.0 / 3.0), 1000, 1e-6, 0).unwrap();
    assert_eq!(v.verdict, Verdict::Fail);
    assert_eq!(v.failures, 1000);
}

fn dirichlet_rows(alpha: f64, seed: u64) -> DenseMatrix {
    let mut rng = Rng::new(seed);
    DenseMatrix::from_rows(&(0..50).map(|_| rng.dirichlet(&[alpha; 3])).collect::<Vec<_>>()).unwrap()
}

#[test]
fn concentrated_dirichlet_rows_fail_ssc() {
    for seed in 0..10 {
        let v = ssc_check(&dirichlet_rows(50.0, seed), 1000, 1e-6, seed).unwrap();
        assert_eq!(v.verdict, Verdict::Fail, "seed {seed}");
    }
}

#[test]
fn spiky_dirichlet_rows_cover_the_cone_up_to_small_residuals() {
    // Rows near the vertices cover every sampled direction to within a
    // residual far below that of concentrated rows.
    for seed in 0..10 {
        let spiky = ssc_check(&dirichlet_rows(0.2, seed), 1000, 1e-6, seed).unwrap();
        let flat = ssc_check(&dirichlet_rows(50.0, seed), 1000, 1e-6, seed).unwrap();
        assert!(spiky.max_residual < 1e-2, "seed {seed}: {}", spiky.max_residual);
        assert!(spiky.max_residual * 10.0 < flat.max_residual);
        assert!(spiky.failures < flat.failures);
    }
}
