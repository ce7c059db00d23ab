use geocrowd::baselines::{dawid_skene_em, majority_vote, EmOptions};
use geocrowd::geometry::{align_permutation, label_accuracy};
use geocrowd::numerics::{DenseMatrix, Rng};
use geocrowd::simulator::{Annotation, AnnotationSet};

/// Labels drawn from `truth[m](:, y_n)` for every (item, annotator) pair.
fn planted(truth: &[DenseMatrix], labels: &[usize], seed: u64) -> AnnotationSet {
    let k = truth[0].rows();
    let mut rng = Rng::new(seed);
    let mut triples = Vec::new();
    for (n, &y) in labels.iter().enumerate() {
        for (m, a) in truth.iter().enumerate() {
            triples.push(Annotation {
                item: n,
                annotator: m,
                label: rng.categorical(&a.column(y)),
            });
        }
    }
    AnnotationSet::new(labels.len(), truth.len(), k, triples).unwrap()
}

fn random_labels(n: usize, k: usize, seed: u64) -> Vec<usize> {
    let mut rng = Rng::new(seed);
    (0..n).map(|_| rng.below(k)).collect()
}

#[test]
fn planted_diagonal_confusions_are_recovered() {
    let a = DenseMatrix::from_rows(&[vec![0.9, 0.1], vec![0.1, 0.9]]).unwrap();
    let truth = vec![a; 3];
    let labels = random_labels(2000, 2, 0);
    let ann = planted(&truth, &labels, 1);
    let fit = dawid_skene_em(&ann, 2, 3, &EmOptions::default()).unwrap();
    let mse = align_permutation(&fit.confusions, &truth).unwrap().confusion_mse();
    assert!(mse <= 0.01, "mse {mse}");
    let items: Vec<usize> = (0..2000).collect();
    let acc = label_accuracy(&fit.posteriors.hard_labels(), &labels, &items);
    assert!(acc >= 0.95, "accuracy {acc}");
    for w in fit.objective_trace.windows(2) {
        assert!(w[1] >= w[0] - 1e-9, "{} -> {}", w[0], w[1]);
    }
}

#[test]
fn objective_never_decreases_on_sparse_asymmetric_data() {
    let mut rng = Rng::new(3);
    let truth: Vec<DenseMatrix> = (0..6)
        .map(|_| {
            let cols: Vec<Vec<f64>> = (0..4)
                .map(|j| {
                    let mut c = rng.dirichlet(&[1.0; 4]);
                    c[j] += 1.0;
                    let s: f64 = c.iter().sum();
                    c.iter().map(|v| v / s).collect()
                })
                .collect();
            DenseMatrix::from_columns(&cols).unwrap()
        })
        .collect();
    let labels = random_labels(600, 4, 4);
    let full = planted(&truth, &labels, 5);
    let kept: Vec<Annotation> = full.triples().iter().copied().filter(|_| rng.bernoulli(0.3)).collect();
    let ann = AnnotationSet::new(600, 6, 4, kept).unwrap();
    let fit = dawid_skene_em(&ann, 4, 6, &EmOptions::default()).unwrap();
    assert!(fit.objective_trace.len() >= 2);
    for w in fit.objective_trace.windows(2) {
        assert!(w[1] >= w[0] - 1e-9, "{} -> {}", w[0], w[1]);
    }
}

#[test]
fn uniform_spammers_leave_the_prior() {
    // Every label combination appears equally often, so the empirical joint is
    // exactly independent and uniform across annotators.
    let (m, k, reps) = (3usize, 3usize, 20usize);
    let combos = k.pow(m as u32);
    let n = combos * reps;
    let mut triples = Vec::new();
    for item in 0..n {
        let mut code = item % combos;
        for annotator in 0..m {
            triples.push(Annotation {
                item,
                annotator,
                label: code % k,
            });
            code /= k;
        }
    }
    let ann = AnnotationSet::new(n, m, k, triples).unwrap();
    let opts = EmOptions {
        max_iters: 3000,
        ..EmOptions::default()
    };
    let fit = dawid_skene_em(&ann, k, m, &opts).unwrap();
    let u = DenseMatrix::filled(k, k, 1.0 / k as f64);
    for a in &fit.confusions {
        assert!(a.max_abs_diff(&u) <= 0.01, "{a:?}");
    }
    for item in 0..n {
        for c in 0..k {
            assert!((fit.posteriors.q[(c, item)] - fit.priors[c]).abs() <= 0.05);
        }
    }
    for w in fit.objective_trace.windows(2) {
        assert!(w[1] >= w[0] - 1e-9);
    }
}

#[test]
fn relabeling_classes_permutes_every_output() {
    let mut rng = Rng::new(11);
    let truth: Vec<DenseMatrix> = (0..4)
        .map(|_| {
            DenseMatrix::from_columns(&(0..3).map(|j| {
                let mut c = rng.dirichlet(&[1.0; 3]);
                c[j] += 1.5;
                let s: f64 = c.iter().sum();
                c.iter().map(|v| v / s).collect()
            }).collect::<Vec<_>>())
            .unwrap()
        })
        .collect();
    let labels = random_labels(400, 3, 12);
    let ann = planted(&truth, &labels, 13);
    let sigma = [2usize, 0, 1];
    let relabeled = AnnotationSet::new(
        400,
        4,
        3,
        ann.triples()
            .iter()
            .map(|t| Annotation {
                label: sigma[t.label],
                ..*t
            })
            .collect(),
    )
    .unwrap();
    let opts = EmOptions::default();
    let a = dawid_skene_em(&ann, 3, 4, &opts).unwrap();
    let b = dawid_skene_em(&relabeled, 3, 4, &opts).unwrap();
    for n in 0..400 {
        for (k, &s) in sigma.iter().enumerate() {
            assert!((a.posteriors.q[(k, n)] - b.posteriors.q[(s, n)]).abs() <= 1e-9);
        }
    }
    for (x, y) in a.confusions.iter().zip(&b.confusions) {
        for r in 0..3 {
            for c in 0..3 {
                assert!((x[(r, c)] - y[(sigma[r], sigma[c])]).abs() <= 1e-9);
            }
        }
    }
    let mv_a = majority_vote(&ann, 3);
    let mv_b = majority_vote(&relabeled, 3);
    for n in 0..400 {
        for (k, &s) in sigma.iter().enumerate() {
            assert_eq!(mv_a.q[(k, n)], mv_b.q[(s, n)]);
        }
    }
}

#[test]
fn baselines_are_deterministic() {
    let a = DenseMatrix::from_rows(&[vec![0.8, 0.3], vec![0.2, 0.7]]).unwrap();
    let ann = planted(&[a.clone(), a], &random_labels(300, 2, 1), 2);
    let x = dawid_skene_em(&ann, 2, 2, &EmOptions::default()).unwrap();
    let y = dawid_skene_em(&ann, 2, 2, &EmOptions::default()).unwrap();
    assert_eq!(x.posteriors, y.posteriors);
    assert_eq!(x.objective_trace, y.objective_trace);
    assert_eq!(majority_vote(&ann, 2), majority_vote(&ann, 2));
}
