mod common;

use common::random_simplex_columns;
use geocrowd::geometry::{ssc_check, Verdict};
use geocrowd::numerics::{DenseMatrix, Rng};
use geocrowd::simulator::{
    build_p, gen_confusions, gen_mixture_dataset, sample_annotations, ConfusionEnsemble, ConfusionSpec, Dataset,
    MixtureSpec, Provenance, Split,
};

fn mixture(k: usize, d: usize, n: usize, separation: f64, seed: u64) -> MixtureSpec {
    MixtureSpec {
        classes: k,
        dim: d,
        n_train: n,
        n_val: 0,
        n_test: 0,
        separation,
        weights: None,
        std_dev: 1.0,
        seed,
    }
}

/// Dataset whose posteriors are the one-hot true labels.
fn one_hot(labels: &[usize], k: usize) -> Dataset {
    let n = labels.len();
    let f = DenseMatrix::from_fn(k, n, |r, c| (labels[c] == r) as u8 as f64);
    Dataset::new(
        DenseMatrix::zeros(1, n),
        labels.to_vec(),
        Some(f),
        vec![Split::Train; n],
        k,
    )
    .unwrap()
}

#[test]
fn well_separated_posteriors_are_near_anchors() {
    let ds = gen_mixture_dataset(&mixture(3, 2, 1000, 10.0, 0)).unwrap();
    let f = ds.soft_labels.as_ref().unwrap();
    let worst = (0..ds.num_items())
        .map(|n| {
            (0..3)
                .map(|k| {
                    (0..3)
                        .map(|r| (f[(r, n)] - (r == k) as u8 as f64).powi(2))
                        .sum::<f64>()
                        .sqrt()
                })
                .fold(f64::INFINITY, f64::min)
        })
        .fold(0.0, f64::max);
    assert!(worst <= 0.01, "max distance to nearest vertex {worst}");
}

#[test]
fn well_separated_posteriors_satisfy_ssc() {
    for seed in 0..3 {
        let ds = gen_mixture_dataset(&mixture(3, 2, 500, 10.0, seed)).unwrap();
        let v = ssc_check(&ds.soft_labels.as_ref().unwrap().transpose(), 1000, 1e-6, seed).unwrap();
        assert_eq!(v.verdict, Verdict::Pass, "seed {seed}: {v:?}");
    }
}

#[test]
fn label_frequencies_match_mixture_weights() {
    let mut spec = mixture(4, 3, 20_000, 2.0, 5);
    spec.weights = Some(vec![0.1, 0.2, 0.3, 0.4]);
    let ds = gen_mixture_dataset(&spec).unwrap();
    let n = ds.num_items() as f64;
    for (k, w) in [0.1, 0.2, 0.3, 0.4].into_iter().enumerate() {
        let count = ds.labels.iter().filter(|&&y| y == k).count() as f64;
        let sd = (n * w * (1.0 - w)).sqrt();
        assert!((count - n * w).abs() <= 3.0 * sd, "class {k}: {count} vs {}", n * w);
    }
}

#[test]
fn labels_are_consistent_with_posteriors() {
    // The label is drawn from the component, so its posterior is the true-class
    // probability; on average it must exceed 1/K at moderate separation.
    let ds = gen_mixture_dataset(&mixture(3, 4, 5000, 3.0, 2)).unwrap();
    let f = ds.soft_labels.as_ref().unwrap();
    let mean: f64 = (0..ds.num_items()).map(|n| f[(ds.labels[n], n)]).sum::<f64>() / ds.num_items() as f64;
    let mean_prob_sq: f64 = (0..ds.num_items())
        .map(|n| (0..3).map(|r| f[(r, n)].powi(2)).sum::<f64>())
        .sum::<f64>()
        / ds.num_items() as f64;
    // E[f_y(x)] = E[Σ_k f_k(x)²] when y | x ~ f(x).
    assert!((mean - mean_prob_sq).abs() < 0.01, "{mean} vs {mean_prob_sq}");
}

#[test]
fn generated_confusions_are_column_stochastic() {
    let specs = [
        ConfusionSpec::HammerSpammer { gamma: 0.5, hammers: 3 },
        ConfusionSpec::Specialist {
            xi: 0.05,
            others_alpha: 1.0,
            others_boost: 0.3,
        },
        ConfusionSpec::Dirichlet {
            alpha: 0.5,
            diagonal_boost: 0.2,
        },
    ];
    for spec in &specs {
        for seed in 0..5 {
            let ens = gen_confusions(spec, 4, 8, seed).unwrap();
            for a in &ens.matrices {
                for s in a.column_sums() {
                    assert!((s - 1.0).abs() <= 1e-12);
                }
                assert!(a.as_slice().iter().all(|&v| v >= 0.0));
            }
        }
    }
}

#[test]
fn specialist_rows_are_within_xi_of_canonical() {
    let xi = 0.05;
    for seed in 0..5 {
        let ens = gen_confusions(
            &ConfusionSpec::Specialist {
                xi,
                others_alpha: 1.0,
                others_boost: 0.0,
            },
            4,
            10,
            seed,
        )
        .unwrap();
        let mut covered = [false; 4];
        for (a, prov) in ens.matrices.iter().zip(&ens.provenance) {
            if let Provenance::Specialist(k) = prov {
                covered[*k] = true;
                let dist: f64 = (0..4)
                    .map(|j| (a[(*k, j)] - (j == *k) as u8 as f64).powi(2))
                    .sum::<f64>()
                    .sqrt();
                assert!(dist <= xi, "class {k}: {dist}");
            }
        }
        assert!(covered.iter().all(|&c| c));
    }
}

#[test]
fn spammer_maps_everything_to_uniform() {
    let ens = gen_confusions(&ConfusionSpec::HammerSpammer { gamma: 0.0, hammers: 0 }, 3, 2, 0).unwrap();
    let mut rng = Rng::new(1);
    let f = random_simplex_columns(3, 5, &mut rng);
    let p = build_p(&ens, &f).unwrap();
    assert!(p.as_slice().iter().all(|&v| (v - 1.0 / 3.0).abs() <= 1e-15));
}

#[test]
fn observation_count_is_binomial() {
    let ds = gen_mixture_dataset(&mixture(3, 2, 1000, 2.0, 0)).unwrap();
    let ens = gen_confusions(&ConfusionSpec::Dirichlet { alpha: 1.0, diagonal_boost: 0.0 }, 3, 20, 0).unwrap();
    let (n, m, p): (f64, f64, f64) = (1000.0, 20.0, 0.1);
    let sd = (m * n * p * (1.0 - p)).sqrt();
    for seed in 0..5 {
        let a = sample_annotations(&ds, &ens, p, seed).unwrap();
        assert!((a.len() as f64 - 2000.0).abs() <= 3.0 * sd, "|S| = {}", a.len());
    }
}

#[test]
fn masks_from_disjoint_seeds_are_independent() {
    let ds = gen_mixture_dataset(&mixture(3, 2, 1000, 2.0, 0)).unwrap();
    let ens = gen_confusions(&ConfusionSpec::Dirichlet { alpha: 1.0, diagonal_boost: 0.0 }, 3, 20, 0).unwrap();
    let p = 0.3;
    let a = sample_annotations(&ds, &ens, p, 1).unwrap();
    let b = sample_annotations(&ds, &ens, p, 2).unwrap();
    let mask = |s: &geocrowd::simulator::AnnotationSet| {
        let mut v = vec![false; 1000 * 20];
        for t in s.triples() {
            v[t.item * 20 + t.annotator] = true;
        }
        v
    };
    let (ma, mb) = (mask(&a), mask(&b));
    let overlap = ma.iter().zip(&mb).filter(|(x, y)| **x && **y).count() as f64;
    let total = 20_000.0;
    let q = p * p;
    let sd = (total * q * (1.0 - q)).sqrt();
    assert!((overlap - total * q).abs() <= 3.0 * sd, "overlap {overlap}");
}

#[test]
fn empirical_confusions_converge() {
    let k = 3;
    let n = 15_000;
    let labels: Vec<usize> = (0..n).map(|i| i % k).collect();
    let ds = one_hot(&labels, k);
    let ens = gen_confusions(&ConfusionSpec::Dirichlet { alpha: 1.0, diagonal_boost: 0.5 }, k, 3, 7).unwrap();
    let ann = sample_annotations(&ds, &ens, 1.0, 3).unwrap();
    for (m, truth) in ens.matrices.iter().enumerate() {
        let mut counts = DenseMatrix::zeros(k, k);
        for t in ann.triples().iter().filter(|t| t.annotator == m) {
            counts[(t.label, labels[t.item])] += 1.0;
        }
        let sums = counts.column_sums();
        assert!(sums.iter().all(|&s| s >= 5000.0));
        let est = DenseMatrix::from_fn(k, k, |r, c| counts[(r, c)] / sums[c]);
        assert!(est.max_abs_diff(truth) <= 0.05, "annotator {m}");
    }
}

#[test]
fn perfect_annotators_on_one_hot_posteriors_copy_labels() {
    let labels: Vec<usize> = (0..50).map(|i| (i * 7) % 3).collect();
    let ds = one_hot(&labels, 3);
    let ens = ConfusionEnsemble::new(vec![DenseMatrix::identity(3); 2], vec![Provenance::Hammer; 2]).unwrap();
    let ann = sample_annotations(&ds, &ens, 1.0, 0).unwrap();
    assert_eq!(ann.len(), 100);
    assert!(ann.triples().iter().all(|t| t.label == labels[t.item]));
}

#[test]
fn only_training_items_are_annotated() {
    let mut spec = mixture(3, 2, 100, 3.0, 0);
    spec.n_val = 40;
    spec.n_test = 60;
    let ds = gen_mixture_dataset(&spec).unwrap();
    let ens = gen_confusions(&ConfusionSpec::Dirichlet { alpha: 1.0, diagonal_boost: 0.0 }, 3, 4, 0).unwrap();
    let ann = sample_annotations(&ds, &ens, 1.0, 0).unwrap();
    assert_eq!(ann.len(), 400);
    assert!(ann.triples().iter().all(|t| ds.splits[t.item] == Split::Train));
}

#[test]
fn stacked_product_matches_blocks() {
    let mut rng = Rng::new(12);
    let ens = gen_confusions(&ConfusionSpec::Dirichlet { alpha: 1.0, diagonal_boost: 0.0 }, 3, 4, 2).unwrap();
    let f = random_simplex_columns(3, 6, &mut rng);
    let p = build_p(&ens, &f).unwrap();
    assert_eq!(p.shape(), (12, 6));
    for (m, a) in ens.matrices.iter().enumerate() {
        let block = a.matmul(&f).unwrap();
        for r in 0..3 {
            for c in 0..6 {
                assert!((p[(m * 3 + r, c)] - block[(r, c)]).abs() <= 1e-15);
            }
        }
        for s in block.column_sums() {
            assert!((s - 1.0).abs() <= 1e-12);
        }
    }
}
