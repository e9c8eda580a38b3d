use ndarray::{Array1, Array2};
use proptest::prelude::*;
use shapdbm::boundary_map::{DecisionMap, GridSpec};
use shapdbm::classifier::{NetworkModel, NetworkSpec};
use shapdbm::container::{self, Container};
use shapdbm::dataset::{make_synthetic, split, Dataset, SyntheticKind, SyntheticSpec};
use shapdbm::metrics::{locate_pixels, map_metrics};
use shapdbm::nn::{Activation, Mlp, Output};
use shapdbm::shapley::{base_value, exact_shapley, BackgroundSet};
use shapdbm::tsne::{calibrate, pairwise_affinities, Bounds, Embedding};
use shapdbm::ProbaModel;

fn matrix(rows: usize, cols: usize, lo: f64, hi: f64) -> impl Strategy<Value = Array2<f64>> {
    prop::collection::vec(lo..hi, rows * cols).prop_map(move |v| Array2::from_shape_vec((rows, cols), v).unwrap())
}

fn network(n: usize, hidden: usize, classes: usize) -> impl Strategy<Value = NetworkModel> {
    (any::<u64>(), prop::bool::ANY).prop_map(move |(seed, tanh)| {
        let act = if tanh { Activation::Tanh } else { Activation::Relu };
        NetworkModel::init(&NetworkSpec::new(n, &[hidden], classes, act), seed).unwrap()
    })
}

/// Shapley instance: model, explained input, background.
fn instance() -> impl Strategy<Value = (NetworkModel, Vec<f64>, Array2<f64>)> {
    (2usize..=6, 1usize..=4, 2usize..=4).prop_flat_map(|(n, b, c)| {
        (network(n, 6, c), prop::collection::vec(0.0..1.0f64, n), matrix(b, n, 0.0, 1.0))
    })
}

fn with_first_layer(model: &NetworkModel, edit: impl FnOnce(&mut Array2<f64>)) -> NetworkModel {
    let mlp = model.mlp();
    let mut weights = mlp.weights().to_vec();
    edit(&mut weights[0]);
    let net = Mlp::from_parameters(mlp.hidden(), Output::Softmax, weights, mlp.biases().to_vec()).unwrap();
    NetworkModel::from_mlp(net).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn efficiency_holds_for_exact_values((model, x, bg) in instance()) {
        let bg = BackgroundSet::new(bg).unwrap();
        for target in 0..model.n_classes() {
            let phi = exact_shapley(&model, &x, &bg, target).unwrap();
            let f = model.predict_proba(&x).unwrap()[target];
            let total: f64 = phi.iter().sum::<f64>() + base_value(&model, &bg, target).unwrap();
            prop_assert!((total - f).abs() <= 1e-6, "{total} vs {f}");
        }
    }

    #[test]
    fn ignored_feature_gets_exactly_zero((model, x, bg) in instance(), k in 0usize..6) {
        let k = k % x.len();
        let model = with_first_layer(&model, |w| w.row_mut(k).fill(0.0));
        let bg = BackgroundSet::new(bg).unwrap();
        let target = model.predict_class(&x).unwrap();
        prop_assert_eq!(exact_shapley(&model, &x, &bg, target).unwrap()[k], 0.0);
    }

    #[test]
    fn swapping_features_swaps_attributions((model, x, bg) in instance(), i in 0usize..6, j in 0usize..6) {
        let n = x.len();
        let (i, j) = (i % n, j % n);
        let swapped_model = with_first_layer(&model, |w| {
            let (ri, rj) = (w.row(i).to_owned(), w.row(j).to_owned());
            w.row_mut(i).assign(&rj);
            w.row_mut(j).assign(&ri);
        });
        let mut sx = x.clone();
        sx.swap(i, j);
        let mut sbg = bg.clone();
        for mut row in sbg.rows_mut() {
            row.swap(i, j);
        }
        let bg = BackgroundSet::new(bg).unwrap();
        let sbg = BackgroundSet::new(sbg).unwrap();
        let target = model.predict_class(&x).unwrap();
        let phi = exact_shapley(&model, &x, &bg, target).unwrap();
        let mut expected = phi.clone();
        expected.swap(i, j);
        let got = exact_shapley(&swapped_model, &sx, &sbg, target).unwrap();
        for (a, b) in got.iter().zip(&expected) {
            prop_assert!((a - b).abs() <= 1e-9, "{got:?} vs {expected:?}");
        }
    }

    #[test]
    fn interchangeable_equal_features_share_credit((model, x, bg) in instance()) {
        prop_assume!(x.len() >= 2);
        // Features 0 and 1 enter identically and take equal values everywhere.
        let model = with_first_layer(&model, |w| {
            let r0 = w.row(0).to_owned();
            w.row_mut(1).assign(&r0);
        });
        let mut x = x;
        x[1] = x[0];
        let mut bg = bg;
        for mut row in bg.rows_mut() {
            row[1] = row[0];
        }
        let bg = BackgroundSet::new(bg).unwrap();
        let phi = exact_shapley(&model, &x, &bg, 0).unwrap();
        prop_assert!((phi[0] - phi[1]).abs() <= 1e-12);
    }

    #[test]
    fn probabilities_form_a_distribution(model in (1usize..8, 2usize..6).prop_flat_map(|(n, c)| network(n, 5, c)),
                                          scale in 1e-3..1e3f64, seed in any::<u64>()) {
        let n = model.n_features();
        let mut rng = shapdbm::seed::rng(seed);
        use rand::Rng as _;
        let x: Vec<f64> = (0..n).map(|_| scale * rng.random_range(-1.0..1.0)).collect();
        let p = model.predict_proba(&x).unwrap();
        prop_assert!(p.iter().all(|&v| v >= 0.0));
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() <= 1e-9);
    }

    #[test]
    fn affinities_are_a_symmetric_distribution(x in (12usize..40, 1usize..6).prop_flat_map(|(n, m)| matrix(n, m, -5.0, 5.0)),
                                               frac in 0.05..0.95f64) {
        let perplexity = 1.5 + frac * (x.nrows() as f64 / 3.0 - 1.6);
        let p = pairwise_affinities(x.view(), perplexity).unwrap();
        let n = x.nrows();
        prop_assert!((p.sum() - 1.0).abs() <= 1e-6);
        for i in 0..n {
            prop_assert_eq!(p[[i, i]], 0.0);
            for j in 0..n {
                prop_assert!(p[[i, j]] >= 0.0);
                prop_assert_eq!(p[[i, j]], p[[j, i]]);
            }
        }
        let cal = calibrate(x.view(), perplexity).unwrap();
        for (i, h) in cal.entropies.iter().enumerate() {
            if !cal.saturated.contains(&i) {
                prop_assert!((h.exp2() - perplexity).abs() <= 1e-3 * perplexity);
            }
        }
    }

    #[test]
    fn affinities_ignore_translation(x in matrix(20, 3, 0.0, 1.0), shift in prop::collection::vec(-100.0..100.0f64, 3)) {
        let moved = &x + &Array1::from(shift);
        let a = pairwise_affinities(x.view(), 5.0).unwrap();
        let b = pairwise_affinities(moved.view(), 5.0).unwrap();
        for (u, v) in a.iter().zip(&b) {
            prop_assert!((u - v).abs() <= 1e-9);
        }
    }

    #[test]
    fn map_metrics_ignore_sample_order(labels in prop::collection::vec(0usize..3, 16),
                                       points in matrix(30, 2, 0.0, 1.0),
                                       predicted in prop::collection::vec(0usize..3, 30),
                                       perm_seed in any::<u64>()) {
        let map = DecisionMap {
            spec: GridSpec { resolution: 4, samples_per_pixel: 1, bounds: Bounds { xmin: 0.0, xmax: 1.0, ymin: 0.0, ymax: 1.0 }, seed: 0 },
            classes: 3,
            labels: labels.clone(),
            confidence: vec![1.0; 16],
        };
        let emb = Embedding::new(points.clone()).unwrap();
        let m = map_metrics(&map, &emb, &predicted).unwrap();

        let mut order: Vec<usize> = (0..30).collect();
        use rand::seq::SliceRandom;
        order.shuffle(&mut shapdbm::seed::rng(perm_seed));
        let shuffled = Embedding::new(points.select(ndarray::Axis(0), &order)).unwrap();
        let shuffled_pred: Vec<usize> = order.iter().map(|&i| predicted[i]).collect();
        prop_assert_eq!(&map_metrics(&map, &shuffled, &shuffled_pred).unwrap(), &m);

        // MA equals the per-class correct counts over N, and MR numerators
        // times class sizes add back up to the same total.
        let pixels = locate_pixels(&emb, &map.spec).unwrap();
        let correct = pixels.iter().zip(&predicted).filter(|((r, c), &p)| map.label(*r, *c) == p).count();
        prop_assert_eq!(m.accuracy, correct as f64 / 30.0);
        let from_recall: f64 = (0..3)
            .map(|c| m.recall[c] * predicted.iter().filter(|&&p| p == c).count() as f64)
            .sum();
        prop_assert!((from_recall - correct as f64).abs() < 1e-9);

        // Overwriting every covered pixel with its sample's prediction gives
        // a perfect score when each pixel holds a single prediction.
        let mut owner = vec![None; 16];
        let mut clean = true;
        for (&(r, c), &p) in pixels.iter().zip(&predicted) {
            match owner[r * 4 + c] {
                Some(q) if q != p => clean = false,
                _ => owner[r * 4 + c] = Some(p),
            }
        }
        if clean {
            let mut perfect = map.clone();
            for (cell, o) in owner.iter().enumerate() {
                if let Some(p) = o {
                    perfect.labels[cell] = *p;
                }
            }
            prop_assert_eq!(map_metrics(&perfect, &emb, &predicted).unwrap().accuracy, 1.0);
        }
    }

    #[test]
    fn split_halves_partition_the_data(per_class in 2usize..30, classes in 2usize..5, frac in 0.1..0.9f64, seed in any::<u64>()) {
        let d = make_synthetic(&SyntheticSpec { kind: SyntheticKind::Blobs, per_class, features: 3, classes, noise: 0.1, nuisance: 0, seed }).unwrap();
        let n = d.len() as f64;
        if n * frac < 1.0 || n * (1.0 - frac) < 1.0 {
            prop_assert!(split(&d, frac, seed).is_err());
            return Ok(());
        }
        let s = split(&d, frac, seed).unwrap();
        let mut all: Vec<usize> = s.train_indices.iter().chain(&s.test_indices).copied().collect();
        all.sort_unstable();
        prop_assert_eq!(all, (0..d.len()).collect::<Vec<_>>());
        prop_assert!(s.train.features().iter().all(|v| (0.0..=1.0).contains(v)));
        prop_assert_eq!(s.test.n_features(), 3);
    }

    #[test]
    fn synthetic_data_is_reproducible(seed in any::<u64>(), confounded in prop::bool::ANY) {
        let spec = if confounded {
            SyntheticSpec { kind: SyntheticKind::Confounded, per_class: 10, features: 6, classes: 3, noise: 0.02, nuisance: 4, seed }
        } else {
            SyntheticSpec { kind: SyntheticKind::Moons, per_class: 10, features: 3, classes: 2, noise: 0.1, nuisance: 0, seed }
        };
        let a = make_synthetic(&spec).unwrap();
        let b = make_synthetic(&spec).unwrap();
        prop_assert_eq!(container::encode_dataset(&a).to_bytes(), container::encode_dataset(&b).to_bytes());
        prop_assert!(a.features().iter().all(|v| (0.0..=1.0).contains(v)));
    }

    #[test]
    fn datasets_survive_the_container(x in matrix(7, 3, 0.0, 1.0), labels in prop::collection::vec(0usize..3, 7)) {
        let d = Dataset::new(x, labels, 3).unwrap();
        let bytes = container::encode_dataset(&d).to_bytes();
        let back = container::decode_dataset(&Container::from_bytes(&bytes).unwrap()).unwrap();
        prop_assert_eq!(back.features(), d.features());
        prop_assert_eq!(back.labels(), d.labels());
    }
}
