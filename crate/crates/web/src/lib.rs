//! Browser bindings: small, fixed-size versions of the pipeline that run in
//! a few seconds on one thread.

use ndarray::Array2;
use rand::Rng as _;
use shapdbm::boundary_map::{build_grid, draw_scatter, map_image, palette_for, render_map_with, Execution};
use shapdbm::classifier::{train_classifier, NetworkModel, NetworkSpec};
use shapdbm::dataset::{make_synthetic, split, SyntheticKind, SyntheticSpec};
use shapdbm::inverse::{train_inverse, InvTrainConfig};
use shapdbm::metrics::map_accuracy;
use shapdbm::nn::{Activation, TrainConfig};
use shapdbm::shapley::{base_value, exact_shapley, mc_shapley, shapley_dataset_with, AttributionTarget, BackgroundSet};
use shapdbm::tsne::{tsne_fit, TsneConfig};
use shapdbm::{seed, Error, ProbaModel, Result};
use wasm_bindgen::prelude::*;

fn js(e: Error) -> JsError {
    JsError::new(&e.to_string())
}

#[wasm_bindgen]
pub struct MapView {
    width: usize,
    rgba: Vec<u8>,
    accuracy: f64,
}

#[wasm_bindgen]
impl MapView {
    #[wasm_bindgen(getter)]
    pub fn width(&self) -> usize {
        self.width
    }

    /// RGBA bytes, row-major, ready for `ImageData`.
    #[wasm_bindgen(getter)]
    pub fn rgba(&self) -> Vec<u8> {
        self.rgba.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn accuracy(&self) -> f64 {
        self.accuracy
    }
}

fn demo_spec(kind: &str, seed: u64) -> Result<SyntheticSpec> {
    let base = SyntheticSpec {
        seed,
        ..Default::default()
    };
    Ok(match kind {
        "blobs" => SyntheticSpec {
            kind: SyntheticKind::Blobs,
            per_class: 60,
            features: 4,
            classes: 3,
            noise: 0.06,
            ..base
        },
        "moons" => SyntheticSpec {
            kind: SyntheticKind::Moons,
            per_class: 90,
            features: 2,
            classes: 2,
            noise: 0.04,
            ..base
        },
        "confounded" => SyntheticSpec {
            kind: SyntheticKind::Confounded,
            per_class: 60,
            features: 12,
            classes: 3,
            noise: 0.02,
            nuisance: 10,
            ..base
        },
        other => return Err(Error::InvalidArgument(format!("unknown dataset `{other}`"))),
    })
}

/// Train, project (raw features or Shapley values), invert and render.
pub fn render_demo(kind: &str, shapley_space: bool, seed: u64, resolution: usize) -> Result<MapView> {
    let data = make_synthetic(&demo_spec(kind, seed::derive(seed, 0))?)?;
    let parts = split(&data, 0.2, seed::derive(seed, 1))?;
    let train = parts.train;
    let spec = NetworkSpec::new(train.n_features(), &[32, 16], train.classes(), Activation::Relu);
    let cfg = TrainConfig {
        epochs: 80,
        batch_size: 32,
        seed: seed::derive(seed, 2),
        ..Default::default()
    };
    let model = train_classifier(&train, &spec, &cfg)?.model;

    let rows: Array2<f64> = if shapley_space {
        let bg = BackgroundSet::sample(&parts.test, 40, seed::derive(seed, 3))?;
        shapley_dataset_with(&model, train.features().view(), &bg, 16, seed::derive(seed, 4), AttributionTarget::AllClasses)?
            .values
    } else {
        train.features().clone()
    };
    let tsne = TsneConfig {
        perplexity: 20.0,
        iterations: 400,
        seed: seed::derive(seed, 5),
        ..Default::default()
    };
    let embedding = tsne_fit(rows.view(), &tsne)?;
    let inv_cfg = InvTrainConfig {
        hidden: vec![32, 64],
        epochs: 80,
        seed: seed::derive(seed, 6),
        ..Default::default()
    };
    let inverse = train_inverse(&embedding, &train, &inv_cfg)?.model;
    let bounds = embedding.bounds().with_margin(0.05);
    let grid = build_grid(bounds, resolution, 1, seed::derive(seed, 7))?;
    let map = render_map_with(&grid, &inverse, &model, Execution::Sequential)?;
    let predicted = model.predict_classes(train.features().view())?;
    let accuracy = map_accuracy(&map, &embedding, &predicted)?;

    let palette = palette_for(model.n_classes());
    let mut img = map_image(&map, &palette)?;
    draw_scatter(&mut img, &bounds, embedding.coords().view(), &predicted, &palette)?;
    let rgba = img.pixels.chunks_exact(3).flat_map(|p| [p[0], p[1], p[2], 255]).collect();
    Ok(MapView {
        width: resolution,
        rgba,
        accuracy,
    })
}

#[wasm_bindgen]
pub fn decision_map(kind: &str, shapley_space: bool, seed: u32, resolution: usize) -> std::result::Result<MapView, JsError> {
    render_demo(kind, shapley_space, u64::from(seed), resolution).map_err(js)
}

#[wasm_bindgen]
pub struct ShapleyView {
    exact: Vec<f64>,
    estimate: Vec<f64>,
    base: f64,
    output: f64,
}

#[wasm_bindgen]
impl ShapleyView {
    #[wasm_bindgen(getter)]
    pub fn exact(&self) -> Vec<f64> {
        self.exact.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn estimate(&self) -> Vec<f64> {
        self.estimate.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn base(&self) -> f64 {
        self.base
    }

    #[wasm_bindgen(getter)]
    pub fn output(&self) -> f64 {
        self.output
    }
}

/// Exact and sampled attributions for one input of a random 8-feature
/// network with a 10-sample background.
pub fn compare_shapley(seed: u64, permutations: usize) -> Result<ShapleyView> {
    let spec = NetworkSpec::new(8, &[16], 3, Activation::Tanh);
    let model = NetworkModel::init(&spec, seed::derive(seed, 0))?;
    let mut rng = seed::rng(seed::derive(seed, 1));
    let mut uniform = |rows: usize| Array2::from_shape_fn((rows, 8), |_| rng.random::<f64>());
    let bg = BackgroundSet::new(uniform(10))?;
    let x = uniform(1).row(0).to_vec();
    let target = model.predict_class(&x)?;
    Ok(ShapleyView {
        exact: exact_shapley(&model, &x, &bg, target)?,
        estimate: mc_shapley(&model, &x, &bg, target, permutations, seed::derive(seed, 2))?,
        base: base_value(&model, &bg, target)?,
        output: model.predict_proba(&x)?[target],
    })
}

#[wasm_bindgen]
pub fn shapley_comparison(seed: u32, permutations: usize) -> std::result::Result<ShapleyView, JsError> {
    compare_shapley(u64::from(seed), permutations).map_err(js)
}

/// Two 10-dimensional blobs of 50 points, embedded at the given perplexity.
/// Returns `[x0, y0, label0, x1, y1, label1, ...]`.
pub fn embed_blobs(perplexity: f64, seed: u64) -> Result<Vec<f64>> {
    let data = make_synthetic(&SyntheticSpec {
        kind: SyntheticKind::Blobs,
        per_class: 50,
        features: 10,
        classes: 2,
        noise: 0.08,
        nuisance: 0,
        seed: seed::derive(seed, 0),
    })?;
    let cfg = TsneConfig {
        perplexity,
        iterations: 500,
        seed: seed::derive(seed, 1),
        ..Default::default()
    };
    let e = tsne_fit(data.features().view(), &cfg)?;
    Ok(e.coords()
        .rows()
        .into_iter()
        .zip(data.labels())
        .flat_map(|(p, &y)| [p[0], p[1], y as f64])
        .collect())
}

#[wasm_bindgen]
pub fn tsne_blobs(perplexity: f64, seed: u32) -> std::result::Result<Vec<f64>, JsError> {
    embed_blobs(perplexity, u64::from(seed)).map_err(js)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn map_has_requested_size() {
        let v = render_demo("moons", false, 1, 40).unwrap();
        assert_eq!(v.rgba.len(), 40 * 40 * 4);
        assert!((0.0..=1.0).contains(&v.accuracy));
        assert!(render_demo("spirals", false, 1, 40).is_err());
    }

    #[test]
    fn shapley_view_is_efficient() {
        let v = compare_shapley(3, 200).unwrap();
        let sum: f64 = v.exact.iter().sum();
        assert!((sum + v.base - v.output).abs() < 1e-6);
        assert_eq!(v.estimate.len(), 8);
    }

    #[test]
    fn embedding_triples() {
        let v = embed_blobs(10.0, 2).unwrap();
        assert_eq!(v.len(), 300);
        assert!(v.iter().all(|x| x.is_finite()));
    }
}
