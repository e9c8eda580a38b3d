//! Decision boundary maps of trained classifiers.
//!
//! The pipeline trains a classifier, optionally transforms the training set
//! into per-sample Shapley attributions, embeds the result in 2D with t-SNE,
//! learns an inverse projection from the plane back to data space, and colors
//! a pixel grid by the classifier's decision at each inverse-projected
//! location. The resulting maps are scored with map accuracy, precision and
//! recall.

pub mod boundary_map;
pub mod classifier;
pub mod config;
pub mod container;
pub mod dataset;
pub mod error;
pub mod image;
pub mod inverse;
pub mod metrics;
pub mod nn;
pub mod pipeline;
pub mod seed;
pub mod shapley;
pub mod tsne;

pub use error::{Error, Result};

/// Anything that maps a batch of samples (rows) to class probabilities.
///
/// Attribution and map rendering only ever see a model through this trait.
pub trait ProbaModel {
    fn n_features(&self) -> usize;
    fn n_classes(&self) -> usize;
    fn predict_proba_batch(&self, x: ndarray::ArrayView2<'_, f64>) -> ndarray::Array2<f64>;
}

/// A learned map from 2D coordinates back to data space.
pub trait Unproject {
    fn output_width(&self) -> usize;
    fn unproject_batch(&self, points: ndarray::ArrayView2<'_, f64>) -> ndarray::Array2<f64>;
}

/// Index of the largest entry; ties resolve to the lowest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}
