//! Learned inverse projection from the plane back to data space.

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::classifier::Fitted;
use crate::dataset::Dataset;
use crate::nn::{self, Activation, Mlp, Optimizer, Output, TrainConfig};
use crate::tsne::{Bounds, Embedding};
use crate::{Error, Result, Unproject};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InvTrainConfig {
    pub hidden: Vec<usize>,
    pub activation: Activation,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for InvTrainConfig {
    fn default() -> Self {
        Self {
            hidden: vec![32, 64, 128, 256],
            activation: Activation::Relu,
            epochs: 200,
            batch_size: 32,
            learning_rate: 1e-3,
            seed: 0,
        }
    }
}

impl InvTrainConfig {
    fn train_config(&self) -> TrainConfig {
        TrainConfig {
            epochs: self.epochs,
            batch_size: self.batch_size,
            learning_rate: self.learning_rate,
            optimizer: Optimizer::adam(),
            seed: self.seed,
        }
    }
}

/// Rescaled coordinates are clamped to this magnitude so that absurdly far
/// points cannot overflow the hidden layers.
const INPUT_LIMIT: f64 = 1e6;

/// Affine map taking the training bounds onto the unit square.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CoordScaling {
    pub offset: [f64; 2],
    pub scale: [f64; 2],
}

impl CoordScaling {
    pub fn from_bounds(b: &Bounds) -> Self {
        // A zero-width axis maps its single value to 0.5.
        let axis = |lo: f64, w: f64| if w > 0.0 { (lo, 1.0 / w) } else { (lo - 0.5, 1.0) };
        let (x0, sx) = axis(b.xmin, b.width());
        let (y0, sy) = axis(b.ymin, b.height());
        Self {
            offset: [x0, y0],
            scale: [sx, sy],
        }
    }

    pub fn apply(&self, points: ArrayView2<'_, f64>) -> Array2<f64> {
        let mut out = points.to_owned();
        for mut row in out.rows_mut() {
            row[0] = ((row[0] - self.offset[0]) * self.scale[0]).clamp(-INPUT_LIMIT, INPUT_LIMIT);
            row[1] = ((row[1] - self.offset[1]) * self.scale[1]).clamp(-INPUT_LIMIT, INPUT_LIMIT);
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct InverseModel {
    net: Mlp,
    scaling: CoordScaling,
    bounds: Bounds,
}

impl InverseModel {
    pub fn from_parts(net: Mlp, scaling: CoordScaling, bounds: Bounds) -> Result<Self> {
        if net.output() != Output::Sigmoid || net.input_width() != 2 {
            return Err(Error::InvalidArgument("inverse model needs a 2-input sigmoid network".into()));
        }
        Ok(Self { net, scaling, bounds })
    }

    pub fn mlp(&self) -> &Mlp {
        &self.net
    }

    pub fn scaling(&self) -> CoordScaling {
        self.scaling
    }

    /// Bounds of the embedding the model was trained on.
    pub fn bounds(&self) -> Bounds {
        self.bounds
    }

    pub fn output_width(&self) -> usize {
        self.net.output_width()
    }

    pub fn invert(&self, point: [f64; 2]) -> Vec<f64> {
        let p = Array2::from_shape_vec((1, 2), point.to_vec()).expect("1 x 2");
        self.invert_batch(p.view()).row(0).to_vec()
    }

    /// One output row per input point, in order; every value in `[0, 1]`.
    pub fn invert_batch(&self, points: ArrayView2<'_, f64>) -> Array2<f64> {
        self.net.forward(self.scaling.apply(points).view())
    }

    /// Mean squared error per component over the given pairs.
    pub fn mse(&self, embedding: &Embedding, targets: &Dataset) -> f64 {
        let out = self.invert_batch(embedding.coords().view());
        let diff = out - targets.features();
        diff.iter().map(|d| d * d).sum::<f64>() / diff.len() as f64
    }
}

impl Unproject for InverseModel {
    fn output_width(&self) -> usize {
        self.net.output_width()
    }

    fn unproject_batch(&self, points: ArrayView2<'_, f64>) -> Array2<f64> {
        self.invert_batch(points)
    }
}

/// Fit `P⁻¹` on pairs (embedding row i → target row i) by minimizing squared
/// reconstruction error.
pub fn train_inverse(embedding: &Embedding, targets: &Dataset, cfg: &InvTrainConfig) -> Result<Fitted<InverseModel>> {
    if embedding.len() != targets.len() {
        return Err(Error::InvalidArgument(format!(
            "{} embedded points but {} targets",
            embedding.len(),
            targets.len()
        )));
    }
    if cfg.hidden.contains(&0) {
        return Err(Error::InvalidArgument("hidden widths must be positive".into()));
    }
    let mut widths = vec![2];
    widths.extend_from_slice(&cfg.hidden);
    widths.push(targets.n_features());
    let mut net = Mlp::new(&widths, cfg.activation, Output::Sigmoid, cfg.seed)?;
    let bounds = embedding.bounds();
    let scaling = CoordScaling::from_bounds(&bounds);
    let inputs = scaling.apply(embedding.coords().view());
    let epoch_losses = nn::train(&mut net, inputs.view(), targets.features().view(), &cfg.train_config())?;
    Ok(Fitted {
        model: InverseModel { net, scaling, bounds },
        epoch_losses,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn outputs_stay_in_unit_interval_far_from_training_bounds() {
        let emb = Embedding::new(array![[0.0, 0.0], [1.0, 1.0], [0.0, 1.0], [1.0, 0.0]]).unwrap();
        let targets = Dataset::new(array![[0.1, 0.9, 0.5], [0.9, 0.1, 0.5], [0.3, 0.3, 0.3], [0.7, 0.7, 0.7]], vec![0, 1, 0, 1], 2).unwrap();
        let cfg = InvTrainConfig {
            epochs: 20,
            ..Default::default()
        };
        let model = train_inverse(&emb, &targets, &cfg).unwrap().model;
        for p in [[1e6, -1e6], [-1e9, 3.0], [0.5, 0.5], [f64::MAX / 4.0, 0.0]] {
            assert!(model.invert(p).iter().all(|v| (0.0..=1.0).contains(v)), "{p:?}");
        }
        let batch = model.invert_batch(array![[0.0, 0.0], [1.0, 1.0], [0.5, 0.5]].view());
        assert_eq!(batch.nrows(), 3);
        assert_eq!(batch.row(1).to_vec(), model.invert([1.0, 1.0]));
    }

    #[test]
    fn mismatched_rows_are_rejected() {
        let emb = Embedding::new(array![[0.0, 0.0], [1.0, 1.0]]).unwrap();
        let targets = Dataset::new(array![[0.1], [0.2], [0.3]], vec![0, 1, 0], 2).unwrap();
        assert!(train_inverse(&emb, &targets, &InvTrainConfig::default()).is_err());
    }
}
