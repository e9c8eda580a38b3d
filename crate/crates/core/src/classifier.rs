//! The classifier: a softmax multi-layer perceptron.

use ndarray::{Array2, ArrayView1, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::nn::{self, Activation, Mlp, Output, TrainConfig};
use crate::{argmax, Error, ProbaModel, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetworkSpec {
    /// Input width, hidden widths, class count.
    pub widths: Vec<usize>,
    pub hidden: Activation,
}

impl NetworkSpec {
    pub fn new(inputs: usize, hidden_widths: &[usize], classes: usize, hidden: Activation) -> Self {
        let mut widths = vec![inputs];
        widths.extend_from_slice(hidden_widths);
        widths.push(classes);
        Self { widths, hidden }
    }

    pub fn validate(&self) -> Result<()> {
        if self.widths.len() < 3 {
            return Err(Error::InvalidArgument("network needs at least one hidden layer".into()));
        }
        if self.widths.contains(&0) {
            return Err(Error::InvalidArgument(format!("zero layer width in {:?}", self.widths)));
        }
        if *self.widths.last().unwrap() < 2 {
            return Err(Error::InvalidArgument("network needs at least 2 outputs".into()));
        }
        Ok(())
    }

    pub fn inputs(&self) -> usize {
        self.widths[0]
    }

    pub fn classes(&self) -> usize {
        *self.widths.last().unwrap()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct NetworkModel {
    net: Mlp,
}

/// A trained model together with its per-epoch training losses.
#[derive(Clone, Debug)]
pub struct Fitted<M> {
    pub model: M,
    pub epoch_losses: Vec<f64>,
}

impl NetworkModel {
    /// Wraps an existing softmax network.
    pub fn from_mlp(net: Mlp) -> Result<Self> {
        if net.output() != Output::Softmax || net.widths().len() < 3 {
            return Err(Error::InvalidArgument("classifier needs a softmax network with a hidden layer".into()));
        }
        Ok(Self { net })
    }

    /// Untrained network with seeded Glorot initialization.
    pub fn init(spec: &NetworkSpec, seed: u64) -> Result<Self> {
        spec.validate()?;
        Ok(Self {
            net: Mlp::new(&spec.widths, spec.hidden, Output::Softmax, seed)?,
        })
    }

    pub fn spec(&self) -> NetworkSpec {
        NetworkSpec {
            widths: self.net.widths().to_vec(),
            hidden: self.net.hidden(),
        }
    }

    pub fn mlp(&self) -> &Mlp {
        &self.net
    }

    pub fn predict_proba(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_width(x.len())?;
        let row = ArrayView2::from_shape((1, x.len()), x).expect("contiguous slice");
        Ok(self.net.forward(row).row(0).to_vec())
    }

    pub fn predict_class(&self, x: &[f64]) -> Result<usize> {
        Ok(argmax(&self.predict_proba(x)?))
    }

    pub fn predict_classes(&self, x: ArrayView2<'_, f64>) -> Result<Vec<usize>> {
        self.check_width(x.ncols())?;
        Ok(classes_of(&self.net.forward(x)))
    }

    fn check_width(&self, found: usize) -> Result<()> {
        if found != self.net.input_width() {
            return Err(Error::Shape {
                expected: self.net.input_width(),
                found,
            });
        }
        Ok(())
    }
}

impl ProbaModel for NetworkModel {
    fn n_features(&self) -> usize {
        self.net.input_width()
    }

    fn n_classes(&self) -> usize {
        self.net.output_width()
    }

    fn predict_proba_batch(&self, x: ArrayView2<'_, f64>) -> Array2<f64> {
        self.net.forward(x)
    }
}

/// Row-wise argmax with lowest-index tie-breaking.
pub fn classes_of(proba: &Array2<f64>) -> Vec<usize> {
    proba
        .axis_iter(Axis(0))
        .map(|row: ArrayView1<'_, f64>| row.as_slice().map_or_else(|| argmax(&row.to_vec()), argmax))
        .collect()
}

/// Train with softmax cross-entropy.
pub fn train_classifier(train: &Dataset, spec: &NetworkSpec, cfg: &TrainConfig) -> Result<Fitted<NetworkModel>> {
    spec.validate()?;
    if spec.inputs() != train.n_features() {
        return Err(Error::Shape {
            expected: spec.inputs(),
            found: train.n_features(),
        });
    }
    if spec.classes() != train.classes() {
        return Err(Error::InvalidArgument(format!(
            "network has {} outputs but the dataset has {} classes",
            spec.classes(),
            train.classes()
        )));
    }
    let mut model = NetworkModel::init(spec, cfg.seed)?;
    let targets = nn::one_hot(train.labels(), train.classes());
    let epoch_losses = nn::train(&mut model.net, train.features().view(), targets.view(), cfg)?;
    Ok(Fitted { model, epoch_losses })
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalReport {
    pub accuracy: f64,
    pub precision: Vec<f64>,
    pub recall: Vec<f64>,
    /// `confusion[true][predicted]`.
    pub confusion: Vec<Vec<usize>>,
}

impl EvalReport {
    /// Precision and recall per class from a confusion matrix. A class absent
    /// from both labels and predictions scores 1.0; a class absent from only
    /// one side scores 0.0 on the undefined ratio.
    pub fn from_confusion(confusion: Vec<Vec<usize>>) -> Result<Self> {
        let c = confusion.len();
        if c == 0 || confusion.iter().any(|row| row.len() != c) {
            return Err(Error::InvalidArgument("confusion matrix must be square and non-empty".into()));
        }
        let total: usize = confusion.iter().flatten().sum();
        if total == 0 {
            return Err(Error::InvalidArgument("empty confusion matrix".into()));
        }
        let trace: usize = (0..c).map(|i| confusion[i][i]).sum();
        let mut precision = Vec::with_capacity(c);
        let mut recall = Vec::with_capacity(c);
        for k in 0..c {
            let tp = confusion[k][k] as f64;
            let predicted: usize = (0..c).map(|i| confusion[i][k]).sum();
            let actual: usize = confusion[k].iter().sum();
            let ratio = |den: usize| {
                if den > 0 {
                    tp / den as f64
                } else if predicted == 0 && actual == 0 {
                    1.0
                } else {
                    0.0
                }
            };
            precision.push(ratio(predicted));
            recall.push(ratio(actual));
        }
        Ok(Self {
            accuracy: trace as f64 / total as f64,
            precision,
            recall,
            confusion,
        })
    }

    pub fn mean_precision(&self) -> f64 {
        self.precision.iter().sum::<f64>() / self.precision.len() as f64
    }

    pub fn mean_recall(&self) -> f64 {
        self.recall.iter().sum::<f64>() / self.recall.len() as f64
    }

    /// Flat `key=value` lines.
    pub fn to_report(&self) -> String {
        let mut s = format!(
            "accuracy={:.6}\nmean_precision={:.6}\nmean_recall={:.6}\n",
            self.accuracy,
            self.mean_precision(),
            self.mean_recall()
        );
        for (k, (p, r)) in self.precision.iter().zip(&self.recall).enumerate() {
            s.push_str(&format!("precision_{k}={p:.6}\nrecall_{k}={r:.6}\n"));
        }
        s
    }
}

pub fn evaluate(model: &NetworkModel, test: &Dataset) -> Result<EvalReport> {
    if test.is_empty() {
        return Err(Error::InvalidArgument("cannot evaluate on an empty test set".into()));
    }
    let predicted = model.predict_classes(test.features().view())?;
    let c = model.n_classes().max(test.classes());
    let mut confusion = vec![vec![0; c]; c];
    for (&y, &p) in test.labels().iter().zip(&predicted) {
        confusion[y][p] += 1;
    }
    EvalReport::from_confusion(confusion)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{array, Array1};

    fn zero_network(inputs: usize, classes: usize) -> NetworkModel {
        let net = Mlp::from_parameters(
            Activation::Relu,
            Output::Softmax,
            vec![Array2::zeros((inputs, 3)), Array2::zeros((3, classes))],
            vec![Array1::zeros(3), Array1::zeros(classes)],
        )
        .unwrap();
        NetworkModel::from_mlp(net).unwrap()
    }

    #[test]
    fn zero_weights_give_uniform_and_class_zero() {
        let m = zero_network(4, 5);
        let p = m.predict_proba(&[0.3, 0.1, 0.9, 0.2]).unwrap();
        assert!(p.iter().all(|&v| (v - 0.2).abs() < 1e-15));
        assert_eq!(m.predict_class(&[0.3, 0.1, 0.9, 0.2]).unwrap(), 0);
    }

    #[test]
    fn huge_logit_stays_finite() {
        let net = Mlp::from_parameters(
            Activation::Relu,
            Output::Softmax,
            vec![Array2::zeros((2, 2)), Array2::zeros((2, 3))],
            vec![Array1::zeros(2), array![1000.0, 0.0, 0.0]],
        )
        .unwrap();
        let p = NetworkModel::from_mlp(net).unwrap().predict_proba(&[0.5, 0.5]).unwrap();
        assert!(p[0] >= 1.0 - 1e-9);
    }

    #[test]
    fn argmax_ties_go_low() {
        assert_eq!(argmax(&[0.2, 0.5, 0.3]), 1);
        assert_eq!(argmax(&[0.5, 0.5]), 0);
    }

    #[test]
    fn width_mismatch_is_a_shape_error() {
        let m = zero_network(4, 2);
        assert!(matches!(m.predict_proba(&[0.0; 3]), Err(Error::Shape { expected: 4, found: 3 })));
    }

    #[test]
    fn report_from_confusion() {
        let r = EvalReport::from_confusion(vec![vec![9, 1], vec![2, 8]]).unwrap();
        assert!((r.accuracy - 0.85).abs() < 1e-15);
        assert!((r.precision[0] - 9.0 / 11.0).abs() < 1e-15);
        assert!((r.recall[0] - 0.9).abs() < 1e-15);
    }

    #[test]
    fn absent_class_scores_one() {
        let r = EvalReport::from_confusion(vec![vec![5, 0, 0], vec![0, 5, 0], vec![0, 0, 0]]).unwrap();
        assert_eq!(r.precision, vec![1.0, 1.0, 1.0]);
        assert_eq!(r.recall, vec![1.0, 1.0, 1.0]);
    }

    #[test]
    fn xor_is_learned() {
        let x = array![[0.0, 0.0], [0.0, 1.0], [1.0, 0.0], [1.0, 1.0]];
        let d = Dataset::new(x, vec![0, 1, 1, 0], 2).unwrap();
        let spec = NetworkSpec::new(2, &[8], 2, Activation::Tanh);
        let cfg = TrainConfig {
            epochs: 2000,
            batch_size: 4,
            learning_rate: 0.1,
            optimizer: nn::Optimizer::SgdMomentum { momentum: 0.9 },
            seed: 5,
        };
        let fit = train_classifier(&d, &spec, &cfg).unwrap();
        assert_eq!(evaluate(&fit.model, &d).unwrap().accuracy, 1.0);
        assert!(fit.epoch_losses.last().unwrap() <= &fit.epoch_losses[0]);
    }

    #[test]
    fn single_class_dataset_predicts_that_class() {
        let x = Array2::from_shape_fn((12, 2), |(i, k)| ((i * 7 + k * 3) % 10) as f64 / 10.0);
        let d = Dataset::new(x, vec![1; 12], 2).unwrap();
        let spec = NetworkSpec::new(2, &[4], 2, Activation::Relu);
        let fit = train_classifier(&d, &spec, &TrainConfig { epochs: 50, learning_rate: 0.05, ..Default::default() }).unwrap();
        let r = evaluate(&fit.model, &d).unwrap();
        assert_eq!(r.accuracy, 1.0);
    }

    #[test]
    fn training_is_deterministic() {
        let x = Array2::from_shape_fn((20, 3), |(i, k)| ((i * 13 + k * 5) % 17) as f64 / 17.0);
        let y: Vec<usize> = (0..20).map(|i| i % 2).collect();
        let d = Dataset::new(x, y, 2).unwrap();
        let spec = NetworkSpec::new(3, &[5], 2, Activation::Relu);
        let cfg = TrainConfig { epochs: 5, ..Default::default() };
        let a = train_classifier(&d, &spec, &cfg).unwrap().model;
        let b = train_classifier(&d, &spec, &cfg).unwrap().model;
        assert_eq!(a, b);
    }
}
