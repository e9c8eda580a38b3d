//! Map accuracy, map precision/recall and round-trip reconstruction reports.
//!
//! Every metric is computed per sample: a sample counts as correct when the
//! pixel it projects onto carries its predicted label. Several samples on
//! one pixel each count separately.

use ndarray::Array2;

use crate::boundary_map::{DecisionMap, GridSpec};
use crate::dataset::Dataset;
use crate::image::RgbImage;
use crate::inverse::InverseModel;
use crate::tsne::Embedding;
use crate::{Error, Result};

/// Pixel `(row, col)` of every embedded sample.
pub fn locate_pixels(embedding: &Embedding, grid: &GridSpec) -> Result<Vec<(usize, usize)>> {
    (0..embedding.len())
        .map(|i| {
            let [x, y] = embedding.point(i);
            grid.pixel_at(x, y).ok_or(Error::OutsideGrid { index: i, x, y })
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct MapMetrics {
    pub accuracy: f64,
    pub precision: Vec<f64>,
    pub recall: Vec<f64>,
    /// Classes whose precision denominator was empty (reported as 1.0).
    pub precision_undefined: Vec<bool>,
    /// Classes whose recall denominator was empty (reported as 1.0).
    pub recall_undefined: Vec<bool>,
    pub covered_samples: usize,
}

impl MapMetrics {
    pub fn mean_precision(&self) -> f64 {
        self.precision.iter().sum::<f64>() / self.precision.len() as f64
    }

    pub fn mean_recall(&self) -> f64 {
        self.recall.iter().sum::<f64>() / self.recall.len() as f64
    }

    /// Flat `key=value` report.
    pub fn to_report(&self) -> String {
        let mut s = format!(
            "map_accuracy={:.6}\nmean_map_precision={:.6}\nmean_map_recall={:.6}\ncovered_samples={}\n",
            self.accuracy,
            self.mean_precision(),
            self.mean_recall(),
            self.covered_samples
        );
        for c in 0..self.precision.len() {
            s.push_str(&format!(
                "map_precision_{c}={:.6}\nmap_recall_{c}={:.6}\n",
                self.precision[c], self.recall[c]
            ));
        }
        s
    }

    /// One row per class.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("class,map_precision,map_recall,precision_undefined,recall_undefined\n");
        for c in 0..self.precision.len() {
            s.push_str(&format!(
                "{c},{:.6},{:.6},{},{}\n",
                self.precision[c], self.recall[c], self.precision_undefined[c], self.recall_undefined[c]
            ));
        }
        s
    }
}

struct Tally {
    correct: Vec<usize>,
    on_pixels: Vec<usize>,
    predicted: Vec<usize>,
    total: usize,
}

fn tally(map: &DecisionMap, embedding: &Embedding, predicted: &[usize]) -> Result<Tally> {
    if embedding.is_empty() {
        return Err(Error::InvalidArgument("no samples to score".into()));
    }
    if embedding.len() != predicted.len() {
        return Err(Error::InvalidArgument(format!(
            "{} embedded samples but {} predictions",
            embedding.len(),
            predicted.len()
        )));
    }
    let classes = map.classes.max(predicted.iter().max().map_or(0, |m| m + 1));
    let mut t = Tally {
        correct: vec![0; classes],
        on_pixels: vec![0; classes],
        predicted: vec![0; classes],
        total: predicted.len(),
    };
    for ((row, col), &pred) in locate_pixels(embedding, &map.spec)?.into_iter().zip(predicted) {
        let pixel = map.label(row, col);
        t.on_pixels[pixel] += 1;
        t.predicted[pred] += 1;
        if pixel == pred {
            t.correct[pred] += 1;
        }
    }
    Ok(t)
}

/// Fraction of samples whose pixel label equals their predicted label.
pub fn map_accuracy(map: &DecisionMap, embedding: &Embedding, predicted: &[usize]) -> Result<f64> {
    let t = tally(map, embedding, predicted)?;
    Ok(t.correct.iter().sum::<usize>() as f64 / t.total as f64)
}

/// Accuracy plus per-class map precision and recall.
pub fn map_metrics(map: &DecisionMap, embedding: &Embedding, predicted: &[usize]) -> Result<MapMetrics> {
    let t = tally(map, embedding, predicted)?;
    let ratio = |num: usize, den: usize| if den == 0 { (1.0, true) } else { (num as f64 / den as f64, false) };
    let (precision, precision_undefined) = t.correct.iter().zip(&t.on_pixels).map(|(&n, &d)| ratio(n, d)).unzip();
    let (recall, recall_undefined) = t.correct.iter().zip(&t.predicted).map(|(&n, &d)| ratio(n, d)).unzip();
    Ok(MapMetrics {
        accuracy: t.correct.iter().sum::<usize>() as f64 / t.total as f64,
        precision,
        recall,
        precision_undefined,
        recall_undefined,
        covered_samples: t.total,
    })
}

pub fn map_precision_recall(map: &DecisionMap, embedding: &Embedding, predicted: &[usize]) -> Result<MapMetrics> {
    map_metrics(map, embedding, predicted)
}

#[derive(Clone, Debug, PartialEq)]
pub struct RoundTripReport {
    pub indices: Vec<usize>,
    /// Squared Euclidean reconstruction error per listed sample.
    pub errors: Vec<f64>,
    /// `None` when no samples were listed.
    pub mean_error: Option<f64>,
    pub originals: Array2<f64>,
    pub reconstructed: Array2<f64>,
}

impl RoundTripReport {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("index,squared_error\n");
        for (i, e) in self.indices.iter().zip(&self.errors) {
            s.push_str(&format!("{i},{e:.9}\n"));
        }
        s
    }

    /// Originals on the top row, reconstructions on the bottom row; each
    /// sample is a grayscale tile of side `ceil(sqrt(n))` (row-major, so
    /// square images such as digits render as themselves), with a 2-pixel
    /// gap between tiles.
    pub fn strip(&self, scale: usize) -> RgbImage {
        let n = self.originals.ncols();
        let side = (n as f64).sqrt().ceil() as usize;
        let scale = scale.max(1);
        let tile = side * scale;
        let gap = 2;
        let k = self.indices.len();
        let width = (k * (tile + gap) + gap).max(1);
        let height = 2 * tile + 3 * gap;
        let mut img = RgbImage::new(width, height, [128, 128, 128]);
        for (band, matrix) in [&self.originals, &self.reconstructed].into_iter().enumerate() {
            let top = gap + band * (tile + gap);
            for (s, row) in matrix.rows().into_iter().enumerate() {
                let left = gap + s * (tile + gap);
                for (f, &v) in row.iter().enumerate() {
                    let g = (v.clamp(0.0, 1.0) * 255.0).round() as u8;
                    let (fr, fc) = (f / side, f % side);
                    for dr in 0..scale {
                        for dc in 0..scale {
                            img.set(top + fr * scale + dr, left + fc * scale + dc, [g, g, g]);
                        }
                    }
                }
            }
        }
        img
    }
}

/// Push the listed samples' embedded coordinates back through the inverse
/// and compare with the originals.
pub fn roundtrip_report(
    embedding: &Embedding,
    inverse: &InverseModel,
    originals: &Dataset,
    indices: &[usize],
) -> Result<RoundTripReport> {
    let len = embedding.len().min(originals.len());
    if let Some(&index) = indices.iter().find(|&&i| i >= len) {
        return Err(Error::IndexOutOfRange { index, len });
    }
    let n = originals.n_features();
    let mut points = Array2::zeros((indices.len(), 2));
    let mut orig = Array2::zeros((indices.len(), n));
    for (r, &i) in indices.iter().enumerate() {
        let [x, y] = embedding.point(i);
        points[[r, 0]] = x;
        points[[r, 1]] = y;
        orig.row_mut(r).assign(&originals.features().row(i));
    }
    let reconstructed = inverse.invert_batch(points.view());
    let errors: Vec<f64> = orig
        .rows()
        .into_iter()
        .zip(reconstructed.rows())
        .map(|(a, b)| a.iter().zip(b).map(|(u, v)| (u - v) * (u - v)).sum())
        .collect();
    let mean_error = (!errors.is_empty()).then(|| errors.iter().sum::<f64>() / errors.len() as f64);
    Ok(RoundTripReport {
        indices: indices.to_vec(),
        errors,
        mean_error,
        originals: orig,
        reconstructed,
    })
}
