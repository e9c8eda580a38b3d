//! Dataset loading, synthetic generation and stratified splitting.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use ndarray::{Array2, Axis};
use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::seed;
use crate::{Error, Result};

const IDX_IMAGES_MAGIC: u32 = 0x0000_0803;
const IDX_LABELS_MAGIC: u32 = 0x0000_0801;

/// Labeled samples with every feature in `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    features: Array2<f64>,
    labels: Vec<usize>,
    classes: usize,
}

impl Dataset {
    pub fn new(features: Array2<f64>, labels: Vec<usize>, classes: usize) -> Result<Self> {
        if features.nrows() != labels.len() {
            return Err(Error::Consistency(format!(
                "{} feature rows but {} labels",
                features.nrows(),
                labels.len()
            )));
        }
        if features.ncols() == 0 {
            return Err(Error::InvalidArgument("dataset needs at least one feature".into()));
        }
        if classes < 2 {
            return Err(Error::InvalidArgument(format!("need at least 2 classes, got {classes}")));
        }
        if let Some((i, &y)) = labels.iter().enumerate().find(|(_, &y)| y >= classes) {
            return Err(Error::Consistency(format!("label {y} of sample {i} is not below {classes}")));
        }
        if let Some(v) = features.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::Consistency(format!("feature value {v} outside [0, 1]")));
        }
        Ok(Self {
            features,
            labels,
            classes,
        })
    }

    pub fn features(&self) -> &Array2<f64> {
        &self.features
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.features.ncols()
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.classes];
        for &y in &self.labels {
            counts[y] += 1;
        }
        counts
    }

    /// Rows at `indices`, in the given order.
    pub fn select(&self, indices: &[usize]) -> Dataset {
        Dataset {
            features: self.features.select(Axis(0), indices),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            classes: self.classes,
        }
    }

    /// The first `count` samples (or all of them).
    pub fn head(&self, count: usize) -> Dataset {
        let idx: Vec<usize> = (0..count.min(self.len())).collect();
        self.select(&idx)
    }
}

/// Disjoint train/test halves of one dataset.
#[derive(Clone, Debug)]
pub struct SplitPair {
    pub train: Dataset,
    pub test: Dataset,
    /// Source row of each train sample.
    pub train_indices: Vec<usize>,
    /// Source row of each test sample.
    pub test_indices: Vec<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SyntheticKind {
    /// Gaussian clusters, one per class.
    Blobs,
    /// Two interleaved half circles (two classes).
    Moons,
    /// Class depends on a few informative features; the remaining nuisance
    /// features cluster strongly but independently of the class.
    Confounded,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticSpec {
    pub kind: SyntheticKind,
    pub per_class: usize,
    pub features: usize,
    pub classes: usize,
    pub noise: f64,
    /// Confounded only.
    pub nuisance: usize,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            kind: SyntheticKind::Blobs,
            per_class: 100,
            features: 2,
            classes: 2,
            noise: 0.05,
            nuisance: 0,
            seed: 0,
        }
    }
}

/// Informative offsets span `±CONFOUNDED_HALF_RANGE` per feature.
const CONFOUNDED_HALF_RANGE: f64 = 0.15;
const NUISANCE_CLUSTERS: usize = 4;
const NUISANCE_LOW: f64 = 0.2;
const NUISANCE_HIGH: f64 = 0.8;
const NUISANCE_SPREAD: f64 = 0.06;

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if self.per_class == 0 || self.features == 0 || self.classes < 2 {
            return bad("synthetic spec needs per_class >= 1, features >= 1, classes >= 2".into());
        }
        if !(self.noise >= 0.0 && self.noise.is_finite()) {
            return bad(format!("noise must be finite and >= 0, got {}", self.noise));
        }
        match self.kind {
            SyntheticKind::Blobs => Ok(()),
            SyntheticKind::Moons => {
                if self.classes != 2 || self.features < 2 {
                    return bad("moons needs exactly 2 classes and at least 2 features".into());
                }
                Ok(())
            }
            SyntheticKind::Confounded => {
                if self.nuisance >= self.features {
                    return bad(format!(
                        "nuisance count {} must be below feature count {}",
                        self.nuisance, self.features
                    ));
                }
                let band = confounded_band_width(self.features - self.nuisance, self.classes);
                if 2.0 * self.noise >= band {
                    return bad(format!(
                        "noise {} leaves no room inside class bands of width {band:.4}",
                        self.noise
                    ));
                }
                Ok(())
            }
        }
    }

    /// The linear rule that labels confounded samples, from the informative
    /// (leading) features alone.
    pub fn confounded_label(&self, informative: &[f64]) -> usize {
        let m = informative.len();
        let score = informative.iter().map(|v| v - 0.5).sum::<f64>() / (m as f64).sqrt();
        let half = CONFOUNDED_HALF_RANGE * (m as f64).sqrt();
        let band = confounded_band_width(m, self.classes);
        (((score + half) / band).floor().max(0.0) as usize).min(self.classes - 1)
    }
}

fn confounded_band_width(informative: usize, classes: usize) -> f64 {
    2.0 * CONFOUNDED_HALF_RANGE * (informative as f64).sqrt() / classes as f64
}

/// Generate a synthetic dataset; samples are laid out class by class.
pub fn make_synthetic(spec: &SyntheticSpec) -> Result<Dataset> {
    spec.validate()?;
    let mut rng = seed::rng(spec.seed);
    let n = spec.features;
    let total = spec.per_class * spec.classes;
    let mut features = Array2::<f64>::zeros((total, n));
    let mut labels = Vec::with_capacity(total);
    let gauss = |rng: &mut seed::Rng| -> f64 { StandardNormal.sample(rng) };

    match spec.kind {
        SyntheticKind::Blobs => {
            let centers: Vec<Vec<f64>> = (0..spec.classes)
                .map(|_| (0..n).map(|_| rng.random_range(0.2..0.8)).collect())
                .collect();
            for (c, center) in centers.iter().enumerate() {
                for s in 0..spec.per_class {
                    let row = c * spec.per_class + s;
                    for k in 0..n {
                        features[[row, k]] = (center[k] + spec.noise * gauss(&mut rng)).clamp(0.0, 1.0);
                    }
                    labels.push(c);
                }
            }
        }
        SyntheticKind::Moons => {
            for c in 0..2 {
                for s in 0..spec.per_class {
                    let row = c * spec.per_class + s;
                    let t = std::f64::consts::PI * rng.random::<f64>();
                    let (x, y) = if c == 0 {
                        (t.cos(), t.sin())
                    } else {
                        (1.0 - t.cos(), 0.5 - t.sin())
                    };
                    // x in [-1, 2], y in [-0.5, 1] -> [0.1, 0.9]
                    let x = 0.1 + 0.8 * (x + 1.0) / 3.0;
                    let y = 0.1 + 0.8 * (y + 0.5) / 1.5;
                    features[[row, 0]] = (x + spec.noise * gauss(&mut rng)).clamp(0.0, 1.0);
                    features[[row, 1]] = (y + spec.noise * gauss(&mut rng)).clamp(0.0, 1.0);
                    for k in 2..n {
                        features[[row, k]] = (0.5 + spec.noise * gauss(&mut rng)).clamp(0.0, 1.0);
                    }
                    labels.push(c);
                }
            }
        }
        SyntheticKind::Confounded => {
            let m = n - spec.nuisance;
            let sqrt_m = (m as f64).sqrt();
            let half = CONFOUNDED_HALF_RANGE * sqrt_m;
            let band = confounded_band_width(m, spec.classes);
            // Per feature, half the clusters sit high and half low, so every
            // nuisance feature has the full between-cluster spread.
            let mut centers = vec![vec![0.0; spec.nuisance]; NUISANCE_CLUSTERS];
            for k in 0..spec.nuisance {
                let mut levels: Vec<f64> = (0..NUISANCE_CLUSTERS)
                    .map(|j| if j % 2 == 0 { NUISANCE_HIGH } else { NUISANCE_LOW })
                    .collect();
                levels.shuffle(&mut rng);
                for (j, level) in levels.into_iter().enumerate() {
                    centers[j][k] = level;
                }
            }
            for c in 0..spec.classes {
                let lo = -half + c as f64 * band + spec.noise;
                let hi = -half + (c + 1) as f64 * band - spec.noise;
                for s in 0..spec.per_class {
                    let row = c * spec.per_class + s;
                    // Score along the all-ones direction fixes the class; the
                    // orthogonal part only carries noise.
                    let score = rng.random_range(lo..=hi);
                    let mut ortho: Vec<f64> = (0..m).map(|_| spec.noise * gauss(&mut rng)).collect();
                    let mean = ortho.iter().sum::<f64>() / m as f64;
                    for v in &mut ortho {
                        *v = (*v - mean).clamp(-CONFOUNDED_HALF_RANGE, CONFOUNDED_HALF_RANGE);
                    }
                    let mean = ortho.iter().sum::<f64>() / m as f64;
                    for k in 0..m {
                        features[[row, k]] = 0.5 + score / sqrt_m + (ortho[k] - mean);
                    }
                    let cluster = &centers[rng.random_range(0..NUISANCE_CLUSTERS)];
                    for (k, &center) in cluster.iter().enumerate() {
                        features[[row, m + k]] =
                            (center + NUISANCE_SPREAD * gauss(&mut rng)).clamp(0.0, 1.0);
                    }
                    labels.push(c);
                }
            }
        }
    }
    Dataset::new(features, labels, spec.classes)
}

/// Stratified split; each class contributes `round(count * test_fraction)`
/// samples (at least one, never all) to the test half.
pub fn split(data: &Dataset, test_fraction: f64, seed: u64) -> Result<SplitPair> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::InvalidArgument(format!("test fraction {test_fraction} not in (0, 1)")));
    }
    let n = data.len() as f64;
    if n * test_fraction < 1.0 || n * (1.0 - test_fraction) < 1.0 {
        return Err(Error::InvalidArgument(format!(
            "{} samples cannot be split with test fraction {test_fraction}",
            data.len()
        )));
    }
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); data.classes()];
    for (i, &y) in data.labels().iter().enumerate() {
        by_class[y].push(i);
    }
    let mut rng = seed::rng(seed);
    let mut train_indices = Vec::new();
    let mut test_indices = Vec::new();
    for (class, mut members) in by_class.into_iter().enumerate() {
        if members.is_empty() {
            continue;
        }
        if members.len() < 2 {
            return Err(Error::Stratification {
                class,
                count: members.len(),
            });
        }
        members.shuffle(&mut rng);
        let take = ((members.len() as f64 * test_fraction).round() as usize).clamp(1, members.len() - 1);
        test_indices.extend_from_slice(&members[..take]);
        train_indices.extend_from_slice(&members[take..]);
    }
    train_indices.sort_unstable();
    test_indices.sort_unstable();
    Ok(SplitPair {
        train: data.select(&train_indices),
        test: data.select(&test_indices),
        train_indices,
        test_indices,
    })
}

fn read_file(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

fn be_u32(bytes: &[u8], offset: usize, path: &Path) -> Result<u32> {
    bytes
        .get(offset..offset + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or_else(|| Error::Format {
            path: path.to_path_buf(),
            message: "truncated IDX header".into(),
        })
}

/// Load an IDX image/label file pair (the MNIST container).
pub fn load_idx(images_path: impl AsRef<Path>, labels_path: impl AsRef<Path>) -> Result<Dataset> {
    let images_path = images_path.as_ref();
    let labels_path = labels_path.as_ref();
    let images = read_file(images_path)?;
    let labels = read_file(labels_path)?;

    let magic = be_u32(&images, 0, images_path)?;
    if magic != IDX_IMAGES_MAGIC {
        return Err(Error::Format {
            path: images_path.to_path_buf(),
            message: format!("bad IDX image magic {magic:#010x}, expected {IDX_IMAGES_MAGIC:#010x}"),
        });
    }
    let magic = be_u32(&labels, 0, labels_path)?;
    if magic != IDX_LABELS_MAGIC {
        return Err(Error::Format {
            path: labels_path.to_path_buf(),
            message: format!("bad IDX label magic {magic:#010x}, expected {IDX_LABELS_MAGIC:#010x}"),
        });
    }
    let count = be_u32(&images, 4, images_path)? as usize;
    let rows = be_u32(&images, 8, images_path)? as usize;
    let cols = be_u32(&images, 12, images_path)? as usize;
    let label_count = be_u32(&labels, 4, labels_path)? as usize;
    if count != label_count {
        return Err(Error::Consistency(format!(
            "{} holds {count} images but {} holds {label_count} labels",
            images_path.display(),
            labels_path.display()
        )));
    }
    let n = rows * cols;
    let pixels = &images[16..];
    if pixels.len() != count * n {
        return Err(Error::Format {
            path: images_path.to_path_buf(),
            message: format!("expected {} pixel bytes, found {}", count * n, pixels.len()),
        });
    }
    let label_bytes = &labels[8..];
    if label_bytes.len() != count {
        return Err(Error::Format {
            path: labels_path.to_path_buf(),
            message: format!("expected {count} label bytes, found {}", label_bytes.len()),
        });
    }
    let features = Array2::from_shape_vec((count, n), pixels.iter().map(|&p| f64::from(p) / 255.0).collect())
        .expect("shape checked above");
    let labels: Vec<usize> = label_bytes.iter().map(|&b| usize::from(b)).collect();
    let classes = labels.iter().max().map_or(2, |&m| (m + 1).max(2));
    Dataset::new(features, labels, classes)
}

/// Load a numeric CSV. Features are min-max normalized per column (constant
/// columns become 0.0); distinct label values are relabeled to `0..C` in
/// ascending order.
pub fn load_csv(path: impl AsRef<Path>, label_column: usize, has_header: bool) -> Result<Dataset> {
    let path = path.as_ref();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(has_header)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::Format {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut raw_labels: Vec<i64> = Vec::new();
    let mut width = None;
    for (r, record) in reader.records().enumerate() {
        let row_no = r + 1 + usize::from(has_header);
        let record = record.map_err(|e| Error::Parse {
            row: row_no,
            message: e.to_string(),
        })?;
        let w = *width.get_or_insert(record.len());
        if record.len() != w {
            return Err(Error::Parse {
                row: row_no,
                message: format!("expected {w} columns, found {}", record.len()),
            });
        }
        if label_column >= w {
            return Err(Error::Parse {
                row: row_no,
                message: format!("label column {label_column} but only {w} columns"),
            });
        }
        let mut feats = Vec::with_capacity(w - 1);
        for (c, cell) in record.iter().enumerate() {
            let v: f64 = cell.parse().map_err(|_| Error::Parse {
                row: row_no,
                message: format!("column {c}: non-numeric cell {cell:?}"),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    row: row_no,
                    message: format!("column {c}: non-finite value"),
                });
            }
            if c == label_column {
                if v.fract() != 0.0 {
                    return Err(Error::Parse {
                        row: row_no,
                        message: format!("label {v} is not an integer"),
                    });
                }
                raw_labels.push(v as i64);
            } else {
                feats.push(v);
            }
        }
        rows.push(feats);
    }
    let width = width.unwrap_or(0);
    if rows.is_empty() || width < 2 {
        return Err(Error::Format {
            path: path.to_path_buf(),
            message: "need at least one row with a label and a feature column".into(),
        });
    }
    let relabel: BTreeMap<i64, usize> = raw_labels
        .iter()
        .copied()
        .collect::<std::collections::BTreeSet<_>>()
        .into_iter()
        .enumerate()
        .map(|(i, v)| (v, i))
        .collect();
    if relabel.len() < 2 {
        return Err(Error::Parse {
            row: 1,
            message: "labels must take at least two distinct values".into(),
        });
    }
    let n = width - 1;
    let mut features = Array2::<f64>::zeros((rows.len(), n));
    for (i, row) in rows.iter().enumerate() {
        for (k, &v) in row.iter().enumerate() {
            features[[i, k]] = v;
        }
    }
    min_max_normalize(&mut features);
    let labels = raw_labels.iter().map(|v| relabel[v]).collect();
    Dataset::new(features, labels, relabel.len())
}

/// Per-column min-max scaling into `[0, 1]`; constant columns map to 0.0.
pub fn min_max_normalize(features: &mut Array2<f64>) {
    for mut col in features.columns_mut() {
        let lo = col.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = col.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let range = hi - lo;
        if range > 0.0 {
            col.mapv_inplace(|v| ((v - lo) / range).clamp(0.0, 1.0));
        } else {
            col.fill(0.0);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_idx(dir: &Path, images: &[u8], n: usize, labels: &[u8], magic: u32) -> (std::path::PathBuf, std::path::PathBuf) {
        let img = dir.join("images");
        let lab = dir.join("labels");
        let mut f = fs::File::create(&img).unwrap();
        f.write_all(&magic.to_be_bytes()).unwrap();
        f.write_all(&((images.len() / (n * n)) as u32).to_be_bytes()).unwrap();
        f.write_all(&(n as u32).to_be_bytes()).unwrap();
        f.write_all(&(n as u32).to_be_bytes()).unwrap();
        f.write_all(images).unwrap();
        let mut f = fs::File::create(&lab).unwrap();
        f.write_all(&IDX_LABELS_MAGIC.to_be_bytes()).unwrap();
        f.write_all(&(labels.len() as u32).to_be_bytes()).unwrap();
        f.write_all(labels).unwrap();
        (img, lab)
    }

    #[test]
    fn idx_shape_and_normalization() {
        let dir = tempfile::tempdir().unwrap();
        let mut pixels = vec![0u8; 3 * 784];
        pixels[0] = 255;
        let (img, lab) = write_idx(dir.path(), &pixels, 28, &[0, 1, 2], IDX_IMAGES_MAGIC);
        let d = load_idx(&img, &lab).unwrap();
        assert_eq!(d.len(), 3);
        assert_eq!(d.n_features(), 784);
        assert_eq!(d.features()[[0, 0]], 1.0);
        assert_eq!(d.features()[[0, 1]], 0.0);
        assert_eq!(d.classes(), 3);
    }

    #[test]
    fn idx_bad_magic_names_file() {
        let dir = tempfile::tempdir().unwrap();
        let (img, lab) = write_idx(dir.path(), &[0u8; 4], 2, &[0], 0x0000_0802);
        let err = load_idx(&img, &lab).unwrap_err();
        assert!(matches!(&err, Error::Format { path, .. } if path == &img), "{err}");
    }

    #[test]
    fn idx_count_mismatch() {
        let dir = tempfile::tempdir().unwrap();
        let (img, lab) = write_idx(dir.path(), &[0u8; 8], 2, &[0, 1, 1], IDX_IMAGES_MAGIC);
        assert!(matches!(load_idx(&img, &lab), Err(Error::Consistency(_))));
    }

    #[test]
    fn csv_shape_and_min_max() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("t.csv");
        fs::write(&p, "1,2,0\n3,2,1\n5,2,1\n3,2,0\n").unwrap();
        let d = load_csv(&p, 2, false).unwrap();
        assert_eq!((d.len(), d.n_features()), (4, 2));
        let col0: Vec<f64> = d.features().column(0).to_vec();
        assert_eq!(col0, vec![0.0, 0.5, 1.0, 0.5]);
        assert!(d.features().column(1).iter().all(|&v| v == 0.0));
        assert_eq!(d.labels(), &[0, 1, 1, 0]);
    }

    #[test]
    fn csv_relabels_sparse_integers() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("t.csv");
        fs::write(&p, "x,y,label\n0.1,0.2,7\n0.3,0.4,-2\n").unwrap();
        let d = load_csv(&p, 2, true).unwrap();
        assert_eq!(d.labels(), &[1, 0]);
    }

    #[test]
    fn csv_errors_carry_row_numbers() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("t.csv");
        fs::write(&p, "1,2,0\n3,x,1\n").unwrap();
        assert!(matches!(load_csv(&p, 2, false), Err(Error::Parse { row: 2, .. })));
        fs::write(&p, "1,2,0\n3,1\n").unwrap();
        assert!(matches!(load_csv(&p, 2, false), Err(Error::Parse { row: 2, .. })));
        fs::write(&p, "1,2,0\n3,1,0.5\n").unwrap();
        assert!(matches!(load_csv(&p, 2, false), Err(Error::Parse { row: 2, .. })));
    }

    #[test]
    fn synthetic_is_reproducible() {
        let spec = SyntheticSpec {
            seed: 7,
            ..Default::default()
        };
        let a = make_synthetic(&spec).unwrap();
        let b = make_synthetic(&spec).unwrap();
        let bits = |d: &Dataset| d.features().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&a), bits(&b));
        assert_eq!(a.labels(), b.labels());
    }

    #[test]
    fn zero_noise_blobs_sit_on_centers() {
        let spec = SyntheticSpec {
            noise: 0.0,
            classes: 3,
            features: 4,
            per_class: 20,
            ..Default::default()
        };
        let d = make_synthetic(&spec).unwrap();
        for c in 0..3 {
            let first = d.features().row(c * 20).to_owned();
            for s in 0..20 {
                assert_eq!(d.features().row(c * 20 + s), first);
            }
        }
    }

    #[test]
    fn confounded_labels_follow_informative_features() {
        let spec = SyntheticSpec {
            kind: SyntheticKind::Confounded,
            per_class: 150,
            features: 8,
            classes: 2,
            noise: 0.03,
            nuisance: 6,
            seed: 11,
        };
        let d = make_synthetic(&spec).unwrap();
        for (row, &y) in d.features().rows().into_iter().zip(d.labels()) {
            let inf: Vec<f64> = row.iter().take(2).copied().collect();
            assert_eq!(spec.confounded_label(&inf), y);
        }
        let var = |k: usize| {
            let col = d.features().column(k);
            let m = col.mean().unwrap();
            col.iter().map(|v| (v - m).powi(2)).sum::<f64>() / col.len() as f64
        };
        let informative = (var(0) + var(1)) / 2.0;
        let nuisance_min = (2..8).map(var).fold(f64::INFINITY, f64::min);
        assert!(nuisance_min >= 4.0 * informative, "{nuisance_min} vs {informative}");
    }

    #[test]
    fn confounded_rejects_too_many_nuisance_features() {
        let spec = SyntheticSpec {
            kind: SyntheticKind::Confounded,
            features: 4,
            nuisance: 4,
            ..Default::default()
        };
        assert!(make_synthetic(&spec).is_err());
    }

    #[test]
    fn split_counts_and_stratification() {
        let spec = SyntheticSpec {
            per_class: 50,
            ..Default::default()
        };
        let d = make_synthetic(&spec).unwrap();
        let s = split(&d, 0.2, 3).unwrap();
        assert_eq!((s.train.len(), s.test.len()), (80, 20));
        assert_eq!(s.test.class_counts(), vec![10, 10]);
        let again = split(&d, 0.2, 3).unwrap();
        assert_eq!(s.test_indices, again.test_indices);
        let mut all: Vec<usize> = s.train_indices.iter().chain(&s.test_indices).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..100).collect::<Vec<_>>());
    }

    #[test]
    fn split_needs_two_per_class() {
        let features = Array2::zeros((5, 1));
        let d = Dataset::new(features, vec![0, 0, 0, 0, 1], 2).unwrap();
        assert!(matches!(split(&d, 0.4, 0), Err(Error::Stratification { class: 1, count: 1 })));
    }
}
