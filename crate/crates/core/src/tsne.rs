//! Exact t-SNE.
//!
//! Affinities are calibrated per row by bisection on the Gaussian precision,
//! then the embedding is optimized by gradient descent on KL(P || Q) with a
//! Student-t kernel, early exaggeration, momentum and per-coordinate gains.
//! Everything is O(N²); intended for at most a few thousand points.

use ndarray::{Array2, ArrayView2, Axis};
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::{seed, Error, Result};

/// Squared distances are floored here before calibration so identical rows
/// stay well defined.
pub const MIN_SQUARED_DISTANCE: f64 = 1e-12;
/// Off-diagonal joint affinities never drop below this.
pub const MIN_AFFINITY: f64 = 1e-12;

const BISECTION_STEPS: usize = 50;
const ENTROPY_TOLERANCE_BITS: f64 = 1e-3;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TsneConfig {
    pub perplexity: f64,
    pub iterations: usize,
    pub learning_rate: f64,
    pub early_exaggeration: f64,
    pub exaggeration_iterations: usize,
    pub initial_momentum: f64,
    pub final_momentum: f64,
    pub momentum_switch: usize,
    pub seed: u64,
}

impl Default for TsneConfig {
    fn default() -> Self {
        Self {
            perplexity: 30.0,
            iterations: 1000,
            learning_rate: 200.0,
            early_exaggeration: 12.0,
            exaggeration_iterations: 250,
            initial_momentum: 0.5,
            final_momentum: 0.8,
            momentum_switch: 250,
            seed: 0,
        }
    }
}

impl TsneConfig {
    pub fn validate(&self, n: usize) -> Result<()> {
        check_perplexity(n, self.perplexity)?;
        if self.iterations < 250 {
            return Err(Error::InvalidArgument(format!("need at least 250 iterations, got {}", self.iterations)));
        }
        let positive = [self.learning_rate, self.early_exaggeration, self.initial_momentum, self.final_momentum];
        if positive.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
            return Err(Error::InvalidArgument("t-SNE rates and momenta must be positive".into()));
        }
        Ok(())
    }
}

fn check_perplexity(n: usize, perplexity: f64) -> Result<()> {
    if n < 4 {
        return Err(Error::InvalidArgument(format!("t-SNE needs at least 4 points, got {n}")));
    }
    if !(perplexity > 0.0 && perplexity < n as f64 / 3.0) {
        return Err(Error::InvalidArgument(format!(
            "perplexity {perplexity} must be positive and below N/3 = {:.3}",
            n as f64 / 3.0
        )));
    }
    Ok(())
}

/// Axis-aligned rectangle.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub xmin: f64,
    pub xmax: f64,
    pub ymin: f64,
    pub ymax: f64,
}

impl Bounds {
    /// Smallest rectangle containing every row of an N×2 matrix.
    pub fn of_points(coords: ArrayView2<'_, f64>) -> Self {
        let mut b = Bounds {
            xmin: f64::INFINITY,
            xmax: f64::NEG_INFINITY,
            ymin: f64::INFINITY,
            ymax: f64::NEG_INFINITY,
        };
        for row in coords.rows() {
            b.xmin = b.xmin.min(row[0]);
            b.xmax = b.xmax.max(row[0]);
            b.ymin = b.ymin.min(row[1]);
            b.ymax = b.ymax.max(row[1]);
        }
        b
    }

    pub fn width(&self) -> f64 {
        self.xmax - self.xmin
    }

    pub fn height(&self) -> f64 {
        self.ymax - self.ymin
    }

    /// Grown by `fraction` of the width/height on every side.
    pub fn with_margin(&self, fraction: f64) -> Self {
        let dx = self.width() * fraction;
        let dy = self.height() * fraction;
        Bounds {
            xmin: self.xmin - dx,
            xmax: self.xmax + dx,
            ymin: self.ymin - dy,
            ymax: self.ymax + dy,
        }
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        x >= self.xmin && x <= self.xmax && y >= self.ymin && y <= self.ymax
    }

    pub fn is_degenerate(&self) -> bool {
        !(self.width() > 0.0 && self.height() > 0.0 && self.width().is_finite() && self.height().is_finite())
    }
}

/// 2D coordinates of N samples, in input order.
#[derive(Clone, Debug, PartialEq)]
pub struct Embedding {
    coords: Array2<f64>,
    bounds: Bounds,
}

impl Embedding {
    pub fn new(coords: Array2<f64>) -> Result<Self> {
        if coords.ncols() != 2 {
            return Err(Error::Shape {
                expected: 2,
                found: coords.ncols(),
            });
        }
        if coords.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("embedding has non-finite coordinates".into()));
        }
        let bounds = Bounds::of_points(coords.view());
        Ok(Self { coords, bounds })
    }

    pub fn coords(&self) -> &Array2<f64> {
        &self.coords
    }

    pub fn bounds(&self) -> Bounds {
        self.bounds
    }

    pub fn len(&self) -> usize {
        self.coords.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.nrows() == 0
    }

    pub fn point(&self, i: usize) -> [f64; 2] {
        [self.coords[[i, 0]], self.coords[[i, 1]]]
    }
}

/// Squared Euclidean distances (diagonal zero), computed on column-centered
/// data and clamped at zero.
pub fn squared_distances(x: ArrayView2<'_, f64>) -> Array2<f64> {
    let n = x.nrows();
    let mean = x.mean_axis(Axis(0)).unwrap_or_else(|| ndarray::Array1::zeros(x.ncols()));
    let centered = &x - &mean;
    let mut d = Array2::zeros((n, n));
    if x.ncols() <= 32 {
        for i in 0..n {
            for j in (i + 1)..n {
                let s: f64 = centered
                    .row(i)
                    .iter()
                    .zip(centered.row(j))
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum();
                d[[i, j]] = s;
                d[[j, i]] = s;
            }
        }
    } else {
        let gram = centered.dot(&centered.t());
        for i in 0..n {
            for j in (i + 1)..n {
                let s = (gram[[i, i]] + gram[[j, j]] - 2.0 * gram[[i, j]]).max(0.0);
                d[[i, j]] = s;
                d[[j, i]] = s;
            }
        }
    }
    d
}

/// Per-row conditional distributions and their calibration results.
#[derive(Clone, Debug)]
pub struct Calibration {
    /// Row `i` holds `p_{j|i}`; zero diagonal.
    pub conditional: Array2<f64>,
    /// Shannon entropy of each row, in bits.
    pub entropies: Vec<f64>,
    /// Rows whose nearest neighbors are so tied that the target entropy is
    /// unreachable; they hold the limiting uniform distribution over the ties.
    pub saturated: Vec<usize>,
}

/// Entropy (bits) and unnormalized weights of one row for precision `beta`.
fn row_entropy(gaps: &[f64], beta: f64, weights: &mut [f64]) -> f64 {
    let mut sum = 0.0;
    let mut weighted = 0.0;
    for (w, &g) in weights.iter_mut().zip(gaps) {
        *w = (-beta * g).exp();
        sum += *w;
        weighted += *w * g;
    }
    (sum.ln() + beta * weighted / sum) / std::f64::consts::LN_2
}

/// Calibrate each row's Gaussian precision so its conditional distribution
/// has entropy `log2(perplexity)`.
pub fn calibrate(x: ArrayView2<'_, f64>, perplexity: f64) -> Result<Calibration> {
    let n = x.nrows();
    check_perplexity(n, perplexity)?;
    let dist = squared_distances(x).mapv(|d| d.max(MIN_SQUARED_DISTANCE));
    let target = perplexity.log2();

    let calibrate_row = |i: usize| -> Result<(Vec<f64>, f64, bool)> {
        let row: Vec<f64> = (0..n).filter(|&j| j != i).map(|j| dist[[i, j]]).collect();
        let dmin = row.iter().copied().fold(f64::INFINITY, f64::min);
        let gaps: Vec<f64> = row.iter().map(|d| d - dmin).collect();
        let ties = gaps.iter().filter(|&&g| g == 0.0).count();
        let mut weights = vec![0.0; gaps.len()];
        let (entropy, saturated) = if (ties as f64).log2() >= target - ENTROPY_TOLERANCE_BITS {
            for (w, &g) in weights.iter_mut().zip(&gaps) {
                *w = if g == 0.0 { 1.0 } else { 0.0 };
            }
            ((ties as f64).log2(), true)
        } else {
            let mean_gap = gaps.iter().sum::<f64>() / gaps.len() as f64;
            let mut beta = if mean_gap > 0.0 { 1.0 / mean_gap } else { 1.0 };
            let (mut lo, mut hi) = (0.0, f64::INFINITY);
            let mut entropy = row_entropy(&gaps, beta, &mut weights);
            for _ in 0..BISECTION_STEPS {
                let gap = entropy - target;
                if gap.abs() < 1e-6 {
                    break;
                }
                if gap > 0.0 {
                    lo = beta;
                    beta = if hi.is_finite() { 0.5 * (lo + hi) } else { beta * 2.0 };
                } else {
                    hi = beta;
                    beta = 0.5 * (lo + hi);
                }
                entropy = row_entropy(&gaps, beta, &mut weights);
            }
            let gap = (entropy - target).abs();
            if !(gap <= ENTROPY_TOLERANCE_BITS) {
                return Err(Error::Calibration { row: i, gap });
            }
            (entropy, false)
        };
        let sum: f64 = weights.iter().sum();
        let mut full = Vec::with_capacity(n);
        let mut it = weights.iter();
        for j in 0..n {
            full.push(if j == i { 0.0 } else { it.next().unwrap() / sum });
        }
        Ok((full, entropy, saturated))
    };

    #[cfg(feature = "parallel")]
    let rows: Vec<Result<(Vec<f64>, f64, bool)>> = {
        use rayon::prelude::*;
        (0..n).into_par_iter().map(calibrate_row).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let rows: Vec<Result<(Vec<f64>, f64, bool)>> = (0..n).map(calibrate_row).collect();

    let mut conditional = Array2::zeros((n, n));
    let mut entropies = Vec::with_capacity(n);
    let mut saturated = Vec::new();
    for (i, r) in rows.into_iter().enumerate() {
        let (p, h, sat) = r?;
        conditional.row_mut(i).assign(&ndarray::Array1::from(p));
        entropies.push(h);
        if sat {
            saturated.push(i);
        }
    }
    Ok(Calibration {
        conditional,
        entropies,
        saturated,
    })
}

/// Symmetric joint affinities `p_ij = (p_{j|i} + p_{i|j}) / 2N`, floored at
/// [`MIN_AFFINITY`] off the diagonal and renormalized to sum to one.
pub fn pairwise_affinities(x: ArrayView2<'_, f64>, perplexity: f64) -> Result<Array2<f64>> {
    let cond = calibrate(x, perplexity)?.conditional;
    Ok(symmetrize(&cond))
}

fn symmetrize(cond: &Array2<f64>) -> Array2<f64> {
    let n = cond.nrows();
    let mut p = Array2::zeros((n, n));
    for i in 0..n {
        for j in 0..n {
            if i != j {
                p[[i, j]] = ((cond[[i, j]] + cond[[j, i]]) / (2.0 * n as f64)).max(MIN_AFFINITY);
            }
        }
    }
    let total = p.sum();
    p / total
}

/// Row-parallel map with a fixed per-row summation order; results are
/// identical for any thread count.
fn map_rows<T: Send>(n: usize, f: impl Fn(usize) -> T + Sync + Send) -> Vec<T> {
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        (0..n).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..n).map(f).collect()
    }
}

fn kernel_sum(y: &Array2<f64>) -> f64 {
    let n = y.nrows();
    map_rows(n, |i| {
        let (xi, yi) = (y[[i, 0]], y[[i, 1]]);
        let mut s = 0.0;
        for j in 0..n {
            if j != i {
                let dx = xi - y[[j, 0]];
                let dy = yi - y[[j, 1]];
                s += 1.0 / (1.0 + dx * dx + dy * dy);
            }
        }
        s
    })
    .into_iter()
    .sum()
}

/// KL(P || Q) for joint affinities `p` and embedding `y`.
pub fn kl_divergence(p: &Array2<f64>, y: &Array2<f64>) -> f64 {
    let n = y.nrows();
    let z = kernel_sum(y);
    map_rows(n, |i| {
        let mut s = 0.0;
        for j in 0..n {
            let pij = p[[i, j]];
            if j != i && pij > 0.0 {
                let dx = y[[i, 0]] - y[[j, 0]];
                let dy = y[[i, 1]] - y[[j, 1]];
                let q = (1.0 / (1.0 + dx * dx + dy * dy)) / z;
                s += pij * (pij / q).ln();
            }
        }
        s
    })
    .into_iter()
    .sum()
}

fn gradient(p: &Array2<f64>, y: &Array2<f64>, exaggeration: f64) -> Array2<f64> {
    let n = y.nrows();
    let z = kernel_sum(y);
    let rows = map_rows(n, |i| {
        let (xi, yi) = (y[[i, 0]], y[[i, 1]]);
        let (mut gx, mut gy) = (0.0, 0.0);
        for j in 0..n {
            if j != i {
                let dx = xi - y[[j, 0]];
                let dy = yi - y[[j, 1]];
                let num = 1.0 / (1.0 + dx * dx + dy * dy);
                let m = (exaggeration * p[[i, j]] - num / z) * num;
                gx += m * dx;
                gy += m * dy;
            }
        }
        [4.0 * gx, 4.0 * gy]
    });
    Array2::from_shape_vec((n, 2), rows.into_iter().flatten().collect()).expect("n x 2")
}

pub fn tsne_fit(x: ArrayView2<'_, f64>, cfg: &TsneConfig) -> Result<Embedding> {
    Ok(tsne_fit_traced(x, cfg, &[])?.0)
}

/// Fit and record KL(P || Q) after each iteration listed in `checkpoints`
/// (1-based iteration counts).
pub fn tsne_fit_traced(
    x: ArrayView2<'_, f64>,
    cfg: &TsneConfig,
    checkpoints: &[usize],
) -> Result<(Embedding, Vec<(usize, f64)>)> {
    let n = x.nrows();
    cfg.validate(n)?;
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("t-SNE input has non-finite values".into()));
    }
    let p = pairwise_affinities(x, cfg.perplexity)?;

    let mut rng = seed::rng(cfg.seed);
    let normal = Normal::new(0.0, 1e-4).expect("valid std");
    let mut y = Array2::from_shape_fn((n, 2), |_| normal.sample(&mut rng));
    let mut update = Array2::<f64>::zeros((n, 2));
    let mut gains = Array2::<f64>::ones((n, 2));
    let mut trace = Vec::new();

    for it in 0..cfg.iterations {
        let exaggeration = if it < cfg.exaggeration_iterations { cfg.early_exaggeration } else { 1.0 };
        let momentum = if it < cfg.momentum_switch { cfg.initial_momentum } else { cfg.final_momentum };
        let grad = gradient(&p, &y, exaggeration);
        if grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::EmbeddingDivergence { iteration: it + 1 });
        }
        ndarray::Zip::from(&mut y)
            .and(&mut update)
            .and(&mut gains)
            .and(&grad)
            .for_each(|y, u, gain, &g| {
                *gain = if (*u > 0.0) != (g > 0.0) { *gain + 0.2 } else { *gain * 0.8 };
                *gain = gain.max(0.01);
                *u = momentum * *u - cfg.learning_rate * *gain * g;
                *y += *u;
            });
        if checkpoints.contains(&(it + 1)) {
            trace.push((it + 1, kl_divergence(&p, &y)));
        }
    }
    Ok((Embedding::new(y)?, trace))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn entropy_bits(row: ndarray::ArrayView1<'_, f64>) -> f64 {
        row.iter().filter(|&&p| p > 0.0).map(|&p| -p * p.log2()).sum()
    }

    #[test]
    fn generic_four_points_hit_target_entropy() {
        let x = array![[0.0, 0.0], [1.0, 0.0], [0.0, 1.5], [2.0, 2.0]];
        let cal = calibrate(x.view(), 1.2).unwrap();
        assert!(cal.saturated.is_empty());
        for (h, row) in cal.entropies.iter().zip(cal.conditional.rows()) {
            assert!((h - 1.2f64.log2()).abs() < 1e-3, "{h}");
            assert!((entropy_bits(row) - 1.2f64.log2()).abs() < 1e-3);
        }
    }

    #[test]
    fn unit_square_corners() {
        let x = array![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0]];
        // Perplexity 1.5 is not below N/3 for four points.
        assert!(matches!(calibrate(x.view(), 1.5), Err(Error::InvalidArgument(_))));
        // Two equidistant nearest neighbours put a floor of 1 bit on every
        // row's entropy, so a lower target saturates at that floor.
        let cal = calibrate(x.view(), 1.2).unwrap();
        assert_eq!(cal.saturated, vec![0, 1, 2, 3]);
        for row in cal.conditional.rows() {
            assert!((entropy_bits(row) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn perplexity_must_be_below_a_third_of_n() {
        let x = Array2::<f64>::zeros((6, 2));
        assert!(pairwise_affinities(x.view(), 2.0).is_err());
    }

    #[test]
    fn duplicates_do_not_error() {
        let x = array![[0.0, 0.0], [0.0, 0.0], [0.0, 0.0], [1.0, 1.0], [1.0, 0.0], [0.5, 0.2], [0.1, 0.9], [0.3, 0.3], [0.8, 0.1], [0.2, 0.6], [0.9, 0.9], [0.4, 0.7]];
        let p = pairwise_affinities(x.view(), 3.0).unwrap();
        assert!((p.sum() - 1.0).abs() < 1e-6);
        let same = Array2::<f64>::zeros((10, 3));
        let p = pairwise_affinities(same.view(), 2.0).unwrap();
        assert!((p.sum() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn bounds_with_margin() {
        let b = Bounds { xmin: 0.0, xmax: 10.0, ymin: -1.0, ymax: 1.0 }.with_margin(0.05);
        assert_eq!((b.xmin, b.xmax), (-0.5, 10.5));
        assert!((b.ymin + 1.1).abs() < 1e-12);
    }
}
