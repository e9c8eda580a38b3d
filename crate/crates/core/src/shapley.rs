//! Shapley attributions of a classifier's output.
//!
//! Feature "absence" is interventional: an absent feature takes its value
//! from a background sample, and a coalition's value is the model output
//! averaged over the whole background set.

use ndarray::{Array2, ArrayView1, ArrayView2, Axis};
use rand::seq::{index, SliceRandom};
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::{argmax, seed, Error, ProbaModel, Result};

/// Exact enumeration costs `2^n` coalition evaluations.
pub const EXACT_FEATURE_LIMIT: usize = 20;

/// Upper bound on rows per model call when evaluating coalitions.
const ROWS_PER_CALL: usize = 4096;

#[derive(Clone, Debug, PartialEq)]
pub struct BackgroundSet {
    rows: Array2<f64>,
}

impl BackgroundSet {
    pub fn new(rows: Array2<f64>) -> Result<Self> {
        if rows.nrows() == 0 {
            return Err(Error::InvalidArgument("background set is empty".into()));
        }
        Ok(Self { rows })
    }

    /// `count` distinct samples (or all, if fewer) drawn with a seeded generator.
    pub fn sample(data: &Dataset, count: usize, seed: u64) -> Result<Self> {
        let count = count.min(data.len());
        let mut rng = seed::rng(seed);
        let picked = index::sample(&mut rng, data.len(), count).into_vec();
        Self::new(data.features().select(Axis(0), &picked))
    }

    pub fn rows(&self) -> &Array2<f64> {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.nrows() == 0
    }
}

fn check_widths<M: ProbaModel + ?Sized>(model: &M, x: &[f64], background: &BackgroundSet) -> Result<()> {
    let n = model.n_features();
    for found in [x.len(), background.rows.ncols()] {
        if found != n {
            return Err(Error::Shape { expected: n, found });
        }
    }
    Ok(())
}

/// Mean class probabilities over the background for each coalition.
/// Row `i` of the result belongs to `coalitions[i]`.
fn coalition_outputs<M: ProbaModel + ?Sized>(
    model: &M,
    x: &[f64],
    background: &BackgroundSet,
    coalitions: &[Vec<bool>],
) -> Array2<f64> {
    let b = background.len();
    let n = x.len();
    let per_call = (ROWS_PER_CALL / b).max(1);
    let mut out = Array2::zeros((coalitions.len(), model.n_classes()));
    for (chunk_index, chunk) in coalitions.chunks(per_call).enumerate() {
        let mut hybrid = Array2::zeros((chunk.len() * b, n));
        for (s, present) in chunk.iter().enumerate() {
            let mut block = hybrid.slice_mut(ndarray::s![s * b..(s + 1) * b, ..]);
            block.assign(&background.rows);
            for (k, _) in present.iter().enumerate().filter(|(_, &p)| p) {
                block.column_mut(k).fill(x[k]);
            }
        }
        let proba = model.predict_proba_batch(hybrid.view());
        for s in 0..chunk.len() {
            let mean = proba
                .slice(ndarray::s![s * b..(s + 1) * b, ..])
                .mean_axis(Axis(0))
                .expect("non-empty background");
            out.row_mut(chunk_index * per_call + s).assign(&mean);
        }
    }
    out
}

/// Model output for `target_class` with only `present` features taken from
/// `x`, averaged over the background.
pub fn coalition_value<M: ProbaModel + ?Sized>(
    model: &M,
    x: &[f64],
    background: &BackgroundSet,
    present: &[bool],
    target_class: usize,
) -> Result<f64> {
    check_widths(model, x, background)?;
    if present.len() != x.len() {
        return Err(Error::Shape {
            expected: x.len(),
            found: present.len(),
        });
    }
    check_target(model, target_class)?;
    Ok(coalition_outputs(model, x, background, &[present.to_vec()])[[0, target_class]])
}

fn check_target<M: ProbaModel + ?Sized>(model: &M, target_class: usize) -> Result<()> {
    if target_class >= model.n_classes() {
        return Err(Error::InvalidArgument(format!(
            "target class {target_class} but the model has {} classes",
            model.n_classes()
        )));
    }
    Ok(())
}

/// Expected output for `target_class` over the background (empty coalition).
pub fn base_value<M: ProbaModel + ?Sized>(model: &M, background: &BackgroundSet, target_class: usize) -> Result<f64> {
    check_target(model, target_class)?;
    let proba = model.predict_proba_batch(background.rows.view());
    Ok(proba.column(target_class).mean().expect("non-empty background"))
}

/// Shapley values by full enumeration of coalitions. Refuses more than
/// [`EXACT_FEATURE_LIMIT`] features.
pub fn exact_shapley<M: ProbaModel + ?Sized>(
    model: &M,
    x: &[f64],
    background: &BackgroundSet,
    target_class: usize,
) -> Result<Vec<f64>> {
    check_widths(model, x, background)?;
    check_target(model, target_class)?;
    let n = x.len();
    if n > EXACT_FEATURE_LIMIT {
        return Err(Error::TooManyFeatures {
            features: n,
            limit: EXACT_FEATURE_LIMIT,
        });
    }
    let masks: Vec<Vec<bool>> = (0..1usize << n)
        .map(|m| (0..n).map(|k| m & (1 << k) != 0).collect())
        .collect();
    let values = coalition_outputs(model, x, background, &masks).column(target_class).to_vec();

    // weight(s) = s! (n - s - 1)! / n! = 1 / (n * C(n - 1, s))
    let mut weights = vec![0.0; n];
    let mut binom = 1.0;
    for (s, w) in weights.iter_mut().enumerate() {
        *w = 1.0 / (n as f64 * binom);
        binom = binom * (n - 1 - s) as f64 / (s + 1) as f64;
    }
    let mut phi = vec![0.0; n];
    for (k, phi_k) in phi.iter_mut().enumerate() {
        let bit = 1usize << k;
        for mask in (0..1usize << n).filter(|m| m & bit == 0) {
            let size = mask.count_ones() as usize;
            *phi_k += weights[size] * (values[mask | bit] - values[mask]);
        }
    }
    Ok(phi)
}

/// Permutation-sampling estimate for every class at once: entry `[k, c]` is
/// the attribution of feature `k` to the probability of class `c`.
fn mc_shapley_all<M: ProbaModel + ?Sized>(
    model: &M,
    x: &[f64],
    background: &BackgroundSet,
    permutations: usize,
    seed: u64,
) -> Array2<f64> {
    let n = x.len();
    let mut rng = seed::rng(seed);
    let mut order: Vec<usize> = (0..n).collect();
    let mut sums = Array2::<f64>::zeros((n, model.n_classes()));
    for _ in 0..permutations {
        order.shuffle(&mut rng);
        let mut present = vec![false; n];
        let mut prefixes = Vec::with_capacity(n + 1);
        prefixes.push(present.clone());
        for &k in &order {
            present[k] = true;
            prefixes.push(present.clone());
        }
        let values = coalition_outputs(model, x, background, &prefixes);
        for (step, &k) in order.iter().enumerate() {
            let gain = &values.row(step + 1) - &values.row(step);
            let mut row = sums.row_mut(k);
            row += &gain;
        }
    }
    sums / permutations as f64
}

/// Monte-Carlo permutation estimate of the Shapley values for
/// `target_class`. Deterministic for a fixed seed.
pub fn mc_shapley<M: ProbaModel + ?Sized>(
    model: &M,
    x: &[f64],
    background: &BackgroundSet,
    target_class: usize,
    permutations: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    check_widths(model, x, background)?;
    check_target(model, target_class)?;
    if permutations == 0 {
        return Err(Error::InvalidArgument("need at least one permutation".into()));
    }
    Ok(mc_shapley_all(model, x, background, permutations, seed)
        .column(target_class)
        .to_vec())
}

/// Which model output a [`ShapleyMatrix`] row explains.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AttributionTarget {
    /// One n-vector per sample: the probability of its predicted class.
    #[default]
    PredictedClass,
    /// All class probabilities, concatenated class by class (width n·C).
    AllClasses,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ShapleyMatrix {
    pub values: Array2<f64>,
    /// Expected output of the explained class over the background.
    pub base_values: Vec<f64>,
    /// Predicted class of each sample.
    pub explained_classes: Vec<usize>,
    pub target: AttributionTarget,
}

impl ShapleyMatrix {
    pub fn len(&self) -> usize {
        self.values.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.values.nrows() == 0
    }
}

/// Attributions for every sample of `data`, explaining each sample's
/// predicted-class probability. Row `i` uses the seed derived from
/// `(seed, i)`, so results do not depend on evaluation order.
pub fn shapley_dataset<M: ProbaModel + Sync + ?Sized>(
    model: &M,
    data: &Dataset,
    background: &BackgroundSet,
    permutations: usize,
    seed: u64,
) -> Result<ShapleyMatrix> {
    shapley_dataset_with(model, data.features().view(), background, permutations, seed, AttributionTarget::PredictedClass)
}

pub fn shapley_dataset_with<M: ProbaModel + Sync + ?Sized>(
    model: &M,
    samples: ArrayView2<'_, f64>,
    background: &BackgroundSet,
    permutations: usize,
    seed: u64,
    target: AttributionTarget,
) -> Result<ShapleyMatrix> {
    let n = model.n_features();
    if samples.ncols() != n || background.rows.ncols() != n {
        return Err(Error::Shape {
            expected: n,
            found: if samples.ncols() != n { samples.ncols() } else { background.rows.ncols() },
        });
    }
    if permutations == 0 {
        return Err(Error::InvalidArgument("need at least one permutation".into()));
    }
    let c = model.n_classes();
    let proba = model.predict_proba_batch(samples);
    let predicted: Vec<usize> = proba
        .rows()
        .into_iter()
        .map(|r: ArrayView1<'_, f64>| argmax(&r.to_vec()))
        .collect();
    let background_mean = model
        .predict_proba_batch(background.rows.view())
        .mean_axis(Axis(0))
        .expect("non-empty background");

    let row = |i: usize| -> Vec<f64> {
        let x = samples.row(i).to_vec();
        let all = mc_shapley_all(model, &x, background, permutations, seed::derive(seed, i as u64));
        match target {
            AttributionTarget::PredictedClass => all.column(predicted[i]).to_vec(),
            AttributionTarget::AllClasses => all.t().iter().copied().collect(),
        }
    };
    #[cfg(feature = "parallel")]
    let rows: Vec<Vec<f64>> = {
        use rayon::prelude::*;
        (0..samples.nrows()).into_par_iter().map(row).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let rows: Vec<Vec<f64>> = (0..samples.nrows()).map(row).collect();

    let width = match target {
        AttributionTarget::PredictedClass => n,
        AttributionTarget::AllClasses => n * c,
    };
    let values = Array2::from_shape_vec((rows.len(), width), rows.into_iter().flatten().collect())
        .expect("rows have equal width");
    Ok(ShapleyMatrix {
        values,
        base_values: predicted.iter().map(|&p| background_mean[p]).collect(),
        explained_classes: predicted,
        target,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    /// Two-class model whose class-1 output is `w · x` (class 0 gets the rest).
    struct Additive(Vec<f64>);

    impl ProbaModel for Additive {
        fn n_features(&self) -> usize {
            self.0.len()
        }
        fn n_classes(&self) -> usize {
            2
        }
        fn predict_proba_batch(&self, x: ArrayView2<'_, f64>) -> Array2<f64> {
            let mut out = Array2::zeros((x.nrows(), 2));
            for (i, row) in x.rows().into_iter().enumerate() {
                let v: f64 = row.iter().zip(&self.0).map(|(a, b)| a * b).sum();
                out[[i, 1]] = v;
                out[[i, 0]] = 1.0 - v;
            }
            out
        }
    }

    struct Constant;

    impl ProbaModel for Constant {
        fn n_features(&self) -> usize {
            3
        }
        fn n_classes(&self) -> usize {
            2
        }
        fn predict_proba_batch(&self, x: ArrayView2<'_, f64>) -> Array2<f64> {
            Array2::from_shape_fn((x.nrows(), 2), |(_, c)| if c == 0 { 0.3 } else { 0.7 })
        }
    }

    #[test]
    fn full_and_empty_coalitions() {
        let m = Additive(vec![0.2, 0.5]);
        let bg = BackgroundSet::new(array![[0.0, 1.0], [1.0, 0.0]]).unwrap();
        let x = [0.4, 0.6];
        let full = coalition_value(&m, &x, &bg, &[true, true], 1).unwrap();
        assert!((full - (0.2 * 0.4 + 0.5 * 0.6)).abs() < 1e-15);
        let empty = coalition_value(&m, &x, &bg, &[false, false], 1).unwrap();
        assert!((empty - base_value(&m, &bg, 1).unwrap()).abs() < 1e-15);
    }

    #[test]
    fn single_background_hybrid() {
        let m = Additive(vec![0.2, 0.5]);
        let bg = BackgroundSet::new(array![[0.9, 0.1]]).unwrap();
        let v = coalition_value(&m, &[0.4, 0.6], &bg, &[true, false], 1).unwrap();
        assert!((v - (0.2 * 0.4 + 0.5 * 0.1)).abs() < 1e-15);
    }

    #[test]
    fn additive_model_attribution_is_weighted_difference() {
        let w = vec![0.1, -0.2, 0.3, 0.05];
        let m = Additive(w.clone());
        let b = [0.5, 0.2, 0.9, 0.0];
        let bg = BackgroundSet::new(Array2::from_shape_vec((1, 4), b.to_vec()).unwrap()).unwrap();
        let x = [0.1, 0.7, 0.3, 1.0];
        let phi = exact_shapley(&m, &x, &bg, 1).unwrap();
        for k in 0..4 {
            assert!((phi[k] - w[k] * (x[k] - b[k])).abs() < 1e-12);
        }
    }

    #[test]
    fn constant_model_gets_zero_attribution() {
        let bg = BackgroundSet::new(array![[0.1, 0.2, 0.3], [0.4, 0.5, 0.6]]).unwrap();
        let x = [0.9, 0.8, 0.7];
        assert!(exact_shapley(&Constant, &x, &bg, 1).unwrap().iter().all(|&v| v == 0.0));
        assert!(mc_shapley(&Constant, &x, &bg, 1, 17, 3).unwrap().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn exact_refuses_wide_inputs() {
        let m = Additive(vec![0.01; 21]);
        let bg = BackgroundSet::new(Array2::zeros((1, 21))).unwrap();
        assert!(matches!(
            exact_shapley(&m, &[0.0; 21], &bg, 1),
            Err(Error::TooManyFeatures { features: 21, .. })
        ));
    }

    #[test]
    fn empty_background_is_rejected() {
        assert!(BackgroundSet::new(Array2::zeros((0, 3))).is_err());
    }
}
