//! Run configuration: sectioned `key = value` text (TOML syntax).
//!
//! Every key has a default, so an empty file is a valid configuration.
//! Stage seeds are never configured directly; they are derived from
//! `run.seed` and the stage name.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::classifier::NetworkSpec;
use crate::dataset::SyntheticKind;
use crate::nn::{Activation, Optimizer, TrainConfig};
use crate::shapley::AttributionTarget;
use crate::tsne::TsneConfig;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Data,
    Shapley,
    Both,
}

impl Mode {
    pub fn runs_data(self) -> bool {
        matches!(self, Mode::Data | Mode::Both)
    }

    pub fn runs_shapley(self) -> bool {
        matches!(self, Mode::Shapley | Mode::Both)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSection {
    pub mode: Mode,
    pub seed: u64,
    pub out: PathBuf,
}

impl Default for RunSection {
    fn default() -> Self {
        Self {
            mode: Mode::Both,
            seed: 0,
            out: PathBuf::from("runs/default"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    Synthetic,
    Idx,
    Csv,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataSection {
    /// Row label in the comparison table; derived from the source when empty.
    pub name: String,
    pub source: Source,
    /// IDX image file, or the CSV table.
    pub path: PathBuf,
    /// IDX label file.
    pub labels: PathBuf,
    pub label_column: usize,
    pub has_header: bool,
    /// Keep only the first `limit` loaded samples (0 keeps all).
    pub limit: usize,
    pub test_fraction: f64,
    pub kind: SyntheticKind,
    pub per_class: usize,
    pub features: usize,
    pub classes: usize,
    pub noise: f64,
    pub nuisance: usize,
}

impl Default for DataSection {
    fn default() -> Self {
        Self {
            name: String::new(),
            source: Source::Synthetic,
            path: PathBuf::new(),
            labels: PathBuf::new(),
            label_column: 0,
            has_header: false,
            limit: 0,
            test_fraction: 0.2,
            kind: SyntheticKind::Blobs,
            per_class: 100,
            features: 2,
            classes: 2,
            noise: 0.05,
            nuisance: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClassifierSection {
    pub hidden: Vec<usize>,
    pub activation: Activation,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub optimizer: Optimizer,
}

impl Default for ClassifierSection {
    fn default() -> Self {
        Self {
            hidden: vec![256, 128],
            activation: Activation::Relu,
            epochs: 20,
            batch_size: 64,
            learning_rate: 1e-3,
            optimizer: Optimizer::adam(),
        }
    }
}

impl ClassifierSection {
    pub fn network(&self, inputs: usize, classes: usize) -> NetworkSpec {
        NetworkSpec::new(inputs, &self.hidden, classes, self.activation)
    }

    pub fn training(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            epochs: self.epochs,
            batch_size: self.batch_size,
            learning_rate: self.learning_rate,
            optimizer: self.optimizer,
            seed,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ShapleySection {
    /// Background samples, drawn from the test split.
    pub background: usize,
    pub permutations: usize,
    pub target: AttributionTarget,
    /// Attribute and project a seeded random subset of this many training
    /// samples (0 = all). Applies to both map spaces.
    pub subset: usize,
}

impl Default for ShapleySection {
    fn default() -> Self {
        Self {
            background: 100,
            permutations: 16,
            target: AttributionTarget::PredictedClass,
            subset: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProjectionSection {
    pub perplexity: f64,
    pub iterations: usize,
    pub learning_rate: f64,
    pub early_exaggeration: f64,
    pub exaggeration_iterations: usize,
    pub initial_momentum: f64,
    pub final_momentum: f64,
    pub momentum_switch: usize,
}

impl Default for ProjectionSection {
    fn default() -> Self {
        let t = TsneConfig::default();
        Self {
            perplexity: t.perplexity,
            iterations: t.iterations,
            learning_rate: t.learning_rate,
            early_exaggeration: t.early_exaggeration,
            exaggeration_iterations: t.exaggeration_iterations,
            initial_momentum: t.initial_momentum,
            final_momentum: t.final_momentum,
            momentum_switch: t.momentum_switch,
        }
    }
}

impl ProjectionSection {
    pub fn tsne(&self, seed: u64) -> TsneConfig {
        TsneConfig {
            perplexity: self.perplexity,
            iterations: self.iterations,
            learning_rate: self.learning_rate,
            early_exaggeration: self.early_exaggeration,
            exaggeration_iterations: self.exaggeration_iterations,
            initial_momentum: self.initial_momentum,
            final_momentum: self.final_momentum,
            momentum_switch: self.momentum_switch,
            seed,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InverseSection {
    pub hidden: Vec<usize>,
    pub activation: Activation,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
}

impl Default for InverseSection {
    fn default() -> Self {
        let d = crate::inverse::InvTrainConfig::default();
        Self {
            hidden: d.hidden,
            activation: d.activation,
            epochs: d.epochs,
            batch_size: d.batch_size,
            learning_rate: d.learning_rate,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSection {
    pub resolution: usize,
    pub samples_per_pixel: usize,
    /// Fraction of the embedding extent added on every side.
    pub margin: f64,
    pub parallel: bool,
}

impl Default for GridSection {
    fn default() -> Self {
        Self {
            resolution: 500,
            samples_per_pixel: 1,
            margin: 0.05,
            parallel: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSection {
    /// Score the maps with the test split instead of the training samples.
    pub use_test: bool,
    /// Number of training samples reconstructed in the round-trip report.
    pub roundtrip_samples: usize,
}

impl Default for EvalSection {
    fn default() -> Self {
        Self {
            use_test: false,
            roundtrip_samples: 10,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub run: RunSection,
    pub data: DataSection,
    pub classifier: ClassifierSection,
    pub shapley: ShapleySection,
    pub projection: ProjectionSection,
    pub inverse: InverseSection,
    pub grid: GridSection,
    pub eval: EvalSection,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        Self::parse_with_overrides(text, &[])
    }

    /// Parse `text`, then apply `section.key=value` overrides in order.
    /// Values use the same syntax as the file; bare words are taken as strings.
    pub fn parse_with_overrides(text: &str, overrides: &[String]) -> Result<Self> {
        let mut table: toml::Table = text.parse().map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        for o in overrides {
            apply_override(&mut table, o)?;
        }
        let cfg: RunConfig = table.try_into().map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path, overrides: &[String]) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse_with_overrides(&text, overrides)
    }

    /// Canonical text with every key spelled out.
    pub fn to_text(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        let d = &self.data;
        if !(d.test_fraction > 0.0 && d.test_fraction < 1.0) {
            return bad(format!("data.test_fraction must lie in (0, 1), got {}", d.test_fraction));
        }
        match d.source {
            Source::Idx if d.path.as_os_str().is_empty() || d.labels.as_os_str().is_empty() => {
                return bad("data.source = \"idx\" needs data.path and data.labels".into())
            }
            Source::Csv if d.path.as_os_str().is_empty() => return bad("data.source = \"csv\" needs data.path".into()),
            _ => {}
        }
        if self.classifier.hidden.is_empty() || self.classifier.hidden.contains(&0) {
            return bad("classifier.hidden needs at least one positive width".into());
        }
        if self.inverse.hidden.contains(&0) {
            return bad("inverse.hidden widths must be positive".into());
        }
        if self.mode().runs_shapley() && (self.shapley.background == 0 || self.shapley.permutations == 0) {
            return bad("shapley.background and shapley.permutations must be positive".into());
        }
        if self.grid.resolution == 0 || self.grid.samples_per_pixel == 0 {
            return bad("grid.resolution and grid.samples_per_pixel must be positive".into());
        }
        if !(self.grid.margin >= 0.0 && self.grid.margin.is_finite()) {
            return bad("grid.margin must be a nonnegative number".into());
        }
        Ok(())
    }

    pub fn mode(&self) -> Mode {
        self.run.mode
    }
}

fn apply_override(table: &mut toml::Table, spec: &str) -> Result<()> {
    let (path, raw) = spec
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("override `{spec}` is not of the form section.key=value")))?;
    let keys: Vec<&str> = path.trim().split('.').collect();
    if keys.iter().any(|k| k.is_empty()) {
        return Err(Error::Config(format!("override `{spec}` has an empty key")));
    }
    let raw = raw.trim();
    let value = format!("v = {raw}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()));
    let (last, parents) = keys.split_last().expect("nonempty");
    let mut cursor = table;
    for k in parents {
        let entry = cursor
            .entry(k.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cursor = entry
            .as_table_mut()
            .ok_or_else(|| Error::Config(format!("override `{spec}`: `{k}` is not a section")))?;
    }
    cursor.insert(last.to_string(), value);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_text_gives_defaults() {
        let cfg = RunConfig::parse("").unwrap();
        assert_eq!(cfg, RunConfig::default());
        assert_eq!((cfg.grid.resolution, cfg.grid.samples_per_pixel, cfg.shapley.background), (500, 1, 100));
    }

    #[test]
    fn canonical_text_parses_back() {
        let mut cfg = RunConfig::default();
        cfg.data.kind = SyntheticKind::Confounded;
        cfg.classifier.optimizer = Optimizer::SgdMomentum { momentum: 0.9 };
        assert_eq!(RunConfig::parse(&cfg.to_text()).unwrap(), cfg);
    }

    #[test]
    fn overrides_apply_in_order() {
        let cfg = RunConfig::parse_with_overrides(
            "[grid]\nresolution = 100\n",
            &["grid.resolution=50".into(), "run.mode=data".into(), "inverse.hidden=[8, 8]".into()],
        )
        .unwrap();
        assert_eq!(cfg.grid.resolution, 50);
        assert_eq!(cfg.run.mode, Mode::Data);
        assert_eq!(cfg.inverse.hidden, vec![8, 8]);
    }

    #[test]
    fn unknown_keys_and_bad_values_fail() {
        assert!(RunConfig::parse("[grid]\nresolutoin = 5\n").is_err());
        assert!(RunConfig::parse_with_overrides("", &["grid.resolution=0".into()]).is_err());
        assert!(RunConfig::parse_with_overrides("", &["noequals".into()]).is_err());
        assert!(RunConfig::parse("[data]\nsource = \"idx\"\n").is_err());
    }
}
