//! Stage orchestration and on-disk artifact layout.
//!
//! Each stage reads its predecessors' artifacts from the output directory
//! and writes its own, so stages can be rerun one at a time. After every
//! stage the manifest is rewritten with a SHA-256 digest of each file.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use ndarray::{concatenate, s, Array2, Axis};
use rand::seq::index;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::boundary_map::{self, build_grid, palette_for, render_map_with, Execution};
use crate::classifier::{evaluate, train_classifier, NetworkModel};
use crate::config::{Mode, RunConfig, Source};
use crate::container::{self as c, Container};
use crate::dataset::{self, Dataset, SyntheticSpec};
use crate::inverse::{train_inverse, InvTrainConfig, InverseModel};
use crate::metrics::{map_metrics, roundtrip_report, MapMetrics};
use crate::shapley::{shapley_dataset_with, BackgroundSet, ShapleyMatrix};
use crate::tsne::{tsne_fit_traced, Embedding};
use crate::{seed, Error, ProbaModel, Result};

pub const VERSION: &str = concat!("shapdbm ", env!("CARGO_PKG_VERSION"));
pub const MANIFEST: &str = "manifest.json";
pub const CONFIG_SNAPSHOT: &str = "config.toml";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Stage {
    Ingest,
    Train,
    Shap,
    Project,
    Inverse,
    Render,
    Eval,
    Roundtrip,
}

impl Stage {
    pub const ALL: [Stage; 8] = [
        Stage::Ingest,
        Stage::Train,
        Stage::Shap,
        Stage::Project,
        Stage::Inverse,
        Stage::Render,
        Stage::Eval,
        Stage::Roundtrip,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Ingest => "ingest",
            Stage::Train => "train",
            Stage::Shap => "shap",
            Stage::Project => "project",
            Stage::Inverse => "inverse",
            Stage::Render => "render",
            Stage::Eval => "eval",
            Stage::Roundtrip => "roundtrip",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|s| s.name() == name)
    }

    /// Process exit code for a failure in this stage (10 to 17).
    pub fn exit_code(self) -> i32 {
        10 + Self::ALL.iter().position(|&s| s == self).unwrap() as i32
    }

    pub fn seed(self, master: u64) -> u64 {
        seed::derive_named(master, self.name())
    }
}

#[derive(Debug, thiserror::Error)]
#[error("stage `{}` failed: {error}", stage.name())]
pub struct StageError {
    pub stage: Stage,
    #[source]
    pub error: Error,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Space {
    Data,
    Shapley,
}

impl Space {
    pub fn dir(self) -> &'static str {
        match self {
            Space::Data => "data-space",
            Space::Shapley => "shapley-space",
        }
    }

    pub fn in_mode(mode: Mode) -> Vec<Space> {
        let mut v = Vec::new();
        if mode.runs_data() {
            v.push(Space::Data);
        }
        if mode.runs_shapley() {
            v.push(Space::Shapley);
        }
        v
    }
}

/// Paths of every artifact under an output directory.
#[derive(Clone, Debug)]
pub struct Layout {
    pub root: PathBuf,
}

impl Layout {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn file(&self, rel: &str) -> PathBuf {
        self.root.join(rel)
    }

    pub fn space_file(&self, space: Space, name: &str) -> PathBuf {
        self.root.join(space.dir()).join(name)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Artifact {
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub version: String,
    pub config: String,
    pub seeds: BTreeMap<String, u64>,
    /// Wall-clock seconds of the most recent execution of each stage.
    pub timings: BTreeMap<String, f64>,
    /// Relative path → digest, for every file in the output directory.
    pub artifacts: BTreeMap<String, Artifact>,
}

impl RunManifest {
    pub fn read(root: &Path) -> Result<Self> {
        let path = root.join(MANIFEST);
        let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Format {
            path,
            message: e.to_string(),
        })
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().fold(String::with_capacity(64), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

fn collect_files(root: &Path, dir: &Path, out: &mut Vec<PathBuf>) -> Result<()> {
    for entry in std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        if path.is_dir() {
            collect_files(root, &path, out)?;
        } else if path != root.join(MANIFEST) {
            out.push(path);
        }
    }
    Ok(())
}

fn write_manifest(cfg: &RunConfig, layout: &Layout, timings: BTreeMap<String, f64>) -> Result<RunManifest> {
    let mut files = Vec::new();
    collect_files(&layout.root, &layout.root, &mut files)?;
    let mut artifacts = BTreeMap::new();
    for path in files {
        let bytes = std::fs::read(&path).map_err(|e| Error::io(&path, e))?;
        let rel = path.strip_prefix(&layout.root).expect("under root");
        let key = rel.components().map(|c| c.as_os_str().to_string_lossy()).collect::<Vec<_>>().join("/");
        artifacts.insert(
            key,
            Artifact {
                sha256: sha256_hex(&bytes),
                bytes: bytes.len() as u64,
            },
        );
    }
    let manifest = RunManifest {
        version: VERSION.to_string(),
        config: cfg.to_text(),
        seeds: Stage::ALL.iter().map(|s| (s.name().to_string(), s.seed(cfg.run.seed))).collect(),
        timings,
        artifacts,
    };
    let path = layout.file(MANIFEST);
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    std::fs::write(&path, text + "\n").map_err(|e| Error::io(&path, e))?;
    Ok(manifest)
}

/// Run every stage in order into `cfg.run.out`.
pub fn run_pipeline(cfg: &RunConfig) -> std::result::Result<RunManifest, StageError> {
    let layout = Layout::new(&cfg.run.out);
    let mut manifest = None;
    for stage in Stage::ALL {
        manifest = Some(run_stage_in(cfg, &layout, stage)?);
    }
    Ok(manifest.expect("at least one stage"))
}

/// Run one stage against the artifacts already present in `cfg.run.out`.
pub fn run_stage(cfg: &RunConfig, stage: Stage) -> std::result::Result<RunManifest, StageError> {
    run_stage_in(cfg, &Layout::new(&cfg.run.out), stage)
}

fn run_stage_in(cfg: &RunConfig, layout: &Layout, stage: Stage) -> std::result::Result<RunManifest, StageError> {
    let wrap = |error| StageError { stage, error };
    let started = Instant::now();
    prepare(cfg, layout).map_err(wrap)?;
    let seed = stage.seed(cfg.run.seed);
    match stage {
        Stage::Ingest => ingest(cfg, layout, seed),
        Stage::Train => train(cfg, layout, seed),
        Stage::Shap => shap(cfg, layout, seed),
        Stage::Project => project(cfg, layout, seed),
        Stage::Inverse => inverse(cfg, layout, seed),
        Stage::Render => render(cfg, layout, seed),
        Stage::Eval => eval(cfg, layout),
        Stage::Roundtrip => roundtrip(cfg, layout),
    }
    .map_err(wrap)?;
    let mut timings = RunManifest::read(&layout.root).map(|m| m.timings).unwrap_or_default();
    timings.insert(stage.name().to_string(), started.elapsed().as_secs_f64());
    write_manifest(cfg, layout, timings).map_err(wrap)
}

fn prepare(cfg: &RunConfig, layout: &Layout) -> Result<()> {
    let mut dirs = vec!["data", "classifier"];
    if cfg.mode().runs_shapley() {
        dirs.push("shapley");
    }
    dirs.extend(Space::in_mode(cfg.mode()).into_iter().map(Space::dir));
    for d in dirs {
        let p = layout.file(d);
        std::fs::create_dir_all(&p).map_err(|e| Error::io(&p, e))?;
    }
    write(&layout.file(CONFIG_SNAPSHOT), cfg.to_text().as_bytes())
}

fn write(path: &Path, bytes: &[u8]) -> Result<()> {
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn read(path: &Path, kind: &str, producer: Stage) -> Result<Container> {
    if !path.exists() {
        return Err(Error::MissingArtifact {
            path: path.to_path_buf(),
            stage: producer.name(),
        });
    }
    Container::read(path, kind)
}

fn matrix_csv(header: &[String], m: &Array2<f64>, extra: Option<(&str, &[String])>) -> String {
    let mut s = header.join(",");
    if let Some((name, _)) = extra {
        s.push(',');
        s.push_str(name);
    }
    s.push('\n');
    for (i, row) in m.rows().into_iter().enumerate() {
        let cells: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        s.push_str(&cells.join(","));
        if let Some((_, col)) = extra {
            s.push(',');
            s.push_str(&col[i]);
        }
        s.push('\n');
    }
    s
}

fn numbered(prefix: &str, n: usize) -> Vec<String> {
    (0..n).map(|i| format!("{prefix}{i}")).collect()
}

fn series_csv(header: &str, values: impl IntoIterator<Item = (usize, f64)>) -> String {
    let mut s = format!("{header}\n");
    for (i, v) in values {
        let _ = writeln!(s, "{i},{v}");
    }
    s
}

fn dataset_csv(d: &Dataset) -> String {
    let labels: Vec<String> = d.labels().iter().map(|l| l.to_string()).collect();
    matrix_csv(&numbered("f", d.n_features()), d.features(), Some(("label", &labels)))
}

fn load_source(cfg: &RunConfig, seed: u64) -> Result<Dataset> {
    let d = &cfg.data;
    let data = match d.source {
        Source::Synthetic => dataset::make_synthetic(&SyntheticSpec {
            kind: d.kind,
            per_class: d.per_class,
            features: d.features,
            classes: d.classes,
            noise: d.noise,
            nuisance: d.nuisance,
            seed,
        })?,
        Source::Idx => dataset::load_idx(&d.path, &d.labels)?,
        Source::Csv => dataset::load_csv(&d.path, d.label_column, d.has_header)?,
    };
    Ok(if d.limit > 0 && d.limit < data.len() { data.head(d.limit) } else { data })
}

/// Short dataset name for the comparison table.
pub fn dataset_name(cfg: &RunConfig) -> String {
    if !cfg.data.name.is_empty() {
        return cfg.data.name.clone();
    }
    match cfg.data.source {
        Source::Synthetic => serde_json::to_value(cfg.data.kind)
            .ok()
            .and_then(|v| v.as_str().map(str::to_string))
            .unwrap_or_else(|| "synthetic".into()),
        _ => cfg
            .data
            .path
            .file_stem()
            .map_or_else(|| "dataset".into(), |s| s.to_string_lossy().into_owned()),
    }
}

fn ingest(cfg: &RunConfig, layout: &Layout, seed: u64) -> Result<()> {
    let data = load_source(cfg, seed::derive(seed, 0))?;
    let parts = dataset::split(&data, cfg.data.test_fraction, seed::derive(seed, 1))?;
    let subset = cfg.shapley.subset;
    let samples = if subset > 0 && subset < parts.train.len() {
        let mut rng = seed::rng(seed::derive(seed, 2));
        let mut picked = index::sample(&mut rng, parts.train.len(), subset).into_vec();
        picked.sort_unstable();
        parts.train.select(&picked)
    } else {
        parts.train.clone()
    };
    for (name, d) in [("train", &parts.train), ("test", &parts.test), ("samples", &samples)] {
        c::encode_dataset(d).write(&layout.file(&format!("data/{name}.bin")))?;
    }
    write(&layout.file("data/samples.csv"), dataset_csv(&samples).as_bytes())
}

fn load_dataset(layout: &Layout, name: &str) -> Result<Dataset> {
    c::decode_dataset(&read(&layout.file(&format!("data/{name}.bin")), "dataset", Stage::Ingest)?)
}

fn load_model(layout: &Layout) -> Result<NetworkModel> {
    c::decode_classifier(&read(&layout.file("classifier/model.bin"), "classifier", Stage::Train)?)
}

fn train(cfg: &RunConfig, layout: &Layout, seed: u64) -> Result<()> {
    let train = load_dataset(layout, "train")?;
    let test = load_dataset(layout, "test")?;
    let spec = cfg.classifier.network(train.n_features(), train.classes());
    let fitted = train_classifier(&train, &spec, &cfg.classifier.training(seed))?;
    c::encode_classifier(&fitted.model).write(&layout.file("classifier/model.bin"))?;
    write(
        &layout.file("classifier/losses.csv"),
        series_csv("epoch,loss", fitted.epoch_losses.iter().copied().enumerate()).as_bytes(),
    )?;
    let report = evaluate(&fitted.model, &test)?;
    write(&layout.file("classifier/eval.txt"), report.to_report().as_bytes())
}

/// Rows that get projected: the (sub)sampled training set, followed by the
/// test set when maps are scored on it. Also returns the two datasets.
fn projected_rows(cfg: &RunConfig, layout: &Layout) -> Result<(Array2<f64>, Dataset, Option<Dataset>)> {
    let samples = load_dataset(layout, "samples")?;
    if cfg.eval.use_test {
        let test = load_dataset(layout, "test")?;
        let rows = concatenate(Axis(0), &[samples.features().view(), test.features().view()])
            .map_err(|e| Error::Consistency(e.to_string()))?;
        Ok((rows, samples, Some(test)))
    } else {
        Ok((samples.features().clone(), samples, None))
    }
}

fn shap(cfg: &RunConfig, layout: &Layout, seed: u64) -> Result<()> {
    if !cfg.mode().runs_shapley() {
        return Ok(());
    }
    let model = load_model(layout)?;
    let test = load_dataset(layout, "test")?;
    let (rows, _, _) = projected_rows(cfg, layout)?;
    let background = BackgroundSet::sample(&test, cfg.shapley.background, seed::derive(seed, 0))?;
    let m = shapley_dataset_with(
        &model,
        rows.view(),
        &background,
        cfg.shapley.permutations,
        seed::derive(seed, 1),
        cfg.shapley.target,
    )?;
    c::encode_shapley(&m).write(&layout.file("shapley/values.bin"))?;
    let base: Vec<String> = m.base_values.iter().map(|v| v.to_string()).collect();
    write(
        &layout.file("shapley/values.csv"),
        matrix_csv(&numbered("phi", m.values.ncols()), &m.values, Some(("base_value", &base))).as_bytes(),
    )
}

fn load_shapley(layout: &Layout) -> Result<ShapleyMatrix> {
    c::decode_shapley(&read(&layout.file("shapley/values.bin"), "shapley", Stage::Shap)?)
}

fn project(cfg: &RunConfig, layout: &Layout, seed: u64) -> Result<()> {
    let tsne = cfg.projection.tsne(seed);
    let checkpoints: Vec<usize> = (1..=tsne.iterations).filter(|i| i % 50 == 0 || *i == tsne.iterations).collect();
    for space in Space::in_mode(cfg.mode()) {
        let input = match space {
            Space::Data => projected_rows(cfg, layout)?.0,
            Space::Shapley => load_shapley(layout)?.values,
        };
        let (embedding, kl) = tsne_fit_traced(input.view(), &tsne, &checkpoints)?;
        c::encode_embedding(&embedding).write(&layout.space_file(space, "embedding.bin"))?;
        write(
            &layout.space_file(space, "embedding.csv"),
            matrix_csv(&["x".into(), "y".into()], embedding.coords(), None).as_bytes(),
        )?;
        write(&layout.space_file(space, "kl.csv"), series_csv("iteration,kl", kl).as_bytes())?;
    }
    Ok(())
}

fn load_embedding(layout: &Layout, space: Space) -> Result<Embedding> {
    c::decode_embedding(&read(&layout.space_file(space, "embedding.bin"), "embedding", Stage::Project)?)
}

fn load_inverse(layout: &Layout, space: Space) -> Result<InverseModel> {
    c::decode_inverse(&read(&layout.space_file(space, "inverse.bin"), "inverse", Stage::Inverse)?)
}

fn rows_of(e: &Embedding, start: usize, len: usize) -> Result<Embedding> {
    if start + len > e.len() {
        return Err(Error::Consistency(format!(
            "embedding has {} rows, expected at least {}",
            e.len(),
            start + len
        )));
    }
    Embedding::new(e.coords().slice(s![start..start + len, ..]).to_owned())
}

fn inverse(cfg: &RunConfig, layout: &Layout, seed: u64) -> Result<()> {
    let samples = load_dataset(layout, "samples")?;
    let i = &cfg.inverse;
    let ic = InvTrainConfig {
        hidden: i.hidden.clone(),
        activation: i.activation,
        epochs: i.epochs,
        batch_size: i.batch_size,
        learning_rate: i.learning_rate,
        seed,
    };
    for space in Space::in_mode(cfg.mode()) {
        let embedding = rows_of(&load_embedding(layout, space)?, 0, samples.len())?;
        let fitted = train_inverse(&embedding, &samples, &ic)?;
        c::encode_inverse(&fitted.model).write(&layout.space_file(space, "inverse.bin"))?;
        write(
            &layout.space_file(space, "inverse_losses.csv"),
            series_csv("epoch,loss", fitted.epoch_losses.iter().copied().enumerate()).as_bytes(),
        )?;
    }
    Ok(())
}

/// The samples a map is scored on, their embedded rows, and the
/// classifier's predictions for them.
fn scored(cfg: &RunConfig, layout: &Layout, model: &NetworkModel, space: Space) -> Result<(Embedding, Vec<usize>)> {
    let (_, samples, test) = projected_rows(cfg, layout)?;
    let embedding = load_embedding(layout, space)?;
    let (data, start) = match &test {
        Some(t) => (t, samples.len()),
        None => (&samples, 0),
    };
    let predicted = model.predict_classes(data.features().view())?;
    Ok((rows_of(&embedding, start, data.len())?, predicted))
}

fn render(cfg: &RunConfig, layout: &Layout, seed: u64) -> Result<()> {
    let model = load_model(layout)?;
    let palette = palette_for(model.n_classes());
    let execution = if cfg.grid.parallel { Execution::Parallel } else { Execution::Sequential };
    for space in Space::in_mode(cfg.mode()) {
        let embedding = load_embedding(layout, space)?;
        let inverse = load_inverse(layout, space)?;
        let bounds = embedding.bounds().with_margin(cfg.grid.margin);
        let grid = build_grid(bounds, cfg.grid.resolution, cfg.grid.samples_per_pixel, seed)?;
        let map = render_map_with(&grid, &inverse, &model, execution)?;
        c::encode_map(&map).write(&layout.space_file(space, "map.bin"))?;
        let mut img = boundary_map::map_image(&map, &palette)?;
        write(&layout.space_file(space, "map.ppm"), &img.to_ppm())?;
        let (points, predicted) = scored(cfg, layout, &model, space)?;
        boundary_map::draw_scatter(&mut img, &bounds, points.coords().view(), &predicted, &palette)?;
        write(&layout.space_file(space, "map_scatter.ppm"), &img.to_ppm())?;
        write(&layout.space_file(space, "map_labels.csv"), map.labels_csv().as_bytes())?;
        write(&layout.space_file(space, "map_confidence.csv"), map.confidence_csv().as_bytes())?;
    }
    Ok(())
}

fn eval(cfg: &RunConfig, layout: &Layout) -> Result<()> {
    let model = load_model(layout)?;
    let mut results = Vec::new();
    for space in Space::in_mode(cfg.mode()) {
        let map = c::decode_map(&read(&layout.space_file(space, "map.bin"), "map", Stage::Render)?)?;
        let (points, predicted) = scored(cfg, layout, &model, space)?;
        let m = map_metrics(&map, &points, &predicted)?;
        write(&layout.space_file(space, "metrics.txt"), m.to_report().as_bytes())?;
        write(&layout.space_file(space, "metrics.csv"), m.to_csv().as_bytes())?;
        results.push((space, m));
    }
    let (csv, text) = comparison_table(&dataset_name(cfg), &results);
    write(&layout.file("comparison.csv"), csv.as_bytes())?;
    write(&layout.file("comparison.txt"), text.as_bytes())
}

/// Data-space and Shapley-space MA / mean MP / mean MR side by side.
/// Spaces that were not run are left blank.
pub fn comparison_table(dataset: &str, results: &[(Space, MapMetrics)]) -> (String, String) {
    let cells = |space: Space| -> [String; 3] {
        results.iter().find(|(s, _)| *s == space).map_or_else(
            || [String::new(), String::new(), String::new()],
            |(_, m)| {
                [
                    format!("{:.4}", m.accuracy),
                    format!("{:.4}", m.mean_precision()),
                    format!("{:.4}", m.mean_recall()),
                ]
            },
        )
    };
    let [dma, dmp, dmr] = cells(Space::Data);
    let [sma, smp, smr] = cells(Space::Shapley);
    let csv = format!(
        "dataset,data_ma,data_mp,data_mr,shapley_ma,shapley_mp,shapley_mr\n{dataset},{dma},{dmp},{dmr},{sma},{smp},{smr}\n"
    );
    let w = dataset.len().max(7);
    let text = format!(
        "{:w$} | {:^22} | {:^22}\n{:w$} | {:>6} {:>7} {:>7} | {:>6} {:>7} {:>7}\n{:w$} | {:>6} {:>7} {:>7} | {:>6} {:>7} {:>7}\n",
        "", "Data", "Shapley", "dataset", "MA", "MP", "MR", "MA", "MP", "MR", dataset, dma, dmp, dmr, sma, smp, smr
    );
    (csv, text)
}

fn roundtrip(cfg: &RunConfig, layout: &Layout) -> Result<()> {
    let samples = load_dataset(layout, "samples")?;
    let k = cfg.eval.roundtrip_samples.min(samples.len());
    let indices: Vec<usize> = (0..k).map(|i| i * samples.len() / k.max(1)).collect();
    for space in Space::in_mode(cfg.mode()) {
        let embedding = rows_of(&load_embedding(layout, space)?, 0, samples.len())?;
        let inverse = load_inverse(layout, space)?;
        let report = roundtrip_report(&embedding, &inverse, &samples, &indices)?;
        write(&layout.space_file(space, "roundtrip.csv"), report.to_csv().as_bytes())?;
        write(&layout.space_file(space, "roundtrip.ppm"), &report.strip(4).to_ppm())?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stage_names_and_codes_are_distinct() {
        let codes: std::collections::BTreeSet<i32> = Stage::ALL.iter().map(|s| s.exit_code()).collect();
        assert_eq!(codes.len(), 8);
        for s in Stage::ALL {
            assert_eq!(Stage::from_name(s.name()), Some(s));
        }
    }

    #[test]
    fn digest_matches_known_vector() {
        assert_eq!(sha256_hex(b"abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    }
}
