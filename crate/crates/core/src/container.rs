//! Length-prefixed binary container for intermediate artifacts.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! magic    "SDBM"            4 bytes
//! version  u32               currently 1
//! kind     u32 len + UTF-8
//! count    u32               number of sections
//! section  name: u32 len + UTF-8
//!          dtype: u8         0 = f64, 1 = u64, 2 = raw bytes
//!          rank: u32, then rank x u64 dims
//!          payload: u64 byte length + data
//! ```
//!
//! Sections keep insertion order, so encoding is deterministic.

use std::path::Path;

use ndarray::{Array1, Array2};

use crate::boundary_map::{DecisionMap, GridSpec};
use crate::classifier::NetworkModel;
use crate::dataset::Dataset;
use crate::inverse::{CoordScaling, InverseModel};
use crate::nn::{Activation, Mlp, Output};
use crate::shapley::{AttributionTarget, ShapleyMatrix};
use crate::tsne::{Bounds, Embedding};
use crate::{Error, Result};

const MAGIC: &[u8; 4] = b"SDBM";
const VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq)]
pub enum Data {
    F64(Vec<f64>),
    U64(Vec<u64>),
    Bytes(Vec<u8>),
}

impl Data {
    fn dtype(&self) -> u8 {
        match self {
            Data::F64(_) => 0,
            Data::U64(_) => 1,
            Data::Bytes(_) => 2,
        }
    }

    fn len(&self) -> usize {
        match self {
            Data::F64(v) => v.len(),
            Data::U64(v) => v.len(),
            Data::Bytes(v) => v.len(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Section {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Data,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Container {
    pub kind: String,
    pub sections: Vec<Section>,
}

impl Container {
    pub fn new(kind: &str) -> Self {
        Self {
            kind: kind.to_string(),
            sections: Vec::new(),
        }
    }

    fn push(&mut self, name: &str, shape: Vec<usize>, data: Data) {
        debug_assert_eq!(shape.iter().product::<usize>(), data.len());
        self.sections.push(Section {
            name: name.to_string(),
            shape,
            data,
        });
    }

    pub fn push_f64(&mut self, name: &str, shape: &[usize], values: Vec<f64>) {
        self.push(name, shape.to_vec(), Data::F64(values));
    }

    pub fn push_u64(&mut self, name: &str, values: Vec<u64>) {
        self.push(name, vec![values.len()], Data::U64(values));
    }

    pub fn push_usizes(&mut self, name: &str, values: &[usize]) {
        self.push_u64(name, values.iter().map(|&v| v as u64).collect());
    }

    pub fn push_matrix(&mut self, name: &str, m: &Array2<f64>) {
        self.push_f64(name, &[m.nrows(), m.ncols()], m.iter().copied().collect());
    }

    pub fn push_text(&mut self, name: &str, text: &str) {
        let bytes = text.as_bytes().to_vec();
        self.push(name, vec![bytes.len()], Data::Bytes(bytes));
    }

    fn section(&self, name: &str) -> Result<&Section> {
        self.sections
            .iter()
            .find(|s| s.name == name)
            .ok_or_else(|| Error::Consistency(format!("{} container has no `{name}` section", self.kind)))
    }

    pub fn f64s(&self, name: &str) -> Result<&[f64]> {
        match &self.section(name)?.data {
            Data::F64(v) => Ok(v),
            _ => Err(Error::Consistency(format!("section `{name}` is not f64"))),
        }
    }

    pub fn u64s(&self, name: &str) -> Result<&[u64]> {
        match &self.section(name)?.data {
            Data::U64(v) => Ok(v),
            _ => Err(Error::Consistency(format!("section `{name}` is not u64"))),
        }
    }

    pub fn usizes(&self, name: &str) -> Result<Vec<usize>> {
        Ok(self.u64s(name)?.iter().map(|&v| v as usize).collect())
    }

    pub fn scalar(&self, name: &str) -> Result<u64> {
        match self.u64s(name)? {
            [v] => Ok(*v),
            _ => Err(Error::Consistency(format!("section `{name}` is not a scalar"))),
        }
    }

    pub fn text(&self, name: &str) -> Result<&str> {
        match &self.section(name)?.data {
            Data::Bytes(v) => std::str::from_utf8(v).map_err(|_| Error::Consistency(format!("section `{name}` is not UTF-8"))),
            _ => Err(Error::Consistency(format!("section `{name}` is not text"))),
        }
    }

    pub fn matrix(&self, name: &str) -> Result<Array2<f64>> {
        let s = self.section(name)?;
        let [rows, cols] = s.shape[..] else {
            return Err(Error::Consistency(format!("section `{name}` is not a matrix")));
        };
        Array2::from_shape_vec((rows, cols), self.f64s(name)?.to_vec()).map_err(|e| Error::Consistency(e.to_string()))
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        put_str(&mut out, &self.kind);
        out.extend_from_slice(&(self.sections.len() as u32).to_le_bytes());
        for s in &self.sections {
            put_str(&mut out, &s.name);
            out.push(s.data.dtype());
            out.extend_from_slice(&(s.shape.len() as u32).to_le_bytes());
            for &d in &s.shape {
                out.extend_from_slice(&(d as u64).to_le_bytes());
            }
            let bytes: Vec<u8> = match &s.data {
                Data::F64(v) => v.iter().flat_map(|x| x.to_le_bytes()).collect(),
                Data::U64(v) => v.iter().flat_map(|x| x.to_le_bytes()).collect(),
                Data::Bytes(v) => v.clone(),
            };
            out.extend_from_slice(&(bytes.len() as u64).to_le_bytes());
            out.extend_from_slice(&bytes);
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> std::result::Result<Self, String> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(4)? != MAGIC {
            return Err("not a container file (bad magic)".into());
        }
        let version = r.u32()?;
        if version != VERSION {
            return Err(format!("unsupported container version {version}"));
        }
        let kind = r.string()?;
        let count = r.u32()? as usize;
        let mut sections = Vec::with_capacity(count.min(64));
        for _ in 0..count {
            let name = r.string()?;
            let dtype = r.take(1)?[0];
            let rank = r.u32()? as usize;
            let shape = (0..rank).map(|_| r.u64().map(|d| d as usize)).collect::<std::result::Result<Vec<_>, _>>()?;
            let len = r.u64()? as usize;
            let payload = r.take(len)?;
            let elements = shape.iter().try_fold(1usize, |a, &d| a.checked_mul(d)).ok_or("shape overflows")?;
            let data = match dtype {
                0 | 1 if len != elements * 8 => return Err(format!("section `{name}`: payload does not match shape")),
                0 => Data::F64(payload.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect()),
                1 => Data::U64(payload.chunks_exact(8).map(|c| u64::from_le_bytes(c.try_into().unwrap())).collect()),
                2 if len != elements => return Err(format!("section `{name}`: payload does not match shape")),
                2 => Data::Bytes(payload.to_vec()),
                other => return Err(format!("section `{name}`: unknown dtype {other}")),
            };
            sections.push(Section { name, shape, data });
        }
        if r.pos != bytes.len() {
            return Err("trailing bytes after last section".into());
        }
        Ok(Self { kind, sections })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    /// Read a container and check its kind.
    pub fn read(path: &Path, kind: &str) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        let format = |message: String| Error::Format {
            path: path.to_path_buf(),
            message,
        };
        let c = Self::from_bytes(&bytes).map_err(format)?;
        if c.kind != kind {
            return Err(format(format!("expected a `{kind}` container, found `{}`", c.kind)));
        }
        Ok(c)
    }
}

fn put_str(out: &mut Vec<u8>, s: &str) {
    out.extend_from_slice(&(s.len() as u32).to_le_bytes());
    out.extend_from_slice(s.as_bytes());
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> std::result::Result<&'a [u8], String> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len()).ok_or("truncated container")?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> std::result::Result<u32, String> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> std::result::Result<u64, String> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn string(&mut self) -> std::result::Result<String, String> {
        let n = self.u32()? as usize;
        String::from_utf8(self.take(n)?.to_vec()).map_err(|_| "non-UTF-8 string".into())
    }
}

// Artifact codecs.

pub fn encode_dataset(d: &Dataset) -> Container {
    let mut c = Container::new("dataset");
    c.push_matrix("features", d.features());
    c.push_usizes("labels", d.labels());
    c.push_u64("classes", vec![d.classes() as u64]);
    c
}

pub fn decode_dataset(c: &Container) -> Result<Dataset> {
    Dataset::new(c.matrix("features")?, c.usizes("labels")?, c.scalar("classes")? as usize)
}

fn push_mlp(c: &mut Container, net: &Mlp) {
    c.push_text("hidden", net.hidden().name());
    c.push_text("output", net.output().name());
    c.push_u64("layers", vec![net.weights().len() as u64]);
    for (l, (w, b)) in net.weights().iter().zip(net.biases()).enumerate() {
        c.push_matrix(&format!("w{l}"), w);
        c.push_f64(&format!("b{l}"), &[b.len()], b.to_vec());
    }
}

fn read_mlp(c: &Container) -> Result<Mlp> {
    let hidden = c.text("hidden")?;
    let hidden = Activation::from_name(hidden).ok_or_else(|| Error::Consistency(format!("unknown activation `{hidden}`")))?;
    let output = c.text("output")?;
    let output = Output::from_name(output).ok_or_else(|| Error::Consistency(format!("unknown output `{output}`")))?;
    let layers = c.scalar("layers")? as usize;
    let mut weights = Vec::with_capacity(layers);
    let mut biases = Vec::with_capacity(layers);
    for l in 0..layers {
        weights.push(c.matrix(&format!("w{l}"))?);
        biases.push(Array1::from(c.f64s(&format!("b{l}"))?.to_vec()));
    }
    Mlp::from_parameters(hidden, output, weights, biases)
}

pub fn encode_classifier(m: &NetworkModel) -> Container {
    let mut c = Container::new("classifier");
    push_mlp(&mut c, m.mlp());
    c
}

pub fn decode_classifier(c: &Container) -> Result<NetworkModel> {
    NetworkModel::from_mlp(read_mlp(c)?)
}

pub fn encode_shapley(s: &ShapleyMatrix) -> Container {
    let mut c = Container::new("shapley");
    c.push_matrix("values", &s.values);
    c.push_f64("base_values", &[s.base_values.len()], s.base_values.clone());
    c.push_usizes("explained_classes", &s.explained_classes);
    c.push_text(
        "target",
        match s.target {
            AttributionTarget::PredictedClass => "predicted-class",
            AttributionTarget::AllClasses => "all-classes",
        },
    );
    c
}

pub fn decode_shapley(c: &Container) -> Result<ShapleyMatrix> {
    let target = match c.text("target")? {
        "predicted-class" => AttributionTarget::PredictedClass,
        "all-classes" => AttributionTarget::AllClasses,
        other => return Err(Error::Consistency(format!("unknown attribution target `{other}`"))),
    };
    Ok(ShapleyMatrix {
        values: c.matrix("values")?,
        base_values: c.f64s("base_values")?.to_vec(),
        explained_classes: c.usizes("explained_classes")?,
        target,
    })
}

pub fn encode_embedding(e: &Embedding) -> Container {
    let mut c = Container::new("embedding");
    c.push_matrix("coords", e.coords());
    c
}

pub fn decode_embedding(c: &Container) -> Result<Embedding> {
    Embedding::new(c.matrix("coords")?)
}

fn bounds_vec(b: &Bounds) -> Vec<f64> {
    vec![b.xmin, b.xmax, b.ymin, b.ymax]
}

fn read_bounds(c: &Container, name: &str) -> Result<Bounds> {
    match c.f64s(name)? {
        &[xmin, xmax, ymin, ymax] => Ok(Bounds { xmin, xmax, ymin, ymax }),
        _ => Err(Error::Consistency(format!("section `{name}` is not a bounds quadruple"))),
    }
}

pub fn encode_inverse(m: &InverseModel) -> Container {
    let mut c = Container::new("inverse");
    push_mlp(&mut c, m.mlp());
    let s = m.scaling();
    c.push_f64("scaling", &[4], vec![s.offset[0], s.offset[1], s.scale[0], s.scale[1]]);
    c.push_f64("bounds", &[4], bounds_vec(&m.bounds()));
    c
}

pub fn decode_inverse(c: &Container) -> Result<InverseModel> {
    let scaling = match c.f64s("scaling")? {
        &[ox, oy, sx, sy] => CoordScaling {
            offset: [ox, oy],
            scale: [sx, sy],
        },
        _ => return Err(Error::Consistency("section `scaling` needs 4 values".into())),
    };
    InverseModel::from_parts(read_mlp(c)?, scaling, read_bounds(c, "bounds")?)
}

pub fn encode_map(m: &DecisionMap) -> Container {
    let mut c = Container::new("map");
    let r = m.spec.resolution;
    c.push_u64(
        "grid",
        vec![r as u64, m.spec.samples_per_pixel as u64, m.spec.seed, m.classes as u64],
    );
    c.push_f64("bounds", &[4], bounds_vec(&m.spec.bounds));
    c.push(
        "labels",
        vec![r, r],
        Data::U64(m.labels.iter().map(|&l| l as u64).collect()),
    );
    c.push_f64("confidence", &[r, r], m.confidence.clone());
    c
}

pub fn decode_map(c: &Container) -> Result<DecisionMap> {
    let &[resolution, samples_per_pixel, seed, classes] = c.u64s("grid")? else {
        return Err(Error::Consistency("section `grid` needs 4 values".into()));
    };
    let spec = GridSpec {
        resolution: resolution as usize,
        samples_per_pixel: samples_per_pixel as usize,
        bounds: read_bounds(c, "bounds")?,
        seed,
    };
    let labels = c.usizes("labels")?;
    let confidence = c.f64s("confidence")?.to_vec();
    let cells = spec.resolution * spec.resolution;
    if labels.len() != cells || confidence.len() != cells {
        return Err(Error::Consistency("map arrays do not match the grid resolution".into()));
    }
    Ok(DecisionMap {
        spec,
        classes: classes as usize,
        labels,
        confidence,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn roundtrip_preserves_sections_and_order() {
        let mut c = Container::new("test");
        c.push_matrix("m", &array![[1.0, -2.5], [f64::MIN_POSITIVE, 4.0]]);
        c.push_u64("n", vec![7, u64::MAX]);
        c.push_text("t", "relu");
        let bytes = c.to_bytes();
        let back = Container::from_bytes(&bytes).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.to_bytes(), bytes);
        assert_eq!(back.matrix("m").unwrap()[[1, 0]], f64::MIN_POSITIVE);
        assert_eq!(back.text("t").unwrap(), "relu");
    }

    #[test]
    fn corrupt_input_is_rejected() {
        let bytes = Container::new("x").to_bytes();
        assert!(Container::from_bytes(&bytes[..bytes.len() - 1]).is_err());
        assert!(Container::from_bytes(b"NOPE").is_err());
        let mut extra = bytes.clone();
        extra.push(0);
        assert!(Container::from_bytes(&extra).is_err());
    }

    #[test]
    fn models_survive_encoding() {
        let net = Mlp::new(&[3, 5, 2], Activation::Tanh, Output::Softmax, 4).unwrap();
        let model = NetworkModel::from_mlp(net).unwrap();
        let back = decode_classifier(&Container::from_bytes(&encode_classifier(&model).to_bytes()).unwrap()).unwrap();
        assert_eq!(back, model);

        let map = DecisionMap {
            spec: GridSpec {
                resolution: 2,
                samples_per_pixel: 3,
                bounds: Bounds {
                    xmin: -1.0,
                    xmax: 1.0,
                    ymin: 0.0,
                    ymax: 2.0,
                },
                seed: 9,
            },
            classes: 3,
            labels: vec![0, 2, 1, 1],
            confidence: vec![1.0, 2.0 / 3.0, 1.0, 1.0 / 3.0],
        };
        assert_eq!(decode_map(&encode_map(&map)).unwrap(), map);
    }
}
