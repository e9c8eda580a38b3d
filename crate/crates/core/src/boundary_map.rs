//! Pixel grid sampling, map rendering and image encoding.
//!
//! Pixel `(row, col)` covers `[xmin + col·w/r, xmin + (col+1)·w/r)`
//! horizontally; row 0 is the top band, ending at `ymax`.

use ndarray::{Array2, ArrayView2};
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::classifier::classes_of;
use crate::image::RgbImage;
use crate::tsne::Bounds;
use crate::{seed, Error, ProbaModel, Result, Unproject};

/// Ten categorical colors; classes beyond ten cycle through them.
pub const DEFAULT_PALETTE: [[u8; 3]; 10] = [
    [31, 119, 180],
    [255, 127, 14],
    [44, 160, 44],
    [214, 39, 40],
    [148, 103, 189],
    [140, 86, 75],
    [227, 119, 194],
    [127, 127, 127],
    [188, 189, 34],
    [23, 190, 207],
];

pub fn palette_for(classes: usize) -> Vec<[u8; 3]> {
    DEFAULT_PALETTE.iter().copied().cycle().take(classes.max(1)).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub resolution: usize,
    pub samples_per_pixel: usize,
    pub bounds: Bounds,
    pub seed: u64,
}

impl GridSpec {
    pub fn validate(&self) -> Result<()> {
        if self.resolution < 2 {
            return Err(Error::InvalidArgument(format!("resolution must be >= 2, got {}", self.resolution)));
        }
        if self.samples_per_pixel == 0 {
            return Err(Error::InvalidArgument("need at least one location per pixel".into()));
        }
        if self.bounds.is_degenerate() {
            return Err(Error::InvalidArgument(format!("degenerate grid bounds {:?}", self.bounds)));
        }
        Ok(())
    }

    pub fn cell_width(&self) -> f64 {
        self.bounds.width() / self.resolution as f64
    }

    pub fn cell_height(&self) -> f64 {
        self.bounds.height() / self.resolution as f64
    }

    /// `(x0, x1, y0, y1)` of a pixel's rectangle.
    pub fn cell(&self, row: usize, col: usize) -> (f64, f64, f64, f64) {
        let (cw, ch) = (self.cell_width(), self.cell_height());
        let x0 = self.bounds.xmin + col as f64 * cw;
        let y1 = self.bounds.ymax - row as f64 * ch;
        (x0, x0 + cw, y1 - ch, y1)
    }

    /// Pixel containing a point, if the point lies within the bounds. Points
    /// on the right edge land in the last column, points on the bottom edge
    /// in the last row.
    pub fn pixel_at(&self, x: f64, y: f64) -> Option<(usize, usize)> {
        pixel_at(&self.bounds, self.resolution, x, y)
    }
}

pub fn pixel_at(bounds: &Bounds, resolution: usize, x: f64, y: f64) -> Option<(usize, usize)> {
    if !bounds.contains(x, y) {
        return None;
    }
    let r = resolution as f64;
    let col = (((x - bounds.xmin) / bounds.width()) * r).floor() as usize;
    let row = (((bounds.ymax - y) / bounds.height()) * r).floor() as usize;
    Some((row.min(resolution - 1), col.min(resolution - 1)))
}

/// `l` sample locations per pixel, pixel-major: location `k` of pixel
/// `(i, j)` is row `(i·r + j)·l + k`.
#[derive(Clone, Debug, PartialEq)]
pub struct SampleGrid {
    pub spec: GridSpec,
    pub locations: Array2<f64>,
}

impl SampleGrid {
    pub fn location(&self, row: usize, col: usize, k: usize) -> [f64; 2] {
        let idx = (row * self.spec.resolution + col) * self.spec.samples_per_pixel + k;
        [self.locations[[idx, 0]], self.locations[[idx, 1]]]
    }

    fn pixel_row_locations(&self, row: usize) -> ArrayView2<'_, f64> {
        let per_row = self.spec.resolution * self.spec.samples_per_pixel;
        self.locations.slice(ndarray::s![row * per_row..(row + 1) * per_row, ..])
    }
}

/// Uniform draw in the open interval (0, 1).
fn open_unit(rng: &mut seed::Rng) -> f64 {
    ((rng.random::<u64>() >> 11) as f64 + 0.5) / (1u64 << 53) as f64
}

/// Lay out an `r × r` grid over `bounds` and draw `l` uniform locations in
/// each pixel from a generator seeded by `(seed, pixel)`.
pub fn build_grid(bounds: Bounds, resolution: usize, samples_per_pixel: usize, seed: u64) -> Result<SampleGrid> {
    let spec = GridSpec {
        resolution,
        samples_per_pixel,
        bounds,
        seed,
    };
    spec.validate()?;
    let (cw, ch) = (spec.cell_width(), spec.cell_height());
    let total = resolution * resolution * samples_per_pixel;
    let mut locations = Array2::zeros((total, 2));
    for i in 0..resolution {
        for j in 0..resolution {
            let pixel = i * resolution + j;
            let mut rng = seed::rng(seed::derive(seed, pixel as u64));
            let (x0, _, _, y1) = spec.cell(i, j);
            for k in 0..samples_per_pixel {
                let idx = pixel * samples_per_pixel + k;
                locations[[idx, 0]] = x0 + open_unit(&mut rng) * cw;
                locations[[idx, 1]] = y1 - open_unit(&mut rng) * ch;
            }
        }
    }
    Ok(SampleGrid { spec, locations })
}

/// The rendered map: one class label and majority frequency per pixel.
#[derive(Clone, Debug, PartialEq)]
pub struct DecisionMap {
    pub spec: GridSpec,
    pub classes: usize,
    /// Row-major, top row first.
    pub labels: Vec<usize>,
    pub confidence: Vec<f64>,
}

impl DecisionMap {
    pub fn resolution(&self) -> usize {
        self.spec.resolution
    }

    pub fn label(&self, row: usize, col: usize) -> usize {
        self.labels[row * self.spec.resolution + col]
    }

    pub fn confidence_at(&self, row: usize, col: usize) -> f64 {
        self.confidence[row * self.spec.resolution + col]
    }

    pub fn labels_csv(&self) -> String {
        grid_csv(self.spec.resolution, self.labels.iter().map(|v| v.to_string()))
    }

    pub fn confidence_csv(&self) -> String {
        grid_csv(self.spec.resolution, self.confidence.iter().map(|v| format!("{v}")))
    }
}

fn grid_csv(r: usize, cells: impl Iterator<Item = String>) -> String {
    let cells: Vec<String> = cells.collect();
    let mut out = String::new();
    for row in cells.chunks(r) {
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Execution {
    Sequential,
    Parallel,
}

pub fn render_map<I, M>(grid: &SampleGrid, inverse: &I, model: &M) -> Result<DecisionMap>
where
    I: Unproject + Sync + ?Sized,
    M: ProbaModel + Sync + ?Sized,
{
    render_map_with(grid, inverse, model, Execution::Parallel)
}

/// Classify every grid location through `inverse` then `model`, and label
/// each pixel with its most common class (ties to the lowest index).
/// Work is split by pixel row, so both execution modes perform identical
/// arithmetic.
pub fn render_map_with<I, M>(grid: &SampleGrid, inverse: &I, model: &M, execution: Execution) -> Result<DecisionMap>
where
    I: Unproject + Sync + ?Sized,
    M: ProbaModel + Sync + ?Sized,
{
    if inverse.output_width() != model.n_features() {
        return Err(Error::Shape {
            expected: model.n_features(),
            found: inverse.output_width(),
        });
    }
    let r = grid.spec.resolution;
    let l = grid.spec.samples_per_pixel;
    let classes = model.n_classes();
    let render_row = |row: usize| -> Vec<(usize, f64)> {
        let samples = inverse.unproject_batch(grid.pixel_row_locations(row));
        let predicted = classes_of(&model.predict_proba_batch(samples.view()));
        predicted
            .chunks(l)
            .map(|votes| {
                let mut tally = vec![0usize; classes];
                for &v in votes {
                    tally[v] += 1;
                }
                let mut best = 0;
                for c in 1..classes {
                    if tally[c] > tally[best] {
                        best = c;
                    }
                }
                (best, tally[best] as f64 / l as f64)
            })
            .collect()
    };
    let rows: Vec<Vec<(usize, f64)>> = match execution {
        Execution::Sequential => (0..r).map(render_row).collect(),
        #[cfg(feature = "parallel")]
        Execution::Parallel => {
            use rayon::prelude::*;
            (0..r).into_par_iter().map(render_row).collect()
        }
        #[cfg(not(feature = "parallel"))]
        Execution::Parallel => (0..r).map(render_row).collect(),
    };
    let (labels, confidence) = rows.into_iter().flatten().unzip();
    Ok(DecisionMap {
        spec: grid.spec,
        classes,
        labels,
        confidence,
    })
}

fn check_palette(palette: &[[u8; 3]], classes: usize) -> Result<()> {
    if palette.len() < classes {
        return Err(Error::InvalidArgument(format!(
            "palette has {} colors for {classes} classes",
            palette.len()
        )));
    }
    Ok(())
}

/// Blend a class color toward white: `conf' = 0.5 + 0.5·confidence`,
/// `color·conf' + 255·(1 − conf')`, rounded half up.
pub fn shade(color: [u8; 3], confidence: f64) -> [u8; 3] {
    let c = 0.5 + 0.5 * confidence.clamp(0.0, 1.0);
    color.map(|v| (f64::from(v) * c + 255.0 * (1.0 - c) + 0.5).floor() as u8)
}

pub fn map_image(map: &DecisionMap, palette: &[[u8; 3]]) -> Result<RgbImage> {
    check_palette(palette, map.classes)?;
    let r = map.resolution();
    let mut img = RgbImage::new(r, r, [255, 255, 255]);
    for (p, (&label, &conf)) in map.labels.iter().zip(&map.confidence).enumerate() {
        img.set(p / r, p % r, shade(palette[label], conf));
    }
    Ok(img)
}

/// Binary PPM of the map.
pub fn encode_image(map: &DecisionMap, palette: &[[u8; 3]]) -> Result<Vec<u8>> {
    Ok(map_image(map, palette)?.to_ppm())
}

/// Draw each point as a 3×3 square of its class color inside a 1-pixel
/// black outline, in index order. The image is assumed to span `bounds`.
pub fn overlay_scatter(
    image: &[u8],
    bounds: &Bounds,
    coords: ArrayView2<'_, f64>,
    labels: &[usize],
    palette: &[[u8; 3]],
) -> Result<Vec<u8>> {
    let mut img = RgbImage::from_ppm(image)?;
    draw_scatter(&mut img, bounds, coords, labels, palette)?;
    Ok(img.to_ppm())
}

pub fn draw_scatter(
    img: &mut RgbImage,
    bounds: &Bounds,
    coords: ArrayView2<'_, f64>,
    labels: &[usize],
    palette: &[[u8; 3]],
) -> Result<()> {
    if coords.nrows() != labels.len() {
        return Err(Error::InvalidArgument(format!(
            "{} points but {} labels",
            coords.nrows(),
            labels.len()
        )));
    }
    if let Some(&max) = labels.iter().max() {
        check_palette(palette, max + 1)?;
    }
    let r = img.width;
    for (row, &label) in coords.rows().into_iter().zip(labels) {
        let Some((pi, pj)) = pixel_at(bounds, r, row[0], row[1]) else {
            continue;
        };
        let (pi, pj) = (pi as i64, pj as i64);
        for di in -2..=2i64 {
            for dj in -2..=2i64 {
                let color = if di.abs() == 2 || dj.abs() == 2 { [0, 0, 0] } else { palette[label] };
                img.set_clipped(pi + di, pj + dj, color);
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn unit() -> Bounds {
        Bounds {
            xmin: 0.0,
            xmax: 1.0,
            ymin: 0.0,
            ymax: 1.0,
        }
    }

    struct Identity;
    impl Unproject for Identity {
        fn output_width(&self) -> usize {
            2
        }
        fn unproject_batch(&self, p: ArrayView2<'_, f64>) -> Array2<f64> {
            p.to_owned()
        }
    }

    struct Fixed(usize);
    impl ProbaModel for Fixed {
        fn n_features(&self) -> usize {
            2
        }
        fn n_classes(&self) -> usize {
            3
        }
        fn predict_proba_batch(&self, x: ArrayView2<'_, f64>) -> Array2<f64> {
            Array2::from_shape_fn((x.nrows(), 3), |(_, c)| if c == self.0 { 0.9 } else { 0.05 })
        }
    }

    #[test]
    fn two_by_two_grid_has_one_location_per_quadrant() {
        let g = build_grid(unit(), 2, 1, 4).unwrap();
        assert_eq!(g.locations.nrows(), 4);
        let [x, y] = g.location(0, 0, 0);
        assert!(x > 0.0 && x < 0.5 && y > 0.5 && y < 1.0);
        let [x, y] = g.location(1, 1, 0);
        assert!(x > 0.5 && x < 1.0 && y > 0.0 && y < 0.5);
    }

    #[test]
    fn locations_stay_inside_their_cells() {
        let b = Bounds {
            xmin: -3.0,
            xmax: 7.0,
            ymin: 2.0,
            ymax: 2.5,
        };
        let g = build_grid(b, 10, 3, 9).unwrap();
        assert_eq!(g.locations.nrows(), 300);
        for i in 0..10 {
            for j in 0..10 {
                let (x0, x1, y0, y1) = g.spec.cell(i, j);
                for k in 0..3 {
                    let [x, y] = g.location(i, j, k);
                    assert!(x > x0 && x < x1 && y > y0 && y < y1);
                    assert_eq!(g.spec.pixel_at(x, y), Some((i, j)));
                }
            }
        }
        assert_eq!(g, build_grid(b, 10, 3, 9).unwrap());
    }

    #[test]
    fn degenerate_bounds_are_rejected() {
        let b = Bounds {
            xmin: 1.0,
            xmax: 1.0,
            ymin: 0.0,
            ymax: 1.0,
        };
        assert!(build_grid(b, 4, 1, 0).is_err());
        assert!(build_grid(unit(), 1, 1, 0).is_err());
        assert!(build_grid(unit(), 4, 0, 0).is_err());
    }

    #[test]
    fn constant_classifier_paints_everything() {
        let g = build_grid(unit(), 8, 3, 1).unwrap();
        let map = render_map(&g, &Identity, &Fixed(2)).unwrap();
        assert!(map.labels.iter().all(|&l| l == 2));
        assert!(map.confidence.iter().all(|&c| c == 1.0));
    }

    #[test]
    fn single_pixel_image_bytes() {
        let map = DecisionMap {
            spec: GridSpec {
                resolution: 1,
                samples_per_pixel: 1,
                bounds: unit(),
                seed: 0,
            },
            classes: 1,
            labels: vec![0],
            confidence: vec![1.0],
        };
        let bytes = encode_image(&map, &DEFAULT_PALETTE).unwrap();
        let mut expected = b"P6\n1 1\n255\n".to_vec();
        expected.extend_from_slice(&[31, 119, 180]);
        assert_eq!(bytes, expected);
    }

    #[test]
    fn zero_confidence_is_halfway_to_white() {
        assert_eq!(shade([31, 119, 180], 0.0), [143, 187, 218]);
        assert_eq!(shade([31, 119, 180], 1.0), [31, 119, 180]);
    }

    #[test]
    fn short_palette_is_an_error() {
        let map = DecisionMap {
            spec: GridSpec {
                resolution: 2,
                samples_per_pixel: 1,
                bounds: unit(),
                seed: 0,
            },
            classes: 3,
            labels: vec![0, 1, 2, 0],
            confidence: vec![1.0; 4],
        };
        assert!(encode_image(&map, &DEFAULT_PALETTE[..2]).is_err());
    }

    #[test]
    fn scatter_square_is_centered_and_outlined() {
        let b = unit();
        let base = RgbImage::new(11, 11, [255, 255, 255]).to_ppm();
        let out = overlay_scatter(&base, &b, array![[0.5, 0.5]].view(), &[1], &DEFAULT_PALETTE).unwrap();
        let img = RgbImage::from_ppm(&out).unwrap();
        assert_eq!(img.get(5, 5), DEFAULT_PALETTE[1]);
        assert_eq!(img.get(4, 6), DEFAULT_PALETTE[1]);
        assert_eq!(img.get(3, 5), [0, 0, 0]);
        assert_eq!(img.get(7, 7), [0, 0, 0]);
        assert_eq!(img.get(2, 5), [255, 255, 255]);
    }

    #[test]
    fn scatter_empty_is_noop_and_later_points_win() {
        let b = unit();
        let base = RgbImage::new(11, 11, [255, 255, 255]).to_ppm();
        let empty = Array2::<f64>::zeros((0, 2));
        assert_eq!(overlay_scatter(&base, &b, empty.view(), &[], &DEFAULT_PALETTE).unwrap(), base);
        let pts = array![[0.5, 0.5], [0.5, 0.5]];
        let out = overlay_scatter(&base, &b, pts.view(), &[0, 3], &DEFAULT_PALETTE).unwrap();
        assert_eq!(RgbImage::from_ppm(&out).unwrap().get(5, 5), DEFAULT_PALETTE[3]);
    }
}
