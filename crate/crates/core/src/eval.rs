//! Segmentation metrics, dense page prediction and image emitters for
//! classification overlays and first-layer features.

use std::path::Path;

use image::{Rgb, RgbImage};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{LabelMap, Page, PageSet};
use crate::error::{Error, Result};
use crate::lda::argmax;
use crate::network::{Layer, Network};

/// Pixel counts, rows indexed by truth and columns by prediction.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    class_count: usize,
    counts: Vec<u64>,
}

impl ConfusionMatrix {
    pub fn new(class_count: usize) -> Self {
        Self {
            class_count,
            counts: vec![0; class_count * class_count],
        }
    }

    pub fn from_pairs(class_count: usize, truth: &[u8], pred: &[u8]) -> Result<Self> {
        if truth.len() != pred.len() {
            return Err(Error::Shape(format!(
                "{} truth labels but {} predictions",
                truth.len(),
                pred.len()
            )));
        }
        let mut m = Self::new(class_count);
        for (&t, &p) in truth.iter().zip(pred) {
            for l in [t, p] {
                if l as usize >= class_count {
                    return Err(Error::LabelRange {
                        label: l as usize,
                        class_count,
                    });
                }
            }
            m.add(t as usize, p as usize);
        }
        Ok(m)
    }

    pub fn class_count(&self) -> usize {
        self.class_count
    }

    #[inline]
    pub fn add(&mut self, truth: usize, pred: usize) {
        self.counts[truth * self.class_count + pred] += 1;
    }

    #[inline]
    pub fn get(&self, truth: usize, pred: usize) -> u64 {
        self.counts[truth * self.class_count + pred]
    }

    pub fn merge(&mut self, other: &ConfusionMatrix) {
        assert_eq!(self.class_count, other.class_count, "class count mismatch");
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn rows(&self) -> Vec<Vec<u64>> {
        self.counts.chunks(self.class_count).map(<[u64]>::to_vec).collect()
    }

    pub fn true_positives(&self, c: usize) -> u64 {
        self.get(c, c)
    }

    pub fn false_positives(&self, c: usize) -> u64 {
        (0..self.class_count).filter(|&t| t != c).map(|t| self.get(t, c)).sum()
    }

    pub fn false_negatives(&self, c: usize) -> u64 {
        (0..self.class_count).filter(|&p| p != c).map(|p| self.get(c, p)).sum()
    }

    /// `TP / (TP + FP + FN)`; `None` for classes absent from the truth.
    pub fn per_class_iu(&self) -> Vec<Option<f64>> {
        (0..self.class_count)
            .map(|c| {
                let tp = self.true_positives(c);
                let fn_ = self.false_negatives(c);
                if tp + fn_ == 0 {
                    return None;
                }
                let union = tp + fn_ + self.false_positives(c);
                Some(tp as f64 / union as f64)
            })
            .collect()
    }

    /// Mean IU over the classes present in the truth.
    pub fn mean_iu(&self) -> f64 {
        let present: Vec<f64> = self.per_class_iu().into_iter().flatten().collect();
        if present.is_empty() {
            return 0.0;
        }
        present.iter().sum::<f64>() / present.len() as f64
    }

    pub fn accuracy(&self) -> f64 {
        let total = self.total();
        if total == 0 {
            return 0.0;
        }
        let diag: u64 = (0..self.class_count).map(|c| self.get(c, c)).sum();
        diag as f64 / total as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub mean_iu: f64,
    pub accuracy: f64,
    pub per_class_iu: Vec<Option<f64>>,
    pub confusion: Vec<Vec<u64>>,
}

impl Metrics {
    pub fn from_confusion(m: &ConfusionMatrix) -> Self {
        Self {
            mean_iu: m.mean_iu(),
            accuracy: m.accuracy(),
            per_class_iu: m.per_class_iu(),
            confusion: m.rows(),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// `metric,value` rows; absent classes have an empty value.
    pub fn to_csv(&self, class_names: &[String]) -> String {
        let mut out = String::from("metric,value\n");
        out.push_str(&format!("mean_iu,{}\n", self.mean_iu));
        out.push_str(&format!("accuracy,{}\n", self.accuracy));
        for (c, iu) in self.per_class_iu.iter().enumerate() {
            let name = class_names.get(c).cloned().unwrap_or_else(|| format!("class{c}"));
            match iu {
                Some(v) => out.push_str(&format!("iu_{name},{v}\n")),
                None => out.push_str(&format!("iu_{name},\n")),
            }
        }
        out
    }

    pub fn save(&self, json_path: &Path, csv_path: &Path, class_names: &[String]) -> Result<()> {
        std::fs::write(json_path, self.to_json()?).map_err(|e| Error::io(json_path, e))?;
        std::fs::write(csv_path, self.to_csv(class_names)).map_err(|e| Error::io(csv_path, e))
    }
}

/// Truth and prediction on the evaluation grid of one page. Grid cell
/// `(i, j)` is the page pixel `(origin + j·stride, origin + i·stride)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PagePrediction {
    pub stride: usize,
    pub origin: (usize, usize),
    pub truth: LabelMap,
    pub pred: LabelMap,
}

impl PagePrediction {
    pub fn confusion(&self) -> ConfusionMatrix {
        let mut m = ConfusionMatrix::new(self.truth.class_count);
        for (&t, &p) in self.truth.labels.iter().zip(&self.pred.labels) {
            m.add(t as usize, p as usize);
        }
        m
    }
}

/// Head-output rows computed together; earlier layers recompute a few rows
/// at band edges.
const BAND_ROWS: usize = 48;

/// How one layer sits on the page: the step between its window cells in the
/// previous map and the pixel extent covered by one of its outputs.
#[derive(Debug, Clone, Copy)]
struct Placement {
    step_h: usize,
    step_w: usize,
    extent_h: usize,
    extent_w: usize,
}

fn placements(net: &Network) -> Vec<Placement> {
    let mut dilation_h = 1;
    let mut dilation_w = 1;
    let (mut ext_h, mut ext_w) = (1, 1);
    net.layers()
        .iter()
        .map(|l| {
            let s = l.spec;
            ext_h += (s.patch_h - 1) * dilation_h;
            ext_w += (s.patch_w - 1) * dilation_w;
            let (step_h, step_w) = (dilation_h, dilation_w);
            dilation_h *= s.offset_h;
            dilation_w *= s.offset_w;
            Placement {
                step_h,
                step_w,
                extent_h: ext_h,
                extent_w: ext_w,
            }
        })
        .collect()
}

/// Classifies the centre pixel of every patch on a `stride`-spaced grid.
///
/// Every layer is evaluated once per page position instead of once per
/// patch, which gives the same scores as [`Network::predict`] on each patch.
pub fn predict_page(net: &Network, page: &Page, stride: usize) -> Result<PagePrediction> {
    if stride == 0 {
        return Err(Error::InvalidInput("stride must be at least 1".into()));
    }
    if net.input_channels() != 3 {
        return Err(Error::Shape(format!(
            "pages are RGB but the network expects {} channels",
            net.input_channels()
        )));
    }
    if page.truth.class_count != net.class_count() {
        return Err(Error::InvalidInput(format!(
            "page has {} classes, network has {}",
            page.truth.class_count,
            net.class_count()
        )));
    }
    let (rf_h, rf_w) = net.receptive_field();
    let (h, w) = (page.height() as usize, page.width() as usize);
    if h < rf_h || w < rf_w {
        return Err(Error::Data(format!(
            "page {w}x{h} is smaller than the {rf_w}x{rf_h} receptive field"
        )));
    }
    let anchors_h = h - rf_h + 1;
    let anchors_w = w - rf_w + 1;
    let grid_h = (anchors_h - 1) / stride + 1;
    let grid_w = (anchors_w - 1) / stride + 1;

    let pixels = page.scaled();
    let plan = placements(net);
    // Bands hold whole grid rows so every band starts on a grid row.
    let band_grid_rows = (BAND_ROWS / stride).max(1);
    let bands: Vec<usize> = (0..grid_h).step_by(band_grid_rows).collect();
    let preds: Vec<Vec<u8>> = bands
        .par_iter()
        .map(|&g0| {
            let g1 = (g0 + band_grid_rows).min(grid_h);
            predict_band(net, &plan, &pixels, w, g0 * stride, (g1 - g0 - 1) * stride + 1, stride)
        })
        .collect();
    let pred: Vec<u8> = preds.into_iter().flatten().collect();

    let origin = (rf_w / 2, rf_h / 2);
    let mut truth = Vec::with_capacity(grid_h * grid_w);
    for i in 0..grid_h {
        for j in 0..grid_w {
            truth.push(page.truth.get((origin.0 + j * stride) as u32, (origin.1 + i * stride) as u32));
        }
    }
    let class_count = net.class_count();
    let mut truth = LabelMap::new(grid_w as u32, grid_h as u32, class_count, truth)?;
    truth.palette = page.truth.palette.clone();
    let mut pred = LabelMap::new(grid_w as u32, grid_h as u32, class_count, pred)?;
    pred.palette = page.truth.palette.clone();
    Ok(PagePrediction {
        stride,
        origin,
        truth,
        pred,
    })
}

/// Predictions for head anchors in rows `row0 .. row0 + rows` of the page.
/// Each layer's map covers every anchor of the band needed downstream.
fn predict_band(
    net: &Network,
    plan: &[Placement],
    pixels: &[f64],
    width: usize,
    row0: usize,
    rows: usize,
    stride: usize,
) -> Vec<u8> {
    let layers = net.layers();
    let depth = layers.len();
    let last = plan[depth - 1];
    let map_rows: Vec<usize> = plan.iter().map(|p| rows + last.extent_h - p.extent_h).collect();
    let map_cols: Vec<usize> = plan.iter().map(|p| width - p.extent_w + 1).collect();

    // Which anchors of each map are needed, from the head down.
    let mut need: Vec<Vec<bool>> = (0..depth).map(|k| vec![false; map_rows[k] * map_cols[k]]).collect();
    for y in (0..rows).step_by(stride) {
        for x in (0..map_cols[depth - 1]).step_by(stride) {
            need[depth - 1][y * map_cols[depth - 1] + x] = true;
        }
    }
    for k in (1..depth).rev() {
        let s = layers[k].spec;
        let (step_h, step_w) = (plan[k].step_h, plan[k].step_w);
        let (upper, lower) = need.split_at_mut(k);
        let below = &mut upper[k - 1];
        for y in 0..map_rows[k] {
            for x in 0..map_cols[k] {
                if !lower[0][y * map_cols[k] + x] {
                    continue;
                }
                for dy in 0..s.patch_h {
                    let row = (y + dy * step_h) * map_cols[k - 1];
                    for dx in 0..s.patch_w {
                        below[row + x + dx * step_w] = true;
                    }
                }
            }
        }
    }

    let band_pixels = &pixels[row0 * width * 3..];
    let mut prev: Vec<f64> = Vec::new();
    let max_fan_in = layers.iter().map(Layer::fan_in).max().unwrap_or(0);
    let mut window = vec![0.0; max_fan_in];
    for k in 0..depth {
        let layer = &layers[k];
        let n = layer.neurons();
        let fan_in = layer.fan_in();
        let (input, in_w, in_ch): (&[f64], usize, usize) = if k == 0 {
            (band_pixels, width, 3)
        } else {
            (&prev, map_cols[k - 1], layers[k - 1].neurons())
        };
        let mut out = vec![0.0; map_rows[k] * map_cols[k] * n];
        for y in 0..map_rows[k] {
            for x in 0..map_cols[k] {
                let a = y * map_cols[k] + x;
                if !need[k][a] {
                    continue;
                }
                gather_dilated(input, in_w, in_ch, layer, y, x, plan[k], &mut window[..fan_in]);
                layer.apply_window(&window[..fan_in], &mut out[a * n..(a + 1) * n]);
            }
        }
        prev = out;
    }

    let classes = net.class_count();
    let cols = map_cols[depth - 1];
    let mut pred = Vec::new();
    for y in (0..rows).step_by(stride) {
        for x in (0..cols).step_by(stride) {
            let a = y * cols + x;
            pred.push(argmax(&prev[a * classes..(a + 1) * classes]) as u8);
        }
    }
    pred
}

/// Window of `layer` anchored at `(y, x)` of a map whose neighbouring cells
/// of the previous layer sit `step` anchors apart. Cells are visited in the
/// same (row, column, channel) order as in a per-patch forward pass.
#[allow(clippy::too_many_arguments)]
#[inline]
fn gather_dilated(
    input: &[f64],
    width: usize,
    channels: usize,
    layer: &Layer,
    y: usize,
    x: usize,
    place: Placement,
    out: &mut [f64],
) {
    let mut k = 0;
    for dy in 0..layer.spec.patch_h {
        let row = (y + dy * place.step_h) * width;
        for dx in 0..layer.spec.patch_w {
            let start = (row + x + dx * place.step_w) * channels;
            out[k..k + channels].copy_from_slice(&input[start..start + channels]);
            k += channels;
        }
    }
}

/// Result of evaluating a network on a page set.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub confusion: ConfusionMatrix,
    pub pages: Vec<PagePrediction>,
}

impl Evaluation {
    pub fn mean_iu(&self) -> f64 {
        self.confusion.mean_iu()
    }

    pub fn accuracy(&self) -> f64 {
        self.confusion.accuracy()
    }

    pub fn metrics(&self) -> Metrics {
        Metrics::from_confusion(&self.confusion)
    }
}

pub fn evaluate(net: &Network, pages: &PageSet, stride: usize) -> Result<Evaluation> {
    let predictions = pages
        .pages
        .iter()
        .map(|p| predict_page(net, p, stride))
        .collect::<Result<Vec<_>>>()?;
    let mut confusion = ConfusionMatrix::new(pages.class_count);
    for p in &predictions {
        confusion.merge(&p.confusion());
    }
    if confusion.total() == 0 {
        return Err(Error::Data("evaluation grid is empty".into()));
    }
    Ok(Evaluation {
        confusion,
        pages: predictions,
    })
}

pub const GREEN: [u8; 3] = [0, 255, 0];
pub const BLACK: [u8; 3] = [0, 0, 0];
pub const BLUE: [u8; 3] = [0, 0, 255];
pub const RED: [u8; 3] = [255, 0, 0];
pub const YELLOW: [u8; 3] = [255, 255, 0];

/// Colors each pixel by the kind of (mis)classification.
///
/// Green: correct foreground. Black: correct background. Blue: foreground
/// predicted as background. Red: background predicted as foreground.
/// Yellow: foreground predicted as another foreground class.
pub fn render_overlay(truth: &LabelMap, pred: &LabelMap, background: u8) -> Result<RgbImage> {
    if (truth.width, truth.height) != (pred.width, pred.height) {
        return Err(Error::Shape(format!(
            "truth is {}x{} but prediction is {}x{}",
            truth.width, truth.height, pred.width, pred.height
        )));
    }
    Ok(RgbImage::from_fn(truth.width, truth.height, |x, y| {
        let (t, p) = (truth.get(x, y), pred.get(x, y));
        Rgb(match (t == background, p == background, t == p) {
            (true, true, _) => BLACK,
            (false, _, true) => GREEN,
            (false, true, _) => BLUE,
            (true, false, _) => RED,
            (false, false, false) => YELLOW,
        })
    }))
}

/// One RGB tile per neuron of a layer whose inputs are RGB windows. Each
/// tile maps `[-m, m]` to `[0, 255]`, `m` being the largest absolute weight
/// of that neuron, so zero is mid-gray.
pub fn render_features(layer: &Layer, channels: usize) -> Result<Vec<RgbImage>> {
    let s = layer.spec;
    if channels != 3 || layer.input_channels != 3 || layer.fan_in() != s.patch_h * s.patch_w * 3 {
        return Err(Error::Shape(format!(
            "features can only be rendered for RGB inputs, layer has {} channels",
            layer.input_channels
        )));
    }
    Ok((0..layer.neurons())
        .map(|j| {
            let row = layer.weights.row(j);
            let m = row.iter().fold(0.0f64, |a, &v| a.max(v.abs()));
            let mut raw = Vec::with_capacity(row.len());
            for &v in row {
                let scaled = if m > 0.0 { v / m } else { 0.0 };
                raw.push(((scaled + 1.0) * 127.5).round().clamp(0.0, 255.0) as u8);
            }
            RgbImage::from_raw(s.patch_w as u32, s.patch_h as u32, raw).expect("tile size matches")
        })
        .collect())
}

/// Standard deviation of each neuron's raw weights.
pub fn weight_spread(layer: &Layer) -> Vec<f64> {
    (0..layer.neurons())
        .map(|j| {
            let row = layer.weights.row(j);
            let n = row.len() as f64;
            let mean = row.iter().sum::<f64>() / n;
            (row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n).sqrt()
        })
        .collect()
}

/// Lays tiles out in rows of `columns`, each magnified `scale` times and
/// separated by a one-pixel white border.
pub fn feature_sheet(tiles: &[RgbImage], columns: usize, scale: u32) -> RgbImage {
    if tiles.is_empty() {
        return RgbImage::from_pixel(1, 1, Rgb([255, 255, 255]));
    }
    let columns = columns.max(1);
    let (tw, th) = tiles[0].dimensions();
    let (cw, ch) = (tw * scale + 1, th * scale + 1);
    let rows = tiles.len().div_ceil(columns) as u32;
    let mut sheet = RgbImage::from_pixel(columns as u32 * cw + 1, rows * ch + 1, Rgb([255, 255, 255]));
    for (i, tile) in tiles.iter().enumerate() {
        let (cx, cy) = ((i % columns) as u32 * cw + 1, (i / columns) as u32 * ch + 1);
        for y in 0..th * scale {
            for x in 0..tw * scale {
                sheet.put_pixel(cx + x, cy + y, *tile.get_pixel(x / scale, y / scale));
            }
        }
    }
    sheet
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::LayerSpec;

    #[test]
    fn constant_predictor_on_balanced_classes() {
        let truth: Vec<u8> = (0..400).map(|i| (i % 4) as u8).collect();
        let pred = vec![2u8; 400];
        let m = ConfusionMatrix::from_pairs(4, &truth, &pred).unwrap();
        assert_eq!(m.accuracy(), 0.25);
        assert_eq!(m.per_class_iu(), vec![Some(0.0), Some(0.0), Some(0.25), Some(0.0)]);
        assert_eq!(m.mean_iu(), 0.0625);
    }

    #[test]
    fn absent_classes_are_skipped() {
        let m = ConfusionMatrix::from_pairs(3, &[0, 0, 1], &[0, 2, 1]).unwrap();
        assert_eq!(m.per_class_iu()[2], None);
        assert_eq!(m.mean_iu(), (0.5 + 1.0) / 2.0);
    }

    #[test]
    fn placements_of_document_architecture() {
        let net = Network::new(3, 4, &crate::network::document_architecture()).unwrap();
        let p = placements(&net);
        let ext: Vec<usize> = p.iter().map(|p| p.extent_h).collect();
        let steps: Vec<usize> = p.iter().map(|p| p.step_h).collect();
        assert_eq!(ext, vec![5, 11, 23, 23]);
        assert_eq!(steps, vec![1, 3, 6, 6]);
    }

    #[test]
    fn zero_weights_render_gray() {
        let net = Network::new(3, 2, &[LayerSpec::square(2, 1, 2)]).unwrap();
        let tiles = render_features(&net.hidden()[0], 3).unwrap();
        assert_eq!(tiles.len(), 2);
        assert!(tiles[0].pixels().all(|p| p.0 == [128, 128, 128]));
    }

    #[test]
    fn non_rgb_layer_is_rejected() {
        let net = Network::new(1, 2, &[LayerSpec::square(2, 1, 2)]).unwrap();
        assert!(matches!(render_features(&net.hidden()[0], 3), Err(Error::Shape(_))));
    }
}
