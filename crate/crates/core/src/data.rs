//! Pages, label maps, the dataset manifest, patch sampling and the
//! synthetic manuscript generator.

use std::path::{Path, PathBuf};

use image::{GrayImage, ImageBuffer, Luma, Rgb, RgbImage};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::{scale_pixel, Sample, SampleSource};
use crate::rng::{derive_seed, rng_from_seed};

pub const BACKGROUND: u8 = 0;
pub const COMMENT: u8 = 1;
pub const DECORATION: u8 = 2;
pub const TEXT: u8 = 3;
pub const CLASS_COUNT: usize = 4;
pub const CLASS_NAMES: [&str; CLASS_COUNT] = ["background", "comment", "decoration", "text"];

/// Display colors for label maps, indexed by class.
pub const DEFAULT_PALETTE: [[u8; 3]; CLASS_COUNT] =
    [[255, 255, 255], [0, 160, 0], [200, 0, 0], [0, 0, 200]];

/// Per-pixel class indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelMap {
    pub width: u32,
    pub height: u32,
    pub class_count: usize,
    pub labels: Vec<u8>,
    pub palette: Vec<[u8; 3]>,
}

impl LabelMap {
    pub fn new(width: u32, height: u32, class_count: usize, labels: Vec<u8>) -> Result<Self> {
        if labels.len() != width as usize * height as usize {
            return Err(Error::Shape(format!(
                "{} labels for a {width}x{height} map",
                labels.len()
            )));
        }
        if let Some(&l) = labels.iter().find(|&&l| l as usize >= class_count) {
            return Err(Error::LabelRange {
                label: l as usize,
                class_count,
            });
        }
        Ok(Self {
            width,
            height,
            class_count,
            labels,
            palette: default_palette(class_count),
        })
    }

    pub fn filled(width: u32, height: u32, class_count: usize, label: u8) -> Result<Self> {
        Self::new(
            width,
            height,
            class_count,
            vec![label; width as usize * height as usize],
        )
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32) -> u8 {
        self.labels[y as usize * self.width as usize + x as usize]
    }

    #[inline]
    pub fn set(&mut self, x: u32, y: u32, label: u8) {
        self.labels[y as usize * self.width as usize + x as usize] = label;
    }

    pub fn class_histogram(&self) -> Vec<usize> {
        let mut h = vec![0usize; self.class_count];
        for &l in &self.labels {
            h[l as usize] += 1;
        }
        h
    }

    /// Grayscale image whose pixel value is the class index.
    pub fn to_gray(&self) -> GrayImage {
        GrayImage::from_raw(self.width, self.height, self.labels.clone())
            .expect("label buffer matches dimensions")
    }

    /// Color rendering through the palette.
    pub fn to_color(&self) -> RgbImage {
        ImageBuffer::from_fn(self.width, self.height, |x, y| {
            Rgb(self.palette[self.get(x, y) as usize])
        })
    }
}

fn default_palette(class_count: usize) -> Vec<[u8; 3]> {
    (0..class_count)
        .map(|c| DEFAULT_PALETTE.get(c).copied().unwrap_or([128, 128, 128]))
        .collect()
}

/// An RGB page and its ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct Page {
    pub image: RgbImage,
    pub truth: LabelMap,
}

impl Page {
    pub fn new(image: RgbImage, truth: LabelMap) -> Result<Self> {
        if image.dimensions() != (truth.width, truth.height) {
            return Err(Error::Data(format!(
                "image is {:?} but label map is {}x{}",
                image.dimensions(),
                truth.width,
                truth.height
            )));
        }
        Ok(Self { image, truth })
    }

    pub fn width(&self) -> u32 {
        self.image.width()
    }

    pub fn height(&self) -> u32 {
        self.image.height()
    }

    /// Page pixels scaled to [-1, 1], row-major `height × width × 3`.
    pub fn scaled(&self) -> Vec<f64> {
        self.image.as_raw().iter().map(|&v| scale_pixel(v)).collect()
    }

    pub fn save(&self, image_path: &Path, label_path: &Path) -> Result<()> {
        self.image
            .save(image_path)
            .map_err(|e| Error::image(image_path, e))?;
        self.truth
            .to_gray()
            .save(label_path)
            .map_err(|e| Error::image(label_path, e))
    }
}

/// Loads an RGB page and its grayscale-index label map.
pub fn load_page(image_path: &Path, label_path: &Path, class_count: usize) -> Result<Page> {
    let image = image::open(image_path)
        .map_err(|e| Error::image(image_path, e))?
        .into_rgb8();
    let labels = image::open(label_path).map_err(|e| Error::image(label_path, e))?;
    let labels = match labels {
        image::DynamicImage::ImageLuma8(g) => g,
        other => {
            return Err(Error::Data(format!(
                "{}: label maps must be 8-bit grayscale, found {:?}",
                label_path.display(),
                other.color()
            )))
        }
    };
    let (w, h) = labels.dimensions();
    let truth = LabelMap::new(w, h, class_count, labels.into_raw())?;
    Page::new(image, truth)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Validation,
    Test,
}

impl std::str::FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Self::Train),
            "validation" | "val" => Ok(Self::Validation),
            "test" => Ok(Self::Test),
            other => Err(Error::InvalidInput(format!("unknown split `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PageSet {
    pub split: Split,
    pub class_count: usize,
    pub pages: Vec<Page>,
}

impl PageSet {
    pub fn new(split: Split, class_count: usize, pages: Vec<Page>) -> Result<Self> {
        if pages.is_empty() {
            return Err(Error::Data(format!("{split:?} split has no pages")));
        }
        if let Some(p) = pages.iter().find(|p| p.truth.class_count != class_count) {
            return Err(Error::Data(format!(
                "page with {} classes in a {class_count}-class set",
                p.truth.class_count
            )));
        }
        Ok(Self {
            split,
            class_count,
            pages,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PageEntry {
    pub image: PathBuf,
    pub label: PathBuf,
}

/// JSON index of a dataset directory; paths are relative to the manifest.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub format_version: u32,
    pub class_count: usize,
    pub class_names: Vec<String>,
    pub palette: Vec<[u8; 3]>,
    pub train: Vec<PageEntry>,
    pub validation: Vec<PageEntry>,
    pub test: Vec<PageEntry>,
}

pub const MANIFEST_FILE: &str = "manifest.json";

impl Manifest {
    pub fn load(path: &Path) -> Result<(Self, PathBuf)> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let manifest: Manifest = serde_json::from_str(&text)?;
        let root = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok((manifest, root))
    }

    pub fn entries(&self, split: Split) -> &[PageEntry] {
        match split {
            Split::Train => &self.train,
            Split::Validation => &self.validation,
            Split::Test => &self.test,
        }
    }

    pub fn load_split(&self, root: &Path, split: Split) -> Result<PageSet> {
        let pages = self
            .entries(split)
            .iter()
            .map(|e| {
                let mut page = load_page(&root.join(&e.image), &root.join(&e.label), self.class_count)?;
                if self.palette.len() == self.class_count {
                    page.truth.palette = self.palette.clone();
                }
                Ok(page)
            })
            .collect::<Result<Vec<_>>>()?;
        PageSet::new(split, self.class_count, pages)
    }
}

/// Loads one split of the dataset described by the manifest at `path`.
pub fn load_split(manifest_path: &Path, split: Split) -> Result<PageSet> {
    let (manifest, root) = Manifest::load(manifest_path)?;
    manifest.load_split(&root, split)
}

/// Draws square patches centred on page pixels, labelled with the centre
/// pixel's class.
#[derive(Debug, Clone)]
pub struct PatchSampler<'a> {
    pages: &'a PageSet,
    patch_h: usize,
    patch_w: usize,
    balanced: bool,
    /// Candidate centres per class as (page, x, y).
    candidates: Vec<Vec<(u32, u32, u32)>>,
}

impl<'a> PatchSampler<'a> {
    pub fn new(pages: &'a PageSet, patch_h: usize, patch_w: usize, balanced: bool) -> Result<Self> {
        let (half_h, half_w) = (patch_h / 2, patch_w / 2);
        let mut candidates = vec![Vec::new(); pages.class_count];
        for (pi, page) in pages.pages.iter().enumerate() {
            let (w, h) = (page.width() as usize, page.height() as usize);
            if w < patch_w || h < patch_h {
                return Err(Error::Data(format!(
                    "page {pi} is {w}x{h}, smaller than the {patch_w}x{patch_h} patch"
                )));
            }
            for y in half_h..=h - (patch_h - half_h) {
                for x in half_w..=w - (patch_w - half_w) {
                    let label = page.truth.get(x as u32, y as u32) as usize;
                    candidates[label].push((pi as u32, x as u32, y as u32));
                }
            }
        }
        if balanced {
            if let Some(c) = candidates.iter().position(Vec::is_empty) {
                return Err(Error::Data(format!(
                    "class {c} does not occur at any patch centre; balanced sampling is impossible"
                )));
            }
        }
        Ok(Self {
            pages,
            patch_h,
            patch_w,
            balanced,
            candidates,
        })
    }

    pub fn is_balanced(&self) -> bool {
        self.balanced
    }

    /// Extracts the patch centred on `(x, y)` of page `page`.
    pub fn patch_at(&self, page: usize, x: u32, y: u32) -> Vec<f64> {
        let p = &self.pages.pages[page];
        let (x0, y0) = (x as usize - self.patch_w / 2, y as usize - self.patch_h / 2);
        let raw = p.image.as_raw();
        let width = p.width() as usize;
        let mut out = Vec::with_capacity(self.patch_h * self.patch_w * 3);
        for dy in 0..self.patch_h {
            let start = ((y0 + dy) * width + x0) * 3;
            out.extend(raw[start..start + self.patch_w * 3].iter().map(|&v| scale_pixel(v)));
        }
        out
    }

    /// `count` patches; with balancing, class counts differ by at most one.
    pub fn sample_patches(&self, seed: u64, count: usize) -> Result<Vec<Sample>> {
        let mut rng = rng_from_seed(seed);
        let mut picks: Vec<(u32, u32, u32, usize)> = Vec::with_capacity(count);
        if self.balanced {
            let k = self.candidates.len();
            for c in 0..k {
                let n = count / k + usize::from(c < count % k);
                let pool = &self.candidates[c];
                for _ in 0..n {
                    let (p, x, y) = pool[rng.random_range(0..pool.len())];
                    picks.push((p, x, y, c));
                }
            }
            picks.shuffle(&mut rng);
        } else {
            let total: usize = self.candidates.iter().map(Vec::len).sum();
            if total == 0 {
                return Err(Error::Data("no patch centres available".into()));
            }
            for _ in 0..count {
                let mut i = rng.random_range(0..total);
                let mut class = 0;
                while i >= self.candidates[class].len() {
                    i -= self.candidates[class].len();
                    class += 1;
                }
                let (p, x, y) = self.candidates[class][i];
                picks.push((p, x, y, class));
            }
        }
        Ok(picks
            .into_iter()
            .map(|(p, x, y, label)| Sample {
                patch: self.patch_at(p as usize, x, y),
                label,
            })
            .collect())
    }
}

impl SampleSource for PatchSampler<'_> {
    fn class_count(&self) -> usize {
        self.pages.class_count
    }

    fn draw(&self, seed: u64, count: usize) -> Result<Vec<Sample>> {
        self.sample_patches(seed, count)
    }
}

// Synthetic manuscript pages.

const PARCHMENT: [f64; 3] = [221.0, 199.0, 154.0];
const TEXT_INK: [f64; 3] = [48.0, 36.0, 30.0];
const COMMENT_INK: [f64; 3] = [150.0, 86.0, 62.0];
const DECORATION_COLORS: [[f64; 3]; 4] = [
    [184.0, 42.0, 36.0],
    [46.0, 72.0, 160.0],
    [52.0, 118.0, 64.0],
    [196.0, 150.0, 40.0],
];

pub const MIN_PAGE_SIZE: u32 = 64;

/// Generates `count` synthetic pages with pixel-accurate ground truth.
///
/// Pages show a parchment background with noise, a main column of dark text
/// lines, a margin column of thinner and lighter comment lines, and colored
/// decoration blobs. All four classes occur on every page.
pub fn generate_synthetic(seed: u64, count: usize, width: u32, height: u32) -> Result<PageSet> {
    if width < MIN_PAGE_SIZE || height < MIN_PAGE_SIZE {
        return Err(Error::InvalidInput(format!(
            "synthetic pages must be at least {MIN_PAGE_SIZE}x{MIN_PAGE_SIZE}, got {width}x{height}"
        )));
    }
    if count == 0 {
        return Err(Error::InvalidInput("page count must be positive".into()));
    }
    let pages = (0..count)
        .map(|i| generate_page(derive_seed(seed, i as u64), width, height))
        .collect();
    PageSet::new(Split::Train, CLASS_COUNT, pages)
}

struct Canvas {
    width: usize,
    height: usize,
    /// Clean ink color per pixel before noise.
    color: Vec<[f64; 3]>,
    labels: Vec<u8>,
}

impl Canvas {
    fn paint(&mut self, x: usize, y: usize, color: [f64; 3], label: u8) {
        if x < self.width && y < self.height {
            let i = y * self.width + x;
            self.color[i] = color;
            self.labels[i] = label;
        }
    }

    fn count(&self, label: u8) -> usize {
        self.labels.iter().filter(|&&l| l == label).count()
    }
}

fn jitter(rng: &mut ChaCha8Rng, base: [f64; 3], amount: f64) -> [f64; 3] {
    let shift = rng.random_range(-amount..=amount);
    [base[0] + shift, base[1] + shift, base[2] + shift]
}

/// Ink strokes along one line: words made of letters separated by 1 px gaps.
#[allow(clippy::too_many_arguments)]
fn draw_line(
    canvas: &mut Canvas,
    rng: &mut ChaCha8Rng,
    x_start: usize,
    x_end: usize,
    y: usize,
    stroke: usize,
    ink: [f64; 3],
    label: u8,
) {
    let mut x = x_start;
    let word_min = ((x_end - x_start) / 12).max(3);
    let word_max = ((x_end - x_start) / 4).max(word_min + 1);
    while x < x_end {
        let word = rng.random_range(word_min..=word_max);
        let word_end = (x + word).min(x_end);
        let color = jitter(rng, ink, 10.0);
        let mut lx = x;
        while lx < word_end {
            let letter = rng.random_range(2..=4usize);
            // Ascenders and descenders vary the stroke height per letter.
            let rise = if rng.random_bool(0.25) { stroke / 2 + 1 } else { 0 };
            let top = y.saturating_sub(rise);
            for px in lx..(lx + letter).min(word_end) {
                for py in top..y + stroke {
                    canvas.paint(px, py, color, label);
                }
            }
            lx += letter + 1;
        }
        x = word_end + rng.random_range(2..=((x_end - x_start) / 30).max(3));
    }
}

fn draw_blob(canvas: &mut Canvas, rng: &mut ChaCha8Rng, cx: f64, cy: f64, rx: f64, ry: f64) {
    let base = DECORATION_COLORS[rng.random_range(0..DECORATION_COLORS.len())];
    let color = jitter(rng, base, 12.0);
    let wobble = rng.random_range(0.0..std::f64::consts::TAU);
    let x0 = (cx - rx * 1.2).max(0.0) as usize;
    let y0 = (cy - ry * 1.2).max(0.0) as usize;
    let x1 = ((cx + rx * 1.2) as usize).min(canvas.width - 1);
    let y1 = ((cy + ry * 1.2) as usize).min(canvas.height - 1);
    for y in y0..=y1 {
        for x in x0..=x1 {
            let dx = (x as f64 - cx) / rx;
            let dy = (y as f64 - cy) / ry;
            let angle = dy.atan2(dx);
            let radius = 1.0 + 0.15 * (3.0 * angle + wobble).sin();
            let r2 = dx * dx + dy * dy;
            // Filled letter-like shape with a hollow core.
            if r2 <= radius * radius && r2 >= 0.12 {
                canvas.paint(x, y, color, DECORATION);
            }
        }
    }
}

fn generate_page(seed: u64, width: u32, height: u32) -> Page {
    let mut rng = rng_from_seed(seed);
    let (w, h) = (width as usize, height as usize);
    let parchment = jitter(&mut rng, PARCHMENT, 8.0);
    let mut canvas = Canvas {
        width: w,
        height: h,
        color: vec![parchment; w * h],
        labels: vec![BACKGROUND; w * h],
    };

    let wf = w as f64;
    let hf = h as f64;
    let top = (0.07 * hf) as usize;
    let bottom = (0.93 * hf) as usize;

    // Main text column.
    let main_x0 = (0.33 * wf) as usize;
    let main_x1 = (0.94 * wf) as usize;
    let pitch = (hf / 40.0).round().max(6.0) as usize;
    let stroke = (pitch * 2 / 5).max(2);
    let mut y = top;
    while y + stroke < bottom {
        if rng.random_bool(0.92) {
            draw_line(&mut canvas, &mut rng, main_x0, main_x1, y, stroke, TEXT_INK, TEXT);
        }
        y += pitch;
    }

    // Comment column in the left margin.
    let margin_x0 = (0.05 * wf) as usize;
    let margin_x1 = (0.27 * wf) as usize;
    let c_pitch = (pitch * 3 / 4).max(5);
    let c_stroke = (stroke * 2 / 3).max(1);
    let mut y = top + rng.random_range(0..=(bottom - top) / 6);
    let c_bottom = bottom - rng.random_range(0..=(bottom - top) / 6);
    while y + c_stroke < c_bottom {
        if rng.random_bool(0.7) {
            draw_line(&mut canvas, &mut rng, margin_x0, margin_x1, y, c_stroke, COMMENT_INK, COMMENT);
        }
        y += c_pitch;
    }

    // Decorated initials overlapping the main column.
    let blobs = rng.random_range(2..=3);
    for i in 0..blobs {
        let r = rng.random_range(0.055..0.085) * wf;
        let band = (bottom - top) as f64 / blobs as f64;
        let cy = top as f64 + band * (i as f64 + rng.random_range(0.3..0.7));
        let cx = main_x0 as f64 + r * rng.random_range(0.8..1.6);
        let ry = r * rng.random_range(0.9..1.3);
        draw_blob(&mut canvas, &mut rng, cx, cy, r, ry);
    }

    // Tiny pages may miss a class; stamp a small mark so every class occurs.
    for (label, ink, (fx, fy)) in [
        (TEXT, TEXT_INK, (0.6, 0.5)),
        (COMMENT, COMMENT_INK, (0.15, 0.5)),
        (DECORATION, DECORATION_COLORS[0], (0.4, 0.2)),
    ] {
        if canvas.count(label) == 0 {
            let (cx, cy) = ((fx * wf) as usize, (fy * hf) as usize);
            for y in cy..cy + 3 {
                for x in cx..cx + 4 {
                    canvas.paint(x, y, ink, label);
                }
            }
        }
    }

    // Slow shading plus per-pixel sensor noise.
    let noise = Normal::new(0.0, 7.0).expect("valid sigma");
    let phase_x = rng.random_range(0.0..std::f64::consts::TAU);
    let phase_y = rng.random_range(0.0..std::f64::consts::TAU);
    let mut raw = Vec::with_capacity(w * h * 3);
    for y in 0..h {
        for x in 0..w {
            let shade = 6.0 * ((x as f64 / wf * 3.0 + phase_x).sin() + (y as f64 / hf * 2.0 + phase_y).cos());
            let c = canvas.color[y * w + x];
            for ch in c {
                let v = ch + shade + noise.sample(&mut rng);
                raw.push(v.round().clamp(0.0, 255.0) as u8);
            }
        }
    }
    let image = RgbImage::from_raw(width, height, raw).expect("buffer size matches");
    let truth = LabelMap::new(width, height, CLASS_COUNT, canvas.labels).expect("labels in range");
    Page { image, truth }
}

/// Writes a page set as PNG pairs into `dir` and returns the entries,
/// relative to `dir`.
pub fn write_pages(dir: &Path, prefix: &str, pages: &[Page]) -> Result<Vec<PageEntry>> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    pages
        .iter()
        .enumerate()
        .map(|(i, page)| {
            let image = PathBuf::from(format!("{prefix}{i:03}.png"));
            let label = PathBuf::from(format!("{prefix}{i:03}_gt.png"));
            page.save(&dir.join(&image), &dir.join(&label))?;
            Ok(PageEntry { image, label })
        })
        .collect()
}

/// Number of (train, validation, test) pages for a dataset of `n` pages,
/// following a 2:1:1 ratio with at least one test page when `n ≥ 2`.
pub fn split_sizes(n: usize) -> (usize, usize, usize) {
    if n < 2 {
        return (n, 0, 0);
    }
    let test = (n / 4).max(1);
    let validation = n / 4;
    (n - test - validation, validation, test)
}

/// Generates a synthetic dataset into `dir` and writes its manifest.
pub fn write_synthetic_dataset(dir: &Path, seed: u64, count: usize, width: u32, height: u32) -> Result<PathBuf> {
    let set = generate_synthetic(seed, count, width, height)?;
    let (n_train, n_val, _) = split_sizes(count);
    let pages = set.pages;
    let train = write_pages(dir, "train_", &pages[..n_train])?;
    let validation = write_pages(dir, "val_", &pages[n_train..n_train + n_val])?;
    let test = write_pages(dir, "test_", &pages[n_train + n_val..])?;
    let manifest = Manifest {
        format_version: 1,
        class_count: CLASS_COUNT,
        class_names: CLASS_NAMES.iter().map(|s| s.to_string()).collect(),
        palette: DEFAULT_PALETTE.to_vec(),
        train,
        validation,
        test,
    };
    let path = dir.join(MANIFEST_FILE);
    let text = serde_json::to_string_pretty(&manifest)?;
    std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

/// Convenience for building a page from a function of pixel position, used
/// mostly by tests.
pub fn page_from_fn(
    width: u32,
    height: u32,
    class_count: usize,
    mut f: impl FnMut(u32, u32) -> ([u8; 3], u8),
) -> Result<Page> {
    let mut image = RgbImage::new(width, height);
    let mut labels = Vec::with_capacity(width as usize * height as usize);
    for y in 0..height {
        for x in 0..width {
            let (rgb, label) = f(x, y);
            image.put_pixel(x, y, Rgb(rgb));
            labels.push(label);
        }
    }
    Page::new(image, LabelMap::new(width, height, class_count, labels)?)
}

/// Writes a label map as the canonical 8-bit grayscale PNG.
pub fn save_label_map(map: &LabelMap, path: &Path) -> Result<()> {
    let img: ImageBuffer<Luma<u8>, Vec<u8>> = map.to_gray();
    img.save(path).map_err(|e| Error::image(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn split_sizes_follow_ratio() {
        assert_eq!(split_sizes(6), (4, 1, 1));
        assert_eq!(split_sizes(40), (20, 10, 10));
        assert_eq!(split_sizes(1), (1, 0, 0));
    }

    #[test]
    fn label_range_is_checked() {
        assert!(matches!(
            LabelMap::new(1, 1, 4, vec![7]),
            Err(Error::LabelRange { label: 7, class_count: 4 })
        ));
    }

    #[test]
    fn generator_rejects_small_pages() {
        assert!(matches!(generate_synthetic(0, 1, 32, 100), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn small_pages_have_all_classes() {
        let set = generate_synthetic(5, 3, 64, 64).unwrap();
        for page in &set.pages {
            assert!(page.truth.class_histogram().iter().all(|&c| c > 0));
        }
    }

    #[test]
    fn sampler_rejects_small_pages() {
        let page = page_from_fn(10, 30, 2, |_, _| ([0, 0, 0], 0)).unwrap();
        let set = PageSet::new(Split::Train, 2, vec![page]).unwrap();
        assert!(matches!(PatchSampler::new(&set, 23, 23, false), Err(Error::Data(_))));
    }

    #[test]
    fn balanced_sampling_needs_every_class() {
        let page = page_from_fn(30, 30, 2, |_, _| ([0, 0, 0], 0)).unwrap();
        let set = PageSet::new(Split::Train, 2, vec![page]).unwrap();
        assert!(matches!(PatchSampler::new(&set, 23, 23, true), Err(Error::Data(_))));
        assert!(PatchSampler::new(&set, 23, 23, false).is_ok());
    }
}
