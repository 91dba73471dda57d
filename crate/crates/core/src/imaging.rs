//! Raster containers shared by every pipeline stage, plus the elementary
//! pixel operations (grayscale conversion, colour differencing, Gaussian
//! smoothing and Sobel gradients).
//!
//! All rasters are row-major with `index = y * width + x`. Intensities are
//! unit-interval `f32`; 8-bit codecs divide by 255. Every convolution clamps
//! coordinates to the nearest edge pixel.

use crate::error::{ensure_dims, Error, Result};

/// Plain row-major plane of samples without range constraints. Used for
/// gradient responses and vote counts.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Raster<T> {
    width: usize,
    height: usize,
    data: Vec<T>,
}

impl<T: Clone> Raster<T> {
    pub fn filled(width: usize, height: usize, value: T) -> Self {
        Self {
            width,
            height,
            data: vec![value; width * height],
        }
    }
}

impl<T> Raster<T> {
    pub fn from_vec(width: usize, height: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::InvalidData(format!(
                "{} samples for a {width}x{height} raster",
                data.len()
            )));
        }
        Ok(Self { width, height, data })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }
}

impl<T: Copy> Raster<T> {
    #[inline]
    pub fn get(&self, x: usize, y: usize) -> T {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, value: T) {
        self.data[y * self.width + x] = value;
    }

    /// Sample with coordinates clamped to the raster.
    #[inline]
    pub fn get_clamped(&self, x: isize, y: isize) -> T {
        let x = x.clamp(0, self.width as isize - 1) as usize;
        let y = y.clamp(0, self.height as isize - 1) as usize;
        self.data[y * self.width + x]
    }
}

/// Single-channel intensity image with values in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage(Raster<f32>);

impl GrayImage {
    pub fn new(width: usize, height: usize) -> Self {
        Self(Raster::filled(width, height, 0.0))
    }

    pub fn filled(width: usize, height: usize, value: f32) -> Result<Self> {
        check_unit("value", value)?;
        Ok(Self(Raster::filled(width, height, value)))
    }

    pub fn from_vec(width: usize, height: usize, data: Vec<f32>) -> Result<Self> {
        if let Some(bad) = data.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::InvalidData(format!("gray intensity {bad} outside [0, 1]")));
        }
        Ok(Self(Raster::from_vec(width, height, data)?))
    }

    /// Clamps every sample into `[0, 1]`; NaN becomes 0.
    pub fn from_vec_clamped(width: usize, height: usize, mut data: Vec<f32>) -> Result<Self> {
        for v in &mut data {
            *v = clamp_unit(*v);
        }
        Ok(Self(Raster::from_vec(width, height, data)?))
    }

    pub fn width(&self) -> usize {
        self.0.width
    }

    pub fn height(&self) -> usize {
        self.0.height
    }

    pub fn dims(&self) -> (usize, usize) {
        self.0.dims()
    }

    pub fn data(&self) -> &[f32] {
        &self.0.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f32 {
        self.0.get(x, y)
    }

    pub fn set(&mut self, x: usize, y: usize, value: f32) {
        self.0.set(x, y, clamp_unit(value));
    }

    pub fn as_raster(&self) -> &Raster<f32> {
        &self.0
    }

    pub fn mean(&self) -> f64 {
        if self.0.data.is_empty() {
            return 0.0;
        }
        self.0.data.iter().map(|&v| v as f64).sum::<f64>() / self.0.data.len() as f64
    }
}

/// RGB image, each channel in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ColorImage(Raster<[f32; 3]>);

impl ColorImage {
    pub fn filled(width: usize, height: usize, rgb: [f32; 3]) -> Result<Self> {
        for c in rgb {
            check_unit("rgb", c)?;
        }
        Ok(Self(Raster::filled(width, height, rgb)))
    }

    pub fn from_pixels(width: usize, height: usize, pixels: Vec<[f32; 3]>) -> Result<Self> {
        if let Some(bad) = pixels.iter().flatten().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::InvalidData(format!("colour channel {bad} outside [0, 1]")));
        }
        Ok(Self(Raster::from_vec(width, height, pixels)?))
    }

    pub fn width(&self) -> usize {
        self.0.width
    }

    pub fn height(&self) -> usize {
        self.0.height
    }

    pub fn dims(&self) -> (usize, usize) {
        self.0.dims()
    }

    pub fn pixels(&self) -> &[[f32; 3]] {
        &self.0.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> [f32; 3] {
        self.0.get(x, y)
    }

    pub fn set(&mut self, x: usize, y: usize, rgb: [f32; 3]) {
        self.0.set(x, y, rgb.map(clamp_unit));
    }
}

/// Range image in meters. A sample of exactly `0.0` marks "no return".
#[derive(Debug, Clone, PartialEq)]
pub struct DepthImage {
    raster: Raster<f32>,
    max_range: f32,
}

impl DepthImage {
    pub fn invalid(width: usize, height: usize, max_range: f32) -> Result<Self> {
        Self::from_vec(width, height, vec![0.0; width * height], max_range)
    }

    pub fn from_vec(width: usize, height: usize, data: Vec<f32>, max_range: f32) -> Result<Self> {
        if !(max_range.is_finite() && max_range > 0.0) {
            return Err(Error::invalid("max_range", format!("{max_range} is not positive")));
        }
        if let Some(bad) = data.iter().find(|&&v| !v.is_finite() || v < 0.0 || v > max_range) {
            return Err(Error::InvalidData(format!(
                "depth sample {bad} outside [0, {max_range}]"
            )));
        }
        Ok(Self {
            raster: Raster::from_vec(width, height, data)?,
            max_range,
        })
    }

    pub fn width(&self) -> usize {
        self.raster.width
    }

    pub fn height(&self) -> usize {
        self.raster.height
    }

    pub fn dims(&self) -> (usize, usize) {
        self.raster.dims()
    }

    pub fn max_range(&self) -> f32 {
        self.max_range
    }

    pub fn data(&self) -> &[f32] {
        &self.raster.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f32 {
        self.raster.get(x, y)
    }

    #[inline]
    pub fn is_valid(&self, x: usize, y: usize) -> bool {
        self.raster.get(x, y) > 0.0
    }

    /// Depth divided by `max_range`; invalid samples map to 0.
    pub fn normalized(&self) -> GrayImage {
        let scale = 1.0 / self.max_range;
        let data = self.raster.data.iter().map(|&d| clamp_unit(d * scale)).collect();
        GrayImage(Raster {
            width: self.raster.width,
            height: self.raster.height,
            data,
        })
    }
}

/// Boolean raster; also used for grid masks (width = cols, height = rows).
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BinaryMask(Raster<bool>);

impl BinaryMask {
    pub fn new(width: usize, height: usize) -> Self {
        Self(Raster::filled(width, height, false))
    }

    pub fn from_vec(width: usize, height: usize, data: Vec<bool>) -> Result<Self> {
        Ok(Self(Raster::from_vec(width, height, data)?))
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self(Raster { width, height, data })
    }

    pub fn width(&self) -> usize {
        self.0.width
    }

    pub fn height(&self) -> usize {
        self.0.height
    }

    pub fn dims(&self) -> (usize, usize) {
        self.0.dims()
    }

    pub fn data(&self) -> &[bool] {
        &self.0.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> bool {
        self.0.get(x, y)
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, value: bool) {
        self.0.set(x, y, value);
    }

    pub fn count(&self) -> usize {
        self.0.data.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.0.data.iter().any(|&b| b)
    }

    /// Coordinates of every true pixel in raster order.
    pub fn iter_set(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let w = self.0.width;
        self.0
            .data
            .iter()
            .enumerate()
            .filter(|(_, &b)| b)
            .map(move |(i, _)| (i % w, i / w))
    }

    /// `self ⊆ other`.
    pub fn is_subset_of(&self, other: &BinaryMask) -> bool {
        self.dims() == other.dims() && self.0.data.iter().zip(&other.0.data).all(|(&a, &b)| !a || b)
    }

    pub fn intersection(&self, other: &BinaryMask) -> Result<BinaryMask> {
        ensure_dims(self.dims(), other.dims())?;
        let data = self.0.data.iter().zip(&other.0.data).map(|(&a, &b)| a && b).collect();
        Ok(Self(Raster {
            width: self.0.width,
            height: self.0.height,
            data,
        }))
    }

    pub fn union(&self, other: &BinaryMask) -> Result<BinaryMask> {
        ensure_dims(self.dims(), other.dims())?;
        let data = self.0.data.iter().zip(&other.0.data).map(|(&a, &b)| a || b).collect();
        Ok(Self(Raster {
            width: self.0.width,
            height: self.0.height,
            data,
        }))
    }

    /// Morphological dilation with a `(2r+1)²` square structuring element.
    pub fn dilate(&self, radius: usize) -> BinaryMask {
        let (w, h) = self.dims();
        let r = radius as isize;
        let mut out = BinaryMask::new(w, h);
        for (x, y) in self.iter_set() {
            for dy in -r..=r {
                for dx in -r..=r {
                    let nx = x as isize + dx;
                    let ny = y as isize + dy;
                    if nx >= 0 && ny >= 0 && (nx as usize) < w && (ny as usize) < h {
                        out.set(nx as usize, ny as usize, true);
                    }
                }
            }
        }
        out
    }

    /// Intersection over union; two empty masks give 1.
    pub fn iou(&self, other: &BinaryMask) -> Result<f64> {
        ensure_dims(self.dims(), other.dims())?;
        let mut inter = 0usize;
        let mut union = 0usize;
        for (&a, &b) in self.0.data.iter().zip(&other.0.data) {
            inter += (a && b) as usize;
            union += (a || b) as usize;
        }
        Ok(if union == 0 { 1.0 } else { inter as f64 / union as f64 })
    }

    /// Mean `(x, y)` of the true pixels.
    pub fn centroid(&self) -> Option<(f64, f64)> {
        let mut n = 0usize;
        let (mut sx, mut sy) = (0.0, 0.0);
        for (x, y) in self.iter_set() {
            n += 1;
            sx += x as f64;
            sy += y as f64;
        }
        (n > 0).then(|| (sx / n as f64, sy / n as f64))
    }

    pub fn to_gray(&self) -> GrayImage {
        let data = self.0.data.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect();
        GrayImage(Raster {
            width: self.0.width,
            height: self.0.height,
            data,
        })
    }
}

/// Inclusive pixel bounding box.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BoundingBox {
    pub min_x: usize,
    pub min_y: usize,
    pub max_x: usize,
    pub max_y: usize,
}

impl BoundingBox {
    pub(crate) fn point(x: usize, y: usize) -> Self {
        Self {
            min_x: x,
            min_y: y,
            max_x: x,
            max_y: y,
        }
    }

    pub(crate) fn include(&mut self, x: usize, y: usize) {
        self.min_x = self.min_x.min(x);
        self.min_y = self.min_y.min(y);
        self.max_x = self.max_x.max(x);
        self.max_y = self.max_y.max(y);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Component {
    pub label: u32,
    pub pixel_count: usize,
    pub bbox: BoundingBox,
}

/// Connected-component labels; 0 is background, components are `1..=K`.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelImage {
    raster: Raster<u32>,
    components: Vec<Component>,
}

impl LabelImage {
    pub(crate) fn from_parts(raster: Raster<u32>, components: Vec<Component>) -> Self {
        debug_assert!(components.iter().enumerate().all(|(i, c)| c.label as usize == i + 1));
        Self { raster, components }
    }

    pub fn width(&self) -> usize {
        self.raster.width
    }

    pub fn height(&self) -> usize {
        self.raster.height
    }

    pub fn dims(&self) -> (usize, usize) {
        self.raster.dims()
    }

    pub fn data(&self) -> &[u32] {
        &self.raster.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> u32 {
        self.raster.get(x, y)
    }

    pub fn components(&self) -> &[Component] {
        &self.components
    }

    pub fn component(&self, label: u32) -> Option<&Component> {
        label.checked_sub(1).and_then(|i| self.components.get(i as usize))
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    /// Pixels carrying any non-zero label.
    pub fn foreground(&self) -> BinaryMask {
        BinaryMask(Raster {
            width: self.raster.width,
            height: self.raster.height,
            data: self.raster.data.iter().map(|&l| l != 0).collect(),
        })
    }
}

/// Dense displacement field in pixels per frame.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowField {
    width: usize,
    height: usize,
    u: Vec<f32>,
    v: Vec<f32>,
}

impl FlowField {
    pub fn zeros(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            u: vec![0.0; width * height],
            v: vec![0.0; width * height],
        }
    }

    pub fn from_vecs(width: usize, height: usize, u: Vec<f32>, v: Vec<f32>) -> Result<Self> {
        if u.len() != width * height || v.len() != width * height {
            return Err(Error::InvalidData(format!(
                "flow components of length {}/{} for {width}x{height}",
                u.len(),
                v.len()
            )));
        }
        if u.iter().chain(&v).any(|x| !x.is_finite()) {
            return Err(Error::InvalidData("non-finite flow value".into()));
        }
        Ok(Self { width, height, u, v })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn u(&self) -> &[f32] {
        &self.u
    }

    pub fn v(&self) -> &[f32] {
        &self.v
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> (f32, f32) {
        let i = y * self.width + x;
        (self.u[i], self.v[i])
    }

    pub fn max_abs(&self) -> f32 {
        self.u.iter().chain(&self.v).fold(0.0f32, |m, x| m.max(x.abs()))
    }
}

#[inline]
pub(crate) fn clamp_unit(v: f32) -> f32 {
    if v.is_nan() {
        0.0
    } else {
        v.clamp(0.0, 1.0)
    }
}

fn check_unit(name: &'static str, v: f32) -> Result<()> {
    if !(0.0..=1.0).contains(&v) {
        return Err(Error::invalid(name, format!("{v} outside [0, 1]")));
    }
    Ok(())
}

pub const LUMA_WEIGHTS: [f32; 3] = [0.299, 0.587, 0.114];

pub fn to_gray(img: &ColorImage) -> GrayImage {
    let [wr, wg, wb] = LUMA_WEIGHTS;
    let data = img
        .pixels()
        .iter()
        .map(|&[r, g, b]| clamp_unit(wr * r + wg * g + wb * b))
        .collect();
    GrayImage(Raster {
        width: img.width(),
        height: img.height(),
        data,
    })
}

/// Marks pixels whose Euclidean RGB distance to the background exceeds `tau`.
pub fn color_absdiff_mask(img: &ColorImage, bg: &ColorImage, tau: f32) -> Result<BinaryMask> {
    ensure_dims(bg.dims(), img.dims())?;
    if !(0.0..=3f32.sqrt()).contains(&tau) {
        return Err(Error::invalid("tau", format!("{tau} outside [0, sqrt(3)]")));
    }
    let tau_sq = tau * tau;
    let data = img
        .pixels()
        .iter()
        .zip(bg.pixels())
        .map(|(a, b)| {
            let d: f32 = (0..3).map(|c| (a[c] - b[c]) * (a[c] - b[c])).sum();
            d > tau_sq
        })
        .collect();
    BinaryMask::from_vec(img.width(), img.height(), data)
}

/// Normalized 1-D Gaussian kernel of radius `ceil(3 sigma)`.
pub fn gaussian_kernel(sigma: f32) -> Result<Vec<f32>> {
    if !(sigma.is_finite() && sigma > 0.0) {
        return Err(Error::invalid("sigma", format!("{sigma} must be positive")));
    }
    let radius = (3.0 * sigma).ceil() as isize;
    let denom = 2.0 * (sigma as f64) * (sigma as f64);
    let raw: Vec<f64> = (-radius..=radius).map(|i| (-((i * i) as f64) / denom).exp()).collect();
    let sum: f64 = raw.iter().sum();
    Ok(raw.into_iter().map(|k| (k / sum) as f32).collect())
}

pub(crate) fn convolve_separable(src: &Raster<f32>, kernel: &[f32]) -> Raster<f32> {
    let (w, h) = src.dims();
    let r = (kernel.len() / 2) as isize;
    let mut tmp = vec![0.0f32; w * h];
    for y in 0..h {
        let row = &src.data[y * w..(y + 1) * w];
        for x in 0..w {
            let mut acc = 0.0;
            for (k, &kv) in kernel.iter().enumerate() {
                let sx = (x as isize + k as isize - r).clamp(0, w as isize - 1) as usize;
                acc += kv * row[sx];
            }
            tmp[y * w + x] = acc;
        }
    }
    let mut out = vec![0.0f32; w * h];
    for y in 0..h {
        for (k, &kv) in kernel.iter().enumerate() {
            let sy = (y as isize + k as isize - r).clamp(0, h as isize - 1) as usize;
            let src_row = &tmp[sy * w..(sy + 1) * w];
            let dst_row = &mut out[y * w..(y + 1) * w];
            for (d, s) in dst_row.iter_mut().zip(src_row) {
                *d += kv * s;
            }
        }
    }
    Raster {
        width: w,
        height: h,
        data: out,
    }
}

pub fn gaussian_blur(img: &GrayImage, sigma: f32) -> Result<GrayImage> {
    let kernel = gaussian_kernel(sigma)?;
    let mut out = convolve_separable(&img.0, &kernel);
    for v in &mut out.data {
        *v = clamp_unit(*v);
    }
    Ok(GrayImage(out))
}

/// Unnormalized 3×3 Sobel responses `(gx, gy)`; `gx` grows to the right,
/// `gy` grows downward.
pub fn sobel_gradients(img: &GrayImage) -> Result<(Raster<f32>, Raster<f32>)> {
    let (w, h) = img.dims();
    if w < 3 || h < 3 {
        return Err(Error::invalid(
            "image",
            format!("{w}x{h} is smaller than the 3x3 Sobel kernel"),
        ));
    }
    Ok(sobel_raster(&img.0))
}

pub(crate) fn sobel_raster(src: &Raster<f32>) -> (Raster<f32>, Raster<f32>) {
    let (w, h) = src.dims();
    let mut gx = vec![0.0f32; w * h];
    let mut gy = vec![0.0f32; w * h];
    for y in 0..h {
        let ym = y.saturating_sub(1);
        let yp = (y + 1).min(h - 1);
        for x in 0..w {
            let xm = x.saturating_sub(1);
            let xp = (x + 1).min(w - 1);
            let p = |xx: usize, yy: usize| src.data[yy * w + xx];
            gx[y * w + x] = (p(xp, ym) + 2.0 * p(xp, y) + p(xp, yp)) - (p(xm, ym) + 2.0 * p(xm, y) + p(xm, yp));
            gy[y * w + x] = (p(xm, yp) + 2.0 * p(x, yp) + p(xp, yp)) - (p(xm, ym) + 2.0 * p(x, ym) + p(xp, ym));
        }
    }
    (
        Raster {
            width: w,
            height: h,
            data: gx,
        },
        Raster {
            width: w,
            height: h,
            data: gy,
        },
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_color(w: usize, h: usize, seed: u64) -> ColorImage {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let px = (0..w * h)
            .map(|_| [rng.random::<f32>(), rng.random::<f32>(), rng.random::<f32>()])
            .collect();
        ColorImage::from_pixels(w, h, px).unwrap()
    }

    #[test]
    fn gray_of_white_and_red() {
        let white = ColorImage::filled(4, 3, [1.0; 3]).unwrap();
        assert!(to_gray(&white).data().iter().all(|&v| (v - 1.0).abs() < 1e-6));
        let red = ColorImage::filled(4, 3, [1.0, 0.0, 0.0]).unwrap();
        assert!(to_gray(&red).data().iter().all(|&v| (v - 0.299).abs() < 1e-7));
    }

    #[test]
    fn gray_matches_per_pixel_sum() {
        let img = random_color(8, 8, 3);
        let g = to_gray(&img);
        for y in 0..8 {
            for x in 0..8 {
                let [r, gg, b] = img.get(x, y);
                let expect = 0.299f64 * r as f64 + 0.587 * gg as f64 + 0.114 * b as f64;
                assert!((g.get(x, y) as f64 - expect).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn absdiff_identical_is_empty() {
        let img = random_color(16, 9, 1);
        assert!(color_absdiff_mask(&img, &img, 0.01).unwrap().is_empty());
    }

    #[test]
    fn absdiff_single_white_pixel() {
        let bg = ColorImage::filled(5, 5, [0.0; 3]).unwrap();
        let mut img = bg.clone();
        img.set(1, 1, [1.0; 3]);
        let m = color_absdiff_mask(&img, &bg, 1.0).unwrap();
        assert_eq!(m.iter_set().collect::<Vec<_>>(), vec![(1, 1)]);
    }

    #[test]
    fn absdiff_matches_brute_force() {
        let a = random_color(20, 10, 7);
        let b = random_color(20, 10, 8);
        let m = color_absdiff_mask(&a, &b, 0.2).unwrap();
        for y in 0..10 {
            for x in 0..20 {
                let (p, q) = (a.get(x, y), b.get(x, y));
                let d = ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2) + (p[2] - q[2]).powi(2)).sqrt();
                assert_eq!(m.get(x, y), d > 0.2, "pixel ({x},{y}) distance {d}");
            }
        }
    }

    #[test]
    fn absdiff_dimension_mismatch() {
        let a = random_color(4, 4, 1);
        let b = random_color(4, 5, 1);
        assert!(matches!(
            color_absdiff_mask(&a, &b, 0.1),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn blur_constant_is_identity() {
        let img = GrayImage::filled(17, 11, 0.37).unwrap();
        let out = gaussian_blur(&img, 2.3).unwrap();
        assert!(out.data().iter().all(|&v| (v - 0.37).abs() < 1e-6));
    }

    #[test]
    fn blur_rejects_nonpositive_sigma() {
        let img = GrayImage::new(4, 4);
        assert!(gaussian_blur(&img, 0.0).is_err());
        assert!(gaussian_blur(&img, -1.0).is_err());
    }

    #[test]
    fn blur_impulse_center_equals_kernel_product() {
        let mut img = GrayImage::new(21, 21);
        img.set(10, 10, 1.0);
        let out = gaussian_blur(&img, 1.0).unwrap();
        // direct 2-D evaluation of the normalized kernel center
        let r = 3i32;
        let norm: f64 = (-r..=r).map(|i| (-(i * i) as f64 / 2.0).exp()).sum();
        let center = 1.0 / (norm * norm);
        assert!((out.get(10, 10) as f64 - center).abs() < 1e-6);
    }

    #[test]
    fn blur_semigroup() {
        let img = {
            let mut rng = ChaCha8Rng::seed_from_u64(11);
            let data = (0..48 * 48).map(|_| rng.random::<f32>()).collect();
            GrayImage::from_vec(48, 48, data).unwrap()
        };
        let twice = gaussian_blur(&gaussian_blur(&img, 1.5).unwrap(), 1.5).unwrap();
        let once = gaussian_blur(&img, 1.5 * 2f32.sqrt()).unwrap();
        // clamped borders do not compose; compare beyond the wider kernel
        let r = gaussian_kernel(1.5 * 2f32.sqrt()).unwrap().len() / 2;
        let mut max = 0.0f32;
        for y in r..48 - r {
            for x in r..48 - r {
                max = max.max((twice.get(x, y) - once.get(x, y)).abs());
            }
        }
        assert!(max < 0.01, "max diff {max}");
    }

    #[test]
    fn blur_preserves_interior_mean() {
        let mut img = GrayImage::filled(64, 64, 0.5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for y in 20..44 {
            for x in 20..44 {
                img.set(x, y, rng.random::<f32>());
            }
        }
        let out = gaussian_blur(&img, 1.2).unwrap();
        assert!((out.mean() - img.mean()).abs() < 1e-4);
    }

    #[test]
    fn sobel_constant_and_step() {
        let img = GrayImage::filled(8, 8, 0.4).unwrap();
        let (gx, gy) = sobel_gradients(&img).unwrap();
        assert!(gx.data().iter().chain(gy.data()).all(|&v| v.abs() < 1e-6));

        let mut step = GrayImage::new(10, 8);
        for y in 0..8 {
            for x in 5..10 {
                step.set(x, y, 1.0);
            }
        }
        let (gx, gy) = sobel_gradients(&step).unwrap();
        for y in 0..8 {
            assert!(gx.get(4, y) > 0.0 && gx.get(5, y) > 0.0);
        }
        for y in 1..7 {
            for x in 0..10 {
                assert_eq!(gy.get(x, y), 0.0);
            }
        }
    }

    #[test]
    fn sobel_ramp_closed_form() {
        let w = 12;
        let data = (0..w * 6).map(|i| (i % w) as f32 / (w - 1) as f32).collect();
        let img = GrayImage::from_vec(w, 6, data).unwrap();
        let (gx, _) = sobel_gradients(&img).unwrap();
        let expect = 8.0 / (w - 1) as f32;
        for y in 0..6 {
            for x in 1..w - 1 {
                assert!((gx.get(x, y) - expect).abs() < 1e-5);
            }
        }
    }

    #[test]
    fn sobel_rejects_tiny() {
        assert!(sobel_gradients(&GrayImage::new(2, 5)).is_err());
    }

    #[test]
    fn dilate_and_iou() {
        let mut m = BinaryMask::new(5, 5);
        m.set(2, 2, true);
        let d = m.dilate(1);
        assert_eq!(d.count(), 9);
        assert!((m.iou(&d).unwrap() - 1.0 / 9.0).abs() < 1e-12);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn absdiff_monotone_in_tau(seed in 0u64..1000, t1 in 0.0f32..1.7, dt in 0.0f32..0.5) {
                let a = random_color(12, 7, seed);
                let b = random_color(12, 7, seed + 1);
                let t2 = (t1 + dt).min(3f32.sqrt());
                let m1 = color_absdiff_mask(&a, &b, t1).unwrap();
                let m2 = color_absdiff_mask(&a, &b, t2).unwrap();
                prop_assert!(m2.is_subset_of(&m1));
            }

            #[test]
            fn ops_preserve_dims(w in 3usize..20, h in 3usize..20, sigma in 0.3f32..3.0) {
                let img = random_color(w, h, (w * h) as u64);
                let g = to_gray(&img);
                prop_assert_eq!(g.dims(), (w, h));
                prop_assert_eq!(gaussian_blur(&g, sigma).unwrap().dims(), (w, h));
                let (gx, gy) = sobel_gradients(&g).unwrap();
                prop_assert_eq!(gx.dims(), (w, h));
                prop_assert_eq!(gy.dims(), (w, h));
            }
        }
    }
}
