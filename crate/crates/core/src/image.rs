//! Raster images, color conversion, cropping and rotation.
//!
//! Every pipeline stage consumes a [`RasterImage`]. Input is always 8-bit RGB;
//! derived spaces (CIE L*a*b*, gray) carry 64-bit floats.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Grid;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ColorSpace {
    Rgb8,
    Lab,
    Gray,
}

impl ColorSpace {
    pub fn channels(self) -> usize {
        match self {
            ColorSpace::Rgb8 | ColorSpace::Lab => 3,
            ColorSpace::Gray => 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Pixels {
    Rgb8(Vec<u8>),
    Lab(Vec<f64>),
    Gray(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RasterImage {
    height: usize,
    width: usize,
    pixels: Pixels,
}

/// Sub-window of a parent image, in pixels, top-left anchored.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowSpec {
    pub x0: usize,
    pub y0: usize,
    pub width: usize,
    pub height: usize,
}

impl WindowSpec {
    pub fn new(x0: usize, y0: usize, width: usize, height: usize) -> Self {
        Self {
            x0,
            y0,
            width,
            height,
        }
    }

    pub fn full(width: usize, height: usize) -> Self {
        Self::new(0, 0, width, height)
    }

    pub fn fits(&self, image_width: usize, image_height: usize) -> bool {
        self.width > 0
            && self.height > 0
            && self.x0 + self.width <= image_width
            && self.y0 + self.height <= image_height
    }
}

fn check_dims(height: usize, width: usize, len: usize, channels: usize) -> Result<()> {
    if height == 0 || width == 0 {
        return Err(Error::InvalidRaster(format!(
            "dimensions must be positive, got {height}x{width}"
        )));
    }
    if len != height * width * channels {
        return Err(Error::InvalidRaster(format!(
            "{len} samples for {height}x{width}x{channels}"
        )));
    }
    Ok(())
}

impl RasterImage {
    pub fn from_rgb8(height: usize, width: usize, data: Vec<u8>) -> Result<Self> {
        check_dims(height, width, data.len(), 3)?;
        Ok(Self {
            height,
            width,
            pixels: Pixels::Rgb8(data),
        })
    }

    pub fn from_lab(height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        check_dims(height, width, data.len(), 3)?;
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidRaster("non-finite Lab sample".into()));
        }
        Ok(Self {
            height,
            width,
            pixels: Pixels::Lab(data),
        })
    }

    /// Gray samples must lie in [0, 255].
    pub fn from_gray(height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        check_dims(height, width, data.len(), 1)?;
        if let Some(v) = data.iter().find(|v| !(0.0..=255.0).contains(*v)) {
            return Err(Error::InvalidRaster(format!(
                "gray value {v} outside [0, 255]"
            )));
        }
        Ok(Self {
            height,
            width,
            pixels: Pixels::Gray(data),
        })
    }

    pub fn from_gray_grid(grid: &Grid<f64>) -> Result<Self> {
        Self::from_gray(grid.height(), grid.width(), grid.as_slice().to_vec())
    }

    /// Uniform RGB image.
    pub fn filled_rgb(height: usize, width: usize, rgb: [u8; 3]) -> Result<Self> {
        let data = rgb
            .iter()
            .copied()
            .cycle()
            .take(height * width * 3)
            .collect();
        Self::from_rgb8(height, width, data)
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn space(&self) -> ColorSpace {
        match self.pixels {
            Pixels::Rgb8(_) => ColorSpace::Rgb8,
            Pixels::Lab(_) => ColorSpace::Lab,
            Pixels::Gray(_) => ColorSpace::Gray,
        }
    }

    fn expect(&self, expected: ColorSpace) -> Result<()> {
        let found = self.space();
        if found != expected {
            return Err(Error::InvalidColorSpace { expected, found });
        }
        Ok(())
    }

    pub fn rgb8_data(&self) -> Result<&[u8]> {
        match &self.pixels {
            Pixels::Rgb8(d) => Ok(d),
            _ => Err(Error::InvalidColorSpace {
                expected: ColorSpace::Rgb8,
                found: self.space(),
            }),
        }
    }

    /// Float samples of a Lab or Gray image.
    pub fn float_data(&self) -> Result<&[f64]> {
        match &self.pixels {
            Pixels::Lab(d) | Pixels::Gray(d) => Ok(d),
            Pixels::Rgb8(_) => Err(Error::InvalidColorSpace {
                expected: ColorSpace::Lab,
                found: ColorSpace::Rgb8,
            }),
        }
    }

    pub fn rgb(&self, row: usize, col: usize) -> Result<[u8; 3]> {
        let d = self.rgb8_data()?;
        let k = (row * self.width + col) * 3;
        Ok([d[k], d[k + 1], d[k + 2]])
    }

    /// One channel as a float grid. RGB8 channels are widened to f64.
    pub fn channel(&self, index: usize) -> Result<Grid<f64>> {
        let n = self.space().channels();
        if index >= n {
            return Err(Error::InvalidRaster(format!(
                "channel {index} out of range for {:?}",
                self.space()
            )));
        }
        let values: Vec<f64> = match &self.pixels {
            Pixels::Rgb8(d) => d.iter().skip(index).step_by(3).map(|&v| v as f64).collect(),
            Pixels::Lab(d) => d.iter().skip(index).step_by(3).copied().collect(),
            Pixels::Gray(d) => d.clone(),
        };
        Grid::from_vec(self.height, self.width, values)
    }

    /// Gray image as a grid.
    pub fn gray_grid(&self) -> Result<Grid<f64>> {
        self.expect(ColorSpace::Gray)?;
        self.channel(0)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let img = ::image::open(path)?.to_rgb8();
        let (w, h) = img.dimensions();
        Self::from_rgb8(h as usize, w as usize, img.into_raw())
    }

    /// Writes RGB8 images directly and Gray images rounded to 8 bits.
    pub fn save_png(&self, path: impl AsRef<Path>) -> Result<()> {
        let (w, h) = (self.width as u32, self.height as u32);
        match &self.pixels {
            Pixels::Rgb8(d) => {
                ::image::RgbImage::from_raw(w, h, d.clone())
                    .expect("buffer length checked at construction")
                    .save_with_format(path, ::image::ImageFormat::Png)?;
            }
            Pixels::Gray(d) => {
                let bytes = d
                    .iter()
                    .map(|v| v.round().clamp(0.0, 255.0) as u8)
                    .collect();
                ::image::GrayImage::from_raw(w, h, bytes)
                    .expect("buffer length checked at construction")
                    .save_with_format(path, ::image::ImageFormat::Png)?;
            }
            Pixels::Lab(_) => {
                return Err(Error::InvalidColorSpace {
                    expected: ColorSpace::Rgb8,
                    found: ColorSpace::Lab,
                })
            }
        }
        Ok(())
    }
}

/// Writes a binary grid as an 8-bit PNG: set cells white (255), others black (0).
pub fn save_binary_png(grid: &Grid<bool>, path: impl AsRef<Path>) -> Result<()> {
    let bytes = grid
        .as_slice()
        .iter()
        .map(|&b| if b { 255 } else { 0 })
        .collect();
    ::image::GrayImage::from_raw(grid.width() as u32, grid.height() as u32, bytes)
        .expect("grid length is height * width")
        .save_with_format(path, ::image::ImageFormat::Png)?;
    Ok(())
}

// sRGB primaries, D65 reference white.
const WHITE_X: f64 = 0.950_47;
const WHITE_Y: f64 = 1.0;
const WHITE_Z: f64 = 1.088_83;

fn srgb_to_linear(v: u8) -> f64 {
    let c = v as f64 / 255.0;
    if c <= 0.040_45 {
        c / 12.92
    } else {
        ((c + 0.055) / 1.055).powf(2.4)
    }
}

fn lab_f(t: f64) -> f64 {
    const DELTA: f64 = 6.0 / 29.0;
    if t > DELTA * DELTA * DELTA {
        t.cbrt()
    } else {
        t / (3.0 * DELTA * DELTA) + 4.0 / 29.0
    }
}

/// CIE L*a*b* of one sRGB pixel.
pub fn srgb_pixel_to_lab(rgb: [u8; 3]) -> [f64; 3] {
    let r = srgb_to_linear(rgb[0]);
    let g = srgb_to_linear(rgb[1]);
    let b = srgb_to_linear(rgb[2]);
    let x = 0.412_456_4 * r + 0.357_576_1 * g + 0.180_437_5 * b;
    let y = 0.212_672_9 * r + 0.715_152_2 * g + 0.072_175_0 * b;
    let z = 0.019_333_9 * r + 0.119_192_0 * g + 0.950_304_1 * b;
    let fx = lab_f(x / WHITE_X);
    let fy = lab_f(y / WHITE_Y);
    let fz = lab_f(z / WHITE_Z);
    let l = (116.0 * fy - 16.0).clamp(0.0, 100.0);
    [l, 500.0 * (fx - fy), 200.0 * (fy - fz)]
}

pub fn rgb_to_lab(img: &RasterImage) -> Result<RasterImage> {
    let data = img.rgb8_data()?;
    let lab = data
        .chunks_exact(3)
        .flat_map(|p| srgb_pixel_to_lab([p[0], p[1], p[2]]))
        .collect();
    RasterImage::from_lab(img.height, img.width, lab)
}

/// Unweighted channel mean (R + G + B) / 3.
pub fn to_gray(img: &RasterImage) -> Result<RasterImage> {
    let data = img.rgb8_data()?;
    let gray = data
        .chunks_exact(3)
        .map(|p| (p[0] as f64 + p[1] as f64 + p[2] as f64) / 3.0)
        .collect();
    RasterImage::from_gray(img.height, img.width, gray)
}

pub fn crop(img: &RasterImage, w: &WindowSpec) -> Result<RasterImage> {
    if !w.fits(img.width, img.height) {
        return Err(Error::WindowOutOfBounds {
            x0: w.x0,
            y0: w.y0,
            width: w.width,
            height: w.height,
            image_width: img.width,
            image_height: img.height,
        });
    }
    let n = img.space().channels();
    fn rows<T: Copy>(src: &[T], img_w: usize, n: usize, w: &WindowSpec) -> Vec<T> {
        let mut out = Vec::with_capacity(w.width * w.height * n);
        for r in w.y0..w.y0 + w.height {
            let start = (r * img_w + w.x0) * n;
            out.extend_from_slice(&src[start..start + w.width * n]);
        }
        out
    }
    let pixels = match &img.pixels {
        Pixels::Rgb8(d) => Pixels::Rgb8(rows(d, img.width, n, w)),
        Pixels::Lab(d) => Pixels::Lab(rows(d, img.width, n, w)),
        Pixels::Gray(d) => Pixels::Gray(rows(d, img.width, n, w)),
    };
    Ok(RasterImage {
        height: w.height,
        width: w.width,
        pixels,
    })
}

pub const MAX_ROTATION_DEGREES: f64 = 45.0;

/// Rotates about the image center; positive angles turn the content
/// counter-clockwise as displayed. Bilinear sampling, edge replication for
/// source positions outside the frame. RGB8 output is rounded to nearest.
pub fn rotate(img: &RasterImage, degrees: f64) -> Result<RasterImage> {
    if !degrees.is_finite() || degrees.abs() > MAX_ROTATION_DEGREES {
        return Err(Error::RotationOutOfRange(degrees));
    }
    if degrees == 0.0 {
        return Ok(img.clone());
    }
    let (h, w) = (img.height, img.width);
    let n = img.space().channels();
    let (s, c) = degrees.to_radians().sin_cos();
    let cx = (w as f64 - 1.0) / 2.0;
    let cy = (h as f64 - 1.0) / 2.0;

    let sample = |src: &dyn Fn(usize) -> f64, out: &mut Vec<f64>| {
        for row in 0..h {
            for col in 0..w {
                // y-up frame around the center
                let dx = col as f64 - cx;
                let dy = cy - row as f64;
                let sx = c * dx + s * dy;
                let sy = -s * dx + c * dy;
                let fx = (cx + sx).clamp(0.0, (w - 1) as f64);
                let fy = (cy - sy).clamp(0.0, (h - 1) as f64);
                let x0 = fx.floor() as usize;
                let y0 = fy.floor() as usize;
                let x1 = (x0 + 1).min(w - 1);
                let y1 = (y0 + 1).min(h - 1);
                let tx = fx - x0 as f64;
                let ty = fy - y0 as f64;
                for k in 0..n {
                    let p = |r: usize, q: usize| src((r * w + q) * n + k);
                    let top = p(y0, x0) * (1.0 - tx) + p(y0, x1) * tx;
                    let bottom = p(y1, x0) * (1.0 - tx) + p(y1, x1) * tx;
                    out.push(top * (1.0 - ty) + bottom * ty);
                }
            }
        }
    };

    let mut out = Vec::with_capacity(h * w * n);
    let pixels = match &img.pixels {
        Pixels::Rgb8(d) => {
            sample(&|i| d[i] as f64, &mut out);
            Pixels::Rgb8(
                out.iter()
                    .map(|v| v.round().clamp(0.0, 255.0) as u8)
                    .collect(),
            )
        }
        Pixels::Lab(d) => {
            sample(&|i| d[i], &mut out);
            Pixels::Lab(out)
        }
        Pixels::Gray(d) => {
            sample(&|i| d[i], &mut out);
            Pixels::Gray(out)
        }
    };
    Ok(RasterImage {
        height: h,
        width: w,
        pixels,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn lab_of(rgb: [u8; 3]) -> [f64; 3] {
        let img = RasterImage::from_rgb8(1, 1, rgb.to_vec()).unwrap();
        let lab = rgb_to_lab(&img).unwrap();
        let d = lab.float_data().unwrap();
        [d[0], d[1], d[2]]
    }

    #[test]
    fn lab_black_white_red() {
        let k = lab_of([0, 0, 0]);
        assert!(k[0].abs() < 1e-9 && k[1].abs() < 1e-6 && k[2].abs() < 1e-6);
        let w = lab_of([255, 255, 255]);
        assert!((w[0] - 100.0).abs() < 1e-3, "{w:?}");
        assert!(w[1].abs() < 0.01 && w[2].abs() < 0.01, "{w:?}");
        // skimage.color.rgb2lab (D65, 2 deg observer)
        let r = lab_of([255, 0, 0]);
        for (got, want) in r.iter().zip([53.2406, 80.0923, 67.2028]) {
            assert!((got - want).abs() < 0.05, "{r:?}");
        }
    }

    #[test]
    fn lab_reference_colors() {
        // skimage.color.rgb2lab reference values
        let cases = [
            ([0, 255, 0], [87.7351, -86.1830, 83.1797]),
            ([0, 0, 255], [32.2957, 79.1856, -107.8573]),
            ([200, 170, 100], [70.8371, 1.9378, 39.9178]),
            ([128, 128, 128], [53.5850, 0.0, 0.0]),
        ];
        for (rgb, want) in cases {
            let got = lab_of(rgb);
            for k in 0..3 {
                assert!(
                    (got[k] - want[k]).abs() < 0.05,
                    "{rgb:?}: {got:?} vs {want:?}"
                );
            }
        }
    }

    #[test]
    fn lab_rejects_gray_input() {
        let g = RasterImage::from_gray(1, 1, vec![3.0]).unwrap();
        assert!(matches!(
            rgb_to_lab(&g),
            Err(Error::InvalidColorSpace { .. })
        ));
        assert!(matches!(to_gray(&g), Err(Error::InvalidColorSpace { .. })));
    }

    #[test]
    fn gray_is_plain_mean() {
        let img = RasterImage::from_rgb8(1, 3, vec![30, 60, 90, 255, 255, 255, 1, 2, 4]).unwrap();
        let g = to_gray(&img).unwrap();
        let d = g.float_data().unwrap();
        assert_eq!(d[0], 60.0);
        assert_eq!(d[1], 255.0);
        assert!((d[2] - 7.0 / 3.0).abs() < 1e-12);
    }

    fn ramp(h: usize, w: usize) -> RasterImage {
        let data = (0..h * w * 3).map(|i| (i % 251) as u8).collect();
        RasterImage::from_rgb8(h, w, data).unwrap()
    }

    #[test]
    fn crop_cases() {
        let img = ramp(10, 10);
        assert_eq!(crop(&img, &WindowSpec::full(10, 10)).unwrap(), img);
        let sub = crop(&img, &WindowSpec::new(2, 3, 4, 5)).unwrap();
        assert_eq!((sub.height(), sub.width()), (5, 4));
        assert_eq!(sub.rgb(0, 0).unwrap(), img.rgb(3, 2).unwrap());
        assert_eq!(sub.rgb(4, 3).unwrap(), img.rgb(7, 5).unwrap());
        assert!(matches!(
            crop(&img, &WindowSpec::new(8, 8, 5, 5)),
            Err(Error::WindowOutOfBounds { .. })
        ));
    }

    #[test]
    fn rotate_identity_and_constant() {
        let img = ramp(9, 12);
        assert_eq!(rotate(&img, 0.0).unwrap(), img);
        let flat = RasterImage::filled_rgb(20, 30, [90, 120, 40]).unwrap();
        assert_eq!(rotate(&flat, 5.0).unwrap(), flat);
        assert!(matches!(
            rotate(&img, 90.0),
            Err(Error::RotationOutOfRange(_))
        ));
        assert!(matches!(
            rotate(&img, -45.5),
            Err(Error::RotationOutOfRange(_))
        ));
    }

    #[test]
    fn rotated_delta_follows_arc() {
        let (h, w) = (41, 41);
        let (cy, cx) = (20.0, 20.0);
        let mut data = vec![0.0; h * w];
        data[20 * w + 32] = 255.0;
        let img = RasterImage::from_gray(h, w, data).unwrap();
        let out = rotate(&img, 10.0).unwrap();
        let d = out.float_data().unwrap();
        let (argmax, _) = d
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .unwrap();
        let (pr, pc) = ((argmax / w) as f64, (argmax % w) as f64);
        // counter-clockwise on screen: the point moves up (smaller row)
        let t = 10f64.to_radians();
        let er = cy - 12.0 * t.sin();
        let ec = cx + 12.0 * t.cos();
        assert!(
            (pr - er).abs() <= 1.0 && (pc - ec).abs() <= 1.0,
            "({pr},{pc}) vs ({er},{ec})"
        );
    }

    #[test]
    fn rotation_round_trip_is_close_on_smooth_image() {
        let (h, w) = (64, 64);
        let data = (0..h * w)
            .map(|i| {
                let (r, c) = ((i / w) as f64, (i % w) as f64);
                128.0 + 60.0 * (0.21 * c + 0.1 * r).sin() + 40.0 * (0.13 * r - 0.07 * c).cos()
            })
            .collect();
        let img = RasterImage::from_gray(h, w, data).unwrap();
        let back = rotate(&rotate(&img, 7.0).unwrap(), -7.0).unwrap();
        let (a, b) = (img.float_data().unwrap(), back.float_data().unwrap());
        let mut sum = 0.0;
        let mut n = 0.0;
        for r in 0..h {
            for c in 0..w {
                let (dr, dc) = (r as f64 - 31.5, c as f64 - 31.5);
                if dr * dr + dc * dc < 26.0 * 26.0 {
                    sum += (a[r * w + c] - b[r * w + c]).abs();
                    n += 1.0;
                }
            }
        }
        assert!(sum / n < 2.0, "mean abs diff {}", sum / n);
    }

    proptest! {
        #[test]
        fn lab_bounds_hold(r: u8, g: u8, b: u8) {
            let [l, a, bb] = srgb_pixel_to_lab([r, g, b]);
            prop_assert!((0.0..=100.0).contains(&l));
            prop_assert!((-128.0..=127.0).contains(&a));
            prop_assert!((-128.0..=127.0).contains(&bb));
        }

        #[test]
        fn gray_is_permutation_invariant(r: u8, g: u8, b: u8) {
            let one = to_gray(&RasterImage::from_rgb8(1, 1, vec![r, g, b]).unwrap()).unwrap();
            let two = to_gray(&RasterImage::from_rgb8(1, 1, vec![b, r, g]).unwrap()).unwrap();
            let three = to_gray(&RasterImage::from_rgb8(1, 1, vec![g, b, r]).unwrap()).unwrap();
            prop_assert_eq!(one.float_data().unwrap(), two.float_data().unwrap());
            prop_assert_eq!(one.float_data().unwrap(), three.float_data().unwrap());
        }
    }
}
