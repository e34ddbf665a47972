//! Filter construction and same-size 2-D filtering.
//!
//! Two banks live here: the 17-kernel color/texture bank used for pixel
//! features, and the complex Gabor bank used for orientation voting.
//!
//! Filtering is correlation (the kernel is not flipped): the response at
//! `(r, c)` is `sum k(v, u) * I(r + v - h, c + u - h)` with `h = size / 2`.
//! Samples outside the image are replaced by the nearest edge sample.

use std::f64::consts::PI;
use std::io::Write;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Grid;

pub const FEATURE_KERNEL_SIZE: usize = 7;
pub const GABOR_KERNEL_SIZE: usize = 11;

#[derive(Debug, Clone, PartialEq)]
pub enum Taps {
    Real(Vec<f64>),
    Complex(Vec<Complex64>),
}

/// Square, odd-sized filter kernel. `taps` are row-major (row = y offset).
#[derive(Debug, Clone, PartialEq)]
pub struct Kernel2D {
    size: usize,
    taps: Taps,
    label: String,
    /// Optional separable factors `(along_x, along_y)` whose outer product is
    /// the real taps.
    separable: Option<(Vec<f64>, Vec<f64>)>,
}

impl Kernel2D {
    pub fn real(size: usize, taps: Vec<f64>, label: impl Into<String>) -> Result<Self> {
        check_size(size, taps.len())?;
        Ok(Self {
            size,
            taps: Taps::Real(taps),
            label: label.into(),
            separable: None,
        })
    }

    pub fn complex(size: usize, taps: Vec<Complex64>, label: impl Into<String>) -> Result<Self> {
        check_size(size, taps.len())?;
        Ok(Self {
            size,
            taps: Taps::Complex(taps),
            label: label.into(),
            separable: None,
        })
    }

    /// Kernel equal to the outer product `along_y ⊗ along_x`.
    pub fn separable(
        along_x: Vec<f64>,
        along_y: Vec<f64>,
        label: impl Into<String>,
    ) -> Result<Self> {
        let size = along_x.len();
        if along_y.len() != size {
            return Err(Error::ShapeMismatch(
                "separable factors differ in length".into(),
            ));
        }
        let mut taps = Vec::with_capacity(size * size);
        for &ky in &along_y {
            for &kx in &along_x {
                taps.push(ky * kx);
            }
        }
        check_size(size, taps.len())?;
        Ok(Self {
            size,
            taps: Taps::Real(taps),
            label: label.into(),
            separable: Some((along_x, along_y)),
        })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn taps(&self) -> &Taps {
        &self.taps
    }

    pub fn real_taps(&self) -> Option<&[f64]> {
        match &self.taps {
            Taps::Real(t) => Some(t),
            Taps::Complex(_) => None,
        }
    }

    pub fn complex_taps(&self) -> Option<&[Complex64]> {
        match &self.taps {
            Taps::Complex(t) => Some(t),
            Taps::Real(_) => None,
        }
    }

    pub fn is_separable(&self) -> bool {
        self.separable.is_some()
    }

    pub fn is_complex(&self) -> bool {
        matches!(self.taps, Taps::Complex(_))
    }

    /// Same kernel without the separable factorization (forces direct filtering).
    pub fn without_separable(&self) -> Self {
        Self {
            separable: None,
            ..self.clone()
        }
    }

    pub fn sum(&self) -> Complex64 {
        match &self.taps {
            Taps::Real(t) => Complex64::new(t.iter().sum(), 0.0),
            Taps::Complex(t) => t.iter().sum(),
        }
    }

    /// Row-major taps as CSV with 17 significant digits. Complex kernels emit
    /// `re,im` pairs per tap.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for r in 0..self.size {
            let row: Vec<String> = (0..self.size)
                .map(|c| match &self.taps {
                    Taps::Real(t) => format!("{:.16e}", t[r * self.size + c]),
                    Taps::Complex(t) => {
                        let z = t[r * self.size + c];
                        format!("{:.16e},{:.16e}", z.re, z.im)
                    }
                })
                .collect();
            writeln!(out, "{}", row.join(","))?;
        }
        Ok(())
    }
}

fn check_size(size: usize, len: usize) -> Result<()> {
    if size == 0 || size % 2 == 0 {
        return Err(Error::ShapeMismatch(format!(
            "kernel size {size} must be odd"
        )));
    }
    if len != size * size {
        return Err(Error::ShapeMismatch(format!(
            "{len} taps for a {size}x{size} kernel"
        )));
    }
    Ok(())
}

fn gaussian_1d(sigma: f64, size: usize) -> Vec<f64> {
    let h = (size / 2) as f64;
    let raw: Vec<f64> = (0..size)
        .map(|i| {
            let x = i as f64 - h;
            (-x * x / (2.0 * sigma * sigma)).exp()
        })
        .collect();
    let s: f64 = raw.iter().sum();
    raw.into_iter().map(|v| v / s).collect()
}

/// Sampled Gaussian, normalized to unit sum.
pub fn gaussian(sigma: f64, size: usize) -> Result<Kernel2D> {
    let g = gaussian_1d(sigma, size);
    Kernel2D::separable(g.clone(), g, format!("Gaussian sigma={sigma}"))
}

/// Laplacian of Gaussian `(x² + y² - 2σ²)/σ⁴ · G`, mean-subtracted so the
/// truncated kernel stays zero-sum.
pub fn laplacian_of_gaussian(sigma: f64, size: usize) -> Result<Kernel2D> {
    let g = gaussian_1d(sigma, size);
    let h = (size / 2) as f64;
    let s2 = sigma * sigma;
    let mut taps = Vec::with_capacity(size * size);
    for (r, gy) in g.iter().enumerate() {
        for (c, gx) in g.iter().enumerate() {
            let (x, y) = (c as f64 - h, r as f64 - h);
            taps.push((x * x + y * y - 2.0 * s2) / (s2 * s2) * gx * gy);
        }
    }
    let mean = taps.iter().sum::<f64>() / taps.len() as f64;
    taps.iter_mut().for_each(|t| *t -= mean);
    Kernel2D::real(size, taps, format!("LoG sigma={sigma}"))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    X,
    Y,
}

/// First derivative of a Gaussian along `axis`, `-t/σ² · G`.
pub fn derivative_of_gaussian(sigma: f64, size: usize, axis: Axis) -> Result<Kernel2D> {
    let g = gaussian_1d(sigma, size);
    let h = (size / 2) as f64;
    let d: Vec<f64> = g
        .iter()
        .enumerate()
        .map(|(i, v)| -(i as f64 - h) / (sigma * sigma) * v)
        .collect();
    match axis {
        Axis::X => Kernel2D::separable(d, g, format!("DoG sigma={sigma} x")),
        Axis::Y => Kernel2D::separable(g, d, format!("DoG sigma={sigma} y")),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LabChannel {
    L,
    A,
    B,
}

/// The 17 (kernel, channel) pairs in feature order: Gaussians σ ∈ {1,2,4} on
/// L, a and b; LoG σ ∈ {1,2,4,8} on L; x-derivatives σ ∈ {2,4} then
/// y-derivatives σ ∈ {2,4} on L. All 7×7.
pub fn make_filter_bank_17d() -> Vec<(Kernel2D, LabChannel)> {
    let n = FEATURE_KERNEL_SIZE;
    let mut bank = Vec::with_capacity(17);
    for ch in [LabChannel::L, LabChannel::A, LabChannel::B] {
        for s in [1.0, 2.0, 4.0] {
            bank.push((gaussian(s, n).expect("odd size"), ch));
        }
    }
    for s in [1.0, 2.0, 4.0, 8.0] {
        bank.push((
            laplacian_of_gaussian(s, n).expect("odd size"),
            LabChannel::L,
        ));
    }
    for axis in [Axis::X, Axis::Y] {
        for s in [2.0, 4.0] {
            bank.push((
                derivative_of_gaussian(s, n, axis).expect("odd size"),
                LabChannel::L,
            ));
        }
    }
    bank
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaborParams {
    /// Orientation angles in degrees. 90° responds to vertical stripes.
    pub orientations: Vec<f64>,
    /// Spatial frequencies in cycles per pixel.
    pub scales: Vec<f64>,
    pub kernel_size: usize,
    /// Envelope width `σ = sigma_factor / frequency`.
    pub sigma_factor: f64,
    /// Spatial aspect ratio of the envelope.
    pub gamma: f64,
}

pub const GABOR_F_MAX: f64 = 0.25;

impl Default for GaborParams {
    fn default() -> Self {
        Self {
            orientations: vec![0.0, 45.0, 90.0, 135.0],
            scales: (0..5).map(|m| GABOR_F_MAX / 2f64.sqrt().powi(m)).collect(),
            kernel_size: GABOR_KERNEL_SIZE,
            sigma_factor: 0.56,
            gamma: 0.5,
        }
    }
}

impl GaborParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidGaborParams(m));
        if self.orientations.len() < 2 {
            return bad(format!(
                "need >= 2 orientations, got {}",
                self.orientations.len()
            ));
        }
        if self.scales.is_empty() {
            return bad("need >= 1 scale".into());
        }
        if self.kernel_size == 0 || self.kernel_size % 2 == 0 {
            return bad(format!("kernel size {} must be odd", self.kernel_size));
        }
        if self.orientations.iter().any(|t| !t.is_finite()) {
            return bad("non-finite orientation".into());
        }
        if self
            .scales
            .iter()
            .any(|f| !(f.is_finite() && *f > 0.0 && *f <= 0.5))
        {
            return bad("scales must be frequencies in (0, 0.5]".into());
        }
        if !(self.sigma_factor.is_finite() && self.sigma_factor > 0.0) {
            return bad("sigma_factor must be positive".into());
        }
        if !(self.gamma.is_finite() && self.gamma > 0.0) {
            return bad("gamma must be positive".into());
        }
        Ok(())
    }

    pub fn n_orientations(&self) -> usize {
        self.orientations.len()
    }

    pub fn n_scales(&self) -> usize {
        self.scales.len()
    }

    /// Index of the orientation closest to `degrees` modulo 180°.
    pub fn nearest_orientation(&self, degrees: f64) -> usize {
        let dist = |t: f64| {
            let d = (t - degrees).rem_euclid(180.0);
            d.min(180.0 - d)
        };
        (0..self.orientations.len())
            .min_by(|&a, &b| dist(self.orientations[a]).total_cmp(&dist(self.orientations[b])))
            .expect("validated: at least two orientations")
    }
}

/// One complex Gabor kernel. The carrier runs along `(sin θ, cos θ)` in
/// (column, row) coordinates, so θ = 90° varies along x and matches vertical
/// stripes. The real part is made zero-mean; both parts are scaled by the
/// envelope sum.
pub fn gabor_kernel(theta_deg: f64, frequency: f64, p: &GaborParams) -> Result<Kernel2D> {
    let size = p.kernel_size;
    let h = (size / 2) as f64;
    let sigma = p.sigma_factor / frequency;
    let (st, ct) = theta_deg.to_radians().sin_cos();
    let mut env_sum = 0.0;
    let mut taps = Vec::with_capacity(size * size);
    for r in 0..size {
        for c in 0..size {
            let (x, y) = (c as f64 - h, r as f64 - h);
            let along = x * st + y * ct;
            let across = x * ct - y * st;
            let env = (-(along * along + p.gamma * p.gamma * across * across)
                / (2.0 * sigma * sigma))
                .exp();
            env_sum += env;
            let phase = 2.0 * PI * frequency * along;
            taps.push(Complex64::new(env * phase.cos(), env * phase.sin()));
        }
    }
    let mean_re = taps.iter().map(|z| z.re).sum::<f64>() / taps.len() as f64;
    for z in &mut taps {
        *z = Complex64::new((z.re - mean_re) / env_sum, z.im / env_sum);
    }
    Kernel2D::complex(
        size,
        taps,
        format!("Gabor theta={theta_deg} f={frequency:.4}"),
    )
}

/// Orientation-major bank: index `o * n_scales + s`.
pub fn make_gabor_bank(p: &GaborParams) -> Result<Vec<Kernel2D>> {
    p.validate()?;
    let mut bank = Vec::with_capacity(p.n_orientations() * p.n_scales());
    for &theta in &p.orientations {
        for &f in &p.scales {
            bank.push(gabor_kernel(theta, f, p)?);
        }
    }
    Ok(bank)
}

/// Image padded by edge replication, `pad` samples on every side.
pub(crate) struct Padded {
    pub data: Vec<f64>,
    pub stride: usize,
    pub pad: usize,
}

impl Padded {
    pub fn new(img: &Grid<f64>, pad: usize) -> Self {
        let (h, w) = img.dims();
        let stride = w + 2 * pad;
        let mut data = Vec::with_capacity(stride * (h + 2 * pad));
        for pr in 0..h + 2 * pad {
            let r = pr.saturating_sub(pad).min(h - 1);
            let row = img.row(r);
            data.extend(std::iter::repeat_n(row[0], pad));
            data.extend_from_slice(row);
            data.extend(std::iter::repeat_n(row[w - 1], pad));
        }
        Self { data, stride, pad }
    }
}

fn check_fits(img: &Grid<f64>, size: usize) -> Result<()> {
    let (h, w) = img.dims();
    if h < size || w < size {
        return Err(Error::ImageTooSmall {
            height: h,
            width: w,
            min_size: size,
        });
    }
    Ok(())
}

fn correlate_padded(p: &Padded, h: usize, w: usize, size: usize, taps: &[f64]) -> Vec<f64> {
    let off = p.pad - size / 2;
    let mut out = vec![0.0; h * w];
    for r in 0..h {
        let o = &mut out[r * w..(r + 1) * w];
        for v in 0..size {
            let src = &p.data[(r + off + v) * p.stride + off..];
            let krow = &taps[v * size..(v + 1) * size];
            for (u, &k) in krow.iter().enumerate() {
                if k == 0.0 {
                    continue;
                }
                let s = &src[u..u + w];
                for (acc, &x) in o.iter_mut().zip(s) {
                    *acc += k * x;
                }
            }
        }
    }
    out
}

fn correlate_separable(img: &Grid<f64>, along_x: &[f64], along_y: &[f64]) -> Vec<f64> {
    let (h, w) = img.dims();
    let size = along_x.len();
    let half = size / 2;
    // horizontal pass on the vertically padded image
    let p = Padded::new(img, half);
    let mut tmp = vec![0.0; (h + 2 * half) * w];
    for pr in 0..h + 2 * half {
        let src = &p.data[pr * p.stride..];
        let dst = &mut tmp[pr * w..(pr + 1) * w];
        for (u, &k) in along_x.iter().enumerate() {
            for (acc, &x) in dst.iter_mut().zip(&src[u..u + w]) {
                *acc += k * x;
            }
        }
    }
    let mut out = vec![0.0; h * w];
    for r in 0..h {
        let dst = &mut out[r * w..(r + 1) * w];
        for (v, &k) in along_y.iter().enumerate() {
            let src = &tmp[(r + v) * w..(r + v + 1) * w];
            for (acc, &x) in dst.iter_mut().zip(src) {
                *acc += k * x;
            }
        }
    }
    out
}

/// Same-size filtering of a real kernel over a single-channel image.
pub fn convolve(img: &Grid<f64>, k: &Kernel2D) -> Result<Grid<f64>> {
    check_fits(img, k.size)?;
    let (h, w) = img.dims();
    let data = match (&k.taps, &k.separable) {
        (Taps::Real(_), Some((kx, ky))) => correlate_separable(img, kx, ky),
        (Taps::Real(t), None) => {
            let p = Padded::new(img, k.size / 2);
            correlate_padded(&p, h, w, k.size, t)
        }
        (Taps::Complex(_), _) => {
            return Err(Error::ShapeMismatch(
                "complex kernel passed to real filtering; use convolve_complex".into(),
            ))
        }
    };
    Grid::from_vec(h, w, data)
}

/// Complex response of a real image. Real kernels give a zero imaginary part.
pub fn convolve_complex(img: &Grid<f64>, k: &Kernel2D) -> Result<Grid<Complex64>> {
    check_fits(img, k.size)?;
    let (h, w) = img.dims();
    let p = Padded::new(img, k.size / 2);
    let (re, im) = complex_parts(&p, h, w, k);
    Grid::from_vec(
        h,
        w,
        re.into_iter()
            .zip(im)
            .map(|(a, b)| Complex64::new(a, b))
            .collect(),
    )
}

pub(crate) fn complex_parts(p: &Padded, h: usize, w: usize, k: &Kernel2D) -> (Vec<f64>, Vec<f64>) {
    match &k.taps {
        Taps::Real(t) => (correlate_padded(p, h, w, k.size, t), vec![0.0; h * w]),
        Taps::Complex(t) => {
            let re: Vec<f64> = t.iter().map(|z| z.re).collect();
            let im: Vec<f64> = t.iter().map(|z| z.im).collect();
            (
                correlate_padded(p, h, w, k.size, &re),
                correlate_padded(p, h, w, k.size, &im),
            )
        }
    }
}

/// Magnitude `|I ⋆ k|` for every kernel of a bank, sharing one padded copy.
pub fn response_magnitudes(img: &Grid<f64>, bank: &[Kernel2D]) -> Result<Vec<Grid<f64>>> {
    let max = bank.iter().map(|k| k.size).max().unwrap_or(1);
    check_fits(img, max)?;
    let (h, w) = img.dims();
    let p = Padded::new(img, max / 2);
    bank.iter()
        .map(|k| {
            let (re, im) = complex_parts(&p, h, w, k);
            Grid::from_vec(
                h,
                w,
                re.iter()
                    .zip(&im)
                    .map(|(a, b)| (a * a + b * b).sqrt())
                    .collect(),
            )
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_grid(h: usize, w: usize, seed: u64) -> Grid<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Grid::from_fn(h, w, |_, _| rng.random_range(0.0..255.0))
    }

    /// Definition-level correlation with clamped indexing.
    fn direct(img: &Grid<f64>, size: usize, taps: &[f64]) -> Grid<f64> {
        let (h, w) = img.dims();
        let half = (size / 2) as isize;
        Grid::from_fn(h, w, |r, c| {
            let mut acc = 0.0;
            for v in 0..size {
                for u in 0..size {
                    let rr = (r as isize + v as isize - half).clamp(0, h as isize - 1) as usize;
                    let cc = (c as isize + u as isize - half).clamp(0, w as isize - 1) as usize;
                    acc += taps[v * size + u] * img.at(rr, cc);
                }
            }
            acc
        })
    }

    #[test]
    fn bank_17d_layout() {
        let bank = make_filter_bank_17d();
        assert_eq!(bank.len(), 17);
        let count = |ch| bank.iter().filter(|(_, c)| *c == ch).count();
        assert_eq!(count(LabChannel::L), 11);
        assert_eq!(count(LabChannel::A), 3);
        assert_eq!(count(LabChannel::B), 3);
        for (k, _) in &bank {
            assert_eq!(k.size(), 7);
            let s = k.sum().re;
            if k.label().starts_with("Gaussian") {
                assert!((s - 1.0).abs() < 1e-9, "{}: {s}", k.label());
            } else {
                assert!(s.abs() < 1e-6, "{}: {s}", k.label());
            }
        }
    }

    #[test]
    fn gaussian_center_is_max() {
        let g = gaussian(1.0, 7).unwrap();
        let t = g.real_taps().unwrap();
        let center = t[3 * 7 + 3];
        assert!(t.iter().all(|&v| v <= center));
    }

    #[test]
    fn log_on_constant_is_zero() {
        let img = Grid::filled(12, 12, 77.0);
        let out = convolve(&img, &laplacian_of_gaussian(2.0, 7).unwrap()).unwrap();
        assert!(out.as_slice().iter().all(|v| v.abs() < 1e-9));
    }

    #[test]
    fn identity_and_box() {
        let img = random_grid(9, 11, 1);
        let mut id = vec![0.0; 9];
        id[4] = 1.0;
        let out = convolve(&img, &Kernel2D::real(3, id, "identity").unwrap()).unwrap();
        assert_eq!(out, img);
        let flat = Grid::filled(8, 8, 42.0);
        let boxk = Kernel2D::real(3, vec![1.0 / 9.0; 9], "box").unwrap();
        let out = convolve(&flat, &boxk).unwrap();
        assert!(out.as_slice().iter().all(|v| (v - 42.0).abs() < 1e-12));
    }

    #[test]
    fn impulse_response_is_flipped_kernel() {
        let mut img = Grid::filled(15, 15, 0.0);
        img.set(7, 7, 1.0);
        let k = gaussian(1.0, 7).unwrap();
        let t = k.real_taps().unwrap();
        let out = convolve(&img, &k).unwrap();
        for v in 0..7 {
            for u in 0..7 {
                // response at (7 - (v-3), 7 - (u-3)) picks tap (v, u)
                let got = out.at(10 - v, 10 - u);
                assert!((got - t[v * 7 + u]).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn too_small_is_rejected() {
        let img = Grid::filled(6, 20, 1.0);
        assert!(matches!(
            convolve(&img, &gaussian(1.0, 7).unwrap()),
            Err(Error::ImageTooSmall { .. })
        ));
    }

    #[test]
    fn separable_matches_direct() {
        let img = random_grid(32, 32, 7);
        for (k, _) in make_filter_bank_17d()
            .iter()
            .filter(|(k, _)| k.is_separable())
        {
            let fast = convolve(&img, k).unwrap();
            let slow = direct(&img, k.size(), k.real_taps().unwrap());
            for (a, b) in fast.as_slice().iter().zip(slow.as_slice()) {
                assert!((a - b).abs() < 1e-9, "{}", k.label());
            }
            let unsplit = convolve(&img, &k.without_separable()).unwrap();
            for (a, b) in unsplit.as_slice().iter().zip(slow.as_slice()) {
                assert!((a - b).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn linearity() {
        let a = random_grid(20, 24, 3);
        let b = random_grid(20, 24, 4);
        let k = laplacian_of_gaussian(4.0, 7).unwrap();
        let mix = Grid::from_fn(20, 24, |r, c| 2.5 * a.at(r, c) - 0.75 * b.at(r, c));
        let lhs = convolve(&mix, &k).unwrap();
        let (ra, rb) = (convolve(&a, &k).unwrap(), convolve(&b, &k).unwrap());
        for i in 0..lhs.as_slice().len() {
            let rhs = 2.5 * ra.as_slice()[i] - 0.75 * rb.as_slice()[i];
            assert!((lhs.as_slice()[i] - rhs).abs() < 1e-9);
        }
    }

    #[test]
    fn gabor_defaults() {
        let p = GaborParams::default();
        let want = [0.25, 0.1768, 0.125, 0.0884, 0.0625];
        for (f, w) in p.scales.iter().zip(want) {
            assert!((f - w).abs() < 5e-5, "{f}");
        }
        let bank = make_gabor_bank(&p).unwrap();
        assert_eq!(bank.len(), 20);
        let img = Grid::filled(16, 16, 130.0);
        for k in &bank {
            assert_eq!(k.size(), 11);
            let out = convolve_complex(&img, k).unwrap();
            assert!(
                out.as_slice().iter().all(|z| z.re.abs() < 1e-9),
                "{}",
                k.label()
            );
        }
    }

    #[test]
    fn gabor_rejects_bad_params() {
        let mut p = GaborParams::default();
        p.orientations = vec![90.0];
        assert!(matches!(
            make_gabor_bank(&p),
            Err(Error::InvalidGaborParams(_))
        ));
        let mut p = GaborParams::default();
        p.kernel_size = 10;
        assert!(matches!(
            make_gabor_bank(&p),
            Err(Error::InvalidGaborParams(_))
        ));
        let mut p = GaborParams::default();
        p.scales.clear();
        assert!(matches!(
            make_gabor_bank(&p),
            Err(Error::InvalidGaborParams(_))
        ));
    }

    #[test]
    fn complex_filtering_matches_direct() {
        let img = random_grid(14, 17, 9);
        let k = gabor_kernel(45.0, 0.125, &GaborParams::default()).unwrap();
        let t = k.complex_taps().unwrap();
        let re: Vec<f64> = t.iter().map(|z| z.re).collect();
        let im: Vec<f64> = t.iter().map(|z| z.im).collect();
        let out = convolve_complex(&img, &k).unwrap();
        let (dr, di) = (direct(&img, 11, &re), direct(&img, 11, &im));
        for i in 0..out.as_slice().len() {
            assert!((out.as_slice()[i].re - dr.as_slice()[i]).abs() < 1e-9);
            assert!((out.as_slice()[i].im - di.as_slice()[i]).abs() < 1e-9);
        }
    }

    #[test]
    fn nearest_orientation_wraps() {
        let p = GaborParams::default();
        assert_eq!(p.nearest_orientation(170.0), 0);
        assert_eq!(p.nearest_orientation(80.0), 2);
        assert_eq!(p.nearest_orientation(50.0), 1);
        assert_eq!(p.nearest_orientation(-40.0), 3);
    }

    #[test]
    fn kernel_csv_has_size_rows() {
        let mut buf = Vec::new();
        gaussian(2.0, 7).unwrap().write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 7);
        assert_eq!(lines[0].split(',').count(), 7);
        let v: f64 = lines[3].split(',').nth(3).unwrap().parse().unwrap();
        assert_eq!(v, gaussian(2.0, 7).unwrap().real_taps().unwrap()[24]);
    }
}
