//! Binary PPM (P6) diagnostics: scalogram heat maps and wavelet panels.

use std::path::Path;

use anyhow::{bail, Result};
use eegnext::wavelet::{energy_spectrum, sample_wavelet, Scalogram, WaveletSpec};

/// Viridis anchor colors at evenly spaced positions.
const VIRIDIS_ANCHORS: [[u8; 3]; 9] = [
    [68, 1, 84],
    [71, 44, 122],
    [59, 81, 139],
    [44, 113, 142],
    [33, 144, 141],
    [39, 173, 129],
    [92, 200, 99],
    [170, 220, 50],
    [253, 231, 37],
];

/// Fixed 256-entry colormap interpolated between the viridis anchors.
pub fn colormap() -> [[u8; 3]; 256] {
    let mut lut = [[0u8; 3]; 256];
    let segments = (VIRIDIS_ANCHORS.len() - 1) as f64;
    for (i, entry) in lut.iter_mut().enumerate() {
        let pos = i as f64 / 255.0 * segments;
        let k = (pos.floor() as usize).min(VIRIDIS_ANCHORS.len() - 2);
        let frac = pos - k as f64;
        for c in 0..3 {
            let a = f64::from(VIRIDIS_ANCHORS[k][c]);
            let b = f64::from(VIRIDIS_ANCHORS[k + 1][c]);
            entry[c] = (a + (b - a) * frac).round() as u8;
        }
    }
    lut
}

#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    pub width: usize,
    pub height: usize,
    /// RGB triples, row-major.
    pub pixels: Vec<u8>,
}

impl Image {
    pub fn filled(width: usize, height: usize, rgb: [u8; 3]) -> Self {
        Self {
            width,
            height,
            pixels: rgb.iter().copied().cycle().take(width * height * 3).collect(),
        }
    }

    #[cfg(test)]
    pub fn get(&self, x: usize, y: usize) -> [u8; 3] {
        let i = 3 * (y * self.width + x);
        [self.pixels[i], self.pixels[i + 1], self.pixels[i + 2]]
    }

    fn set(&mut self, x: i64, y: i64, rgb: [u8; 3]) {
        if x >= 0 && y >= 0 && (x as usize) < self.width && (y as usize) < self.height {
            let i = 3 * (y as usize * self.width + x as usize);
            self.pixels[i..i + 3].copy_from_slice(&rgb);
        }
    }

    fn line(&mut self, (x0, y0): (i64, i64), (x1, y1): (i64, i64), rgb: [u8; 3]) {
        let (dx, dy) = ((x1 - x0).abs(), -(y1 - y0).abs());
        let (sx, sy) = ((x1 - x0).signum(), (y1 - y0).signum());
        let (mut x, mut y, mut err) = (x0, y0, dx + dy);
        loop {
            self.set(x, y, rgb);
            if x == x1 && y == y1 {
                break;
            }
            let e2 = 2 * err;
            if e2 >= dy {
                err += dy;
                x += sx;
            }
            if e2 <= dx {
                err += dx;
                y += sy;
            }
        }
    }

    pub fn to_ppm(&self) -> Vec<u8> {
        let mut out = format!("P6\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend_from_slice(&self.pixels);
        out
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_ppm())?;
        Ok(())
    }
}

/// Heat map of one channel: `S` rows (smallest scale on top) by `T` columns,
/// scaled to the plane's own min/max.
pub fn scalogram_image(s: &Scalogram, channel: usize) -> Result<Image> {
    if channel >= s.n_channels {
        bail!("ChannelOutOfRange: channel {channel} but the scalogram has {} channels", s.n_channels);
    }
    let plane = s.plane(channel);
    let (lo, hi) = plane
        .iter()
        .fold((f32::INFINITY, f32::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let lut = colormap();
    let span = hi - lo;
    let mut pixels = Vec::with_capacity(plane.len() * 3);
    for &v in plane {
        let idx = if span > 0.0 { ((v - lo) / span * 255.0).round() as usize } else { 0 };
        pixels.extend_from_slice(&lut[idx.min(255)]);
    }
    Ok(Image {
        width: s.n_samples,
        height: s.n_scales(),
        pixels,
    })
}

pub const WAVELET_WIDTH: usize = 512;
pub const PANEL_HEIGHT: usize = 200;
const BLUE: [u8; 3] = [31, 119, 180];
const ORANGE: [u8; 3] = [255, 127, 14];
const GRAY: [u8; 3] = [160, 160, 160];
const BLACK: [u8; 3] = [0, 0, 0];

/// Spectrum-panel column of frequency `f` in Hz.
pub fn spectrum_column(f: f64, fs: f64) -> usize {
    (f / (fs / 2.0) * (WAVELET_WIDTH - 1) as f64).round() as usize
}

/// Two stacked panels on white: the sampled kernel at scale `a` (real part
/// blue, imaginary part orange) and its energy spectral density over
/// `0..=fs/2` Hz.
pub fn wavelet_image(spec: &WaveletSpec, a: f64, fs: f64) -> Result<Image> {
    let w = sample_wavelet(spec, a)?;
    let n_fft = (4 * w.support()).next_power_of_two().max(2048);
    let e = energy_spectrum(spec, a, fs, n_fft)?;
    let mut img = Image::filled(WAVELET_WIDTH, 2 * PANEL_HEIGHT, [255, 255, 255]);
    let h = PANEL_HEIGHT as f64;
    let mid = (PANEL_HEIGHT / 2) as i64;
    img.line((0, mid), (WAVELET_WIDTH as i64 - 1, mid), GRAY);

    // The kernel stores the conjugate; plot the basis function itself.
    let peak = w.samples.iter().map(|z| z.re.abs().max(z.im.abs())).fold(0.0, f64::max).max(1e-300);
    let n = w.samples.len();
    let to_xy = |i: usize, v: f64| {
        let x = if n > 1 { i as f64 / (n - 1) as f64 * (WAVELET_WIDTH - 1) as f64 } else { 0.0 };
        let y = h / 2.0 - v / peak * (h / 2.0 - 4.0);
        (x.round() as i64, y.round() as i64)
    };
    for (part, color) in [(0, BLUE), (1, ORANGE)] {
        let value = |i: usize| {
            let z = w.samples[i].conj();
            if part == 0 {
                z.re
            } else {
                z.im
            }
        };
        for i in 1..n {
            img.line(to_xy(i - 1, value(i - 1)), to_xy(i, value(i)), color);
        }
    }

    let top = PANEL_HEIGHT as i64;
    let bottom = 2 * PANEL_HEIGHT as i64 - 1;
    img.line((0, bottom), (WAVELET_WIDTH as i64 - 1, bottom), GRAY);
    let dmax = e.density.iter().cloned().fold(0.0, f64::max).max(1e-300);
    let mut column_value = vec![f64::NEG_INFINITY; WAVELET_WIDTH];
    for (f, d) in e.freqs.iter().zip(&e.density) {
        let x = spectrum_column(*f, fs).min(WAVELET_WIDTH - 1);
        column_value[x] = column_value[x].max(*d);
    }
    let mut prev: Option<(i64, i64)> = None;
    for (x, &d) in column_value.iter().enumerate() {
        if d.is_finite() {
            let y = bottom - 4 - (d / dmax * (h - 8.0)).round() as i64;
            let p = (x as i64, y.max(top));
            if let Some(q) = prev {
                img.line(q, p, BLACK);
            }
            prev = Some(p);
        }
    }
    Ok(img)
}

#[cfg(test)]
mod tests {
    use super::*;
    use eegnext::ingest::Trial;
    use eegnext::wavelet::{make_scales, scalogram, Family, ScaleMode};

    fn parse_ppm(bytes: &[u8]) -> (usize, usize, &[u8]) {
        let text = std::str::from_utf8(&bytes[..15.min(bytes.len())]).unwrap_or("");
        assert!(text.starts_with("P6\n"));
        let mut parts = bytes.splitn(4, |&b| b == b'\n');
        assert_eq!(parts.next().unwrap(), b"P6");
        let dims = std::str::from_utf8(parts.next().unwrap()).unwrap();
        let (w, h) = dims.split_once(' ').unwrap();
        assert_eq!(parts.next().unwrap(), b"255");
        let body = parts.next().unwrap();
        (w.parse().unwrap(), h.parse().unwrap(), body)
    }

    fn sine_scalogram(f: f64) -> Scalogram {
        let data: Vec<f32> = (0..1000).map(|n| (2.0 * std::f64::consts::PI * f * n as f64 / 100.0).sin() as f32).collect();
        let trial = Trial {
            subject_id: "s".into(),
            channels: vec!["a".into()],
            data,
            n_samples: 1000,
            fs: 100.0,
            label: 0,
            trial_index: 0,
        };
        scalogram(&trial, &make_scales(ScaleMode::Linear, 20.0, 0).unwrap(), &WaveletSpec::default()).unwrap()
    }

    #[test]
    fn colormap_is_monotone_in_brightness_and_fixed() {
        let lut = colormap();
        assert_eq!(lut[0], VIRIDIS_ANCHORS[0]);
        assert_eq!(lut[255], VIRIDIS_ANCHORS[8]);
        let lum = |c: [u8; 3]| 0.2126 * f64::from(c[0]) + 0.7152 * f64::from(c[1]) + 0.0722 * f64::from(c[2]);
        assert!(lut.windows(2).all(|p| lum(p[1]) >= lum(p[0]) - 1.0));
    }

    #[test]
    fn scalogram_image_shape_and_ridge() {
        let s = sine_scalogram(10.0);
        let img = scalogram_image(&s, 0).unwrap();
        let ppm = img.to_ppm();
        let (w, h, body) = parse_ppm(&ppm);
        assert_eq!((w, h, body.len()), (1000, 20, 1000 * 20 * 3));
        // Brightest non-aliased row (scales >= 2 for C = 1).
        let lut = colormap();
        let level = |p: [u8; 3]| lut.iter().position(|&c| c == p).unwrap();
        let brightest_row = (1..h).max_by_key(|&y| (0..w).map(|x| level(img.get(x, y))).sum::<usize>()).unwrap();
        assert_eq!(s.scales.scales[brightest_row], 10.0);
        assert!(scalogram_image(&s, 1).unwrap_err().to_string().contains("ChannelOutOfRange"));
    }

    #[test]
    fn zero_scalogram_is_uniform() {
        let mut s = sine_scalogram(10.0);
        s.data.iter_mut().for_each(|v| *v = 0.0);
        let img = scalogram_image(&s, 0).unwrap();
        assert!(img.pixels.chunks(3).all(|p| p == img.pixels[..3].to_vec()));
    }

    #[test]
    fn wavelet_spectrum_peak_column() {
        let (a, fs) = (10.0, 100.0);
        let img = wavelet_image(&WaveletSpec::cmor(1.5, 1.0), a, fs).unwrap();
        let (w, h, _) = parse_ppm(&img.to_ppm());
        assert_eq!((w, h), (WAVELET_WIDTH, 2 * PANEL_HEIGHT));
        // Highest black pixel in the spectrum panel.
        let (col, _) = (PANEL_HEIGHT..2 * PANEL_HEIGHT)
            .flat_map(|y| (0..w).map(move |x| (x, y)))
            .find(|&(x, y)| img.get(x, y) == BLACK)
            .unwrap();
        let expected = spectrum_column(fs * 1.0 / a, fs);
        assert!((col as i64 - expected as i64).abs() <= 2, "{col} vs {expected}");
    }

    #[test]
    fn families_render_differently() {
        let cmor = wavelet_image(&WaveletSpec::cmor(1.5, 1.0), 5.0, 100.0).unwrap();
        let cgau = wavelet_image(&WaveletSpec::new(Family::Cgau, 1.5, 1.0, 2).unwrap(), 5.0, 100.0).unwrap();
        assert_ne!(cmor.pixels, cgau.pixels);
    }
}
