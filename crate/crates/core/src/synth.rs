//! Procedural dataset generators.
//!
//! Everything here is fully deterministic for a given seed and quantized to
//! the 8-bit grid, so a dataset generated in memory is byte-identical to the
//! same dataset written to disk and re-read through the format loaders.
//!
//! Two families:
//! - [`digits`]: 28x28x1 glyph renderings with affine jitter, stroke blur,
//!   and pixel noise; ten classes.
//! - [`shapes`]: 32x32x3 colored shapes. `BrightnessPairs` puts five shapes
//!   in a bright and a dim variant whose value ranges are exactly related by
//!   the default darkening factor; `SharpnessPairs` pairs soft-edged and
//!   hard-edged variants of the same shapes. These pairings give natural
//!   distribution shifts a measurable effect on a trained model.

use crate::datamodel::{Dataset, DistributionTag, Image, LabeledExample};
use crate::util::{rng_for, Rng};
use crate::{Error, Result};
use ndarray::Array3;
use rand::Rng as _;
use std::path::Path;

/// Factor relating dim-class to bright-class value ranges; matches the
/// default darkening strength so darkened bright shapes land inside the dim
/// classes' native range.
pub const BRIGHTNESS_PAIR_FACTOR: f64 = 0.35;

const GLYPHS: [[u8; 7]; 10] = [
    // 5-wide rows, LSB = leftmost column
    [0b01110, 0b10001, 0b10001, 0b10001, 0b10001, 0b10001, 0b01110], // 0
    [0b00100, 0b01100, 0b00100, 0b00100, 0b00100, 0b00100, 0b01110], // 1
    [0b01110, 0b10001, 0b00001, 0b00110, 0b01000, 0b10000, 0b11111], // 2
    [0b11110, 0b00001, 0b00001, 0b01110, 0b00001, 0b00001, 0b11110], // 3
    [0b00010, 0b00110, 0b01010, 0b10010, 0b11111, 0b00010, 0b00010], // 4
    [0b11111, 0b10000, 0b11110, 0b00001, 0b00001, 0b10001, 0b01110], // 5
    [0b00110, 0b01000, 0b10000, 0b11110, 0b10001, 0b10001, 0b01110], // 6
    [0b11111, 0b00001, 0b00010, 0b00100, 0b01000, 0b01000, 0b01000], // 7
    [0b01110, 0b10001, 0b10001, 0b01110, 0b10001, 0b10001, 0b01110], // 8
    [0b01110, 0b10001, 0b10001, 0b01111, 0b00001, 0b00010, 0b01100], // 9
];

fn glyph_at(digit: usize, gx: f64, gy: f64) -> f64 {
    // bilinear interpolation of the binary 5x7 grid, zero outside
    let cell = |ix: isize, iy: isize| -> f64 {
        if !(0..5).contains(&ix) || !(0..7).contains(&iy) {
            return 0.0;
        }
        if (GLYPHS[digit][iy as usize] >> (4 - ix)) & 1 == 1 {
            1.0
        } else {
            0.0
        }
    };
    let x0 = gx.floor();
    let y0 = gy.floor();
    let fx = gx - x0;
    let fy = gy - y0;
    let (ix, iy) = (x0 as isize, y0 as isize);
    cell(ix, iy) * (1.0 - fx) * (1.0 - fy)
        + cell(ix + 1, iy) * fx * (1.0 - fy)
        + cell(ix, iy + 1) * (1.0 - fx) * fy
        + cell(ix + 1, iy + 1) * fx * fy
}

fn gaussian_blur_hwc(img: &mut Array3<f64>, sigma: f64) {
    if sigma < 1e-3 {
        return;
    }
    let radius = ((2.5 * sigma).ceil() as usize).clamp(1, 5);
    let mut kernel = Vec::with_capacity(2 * radius + 1);
    let mut sum = 0.0;
    for t in -(radius as isize)..=(radius as isize) {
        let w = (-((t * t) as f64) / (2.0 * sigma * sigma)).exp();
        kernel.push(w);
        sum += w;
    }
    for w in &mut kernel {
        *w /= sum;
    }
    let (h, w, c) = img.dim();
    let clamp = |v: isize, max: usize| v.clamp(0, max as isize - 1) as usize;
    // horizontal then vertical pass with replicated borders
    let mut tmp = img.clone();
    for y in 0..h {
        for x in 0..w {
            for ch in 0..c {
                let mut acc = 0.0;
                for (ki, kw) in kernel.iter().enumerate() {
                    let sx = clamp(x as isize + ki as isize - radius as isize, w);
                    acc += kw * img[[y, sx, ch]];
                }
                tmp[[y, x, ch]] = acc;
            }
        }
    }
    for y in 0..h {
        for x in 0..w {
            for ch in 0..c {
                let mut acc = 0.0;
                for (ki, kw) in kernel.iter().enumerate() {
                    let sy = clamp(y as isize + ki as isize - radius as isize, h);
                    acc += kw * tmp[[sy, x, ch]];
                }
                img[[y, x, ch]] = acc;
            }
        }
    }
}

fn quantize(img: &mut Array3<f64>) {
    img.mapv_inplace(|v| (v.clamp(0.0, 1.0) * 255.0).round() / 255.0);
}

/// Render one digit image.
fn render_digit(digit: usize, rng: &mut Rng) -> Image {
    let size = 28;
    let scale = rng.gen_range(2.6..3.6);
    let theta: f64 = rng.gen_range(-0.22..0.22);
    let cx = 14.0 + rng.gen_range(-2.5..2.5);
    let cy = 14.0 + rng.gen_range(-2.5..2.5);
    let fg = rng.gen_range(0.6..1.0);
    let blur = rng.gen_range(0.5..0.9);
    let noise = rng.gen_range(0.015..0.04);

    let (sin_t, cos_t) = theta.sin_cos();
    let mut img = Array3::<f64>::zeros((size, size, 1));
    for y in 0..size {
        for x in 0..size {
            // map output pixel into glyph coordinates (glyph center 2.0, 3.0)
            let dx = x as f64 - cx;
            let dy = y as f64 - cy;
            let rx = (cos_t * dx + sin_t * dy) / scale + 2.0;
            let ry = (-sin_t * dx + cos_t * dy) / scale + 3.0;
            img[[y, x, 0]] = fg * glyph_at(digit, rx, ry);
        }
    }
    gaussian_blur_hwc(&mut img, blur);
    for v in img.iter_mut() {
        *v += rng.gen_range(-noise..noise);
    }
    quantize(&mut img);
    Image::new(img).expect("quantized digit in range")
}

/// A balanced, shuffled 28x28 grayscale digit dataset.
pub fn digits(n: usize, seed: u64) -> Result<Dataset> {
    if n == 0 {
        return Err(Error::validation("digit count must be positive"));
    }
    let mut rng = rng_for(seed, 0xd161);
    let mut examples = Vec::with_capacity(n);
    let mut labels: Vec<usize> = (0..n).map(|i| i % 10).collect();
    for i in (1..n).rev() {
        let j = rng.gen_range(0..=i);
        labels.swap(i, j);
    }
    for &label in &labels {
        examples.push(LabeledExample {
            image: render_digit(label, &mut rng),
            label,
        });
    }
    Dataset::new(examples, 10, DistributionTag::benign())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShapesVariant {
    /// Classes 2s/2s+1 share shape `s` and differ only in brightness.
    BrightnessPairs,
    /// Classes 2s/2s+1 share shape `s` and differ only in edge sharpness.
    SharpnessPairs,
}

#[derive(Clone, Copy)]
enum ShapeKind {
    Circle,
    Square,
    Triangle,
    Cross,
    Stripes,
}

const SHAPES: [ShapeKind; 5] = [
    ShapeKind::Circle,
    ShapeKind::Square,
    ShapeKind::Triangle,
    ShapeKind::Cross,
    ShapeKind::Stripes,
];

fn hsv_to_rgb(h: f64, s: f64, v: f64) -> (f64, f64, f64) {
    let h6 = (h.fract() * 6.0).rem_euclid(6.0);
    let c = v * s;
    let x = c * (1.0 - ((h6 % 2.0) - 1.0).abs());
    let (r, g, b) = match h6 as usize {
        0 => (c, x, 0.0),
        1 => (x, c, 0.0),
        2 => (0.0, c, x),
        3 => (0.0, x, c),
        4 => (x, 0.0, c),
        _ => (c, 0.0, x),
    };
    let m = v - c;
    (r + m, g + m, b + m)
}

/// Inside-positive signed distance to the shape boundary, in pixels.
fn shape_sdf(kind: ShapeKind, px: f64, py: f64, r: f64, bar_w: f64) -> f64 {
    match kind {
        ShapeKind::Circle => r - (px * px + py * py).sqrt(),
        ShapeKind::Square => {
            let b = r * 0.85;
            b - px.abs().max(py.abs())
        }
        ShapeKind::Triangle => {
            // equilateral triangle, vertex up
            let verts = [
                (0.0, -r),
                (r * 0.866, r * 0.5),
                (-r * 0.866, r * 0.5),
            ];
            let mut d = f64::INFINITY;
            for i in 0..3 {
                let (x1, y1) = verts[i];
                let (x2, y2) = verts[(i + 1) % 3];
                // inward normal of edge (v1 -> v2)
                let (ex, ey) = (x2 - x1, y2 - y1);
                let len = (ex * ex + ey * ey).sqrt();
                let (nx, ny) = (ey / len, -ex / len);
                d = d.min(nx * (px - x1) + ny * (py - y1));
            }
            d
        }
        ShapeKind::Cross => {
            let arm = r * 0.38;
            let half = r;
            let sd_box = |qx: f64, qy: f64, bx: f64, by: f64| -> f64 {
                (bx - qx.abs()).min(by - qy.abs())
            };
            sd_box(px, py, half, arm).max(sd_box(px, py, arm, half))
        }
        ShapeKind::Stripes => {
            let period = bar_w * 2.2;
            let y = py.rem_euclid(period);
            let sd_bar = bar_w / 2.0 - (y - period / 2.0).abs();
            let sd_circle = r - (px * px + py * py).sqrt();
            sd_bar.min(sd_circle)
        }
    }
}

fn render_shape(class: usize, variant: ShapesVariant, rng: &mut Rng) -> Image {
    let size = 32;
    let kind = SHAPES[class / 2];
    let second = class % 2 == 1;

    let r = rng.gen_range(7.0..10.5);
    let cx = 16.0 + rng.gen_range(-3.0..3.0);
    let cy = 16.0 + rng.gen_range(-3.0..3.0);
    let theta: f64 = match kind {
        ShapeKind::Circle => 0.0,
        ShapeKind::Stripes => rng.gen_range(0.0..std::f64::consts::PI),
        _ => rng.gen_range(-0.5..0.5),
    };
    let bar_w = rng.gen_range(2.8..3.8);
    let hue = rng.gen_range(0.0..1.0);
    let sat = rng.gen_range(0.55..0.9);

    let (value, blur) = match variant {
        ShapesVariant::BrightnessPairs => {
            let bright = rng.gen_range(0.75..0.95);
            let v = if second {
                bright * BRIGHTNESS_PAIR_FACTOR
            } else {
                bright
            };
            (v, 0.8)
        }
        ShapesVariant::SharpnessPairs => {
            let v = rng.gen_range(0.55..0.9);
            let blur = if second {
                rng.gen_range(0.0..0.15)
            } else {
                rng.gen_range(1.3..1.7)
            };
            (v, blur)
        }
    };

    let (fr, fg, fb) = hsv_to_rgb(hue, sat, value);
    let bg = rng.gen_range(0.02..0.10);
    let noise = 0.015;
    let edge = 1.2;

    let (sin_t, cos_t) = theta.sin_cos();
    let mut img = Array3::<f64>::zeros((size, size, 3));
    for y in 0..size {
        for x in 0..size {
            let dx = x as f64 - cx;
            let dy = y as f64 - cy;
            let px = cos_t * dx + sin_t * dy;
            let py = -sin_t * dx + cos_t * dy;
            let sd = shape_sdf(kind, px, py, r, bar_w);
            let alpha = (sd / edge + 0.5).clamp(0.0, 1.0);
            img[[y, x, 0]] = fr * alpha + bg * (1.0 - alpha);
            img[[y, x, 1]] = fg * alpha + bg * (1.0 - alpha);
            img[[y, x, 2]] = fb * alpha + bg * (1.0 - alpha);
        }
    }
    gaussian_blur_hwc(&mut img, blur);
    for v in img.iter_mut() {
        *v += rng.gen_range(-noise..noise);
    }
    quantize(&mut img);
    Image::new(img).expect("quantized shape in range")
}

/// A balanced, shuffled 32x32 color shape dataset with ten classes.
pub fn shapes(n: usize, seed: u64, variant: ShapesVariant) -> Result<Dataset> {
    if n == 0 {
        return Err(Error::validation("shape count must be positive"));
    }
    let stream = match variant {
        ShapesVariant::BrightnessPairs => 0x5b01,
        ShapesVariant::SharpnessPairs => 0x5b02,
    };
    let mut rng = rng_for(seed, stream);
    let mut labels: Vec<usize> = (0..n).map(|i| i % 10).collect();
    for i in (1..n).rev() {
        let j = rng.gen_range(0..=i);
        labels.swap(i, j);
    }
    let mut examples = Vec::with_capacity(n);
    for &label in &labels {
        examples.push(LabeledExample {
            image: render_shape(label, variant, &mut rng),
            label,
        });
    }
    Dataset::new(examples, 10, DistributionTag::benign())
}

/// Write a grayscale dataset as an IDX image/label file pair.
pub fn write_idx(d: &Dataset, dir: &Path, prefix: &str) -> Result<()> {
    let (h, w, c) = d.image_shape();
    if c != 1 {
        return Err(Error::validation("idx export requires grayscale images"));
    }
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut img_bytes = Vec::with_capacity(16 + d.len() * h * w);
    img_bytes.extend_from_slice(&0x0000_0803u32.to_be_bytes());
    img_bytes.extend_from_slice(&(d.len() as u32).to_be_bytes());
    img_bytes.extend_from_slice(&(h as u32).to_be_bytes());
    img_bytes.extend_from_slice(&(w as u32).to_be_bytes());
    let mut lbl_bytes = Vec::with_capacity(8 + d.len());
    lbl_bytes.extend_from_slice(&0x0000_0801u32.to_be_bytes());
    lbl_bytes.extend_from_slice(&(d.len() as u32).to_be_bytes());
    for ex in d.examples() {
        for &v in ex.image.pixels().iter() {
            img_bytes.push((v * 255.0).round() as u8);
        }
        lbl_bytes.push(ex.label as u8);
    }
    let img_path = dir.join(format!("{prefix}-images-idx3-ubyte"));
    std::fs::write(&img_path, img_bytes).map_err(|e| Error::io(&img_path, e))?;
    let lbl_path = dir.join(format!("{prefix}-labels-idx1-ubyte"));
    std::fs::write(&lbl_path, lbl_bytes).map_err(|e| Error::io(&lbl_path, e))
}

/// Write a 32x32x3 dataset in the 3073-byte-record batch format.
pub fn write_cifar_binary(d: &Dataset, dir: &Path, records_per_file: usize) -> Result<()> {
    if d.image_shape() != (32, 32, 3) {
        return Err(Error::validation("binary batch export requires 32x32x3 images"));
    }
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let per = records_per_file.max(1);
    for (fi, chunk) in d.examples().chunks(per).enumerate() {
        let mut bytes = Vec::with_capacity(chunk.len() * 3073);
        for ex in chunk {
            bytes.push(ex.label as u8);
            for c in 0..3 {
                for y in 0..32 {
                    for x in 0..32 {
                        bytes.push((ex.image.pixels()[[y, x, c]] * 255.0).round() as u8);
                    }
                }
            }
        }
        let path = dir.join(format!("data_batch_{}.bin", fi + 1));
        std::fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
    }
    Ok(())
}
