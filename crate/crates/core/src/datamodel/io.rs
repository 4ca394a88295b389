//! Dataset ingestion from on-disk formats.
//!
//! Three formats are supported:
//! - `idx`: the classic digit-dataset pair of `*images-idx3-ubyte` /
//!   `*labels-idx1-ubyte` files (magic 0x00000803 / 0x00000801) in one
//!   directory.
//! - `cifar_binary`: 3073-byte records (1 label byte + 32x32x3 planar RGB);
//!   a directory of `.bin` batch files read in lexicographic order, or a
//!   single `.bin` file.
//! - `image_folder`: one subdirectory per class (sorted name order defines
//!   the class index), PNG images inside, sorted by file name.
//!
//! Raw bytes are divided by 255 at ingestion; everything downstream works on
//! `[0,1]` floats.

use super::{Dataset, DistributionTag, Image, LabeledExample};
use crate::{Error, Result};
use ndarray::Array3;
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatasetFormat {
    Idx,
    CifarBinary,
    ImageFolder,
}

impl std::str::FromStr for DatasetFormat {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "idx" => Ok(DatasetFormat::Idx),
            "cifar_binary" => Ok(DatasetFormat::CifarBinary),
            "image_folder" => Ok(DatasetFormat::ImageFolder),
            other => Err(Error::validation(format!("unknown dataset format {other:?}"))),
        }
    }
}

pub fn load_dataset(path: &Path, format: DatasetFormat) -> Result<Dataset> {
    load_dataset_tagged(path, format, DistributionTag::benign())
}

pub fn load_dataset_tagged(
    path: &Path,
    format: DatasetFormat,
    tag: DistributionTag,
) -> Result<Dataset> {
    if !path.exists() {
        return Err(Error::validation(format!(
            "dataset path {} does not exist",
            path.display()
        )));
    }
    match format {
        DatasetFormat::Idx => load_idx(path, tag),
        DatasetFormat::CifarBinary => load_cifar_binary(path, tag),
        DatasetFormat::ImageFolder => load_image_folder(path, tag),
    }
}

const IDX_IMAGES_MAGIC: u32 = 0x0000_0803;
const IDX_LABELS_MAGIC: u32 = 0x0000_0801;

fn read_u32_be(bytes: &[u8], offset: usize, path: &Path) -> Result<u32> {
    let slice = bytes.get(offset..offset + 4).ok_or_else(|| Error::Parse {
        path: path.into(),
        offset: offset as u64,
        reason: "unexpected end of file reading u32".into(),
    })?;
    Ok(u32::from_be_bytes(slice.try_into().unwrap()))
}

fn find_single(dir: &Path, needle: &str) -> Result<PathBuf> {
    let mut matches: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok())
        .map(|e| e.path())
        .filter(|p| {
            p.is_file()
                && p.file_name()
                    .map(|n| n.to_string_lossy().contains(needle))
                    .unwrap_or(false)
        })
        .collect();
    matches.sort();
    match matches.len() {
        0 => Err(Error::validation(format!(
            "no file matching \"{needle}\" under {}",
            dir.display()
        ))),
        1 => Ok(matches.pop().unwrap()),
        n => Err(Error::validation(format!(
            "{n} files matching \"{needle}\" under {}, expected exactly one",
            dir.display()
        ))),
    }
}

fn load_idx(path: &Path, tag: DistributionTag) -> Result<Dataset> {
    let (images_path, labels_path) = if path.is_dir() {
        (
            find_single(path, "images-idx3-ubyte")?,
            find_single(path, "labels-idx1-ubyte")?,
        )
    } else {
        let name = path.file_name().unwrap_or_default().to_string_lossy();
        if !name.contains("images-idx3-ubyte") {
            return Err(Error::validation(format!(
                "idx path must be a directory or an images-idx3-ubyte file, got {}",
                path.display()
            )));
        }
        let labels = path.with_file_name(name.replace("images-idx3", "labels-idx1").to_string());
        (path.to_path_buf(), labels)
    };

    let img_bytes = std::fs::read(&images_path).map_err(|e| Error::io(&images_path, e))?;
    if read_u32_be(&img_bytes, 0, &images_path)? != IDX_IMAGES_MAGIC {
        return Err(Error::Parse {
            path: images_path.clone(),
            offset: 0,
            reason: format!("bad images magic, expected {IDX_IMAGES_MAGIC:#010x}"),
        });
    }
    let n = read_u32_be(&img_bytes, 4, &images_path)? as usize;
    let h = read_u32_be(&img_bytes, 8, &images_path)? as usize;
    let w = read_u32_be(&img_bytes, 12, &images_path)? as usize;
    let expected = 16 + n * h * w;
    if img_bytes.len() != expected {
        return Err(Error::Parse {
            path: images_path.clone(),
            offset: img_bytes.len().min(expected) as u64,
            reason: format!("image payload is {} bytes, expected {expected}", img_bytes.len()),
        });
    }

    let lbl_bytes = std::fs::read(&labels_path).map_err(|e| Error::io(&labels_path, e))?;
    if read_u32_be(&lbl_bytes, 0, &labels_path)? != IDX_LABELS_MAGIC {
        return Err(Error::Parse {
            path: labels_path.clone(),
            offset: 0,
            reason: format!("bad labels magic, expected {IDX_LABELS_MAGIC:#010x}"),
        });
    }
    let n_labels = read_u32_be(&lbl_bytes, 4, &labels_path)? as usize;
    if n_labels != n {
        return Err(Error::validation(format!(
            "idx label count {n_labels} != image count {n}"
        )));
    }
    if lbl_bytes.len() != 8 + n {
        return Err(Error::Parse {
            path: labels_path.clone(),
            offset: lbl_bytes.len() as u64,
            reason: format!("label payload is {} bytes, expected {}", lbl_bytes.len(), 8 + n),
        });
    }

    let class_count = 10;
    let mut examples = Vec::with_capacity(n);
    for i in 0..n {
        let label = lbl_bytes[8 + i] as usize;
        if label >= class_count {
            return Err(Error::validation(format!(
                "label {label} out of range for {class_count} classes at example {i}"
            )));
        }
        let base = 16 + i * h * w;
        let mut img = Array3::<f64>::zeros((h, w, 1));
        for y in 0..h {
            for x in 0..w {
                img[[y, x, 0]] = img_bytes[base + y * w + x] as f64 / 255.0;
            }
        }
        examples.push(LabeledExample {
            image: Image::new(img)?,
            label,
        });
    }
    Dataset::new(examples, class_count, tag)
}

const CIFAR_RECORD: usize = 1 + 32 * 32 * 3;

fn load_cifar_binary(path: &Path, tag: DistributionTag) -> Result<Dataset> {
    let files: Vec<PathBuf> = if path.is_dir() {
        let mut v: Vec<PathBuf> = std::fs::read_dir(path)
            .map_err(|e| Error::io(path, e))?
            .filter_map(|e| e.ok())
            .map(|e| e.path())
            .filter(|p| p.extension().map(|e| e == "bin").unwrap_or(false))
            .collect();
        v.sort();
        v
    } else {
        vec![path.to_path_buf()]
    };
    if files.is_empty() {
        return Err(Error::validation(format!(
            "no .bin batch files under {}",
            path.display()
        )));
    }

    let class_count = 10;
    let mut examples = Vec::new();
    for file in &files {
        let bytes = std::fs::read(file).map_err(|e| Error::io(file, e))?;
        if bytes.is_empty() || bytes.len() % CIFAR_RECORD != 0 {
            return Err(Error::Parse {
                path: file.clone(),
                offset: (bytes.len() - bytes.len() % CIFAR_RECORD) as u64,
                reason: format!(
                    "file length {} is not a positive multiple of record size {CIFAR_RECORD}",
                    bytes.len()
                ),
            });
        }
        for (rec_idx, rec) in bytes.chunks_exact(CIFAR_RECORD).enumerate() {
            let label = rec[0] as usize;
            if label >= class_count {
                return Err(Error::validation(format!(
                    "label {label} out of range for {class_count} classes in {} record {rec_idx}",
                    file.display()
                )));
            }
            let mut img = Array3::<f64>::zeros((32, 32, 3));
            for c in 0..3 {
                for y in 0..32 {
                    for x in 0..32 {
                        img[[y, x, c]] = rec[1 + c * 1024 + y * 32 + x] as f64 / 255.0;
                    }
                }
            }
            examples.push(LabeledExample {
                image: Image::new(img)?,
                label,
            });
        }
    }
    Dataset::new(examples, class_count, tag)
}

fn load_image_folder(path: &Path, tag: DistributionTag) -> Result<Dataset> {
    if !path.is_dir() {
        return Err(Error::validation(format!(
            "image_folder path {} is not a directory",
            path.display()
        )));
    }
    let mut class_dirs: Vec<PathBuf> = std::fs::read_dir(path)
        .map_err(|e| Error::io(path, e))?
        .filter_map(|e| e.ok())
        .map(|e| e.path())
        .filter(|p| p.is_dir())
        .collect();
    class_dirs.sort();
    if class_dirs.is_empty() {
        return Err(Error::validation(format!(
            "image_folder {} contains no class directories",
            path.display()
        )));
    }

    let class_count = class_dirs.len();
    let mut examples = Vec::new();
    for (label, class_dir) in class_dirs.iter().enumerate() {
        let mut files: Vec<PathBuf> = std::fs::read_dir(class_dir)
            .map_err(|e| Error::io(class_dir, e))?
            .filter_map(|e| e.ok())
            .map(|e| e.path())
            .filter(|p| p.extension().map(|e| e == "png").unwrap_or(false))
            .collect();
        files.sort();
        for file in &files {
            examples.push(LabeledExample {
                image: load_png(file)?,
                label,
            });
        }
    }
    if examples.is_empty() {
        return Err(Error::validation(format!(
            "image_folder {} contains no PNG images",
            path.display()
        )));
    }
    Dataset::new(examples, class_count, tag)
}

fn load_png(path: &Path) -> Result<Image> {
    let img = image::open(path)?;
    let img = match img {
        image::DynamicImage::ImageLuma8(g) => {
            let (w, h) = (g.width() as usize, g.height() as usize);
            let mut a = Array3::<f64>::zeros((h, w, 1));
            for (x, y, p) in g.enumerate_pixels() {
                a[[y as usize, x as usize, 0]] = p.0[0] as f64 / 255.0;
            }
            a
        }
        other => {
            let rgb = other.to_rgb8();
            let (w, h) = (rgb.width() as usize, rgb.height() as usize);
            let mut a = Array3::<f64>::zeros((h, w, 3));
            for (x, y, p) in rgb.enumerate_pixels() {
                for c in 0..3 {
                    a[[y as usize, x as usize, c]] = p.0[c] as f64 / 255.0;
                }
            }
            a
        }
    };
    Image::new(img)
}

/// Write an image as an 8-bit PNG. Values are quantized with round-half-up;
/// images whose pixels are exact multiples of 1/255 round-trip byte-exactly.
pub fn save_png(img: &Image, path: &Path) -> Result<()> {
    let (h, w, c) = img.shape();
    let quant = |v: f64| (v * 255.0).round().clamp(0.0, 255.0) as u8;
    match c {
        1 => {
            let mut out = image::GrayImage::new(w as u32, h as u32);
            for ((y, x, _), &v) in img.pixels().indexed_iter() {
                out.put_pixel(x as u32, y as u32, image::Luma([quant(v)]));
            }
            out.save(path)?;
        }
        _ => {
            let mut out = image::RgbImage::new(w as u32, h as u32);
            for y in 0..h {
                for x in 0..w {
                    let px = image::Rgb([
                        quant(img.pixels()[[y, x, 0]]),
                        quant(img.pixels()[[y, x, 1]]),
                        quant(img.pixels()[[y, x, 2]]),
                    ]);
                    out.put_pixel(x as u32, y as u32, px);
                }
            }
            out.save(path)?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_idx_pair(dir: &Path, n: usize, h: usize, w: usize, labels: &[u8]) {
        let mut img = Vec::new();
        img.extend_from_slice(&IDX_IMAGES_MAGIC.to_be_bytes());
        img.extend_from_slice(&(n as u32).to_be_bytes());
        img.extend_from_slice(&(h as u32).to_be_bytes());
        img.extend_from_slice(&(w as u32).to_be_bytes());
        for i in 0..n * h * w {
            img.push((i % 256) as u8);
        }
        std::fs::write(dir.join("t-images-idx3-ubyte"), img).unwrap();
        let mut lbl = Vec::new();
        lbl.extend_from_slice(&IDX_LABELS_MAGIC.to_be_bytes());
        lbl.extend_from_slice(&(n as u32).to_be_bytes());
        lbl.extend_from_slice(labels);
        std::fs::write(dir.join("t-labels-idx1-ubyte"), lbl).unwrap();
    }

    #[test]
    fn idx_loads_and_scales() {
        let dir = tempfile::tempdir().unwrap();
        write_idx_pair(dir.path(), 3, 4, 4, &[0, 5, 9]);
        let d = load_dataset(dir.path(), DatasetFormat::Idx).unwrap();
        assert_eq!(d.len(), 3);
        assert_eq!(d.class_count(), 10);
        assert_eq!(d.image_shape(), (4, 4, 1));
        // first pixel of first image is byte 0 -> 0.0; byte 17 of image 2
        assert_eq!(d.examples()[0].image.pixels()[[0, 0, 0]], 0.0);
        assert_eq!(d.examples()[1].label, 5);
    }

    #[test]
    fn idx_rejects_bad_magic_and_label_range() {
        let dir = tempfile::tempdir().unwrap();
        write_idx_pair(dir.path(), 2, 2, 2, &[0, 12]);
        let err = load_dataset(dir.path(), DatasetFormat::Idx).unwrap_err();
        assert!(matches!(err, Error::Validation(_)), "{err}");

        let dir2 = tempfile::tempdir().unwrap();
        write_idx_pair(dir2.path(), 2, 2, 2, &[0, 1]);
        // corrupt the images magic
        let p = dir2.path().join("t-images-idx3-ubyte");
        let mut bytes = std::fs::read(&p).unwrap();
        bytes[3] = 0xFF;
        std::fs::write(&p, bytes).unwrap();
        let err = load_dataset(dir2.path(), DatasetFormat::Idx).unwrap_err();
        assert!(matches!(err, Error::Parse { .. }), "{err}");
    }

    #[test]
    fn cifar_binary_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let mut rec = vec![7u8];
        rec.extend((0..3072).map(|i| (i % 251) as u8));
        std::fs::write(dir.path().join("data_batch_1.bin"), &rec).unwrap();
        let d = load_dataset(dir.path(), DatasetFormat::CifarBinary).unwrap();
        assert_eq!(d.len(), 1);
        assert_eq!(d.examples()[0].label, 7);
        assert_eq!(d.image_shape(), (32, 32, 3));
        // red plane first: pixel (0,1) red channel is byte index 1
        assert_eq!(d.examples()[0].image.pixels()[[0, 1, 0]], 1.0 / 255.0);
        // green plane: byte 1024 + 0
        assert_eq!(
            d.examples()[0].image.pixels()[[0, 0, 1]],
            (1024 % 251) as f64 / 255.0
        );
    }

    #[test]
    fn cifar_binary_rejects_truncation() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("data_batch_1.bin"), vec![0u8; 100]).unwrap();
        let err = load_dataset(dir.path(), DatasetFormat::CifarBinary).unwrap_err();
        assert!(matches!(err, Error::Parse { .. }), "{err}");
    }

    #[test]
    fn image_folder_empty_dir_is_validation_error() {
        let dir = tempfile::tempdir().unwrap();
        let err = load_dataset(dir.path(), DatasetFormat::ImageFolder).unwrap_err();
        assert!(matches!(err, Error::Validation(_)), "{err}");
    }

    #[test]
    fn image_folder_roundtrip_byte_exact() {
        // 4 images, 2 classes, pixel values chosen as exact multiples of 1/255.
        let dir = tempfile::tempdir().unwrap();
        for (class, name) in ["a", "b"].iter().enumerate() {
            let class_dir = dir.path().join(name);
            std::fs::create_dir(&class_dir).unwrap();
            for i in 0..2 {
                let mut a = Array3::<f64>::zeros((3, 3, 1));
                for (j, v) in a.iter_mut().enumerate() {
                    *v = (((class * 40 + i * 11 + j * 7) % 256) as f64) / 255.0;
                }
                let img = Image::new(a).unwrap();
                save_png(&img, &class_dir.join(format!("img{i}.png"))).unwrap();
            }
        }
        let d = load_dataset(dir.path(), DatasetFormat::ImageFolder).unwrap();
        assert_eq!(d.len(), 4);
        assert_eq!(d.class_count(), 2);
        // order: class dir "a" then "b", files sorted; verify exact values
        for (i, ex) in d.examples().iter().enumerate() {
            let class = i / 2;
            let file = i % 2;
            assert_eq!(ex.label, class);
            for (j, &v) in ex.image.pixels().iter().enumerate() {
                let want = (((class * 40 + file * 11 + j * 7) % 256) as f64) / 255.0;
                assert_eq!(v, want, "example {i} pixel {j}");
            }
        }
    }
}
