//! Flat binary tensor files.
//!
//! Layout (all integers little-endian):
//!   magic   4 bytes  "OTN1"
//!   dtype   u8       1 = f64, 3 = u32
//!   rank    u8
//!   dims    rank x u64
//!   payload row-major element bytes
//!
//! Each tensor file may be accompanied by a JSON sidecar (`<stem>.json`)
//! carrying provenance: distribution tag, seed, creation parameters.

use crate::{Error, Result};
use ndarray::{ArrayD, IxDyn};
use serde::{Deserialize, Serialize};
use std::io::{Read, Write};
use std::path::Path;

const MAGIC: &[u8; 4] = b"OTN1";
const DTYPE_F64: u8 = 1;
const DTYPE_U32: u8 = 3;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TensorHeader {
    pub dtype: u8,
    pub dims: Vec<usize>,
}

fn write_header(w: &mut impl Write, dtype: u8, dims: &[usize]) -> std::io::Result<()> {
    w.write_all(MAGIC)?;
    w.write_all(&[dtype, dims.len() as u8])?;
    for &d in dims {
        w.write_all(&(d as u64).to_le_bytes())?;
    }
    Ok(())
}

fn read_header(r: &mut impl Read, path: &Path, offset: &mut u64) -> Result<TensorHeader> {
    let mut magic = [0u8; 4];
    read_exact_at(r, &mut magic, path, offset)?;
    if &magic != MAGIC {
        return Err(Error::Parse {
            path: path.into(),
            offset: 0,
            reason: format!("bad magic {magic:?}, expected {MAGIC:?}"),
        });
    }
    let mut meta = [0u8; 2];
    read_exact_at(r, &mut meta, path, offset)?;
    let (dtype, rank) = (meta[0], meta[1] as usize);
    let mut dims = Vec::with_capacity(rank);
    for _ in 0..rank {
        let mut b = [0u8; 8];
        read_exact_at(r, &mut b, path, offset)?;
        dims.push(u64::from_le_bytes(b) as usize);
    }
    Ok(TensorHeader { dtype, dims })
}

fn read_exact_at(r: &mut impl Read, buf: &mut [u8], path: &Path, offset: &mut u64) -> Result<()> {
    r.read_exact(buf).map_err(|e| Error::Parse {
        path: path.into(),
        offset: *offset,
        reason: format!("unexpected end of file: {e}"),
    })?;
    *offset += buf.len() as u64;
    Ok(())
}

pub fn write_tensor_f64(path: &Path, tensor: &ArrayD<f64>) -> Result<()> {
    let mut buf = Vec::with_capacity(16 + tensor.len() * 8);
    write_header(&mut buf, DTYPE_F64, tensor.shape()).expect("vec write");
    // Standard (row-major) iteration order regardless of memory layout.
    for &v in tensor.iter() {
        buf.extend_from_slice(&v.to_bits().to_le_bytes());
    }
    std::fs::write(path, buf).map_err(|e| Error::io(path, e))
}

pub fn read_tensor_f64(path: &Path) -> Result<ArrayD<f64>> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let mut cursor = std::io::Cursor::new(&bytes);
    let mut offset = 0u64;
    let header = read_header(&mut cursor, path, &mut offset)?;
    if header.dtype != DTYPE_F64 {
        return Err(Error::Parse {
            path: path.into(),
            offset: 4,
            reason: format!("dtype {} is not f64", header.dtype),
        });
    }
    let n: usize = header.dims.iter().product();
    let mut data = Vec::with_capacity(n);
    for _ in 0..n {
        let mut b = [0u8; 8];
        read_exact_at(&mut cursor, &mut b, path, &mut offset)?;
        data.push(f64::from_bits(u64::from_le_bytes(b)));
    }
    ArrayD::from_shape_vec(IxDyn(&header.dims), data)
        .map_err(|e| Error::validation(format!("tensor shape error: {e}")))
}

pub fn write_tensor_u32(path: &Path, dims: &[usize], data: &[u32]) -> Result<()> {
    debug_assert_eq!(dims.iter().product::<usize>(), data.len());
    let mut buf = Vec::with_capacity(16 + data.len() * 4);
    write_header(&mut buf, DTYPE_U32, dims).expect("vec write");
    for &v in data {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    std::fs::write(path, buf).map_err(|e| Error::io(path, e))
}

pub fn read_tensor_u32(path: &Path) -> Result<(Vec<usize>, Vec<u32>)> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let mut cursor = std::io::Cursor::new(&bytes);
    let mut offset = 0u64;
    let header = read_header(&mut cursor, path, &mut offset)?;
    if header.dtype != DTYPE_U32 {
        return Err(Error::Parse {
            path: path.into(),
            offset: 4,
            reason: format!("dtype {} is not u32", header.dtype),
        });
    }
    let n: usize = header.dims.iter().product();
    let mut data = Vec::with_capacity(n);
    for _ in 0..n {
        let mut b = [0u8; 4];
        read_exact_at(&mut cursor, &mut b, path, &mut offset)?;
        data.push(u32::from_le_bytes(b));
    }
    Ok((header.dims, data))
}

/// Sidecar metadata stored next to a persisted dataset.
#[derive(Debug, Serialize, Deserialize)]
struct DatasetMeta {
    tag: String,
    class_count: usize,
    fingerprint: String,
}

pub(super) fn save_dataset(d: &super::Dataset, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let (h, w, c) = d.image_shape();
    let n = d.len();
    let mut pixels = ArrayD::zeros(IxDyn(&[n, h, w, c]));
    for (i, ex) in d.examples().iter().enumerate() {
        for ((y, x, ch), &v) in ex.image.pixels().indexed_iter() {
            pixels[[i, y, x, ch]] = v;
        }
    }
    let labels: Vec<u32> = d.examples().iter().map(|e| e.label as u32).collect();
    write_tensor_f64(&dir.join("images.otn"), &pixels)?;
    write_tensor_u32(&dir.join("labels.otn"), &[n], &labels)?;
    let meta = DatasetMeta {
        tag: d.tag().as_str().to_string(),
        class_count: d.class_count(),
        fingerprint: d.fingerprint(),
    };
    let json = serde_json::to_vec_pretty(&meta)?;
    std::fs::write(dir.join("meta.json"), json).map_err(|e| Error::io(dir, e))
}

pub(super) fn load_dataset_dir(dir: &Path) -> Result<super::Dataset> {
    let meta_path = dir.join("meta.json");
    let meta_bytes = std::fs::read(&meta_path).map_err(|e| Error::io(&meta_path, e))?;
    let meta: DatasetMeta = serde_json::from_slice(&meta_bytes)?;
    let pixels = read_tensor_f64(&dir.join("images.otn"))?;
    let (label_dims, labels) = read_tensor_u32(&dir.join("labels.otn"))?;
    if pixels.ndim() != 4 {
        return Err(Error::shape("rank-4 image tensor", format!("rank {}", pixels.ndim())));
    }
    let n = pixels.shape()[0];
    if label_dims != [n] {
        return Err(Error::shape(format!("[{n}] labels"), format!("{label_dims:?}")));
    }
    let (h, w, c) = (pixels.shape()[1], pixels.shape()[2], pixels.shape()[3]);
    let mut examples = Vec::with_capacity(n);
    for i in 0..n {
        let mut img = ndarray::Array3::<f64>::zeros((h, w, c));
        for y in 0..h {
            for x in 0..w {
                for ch in 0..c {
                    img[[y, x, ch]] = pixels[[i, y, x, ch]];
                }
            }
        }
        examples.push(super::LabeledExample {
            image: super::Image::new(img)?,
            label: labels[i] as usize,
        });
    }
    let d = super::Dataset::new(
        examples,
        meta.class_count,
        super::DistributionTag::new(meta.tag)?,
    )?;
    if d.fingerprint() != meta.fingerprint {
        return Err(Error::FingerprintMismatch {
            context: format!("dataset at {}", dir.display()),
            left: d.fingerprint(),
            right: meta.fingerprint,
        });
    }
    Ok(d)
}
