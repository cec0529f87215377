//! MNIST ingestion from the IDX binary format.
//!
//! Files are big-endian: a 4-byte magic (`0x00000803` for images,
//! `0x00000801` for labels), one 4-byte size per dimension, then raw bytes.

use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::tensor::Matrix;

pub const IMAGE_MAGIC: u32 = 0x0000_0803;
pub const LABEL_MAGIC: u32 = 0x0000_0801;
pub const IMAGE_SIDE: usize = 28;
pub const PIXELS: usize = IMAGE_SIDE * IMAGE_SIDE;
pub const CLASSES: usize = 10;

/// Environment variable that overrides the MNIST directory.
pub const DATA_DIR_ENV: &str = "PLASTICITY_DATA_DIR";
pub const TRAIN_IMAGES: &str = "train-images-idx3-ubyte";
pub const TRAIN_LABELS: &str = "train-labels-idx1-ubyte";

/// Raw `N × 784` image bytes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawImages {
    pub count: usize,
    pub pixels: Vec<u8>,
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
    path: &'a Path,
}

impl<'a> Reader<'a> {
    fn err(&self, offset: usize, message: impl Into<String>) -> Error {
        Error::Parse {
            path: self.path.to_path_buf(),
            offset: offset as u64,
            message: message.into(),
        }
    }

    fn u32(&mut self) -> Result<u32> {
        let end = self.pos + 4;
        let chunk = self
            .bytes
            .get(self.pos..end)
            .ok_or_else(|| self.err(self.bytes.len(), "truncated header"))?;
        self.pos = end;
        Ok(u32::from_be_bytes(chunk.try_into().expect("four bytes")))
    }

    fn body(&mut self, len: usize) -> Result<&'a [u8]> {
        let available = self.bytes.len() - self.pos;
        if available < len {
            return Err(self.err(
                self.bytes.len(),
                format!("truncated data: expected {len} bytes, found {available}"),
            ));
        }
        if available > len {
            return Err(self.err(self.pos + len, format!("{} trailing bytes", available - len)));
        }
        let out = &self.bytes[self.pos..self.pos + len];
        self.pos += len;
        Ok(out)
    }
}

pub fn parse_idx_images(bytes: &[u8], path: &Path) -> Result<RawImages> {
    let mut r = Reader { bytes, pos: 0, path };
    let magic = r.u32()?;
    if magic != IMAGE_MAGIC {
        return Err(r.err(0, format!("expected image magic 0x{IMAGE_MAGIC:08x}, found 0x{magic:08x}")));
    }
    let count = r.u32()? as usize;
    let rows = r.u32()? as usize;
    if rows != IMAGE_SIDE {
        return Err(r.err(8, format!("expected {IMAGE_SIDE} rows per image, found {rows}")));
    }
    let cols = r.u32()? as usize;
    if cols != IMAGE_SIDE {
        return Err(r.err(12, format!("expected {IMAGE_SIDE} columns per image, found {cols}")));
    }
    let pixels = r.body(count * PIXELS)?.to_vec();
    Ok(RawImages { count, pixels })
}

pub fn parse_idx_labels(bytes: &[u8], path: &Path) -> Result<Vec<u8>> {
    let mut r = Reader { bytes, pos: 0, path };
    let magic = r.u32()?;
    if magic != LABEL_MAGIC {
        return Err(r.err(0, format!("expected label magic 0x{LABEL_MAGIC:08x}, found 0x{magic:08x}")));
    }
    let count = r.u32()? as usize;
    let start = r.pos;
    let labels = r.body(count)?;
    if let Some(i) = labels.iter().position(|&l| l as usize >= CLASSES) {
        return Err(r.err(start + i, format!("label {} is not a digit", labels[i])));
    }
    Ok(labels.to_vec())
}

pub fn load_idx_images(path: impl AsRef<Path>) -> Result<RawImages> {
    let path = path.as_ref();
    parse_idx_images(&fs::read(path)?, path)
}

pub fn load_idx_labels(path: impl AsRef<Path>) -> Result<Vec<u8>> {
    let path = path.as_ref();
    parse_idx_labels(&fs::read(path)?, path)
}

pub fn encode_idx_images(images: &RawImages) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + images.pixels.len());
    out.extend_from_slice(&IMAGE_MAGIC.to_be_bytes());
    out.extend_from_slice(&(images.count as u32).to_be_bytes());
    out.extend_from_slice(&(IMAGE_SIDE as u32).to_be_bytes());
    out.extend_from_slice(&(IMAGE_SIDE as u32).to_be_bytes());
    out.extend_from_slice(&images.pixels);
    out
}

pub fn encode_idx_labels(labels: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + labels.len());
    out.extend_from_slice(&LABEL_MAGIC.to_be_bytes());
    out.extend_from_slice(&(labels.len() as u32).to_be_bytes());
    out.extend_from_slice(labels);
    out
}

pub fn write_idx_images(path: impl AsRef<Path>, images: &RawImages) -> Result<()> {
    Ok(fs::write(path, encode_idx_images(images))?)
}

pub fn write_idx_labels(path: impl AsRef<Path>, labels: &[u8]) -> Result<()> {
    Ok(fs::write(path, encode_idx_labels(labels))?)
}

/// Labelled images with pixels in `[0, 1]` (byte value / 255).
///
/// Pixels are kept as bytes and scaled on access; the scaling is exact and
/// identical on every read.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pixels: Vec<u8>,
    labels: Vec<u8>,
}

#[inline]
pub fn scale_pixel(p: u8) -> f64 {
    p as f64 / 255.0
}

pub fn make_dataset(images: RawImages, labels: Vec<u8>) -> Result<Dataset> {
    if images.count != labels.len() {
        return Err(Error::Input(format!(
            "{} images but {} labels",
            images.count,
            labels.len()
        )));
    }
    if images.pixels.len() != images.count * PIXELS {
        return Err(Error::Shape(format!(
            "{} pixel bytes for {} images",
            images.pixels.len(),
            images.count
        )));
    }
    Ok(Dataset {
        pixels: images.pixels,
        labels,
    })
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn raw_image(&self, i: usize) -> &[u8] {
        &self.pixels[i * PIXELS..(i + 1) * PIXELS]
    }

    /// The full `N × 784` image matrix.
    pub fn images(&self) -> Matrix {
        Matrix::from_vec(self.len(), PIXELS, self.pixels.iter().map(|&p| scale_pixel(p)).collect())
            .expect("pixel count checked at construction")
    }

    /// Gathers rows `indices`, with output pixel `j` taken from input pixel
    /// `permutation[j]`.
    pub fn gather_permuted(&self, indices: &[usize], permutation: &[usize]) -> (Matrix, Vec<u8>) {
        debug_assert_eq!(permutation.len(), PIXELS);
        let mut x = Matrix::zeros(indices.len(), PIXELS);
        let mut y = Vec::with_capacity(indices.len());
        for (r, &i) in indices.iter().enumerate() {
            let src = self.raw_image(i);
            for (dst, &p) in x.row_mut(r).iter_mut().zip(permutation) {
                *dst = scale_pixel(src[p]);
            }
            y.push(self.labels[i]);
        }
        (x, y)
    }

    pub fn subset(&self, indices: &[usize]) -> Dataset {
        let mut pixels = Vec::with_capacity(indices.len() * PIXELS);
        for &i in indices {
            pixels.extend_from_slice(self.raw_image(i));
        }
        Dataset {
            pixels,
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
        }
    }
}

/// `$PLASTICITY_DATA_DIR` if set, otherwise `data/mnist`.
pub fn default_data_dir() -> PathBuf {
    std::env::var_os(DATA_DIR_ENV)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("data/mnist"))
}

pub fn load_dataset(images: impl AsRef<Path>, labels: impl AsRef<Path>) -> Result<Dataset> {
    make_dataset(load_idx_images(images)?, load_idx_labels(labels)?)
}

/// Loads the 60 000-image training split from `dir`.
pub fn load_mnist_train(dir: impl AsRef<Path>) -> Result<Dataset> {
    let dir = dir.as_ref();
    load_dataset(dir.join(TRAIN_IMAGES), dir.join(TRAIN_LABELS))
}
