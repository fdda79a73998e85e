//! IDX-format dataset loading (the MNIST file format).
//!
//! Both files are big-endian: images carry magic 0x00000803 followed by
//! count/rows/cols and raw pixels; labels carry magic 0x00000801 followed
//! by count and raw class bytes.

use std::fs;
use std::path::Path;

use crate::encoding::GrayImage;
use crate::error::{Error, Result};

pub const IMAGES_MAGIC: u32 = 0x0000_0803;
pub const LABELS_MAGIC: u32 = 0x0000_0801;

/// One split: images paired index-for-index with class labels in `[0, 9]`.
#[derive(Debug, Clone)]
pub struct DatasetHalf {
    pub images: Vec<GrayImage>,
    pub labels: Vec<u8>,
}

impl DatasetHalf {
    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }
}

/// Train and test splits.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub train: DatasetHalf,
    pub test: DatasetHalf,
}

fn be_u32(bytes: &[u8], offset: usize, what: &str) -> Result<u32> {
    let end = offset + 4;
    if bytes.len() < end {
        return Err(Error::format(format!(
            "truncated IDX header while reading {what}"
        )));
    }
    Ok(u32::from_be_bytes(bytes[offset..end].try_into().unwrap()))
}

fn read_file(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::format(format!("cannot read {}: {e}", path.display())))
}

/// Parse an IDX image file.
pub fn load_images(path: &Path) -> Result<Vec<GrayImage>> {
    let bytes = read_file(path)?;
    let magic = be_u32(&bytes, 0, "images magic")?;
    if magic != IMAGES_MAGIC {
        return Err(Error::format(format!(
            "{}: image magic 0x{magic:08x}, expected 0x{IMAGES_MAGIC:08x}",
            path.display()
        )));
    }
    let count = be_u32(&bytes, 4, "image count")? as usize;
    let rows = be_u32(&bytes, 8, "image rows")? as usize;
    let cols = be_u32(&bytes, 12, "image cols")? as usize;
    if rows == 0 || cols == 0 {
        return Err(Error::format(format!(
            "{}: zero image dimensions",
            path.display()
        )));
    }
    let pixels = &bytes[16.min(bytes.len())..];
    let expected = count
        .checked_mul(rows * cols)
        .ok_or_else(|| Error::format("image payload size overflows"))?;
    if pixels.len() != expected {
        return Err(Error::format(format!(
            "{}: payload holds {} bytes, header promises {expected}",
            path.display(),
            pixels.len()
        )));
    }
    Ok(pixels
        .chunks_exact(rows * cols)
        .map(|chunk| GrayImage {
            rows,
            cols,
            pixels: chunk.to_vec(),
        })
        .collect())
}

/// Parse an IDX label file; every label must be a digit class 0–9.
pub fn load_labels(path: &Path) -> Result<Vec<u8>> {
    let bytes = read_file(path)?;
    let magic = be_u32(&bytes, 0, "labels magic")?;
    if magic != LABELS_MAGIC {
        return Err(Error::format(format!(
            "{}: label magic 0x{magic:08x}, expected 0x{LABELS_MAGIC:08x}",
            path.display()
        )));
    }
    let count = be_u32(&bytes, 4, "label count")? as usize;
    let labels = &bytes[8.min(bytes.len())..];
    if labels.len() != count {
        return Err(Error::format(format!(
            "{}: payload holds {} labels, header promises {count}",
            path.display(),
            labels.len()
        )));
    }
    if let Some(&bad) = labels.iter().find(|&&l| l > 9) {
        return Err(Error::format(format!(
            "{}: label {bad} outside [0, 9]",
            path.display()
        )));
    }
    Ok(labels.to_vec())
}

/// Load one split and cross-check that images and labels pair up.
pub fn load_mnist(images_path: &Path, labels_path: &Path) -> Result<DatasetHalf> {
    let images = load_images(images_path)?;
    let labels = load_labels(labels_path)?;
    if images.len() != labels.len() {
        return Err(Error::consistency(format!(
            "{} images but {} labels ({} / {})",
            images.len(),
            labels.len(),
            images_path.display(),
            labels_path.display()
        )));
    }
    Ok(DatasetHalf { images, labels })
}

impl Dataset {
    /// Load both splits from a directory holding the four canonical files
    /// (`train-images-idx3-ubyte`, `train-labels-idx1-ubyte`,
    /// `t10k-images-idx3-ubyte`, `t10k-labels-idx1-ubyte`).
    pub fn load_dir(dir: &Path) -> Result<Dataset> {
        Ok(Dataset {
            train: load_mnist(
                &dir.join("train-images-idx3-ubyte"),
                &dir.join("train-labels-idx1-ubyte"),
            )?,
            test: load_mnist(
                &dir.join("t10k-images-idx3-ubyte"),
                &dir.join("t10k-labels-idx1-ubyte"),
            )?,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_idx_images(dir: &Path, name: &str, imgs: &[[u8; 4]]) -> std::path::PathBuf {
        let mut bytes = Vec::new();
        bytes.extend_from_slice(&IMAGES_MAGIC.to_be_bytes());
        bytes.extend_from_slice(&(imgs.len() as u32).to_be_bytes());
        bytes.extend_from_slice(&2u32.to_be_bytes());
        bytes.extend_from_slice(&2u32.to_be_bytes());
        for img in imgs {
            bytes.extend_from_slice(img);
        }
        let path = dir.join(name);
        fs::File::create(&path).unwrap().write_all(&bytes).unwrap();
        path
    }

    fn write_idx_labels(dir: &Path, name: &str, labels: &[u8]) -> std::path::PathBuf {
        let mut bytes = Vec::new();
        bytes.extend_from_slice(&LABELS_MAGIC.to_be_bytes());
        bytes.extend_from_slice(&(labels.len() as u32).to_be_bytes());
        bytes.extend_from_slice(labels);
        let path = dir.join(name);
        fs::File::create(&path).unwrap().write_all(&bytes).unwrap();
        path
    }

    #[test]
    fn fixture_round_trips_pixel_exact() {
        let dir = tempfile::tempdir().unwrap();
        let imgs = write_idx_images(dir.path(), "imgs", &[[0, 64, 128, 255], [1, 2, 3, 4]]);
        let labels = write_idx_labels(dir.path(), "labels", &[7, 3]);
        let half = load_mnist(&imgs, &labels).unwrap();
        assert_eq!(half.len(), 2);
        assert_eq!(half.images[0].pixels, vec![0, 64, 128, 255]);
        assert_eq!(half.images[0].rows, 2);
        assert_eq!(half.images[1].pixel(1, 1), 4);
        assert_eq!(half.labels, vec![7, 3]);
    }

    #[test]
    fn wrong_magic_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad");
        fs::write(&path, 42u32.to_be_bytes()).unwrap();
        let err = load_images(&path).unwrap_err().to_string();
        assert!(err.contains("magic"), "{err}");
        assert!(load_labels(&path).is_err());
    }

    #[test]
    fn truncated_payload_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let imgs = write_idx_images(dir.path(), "imgs", &[[9, 9, 9, 9]]);
        let mut bytes = fs::read(&imgs).unwrap();
        bytes.pop();
        fs::write(&imgs, bytes).unwrap();
        assert!(load_images(&imgs).is_err());
    }

    #[test]
    fn count_mismatch_is_a_consistency_error() {
        let dir = tempfile::tempdir().unwrap();
        let imgs = write_idx_images(dir.path(), "imgs", &[[1, 1, 1, 1], [2, 2, 2, 2]]);
        let labels = write_idx_labels(dir.path(), "labels", &[1]);
        let err = load_mnist(&imgs, &labels).unwrap_err().to_string();
        assert!(err.contains("2 images but 1 labels"), "{err}");
    }

    #[test]
    fn out_of_range_label_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let labels = write_idx_labels(dir.path(), "labels", &[3, 10]);
        assert!(load_labels(&labels).is_err());
    }

    #[test]
    fn missing_file_reports_its_path() {
        let err = load_images(Path::new("/nonexistent/imgs"))
            .unwrap_err()
            .to_string();
        assert!(err.contains("/nonexistent/imgs"), "{err}");
    }
}
