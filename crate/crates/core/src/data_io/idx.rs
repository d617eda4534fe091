use std::path::Path;

use super::Dataset;
use crate::error::{Error, Result};

/// Big-endian magic of an unsigned-byte, 3-axis IDX file (images).
pub const IDX_IMAGES_MAGIC: u32 = 0x0000_0803;
/// Big-endian magic of an unsigned-byte, 1-axis IDX file (labels).
pub const IDX_LABELS_MAGIC: u32 = 0x0000_0801;

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
    path: &'a Path,
}

impl Cursor<'_> {
    fn u32(&mut self, what: &str) -> Result<u32> {
        let end = self.pos + 4;
        let chunk = self.bytes.get(self.pos..end).ok_or_else(|| self.truncated(what))?;
        self.pos = end;
        Ok(u32::from_be_bytes(chunk.try_into().expect("slice has length 4")))
    }

    fn take(&mut self, n: usize, what: &str) -> Result<&[u8]> {
        let end = self.pos.checked_add(n).ok_or_else(|| self.truncated(what))?;
        let chunk = self.bytes.get(self.pos..end).ok_or_else(|| self.truncated(what))?;
        self.pos = end;
        Ok(chunk)
    }

    fn truncated(&self, what: &str) -> Error {
        Error::Format {
            path: self.path.to_path_buf(),
            message: format!("file truncated while reading {what} ({} bytes)", self.bytes.len()),
        }
    }

    fn expect_magic(&mut self, magic: u32) -> Result<()> {
        let found = self.u32("magic number")?;
        if found != magic {
            return Err(Error::Format {
                path: self.path.to_path_buf(),
                message: format!("magic number {found:#010x}, expected {magic:#010x}"),
            });
        }
        Ok(())
    }
}

/// Reads an IDX image/label pair (e.g. MNIST). Pixels are scaled to `[0, 1]`
/// and images are flattened row-major.
pub fn load_idx(images_path: impl AsRef<Path>, labels_path: impl AsRef<Path>) -> Result<Dataset> {
    let images_path = images_path.as_ref();
    let labels_path = labels_path.as_ref();
    let image_bytes = std::fs::read(images_path).map_err(|e| Error::io(images_path, e))?;
    let label_bytes = std::fs::read(labels_path).map_err(|e| Error::io(labels_path, e))?;

    let mut images = Cursor { bytes: &image_bytes, pos: 0, path: images_path };
    images.expect_magic(IDX_IMAGES_MAGIC)?;
    let count = images.u32("image count")? as usize;
    let rows = images.u32("row count")? as usize;
    let cols = images.u32("column count")? as usize;

    let mut labels = Cursor { bytes: &label_bytes, pos: 0, path: labels_path };
    labels.expect_magic(IDX_LABELS_MAGIC)?;
    let label_count = labels.u32("label count")? as usize;
    if label_count != count {
        return Err(Error::Format {
            path: labels_path.to_path_buf(),
            message: format!("{label_count} labels for {count} images in {}", images_path.display()),
        });
    }

    let pixels_per_image = rows * cols;
    if pixels_per_image == 0 {
        return Err(Error::Format { path: images_path.to_path_buf(), message: "images have no pixels".into() });
    }
    let raw = images.take(count * pixels_per_image, "pixel data")?;
    let features: Vec<Vec<f64>> =
        raw.chunks(pixels_per_image).map(|img| img.iter().map(|&p| f64::from(p) / 255.0).collect()).collect();
    let label_values: Vec<usize> = labels.take(count, "label data")?.iter().map(|&l| usize::from(l)).collect();

    let class_count = label_values.iter().max().map_or(0, |m| m + 1);
    let name = images_path.file_stem().map_or_else(|| "idx".into(), |s| s.to_string_lossy().into_owned());
    Dataset::new(features, label_values, class_count, name)
        .map_err(|e| Error::Format { path: images_path.to_path_buf(), message: e.to_string() })
}
