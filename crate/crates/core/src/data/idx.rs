//! IDX container reader for MNIST-style files.
//!
//! Layout: big-endian `u32` magic (`0x00000803` for rank-3 unsigned-byte
//! images, `0x00000801` for rank-1 labels), one big-endian `u32` per
//! dimension, then the raw bytes in row-major order.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

use super::Dataset;

pub const IDX_IMAGES_MAGIC: u32 = 0x0000_0803;
pub const IDX_LABELS_MAGIC: u32 = 0x0000_0801;

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn u32(&mut self, what: &str) -> Result<u32> {
        let end = self.pos + 4;
        let chunk = self.bytes.get(self.pos..end).ok_or_else(|| Error::Format {
            offset: self.pos as u64,
            message: format!("file ends inside the {what} field"),
        })?;
        self.pos = end;
        Ok(u32::from_be_bytes(chunk.try_into().expect("4-byte slice")))
    }

    fn payload(&mut self, len: usize) -> Result<&'a [u8]> {
        let available = self.bytes.len() - self.pos;
        if available < len {
            return Err(Error::Format {
                offset: self.bytes.len() as u64,
                message: format!("expected {len} payload bytes, found {available}"),
            });
        }
        let out = &self.bytes[self.pos..self.pos + len];
        self.pos += len;
        Ok(out)
    }
}

fn magic(r: &mut Reader<'_>, expected: u32) -> Result<()> {
    let got = r.u32("magic")?;
    if got != expected {
        return Err(Error::Format {
            offset: 0,
            message: format!("magic number {got:#010x}, expected {expected:#010x}"),
        });
    }
    Ok(())
}

/// Image count, rows, cols and the raw pixel bytes.
pub fn parse_idx_images(bytes: &[u8]) -> Result<(usize, usize, usize, &[u8])> {
    let mut r = Reader { bytes, pos: 0 };
    magic(&mut r, IDX_IMAGES_MAGIC)?;
    let count = r.u32("image count")? as usize;
    let rows = r.u32("row count")? as usize;
    let cols = r.u32("column count")? as usize;
    let pixels = r.payload(count * rows * cols)?;
    Ok((count, rows, cols, pixels))
}

pub fn parse_idx_labels(bytes: &[u8]) -> Result<&[u8]> {
    let mut r = Reader { bytes, pos: 0 };
    magic(&mut r, IDX_LABELS_MAGIC)?;
    let count = r.u32("label count")? as usize;
    r.payload(count)
}

fn read(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

fn in_file(path: &Path, err: Error) -> Error {
    match err {
        Error::Format { offset, message } => Error::Format {
            offset,
            message: format!("{}: {message}", path.display()),
        },
        other => other,
    }
}

/// Images scaled to `[0, 1]`, one flattened row per image.
pub fn load_idx_images<T: Scalar>(path: impl AsRef<Path>) -> Result<(Vec<T>, usize, usize)> {
    let path = path.as_ref();
    let bytes = read(path)?;
    let (count, rows, cols, pixels) = parse_idx_images(&bytes).map_err(|e| in_file(path, e))?;
    let scale = T::from_f64_lossy(1.0 / 255.0);
    let features = pixels.iter().map(|&p| T::from_usize_lossy(p as usize) * scale).collect();
    Ok((features, count, rows * cols))
}

pub fn load_idx_labels(path: impl AsRef<Path>) -> Result<Vec<usize>> {
    let path = path.as_ref();
    let bytes = read(path)?;
    let labels = parse_idx_labels(&bytes).map_err(|e| in_file(path, e))?;
    Ok(labels.iter().map(|&b| b as usize).collect())
}

/// Image/label file pair as a dataset with at least 10 classes.
pub fn load_idx<T: Scalar>(
    images_path: impl AsRef<Path>,
    labels_path: impl AsRef<Path>,
) -> Result<Dataset<T>> {
    let (features, count, width) = load_idx_images::<T>(&images_path)?;
    let labels = load_idx_labels(&labels_path)?;
    if labels.len() != count {
        return Err(Error::Format {
            offset: 4,
            message: format!(
                "{}: {} labels for {count} images",
                labels_path.as_ref().display(),
                labels.len()
            ),
        });
    }
    if width == 0 {
        return Err(Error::Format {
            offset: 8,
            message: format!("{}: zero-sized images", images_path.as_ref().display()),
        });
    }
    let num_classes = labels.iter().max().map_or(10, |&m| (m + 1).max(10));
    Dataset::new(features, labels, width, num_classes)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn images(count: u32, rows: u32, cols: u32, payload: &[u8]) -> Vec<u8> {
        let mut v = Vec::new();
        for w in [IDX_IMAGES_MAGIC, count, rows, cols] {
            v.extend_from_slice(&w.to_be_bytes());
        }
        v.extend_from_slice(payload);
        v
    }

    fn labels(payload: &[u8]) -> Vec<u8> {
        let mut v = IDX_LABELS_MAGIC.to_be_bytes().to_vec();
        v.extend_from_slice(&(payload.len() as u32).to_be_bytes());
        v.extend_from_slice(payload);
        v
    }

    #[test]
    fn parses_tiny_images() {
        let bytes = images(2, 1, 2, &[0, 255, 51, 102]);
        let (n, r, c, px) = parse_idx_images(&bytes).unwrap();
        assert_eq!((n, r, c), (2, 1, 2));
        assert_eq!(px, &[0, 255, 51, 102]);
    }

    #[test]
    fn bad_magic_reports_offset_zero() {
        let mut bytes = images(1, 1, 1, &[0]);
        bytes[3] = 0x01;
        match parse_idx_images(&bytes) {
            Err(Error::Format { offset: 0, .. }) => {}
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn truncated_header_and_payload() {
        let bytes = images(3, 2, 2, &[1, 2, 3]);
        match parse_idx_images(&bytes[..10]) {
            Err(Error::Format { offset: 8, .. }) => {}
            other => panic!("{other:?}"),
        }
        match parse_idx_images(&bytes) {
            Err(Error::Format { offset, .. }) => assert_eq!(offset, bytes.len() as u64),
            other => panic!("{other:?}"),
        }
        let l = labels(&[1, 2, 3]);
        assert!(parse_idx_labels(&l[..l.len() - 1]).is_err());
    }

    #[test]
    fn load_pair_from_disk() {
        let dir = tempfile::tempdir().unwrap();
        let img = dir.path().join("img");
        let lab = dir.path().join("lab");
        fs::write(&img, images(2, 1, 2, &[0, 255, 51, 102])).unwrap();
        fs::write(&lab, labels(&[7, 3])).unwrap();
        let d: Dataset<f64> = load_idx(&img, &lab).unwrap();
        assert_eq!((d.len(), d.input_dim(), d.num_classes()), (2, 2, 10));
        assert_eq!(d.row(0), &[0.0, 1.0]);
        assert!((d.row(1)[0] - 0.2).abs() < 1e-12);
        assert_eq!(d.labels(), &[7, 3]);

        fs::write(&lab, labels(&[7])).unwrap();
        assert!(matches!(load_idx::<f64>(&img, &lab), Err(Error::Format { .. })));
    }

    #[test]
    fn header_only_is_empty() {
        let dir = tempfile::tempdir().unwrap();
        let img = dir.path().join("img");
        let lab = dir.path().join("lab");
        fs::write(&img, images(0, 28, 28, &[])).unwrap();
        fs::write(&lab, labels(&[])).unwrap();
        let d: Dataset<f64> = load_idx(&img, &lab).unwrap();
        assert!(d.is_empty());
        assert_eq!(d.input_dim(), 784);
    }

    #[test]
    fn missing_file_is_io_error() {
        assert!(matches!(
            load_idx::<f64>("/nonexistent/a", "/nonexistent/b"),
            Err(Error::Io { .. })
        ));
    }
}
