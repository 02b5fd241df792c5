//! IDX (MNIST) reader. Layout: big-endian u32 magic, u32 dimension sizes,
//! then unsigned bytes.

use std::fs;
use std::io::{Cursor, Read};
use std::path::Path;

use byteorder::{BigEndian, ReadBytesExt};

use super::{Dataset, Sample};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub const IMAGES_MAGIC: u32 = 0x0000_0803;
pub const LABELS_MAGIC: u32 = 0x0000_0801;

fn format_err(path: &Path, reason: impl Into<String>) -> Error {
    Error::Format { path: path.to_path_buf(), reason: reason.into() }
}

fn read_header(path: &Path, bytes: &[u8], magic: u32, dims: usize) -> Result<(Vec<usize>, usize)> {
    let mut cur = Cursor::new(bytes);
    let truncated = |_| format_err(path, "file too short for IDX header");
    let found = cur.read_u32::<BigEndian>().map_err(truncated)?;
    if found != magic {
        return Err(format_err(path, format!("bad magic number {found:#010x}, expected {magic:#010x}")));
    }
    let sizes = (0..dims)
        .map(|_| cur.read_u32::<BigEndian>().map(|v| v as usize).map_err(truncated))
        .collect::<Result<Vec<_>>>()?;
    Ok((sizes, cur.position() as usize))
}

fn read_file(path: &Path) -> Result<Vec<u8>> {
    let mut bytes = Vec::new();
    fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| format_err(path, format!("cannot read file: {e}")))?;
    Ok(bytes)
}

/// Load an IDX image/label pair. Pixels are scaled to `[0, 1]`; labels must
/// be digits `0..=9`. `limit` keeps only the first `limit` samples.
pub fn load_mnist_idx<T: Scalar>(
    images_path: impl AsRef<Path>,
    labels_path: impl AsRef<Path>,
    limit: Option<usize>,
) -> Result<Dataset<T>> {
    let (images_path, labels_path) = (images_path.as_ref(), labels_path.as_ref());
    let image_bytes = read_file(images_path)?;
    let label_bytes = read_file(labels_path)?;

    let (sizes, offset) = read_header(images_path, &image_bytes, IMAGES_MAGIC, 3)?;
    let (count, rows, cols) = (sizes[0], sizes[1], sizes[2]);
    let pixels = rows * cols;
    if pixels == 0 {
        return Err(format_err(images_path, "image dimensions must be positive"));
    }
    let body = &image_bytes[offset..];
    if body.len() < count * pixels {
        return Err(format_err(
            images_path,
            format!("truncated: header declares {count} images of {pixels} bytes, found {} bytes", body.len()),
        ));
    }

    let (label_sizes, label_offset) = read_header(labels_path, &label_bytes, LABELS_MAGIC, 1)?;
    let label_count = label_sizes[0];
    let labels = &label_bytes[label_offset..];
    if labels.len() < label_count {
        return Err(format_err(
            labels_path,
            format!("truncated: header declares {label_count} labels, found {}", labels.len()),
        ));
    }
    if label_count != count {
        return Err(format_err(
            labels_path,
            format!("{label_count} labels do not match {count} images in {}", images_path.display()),
        ));
    }

    let n = limit.map_or(count, |l| l.min(count));
    if n == 0 {
        return Err(format_err(images_path, "no samples to load"));
    }
    let scale = T::lit(1.0 / 255.0);
    let mut samples = Vec::with_capacity(n);
    for (i, image) in body.chunks_exact(pixels).take(n).enumerate() {
        let label = labels[i] as usize;
        if label > 9 {
            return Err(format_err(labels_path, format!("label {label} at index {i} is not a digit")));
        }
        let features = image.iter().map(|&b| T::from_count(b as usize) * scale).collect();
        samples.push(Sample { features, label });
    }
    Dataset::new(samples, 10)
}

#[cfg(test)]
mod tests {
    use super::*;
    use byteorder::WriteBytesExt;
    use std::io::Write;

    fn write_images(path: &Path, magic: u32, images: &[[u8; 4]], declared: u32) {
        let mut f = fs::File::create(path).unwrap();
        f.write_u32::<BigEndian>(magic).unwrap();
        f.write_u32::<BigEndian>(declared).unwrap();
        f.write_u32::<BigEndian>(2).unwrap();
        f.write_u32::<BigEndian>(2).unwrap();
        for img in images {
            f.write_all(img).unwrap();
        }
    }

    fn write_labels(path: &Path, magic: u32, labels: &[u8], declared: u32) {
        let mut f = fs::File::create(path).unwrap();
        f.write_u32::<BigEndian>(magic).unwrap();
        f.write_u32::<BigEndian>(declared).unwrap();
        f.write_all(labels).unwrap();
    }

    #[test]
    fn reads_well_formed_pair_with_limit() {
        let dir = tempfile::tempdir().unwrap();
        let (img, lbl) = (dir.path().join("img"), dir.path().join("lbl"));
        write_images(&img, IMAGES_MAGIC, &[[0, 255, 51, 0], [255, 255, 0, 0], [1, 2, 3, 4]], 3);
        write_labels(&lbl, LABELS_MAGIC, &[7, 0, 9], 3);

        let d: Dataset<f64> = load_mnist_idx(&img, &lbl, None).unwrap();
        assert_eq!(d.len(), 3);
        assert_eq!(d.dim(), 4);
        assert_eq!(d.get(0).features, vec![0.0, 1.0, 0.2, 0.0]);
        assert_eq!(d.get(0).label, 7);

        let d: Dataset<f64> = load_mnist_idx(&img, &lbl, Some(2)).unwrap();
        assert_eq!(d.len(), 2);
    }

    #[test]
    fn bad_magic_names_the_file() {
        let dir = tempfile::tempdir().unwrap();
        let (img, lbl) = (dir.path().join("img"), dir.path().join("lbl"));
        write_images(&img, 0x0000_0804, &[[0; 4]], 1);
        write_labels(&lbl, LABELS_MAGIC, &[1], 1);
        match load_mnist_idx::<f64>(&img, &lbl, None) {
            Err(Error::Format { path, reason }) => {
                assert_eq!(path, img);
                assert!(reason.contains("magic"));
            }
            other => panic!("expected format error, got {other:?}"),
        }
    }

    #[test]
    fn fewer_labels_than_images_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        let (img, lbl) = (dir.path().join("img"), dir.path().join("lbl"));
        write_images(&img, IMAGES_MAGIC, &[[0; 4], [1; 4]], 2);
        write_labels(&lbl, LABELS_MAGIC, &[1], 1);
        match load_mnist_idx::<f64>(&img, &lbl, None) {
            Err(Error::Format { path, .. }) => assert_eq!(path, lbl),
            other => panic!("expected format error, got {other:?}"),
        }
    }

    #[test]
    fn truncated_files_are_errors() {
        let dir = tempfile::tempdir().unwrap();
        let (img, lbl) = (dir.path().join("img"), dir.path().join("lbl"));
        write_images(&img, IMAGES_MAGIC, &[[0; 4]], 2);
        write_labels(&lbl, LABELS_MAGIC, &[1, 2], 2);
        assert!(matches!(load_mnist_idx::<f64>(&img, &lbl, None), Err(Error::Format { .. })));

        write_images(&img, IMAGES_MAGIC, &[[0; 4], [0; 4]], 2);
        write_labels(&lbl, LABELS_MAGIC, &[1], 2);
        assert!(matches!(load_mnist_idx::<f64>(&img, &lbl, None), Err(Error::Format { .. })));

        fs::write(&img, [0u8, 0]).unwrap();
        assert!(matches!(load_mnist_idx::<f64>(&img, &lbl, None), Err(Error::Format { .. })));
    }

    #[test]
    fn missing_file_is_a_format_error() {
        let dir = tempfile::tempdir().unwrap();
        let r = load_mnist_idx::<f64>(dir.path().join("nope"), dir.path().join("nope2"), None);
        assert!(matches!(r, Err(Error::Format { .. })));
    }
}
