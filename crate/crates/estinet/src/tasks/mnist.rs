//! IDX-format image and label files, read bit-exactly: big-endian headers,
//! magic 0x00000803 for images and 0x00000801 for labels, pixel bytes
//! scaled into [0, 1].

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::DataError;

pub const IMAGE_MAGIC: u32 = 0x0000_0803;
pub const LABEL_MAGIC: u32 = 0x0000_0801;
pub const IMAGE_SIDE: usize = 28;
pub const IMAGE_PIXELS: usize = IMAGE_SIDE * IMAGE_SIDE;

/// A loaded image/label corpus. Pixels are row-major `n x 784` in [0, 1].
#[derive(Debug, Clone)]
pub struct MnistData {
    pub pixels: Vec<f32>,
    pub labels: Vec<u8>,
}

impl MnistData {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn image(&self, i: usize) -> &[f32] {
        &self.pixels[i * IMAGE_PIXELS..(i + 1) * IMAGE_PIXELS]
    }

    /// First `n` items (the desk-scale cap).
    pub fn truncated(mut self, n: usize) -> Self {
        if n < self.len() {
            self.pixels.truncate(n * IMAGE_PIXELS);
            self.labels.truncate(n);
        }
        self
    }
}

fn read_u32_be(r: &mut impl Read, what: &str) -> Result<u32, DataError> {
    let mut buf = [0u8; 4];
    r.read_exact(&mut buf)
        .map_err(|_| DataError::Truncated(what.to_string()))?;
    Ok(u32::from_be_bytes(buf))
}

/// Parse an IDX image/label file pair.
pub fn load_mnist_idx(
    images_path: &Path,
    labels_path: &Path,
) -> Result<MnistData, DataError> {
    let mut ir = BufReader::new(File::open(images_path)?);
    let magic = read_u32_be(&mut ir, "image magic")?;
    if magic != IMAGE_MAGIC {
        return Err(DataError::BadMagic { expected: IMAGE_MAGIC, found: magic });
    }
    let n_images = read_u32_be(&mut ir, "image count")? as usize;
    let rows = read_u32_be(&mut ir, "row count")? as usize;
    let cols = read_u32_be(&mut ir, "column count")? as usize;
    if rows != IMAGE_SIDE || cols != IMAGE_SIDE {
        return Err(DataError::Invalid(format!(
            "expected 28x28 images, file declares {rows}x{cols}"
        )));
    }
    let mut raw = vec![0u8; n_images * rows * cols];
    ir.read_exact(&mut raw)
        .map_err(|_| DataError::Truncated("image data".into()))?;
    let pixels = raw.iter().map(|&b| b as f32 / 255.0).collect();

    let mut lr = BufReader::new(File::open(labels_path)?);
    let magic = read_u32_be(&mut lr, "label magic")?;
    if magic != LABEL_MAGIC {
        return Err(DataError::BadMagic { expected: LABEL_MAGIC, found: magic });
    }
    let n_labels = read_u32_be(&mut lr, "label count")? as usize;
    if n_labels != n_images {
        return Err(DataError::CountMismatch { images: n_images, labels: n_labels });
    }
    let mut labels = vec![0u8; n_labels];
    lr.read_exact(&mut labels)
        .map_err(|_| DataError::Truncated("label data".into()))?;
    if let Some(&bad) = labels.iter().find(|&&l| l > 9) {
        return Err(DataError::Invalid(format!("label {bad} outside 0-9")));
    }
    Ok(MnistData { pixels, labels })
}

/// Write a corpus back out in IDX form (used by the synthetic generator and
/// by tests).
pub fn write_mnist_idx(
    data: &MnistData,
    images_path: &Path,
    labels_path: &Path,
) -> Result<(), DataError> {
    let mut iw = BufWriter::new(File::create(images_path)?);
    iw.write_all(&IMAGE_MAGIC.to_be_bytes())?;
    iw.write_all(&(data.len() as u32).to_be_bytes())?;
    iw.write_all(&(IMAGE_SIDE as u32).to_be_bytes())?;
    iw.write_all(&(IMAGE_SIDE as u32).to_be_bytes())?;
    let raw: Vec<u8> = data
        .pixels
        .iter()
        .map(|&p| (p.clamp(0.0, 1.0) * 255.0).round() as u8)
        .collect();
    iw.write_all(&raw)?;
    iw.flush()?;

    let mut lw = BufWriter::new(File::create(labels_path)?);
    lw.write_all(&LABEL_MAGIC.to_be_bytes())?;
    lw.write_all(&(data.len() as u32).to_be_bytes())?;
    lw.write_all(&data.labels)?;
    lw.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_corpus() -> MnistData {
        let mut pixels = vec![0.0f32; 3 * IMAGE_PIXELS];
        pixels[0] = 1.0; // pixel byte 255
        pixels[800] = 0.5;
        MnistData { pixels, labels: vec![3, 0, 9] }
    }

    #[test]
    fn roundtrip_preserves_counts_and_scaling() {
        let dir = std::env::temp_dir().join("estinet_idx_test");
        std::fs::create_dir_all(&dir).unwrap();
        let ip = dir.join("imgs.idx3");
        let lp = dir.join("labels.idx1");
        write_mnist_idx(&tiny_corpus(), &ip, &lp).unwrap();
        let back = load_mnist_idx(&ip, &lp).unwrap();
        assert_eq!(back.len(), 3);
        assert_eq!(back.labels, vec![3, 0, 9]);
        // Pixel byte 255 scales to exactly 1.0.
        assert_eq!(back.pixels[0], 1.0);
        assert!((back.pixels[800] - 0.5).abs() < 1.0 / 255.0);
    }

    #[test]
    fn wrong_magic_is_rejected_naming_both_values() {
        let dir = std::env::temp_dir().join("estinet_idx_test_magic");
        std::fs::create_dir_all(&dir).unwrap();
        let ip = dir.join("imgs.idx3");
        let lp = dir.join("labels.idx1");
        write_mnist_idx(&tiny_corpus(), &ip, &lp).unwrap();
        // Corrupt the image magic.
        let mut bytes = std::fs::read(&ip).unwrap();
        bytes[3] = 0x99;
        std::fs::write(&ip, &bytes).unwrap();
        let err = load_mnist_idx(&ip, &lp).unwrap_err();
        let msg = err.to_string();
        // 0x00000803 = 2051 expected, corrupted magic 0x00000899 = 2201.
        assert!(msg.contains("2051") && msg.contains("2201"), "message: {msg}");
    }

    #[test]
    fn truncated_file_is_rejected() {
        let dir = std::env::temp_dir().join("estinet_idx_test_trunc");
        std::fs::create_dir_all(&dir).unwrap();
        let ip = dir.join("imgs.idx3");
        let lp = dir.join("labels.idx1");
        write_mnist_idx(&tiny_corpus(), &ip, &lp).unwrap();
        let bytes = std::fs::read(&ip).unwrap();
        std::fs::write(&ip, &bytes[..bytes.len() - 10]).unwrap();
        assert!(matches!(
            load_mnist_idx(&ip, &lp),
            Err(DataError::Truncated(_))
        ));
    }

    #[test]
    fn count_mismatch_is_rejected() {
        let dir = std::env::temp_dir().join("estinet_idx_test_count");
        std::fs::create_dir_all(&dir).unwrap();
        let ip = dir.join("imgs.idx3");
        let lp = dir.join("labels.idx1");
        write_mnist_idx(&tiny_corpus(), &ip, &lp).unwrap();
        // Rewrite labels with one fewer item.
        let two = MnistData {
            pixels: vec![0.0; 2 * IMAGE_PIXELS],
            labels: vec![1, 2],
        };
        let ip2 = dir.join("imgs2.idx3");
        write_mnist_idx(&two, &ip2, &lp).unwrap();
        assert!(matches!(
            load_mnist_idx(&ip, &lp),
            Err(DataError::CountMismatch { images: 3, labels: 2 })
        ));
    }
}
