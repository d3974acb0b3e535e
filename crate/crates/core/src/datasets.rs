//! Synthetic benchmark distributions and the MNIST IDX reader.

use std::collections::HashSet;
use std::fs;
use std::path::Path;

use ndarray::Array2;
use rand::Rng;

use crate::distribution::DataDistribution;
use crate::error::{Error, Result};

/// `L` cyclic shifts of a run of `B` ones (zeros when `inverted`).
pub fn shifting_bar(length: usize, bar: usize, inverted: bool) -> Result<DataDistribution> {
    if bar == 0 || bar >= length {
        return Err(Error::InvalidArgument(format!(
            "shifting bar needs 0 < B < L (got L={length}, B={bar})"
        )));
    }
    let patterns = (0..length)
        .map(|start| {
            let mut p = vec![inverted as u8; length];
            for k in 0..bar {
                p[(start + k) % length] = (!inverted) as u8;
            }
            p
        })
        .collect();
    DataDistribution::uniform(patterns)
}

/// Exact distribution of the bars-and-stripes process on a `D × D` grid:
/// every row is switched on with probability 1/2 and the grid is rotated by
/// 90° with probability 1/2. All `2^(D+1)` equally likely outcomes are
/// enumerated and duplicates merged, so the all-zero and all-one grids carry
/// twice the mass of the others.
pub fn bars_and_stripes(side: usize) -> Result<DataDistribution> {
    if side == 0 {
        return Err(Error::InvalidArgument("bars and stripes needs D >= 1".into()));
    }
    if side > 20 {
        return Err(Error::InvalidArgument(format!(
            "bars and stripes with D={side} has too many outcomes"
        )));
    }
    let mut samples = Vec::with_capacity(1 << (side + 1));
    for rotate in [false, true] {
        for rows in 0..(1u32 << side) {
            let mut grid = vec![0u8; side * side];
            for r in 0..side {
                let on = (rows >> (side - 1 - r)) & 1 == 1;
                for c in 0..side {
                    let (row, col) = if rotate { (c, r) } else { (r, c) };
                    grid[row * side + col] = on as u8;
                }
            }
            samples.push(grid);
        }
    }
    DataDistribution::from_samples(samples)
}

/// `n_d` distinct uniformly drawn binary vectors of length `n`.
pub fn random_support<R: Rng + ?Sized>(
    n: usize,
    support: usize,
    rng: &mut R,
) -> Result<DataDistribution> {
    if support == 0 {
        return Err(Error::InvalidArgument("support size must be positive".into()));
    }
    if n < 64 && support as u128 > 1u128 << n {
        return Err(Error::InvalidArgument(format!(
            "cannot draw {support} distinct vectors from 2^{n}"
        )));
    }
    let mut seen = HashSet::with_capacity(support);
    let mut patterns = Vec::with_capacity(support);
    while patterns.len() < support {
        let p: Vec<u8> = (0..n).map(|_| rng.gen::<bool>() as u8).collect();
        if seen.insert(p.clone()) {
            patterns.push(p);
        }
    }
    DataDistribution::uniform(patterns)
}

pub const IDX_IMAGES_MAGIC: u32 = 2051;
pub const IDX_LABELS_MAGIC: u32 = 2049;

/// Binarised MNIST images with their labels.
#[derive(Debug, Clone)]
pub struct MnistSet {
    /// `count × (rows·cols)` matrix of `{0,1}` pixels.
    pub images: Array2<f64>,
    pub labels: Vec<u8>,
    pub rows: usize,
    pub cols: usize,
}

impl MnistSet {
    pub fn count(&self) -> usize {
        self.labels.len()
    }
}

fn idx_error(path: &Path, message: impl Into<String>) -> Error {
    Error::Idx {
        path: path.to_path_buf(),
        message: message.into(),
    }
}

fn read_u32(bytes: &[u8], offset: usize, path: &Path) -> Result<u32> {
    bytes
        .get(offset..offset + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or_else(|| idx_error(path, "truncated header"))
}

/// Parse an IDX image file. Returns `(count, rows, cols, pixels)`.
pub fn parse_idx_images(bytes: &[u8], path: &Path) -> Result<(usize, usize, usize, Vec<u8>)> {
    let magic = read_u32(bytes, 0, path)?;
    if magic != IDX_IMAGES_MAGIC {
        return Err(idx_error(
            path,
            format!("bad magic number {magic} (expected {IDX_IMAGES_MAGIC})"),
        ));
    }
    let count = read_u32(bytes, 4, path)? as usize;
    let rows = read_u32(bytes, 8, path)? as usize;
    let cols = read_u32(bytes, 12, path)? as usize;
    let need = count * rows * cols;
    let body = &bytes[16..];
    if body.len() < need {
        return Err(idx_error(
            path,
            format!("truncated: {} pixel bytes, header declares {need}", body.len()),
        ));
    }
    Ok((count, rows, cols, body[..need].to_vec()))
}

/// Parse an IDX label file.
pub fn parse_idx_labels(bytes: &[u8], path: &Path) -> Result<Vec<u8>> {
    let magic = read_u32(bytes, 0, path)?;
    if magic != IDX_LABELS_MAGIC {
        return Err(idx_error(
            path,
            format!("bad magic number {magic} (expected {IDX_LABELS_MAGIC})"),
        ));
    }
    let count = read_u32(bytes, 4, path)? as usize;
    let body = &bytes[8..];
    if body.len() < count {
        return Err(idx_error(
            path,
            format!("truncated: {} label bytes, header declares {count}", body.len()),
        ));
    }
    Ok(body[..count].to_vec())
}

/// Load an MNIST image/label pair, binarising pixels as
/// `pixel / 255 >= threshold`.
pub fn load_mnist(images_path: &Path, labels_path: &Path, threshold: f64) -> Result<MnistSet> {
    let image_bytes = fs::read(images_path)?;
    let label_bytes = fs::read(labels_path)?;
    let (count, rows, cols, pixels) = parse_idx_images(&image_bytes, images_path)?;
    let labels = parse_idx_labels(&label_bytes, labels_path)?;
    if labels.len() != count {
        return Err(idx_error(
            labels_path,
            format!("{} labels for {count} images", labels.len()),
        ));
    }
    Ok(binarize(count, rows, cols, &pixels, labels, threshold))
}

pub(crate) fn binarize(
    count: usize,
    rows: usize,
    cols: usize,
    pixels: &[u8],
    labels: Vec<u8>,
    threshold: f64,
) -> MnistSet {
    let width = rows * cols;
    let images = Array2::from_shape_fn((count, width), |(k, p)| {
        ((pixels[k * width + p] as f64 / 255.0) >= threshold) as u8 as f64
    });
    MnistSet {
        images,
        labels,
        rows,
        cols,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn shifting_bar_one_hot() {
        let d = shifting_bar(9, 1, false).unwrap();
        assert_eq!(d.len(), 9);
        for (k, p) in d.patterns().iter().enumerate() {
            assert_eq!(p.iter().filter(|&&b| b == 1).count(), 1);
            assert_eq!(p[k], 1);
        }
        assert!(d.masses().iter().all(|&m| (m - 1.0 / 9.0).abs() < 1e-15));
    }

    #[test]
    fn shifting_bar_wide_and_inverted() {
        let d = shifting_bar(14, 7, false).unwrap();
        assert_eq!(d.len(), 14);
        for (k, p) in d.patterns().iter().enumerate() {
            assert_eq!(p.iter().filter(|&&b| b == 1).count(), 7);
            for off in 0..7 {
                assert_eq!(p[(k + off) % 14], 1);
            }
        }
        let inv = shifting_bar(9, 2, true).unwrap();
        for p in inv.patterns() {
            assert_eq!(p.iter().filter(|&&b| b == 1).count(), 7);
        }
    }

    #[test]
    fn shifting_bar_rejects_bad_widths() {
        assert!(shifting_bar(5, 0, false).is_err());
        assert!(shifting_bar(5, 5, false).is_err());
        assert!(shifting_bar(5, 6, false).is_err());
    }

    #[test]
    fn bars_and_stripes_counts() {
        let d3 = bars_and_stripes(3).unwrap();
        assert_eq!(d3.len(), 14);
        assert_eq!(d3.total_count(), 16);
        let zero = d3.patterns().iter().position(|p| p.iter().all(|&b| b == 0)).unwrap();
        let ones = d3.patterns().iter().position(|p| p.iter().all(|&b| b == 1)).unwrap();
        assert!((d3.masses()[zero] - 2.0 / 16.0).abs() < 1e-15);
        assert!((d3.masses()[ones] - 2.0 / 16.0).abs() < 1e-15);
        let d2 = bars_and_stripes(2).unwrap();
        assert_eq!(d2.total_count(), 8);
        assert_eq!(d2.len(), 6);
        let d1 = bars_and_stripes(1).unwrap();
        assert_eq!(d1.len(), 2);
    }

    #[test]
    fn bars_and_stripes_are_row_or_column_constant() {
        for side in 1..=4 {
            let d = bars_and_stripes(side).unwrap();
            for p in d.patterns() {
                let rows_const = (0..side)
                    .all(|r| (0..side).all(|c| p[r * side + c] == p[r * side]));
                let cols_const = (0..side).all(|c| (0..side).all(|r| p[r * side + c] == p[c]));
                assert!(rows_const || cols_const);
            }
            let sum: f64 = d.masses().iter().sum();
            assert!((sum - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn random_support_is_distinct_and_reproducible() {
        let a = random_support(6, 10, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        let b = random_support(6, 10, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 10);
        assert!(a.patterns().iter().all(|p| p.len() == 6));
        assert!(a.masses().iter().all(|&m| (m - 0.1).abs() < 1e-15));
        let full = random_support(3, 8, &mut ChaCha8Rng::seed_from_u64(2)).unwrap();
        assert_eq!(full.len(), 8);
        assert!(random_support(3, 9, &mut ChaCha8Rng::seed_from_u64(2)).is_err());
    }

    fn idx_images(count: u32, rows: u32, cols: u32, pixels: &[u8]) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend(IDX_IMAGES_MAGIC.to_be_bytes());
        out.extend(count.to_be_bytes());
        out.extend(rows.to_be_bytes());
        out.extend(cols.to_be_bytes());
        out.extend_from_slice(pixels);
        out
    }

    #[test]
    fn idx_parsing_and_binarisation() {
        let p = Path::new("mem");
        let bytes = idx_images(2, 2, 2, &[0, 0, 0, 0, 0, 127, 128, 255]);
        let (count, rows, cols, pixels) = parse_idx_images(&bytes, p).unwrap();
        assert_eq!((count, rows, cols), (2, 2, 2));
        let set = binarize(count, rows, cols, &pixels, vec![3, 4], 0.5);
        assert_eq!(set.images.row(0).to_vec(), vec![0.0; 4]);
        assert_eq!(set.images.row(1).to_vec(), vec![0.0, 0.0, 1.0, 1.0]);
        let all = binarize(count, rows, cols, &pixels, vec![3, 4], 0.0);
        assert!(all.images.iter().all(|&x| x == 1.0));
    }

    #[test]
    fn idx_rejects_bad_input() {
        let p = Path::new("mem");
        let mut bad = idx_images(1, 1, 1, &[0]);
        bad[3] = 0x01;
        assert!(parse_idx_images(&bad, p).is_err());
        let short = idx_images(2, 2, 2, &[0, 0, 0]);
        assert!(matches!(parse_idx_images(&short, p), Err(Error::Idx { .. })));
        let mut labels = Vec::new();
        labels.extend(IDX_LABELS_MAGIC.to_be_bytes());
        labels.extend(3u32.to_be_bytes());
        labels.extend([1u8, 2]);
        assert!(parse_idx_labels(&labels, p).is_err());
        labels.push(7);
        assert_eq!(parse_idx_labels(&labels, p).unwrap(), vec![1, 2, 7]);
    }

    #[test]
    fn load_mnist_checks_count_agreement() {
        let dir = tempfile::tempdir().unwrap();
        let img = dir.path().join("img");
        let lab = dir.path().join("lab");
        fs::write(&img, idx_images(2, 1, 2, &[0, 255, 255, 0])).unwrap();
        let mut labels = Vec::new();
        labels.extend(IDX_LABELS_MAGIC.to_be_bytes());
        labels.extend(1u32.to_be_bytes());
        labels.push(5);
        fs::write(&lab, &labels).unwrap();
        assert!(load_mnist(&img, &lab, 0.5).is_err());
        let mut labels = Vec::new();
        labels.extend(IDX_LABELS_MAGIC.to_be_bytes());
        labels.extend(2u32.to_be_bytes());
        labels.extend([5, 6]);
        fs::write(&lab, &labels).unwrap();
        let set = load_mnist(&img, &lab, 0.5).unwrap();
        assert_eq!(set.count(), 2);
        assert_eq!(set.images.row(0).to_vec(), vec![0.0, 1.0]);
    }
}
