//! Dataset ingestion (IDX files) and a self-contained synthetic digit set.
//!
//! IDX is the big-endian container used by MNIST and Fashion-MNIST: magic
//! 0x00000803 for image files (u8 pixels, dims samples x rows x cols) and
//! 0x00000801 for label files. The synthetic generator renders jittered bar
//! patterns so the full pipeline can run without any downloaded data; it
//! produces the same in-memory type the IDX loader does.

use std::fs::File;
use std::io::{BufReader, Read, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

pub const IDX_IMAGES_MAGIC: u32 = 0x0000_0803;
pub const IDX_LABELS_MAGIC: u32 = 0x0000_0801;

/// Guard against absurd headers before allocating.
const MAX_SAMPLES: u32 = 10_000_000;
const MAX_SIDE: u32 = 4096;

/// Labeled image set; pixels normalized to [0, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub images: Vec<Vec<f32>>,
    pub labels: Vec<u8>,
    pub rows: usize,
    pub cols: usize,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    pub fn pixels(&self) -> usize {
        self.rows * self.cols
    }

    /// First `n` samples (or fewer, if the set is smaller).
    pub fn take(&self, n: usize) -> Dataset {
        let n = n.min(self.len());
        Dataset {
            images: self.images[..n].to_vec(),
            labels: self.labels[..n].to_vec(),
            rows: self.rows,
            cols: self.cols,
        }
    }

    pub fn n_classes(&self) -> usize {
        self.labels.iter().map(|&l| l as usize + 1).max().unwrap_or(0)
    }
}

fn read_u32_be<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)
        .map_err(|e| Error::DatasetFormat(format!("short read in header: {e}")))?;
    Ok(u32::from_be_bytes(b))
}

/// Raw contents of an IDX image file.
#[derive(Debug, Clone, PartialEq)]
pub struct IdxImages {
    pub rows: usize,
    pub cols: usize,
    /// samples x rows x cols, row-major.
    pub pixels: Vec<u8>,
    pub n_samples: usize,
}

pub fn read_idx_images<R: Read>(r: &mut R) -> Result<IdxImages> {
    let magic = read_u32_be(r)?;
    if magic != IDX_IMAGES_MAGIC {
        return Err(Error::DatasetFormat(format!(
            "bad image magic 0x{magic:08x}, expected 0x{IDX_IMAGES_MAGIC:08x}"
        )));
    }
    let n = read_u32_be(r)?;
    let rows = read_u32_be(r)?;
    let cols = read_u32_be(r)?;
    if n > MAX_SAMPLES || rows == 0 || cols == 0 || rows > MAX_SIDE || cols > MAX_SIDE {
        return Err(Error::DatasetFormat(format!(
            "implausible image dims: {n} x {rows} x {cols}"
        )));
    }
    let len = n as usize * rows as usize * cols as usize;
    let mut pixels = vec![0u8; len];
    r.read_exact(&mut pixels)
        .map_err(|e| Error::DatasetFormat(format!("truncated pixel data: {e}")))?;
    Ok(IdxImages {
        rows: rows as usize,
        cols: cols as usize,
        pixels,
        n_samples: n as usize,
    })
}

pub fn read_idx_labels<R: Read>(r: &mut R) -> Result<Vec<u8>> {
    let magic = read_u32_be(r)?;
    if magic != IDX_LABELS_MAGIC {
        return Err(Error::DatasetFormat(format!(
            "bad label magic 0x{magic:08x}, expected 0x{IDX_LABELS_MAGIC:08x}"
        )));
    }
    let n = read_u32_be(r)?;
    if n > MAX_SAMPLES {
        return Err(Error::DatasetFormat(format!("implausible label count {n}")));
    }
    let mut labels = vec![0u8; n as usize];
    r.read_exact(&mut labels)
        .map_err(|e| Error::DatasetFormat(format!("truncated label data: {e}")))?;
    Ok(labels)
}

pub fn write_idx_images<W: Write>(w: &mut W, images: &IdxImages) -> std::io::Result<()> {
    w.write_all(&IDX_IMAGES_MAGIC.to_be_bytes())?;
    w.write_all(&(images.n_samples as u32).to_be_bytes())?;
    w.write_all(&(images.rows as u32).to_be_bytes())?;
    w.write_all(&(images.cols as u32).to_be_bytes())?;
    w.write_all(&images.pixels)
}

pub fn write_idx_labels<W: Write>(w: &mut W, labels: &[u8]) -> std::io::Result<()> {
    w.write_all(&IDX_LABELS_MAGIC.to_be_bytes())?;
    w.write_all(&(labels.len() as u32).to_be_bytes())?;
    w.write_all(labels)
}

/// Loads an image/label file pair into a normalized dataset.
pub fn load_idx_dataset<P: AsRef<Path>>(
    images_path: P,
    labels_path: P,
    limit: Option<usize>,
) -> Result<Dataset> {
    let mut ir = BufReader::new(File::open(images_path.as_ref())?);
    let images = read_idx_images(&mut ir)?;
    let mut lr = BufReader::new(File::open(labels_path.as_ref())?);
    let labels = read_idx_labels(&mut lr)?;
    if labels.len() != images.n_samples {
        return Err(Error::DatasetFormat(format!(
            "{} images but {} labels",
            images.n_samples,
            labels.len()
        )));
    }
    let ds = dataset_from_idx(&images, &labels);
    Ok(match limit {
        Some(n) => ds.take(n),
        None => ds,
    })
}

pub fn dataset_from_idx(images: &IdxImages, labels: &[u8]) -> Dataset {
    let px = images.rows * images.cols;
    let imgs = (0..images.n_samples)
        .map(|i| {
            images.pixels[i * px..(i + 1) * px]
                .iter()
                .map(|&b| b as f32 / 255.0)
                .collect()
        })
        .collect();
    Dataset {
        images: imgs,
        labels: labels.to_vec(),
        rows: images.rows,
        cols: images.cols,
    }
}

/// Renders one class pattern: classes 0..4 are horizontal bars at five
/// vertical positions, classes 5..9 vertical bars at five horizontal
/// positions. Masses are equal and no class pattern contains another, so the
/// set is learnable by spike-count voting.
fn render_pattern(class: u8, rows: usize, cols: usize, dx: i32, dy: i32, intensity: f32) -> Vec<f32> {
    let mut img = vec![0.0f32; rows * cols];
    let thickness = (rows as i32 / 9).max(2);
    let pitch = (rows as i32 - thickness) / 5;
    let margin = (cols as i32) / 14;

    let (r0, r1, c0, c1) = if class < 5 {
        let top = 1 + pitch * class as i32 + dy;
        (top, top + thickness, margin + dx, cols as i32 - margin + dx)
    } else {
        let left = 1 + pitch * (class as i32 - 5) + dx;
        (margin + dy, rows as i32 - margin + dy, left, left + thickness)
    };
    for r in r0..r1 {
        for c in c0..c1 {
            if r >= 0 && c >= 0 && (r as usize) < rows && (c as usize) < cols {
                img[r as usize * cols + c as usize] = intensity;
            }
        }
    }
    img
}

/// Deterministic synthetic pattern set: jittered bars with background
/// speckle, ten visually distinct classes. Classes cycle 0..n_classes.
pub fn synthetic_patterns(
    n_samples: usize,
    rows: usize,
    cols: usize,
    n_classes: usize,
    seed: u64,
) -> Dataset {
    assert!((1..=10).contains(&n_classes), "classes must be 1..=10");
    let mut rng = ChaCha8Rng::seed_from_u64(crate::seeds::derive(seed, &[0x64696769]));
    let mut images = Vec::with_capacity(n_samples);
    let mut labels = Vec::with_capacity(n_samples);
    for i in 0..n_samples {
        let class = (i % n_classes) as u8;
        let dx = rng.random_range(-1..=1);
        let dy = rng.random_range(-1..=1);
        let intensity = rng.random_range(0.7..=1.0);
        let mut img = render_pattern(class, rows, cols, dx, dy, intensity);
        for px in img.iter_mut() {
            if *px == 0.0 && rng.random::<f32>() < 0.02 {
                *px = rng.random_range(0.1..0.4);
            }
        }
        images.push(img);
        labels.push(class);
    }
    Dataset {
        images,
        labels,
        rows,
        cols,
    }
}

/// Serializes a dataset back to IDX bytes (pixel values rescaled to u8).
pub fn dataset_to_idx(ds: &Dataset) -> (IdxImages, Vec<u8>) {
    let pixels = ds
        .images
        .iter()
        .flat_map(|img| img.iter().map(|&p| (p.clamp(0.0, 1.0) * 255.0).round() as u8))
        .collect();
    (
        IdxImages {
            rows: ds.rows,
            cols: ds.cols,
            pixels,
            n_samples: ds.len(),
        },
        ds.labels.clone(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn idx_roundtrip() {
        let ds = synthetic_patterns(20, 14, 14, 10, 7);
        let (imgs, labels) = dataset_to_idx(&ds);
        let mut ibuf = Vec::new();
        write_idx_images(&mut ibuf, &imgs).unwrap();
        let mut lbuf = Vec::new();
        write_idx_labels(&mut lbuf, &labels).unwrap();

        let parsed_imgs = read_idx_images(&mut &ibuf[..]).unwrap();
        let parsed_labels = read_idx_labels(&mut &lbuf[..]).unwrap();
        assert_eq!(parsed_imgs, imgs);
        assert_eq!(parsed_labels, labels);

        let ds2 = dataset_from_idx(&parsed_imgs, &parsed_labels);
        assert_eq!(ds2.len(), ds.len());
        assert_eq!(ds2.labels, ds.labels);
        // u8 rescale introduces at most half a step of error
        for (a, b) in ds.images[0].iter().zip(&ds2.images[0]) {
            assert!((a - b).abs() <= 0.5 / 255.0 + 1e-6);
        }
    }

    #[test]
    fn idx_rejects_malformed() {
        // wrong magic
        let mut bad = Vec::new();
        bad.extend_from_slice(&0x0000_0802u32.to_be_bytes());
        bad.extend_from_slice(&[0; 12]);
        assert!(read_idx_images(&mut &bad[..]).is_err());

        // truncated pixel payload
        let mut short = Vec::new();
        short.extend_from_slice(&IDX_IMAGES_MAGIC.to_be_bytes());
        short.extend_from_slice(&2u32.to_be_bytes());
        short.extend_from_slice(&4u32.to_be_bytes());
        short.extend_from_slice(&4u32.to_be_bytes());
        short.extend_from_slice(&[0u8; 10]);
        assert!(read_idx_images(&mut &short[..]).is_err());

        // implausible dimensions must not allocate
        let mut huge = Vec::new();
        huge.extend_from_slice(&IDX_IMAGES_MAGIC.to_be_bytes());
        huge.extend_from_slice(&u32::MAX.to_be_bytes());
        huge.extend_from_slice(&u32::MAX.to_be_bytes());
        huge.extend_from_slice(&u32::MAX.to_be_bytes());
        assert!(read_idx_images(&mut &huge[..]).is_err());

        // empty input
        assert!(read_idx_labels(&mut &[][..]).is_err());
    }

    #[test]
    fn synthetic_is_deterministic_and_labeled() {
        let a = synthetic_patterns(50, 28, 28, 10, 42);
        let b = synthetic_patterns(50, 28, 28, 10, 42);
        assert_eq!(a, b);
        let c = synthetic_patterns(50, 28, 28, 10, 43);
        assert_ne!(a, c);

        assert_eq!(a.len(), 50);
        assert_eq!(a.labels[..10], [0, 1, 2, 3, 4, 5, 6, 7, 8, 9]);
        assert!(a.images.iter().all(|img| img.len() == 784));
        assert!(a
            .images
            .iter()
            .all(|img| img.iter().all(|&p| (0.0..=1.0).contains(&p))));
        // patterns are actually drawn
        assert!(a.images.iter().all(|img| img.iter().sum::<f32>() > 10.0));
    }

    #[test]
    fn distinct_classes_have_distinct_patterns() {
        let ds = synthetic_patterns(10, 28, 28, 10, 0);
        for i in 0..10 {
            for j in (i + 1)..10 {
                let d: f32 = ds.images[i]
                    .iter()
                    .zip(&ds.images[j])
                    .map(|(a, b)| (a - b).abs())
                    .sum();
                assert!(d > 5.0, "classes {i} and {j} look identical");
            }
        }
    }
}
