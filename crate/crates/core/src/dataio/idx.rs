use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::trainer::LabeledDataset;

pub const IMAGES_MAGIC: u32 = 0x0000_0803;
pub const LABELS_MAGIC: u32 = 0x0000_0801;

/// Raw image file contents; `pixels` is `count * rows * cols` bytes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IdxImages {
    pub count: u32,
    pub rows: u32,
    pub cols: u32,
    pub pixels: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IdxLabels {
    pub labels: Vec<u8>,
}

fn read_u32(bytes: &[u8], offset: usize) -> Result<u32> {
    match bytes.get(offset..offset + 4) {
        Some(b) => Ok(u32::from_be_bytes([b[0], b[1], b[2], b[3]])),
        None => Err(Error::Parse { offset: bytes.len(), message: format!("header truncated, need 4 bytes at {offset}") }),
    }
}

fn expect_magic(bytes: &[u8], magic: u32) -> Result<()> {
    let found = read_u32(bytes, 0)?;
    if found != magic {
        return Err(Error::Parse { offset: 0, message: format!("magic {found:#010x}, expected {magic:#010x}") });
    }
    Ok(())
}

fn payload(bytes: &[u8], start: usize, len: usize) -> Result<&[u8]> {
    let end = start + len;
    if bytes.len() < end {
        return Err(Error::Parse {
            offset: bytes.len(),
            message: format!("payload truncated: {} of {len} bytes present", bytes.len() - start),
        });
    }
    if bytes.len() > end {
        return Err(Error::Parse { offset: end, message: format!("{} trailing bytes", bytes.len() - end) });
    }
    Ok(&bytes[start..end])
}

pub fn parse_idx_images(bytes: &[u8]) -> Result<IdxImages> {
    expect_magic(bytes, IMAGES_MAGIC)?;
    let count = read_u32(bytes, 4)?;
    let rows = read_u32(bytes, 8)?;
    let cols = read_u32(bytes, 12)?;
    let len = count as usize * rows as usize * cols as usize;
    let pixels = payload(bytes, 16, len)?.to_vec();
    Ok(IdxImages { count, rows, cols, pixels })
}

pub fn parse_idx_labels(bytes: &[u8]) -> Result<IdxLabels> {
    expect_magic(bytes, LABELS_MAGIC)?;
    let count = read_u32(bytes, 4)?;
    let labels = payload(bytes, 8, count as usize)?.to_vec();
    if let Some(pos) = labels.iter().position(|&l| l > 9) {
        return Err(Error::Parse { offset: 8 + pos, message: format!("label {} is not a digit", labels[pos]) });
    }
    Ok(IdxLabels { labels })
}

impl IdxImages {
    pub fn dim(&self) -> usize {
        self.rows as usize * self.cols as usize
    }

    /// Pixels divided by 255, one vector per image.
    pub fn features(&self) -> Vec<Vec<f64>> {
        if self.dim() == 0 {
            return vec![Vec::new(); self.count as usize];
        }
        self.pixels.chunks(self.dim()).map(|img| img.iter().map(|&p| f64::from(p) / 255.0).collect()).collect()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(16 + self.pixels.len());
        for v in [IMAGES_MAGIC, self.count, self.rows, self.cols] {
            out.extend_from_slice(&v.to_be_bytes());
        }
        out.extend_from_slice(&self.pixels);
        out
    }
}

impl IdxLabels {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(8 + self.labels.len());
        out.extend_from_slice(&LABELS_MAGIC.to_be_bytes());
        out.extend_from_slice(&(self.labels.len() as u32).to_be_bytes());
        out.extend_from_slice(&self.labels);
        out
    }
}

pub fn load_idx(path_images: impl AsRef<Path>, path_labels: impl AsRef<Path>) -> Result<LabeledDataset> {
    let images = parse_idx_images(&std::fs::read(path_images)?)?;
    let labels = parse_idx_labels(&std::fs::read(path_labels)?)?;
    if images.count as usize != labels.labels.len() {
        return Err(Error::Parse {
            offset: 4,
            message: format!("{} images but {} labels", images.count, labels.labels.len()),
        });
    }
    LabeledDataset::new(images.features(), labels.labels.iter().map(|&l| usize::from(l)).collect(), 10)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MnistSplit {
    Train,
    Test,
}

impl MnistSplit {
    fn prefix(self) -> &'static str {
        match self {
            MnistSplit::Train => "train",
            MnistSplit::Test => "t10k",
        }
    }
}

/// `$MNIST_DIR`, or `data/mnist` when unset.
pub fn mnist_dir() -> PathBuf {
    std::env::var_os("MNIST_DIR").map(PathBuf::from).unwrap_or_else(|| PathBuf::from("data/mnist"))
}

/// Loads `{train,t10k}-images-idx3-ubyte` and the matching labels from `dir`.
pub fn load_mnist(dir: impl AsRef<Path>, split: MnistSplit) -> Result<LabeledDataset> {
    let dir = dir.as_ref();
    let p = split.prefix();
    load_idx(dir.join(format!("{p}-images-idx3-ubyte")), dir.join(format!("{p}-labels-idx1-ubyte")))
}
