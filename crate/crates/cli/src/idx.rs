//! Big-endian IDX files as distributed for MNIST and Fashion-MNIST.

use std::path::Path;

use elasticzo_core::data::{Dataset, Split, IMAGE_SIDE};

use crate::error::{CliError, Result};

pub const IMAGE_MAGIC: u32 = 0x0000_0803;
pub const LABEL_MAGIC: u32 = 0x0000_0801;

struct Reader<'a> {
    path: &'a Path,
    bytes: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn u32(&mut self) -> Result<u32> {
        let chunk = self
            .bytes
            .get(self.pos..self.pos + 4)
            .ok_or_else(|| CliError::format(self.path, "truncated header"))?;
        self.pos += 4;
        Ok(u32::from_be_bytes(chunk.try_into().unwrap()))
    }

    fn rest(&self, expected: usize) -> Result<&[u8]> {
        let rest = &self.bytes[self.pos..];
        if rest.len() < expected {
            return Err(CliError::format(
                self.path,
                format!("truncated: {} payload bytes, expected {expected}", rest.len()),
            ));
        }
        Ok(&rest[..expected])
    }
}

fn read(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(CliError::io(path))
}

fn check_magic(path: &Path, r: &mut Reader, expected: u32) -> Result<()> {
    let found = r.u32()?;
    if found != expected {
        return Err(CliError::BadMagic { path: path.to_path_buf(), found, expected });
    }
    Ok(())
}

/// Raw `(N, 28, 28)` pixels.
pub fn read_images(path: &Path) -> Result<(usize, Vec<u8>)> {
    let bytes = read(path)?;
    let mut r = Reader { path, bytes: &bytes, pos: 0 };
    check_magic(path, &mut r, IMAGE_MAGIC)?;
    let n = r.u32()? as usize;
    let (rows, cols) = (r.u32()? as usize, r.u32()? as usize);
    if rows != IMAGE_SIDE || cols != IMAGE_SIDE {
        return Err(CliError::format(path, format!("images are {rows}x{cols}, expected 28x28")));
    }
    Ok((n, r.rest(n * rows * cols)?.to_vec()))
}

pub fn read_labels(path: &Path) -> Result<Vec<u8>> {
    let bytes = read(path)?;
    let mut r = Reader { path, bytes: &bytes, pos: 0 };
    check_magic(path, &mut r, LABEL_MAGIC)?;
    let n = r.u32()? as usize;
    Ok(r.rest(n)?.to_vec())
}

pub fn load_idx(images: &Path, labels: &Path, split: Split) -> Result<Dataset> {
    let (n, pixels) = read_images(images)?;
    let labels_data = read_labels(labels)?;
    if labels_data.len() != n {
        return Err(CliError::format(labels, format!("{} labels for {n} images", labels_data.len())));
    }
    Ok(Dataset::from_bytes(&pixels, labels_data, split)?)
}

/// Standard file names inside a dataset directory.
pub fn load_split(dir: &Path, split: Split) -> Result<Dataset> {
    let prefix = match split {
        Split::Train => "train",
        Split::Test => "t10k",
    };
    load_idx(
        &dir.join(format!("{prefix}-images-idx3-ubyte")),
        &dir.join(format!("{prefix}-labels-idx1-ubyte")),
        split,
    )
}

pub fn write_images(path: &Path, n: usize, pixels: &[u8]) -> Result<()> {
    let mut out = Vec::with_capacity(16 + pixels.len());
    for v in [IMAGE_MAGIC, n as u32, IMAGE_SIDE as u32, IMAGE_SIDE as u32] {
        out.extend_from_slice(&v.to_be_bytes());
    }
    out.extend_from_slice(pixels);
    std::fs::write(path, out).map_err(CliError::io(path))
}

pub fn write_labels(path: &Path, labels: &[u8]) -> Result<()> {
    let mut out = Vec::with_capacity(8 + labels.len());
    out.extend_from_slice(&LABEL_MAGIC.to_be_bytes());
    out.extend_from_slice(&(labels.len() as u32).to_be_bytes());
    out.extend_from_slice(labels);
    std::fs::write(path, out).map_err(CliError::io(path))
}
