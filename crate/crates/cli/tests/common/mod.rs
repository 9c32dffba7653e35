#![allow(dead_code)]

use std::path::{Path, PathBuf};

use elasticzo::idx::{write_images, write_labels};
use elasticzo_core::SeededGenerator;

/// Directory with real MNIST files, if present.
pub fn mnist_dir() -> Option<PathBuf> {
    let dir = PathBuf::from(std::env::var("ELASTICZO_MNIST_DIR").unwrap_or_else(|_| "/root/data/mnist".into()));
    dir.join("train-images-idx3-ubyte").exists().then_some(dir)
}

/// Class-dependent noisy blobs: label k lights up a 6x6 patch at a k-specific spot.
pub fn synthetic_pixels(n: usize, seed: u32) -> (Vec<u8>, Vec<u8>) {
    let mut gen = SeededGenerator::new(seed);
    let mut pixels = vec![0u8; n * 784];
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let k = i % 10;
        labels.push(k as u8);
        let (r0, c0) = (2 + (k / 5) * 12, 2 + (k % 5) * 5);
        for r in r0..r0 + 6 {
            for c in c0..(c0 + 6).min(28) {
                pixels[i * 784 + r * 28 + c] = 160 + gen.next_below(96) as u8;
            }
        }
        for p in &mut pixels[i * 784..(i + 1) * 784] {
            if *p == 0 && gen.next_below(10) == 0 {
                *p = gen.next_below(80) as u8;
            }
        }
    }
    (pixels, labels)
}

/// Writes a small train/test pair in the standard MNIST file names.
pub fn write_synthetic(dir: &Path, train: usize, test: usize) {
    std::fs::create_dir_all(dir).unwrap();
    for (prefix, n, seed) in [("train", train, 1), ("t10k", test, 2)] {
        let (pixels, labels) = synthetic_pixels(n, seed);
        write_images(&dir.join(format!("{prefix}-images-idx3-ubyte")), n, &pixels).unwrap();
        write_labels(&dir.join(format!("{prefix}-labels-idx1-ubyte")), &labels).unwrap();
    }
}
