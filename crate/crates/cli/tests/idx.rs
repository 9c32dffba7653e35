mod common;

use elasticzo::idx::{load_idx, load_split, write_images, write_labels, IMAGE_MAGIC};
use elasticzo::CliError;
use elasticzo_core::data::Split;

#[test]
fn two_image_fixture_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let (pixels, labels) = common::synthetic_pixels(2, 9);
    let (img, lab) = (dir.path().join("img"), dir.path().join("lab"));
    write_images(&img, 2, &pixels).unwrap();
    write_labels(&lab, &labels).unwrap();
    let ds = load_idx(&img, &lab, Split::Train).unwrap();
    assert_eq!(ds.len(), 2);
    assert_eq!(ds.labels(), &labels[..]);
    for i in 0..2 {
        let back: Vec<u8> = ds.image(i).iter().map(|v| (v * 255.0).round() as u8).collect();
        assert_eq!(back, &pixels[i * 784..(i + 1) * 784]);
    }
}

#[test]
fn wrong_magic_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let img = dir.path().join("img");
    let mut bytes = Vec::new();
    for v in [0x0000_0802u32, 1, 28, 28] {
        bytes.extend_from_slice(&v.to_be_bytes());
    }
    bytes.extend(std::iter::repeat(0u8).take(784));
    std::fs::write(&img, bytes).unwrap();
    let lab = dir.path().join("lab");
    write_labels(&lab, &[1]).unwrap();
    match load_idx(&img, &lab, Split::Test) {
        Err(CliError::BadMagic { found: 0x802, expected, .. }) => assert_eq!(expected, IMAGE_MAGIC),
        other => panic!("expected a magic mismatch, got {other:?}"),
    }
}

#[test]
fn truncated_and_mismatched_files_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let (pixels, labels) = common::synthetic_pixels(3, 1);
    let (img, lab) = (dir.path().join("img"), dir.path().join("lab"));
    write_images(&img, 3, &pixels[..784 * 2]).unwrap();
    write_labels(&lab, &labels).unwrap();
    assert!(matches!(load_idx(&img, &lab, Split::Train), Err(CliError::Format { .. })));
    write_images(&img, 3, &pixels).unwrap();
    write_labels(&lab, &labels[..2]).unwrap();
    assert!(load_idx(&img, &lab, Split::Train).is_err());
}

#[test]
fn real_mnist_inventory() {
    let Some(dir) = common::mnist_dir() else {
        eprintln!("MNIST files not found; skipping");
        return;
    };
    let train = load_split(&dir, Split::Train).unwrap();
    let test = load_split(&dir, Split::Test).unwrap();
    assert_eq!(train.len(), 60_000);
    assert_eq!(test.len(), 10_000);
    assert!(train.labels().iter().chain(test.labels()).all(|&y| y < 10));
}
