//! Mask persistence: 8-bit grayscale PNG and a JSON run-length encoding.
//!
//! The RLE form is `{"size": [H, W], "counts": [...]}`. Runs alternate
//! background/foreground starting with background and walk the raster in
//! row-major order, so a mask whose first pixel is set starts with a 0 run.

use std::path::{Path, PathBuf};

use image::{GrayImage, Luma};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::BinaryMask;

/// Grayscale values at or above this threshold read as foreground.
pub const PNG_THRESHOLD: u8 = 128;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rle {
    pub size: [usize; 2],
    pub counts: Vec<usize>,
}

impl Rle {
    pub fn encode(mask: &BinaryMask) -> Rle {
        let mut counts = Vec::new();
        let mut current = false;
        let mut run = 0;
        for &b in mask.bits() {
            if b != current {
                counts.push(run);
                run = 0;
                current = b;
            }
            run += 1;
        }
        counts.push(run);
        Rle {
            size: [mask.height(), mask.width()],
            counts,
        }
    }

    pub fn decode(&self) -> Result<BinaryMask> {
        let [height, width] = self.size;
        let total = width * height;
        let mut bits = Vec::with_capacity(total);
        let mut value = false;
        for &run in &self.counts {
            if bits.len() + run > total {
                return Err(Error::InvalidMask(format!(
                    "RLE runs exceed the {width}x{height} raster"
                )));
            }
            bits.extend(std::iter::repeat_n(value, run));
            value = !value;
        }
        if bits.len() != total {
            return Err(Error::InvalidMask(format!(
                "RLE covers {} of {total} pixels",
                bits.len()
            )));
        }
        BinaryMask::from_bits(width, height, bits)
    }
}

pub fn read_png(path: impl AsRef<Path>) -> Result<BinaryMask> {
    let path = path.as_ref();
    let img = image::open(path)
        .map_err(|source| Error::Image {
            path: path.to_path_buf(),
            source,
        })?
        .to_luma8();
    let (w, h) = img.dimensions();
    let bits = img.pixels().map(|p| p.0[0] >= PNG_THRESHOLD).collect();
    BinaryMask::from_bits(w as usize, h as usize, bits)
}

pub fn write_png(mask: &BinaryMask, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let img = GrayImage::from_fn(mask.width() as u32, mask.height() as u32, |x, y| {
        Luma([if mask.get(x as usize, y as usize) { 255 } else { 0 }])
    });
    img.save(path).map_err(|source| Error::Image {
        path: path.to_path_buf(),
        source,
    })
}

pub fn read_rle_json(path: impl AsRef<Path>) -> Result<BinaryMask> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let rle: Rle = serde_json::from_str(&text)?;
    rle.decode()
}

pub fn write_rle_json(mask: &BinaryMask, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let text = serde_json::to_string(&Rle::encode(mask))?;
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Where a mask comes from in a JSONL record: a file path (`.json` means
/// RLE, anything else is decoded as an image) or an inline RLE object.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MaskSource {
    Path(PathBuf),
    Rle(Rle),
}

impl MaskSource {
    /// Loads the mask; relative paths resolve against `base`.
    pub fn load(&self, base: Option<&Path>) -> Result<BinaryMask> {
        match self {
            MaskSource::Rle(rle) => rle.decode(),
            MaskSource::Path(p) => {
                let path = match base {
                    Some(b) if p.is_relative() => b.join(p),
                    _ => p.clone(),
                };
                if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json")) {
                    read_rle_json(&path)
                } else {
                    read_png(&path)
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn rle_starts_with_background() {
        let m = BinaryMask::from_ascii("#..\n.##").unwrap();
        let rle = Rle::encode(&m);
        assert_eq!(rle.size, [2, 3]);
        assert_eq!(rle.counts, vec![0, 1, 3, 2]);
        assert_eq!(rle.decode().unwrap(), m);
    }

    #[test]
    fn rle_rejects_bad_lengths() {
        let short = Rle {
            size: [2, 2],
            counts: vec![1, 2],
        };
        assert!(short.decode().is_err());
        let long = Rle {
            size: [2, 2],
            counts: vec![3, 2],
        };
        assert!(long.decode().is_err());
    }

    #[test]
    fn png_round_trip_and_threshold() {
        let dir = tempfile::tempdir().unwrap();
        let m = BinaryMask::from_ascii("#.#.\n.##.\n....").unwrap();
        let p = dir.path().join("m.png");
        write_png(&m, &p).unwrap();
        assert_eq!(read_png(&p).unwrap(), m);

        let img = GrayImage::from_fn(3, 1, |x, _| Luma([[127u8, 128, 255][x as usize]]));
        let gray = dir.path().join("gray.png");
        img.save(&gray).unwrap();
        assert_eq!(read_png(&gray).unwrap().bits(), &[false, true, true]);
    }

    #[test]
    fn mask_source_dispatch() {
        let dir = tempfile::tempdir().unwrap();
        let m = BinaryMask::from_ascii("##\n.#").unwrap();
        write_rle_json(&m, dir.path().join("a.json")).unwrap();
        write_png(&m, dir.path().join("a.png")).unwrap();

        let json: MaskSource = serde_json::from_str("\"a.json\"").unwrap();
        let png: MaskSource = serde_json::from_str("\"a.png\"").unwrap();
        let inline: MaskSource =
            serde_json::from_str(r#"{"size":[2,2],"counts":[0,2,1,1]}"#).unwrap();
        for src in [json, png, inline] {
            assert_eq!(src.load(Some(dir.path())).unwrap(), m);
        }
    }

    proptest! {
        #[test]
        fn rle_round_trip(w in 1usize..12, h in 1usize..12, seed in any::<u64>()) {
            let m = BinaryMask::from_fn(w, h, |x, y| {
                (seed.rotate_left((x * 7 + y * 13) as u32) & 1) == 1
            }).unwrap();
            prop_assert_eq!(Rle::encode(&m).decode().unwrap(), m);
        }
    }
}
