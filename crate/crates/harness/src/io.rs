//! 8-bit single-channel PNG masks: foreground 255, background 0.

use std::path::Path;

use image::GrayImage;
use vcod_core::{MaskImage, MaskKind};

use crate::error::{HarnessError, Result};

fn read_gray(path: &Path) -> Result<GrayImage> {
    let img = image::open(path).map_err(|e| HarnessError::Image {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    Ok(img.to_luma8())
}

/// Ground-truth style mask: a pixel is foreground iff `value/255 >= threshold`.
pub fn read_binary_mask(path: &Path, threshold: f64) -> Result<MaskImage> {
    let img = read_gray(path)?;
    let (w, h) = img.dimensions();
    let values = img
        .into_raw()
        .into_iter()
        .map(|v| f64::from(f64::from(v) / 255.0 >= threshold))
        .collect();
    Ok(MaskImage::binary(h as usize, w as usize, values)?)
}

/// Prediction map scaled to `[0, 1]`.
pub fn read_probability_mask(path: &Path) -> Result<MaskImage> {
    let img = read_gray(path)?;
    let (w, h) = img.dimensions();
    let values = img.into_raw().into_iter().map(|v| f64::from(v) / 255.0).collect();
    Ok(MaskImage::probability(h as usize, w as usize, values)?)
}

pub fn mask_to_gray(mask: &MaskImage) -> GrayImage {
    let raw = mask
        .values()
        .iter()
        .map(|&v| match mask.kind() {
            MaskKind::Binary => {
                if v > 0.5 {
                    255
                } else {
                    0
                }
            }
            MaskKind::Probability => (v * 255.0).round() as u8,
        })
        .collect();
    GrayImage::from_raw(mask.width() as u32, mask.height() as u32, raw).expect("extent matches buffer")
}

/// Writes `mask` as PNG, creating parent directories as needed.
pub fn write_mask(path: &Path, mask: &MaskImage) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
    }
    mask_to_gray(mask)
        .save_with_format(path, image::ImageFormat::Png)
        .map_err(|e| HarnessError::Image {
            path: path.to_path_buf(),
            message: e.to_string(),
        })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn binary_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.png");
        let m = MaskImage::binary(2, 3, vec![0., 1., 1., 0., 0., 1.]).unwrap();
        write_mask(&path, &m).unwrap();
        assert_eq!(read_binary_mask(&path, 0.5).unwrap(), m);
        let p = read_probability_mask(&path).unwrap();
        assert_eq!(p.values(), m.values());
        assert_eq!(p.kind(), MaskKind::Probability);
    }

    #[test]
    fn probability_is_quantised() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.png");
        let m = MaskImage::probability(1, 2, vec![0.5, 0.25]).unwrap();
        write_mask(&path, &m).unwrap();
        let back = read_probability_mask(&path).unwrap();
        assert_eq!(back.values(), &[128.0 / 255.0, 64.0 / 255.0]);
    }

    #[test]
    fn unreadable_file_is_an_image_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.png");
        std::fs::write(&path, b"not a png").unwrap();
        assert!(matches!(read_binary_mask(&path, 0.5), Err(HarnessError::Image { .. })));
    }
}
