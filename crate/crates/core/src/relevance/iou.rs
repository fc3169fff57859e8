use image::{Rgb, RgbImage};
use serde::{Deserialize, Serialize};

use super::RelevanceError;
use crate::intervention::PatchGrid;
use crate::BinaryMask;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LocalizationScore {
    pub iou_object: f64,
    pub iou_background: f64,
    pub threshold_frac: f64,
}

/// One localization readout, joined to metrics by `image_id`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalizationRecord {
    pub image_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prompt_id: Option<String>,
    pub iou_object: f64,
    pub iou_background: f64,
    pub threshold_frac: f64,
}

impl LocalizationRecord {
    pub fn new(image_id: impl Into<String>, prompt_id: Option<String>, score: LocalizationScore) -> Self {
        Self {
            image_id: image_id.into(),
            prompt_id,
            iou_object: score.iou_object,
            iou_background: score.iou_background,
            threshold_frac: score.threshold_frac,
        }
    }
}

fn check(relevance: &[f64], grid: &PatchGrid) -> Result<(), RelevanceError> {
    if relevance.len() != grid.num_patches() {
        return Err(RelevanceError::ShapeMismatch(format!(
            "{} relevance values for {} patches",
            relevance.len(),
            grid.num_patches()
        )));
    }
    if relevance.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
        return Err(RelevanceError::InvalidMap);
    }
    Ok(())
}

/// Pixel mask of patches whose relevance is at least `threshold_frac × max`.
/// All-zero relevance selects nothing.
pub fn binarize_relevance(relevance: &[f64], grid: &PatchGrid, threshold_frac: f64) -> Result<BinaryMask, RelevanceError> {
    check(relevance, grid)?;
    let max = relevance.iter().copied().fold(0.0, f64::max);
    let keep: Vec<bool> = relevance.iter().map(|r| max > 0.0 && *r >= threshold_frac * max).collect();
    Ok(BinaryMask::from_fn(grid.image_width, grid.image_height, |x, y| keep[grid.patch_of(x, y)]))
}

fn iou(a: &BinaryMask, b: &BinaryMask) -> f64 {
    let union = a.union_count(b);
    if union == 0 {
        0.0
    } else {
        a.intersection_count(b) as f64 / union as f64
    }
}

/// IoU of the binarized relevance against the object mask and against its complement.
pub fn attention_iou(
    relevance: &[f64],
    grid: &PatchGrid,
    object_mask: &BinaryMask,
    threshold_frac: f64,
) -> Result<LocalizationScore, RelevanceError> {
    let expected = (grid.image_width, grid.image_height);
    let actual = (object_mask.width(), object_mask.height());
    if expected != actual {
        return Err(RelevanceError::DimensionMismatch { expected, actual });
    }
    if !(threshold_frac > 0.0 && threshold_frac <= 1.0) {
        return Err(RelevanceError::ShapeMismatch(format!("threshold fraction {threshold_frac} outside (0, 1]")));
    }
    let bin = binarize_relevance(relevance, grid, threshold_frac)?;
    if bin.popcount() == 0 {
        return Ok(LocalizationScore { iou_object: 0.0, iou_background: 0.0, threshold_frac });
    }
    Ok(LocalizationScore {
        iou_object: iou(&bin, object_mask),
        iou_background: iou(&bin, &object_mask.complement()),
        threshold_frac,
    })
}

/// Blends a red heat layer over `image`, strongest where relevance peaks.
pub fn relevance_overlay(image: &RgbImage, relevance: &[f64], grid: &PatchGrid) -> Result<RgbImage, RelevanceError> {
    check(relevance, grid)?;
    let expected = (grid.image_width, grid.image_height);
    if image.dimensions() != expected {
        return Err(RelevanceError::DimensionMismatch { expected, actual: image.dimensions() });
    }
    let max = relevance.iter().copied().fold(0.0, f64::max);
    let mut out = image.clone();
    for (x, y, px) in out.enumerate_pixels_mut() {
        let t = if max > 0.0 { relevance[grid.patch_of(x, y)] / max } else { 0.0 };
        let a = 0.6 * t;
        let heat = [255.0, 255.0 * (1.0 - t), 0.0];
        let Rgb(c) = *px;
        *px = Rgb([0, 1, 2].map(|i| ((1.0 - a) * c[i] as f64 + a * heat[i]).round() as u8));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> PatchGrid {
        PatchGrid::new(2, 4, 4).unwrap()
    }

    #[test]
    fn indicator_relevance_is_perfect() {
        let mask = BinaryMask::from_fn(4, 4, |x, y| x < 2 && y >= 2);
        let s = attention_iou(&[0.0, 0.0, 1.0, 0.0], &grid(), &mask, 0.5).unwrap();
        assert_eq!(s.iou_object, 1.0);
        assert_eq!(s.iou_background, 0.0);
    }

    #[test]
    fn uniform_relevance_covers_image() {
        let mask = BinaryMask::from_fn(4, 4, |x, y| x == 0 && y == 0);
        let s = attention_iou(&[0.25; 4], &grid(), &mask, 0.5).unwrap();
        assert_eq!(s.iou_object, 1.0 / 16.0);
        assert_eq!(s.iou_background, 15.0 / 16.0);
    }

    #[test]
    fn zero_relevance_scores_zero() {
        let s = attention_iou(&[0.0; 4], &grid(), &BinaryMask::filled(4, 4, true), 0.5).unwrap();
        assert_eq!((s.iou_object, s.iou_background), (0.0, 0.0));
    }

    #[test]
    fn threshold_is_inclusive() {
        let bin = binarize_relevance(&[1.0, 0.5, 0.49, 0.0], &grid(), 0.5).unwrap();
        assert_eq!(bin.popcount(), 8);
    }

    #[test]
    fn errors() {
        assert!(attention_iou(&[0.0; 3], &grid(), &BinaryMask::new(4, 4), 0.5).is_err());
        assert!(attention_iou(&[0.0; 4], &grid(), &BinaryMask::new(4, 5), 0.5).is_err());
        assert!(attention_iou(&[-1.0, 0.0, 0.0, 0.0], &grid(), &BinaryMask::new(4, 4), 0.5).is_err());
    }

    #[test]
    fn overlay_keeps_cold_pixels() {
        let img = RgbImage::from_pixel(4, 4, Rgb([10, 20, 30]));
        let out = relevance_overlay(&img, &[1.0, 0.0, 0.0, 0.0], &grid()).unwrap();
        assert_eq!(out.get_pixel(3, 3), &Rgb([10, 20, 30]));
        assert_ne!(out.get_pixel(0, 0), &Rgb([10, 20, 30]));
    }
}
