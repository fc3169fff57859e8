use serde::{Deserialize, Serialize};

use super::InterventionError;
use crate::BinaryMask;

/// Square vision patches tiling an image, numbered row-major.
///
/// When the patch size does not divide the image, the last row/column of patches is
/// partial and its coverage is measured against its true pixel count.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PatchGrid {
    pub patch_size: u32,
    pub image_width: u32,
    pub image_height: u32,
}

impl PatchGrid {
    pub fn new(patch_size: u32, image_width: u32, image_height: u32) -> Result<Self, InterventionError> {
        if patch_size == 0 || image_width == 0 || image_height == 0 {
            return Err(InterventionError::InvalidParameter(format!(
                "patch grid needs positive sizes, got patch {patch_size} on {image_width}x{image_height}"
            )));
        }
        Ok(Self { patch_size, image_width, image_height })
    }

    pub fn cols(&self) -> usize {
        self.image_width.div_ceil(self.patch_size) as usize
    }

    pub fn rows(&self) -> usize {
        self.image_height.div_ceil(self.patch_size) as usize
    }

    pub fn num_patches(&self) -> usize {
        self.rows() * self.cols()
    }

    pub fn divides(&self) -> bool {
        self.image_width % self.patch_size == 0 && self.image_height % self.patch_size == 0
    }

    /// Patch index holding pixel `(x, y)`.
    pub fn patch_of(&self, x: u32, y: u32) -> usize {
        (y / self.patch_size) as usize * self.cols() + (x / self.patch_size) as usize
    }

    /// Pixel rectangle `(x0, y0, width, height)` of patch `i`.
    pub fn patch_rect(&self, i: usize) -> (u32, u32, u32, u32) {
        let (r, c) = ((i / self.cols()) as u32, (i % self.cols()) as u32);
        let (x0, y0) = (c * self.patch_size, r * self.patch_size);
        (x0, y0, self.patch_size.min(self.image_width - x0), self.patch_size.min(self.image_height - y0))
    }

    fn check(&self, mask: &BinaryMask) -> Result<(), InterventionError> {
        let actual = (mask.width(), mask.height());
        let expected = (self.image_width, self.image_height);
        if actual != expected || self.patch_size == 0 {
            return Err(InterventionError::DimensionMismatch { expected, actual });
        }
        Ok(())
    }
}

/// Number of mask pixels inside each patch.
pub fn overlap_counts(mask: &BinaryMask, grid: &PatchGrid) -> Result<Vec<u32>, InterventionError> {
    grid.check(mask)?;
    let mut counts = vec![0u32; grid.num_patches()];
    for y in 0..mask.height() {
        for x in 0..mask.width() {
            if mask.get(x, y) {
                counts[grid.patch_of(x, y)] += 1;
            }
        }
    }
    Ok(counts)
}

/// Fraction of each patch covered by the mask.
pub fn overlap_ratio(mask: &BinaryMask, grid: &PatchGrid) -> Result<Vec<f64>, InterventionError> {
    let counts = overlap_counts(mask, grid)?;
    Ok(counts
        .iter()
        .enumerate()
        .map(|(i, &c)| {
            let (_, _, w, h) = grid.patch_rect(i);
            c as f64 / (w as f64 * h as f64)
        })
        .collect())
}

/// Indices `i` with `rho[i] > tau`.
pub fn object_token_set(rho: &[f64], tau: f64) -> Vec<usize> {
    rho.iter().enumerate().filter(|(_, r)| **r > tau).map(|(i, _)| i).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trivial_masks() {
        let g = PatchGrid::new(14, 28, 42).unwrap();
        assert_eq!(g.num_patches(), 6);
        assert!(overlap_ratio(&BinaryMask::filled(28, 42, true), &g).unwrap().iter().all(|r| *r == 1.0));
        assert!(overlap_ratio(&BinaryMask::new(28, 42), &g).unwrap().iter().all(|r| *r == 0.0));
    }

    #[test]
    fn left_half_is_half() {
        let g = PatchGrid::new(14, 14, 14).unwrap();
        let m = BinaryMask::from_fn(14, 14, |x, _| x < 7);
        assert_eq!(overlap_ratio(&m, &g).unwrap(), vec![0.5]);
    }

    #[test]
    fn row_major_order() {
        let g = PatchGrid::new(2, 4, 4).unwrap();
        let m = BinaryMask::from_fn(4, 4, |x, y| x >= 2 && y < 2);
        assert_eq!(overlap_ratio(&m, &g).unwrap(), vec![0.0, 1.0, 0.0, 0.0]);
    }

    #[test]
    fn partial_patches_use_true_area() {
        let g = PatchGrid::new(4, 6, 5).unwrap();
        assert_eq!((g.rows(), g.cols()), (2, 2));
        assert_eq!(g.patch_rect(3), (4, 4, 2, 1));
        let rho = overlap_ratio(&BinaryMask::filled(6, 5, true), &g).unwrap();
        assert_eq!(rho, vec![1.0; 4]);
    }

    #[test]
    fn dimension_mismatch() {
        let g = PatchGrid::new(2, 4, 4).unwrap();
        assert_eq!(
            overlap_ratio(&BinaryMask::new(4, 5), &g),
            Err(InterventionError::DimensionMismatch { expected: (4, 4), actual: (4, 5) })
        );
    }

    #[test]
    fn strict_threshold() {
        assert_eq!(object_token_set(&[0.0, 0.1, 0.11], 0.1), vec![2]);
        assert_eq!(object_token_set(&[0.1, 0.100001], 0.1), vec![1]);
        assert_eq!(object_token_set(&[0.0, 0.3, 0.0, 0.01], 0.0), vec![1, 3]);
        assert!(object_token_set(&[0.0; 4], 0.1).is_empty());
    }
}
