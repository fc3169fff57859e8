use serde::{Deserialize, Serialize};

use super::{derive_object_mask, Footprint, ObjectSpec, Paint, SceneError, SceneSpec, Shape, VariationTag};
use crate::mask::BinaryMask;
use crate::metrics::CountBucket;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestObject {
    pub shape: Shape,
    pub fill: Paint,
    pub center: (i32, i32),
    pub size: u32,
    /// Inclusive `[x_min, y_min, x_max, y_max]` of covered pixels.
    pub bbox: [i32; 4],
}

/// Ground truth for one rendered image.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneManifest {
    pub image_id: String,
    /// Position of the scene in the baseline set; shared by all its variations.
    pub base_index: usize,
    pub true_count: u32,
    pub count_bucket: CountBucket,
    pub variation_tag: VariationTag,
    /// Color, shape or pattern slug for the varied factor (`default` for the baseline).
    pub variation_value: String,
    pub seed: u64,
    pub width: u32,
    pub height: u32,
    pub background: Paint,
    pub objects: Vec<ManifestObject>,
    pub object_mask: BinaryMask,
}

impl SceneManifest {
    pub fn from_spec(
        spec: &SceneSpec,
        image_id: impl Into<String>,
        base_index: usize,
        variation_value: impl Into<String>,
    ) -> Result<Self, SceneError> {
        let object_mask = derive_object_mask(spec)?;
        let objects = spec
            .objects
            .iter()
            .map(|o| ManifestObject {
                shape: o.shape,
                fill: o.fill.clone(),
                center: o.center,
                size: o.size,
                bbox: Footprint::of(o).pixel_bbox().unwrap_or([o.center.0, o.center.1, o.center.0, o.center.1]),
            })
            .collect();
        let true_count = spec.objects.len() as u32;
        Ok(Self {
            image_id: image_id.into(),
            base_index,
            true_count,
            count_bucket: CountBucket::of(true_count),
            variation_tag: spec.variation_tag,
            variation_value: variation_value.into(),
            seed: spec.seed,
            width: spec.width,
            height: spec.height,
            background: spec.background.clone(),
            objects,
            object_mask,
        })
    }

    /// Rebuilds the scene this manifest describes.
    pub fn scene_spec(&self) -> SceneSpec {
        SceneSpec {
            width: self.width,
            height: self.height,
            background: self.background.clone(),
            objects: self
                .objects
                .iter()
                .map(|o| ObjectSpec { shape: o.shape, fill: o.fill.clone(), center: o.center, size: o.size })
                .collect(),
            variation_tag: self.variation_tag,
            seed: self.seed,
        }
    }

    /// Parses and checks internal consistency (count, bucket, mask size).
    pub fn from_json(text: &str) -> Result<Self, SceneError> {
        let m: SceneManifest = serde_json::from_str(text)?;
        m.check()?;
        Ok(m)
    }

    pub fn check(&self) -> Result<(), SceneError> {
        let bad = |msg: String| Err(SceneError::InvalidSpec(format!("manifest {}: {msg}", self.image_id)));
        if self.true_count as usize != self.objects.len() {
            return bad(format!("true_count {} but {} objects", self.true_count, self.objects.len()));
        }
        if self.count_bucket != CountBucket::of(self.true_count) {
            return bad(format!("bucket {} inconsistent with count {}", self.count_bucket, self.true_count));
        }
        if (self.object_mask.width(), self.object_mask.height()) != (self.width, self.height) {
            return bad("mask dimensions differ from image".into());
        }
        if (self.object_mask.popcount() > 0) != (self.true_count > 0) {
            return bad("mask popcount inconsistent with count".into());
        }
        Ok(())
    }
}
