use image::RgbImage;

use super::texture::Region;
use super::{Footprint, Paint, SceneError, SceneSpec};
use crate::mask::BinaryMask;

fn paint_at(paint: &Paint, region: Region, x: i64, y: i64, seed: u64) -> image::Rgb<u8> {
    let c = match paint {
        Paint::SolidColor { color } => color.rgb(),
        Paint::Texture(t) => t.texel(region, x, y, seed),
    };
    image::Rgb([c.0, c.1, c.2])
}

/// Renders the background, then each object in list order.
pub fn render_scene(spec: &SceneSpec) -> Result<RgbImage, SceneError> {
    spec.validate()?;
    let canvas = Region { x0: 0, y0: 0, width: spec.width as i64, height: spec.height as i64 };
    let mut img = RgbImage::from_fn(spec.width, spec.height, |x, y| {
        paint_at(&spec.background, canvas, x as i64, y as i64, spec.seed)
    });
    for obj in &spec.objects {
        let fp = Footprint::of(obj);
        let s = obj.size as i64;
        let region = Region {
            x0: obj.center.0 as i64 - s,
            y0: obj.center.1 as i64 - s,
            width: 2 * s + 1,
            height: 2 * s + 1,
        };
        let (x0, y0, x1, y1) = fp.bounds();
        for y in y0..=y1 {
            for x in x0..=x1 {
                if fp.contains(x as i64, y as i64) {
                    img.put_pixel(x as u32, y as u32, paint_at(&obj.fill, region, x as i64, y as i64, spec.seed));
                }
            }
        }
    }
    Ok(img)
}

/// Union of all object footprints under the same rasterization rule as [`render_scene`].
pub fn derive_object_mask(spec: &SceneSpec) -> Result<BinaryMask, SceneError> {
    spec.validate()?;
    let mut mask = BinaryMask::new(spec.width, spec.height);
    for obj in &spec.objects {
        let fp = Footprint::of(obj);
        let (x0, y0, x1, y1) = fp.bounds();
        for y in y0..=y1 {
            for x in x0..=x1 {
                if fp.contains(x as i64, y as i64) {
                    mask.set(x as u32, y as u32, true);
                }
            }
        }
    }
    Ok(mask)
}
