use serde::{Deserialize, Serialize};

use super::{ColorName, Pattern, Rgb};
use crate::rng::hash2;

pub const DEFAULT_PERIOD: u32 = 16;
pub const DEFAULT_STROKE: u32 = 4;
pub const DEFAULT_DOT_RADIUS: u32 = 3;
const BUBBLE_CELL: i64 = 32;

/// A procedural fill. `palette[0]` is the foreground (stripes, dots, gradient start),
/// `palette[1]` the ground.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Texture {
    pub pattern: Pattern,
    pub period: u32,
    pub stroke: u32,
    pub dot_radius: u32,
    pub palette: [ColorName; 2],
}

impl Texture {
    pub fn new(pattern: Pattern, foreground: ColorName, ground: ColorName) -> Self {
        Self {
            pattern,
            period: DEFAULT_PERIOD,
            stroke: DEFAULT_STROKE,
            dot_radius: DEFAULT_DOT_RADIUS,
            palette: [foreground, ground],
        }
    }
}

/// The rectangle a texture is laid out in. Coordinates inside are taken relative to its
/// top-left corner so object textures move with the object.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Region {
    pub x0: i64,
    pub y0: i64,
    pub width: i64,
    pub height: i64,
}

fn isqrt(n: u64) -> u64 {
    if n < 2 {
        return n;
    }
    let mut x = (n as f64).sqrt() as u64;
    while x * x > n {
        x -= 1;
    }
    while (x + 1) * (x + 1) <= n {
        x += 1;
    }
    x
}

impl Texture {
    /// Color at absolute pixel `(x, y)` for a texture laid out over `region`.
    pub(crate) fn texel(&self, region: Region, x: i64, y: i64, seed: u64) -> Rgb {
        let fg = self.palette[0].rgb();
        let bg = self.palette[1].rgb();
        let u = x - region.x0;
        let v = y - region.y0;
        let p = self.period.max(1) as i64;
        let s = self.stroke as i64;
        let pick = |on: bool| if on { fg } else { bg };
        // Doubled coordinates relative to the region center keep the center exact for even sizes.
        let du = 2 * u - (region.width - 1);
        let dv = 2 * v - (region.height - 1);
        let dist2x = isqrt((du * du + dv * dv) as u64) as i64; // twice the radial distance
        match self.pattern {
            Pattern::Checkerboard => pick((u.div_euclid(p) + v.div_euclid(p)).rem_euclid(2) == 0),
            Pattern::Dots => {
                let half = p / 2;
                let ox = u.rem_euclid(p) - half;
                let oy = v.rem_euclid(p) - half;
                let r = self.dot_radius as i64;
                pick(ox * ox + oy * oy <= r * r)
            }
            Pattern::DiagonalStripes => pick((u + v).rem_euclid(p) < s),
            Pattern::VerticalStripes => pick(u.rem_euclid(p) < s),
            Pattern::HorizontalStripes => pick(v.rem_euclid(p) < s),
            Pattern::Crosshatch => pick((u + v).rem_euclid(p) < s || (u - v).rem_euclid(p) < s),
            Pattern::Zigzag => {
                let t = u.rem_euclid(p);
                let tri = if t < p / 2 { t } else { p - t };
                pick((v + tri).rem_euclid(p) < s)
            }
            Pattern::LinearGradient => {
                let den = (region.width - 1).max(1) as u64;
                let num = u.clamp(0, den as i64) as u64;
                Rgb::lerp(fg, bg, num, den)
            }
            Pattern::RadialGradient => {
                let den = (region.width.max(region.height) - 1).max(1) as u64;
                let num = (dist2x as u64).min(den);
                Rgb::lerp(fg, bg, num, den)
            }
            Pattern::ConcentricCircles => pick((dist2x / p).rem_euclid(2) == 0),
            Pattern::ConcentricRings => pick((dist2x / 2).rem_euclid(p) < s),
            Pattern::Bubbles => {
                let (cx, cy) = (u.div_euclid(BUBBLE_CELL), v.div_euclid(BUBBLE_CELL));
                let h = hash2(seed, cx, cy);
                // Center offset in [12, 19], radius in [4, 11]: each bubble stays inside its cell.
                let bx = cx * BUBBLE_CELL + 12 + (h & 7) as i64;
                let by = cy * BUBBLE_CELL + 12 + ((h >> 3) & 7) as i64;
                let r = 4 + ((h >> 6) % 8) as i64;
                let d2 = (u - bx) * (u - bx) + (v - by) * (v - by);
                let inner = (r - 2).max(0);
                pick(d2 <= r * r && d2 > inner * inner)
            }
            Pattern::Noise => {
                let g = (hash2(seed, u, v) & 0xFF) as u8;
                Rgb(g, g, g)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn region() -> Region {
        Region { x0: 0, y0: 0, width: 64, height: 64 }
    }

    #[test]
    fn stripes_have_stroke_over_period_coverage() {
        let t = Texture::new(Pattern::VerticalStripes, ColorName::Black, ColorName::White);
        let on = (0..64).filter(|&x| t.texel(region(), x, 0, 0) == Rgb(0, 0, 0)).count();
        assert_eq!(on, 64 / 16 * 4);
    }

    #[test]
    fn checkerboard_alternates_cells() {
        let t = Texture::new(Pattern::Checkerboard, ColorName::Black, ColorName::White);
        assert_ne!(t.texel(region(), 0, 0, 0), t.texel(region(), 16, 0, 0));
        assert_eq!(t.texel(region(), 0, 0, 0), t.texel(region(), 16, 16, 0));
    }

    #[test]
    fn linear_gradient_spans_palette() {
        let t = Texture::new(Pattern::LinearGradient, ColorName::Black, ColorName::White);
        assert_eq!(t.texel(region(), 0, 5, 0), Rgb(0, 0, 0));
        assert_eq!(t.texel(region(), 63, 5, 0), Rgb(255, 255, 255));
    }

    #[test]
    fn noise_is_seeded() {
        let t = Texture::new(Pattern::Noise, ColorName::Black, ColorName::White);
        let a: Vec<Rgb> = (0..32).map(|x| t.texel(region(), x, 3, 1)).collect();
        let b: Vec<Rgb> = (0..32).map(|x| t.texel(region(), x, 3, 1)).collect();
        let c: Vec<Rgb> = (0..32).map(|x| t.texel(region(), x, 3, 2)).collect();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn isqrt_is_floor() {
        for n in 0..10_000u64 {
            let r = isqrt(n);
            assert!(r * r <= n && (r + 1) * (r + 1) > n);
        }
    }
}
