//! Synthetic counting scenes.
//!
//! A [`SceneSpec`] fully determines a rendered bitmap and its ground-truth
//! [`SceneManifest`]. Rasterization is integer-only: a pixel `(x, y)` belongs to
//! a shape iff the point `(x, y)` lies inside it, with no anti-aliasing.

mod dataset;
mod geometry;
mod manifest;
mod placement;
mod render;
mod texture;

pub use dataset::{
    generate_dataset, build_dataset, prototype_object, DatasetConfig, DatasetEntry, DatasetIndex, IndexEntry, VariationAxis,
    BASELINE_VALUE, INDEX_FILE,
};
pub use geometry::Footprint;
pub use manifest::{ManifestObject, SceneManifest};
pub use placement::{place_objects, Placement, PLACEMENT_ATTEMPT_BUDGET};
pub use render::{derive_object_mask, render_scene};
pub use texture::Texture;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const CANVAS_SIZE: u32 = 512;

#[derive(Debug, Error)]
pub enum SceneError {
    #[error("cannot place {count} objects with sizes {min_size}..={max_size} on {width}x{height} canvas (margin {margin}): {reason}")]
    PlacementInfeasible {
        count: usize,
        min_size: u32,
        max_size: u32,
        width: u32,
        height: u32,
        margin: u32,
        reason: String,
    },
    #[error("invalid scene: {0}")]
    InvalidSpec(String),
    #[error("bucket {bucket}: {source}")]
    Bucket {
        bucket: String,
        #[source]
        source: Box<SceneError>,
    },
    #[error("i/o error at {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("png encoding failed for {path}: {source}")]
    Png {
        path: String,
        #[source]
        source: image::ImageError,
    },
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Shape {
    Circle,
    Rectangle,
    Triangle,
    Polygon,
    Star,
}

impl Shape {
    pub const ALL: [Shape; 5] = [Shape::Circle, Shape::Rectangle, Shape::Triangle, Shape::Polygon, Shape::Star];

    pub fn name(self) -> &'static str {
        match self {
            Shape::Circle => "circle",
            Shape::Rectangle => "rectangle",
            Shape::Triangle => "triangle",
            Shape::Polygon => "polygon",
            Shape::Star => "star",
        }
    }

    /// Plural noun used in prompts ("circles", "stars", ...).
    pub fn plural(self) -> &'static str {
        match self {
            Shape::Circle => "circles",
            Shape::Rectangle => "rectangles",
            Shape::Triangle => "triangles",
            Shape::Polygon => "polygons",
            Shape::Star => "stars",
        }
    }
}

/// Named colors. Object and background scenes draw from different subsets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ColorName {
    Black,
    White,
    Red,
    Yellow,
    Blue,
    Green,
    Gray,
    LightGray,
    BlueGreen,
}

impl ColorName {
    pub fn rgb(self) -> Rgb {
        match self {
            ColorName::Black => Rgb(0, 0, 0),
            ColorName::White => Rgb(255, 255, 255),
            ColorName::Red => Rgb(255, 0, 0),
            ColorName::Yellow => Rgb(255, 255, 0),
            ColorName::Blue => Rgb(0, 0, 255),
            ColorName::Green => Rgb(0, 128, 0),
            ColorName::Gray => Rgb(128, 128, 128),
            ColorName::LightGray => Rgb(211, 211, 211),
            ColorName::BlueGreen => Rgb(0, 128, 128),
        }
    }

    /// Prompt vocabulary for the color.
    pub fn label(self) -> &'static str {
        match self {
            ColorName::Black => "black",
            ColorName::White => "white",
            ColorName::Red => "red",
            ColorName::Yellow => "yellow",
            ColorName::Blue => "blue",
            ColorName::Green => "green",
            ColorName::Gray => "gray",
            ColorName::LightGray => "light gray",
            ColorName::BlueGreen => "blue-green",
        }
    }

    /// Directory-safe identifier.
    pub fn slug(self) -> &'static str {
        match self {
            ColorName::LightGray => "light_gray",
            ColorName::BlueGreen => "blue_green",
            other => other.label(),
        }
    }
}

/// Colors cycled over objects in a multicolor scene.
pub const MULTICOLOR_PALETTE: [ColorName; 6] =
    [ColorName::Red, ColorName::Yellow, ColorName::Blue, ColorName::Green, ColorName::Black, ColorName::LightGray];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Rgb(pub u8, pub u8, pub u8);

impl Rgb {
    pub fn lerp(a: Rgb, b: Rgb, num: u64, den: u64) -> Rgb {
        debug_assert!(den > 0 && num <= den);
        let mix = |a: u8, b: u8| -> u8 { ((a as u64 * (den - num) + b as u64 * num + den / 2) / den) as u8 };
        Rgb(mix(a.0, b.0), mix(a.1, b.1), mix(a.2, b.2))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pattern {
    Checkerboard,
    Dots,
    DiagonalStripes,
    VerticalStripes,
    HorizontalStripes,
    LinearGradient,
    RadialGradient,
    ConcentricCircles,
    ConcentricRings,
    Crosshatch,
    Zigzag,
    Bubbles,
    Noise,
}

impl Pattern {
    /// Patterns that may fill an object.
    pub const OBJECT: [Pattern; 10] = [
        Pattern::Checkerboard,
        Pattern::ConcentricCircles,
        Pattern::Crosshatch,
        Pattern::DiagonalStripes,
        Pattern::Dots,
        Pattern::HorizontalStripes,
        Pattern::LinearGradient,
        Pattern::RadialGradient,
        Pattern::VerticalStripes,
        Pattern::Zigzag,
    ];

    /// Patterns that may fill the background.
    pub const BACKGROUND: [Pattern; 12] = [
        Pattern::Checkerboard,
        Pattern::ConcentricRings,
        Pattern::Crosshatch,
        Pattern::DiagonalStripes,
        Pattern::Dots,
        Pattern::HorizontalStripes,
        Pattern::LinearGradient,
        Pattern::RadialGradient,
        Pattern::VerticalStripes,
        Pattern::Zigzag,
        Pattern::Bubbles,
        Pattern::Noise,
    ];

    pub fn allowed_on_object(self) -> bool {
        !matches!(self, Pattern::Bubbles | Pattern::Noise | Pattern::ConcentricRings)
    }

    pub fn allowed_on_background(self) -> bool {
        !matches!(self, Pattern::ConcentricCircles)
    }

    /// Prompt vocabulary for the pattern.
    pub fn label(self) -> &'static str {
        match self {
            Pattern::Checkerboard => "checkerboard",
            Pattern::Dots => "dots",
            Pattern::DiagonalStripes => "diagonal stripes",
            Pattern::VerticalStripes => "vertical stripes",
            Pattern::HorizontalStripes => "horizontal stripes",
            Pattern::LinearGradient => "linear gradient",
            Pattern::RadialGradient => "radial gradient",
            Pattern::ConcentricCircles => "concentric circles",
            Pattern::ConcentricRings => "concentric rings",
            Pattern::Crosshatch => "crosshatch",
            Pattern::Zigzag => "zigzag",
            Pattern::Bubbles => "bubbles",
            Pattern::Noise => "noise",
        }
    }

    pub fn slug(self) -> String {
        self.label().replace(' ', "_")
    }
}

/// How a region (object or background) is painted.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Paint {
    SolidColor { color: ColorName },
    Texture(Texture),
}

impl Paint {
    pub fn solid(color: ColorName) -> Self {
        Paint::SolidColor { color }
    }

    /// The dominant named color: the solid color or the texture's foreground.
    pub fn primary_color(&self) -> ColorName {
        match self {
            Paint::SolidColor { color } => *color,
            Paint::Texture(t) => t.palette[0],
        }
    }

    pub fn pattern(&self) -> Option<Pattern> {
        match self {
            Paint::SolidColor { .. } => None,
            Paint::Texture(t) => Some(t.pattern),
        }
    }
}

/// Which single factor a scene varies from the baseline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VariationTag {
    Baseline,
    BgColor,
    BgTexture,
    ObjColor,
    ObjShape,
    ObjTexture,
}

impl VariationTag {
    pub fn name(self) -> &'static str {
        match self {
            VariationTag::Baseline => "baseline",
            VariationTag::BgColor => "bg_color",
            VariationTag::BgTexture => "bg_texture",
            VariationTag::ObjColor => "obj_color",
            VariationTag::ObjShape => "obj_shape",
            VariationTag::ObjTexture => "obj_texture",
        }
    }

    /// ("Bg" | "Obj", feature) as used in report tables.
    pub fn table_axes(self) -> (&'static str, &'static str) {
        match self {
            VariationTag::Baseline => ("Base", "baseline"),
            VariationTag::BgColor => ("Bg", "color"),
            VariationTag::BgTexture => ("Bg", "texture"),
            VariationTag::ObjColor => ("Obj", "color"),
            VariationTag::ObjShape => ("Obj", "shape"),
            VariationTag::ObjTexture => ("Obj", "texture"),
        }
    }
}

impl std::str::FromStr for VariationTag {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        serde_json::from_value(serde_json::Value::String(s.to_string()))
            .map_err(|_| format!("unknown variation tag {s:?}"))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObjectSpec {
    pub shape: Shape,
    pub fill: Paint,
    /// Pixel coordinates `(x, y)`.
    pub center: (i32, i32),
    /// Radius for circles, circumradius for the other shapes.
    pub size: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SceneSpec {
    pub width: u32,
    pub height: u32,
    pub background: Paint,
    pub objects: Vec<ObjectSpec>,
    pub variation_tag: VariationTag,
    pub seed: u64,
}

impl SceneSpec {
    /// Checks that objects are inside the canvas, use allowed patterns and do not overlap.
    pub fn validate(&self) -> Result<(), SceneError> {
        if self.width == 0 || self.height == 0 {
            return Err(SceneError::InvalidSpec("empty canvas".into()));
        }
        if let Some(p) = self.background.pattern() {
            if !p.allowed_on_background() {
                return Err(SceneError::InvalidSpec(format!("pattern {} not allowed on background", p.label())));
            }
        }
        let footprints: Vec<Footprint> = self.objects.iter().map(Footprint::of).collect();
        for (i, (obj, fp)) in self.objects.iter().zip(&footprints).enumerate() {
            if let Some(p) = obj.fill.pattern() {
                if !p.allowed_on_object() {
                    return Err(SceneError::InvalidSpec(format!("object {i}: pattern {} not allowed", p.label())));
                }
            }
            let (x0, y0, x1, y1) = fp.bounds();
            if x0 < 0 || y0 < 0 || x1 >= self.width as i32 || y1 >= self.height as i32 {
                return Err(SceneError::InvalidSpec(format!("object {i} extends outside the canvas")));
            }
        }
        for i in 0..footprints.len() {
            for j in i + 1..footprints.len() {
                if footprints[i].overlaps(&footprints[j]) {
                    return Err(SceneError::InvalidSpec(format!("objects {i} and {j} overlap")));
                }
            }
        }
        Ok(())
    }
}
