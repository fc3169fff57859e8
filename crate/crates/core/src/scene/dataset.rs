//! Dataset generation: a balanced baseline set plus single-factor variations of it.

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{
    place_objects, render_scene, ColorName, ObjectSpec, Paint, Pattern, SceneError, SceneManifest, SceneSpec, Shape,
    Texture, VariationTag, CANVAS_SIZE, MULTICOLOR_PALETTE,
};
use crate::metrics::CountBucket;
use crate::rng;

/// Value slug used for the baseline set.
pub const BASELINE_VALUE: &str = "default";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VariationAxis {
    pub tag: VariationTag,
    /// Value slugs to emit; empty means every value the axis supports.
    #[serde(default)]
    pub values: Vec<String>,
}

impl VariationAxis {
    pub fn all(tag: VariationTag) -> Self {
        Self { tag, values: Vec::new() }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct DatasetConfig {
    pub master_seed: u64,
    pub per_bucket: usize,
    pub size_bounds: (u32, u32),
    pub margin: u32,
    pub canvas: u32,
    pub axes: Vec<VariationAxis>,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        Self {
            master_seed: 0,
            per_bucket: 10,
            size_bounds: (8, 24),
            margin: 4,
            canvas: CANVAS_SIZE,
            axes: [
                VariationTag::BgColor,
                VariationTag::BgTexture,
                VariationTag::ObjColor,
                VariationTag::ObjShape,
                VariationTag::ObjTexture,
            ]
            .into_iter()
            .map(VariationAxis::all)
            .collect(),
        }
    }
}

/// One variation value, resolved.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Variation {
    Baseline,
    BgColor(ColorName),
    BgTexture(Pattern),
    ObjColor(Option<ColorName>), // None = multicolor
    ObjShape(Shape),
    ObjTexture(Pattern),
}

const BG_COLORS: [ColorName; 6] =
    [ColorName::Black, ColorName::Red, ColorName::Yellow, ColorName::Blue, ColorName::Gray, ColorName::Green];
const OBJ_COLORS: [ColorName; 6] =
    [ColorName::White, ColorName::Red, ColorName::Yellow, ColorName::Blue, ColorName::LightGray, ColorName::Green];
const MULTICOLOR: &str = "multicolor";

impl Variation {
    fn slug(self) -> String {
        match self {
            Variation::Baseline => BASELINE_VALUE.into(),
            Variation::BgColor(c) | Variation::ObjColor(Some(c)) => c.slug().into(),
            Variation::ObjColor(None) => MULTICOLOR.into(),
            Variation::BgTexture(p) | Variation::ObjTexture(p) => p.slug(),
            Variation::ObjShape(s) => s.name().into(),
        }
    }

    fn all_for(tag: VariationTag) -> Vec<Variation> {
        match tag {
            VariationTag::Baseline => vec![Variation::Baseline],
            VariationTag::BgColor => BG_COLORS.iter().map(|&c| Variation::BgColor(c)).collect(),
            VariationTag::BgTexture => Pattern::BACKGROUND.iter().map(|&p| Variation::BgTexture(p)).collect(),
            VariationTag::ObjColor => OBJ_COLORS
                .iter()
                .map(|&c| Variation::ObjColor(Some(c)))
                .chain(std::iter::once(Variation::ObjColor(None)))
                .collect(),
            VariationTag::ObjShape => Shape::ALL.iter().map(|&s| Variation::ObjShape(s)).collect(),
            VariationTag::ObjTexture => Pattern::OBJECT.iter().map(|&p| Variation::ObjTexture(p)).collect(),
        }
    }

    fn resolve(axis: &VariationAxis) -> Result<Vec<Variation>, SceneError> {
        let all = Self::all_for(axis.tag);
        if axis.values.is_empty() {
            return Ok(all);
        }
        axis.values
            .iter()
            .map(|v| {
                all.iter().copied().find(|x| x.slug() == *v).ok_or_else(|| {
                    SceneError::InvalidSpec(format!("{} has no value {v:?}", axis.tag.name()))
                })
            })
            .collect()
    }

    fn tag(self) -> VariationTag {
        match self {
            Variation::Baseline => VariationTag::Baseline,
            Variation::BgColor(_) => VariationTag::BgColor,
            Variation::BgTexture(_) => VariationTag::BgTexture,
            Variation::ObjColor(_) => VariationTag::ObjColor,
            Variation::ObjShape(_) => VariationTag::ObjShape,
            Variation::ObjTexture(_) => VariationTag::ObjTexture,
        }
    }

    /// Applies this variation to a baseline scene; placements are never touched.
    fn apply(self, base: &SceneSpec) -> SceneSpec {
        let mut spec = base.clone();
        spec.variation_tag = self.tag();
        let set_fill = |spec: &mut SceneSpec, f: &dyn Fn(usize) -> Paint| {
            for (i, o) in spec.objects.iter_mut().enumerate() {
                o.fill = f(i);
            }
        };
        match self {
            Variation::Baseline => {}
            // Background experiments use white objects so every background color stays legible.
            Variation::BgColor(c) => {
                spec.background = Paint::solid(c);
                set_fill(&mut spec, &|_| Paint::solid(ColorName::White));
            }
            Variation::BgTexture(p) => {
                spec.background = Paint::Texture(Texture::new(p, ColorName::BlueGreen, ColorName::Black));
                set_fill(&mut spec, &|_| Paint::solid(ColorName::White));
            }
            Variation::ObjColor(Some(c)) => set_fill(&mut spec, &|_| Paint::solid(c)),
            Variation::ObjColor(None) => {
                set_fill(&mut spec, &|i| Paint::solid(MULTICOLOR_PALETTE[i % MULTICOLOR_PALETTE.len()]))
            }
            Variation::ObjShape(s) => {
                for o in &mut spec.objects {
                    o.shape = s;
                }
            }
            Variation::ObjTexture(p) => {
                set_fill(&mut spec, &|_| Paint::Texture(Texture::new(p, ColorName::BlueGreen, ColorName::Black)))
            }
        }
        spec
    }
}

/// The object a variation would draw, for describing scenes that contain none.
pub fn prototype_object(tag: VariationTag, value: &str) -> Option<ObjectSpec> {
    let v = Variation::resolve(&VariationAxis { tag, values: vec![value.to_string()] }).ok()?.pop()?;
    let base = SceneSpec {
        width: 1,
        height: 1,
        background: Paint::solid(ColorName::White),
        objects: vec![ObjectSpec { shape: Shape::Circle, fill: Paint::solid(ColorName::Black), center: (0, 0), size: 1 }],
        variation_tag: VariationTag::Baseline,
        seed: 0,
    };
    v.apply(&base).objects.pop()
}

/// A scene and its manifest, with the path (relative to the dataset root) without extension.
#[derive(Debug, Clone)]
pub struct DatasetEntry {
    pub spec: SceneSpec,
    pub manifest: SceneManifest,
    pub rel_stem: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexEntry {
    pub image_id: String,
    pub base_index: usize,
    pub variation_tag: VariationTag,
    pub variation_value: String,
    pub count_bucket: CountBucket,
    pub true_count: u32,
    pub image_path: String,
    pub manifest_path: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetIndex {
    pub master_seed: u64,
    pub config: DatasetConfig,
    pub images: Vec<IndexEntry>,
}

pub const INDEX_FILE: &str = "index.json";

impl DatasetIndex {
    pub fn load(root: &Path) -> Result<Self, SceneError> {
        let path = root.join(INDEX_FILE);
        let text = fs::read_to_string(&path).map_err(|source| SceneError::Io { path: path.display().to_string(), source })?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn load_manifest(&self, root: &Path, entry: &IndexEntry) -> Result<SceneManifest, SceneError> {
        let path = root.join(&entry.manifest_path);
        let text = fs::read_to_string(&path).map_err(|source| SceneError::Io { path: path.display().to_string(), source })?;
        SceneManifest::from_json(&text)
    }

    pub fn load_manifests(&self, root: &Path) -> Result<Vec<SceneManifest>, SceneError> {
        self.images.iter().map(|e| self.load_manifest(root, e)).collect()
    }
}

fn baseline_spec(config: &DatasetConfig, index: usize) -> Result<SceneSpec, SceneError> {
    let bucket = CountBucket::REPORTED[index / config.per_bucket];
    let (lo, hi) = bucket.range();
    let seed = rng::image_seed(config.master_seed, index as u64);
    let count = lo + (rng::splitmix64(seed) % (hi - lo + 1) as u64) as u32;
    let placements = place_objects(count as usize, config.size_bounds, (config.canvas, config.canvas), config.margin, seed)
        .map_err(|e| SceneError::Bucket { bucket: bucket.to_string(), source: Box::new(e) })?;
    Ok(SceneSpec {
        width: config.canvas,
        height: config.canvas,
        background: Paint::solid(ColorName::White),
        objects: placements
            .into_iter()
            .map(|p| ObjectSpec { shape: Shape::Circle, fill: Paint::solid(ColorName::Black), center: p.center, size: p.size })
            .collect(),
        variation_tag: VariationTag::Baseline,
        seed,
    })
}

/// Builds every scene and manifest in memory, baseline first.
pub fn build_dataset(config: &DatasetConfig) -> Result<Vec<DatasetEntry>, SceneError> {
    if config.per_bucket == 0 {
        return Err(SceneError::InvalidSpec("per_bucket must be positive".into()));
    }
    let n = config.per_bucket * CountBucket::REPORTED.len();
    let bases: Vec<SceneSpec> = (0..n).into_par_iter().map(|i| baseline_spec(config, i)).collect::<Result<_, _>>()?;

    let mut variations = vec![Variation::Baseline];
    for axis in &config.axes {
        if axis.tag != VariationTag::Baseline {
            variations.extend(Variation::resolve(axis)?);
        }
    }
    let jobs: Vec<(Variation, usize)> = variations.iter().flat_map(|&v| (0..n).map(move |i| (v, i))).collect();
    jobs.into_par_iter()
        .map(|(v, i)| {
            let spec = v.apply(&bases[i]);
            let slug = v.slug();
            let tag = v.tag().name();
            let image_id = format!("{tag}-{slug}-{i:03}");
            let manifest = SceneManifest::from_spec(&spec, image_id.clone(), i, slug.clone())?;
            Ok(DatasetEntry { spec, manifest, rel_stem: PathBuf::from(tag).join(&slug).join(image_id) })
        })
        .collect()
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> SceneError + '_ {
    move |source| SceneError::Io { path: path.display().to_string(), source }
}

fn rel(path: &Path) -> String {
    path.components().map(|c| c.as_os_str().to_string_lossy()).collect::<Vec<_>>().join("/")
}

/// Writes `<root>/<tag>/<value>/<image_id>.{png,json}` for every scene plus `<root>/index.json`.
pub fn generate_dataset(config: &DatasetConfig, root: &Path) -> Result<DatasetIndex, SceneError> {
    let entries = build_dataset(config)?;
    entries.par_iter().try_for_each(|e| -> Result<(), SceneError> {
        let png = root.join(e.rel_stem.with_extension("png"));
        let json = root.join(e.rel_stem.with_extension("json"));
        if let Some(dir) = png.parent() {
            fs::create_dir_all(dir).map_err(io_err(dir))?;
        }
        let img = render_scene(&e.spec)?;
        img.save_with_format(&png, image::ImageFormat::Png)
            .map_err(|source| SceneError::Png { path: png.display().to_string(), source })?;
        let text = serde_json::to_string_pretty(&e.manifest)?;
        fs::write(&json, text + "\n").map_err(io_err(&json))?;
        Ok(())
    })?;
    let index = DatasetIndex {
        master_seed: config.master_seed,
        config: config.clone(),
        images: entries
            .iter()
            .map(|e| IndexEntry {
                image_id: e.manifest.image_id.clone(),
                base_index: e.manifest.base_index,
                variation_tag: e.manifest.variation_tag,
                variation_value: e.manifest.variation_value.clone(),
                count_bucket: e.manifest.count_bucket,
                true_count: e.manifest.true_count,
                image_path: rel(&e.rel_stem.with_extension("png")),
                manifest_path: rel(&e.rel_stem.with_extension("json")),
            })
            .collect(),
    };
    fs::create_dir_all(root).map_err(io_err(root))?;
    let path = root.join(INDEX_FILE);
    fs::write(&path, serde_json::to_string_pretty(&index)? + "\n").map_err(io_err(&path))?;
    Ok(index)
}
