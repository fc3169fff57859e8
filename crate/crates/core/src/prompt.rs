//! Prompt ladders: ordered prompts of increasing attribute specificity.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scene::{prototype_object, ColorName, Paint, SceneManifest, Shape, VariationTag};

/// Appended to every rung so answers can be parsed.
pub const ANSWER_SUFFIX: &str = "Answer the count within curly brackets, eg. {10}";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PromptCategory {
    BgColor,
    BgTexture,
    ObjColor,
    ObjShape,
    ObjTexture,
}

impl PromptCategory {
    pub const ALL: [PromptCategory; 5] = [
        PromptCategory::BgColor,
        PromptCategory::BgTexture,
        PromptCategory::ObjColor,
        PromptCategory::ObjShape,
        PromptCategory::ObjTexture,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PromptCategory::BgColor => "bg_color",
            PromptCategory::BgTexture => "bg_texture",
            PromptCategory::ObjColor => "obj_color",
            PromptCategory::ObjShape => "obj_shape",
            PromptCategory::ObjTexture => "obj_texture",
        }
    }

    /// The ladder for a scene's variation axis; the baseline has none of its own.
    pub fn for_variation(tag: VariationTag) -> Option<Self> {
        match tag {
            VariationTag::Baseline => None,
            VariationTag::BgColor => Some(PromptCategory::BgColor),
            VariationTag::BgTexture => Some(PromptCategory::BgTexture),
            VariationTag::ObjColor => Some(PromptCategory::ObjColor),
            VariationTag::ObjShape => Some(PromptCategory::ObjShape),
            VariationTag::ObjTexture => Some(PromptCategory::ObjTexture),
        }
    }
}

impl fmt::Display for PromptCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for PromptCategory {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL.into_iter().find(|c| c.name() == s).ok_or_else(|| format!("unknown prompt category {s:?}"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum LadderId {
    P1,
    P2,
    P3,
    P4,
    P5,
}

impl fmt::Display for LadderId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

/// A template placeholder and the attribute it binds to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Attribute {
    Color,
    Shape,
    Pattern,
    BackgroundColor,
    BackgroundPattern,
}

impl Attribute {
    pub fn name(self) -> &'static str {
        match self {
            Attribute::Color => "color",
            Attribute::Shape => "shape",
            Attribute::Pattern => "pattern",
            Attribute::BackgroundColor => "background_color",
            Attribute::BackgroundPattern => "background_pattern",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PromptSpec {
    pub ladder_id: LadderId,
    pub category: PromptCategory,
    /// Text with `{name}` placeholders; the answer suffix is not part of it.
    pub template: &'static str,
    /// Placeholder name → attribute it is filled from.
    pub bindings: &'static [(&'static str, Attribute)],
    pub role_note: &'static str,
}

impl PromptSpec {
    /// Attributes mentioned by this rung.
    pub fn attributes(&self) -> Vec<Attribute> {
        let mut a: Vec<Attribute> = self.bindings.iter().map(|(_, a)| *a).collect();
        a.sort();
        a.dedup();
        a
    }

    pub fn id(&self) -> String {
        format!("{}/{}", self.category, self.ladder_id)
    }
}

/// Values substituted into templates. Empty strings count as missing.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttributeBindings {
    pub color: String,
    pub shape: String,
    pub pattern: String,
    pub background_color: String,
    pub background_pattern: String,
}

impl AttributeBindings {
    fn get(&self, a: Attribute) -> &str {
        match a {
            Attribute::Color => &self.color,
            Attribute::Shape => &self.shape,
            Attribute::Pattern => &self.pattern,
            Attribute::BackgroundColor => &self.background_color,
            Attribute::BackgroundPattern => &self.background_pattern,
        }
    }

    /// Bindings describing a scene, using manifest vocabulary only.
    ///
    /// Scenes without objects are described by the object their variation would draw.
    pub fn from_manifest(m: &SceneManifest) -> Self {
        let proto = prototype_object(m.variation_tag, &m.variation_value);
        let first = m.objects.first().map(|o| (o.shape, &o.fill)).or(proto.as_ref().map(|o| (o.shape, &o.fill)));
        let color = if m.variation_value == "multicolor" {
            "multicolor".to_string()
        } else {
            first.map(|(_, f)| f.primary_color().label().to_string()).unwrap_or_default()
        };
        let shape = first.map(|(s, _)| s).unwrap_or(Shape::Circle).plural().to_string();
        let pattern = first.and_then(|(_, f)| f.pattern()).map(|p| p.label().to_string()).unwrap_or_default();
        let (background_color, background_pattern) = match &m.background {
            Paint::SolidColor { color } => (color.label().to_string(), String::new()),
            Paint::Texture(t) => (t.palette[0].label().to_string(), t.pattern.label().to_string()),
        };
        Self { color, shape, pattern, background_color, background_pattern }
    }

    /// Defaults used when a ladder is asked without a scene.
    pub fn defaults_for(category: PromptCategory) -> Self {
        let object_color = match category {
            PromptCategory::BgColor | PromptCategory::BgTexture => ColorName::White,
            PromptCategory::ObjTexture => ColorName::BlueGreen,
            PromptCategory::ObjColor => ColorName::Black,
            PromptCategory::ObjShape => ColorName::Black,
        };
        Self {
            color: object_color.label().into(),
            shape: Shape::Circle.plural().into(),
            pattern: String::new(),
            background_color: ColorName::BlueGreen.label().into(),
            background_pattern: String::new(),
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PromptError {
    #[error("missing binding for {{{0}}}")]
    MissingBinding(String),
}

const P1_TEXT: &str = "Count the number of distinct objects in this image.";
const P1_ROLE: &str = "Baseline: generic unconstrained prompt";

macro_rules! rung {
    ($cat:ident, $id:ident, $tpl:expr, [$(($name:expr, $attr:ident)),*], $role:expr) => {
        PromptSpec {
            ladder_id: LadderId::$id,
            category: PromptCategory::$cat,
            template: $tpl,
            bindings: &[$(($name, Attribute::$attr)),*],
            role_note: $role,
        }
    };
}

/// The full rung sequence for a category, in ladder order.
pub fn ladder_for(category: PromptCategory) -> Vec<PromptSpec> {
    match category {
        PromptCategory::ObjTexture => vec![
            rung!(ObjTexture, P1, P1_TEXT, [], P1_ROLE),
            rung!(ObjTexture, P2, "Count the number of {color} color objects in this image.", [("color", Color)],
                "Single (simple) attribute: color"),
            rung!(ObjTexture, P3, "Count the number of objects with {pattern} pattern in this image.", [("pattern", Pattern)],
                "Single (complex) attribute: texture"),
            rung!(ObjTexture, P4, "Count the number of {pattern} pattern with {color} color objects in this image.",
                [("pattern", Pattern), ("color", Color)], "Compositional (target): complex + simple binding"),
            rung!(ObjTexture, P5, "Count the number of {pattern} pattern with {color} color {shape} in this image.",
                [("pattern", Pattern), ("color", Color), ("shape", Shape)], "Compositional (high load): multi-attribute binding"),
        ],
        PromptCategory::ObjColor | PromptCategory::ObjShape => {
            let cat = category;
            let mut v = vec![
                rung!(ObjColor, P1, P1_TEXT, [], P1_ROLE),
                rung!(ObjColor, P2, "Count the number of {color} color objects in this image.", [("color", Color)],
                    "Single (simple) attribute: color"),
                rung!(ObjColor, P3, "Count the number of {color} color {shape} in this image.",
                    [("color", Color), ("shape", Shape)], "Compositional (simple) attribute: color and shape"),
            ];
            for r in &mut v {
                r.category = cat;
            }
            v
        }
        PromptCategory::BgTexture => vec![
            rung!(BgTexture, P1, P1_TEXT, [], P1_ROLE),
            rung!(BgTexture, P2, "Count the number of {color} color objects in this image.", [("color", Color)],
                "Single (simple) attribute: object color"),
            rung!(BgTexture, P3, "Count the number of {color} color {shape} in this image.",
                [("color", Color), ("shape", Shape)], "Compositional (target): simple + simple binding"),
            rung!(BgTexture, P4, "Count the number of {color} color objects in this image with {pattern} background.",
                [("color", Color), ("pattern", BackgroundPattern)], "Compositional (target+): object and background features"),
            rung!(BgTexture, P5,
                "Count the number of {color} color {shape} in this image with {background_color} {pattern} background.",
                [("color", Color), ("shape", Shape), ("background_color", BackgroundColor), ("pattern", BackgroundPattern)],
                "Compositional (high load): object color, shape, background color and pattern"),
        ],
        PromptCategory::BgColor => vec![
            rung!(BgColor, P1, P1_TEXT, [], P1_ROLE),
            rung!(BgColor, P2, "Count the number of {color} objects in this image with {background_color} background.",
                [("color", Color), ("background_color", BackgroundColor)],
                "Compositional (simple) attribute: target and background color"),
            rung!(BgColor, P3, "Count the number of {color} {shape} in this image with {background_color} background.",
                [("color", Color), ("shape", Shape), ("background_color", BackgroundColor)],
                "Compositional (complex) attribute: two object attributes and background color"),
        ],
    }
}

/// Substitutes bindings into the template and appends [`ANSWER_SUFFIX`].
pub fn build_prompt(spec: &PromptSpec, bindings: &AttributeBindings) -> Result<String, PromptError> {
    let mut text = String::with_capacity(spec.template.len() + ANSWER_SUFFIX.len() + 32);
    let mut rest = spec.template;
    while let Some(open) = rest.find('{') {
        text.push_str(&rest[..open]);
        let close = rest[open..].find('}').map(|c| open + c).expect("templates have balanced braces");
        let name = &rest[open + 1..close];
        let attr = spec
            .bindings
            .iter()
            .find(|(n, _)| *n == name)
            .map(|(_, a)| *a)
            .expect("every placeholder has a binding rule");
        let value = bindings.get(attr);
        if value.is_empty() {
            return Err(PromptError::MissingBinding(attr.name().to_string()));
        }
        text.push_str(value);
        rest = &rest[close + 1..];
    }
    text.push_str(rest);
    text.push(' ');
    text.push_str(ANSWER_SUFFIX);
    Ok(text)
}

/// A resolved prompt, as emitted by the `prompts` command.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResolvedPrompt {
    pub category: PromptCategory,
    pub ladder_id: LadderId,
    pub text: String,
}

/// Every rung of `categories` resolved against a manifest.
pub fn resolve_ladders(
    manifest: &SceneManifest,
    categories: &[PromptCategory],
) -> Result<Vec<ResolvedPrompt>, PromptError> {
    let bindings = AttributeBindings::from_manifest(manifest);
    let mut out = Vec::new();
    for &category in categories {
        for spec in ladder_for(category) {
            out.push(ResolvedPrompt { category, ladder_id: spec.ladder_id, text: build_prompt(&spec, &bindings)? });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use regex::Regex;

    fn full() -> AttributeBindings {
        AttributeBindings {
            color: "blue-green".into(),
            shape: "circles".into(),
            pattern: "dots".into(),
            background_color: "white".into(),
            background_pattern: "checkerboard".into(),
        }
    }

    #[test]
    fn rung_counts() {
        assert_eq!(ladder_for(PromptCategory::ObjTexture).len(), 5);
        assert_eq!(ladder_for(PromptCategory::BgTexture).len(), 5);
        assert_eq!(ladder_for(PromptCategory::ObjColor).len(), 3);
        assert_eq!(ladder_for(PromptCategory::ObjShape).len(), 3);
        assert_eq!(ladder_for(PromptCategory::BgColor).len(), 3);
    }

    #[test]
    fn obj_texture_p1_text() {
        let l = ladder_for(PromptCategory::ObjTexture);
        assert!(l[0].template.starts_with("Count the number of distinct objects"));
    }

    #[test]
    fn bg_texture_p4_mentions_pattern_background() {
        let l = ladder_for(PromptCategory::BgTexture);
        assert_eq!(l[3].ladder_id, LadderId::P4);
        assert!(l[3].template.contains("{pattern} background"));
    }

    #[test]
    fn p2_obj_texture_exact_text() {
        let l = ladder_for(PromptCategory::ObjTexture);
        let b = AttributeBindings { color: "blue-green".into(), ..Default::default() };
        assert_eq!(
            build_prompt(&l[1], &b).unwrap(),
            "Count the number of blue-green color objects in this image. Answer the count within curly brackets, eg. {10}"
        );
    }

    #[test]
    fn p1_needs_no_bindings() {
        let l = ladder_for(PromptCategory::ObjTexture);
        assert!(build_prompt(&l[0], &AttributeBindings::default()).is_ok());
    }

    #[test]
    fn missing_shape_is_reported() {
        let l = ladder_for(PromptCategory::ObjTexture);
        let b = AttributeBindings { shape: String::new(), ..full() };
        assert_eq!(build_prompt(&l[4], &b), Err(PromptError::MissingBinding("shape".into())));
    }

    #[test]
    fn bg_pattern_placeholder_reads_background_pattern() {
        let l = ladder_for(PromptCategory::BgTexture);
        let t = build_prompt(&l[4], &full()).unwrap();
        assert!(t.contains("with white checkerboard background."), "{t}");
    }

    /// Every emitted prompt matches its template with placeholders replaced by the bound values.
    #[test]
    fn round_trip_against_template_regex() {
        let b = full();
        for cat in PromptCategory::ALL {
            for spec in ladder_for(cat) {
                let text = build_prompt(&spec, &b).unwrap();
                let mut pattern = String::from("^");
                let mut rest = spec.template;
                while let Some(open) = rest.find('{') {
                    pattern.push_str(&regex::escape(&rest[..open]));
                    let close = open + rest[open..].find('}').unwrap();
                    let attr = spec.bindings.iter().find(|(n, _)| *n == &rest[open + 1..close]).unwrap().1;
                    pattern.push_str(&regex::escape(b.get(attr)));
                    rest = &rest[close + 1..];
                }
                pattern.push_str(&regex::escape(rest));
                pattern.push(' ');
                pattern.push_str(&regex::escape(ANSWER_SUFFIX));
                pattern.push('$');
                assert!(Regex::new(&pattern).unwrap().is_match(&text), "{text}");
                assert!(!text[..text.len() - ANSWER_SUFFIX.len()].contains('{'));
            }
        }
    }

    /// P1 mentions nothing, mention counts never decrease and the top rung covers every attribute
    /// used anywhere in the ladder.
    #[test]
    fn texture_ladders_grow_in_specificity() {
        for cat in [PromptCategory::ObjTexture, PromptCategory::BgTexture] {
            let l = ladder_for(cat);
            assert!(l[0].attributes().is_empty());
            let top = l.last().unwrap().attributes();
            for w in l.windows(2) {
                assert!(w[1].attributes().len() >= w[0].attributes().len());
            }
            for r in &l {
                assert!(r.attributes().iter().all(|a| top.contains(a)), "{cat} {}", r.ladder_id);
            }
        }
    }

    #[test]
    fn every_placeholder_has_a_rule() {
        let re = Regex::new(r"\{(\w+)\}").unwrap();
        for cat in PromptCategory::ALL {
            for spec in ladder_for(cat) {
                for c in re.captures_iter(spec.template) {
                    assert!(spec.bindings.iter().any(|(n, _)| *n == &c[1]), "{}", spec.template);
                }
            }
        }
    }
}
