use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};

use image::{Rgb, RgbImage};

use super::HarnessError;
use crate::intervention::capture::read_captures;
use crate::metrics::{report_with_localization, write_report_csv, MetricsReport, PredictionRecord};
use crate::relevance::{attention_iou, propagate, relevance_overlay, LayerCapture, LocalizationRecord, DEFAULT_DEPTH};
use crate::scene::{render_scene, SceneManifest};

pub const REPORT_JSON: &str = "report.json";
pub const REPORT_CSV: &str = "report.csv";
pub const REPORT_PLOT: &str = "mrce_by_pattern.png";

/// Writes the JSON report, the flattened CSV and a per-pattern bar plot into `out_dir`.
pub fn emit_report(
    records: &[PredictionRecord],
    manifests: &[SceneManifest],
    localization: &[LocalizationRecord],
    out_dir: &Path,
) -> Result<MetricsReport, HarnessError> {
    let rep = report_with_localization(records, manifests, localization)?;
    fs::create_dir_all(out_dir)?;
    fs::write(out_dir.join(REPORT_JSON), serde_json::to_string_pretty(&rep)? + "\n")?;
    write_report_csv(&rep, fs::File::create(out_dir.join(REPORT_CSV))?)?;
    if !rep.per_pattern.is_empty() {
        bar_plot(&rep).save(out_dir.join(REPORT_PLOT))?;
    }
    Ok(rep)
}

/// One pair of bars per pattern: MRCE (blue, clipped at 1) and accuracy (green).
fn bar_plot(rep: &MetricsReport) -> RgbImage {
    const BAR: u32 = 8;
    const H: u32 = 200;
    let n = rep.per_pattern.len() as u32;
    let mut img = RgbImage::from_pixel(n * (2 * BAR + 6) + 10, H + 20, Rgb([255, 255, 255]));
    for (i, s) in rep.per_pattern.values().enumerate() {
        let x0 = 5 + i as u32 * (2 * BAR + 6);
        let bars = [(s.mrce.unwrap_or(0.0).min(1.0), Rgb([40, 80, 200])), (s.accuracy, Rgb([40, 160, 60]))];
        for (k, (v, color)) in bars.into_iter().enumerate() {
            let h = (v.clamp(0.0, 1.0) * H as f64).round() as u32;
            for x in x0 + k as u32 * BAR..x0 + (k as u32 + 1) * BAR {
                for y in H + 10 - h..H + 10 {
                    img.put_pixel(x, y, color);
                }
            }
        }
    }
    for x in 0..img.width() {
        img.put_pixel(x, H + 10, Rgb([0, 0, 0]));
    }
    img
}

/// Relevance readouts for every record that carries captures.
///
/// `run_dir` is the directory holding the records file. Overlays are written to
/// `overlay_dir` as `<image_id>.<key prefix>.png` when given.
pub fn localize_records(
    records: &[PredictionRecord],
    manifests: &[SceneManifest],
    run_dir: &Path,
    depth: Option<usize>,
    threshold_frac: f64,
    overlay_dir: Option<&Path>,
) -> Result<Vec<LocalizationRecord>, HarnessError> {
    let by_id: HashMap<&str, &SceneManifest> = manifests.iter().map(|m| (m.image_id.as_str(), m)).collect();
    if let Some(dir) = overlay_dir {
        fs::create_dir_all(dir)?;
    }
    let mut out = Vec::new();
    for r in records {
        let Some(rel) = &r.captures else { continue };
        let m = by_id
            .get(r.image_id.as_str())
            .ok_or_else(|| crate::metrics::MetricsError::UnknownImage(r.image_id.clone()))?;
        let dir: PathBuf = run_dir.join(rel);
        let (side, pairs) = read_captures(&dir)?;
        let layers = pairs.iter().map(LayerCapture::from_pair).collect::<Result<Vec<_>, _>>()?;
        let k = depth.unwrap_or(DEFAULT_DEPTH).min(layers.len());
        let targets = if side.supervised_positions.is_empty() { vec![side.seq_len - 1] } else { side.supervised_positions.clone() };
        let map = propagate(&layers, k, &targets)?;
        let visual = &map.relevance[side.visual_span.start..=side.visual_span.end];
        let score = attention_iou(visual, &side.patch_grid, &m.object_mask, threshold_frac)?;
        if let Some(dir) = overlay_dir {
            let img = render_scene(&m.scene_spec())?;
            let overlay = relevance_overlay(&img, visual, &side.patch_grid)?;
            overlay.save(dir.join(format!("{}.{}.png", r.image_id, &r.key[..8])))?;
        }
        out.push(LocalizationRecord::new(r.image_id.clone(), Some(r.prompt_id.clone()), score));
    }
    Ok(out)
}
