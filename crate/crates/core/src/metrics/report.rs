use std::collections::{BTreeMap, HashMap};
use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{ordered_mean, relative_error, CountBucket, PredictionRecord};
use crate::relevance::LocalizationRecord;
use crate::scene::{SceneManifest, VariationTag};

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("record references unknown image {0:?}")]
    UnknownImage(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupStats {
    pub n: usize,
    pub accuracy: f64,
    /// `null` when no record in the group is eligible.
    pub mrce: Option<f64>,
    pub unparsable: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub iou_object: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub iou_background: Option<f64>,
}

impl GroupStats {
    fn of(records: &[&PredictionRecord]) -> Self {
        let n = records.len();
        let hits = records.iter().filter(|r| r.is_correct()).count();
        Self {
            n,
            accuracy: if n == 0 { 0.0 } else { hits as f64 / n as f64 },
            mrce: ordered_mean(records.iter().filter_map(|r| relative_error(r.parsed_count, r.true_count)).collect()),
            unparsable: records.iter().filter(|r| r.is_unparsable()).count(),
            iou_object: None,
            iou_background: None,
        }
    }
}

/// One flattened table row: (category, feature, pattern, bucket).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsvRow {
    pub category: String,
    pub feature: String,
    pub pattern: String,
    pub bucket: CountBucket,
    pub n: usize,
    pub accuracy: f64,
    pub mrce: Option<f64>,
    pub iou_object: Option<f64>,
    pub iou_background: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub n: usize,
    pub accuracy: f64,
    pub mrce: Option<f64>,
    pub unparsable_count: usize,
    /// Records whose backend call failed (also counted as unparsable).
    pub error_count: usize,
    pub per_bucket: BTreeMap<CountBucket, GroupStats>,
    /// Keyed by `<variation_tag>/<value>`.
    pub per_pattern: BTreeMap<String, GroupStats>,
    pub per_prompt: BTreeMap<String, GroupStats>,
    pub rows: Vec<CsvRow>,
}

/// Aggregates records overall, per count bucket, per pattern and per prompt.
pub fn report(records: &[PredictionRecord], manifests: &[SceneManifest]) -> Result<MetricsReport, MetricsError> {
    report_with_localization(records, manifests, &[])
}

fn mean(xs: &[f64]) -> Option<f64> {
    ordered_mean(xs.to_vec())
}

/// Like [`report`], additionally averaging localization scores into matching groups.
pub fn report_with_localization(
    records: &[PredictionRecord],
    manifests: &[SceneManifest],
    localization: &[LocalizationRecord],
) -> Result<MetricsReport, MetricsError> {
    let by_id: HashMap<&str, &SceneManifest> = manifests.iter().map(|m| (m.image_id.as_str(), m)).collect();
    let lookup = |id: &str| by_id.get(id).copied().ok_or_else(|| MetricsError::UnknownImage(id.to_string()));

    let mut per_bucket: BTreeMap<CountBucket, Vec<&PredictionRecord>> = BTreeMap::new();
    let mut per_pattern: BTreeMap<String, Vec<&PredictionRecord>> = BTreeMap::new();
    let mut per_prompt: BTreeMap<String, Vec<&PredictionRecord>> = BTreeMap::new();
    let mut cells: BTreeMap<(VariationTag, String, CountBucket), Vec<&PredictionRecord>> = BTreeMap::new();
    for r in records {
        let m = lookup(&r.image_id)?;
        let pattern = format!("{}/{}", m.variation_tag.name(), m.variation_value);
        per_bucket.entry(m.count_bucket).or_default().push(r);
        per_pattern.entry(pattern).or_default().push(r);
        per_prompt.entry(r.prompt_id.clone()).or_default().push(r);
        cells.entry((m.variation_tag, m.variation_value.clone(), m.count_bucket)).or_default().push(r);
    }

    // Localization scores grouped the same way.
    type Ious = (Vec<f64>, Vec<f64>);
    let mut loc_bucket: BTreeMap<CountBucket, Ious> = BTreeMap::new();
    let mut loc_pattern: BTreeMap<String, Ious> = BTreeMap::new();
    let mut loc_cell: BTreeMap<(VariationTag, String, CountBucket), Ious> = BTreeMap::new();
    for l in localization {
        let m = lookup(&l.image_id)?;
        for slot in [
            loc_bucket.entry(m.count_bucket).or_default(),
            loc_pattern.entry(format!("{}/{}", m.variation_tag.name(), m.variation_value)).or_default(),
            loc_cell.entry((m.variation_tag, m.variation_value.clone(), m.count_bucket)).or_default(),
        ] {
            slot.0.push(l.iou_object);
            slot.1.push(l.iou_background);
        }
    }
    let with_loc = |mut s: GroupStats, l: Option<&Ious>| {
        if let Some((o, b)) = l {
            s.iou_object = mean(o);
            s.iou_background = mean(b);
        }
        s
    };

    let all: Vec<&PredictionRecord> = records.iter().collect();
    let overall = GroupStats::of(&all);
    let rows = cells
        .iter()
        .map(|((tag, value, bucket), recs)| {
            let s = with_loc(GroupStats::of(recs), loc_cell.get(&(*tag, value.clone(), *bucket)));
            let (category, feature) = tag.table_axes();
            CsvRow {
                category: category.into(),
                feature: feature.into(),
                pattern: value.clone(),
                bucket: *bucket,
                n: s.n,
                accuracy: s.accuracy,
                mrce: s.mrce,
                iou_object: s.iou_object,
                iou_background: s.iou_background,
            }
        })
        .collect();
    Ok(MetricsReport {
        n: overall.n,
        accuracy: overall.accuracy,
        mrce: overall.mrce,
        unparsable_count: overall.unparsable,
        error_count: records.iter().filter(|r| r.error.is_some()).count(),
        per_bucket: per_bucket.iter().map(|(k, v)| (*k, with_loc(GroupStats::of(v), loc_bucket.get(k)))).collect(),
        per_pattern: per_pattern.iter().map(|(k, v)| (k.clone(), with_loc(GroupStats::of(v), loc_pattern.get(k)))).collect(),
        per_prompt: per_prompt.iter().map(|(k, v)| (k.clone(), GroupStats::of(v))).collect(),
        rows,
    })
}

fn opt(x: Option<f64>) -> String {
    x.map(|v| format!("{v:.6}")).unwrap_or_default()
}

/// Writes the flattened `(category, feature, pattern, bucket, n, accuracy, mrce, iou_object, iou_background)` table.
pub fn write_report_csv(report: &MetricsReport, writer: impl Write) -> Result<(), MetricsError> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["category", "feature", "pattern", "bucket", "n", "accuracy", "mrce", "iou_object", "iou_background"])?;
    for r in &report.rows {
        w.write_record([
            r.category.clone(),
            r.feature.clone(),
            r.pattern.clone(),
            r.bucket.to_string(),
            r.n.to_string(),
            format!("{:.6}", r.accuracy),
            opt(r.mrce),
            opt(r.iou_object),
            opt(r.iou_background),
        ])?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}
