//! Answer parsing and counting metrics.
//!
//! Accuracy is exact match over all records (unparsable answers count as wrong).
//! Mean relative count error averages `|pred - true| / true` over records that
//! parsed and have a non-zero ground truth.

mod record;
mod report;

pub use record::{read_records_jsonl, write_records_jsonl, PredictionRecord, RecordError};
pub use report::{report, report_with_localization, write_report_csv, CsvRow, GroupStats, MetricsError, MetricsReport};

use std::fmt;
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

/// Ground-truth count interval used for stratified reporting.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum CountBucket {
    #[serde(rename = "<10")]
    Below10,
    #[serde(rename = "10-19")]
    From10To19,
    #[serde(rename = "20-29")]
    From20To29,
    #[serde(rename = "30-39")]
    From30To39,
    /// Includes 50.
    #[serde(rename = "40-50")]
    From40To50,
    /// Outside the benchmark's range; only reachable for external manifests.
    #[serde(rename = ">50")]
    Above50,
}

impl CountBucket {
    /// The five buckets of the benchmark, in table order.
    pub const REPORTED: [CountBucket; 5] = [
        CountBucket::Below10,
        CountBucket::From10To19,
        CountBucket::From20To29,
        CountBucket::From30To39,
        CountBucket::From40To50,
    ];

    pub fn of(true_count: u32) -> Self {
        match true_count {
            0..=9 => CountBucket::Below10,
            10..=19 => CountBucket::From10To19,
            20..=29 => CountBucket::From20To29,
            30..=39 => CountBucket::From30To39,
            40..=50 => CountBucket::From40To50,
            _ => CountBucket::Above50,
        }
    }

    /// Inclusive count range.
    pub fn range(self) -> (u32, u32) {
        match self {
            CountBucket::Below10 => (0, 9),
            CountBucket::From10To19 => (10, 19),
            CountBucket::From20To29 => (20, 29),
            CountBucket::From30To39 => (30, 39),
            CountBucket::From40To50 => (40, 50),
            CountBucket::Above50 => (51, u32::MAX),
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            CountBucket::Below10 => "<10",
            CountBucket::From10To19 => "10-19",
            CountBucket::From20To29 => "20-29",
            CountBucket::From30To39 => "30-39",
            CountBucket::From40To50 => "40-50",
            CountBucket::Above50 => ">50",
        }
    }
}

impl fmt::Display for CountBucket {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Same as [`CountBucket::of`].
pub fn bucketize(true_count: u32) -> CountBucket {
    CountBucket::of(true_count)
}

static BRACED: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\{\s*(\d+)\s*\}").unwrap());
static DIGITS: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\d+").unwrap());

/// Extracts a count from a model answer.
///
/// Prefers the last `{N}`; otherwise takes the last standalone non-negative integer
/// (not part of a word, a decimal or a negative number). `None` means unparsable.
pub fn parse_count(raw_text: &str) -> Option<u64> {
    if let Some(n) = BRACED.captures_iter(raw_text).filter_map(|c| c[1].parse::<u64>().ok()).last() {
        return Some(n);
    }
    let bytes = raw_text.as_bytes();
    DIGITS
        .find_iter(raw_text)
        .filter(|m| {
            let before = raw_text[..m.start()].chars().next_back();
            let after = raw_text[m.end()..].chars().next();
            let before_ok = !matches!(before, Some(c) if c.is_alphanumeric() || c == '_' || c == '-' || c == '.');
            let decimal_follows = after == Some('.') && bytes.get(m.end() + 1).is_some_and(u8::is_ascii_digit);
            let after_ok = !matches!(after, Some(c) if c.is_alphanumeric() || c == '_') && !decimal_follows;
            before_ok && after_ok
        })
        .filter_map(|m| m.as_str().parse::<u64>().ok())
        .last()
}

/// Per-record relative count error, or `None` when the record is excluded from the mean.
pub fn relative_error(parsed_count: Option<u64>, true_count: u32) -> Option<f64> {
    let pred = parsed_count?;
    if true_count == 0 {
        return None;
    }
    Some((pred as f64 - true_count as f64).abs() / true_count as f64)
}

/// Sum in ascending order so the result does not depend on record order.
pub(crate) fn ordered_mean(mut terms: Vec<f64>) -> Option<f64> {
    if terms.is_empty() {
        return None;
    }
    terms.sort_by(f64::total_cmp);
    let n = terms.len() as f64;
    Some(terms.into_iter().sum::<f64>() / n)
}

/// Mean relative count error over eligible records; `None` when none are eligible.
pub fn mrce(records: &[PredictionRecord]) -> Option<f64> {
    ordered_mean(records.iter().filter_map(|r| relative_error(r.parsed_count, r.true_count)).collect())
}

/// Fraction of records whose parsed count equals the ground truth. Empty input gives 0.
pub fn accuracy(records: &[PredictionRecord]) -> f64 {
    if records.is_empty() {
        return 0.0;
    }
    let hits = records.iter().filter(|r| r.is_correct()).count();
    hits as f64 / records.len() as f64
}
