//! Per-episode statistics, page coverage and their CSV forms.

mod stats;

use std::collections::BTreeMap;
use std::fmt::Write as _;

use thiserror::Error;

use crate::site_model::PageId;

pub use stats::{
    confidence_interval, ln_gamma, regularized_incomplete_beta, t_cdf, t_critical, t_two_sided_p,
    welch_t_test, WelchTest,
};

pub const METRICS_HEADER: &str =
    "episode,total_reward,steps,success,backtracks_used,defects_hit,cumulative_unique_pages,epsilon";
pub const COVERAGE_HEADER: &str = "page_id,visits";

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StatsError {
    #[error("series is empty")]
    EmptySeries,
    #[error("window must be at least 1")]
    InvalidWindow,
    #[error("sample needs at least {needed} values, got {got}")]
    SampleTooSmall { needed: usize, got: usize },
    #[error("confidence level must lie in (0, 1), got {0}")]
    InvalidLevel(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeRecord {
    pub episode: usize,
    pub total_reward: f64,
    pub steps: usize,
    pub success: bool,
    pub backtracks_used: usize,
    pub defects_hit: usize,
    pub cumulative_unique_pages: usize,
    pub epsilon: f64,
}

/// Page visit counts accumulated over a run, start-page visits included.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CoverageMap {
    visit_counts: BTreeMap<PageId, u64>,
}

impl CoverageMap {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record(&mut self, page: &PageId) {
        *self.visit_counts.entry(page.clone()).or_insert(0) += 1;
    }

    pub fn visits(&self, page: &str) -> u64 {
        self.visit_counts.get(page).copied().unwrap_or(0)
    }

    pub fn unique_pages(&self) -> usize {
        self.visit_counts.len()
    }

    pub fn total_visits(&self) -> u64 {
        self.visit_counts.values().sum()
    }

    /// Visited pages in id order.
    pub fn iter(&self) -> impl Iterator<Item = (&PageId, u64)> {
        self.visit_counts.iter().map(|(p, c)| (p, *c))
    }
}

/// Trailing mean: element `i` averages the last `min(i + 1, window)` values.
pub fn moving_average(series: &[f64], window: usize) -> Result<Vec<f64>, StatsError> {
    if window == 0 {
        return Err(StatsError::InvalidWindow);
    }
    if series.is_empty() {
        return Err(StatsError::EmptySeries);
    }
    Ok((0..series.len())
        .map(|i| {
            let from = (i + 1).saturating_sub(window);
            let slice = &series[from..=i];
            slice.iter().sum::<f64>() / slice.len() as f64
        })
        .collect())
}

/// Fixed six-decimal rendering without a negative zero.
pub fn format_real(x: f64) -> String {
    let s = format!("{x:.6}");
    if s == "-0.000000" {
        "0.000000".to_string()
    } else {
        s
    }
}

pub fn metrics_csv(records: &[EpisodeRecord]) -> String {
    let mut out = String::with_capacity(64 * (records.len() + 1));
    out.push_str(METRICS_HEADER);
    out.push('\n');
    for r in records {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            r.episode,
            format_real(r.total_reward),
            r.steps,
            u8::from(r.success),
            r.backtracks_used,
            r.defects_hit,
            r.cumulative_unique_pages,
            format_real(r.epsilon),
        );
    }
    out
}

pub fn coverage_csv(coverage: &CoverageMap) -> String {
    let mut out = String::new();
    out.push_str(COVERAGE_HEADER);
    out.push('\n');
    for (page, visits) in coverage.iter() {
        let _ = writeln!(out, "{page},{visits}");
    }
    out
}
