//! Accuracy measures and cohort statistics.

mod heatmap;
mod metrics;
mod stats;

pub use heatmap::{heatmap_field, HeatmapSource};
pub use metrics::{
    deviations, evaluate_cut, evaluate_trial, extract_resected_plane, max_deviation, specimen_report, PlaneDeviation,
    PlaneSource, SpecimenReport,
};
pub use stats::{
    describe, margin_percentages, margin_table, rank_sum_counts, two_sided_from_counts, wilcoxon_exact,
    wilcoxon_normal, wilcoxon_rank_sum, CohortSummary, MarginRow, MarginTable, WilcoxonMethod, WilcoxonResult,
    EXACT_LIMIT, MARGIN_THRESHOLDS,
};
