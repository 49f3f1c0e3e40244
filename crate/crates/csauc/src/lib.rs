//! Offline evaluation for CTR models whose online objective is CPM.
//!
//! Plain AUC checks whether predicted click probabilities order clicks
//! above non-clicks; it says nothing about the revenue ranking
//! `pctr * bid` that ad auctions actually run on, and it prices every
//! reversed pair the same. This crate scores rankings by the revenue
//! they capture instead: over every pair of samples on strictly
//! different bid levels (all negatives sit on level 0, positives are
//! leveled by bid), the higher level pays its bid when ranked correctly
//! and the lower sample's revenue when reversed. The captured-over-
//! attainable quotient is csAUC; it is 1 exactly when all positives
//! outrank all negatives *and* the positives are ordered by bid.
//!
//! Computing that naively is quadratic in samples. The toolkit instead
//! buckets samples by bid level and min-max-normalized score into a
//! sparse grid and sweeps it with prefix/suffix sums — linear in
//! `levels * buckets` — while a brute-force oracle stays around as
//! ground truth. Grouped variants (per request/user), COPC and ROPR
//! round out the report.
//!
//! # Library tour
//!
//! ```
//! use csauc::{validate_record, evaluate_samples, EvalOptions, MetricKind};
//!
//! let samples = vec![
//!     validate_record(1, 100.0, 0.50, None).unwrap(),
//!     validate_record(1, 4.0, 0.90, None).unwrap(),
//!     validate_record(1, 3.0, 0.90, None).unwrap(),
//!     validate_record(1, 2.0, 0.90, None).unwrap(),
//!     validate_record(0, 999.0, 0.000001, None).unwrap(),
//! ];
//! let options = EvalOptions::for_metrics(vec![MetricKind::Csauc, MetricKind::Auc]);
//! let report = evaluate_samples(&samples, &options).unwrap();
//! assert_eq!(report.csauc, Some(1.0));
//! ```
//!
//! Each major capability has a runnable example:
//!
//! ```bash
//! cargo run --example quickstart
//! cargo run --example ranking_scenarios
//! cargo run --example stream_from_csv
//! cargo run --example grouped_evaluation
//! cargo run --example oracle_crosscheck
//! cargo run --example tie_policies
//! cargo run --example large_scale
//! ```
//!
//! The `csauc` binary wraps the same code for shell pipelines; see the
//! README for the `eval`, `oracle`, `gen` and `bench` subcommands.

pub mod bench;
pub mod bucketing;
pub mod dp;
pub mod error;
pub mod eval;
pub mod gen;
pub mod grouping;
pub mod ingest;
pub mod metrics;
pub mod model;
pub mod oracle;

pub use bucketing::{
    build_grid, build_level_table, pcpm_bucket, BidQuantization, BucketGrid, BucketingConfig,
    GridBuilder, GridCell, LevelBidTable, NormParams, DEFAULT_PCPM_BUCKETS,
};
pub use dp::{
    compute_csauc_dp, compute_csauc_dp_compensated, compute_csauc_streaming, RewardResult,
};
pub use error::{Error, Result};
pub use eval::{evaluate_file, evaluate_samples, render_json, render_text, EvalOptions, MetricKind};
pub use grouping::{gauc, gcsauc, GroupPolicy, GroupWeight, GroupedValue, PerGroup};
pub use ingest::{
    read_all, stream_samples, two_pass_plan, ColumnMap, ColumnSel, ErrorTally, InputFormat,
    InputSpec, PassOneStats, SampleStream,
};
pub use metrics::{auc_rank, auc_rank_scored, copc, ropr, RunningSums};
pub use model::{validate_record, GroupReportRow, MetricsReport, Sample, TiePolicy};
pub use oracle::{auc_pairwise, csauc_exact, csauc_exact_on_grid};

/// Caps internal parallelism from the `CSAUC_THREADS` environment
/// variable. Call once at process start; later calls are no-ops once a
/// global pool exists. Unset or unparsable values keep the default.
pub fn init_thread_cap() {
    if let Ok(raw) = std::env::var("CSAUC_THREADS") {
        if let Ok(threads) = raw.trim().parse::<usize>() {
            if threads >= 1 {
                let _ = rayon::ThreadPoolBuilder::new()
                    .num_threads(threads)
                    .build_global();
            }
        }
    }
}
