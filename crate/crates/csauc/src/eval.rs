//! Evaluation runs: pick metrics, stream or buffer the input, assemble
//! a [`MetricsReport`], and render it deterministically.
//!
//! Ungrouped runs over files are two-pass streaming (extrema and bid
//! levels first, bucketing second) so nothing is materialized beyond
//! the grid and, when AUC is requested, bare `(score, label)` pairs.
//! Grouped runs and standard input buffer the samples instead; both
//! paths see identical sample sequences.

use std::borrow::Borrow;
use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use crate::bucketing::{
    build_grid, build_level_table, BucketingConfig, GridBuilder, LevelBidTable, NormParams,
};
use crate::dp::compute_csauc_dp;
use crate::error::{Error, Result};
use crate::grouping::{gauc, gcsauc, GroupPolicy, GroupedValue};
use crate::ingest::{read_all, stream_samples, two_pass_plan, ErrorTally, InputSpec};
use crate::metrics::{auc_rank_scored, RunningSums};
use crate::model::{GroupReportRow, MetricsReport, Sample, TiePolicy};

/// The metrics a run can request.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum MetricKind {
    Auc,
    Csauc,
    Gcsauc,
    Gauc,
    Copc,
    Ropr,
}

impl MetricKind {
    pub fn all() -> [MetricKind; 6] {
        [
            MetricKind::Auc,
            MetricKind::Csauc,
            MetricKind::Gcsauc,
            MetricKind::Gauc,
            MetricKind::Copc,
            MetricKind::Ropr,
        ]
    }
}

impl fmt::Display for MetricKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            MetricKind::Auc => "auc",
            MetricKind::Csauc => "csauc",
            MetricKind::Gcsauc => "gcsauc",
            MetricKind::Gauc => "gauc",
            MetricKind::Copc => "copc",
            MetricKind::Ropr => "ropr",
        };
        f.write_str(name)
    }
}

impl FromStr for MetricKind {
    type Err = Error;

    fn from_str(raw: &str) -> Result<Self> {
        match raw.trim().to_ascii_lowercase().as_str() {
            "auc" => Ok(MetricKind::Auc),
            "csauc" => Ok(MetricKind::Csauc),
            "gcsauc" => Ok(MetricKind::Gcsauc),
            "gauc" => Ok(MetricKind::Gauc),
            "copc" => Ok(MetricKind::Copc),
            "ropr" => Ok(MetricKind::Ropr),
            other => Err(Error::InvalidConfig(format!("unknown metric {other:?}"))),
        }
    }
}

/// Parses a comma-separated metric list.
pub fn parse_metric_list(raw: &str) -> Result<Vec<MetricKind>> {
    let mut metrics = Vec::new();
    for part in raw.split(',') {
        let kind = part.parse::<MetricKind>()?;
        if !metrics.contains(&kind) {
            metrics.push(kind);
        }
    }
    if metrics.is_empty() {
        return Err(Error::InvalidConfig("empty metric list".to_string()));
    }
    Ok(metrics)
}

/// Options of one evaluation run.
#[derive(Debug, Clone)]
pub struct EvalOptions {
    pub metrics: Vec<MetricKind>,
    pub tie_policy: TiePolicy,
    pub bucketing: BucketingConfig,
    pub group_policy: GroupPolicy,
    /// Fail on the first malformed row instead of tallying it.
    pub strict: bool,
    /// Attach the per-group breakdown to the report.
    pub per_group: bool,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions {
            metrics: vec![
                MetricKind::Auc,
                MetricKind::Csauc,
                MetricKind::Copc,
                MetricKind::Ropr,
            ],
            tie_policy: TiePolicy::default(),
            bucketing: BucketingConfig::default(),
            group_policy: GroupPolicy::default(),
            strict: false,
            per_group: false,
        }
    }
}

impl EvalOptions {
    pub fn for_metrics(metrics: Vec<MetricKind>) -> Self {
        EvalOptions {
            metrics,
            ..EvalOptions::default()
        }
    }

    fn wants(&self, kind: MetricKind) -> bool {
        self.metrics.contains(&kind)
    }
}

/// Evaluates a file (or stdin) and returns the report plus the
/// malformed-row tally.
pub fn evaluate_file(spec: &InputSpec, options: &EvalOptions) -> Result<(MetricsReport, ErrorTally)> {
    let needs_buffering = options.wants(MetricKind::Gcsauc)
        || options.wants(MetricKind::Gauc)
        || spec.is_stdin();
    if needs_buffering {
        let (samples, tally) = read_all(spec, options.strict)?;
        if samples.is_empty() {
            return Err(Error::EmptyInput);
        }
        return Ok((evaluate_samples(&samples, options)?, tally));
    }

    let stats = two_pass_plan(spec, options.strict)?;
    let table =
        LevelBidTable::from_bid_counts(&stats.positive_bid_counts, options.bucketing.quantization)?;
    let n_negative = stats.n_samples() - stats.n_positive();
    let reward_max = reward_max_from_counts(&table, &stats.positive_bid_counts, n_negative)?;

    let mut report = MetricsReport {
        n_samples: stats.n_samples(),
        n_positive: stats.n_positive(),
        n_groups: stats.n_groups,
        reward_max,
        ..MetricsReport::default()
    };
    if options.wants(MetricKind::Copc) {
        report.copc = Some(stats.sums.copc()?);
    }
    if options.wants(MetricKind::Ropr) {
        report.ropr = Some(stats.sums.ropr()?);
    }

    if options.wants(MetricKind::Csauc) || options.wants(MetricKind::Auc) {
        let norm = NormParams::new(stats.min_pcpm, stats.max_pcpm, options.bucketing.n_buckets)?;
        let mut builder = options
            .wants(MetricKind::Csauc)
            .then(|| GridBuilder::new(&table, norm));
        let mut scored: Option<Vec<(f64, bool)>> = options
            .wants(MetricKind::Auc)
            .then(|| Vec::with_capacity(stats.n_samples() as usize));
        let mut stream = stream_samples(spec, options.strict)?;
        for item in &mut stream {
            let sample = item?;
            if let Some(builder) = builder.as_mut() {
                builder.add(&sample)?;
            }
            if let Some(scored) = scored.as_mut() {
                scored.push((sample.pctr, sample.label));
            }
        }
        if let Some(builder) = builder {
            let result = compute_csauc_dp(&builder.finish()?, options.tie_policy)?;
            report.csauc = Some(result.csauc);
            report.reward_max = result.reward_max;
        }
        if let Some(mut scored) = scored {
            report.auc = Some(auc_rank_scored(&mut scored)?);
        }
    }

    Ok((report, stats.tally))
}

/// Evaluates already-validated samples in memory.
pub fn evaluate_samples<S: Borrow<Sample> + Sync>(
    samples: &[S],
    options: &EvalOptions,
) -> Result<MetricsReport> {
    if samples.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut sums = RunningSums::default();
    let mut min_pcpm = f64::INFINITY;
    let mut max_pcpm = f64::NEG_INFINITY;
    let mut groups: std::collections::HashSet<&str> = std::collections::HashSet::new();
    for s in samples {
        let s = s.borrow();
        sums.add(s);
        min_pcpm = min_pcpm.min(s.pcpm());
        max_pcpm = max_pcpm.max(s.pcpm());
        if let Some(key) = s.group_key.as_deref() {
            groups.insert(key);
        }
    }

    let table = build_level_table(samples, options.bucketing.quantization)?;
    let bid_counts = crate::bucketing::positive_bid_counts(samples);
    let n_negative = sums.n_samples - sums.n_positive;
    let mut report = MetricsReport {
        n_samples: sums.n_samples,
        n_positive: sums.n_positive,
        n_groups: groups.len() as u64,
        reward_max: reward_max_from_counts(&table, &bid_counts, n_negative)?,
        ..MetricsReport::default()
    };

    if options.wants(MetricKind::Copc) {
        report.copc = Some(sums.copc()?);
    }
    if options.wants(MetricKind::Ropr) {
        report.ropr = Some(sums.ropr()?);
    }
    if options.wants(MetricKind::Auc) {
        let mut scored: Vec<(f64, bool)> = samples
            .iter()
            .map(|s| {
                let s = s.borrow();
                (s.pctr, s.label)
            })
            .collect();
        report.auc = Some(auc_rank_scored(&mut scored)?);
    }
    if options.wants(MetricKind::Csauc) {
        let norm = NormParams::new(min_pcpm, max_pcpm, options.bucketing.n_buckets)?;
        let grid = build_grid(samples.iter().map(Borrow::borrow), &table, norm)?;
        let result = compute_csauc_dp(&grid, options.tie_policy)?;
        report.csauc = Some(result.csauc);
        report.reward_max = result.reward_max;
    }

    let mut gcsauc_out: Option<GroupedValue> = None;
    let mut gauc_out: Option<GroupedValue> = None;
    if options.wants(MetricKind::Gcsauc) {
        let out = gcsauc(
            samples,
            &options.group_policy,
            options.tie_policy,
            &options.bucketing,
        )?;
        report.gcsauc = Some(out.value);
        gcsauc_out = Some(out);
    }
    if options.wants(MetricKind::Gauc) {
        let out = gauc(samples, &options.group_policy)?;
        report.gauc = Some(out.value);
        gauc_out = Some(out);
    }
    report.skipped_groups = match (&gcsauc_out, &gauc_out) {
        (Some(g), _) => g.skipped_groups,
        (None, Some(g)) => g.skipped_groups,
        (None, None) => 0,
    };
    if options.per_group && (gcsauc_out.is_some() || gauc_out.is_some()) {
        report.per_group = Some(merge_per_group(gcsauc_out, gauc_out));
    }
    Ok(report)
}

fn merge_per_group(
    gcsauc_out: Option<GroupedValue>,
    gauc_out: Option<GroupedValue>,
) -> Vec<GroupReportRow> {
    let mut rows: BTreeMap<String, GroupReportRow> = BTreeMap::new();
    if let Some(out) = gcsauc_out {
        for per in out.per_group {
            let row = rows.entry(per.key.clone()).or_insert_with(|| GroupReportRow {
                key: per.key.clone(),
                csauc: None,
                csauc_weight: None,
                auc: None,
                auc_weight: None,
            });
            row.csauc = Some(per.value);
            row.csauc_weight = Some(per.weight);
        }
    }
    if let Some(out) = gauc_out {
        for per in out.per_group {
            let row = rows.entry(per.key.clone()).or_insert_with(|| GroupReportRow {
                key: per.key.clone(),
                csauc: None,
                csauc_weight: None,
                auc: None,
                auc_weight: None,
            });
            row.auc = Some(per.value);
            row.auc_weight = Some(per.weight);
        }
    }
    rows.into_values().collect()
}

/// Attainable revenue over strict-level pairs, from the level table and
/// the distinct-bid multiplicities. Zero when nothing outranks
/// anything.
fn reward_max_from_counts(
    table: &LevelBidTable,
    bid_counts: &[(f64, u64)],
    n_negative: u64,
) -> Result<f64> {
    let mut level_counts = vec![0u64; table.n_levels()];
    level_counts[0] = n_negative;
    for &(bid, cnt) in bid_counts {
        let level = table.level_of_bid(bid)?;
        level_counts[level] += cnt;
    }
    let mut below = 0u64;
    let mut total = 0.0f64;
    for (level, &count) in level_counts.iter().enumerate() {
        if level >= 1 && count > 0 && below > 0 {
            total += count as f64 * table.rep_bid(level) * below as f64;
        }
        below += count;
    }
    Ok(total)
}

const REPORT_FIELDS: [&str; 6] = ["auc", "csauc", "gcsauc", "gauc", "copc", "ropr"];

fn metric_value(report: &MetricsReport, name: &str) -> Option<f64> {
    match name {
        "auc" => report.auc,
        "csauc" => report.csauc,
        "gcsauc" => report.gcsauc,
        "gauc" => report.gauc,
        "copc" => report.copc,
        "ropr" => report.ropr,
        _ => None,
    }
}

/// Renders the report as one JSON object with fixed key order and
/// fixed-precision floats, so identical runs emit identical bytes.
pub fn render_json(report: &MetricsReport, precision: usize) -> String {
    let mut out = String::from("{");
    let mut first = true;
    let mut push = |out: &mut String, key: &str, value: String| {
        if !first {
            out.push(',');
        }
        first = false;
        out.push('"');
        out.push_str(key);
        out.push_str("\":");
        out.push_str(&value);
    };
    for name in REPORT_FIELDS {
        if let Some(value) = metric_value(report, name) {
            push(&mut out, name, format!("{value:.precision$}"));
        }
    }
    push(&mut out, "n_samples", report.n_samples.to_string());
    push(&mut out, "n_positive", report.n_positive.to_string());
    push(&mut out, "n_groups", report.n_groups.to_string());
    push(
        &mut out,
        "reward_max",
        format!("{:.precision$}", report.reward_max),
    );
    push(
        &mut out,
        "skipped_groups",
        report.skipped_groups.to_string(),
    );
    if let Some(rows) = &report.per_group {
        let mut array = String::from("[");
        for (i, row) in rows.iter().enumerate() {
            if i > 0 {
                array.push(',');
            }
            array.push_str("{\"key\":");
            array.push_str(&serde_json::to_string(&row.key).expect("string serializes"));
            for (key, value) in [
                ("csauc", row.csauc),
                ("csauc_weight", row.csauc_weight),
                ("auc", row.auc),
                ("auc_weight", row.auc_weight),
            ] {
                if let Some(value) = value {
                    array.push_str(&format!(",\"{key}\":{value:.precision$}"));
                }
            }
            array.push('}');
        }
        array.push(']');
        push(&mut out, "per_group", array);
    }
    out.push('}');
    out
}

/// Renders the report as an aligned human-readable table.
pub fn render_text(report: &MetricsReport, precision: usize) -> String {
    let mut out = String::new();
    for name in REPORT_FIELDS {
        if let Some(value) = metric_value(report, name) {
            out.push_str(&format!("{name:<15}{value:.precision$}\n"));
        }
    }
    out.push_str(&format!("{:<15}{}\n", "n_samples", report.n_samples));
    out.push_str(&format!("{:<15}{}\n", "n_positive", report.n_positive));
    out.push_str(&format!("{:<15}{}\n", "n_groups", report.n_groups));
    out.push_str(&format!(
        "{:<15}{:.precision$}\n",
        "reward_max", report.reward_max
    ));
    out.push_str(&format!(
        "{:<15}{}\n",
        "skipped_groups", report.skipped_groups
    ));
    if let Some(rows) = &report.per_group {
        out.push_str("per group:\n");
        for row in rows {
            out.push_str(&format!("  {:<20}", row.key));
            if let Some(v) = row.csauc {
                out.push_str(&format!(" csauc={v:.precision$}"));
            }
            if let Some(w) = row.csauc_weight {
                out.push_str(&format!(" weight={w:.precision$}"));
            }
            if let Some(v) = row.auc {
                out.push_str(&format!(" auc={v:.precision$}"));
            }
            if let Some(w) = row.auc_weight {
                out.push_str(&format!(" auc_weight={w:.precision$}"));
            }
            out.push('\n');
        }
    }
    out
}
