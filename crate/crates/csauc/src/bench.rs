//! Reproducible scaling harness: the grid sweep against the quadratic
//! cell-pairwise baseline over generated datasets.
//!
//! Timings are reported, never asserted; hardware varies. What *is*
//! checked is agreement: whenever the baseline runs, its csAUC must
//! match the sweep to 1e-9.

use std::time::Instant;

use crate::bucketing::{build_grid, build_level_table, BidQuantization, BucketGrid, NormParams};
use crate::dp::compute_csauc_dp;
use crate::error::{Error, Result};
use crate::gen::{generate_samples, BidDist, GenConfig};
use crate::model::{Sample, TiePolicy};
use crate::oracle::csauc_exact_on_grid;

#[derive(Debug, Clone)]
pub struct BenchConfig {
    /// Sample counts to generate.
    pub sizes: Vec<u64>,
    /// Target level counts (campaigns per dataset).
    pub levels: Vec<u32>,
    /// Score bucket counts.
    pub buckets: Vec<usize>,
    /// Timed repetitions per configuration; the median is reported.
    pub runs: usize,
    pub seed: u64,
    /// Baseline column is populated only for n at or below this.
    pub oracle_cap: u64,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            sizes: vec![1_000, 10_000, 100_000],
            levels: vec![10, 100],
            buckets: vec![1_001, 100_001],
            runs: 5,
            seed: 0,
            oracle_cap: 20_000,
        }
    }
}

/// One benchmarked configuration.
#[derive(Debug, Clone)]
pub struct BenchRow {
    pub n: u64,
    /// Actual level count of the built table (including level 0).
    pub l1: usize,
    pub l2: usize,
    pub occupied_cells: usize,
    pub dp_seconds: f64,
    pub oracle_seconds: Option<f64>,
}

/// Runs every `(size, levels, buckets)` combination, one at a time.
pub fn bench_scaling(config: &BenchConfig) -> Result<Vec<BenchRow>> {
    if config.runs == 0 {
        return Err(Error::InvalidConfig(
            "need at least one timed run".to_string(),
        ));
    }
    let mut out = Vec::new();
    for &n in &config.sizes {
        for &levels in &config.levels {
            for &buckets in &config.buckets {
                let gen_config = GenConfig {
                    seed: config.seed ^ (n.rotate_left(17)) ^ (levels as u64),
                    n,
                    campaigns: levels,
                    bid_dist: BidDist::UniformInt { max: levels * 8 },
                    noise: 0.5,
                    groups: 0,
                };
                let samples = generate_samples(&gen_config)?;
                let grid = grid_for(&samples, buckets)?;

                let mut dp_times = Vec::with_capacity(config.runs);
                let mut dp_result = None;
                for _ in 0..config.runs {
                    let started = Instant::now();
                    let result = compute_csauc_dp(&grid, TiePolicy::HalfCredit)?;
                    dp_times.push(started.elapsed().as_secs_f64());
                    dp_result = Some(result);
                }
                let dp_result = dp_result.expect("ran at least once");

                let oracle_seconds = if n <= config.oracle_cap {
                    let mut times = Vec::with_capacity(config.runs);
                    let mut oracle_result = None;
                    for _ in 0..config.runs {
                        let started = Instant::now();
                        let result = csauc_exact_on_grid(&grid, TiePolicy::HalfCredit)?;
                        times.push(started.elapsed().as_secs_f64());
                        oracle_result = Some(result);
                    }
                    let oracle_result = oracle_result.expect("ran at least once");
                    let diff = (dp_result.csauc - oracle_result.csauc).abs();
                    if diff > 1e-9 {
                        return Err(Error::InvalidConfig(format!(
                            "sweep and baseline disagree at n={n}: {} vs {} (diff {diff:e})",
                            dp_result.csauc, oracle_result.csauc
                        )));
                    }
                    Some(median(&mut times))
                } else {
                    None
                };

                out.push(BenchRow {
                    n,
                    l1: grid.level_table().n_levels(),
                    l2: buckets,
                    occupied_cells: grid.cells().len(),
                    dp_seconds: median(&mut dp_times),
                    oracle_seconds,
                });
            }
        }
    }
    Ok(out)
}

fn grid_for(samples: &[Sample], buckets: usize) -> Result<BucketGrid> {
    let table = build_level_table(samples, BidQuantization::ExactBids)?;
    let (min, max) = samples
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), s| {
            (lo.min(s.pcpm()), hi.max(s.pcpm()))
        });
    let norm = NormParams::new(min, max, buckets)?;
    build_grid(samples, &table, norm)
}

fn median(times: &mut [f64]) -> f64 {
    times.sort_unstable_by(f64::total_cmp);
    times[times.len() / 2]
}

/// CSV rendering of the timing table.
pub fn render_csv(rows: &[BenchRow]) -> String {
    let mut out = String::from("n,l1,l2,occupied_cells,dp_seconds,oracle_seconds\n");
    for row in rows {
        let oracle = row
            .oracle_seconds
            .map(|s| format!("{s:.6}"))
            .unwrap_or_else(|| "skipped".to_string());
        out.push_str(&format!(
            "{},{},{},{},{:.6},{}\n",
            row.n, row.l1, row.l2, row.occupied_cells, row.dp_seconds, oracle
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tiny_smoke_run_agrees_and_renders() {
        let config = BenchConfig {
            sizes: vec![10, 200],
            levels: vec![4],
            buckets: vec![101],
            runs: 5,
            seed: 3,
            oracle_cap: 20_000,
        };
        let rows = bench_scaling(&config).unwrap();
        assert_eq!(rows.len(), 2);
        // Baseline ran everywhere under the cap, and agreement is
        // enforced inside bench_scaling.
        assert!(rows.iter().all(|r| r.oracle_seconds.is_some()));
        let csv = render_csv(&rows);
        assert!(csv.starts_with("n,l1,l2,"));
        assert_eq!(csv.lines().count(), 3);
    }

    #[test]
    fn cap_skips_the_baseline() {
        let config = BenchConfig {
            sizes: vec![500],
            levels: vec![4],
            buckets: vec![101],
            runs: 1,
            seed: 3,
            oracle_cap: 100,
        };
        let rows = bench_scaling(&config).unwrap();
        assert!(rows[0].oracle_seconds.is_none());
        assert!(render_csv(&rows).contains("skipped"));
    }
}
