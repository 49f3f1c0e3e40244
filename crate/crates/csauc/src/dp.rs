//! Revenue-weighted ranking reward over a [`BucketGrid`] in a single
//! level-ordered sweep.
//!
//! For every pair of samples on *strictly different* bid levels, the
//! higher-level sample pays its (representative) bid when its score
//! bucket wins, the lower sample's T-value when it loses, and a
//! tie-policy blend when both land in the same bucket. The quotient of
//! paid revenue over attainable revenue is csAUC.
//!
//! Enumerating pairs of occupied cells directly costs O(cells²); the
//! sweep below replaces that with prefix/suffix sums over the score
//! buckets, costing O(cells + levels * buckets).

use std::borrow::Borrow;

use crate::bucketing::{BucketGrid, GridBuilder, LevelBidTable, NormParams};
use crate::error::{Error, Result};
use crate::model::{Sample, TiePolicy};

/// Outcome of one reward computation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RewardResult {
    /// Revenue captured by the evaluated ranking (currency * pairs).
    pub reward_rank: f64,
    /// Revenue captured by the ideal ranking: the sum of the
    /// higher-level bid over all strict-level pairs.
    pub reward_max: f64,
    /// `reward_rank / reward_max`.
    pub csauc: f64,
    /// Number of strict-level pairs.
    pub n_pairs: u64,
}

/// Plain or Kahan-compensated running sum. Compensation only matters
/// when bid magnitudes span many orders within one dataset.
#[derive(Clone, Copy)]
enum Acc {
    Plain(f64),
    Kahan { sum: f64, carry: f64 },
}

impl Acc {
    fn new(compensated: bool) -> Self {
        if compensated {
            Acc::Kahan {
                sum: 0.0,
                carry: 0.0,
            }
        } else {
            Acc::Plain(0.0)
        }
    }

    #[inline]
    fn add(&mut self, x: f64) {
        match self {
            Acc::Plain(sum) => *sum += x,
            Acc::Kahan { sum, carry } => {
                let y = x - *carry;
                let t = *sum + y;
                *carry = (t - *sum) - y;
                *sum = t;
            }
        }
    }

    fn value(&self) -> f64 {
        match self {
            Acc::Plain(sum) => *sum,
            Acc::Kahan { sum, .. } => *sum,
        }
    }
}

/// Computes csAUC over a finished grid with plain double-precision
/// accumulation in a fixed order (levels ascending, buckets ascending),
/// so results are reproducible for identical grids.
pub fn compute_csauc_dp(grid: &BucketGrid, tie_policy: TiePolicy) -> Result<RewardResult> {
    sweep(grid, tie_policy, false)
}

/// Same sweep with Kahan-compensated sums for adversarial magnitude
/// spreads.
pub fn compute_csauc_dp_compensated(
    grid: &BucketGrid,
    tie_policy: TiePolicy,
) -> Result<RewardResult> {
    sweep(grid, tie_policy, true)
}

fn sweep(grid: &BucketGrid, tie_policy: TiePolicy, compensated: bool) -> Result<RewardResult> {
    if grid.n_samples() == 0 {
        return Err(Error::NoSamples);
    }
    let table = grid.level_table();
    let ls = grid.level_counts();
    let n_levels = table.n_levels();
    let n_buckets = grid.norm().n_buckets;

    // Attainable revenue: every sample of level v forms a pair with
    // every sample of any strictly lower level, paying rep_bid(v).
    let mut reward_max = Acc::new(compensated);
    let mut n_pairs = 0u64;
    let mut total_below = 0u64;
    for level in 0..n_levels {
        if level >= 1 && ls[level] > 0 && total_below > 0 {
            reward_max.add(ls[level] as f64 * table.rep_bid(level) * total_below as f64);
            n_pairs += ls[level] * total_below;
        }
        total_below += ls[level];
    }
    if n_pairs == 0 {
        return Err(Error::NoRankedPairs);
    }

    // Per-bucket state over all strictly lower levels: sample counts
    // and T-value sums. `count_before[c]` and `tsum_after[c]` are the
    // prefix/suffix views rebuilt once per occupied level.
    let mut count_low = vec![0u64; n_buckets];
    let mut tsum_low = vec![0f64; n_buckets];
    let mut count_before = vec![0u64; n_buckets];
    let mut tsum_after = vec![0f64; n_buckets];

    let mut reward_rank = Acc::new(compensated);
    let mut lower_n = 0u64;

    for level in 0..n_levels as u32 {
        let cells = grid.level_cells(level);
        if level >= 1 && !cells.is_empty() && lower_n > 0 {
            let mut acc_count = 0u64;
            for c in 0..n_buckets {
                count_before[c] = acc_count;
                acc_count += count_low[c];
            }
            let mut acc_tsum = 0f64;
            for c in (0..n_buckets).rev() {
                tsum_after[c] = acc_tsum;
                acc_tsum += tsum_low[c];
            }

            let bid = table.rep_bid(level as usize);
            for cell in cells {
                let n = cell.count as f64;
                let c = cell.bucket as usize;
                // Wins: lower-level samples in strictly lower buckets.
                reward_rank.add(n * bid * count_before[c] as f64);
                // Losses: lower-level samples in strictly higher
                // buckets pay their own T-value.
                reward_rank.add(n * tsum_after[c]);
                // Ties share the bucket.
                match tie_policy {
                    TiePolicy::HalfCredit => {
                        reward_rank.add(n * 0.5 * (bid * count_low[c] as f64 + tsum_low[c]));
                    }
                    TiePolicy::FullCredit => {
                        reward_rank.add(n * bid * count_low[c] as f64);
                    }
                }
            }
        }

        // Fold this level in; same-level pairs are never scored.
        let t = table.t_value(level as usize);
        for cell in cells {
            count_low[cell.bucket as usize] += cell.count;
            if level >= 1 {
                tsum_low[cell.bucket as usize] += cell.count as f64 * t;
            }
        }
        lower_n += ls[level as usize];
    }

    let reward_rank = reward_rank.value();
    let reward_max = reward_max.value();
    Ok(RewardResult {
        reward_rank,
        reward_max,
        csauc: reward_rank / reward_max,
        n_pairs,
    })
}

/// Buckets a sample stream and runs the sweep, so callers never hold
/// raw samples after bucketing. The result is bit-identical to building
/// the grid first and sweeping it.
pub fn compute_csauc_streaming<I>(
    samples: I,
    table: &LevelBidTable,
    norm: NormParams,
    tie_policy: TiePolicy,
) -> Result<RewardResult>
where
    I: IntoIterator,
    I::Item: Borrow<Sample>,
{
    let mut builder = GridBuilder::new(table, norm);
    for s in samples {
        builder.add(s.borrow())?;
    }
    compute_csauc_dp(&builder.finish()?, tie_policy)
}
