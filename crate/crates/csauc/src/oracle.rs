//! Quadratic reference implementations used as ground truth in tests
//! and exposed through the `oracle` subcommand for small inputs.
//!
//! [`csauc_exact`] enumerates sample pairs over exact scores and actual
//! bids; [`csauc_exact_on_grid`] replays the same payment rules over
//! bucketized scores and representative bids, which is what the sweep
//! in [`crate::dp`] must reproduce. Keeping both sides of the check
//! independent of the sweep is the whole point of this module.

use std::borrow::Borrow;

use rayon::prelude::*;

use crate::bucketing::BucketGrid;
use crate::dp::RewardResult;
use crate::error::{Error, Result};
use crate::model::{Sample, TiePolicy};

/// Pair enumeration is chunked by outer index and partial sums are
/// reduced in chunk order, so results do not depend on thread count.
const PAIR_CHUNK: usize = 256;

/// Exact pairwise csAUC: levels are the distinct positive bids over
/// level 0, scores are compared as exact floats, and payments use the
/// actual bids. Ties are constructed, never approximated: two scores
/// tie only when they are bit-equal.
pub fn csauc_exact<S: Borrow<Sample> + Sync>(
    samples: &[S],
    tie_policy: TiePolicy,
) -> Result<RewardResult> {
    if samples.is_empty() {
        return Err(Error::NoSamples);
    }
    let mut distinct_bids: Vec<f64> = samples
        .iter()
        .filter_map(|s| {
            let s: &Sample = s.borrow();
            s.label.then_some(s.bid)
        })
        .collect();
    distinct_bids.sort_unstable_by(f64::total_cmp);
    distinct_bids.dedup();

    // (level, pcpm, bid, t_value) per sample.
    let keyed: Vec<(usize, f64, f64, f64)> = samples
        .iter()
        .map(|s| {
            let s = s.borrow();
            let level = if s.label {
                1 + distinct_bids
                    .binary_search_by(|b| b.total_cmp(&s.bid))
                    .expect("positive bid is in its own distinct set")
            } else {
                0
            };
            (level, s.pcpm(), s.bid, s.t_value())
        })
        .collect();

    let chunks: Vec<(f64, f64, u64)> = (0..keyed.len())
        .collect::<Vec<_>>()
        .par_chunks(PAIR_CHUNK)
        .map(|outer| {
            let mut reward_rank = 0.0;
            let mut reward_max = 0.0;
            let mut n_pairs = 0u64;
            for &i in outer {
                let (level_i, pcpm_i, bid_i, t_i) = keyed[i];
                for &(level_j, pcpm_j, bid_j, t_j) in &keyed[i + 1..] {
                    if level_i == level_j {
                        continue;
                    }
                    let (bid_h, pcpm_h, pcpm_l, t_l) = if level_i > level_j {
                        (bid_i, pcpm_i, pcpm_j, t_j)
                    } else {
                        (bid_j, pcpm_j, pcpm_i, t_i)
                    };
                    reward_max += bid_h;
                    n_pairs += 1;
                    reward_rank += pair_payment(pcpm_h, pcpm_l, bid_h, t_l, tie_policy);
                }
            }
            (reward_rank, reward_max, n_pairs)
        })
        .collect();

    let mut reward_rank = 0.0;
    let mut reward_max = 0.0;
    let mut n_pairs = 0u64;
    for (r, m, p) in chunks {
        reward_rank += r;
        reward_max += m;
        n_pairs += p;
    }
    if n_pairs == 0 {
        return Err(Error::NoRankedPairs);
    }
    Ok(RewardResult {
        reward_rank,
        reward_max,
        csauc: reward_rank / reward_max,
        n_pairs,
    })
}

#[inline]
fn pair_payment(pcpm_h: f64, pcpm_l: f64, bid_h: f64, t_l: f64, tie_policy: TiePolicy) -> f64 {
    if pcpm_h > pcpm_l {
        bid_h
    } else if pcpm_h < pcpm_l {
        t_l
    } else {
        match tie_policy {
            TiePolicy::HalfCredit => 0.5 * (bid_h + t_l),
            TiePolicy::FullCredit => bid_h,
        }
    }
}

/// Pairwise csAUC over occupied grid cells, weighting each cell pair by
/// the product of its counts. Bucket indices replace exact scores and
/// representative bids replace actual ones, exactly as the sweep sees
/// them.
pub fn csauc_exact_on_grid(grid: &BucketGrid, tie_policy: TiePolicy) -> Result<RewardResult> {
    let cells = grid.cells();
    if grid.n_samples() == 0 {
        return Err(Error::NoSamples);
    }
    let table = grid.level_table();
    let mut reward_rank = 0.0;
    let mut reward_max = 0.0;
    let mut n_pairs = 0u64;
    for (i, a) in cells.iter().enumerate() {
        for b in &cells[i + 1..] {
            if a.level == b.level {
                continue;
            }
            let (hi, lo) = if a.level > b.level { (a, b) } else { (b, a) };
            let weight = (hi.count * lo.count) as f64;
            let bid_h = table.rep_bid(hi.level as usize);
            let t_l = table.t_value(lo.level as usize);
            reward_max += bid_h * weight;
            n_pairs += hi.count * lo.count;
            let payment = if hi.bucket > lo.bucket {
                bid_h
            } else if hi.bucket < lo.bucket {
                t_l
            } else {
                match tie_policy {
                    TiePolicy::HalfCredit => 0.5 * (bid_h + t_l),
                    TiePolicy::FullCredit => bid_h,
                }
            };
            reward_rank += payment * weight;
        }
    }
    if n_pairs == 0 {
        return Err(Error::NoRankedPairs);
    }
    Ok(RewardResult {
        reward_rank,
        reward_max,
        csauc: reward_rank / reward_max,
        n_pairs,
    })
}

/// Pairwise AUC over positive-negative pairs ranked by pCTR: 1 per
/// correctly ordered pair, 0.5 per exact tie.
pub fn auc_pairwise<S: Borrow<Sample> + Sync>(samples: &[S]) -> Result<f64> {
    let mut positives: Vec<f64> = Vec::new();
    let mut negatives: Vec<f64> = Vec::new();
    for s in samples {
        let s: &Sample = s.borrow();
        if s.label {
            positives.push(s.pctr);
        } else {
            negatives.push(s.pctr);
        }
    }
    if positives.is_empty() || negatives.is_empty() {
        return Err(Error::NoPosNegPairs);
    }
    let partials: Vec<f64> = positives
        .par_chunks(PAIR_CHUNK)
        .map(|chunk| {
            let mut credit = 0.0;
            for &p in chunk {
                for &n in &negatives {
                    if p > n {
                        credit += 1.0;
                    } else if p == n {
                        credit += 0.5;
                    }
                }
            }
            credit
        })
        .collect();
    let credit: f64 = partials.iter().sum();
    Ok(credit / (positives.len() as f64 * negatives.len() as f64))
}
