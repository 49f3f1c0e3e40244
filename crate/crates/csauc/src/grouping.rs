//! Group-wise evaluation: csAUC and AUC computed inside groups (per
//! request, user, placement, ...) and aggregated by a weight policy.
//!
//! Bid leveling and score normalization are per-group, since pairs only
//! ever form within a group and cross-group score scales are never
//! compared.

use std::borrow::Borrow;
use std::collections::BTreeMap;

use rayon::prelude::*;

use crate::bucketing::{build_grid, build_level_table, BucketingConfig, NormParams};
use crate::dp::compute_csauc_dp;
use crate::error::{Error, Result};
use crate::metrics::auc_rank;
use crate::model::{Sample, TiePolicy};

/// How per-group values aggregate into one number.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GroupWeight {
    /// Weight by the group's attainable revenue. The aggregate then
    /// equals total captured revenue over total attainable revenue
    /// across all within-group pairs.
    #[default]
    RewardMax,
    /// Weight by group size, for GAUC-style comparability.
    ImpressionCount,
    /// Every group counts the same.
    Uniform,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GroupPolicy {
    pub weight: GroupWeight,
    /// Groups smaller than this are skipped (and counted as skipped).
    pub min_group_size: usize,
}

impl Default for GroupPolicy {
    fn default() -> Self {
        GroupPolicy {
            weight: GroupWeight::RewardMax,
            min_group_size: 2,
        }
    }
}

/// Per-group value and its aggregation weight.
#[derive(Debug, Clone, PartialEq)]
pub struct PerGroup {
    pub key: String,
    pub value: f64,
    pub weight: f64,
}

/// Aggregated group-wise metric.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupedValue {
    pub value: f64,
    pub n_groups: u64,
    pub skipped_groups: u64,
    /// Contributing groups only, in key order.
    pub per_group: Vec<PerGroup>,
}

/// csAUC per group, aggregated by the policy weight. Groups without a
/// strict-level pair (or below the size floor) are skipped and counted.
pub fn gcsauc<S: Borrow<Sample> + Sync>(
    samples: &[S],
    policy: &GroupPolicy,
    tie_policy: TiePolicy,
    bucketing: &BucketingConfig,
) -> Result<GroupedValue> {
    let groups = partition(samples)?;
    let bucketing = *bucketing;
    aggregate(
        groups,
        policy,
        move |members| match csauc_of_group(members, tie_policy, &bucketing)? {
            None => Ok(None),
            Some((value, reward_max)) => {
                let weight = match policy.weight {
                    GroupWeight::RewardMax => reward_max,
                    GroupWeight::ImpressionCount => members.len() as f64,
                    GroupWeight::Uniform => 1.0,
                };
                Ok(Some((value, weight)))
            }
        },
    )
}

/// AUC per group, aggregated by the policy weight. Groups lacking one
/// of the classes (or below the size floor) are skipped and counted.
pub fn gauc<S: Borrow<Sample> + Sync>(
    samples: &[S],
    policy: &GroupPolicy,
) -> Result<GroupedValue> {
    let groups = partition(samples)?;
    aggregate(groups, policy, move |members| {
        let value = match auc_rank(members) {
            Ok(v) => v,
            Err(Error::NoPosNegPairs) => return Ok(None),
            Err(e) => return Err(e),
        };
        let weight = match policy.weight {
            GroupWeight::RewardMax => attainable_revenue(members),
            GroupWeight::ImpressionCount => members.len() as f64,
            GroupWeight::Uniform => 1.0,
        };
        Ok(Some((value, weight)))
    })
}

fn partition<S: Borrow<Sample>>(samples: &[S]) -> Result<BTreeMap<&str, Vec<&Sample>>> {
    let mut groups: BTreeMap<&str, Vec<&Sample>> = BTreeMap::new();
    for (row, s) in samples.iter().enumerate() {
        let s = s.borrow();
        let key = s
            .group_key
            .as_deref()
            .ok_or(Error::MissingGroupKey(row as u64))?;
        groups.entry(key).or_default().push(s);
    }
    Ok(groups)
}

fn aggregate<F>(
    groups: BTreeMap<&str, Vec<&Sample>>,
    policy: &GroupPolicy,
    compute: F,
) -> Result<GroupedValue>
where
    F: Fn(&[&Sample]) -> Result<Option<(f64, f64)>> + Sync,
{
    let n_groups = groups.len() as u64;
    let ordered: Vec<(&str, Vec<&Sample>)> = groups.into_iter().collect();
    let outcomes: Vec<Result<Option<(f64, f64)>>> = ordered
        .par_iter()
        .map(|(_, members)| {
            if members.len() < policy.min_group_size {
                return Ok(None);
            }
            compute(members)
        })
        .collect();

    let mut per_group = Vec::new();
    let mut weighted_sum = 0.0f64;
    let mut weight_sum = 0.0f64;
    let mut skipped = 0u64;
    for ((key, _), outcome) in ordered.iter().zip(outcomes) {
        match outcome? {
            None => skipped += 1,
            Some((value, weight)) => {
                weighted_sum += weight * value;
                weight_sum += weight;
                per_group.push(PerGroup {
                    key: (*key).to_string(),
                    value,
                    weight,
                });
            }
        }
    }
    if per_group.is_empty() || weight_sum <= 0.0 {
        return Err(Error::AllGroupsSkipped);
    }
    // A lone contributing group reduces to its own value exactly,
    // without a round trip through the weighted mean.
    let value = if per_group.len() == 1 {
        per_group[0].value
    } else {
        weighted_sum / weight_sum
    };
    Ok(GroupedValue {
        value,
        n_groups,
        skipped_groups: skipped,
        per_group,
    })
}

fn csauc_of_group(
    members: &[&Sample],
    tie_policy: TiePolicy,
    bucketing: &BucketingConfig,
) -> Result<Option<(f64, f64)>> {
    let table = build_level_table(members, bucketing.quantization)?;
    let (min, max) = members
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), s| {
            (lo.min(s.pcpm()), hi.max(s.pcpm()))
        });
    let norm = NormParams::new(min, max, bucketing.n_buckets)?;
    let grid = build_grid(members.iter().copied(), &table, norm)?;
    match compute_csauc_dp(&grid, tie_policy) {
        Ok(r) => Ok(Some((r.csauc, r.reward_max))),
        Err(Error::NoRankedPairs) => Ok(None),
        Err(e) => Err(e),
    }
}

/// Attainable revenue over strict-level pairs under exact-bid leveling;
/// depends only on labels and bids, so it doubles as a group weight for
/// metrics that never touch the score.
pub fn attainable_revenue<S: Borrow<Sample>>(samples: &[S]) -> f64 {
    let counts = crate::bucketing::positive_bid_counts(samples);
    let n_negative = samples
        .iter()
        .filter(|s| {
            let s: &Sample = (*s).borrow();
            !s.label
        })
        .count() as u64;
    let mut below = n_negative;
    let mut total = 0.0f64;
    for &(bid, cnt) in &counts {
        total += cnt as f64 * bid * below as f64;
        below += cnt;
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::validate_record;
    use crate::oracle::csauc_exact;
    use proptest::prelude::*;

    fn sample(label: i64, bid: f64, pctr: f64, group: &str) -> Sample {
        validate_record(label, bid, pctr, Some(group.to_string())).unwrap()
    }

    fn demo_group(pctrs: [f64; 5], group: &str) -> Vec<Sample> {
        let bids = [100.0, 4.0, 3.0, 2.0, 999.0];
        let labels = [1, 1, 1, 1, 0];
        (0..5)
            .map(|i| sample(labels[i], bids[i], pctrs[i], group))
            .collect()
    }

    #[test]
    fn two_copies_with_opposite_orderings_blend_by_reward() {
        // One group ranked ideally (csauc 1), one with the positives
        // reversed (csauc 125/420); both attain 420, so the blend is
        // 545/840.
        let mut samples = demo_group([0.5, 0.9, 0.9, 0.9, 0.000001], "ideal");
        samples.extend(demo_group([0.001, 0.4, 0.6, 1.0, 0.000001], "reversed"));
        let out = gcsauc(
            &samples,
            &GroupPolicy::default(),
            TiePolicy::HalfCredit,
            &BucketingConfig::default(),
        )
        .unwrap();
        assert_eq!(out.n_groups, 2);
        assert_eq!(out.skipped_groups, 0);
        assert!((out.value - 545.0 / 840.0).abs() < 1e-9);
        assert_eq!(out.per_group.len(), 2);
        assert!((out.per_group[0].weight - 420.0).abs() < 1e-9);
        assert!((out.per_group[1].weight - 420.0).abs() < 1e-9);
    }

    #[test]
    fn single_group_reduces_to_plain_csauc() {
        let samples = demo_group([0.001, 0.4, 0.6, 1.0, 0.000001], "only");
        let grouped = gcsauc(
            &samples,
            &GroupPolicy::default(),
            TiePolicy::HalfCredit,
            &BucketingConfig::default(),
        )
        .unwrap();
        let exact = csauc_exact(&samples, TiePolicy::HalfCredit).unwrap();
        assert_eq!(grouped.value, exact.csauc);
    }

    #[test]
    fn all_negative_groups_are_all_skipped() {
        let samples = vec![
            sample(0, 5.0, 0.4, "a"),
            sample(0, 6.0, 0.3, "a"),
            sample(0, 7.0, 0.2, "b"),
            sample(0, 8.0, 0.1, "b"),
        ];
        assert!(matches!(
            gcsauc(
                &samples,
                &GroupPolicy::default(),
                TiePolicy::HalfCredit,
                &BucketingConfig::default(),
            ),
            Err(Error::AllGroupsSkipped)
        ));
    }

    #[test]
    fn missing_group_key_is_an_error() {
        let mut samples = demo_group([0.5, 0.9, 0.9, 0.9, 0.000001], "g");
        samples.push(validate_record(1, 2.0, 0.5, None).unwrap());
        match gcsauc(
            &samples,
            &GroupPolicy::default(),
            TiePolicy::HalfCredit,
            &BucketingConfig::default(),
        ) {
            Err(Error::MissingGroupKey(row)) => assert_eq!(row, 5),
            other => panic!("expected MissingGroupKey, got {other:?}"),
        }
    }

    #[test]
    fn undersized_groups_are_skipped_not_fatal() {
        let mut samples = demo_group([0.5, 0.9, 0.9, 0.9, 0.000001], "big");
        samples.push(sample(1, 2.0, 0.5, "singleton"));
        let out = gcsauc(
            &samples,
            &GroupPolicy::default(),
            TiePolicy::HalfCredit,
            &BucketingConfig::default(),
        )
        .unwrap();
        assert_eq!(out.n_groups, 2);
        assert_eq!(out.skipped_groups, 1);
        assert_eq!(out.per_group.len(), 1);
    }

    #[test]
    fn grouped_auc_of_opposite_groups_is_half() {
        let samples = vec![
            sample(1, 1.0, 0.9, "good"),
            sample(0, 1.0, 0.1, "good"),
            sample(1, 1.0, 0.1, "bad"),
            sample(0, 1.0, 0.9, "bad"),
        ];
        let policy = GroupPolicy {
            weight: GroupWeight::ImpressionCount,
            min_group_size: 2,
        };
        let out = gauc(&samples, &policy).unwrap();
        assert_eq!(out.value, 0.5);
    }

    #[test]
    fn grouped_auc_uniform_mean_of_concordant_and_tied() {
        let samples = vec![
            sample(1, 1.0, 0.9, "concordant"),
            sample(0, 1.0, 0.1, "concordant"),
            sample(1, 1.0, 0.5, "tied"),
            sample(0, 1.0, 0.5, "tied"),
        ];
        let policy = GroupPolicy {
            weight: GroupWeight::Uniform,
            min_group_size: 2,
        };
        let out = gauc(&samples, &policy).unwrap();
        assert_eq!(out.value, 0.75);
    }

    #[test]
    fn grouped_auc_single_group_equals_auc_rank() {
        let samples = demo_group([0.5, 0.9, 0.8, 0.7, 0.2], "g");
        let out = gauc(&samples, &GroupPolicy::default()).unwrap();
        assert_eq!(out.value, auc_rank(&samples).unwrap());
    }

    #[test]
    fn single_class_groups_are_skipped_for_auc() {
        let samples = vec![
            sample(1, 1.0, 0.9, "mixed"),
            sample(0, 1.0, 0.1, "mixed"),
            sample(1, 1.0, 0.5, "pos-only"),
            sample(1, 2.0, 0.4, "pos-only"),
        ];
        let out = gauc(&samples, &GroupPolicy::default()).unwrap();
        assert_eq!(out.skipped_groups, 1);
        assert_eq!(out.value, 1.0);
    }

    proptest! {
        #[test]
        fn reward_weighting_equals_pooled_ratio(
            rows in proptest::collection::vec(
                (0..2i64, 1u32..6, 0.0f64..1.0, 0u8..4),
                8..120,
            ),
        ) {
            let samples: Vec<Sample> = rows
                .iter()
                .map(|&(label, bid, pctr, g)| {
                    sample(label, bid as f64, pctr, &format!("g{g}"))
                })
                .collect();
            let policy = GroupPolicy::default();
            let out = gcsauc(
                &samples,
                &policy,
                TiePolicy::HalfCredit,
                &BucketingConfig::default(),
            );
            let Ok(out) = out else { return Ok(()); };
            // Sum of weight * value over sum of weights is the pooled
            // captured-over-attainable ratio by construction.
            let captured: f64 = out.per_group.iter().map(|g| g.weight * g.value).sum();
            let attainable: f64 = out.per_group.iter().map(|g| g.weight).sum();
            prop_assert!((out.value - captured / attainable).abs() < 1e-12);
            prop_assert!(out.value >= -1e-12 && out.value <= 1.0 + 1e-12);
            prop_assert!(out.per_group.iter().all(|g| g.weight >= 0.0));
        }

        #[test]
        fn per_group_csauc_matches_exact_oracle(
            rows in proptest::collection::vec(
                (0..2i64, 1u32..5, 0u8..3),
                6..80,
            ),
        ) {
            // Scores spread far enough apart that every sample gets its
            // own bucket inside its group; the bucketized reward then
            // equals the exact pairwise one.
            let n = rows.len() as f64;
            let samples: Vec<Sample> = rows
                .iter()
                .enumerate()
                .map(|(i, &(label, bid, g))| {
                    let pcpm = (i as f64 + 1.0) / (n + 1.0);
                    sample(label, bid as f64, pcpm / bid as f64, &format!("g{g}"))
                })
                .collect();
            let out = gcsauc(
                &samples,
                &GroupPolicy::default(),
                TiePolicy::HalfCredit,
                &BucketingConfig::default(),
            );
            let Ok(out) = out else { return Ok(()); };
            for per in &out.per_group {
                let members: Vec<&Sample> = samples
                    .iter()
                    .filter(|s| s.group_key.as_deref() == Some(per.key.as_str()))
                    .collect();
                let exact = csauc_exact(&members, TiePolicy::HalfCredit).unwrap();
                prop_assert!(
                    (per.value - exact.csauc).abs() < 1e-9,
                    "group {} diverges: {} vs {}",
                    per.key,
                    per.value,
                    exact.csauc
                );
            }
        }
    }
}
