//! Domain types shared by every other module.

use crate::error::{Error, Result};

/// One scored impression from an evaluation log.
///
/// `bid` is the advertiser's declared payment per mille and `pctr` the
/// model's predicted click probability; their product is the expected
/// revenue (pCPM) used as the ranking score. All fields are immutable
/// after construction, so samples are safe to share across threads.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    /// True iff the impression was clicked.
    pub label: bool,
    /// Declared payment per mille; always positive and finite.
    pub bid: f64,
    /// Predicted click probability in `[0, 1]`.
    pub pctr: f64,
    /// Opaque grouping key (request, user, placement, ...).
    pub group_key: Option<String>,
}

impl Sample {
    /// Expected revenue of the impression, computed in a single
    /// multiplication and never stored separately from the sample.
    #[inline]
    pub fn pcpm(&self) -> f64 {
        self.pctr * self.bid
    }

    /// Revenue paid when this sample wins a pair against a higher-level
    /// one: zero for negatives, the bid otherwise.
    #[inline]
    pub fn t_value(&self) -> f64 {
        if self.label {
            self.bid
        } else {
            0.0
        }
    }
}

/// Payment rule for pairs whose ranking scores land in the same bucket
/// (or are exactly equal, in the exact pairwise path).
///
/// `HalfCredit` pays the expected revenue under a random tiebreak,
/// `0.5 * (bid_high + t_low)`. `FullCredit` pays the full `bid_high`,
/// which treats a tie as a win for the higher level.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TiePolicy {
    #[default]
    HalfCredit,
    FullCredit,
}

/// Validates one raw record into a well-formed [`Sample`].
///
/// Validation is total: every record either yields a sample or exactly
/// one error naming the offending field. Labels other than 0/1 are
/// rejected rather than coerced, and zero bids are rejected because a
/// zero-bid positive would share rank semantics with negatives.
pub fn validate_record(
    label: i64,
    bid: f64,
    pctr: f64,
    group_key: Option<String>,
) -> Result<Sample> {
    let label = match label {
        0 => false,
        1 => true,
        other => return Err(Error::NonBinaryLabel(other)),
    };
    if !bid.is_finite() {
        return Err(Error::NonFiniteValue {
            field: "bid",
            value: bid,
        });
    }
    if !pctr.is_finite() {
        return Err(Error::NonFiniteValue {
            field: "pctr",
            value: pctr,
        });
    }
    if bid <= 0.0 {
        return Err(Error::NonPositiveBid(bid));
    }
    if !(0.0..=1.0).contains(&pctr) {
        return Err(Error::PctrOutOfRange(pctr));
    }
    Ok(Sample {
        label,
        bid,
        pctr,
        group_key,
    })
}

/// Everything a single evaluation run reports: the requested metrics
/// (absent when not requested) plus dataset statistics.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MetricsReport {
    pub auc: Option<f64>,
    pub csauc: Option<f64>,
    pub gcsauc: Option<f64>,
    pub gauc: Option<f64>,
    pub copc: Option<f64>,
    pub ropr: Option<f64>,
    pub n_samples: u64,
    pub n_positive: u64,
    pub n_groups: u64,
    /// Attainable revenue over all strict-level pairs of the pooled
    /// dataset, under the run's bid-bucketing config.
    pub reward_max: f64,
    pub skipped_groups: u64,
    /// Per-group breakdown, present only when requested.
    pub per_group: Option<Vec<GroupReportRow>>,
}

/// One row of the optional per-group breakdown.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupReportRow {
    pub key: String,
    pub csauc: Option<f64>,
    pub csauc_weight: Option<f64>,
    pub auc: Option<f64>,
    pub auc_weight: Option<f64>,
}
