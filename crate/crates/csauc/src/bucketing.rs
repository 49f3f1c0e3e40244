//! Two-level bucketing of samples.
//!
//! The first level is the *bid level*: level 0 holds every negative
//! sample, levels 1..K hold positive samples in ascending bid order.
//! The second level buckets the min-max-normalized ranking score
//! (pCPM). Counting samples per `(level, score bucket)` cell yields the
//! sparse [`BucketGrid`] that the dynamic program consumes.

use std::borrow::Borrow;
use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::model::Sample;

/// How positive bids are collapsed into levels.
///
/// `ExactBids` (the default) gives one level per distinct bid, which
/// keeps the ranking reward exact; real ad logs rarely have more than a
/// few hundred distinct bids. The other two exist for adversarial bid
/// distributions where the level count must be capped.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum BidQuantization {
    #[default]
    ExactBids,
    /// Fixed-width intervals starting at the smallest positive bid.
    FixedWidth(f64),
    /// At most `k` levels holding roughly equal sample counts.
    Quantile(usize),
}

/// Second-level bucketing parameters: the global pCPM extrema and the
/// bucket count. The default of 100 001 buckets maps the normalized
/// score through `floor(norm * 1e5)` onto `0..=100000`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormParams {
    pub min_pcpm: f64,
    pub max_pcpm: f64,
    pub n_buckets: usize,
}

pub const DEFAULT_PCPM_BUCKETS: usize = 100_001;

/// Full bucketing configuration of a run: how many score buckets and
/// how positive bids collapse into levels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BucketingConfig {
    pub n_buckets: usize,
    pub quantization: BidQuantization,
}

impl Default for BucketingConfig {
    fn default() -> Self {
        BucketingConfig {
            n_buckets: DEFAULT_PCPM_BUCKETS,
            quantization: BidQuantization::ExactBids,
        }
    }
}

impl NormParams {
    pub fn new(min_pcpm: f64, max_pcpm: f64, n_buckets: usize) -> Result<Self> {
        if !(min_pcpm.is_finite() && max_pcpm.is_finite()) || min_pcpm > max_pcpm {
            return Err(Error::InvalidConfig(format!(
                "pcpm extrema must be finite with min <= max, got [{min_pcpm}, {max_pcpm}]"
            )));
        }
        if n_buckets == 0 {
            return Err(Error::InvalidConfig(
                "n_buckets must be at least 1".to_string(),
            ));
        }
        Ok(NormParams {
            min_pcpm,
            max_pcpm,
            n_buckets,
        })
    }

    #[inline]
    pub fn bucket_of(&self, pcpm: f64) -> u32 {
        pcpm_bucket(pcpm, self)
    }
}

/// Maps a ranking score to its second-level bucket:
/// `floor((pcpm - min) / (max - min) * (n_buckets - 1))`, clamped into
/// `[0, n_buckets - 1]`. A degenerate `max == min` maps everything to
/// bucket 0, leaving tie handling to the pair payment rule.
#[inline]
pub fn pcpm_bucket(pcpm: f64, norm: &NormParams) -> u32 {
    let span = norm.max_pcpm - norm.min_pcpm;
    if span <= 0.0 {
        return 0;
    }
    let top = (norm.n_buckets - 1) as f64;
    let raw = ((pcpm - norm.min_pcpm) / span * top).floor();
    if raw <= 0.0 {
        0
    } else if raw >= top {
        norm.n_buckets as u32 - 1
    } else {
        raw as u32
    }
}

#[derive(Debug, Clone)]
struct PositiveLevel {
    rep_bid: f64,
    /// Closed range of member bids; degenerate for `ExactBids`.
    lo: f64,
    hi: f64,
}

/// First-level table: level 0 represents all negatives (T-value 0),
/// levels `1..=K` carry strictly increasing representative bids.
///
/// The representative bid generalizes the level index as the pair
/// reward weight; under `ExactBids` it is the bid itself, so the
/// bucketed reward equals the exact pairwise one.
#[derive(Debug, Clone)]
pub struct LevelBidTable {
    levels: Vec<PositiveLevel>,
    lookup: Lookup,
}

#[derive(Debug, Clone)]
enum Lookup {
    /// Sorted distinct bids, matched exactly.
    Exact,
    /// Occupied raw interval indices over `origin + i * width`.
    FixedWidth { origin: f64, width: f64, raw: Vec<i64> },
    /// Membership by closed bid range per level.
    Ranges,
}

impl LevelBidTable {
    /// Total level count including the negative level 0.
    pub fn n_levels(&self) -> usize {
        self.levels.len() + 1
    }

    pub fn n_positive_levels(&self) -> usize {
        self.levels.len()
    }

    /// Representative bid of a positive level (`level >= 1`).
    pub fn rep_bid(&self, level: usize) -> f64 {
        debug_assert!(level >= 1);
        self.levels[level - 1].rep_bid
    }

    /// Revenue paid when a sample of this level wins a reversed pair:
    /// 0 at level 0, the representative bid otherwise.
    pub fn t_value(&self, level: usize) -> f64 {
        if level == 0 {
            0.0
        } else {
            self.levels[level - 1].rep_bid
        }
    }

    /// Level of a sample: 0 for negatives, bid lookup for positives.
    pub fn level_of(&self, sample: &Sample) -> Result<usize> {
        if !sample.label {
            return Ok(0);
        }
        self.level_of_bid(sample.bid)
    }

    /// Level index (>= 1) of a positive bid, or `LevelLookupMiss` when
    /// the bid falls outside every level. A miss is impossible when the
    /// table was built from the same data.
    pub fn level_of_bid(&self, bid: f64) -> Result<usize> {
        let miss = || Error::LevelLookupMiss(bid);
        match &self.lookup {
            Lookup::Exact => {
                let idx = self
                    .levels
                    .binary_search_by(|l| l.rep_bid.total_cmp(&bid))
                    .map_err(|_| miss())?;
                Ok(idx + 1)
            }
            Lookup::FixedWidth { origin, width, raw } => {
                let r = ((bid - origin) / width).floor();
                if !r.is_finite() || r < 0.0 {
                    return Err(miss());
                }
                let idx = raw.binary_search(&(r as i64)).map_err(|_| miss())?;
                Ok(idx + 1)
            }
            Lookup::Ranges => {
                let idx = self.levels.partition_point(|l| l.hi < bid);
                if idx < self.levels.len()
                    && self.levels[idx].lo <= bid
                    && bid <= self.levels[idx].hi
                {
                    Ok(idx + 1)
                } else {
                    Err(miss())
                }
            }
        }
    }

    /// Builds a table from `(bid, count)` pairs of positive samples,
    /// sorted by ascending bid. An empty slice yields the bare negative
    /// level, which is valid: downstream reward computation reports
    /// `NoRankedPairs` when nothing outranks anything.
    pub fn from_bid_counts(bid_counts: &[(f64, u64)], quantization: BidQuantization) -> Result<Self> {
        debug_assert!(bid_counts.windows(2).all(|w| w[0].0 < w[1].0));
        match quantization {
            BidQuantization::ExactBids => {
                let levels = bid_counts
                    .iter()
                    .map(|&(bid, _)| PositiveLevel {
                        rep_bid: bid,
                        lo: bid,
                        hi: bid,
                    })
                    .collect();
                Ok(LevelBidTable {
                    levels,
                    lookup: Lookup::Exact,
                })
            }
            BidQuantization::FixedWidth(width) => {
                if !(width.is_finite() && width > 0.0) {
                    return Err(Error::InvalidConfig(format!(
                        "bid bucket width must be positive, got {width}"
                    )));
                }
                if bid_counts.is_empty() {
                    return Ok(LevelBidTable {
                        levels: Vec::new(),
                        lookup: Lookup::FixedWidth {
                            origin: 0.0,
                            width,
                            raw: Vec::new(),
                        },
                    });
                }
                let origin = bid_counts[0].0;
                let mut levels: Vec<PositiveLevel> = Vec::new();
                let mut raw: Vec<i64> = Vec::new();
                for &(bid, _) in bid_counts {
                    let r = ((bid - origin) / width).floor() as i64;
                    match raw.last() {
                        Some(&last) if last == r => {
                            let level = levels.last_mut().unwrap();
                            level.hi = bid;
                            level.rep_bid = (level.lo + level.hi) / 2.0;
                        }
                        _ => {
                            raw.push(r);
                            levels.push(PositiveLevel {
                                rep_bid: bid,
                                lo: bid,
                                hi: bid,
                            });
                        }
                    }
                }
                Ok(LevelBidTable {
                    levels,
                    lookup: Lookup::FixedWidth { origin, width, raw },
                })
            }
            BidQuantization::Quantile(k) => {
                if k == 0 {
                    return Err(Error::InvalidConfig(
                        "quantile level count must be at least 1".to_string(),
                    ));
                }
                let total: u64 = bid_counts.iter().map(|&(_, c)| c).sum();
                let mut levels: Vec<PositiveLevel> = Vec::new();
                let mut group: Vec<(f64, u64)> = Vec::new();
                let mut cum = 0u64;
                for &(bid, cnt) in bid_counts {
                    group.push((bid, cnt));
                    cum += cnt;
                    // Close the group once it reaches its share of the
                    // total; identical bids never split across groups
                    // because they arrive as one entry.
                    let close_at = (levels.len() as u64 + 1) * total;
                    if cum * k as u64 >= close_at {
                        levels.push(Self::quantile_level(&group));
                        group.clear();
                    }
                }
                if !group.is_empty() {
                    levels.push(Self::quantile_level(&group));
                }
                Ok(LevelBidTable {
                    levels,
                    lookup: Lookup::Ranges,
                })
            }
        }
    }

    fn quantile_level(group: &[(f64, u64)]) -> PositiveLevel {
        let cnt: u64 = group.iter().map(|&(_, c)| c).sum();
        let weighted: f64 = group.iter().map(|&(b, c)| b * c as f64).sum();
        PositiveLevel {
            rep_bid: weighted / cnt as f64,
            lo: group[0].0,
            hi: group[group.len() - 1].0,
        }
    }

    /// Iterates `(level, representative bid)` for positive levels.
    pub fn positive_levels(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.levels
            .iter()
            .enumerate()
            .map(|(i, l)| (i + 1, l.rep_bid))
    }
}

/// Builds the first-level table from samples.
pub fn build_level_table<S: Borrow<Sample>>(
    samples: &[S],
    quantization: BidQuantization,
) -> Result<LevelBidTable> {
    if samples.is_empty() {
        return Err(Error::NoSamples);
    }
    let counts = positive_bid_counts(samples);
    LevelBidTable::from_bid_counts(&counts, quantization)
}

/// Distinct positive bids with multiplicities, ascending. Bids are
/// keyed by their IEEE bit pattern, which orders positive floats the
/// same way as their values.
pub fn positive_bid_counts<S: Borrow<Sample>>(samples: &[S]) -> Vec<(f64, u64)> {
    let mut map: std::collections::BTreeMap<u64, u64> = std::collections::BTreeMap::new();
    for s in samples {
        let s = s.borrow();
        if s.label {
            *map.entry(s.bid.to_bits()).or_insert(0) += 1;
        }
    }
    map.into_iter()
        .map(|(bits, cnt)| (f64::from_bits(bits), cnt))
        .collect()
}

/// One occupied cell of the grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GridCell {
    pub level: u32,
    pub bucket: u32,
    pub count: u64,
}

/// Sparse counts over `(bid level, pCPM bucket)` cells.
///
/// Cells are stored sorted by `(level, bucket)` so every sweep over the
/// grid is deterministic regardless of input order; per-level totals
/// are kept alongside for the reward denominator.
#[derive(Debug, Clone)]
pub struct BucketGrid {
    cells: Vec<GridCell>,
    /// Per-level sample counts, indexed by level (0 = negatives).
    level_counts: Vec<u64>,
    level_table: LevelBidTable,
    norm: NormParams,
    n_samples: u64,
}

impl BucketGrid {
    pub fn cells(&self) -> &[GridCell] {
        &self.cells
    }

    pub fn level_counts(&self) -> &[u64] {
        &self.level_counts
    }

    pub fn level_table(&self) -> &LevelBidTable {
        &self.level_table
    }

    pub fn norm(&self) -> &NormParams {
        &self.norm
    }

    pub fn n_samples(&self) -> u64 {
        self.n_samples
    }

    /// Occupied cells of one level, in ascending bucket order.
    pub fn level_cells(&self, level: u32) -> &[GridCell] {
        let start = self.cells.partition_point(|c| c.level < level);
        let end = self.cells.partition_point(|c| c.level <= level);
        &self.cells[start..end]
    }
}

/// Accumulates samples into a sparse grid. Builders may be sharded
/// across workers and merged; merging is cell-wise addition, so it is
/// associative and commutative.
#[derive(Debug, Clone)]
pub struct GridBuilder {
    table: LevelBidTable,
    norm: NormParams,
    cells: HashMap<(u32, u32), u64>,
    level_counts: Vec<u64>,
    n_samples: u64,
}

impl GridBuilder {
    pub fn new(table: &LevelBidTable, norm: NormParams) -> Self {
        let n_levels = table.n_levels();
        GridBuilder {
            table: table.clone(),
            norm,
            cells: HashMap::new(),
            level_counts: vec![0; n_levels],
            n_samples: 0,
        }
    }

    pub fn add(&mut self, sample: &Sample) -> Result<()> {
        let level = self.table.level_of(sample)? as u32;
        let bucket = self.norm.bucket_of(sample.pcpm());
        *self.cells.entry((level, bucket)).or_insert(0) += 1;
        self.level_counts[level as usize] += 1;
        self.n_samples += 1;
        Ok(())
    }

    pub fn merge(&mut self, other: GridBuilder) {
        for (key, cnt) in other.cells {
            *self.cells.entry(key).or_insert(0) += cnt;
        }
        for (ls, other_ls) in self.level_counts.iter_mut().zip(other.level_counts) {
            *ls += other_ls;
        }
        self.n_samples += other.n_samples;
    }

    pub fn finish(self) -> Result<BucketGrid> {
        if self.n_samples == 0 {
            return Err(Error::NoSamples);
        }
        let mut cells: Vec<GridCell> = self
            .cells
            .into_iter()
            .map(|((level, bucket), count)| GridCell {
                level,
                bucket,
                count,
            })
            .collect();
        cells.sort_unstable_by_key(|c| (c.level, c.bucket));
        Ok(BucketGrid {
            cells,
            level_counts: self.level_counts,
            level_table: self.table,
            norm: self.norm,
            n_samples: self.n_samples,
        })
    }
}

/// Buckets every sample into a finished grid. Each sample increments
/// exactly one cell; `norm` must cover all sample pCPMs (out-of-range
/// values clamp into the edge buckets).
pub fn build_grid<I>(samples: I, table: &LevelBidTable, norm: NormParams) -> Result<BucketGrid>
where
    I: IntoIterator,
    I::Item: Borrow<Sample>,
{
    let mut builder = GridBuilder::new(table, norm);
    for s in samples {
        builder.add(s.borrow())?;
    }
    builder.finish()
}
