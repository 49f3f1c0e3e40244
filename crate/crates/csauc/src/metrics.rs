//! Scalar and rank metrics: rank-based AUC, COPC and ROPR.

use std::borrow::Borrow;

use crate::error::{Error, Result};
use crate::model::Sample;

/// Rank-based AUC via the Mann-Whitney U statistic with mid-ranks on
/// ties; equals the pairwise definition exactly and runs in
/// O(n log n).
pub fn auc_rank<S: Borrow<Sample>>(samples: &[S]) -> Result<f64> {
    let mut scored: Vec<(f64, bool)> = samples
        .iter()
        .map(|s| {
            let s = s.borrow();
            (s.pctr, s.label)
        })
        .collect();
    auc_rank_scored(&mut scored)
}

/// Rank-based AUC over bare `(score, label)` pairs; sorts in place.
pub fn auc_rank_scored(scored: &mut [(f64, bool)]) -> Result<f64> {
    let n_pos = scored.iter().filter(|(_, label)| *label).count() as u64;
    let n_neg = scored.len() as u64 - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::NoPosNegPairs);
    }
    scored.sort_unstable_by(|a, b| a.0.total_cmp(&b.0));

    // Mid-rank over exact-score tie groups; ranks are 1-based.
    let mut rank_sum_pos = 0.0f64;
    let mut i = 0usize;
    while i < scored.len() {
        let mut j = i + 1;
        while j < scored.len() && scored[j].0 == scored[i].0 {
            j += 1;
        }
        let mid_rank = (i + j + 1) as f64 / 2.0;
        let pos_in_group = scored[i..j].iter().filter(|(_, label)| *label).count();
        rank_sum_pos += mid_rank * pos_in_group as f64;
        i = j;
    }

    let n_pos = n_pos as f64;
    let n_neg = n_neg as f64;
    Ok((rank_sum_pos - n_pos * (n_pos + 1.0) / 2.0) / (n_pos * n_neg))
}

/// Streaming accumulator behind the scalar metrics; feed samples in any
/// order, read the ratios at the end.
#[derive(Debug, Clone, Copy, Default)]
pub struct RunningSums {
    pub n_samples: u64,
    pub n_positive: u64,
    pub sum_label: f64,
    pub sum_pctr: f64,
    pub sum_label_bid: f64,
    pub sum_pctr_bid: f64,
}

impl RunningSums {
    pub fn add(&mut self, sample: &Sample) {
        self.n_samples += 1;
        self.sum_pctr += sample.pctr;
        self.sum_pctr_bid += sample.pcpm();
        if sample.label {
            self.n_positive += 1;
            self.sum_label += 1.0;
            self.sum_label_bid += sample.bid;
        }
    }

    /// Click-over-predicted-click: `sum(label) / sum(pctr)`.
    pub fn copc(&self) -> Result<f64> {
        if self.sum_pctr <= 0.0 {
            return Err(Error::ZeroPredictedClicks);
        }
        Ok(self.sum_label / self.sum_pctr)
    }

    /// Revenue-over-predicted-revenue:
    /// `sum(label * bid) / sum(pctr * bid)`.
    pub fn ropr(&self) -> Result<f64> {
        if self.sum_pctr_bid <= 0.0 {
            return Err(Error::ZeroPredictedRevenue);
        }
        Ok(self.sum_label_bid / self.sum_pctr_bid)
    }
}

pub fn copc<S: Borrow<Sample>>(samples: &[S]) -> Result<f64> {
    sums_of(samples).copc()
}

pub fn ropr<S: Borrow<Sample>>(samples: &[S]) -> Result<f64> {
    sums_of(samples).ropr()
}

fn sums_of<S: Borrow<Sample>>(samples: &[S]) -> RunningSums {
    let mut sums = RunningSums::default();
    for s in samples {
        sums.add(s.borrow());
    }
    sums
}
