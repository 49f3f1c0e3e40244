//! Deterministic synthetic datasets for tests and benchmarks.
//!
//! The generative model is campaign-based: each campaign carries a bid
//! and a true click rate, every impression picks a campaign uniformly,
//! the label is a Bernoulli draw of the true rate, and the predictor is
//! a noisy monotone transform of the true rate. At zero noise the
//! predictor preserves the true-rate order exactly.

use std::io::{self, Write};

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal, StandardNormal};

use crate::error::{Error, Result};
use crate::model::{validate_record, Sample};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BidDist {
    /// Integer bids drawn uniformly from `1..=max`.
    UniformInt { max: u32 },
    /// `exp(N(mu, sigma))` rounded to cents, at least 0.01.
    LogNormal { mu: f64, sigma: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenConfig {
    pub seed: u64,
    pub n: u64,
    /// Number of campaigns; also bounds the number of distinct bids.
    pub campaigns: u32,
    pub bid_dist: BidDist,
    /// Standard deviation of the logit-space predictor noise.
    pub noise: f64,
    /// Number of group keys to spread rows over; 0 omits the column.
    pub groups: u32,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig {
            seed: 0,
            n: 1000,
            campaigns: 16,
            bid_dist: BidDist::UniformInt { max: 100 },
            noise: 0.0,
            groups: 0,
        }
    }
}

impl GenConfig {
    fn validate(&self) -> Result<()> {
        if self.campaigns == 0 {
            return Err(Error::InvalidConfig(
                "campaign count must be at least 1".to_string(),
            ));
        }
        if !(self.noise.is_finite() && self.noise >= 0.0) {
            return Err(Error::InvalidConfig(format!(
                "noise must be a nonnegative number, got {}",
                self.noise
            )));
        }
        match self.bid_dist {
            BidDist::UniformInt { max } if max == 0 => Err(Error::InvalidConfig(
                "bid range must contain at least one value".to_string(),
            )),
            BidDist::LogNormal { sigma, .. } if !(sigma.is_finite() && sigma > 0.0) => Err(
                Error::InvalidConfig(format!("lognormal sigma must be positive, got {sigma}")),
            ),
            _ => Ok(()),
        }
    }
}

/// One generated row before CSV formatting.
#[derive(Debug, Clone, PartialEq)]
pub struct GenRow {
    pub label: bool,
    pub bid: f64,
    /// Already quantized to the 6 decimals the CSV carries.
    pub pctr: f64,
    pub group: Option<u32>,
}

/// Deterministic row stream; the same config yields the same rows.
pub struct RowGen {
    rng: ChaCha8Rng,
    bids: Vec<f64>,
    rates: Vec<f64>,
    noise: f64,
    groups: u32,
    remaining: u64,
}

pub fn rows(config: &GenConfig) -> Result<RowGen> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let bids: Vec<f64> = match config.bid_dist {
        BidDist::UniformInt { max } => (0..config.campaigns)
            .map(|_| rng.random_range(1..=max) as f64)
            .collect(),
        BidDist::LogNormal { mu, sigma } => {
            let dist = LogNormal::new(mu, sigma)
                .map_err(|e| Error::InvalidConfig(format!("lognormal bids: {e}")))?;
            (0..config.campaigns)
                .map(|_| ((dist.sample(&mut rng) * 100.0).round() / 100.0).max(0.01))
                .collect()
        }
    };
    let rates: Vec<f64> = (0..config.campaigns)
        .map(|_| rng.random_range(0.001..0.25))
        .collect();
    Ok(RowGen {
        rng,
        bids,
        rates,
        noise: config.noise,
        groups: config.groups,
        remaining: config.n,
    })
}

impl Iterator for RowGen {
    type Item = GenRow;

    fn next(&mut self) -> Option<GenRow> {
        if self.remaining == 0 {
            return None;
        }
        self.remaining -= 1;
        let campaign = self.rng.random_range(0..self.bids.len());
        let rate = self.rates[campaign];
        let label = self.rng.random::<f64>() < rate;
        let pctr = if self.noise == 0.0 {
            rate
        } else {
            let z: f64 = StandardNormal.sample(&mut self.rng);
            let logit = (rate / (1.0 - rate)).ln() + self.noise * z;
            1.0 / (1.0 + (-logit).exp())
        };
        // Quantize to what the CSV will carry, keeping scores strictly
        // inside (0, 1) so generated files never have zero revenue.
        let pctr = ((pctr * 1e6).round() / 1e6).clamp(1e-6, 0.999_999);
        let group = if self.groups > 0 {
            Some(self.rng.random_range(0..self.groups))
        } else {
            None
        };
        Some(GenRow {
            label,
            bid: self.bids[campaign],
            pctr,
            group,
        })
    }
}

/// Writes the dataset as CSV; identical configs produce byte-identical
/// output. Returns the number of rows written.
pub fn write_csv<W: Write>(config: &GenConfig, writer: W) -> Result<u64> {
    let mut out = io::BufWriter::new(writer);
    if config.groups > 0 {
        writeln!(out, "label,bid,pctr,group")?;
    } else {
        writeln!(out, "label,bid,pctr")?;
    }
    let mut written = 0u64;
    for row in rows(config)? {
        let label = row.label as u8;
        match row.group {
            Some(g) => writeln!(out, "{label},{},{:.6},g{g}", row.bid, row.pctr)?,
            None => writeln!(out, "{label},{},{:.6}", row.bid, row.pctr)?,
        }
        written += 1;
    }
    out.flush()?;
    Ok(written)
}

/// Materializes the dataset as validated samples, bypassing CSV; the
/// values equal what a round trip through [`write_csv`] would parse.
pub fn generate_samples(config: &GenConfig) -> Result<Vec<Sample>> {
    rows(config)?
        .map(|row| {
            validate_record(
                row.label as i64,
                row.bid,
                row.pctr,
                row.group.map(|g| format!("g{g}")),
            )
        })
        .collect()
}
