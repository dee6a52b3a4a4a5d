//! Feature construction, temporal split and train-only min-max scaling.

use alloc::vec::Vec;
use core::ops::Range;

use serde::{Deserialize, Serialize};

use crate::sensors::{SensorRecord, N_SENSORS};

/// Sixteen sensors plus the normalized time `t / T_max`.
pub const N_FEATURES: usize = N_SENSORS + 1;
pub const TIME_FEATURE: usize = N_SENSORS;
pub const DEFAULT_FRACTIONS: [f64; 3] = [0.70, 0.15, 0.15];

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DatasetError {
    #[error("split fractions must be non-negative and sum to 1, got {0:?}")]
    Fractions([f64; 3]),
    #[error("split of {n} records leaves the {which} split empty")]
    EmptySplit { n: usize, which: &'static str },
    #[error("record times must be strictly increasing (row {0})")]
    TimeOrder(usize),
    #[error("dataset is empty")]
    Empty,
    #[error("train fraction must lie in (0, 1], got {0}")]
    TrainFraction(f64),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitBounds {
    pub train: Range<usize>,
    pub val: Range<usize>,
    pub test: Range<usize>,
}

/// Contiguous temporal split: `floor(f0 N)`, `floor(f1 N)`, remainder.
pub fn split(n: usize, fractions: [f64; 3]) -> Result<SplitBounds, DatasetError> {
    let sum: f64 = fractions.iter().sum();
    if fractions.iter().any(|f| !(*f >= 0.0)) || libm::fabs(sum - 1.0) > 1e-9 {
        return Err(DatasetError::Fractions(fractions));
    }
    let n_train = libm::floor(fractions[0] * n as f64 + 1e-9) as usize;
    let n_val = libm::floor(fractions[1] * n as f64 + 1e-9) as usize;
    let n_train = n_train.min(n);
    let n_val = n_val.min(n - n_train);
    let b = SplitBounds {
        train: 0..n_train,
        val: n_train..n_train + n_val,
        test: n_train + n_val..n,
    };
    for (which, r) in [("train", &b.train), ("validation", &b.val), ("test", &b.test)] {
        if r.is_empty() {
            return Err(DatasetError::EmptySplit { n, which });
        }
    }
    Ok(b)
}

/// Ordered records with the time horizon used for the time feature.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub records: Vec<SensorRecord>,
    pub t_max: f64,
}

impl Dataset {
    pub fn new(records: Vec<SensorRecord>) -> Result<Self, DatasetError> {
        if records.is_empty() {
            return Err(DatasetError::Empty);
        }
        for (i, w) in records.windows(2).enumerate() {
            if !(w[1].time_s > w[0].time_s) {
                return Err(DatasetError::TimeOrder(i + 1));
            }
        }
        let t_max = records[records.len() - 1].time_s;
        let t_max = if t_max > 0.0 { t_max } else { 1.0 };
        Ok(Self { records, t_max })
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Raw (unscaled) feature vector of record `i`.
    pub fn features(&self, i: usize) -> [f64; N_FEATURES] {
        raw_features(&self.records[i], self.t_max)
    }

    pub fn targets(&self, i: usize) -> [f64; 2] {
        let r = &self.records[i];
        [r.x_hx, r.x_tx]
    }
}

pub fn raw_features(r: &SensorRecord, t_max: f64) -> [f64; N_FEATURES] {
    let mut f = [0.0; N_FEATURES];
    f[..N_SENSORS].copy_from_slice(&r.sensors);
    f[TIME_FEATURE] = r.time_s / t_max;
    f
}

/// Per-feature min and max over the training rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormStats {
    pub min: [f64; N_FEATURES],
    pub max: [f64; N_FEATURES],
}

impl NormStats {
    /// Fit on `rows`; panics if empty (callers guarantee a nonempty split).
    pub fn fit(rows: &[[f64; N_FEATURES]]) -> Self {
        assert!(!rows.is_empty(), "norm stats need at least one row");
        let mut min = rows[0];
        let mut max = rows[0];
        for r in &rows[1..] {
            for j in 0..N_FEATURES {
                min[j] = min[j].min(r[j]);
                max[j] = max[j].max(r[j]);
            }
        }
        Self { min, max }
    }

    pub fn is_constant(&self, j: usize) -> bool {
        !(self.max[j] > self.min[j])
    }

    pub fn span(&self, j: usize) -> f64 {
        self.max[j] - self.min[j]
    }

    /// Scale to the training range; out-of-range values pass through
    /// unclipped and constant features map to 0.
    pub fn apply(&self, raw: &[f64; N_FEATURES]) -> [f64; N_FEATURES] {
        let mut out = [0.0; N_FEATURES];
        for j in 0..N_FEATURES {
            if !self.is_constant(j) {
                out[j] = (raw[j] - self.min[j]) / self.span(j);
            }
        }
        out
    }

    pub fn invert(&self, u: &[f64; N_FEATURES]) -> [f64; N_FEATURES] {
        let mut out = [0.0; N_FEATURES];
        for j in 0..N_FEATURES {
            out[j] = self.min[j] + u[j] * self.span(j);
        }
        out
    }

    /// FNV-1a over the bit patterns; identifies a stats object exactly.
    pub fn checksum(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for v in self.min.iter().chain(self.max.iter()) {
            for b in v.to_bits().to_le_bytes() {
                h ^= b as u64;
                h = h.wrapping_mul(0x0000_0100_0000_01b3);
            }
        }
        h
    }
}

/// A dataset prepared for training: split, (optionally truncated) training
/// range and train-fitted scaling.
#[derive(Debug, Clone, PartialEq)]
pub struct Prepared {
    pub data: Dataset,
    pub bounds: SplitBounds,
    pub stats: NormStats,
    /// Noise-free records aligned with `data`, when available.
    pub clean: Option<Vec<SensorRecord>>,
}

impl Prepared {
    /// Split, keep the first `train_fraction` of the training block and fit
    /// the scaling on what remains. Validation and test blocks are untouched.
    pub fn new(
        data: Dataset,
        clean: Option<Vec<SensorRecord>>,
        fractions: [f64; 3],
        train_fraction: f64,
    ) -> Result<Self, DatasetError> {
        if !(train_fraction > 0.0 && train_fraction <= 1.0) {
            return Err(DatasetError::TrainFraction(train_fraction));
        }
        let mut bounds = split(data.len(), fractions)?;
        let n_train = libm::floor(train_fraction * bounds.train.len() as f64 + 1e-9) as usize;
        if n_train == 0 {
            return Err(DatasetError::EmptySplit {
                n: data.len(),
                which: "train",
            });
        }
        bounds.train = 0..n_train;
        let rows: Vec<_> = bounds.train.clone().map(|i| data.features(i)).collect();
        let stats = NormStats::fit(&rows);
        Ok(Self {
            data,
            bounds,
            stats,
            clean,
        })
    }

    pub fn scaled(&self, i: usize) -> [f64; N_FEATURES] {
        self.stats.apply(&self.data.features(i))
    }

    /// Evaluation targets: clean values when present, else the noisy ones.
    pub fn eval_targets(&self, i: usize) -> [f64; 2] {
        match &self.clean {
            Some(c) => [c[i].x_hx, c[i].x_tx],
            None => self.data.targets(i),
        }
    }
}
