use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// A `T x p` real-valued multivariate series, stored row-major (time-major).
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    values: Vec<f64>,
    len: usize,
    channels: usize,
    sampling_rate: Option<f64>,
    names: Option<Vec<String>>,
}

impl TimeSeries {
    /// Builds a series from time-major data: `values[t * channels + c]`.
    pub fn new(values: Vec<f64>, channels: usize) -> Result<Self> {
        if channels == 0 {
            return Err(Error::Data("series needs at least one channel".into()));
        }
        if !values.len().is_multiple_of(channels) {
            return Err(Error::Data(alloc::format!(
                "{} values do not split evenly into {} channels",
                values.len(),
                channels
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Data(alloc::format!(
                "non-finite value at row {}, column {}",
                i / channels,
                i % channels
            )));
        }
        let len = values.len() / channels;
        Ok(Self { values, len, channels, sampling_rate: None, names: None })
    }

    /// Builds a series from one vector per channel, all of equal length.
    pub fn from_columns(columns: &[Vec<f64>]) -> Result<Self> {
        let channels = columns.len();
        if channels == 0 {
            return Err(Error::Data("series needs at least one channel".into()));
        }
        let len = columns[0].len();
        if let Some(c) = columns.iter().position(|col| col.len() != len) {
            return Err(Error::Data(alloc::format!(
                "column {c} has {} rows, expected {len}",
                columns[c].len()
            )));
        }
        let mut values = Vec::with_capacity(len * channels);
        for t in 0..len {
            values.extend(columns.iter().map(|col| col[t]));
        }
        Self::new(values, channels)
    }

    pub fn with_sampling_rate(mut self, rate: f64) -> Result<Self> {
        if !(rate.is_finite() && rate > 0.0) {
            return Err(Error::Domain(alloc::format!("sampling rate must be positive, got {rate}")));
        }
        self.sampling_rate = Some(rate);
        Ok(self)
    }

    pub fn with_names(mut self, names: Vec<String>) -> Result<Self> {
        if names.len() != self.channels {
            return Err(Error::Data(alloc::format!(
                "{} channel names for {} channels",
                names.len(),
                self.channels
            )));
        }
        self.names = Some(names);
        Ok(self)
    }

    /// Number of time points `T`.
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Number of channels `p`.
    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn sampling_rate(&self) -> Option<f64> {
        self.sampling_rate
    }

    pub fn names(&self) -> Option<&[String]> {
        self.names.as_deref()
    }

    /// Observation at zero-based time `t`.
    pub fn row(&self, t: usize) -> &[f64] {
        &self.values[t * self.channels..(t + 1) * self.channels]
    }

    pub fn get(&self, t: usize, channel: usize) -> f64 {
        self.values[t * self.channels + channel]
    }

    pub fn column(&self, channel: usize) -> Vec<f64> {
        (0..self.len).map(|t| self.get(t, channel)).collect()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    /// Multiplies every observation by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= factor);
        out
    }

    /// Reorders channels so that output channel `i` is input channel `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        let mut seen = alloc::vec![false; self.channels];
        if perm.len() != self.channels || perm.iter().any(|&c| c >= self.channels || core::mem::replace(&mut seen[c], true)) {
            return Err(Error::Domain("channel permutation is not a bijection".into()));
        }
        let mut values = Vec::with_capacity(self.values.len());
        for t in 0..self.len {
            let row = self.row(t);
            values.extend(perm.iter().map(|&c| row[c]));
        }
        Ok(Self {
            values,
            len: self.len,
            channels: self.channels,
            sampling_rate: self.sampling_rate,
            names: self.names.as_ref().map(|n| perm.iter().map(|&c| n[c].clone()).collect()),
        })
    }
}
