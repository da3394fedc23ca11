//! Run configurations as stored in result documents.

use std::path::{Path, PathBuf};

use freqband::bootstrap::{BootstrapConfig, KernelConfig};
use freqband::search::{DetectConfig, ScaleSet};
use freqband::tvspec::{default_window, WindowConfig};
use freqband::TimeSeries;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

/// Settings shared by `detect` and `components`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub input: PathBuf,
    pub sampling_rate: Option<f64>,
    pub alpha: f64,
    pub resamples: usize,
    pub seed: u64,
    pub stride: usize,
    pub w_min_divisor: usize,
    pub w_max_divisor: usize,
    pub scales: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            input: PathBuf::new(),
            sampling_rate: None,
            alpha: 0.05,
            resamples: 100,
            seed: 0,
            stride: 1,
            w_min_divisor: 8,
            w_max_divisor: 4,
            scales: 5,
        }
    }
}

pub(crate) fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(CliError::Usage(format!("--alpha must lie in (0, 1), got {alpha}")));
    }
    Ok(())
}

pub(crate) fn check_positive(name: &str, value: usize) -> Result<()> {
    if value == 0 {
        return Err(CliError::Usage(format!("{name} must be positive")));
    }
    Ok(())
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        check_alpha(self.alpha)?;
        check_positive("--resamples", self.resamples)?;
        check_positive("--stride", self.stride)?;
        check_positive("--scales", self.scales)?;
        if self.w_max_divisor < 4 || self.w_min_divisor <= self.w_max_divisor {
            return Err(CliError::Usage(format!(
                "need --wmin-div > --wmax-div >= 4, got {} and {}",
                self.w_min_divisor, self.w_max_divisor
            )));
        }
        if let Some(r) = self.sampling_rate {
            if !(r.is_finite() && r > 0.0) {
                return Err(CliError::Usage(format!("--sampling-rate must be positive, got {r}")));
            }
        }
        Ok(())
    }

    /// Reads the input series with the configured sampling rate attached.
    pub fn load(&self) -> Result<TimeSeries> {
        let ts = crate::table::read_csv(&self.input)?;
        Ok(match self.sampling_rate {
            Some(r) => ts.with_sampling_rate(r)?,
            None => ts,
        })
    }

    /// Library settings for a series of length `len`.
    pub fn resolve(&self, len: usize) -> Result<Resolved> {
        self.validate()?;
        let n = default_window(len);
        if n < 2 || len < 2 * n {
            return Err(CliError::Domain(format!(
                "series of length {len} is too short: window {n} needs at least {} rows",
                (2 * n).max(4)
            )));
        }
        let window = WindowConfig::for_length(len)?.with_stride(self.stride)?;
        let detect = DetectConfig {
            window,
            kernel: KernelConfig::for_length(len)?,
            bootstrap: BootstrapConfig { resamples: self.resamples, alpha: self.alpha, base_seed: self.seed },
            keep_curves: true,
        };
        let scales = ScaleSet::from_divisors(window.window(), self.w_min_divisor, self.w_max_divisor, self.scales)?;
        Ok(Resolved { detect, scales })
    }
}

/// Library configuration derived from a [`RunConfig`] and the data length.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub detect: DetectConfig,
    pub scales: ScaleSet,
}

/// Everything needed to reproduce a result, as written into documents.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EffectiveConfig {
    #[serde(flatten)]
    pub run: RunConfig,
    pub length: usize,
    pub channels: usize,
    pub window: usize,
    pub bandwidth: f64,
    pub half_widths: Vec<usize>,
    pub kernel_renormalized: bool,
}

impl EffectiveConfig {
    pub fn new(run: &RunConfig, ts: &TimeSeries, resolved: &Resolved) -> Self {
        Self {
            run: run.clone(),
            length: ts.len(),
            channels: ts.channels(),
            window: resolved.detect.window.window(),
            bandwidth: resolved.detect.kernel.bandwidth(),
            half_widths: resolved.scales.widths().to_vec(),
            kernel_renormalized: resolved.detect.kernel.renormalize(),
        }
    }
}

/// Settings of `components`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentsConfig {
    #[serde(flatten)]
    pub run: RunConfig,
    pub omega: Vec<f64>,
    /// Defaults to the smallest scale.
    pub half_width: Option<usize>,
}

/// Settings of `simulate`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulateConfig {
    pub scheme: String,
    /// Band description for the `custom` scheme.
    pub bands: Option<PathBuf>,
    pub len: usize,
    pub channels: usize,
    pub seed: u64,
}

/// Settings of `bench`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchConfig {
    pub table: u8,
    pub reps: usize,
    pub seed: u64,
    pub resamples: usize,
    pub alpha: f64,
    pub scales: usize,
    pub w_max_divisor: usize,
    /// Optional cell filters.
    pub scheme: Option<String>,
    pub channels: Option<usize>,
    pub len: Option<usize>,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            table: 1,
            reps: 20,
            seed: 0,
            resamples: 100,
            alpha: 0.05,
            scales: 5,
            w_max_divisor: 4,
            scheme: None,
            channels: None,
            len: None,
        }
    }
}

/// Reads the `config` object of an earlier result document.
pub fn read_embedded<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let doc: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    let config = doc
        .get("config")
        .cloned()
        .ok_or_else(|| CliError::Data(format!("{} has no config object", path.display())))?;
    serde_json::from_value(config).map_err(|e| CliError::Data(format!("{}: config: {e}", path.display())))
}
