//! Banded test signals, ground truth and detection scoring.
//!
//! A [`BandSpec`] describes a univariate time-varying spectrum that is
//! piecewise in frequency, with one amplitude function of rescaled time per
//! band. [`synth_banded`] realises it by harmonic synthesis:
//!
//! ```text
//! z_t = sum_{k=1}^{M/2-1} s_k(t) (A_k cos(2 pi k t / M) + B_k sin(2 pi k t / M))
//! s_k(t)^2 = 4 pi f(t/M, k/M) / M
//! ```
//!
//! with `A_k, B_k` standard Gaussian. Under this scaling a unit spectrum has
//! variance `2 pi`, the same convention as the local periodogram.
//!
//! The named [`Scheme`]s build `p` channels as lagged copies of one or two
//! latent series.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::bootstrap::BootstrapConfig;
use crate::error::{domain, Result};
use crate::search::{detect_multiscale, DetectConfig, PartitionResult, ScaleSet};
use crate::TimeSeries;

/// Spectral level of one band as a function of rescaled time `u`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Amplitude {
    Constant(f64),
    /// `intercept + slope * u`
    Linear { intercept: f64, slope: f64 },
    /// `level + amplitude * sin(rate * pi * u + phase)`
    Sine { level: f64, amplitude: f64, rate: f64, phase: f64 },
    /// `level + amplitude * cos(rate * pi * u + phase)`
    Cosine { level: f64, amplitude: f64, rate: f64, phase: f64 },
}

impl Amplitude {
    pub fn value(&self, u: f64) -> f64 {
        match *self {
            Amplitude::Constant(c) => c,
            Amplitude::Linear { intercept, slope } => intercept + slope * u,
            Amplitude::Sine { level, amplitude, rate, phase } => level + amplitude * libm::sin(rate * PI * u + phase),
            Amplitude::Cosine { level, amplitude, rate, phase } => level + amplitude * libm::cos(rate * PI * u + phase),
        }
    }
}

/// A band ending at `upper`; the upper edge belongs to this band when
/// `upper_inclusive`, otherwise to the next one.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Band {
    pub upper: f64,
    pub upper_inclusive: bool,
    pub amplitude: Amplitude,
}

/// Piecewise-in-frequency time-varying spectrum on `(0, 1/2)`.
#[derive(Debug, Clone, PartialEq)]
pub struct BandSpec {
    bands: Vec<Band>,
}

impl BandSpec {
    /// Bands must have strictly increasing upper edges ending at `1/2`, and
    /// amplitudes must be nonnegative on `[0, 1]` (checked on a fine grid).
    pub fn new(bands: Vec<Band>) -> Result<Self> {
        if bands.is_empty() {
            return Err(domain!("a band specification needs at least one band"));
        }
        let mut prev = 0.0;
        for b in &bands {
            if !(b.upper > prev && b.upper <= 0.5) {
                return Err(domain!("band edges must increase within (0, 1/2], got {}", b.upper));
            }
            prev = b.upper;
            if (0..=1000).any(|i| b.amplitude.value(i as f64 / 1000.0).partial_cmp(&0.0).is_none_or(|o| o.is_lt())) {
                return Err(domain!("band ending at {} has a negative amplitude", b.upper));
            }
        }
        if prev != 0.5 {
            return Err(domain!("last band must end at 1/2, got {prev}"));
        }
        Ok(Self { bands })
    }

    pub fn bands(&self) -> &[Band] {
        &self.bands
    }

    /// Interior band edges, i.e. the partition points.
    pub fn edges(&self) -> Vec<f64> {
        self.bands[..self.bands.len() - 1].iter().map(|b| b.upper).collect()
    }

    pub fn band_index(&self, frequency: f64) -> usize {
        self.bands
            .iter()
            .position(|b| frequency < b.upper || (frequency == b.upper && b.upper_inclusive))
            .unwrap_or(self.bands.len() - 1)
    }

    pub fn band_of(&self, frequency: f64) -> &Band {
        &self.bands[self.band_index(frequency)]
    }

    pub fn level(&self, u: f64, frequency: f64) -> f64 {
        self.band_of(frequency).amplitude.value(u)
    }

    /// Unit spectrum everywhere.
    pub fn white() -> Self {
        Self::new(vec![band(0.5, false, Amplitude::Constant(1.0))]).expect("valid")
    }

    /// Linear trends below 0.15 and above 0.35, flat in between.
    pub fn linear_three_band() -> Self {
        Self::new(vec![
            band(0.15, false, Amplitude::Linear { intercept: 10.0, slope: -9.0 }),
            band(0.35, false, Amplitude::Constant(1.0)),
            band(0.5, false, Amplitude::Linear { intercept: 1.0, slope: 9.0 }),
        ])
        .expect("valid")
    }

    /// Three bands with distinct sinusoidal trends.
    pub fn sinusoidal_three_band() -> Self {
        Self::new(vec![
            band(0.15, true, sine(10.0, 4.0, -PI / 2.0)),
            band(0.35, true, Amplitude::Cosine { level: 5.0, amplitude: 5.0, rate: 4.0, phase: 0.0 }),
            band(0.5, false, sine(8.5, 3.0, -PI / 16.0)),
        ])
        .expect("valid")
    }

    /// Linear trend below 0.15, flat above.
    pub fn linear_low_band() -> Self {
        Self::new(vec![
            band(0.15, false, Amplitude::Linear { intercept: 10.0, slope: -9.0 }),
            band(0.5, false, Amplitude::Constant(1.0)),
        ])
        .expect("valid")
    }

    /// Cosine trend up to 0.35, sine trend above.
    pub fn sinusoidal_high_band() -> Self {
        Self::new(vec![
            band(0.35, true, Amplitude::Cosine { level: 5.0, amplitude: 5.0, rate: 4.0, phase: 0.0 }),
            band(0.5, false, sine(8.5, 3.0, -PI / 16.0)),
        ])
        .expect("valid")
    }
}

fn band(upper: f64, upper_inclusive: bool, amplitude: Amplitude) -> Band {
    Band { upper, upper_inclusive, amplitude }
}

fn sine(level: f64, rate: f64, phase: f64) -> Amplitude {
    Amplitude::Sine { level, amplitude: level, rate, phase }
}

/// Spectral level of `bands` at rescaled time `u` and frequency `frequency`.
pub fn true_spectrum(bands: &BandSpec, u: f64, frequency: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&u) {
        return Err(domain!("rescaled time {u} outside [0, 1]"));
    }
    if !(frequency > 0.0 && frequency < 0.5) {
        return Err(domain!("frequency {frequency} outside (0, 1/2)"));
    }
    Ok(bands.level(u, frequency))
}

/// Harmonic synthesis of a univariate series of `len` samples.
pub fn synth_banded(bands: &BandSpec, len: usize, seed: u64) -> Result<Vec<f64>> {
    if len < 2 {
        return Err(domain!("synthesis needs at least 2 samples"));
    }
    let m = len as f64;
    let harmonics = len / 2 - 1;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let coeffs: Vec<(f64, f64)> = (0..harmonics)
        .map(|_| {
            let a: f64 = StandardNormal.sample(&mut rng);
            let b: f64 = StandardNormal.sample(&mut rng);
            (a, b)
        })
        .collect();
    let cos_table: Vec<f64> = (0..len).map(|j| libm::cos(2.0 * PI * j as f64 / m)).collect();
    let sin_table: Vec<f64> = (0..len).map(|j| libm::sin(2.0 * PI * j as f64 / m)).collect();
    // Amplitudes change only at band edges, so evaluate each band once per t.
    let band_index: Vec<usize> = (1..=harmonics)
        .map(|k| bands.band_index(k as f64 / m))
        .collect();
    let scale = 4.0 * PI / m;
    let mut levels = vec![0.0; bands.bands.len()];
    let mut out = Vec::with_capacity(len);
    for t in 1..=len {
        let u = t as f64 / m;
        for (l, b) in levels.iter_mut().zip(&bands.bands) {
            *l = libm::sqrt(scale * b.amplitude.value(u).max(0.0));
        }
        let mut z = 0.0;
        for (i, &(a, b)) in coeffs.iter().enumerate() {
            let k = i + 1;
            let j = (k * t) % len;
            z += levels[band_index[i]] * (a * cos_table[j] + b * sin_table[j]);
        }
        out.push(z);
    }
    Ok(out)
}

/// Named simulation designs.
#[derive(Debug, Clone, PartialEq)]
pub enum Scheme {
    /// White noise, no partition points.
    WhiteNoise,
    /// Linear trends, partition points 0.15 and 0.35.
    Linear,
    /// Sinusoidal trends, partition points 0.15 and 0.35.
    Sinusoidal,
    /// Half the channels from the linear latent, half from the sinusoidal one.
    Mixture,
    /// 20% of channels carry the 0.15 edge, the rest the 0.35 edge.
    Proportions,
    /// Lagged copies of a user-supplied banded latent.
    Custom(BandSpec),
}

impl Scheme {
    pub const NAMES: [&'static str; 5] = ["WN1B", "L3B", "S3B", "M3B-1", "M3B-2"];

    pub fn from_name(name: &str) -> Result<Self> {
        Ok(match name.to_ascii_uppercase().as_str() {
            "WN1B" => Scheme::WhiteNoise,
            "L3B" => Scheme::Linear,
            "S3B" => Scheme::Sinusoidal,
            "M3B-1" | "M3B1" => Scheme::Mixture,
            "M3B-2" | "M3B2" => Scheme::Proportions,
            _ => return Err(domain!("unknown scheme {name:?}; expected one of {}", Self::NAMES.join(", "))),
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            Scheme::WhiteNoise => "WN1B",
            Scheme::Linear => "L3B",
            Scheme::Sinusoidal => "S3B",
            Scheme::Mixture => "M3B-1",
            Scheme::Proportions => "M3B-2",
            Scheme::Custom(_) => "custom",
        }
    }

    /// True partition points.
    pub fn truth(&self) -> Vec<f64> {
        match self {
            Scheme::WhiteNoise => Vec::new(),
            Scheme::Custom(b) => b.edges(),
            _ => vec![0.15, 0.35],
        }
    }
}

/// A scheme at a given size.
#[derive(Debug, Clone, PartialEq)]
pub struct SchemeSpec {
    pub scheme: Scheme,
    pub channels: usize,
    pub len: usize,
}

/// Which latent feeds a channel and at what lag.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ChannelSource {
    pub latent: usize,
    pub shift: usize,
}

impl SchemeSpec {
    pub fn new(scheme: Scheme, channels: usize, len: usize) -> Result<Self> {
        if channels == 0 || len < 2 {
            return Err(domain!("scheme needs p >= 1 and T >= 2"));
        }
        Ok(Self { scheme, channels, len })
    }

    pub fn name(&self) -> &'static str {
        self.scheme.name()
    }

    pub fn truth(&self) -> Vec<f64> {
        self.scheme.truth()
    }

    /// Latent spectra of the scheme, in latent order.
    pub fn latents(&self) -> Vec<BandSpec> {
        match &self.scheme {
            Scheme::WhiteNoise => vec![BandSpec::white()],
            Scheme::Linear => vec![BandSpec::linear_three_band()],
            Scheme::Sinusoidal => vec![BandSpec::sinusoidal_three_band()],
            Scheme::Mixture => vec![BandSpec::linear_three_band(), BandSpec::sinusoidal_three_band()],
            Scheme::Proportions => vec![BandSpec::linear_low_band(), BandSpec::sinusoidal_high_band()],
            Scheme::Custom(b) => vec![b.clone()],
        }
    }

    /// Number of leading channels drawn from the first latent.
    pub fn first_group(&self) -> usize {
        let p = self.channels;
        match self.scheme {
            Scheme::Mixture => p / 2,
            Scheme::Proportions => p / 5,
            _ => p,
        }
    }

    /// Source of zero-based channel `c`: `X_{c,t} = z_{latent, t + shift}`.
    pub fn source(&self, channel: usize) -> ChannelSource {
        let split = self.first_group();
        if channel < split {
            ChannelSource { latent: 0, shift: channel }
        } else {
            ChannelSource { latent: 1, shift: channel - split }
        }
    }

    /// Spectrum of zero-based channel `c`.
    pub fn channel_spectrum(&self, channel: usize) -> BandSpec {
        let latents = self.latents();
        latents[self.source(channel).latent.min(latents.len() - 1)].clone()
    }
}

/// Deterministic seed mixing (splitmix64 finaliser).
pub fn mix_seed(seed: u64, salt: u64) -> u64 {
    let mut z = seed ^ salt.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(0xD1B5_4A32_D192_ED03);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Draws one realisation of a scheme.
pub fn generate(spec: &SchemeSpec, seed: u64) -> Result<TimeSeries> {
    let latent_len = spec.len + spec.channels - 1;
    let latents = spec
        .latents()
        .iter()
        .enumerate()
        .map(|(i, b)| synth_banded(b, latent_len, mix_seed(seed, i as u64)))
        .collect::<Result<Vec<_>>>()?;
    let p = spec.channels;
    let mut values = Vec::with_capacity(spec.len * p);
    for t in 0..spec.len {
        for c in 0..p {
            let src = spec.source(c);
            values.push(latents[src.latent][t + src.shift]);
        }
    }
    TimeSeries::new(values, p)
}

/// Right count of partition points, each within `radius` of a distinct true
/// point (sorted lists matched in order).
pub fn correct_detection(estimated: &[f64], truth: &[f64], radius: f64) -> bool {
    if estimated.len() != truth.len() {
        return false;
    }
    let mut est = estimated.to_vec();
    let mut tru = truth.to_vec();
    est.sort_by(f64::total_cmp);
    tru.sort_by(f64::total_cmp);
    est.iter().zip(&tru).all(|(e, t)| libm::fabs(e - t) <= radius + 1e-12)
}

/// [`correct_detection`] applied to a detection result.
pub fn correct_result(result: &PartitionResult, truth: &[f64], radius: f64) -> bool {
    correct_detection(&result.frequencies(), truth, radius)
}

/// Summary statistic reported by a table.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TableStatistic {
    /// Mean and standard deviation of the estimated band count.
    BandCount,
    /// Share of replications with a correct detection.
    CorrectDetection,
}

/// One cell of a simulation table.
#[derive(Debug, Clone, PartialEq)]
pub struct TableCell {
    pub scheme: &'static str,
    pub channels: usize,
    pub len: usize,
    pub w_min_divisor: usize,
    pub radius: Option<f64>,
    /// Published value for comparison: mean band count or proportion.
    pub reference: f64,
    pub reference_sd: Option<f64>,
}

/// `(channels, length, [(mean, sd) per scheme])`.
type Row = (usize, usize, [(f64, f64); 5]);

/// Cells of simulation tables 1 to 4.
pub fn table_cells(table: u8) -> Result<(TableStatistic, Vec<TableCell>)> {
    let band_cell = |scheme, channels, len, w_min_divisor, reference, sd| TableCell {
        scheme,
        channels,
        len,
        w_min_divisor,
        radius: None,
        reference,
        reference_sd: Some(sd),
    };
    let prop_cell = |scheme, channels, len, radius, reference| TableCell {
        scheme,
        channels,
        len,
        w_min_divisor: 8,
        radius: Some(radius),
        reference,
        reference_sd: None,
    };
    let names = Scheme::NAMES;
    match table {
        1 => {
            #[rustfmt::skip]
            let rows: [Row; 6] = [
                (10, 200, [(1.0, 0.0), (2.24, 0.55), (2.15, 0.36), (2.09, 0.35), (2.14, 0.64)]),
                (10, 500, [(1.0, 0.0), (2.94, 0.34), (2.56, 0.50), (2.47, 0.52), (2.88, 0.57)]),
                (10, 1000, [(1.0, 0.0), (3.06, 0.24), (2.96, 0.24), (2.92, 0.31), (3.09, 0.35)]),
                (15, 200, [(1.0, 0.0), (2.34, 0.52), (2.18, 0.39), (2.07, 0.29), (2.25, 0.59)]),
                (15, 500, [(1.0, 0.0), (2.99, 0.30), (2.61, 0.55), (2.53, 0.52), (2.92, 0.51)]),
                (15, 1000, [(1.0, 0.0), (3.05, 0.22), (3.00, 0.20), (2.98, 0.20), (3.12, 0.41)]),
            ];
            let cells = rows
                .iter()
                .flat_map(|&(p, t, vals)| {
                    names.iter().zip(vals).map(move |(&s, (m, sd))| band_cell(s, p, t, 8, m, sd))
                })
                .collect();
            Ok((TableStatistic::BandCount, cells))
        }
        2 => {
            #[rustfmt::skip]
            let rows: [Row; 6] = [
                (10, 8, [(1.0, 0.0), (3.06, 0.24), (2.96, 0.24), (2.92, 0.31), (3.09, 0.35)]),
                (10, 10, [(1.0, 0.0), (3.64, 0.64), (3.43, 0.52), (3.13, 0.34), (3.77, 0.47)]),
                (10, 12, [(1.07, 0.26), (3.36, 0.58), (4.52, 0.56), (4.11, 0.71), (4.26, 0.66)]),
                (15, 8, [(1.0, 0.0), (3.05, 0.22), (3.00, 0.20), (2.98, 0.20), (3.12, 0.41)]),
                (15, 10, [(1.0, 0.0), (3.69, 0.66), (3.50, 0.54), (3.22, 0.42), (3.87, 0.42)]),
                (15, 12, [(1.06, 0.24), (3.44, 0.59), (4.68, 0.51), (4.32, 0.63), (4.41, 0.64)]),
            ];
            let cells = rows
                .iter()
                .flat_map(|&(p, d, vals)| {
                    names.iter().zip(vals).map(move |(&s, (m, sd))| band_cell(s, p, 1000, d, m, sd))
                })
                .collect();
            Ok((TableStatistic::BandCount, cells))
        }
        3 => {
            #[rustfmt::skip]
            let rows: [(usize, usize, [f64; 4]); 6] = [
                (10, 200, [0.3, 0.15, 0.11, 0.17]),
                (10, 500, [0.88, 0.53, 0.45, 0.36]),
                (10, 1000, [0.94, 0.93, 0.90, 0.42]),
                (15, 200, [0.36, 0.18, 0.08, 0.20]),
                (15, 500, [0.91, 0.52, 0.51, 0.41]),
                (15, 1000, [0.95, 0.96, 0.96, 0.39]),
            ];
            let cells = rows
                .iter()
                .flat_map(|&(p, t, vals)| {
                    names[1..].iter().zip(vals).map(move |(&s, q)| prop_cell(s, p, t, 1.0 / 16.0, q))
                })
                .collect();
            Ok((TableStatistic::CorrectDetection, cells))
        }
        4 => {
            #[rustfmt::skip]
            let rows: [(usize, f64, [f64; 4]); 6] = [
                (10, 12.0, [0.94, 0.93, 0.90, 0.73]),
                (10, 16.0, [0.94, 0.93, 0.90, 0.42]),
                (10, 24.0, [0.94, 0.93, 0.90, 0.27]),
                (15, 12.0, [0.95, 0.96, 0.96, 0.67]),
                (15, 16.0, [0.95, 0.96, 0.96, 0.39]),
                (15, 24.0, [0.95, 0.96, 0.96, 0.25]),
            ];
            let cells = rows
                .iter()
                .flat_map(|&(p, z, vals)| {
                    names[1..].iter().zip(vals).map(move |(&s, q)| prop_cell(s, p, 1000, 1.0 / z, q))
                })
                .collect();
            Ok((TableStatistic::CorrectDetection, cells))
        }
        _ => Err(domain!("unknown table {table}; expected 1, 2, 3 or 4")),
    }
}

/// Outcome of a single replication.
#[derive(Debug, Clone, PartialEq)]
pub struct Replication {
    pub index: usize,
    pub seed: u64,
    /// Estimated number of bands, `K + 1`.
    pub bands: usize,
    pub frequencies: Vec<f64>,
    pub correct: Option<bool>,
}

/// Resampling settings for replications; per-run seeds are derived from
/// `base_seed`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReplicationConfig {
    pub bootstrap: BootstrapConfig,
    pub scales: usize,
    pub w_max_divisor: usize,
}

impl Default for ReplicationConfig {
    fn default() -> Self {
        Self { bootstrap: BootstrapConfig::default(), scales: 5, w_max_divisor: 4 }
    }
}

/// Generates the data of replication `index` and runs the multiscale search.
pub fn run_replication(cell: &TableCell, index: usize, cfg: &ReplicationConfig) -> Result<Replication> {
    let spec = SchemeSpec::new(Scheme::from_name(cell.scheme)?, cell.channels, cell.len)?;
    let seed = mix_seed(cfg.bootstrap.base_seed, index as u64);
    let ts = generate(&spec, seed)?;
    let mut detect = DetectConfig::for_length(cell.len)?;
    detect.bootstrap = BootstrapConfig { base_seed: mix_seed(seed, 0xB007), ..cfg.bootstrap };
    let scales = ScaleSet::from_divisors(detect.window.window(), cell.w_min_divisor, cfg.w_max_divisor, cfg.scales)?;
    let result = detect_multiscale(&ts, &scales, &detect)?;
    let frequencies = result.frequencies();
    Ok(Replication {
        index,
        seed,
        bands: result.k_hat() + 1,
        correct: cell.radius.map(|r| correct_detection(&frequencies, &spec.truth(), r)),
        frequencies,
    })
}

/// Mean and sample standard deviation (absent for fewer than two values).
pub fn mean_sd(values: &[f64]) -> (f64, Option<f64>) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, None);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, Some(libm::sqrt(var)))
}

/// Label for a cell, e.g. `L3B p=10 T=1000 Wmin=N/8`.
pub fn cell_label(cell: &TableCell) -> String {
    let mut s = alloc::format!("{} p={} T={} Wmin=N/{}", cell.scheme, cell.channels, cell.len, cell.w_min_divisor);
    if let Some(r) = cell.radius {
        s.push_str(&alloc::format!(" zeta=1/{}", libm::round(1.0 / r)));
    }
    s
}
