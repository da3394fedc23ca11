//! Gaussian resampling under the no-partition null.
//!
//! Under the null the series is modelled as `X_t = sigma(t/T) Z_t` with
//! `Z_t ~ N(0, I_p)`. `sigma(u)` is the symmetric square root of a
//! triangular-kernel estimate of the time-varying covariance. Resample `r`
//! draws `Z` from a ChaCha stream seeded with `base_seed + r`, so an ensemble
//! is reproducible regardless of how resamples are scheduled.

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::discrepancy::{dhat_at_bin, dhat_components_at_bin, frequency_to_bin, pair_index};
use crate::error::{domain, Result};
use crate::tvspec::{all_bins_spectra, demean, sliding_spectra, LocalSpectra, WindowConfig};
use crate::TimeSeries;

/// Triangular kernel `max(0, 1 - |u|)`.
pub fn triangular(u: f64) -> f64 {
    (1.0 - libm::fabs(u)).max(0.0)
}

/// Bandwidth (in rescaled time) of the covariance smoother.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelConfig {
    bandwidth: f64,
    renormalize: bool,
}

impl KernelConfig {
    pub fn new(bandwidth: f64) -> Result<Self> {
        if !(bandwidth > 0.0 && bandwidth < 1.0) {
            return Err(domain!("bandwidth must lie in (0, 1), got {bandwidth}"));
        }
        Ok(Self { bandwidth, renormalize: true })
    }

    /// Whether the covariance estimate is divided by the kernel mass that
    /// falls on the data. This only matters within `h` of either end, where
    /// the raw estimate shrinks towards zero. Enabled by default.
    pub fn with_renormalize(self, renormalize: bool) -> Self {
        Self { renormalize, ..self }
    }

    pub fn renormalize(&self) -> bool {
        self.renormalize
    }

    /// `h = len^(-0.3)`.
    pub fn for_length(len: usize) -> Result<Self> {
        Self::new(libm::pow(len as f64, -0.3))
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    /// `K_h(v) = K(v / h) / h`.
    pub fn weight(&self, v: f64) -> f64 {
        triangular(v / self.bandwidth) / self.bandwidth
    }

    /// `(1/T) sum_t K_h(u - t/T)` over `t = 1..=len`.
    pub fn weight_sum(&self, u: f64, len: usize) -> f64 {
        let (lo, hi) = self.support(u, len);
        (lo..=hi).map(|t| self.weight(u - t as f64 / len as f64)).sum::<f64>() / len as f64
    }

    /// One-based times that can carry nonzero weight at `u`.
    fn support(&self, u: f64, len: usize) -> (usize, usize) {
        let n = len as f64;
        let lo = libm::floor((u - self.bandwidth) * n).max(1.0) as usize;
        let hi = (libm::ceil((u + self.bandwidth) * n).min(n).max(0.0)) as usize;
        (lo, hi)
    }
}

/// Resampling budget and significance level.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BootstrapConfig {
    pub resamples: usize,
    pub alpha: f64,
    pub base_seed: u64,
}

impl Default for BootstrapConfig {
    fn default() -> Self {
        Self { resamples: 100, alpha: 0.05, base_seed: 0 }
    }
}

impl BootstrapConfig {
    pub fn validate(&self) -> Result<()> {
        if self.resamples == 0 {
            return Err(domain!("at least one resample is required"));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(domain!("alpha must lie in (0, 1), got {}", self.alpha));
        }
        Ok(())
    }

    pub fn with_seed(self, base_seed: u64) -> Self {
        Self { base_seed, ..self }
    }

    /// Seed of resample `r` (one-based).
    pub fn resample_seed(&self, r: usize) -> u64 {
        self.base_seed.wrapping_add(r as u64)
    }
}

/// Kernel estimate of `E[X_t X_t']` at rescaled time `u`, symmetrised:
/// `(1/T) sum_t X_t X_t' K_h(u - t/T)`, optionally divided by
/// `(1/T) sum_t K_h(u - t/T)`.
pub fn tv_covariance(ts: &TimeSeries, u: f64, cfg: &KernelConfig) -> Result<DMatrix<f64>> {
    if ts.is_empty() {
        return Err(domain!("covariance of an empty series"));
    }
    let p = ts.channels();
    let len = ts.len();
    let mut acc = vec![0.0; p * p];
    let (lo, hi) = cfg.support(u, len);
    let mut any_weight = false;
    for t in lo..=hi {
        let w = cfg.weight(u - t as f64 / len as f64);
        if w == 0.0 {
            continue;
        }
        any_weight = true;
        let x = ts.row(t - 1);
        for a in 0..p {
            let wa = w * x[a];
            for b in a..p {
                acc[a * p + b] += wa * x[b];
            }
        }
    }
    if !any_weight {
        return Err(domain!("no kernel weight at u = {u} with bandwidth {}", cfg.bandwidth()));
    }
    let mut inv = 1.0 / len as f64;
    if cfg.renormalize {
        inv /= cfg.weight_sum(u, len);
    }
    Ok(DMatrix::from_fn(p, p, |a, b| {
        let (i, j) = if a <= b { (a, b) } else { (b, a) };
        acc[i * p + j] * inv
    }))
}

/// Symmetric square root with negative eigenvalues clamped to zero.
pub fn psd_sqrt(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if !m.is_square() {
        return Err(domain!("square root of a {}x{} matrix", m.nrows(), m.ncols()));
    }
    let norm = m.norm();
    let asym = (m - m.transpose()).norm();
    if asym > 1e-8 * norm {
        return Err(domain!("matrix is not symmetric (asymmetry {asym:e} vs norm {norm:e})"));
    }
    if m.nrows() == 1 {
        return Ok(DMatrix::from_element(1, 1, libm::sqrt(m[(0, 0)].max(0.0))));
    }
    if norm == 0.0 {
        return Ok(DMatrix::zeros(m.nrows(), m.ncols()));
    }
    let sym = (m + m.transpose()) * 0.5;
    let eig = sym.symmetric_eigen();
    let q = &eig.eigenvectors;
    let roots = eig.eigenvalues.map(|l| libm::sqrt(l.max(0.0)));
    let s = q * DMatrix::from_diagonal(&roots) * q.transpose();
    Ok((&s + s.transpose()) * 0.5)
}

/// `sigma(t/T)` for every `t = 1..=T`, shared by all resamples of a dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct NullModel {
    len: usize,
    channels: usize,
    sigma: Vec<f64>,
}

impl NullModel {
    pub fn fit(ts: &TimeSeries, cfg: &KernelConfig) -> Result<Self> {
        let len = ts.len();
        let p = ts.channels();
        let mut sigma = Vec::with_capacity(len * p * p);
        for t in 1..=len {
            let cov = tv_covariance(ts, t as f64 / len as f64, cfg)?;
            let root = psd_sqrt(&cov)?;
            for a in 0..p {
                for b in 0..p {
                    sigma.push(root[(a, b)]);
                }
            }
        }
        Ok(Self { len, channels: p, sigma })
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    /// Row-major `sigma(t/T)` for one-based `t`.
    pub fn sigma(&self, t: usize) -> &[f64] {
        let pp = self.channels * self.channels;
        &self.sigma[(t - 1) * pp..t * pp]
    }

    /// One Gaussian resample `sigma(t/T) Z_t`.
    pub fn resample(&self, seed: u64) -> TimeSeries {
        let p = self.channels;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut z = vec![0.0; p];
        let mut values = Vec::with_capacity(self.len * p);
        for t in 1..=self.len {
            z.iter_mut().for_each(|v| *v = StandardNormal.sample(&mut rng));
            let s = self.sigma(t);
            for a in 0..p {
                values.push(s[a * p..(a + 1) * p].iter().zip(&z).map(|(x, y)| x * y).sum());
            }
        }
        TimeSeries::new(values, p).expect("finite resample")
    }

    fn statistics<T, F>(&self, cfg: &BootstrapConfig, f: F) -> Result<Vec<T>>
    where
        T: Send,
        F: Fn(&TimeSeries) -> Result<T> + Sync + Send,
    {
        cfg.validate()?;
        crate::par::map_range(cfg.resamples, |i| f(&self.resample(cfg.resample_seed(i + 1))))
            .into_iter()
            .collect()
    }

    /// Bootstrap test of the full statistic at `bin`.
    pub fn test_full(
        &self,
        observed: f64,
        bin: usize,
        half_width: usize,
        window: &WindowConfig,
        cfg: &BootstrapConfig,
    ) -> Result<TestOutcome> {
        let bins = neighbourhood_bins(bin, half_width)?;
        let stats = self.statistics(cfg, |x| {
            let g = demean(sliding_spectra(x, window, &bins)?)?;
            dhat_at_bin(&g, bin, half_width)
        })?;
        Ok(TestOutcome::from_ensemble(observed, &stats))
    }

    /// Bootstrap tests of every component statistic on one shared ensemble.
    /// `observed` is packed by [`pair_index`].
    pub fn test_components(
        &self,
        observed: &[f64],
        bin: usize,
        half_width: usize,
        window: &WindowConfig,
        cfg: &BootstrapConfig,
    ) -> Result<Vec<TestOutcome>> {
        let m = self.channels * (self.channels + 1) / 2;
        if observed.len() != m {
            return Err(domain!("expected {m} observed component statistics, got {}", observed.len()));
        }
        let bins = neighbourhood_bins(bin, half_width)?;
        let stats = self.statistics(cfg, |x| {
            let g = demean(sliding_spectra(x, window, &bins)?)?;
            dhat_components_at_bin(&g, bin, half_width)
        })?;
        Ok((0..m)
            .map(|i| {
                let column: Vec<f64> = stats.iter().map(|s| s[i]).collect();
                TestOutcome::from_ensemble(observed[i], &column)
            })
            .collect())
    }
}

fn neighbourhood_bins(bin: usize, half_width: usize) -> Result<Vec<usize>> {
    if half_width == 0 || bin <= half_width {
        return Err(domain!("bin {bin} cannot host half-width {half_width}"));
    }
    Ok((bin - half_width..=bin + half_width).filter(|&b| b != bin).collect())
}

/// Observed statistic, its bootstrap p-value and the exceedance count.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TestOutcome {
    pub statistic: f64,
    pub pvalue: f64,
    pub exceedances: usize,
    pub resamples: usize,
}

impl TestOutcome {
    /// Share of resample statistics strictly above `observed`.
    pub fn from_ensemble(observed: f64, resampled: &[f64]) -> Self {
        let exceedances = resampled.iter().filter(|&&s| s > observed).count();
        Self {
            statistic: observed,
            pvalue: exceedances as f64 / resampled.len() as f64,
            exceedances,
            resamples: resampled.len(),
        }
    }

    pub fn is_significant(&self, level: f64) -> bool {
        self.pvalue <= level
    }
}

/// One resample of `ts` under the null.
pub fn resample(ts: &TimeSeries, cfg: &KernelConfig, seed: u64) -> Result<TimeSeries> {
    let model = NullModel::fit(ts, cfg)?;
    let out = model.resample(seed);
    Ok(match ts.sampling_rate() {
        Some(rate) => out.with_sampling_rate(rate)?,
        None => out,
    })
}

fn observed_spectra(ts: &TimeSeries, window: &WindowConfig) -> Result<LocalSpectra> {
    demean(all_bins_spectra(ts, window)?)
}

/// Bootstrap p-value of the full discrepancy at grid frequency `frequency`.
pub fn pvalue_full(
    ts: &TimeSeries,
    frequency: f64,
    half_width: usize,
    window: &WindowConfig,
    kernel: &KernelConfig,
    cfg: &BootstrapConfig,
) -> Result<TestOutcome> {
    let bin = frequency_to_bin(frequency, window.window())?;
    let observed = dhat_at_bin(&observed_spectra(ts, window)?, bin, half_width)?;
    NullModel::fit(ts, kernel)?.test_full(observed, bin, half_width, window, cfg)
}

/// Bootstrap p-values of every component `(a, b)`, `a <= b`, packed by
/// [`pair_index`].
pub fn pvalue_components(
    ts: &TimeSeries,
    frequency: f64,
    half_width: usize,
    window: &WindowConfig,
    kernel: &KernelConfig,
    cfg: &BootstrapConfig,
) -> Result<Vec<TestOutcome>> {
    let bin = frequency_to_bin(frequency, window.window())?;
    let observed = dhat_components_at_bin(&observed_spectra(ts, window)?, bin, half_width)?;
    NullModel::fit(ts, kernel)?.test_components(&observed, bin, half_width, window, cfg)
}

/// Bootstrap p-value of component `(a, b)` (zero-based, `a <= b`).
#[allow(clippy::too_many_arguments)]
pub fn pvalue_component(
    ts: &TimeSeries,
    frequency: f64,
    half_width: usize,
    a: usize,
    b: usize,
    window: &WindowConfig,
    kernel: &KernelConfig,
    cfg: &BootstrapConfig,
) -> Result<TestOutcome> {
    let p = ts.channels();
    if a > b || b >= p {
        return Err(domain!("component ({a}, {b}) needs a <= b < {p}"));
    }
    Ok(pvalue_components(ts, frequency, half_width, window, kernel, cfg)?[pair_index(p, a, b)])
}
