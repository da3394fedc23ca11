//! Local Fourier transforms and local periodograms over a sliding window.
//!
//! For a window of even length `N` centred near time `t` (one-based), the
//! local transform of channel `c` at bin `k` is
//!
//! ```text
//! J_c(t, k) = (2 pi N)^(-1/2) * sum_{s=0}^{N-1} x_c[t - N/2 + 1 + s] * exp(-i 2 pi k s / N)
//! ```
//!
//! and the local periodogram is the outer product `J J*`. Only times whose
//! window lies entirely inside the data are used, so the time grid runs over
//! `t = N/2, N/2 + stride, ..., T - N/2`. Bins are restricted to
//! `1 <= k <= N/2 - 1`.
//!
//! [`LocalSpectra`] keeps the transform vectors rather than the `p x p`
//! matrices; matrix entries are formed on demand. After [`demean`] the
//! per-bin time averages are stored alongside and subtracted from each entry.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{domain, Error, Result};
use crate::TimeSeries;

/// Steps between exact re-evaluations of the sliding recurrence.
const REANCHOR_STEPS: usize = 256;

/// Window length and time-grid stride for local spectral estimates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WindowConfig {
    window: usize,
    stride: usize,
}

impl WindowConfig {
    /// `window` must be even and at least 2; `stride` must lie in `1..=window`.
    pub fn new(window: usize, stride: usize) -> Result<Self> {
        if window < 2 || !window.is_multiple_of(2) {
            return Err(domain!("window length must be even and >= 2, got {window}"));
        }
        if stride == 0 || stride > window {
            return Err(domain!("stride must be in 1..={window}, got {stride}"));
        }
        Ok(Self { window, stride })
    }

    /// Default window for a series of length `len`: `floor(len^0.7)`, rounded
    /// down to an even number.
    pub fn for_length(len: usize) -> Result<Self> {
        Self::new(default_window(len), 1)
    }

    pub fn with_stride(self, stride: usize) -> Result<Self> {
        Self::new(self.window, stride)
    }

    /// Window length `N`.
    pub fn window(&self) -> usize {
        self.window
    }

    pub fn stride(&self) -> usize {
        self.stride
    }

    pub fn half(&self) -> usize {
        self.window / 2
    }

    /// Largest usable bin, `N/2 - 1`.
    pub fn max_bin(&self) -> usize {
        self.window / 2 - 1
    }

    /// One-based times whose window fits inside a series of length `len`.
    pub fn time_grid(&self, len: usize) -> Result<Vec<usize>> {
        if len < self.window {
            return Err(domain!("series of length {len} is shorter than the window {}", self.window));
        }
        let half = self.half();
        Ok((half..=len - half).step_by(self.stride).collect())
    }

    /// Frequency in cycles per sample of bin `k`.
    pub fn frequency(&self, bin: usize) -> f64 {
        bin as f64 / self.window as f64
    }
}

/// `floor(len^0.7)`, decremented when odd.
pub fn default_window(len: usize) -> usize {
    let n = libm::floor(libm::pow(len as f64, 0.7)) as usize;
    n - n % 2
}

fn check_window_fits(ts: &TimeSeries, cfg: &WindowConfig) -> Result<()> {
    if ts.len() < 2 * cfg.window() {
        return Err(domain!(
            "series length {} is below twice the window length {}",
            ts.len(),
            cfg.window()
        ));
    }
    Ok(())
}

fn check_bin(cfg: &WindowConfig, bin: usize) -> Result<()> {
    if bin == 0 || bin > cfg.max_bin() {
        return Err(domain!("frequency bin {bin} outside 1..={}", cfg.max_bin()));
    }
    Ok(())
}

/// `exp(-i 2 pi j / N)` for `j in 0..N`.
fn twiddles(window: usize) -> Vec<Complex64> {
    (0..window)
        .map(|j| {
            let angle = -2.0 * PI * j as f64 / window as f64;
            Complex64::new(libm::cos(angle), libm::sin(angle))
        })
        .collect()
}

fn normalization(window: usize) -> f64 {
    1.0 / libm::sqrt(2.0 * PI * window as f64)
}

/// Local DFT of every channel at one-based time `t` and bin `k`, by direct
/// summation over the window.
pub fn local_dft(ts: &TimeSeries, t: usize, cfg: &WindowConfig, bin: usize) -> Result<Vec<Complex64>> {
    let n = cfg.window();
    let half = cfg.half();
    if t < half || t + half > ts.len() {
        return Err(domain!(
            "time index {t} has no full window: valid range is {half}..={}",
            ts.len().saturating_sub(half)
        ));
    }
    check_bin(cfg, bin)?;
    let table = twiddles(n);
    let start = t - half;
    let mut out = vec![Complex64::new(0.0, 0.0); ts.channels()];
    for s in 0..n {
        let w = table[(bin * s) % n];
        for (acc, &x) in out.iter_mut().zip(ts.row(start + s)) {
            *acc += w * x;
        }
    }
    let scale = normalization(n);
    out.iter_mut().for_each(|v| *v *= scale);
    Ok(out)
}

/// Local transforms (and optionally their time means) on a time grid and bin set.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalSpectra {
    window: usize,
    channels: usize,
    bins: Vec<usize>,
    slot: Vec<usize>,
    time_grid: Vec<usize>,
    dft: Vec<Complex64>,
    means: Option<Vec<Complex64>>,
}

const NO_SLOT: usize = usize::MAX;

impl LocalSpectra {
    /// Assembles spectra from precomputed transform vectors laid out as
    /// `dft[(time_index * bins.len() + bin_index) * channels + channel]`.
    pub fn from_dft(
        window: usize,
        channels: usize,
        bins: Vec<usize>,
        time_grid: Vec<usize>,
        dft: Vec<Complex64>,
    ) -> Result<Self> {
        if channels == 0 || time_grid.is_empty() || bins.is_empty() {
            return Err(domain!("spectra need at least one channel, time point and bin"));
        }
        if dft.len() != time_grid.len() * bins.len() * channels {
            return Err(domain!(
                "expected {} transform values, got {}",
                time_grid.len() * bins.len() * channels,
                dft.len()
            ));
        }
        let mut slot = vec![NO_SLOT; window / 2 + 1];
        for (i, &b) in bins.iter().enumerate() {
            if b >= slot.len() || slot[b] != NO_SLOT {
                return Err(domain!("bin {b} is duplicated or beyond N/2"));
            }
            slot[b] = i;
        }
        Ok(Self { window, channels, bins, slot, time_grid, dft, means: None })
    }

    pub fn window(&self) -> usize {
        self.window
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn bins(&self) -> &[usize] {
        &self.bins
    }

    pub fn time_grid(&self) -> &[usize] {
        &self.time_grid
    }

    pub fn is_demeaned(&self) -> bool {
        self.means.is_some()
    }

    pub fn has_bin(&self, bin: usize) -> bool {
        self.slot.get(bin).is_some_and(|&s| s != NO_SLOT)
    }

    pub(crate) fn slot_of(&self, bin: usize) -> Result<usize> {
        match self.slot.get(bin) {
            Some(&s) if s != NO_SLOT => Ok(s),
            _ => Err(domain!("bin {bin} was not estimated")),
        }
    }

    /// Local transform vector at time-grid position `ti`.
    pub fn dft(&self, ti: usize, bin: usize) -> Result<&[Complex64]> {
        let slot = self.slot_of(bin)?;
        Ok(self.dft_at(ti, slot))
    }

    #[inline]
    pub(crate) fn dft_at(&self, ti: usize, slot: usize) -> &[Complex64] {
        let start = (ti * self.bins.len() + slot) * self.channels;
        &self.dft[start..start + self.channels]
    }

    /// Time-averaged periodogram at `bin` when demeaned.
    pub fn mean_matrix(&self, bin: usize) -> Result<Option<&[Complex64]>> {
        let slot = self.slot_of(bin)?;
        Ok(self.mean_at(slot))
    }

    #[inline]
    pub(crate) fn mean_at(&self, slot: usize) -> Option<&[Complex64]> {
        let pp = self.channels * self.channels;
        self.means.as_ref().map(|m| &m[slot * pp..(slot + 1) * pp])
    }

    /// Entry `(a, b)` of the (possibly demeaned) periodogram at grid position `ti`.
    pub fn entry(&self, ti: usize, bin: usize, a: usize, b: usize) -> Result<Complex64> {
        let slot = self.slot_of(bin)?;
        if ti >= self.time_grid.len() || a >= self.channels || b >= self.channels {
            return Err(domain!("entry ({ti}, {a}, {b}) out of range"));
        }
        let v = self.dft_at(ti, slot);
        let raw = v[a] * v[b].conj();
        Ok(match self.mean_at(slot) {
            Some(m) => raw - m[a * self.channels + b],
            None => raw,
        })
    }

    /// Full `p x p` matrix, row-major, at grid position `ti`.
    pub fn matrix(&self, ti: usize, bin: usize) -> Result<Vec<Complex64>> {
        let p = self.channels;
        let mut out = Vec::with_capacity(p * p);
        for a in 0..p {
            for b in 0..p {
                out.push(self.entry(ti, bin, a, b)?);
            }
        }
        Ok(out)
    }
}

/// Local transforms of every channel over the interior time grid for the
/// requested bins. Uses the sliding-DFT recurrence
/// `S(start + 1) = (S(start) - x[start] + x[start + N]) * exp(i 2 pi k / N)`.
pub fn sliding_spectra(ts: &TimeSeries, cfg: &WindowConfig, bins: &[usize]) -> Result<LocalSpectra> {
    if bins.is_empty() {
        return Err(domain!("no frequency bins requested"));
    }
    check_window_fits(ts, cfg)?;
    let mut sorted = bins.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    for &b in &sorted {
        check_bin(cfg, b)?;
    }
    let grid = cfg.time_grid(ts.len())?;
    let dft = sliding_dft(ts, cfg, &sorted, &grid);
    LocalSpectra::from_dft(cfg.window(), ts.channels(), sorted, grid, dft)
}

/// Spectra on every usable bin `1..=N/2-1`.
pub fn all_bins_spectra(ts: &TimeSeries, cfg: &WindowConfig) -> Result<LocalSpectra> {
    let bins: Vec<usize> = (1..=cfg.max_bin()).collect();
    sliding_spectra(ts, cfg, &bins)
}

fn sliding_dft(ts: &TimeSeries, cfg: &WindowConfig, bins: &[usize], grid: &[usize]) -> Vec<Complex64> {
    let n = cfg.window();
    let p = ts.channels();
    let nb = bins.len();
    let table = twiddles(n);
    // exp(+i 2 pi k / N)
    let step: Vec<Complex64> = bins.iter().map(|&k| table[k % n].conj()).collect();
    let scale = normalization(n);

    let first = grid[0] - cfg.half();
    let last = grid[grid.len() - 1] - cfg.half();

    let direct = |start: usize, acc: &mut [Complex64]| {
        acc.iter_mut().for_each(|v| *v = Complex64::new(0.0, 0.0));
        for s in 0..n {
            let row = ts.row(start + s);
            for (bi, &k) in bins.iter().enumerate() {
                let w = table[(k * s) % n];
                let cell = &mut acc[bi * p..(bi + 1) * p];
                for (a, &x) in cell.iter_mut().zip(row) {
                    *a += w * x;
                }
            }
        }
    };

    let mut acc = vec![Complex64::new(0.0, 0.0); nb * p];
    let mut out = Vec::with_capacity(grid.len() * nb * p);
    let mut next_grid = 0;
    let mut since_anchor = 0;
    direct(first, &mut acc);
    let mut start = first;
    loop {
        if start + cfg.half() == grid[next_grid] {
            out.extend(acc.iter().map(|v| v * scale));
            next_grid += 1;
        }
        if start == last {
            break;
        }
        since_anchor += 1;
        if since_anchor == REANCHOR_STEPS {
            since_anchor = 0;
            direct(start + 1, &mut acc);
        } else {
            let old = ts.row(start);
            let new = ts.row(start + n);
            for (bi, w) in step.iter().enumerate() {
                let cell = &mut acc[bi * p..(bi + 1) * p];
                for c in 0..p {
                    cell[c] = (cell[c] + (new[c] - old[c])) * w;
                }
            }
        }
        start += 1;
    }
    debug_assert_eq!(next_grid, grid.len());
    out
}

/// Subtracts from every periodogram entry its average over the time grid.
pub fn demean(spec: LocalSpectra) -> Result<LocalSpectra> {
    if spec.is_demeaned() {
        return Err(Error::Contract("spectra are already demeaned".into()));
    }
    let p = spec.channels;
    let nt = spec.time_grid.len();
    let mut means = vec![Complex64::new(0.0, 0.0); spec.bins.len() * p * p];
    for slot in 0..spec.bins.len() {
        let m = &mut means[slot * p * p..(slot + 1) * p * p];
        for ti in 0..nt {
            let v = spec.dft_at(ti, slot);
            for a in 0..p {
                for b in a..p {
                    m[a * p + b] += v[a] * v[b].conj();
                }
            }
        }
        let inv = 1.0 / nt as f64;
        for a in 0..p {
            for b in a..p {
                let val = m[a * p + b] * inv;
                m[a * p + b] = val;
                m[b * p + a] = val.conj();
            }
        }
    }
    Ok(LocalSpectra { means: Some(means), ..spec })
}
