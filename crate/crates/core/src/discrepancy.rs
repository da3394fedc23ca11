//! Discrepancy between demeaned local periodograms at mirrored frequencies.
//!
//! For a candidate bin `c` and half-width `W`,
//!
//! ```text
//! D(c) = 1/|grid| sum_t 1/W sum_{k=1}^{W} || g(t, c - k) - g(t, c + k) ||_F^2
//! ```
//!
//! where `g` is the time-demeaned local periodogram. With `g(t, j) = v v* - M_j`
//! for the transform vector `v = J(t, j)` and time mean `M_j`, the inner sum
//! over the grid reduces to
//!
//! ```text
//! sum_t ||v v* - w w*||^2 - |grid| * ||M_a - M_b||^2
//! ||v v* - w w*||^2 = |v|^4 + |w|^4 - 2 |v* w|^2
//! ```
//!
//! which costs `O(p)` per time point instead of `O(p^2)`.

use alloc::collections::BTreeSet;
use alloc::vec::Vec;

use num_complex::Complex64;

use crate::error::{domain, Error, Result};
use crate::tvspec::LocalSpectra;

/// Candidate partition bins `W, W+1, ..., N/2 - W` with an exclusion set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CandidateGrid {
    window: usize,
    half_width: usize,
    excluded: BTreeSet<usize>,
}

impl CandidateGrid {
    /// Full grid for window `N` and half-width `W`; requires `1 <= W <= N/4`.
    pub fn new(window: usize, half_width: usize) -> Result<Self> {
        if half_width == 0 {
            return Err(domain!("half-width must be at least 1"));
        }
        if !window.is_multiple_of(2) || 2 * half_width > window / 2 {
            return Err(domain!(
                "half-width {half_width} leaves no candidates for window {window} (need W <= N/4)"
            ));
        }
        Ok(Self { window, half_width, excluded: BTreeSet::new() })
    }

    /// Grid with its two endpoints excluded, so that every neighbourhood stays
    /// within bins `1..=N/2-1`.
    pub fn interior(window: usize, half_width: usize) -> Result<Self> {
        let mut grid = Self::new(window, half_width)?;
        grid.exclude(half_width);
        grid.exclude(window / 2 - half_width);
        Ok(grid)
    }

    pub fn window(&self) -> usize {
        self.window
    }

    pub fn half_width(&self) -> usize {
        self.half_width
    }

    pub fn first_bin(&self) -> usize {
        self.half_width
    }

    pub fn last_bin(&self) -> usize {
        self.window / 2 - self.half_width
    }

    pub fn all_bins(&self) -> impl Iterator<Item = usize> + '_ {
        self.first_bin()..=self.last_bin()
    }

    pub fn all_frequencies(&self) -> Vec<f64> {
        self.all_bins().map(|b| b as f64 / self.window as f64).collect()
    }

    pub fn contains(&self, bin: usize) -> bool {
        bin >= self.first_bin() && bin <= self.last_bin()
    }

    pub fn is_excluded(&self, bin: usize) -> bool {
        self.excluded.contains(&bin)
    }

    /// Removes `bin` from the remaining set; bins off the grid are ignored.
    pub fn exclude(&mut self, bin: usize) {
        if self.contains(bin) {
            self.excluded.insert(bin);
        }
    }

    /// Removes every grid bin in `lo..=hi`.
    pub fn exclude_range(&mut self, lo: usize, hi: usize) {
        for b in lo.max(self.first_bin())..=hi.min(self.last_bin()) {
            self.excluded.insert(b);
        }
    }

    pub fn excluded(&self) -> impl Iterator<Item = usize> + '_ {
        self.excluded.iter().copied()
    }

    pub fn remaining(&self) -> impl Iterator<Item = usize> + '_ {
        self.all_bins().filter(|b| !self.excluded.contains(b))
    }

    pub fn remaining_len(&self) -> usize {
        self.last_bin() + 1 - self.first_bin() - self.excluded.len()
    }

    pub fn is_exhausted(&self) -> bool {
        self.remaining_len() == 0
    }
}

/// Grid candidate to its bin index; frequencies must be multiples of `1/N`.
pub fn frequency_to_bin(frequency: f64, window: usize) -> Result<usize> {
    let scaled = frequency * window as f64;
    let bin = libm::round(scaled);
    if !(frequency > 0.0 && frequency < 0.5) || libm::fabs(scaled - bin) > 1e-9 * window as f64 {
        return Err(domain!("frequency {frequency} is not a grid point k/{window} inside (0, 1/2)"));
    }
    Ok(bin as usize)
}

/// Discrepancy values over the remaining candidates of a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscrepancyCurve {
    pub window: usize,
    pub half_width: usize,
    pub bins: Vec<usize>,
    pub values: Vec<f64>,
}

impl DiscrepancyCurve {
    pub fn frequencies(&self) -> Vec<f64> {
        self.bins.iter().map(|&b| b as f64 / self.window as f64).collect()
    }

    pub fn value_at(&self, bin: usize) -> Option<f64> {
        self.bins.iter().position(|&b| b == bin).map(|i| self.values[i])
    }

    /// Bin of the largest value; ties go to the lowest frequency.
    pub fn argmax(&self) -> Option<(usize, f64)> {
        let mut best: Option<(usize, f64)> = None;
        for (&b, &v) in self.bins.iter().zip(&self.values) {
            match best {
                Some((_, bv)) if v <= bv => {}
                _ => best = Some((b, v)),
            }
        }
        best
    }
}

struct Neighbourhood {
    pairs: Vec<(usize, usize)>,
}

fn neighbourhood(g: &LocalSpectra, bin: usize, half_width: usize) -> Result<Neighbourhood> {
    if !g.is_demeaned() {
        return Err(Error::Contract("discrepancy needs demeaned spectra".into()));
    }
    if half_width == 0 {
        return Err(domain!("half-width must be at least 1"));
    }
    if bin <= half_width {
        return Err(domain!("bin {bin} minus half-width {half_width} leaves the estimated bins"));
    }
    let mut pairs = Vec::with_capacity(half_width);
    for k in 1..=half_width {
        let lo = g.slot_of(bin - k).map_err(|_| domain!("insufficient bins: {} not estimated", bin - k))?;
        let hi = g.slot_of(bin + k).map_err(|_| domain!("insufficient bins: {} not estimated", bin + k))?;
        pairs.push((lo, hi));
    }
    Ok(Neighbourhood { pairs })
}

#[inline]
fn inner(v: &[Complex64], w: &[Complex64]) -> Complex64 {
    v.iter().zip(w).fold(Complex64::new(0.0, 0.0), |acc, (a, b)| acc + a.conj() * b)
}

#[inline]
fn sq_norm(v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum()
}

/// Discrepancy at candidate bin `bin`.
pub fn dhat_at_bin(g: &LocalSpectra, bin: usize, half_width: usize) -> Result<f64> {
    let hood = neighbourhood(g, bin, half_width)?;
    let nt = g.time_grid().len();
    let mut total = 0.0;
    for &(sa, sb) in &hood.pairs {
        let mut sum = 0.0;
        for ti in 0..nt {
            let v = g.dft_at(ti, sa);
            let w = g.dft_at(ti, sb);
            let nv = sq_norm(v);
            let nw = sq_norm(w);
            sum += nv * nv + nw * nw - 2.0 * inner(v, w).norm_sqr();
        }
        let ma = g.mean_at(sa).expect("demeaned");
        let mb = g.mean_at(sb).expect("demeaned");
        let mean_gap: f64 = ma.iter().zip(mb).map(|(x, y)| (x - y).norm_sqr()).sum();
        total += sum - nt as f64 * mean_gap;
    }
    Ok((total / (nt as f64 * half_width as f64)).max(0.0))
}

/// Discrepancy at grid frequency `frequency` (cycles per sample).
pub fn dhat(g: &LocalSpectra, frequency: f64, half_width: usize) -> Result<f64> {
    dhat_at_bin(g, frequency_to_bin(frequency, g.window())?, half_width)
}

fn check_pair(g: &LocalSpectra, a: usize, b: usize) -> Result<()> {
    if a > b || b >= g.channels() {
        return Err(domain!("component ({a}, {b}) needs a <= b < {}", g.channels()));
    }
    Ok(())
}

/// Single-entry discrepancy for channels `a <= b` (zero-based).
pub fn dhat_component_at_bin(g: &LocalSpectra, bin: usize, half_width: usize, a: usize, b: usize) -> Result<f64> {
    check_pair(g, a, b)?;
    let hood = neighbourhood(g, bin, half_width)?;
    let p = g.channels();
    let nt = g.time_grid().len();
    let mut total = 0.0;
    for &(sa, sb) in &hood.pairs {
        let mut sum = 0.0;
        for ti in 0..nt {
            let v = g.dft_at(ti, sa);
            let w = g.dft_at(ti, sb);
            sum += (v[a] * v[b].conj() - w[a] * w[b].conj()).norm_sqr();
        }
        let gap = g.mean_at(sa).expect("demeaned")[a * p + b] - g.mean_at(sb).expect("demeaned")[a * p + b];
        total += sum - nt as f64 * gap.norm_sqr();
    }
    Ok((total / (nt as f64 * half_width as f64)).max(0.0))
}

pub fn dhat_component(g: &LocalSpectra, frequency: f64, half_width: usize, a: usize, b: usize) -> Result<f64> {
    dhat_component_at_bin(g, frequency_to_bin(frequency, g.window())?, half_width, a, b)
}

/// Index of pair `(a, b)`, `a <= b`, in the packed upper triangle.
pub fn pair_index(p: usize, a: usize, b: usize) -> usize {
    a * p - a * (a + 1) / 2 + b
}

/// Every component statistic at once, packed by [`pair_index`].
pub fn dhat_components_at_bin(g: &LocalSpectra, bin: usize, half_width: usize) -> Result<Vec<f64>> {
    let hood = neighbourhood(g, bin, half_width)?;
    let p = g.channels();
    let nt = g.time_grid().len();
    let m = p * (p + 1) / 2;
    let mut totals = alloc::vec![0.0; m];
    let mut cell = alloc::vec![0.0; m];
    for &(sa, sb) in &hood.pairs {
        cell.iter_mut().for_each(|c| *c = 0.0);
        for ti in 0..nt {
            let v = g.dft_at(ti, sa);
            let w = g.dft_at(ti, sb);
            let mut idx = 0;
            for a in 0..p {
                for b in a..p {
                    cell[idx] += (v[a] * v[b].conj() - w[a] * w[b].conj()).norm_sqr();
                    idx += 1;
                }
            }
        }
        let ma = g.mean_at(sa).expect("demeaned");
        let mb = g.mean_at(sb).expect("demeaned");
        let mut idx = 0;
        for a in 0..p {
            for b in a..p {
                totals[idx] += cell[idx] - nt as f64 * (ma[a * p + b] - mb[a * p + b]).norm_sqr();
                idx += 1;
            }
        }
    }
    let denom = nt as f64 * half_width as f64;
    Ok(totals.into_iter().map(|t| (t / denom).max(0.0)).collect())
}

/// Discrepancy at every remaining candidate of `grid`.
pub fn dhat_curve(g: &LocalSpectra, grid: &CandidateGrid) -> Result<DiscrepancyCurve> {
    if grid.window() != g.window() {
        return Err(domain!("grid window {} does not match spectra window {}", grid.window(), g.window()));
    }
    let bins: Vec<usize> = grid.remaining().collect();
    let w = grid.half_width();
    let values = crate::par::map_range(bins.len(), |i| dhat_at_bin(g, bins[i], w))
        .into_iter()
        .collect::<Result<Vec<f64>>>()?;
    Ok(DiscrepancyCurve { window: g.window(), half_width: w, bins, values })
}
