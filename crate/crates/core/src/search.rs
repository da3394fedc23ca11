//! Iterative and multiscale partition-point search, and component attribution.
//!
//! At a half-width `W` the search repeatedly takes the remaining candidate
//! with the largest discrepancy, tests it against the bootstrap null and, if
//! significant, accepts it and removes its `W`-neighbourhood from the
//! candidates. The multiscale search runs this over ascending widths, first
//! trimming the candidate range to the current width and clearing the
//! current-width neighbourhoods of points accepted at earlier widths.

use alloc::vec;
use alloc::vec::Vec;

use crate::bootstrap::{BootstrapConfig, KernelConfig, NullModel, TestOutcome};
use crate::discrepancy::{dhat_at_bin, dhat_components_at_bin, frequency_to_bin, pair_index, CandidateGrid, DiscrepancyCurve};
use crate::error::{domain, Result};
use crate::simgen::mix_seed;
use crate::tvspec::{all_bins_spectra, demean, LocalSpectra, WindowConfig};
use crate::TimeSeries;

/// Everything a detection run needs besides the data.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectConfig {
    pub window: WindowConfig,
    pub kernel: KernelConfig,
    pub bootstrap: BootstrapConfig,
    /// Keep the discrepancy curve evaluated at each scale.
    pub keep_curves: bool,
}

impl DetectConfig {
    /// Defaults for a series of length `len`: `N = floor(len^0.7)` (even),
    /// `h = len^-0.3`, 100 resamples, `alpha = 0.05`.
    pub fn for_length(len: usize) -> Result<Self> {
        Ok(Self {
            window: WindowConfig::for_length(len)?,
            kernel: KernelConfig::for_length(len)?,
            bootstrap: BootstrapConfig::default(),
            keep_curves: false,
        })
    }

    /// Bootstrap settings of the `iteration`-th test at scale `scale`.
    pub fn test_bootstrap(&self, scale: usize, iteration: usize) -> BootstrapConfig {
        let seed = mix_seed(mix_seed(self.bootstrap.base_seed, scale as u64 + 1), iteration as u64 + 1);
        self.bootstrap.with_seed(seed)
    }
}

/// Ascending neighbourhood half-widths.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScaleSet {
    widths: Vec<usize>,
}

impl ScaleSet {
    /// Sorts and deduplicates; every width must admit a candidate grid.
    pub fn new(window: usize, mut widths: Vec<usize>) -> Result<Self> {
        widths.sort_unstable();
        widths.dedup();
        if widths.is_empty() {
            return Err(domain!("at least one scale is required"));
        }
        for &w in &widths {
            CandidateGrid::new(window, w)?;
        }
        Ok(Self { widths })
    }

    /// `count` equally spaced widths from `floor(N / min_divisor)` to
    /// `floor(N / max_divisor)`, rounded to the nearest integer.
    pub fn from_divisors(window: usize, min_divisor: usize, max_divisor: usize, count: usize) -> Result<Self> {
        if max_divisor < 4 || min_divisor <= max_divisor || count == 0 {
            return Err(domain!(
                "scale divisors need min ({min_divisor}) > max ({max_divisor}) >= 4 and a positive count"
            ));
        }
        let lo = window / min_divisor;
        let hi = window / max_divisor;
        let widths = if count == 1 {
            vec![lo]
        } else {
            (0..count)
                .map(|i| libm::round(lo as f64 + (hi - lo) as f64 * i as f64 / (count - 1) as f64) as usize)
                .collect()
        };
        Self::new(window, widths)
    }

    /// Five widths from `N/8` to `N/4`.
    pub fn default_for(window: usize) -> Result<Self> {
        Self::from_divisors(window, 8, 4, 5)
    }

    pub fn widths(&self) -> &[usize] {
        &self.widths
    }

    pub fn len(&self) -> usize {
        self.widths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.widths.is_empty()
    }

    pub fn largest(&self) -> usize {
        self.widths[self.widths.len() - 1]
    }
}

/// An accepted partition point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PartitionPoint {
    pub bin: usize,
    /// Cycles per sample.
    pub frequency: f64,
    pub hertz: Option<f64>,
    pub half_width: usize,
    pub scale_index: usize,
    pub pvalue: f64,
    pub statistic: f64,
    /// Zero-based acceptance order.
    pub order: usize,
}

/// Curve evaluated at one scale over the candidates remaining at its start.
#[derive(Debug, Clone, PartialEq)]
pub struct ScaleCurve {
    pub scale_index: usize,
    pub curve: DiscrepancyCurve,
}

/// Every significance test performed, accepted or not.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TestRecord {
    pub scale_index: usize,
    pub iteration: usize,
    pub bin: usize,
    pub outcome: TestOutcome,
    pub accepted: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PartitionResult {
    pub window: usize,
    pub points: Vec<PartitionPoint>,
    pub tests: Vec<TestRecord>,
    pub curves: Vec<ScaleCurve>,
}

impl PartitionResult {
    /// Estimated number of partition points.
    pub fn k_hat(&self) -> usize {
        self.points.len()
    }

    /// Accepted frequencies in acceptance order.
    pub fn frequencies(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.frequency).collect()
    }
}

/// Observed spectra and null model for one dataset.
pub struct Analysis<'a> {
    ts: &'a TimeSeries,
    cfg: DetectConfig,
    spectra: LocalSpectra,
    null: NullModel,
}

impl<'a> Analysis<'a> {
    pub fn new(ts: &'a TimeSeries, cfg: &DetectConfig) -> Result<Self> {
        cfg.bootstrap.validate()?;
        let spectra = demean(all_bins_spectra(ts, &cfg.window)?)?;
        let null = NullModel::fit(ts, &cfg.kernel)?;
        Ok(Self { ts, cfg: *cfg, spectra, null })
    }

    pub fn spectra(&self) -> &LocalSpectra {
        &self.spectra
    }

    pub fn null_model(&self) -> &NullModel {
        &self.null
    }

    fn curve(&self, bins: Vec<usize>, half_width: usize) -> Result<DiscrepancyCurve> {
        let values = crate::par::map_range(bins.len(), |i| dhat_at_bin(&self.spectra, bins[i], half_width))
            .into_iter()
            .collect::<Result<Vec<f64>>>()?;
        Ok(DiscrepancyCurve { window: self.cfg.window.window(), half_width, bins, values })
    }

    fn test(&self, bin: usize, half_width: usize, observed: f64, boot: &BootstrapConfig) -> Result<TestOutcome> {
        self.null.test_full(observed, bin, half_width, &self.cfg.window, boot)
    }

    /// Multiscale search over `scales`.
    pub fn detect(&self, scales: &ScaleSet) -> Result<PartitionResult> {
        let n = self.cfg.window.window();
        let half = n / 2;
        let first = scales.widths()[0];
        let mut candidates = CandidateGrid::new(n, first)?;
        let mut points: Vec<PartitionPoint> = Vec::new();
        let mut tests = Vec::new();
        let mut curves = Vec::new();
        let rate = self.ts.sampling_rate();

        for (scale_index, &w) in scales.widths().iter().enumerate() {
            candidates.exclude_range(first, w);
            candidates.exclude_range(half - w, half - first);
            for p in &points {
                candidates.exclude_range(p.bin.saturating_sub(w), p.bin + w);
            }
            let curve = self.curve(candidates.remaining().collect(), w)?;
            let mut iteration = 0;
            while !candidates.is_exhausted() {
                let (bin, statistic) = remaining_argmax(&curve, &candidates).expect("nonempty candidates");
                let outcome = self.test(bin, w, statistic, &self.cfg.test_bootstrap(scale_index, iteration))?;
                let accepted = outcome.is_significant(self.cfg.bootstrap.alpha);
                tests.push(TestRecord { scale_index, iteration, bin, outcome, accepted });
                iteration += 1;
                if !accepted {
                    break;
                }
                let frequency = bin as f64 / n as f64;
                points.push(PartitionPoint {
                    bin,
                    frequency,
                    hertz: rate.map(|r| frequency * r),
                    half_width: w,
                    scale_index,
                    pvalue: outcome.pvalue,
                    statistic,
                    order: points.len(),
                });
                candidates.exclude_range(bin.saturating_sub(w), bin + w);
            }
            if self.cfg.keep_curves {
                curves.push(ScaleCurve { scale_index, curve });
            }
        }
        Ok(PartitionResult { window: n, points, tests, curves })
    }

    /// Component attribution at grid frequency `frequency`.
    pub fn attribute(&self, frequency: f64, half_width: usize) -> Result<ComponentAttribution> {
        let bin = frequency_to_bin(frequency, self.cfg.window.window())?;
        let observed = dhat_components_at_bin(&self.spectra, bin, half_width)?;
        let outcomes = self.null.test_components(&observed, bin, half_width, &self.cfg.window, &self.cfg.bootstrap)?;
        Ok(ComponentAttribution::new(self.ts.channels(), bin, frequency, half_width, &outcomes, self.cfg.bootstrap.alpha))
    }
}

fn remaining_argmax(curve: &DiscrepancyCurve, candidates: &CandidateGrid) -> Option<(usize, f64)> {
    let mut best: Option<(usize, f64)> = None;
    for (&b, &v) in curve.bins.iter().zip(&curve.values) {
        if candidates.is_excluded(b) {
            continue;
        }
        match best {
            Some((_, bv)) if v <= bv => {}
            _ => best = Some((b, v)),
        }
    }
    best
}

/// Iterative search at a single half-width.
pub fn detect_single_scale(ts: &TimeSeries, half_width: usize, cfg: &DetectConfig) -> Result<PartitionResult> {
    let scales = ScaleSet::new(cfg.window.window(), vec![half_width])?;
    detect_multiscale(ts, &scales, cfg)
}

/// Multiscale search over ascending half-widths.
pub fn detect_multiscale(ts: &TimeSeries, scales: &ScaleSet, cfg: &DetectConfig) -> Result<PartitionResult> {
    Analysis::new(ts, cfg)?.detect(scales)
}

/// Largest width at which a point was accepted, or the largest width when
/// nothing was accepted.
pub fn select_w(result: &PartitionResult, scales: &ScaleSet) -> usize {
    result
        .points
        .iter()
        .map(|p| p.scale_index)
        .max()
        .map_or(scales.largest(), |i| scales.widths()[i])
}

/// Component p-values at one frequency with a Bonferroni mask.
#[derive(Debug, Clone, PartialEq)]
pub struct ComponentAttribution {
    pub channels: usize,
    pub bin: usize,
    pub frequency: f64,
    pub half_width: usize,
    /// Symmetric `p x p`, row-major.
    pub pvalues: Vec<f64>,
    /// Symmetric `p x p` observed component statistics.
    pub statistics: Vec<f64>,
    pub significant: Vec<bool>,
    /// Number of tests, `p (p + 1) / 2`.
    pub tests: usize,
    /// Per-test level `alpha / tests`.
    pub threshold: f64,
}

impl ComponentAttribution {
    fn new(channels: usize, bin: usize, frequency: f64, half_width: usize, outcomes: &[TestOutcome], alpha: f64) -> Self {
        let p = channels;
        let tests = p * (p + 1) / 2;
        let threshold = alpha / tests as f64;
        let mut pvalues = vec![0.0; p * p];
        let mut statistics = vec![0.0; p * p];
        for a in 0..p {
            for b in a..p {
                let o = outcomes[pair_index(p, a, b)];
                pvalues[a * p + b] = o.pvalue;
                pvalues[b * p + a] = o.pvalue;
                statistics[a * p + b] = o.statistic;
                statistics[b * p + a] = o.statistic;
            }
        }
        let significant = pvalues.iter().map(|&pv| pv <= threshold).collect();
        Self { channels, bin, frequency, half_width, pvalues, statistics, significant, tests, threshold }
    }

    pub fn pvalue(&self, a: usize, b: usize) -> f64 {
        self.pvalues[a * self.channels + b]
    }

    pub fn is_significant(&self, a: usize, b: usize) -> bool {
        self.significant[a * self.channels + b]
    }

    /// Significant `(a, b)` pairs with `a <= b`, zero-based.
    pub fn significant_pairs(&self) -> Vec<(usize, usize)> {
        let p = self.channels;
        (0..p).flat_map(|a| (a..p).map(move |b| (a, b))).filter(|&(a, b)| self.is_significant(a, b)).collect()
    }
}

/// Bootstrap p-values of every component at `frequency`, on one shared
/// ensemble, with Bonferroni adjustment over `p (p + 1) / 2` tests.
pub fn attribute_components(
    ts: &TimeSeries,
    frequency: f64,
    half_width: usize,
    cfg: &DetectConfig,
) -> Result<ComponentAttribution> {
    Analysis::new(ts, cfg)?.attribute(frequency, half_width)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simgen::{generate, Scheme, SchemeSpec};

    fn small_config(len: usize, resamples: usize, seed: u64) -> DetectConfig {
        let mut cfg = DetectConfig::for_length(len).unwrap();
        cfg.bootstrap = BootstrapConfig { resamples, alpha: 0.05, base_seed: seed };
        cfg.keep_curves = true;
        cfg
    }

    #[test]
    fn default_scales() {
        assert_eq!(ScaleSet::default_for(124).unwrap().widths(), &[15, 19, 23, 27, 31]);
        assert_eq!(ScaleSet::default_for(40).unwrap().widths(), &[5, 6, 8, 9, 10]);
        assert_eq!(ScaleSet::new(40, vec![6, 5, 6]).unwrap().widths(), &[5, 6]);
        assert!(ScaleSet::new(40, vec![11]).is_err());
        assert!(ScaleSet::from_divisors(124, 4, 4, 5).is_err());
        assert_eq!(ScaleSet::from_divisors(124, 10, 4, 5).unwrap().widths(), &[12, 17, 22, 26, 31]);
    }

    #[test]
    fn select_w_rules() {
        let scales = ScaleSet::new(124, vec![15, 19, 23, 27, 31]).unwrap();
        let point = |scale_index| PartitionPoint {
            bin: 20,
            frequency: 20.0 / 124.0,
            hertz: None,
            half_width: scales.widths()[scale_index],
            scale_index,
            pvalue: 0.0,
            statistic: 1.0,
            order: 0,
        };
        let mut r = PartitionResult { window: 124, points: vec![], tests: vec![], curves: vec![] };
        assert_eq!(select_w(&r, &scales), 31);
        r.points = vec![point(0)];
        assert_eq!(select_w(&r, &scales), 15);
        r.points = vec![point(0), point(2)];
        assert_eq!(select_w(&r, &scales), 23);
    }

    #[test]
    fn remaining_argmax_prefers_lowest_bin_on_ties() {
        let curve = DiscrepancyCurve { window: 32, half_width: 2, bins: vec![3, 4, 5, 6], values: vec![1.0, 5.0, 5.0, 5.0] };
        let mut g = CandidateGrid::new(32, 2).unwrap();
        assert_eq!(remaining_argmax(&curve, &g), Some((4, 5.0)));
        g.exclude(4);
        assert_eq!(remaining_argmax(&curve, &g), Some((5, 5.0)));
    }

    #[test]
    fn single_scale_equals_one_element_multiscale() {
        let ts = generate(&SchemeSpec::new(Scheme::Linear, 3, 500).unwrap(), 4).unwrap();
        let cfg = small_config(500, 30, 1);
        let w = 76 / 8;
        let a = detect_single_scale(&ts, w, &cfg).unwrap();
        let b = detect_multiscale(&ts, &ScaleSet::new(76, vec![w]).unwrap(), &cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn separation_and_exclusion() {
        let ts = generate(&SchemeSpec::new(Scheme::Sinusoidal, 4, 1000).unwrap(), 8).unwrap();
        let cfg = small_config(1000, 40, 3);
        let scales = ScaleSet::default_for(cfg.window.window()).unwrap();
        let r = detect_multiscale(&ts, &scales, &cfg).unwrap();
        assert_eq!(r, detect_multiscale(&ts, &scales, &cfg).unwrap());
        for (i, p) in r.points.iter().enumerate() {
            assert_eq!(p.order, i);
            for q in &r.points[..i] {
                if q.scale_index == p.scale_index {
                    assert!(p.bin.abs_diff(q.bin) > p.half_width);
                }
            }
        }
        // tests stop at the first rejection per scale
        for s in 0..scales.len() {
            let at: Vec<_> = r.tests.iter().filter(|t| t.scale_index == s).collect();
            if let Some(last) = at.last() {
                assert!(at[..at.len() - 1].iter().all(|t| t.accepted));
                let _ = last;
            }
        }
        assert_eq!(r.curves.len(), scales.len());
    }

    #[test]
    fn hertz_reporting() {
        let ts = generate(&SchemeSpec::new(Scheme::Linear, 2, 1000).unwrap(), 2)
            .unwrap()
            .with_sampling_rate(64.0)
            .unwrap();
        let cfg = small_config(1000, 20, 2);
        let r = detect_multiscale(&ts, &ScaleSet::default_for(124).unwrap(), &cfg).unwrap();
        for p in &r.points {
            assert_eq!(p.hertz, Some(p.frequency * 64.0));
        }
    }

    #[test]
    fn single_channel_attribution_uses_alpha() {
        let ts = generate(&SchemeSpec::new(Scheme::Linear, 1, 500).unwrap(), 1).unwrap();
        let cfg = small_config(500, 20, 0);
        let a = attribute_components(&ts, 0.25, 5, &cfg).unwrap();
        assert_eq!(a.tests, 1);
        assert_eq!(a.threshold, 0.05);
        assert_eq!(a.pvalues.len(), 1);
    }

    #[test]
    fn identical_channels_share_diagonal_pvalues() {
        let base = generate(&SchemeSpec::new(Scheme::Linear, 1, 500).unwrap(), 6).unwrap();
        let col = base.column(0);
        let ts = TimeSeries::from_columns(&[col.clone(), col.clone(), col]).unwrap();
        let cfg = small_config(500, 30, 4);
        let n = cfg.window.window();
        let a = attribute_components(&ts, 19.0 / n as f64, 9, &cfg).unwrap();
        for c in 1..3 {
            assert_eq!(a.pvalue(c, c), a.pvalue(0, 0));
        }
        for x in 0..3 {
            for y in 0..3 {
                assert_eq!(a.pvalue(x, y), a.pvalue(y, x));
                assert_eq!(a.is_significant(x, y), a.pvalue(x, y) <= a.threshold);
            }
        }
    }
}
