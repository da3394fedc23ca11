//! Reference implementations and invariant checks shared by the property
//! tests and the acceptance runner.
#![allow(dead_code, clippy::neg_cmp_op_on_partial_ord)]

use std::f64::consts::PI;

use freqband::bootstrap::{psd_sqrt, tv_covariance, KernelConfig, TestOutcome};
use freqband::discrepancy::{dhat_at_bin, dhat_components_at_bin, pair_index};
use freqband::tvspec::{all_bins_spectra, demean, WindowConfig};
use freqband::TimeSeries;
use nalgebra::DMatrix;
use num_complex::Complex64;
use proptest::prelude::*;
use proptest::test_runner::TestCaseError;

/// Random multichannel data with a window and neighbourhood that fit it.
#[derive(Debug, Clone)]
pub struct Instance {
    pub ts: TimeSeries,
    pub window: usize,
    pub bin: usize,
    pub half_width: usize,
}

pub fn instance(max_len: usize, max_channels: usize) -> impl Strategy<Value = Instance> {
    (2usize..=4, 1..=max_channels)
        .prop_flat_map(move |(quarter, p)| {
            let window = 4 * quarter + 4;
            let lo = 2 * window;
            (Just(window), Just(p), lo..=max_len.max(lo))
        })
        .prop_flat_map(|(window, p, len)| {
            let values = prop::collection::vec(-5.0f64..5.0, len * p);
            let envelope = prop::collection::vec(0.2f64..3.0, p);
            (Just(window), Just(p), values, envelope, 1..=(window - 4) / 4)
        })
        .prop_flat_map(|(window, p, values, envelope, w)| {
            let bins = (w + 1)..=(window / 2 - 1 - w);
            (Just(window), Just(p), Just(values), Just(envelope), Just(w), bins)
        })
        .prop_map(|(window, p, mut values, envelope, half_width, bin)| {
            let len = values.len() / p;
            for (i, v) in values.iter_mut().enumerate() {
                let (t, c) = (i / p, i % p);
                // slow amplitude drift so the demeaned spectra are not pure noise
                *v *= envelope[c] * (1.0 + t as f64 / len as f64);
            }
            Instance { ts: TimeSeries::new(values, p).unwrap(), window, bin, half_width }
        })
}

/// Local periodogram matrices straight from the definition: direct windowed
/// sums, then time averages subtracted. Indexed `[time][bin][a * p + b]` for
/// bins `0..N/2`.
pub fn naive_demeaned(ts: &TimeSeries, window: usize) -> Vec<Vec<Vec<Complex64>>> {
    let p = ts.channels();
    let len = ts.len();
    let half = window / 2;
    let norm = 1.0 / (2.0 * PI * window as f64).sqrt();
    let times: Vec<usize> = (half..=len - half).collect();
    let mut out: Vec<Vec<Vec<Complex64>>> = times
        .iter()
        .map(|&t| {
            (0..half)
                .map(|k| {
                    let j: Vec<Complex64> = (0..p)
                        .map(|c| {
                            let mut acc = Complex64::new(0.0, 0.0);
                            for s in 0..window {
                                // one-based t, sample index t - N/2 + 1 + s
                                let x = ts.get(t - half + s, c);
                                let phase = -2.0 * PI * (k * s) as f64 / window as f64;
                                acc += x * Complex64::new(phase.cos(), phase.sin());
                            }
                            acc * norm
                        })
                        .collect();
                    let mut m = Vec::with_capacity(p * p);
                    for a in 0..p {
                        for b in 0..p {
                            m.push(j[a] * j[b].conj());
                        }
                    }
                    m
                })
                .collect()
        })
        .collect();
    let n = times.len() as f64;
    for k in 0..half {
        for e in 0..p * p {
            let mean = out.iter().map(|row| row[k][e]).sum::<Complex64>() / n;
            for row in out.iter_mut() {
                row[k][e] -= mean;
            }
        }
    }
    out
}

/// Double loop over time and offsets of squared entry differences; `entries`
/// selects which `(a, b)` contribute.
pub fn naive_dhat(
    g: &[Vec<Vec<Complex64>>],
    p: usize,
    bin: usize,
    half_width: usize,
    entries: &dyn Fn(usize, usize) -> bool,
) -> f64 {
    let mut total = 0.0;
    for row in g {
        let mut inner = 0.0;
        for k in 1..=half_width {
            for a in 0..p {
                for b in 0..p {
                    if entries(a, b) {
                        inner += (row[bin - k][a * p + b] - row[bin + k][a * p + b]).norm_sqr();
                    }
                }
            }
        }
        total += inner / half_width as f64;
    }
    total / g.len() as f64
}

fn relative_gap(x: f64, y: f64) -> f64 {
    (x - y).abs() / x.abs().max(y.abs()).max(f64::MIN_POSITIVE)
}

/// Optimised statistic against the reference loop; returns the relative gap.
pub fn oracle_gap(inst: &Instance) -> f64 {
    let g = demean(all_bins_spectra(&inst.ts, &WindowConfig::new(inst.window, 1).unwrap()).unwrap()).unwrap();
    let fast = dhat_at_bin(&g, inst.bin, inst.half_width).unwrap();
    let slow = naive_dhat(&naive_demeaned(&inst.ts, inst.window), inst.ts.channels(), inst.bin, inst.half_width, &|_, _| true);
    relative_gap(fast, slow)
}

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)*) => {
        if !$cond {
            return Err(TestCaseError::fail(format!($($fmt)*)));
        }
    };
}

/// Raw periodogram matrices are Hermitian and PSD, demeaned ones Hermitian,
/// and the kernel covariance symmetric PSD.
pub fn check_hermitian_psd(inst: &Instance) -> Result<(), TestCaseError> {
    let cfg = WindowConfig::new(inst.window, 1).unwrap();
    let raw = all_bins_spectra(&inst.ts, &cfg).unwrap();
    let p = inst.ts.channels();
    let nt = raw.time_grid().len();
    let scale = inst.ts.as_slice().iter().map(|v| v * v).sum::<f64>().max(1.0);
    for ti in [0, nt / 2, nt - 1] {
        let m = raw.matrix(ti, inst.bin).unwrap();
        for a in 0..p {
            for b in 0..p {
                ensure!((m[a * p + b] - m[b * p + a].conj()).norm() <= 1e-12 * scale, "raw not Hermitian");
            }
        }
        // rank one: x* M x = |x* J|^2 >= 0 for probe vectors
        for probe in 0..p {
            let x: Vec<f64> = (0..p).map(|c| if c == probe { 1.0 } else { 0.5 }).collect();
            let mut q = Complex64::new(0.0, 0.0);
            for a in 0..p {
                for b in 0..p {
                    q += x[a] * m[a * p + b] * x[b];
                }
            }
            ensure!(q.re >= -1e-10 * scale && q.im.abs() <= 1e-10 * scale, "raw not PSD: {q}");
        }
    }
    let g = demean(raw).unwrap();
    for ti in [0, nt - 1] {
        let m = g.matrix(ti, inst.bin).unwrap();
        for a in 0..p {
            for b in 0..p {
                ensure!((m[a * p + b] - m[b * p + a].conj()).norm() == 0.0, "demeaned not exactly Hermitian");
            }
        }
    }
    let k = KernelConfig::for_length(inst.ts.len()).unwrap();
    let cov = tv_covariance(&inst.ts, 0.5, &k).unwrap();
    ensure!((&cov - cov.transpose()).norm() == 0.0, "covariance not symmetric");
    let eig = cov.clone().symmetric_eigen();
    ensure!(eig.eigenvalues.min() >= -1e-10 * cov.norm(), "covariance not PSD");
    Ok(())
}

/// Scaling the data by `c` scales periodograms by `c^2` and the statistic by `c^4`.
pub fn check_scaling(inst: &Instance, c: f64) -> Result<(), TestCaseError> {
    let cfg = WindowConfig::new(inst.window, 1).unwrap();
    let g = demean(all_bins_spectra(&inst.ts, &cfg).unwrap()).unwrap();
    let gs = demean(all_bins_spectra(&inst.ts.scaled(c), &cfg).unwrap()).unwrap();
    let a = g.entry(0, inst.bin, 0, 0).unwrap();
    let b = gs.entry(0, inst.bin, 0, 0).unwrap();
    let tol = 1e-9 * (g.mean_matrix(inst.bin).unwrap().unwrap()[0].norm() + a.norm()) * c * c;
    ensure!((b - a * c * c).norm() <= tol.max(1e-300), "periodogram scaling {a} -> {b}");
    let d = dhat_at_bin(&g, inst.bin, inst.half_width).unwrap();
    let ds = dhat_at_bin(&gs, inst.bin, inst.half_width).unwrap();
    ensure!(relative_gap(ds, d * c.powi(4)) <= 1e-9, "statistic scaling {d} -> {ds}");
    Ok(())
}

/// Permuting channels leaves the statistic unchanged and permutes components.
pub fn check_permutation(inst: &Instance, rotation: usize) -> Result<(), TestCaseError> {
    let p = inst.ts.channels();
    let perm: Vec<usize> = (0..p).map(|c| (c + rotation) % p).rev().collect();
    let cfg = WindowConfig::new(inst.window, 1).unwrap();
    let g = demean(all_bins_spectra(&inst.ts, &cfg).unwrap()).unwrap();
    let gp = demean(all_bins_spectra(&inst.ts.permuted(&perm).unwrap(), &cfg).unwrap()).unwrap();
    let d = dhat_at_bin(&g, inst.bin, inst.half_width).unwrap();
    let dp = dhat_at_bin(&gp, inst.bin, inst.half_width).unwrap();
    ensure!(relative_gap(d, dp) <= 1e-10, "statistic changed under permutation {d} vs {dp}");
    let c = dhat_components_at_bin(&g, inst.bin, inst.half_width).unwrap();
    let cp = dhat_components_at_bin(&gp, inst.bin, inst.half_width).unwrap();
    for a in 0..p {
        for b in a..p {
            // new channel i holds old channel perm[i]
            let (x, y) = (perm[a].min(perm[b]), perm[a].max(perm[b]));
            let want = c[pair_index(p, x, y)];
            let got = cp[pair_index(p, a, b)];
            ensure!((want - got).abs() <= 1e-10 * d.max(1e-300), "component ({a},{b}) mismatch");
        }
    }
    Ok(())
}

/// Demeaned entries average to zero over the time grid.
pub fn check_demean_zero_mean(inst: &Instance) -> Result<(), TestCaseError> {
    let cfg = WindowConfig::new(inst.window, 1).unwrap();
    let g = demean(all_bins_spectra(&inst.ts, &cfg).unwrap()).unwrap();
    let p = inst.ts.channels();
    let nt = g.time_grid().len();
    let bins: Vec<usize> = g.bins().to_vec();
    for bin in bins {
        let scale = g.mean_matrix(bin).unwrap().unwrap().iter().map(|z| z.norm()).sum::<f64>().max(1e-12);
        for a in 0..p {
            for b in 0..p {
                let mut sum = Complex64::new(0.0, 0.0);
                for ti in 0..nt {
                    sum += g.entry(ti, bin, a, b).unwrap();
                }
                ensure!(sum.norm() / nt as f64 <= 1e-10 * scale, "bin {bin} entry ({a},{b}) mean {sum}");
            }
        }
    }
    Ok(())
}

/// Full statistic equals diagonal components plus twice the off-diagonal ones.
pub fn check_decomposition(inst: &Instance) -> Result<(), TestCaseError> {
    let cfg = WindowConfig::new(inst.window, 1).unwrap();
    let g = demean(all_bins_spectra(&inst.ts, &cfg).unwrap()).unwrap();
    let p = inst.ts.channels();
    let d = dhat_at_bin(&g, inst.bin, inst.half_width).unwrap();
    let c = dhat_components_at_bin(&g, inst.bin, inst.half_width).unwrap();
    let mut sum = 0.0;
    for a in 0..p {
        for b in a..p {
            sum += if a == b { 1.0 } else { 2.0 } * c[pair_index(p, a, b)];
        }
    }
    ensure!(relative_gap(d, sum) <= 1e-10, "decomposition {d} vs {sum}");
    Ok(())
}

/// Random symmetric PSD matrix of size `p` and rank at most `rank`.
pub fn psd_matrix() -> impl Strategy<Value = DMatrix<f64>> {
    (1usize..=6)
        .prop_flat_map(|p| (Just(p), 1..=p, prop::collection::vec(-3.0f64..3.0, p * p)))
        .prop_map(|(p, rank, v)| {
            let f = DMatrix::from_fn(p, rank, |i, j| v[i * p + j]);
            &f * f.transpose()
        })
}

pub fn check_psd_sqrt(m: &DMatrix<f64>) -> Result<(), TestCaseError> {
    let s = psd_sqrt(m).unwrap();
    ensure!((&s - s.transpose()).norm() <= 1e-12 * s.norm().max(1.0), "root not symmetric");
    let gap = (&s * &s - m).norm();
    ensure!(gap <= 1e-8 * m.norm().max(1.0), "reconstruction error {gap:e}");
    Ok(())
}

/// Bootstrap p-values are multiples of `1/R` in `[0, 1]` and count strict exceedances.
pub fn check_pvalue_lattice(observed: f64, ensemble: &[f64]) -> Result<(), TestCaseError> {
    let o = TestOutcome::from_ensemble(observed, ensemble);
    let r = ensemble.len();
    ensure!((0.0..=1.0).contains(&o.pvalue), "p-value {} outside [0, 1]", o.pvalue);
    let k = o.pvalue * r as f64;
    ensure!(k.round() == o.exceedances as f64 && (k - k.round()).abs() < 1e-9, "p-value {} off the 1/{r} lattice", o.pvalue);
    ensure!(o.exceedances == ensemble.iter().filter(|&&s| s > observed).count(), "wrong exceedance count");
    Ok(())
}

pub fn pvalue_case() -> impl Strategy<Value = (f64, Vec<f64>)> {
    (0.0f64..10.0, prop::collection::vec(prop_oneof![0.0f64..10.0, Just(5.0)], 1..150))
        .prop_map(|(o, e)| (if o > 9.0 { 5.0 } else { o }, e))
}
