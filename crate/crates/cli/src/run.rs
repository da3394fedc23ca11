//! The four commands and their result documents.

use std::io::Write;
use std::path::Path;
use std::time::Instant;

use freqband::search::{select_w, Analysis, PartitionResult};
use freqband::simgen::{
    cell_label, generate, mean_sd, run_replication, table_cells, Amplitude, Band, BandSpec, ReplicationConfig,
    Scheme, SchemeSpec, TableStatistic,
};
use freqband::bootstrap::BootstrapConfig;
use freqband::TimeSeries;
use serde::{Deserialize, Serialize};

use crate::config::{check_alpha, check_positive, BenchConfig, ComponentsConfig, EffectiveConfig, RunConfig, SimulateConfig};
use crate::error::{CliError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointDoc {
    pub frequency: f64,
    pub hertz: Option<f64>,
    pub bin: usize,
    pub half_width: usize,
    pub pvalue: f64,
    pub statistic: f64,
    pub order: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestDoc {
    pub half_width: usize,
    pub iteration: usize,
    pub frequency: f64,
    pub statistic: f64,
    pub pvalue: f64,
    pub accepted: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveDoc {
    pub half_width: usize,
    pub frequencies: Vec<f64>,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectDoc {
    pub command: String,
    pub config: EffectiveConfig,
    pub k_hat: usize,
    pub bands: usize,
    pub selected_half_width: usize,
    pub points: Vec<PointDoc>,
    pub tests: Vec<TestDoc>,
    pub curves: Vec<CurveDoc>,
}

impl DetectDoc {
    fn new(config: EffectiveConfig, result: &PartitionResult, selected: usize) -> Self {
        let n = result.window as f64;
        let widths = &config.half_widths;
        Self {
            k_hat: result.k_hat(),
            bands: result.k_hat() + 1,
            selected_half_width: selected,
            points: result
                .points
                .iter()
                .map(|p| PointDoc {
                    frequency: p.frequency,
                    hertz: p.hertz,
                    bin: p.bin,
                    half_width: p.half_width,
                    pvalue: p.pvalue,
                    statistic: p.statistic,
                    order: p.order,
                })
                .collect(),
            tests: result
                .tests
                .iter()
                .map(|t| TestDoc {
                    half_width: widths[t.scale_index],
                    iteration: t.iteration,
                    frequency: t.bin as f64 / n,
                    statistic: t.outcome.statistic,
                    pvalue: t.outcome.pvalue,
                    accepted: t.accepted,
                })
                .collect(),
            curves: result
                .curves
                .iter()
                .map(|c| CurveDoc {
                    half_width: c.curve.half_width,
                    frequencies: c.curve.frequencies(),
                    values: c.curve.values.clone(),
                })
                .collect(),
            command: "detect".into(),
            config,
        }
    }
}

/// Multiscale detection on the configured input.
pub fn run_detect(cfg: &RunConfig) -> Result<DetectDoc> {
    let ts = cfg.load()?;
    detect_series(&ts, cfg)
}

pub fn detect_series(ts: &TimeSeries, cfg: &RunConfig) -> Result<DetectDoc> {
    let resolved = cfg.resolve(ts.len())?;
    let result = Analysis::new(ts, &resolved.detect)?.detect(&resolved.scales)?;
    let selected = select_w(&result, &resolved.scales);
    Ok(DetectDoc::new(EffectiveConfig::new(cfg, ts, &resolved), &result, selected))
}

/// Long-format curve table: `half_width,frequency,hertz,value`.
pub fn write_curves<W: Write>(doc: &DetectDoc, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let fail = |e: csv::Error| CliError::Data(format!("writing curves: {e}"));
    w.write_record(["half_width", "frequency", "hertz", "value"]).map_err(fail)?;
    let rate = doc.config.run.sampling_rate;
    for c in &doc.curves {
        for (f, v) in c.frequencies.iter().zip(&c.values) {
            let hz = rate.map(|r| (f * r).to_string()).unwrap_or_default();
            w.write_record([c.half_width.to_string(), f.to_string(), hz, v.to_string()]).map_err(fail)?;
        }
    }
    w.flush().map_err(|e| CliError::Data(format!("writing curves: {e}")))?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentsEntry {
    pub requested: f64,
    pub frequency: f64,
    pub hertz: Option<f64>,
    pub snap_distance: f64,
    pub bin: usize,
    pub half_width: usize,
    pub tests: usize,
    pub threshold: f64,
    /// Symmetric `p x p` matrix, one row per channel.
    pub pvalues: Vec<Vec<f64>>,
    pub significant: Vec<Vec<bool>>,
    /// Zero-based `(a, b)` with `a <= b`.
    pub significant_pairs: Vec<(usize, usize)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentsConfigDoc {
    #[serde(flatten)]
    pub effective: EffectiveConfig,
    pub omega: Vec<f64>,
    pub half_width: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentsDoc {
    pub command: String,
    pub config: ComponentsConfigDoc,
    pub channel_names: Option<Vec<String>>,
    pub results: Vec<ComponentsEntry>,
}

/// Component attribution at each requested frequency, snapped to the grid.
pub fn run_components(cfg: &ComponentsConfig) -> Result<ComponentsDoc> {
    let ts = cfg.run.load()?;
    components_series(&ts, cfg)
}

pub fn components_series(ts: &TimeSeries, cfg: &ComponentsConfig) -> Result<ComponentsDoc> {
    if cfg.omega.is_empty() {
        return Err(CliError::Usage("at least one --omega is required".into()));
    }
    let resolved = cfg.run.resolve(ts.len())?;
    let n = resolved.detect.window.window();
    let w = cfg.half_width.unwrap_or(resolved.scales.widths()[0]);
    let analysis = Analysis::new(ts, &resolved.detect)?;
    let p = ts.channels();
    let mut results = Vec::with_capacity(cfg.omega.len());
    for &requested in &cfg.omega {
        if !(requested > 0.0 && requested < 0.5) {
            return Err(CliError::Domain(format!("omega {requested} must lie in (0, 1/2)")));
        }
        let bin = (requested * n as f64).round() as usize;
        let frequency = bin as f64 / n as f64;
        let a = analysis.attribute(frequency, w)?;
        let rows = |f: &dyn Fn(usize, usize) -> bool| -> Vec<Vec<bool>> {
            (0..p).map(|x| (0..p).map(|y| f(x, y)).collect()).collect()
        };
        results.push(ComponentsEntry {
            requested,
            frequency,
            hertz: ts.sampling_rate().map(|r| frequency * r),
            snap_distance: (requested - frequency).abs(),
            bin,
            half_width: w,
            tests: a.tests,
            threshold: a.threshold,
            pvalues: (0..p).map(|x| (0..p).map(|y| a.pvalue(x, y)).collect()).collect(),
            significant: rows(&|x, y| a.is_significant(x, y)),
            significant_pairs: a.significant_pairs(),
        });
    }
    Ok(ComponentsDoc {
        command: "components".into(),
        config: ComponentsConfigDoc {
            effective: EffectiveConfig::new(&cfg.run, ts, &resolved),
            omega: cfg.omega.clone(),
            half_width: cfg.half_width,
        },
        channel_names: ts.names().map(<[String]>::to_vec),
        results,
    })
}

/// Serialisable mirror of [`Amplitude`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AmplitudeDoc {
    Constant { value: f64 },
    Linear { intercept: f64, slope: f64 },
    Sine { level: f64, amplitude: f64, rate: f64, phase: f64 },
    Cosine { level: f64, amplitude: f64, rate: f64, phase: f64 },
}

impl From<AmplitudeDoc> for Amplitude {
    fn from(a: AmplitudeDoc) -> Self {
        match a {
            AmplitudeDoc::Constant { value } => Amplitude::Constant(value),
            AmplitudeDoc::Linear { intercept, slope } => Amplitude::Linear { intercept, slope },
            AmplitudeDoc::Sine { level, amplitude, rate, phase } => Amplitude::Sine { level, amplitude, rate, phase },
            AmplitudeDoc::Cosine { level, amplitude, rate, phase } => {
                Amplitude::Cosine { level, amplitude, rate, phase }
            }
        }
    }
}

impl From<Amplitude> for AmplitudeDoc {
    fn from(a: Amplitude) -> Self {
        match a {
            Amplitude::Constant(value) => AmplitudeDoc::Constant { value },
            Amplitude::Linear { intercept, slope } => AmplitudeDoc::Linear { intercept, slope },
            Amplitude::Sine { level, amplitude, rate, phase } => AmplitudeDoc::Sine { level, amplitude, rate, phase },
            Amplitude::Cosine { level, amplitude, rate, phase } => {
                AmplitudeDoc::Cosine { level, amplitude, rate, phase }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandDoc {
    pub upper: f64,
    #[serde(default)]
    pub upper_inclusive: bool,
    pub amplitude: AmplitudeDoc,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandsDoc {
    pub bands: Vec<BandDoc>,
}

impl BandsDoc {
    pub fn to_spec(&self) -> Result<BandSpec> {
        let bands = self
            .bands
            .iter()
            .map(|b| Band { upper: b.upper, upper_inclusive: b.upper_inclusive, amplitude: b.amplitude.into() })
            .collect();
        Ok(BandSpec::new(bands)?)
    }

    pub fn from_spec(spec: &BandSpec) -> Self {
        Self {
            bands: spec
                .bands()
                .iter()
                .map(|b| BandDoc { upper: b.upper, upper_inclusive: b.upper_inclusive, amplitude: b.amplitude.into() })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceDoc {
    pub channel: usize,
    pub latent: usize,
    pub shift: usize,
}

/// Sidecar describing how a simulated file was made.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthDoc {
    pub command: String,
    pub config: SimulateConfig,
    pub truth: Vec<f64>,
    pub latents: Vec<BandsDoc>,
    pub sources: Vec<SourceDoc>,
}

fn scheme_of(cfg: &SimulateConfig) -> Result<Scheme> {
    if cfg.scheme.eq_ignore_ascii_case("custom") {
        let path = cfg
            .bands
            .as_ref()
            .ok_or_else(|| CliError::Usage("the custom scheme needs --bands <file>".into()))?;
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let doc: BandsDoc =
            serde_json::from_str(&text).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
        return Ok(Scheme::Custom(doc.to_spec()?));
    }
    Scheme::from_name(&cfg.scheme).map_err(|_| {
        CliError::Usage(format!("unknown scheme {:?}; valid: {}, custom", cfg.scheme, Scheme::NAMES.join(", ")))
    })
}

/// Generates a named or custom scheme.
pub fn run_simulate(cfg: &SimulateConfig) -> Result<(TimeSeries, TruthDoc)> {
    check_positive("--T", cfg.len)?;
    check_positive("--p", cfg.channels)?;
    let spec = SchemeSpec::new(scheme_of(cfg)?, cfg.channels, cfg.len)?;
    let ts = generate(&spec, cfg.seed)?;
    let truth = TruthDoc {
        command: "simulate".into(),
        config: cfg.clone(),
        truth: spec.truth(),
        latents: spec.latents().iter().map(BandsDoc::from_spec).collect(),
        sources: (0..cfg.channels)
            .map(|c| {
                let s = spec.source(c);
                SourceDoc { channel: c, latent: s.latent, shift: s.shift }
            })
            .collect(),
    };
    Ok((ts, truth))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicationDoc {
    pub index: usize,
    pub seed: u64,
    pub bands: usize,
    pub frequencies: Vec<f64>,
    pub correct: Option<bool>,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellDoc {
    pub label: String,
    pub scheme: String,
    pub channels: usize,
    pub len: usize,
    pub w_min_divisor: usize,
    pub radius: Option<f64>,
    pub reference: f64,
    pub reference_sd: Option<f64>,
    pub mean_bands: f64,
    pub sd_bands: Option<f64>,
    pub proportion: Option<f64>,
    pub proportion_se: Option<f64>,
    pub seconds: f64,
    pub replications: Vec<ReplicationDoc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchDoc {
    pub command: String,
    pub config: BenchConfig,
    pub statistic: String,
    pub cells: Vec<CellDoc>,
}

/// Monte Carlo replication of one of the benchmark tables.
pub fn run_bench(cfg: &BenchConfig) -> Result<BenchDoc> {
    if !(1..=4).contains(&cfg.table) {
        return Err(CliError::Usage(format!("--table must be 1, 2, 3 or 4, got {}", cfg.table)));
    }
    check_positive("--reps", cfg.reps)?;
    check_positive("--resamples", cfg.resamples)?;
    check_positive("--scales", cfg.scales)?;
    check_alpha(cfg.alpha)?;
    let (statistic, cells) = table_cells(cfg.table)?;
    let cells: Vec<_> = cells
        .into_iter()
        .filter(|c| cfg.scheme.as_ref().is_none_or(|s| s.eq_ignore_ascii_case(c.scheme)))
        .filter(|c| cfg.channels.is_none_or(|p| p == c.channels))
        .filter(|c| cfg.len.is_none_or(|t| t == c.len))
        .collect();
    if cells.is_empty() {
        return Err(CliError::Usage(format!("no cell of table {} matches the filters", cfg.table)));
    }
    let rep_cfg = ReplicationConfig {
        bootstrap: BootstrapConfig { resamples: cfg.resamples, alpha: cfg.alpha, base_seed: cfg.seed },
        scales: cfg.scales,
        w_max_divisor: cfg.w_max_divisor,
    };
    let mut docs = Vec::with_capacity(cells.len());
    for cell in &cells {
        let started = Instant::now();
        let mut reps = Vec::with_capacity(cfg.reps);
        for i in 0..cfg.reps {
            let t0 = Instant::now();
            let r = run_replication(cell, i, &rep_cfg)?;
            reps.push(ReplicationDoc {
                index: r.index,
                seed: r.seed,
                bands: r.bands,
                frequencies: r.frequencies,
                correct: r.correct,
                seconds: t0.elapsed().as_secs_f64(),
            });
        }
        let bands: Vec<f64> = reps.iter().map(|r| r.bands as f64).collect();
        let (mean_bands, sd_bands) = mean_sd(&bands);
        let proportion = cell.radius.map(|_| {
            reps.iter().filter(|r| r.correct == Some(true)).count() as f64 / reps.len() as f64
        });
        docs.push(CellDoc {
            label: cell_label(cell),
            scheme: cell.scheme.into(),
            channels: cell.channels,
            len: cell.len,
            w_min_divisor: cell.w_min_divisor,
            radius: cell.radius,
            reference: cell.reference,
            reference_sd: cell.reference_sd,
            mean_bands,
            sd_bands,
            proportion,
            proportion_se: proportion.map(|q| binomial_se(q, cfg.reps)),
            seconds: started.elapsed().as_secs_f64(),
            replications: reps,
        });
    }
    Ok(BenchDoc {
        command: "bench".into(),
        config: cfg.clone(),
        statistic: match statistic {
            TableStatistic::BandCount => "band_count".into(),
            TableStatistic::CorrectDetection => "correct_detection".into(),
        },
        cells: docs,
    })
}

/// Monte Carlo standard error `sqrt(q (1 - q) / reps)` of a proportion.
pub fn binomial_se(q: f64, reps: usize) -> f64 {
    (q * (1.0 - q) / reps as f64).sqrt()
}

/// Pretty JSON with a trailing newline, to `path` or standard output.
pub fn write_json<T: Serialize>(doc: &T, path: Option<&Path>) -> Result<()> {
    let mut text = serde_json::to_string_pretty(doc).map_err(|e| CliError::Data(format!("serialising: {e}")))?;
    text.push('\n');
    write_text(text.as_bytes(), path)
}

pub fn write_text(bytes: &[u8], path: Option<&Path>) -> Result<()> {
    match path {
        Some(p) => std::fs::write(p, bytes).map_err(|e| CliError::io(p, e)),
        None => std::io::stdout().write_all(bytes).map_err(|e| CliError::io("<stdout>", e)),
    }
}
