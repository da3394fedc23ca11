use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use freqband::simgen::{generate, Scheme, SchemeSpec};
use freqband_cli::table::read_csv;
use serde_json::Value;
use tempfile::TempDir;

fn freqband(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_freqband")).args(args).output().expect("run freqband")
}

fn ok(args: &[&str]) -> Output {
    let out = freqband(args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn path(dir: &TempDir, name: &str) -> PathBuf {
    dir.path().join(name)
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn simulate(dir: &TempDir, scheme: &str, len: usize, p: usize, seed: u64) -> PathBuf {
    let out = path(dir, &format!("{scheme}-{len}-{p}-{seed}.csv"));
    ok(&["simulate", "--scheme", scheme, "--T", &len.to_string(), "--p", &p.to_string(), "--seed", &seed.to_string(), "--output", s(&out)]);
    out
}

#[test]
fn simulate_writes_shape_and_truth() {
    let dir = TempDir::new().unwrap();
    for (scheme, truth) in [("WN1B", vec![]), ("L3B", vec![0.15, 0.35]), ("M3B-2", vec![0.15, 0.35])] {
        let csv = simulate(&dir, scheme, 300, 5, 1);
        let ts = read_csv(&csv).unwrap();
        assert_eq!((ts.len(), ts.channels()), (300, 5));
        let doc = json(&csv.with_extension("truth.json"));
        let got: Vec<f64> = doc["truth"].as_array().unwrap().iter().map(|v| v.as_f64().unwrap()).collect();
        assert_eq!(got, truth);
        assert_eq!(doc["config"]["seed"], 1);
        assert_eq!(doc["sources"].as_array().unwrap().len(), 5);
    }
}

#[test]
fn simulated_csv_round_trips_exactly() {
    let dir = TempDir::new().unwrap();
    let csv = simulate(&dir, "S3B", 400, 3, 9);
    let back = read_csv(&csv).unwrap();
    let direct = generate(&SchemeSpec::new(Scheme::Sinusoidal, 3, 400).unwrap(), 9).unwrap();
    let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
    assert_eq!(bits(back.as_slice()), bits(direct.as_slice()));
}

#[test]
fn custom_bands_from_json() {
    let dir = TempDir::new().unwrap();
    let bands = path(&dir, "bands.json");
    std::fs::write(
        &bands,
        r#"{"bands": [
            {"upper": 0.2, "amplitude": {"kind": "linear", "intercept": 1, "slope": 4}},
            {"upper": 0.5, "amplitude": {"kind": "constant", "value": 1}}
        ]}"#,
    )
    .unwrap();
    let csv = path(&dir, "custom.csv");
    ok(&["simulate", "--scheme", "custom", "--bands", s(&bands), "--T", "200", "--p", "2", "--output", s(&csv)]);
    assert_eq!(json(&csv.with_extension("truth.json"))["truth"], serde_json::json!([0.2]));
    let out = freqband(&["simulate", "--scheme", "custom", "--T", "200"]);
    assert_eq!(code(&out), 2);
}

#[test]
fn detect_is_deterministic_and_replayable() {
    let dir = TempDir::new().unwrap();
    let csv = simulate(&dir, "L3B", 500, 3, 4);
    let (a, b, c) = (path(&dir, "a.json"), path(&dir, "b.json"), path(&dir, "c.json"));
    let curves = path(&dir, "curves.csv");
    let args = ["detect", "--input", s(&csv), "--resamples", "40", "--seed", "11", "--sampling-rate", "64"];
    ok(&[&args[..], &["--output", s(&a), "--curves", s(&curves)]].concat());
    ok(&[&args[..], &["--output", s(&b)]].concat());
    ok(&["detect", "--replay", s(&a), "--output", s(&c)]);
    let bytes = std::fs::read(&a).unwrap();
    assert_eq!(bytes, std::fs::read(&b).unwrap());
    assert_eq!(bytes, std::fs::read(&c).unwrap());

    let doc = json(&a);
    let config = &doc["config"];
    assert_eq!(config["window"], 76);
    assert_eq!(config["seed"], 11);
    assert_eq!(config["half_widths"], serde_json::json!([9, 12, 14, 17, 19]));
    assert_eq!(doc["k_hat"].as_u64().unwrap() as usize, doc["points"].as_array().unwrap().len());
    for p in doc["points"].as_array().unwrap() {
        let f = p["frequency"].as_f64().unwrap();
        assert!((p["hertz"].as_f64().unwrap() - f * 64.0).abs() < 1e-12);
        assert!(p["pvalue"].as_f64().unwrap() <= 0.05);
    }
    let curves_doc = doc["curves"].as_array().unwrap();
    assert_eq!(curves_doc.len(), 5);
    let rows = std::fs::read_to_string(&curves).unwrap();
    let total: usize = curves_doc.iter().map(|c| c["values"].as_array().unwrap().len()).sum();
    assert_eq!(rows.lines().count(), total + 1);
    assert!(rows.starts_with("half_width,frequency,hertz,value"));
}

#[test]
fn hertz_is_frequency_times_rate() {
    // 0.1875 cycles per sample at 64 samples per second
    assert_eq!(0.1875 * 64.0, 12.0);
    let dir = TempDir::new().unwrap();
    let csv = simulate(&dir, "L3B", 1000, 2, 3);
    let out = path(&dir, "hz.json");
    ok(&["detect", "--input", s(&csv), "--sampling-rate", "64", "--resamples", "30", "--output", s(&out)]);
    let doc = json(&out);
    assert!(!doc["points"].as_array().unwrap().is_empty());
    for p in doc["points"].as_array().unwrap() {
        assert!((p["hertz"].as_f64().unwrap() - p["frequency"].as_f64().unwrap() * 64.0).abs() < 1e-12);
    }
}

#[test]
fn single_channel_white_noise_finds_nothing() {
    let dir = TempDir::new().unwrap();
    let csv = simulate(&dir, "WN1B", 1000, 1, 0);
    let out = path(&dir, "wn.json");
    ok(&["detect", "--input", s(&csv), "--output", s(&out)]);
    let doc = json(&out);
    assert_eq!(doc["k_hat"], 0);
    assert_eq!(doc["points"], serde_json::json!([]));
}

#[test]
fn components_report() {
    let dir = TempDir::new().unwrap();
    let one = simulate(&dir, "L3B", 500, 1, 2);
    let out = path(&dir, "one.json");
    ok(&["components", "--input", s(&one), "--omega", "0.15", "--resamples", "30", "--output", s(&out)]);
    let doc = json(&out);
    let r = &doc["results"][0];
    assert_eq!(r["pvalues"].as_array().unwrap().len(), 1);
    assert_eq!(r["pvalues"][0].as_array().unwrap().len(), 1);
    assert_eq!(r["tests"], 1);

    let multi = simulate(&dir, "M3B-2", 1000, 10, 5);
    let out = path(&dir, "multi.json");
    ok(&["components", "--input", s(&multi), "--omega", "0.349", "--omega", "0.15", "--output", s(&out)]);
    let doc = json(&out);
    let r = &doc["results"][0];
    let freq = r["frequency"].as_f64().unwrap();
    assert_eq!(freq, 43.0 / 124.0);
    assert!((r["snap_distance"].as_f64().unwrap() - (0.349 - freq)).abs() < 1e-15);
    let threshold = r["threshold"].as_f64().unwrap();
    assert!((threshold - 0.05 / 55.0).abs() < 1e-18);
    let pv = r["pvalues"].as_array().unwrap();
    let mask = r["significant"].as_array().unwrap();
    for a in 0..10 {
        for b in 0..10 {
            let p = pv[a][b].as_f64().unwrap();
            assert_eq!(p, pv[b][a].as_f64().unwrap());
            assert_eq!(mask[a][b].as_bool().unwrap(), p <= threshold);
        }
    }
    // the 0.35 edge lives in channels 3..=10, so significance concentrates there
    let pairs: Vec<(u64, u64)> = r["significant_pairs"]
        .as_array()
        .unwrap()
        .iter()
        .map(|p| (p[0].as_u64().unwrap(), p[1].as_u64().unwrap()))
        .collect();
    let high = pairs.iter().filter(|&&(a, b)| a >= 2 && b >= 2).count() as f64 / 36.0;
    let low = pairs.iter().filter(|&&(a, b)| a < 2 && b < 2).count() as f64 / 3.0;
    assert!(high > low, "high {high} low {low}");
    assert_eq!(doc["results"].as_array().unwrap().len(), 2);
}

#[test]
fn bench_reports_cells() {
    let dir = TempDir::new().unwrap();
    let out = path(&dir, "bench.json");
    ok(&["bench", "--table", "3", "--reps", "1", "--scheme", "L3B", "--p", "10", "--T", "200", "--resamples", "20", "--output", s(&out)]);
    let doc = json(&out);
    assert_eq!(doc["statistic"], "correct_detection");
    let cells = doc["cells"].as_array().unwrap();
    assert_eq!(cells.len(), 1);
    let cell = &cells[0];
    assert_eq!(cell["reference"], 0.3);
    assert!(cell["sd_bands"].is_null());
    assert_eq!(cell["proportion_se"], 0.0);
    assert_eq!(cell["replications"].as_array().unwrap().len(), 1);
    assert!(cell["replications"][0]["seconds"].as_f64().unwrap() >= 0.0);

    let out = path(&dir, "bench2.json");
    ok(&["bench", "--table", "1", "--reps", "2", "--scheme", "WN1B", "--p", "10", "--T", "200", "--resamples", "20", "--output", s(&out)]);
    let cell = &json(&out)["cells"][0];
    assert!(cell["proportion"].is_null());
    assert!(cell["sd_bands"].is_number());
}

#[test]
fn exit_codes() {
    let dir = TempDir::new().unwrap();
    let ragged = path(&dir, "ragged.csv");
    std::fs::write(&ragged, "1,2\n3,4\n5\n").unwrap();
    let out = freqband(&["detect", "--input", s(&ragged)]);
    assert_eq!(code(&out), 3);
    assert!(String::from_utf8_lossy(&out.stderr).contains("row 3"));

    let bad = path(&dir, "bad.csv");
    std::fs::write(&bad, "a,b\n1,2\n3,oops\n").unwrap();
    let out = freqband(&["detect", "--input", s(&bad)]);
    assert_eq!(code(&out), 3);
    assert!(String::from_utf8_lossy(&out.stderr).contains("row 3, column 2"));

    let short = path(&dir, "short.csv");
    std::fs::write(&short, "1,2\n3,4\n5,6\n").unwrap();
    assert_eq!(code(&freqband(&["detect", "--input", s(&short)])), 4);

    assert_eq!(code(&freqband(&["detect", "--input", s(&path(&dir, "missing.csv"))])), 3);
    let out = freqband(&["simulate", "--scheme", "XYZ"]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("M3B-2"));
    assert_eq!(code(&freqband(&["bench", "--table", "7"])), 2);
    assert_eq!(code(&freqband(&["detect"])), 2);
    let csv = simulate(&dir, "L3B", 300, 2, 0);
    assert_eq!(code(&freqband(&["detect", "--input", s(&csv), "--alpha", "1.5"])), 2);
    assert_eq!(code(&freqband(&["detect", "--input", s(&csv), "--wmin-div", "4"])), 2);
    assert_eq!(code(&freqband(&["components", "--input", s(&csv), "--omega", "0.6"])), 4);
    assert_eq!(code(&freqband(&["--help"])), 0);
}

#[test]
fn header_names_are_kept() {
    let dir = TempDir::new().unwrap();
    let csv = simulate(&dir, "L3B", 400, 2, 6);
    let text = std::fs::read_to_string(&csv).unwrap();
    let named = path(&dir, "named.csv");
    std::fs::write(&named, text.replacen("x1,x2", "Oz,P7", 1)).unwrap();
    let out = path(&dir, "named.json");
    ok(&["components", "--input", s(&named), "--omega", "0.35", "--resamples", "20", "--output", s(&out)]);
    assert_eq!(json(&out)["channel_names"], serde_json::json!(["Oz", "P7"]));
}
