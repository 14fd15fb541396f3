use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use tsembed::bench::{emit_reports, run_grid, BenchConfig, DatasetConfig, FileFormat, SplitConfig};
use tsembed::classify::{ClassifierKind, ClassifierSpec};
use tsembed::data_io::{load_dataset, DataFormat};
use tsembed::embed::spectral::fft_embed;
use tsembed::embed::{EmbeddingSpec, Method};
use tsembed::preprocess::{segment_dataset, NormKind};
use tsembed::rng::Xoshiro256StarStar;

const TAU: usize = 64;
const CYCLES: [usize; 2] = [2, 5];

/// Long-format file: 6 subjects, each with 4 recordings of 256 samples per
/// class; class `c` is a tone with `CYCLES[c]` cycles per 64 samples.
fn write_two_tone(path: &Path, noise: f64, seed: u64) {
    let mut rng = Xoshiro256StarStar::seed_from_u64(seed);
    let mut text = String::from("series_id,group,channel,t,value,label\n");
    for subject in 0..6 {
        for (class, &cycles) in CYCLES.iter().enumerate() {
            for rec in 0..4 {
                let phase = rng.uniform(0.0, std::f64::consts::TAU);
                for t in 0..256 {
                    let clean = (std::f64::consts::TAU * cycles as f64 * t as f64 / TAU as f64 + phase).sin();
                    let v = clean + noise * rng.normal();
                    writeln!(text, "s{subject}-c{class}-r{rec},subj{subject},0,{t},{v},tone{cycles}").unwrap();
                }
            }
        }
    }
    fs::write(path, text).unwrap();
}

fn config(path: &Path, out: &Path, methods: &[Method], classifiers: &[ClassifierKind]) -> BenchConfig {
    BenchConfig {
        datasets: vec![DatasetConfig {
            name: "two-tone".into(),
            path: path.to_path_buf(),
            format: FileFormat::LongCsv,
            channels: None,
            tau: TAU,
            omega: 32,
            normalization: NormKind::Zscore,
            split: SplitConfig {
                train: 0.5,
                val: 0.0,
                test: 0.5,
            },
            val_path: None,
            test_path: None,
        }],
        embeddings: methods.iter().map(|&m| EmbeddingSpec::new(m)).collect(),
        classifiers: classifiers.iter().map(|&k| ClassifierSpec::new(k)).collect(),
        seed: 17,
        output_dir: out.to_path_buf(),
    }
}

#[test]
fn noiseless_tone_spectra_match_closed_form() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("clean.csv");
    write_two_tone(&path, 0.0, 1);
    let ds = load_dataset(&path, DataFormat::LongCsv).unwrap();
    let windows = segment_dataset(&ds, TAU, 32).unwrap();
    assert_eq!(windows.len(), 6 * 2 * 4 * 7);
    for w in &windows {
        let cycles: usize = ds.label_alphabet()[w.label][4..].parse().unwrap();
        let mag = fft_embed(w);
        for (k, m) in mag.iter().enumerate() {
            let want = if k == cycles { TAU as f64 / 2.0 } else { 0.0 };
            assert!((m - want).abs() < 1e-9, "bin {k}: {m} vs {want}");
        }
    }
}

#[test]
fn noisy_two_tone_fft_knn_separates_classes() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("noisy.csv");
    write_two_tone(&path, 0.5, 2);
    let cfg = config(&path, &dir.path().join("out"), &[Method::Fft], &[ClassifierKind::Knn]);
    let report = run_grid(&cfg).unwrap();
    let acc = report.cells[0].accuracy.unwrap();
    assert!(acc >= 0.95, "accuracy {acc}");
}

#[test]
fn reports_round_trip_through_files() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("noisy.csv");
    write_two_tone(&path, 0.5, 3);
    let out = dir.path().join("out");
    let cfg = config(&path, &out, &[Method::Fft, Method::Wavelet, Method::Tda], &[ClassifierKind::Gnb]);
    let report = run_grid(&cfg).unwrap();
    emit_reports(&report, &out).unwrap();

    let summary = fs::read_to_string(out.join("summary.csv")).unwrap();
    let rows: Vec<Vec<&str>> = summary.lines().skip(1).map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 3);
    // one classifier, so the spread across classifiers is zero
    assert!(rows.iter().all(|r| r[3] == "0" && r[4] == "1" && r[5] == "svm;xgboost"));

    let ranks = fs::read_to_string(out.join("ranks.csv")).unwrap();
    assert_eq!(ranks.lines().count(), 4);
    assert!(ranks.lines().skip(1).all(|l| l.ends_with(",1")));

    let dump = fs::read_to_string(out.join("embeddings_wavelet_two-tone.csv")).unwrap();
    let header: Vec<&str> = dump.lines().next().unwrap().split(',').collect();
    assert_eq!(&header[..3], &["id", "label", "v0"]);
    assert_eq!(dump.lines().count(), 1 + 6 * 2 * 4 * 7);
    assert!(dump.lines().skip(1).all(|l| l.split(',').nth(1).unwrap().starts_with("tone")));
}

#[test]
fn config_file_with_unknown_key_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("cfg.json");
    fs::write(
        &path,
        r#"{"datasets":[{"name":"a","path":"a.csv","format":"long_csv","tau":8,"window":3}],
            "embeddings":[{"method":"fft"}],"classifiers":[{"kind":"knn"}],"output_dir":"o"}"#,
    )
    .unwrap();
    assert!(BenchConfig::load(&path).is_err());
}
