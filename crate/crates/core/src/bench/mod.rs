//! The benchmark grid: every configured dataset x embedding x classifier,
//! with per-cell seeding so results do not depend on execution order.

pub mod rank;
pub mod report;

use std::collections::HashSet;
use std::path::{Path, PathBuf};
use std::time::Instant;

use log::{info, warn};
use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classify::{self, ClassifierKind, ClassifierSpec, LabeledMatrix};
use crate::data_io::{load_dataset, split_by_group, DataFormat, SplitRatios, TimeSeriesDataset};
use crate::embed::{Embedder, EmbeddingSpec, Method};
use crate::error::{Error, Result};
use crate::preprocess::{apply_all, fit_normalizer, segment_dataset, NormKind, Window};
use crate::rng::stable_hash;

pub use rank::{average_rank, rank_row, TieRule};
pub use report::{emit_reports, format_real};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FileFormat {
    LongCsv,
    WideCsv,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitConfig {
    pub train: f64,
    pub val: f64,
    pub test: f64,
}

impl Default for SplitConfig {
    fn default() -> Self {
        SplitConfig {
            train: 0.7,
            val: 0.15,
            test: 0.15,
        }
    }
}

fn default_norm() -> NormKind {
    NormKind::Zscore
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetConfig {
    pub name: String,
    pub path: PathBuf,
    pub format: FileFormat,
    /// Channel count for wide CSV files without a `# channels=` line.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub channels: Option<usize>,
    pub tau: usize,
    #[serde(default)]
    pub omega: usize,
    #[serde(default = "default_norm")]
    pub normalization: NormKind,
    #[serde(default)]
    pub split: SplitConfig,
    /// Pre-split files; when `test_path` is set `path` is the training set
    /// and `split` is ignored.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub val_path: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub test_path: Option<PathBuf>,
}

impl DatasetConfig {
    fn data_format(&self) -> DataFormat {
        match self.format {
            FileFormat::LongCsv => DataFormat::LongCsv,
            FileFormat::WideCsv => DataFormat::WideCsv {
                channels: self.channels,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchConfig {
    pub datasets: Vec<DatasetConfig>,
    pub embeddings: Vec<EmbeddingSpec>,
    pub classifiers: Vec<ClassifierSpec>,
    #[serde(default)]
    pub seed: u64,
    pub output_dir: PathBuf,
}

impl BenchConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: BenchConfig = serde_json::from_str(text).map_err(|e| Error::Parse {
            line: e.line() as u64,
            msg: e.to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a JSON config; relative paths inside it resolve against the
    /// config file's directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_json(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        let resolve = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        for d in &mut cfg.datasets {
            resolve(&mut d.path);
            d.val_path.as_mut().map(resolve);
            d.test_path.as_mut().map(resolve);
        }
        resolve(&mut cfg.output_dir);
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.datasets.is_empty() || self.embeddings.is_empty() || self.classifiers.is_empty() {
            return Err(Error::Config(
                "datasets, embeddings and classifiers must all be nonempty".into(),
            ));
        }
        let mut names = HashSet::new();
        for d in &self.datasets {
            if !names.insert(d.name.as_str()) {
                return Err(Error::Config(format!("duplicate dataset name '{}'", d.name)));
            }
            if d.tau == 0 || d.omega >= d.tau {
                return Err(Error::Config(format!(
                    "dataset '{}': need tau > omega >= 0, got tau {} omega {}",
                    d.name, d.tau, d.omega
                )));
            }
            if d.val_path.is_some() && d.test_path.is_none() {
                return Err(Error::Config(format!("dataset '{}': val_path requires test_path", d.name)));
            }
            if d.test_path.is_none() {
                SplitRatios::new(d.split.train, d.split.val, d.split.test)?;
            }
        }
        let mut methods = HashSet::new();
        for e in &self.embeddings {
            e.validate()?;
            if !methods.insert(e.method) {
                return Err(Error::Config(format!("embedding '{}' listed twice", e.method)));
            }
        }
        let mut kinds = HashSet::new();
        for c in &self.classifiers {
            c.validate()?;
            if !kinds.insert(c.kind) {
                return Err(Error::Config(format!("classifier '{}' listed twice", c.kind)));
            }
        }
        Ok(())
    }

    pub fn dataset(&self, name: &str) -> Result<&DatasetConfig> {
        self.datasets
            .iter()
            .find(|d| d.name == name)
            .ok_or_else(|| Error::Config(format!("no dataset named '{name}' in config")))
    }

    pub fn embedding(&self, method: Method) -> Result<&EmbeddingSpec> {
        self.embeddings
            .iter()
            .find(|e| e.method == method)
            .ok_or_else(|| Error::Config(format!("no embedding '{method}' in config")))
    }
}

/// Normalised windows of one dataset's three splits.
#[derive(Debug, Clone)]
pub struct PreparedDataset {
    pub name: String,
    pub label_alphabet: Vec<String>,
    pub train: Vec<Window>,
    pub val: Vec<Window>,
    pub test: Vec<Window>,
}

/// Relabels `ds` against `alphabet`, appending unseen label names.
fn align_labels(ds: &TimeSeriesDataset, alphabet: &mut Vec<String>) -> Result<TimeSeriesDataset> {
    let map: Vec<usize> = ds
        .label_alphabet()
        .iter()
        .map(|name| match alphabet.iter().position(|a| a == name) {
            Some(i) => i,
            None => {
                alphabet.push(name.clone());
                alphabet.len() - 1
            }
        })
        .collect();
    let series = ds
        .series()
        .iter()
        .map(|s| {
            let mut s = s.clone();
            s.labels.iter_mut().for_each(|l| *l = map[*l]);
            s
        })
        .collect();
    TimeSeriesDataset::new(series, ds.n_channels(), alphabet.clone())
}

/// Loads, splits, segments and normalises one dataset. The normaliser is
/// fitted on training windows only.
pub fn prepare_dataset(d: &DatasetConfig, seed: u64) -> Result<PreparedDataset> {
    let wrap = |e: Error| Error::Dataset {
        name: d.name.clone(),
        source: Box::new(e),
    };
    let inner = || -> Result<PreparedDataset> {
        let main = load_dataset(&d.path, d.data_format())?;
        let (train, val, test, alphabet) = match &d.test_path {
            Some(test_path) => {
                let mut alphabet = main.label_alphabet().to_vec();
                let test = align_labels(&load_dataset(test_path, d.data_format())?, &mut alphabet)?;
                let val = match &d.val_path {
                    Some(p) => Some(align_labels(&load_dataset(p, d.data_format())?, &mut alphabet)?),
                    None => None,
                };
                (main, val, test, alphabet)
            }
            None => {
                let ratios = SplitRatios::new(d.split.train, d.split.val, d.split.test)?;
                let s = split_by_group(&main, ratios, stable_hash(seed, &[&d.name, "split"]))?;
                let alphabet = main.label_alphabet().to_vec();
                (s.train, Some(s.val), s.test, alphabet)
            }
        };
        let train_w = segment_dataset(&train, d.tau, d.omega)?;
        if train_w.is_empty() {
            return Err(Error::Data(format!("no training windows of length {}", d.tau)));
        }
        let norm = fit_normalizer(&train_w, d.normalization)?;
        let val_w = match &val {
            Some(v) => segment_dataset(v, d.tau, d.omega)?,
            None => Vec::new(),
        };
        let test_w = segment_dataset(&test, d.tau, d.omega)?;
        if test_w.is_empty() {
            return Err(Error::Data(format!("no test windows of length {}", d.tau)));
        }
        Ok(PreparedDataset {
            name: d.name.clone(),
            label_alphabet: alphabet,
            train: apply_all(&norm, &train_w)?,
            val: apply_all(&norm, &val_w)?,
            test: apply_all(&norm, &test_w)?,
        })
    };
    inner().map_err(wrap)
}

/// Wall time of fitting plus embedding the training split, and of embedding
/// the test split, each measured once.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct CellTiming {
    pub train_seconds: f64,
    pub infer_seconds: f64,
}

pub fn time_cell<A, B>(fit: impl FnOnce() -> A, infer: impl FnOnce(&A) -> B) -> (A, B, CellTiming) {
    let t0 = Instant::now();
    let a = fit();
    let train_seconds = t0.elapsed().as_secs_f64();
    let t1 = Instant::now();
    let b = infer(&a);
    let infer_seconds = t1.elapsed().as_secs_f64();
    (
        a,
        b,
        CellTiming {
            train_seconds,
            infer_seconds,
        },
    )
}

/// Embedded windows of every split for one dataset and method.
#[derive(Debug, Clone)]
pub struct EmbeddingDump {
    pub dataset: String,
    pub method: Method,
    pub ids: Vec<String>,
    pub labels: Vec<String>,
    pub vectors: Array2<f64>,
}

struct EmbeddedSplits {
    train: Array2<f64>,
    val: Array2<f64>,
    test: Array2<f64>,
    timing: CellTiming,
}

fn embed_splits(
    spec: &EmbeddingSpec,
    data: &PreparedDataset,
    seed: u64,
) -> Result<EmbeddedSplits> {
    let (fitted, test, timing) = time_cell(
        || -> Result<(Embedder, Array2<f64>)> {
            let e = Embedder::fit(spec, &data.train, seed)?;
            let train = e.transform(&data.train)?;
            Ok((e, train))
        },
        |fitted| fitted.as_ref().ok().map(|(e, _)| e.transform(&data.test)),
    );
    let (embedder, train) = fitted?;
    let test = test.expect("inference runs after a successful fit")?;
    let val = if data.val.is_empty() {
        Array2::zeros((0, train.ncols()))
    } else {
        embedder.transform(&data.val)?
    };
    if train.iter().chain(test.iter()).chain(val.iter()).any(|v| !v.is_finite()) {
        return Err(Error::Numeric(format!("{} produced non-finite features", spec.method)));
    }
    Ok(EmbeddedSplits {
        train,
        val,
        test,
        timing,
    })
}

fn window_labels(w: &[Window]) -> Vec<usize> {
    w.iter().map(|w| w.label).collect()
}

fn dump_of(data: &PreparedDataset, method: Method, e: &EmbeddedSplits) -> EmbeddingDump {
    let windows = data.train.iter().chain(&data.val).chain(&data.test);
    let rows = e.train.nrows() + e.val.nrows() + e.test.nrows();
    let mut vectors = Array2::zeros((rows, e.train.ncols()));
    let mut r = 0;
    for block in [&e.train, &e.val, &e.test] {
        for row in block.rows() {
            vectors.row_mut(r).assign(&row);
            r += 1;
        }
    }
    EmbeddingDump {
        dataset: data.name.clone(),
        method,
        ids: windows.clone().map(Window::key).collect(),
        labels: windows.map(|w| data.label_alphabet[w.label].clone()).collect(),
        vectors,
    }
}

/// One (dataset, embedding, classifier) result. `accuracy` is `None` when
/// `error` is set.
#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    pub dataset: String,
    pub embedding: Method,
    pub classifier: ClassifierKind,
    pub dim: usize,
    pub params: String,
    pub accuracy: Option<f64>,
    pub error: Option<String>,
    pub fit_seconds: f64,
    pub embed_train_seconds: f64,
    pub embed_infer_seconds: f64,
}

#[derive(Debug, Clone)]
pub struct EvaluationReport {
    pub datasets: Vec<String>,
    pub methods: Vec<Method>,
    pub classifiers: Vec<ClassifierKind>,
    pub cells: Vec<Cell>,
    pub embeddings: Vec<EmbeddingDump>,
}

pub fn cell_seed(master: u64, dataset: &str, method: Method, classifier: ClassifierKind) -> u64 {
    stable_hash(master, &[dataset, method.name(), classifier.name()])
}

fn run_classifier(
    spec: &ClassifierSpec,
    e: &EmbeddedSplits,
    data: &PreparedDataset,
    seed: u64,
) -> Result<(f64, String, f64)> {
    let train = LabeledMatrix::new(e.train.clone(), window_labels(&data.train))?;
    let val = if data.val.is_empty() {
        None
    } else {
        Some(LabeledMatrix::new(e.val.clone(), window_labels(&data.val))?)
    };
    let t0 = Instant::now();
    let params = classify::select_params(spec.kind, &spec.candidates(), &train, val.as_ref(), seed)?;
    let model = classify::fit(spec.kind, &train, &params, seed)?;
    let fit_seconds = t0.elapsed().as_secs_f64();
    let pred = model.predict(e.test.view())?;
    let acc = classify::accuracy(&pred, &window_labels(&data.test))?;
    let params_json = serde_json::to_string(&params).map_err(|e| Error::Data(e.to_string()))?;
    Ok((acc, params_json, fit_seconds))
}

fn evaluate_dataset(
    cfg: &BenchConfig,
    data: &PreparedDataset,
    cells: &mut Vec<Cell>,
    dumps: &mut Vec<EmbeddingDump>,
) {
    for spec in &cfg.embeddings {
        let embed_seed = stable_hash(cfg.seed, &[&data.name, spec.method.name()]);
        let embedded = embed_splits(spec, data, embed_seed);
        match &embedded {
            Ok(e) => {
                info!(
                    "{} / {}: d = {}, embed {:.3}s + {:.3}s",
                    data.name,
                    spec.method,
                    e.train.ncols(),
                    e.timing.train_seconds,
                    e.timing.infer_seconds
                );
                dumps.push(dump_of(data, spec.method, e));
            }
            Err(err) => warn!("{} / {}: {err}", data.name, spec.method),
        }
        let row: Vec<Cell> = cfg
            .classifiers
            .par_iter()
            .map(|c| {
                let mut cell = Cell {
                    dataset: data.name.clone(),
                    embedding: spec.method,
                    classifier: c.kind,
                    dim: 0,
                    params: String::new(),
                    accuracy: None,
                    error: None,
                    fit_seconds: 0.0,
                    embed_train_seconds: 0.0,
                    embed_infer_seconds: 0.0,
                };
                match &embedded {
                    Ok(e) => {
                        cell.dim = e.train.ncols();
                        cell.embed_train_seconds = e.timing.train_seconds;
                        cell.embed_infer_seconds = e.timing.infer_seconds;
                        let seed = cell_seed(cfg.seed, &data.name, spec.method, c.kind);
                        match run_classifier(c, e, data, seed) {
                            Ok((acc, params, secs)) => {
                                cell.accuracy = Some(acc);
                                cell.params = params;
                                cell.fit_seconds = secs;
                            }
                            Err(err) => cell.error = Some(err.to_string()),
                        }
                    }
                    Err(err) => cell.error = Some(format!("embedding failed: {err}")),
                }
                cell
            })
            .collect();
        cells.extend(row);
    }
}

/// Runs the full grid. Dataset load failures abort with the dataset named;
/// failures inside a cell are recorded in that cell.
pub fn run_grid(cfg: &BenchConfig) -> Result<EvaluationReport> {
    cfg.validate()?;
    let mut cells = Vec::new();
    let mut dumps = Vec::new();
    for d in &cfg.datasets {
        let data = prepare_dataset(d, cfg.seed)?;
        info!(
            "{}: {} train / {} val / {} test windows",
            d.name,
            data.train.len(),
            data.val.len(),
            data.test.len()
        );
        evaluate_dataset(cfg, &data, &mut cells, &mut dumps);
    }
    Ok(EvaluationReport {
        datasets: cfg.datasets.iter().map(|d| d.name.clone()).collect(),
        methods: cfg.embeddings.iter().map(|e| e.method).collect(),
        classifiers: cfg.classifiers.iter().map(|c| c.kind).collect(),
        cells,
        embeddings: dumps,
    })
}

/// Fits one embedding on one dataset and embeds every split.
pub fn embed_dataset(cfg: &BenchConfig, dataset: &str, method: Method) -> Result<EmbeddingDump> {
    let d = cfg.dataset(dataset)?;
    let spec = cfg.embedding(method)?;
    let data = prepare_dataset(d, cfg.seed)?;
    let e = embed_splits(spec, &data, stable_hash(cfg.seed, &[&data.name, method.name()]))?;
    Ok(dump_of(&data, method, &e))
}
