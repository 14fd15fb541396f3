//! CSV reports of an evaluation and the standalone accuracy-matrix reader
//! used by the rank tool.

use std::fs;
use std::path::{Path, PathBuf};

use crate::embed::Method;
use crate::error::{Error, Result};

use super::rank::{average_rank, TieRule};
use super::{EmbeddingDump, EvaluationReport};

/// Formats a real with 6 significant digits in the style of C's `%g`.
pub fn format_real(v: f64) -> String {
    if v.is_nan() {
        return "nan".into();
    }
    if v.is_infinite() {
        return if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if v == 0.0 {
        return "0".into();
    }
    let sci = format!("{v:.5e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-4..6).contains(&exp) {
        let decimals = (5 - exp).max(0) as usize;
        trim_zeros(format!("{v:.decimals$}"))
    } else {
        format!("{}e{}{:02}", trim_zeros(mantissa.to_string()), if exp < 0 { '-' } else { '+' }, exp.abs())
    }
}

fn trim_zeros(s: String) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

/// Classifier families of the reference benchmark that this harness does not
/// provide; summaries name them instead of reporting zeros.
pub const ABSENT_CLASSIFIERS: [&str; 2] = ["svm", "xgboost"];

/// Mean and population standard deviation of one dataset x embedding
/// across the classifiers that produced an accuracy.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub dataset: String,
    pub embedding: Method,
    pub mean: Option<f64>,
    pub std: Option<f64>,
    pub n_classifiers: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankRow {
    pub embedding: Method,
    pub competition: f64,
    pub first: f64,
}

/// Per-method average ranks plus the datasets they were computed over.
#[derive(Debug, Clone, PartialEq)]
pub struct RankTable {
    pub rows: Vec<RankRow>,
    pub datasets: Vec<String>,
}

impl EvaluationReport {
    pub fn summary(&self) -> Vec<SummaryRow> {
        let mut out = Vec::new();
        for d in &self.datasets {
            for &m in &self.methods {
                let accs: Vec<f64> = self
                    .cells
                    .iter()
                    .filter(|c| &c.dataset == d && c.embedding == m)
                    .filter_map(|c| c.accuracy)
                    .collect();
                let n = accs.len();
                let (mean, std) = if n == 0 {
                    (None, None)
                } else {
                    let mean = accs.iter().sum::<f64>() / n as f64;
                    let var = accs.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / n as f64;
                    (Some(mean), Some(var.sqrt()))
                };
                out.push(SummaryRow {
                    dataset: d.clone(),
                    embedding: m,
                    mean,
                    std,
                    n_classifiers: n,
                });
            }
        }
        out
    }

    /// Datasets x methods matrix of mean accuracies, keeping only datasets
    /// where every method has one.
    pub fn accuracy_matrix(&self) -> (Vec<String>, Vec<Vec<f64>>) {
        let summary = self.summary();
        let mut names = Vec::new();
        let mut rows = Vec::new();
        for (d, chunk) in self.datasets.iter().zip(summary.chunks(self.methods.len().max(1))) {
            if let Some(row) = chunk.iter().map(|s| s.mean).collect::<Option<Vec<f64>>>() {
                names.push(d.clone());
                rows.push(row);
            }
        }
        (names, rows)
    }

    pub fn ranks(&self) -> Result<RankTable> {
        let (datasets, acc) = self.accuracy_matrix();
        if acc.is_empty() {
            return Ok(RankTable {
                rows: Vec::new(),
                datasets,
            });
        }
        let comp = average_rank(&acc, TieRule::Competition)?;
        let first = average_rank(&acc, TieRule::First)?;
        let rows = self
            .methods
            .iter()
            .zip(comp.into_iter().zip(first))
            .map(|(&embedding, (competition, first))| RankRow {
                embedding,
                competition,
                first,
            })
            .collect();
        Ok(RankTable { rows, datasets })
    }
}

fn writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(path)
        .map_err(|e| csv_error(path, e))
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Data(format!("{}: {other:?}", path.display())),
    }
}

fn write_rows<I, R>(path: &Path, header: &[&str], rows: I) -> Result<()>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator<Item = String>,
{
    let mut w = writer(path)?;
    w.write_record(header).map_err(|e| csv_error(path, e))?;
    for row in rows {
        w.write_record(row.into_iter().collect::<Vec<_>>())
            .map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn opt_real(v: Option<f64>) -> String {
    v.map(format_real).unwrap_or_default()
}

pub fn write_embedding_dump(dump: &EmbeddingDump, path: &Path) -> Result<()> {
    let mut header = vec!["id".to_string(), "label".to_string()];
    header.extend((0..dump.vectors.ncols()).map(|i| format!("v{i}")));
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let rows = dump.ids.iter().zip(&dump.labels).zip(dump.vectors.rows()).map(|((id, label), v)| {
        let mut row = vec![id.clone(), label.clone()];
        row.extend(v.iter().map(|&x| format_real(x)));
        row
    });
    write_rows(path, &header, rows)
}

pub fn embedding_dump_name(method: Method, dataset: &str) -> String {
    format!("embeddings_{method}_{dataset}.csv")
}

/// Writes every report file into `dir`, creating it if needed, and returns
/// the paths written.
pub fn emit_reports(report: &EvaluationReport, dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut written = Vec::new();

    let path = dir.join("cells.csv");
    write_rows(
        &path,
        &["dataset", "embedding", "classifier", "dim", "params", "accuracy", "error"],
        report.cells.iter().map(|c| {
            [
                c.dataset.clone(),
                c.embedding.to_string(),
                c.classifier.to_string(),
                c.dim.to_string(),
                c.params.clone(),
                opt_real(c.accuracy),
                c.error.clone().unwrap_or_default(),
            ]
        }),
    )?;
    written.push(path);

    let path = dir.join("summary.csv");
    write_rows(
        &path,
        &["dataset", "embedding", "mean_accuracy", "std_accuracy", "n_classifiers", "absent_classifiers"],
        report.summary().into_iter().map(|s| {
            [
                s.dataset,
                s.embedding.to_string(),
                opt_real(s.mean),
                opt_real(s.std),
                s.n_classifiers.to_string(),
                ABSENT_CLASSIFIERS.join(";"),
            ]
        }),
    )?;
    written.push(path);

    let path = dir.join("ranks.csv");
    let ranks = report.ranks()?;
    let n = ranks.datasets.len().to_string();
    write_rows(
        &path,
        &["embedding", "avg_rank", "avg_rank_first", "n_datasets"],
        ranks.rows.iter().map(|r| {
            [
                r.embedding.to_string(),
                format_real(r.competition),
                format_real(r.first),
                n.clone(),
            ]
        }),
    )?;
    written.push(path);

    let path = dir.join("timings.csv");
    write_rows(
        &path,
        &[
            "dataset",
            "embedding",
            "classifier",
            "embed_train_seconds",
            "embed_infer_seconds",
            "fit_seconds",
        ],
        report.cells.iter().map(|c| {
            [
                c.dataset.clone(),
                c.embedding.to_string(),
                c.classifier.to_string(),
                format_real(c.embed_train_seconds),
                format_real(c.embed_infer_seconds),
                format_real(c.fit_seconds),
            ]
        }),
    )?;
    written.push(path);

    for dump in &report.embeddings {
        let path = dir.join(embedding_dump_name(dump.method, &dump.dataset));
        write_embedding_dump(dump, &path)?;
        written.push(path);
    }
    Ok(written)
}

/// A datasets x methods accuracy table: header `dataset,<method>...`, one
/// row per dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct AccuracyTable {
    pub methods: Vec<String>,
    pub datasets: Vec<String>,
    pub values: Vec<Vec<f64>>,
}

impl AccuracyTable {
    pub fn parse(text: &str) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .comment(Some(b'#'))
            .from_reader(text.as_bytes());
        let header = rdr
            .headers()
            .map_err(|e| Error::Parse { line: 1, msg: e.to_string() })?
            .clone();
        if header.len() < 2 {
            return Err(Error::Schema("accuracy table needs a dataset column and at least one method".into()));
        }
        let methods: Vec<String> = header.iter().skip(1).map(str::to_string).collect();
        let mut datasets = Vec::new();
        let mut values = Vec::new();
        for rec in rdr.records() {
            let rec = rec.map_err(|e| Error::Parse {
                line: e.position().map_or(0, |p| p.line()),
                msg: e.to_string(),
            })?;
            let line = rec.position().map_or(0, |p| p.line());
            let row = rec
                .iter()
                .skip(1)
                .map(|f| {
                    f.parse::<f64>().map_err(|_| Error::Parse {
                        line,
                        msg: format!("'{f}' is not a number"),
                    })
                })
                .collect::<Result<Vec<f64>>>()?;
            datasets.push(rec[0].to_string());
            values.push(row);
        }
        if values.is_empty() {
            return Err(Error::Data("accuracy table has no rows".into()));
        }
        Ok(AccuracyTable {
            methods,
            datasets,
            values,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        Self::parse(&fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
    }

    /// `method,avg_rank` CSV text.
    pub fn rank_csv(&self, rule: TieRule) -> Result<String> {
        let ranks = average_rank(&self.values, rule)?;
        let mut out = String::from("method,avg_rank\n");
        for (m, r) in self.methods.iter().zip(ranks) {
            out.push_str(&format!("{m},{}\n", format_real(r)));
        }
        Ok(out)
    }
}
