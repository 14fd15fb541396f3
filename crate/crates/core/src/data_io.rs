//! Loading, validating and splitting labelled multi-channel series.
//!
//! Two CSV layouts are supported:
//!
//! * `long_csv`: header `series_id,group,channel,t,value,label`, one row per
//!   `(series, channel, t)`. The `group` column may be omitted.
//! * `wide_csv`: header `series_id,group,label,c0_t0,c0_t1,...`, one row per
//!   series, values channel-major. An optional first line `# channels=C`
//!   declares the channel count; otherwise it is passed to the loader or
//!   read from the `c{c}_t{t}` column names.
//!
//! Labels are mapped to a dense 0-based alphabet in order of first
//! appearance in the file. An empty group falls back to the series id.

use std::collections::{BTreeSet, HashMap};
use std::fs;
use std::io::Write;
use std::path::Path;

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::rng::Xoshiro256StarStar;

#[derive(Debug, Clone, PartialEq)]
pub struct SeriesRecord {
    pub id: String,
    pub group: String,
    /// `T x C` samples.
    pub values: Array2<f64>,
    /// One label id per time step.
    pub labels: Vec<usize>,
}

impl SeriesRecord {
    pub fn len(&self) -> usize {
        self.values.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.values.nrows() == 0
    }

    pub fn n_channels(&self) -> usize {
        self.values.ncols()
    }
}

/// A validated collection of series sharing a channel count and label alphabet.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeriesDataset {
    series: Vec<SeriesRecord>,
    n_channels: usize,
    label_alphabet: Vec<String>,
}

impl TimeSeriesDataset {
    pub fn new(
        series: Vec<SeriesRecord>,
        n_channels: usize,
        label_alphabet: Vec<String>,
    ) -> Result<Self> {
        if n_channels == 0 {
            return Err(Error::Schema("channel count must be positive".into()));
        }
        let mut ids = BTreeSet::new();
        let mut alphabet_seen = BTreeSet::new();
        for label in &label_alphabet {
            if !alphabet_seen.insert(label.as_str()) {
                return Err(Error::Schema(format!("duplicate label '{label}' in alphabet")));
            }
        }
        for rec in &series {
            if !ids.insert(rec.id.as_str()) {
                return Err(Error::Schema(format!("duplicate series id '{}'", rec.id)));
            }
            if rec.n_channels() != n_channels {
                return Err(Error::Schema(format!(
                    "series '{}' has {} channels, expected {n_channels}",
                    rec.id,
                    rec.n_channels()
                )));
            }
            if rec.is_empty() {
                return Err(Error::Data(format!("series '{}' is empty", rec.id)));
            }
            if rec.labels.len() != rec.len() {
                return Err(Error::Schema(format!(
                    "series '{}' has {} labels for {} time steps",
                    rec.id,
                    rec.labels.len(),
                    rec.len()
                )));
            }
            if let Some(&bad) = rec.labels.iter().find(|&&l| l >= label_alphabet.len()) {
                return Err(Error::Schema(format!(
                    "series '{}' uses label id {bad} outside the alphabet",
                    rec.id
                )));
            }
            if rec.values.iter().any(|v| !v.is_finite()) {
                return Err(Error::Data(format!("series '{}' contains NaN/Inf", rec.id)));
            }
        }
        Ok(Self {
            series,
            n_channels,
            label_alphabet,
        })
    }

    pub fn series(&self) -> &[SeriesRecord] {
        &self.series
    }

    pub fn n_channels(&self) -> usize {
        self.n_channels
    }

    pub fn label_alphabet(&self) -> &[String] {
        &self.label_alphabet
    }

    pub fn n_labels(&self) -> usize {
        self.label_alphabet.len()
    }

    pub fn len(&self) -> usize {
        self.series.len()
    }

    pub fn is_empty(&self) -> bool {
        self.series.is_empty()
    }

    /// Distinct group keys, sorted lexicographically.
    pub fn groups(&self) -> Vec<String> {
        self.series
            .iter()
            .map(|r| r.group.clone())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect()
    }

    fn subset(&self, keep: impl Fn(&SeriesRecord) -> bool) -> Self {
        Self {
            series: self.series.iter().filter(|r| keep(r)).cloned().collect(),
            n_channels: self.n_channels,
            label_alphabet: self.label_alphabet.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DataFormat {
    LongCsv,
    WideCsv { channels: Option<usize> },
}

#[derive(Default)]
struct LabelInterner {
    alphabet: Vec<String>,
    index: HashMap<String, usize>,
}

impl LabelInterner {
    fn intern(&mut self, label: &str) -> usize {
        if let Some(&id) = self.index.get(label) {
            return id;
        }
        let id = self.alphabet.len();
        self.alphabet.push(label.to_string());
        self.index.insert(label.to_string(), id);
        id
    }
}

pub fn load_dataset(path: impl AsRef<Path>, format: DataFormat) -> Result<TimeSeriesDataset> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    match format {
        DataFormat::LongCsv => parse_long_csv(&text),
        DataFormat::WideCsv { channels } => parse_wide_csv(&text, channels),
    }
}

fn parse_f64(field: &str, line: u64) -> Result<f64> {
    let v: f64 = field.trim().parse().map_err(|_| Error::Parse {
        line,
        msg: format!("'{field}' is not a number"),
    })?;
    if !v.is_finite() {
        return Err(Error::Data(format!("non-finite sample '{field}' at line {line}")));
    }
    Ok(v)
}

fn parse_usize(field: &str, line: u64, what: &str) -> Result<usize> {
    field.trim().parse().map_err(|_| Error::Parse {
        line,
        msg: format!("{what} '{field}' is not a non-negative integer"),
    })
}

fn csv_reader(text: &str) -> csv::Reader<&[u8]> {
    csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(text.as_bytes())
}

fn record_line(rec: &csv::StringRecord, offset: u64) -> u64 {
    rec.position().map(|p| p.line()).unwrap_or(0) + offset
}

pub(crate) fn parse_long_csv(text: &str) -> Result<TimeSeriesDataset> {
    struct Partial {
        group: String,
        cells: HashMap<(usize, usize), (f64, usize, u64)>,
        max_channel: usize,
        max_t: usize,
    }

    let mut rdr = csv_reader(text);
    let header: Vec<String> = rdr
        .headers()
        .map_err(|e| Error::Parse { line: 1, msg: e.to_string() })?
        .iter()
        .map(str::to_string)
        .collect();
    let has_group = match header.as_slice() {
        [a, b, c, d, e, f]
            if a == "series_id" && b == "group" && c == "channel" && d == "t" && e == "value" && f == "label" =>
        {
            true
        }
        [a, c, d, e, f] if a == "series_id" && c == "channel" && d == "t" && e == "value" && f == "label" => {
            false
        }
        _ => {
            return Err(Error::Parse {
                line: 1,
                msg: format!("unexpected long_csv header {header:?}"),
            })
        }
    };

    let mut labels = LabelInterner::default();
    let mut order: Vec<String> = Vec::new();
    let mut partials: HashMap<String, Partial> = HashMap::new();

    for row in rdr.records() {
        let row = row.map_err(|e| Error::Parse {
            line: e.position().map(|p| p.line()).unwrap_or(0),
            msg: e.to_string(),
        })?;
        let line = record_line(&row, 0);
        if row.len() != header.len() {
            return Err(Error::Parse {
                line,
                msg: format!("expected {} fields, found {}", header.len(), row.len()),
            });
        }
        let mut fields = row.iter();
        let id = fields.next().unwrap_or_default().to_string();
        if id.is_empty() {
            return Err(Error::Parse { line, msg: "empty series_id".into() });
        }
        let group = if has_group { fields.next().unwrap_or_default() } else { "" };
        let group = if group.is_empty() { id.clone() } else { group.to_string() };
        let channel = parse_usize(fields.next().unwrap_or_default(), line, "channel")?;
        let t = parse_usize(fields.next().unwrap_or_default(), line, "t")?;
        let value = parse_f64(fields.next().unwrap_or_default(), line)?;
        let label = labels.intern(fields.next().unwrap_or_default());

        let entry = partials.entry(id.clone()).or_insert_with(|| {
            order.push(id.clone());
            Partial {
                group: group.clone(),
                cells: HashMap::new(),
                max_channel: 0,
                max_t: 0,
            }
        });
        if entry.group != group {
            return Err(Error::Data(format!(
                "series '{id}' changes group from '{}' to '{group}' at line {line}",
                entry.group
            )));
        }
        if entry.cells.insert((channel, t), (value, label, line)).is_some() {
            return Err(Error::Schema(format!(
                "duplicate sample (series '{id}', channel {channel}, t {t}) at line {line}"
            )));
        }
        entry.max_channel = entry.max_channel.max(channel);
        entry.max_t = entry.max_t.max(t);
    }

    let mut n_channels: Option<(usize, String)> = None;
    let mut series = Vec::with_capacity(order.len());
    for id in order {
        let p = partials.remove(&id).expect("series recorded in order");
        let c = p.max_channel + 1;
        let t_len = p.max_t + 1;
        match &n_channels {
            None => n_channels = Some((c, id.clone())),
            Some((expected, first)) if *expected != c => {
                return Err(Error::Schema(format!(
                    "series '{id}' has {c} channels but series '{first}' has {expected}"
                )))
            }
            _ => {}
        }
        if p.cells.len() != c * t_len {
            return Err(Error::Schema(format!(
                "series '{id}' is ragged: {} samples for {c} channels x {t_len} steps",
                p.cells.len()
            )));
        }
        let mut values = Array2::zeros((t_len, c));
        let mut step_labels = vec![0usize; t_len];
        for t in 0..t_len {
            for ch in 0..c {
                let &(v, l, line) = p.cells.get(&(ch, t)).ok_or_else(|| {
                    Error::Schema(format!("series '{id}' is missing channel {ch} at t {t}"))
                })?;
                values[[t, ch]] = v;
                if ch == 0 {
                    step_labels[t] = l;
                } else if step_labels[t] != l {
                    return Err(Error::Data(format!(
                        "series '{id}' has conflicting labels across channels at t {t} (line {line})"
                    )));
                }
            }
        }
        series.push(SeriesRecord {
            id,
            group: p.group,
            values,
            labels: step_labels,
        });
    }
    let c = n_channels.map(|(c, _)| c).unwrap_or(1);
    TimeSeriesDataset::new(series, c, labels.alphabet)
}

fn parse_channel_comment(line: &str) -> Result<Option<usize>> {
    let body = line.trim_start_matches('#').trim();
    match body.strip_prefix("channels=") {
        Some(v) => v
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| Error::Parse { line: 1, msg: format!("bad channel comment '{line}'") }),
        None => Ok(None),
    }
}

fn parse_value_column(name: &str) -> Option<(usize, usize)> {
    let rest = name.strip_prefix('c')?;
    let (c, t) = rest.split_once("_t")?;
    Some((c.parse().ok()?, t.parse().ok()?))
}

pub(crate) fn parse_wide_csv(text: &str, channels: Option<usize>) -> Result<TimeSeriesDataset> {
    let (body, offset, comment_channels) = match text.split_once('\n') {
        Some((first, rest)) if first.trim_start().starts_with('#') => {
            (rest, 1, parse_channel_comment(first)?)
        }
        _ => (text, 0, None),
    };
    let channels = match (channels, comment_channels) {
        (Some(a), Some(b)) if a != b => {
            return Err(Error::Schema(format!(
                "channel argument {a} disagrees with file comment channels={b}"
            )))
        }
        (a, b) => a.or(b),
    };

    let mut rdr = csv_reader(body);
    let header: Vec<String> = rdr
        .headers()
        .map_err(|e| Error::Parse { line: 1 + offset, msg: e.to_string() })?
        .iter()
        .map(str::to_string)
        .collect();
    let fixed = match header.iter().take(3).map(String::as_str).collect::<Vec<_>>().as_slice() {
        ["series_id", "group", "label"] => 3,
        ["series_id", "label", ..] => 2,
        _ => {
            return Err(Error::Parse {
                line: 1 + offset,
                msg: format!("unexpected wide_csv header {header:?}"),
            })
        }
    };
    let value_cols = &header[fixed..];
    if value_cols.is_empty() {
        return Err(Error::Schema("wide_csv has no value columns".into()));
    }
    let parsed: Option<Vec<(usize, usize)>> = value_cols.iter().map(|n| parse_value_column(n)).collect();
    let channels = match (channels, &parsed) {
        (Some(c), _) => c,
        (None, Some(cols)) => cols.iter().map(|&(c, _)| c).max().unwrap_or(0) + 1,
        (None, None) => {
            return Err(Error::Schema(
                "wide_csv channel count unknown: pass it explicitly or add '# channels=C'".into(),
            ))
        }
    };
    if channels == 0 || !value_cols.len().is_multiple_of(channels) {
        return Err(Error::Schema(format!(
            "{} value columns cannot be split into {channels} channels",
            value_cols.len()
        )));
    }
    let t_len = value_cols.len() / channels;
    if let Some(cols) = &parsed {
        for (k, &(c, t)) in cols.iter().enumerate() {
            if (c, t) != (k / t_len, k % t_len) {
                return Err(Error::Schema(format!(
                    "value column '{}' out of channel-major order for {channels} channels",
                    value_cols[k]
                )));
            }
        }
    }

    let mut labels = LabelInterner::default();
    let mut series = Vec::new();
    for row in rdr.records() {
        let row = row.map_err(|e| Error::Parse {
            line: e.position().map(|p| p.line()).unwrap_or(0) + offset,
            msg: e.to_string(),
        })?;
        let line = record_line(&row, offset);
        if row.len() != header.len() {
            return Err(Error::Schema(format!(
                "line {line}: expected {} fields, found {}",
                header.len(),
                row.len()
            )));
        }
        let id = row[0].to_string();
        if id.is_empty() {
            return Err(Error::Parse { line, msg: "empty series_id".into() });
        }
        let (group, label) = if fixed == 3 { (&row[1], &row[2]) } else { ("", &row[1]) };
        let group = if group.is_empty() { id.clone() } else { group.to_string() };
        let label = labels.intern(label);
        let mut values = Array2::zeros((t_len, channels));
        for (k, field) in row.iter().skip(fixed).enumerate() {
            values[[k % t_len, k / t_len]] = parse_f64(field, line)?;
        }
        series.push(SeriesRecord {
            id,
            group,
            values,
            labels: vec![label; t_len],
        });
    }
    TimeSeriesDataset::new(series, channels, labels.alphabet)
}

/// Writes `ds` as `wide_csv` with a `# channels=C` comment line. Every series
/// must share one length and carry a single label.
pub fn write_wide_csv(ds: &TimeSeriesDataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let text = wide_csv_string(ds)?;
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub(crate) fn wide_csv_string(ds: &TimeSeriesDataset) -> Result<String> {
    let c = ds.n_channels();
    let t_len = ds.series().first().map(SeriesRecord::len).unwrap_or(0);
    let mut out = Vec::new();
    let w = &mut out;
    let io = |e| Error::io("<buffer>", e);
    writeln!(w, "# channels={c}").map_err(io)?;
    write!(w, "series_id,group,label").map_err(io)?;
    for ch in 0..c {
        for t in 0..t_len {
            write!(w, ",c{ch}_t{t}").map_err(io)?;
        }
    }
    writeln!(w).map_err(io)?;
    for rec in ds.series() {
        if rec.len() != t_len {
            return Err(Error::Schema(format!(
                "wide_csv needs equal-length series; '{}' has {} steps, expected {t_len}",
                rec.id,
                rec.len()
            )));
        }
        let first = rec.labels[0];
        if rec.labels.iter().any(|&l| l != first) {
            return Err(Error::Schema(format!(
                "wide_csv needs one label per series; '{}' has several",
                rec.id
            )));
        }
        for field in [&rec.id, &rec.group, &ds.label_alphabet()[first]] {
            if field.contains([',', '"', '\n']) {
                return Err(Error::Schema(format!("field '{field}' needs quoting")));
            }
        }
        write!(w, "{},{},{}", rec.id, rec.group, ds.label_alphabet()[first]).map_err(io)?;
        for ch in 0..c {
            for t in 0..t_len {
                write!(w, ",{}", rec.values[[t, ch]]).map_err(io)?;
            }
        }
        writeln!(w).map_err(io)?;
    }
    Ok(String::from_utf8(out).expect("ascii output"))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitRatios {
    pub train: f64,
    pub val: f64,
    pub test: f64,
}

impl SplitRatios {
    pub fn new(train: f64, val: f64, test: f64) -> Result<Self> {
        let r = Self { train, val, test };
        r.validate()?;
        Ok(r)
    }

    fn as_array(&self) -> [f64; 3] {
        [self.train, self.val, self.test]
    }

    pub fn validate(&self) -> Result<()> {
        let a = self.as_array();
        if a.iter().any(|r| !r.is_finite() || *r < 0.0) {
            return Err(Error::Config(format!("split ratios must be non-negative, got {a:?}")));
        }
        let sum: f64 = a.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!("split ratios must sum to 1, got {sum}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetSplits {
    pub train: TimeSeriesDataset,
    pub val: TimeSeriesDataset,
    pub test: TimeSeriesDataset,
}

/// Number of groups per bucket: rounded cumulative cut points, then every
/// positive-ratio bucket is guaranteed at least one group (taken from the
/// largest bucket, lowest index on ties).
fn bucket_counts(n_groups: usize, ratios: &SplitRatios) -> Result<[usize; 3]> {
    let r = ratios.as_array();
    let nonzero = r.iter().filter(|&&x| x > 0.0).count();
    if n_groups < nonzero {
        return Err(Error::Config(format!(
            "{n_groups} groups cannot fill {nonzero} non-empty splits"
        )));
    }
    let mut cuts = [0usize; 3];
    let mut cum = 0.0;
    for (k, ratio) in r.iter().enumerate() {
        cum += ratio;
        cuts[k] = ((cum * n_groups as f64).round() as usize).min(n_groups);
    }
    cuts[2] = n_groups;
    let mut counts = [cuts[0], cuts[1] - cuts[0], cuts[2] - cuts[1]];
    for k in 0..3 {
        if r[k] == 0.0 && counts[k] > 0 {
            // Only possible through rounding of the final cut; give it back.
            let dest = (0..3).filter(|&j| r[j] > 0.0).max_by_key(|&j| (counts[j], usize::MAX - j));
            if let Some(dest) = dest {
                counts[dest] += counts[k];
                counts[k] = 0;
            }
        }
    }
    for k in 0..3 {
        if r[k] > 0.0 && counts[k] == 0 {
            let donor = (0..3)
                .max_by_key(|&j| (counts[j], usize::MAX - j))
                .expect("three buckets");
            counts[donor] -= 1;
            counts[k] += 1;
        }
    }
    Ok(counts)
}

/// Assigns whole groups to train/val/test. Groups are sorted, shuffled with the
/// pinned generator seeded by `seed`, and cut by cumulative ratio.
pub fn split_by_group(
    ds: &TimeSeriesDataset,
    ratios: SplitRatios,
    seed: u64,
) -> Result<DatasetSplits> {
    ratios.validate()?;
    let mut groups = ds.groups();
    let counts = bucket_counts(groups.len(), &ratios)?;
    let mut rng = Xoshiro256StarStar::seed_from_u64(seed);
    rng.shuffle(&mut groups);

    let mut bucket_of: HashMap<&str, usize> = HashMap::new();
    let mut start = 0;
    for (bucket, &count) in counts.iter().enumerate() {
        for g in &groups[start..start + count] {
            bucket_of.insert(g.as_str(), bucket);
        }
        start += count;
    }
    let pick = |b: usize| ds.subset(|r| bucket_of.get(r.group.as_str()) == Some(&b));
    Ok(DatasetSplits {
        train: pick(0),
        val: pick(1),
        test: pick(2),
    })
}
