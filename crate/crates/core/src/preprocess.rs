//! Windowing, label aggregation and train-fitted normalisation.

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::data_io::{SeriesRecord, TimeSeriesDataset};
use crate::error::{shape_mismatch, Error, Result};

/// A `tau x C` slice of one series with a single aggregated label.
#[derive(Debug, Clone, PartialEq)]
pub struct Window {
    pub source_id: String,
    pub start: usize,
    pub values: Array2<f64>,
    pub label: usize,
}

impl Window {
    pub fn tau(&self) -> usize {
        self.values.nrows()
    }

    pub fn n_channels(&self) -> usize {
        self.values.ncols()
    }

    /// `source_id@start`, unique within one split.
    pub fn key(&self) -> String {
        format!("{}@{}", self.source_id, self.start)
    }

    /// Channel-major flattening (`c0_t0, c0_t1, ..., c1_t0, ...`), the same
    /// layout wide CSV files use.
    pub fn flatten(&self) -> Vec<f64> {
        self.values.t().iter().copied().collect()
    }

    pub fn channel(&self, c: usize) -> Vec<f64> {
        self.values.column(c).to_vec()
    }
}

/// Cuts `rec` into windows starting at `0, tau - omega, 2 (tau - omega), ...`.
/// Trailing samples that do not fill a window are dropped; a series shorter
/// than `tau` yields no windows.
pub fn segment(rec: &SeriesRecord, tau: usize, omega: usize) -> Result<Vec<Window>> {
    if tau == 0 {
        return Err(Error::Config("window size must be positive".into()));
    }
    if omega >= tau {
        return Err(Error::Config(format!("overlap {omega} must be smaller than window {tau}")));
    }
    let stride = tau - omega;
    let t_len = rec.len();
    if tau > t_len {
        return Ok(Vec::new());
    }
    let windows = (0..=t_len - tau)
        .step_by(stride)
        .map(|start| Window {
            source_id: rec.id.clone(),
            start,
            values: rec.values.slice(ndarray::s![start..start + tau, ..]).to_owned(),
            label: aggregate_label(&rec.labels[start..start + tau]),
        })
        .collect();
    Ok(windows)
}

pub fn segment_dataset(ds: &TimeSeriesDataset, tau: usize, omega: usize) -> Result<Vec<Window>> {
    let mut out = Vec::new();
    for rec in ds.series() {
        out.extend(segment(rec, tau, omega)?);
    }
    Ok(out)
}

/// Most frequent label; ties go to the smallest label id.
pub fn aggregate_label(labels: &[usize]) -> usize {
    assert!(!labels.is_empty(), "cannot aggregate an empty label slice");
    let max = labels.iter().copied().max().unwrap_or(0);
    let mut counts = vec![0usize; max + 1];
    for &l in labels {
        counts[l] += 1;
    }
    let mut best = 0;
    for (label, &count) in counts.iter().enumerate() {
        if count > counts[best] {
            best = label;
        }
    }
    best
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NormKind {
    Zscore,
    Minmax,
}

/// Per-channel affine map `x -> (x - center) / scale`, fitted on training
/// windows. Degenerate channels (zero spread) get `scale = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct Normalizer {
    pub kind: NormKind,
    pub center: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Normalizer {
    pub fn identity(kind: NormKind, n_channels: usize) -> Self {
        Self {
            kind,
            center: vec![0.0; n_channels],
            scale: vec![1.0; n_channels],
        }
    }

    pub fn n_channels(&self) -> usize {
        self.center.len()
    }

    pub fn apply(&self, w: &Window) -> Result<Window> {
        Ok(Window {
            values: self.apply_values(w.values.view())?,
            ..w.clone()
        })
    }

    pub fn apply_values(&self, values: ArrayView2<f64>) -> Result<Array2<f64>> {
        if values.ncols() != self.n_channels() {
            return Err(shape_mismatch("normalizer channel count", self.n_channels(), values.ncols()));
        }
        let mut out = values.to_owned();
        for (c, mut col) in out.columns_mut().into_iter().enumerate() {
            let (mu, s) = (self.center[c], self.scale[c]);
            col.mapv_inplace(|x| (x - mu) / s);
        }
        Ok(out)
    }
}

/// Statistics are taken over every sample of every training window, so samples
/// shared by overlapping windows count once per window.
pub fn fit_normalizer(train: &[Window], kind: NormKind) -> Result<Normalizer> {
    let first = train
        .first()
        .ok_or_else(|| Error::Config("cannot fit a normalizer on zero windows".into()))?;
    let c = first.n_channels();
    if let Some(w) = train.iter().find(|w| w.n_channels() != c) {
        return Err(shape_mismatch("window channel count", c, w.n_channels()));
    }
    let mut center = vec![0.0; c];
    let mut scale = vec![1.0; c];
    match kind {
        NormKind::Zscore => {
            let n: usize = train.iter().map(Window::tau).sum();
            for ch in 0..c {
                let sum: f64 = train.iter().map(|w| w.values.column(ch).sum()).sum();
                let mean = sum / n as f64;
                let ss: f64 = train
                    .iter()
                    .map(|w| w.values.column(ch).iter().map(|x| (x - mean).powi(2)).sum::<f64>())
                    .sum();
                let sd = (ss / n as f64).sqrt();
                center[ch] = mean;
                scale[ch] = if sd > 0.0 { sd } else { 1.0 };
            }
        }
        NormKind::Minmax => {
            for ch in 0..c {
                let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
                for w in train {
                    for &x in w.values.column(ch) {
                        lo = lo.min(x);
                        hi = hi.max(x);
                    }
                }
                center[ch] = lo;
                scale[ch] = if hi > lo { hi - lo } else { 1.0 };
            }
        }
    }
    Ok(Normalizer { kind, center, scale })
}

pub fn apply_all(n: &Normalizer, windows: &[Window]) -> Result<Vec<Window>> {
    windows.iter().map(|w| n.apply(w)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use proptest::prelude::*;

    fn series(t_len: usize) -> SeriesRecord {
        SeriesRecord {
            id: "s".into(),
            group: "g".into(),
            values: Array2::from_shape_fn((t_len, 1), |(i, _)| i as f64),
            labels: vec![0; t_len],
        }
    }

    fn window(values: Array2<f64>) -> Window {
        Window {
            source_id: "w".into(),
            start: 0,
            values,
            label: 0,
        }
    }

    fn starts(t: usize, tau: usize, omega: usize) -> Vec<usize> {
        segment(&series(t), tau, omega).unwrap().iter().map(|w| w.start).collect()
    }

    #[test]
    fn segment_examples() {
        assert_eq!(starts(10, 4, 2), vec![0, 2, 4, 6]);
        assert_eq!(starts(10, 10, 0), vec![0]);
        assert_eq!(starts(9, 4, 0), vec![0, 4]);
        assert!(starts(3, 4, 0).is_empty());
        assert!(matches!(segment(&series(10), 4, 4), Err(Error::Config(_))));
    }

    #[test]
    fn segment_copies_values_and_labels() {
        let mut rec = series(6);
        rec.labels = vec![0, 1, 1, 0, 2, 2];
        let ws = segment(&rec, 3, 0).unwrap();
        assert_eq!(ws[1].values.column(0).to_vec(), vec![3.0, 4.0, 5.0]);
        assert_eq!(ws[0].label, 1);
        assert_eq!(ws[1].label, 2);
    }

    #[test]
    fn one_based_formula_equivalence() {
        // Starts 1, tau - omega + 1, ... in 1-based indexing are exactly ours plus one.
        let (t, tau, omega) = (23, 5, 2);
        let one_based: Vec<usize> = (1..=t - tau + 1).step_by(tau - omega).collect();
        let ours: Vec<usize> = starts(t, tau, omega).iter().map(|s| s + 1).collect();
        assert_eq!(ours, one_based);
    }

    #[test]
    fn mode_label() {
        assert_eq!(aggregate_label(&[0, 0, 1, 0]), 0);
        assert_eq!(aggregate_label(&[0, 0, 1, 1]), 0);
        assert_eq!(aggregate_label(&[1, 1, 0, 0]), 0);
        assert_eq!(aggregate_label(&[2]), 2);
        assert_eq!(aggregate_label(&[3, 2, 3]), 3);
    }

    #[test]
    fn zscore_closed_form() {
        let n = fit_normalizer(&[window(array![[1.0], [3.0]])], NormKind::Zscore).unwrap();
        assert_eq!(n.center, vec![2.0]);
        assert_eq!(n.scale, vec![1.0]);
        let out = n.apply(&window(array![[3.0]])).unwrap();
        assert_eq!(out.values[[0, 0]], 1.0);
    }

    #[test]
    fn constant_channel_uses_unit_divisor() {
        let w = window(array![[5.0], [5.0], [5.0]]);
        let n = fit_normalizer(std::slice::from_ref(&w), NormKind::Zscore).unwrap();
        assert_eq!(n.scale, vec![1.0]);
        assert!(n.apply(&w).unwrap().values.iter().all(|&x| x == 0.0));
        let m = fit_normalizer(&[w], NormKind::Minmax).unwrap();
        assert_eq!(m.scale, vec![1.0]);
    }

    #[test]
    fn minmax_no_clipping() {
        let n = fit_normalizer(&[window(array![[2.0], [4.0], [6.0]])], NormKind::Minmax).unwrap();
        assert_eq!((n.center[0], n.center[0] + n.scale[0]), (2.0, 6.0));
        let n = Normalizer {
            kind: NormKind::Minmax,
            center: vec![0.0],
            scale: vec![10.0],
        };
        let out = n.apply(&window(array![[5.0], [12.0]])).unwrap();
        assert_eq!(out.values.column(0).to_vec(), vec![0.5, 1.2]);
    }

    #[test]
    fn channel_mismatch_and_empty_input() {
        let n = Normalizer::identity(NormKind::Zscore, 2);
        assert!(matches!(n.apply(&window(array![[1.0]])), Err(Error::Shape(_))));
        assert!(matches!(fit_normalizer(&[], NormKind::Zscore), Err(Error::Config(_))));
    }

    #[test]
    fn double_application_differs_unless_identity() {
        let ws = vec![window(array![[1.0, 0.0], [4.0, 2.0], [10.0, -3.0]])];
        let n = fit_normalizer(&ws, NormKind::Zscore).unwrap();
        let once = n.apply(&ws[0]).unwrap();
        let twice = n.apply(&once).unwrap();
        assert_ne!(once, twice);
        let id = Normalizer::identity(NormKind::Zscore, 2);
        assert_eq!(id.apply(&ws[0]).unwrap(), ws[0]);
    }

    #[test]
    fn flatten_is_channel_major() {
        let w = window(array![[1.0, 10.0], [2.0, 20.0]]);
        assert_eq!(w.flatten(), vec![1.0, 2.0, 10.0, 20.0]);
    }

    proptest! {
        #[test]
        fn window_count_formula(t in 1usize..200, tau in 1usize..50, omega_frac in 0.0f64..1.0) {
            let omega = ((tau as f64) * omega_frac) as usize;
            prop_assume!(omega < tau);
            let n = segment(&series(t), tau, omega).unwrap().len();
            let expected = if t >= tau { (t - tau) / (tau - omega) + 1 } else { 0 };
            prop_assert_eq!(n, expected);
        }

        #[test]
        fn zscore_standardises_training_windows(
            data in proptest::collection::vec(-100.0f64..100.0, 24),
        ) {
            let ws: Vec<Window> = data
                .chunks(6)
                .map(|c| window(Array2::from_shape_vec((3, 2), c.to_vec()).unwrap()))
                .collect();
            let n = fit_normalizer(&ws, NormKind::Zscore).unwrap();
            let normed = apply_all(&n, &ws).unwrap();
            for ch in 0..2 {
                let xs: Vec<f64> = normed.iter().flat_map(|w| w.channel(ch)).collect();
                let mean = xs.iter().sum::<f64>() / xs.len() as f64;
                let sd = (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / xs.len() as f64).sqrt();
                prop_assert!(mean.abs() < 1e-9);
                if n.scale[ch] != 1.0 || sd > 0.0 {
                    prop_assert!((sd - 1.0).abs() < 1e-9, "sd {}", sd);
                }
            }
        }
    }
}
