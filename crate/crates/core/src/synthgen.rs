//! Seeded synthetic datasets whose class structure favours a known embedding
//! family: pure tones (spectral), asymmetric triangle waves (slope
//! structure) and transient bumps at class-specific widths.

use std::fmt;
use std::str::FromStr;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::data_io::{SeriesRecord, TimeSeriesDataset};
use crate::error::{Error, Result};
use crate::rng::{stable_hash, Xoshiro256StarStar};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SynthKind {
    Tones,
    Trends,
    Statebursts,
}

impl SynthKind {
    pub fn name(self) -> &'static str {
        match self {
            SynthKind::Tones => "tones",
            SynthKind::Trends => "trends",
            SynthKind::Statebursts => "statebursts",
        }
    }
}

impl fmt::Display for SynthKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SynthKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        [SynthKind::Tones, SynthKind::Trends, SynthKind::Statebursts]
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown synthetic kind '{s}'")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub kind: SynthKind,
    pub classes: usize,
    pub n_per_class: usize,
    pub tau: usize,
    pub channels: usize,
    pub noise_sigma: f64,
    pub seed: u64,
}

/// Cycles per series of the class-0 tone; class `c` uses `(c + 1)` times this.
pub const BASE_CYCLES: f64 = 2.0;
/// Bump width of class 0 in samples; class `c` is `2^c` times wider.
pub const BURST_BASE_WIDTH: f64 = 4.0;

impl SynthSpec {
    pub fn new(kind: SynthKind) -> Self {
        SynthSpec {
            kind,
            classes: 3,
            n_per_class: 50,
            tau: 64,
            channels: 1,
            noise_sigma: 0.1,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.classes < 1 || self.channels < 1 {
            return Err(Error::Config("classes and channels must be positive".into()));
        }
        if self.n_per_class < 2 {
            return Err(Error::Config("n_per_class must be at least 2".into()));
        }
        if self.tau < 4 {
            return Err(Error::Config("tau must be at least 4".into()));
        }
        if !(self.noise_sigma >= 0.0) {
            return Err(Error::Config("noise_sigma must be non-negative".into()));
        }
        if self.kind == SynthKind::Statebursts && self.classes > 16 {
            return Err(Error::Config("statebursts supports at most 16 classes".into()));
        }
        if self.kind == SynthKind::Tones {
            let top = self.classes as f64 * BASE_CYCLES;
            if top >= self.tau as f64 / 2.0 {
                return Err(Error::Config(format!(
                    "{} tone classes do not fit below Nyquist at tau {}",
                    self.classes, self.tau
                )));
            }
        }
        Ok(())
    }
}

fn tone(rng: &mut Xoshiro256StarStar, class: usize, tau: usize) -> Vec<f64> {
    let cycles = (class + 1) as f64 * BASE_CYCLES;
    let phase = rng.uniform(0.0, 2.0 * std::f64::consts::PI);
    (0..tau)
        .map(|t| (2.0 * std::f64::consts::PI * cycles * t as f64 / tau as f64 + phase).cos())
        .collect()
}

/// Triangle wave whose rising share of each period depends on the class.
fn trend(rng: &mut Xoshiro256StarStar, class: usize, classes: usize, tau: usize) -> Vec<f64> {
    let rise = (class + 1) as f64 / (classes + 1) as f64;
    let period = (tau as f64 / 4.0).max(4.0);
    let offset = rng.uniform(0.0, period);
    let amp = rng.uniform(0.8, 1.2);
    (0..tau)
        .map(|t| {
            let u = ((t as f64 + offset) / period).fract();
            let v = if u < rise { u / rise } else { (1.0 - u) / (1.0 - rise) };
            amp * (2.0 * v - 1.0)
        })
        .collect()
}

/// Gaussian bumps of width `4 * 2^c` with random count, centre, sign and
/// amplitude (one to four, log-uniform).
fn bursts(rng: &mut Xoshiro256StarStar, class: usize, tau: usize) -> Vec<f64> {
    let width = BURST_BASE_WIDTH * (1u64 << class) as f64;
    let count = 1 + rng.below(3);
    let mut x = vec![0.0; tau];
    for _ in 0..count {
        let centre = rng.uniform(0.0, tau as f64);
        let amp = rng.uniform(0.0, 2.0).exp2() * if rng.next_f64() < 0.5 { -1.0 } else { 1.0 };
        for (t, v) in x.iter_mut().enumerate() {
            let u = (t as f64 - centre) / width;
            *v += amp * (-0.5 * u * u).exp();
        }
    }
    x
}

/// One series of length `tau` per item, each its own group. Labels are
/// `c0, c1, ...`; series are ordered class by class.
pub fn generate(spec: &SynthSpec) -> Result<TimeSeriesDataset> {
    spec.validate()?;
    let mut series = Vec::with_capacity(spec.classes * spec.n_per_class);
    for class in 0..spec.classes {
        for i in 0..spec.n_per_class {
            let id = format!("{}-c{class}-{i:05}", spec.kind);
            let mut rng = Xoshiro256StarStar::seed_from_u64(stable_hash(spec.seed, &[spec.kind.name(), &id]));
            let mut values = Array2::zeros((spec.tau, spec.channels));
            for c in 0..spec.channels {
                let clean = match spec.kind {
                    SynthKind::Tones => tone(&mut rng, class, spec.tau),
                    SynthKind::Trends => trend(&mut rng, class, spec.classes, spec.tau),
                    SynthKind::Statebursts => bursts(&mut rng, class, spec.tau),
                };
                for (t, v) in clean.into_iter().enumerate() {
                    values[[t, c]] = v + spec.noise_sigma * rng.normal();
                }
            }
            series.push(SeriesRecord {
                group: id.clone(),
                id,
                values,
                labels: vec![class; spec.tau],
            });
        }
    }
    let alphabet = (0..spec.classes).map(|c| format!("c{c}")).collect();
    TimeSeriesDataset::new(series, spec.channels, alphabet)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embed::spectral::fft_embed;
    use crate::preprocess::segment_dataset;

    #[test]
    fn same_spec_same_dataset() {
        for kind in [SynthKind::Tones, SynthKind::Trends, SynthKind::Statebursts] {
            let spec = SynthSpec { channels: 2, ..SynthSpec::new(kind) };
            assert_eq!(generate(&spec).unwrap(), generate(&spec).unwrap());
            let other = SynthSpec { seed: 1, ..spec.clone() };
            assert_ne!(generate(&spec).unwrap(), generate(&other).unwrap());
        }
    }

    #[test]
    fn noiseless_tones_peak_at_class_bins() {
        let spec = SynthSpec {
            classes: 2,
            noise_sigma: 0.0,
            ..SynthSpec::new(SynthKind::Tones)
        };
        let ds = generate(&spec).unwrap();
        for w in segment_dataset(&ds, spec.tau, 0).unwrap() {
            let mag = fft_embed(&w);
            let own = ((w.label + 1) as f64 * BASE_CYCLES) as usize;
            let other = ((2 - w.label) as f64 * BASE_CYCLES) as usize;
            assert!((mag[own] - spec.tau as f64 / 2.0).abs() < 1e-9);
            assert!(mag[other] < 1e-9);
        }
    }

    #[test]
    fn shapes_and_labels() {
        let spec = SynthSpec {
            classes: 4,
            n_per_class: 3,
            tau: 40,
            channels: 2,
            ..SynthSpec::new(SynthKind::Trends)
        };
        let ds = generate(&spec).unwrap();
        assert_eq!(ds.len(), 12);
        assert_eq!(ds.n_channels(), 2);
        assert_eq!(ds.label_alphabet(), &["c0", "c1", "c2", "c3"]);
        assert!(ds.series().iter().all(|s| s.len() == 40 && s.group == s.id));
    }

    fn knn_accuracy(embed: impl Fn(&crate::preprocess::Window) -> Vec<f64>, seed: u64) -> f64 {
        use crate::classify::{accuracy, fit, ClassifierKind, ClassifierParams, LabeledMatrix};
        use crate::preprocess::{apply_all, fit_normalizer, NormKind};
        let spec = SynthSpec { seed, ..SynthSpec::new(SynthKind::Statebursts) };
        let windows = segment_dataset(&generate(&spec).unwrap(), spec.tau, 0).unwrap();
        // every third series is held out
        let (test, train): (Vec<_>, Vec<_>) = windows.into_iter().enumerate().partition(|(i, _)| i % 3 == 0);
        let strip = |v: Vec<(usize, crate::preprocess::Window)>| v.into_iter().map(|p| p.1).collect::<Vec<_>>();
        let (train, test) = (strip(train), strip(test));
        let norm = fit_normalizer(&train, NormKind::Zscore).unwrap();
        let matrix = |w: &[crate::preprocess::Window]| {
            let w = apply_all(&norm, w).unwrap();
            let rows: Vec<Vec<f64>> = w.iter().map(&embed).collect();
            let x = Array2::from_shape_fn((rows.len(), rows[0].len()), |(i, j)| rows[i][j]);
            LabeledMatrix::new(x, w.iter().map(|w| w.label).collect()).unwrap()
        };
        let (tr, te) = (matrix(&train), matrix(&test));
        let model = fit(ClassifierKind::Knn, &tr, &ClassifierParams::default(), 0).unwrap();
        accuracy(&model.predict(te.x()).unwrap(), te.y()).unwrap()
    }

    #[test]
    fn bursts_favour_wavelets_over_spectra() {
        use crate::embed::spectral::{wavelet_embed, CwtConfig};
        let cfg = CwtConfig::dyadic(64);
        let (mut wavelet, mut fft) = (0.0, 0.0);
        for seed in 0..3 {
            wavelet += knn_accuracy(|w| wavelet_embed(w, &cfg), seed);
            fft += knn_accuracy(fft_embed, seed);
        }
        assert!(wavelet > fft, "wavelet {wavelet} vs fft {fft}");
    }

    #[test]
    fn invalid_specs() {
        assert!(generate(&SynthSpec { n_per_class: 1, ..SynthSpec::new(SynthKind::Tones) }).is_err());
        assert!(generate(&SynthSpec { noise_sigma: -1.0, ..SynthSpec::new(SynthKind::Tones) }).is_err());
        assert!(generate(&SynthSpec { classes: 20, ..SynthSpec::new(SynthKind::Tones) }).is_err());
        assert!("noise".parse::<SynthKind>().is_err());
    }
}
