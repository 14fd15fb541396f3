//! Frequency-domain embeddings: half-spectrum DFT magnitudes and Morlet CWT
//! log-energies per scale.

use ndarray::Array2;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::embed::EmbeddingVector;
use crate::error::{Error, Result};
use crate::numcore::dft_real;
use crate::preprocess::Window;

/// Per channel, `|X_k|` for `k = 0..=tau/2`, concatenated channel-major.
pub fn fft_embed(w: &Window) -> EmbeddingVector {
    let half = w.tau() / 2 + 1;
    let mut out = Vec::with_capacity(w.n_channels() * half);
    for c in 0..w.n_channels() {
        let spectrum = dft_real(&w.channel(c));
        out.extend(spectrum.iter().take(half).map(|v| v.norm()));
    }
    out
}

pub fn fft_dim(tau: usize, channels: usize) -> usize {
    channels * (tau / 2 + 1)
}

pub const DEFAULT_OMEGA0: f64 = 6.0;
pub const ENERGY_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CwtConfig {
    pub scales: Vec<f64>,
    #[serde(default = "default_omega0")]
    pub omega0: f64,
}

fn default_omega0() -> f64 {
    DEFAULT_OMEGA0
}

impl CwtConfig {
    pub fn new(scales: Vec<f64>, omega0: f64) -> Result<Self> {
        let cfg = Self { scales, omega0 };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Dyadic scales `2, 4, 8, ...` up to `tau / 2`. Windows shorter than four
    /// samples still get the single scale 2.
    pub fn dyadic(tau: usize) -> Self {
        let mut scales = Vec::new();
        let mut a = 2.0;
        while a <= tau as f64 / 2.0 {
            scales.push(a);
            a *= 2.0;
        }
        if scales.is_empty() {
            scales.push(2.0);
        }
        Self {
            scales,
            omega0: DEFAULT_OMEGA0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.scales.is_empty() {
            return Err(Error::Config("CWT needs at least one scale".into()));
        }
        if self.scales.iter().any(|&a| !(a > 0.0) || !a.is_finite()) {
            return Err(Error::Config("CWT scales must be positive".into()));
        }
        if self.scales.windows(2).any(|p| p[1] <= p[0]) {
            return Err(Error::Config("CWT scales must be strictly ascending".into()));
        }
        if !self.omega0.is_finite() {
            return Err(Error::Config("CWT center frequency must be finite".into()));
        }
        Ok(())
    }
}

/// `conj(psi(u))` for the Morlet wavelet
/// `psi(u) = pi^{-1/4} exp(i omega0 u) exp(-u^2 / 2)`.
fn morlet_conj(u: f64, omega0: f64) -> Complex64 {
    let envelope = std::f64::consts::PI.powf(-0.25) * (-0.5 * u * u).exp();
    Complex64::from_polar(envelope, -omega0 * u)
}

/// Direct-sum CWT with unit sampling and zero padding outside the window:
/// `W(a, b) = a^{-1/2} sum_t x_t conj(psi((t - b) / a))` for `b = 0..tau`.
/// Row `i` of the result holds scale `cfg.scales[i]`.
pub fn cwt(x: &[f64], cfg: &CwtConfig) -> Array2<Complex64> {
    let n = x.len();
    let mut out = Array2::zeros((cfg.scales.len(), n));
    if n == 0 {
        return out;
    }
    // Kernel indexed by lag t - b in -(n-1)..=(n-1).
    let mut kernel = vec![Complex64::new(0.0, 0.0); 2 * n - 1];
    for (row, &a) in cfg.scales.iter().enumerate() {
        let norm = 1.0 / a.abs().sqrt();
        for (k, slot) in kernel.iter_mut().enumerate() {
            let lag = k as f64 - (n - 1) as f64;
            *slot = morlet_conj(lag / a, cfg.omega0) * norm;
        }
        for b in 0..n {
            let mut acc = Complex64::new(0.0, 0.0);
            for (t, &xt) in x.iter().enumerate() {
                acc += kernel[t + n - 1 - b] * xt;
            }
            out[[row, b]] = acc;
        }
    }
    out
}

/// Per channel and scale, `ln(1e-12 + sum_b |W(a, b)|^2)`; channel-major then
/// scale order.
pub fn wavelet_embed(w: &Window, cfg: &CwtConfig) -> EmbeddingVector {
    let mut out = Vec::with_capacity(w.n_channels() * cfg.scales.len());
    for c in 0..w.n_channels() {
        let coeffs = cwt(&w.channel(c), cfg);
        for row in coeffs.rows() {
            let energy: f64 = row.iter().map(|v| v.norm_sqr()).sum();
            out.push((ENERGY_FLOOR + energy).ln());
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numcore::dft_naive;
    use crate::rng::Xoshiro256StarStar;
    use std::f64::consts::TAU;

    fn window(cols: Vec<Vec<f64>>) -> Window {
        let tau = cols[0].len();
        Window {
            source_id: "w".into(),
            start: 0,
            values: Array2::from_shape_fn((tau, cols.len()), |(t, c)| cols[c][t]),
            label: 0,
        }
    }

    fn tone(n: usize, cycles_per_sample: f64) -> Vec<f64> {
        (0..n).map(|t| (TAU * cycles_per_sample * t as f64).cos()).collect()
    }

    #[test]
    fn fft_constant_and_single_tone() {
        let v = fft_embed(&window(vec![vec![2.5; 4]]));
        assert_eq!(v.len(), 3);
        assert!((v[0] - 10.0).abs() < 1e-12 && v[1].abs() < 1e-12 && v[2].abs() < 1e-12);
        let v = fft_embed(&window(vec![vec![1.0, 0.0, -1.0, 0.0]]));
        assert!(v[0].abs() < 1e-12 && (v[1] - 2.0).abs() < 1e-12 && v[2].abs() < 1e-12);
    }

    #[test]
    fn fft_matches_naive_per_channel() {
        let mut r = Xoshiro256StarStar::seed_from_u64(2);
        let cols: Vec<Vec<f64>> = (0..2).map(|_| (0..6).map(|_| r.normal()).collect()).collect();
        let v = fft_embed(&window(cols.clone()));
        assert_eq!(v.len(), fft_dim(6, 2));
        let mut expect = Vec::new();
        for col in &cols {
            let x: Vec<Complex64> = col.iter().map(|&v| Complex64::new(v, 0.0)).collect();
            expect.extend(dft_naive(&x).iter().take(4).map(|c| c.norm()));
        }
        for (a, b) in v.iter().zip(&expect) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn fft_dimension_and_shift_invariance() {
        let mut r = Xoshiro256StarStar::seed_from_u64(3);
        for tau in 1..20 {
            for c in 1..4 {
                let cols: Vec<Vec<f64>> = (0..c).map(|_| (0..tau).map(|_| r.normal()).collect()).collect();
                let v = fft_embed(&window(cols.clone()));
                assert_eq!(v.len(), fft_dim(tau, c));
                let shift = r.below(tau);
                let rolled: Vec<Vec<f64>> = cols
                    .iter()
                    .map(|col| (0..tau).map(|t| col[(t + shift) % tau]).collect())
                    .collect();
                for (a, b) in v.iter().zip(fft_embed(&window(rolled))) {
                    assert!((a - b).abs() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn default_scales() {
        assert_eq!(CwtConfig::dyadic(30).scales, vec![2.0, 4.0, 8.0]);
        assert_eq!(CwtConfig::dyadic(64).scales, vec![2.0, 4.0, 8.0, 16.0, 32.0]);
        assert_eq!(CwtConfig::dyadic(2).scales, vec![2.0]);
        let w = window(vec![vec![0.0; 30], vec![1.0; 30]]);
        assert_eq!(wavelet_embed(&w, &CwtConfig::dyadic(30)).len(), 6);
    }

    #[test]
    fn config_validation() {
        assert!(CwtConfig::new(vec![], 6.0).is_err());
        assert!(CwtConfig::new(vec![2.0, 2.0], 6.0).is_err());
        assert!(CwtConfig::new(vec![-1.0, 2.0], 6.0).is_err());
        assert!(CwtConfig::new(vec![1.0, 2.5], 6.0).is_ok());
    }

    #[test]
    fn cwt_zero_and_linearity() {
        let cfg = CwtConfig::dyadic(32);
        assert!(cwt(&[0.0; 32], &cfg).iter().all(|v| v.norm() == 0.0));
        let mut r = Xoshiro256StarStar::seed_from_u64(4);
        let x: Vec<f64> = (0..32).map(|_| r.normal()).collect();
        let alpha = -2.75;
        let ax: Vec<f64> = x.iter().map(|v| v * alpha).collect();
        let (w1, w2) = (cwt(&x, &cfg), cwt(&ax, &cfg));
        for (a, b) in w1.iter().zip(w2.iter()) {
            assert!((a * alpha - b).norm() < 1e-9);
        }
        let zero = wavelet_embed(&window(vec![vec![0.0; 32]]), &cfg);
        assert!(zero.iter().all(|&v| v == ENERGY_FLOOR.ln()));
    }

    #[test]
    fn cwt_matches_direct_integral_sum() {
        // Independent evaluation straight from the definition.
        let mut r = Xoshiro256StarStar::seed_from_u64(5);
        let x: Vec<f64> = (0..20).map(|_| r.normal()).collect();
        let cfg = CwtConfig::new(vec![1.5, 3.0, 7.0], 6.0).unwrap();
        let w = cwt(&x, &cfg);
        for (i, &a) in cfg.scales.iter().enumerate() {
            for b in 0..x.len() {
                let mut acc = Complex64::new(0.0, 0.0);
                for (t, &xt) in x.iter().enumerate() {
                    let u = (t as f64 - b as f64) / a;
                    let psi = Complex64::from_polar(1.0, 6.0 * u)
                        * (-u * u / 2.0).exp()
                        * std::f64::consts::PI.powf(-0.25);
                    acc += xt * psi.conj();
                }
                acc /= a.sqrt();
                assert!((acc - w[[i, b]]).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn cwt_peak_scale_tracks_frequency() {
        // Dense sweep: the response at mid-signal peaks at the scale nearest
        // omega0 / (2 pi f).
        let n = 256;
        let scales: Vec<f64> = (4..=24).map(|a| a as f64).collect();
        let cfg = CwtConfig::new(scales.clone(), 6.0).unwrap();
        for target in [6.0, 10.0, 16.0] {
            let f = 6.0 / (TAU * target);
            let w = cwt(&tone(n, f), &cfg);
            let mid = n / 2;
            let best = (0..scales.len())
                .max_by(|&i, &j| w[[i, mid]].norm().partial_cmp(&w[[j, mid]].norm()).unwrap())
                .unwrap();
            assert_eq!(scales[best], target, "target scale {target}");
        }
    }

    #[test]
    fn wavelet_tone_energy_peaks_at_matching_scale() {
        let cfg = CwtConfig::dyadic(64);
        let f = 6.0 / (TAU * 4.0);
        let v = wavelet_embed(&window(vec![tone(64, f)]), &cfg);
        let at4 = v[1];
        for (k, &e) in v.iter().enumerate() {
            if k != 1 {
                assert!(at4 > e, "scale index {k}: {e} vs {at4}");
            }
        }
    }

    #[test]
    fn wavelet_monotone_in_amplitude() {
        let mut r = Xoshiro256StarStar::seed_from_u64(6);
        let cfg = CwtConfig::dyadic(48);
        for _ in 0..20 {
            let x: Vec<f64> = (0..48).map(|_| r.normal()).collect();
            let alpha = 1.0 + 3.0 * r.next_f64();
            let scaled: Vec<f64> = x.iter().map(|v| v * alpha).collect();
            let a = wavelet_embed(&window(vec![x]), &cfg);
            let b = wavelet_embed(&window(vec![scaled]), &cfg);
            assert!(a.iter().zip(&b).all(|(u, v)| v >= u));
        }
    }
}
