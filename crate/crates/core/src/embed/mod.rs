//! Window embeddings. Each method maps a normalised `tau x C` window to a
//! fixed-length vector; methods with learned state are fitted on training
//! windows only.

pub mod graph;
pub mod neural;
pub mod spectral;
pub mod subspace;
pub mod tda;

use std::fmt;
use std::str::FromStr;

use ndarray::{Array2, ArrayView1};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::preprocess::Window;

pub type EmbeddingVector = Vec<f64>;

pub const DEFAULT_DIM: usize = 16;
pub const DEFAULT_LLE_NEIGHBOURS: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Pca,
    Fft,
    Wavelet,
    Lle,
    Graph,
    Tda,
    Autoencoder,
}

impl Method {
    pub const ALL: [Method; 7] = [
        Method::Pca,
        Method::Fft,
        Method::Wavelet,
        Method::Lle,
        Method::Graph,
        Method::Tda,
        Method::Autoencoder,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Pca => "pca",
            Method::Fft => "fft",
            Method::Wavelet => "wavelet",
            Method::Lle => "lle",
            Method::Graph => "graph",
            Method::Tda => "tda",
            Method::Autoencoder => "autoencoder",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown embedding method '{s}'")))
    }
}

/// One configured embedding. Fields that do not apply to `method` are
/// rejected by [`EmbeddingSpec::validate`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmbeddingSpec {
    pub method: Method,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d: Option<usize>,
    /// LLE neighbour count.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reg: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scales: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega0: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid_size: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epochs: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub batch: Option<usize>,
}

impl EmbeddingSpec {
    pub fn new(method: Method) -> Self {
        EmbeddingSpec {
            method,
            d: None,
            k: None,
            reg: None,
            scales: None,
            omega0: None,
            grid_size: None,
            epochs: None,
            batch: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let allowed: &[&str] = match self.method {
            Method::Pca => &["d"],
            Method::Fft | Method::Graph => &[],
            Method::Wavelet => &["scales", "omega0"],
            Method::Lle => &["d", "k", "reg"],
            Method::Tda => &["grid_size"],
            Method::Autoencoder => &["d", "epochs", "batch"],
        };
        let present = [
            ("d", self.d.is_some()),
            ("k", self.k.is_some()),
            ("reg", self.reg.is_some()),
            ("scales", self.scales.is_some()),
            ("omega0", self.omega0.is_some()),
            ("grid_size", self.grid_size.is_some()),
            ("epochs", self.epochs.is_some()),
            ("batch", self.batch.is_some()),
        ];
        if let Some((name, _)) = present.iter().find(|(n, p)| *p && !allowed.contains(n)) {
            return Err(Error::Config(format!(
                "parameter '{name}' does not apply to method '{}'",
                self.method
            )));
        }
        if self.d == Some(0) || self.k == Some(0) || self.grid_size == Some(0) {
            return Err(Error::Config(format!("{}: sizes must be positive", self.method)));
        }
        if let Some(scales) = &self.scales {
            spectral::CwtConfig::new(scales.clone(), self.omega0.unwrap_or(spectral::DEFAULT_OMEGA0))?;
        }
        Ok(())
    }
}

/// A fitted embedding ready to transform windows of the training shape.
#[derive(Debug, Clone)]
pub enum Embedder {
    Pca(subspace::PcaModel),
    Fft,
    Wavelet(spectral::CwtConfig),
    Lle(subspace::LleModel),
    Graph,
    Tda { grid_size: usize },
    Autoencoder(neural::AutoencoderModel),
}

impl Embedder {
    /// Fits on `train`. Requested dimensions larger than the training set
    /// supports are reduced to the largest feasible value.
    pub fn fit(spec: &EmbeddingSpec, train: &[Window], seed: u64) -> Result<Self> {
        spec.validate()?;
        let first = train
            .first()
            .ok_or_else(|| Error::Data(format!("{}: no training windows", spec.method)))?;
        let (tau, channels) = (first.tau(), first.n_channels());
        let input_dim = tau * channels;
        let n = train.len();
        let d = spec.d.unwrap_or(DEFAULT_DIM);
        Ok(match spec.method {
            Method::Fft => Embedder::Fft,
            Method::Graph => Embedder::Graph,
            Method::Tda => Embedder::Tda {
                grid_size: spec.grid_size.unwrap_or(tda::DEFAULT_GRID_SIZE),
            },
            Method::Wavelet => Embedder::Wavelet(match &spec.scales {
                Some(s) => spectral::CwtConfig::new(
                    s.clone(),
                    spec.omega0.unwrap_or(spectral::DEFAULT_OMEGA0),
                )?,
                None => spectral::CwtConfig {
                    omega0: spec.omega0.unwrap_or(spectral::DEFAULT_OMEGA0),
                    ..spectral::CwtConfig::dyadic(tau)
                },
            }),
            Method::Pca => {
                if n < 2 {
                    return Err(Error::Config("PCA needs at least two training windows".into()));
                }
                let d = d.min(n - 1).min(input_dim);
                let x = neural::windows_matrix(train)?;
                Embedder::Pca(subspace::pca_fit(x.view(), d)?)
            }
            Method::Lle => {
                if n < 3 {
                    return Err(Error::Config("LLE needs at least three training windows".into()));
                }
                let k = spec.k.unwrap_or(DEFAULT_LLE_NEIGHBOURS).min(n - 2);
                let d = d.min(k);
                let x = neural::windows_matrix(train)?;
                Embedder::Lle(subspace::lle_fit(
                    x.view(),
                    k,
                    d,
                    spec.reg.unwrap_or(subspace::DEFAULT_LLE_REG),
                )?)
            }
            Method::Autoencoder => {
                if input_dim < 2 {
                    return Err(Error::Config("autoencoder needs windows with at least two values".into()));
                }
                let cfg = neural::AeConfig {
                    d: d.min(input_dim - 1),
                    epochs: spec.epochs.unwrap_or(neural::DEFAULT_AE_EPOCHS),
                    batch: spec.batch.unwrap_or(neural::DEFAULT_BATCH),
                    seed,
                };
                Embedder::Autoencoder(neural::ae_train(train, &cfg)?)
            }
        })
    }

    pub fn method(&self) -> Method {
        match self {
            Embedder::Pca(_) => Method::Pca,
            Embedder::Fft => Method::Fft,
            Embedder::Wavelet(_) => Method::Wavelet,
            Embedder::Lle(_) => Method::Lle,
            Embedder::Graph => Method::Graph,
            Embedder::Tda { .. } => Method::Tda,
            Embedder::Autoencoder(_) => Method::Autoencoder,
        }
    }

    pub fn embed(&self, w: &Window) -> Result<EmbeddingVector> {
        Ok(match self {
            Embedder::Fft => spectral::fft_embed(w),
            Embedder::Wavelet(cfg) => spectral::wavelet_embed(w, cfg),
            Embedder::Graph => graph::graph_embed(w),
            Embedder::Tda { grid_size } => tda::tda_embed(w, *grid_size),
            Embedder::Pca(m) => subspace::pca_transform(m, ArrayView1::from(&w.flatten()))?,
            Embedder::Lle(m) => subspace::lle_transform(m, ArrayView1::from(&w.flatten()))?,
            Embedder::Autoencoder(m) => neural::ae_embed(m, w)?,
        })
    }

    /// Embeds every window (in parallel) into an `n x d` matrix; row order
    /// follows `windows`.
    pub fn transform(&self, windows: &[Window]) -> Result<Array2<f64>> {
        let rows: Vec<EmbeddingVector> = windows
            .par_iter()
            .map(|w| self.embed(w))
            .collect::<Result<_>>()?;
        let d = rows.first().map_or(0, Vec::len);
        let mut out = Array2::zeros((rows.len(), d));
        for (i, row) in rows.iter().enumerate() {
            if row.len() != d {
                return Err(crate::error::shape_mismatch("embedding length", d, row.len()));
            }
            out.row_mut(i).assign(&ArrayView1::from(row));
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Xoshiro256StarStar;

    fn windows(n: usize, tau: usize, c: usize) -> Vec<Window> {
        let mut r = Xoshiro256StarStar::seed_from_u64(50);
        (0..n)
            .map(|i| Window {
                source_id: format!("s{i}"),
                start: 0,
                values: Array2::from_shape_fn((tau, c), |_| r.normal()),
                label: i % 2,
            })
            .collect()
    }

    #[test]
    fn every_method_produces_consistent_dimensions() {
        let train = windows(30, 16, 2);
        let test = windows(5, 16, 2);
        let expected = [
            (Method::Pca, 16),
            (Method::Fft, spectral::fft_dim(16, 2)),
            (Method::Wavelet, 2 * 3),
            (Method::Lle, 16),
            (Method::Graph, 14),
            (Method::Tda, tda::tda_dim(2, 8)),
            (Method::Autoencoder, 16),
        ];
        for (method, dim) in expected {
            let mut spec = EmbeddingSpec::new(method);
            if method == Method::Autoencoder {
                spec.epochs = Some(2);
            }
            let e = Embedder::fit(&spec, &train, 1).unwrap();
            let out = e.transform(&test).unwrap();
            assert_eq!(out.dim(), (5, dim), "{method}");
            assert!(out.iter().all(|v| v.is_finite()));
            assert_eq!(e.method(), method);
        }
    }

    #[test]
    fn dimensions_shrink_to_fit_small_training_sets() {
        let train = windows(6, 8, 1);
        let e = Embedder::fit(&EmbeddingSpec::new(Method::Pca), &train, 0).unwrap();
        assert_eq!(e.transform(&train).unwrap().ncols(), 5);
        let e = Embedder::fit(&EmbeddingSpec::new(Method::Lle), &train, 0).unwrap();
        assert_eq!(e.transform(&train).unwrap().ncols(), 4);
    }

    #[test]
    fn spec_rejects_foreign_parameters() {
        let mut spec = EmbeddingSpec::new(Method::Fft);
        spec.d = Some(4);
        assert!(spec.validate().is_err());
        let err = serde_json::from_str::<EmbeddingSpec>(r#"{"method":"pca","dims":3}"#);
        assert!(err.is_err());
        let ok: EmbeddingSpec = serde_json::from_str(r#"{"method":"lle","d":2,"k":5}"#).unwrap();
        assert_eq!(ok.k, Some(5));
    }

    #[test]
    fn method_names_round_trip() {
        for m in Method::ALL {
            assert_eq!(m.name().parse::<Method>().unwrap(), m);
        }
        assert!("umap".parse::<Method>().is_err());
    }
}
