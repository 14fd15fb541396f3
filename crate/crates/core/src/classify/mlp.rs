//! One-hidden-layer softmax classifier on the dense network engine.

use ndarray::{Array2, ArrayView2, Axis};

use super::{argmax, LabeledMatrix, Standardizer};
use crate::embed::neural::{Adam, HiddenActivation, Network, NetworkSpec, OutputActivation};
use crate::error::{Error, Result};
use crate::rng::{stable_hash, Xoshiro256StarStar};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MlpParams {
    pub hidden: usize,
    pub epochs: usize,
    pub batch: usize,
}

impl Default for MlpParams {
    fn default() -> Self {
        MlpParams {
            hidden: 64,
            epochs: 200,
            batch: 64,
        }
    }
}

#[derive(Debug, Clone)]
pub struct MlpModel {
    pub classes: Vec<usize>,
    standardizer: Standardizer,
    pub network: Network,
    /// Mean cross-entropy over the training set after each epoch.
    pub loss_log: Vec<f64>,
}

fn cross_entropy(p: &Array2<f64>, targets: &[usize]) -> f64 {
    -targets
        .iter()
        .enumerate()
        .map(|(i, &c)| p[[i, c]].max(f64::MIN_POSITIVE).ln())
        .sum::<f64>()
        / targets.len() as f64
}

pub fn fit(data: &LabeledMatrix, params: &MlpParams, seed: u64) -> Result<MlpModel> {
    let classes = data.classes();
    if classes.len() < 2 {
        return Err(Error::Config("MLP needs at least two classes".into()));
    }
    if params.batch == 0 {
        return Err(Error::Config("batch size must be positive".into()));
    }
    let standardizer = Standardizer::fit(data.x());
    let x = standardizer.apply(data.x());
    let targets: Vec<usize> = data
        .y()
        .iter()
        .map(|y| classes.binary_search(y).expect("label among classes"))
        .collect();
    let mut network = Network::init(NetworkSpec {
        layer_sizes: vec![x.ncols(), params.hidden, classes.len()],
        hidden: HiddenActivation::Relu,
        output: OutputActivation::Softmax,
        seed: stable_hash(seed, &["mlp"]),
    })?;
    let mut opt = Adam::new(&network);
    let mut rng = Xoshiro256StarStar::seed_from_u64(stable_hash(seed, &["mlp-batches"]));
    let mut order: Vec<usize> = (0..x.nrows()).collect();
    let mut loss_log = Vec::with_capacity(params.epochs);
    for _ in 0..params.epochs {
        rng.shuffle(&mut order);
        for chunk in order.chunks(params.batch) {
            let batch = x.select(Axis(0), chunk);
            let cache = network.forward_batch(batch.view())?;
            let mut delta = cache.output().clone();
            for (row, &i) in chunk.iter().enumerate() {
                delta[[row, targets[i]]] -= 1.0;
            }
            delta /= chunk.len() as f64;
            let grads = network.backward_from_logits(&cache, delta);
            opt.step(&mut network, &grads.layers);
        }
        loss_log.push(cross_entropy(&network.predict_batch(x.view())?, &targets));
    }
    Ok(MlpModel {
        classes,
        standardizer,
        network,
        loss_log,
    })
}

impl MlpModel {
    pub fn n_features(&self) -> usize {
        self.standardizer.dim()
    }

    pub fn predict_proba(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        self.network.predict_batch(self.standardizer.apply(x).view())
    }

    pub fn predict(&self, x: ArrayView2<f64>) -> Result<Vec<usize>> {
        Ok(self
            .predict_proba(x)?
            .rows()
            .into_iter()
            .map(|r| self.classes[argmax(r.iter().copied())])
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classify::{accuracy, tests::blobs};
    use crate::embed::neural::tests::worst_fd_error;
    use ndarray::array;

    #[test]
    fn learns_xor_like_quadrants() {
        let d = blobs(30, &[(0.0, 0.0), (3.0, 3.0)], 0.5, 1);
        let m = fit(&d, &MlpParams::default(), 2).unwrap();
        assert!(accuracy(&m.predict(d.x()).unwrap(), d.y()).unwrap() >= 0.98);
        assert!(m.loss_log.last().unwrap() < &m.loss_log[0]);
    }

    #[test]
    fn single_class_is_rejected() {
        let d = LabeledMatrix::new(array![[0.0], [1.0]], vec![1, 1]).unwrap();
        assert!(matches!(fit(&d, &MlpParams::default(), 0), Err(Error::Config(_))));
    }

    #[test]
    fn deterministic_for_a_seed() {
        let d = blobs(10, &[(0.0, 0.0), (1.0, 1.0), (2.0, 0.0)], 0.4, 3);
        let p = MlpParams { epochs: 20, ..Default::default() };
        let a = fit(&d, &p, 4).unwrap();
        let b = fit(&d, &p, 4).unwrap();
        assert_eq!(a.network, b.network);
    }

    #[test]
    fn training_gradient_matches_finite_differences() {
        let d = blobs(6, &[(0.0, 0.0), (1.0, 1.0), (2.0, 0.0)], 0.4, 5);
        let m = fit(&d, &MlpParams { hidden: 5, epochs: 3, batch: 64 }, 6).unwrap();
        let x = m.standardizer.apply(d.x());
        let targets: Vec<usize> = d.y().to_vec();
        let loss = |n: &Network| cross_entropy(&n.predict_batch(x.view()).unwrap(), &targets);
        let cache = m.network.forward_batch(x.view()).unwrap();
        let mut delta = cache.output().clone();
        for (i, &c) in targets.iter().enumerate() {
            delta[[i, c]] -= 1.0;
        }
        delta /= targets.len() as f64;
        let grads = m.network.backward_from_logits(&cache, delta);
        assert!(worst_fd_error(&m.network, &loss, &grads) <= 1e-4);
    }
}
