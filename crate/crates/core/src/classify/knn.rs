//! Brute-force k-nearest-neighbour voting.

use ndarray::{Array2, ArrayView1, ArrayView2};

use super::{majority, LabeledMatrix};

pub const DEFAULT_K: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct KnnParams {
    pub k: usize,
}

impl Default for KnnParams {
    fn default() -> Self {
        KnnParams { k: DEFAULT_K }
    }
}

#[derive(Debug, Clone)]
pub struct KnnModel {
    x: Array2<f64>,
    y: Vec<usize>,
    k: usize,
}

pub fn fit(data: &LabeledMatrix, params: KnnParams) -> KnnModel {
    KnnModel {
        x: data.x().to_owned(),
        y: data.y().to_vec(),
        k: params.k.min(data.len()),
    }
}

impl KnnModel {
    pub fn n_features(&self) -> usize {
        self.x.ncols()
    }

    /// Euclidean neighbours, distance ties to the lower training index; vote
    /// ties to the smallest class id.
    pub fn predict_one(&self, q: ArrayView1<f64>) -> usize {
        let mut dist: Vec<(f64, usize)> = self
            .x
            .rows()
            .into_iter()
            .enumerate()
            .map(|(i, r)| (r.iter().zip(q).map(|(a, b)| (a - b) * (a - b)).sum(), i))
            .collect();
        let k = self.k;
        let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
        if k < dist.len() {
            dist.select_nth_unstable_by(k - 1, cmp);
            dist.truncate(k);
        }
        majority(dist.iter().map(|&(_, i)| self.y[i]))
    }

    pub fn predict(&self, x: ArrayView2<f64>) -> Vec<usize> {
        x.rows().into_iter().map(|r| self.predict_one(r)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classify::tests::blobs;
    use ndarray::array;

    fn data(x: Array2<f64>, y: Vec<usize>) -> LabeledMatrix {
        LabeledMatrix::new(x, y).unwrap()
    }

    #[test]
    fn one_nn_recovers_training_labels() {
        let d = blobs(20, &[(0.0, 0.0), (1.0, 1.0)], 1.0, 4);
        let m = fit(&d, KnnParams { k: 1 });
        assert_eq!(m.predict(d.x()), d.y());
    }

    #[test]
    fn distance_ties_go_to_lower_index() {
        let d = data(array![[-1.0], [1.0]], vec![1, 0]);
        let m = fit(&d, KnnParams { k: 1 });
        assert_eq!(m.predict(array![[0.0]].view()), vec![1]);
    }

    #[test]
    fn vote_ties_go_to_smaller_class() {
        let d = data(array![[0.0], [1.0], [10.0]], vec![3, 2, 2]);
        let m = fit(&d, KnnParams { k: 2 });
        assert_eq!(m.predict(array![[0.4]].view()), vec![2]);
    }

    #[test]
    fn k_larger_than_training_set_uses_all_points() {
        let d = data(array![[0.0], [1.0], [2.0]], vec![0, 1, 1]);
        let m = fit(&d, KnnParams { k: 50 });
        assert_eq!(m.predict(array![[0.0]].view()), vec![1]);
    }
}
