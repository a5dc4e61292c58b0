use ndarray::ArrayView1;

use super::check_dim;
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::kernel::{argmax, sq_dist};

/// Odd k from 1 to 31.
pub fn default_k_grid() -> Vec<usize> {
    (1..=31).step_by(2).collect()
}

/// k-nearest-neighbour majority vote under the Euclidean metric.
#[derive(Debug, Clone)]
pub struct KnnModel {
    train: Dataset,
    k: usize,
}

impl KnnModel {
    pub fn new(train: Dataset, k: usize) -> Result<Self> {
        if train.n_rows() == 0 {
            return Err(Error::invalid("train", "empty training sample"));
        }
        if k == 0 || k > train.n_rows() {
            return Err(Error::invalid(
                "k",
                format!("{k} outside 1..={}", train.n_rows()),
            ));
        }
        Ok(Self { train, k })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// Vote shares of the k nearest training rows.
    pub fn scores(&self, x: ArrayView1<'_, f64>) -> Result<Vec<f64>> {
        check_dim(self.train.n_features(), x)?;
        let order = neighbour_order(&self.train, x, None);
        Ok(vote_shares(&self.train, &order[..self.k]))
    }

    pub fn predict(&self, x: ArrayView1<'_, f64>) -> Result<usize> {
        Ok(argmax(&self.scores(x)?))
    }
}

/// Training indices sorted by distance to `x`, ties by index.
fn neighbour_order(train: &Dataset, x: ArrayView1<'_, f64>, skip_fold: Option<(&[usize], usize)>) -> Vec<usize> {
    let mut d: Vec<(f64, usize)> = (0..train.n_rows())
        .filter(|&i| skip_fold.is_none_or(|(folds, f)| folds[i] != f))
        .map(|i| (sq_dist(train.row(i), x), i))
        .collect();
    d.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    d.into_iter().map(|(_, i)| i).collect()
}

fn vote_shares(train: &Dataset, neighbours: &[usize]) -> Vec<f64> {
    let mut votes = vec![0.0; train.n_classes()];
    for &i in neighbours {
        votes[train.labels()[i]] += 1.0;
    }
    let k = neighbours.len() as f64;
    votes.iter_mut().for_each(|v| *v /= k);
    votes
}

/// Chooses k by `folds`-fold cross-validated misclassification rate; row `j`
/// belongs to fold `j mod folds`. Candidates larger than the smallest
/// fold-training size are skipped; ties go to the smallest k.
pub fn knn_cv_select_k(train: &Dataset, grid: &[usize], folds: usize) -> Result<usize> {
    let n = train.n_rows();
    if n == 0 {
        return Err(Error::invalid("train", "empty training sample"));
    }
    if folds < 2 || folds > n {
        return Err(Error::invalid("folds", format!("{folds} outside 2..={n}")));
    }
    let min_train = n - n.div_ceil(folds);
    let mut grid: Vec<usize> = grid.iter().copied().filter(|&k| k >= 1 && k <= min_train).collect();
    grid.sort_unstable();
    grid.dedup();
    if grid.is_empty() {
        return Err(Error::invalid("k_grid", "no candidate fits the fold size"));
    }
    let fold_of: Vec<usize> = (0..n).map(|j| j % folds).collect();
    let mut errors = vec![0usize; grid.len()];
    for j in 0..n {
        let order = neighbour_order(train, train.row(j), Some((&fold_of, fold_of[j])));
        for (slot, &k) in grid.iter().enumerate() {
            if argmax(&vote_shares(train, &order[..k])) != train.labels()[j] {
                errors[slot] += 1;
            }
        }
    }
    let best = (0..grid.len()).min_by_key(|&s| (errors[s], grid[s])).expect("nonempty");
    Ok(grid[best])
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{array, Array2};

    fn dataset(features: Array2<f64>, labels: Vec<usize>, g: usize) -> Dataset {
        let d = features.ncols();
        Dataset::new(
            features,
            labels,
            (0..d).map(|j| format!("z{j}")).collect(),
            (0..g).map(|k| format!("c{k}")).collect(),
        )
        .unwrap()
    }

    fn six_points() -> Dataset {
        dataset(
            array![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [3.0, 3.0], [2.5, 3.5], [3.2, 2.0]],
            vec![0, 0, 1, 1, 1, 0],
            2,
        )
    }

    #[test]
    fn k_one_and_k_n() {
        let t = six_points();
        let m1 = KnnModel::new(t.clone(), 1).unwrap();
        assert_eq!(m1.predict(array![0.1, 0.9].view()).unwrap(), 1);
        assert_eq!(m1.predict(array![0.9, 0.1].view()).unwrap(), 0);
        // Three against three: the tie goes to class 0 everywhere.
        let m6 = KnnModel::new(t, 6).unwrap();
        for x in [[0.0, 0.0], [3.0, 3.0], [-9.0, 9.0]] {
            assert_eq!(m6.predict(array![x[0], x[1]].view()).unwrap(), 0);
        }
        let t5 = dataset(array![[0.0], [1.0], [2.0], [3.0], [4.0]], vec![1, 0, 1, 1, 0], 2);
        let m5 = KnnModel::new(t5, 5).unwrap();
        assert_eq!(m5.predict(array![1.0].view()).unwrap(), 1);
    }

    #[test]
    fn matches_brute_force_sort() {
        let t = six_points();
        let m = KnnModel::new(t.clone(), 3).unwrap();
        for x in [[0.5, 0.5], [2.0, 2.0], [3.0, 2.2], [1.5, 0.2], [0.0, 2.0]] {
            let mut d: Vec<(f64, usize)> = (0..6)
                .map(|i| {
                    let r = t.row(i);
                    ((r[0] - x[0]).powi(2) + (r[1] - x[1]).powi(2), i)
                })
                .collect();
            d.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let ones = d[..3].iter().filter(|(_, i)| t.labels()[*i] == 1).count();
            let expect = usize::from(ones >= 2);
            assert_eq!(m.predict(array![x[0], x[1]].view()).unwrap(), expect, "{x:?}");
        }
    }

    #[test]
    fn distance_ties_follow_training_index() {
        let t = dataset(array![[-1.0], [1.0]], vec![1, 0], 2);
        let m = KnnModel::new(t, 1).unwrap();
        assert_eq!(m.predict(array![0.0].view()).unwrap(), 1);
    }

    #[test]
    fn scale_invariance() {
        let t = six_points();
        let scaled = t.with_features(t.features().mapv(|v| v * 7.5), t.feature_names().to_vec()).unwrap();
        let a = KnnModel::new(t, 3).unwrap();
        let b = KnnModel::new(scaled, 3).unwrap();
        for x in [[0.5, 0.5], [2.0, 2.0], [3.0, 2.2]] {
            let xs = array![x[0] * 7.5, x[1] * 7.5];
            assert_eq!(a.predict(array![x[0], x[1]].view()).unwrap(), b.predict(xs.view()).unwrap());
        }
    }

    #[test]
    fn cv_selection() {
        // Two clean clusters: every k is perfect and the smallest wins.
        let clean = dataset(
            Array2::from_shape_fn((20, 1), |(i, _)| if i % 2 == 0 { i as f64 * 0.01 } else { 10.0 + i as f64 * 0.01 }),
            (0..20).map(|i| i % 2).collect(),
            2,
        );
        assert_eq!(knn_cv_select_k(&clean, &default_k_grid(), 10).unwrap(), 1);

        // One mislabeled point per cluster: k = 1 is fooled, larger k are not.
        let mut labels: Vec<usize> = (0..40).map(|i| usize::from(i >= 20)).collect();
        labels[3] = 1;
        labels[25] = 0;
        let noisy = dataset(
            Array2::from_shape_fn((40, 1), |(i, _)| if i < 20 { i as f64 * 0.1 } else { 50.0 + i as f64 * 0.1 }),
            labels,
            2,
        );
        let k = knn_cv_select_k(&noisy, &default_k_grid(), 10).unwrap();
        assert!(k > 1);
        assert!(knn_cv_select_k(&noisy, &[1, 3], 1).is_err());
        assert!(knn_cv_select_k(&noisy, &[100], 10).is_err());
    }
}
