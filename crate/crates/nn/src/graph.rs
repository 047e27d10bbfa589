//! Dense graph inputs shared by the models.

use ndarray::Array2;
use unisg_core::graph_export::GraphTensors;

/// `D^{-1/2} (A + I) D^{-1/2}`.
pub fn gcn_norm(a: &Array2<f64>) -> Array2<f64> {
    let n = a.nrows();
    let mut m = a.clone();
    for i in 0..n {
        m[[i, i]] += 1.0;
    }
    let d: Vec<f64> = m.rows().into_iter().map(|r| 1.0 / r.sum().sqrt()).collect();
    for ((i, j), v) in m.indexed_iter_mut() {
        *v *= d[i] * d[j];
    }
    m
}

/// Row-normalised adjacency; isolated nodes get an all-zero row.
pub fn mean_aggregator(a: &Array2<f64>) -> Array2<f64> {
    let mut m = a.clone();
    for mut r in m.rows_mut() {
        let s = r.sum();
        if s > 0.0 {
            r /= s;
        }
    }
    m
}

#[derive(Debug, Clone)]
pub struct GraphInput {
    pub x: Array2<f64>,
    pub a: Array2<f64>,
    pub a_gcn: Array2<f64>,
    pub a_mean: Array2<f64>,
    pub categories: Vec<usize>,
    pub label: Option<usize>,
}

impl GraphInput {
    pub fn new(x: Array2<f64>, a: Array2<f64>, categories: Vec<usize>, label: Option<usize>) -> Self {
        Self {
            a_gcn: gcn_norm(&a),
            a_mean: mean_aggregator(&a),
            x,
            a,
            categories,
            label,
        }
    }

    pub fn from_tensors(t: &GraphTensors) -> Self {
        Self::new(t.x.clone(), t.a.clone(), t.categories.clone(), t.graph_label)
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn f(&self) -> usize {
        self.x.ncols()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn gcn_norm_of_path() {
        let a = array![[0.0, 1.0], [1.0, 0.0]];
        let n = gcn_norm(&a);
        assert!(n.iter().all(|v| (v - 0.5).abs() < 1e-15));
    }

    #[test]
    fn mean_aggregator_rows() {
        let a = array![[0.0, 1.0, 1.0], [1.0, 0.0, 0.0], [0.0, 0.0, 0.0]];
        let m = mean_aggregator(&a);
        assert_eq!(m.row(0).to_vec(), vec![0.0, 0.5, 0.5]);
        assert_eq!(m.row(2).to_vec(), vec![0.0, 0.0, 0.0]);
    }
}
