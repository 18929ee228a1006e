//! Node-classification datasets: graph, features, labels and splits.

mod io;
mod sbm;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub use io::{
    load_dataset, load_dataset_dir, read_features, read_labels, read_splits, write_dataset, write_features_csv,
    write_features_lzft, write_labels_csv, write_splits_csv, DatasetPaths, FEATURE_MAGIC, FEATURE_VERSION,
};
pub use sbm::{generate_sbm, SbmSpec};

use crate::{Error, Matrix, Real, Result, SparseGraph};

/// Node ids of the train, validation and test sets, each sorted ascending.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Split {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SplitKind {
    Train,
    Val,
    Test,
}

impl SplitKind {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "train" => Some(Self::Train),
            "val" => Some(Self::Val),
            "test" => Some(Self::Test),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Train => "train",
            Self::Val => "val",
            Self::Test => "test",
        }
    }
}

impl Split {
    /// Seeded shuffle of `0..n`, cut into `train_frac`, `val_frac` and the rest.
    pub fn random(n: usize, train_frac: f64, val_frac: f64, seed: u64) -> Result<Self> {
        if !(0.0..=1.0).contains(&train_frac) || !(0.0..=1.0).contains(&val_frac) || train_frac + val_frac > 1.0 {
            return Err(Error::invalid(format!("split fractions {train_frac} + {val_frac} must lie in [0, 1]")));
        }
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let n_train = (train_frac * n as f64).round() as usize;
        let n_val = ((val_frac * n as f64).round() as usize).min(n - n_train);
        let mut train = order[..n_train].to_vec();
        let mut val = order[n_train..n_train + n_val].to_vec();
        let mut test = order[n_train + n_val..].to_vec();
        train.sort_unstable();
        val.sort_unstable();
        test.sort_unstable();
        Ok(Self { train, val, test })
    }

    /// The default 60/20/20 split.
    pub fn default_for(n: usize, seed: u64) -> Self {
        Self::random(n, 0.6, 0.2, seed).expect("static fractions are valid")
    }

    pub fn get(&self, kind: SplitKind) -> &[usize] {
        match kind {
            SplitKind::Train => &self.train,
            SplitKind::Val => &self.val,
            SplitKind::Test => &self.test,
        }
    }

    /// Per-node membership, `None` for nodes in no set.
    pub fn assignment(&self, n: usize) -> Vec<Option<SplitKind>> {
        let mut out = vec![None; n];
        for kind in [SplitKind::Train, SplitKind::Val, SplitKind::Test] {
            for &v in self.get(kind) {
                if v < n {
                    out[v] = Some(kind);
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct Dataset<T = f64> {
    /// Normalized adjacency.
    pub graph: SparseGraph<T>,
    pub features: Matrix<T>,
    pub labels: Vec<usize>,
    pub num_classes: usize,
    pub split: Split,
}

impl<T: Real> Dataset<T> {
    /// Checks that shapes agree, labels are in range and the three sets are
    /// disjoint.
    pub fn new(
        graph: SparseGraph<T>,
        features: Matrix<T>,
        labels: Vec<usize>,
        num_classes: usize,
        split: Split,
    ) -> Result<Self> {
        let n = graph.num_nodes();
        if features.rows() != n {
            return Err(Error::Inconsistent(format!(
                "feature matrix has {} rows but the graph has {n} nodes",
                features.rows()
            )));
        }
        if labels.len() != n {
            return Err(Error::Inconsistent(format!("{} labels for a graph with {n} nodes", labels.len())));
        }
        if let Some(&bad) = labels.iter().find(|&&y| y >= num_classes) {
            return Err(Error::invalid(format!("label {bad} exceeds {num_classes} classes")));
        }
        let mut seen = vec![false; n];
        for kind in [SplitKind::Train, SplitKind::Val, SplitKind::Test] {
            for &v in split.get(kind) {
                if v >= n {
                    return Err(Error::NodeOutOfRange { id: v, num_nodes: n });
                }
                if std::mem::replace(&mut seen[v], true) {
                    return Err(Error::invalid(format!("node {v} appears in more than one split set")));
                }
            }
        }
        Ok(Self { graph, features, labels, num_classes, split })
    }

    pub fn num_nodes(&self) -> usize {
        self.graph.num_nodes()
    }

    pub fn feature_dim(&self) -> usize {
        self.features.cols()
    }

    pub fn cast<U: Real>(&self) -> Dataset<U> {
        let g = &self.graph;
        let graph = SparseGraph::from_csr(
            g.num_nodes(),
            g.row_ptr().to_vec(),
            g.col_idx().to_vec(),
            g.values().iter().map(|v| U::lit(v.as_f64())).collect(),
        )
        .expect("layout copied from a valid graph");
        Dataset {
            graph,
            features: self.features.cast(),
            labels: self.labels.clone(),
            num_classes: self.num_classes,
            split: self.split.clone(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::build_graph;

    #[test]
    fn random_split_partitions_nodes() {
        let s = Split::random(103, 0.6, 0.2, 4).unwrap();
        assert_eq!(s.train.len(), 62);
        assert_eq!(s.val.len(), 21);
        assert_eq!(s.test.len(), 20);
        let mut all: Vec<_> = s.train.iter().chain(&s.val).chain(&s.test).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..103).collect::<Vec<_>>());
        assert_eq!(s, Split::random(103, 0.6, 0.2, 4).unwrap());
        assert_ne!(s, Split::random(103, 0.6, 0.2, 5).unwrap());
        assert!(Split::random(10, 0.8, 0.3, 0).is_err());
    }

    #[test]
    fn dataset_validation() {
        let g = build_graph::<f64>(&[(0, 1)], 3).unwrap().normalize(true);
        let x = Matrix::zeros(3, 2);
        let split = Split { train: vec![0], val: vec![1], test: vec![2] };
        assert!(Dataset::new(g.clone(), x.clone(), vec![0, 1, 1], 2, split.clone()).is_ok());
        assert!(Dataset::new(g.clone(), Matrix::zeros(2, 2), vec![0, 1, 1], 2, split.clone()).is_err());
        assert!(Dataset::new(g.clone(), x.clone(), vec![0, 1, 2], 2, split.clone()).is_err());
        let overlap = Split { train: vec![0, 1], val: vec![1], test: vec![] };
        assert!(Dataset::new(g, x, vec![0, 1, 1], 2, overlap).is_err());
    }
}
