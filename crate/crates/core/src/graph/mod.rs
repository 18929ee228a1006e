//! Sparse graphs in CSR form.
//!
//! A [`SparseGraph`] is immutable once built. Raw graphs come out of
//! [`build_graph`] with unit weights; [`SparseGraph::normalize`] turns one into
//! the symmetrically normalized adjacency `D^{-1/2} A D^{-1/2}` that every
//! propagation step multiplies with.

mod edgelist;
mod sample;

use rayon::prelude::*;

pub use edgelist::{parse_edge_list, read_edge_list, write_edge_list};
pub use sample::{sample_lhop, SubgraphBatch};

use crate::{Error, Matrix, Real, Result};

/// Nonzeros times columns above which `spmm` splits output rows across threads.
const PAR_MIN_WORK: usize = 1 << 15;

#[derive(Debug, Clone, PartialEq)]
pub struct SparseGraph<T = f64> {
    num_nodes: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<T>,
}

/// Builds the undirected unit-weight graph over `num_nodes` nodes.
///
/// Every pair is stored in both directions, duplicates collapse, and an input
/// self-loop is kept once.
pub fn build_graph<T: Real>(edges: &[(usize, usize)], num_nodes: usize) -> Result<SparseGraph<T>> {
    if num_nodes == 0 {
        return Err(Error::EmptyGraph);
    }
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); num_nodes];
    for &(s, d) in edges {
        for id in [s, d] {
            if id >= num_nodes {
                return Err(Error::NodeOutOfRange { id, num_nodes });
            }
        }
        adj[s].push(d);
        if s != d {
            adj[d].push(s);
        }
    }
    let mut row_ptr = Vec::with_capacity(num_nodes + 1);
    let mut col_idx = Vec::new();
    row_ptr.push(0);
    for mut nbrs in adj {
        nbrs.sort_unstable();
        nbrs.dedup();
        col_idx.extend(nbrs);
        row_ptr.push(col_idx.len());
    }
    let values = vec![T::one(); col_idx.len()];
    Ok(SparseGraph { num_nodes, row_ptr, col_idx, values })
}

impl<T: Real> SparseGraph<T> {
    /// Assembles a graph from raw CSR arrays, checking the layout invariants
    /// (monotone offsets, strictly increasing in-range columns, finite values).
    pub fn from_csr(num_nodes: usize, row_ptr: Vec<usize>, col_idx: Vec<usize>, values: Vec<T>) -> Result<Self> {
        if num_nodes == 0 {
            return Err(Error::EmptyGraph);
        }
        if row_ptr.len() != num_nodes + 1 || row_ptr[0] != 0 {
            return Err(Error::Format("row_ptr must have num_nodes+1 entries starting at 0".into()));
        }
        if row_ptr[num_nodes] != col_idx.len() || col_idx.len() != values.len() {
            return Err(Error::Format("row_ptr end, col_idx and values lengths disagree".into()));
        }
        for i in 0..num_nodes {
            if row_ptr[i] > row_ptr[i + 1] {
                return Err(Error::Format(format!("row_ptr decreases at row {i}")));
            }
            let cols = &col_idx[row_ptr[i]..row_ptr[i + 1]];
            if cols.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::Format(format!("columns of row {i} are not strictly increasing")));
            }
            if let Some(&c) = cols.last() {
                if c >= num_nodes {
                    return Err(Error::NodeOutOfRange { id: c, num_nodes });
                }
            }
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("edge weights"));
        }
        Ok(Self { num_nodes, row_ptr, col_idx, values })
    }

    #[inline]
    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    /// Stored entries, counting both directions of each edge and self-loops once.
    #[inline]
    pub fn nnz(&self) -> usize {
        self.col_idx.len()
    }

    pub fn row_ptr(&self) -> &[usize] {
        &self.row_ptr
    }

    pub fn col_idx(&self) -> &[usize] {
        &self.col_idx
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    #[inline]
    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.col_idx[self.row_ptr[i]..self.row_ptr[i + 1]]
    }

    #[inline]
    pub fn row(&self, i: usize) -> (&[usize], &[T]) {
        let span = self.row_ptr[i]..self.row_ptr[i + 1];
        (&self.col_idx[span.clone()], &self.values[span])
    }

    pub fn degree(&self, i: usize) -> usize {
        self.row_ptr[i + 1] - self.row_ptr[i]
    }

    /// Stored weight of `(i, j)`, or `None` when absent.
    pub fn value(&self, i: usize, j: usize) -> Option<T> {
        let (cols, vals) = self.row(i);
        cols.binary_search(&j).ok().map(|k| vals[k])
    }

    /// True when every `(i, j)` has a matching `(j, i)` with a bit-identical weight.
    pub fn is_symmetric(&self) -> bool {
        (0..self.num_nodes).all(|i| {
            let (cols, vals) = self.row(i);
            cols.iter().zip(vals).all(|(&j, &v)| self.value(j, i).is_some_and(|w| w == v))
        })
    }

    /// Symmetric normalization `a_ij / sqrt(d_i d_j)` with `d` the row sums.
    ///
    /// With `add_self_loops`, a unit diagonal entry is inserted on every row
    /// that lacks one before degrees are taken. Rows of degree zero stay empty.
    pub fn normalize(&self, add_self_loops: bool) -> SparseGraph<T> {
        let n = self.num_nodes;
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut col_idx = Vec::with_capacity(self.nnz() + if add_self_loops { n } else { 0 });
        let mut raw = Vec::with_capacity(col_idx.capacity());
        row_ptr.push(0);
        for i in 0..n {
            let (cols, vals) = self.row(i);
            let mut inserted = !add_self_loops || cols.binary_search(&i).is_ok();
            for (&j, &v) in cols.iter().zip(vals) {
                if !inserted && j > i {
                    col_idx.push(i);
                    raw.push(T::one());
                    inserted = true;
                }
                col_idx.push(j);
                raw.push(v);
            }
            if !inserted {
                col_idx.push(i);
                raw.push(T::one());
            }
            row_ptr.push(col_idx.len());
        }
        let degree: Vec<T> = (0..n).map(|i| raw[row_ptr[i]..row_ptr[i + 1]].iter().copied().sum()).collect();
        let mut values = raw;
        for i in 0..n {
            for k in row_ptr[i]..row_ptr[i + 1] {
                let j = col_idx[k];
                // product first so (i, j) and (j, i) round identically
                values[k] /= (degree[i] * degree[j]).sqrt();
            }
        }
        SparseGraph { num_nodes: n, row_ptr, col_idx, values }
    }

    /// Sparse-dense product `self * x`.
    ///
    /// Each output entry accumulates its row's nonzeros in increasing column
    /// order, so the result is independent of how rows are split across threads.
    pub fn spmm(&self, x: &Matrix<T>) -> Result<Matrix<T>> {
        self.check_rows(x)?;
        let mut out = Matrix::zeros(self.num_nodes, x.cols());
        self.spmm_into(x, out.data_mut());
        Ok(out)
    }

    /// Fused diffusion step `scale * (self * x) + shift * base`, the body of both
    /// the forward and the backward recursion.
    pub(crate) fn diffuse(&self, x: &Matrix<T>, scale: T, base: &Matrix<T>, shift: T) -> Matrix<T> {
        let cols = x.cols();
        let mut out = Matrix::zeros(self.num_nodes, cols);
        self.spmm_into(x, out.data_mut());
        for (o, &b) in out.data_mut().iter_mut().zip(base.data()) {
            *o = scale * *o + shift * b;
        }
        out
    }

    fn spmm_into(&self, x: &Matrix<T>, out: &mut [T]) {
        let cols = x.cols();
        if cols == 0 {
            return;
        }
        let kernel = |(i, out_row): (usize, &mut [T])| {
            let (nbrs, vals) = self.row(i);
            for (&j, &v) in nbrs.iter().zip(vals) {
                for (o, &xv) in out_row.iter_mut().zip(x.row(j)) {
                    *o += v * xv;
                }
            }
        };
        if self.nnz() * cols >= PAR_MIN_WORK {
            out.par_chunks_mut(cols).enumerate().for_each(kernel);
        } else {
            out.chunks_mut(cols).enumerate().for_each(kernel);
        }
    }

    pub(crate) fn check_rows(&self, x: &Matrix<T>) -> Result<()> {
        if x.rows() != self.num_nodes {
            return Err(Error::shape(format!("graph has {} nodes but matrix has {} rows", self.num_nodes, x.rows())));
        }
        Ok(())
    }

    /// Dense copy, for small-graph oracles.
    pub fn to_dense(&self) -> Matrix<T> {
        let n = self.num_nodes;
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                m.set(i, j, v);
            }
        }
        m
    }

    /// Undirected edge list with `i <= j`, the inverse of [`build_graph`].
    pub fn edge_pairs(&self) -> Vec<(usize, usize)> {
        (0..self.num_nodes)
            .flat_map(|i| self.neighbors(i).iter().filter(move |&&j| j >= i).map(move |&j| (i, j)))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dense(g: &SparseGraph) -> Vec<Vec<f64>> {
        g.to_dense().to_rows()
    }

    #[test]
    fn empty_graph_has_zero_offsets() {
        let g: SparseGraph = build_graph(&[], 3).unwrap();
        assert_eq!(g.row_ptr(), &[0, 0, 0, 0]);
        assert_eq!(g.nnz(), 0);
    }

    #[test]
    fn single_edge_is_symmetrized() {
        let g: SparseGraph = build_graph(&[(0, 1)], 2).unwrap();
        assert_eq!(g.value(0, 1), Some(1.0));
        assert_eq!(g.value(1, 0), Some(1.0));
        assert_eq!(g.nnz(), 2);
    }

    #[test]
    fn duplicate_and_reversed_edges_collapse() {
        let a: SparseGraph = build_graph(&[(0, 1)], 2).unwrap();
        let b: SparseGraph = build_graph(&[(0, 1), (1, 0), (0, 1)], 2).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn self_loop_kept_once() {
        let g: SparseGraph = build_graph(&[(1, 1), (1, 1), (0, 1)], 2).unwrap();
        assert_eq!(g.neighbors(1), &[0, 1]);
    }

    #[test]
    fn build_rejects_bad_input() {
        assert!(matches!(build_graph::<f64>(&[], 0), Err(Error::EmptyGraph)));
        assert!(matches!(build_graph::<f64>(&[(0, 3)], 3), Err(Error::NodeOutOfRange { id: 3, num_nodes: 3 })));
    }

    #[test]
    fn normalize_two_nodes_with_self_loops() {
        let g: SparseGraph = build_graph(&[(0, 1)], 2).unwrap();
        assert_eq!(dense(&g.normalize(true)), vec![vec![0.5, 0.5], vec![0.5, 0.5]]);
    }

    #[test]
    fn normalize_triangle_without_self_loops() {
        let g: SparseGraph = build_graph(&[(0, 1), (1, 2), (2, 0)], 3).unwrap();
        let a = dense(&g.normalize(false));
        for (i, row) in a.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                assert_eq!(v, if i == j { 0.0 } else { 0.5 });
            }
        }
    }

    #[test]
    fn isolated_node_row_stays_zero() {
        let g: SparseGraph = build_graph(&[(0, 1)], 3).unwrap();
        let a = g.normalize(false);
        assert_eq!(a.degree(2), 0);
        assert!((0..3).all(|i| a.value(i, 2).is_none()));
    }

    #[test]
    fn normalize_keeps_existing_self_loop() {
        let g: SparseGraph = build_graph(&[(0, 0), (0, 1)], 2).unwrap();
        let a = g.normalize(true);
        assert_eq!(a.nnz(), 4);
        // d = (2, 2)
        assert_eq!(a.value(0, 0), Some(0.5));
    }

    #[test]
    fn spmm_examples() {
        let empty: SparseGraph = build_graph(&[], 2).unwrap();
        let x = Matrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        assert_eq!(empty.spmm(&x).unwrap(), Matrix::zeros(2, 2));

        let eye = empty.normalize(true);
        assert_eq!(eye.spmm(&x).unwrap(), x);

        let a = build_graph::<f64>(&[(0, 1)], 2).unwrap().normalize(true);
        let y = a.spmm(&Matrix::from_rows(&[vec![1.0], vec![0.0]]).unwrap()).unwrap();
        assert_eq!(y.data(), &[0.5, 0.5]);

        assert!(a.spmm(&Matrix::zeros(3, 1)).is_err());
    }

    #[test]
    fn from_csr_validates_layout() {
        assert!(SparseGraph::<f64>::from_csr(2, vec![0, 1, 2], vec![1, 0], vec![1.0, 1.0]).is_ok());
        assert!(SparseGraph::<f64>::from_csr(2, vec![0, 2, 1], vec![0, 1], vec![1.0, 1.0]).is_err());
        assert!(SparseGraph::<f64>::from_csr(2, vec![0, 2, 2], vec![1, 0], vec![1.0, 1.0]).is_err());
        assert!(SparseGraph::<f64>::from_csr(2, vec![0, 1, 2], vec![1, 2], vec![1.0, 1.0]).is_err());
    }

    #[test]
    fn edge_pairs_round_trip() {
        let edges = [(0, 1), (1, 2), (2, 2), (0, 3)];
        let g: SparseGraph = build_graph(&edges, 4).unwrap();
        let back: SparseGraph = build_graph(&g.edge_pairs(), 4).unwrap();
        assert_eq!(g, back);
    }
}
