use std::collections::HashMap;

use super::SparseGraph;
use crate::{Error, Real, Result};

/// Support of one mini-batch: target nodes, their L-hop closure, and the
/// induced slice of the global normalized adjacency.
#[derive(Debug, Clone)]
pub struct SubgraphBatch<T = f64> {
    /// Global ids of the target nodes, deduplicated, in input order.
    pub targets: Vec<usize>,
    /// Targets first, then the remaining nodes in breadth-first discovery order.
    pub closure: Vec<usize>,
    /// Induced subgraph over `closure`, indexed by local position. Weights are
    /// copied from the global graph, not renormalized.
    pub local_graph: SparseGraph<T>,
    pub global_to_local: HashMap<usize, usize>,
}

impl<T> SubgraphBatch<T> {
    pub fn num_targets(&self) -> usize {
        self.targets.len()
    }

    pub fn local_index(&self, global: usize) -> Option<usize> {
        self.global_to_local.get(&global).copied()
    }
}

/// Expands `targets` breadth-first by `hops` and slices the induced subgraph.
pub fn sample_lhop<T: Real>(g: &SparseGraph<T>, targets: &[usize], hops: usize) -> Result<SubgraphBatch<T>> {
    if targets.is_empty() {
        return Err(Error::Empty("target set"));
    }
    if hops == 0 {
        return Err(Error::invalid("sampling needs at least one hop"));
    }
    let n = g.num_nodes();
    let mut global_to_local = HashMap::with_capacity(targets.len() * 4);
    let mut closure = Vec::with_capacity(targets.len() * 4);
    for &t in targets {
        if t >= n {
            return Err(Error::NodeOutOfRange { id: t, num_nodes: n });
        }
        if let std::collections::hash_map::Entry::Vacant(e) = global_to_local.entry(t) {
            e.insert(closure.len());
            closure.push(t);
        }
    }
    let num_targets = closure.len();

    let mut frontier = 0..num_targets;
    for _ in 0..hops {
        let end = closure.len();
        for k in frontier.clone() {
            let u = closure[k];
            for &v in g.neighbors(u) {
                if let std::collections::hash_map::Entry::Vacant(e) = global_to_local.entry(v) {
                    e.insert(closure.len());
                    closure.push(v);
                }
            }
        }
        if closure.len() == end {
            break;
        }
        frontier = end..closure.len();
    }

    let mut row_ptr = Vec::with_capacity(closure.len() + 1);
    let mut col_idx = Vec::new();
    let mut values = Vec::new();
    let mut row: Vec<(usize, T)> = Vec::new();
    row_ptr.push(0);
    for &u in &closure {
        row.clear();
        let (nbrs, vals) = g.row(u);
        for (&v, &w) in nbrs.iter().zip(vals) {
            if let Some(&j) = global_to_local.get(&v) {
                row.push((j, w));
            }
        }
        row.sort_unstable_by_key(|&(j, _)| j);
        for &(j, w) in &row {
            col_idx.push(j);
            values.push(w);
        }
        row_ptr.push(col_idx.len());
    }
    let local_graph = SparseGraph { num_nodes: closure.len(), row_ptr, col_idx, values };
    Ok(SubgraphBatch { targets: closure[..num_targets].to_vec(), closure, local_graph, global_to_local })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::build_graph;

    fn path(n: usize) -> SparseGraph {
        let edges: Vec<_> = (1..n).map(|i| (i - 1, i)).collect();
        build_graph::<f64>(&edges, n).unwrap().normalize(true)
    }

    #[test]
    fn all_targets_reproduce_graph() {
        let g = path(5);
        let b = sample_lhop(&g, &[0, 1, 2, 3, 4], 1).unwrap();
        assert_eq!(b.closure, vec![0, 1, 2, 3, 4]);
        assert_eq!(b.local_graph, g);
    }

    #[test]
    fn one_hop_from_middle_of_path() {
        let g = path(3);
        let b = sample_lhop(&g, &[1], 1).unwrap();
        assert_eq!(b.closure, vec![1, 0, 2]);
        assert_eq!(b.targets, vec![1]);
    }

    #[test]
    fn two_hops_from_end_of_path() {
        let g = path(4);
        let b = sample_lhop(&g, &[0], 2).unwrap();
        assert_eq!(b.closure, vec![0, 1, 2]);
    }

    #[test]
    fn local_values_are_global_slices() {
        let g = path(4);
        let b = sample_lhop(&g, &[0], 1).unwrap();
        let lg = &b.local_graph;
        for (li, &gi) in b.closure.iter().enumerate() {
            for (lj, &gj) in b.closure.iter().enumerate() {
                assert_eq!(lg.value(li, lj), g.value(gi, gj));
            }
        }
    }

    #[test]
    fn duplicate_targets_collapse() {
        let g = path(3);
        let b = sample_lhop(&g, &[2, 2, 0], 1).unwrap();
        assert_eq!(b.targets, vec![2, 0]);
        assert_eq!(b.closure, vec![2, 0, 1]);
    }

    #[test]
    fn rejects_bad_requests() {
        let g = path(3);
        assert!(matches!(sample_lhop(&g, &[], 1), Err(Error::Empty(_))));
        assert!(sample_lhop(&g, &[0], 0).is_err());
        assert!(matches!(sample_lhop(&g, &[7], 1), Err(Error::NodeOutOfRange { .. })));
    }
}
