use std::collections::VecDeque;

use crate::linalg::SymSparseMatrix;

/// Undirected simple graph in compressed adjacency form, neighbors sorted.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Graph {
    ptr: Vec<usize>,
    adj: Vec<usize>,
}

/// Vertices `0..n`, an edge between `i ≠ j` wherever `A(i, j) ≠ 0`.
pub fn adjacency_graph(a: &SymSparseMatrix) -> Graph {
    let n = a.n();
    let mut ptr = Vec::with_capacity(n + 1);
    let mut adj = Vec::new();
    ptr.push(0);
    for i in 0..n {
        let (cols, vals) = a.row(i);
        adj.extend(cols.iter().zip(vals).filter(|(&j, &v)| j != i && v != 0.0).map(|(&j, _)| j));
        ptr.push(adj.len());
    }
    Graph { ptr, adj }
}

impl Graph {
    /// Builds a graph from an edge list; duplicates and self loops are ignored.
    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Self {
        let mut lists = vec![Vec::new(); n];
        for &(a, b) in edges {
            if a != b {
                lists[a].push(b);
                lists[b].push(a);
            }
        }
        let mut ptr = vec![0];
        let mut adj = Vec::new();
        for mut l in lists {
            l.sort_unstable();
            l.dedup();
            adj.extend(l);
            ptr.push(adj.len());
        }
        Self { ptr, adj }
    }

    pub fn n(&self) -> usize {
        self.ptr.len() - 1
    }

    pub fn n_edges(&self) -> usize {
        self.adj.len() / 2
    }

    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.adj[self.ptr[v]..self.ptr[v + 1]]
    }

    pub fn degree(&self, v: usize) -> usize {
        self.ptr[v + 1] - self.ptr[v]
    }

    /// Component id per vertex, numbered in order of smallest member.
    pub fn components(&self) -> (usize, Vec<usize>) {
        let n = self.n();
        let mut comp = vec![usize::MAX; n];
        let mut count = 0;
        let mut queue = VecDeque::new();
        for s in 0..n {
            if comp[s] != usize::MAX {
                continue;
            }
            comp[s] = count;
            queue.push_back(s);
            while let Some(v) = queue.pop_front() {
                for &w in self.neighbors(v) {
                    if comp[w] == usize::MAX {
                        comp[w] = count;
                        queue.push_back(w);
                    }
                }
            }
            count += 1;
        }
        (count, comp)
    }

    pub fn is_connected(&self) -> bool {
        self.n() == 0 || self.components().0 == 1
    }

    /// True if the subgraph induced by `set` is connected (empty sets count as connected).
    pub fn is_connected_subset(&self, set: &[usize]) -> bool {
        if set.is_empty() {
            return true;
        }
        let mut inside = vec![false; self.n()];
        for &v in set {
            inside[v] = true;
        }
        let mut seen = vec![false; self.n()];
        let mut queue = VecDeque::from([set[0]]);
        seen[set[0]] = true;
        let mut reached = 1;
        while let Some(v) = queue.pop_front() {
            for &w in self.neighbors(v) {
                if inside[w] && !seen[w] {
                    seen[w] = true;
                    reached += 1;
                    queue.push_back(w);
                }
            }
        }
        reached == set.len()
    }

    /// Multi-source BFS distances from `sources`, truncated at `max_depth` (others `usize::MAX`).
    pub fn bfs_distances(&self, sources: &[usize], max_depth: usize) -> Vec<usize> {
        let mut dist = vec![usize::MAX; self.n()];
        let mut queue = VecDeque::new();
        for &s in sources {
            if dist[s] == usize::MAX {
                dist[s] = 0;
                queue.push_back(s);
            }
        }
        while let Some(v) = queue.pop_front() {
            if dist[v] >= max_depth {
                continue;
            }
            for &w in self.neighbors(v) {
                if dist[w] == usize::MAX {
                    dist[w] = dist[v] + 1;
                    queue.push_back(w);
                }
            }
        }
        dist
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn path_graph_from_tridiagonal() {
        let mut e = Vec::new();
        for i in 0..5 {
            e.push((i, i, 2.0));
            if i + 1 < 5 {
                e.push((i, i + 1, -1.0));
            }
        }
        let g = adjacency_graph(&SymSparseMatrix::from_upper_triplets(5, e).unwrap());
        assert_eq!(g.n_edges(), 4);
        assert_eq!(g.neighbors(2), &[1, 3]);
        assert!(g.is_connected());
    }

    #[test]
    fn diagonal_matrix_is_edgeless() {
        let g = adjacency_graph(&SymSparseMatrix::identity(4));
        assert_eq!(g.n_edges(), 0);
        assert_eq!(g.components().0, 4);
    }
}
