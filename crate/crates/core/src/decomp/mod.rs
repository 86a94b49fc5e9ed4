//! Graph partitioning, overlap growth and the algebraic partition of unity.

mod graph;
mod partition;

pub use graph::{adjacency_graph, Graph};
pub use partition::{
    part_vector, partition_coordinates, partition_graph, parts_from_vector, read_partition_vector,
    write_partition_vector,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Overlapping decomposition of the vertex set `0..n`.
///
/// Subdomain `i` owns the interior set `V_I,i`; its overlapping set `V_i` adds the halo of
/// vertices at graph distance `1..=delta` from `V_I,i`. Local numbering inside `V_i` follows
/// increasing global index.
#[derive(Clone, Debug, PartialEq)]
pub struct Decomposition {
    pub delta: usize,
    pub seed: Option<u64>,
    n: usize,
    interior: Vec<Vec<usize>>,
    halo: Vec<Vec<usize>>,
    overlapping: Vec<Vec<usize>>,
    halo_flags: Vec<Vec<bool>>,
    multiplicity: Vec<usize>,
}

/// Combinatorial constants of a decomposition.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct OverlapStats {
    /// Colors used by a greedy coloring of the subdomain intersection graph (an upper bound
    /// on its chromatic number).
    pub k_c: usize,
    /// Largest number of overlapping sets sharing one vertex.
    pub k_m: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecompositionManifest {
    pub k: usize,
    pub delta: usize,
    pub sizes: Vec<usize>,
    pub interior_sizes: Vec<usize>,
    pub k_c: usize,
    pub k_m: usize,
    pub seed: Option<u64>,
}

/// Grows each interior set by `delta` BFS layers and computes multiplicities.
pub fn grow_overlap(graph: &Graph, interior_sets: Vec<Vec<usize>>, delta: usize) -> Result<Decomposition> {
    let n = graph.n();
    let mut owner = vec![usize::MAX; n];
    for (i, set) in interior_sets.iter().enumerate() {
        if set.is_empty() {
            return Err(Error::InvalidParameter(format!("interior set {i} is empty")));
        }
        for &v in set {
            if v >= n {
                return Err(Error::IndexOutOfRange { index: v, dim: n });
            }
            if owner[v] != usize::MAX {
                return Err(Error::InvalidParameter(format!(
                    "vertex {v} belongs to interior sets {} and {i}",
                    owner[v]
                )));
            }
            owner[v] = i;
        }
    }
    if let Some(v) = owner.iter().position(|&o| o == usize::MAX) {
        return Err(Error::InvalidParameter(format!("vertex {v} is in no interior set")));
    }
    let interior: Vec<Vec<usize>> = interior_sets
        .into_iter()
        .map(|mut s| {
            s.sort_unstable();
            s
        })
        .collect();
    let grown: Vec<(Vec<usize>, Vec<usize>, Vec<bool>)> = {
        use rayon::prelude::*;
        interior
            .par_iter()
            .map(|set| {
                let dist = graph.bfs_distances(set, delta);
                let mut halo = Vec::new();
                let mut all = Vec::new();
                let mut flags = Vec::new();
                for (v, &d) in dist.iter().enumerate() {
                    if d == usize::MAX {
                        continue;
                    }
                    all.push(v);
                    flags.push(d > 0);
                    if d > 0 {
                        halo.push(v);
                    }
                }
                (halo, all, flags)
            })
            .collect()
    };
    let mut multiplicity = vec![0usize; n];
    let mut halo = Vec::with_capacity(grown.len());
    let mut overlapping = Vec::with_capacity(grown.len());
    let mut halo_flags = Vec::with_capacity(grown.len());
    for (h, all, flags) in grown {
        for &v in &all {
            multiplicity[v] += 1;
        }
        halo.push(h);
        overlapping.push(all);
        halo_flags.push(flags);
    }
    Ok(Decomposition {
        delta,
        seed: None,
        n,
        interior,
        halo,
        overlapping,
        halo_flags,
        multiplicity,
    })
}

/// Partitions (by coordinates when given, else by graph structure) and grows overlaps.
pub fn decompose(
    graph: &Graph,
    coords: Option<&[[f64; 3]]>,
    k: usize,
    delta: usize,
    seed: u64,
) -> Result<Decomposition> {
    let parts = match coords {
        Some(c) => {
            if c.len() != graph.n() {
                return Err(Error::dims("vertex coordinates", graph.n(), c.len()));
            }
            partition_coordinates(c, k)?
        }
        None => partition_graph(graph, k, seed)?,
    };
    let mut d = grow_overlap(graph, parts, delta)?;
    d.seed = Some(seed);
    Ok(d)
}

impl Decomposition {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.interior.len()
    }

    pub fn interior(&self, i: usize) -> &[usize] {
        &self.interior[i]
    }

    pub fn halo(&self, i: usize) -> &[usize] {
        &self.halo[i]
    }

    /// `V_i`, sorted.
    pub fn overlapping(&self, i: usize) -> &[usize] {
        &self.overlapping[i]
    }

    /// Per local index of `V_i`, whether the vertex belongs to the halo.
    pub fn halo_flags(&self, i: usize) -> &[bool] {
        &self.halo_flags[i]
    }

    pub fn multiplicity(&self) -> &[usize] {
        &self.multiplicity
    }

    /// Partition-of-unity weights `1/d_v` in the local ordering of `V_i`.
    pub fn pou_weights(&self, i: usize) -> Vec<f64> {
        self.overlapping[i].iter().map(|&v| 1.0 / self.multiplicity[v] as f64).collect()
    }

    /// Local index of global vertex `v` in `V_i`.
    pub fn local_index(&self, i: usize, v: usize) -> Option<usize> {
        self.overlapping[i].binary_search(&v).ok()
    }

    /// Row sums of `Σ_i R_iᵀ D_i R_i`, accumulated per subdomain in index order.
    pub fn pou_row_sums(&self) -> Vec<f64> {
        let mut s = vec![0.0; self.n];
        for i in 0..self.k() {
            for (&v, w) in self.overlapping[i].iter().zip(self.pou_weights(i)) {
                s[v] += w;
            }
        }
        s
    }

    /// Pairs `(i, j)`, `i < j`, whose overlapping sets intersect.
    pub fn intersection_pairs(&self) -> Vec<(usize, usize)> {
        let k = self.k();
        let mut containing = vec![Vec::new(); self.n];
        for i in 0..k {
            for &v in &self.overlapping[i] {
                containing[v].push(i);
            }
        }
        let mut adj = vec![vec![false; k]; k];
        for list in &containing {
            for (a, &i) in list.iter().enumerate() {
                for &j in &list[a + 1..] {
                    adj[i][j] = true;
                }
            }
        }
        let mut out = Vec::new();
        for (i, row) in adj.iter().enumerate() {
            for (j, &x) in row.iter().enumerate() {
                if x {
                    out.push((i, j));
                }
            }
        }
        out
    }

    pub fn manifest(&self) -> DecompositionManifest {
        let stats = overlap_stats(self);
        DecompositionManifest {
            k: self.k(),
            delta: self.delta,
            sizes: self.overlapping.iter().map(Vec::len).collect(),
            interior_sizes: self.interior.iter().map(Vec::len).collect(),
            k_c: stats.k_c,
            k_m: stats.k_m,
            seed: self.seed,
        }
    }
}

/// `k_c` by largest-degree-first greedy coloring, `k_m = max_v d_v`.
pub fn overlap_stats(d: &Decomposition) -> OverlapStats {
    let k = d.k();
    let mut nbrs = vec![Vec::new(); k];
    for (i, j) in d.intersection_pairs() {
        nbrs[i].push(j);
        nbrs[j].push(i);
    }
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| nbrs[b].len().cmp(&nbrs[a].len()).then(a.cmp(&b)));
    let mut color = vec![usize::MAX; k];
    let mut used = 0;
    for &i in &order {
        let taken: Vec<usize> = nbrs[i].iter().map(|&j| color[j]).filter(|&c| c != usize::MAX).collect();
        let c = (0..).find(|c| !taken.contains(c)).unwrap();
        color[i] = c;
        used = used.max(c + 1);
    }
    OverlapStats {
        k_c: used.max(1),
        k_m: d.multiplicity.iter().copied().max().unwrap_or(1),
    }
}
