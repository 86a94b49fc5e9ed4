//! Synthetic training corpus, the SGB1/CBX1 formats and import of externally predicted
//! coarse bases.

mod formats;

use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use formats::{cbx_from_bytes, cbx_to_bytes, read_cbx, write_cbx, SubdomainGraphRecord, CBX_MAGIC, SGB_MAGIC};

use crate::decomp::{adjacency_graph, decompose};
use crate::error::{Error, Result};
use crate::io::write_atomic;
use crate::linalg::{semidefinite_kernel, Eps, SymSparseMatrix};
use crate::spectral::{build_all_blocks, solve_all, LocalBlocks, LocalCoarseSpace, Selection};

/// File name of subdomain `i`'s basis inside an import directory.
pub fn basis_file_name(i: usize) -> String {
    format!("sub_{i:04}.cbx")
}

/// File name of subdomain `i`'s record inside an export directory.
pub fn record_file_name(i: usize) -> String {
    format!("sub_{i:04}.sgb")
}

/// Parameters of [`gen_random_operator_with`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RandomOperatorParams {
    pub n: usize,
    /// Target `nnz / n`, counting both triangles and the diagonal.
    pub nnz_ratio: f64,
    /// Couplings are `−w` with `log10 w` uniform between the logs of these bounds.
    pub weight_range: [f64; 2],
    /// Fraction of vertices receiving a Dirichlet-like diagonal boost (at least one when
    /// positive).
    pub boost_fraction: f64,
    pub seed: u64,
}

impl RandomOperatorParams {
    pub fn new(n: usize, nnz_ratio: f64, seed: u64) -> Self {
        Self { n, nnz_ratio, weight_range: [1.0, 1e4], boost_fraction: 0.01, seed }
    }
}

/// A random weighted-graph operator with the vertex positions used to build it.
#[derive(Clone, Debug)]
pub struct RandomOperator {
    pub a: SymSparseMatrix,
    pub coords: Vec<[f64; 3]>,
}

pub fn gen_random_operator(n: usize, nnz_ratio: f64, seed: u64) -> Result<RandomOperator> {
    gen_random_operator_with(&RandomOperatorParams::new(n, nnz_ratio, seed))
}

/// Graph Laplacian on random points in the unit square: a Euclidean minimum spanning tree of
/// nearest-neighbour candidates keeps it connected, further shortest candidate edges are
/// added until the ratio is met, and a few boosted diagonals make it positive definite.
pub fn gen_random_operator_with(p: &RandomOperatorParams) -> Result<RandomOperator> {
    let n = p.n;
    if !(3.0..=7.0).contains(&p.nnz_ratio) {
        return Err(Error::InvalidParameter(format!("nnz ratio {} outside [3, 7]", p.nnz_ratio)));
    }
    let edges_wanted = ((p.nnz_ratio - 1.0) * n as f64 / 2.0).round() as usize;
    if n < 2 || edges_wanted > n * (n - 1) / 2 || edges_wanted < n - 1 {
        return Err(Error::InvalidParameter(format!(
            "nnz ratio {} is infeasible for n = {n}",
            p.nnz_ratio
        )));
    }
    let [lo, hi] = p.weight_range;
    if !(lo > 0.0 && hi >= lo) {
        return Err(Error::InvalidParameter(format!("weight range [{lo}, {hi}]")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    let pts: Vec<[f64; 2]> = (0..n).map(|_| [rng.random::<f64>(), rng.random::<f64>()]).collect();
    let per_vertex = (p.nnz_ratio.ceil() as usize + 4).min(n - 1);
    let mut cand = nearest_candidates(&pts, per_vertex);
    cand.sort_by(|a, b| a.2.partial_cmp(&b.2).unwrap().then((a.0, a.1).cmp(&(b.0, b.1))));

    let mut uf = UnionFind::new(n);
    let mut edges: Vec<(usize, usize)> = Vec::with_capacity(edges_wanted);
    for &(u, v, _) in &cand {
        if uf.union(u, v) {
            edges.push((u, v));
        }
    }
    // join any components the candidate set left apart
    while edges.len() < n - 1 {
        let roots: Vec<usize> = (0..n).map(|v| uf.find(v)).collect();
        let (u, v) = (0..n)
            .filter(|&u| roots[u] == roots[0])
            .flat_map(|u| (0..n).filter(|&v| roots[v] != roots[0]).map(move |v| (u, v)))
            .min_by(|&(a, b), &(c, d)| dist2(&pts[a], &pts[b]).partial_cmp(&dist2(&pts[c], &pts[d])).unwrap())
            .unwrap();
        uf.union(u, v);
        edges.push((u.min(v), u.max(v)));
    }
    let mut present: std::collections::HashSet<(usize, usize)> = edges.iter().copied().collect();
    for &(u, v, _) in &cand {
        if edges.len() >= edges_wanted {
            break;
        }
        if present.insert((u, v)) {
            edges.push((u, v));
        }
    }
    if edges.len() < edges_wanted {
        return Err(Error::InvalidParameter(format!(
            "could not place {edges_wanted} edges on {n} vertices"
        )));
    }
    edges.sort_unstable();

    let (llo, lhi) = (lo.log10(), hi.log10());
    let weight = |rng: &mut ChaCha8Rng| 10f64.powf(llo + (lhi - llo) * rng.random::<f64>());
    let mut diag = vec![0.0; n];
    let mut entries = Vec::with_capacity(edges.len() + n);
    for &(u, v) in &edges {
        let w = weight(&mut rng);
        entries.push((u, v, -w));
        diag[u] += w;
        diag[v] += w;
    }
    if p.boost_fraction > 0.0 {
        let count = ((p.boost_fraction * n as f64).round() as usize).clamp(1, n);
        let mut order: Vec<usize> = (0..n).collect();
        for i in 0..count {
            let j = rng.random_range(i..n);
            order.swap(i, j);
            diag[order[i]] += weight(&mut rng);
        }
    }
    entries.extend(diag.iter().enumerate().map(|(i, &d)| (i, i, d)));
    let a = SymSparseMatrix::from_upper_triplets(n, entries)?;
    Ok(RandomOperator { a, coords: pts.iter().map(|q| [q[0], q[1], 0.0]).collect() })
}

fn dist2(a: &[f64; 2], b: &[f64; 2]) -> f64 {
    (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)
}

/// Approximate `k` nearest neighbours per point from a bucket grid, as unique `(u, v, d²)`
/// pairs with `u < v`.
fn nearest_candidates(pts: &[[f64; 2]], k: usize) -> Vec<(usize, usize, f64)> {
    let n = pts.len();
    let g = ((n as f64 / 4.0).sqrt().floor() as usize).max(1);
    let cell = |x: f64| ((x * g as f64) as usize).min(g - 1);
    let mut buckets = vec![Vec::new(); g * g];
    for (i, q) in pts.iter().enumerate() {
        buckets[cell(q[0]) + g * cell(q[1])].push(i);
    }
    let mut out: Vec<(usize, usize, f64)> = (0..n)
        .into_par_iter()
        .flat_map_iter(|i| {
            let (cx, cy) = (cell(pts[i][0]) as isize, cell(pts[i][1]) as isize);
            let mut near: Vec<(f64, usize)> = Vec::new();
            let mut ring = 1isize;
            loop {
                near.clear();
                for by in (cy - ring).max(0)..=(cy + ring).min(g as isize - 1) {
                    for bx in (cx - ring).max(0)..=(cx + ring).min(g as isize - 1) {
                        for &j in &buckets[bx as usize + g * by as usize] {
                            if j != i {
                                near.push((dist2(&pts[i], &pts[j]), j));
                            }
                        }
                    }
                }
                if near.len() >= 2 * k || ring as usize >= g {
                    break;
                }
                ring += 1;
            }
            near.sort_by(|a, b| a.partial_cmp(b).unwrap());
            near.truncate(k);
            near.into_iter().map(move |(d, j)| (i.min(j), i.max(j), d))
        })
        .collect();
    out.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
    out.dedup_by(|a, b| (a.0, a.1) == (b.0, b.1));
    out
}

struct UnionFind(Vec<usize>);

impl UnionFind {
    fn new(n: usize) -> Self {
        Self((0..n).collect())
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.0[x] != x {
            self.0[x] = self.0[self.0[x]];
            x = self.0[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        self.0[ra.max(rb)] = ra.min(rb);
        true
    }
}

/// Corpus generation settings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorpusSpec {
    pub num_graphs: usize,
    /// Vertices per global graph.
    pub n_vertices: usize,
    /// Each graph draws its `nnz / n` uniformly from this interval.
    pub nnz_range: [f64; 2],
    pub target_subdomain_size: usize,
    pub delta: usize,
    pub n_c: usize,
    pub train_fraction: f64,
    /// Solve the local spectral problems and store target bases.
    pub with_targets: bool,
    pub seed: u64,
}

impl Default for CorpusSpec {
    fn default() -> Self {
        Self {
            num_graphs: 100,
            n_vertices: 4000,
            nnz_range: [3.0, 7.0],
            target_subdomain_size: 2000,
            delta: 1,
            n_c: 8,
            train_fraction: 0.8,
            with_targets: true,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Val,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecordEntry {
    pub path: String,
    pub split: Split,
    pub n: usize,
    pub n_c: usize,
}

/// Per-graph statistics kept alongside the records.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GraphEntry {
    pub n: usize,
    pub nnz: usize,
    pub k: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorpusManifest {
    pub records: Vec<RecordEntry>,
    pub graphs: Vec<GraphEntry>,
    pub seed: u64,
    pub spec: CorpusSpec,
}

impl CorpusManifest {
    pub fn mean_record_size(&self) -> f64 {
        self.records.iter().map(|r| r.n as f64).sum::<f64>() / self.records.len().max(1) as f64
    }
}

pub const MANIFEST_NAME: &str = "manifest.json";

/// Generates `spec.num_graphs` operators, decomposes each into `round(n / target)` parts and
/// writes one SGB1 record per subdomain plus `manifest.json` into `dir`.
pub fn build_corpus(spec: &CorpusSpec, dir: &Path) -> Result<CorpusManifest> {
    let [rlo, rhi] = spec.nnz_range;
    if !(3.0..=7.0).contains(&rlo) || !(3.0..=7.0).contains(&rhi) || rlo > rhi {
        return Err(Error::InvalidParameter(format!("nnz range [{rlo}, {rhi}] outside [3, 7]")));
    }
    if spec.num_graphs == 0 || spec.target_subdomain_size == 0 {
        return Err(Error::InvalidParameter("corpus needs at least one graph and a positive target size".into()));
    }
    if !(0.0..=1.0).contains(&spec.train_fraction) {
        return Err(Error::InvalidParameter(format!("train fraction {}", spec.train_fraction)));
    }
    std::fs::create_dir_all(dir)?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let graph_params: Vec<(f64, u64)> = (0..spec.num_graphs)
        .map(|_| (rlo + (rhi - rlo) * rng.random::<f64>(), rng.random::<u64>()))
        .collect();
    let k = ((spec.n_vertices as f64 / spec.target_subdomain_size as f64).round() as usize).max(1);
    let per_graph: Vec<(GraphEntry, Vec<(String, usize, usize)>)> = graph_params
        .par_iter()
        .enumerate()
        .map(|(g, &(ratio, seed))| {
            let op = gen_random_operator(spec.n_vertices, ratio, seed)?;
            let graph = adjacency_graph(&op.a);
            let d = decompose(&graph, Some(&op.coords), k, spec.delta, seed)?;
            let blocks = build_all_blocks(&op.a, &d)?;
            let targets = if spec.with_targets {
                Some(solve_all(&blocks, Selection::fixed(spec.n_c))?)
            } else {
                None
            };
            let mut files = Vec::with_capacity(blocks.len());
            for (i, b) in blocks.iter().enumerate() {
                let target = targets.as_ref().map(|t| t[i].spectral_part());
                let n_c = target.as_ref().map_or(0, |t| t.ncols());
                let rec = SubdomainGraphRecord::from_blocks(b, target)?;
                let name = format!("graph_{g:05}_{}", record_file_name(i));
                rec.write(&dir.join(&name))?;
                files.push((name, b.n(), n_c));
            }
            let entry = GraphEntry { n: op.a.n(), nnz: op.a.nnz_full(), k };
            Ok((entry, files))
        })
        .collect::<Result<_>>()?;

    let mut graphs = Vec::with_capacity(per_graph.len());
    let mut records = Vec::new();
    for (entry, files) in per_graph {
        graphs.push(entry);
        for (path, n, n_c) in files {
            records.push(RecordEntry { path, split: Split::Train, n, n_c });
        }
    }
    let mut order: Vec<usize> = (0..records.len()).collect();
    for i in (1..order.len()).rev() {
        order.swap(i, rng.random_range(0..=i));
    }
    let n_train = (spec.train_fraction * records.len() as f64).round() as usize;
    for &r in &order[n_train..] {
        records[r].split = Split::Val;
    }
    let manifest = CorpusManifest { records, graphs, seed: spec.seed, spec: spec.clone() };
    write_atomic(&dir.join(MANIFEST_NAME), &serde_json::to_vec_pretty(&manifest)?)?;
    Ok(manifest)
}

pub fn read_manifest(dir: &Path) -> Result<CorpusManifest> {
    Ok(serde_json::from_slice(&std::fs::read(dir.join(MANIFEST_NAME))?)?)
}

/// Writes `sub_XXXX.sgb` records (with target bases) and `sub_XXXX.cbx` spectral bases.
pub fn export_subdomains(dir: &Path, blocks: &[LocalBlocks], coarse: &[LocalCoarseSpace]) -> Result<Vec<PathBuf>> {
    if blocks.len() != coarse.len() {
        return Err(Error::dims("exported coarse spaces", blocks.len(), coarse.len()));
    }
    std::fs::create_dir_all(dir)?;
    let mut written = Vec::with_capacity(2 * blocks.len());
    for (i, (b, c)) in blocks.iter().zip(coarse).enumerate() {
        let spectral = c.spectral_part();
        let rec = SubdomainGraphRecord::from_blocks(b, Some(spectral.clone()))?;
        let sgb = dir.join(record_file_name(i));
        rec.write(&sgb)?;
        let cbx = dir.join(basis_file_name(i));
        write_cbx(&cbx, &spectral)?;
        written.push(sgb);
        written.push(cbx);
    }
    Ok(written)
}

/// Coarse spaces from `sub_XXXX.cbx` files: the spectral part is taken as stored and the
/// kernel part comes from a pivoted Cholesky of `Ã_i`, so no eigensolve runs.
pub fn import_coarse_spaces(dir: &Path, blocks: &[LocalBlocks]) -> Result<Vec<LocalCoarseSpace>> {
    blocks
        .par_iter()
        .enumerate()
        .map(|(i, b)| {
            let wrap = |e: Error| Error::Subdomain { subdomain: i, message: e.to_string() };
            let spectral = read_cbx(&dir.join(basis_file_name(i))).map_err(wrap)?;
            if spectral.nrows() != b.n() {
                return Err(wrap(Error::dims("imported basis rows", b.n(), spectral.nrows())));
            }
            let kernel = semidefinite_kernel(&b.a_tilde.to_dense(), Eps::default().kernel_rel).map_err(wrap)?;
            LocalCoarseSpace::from_parts(&kernel, &spectral).map_err(wrap)
        })
        .collect()
}
