use std::collections::VecDeque;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::Graph;
use crate::error::{Error, Result};

fn check_k(n: usize, k: usize) -> Result<()> {
    if k == 0 || k > n {
        return Err(Error::InvalidParameter(format!("cannot split {n} vertices into {k} parts")));
    }
    Ok(())
}

fn finish(mut parts: Vec<Vec<usize>>) -> Vec<Vec<usize>> {
    for p in parts.iter_mut() {
        p.sort_unstable();
    }
    parts.sort_by_key(|p| p[0]);
    parts
}

/// Recursive coordinate bisection: each set is cut orthogonally to its longest extent, in
/// proportion to the number of parts requested on either side.
pub fn partition_coordinates(coords: &[[f64; 3]], k: usize) -> Result<Vec<Vec<usize>>> {
    let n = coords.len();
    check_k(n, k)?;
    let mut out = Vec::with_capacity(k);
    let mut stack = vec![((0..n).collect::<Vec<_>>(), k)];
    while let Some((mut set, parts)) = stack.pop() {
        if parts == 1 {
            out.push(set);
            continue;
        }
        let axis = (0..3)
            .max_by(|&a, &b| {
                let ext = |ax: usize| {
                    let (lo, hi) = set.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &v| {
                        (l.min(coords[v][ax]), h.max(coords[v][ax]))
                    });
                    hi - lo
                };
                ext(a).partial_cmp(&ext(b)).unwrap().then(b.cmp(&a))
            })
            .unwrap();
        set.sort_by(|&x, &y| coords[x][axis].partial_cmp(&coords[y][axis]).unwrap().then(x.cmp(&y)));
        let left_parts = parts / 2;
        let cut = (set.len() * left_parts + parts / 2) / parts;
        let right = set.split_off(cut);
        stack.push((right, parts - left_parts));
        stack.push((set, left_parts));
    }
    Ok(finish(out))
}

/// Graph-only partition by balanced region growing.
///
/// Seeds are spread by farthest-point BFS sampling from a pseudo-peripheral vertex; parts then
/// grow breadth-first one vertex at a time, smallest part first, so every part of a connected
/// graph is connected. Boundary refinement then trades vertices between neighboring parts to
/// reduce imbalance and cut size without disconnecting any part.
pub fn partition_graph(graph: &Graph, k: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    let n = graph.n();
    check_k(n, k)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let seeds = spread_seeds(graph, k, rng.random_range(0..n));
    let mut part = grow_regions(graph, &seeds);
    refine(graph, &mut part, k);
    let mut parts = vec![Vec::new(); k];
    for (v, &p) in part.iter().enumerate() {
        parts[p].push(v);
    }
    Ok(finish(parts))
}

fn bfs_levels(graph: &Graph, sources: &[usize]) -> Vec<usize> {
    graph.bfs_distances(sources, usize::MAX)
}

fn spread_seeds(graph: &Graph, k: usize, start: usize) -> Vec<usize> {
    let n = graph.n();
    // pseudo-peripheral start
    let mut first = start;
    let mut ecc = 0;
    for _ in 0..4 {
        let d = bfs_levels(graph, &[first]);
        let (far, e) = farthest(&d, &vec![false; n]);
        if e <= ecc {
            break;
        }
        ecc = e;
        first = far;
    }
    let mut seeds = vec![first];
    let mut chosen = vec![false; n];
    chosen[first] = true;
    while seeds.len() < k {
        let d = bfs_levels(graph, &seeds);
        let (far, _) = farthest(&d, &chosen);
        chosen[far] = true;
        seeds.push(far);
    }
    seeds
}

/// Farthest unchosen vertex; unreachable vertices count as infinitely far. Ties go to the
/// smallest index.
fn farthest(dist: &[usize], chosen: &[bool]) -> (usize, usize) {
    let mut best = (usize::MAX, 0usize);
    for (v, &d) in dist.iter().enumerate() {
        if chosen[v] {
            continue;
        }
        if best.0 == usize::MAX || d > best.1 {
            best = (v, d);
        }
    }
    if best.1 == usize::MAX {
        best.1 = usize::MAX - 1;
    }
    best
}

fn grow_regions(graph: &Graph, seeds: &[usize]) -> Vec<usize> {
    let n = graph.n();
    let k = seeds.len();
    let mut part = vec![usize::MAX; n];
    let mut size = vec![0usize; k];
    let mut queues: Vec<VecDeque<usize>> = vec![VecDeque::new(); k];
    for (p, &s) in seeds.iter().enumerate() {
        part[s] = p;
        size[p] = 1;
        queues[p].extend(graph.neighbors(s).iter().copied());
    }
    let mut assigned = k;
    loop {
        while assigned < n {
            // smallest part that can still grow
            let mut pick = None;
            for p in 0..k {
                while let Some(&v) = queues[p].front() {
                    if part[v] == usize::MAX {
                        break;
                    }
                    queues[p].pop_front();
                }
                if !queues[p].is_empty() && pick.is_none_or(|q: usize| size[p] < size[q]) {
                    pick = Some(p);
                }
            }
            let Some(p) = pick else { break };
            let v = queues[p].pop_front().unwrap();
            part[v] = p;
            size[p] += 1;
            assigned += 1;
            queues[p].extend(graph.neighbors(v).iter().copied().filter(|&w| part[w] == usize::MAX));
        }
        if assigned == n {
            break;
        }
        // a component without a seed goes to the currently smallest part
        let v = part.iter().position(|&p| p == usize::MAX).unwrap();
        let p = (0..k).min_by_key(|&p| (size[p], p)).unwrap();
        part[v] = p;
        size[p] += 1;
        assigned += 1;
        queues[p].extend(graph.neighbors(v).iter().copied().filter(|&w| part[w] == usize::MAX));
    }
    part
}

/// True if part `p` minus vertex `v` is still connected.
fn removable(graph: &Graph, part: &[usize], p: usize, v: usize, size: usize) -> bool {
    if size <= 1 {
        return false;
    }
    let Some(&start) = graph.neighbors(v).iter().find(|&&w| part[w] == p) else {
        return false;
    };
    let mut seen = std::collections::HashSet::from([v, start]);
    let mut queue = VecDeque::from([start]);
    let mut reached = 1;
    while let Some(x) = queue.pop_front() {
        for &w in graph.neighbors(x) {
            if part[w] == p && seen.insert(w) {
                reached += 1;
                queue.push_back(w);
            }
        }
    }
    reached == size - 1
}

fn refine(graph: &Graph, part: &mut [usize], k: usize) {
    let n = graph.n();
    let ideal = n as f64 / k as f64;
    let slack = (0.03 * ideal).ceil() as usize;
    let ideal_u = ideal.round() as usize;
    let mut size = vec![0usize; k];
    for &p in part.iter() {
        size[p] += 1;
    }
    for _pass in 0..8 {
        let mut moved = 0;
        for v in 0..n {
            let a = part[v];
            let mut links: Vec<(usize, isize)> = Vec::new();
            let mut own = 0isize;
            for &w in graph.neighbors(v) {
                let b = part[w];
                if b == a {
                    own += 1;
                } else if let Some(e) = links.iter_mut().find(|e| e.0 == b) {
                    e.1 += 1;
                } else {
                    links.push((b, 1));
                }
            }
            let mut best: Option<(usize, isize)> = None;
            for &(b, cnt) in &links {
                let gain = cnt - own;
                let balance_move = size[a] > ideal_u + slack && size[b] + 1 < size[a] && gain >= -2;
                let cut_move = gain > 0 && size[b] < ideal_u + slack && size[a] > ideal_u.saturating_sub(slack);
                if (balance_move || cut_move) && best.is_none_or(|(_, g)| gain > g) {
                    best = Some((b, gain));
                }
            }
            if let Some((b, _)) = best {
                if removable(graph, part, a, v, size[a]) {
                    part[v] = b;
                    size[a] -= 1;
                    size[b] += 1;
                    moved += 1;
                }
            }
        }
        if moved == 0 {
            break;
        }
    }
}

/// Groups vertices by part id; ids must be `0..k` with every part nonempty.
pub fn parts_from_vector(part: &[usize]) -> Result<Vec<Vec<usize>>> {
    let k = part.iter().copied().max().map_or(0, |m| m + 1);
    let mut parts = vec![Vec::new(); k];
    for (v, &p) in part.iter().enumerate() {
        parts[p].push(v);
    }
    if let Some(p) = parts.iter().position(|p| p.is_empty()) {
        return Err(Error::InvalidParameter(format!("part {p} of {k} is empty")));
    }
    Ok(finish(parts))
}

/// Part id per vertex.
pub fn part_vector(parts: &[Vec<usize>], n: usize) -> Vec<usize> {
    let mut v = vec![usize::MAX; n];
    for (p, set) in parts.iter().enumerate() {
        for &x in set {
            v[x] = p;
        }
    }
    v
}

/// Reads a text file with one part id per line.
pub fn read_partition_vector(path: &Path) -> Result<Vec<usize>> {
    let text = std::fs::read_to_string(path)?;
    let mut offset = 0u64;
    let mut out = Vec::new();
    for line in text.split_inclusive('\n') {
        let t = line.trim();
        if !t.is_empty() {
            out.push(t.parse().map_err(|_| Error::Parse {
                offset,
                message: format!("bad part id {t:?}"),
            })?);
        }
        offset += line.len() as u64;
    }
    Ok(out)
}

pub fn write_partition_vector(path: &Path, part: &[usize]) -> Result<()> {
    let mut s = String::with_capacity(part.len() * 4);
    for p in part {
        s.push_str(&p.to_string());
        s.push('\n');
    }
    crate::io::write_atomic(path, s.as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn path(n: usize) -> Graph {
        let e: Vec<(usize, usize)> = (0..n - 1).map(|i| (i, i + 1)).collect();
        Graph::from_edges(n, &e)
    }

    #[test]
    fn path_bisection_is_prefix_suffix() {
        for seed in 0..10 {
            let p = partition_graph(&path(6), 2, seed).unwrap();
            assert_eq!(p, vec![vec![0, 1, 2], vec![3, 4, 5]]);
        }
    }

    #[test]
    fn k_larger_than_n_is_rejected() {
        assert!(partition_graph(&path(3), 4, 0).is_err());
        assert!(partition_coordinates(&[[0.0; 3]; 3], 0).is_err());
    }
}
