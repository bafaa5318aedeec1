//! Shortest paths and centrality measures on a small weighted digraph.
//!
//! Conventions follow NetworkX's directed-graph defaults: eigenvector
//! centrality iterates `A + I` over successor links, closeness uses incoming
//! distances with the Wasserman-Faust correction, betweenness is normalized
//! by `(n-1)(n-2)` with endpoints excluded, and PageRank spreads dangling mass
//! uniformly.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, VecDeque};

#[derive(Clone, Debug)]
pub struct Digraph {
    out: Vec<Vec<(usize, f64)>>,
    inc: Vec<Vec<(usize, f64)>>,
}

impl Digraph {
    pub fn new(n: usize) -> Self {
        Self { out: vec![Vec::new(); n], inc: vec![Vec::new(); n] }
    }

    pub fn add_arc(&mut self, from: usize, to: usize, weight: f64) {
        self.out[from].push((to, weight));
        self.inc[to].push((from, weight));
    }

    pub fn len(&self) -> usize {
        self.out.len()
    }

    pub fn is_empty(&self) -> bool {
        self.out.is_empty()
    }

    fn arcs(&self, v: usize, reverse: bool) -> &[(usize, f64)] {
        if reverse {
            &self.inc[v]
        } else {
            &self.out[v]
        }
    }
}

#[derive(Clone, Copy, PartialEq)]
struct Entry {
    dist: f64,
    seq: usize,
    node: usize,
}

impl Eq for Entry {}

impl Ord for Entry {
    fn cmp(&self, other: &Self) -> Ordering {
        // Min-heap on (dist, insertion order).
        other.dist.total_cmp(&self.dist).then_with(|| other.seq.cmp(&self.seq))
    }
}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Distances from `src` (or to `src` when `reverse`), `None` if unreachable.
/// Unweighted mode counts arcs.
pub fn distances(g: &Digraph, src: usize, weighted: bool, reverse: bool) -> Vec<Option<f64>> {
    let mut dist = vec![None; g.len()];
    if !weighted {
        dist[src] = Some(0.0);
        let mut queue = VecDeque::from([src]);
        while let Some(v) = queue.pop_front() {
            let d = dist[v].unwrap();
            for &(w, _) in g.arcs(v, reverse) {
                if dist[w].is_none() {
                    dist[w] = Some(d + 1.0);
                    queue.push_back(w);
                }
            }
        }
        return dist;
    }
    let mut best = vec![f64::INFINITY; g.len()];
    let mut heap = BinaryHeap::new();
    best[src] = 0.0;
    heap.push(Entry { dist: 0.0, seq: 0, node: src });
    let mut seq = 1;
    while let Some(Entry { dist: d, node: v, .. }) = heap.pop() {
        if dist[v].is_some() {
            continue;
        }
        dist[v] = Some(d);
        for &(w, wt) in g.arcs(v, reverse) {
            let nd = d + wt;
            if dist[w].is_none() && nd < best[w] {
                best[w] = nd;
                heap.push(Entry { dist: nd, seq, node: w });
                seq += 1;
            }
        }
    }
    dist
}

/// Power iteration on `A + I` with successor aggregation, L2-normalized.
/// Falls back to the uniform vector if it fails to converge.
pub fn eigenvector(g: &Digraph, weighted: bool, tol: f64, max_iter: usize) -> Vec<f64> {
    let n = g.len();
    if n == 0 {
        return Vec::new();
    }
    let mut x = vec![1.0 / n as f64; n];
    for _ in 0..max_iter {
        let last = x.clone();
        for v in 0..n {
            for &(w, wt) in &g.out[v] {
                x[w] += last[v] * if weighted { wt } else { 1.0 };
            }
        }
        let norm = x.iter().map(|a| a * a).sum::<f64>().sqrt();
        let norm = if norm == 0.0 { 1.0 } else { norm };
        x.iter_mut().for_each(|a| *a /= norm);
        let delta: f64 = x.iter().zip(&last).map(|(a, b)| (a - b).abs()).sum();
        if delta < n as f64 * tol {
            return x;
        }
    }
    log::warn!("eigenvector centrality did not converge in {max_iter} iterations, using uniform vector");
    vec![1.0 / (n as f64).sqrt(); n]
}

/// Closeness from incoming distances: `(r-1)^2 / ((n-1) * sum)` where `r`
/// counts the nodes that reach `v` (itself included).
pub fn closeness(g: &Digraph, weighted: bool) -> Vec<f64> {
    let n = g.len();
    (0..n)
        .map(|v| {
            let d = distances(g, v, weighted, true);
            let reach = d.iter().flatten().count() as f64;
            let total: f64 = d.iter().flatten().sum();
            if total > 0.0 && n > 1 {
                (reach - 1.0) / total * (reach - 1.0) / (n as f64 - 1.0)
            } else {
                0.0
            }
        })
        .collect()
}

/// Brandes betweenness over ordered pairs, endpoints excluded, scaled by
/// `1 / ((n-1)(n-2))`.
pub fn betweenness(g: &Digraph, weighted: bool) -> Vec<f64> {
    let n = g.len();
    let mut bc = vec![0.0; n];
    for s in 0..n {
        let (order, preds, sigma) = shortest_path_dag(g, s, weighted);
        let mut delta = vec![0.0; n];
        for &w in order.iter().rev() {
            for &v in &preds[w] {
                delta[v] += sigma[v] / sigma[w] * (1.0 + delta[w]);
            }
            if w != s {
                bc[w] += delta[w];
            }
        }
    }
    if n > 2 {
        let scale = 1.0 / ((n as f64 - 1.0) * (n as f64 - 2.0));
        bc.iter_mut().for_each(|b| *b *= scale);
    }
    bc
}

/// Nodes in non-decreasing distance order, shortest-path predecessors and
/// path counts from `s`.
fn shortest_path_dag(g: &Digraph, s: usize, weighted: bool) -> (Vec<usize>, Vec<Vec<usize>>, Vec<f64>) {
    let n = g.len();
    let mut order = Vec::with_capacity(n);
    let mut preds = vec![Vec::new(); n];
    let mut sigma = vec![0.0; n];
    sigma[s] = 1.0;
    if !weighted {
        let mut dist = vec![usize::MAX; n];
        dist[s] = 0;
        let mut queue = VecDeque::from([s]);
        while let Some(v) = queue.pop_front() {
            order.push(v);
            for &(w, _) in &g.out[v] {
                if dist[w] == usize::MAX {
                    dist[w] = dist[v] + 1;
                    queue.push_back(w);
                }
                if dist[w] == dist[v] + 1 {
                    sigma[w] += sigma[v];
                    preds[w].push(v);
                }
            }
        }
        return (order, preds, sigma);
    }
    let mut settled = vec![false; n];
    let mut seen = vec![f64::INFINITY; n];
    let mut heap = BinaryHeap::new();
    seen[s] = 0.0;
    heap.push(Entry { dist: 0.0, seq: 0, node: s });
    let mut seq = 1;
    while let Some(Entry { dist: d, node: v, .. }) = heap.pop() {
        if settled[v] {
            continue;
        }
        settled[v] = true;
        order.push(v);
        for &(w, wt) in &g.out[v] {
            let nd = d + wt;
            if !settled[w] && nd < seen[w] {
                seen[w] = nd;
                heap.push(Entry { dist: nd, seq, node: w });
                seq += 1;
                sigma[w] = sigma[v];
                preds[w] = vec![v];
            } else if nd == seen[w] && !settled[w] {
                sigma[w] += sigma[v];
                preds[w].push(v);
            }
        }
    }
    (order, preds, sigma)
}

/// PageRank with uniform teleport and dangling redistribution, L1-normalized.
pub fn pagerank(g: &Digraph, weighted: bool, alpha: f64, tol: f64, max_iter: usize) -> Vec<f64> {
    let n = g.len();
    if n == 0 {
        return Vec::new();
    }
    let wt = |w: f64| if weighted { w } else { 1.0 };
    let out_sum: Vec<f64> = (0..n).map(|v| g.out[v].iter().map(|&(_, w)| wt(w)).sum()).collect();
    let uniform = 1.0 / n as f64;
    let mut x = vec![uniform; n];
    for _ in 0..max_iter {
        let last = x.clone();
        let dangling: f64 = (0..n).filter(|&v| out_sum[v] == 0.0).map(|v| last[v]).sum();
        x.iter_mut().for_each(|a| *a = (alpha * dangling + 1.0 - alpha) * uniform);
        for v in 0..n {
            if out_sum[v] == 0.0 {
                continue;
            }
            for &(w, a) in &g.out[v] {
                x[w] += alpha * last[v] * wt(a) / out_sum[v];
            }
        }
        let err: f64 = x.iter().zip(&last).map(|(a, b)| (a - b).abs()).sum();
        if err < n as f64 * tol {
            break;
        }
    }
    let total: f64 = x.iter().sum();
    x.iter_mut().for_each(|a| *a /= total);
    x
}
