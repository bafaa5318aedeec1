//! Per-operation descriptors and the input matrices fed to the oracle.
//!
//! Every operation gets 18 instance-level features: eight processing-time
//! statistics (`f0..f7`), source and sink distances (`f8`, `f9`), and plain and
//! weighted eigenvector, closeness, betweenness and PageRank centralities
//! (`f10..f17`). The table depends only on the instance, so it is computed once
//! and rows are gathered in permutation order by [`build_input`].

pub mod centrality;

use std::fmt::Write as _;

use crate::model::{Instance, OpId};
use crate::tensor::Matrix;

use centrality::Digraph;

/// Number of features per operation.
pub const N_FEATURES: usize = 18;

pub const FEATURE_NAMES: [&str; N_FEATURES] = [
    "proc_time",
    "job_completion",
    "job_mean",
    "job_median",
    "job_std_mean",
    "job_std_median",
    "job_min",
    "job_max",
    "source_dist",
    "sink_dist",
    "eigenvector",
    "eigenvector_w",
    "closeness",
    "closeness_w",
    "betweenness",
    "betweenness_w",
    "pagerank",
    "pagerank_w",
];

const EIGEN_TOL: f64 = 1e-8;
const EIGEN_MAX_ITER: usize = 1000;
const PAGERANK_ALPHA: f64 = 0.85;
const PAGERANK_TOL: f64 = 1e-9;
const PAGERANK_MAX_ITER: usize = 1000;

/// How machine cliques enter the feature graph.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum MachineArcs {
    /// Each disjunctive edge becomes two opposite arcs.
    #[default]
    Bidirectional,
    /// Job arcs and dummy arcs only.
    Omit,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FeatureTable {
    offsets: Vec<usize>,
    rows: Matrix,
}

impl FeatureTable {
    pub fn row(&self, op: OpId) -> &[f64] {
        self.rows.row(self.offsets[op.job] + op.step)
    }

    /// Row index of `op`, or `None` if the instance has no such operation.
    pub fn position(&self, op: OpId) -> Option<usize> {
        let start = *self.offsets.get(op.job)?;
        let end = *self.offsets.get(op.job + 1)?;
        (start + op.step < end).then_some(start + op.step)
    }

    pub fn get(&self, op: OpId, feature: usize) -> f64 {
        self.row(op)[feature]
    }

    /// All rows in `(job, step)` order.
    pub fn matrix(&self) -> &Matrix {
        &self.rows
    }

    pub fn n_ops(&self) -> usize {
        self.rows.rows()
    }

    /// Comma-separated dump with a header, rows in `(job, step)` order.
    pub fn to_delimited(&self) -> String {
        let mut out = String::from("job,step");
        for k in 0..N_FEATURES {
            write!(out, ",f{k}").unwrap();
        }
        out.push('\n');
        for job in 0..self.offsets.len() - 1 {
            for step in 0..self.offsets[job + 1] - self.offsets[job] {
                write!(out, "{job},{step}").unwrap();
                for v in self.row(OpId::new(job, step)) {
                    write!(out, ",{v}").unwrap();
                }
                out.push('\n');
            }
        }
        out
    }
}

pub fn compute_features(inst: &Instance) -> FeatureTable {
    compute_features_with(inst, MachineArcs::default())
}

pub fn compute_features_with(inst: &Instance, arcs: MachineArcs) -> FeatureTable {
    let n = inst.n_ops();
    let mut rows = Matrix::zeros(n, N_FEATURES);
    processing_stats(inst, &mut rows);

    let g = feature_graph(inst, arcs);
    let (src, sink) = (n, n + 1);
    let from_src = centrality::distances(&g, src, true, false);
    let to_sink = centrality::distances(&g, sink, true, true);
    let columns = [
        centrality::eigenvector(&g, false, EIGEN_TOL, EIGEN_MAX_ITER),
        centrality::eigenvector(&g, true, EIGEN_TOL, EIGEN_MAX_ITER),
        centrality::closeness(&g, false),
        centrality::closeness(&g, true),
        centrality::betweenness(&g, false),
        centrality::betweenness(&g, true),
        centrality::pagerank(&g, false, PAGERANK_ALPHA, PAGERANK_TOL, PAGERANK_MAX_ITER),
        centrality::pagerank(&g, true, PAGERANK_ALPHA, PAGERANK_TOL, PAGERANK_MAX_ITER),
    ];
    for i in 0..n {
        let row = rows.row_mut(i);
        // Every operation lies on a source-to-sink job path.
        row[8] = from_src[i].expect("source reaches every operation");
        row[9] = to_sink[i].expect("every operation reaches the sink");
        for (k, col) in columns.iter().enumerate() {
            row[10 + k] = col[i];
        }
    }
    let offsets = (0..=inst.n_jobs())
        .map(|j| if j == inst.n_jobs() { n } else { inst.index(OpId::new(j, 0)) })
        .collect();
    FeatureTable { offsets, rows }
}

/// Input matrix for one machine permutation: row `h` is the feature row of
/// `perm[h]`.
pub fn build_input(table: &FeatureTable, perm: &[OpId]) -> Matrix {
    let mut x = Matrix::zeros(perm.len(), N_FEATURES);
    for (h, &op) in perm.iter().enumerate() {
        x.row_mut(h).copy_from_slice(table.row(op));
    }
    x
}

/// Nodes `0..n` are operations by dense index, then the source and the sink.
/// An arc weighs the processing time of its tail; source arcs weigh 0.
fn feature_graph(inst: &Instance, arcs: MachineArcs) -> Digraph {
    let n = inst.n_ops();
    let (src, sink) = (n, n + 1);
    let mut g = Digraph::new(n + 2);
    let p = |op: OpId| f64::from(inst.duration(op));
    for job in 0..inst.n_jobs() {
        let len = inst.route(job).len();
        g.add_arc(src, inst.index(OpId::new(job, 0)), 0.0);
        for step in 0..len - 1 {
            let op = OpId::new(job, step);
            g.add_arc(inst.index(op), inst.index(OpId::new(job, step + 1)), p(op));
        }
        let last = OpId::new(job, len - 1);
        g.add_arc(inst.index(last), sink, p(last));
    }
    if arcs == MachineArcs::Bidirectional {
        for m in 0..inst.n_machines() {
            let ops = inst.machine_ops(m);
            for (a, &u) in ops.iter().enumerate() {
                for &v in &ops[a + 1..] {
                    g.add_arc(inst.index(u), inst.index(v), p(u));
                    g.add_arc(inst.index(v), inst.index(u), p(v));
                }
            }
        }
    }
    g
}

fn processing_stats(inst: &Instance, rows: &mut Matrix) {
    let max_p = f64::from(inst.max_duration());
    let all: Vec<f64> = inst.ops().map(|o| f64::from(inst.duration(o))).collect();
    let avg = all.iter().sum::<f64>() / all.len() as f64;
    for job in 0..inst.n_jobs() {
        let p: Vec<f64> = inst.route(job).iter().map(|o| f64::from(o.duration)).collect();
        let total: f64 = p.iter().sum();
        let mean = total / p.len() as f64;
        let med = median(&p);
        let std = (p.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / p.len() as f64).sqrt();
        let min = p.iter().copied().fold(f64::INFINITY, f64::min);
        let max = p.iter().copied().fold(0.0, f64::max);
        let mut done = 0.0;
        for (step, &d) in p.iter().enumerate() {
            done += d;
            let row = rows.row_mut(inst.index(OpId::new(job, step)));
            row[0] = d / max_p;
            row[1] = done / total;
            row[2] = mean / avg;
            row[3] = med / avg;
            row[4] = std / mean;
            row[5] = std / med;
            row[6] = min / max_p;
            row[7] = max / max_p;
        }
    }
}

fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let k = v.len() / 2;
    if v.len() % 2 == 1 {
        v[k]
    } else {
        (v[k - 1] + v[k]) / 2.0
    }
}
