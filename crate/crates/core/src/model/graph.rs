use super::{Instance, OpId, Time};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Node {
    Source,
    Op(OpId),
    Sink,
}

/// The disjunctive graph of an instance: operations plus the dummy source and
/// sink, conjunctive job arcs, and unoriented same-machine edges.
#[derive(Clone, Debug)]
pub struct DisjGraph {
    /// `Source`, then every operation in `(job, step)` order, then `Sink`.
    pub nodes: Vec<Node>,
    pub job_arcs: Vec<(OpId, OpId)>,
    /// Unordered same-machine pairs, stored with the smaller `OpId` first.
    pub machine_edges: Vec<(OpId, OpId)>,
    weights: Vec<Time>,
}

impl DisjGraph {
    pub fn weight(&self, node_index: usize) -> Time {
        self.weights[node_index]
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn source_index(&self) -> usize {
        0
    }

    pub fn sink_index(&self) -> usize {
        self.nodes.len() - 1
    }
}

pub fn build_disjunctive_graph(inst: &Instance) -> DisjGraph {
    let mut nodes = Vec::with_capacity(inst.n_ops() + 2);
    let mut weights = Vec::with_capacity(inst.n_ops() + 2);
    nodes.push(Node::Source);
    weights.push(0);
    for op in inst.ops() {
        nodes.push(Node::Op(op));
        weights.push(inst.duration(op));
    }
    nodes.push(Node::Sink);
    weights.push(0);

    let job_arcs = (0..inst.n_jobs())
        .flat_map(|j| (1..inst.route(j).len()).map(move |s| (OpId::new(j, s - 1), OpId::new(j, s))))
        .collect();

    let mut machine_edges = Vec::new();
    for m in 0..inst.n_machines() {
        let ops = inst.machine_ops(m);
        for (a, &u) in ops.iter().enumerate() {
            for &v in &ops[a + 1..] {
                machine_edges.push((u, v));
            }
        }
    }
    DisjGraph { nodes, job_arcs, machine_edges, weights }
}
