//! The embedding graph: idle windows as nodes, edges wherever two windows on
//! coupled qubits are idle at the same time for a positive duration.

use std::collections::VecDeque;

use serde::Serialize;

use crate::schedule::{DeviceModel, IdleWindow, Qubit};
use crate::time::{Interval, RationalTime};

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DdEdge {
    /// Smaller endpoint id.
    pub a: usize,
    pub b: usize,
    pub overlap: Interval,
}

impl DdEdge {
    pub fn other(&self, id: usize) -> usize {
        if id == self.a {
            self.b
        } else {
            self.a
        }
    }
}

#[derive(Debug, Clone)]
pub struct DdGraph {
    nodes: Vec<IdleWindow>,
    edges: Vec<DdEdge>,
    adjacency: Vec<Vec<usize>>,
}

impl DdGraph {
    pub fn nodes(&self) -> &[IdleWindow] {
        &self.nodes
    }

    pub fn node(&self, id: usize) -> &IdleWindow {
        &self.nodes[id]
    }

    /// Record the embedded gate centres of a node.
    pub fn set_gates(&mut self, id: usize, gates: Vec<RationalTime>) {
        self.nodes[id].gates = gates;
    }

    pub fn into_nodes(self) -> Vec<IdleWindow> {
        self.nodes
    }

    pub fn edges(&self) -> &[DdEdge] {
        &self.edges
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Indices into [`DdGraph::edges`] incident to `id`.
    pub fn incident(&self, id: usize) -> &[usize] {
        &self.adjacency[id]
    }

    pub fn neighbors(&self, id: usize) -> impl Iterator<Item = usize> + '_ {
        self.adjacency[id].iter().map(move |&e| self.edges[e].other(id))
    }

    pub fn edge_between(&self, a: usize, b: usize) -> Option<&DdEdge> {
        self.adjacency[a]
            .iter()
            .map(|&e| &self.edges[e])
            .find(|e| e.other(a) == b)
    }

    fn visit_key(&self, id: usize) -> (&RationalTime, Qubit, usize) {
        let n = &self.nodes[id];
        (&n.start, n.qubit, id)
    }
}

/// Build the graph. Window ids must be `0..n`; the input order is irrelevant.
pub fn build_graph(mut idles: Vec<IdleWindow>, device: &DeviceModel) -> DdGraph {
    idles.sort_by_key(|w| w.id);
    for (i, w) in idles.iter().enumerate() {
        assert_eq!(w.id, i, "window ids must be contiguous from 0");
    }

    let mut per_qubit: Vec<Vec<usize>> = vec![Vec::new(); device.num_qubits()];
    for w in &idles {
        per_qubit[w.qubit].push(w.id);
    }
    for list in &mut per_qubit {
        list.sort_by(|&x, &y| idles[x].start.cmp(&idles[y].start));
    }

    // Windows on one qubit are disjoint and sorted, so a merge-style sweep
    // over each coupled pair finds every overlap.
    let mut edges = Vec::new();
    for &(qa, qb) in device.coupling() {
        let (la, lb) = (&per_qubit[qa], &per_qubit[qb]);
        let (mut i, mut j) = (0, 0);
        while i < la.len() && j < lb.len() {
            let (wa, wb) = (&idles[la[i]], &idles[lb[j]]);
            if let Some(overlap) = wa.overlap(wb) {
                let (a, b) = (wa.id.min(wb.id), wa.id.max(wb.id));
                edges.push(DdEdge { a, b, overlap });
            }
            if wa.end <= wb.end {
                i += 1;
            } else {
                j += 1;
            }
        }
    }
    edges.sort_by(|x, y| (x.a, x.b).cmp(&(y.a, y.b)));

    let mut adjacency = vec![Vec::new(); idles.len()];
    for (k, e) in edges.iter().enumerate() {
        adjacency[e.a].push(k);
        adjacency[e.b].push(k);
    }
    DdGraph {
        nodes: idles,
        edges,
        adjacency,
    }
}

/// Components as sorted id lists, ordered by smallest id.
pub fn connected_components(graph: &DdGraph) -> Vec<Vec<usize>> {
    let mut seen = vec![false; graph.len()];
    let mut out = Vec::new();
    for root in 0..graph.len() {
        if seen[root] {
            continue;
        }
        seen[root] = true;
        let mut comp = vec![root];
        let mut k = 0;
        while k < comp.len() {
            let u = comp[k];
            k += 1;
            for v in graph.neighbors(u) {
                if !seen[v] {
                    seen[v] = true;
                    comp.push(v);
                }
            }
        }
        comp.sort_unstable();
        out.push(comp);
    }
    out
}

/// Visit order with parents and the feedback vertex set.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TraversalPlan {
    /// Non-FVS nodes in BFS order, then FVS nodes in the order they were met.
    pub order: Vec<usize>,
    pub parent: Vec<Option<usize>>,
    pub fvs: Vec<usize>,
    #[serde(skip)]
    pub in_fvs: Vec<bool>,
}

impl TraversalPlan {
    pub fn is_fvs(&self, id: usize) -> bool {
        self.in_fvs[id]
    }
}

pub fn bfs_traversal(graph: &DdGraph) -> TraversalPlan {
    let n = graph.len();
    let mut visited = vec![false; n];
    let mut queued = vec![false; n];
    let mut in_fvs = vec![false; n];
    let mut parent = vec![None; n];
    let mut order = Vec::with_capacity(n);
    let mut fvs = Vec::new();
    let mut queue = VecDeque::new();
    let mut nbrs = Vec::new();

    for comp in connected_components(graph) {
        let root = *comp
            .iter()
            .min_by(|&&x, &&y| graph.visit_key(x).cmp(&graph.visit_key(y)))
            .expect("components are non-empty");
        queued[root] = true;
        queue.push_back(root);
        while let Some(u) = queue.pop_front() {
            let mut earlier = graph.neighbors(u).filter(|&v| visited[v] && !in_fvs[v]);
            let first = earlier.next();
            if earlier.next().is_some() {
                in_fvs[u] = true;
                fvs.push(u);
            } else {
                parent[u] = first;
                order.push(u);
            }
            visited[u] = true;

            nbrs.clear();
            nbrs.extend(graph.neighbors(u).filter(|&v| !queued[v]));
            nbrs.sort_by(|&x, &y| graph.visit_key(x).cmp(&graph.visit_key(y)));
            for &v in &nbrs {
                queued[v] = true;
                queue.push_back(v);
            }
        }
    }
    order.extend_from_slice(&fvs);
    TraversalPlan {
        order,
        parent,
        fvs,
        in_fvs,
    }
}

#[derive(Serialize)]
struct NodeDump<'a> {
    id: usize,
    qubit: Qubit,
    start: &'a RationalTime,
    end: &'a RationalTime,
    gates: &'a [RationalTime],
    origin: [usize; 2],
}

#[derive(Serialize)]
struct GraphDump<'a> {
    nodes: Vec<NodeDump<'a>>,
    edges: &'a [DdEdge],
    order: &'a [usize],
    parent: &'a [Option<usize>],
    fvs: &'a [usize],
}

/// Debug dump `{nodes, edges, order, parent, fvs}`.
pub fn dump_json(graph: &DdGraph, plan: &TraversalPlan) -> serde_json::Value {
    let nodes = graph
        .nodes()
        .iter()
        .map(|w| NodeDump {
            id: w.id,
            qubit: w.qubit,
            start: &w.start,
            end: &w.end,
            gates: &w.gates,
            origin: [w.origin.idle, w.origin.split],
        })
        .collect();
    serde_json::to_value(GraphDump {
        nodes,
        edges: graph.edges(),
        order: &plan.order,
        parent: &plan.parent,
        fvs: &plan.fvs,
    })
    .expect("graph dump serializes")
}
