//! Min-cost-flow assignment of intermediate tensors to shared objects.
//!
//! Every intermediate `x` gets a left vertex `l_x` and a right vertex `r_x`:
//!
//! 1. `s → r_x`, capacity 1, cost `size_x`: allocate a new object for `x`.
//! 2. `l_x → r_y`, capacity 1, cost `max(0, size_y − size_x)`: hand the
//!    object of `x` on to `y`, which requires `x` to be dead before `y` is
//!    produced.
//! 3. `s → l_x`, capacity 1, cost 0.
//! 4. `r_x → t`, capacity 1, cost 0.
//!
//! A flow of value `N` saturates every `r_x → t` edge, so each tensor either
//! opens an object or continues exactly one predecessor's object. The flow
//! is found by successive shortest augmenting paths, with SPFA computing the
//! shortest path on the residual graph (whose backward arcs carry negative
//! costs).

use std::collections::{HashMap, VecDeque};

use serde::{Deserialize, Serialize};

use crate::graph::{liveness, GraphModel, LivenessInterval, TensorId};

use super::{MemoryPlan, PlanError, SharedObject, Strategy};

pub const SOURCE: usize = 0;
pub const SINK: usize = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeKind {
    /// `s → r_x`
    NewObject,
    /// `l_x → r_y`
    Reuse,
    /// `s → l_x`
    SourceToLeft,
    /// `r_x → t`
    RightToSink,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FlowEdge {
    pub from: usize,
    pub to: usize,
    pub capacity: i64,
    pub cost: i64,
    pub flow: i64,
    pub kind: EdgeKind,
}

impl FlowEdge {
    pub fn is_saturated(&self) -> bool {
        self.flow == self.capacity
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct FlowOptions {
    /// Drop a reuse edge `l_x → r_y` whenever some `z` fits strictly between
    /// `x` and `y`. Cuts edge count on long chains but can miss the optimum.
    pub sparse_reuse: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FlowNetwork {
    /// Intermediate tensors in liveness order; index `i` owns `l_i`, `r_i`.
    pub tensors: Vec<TensorId>,
    pub sizes: Vec<i64>,
    pub edges: Vec<FlowEdge>,
}

impl FlowNetwork {
    pub fn left(i: usize) -> usize {
        2 + 2 * i
    }

    pub fn right(i: usize) -> usize {
        3 + 2 * i
    }

    pub fn vertex_count(&self) -> usize {
        2 + 2 * self.tensors.len()
    }

    /// Flow arriving at the sink.
    pub fn total_flow(&self) -> i64 {
        self.edges.iter().filter(|e| e.to == SINK).map(|e| e.flow).sum()
    }

    pub fn total_cost(&self) -> i64 {
        self.edges.iter().map(|e| e.flow * e.cost).sum()
    }

    pub fn edges_of(&self, kind: EdgeKind) -> impl Iterator<Item = &FlowEdge> + '_ {
        self.edges.iter().filter(move |e| e.kind == kind)
    }

    /// `(x, y)` tensor indices of every reuse edge.
    pub fn reuse_pairs(&self) -> Vec<(usize, usize)> {
        self.edges_of(EdgeKind::Reuse).map(|e| ((e.from - 2) / 2, (e.to - 3) / 2)).collect()
    }
}

pub fn build_flow_network(g: &GraphModel) -> FlowNetwork {
    build_flow_network_with(g, FlowOptions::default())
}

pub fn build_flow_network_with(g: &GraphModel, opts: FlowOptions) -> FlowNetwork {
    let intervals = liveness(g);
    let sizes: Vec<i64> = intervals.iter().map(|iv| g.tensor_size(iv.tensor_id) as i64).collect();
    let mut edges = Vec::new();
    let edge = |from, to, cost, kind| FlowEdge { from, to, capacity: 1, cost, flow: 0, kind };

    for (x, &size) in sizes.iter().enumerate() {
        edges.push(edge(SOURCE, FlowNetwork::right(x), size, EdgeKind::NewObject));
        edges.push(edge(SOURCE, FlowNetwork::left(x), 0, EdgeKind::SourceToLeft));
        edges.push(edge(FlowNetwork::right(x), SINK, 0, EdgeKind::RightToSink));
    }
    for (x, ix) in intervals.iter().enumerate() {
        for (y, iy) in intervals.iter().enumerate() {
            if !ix.precedes(iy) {
                continue;
            }
            if opts.sparse_reuse && has_intermediate_between(&intervals, ix, iy) {
                continue;
            }
            let cost = (sizes[y] - sizes[x]).max(0);
            edges.push(edge(FlowNetwork::left(x), FlowNetwork::right(y), cost, EdgeKind::Reuse));
        }
    }

    FlowNetwork { tensors: intervals.iter().map(|iv| iv.tensor_id).collect(), sizes, edges }
}

fn has_intermediate_between(all: &[LivenessInterval], x: &LivenessInterval, y: &LivenessInterval) -> bool {
    all.iter().any(|z| x.precedes(z) && z.precedes(y))
}

#[derive(Debug, Clone, Copy)]
struct Arc {
    to: usize,
    residual: i64,
    cost: i64,
}

/// Minimum-cost flow of value `N` by successive shortest paths.
pub fn solve_mcfp(net: &FlowNetwork) -> Result<FlowNetwork, PlanError> {
    let n = net.vertex_count();
    let required = net.tensors.len();

    // Arc 2e is edge e, arc 2e+1 its reverse.
    let mut arcs = Vec::with_capacity(net.edges.len() * 2);
    let mut adjacency: Vec<Vec<usize>> = vec![Vec::new(); n];
    for e in &net.edges {
        adjacency[e.from].push(arcs.len());
        arcs.push(Arc { to: e.to, residual: e.capacity - e.flow, cost: e.cost });
        adjacency[e.to].push(arcs.len());
        arcs.push(Arc { to: e.from, residual: e.flow, cost: -e.cost });
    }

    let mut flow = net.total_flow();
    let mut dist = vec![i64::MAX; n];
    let mut via = vec![usize::MAX; n];
    let mut queued = vec![false; n];
    let mut queue = VecDeque::new();

    while flow < required as i64 {
        dist.fill(i64::MAX);
        via.fill(usize::MAX);
        dist[SOURCE] = 0;
        queue.push_back(SOURCE);
        queued[SOURCE] = true;
        while let Some(u) = queue.pop_front() {
            queued[u] = false;
            for &a in &adjacency[u] {
                let arc = arcs[a];
                if arc.residual <= 0 {
                    continue;
                }
                let candidate = dist[u] + arc.cost;
                if candidate < dist[arc.to] {
                    dist[arc.to] = candidate;
                    via[arc.to] = a;
                    if !queued[arc.to] {
                        queued[arc.to] = true;
                        queue.push_back(arc.to);
                    }
                }
            }
        }
        if dist[SINK] == i64::MAX {
            break;
        }

        let mut push = required as i64 - flow;
        let mut v = SINK;
        while v != SOURCE {
            let a = via[v];
            push = push.min(arcs[a].residual);
            v = arcs[a ^ 1].to;
        }
        let mut v = SINK;
        while v != SOURCE {
            let a = via[v];
            arcs[a].residual -= push;
            arcs[a ^ 1].residual += push;
            v = arcs[a ^ 1].to;
        }
        flow += push;
    }

    if flow < required as i64 {
        return Err(PlanError::Infeasible { flow, required });
    }

    let mut solved = net.clone();
    for (i, e) in solved.edges.iter_mut().enumerate() {
        e.flow = e.capacity - arcs[2 * i].residual;
    }
    Ok(solved)
}

/// Reads objects off a solved network: saturated `s → r_x` edges open
/// objects and saturated `l_x → r_y` edges chain `y` after `x`.
pub fn extract_assignment(net: &FlowNetwork) -> Result<MemoryPlan, PlanError> {
    let n = net.tensors.len();
    let flow = net.total_flow();
    if flow != n as i64 {
        return Err(PlanError::Infeasible { flow, required: n });
    }

    let mut opens = vec![false; n];
    let mut next: HashMap<usize, usize> = HashMap::new();
    let mut incoming = vec![0usize; n];
    for e in net.edges.iter().filter(|e| e.flow > 0) {
        match e.kind {
            EdgeKind::NewObject => {
                let x = (e.to - 3) / 2;
                opens[x] = true;
                incoming[x] += 1;
            }
            EdgeKind::Reuse => {
                let (x, y) = ((e.from - 2) / 2, (e.to - 3) / 2);
                if next.insert(x, y).is_some() {
                    return Err(PlanError::BadAssignment(format!("tensor {} handed on twice", net.tensors[x])));
                }
                incoming[y] += 1;
            }
            _ => {}
        }
    }
    if let Some(x) = incoming.iter().position(|&c| c != 1) {
        return Err(PlanError::BadAssignment(format!("tensor {} receives {} units", net.tensors[x], incoming[x])));
    }

    let mut objects = Vec::new();
    for head in (0..n).filter(|&x| opens[x]) {
        let mut tensors = vec![net.tensors[head]];
        let mut size = net.sizes[head];
        let mut cur = head;
        while let Some(&y) = next.get(&cur) {
            tensors.push(net.tensors[y]);
            size = size.max(net.sizes[y]);
            cur = y;
        }
        objects.push(SharedObject { id: objects.len(), size: size as usize, tensors });
    }
    Ok(MemoryPlan::new(Strategy::MinCostFlow, objects))
}

pub fn plan_mincostflow(g: &GraphModel) -> Result<MemoryPlan, PlanError> {
    plan_mincostflow_with(g, FlowOptions::default())
}

pub fn plan_mincostflow_with(g: &GraphModel, opts: FlowOptions) -> Result<MemoryPlan, PlanError> {
    extract_assignment(&solve_mcfp(&build_flow_network_with(g, opts))?)
}
