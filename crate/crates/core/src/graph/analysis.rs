use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashMap};

use serde::{Deserialize, Serialize};

use super::{GraphError, GraphModel, OpId, TensorId};

/// Kahn's algorithm over producer→consumer edges. Independent ops come out
/// in ascending id order.
pub fn topo_sort(g: &GraphModel) -> Result<Vec<OpId>, GraphError> {
    let ops = g.ops();
    let index_of: HashMap<OpId, usize> = ops.iter().enumerate().map(|(i, o)| (o.id, i)).collect();

    // preds[i] holds distinct producer indices feeding op i.
    let mut preds: Vec<Vec<usize>> = vec![Vec::new(); ops.len()];
    let mut succs: Vec<Vec<usize>> = vec![Vec::new(); ops.len()];
    for (i, op) in ops.iter().enumerate() {
        for &t in &op.inputs {
            let Some(p) = g.producer(t).and_then(|p| index_of.get(&p).copied()) else {
                continue;
            };
            if !preds[i].contains(&p) {
                preds[i].push(p);
                succs[p].push(i);
            }
        }
    }

    let mut indegree: Vec<usize> = preds.iter().map(Vec::len).collect();
    let mut ready: BinaryHeap<Reverse<(OpId, usize)>> =
        indegree.iter().enumerate().filter(|(_, &d)| d == 0).map(|(i, _)| Reverse((ops[i].id, i))).collect();

    let mut order = Vec::with_capacity(ops.len());
    while let Some(Reverse((id, i))) = ready.pop() {
        order.push(id);
        for &s in &succs[i] {
            indegree[s] -= 1;
            if indegree[s] == 0 {
                ready.push(Reverse((ops[s].id, s)));
            }
        }
    }

    if order.len() == ops.len() {
        return Ok(order);
    }

    // Every leftover op has a leftover predecessor, so walking predecessors
    // from any of them must revisit an op; that op lies on a cycle.
    let start = (0..ops.len()).filter(|&i| indegree[i] > 0).min_by_key(|&i| ops[i].id).expect("leftover op exists");
    let mut seen = vec![false; ops.len()];
    let mut cur = start;
    while !seen[cur] {
        seen[cur] = true;
        cur = *preds[cur].iter().find(|&&p| indegree[p] > 0).expect("leftover op has a leftover predecessor");
    }
    Err(GraphError::Cycle(ops[cur].id))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LivenessInterval {
    pub tensor_id: TensorId,
    /// Execution index of the producer.
    pub first_use: usize,
    /// Execution index of the last consumer, or `first_use` if never consumed.
    pub last_use: usize,
}

impl LivenessInterval {
    pub fn contains(&self, step: usize) -> bool {
        self.first_use <= step && step <= self.last_use
    }

    /// Strict reuse rule: `self` is dead before `later` is produced.
    pub fn precedes(&self, later: &LivenessInterval) -> bool {
        self.last_use < later.first_use
    }

    pub fn overlaps(&self, other: &LivenessInterval) -> bool {
        !self.precedes(other) && !other.precedes(self)
    }
}

/// One interval per intermediate tensor with a producer, sorted by
/// `(first_use, tensor_id)`.
pub fn liveness(g: &GraphModel) -> Vec<LivenessInterval> {
    let mut position: HashMap<OpId, usize> = HashMap::with_capacity(g.ops().len());
    for (i, &op) in g.execution_order().iter().enumerate() {
        position.entry(op).or_insert(i);
    }

    let mut intervals: Vec<LivenessInterval> = g
        .intermediates()
        .filter_map(|t| {
            let first_use = *position.get(&g.producer(t.id)?)?;
            let last_use = g
                .consumers(t.id)
                .iter()
                .filter_map(|c| position.get(c).copied())
                .max()
                .unwrap_or(first_use)
                .max(first_use);
            Some(LivenessInterval { tensor_id: t.id, first_use, last_use })
        })
        .collect();
    intervals.sort_by_key(|iv| (iv.first_use, iv.tensor_id));
    intervals
}

pub fn liveness_map(g: &GraphModel) -> HashMap<TensorId, LivenessInterval> {
    liveness(g).into_iter().map(|iv| (iv.tensor_id, iv)).collect()
}

/// Maximum over execution steps of the summed sizes of live intermediates.
/// Any valid memory plan needs at least this many bytes.
pub fn peak_live_bytes(g: &GraphModel) -> usize {
    let steps = g.execution_order().len();
    if steps == 0 {
        return 0;
    }
    let mut delta = vec![0i128; steps + 1];
    for iv in liveness(g) {
        let size = g.tensor_size(iv.tensor_id) as i128;
        delta[iv.first_use] += size;
        delta[iv.last_use + 1] -= size;
    }
    let mut live = 0i128;
    let mut peak = 0i128;
    for d in &delta[..steps] {
        live += d;
        peak = peak.max(live);
    }
    peak as usize
}
