//! Intermediate-tensor memory planning.
//!
//! Intermediate tensors whose lifetimes never overlap can share one
//! allocation (a *shared object*) sized to the largest tensor it ever holds.
//! Reuse follows a strict rule: the object of `x` may hold `y` only if the
//! last consumer of `x` runs before the producer of `y`, since an op's inputs
//! and outputs coexist.

mod brute;
mod flow;
mod greedy;
mod verify;

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{liveness, GraphModel, TensorId};

pub use brute::{brute_force_plan, MAX_BRUTE_FORCE_TENSORS};
pub use flow::{
    build_flow_network, build_flow_network_with, extract_assignment, plan_mincostflow, plan_mincostflow_with,
    solve_mcfp, EdgeKind, FlowEdge, FlowNetwork, FlowOptions, SINK, SOURCE,
};
pub use greedy::{plan_greedy, plan_greedy_counted};
pub use verify::{verify_plan, PlanViolation};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PlanError {
    #[error("{count} intermediate tensors exceed the exhaustive-search limit of {max}")]
    TooManyTensors { count: usize, max: usize },
    #[error("flow network carries {flow} units, {required} required")]
    Infeasible { flow: i64, required: usize },
    #[error("flow does not encode an assignment: {0}")]
    BadAssignment(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    Naive,
    Greedy,
    #[serde(rename = "mincostflow")]
    MinCostFlow,
    #[serde(rename = "bruteforce")]
    BruteForce,
}

impl Strategy {
    pub fn as_str(&self) -> &'static str {
        match self {
            Strategy::Naive => "naive",
            Strategy::Greedy => "greedy",
            Strategy::MinCostFlow => "mincostflow",
            Strategy::BruteForce => "bruteforce",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.as_str())
    }
}

impl FromStr for Strategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "naive" => Ok(Strategy::Naive),
            "greedy" => Ok(Strategy::Greedy),
            "mincostflow" | "mcfp" => Ok(Strategy::MinCostFlow),
            "bruteforce" => Ok(Strategy::BruteForce),
            other => Err(format!("unknown strategy `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SharedObject {
    pub id: usize,
    pub size: usize,
    pub tensors: Vec<TensorId>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MemoryPlan {
    pub strategy: Strategy,
    pub objects: Vec<SharedObject>,
    pub total_bytes: usize,
}

impl MemoryPlan {
    pub fn new(strategy: Strategy, objects: Vec<SharedObject>) -> Self {
        let total_bytes = objects.iter().map(|o| o.size).sum();
        Self { strategy, objects, total_bytes }
    }

    /// Tensor → object index.
    pub fn assignment(&self) -> HashMap<TensorId, usize> {
        self.objects.iter().enumerate().flat_map(|(i, o)| o.tensors.iter().map(move |&t| (t, i))).collect()
    }

    pub fn object_of(&self, t: TensorId) -> Option<&SharedObject> {
        self.objects.iter().find(|o| o.tensors.contains(&t))
    }
}

/// One object per intermediate tensor.
pub fn plan_naive(g: &GraphModel) -> MemoryPlan {
    let objects = liveness(g)
        .iter()
        .enumerate()
        .map(|(id, iv)| SharedObject { id, size: g.tensor_size(iv.tensor_id), tensors: vec![iv.tensor_id] })
        .collect();
    MemoryPlan::new(Strategy::Naive, objects)
}

pub fn plan(g: &GraphModel, strategy: Strategy) -> Result<MemoryPlan, PlanError> {
    match strategy {
        Strategy::Naive => Ok(plan_naive(g)),
        Strategy::Greedy => Ok(plan_greedy(g)),
        Strategy::MinCostFlow => plan_mincostflow(g),
        Strategy::BruteForce => brute_force_plan(g),
    }
}

#[cfg(test)]
pub(crate) mod fixtures {
    use crate::graph::{GraphModel, OpKind, OpNode, TensorRole, TensorShape, TensorSpec};

    fn sized(id: u32, bytes: usize, role: TensorRole) -> TensorSpec {
        TensorSpec::new(id, TensorShape::hwc(1, 1, bytes), role)
    }

    /// `o0 → o1 → … → on` where op `i < n` emits intermediate `i` of
    /// `sizes[i]` bytes.
    pub fn chain(sizes: &[usize]) -> GraphModel {
        crate::bench::sized_chain(sizes)
    }

    /// `o0 → t0 → {o1, o2} → o3` with sizes for t0, t1, t2.
    pub fn diamond(s0: usize, s1: usize, s2: usize) -> GraphModel {
        let tensors = vec![
            sized(100, 1, TensorRole::GraphInput),
            sized(0, s0, TensorRole::Intermediate),
            sized(1, s1, TensorRole::Intermediate),
            sized(2, s2, TensorRole::Intermediate),
            sized(200, 1, TensorRole::GraphOutput),
        ];
        let ops = vec![
            OpNode::new(0, OpKind::Custom, &[100], &[0]),
            OpNode::new(1, OpKind::Custom, &[0], &[1]),
            OpNode::new(2, OpKind::Custom, &[0], &[2]),
            OpNode::new(3, OpKind::Custom, &[1, 2], &[200]),
        ];
        GraphModel::with_element_bytes(tensors, ops, 1)
    }

    /// `n` intermediates all produced by o0..o(n-1) and consumed by one final op.
    pub fn all_overlapping(sizes: &[usize]) -> GraphModel {
        let mut tensors = vec![sized(100, 1, TensorRole::GraphInput), sized(200, 1, TensorRole::GraphOutput)];
        let mut ops = Vec::new();
        for (i, &s) in sizes.iter().enumerate() {
            tensors.push(sized(i as u32, s, TensorRole::Intermediate));
            ops.push(OpNode::new(i as u32, OpKind::Custom, &[100], &[i as u32]));
        }
        let all: Vec<u32> = (0..sizes.len() as u32).collect();
        ops.push(OpNode::new(sizes.len() as u32, OpKind::Custom, &all, &[200]));
        GraphModel::with_element_bytes(tensors, ops, 1)
    }
}
