use std::collections::HashSet;
use std::fmt;

use serde::Serialize;

use crate::graph::{liveness_map, GraphModel, LivenessInterval, TensorId};

use super::MemoryPlan;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "violation", rename_all = "kebab-case")]
pub enum PlanViolation {
    /// Two tensors of one object are live at the same time.
    Overlap {
        object: usize,
        first: TensorId,
        second: TensorId,
    },
    Undersized {
        object: usize,
        tensor: TensorId,
        object_size: usize,
        tensor_size: usize,
    },
    Unassigned {
        tensor: TensorId,
    },
    MultiplyAssigned {
        tensor: TensorId,
    },
    /// Assigned tensor is not an intermediate of the graph.
    NotIntermediate {
        tensor: TensorId,
    },
    TotalMismatch {
        declared: usize,
        actual: usize,
    },
}

impl fmt::Display for PlanViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PlanViolation::Overlap { object, first, second } => {
                write!(f, "overlap(object {object}: {first}, {second})")
            }
            PlanViolation::Undersized { object, tensor, object_size, tensor_size } => {
                write!(f, "undersized(object {object} of {object_size} bytes holds tensor {tensor} of {tensor_size})")
            }
            PlanViolation::Unassigned { tensor } => write!(f, "unassigned({tensor})"),
            PlanViolation::MultiplyAssigned { tensor } => write!(f, "multiply-assigned({tensor})"),
            PlanViolation::NotIntermediate { tensor } => write!(f, "not-intermediate({tensor})"),
            PlanViolation::TotalMismatch { declared, actual } => {
                write!(f, "total-mismatch(declared {declared}, objects sum to {actual})")
            }
        }
    }
}

/// Checks a plan against the graph's liveness. Empty means the plan is safe.
pub fn verify_plan(g: &GraphModel, p: &MemoryPlan) -> Vec<PlanViolation> {
    let live = liveness_map(g);
    let mut out = Vec::new();
    let mut seen: HashSet<TensorId> = HashSet::new();

    for (index, obj) in p.objects.iter().enumerate() {
        let mut members = Vec::new();
        for &t in &obj.tensors {
            if !seen.insert(t) {
                out.push(PlanViolation::MultiplyAssigned { tensor: t });
            }
            let Some(iv) = live.get(&t) else {
                out.push(PlanViolation::NotIntermediate { tensor: t });
                continue;
            };
            let tensor_size = g.tensor_size(t);
            if tensor_size > obj.size {
                out.push(PlanViolation::Undersized { object: index, tensor: t, object_size: obj.size, tensor_size });
            }
            members.push(*iv);
        }
        // Sorted by birth, an overlap always shows up against the member
        // that dies latest so far.
        members.sort_by_key(|iv| (iv.first_use, iv.tensor_id));
        let mut latest: Option<LivenessInterval> = None;
        for iv in members {
            if let Some(prev) = latest {
                if !prev.precedes(&iv) {
                    out.push(PlanViolation::Overlap { object: index, first: prev.tensor_id, second: iv.tensor_id });
                }
                if iv.last_use > prev.last_use {
                    latest = Some(iv);
                }
            } else {
                latest = Some(iv);
            }
        }
    }

    let mut missing: Vec<TensorId> = live.keys().filter(|t| !seen.contains(t)).copied().collect();
    missing.sort();
    out.extend(missing.into_iter().map(|tensor| PlanViolation::Unassigned { tensor }));

    let actual: usize = p.objects.iter().map(|o| o.size).sum();
    if actual != p.total_bytes {
        out.push(PlanViolation::TotalMismatch { declared: p.total_bytes, actual });
    }
    out
}
