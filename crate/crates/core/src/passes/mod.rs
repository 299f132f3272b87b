//! Graph rewrites (identity removal, pad merging, element-wise fusion) and
//! delegate partitioning.
//!
//! Every rewrite is a pure `GraphModel → GraphModel` function that runs to a
//! fixpoint and records each application in a [`RewriteLog`]. Rewrites only
//! delete ops and rewire or fold attributes, so executing the graph before
//! and after gives bit-identical outputs.

mod fuse;
mod identity;
mod pad;
mod partition;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{GraphModel, OpId, OpNode, TensorId, TensorSpec};

pub use fuse::fuse_elementwise;
pub use identity::remove_identity_ops;
pub use pad::merge_pad;
pub use partition::{partition_delegate, Backend, Partition, Segment};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PassError {
    #[error("unknown pass {0:?} (expected remove_identity_ops, merge_pad or fuse_elementwise)")]
    UnknownPass(String),
    #[error("rewrite log entry {index} does not apply: {detail}")]
    Replay { index: usize, detail: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pass {
    RemoveIdentityOps,
    MergePad,
    FuseElementwise,
}

/// Identity removal exposes pad merges, and both expose fusions.
pub const DEFAULT_PIPELINE: [Pass; 3] = [Pass::RemoveIdentityOps, Pass::MergePad, Pass::FuseElementwise];

impl Pass {
    pub fn name(&self) -> &'static str {
        match self {
            Pass::RemoveIdentityOps => "remove_identity_ops",
            Pass::MergePad => "merge_pad",
            Pass::FuseElementwise => "fuse_elementwise",
        }
    }

    pub fn apply(&self, g: &GraphModel) -> (GraphModel, RewriteLog) {
        match self {
            Pass::RemoveIdentityOps => remove_identity_ops(g),
            Pass::MergePad => merge_pad(g),
            Pass::FuseElementwise => fuse_elementwise(g),
        }
    }

    /// Applies this pass at one site. `None` when the site does not match.
    fn apply_at(&self, g: &GraphModel, op: OpId) -> Option<(GraphModel, RewriteEntry)> {
        match self {
            Pass::RemoveIdentityOps => identity::remove_at(g, op),
            Pass::MergePad => pad::merge_at(g, op),
            Pass::FuseElementwise => fuse::fuse_at(g, op),
        }
    }
}

impl fmt::Display for Pass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.name())
    }
}

/// Accepts the full pass names and the short forms `identity`, `pad`, `fuse`.
impl FromStr for Pass {
    type Err = PassError;

    fn from_str(s: &str) -> Result<Self, PassError> {
        match s.trim() {
            "remove_identity_ops" | "identity" => Ok(Pass::RemoveIdentityOps),
            "merge_pad" | "pad" => Ok(Pass::MergePad),
            "fuse_elementwise" | "fuse" => Ok(Pass::FuseElementwise),
            other => Err(PassError::UnknownPass(other.to_string())),
        }
    }
}

/// Parses a comma-separated pass list.
pub fn parse_pass_list(s: &str) -> Result<Vec<Pass>, PassError> {
    s.split(',').filter(|p| !p.trim().is_empty()).map(str::parse).collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RewriteEntry {
    pub pass_name: String,
    pub removed_op_ids: Vec<OpId>,
    pub fused_into_op_id: Option<OpId>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RewriteLog {
    pub entries: Vec<RewriteEntry>,
}

impl RewriteLog {
    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn extend(&mut self, other: RewriteLog) {
        self.entries.extend(other.entries);
    }

    /// Re-applies each entry in order to `g`.
    pub fn replay(&self, g: &GraphModel) -> Result<GraphModel, PassError> {
        let mut g = g.clone();
        for (index, e) in self.entries.iter().enumerate() {
            let fail = |detail: String| PassError::Replay { index, detail };
            let pass: Pass = e.pass_name.parse().map_err(|_| fail(format!("unknown pass {}", e.pass_name)))?;
            let &[op] = e.removed_op_ids.as_slice() else {
                return Err(fail(format!("expected one removed op, got {}", e.removed_op_ids.len())));
            };
            let (next, applied) =
                pass.apply_at(&g, op).ok_or_else(|| fail(format!("{pass} does not match op {op}")))?;
            if applied != *e {
                return Err(fail(format!("{pass} at op {op} produced {applied:?}")));
            }
            g = next;
        }
        Ok(g)
    }
}

/// Runs `passes` in order, concatenating their logs.
pub fn optimize(g: &GraphModel, passes: &[Pass]) -> (GraphModel, RewriteLog) {
    let mut log = RewriteLog::default();
    let mut g = g.clone();
    for pass in passes {
        let (next, l) = pass.apply(&g);
        g = next;
        log.extend(l);
    }
    (g, log)
}

/// Applies `pass` at the first matching op in execution order until nothing
/// matches.
fn run_to_fixpoint(g: &GraphModel, pass: Pass) -> (GraphModel, RewriteLog) {
    let mut g = g.clone();
    let mut log = RewriteLog::default();
    'outer: loop {
        for op in g.execution_order().to_vec() {
            if let Some((next, entry)) = pass.apply_at(&g, op) {
                g = next;
                log.entries.push(entry);
                continue 'outer;
            }
        }
        return (g, log);
    }
}

/// Mutable copy of a graph's parts, rebuilt into a fresh [`GraphModel`].
struct Parts {
    tensors: Vec<TensorSpec>,
    ops: Vec<OpNode>,
    element_bytes: usize,
}

impl Parts {
    fn of(g: &GraphModel) -> Self {
        Parts { tensors: g.tensors().to_vec(), ops: g.ops().to_vec(), element_bytes: g.element_bytes() }
    }

    fn op_mut(&mut self, id: OpId) -> &mut OpNode {
        self.ops.iter_mut().find(|o| o.id == id).expect("op exists")
    }

    fn remove_op(&mut self, id: OpId) {
        self.ops.retain(|o| o.id != id);
    }

    fn remove_tensor(&mut self, id: TensorId) {
        self.tensors.retain(|t| t.id != id);
    }

    /// Replaces every read of `from` with `to`.
    fn rewire_reads(&mut self, from: TensorId, to: TensorId) {
        for op in &mut self.ops {
            for t in &mut op.inputs {
                if *t == from {
                    *t = to;
                }
            }
        }
    }

    fn build(self) -> GraphModel {
        GraphModel::with_element_bytes(self.tensors, self.ops, self.element_bytes)
    }
}

/// The intermediate `t` is read only by `op`, through exactly one input slot.
fn sole_reader(g: &GraphModel, t: TensorId, op: &OpNode) -> bool {
    g.is_intermediate(t) && g.consumers(t) == [op.id] && op.inputs.iter().filter(|&&x| x == t).count() == 1
}
