use crate::graph::{GraphModel, OpId, OpKind, TensorRole};

use super::{run_to_fixpoint, sole_reader, Parts, Pass, RewriteEntry, RewriteLog};

/// Removes RESIZE by 1 and single-input ADD/CONCAT ops, rewiring readers
/// of the op's output to its input.
///
/// When the output is a graph output its id is kept: the op producing the
/// input is rebound to write the graph output directly. That needs the input
/// to be an intermediate read only by the identity op; otherwise the
/// identity stays.
pub fn remove_identity_ops(g: &GraphModel) -> (GraphModel, RewriteLog) {
    run_to_fixpoint(g, Pass::RemoveIdentityOps)
}

pub(super) fn remove_at(g: &GraphModel, id: OpId) -> Option<(GraphModel, RewriteEntry)> {
    let op = g.op(id)?;
    let is_identity = match op.kind {
        OpKind::Resize => op.attrs.scale() == 1,
        OpKind::Add | OpKind::Concat => true,
        _ => false,
    };
    let (&[input], &[output]) = (op.inputs.as_slice(), op.outputs.as_slice()) else {
        return None;
    };
    if !is_identity || input == output || g.tensor(input)?.shape != g.tensor(output)?.shape {
        return None;
    }

    let mut parts = Parts::of(g);
    if g.tensor(output)?.role == TensorRole::GraphOutput {
        if !sole_reader(g, input, op) {
            return None;
        }
        let producer = g.producer(input)?;
        for t in &mut parts.op_mut(producer).outputs {
            if *t == input {
                *t = output;
            }
        }
        parts.remove_tensor(input);
    } else {
        parts.rewire_reads(output, input);
        parts.remove_tensor(output);
    }
    parts.remove_op(id);
    let entry = RewriteEntry {
        pass_name: Pass::RemoveIdentityOps.name().into(),
        removed_op_ids: vec![id],
        fused_into_op_id: None,
    };
    Some((parts.build(), entry))
}
