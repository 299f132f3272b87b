use crate::graph::{Activation, GraphModel, OpId, OpKind, TensorRole, TensorShape};

use super::{run_to_fixpoint, sole_reader, Parts, Pass, RewriteEntry, RewriteLog};

/// Folds a RELU, or an ADD of a `[1,1,1,C]` weight, into the convolution
/// whose output it alone reads. The convolution takes over the element-wise
/// op's output tensor.
///
/// A RELU needs a convolution without a fused activation. A bias ADD needs
/// one with neither bias nor activation, since the bias is applied first.
pub fn fuse_elementwise(g: &GraphModel) -> (GraphModel, RewriteLog) {
    run_to_fixpoint(g, Pass::FuseElementwise)
}

pub(super) fn fuse_at(g: &GraphModel, id: OpId) -> Option<(GraphModel, RewriteEntry)> {
    let op = g.op(id)?;
    let &[output] = op.outputs.as_slice() else {
        return None;
    };
    let (conv_out, bias) = match (op.kind, op.inputs.as_slice()) {
        (OpKind::Relu, &[x]) => (x, None),
        (OpKind::Add, &[a, b]) => {
            let is_bias = |t| {
                g.tensor(t)
                    .is_some_and(|s| s.role == TensorRole::Weight && (s.shape.b, s.shape.h, s.shape.w) == (1, 1, 1))
            };
            match (is_bias(a), is_bias(b)) {
                (false, true) => (a, Some(b)),
                (true, false) => (b, Some(a)),
                _ => return None,
            }
        }
        _ => return None,
    };
    let conv = g.op(g.producer(conv_out)?)?;
    if !conv.kind.is_conv() || !sole_reader(g, conv_out, op) || conv.attrs.fused_activation.is_some() {
        return None;
    }
    if let Some(b) = bias {
        if conv.inputs.len() != 2 || g.tensor(b)?.shape != TensorShape::new(1, 1, 1, g.tensor(conv_out)?.shape.c) {
            return None;
        }
    }

    let conv_id = conv.id;
    let mut parts = Parts::of(g);
    let target = parts.op_mut(conv_id);
    match bias {
        Some(b) => target.inputs.push(b),
        None => target.attrs.fused_activation = Some(Activation::Relu),
    }
    target.outputs = vec![output];
    parts.remove_op(id);
    parts.remove_tensor(conv_out);
    let entry = RewriteEntry {
        pass_name: Pass::FuseElementwise.name().into(),
        removed_op_ids: vec![id],
        fused_into_op_id: Some(conv_id),
    };
    Some((parts.build(), entry))
}
