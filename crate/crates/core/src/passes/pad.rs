use crate::graph::{GraphModel, OpId, OpKind};

use super::{run_to_fixpoint, sole_reader, Parts, Pass, RewriteEntry, RewriteLog};

/// Folds a PAD into the convolution that is its only reader: the PAD goes
/// away and its amounts are added to the convolution's padding.
pub fn merge_pad(g: &GraphModel) -> (GraphModel, RewriteLog) {
    run_to_fixpoint(g, Pass::MergePad)
}

pub(super) fn merge_at(g: &GraphModel, id: OpId) -> Option<(GraphModel, RewriteEntry)> {
    let pad = g.op(id)?;
    let (&[input], &[padded]) = (pad.inputs.as_slice(), pad.outputs.as_slice()) else {
        return None;
    };
    if pad.kind != OpKind::Pad {
        return None;
    }
    let &[consumer] = g.consumers(padded) else {
        return None;
    };
    let conv = g.op(consumer)?;
    if !conv.kind.is_conv() || conv.inputs.first() != Some(&padded) || !sole_reader(g, padded, conv) {
        return None;
    }

    let mut parts = Parts::of(g);
    let merged = conv.attrs.padding() + pad.attrs.padding();
    let target = parts.op_mut(consumer);
    target.inputs[0] = input;
    target.attrs.padding = (!merged.is_zero()).then_some(merged);
    parts.remove_op(id);
    parts.remove_tensor(padded);
    let entry = RewriteEntry {
        pass_name: Pass::MergePad.name().into(),
        removed_op_ids: vec![id],
        fused_into_op_id: Some(consumer),
    };
    Some((parts.build(), entry))
}
