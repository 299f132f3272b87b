use std::collections::{HashMap, HashSet};
use std::fmt;

use serde::Serialize;

use super::{topo_sort, GraphError, GraphModel, OpId, OpKind, OpNode, TensorId, TensorRole, TensorShape};

/// A single well-formedness problem. Violations are data, not failures.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "violation", rename_all = "kebab-case")]
pub enum Violation {
    DuplicateTensor {
        tensor: TensorId,
    },
    DuplicateOp {
        op: OpId,
    },
    InvalidShape {
        tensor: TensorId,
    },
    DanglingTensor {
        op: OpId,
        tensor: TensorId,
    },
    MultiProducer {
        tensor: TensorId,
    },
    Cycle {
        op: OpId,
    },
    /// A graph input or weight written by an op.
    ProducedSource {
        tensor: TensorId,
    },
    /// An intermediate or graph output that nothing produces.
    Unproduced {
        tensor: TensorId,
    },
    Arity {
        op: OpId,
        detail: String,
    },
    ShapeMismatch {
        op: OpId,
        detail: String,
    },
    WeightData {
        tensor: TensorId,
        detail: String,
    },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::DuplicateTensor { tensor } => write!(f, "duplicate-tensor({tensor})"),
            Violation::DuplicateOp { op } => write!(f, "duplicate-op({op})"),
            Violation::InvalidShape { tensor } => write!(f, "invalid-shape({tensor})"),
            Violation::DanglingTensor { tensor, .. } => write!(f, "dangling-tensor({tensor})"),
            Violation::MultiProducer { tensor } => write!(f, "multi-producer({tensor})"),
            Violation::Cycle { op } => write!(f, "cycle({op})"),
            Violation::ProducedSource { tensor } => write!(f, "produced-source({tensor})"),
            Violation::Unproduced { tensor } => write!(f, "unproduced({tensor})"),
            Violation::Arity { op, detail } => write!(f, "arity({op}: {detail})"),
            Violation::ShapeMismatch { op, detail } => write!(f, "shape-mismatch({op}: {detail})"),
            Violation::WeightData { tensor, detail } => write!(f, "weight-data({tensor}: {detail})"),
        }
    }
}

/// Returns every invariant violation; an empty list means the graph is
/// well-formed.
pub fn validate_graph(g: &GraphModel) -> Vec<Violation> {
    let mut out = Vec::new();

    let mut seen = HashSet::new();
    for t in g.tensors() {
        if !seen.insert(t.id) {
            out.push(Violation::DuplicateTensor { tensor: t.id });
        }
        if !t.shape.is_valid() {
            out.push(Violation::InvalidShape { tensor: t.id });
        }
        if let Some(data) = &t.data {
            if data.len() != t.shape.element_count() {
                out.push(Violation::WeightData {
                    tensor: t.id,
                    detail: format!("{} values for shape {}", data.len(), t.shape),
                });
            }
        }
    }
    let mut seen = HashSet::new();
    for op in g.ops() {
        if !seen.insert(op.id) {
            out.push(Violation::DuplicateOp { op: op.id });
        }
    }

    let mut producers: HashMap<TensorId, usize> = HashMap::new();
    for op in g.ops() {
        for &t in op.inputs.iter().chain(&op.outputs) {
            if g.tensor(t).is_none() {
                out.push(Violation::DanglingTensor { op: op.id, tensor: t });
            }
        }
        for &t in &op.outputs {
            *producers.entry(t).or_default() += 1;
        }
    }
    for t in g.tensors() {
        let count = producers.get(&t.id).copied().unwrap_or(0);
        if count > 1 {
            out.push(Violation::MultiProducer { tensor: t.id });
        }
        match t.role {
            TensorRole::GraphInput | TensorRole::Weight if count > 0 => {
                out.push(Violation::ProducedSource { tensor: t.id })
            }
            TensorRole::Intermediate | TensorRole::GraphOutput if count == 0 => {
                out.push(Violation::Unproduced { tensor: t.id })
            }
            _ => {}
        }
    }

    if let Err(GraphError::Cycle(op)) = topo_sort(g) {
        out.push(Violation::Cycle { op });
    }

    for op in g.ops() {
        let resolvable = op.inputs.iter().chain(&op.outputs).all(|&t| g.tensor(t).is_some());
        if !resolvable || op.kind == OpKind::Custom {
            continue;
        }
        if op.outputs.len() != 1 {
            out.push(Violation::Arity {
                op: op.id,
                detail: format!("{} expects exactly one output, got {}", op.kind, op.outputs.len()),
            });
            continue;
        }
        match infer_output_shape(g, op) {
            Err(v) => out.push(v),
            Ok(expected) => {
                let declared = g.tensor(op.outputs[0]).expect("resolvable").shape;
                if declared != expected {
                    out.push(Violation::ShapeMismatch {
                        op: op.id,
                        detail: format!("output {} declared {declared}, expected {expected}", op.outputs[0]),
                    });
                }
            }
        }
    }

    out
}

/// Output shape implied by an op's inputs and attributes. All referenced
/// tensors must exist. CUSTOM ops have no inferable shape and are rejected.
pub fn infer_output_shape(g: &GraphModel, op: &OpNode) -> Result<TensorShape, Violation> {
    let arity = |detail: String| Violation::Arity { op: op.id, detail };
    let mismatch = |detail: String| Violation::ShapeMismatch { op: op.id, detail };
    let shape_of = |t: TensorId| g.tensor(t).map(|s| s.shape).ok_or(Violation::DanglingTensor { op: op.id, tensor: t });
    let single_input = || -> Result<TensorShape, Violation> {
        match op.inputs.as_slice() {
            [t] => shape_of(*t),
            other => Err(arity(format!("{} expects one input, got {}", op.kind, other.len()))),
        }
    };

    match op.kind {
        OpKind::Conv2d | OpKind::DepthwiseConv => {
            if !(2..=3).contains(&op.inputs.len()) {
                return Err(arity(format!(
                    "{} expects input, weight and optional bias, got {} inputs",
                    op.kind,
                    op.inputs.len()
                )));
            }
            let x = shape_of(op.inputs[0])?;
            let weight = g.tensor(op.inputs[1]).expect("checked by caller");
            if weight.role != TensorRole::Weight {
                return Err(arity(format!("input {} must be a weight tensor", weight.id)));
            }
            let w = weight.shape;
            let (out_c, in_c) = match op.kind {
                OpKind::Conv2d => (w.b, w.c),
                _ => {
                    if w.b != 1 {
                        return Err(mismatch(format!("depthwise weight {w} must have leading dim 1")));
                    }
                    (w.c, w.c)
                }
            };
            if in_c != x.c {
                return Err(mismatch(format!("weight {w} expects {in_c} input channels, input has {}", x.c)));
            }
            if let Some([kh, kw]) = op.attrs.kernel {
                if (kh, kw) != (w.h, w.w) {
                    return Err(mismatch(format!("kernel attribute {kh}x{kw} disagrees with weight {w}")));
                }
            }
            if let Some(&bias) = op.inputs.get(2) {
                let bias = g.tensor(bias).expect("checked by caller");
                if bias.role != TensorRole::Weight || bias.shape != TensorShape::new(1, 1, 1, out_c) {
                    return Err(mismatch(format!("bias {} must be a [1,1,1,{out_c}] weight", bias.id)));
                }
            }
            let (sh, sw) = op.attrs.stride();
            if sh == 0 || sw == 0 {
                return Err(mismatch("stride must be positive".into()));
            }
            let p = op.attrs.padding();
            let ph = x.h + p.top + p.bottom;
            let pw = x.w + p.left + p.right;
            if ph < w.h || pw < w.w {
                return Err(mismatch(format!("kernel {}x{} larger than padded input {ph}x{pw}", w.h, w.w)));
            }
            Ok(TensorShape::new(x.b, (ph - w.h) / sh + 1, (pw - w.w) / sw + 1, out_c))
        }
        OpKind::Add => {
            let shapes = op.inputs.iter().map(|&t| shape_of(t)).collect::<Result<Vec<_>, _>>()?;
            let Some(largest) = shapes.iter().map(TensorShape::element_count).max() else {
                return Err(arity("ADD expects at least one input".into()));
            };
            // First input of maximal size defines the result.
            let full = *shapes.iter().find(|s| s.element_count() == largest).expect("non-empty");
            let bias = TensorShape::new(1, 1, 1, full.c);
            for s in &shapes {
                if *s != full && *s != bias {
                    return Err(mismatch(format!("ADD operand {s} neither matches {full} nor broadcasts as {bias}")));
                }
            }
            Ok(full)
        }
        OpKind::Concat => {
            let shapes = op.inputs.iter().map(|&t| shape_of(t)).collect::<Result<Vec<_>, _>>()?;
            let Some(first) = shapes.first().copied() else {
                return Err(arity("CONCAT expects at least one input".into()));
            };
            let mut c = 0;
            for s in &shapes {
                if (s.b, s.h, s.w) != (first.b, first.h, first.w) {
                    return Err(mismatch(format!("CONCAT operand {s} differs from {first} outside channels")));
                }
                c += s.c;
            }
            Ok(TensorShape { c, ..first })
        }
        OpKind::Relu => single_input(),
        OpKind::Pad => {
            let x = single_input()?;
            let p = op.attrs.padding();
            Ok(TensorShape { h: x.h + p.top + p.bottom, w: x.w + p.left + p.right, ..x })
        }
        OpKind::Resize => {
            let x = single_input()?;
            let s = op.attrs.scale();
            if s == 0 {
                return Err(mismatch("RESIZE scale must be positive".into()));
            }
            Ok(TensorShape { h: x.h * s, w: x.w * s, ..x })
        }
        OpKind::Reshape => {
            let x = single_input()?;
            let declared = op
                .outputs
                .first()
                .and_then(|&t| g.tensor(t))
                .map(|t| t.shape)
                .ok_or_else(|| arity("RESHAPE expects one output".into()))?;
            if declared.element_count() != x.element_count() {
                return Err(mismatch(format!("RESHAPE {x} -> {declared} changes element count")));
            }
            Ok(declared)
        }
        OpKind::Custom => Err(arity("CUSTOM ops have no inferable output shape".into())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{OpAttrs, Padding, TensorSpec};

    fn relu_graph() -> GraphModel {
        GraphModel::new(
            vec![
                TensorSpec::new(0, TensorShape::hwc(4, 4, 3), TensorRole::GraphInput),
                TensorSpec::new(1, TensorShape::hwc(4, 4, 3), TensorRole::GraphOutput),
            ],
            vec![OpNode::new(0, OpKind::Relu, &[0], &[1])],
        )
    }

    #[test]
    fn minimal_graph_is_valid() {
        assert_eq!(validate_graph(&relu_graph()), vec![]);
    }

    #[test]
    fn missing_tensor_is_dangling() {
        let (tensors, _) = relu_graph().into_parts();
        let g = GraphModel::new(tensors, vec![OpNode::new(0, OpKind::Relu, &[99], &[1])]);
        let v = validate_graph(&g);
        assert_eq!(v, vec![Violation::DanglingTensor { op: OpId(0), tensor: TensorId(99) }]);
        assert_eq!(v[0].to_string(), "dangling-tensor(99)");
    }

    #[test]
    fn two_producers_are_reported() {
        let (mut tensors, mut ops) = relu_graph().into_parts();
        tensors.push(TensorSpec::new(2, TensorShape::hwc(4, 4, 3), TensorRole::GraphInput));
        ops.push(OpNode::new(1, OpKind::Relu, &[2], &[1]));
        let g = GraphModel::new(tensors, ops);
        let v = validate_graph(&g);
        // Oracle: count producers of each tensor directly.
        let count = g.ops().iter().filter(|o| o.outputs.contains(&TensorId(1))).count();
        assert_eq!(count, 2);
        assert_eq!(v, vec![Violation::MultiProducer { tensor: TensorId(1) }]);
    }

    #[test]
    fn cycle_is_reported_as_data() {
        let g = GraphModel::new(
            vec![
                TensorSpec::new(0, TensorShape::hwc(1, 1, 1), TensorRole::Intermediate),
                TensorSpec::new(1, TensorShape::hwc(1, 1, 1), TensorRole::Intermediate),
            ],
            vec![OpNode::new(0, OpKind::Relu, &[1], &[0]), OpNode::new(1, OpKind::Relu, &[0], &[1])],
        );
        assert!(validate_graph(&g).iter().any(|v| matches!(v, Violation::Cycle { .. })));
    }

    #[test]
    fn conv_shapes_are_checked() {
        let tensors = vec![
            TensorSpec::new(0, TensorShape::hwc(5, 5, 2), TensorRole::GraphInput),
            TensorSpec::new(1, TensorShape::new(4, 3, 3, 2), TensorRole::Weight),
            TensorSpec::new(2, TensorShape::hwc(5, 5, 4), TensorRole::GraphOutput),
        ];
        let conv = OpNode::new(0, OpKind::Conv2d, &[0, 1], &[2])
            .with_attrs(OpAttrs { padding: Some(Padding::uniform(1)), ..Default::default() });
        let g = GraphModel::new(tensors.clone(), vec![conv.clone()]);
        assert_eq!(validate_graph(&g), vec![]);

        let unpadded = OpNode { attrs: OpAttrs::default(), ..conv };
        let g = GraphModel::new(tensors, vec![unpadded]);
        assert!(matches!(validate_graph(&g).as_slice(), [Violation::ShapeMismatch { .. }]));
    }

    #[test]
    fn add_accepts_channel_bias_broadcast() {
        let g = GraphModel::new(
            vec![
                TensorSpec::new(0, TensorShape::hwc(2, 2, 3), TensorRole::GraphInput),
                TensorSpec::new(1, TensorShape::new(1, 1, 1, 3), TensorRole::Weight),
                TensorSpec::new(2, TensorShape::hwc(2, 2, 3), TensorRole::GraphOutput),
            ],
            vec![OpNode::new(0, OpKind::Add, &[1, 0], &[2])],
        );
        assert_eq!(validate_graph(&g), vec![]);
    }

    #[test]
    fn graph_input_cannot_be_produced() {
        let g = GraphModel::new(
            vec![
                TensorSpec::new(0, TensorShape::hwc(2, 2, 3), TensorRole::GraphInput),
                TensorSpec::new(1, TensorShape::hwc(2, 2, 3), TensorRole::GraphInput),
            ],
            vec![OpNode::new(0, OpKind::Relu, &[0], &[1])],
        );
        assert_eq!(validate_graph(&g), vec![Violation::ProducedSource { tensor: TensorId(1) }]);
    }
}
