// Splits a graph with unsupported ops into delegate and CPU segments.

use inferplan::passes::partition_delegate;
use inferplan::{GraphModel, OpKind, OpNode, TensorRole, TensorShape, TensorSpec};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let s = TensorShape::hwc(4, 4, 8);
    let role = |i| match i {
        0 => TensorRole::GraphInput,
        4 => TensorRole::GraphOutput,
        _ => TensorRole::Intermediate,
    };
    let g = GraphModel::new(
        (0..5).map(|i| TensorSpec::new(i, s, role(i))).collect(),
        vec![
            OpNode::new(0, OpKind::Relu, &[0], &[1]),
            OpNode::new(1, OpKind::Custom, &[1], &[2]),
            OpNode::new(2, OpKind::Relu, &[2], &[3]),
            OpNode::new(3, OpKind::Add, &[1, 3], &[4]),
        ],
    );
    let p = partition_delegate(&g);
    for seg in &p.segments {
        println!("{:?}: ops {:?}", seg.backend, seg.op_ids);
    }
    println!("{} delegate nodes", p.delegate_count());
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()
}
