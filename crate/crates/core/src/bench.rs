//! Graph generators, the bundled MobileNet-like model and strategy
//! comparison reports.

use std::collections::{HashMap, HashSet};
use std::ops::{Range, RangeInclusive};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::graph::{
    peak_live_bytes, Activation, GraphModel, OpAttrs, OpKind, OpNode, Padding, TensorId, TensorRole, TensorShape,
    TensorSpec,
};
use crate::memplan::{plan_greedy, plan_mincostflow, plan_naive, PlanError};

/// `o0 → o1 → … → on` over CUSTOM ops with one-byte elements: op `i < n`
/// writes intermediate `i` of `sizes[i]` bytes, op `n` writes the graph
/// output. The graph input and output take ids `n` and `n + 1`.
pub fn sized_chain(sizes: &[usize]) -> GraphModel {
    let n = sizes.len() as u32;
    let (input, output) = (n, n + 1);
    let mut tensors: Vec<TensorSpec> = sizes
        .iter()
        .enumerate()
        .map(|(i, &s)| TensorSpec::new(i as u32, TensorShape::hwc(1, 1, s), TensorRole::Intermediate))
        .collect();
    tensors.push(TensorSpec::new(input, TensorShape::hwc(1, 1, 1), TensorRole::GraphInput));
    tensors.push(TensorSpec::new(output, TensorShape::hwc(1, 1, 1), TensorRole::GraphOutput));
    let ops = (0..=n)
        .map(|i| {
            let src = if i == 0 { input } else { i - 1 };
            let dst = if i == n { output } else { i };
            OpNode::new(i, OpKind::Custom, &[src], &[dst])
        })
        .collect();
    GraphModel::with_element_bytes(tensors, ops, 1)
}

/// Parameters for [`generate_random_dag`]. Tensor sizes follow from the
/// spatial and channel ranges: every tensor is `1 × s × s × c` floats.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphGenerator {
    pub seed: u64,
    pub op_count: RangeInclusive<usize>,
    /// Probability that an op reads an older tensor instead of the latest.
    pub fan_out: f64,
    pub channels: RangeInclusive<usize>,
    /// Side length of the square feature maps.
    pub spatial: RangeInclusive<usize>,
    /// Probability that an op is an unsupported CUSTOM op. CUSTOM ops make
    /// the graph non-executable.
    pub custom_prob: f64,
    /// Attach weight values so the graph can be executed.
    pub with_weights: bool,
}

impl Default for GraphGenerator {
    fn default() -> Self {
        GraphGenerator {
            seed: 0,
            op_count: 1..=24,
            fan_out: 0.3,
            channels: 1..=8,
            spatial: 2..=6,
            custom_prob: 0.0,
            with_weights: true,
        }
    }
}

const MAX_CONCAT_CHANNELS: usize = 16;

struct Builder<'a> {
    gen: &'a GraphGenerator,
    rng: ChaCha8Rng,
    tensors: Vec<TensorSpec>,
    ops: Vec<OpNode>,
    /// Tensors a later op may read; all share the base spatial size.
    pool: Vec<TensorId>,
    by_shape: HashMap<TensorShape, Vec<TensorId>>,
    shapes: HashMap<TensorId, TensorShape>,
}

impl Builder<'_> {
    fn tensor(&mut self, shape: TensorShape, role: TensorRole) -> TensorId {
        let id = TensorId(self.tensors.len() as u32);
        let mut spec = TensorSpec::new(id.0, shape, role);
        if role == TensorRole::Weight && self.gen.with_weights {
            let data = (0..shape.element_count()).map(|_| self.rng.gen_range(-1.0f32..1.0)).collect();
            spec = spec.with_data(data);
        }
        self.tensors.push(spec);
        self.shapes.insert(id, shape);
        id
    }

    fn publish(&mut self, t: TensorId) {
        self.pool.push(t);
        self.by_shape.entry(self.shapes[&t]).or_default().push(t);
    }

    fn pick(&mut self) -> TensorId {
        if self.pool.len() > 1 && self.rng.gen_bool(self.gen.fan_out) {
            *self.pool.choose(&mut self.rng).expect("pool is non-empty")
        } else {
            *self.pool.last().expect("pool is non-empty")
        }
    }

    fn channels(&mut self) -> usize {
        self.rng.gen_range(self.gen.channels.clone())
    }

    fn op(&mut self, kind: OpKind, inputs: Vec<TensorId>, output: TensorId, attrs: OpAttrs) {
        let id = self.ops.len() as u32;
        self.ops.push(OpNode { id: crate::graph::OpId(id), kind, inputs, outputs: vec![output], attrs });
    }

    /// Same-size convolution: 1×1, or 3×3 with one pixel of padding.
    fn conv(&mut self, x: TensorId, depthwise: bool, padded_input: Option<Padding>) -> TensorId {
        let xs = self.shapes[&x];
        let k = if padded_input.is_some() || depthwise || self.rng.gen_bool(0.5) { 3 } else { 1 };
        let out_c = if depthwise { xs.c } else { self.channels() };
        let weight_shape =
            if depthwise { TensorShape::new(1, k, k, xs.c) } else { TensorShape::new(out_c, k, k, xs.c) };
        let weight = self.tensor(weight_shape, TensorRole::Weight);
        let mut inputs = vec![x, weight];
        if self.rng.gen_bool(0.3) {
            inputs.push(self.tensor(TensorShape::new(1, 1, 1, out_c), TensorRole::Weight));
        }
        let padding = match (padded_input, k) {
            (Some(_), _) | (None, 1) => None,
            (None, _) => Some(Padding::uniform(1)),
        };
        let out_h = if padded_input.is_some() { xs.h - 2 } else { xs.h };
        let out_w = if padded_input.is_some() { xs.w - 2 } else { xs.w };
        let out = self.tensor(TensorShape::new(1, out_h, out_w, out_c), TensorRole::Intermediate);
        let fused = if self.rng.gen_bool(0.2) { Some(Activation::Relu) } else { None };
        let kind = if depthwise { OpKind::DepthwiseConv } else { OpKind::Conv2d };
        self.op(kind, inputs, out, OpAttrs { padding, fused_activation: fused, ..Default::default() });
        out
    }

    fn unary(&mut self, kind: OpKind, x: TensorId, attrs: OpAttrs) -> TensorId {
        let out = self.tensor(self.shapes[&x], TensorRole::Intermediate);
        self.op(kind, vec![x], out, attrs);
        out
    }
}

/// Random, valid and (without CUSTOM ops) executable graph.
///
/// Ops are drawn from convolutions (1×1, or 3×3 padded), depthwise 3×3,
/// RELU, ADD of equal shapes or of a channel bias, CONCAT, PAD feeding an
/// unpadded 3×3 convolution, identities (RESIZE by 1, single-input
/// ADD/CONCAT) and optionally CUSTOM ops. Tensors nothing reads become graph
/// outputs. Identical generators produce identical graphs.
pub fn generate_random_dag(gen: &GraphGenerator) -> GraphModel {
    let mut rng = ChaCha8Rng::seed_from_u64(gen.seed);
    let target = rng.gen_range(gen.op_count.clone()).max(1);
    let side = rng.gen_range(gen.spatial.clone()).max(1);
    let mut b = Builder {
        gen,
        rng,
        tensors: Vec::new(),
        ops: Vec::new(),
        pool: Vec::new(),
        by_shape: HashMap::new(),
        shapes: HashMap::new(),
    };
    let in_c = b.channels();
    let input = b.tensor(TensorShape::new(1, side, side, in_c), TensorRole::GraphInput);
    b.publish(input);

    while b.ops.len() < target {
        let remaining = target - b.ops.len();
        let x = b.pick();
        let xs = b.shapes[&x];
        if gen.custom_prob > 0.0 && b.rng.gen_bool(gen.custom_prob) {
            let out = b.unary(OpKind::Custom, x, OpAttrs::default());
            b.publish(out);
            continue;
        }
        let out = match b.rng.gen_range(0..100) {
            0..=24 => b.conv(x, false, None),
            25..=34 => b.conv(x, true, None),
            35..=49 => b.unary(OpKind::Relu, x, OpAttrs::default()),
            50..=64 => {
                let partner = b.by_shape.get(&xs).and_then(|same| same.choose(&mut b.rng).copied());
                let other = match partner {
                    Some(p) if b.rng.gen_bool(0.7) => p,
                    _ => b.tensor(TensorShape::new(1, 1, 1, xs.c), TensorRole::Weight),
                };
                let inputs = if b.rng.gen_bool(0.5) { vec![x, other] } else { vec![other, x] };
                // A bias operand never comes first: the first full-size input defines the result.
                let inputs = if b.shapes[&inputs[0]] == xs { inputs } else { vec![inputs[1], inputs[0]] };
                let out = b.tensor(xs, TensorRole::Intermediate);
                b.op(OpKind::Add, inputs, out, OpAttrs::default());
                out
            }
            65..=72 => {
                let y = b.pick();
                let ys = b.shapes[&y];
                if xs.c + ys.c > MAX_CONCAT_CHANNELS {
                    b.unary(OpKind::Relu, x, OpAttrs::default())
                } else {
                    let out = b.tensor(TensorShape { c: xs.c + ys.c, ..xs }, TensorRole::Intermediate);
                    b.op(OpKind::Concat, vec![x, y], out, OpAttrs::default());
                    out
                }
            }
            73..=84 if remaining >= 2 => {
                let top = b.rng.gen_range(0..=2);
                let left = b.rng.gen_range(0..=2);
                let pad = Padding { top, bottom: 2 - top, left, right: 2 - left };
                let padded = b.tensor(TensorShape { h: xs.h + 2, w: xs.w + 2, ..xs }, TensorRole::Intermediate);
                b.op(OpKind::Pad, vec![x], padded, OpAttrs { padding: Some(pad), ..Default::default() });
                let depthwise = b.rng.gen_bool(0.3);
                b.conv(padded, depthwise, Some(pad))
            }
            85..=89 => b.unary(OpKind::Resize, x, OpAttrs { scale: Some(1), ..Default::default() }),
            90..=94 => b.unary(OpKind::Add, x, OpAttrs::default()),
            95..=99 => b.unary(OpKind::Concat, x, OpAttrs::default()),
            _ => b.unary(OpKind::Relu, x, OpAttrs::default()),
        };
        b.publish(out);
    }

    let consumed: HashSet<TensorId> = b.ops.iter().flat_map(|o| o.inputs.iter().copied()).collect();
    for t in &mut b.tensors {
        if t.role == TensorRole::Intermediate && !consumed.contains(&t.id) {
            t.role = TensorRole::GraphOutput;
        }
    }
    GraphModel::new(b.tensors, b.ops)
}

/// Depthwise-separable stack shaped like MobileNet V1: a stride-2 3×3
/// convolution to 32 channels, thirteen depthwise 3×3 + pointwise 1×1
/// blocks widening to 1024 channels, and a final 1×1 classifier
/// convolution. Input 224×224×3; weights carry shapes only.
pub fn mobilenet_like() -> GraphModel {
    const BLOCKS: [(usize, usize); 13] = [
        (1, 64),
        (2, 128),
        (1, 128),
        (2, 256),
        (1, 256),
        (2, 512),
        (1, 512),
        (1, 512),
        (1, 512),
        (1, 512),
        (1, 512),
        (2, 1024),
        (1, 1024),
    ];
    // "Same" padding: stride 1 pads one pixel each side, stride 2 on an even
    // input pads only bottom/right.
    let same = |stride: usize| {
        if stride == 1 {
            Padding::uniform(1)
        } else {
            Padding { top: 0, bottom: 1, left: 0, right: 1 }
        }
    };

    let mut tensors = vec![TensorSpec::new(0, TensorShape::hwc(224, 224, 3), TensorRole::GraphInput)];
    let mut ops = Vec::new();
    let mut next_id = 1u32;
    let mut add = |tensors: &mut Vec<TensorSpec>, shape, role| {
        let id = next_id;
        next_id += 1;
        tensors.push(TensorSpec::new(id, shape, role));
        id
    };
    let relu = OpAttrs { fused_activation: Some(Activation::Relu), ..Default::default() };

    let mut x = 0u32;
    let mut shape = TensorShape::hwc(224, 224, 3);
    let mut layer = |tensors: &mut Vec<TensorSpec>,
                     ops: &mut Vec<OpNode>,
                     x: u32,
                     shape: TensorShape,
                     kind: OpKind,
                     k: usize,
                     stride: usize,
                     out_c: usize,
                     role: TensorRole| {
        let weight_shape = match kind {
            OpKind::DepthwiseConv => TensorShape::new(1, k, k, shape.c),
            _ => TensorShape::new(out_c, k, k, shape.c),
        };
        let w = add(tensors, weight_shape, TensorRole::Weight);
        let bias = add(tensors, TensorShape::new(1, 1, 1, out_c), TensorRole::Weight);
        let padding = if k == 1 { Padding::default() } else { same(stride) };
        let out_h = (shape.h + padding.top + padding.bottom - k) / stride + 1;
        let out_w = (shape.w + padding.left + padding.right - k) / stride + 1;
        let out_shape = TensorShape::hwc(out_h, out_w, out_c);
        let out = add(tensors, out_shape, role);
        let attrs = OpAttrs {
            stride: Some([stride, stride]),
            padding: (!padding.is_zero()).then_some(padding),
            ..relu.clone()
        };
        ops.push(OpNode::new(ops.len() as u32, kind, &[x, w, bias], &[out]).with_attrs(attrs));
        (out, out_shape)
    };

    (x, shape) = layer(&mut tensors, &mut ops, x, shape, OpKind::Conv2d, 3, 2, 32, TensorRole::Intermediate);
    for (stride, out_c) in BLOCKS {
        (x, shape) = layer(
            &mut tensors,
            &mut ops,
            x,
            shape,
            OpKind::DepthwiseConv,
            3,
            stride,
            shape.c,
            TensorRole::Intermediate,
        );
        (x, shape) = layer(&mut tensors, &mut ops, x, shape, OpKind::Conv2d, 1, 1, out_c, TensorRole::Intermediate);
    }
    let _ = layer(&mut tensors, &mut ops, x, shape, OpKind::Conv2d, 1, 1, 1000, TensorRole::GraphOutput);
    GraphModel::new(tensors, ops)
}

/// Published intermediate-tensor footprints for MobileNet in megabytes, kept
/// for context. The bundled model only approximates that network.
pub const PUBLISHED_MOBILENET_MB: PublishedFootprint = PublishedFootprint { naive: 9.6, greedy: 2.3, mincostflow: 2.7 };

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PublishedFootprint {
    pub naive: f64,
    pub greedy: f64,
    pub mincostflow: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Winner {
    Greedy,
    #[serde(rename = "mincostflow")]
    MinCostFlow,
    Tie,
}

/// Totals in bytes per strategy, with the peak-live lower bound.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StrategyComparison {
    pub naive: usize,
    pub greedy: usize,
    pub mcfp: usize,
    pub lower_bound: usize,
    pub winner: Winner,
}

pub fn compare_strategies(g: &GraphModel) -> Result<StrategyComparison, PlanError> {
    let naive = plan_naive(g).total_bytes;
    let greedy = plan_greedy(g).total_bytes;
    let mcfp = plan_mincostflow(g)?.total_bytes;
    let winner = match greedy.cmp(&mcfp) {
        std::cmp::Ordering::Less => Winner::Greedy,
        std::cmp::Ordering::Greater => Winner::MinCostFlow,
        std::cmp::Ordering::Equal => Winner::Tie,
    };
    Ok(StrategyComparison { naive, greedy, mcfp, lower_bound: peak_live_bytes(g), winner })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub graph_id: String,
    #[serde(flatten)]
    pub totals: StrategyComparison,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Suite {
    Random,
    Mobilenet,
}

impl std::str::FromStr for Suite {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "random" => Ok(Suite::Random),
            "mobilenet" => Ok(Suite::Mobilenet),
            _ => Err(format!("unknown suite {s:?} (expected random or mobilenet)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub suite: Suite,
    pub rows: Vec<BenchRow>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub published_mb: Option<PublishedFootprint>,
}

/// Random suite: one default-generator graph per seed. The MobileNet suite
/// ignores the seeds.
pub fn run_suite(suite: Suite, seeds: Range<u64>) -> Result<BenchReport, PlanError> {
    let rows = match suite {
        Suite::Random => seeds
            .map(|seed| {
                let g = generate_random_dag(&GraphGenerator { seed, with_weights: false, ..GraphGenerator::default() });
                Ok(BenchRow { graph_id: format!("random-{seed}"), totals: compare_strategies(&g)? })
            })
            .collect::<Result<_, PlanError>>()?,
        Suite::Mobilenet => {
            vec![BenchRow { graph_id: "mobilenet_like".into(), totals: compare_strategies(&mobilenet_like())? }]
        }
    };
    let published_mb = (suite == Suite::Mobilenet).then_some(PUBLISHED_MOBILENET_MB);
    Ok(BenchReport { suite, rows, published_mb })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{liveness, validate_graph};

    #[test]
    fn single_op_graph() {
        let g = generate_random_dag(&GraphGenerator { seed: 1, op_count: 1..=1, ..Default::default() });
        assert_eq!(g.ops().len(), 1);
        assert_eq!(validate_graph(&g), vec![]);
    }

    #[test]
    fn seed_42_with_30_ops_is_valid() {
        let g = generate_random_dag(&GraphGenerator { seed: 42, op_count: 30..=30, ..Default::default() });
        assert_eq!(g.ops().len(), 30);
        assert_eq!(validate_graph(&g), vec![]);
    }

    #[test]
    fn generation_is_deterministic() {
        let gen = GraphGenerator { seed: 9, custom_prob: 0.2, ..Default::default() };
        assert_eq!(generate_random_dag(&gen).to_json(), generate_random_dag(&gen).to_json());
    }

    #[test]
    fn many_seeds_validate() {
        for seed in 0..300 {
            let gen = GraphGenerator { seed, custom_prob: if seed % 3 == 0 { 0.2 } else { 0.0 }, ..Default::default() };
            let g = generate_random_dag(&gen);
            assert_eq!(validate_graph(&g), vec![], "seed {seed}");
            assert!(liveness(&g).len() <= 30);
        }
    }

    #[test]
    fn large_graphs_generate_quickly() {
        let g = generate_random_dag(&GraphGenerator {
            seed: 3,
            op_count: 16384..=16384,
            with_weights: false,
            ..Default::default()
        });
        assert_eq!(g.ops().len(), 16384);
    }

    #[test]
    fn chain_fixture_shape() {
        let g = sized_chain(&[10, 20, 15]);
        assert_eq!(g.ops().len(), 4);
        assert_eq!(liveness(&g).len(), 3);
        assert_eq!(validate_graph(&g), vec![]);
    }

    #[test]
    fn mobilenet_like_profile() {
        let g = mobilenet_like();
        assert_eq!(validate_graph(&g), vec![]);
        assert!(g.intermediates().count() >= 27);
        let input = g.inputs().next().unwrap();
        assert_eq!(input.shape, TensorShape::hwc(224, 224, 3));
        let last = g.outputs().next().unwrap();
        assert_eq!(last.shape, TensorShape::hwc(7, 7, 1000));
    }

    #[test]
    fn chain_comparison() {
        let c = compare_strategies(&sized_chain(&[10, 20, 15])).unwrap();
        assert_eq!((c.naive, c.greedy, c.mcfp, c.lower_bound), (45, 35, 35, 35));
        assert_eq!(c.winner, Winner::Tie);
    }

    #[test]
    fn empty_graph_compares_to_zero() {
        let c = compare_strategies(&sized_chain(&[])).unwrap();
        assert_eq!((c.naive, c.greedy, c.mcfp, c.lower_bound), (0, 0, 0, 0));
    }

    #[test]
    fn bench_row_schema() {
        let r = run_suite(Suite::Random, 0..1).unwrap();
        let v = serde_json::to_value(&r.rows[0]).unwrap();
        let mut keys: Vec<_> = v.as_object().unwrap().keys().cloned().collect();
        keys.sort();
        assert_eq!(keys, ["graph_id", "greedy", "lower_bound", "mcfp", "naive", "winner"]);
    }
}
