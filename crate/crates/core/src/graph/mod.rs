//! Tensor/operator graph: the interchange format, validation, topological
//! ordering and intermediate-tensor liveness.
//!
//! Tensors are `[B, H, W, C]` shaped. A batch larger than one is handled as
//! a concatenation of `[H, W, C]` tensors, so sizing simply multiplies by `B`.

mod analysis;
mod validate;

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use analysis::{liveness, liveness_map, peak_live_bytes, topo_sort, LivenessInterval};
pub use validate::{infer_output_shape, validate_graph, Violation};

/// Bytes per element used for sizing unless a graph overrides it.
pub const DEFAULT_ELEMENT_BYTES: usize = 4;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GraphError {
    #[error("graph contains a cycle through op {0}")]
    Cycle(OpId),
    #[error("invalid graph: {}", .0.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(", "))]
    Invalid(Vec<Violation>),
    #[error("malformed graph document: {0}")]
    Parse(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TensorId(pub u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct OpId(pub u32);

impl fmt::Display for TensorId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl fmt::Display for OpId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Logical `[B, H, W, C]` tensor shape. Serialized as a 4-element array.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(from = "[usize; 4]", into = "[usize; 4]")]
pub struct TensorShape {
    pub b: usize,
    pub h: usize,
    pub w: usize,
    pub c: usize,
}

impl TensorShape {
    pub const fn new(b: usize, h: usize, w: usize, c: usize) -> Self {
        Self { b, h, w, c }
    }

    /// Single-batch shape.
    pub const fn hwc(h: usize, w: usize, c: usize) -> Self {
        Self { b: 1, h, w, c }
    }

    pub fn element_count(&self) -> usize {
        self.b * self.h * self.w * self.c
    }

    pub fn is_valid(&self) -> bool {
        self.b >= 1 && self.h >= 1 && self.w >= 1 && self.c >= 1
    }

    /// Number of 4-channel slices, `ceil(C / 4)`.
    pub fn slices(&self) -> usize {
        self.c.div_ceil(4)
    }
}

impl From<[usize; 4]> for TensorShape {
    fn from([b, h, w, c]: [usize; 4]) -> Self {
        Self { b, h, w, c }
    }
}

impl From<TensorShape> for [usize; 4] {
    fn from(s: TensorShape) -> Self {
        [s.b, s.h, s.w, s.c]
    }
}

impl fmt::Display for TensorShape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{},{},{},{}]", self.b, self.h, self.w, self.c)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TensorRole {
    GraphInput,
    GraphOutput,
    Intermediate,
    Weight,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorSpec {
    pub id: TensorId,
    pub shape: TensorShape,
    pub role: TensorRole,
    /// Dense row-major values, only meaningful for weight tensors.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub data: Option<Vec<f32>>,
}

impl TensorSpec {
    pub fn new(id: u32, shape: TensorShape, role: TensorRole) -> Self {
        Self { id: TensorId(id), shape, role, data: None }
    }

    pub fn with_data(mut self, data: Vec<f32>) -> Self {
        self.data = Some(data);
        self
    }

    pub fn size_bytes(&self, element_bytes: usize) -> usize {
        self.shape.element_count() * element_bytes
    }

    pub fn is_intermediate(&self) -> bool {
        self.role == TensorRole::Intermediate
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum OpKind {
    Conv2d,
    DepthwiseConv,
    Add,
    Concat,
    Relu,
    Pad,
    Resize,
    Reshape,
    Custom,
}

impl OpKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            OpKind::Conv2d => "CONV_2D",
            OpKind::DepthwiseConv => "DEPTHWISE_CONV",
            OpKind::Add => "ADD",
            OpKind::Concat => "CONCAT",
            OpKind::Relu => "RELU",
            OpKind::Pad => "PAD",
            OpKind::Resize => "RESIZE",
            OpKind::Reshape => "RESHAPE",
            OpKind::Custom => "CUSTOM",
        }
    }

    /// Parses a kind name; `None` for names outside the built-in set.
    pub fn parse_builtin(name: &str) -> Option<Self> {
        Some(match name {
            "CONV_2D" => OpKind::Conv2d,
            "DEPTHWISE_CONV" => OpKind::DepthwiseConv,
            "ADD" => OpKind::Add,
            "CONCAT" => OpKind::Concat,
            "RELU" => OpKind::Relu,
            "PAD" => OpKind::Pad,
            "RESIZE" => OpKind::Resize,
            "RESHAPE" => OpKind::Reshape,
            "CUSTOM" => OpKind::Custom,
            _ => return None,
        })
    }

    pub fn is_conv(&self) -> bool {
        matches!(self, OpKind::Conv2d | OpKind::DepthwiseConv)
    }
}

impl fmt::Display for OpKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.as_str())
    }
}

impl Serialize for OpKind {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Activation {
    #[serde(rename = "RELU")]
    Relu,
}

/// Explicit spatial zero padding, serialized as `[top, bottom, left, right]`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(from = "[usize; 4]", into = "[usize; 4]")]
pub struct Padding {
    pub top: usize,
    pub bottom: usize,
    pub left: usize,
    pub right: usize,
}

impl Padding {
    pub const fn uniform(p: usize) -> Self {
        Self { top: p, bottom: p, left: p, right: p }
    }

    pub fn is_zero(&self) -> bool {
        *self == Padding::default()
    }
}

impl std::ops::Add for Padding {
    type Output = Padding;

    fn add(self, o: Padding) -> Padding {
        Padding {
            top: self.top + o.top,
            bottom: self.bottom + o.bottom,
            left: self.left + o.left,
            right: self.right + o.right,
        }
    }
}

impl From<[usize; 4]> for Padding {
    fn from([top, bottom, left, right]: [usize; 4]) -> Self {
        Self { top, bottom, left, right }
    }
}

impl From<Padding> for [usize; 4] {
    fn from(p: Padding) -> Self {
        [p.top, p.bottom, p.left, p.right]
    }
}

/// Kind-specific operator attributes. Every field is optional in JSON.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct OpAttrs {
    /// `[kh, kw]`; when present it must agree with the weight tensor.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kernel: Option<[usize; 2]>,
    /// `[sh, sw]`, defaults to `[1, 1]`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stride: Option<[usize; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub padding: Option<Padding>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fused_activation: Option<Activation>,
    /// Integer nearest-neighbor scale for RESIZE, defaults to 1.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scale: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub supported: Option<bool>,
}

impl OpAttrs {
    pub fn stride(&self) -> (usize, usize) {
        let [sh, sw] = self.stride.unwrap_or([1, 1]);
        (sh, sw)
    }

    pub fn padding(&self) -> Padding {
        self.padding.unwrap_or_default()
    }

    pub fn scale(&self) -> usize {
        self.scale.unwrap_or(1)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "RawOp")]
pub struct OpNode {
    pub id: OpId,
    pub kind: OpKind,
    pub inputs: Vec<TensorId>,
    pub outputs: Vec<TensorId>,
    #[serde(default, skip_serializing_if = "is_default_attrs")]
    pub attrs: OpAttrs,
}

fn is_default_attrs(a: &OpAttrs) -> bool {
    *a == OpAttrs::default()
}

#[derive(Deserialize)]
struct RawOp {
    id: OpId,
    kind: String,
    #[serde(default)]
    inputs: Vec<TensorId>,
    #[serde(default)]
    outputs: Vec<TensorId>,
    #[serde(default)]
    attrs: OpAttrs,
}

impl From<RawOp> for OpNode {
    fn from(raw: RawOp) -> Self {
        let mut attrs = raw.attrs;
        let kind = match OpKind::parse_builtin(&raw.kind) {
            Some(kind) => kind,
            None => {
                attrs.supported = Some(false);
                OpKind::Custom
            }
        };
        OpNode { id: raw.id, kind, inputs: raw.inputs, outputs: raw.outputs, attrs }
    }
}

impl OpNode {
    pub fn new(id: u32, kind: OpKind, inputs: &[u32], outputs: &[u32]) -> Self {
        OpNode {
            id: OpId(id),
            kind,
            inputs: inputs.iter().copied().map(TensorId).collect(),
            outputs: outputs.iter().copied().map(TensorId).collect(),
            attrs: OpAttrs::default(),
        }
    }

    pub fn with_attrs(mut self, attrs: OpAttrs) -> Self {
        self.attrs = attrs;
        self
    }

    /// Whether the GPU delegate can run this op. CUSTOM ops are unsupported
    /// unless they say otherwise; built-ins are supported unless flagged off.
    pub fn is_supported(&self) -> bool {
        self.attrs.supported.unwrap_or(self.kind != OpKind::Custom)
    }
}

/// Operator graph with a deterministic execution order.
///
/// The graph is an immutable value: passes build new graphs instead of
/// mutating existing ones. Construction never fails, so malformed graphs can
/// still be inspected with [`validate_graph`].
#[derive(Debug, Clone)]
pub struct GraphModel {
    tensors: Vec<TensorSpec>,
    ops: Vec<OpNode>,
    execution_order: Vec<OpId>,
    element_bytes: usize,
    tensor_index: HashMap<TensorId, usize>,
    op_index: HashMap<OpId, usize>,
    producer: HashMap<TensorId, OpId>,
    consumers: HashMap<TensorId, Vec<OpId>>,
}

impl PartialEq for GraphModel {
    fn eq(&self, other: &Self) -> bool {
        self.tensors == other.tensors && self.ops == other.ops && self.element_bytes == other.element_bytes
    }
}

#[derive(Serialize, Deserialize)]
struct GraphDoc {
    tensors: Vec<TensorSpec>,
    ops: Vec<OpNode>,
    #[serde(default = "default_element_bytes", skip_serializing_if = "is_default_element_bytes")]
    element_bytes: usize,
}

fn default_element_bytes() -> usize {
    DEFAULT_ELEMENT_BYTES
}

fn is_default_element_bytes(v: &usize) -> bool {
    *v == DEFAULT_ELEMENT_BYTES
}

impl Serialize for GraphModel {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        GraphDoc { tensors: self.tensors.clone(), ops: self.ops.clone(), element_bytes: self.element_bytes }
            .serialize(s)
    }
}

impl<'de> Deserialize<'de> for GraphModel {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let doc = GraphDoc::deserialize(d)?;
        Ok(GraphModel::with_element_bytes(doc.tensors, doc.ops, doc.element_bytes))
    }
}

impl GraphModel {
    pub fn new(tensors: Vec<TensorSpec>, ops: Vec<OpNode>) -> Self {
        Self::with_element_bytes(tensors, ops, DEFAULT_ELEMENT_BYTES)
    }

    pub fn with_element_bytes(tensors: Vec<TensorSpec>, ops: Vec<OpNode>, element_bytes: usize) -> Self {
        let mut tensor_index = HashMap::with_capacity(tensors.len());
        for (i, t) in tensors.iter().enumerate() {
            tensor_index.entry(t.id).or_insert(i);
        }
        let mut op_index = HashMap::with_capacity(ops.len());
        let mut producer = HashMap::new();
        let mut consumers: HashMap<TensorId, Vec<OpId>> = HashMap::new();
        for (i, op) in ops.iter().enumerate() {
            op_index.entry(op.id).or_insert(i);
            for &t in &op.outputs {
                producer.entry(t).or_insert(op.id);
            }
            for &t in &op.inputs {
                let list = consumers.entry(t).or_default();
                if !list.contains(&op.id) {
                    list.push(op.id);
                }
            }
        }
        let mut g = GraphModel {
            tensors,
            ops,
            execution_order: Vec::new(),
            element_bytes,
            tensor_index,
            op_index,
            producer,
            consumers,
        };
        // A cyclic graph keeps declaration order; validation reports the cycle.
        g.execution_order = topo_sort(&g).unwrap_or_else(|_| g.ops.iter().map(|o| o.id).collect());
        g
    }

    pub fn from_json(text: &str) -> Result<Self, GraphError> {
        serde_json::from_str(text).map_err(|e| GraphError::Parse(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("graph serialization is infallible")
    }

    pub fn tensors(&self) -> &[TensorSpec] {
        &self.tensors
    }

    pub fn ops(&self) -> &[OpNode] {
        &self.ops
    }

    pub fn element_bytes(&self) -> usize {
        self.element_bytes
    }

    pub fn execution_order(&self) -> &[OpId] {
        &self.execution_order
    }

    pub fn tensor(&self, id: TensorId) -> Option<&TensorSpec> {
        self.tensor_index.get(&id).map(|&i| &self.tensors[i])
    }

    pub fn op(&self, id: OpId) -> Option<&OpNode> {
        self.op_index.get(&id).map(|&i| &self.ops[i])
    }

    /// Ops in execution order.
    pub fn ordered_ops(&self) -> impl Iterator<Item = &OpNode> + '_ {
        self.execution_order.iter().filter_map(move |&id| self.op(id))
    }

    pub fn producer(&self, t: TensorId) -> Option<OpId> {
        self.producer.get(&t).copied()
    }

    /// Distinct consumer ops of `t`, in declaration order.
    pub fn consumers(&self, t: TensorId) -> &[OpId] {
        self.consumers.get(&t).map(Vec::as_slice).unwrap_or(&[])
    }

    /// Byte size of a tensor, 0 for unknown ids.
    pub fn tensor_size(&self, t: TensorId) -> usize {
        self.tensor(t).map(|s| s.size_bytes(self.element_bytes)).unwrap_or(0)
    }

    pub fn is_intermediate(&self, t: TensorId) -> bool {
        self.tensor(t).is_some_and(TensorSpec::is_intermediate)
    }

    pub fn intermediates(&self) -> impl Iterator<Item = &TensorSpec> + '_ {
        self.tensors.iter().filter(|t| t.is_intermediate())
    }

    pub fn inputs(&self) -> impl Iterator<Item = &TensorSpec> + '_ {
        self.tensors.iter().filter(|t| t.role == TensorRole::GraphInput)
    }

    pub fn outputs(&self) -> impl Iterator<Item = &TensorSpec> + '_ {
        self.tensors.iter().filter(|t| t.role == TensorRole::GraphOutput)
    }

    /// Splits the graph back into its parts.
    pub fn into_parts(self) -> (Vec<TensorSpec>, Vec<OpNode>) {
        (self.tensors, self.ops)
    }
}
