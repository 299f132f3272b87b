//! Planning and simulation toolkit for GPU-style neural-network inference.
//!
//! * [`graph`]: tensor/operator graph, validation, ordering and liveness.
//! * [`passes`]: identity removal, pad merging, element-wise fusion and
//!   delegate partitioning.
//! * [`layout`]: PHWC4 packing and index arithmetic.
//! * [`memplan`]: naive, greedy and min-cost-flow intermediate-tensor
//!   planners, a plan verifier and an exhaustive optimum for small graphs.
//! * [`dispatch`]: dispatch grids, thread ordering, cache simulation and
//!   work-group selection.
//! * [`executor`]: deterministic reference execution over PHWC4 buffers.
//! * [`bench`]: random graph generation, a MobileNet-like model and
//!   strategy comparisons.
//! * [`cli`]: the `inferplan` command-line front end.

pub mod bench;
pub mod cli;
pub mod dispatch;
pub mod executor;
pub mod graph;
pub mod layout;
pub mod memplan;
pub mod passes;

pub use graph::{GraphModel, OpId, OpKind, OpNode, TensorId, TensorRole, TensorShape, TensorSpec};
pub use layout::{DenseTensor, Phwc4Buffer};
pub use memplan::{MemoryPlan, SharedObject, Strategy};
