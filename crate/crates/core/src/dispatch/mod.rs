//! Dispatch grids, GPU thread ordering, cache simulation and work-group
//! selection.

mod cache;
mod grid;
mod tune;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::TensorShape;

pub use cache::{first_load_trace, simulate_cache, CacheModel, CacheReport, LruCache, MemoryAccess, TensorLayout};
pub use grid::{compute_grid, thread_order, DispatchGrid, ThreadCoord, ThreadSlot, WorkGroupConfig, LATTICE_VALUES};
pub use tune::{
    preset_work_group, select_work_group, select_work_group_with, AdrenoModel, CsvCost, SearchMode, SyntheticBowl,
    TuneError, TuneOutcome,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DispatchError {
    #[error("work group ({x},{y},{z}) must have positive dimensions")]
    InvalidWorkGroup { x: usize, y: usize, z: usize },
    #[error("invalid cache model: {0}")]
    InvalidCacheModel(String),
    #[error("unknown GPU model {0:?}; no preset exists, use select_work_group to tune one")]
    UnknownModel(String),
    #[error("cost table: {0}")]
    CostTable(String),
    #[error("cost table has no sample for work group ({x},{y},{z})")]
    MissingSample { x: usize, y: usize, z: usize },
}

/// Convolution flavor a work group is tuned for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConvKind {
    Conv2d,
    DepthwiseConv,
}

impl std::str::FromStr for ConvKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "conv_2d" | "conv2d" => Ok(ConvKind::Conv2d),
            "depthwise_conv" | "depthwise" => Ok(ConvKind::DepthwiseConv),
            _ => Err(format!("unknown convolution kind {s:?} (expected conv_2d or depthwise_conv)")),
        }
    }
}

/// One point of the convolution search space. The tuner expects kernels and
/// strides of 1..=3 and shapes between 8 and 128 per dimension; the cache
/// simulator accepts any positive shape.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ConvConfig {
    pub op_kind: ConvKind,
    pub kernel: (usize, usize),
    pub stride: (usize, usize),
    pub in_shape: TensorShape,
    pub out_shape: TensorShape,
}

impl ConvConfig {
    /// Unit-stride 1×1 convolution keeping the spatial size.
    pub fn pointwise(h: usize, w: usize, in_c: usize, out_c: usize) -> Self {
        ConvConfig {
            op_kind: ConvKind::Conv2d,
            kernel: (1, 1),
            stride: (1, 1),
            in_shape: TensorShape::hwc(h, w, in_c),
            out_shape: TensorShape::hwc(h, w, out_c),
        }
    }

    /// Whether every field lies inside the tuning search space.
    pub fn in_search_space(&self) -> bool {
        let small = |v: usize| (1..=3).contains(&v);
        let dims = |s: TensorShape| [s.h, s.w, s.c].iter().all(|d| (8..=128).contains(d));
        small(self.kernel.0)
            && small(self.kernel.1)
            && small(self.stride.0)
            && small(self.stride.1)
            && dims(self.in_shape)
            && dims(self.out_shape)
    }
}
