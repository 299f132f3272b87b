use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::graph::TensorShape;
use crate::layout::phwc4_index;

use super::{ConvConfig, DispatchError, ThreadSlot};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CacheModel {
    pub line_bytes: usize,
    /// `None` models an unbounded cache.
    pub capacity_lines: Option<usize>,
    pub load_bytes: usize,
}

impl Default for CacheModel {
    fn default() -> Self {
        CacheModel { line_bytes: 64, capacity_lines: None, load_bytes: 16 }
    }
}

impl CacheModel {
    pub fn validate(&self) -> Result<(), DispatchError> {
        let bad = |m: &str| Err(DispatchError::InvalidCacheModel(m.into()));
        if self.line_bytes == 0 || self.load_bytes == 0 {
            return bad("line and load sizes must be positive");
        }
        if !self.line_bytes.is_multiple_of(self.load_bytes) {
            return bad("line_bytes must be a multiple of load_bytes");
        }
        if self.capacity_lines == Some(0) {
            return bad("capacity must be at least one line");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CacheReport {
    pub hits: u64,
    pub misses: u64,
    pub bytes_fetched: u64,
    pub miss_rate: f64,
}

/// A byte range read by one thread.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MemoryAccess {
    pub address: usize,
    pub bytes: usize,
}

/// LRU cache over line addresses. Every line an access touches is one lookup.
#[derive(Debug, Clone)]
pub struct LruCache {
    model: CacheModel,
    stamp: u64,
    resident: HashMap<usize, u64>,
    by_age: BTreeMap<u64, usize>,
    hits: u64,
    misses: u64,
}

impl LruCache {
    pub fn new(model: CacheModel) -> Result<Self, DispatchError> {
        model.validate()?;
        Ok(LruCache { model, stamp: 0, resident: HashMap::new(), by_age: BTreeMap::new(), hits: 0, misses: 0 })
    }

    pub fn access(&mut self, a: MemoryAccess) {
        if a.bytes == 0 {
            return;
        }
        let first = a.address / self.model.line_bytes;
        let last = (a.address + a.bytes - 1) / self.model.line_bytes;
        for line in first..=last {
            self.touch(line);
        }
    }

    fn touch(&mut self, line: usize) {
        self.stamp += 1;
        if let Some(old) = self.resident.insert(line, self.stamp) {
            self.by_age.remove(&old);
            self.hits += 1;
        } else {
            self.misses += 1;
            if let Some(cap) = self.model.capacity_lines {
                if self.resident.len() > cap {
                    let (_, victim) = self.by_age.pop_first().expect("cache is over capacity");
                    self.resident.remove(&victim);
                }
            }
        }
        self.by_age.insert(self.stamp, line);
    }

    /// Replays a trace without clearing prior state.
    pub fn replay(&mut self, trace: impl IntoIterator<Item = MemoryAccess>) {
        for a in trace {
            self.access(a);
        }
    }

    /// Counts since creation or the last [`LruCache::reset_counters`].
    pub fn report(&self) -> CacheReport {
        let total = self.hits + self.misses;
        CacheReport {
            hits: self.hits,
            misses: self.misses,
            bytes_fetched: self.misses * self.model.line_bytes as u64,
            miss_rate: if total == 0 { 0.0 } else { self.misses as f64 / total as f64 },
        }
    }

    /// Keeps cache contents, zeroes the counters.
    pub fn reset_counters(&mut self) {
        self.hits = 0;
        self.misses = 0;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TensorLayout {
    Phwc4,
    Hwc,
}

impl std::str::FromStr for TensorLayout {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "phwc4" => Ok(TensorLayout::Phwc4),
            "hwc" => Ok(TensorLayout::Hwc),
            _ => Err(format!("unknown layout {s:?} (expected phwc4 or hwc)")),
        }
    }
}

/// Byte address of the first channel-slice read for input pixel `(h, w)`.
fn slice_address(layout: TensorLayout, shape: TensorShape, h: usize, w: usize, elem: usize) -> usize {
    match layout {
        TensorLayout::Phwc4 => phwc4_index(shape, h, w, 0).expect("pixel in range") * elem,
        TensorLayout::Hwc => (h * shape.w + w) * shape.c * elem,
    }
}

/// First-iteration loads of a convolution shader: each useful thread in the
/// first output-channel layer reads one `load_bytes` block holding input
/// channels 0..3 of its receptive-field origin. Stub threads issue nothing.
pub fn first_load_trace<'a>(
    layout: TensorLayout,
    conv: &'a ConvConfig,
    model: &'a CacheModel,
    order: impl IntoIterator<Item = ThreadSlot> + 'a,
) -> impl Iterator<Item = MemoryAccess> + 'a {
    let out = conv.out_shape;
    let input = conv.in_shape;
    let (sh, sw) = conv.stride;
    order.into_iter().filter_map(move |slot| {
        let t = slot.coord;
        if t.c != 0 || t.w >= out.w || t.h >= out.h * out.b {
            return None;
        }
        let (ih, iw) = ((t.h % out.h) * sh, t.w * sw);
        if ih >= input.h || iw >= input.w {
            return None;
        }
        let batch = t.h / out.h;
        let per_batch = match layout {
            TensorLayout::Phwc4 => crate::layout::phwc4_len(TensorShape { b: 1, ..input }),
            TensorLayout::Hwc => input.h * input.w * input.c,
        };
        let address = batch * per_batch * 4 + slice_address(layout, input, ih, iw, 4);
        Some(MemoryAccess { address, bytes: model.load_bytes })
    })
}

/// Replays the first-load trace of `conv` in `order` against a cold LRU cache.
pub fn simulate_cache(
    layout: TensorLayout,
    conv: &ConvConfig,
    model: &CacheModel,
    order: impl IntoIterator<Item = ThreadSlot>,
) -> Result<CacheReport, DispatchError> {
    let mut cache = LruCache::new(*model)?;
    let trace: Vec<MemoryAccess> = first_load_trace(layout, conv, model, order).collect();
    cache.replay(trace);
    Ok(cache.report())
}
