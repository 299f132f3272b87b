use serde::{Deserialize, Serialize};

use crate::graph::TensorShape;

use super::DispatchError;

/// Per-axis work-group sizes the tuner searches over.
pub const LATTICE_VALUES: [usize; 3] = [2, 4, 8];

/// Work-group shape `(x, y, z)`. Tuning only visits the `{2,4,8}³`
/// lattice, but grids accept any positive shape.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct WorkGroupConfig {
    pub x: usize,
    pub y: usize,
    pub z: usize,
}

impl WorkGroupConfig {
    pub fn new(x: usize, y: usize, z: usize) -> Result<Self, DispatchError> {
        if x == 0 || y == 0 || z == 0 {
            return Err(DispatchError::InvalidWorkGroup { x, y, z });
        }
        Ok(Self { x, y, z })
    }

    /// All 27 lattice points in lexicographic order.
    pub fn lattice() -> Vec<WorkGroupConfig> {
        let mut out = Vec::with_capacity(27);
        for x in LATTICE_VALUES {
            for y in LATTICE_VALUES {
                for z in LATTICE_VALUES {
                    out.push(WorkGroupConfig { x, y, z });
                }
            }
        }
        out
    }

    pub fn is_lattice_point(&self) -> bool {
        [self.x, self.y, self.z].iter().all(|v| LATTICE_VALUES.contains(v))
    }

    pub fn threads(&self) -> usize {
        self.x * self.y * self.z
    }

    pub fn as_tuple(&self) -> (usize, usize, usize) {
        (self.x, self.y, self.z)
    }
}

/// Global dispatch grid `(X, Y, Z)` covering an output tensor of
/// `W × H × C`, each axis a multiple of the work group.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DispatchGrid {
    pub x: usize,
    pub y: usize,
    pub z: usize,
    pub wg: WorkGroupConfig,
    /// Useful extent `(W, H, C)`.
    pub extent: (usize, usize, usize),
}

fn align_up(v: usize, m: usize) -> usize {
    v.div_ceil(m) * m
}

/// `X = align(W, x)`, `Y = align(H, y)`, `Z = align(C, z)` with one grid
/// cell per output element. Batches stack along `H`.
pub fn compute_grid(out_shape: TensorShape, wg: WorkGroupConfig) -> DispatchGrid {
    let (w, h, c) = (out_shape.w, out_shape.h * out_shape.b, out_shape.c);
    DispatchGrid { x: align_up(w, wg.x), y: align_up(h, wg.y), z: align_up(c, wg.z), wg, extent: (w, h, c) }
}

impl DispatchGrid {
    pub fn total_threads(&self) -> usize {
        self.x * self.y * self.z
    }

    pub fn useful_threads(&self) -> usize {
        self.extent.0 * self.extent.1 * self.extent.2
    }

    /// Threads outside the output that exit immediately.
    pub fn stub_threads(&self) -> usize {
        self.total_threads() - self.useful_threads()
    }

    pub fn is_useful(&self, t: ThreadCoord) -> bool {
        t.w < self.extent.0 && t.h < self.extent.1 && t.c < self.extent.2
    }

    pub fn groups(&self) -> (usize, usize, usize) {
        (self.x / self.wg.x, self.y / self.wg.y, self.z / self.wg.z)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ThreadCoord {
    pub w: usize,
    pub h: usize,
    pub c: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ThreadSlot {
    pub coord: ThreadCoord,
    /// Linear work-group index in dispatch order.
    pub group: usize,
}

/// Every grid thread in execution order: work groups walk W, then H, then
/// C, and threads inside a group follow the same W → H → C order.
pub fn thread_order(grid: &DispatchGrid) -> impl Iterator<Item = ThreadSlot> + '_ {
    let (gx, gy, gz) = grid.groups();
    let wg = grid.wg;
    (0..gz).flat_map(move |bz| {
        (0..gy).flat_map(move |by| {
            (0..gx).flat_map(move |bx| {
                let group = (bz * gy + by) * gx + bx;
                (0..wg.z).flat_map(move |tz| {
                    (0..wg.y).flat_map(move |ty| {
                        (0..wg.x).map(move |tx| ThreadSlot {
                            coord: ThreadCoord { w: bx * wg.x + tx, h: by * wg.y + ty, c: bz * wg.z + tz },
                            group,
                        })
                    })
                })
            })
        })
    })
}
