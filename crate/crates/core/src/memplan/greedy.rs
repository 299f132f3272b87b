use std::cell::Cell;
use std::cmp::{Ordering, Reverse};
use std::collections::{BTreeSet, BinaryHeap, HashSet};

use crate::graph::{liveness_map, GraphModel};

use super::{MemoryPlan, SharedObject, Strategy};

thread_local! {
    static COMPARISONS: Cell<u64> = const { Cell::new(0) };
}

fn bump() {
    COMPARISONS.with(|c| c.set(c.get() + 1));
}

/// Free-pool entry, ordered by size then object id.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct PoolKey {
    size: usize,
    object: usize,
}

impl Ord for PoolKey {
    fn cmp(&self, other: &Self) -> Ordering {
        bump();
        (self.size, self.object).cmp(&(other.size, other.object))
    }
}

impl PartialOrd for PoolKey {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// In-use entry, released once execution passes `last_use`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Expiry {
    last_use: usize,
    object: usize,
}

impl Ord for Expiry {
    fn cmp(&self, other: &Self) -> Ordering {
        bump();
        (self.last_use, self.object).cmp(&(other.last_use, other.object))
    }
}

impl PartialOrd for Expiry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Greedy shared-object assignment.
///
/// Ops are visited in execution order. Each intermediate output takes the
/// free object whose size is closest to its own (ties: the larger object,
/// then the lower id), growing it if needed, or a fresh object when the pool
/// is empty. After the outputs, objects whose tensor has seen its last
/// consumer return to the pool. The pool is an ordered set and the in-use
/// set a min-heap on release step, so the whole pass is `O(n log n)`.
pub fn plan_greedy(g: &GraphModel) -> MemoryPlan {
    run(g)
}

/// [`plan_greedy`] plus the number of key comparisons made by the pool and
/// in-use structures.
pub fn plan_greedy_counted(g: &GraphModel) -> (MemoryPlan, u64) {
    COMPARISONS.with(|c| c.set(0));
    let plan = run(g);
    (plan, COMPARISONS.with(Cell::get))
}

fn run(g: &GraphModel) -> MemoryPlan {
    let live = liveness_map(g);
    let mut objects: Vec<SharedObject> = Vec::new();
    let mut pool: BTreeSet<PoolKey> = BTreeSet::new();
    let mut in_use: BinaryHeap<Reverse<Expiry>> = BinaryHeap::new();
    let mut assigned = HashSet::new();

    for (step, op) in g.ordered_ops().enumerate() {
        for &t in &op.outputs {
            let Some(iv) = live.get(&t) else { continue };
            if !assigned.insert(t) {
                continue;
            }
            let size = g.tensor_size(t);
            let object = match closest(&pool, size) {
                Some(key) => {
                    pool.remove(&key);
                    let obj = &mut objects[key.object];
                    obj.size = obj.size.max(size);
                    obj.tensors.push(t);
                    key.object
                }
                None => {
                    objects.push(SharedObject { id: objects.len(), size, tensors: vec![t] });
                    objects.len() - 1
                }
            };
            in_use.push(Reverse(Expiry { last_use: iv.last_use, object }));
        }

        while let Some(&Reverse(top)) = in_use.peek() {
            if top.last_use > step {
                break;
            }
            in_use.pop();
            pool.insert(PoolKey { size: objects[top.object].size, object: top.object });
        }
    }

    MemoryPlan::new(Strategy::Greedy, objects)
}

/// Free object closest in size to `size`; equal distance prefers the larger
/// object, then the lower id.
fn closest(pool: &BTreeSet<PoolKey>, size: usize) -> Option<PoolKey> {
    let above = pool.range(PoolKey { size, object: 0 }..).next().copied();
    let below = pool.range(..PoolKey { size, object: 0 }).next_back().map(|k| {
        // Lowest id among objects of that size.
        *pool.range(PoolKey { size: k.size, object: 0 }..).next().expect("k itself is in range")
    });
    match (above, below) {
        (Some(a), Some(b)) => Some(if a.size - size <= size - b.size { a } else { b }),
        (a, b) => a.or(b),
    }
}
