use crate::graph::{liveness, GraphModel, LivenessInterval};

use super::{MemoryPlan, PlanError, SharedObject, Strategy};

/// Largest instance [`brute_force_plan`] accepts (Bell(8) = 4140 partitions).
pub const MAX_BRUTE_FORCE_TENSORS: usize = 8;

/// Optimal plan by exhaustive search over set partitions of the
/// intermediates into groups with pairwise disjoint lifetimes.
pub fn brute_force_plan(g: &GraphModel) -> Result<MemoryPlan, PlanError> {
    let intervals = liveness(g);
    if intervals.len() > MAX_BRUTE_FORCE_TENSORS {
        return Err(PlanError::TooManyTensors { count: intervals.len(), max: MAX_BRUTE_FORCE_TENSORS });
    }
    let sizes: Vec<usize> = intervals.iter().map(|iv| g.tensor_size(iv.tensor_id)).collect();

    let mut search = Search { intervals: &intervals, sizes: &sizes, groups: Vec::new(), best: None };
    search.assign(0, 0);

    let groups = search.best.map(|(_, groups)| groups).unwrap_or_default();
    let objects = groups
        .into_iter()
        .enumerate()
        .map(|(id, members)| SharedObject {
            id,
            size: members.iter().map(|&i| sizes[i]).max().unwrap_or(0),
            tensors: members.iter().map(|&i| intervals[i].tensor_id).collect(),
        })
        .collect();
    Ok(MemoryPlan::new(Strategy::BruteForce, objects))
}

struct Search<'a> {
    intervals: &'a [LivenessInterval],
    sizes: &'a [usize],
    groups: Vec<Vec<usize>>,
    best: Option<(usize, Vec<Vec<usize>>)>,
}

impl Search<'_> {
    /// Places tensor `i` into each compatible existing group, then into a new
    /// one. `cost` is the running sum of group maxima.
    fn assign(&mut self, i: usize, cost: usize) {
        if self.best.as_ref().is_some_and(|(b, _)| cost >= *b) && i < self.intervals.len() {
            return;
        }
        if i == self.intervals.len() {
            if self.best.as_ref().is_none_or(|(b, _)| cost < *b) {
                self.best = Some((cost, self.groups.clone()));
            }
            return;
        }
        let size = self.sizes[i];
        for gi in 0..self.groups.len() {
            let fits = self.groups[gi].iter().all(|&j| !self.intervals[j].overlaps(&self.intervals[i]));
            if !fits {
                continue;
            }
            let current = self.groups[gi].iter().map(|&j| self.sizes[j]).max().unwrap_or(0);
            self.groups[gi].push(i);
            self.assign(i + 1, cost + size.saturating_sub(current));
            self.groups[gi].pop();
        }
        self.groups.push(vec![i]);
        self.assign(i + 1, cost + size);
        self.groups.pop();
    }
}
