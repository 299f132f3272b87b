use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::graph::{GraphModel, OpId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Backend {
    GpuDelegate,
    CpuFallback,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Segment {
    pub backend: Backend,
    /// In execution order.
    pub op_ids: Vec<OpId>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Partition {
    pub segments: Vec<Segment>,
}

impl Partition {
    /// Number of delegate nodes the graph collapses into.
    pub fn delegate_count(&self) -> usize {
        self.segments.iter().filter(|s| s.backend == Backend::GpuDelegate).count()
    }
}

struct UnionFind(Vec<usize>);

impl UnionFind {
    fn find(&mut self, x: usize) -> usize {
        let mut root = x;
        while self.0[root] != root {
            root = self.0[root];
        }
        let mut cur = x;
        while self.0[cur] != root {
            let next = self.0[cur];
            self.0[cur] = root;
            cur = next;
        }
        root
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.0[ra.max(rb)] = ra.min(rb);
        }
    }
}

/// Splits the graph into runs of delegate-supported ops and CPU fallback
/// ops.
///
/// Ops joined by a tensor and sharing a backend form one segment. If two such
/// components would depend on each other through a segment of the other
/// backend (so neither could run first), segments are additionally split by
/// epoch: the number of backend changes on the longest path to the op.
/// Segments are listed in dependency order, ties broken by earliest op.
pub fn partition_delegate(g: &GraphModel) -> Partition {
    let order: Vec<OpId> = g.execution_order().to_vec();
    let index: HashMap<OpId, usize> = order.iter().enumerate().map(|(i, &id)| (id, i)).collect();
    let supported: Vec<bool> = order.iter().map(|&id| g.op(id).expect("ordered op exists").is_supported()).collect();
    let mut preds: Vec<Vec<usize>> = vec![Vec::new(); order.len()];
    for (i, &id) in order.iter().enumerate() {
        for &t in &g.op(id).expect("ordered op exists").inputs {
            if let Some(p) = g.producer(t).and_then(|p| index.get(&p)) {
                preds[i].push(*p);
            }
        }
    }

    let components = |epoch: Option<&[usize]>| -> Vec<usize> {
        let mut uf = UnionFind((0..order.len()).collect());
        for (i, ps) in preds.iter().enumerate() {
            for &p in ps {
                if supported[p] == supported[i] && epoch.is_none_or(|e| e[p] == e[i]) {
                    uf.union(p, i);
                }
            }
        }
        (0..order.len()).map(|i| uf.find(i)).collect()
    };

    let mut comp = components(None);
    let segments = match quotient_order(&comp, &preds) {
        Some(seq) => seq,
        None => {
            let mut epoch = vec![0usize; order.len()];
            for i in 0..order.len() {
                epoch[i] =
                    preds[i].iter().map(|&p| epoch[p] + usize::from(supported[p] != supported[i])).max().unwrap_or(0);
            }
            comp = components(Some(&epoch));
            quotient_order(&comp, &preds).expect("epoch refinement yields an acyclic quotient")
        }
    };

    let mut members: HashMap<usize, Vec<OpId>> = HashMap::new();
    for (i, &c) in comp.iter().enumerate() {
        members.entry(c).or_default().push(order[i]);
    }
    Partition {
        segments: segments
            .into_iter()
            .map(|root| Segment {
                backend: if supported[root] { Backend::GpuDelegate } else { Backend::CpuFallback },
                op_ids: members.remove(&root).expect("root has members"),
            })
            .collect(),
    }
}

/// Topological order of the component graph (components named by their
/// lowest op index, which is also their root), or `None` when it has a cycle.
fn quotient_order(comp: &[usize], preds: &[Vec<usize>]) -> Option<Vec<usize>> {
    let mut indegree: HashMap<usize, usize> = HashMap::new();
    let mut succ: HashMap<usize, BTreeSet<usize>> = HashMap::new();
    for &c in comp {
        indegree.entry(c).or_default();
    }
    for (i, ps) in preds.iter().enumerate() {
        for &p in ps {
            let (a, b) = (comp[p], comp[i]);
            if a != b && succ.entry(a).or_default().insert(b) {
                *indegree.entry(b).or_default() += 1;
            }
        }
    }
    let mut ready: BTreeSet<usize> = indegree.iter().filter(|(_, &d)| d == 0).map(|(&c, _)| c).collect();
    let mut out = Vec::with_capacity(indegree.len());
    while let Some(c) = ready.pop_first() {
        out.push(c);
        for &n in succ.get(&c).into_iter().flatten() {
            let d = indegree.get_mut(&n).expect("known component");
            *d -= 1;
            if *d == 0 {
                ready.insert(n);
            }
        }
    }
    (out.len() == indegree.len()).then_some(out)
}
