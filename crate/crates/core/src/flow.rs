//! Max-flow / min-cut on the small dense networks built by the geodesic
//! solver. Edmonds-Karp over an adjacency matrix; nodes are visited in index
//! order, which makes the resulting cut deterministic.

use std::collections::VecDeque;

/// Residual capacities at or below this are treated as saturated.
const EPS: f64 = 1e-14;

pub(crate) struct FlowNetwork {
    n: usize,
    cap: Vec<f64>,
}

impl FlowNetwork {
    pub(crate) fn new(n: usize) -> Self {
        FlowNetwork {
            n,
            cap: vec![0.0; n * n],
        }
    }

    pub(crate) fn add_edge(&mut self, from: usize, to: usize, capacity: f64) {
        self.cap[from * self.n + to] += capacity;
    }

    /// Runs max-flow from `s` to `t`. Returns the flow value and, for every
    /// node, whether it is reachable from `s` in the final residual graph
    /// (the source side of a minimum cut).
    pub(crate) fn max_flow(mut self, s: usize, t: usize) -> (f64, Vec<bool>) {
        let n = self.n;
        let mut total = 0.0;
        let mut parent = vec![usize::MAX; n];
        loop {
            parent.fill(usize::MAX);
            parent[s] = s;
            let mut queue = VecDeque::from([s]);
            while let Some(u) = queue.pop_front() {
                if u == t {
                    break;
                }
                for v in 0..n {
                    if parent[v] == usize::MAX && self.cap[u * n + v] > EPS {
                        parent[v] = u;
                        queue.push_back(v);
                    }
                }
            }
            if parent[t] == usize::MAX {
                let reachable = parent.iter().map(|&p| p != usize::MAX).collect();
                return (total, reachable);
            }
            let mut bottleneck = f64::INFINITY;
            let mut v = t;
            while v != s {
                let u = parent[v];
                bottleneck = bottleneck.min(self.cap[u * n + v]);
                v = u;
            }
            let mut v = t;
            while v != s {
                let u = parent[v];
                self.cap[u * n + v] -= bottleneck;
                self.cap[v * n + u] += bottleneck;
                v = u;
            }
            total += bottleneck;
        }
    }
}
