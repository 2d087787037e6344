//! Bottleneck transport: minimize the largest displacement on the plan's
//! support. Binary search over the sorted set of pairwise distances with a
//! max-flow feasibility test per candidate threshold.

use crate::costs::euclidean_distance;
use crate::error::{Error, Result};
use crate::measures::DiscreteMeasure;
use crate::solver::TransportPlan;

/// Minimal threshold `t` such that a feasible plan exists using only pairs
/// with `|x_i - y_j| <= t`, together with a plan attaining it.
pub fn solve_bottleneck(
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
) -> Result<(f64, TransportPlan)> {
    if mu.dim() != nu.dim() {
        return Err(Error::DimensionMismatch { expected: mu.dim(), got: nu.dim() });
    }
    let m = mu.len();
    let n = nu.len();
    let mut dist = vec![0.0f64; m * n];
    for i in 0..m {
        for j in 0..n {
            dist[i * n + j] = euclidean_distance(mu.point(i), nu.point(j));
        }
    }
    let mut thresholds = dist.clone();
    thresholds.sort_by(|a, b| a.partial_cmp(b).unwrap());
    thresholds.dedup();

    // Capacities scaled so the smallest weight is 1.
    let min_w = mu
        .weights()
        .iter()
        .chain(nu.weights())
        .fold(f64::INFINITY, |a, &b| a.min(b));
    let scale = 1.0 / min_w;
    let total: f64 = mu.weights().iter().sum::<f64>() * scale;

    let feasible = |t: f64| -> Option<Vec<(usize, usize, f64)>> {
        let mut net = FlowNetwork::new(m + n + 2);
        let src = m + n;
        let snk = m + n + 1;
        for i in 0..m {
            net.add_edge(src, i, mu.weight(i) * scale);
        }
        for j in 0..n {
            net.add_edge(m + j, snk, nu.weight(j) * scale);
        }
        let mut pair_edges = Vec::new();
        for i in 0..m {
            for j in 0..n {
                if dist[i * n + j] <= t {
                    pair_edges.push((i, j, net.add_edge(i, m + j, f64::INFINITY)));
                }
            }
        }
        let flow = net.max_flow(src, snk);
        if total - flow <= 1e-12 * total {
            let mut entries = Vec::new();
            for (i, j, e) in pair_edges {
                let f = net.flow_on(e) / scale;
                if f > 1e-16 {
                    entries.push((i, j, f));
                }
            }
            Some(entries)
        } else {
            None
        }
    };

    // The largest threshold admits the product coupling, so a feasible
    // index always exists; find the smallest.
    let mut lo = 0usize;
    let mut hi = thresholds.len() - 1;
    let mut best = feasible(thresholds[hi])
        .ok_or_else(|| Error::Internal("bottleneck: full graph infeasible".into()))?;
    if let Some(entries) = feasible(thresholds[lo]) {
        hi = lo;
        best = entries;
    } else {
        while hi - lo > 1 {
            let mid = (lo + hi) / 2;
            match feasible(thresholds[mid]) {
                Some(entries) => {
                    hi = mid;
                    best = entries;
                }
                None => lo = mid,
            }
        }
    }
    let value = thresholds[hi];
    let plan = TransportPlan::from_parts(best, mu.clone(), nu.clone())?;
    Ok((value, plan))
}

/// Dinic max-flow over f64 capacities. Residuals below `EPS` count as
/// saturated; capacities here are >= 1 by construction, so the cutoff is
/// far below any real arc.
struct FlowNetwork {
    to: Vec<usize>,
    cap: Vec<f64>,
    head: Vec<Vec<usize>>,
    level: Vec<i32>,
    iter: Vec<usize>,
}

const EPS: f64 = 1e-12;

impl FlowNetwork {
    fn new(nodes: usize) -> Self {
        Self {
            to: Vec::new(),
            cap: Vec::new(),
            head: vec![Vec::new(); nodes],
            level: vec![0; nodes],
            iter: vec![0; nodes],
        }
    }

    fn add_edge(&mut self, a: usize, b: usize, cap: f64) -> usize {
        let id = self.to.len();
        self.to.push(b);
        self.cap.push(cap);
        self.head[a].push(id);
        self.to.push(a);
        self.cap.push(0.0);
        self.head[b].push(id + 1);
        id
    }

    fn flow_on(&self, edge: usize) -> f64 {
        self.cap[edge ^ 1]
    }

    fn bfs(&mut self, s: usize, t: usize) -> bool {
        self.level.fill(-1);
        let mut q = std::collections::VecDeque::new();
        self.level[s] = 0;
        q.push_back(s);
        while let Some(u) = q.pop_front() {
            for &e in &self.head[u] {
                let v = self.to[e];
                if self.cap[e] > EPS && self.level[v] < 0 {
                    self.level[v] = self.level[u] + 1;
                    q.push_back(v);
                }
            }
        }
        self.level[t] >= 0
    }

    fn dfs(&mut self, u: usize, t: usize, pushed: f64) -> f64 {
        if u == t {
            return pushed;
        }
        while self.iter[u] < self.head[u].len() {
            let e = self.head[u][self.iter[u]];
            let v = self.to[e];
            if self.cap[e] > EPS && self.level[v] == self.level[u] + 1 {
                let d = self.dfs(v, t, pushed.min(self.cap[e]));
                if d > 0.0 {
                    self.cap[e] -= d;
                    self.cap[e ^ 1] += d;
                    return d;
                }
            }
            self.iter[u] += 1;
        }
        0.0
    }

    fn max_flow(&mut self, s: usize, t: usize) -> f64 {
        let mut flow = 0.0;
        while self.bfs(s, t) {
            self.iter.fill(0);
            loop {
                let pushed = self.dfs(s, t, f64::INFINITY);
                if pushed <= 0.0 {
                    break;
                }
                flow += pushed;
            }
        }
        flow
    }
}
