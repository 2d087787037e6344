//! Network simplex specialized to the bipartite transportation graph.
//!
//! Nodes are the m sources followed by the n sinks; a basis is a spanning
//! tree of m+n-1 cells. The initial basis comes from minimum-cost
//! allocation (each allocation closes exactly one supply or demand line,
//! which keeps the allocated cells acyclic); pivots use Dantzig's rule
//! with lowest-index tie-breaking, falling back to Bland's rule after a
//! run of degenerate pivots.

use crate::costs::CostMatrix;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy)]
struct BasisArc {
    i: usize,
    j: usize,
    flow: f64,
}

pub(crate) struct SimplexSolution {
    /// Positive-mass cells of the optimal vertex.
    pub entries: Vec<(usize, usize, f64)>,
    /// Full spanning-tree basis, including degenerate zero-flow cells.
    pub basis: Vec<(usize, usize)>,
}

pub(crate) fn solve_transportation(
    supply: &[f64],
    demand: &[f64],
    cost: &CostMatrix,
) -> Result<SimplexSolution> {
    let m = supply.len();
    let n = demand.len();
    debug_assert_eq!(cost.rows(), m);
    debug_assert_eq!(cost.cols(), n);

    let mut state = State::initial_basis(supply, demand, cost);
    state.compute_potentials(cost);

    let scale = 1.0 + cost.max_abs();
    let enter_tol = 1e-11 * scale;
    let max_iters = 50 * m * n + 1000;
    let bland_trigger = 2 * (m + n) + 16;

    let mut degenerate_run = 0usize;
    for _ in 0..max_iters {
        let entering = if degenerate_run > bland_trigger {
            state.entering_bland(cost, enter_tol)
        } else {
            state.entering_dantzig(cost, enter_tol)
        };
        let Some((ie, je)) = entering else {
            return Ok(state.into_solution());
        };
        let theta = state.pivot(ie, je)?;
        state.compute_potentials(cost);
        if theta == 0.0 {
            degenerate_run += 1;
        } else {
            degenerate_run = 0;
        }
    }
    Err(Error::Internal("network simplex exceeded its iteration cap".into()))
}

struct State {
    m: usize,
    n: usize,
    basis: Vec<BasisArc>,
    /// node -> indices into `basis`; sinks are offset by m.
    adj: Vec<Vec<usize>>,
    phi: Vec<f64>,
    psi: Vec<f64>,
}

impl State {
    /// Minimum-cost allocation start: scan cells by (cost, index), allocate
    /// `min(remaining supply, remaining demand)`, close exactly one line per
    /// allocation (both at the very last cell). Yields m+n-1 basic cells
    /// forming a spanning tree.
    fn initial_basis(supply: &[f64], demand: &[f64], cost: &CostMatrix) -> Self {
        let m = supply.len();
        let n = demand.len();
        let mut order: Vec<u32> = (0..(m * n) as u32).collect();
        order.sort_by(|&a, &b| {
            let ca = cost.at(a as usize / n, a as usize % n);
            let cb = cost.at(b as usize / n, b as usize % n);
            ca.partial_cmp(&cb).unwrap().then(a.cmp(&b))
        });

        let mut rem_s = supply.to_vec();
        let mut rem_d = demand.to_vec();
        let mut row_open = vec![true; m];
        let mut col_open = vec![true; n];
        let mut rows_open = m;
        let mut cols_open = n;
        let mut basis = Vec::with_capacity(m + n - 1);

        for &cell in &order {
            if rows_open == 0 && cols_open == 0 {
                break;
            }
            let i = cell as usize / n;
            let j = cell as usize % n;
            if !row_open[i] || !col_open[j] {
                continue;
            }
            let alloc = rem_s[i].min(rem_d[j]);
            basis.push(BasisArc { i, j, flow: alloc });
            if rows_open == 1 && cols_open == 1 {
                row_open[i] = false;
                col_open[j] = false;
                rows_open = 0;
                cols_open = 0;
            } else if rows_open == 1 {
                // Never strand open columns behind a closed last row.
                col_open[j] = false;
                cols_open -= 1;
                rem_s[i] -= alloc;
                rem_d[j] = 0.0;
            } else if cols_open == 1 {
                row_open[i] = false;
                rows_open -= 1;
                rem_d[j] -= alloc;
                rem_s[i] = 0.0;
            } else if rem_s[i] <= rem_d[j] {
                row_open[i] = false;
                rows_open -= 1;
                rem_d[j] -= alloc;
                rem_s[i] = 0.0;
            } else {
                col_open[j] = false;
                cols_open -= 1;
                rem_s[i] -= alloc;
                rem_d[j] = 0.0;
            }
        }
        debug_assert_eq!(basis.len(), m + n - 1);

        let mut adj: Vec<Vec<usize>> = vec![Vec::new(); m + n];
        for (idx, arc) in basis.iter().enumerate() {
            adj[arc.i].push(idx);
            adj[m + arc.j].push(idx);
        }
        State { m, n, basis, adj, phi: vec![0.0; m], psi: vec![0.0; n] }
    }

    /// BFS over the basis tree from source 0 with `phi[0] = 0`.
    fn compute_potentials(&mut self, cost: &CostMatrix) {
        let total = self.m + self.n;
        let mut seen = vec![false; total];
        let mut queue = std::collections::VecDeque::with_capacity(total);
        seen[0] = true;
        self.phi[0] = 0.0;
        queue.push_back(0usize);
        while let Some(node) = queue.pop_front() {
            for &aidx in &self.adj[node] {
                let arc = self.basis[aidx];
                let other = if node == arc.i { self.m + arc.j } else { arc.i };
                if seen[other] {
                    continue;
                }
                seen[other] = true;
                if other >= self.m {
                    self.psi[other - self.m] = cost.at(arc.i, arc.j) - self.phi[arc.i];
                } else {
                    self.phi[other] = cost.at(arc.i, arc.j) - self.psi[arc.j];
                }
                queue.push_back(other);
            }
        }
        debug_assert!(seen.iter().all(|&s| s), "basis must span all nodes");
    }

    /// Most negative reduced cost; ties break to the lowest (i, j) index.
    fn entering_dantzig(&self, cost: &CostMatrix, tol: f64) -> Option<(usize, usize)> {
        let mut best = -tol;
        let mut arg = None;
        for i in 0..self.m {
            for j in 0..self.n {
                let r = cost.at(i, j) - self.phi[i] - self.psi[j];
                if r < best {
                    best = r;
                    arg = Some((i, j));
                }
            }
        }
        arg
    }

    /// First cell with negative reduced cost, in index order.
    fn entering_bland(&self, cost: &CostMatrix, tol: f64) -> Option<(usize, usize)> {
        for i in 0..self.m {
            for j in 0..self.n {
                if cost.at(i, j) - self.phi[i] - self.psi[j] < -tol {
                    return Some((i, j));
                }
            }
        }
        None
    }

    /// Adds the entering cell, pushes the largest feasible mass around the
    /// induced cycle, and drops the first limiting cell. Returns the pushed
    /// mass (zero on a degenerate pivot).
    fn pivot(&mut self, ie: usize, je: usize) -> Result<f64> {
        let total = self.m + self.n;
        let target = self.m + je;
        let mut parent: Vec<usize> = vec![usize::MAX; total];
        let mut parent_arc: Vec<usize> = vec![usize::MAX; total];
        let mut queue = std::collections::VecDeque::new();
        parent[ie] = ie;
        queue.push_back(ie);
        while let Some(node) = queue.pop_front() {
            if node == target {
                break;
            }
            for &aidx in &self.adj[node] {
                let arc = self.basis[aidx];
                let other = if node == arc.i { self.m + arc.j } else { arc.i };
                if parent[other] == usize::MAX {
                    parent[other] = node;
                    parent_arc[other] = aidx;
                    queue.push_back(other);
                }
            }
        }
        if parent[target] == usize::MAX {
            return Err(Error::Internal("basis tree lost connectivity".into()));
        }

        // Tree path from the entering sink back to the entering source;
        // signs alternate starting with a decrease at the sink end.
        let mut path = Vec::new();
        let mut node = target;
        while node != ie {
            path.push(parent_arc[node]);
            node = parent[node];
        }
        let mut theta = f64::INFINITY;
        let mut leaving_slot = usize::MAX;
        for (k, &aidx) in path.iter().enumerate() {
            if k % 2 == 0 {
                let f = self.basis[aidx].flow;
                if f < theta {
                    theta = f;
                    leaving_slot = aidx;
                }
            }
        }
        if leaving_slot == usize::MAX {
            return Err(Error::Internal("pivot cycle has no leaving arc".into()));
        }
        for (k, &aidx) in path.iter().enumerate() {
            if k % 2 == 0 {
                self.basis[aidx].flow -= theta;
            } else {
                self.basis[aidx].flow += theta;
            }
        }
        self.basis[leaving_slot].flow = 0.0;

        // Swap the leaving cell for the entering one in place.
        let old = self.basis[leaving_slot];
        self.detach(leaving_slot, old.i, self.m + old.j);
        self.basis[leaving_slot] = BasisArc { i: ie, j: je, flow: theta };
        self.adj[ie].push(leaving_slot);
        self.adj[self.m + je].push(leaving_slot);
        Ok(theta)
    }

    fn detach(&mut self, arc_idx: usize, a: usize, b: usize) {
        for node in [a, b] {
            if let Some(pos) = self.adj[node].iter().position(|&x| x == arc_idx) {
                self.adj[node].swap_remove(pos);
            }
        }
    }

    fn into_solution(self) -> SimplexSolution {
        let mut entries: Vec<(usize, usize, f64)> = self
            .basis
            .iter()
            .filter(|a| a.flow > 1e-16)
            .map(|a| (a.i, a.j, a.flow))
            .collect();
        entries.sort_unstable_by_key(|&(i, j, _)| (i, j));
        let mut basis: Vec<(usize, usize)> = self.basis.iter().map(|a| (a.i, a.j)).collect();
        basis.sort_unstable();
        SimplexSolution { entries, basis }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::costs::{CostMatrix, CostSpec};

    #[test]
    fn forced_coupling() {
        let c = CostMatrix::from_rows(vec![vec![1.0]]).unwrap();
        let sol = solve_transportation(&[1.0], &[1.0], &c).unwrap();
        assert_eq!(sol.entries, vec![(0, 0, 1.0)]);
    }

    #[test]
    fn identity_when_equal() {
        let spec = CostSpec::power(1.0).unwrap();
        let x = vec![vec![0.0], vec![1.0]];
        let c = CostMatrix::build(&spec, &x, &x).unwrap();
        let sol = solve_transportation(&[0.5, 0.5], &[0.5, 0.5], &c).unwrap();
        let cost: f64 = sol.entries.iter().map(|&(i, j, f)| f * c.at(i, j)).sum();
        assert_eq!(cost, 0.0);
    }

    #[test]
    fn beats_greedy_on_crafted_instance() {
        // Greedy matrix-minimum start is suboptimal here; pivots must fix it.
        let c = CostMatrix::from_rows(vec![
            vec![0.0, 2.0, 9.0],
            vec![1.0, 8.0, 3.0],
            vec![7.0, 4.0, 5.0],
        ])
        .unwrap();
        let sol =
            solve_transportation(&[0.4, 0.3, 0.3], &[0.3, 0.3, 0.4], &c).unwrap();
        let cost: f64 = sol.entries.iter().map(|&(i, j, f)| f * c.at(i, j)).sum();
        // Optimum by hand: 0.3*0 + 0.1*2 + 0.2*4 + 0.3*3 + 0.1*5 = 2.4.
        assert!((cost - 2.4).abs() < 1e-12, "got {cost}");
    }

    #[test]
    fn basis_is_spanning_tree_size() {
        let c = CostMatrix::from_rows(vec![
            vec![0.5, 0.2, 0.7, 0.1],
            vec![0.9, 0.4, 0.3, 0.8],
            vec![0.2, 0.6, 0.5, 0.4],
        ])
        .unwrap();
        let sol = solve_transportation(&[0.2, 0.5, 0.3], &[0.25, 0.25, 0.25, 0.25], &c)
            .unwrap();
        assert_eq!(sol.basis.len(), 3 + 4 - 1);
        assert!(sol.entries.len() <= sol.basis.len());
    }
}
