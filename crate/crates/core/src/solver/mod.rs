//! Exact solution of the discrete primal transport problem and its dual,
//! optimality certification via complementary slackness, map extraction,
//! and the bottleneck problem.

mod bottleneck;
mod network_simplex;

pub use bottleneck::solve_bottleneck;

use crate::costs::CostMatrix;
use crate::error::{Error, Result};
use crate::measures::{DiscreteMeasure, PointMap};

/// Default feasibility tolerance (marginal sums).
pub const FEASIBILITY_TOL: f64 = 1e-10;

/// Default optimality / slackness tolerance.
pub const OPTIMALITY_TOL: f64 = 1e-9;

/// A sparse coupling between two discrete measures.
///
/// Entries `(i, j, mass)` with positive mass; row sums match the source
/// weights and column sums the target weights. Solver outputs are vertices
/// of the transportation polytope (at most m+n-1 entries, acyclic support)
/// and additionally carry their simplex basis for dual extraction.
#[derive(Debug, Clone)]
pub struct TransportPlan {
    entries: Vec<(usize, usize, f64)>,
    mu: DiscreteMeasure,
    nu: DiscreteMeasure,
}

impl TransportPlan {
    /// Builds a plan from entries and its two marginals, validating index
    /// bounds and mass positivity (masses <= 0 are rejected).
    pub fn from_parts(
        entries: Vec<(usize, usize, f64)>,
        mu: DiscreteMeasure,
        nu: DiscreteMeasure,
    ) -> Result<Self> {
        for &(i, j, mass) in &entries {
            if i >= mu.len() {
                return Err(Error::DimensionMismatch { expected: mu.len(), got: i });
            }
            if j >= nu.len() {
                return Err(Error::DimensionMismatch { expected: nu.len(), got: j });
            }
            if !(mass > 0.0) || !mass.is_finite() {
                return Err(Error::SchemaViolation {
                    path: format!("entries[{i},{j}]"),
                    message: format!("non-positive mass {mass}"),
                });
            }
        }
        Ok(Self { entries, mu, nu })
    }

    pub fn entries(&self) -> &[(usize, usize, f64)] {
        &self.entries
    }

    pub fn source(&self) -> &DiscreteMeasure {
        &self.mu
    }

    pub fn target(&self) -> &DiscreteMeasure {
        &self.nu
    }

    /// Total cost of the plan against a cost matrix.
    pub fn cost_against(&self, c: &CostMatrix) -> f64 {
        self.entries.iter().map(|&(i, j, mass)| mass * c.at(i, j)).sum()
    }

    /// Largest deviation of a row or column sum from its marginal weight.
    pub fn max_marginal_violation(&self) -> f64 {
        let mut row = vec![0.0f64; self.mu.len()];
        let mut col = vec![0.0f64; self.nu.len()];
        for &(i, j, mass) in &self.entries {
            row[i] += mass;
            col[j] += mass;
        }
        let r = row
            .iter()
            .zip(self.mu.weights())
            .fold(0.0f64, |m, (s, w)| m.max((s - w).abs()));
        let c = col
            .iter()
            .zip(self.nu.weights())
            .fold(0.0f64, |m, (s, w)| m.max((s - w).abs()));
        r.max(c)
    }

    /// Connected components of the support graph (positive-mass entries)
    /// over the m+n node set. Returns per-node component ids and the count.
    fn support_components(&self) -> (Vec<usize>, usize) {
        let m = self.mu.len();
        let n = self.nu.len();
        let mut adj: Vec<Vec<usize>> = vec![Vec::new(); m + n];
        for &(i, j, _) in &self.entries {
            adj[i].push(m + j);
            adj[m + j].push(i);
        }
        let mut comp = vec![usize::MAX; m + n];
        let mut count = 0;
        for start in 0..m + n {
            if comp[start] != usize::MAX {
                continue;
            }
            let mut stack = vec![start];
            comp[start] = count;
            while let Some(u) = stack.pop() {
                for &v in &adj[u] {
                    if comp[v] == usize::MAX {
                        comp[v] = count;
                        stack.push(v);
                    }
                }
            }
            count += 1;
        }
        (comp, count)
    }
}

/// Kantorovich potentials certifying a plan: `phi` on the source support,
/// `psi` on the target support, `phi(x) + psi(y) <= c(x, y)` everywhere and
/// tight on the plan's support. `phi[0] = 0` by normalization.
#[derive(Debug, Clone)]
pub struct DualPotentials {
    pub phi: Vec<f64>,
    pub psi: Vec<f64>,
    /// Number of connected components of the support graph the potentials
    /// were built from. More than one flags non-uniqueness: the component
    /// offsets are pinned by a deterministic rule, not by the problem.
    pub support_components: usize,
}

impl DualPotentials {
    pub fn value(&self, mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> f64 {
        let a: f64 = self.phi.iter().zip(mu.weights()).map(|(p, w)| p * w).sum();
        let b: f64 = self.psi.iter().zip(nu.weights()).map(|(p, w)| p * w).sum();
        a + b
    }

    pub fn is_unique_up_to_constant(&self) -> bool {
        self.support_components == 1
    }
}

/// Four maxima certifying (or refuting) optimality of a plan/dual pair.
#[derive(Debug, Clone, serde::Serialize)]
pub struct OptimalityReport {
    pub primal_value: f64,
    pub dual_value: f64,
    pub gap: f64,
    pub max_marginal_violation: f64,
    pub max_dual_violation: f64,
    pub max_slackness_violation: f64,
    pub tol: f64,
}

impl OptimalityReport {
    pub fn max_constraint_violation(&self) -> f64 {
        self.max_marginal_violation.max(self.max_dual_violation)
    }

    pub fn passed(&self) -> bool {
        self.max_marginal_violation <= self.tol.max(FEASIBILITY_TOL)
            && self.max_dual_violation <= self.tol
            && self.max_slackness_violation <= self.tol
            && self.gap.abs() <= self.tol * (1.0 + self.primal_value.abs())
    }
}

/// Solves the primal problem exactly; the returned plan is an optimal
/// vertex of the transportation polytope.
pub fn solve_primal(
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    cost: &CostMatrix,
) -> Result<TransportPlan> {
    if cost.rows() != mu.len() {
        return Err(Error::DimensionMismatch { expected: mu.len(), got: cost.rows() });
    }
    if cost.cols() != nu.len() {
        return Err(Error::DimensionMismatch { expected: nu.len(), got: cost.cols() });
    }
    for i in 0..cost.rows() {
        for j in 0..cost.cols() {
            if !cost.at(i, j).is_finite() {
                return Err(Error::Internal(format!(
                    "non-finite cost at ({i}, {j}): {}",
                    cost.at(i, j)
                )));
            }
        }
    }
    let sum_mu: f64 = mu.weights().iter().sum();
    let sum_nu: f64 = nu.weights().iter().sum();
    if (sum_mu - sum_nu).abs() > FEASIBILITY_TOL {
        return Err(Error::InfeasibleMarginals { mu: sum_mu, nu: sum_nu });
    }
    let sol = network_simplex::solve_transportation(mu.weights(), nu.weights(), cost)?;
    debug_assert_eq!(sol.basis.len(), mu.len() + nu.len() - 1);
    TransportPlan::from_parts(sol.entries, mu.clone(), nu.clone())
}

/// Recovers Kantorovich potentials from an optimal plan.
///
/// Potentials are propagated over each connected component of the plan's
/// support with the component root pinned to zero, then the component
/// offsets are fixed by the smallest-slack rule — equivalent to completing
/// a degenerate basis with zero-mass arcs of minimal reduced cost. With
/// more than one component the potentials are not unique and the output
/// says so.
pub fn extract_duals(plan: &TransportPlan, cost: &CostMatrix) -> Result<DualPotentials> {
    let m = plan.mu.len();
    let n = plan.nu.len();
    if cost.rows() != m || cost.cols() != n {
        return Err(Error::DimensionMismatch { expected: m, got: cost.rows() });
    }

    // Per-component propagation over the positive-mass support.
    let arcs: Vec<(usize, usize)> = plan.entries.iter().map(|&(i, j, _)| (i, j)).collect();
    let (comp, k) = plan.support_components();
    let mut phi = vec![f64::NAN; m];
    let mut psi = vec![f64::NAN; n];
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); m + n];
    for (idx, &(i, j)) in arcs.iter().enumerate() {
        adj[i].push(idx);
        adj[m + j].push(idx);
    }
    for c in 0..k {
        let root = (0..m + n)
            .find(|&v| comp[v] == c)
            .expect("component ids are contiguous");
        if root < m {
            phi[root] = 0.0;
        } else {
            psi[root - m] = 0.0;
        }
        let mut queue = std::collections::VecDeque::from([root]);
        let mut seen = vec![false; m + n];
        seen[root] = true;
        while let Some(node) = queue.pop_front() {
            for &aidx in &adj[node] {
                let (i, j) = arcs[aidx];
                let other = if node == i { m + j } else { i };
                if seen[other] {
                    continue;
                }
                seen[other] = true;
                if other >= m {
                    psi[other - m] = cost.at(i, j) - phi[i];
                } else {
                    phi[other] = cost.at(i, j) - psi[j];
                }
                queue.push_back(other);
            }
        }
    }
    // Every support entry must be tight; a cyclic support that cannot be
    // made tight means complementary slackness is unconstructible.
    let scale = 1.0 + cost.max_abs();
    for &(i, j, _) in &plan.entries {
        if (phi[i] + psi[j] - cost.at(i, j)).abs() > OPTIMALITY_TOL * scale {
            return Err(Error::NonOptimalPlan(format!(
                "support entry ({i}, {j}) cannot be made tight"
            )));
        }
    }

    if k > 1 {
        // Difference constraints between component offsets: shifting
        // component a by t_a requires t_a - t_b <= min slack from sources
        // of a to sinks of b. Solved by Bellman-Ford; a negative cycle
        // certifies a non-optimal plan.
        let mut slack = vec![f64::INFINITY; k * k];
        for i in 0..m {
            for j in 0..n {
                let (a, b) = (comp[i], comp[m + j]);
                if a != b {
                    let s = cost.at(i, j) - phi[i] - psi[j];
                    if s < slack[a * k + b] {
                        slack[a * k + b] = s;
                    }
                }
            }
        }
        let mut t = vec![0.0f64; k];
        for round in 0..=k {
            let mut changed = false;
            for b in 0..k {
                for a in 0..k {
                    if a == b || slack[a * k + b].is_infinite() {
                        continue;
                    }
                    let cand = t[b] + slack[a * k + b];
                    if cand < t[a] - 1e-15 * scale {
                        t[a] = cand;
                        changed = true;
                    }
                }
            }
            if !changed {
                break;
            }
            if round == k {
                return Err(Error::NonOptimalPlan(
                    "component offsets admit no feasible assignment".into(),
                ));
            }
        }
        for i in 0..m {
            phi[i] += t[comp[i]];
        }
        for j in 0..n {
            psi[j] -= t[comp[m + j]];
        }
    }

    // Normalize at the first support point.
    let shift = phi[0];
    for p in phi.iter_mut() {
        *p -= shift;
    }
    for p in psi.iter_mut() {
        *p += shift;
    }
    Ok(DualPotentials { phi, psi, support_components: k })
}

/// Checks marginal feasibility, dual feasibility, complementary slackness,
/// and the duality gap; the report carries all four maxima.
pub fn verify_optimality(
    plan: &TransportPlan,
    duals: &DualPotentials,
    cost: &CostMatrix,
    tol: f64,
) -> OptimalityReport {
    let primal_value = plan.cost_against(cost);
    let dual_value = duals.value(&plan.mu, &plan.nu);
    let max_marginal_violation = plan.max_marginal_violation();
    let mut max_dual_violation = 0.0f64;
    for i in 0..plan.mu.len() {
        for j in 0..plan.nu.len() {
            let v = duals.phi[i] + duals.psi[j] - cost.at(i, j);
            if v > max_dual_violation {
                max_dual_violation = v;
            }
        }
    }
    let mut max_slackness_violation = 0.0f64;
    for &(i, j, _) in &plan.entries {
        let v = (duals.phi[i] + duals.psi[j] - cost.at(i, j)).abs();
        if v > max_slackness_violation {
            max_slackness_violation = v;
        }
    }
    OptimalityReport {
        primal_value,
        dual_value,
        gap: primal_value - dual_value,
        max_marginal_violation,
        max_dual_violation,
        max_slackness_violation,
        tol,
    }
}

/// Outcome of trying to read a plan as a map.
#[derive(Debug, Clone)]
pub enum MapExtraction {
    /// Every source moves to exactly one destination.
    Map(PointMap),
    /// At least one source splits its mass.
    Split(SplitReport),
}

/// Sources whose mass moves to several destinations, with the fractions.
#[derive(Debug, Clone)]
pub struct SplitReport {
    pub splits: Vec<SplitSource>,
}

#[derive(Debug, Clone)]
pub struct SplitSource {
    pub source: usize,
    /// `(target index, fraction of the source's mass)`.
    pub fractions: Vec<(usize, f64)>,
}

/// Reads the plan as a map when no source splits; otherwise reports every
/// splitting source and its mass fractions.
pub fn extract_map(plan: &TransportPlan) -> MapExtraction {
    let m = plan.mu.len();
    let mut per_source: Vec<Vec<(usize, f64)>> = vec![Vec::new(); m];
    for &(i, j, mass) in plan.entries() {
        per_source[i].push((j, mass));
    }
    let split = per_source.iter().any(|v| v.len() != 1);
    if !split {
        let values: Vec<Vec<f64>> = per_source
            .iter()
            .map(|v| plan.nu.point(v[0].0).to_vec())
            .collect();
        return MapExtraction::Map(PointMap::new(values).expect("plan targets are non-empty"));
    }
    let splits = per_source
        .iter()
        .enumerate()
        .filter(|(_, v)| v.len() > 1)
        .map(|(source, v)| {
            let w = plan.mu.weight(source);
            SplitSource {
                source,
                fractions: v.iter().map(|&(j, mass)| (j, mass / w)).collect(),
            }
        })
        .collect();
    MapExtraction::Split(SplitReport { splits })
}
