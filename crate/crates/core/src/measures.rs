//! Finitely supported probability measures and their elementary calculus.
//!
//! A [`DiscreteMeasure`] is a list of support points in `R^d` with
//! non-negative weights summing to one. Construction normalizes weights,
//! merges duplicate atoms, and drops numerically invisible mass, so every
//! value of this type satisfies the invariants once and for all; every
//! operation afterwards is a pure function producing a new value.

use crate::error::{Error, Result};

/// Two points closer than this in max-norm are the same atom.
pub const MERGE_TOL: f64 = 1e-12;

/// Weights below this after normalization are dropped and mass renormalized.
pub const WEIGHT_FLOOR: f64 = 1e-15;

/// Tolerance for the `sum(weights) == 1` invariant.
pub const MASS_TOL: f64 = 1e-12;

/// A finitely supported probability measure on `R^d`.
///
/// Coordinates are stored flat, `dim` per atom. Immutable after construction.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteMeasure {
    coords: Vec<f64>,
    weights: Vec<f64>,
    dim: usize,
}

impl DiscreteMeasure {
    /// Builds a measure from raw points and weights.
    ///
    /// Weights are divided by their sum, duplicate points (within
    /// [`MERGE_TOL`] in max-norm) are merged by summing weights, and atoms
    /// lighter than [`WEIGHT_FLOOR`] are dropped with the mass renormalized.
    pub fn new(points: Vec<Vec<f64>>, weights: Vec<f64>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::EmptySupport);
        }
        if points.len() != weights.len() {
            return Err(Error::DimensionMismatch {
                expected: points.len(),
                got: weights.len(),
            });
        }
        let dim = points[0].len();
        if dim == 0 {
            return Err(Error::DimensionMismatch { expected: 1, got: 0 });
        }
        for p in &points {
            if p.len() != dim {
                return Err(Error::DimensionMismatch { expected: dim, got: p.len() });
            }
            if p.iter().any(|c| !c.is_finite()) {
                return Err(Error::SchemaViolation {
                    path: "points".into(),
                    message: "non-finite coordinate".into(),
                });
            }
        }
        let mut w = weights;
        for (i, wi) in w.iter_mut().enumerate() {
            if !wi.is_finite() || *wi < -WEIGHT_FLOOR {
                return Err(Error::NegativeWeight { index: i, value: *wi });
            }
            if *wi < 0.0 {
                *wi = 0.0;
            }
        }
        let total: f64 = w.iter().sum();
        if total <= 0.0 {
            return Err(Error::ZeroMass(total));
        }
        for wi in w.iter_mut() {
            *wi /= total;
        }

        // Merge duplicates: first occurrence keeps its coordinates.
        let n = points.len();
        let mut kept: Vec<usize> = Vec::with_capacity(n);
        let mut merged_w: Vec<f64> = Vec::with_capacity(n);
        'outer: for i in 0..n {
            for (slot, &k) in kept.iter().enumerate() {
                if max_norm_close(&points[k], &points[i], MERGE_TOL) {
                    merged_w[slot] += w[i];
                    continue 'outer;
                }
            }
            kept.push(i);
            merged_w.push(w[i]);
        }

        // Drop invisible atoms, then renormalize whatever survives.
        let mut coords = Vec::with_capacity(kept.len() * dim);
        let mut weights = Vec::with_capacity(kept.len());
        for (slot, &k) in kept.iter().enumerate() {
            if merged_w[slot] >= WEIGHT_FLOOR {
                coords.extend_from_slice(&points[k]);
                weights.push(merged_w[slot]);
            }
        }
        if weights.is_empty() {
            return Err(Error::ZeroMass(0.0));
        }
        let total: f64 = weights.iter().sum();
        for wi in weights.iter_mut() {
            *wi /= total;
        }
        Ok(Self { coords, weights, dim })
    }

    /// Dirac mass at a single point.
    pub fn dirac(point: Vec<f64>) -> Result<Self> {
        Self::new(vec![point], vec![1.0])
    }

    /// Uniform measure on the given points (duplicates still merge).
    pub fn uniform(points: Vec<Vec<f64>>) -> Result<Self> {
        let n = points.len();
        Self::new(points, vec![1.0; n])
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn weight(&self, i: usize) -> f64 {
        self.weights[i]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn points(&self) -> Vec<Vec<f64>> {
        (0..self.len()).map(|i| self.point(i).to_vec()).collect()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&[f64], f64)> + '_ {
        (0..self.len()).map(move |i| (self.point(i), self.weights[i]))
    }

    /// Integral of a test function against the measure.
    pub fn integrate(&self, f: impl Fn(&[f64]) -> f64) -> f64 {
        self.iter().map(|(x, w)| w * f(x)).sum()
    }

    /// `m_p = sum_i w_i |x_i|^p`, the p-th moment about the origin.
    pub fn moment_p(&self, p: f64) -> Result<f64> {
        if !(p >= 1.0) || !p.is_finite() {
            return Err(Error::InvalidExponent(p));
        }
        Ok(self
            .iter()
            .map(|(x, w)| {
                let sq: f64 = x.iter().map(|c| c * c).sum();
                w * pow_of_norm_sq(sq, p)
            })
            .sum())
    }

    /// Image measure under `map`: atoms move, masses follow, collisions merge.
    pub fn pushforward(&self, map: &PointMap) -> Result<Self> {
        if map.len() != self.len() {
            return Err(Error::DimensionMismatch { expected: self.len(), got: map.len() });
        }
        let points = (0..self.len()).map(|i| map.value(i).to_vec()).collect();
        Self::new(points, self.weights.clone())
    }

    /// Largest pairwise distance between support points of `self` and `other`.
    pub fn joint_diameter(&self, other: &Self) -> f64 {
        let mut d = 0.0f64;
        let all: Vec<&[f64]> = (0..self.len())
            .map(|i| self.point(i))
            .chain((0..other.len()).map(|j| other.point(j)))
            .collect();
        for a in 0..all.len() {
            for b in a + 1..all.len() {
                d = d.max(crate::costs::euclidean_distance(all[a], all[b]));
            }
        }
        d
    }

    /// True when both measures carry the same atoms and weights within `tol`.
    pub fn approx_eq(&self, other: &Self, tol: f64) -> bool {
        if self.dim != other.dim || self.len() != other.len() {
            return false;
        }
        // Supports are merged, so matching is one-to-one if it exists.
        let mut used = vec![false; other.len()];
        'outer: for (x, w) in self.iter() {
            for j in 0..other.len() {
                if !used[j]
                    && max_norm_close(x, other.point(j), tol)
                    && (w - other.weight(j)).abs() <= tol
                {
                    used[j] = true;
                    continue 'outer;
                }
            }
            return false;
        }
        true
    }
}

/// `|z|^p` computed from `|z|^2`, exact for p = 1 and p = 2.
pub(crate) fn pow_of_norm_sq(sum_sq: f64, p: f64) -> f64 {
    if p == 2.0 {
        sum_sq
    } else if p == 1.0 {
        sum_sq.sqrt()
    } else if sum_sq == 0.0 {
        0.0
    } else {
        sum_sq.powf(p / 2.0)
    }
}

fn max_norm_close(a: &[f64], b: &[f64], tol: f64) -> bool {
    a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
}

/// A map defined on the support of one measure: per-atom target vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct PointMap {
    values: Vec<f64>,
    dim: usize,
    len: usize,
}

impl PointMap {
    /// Builds the map from one output vector per source atom.
    pub fn new(values: Vec<Vec<f64>>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptySupport);
        }
        let dim = values[0].len();
        let mut flat = Vec::with_capacity(values.len() * dim);
        for v in &values {
            if v.len() != dim {
                return Err(Error::DimensionMismatch { expected: dim, got: v.len() });
            }
            flat.extend_from_slice(v);
        }
        Ok(Self { values: flat, dim, len: values.len() })
    }

    /// Materializes a closure on the support of `m`.
    pub fn from_fn(m: &DiscreteMeasure, f: impl Fn(&[f64]) -> Vec<f64>) -> Result<Self> {
        Self::new((0..m.len()).map(|i| f(m.point(i))).collect())
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn value(&self, i: usize) -> &[f64] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }
}

/// The product coupling `mu (x) nu`: always a feasible transport plan.
pub fn product_coupling(
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
) -> crate::solver::TransportPlan {
    let mut entries = Vec::with_capacity(mu.len() * nu.len());
    for i in 0..mu.len() {
        for j in 0..nu.len() {
            entries.push((i, j, mu.weight(i) * nu.weight(j)));
        }
    }
    crate::solver::TransportPlan::from_parts(entries, mu.clone(), nu.clone())
        .expect("product coupling is always feasible")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_normalization() {
        let m = DiscreteMeasure::new(vec![vec![0.0], vec![1.0]], vec![1.0, 1.0]).unwrap();
        assert_eq!(m.weights(), &[0.5, 0.5]);
    }

    #[test]
    fn duplicate_atoms_merge() {
        let m = DiscreteMeasure::new(vec![vec![0.0], vec![0.0]], vec![0.4, 0.6]).unwrap();
        assert_eq!(m.len(), 1);
        assert_eq!(m.weight(0), 1.0);
    }

    #[test]
    fn weights_renormalize() {
        let m = DiscreteMeasure::new(
            vec![vec![0.0, 0.0], vec![1.0, 1.0], vec![2.0, 0.0]],
            vec![2.0, 1.0, 1.0],
        )
        .unwrap();
        assert_eq!(m.weights(), &[0.5, 0.25, 0.25]);
    }

    #[test]
    fn rejects_empty_and_negative() {
        assert!(matches!(DiscreteMeasure::new(vec![], vec![]), Err(Error::EmptySupport)));
        let bad = DiscreteMeasure::new(vec![vec![0.0]], vec![-0.5]);
        assert!(matches!(bad, Err(Error::NegativeWeight { .. })));
    }

    #[test]
    fn tiny_weights_dropped() {
        let m =
            DiscreteMeasure::new(vec![vec![0.0], vec![1.0]], vec![1.0, 1e-17]).unwrap();
        assert_eq!(m.len(), 1);
        assert_eq!(m.weight(0), 1.0);
    }

    #[test]
    fn pushforward_translates_dirac() {
        let m = DiscreteMeasure::dirac(vec![0.0]).unwrap();
        let t = PointMap::from_fn(&m, |x| vec![x[0] + 1.0]).unwrap();
        let img = m.pushforward(&t).unwrap();
        assert_eq!(img.point(0), &[1.0]);
        assert_eq!(img.weight(0), 1.0);
    }

    #[test]
    fn pushforward_constant_map_merges() {
        let m = DiscreteMeasure::new(vec![vec![0.0], vec![1.0]], vec![0.5, 0.5]).unwrap();
        let t = PointMap::from_fn(&m, |_| vec![0.0]).unwrap();
        let img = m.pushforward(&t).unwrap();
        assert_eq!(img.len(), 1);
        assert_eq!(img.weight(0), 1.0);
    }

    #[test]
    fn pushforward_dilation() {
        let m = DiscreteMeasure::uniform(vec![vec![0.0], vec![1.0], vec![2.0]]).unwrap();
        let t = PointMap::from_fn(&m, |x| vec![2.0 * x[0]]).unwrap();
        let img = m.pushforward(&t).unwrap();
        let expect = DiscreteMeasure::uniform(vec![vec![0.0], vec![2.0], vec![4.0]]).unwrap();
        assert!(img.approx_eq(&expect, 1e-15));
    }

    #[test]
    fn pushforward_change_of_variables_quadratics() {
        // integral of phi d(T#m) == integral of (phi o T) dm for degree <= 2.
        let m = DiscreteMeasure::new(
            vec![vec![0.2, -0.1], vec![0.7, 0.4], vec![-0.3, 0.9]],
            vec![0.2, 0.5, 0.3],
        )
        .unwrap();
        let t = PointMap::from_fn(&m, |x| vec![2.0 * x[0] - x[1], x[0] + 0.5]).unwrap();
        let img = m.pushforward(&t).unwrap();
        let phis: Vec<Box<dyn Fn(&[f64]) -> f64>> = vec![
            Box::new(|_| 1.0),
            Box::new(|y| y[0]),
            Box::new(|y| y[1]),
            Box::new(|y| y[0] * y[1]),
            Box::new(|y| y[0] * y[0] + y[1] * y[1]),
        ];
        for phi in &phis {
            let lhs = img.integrate(phi);
            let rhs: f64 = (0..m.len()).map(|i| m.weight(i) * phi(t.value(i))).sum();
            assert!((lhs - rhs).abs() <= 1e-15);
        }
    }

    #[test]
    fn moments() {
        let m = DiscreteMeasure::dirac(vec![0.0]).unwrap();
        assert_eq!(m.moment_p(2.0).unwrap(), 0.0);

        let m = DiscreteMeasure::new(vec![vec![0.0], vec![2.0]], vec![0.5, 0.5]).unwrap();
        assert_eq!(m.moment_p(1.0).unwrap(), 1.0);

        let m = DiscreteMeasure::uniform(vec![vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        assert_eq!(m.moment_p(2.0).unwrap(), 1.0);

        assert!(m.moment_p(0.5).is_err());
    }

    #[test]
    fn product_coupling_marginals() {
        let mu = DiscreteMeasure::new(vec![vec![0.0], vec![1.0]], vec![0.5, 0.5]).unwrap();
        let nu = DiscreteMeasure::uniform(vec![vec![0.0], vec![1.0], vec![2.0]]).unwrap();
        let plan = product_coupling(&mu, &nu);
        assert_eq!(plan.entries().len(), 6);
        for &(_, _, mass) in plan.entries() {
            assert!((mass - 1.0 / 6.0).abs() <= 1e-15);
        }
        assert!(plan.max_marginal_violation() <= 1e-12);
    }

    #[test]
    fn product_of_diracs() {
        let mu = DiscreteMeasure::dirac(vec![0.0]).unwrap();
        let nu = DiscreteMeasure::dirac(vec![1.0]).unwrap();
        let plan = product_coupling(&mu, &nu);
        assert_eq!(plan.entries(), &[(0, 0, 1.0)]);
    }
}
