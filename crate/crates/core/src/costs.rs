//! Cost functions, cost matrices, and the c-transform calculus.
//!
//! Costs are declarative: a power of the Euclidean distance `|x-y|^p`
//! (optionally scaled by `1/p`), or `h(x-y)` for a strictly convex `h`
//! from a registered family with a closed-form conjugate gradient. The
//! c-transform over finite supports is an exact minimization, so the
//! classical identities (`chi^ccc = chi^c`, `psi^c = -psi` for 1-Lipschitz
//! `psi` under the distance cost) hold in finite arithmetic.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measures::pow_of_norm_sq;

/// Registered strictly convex kernels `h` with known `grad h*`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConvexKernel {
    /// `h(z) = |z|^2 / 2`; `grad h*(w) = w`.
    Quadratic,
    /// `h(z) = |z|^p / p` for `p > 1`; `grad h*(w) = |w|^(q-2) w`, `1/p + 1/q = 1`.
    PPower { p: f64 },
}

impl ConvexKernel {
    pub fn eval(&self, z: &[f64]) -> f64 {
        let sq: f64 = z.iter().map(|c| c * c).sum();
        match self {
            ConvexKernel::Quadratic => sq / 2.0,
            ConvexKernel::PPower { p } => pow_of_norm_sq(sq, *p) / p,
        }
    }

    /// `grad h*` evaluated at `w`, in closed form.
    pub fn grad_conjugate(&self, w: &[f64]) -> Vec<f64> {
        match self {
            ConvexKernel::Quadratic => w.to_vec(),
            ConvexKernel::PPower { p } => {
                let q = p / (p - 1.0);
                let norm: f64 = w.iter().map(|c| c * c).sum::<f64>().sqrt();
                if norm == 0.0 {
                    return vec![0.0; w.len()];
                }
                let scale = norm.powf(q - 2.0);
                w.iter().map(|c| scale * c).collect()
            }
        }
    }
}

/// Declarative cost function on `R^d x R^d`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CostSpec {
    /// `c(x, y) = |x - y|^p` with `p >= 1`; `p = inf` routes to the bottleneck solver.
    Power { p: f64 },
    /// `c(x, y) = |x - y|^p / p`.
    ScaledPower { p: f64 },
    /// `c(x, y) = h(x - y)` for a registered strictly convex `h`.
    Convex { h: ConvexKernel },
}

impl CostSpec {
    pub fn power(p: f64) -> Result<Self> {
        if p.is_nan() || p < 1.0 {
            return Err(Error::InvalidExponent(p));
        }
        Ok(CostSpec::Power { p })
    }

    pub fn scaled_power(p: f64) -> Result<Self> {
        if !p.is_finite() || p < 1.0 {
            return Err(Error::InvalidExponent(p));
        }
        Ok(CostSpec::ScaledPower { p })
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            CostSpec::Power { p } => {
                if p.is_nan() || *p < 1.0 {
                    return Err(Error::InvalidExponent(*p));
                }
            }
            CostSpec::ScaledPower { p } => {
                if !p.is_finite() || *p < 1.0 {
                    return Err(Error::InvalidExponent(*p));
                }
            }
            CostSpec::Convex { h } => {
                if let ConvexKernel::PPower { p } = h {
                    if !p.is_finite() || *p <= 1.0 {
                        return Err(Error::InvalidExponent(*p));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn is_infinite(&self) -> bool {
        matches!(self, CostSpec::Power { p } if p.is_infinite())
    }

    /// Cost of one pair.
    pub fn eval(&self, x: &[f64], y: &[f64]) -> f64 {
        let sq: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
        match self {
            CostSpec::Power { p } => pow_of_norm_sq(sq, *p),
            CostSpec::ScaledPower { p } => pow_of_norm_sq(sq, *p) / p,
            CostSpec::Convex { h } => match h {
                ConvexKernel::Quadratic => sq / 2.0,
                ConvexKernel::PPower { p } => pow_of_norm_sq(sq, *p) / p,
            },
        }
    }
}

pub fn euclidean_distance(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()
}

/// Dense matrix of pairwise costs `C[i][j] = c(x_i, y_j)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CostMatrix {
    entries: Vec<f64>,
    rows: usize,
    cols: usize,
}

impl CostMatrix {
    /// Evaluates `spec` on the product of two point lists.
    pub fn build(spec: &CostSpec, x: &[Vec<f64>], y: &[Vec<f64>]) -> Result<Self> {
        spec.validate()?;
        if spec.is_infinite() {
            return Err(Error::InfiniteExponent);
        }
        if x.is_empty() || y.is_empty() {
            return Err(Error::EmptyDomain);
        }
        let dim = x[0].len();
        for p in x.iter().chain(y.iter()) {
            if p.len() != dim {
                return Err(Error::DimensionMismatch { expected: dim, got: p.len() });
            }
        }
        let mut entries = Vec::with_capacity(x.len() * y.len());
        for xi in x {
            for yj in y {
                entries.push(spec.eval(xi, yj));
            }
        }
        Ok(Self { entries, rows: x.len(), cols: y.len() })
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        if rows.is_empty() || rows[0].is_empty() {
            return Err(Error::EmptyDomain);
        }
        let cols = rows[0].len();
        let mut entries = Vec::with_capacity(rows.len() * cols);
        for r in &rows {
            if r.len() != cols {
                return Err(Error::DimensionMismatch { expected: cols, got: r.len() });
            }
            entries.extend_from_slice(r);
        }
        Ok(Self { entries, rows: rows.len(), cols })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.cols + j]
    }

    pub fn max_abs(&self) -> f64 {
        self.entries.iter().fold(0.0f64, |m, c| m.max(c.abs()))
    }
}

/// Function values attached to a support: houses `chi`, `phi`, `psi`, `psi^c`.
#[derive(Debug, Clone, PartialEq)]
pub struct PotentialVector {
    pub values: Vec<f64>,
}

impl PotentialVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptyDomain);
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::SchemaViolation {
                path: "potential".into(),
                message: "non-finite value".into(),
            });
        }
        Ok(Self { values })
    }

    pub fn zeros(n: usize) -> Self {
        Self { values: vec![0.0; n] }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Result of a c-transform: values on the target support plus, for each
/// target point, the argmin indices (ties kept; tie structure is where
/// optimal maps fail to exist).
#[derive(Debug, Clone)]
pub struct CTransform {
    pub potential: PotentialVector,
    pub argmin: Vec<Vec<usize>>,
}

/// `chi^c(y) = min_x c(x, y) - chi(x)`, exact minimization over the support.
pub fn c_transform(
    chi: &PotentialVector,
    spec: &CostSpec,
    x: &[Vec<f64>],
    y: &[Vec<f64>],
) -> Result<CTransform> {
    if x.is_empty() || y.is_empty() {
        return Err(Error::EmptyDomain);
    }
    if chi.len() != x.len() {
        return Err(Error::DimensionMismatch { expected: x.len(), got: chi.len() });
    }
    let c = CostMatrix::build(spec, x, y)?;
    Ok(c_transform_with_matrix(chi, &c, Orientation::SourceToTarget))
}

/// Which index of the cost matrix the input potential lives on.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Orientation {
    /// Input on rows, output on columns: `out(j) = min_i C[i][j] - chi(i)`.
    SourceToTarget,
    /// Input on columns, output on rows: `out(i) = min_j C[i][j] - chi(j)`.
    TargetToSource,
}

/// c-transform against a prebuilt cost matrix.
pub fn c_transform_with_matrix(
    chi: &PotentialVector,
    c: &CostMatrix,
    orientation: Orientation,
) -> CTransform {
    let (out_len, in_len) = match orientation {
        Orientation::SourceToTarget => (c.cols(), c.rows()),
        Orientation::TargetToSource => (c.rows(), c.cols()),
    };
    debug_assert_eq!(chi.len(), in_len);
    let mut values = Vec::with_capacity(out_len);
    let mut argmin = Vec::with_capacity(out_len);
    for k in 0..out_len {
        let mut best = f64::INFINITY;
        for l in 0..in_len {
            let cost = match orientation {
                Orientation::SourceToTarget => c.at(l, k),
                Orientation::TargetToSource => c.at(k, l),
            };
            let v = cost - chi.values[l];
            if v < best {
                best = v;
            }
        }
        let mut ties = Vec::new();
        for l in 0..in_len {
            let cost = match orientation {
                Orientation::SourceToTarget => c.at(l, k),
                Orientation::TargetToSource => c.at(k, l),
            };
            if cost - chi.values[l] == best {
                ties.push(l);
            }
        }
        values.push(best);
        argmin.push(ties);
    }
    CTransform { potential: PotentialVector { values }, argmin }
}

/// Largest difference quotient `|f(a) - f(b)| / |a - b|` over distinct pairs.
pub fn discrete_lipschitz_constant(values: &[f64], points: &[Vec<f64>]) -> f64 {
    let mut lip = 0.0f64;
    for a in 0..points.len() {
        for b in a + 1..points.len() {
            let d = euclidean_distance(&points[a], &points[b]);
            if d > 0.0 {
                lip = lip.max((values[a] - values[b]).abs() / d);
            }
        }
    }
    lip
}

/// Verdict of the double-transform fixpoint test `psi^cc = psi`.
#[derive(Debug, Clone)]
pub struct CConcavityReport {
    /// True iff `max |psi^cc - psi| <= tol`.
    pub c_concave: bool,
    pub max_deviation: f64,
    /// Discrete Lipschitz constant of `psi`, reported for p = 1 costs.
    pub lipschitz_constant: Option<f64>,
    /// For the quadratic cost `|x-y|^2/2`: midpoint convexity of
    /// `y -> |y|^2/2 - psi(y)` over collinear triples (None when no
    /// collinear triples exist in the support).
    pub quadratic_convexity: Option<bool>,
}

/// Checks c-concavity of `psi` (defined on `y`) by double transform.
pub fn c_concavity_check(
    psi: &PotentialVector,
    spec: &CostSpec,
    x: &[Vec<f64>],
    y: &[Vec<f64>],
    tol: f64,
) -> Result<CConcavityReport> {
    if psi.len() != y.len() {
        return Err(Error::DimensionMismatch { expected: y.len(), got: psi.len() });
    }
    let c = CostMatrix::build(spec, x, y)?;
    // psi^c lives on x, psi^cc back on y.
    let psi_c = c_transform_with_matrix(psi, &c, Orientation::TargetToSource);
    let psi_cc = c_transform_with_matrix(&psi_c.potential, &c, Orientation::SourceToTarget);
    let max_deviation = psi
        .values
        .iter()
        .zip(&psi_cc.potential.values)
        .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));

    let lipschitz_constant = match spec {
        CostSpec::Power { p } if *p == 1.0 => Some(discrete_lipschitz_constant(&psi.values, y)),
        CostSpec::ScaledPower { p } if *p == 1.0 => {
            Some(discrete_lipschitz_constant(&psi.values, y))
        }
        _ => None,
    };

    let quadratic_convexity = match spec {
        CostSpec::ScaledPower { p } if *p == 2.0 => Some(quadratic_gap_convex(&psi.values, y)),
        CostSpec::Convex { h: ConvexKernel::Quadratic } => {
            Some(quadratic_gap_convex(&psi.values, y))
        }
        _ => None,
    }
    .flatten();

    Ok(CConcavityReport {
        c_concave: max_deviation <= tol,
        max_deviation,
        lipschitz_constant,
        quadratic_convexity,
    })
}

/// Midpoint convexity of `g(y) = |y|^2/2 - psi(y)` over collinear triples.
/// Returns None when the support has no collinear triples to test.
fn quadratic_gap_convex(psi: &[f64], y: &[Vec<f64>]) -> Option<bool> {
    let g: Vec<f64> = y
        .iter()
        .zip(psi)
        .map(|(p, v)| p.iter().map(|c| c * c).sum::<f64>() / 2.0 - v)
        .collect();
    let mut tested = false;
    let n = y.len();
    for a in 0..n {
        for b in 0..n {
            for m in 0..n {
                if a == b || m == a || m == b {
                    continue;
                }
                // m collinear between a and b: y_m = (1-t) y_a + t y_b.
                let dab = euclidean_distance(&y[a], &y[b]);
                if dab == 0.0 {
                    continue;
                }
                let dam = euclidean_distance(&y[a], &y[m]);
                let dmb = euclidean_distance(&y[m], &y[b]);
                if (dam + dmb - dab).abs() > 1e-10 * (1.0 + dab) {
                    continue;
                }
                let t = dam / dab;
                if !(0.0..=1.0).contains(&t) {
                    continue;
                }
                tested = true;
                let chord = (1.0 - t) * g[a] + t * g[b];
                if g[m] > chord + 1e-9 * (1.0 + chord.abs()) {
                    return Some(false);
                }
            }
        }
    }
    if tested {
        Some(true)
    } else {
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pts(v: &[f64]) -> Vec<Vec<f64>> {
        v.iter().map(|&c| vec![c]).collect()
    }

    #[test]
    fn cost_matrix_distance() {
        let spec = CostSpec::power(1.0).unwrap();
        let c = CostMatrix::build(&spec, &pts(&[0.0, 1.0]), &pts(&[0.0, 1.0])).unwrap();
        assert_eq!(c.at(0, 0), 0.0);
        assert_eq!(c.at(0, 1), 1.0);
        assert_eq!(c.at(1, 0), 1.0);
        assert_eq!(c.at(1, 1), 0.0);
    }

    #[test]
    fn cost_matrix_scaled_power() {
        let spec = CostSpec::scaled_power(2.0).unwrap();
        let c = CostMatrix::build(&spec, &pts(&[0.0]), &pts(&[2.0])).unwrap();
        assert_eq!(c.at(0, 0), 2.0);
    }

    #[test]
    fn cost_matrix_pythagoras_exact() {
        let spec = CostSpec::power(2.0).unwrap();
        let c =
            CostMatrix::build(&spec, &[vec![0.0, 0.0]], &[vec![3.0, 4.0]]).unwrap();
        assert_eq!(c.at(0, 0), 25.0);
    }

    #[test]
    fn infinite_p_is_rejected() {
        let spec = CostSpec::power(f64::INFINITY).unwrap();
        let err = CostMatrix::build(&spec, &pts(&[0.0]), &pts(&[1.0]));
        assert!(matches!(err, Err(Error::InfiniteExponent)));
    }

    #[test]
    fn transform_of_zero_is_distance_to_support() {
        let spec = CostSpec::power(1.0).unwrap();
        let chi = PotentialVector::zeros(2);
        let out = c_transform(&chi, &spec, &pts(&[0.0, 1.0]), &pts(&[0.0, 0.5])).unwrap();
        assert_eq!(out.potential.values, vec![0.0, 0.5]);
    }

    #[test]
    fn transform_records_ties() {
        let spec = CostSpec::power(1.0).unwrap();
        let chi = PotentialVector::zeros(2);
        // y = 0.5 is equidistant from both support points.
        let out = c_transform(&chi, &spec, &pts(&[0.0, 1.0]), &pts(&[0.5])).unwrap();
        assert_eq!(out.argmin[0], vec![0, 1]);
    }

    #[test]
    fn one_lipschitz_transform_is_negation() {
        // psi(x) = min over anchors of (a_k + |x - z_k|) is 1-Lipschitz.
        let support = pts(&[0.0, 0.3, 0.55, 0.8, 1.0]);
        let anchors = pts(&[0.1, 0.7]);
        let offs = [0.2, -0.4];
        let psi: Vec<f64> = support
            .iter()
            .map(|x| {
                anchors
                    .iter()
                    .zip(offs)
                    .map(|(z, a)| a + euclidean_distance(x, z))
                    .fold(f64::INFINITY, f64::min)
            })
            .collect();
        let spec = CostSpec::power(1.0).unwrap();
        let out = c_transform(
            &PotentialVector::new(psi.clone()).unwrap(),
            &spec,
            &support,
            &support,
        )
        .unwrap();
        for (v, p) in out.potential.values.iter().zip(&psi) {
            assert!((v + p).abs() <= 1e-15, "psi^c = -psi violated: {v} vs {}", -p);
        }
    }

    #[test]
    fn triple_transform_is_idempotent() {
        let spec = CostSpec::power(2.0).unwrap();
        let x = pts(&[0.0, 0.4, 0.9]);
        let y = pts(&[0.1, 0.5, 0.7, 1.0]);
        let chi = PotentialVector::new(vec![0.3, -0.2, 0.15]).unwrap();
        let c1 = c_transform(&chi, &spec, &x, &y).unwrap();
        let c2 = c_transform(&c1.potential, &spec, &y, &x).unwrap();
        let c3 = c_transform(&c2.potential, &spec, &x, &y).unwrap();
        assert_eq!(c1.potential.values, c3.potential.values);
    }

    #[test]
    fn concavity_check_accepts_transforms() {
        let spec = CostSpec::power(1.0).unwrap();
        let x = pts(&[0.0, 0.5, 1.0]);
        let y = pts(&[0.2, 0.6, 0.9]);
        let chi = PotentialVector::new(vec![0.1, 0.3, -0.2]).unwrap();
        let psi = c_transform(&chi, &spec, &x, &y).unwrap().potential;
        let report = c_concavity_check(&psi, &spec, &x, &y, 1e-12).unwrap();
        assert!(report.c_concave);
        assert!(report.lipschitz_constant.unwrap() <= 1.0 + 1e-12);
    }

    #[test]
    fn concavity_check_rejects_fast_growth() {
        // psi(y) = |y|^2 on {0, 1, 2} has Lipschitz constant 3 > 1.
        let spec = CostSpec::power(1.0).unwrap();
        let y = pts(&[0.0, 1.0, 2.0]);
        let psi = PotentialVector::new(vec![0.0, 1.0, 4.0]).unwrap();
        let report = c_concavity_check(&psi, &spec, &y, &y, 1e-12).unwrap();
        assert!(!report.c_concave);
        assert!((report.lipschitz_constant.unwrap() - 3.0).abs() <= 1e-12);
    }

    #[test]
    fn constants_are_c_concave() {
        for spec in [
            CostSpec::power(1.0).unwrap(),
            CostSpec::power(2.0).unwrap(),
            CostSpec::scaled_power(2.0).unwrap(),
        ] {
            let y = pts(&[0.0, 0.4, 1.0]);
            let psi = PotentialVector::new(vec![0.7, 0.7, 0.7]).unwrap();
            let report = c_concavity_check(&psi, &spec, &y, &y, 1e-12).unwrap();
            assert!(report.c_concave, "constant not c-concave under {spec:?}");
        }
    }

    #[test]
    fn grad_conjugate_inverts_gradient() {
        // For h = |z|^p / p, grad h(z) = |z|^(p-2) z and grad h* inverts it.
        let h = ConvexKernel::PPower { p: 3.0 };
        let z = [0.6, -0.2];
        let nz: f64 = z.iter().map(|c| c * c).sum::<f64>().sqrt();
        let grad_h: Vec<f64> = z.iter().map(|c| nz.powf(1.0) * c).collect();
        let back = h.grad_conjugate(&grad_h);
        for (a, b) in back.iter().zip(z) {
            assert!((a - b).abs() <= 1e-12);
        }
        let quad = ConvexKernel::Quadratic;
        assert_eq!(quad.grad_conjugate(&[1.5, -0.5]), vec![1.5, -0.5]);
    }
}
