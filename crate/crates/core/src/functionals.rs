//! Internal-energy, potential-energy, and interaction functionals with
//! displacement-convexity reports along McCann interpolations.
//!
//! Only registered function families are accepted: arbitrary user code
//! cannot be validated against the convexity and superlinearity
//! hypotheses the theory needs, so the constructors check the registered
//! families numerically and reject everything else.

use crate::error::{Error, Result};
use crate::geodesics::geodesic_path;
use crate::measures::DiscreteMeasure;
use crate::monge_ampere::{monotone_rearrangement, Density1D};

/// Uniform 1D or 2D grid carrying a non-negative density, normalized so
/// the cell values integrate to one.
#[derive(Debug, Clone, PartialEq)]
pub struct GridDensity {
    origin: Vec<f64>,
    spacing: f64,
    counts: Vec<usize>,
    values: Vec<f64>,
}

impl GridDensity {
    pub fn new(origin: Vec<f64>, spacing: f64, counts: Vec<usize>, values: Vec<f64>) -> Result<Self> {
        let dim = origin.len();
        if dim == 0 || dim > 2 || counts.len() != dim {
            return Err(Error::DimensionMismatch { expected: counts.len(), got: dim });
        }
        if !(spacing > 0.0) {
            return Err(Error::DegenerateBox(format!("spacing {spacing}")));
        }
        let cells: usize = counts.iter().product();
        if cells == 0 || values.len() != cells {
            return Err(Error::DimensionMismatch { expected: cells, got: values.len() });
        }
        if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::SchemaViolation {
                path: "values".into(),
                message: "negative or non-finite cell".into(),
            });
        }
        let cell_volume = spacing.powi(dim as i32);
        let total: f64 = values.iter().sum::<f64>() * cell_volume;
        if total <= 0.0 {
            return Err(Error::ZeroMass(total));
        }
        let values = values.into_iter().map(|v| v / total).collect();
        Ok(Self { origin, spacing, counts, values })
    }

    pub fn dim(&self) -> usize {
        self.origin.len()
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn cell_volume(&self) -> f64 {
        self.spacing.powi(self.dim() as i32)
    }

    pub fn cell_center(&self, idx: usize) -> Vec<f64> {
        match self.dim() {
            1 => vec![self.origin[0] + (idx as f64 + 0.5) * self.spacing],
            _ => {
                let nx = self.counts[0];
                let ix = idx % nx;
                let iy = idx / nx;
                vec![
                    self.origin[0] + (ix as f64 + 0.5) * self.spacing,
                    self.origin[1] + (iy as f64 + 0.5) * self.spacing,
                ]
            }
        }
    }

    /// The grid read as an atomic measure at the cell centers.
    pub fn as_measure(&self) -> Result<DiscreteMeasure> {
        let points: Vec<Vec<f64>> = (0..self.values.len()).map(|i| self.cell_center(i)).collect();
        let weights: Vec<f64> = self.values.iter().map(|v| v * self.cell_volume()).collect();
        DiscreteMeasure::new(points, weights)
    }

    /// 1D grids convert to the strictly positive density type used by the
    /// rearrangement machinery.
    pub fn as_density_1d(&self) -> Result<Density1D> {
        if self.dim() != 1 {
            return Err(Error::DimensionMismatch { expected: 1, got: self.dim() });
        }
        let a = self.origin[0];
        let b = a + self.counts[0] as f64 * self.spacing;
        Density1D::new(a, b, self.values.clone())
    }
}

/// Registered integrands for the internal energy: `u^m` with `m > 1`, and
/// `u log u` extended by `f(0) = 0`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Integrand {
    Power { m: f64 },
    Entropy,
}

impl Integrand {
    pub fn eval(&self, u: f64) -> f64 {
        match self {
            Integrand::Power { m } => u.powf(*m),
            Integrand::Entropy => {
                if u <= 0.0 {
                    0.0
                } else {
                    u * u.ln()
                }
            }
        }
    }

    /// Numerical superlinearity probe: `f(u)/u` must grow without bound,
    /// checked on a log grid of arguments.
    pub fn is_superlinear(&self) -> bool {
        let mut prev = f64::NEG_INFINITY;
        let mut growing = true;
        for k in 0..8 {
            let u = 10f64.powi(k);
            let ratio = self.eval(u) / u;
            if ratio <= prev + 1e-12 {
                growing = false;
            }
            prev = ratio;
        }
        growing && prev > 1e3
    }

    /// Convexity probe on a log grid (midpoint rule).
    fn is_convex(&self) -> bool {
        let grid: Vec<f64> = (-6..=6).map(|k| 10f64.powf(k as f64 / 2.0)).collect();
        for w in grid.windows(3) {
            let (a, b, c) = (w[0], w[1], w[2]);
            let t = (b - a) / (c - a);
            let chord = (1.0 - t) * self.eval(a) + t * self.eval(c);
            if self.eval(b) > chord + 1e-9 * (1.0 + chord.abs()) {
                return false;
            }
        }
        true
    }
}

/// Registered convex functions for potentials `V` and interaction kernels
/// `w`: powers of the norm `|z|^q` with `q >= 1`, and positive
/// semi-definite quadratic forms `z . Q z`.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum ConvexFunction {
    PowerNorm { q: f64 },
    Quadratic { matrix: Vec<Vec<f64>> },
}

impl ConvexFunction {
    pub fn eval(&self, z: &[f64]) -> f64 {
        match self {
            ConvexFunction::PowerNorm { q } => {
                crate::measures::pow_of_norm_sq(z.iter().map(|c| c * c).sum(), *q)
            }
            ConvexFunction::Quadratic { matrix } => {
                let mut s = 0.0;
                for (row, &zi) in matrix.iter().zip(z) {
                    for (qij, &zj) in row.iter().zip(z) {
                        s += zi * qij * zj;
                    }
                }
                s
            }
        }
    }

    fn validate(&self, dim: usize) -> Result<()> {
        match self {
            ConvexFunction::PowerNorm { q } => {
                if !q.is_finite() || *q < 1.0 {
                    return Err(Error::InvalidFunctional(format!(
                        "power-norm exponent q = {q} must be >= 1"
                    )));
                }
            }
            ConvexFunction::Quadratic { matrix } => {
                if matrix.len() != dim || matrix.iter().any(|r| r.len() != dim) {
                    return Err(Error::InvalidFunctional(format!(
                        "quadratic form must be {dim}x{dim}"
                    )));
                }
                for i in 0..dim {
                    for j in 0..dim {
                        if (matrix[i][j] - matrix[j][i]).abs() > 1e-12 {
                            return Err(Error::InvalidFunctional(
                                "quadratic form must be symmetric".into(),
                            ));
                        }
                    }
                }
                for d in &sample_directions(dim) {
                    if self.eval(d) < -1e-12 {
                        return Err(Error::InvalidFunctional(
                            "quadratic form is not positive semi-definite".into(),
                        ));
                    }
                }
            }
        }
        Ok(())
    }
}

fn sample_directions(dim: usize) -> Vec<Vec<f64>> {
    let mut dirs = Vec::new();
    for k in 0..dim {
        let mut e = vec![0.0; dim];
        e[k] = 1.0;
        dirs.push(e);
    }
    if dim == 2 {
        for (a, b) in [(1.0, 1.0), (1.0, -1.0), (2.0, 1.0), (1.0, -3.0)] {
            dirs.push(vec![a, b]);
        }
    }
    // Irrational-slope directions catch indefinite forms that vanish on
    // the axes.
    if dim >= 2 {
        dirs.push((0..dim).map(|k| ((k + 1) as f64).sqrt()).collect());
        dirs.push((0..dim).map(|k| if k % 2 == 0 { 1.7 } else { -0.3 }).collect());
    }
    dirs
}

/// One of the three canonical functionals, with its hypotheses validated
/// at construction.
#[derive(Debug, Clone, PartialEq)]
pub enum FunctionalSpec {
    /// Internal energy `J1(u) = integral f(u(x)) dx`; infinite on atoms.
    InternalEnergy { f: Integrand },
    /// Potential energy `J2(mu) = integral V d mu`.
    PotentialEnergy { v: ConvexFunction, dim: usize },
    /// Interaction energy `J3(mu) = double integral w(x - y) dmu dmu`.
    InteractionEnergy { w: ConvexFunction, dim: usize },
}

impl FunctionalSpec {
    pub fn internal_energy(f: Integrand) -> Result<Self> {
        if let Integrand::Power { m } = f {
            if !m.is_finite() || m <= 1.0 {
                return Err(Error::InvalidFunctional(format!(
                    "integrand u^{m} is not superlinear; need m > 1"
                )));
            }
        }
        if !f.is_convex() {
            return Err(Error::InvalidFunctional("integrand is not convex".into()));
        }
        if !f.is_superlinear() {
            return Err(Error::InvalidFunctional("integrand is not superlinear".into()));
        }
        if f.eval(0.0) != 0.0 {
            return Err(Error::InvalidFunctional("integrand must vanish at zero".into()));
        }
        Ok(FunctionalSpec::InternalEnergy { f })
    }

    pub fn potential_energy(v: ConvexFunction, dim: usize) -> Result<Self> {
        v.validate(dim)?;
        Ok(FunctionalSpec::PotentialEnergy { v, dim })
    }

    pub fn interaction_energy(w: ConvexFunction, dim: usize) -> Result<Self> {
        w.validate(dim)?;
        Ok(FunctionalSpec::InteractionEnergy { w, dim })
    }
}

/// Input to a functional: an atomic measure or a grid density.
#[derive(Debug, Clone)]
pub enum MeasureInput<'a> {
    Atoms(&'a DiscreteMeasure),
    Grid(&'a GridDensity),
}

/// Evaluates the functional. The internal energy on an atomic input is
/// the sentinel `+inf` case, reported as an error.
pub fn eval_functional(spec: &FunctionalSpec, input: &MeasureInput) -> Result<f64> {
    match spec {
        FunctionalSpec::InternalEnergy { f } => match input {
            MeasureInput::Atoms(_) => Err(Error::NotAbsolutelyContinuous),
            MeasureInput::Grid(g) => {
                Ok(g.values().iter().map(|&u| f.eval(u)).sum::<f64>() * g.cell_volume())
            }
        },
        FunctionalSpec::PotentialEnergy { v, .. } => {
            let m;
            let measure = match input {
                MeasureInput::Atoms(m) => *m,
                MeasureInput::Grid(g) => {
                    m = g.as_measure()?;
                    &m
                }
            };
            Ok(measure.integrate(|x| v.eval(x)))
        }
        FunctionalSpec::InteractionEnergy { w, .. } => {
            let m;
            let measure = match input {
                MeasureInput::Atoms(m) => *m,
                MeasureInput::Grid(g) => {
                    m = g.as_measure()?;
                    &m
                }
            };
            let mut s = 0.0;
            for (x, wx) in measure.iter() {
                for (y, wy) in measure.iter() {
                    let z: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - b).collect();
                    s += wx * wy * w.eval(&z);
                }
            }
            Ok(s)
        }
    }
}

/// Verdict of the geometry condition on `f` for internal-energy
/// displacement convexity: `r -> r^d f(r^-d)` convex and non-increasing.
#[derive(Debug, Clone)]
pub struct McCannConditionReport {
    pub non_increasing: bool,
    pub midpoint_convex: bool,
    /// Precondition on `f` itself; failure here does not change the two
    /// geometry verdicts but flags the hypothesis violation.
    pub superlinear: bool,
    pub max_monotonicity_violation: f64,
    pub max_convexity_violation: f64,
}

impl McCannConditionReport {
    pub fn holds(&self) -> bool {
        self.non_increasing && self.midpoint_convex
    }
}

/// Evaluates `g(r) = r^d f(r^-d)` on the supplied grid and reports
/// monotonicity (finite differences) and midpoint convexity on
/// consecutive triples.
pub fn mccann_condition_check(
    f: &Integrand,
    dim: usize,
    r_grid: &[f64],
) -> Result<McCannConditionReport> {
    if r_grid.len() < 5 {
        return Err(Error::InvalidFunctional("r grid needs at least 5 points".into()));
    }
    if r_grid.windows(2).any(|w| w[1] <= w[0]) || r_grid[0] <= 0.0 {
        return Err(Error::InvalidFunctional("r grid must be positive and sorted".into()));
    }
    if r_grid[r_grid.len() - 1] / r_grid[0] < 100.0 {
        return Err(Error::InvalidFunctional("r grid must span at least two decades".into()));
    }
    let d = dim as f64;
    let g: Vec<f64> = r_grid.iter().map(|&r| r.powf(d) * f.eval(r.powf(-d))).collect();

    let mut max_mono = 0.0f64;
    for w in g.windows(2) {
        max_mono = max_mono.max(w[1] - w[0]);
    }
    let mut max_conv = 0.0f64;
    for k in 0..g.len() - 2 {
        let (r1, r2, r3) = (r_grid[k], r_grid[k + 1], r_grid[k + 2]);
        let t = (r2 - r1) / (r3 - r1);
        let chord = (1.0 - t) * g[k] + t * g[k + 2];
        max_conv = max_conv.max(g[k + 1] - chord);
    }
    Ok(McCannConditionReport {
        non_increasing: max_mono <= 1e-12,
        midpoint_convex: max_conv <= 1e-9 * (1.0 + g.iter().fold(0.0f64, |m, v| m.max(v.abs()))),
        superlinear: f.is_superlinear(),
        max_monotonicity_violation: max_mono,
        max_convexity_violation: max_conv,
    })
}

/// Samples of `F(mu(t))` along a displacement interpolation with all
/// second differences.
#[derive(Debug, Clone)]
pub struct ConvexityReport {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    pub second_differences: Vec<f64>,
    pub tol: f64,
    pub convex: bool,
}

fn second_difference_report(times: Vec<f64>, values: Vec<f64>, base_tol: f64) -> ConvexityReport {
    let max_abs = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let tol = base_tol * (1.0 + max_abs);
    let mut second_differences = Vec::with_capacity(values.len().saturating_sub(2));
    for k in 1..values.len().saturating_sub(1) {
        second_differences.push(values[k - 1] - 2.0 * values[k] + values[k + 1]);
    }
    let convex = second_differences.iter().all(|&d| d >= -tol);
    ConvexityReport { times, values, second_differences, tol, convex }
}

/// Samples `F(mu^gamma(t))` at `k` equispaced times along the optimal
/// interpolation for `|x-y|^p` between two atomic measures.
pub fn convexity_report_atoms(
    spec: &FunctionalSpec,
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    p: f64,
    k: usize,
) -> Result<ConvexityReport> {
    if k < 5 {
        return Err(Error::OutOfRange(k as f64));
    }
    if matches!(spec, FunctionalSpec::InternalEnergy { .. }) {
        return Err(Error::NotAbsolutelyContinuous);
    }
    let path = geodesic_path(mu, nu, p, k)?;
    let mut times = Vec::with_capacity(k);
    let mut values = Vec::with_capacity(k);
    for (t, m) in &path.samples {
        times.push(*t);
        values.push(eval_functional(spec, &MeasureInput::Atoms(m))?);
    }
    Ok(second_difference_report(times, values, 1e-8))
}

/// Samples the internal energy along the 1D displacement interpolation of
/// two grid densities, computed through the monotone transport map and
/// the change-of-variables formula (so intermediate densities exist
/// without re-gridding):
/// `J1(t) = sum_i f(u_i / J_i(t)) J_i(t) h` with
/// `J_i(t) = (1 - t) + t T'(x_i)` and `T' = u / v(T)`.
pub fn convexity_report_grid_1d(
    f: &Integrand,
    u: &GridDensity,
    v: &GridDensity,
    k: usize,
) -> Result<ConvexityReport> {
    if k < 5 {
        return Err(Error::OutOfRange(k as f64));
    }
    let du = u.as_density_1d()?;
    let dv = v.as_density_1d()?;
    let map = monotone_rearrangement(&du, &dv)?;
    let h = du.h();
    let n = du.len();
    let jacobian: Vec<f64> =
        (0..n).map(|i| du.value(i) / dv.value_at(map.values()[i])).collect();
    let mut times = Vec::with_capacity(k);
    let mut values = Vec::with_capacity(k);
    for step in 0..k {
        let t = if step == k - 1 { 1.0 } else { step as f64 / (k - 1) as f64 };
        let mut total = 0.0;
        for i in 0..n {
            let jt = (1.0 - t) + t * jacobian[i];
            total += f.eval(du.value(i) / jt) * jt * h;
        }
        times.push(t);
        values.push(total);
    }
    Ok(second_difference_report(times, values, 1e-8))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(points: &[f64], weights: &[f64]) -> DiscreteMeasure {
        DiscreteMeasure::new(points.iter().map(|&x| vec![x]).collect(), weights.to_vec())
            .unwrap()
    }

    #[test]
    fn potential_energy_of_dirac() {
        let spec = FunctionalSpec::potential_energy(ConvexFunction::PowerNorm { q: 2.0 }, 2)
            .unwrap();
        let m = DiscreteMeasure::dirac(vec![3.0, 4.0]).unwrap();
        assert_eq!(eval_functional(&spec, &MeasureInput::Atoms(&m)).unwrap(), 25.0);
    }

    #[test]
    fn interaction_energy_of_single_atom_is_zero() {
        let spec = FunctionalSpec::interaction_energy(ConvexFunction::PowerNorm { q: 2.0 }, 1)
            .unwrap();
        let m = DiscreteMeasure::dirac(vec![5.0]).unwrap();
        assert_eq!(eval_functional(&spec, &MeasureInput::Atoms(&m)).unwrap(), 0.0);
    }

    #[test]
    fn internal_energy_of_uniform_density() {
        // f(u) = u^2 on the uniform density over [0,1]: integral is 1.
        let f = Integrand::Power { m: 2.0 };
        let spec = FunctionalSpec::internal_energy(f).unwrap();
        let g = GridDensity::new(vec![0.0], 0.01, vec![100], vec![1.0; 100]).unwrap();
        let val = eval_functional(&spec, &MeasureInput::Grid(&g)).unwrap();
        assert!((val - 1.0).abs() <= 1e-12, "{val}");
    }

    #[test]
    fn internal_energy_rejects_atoms() {
        let spec = FunctionalSpec::internal_energy(Integrand::Power { m: 2.0 }).unwrap();
        let m = DiscreteMeasure::dirac(vec![0.0]).unwrap();
        assert!(matches!(
            eval_functional(&spec, &MeasureInput::Atoms(&m)),
            Err(Error::NotAbsolutelyContinuous)
        ));
    }

    #[test]
    fn linear_integrand_is_rejected() {
        assert!(FunctionalSpec::internal_energy(Integrand::Power { m: 1.0 }).is_err());
        assert!(FunctionalSpec::internal_energy(Integrand::Entropy).is_ok());
    }

    #[test]
    fn indefinite_quadratic_is_rejected() {
        let q = ConvexFunction::Quadratic { matrix: vec![vec![1.0, 0.0], vec![0.0, -1.0]] };
        assert!(FunctionalSpec::potential_energy(q, 2).is_err());
        let ok = ConvexFunction::Quadratic { matrix: vec![vec![2.0, 0.5], vec![0.5, 1.0]] };
        assert!(FunctionalSpec::potential_energy(ok, 2).is_ok());
    }

    #[test]
    fn j2_is_linear_in_the_measure() {
        let spec = FunctionalSpec::potential_energy(ConvexFunction::PowerNorm { q: 2.0 }, 1)
            .unwrap();
        let a = line(&[0.0, 1.0], &[0.5, 0.5]);
        let b = line(&[2.0], &[1.0]);
        let mixed = line(&[0.0, 1.0, 2.0], &[0.25, 0.25, 0.5]);
        let ja = eval_functional(&spec, &MeasureInput::Atoms(&a)).unwrap();
        let jb = eval_functional(&spec, &MeasureInput::Atoms(&b)).unwrap();
        let jm = eval_functional(&spec, &MeasureInput::Atoms(&mixed)).unwrap();
        assert!((jm - 0.5 * (ja + jb)).abs() <= 1e-12);
    }

    #[test]
    fn mccann_condition_for_registered_family() {
        let grid: Vec<f64> = (0..20).map(|k| 10f64.powf(-1.5 + k as f64 * 0.2)).collect();
        for d in [1usize, 2, 3] {
            for m in [1.5, 2.0, 3.0] {
                let rep = mccann_condition_check(&Integrand::Power { m }, d, &grid).unwrap();
                assert!(rep.holds(), "u^{m} in d={d}: {rep:?}");
                assert!(rep.superlinear);
            }
            let rep = mccann_condition_check(&Integrand::Entropy, d, &grid).unwrap();
            assert!(rep.holds(), "entropy in d={d}: {rep:?}");
        }
    }

    #[test]
    fn mccann_condition_flags_linear_precondition() {
        // f(u) = u gives g(r) = 1: monotone and convex, but not superlinear.
        let grid: Vec<f64> = (0..20).map(|k| 10f64.powf(-1.5 + k as f64 * 0.2)).collect();
        let rep = mccann_condition_check(&Integrand::Power { m: 1.0 }, 2, &grid).unwrap();
        assert!(rep.holds());
        assert!(!rep.superlinear);
    }

    #[test]
    fn dirac_to_dirac_quadratic_potential() {
        // F(t) = t^2 along d_0 -> d_1 under V(x) = x^2.
        let spec = FunctionalSpec::potential_energy(ConvexFunction::PowerNorm { q: 2.0 }, 1)
            .unwrap();
        let mu = DiscreteMeasure::dirac(vec![0.0]).unwrap();
        let nu = DiscreteMeasure::dirac(vec![1.0]).unwrap();
        let rep = convexity_report_atoms(&spec, &mu, &nu, 2.0, 11).unwrap();
        assert!(rep.convex);
        let dt = 0.1f64;
        for d in &rep.second_differences {
            assert!((d - 2.0 * dt * dt).abs() <= 1e-12, "{d}");
        }
    }

    #[test]
    fn interaction_on_single_trajectory_is_flat() {
        let spec = FunctionalSpec::interaction_energy(ConvexFunction::PowerNorm { q: 2.0 }, 1)
            .unwrap();
        let mu = DiscreteMeasure::dirac(vec![0.0]).unwrap();
        let nu = DiscreteMeasure::dirac(vec![1.0]).unwrap();
        let rep = convexity_report_atoms(&spec, &mu, &nu, 2.0, 9).unwrap();
        assert!(rep.convex);
        assert!(rep.values.iter().all(|&v| v.abs() <= 1e-15));
    }

    #[test]
    fn internal_energy_along_dilation_matches_closed_form() {
        // uniform[0,1] -> uniform[0,2] with f(u) = u^2: F(t) = 1/(1+t).
        let f = Integrand::Power { m: 2.0 };
        let u = GridDensity::new(vec![0.0], 1.0 / 64.0, vec![64], vec![1.0; 64]).unwrap();
        let v = GridDensity::new(vec![0.0], 2.0 / 64.0, vec![64], vec![0.5; 64]).unwrap();
        let rep = convexity_report_grid_1d(&f, &u, &v, 9).unwrap();
        assert!(rep.convex, "{:?}", rep.second_differences);
        for (t, val) in rep.times.iter().zip(&rep.values) {
            let expect = 1.0 / (1.0 + t);
            assert!((val - expect).abs() <= 1e-10, "t = {t}: {val} vs {expect}");
        }
    }
}
