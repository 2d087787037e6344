//! Displacement interpolation and the surrounding curve calculus:
//! constant-speed geodesics, metric derivatives, discrete velocity fields,
//! and weak-form continuity-equation residuals.

use crate::costs::{CostMatrix, CostSpec};
use crate::error::{Error, Result};
use crate::measures::{DiscreteMeasure, MERGE_TOL};
use crate::solver::{self, MapExtraction, TransportPlan};
use crate::wasserstein::wasserstein_p;

/// Position of plan entry `(i, j)` at interpolation time `s`.
fn interpolated_point(x: &[f64], y: &[f64], s: f64) -> Vec<f64> {
    if s == 0.0 {
        x.to_vec()
    } else if s == 1.0 {
        // Endpoint identity must be exact, not `x + (y - x)`.
        y.to_vec()
    } else {
        x.iter().zip(y).map(|(a, b)| a + s * (b - a)).collect()
    }
}

/// The measure `(p_s)#gamma` with `p_s(x, y) = x + s(y - x)`: atoms at the
/// interpolated positions carrying the plan masses, merged on collision.
pub fn mccann_interpolate(gamma: &TransportPlan, s: f64) -> Result<DiscreteMeasure> {
    Ok(interpolate_with_provenance(gamma, s)?.0)
}

/// Interpolation plus, per plan entry, the index of the merged atom that
/// ended up carrying it. The provenance keeps velocity bookkeeping exact
/// when trajectories collide.
fn interpolate_with_provenance(
    gamma: &TransportPlan,
    s: f64,
) -> Result<(DiscreteMeasure, Vec<usize>)> {
    if !(0.0..=1.0).contains(&s) {
        return Err(Error::OutOfRange(s));
    }
    let mu = gamma.source();
    let nu = gamma.target();
    let mut points: Vec<Vec<f64>> = Vec::with_capacity(gamma.entries().len());
    let mut weights: Vec<f64> = Vec::with_capacity(gamma.entries().len());
    let mut slot: Vec<usize> = Vec::with_capacity(gamma.entries().len());
    'entries: for &(i, j, mass) in gamma.entries() {
        let z = interpolated_point(mu.point(i), nu.point(j), s);
        for (k, existing) in points.iter().enumerate() {
            if existing.iter().zip(&z).all(|(a, b)| (a - b).abs() <= MERGE_TOL) {
                weights[k] += mass;
                slot.push(k);
                continue 'entries;
            }
        }
        slot.push(points.len());
        points.push(z);
        weights.push(mass);
    }
    let measure = DiscreteMeasure::new(points, weights)?;
    Ok((measure, slot))
}

/// A sampled displacement interpolation between two measures.
#[derive(Debug, Clone)]
pub struct InterpolationPath {
    pub gamma: TransportPlan,
    pub p: f64,
    /// Strictly increasing times in [0, 1] with the interpolated measures.
    pub samples: Vec<(f64, DiscreteMeasure)>,
    /// For p = 1 the geodesic is not unique; the path is still produced
    /// but flagged as one representative among many.
    pub canonical: bool,
    /// Per sample, per plan entry: index of the atom carrying that entry.
    provenance: Vec<Vec<usize>>,
}

/// Solves for an optimal plan under `|x-y|^p` and samples the McCann
/// interpolation at `k` equispaced times (endpoints included).
pub fn geodesic_path(
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    p: f64,
    k: usize,
) -> Result<InterpolationPath> {
    if !p.is_finite() || p < 1.0 {
        return Err(Error::InvalidExponent(p));
    }
    if k < 2 {
        return Err(Error::OutOfRange(k as f64));
    }
    let spec = CostSpec::power(p)?;
    let cost = CostMatrix::build(&spec, &mu.points(), &nu.points())?;
    let gamma = solver::solve_primal(mu, nu, &cost)?;
    path_from_plan(gamma, p, k)
}

/// Samples an existing plan at `k` equispaced times.
pub fn path_from_plan(gamma: TransportPlan, p: f64, k: usize) -> Result<InterpolationPath> {
    let mut samples = Vec::with_capacity(k);
    let mut provenance = Vec::with_capacity(k);
    for step in 0..k {
        let s = if step == k - 1 { 1.0 } else { step as f64 / (k - 1) as f64 };
        let (measure, slots) = interpolate_with_provenance(&gamma, s)?;
        samples.push((s, measure));
        provenance.push(slots);
    }
    Ok(InterpolationPath { gamma, p, samples, canonical: p > 1.0, provenance })
}

impl InterpolationPath {
    /// Plan-tangent velocity assignments at every sample: entry `(i, j)`
    /// moves with the constant vector `y_j - x_i`.
    pub fn velocities(&self) -> Vec<VelocityAssignment> {
        let mu = self.gamma.source();
        let nu = self.gamma.target();
        self.samples
            .iter()
            .zip(&self.provenance)
            .map(|((_, measure), slots)| {
                let mut entries = Vec::with_capacity(self.gamma.entries().len());
                for (e, &(i, j, mass)) in self.gamma.entries().iter().enumerate() {
                    let v: Vec<f64> =
                        mu.point(i).iter().zip(nu.point(j)).map(|(a, b)| b - a).collect();
                    entries.push(VelocityEntry { atom: slots[e], vector: v, mass });
                }
                let per_atom = per_atom_structure(&entries, measure.len());
                let lp_norm = lp_norm_of(&entries, self.p);
                VelocityAssignment {
                    base: measure.clone(),
                    entries,
                    p: self.p,
                    lp_norm,
                    map_induced: per_atom,
                }
            })
            .collect()
    }

    /// Central-difference metric derivative at an interior sample:
    /// `W_p(mu(t-h), mu(t+h)) / (2h)` over the adjacent samples.
    pub fn metric_derivative(&self, index: usize) -> Result<f64> {
        if index == 0 || index + 1 >= self.samples.len() {
            return Err(Error::BoundaryIndex { index, len: self.samples.len() });
        }
        let (s_prev, ref m_prev) = self.samples[index - 1];
        let (s_next, ref m_next) = self.samples[index + 1];
        let w = wasserstein_p(m_prev, m_next, self.p)?.value;
        Ok(w / (s_next - s_prev))
    }
}

/// One unit of transported mass with its velocity vector, attached to an
/// atom of the base measure.
#[derive(Debug, Clone)]
pub struct VelocityEntry {
    pub atom: usize,
    pub vector: Vec<f64>,
    pub mass: f64,
}

/// A velocity field along a curve of measures at one time.
#[derive(Debug, Clone)]
pub struct VelocityAssignment {
    pub base: DiscreteMeasure,
    pub entries: Vec<VelocityEntry>,
    pub p: f64,
    /// `(sum_k mass_k |v_k|^p)^(1/p)`. Equals `W_p(mu_t, mu_{t+h}) / h`
    /// when the step is map-induced; an upper bound otherwise.
    pub lp_norm: f64,
    /// True when every atom carries a single velocity vector.
    pub map_induced: bool,
}

fn per_atom_structure(entries: &[VelocityEntry], atoms: usize) -> bool {
    let mut count = vec![0usize; atoms];
    for e in entries {
        count[e.atom] += 1;
    }
    count.iter().all(|&c| c == 1)
}

fn lp_norm_of(entries: &[VelocityEntry], p: f64) -> f64 {
    let total: f64 = entries
        .iter()
        .map(|e| {
            let sq: f64 = e.vector.iter().map(|c| c * c).sum();
            e.mass * crate::measures::pow_of_norm_sq(sq, p)
        })
        .sum();
    if p == 1.0 {
        total
    } else {
        total.max(0.0).powf(1.0 / p)
    }
}

/// Velocity of the optimal motion from `mu_t` to `mu_th` over a step `h`:
/// `v(x) = (T(x) - x) / h` when the optimal plan is a map. When mass
/// splits, per-entry velocities are reported and `map_induced` is false.
pub fn discrete_velocity(
    mu_t: &DiscreteMeasure,
    mu_th: &DiscreteMeasure,
    h: f64,
    p: f64,
) -> Result<VelocityAssignment> {
    if !(h > 0.0) {
        return Err(Error::ZeroStep(h));
    }
    if !p.is_finite() || p <= 1.0 {
        return Err(Error::InvalidExponent(p));
    }
    let spec = CostSpec::power(p)?;
    let cost = CostMatrix::build(&spec, &mu_t.points(), &mu_th.points())?;
    let plan = solver::solve_primal(mu_t, mu_th, &cost)?;
    let map_induced = matches!(solver::extract_map(&plan), MapExtraction::Map(_));
    let entries: Vec<VelocityEntry> = plan
        .entries()
        .iter()
        .map(|&(i, j, mass)| {
            let v: Vec<f64> = mu_t
                .point(i)
                .iter()
                .zip(mu_th.point(j))
                .map(|(a, b)| (b - a) / h)
                .collect();
            VelocityEntry { atom: i, vector: v, mass }
        })
        .collect();
    let lp_norm = lp_norm_of(&entries, p);
    Ok(VelocityAssignment { base: mu_t.clone(), entries, p, lp_norm, map_induced })
}

/// A smooth test function with its gradient, for weak-form residuals.
pub struct TestFunction {
    pub name: String,
    pub f: Box<dyn Fn(&[f64]) -> f64 + Sync>,
    pub grad: Box<dyn Fn(&[f64]) -> Vec<f64> + Sync>,
}

/// Standard panel: coordinates, quadratic monomials, and three fixed
/// Gaussian bumps.
pub fn standard_test_panel(dim: usize) -> Vec<TestFunction> {
    let mut panel = Vec::new();
    for k in 0..dim {
        panel.push(TestFunction {
            name: format!("x{k}"),
            f: Box::new(move |x: &[f64]| x[k]),
            grad: Box::new(move |x: &[f64]| {
                let mut g = vec![0.0; x.len()];
                g[k] = 1.0;
                g
            }),
        });
    }
    for a in 0..dim {
        for b in a..dim {
            panel.push(TestFunction {
                name: format!("x{a}*x{b}"),
                f: Box::new(move |x: &[f64]| x[a] * x[b]),
                grad: Box::new(move |x: &[f64]| {
                    let mut g = vec![0.0; x.len()];
                    g[a] += x[b];
                    g[b] += x[a];
                    g
                }),
            });
        }
    }
    let centers = [0.2, -0.3, 0.7];
    let sigma = 0.8;
    for (idx, c) in centers.into_iter().enumerate() {
        panel.push(TestFunction {
            name: format!("bump{idx}"),
            f: Box::new(move |x: &[f64]| {
                let sq: f64 = x.iter().map(|v| (v - c) * (v - c)).sum();
                (-sq / (2.0 * sigma * sigma)).exp()
            }),
            grad: Box::new(move |x: &[f64]| {
                let sq: f64 = x.iter().map(|v| (v - c) * (v - c)).sum();
                let e = (-sq / (2.0 * sigma * sigma)).exp();
                x.iter().map(|v| -e * (v - c) / (sigma * sigma)).collect()
            }),
        });
    }
    panel
}

/// Weak-form continuity-equation residuals along a sampled path.
#[derive(Debug, Clone)]
pub struct ResidualTable {
    pub rows: Vec<ResidualRow>,
}

#[derive(Debug, Clone)]
pub struct ResidualRow {
    pub name: String,
    /// Signed residual of each adjacent sample pair.
    pub per_step: Vec<f64>,
    /// `max |r|` over the steps.
    pub max_abs: f64,
    /// Signed residual over the whole path; equals the composite-trapezoid
    /// defect on [0, 1] because the per-step left sides telescope.
    pub total: f64,
}

/// For each test function and each adjacent sample pair, the defect of
/// `integral(phi) d mu_{t2} - integral(phi) d mu_{t1}` against the
/// trapezoid rule applied to `integral(grad phi . v) d mu_s`.
pub fn continuity_residual(
    path: &InterpolationPath,
    velocities: &[VelocityAssignment],
    panel: &[TestFunction],
) -> Result<ResidualTable> {
    if velocities.len() != path.samples.len() {
        return Err(Error::MisalignedSamples(format!(
            "{} velocity assignments for {} samples",
            velocities.len(),
            path.samples.len()
        )));
    }
    for ((_, m), v) in path.samples.iter().zip(velocities) {
        if v.base.len() != m.len() {
            return Err(Error::MisalignedSamples(
                "velocity base does not match the sample measure".into(),
            ));
        }
    }
    let mut rows = Vec::with_capacity(panel.len());
    for tf in panel {
        let flux: Vec<f64> = velocities
            .iter()
            .map(|va| {
                va.entries
                    .iter()
                    .map(|e| {
                        let g = (tf.grad)(va.base.point(e.atom));
                        e.mass * g.iter().zip(&e.vector).map(|(a, b)| a * b).sum::<f64>()
                    })
                    .sum()
            })
            .collect();
        let mut per_step = Vec::with_capacity(path.samples.len() - 1);
        for w in 0..path.samples.len() - 1 {
            let (t1, ref m1) = path.samples[w];
            let (t2, ref m2) = path.samples[w + 1];
            let lhs = m2.integrate(|x| (tf.f)(x)) - m1.integrate(|x| (tf.f)(x));
            let rhs = 0.5 * (t2 - t1) * (flux[w] + flux[w + 1]);
            per_step.push(lhs - rhs);
        }
        let max_abs = per_step.iter().fold(0.0f64, |m, r| m.max(r.abs()));
        let total = per_step.iter().sum();
        rows.push(ResidualRow { name: tf.name.clone(), per_step, max_abs, total });
    }
    Ok(ResidualTable { rows })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(points: &[f64], weights: &[f64]) -> DiscreteMeasure {
        DiscreteMeasure::new(points.iter().map(|&x| vec![x]).collect(), weights.to_vec())
            .unwrap()
    }

    #[test]
    fn endpoints_are_exact() {
        let mu = line(&[0.0, 0.3], &[0.5, 0.5]);
        let nu = line(&[0.7, 1.0], &[0.25, 0.75]);
        let path = geodesic_path(&mu, &nu, 2.0, 5).unwrap();
        assert!(path.samples[0].1.approx_eq(&mu, 0.0));
        assert!(path.samples[4].1.approx_eq(&nu, 0.0));
    }

    #[test]
    fn dirac_line_midpoint() {
        let mu = DiscreteMeasure::dirac(vec![0.0]).unwrap();
        let nu = DiscreteMeasure::dirac(vec![1.0]).unwrap();
        let path = geodesic_path(&mu, &nu, 2.0, 5).unwrap();
        let expect = [0.0, 0.25, 0.5, 0.75, 1.0];
        for (k, (s, m)) in path.samples.iter().enumerate() {
            assert_eq!(*s, expect[k]);
            assert!((m.point(0)[0] - expect[k]).abs() <= 1e-15);
        }
    }

    #[test]
    fn split_interpolation() {
        let mu = DiscreteMeasure::dirac(vec![0.0]).unwrap();
        let nu = line(&[-1.0, 1.0], &[0.5, 0.5]);
        let plan = TransportPlan::from_parts(
            vec![(0, 0, 0.5), (0, 1, 0.5)],
            mu,
            nu,
        )
        .unwrap();
        let mid = mccann_interpolate(&plan, 0.5).unwrap();
        let expect = line(&[-0.5, 0.5], &[0.5, 0.5]);
        assert!(mid.approx_eq(&expect, 1e-15));
    }

    #[test]
    fn constant_speed_on_random_pair() {
        let mu = line(&[0.0, 0.2, 0.9, 1.3], &[0.1, 0.4, 0.3, 0.2]);
        let nu = line(&[0.5, 1.1, 2.0], &[0.5, 0.2, 0.3]);
        let p = 2.0;
        let w = wasserstein_p(&mu, &nu, p).unwrap().value;
        let path = geodesic_path(&mu, &nu, p, 6).unwrap();
        for a in 0..path.samples.len() {
            for b in a + 1..path.samples.len() {
                let (s, ref ms) = path.samples[a];
                let (t, ref mt) = path.samples[b];
                let d = wasserstein_p(ms, mt, p).unwrap().value;
                assert!(
                    (d - (t - s) * w).abs() <= 1e-8 * (1.0 + w),
                    "samples {a},{b}: {d} vs {}",
                    (t - s) * w
                );
            }
        }
    }

    #[test]
    fn constant_path_has_zero_speed() {
        let mu = line(&[0.0, 1.0], &[0.5, 0.5]);
        let path = geodesic_path(&mu, &mu, 2.0, 4).unwrap();
        for (_, m) in &path.samples {
            assert!(m.approx_eq(&mu, 1e-15));
        }
        assert!(path.metric_derivative(1).unwrap() <= 1e-15);
    }

    #[test]
    fn metric_derivative_of_unit_speed_line() {
        let mu = DiscreteMeasure::dirac(vec![0.0]).unwrap();
        let nu = DiscreteMeasure::dirac(vec![1.0]).unwrap();
        let path = geodesic_path(&mu, &nu, 2.0, 9).unwrap();
        for idx in 1..8 {
            assert!((path.metric_derivative(idx).unwrap() - 1.0).abs() <= 1e-12);
        }
        assert!(matches!(path.metric_derivative(0), Err(Error::BoundaryIndex { .. })));
        assert!(matches!(path.metric_derivative(8), Err(Error::BoundaryIndex { .. })));
    }

    #[test]
    fn quadratic_reparametrization_scales_the_derivative() {
        // Sampling a Dirac line at s = t^2 gives metric derivative ~ 2t W.
        let mu = DiscreteMeasure::dirac(vec![0.0]).unwrap();
        let nu = DiscreteMeasure::dirac(vec![1.0]).unwrap();
        let spec = CostSpec::power(2.0).unwrap();
        let cost = CostMatrix::build(&spec, &mu.points(), &nu.points()).unwrap();
        let gamma = solver::solve_primal(&mu, &nu, &cost).unwrap();
        let k = 21;
        let mut samples = Vec::new();
        let mut provenance = Vec::new();
        for step in 0..k {
            let t = step as f64 / (k - 1) as f64;
            let (m, slots) = interpolate_with_provenance(&gamma, t * t).unwrap();
            samples.push((t, m));
            provenance.push(slots);
        }
        let path =
            InterpolationPath { gamma, p: 2.0, samples, canonical: true, provenance };
        for idx in [5usize, 10, 15] {
            let t = idx as f64 / (k - 1) as f64;
            let md = path.metric_derivative(idx).unwrap();
            assert!((md - 2.0 * t).abs() <= 1e-3, "t = {t}: {md}");
        }
    }

    #[test]
    fn translation_velocity_is_the_shift() {
        let mu = line(&[0.0, 0.4, 1.0], &[0.3, 0.3, 0.4]);
        let shift = 0.25;
        let pts: Vec<Vec<f64>> = mu.points().iter().map(|p| vec![p[0] + shift]).collect();
        let nu = DiscreteMeasure::new(pts, mu.weights().to_vec()).unwrap();
        let va = discrete_velocity(&mu, &nu, 1.0, 2.0).unwrap();
        assert!(va.map_induced);
        for e in &va.entries {
            assert!((e.vector[0] - shift).abs() <= 1e-12);
        }
        assert!((va.lp_norm - shift).abs() <= 1e-12);
    }

    #[test]
    fn zero_step_and_identical_measures() {
        let mu = line(&[0.0, 1.0], &[0.5, 0.5]);
        assert!(matches!(discrete_velocity(&mu, &mu, 0.0, 2.0), Err(Error::ZeroStep(_))));
        let va = discrete_velocity(&mu, &mu, 0.5, 2.0).unwrap();
        assert_eq!(va.lp_norm, 0.0);
    }

    #[test]
    fn velocity_norm_matches_distance_on_geodesic_steps() {
        let mu = line(&[0.0, 0.3, 1.1], &[0.2, 0.5, 0.3]);
        let nu = line(&[0.6, 1.4], &[0.5, 0.5]);
        let path = geodesic_path(&mu, &nu, 2.0, 5).unwrap();
        for w in path.samples.windows(2) {
            let (s, ref ms) = w[0];
            let (t, ref mt) = w[1];
            let h = t - s;
            let va = discrete_velocity(ms, mt, h, 2.0).unwrap();
            let wp = wasserstein_p(ms, mt, 2.0).unwrap().value;
            if va.map_induced {
                assert!((va.lp_norm - wp / h).abs() <= 1e-9 * (1.0 + wp / h));
            }
        }
    }

    #[test]
    fn residuals_vanish_for_constant_path() {
        let mu = line(&[0.1, 0.8], &[0.5, 0.5]);
        let path = geodesic_path(&mu, &mu, 2.0, 4).unwrap();
        let vels = path.velocities();
        let panel = standard_test_panel(1);
        let table = continuity_residual(&path, &vels, &panel).unwrap();
        for row in &table.rows {
            assert!(row.max_abs <= 1e-15, "{}: {}", row.name, row.max_abs);
        }
    }

    #[test]
    fn linear_test_function_is_exact_on_dirac_line() {
        let mu = DiscreteMeasure::dirac(vec![0.0]).unwrap();
        let nu = DiscreteMeasure::dirac(vec![1.0]).unwrap();
        let path = geodesic_path(&mu, &nu, 2.0, 6).unwrap();
        let vels = path.velocities();
        let panel = standard_test_panel(1);
        let table = continuity_residual(&path, &vels, &panel).unwrap();
        let row = table.rows.iter().find(|r| r.name == "x0").unwrap();
        assert!(row.max_abs <= 1e-15);
    }

    #[test]
    fn bump_residual_refines_at_second_order() {
        let mu = line(&[0.0, 0.2, 0.9, 1.3], &[0.1, 0.4, 0.3, 0.2]);
        let nu = line(&[0.5, 1.1, 2.0], &[0.5, 0.2, 0.3]);
        let mut totals = Vec::new();
        for k in [9usize, 17, 33] {
            let path = geodesic_path(&mu, &nu, 2.0, k).unwrap();
            let vels = path.velocities();
            let panel = standard_test_panel(1);
            let table = continuity_residual(&path, &vels, &panel).unwrap();
            let bump = table.rows.iter().find(|r| r.name == "bump0").unwrap();
            totals.push(bump.total.abs());
        }
        for w in totals.windows(2) {
            let ratio = w[0] / w[1];
            assert!((3.4..=4.6).contains(&ratio), "ratio {ratio}, totals {totals:?}");
        }
    }

    #[test]
    fn p_one_paths_are_flagged() {
        let mu = line(&[0.0], &[1.0]);
        let nu = line(&[1.0], &[1.0]);
        let path = geodesic_path(&mu, &nu, 1.0, 3).unwrap();
        assert!(!path.canonical);
        assert!(geodesic_path(&mu, &nu, 0.5, 3).is_err());
    }
}
