//! Wasserstein distances `W_p` and `W_inf`, their ordering inequalities,
//! and convergence diagnostics.

use crate::costs::{CostMatrix, CostSpec};
use crate::error::{Error, Result};
use crate::measures::DiscreteMeasure;
use crate::solver::{self, TransportPlan};

/// A computed distance together with the plan that realizes it.
#[derive(Debug, Clone)]
pub struct DistanceReport {
    /// Exponent; `f64::INFINITY` for the bottleneck distance.
    pub p: f64,
    pub value: f64,
    pub plan: TransportPlan,
    pub wall_time: std::time::Duration,
}

/// `W_p(mu, nu) = (optimal cost under |x-y|^p)^(1/p)`.
pub fn wasserstein_p(mu: &DiscreteMeasure, nu: &DiscreteMeasure, p: f64) -> Result<DistanceReport> {
    if !p.is_finite() || p < 1.0 {
        return Err(Error::InvalidExponent(p));
    }
    if mu.dim() != nu.dim() {
        return Err(Error::DimensionMismatch { expected: mu.dim(), got: nu.dim() });
    }
    let start = std::time::Instant::now();
    let spec = CostSpec::power(p)?;
    let cost = CostMatrix::build(&spec, &mu.points(), &nu.points())?;
    let plan = solver::solve_primal(mu, nu, &cost)?;
    let total = plan.cost_against(&cost);
    let value = if p == 1.0 { total } else { total.max(0.0).powf(1.0 / p) };
    Ok(DistanceReport { p, value, plan, wall_time: start.elapsed() })
}

/// `W_inf(mu, nu)`: minimal over plans of the largest displacement on the
/// plan's support. Delegates to the bottleneck solver.
pub fn wasserstein_inf(mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> Result<DistanceReport> {
    if mu.dim() != nu.dim() {
        return Err(Error::DimensionMismatch { expected: mu.dim(), got: nu.dim() });
    }
    let start = std::time::Instant::now();
    let (value, plan) = solver::solve_bottleneck(mu, nu)?;
    Ok(DistanceReport { p: f64::INFINITY, value, plan, wall_time: start.elapsed() })
}

/// Both sides of the ordering inequalities between two exponents:
/// `W_p1 <= W_p2 <= D^(1 - p1/p2) W_p1^(p1/p2)` on a domain of diameter D.
#[derive(Debug, Clone)]
pub struct OrderingReport {
    pub p1: f64,
    pub p2: f64,
    pub w_p1: f64,
    pub w_p2: f64,
    pub diameter: f64,
    pub upper_bound: f64,
    pub lower_ok: bool,
    pub upper_ok: bool,
}

impl OrderingReport {
    pub fn passed(&self) -> bool {
        self.lower_ok && self.upper_ok
    }
}

/// Checks the ordering inequalities with tolerance 1e-9. The diameter `d`
/// is caller-supplied (the bound is a statement about the domain) and is
/// validated against the observed support diameter.
pub fn ordering_check(
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    p1: f64,
    p2: f64,
    d: f64,
) -> Result<OrderingReport> {
    if !(1.0 <= p1 && p1 <= p2) {
        return Err(Error::InvalidExponent(p1.min(p2)));
    }
    let observed = mu.joint_diameter(nu);
    if observed > d * (1.0 + 1e-12) {
        return Err(Error::DiameterViolated { supplied: d, observed });
    }
    let w1 = wasserstein_p(mu, nu, p1)?.value;
    let w2 = wasserstein_p(mu, nu, p2)?.value;
    let upper = d.powf(1.0 - p1 / p2) * w1.powf(p1 / p2);
    let tol = 1e-9;
    Ok(OrderingReport {
        p1,
        p2,
        w_p1: w1,
        w_p2: w2,
        diameter: d,
        upper_bound: upper,
        lower_ok: w1 <= w2 + tol,
        upper_ok: w2 <= upper + tol,
    })
}

/// Per-step diagnostics for a sequence converging (or not) to a limit.
#[derive(Debug, Clone)]
pub struct ConvergenceReport {
    pub p: f64,
    pub steps: Vec<ConvergenceStep>,
}

#[derive(Debug, Clone)]
pub struct ConvergenceStep {
    pub wasserstein: f64,
    pub moment_gap: f64,
    /// `integral(phi d mu_n) - integral(phi d limit)` for the fixed panel:
    /// constant 1, each coordinate, |x|, |x|^p, and cos(xi . x) for three
    /// fixed frequencies.
    pub test_integral_gaps: Vec<f64>,
}

/// Frequencies for the oscillatory members of the test panel.
const FREQS: [f64; 3] = [1.0, 2.5, 7.0];

pub fn convergence_report(
    seq: &[DiscreteMeasure],
    limit: &DiscreteMeasure,
    p: f64,
) -> Result<ConvergenceReport> {
    if !p.is_finite() || p < 1.0 {
        return Err(Error::InvalidExponent(p));
    }
    let dim = limit.dim();
    let mut steps = Vec::with_capacity(seq.len());
    for m in seq {
        if m.dim() != dim {
            return Err(Error::DimensionMismatch { expected: dim, got: m.dim() });
        }
        let w = wasserstein_p(m, limit, p)?.value;
        let moment_gap = (m.moment_p(p)? - limit.moment_p(p)?).abs();
        let mut gaps = Vec::new();
        let panel = test_panel(dim, p);
        for phi in &panel {
            gaps.push(m.integrate(|x| phi(x)) - limit.integrate(|x| phi(x)));
        }
        steps.push(ConvergenceStep { wasserstein: w, moment_gap, test_integral_gaps: gaps });
    }
    Ok(ConvergenceReport { p, steps })
}

#[allow(clippy::type_complexity)]
fn test_panel(dim: usize, p: f64) -> Vec<Box<dyn Fn(&[f64]) -> f64>> {
    let mut panel: Vec<Box<dyn Fn(&[f64]) -> f64>> = vec![Box::new(|_| 1.0)];
    for k in 0..dim {
        panel.push(Box::new(move |x: &[f64]| x[k]));
    }
    panel.push(Box::new(|x: &[f64]| x.iter().map(|c| c * c).sum::<f64>().sqrt()));
    panel.push(Box::new(move |x: &[f64]| {
        crate::measures::pow_of_norm_sq(x.iter().map(|c| c * c).sum(), p)
    }));
    for f in FREQS {
        panel.push(Box::new(move |x: &[f64]| (f * x.iter().sum::<f64>()).cos()));
    }
    panel
}
