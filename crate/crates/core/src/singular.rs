//! Regularized continuation with damped Newton for −div(A∇u) = σ/u^λ, the
//! functional J, and the a-priori bounds on the solution.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{FeFunction, Mesh};
use crate::measures::DiscreteMeasure;
use crate::operators::{
    assemble_stiffness, element_slots, norm2, norm_inf, CoefficientField, CsrMatrix, LinearBackend,
};
use crate::potential;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverOptions {
    /// Initial regularization ε₀.
    pub eps0: f64,
    /// Ratio between successive regularizations.
    pub decay: f64,
    /// Continuation stops once ε falls below this value.
    pub eps_min: f64,
    /// Newton tolerance on the residual ∞-norm, relative to max(1, ‖N_ε(u)‖∞).
    pub tol: f64,
    pub max_newton: usize,
    /// Diagnostic floor for reporting the smallest interior value.
    pub u_min: f64,
    /// Finish with an unregularized (ε = 0) Newton stage.
    pub exact_final_stage: bool,
    pub backend: LinearBackend,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            eps0: 1.0,
            decay: 0.25,
            eps_min: 1e-12,
            tol: 1e-11,
            max_newton: 50,
            u_min: 1e-300,
            exact_final_stage: true,
            backend: LinearBackend::Direct,
        }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidArgument(m.to_string()));
        if !(self.decay > 0.0 && self.decay < 1.0) {
            return bad("decay must lie in (0, 1)");
        }
        if !(self.eps0 > 0.0 && self.eps_min > 0.0 && self.eps_min < self.eps0) {
            return bad("need 0 < eps_min < eps0");
        }
        if !(self.tol > 0.0) || self.max_newton == 0 {
            return bad("tolerance and Newton step cap must be positive");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageReport {
    pub eps: f64,
    pub newton_steps: usize,
    pub residual: f64,
    /// ‖u_ε − u_previous‖∞
    pub change: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub lambda: f64,
    pub alpha: f64,
    pub beta: f64,
    pub trace_norm: f64,
    pub h1_seminorm: f64,
    pub energy_lower: f64,
    pub energy_upper: f64,
    pub energy_ok: bool,
    /// max over interior nodes of u / ((1+λ)U)^{1/(1+λ)}; only for core-supported σ
    pub pointwise_ratio: Option<f64>,
    pub pointwise_ok: Option<bool>,
}

impl BoundReport {
    pub fn all_ok(&self) -> bool {
        self.energy_ok && self.pointwise_ok.unwrap_or(true)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub converged: bool,
    pub stages: Vec<StageReport>,
    pub h1_seminorm: f64,
    #[serde(rename = "energy_J")]
    pub energy_j: Option<f64>,
    pub bounds: Option<BoundReport>,
    pub min_interior_value: f64,
}

impl SolveReport {
    pub fn newton_steps(&self) -> usize {
        self.stages.iter().map(|s| s.newton_steps).sum()
    }
}

/// Relative slack allowed by `verify_bounds` on the energy bracket.
pub const ENERGY_SLACK: f64 = 0.02;
/// Relative slack allowed by `verify_bounds` on the pointwise bound.
pub const POINTWISE_SLACK: f64 = 0.01;

pub(crate) fn check_lambda(lambda: f64) -> Result<()> {
    if lambda > 1.0 {
        return Err(Error::OutOfScopeRegime { lambda });
    }
    if !(lambda >= 0.0) {
        return Err(Error::ExponentOutOfRange { lambda });
    }
    Ok(())
}

/// Charges with at least one interior vertex, in dof coordinates.
pub(crate) struct ChargeSet {
    cells: Vec<usize>,
    dofs: Vec<[usize; 3]>,
    bary: Vec<[f64; 3]>,
    weight: Vec<f64>,
}

impl ChargeSet {
    pub(crate) fn new(sigma: &DiscreteMeasure) -> Self {
        let mesh = sigma.mesh();
        let mut set = ChargeSet {
            cells: Vec::new(),
            dofs: Vec::new(),
            bary: Vec::new(),
            weight: Vec::new(),
        };
        for c in sigma.charges() {
            let cell = mesh.cell(c.cell);
            let mut dofs = [usize::MAX; 3];
            let mut reach = 0.0;
            for (a, &v) in cell.iter().enumerate() {
                if let Some(i) = mesh.dof(v) {
                    dofs[a] = i;
                    reach += c.bary[a];
                }
            }
            if reach > 0.0 {
                set.cells.push(c.cell);
                set.dofs.push(dofs);
                set.bary.push(c.bary);
                set.weight.push(c.weight);
            }
        }
        set
    }

    pub(crate) fn len(&self) -> usize {
        self.weight.len()
    }

    pub(crate) fn weight(&self, k: usize) -> f64 {
        self.weight[k]
    }

    pub(crate) fn value(&self, k: usize, u: &[f64]) -> f64 {
        let d = &self.dofs[k];
        let b = &self.bary[k];
        (0..3).filter(|&a| d[a] != usize::MAX).map(|a| b[a] * u[d[a]]).sum()
    }

    /// Adds coef·φ_a at charge k into the dof vector `out`.
    fn scatter(&self, k: usize, coef: f64, out: &mut [f64]) {
        let d = &self.dofs[k];
        let b = &self.bary[k];
        for a in 0..3 {
            if d[a] != usize::MAX {
                out[d[a]] += coef * b[a];
            }
        }
    }
}

struct Problem<'a> {
    k: &'a CsrMatrix,
    slots: Vec<[usize; 9]>,
    charges: ChargeSet,
    lambda: f64,
    backend: LinearBackend,
}

impl Problem<'_> {
    /// Smallest u_h + ε over the charges.
    fn min_shifted(&self, u: &[f64], eps: f64) -> f64 {
        (0..self.charges.len())
            .map(|k| self.charges.value(k, u) + eps)
            .fold(f64::INFINITY, f64::min)
    }

    fn nonlinear(&self, u: &[f64], eps: f64) -> Vec<f64> {
        let mut n = vec![0.0; u.len()];
        for k in 0..self.charges.len() {
            let v = self.charges.value(k, u) + eps;
            let coef = self.charges.weight(k) * v.powf(-self.lambda);
            self.charges.scatter(k, coef, &mut n);
        }
        n
    }

    /// Residual K u − N_ε(u) and the scale max(1, ‖N‖∞).
    fn residual(&self, u: &[f64], eps: f64) -> (Vec<f64>, f64) {
        let n = self.nonlinear(u, eps);
        let mut r = self.k.matvec(u);
        for (ri, ni) in r.iter_mut().zip(&n) {
            *ri -= ni;
        }
        (r, norm_inf(&n).max(1.0))
    }

    fn jacobian(&self, u: &[f64], eps: f64) -> CsrMatrix {
        let mut jac = self.k.clone();
        let vals = jac.values_mut();
        for k in 0..self.charges.len() {
            let v = self.charges.value(k, u) + eps;
            let coef = self.lambda * self.charges.weight(k) * v.powf(-self.lambda - 1.0);
            let d = &self.charges.dofs[k];
            let b = &self.charges.bary[k];
            let slots = &self.slots[self.charges.cells[k]];
            for a in 0..3 {
                if d[a] == usize::MAX {
                    continue;
                }
                for c in 0..3 {
                    let s = slots[3 * a + c];
                    if s != usize::MAX {
                        vals[s] += coef * (b[a] * b[c]);
                    }
                }
            }
        }
        jac
    }

    /// Damped Newton for K u = N_ε(u) from `u`, in place.
    fn newton(&self, u: &mut Vec<f64>, eps: f64, opts: &SolverOptions) -> Result<(usize, f64)> {
        let (mut r, mut scale) = self.residual(u, eps);
        let mut rnorm = norm2(&r);
        for step in 0..=opts.max_newton {
            let rel = norm_inf(&r) / scale;
            if rel <= opts.tol {
                return Ok((step, rel));
            }
            if step == opts.max_newton {
                break;
            }
            let jac = self.jacobian(u, eps);
            let neg: Vec<f64> = r.iter().map(|v| -v).collect();
            let delta = self.backend.solve(&jac, &neg)?;
            let mut t = 1.0;
            let mut accepted = false;
            for _ in 0..=30 {
                let trial: Vec<f64> = u.iter().zip(&delta).map(|(x, d)| x + t * d).collect();
                if self.min_shifted(&trial, eps) > 0.0 {
                    let (rt, st) = self.residual(&trial, eps);
                    let tn = norm2(&rt);
                    if tn.is_finite() && tn < rnorm {
                        *u = trial;
                        r = rt;
                        scale = st;
                        rnorm = tn;
                        accepted = true;
                        break;
                    }
                }
                t *= 0.5;
            }
            if !accepted {
                // no descent left: accept if already at round-off level
                let rel = norm_inf(&r) / scale;
                if rel <= 1e3 * opts.tol {
                    return Ok((step, rel));
                }
                return Err(Error::StageFailure {
                    eps,
                    steps: step,
                    residual: rel,
                });
            }
        }
        Err(Error::StageFailure {
            eps,
            steps: opts.max_newton,
            residual: norm_inf(&r) / scale,
        })
    }
}

/// Solves the discrete singular problem; see [`solve_singular_traced`].
pub fn solve_singular(
    a: &CoefficientField,
    sigma: &DiscreteMeasure,
    lambda: f64,
    opts: &SolverOptions,
) -> Result<(FeFunction, SolveReport)> {
    let (u, report, _) = solve_singular_traced(a, sigma, lambda, opts, false)?;
    Ok((u, report))
}

/// Solves K u = N_ε(u) for ε = ε₀·decay^k, warm-starting each stage, then
/// (optionally) at ε = 0. Also returns the stage solutions when `trace` is set.
pub fn solve_singular_traced(
    a: &CoefficientField,
    sigma: &DiscreteMeasure,
    lambda: f64,
    opts: &SolverOptions,
    trace: bool,
) -> Result<(FeFunction, SolveReport, Vec<FeFunction>)> {
    check_lambda(lambda)?;
    opts.validate()?;
    let mesh = sigma.mesh().clone();
    if a.mesh().as_ref() != mesh.as_ref() {
        return Err(Error::IncompatibleMeasures("coefficient and measure meshes differ"));
    }
    if sigma.is_zero() {
        return Err(Error::ZeroMeasure);
    }
    if !a.is_symmetric() {
        return Err(Error::NotSymmetric);
    }
    let k = assemble_stiffness(&mesh, a);
    let b = sigma.interior_load();
    let linear = opts.backend.solve(&k, &b)?;
    let mut stages = Vec::new();
    let mut traced = Vec::new();
    if lambda == 0.0 {
        stages.push(StageReport {
            eps: 0.0,
            newton_steps: 0,
            residual: 0.0,
            change: 0.0,
        });
        let u = FeFunction::from_interior(mesh.clone(), &linear);
        if trace {
            traced.push(u.clone());
        }
        let report = finish_report(&u, &k, sigma, lambda, stages, opts)?;
        return Ok((u, report, traced));
    }
    let problem = Problem {
        k: &k,
        slots: element_slots(&mesh, &k),
        charges: ChargeSet::new(sigma),
        lambda,
        backend: opts.backend,
    };
    let mut u: Vec<f64> = linear.iter().map(|&x| x.max(opts.eps0)).collect();
    let mut eps = opts.eps0;
    loop {
        let prev = u.clone();
        let (steps, residual) = problem.newton(&mut u, eps, opts)?;
        let change = diff_inf(&u, &prev);
        stages.push(StageReport {
            eps,
            newton_steps: steps,
            residual,
            change,
        });
        if trace {
            traced.push(FeFunction::from_interior(mesh.clone(), &u));
        }
        let settled = stages.len() > 1 && change < opts.tol;
        eps *= opts.decay;
        if settled || eps < opts.eps_min {
            break;
        }
    }
    if opts.exact_final_stage {
        let prev = u.clone();
        let (steps, residual) = problem.newton(&mut u, 0.0, opts)?;
        stages.push(StageReport {
            eps: 0.0,
            newton_steps: steps,
            residual,
            change: diff_inf(&u, &prev),
        });
        if trace {
            traced.push(FeFunction::from_interior(mesh.clone(), &u));
        }
    }
    let u = FeFunction::from_interior(mesh, &u);
    let report = finish_report(&u, &k, sigma, lambda, stages, opts)?;
    Ok((u, report, traced))
}

fn diff_inf(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

fn finish_report(
    u: &FeFunction,
    k: &CsrMatrix,
    sigma: &DiscreteMeasure,
    lambda: f64,
    stages: Vec<StageReport>,
    opts: &SolverOptions,
) -> Result<SolveReport> {
    let dofs = u.interior_values();
    let energy_j = (lambda < 1.0).then(|| j_value(k, &dofs, &ChargeSet::new(sigma), lambda));
    let min_interior_value = dofs.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(SolveReport {
        converged: stages.iter().all(|s| s.residual <= 1e3 * opts.tol),
        stages,
        h1_seminorm: u.h1_seminorm(),
        energy_j,
        bounds: None,
        min_interior_value: min_interior_value.max(opts.u_min),
    })
}

fn j_value(k: &CsrMatrix, u: &[f64], charges: &ChargeSet, lambda: f64) -> f64 {
    let quad = 0.5 * k.bilinear(u, u);
    let p = 1.0 - lambda;
    let pairing: f64 = (0..charges.len())
        .map(|c| charges.weight(c) * charges.value(c, u).max(0.0).powf(p))
        .sum();
    quad - pairing / p
}

/// Pairings ∫φ_i u^{-λ} dσ of the right-hand side σ/u^λ with the interior basis.
pub fn singular_load(u: &FeFunction, sigma: &DiscreteMeasure, lambda: f64) -> Result<Vec<f64>> {
    check_lambda(lambda)?;
    let charges = ChargeSet::new(sigma);
    let dofs = u.interior_values();
    let mut out = vec![0.0; dofs.len()];
    for k in 0..charges.len() {
        let v = charges.value(k, &dofs);
        if !(v > 0.0) {
            return Err(Error::WeightSingularity);
        }
        charges.scatter(k, charges.weight(k) * v.powf(-lambda), &mut out);
    }
    Ok(out)
}

/// J(u) = ½⟨Ku, u⟩ − (1−λ)⁻¹ ∫ u₊^{1−λ} dσ.
pub fn energy_j(u: &FeFunction, a: &CoefficientField, sigma: &DiscreteMeasure, lambda: f64) -> Result<f64> {
    if lambda == 1.0 {
        return Err(Error::FunctionalUndefined);
    }
    check_lambda(lambda)?;
    if !a.is_symmetric() {
        return Err(Error::RequiresSymmetry);
    }
    let mesh: &Arc<Mesh> = u.mesh();
    let k = assemble_stiffness(mesh, a);
    Ok(j_value(&k, &u.interior_values(), &ChargeSet::new(sigma), lambda))
}

/// Checks the energy bracket β^{-1/(1+λ)}⫼σ⫼^{1/(1+λ)} ≤ |u|_{H¹} ≤ α^{-1/(1+λ)}⫼σ⫼^{1/(1+λ)}
/// and, for core-supported σ, the pointwise bound u ≤ ((1+λ)U)^{1/(1+λ)} with U
/// the linear solution.
pub fn verify_bounds(
    u: &FeFunction,
    a: &CoefficientField,
    sigma: &DiscreteMeasure,
    lambda: f64,
    opts: &SolverOptions,
) -> Result<BoundReport> {
    let (alpha, beta) = (a.alpha(), a.beta());
    let norm = potential::trace_norm_with(sigma, lambda, opts)?;
    let q = 1.0 / (1.0 + lambda);
    let h1 = u.h1_seminorm();
    let energy_lower = (norm / beta).powf(q);
    let energy_upper = (norm / alpha).powf(q);
    let energy_ok = h1 >= energy_lower * (1.0 - ENERGY_SLACK) && h1 <= energy_upper * (1.0 + ENERGY_SLACK);
    let core = sigma.rule().is_none_or(|r| r.descriptor().core_margin > 0.0);
    let (pointwise_ratio, pointwise_ok) = if core {
        let big_u = potential::linear_solution_with(a, sigma, opts.backend)?;
        let mut ratio: f64 = 0.0;
        for &v in u.mesh().interior_vertices() {
            let bound = ((1.0 + lambda) * big_u.values()[v].max(0.0)).powf(q);
            let val = u.values()[v];
            if val > 0.0 {
                ratio = ratio.max(if bound > 0.0 { val / bound } else { f64::INFINITY });
            }
        }
        (Some(ratio), Some(ratio <= 1.0 + POINTWISE_SLACK))
    } else {
        (None, None)
    };
    Ok(BoundReport {
        lambda,
        alpha,
        beta,
        trace_norm: norm,
        h1_seminorm: h1,
        energy_lower,
        energy_upper,
        energy_ok,
        pointwise_ratio,
        pointwise_ok,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{build_interval_mesh, build_square_mesh, p1_interpolate};
    use crate::measures::{atom_measure, density_measure, truncate_to_core, DEFAULT_ORDER};
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    #[test]
    fn manufactured_lambda_one() {
        let m = build_interval_mesh(128).unwrap();
        let a = CoefficientField::identity(&m);
        let s = density_measure(&m, |p| (PI * (PI * p[0]).sin()).powi(2), DEFAULT_ORDER).unwrap();
        let (u, rep) = solve_singular(&a, &s, 1.0, &SolverOptions::default()).unwrap();
        assert!(rep.converged);
        assert!(u.l2_error_against(|p| (PI * p[0]).sin(), 6) < 2e-4);
        assert_abs_diff_eq!(rep.h1_seminorm, PI / 2f64.sqrt(), epsilon = 1e-3);
        assert_eq!(rep.stages.last().unwrap().eps, 0.0);
        assert!(rep.energy_j.is_none());
    }

    #[test]
    fn manufactured_lambda_half() {
        let m = build_interval_mesh(128).unwrap();
        let a = CoefficientField::identity(&m);
        let s = density_measure(&m, |p| 2.0 * (p[0] * (1.0 - p[0])).sqrt(), DEFAULT_ORDER).unwrap();
        let (u, rep) = solve_singular(&a, &s, 0.5, &SolverOptions::default()).unwrap();
        assert!(u.l2_error_against(|p| p[0] * (1.0 - p[0]), 6) < 1e-4);
        assert_abs_diff_eq!(rep.energy_j.unwrap(), -0.5, epsilon = 1e-3);
    }

    #[test]
    fn energy_j_examples() {
        let m = build_interval_mesh(256).unwrap();
        let a = CoefficientField::identity(&m);
        let s = density_measure(&m, |p| 2.0 * (p[0] * (1.0 - p[0])).sqrt(), DEFAULT_ORDER).unwrap();
        let zero = FeFunction::zero(m.clone());
        assert_eq!(energy_j(&zero, &a, &s, 0.5).unwrap(), 0.0);
        let u = p1_interpolate(|p| p[0] * (1.0 - p[0]), &m, true).unwrap();
        assert_abs_diff_eq!(energy_j(&u, &a, &s, 0.5).unwrap(), -0.5, epsilon = 1e-4);
        assert!(matches!(energy_j(&u, &a, &s, 1.0), Err(Error::FunctionalUndefined)));
        // σ = 0: J is the quadratic part only
        let none = DiscreteMeasure::zero(&m);
        let j1 = energy_j(&u, &a, &none, 0.5).unwrap();
        let j3 = energy_j(&u.scaled(3.0), &a, &none, 0.5).unwrap();
        assert_abs_diff_eq!(j3, 9.0 * j1, epsilon = 1e-12);
        let sq = build_square_mesh(4).unwrap();
        let skew = CoefficientField::from_fn(&sq, |p| [1.0, p[0], -p[0], 1.0]).unwrap();
        let z = FeFunction::zero(sq.clone());
        let s2 = density_measure(&sq, |_| 1.0, DEFAULT_ORDER).unwrap();
        assert!(matches!(energy_j(&z, &skew, &s2, 0.5), Err(Error::RequiresSymmetry)));
    }

    #[test]
    fn rejects_bad_inputs() {
        let m = build_interval_mesh(8).unwrap();
        let a = CoefficientField::identity(&m);
        let s = density_measure(&m, |_| 1.0, DEFAULT_ORDER).unwrap();
        let o = SolverOptions::default();
        assert!(matches!(solve_singular(&a, &DiscreteMeasure::zero(&m), 0.5, &o), Err(Error::ZeroMeasure)));
        assert!(matches!(solve_singular(&a, &s, 1.5, &o), Err(Error::OutOfScopeRegime { .. })));
        assert!(matches!(solve_singular(&a, &s, -0.1, &o), Err(Error::ExponentOutOfRange { .. })));
    }

    #[test]
    fn lambda_zero_is_linear() {
        let m = build_interval_mesh(16).unwrap();
        let a = CoefficientField::scalar(&m, |p| 1.0 + p[0]).unwrap();
        let s = density_measure(&m, |_| 1.0, DEFAULT_ORDER).unwrap();
        let (u, rep) = solve_singular(&a, &s, 0.0, &SolverOptions::default()).unwrap();
        let lin = potential::linear_solution(&a, &s).unwrap();
        assert_eq!(u.values(), lin.values());
        assert_eq!(rep.stages.len(), 1);
    }

    #[test]
    fn stages_increase_monotonically() {
        let m = build_interval_mesh(64).unwrap();
        let a = CoefficientField::identity(&m);
        let s = atom_measure(&m, 0.3, 1.0).unwrap();
        let (_, _, stages) = solve_singular_traced(&a, &s, 0.5, &SolverOptions::default(), true).unwrap();
        for w in stages.windows(2) {
            for (x, y) in w[0].values().iter().zip(w[1].values()) {
                assert!(*y >= x - 1e-9);
            }
        }
    }

    #[test]
    fn bounds_examples() {
        let m = build_interval_mesh(128).unwrap();
        let o = SolverOptions::default();
        let id = CoefficientField::identity(&m);
        let s = density_measure(&m, |_| 1.0, DEFAULT_ORDER).unwrap();
        let (u, _) = solve_singular(&id, &s, 0.5, &o).unwrap();
        let rep = verify_bounds(&u, &id, &s, 0.5, &o).unwrap();
        assert!(rep.energy_ok);
        assert!((rep.h1_seminorm / rep.energy_upper - 1.0).abs() < 1e-8);
        let bad = verify_bounds(&u.scaled(2.0), &id, &s, 0.5, &o).unwrap();
        assert!(!bad.energy_ok);
        let aniso = CoefficientField::scalar(&m, |p| if p[0] < 0.5 { 0.5 } else { 2.0 }).unwrap();
        assert_eq!((aniso.alpha(), aniso.beta()), (0.5, 2.0));
        let core = truncate_to_core(&s, 0.25).unwrap();
        let (u, _) = solve_singular(&aniso, &core, 0.5, &o).unwrap();
        let rep = verify_bounds(&u, &aniso, &core, 0.5, &o).unwrap();
        assert!(rep.all_ok(), "{rep:?}");
        assert!(rep.pointwise_ratio.unwrap() <= 1.0);
    }

    #[test]
    fn solves_in_two_dimensions() {
        let m = build_square_mesh(16).unwrap();
        let a = CoefficientField::identity(&m);
        let s = density_measure(&m, |_| 1.0, DEFAULT_ORDER).unwrap();
        let (u, rep) = solve_singular(&a, &s, 0.5, &SolverOptions::default()).unwrap();
        assert!(rep.converged);
        assert!(rep.min_interior_value > 0.0);
        let cg = SolverOptions {
            backend: LinearBackend::Cg { rel_tol: 1e-13 },
            ..SolverOptions::default()
        };
        let (v, _) = solve_singular(&a, &s, 0.5, &cg).unwrap();
        assert!(u.sub(&v).max_abs() < 1e-10);
    }
}
