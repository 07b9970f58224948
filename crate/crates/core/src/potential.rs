//! Green potentials, H⁻¹ norms, the energy norm ⫼σ⫼_λ with its two-sided
//! surrogate, the distance d_λ and potential-weighted measures.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::FeFunction;
use crate::measures::{abs_diff, DiscreteMeasure, Mass};
use crate::operators::{assemble_stiffness, dot, CoefficientField, LinearBackend};
use crate::singular::{check_lambda, solve_singular, ChargeSet, SolverOptions};

/// U = G_Ω σ: solution of the Dirichlet Laplacian with load σ.
pub fn green_potential(sigma: &DiscreteMeasure) -> Result<FeFunction> {
    green_potential_with(sigma, LinearBackend::default())
}

pub fn green_potential_with(sigma: &DiscreteMeasure, backend: LinearBackend) -> Result<FeFunction> {
    let a = CoefficientField::identity(sigma.mesh());
    linear_solution_with(&a, sigma, backend)
}

/// Solution of −div(A∇U) = σ.
pub fn linear_solution(a: &CoefficientField, sigma: &DiscreteMeasure) -> Result<FeFunction> {
    linear_solution_with(a, sigma, LinearBackend::default())
}

pub fn linear_solution_with(
    a: &CoefficientField,
    sigma: &DiscreteMeasure,
    backend: LinearBackend,
) -> Result<FeFunction> {
    let mesh = sigma.mesh();
    if a.mesh().as_ref() != mesh.as_ref() {
        return Err(Error::IncompatibleMeasures("coefficient and measure meshes differ"));
    }
    let k = assemble_stiffness(mesh, a);
    let x = backend.solve(&k, &sigma.interior_load())?;
    Ok(FeFunction::from_interior(mesh.clone(), &x))
}

/// (∫ G_Ω σ dσ)^{1/2} = (bᵀ K_I⁻¹ b)^{1/2}.
pub fn h_minus1_norm(sigma: &DiscreteMeasure) -> Result<f64> {
    let u = green_potential(sigma)?;
    Ok(dot(&sigma.interior_load(), &u.interior_values()).max(0.0).sqrt())
}

/// (∫ U^{(1−λ)/(1+λ)} dσ)^{(1+λ)/2} with U = G_Ω σ, evaluated at the measure's
/// quadrature points and atoms (0⁰ = 1).
pub fn cov_energy(sigma: &DiscreteMeasure, lambda: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::ExponentOutOfRange { lambda });
    }
    if sigma.is_zero() {
        return Ok(0.0);
    }
    let u = green_potential(sigma)?;
    let p = (1.0 - lambda) / (1.0 + lambda);
    let total: f64 = sigma
        .charges()
        .map(|c| {
            let v = u.eval_in_cell(c.cell, &c.bary).max(0.0);
            c.weight * if p == 0.0 { 1.0 } else { v.powf(p) }
        })
        .sum();
    Ok(total.powf((1.0 + lambda) / 2.0))
}

/// ⫼σ⫼_λ = |∇u|^{1+λ} where u solves the singular problem with A = I.
pub fn trace_norm(sigma: &DiscreteMeasure, lambda: f64) -> Result<f64> {
    trace_norm_with(sigma, lambda, &SolverOptions::default())
}

pub fn trace_norm_with(sigma: &DiscreteMeasure, lambda: f64, opts: &SolverOptions) -> Result<f64> {
    Ok(trace_norm_solve(sigma, lambda, opts)?.0)
}

/// Trace norm together with the Newton step count of the underlying solve.
fn trace_norm_solve(sigma: &DiscreteMeasure, lambda: f64, opts: &SolverOptions) -> Result<(f64, usize)> {
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::ExponentOutOfRange { lambda });
    }
    if sigma.is_zero() {
        return Ok((0.0, 0));
    }
    let a = CoefficientField::identity(sigma.mesh());
    let (u, rep) = solve_singular(&a, sigma, lambda, opts)?;
    Ok((u.h1_seminorm().powf(1.0 + lambda), rep.newton_steps()))
}

/// d_λ(σ, ν) = ⫼|σ − ν|⫼_λ.
pub fn d_lambda(sigma: &DiscreteMeasure, nu: &DiscreteMeasure, lambda: f64) -> Result<f64> {
    d_lambda_with(sigma, nu, lambda, &SolverOptions::default())
}

pub fn d_lambda_with(sigma: &DiscreteMeasure, nu: &DiscreteMeasure, lambda: f64, opts: &SolverOptions) -> Result<f64> {
    trace_norm_with(&abs_diff(sigma, nu)?, lambda, opts)
}

/// (G_Ω μ)^p μ, weighting densities at quadrature points and atoms at their positions.
pub fn potential_weighted_measure(mu: &DiscreteMeasure, p: f64) -> Result<DiscreteMeasure> {
    if p == 0.0 {
        return Ok(mu.clone());
    }
    if p < 0.0 && mu.is_zero() {
        return Err(Error::WeightSingularity);
    }
    let u = green_potential(mu)?;
    let mesh = mu.mesh().clone();
    mu.reweighted(|cell, bary| {
        let v = u.eval_in_cell(cell, bary);
        // charges in elements without interior vertices never reach a dof
        if v <= 0.0 && mesh.cell(cell).iter().all(|&w| mesh.is_boundary(w)) {
            return 0.0;
        }
        v.max(0.0).powf(p)
    })
}

/// ⟨N(u), u⟩-type identity check: Σ w u_h^{1−λ} over the measure's charges.
pub fn pairing(u: &FeFunction, sigma: &DiscreteMeasure, lambda: f64) -> Result<f64> {
    check_lambda(lambda)?;
    let charges = ChargeSet::new(sigma);
    let dofs = u.interior_values();
    Ok((0..charges.len())
        .map(|k| charges.weight(k) * charges.value(k, &dofs).max(0.0).powf(1.0 - lambda))
        .sum())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyReport {
    pub lambda: f64,
    pub trace_norm: f64,
    pub cov_energy: f64,
    pub h_minus1: f64,
    pub mass: Option<f64>,
    pub h: f64,
    pub newton_steps: usize,
}

pub fn energy_report(sigma: &DiscreteMeasure, lambda: f64, opts: &SolverOptions) -> Result<EnergyReport> {
    let (trace, steps) = trace_norm_solve(sigma, lambda, opts)?;
    Ok(EnergyReport {
        lambda,
        trace_norm: trace,
        cov_energy: cov_energy(sigma, lambda)?,
        h_minus1: h_minus1_norm(sigma)?,
        mass: match sigma.mass() {
            Mass::Finite(m) => Some(m),
            Mass::Infinite => None,
        },
        h: sigma.mesh().h(),
        newton_steps: steps,
    })
}

/// Upper constant (1−λ²)^{−(1−λ)/2} of the two-sided estimate for cov_energy.
pub fn cov_upper_constant(lambda: f64) -> f64 {
    if lambda >= 1.0 {
        1.0
    } else {
        (1.0 - lambda * lambda).powf(-(1.0 - lambda) / 2.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{build_interval_mesh, p1_interpolate};
    use crate::measures::{atom_measure, boundary_power_density, density_measure, truncate_to_core, DEFAULT_ORDER};
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    #[test]
    fn green_examples() {
        let m = build_interval_mesh(16).unwrap();
        let dx = density_measure(&m, |_| 1.0, DEFAULT_ORDER).unwrap();
        let u = green_potential(&dx).unwrap();
        for (p, v) in m.vertices().iter().zip(u.values()) {
            assert_abs_diff_eq!(*v, p[0] * (1.0 - p[0]) / 2.0, epsilon = 1e-14);
        }
        let at = atom_measure(&m, 0.5, 1.0).unwrap();
        let g = green_potential(&at).unwrap();
        for (p, v) in m.vertices().iter().zip(g.values()) {
            assert_abs_diff_eq!(*v, p[0].min(1.0 - p[0]) / 2.0, epsilon = 1e-14);
        }
        let z = green_potential(&DiscreteMeasure::zero(&m)).unwrap();
        assert!(z.values().iter().all(|&v| v == 0.0));
        let two = CoefficientField::scalar(&m, |_| 2.0).unwrap();
        let half = linear_solution(&two, &dx).unwrap();
        for (a, b) in half.values().iter().zip(u.values()) {
            assert_abs_diff_eq!(*a, 0.5 * b, epsilon = 1e-15);
        }
    }

    #[test]
    fn h_minus1_examples() {
        let m = build_interval_mesh(64).unwrap();
        assert_abs_diff_eq!(h_minus1_norm(&atom_measure(&m, 0.5, 1.0).unwrap()).unwrap(), 0.5, epsilon = 1e-14);
        let dx = density_measure(&m, |_| 1.0, DEFAULT_ORDER).unwrap();
        // P1 Galerkin error in ∫U dσ is O(h²)
        assert_abs_diff_eq!(h_minus1_norm(&dx).unwrap(), (1.0f64 / 12.0).sqrt(), epsilon = 1e-4);
        assert_eq!(h_minus1_norm(&DiscreteMeasure::zero(&m)).unwrap(), 0.0);
    }

    #[test]
    fn cov_examples() {
        let m = build_interval_mesh(64).unwrap();
        let dx = density_measure(&m, |_| 1.0, DEFAULT_ORDER).unwrap();
        assert_abs_diff_eq!(cov_energy(&dx, 1.0).unwrap(), 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(cov_energy(&dx, 0.0).unwrap(), h_minus1_norm(&dx).unwrap(), epsilon = 1e-14);
        let at = atom_measure(&m, 0.5, 1.0).unwrap();
        assert_abs_diff_eq!(cov_energy(&at, 0.5).unwrap(), 0.25f64.powf(0.25), epsilon = 1e-14);
        assert!(matches!(cov_energy(&dx, 1.5), Err(Error::ExponentOutOfRange { .. })));
    }

    #[test]
    fn trace_norm_examples() {
        let m = build_interval_mesh(128).unwrap();
        let s = density_measure(&m, |p| (PI * (PI * p[0]).sin()).powi(2), DEFAULT_ORDER).unwrap();
        let t = trace_norm(&s, 1.0).unwrap();
        assert_abs_diff_eq!(t, s.mass().value(), epsilon = 1e-9);
        assert_abs_diff_eq!(t, PI * PI / 2.0, epsilon = 1e-6);
        let at = atom_measure(&m, 0.5, 1.0).unwrap();
        assert_abs_diff_eq!(trace_norm(&at, 0.5).unwrap(), 0.25f64.powf(0.25), epsilon = 1e-3);
        let dx = density_measure(&m, |_| 1.0, DEFAULT_ORDER).unwrap();
        assert_abs_diff_eq!(trace_norm(&dx, 0.0).unwrap(), (1.0f64 / 12.0).sqrt(), epsilon = 1e-4);
        assert_eq!(trace_norm(&DiscreteMeasure::zero(&m), 0.5).unwrap(), 0.0);
        // 1-homogeneity
        let a = trace_norm(&dx, 0.5).unwrap();
        let b = trace_norm(&dx.scale(3.0).unwrap(), 0.5).unwrap();
        assert_abs_diff_eq!(b, 3.0 * a, epsilon = 1e-10);
    }

    #[test]
    fn distance_examples() {
        let m = build_interval_mesh(64).unwrap();
        let dx = density_measure(&m, |_| 1.0, DEFAULT_ORDER).unwrap();
        let two = density_measure(&m, |_| 2.0, DEFAULT_ORDER).unwrap();
        assert_eq!(d_lambda(&dx, &dx, 0.5).unwrap(), 0.0);
        for lambda in [0.0, 0.5, 1.0] {
            let d = d_lambda(&dx, &two, lambda).unwrap();
            assert_abs_diff_eq!(d, trace_norm(&dx, lambda).unwrap(), epsilon = 1e-12);
        }
        let mu = crate::measures::add(&dx, &atom_measure(&m, 0.3, 1.0).unwrap()).unwrap();
        for lambda in [0.25, 0.75] {
            let ab = d_lambda(&dx, &two, lambda).unwrap();
            let am = d_lambda(&dx, &mu, lambda).unwrap();
            let mb = d_lambda(&mu, &two, lambda).unwrap();
            assert!(ab <= am + mb + 1e-12);
            assert_abs_diff_eq!(am, d_lambda(&mu, &dx, lambda).unwrap(), epsilon = 1e-14);
        }
    }

    #[test]
    fn potential_weighted_examples() {
        let m = build_interval_mesh(64).unwrap();
        let at = atom_measure(&m, 0.5, 1.0).unwrap();
        assert_eq!(potential_weighted_measure(&at, 0.0).unwrap().load(), at.load());
        let w = potential_weighted_measure(&at, 0.5).unwrap();
        assert_abs_diff_eq!(w.atoms()[0].mass, 0.5, epsilon = 1e-14);
        let mut prev: Option<f64> = None;
        for n in [64, 128, 256] {
            let m = build_interval_mesh(n).unwrap();
            let dx = density_measure(&m, |_| 1.0, DEFAULT_ORDER).unwrap();
            let v = h_minus1_norm(&potential_weighted_measure(&dx, -1.0 / 3.0).unwrap()).unwrap();
            assert!(v.is_finite());
            if let Some(p) = prev {
                assert!((v - p).abs() < 1e-2 * p);
            }
            prev = Some(v);
        }
    }

    #[test]
    fn cov_bracket_and_interpolation() {
        let m = build_interval_mesh(256).unwrap();
        let measures = [
            density_measure(&m, |_| 1.0, DEFAULT_ORDER).unwrap(),
            boundary_power_density(&m, 0.5).unwrap(),
            atom_measure(&m, 0.3, 1.0).unwrap(),
        ];
        for s in &measures {
            for lambda in [0.25, 0.5, 0.75] {
                let t = trace_norm(s, lambda).unwrap();
                let c = cov_energy(s, lambda).unwrap();
                assert!(t <= c * 1.02, "{t} {c}");
                assert!(c <= cov_upper_constant(lambda) * t * 1.02);
                let interp = s.mass().value().powf(lambda) * h_minus1_norm(s).unwrap().powf(1.0 - lambda);
                assert!(t <= interp * 1.01);
            }
        }
    }

    #[test]
    fn picone_embedding() {
        let m = build_interval_mesh(128).unwrap();
        let s = truncate_to_core(&density_measure(&m, |p| 1.0 + p[0], DEFAULT_ORDER).unwrap(), 0.25).unwrap();
        let u = green_potential(&s).unwrap();
        let sup = u.values().iter().copied().fold(0.0, f64::max);
        for k in 1..6 {
            let phi = p1_interpolate(|p| (k as f64 * PI * p[0]).sin() + p[0] * (1.0 - p[0]), &m, true).unwrap();
            let lhs: f64 = s.charges().map(|c| c.weight * phi.eval_in_cell(c.cell, &c.bary).powi(2)).sum();
            assert!(lhs <= sup * phi.h1_seminorm().powi(2));
        }
    }

    #[test]
    fn pairing_matches_energy_at_solution() {
        let m = build_interval_mesh(64).unwrap();
        let s = density_measure(&m, |p| 1.0 + p[0], DEFAULT_ORDER).unwrap();
        let a = CoefficientField::identity(&m);
        let (u, _) = solve_singular(&a, &s, 0.5, &SolverOptions::default()).unwrap();
        assert_abs_diff_eq!(pairing(&u, &s, 0.5).unwrap(), u.h1_seminorm().powi(2), epsilon = 1e-10);
    }
}
