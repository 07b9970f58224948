//! Convergence of the singular solver on u = sin(pi x), lambda = 1, and on
//! u = x(1 - x), lambda = 1/2.

use std::f64::consts::PI;

use singular_elliptic::grid::build_interval_mesh;
use singular_elliptic::measures::{density_measure, DEFAULT_ORDER};
use singular_elliptic::operators::CoefficientField;
use singular_elliptic::singular::{solve_singular, SolverOptions};

fn study(lambda: f64, f: fn(f64) -> f64, exact: fn(f64) -> f64) -> singular_elliptic::Result<()> {
    println!("lambda = {lambda}");
    let mut prev: Option<f64> = None;
    for n in [64, 128, 256, 512] {
        let mesh = build_interval_mesh(n)?;
        let a = CoefficientField::identity(&mesh);
        let sigma = density_measure(&mesh, move |p| f(p[0]), DEFAULT_ORDER)?;
        let (u, report) = solve_singular(&a, &sigma, lambda, &SolverOptions::default())?;
        let err = u.l2_error_against(|p| exact(p[0]), 6);
        let order = prev.map_or(String::from("-"), |e| format!("{:.3}", (e / err).log2()));
        println!(
            "  n = {n:4}  L2 error = {err:.3e}  order = {order:>5}  Newton steps = {}  J = {}",
            report.newton_steps(),
            report.energy_j.map_or("undefined".into(), |j| format!("{j:.8}"))
        );
        prev = Some(err);
    }
    Ok(())
}

fn main() -> singular_elliptic::Result<()> {
    study(1.0, |x| (PI * (PI * x).sin()).powi(2), |x| (PI * x).sin())?;
    study(0.5, |x| 2.0 * (x * (1.0 - x)).sqrt(), |x| x * (1.0 - x))
}
