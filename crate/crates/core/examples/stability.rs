//! Stability of solutions under perturbation of the measure: |u - v|_H1
//! against alpha^(-1/(1+lambda)) d_lambda(sigma, nu)^(1/(1+lambda)).

use std::sync::Arc;

use singular_elliptic::grid::build_interval_mesh;
use singular_elliptic::measures::{density_measure, DEFAULT_ORDER};
use singular_elliptic::operators::CoefficientField;
use singular_elliptic::potential::d_lambda_with;
use singular_elliptic::singular::{solve_singular, SolverOptions};

fn main() -> singular_elliptic::Result<()> {
    let mesh = build_interval_mesh(512)?;
    let a = CoefficientField::scalar(&mesh, |p| 1.0 + 0.5 * (6.0 * p[0]).sin().abs())?;
    let opts = SolverOptions::default();
    let sigma = density_measure(&mesh, |p| 1.0 + p[0], DEFAULT_ORDER)?;
    println!("alpha = {}, beta = {}", a.alpha(), a.beta());
    println!("{:>6} {:>6} {:>12} {:>12} {:>8}", "lambda", "eta", "|u-v|", "bound", "ratio");
    for lambda in [0.25, 0.5, 1.0] {
        let (u, _) = solve_singular(&a, &sigma, lambda, &opts)?;
        for eta in [0.5, 0.1, 0.01] {
            let f = sigma.density().unwrap().clone();
            let nu = sigma.with_density(Arc::new(move |p, d| f(p, d) * (1.0 + eta * (20.0 * p[0]).cos())))?;
            let (v, _) = solve_singular(&a, &nu, lambda, &opts)?;
            let lhs = u.sub(&v).h1_seminorm();
            let q = 1.0 / (1.0 + lambda);
            let bound = a.alpha().powf(-q) * d_lambda_with(&sigma, &nu, lambda, &opts)?.powf(q);
            println!("{lambda:>6.2} {eta:>6.2} {lhs:>12.4e} {bound:>12.4e} {:>8.4}", lhs / bound);
        }
    }
    Ok(())
}
