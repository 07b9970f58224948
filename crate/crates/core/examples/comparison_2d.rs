//! Comparison principle and a-priori bounds on the unit square with a layered
//! scalar coefficient.

use singular_elliptic::grid::build_square_mesh;
use singular_elliptic::homogenization::{layered_coefficient, Axis, Profile};
use singular_elliptic::measures::{density_measure, truncate_to_core, DEFAULT_ORDER};
use singular_elliptic::singular::{solve_singular, verify_bounds, SolverOptions};

fn main() -> singular_elliptic::Result<()> {
    let mesh = build_square_mesh(64)?;
    let opts = SolverOptions::default();
    let a = layered_coefficient(&Profile::parse("2 + sin(2*pi*y)")?, 0.25, Axis::Y, &mesh)?;
    let sigma = density_measure(&mesh, |p| 1.0 + p[0], DEFAULT_ORDER)?;
    let nu = density_measure(&mesh, |p| 1.5 + p[0] + p[1], DEFAULT_ORDER)?;
    for lambda in [0.25, 0.5, 1.0] {
        let (u, _) = solve_singular(&a, &sigma, lambda, &opts)?;
        let (v, _) = solve_singular(&a, &nu, lambda, &opts)?;
        let excess = u.values().iter().zip(v.values()).map(|(x, y)| x - y).fold(f64::NEG_INFINITY, f64::max);
        let core = truncate_to_core(&sigma, 0.25)?;
        let (w, _) = solve_singular(&a, &core, lambda, &opts)?;
        let b = verify_bounds(&w, &a, &core, lambda, &opts)?;
        println!(
            "lambda = {lambda}: max(u - v) = {excess:.2e}; core solution |w|_H1 = {:.6} in [{:.6}, {:.6}], pointwise ratio {:.4}",
            b.h1_seminorm,
            b.energy_lower,
            b.energy_upper,
            b.pointwise_ratio.unwrap()
        );
    }
    Ok(())
}
